mod common;

use std::collections::BTreeSet;

use common::*;
use papis::load_image;
use papis::wsi::{
    build_dataset, is_tissue, plan_dataset, synchronized_crops, tile_grid, DatasetParams,
    PatchManifest, SamplingMode, TissueFilter, Transform,
};
use papis::ImagePatch;
use proptest::prelude::*;

/// Upper 1% point of the chi-square distribution with 15 degrees of freedom.
const CHI2_15_99: f64 = 30.578;

#[test]
fn crop_origins_are_uniform() {
    let crops = synchronized_crops((2048, 2048), 10_000, 1024, 2024).unwrap();
    let positions = 1025usize;
    let edges = [0usize, 256, 512, 768, positions];
    let bin = |v: usize| {
        edges
            .windows(2)
            .position(|w| v >= w[0] && v < w[1])
            .unwrap()
    };
    let mut counts = [[0f64; 4]; 4];
    for &(x, y) in &crops {
        assert!(x < positions && y < positions);
        counts[bin(y)][bin(x)] += 1.0;
    }
    let mut chi2 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            let p = ((edges[r + 1] - edges[r]) * (edges[c + 1] - edges[c])) as f64
                / (positions * positions) as f64;
            let expected = 10_000.0 * p;
            chi2 += (counts[r][c] - expected).powi(2) / expected;
        }
    }
    assert!(chi2 < CHI2_15_99, "chi-square {chi2}");
}

fn slide(n: usize, seed: u64) -> ImagePatch {
    tissue_image(n, n, seed)
}

#[test]
fn grid_dataset_writes_sixteen_pairs() {
    let a = ImagePatch::filled(4096, 4096, 3, 0.6).unwrap();
    let b = ImagePatch::filled(4096, 4096, 3, 0.4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let params = DatasetParams {
        filter: TissueFilter::permissive(),
        output_size: 64,
        ..DatasetParams::default()
    };
    let manifest = build_dataset(&a, &b, ["a.png", "b.png"], &params, dir.path()).unwrap();
    assert_eq!(manifest.entries.len(), 16);
    let loaded = PatchManifest::load(dir.path().join("manifest.json")).unwrap();
    assert_eq!(loaded, manifest);
    let ids: BTreeSet<_> = manifest
        .entries
        .iter()
        .map(|e| e.patch_id.clone())
        .collect();
    assert_eq!(ids.len(), 16);
    for e in &manifest.entries {
        let pa = load_image(PatchManifest::patch_path(dir.path(), "a", &e.patch_id)).unwrap();
        let pb = load_image(PatchManifest::patch_path(dir.path(), "b", &e.patch_id)).unwrap();
        assert_eq!(pa.dims(), (64, 64, 3));
        assert!(pa.data().iter().all(|&v| (v - 0.6).abs() < 1e-4));
        assert!(pb.data().iter().all(|&v| (v - 0.4).abs() < 1e-4));
    }
}

#[test]
fn white_slide_yields_no_patches() {
    let a = ImagePatch::filled(2048, 2048, 3, 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let params = DatasetParams {
        output_size: 32,
        ..DatasetParams::default()
    };
    let m = build_dataset(&a, &a, ["a", "b"], &params, dir.path()).unwrap();
    assert!(m.entries.is_empty());
    assert_eq!(std::fs::read_dir(dir.path().join("a")).unwrap().count(), 0);
}

#[test]
fn random_dataset_is_reproducible_byte_for_byte() {
    let a = slide(1536, 1);
    let b = slide(1536, 2);
    let params = DatasetParams {
        mode: SamplingMode::Random,
        count: 206,
        seed: 11,
        patch_size: 256,
        output_size: 32,
        ..DatasetParams::default()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let m1 = build_dataset(&a, &b, ["a.png", "b.png"], &params, d1.path()).unwrap();
    let m2 = build_dataset(&a, &b, ["a.png", "b.png"], &params, d2.path()).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(m1.entries.len(), 206);
    assert_eq!(
        std::fs::read(d1.path().join("manifest.json")).unwrap(),
        std::fs::read(d2.path().join("manifest.json")).unwrap()
    );
    for e in &m1.entries {
        for modality in ["a", "b"] {
            assert_eq!(
                std::fs::read(PatchManifest::patch_path(d1.path(), modality, &e.patch_id)).unwrap(),
                std::fs::read(PatchManifest::patch_path(d2.path(), modality, &e.patch_id)).unwrap()
            );
        }
    }
    assert!(m1.entries.iter().any(|e| e.transform != Transform::None));
}

#[test]
fn both_modalities_share_geometry() {
    let a = slide(512, 3);
    let b = ImagePatch::from_fn(512, 512, 3, |y, x, c| 1.0 - a.get(y, x, c)).unwrap();
    let params = DatasetParams {
        mode: SamplingMode::Random,
        count: 10,
        patch_size: 128,
        output_size: 128,
        random_flip: false,
        filter: TissueFilter::permissive(),
        seed: 4,
        ..DatasetParams::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let m = build_dataset(&a, &b, ["a", "b"], &params, dir.path()).unwrap();
    for e in &m.entries {
        let pa = load_image(PatchManifest::patch_path(dir.path(), "a", &e.patch_id)).unwrap();
        let pb = load_image(PatchManifest::patch_path(dir.path(), "b", &e.patch_id)).unwrap();
        let want = a.crop(e.origin_x, e.origin_y, e.size, e.size).unwrap();
        for i in 0..pa.data().len() {
            assert!((pa.data()[i] - want.data()[i]).abs() < 1e-4);
            assert!((pa.data()[i] + pb.data()[i] - 1.0).abs() < 1e-4);
        }
    }
}

#[test]
fn mismatched_slides_are_rejected() {
    let a = ImagePatch::filled(256, 256, 3, 0.5).unwrap();
    let b = ImagePatch::filled(256, 255, 3, 0.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = build_dataset(&a, &b, ["a", "b"], &DatasetParams::default(), dir.path());
    assert!(matches!(r, Err(papis::Error::Dimension(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tile_count_formula(w in 1usize..5000, h in 1usize..5000, patch in 1usize..600) {
        prop_assume!(patch <= w.min(h));
        let tiles = tile_grid(w, h, patch);
        prop_assert_eq!(tiles.len(), (w / patch) * (h / patch));
        prop_assert!(tiles.windows(2).all(|p| (p[0].1, p[0].0) < (p[1].1, p[1].0)));
        prop_assert!(tiles.iter().all(|&(x, y)| x % patch == 0 && y % patch == 0 && x + patch <= w && y + patch <= h));
    }

    #[test]
    fn stricter_filter_accepts_a_subset(lo in 0.0f64..1.0, hi in 0.0f64..1.0, seed in 0u64..100) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let a = slide(256, seed);
        let plan = |frac: f64| {
            let params = DatasetParams {
                patch_size: 32,
                output_size: 32,
                random_flip: false,
                filter: TissueFilter { luminance_max: 0.8, min_foreground_fraction: frac },
                ..DatasetParams::default()
            };
            plan_dataset(&a, &a, &params, "a")
                .unwrap()
                .into_iter()
                .map(|e| (e.origin_x, e.origin_y))
                .collect::<BTreeSet<_>>()
        };
        prop_assert!(plan(hi).is_subset(&plan(lo)));
    }

    #[test]
    fn crops_stay_inside_and_repeat(w in 1usize..400, h in 1usize..400, size in 1usize..200, seed in any::<u64>()) {
        prop_assume!(size <= w.min(h));
        let c = synchronized_crops((w, h), 25, size, seed).unwrap();
        prop_assert!(c.iter().all(|&(x, y)| x + size <= w && y + size <= h));
        prop_assert_eq!(c, synchronized_crops((w, h), 25, size, seed).unwrap());
    }
}

#[test]
fn tissue_predicate_examples() {
    let f = TissueFilter::default();
    assert!(!is_tissue(&ImagePatch::filled(16, 16, 3, 1.0).unwrap(), &f));
    assert!(is_tissue(&ImagePatch::filled(16, 16, 3, 0.5).unwrap(), &f));
}
