#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use papis::image::save_png16;
use papis::ImagePatch;
use serde_json::Value;

pub fn papis_cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_papis"))
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    papis_cmd().args(args).output().expect("binary runs")
}

pub fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr `{text}` is not JSON: {e}"))
}

pub fn save(img: &ImagePatch, path: &Path) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    save_png16(img, path).unwrap();
}

pub fn score(v: &Value, metric: &str) -> f64 {
    match &v[metric] {
        Value::Number(n) => n.as_f64().unwrap(),
        Value::String(s) if s == "inf" => f64::INFINITY,
        other => panic!("{metric}: unexpected {other}"),
    }
}
