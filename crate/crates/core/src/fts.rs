//! The `FTS1` feature tensor file.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! b"FTS1"
//! layer_count
//! layer_count x { channels, height, width }   -- one header per layer, then data
//! channel-major, row-major f32 LE samples
//! ```
//!
//! Each layer header is immediately followed by that layer's samples.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureStack;

pub const MAGIC: &[u8; 4] = b"FTS1";

/// One encoder block's raw activations.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorLayer {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// `channels * height * width` samples, channel-major.
    pub data: Vec<f32>,
}

impl TensorLayer {
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Contents of an `FTS1` file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTensors {
    pub layers: Vec<TensorLayer>,
}

impl FeatureTensors {
    /// Narrows a stack's samples to `f32` for export.
    pub fn from_stack(stack: &FeatureStack) -> Self {
        let layers = stack
            .layers()
            .iter()
            .map(|maps| {
                let (height, width) = maps[0].dims();
                TensorLayer {
                    channels: maps.len(),
                    height,
                    width,
                    data: maps
                        .iter()
                        .flat_map(|m| m.data().iter().map(|&v| v as f32))
                        .collect(),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            for v in [layer.channels, layer.height, layer.width] {
                w.write_all(&(v as u32).to_le_bytes())?;
            }
            for v in &layer.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(4)? != MAGIC {
            return Err(Error::Format("FTS1: bad magic".into()));
        }
        let count = cursor.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(64));
        for index in 0..count {
            let channels = cursor.u32()? as usize;
            let height = cursor.u32()? as usize;
            let width = cursor.u32()? as usize;
            let n = channels
                .checked_mul(height)
                .and_then(|v| v.checked_mul(width))
                .ok_or_else(|| Error::Format(format!("FTS1: layer {index} size overflows")))?;
            let raw = cursor
                .take(n.checked_mul(4).ok_or_else(|| {
                    Error::Format(format!("FTS1: layer {index} size overflows"))
                })?)?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            layers.push(TensorLayer {
                channels,
                height,
                width,
                data,
            });
        }
        if cursor.pos != bytes.len() {
            return Err(Error::Format(format!(
                "FTS1: {} trailing bytes",
                bytes.len() - cursor.pos
            )));
        }
        Ok(Self { layers })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("FTS1: truncated payload".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureTensors {
        FeatureTensors {
            layers: vec![
                TensorLayer {
                    channels: 2,
                    height: 2,
                    width: 3,
                    data: (0..12).map(|i| i as f32 * 0.25 - 1.0).collect(),
                },
                TensorLayer {
                    channels: 1,
                    height: 1,
                    width: 2,
                    data: vec![f32::MIN_POSITIVE, -0.0],
                },
            ],
        }
    }

    #[test]
    fn header_layout() {
        let bytes = sample().encode();
        assert_eq!(&bytes[..4], b"FTS1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-1.0f32).to_le_bytes());
        assert_eq!(bytes.len(), 8 + 12 + 48 + 12 + 8);
    }

    #[test]
    fn decode_inverts_encode() {
        let t = sample();
        let back = FeatureTensors::decode(&t.encode()).unwrap();
        assert_eq!(back.layers.len(), 2);
        for (a, b) in t.layers.iter().zip(&back.layers) {
            let bits = |l: &TensorLayer| l.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = sample().encode();
        let mut wrong = bytes.clone();
        wrong[3] = b'2';
        assert!(matches!(
            FeatureTensors::decode(&wrong),
            Err(Error::Format(_))
        ));
        for cut in [0, 3, 7, 15, bytes.len() - 1] {
            assert!(
                matches!(FeatureTensors::decode(&bytes[..cut]), Err(Error::Format(_))),
                "cut at {cut}"
            );
        }
        bytes.push(0);
        assert!(matches!(
            FeatureTensors::decode(&bytes),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn rejects_absurd_sizes_without_allocating() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        for _ in 0..3 {
            bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(FeatureTensors::decode(&bytes).is_err());
    }
}
