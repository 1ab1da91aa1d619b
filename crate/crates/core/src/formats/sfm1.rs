//! SFM1 feature-map container.
//!
//! ```text
//! offset 0   "SFM1"
//! offset 4   u32 LE  header length H
//! offset 8   H bytes UTF-8 JSON
//!            {"image_width", "image_height",
//!             "layers": [{"name", "maps", "height", "width"}, ...]}
//! offset 8+H payload: for each layer in header order,
//!            maps * height * width f32 LE, map-major then row-major
//! ```
//!
//! The payload must end exactly at the end of the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sas::{FeatureLayer, FeatureStack, Layer};

pub const MAGIC: &[u8; 4] = b"SFM1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sfm1Layer {
    pub name: Layer,
    pub maps: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sfm1Header {
    pub image_width: usize,
    pub image_height: usize,
    pub layers: Vec<Sfm1Layer>,
}

impl Sfm1Header {
    pub fn of(stack: &FeatureStack) -> Self {
        Sfm1Header {
            image_width: stack.image_width,
            image_height: stack.image_height,
            layers: stack
                .layers
                .iter()
                .map(|l| Sfm1Layer {
                    name: l.layer,
                    maps: l.maps,
                    height: l.height,
                    width: l.width,
                })
                .collect(),
        }
    }

    pub fn payload_len(&self) -> Option<u64> {
        self.layers.iter().try_fold(0u64, |acc, l| {
            (l.maps as u64)
                .checked_mul(l.height as u64)?
                .checked_mul(l.width as u64)?
                .checked_mul(4)?
                .checked_add(acc)
        })
    }
}

pub fn encode_sfm1(stack: &FeatureStack) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Sfm1Header::of(stack))?;
    let header_len = u32::try_from(header.len())
        .map_err(|_| Error::InvalidDimensions("SFM1 header exceeds 4 GiB".into()))?;
    let payload: usize = stack.layers.iter().map(|l| l.data.len() * 4).sum();
    let mut out = Vec::with_capacity(8 + header.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    for layer in &stack.layers {
        for v in &layer.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a container. Negative values are clamped to 0 (features are
/// post-ReLU); NaN and infinities are rejected.
pub fn decode_sfm1(bytes: &[u8]) -> Result<FeatureStack> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let malformed = |offset: usize, reason: String| Error::Malformed {
        offset: offset as u64,
        reason,
    };
    if bytes.len() < 8 {
        return Err(malformed(bytes.len(), "truncated header length".into()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let payload_start = 8usize
        .checked_add(header_len)
        .filter(|end| *end <= bytes.len())
        .ok_or_else(|| malformed(bytes.len(), format!("truncated header: {header_len} bytes declared")))?;
    let header: Sfm1Header = serde_json::from_slice(&bytes[8..payload_start])
        .map_err(|e| malformed(8, format!("header: {e}")))?;
    let expected = header
        .payload_len()
        .ok_or_else(|| malformed(8, "declared payload overflows".into()))?;
    let actual = (bytes.len() - payload_start) as u64;
    if actual < expected {
        return Err(malformed(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(malformed(
            payload_start + expected as usize,
            format!("{} trailing bytes after payload", actual - expected),
        ));
    }

    let mut offset = payload_start;
    let mut clamped = 0usize;
    let mut layers = Vec::with_capacity(header.layers.len());
    for l in &header.layers {
        let n = l.maps * l.height * l.width;
        let mut data = Vec::with_capacity(n);
        for chunk in bytes[offset..offset + 4 * n].chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite { offset: offset as u64 });
            }
            if v < 0.0 {
                clamped += 1;
                data.push(0.0);
            } else {
                data.push(v);
            }
            offset += 4;
        }
        layers.push(
            FeatureLayer::new(l.name, l.maps, l.height, l.width, data)
                .map_err(|e| malformed(8, e.to_string()))?,
        );
    }
    if clamped > 0 {
        log::warn!("clamped {clamped} negative feature values to 0");
    }
    let stack = FeatureStack::new(header.image_width, header.image_height, layers)
        .map_err(|e| malformed(8, e.to_string()))?;
    for m in stack.reference_mismatches() {
        log::warn!("feature geometry: {m}");
    }
    Ok(stack)
}

pub fn read_sfm1(path: impl AsRef<Path>) -> Result<FeatureStack> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sfm1(&bytes)
}

pub fn write_sfm1(path: impl AsRef<Path>, stack: &FeatureStack) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_sfm1(stack)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal() -> FeatureStack {
        let layer = FeatureLayer::new(Layer::Conv5, 1, 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        FeatureStack::new(2, 2, vec![layer]).unwrap()
    }

    #[test]
    fn minimal_file_round_trip() {
        let bytes = encode_sfm1(&minimal()).unwrap();
        assert_eq!(&bytes[..4], b"SFM1");
        let stack = decode_sfm1(&bytes).unwrap();
        let l = stack.layer(Layer::Conv5).unwrap();
        assert_eq!(l.data, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!((l.width, l.height), (2, 2));
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = encode_sfm1(&minimal()).unwrap();
        let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let json = std::str::from_utf8(&bytes[8..8 + len]).unwrap();
        assert_eq!(
            json,
            r#"{"image_width":2,"image_height":2,"layers":[{"name":"conv5","maps":1,"height":2,"width":2}]}"#
        );
        assert_eq!(bytes.len(), 8 + len + 16);
        assert_eq!(&bytes[8 + len + 4..8 + len + 8], &1.0f32.to_le_bytes());
    }

    #[test]
    fn conv1_reference_geometry_accepted() {
        let header = r#"{"image_width":224,"image_height":224,"layers":[{"name":"conv1","maps":128,"height":224,"width":224}]}"#;
        let mut bytes = b"SFM1".to_vec();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.resize(bytes.len() + 128 * 224 * 224 * 4, 0);
        let stack = decode_sfm1(&bytes).unwrap();
        let l = stack.layer(Layer::Conv1).unwrap();
        assert_eq!((l.maps, l.height, l.width), (128, 224, 224));
        assert!(stack.reference_mismatches().is_empty());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_sfm1(&minimal()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        let err = decode_sfm1(&bytes).unwrap_err();
        assert!(matches!(err, Error::BadMagic));
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let bytes = encode_sfm1(&minimal()).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match decode_sfm1(cut).unwrap_err() {
            Error::Malformed { offset, reason } => {
                assert_eq!(offset, cut.len() as u64);
                assert!(reason.contains("truncated payload"));
            }
            e => panic!("unexpected {e}"),
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_sfm1(&long), Err(Error::Malformed { .. })));
    }

    #[test]
    fn nan_reports_offset() {
        let mut bytes = encode_sfm1(&minimal()).unwrap();
        let n = bytes.len();
        bytes[n - 8..n - 4].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode_sfm1(&bytes).unwrap_err() {
            Error::NonFinite { offset } => assert_eq!(offset, (n - 8) as u64),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn negatives_clamped() {
        let layer = FeatureLayer::new(Layer::Conv3, 1, 1, 2, vec![-1.5, 2.0]).unwrap();
        let stack = FeatureStack::new(2, 1, vec![layer]).unwrap();
        let back = decode_sfm1(&encode_sfm1(&stack).unwrap()).unwrap();
        assert_eq!(back.layers[0].data, vec![0.0, 2.0]);
    }

    #[test]
    fn duplicate_layers_rejected() {
        let header = r#"{"image_width":1,"image_height":1,"layers":[{"name":"conv1","maps":1,"height":1,"width":1},{"name":"conv1","maps":1,"height":1,"width":1}]}"#;
        let mut bytes = b"SFM1".to_vec();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0; 8]);
        assert!(matches!(decode_sfm1(&bytes), Err(Error::Malformed { .. })));
    }

    #[test]
    fn unknown_layer_name_rejected() {
        let header = r#"{"image_width":1,"image_height":1,"layers":[{"name":"fc6","maps":1,"height":1,"width":1}]}"#;
        let mut bytes = b"SFM1".to_vec();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0; 4]);
        assert!(matches!(decode_sfm1(&bytes), Err(Error::Malformed { offset: 8, .. })));
    }

    proptest! {
        #[test]
        fn write_read_write_is_byte_identical(
            layers in proptest::collection::btree_map(0usize..5, (1usize..4, 1usize..5, 1usize..5), 1..5),
            seed in 0u32..1000,
        ) {
            let layers = layers
                .into_iter()
                .map(|(i, (maps, h, w))| {
                    let data = (0..maps * h * w).map(|k| (((k as u32).wrapping_mul(2654435761) ^ seed) % 1000) as f32 / 7.0).collect();
                    FeatureLayer::new(Layer::ALL[i], maps, h, w, data).unwrap()
                })
                .collect();
            let stack = FeatureStack::new(9, 7, layers).unwrap();
            let first = encode_sfm1(&stack).unwrap();
            let back = decode_sfm1(&first).unwrap();
            prop_assert_eq!(&back, &stack);
            prop_assert_eq!(encode_sfm1(&back).unwrap(), first);
        }
    }
}
