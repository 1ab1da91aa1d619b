//! Saliency map files.
//!
//! `.f32`: u32 LE width, u32 LE height, then `width * height` f32 LE values
//! in row-major order. Maps are held in f64, so writing rounds each value
//! to the nearest f32; a map whose values are already f32-representable
//! reads back exactly.
//!
//! `.png`: 16-bit grayscale, sample `floor(v * 65535 + 0.5)` for `v`
//! clamped into `[0, 1]`.

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::eval::EvalEntry;
use crate::formats::fixations::read_fixations;
use crate::raster::SaliencyMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MapFormat {
    RawF32,
    Png16,
}

fn format_of(path: &Path) -> Result<MapFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f32") => Ok(MapFormat::RawF32),
        Some("png") => Ok(MapFormat::Png16),
        _ => Err(Error::InvalidValue(format!(
            "{}: map files must end in .f32 or .png",
            path.display()
        ))),
    }
}

pub fn encode_f32(map: &SaliencyMap) -> Result<Vec<u8>> {
    let w = u32::try_from(map.width()).map_err(|_| Error::InvalidDimensions("width overflows u32".into()))?;
    let h = u32::try_from(map.height()).map_err(|_| Error::InvalidDimensions("height overflows u32".into()))?;
    let mut out = Vec::with_capacity(8 + map.values().len() * 4);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_f32(bytes: &[u8]) -> Result<SaliencyMap> {
    if bytes.len() < 8 {
        return Err(Error::Malformed {
            offset: bytes.len() as u64,
            reason: "truncated map header".into(),
        });
    }
    let w = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(8))
        .ok_or_else(|| Error::InvalidDimensions(format!("{w}x{h} map overflows")))?;
    if bytes.len() != expected {
        return Err(Error::Malformed {
            offset: bytes.len().min(expected) as u64,
            reason: format!("expected {expected} bytes for {w}x{h}, found {}", bytes.len()),
        });
    }
    let values = bytes[8..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    SaliencyMap::new(w, h, values)
}

pub fn quantize_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0 + 0.5).floor() as u16
}

pub fn write_map(path: impl AsRef<Path>, map: &SaliencyMap) -> Result<()> {
    let path = path.as_ref();
    match format_of(path)? {
        MapFormat::RawF32 => std::fs::write(path, encode_f32(map)?).map_err(|e| Error::io(path, e)),
        MapFormat::Png16 => {
            let w = u32::try_from(map.width()).map_err(|_| Error::InvalidDimensions("width overflows u32".into()))?;
            let h = u32::try_from(map.height()).map_err(|_| Error::InvalidDimensions("height overflows u32".into()))?;
            let samples: Vec<u16> = map.values().iter().map(|v| quantize_u16(*v)).collect();
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(w, h, samples).expect("buffer matches dims");
            buf.save(path)?;
            Ok(())
        }
    }
}

pub fn read_map(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    match format_of(path)? {
        MapFormat::RawF32 => decode_f32(&std::fs::read(path).map_err(|e| Error::io(path, e))?),
        MapFormat::Png16 => {
            let img = image::open(path)?.into_luma16();
            let (w, h) = img.dimensions();
            let values = img.into_raw().into_iter().map(|s| f64::from(s) / 65535.0).collect();
            SaliencyMap::new(w as usize, h as usize, values)
        }
    }
}

/// Pairs every map in `maps_dir` (`<id>.f32` or `<id>.png`) with
/// `<dataset_dir>/<id>.json`. Maps without a fixation file come back with
/// `fixations: None`.
pub fn load_dataset(dataset_dir: impl AsRef<Path>, maps_dir: impl AsRef<Path>) -> Result<Vec<EvalEntry>> {
    let (dataset_dir, maps_dir) = (dataset_dir.as_ref(), maps_dir.as_ref());
    let mut paths: Vec<PathBuf> = std::fs::read_dir(maps_dir)
        .map_err(|e| Error::io(maps_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| format_of(p).is_ok())
        .collect();
    paths.sort();
    let mut entries = Vec::with_capacity(paths.len());
    for path in paths {
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        if entries.iter().any(|e: &EvalEntry| e.id == id) {
            log::warn!("{id}: several map files, using the first");
            continue;
        }
        let fx_path = dataset_dir.join(format!("{id}.json"));
        let fixations = if fx_path.exists() {
            Some(read_fixations(&fx_path)?)
        } else {
            log::warn!("{id}: no fixation file at {}", fx_path.display());
            None
        };
        entries.push(EvalEntry {
            id,
            map: read_map(&path)?,
            fixations,
        });
    }
    if entries.is_empty() {
        return Err(Error::NothingToEvaluate);
    }
    Ok(entries)
}
