use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::raster::{normalize_range, Image, SaliencyMap};

/// Radius in pixels of the dot marking the map maximum.
pub const MAX_DOT_RADIUS: usize = 2;

/// Decodes any supported raster (PNG, JPEG) into RGB `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let rgb = image::open(path)?.into_rgb32f();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| f64::from(v).clamp(0.0, 1.0)).collect();
    Image::new(w as usize, h as usize, data)
}

/// Writes an 8-bit RGB PNG.
pub fn save_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    let samples: Vec<u8> = image.data().iter().map(|v| (v * 255.0 + 0.5).floor() as u8).collect();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, samples)
            .ok_or_else(|| Error::InvalidDimensions("image too large to encode".into()))?;
    buf.save(path)?;
    Ok(())
}

/// Piecewise-linear ramp: 0 blue, 0.25 cyan, 0.5 green, 0.75 yellow, 1 red.
pub fn colormap(v: f64) -> [f64; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
    ];
    let t = v.clamp(0.0, 1.0) * 4.0;
    let i = (t.floor() as usize).min(3);
    let f = t - i as f64;
    std::array::from_fn(|c| STOPS[i][c] * (1.0 - f) + STOPS[i + 1][c] * f)
}

/// Blends the range-normalized map, through [`colormap`], over `image`
/// with weight `alpha`, and paints a red dot of radius [`MAX_DOT_RADIUS`]
/// at the map's first maximum in raster order.
pub fn render_heatmap(image: &Image, map: &SaliencyMap, alpha: f64) -> Result<Image> {
    if (image.width(), image.height()) != map.dims() {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, map is {}x{}",
            image.width(),
            image.height(),
            map.width(),
            map.height()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidValue(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let norm = normalize_range(map);
    let (mx, my) = map.argmax();
    let r2 = (MAX_DOT_RADIUS * MAX_DOT_RADIUS) as isize;
    Image::from_fn(image.width(), image.height(), |x, y| {
        let (dx, dy) = (x as isize - mx as isize, y as isize - my as isize);
        if dx * dx + dy * dy <= r2 {
            return [1.0, 0.0, 0.0];
        }
        let base = image.pixel(x, y);
        let heat = colormap(norm.get(x, y));
        std::array::from_fn(|c| ((1.0 - alpha) * base[c] + alpha * heat[c]).clamp(0.0, 1.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> (Image, SaliencyMap) {
        let img = Image::from_fn(12, 10, |x, y| [x as f64 / 11.0, y as f64 / 9.0, 0.5]).unwrap();
        let map = SaliencyMap::from_fn(12, 10, |x, y| ((x * 3 + y * 5) % 7) as f64).unwrap();
        (img, map)
    }

    fn outside_dot(map: &SaliencyMap, x: usize, y: usize) -> bool {
        let (mx, my) = map.argmax();
        let (dx, dy) = (x as isize - mx as isize, y as isize - my as isize);
        dx * dx + dy * dy > (MAX_DOT_RADIUS * MAX_DOT_RADIUS) as isize
    }

    #[test]
    fn alpha_zero_keeps_image() {
        let (img, map) = scene();
        let out = render_heatmap(&img, &map, 0.0).unwrap();
        for y in 0..10 {
            for x in 0..12 {
                if outside_dot(&map, x, y) {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn alpha_one_is_colormap() {
        let (img, map) = scene();
        let out = render_heatmap(&img, &map, 1.0).unwrap();
        let norm = normalize_range(&map);
        for y in 0..10 {
            for x in 0..12 {
                if outside_dot(&map, x, y) {
                    assert_eq!(out.pixel(x, y), colormap(norm.get(x, y)));
                }
            }
        }
    }

    #[test]
    fn constant_map_dot_at_origin() {
        let (img, _) = scene();
        let out = render_heatmap(&img, &SaliencyMap::filled(12, 10, 0.3), 0.5).unwrap();
        assert_eq!(out.pixel(0, 0), [1.0, 0.0, 0.0]);
        assert_eq!(out.pixel(2, 0), [1.0, 0.0, 0.0]);
        assert_ne!(out.pixel(3, 0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn dims_must_match() {
        let (img, _) = scene();
        assert!(render_heatmap(&img, &SaliencyMap::zeros(3, 3), 0.5).is_err());
    }

    #[test]
    fn colormap_stops() {
        assert_eq!(colormap(0.0), [0.0, 0.0, 1.0]);
        assert_eq!(colormap(0.5), [0.0, 1.0, 0.0]);
        assert_eq!(colormap(1.0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn png_image_round_trip() {
        let img = Image::from_fn(5, 4, |x, y| [x as f64 / 4.0, y as f64 / 3.0, 1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.png");
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}
