use crate::error::{Error, Result};
use crate::raster::Image;

/// Dense sliding-window patches of one scale.
///
/// Column `j` holds the RGB patch whose center is `centers[j]`, flattened
/// row by row with interleaved channels, so the patch dimension is
/// `window * window * 3`. Columns run in raster order of their centers.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    scale_index: usize,
    window: usize,
    stride: usize,
    image_width: usize,
    image_height: usize,
    data: Vec<f32>,
    centers: Vec<(u32, u32)>,
}

impl PatchMatrix {
    pub fn scale_index(&self) -> usize {
        self.scale_index
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }

    /// Patch dimension `M = window² · 3`.
    pub fn dim(&self) -> usize {
        self.window * self.window * 3
    }

    /// Number of patches `N`.
    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn column(&self, j: usize) -> &[f32] {
        let m = self.dim();
        &self.data[j * m..(j + 1) * m]
    }

    /// Center pixel `(x, y)` of every column.
    pub fn centers(&self) -> &[(u32, u32)] {
        &self.centers
    }

    /// Column-major backing storage, `dim()` values per column.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// New matrix holding the given columns in the given order.
    pub fn select(&self, columns: &[usize]) -> PatchMatrix {
        let m = self.dim();
        let mut data = Vec::with_capacity(columns.len() * m);
        let mut centers = Vec::with_capacity(columns.len());
        for &j in columns {
            data.extend_from_slice(self.column(j));
            centers.push(self.centers[j]);
        }
        PatchMatrix {
            scale_index: self.scale_index,
            window: self.window,
            stride: self.stride,
            image_width: self.image_width,
            image_height: self.image_height,
            data,
            centers,
        }
    }
}

/// Scans `image` with a `window`×`window` box from the top-left to the
/// bottom-right.
pub fn extract_patches(
    image: &Image,
    window: usize,
    stride: usize,
    scale_index: usize,
) -> Result<PatchMatrix> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidValue(format!("window size must be odd, got {window}")));
    }
    if stride == 0 {
        return Err(Error::InvalidValue("stride must be >= 1".into()));
    }
    let (w, h) = (image.width(), image.height());
    if window > w || window > h {
        return Err(Error::ImageTooSmall {
            window,
            width: w,
            height: h,
        });
    }
    let cols = (w - window) / stride + 1;
    let rows = (h - window) / stride + 1;
    let m = window * window * 3;
    let r = window / 2;
    let src = image.data();

    let mut data = Vec::with_capacity(cols * rows * m);
    let mut centers = Vec::with_capacity(cols * rows);
    for py in 0..rows {
        let y0 = py * stride;
        for px in 0..cols {
            let x0 = px * stride;
            for dy in 0..window {
                let start = ((y0 + dy) * w + x0) * 3;
                data.extend(src[start..start + window * 3].iter().map(|v| *v as f32));
            }
            centers.push(((x0 + r) as u32, (y0 + r) as u32));
        }
    }
    Ok(PatchMatrix {
        scale_index,
        window,
        stride,
        image_width: w,
        image_height: h,
        data,
        centers,
    })
}
