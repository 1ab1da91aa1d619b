//! Raster types shared by both pathways and elementary grid operations.
//!
//! [`Image`] stores RGB intensities interleaved per pixel in row-major
//! order (`data[(y * width + x) * 3 + c]`). [`SaliencyMap`] stores one
//! value per pixel, row-major.

use crate::error::{Error, Result};

/// RGB raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    /// Builds an image from interleaved RGB data, validating range and size.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height * Self::CHANNELS {
            return Err(Error::InvalidDimensions(format!(
                "expected {} samples for {width}x{height} RGB, got {}",
                width * height * Self::CHANNELS,
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::InvalidValue(format!(
                "intensity {} at sample {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    /// Uniformly colored image.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Adds `delta` to every sample, clamping into `[0, 1]`.
    pub fn shifted(&self, delta: f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| (v + delta).clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn resize_bilinear(&self, new_width: usize, new_height: usize) -> Result<Image> {
        let data = resize_channels(
            &self.data,
            self.width,
            self.height,
            Self::CHANNELS,
            new_width,
            new_height,
        )?;
        // Interpolation is a convex combination, but rounding can push a
        // sample a hair past 1.0.
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Image {
            width: new_width,
            height: new_height,
            data,
        })
    }
}

/// Non-negative, finite 2D score grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!(
                "map must be at least 1x1, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidValue(format!(
                "saliency value {} at index {i} is negative or non-finite",
                values[i]
            )));
        }
        Ok(SaliencyMap {
            width,
            height,
            values,
        })
    }

    /// Builds a map from values the caller guarantees to be finite and
    /// non-negative.
    pub(crate) fn from_vec_unchecked(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        SaliencyMap {
            width,
            height,
            values,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "map must be at least 1x1");
        assert!(value.is_finite() && value >= 0.0);
        SaliencyMap {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    /// Builds a map from a row-major nested array; rows must be equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::InvalidDimensions("ragged rows".into()));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(width, height, values)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.values.len() as f64;
        var.sqrt()
    }

    /// Location of the maximum as `(x, y)`; ties resolve to the first pixel
    /// in raster order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn transpose(&self) -> SaliencyMap {
        let mut values = vec![0.0; self.values.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                values[x * self.height + y] = self.values[y * self.width + x];
            }
        }
        SaliencyMap {
            width: self.height,
            height: self.width,
            values,
        }
    }

    /// Applies `f` pointwise. The result has to stay finite and non-negative.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SaliencyMap> {
        SaliencyMap::new(self.width, self.height, self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> SaliencyMap {
        assert!(factor.is_finite() && factor >= 0.0);
        SaliencyMap::from_vec_unchecked(
            self.width,
            self.height,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn resize_bilinear(&self, new_width: usize, new_height: usize) -> Result<SaliencyMap> {
        let values = resize_channels(&self.values, self.width, self.height, 1, new_width, new_height)?;
        Ok(SaliencyMap::from_vec_unchecked(
            new_width,
            new_height,
            values.into_iter().map(|v| v.max(0.0)).collect(),
        ))
    }
}

/// Isotropic Gaussian kernel, truncated at radius `ceil(3 sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernelSpec {
    sigma: f64,
}

impl GaussianKernelSpec {
    /// Kernel with standard deviation given in pixels. `0` is the identity.
    pub fn pixels(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidValue(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(GaussianKernelSpec { sigma })
    }

    /// Kernel with standard deviation `fraction * width` pixels.
    pub fn fraction_of_width(fraction: f64, width: usize) -> Result<Self> {
        Self::pixels(fraction * width as f64)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        (3.0 * self.sigma).ceil() as usize
    }

    /// Normalized 1D taps, length `2 * radius + 1`.
    pub fn taps(&self) -> Vec<f64> {
        let r = self.radius() as i64;
        let denom = 2.0 * self.sigma * self.sigma;
        let mut taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / denom).exp()).collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        taps
    }
}

/// Rescales values affinely onto `[0, 1]`; a constant map becomes all zeros.
pub fn normalize_range(map: &SaliencyMap) -> SaliencyMap {
    let (lo, hi) = (map.min(), map.max());
    let values = if hi > lo {
        let span = hi - lo;
        map.values.iter().map(|v| (v - lo) / span).collect()
    } else {
        vec![0.0; map.values.len()]
    };
    SaliencyMap::from_vec_unchecked(map.width, map.height, values)
}

/// Separable Gaussian convolution with replicate border padding.
pub fn gaussian_blur(map: &SaliencyMap, spec: GaussianKernelSpec) -> SaliencyMap {
    if spec.sigma == 0.0 {
        return map.clone();
    }
    let taps = spec.taps();
    let r = spec.radius() as isize;
    let (w, h) = (map.width, map.height);
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horizontal = vec![0.0; w * h];
    for y in 0..h {
        let row = &map.values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[clamp(x as isize + k as isize - r, w)];
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * horizontal[clamp(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc.max(0.0);
        }
    }
    SaliencyMap::from_vec_unchecked(w, h, out)
}

/// Corner-aligned bilinear resampling of a `channels`-interleaved grid.
///
/// Output sample `x` reads source coordinate `x * (w - 1) / (new_w - 1)`, so
/// the corner samples of input and output coincide. A length-1 output axis
/// samples the source center.
fn resize_channels(
    src: &[f64],
    w: usize,
    h: usize,
    channels: usize,
    new_w: usize,
    new_h: usize,
) -> Result<Vec<f64>> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::InvalidDimensions(format!(
            "resize target must be at least 1x1, got {new_w}x{new_h}"
        )));
    }
    if new_w == w && new_h == h {
        return Ok(src.to_vec());
    }
    let coords = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let s = if n_out == 1 {
                    (n_in - 1) as f64 / 2.0
                } else {
                    i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
                };
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = coords(new_w, w);
    let ys = coords(new_h, h);
    let mut out = Vec::with_capacity(new_w * new_h * channels);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..channels {
                let at = |x: usize, y: usize| src[(y * w + x) * channels + c];
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &SaliencyMap, b: &SaliencyMap, tol: f64) -> bool {
        a.dims() == b.dims()
            && a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn normalize_affine_example() {
        let m = SaliencyMap::from_rows(&[[0.0, 5.0], [10.0, 5.0]]).unwrap();
        let n = normalize_range(&m);
        assert_eq!(n.values(), &[0.0, 0.5, 1.0, 0.5]);
    }

    #[test]
    fn normalize_constant_is_zero() {
        let n = normalize_range(&SaliencyMap::filled(3, 4, 7.0));
        assert!(n.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn normalize_unit_range_is_identity() {
        let m = SaliencyMap::from_rows(&[[0.0, 0.25], [1.0, 0.6]]).unwrap();
        assert_eq!(normalize_range(&m), m);
    }

    #[test]
    fn blur_sigma_zero_is_identity() {
        let m = SaliencyMap::from_fn(5, 4, |x, y| (x * 7 + y) as f64).unwrap();
        let spec = GaussianKernelSpec::pixels(0.0).unwrap();
        assert_eq!(gaussian_blur(&m, spec), m);
    }

    #[test]
    fn blur_impulse_matches_gaussian_constant() {
        let m = SaliencyMap::from_fn(21, 21, |x, y| if x == 10 && y == 10 { 1.0 } else { 0.0 })
            .unwrap();
        let out = gaussian_blur(&m, GaussianKernelSpec::pixels(2.0).unwrap());
        let expected = 1.0 / (2.0 * std::f64::consts::PI * 4.0);
        assert!((out.get(10, 10) - expected).abs() < 1e-3, "{}", out.get(10, 10));
        assert!((out.sum() - 1.0).abs() < 0.01);
    }

    #[test]
    fn blur_preserves_constant() {
        let m = SaliencyMap::filled(9, 6, 0.37);
        let out = gaussian_blur(&m, GaussianKernelSpec::pixels(3.5).unwrap());
        assert!(close(&out, &m, 1e-6));
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(GaussianKernelSpec::pixels(-1.0).is_err());
    }

    #[test]
    fn resize_constant_upscale() {
        let m = SaliencyMap::filled(3, 2, 0.4);
        let out = m.resize_bilinear(6, 4).unwrap();
        assert!(close(&out, &SaliencyMap::filled(6, 4, 0.4), 1e-12));
    }

    #[test]
    fn resize_identity_is_bit_identical() {
        let m = SaliencyMap::from_fn(5, 3, |x, y| (x as f64).sin().abs() + y as f64).unwrap();
        assert_eq!(m.resize_bilinear(5, 3).unwrap(), m);
    }

    #[test]
    fn resize_corner_aligned_rows() {
        let m = SaliencyMap::from_rows(&[[0.0, 1.0], [0.0, 1.0]]).unwrap();
        let out = m.resize_bilinear(4, 2).unwrap();
        let expected = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for y in 0..2 {
            for x in 0..4 {
                assert!((out.get(x, y) - expected[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn image_validation() {
        assert!(Image::new(0, 1, vec![]).is_err());
        assert!(Image::new(1, 1, vec![0.0, 0.5]).is_err());
        assert!(Image::new(1, 1, vec![0.0, 0.5, 1.5]).is_err());
        assert!(Image::new(1, 1, vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn map_validation() {
        assert!(SaliencyMap::new(1, 1, vec![-1.0]).is_err());
        assert!(SaliencyMap::new(1, 1, vec![f64::NAN]).is_err());
        assert!(SaliencyMap::new(2, 1, vec![1.0]).is_err());
    }

    #[test]
    fn argmax_ties_first_in_raster_order() {
        assert_eq!(SaliencyMap::filled(4, 4, 1.0).argmax(), (0, 0));
        let m = SaliencyMap::from_rows(&[[0.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(m.argmax(), (1, 0));
    }

    fn arb_map() -> impl Strategy<Value = SaliencyMap> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..100.0, w * h)
                .prop_map(move |v| SaliencyMap::new(w, h, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(m in arb_map()) {
            let once = normalize_range(&m);
            prop_assert_eq!(normalize_range(&once), once);
        }

        #[test]
        fn normalize_preserves_order(m in arb_map()) {
            let n = normalize_range(&m);
            if m.max() > m.min() {
                prop_assert_eq!(n.argmax(), m.argmax());
                for i in 0..m.values().len() {
                    for j in 0..m.values().len() {
                        if m.values()[i] < m.values()[j] {
                            prop_assert!(n.values()[i] <= n.values()[j]);
                        }
                    }
                }
            }
            prop_assert!(n.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn blur_commutes_with_transpose(m in arb_map(), sigma in 0.0f64..4.0) {
            let spec = GaussianKernelSpec::pixels(sigma).unwrap();
            let a = gaussian_blur(&m.transpose(), spec);
            let b = gaussian_blur(&m, spec).transpose();
            prop_assert!(close(&a, &b, 1e-9));
        }

        #[test]
        fn resize_stays_in_range(m in arb_map(), nw in 1usize..20, nh in 1usize..20) {
            let out = m.resize_bilinear(nw, nh).unwrap();
            let (lo, hi) = (m.min(), m.max());
            prop_assert!(out.values().iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        }
    }

    #[test]
    fn resize_round_trip_smooth_map_bounded() {
        let m = SaliencyMap::from_fn(40, 30, |x, y| {
            1.0 + (x as f64 / 8.0).sin() * (y as f64 / 6.0).cos()
        })
        .unwrap();
        let back = m.resize_bilinear(80, 60).unwrap().resize_bilinear(40, 30).unwrap();
        assert!(close(&back, &m, 0.02));
    }
}
