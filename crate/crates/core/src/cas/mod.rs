//! Contrast-aware pathway.
//!
//! Each scale scans the image with a `B×B` window, learns a complete ICA
//! basis for that image's own patches, scores every patch by the
//! self-information of its filter responses under per-feature histograms,
//! and writes the scores back to the patch centers. The per-scale maps are
//! range-normalized and summed with equal weight.

pub mod density;
pub mod ica;
pub mod patches;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{normalize_range, Image, SaliencyMap};
use crate::seed::derive_seed;

pub use density::{DensityModel, DEFAULT_BIN_COUNT};
pub use ica::{Contrast, FastIcaOptions, IcaModel};
pub use patches::{extract_patches, PatchMatrix};

/// Columns per chunk when projecting patches through the unmixing.
const RESPONSE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasConfig {
    /// Odd window sizes, one map per entry.
    pub scales: Vec<usize>,
    pub stride: usize,
    pub max_ica_iterations: usize,
    pub ica_tolerance: f64,
    pub ica_nonlinearity: Contrast,
    /// ICA is trained on at most this many uniformly sampled patches.
    pub training_patch_cap: usize,
    pub rng_seed: u64,
    /// Wider inputs are downscaled (aspect preserved) before patching.
    pub working_max_width: usize,
    pub bin_count: usize,
    pub eigen_cutoff: f64,
}

impl Default for CasConfig {
    fn default() -> Self {
        CasConfig {
            scales: vec![1, 3, 5, 7],
            stride: 1,
            max_ica_iterations: 200,
            ica_tolerance: 1e-4,
            ica_nonlinearity: Contrast::Tanh,
            training_patch_cap: 20_000,
            rng_seed: 42,
            working_max_width: 320,
            bin_count: DEFAULT_BIN_COUNT,
            eigen_cutoff: 1e-8,
        }
    }
}

impl CasConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidValue("at least one scale is required".into()));
        }
        if let Some(b) = self.scales.iter().find(|b| **b == 0 || **b % 2 == 0) {
            return Err(Error::InvalidValue(format!("scale {b} is not an odd window size")));
        }
        if self.stride == 0 {
            return Err(Error::InvalidValue("stride must be >= 1".into()));
        }
        if self.bin_count == 0 || self.training_patch_cap == 0 || self.working_max_width == 0 {
            return Err(Error::InvalidValue(
                "bin_count, training_patch_cap and working_max_width must be >= 1".into(),
            ));
        }
        if !(self.ica_tolerance >= 0.0) || !(self.eigen_cutoff >= 0.0) {
            return Err(Error::InvalidValue("tolerances must be >= 0".into()));
        }
        Ok(())
    }
}

/// ICA basis learned for one scale.
#[derive(Debug, Clone)]
pub struct IcaBasis {
    scale_index: usize,
    window: usize,
    model: IcaModel,
    training_columns: Vec<usize>,
}

impl IcaBasis {
    pub fn scale_index(&self) -> usize {
        self.scale_index
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn model(&self) -> &IcaModel {
        &self.model
    }

    pub fn retained_dim(&self) -> usize {
        self.model.retained_dim()
    }

    /// False when FastICA hit the iteration cap; the returned rotation is
    /// still orthogonal.
    pub fn converged(&self) -> bool {
        self.model.converged()
    }

    /// Patch columns the basis was trained on, ascending.
    pub fn training_columns(&self) -> &[usize] {
        &self.training_columns
    }
}

/// Learns the per-image basis for one scale from a seeded subsample.
pub fn learn_basis(patches: &PatchMatrix, cfg: &CasConfig) -> Result<IcaBasis> {
    let (m, n) = (patches.dim(), patches.count());
    if n < 10 * m {
        return Err(Error::TooFewPatches { patches: n, dims: m });
    }
    let window = patches.window() as u64;
    let columns: Vec<usize> = if n > cfg.training_patch_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[window, 0]));
        let mut picked = rand::seq::index::sample(&mut rng, n, cfg.training_patch_cap).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..n).collect()
    };
    let samples = DMatrix::from_iterator(
        m,
        columns.len(),
        columns
            .iter()
            .flat_map(|&j| patches.column(j).iter().map(|v| f64::from(*v))),
    );
    let opts = FastIcaOptions {
        max_iterations: cfg.max_ica_iterations,
        tolerance: cfg.ica_tolerance,
        contrast: cfg.ica_nonlinearity,
        eigen_cutoff: cfg.eigen_cutoff,
        seed: derive_seed(cfg.rng_seed, &[window, 1]),
    };
    let model = IcaModel::fit(&samples, &opts)?;
    Ok(IcaBasis {
        scale_index: patches.scale_index(),
        window: patches.window(),
        model,
        training_columns: columns,
    })
}

/// `D × N` filter responses, plus one density per row once fitted.
#[derive(Debug, Clone)]
pub struct ResponseMatrix {
    scale_index: usize,
    data: DMatrix<f64>,
    densities: Option<Vec<DensityModel>>,
}

impl ResponseMatrix {
    pub fn new(scale_index: usize, data: DMatrix<f64>) -> Self {
        ResponseMatrix {
            scale_index,
            data,
            densities: None,
        }
    }

    pub fn scale_index(&self) -> usize {
        self.scale_index
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn feature_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn patch_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn densities(&self) -> Option<&[DensityModel]> {
        self.densities.as_deref()
    }
}

/// Projects every patch through the basis: `R · V · (X − μ1ᵀ)`.
pub fn compute_responses(basis: &IcaBasis, patches: &PatchMatrix) -> Result<ResponseMatrix> {
    if basis.window != patches.window() || basis.model.input_dim() != patches.dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis for window {} cannot score window {} patches",
            basis.window,
            patches.window()
        )));
    }
    let (m, n) = (patches.dim(), patches.count());
    let mean = basis.model.mean();
    let unmixing = basis.model.unmixing();
    let mut out = DMatrix::zeros(unmixing.nrows(), n);
    let mut start = 0;
    while start < n {
        let k = RESPONSE_CHUNK.min(n - start);
        let chunk = DMatrix::from_iterator(
            m,
            k,
            (start..start + k).flat_map(|j| {
                patches
                    .column(j)
                    .iter()
                    .zip(mean.iter())
                    .map(|(v, mu)| f64::from(*v) - mu)
            }),
        );
        out.columns_mut(start, k).copy_from(&(unmixing * chunk));
        start += k;
    }
    Ok(ResponseMatrix::new(patches.scale_index(), out))
}

/// Fits one smoothed histogram per response row.
pub fn fit_densities(mut responses: ResponseMatrix, bin_count: usize) -> Result<ResponseMatrix> {
    let densities = (0..responses.data.nrows())
        .map(|j| DensityModel::fit(responses.data.row(j).iter().copied(), bin_count))
        .collect::<Result<Vec<_>>>()?;
    responses.densities = Some(densities);
    Ok(responses)
}

/// Per-patch self-information `−Σ_j ln p_j(F_j(t))`.
pub fn self_information_map(responses: &ResponseMatrix) -> Result<Vec<f64>> {
    let densities = responses
        .densities()
        .ok_or_else(|| Error::InvalidValue("densities have not been fitted".into()))?;
    Ok(responses
        .data
        .column_iter()
        .map(|col| {
            col.iter()
                .zip(densities)
                .map(|(v, d)| -d.probability(*v).ln())
                .sum::<f64>()
                .max(0.0)
        })
        .collect())
}

/// Writes patch scores to their center pixels, fills the uncovered border
/// frame from the nearest patch center, then range-normalizes.
pub fn assemble_scale_map(
    scores: &[f64],
    centers: &[(u32, u32)],
    window: usize,
    stride: usize,
    width: usize,
    height: usize,
) -> Result<SaliencyMap> {
    if scores.len() != centers.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} patch centers",
            scores.len(),
            centers.len()
        )));
    }
    if window == 0 || window > width || window > height || stride == 0 {
        return Err(Error::ImageTooSmall { window, width, height });
    }
    let r = window / 2;
    let cols = (width - window) / stride + 1;
    let rows = (height - window) / stride + 1;
    if scores.len() != cols * rows {
        return Err(Error::DimensionMismatch(format!(
            "expected {} patches for a {width}x{height} scan, got {}",
            cols * rows,
            scores.len()
        )));
    }
    let mut grid = vec![0.0; cols * rows];
    for (&s, &(cx, cy)) in scores.iter().zip(centers) {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::InvalidValue(format!("patch score {s}")));
        }
        let gx = (cx as usize).checked_sub(r).map(|v| v / stride);
        let gy = (cy as usize).checked_sub(r).map(|v| v / stride);
        match (gx, gy) {
            (Some(gx), Some(gy)) if gx < cols && gy < rows => grid[gy * cols + gx] = s,
            _ => {
                return Err(Error::DimensionMismatch(format!(
                    "patch center ({cx}, {cy}) outside the scan grid"
                )))
            }
        }
    }
    let nearest = |p: usize, n: usize| -> usize {
        let g = ((p as f64 - r as f64) / stride as f64).round();
        g.clamp(0.0, (n - 1) as f64) as usize
    };
    let gxs: Vec<usize> = (0..width).map(|x| nearest(x, cols)).collect();
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &grid[nearest(y, rows) * cols..][..cols];
        values.extend(gxs.iter().map(|&gx| row[gx]));
    }
    Ok(normalize_range(&SaliencyMap::from_vec_unchecked(width, height, values)))
}

/// Diagnostics for one scale of a CAS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub window: usize,
    pub patch_count: usize,
    pub retained_dim: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CasOutput {
    pub map: SaliencyMap,
    pub scales: Vec<ScaleReport>,
}

/// Full contrast-aware map of `image`.
pub fn cas_saliency(image: &Image, cfg: &CasConfig) -> Result<SaliencyMap> {
    cas_saliency_detailed(image, cfg).map(|out| out.map)
}

pub fn cas_saliency_detailed(image: &Image, cfg: &CasConfig) -> Result<CasOutput> {
    cfg.validate()?;
    let (width, height) = (image.width(), image.height());
    let working = if width > cfg.working_max_width {
        let new_h = ((height as f64 * cfg.working_max_width as f64 / width as f64).round() as usize).max(1);
        image.resize_bilinear(cfg.working_max_width, new_h)?
    } else {
        image.clone()
    };

    let per_scale: Vec<Result<(SaliencyMap, ScaleReport)>> = cfg
        .scales
        .par_iter()
        .enumerate()
        .map(|(i, &window)| scale_map(&working, i, window, cfg))
        .collect();

    let mut total: Option<Vec<f64>> = None;
    let mut reports = Vec::new();
    let mut first_skip = None;
    for result in per_scale {
        match result {
            Ok((map, report)) => {
                let acc = total.get_or_insert_with(|| vec![0.0; map.values().len()]);
                acc.iter_mut().zip(map.values()).for_each(|(a, v)| *a += v);
                reports.push(report);
            }
            Err(e @ Error::ImageTooSmall { .. }) | Err(e @ Error::TooFewPatches { .. }) => {
                log::warn!("skipping scale: {e}");
                first_skip.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some(total) = total else {
        return Err(first_skip.unwrap_or(Error::InvalidValue("no scales".into())));
    };
    let mut map = normalize_range(&SaliencyMap::from_vec_unchecked(
        working.width(),
        working.height(),
        total,
    ));
    if map.dims() != (width, height) {
        map = normalize_range(&map.resize_bilinear(width, height)?);
    }
    Ok(CasOutput {
        map,
        scales: reports,
    })
}

fn scale_map(
    image: &Image,
    scale_index: usize,
    window: usize,
    cfg: &CasConfig,
) -> Result<(SaliencyMap, ScaleReport)> {
    let patches = extract_patches(image, window, cfg.stride, scale_index)?;
    let basis = learn_basis(&patches, cfg)?;
    let responses = fit_densities(compute_responses(&basis, &patches)?, cfg.bin_count)?;
    let scores = self_information_map(&responses)?;
    let map = assemble_scale_map(
        &scores,
        patches.centers(),
        window,
        cfg.stride,
        image.width(),
        image.height(),
    )?;
    let report = ScaleReport {
        window,
        patch_count: patches.count(),
        retained_dim: basis.retained_dim(),
        iterations: basis.model().iterations(),
        converged: basis.converged(),
    };
    Ok((map, report))
}
