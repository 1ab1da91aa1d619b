//! Eye-fixation evaluation: fixation density maps, shuffled AUC and the
//! post-processing blur sweep.
//!
//! Shuffled AUC takes the map values at the test image's fixations as
//! positives, and values at fixation locations borrowed from the other
//! images of the dataset as negatives, so a center-biased map gains nothing
//! from the center bias every fixation distribution shares.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{gaussian_blur, GaussianKernelSpec, SaliencyMap};
use crate::seed::derive_seed;

/// Blur widths as fractions of image width: 0, 0.01, …, 0.08.
pub const DEFAULT_SIGMA_GRID: [f64; 9] = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08];

/// Fixations of one image pooled over subjects, as `(x, y)` = (column, row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationSet {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub points: Vec<(usize, usize)>,
}

impl FixationSet {
    pub fn new(image: impl Into<String>, width: usize, height: usize, points: Vec<(usize, usize)>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions("fixation image dims must be >= 1".into()));
        }
        if let Some((index, &(x, y))) = points.iter().enumerate().find(|(_, (x, y))| *x >= width || *y >= height) {
            return Err(Error::FixationOutOfBounds {
                index,
                x: x as i64,
                y: y as i64,
                width,
                height,
            });
        }
        Ok(FixationSet {
            image: image.into(),
            width,
            height,
            points,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// How tied positive/negative pairs are credited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    #[default]
    HalfCredit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaucConfig {
    pub repetitions: usize,
    pub rng_seed: u64,
    pub tie_policy: TiePolicy,
}

impl Default for SaucConfig {
    fn default() -> Self {
        SaucConfig {
            repetitions: 100,
            rng_seed: 42,
            tie_policy: TiePolicy::HalfCredit,
        }
    }
}

/// Impulse map of fixated pixels blurred by `G_σ`, scaled to peak 1.
pub fn fixation_density(fx: &FixationSet, sigma: GaussianKernelSpec) -> Result<SaliencyMap> {
    if fx.points.is_empty() {
        return Err(Error::EmptyFixations);
    }
    let mut values = vec![0.0; fx.width * fx.height];
    for &(x, y) in &fx.points {
        values[y * fx.width + x] = 1.0;
    }
    let blurred = gaussian_blur(&SaliencyMap::from_vec_unchecked(fx.width, fx.height, values), sigma);
    let peak = blurred.max();
    Ok(blurred.scaled(1.0 / peak))
}

/// Exact Mann–Whitney AUC: the fraction of (positive, negative) pairs
/// ordered correctly, ties counting half.
pub fn auc_scores(pos: &[f64], neg: &[f64], tie_policy: TiePolicy) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidValue("AUC needs at least one positive and one negative".into()));
    }
    let TiePolicy::HalfCredit = tie_policy;
    let mut sorted = neg.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Twice the credit, so half-credit ties stay integral.
    let mut doubled: u128 = 0;
    for p in pos {
        let below = sorted.partition_point(|n| n < p);
        let not_above = sorted.partition_point(|n| n <= p);
        doubled += (2 * below + (not_above - below)) as u128;
    }
    Ok(doubled as f64 / (2.0 * pos.len() as f64 * neg.len() as f64))
}

/// AUC of every repetition of the shuffled protocol.
///
/// `others` holds fixations pooled from the other images; they are clamped
/// into this image's bounds, and locations fixated in this image are not
/// used as negatives.
pub fn sauc_repetitions(
    map: &SaliencyMap,
    fx: &FixationSet,
    others: &[(usize, usize)],
    cfg: &SaucConfig,
) -> Result<Vec<f64>> {
    if map.dims() != fx.dims() {
        return Err(Error::DimensionMismatch(format!(
            "map is {}x{}, fixations are for {}x{}",
            map.width(),
            map.height(),
            fx.width,
            fx.height
        )));
    }
    if fx.points.is_empty() {
        return Err(Error::EmptyFixations);
    }
    if others.is_empty() {
        return Err(Error::InvalidValue("no fixations from other images to sample negatives".into()));
    }
    if cfg.repetitions == 0 {
        return Err(Error::InvalidValue("repetitions must be >= 1".into()));
    }
    let positives: Vec<f64> = fx.points.iter().map(|&(x, y)| map.get(x, y)).collect();
    let fixated: HashSet<(usize, usize)> = fx.points.iter().copied().collect();
    let clamped = others
        .iter()
        .map(|&(x, y)| (x.min(fx.width - 1), y.min(fx.height - 1)));
    let mut candidates: Vec<(usize, usize)> = clamped.clone().filter(|p| !fixated.contains(p)).collect();
    if candidates.is_empty() {
        log::warn!("{}: every negative candidate is a fixated location; using them anyway", fx.image);
        candidates = clamped.collect();
    }
    let count = positives.len();
    let with_replacement = candidates.len() < count;
    if with_replacement {
        log::warn!(
            "{}: {} negative candidates for {count} positives, sampling with replacement",
            fx.image,
            candidates.len()
        );
    }

    (0..cfg.repetitions)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[rep as u64]));
            let negatives: Vec<f64> = if with_replacement {
                (0..count)
                    .map(|_| {
                        let (x, y) = candidates[rng.random_range(0..candidates.len())];
                        map.get(x, y)
                    })
                    .collect()
            } else {
                rand::seq::index::sample(&mut rng, candidates.len(), count)
                    .into_iter()
                    .map(|i| {
                        let (x, y) = candidates[i];
                        map.get(x, y)
                    })
                    .collect()
            };
            auc_scores(&positives, &negatives, cfg.tie_policy)
        })
        .collect()
}

/// Shuffled AUC, averaged over repetitions.
pub fn sauc(map: &SaliencyMap, fx: &FixationSet, others: &[(usize, usize)], cfg: &SaucConfig) -> Result<f64> {
    let reps = sauc_repetitions(map, fx, others, cfg)?;
    Ok(reps.iter().sum::<f64>() / reps.len() as f64)
}

/// Scores of one image over the blur grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub image: String,
    pub scores: Vec<f64>,
    pub best_sigma: f64,
    pub best_score: f64,
}

/// First maximum of `scores`, as `(index, value)`.
fn best_of(scores: &[f64]) -> (usize, f64) {
    scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &s)| if s > best.1 { (i, s) } else { best })
}

/// sAUC of `map` blurred by each `σ = fraction · width`.
pub fn blur_sweep(
    map: &SaliencyMap,
    fx: &FixationSet,
    others: &[(usize, usize)],
    sigmas: &[f64],
    cfg: &SaucConfig,
) -> Result<SweepRow> {
    if sigmas.is_empty() {
        return Err(Error::InvalidValue("sigma grid is empty".into()));
    }
    let scores = sigmas
        .iter()
        .map(|&frac| {
            let spec = GaussianKernelSpec::fraction_of_width(frac, map.width())?;
            sauc(&gaussian_blur(map, spec), fx, others, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let (i, best_score) = best_of(&scores);
    Ok(SweepRow {
        image: fx.image.clone(),
        scores,
        best_sigma: sigmas[i],
        best_score,
    })
}

/// One image of an evaluation dataset. `fixations` is `None` when the
/// dataset has no fixation record for the map.
#[derive(Debug, Clone)]
pub struct EvalEntry {
    pub id: String,
    pub map: SaliencyMap,
    pub fixations: Option<FixationSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Blur widths as fractions of image width.
    pub sigmas: Vec<f64>,
    pub per_image: Vec<SweepRow>,
    pub mean_per_sigma: Vec<f64>,
    pub best_sigma: f64,
    pub best_score: f64,
    pub skipped: Vec<String>,
    pub config: SaucConfig,
}

/// Sweeps every image and averages per blur width.
///
/// Entries are evaluated in id order; image `i` (in that order) draws its
/// repetitions from seeds derived from `(rng_seed, i)`.
pub fn dataset_eval(entries: &[EvalEntry], sigmas: &[f64], cfg: &SaucConfig) -> Result<EvalReport> {
    let mut skipped = Vec::new();
    let mut usable: Vec<(&EvalEntry, &FixationSet)> = Vec::new();
    for e in entries {
        match &e.fixations {
            Some(fx) if !fx.points.is_empty() => usable.push((e, fx)),
            _ => {
                log::warn!("{}: no fixations, skipping", e.id);
                skipped.push(e.id.clone());
            }
        }
    }
    if usable.is_empty() {
        return Err(Error::NothingToEvaluate);
    }
    if usable.len() < 2 {
        return Err(Error::InvalidValue(
            "shuffled AUC needs at least two images with fixations".into(),
        ));
    }
    usable.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    skipped.sort();

    let per_image = usable
        .par_iter()
        .enumerate()
        .map(|(i, (entry, fx))| {
            let others: Vec<(usize, usize)> = usable
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, (_, o))| o.points.iter().copied())
                .collect();
            let map = if entry.map.dims() == fx.dims() {
                entry.map.clone()
            } else {
                log::info!("{}: resizing map to fixation dims", entry.id);
                entry.map.resize_bilinear(fx.width, fx.height)?
            };
            let image_cfg = SaucConfig {
                rng_seed: derive_seed(cfg.rng_seed, &[i as u64]),
                ..*cfg
            };
            let mut row = blur_sweep(&map, fx, &others, sigmas, &image_cfg)?;
            row.image = entry.id.clone();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = per_image.len() as f64;
    let mean_per_sigma: Vec<f64> = (0..sigmas.len())
        .map(|s| per_image.iter().map(|r| r.scores[s]).sum::<f64>() / n)
        .collect();
    let (i, best_score) = best_of(&mean_per_sigma);
    Ok(EvalReport {
        sigmas: sigmas.to_vec(),
        per_image,
        mean_per_sigma,
        best_sigma: sigmas[i],
        best_score,
        skipped,
        config: *cfg,
    })
}
