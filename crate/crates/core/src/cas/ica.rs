//! Whitening and symmetric FastICA.
//!
//! Samples are the columns of an `M × N` matrix. Fitting removes the mean,
//! whitens through the eigendecomposition of the sample covariance, then
//! runs the symmetric fixed-point iteration
//!
//! ```text
//! W ← E[g(W z) zᵀ] − diag(E[g'(W z)]) W
//! W ← (W Wᵀ)^(-1/2) W
//! ```
//!
//! until every row of `W` stops turning (`max_i | |⟨w_i, w_i_old⟩| − 1 |`
//! below the tolerance).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest covariance eigenvalue still treated as "no variation at all".
const DEGENERATE_VARIANCE: f64 = 1e-14;

/// FastICA contrast function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contrast {
    /// `g(u) = tanh(u)` (log-cosh contrast).
    Tanh,
    /// `g(u) = u·exp(−u²/2)`.
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastIcaOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub contrast: Contrast,
    /// Whitening keeps eigen-directions with `λ ≥ eigen_cutoff · λ_max`.
    pub eigen_cutoff: f64,
    pub seed: u64,
}

impl Default for FastIcaOptions {
    fn default() -> Self {
        FastIcaOptions {
            max_iterations: 200,
            tolerance: 1e-4,
            contrast: Contrast::Tanh,
            eigen_cutoff: 1e-8,
            seed: 0,
        }
    }
}

/// Fitted affine unmixing `y = R · V · (x − μ)`.
#[derive(Debug, Clone)]
pub struct IcaModel {
    mean: DVector<f64>,
    whitening: DMatrix<f64>,
    rotation: DMatrix<f64>,
    unmixing: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    iterations: usize,
    converged: bool,
}

impl IcaModel {
    /// Fits the model to the columns of `samples`.
    pub fn fit(samples: &DMatrix<f64>, opts: &FastIcaOptions) -> Result<IcaModel> {
        let n = samples.ncols();
        if n == 0 || samples.nrows() == 0 {
            return Err(Error::InvalidDimensions("no samples to fit".into()));
        }
        let mean = samples.column_mean();
        let mut centered = samples.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        let (whitening, eigenvalues) = whitening_transform(&centered, opts.eigen_cutoff)?;
        let white = &whitening * &centered;
        drop(centered);

        let (rotation, iterations, converged) = symmetric_fastica(&white, opts);
        if !converged {
            log::warn!(
                "FastICA did not converge in {} iterations (dim {})",
                opts.max_iterations,
                whitening.nrows()
            );
        }
        let unmixing = &rotation * &whitening;
        Ok(IcaModel {
            mean,
            whitening,
            rotation,
            unmixing,
            eigenvalues,
            iterations,
            converged,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `D × M` whitening matrix.
    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.whitening
    }

    /// `D × D` orthogonal rotation found by FastICA.
    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    /// `D × M` effective filters, `rotation · whitening`; row `j` is filter `j`.
    pub fn unmixing(&self) -> &DMatrix<f64> {
        &self.unmixing
    }

    /// Retained covariance eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn input_dim(&self) -> usize {
        self.whitening.ncols()
    }

    pub fn retained_dim(&self) -> usize {
        self.whitening.nrows()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Applies the unmixing to every column of `samples`.
    pub fn transform(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if samples.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "samples have {} rows, model expects {}",
                samples.nrows(),
                self.input_dim()
            )));
        }
        let mut centered = samples.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(&self.unmixing * centered)
    }
}

/// PCA whitening of already-centered samples. Returns the `D × M` transform
/// and the retained eigenvalues, largest first.
fn whitening_transform(centered: &DMatrix<f64>, cutoff: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = centered.ncols() as f64;
    let cov = (centered * centered.transpose()) / n;
    let eig = SymmetricEigen::new(cov);
    let lambda_max = eig.eigenvalues.max();
    if !(lambda_max > DEGENERATE_VARIANCE) {
        return Err(Error::DegeneratePatchStatistics);
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] >= cutoff * lambda_max)
        .collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let m = centered.nrows();
    let mut whitening = DMatrix::zeros(order.len(), m);
    let mut kept = Vec::with_capacity(order.len());
    for (row, &i) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        let scale = 1.0 / lambda.sqrt();
        let vector = eig.eigenvectors.column(i);
        for c in 0..m {
            whitening[(row, c)] = vector[c] * scale;
        }
        kept.push(lambda);
    }
    Ok((whitening, kept))
}

/// Symmetric FastICA on whitened data (`D × N`). Returns the rotation, the
/// number of iterations run, and whether the tolerance was reached.
fn symmetric_fastica(white: &DMatrix<f64>, opts: &FastIcaOptions) -> (DMatrix<f64>, usize, bool) {
    let d = white.nrows();
    let n = white.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);

    let white_t = white.transpose();
    let mut projected = DMatrix::zeros(d, n);
    let mut next = DMatrix::zeros(d, d);
    let mut derivative_mean = vec![0.0; d];
    let inv_n = 1.0 / n as f64;

    for iteration in 1..=opts.max_iterations {
        projected.gemm(1.0, &w, white, 0.0);
        derivative_mean.iter_mut().for_each(|v| *v = 0.0);
        // Column-major: consecutive entries walk down the rows.
        match opts.contrast {
            Contrast::Tanh => {
                for col in projected.column_iter_mut() {
                    for (u, dm) in col.into_iter().zip(derivative_mean.iter_mut()) {
                        // tanh via exp: same values to rounding, markedly cheaper.
                        let t = 1.0 - 2.0 / ((2.0 * *u).exp() + 1.0);
                        *u = t;
                        *dm += 1.0 - t * t;
                    }
                }
            }
            Contrast::Gauss => {
                for col in projected.column_iter_mut() {
                    for (u, dm) in col.into_iter().zip(derivative_mean.iter_mut()) {
                        let u2 = *u * *u;
                        let e = (-0.5 * u2).exp();
                        *dm += (1.0 - u2) * e;
                        *u *= e;
                    }
                }
            }
        }
        next.gemm(inv_n, &projected, &white_t, 0.0);
        for i in 0..d {
            let beta = derivative_mean[i] * inv_n;
            for j in 0..d {
                next[(i, j)] -= beta * w[(i, j)];
            }
        }
        let updated = symmetric_decorrelation(&next);

        let change = (0..d)
            .map(|i| (updated.row(i).dot(&w.row(i)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = updated;
        if change < opts.tolerance {
            return (w, iteration, true);
        }
    }
    (w, opts.max_iterations, false)
}

/// `(W Wᵀ)^(-1/2) W`, the closest orthogonal matrix to `W`'s row space.
pub(crate) fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt()));
    &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn laplacian(rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random::<f64>() - 0.5;
        -u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    #[test]
    fn decorrelation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
        let r = symmetric_decorrelation(&w);
        let e = &r * r.transpose() - DMatrix::identity(6, 6);
        assert!(e.amax() < 1e-10);
    }

    #[test]
    fn whitened_data_has_identity_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mix = DMatrix::from_fn(4, 4, |_, _| rng.random::<f64>());
        let src = DMatrix::from_fn(4, 5000, |_, _| laplacian(&mut rng));
        let x = &mix * src;
        let model = IcaModel::fit(&x, &FastIcaOptions::default()).unwrap();
        let y = model.transform(&x).unwrap();
        let cov = &y * y.transpose() / 5000.0;
        assert!((cov - DMatrix::identity(4, 4)).amax() < 1e-8);
    }

    #[test]
    fn rank_deficient_input_drops_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let src = DMatrix::from_fn(2, 3000, |_, _| laplacian(&mut rng));
        // Third row is an exact combination of the first two.
        let x = DMatrix::from_fn(3, 3000, |r, c| match r {
            0 => src[(0, c)],
            1 => src[(1, c)],
            _ => src[(0, c)] - 2.0 * src[(1, c)],
        });
        let model = IcaModel::fit(&x, &FastIcaOptions::default()).unwrap();
        assert_eq!(model.retained_dim(), 2);
        assert_eq!(model.input_dim(), 3);
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let x = DMatrix::from_element(3, 100, 0.4);
        assert!(matches!(
            IcaModel::fit(&x, &FastIcaOptions::default()),
            Err(Error::DegeneratePatchStatistics)
        ));
    }

    #[test]
    fn non_converged_rotation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(5, 2000, |_, _| laplacian(&mut rng));
        let opts = FastIcaOptions {
            max_iterations: 1,
            tolerance: 0.0,
            ..FastIcaOptions::default()
        };
        let model = IcaModel::fit(&x, &opts).unwrap();
        assert!(!model.converged());
        let r = model.rotation();
        assert!((r * r.transpose() - DMatrix::identity(5, 5)).amax() < 1e-6);
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(3, 1000, |_, _| laplacian(&mut rng));
        let a = IcaModel::fit(&x, &FastIcaOptions::default()).unwrap();
        let b = IcaModel::fit(&x, &FastIcaOptions::default()).unwrap();
        assert_eq!(a.unmixing(), b.unmixing());
    }

    #[test]
    fn transform_rejects_wrong_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(3, 500, |_, _| laplacian(&mut rng));
        let model = IcaModel::fit(&x, &FastIcaOptions::default()).unwrap();
        assert!(model.transform(&DMatrix::zeros(4, 10)).is_err());
    }
}
