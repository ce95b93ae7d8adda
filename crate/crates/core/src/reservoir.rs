//! Pieces shared by the reservoir detectors: random weight draws,
//! activations and the pseudo-inverse readout solve.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};

/// Singular values below `PINV_RCOND · σ_max` are dropped.
pub const PINV_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `tanh(a) + j tanh(b)` for `a + jb`.
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: C64) -> C64 {
        match self {
            Activation::Tanh => C64::new(v.re.tanh(), v.im.tanh()),
            Activation::Identity => v,
        }
    }
}

/// Uniform `[-1, 1]` entries with `⌊sparsity · rows · cols⌋` of them zeroed.
pub fn sparse_uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, sparsity: f64) -> DMatrix<f64> {
    let mut w = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0));
    let total = rows * cols;
    let zeros = ((sparsity * total as f64 + 1e-9).floor() as usize).min(total);
    for idx in sample(rng, total, zeros) {
        w[idx] = 0.0;
    }
    w
}

pub fn spectral_radius(w: &DMatrix<f64>) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    w.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Square sparse matrix rescaled to the requested spectral radius.
///
/// Draws whose radius is numerically zero (nilpotent or all-zero) are redrawn.
pub fn recurrent_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, sparsity: f64, radius: f64) -> Result<DMatrix<f64>> {
    if radius == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    for _ in 0..1000 {
        let w = sparse_uniform(rng, n, n, sparsity);
        let rho = spectral_radius(&w);
        if rho > 1e-8 {
            return Ok(w * (radius / rho));
        }
    }
    Err(Error::InvalidParameter(format!(
        "could not draw a {n}x{n} recurrent matrix with sparsity {sparsity} and a nonzero spectral radius"
    )))
}

pub fn check_reservoir_params(spectral_radius: f64, sparsity: f64) -> Result<()> {
    if !(0.0..1.0).contains(&spectral_radius) {
        return Err(Error::InvalidParameter(format!(
            "spectral radius must lie in [0, 1), got {spectral_radius}"
        )));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::InvalidParameter(format!("sparsity must lie in [0, 1], got {sparsity}")));
    }
    Ok(())
}

pub fn to_complex(w: &DMatrix<f64>) -> ComplexMatrix {
    w.map(|v| C64::new(v, 0.0))
}

/// Minimum-norm least-squares readout `W = T · U⁺`.
///
/// `u` holds one regressor per column, `t` one target row per output.
/// Returns the weights and the squared Frobenius residual `‖T - W U‖²`.
pub fn ls_readout(u: &ComplexMatrix, t: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    if u.ncols() != t.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} target columns", u.ncols()),
            got: format!("{}", t.ncols()),
        });
    }
    if u.ncols() == 0 {
        return Err(Error::Training("no training samples".into()));
    }
    let svd = u.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let w = if smax == 0.0 {
        ComplexMatrix::zeros(t.nrows(), u.nrows())
    } else {
        let pinv = svd
            .pseudo_inverse(PINV_RCOND * smax)
            .map_err(|e| Error::Training(e.to_string()))?;
        t * pinv
    };
    let residual = (t - &w * u).norm_squared();
    Ok((w, residual))
}

/// Row vector of targets as a `1 × L` matrix.
pub fn row(values: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(1, values.len(), values)
}
