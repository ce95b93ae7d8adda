//! Transform and indexing primitives shared by every other module.
//!
//! Matrices are `nalgebra` column-major, so `vec` is the raw storage order:
//! `vec(X)[n * M + m] == X[(m, n)]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// `exp(j * 2π * num / den)` with the numerator reduced modulo `den` first.
#[inline]
pub fn unit_phase(num: i64, den: usize) -> C64 {
    let r = num.rem_euclid(den as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * r / den as f64)
}

/// `exp(j * theta)`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// `⟨i⟩_m` for signed `i`.
#[inline]
pub fn wrap(i: isize, m: usize) -> usize {
    i.rem_euclid(m as isize) as usize
}

/// Normalized `m`-point DFT matrix, entry `(r, c) = exp(-j2πrc/m) / √m`.
pub fn dft_matrix(m: usize) -> Result<ComplexMatrix> {
    if m == 0 {
        return Err(Error::InvalidDimension("DFT size must be at least 1".into()));
    }
    let scale = 1.0 / (m as f64).sqrt();
    Ok(DMatrix::from_fn(m, m, |r, c| {
        unit_phase(-((r * c) as i64), m) * scale
    }))
}

/// `F_M · X · F_Nᴴ`.
pub fn isfft(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (m, n) = x.shape();
    let fm = dft_matrix(m)?;
    let fn_ = dft_matrix(n)?;
    Ok(&fm * x * fn_.adjoint())
}

/// `F_Mᴴ · Y · F_N`, the inverse of [`isfft`].
pub fn sfft(y: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (m, n) = y.shape();
    let fm = dft_matrix(m)?;
    let fn_ = dft_matrix(n)?;
    Ok(fm.adjoint() * y * fn_)
}

/// Column-stacking vectorization.
pub fn vec(x: &ComplexMatrix) -> Vec<C64> {
    x.as_slice().to_vec()
}

/// Inverse of [`vec`]: fill an `m × n` matrix column by column.
pub fn vec_inv(v: &[C64], m: usize, n: usize) -> Result<ComplexMatrix> {
    if v.len() != m * n {
        return Err(Error::ShapeMismatch {
            expected: format!("{m}*{n} = {} elements", m * n),
            got: format!("{} elements", v.len()),
        });
    }
    Ok(DMatrix::from_column_slice(m, n, v))
}

/// Periodic sinc `S_M(x) = (1/M) Σ_{m<M} exp(j2πmx/M)`.
///
/// Uses the closed form `(1/M) e^{jπ(M-1)x/M} sin(πx)/sin(πx/M)` except near
/// `x ≡ 0 (mod M)`, where the sum is evaluated directly.
pub fn dirichlet(m: usize, x: f64) -> C64 {
    let mf = m as f64;
    // reduce arguments before the sines so that near-integer x keeps full
    // relative accuracy in the numerator
    let period = 2.0 * mf;
    let xr = x - period * (x / period).round();
    let denom = (PI * xr / mf).sin();
    if denom.abs() < 1e-9 {
        return dirichlet_sum(m, x);
    }
    let k = xr.round();
    let sign = if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let numer = sign * (PI * (xr - k)).sin();
    cis(PI * (mf - 1.0) * x / mf) * (numer / (mf * denom))
}

fn dirichlet_sum(m: usize, x: f64) -> C64 {
    let mf = m as f64;
    (0..m).map(|k| cis(2.0 * PI * k as f64 * x / mf)).sum::<C64>() / mf
}

/// Dense 3-way tensor with the first index fastest, so `fiber(j, k)` is a
/// contiguous slice of length `d1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    dims: (usize, usize, usize),
    data: Vec<C64>,
}

impl ComplexTensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            data: vec![C64::new(0.0, 0.0); d1 * d2 * d3],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    fn offset(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < self.dims.1 && k < self.dims.2);
        self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[self.offset(j, k) + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        let o = self.offset(j, k);
        self.data[o + i] = v;
    }

    #[inline]
    pub fn fiber(&self, j: usize, k: usize) -> &[C64] {
        let o = self.offset(j, k);
        &self.data[o..o + self.dims.0]
    }

    #[inline]
    pub fn fiber_mut(&mut self, j: usize, k: usize) -> &mut [C64] {
        let o = self.offset(j, k);
        let d1 = self.dims.0;
        &mut self.data[o..o + d1]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }
}

/// Relative Frobenius error `‖a - b‖ / ‖b‖` over two equally long slices.
pub fn relative_error(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
