//! QAM mapping and OTFS modulation with rectangular pulses.
//!
//! With `G_tx = G_rx = I` the Heisenberg transform after the ISFFT collapses
//! to `S = X · F_Nᴴ`, and the Wigner transform followed by the SFFT collapses
//! to `Y = R · F_N`. Samples are serialized as `t = n·M + m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dft_matrix, vec_inv, ComplexMatrix, C64};

/// Delay-Doppler frame indexed `[(l, k)]`, `l` delay and `k` Doppler.
pub type DdGrid = ComplexMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Constellation point for an integer label (first bit is the MSB).
    ///
    /// Gray mapping with even bits on the in-phase axis and odd bits on the
    /// quadrature axis; QPSK `00 → (1+j)/√2`, `11 → (-1-j)/√2`.
    pub fn point(self, label: usize) -> C64 {
        let bps = self.bits_per_symbol();
        let bit = |i: usize| ((label >> (bps - 1 - i)) & 1) as f64;
        let s = |i: usize| 1.0 - 2.0 * bit(i);
        match self {
            Modulation::Qpsk => C64::new(s(0), s(1)) / 2f64.sqrt(),
            Modulation::Qam16 => {
                C64::new(s(0) * (2.0 - s(2)), s(1) * (2.0 - s(3))) / 10f64.sqrt()
            }
            Modulation::Qam64 => C64::new(
                s(0) * (4.0 - s(2) * (2.0 - s(4))),
                s(1) * (4.0 - s(3) * (2.0 - s(5))),
            ) / 42f64.sqrt(),
        }
    }

    pub fn constellation(self) -> Vec<C64> {
        (0..self.order()).map(|i| self.point(i)).collect()
    }

    /// Index of the nearest constellation point; ties go to the lowest index.
    pub fn nearest_label(self, constellation: &[C64], x: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in constellation.iter().enumerate() {
            let d = (x - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

pub fn qam_map(bits: &[u8], modulation: Modulation) -> Result<Vec<C64>> {
    let bps = modulation.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::BitCount {
            expected: format!("a multiple of {bps}"),
            got: bits.len(),
        });
    }
    Ok(bits
        .chunks(bps)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            modulation.point(label)
        })
        .collect())
}

/// Nearest-neighbour quantization to the constellation, then back to bits.
pub fn qam_demap_nearest(symbols: &[C64], modulation: Modulation) -> Vec<u8> {
    let bps = modulation.bits_per_symbol();
    let points = modulation.constellation();
    let mut bits = Vec::with_capacity(symbols.len() * bps);
    for &x in symbols {
        let label = modulation.nearest_label(&points, x);
        bits.extend((0..bps).rev().map(|i| ((label >> i) & 1) as u8));
    }
    bits
}

/// Replace every symbol by its nearest constellation point.
pub fn quantize(symbols: &[C64], modulation: Modulation) -> Vec<C64> {
    let points = modulation.constellation();
    symbols
        .iter()
        .map(|&x| points[modulation.nearest_label(&points, x)])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One cyclic prefix for the whole subframe.
    Rcp,
    /// One cyclic prefix per column (OFDM-compatible).
    Cp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtfsConfig {
    /// Delay bins (subcarriers).
    pub m: usize,
    /// Doppler bins (symbols).
    pub n: usize,
    /// Subcarrier spacing in Hz.
    #[serde(default = "default_delta_f")]
    pub delta_f: f64,
    /// Carrier frequency in Hz.
    #[serde(default = "default_carrier")]
    pub carrier_freq: f64,
    pub variant: Variant,
    pub n_cp: usize,
    pub modulation: Modulation,
}

fn default_delta_f() -> f64 {
    15e3
}

fn default_carrier() -> f64 {
    4e9
}

impl OtfsConfig {
    pub fn new(m: usize, n: usize, variant: Variant, n_cp: usize, modulation: Modulation) -> Self {
        Self {
            m,
            n,
            delta_f: default_delta_f(),
            carrier_freq: default_carrier(),
            variant,
            n_cp,
            modulation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 {
            return Err(Error::InvalidDimension(format!(
                "frame must be at least 1x1, got {}x{}",
                self.m, self.n
            )));
        }
        let limit = match self.variant {
            Variant::Rcp => self.m * self.n,
            Variant::Cp => self.m,
        };
        if self.n_cp > limit {
            return Err(Error::InvalidParameter(format!(
                "n_cp = {} exceeds the {limit} samples available for the cyclic extension",
                self.n_cp
            )));
        }
        if !(self.delta_f > 0.0) {
            return Err(Error::InvalidParameter("delta_f must be positive".into()));
        }
        Ok(())
    }

    pub fn frame_size(&self) -> usize {
        self.m * self.n
    }

    /// Number of samples in one transmitted subframe, prefixes included.
    pub fn stream_len(&self) -> usize {
        match self.variant {
            Variant::Rcp => self.m * self.n + self.n_cp,
            Variant::Cp => (self.m + self.n_cp) * self.n,
        }
    }

    fn check_grid(&self, x: &DdGrid) -> Result<()> {
        if x.shape() != (self.m, self.n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.m, self.n),
                got: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }
}

/// Delay-Doppler grid to time samples, cyclic prefix(es) included.
pub fn modulate(x: &DdGrid, cfg: &OtfsConfig) -> Result<Vec<C64>> {
    cfg.check_grid(x)?;
    let s = x * dft_matrix(cfg.n)?.adjoint();
    Ok(add_cyclic_prefix(s.as_slice(), cfg))
}

/// Insert the variant's cyclic prefix(es) into `MN` core samples.
pub fn add_cyclic_prefix(core: &[C64], cfg: &OtfsConfig) -> Vec<C64> {
    let (m, n, ncp) = (cfg.m, cfg.n, cfg.n_cp);
    debug_assert_eq!(core.len(), m * n);
    let mut out = Vec::with_capacity(cfg.stream_len());
    match cfg.variant {
        Variant::Rcp => {
            out.extend_from_slice(&core[m * n - ncp..]);
            out.extend_from_slice(core);
        }
        Variant::Cp => {
            for col in core.chunks(m) {
                out.extend_from_slice(&col[m - ncp..]);
                out.extend_from_slice(col);
            }
        }
    }
    out
}

/// Strip the cyclic prefix(es), returning the `MN` core samples in `t = nM + m` order.
pub fn remove_cyclic_prefix(r: &[C64], cfg: &OtfsConfig) -> Result<Vec<C64>> {
    let expected = cfg.stream_len();
    if r.len() != expected {
        return Err(Error::StreamLength { expected, got: r.len() });
    }
    let (m, ncp) = (cfg.m, cfg.n_cp);
    Ok(match cfg.variant {
        Variant::Rcp => r[ncp..].to_vec(),
        Variant::Cp => r
            .chunks(m + ncp)
            .flat_map(|block| block[ncp..].iter().copied())
            .collect(),
    })
}

/// Time samples back to the delay-Doppler grid.
pub fn demodulate(r: &[C64], cfg: &OtfsConfig) -> Result<DdGrid> {
    let core = remove_cyclic_prefix(r, cfg)?;
    core_to_grid(&core, cfg)
}

/// `vec⁻¹(core) · F_N` for CP-free samples.
pub fn core_to_grid(core: &[C64], cfg: &OtfsConfig) -> Result<DdGrid> {
    let rx = vec_inv(core, cfg.m, cfg.n)?;
    Ok(rx * dft_matrix(cfg.n)?)
}
