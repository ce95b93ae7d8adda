//! Pilot masks, frame assembly and PAPR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::{qam_map, DdGrid, OtfsConfig};
use crate::numerics::{ComplexMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotKind {
    /// Random constellation symbols on a contiguous block of delay rows.
    Blockwise,
    /// One high-power spike with zero guards over the same block.
    Spike,
}

/// Mask `Ω` over the grid (pilots and guards) plus what fills it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotPattern {
    pub kind: PilotKind,
    pub m: usize,
    pub n: usize,
    pub block_start_row: usize,
    pub rows: usize,
    /// Spike power in dB relative to unit symbol energy.
    pub spike_power_db: Option<f64>,
}

fn block_start(cfg: &OtfsConfig, rows: usize) -> Result<usize> {
    if rows == 0 || rows > cfg.m {
        return Err(Error::InvalidParameter(format!(
            "pilot rows must lie in 1..={}, got {rows}",
            cfg.m
        )));
    }
    Ok((cfg.m - rows) / 2)
}

/// Rows `[⌊(M - rows)/2⌋, +rows)` across all Doppler columns.
pub fn blockwise_mask(cfg: &OtfsConfig, rows: usize) -> Result<PilotPattern> {
    Ok(PilotPattern {
        kind: PilotKind::Blockwise,
        m: cfg.m,
        n: cfg.n,
        block_start_row: block_start(cfg, rows)?,
        rows,
        spike_power_db: None,
    })
}

/// Same support as [`blockwise_mask`], with the spike at the block centre.
pub fn spike_mask(cfg: &OtfsConfig, rows: usize, spike_power_db: f64) -> Result<PilotPattern> {
    if !spike_power_db.is_finite() {
        return Err(Error::InvalidParameter("spike power must be finite".into()));
    }
    Ok(PilotPattern {
        kind: PilotKind::Spike,
        m: cfg.m,
        n: cfg.n,
        block_start_row: block_start(cfg, rows)?,
        rows,
        spike_power_db: Some(spike_power_db),
    })
}

impl PilotPattern {
    #[inline]
    pub fn is_pilot(&self, l: usize, _k: usize) -> bool {
        l >= self.block_start_row && l < self.block_start_row + self.rows
    }

    /// `η = |Ω| / (MN)`.
    pub fn overhead(&self) -> f64 {
        self.rows as f64 / self.m as f64
    }

    pub fn pilot_count(&self) -> usize {
        self.rows * self.n
    }

    pub fn data_count(&self) -> usize {
        (self.m - self.rows) * self.n
    }

    /// Mask as a 0/1 real grid.
    pub fn mask(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.m, self.n, |l, k| if self.is_pilot(l, k) { 1.0 } else { 0.0 })
    }

    /// Positions in `vec` order (`k` outer, `l` inner).
    pub fn pilot_positions(&self) -> Vec<(usize, usize)> {
        self.positions(true)
    }

    pub fn data_positions(&self) -> Vec<(usize, usize)> {
        self.positions(false)
    }

    fn positions(&self, pilot: bool) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.n {
            for l in 0..self.m {
                if self.is_pilot(l, k) == pilot {
                    out.push((l, k));
                }
            }
        }
        out
    }

    pub fn spike_position(&self) -> Option<(usize, usize)> {
        match self.kind {
            PilotKind::Spike => Some((self.block_start_row + self.rows / 2, self.n / 2)),
            PilotKind::Blockwise => None,
        }
    }

    pub fn spike_amplitude(&self) -> Option<f64> {
        self.spike_power_db.map(|p| 10f64.powf(p / 20.0))
    }

    /// Rows `l` such that every position on the row is a pilot.
    pub fn pilot_rows(&self) -> std::ops::Range<usize> {
        self.block_start_row..self.block_start_row + self.rows
    }
}

/// A transmitted frame split into its training and data parts.
#[derive(Debug, Clone)]
pub struct FramePlan {
    pub x: DdGrid,
    pub pattern: PilotPattern,
    /// `Ω ⊙ X`.
    pub x_train: DdGrid,
    /// `Ω̄ ⊙ X`.
    pub x_test: DdGrid,
    pub data_bits: Vec<u8>,
}

impl FramePlan {
    /// Symbols of `grid` at data positions, in `vec` order.
    pub fn data_symbols(&self, grid: &DdGrid) -> Vec<C64> {
        self.pattern.data_positions().into_iter().map(|p| grid[p]).collect()
    }

    pub fn bits_per_frame(&self) -> usize {
        self.data_bits.len()
    }
}

/// Place `bits` on the data positions and fill the pilot region.
///
/// Blockwise pilots are seeded random constellation symbols; the spike
/// pattern carries one spike and zero guards.
pub fn assemble_frame(bits: &[u8], pattern: &PilotPattern, cfg: &OtfsConfig, seed: u64) -> Result<FramePlan> {
    if (pattern.m, pattern.n) != (cfg.m, cfg.n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", cfg.m, cfg.n),
            got: format!("{}x{}", pattern.m, pattern.n),
        });
    }
    let bps = cfg.modulation.bits_per_symbol();
    let need = pattern.data_count() * bps;
    if bits.len() != need {
        return Err(Error::BitCount { expected: need.to_string(), got: bits.len() });
    }
    let symbols = qam_map(bits, cfg.modulation)?;
    let mut x_train = ComplexMatrix::zeros(cfg.m, cfg.n);
    let mut x_test = ComplexMatrix::zeros(cfg.m, cfg.n);
    for (p, s) in pattern.data_positions().into_iter().zip(symbols) {
        x_test[p] = s;
    }
    match pattern.kind {
        PilotKind::Blockwise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = cfg.modulation.constellation();
            for p in pattern.pilot_positions() {
                x_train[p] = points[rng.random_range(0..points.len())];
            }
        }
        PilotKind::Spike => {
            let pos = pattern.spike_position().expect("spike pattern has a spike");
            let amp = pattern.spike_amplitude().expect("spike pattern has a power");
            x_train[pos] = C64::new(amp, 0.0);
        }
    }
    Ok(FramePlan {
        x: &x_train + &x_test,
        pattern: pattern.clone(),
        x_train,
        x_test,
        data_bits: bits.to_vec(),
    })
}

/// `10 log10(max|s|² / mean|s|²)` in dB.
pub fn papr(stream: &[C64]) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::InvalidParameter("PAPR of an empty stream".into()));
    }
    let peak = stream.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mean = stream.iter().map(|v| v.norm_sqr()).sum::<f64>() / stream.len() as f64;
    Ok(10.0 * (peak / mean).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{demodulate, modulate, qam_demap_nearest, Modulation, Variant};
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn cfg(m: usize, n: usize) -> OtfsConfig {
        OtfsConfig::new(m, n, Variant::Rcp, 2, Modulation::Qpsk)
    }

    fn random_bits(len: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn blockwise_examples() {
        let big = blockwise_mask(&cfg(1024, 14), 48).unwrap();
        assert!((big.overhead() - 0.046875).abs() < 1e-15);
        let full = blockwise_mask(&cfg(8, 4), 8).unwrap();
        assert!(full.mask().iter().all(|&v| v == 1.0));
        let p = blockwise_mask(&cfg(64, 14), 3).unwrap();
        assert_eq!(p.block_start_row, 30);
        assert_eq!(p.pilot_rows(), 30..33);
        assert!(blockwise_mask(&cfg(8, 4), 9).is_err());
        assert!(blockwise_mask(&cfg(8, 4), 0).is_err());
    }

    #[test]
    fn spike_examples() {
        let p = spike_mask(&cfg(64, 14), 3, 0.0).unwrap();
        assert_eq!(p.spike_position(), Some((31, 7)));
        assert_eq!(p.spike_amplitude(), Some(1.0));
        let q = spike_mask(&cfg(64, 14), 3, 20.0).unwrap();
        assert!((q.spike_amplitude().unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(q.pilot_count(), 42);
    }

    #[test]
    fn all_pilot_frame_has_no_data() {
        let c = cfg(8, 4);
        let p = blockwise_mask(&c, 8).unwrap();
        let plan = assemble_frame(&[], &p, &c, 1).unwrap();
        assert!(plan.x_test.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn supports_are_disjoint_and_seeded() {
        let c = cfg(16, 8);
        let p = blockwise_mask(&c, 4).unwrap();
        let bits = random_bits(p.data_count() * 2, 3);
        let a = assemble_frame(&bits, &p, &c, 7).unwrap();
        let b = assemble_frame(&bits, &p, &c, 7).unwrap();
        assert_eq!(a.x_train, b.x_train);
        assert!(a.x_train.component_mul(&a.x_test).iter().all(|v| v.norm() == 0.0));
        assert!(assemble_frame(&bits[1..], &p, &c, 7).is_err());
    }

    #[test]
    fn spike_frame_content() {
        let c = cfg(16, 8);
        let p = spike_mask(&c, 4, 20.0).unwrap();
        let bits = random_bits(p.data_count() * 2, 4);
        let plan = assemble_frame(&bits, &p, &c, 0).unwrap();
        let nonzero: Vec<_> = p.pilot_positions().into_iter().filter(|&q| plan.x[q].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![(8, 4)]);
        assert!((plan.x[(8, 4)].re - 10.0).abs() < 1e-12);
    }

    #[test]
    fn papr_examples() {
        let flat = vec![C64::new(0.0, 1.0); 16];
        assert!(papr(&flat).unwrap().abs() < 1e-12);
        let mut s = vec![C64::new(0.0, 0.0); 100];
        s[0] = C64::new(2.0, 0.0);
        assert!((papr(&s).unwrap() - 20.0).abs() < 1e-12);
        assert!(papr(&[]).is_err());
    }

    proptest! {
        #[test]
        fn overhead_is_row_fraction(m in 2usize..80, rows_frac in 0.0f64..1.0, n in 1usize..6) {
            let rows = 1 + ((m - 1) as f64 * rows_frac) as usize;
            let p = blockwise_mask(&cfg(m, n), rows).unwrap();
            let ones = p.mask().iter().filter(|&&v| v == 1.0).count();
            prop_assert_eq!(ones, rows * n);
            prop_assert!((p.overhead() - rows as f64 / m as f64).abs() < 1e-15);
        }

        #[test]
        fn frame_roundtrip(seed in 0u64..500, rows in 1usize..8) {
            let c = cfg(8, 4);
            let p = blockwise_mask(&c, rows).unwrap();
            let bits = random_bits(p.data_count() * 2, seed);
            let plan = assemble_frame(&bits, &p, &c, seed).unwrap();
            let y = demodulate(&modulate(&plan.x, &c).unwrap(), &c).unwrap();
            prop_assert_eq!(qam_demap_nearest(&plan.data_symbols(&y), c.modulation), bits);
        }
    }
}
