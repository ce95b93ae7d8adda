//! Equivalence battery for the closed-form channel kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::VerifyConfig;
use crate::channel::{
    apply_dd, effective_channel_cp, effective_channel_rcp, oracle_rcp, pass_dd, ChannelSpec, EffectiveChannel, IntegerTap, PathChannel,
};
use crate::error::Result;
use crate::modem::{Modulation, OtfsConfig, Variant};
use crate::numerics::{relative_error, ComplexMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// Fractional kernel against the dense time-domain matrix, single prefix.
    RcpOracle,
    /// Fractional kernel against the sample-level simulation, per-column prefix.
    CpTime,
    /// Fractional kernel at integer shifts against the integer-tap kernel.
    IntegerRcp,
    IntegerCp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyCase {
    pub check: Check,
    pub trial: usize,
    pub m: usize,
    pub n: usize,
    pub paths: usize,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub cases: Vec<VerifyCase>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn max_error(&self, check: Check) -> f64 {
        self.cases.iter().filter(|c| c.check == check).map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn count(&self, check: Check) -> usize {
        self.cases.iter().filter(|c| c.check == check).count()
    }
}

fn random_grid(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(m, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn case(check: Check, trial: usize, cfg: &OtfsConfig, paths: usize, error: f64, tolerance: f64) -> VerifyCase {
    VerifyCase { check, trial, m: cfg.m, n: cfg.n, paths, error, tolerance, passed: error < tolerance }
}

/// Random fractional channels over every `(M, N)` pair, then all integer
/// shifts on the small grid.
pub fn verify_channel(cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sizes: Vec<(usize, usize)> = cfg.m.iter().flat_map(|&m| cfg.n.iter().map(move |&n| (m, n))).collect();
    let mut cases = Vec::new();
    for trial in 0..cfg.trials {
        let (m, n) = sizes[trial % sizes.len()];
        let n_cp = cfg.n_cp.min(m);
        let spec = ChannelSpec {
            paths: rng.random_range(1..=cfg.max_paths),
            max_delay: (n_cp as f64).min(m as f64 - 1.0),
            max_doppler: n as f64 / 4.0,
            integer_delays: false,
            integer_dopplers: false,
        };
        let chan = spec.draw(&mut rng);
        let x = random_grid(&mut rng, m, n);

        let rcp = OtfsConfig::new(m, n, Variant::Rcp, n_cp, Modulation::Qpsk);
        let fast = apply_dd(&x, &effective_channel_rcp(&chan, &rcp)?)?;
        let slow = oracle_rcp(&chan, &rcp)?.apply_dd(&x)?;
        let err = relative_error(fast.as_slice(), slow.as_slice());
        cases.push(case(Check::RcpOracle, trial, &rcp, chan.len(), err, cfg.rcp_tolerance));

        let cp = OtfsConfig { variant: Variant::Cp, ..rcp };
        let fast = apply_dd(&x, &effective_channel_cp(&chan, &cp)?)?;
        let time = pass_dd(&x, &chan, &cp)?;
        let err = relative_error(fast.as_slice(), time.as_slice());
        cases.push(case(Check::CpTime, trial, &cp, chan.len(), err, cfg.cp_tolerance));
    }

    let (m, n) = (cfg.integer_m, cfg.integer_n);
    let gain = C64::new(0.8, -0.6);
    let mut trial = 0;
    for variant in [Variant::Rcp, Variant::Cp] {
        let icfg = OtfsConfig::new(m, n, variant, cfg.n_cp.min(m), Modulation::Qpsk);
        for ell in 0..m {
            for kappa in -(n as isize) + 1..n as isize {
                let frac = EffectiveChannel::new(&PathChannel::single(gain, ell as f64, kappa as f64), &icfg)?;
                let int = EffectiveChannel::from_integer_taps(&[IntegerTap { gain, delay: ell, doppler: kappa }], &icfg)?;
                let mut worst = 0.0f64;
                for k in 0..n {
                    for l in 0..m {
                        for kp in 0..n {
                            for lp in 0..m {
                                worst = worst.max((frac.entry(l, k, lp, kp) - int.entry(l, k, lp, kp)).norm());
                            }
                        }
                    }
                }
                let check = if variant == Variant::Rcp { Check::IntegerRcp } else { Check::IntegerCp };
                cases.push(case(check, trial, &icfg, 1, worst, cfg.integer_tolerance));
                trial += 1;
            }
        }
    }
    Ok(VerifyReport { cases })
}
