//! Model-based baselines: DD-domain LMMSE and the embedded-spike channel estimator.

use serde::{Deserialize, Serialize};

use crate::channel::{apply_dd, EffectiveChannel, IntegerTap};
use crate::error::{Error, Result};
use crate::modem::{DdGrid, OtfsConfig};
use crate::numerics::{vec, vec_inv, wrap, ComplexMatrix, C64};
use crate::pilots::{PilotKind, PilotPattern};

/// Regularization used when the noise variance is (numerically) zero.
pub const RIDGE_FLOOR: f64 = 1e-12;

/// Spike-estimator taps below this fraction of the strongest response are ignored.
const RELATIVE_TAP_FLOOR: f64 = 1e-9;

/// Dense LMMSE: `x̂ = (GᴴG + σ²I)⁻¹ Gᴴ vec(Y)`.
pub fn lmmse_dd(y: &DdGrid, heff: &EffectiveChannel, noise_var: f64) -> Result<DdGrid> {
    check_shape(y, heff)?;
    let g = heff.matrix();
    let mut a = g.adjoint() * &g;
    let ridge = noise_var.max(RIDGE_FLOOR);
    for i in 0..a.nrows() {
        a[(i, i)] += ridge;
    }
    let rhs = g.adjoint() * nalgebra::DVector::from_vec(vec(y));
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("LMMSE normal matrix is not positive definite".into()))?;
    let x = chol.solve(&rhs);
    let (m, n) = heff.shape();
    vec_inv(x.as_slice(), m, n)
}

/// Same estimate as [`lmmse_dd`], by conjugate gradients on the normal
/// equations. Only the kernel's forward and adjoint actions are used, which is
/// cheap for sparse tap kernels.
pub fn lmmse_cg(y: &DdGrid, heff: &EffectiveChannel, noise_var: f64, tol: f64, max_iter: usize) -> Result<DdGrid> {
    check_shape(y, heff)?;
    let ridge = noise_var.max(RIDGE_FLOOR);
    let normal = |p: &DdGrid| -> Result<DdGrid> { Ok(heff.apply_adjoint(&apply_dd(p, heff)?)? + p * C64::new(ridge, 0.0)) };
    let b = heff.apply_adjoint(y)?;
    let b_norm = b.norm();
    let mut x = ComplexMatrix::zeros(y.nrows(), y.ncols());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            break;
        }
        let ap = normal(&p)?;
        let alpha = rr / p.dotc(&ap).re;
        x += &p * C64::new(alpha, 0.0);
        r -= &ap * C64::new(alpha, 0.0);
        let rr_new = r.norm_squared();
        p = &r + &p * C64::new(rr_new / rr, 0.0);
        rr = rr_new;
    }
    if rr.sqrt() > tol * b_norm {
        log::warn!("LMMSE CG stopped at relative residual {:.2e}", rr.sqrt() / b_norm);
    }
    Ok(x)
}

fn check_shape(y: &DdGrid, heff: &EffectiveChannel) -> Result<()> {
    if y.shape() != heff.shape() {
        let (m, n) = heff.shape();
        return Err(Error::ShapeMismatch {
            expected: format!("{m}x{n}"),
            got: format!("{}x{}", y.nrows(), y.ncols()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiEstimate {
    pub taps: Vec<IntegerTap>,
    pub noise_var: f64,
}

/// Threshold detector on the guard region of an embedded spike.
///
/// Taps are searched at delay offsets `0..` from the spike row to the end of
/// the pilot block and at every Doppler column, with the Doppler offset wrapped
/// to `(-N/2, N/2]`. The noise level is `median|Y| / √ln 2` over the guard
/// positions, which is the Rayleigh median rule.
pub fn estimate_csi_spike(y: &DdGrid, pattern: &PilotPattern, cfg: &OtfsConfig, threshold_factor: f64) -> Result<CsiEstimate> {
    if pattern.kind != PilotKind::Spike {
        return Err(Error::InvalidParameter("spike estimator needs a spike pilot pattern".into()));
    }
    if y.shape() != (cfg.m, cfg.n) || (pattern.m, pattern.n) != (cfg.m, cfg.n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", cfg.m, cfg.n),
            got: format!("{}x{}", y.nrows(), y.ncols()),
        });
    }
    let (ls, ks) = pattern.spike_position().expect("spike pattern has a spike");
    let amp = pattern.spike_amplitude().expect("spike pattern has a power");
    let n = cfg.n;

    let mut guard: Vec<f64> = pattern
        .pilot_positions()
        .into_iter()
        .filter(|&p| p != (ls, ks))
        .map(|p| y[p].norm())
        .collect();
    let sigma = if guard.is_empty() {
        0.0
    } else {
        guard.sort_by(f64::total_cmp);
        median(&guard) / std::f64::consts::LN_2.sqrt()
    };

    let unit = EffectiveChannel::from_integer_taps(&[], cfg)?;
    let tap_at = |l: usize, k: usize| {
        let mut d = k as isize - ks as isize;
        let half = (n / 2) as isize;
        d = wrap(d, n) as isize;
        if d > half {
            d -= n as isize;
        }
        let mut tap = IntegerTap { gain: C64::new(1.0, 0.0), delay: l - ls, doppler: d };
        tap.gain = y[(l, k)] / (unit.tap_phase(&tap, l, k) * amp);
        tap
    };

    let rows = ls..pattern.block_start_row + pattern.rows;
    let peak = rows.clone().flat_map(|l| (0..n).map(move |k| (l, k))).map(|p| y[p].norm()).fold(0.0, f64::max);
    let threshold = (threshold_factor * sigma).max(RELATIVE_TAP_FLOOR * peak);
    let mut taps = Vec::new();
    for l in rows {
        for k in 0..n {
            if y[(l, k)].norm() > threshold {
                taps.push(tap_at(l, k));
            }
        }
    }
    if taps.is_empty() {
        taps.push(tap_at(ls, ks));
    }
    Ok(CsiEstimate { taps, noise_var: sigma * sigma })
}

fn median(sorted: &[f64]) -> f64 {
    let h = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[h]
    } else {
        0.5 * (sorted[h - 1] + sorted[h])
    }
}

/// LMMSE on the integer-tap kernel built from `csi`, without pilot cancellation.
pub fn lmmse_estimated(y: &DdGrid, csi: &CsiEstimate, cfg: &OtfsConfig) -> Result<DdGrid> {
    let heff = EffectiveChannel::from_integer_taps(&csi.taps, cfg)?;
    lmmse_cg(y, &heff, csi.noise_var, 1e-13, 4 * cfg.frame_size())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{pass_dd, unit_noise, PathChannel};
    use crate::modem::{Modulation, Variant};
    use crate::pilots::spike_mask;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, n: usize, variant: Variant) -> OtfsConfig {
        OtfsConfig::new(m, n, variant, 4, Modulation::Qpsk)
    }

    fn random_grid(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DdGrid {
        DMatrix::from_fn(m, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_taps(rng: &mut ChaCha8Rng, p: usize, max_delay: usize, max_doppler: isize) -> Vec<IntegerTap> {
        (0..p)
            .map(|_| IntegerTap {
                gain: C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                delay: rng.random_range(0..=max_delay),
                doppler: rng.random_range(-(max_doppler as i64)..=max_doppler as i64) as isize,
            })
            .collect()
    }

    fn rel(a: &DdGrid, b: &DdGrid) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn identity_channel_returns_input() {
        let c = cfg(8, 4, Variant::Rcp);
        let heff = EffectiveChannel::new(&PathChannel::identity(), &c).unwrap();
        let y = random_grid(&mut ChaCha8Rng::seed_from_u64(1), 8, 4);
        assert!(rel(&lmmse_dd(&y, &heff, 0.0).unwrap(), &y) < 1e-10);
    }

    #[test]
    fn noiseless_invertible_channel_is_undone() {
        let c = cfg(16, 8, Variant::Rcp);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // keep drawing until the kernel is comfortably invertible
        let heff = loop {
            let h = EffectiveChannel::from_integer_taps(&random_taps(&mut rng, 3, 3, 2), &c).unwrap();
            let smin = h.matrix().singular_values().min();
            if smin > 0.05 {
                break h;
            }
        };
        let x = random_grid(&mut rng, 16, 8);
        let y = apply_dd(&x, &heff).unwrap();
        assert!(rel(&lmmse_dd(&y, &heff, 0.0).unwrap(), &x) < 1e-8);
    }

    #[test]
    fn shrinks_to_zero_for_huge_noise() {
        let c = cfg(8, 4, Variant::Cp);
        let heff = EffectiveChannel::new(&PathChannel::single(C64::new(0.8, 0.3), 1.3, 0.4), &c).unwrap();
        let y = random_grid(&mut ChaCha8Rng::seed_from_u64(3), 8, 4);
        assert!(lmmse_dd(&y, &heff, 1e12).unwrap().norm() < 1e-10 * y.norm());
    }

    #[test]
    fn satisfies_normal_equations() {
        let c = cfg(8, 4, Variant::Rcp);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chan = PathChannel::new(vec![
            crate::channel::Path { gain: C64::new(0.7, 0.1), delay: 0.0, doppler: 0.3 },
            crate::channel::Path { gain: C64::new(-0.2, 0.5), delay: 1.6, doppler: -1.2 },
        ])
        .unwrap();
        let heff = EffectiveChannel::new(&chan, &c).unwrap();
        let y = random_grid(&mut rng, 8, 4);
        let s2 = 0.05;
        let x = nalgebra::DVector::from_vec(vec(&lmmse_dd(&y, &heff, s2).unwrap()));
        let g = heff.matrix();
        let rhs = g.adjoint() * nalgebra::DVector::from_vec(vec(&y));
        let lhs = g.adjoint() * (&g * &x) + &x * C64::new(s2, 0.0);
        assert!((lhs - &rhs).norm() / rhs.norm() < 1e-8);
    }

    #[test]
    fn lmmse_beats_zero_forcing() {
        let c = cfg(8, 4, Variant::Rcp);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s2: f64 = 0.1;
        let (mut mse_l, mut mse_z) = (0.0, 0.0);
        for trial in 0..50 {
            let taps = random_taps(&mut rng, 3, 2, 1);
            let heff = EffectiveChannel::from_integer_taps(&taps, &c).unwrap();
            let g = heff.matrix();
            let Some(lu) = Some(g.clone().lu()).filter(|lu| lu.is_invertible()) else { continue };
            let x = DMatrix::from_fn(8, 4, |_, _| {
                C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, if rng.random::<bool>() { 1.0 } else { -1.0 })
                    * std::f64::consts::FRAC_1_SQRT_2
            });
            let w = unit_noise(32, 100 + trial);
            let yv = &g * nalgebra::DVector::from_vec(vec(&x)) + nalgebra::DVector::from_vec(w) * C64::new(s2.sqrt(), 0.0);
            let y = vec_inv(yv.as_slice(), 8, 4).unwrap();
            let zf = lu.solve(&yv).unwrap();
            let zf = vec_inv(zf.as_slice(), 8, 4).unwrap();
            mse_l += (lmmse_dd(&y, &heff, s2).unwrap() - &x).norm_squared();
            mse_z += (zf - &x).norm_squared();
        }
        assert!(mse_l <= mse_z, "lmmse {mse_l} vs zf {mse_z}");
    }

    #[test]
    fn cg_agrees_with_dense_solve() {
        for variant in [Variant::Rcp, Variant::Cp] {
            let c = cfg(16, 8, variant);
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let taps = random_taps(&mut rng, 4, 3, 3);
            let heff = EffectiveChannel::from_integer_taps(&taps, &c).unwrap();
            let y = random_grid(&mut rng, 16, 8);
            for s2 in [1e-3, 0.1] {
                let dense = lmmse_dd(&y, &heff, s2).unwrap();
                let cg = lmmse_cg(&y, &heff, s2, 1e-14, 2000).unwrap();
                assert!(rel(&cg, &dense) < 1e-10, "{variant:?} {s2}");
            }
        }
    }

    fn spike_frame(c: &OtfsConfig, rows: usize) -> (PilotPattern, DdGrid) {
        let p = spike_mask(c, rows, 20.0).unwrap();
        let mut x = ComplexMatrix::zeros(c.m, c.n);
        x[p.spike_position().unwrap()] = C64::new(p.spike_amplitude().unwrap(), 0.0);
        (p, x)
    }

    #[test]
    fn single_integer_path_recovered() {
        for variant in [Variant::Rcp, Variant::Cp] {
            let c = cfg(16, 8, variant);
            let (p, x) = spike_frame(&c, 6);
            let h = C64::new(0.6, -0.7);
            for (ell, kappa) in [(0usize, 0isize), (2, 3), (1, -2), (2, 4)] {
                let y = pass_dd(&x, &PathChannel::single(h, ell as f64, kappa as f64), &c).unwrap();
                let est = estimate_csi_spike(&y, &p, &c, 3.0).unwrap();
                assert_eq!(est.taps.len(), 1, "{variant:?} {ell} {kappa}");
                let t = est.taps[0];
                assert_eq!((t.delay, t.doppler), (ell, kappa));
                assert!((t.gain - h).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn noise_level_estimate() {
        let c = cfg(32, 16, Variant::Rcp);
        let p = spike_mask(&c, 16, 20.0).unwrap();
        let sigma: f64 = 0.3;
        for trial in 0..100 {
            let w = unit_noise(32 * 16, trial);
            let y = vec_inv(&w, 32, 16).unwrap() * C64::new(sigma, 0.0);
            let est = estimate_csi_spike(&y, &p, &c, 3.0).unwrap();
            assert!((est.noise_var.sqrt() / sigma - 1.0).abs() < 0.2, "trial {trial}");
            assert!(est.taps.len() <= 3);
        }
    }

    #[test]
    fn infinite_threshold_falls_back_to_spike() {
        let c = cfg(16, 8, Variant::Rcp);
        let (p, x) = spike_frame(&c, 6);
        let y = pass_dd(&x, &PathChannel::single(C64::new(0.5, 0.5), 1.0, 1.0), &c).unwrap();
        let est = estimate_csi_spike(&y, &p, &c, f64::INFINITY).unwrap();
        assert_eq!(est.taps.len(), 1);
        assert_eq!((est.taps[0].delay, est.taps[0].doppler), (0, 0));
        let (ls, ks) = p.spike_position().unwrap();
        assert!((est.taps[0].gain - y[(ls, ks)] / 10.0).norm() < 1e-12);
        assert!(lmmse_estimated(&y, &est, &c).unwrap().iter().all(|v| v.re.is_finite()));
    }

    #[test]
    fn perfect_estimate_matches_true_kernel() {
        let c = cfg(16, 8, Variant::Rcp);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let taps = random_taps(&mut rng, 3, 3, 2);
        let heff = EffectiveChannel::from_integer_taps(&taps, &c).unwrap();
        let y = random_grid(&mut rng, 16, 8);
        let csi = CsiEstimate { taps, noise_var: 0.01 };
        let a = lmmse_estimated(&y, &csi, &c).unwrap();
        let b = lmmse_dd(&y, &heff, 0.01).unwrap();
        assert!((a - b).iter().all(|d| d.norm() < 1e-10));
    }

    #[test]
    fn fractional_channel_with_integer_estimate() {
        let c = cfg(16, 8, Variant::Rcp);
        let (p, mut x) = spike_frame(&c, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = Modulation::Qpsk.constellation();
        let data = p.data_positions();
        for &q in &data {
            x[q] = pts[rng.random_range(0..4)];
        }
        let chan = PathChannel::new(vec![
            crate::channel::Path { gain: C64::new(0.8, 0.0), delay: 0.0, doppler: 0.4 },
            crate::channel::Path { gain: C64::new(0.0, 0.5), delay: 1.0, doppler: -1.3 },
        ])
        .unwrap();
        let y = pass_dd(&x, &chan, &c).unwrap();
        let est = estimate_csi_spike(&y, &p, &c, 3.0).unwrap();
        let xh = lmmse_estimated(&y, &est, &c).unwrap();
        let q = crate::modem::quantize(&data.iter().map(|&d| xh[d]).collect::<Vec<_>>(), Modulation::Qpsk);
        let errs = q.iter().zip(&data).filter(|(a, &d)| (*a - x[d]).norm() > 1e-9).count();
        assert!(xh.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        assert!(errs < data.len(), "{errs} symbol errors");
    }

    #[test]
    fn wrong_pattern_kind_rejected() {
        let c = cfg(16, 8, Variant::Rcp);
        let p = crate::pilots::blockwise_mask(&c, 4).unwrap();
        assert!(estimate_csi_spike(&ComplexMatrix::zeros(16, 8), &p, &c, 3.0).is_err());
    }
}
