//! Two-dimensional reservoir-computing detector in the delay-Doppler domain.
//!
//! One network serves a whole subframe: the received grid is phase
//! compensated, windowed, circularly padded and scanned by a reservoir with
//! delay, Doppler and diagonal recurrences. Only the linear readout is
//! trained, by masked least squares on that subframe's pilots.

use log::debug;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::detection::Detection;
use crate::modem::{DdGrid, OtfsConfig, Variant};
use crate::numerics::{cis, ComplexMatrix, ComplexTensor3, C64};
use crate::pilots::{FramePlan, PilotPattern};
use crate::reservoir::{check_reservoir_params, ls_readout, recurrent_matrix, row, sparse_uniform, to_complex, Activation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForgetSearch {
    /// Doppler sweep at the smallest delay forget length, then a delay sweep.
    #[default]
    TwoStage,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rc2dParams {
    pub neurons: usize,
    pub window_delay: usize,
    pub window_doppler: usize,
    /// Candidate delay forget lengths.
    pub forget_delay: Vec<usize>,
    /// Candidate Doppler forget lengths.
    pub forget_doppler: Vec<usize>,
    /// Rows `l < phase_rows` are rotated by `e^{j2πk/N}` before detection.
    pub phase_rows: usize,
    #[serde(default = "default_radius")]
    pub spectral_radius: f64,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub search: ForgetSearch,
    #[serde(default)]
    pub seed: u64,
}

fn default_radius() -> f64 {
    0.9
}

fn default_sparsity() -> f64 {
    0.6
}

impl Rc2dParams {
    /// The subframe-scale setting (`N_n=6, M_w=4, N_w=14, l_c=7`).
    pub fn reference() -> Self {
        Self {
            neurons: 6,
            window_delay: 4,
            window_doppler: 14,
            forget_delay: vec![7, 8],
            forget_doppler: vec![13, 14],
            phase_rows: 7,
            spectral_radius: 0.9,
            sparsity: 0.6,
            activation: Activation::Tanh,
            search: ForgetSearch::TwoStage,
            seed: 0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.window_delay * self.window_doppler
    }

    pub fn max_forget_delay(&self) -> usize {
        self.forget_delay.iter().copied().max().unwrap_or(0)
    }

    pub fn max_forget_doppler(&self) -> usize {
        self.forget_doppler.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self, cfg: &OtfsConfig) -> Result<()> {
        check_reservoir_params(self.spectral_radius, self.sparsity)?;
        if self.neurons == 0 {
            return Err(Error::InvalidParameter("2D-RC needs at least one neuron".into()));
        }
        if self.window_delay == 0 || self.window_delay > cfg.m || self.window_doppler == 0 || self.window_doppler > cfg.n {
            return Err(Error::InvalidParameter(format!(
                "window {}x{} must fit in the {}x{} grid",
                self.window_delay, self.window_doppler, cfg.m, cfg.n
            )));
        }
        if self.forget_delay.is_empty() || self.forget_doppler.is_empty() {
            return Err(Error::InvalidParameter("forget-length sets must be non-empty".into()));
        }
        if self.max_forget_delay() > cfg.m || self.max_forget_doppler() > cfg.n {
            return Err(Error::InvalidParameter(format!(
                "forget lengths must not exceed the grid ({}, {})",
                cfg.m, cfg.n
            )));
        }
        if self.phase_rows > cfg.m {
            return Err(Error::InvalidParameter(format!("phase_rows must be at most M = {}", cfg.m)));
        }
        Ok(())
    }
}

/// Rotate rows `l < l_c` by `e^{j2πk/N}` (single-prefix variant only).
pub fn phase_compensate(y: &DdGrid, l_c: usize, variant: Variant) -> DdGrid {
    let mut out = y.clone();
    if variant == Variant::Cp {
        return out;
    }
    let n = y.ncols();
    for k in 0..n {
        let rot = cis(2.0 * std::f64::consts::PI * k as f64 / n as f64);
        for l in 0..l_c.min(y.nrows()) {
            out[(l, k)] *= rot;
        }
    }
    out
}

/// Sliding-window fibers: entry `j·N_w + i` of fiber `(l, k)` is
/// `Y[l - j, k - i]`, zero outside the grid.
pub fn window_2d(y: &DdGrid, mw: usize, nw: usize) -> ComplexTensor3 {
    let (m, n) = y.shape();
    let mut t = ComplexTensor3::zeros(mw * nw, m, n);
    for k in 0..n {
        for l in 0..m {
            let f = t.fiber_mut(l, k);
            for j in 0..mw.min(l + 1) {
                for i in 0..nw.min(k + 1) {
                    f[j * nw + i] = y[(l - j, k - i)];
                }
            }
        }
    }
    t
}

/// Append the first `mf` rows and `nf` columns at the end (corner included).
pub fn circular_pad_2d(t: &ComplexTensor3, mf: usize, nf: usize) -> Result<ComplexTensor3> {
    let (d, m, n) = t.dims();
    if mf > m || nf > n {
        return Err(Error::InvalidParameter(format!(
            "padding ({mf}, {nf}) exceeds the grid ({m}, {n})"
        )));
    }
    let mut out = ComplexTensor3::zeros(d, m + mf, n + nf);
    for q in 0..n + nf {
        for p in 0..m + mf {
            out.fiber_mut(p, q).copy_from_slice(t.fiber(p % m, q % n));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForgetTrial {
    pub delay: usize,
    pub doppler: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Readout {
    /// `1 × (N_i + N_n)`.
    pub w_o: ComplexMatrix,
    pub forget_delay: usize,
    pub forget_doppler: usize,
    pub residual: f64,
    /// `residual / ‖x_train‖²`.
    pub train_nmse: f64,
    pub trials: Vec<ForgetTrial>,
}

/// Fixed random weights plus, after training, the readout.
#[derive(Debug, Clone)]
pub struct Rc2dModel {
    pub params: Rc2dParams,
    pub w_in: ComplexMatrix,
    pub w_delay: ComplexMatrix,
    pub w_doppler: ComplexMatrix,
    pub w_diag: ComplexMatrix,
    pub readout: Option<Readout>,
}

impl Rc2dModel {
    /// Draw the fixed weights from `params.seed`.
    pub fn new(params: &Rc2dParams) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let nn = params.neurons;
        let w_in = sparse_uniform(&mut rng, nn, params.inputs(), params.sparsity);
        let w_delay = recurrent_matrix(&mut rng, nn, params.sparsity, params.spectral_radius)?;
        let w_doppler = recurrent_matrix(&mut rng, nn, params.sparsity, params.spectral_radius)?;
        let w_diag = recurrent_matrix(&mut rng, nn, params.sparsity, params.spectral_radius)?;
        Ok(Self {
            params: params.clone(),
            w_in: to_complex(&w_in),
            w_delay: to_complex(&w_delay),
            w_doppler: to_complex(&w_doppler),
            w_diag: to_complex(&w_diag),
            readout: None,
        })
    }

    /// Models for increasing neuron counts whose states are nested: the
    /// recurrent matrices are block lower triangular, so the first `sizes[i]`
    /// neurons of every larger model never see the later ones and evolve
    /// exactly as the smaller model. Diagonal blocks are rescaled to the
    /// spectral radius, which is then the radius of every member.
    pub fn nested_family(params: &Rc2dParams, sizes: &[usize]) -> Result<Vec<Self>> {
        if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("nested sizes must be positive and strictly increasing".into()));
        }
        let big = *sizes.last().expect("non-empty");
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let w_in = sparse_uniform(&mut rng, big, params.inputs(), params.sparsity);
        let mut draw = || -> Result<DMatrix<f64>> {
            let mut w = DMatrix::zeros(big, big);
            let mut start = 0;
            for &end in sizes {
                let b = end - start;
                let diag = recurrent_matrix(&mut rng, b, params.sparsity, params.spectral_radius)?;
                w.view_mut((start, start), (b, b)).copy_from(&diag);
                if start > 0 {
                    let off = sparse_uniform(&mut rng, b, start, params.sparsity) * (params.spectral_radius / (big as f64).sqrt());
                    w.view_mut((start, 0), (b, start)).copy_from(&off);
                }
                start = end;
            }
            Ok(w)
        };
        let (w_delay, w_doppler, w_diag) = (draw()?, draw()?, draw()?);
        sizes
            .iter()
            .map(|&nn| {
                let p = Rc2dParams { neurons: nn, ..params.clone() };
                Self::from_weights(
                    &p,
                    to_complex(&w_in.rows(0, nn).into_owned()),
                    to_complex(&w_delay.view((0, 0), (nn, nn)).into_owned()),
                    to_complex(&w_doppler.view((0, 0), (nn, nn)).into_owned()),
                    to_complex(&w_diag.view((0, 0), (nn, nn)).into_owned()),
                )
            })
            .collect()
    }

    /// Model with caller-supplied fixed weights.
    pub fn from_weights(
        params: &Rc2dParams,
        w_in: ComplexMatrix,
        w_delay: ComplexMatrix,
        w_doppler: ComplexMatrix,
        w_diag: ComplexMatrix,
    ) -> Result<Self> {
        let nn = params.neurons;
        for (name, w, cols) in [
            ("w_in", &w_in, params.inputs()),
            ("w_delay", &w_delay, nn),
            ("w_doppler", &w_doppler, nn),
            ("w_diag", &w_diag, nn),
        ] {
            if w.shape() != (nn, cols) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{name} {nn}x{cols}"),
                    got: format!("{}x{}", w.nrows(), w.ncols()),
                });
            }
        }
        Ok(Self { params: params.clone(), w_in, w_delay, w_doppler, w_diag, readout: None })
    }

    pub fn state_dim(&self) -> usize {
        self.params.neurons + self.params.inputs()
    }

    /// Extended states `[ỹ; u]` over the padded grid, scanning `n` outer, `m` inner.
    pub fn states(&self, padded: &ComplexTensor3) -> ComplexTensor3 {
        let (ni, mp, np) = padded.dims();
        debug_assert_eq!(ni, self.params.inputs());
        let nn = self.params.neurons;
        let act = self.params.activation;
        let mut ext = ComplexTensor3::zeros(ni + nn, mp, np);
        let mut acc = vec![C64::new(0.0, 0.0); nn];
        for q in 0..np {
            for p in 0..mp {
                let input = padded.fiber(p, q);
                for (r, a) in acc.iter_mut().enumerate() {
                    let mut s = C64::new(0.0, 0.0);
                    for (c, x) in input.iter().enumerate() {
                        s += self.w_in[(r, c)] * x;
                    }
                    *a = s;
                }
                let mut add = |w: &ComplexMatrix, state: &[C64]| {
                    for (r, a) in acc.iter_mut().enumerate() {
                        for (c, u) in state.iter().enumerate() {
                            *a += w[(r, c)] * u;
                        }
                    }
                };
                if p > 0 {
                    add(&self.w_delay, &ext.fiber(p - 1, q)[ni..]);
                }
                if q > 0 {
                    add(&self.w_doppler, &ext.fiber(p, q - 1)[ni..]);
                }
                if p > 0 && q > 0 {
                    add(&self.w_diag, &ext.fiber(p - 1, q - 1)[ni..]);
                }
                let f = ext.fiber_mut(p, q);
                f[..ni].copy_from_slice(input);
                for (dst, a) in f[ni..].iter_mut().zip(&acc) {
                    *dst = act.apply(*a);
                }
            }
        }
        ext
    }

    /// Full front end: compensation, windowing, padding and the recursion.
    pub fn forward(&self, y: &DdGrid, variant: Variant) -> Result<ComplexTensor3> {
        let p = &self.params;
        let yc = phase_compensate(y, p.phase_rows, variant);
        let w = window_2d(&yc, p.window_delay, p.window_doppler);
        let padded = circular_pad_2d(&w, p.max_forget_delay(), p.max_forget_doppler())?;
        Ok(self.states(&padded))
    }

    fn regressors(ext: &ComplexTensor3, positions: &[(usize, usize)], mf: usize, nf: usize) -> ComplexMatrix {
        let d = ext.dims().0;
        let mut u = ComplexMatrix::zeros(d, positions.len());
        for (c, &(l, k)) in positions.iter().enumerate() {
            u.column_mut(c).copy_from_slice(ext.fiber(mf + l, nf + k));
        }
        u
    }

    /// Masked least squares over the forget-length candidates.
    pub fn train(&mut self, ext: &ComplexTensor3, x_train: &DdGrid, pattern: &PilotPattern) -> Result<&Readout> {
        let positions = pattern.pilot_positions();
        if positions.is_empty() {
            return Err(Error::Training("2D-RC training needs at least one pilot position".into()));
        }
        if positions.len() < self.state_dim() {
            debug!(
                "2D-RC readout is underdetermined: {} pilots for {} weights",
                positions.len(),
                self.state_dim()
            );
        }
        let targets: Vec<C64> = positions.iter().map(|&p| x_train[p]).collect();
        let t = row(&targets);
        let energy = t.norm_squared();
        let mut trials = Vec::new();
        let mut best: Option<(ComplexMatrix, usize, usize, f64)> = None;
        let mut visit = |mf: usize, nf: usize, trials: &mut Vec<ForgetTrial>| -> Result<f64> {
            let u = Self::regressors(ext, &positions, mf, nf);
            let (w, res) = ls_readout(&u, &t)?;
            trials.push(ForgetTrial { delay: mf, doppler: nf, residual: res });
            if best.as_ref().is_none_or(|b| res < b.3) {
                best = Some((w, mf, nf, res));
            }
            Ok(res)
        };
        let lm = &self.params.forget_delay;
        let ln = &self.params.forget_doppler;
        match self.params.search {
            ForgetSearch::Exhaustive => {
                for &nf in ln {
                    for &mf in lm {
                        visit(mf, nf, &mut trials)?;
                    }
                }
            }
            ForgetSearch::TwoStage => {
                let anchor = *lm.iter().min().expect("validated non-empty");
                let mut best_nf = ln[0];
                let mut best_res = f64::INFINITY;
                for &nf in ln {
                    let r = visit(anchor, nf, &mut trials)?;
                    if r < best_res {
                        best_res = r;
                        best_nf = nf;
                    }
                }
                for &mf in lm.iter().filter(|&&mf| mf != anchor) {
                    visit(mf, best_nf, &mut trials)?;
                }
            }
        }
        let (w_o, mf, nf, residual) = best.expect("at least one candidate");
        self.readout = Some(Readout {
            w_o,
            forget_delay: mf,
            forget_doppler: nf,
            residual,
            train_nmse: if energy > 0.0 { residual / energy } else { 0.0 },
            trials,
        });
        Ok(self.readout.as_ref().expect("just set"))
    }

    /// Unquantized readout over the whole grid.
    pub fn predict(&self, ext: &ComplexTensor3, m: usize, n: usize) -> Result<DdGrid> {
        let r = self
            .readout
            .as_ref()
            .ok_or_else(|| Error::Training("2D-RC model has not been trained".into()))?;
        let mut x = ComplexMatrix::zeros(m, n);
        for k in 0..n {
            for l in 0..m {
                let f = ext.fiber(r.forget_delay + l, r.forget_doppler + k);
                x[(l, k)] = f.iter().zip(r.w_o.iter()).map(|(a, w)| a * w).sum();
            }
        }
        Ok(x)
    }
}

/// Train on this frame's pilots, then detect its data.
pub fn rc2d_detect(y: &DdGrid, plan: &FramePlan, params: &Rc2dParams, cfg: &OtfsConfig) -> Result<(Detection, Rc2dModel)> {
    params.validate(cfg)?;
    let mut model = Rc2dModel::new(params)?;
    let ext = model.forward(y, cfg.variant)?;
    let train_nmse = model.train(&ext, &plan.x_train, &plan.pattern)?.train_nmse;
    let soft = model.predict(&ext, cfg.m, cfg.n)?;
    Ok((Detection::from_soft(soft, plan, cfg, Some(train_nmse)), model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::Modulation;
    use crate::pilots::{assemble_frame, blockwise_mask};
    use rand::Rng;

    fn random_grid(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DdGrid {
        DMatrix::from_fn(m, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn small_params() -> Rc2dParams {
        Rc2dParams {
            neurons: 4,
            window_delay: 2,
            window_doppler: 3,
            forget_delay: vec![0, 1, 2],
            forget_doppler: vec![0, 1],
            phase_rows: 0,
            ..Rc2dParams::reference()
        }
    }

    #[test]
    fn phase_compensation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_grid(&mut rng, 6, 4);
        assert_eq!(phase_compensate(&y, 0, Variant::Rcp), y);
        assert_eq!(phase_compensate(&y, 6, Variant::Cp), y);
        let all = phase_compensate(&y, 6, Variant::Rcp);
        for k in 0..4 {
            for l in 0..6 {
                let want = y[(l, k)] * cis(2.0 * std::f64::consts::PI * k as f64 / 4.0);
                assert!((all[(l, k)] - want).norm() < 1e-15);
                assert!((all[(l, k)].norm() - y[(l, k)].norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn window_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random_grid(&mut rng, 5, 4);
        let w1 = window_2d(&y, 1, 1);
        for k in 0..4 {
            for l in 0..5 {
                assert_eq!(w1.fiber(l, k), &[y[(l, k)]]);
            }
        }
        let w2 = window_2d(&y, 2, 2);
        let f = w2.fiber(0, 0);
        assert_eq!(f[0], y[(0, 0)]);
        assert!(f[1..].iter().all(|v| v.norm() == 0.0));
        // interior fiber holds each window entry exactly once
        let f = window_2d(&y, 3, 2);
        let fib = f.fiber(3, 2);
        let mut want: Vec<C64> = (1..=3).flat_map(|l| (1..=2).map(move |k| (l, k))).map(|p| y[p]).collect();
        let mut got = fib.to_vec();
        let key = |c: &C64| (c.re, c.im);
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        assert_eq!(got, want);
        assert_eq!(fib[1 * 2 + 1], y[(2, 1)]);
    }

    #[test]
    fn padding_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = window_2d(&random_grid(&mut rng, 5, 4), 2, 2);
        assert_eq!(circular_pad_2d(&t, 0, 0).unwrap(), t);
        let p = circular_pad_2d(&t, 2, 3).unwrap();
        assert_eq!(p.dims(), (4, 7, 7));
        for i in 0..2 {
            for q in 0..4 {
                assert_eq!(p.fiber(5 + i, q), t.fiber(i, q));
            }
            for j in 0..3 {
                assert_eq!(p.fiber(5 + i, 4 + j), t.fiber(i, j));
            }
        }
        assert!(circular_pad_2d(&t, 6, 0).is_err());
    }

    #[test]
    fn memoryless_degenerate_states() {
        let params = Rc2dParams { activation: Activation::Identity, ..small_params() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w_in = random_grid(&mut rng, 4, 6);
        let zero = ComplexMatrix::zeros(4, 4);
        let model = Rc2dModel::from_weights(&params, w_in.clone(), zero.clone(), zero.clone(), zero).unwrap();
        let t = window_2d(&random_grid(&mut rng, 5, 4), 2, 3);
        let ext = model.states(&t);
        for q in 0..4 {
            for p in 0..5 {
                let want = &w_in * nalgebra::DVector::from_column_slice(t.fiber(p, q));
                let got = &ext.fiber(p, q)[6..];
                for (a, b) in got.iter().zip(want.iter()) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_input_zero_states() {
        let model = Rc2dModel::new(&small_params()).unwrap();
        let ext = model.states(&ComplexTensor3::zeros(6, 5, 4));
        assert!(ext.as_slice().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn causality_cone() {
        let model = Rc2dModel::new(&small_params()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = window_2d(&random_grid(&mut rng, 8, 6), 2, 3);
        let ext0 = model.states(&base);
        for _ in 0..20 {
            let (m0, n0) = (rng.random_range(0..8), rng.random_range(0..6));
            let mut pert = base.clone();
            pert.fiber_mut(m0, n0)[0] += C64::new(0.5, -0.3);
            let ext1 = model.states(&pert);
            for q in 0..6 {
                for p in 0..8 {
                    if p < m0 || q < n0 {
                        assert_eq!(ext0.fiber(p, q), ext1.fiber(p, q));
                    }
                }
            }
            assert_ne!(ext0.fiber(m0, n0), ext1.fiber(m0, n0));
        }
    }

    #[test]
    fn scan_order_invariance() {
        // anti-diagonal wavefront order gives the same states as the raster scan
        let model = Rc2dModel::new(&small_params()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = window_2d(&random_grid(&mut rng, 7, 5), 2, 3);
        let raster = model.states(&t);
        let (ni, nn) = (6, 4);
        let mut wave = ComplexTensor3::zeros(ni + nn, 7, 5);
        for s in 0usize..(7 + 5 - 1) {
            for p in 0..7usize {
                let Some(q) = s.checked_sub(p) else { continue };
                if q >= 5 {
                    continue;
                }
                let mut a = &model.w_in * nalgebra::DVector::from_column_slice(t.fiber(p, q));
                let st = |w: &ComplexTensor3, p: usize, q: usize| nalgebra::DVector::from_column_slice(&w.fiber(p, q)[ni..]);
                if p > 0 {
                    a += &model.w_delay * st(&wave, p - 1, q);
                }
                if q > 0 {
                    a += &model.w_doppler * st(&wave, p, q - 1);
                }
                if p > 0 && q > 0 {
                    a += &model.w_diag * st(&wave, p - 1, q - 1);
                }
                let f = wave.fiber_mut(p, q);
                f[..ni].copy_from_slice(t.fiber(p, q));
                for (d, v) in f[ni..].iter_mut().zip(a.iter()) {
                    *d = Activation::Tanh.apply(*v);
                }
            }
        }
        for (a, b) in raster.as_slice().iter().zip(wave.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn planted_setup(seed: u64) -> (Rc2dModel, ComplexTensor3, PilotPattern, ComplexMatrix) {
        let params = Rc2dParams { forget_delay: vec![1], forget_doppler: vec![1], ..small_params() };
        let cfg = OtfsConfig::new(16, 8, Variant::Rcp, 2, Modulation::Qpsk);
        let model = Rc2dModel::new(&params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_grid(&mut rng, 16, 8);
        let ext = model.forward(&y, cfg.variant).unwrap();
        let pattern = blockwise_mask(&cfg, 8).unwrap();
        let w_star = random_grid(&mut rng, 1, model.state_dim());
        (model, ext, pattern, w_star)
    }

    #[test]
    fn planted_readout_recovered() {
        let (mut model, ext, pattern, w_star) = planted_setup(7);
        let mut full = ComplexMatrix::zeros(16, 8);
        for k in 0..8 {
            for l in 0..16 {
                let f = ext.fiber(1 + l, 1 + k);
                full[(l, k)] = f.iter().zip(w_star.iter()).map(|(a, w)| a * w).sum();
            }
        }
        let x_train = full.component_mul(&pattern.mask().map(|v| C64::new(v, 0.0)));
        let r = model.train(&ext, &x_train, &pattern).unwrap();
        assert!(r.residual < 1e-8, "{}", r.residual);
        assert!((&r.w_o - &w_star).norm() < 1e-6);
    }

    #[test]
    fn masked_ls_is_optimal() {
        let (mut model, ext, pattern, _) = planted_setup(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x_train = random_grid(&mut rng, 16, 8).component_mul(&pattern.mask().map(|v| C64::new(v, 0.0)));
        let r = model.train(&ext, &x_train, &pattern).unwrap().clone();
        let positions = pattern.pilot_positions();
        let u = Rc2dModel::regressors(&ext, &positions, 1, 1);
        let t = row(&positions.iter().map(|&p| x_train[p]).collect::<Vec<_>>());
        for _ in 0..100 {
            let d = random_grid(&mut rng, 1, model.state_dim()) * C64::new(1e-2, 0.0);
            assert!((&t - (&r.w_o + d) * &u).norm_squared() >= r.residual);
        }
    }

    #[test]
    fn selected_forget_pair_is_best_visited() {
        let cfg = OtfsConfig::new(16, 8, Variant::Rcp, 2, Modulation::Qpsk);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for search in [ForgetSearch::TwoStage, ForgetSearch::Exhaustive] {
            let mut model = Rc2dModel::new(&Rc2dParams { search, ..small_params() }).unwrap();
            let y = random_grid(&mut rng, 16, 8);
            let ext = model.forward(&y, cfg.variant).unwrap();
            let pattern = blockwise_mask(&cfg, 6).unwrap();
            let x_train = random_grid(&mut rng, 16, 8).component_mul(&pattern.mask().map(|v| C64::new(v, 0.0)));
            let r = model.train(&ext, &x_train, &pattern).unwrap();
            let min = r.trials.iter().map(|t| t.residual).fold(f64::INFINITY, f64::min);
            assert_eq!(r.residual, min);
            let expect = match search {
                ForgetSearch::TwoStage => 2 + 2,
                ForgetSearch::Exhaustive => 6,
            };
            assert_eq!(r.trials.len(), expect);
            if search == ForgetSearch::TwoStage {
                assert!(r.trials[..2].iter().all(|t| t.delay == 0));
            }
        }
    }

    #[test]
    fn singleton_sets_do_not_search() {
        let (mut model, ext, pattern, _) = planted_setup(11);
        let r = model.train(&ext, &ComplexMatrix::zeros(16, 8), &pattern).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!((r.forget_delay, r.forget_doppler), (1, 1));
    }

    #[test]
    fn reference_config_validates() {
        let cfg = OtfsConfig::new(1024, 14, Variant::Rcp, 16, Modulation::Qpsk);
        let p = Rc2dParams::reference();
        p.validate(&cfg).unwrap();
        assert_eq!(p.inputs(), 56);
        assert_eq!((p.spectral_radius, p.sparsity), (0.9, 0.6));
        let bad = Rc2dParams { spectral_radius: 1.0, ..p };
        assert!(bad.validate(&cfg).is_err());
    }

    #[test]
    fn untrained_model_errors() {
        let model = Rc2dModel::new(&small_params()).unwrap();
        let ext = model.states(&ComplexTensor3::zeros(6, 5, 4));
        assert!(model.predict(&ext, 4, 3).is_err());
    }

    #[test]
    fn identity_channel_noiseless_detection() {
        let cfg = OtfsConfig::new(16, 8, Variant::Rcp, 2, Modulation::Qpsk);
        let pattern = blockwise_mask(&cfg, 4).unwrap();
        let params = Rc2dParams {
            neurons: 4,
            window_delay: 2,
            window_doppler: 2,
            forget_delay: vec![0],
            forget_doppler: vec![0],
            phase_rows: 0,
            ..Rc2dParams::reference()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let bits: Vec<u8> = (0..pattern.data_count() * 2).map(|_| rng.random_range(0..2)).collect();
        let plan = assemble_frame(&bits, &pattern, &cfg, 3).unwrap();
        let (det, model) = rc2d_detect(&plan.x, &plan, &params, &cfg).unwrap();
        assert_eq!(det.bits, bits);
        let (det2, _) = rc2d_detect(&plan.x, &plan, &params, &cfg).unwrap();
        assert_eq!(det.soft, det2.soft);
        assert!(model.readout.is_some());
    }

    #[test]
    fn nested_family_shares_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let family = Rc2dModel::nested_family(&small_params(), &[2, 3, 6]).unwrap();
        let y = random_grid(&mut rng, 8, 6);
        let ext: Vec<_> = family.iter().map(|m| m.forward(&y, Variant::Rcp).unwrap()).collect();
        let (_, mp, np) = ext[2].dims();
        for q in 0..np {
            for p in 0..mp {
                for small in &ext[..2] {
                    let d = small.dims().0;
                    assert_eq!(small.fiber(p, q), &ext[2].fiber(p, q)[..d]);
                }
            }
        }
        // block-triangular, so the spectrum is the union of the diagonal blocks'
        for w in [&family[2].w_delay, &family[2].w_doppler, &family[2].w_diag] {
            let re = w.map(|v| v.re);
            let mut worst = 0.0f64;
            for (a, b) in [(0, 2), (2, 3), (3, 6)] {
                let blk = re.view((a, a), (b - a, b - a)).into_owned();
                worst = worst.max(crate::reservoir::spectral_radius(&blk));
                assert!(crate::reservoir::spectral_radius(&blk) <= 0.9 + 1e-9);
            }
            assert!((worst - 0.9).abs() < 1e-9);
        }
        assert!(Rc2dModel::nested_family(&small_params(), &[3, 3]).is_err());
    }
}
