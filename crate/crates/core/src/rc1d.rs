//! Time-domain 1D reservoir-computing baseline.
//!
//! The CP-free received stream is cut into `V` contiguous segments and each
//! segment gets its own reservoir. Targets are the transmitted time samples
//! that the pilot block pins down: with `S = X F_Nᴴ`, a delay row of `X` that is
//! entirely pilot fixes the same row of `S`, i.e. samples `t = nM + l`.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::modem::{core_to_grid, OtfsConfig};
use crate::numerics::{dft_matrix, ComplexMatrix, C64};
use crate::pilots::FramePlan;
use crate::reservoir::{check_reservoir_params, ls_readout, recurrent_matrix, sparse_uniform, to_complex, Activation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rc1dParams {
    pub neurons: usize,
    pub window: usize,
    /// Candidate forget lengths.
    pub forget: Vec<usize>,
    /// Number of reservoirs `V`; must divide `MN`.
    pub reservoirs: usize,
    #[serde(default = "default_radius")]
    pub spectral_radius: f64,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub seed: u64,
}

fn default_radius() -> f64 {
    0.9
}

fn default_sparsity() -> f64 {
    0.6
}

impl Rc1dParams {
    /// `N_n=12, N_w=10, V=7`, forget lengths 0 to 22 in steps of 2.
    pub fn reference() -> Self {
        Self {
            neurons: 12,
            window: 10,
            forget: (0..=22).step_by(2).collect(),
            reservoirs: 7,
            spectral_radius: 0.9,
            sparsity: 0.6,
            activation: Activation::Tanh,
            seed: 0,
        }
    }

    pub fn max_forget(&self) -> usize {
        self.forget.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self, cfg: &OtfsConfig) -> Result<()> {
        check_reservoir_params(self.spectral_radius, self.sparsity)?;
        if self.neurons == 0 || self.window == 0 {
            return Err(Error::InvalidParameter("1D-RC needs at least one neuron and a window of 1".into()));
        }
        if self.forget.is_empty() {
            return Err(Error::InvalidParameter("forget-length set must be non-empty".into()));
        }
        let mn = cfg.frame_size();
        if self.reservoirs == 0 || !mn.is_multiple_of(self.reservoirs) {
            return Err(Error::InvalidParameter(format!(
                "number of reservoirs {} must divide MN = {mn}",
                self.reservoirs
            )));
        }
        Ok(())
    }
}

/// Column `t` stacks `y(t), y(t-1), …, y(t-N_w+1)`, zero before the start.
pub fn window_1d(y: &ComplexMatrix, nw: usize) -> ComplexMatrix {
    let (ny, lt) = y.shape();
    let mut out = ComplexMatrix::zeros(ny * nw, lt);
    for t in 0..lt {
        for d in 0..nw.min(t + 1) {
            for r in 0..ny {
                out[(d * ny + r, t)] = y[(r, t - d)];
            }
        }
    }
    out
}

/// Append `lf` zero columns.
pub fn pad_zeros(yw: &ComplexMatrix, lf: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(yw.nrows(), yw.ncols() + lf);
    out.columns_mut(0, yw.ncols()).copy_from(yw);
    out
}

#[derive(Debug, Clone)]
pub struct Rc1dReadout {
    /// `N_o × (N_i + N_n)`.
    pub w_o: ComplexMatrix,
    pub forget: usize,
    pub residual: f64,
    pub target_energy: f64,
}

#[derive(Debug, Clone)]
pub struct Rc1dModel {
    pub activation: Activation,
    pub w_in: ComplexMatrix,
    pub w_res: ComplexMatrix,
    pub readout: Option<Rc1dReadout>,
}

impl Rc1dModel {
    pub fn new(params: &Rc1dParams, inputs: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_in = sparse_uniform(&mut rng, params.neurons, inputs, params.sparsity);
        let w_res = recurrent_matrix(&mut rng, params.neurons, params.sparsity, params.spectral_radius)?;
        Ok(Self {
            activation: params.activation,
            w_in: to_complex(&w_in),
            w_res: to_complex(&w_res),
            readout: None,
        })
    }

    pub fn from_weights(w_in: ComplexMatrix, w_res: ComplexMatrix, activation: Activation) -> Result<Self> {
        if w_res.nrows() != w_in.nrows() || !w_res.is_square() {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} reservoir", w_in.nrows()),
                got: format!("{}x{}", w_res.nrows(), w_res.ncols()),
            });
        }
        Ok(Self { activation, w_in, w_res, readout: None })
    }

    pub fn neurons(&self) -> usize {
        self.w_in.nrows()
    }

    /// Extended states `[ỹ(n); u(n)]` from a zero initial state.
    pub fn states(&self, inputs: &ComplexMatrix) -> ComplexMatrix {
        self.states_from(inputs, &vec![C64::new(0.0, 0.0); self.neurons()])
    }

    pub fn states_from(&self, inputs: &ComplexMatrix, u0: &[C64]) -> ComplexMatrix {
        let (ni, len) = inputs.shape();
        let nn = self.neurons();
        let mut ext = ComplexMatrix::zeros(ni + nn, len);
        let mut u = nalgebra::DVector::from_column_slice(u0);
        for t in 0..len {
            let pre = &self.w_in * inputs.column(t) + &self.w_res * &u;
            u = pre.map(|v| self.activation.apply(v));
            ext.view_mut((0, t), (ni, 1)).copy_from(&inputs.column(t));
            ext.view_mut((ni, t), (nn, 1)).copy_from(&u);
        }
        ext
    }

    /// Least squares over the forget candidates; `mask[t]` marks known targets.
    pub fn train(&mut self, ext: &ComplexMatrix, targets: &ComplexMatrix, mask: &[bool], forget: &[usize]) -> Result<&Rc1dReadout> {
        let lt = targets.ncols();
        if mask.len() != lt {
            return Err(Error::ShapeMismatch { expected: format!("mask of {lt}"), got: mask.len().to_string() });
        }
        let known: Vec<usize> = (0..lt).filter(|&t| mask[t]).collect();
        if known.is_empty() {
            return Err(Error::Training("1D-RC training needs at least one known target".into()));
        }
        let t = targets.select_columns(&known);
        let energy = t.norm_squared();
        let mut best: Option<Rc1dReadout> = None;
        for &lf in forget {
            if lf + lt > ext.ncols() {
                return Err(Error::InvalidParameter(format!("forget length {lf} exceeds the padding")));
            }
            let cols: Vec<usize> = known.iter().map(|&c| c + lf).collect();
            let u = ext.select_columns(&cols);
            let (w_o, residual) = ls_readout(&u, &t)?;
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(Rc1dReadout { w_o, forget: lf, residual, target_energy: energy });
            }
        }
        self.readout = best;
        Ok(self.readout.as_ref().expect("forget set is non-empty"))
    }

    pub fn predict(&self, ext: &ComplexMatrix, len: usize) -> Result<ComplexMatrix> {
        let r = self
            .readout
            .as_ref()
            .ok_or_else(|| Error::Training("1D-RC model has not been trained".into()))?;
        Ok(&r.w_o * ext.columns(r.forget, len))
    }
}

/// Per-reservoir seed.
fn reservoir_seed(seed: u64, v: usize) -> u64 {
    seed.wrapping_add((v as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Detect one subframe from its CP-free received samples.
pub fn rc1d_detect(core: &[C64], plan: &FramePlan, params: &Rc1dParams, cfg: &OtfsConfig) -> Result<Detection> {
    params.validate(cfg)?;
    let (m, mn) = (cfg.m, cfg.frame_size());
    if core.len() != mn {
        return Err(Error::StreamLength { expected: mn, got: core.len() });
    }
    let s_train = &plan.x_train * dft_matrix(cfg.n)?.adjoint();
    let rows = plan.pattern.pilot_rows();
    let seg = mn / params.reservoirs;
    let lf = params.max_forget();
    let mut s_hat = vec![C64::new(0.0, 0.0); mn];
    let (mut residual, mut energy) = (0.0, 0.0);
    for v in 0..params.reservoirs {
        let range = v * seg..(v + 1) * seg;
        let mask: Vec<bool> = range.clone().map(|t| rows.contains(&(t % m))).collect();
        let known = mask.iter().filter(|&&b| b).count();
        if known == 0 {
            return Err(Error::Training(format!(
                "reservoir {v} has no pilot samples in its segment; use a larger pilot block or fewer reservoirs"
            )));
        }
        let mut model = Rc1dModel::new(params, params.window, reservoir_seed(params.seed, v))?;
        if known < params.window + params.neurons {
            debug!("1D-RC reservoir {v} is underdetermined: {known} targets for {} weights", params.window + params.neurons);
        }
        let y = ComplexMatrix::from_row_slice(1, seg, &core[range.clone()]);
        let ext = model.states(&pad_zeros(&window_1d(&y, params.window), lf));
        let targets = ComplexMatrix::from_row_iterator(1, seg, range.clone().map(|t| s_train.as_slice()[t]));
        let r = model.train(&ext, &targets, &mask, &params.forget)?;
        residual += r.residual;
        energy += r.target_energy;
        let pred = model.predict(&ext, seg)?;
        s_hat[range].copy_from_slice(pred.as_slice());
    }
    let soft = core_to_grid(&s_hat, cfg)?;
    let nmse = if energy > 0.0 { residual / energy } else { 0.0 };
    Ok(Detection::from_soft(soft, plan, cfg, Some(nmse)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{modulate, remove_cyclic_prefix, Modulation, Variant};
    use crate::pilots::{assemble_frame, blockwise_mask};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_complex(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> ComplexMatrix {
        DMatrix::from_fn(r, cols, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn window_examples() {
        let y = ComplexMatrix::from_row_slice(1, 3, &[c(1.0), c(2.0), c(3.0)]);
        assert_eq!(window_1d(&y, 1), y);
        let w = window_1d(&y, 2);
        let want = ComplexMatrix::from_row_slice(2, 3, &[c(1.0), c(2.0), c(3.0), c(0.0), c(1.0), c(2.0)]);
        assert_eq!(w, want);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_complex(&mut rng, 2, 9);
        assert_eq!(window_1d(&y, 4).rows(0, 2), y.rows(0, 2));
    }

    #[test]
    fn padding_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random_complex(&mut rng, 3, 5);
        assert_eq!(pad_zeros(&y, 0), y);
        let p = pad_zeros(&y, 4);
        assert_eq!(p.shape(), (3, 9));
        assert!(p.columns(5, 4).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn degenerate_recursion_and_zero_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w_in = random_complex(&mut rng, 4, 3);
        let model = Rc1dModel::from_weights(w_in.clone(), ComplexMatrix::zeros(4, 4), Activation::Identity).unwrap();
        let y = random_complex(&mut rng, 3, 7);
        let ext = model.states(&y);
        assert!((ext.rows(3, 4) - &w_in * &y).norm() < 1e-12);
        assert_eq!(ext.rows(0, 3), y);
        let tanh = Rc1dModel::new(&Rc1dParams::reference(), 3, 0).unwrap();
        assert!(tanh.states(&ComplexMatrix::zeros(3, 10)).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn echo_state_property() {
        let model = Rc1dModel::new(&Rc1dParams::reference(), 1, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u0 = random_complex(&mut rng, 12, 1);
        let u1 = random_complex(&mut rng, 12, 1);
        let zero = ComplexMatrix::zeros(1, 200);
        let a = model.states_from(&zero, u0.as_slice());
        let b = model.states_from(&zero, u1.as_slice());
        assert!((a.column(199) - b.column(199)).norm() < 1e-6);
    }

    #[test]
    fn planted_readout_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = Rc1dParams { neurons: 5, window: 3, forget: vec![2], ..Rc1dParams::reference() };
        let mut model = Rc1dModel::new(&params, 3, 1).unwrap();
        let y = random_complex(&mut rng, 1, 60);
        let ext = model.states(&pad_zeros(&window_1d(&y, 3), 2));
        let w_star = random_complex(&mut rng, 1, 8);
        let targets = &w_star * ext.columns(2, 60);
        let r = model.train(&ext, &targets, &[true; 60], &[2]).unwrap();
        assert!(r.residual < 1e-8);
        assert!((&r.w_o - &w_star).norm() < 1e-6);
    }

    #[test]
    fn trained_readout_is_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = Rc1dParams { neurons: 5, window: 3, forget: vec![0, 1, 2], ..Rc1dParams::reference() };
        let mut model = Rc1dModel::new(&params, 3, 2).unwrap();
        let y = random_complex(&mut rng, 1, 40);
        let ext = model.states(&pad_zeros(&window_1d(&y, 3), 2));
        let targets = random_complex(&mut rng, 1, 40);
        let r = model.train(&ext, &targets, &[true; 40], &params.forget).unwrap().clone();
        assert!(r.residual <= targets.norm_squared());
        let u = ext.columns(r.forget, 40).into_owned();
        for _ in 0..100 {
            let d = random_complex(&mut rng, 1, 8) * C64::new(1e-2, 0.0);
            assert!((&targets - (&r.w_o + d) * &u).norm_squared() >= r.residual);
        }
        let single = model.train(&ext, &targets, &[true; 40], &[1]).unwrap();
        assert_eq!(single.forget, 1);
    }

    #[test]
    fn identity_channel_single_reservoir() {
        let cfg = OtfsConfig::new(16, 8, Variant::Rcp, 2, Modulation::Qpsk);
        let pattern = blockwise_mask(&cfg, 4).unwrap();
        let params = Rc1dParams {
            neurons: 4,
            window: 2,
            forget: vec![0],
            reservoirs: 1,
            activation: Activation::Tanh,
            ..Rc1dParams::reference()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bits: Vec<u8> = (0..pattern.data_count() * 2).map(|_| rng.random_range(0..2)).collect();
        let plan = assemble_frame(&bits, &pattern, &cfg, 9).unwrap();
        let core = remove_cyclic_prefix(&modulate(&plan.x, &cfg).unwrap(), &cfg).unwrap();
        let det = rc1d_detect(&core, &plan, &params, &cfg).unwrap();
        assert_eq!(det.bits, bits);
    }

    #[test]
    fn empty_segment_is_an_error() {
        let cfg = OtfsConfig::new(16, 8, Variant::Rcp, 2, Modulation::Qpsk);
        let pattern = blockwise_mask(&cfg, 2).unwrap();
        let plan = assemble_frame(&vec![0; pattern.data_count() * 2], &pattern, &cfg, 0).unwrap();
        // 32 segments of 4 samples: rows 0..4 carry no pilots
        let params = Rc1dParams { reservoirs: 32, ..Rc1dParams::reference() };
        let core = vec![C64::new(0.0, 0.0); 128];
        assert!(matches!(rc1d_detect(&core, &plan, &params, &cfg), Err(Error::Training(_))));
    }

    #[test]
    fn reference_config_validates() {
        let cfg = OtfsConfig::new(1024, 14, Variant::Rcp, 16, Modulation::Qpsk);
        let p = Rc1dParams::reference();
        p.validate(&cfg).unwrap();
        assert_eq!(p.forget, vec![0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22]);
        let bad = Rc1dParams { reservoirs: 5, ..p };
        assert!(bad.validate(&OtfsConfig::new(16, 8, Variant::Rcp, 2, Modulation::Qpsk)).is_err());
    }
}
