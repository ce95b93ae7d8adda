//! Training and test NMSE over a grid of reservoir sizes and windows.

use rayon::prelude::*;
use serde::Serialize;

use super::config::NmseConfig;
use super::sweep::draw_frame;
use crate::channel::{apply_time, noise_variance, unit_noise};
use crate::error::Result;
use crate::modem::{core_to_grid, modulate, remove_cyclic_prefix};
use crate::numerics::C64;
use crate::pilots::{assemble_frame, PilotKind};
use crate::rc2d::{ForgetSearch, Rc2dModel, Rc2dParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmseRow {
    pub neurons: usize,
    pub window_delay: usize,
    pub window_doppler: usize,
    pub train_nmse: f64,
    pub test_nmse: f64,
    pub frames: u64,
}

/// Per-frame `(train, test)` NMSE, indexed by window then neuron count.
type FrameCells = Vec<Vec<(f64, f64)>>;

/// Every frame is shared by all cells. For one window, the reservoirs of
/// different sizes come from one nested family, and the forget lengths are
/// searched exhaustively; so the training NMSE can only drop as neurons are
/// added.
pub fn nmse_report(cfg: &NmseConfig) -> Result<Vec<NmseRow>> {
    cfg.validate()?;
    let mut sizes = cfg.neurons.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let pattern = cfg.pilots.pattern(PilotKind::Blockwise, &cfg.otfs)?;
    let otfs = &cfg.otfs;
    let sigma = C64::new(noise_variance(cfg.snr_db).sqrt(), 0.0);

    let per_frame: Vec<Result<FrameCells>> = (0..cfg.frames as u64)
        .into_par_iter()
        .map(|f| {
            let draw = draw_frame(otfs, &cfg.channel, &cfg.pilots, cfg.seed, f)?;
            let plan = assemble_frame(&draw.bits, &pattern, otfs, draw.seeds.pilots)?;
            let clean = apply_time(&modulate(&plan.x, otfs)?, &draw.channel, otfs)?;
            let noise = unit_noise(clean.len(), draw.seeds.noise);
            let r: Vec<C64> = clean.iter().zip(&noise).map(|(c, w)| c + w * sigma).collect();
            let y = core_to_grid(&remove_cyclic_prefix(&r, otfs)?, otfs)?;
            let mut windows = Vec::with_capacity(cfg.windows.len());
            for &[mw, nw] in &cfg.windows {
                let base = Rc2dParams { search: ForgetSearch::Exhaustive, ..cfg.cell(sizes[0], mw, nw) };
                let mut cells = Vec::with_capacity(sizes.len());
                for mut model in Rc2dModel::nested_family(&base, &sizes)? {
                    let ext = model.forward(&y, otfs.variant)?;
                    let train = model.train(&ext, &plan.x_train, &plan.pattern)?.train_nmse;
                    let soft = model.predict(&ext, otfs.m, otfs.n)?;
                    let est = plan.data_symbols(&soft);
                    let truth = plan.data_symbols(&plan.x);
                    let num: f64 = est.iter().zip(&truth).map(|(a, b)| (a - b).norm_sqr()).sum();
                    let den: f64 = truth.iter().map(|b| b.norm_sqr()).sum();
                    cells.push((train, if den > 0.0 { num / den } else { 0.0 }));
                }
                windows.push(cells);
            }
            Ok(windows)
        })
        .collect();

    let mut sums = vec![vec![(0.0, 0.0); sizes.len()]; cfg.windows.len()];
    for frame in per_frame {
        for (wi, cells) in frame?.into_iter().enumerate() {
            for (ni, (tr, te)) in cells.into_iter().enumerate() {
                sums[wi][ni].0 += tr;
                sums[wi][ni].1 += te;
            }
        }
    }
    let frames = cfg.frames as f64;
    let mut rows = Vec::new();
    for (wi, &[mw, nw]) in cfg.windows.iter().enumerate() {
        for (ni, &nn) in sizes.iter().enumerate() {
            rows.push(NmseRow {
                neurons: nn,
                window_delay: mw,
                window_doppler: nw,
                train_nmse: sums[wi][ni].0 / frames,
                test_nmse: sums[wi][ni].1 / frames,
                frames: cfg.frames as u64,
            });
        }
    }
    Ok(rows)
}

/// Adjacent neuron counts (same window) where the training NMSE went up by
/// more than `rel_tol` in relative terms.
pub fn neuron_monotonicity_violations(rows: &[NmseRow], rel_tol: f64) -> Vec<(NmseRow, NmseRow)> {
    let mut out = Vec::new();
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let same_window = (a.window_delay, a.window_doppler) == (b.window_delay, b.window_doppler);
        if same_window && b.neurons > a.neurons && b.train_nmse > a.train_nmse * (1.0 + rel_tol) {
            out.push((a.clone(), b.clone()));
        }
    }
    out
}
