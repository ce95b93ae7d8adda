//! Seeded Monte-Carlo BER sweeps.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{DetectorSpec, ExperimentConfig, PilotSpec};
use super::stats::{wilson, Interval, Z95};
use crate::channel::{apply_time, noise_variance, unit_noise, ChannelSpec, EffectiveChannel, PathChannel};
use crate::detection::Detection;
use crate::equalizers::{estimate_csi_spike, lmmse_dd, lmmse_estimated};
use crate::error::Result;
use crate::modem::{core_to_grid, modulate, remove_cyclic_prefix, DdGrid, OtfsConfig};
use crate::numerics::C64;
use crate::pilots::{assemble_frame, papr, FramePlan, PilotKind};
use crate::rc1d::rc1d_detect;
use crate::rc2d::rc2d_detect;

/// Independent seeds for everything random in one subframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameSeeds {
    pub channel: u64,
    pub bits: u64,
    pub pilots: u64,
    pub noise: u64,
}

/// Pure function of the master seed and the frame index.
pub fn frame_seeds(master: u64, frame: u64) -> FrameSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(frame);
    FrameSeeds { channel: rng.next_u64(), bits: rng.next_u64(), pilots: rng.next_u64(), noise: rng.next_u64() }
}

/// What one subframe looks like before detection.
#[derive(Debug, Clone)]
pub struct FrameDraw {
    pub seeds: FrameSeeds,
    pub channel: PathChannel,
    pub bits: Vec<u8>,
}

/// Channel and payload bits of subframe `frame`.
pub fn draw_frame(otfs: &OtfsConfig, channel: &ChannelSpec, pilots: &PilotSpec, master: u64, frame: u64) -> Result<FrameDraw> {
    let seeds = frame_seeds(master, frame);
    let channel = channel.draw(&mut ChaCha8Rng::seed_from_u64(seeds.channel));
    let pattern = pilots.pattern(PilotKind::Blockwise, otfs)?;
    let len = pattern.data_count() * otfs.modulation.bits_per_symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.bits);
    let bits = (0..len).map(|_| rng.random_range(0..2u8)).collect();
    Ok(FrameDraw { seeds, channel, bits })
}

#[derive(Debug, Clone)]
struct Outcome {
    errors: u64,
    bits: u64,
    nmse: f64,
    train_nmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameFailure {
    pub detector: String,
    pub snr_db: f64,
    pub frame: u64,
    pub message: String,
}

struct FrameResult {
    /// Indexed `[snr][detector]`.
    outcomes: Vec<Vec<std::result::Result<Outcome, String>>>,
    papr: BTreeMap<&'static str, f64>,
    seconds: Vec<f64>,
}

fn kind_name(kind: PilotKind) -> &'static str {
    match kind {
        PilotKind::Blockwise => "blockwise",
        PilotKind::Spike => "spike",
    }
}

struct Transmission {
    plan: FramePlan,
    /// Channel output without noise, prefix included.
    clean: Vec<C64>,
}

fn detect(spec: &DetectorSpec, y: &DdGrid, core: &[C64], tx: &Transmission, heff: Option<&EffectiveChannel>, noise_var: f64, cfg: &ExperimentConfig) -> Result<Detection> {
    let otfs = &cfg.otfs;
    match spec {
        DetectorSpec::Rc2d { params, .. } => Ok(rc2d_detect(y, &tx.plan, params, otfs)?.0),
        DetectorSpec::Rc1d { params, .. } => rc1d_detect(core, &tx.plan, params, otfs),
        DetectorSpec::Lmmse { .. } => {
            let heff = heff.expect("perfect-CSI kernel is built when an LMMSE detector is configured");
            Ok(Detection::from_soft(lmmse_dd(y, heff, noise_var)?, &tx.plan, otfs, None))
        }
        DetectorSpec::LmmseEstimated { threshold_factor, .. } => {
            let csi = estimate_csi_spike(y, &tx.plan.pattern, otfs, *threshold_factor)?;
            Ok(Detection::from_soft(lmmse_estimated(y, &csi, otfs)?, &tx.plan, otfs, None))
        }
    }
}

fn run_frame(cfg: &ExperimentConfig, frame: u64) -> Result<FrameResult> {
    let otfs = &cfg.otfs;
    let draw = draw_frame(otfs, &cfg.channel, &cfg.pilots, cfg.seed, frame)?;
    let mut txs: BTreeMap<&'static str, Transmission> = BTreeMap::new();
    let mut peak = BTreeMap::new();
    for d in &cfg.detectors {
        let kind = d.pilot_kind();
        if txs.contains_key(kind_name(kind)) {
            continue;
        }
        let pattern = cfg.pilots.pattern(kind, otfs)?;
        let plan = assemble_frame(&draw.bits, &pattern, otfs, draw.seeds.pilots)?;
        let s = modulate(&plan.x, otfs)?;
        peak.insert(kind_name(kind), papr(&s)?);
        let clean = apply_time(&s, &draw.channel, otfs)?;
        txs.insert(kind_name(kind), Transmission { plan, clean });
    }
    let heff = if cfg.detectors.iter().any(|d| matches!(d, DetectorSpec::Lmmse { .. })) {
        Some(EffectiveChannel::new(&draw.channel, otfs)?)
    } else {
        None
    };
    let noise = unit_noise(otfs.stream_len(), draw.seeds.noise);
    let mut seconds = vec![0.0; cfg.detectors.len()];
    let mut outcomes = Vec::with_capacity(cfg.snr_db.len());
    for &snr in &cfg.snr_db {
        let var = noise_variance(snr);
        let sigma = C64::new(var.sqrt(), 0.0);
        let mut received: BTreeMap<&'static str, (Vec<C64>, DdGrid)> = BTreeMap::new();
        for (name, tx) in &txs {
            let r: Vec<C64> = tx.clean.iter().zip(&noise).map(|(c, w)| c + w * sigma).collect();
            let core = remove_cyclic_prefix(&r, otfs)?;
            let y = core_to_grid(&core, otfs)?;
            received.insert(name, (core, y));
        }
        let mut row = Vec::with_capacity(cfg.detectors.len());
        for (i, d) in cfg.detectors.iter().enumerate() {
            let name = kind_name(d.pilot_kind());
            let tx = &txs[name];
            let (core, y) = &received[name];
            let start = Instant::now();
            let result = detect(d, y, core, tx, heff.as_ref(), var, cfg);
            seconds[i] += start.elapsed().as_secs_f64();
            row.push(
                result
                    .map(|det| Outcome {
                        errors: det.bit_errors(&tx.plan) as u64,
                        bits: tx.plan.bits_per_frame() as u64,
                        nmse: det.data_nmse(&tx.plan),
                        train_nmse: det.train_nmse,
                    })
                    .map_err(|e| e.to_string()),
            );
        }
        outcomes.push(row);
    }
    Ok(FrameResult { outcomes, papr: peak, seconds })
}

/// One `(detector, SNR)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub detector: String,
    pub snr_db: f64,
    pub ber: f64,
    /// Mean data-position NMSE of the unquantized estimate.
    pub nmse: f64,
    /// Subframes that contributed.
    pub frames: u64,
    pub errors: u64,
    pub bits: u64,
    pub ber_lo: f64,
    pub ber_hi: f64,
    /// Mean training NMSE for the learned detectors.
    pub train_nmse: Option<f64>,
}

impl SweepRow {
    pub fn interval(&self) -> Interval {
        Interval { lo: self.ber_lo, hi: self.ber_hi }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<FrameFailure>,
    /// Mean transmit PAPR in dB per pilot layout.
    pub papr_db: BTreeMap<String, f64>,
    /// Total detector wall time in seconds.
    pub detector_seconds: BTreeMap<String, f64>,
}

impl SweepResult {
    pub fn row(&self, detector: &str, snr_db: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.detector == detector && r.snr_db == snr_db)
    }

    pub fn detector_rows(&self, detector: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.detector == detector).collect()
    }
}

#[derive(Default, Clone)]
struct Acc {
    errors: u64,
    bits: u64,
    frames: u64,
    nmse: f64,
    train: f64,
    trained: u64,
}

/// Run every detector on every frame at every SNR.
///
/// Frames run in parallel; results are reduced in frame order, so the output
/// does not depend on the number of worker threads.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let results: Vec<Result<FrameResult>> = (0..cfg.frames as u64).into_par_iter().map(|f| run_frame(cfg, f)).collect();
    let (ns, nd) = (cfg.snr_db.len(), cfg.detectors.len());
    let mut acc = vec![vec![Acc::default(); nd]; ns];
    let mut failures = Vec::new();
    let mut papr_sum: BTreeMap<String, f64> = BTreeMap::new();
    let mut seconds = vec![0.0; nd];
    for (frame, res) in results.into_iter().enumerate() {
        let res = res?;
        for (k, v) in res.papr {
            *papr_sum.entry(k.to_string()).or_default() += v;
        }
        for (i, s) in res.seconds.iter().enumerate() {
            seconds[i] += s;
        }
        for (si, row) in res.outcomes.into_iter().enumerate() {
            for (di, o) in row.into_iter().enumerate() {
                match o {
                    Ok(o) => {
                        let a = &mut acc[si][di];
                        a.errors += o.errors;
                        a.bits += o.bits;
                        a.frames += 1;
                        a.nmse += o.nmse;
                        if let Some(t) = o.train_nmse {
                            a.train += t;
                            a.trained += 1;
                        }
                    }
                    Err(message) => failures.push(FrameFailure {
                        detector: cfg.detectors[di].label(),
                        snr_db: cfg.snr_db[si],
                        frame: frame as u64,
                        message,
                    }),
                }
            }
        }
    }
    if !failures.is_empty() {
        log::warn!("{} detector runs failed and were excluded", failures.len());
    }
    let mut rows = Vec::with_capacity(ns * nd);
    for (di, d) in cfg.detectors.iter().enumerate() {
        for (si, &snr) in cfg.snr_db.iter().enumerate() {
            let a = &acc[si][di];
            let ci = wilson(a.errors, a.bits, Z95);
            rows.push(SweepRow {
                detector: d.label(),
                snr_db: snr,
                ber: if a.bits == 0 { f64::NAN } else { a.errors as f64 / a.bits as f64 },
                nmse: if a.frames == 0 { f64::NAN } else { a.nmse / a.frames as f64 },
                frames: a.frames,
                errors: a.errors,
                bits: a.bits,
                ber_lo: ci.lo,
                ber_hi: ci.hi,
                train_nmse: (a.trained > 0).then(|| a.train / a.trained as f64),
            });
        }
    }
    let frames = cfg.frames as f64;
    Ok(SweepResult {
        rows,
        failures,
        papr_db: papr_sum.into_iter().map(|(k, v)| (k, v / frames)).collect(),
        detector_seconds: cfg.detectors.iter().map(DetectorSpec::label).zip(seconds).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse;

    fn identity_config() -> ExperimentConfig {
        parse(
            r#"
seed = 3
frames = 6
snr_db = [inf]

[otfs]
m = 16
n = 8
variant = "rcp"
n_cp = 4
modulation = "qpsk"

[channel]
paths = 1
max_delay = 0.0
max_doppler = 0.0

[pilots]
rows = 4

[[detectors]]
kind = "rc2d"
neurons = 4
window_delay = 2
window_doppler = 4
forget_delay = [0]
forget_doppler = [0]
# no delayed paths, so no wrapped rows to compensate
phase_rows = 0

[[detectors]]
kind = "lmmse"
"#,
        )
        .unwrap()
    }

    #[test]
    fn seeds_are_pure_and_distinct() {
        assert_eq!(frame_seeds(1, 5), frame_seeds(1, 5));
        assert_ne!(frame_seeds(1, 5), frame_seeds(1, 6));
        assert_ne!(frame_seeds(1, 5), frame_seeds(2, 5));
        let s = frame_seeds(9, 0);
        assert!(s.channel != s.bits && s.bits != s.noise);
    }

    #[test]
    fn noiseless_identity_channel_is_error_free() {
        let res = run_sweep(&identity_config()).unwrap();
        assert!(res.failures.is_empty());
        for r in &res.rows {
            assert_eq!(r.errors, 0, "{}", r.detector);
            assert_eq!(r.frames, 6);
            assert_eq!(r.bits, 6 * 12 * 8 * 2);
        }
    }

    #[test]
    fn frames_share_data_across_detectors() {
        let cfg = identity_config();
        let a = draw_frame(&cfg.otfs, &cfg.channel, &cfg.pilots, cfg.seed, 2).unwrap();
        let b = draw_frame(&cfg.otfs, &cfg.channel, &cfg.pilots, cfg.seed, 2).unwrap();
        assert_eq!(a.bits, b.bits);
        assert_eq!(a.channel, b.channel);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut cfg = identity_config();
        cfg.frames = 2;
        // 16 reservoirs of 8 samples: half of them see no pilot rows
        cfg.detectors.push(parse::<ExperimentConfig>(&format!(
            "{}\n[[detectors]]\nkind = \"rc1d\"\nneurons = 2\nwindow = 2\nforget = [0]\nreservoirs = 32\n",
            toml::to_string(&identity_config()).unwrap()
        ))
        .unwrap()
        .detectors
        .pop()
        .unwrap());
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.failures.len(), 2);
        let row = res.row("rc1d", f64::INFINITY).unwrap();
        assert_eq!(row.frames, 0);
        assert!(row.ber.is_nan());
        assert_eq!(res.row("rc2d", f64::INFINITY).unwrap().frames, 2);
    }
}
