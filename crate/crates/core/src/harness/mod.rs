//! Experiment driver: configs, Monte-Carlo sweeps, NMSE grids, complexity
//! tables and the channel battery, each written as CSV plus a JSON sidecar.

pub mod config;
pub mod nmse;
pub mod output;
pub mod stats;
pub mod sweep;
pub mod verify;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

pub use config::{ComplexityConfig, DetectorSpec, ExperimentConfig, NmseConfig, PilotSpec, VerifyConfig};
pub use nmse::{nmse_report, NmseRow};
pub use sweep::{run_sweep, SweepResult, SweepRow};
pub use verify::{verify_channel, VerifyReport};

use crate::complexity::{crossover_report, sweep as complexity_sweep, ComplexityRow, CrossoverReport};
use crate::error::Result;
use output::{write_csv, write_sidecar, Metadata};

/// Sweep and persist; the CSV holds no timing so reruns are byte-identical.
pub fn sweep_to_files(cfg: &ExperimentConfig, csv: &Path) -> Result<SweepResult> {
    #[derive(Serialize)]
    struct Extra<'a> {
        snr_axis: &'static str,
        master_seed: u64,
        frame_seed_rule: &'static str,
        papr_db: &'a BTreeMap<String, f64>,
        failures: &'a [sweep::FrameFailure],
        detector_seconds: &'a BTreeMap<String, f64>,
    }
    let res = run_sweep(cfg)?;
    write_csv(csv, &res.rows)?;
    let extra = Extra {
        snr_axis: "Es/N0 (dB)",
        master_seed: cfg.seed,
        frame_seed_rule: "ChaCha8(master seed, stream = frame index): channel, bits, pilots, noise",
        papr_db: &res.papr_db,
        failures: &res.failures,
        detector_seconds: &res.detector_seconds,
    };
    write_sidecar(csv, &Metadata::new("sweep", cfg, extra)?)?;
    Ok(res)
}

pub fn nmse_to_files(cfg: &NmseConfig, csv: &Path) -> Result<Vec<NmseRow>> {
    #[derive(Serialize)]
    struct Extra {
        master_seed: u64,
        neuron_monotonicity_violations: usize,
    }
    let rows = nmse_report(cfg)?;
    write_csv(csv, &rows)?;
    let violations = nmse::neuron_monotonicity_violations(&rows, 1e-9).len();
    write_sidecar(csv, &Metadata::new("nmse", cfg, Extra { master_seed: cfg.seed, neuron_monotonicity_violations: violations })?)?;
    Ok(rows)
}

pub fn complexity_to_files(cfg: &ComplexityConfig, csv: &Path) -> Result<(Vec<ComplexityRow>, CrossoverReport)> {
    #[derive(Serialize)]
    struct Extra<'a> {
        log_base: u32,
        crossover: &'a CrossoverReport,
    }
    let mut rows = complexity_sweep(&cfg.params, &cfg.m, &cfg.n)?;
    if cfg.rc1d_neurons.is_some() || cfg.rc1d_inputs.is_some() {
        let p1 = crate::complexity::ComplexityParams {
            neurons: cfg.rc1d_neurons.unwrap_or(cfg.params.neurons),
            inputs: cfg.rc1d_inputs.unwrap_or(cfg.params.inputs),
            ..cfg.params.clone()
        };
        for r in rows.iter_mut().filter(|r| r.method == crate::complexity::Method::Rc1d) {
            let phase = if r.phase == "train" { crate::complexity::Phase::Train } else { crate::complexity::Phase::Test };
            r.count = crate::complexity::count(r.method, phase, &p1.with_size(r.m, r.n));
        }
    }
    let report = crossover_report(&cfg.params);
    write_csv(csv, &rows)?;
    write_sidecar(csv, &Metadata::new("complexity", cfg, Extra { log_base: 2, crossover: &report })?)?;
    Ok((rows, report))
}

pub fn verify_to_files(cfg: &VerifyConfig, csv: &Path) -> Result<VerifyReport> {
    #[derive(Serialize)]
    struct Extra {
        passed: bool,
        failed_cases: usize,
    }
    let report = verify_channel(cfg)?;
    write_csv(csv, &report.cases)?;
    let failed = report.cases.iter().filter(|c| !c.passed).count();
    write_sidecar(csv, &Metadata::new("verify-channel", cfg, Extra { passed: report.passed(), failed_cases: failed })?)?;
    Ok(report)
}
