use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use otfs_rc::harness::{self, config::load, nmse::neuron_monotonicity_violations};

#[derive(Parser)]
#[command(name = "otfs-rc", version, about = "OTFS link-level simulation with reservoir-computing detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER over an SNR grid for every configured detector.
    Sweep(Args),
    /// Training and test NMSE over a (neurons x window) grid.
    Nmse(Args),
    /// Multiplication counts and crossover conditions.
    Complexity(Args),
    /// Closed-form channel kernels against the reference simulations.
    VerifyChannel(Args),
}

#[derive(clap::Args)]
struct Args {
    config: PathBuf,
    /// Output CSV; the sidecar goes next to it as `<stem>.meta.json`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Args {
    fn out(&self, kind: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let stem = self.config.file_stem().and_then(|s| s.to_str()).unwrap_or(kind);
            Path::new("results").join(format!("{stem}.csv"))
        })
    }
}

fn run(cli: Cli) -> otfs_rc::Result<bool> {
    match cli.command {
        Command::Sweep(a) => {
            let out = a.out("sweep");
            let res = harness::sweep_to_files(&load(&a.config)?, &out)?;
            println!("{:<16} {:>8} {:>12} {:>12} {:>8}", "detector", "snr_db", "ber", "nmse", "frames");
            for r in &res.rows {
                println!("{:<16} {:>8.1} {:>12.4e} {:>12.4e} {:>8}", r.detector, r.snr_db, r.ber, r.nmse, r.frames);
            }
            if !res.failures.is_empty() {
                error!("{} detector failures, see the sidecar", res.failures.len());
            }
            info!("wrote {}", out.display());
            Ok(true)
        }
        Command::Nmse(a) => {
            let out = a.out("nmse");
            let rows = harness::nmse_to_files(&load(&a.config)?, &out)?;
            println!("{:>8} {:>8} {:>12} {:>12}", "neurons", "window", "train", "test");
            for r in &rows {
                let w = format!("{}x{}", r.window_delay, r.window_doppler);
                println!("{:>8} {:>8} {:>12.4e} {:>12.4e}", r.neurons, w, r.train_nmse, r.test_nmse);
            }
            let bad = neuron_monotonicity_violations(&rows, 1e-9);
            for (a, b) in &bad {
                error!("training NMSE rose from {} to {} neurons: {:e} -> {:e}", a.neurons, b.neurons, a.train_nmse, b.train_nmse);
            }
            info!("wrote {}", out.display());
            Ok(bad.is_empty())
        }
        Command::Complexity(a) => {
            let out = a.out("complexity");
            let (rows, report) = harness::complexity_to_files(&load(&a.config)?, &out)?;
            println!("{} rows", rows.len());
            for i in &report.inequalities {
                println!("cheaper than {:<10} {:>16.0} < {:<16.0} {}", i.against.to_string(), i.lhs, i.rhs, i.holds);
            }
            println!("rc1d branch: {:?}", report.rc1d.selected);
            info!("wrote {}", out.display());
            Ok(true)
        }
        Command::VerifyChannel(a) => {
            let out = a.out("verify");
            let report = harness::verify_to_files(&load(&a.config)?, &out)?;
            use otfs_rc::harness::verify::Check::*;
            for c in [RcpOracle, CpTime, IntegerRcp, IntegerCp] {
                println!("{:<12} cases {:>5}  max error {:.3e}", format!("{c:?}"), report.count(c), report.max_error(c));
            }
            for c in report.cases.iter().filter(|c| !c.passed) {
                error!("{:?} trial {} ({}x{}): {:.3e} >= {:.1e}", c.check, c.trial, c.m, c.n, c.error, c.tolerance);
            }
            info!("wrote {}", out.display());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}
