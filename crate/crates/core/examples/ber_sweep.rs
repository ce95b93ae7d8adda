//! A short BER sweep from an inline config; pass a TOML path to run that instead.

use otfs_rc::harness::config::{load, parse};
use otfs_rc::harness::{run_sweep, ExperimentConfig};

const CONFIG: &str = r#"
seed = 11
frames = 20
snr_db = [5.0, 15.0, 25.0]

[otfs]
m = 32
n = 8
variant = "rcp"
n_cp = 4
modulation = "qpsk"

[channel]
paths = 2
max_delay = 2.0
max_doppler = 0.5

[pilots]
rows = 4

[[detectors]]
kind = "rc2d"
neurons = 4
window_delay = 3
window_doppler = 3
forget_delay = [2, 3]
forget_doppler = [1, 8]
phase_rows = 2

[[detectors]]
kind = "lmmse"

[[detectors]]
kind = "lmmse-estimated"
"#;

fn main() -> otfs_rc::Result<()> {
    let cfg: ExperimentConfig = match std::env::args().nth(1) {
        Some(path) => load(path.as_ref())?,
        None => parse(CONFIG)?,
    };
    let res = run_sweep(&cfg)?;
    for r in &res.rows {
        println!("{:<16} {:>5.1} dB  BER {:.4}  [{:.4}, {:.4}]", r.detector, r.snr_db, r.ber, r.ber_lo, r.ber_hi);
    }
    for (det, s) in &res.detector_seconds {
        println!("{det}: {s:.2} s");
    }
    Ok(())
}
