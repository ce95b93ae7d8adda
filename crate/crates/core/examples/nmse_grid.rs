//! Training and test NMSE of the 2D reservoir over neurons and window size.

use otfs_rc::harness::config::parse;
use otfs_rc::harness::{nmse_report, NmseConfig};

const CONFIG: &str = r#"
seed = 5
frames = 10
snr_db = 20.0
neurons = [1, 4, 8, 16]
windows = [[1, 1], [3, 3], [5, 3]]

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
rows = 6

[base]
neurons = 1
window_delay = 1
window_doppler = 1
forget_delay = [2, 3]
forget_doppler = [1, 8]
phase_rows = 2
"#;

fn main() -> otfs_rc::Result<()> {
    let cfg: NmseConfig = parse(CONFIG)?;
    for r in nmse_report(&cfg)? {
        println!("{:>3} neurons  {}x{}  train {:.4}  test {:.4}", r.neurons, r.window_delay, r.window_doppler, r.train_nmse, r.test_nmse);
    }
    Ok(())
}
