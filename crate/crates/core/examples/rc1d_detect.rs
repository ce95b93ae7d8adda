//! The time-domain 1D reservoir baseline on the same kind of subframe.

use otfs_rc::channel::{add_awgn, apply_time, ChannelSpec};
use otfs_rc::modem::{modulate, remove_cyclic_prefix, Modulation, OtfsConfig, Variant};
use otfs_rc::pilots::{assemble_frame, blockwise_mask};
use otfs_rc::rc1d::{rc1d_detect, Rc1dParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> otfs_rc::Result<()> {
    let cfg = OtfsConfig::new(64, 14, Variant::Rcp, 8, Modulation::Qpsk);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let chan = ChannelSpec { paths: 3, max_delay: 4.0, max_doppler: 0.5, integer_delays: false, integer_dopplers: false }.draw(&mut rng);
    let pattern = blockwise_mask(&cfg, 6)?;
    let bits: Vec<u8> = (0..2 * pattern.data_count()).map(|_| rng.random_range(0..2)).collect();
    let plan = assemble_frame(&bits, &pattern, &cfg, 4)?;
    let r = add_awgn(&apply_time(&modulate(&plan.x, &cfg)?, &chan, &cfg)?, 25.0, 5);
    let core = remove_cyclic_prefix(&r, &cfg)?;

    for reservoirs in [1, 2, 7, 14] {
        let params = Rc1dParams { reservoirs, ..Rc1dParams::reference() };
        let det = rc1d_detect(&core, &plan, &params, &cfg)?;
        println!(
            "{reservoirs:>2} reservoirs: train NMSE {:.2e}, data NMSE {:.4}, BER {:.4}",
            det.train_nmse.unwrap_or(f64::NAN),
            det.data_nmse(&plan),
            det.bit_errors(&plan) as f64 / bits.len() as f64
        );
    }
    Ok(())
}
