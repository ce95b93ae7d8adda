//! One subframe through a three-path fractional channel, detected by the 2D
//! reservoir after training on its pilot rows.

use otfs_rc::channel::{add_awgn, apply_time, ChannelSpec};
use otfs_rc::modem::{core_to_grid, modulate, remove_cyclic_prefix, Modulation, OtfsConfig, Variant};
use otfs_rc::pilots::{assemble_frame, blockwise_mask};
use otfs_rc::rc2d::{rc2d_detect, Rc2dParams};
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
    let y = core_to_grid(&remove_cyclic_prefix(&r, &cfg)?, &cfg)?;

    let params = Rc2dParams {
        neurons: 6,
        window_delay: 5,
        window_doppler: 3,
        forget_delay: vec![3, 4],
        forget_doppler: vec![1, 14],
        phase_rows: 4,
        ..Rc2dParams::reference()
    };
    let (det, model) = rc2d_detect(&y, &plan, &params, &cfg)?;
    let readout = model.readout.as_ref().expect("trained");
    for t in &readout.trials {
        println!("forget ({}, {}): residual {:.4}", t.delay, t.doppler, t.residual);
    }
    println!(
        "chose ({}, {}); train NMSE {:.4}, data NMSE {:.4}, BER {:.4}",
        readout.forget_delay,
        readout.forget_doppler,
        readout.train_nmse,
        det.data_nmse(&plan),
        det.bit_errors(&plan) as f64 / bits.len() as f64
    );
    Ok(())
}
