//! LMMSE with the true kernel against LMMSE on taps read off an embedded
//! spike pilot, on an integer channel and on a fractional one.

use otfs_rc::channel::{add_awgn, apply_time, noise_variance, ChannelSpec, EffectiveChannel};
use otfs_rc::detection::Detection;
use otfs_rc::equalizers::{estimate_csi_spike, lmmse_dd, lmmse_estimated};
use otfs_rc::modem::{core_to_grid, modulate, remove_cyclic_prefix, Modulation, OtfsConfig, Variant};
use otfs_rc::pilots::{assemble_frame, spike_mask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> otfs_rc::Result<()> {
    let cfg = OtfsConfig::new(32, 8, Variant::Rcp, 8, Modulation::Qpsk);
    let snr = 20.0;
    for integer in [true, false] {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = ChannelSpec { paths: 3, max_delay: 2.0, max_doppler: 1.0, integer_delays: integer, integer_dopplers: integer };
        let chan = spec.draw(&mut rng);
        let pattern = spike_mask(&cfg, 6, 20.0)?;
        let bits: Vec<u8> = (0..2 * pattern.data_count()).map(|_| rng.random_range(0..2)).collect();
        let plan = assemble_frame(&bits, &pattern, &cfg, 7)?;
        let r = add_awgn(&apply_time(&modulate(&plan.x, &cfg)?, &chan, &cfg)?, snr, 8);
        let y = core_to_grid(&remove_cyclic_prefix(&r, &cfg)?, &cfg)?;

        let perfect = Detection::from_soft(lmmse_dd(&y, &EffectiveChannel::new(&chan, &cfg)?, noise_variance(snr))?, &plan, &cfg, None);
        let csi = estimate_csi_spike(&y, &plan.pattern, &cfg, 3.0)?;
        let estimated = Detection::from_soft(lmmse_estimated(&y, &csi, &cfg)?, &plan, &cfg, None);
        let ber = |d: &Detection| d.bit_errors(&plan) as f64 / bits.len() as f64;
        println!(
            "{} channel: {} taps found, noise {:.4} (true {:.4}); BER perfect {:.4}, estimated {:.4}",
            if integer { "integer" } else { "fractional" },
            csi.taps.len(),
            csi.noise_var,
            noise_variance(snr),
            ber(&perfect),
            ber(&estimated)
        );
    }
    Ok(())
}
