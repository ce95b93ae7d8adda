//! The closed-form delay-Doppler kernel of a fractional channel against the
//! sample-level simulation, and the spread of one path over the grid.

use otfs_rc::channel::{apply_dd, pass_dd, EffectiveChannel, Path, PathChannel};
use otfs_rc::modem::{Modulation, OtfsConfig, Variant};
use otfs_rc::numerics::relative_error;
use otfs_rc::{ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> otfs_rc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let chan = PathChannel::new(vec![
        Path { gain: C64::new(0.8, 0.0), delay: 0.0, doppler: 0.3 },
        Path { gain: C64::new(0.0, 0.5), delay: 1.6, doppler: -0.45 },
        Path { gain: C64::new(-0.3, 0.1), delay: 3.2, doppler: 0.1 },
    ])?;
    let x = ComplexMatrix::from_fn(16, 8, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    for variant in [Variant::Rcp, Variant::Cp] {
        let cfg = OtfsConfig::new(16, 8, variant, 4, Modulation::Qpsk);
        let heff = EffectiveChannel::new(&chan, &cfg)?;
        let kernel = apply_dd(&x, &heff)?;
        let samples = pass_dd(&x, &chan, &cfg)?;
        println!("{variant:?}: kernel vs samples {:.2e}", relative_error(kernel.as_slice(), samples.as_slice()));
    }

    // energy of the second path's taps seen from output cell (8, 4)
    let cfg = OtfsConfig::new(16, 8, Variant::Rcp, 4, Modulation::Qpsk);
    let one = EffectiveChannel::new(&PathChannel::single(C64::new(1.0, 0.0), 1.6, -0.45), &cfg)?;
    println!("tap magnitudes, delay taps 0..6 by Doppler taps 0..8:");
    for lp in 0..6 {
        let line: Vec<String> = (0..8).map(|kp| format!("{:5.2}", one.entry(8, 4, lp, kp).norm())).collect();
        println!("  {}", line.join(" "));
    }
    Ok(())
}
