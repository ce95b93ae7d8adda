//! QPSK bits through the modulator and straight back, for both prefix layouts.

use otfs_rc::modem::{demodulate, modulate, qam_demap_nearest, qam_map, Modulation, OtfsConfig, Variant};
use otfs_rc::numerics::vec;
use otfs_rc::ComplexMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> otfs_rc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for variant in [Variant::Rcp, Variant::Cp] {
        let cfg = OtfsConfig::new(32, 8, variant, 4, Modulation::Qpsk);
        let bits: Vec<u8> = (0..2 * cfg.frame_size()).map(|_| rng.random_range(0..2)).collect();
        let x = ComplexMatrix::from_vec(cfg.m, cfg.n, qam_map(&bits, cfg.modulation)?);
        let s = modulate(&x, &cfg)?;
        let y = demodulate(&s, &cfg)?;
        let back = qam_demap_nearest(&vec(&y), cfg.modulation);
        println!(
            "{variant:?}: {} samples for {} symbols, max error {:.1e}, bit errors {}",
            s.len(),
            cfg.frame_size(),
            (&y - &x).camax(),
            back.iter().zip(&bits).filter(|(a, b)| a != b).count()
        );
    }
    Ok(())
}
