//! Multiplication counts at the reference subframe and how they scale with M.

use otfs_rc::complexity::{count, crossover_report, ComplexityParams, Method, Phase};

fn main() {
    let p = ComplexityParams::reference();
    println!("{:<10} {:>16} {:>16}", "method", "train", "test");
    for m in Method::ALL {
        println!("{:<10} {:>16.4e} {:>16.4e}", m.name(), count(m, Phase::Train, &p), count(m, Phase::Test, &p));
    }
    let report = crossover_report(&p);
    for i in &report.inequalities {
        println!("reservoir test cost {} < {} ({}): {}", i.lhs, i.rhs, i.against, i.holds);
    }
    println!("1D training branch: {:?}", report.rc1d.selected);

    println!("\nM       rc2d test    low-lmmse test");
    for m in [128, 256, 512, 1024, 2048] {
        let q = p.with_size(m, 14);
        println!("{m:<6} {:>12.3e} {:>16.3e}", count(Method::Rc2d, Phase::Test, &q), count(Method::LowLmmse, Phase::Test, &q));
    }
}
