//! Binomial confidence intervals.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// Wilson score interval for `errors` successes out of `trials`.
pub fn wilson(errors: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at the extremes; round-off would leave ~1e-19
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    Interval { lo, hi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_value() {
        // 10 out of 100
        let i = wilson(10, 100, Z95);
        assert!((i.lo - 0.05523).abs() < 1e-5 && (i.hi - 0.17437).abs() < 1e-5);
    }

    #[test]
    fn zero_and_all() {
        let z = wilson(0, 1000, Z95);
        assert_eq!(z.lo, 0.0);
        assert!(z.hi > 0.0 && z.hi < 0.005);
        let a = wilson(50, 50, Z95);
        assert!((a.hi - 1.0).abs() < 1e-12 && a.lo < 1.0);
        assert_eq!(wilson(0, 0, Z95), Interval { lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn overlap_rules() {
        let a = Interval { lo: 0.1, hi: 0.2 };
        assert!(a.overlaps(&Interval { lo: 0.2, hi: 0.3 }));
        assert!(!a.overlaps(&Interval { lo: 0.21, hi: 0.3 }));
        assert!(a.contains(0.15));
    }
}
