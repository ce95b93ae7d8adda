//! Dominant-term complex-multiplication counts for every detector.
//!
//! The constants hidden by the big-O are taken as 1 and logarithms are base 2,
//! so the numbers are useful for orderings and scaling, not cycle counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lmmse,
    LowLmmse,
    Mpa,
    Lsmr,
    Rc1d,
    Rc2d,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Lmmse, Method::LowLmmse, Method::Mpa, Method::Lsmr, Method::Rc1d, Method::Rc2d];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lmmse => "lmmse",
            Method::LowLmmse => "low-lmmse",
            Method::Mpa => "mpa",
            Method::Lsmr => "lsmr",
            Method::Rc1d => "rc1d",
            Method::Rc2d => "rc2d",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Training for the reservoirs, channel estimation for the model-based methods.
    Train,
    Test,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityParams {
    pub m: usize,
    pub n: usize,
    /// Pilot overhead `η`.
    pub eta: f64,
    pub neurons: usize,
    pub inputs: usize,
    /// `|𝓛_f|` for the 1D reservoir.
    pub forget_1d: usize,
    /// `|𝓛_m|`.
    pub forget_delay: usize,
    /// `|𝓛_n|`.
    pub forget_doppler: usize,
    pub reservoirs: usize,
    /// Estimated taps `P̃`; `ηMN/2` when absent.
    #[serde(default)]
    pub taps: Option<f64>,
    pub mpa_iterations: usize,
    pub alphabet: usize,
    pub lsmr_iterations: usize,
    pub cancellation_iterations: usize,
}

impl ComplexityParams {
    /// Reference setting: `M=1024, N=14`, 48 pilot rows, a 6-neuron 2D
    /// reservoir with a 4×14 window, two forget lengths per axis, seven 1D
    /// reservoirs with 12 forget lengths, MPA with 30 iterations on QPSK and
    /// LSMR with 15 × 5 iterations.
    pub fn reference() -> Self {
        Self {
            m: 1024,
            n: 14,
            eta: 48.0 / 1024.0,
            neurons: 6,
            inputs: 56,
            forget_1d: 12,
            forget_delay: 2,
            forget_doppler: 2,
            reservoirs: 7,
            taps: None,
            mpa_iterations: 30,
            alphabet: 4,
            lsmr_iterations: 15,
            cancellation_iterations: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("M", self.m),
            ("N", self.n),
            ("neurons", self.neurons),
            ("inputs", self.inputs),
            ("forget_1d", self.forget_1d),
            ("forget_delay", self.forget_delay),
            ("forget_doppler", self.forget_doppler),
            ("reservoirs", self.reservoirs),
            ("mpa_iterations", self.mpa_iterations),
            ("alphabet", self.alphabet),
            ("lsmr_iterations", self.lsmr_iterations),
            ("cancellation_iterations", self.cancellation_iterations),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParameter(format!("complexity parameter {name} must be positive")));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("pilot overhead must lie in (0, 1], got {}", self.eta)));
        }
        if let Some(p) = self.taps {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("estimated tap count must be positive, got {p}")));
            }
        }
        Ok(())
    }

    pub fn mn(&self) -> f64 {
        (self.m * self.n) as f64
    }

    /// Pilot-region size `ηMN`.
    pub fn pilots(&self) -> f64 {
        self.eta * self.mn()
    }

    /// `P̃`.
    pub fn estimated_taps(&self) -> f64 {
        self.taps.unwrap_or(self.pilots() / 2.0)
    }

    /// `N_i + N_n`.
    pub fn readout_len(&self) -> f64 {
        (self.inputs + self.neurons) as f64
    }

    pub fn with_size(&self, m: usize, n: usize) -> Self {
        Self { m, n, ..self.clone() }
    }
}

/// Which of the two 1D-RC training formulas applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rc1dBranch {
    /// `N_i + N_n ≤ ηMN/V`.
    FewInputs,
    /// `N_i + N_n > ηMN/V`.
    ManyReservoirs,
}

pub fn rc1d_branch(p: &ComplexityParams) -> Rc1dBranch {
    if p.readout_len() <= p.pilots() / p.reservoirs as f64 {
        Rc1dBranch::FewInputs
    } else {
        Rc1dBranch::ManyReservoirs
    }
}

fn rc1d_train(p: &ComplexityParams, branch: Rc1dBranch) -> f64 {
    let (nn, len, mn, eta_mn, v, lf) = (
        p.neurons as f64,
        p.readout_len(),
        p.mn(),
        p.pilots(),
        p.reservoirs as f64,
        p.forget_1d as f64,
    );
    let solve = match branch {
        Rc1dBranch::FewInputs => eta_mn * eta_mn / v,
        Rc1dBranch::ManyReservoirs => len * eta_mn * v,
    };
    nn * len * mn + len * (solve + eta_mn) * lf
}

pub fn count(method: Method, phase: Phase, p: &ComplexityParams) -> f64 {
    let mn = p.mn();
    let eta_mn = p.pilots();
    let taps = p.estimated_taps();
    let len = p.readout_len();
    match (method, phase) {
        (Method::Rc1d, Phase::Train) => rc1d_train(p, rc1d_branch(p)),
        (Method::Rc2d, Phase::Train) => {
            let (nn, ni) = (p.neurons as f64, p.inputs as f64);
            let sets = (p.forget_delay + p.forget_doppler) as f64;
            nn * (ni + 3.0 * nn) * mn + len * (eta_mn * eta_mn + eta_mn) * sets
        }
        (_, Phase::Train) => eta_mn,
        (Method::Lmmse, Phase::Test) => mn.powi(3),
        (Method::LowLmmse, Phase::Test) => mn * taps * (p.n as f64).log2(),
        (Method::Mpa, Phase::Test) => (p.mpa_iterations * p.alphabet) as f64 * taps * mn,
        (Method::Lsmr, Phase::Test) => (p.lsmr_iterations * p.cancellation_iterations) as f64 * taps * mn,
        (Method::Rc1d | Method::Rc2d, Phase::Test) => len * mn,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub against: Method,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn strict(against: Method, lhs: f64, rhs: f64) -> Self {
        Self { against, lhs, rhs, holds: lhs < rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rc1dBranchReport {
    pub selected: Rc1dBranch,
    /// `N_i + N_n` sits exactly on `ηMN/V`.
    pub at_boundary: bool,
    pub few_inputs: f64,
    pub many_reservoirs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverReport {
    /// Reservoir test cost below MPA, LSMR and low-complexity LMMSE, in that order.
    pub inequalities: [Inequality; 3],
    pub rc1d: Rc1dBranchReport,
}

impl CrossoverReport {
    pub fn all_hold(&self) -> bool {
        self.inequalities.iter().all(|i| i.holds)
    }
}

/// Conditions under which a reservoir detector is cheaper at test time.
/// Equality counts as not holding.
pub fn crossover_report(p: &ComplexityParams) -> CrossoverReport {
    let len = p.readout_len();
    let taps = p.estimated_taps();
    CrossoverReport {
        inequalities: [
            Inequality::strict(Method::Mpa, len, taps * (p.mpa_iterations * p.alphabet) as f64),
            Inequality::strict(Method::Lsmr, len, taps * (p.lsmr_iterations * p.cancellation_iterations) as f64),
            Inequality::strict(Method::LowLmmse, len, taps * (p.n as f64).log2()),
        ],
        rc1d: Rc1dBranchReport {
            selected: rc1d_branch(p),
            at_boundary: len == p.pilots() / p.reservoirs as f64,
            few_inputs: rc1d_train(p, Rc1dBranch::FewInputs),
            many_reservoirs: rc1d_train(p, Rc1dBranch::ManyReservoirs),
        },
    }
}

/// One line of a subframe-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub method: Method,
    pub phase: &'static str,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub count: f64,
}

pub fn sweep(p: &ComplexityParams, ms: &[usize], ns: &[usize]) -> Result<Vec<ComplexityRow>> {
    p.validate()?;
    let mut rows = Vec::new();
    for &m in ms {
        for &n in ns {
            let q = p.with_size(m, n);
            q.validate()?;
            for method in Method::ALL {
                for phase in [Phase::Train, Phase::Test] {
                    rows.push(ComplexityRow { method, phase: phase.name(), m, n, count: count(method, phase, &q) });
                }
            }
        }
    }
    Ok(rows)
}
