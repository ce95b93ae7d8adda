//! P-path doubly dispersive channel: sample-level application, the dense
//! time-domain matrix oracle, and closed-form delay-Doppler kernels.
//!
//! Delays `ℓ` and Dopplers `κ` are normalized to the grid resolution, so
//! integer values land exactly on grid points and fractional values leak
//! through Dirichlet kernels.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::{add_cyclic_prefix, core_to_grid, remove_cyclic_prefix, DdGrid, OtfsConfig, Variant};
use crate::numerics::{cis, dft_matrix, dirichlet, wrap, ComplexMatrix, C64};

/// Largest `MN` the dense time-domain oracle will build.
pub const ORACLE_MAX_MN: usize = 4096;

/// Largest `M` for which effective kernels are stored densely.
pub const DENSE_KERNEL_MAX_M: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: C64,
    /// Normalized delay, `τ = ℓ / (M Δf)`.
    pub delay: f64,
    /// Normalized Doppler, `ν = κ Δf / N`.
    pub doppler: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathChannel {
    pub paths: Vec<Path>,
}

impl PathChannel {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidParameter("a channel needs at least one path".into()));
        }
        for p in &paths {
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(Error::InvalidParameter("path gain must be finite".into()));
            }
            if !(p.delay.is_finite() && p.delay >= 0.0) || !p.doppler.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "path delay must be finite and non-negative, Doppler finite (got {}, {})",
                    p.delay, p.doppler
                )));
            }
        }
        Ok(Self { paths })
    }

    pub fn single(gain: C64, delay: f64, doppler: f64) -> Self {
        Self { paths: vec![Path { gain, delay, doppler }] }
    }

    pub fn identity() -> Self {
        Self::single(C64::new(1.0, 0.0), 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn max_delay(&self) -> f64 {
        self.paths.iter().map(|p| p.delay).fold(0.0, f64::max)
    }

    pub fn scaled(&self, a: C64) -> Self {
        Self {
            paths: self.paths.iter().map(|p| Path { gain: p.gain * a, ..*p }).collect(),
        }
    }

    fn check_against(&self, cfg: &OtfsConfig) -> Result<()> {
        if self.max_delay() >= cfg.m as f64 {
            return Err(Error::InvalidParameter(format!(
                "path delay {} must be below M = {}",
                self.max_delay(),
                cfg.m
            )));
        }
        Ok(())
    }

    /// One line per path: `gain_re gain_im delay doppler`.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        for p in &self.paths {
            let _ = writeln!(s, "{:e} {:e} {:e} {:e}", p.gain.re, p.gain.im, p.delay, p.doppler);
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut paths = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad channel record line {line:?}: {e}")))?;
            if v.len() != 4 {
                return Err(Error::Config(format!("channel record line needs 4 fields: {line:?}")));
            }
            paths.push(Path { gain: C64::new(v[0], v[1]), delay: v[2], doppler: v[3] });
        }
        Self::new(paths)
    }
}

/// Random channel draws for Monte-Carlo runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub paths: usize,
    /// Delays are drawn uniformly on `[0, max_delay]`.
    pub max_delay: f64,
    /// Dopplers are drawn uniformly on `[-max_doppler, max_doppler]`.
    pub max_doppler: f64,
    /// Round delays to integers (uniform over `0..=floor(max_delay)`).
    #[serde(default)]
    pub integer_delays: bool,
    #[serde(default)]
    pub integer_dopplers: bool,
}

impl ChannelSpec {
    pub fn validate(&self, cfg: &OtfsConfig) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("channel.paths must be at least 1".into()));
        }
        if !(self.max_delay >= 0.0 && self.max_delay < cfg.m as f64) {
            return Err(Error::Config(format!("channel.max_delay must lie in [0, {})", cfg.m)));
        }
        if !(self.max_doppler >= 0.0 && self.max_doppler.is_finite()) {
            return Err(Error::Config("channel.max_doppler must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Gains are complex Gaussian, normalized so that `Σ|h|² = 1`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PathChannel {
        let mut paths: Vec<Path> = (0..self.paths)
            .map(|_| {
                let gain = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                let delay = if self.integer_delays {
                    rng.random_range(0..=self.max_delay.floor() as usize) as f64
                } else {
                    rng.random::<f64>() * self.max_delay
                };
                let mut doppler = (2.0 * rng.random::<f64>() - 1.0) * self.max_doppler;
                if self.integer_dopplers {
                    doppler = doppler.round();
                }
                Path { gain, delay, doppler }
            })
            .collect();
        let energy: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
        let scale = 1.0 / energy.sqrt();
        for p in &mut paths {
            p.gain *= scale;
        }
        PathChannel { paths }
    }
}

/// `z^x` with `z = exp(j2π/den)` for real `x`.
#[inline]
fn zpow(x: f64, den: f64) -> C64 {
    cis(2.0 * PI * x / den)
}

/// `Π_ℓ = F_MNᴴ · D(ℓ) · F_MN` with `D(ℓ) = diag(z^{-ℓ r})`.
///
/// The product is circulant with entry `(a, b) = S_MN(a - b - ℓ)`; integer `ℓ`
/// gives a circular shift down by `ℓ`.
pub fn delay_operator(ell: f64, mn: usize) -> Result<ComplexMatrix> {
    if mn == 0 {
        return Err(Error::InvalidDimension("MN must be at least 1".into()));
    }
    let col: Vec<C64> = (0..mn).map(|d| dirichlet(mn, d as f64 - ell)).collect();
    Ok(DMatrix::from_fn(mn, mn, |a, b| col[wrap(a as isize - b as isize, mn)]))
}

/// `Δ_κ = diag(z^{κ r})`.
pub fn doppler_operator(kappa: f64, mn: usize) -> Result<ComplexMatrix> {
    if mn == 0 {
        return Err(Error::InvalidDimension("MN must be at least 1".into()));
    }
    let mut d = DMatrix::zeros(mn, mn);
    for r in 0..mn {
        d[(r, r)] = zpow(kappa * r as f64, mn as f64);
    }
    Ok(d)
}

/// Dense `MN × MN` time-domain channel `Σ h Π_ℓ Δ_κ` acting on CP-free samples.
#[derive(Debug, Clone)]
pub struct TimeChannelOracle {
    pub h_time: ComplexMatrix,
    m: usize,
    n: usize,
}

/// Builds the oracle as `F_MNᴴ · Σ h D(ℓ) F_MN Δ_κ` with explicit DFT matrices.
pub fn oracle_rcp(chan: &PathChannel, cfg: &OtfsConfig) -> Result<TimeChannelOracle> {
    let mn = cfg.frame_size();
    if mn > ORACLE_MAX_MN {
        return Err(Error::TooLarge(mn));
    }
    let f = dft_matrix(mn)?;
    let mut inner = ComplexMatrix::zeros(mn, mn);
    for p in &chan.paths {
        for b in 0..mn {
            let dop = p.gain * zpow(p.doppler * b as f64, mn as f64);
            for r in 0..mn {
                inner[(r, b)] += zpow(-p.delay * r as f64, mn as f64) * f[(r, b)] * dop;
            }
        }
    }
    Ok(TimeChannelOracle { h_time: f.adjoint() * inner, m: cfg.m, n: cfg.n })
}

impl TimeChannelOracle {
    pub fn apply_time(&self, s: &[C64]) -> Vec<C64> {
        let v = nalgebra::DVector::from_column_slice(s);
        (&self.h_time * v).as_slice().to_vec()
    }

    /// The DD-domain map `(F_N⊗I_M) · H · (F_Nᴴ⊗I_M)` applied to a grid.
    pub fn apply_dd(&self, x: &DdGrid) -> Result<DdGrid> {
        let fnm = dft_matrix(self.n)?;
        let s = x * fnm.adjoint();
        let r = self.apply_time(s.as_slice());
        Ok(ComplexMatrix::from_column_slice(self.m, self.n, &r) * fnm)
    }

    /// Explicit `MN × MN` DD-domain matrix acting on `vec(X)`.
    pub fn dd_matrix(&self) -> Result<ComplexMatrix> {
        let fnm = dft_matrix(self.n)?;
        let eye = ComplexMatrix::identity(self.m, self.m);
        let left = fnm.kronecker(&eye);
        let right = fnm.adjoint().kronecker(&eye);
        Ok(left * &self.h_time * right)
    }
}

/// Integer-grid channel tap, as returned by the spike estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegerTap {
    pub gain: C64,
    pub delay: usize,
    pub doppler: isize,
}

#[derive(Debug, Clone)]
struct PathTerm {
    gain: C64,
    delay: f64,
    doppler: f64,
    /// `S_M(l' - ℓ)` for `l' = 0..M`.
    sm: Vec<C64>,
    /// `S_N(κ - k')` for `k' = 0..N`.
    sn: Vec<C64>,
}

#[derive(Debug, Clone)]
enum Kernel {
    Dense(Arc<Vec<C64>>),
    Paths(Vec<PathTerm>),
    Taps(Vec<IntegerTap>),
}

/// Position-dependent DD kernel `H_{l,k}[l', k']`.
///
/// Row `(l, k)` is indexed `l + kM` and holds entries `l' + k'M`.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    m: usize,
    n: usize,
    n_cp: usize,
    variant: Variant,
    kernel: Kernel,
}

/// Fractional kernel for the single-prefix variant.
pub fn effective_channel_rcp(chan: &PathChannel, cfg: &OtfsConfig) -> Result<EffectiveChannel> {
    EffectiveChannel::from_paths(chan, cfg, Variant::Rcp)
}

/// Fractional kernel for the per-column-prefix variant.
pub fn effective_channel_cp(chan: &PathChannel, cfg: &OtfsConfig) -> Result<EffectiveChannel> {
    EffectiveChannel::from_paths(chan, cfg, Variant::Cp)
}

impl EffectiveChannel {
    /// Kernel for `cfg.variant`, dense for small `M` and lazy otherwise.
    pub fn new(chan: &PathChannel, cfg: &OtfsConfig) -> Result<Self> {
        Self::from_paths(chan, cfg, cfg.variant)
    }

    fn from_paths(chan: &PathChannel, cfg: &OtfsConfig, variant: Variant) -> Result<Self> {
        cfg.validate()?;
        chan.check_against(cfg)?;
        let terms = chan
            .paths
            .iter()
            .map(|p| PathTerm {
                gain: p.gain,
                delay: p.delay,
                doppler: p.doppler,
                sm: (0..cfg.m).map(|lp| dirichlet(cfg.m, lp as f64 - p.delay)).collect(),
                sn: (0..cfg.n).map(|kp| dirichlet(cfg.n, p.doppler - kp as f64)).collect(),
            })
            .collect();
        let lazy = Self { m: cfg.m, n: cfg.n, n_cp: cfg.n_cp, variant, kernel: Kernel::Paths(terms) };
        Ok(if cfg.m <= DENSE_KERNEL_MAX_M { lazy.densified() } else { lazy })
    }

    /// Integer-tap kernel written directly from the integer relations.
    pub fn from_integer_taps(taps: &[IntegerTap], cfg: &OtfsConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(t) = taps.iter().find(|t| t.delay >= cfg.m) {
            return Err(Error::InvalidParameter(format!("tap delay {} must be below M = {}", t.delay, cfg.m)));
        }
        Ok(Self {
            m: cfg.m,
            n: cfg.n,
            n_cp: cfg.n_cp,
            variant: cfg.variant,
            kernel: Kernel::Taps(taps.to_vec()),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.kernel, Kernel::Dense(_))
    }

    /// Materialize every entry.
    pub fn densified(&self) -> Self {
        if self.is_dense() {
            return self.clone();
        }
        let mn = self.m * self.n;
        let mut data = Vec::with_capacity(mn * mn);
        for k in 0..self.n {
            for l in 0..self.m {
                data.extend(self.row(l, k));
            }
        }
        Self { kernel: Kernel::Dense(Arc::new(data)), ..self.clone() }
    }

    /// `α_{l'}[l, k]`.
    #[inline]
    fn alpha(&self, l: usize, k: usize, lp: usize) -> C64 {
        if l < lp {
            cis(-2.0 * PI * k as f64 / self.n as f64)
        } else {
            C64::new(1.0, 0.0)
        }
    }

    pub fn entry(&self, l: usize, k: usize, lp: usize, kp: usize) -> C64 {
        let (m, n) = (self.m, self.n);
        match &self.kernel {
            Kernel::Dense(d) => d[(l + k * m) * m * n + lp + kp * m],
            Kernel::Paths(terms) => terms.iter().map(|t| self.path_entry(t, l, k, lp, kp)).sum(),
            Kernel::Taps(taps) => taps
                .iter()
                .filter(|t| t.delay == lp && wrap(t.doppler, n) == kp)
                .map(|t| t.gain * self.tap_phase(t, l, k))
                .sum(),
        }
    }

    fn path_entry(&self, t: &PathTerm, l: usize, k: usize, lp: usize, kp: usize) -> C64 {
        let (m, n) = (self.m as f64, self.n as f64);
        let phase = match self.variant {
            Variant::Rcp => {
                let e = k as f64 * (lp as f64 - t.delay) + t.doppler * wrap(l as isize - lp as isize, self.m) as f64;
                self.alpha(l, k, lp) * zpow(e, m * n)
            }
            Variant::Cp => zpow(t.doppler * (self.n_cp as f64 + l as f64 - t.delay), n * (m + self.n_cp as f64)),
        };
        t.gain * phase * t.sm[lp] * t.sn[kp]
    }

    /// Phase of an integer tap at output `(l, k)`; the gain is not applied.
    pub fn tap_phase(&self, t: &IntegerTap, l: usize, k: usize) -> C64 {
        let (m, n) = (self.m, self.n);
        match self.variant {
            Variant::Rcp => {
                let e = t.doppler as f64 * wrap(l as isize - t.delay as isize, m) as f64;
                zpow(e, (m * n) as f64) * self.alpha(l, k, t.delay)
            }
            Variant::Cp => {
                let e = t.doppler as f64 * (self.n_cp as f64 + l as f64 - t.delay as f64);
                zpow(e, (n * (m + self.n_cp)) as f64)
            }
        }
    }

    /// All `MN` entries of row `(l, k)`, indexed `l' + k'M`.
    pub fn row(&self, l: usize, k: usize) -> Vec<C64> {
        let (m, n) = (self.m, self.n);
        let mn = m * n;
        match &self.kernel {
            Kernel::Dense(d) => {
                let o = (l + k * m) * mn;
                d[o..o + mn].to_vec()
            }
            Kernel::Paths(terms) => {
                let mut row = vec![C64::new(0.0, 0.0); mn];
                for t in terms {
                    for kp in 0..n {
                        for lp in 0..m {
                            row[lp + kp * m] += self.path_entry(t, l, k, lp, kp);
                        }
                    }
                }
                row
            }
            Kernel::Taps(taps) => {
                let mut row = vec![C64::new(0.0, 0.0); mn];
                for t in taps {
                    row[t.delay + wrap(t.doppler, n) * m] += t.gain * self.tap_phase(t, l, k);
                }
                row
            }
        }
    }

    /// Flattened `MN × MN` matrix `G` with `vec(Y) = G · vec(X)`.
    pub fn matrix(&self) -> ComplexMatrix {
        let (m, n) = (self.m, self.n);
        let mn = m * n;
        let mut g = ComplexMatrix::zeros(mn, mn);
        for k in 0..n {
            for l in 0..m {
                let row = self.row(l, k);
                let r = l + k * m;
                for kp in 0..n {
                    for lp in 0..m {
                        let c = wrap(l as isize - lp as isize, m) + wrap(k as isize - kp as isize, n) * m;
                        g[(r, c)] += row[lp + kp * m];
                    }
                }
            }
        }
        g
    }

    fn check_grid(&self, x: &DdGrid) -> Result<()> {
        if x.shape() != (self.m, self.n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.m, self.n),
                got: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    /// Adjoint of [`apply_dd`]: `vec(X) = Gᴴ · vec(Y)`.
    pub fn apply_adjoint(&self, y: &DdGrid) -> Result<DdGrid> {
        self.check_grid(y)?;
        let (m, n) = (self.m, self.n);
        let mut x = ComplexMatrix::zeros(m, n);
        if let Kernel::Taps(taps) = &self.kernel {
            for t in taps {
                for k in 0..n {
                    for l in 0..m {
                        let src = (wrap(l as isize - t.delay as isize, m), wrap(k as isize - t.doppler, n));
                        x[src] += (t.gain * self.tap_phase(t, l, k)).conj() * y[(l, k)];
                    }
                }
            }
            return Ok(x);
        }
        for k in 0..n {
            for l in 0..m {
                let row = self.row(l, k);
                let yv = y[(l, k)];
                for kp in 0..n {
                    for lp in 0..m {
                        let src = (wrap(l as isize - lp as isize, m), wrap(k as isize - kp as isize, n));
                        x[src] += row[lp + kp * m].conj() * yv;
                    }
                }
            }
        }
        Ok(x)
    }
}

/// `Y[l,k] = Σ_{l',k'} H_{l,k}[l',k'] X[⟨l-l'⟩, ⟨k-k'⟩]`, summed exactly.
pub fn apply_dd(x: &DdGrid, heff: &EffectiveChannel) -> Result<DdGrid> {
    heff.check_grid(x)?;
    let (m, n) = (heff.m, heff.n);
    let mut y = ComplexMatrix::zeros(m, n);
    if let Kernel::Taps(taps) = &heff.kernel {
        for t in taps {
            for k in 0..n {
                for l in 0..m {
                    let src = (wrap(l as isize - t.delay as isize, m), wrap(k as isize - t.doppler, n));
                    y[(l, k)] += t.gain * heff.tap_phase(t, l, k) * x[src];
                }
            }
        }
        return Ok(y);
    }
    for k in 0..n {
        for l in 0..m {
            let row = heff.row(l, k);
            let mut acc = C64::new(0.0, 0.0);
            for kp in 0..n {
                let kk = wrap(k as isize - kp as isize, n);
                for lp in 0..m {
                    acc += row[lp + kp * m] * x[(wrap(l as isize - lp as isize, m), kk)];
                }
            }
            y[(l, k)] = acc;
        }
    }
    Ok(y)
}

struct FftPair {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    len: usize,
}

impl FftPair {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { fwd: planner.plan_fft_forward(len), inv: planner.plan_fft_inverse(len), len }
    }

    /// Circular fractional delay `F ᴴ diag(e^{-j2π r ℓ / len}) F` applied in place.
    fn delay(&self, buf: &mut [C64], ell: f64) {
        self.fwd.process(buf);
        let scale = 1.0 / self.len as f64;
        for (r, v) in buf.iter_mut().enumerate() {
            *v *= zpow(-ell * r as f64, self.len as f64) * scale;
        }
        self.inv.process(buf);
    }
}

fn warn_if_prefix_too_short(chan: &PathChannel, cfg: &OtfsConfig) {
    let need = chan.max_delay().ceil() as usize;
    if need > cfg.n_cp {
        warn!("channel delay {} exceeds the cyclic prefix ({} samples)", chan.max_delay(), cfg.n_cp);
    }
}

/// Sample-level channel for the single-prefix variant.
///
/// The CP-free core goes through the circulant model `Σ h Π_ℓ Δ_κ` (Doppler on
/// the core index, delay as an FFT phase ramp over `MN` samples); the output
/// prefix is the periodic extension of the output core.
pub fn apply_time_rcp(s: &[C64], chan: &PathChannel, cfg: &OtfsConfig) -> Result<Vec<C64>> {
    let cfg = OtfsConfig { variant: Variant::Rcp, ..cfg.clone() };
    let core = remove_cyclic_prefix(s, &cfg)?;
    warn_if_prefix_too_short(chan, &cfg);
    let mn = cfg.frame_size();
    let fft = FftPair::new(mn);
    let mut out = vec![C64::new(0.0, 0.0); mn];
    let mut buf = vec![C64::new(0.0, 0.0); mn];
    for p in &chan.paths {
        for (t, (b, x)) in buf.iter_mut().zip(&core).enumerate() {
            *b = x * zpow(p.doppler * t as f64, mn as f64);
        }
        fft.delay(&mut buf, p.delay);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += p.gain * b;
        }
    }
    Ok(add_cyclic_prefix(&out, &cfg))
}

/// Sample-level channel for the per-column-prefix variant.
///
/// Each column's prefix absorbs the delay, so the delay acts as a circular
/// fractional shift of the `M`-sample core of every block; the Doppler phase
/// `z̃^{κ(t̃-ℓ)}` runs on the global prefix-inclusive index `t̃`.
pub fn apply_time_cp(s: &[C64], chan: &PathChannel, cfg: &OtfsConfig) -> Result<Vec<C64>> {
    let cfg = OtfsConfig { variant: Variant::Cp, ..cfg.clone() };
    let core = remove_cyclic_prefix(s, &cfg)?;
    warn_if_prefix_too_short(chan, &cfg);
    let (m, n, ncp) = (cfg.m, cfg.n, cfg.n_cp);
    let den = (n * (m + ncp)) as f64;
    let fft = FftPair::new(m);
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for p in &chan.paths {
        for blk in 0..n {
            buf.copy_from_slice(&core[blk * m..(blk + 1) * m]);
            fft.delay(&mut buf, p.delay);
            let base = (blk * (m + ncp) + ncp) as f64 - p.delay;
            for (l, b) in buf.iter().enumerate() {
                out[blk * m + l] += p.gain * zpow(p.doppler * (base + l as f64), den) * b;
            }
        }
    }
    Ok(add_cyclic_prefix(&out, &cfg))
}

/// Sample-level channel for whichever variant `cfg` selects.
pub fn apply_time(s: &[C64], chan: &PathChannel, cfg: &OtfsConfig) -> Result<Vec<C64>> {
    match cfg.variant {
        Variant::Rcp => apply_time_rcp(s, chan, cfg),
        Variant::Cp => apply_time_cp(s, chan, cfg),
    }
}

/// Convenience: modulate, pass through the sample-level channel, demodulate.
pub fn pass_dd(x: &DdGrid, chan: &PathChannel, cfg: &OtfsConfig) -> Result<DdGrid> {
    let s = crate::modem::modulate(x, cfg)?;
    let r = apply_time(&s, chan, cfg)?;
    let core = remove_cyclic_prefix(&r, cfg)?;
    core_to_grid(&core, cfg)
}

/// Per-sample noise variance for an Es/N0 of `snr_db` with unit symbol energy.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Unit-variance circular complex Gaussian samples, deterministic in `seed`.
pub fn unit_noise(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 0.5f64.sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * s, im * s)
        })
        .collect()
}

/// Add complex AWGN of variance `10^(-snr/10)`; `+∞` leaves the stream untouched.
///
/// The same seed at two SNRs gives the same noise realization, scaled.
pub fn add_awgn(s: &[C64], snr_db: f64, seed: u64) -> Vec<C64> {
    let var = noise_variance(snr_db);
    if var == 0.0 {
        return s.to_vec();
    }
    let sigma = var.sqrt();
    s.iter().zip(unit_noise(s.len(), seed)).map(|(x, w)| x + w * sigma).collect()
}
