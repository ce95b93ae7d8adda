//! TOML experiment descriptions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelSpec;
use crate::complexity::ComplexityParams;
use crate::error::{Error, Result};
use crate::modem::OtfsConfig;
use crate::pilots::{blockwise_mask, spike_mask, PilotKind, PilotPattern};
use crate::rc1d::Rc1dParams;
use crate::rc2d::Rc2dParams;

fn default_spike_power() -> f64 {
    20.0
}

fn default_threshold() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotSpec {
    /// Delay rows occupied by pilots (and guards for the spike pattern).
    pub rows: usize,
    #[serde(default = "default_spike_power")]
    pub spike_power_db: f64,
}

impl PilotSpec {
    pub fn pattern(&self, kind: PilotKind, cfg: &OtfsConfig) -> Result<PilotPattern> {
        match kind {
            PilotKind::Blockwise => blockwise_mask(cfg, self.rows),
            PilotKind::Spike => spike_mask(cfg, self.rows, self.spike_power_db),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DetectorSpec {
    Rc2d {
        #[serde(default)]
        label: Option<String>,
        #[serde(flatten)]
        params: Rc2dParams,
    },
    Rc1d {
        #[serde(default)]
        label: Option<String>,
        #[serde(flatten)]
        params: Rc1dParams,
    },
    /// LMMSE with the true effective channel and noise variance.
    Lmmse {
        #[serde(default)]
        label: Option<String>,
    },
    /// LMMSE on the spike-pilot channel estimate.
    LmmseEstimated {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_threshold")]
        threshold_factor: f64,
    },
}

impl DetectorSpec {
    pub fn label(&self) -> String {
        let (custom, default) = match self {
            DetectorSpec::Rc2d { label, .. } => (label, "rc2d"),
            DetectorSpec::Rc1d { label, .. } => (label, "rc1d"),
            DetectorSpec::Lmmse { label } => (label, "lmmse"),
            DetectorSpec::LmmseEstimated { label, .. } => (label, "lmmse-estimated"),
        };
        custom.clone().unwrap_or_else(|| default.to_string())
    }

    /// Pilot layout the detector is run on.
    pub fn pilot_kind(&self) -> PilotKind {
        match self {
            DetectorSpec::LmmseEstimated { .. } => PilotKind::Spike,
            _ => PilotKind::Blockwise,
        }
    }

    pub fn validate(&self, cfg: &OtfsConfig) -> Result<()> {
        match self {
            DetectorSpec::Rc2d { params, .. } => params.validate(cfg),
            DetectorSpec::Rc1d { params, .. } => params.validate(cfg),
            DetectorSpec::Lmmse { .. } => Ok(()),
            DetectorSpec::LmmseEstimated { threshold_factor, .. } => {
                if threshold_factor.is_nan() || *threshold_factor < 0.0 {
                    return Err(Error::Config("threshold_factor must be non-negative".into()));
                }
                Ok(())
            }
        }
    }
}

/// A BER-versus-SNR sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub otfs: OtfsConfig,
    pub channel: ChannelSpec,
    pub pilots: PilotSpec,
    /// Es/N0 grid in dB.
    pub snr_db: Vec<f64>,
    /// Subframes per SNR point.
    pub frames: usize,
    pub seed: u64,
    pub detectors: Vec<DetectorSpec>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.otfs.validate()?;
        self.channel.validate(&self.otfs)?;
        if self.detectors.is_empty() {
            return Err(Error::Config("at least one detector is required".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("at least one SNR point is required".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| s.is_nan()) {
            return Err(Error::Config(format!("invalid SNR value {s}")));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        let mut labels: Vec<String> = self.detectors.iter().map(DetectorSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate detector label {:?}", w[0])));
        }
        for d in &self.detectors {
            self.pilots.pattern(d.pilot_kind(), &self.otfs)?;
            d.validate(&self.otfs)?;
        }
        Ok(())
    }
}

/// Training-NMSE study over a (neurons × window) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmseConfig {
    pub otfs: OtfsConfig,
    pub channel: ChannelSpec,
    pub pilots: PilotSpec,
    pub snr_db: f64,
    pub frames: usize,
    pub seed: u64,
    pub neurons: Vec<usize>,
    /// `[M_w, N_w]` pairs.
    pub windows: Vec<[usize; 2]>,
    /// Everything except neurons and window sizes.
    pub base: Rc2dParams,
}

impl NmseConfig {
    pub fn validate(&self) -> Result<()> {
        self.otfs.validate()?;
        self.channel.validate(&self.otfs)?;
        blockwise_mask(&self.otfs, self.pilots.rows)?;
        if self.neurons.is_empty() || self.windows.is_empty() {
            return Err(Error::Config("neuron and window grids must be non-empty".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        for &nn in &self.neurons {
            for &[mw, nw] in &self.windows {
                self.cell(nn, mw, nw).validate(&self.otfs)?;
            }
        }
        Ok(())
    }

    pub fn cell(&self, neurons: usize, window_delay: usize, window_doppler: usize) -> Rc2dParams {
        Rc2dParams { neurons, window_delay, window_doppler, ..self.base.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityConfig {
    pub params: ComplexityParams,
    /// Sizes for the sweep; each `M` is combined with each `N`.
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    /// 1D-RC readout size, when it differs from the 2D one.
    #[serde(default)]
    pub rc1d_neurons: Option<usize>,
    #[serde(default)]
    pub rc1d_inputs: Option<usize>,
}

/// Channel-equivalence battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub trials: usize,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub max_paths: usize,
    pub seed: u64,
    pub n_cp: usize,
    #[serde(default = "default_rcp_tol")]
    pub rcp_tolerance: f64,
    #[serde(default = "default_cp_tol")]
    pub cp_tolerance: f64,
    #[serde(default = "default_int_tol")]
    pub integer_tolerance: f64,
    /// Grid for the integer-reduction check.
    pub integer_m: usize,
    pub integer_n: usize,
}

fn default_rcp_tol() -> f64 {
    1e-9
}

fn default_cp_tol() -> f64 {
    1e-7
}

fn default_int_tol() -> f64 {
    1e-12
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.max_paths == 0 || self.m.is_empty() || self.n.is_empty() {
            return Err(Error::Config("verify needs trials, paths and at least one M and N".into()));
        }
        if self.m.iter().chain(&self.n).any(|&d| d == 0) || self.integer_m == 0 || self.integer_n == 0 {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        Ok(())
    }
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse(&text)
}

pub fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// SHA-256 of the canonical TOML rendering.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    let text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}
