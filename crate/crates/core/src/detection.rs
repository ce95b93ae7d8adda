//! Output record shared by every detector.

use crate::modem::{qam_demap_nearest, quantize, DdGrid, OtfsConfig};
use crate::numerics::C64;
use crate::pilots::FramePlan;

#[derive(Debug, Clone)]
pub struct Detection {
    /// Unquantized estimate of the whole grid.
    pub soft: DdGrid,
    /// Data symbols after quantization, in `vec` order.
    pub data_symbols: Vec<C64>,
    pub bits: Vec<u8>,
    /// Masked training NMSE for learned detectors.
    pub train_nmse: Option<f64>,
}

impl Detection {
    pub fn from_soft(soft: DdGrid, plan: &FramePlan, cfg: &OtfsConfig, train_nmse: Option<f64>) -> Self {
        let data_symbols = quantize(&plan.data_symbols(&soft), cfg.modulation);
        let bits = qam_demap_nearest(&data_symbols, cfg.modulation);
        Self { soft, data_symbols, bits, train_nmse }
    }

    pub fn bit_errors(&self, plan: &FramePlan) -> usize {
        self.bits.iter().zip(&plan.data_bits).filter(|(a, b)| a != b).count()
    }

    /// `‖x̂ - x‖² / ‖x‖²` over the data positions, before quantization.
    pub fn data_nmse(&self, plan: &FramePlan) -> f64 {
        let est = plan.data_symbols(&self.soft);
        let truth = plan.data_symbols(&plan.x);
        let num: f64 = est.iter().zip(&truth).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = truth.iter().map(|b| b.norm_sqr()).sum();
        if den == 0.0 { 0.0 } else { num / den }
    }
}
