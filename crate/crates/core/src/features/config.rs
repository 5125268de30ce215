use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub n_channels: usize,
    /// Static cepstra per frame for mfcc/pncc/rcgcc/spcc.
    pub n_static: usize,
    pub delta_window: usize,
    pub spcc_energy_fraction: f64,
    pub pncc_power_exponent: f64,
    /// Half-width of the PNCC medium-time window, in frames.
    pub pncc_medium_window: usize,
    pub rcgcc_smoothing: f64,
    /// LPC order for PLP; one log-energy term is appended to the cepstra.
    pub plp_model_order: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            frame_len: 2048,
            hop: 1024,
            n_channels: 40,
            n_static: 20,
            delta_window: 2,
            spcc_energy_fraction: 0.90,
            pncc_power_exponent: 1.0 / 15.0,
            pncc_medium_window: 2,
            rcgcc_smoothing: 0.9,
            plp_model_order: 12,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(format!("feature config: {m}")));
        if self.hop == 0 || self.hop > self.frame_len {
            return fail("need 0 < hop <= frame_len");
        }
        if self.n_static == 0 || self.n_static > self.n_channels {
            return fail("need 0 < n_static <= n_channels");
        }
        if self.delta_window == 0 {
            return fail("delta_window must be at least 1");
        }
        if !(self.spcc_energy_fraction > 0.0 && self.spcc_energy_fraction <= 1.0) {
            return fail("spcc_energy_fraction must lie in (0, 1]");
        }
        if !(self.pncc_power_exponent > 0.0 && self.pncc_power_exponent < 1.0) {
            return fail("pncc_power_exponent must lie in (0, 1)");
        }
        if !(self.rcgcc_smoothing > 0.0 && self.rcgcc_smoothing < 1.0) {
            return fail("rcgcc_smoothing must lie in (0, 1)");
        }
        if self.plp_model_order == 0 || self.plp_model_order >= self.n_channels + 2 {
            return fail("plp_model_order must be positive and below the auditory spectrum length");
        }
        Ok(())
    }
}
