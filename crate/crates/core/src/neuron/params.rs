use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neuron model shared by every neuron of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Alif,
    StdpAlif,
    Izhikevich,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alif" => Ok(ModelKind::Alif),
            "stdp-alif" | "stdp_alif" | "stdpalif" => Ok(ModelKind::StdpAlif),
            "izhikevich" | "izh" => Ok(ModelKind::Izhikevich),
            other => Err(Error::Config(format!("unknown neuron model {other:?}"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Alif => "alif",
            ModelKind::StdpAlif => "stdp-alif",
            ModelKind::Izhikevich => "izhikevich",
        })
    }
}

/// Per-neuron constants. Defaults follow the hyperparameter table used for all
/// reported networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    /// Activity leak per step.
    pub alpha: f64,
    /// Threshold adaptation leak per step.
    pub rho: f64,
    /// Adaptation strength; 0 turns an ALIF neuron into a LIF neuron.
    pub beta: f64,
    /// Decay of the readout and of the filtered eligibility trace.
    pub kappa: f64,
    /// Pseudo-derivative dampening.
    pub gamma: f64,
    /// Base firing threshold.
    pub v_th: f64,
    /// Refractory period in steps.
    pub t_refr: u32,
    /// Step duration in milliseconds.
    pub dt_ms: f64,
    /// Clip the Izhikevich eligibility vector after every update.
    pub clip_izhikevich: bool,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            rho: 0.975,
            beta: 0.184,
            kappa: 0.8,
            gamma: 0.3,
            v_th: 0.95,
            t_refr: 2,
            dt_ms: 1.0,
            clip_izhikevich: true,
        }
    }
}

impl NeuronParams {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha, self.rho, self.beta, self.kappa, self.gamma, self.v_th, self.dt_ms,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("neuron parameters must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0,1), got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!(
                "rho must be in [0,1), got {}",
                self.rho
            )));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::Config(format!(
                "kappa must be in [0,1], got {}",
                self.kappa
            )));
        }
        if self.beta < 0.0 {
            return Err(Error::Config("beta must be non-negative".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.v_th <= 0.0 {
            return Err(Error::Config("v_th must be positive".into()));
        }
        if self.dt_ms <= 0.0 {
            return Err(Error::Config("dt_ms must be positive".into()));
        }
        // spike history is a u32 shift register
        if self.t_refr > 31 {
            return Err(Error::Config("t_refr must be at most 31 steps".into()));
        }
        Ok(())
    }
}
