//! Spiking neuron dynamics and per-synapse eligibility recursions.
//!
//! Three models share one interface:
//!
//! - [`ModelKind::Alif`]: leaky integrate-and-fire with a spike-driven adaptive
//!   threshold and soft (subtractive) reset. `beta = 0` gives plain LIF.
//! - [`ModelKind::StdpAlif`]: ALIF with a hard reset at the spike and again when
//!   refractoriness ends, and a negative pseudo-derivative while refractory.
//! - [`ModelKind::Izhikevich`]: self-resetting quadratic model with a recovery
//!   variable; its eligibility vector is clipped to keep it bounded.
//!
//! A step maps the hidden state at `t-1` to the state at `t` and returns the
//! observable spike `z^t` together with the pseudo-derivative `psi^t` evaluated
//! on the new state. The eligibility vector of a synapse is advanced with the
//! hidden-state Jacobian of the *previous* transition and then contracted with
//! the current `dz/dh` to produce the eligibility trace, see [`Jacobian`] and
//! [`TraceCoef`].

mod eligibility;
mod params;
mod state;

pub use eligibility::{
    alif_eligibility_step, izhikevich_eligibility_step, stdp_alif_eligibility_step, ClipBounds,
    EligibilityState, Jacobian, TraceCoef, IZH_EPS_A_BOUND, IZH_EPS_V_BOUND,
};
pub use params::{ModelKind, NeuronParams};
pub use state::{
    alif_pseudo_derivative, alif_step, izhikevich_pseudo_derivative, izhikevich_step,
    stdp_alif_pseudo_derivative, stdp_alif_step, HiddenState, StepOutput, IZH_PEAK, IZH_RESET_A,
    IZH_RESET_V,
};

use crate::error::Result;

impl ModelKind {
    /// Resting hidden state at the start of a sample.
    pub fn initial_state(self) -> HiddenState {
        match self {
            ModelKind::Alif | ModelKind::StdpAlif => HiddenState::default(),
            ModelKind::Izhikevich => HiddenState {
                v: IZH_RESET_V,
                a: IZH_RESET_A,
                ..HiddenState::default()
            },
        }
    }

    /// Advances one neuron by one step.
    #[inline]
    pub fn step(
        self,
        state: &mut HiddenState,
        weighted_in: f64,
        params: &NeuronParams,
    ) -> Result<StepOutput> {
        match self {
            ModelKind::Alif => alif_step(state, weighted_in, params),
            ModelKind::StdpAlif => stdp_alif_step(state, weighted_in, params),
            ModelKind::Izhikevich => izhikevich_step(state, weighted_in, params),
        }
    }

    /// Jacobian of the transition out of `state` (which must hold `h^t`, `z^t`),
    /// with spikes treated as constants in the reset terms.
    #[inline]
    pub fn jacobian(self, state: &HiddenState, psi: f64, params: &NeuronParams) -> Jacobian {
        match self {
            ModelKind::Alif => Jacobian {
                vv: params.alpha,
                va: 0.0,
                av: psi,
                aa: params.rho - psi * params.beta,
            },
            ModelKind::StdpAlif => {
                let z_now = state.spike_ago(0);
                let z_refr = if params.t_refr > 0 {
                    state.spike_ago(params.t_refr)
                } else {
                    0.0
                };
                Jacobian {
                    vv: params.alpha * (1.0 - z_now - z_refr),
                    va: 0.0,
                    av: psi,
                    aa: params.rho - psi * params.beta,
                }
            }
            ModelKind::Izhikevich => {
                let keep = 1.0 - state.spike_ago(0);
                Jacobian {
                    vv: keep * (6.0 + 0.08 * state.v),
                    va: -1.0,
                    av: 0.004 * keep,
                    aa: 0.98,
                }
            }
        }
    }

    /// `dz^t/dh^t` with the Heaviside derivative replaced by `psi`.
    #[inline]
    pub fn trace_coef(self, psi: f64, params: &NeuronParams) -> TraceCoef {
        match self {
            ModelKind::Alif | ModelKind::StdpAlif => TraceCoef {
                v: psi,
                a: -params.beta * psi,
            },
            ModelKind::Izhikevich => TraceCoef { v: psi, a: 0.0 },
        }
    }

    /// Clip bounds applied to the eligibility vector after every update.
    #[inline]
    pub fn clip_bounds(self, params: &NeuronParams) -> Option<ClipBounds> {
        match self {
            ModelKind::Izhikevich if params.clip_izhikevich => Some(ClipBounds::IZHIKEVICH),
            _ => None,
        }
    }
}
