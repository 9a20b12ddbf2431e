use serde::{Deserialize, Serialize};

use super::NeuronParams;
use crate::error::{Error, Result};

/// Izhikevich spike peak (mV). Also the cap inside the pseudo-derivative.
pub const IZH_PEAK: f64 = 30.0;
/// Izhikevich post-spike activation.
pub const IZH_RESET_V: f64 = -65.0;
/// Izhikevich resting recovery, `b * v_rest` with `b = 0.2`.
pub const IZH_RESET_A: f64 = -13.0;

/// Hidden and observable state of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HiddenState {
    /// Activation.
    pub v: f64,
    /// Threshold adaptation (ALIF family) or recovery variable (Izhikevich).
    pub a: f64,
    /// Refractory steps left.
    pub refr_remaining: u32,
    /// Spike emitted at the last step.
    pub last_z: bool,
    /// Bit `k` holds the spike emitted `k` steps before the last one.
    pub spike_history: u32,
}

impl HiddenState {
    /// Spike emitted `k` steps before the most recent step, as 0/1.
    #[inline]
    pub fn spike_ago(&self, k: u32) -> f64 {
        ((self.spike_history >> k) & 1) as f64
    }

    #[inline]
    pub fn is_refractory(&self) -> bool {
        self.refr_remaining > 0
    }

    #[inline]
    fn record(&mut self, spike: bool) {
        self.last_z = spike;
        self.spike_history = (self.spike_history << 1) | spike as u32;
    }
}

/// Result of one neuron step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub spike: bool,
    pub psi: f64,
}

#[inline]
fn check_input(weighted_in: f64) -> Result<()> {
    if weighted_in.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("synaptic drive"))
    }
}

/// Triangular pseudo-derivative of the ALIF spike function.
#[inline]
pub fn alif_pseudo_derivative(v: f64, a: f64, params: &NeuronParams) -> f64 {
    let scaled = (v - params.v_th - params.beta * a) / params.v_th;
    params.gamma * (1.0 - scaled.abs()).max(0.0)
}

/// STDP-ALIF pseudo-derivative: `-gamma` while refractory, otherwise the
/// triangle around the base threshold without the adaptation term.
#[inline]
pub fn stdp_alif_pseudo_derivative(v: f64, refractory: bool, params: &NeuronParams) -> f64 {
    if refractory {
        -params.gamma
    } else {
        let scaled = (v - params.v_th) / params.v_th;
        params.gamma * (1.0 - scaled.abs()).max(0.0)
    }
}

#[inline]
pub fn izhikevich_pseudo_derivative(v: f64, gamma: f64) -> f64 {
    gamma * ((v.min(IZH_PEAK) - IZH_PEAK) / IZH_PEAK).exp()
}

/// ALIF update with subtractive reset and explicit refractory clamp.
pub fn alif_step(
    state: &mut HiddenState,
    weighted_in: f64,
    params: &NeuronParams,
) -> Result<StepOutput> {
    check_input(weighted_in)?;
    let z_prev = state.last_z as u8 as f64;
    state.v = params.alpha * state.v + weighted_in - z_prev * params.v_th;
    state.a = params.rho * state.a + z_prev;

    let out = if state.refr_remaining > 0 {
        state.refr_remaining -= 1;
        StepOutput {
            spike: false,
            psi: 0.0,
        }
    } else {
        let spike = state.v - params.v_th - params.beta * state.a > 0.0;
        if spike {
            state.refr_remaining = params.t_refr;
        }
        StepOutput {
            spike,
            psi: alif_pseudo_derivative(state.v, state.a, params),
        }
    };
    state.record(out.spike);
    Ok(out)
}

/// STDP-ALIF update: the activation is reset to (approximately) zero at the
/// spike and again when the refractory window closes.
pub fn stdp_alif_step(
    state: &mut HiddenState,
    weighted_in: f64,
    params: &NeuronParams,
) -> Result<StepOutput> {
    check_input(weighted_in)?;
    let z_prev = state.last_z as u8 as f64;
    let z_refr_ago = if params.t_refr > 0 {
        state.spike_ago(params.t_refr)
    } else {
        0.0
    };
    let decayed = params.alpha * state.v;
    state.v = decayed + weighted_in - (z_prev + z_refr_ago) * decayed;
    state.a = params.rho * state.a + z_prev;

    let out = if state.refr_remaining > 0 {
        state.refr_remaining -= 1;
        StepOutput {
            spike: false,
            psi: stdp_alif_pseudo_derivative(state.v, true, params),
        }
    } else {
        let spike = state.v - params.v_th - params.beta * state.a > 0.0;
        if spike {
            state.refr_remaining = params.t_refr;
        }
        StepOutput {
            spike,
            psi: stdp_alif_pseudo_derivative(state.v, false, params),
        }
    };
    state.record(out.spike);
    Ok(out)
}

/// Self-resetting Izhikevich update (1 ms Euler step, regular-spiking constants).
pub fn izhikevich_step(
    state: &mut HiddenState,
    weighted_in: f64,
    params: &NeuronParams,
) -> Result<StepOutput> {
    check_input(weighted_in)?;
    if !state.v.is_finite() || !state.a.is_finite() {
        return Err(Error::NonFinite("izhikevich state"));
    }
    let z_prev = state.last_z as u8 as f64;
    let v_t = state.v - (state.v - IZH_RESET_V) * z_prev;
    let a_t = state.a + 2.0 * z_prev;
    state.v = v_t + 0.04 * v_t * v_t + 5.0 * v_t + 140.0 - a_t + weighted_in;
    state.a = a_t + 0.004 * v_t - 0.02 * a_t;

    let spike = state.v - IZH_PEAK > 0.0;
    let out = StepOutput {
        spike,
        psi: izhikevich_pseudo_derivative(state.v, params.gamma),
    };
    state.record(spike);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> NeuronParams {
        NeuronParams::default()
    }

    #[test]
    fn alif_pure_decay() {
        let p = params();
        let mut s = HiddenState {
            v: 1.0,
            ..Default::default()
        };
        // 1.0 decays to 0.8, below threshold
        let out = alif_step(&mut s, 0.0, &p).unwrap();
        assert_abs_diff_eq!(s.v, 0.8, epsilon = 1e-15);
        assert!(!out.spike);
    }

    #[test]
    fn alif_spike_then_adaptation_jump() {
        let p = params();
        let mut s = HiddenState {
            v: 1.25,
            ..Default::default()
        };
        // v' = 0.8 * 1.25 = 1.0, H(1.0 - 0.95) = 1
        let out = alif_step(&mut s, 0.0, &p).unwrap();
        assert_abs_diff_eq!(s.v, 1.0, epsilon = 1e-15);
        assert!(out.spike);
        let _ = alif_step(&mut s, 0.0, &p).unwrap();
        assert_abs_diff_eq!(s.a, 1.0, epsilon = 1e-15);
        // soft reset: 0.8 * 1.0 - 0.95
        assert_abs_diff_eq!(s.v, 0.8 - 0.95, epsilon = 1e-15);
    }

    #[test]
    fn alif_pseudo_derivative_endpoints() {
        let p = params();
        assert_abs_diff_eq!(
            alif_pseudo_derivative(p.v_th, 0.0, &p),
            0.3,
            epsilon = 1e-15
        );
        assert_eq!(alif_pseudo_derivative(0.0, 0.0, &p), 0.0);
    }

    #[test]
    fn alif_refractory_clamps_spike_and_psi() {
        let p = params();
        let mut s = HiddenState::default();
        assert!(alif_step(&mut s, 5.0, &p).unwrap().spike);
        for _ in 0..p.t_refr {
            let out = alif_step(&mut s, 50.0, &p).unwrap();
            assert!(!out.spike);
            assert_eq!(out.psi, 0.0);
        }
        assert!(alif_step(&mut s, 50.0, &p).unwrap().spike);
    }

    #[test]
    fn non_finite_drive_rejected() {
        let p = params();
        let mut s = HiddenState::default();
        assert!(matches!(
            alif_step(&mut s, f64::NAN, &p),
            Err(Error::NonFinite(_))
        ));
        assert!(stdp_alif_step(&mut s, f64::INFINITY, &p).is_err());
        let mut s = HiddenState {
            v: IZH_RESET_V,
            a: IZH_RESET_A,
            ..Default::default()
        };
        assert!(izhikevich_step(&mut s, f64::NEG_INFINITY, &p).is_err());
        s.v = f64::NAN;
        assert!(izhikevich_step(&mut s, 0.0, &p).is_err());
    }

    #[test]
    fn stdp_alif_resets_to_zero_at_spike() {
        let p = params();
        let mut s = HiddenState {
            v: 2.0,
            last_z: true,
            spike_history: 1,
            refr_remaining: p.t_refr,
            ..Default::default()
        };
        stdp_alif_step(&mut s, 0.0, &p).unwrap();
        assert_abs_diff_eq!(s.v, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn stdp_alif_psi_negative_while_refractory() {
        let p = params();
        let mut s = HiddenState::default();
        assert!(stdp_alif_step(&mut s, 5.0, &p).unwrap().spike);
        for _ in 0..p.t_refr {
            let out = stdp_alif_step(&mut s, 0.0, &p).unwrap();
            assert_abs_diff_eq!(out.psi, -0.3, epsilon = 1e-15);
        }
        let out = stdp_alif_step(&mut s, 0.0, &p).unwrap();
        assert!(out.psi >= 0.0);
        assert_abs_diff_eq!(
            stdp_alif_pseudo_derivative(p.v_th, false, &p),
            0.3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn stdp_alif_second_reset_when_refractoriness_ends() {
        let p = params();
        let mut s = HiddenState::default();
        assert!(stdp_alif_step(&mut s, 5.0, &p).unwrap().spike);
        // refractory steps charge the neuron without letting it fire
        stdp_alif_step(&mut s, 0.5, &p).unwrap();
        stdp_alif_step(&mut s, 0.5, &p).unwrap();
        let before = s.v;
        assert!(before > 0.0);
        stdp_alif_step(&mut s, 0.0, &p).unwrap();
        // alpha*v - alpha*v: reset triggered by the spike t_refr steps back
        assert_abs_diff_eq!(s.v, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn izhikevich_reset_substitution() {
        let p = params();
        let mut s = HiddenState {
            v: 40.0,
            a: 1.0,
            last_z: true,
            spike_history: 1,
            ..Default::default()
        };
        izhikevich_step(&mut s, 0.0, &p).unwrap();
        // v~ = -65, a~ = 3
        let v_t = -65.0;
        let a_t = 3.0;
        assert_abs_diff_eq!(
            s.v,
            v_t + 0.04 * v_t * v_t + 5.0 * v_t + 140.0 - a_t,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(s.a, a_t + 0.004 * v_t - 0.02 * a_t, epsilon = 1e-12);
    }

    #[test]
    fn izhikevich_rest_step_matches_hand_evaluation() {
        let p = params();
        let mut s = HiddenState {
            v: -65.0,
            a: -13.0,
            ..Default::default()
        };
        izhikevich_step(&mut s, 0.0, &p).unwrap();
        // -65 + 169 - 325 + 140 + 13
        assert_abs_diff_eq!(s.v, -68.0, epsilon = 1e-12);
        // -13 - 0.26 + 0.26
        assert_abs_diff_eq!(s.a, -13.0, epsilon = 1e-12);
    }

    #[test]
    fn izhikevich_psi_values() {
        assert_abs_diff_eq!(
            izhikevich_pseudo_derivative(30.0, 0.3),
            0.3,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            izhikevich_pseudo_derivative(45.0, 0.3),
            0.3,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            izhikevich_pseudo_derivative(0.0, 0.3),
            0.110_363_832_351_432_7,
            epsilon = 1e-12
        );
    }
}
