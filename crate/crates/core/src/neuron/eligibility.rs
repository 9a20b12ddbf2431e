use serde::{Deserialize, Serialize};

use super::NeuronParams;

pub const IZH_EPS_V_BOUND: f64 = 3.0;
pub const IZH_EPS_A_BOUND: f64 = 0.005;

/// Partial derivatives of `h^{t+1}` with respect to `h^t = (v, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jacobian {
    /// dv'/dv
    pub vv: f64,
    /// dv'/da
    pub va: f64,
    /// da'/dv
    pub av: f64,
    /// da'/da
    pub aa: f64,
}

/// `dz^t/dh^t` with the surrogate derivative substituted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceCoef {
    pub v: f64,
    pub a: f64,
}

/// Closed clipping intervals `[-v, v]` and `[-a, a]` for the eligibility vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipBounds {
    pub v: f64,
    pub a: f64,
}

impl ClipBounds {
    pub const IZHIKEVICH: ClipBounds = ClipBounds {
        v: IZH_EPS_V_BOUND,
        a: IZH_EPS_A_BOUND,
    };
}

/// Eligibility vector of one synapse plus its kappa-filtered trace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EligibilityState {
    pub eps_v: f64,
    pub eps_a: f64,
    /// Low-pass filtered eligibility trace.
    pub trace_filtered: f64,
}

impl EligibilityState {
    /// `eps <- J * eps + (presyn, 0)`, both components from the old vector.
    #[inline]
    pub fn advance(&mut self, jac: &Jacobian, presyn: f64, clip: Option<ClipBounds>) {
        let eps_v = jac.vv * self.eps_v + jac.va * self.eps_a + presyn;
        let eps_a = jac.av * self.eps_v + jac.aa * self.eps_a;
        match clip {
            Some(b) => {
                self.eps_v = eps_v.clamp(-b.v, b.v);
                self.eps_a = eps_a.clamp(-b.a, b.a);
            }
            None => {
                self.eps_v = eps_v;
                self.eps_a = eps_a;
            }
        }
    }

    #[inline]
    pub fn trace(&self, coef: &TraceCoef) -> f64 {
        coef.v * self.eps_v + coef.a * self.eps_a
    }

    /// `ebar <- kappa * ebar + e`; returns the new filtered value.
    #[inline]
    pub fn filter(&mut self, e: f64, kappa: f64) -> f64 {
        self.trace_filtered = kappa * self.trace_filtered + e;
        self.trace_filtered
    }
}

/// One ALIF eligibility update where `psi` both enters the Jacobian and
/// contracts the new vector. Returns the eligibility trace `e`.
///
/// `eps_a` is written first because its update reads only the old `eps_v`,
/// so no temporary copy is needed.
pub fn alif_eligibility_step(
    elig: &mut EligibilityState,
    psi: f64,
    presyn: f64,
    params: &NeuronParams,
) -> f64 {
    elig.eps_a = psi * elig.eps_v + (params.rho - psi * params.beta) * elig.eps_a;
    elig.eps_v = params.alpha * elig.eps_v + presyn;
    let e = psi * (elig.eps_v - params.beta * elig.eps_a);
    elig.filter(e, params.kappa);
    e
}

/// STDP-ALIF eligibility update. `spike_now` is `z^t` and `spike_refr_ago`
/// is `z^{t - t_refr}` of the efferent neuron.
pub fn stdp_alif_eligibility_step(
    elig: &mut EligibilityState,
    psi: f64,
    presyn: f64,
    spike_now: bool,
    spike_refr_ago: bool,
    params: &NeuronParams,
) -> f64 {
    let keep = 1.0 - spike_now as u8 as f64 - spike_refr_ago as u8 as f64;
    elig.eps_a = psi * elig.eps_v + (params.rho - psi * params.beta) * elig.eps_a;
    elig.eps_v = params.alpha * keep * elig.eps_v + presyn;
    let e = psi * (elig.eps_v - params.beta * elig.eps_a);
    elig.filter(e, params.kappa);
    e
}

/// Izhikevich eligibility update. `v` is the efferent activation before the
/// update. Clipping follows `params.clip_izhikevich`.
pub fn izhikevich_eligibility_step(
    elig: &mut EligibilityState,
    psi: f64,
    presyn: f64,
    spike_now: bool,
    v: f64,
    params: &NeuronParams,
) -> f64 {
    let keep = 1.0 - spike_now as u8 as f64;
    let jac = Jacobian {
        vv: keep * (6.0 + 0.08 * v),
        va: -1.0,
        av: 0.004 * keep,
        aa: 0.98,
    };
    let clip = params.clip_izhikevich.then_some(ClipBounds::IZHIKEVICH);
    elig.advance(&jac, presyn, clip);
    let e = psi * elig.eps_v;
    elig.filter(e, params.kappa);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p() -> NeuronParams {
        NeuronParams::default()
    }

    #[test]
    fn lif_mode_low_pass() {
        let params = p().with_beta(0.0);
        let mut el = EligibilityState::default();
        alif_eligibility_step(&mut el, 0.3, 1.0, &params);
        assert_eq!(el.eps_v, 1.0);
        alif_eligibility_step(&mut el, 0.3, 0.0, &params);
        assert_abs_diff_eq!(el.eps_v, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn refractory_psi_zero_gives_zero_trace() {
        let mut el = EligibilityState {
            eps_v: 2.0,
            eps_a: -1.0,
            trace_filtered: 0.0,
        };
        assert_eq!(alif_eligibility_step(&mut el, 0.0, 1.0, &p()), 0.0);
    }

    #[test]
    fn alif_worked_example() {
        // Independent evaluation of the update written out term by term.
        let (psi, beta, rho, alpha) = (0.3_f64, 0.184_f64, 0.975_f64, 0.8_f64);
        let (ev, ea) = (1.0_f64, 0.5_f64);
        let oracle_ea = psi * ev + (rho - psi * beta) * ea;
        let oracle_ev = alpha * ev;
        let oracle_e = psi * (oracle_ev - beta * oracle_ea);
        assert_abs_diff_eq!(oracle_ea, 0.7599, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle_e, 0.198_053_52, epsilon = 1e-12);

        let mut el = EligibilityState {
            eps_v: ev,
            eps_a: ea,
            trace_filtered: 0.0,
        };
        let e = alif_eligibility_step(&mut el, psi, 0.0, &p());
        assert_abs_diff_eq!(el.eps_a, 0.7599, epsilon = 1e-12);
        assert_abs_diff_eq!(el.eps_v, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(e, 0.198_053_52, epsilon = 1e-12);
        assert_abs_diff_eq!(e, 0.19806, epsilon = 1e-5);
    }

    #[test]
    fn stdp_spike_erases_activation_history() {
        let mut el = EligibilityState {
            eps_v: 4.0,
            eps_a: 0.0,
            trace_filtered: 0.0,
        };
        stdp_alif_eligibility_step(&mut el, 0.1, 0.5, true, false, &p());
        assert_eq!(el.eps_v, 0.5);
    }

    #[test]
    fn stdp_negative_trace_during_refractory() {
        let params = p().with_beta(0.0);
        let mut el = EligibilityState::default();
        let e = stdp_alif_eligibility_step(&mut el, -0.3, 1.0, false, false, &params);
        assert_abs_diff_eq!(e, -0.3, epsilon = 1e-15);
    }

    #[test]
    fn izhikevich_zero_state_injection() {
        let mut el = EligibilityState::default();
        izhikevich_eligibility_step(&mut el, 0.2, 1.0, false, -65.0, &p());
        assert_eq!(el.eps_v, 1.0);
        assert_eq!(el.eps_a, 0.0);
    }

    #[test]
    fn izhikevich_clipping() {
        let mut el = EligibilityState {
            eps_v: 1.0,
            eps_a: 0.0,
            trace_filtered: 0.0,
        };
        // (6 + 0.08*(-10)) * 1 + 0 = 5.2 before clipping
        izhikevich_eligibility_step(&mut el, 0.2, 0.0, false, -10.0, &p());
        assert_eq!(el.eps_v, 3.0);
        assert_eq!(el.eps_a, 0.004);

        let mut unclipped = EligibilityState {
            eps_v: 1.0,
            ..Default::default()
        };
        let params = NeuronParams {
            clip_izhikevich: false,
            ..p()
        };
        izhikevich_eligibility_step(&mut unclipped, 0.2, 0.0, false, -10.0, &params);
        assert_abs_diff_eq!(unclipped.eps_v, 5.2, epsilon = 1e-12);
    }

    #[test]
    fn izhikevich_spike_kills_activation_term() {
        let mut el = EligibilityState {
            eps_v: 2.0,
            eps_a: 0.001,
            trace_filtered: 0.0,
        };
        izhikevich_eligibility_step(&mut el, 0.3, 1.0, true, 35.0, &p());
        assert_abs_diff_eq!(el.eps_v, 1.0 - 0.001, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn stdp_without_spikes_matches_alif_lif_mode(
            ev in -5.0..5.0f64, ea in -5.0..5.0f64, psi in -0.3..0.3f64, pre in 0.0..1.0f64
        ) {
            let params = p().with_beta(0.0);
            let mut a = EligibilityState { eps_v: ev, eps_a: ea, trace_filtered: 0.1 };
            let mut b = a;
            let ea_ = alif_eligibility_step(&mut a, psi, pre, &params);
            let eb_ = stdp_alif_eligibility_step(&mut b, psi, pre, false, false, &params);
            prop_assert_eq!(a, b);
            prop_assert_eq!(ea_, eb_);
        }

        #[test]
        fn in_place_matches_two_buffer(
            ev in -5.0..5.0f64, ea in -5.0..5.0f64, psi in 0.0..0.3f64, pre in 0.0..1.0f64,
            beta in 0.0..0.5f64
        ) {
            let params = p().with_beta(beta);
            let mut in_place = EligibilityState { eps_v: ev, eps_a: ea, trace_filtered: 0.0 };
            alif_eligibility_step(&mut in_place, psi, pre, &params);

            let mut buffered = EligibilityState { eps_v: ev, eps_a: ea, trace_filtered: 0.0 };
            let jac = Jacobian { vv: params.alpha, va: 0.0, av: psi, aa: params.rho - psi * beta };
            buffered.advance(&jac, pre, None);
            prop_assert_eq!(in_place.eps_v, buffered.eps_v);
            prop_assert_eq!(in_place.eps_a, buffered.eps_a);
        }

        #[test]
        fn izhikevich_clipped_bounds_hold(
            ev in -3.0..3.0f64, ea in -0.005..0.005f64, v in -90.0..40.0f64,
            pre in 0.0..1.0f64, z in any::<bool>()
        ) {
            let mut el = EligibilityState { eps_v: ev, eps_a: ea, trace_filtered: 0.0 };
            izhikevich_eligibility_step(&mut el, 0.3, pre, z, v, &p());
            prop_assert!(el.eps_v.abs() <= 3.0);
            prop_assert!(el.eps_a.abs() <= 0.005);
        }
    }
}
