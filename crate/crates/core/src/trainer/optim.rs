use serde::{Deserialize, Serialize};

/// Added to `sqrt(v_hat)` in the Adam denominator.
pub const ADAM_EPS: f64 = 1e-5;

/// Adam moments for a list of flat tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<Vec<f64>>,
    pub v2: Vec<Vec<f64>>,
    /// Updates applied so far.
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(lens: &[usize]) -> Self {
        Self {
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v2: lens.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .chain(&self.v2)
            .flatten()
            .all(|x| x.is_finite())
    }
}

/// One Adam update. `grads` are minibatch means, one slice per tensor.
/// Returns the weight deltas in the same layout.
pub fn adam_apply(
    opt: &mut OptimizerState,
    grads: &[&[f64]],
    eta_eff: f64,
    beta1: f64,
    beta2: f64,
) -> Vec<Vec<f64>> {
    assert_eq!(grads.len(), opt.m.len(), "tensor count");
    let i = opt.step_count as i32 + 1;
    let c1 = 1.0 - beta1.powi(i);
    let c2 = 1.0 - beta2.powi(i);
    let deltas = grads
        .iter()
        .zip(opt.m.iter_mut().zip(opt.v2.iter_mut()))
        .map(|(g, (m, v2))| {
            assert_eq!(g.len(), m.len(), "tensor length");
            g.iter()
                .zip(m.iter_mut().zip(v2.iter_mut()))
                .map(|(&g, (m, v2))| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v2 = beta2 * *v2 + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v2 / c2;
                    -eta_eff * m_hat / (v_hat.sqrt() + ADAM_EPS)
                })
                .collect()
        })
        .collect();
    opt.step_count += 1;
    deltas
}

/// Linear ramp from `eta / iters_per_epoch` to `eta` over the first epoch.
pub fn lr_warmup(iter_index: usize, iters_per_epoch: usize, eta: f64) -> f64 {
    let ipe = iters_per_epoch.max(1);
    eta * ((iter_index + 1) as f64 / ipe as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn first_step_bias_correction() {
        let mut opt = OptimizerState::new(&[3]);
        let g = [0.5, -2.0, 1e-3];
        let d = adam_apply(&mut opt, &[&g], 0.01, 0.9, 0.999);
        for (dw, g) in d[0].iter().zip(g) {
            assert_abs_diff_eq!(*dw, -0.01 * g / (g.abs() + 1e-5), epsilon = 1e-15);
        }
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut opt = OptimizerState::new(&[4]);
        for _ in 0..50 {
            let d = adam_apply(&mut opt, &[&[0.0; 4]], 0.01, 0.9, 0.999);
            assert!(d[0].iter().all(|&x| x == 0.0));
        }
        assert_eq!(opt.step_count, 50);
    }

    #[test]
    fn constant_gradient_is_sign_like() {
        for scale in [1.0, 10.0] {
            let mut opt = OptimizerState::new(&[2]);
            let g = [0.3 * scale, -0.7 * scale];
            let mut last = vec![];
            for _ in 0..100 {
                last = adam_apply(&mut opt, &[&g], 0.01, 0.9, 0.999).remove(0);
            }
            for (d, g) in last.iter().zip(g) {
                assert_abs_diff_eq!(d.abs(), 0.01, epsilon = 1e-4);
                assert_eq!(d.signum(), -g.signum());
            }
        }
    }

    #[test]
    fn warmup_ramp() {
        assert_abs_diff_eq!(lr_warmup(0, 100, 0.01), 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(lr_warmup(49, 100, 0.01), 0.005, epsilon = 1e-18);
        assert_eq!(lr_warmup(99, 100, 0.01), 0.01);
        assert_eq!(lr_warmup(250, 100, 0.01), 0.01);
    }

    proptest! {
        #[test]
        fn second_moment_non_negative(gs in proptest::collection::vec(-1e3..1e3f64, 1..40)) {
            let mut opt = OptimizerState::new(&[1]);
            for g in gs {
                let d = adam_apply(&mut opt, &[&[g]], 0.01, 0.9, 0.999);
                prop_assert!(opt.v2[0][0] >= 0.0);
                prop_assert!(d[0][0].is_finite());
            }
        }
    }
}
