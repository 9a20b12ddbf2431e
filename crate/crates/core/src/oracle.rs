//! Reference gradients for small networks: reverse-mode differentiation of the
//! unrolled network and central finite differences on the readout.
//!
//! The reverse sweep uses the same pseudo-derivatives as the online rule. By
//! default the spike's effect on its own neuron's reset is held constant, the
//! same factorization the eligibility vectors use, so with no recurrent
//! connections the two gradients coincide.

use crate::dataset::Utterance;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{forward_step, NetworkParams, NetworkState};
use crate::neuron::{HiddenState, Jacobian, ModelKind, TraceCoef, IZH_RESET_V};
use crate::trainer::{run_sample, Gradients, Mode, RegConfig};

pub const MAX_ORACLE_NEURONS: usize = 32;
pub const MAX_ORACLE_STEPS: usize = 64;

/// How the spike enters its own neuron's reset terms in the reverse sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResetGradient {
    /// Reset terms are constants.
    #[default]
    Detached,
    /// Reset terms are differentiated through the pseudo-derivative.
    Attached,
}

/// Forward quantities of one layer at one step.
#[derive(Clone)]
struct LayerTape {
    z: Vec<f64>,
    z_prev: Vec<f64>,
    jac: Vec<Jacobian>,
    coef: Vec<TraceCoef>,
    post: Vec<HiddenState>,
}

fn check_limits(params: &NetworkParams, utt: &Utterance) -> Result<()> {
    if params.total_neurons() > MAX_ORACLE_NEURONS || utt.len() > MAX_ORACLE_STEPS {
        return Err(Error::OracleLimit(format!(
            "{} neurons x {} steps exceeds {} x {}",
            params.total_neurons(),
            utt.len(),
            MAX_ORACLE_NEURONS,
            MAX_ORACLE_STEPS
        )));
    }
    if utt.is_empty() {
        return Err(Error::Input("empty utterance".into()));
    }
    Ok(())
}

/// `d h^{t+1} / d z^t` through the reset terms, as (dv, da).
fn reset_partial(model: ModelKind, post: &HiddenState, params: &NetworkParams) -> (f64, f64) {
    let np = &params.neuron;
    match model {
        ModelKind::Alif => (-np.v_th, 0.0),
        ModelKind::StdpAlif => (-np.alpha * post.v, 0.0),
        ModelKind::Izhikevich => {
            let z = post.last_z as u8 as f64;
            let v_t = post.v - (post.v - IZH_RESET_V) * z;
            let dv_tilde = -(post.v - IZH_RESET_V);
            (
                (6.0 + 0.08 * v_t) * dv_tilde - 2.0,
                0.004 * dv_tilde + 0.98 * 2.0,
            )
        }
    }
}

/// Exact gradient of the summed cross-entropy with respect to every trainable
/// tensor, pseudo-derivatives in place of the spike derivative.
pub fn bptt_gradient(params: &NetworkParams, utt: &Utterance) -> Result<Gradients> {
    bptt_gradient_with(params, utt, ResetGradient::Detached)
}

pub fn bptt_gradient_with(
    params: &NetworkParams,
    utt: &Utterance,
    reset: ResetGradient,
) -> Result<Gradients> {
    check_limits(params, utt)?;
    let model = params.config.model;
    let n_layers = params.n_layers();
    let k_out = params.n_outputs();
    let big_t = utt.len();

    let mut state = NetworkState::new(params);
    let mut tape: Vec<Vec<LayerTape>> = Vec::with_capacity(big_t);
    let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(big_t);
    for t in 0..big_t {
        forward_step(params, &mut state, utt.frames.row(t))?;
        let label = utt.labels[t] as usize;
        residuals.push(
            state
                .readout
                .pi
                .iter()
                .enumerate()
                .map(|(k, p)| p - (k == label) as u8 as f64)
                .collect(),
        );
        tape.push(
            state
                .layers
                .iter()
                .enumerate()
                .map(|(r, ls)| LayerTape {
                    z: ls.z.clone(),
                    z_prev: ls.z_prev.clone(),
                    jac: ls.jac.clone(),
                    coef: (0..ls.z.len())
                        .map(|j| model.trace_coef(ls.psi[j], &params.neuron_params(r, j)))
                        .collect(),
                    post: ls.neurons.clone(),
                })
                .collect(),
        );
    }

    let mut grads = Gradients::zeros_like(params);
    let kappa = params.neuron.kappa;
    let t_refr = params.neuron.t_refr as usize;
    let sizes: Vec<usize> = params.layers.iter().map(|l| l.size()).collect();
    let offsets: Vec<usize> = (0..n_layers).map(|r| params.layer_offset(r)).collect();

    // adjoints of the hidden state, indexed [t][layer][neuron]
    let mut gv = vec![vec![Vec::new(); n_layers]; big_t];
    let mut ga = vec![vec![Vec::new(); n_layers]; big_t];
    let mut gy = vec![0.0; k_out];

    for t in (0..big_t).rev() {
        for (g, r) in gy.iter_mut().zip(&residuals[t]) {
            *g = r + kappa * *g;
        }
        for k in 0..k_out {
            grads.bias[k] += gy[k];
        }
        for r in (0..n_layers).rev() {
            let n = sizes[r];
            let tp = &tape[t][r];
            let mut gz = vec![0.0; n];
            for j in 0..n {
                let col = offsets[r] + j;
                gz[j] = (0..k_out)
                    .map(|k| params.w_out.get(k, col) * gy[k])
                    .sum::<f64>();
                if tp.z[j] != 0.0 {
                    for k in 0..k_out {
                        let v = grads.w_out.get(k, col) + gy[k];
                        grads.w_out.set(k, col, v);
                    }
                }
            }
            if t + 1 < big_t {
                let w_rec = &params.layers[r].w_rec;
                for (i, &gd) in gv[t + 1][r].iter().enumerate() {
                    for j in 0..n {
                        gz[j] += w_rec.get(i, j) * gd;
                    }
                }
            }
            if r + 1 < n_layers {
                let w_next = &params.layers[r + 1].w_in;
                for (i, &gd) in gv[t][r + 1].iter().enumerate() {
                    for j in 0..n {
                        gz[j] += w_next.get(i, j) * gd;
                    }
                }
            }
            if reset == ResetGradient::Attached {
                for j in 0..n {
                    if t + 1 < big_t {
                        let (dv, da) = reset_partial(model, &tp.post[j], params);
                        gz[j] += dv * gv[t + 1][r][j] + da * ga[t + 1][r][j];
                    }
                    // delayed second reset of the hard-reset model
                    let td = t + 1 + t_refr;
                    if model == ModelKind::StdpAlif && t_refr > 0 && td < big_t {
                        let v_before = tape[td - 1][r].post[j].v;
                        gz[j] += -params.neuron.alpha * v_before * gv[td][r][j];
                    }
                }
            }

            let mut gv_t = vec![0.0; n];
            let mut ga_t = vec![0.0; n];
            for j in 0..n {
                let c = &tp.coef[j];
                gv_t[j] = c.v * gz[j];
                ga_t[j] = c.a * gz[j];
                if t + 1 < big_t {
                    let jac = &tp.jac[j];
                    let (nv, na) = (gv[t + 1][r][j], ga[t + 1][r][j]);
                    gv_t[j] += jac.vv * nv + jac.av * na;
                    ga_t[j] += jac.va * nv + jac.aa * na;
                }
            }

            let layer = &params.layers[r];
            let g = &mut grads.layers[r];
            let pre: &[f64] = if r == 0 {
                utt.frames.row(t)
            } else {
                &tape[t][r - 1].z
            };
            for j in 0..n {
                for &c in layer.in_mask.row_cols(j) {
                    let c = c as usize;
                    let v = g.w_in.get(j, c) + gv_t[j] * pre[c];
                    g.w_in.set(j, c, v);
                }
                for &c in layer.rec_mask.row_cols(j) {
                    let c = c as usize;
                    let v = g.w_rec.get(j, c) + gv_t[j] * tp.z_prev[c];
                    g.w_rec.set(j, c, v);
                }
            }
            gv[t][r] = gv_t;
            ga[t][r] = ga_t;
        }
    }
    Ok(grads)
}

/// Summed cross-entropy of one full forward pass.
fn loss(params: &NetworkParams, utt: &Utterance) -> Result<f64> {
    Ok(run_sample(params, utt, Mode::Eval, &RegConfig::NONE)?
        .stats
        .xent)
}

/// Central differences of the cross-entropy with respect to `w_out` and `bias`.
/// Spikes do not depend on the readout, so these derivatives are smooth.
pub fn finite_difference_readout(
    params: &NetworkParams,
    utt: &Utterance,
    h: f64,
) -> Result<(Matrix, Vec<f64>)> {
    let mut p = params.clone();
    let mut w_out = Matrix::zeros(p.w_out.rows(), p.w_out.cols());
    for k in 0..w_out.rows() {
        for j in 0..w_out.cols() {
            let w = p.w_out.get(k, j);
            p.w_out.set(k, j, w + h);
            let up = loss(&p, utt)?;
            p.w_out.set(k, j, w - h);
            let down = loss(&p, utt)?;
            p.w_out.set(k, j, w);
            w_out.set(k, j, (up - down) / (2.0 * h));
        }
    }
    let mut bias = vec![0.0; p.bias.len()];
    for (k, g) in bias.iter_mut().enumerate() {
        let b = p.bias[k];
        p.bias[k] = b + h;
        let up = loss(&p, utt)?;
        p.bias[k] = b - h;
        let down = loss(&p, utt)?;
        p.bias[k] = b;
        *g = (up - down) / (2.0 * h);
    }
    Ok((w_out, bias))
}

/// Agreement between two flattened gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorReport {
    pub max_abs_diff: f64,
    /// `|a - b| / |b|`; 0 when both vanish.
    pub rel_err: f64,
    /// 1 when both vanish, 0 when exactly one does.
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub tensors: Vec<(String, TensorReport)>,
}

impl GradientReport {
    pub fn get(&self, name: &str) -> Option<&TensorReport> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }
}

/// Compares `estimate` against `reference`.
pub fn compare_slices(estimate: &[f64], reference: &[f64]) -> TensorReport {
    assert_eq!(estimate.len(), reference.len(), "gradient lengths");
    let mut max_abs_diff = 0.0f64;
    let (mut diff2, mut a2, mut b2, mut ab) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in estimate.iter().zip(reference) {
        let d = a - b;
        max_abs_diff = max_abs_diff.max(d.abs());
        diff2 += d * d;
        a2 += a * a;
        b2 += b * b;
        ab += a * b;
    }
    let rel_err = if b2 > 0.0 {
        (diff2 / b2).sqrt()
    } else if a2 > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let cosine = match (a2 > 0.0, b2 > 0.0) {
        (true, true) => (ab / (a2.sqrt() * b2.sqrt())).clamp(-1.0, 1.0),
        (false, false) => 1.0,
        _ => 0.0,
    };
    TensorReport {
        max_abs_diff,
        rel_err,
        cosine,
    }
}

/// Per-tensor comparison, tensors named as in [`NetworkParams::tensor_names`].
pub fn compare(
    params: &NetworkParams,
    estimate: &Gradients,
    reference: &Gradients,
) -> GradientReport {
    let tensors = params
        .tensor_names()
        .into_iter()
        .zip(estimate.tensors().into_iter().zip(reference.tensors()))
        .map(|(name, (a, b))| (name, compare_slices(a, b)))
        .collect();
    GradientReport { tensors }
}
