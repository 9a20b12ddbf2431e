//! The per-sample online loop: forward step, eligibility update, learning
//! signal and gradient accumulation, all at the same time step.

use serde::{Deserialize, Serialize};

use crate::dataset::Utterance;
use crate::error::{Error, Result};
use crate::linalg::{argmax, Matrix, SparsityPattern};
use crate::network::{forward_step, learning_signal, LayerState, NetworkParams, NetworkState};
use crate::neuron::{ClipBounds, EligibilityState, Jacobian, TraceCoef};

/// Floor inside the logarithm of the cross-entropy.
pub const XENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Regularization constants. A zero coefficient disables the term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegConfig {
    /// Target firing rate per step.
    pub f_target: f64,
    pub c_reg: f64,
    pub c_l2: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            f_target: 0.01,
            c_reg: 50.0,
            c_l2: 1e-5,
        }
    }
}

impl RegConfig {
    pub const NONE: RegConfig = RegConfig {
        f_target: 0.01,
        c_reg: 0.0,
        c_l2: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub w_in: Matrix,
    pub w_rec: Matrix,
}

/// Gradient accumulators shaped like the trainable tensors of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub w_out: Matrix,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w_in: Matrix::zeros(l.w_in.rows(), l.w_in.cols()),
                    w_rec: Matrix::zeros(l.w_rec.rows(), l.w_rec.cols()),
                })
                .collect(),
            w_out: Matrix::zeros(params.w_out.rows(), params.w_out.cols()),
            bias: vec![0.0; params.bias.len()],
        }
    }

    /// Same order as [`NetworkParams::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.w_in.as_slice());
            out.push(l.w_rec.as_slice());
        }
        out.push(self.w_out.as_slice());
        out.push(&self.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.w_in.as_mut_slice());
            out.push(l.w_rec.as_mut_slice());
        }
        out.push(self.w_out.as_mut_slice());
        out.push(&mut self.bias);
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Counts gathered while running one sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleStats {
    pub n_frames: usize,
    /// Summed over frames.
    pub xent: f64,
    pub n_errors: usize,
    pub spikes: u64,
    pub neuron_steps: u64,
    /// Firing-rate regularization error at the end of the sample.
    pub reg_err: f64,
}

impl SampleStats {
    pub fn merge(&mut self, other: &SampleStats) {
        self.n_frames += other.n_frames;
        self.xent += other.xent;
        self.n_errors += other.n_errors;
        self.spikes += other.spikes;
        self.neuron_steps += other.neuron_steps;
        self.reg_err += other.reg_err;
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    /// `None` in evaluation mode.
    pub grads: Option<Gradients>,
    pub stats: SampleStats,
    /// Spike count per neuron, layers concatenated.
    pub spike_counts: Vec<u32>,
}

/// `-sum_t log pi_t[label_t]` with the probability floored at [`XENT_FLOOR`].
pub fn cross_entropy<P: AsRef<[f64]>>(pi_seq: &[P], targets: &[u16]) -> Result<f64> {
    if pi_seq.len() != targets.len() {
        return Err(Error::Shape {
            what: "cross-entropy targets",
            expected: pi_seq.len(),
            actual: targets.len(),
        });
    }
    Ok(pi_seq
        .iter()
        .zip(targets)
        .map(|(pi, &k)| -pi.as_ref()[k as usize].max(XENT_FLOOR).ln())
        .sum())
}

/// Running spike statistics for the firing-rate regularizer.
#[derive(Debug, Clone)]
pub struct RegState {
    pub z_total: Vec<u32>,
    pub t_elapsed: usize,
    /// `sum_t (f_av^t - f_target)` per neuron.
    pub deviation_sum: Vec<f64>,
    pub f_target: f64,
}

impl RegState {
    pub fn new(n_neurons: usize, f_target: f64) -> Self {
        Self {
            z_total: vec![0; n_neurons],
            t_elapsed: 0,
            deviation_sum: vec![0.0; n_neurons],
            f_target,
        }
    }

    /// Records the spikes of one step, layers concatenated.
    pub fn observe<'a>(&mut self, spikes: impl Iterator<Item = &'a f64>) {
        self.t_elapsed += 1;
        let t = self.t_elapsed as f64;
        for ((n, dev), &z) in self
            .z_total
            .iter_mut()
            .zip(&mut self.deviation_sum)
            .zip(spikes)
        {
            *n += (z != 0.0) as u32;
            *dev += *n as f64 / t - self.f_target;
        }
    }

    pub fn f_av(&self, j: usize) -> f64 {
        self.z_total[j] as f64 / self.t_elapsed as f64
    }
}

/// Per-neuron contribution `c_reg * sum_t (f_av^t - f_target)` to every
/// afferent weight, and the error `1/2 sum_j (f_target - f_av^T)^2`.
pub fn firing_rate_reg(reg: &RegState, c_reg: f64) -> Result<(Vec<f64>, f64)> {
    if reg.t_elapsed == 0 {
        return Err(Error::Input(
            "firing-rate regularizer needs at least one step".into(),
        ));
    }
    let contrib = reg.deviation_sum.iter().map(|d| c_reg * d).collect();
    let err = 0.5
        * (0..reg.z_total.len())
            .map(|j| (reg.f_target - reg.f_av(j)).powi(2))
            .sum::<f64>();
    Ok((contrib, err))
}

/// Adds `c_l2 * w` into `grad` for every active entry.
pub fn l2_reg(w: &Matrix, mask: Option<&SparsityPattern>, c_l2: f64, grad: &mut Matrix) {
    let g = grad.as_mut_slice();
    match mask {
        Some(m) => {
            for (i, (&w, &on)) in w.as_slice().iter().zip(m.active_flags()).enumerate() {
                if on {
                    g[i] += c_l2 * w;
                }
            }
        }
        None => {
            for (g, &w) in g.iter_mut().zip(w.as_slice()) {
                *g += c_l2 * w;
            }
        }
    }
}

/// Eligibility states of one layer, aligned with the CSR order of its masks.
struct LayerElig {
    input: Vec<EligibilityState>,
    rec: Vec<EligibilityState>,
}

struct SynapseStep<'a> {
    jac: &'a Jacobian,
    coef: &'a TraceCoef,
    clip: Option<ClipBounds>,
    kappa: f64,
    signal: f64,
}

#[inline]
fn synapse_row(
    mask: &SparsityPattern,
    j: usize,
    presyn: &[f64],
    elig: &mut [EligibilityState],
    grad_row: &mut [f64],
    s: &SynapseStep<'_>,
) {
    let start = mask.row_start(j);
    let cols = mask.row_cols(j);
    for (el, &c) in elig[start..start + cols.len()].iter_mut().zip(cols) {
        let c = c as usize;
        el.advance(s.jac, presyn[c], s.clip);
        let e = el.trace(s.coef);
        let e_bar = el.filter(e, s.kappa);
        grad_row[c] += s.signal * e_bar;
    }
}

fn accumulate_layer(
    params: &NetworkParams,
    r: usize,
    ls: &LayerState,
    presyn: &[f64],
    signal: &[f64],
    elig: &mut LayerElig,
    grads: &mut LayerGrads,
) {
    let layer = &params.layers[r];
    let model = params.config.model;
    let clip = model.clip_bounds(&params.neuron);
    for j in 0..layer.size() {
        let np = params.neuron_params(r, j);
        let coef = model.trace_coef(ls.psi[j], &np);
        let step = SynapseStep {
            jac: &ls.jac_prev[j],
            coef: &coef,
            clip,
            kappa: np.kappa,
            signal: signal[j],
        };
        synapse_row(
            &layer.in_mask,
            j,
            presyn,
            &mut elig.input,
            grads.w_in.row_mut(j),
            &step,
        );
        synapse_row(
            &layer.rec_mask,
            j,
            &ls.z_prev,
            &mut elig.rec,
            grads.w_rec.row_mut(j),
            &step,
        );
    }
}

fn check_utterance(params: &NetworkParams, utt: &Utterance) -> Result<()> {
    if utt.is_empty() {
        return Err(Error::Input("empty utterance".into()));
    }
    if utt.frames.cols() != params.n_inputs() {
        return Err(Error::Shape {
            what: "frame width",
            expected: params.n_inputs(),
            actual: utt.frames.cols(),
        });
    }
    if utt.labels.len() != utt.len() {
        return Err(Error::Shape {
            what: "label count",
            expected: utt.len(),
            actual: utt.labels.len(),
        });
    }
    if let Some(&bad) = utt
        .labels
        .iter()
        .find(|&&l| l as usize >= params.n_outputs())
    {
        return Err(Error::Input(format!(
            "label {bad} out of range for {} outputs",
            params.n_outputs()
        )));
    }
    Ok(())
}

/// Runs one sample from a zero state. In training mode the e-prop gradient
/// estimate is accumulated online, followed by the regularizer terms.
pub fn run_sample(
    params: &NetworkParams,
    utt: &Utterance,
    mode: Mode,
    reg: &RegConfig,
) -> Result<SampleOutput> {
    check_utterance(params, utt)?;
    let n_total = params.total_neurons();
    let k_out = params.n_outputs();
    let kappa = params.neuron.kappa;
    let train = mode == Mode::Train;

    let mut state = NetworkState::new(params);
    let mut rate = RegState::new(n_total, reg.f_target);
    let mut stats = SampleStats::default();

    let mut grads = train.then(|| Gradients::zeros_like(params));
    let mut elig: Vec<LayerElig> = if train {
        params
            .layers
            .iter()
            .map(|l| LayerElig {
                input: vec![EligibilityState::default(); l.in_mask.n_active()],
                rec: vec![EligibilityState::default(); l.rec_mask.n_active()],
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut signal: Vec<Vec<f64>> = params.layers.iter().map(|l| vec![0.0; l.size()]).collect();
    let mut residual = vec![0.0; k_out];
    let mut z_bar = vec![0.0; n_total];
    let mut b_bar = 0.0;

    for t in 0..utt.len() {
        forward_step(params, &mut state, utt.frames.row(t))?;
        let label = utt.labels[t] as usize;
        let pi = &state.readout.pi;

        if let Some(g) = grads.as_mut() {
            for (k, r) in residual.iter_mut().enumerate() {
                *r = pi[k] - (k == label) as u8 as f64;
            }
            for r in 0..params.layers.len() {
                learning_signal(&params.b_feedback[r], &residual, &mut signal[r]);
                let presyn: &[f64] = if r == 0 {
                    utt.frames.row(t)
                } else {
                    &state.layers[r - 1].z
                };
                accumulate_layer(
                    params,
                    r,
                    &state.layers[r],
                    presyn,
                    &signal[r],
                    &mut elig[r],
                    &mut g.layers[r],
                );
            }

            let spikes = state.layers.iter().flat_map(|l| l.z.iter());
            for (zb, &z) in z_bar.iter_mut().zip(spikes) {
                *zb = kappa * *zb + z;
            }
            b_bar = kappa * b_bar + 1.0;
            for (k, &r) in residual.iter().enumerate() {
                for (gw, &zb) in g.w_out.row_mut(k).iter_mut().zip(&z_bar) {
                    *gw += r * zb;
                }
                g.bias[k] += r * b_bar;
            }
        }

        rate.observe(state.layers.iter().flat_map(|l| l.z.iter()));
        stats.xent -= pi[label].max(XENT_FLOOR).ln();
        stats.n_errors += (argmax(pi) != label) as usize;
    }

    if !state.is_finite() {
        return Err(Error::NonFinite("network state"));
    }

    let (rate_grad, reg_err) = firing_rate_reg(&rate, reg.c_reg)?;
    if let Some(g) = grads.as_mut() {
        if reg.c_reg != 0.0 {
            let mut offset = 0;
            for (layer, lg) in params.layers.iter().zip(&mut g.layers) {
                for j in 0..layer.size() {
                    let d = rate_grad[offset + j];
                    let row = lg.w_in.row_mut(j);
                    for &c in layer.in_mask.row_cols(j) {
                        row[c as usize] += d;
                    }
                    let row = lg.w_rec.row_mut(j);
                    for &c in layer.rec_mask.row_cols(j) {
                        row[c as usize] += d;
                    }
                }
                offset += layer.size();
            }
        }
        if reg.c_l2 != 0.0 {
            for (layer, lg) in params.layers.iter().zip(&mut g.layers) {
                l2_reg(&layer.w_in, Some(&layer.in_mask), reg.c_l2, &mut lg.w_in);
                l2_reg(&layer.w_rec, Some(&layer.rec_mask), reg.c_l2, &mut lg.w_rec);
            }
            l2_reg(&params.w_out, None, reg.c_l2, &mut g.w_out);
        }
        if !g.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
    }

    stats.n_frames = utt.len();
    stats.spikes = rate.z_total.iter().map(|&n| n as u64).sum();
    stats.neuron_steps = (n_total * utt.len()) as u64;
    stats.reg_err = reg_err;
    Ok(SampleOutput {
        grads,
        stats,
        spike_counts: rate.z_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{SyntheticConfig, SyntheticTask};
    use crate::network::{init_network, BroadcastMode, NetworkConfig};
    use crate::neuron::{ModelKind, NeuronParams};
    use approx::assert_abs_diff_eq;

    fn tiny(model: ModelKind, broadcast: BroadcastMode) -> NetworkParams {
        let c = NetworkConfig {
            n_neurons: 12,
            n_inputs: 5,
            n_outputs: 3,
            model,
            broadcast,
            sparsity: 0.3,
            ..NetworkConfig::default()
        };
        let mut p = init_network(&c, &NeuronParams::default(), 21).unwrap();
        for l in &mut p.layers {
            l.w_in.scale(2.0);
        }
        p
    }

    fn utterance(t: usize, n_in: usize, seed: u64) -> Utterance {
        let task = SyntheticTask::new(SyntheticConfig {
            n_classes: 3,
            n_channels: n_in,
            t_len: t,
            ..SyntheticConfig::default()
        })
        .unwrap();
        task.generate(1, seed).remove(0)
    }

    #[test]
    fn zero_network_bias_gradient_and_xent() {
        let mut p = tiny(ModelKind::Alif, BroadcastMode::Symmetric);
        for l in &mut p.layers {
            l.w_in.fill(0.0);
            l.w_rec.fill(0.0);
        }
        p.w_out.fill(0.0);
        let u = utterance(7, 5, 3);
        let out = run_sample(&p, &u, Mode::Train, &RegConfig::NONE).unwrap();
        let g = out.grads.unwrap();
        // residual is constant in time, the exact gradient weights it by the
        // filtered bias input b_bar^t = sum_{s<=t} kappa^s
        let label = u.labels[0] as usize;
        let weight: f64 = (0..7)
            .map(|t| (0..=t).map(|s| 0.8f64.powi(s)).sum::<f64>())
            .sum();
        for k in 0..3 {
            let r = 1.0 / 3.0 - (k == label) as u8 as f64;
            assert_abs_diff_eq!(g.bias[k], r * weight, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(out.stats.xent, 7.0 * 3f64.ln(), epsilon = 1e-12);
        assert!(g.layers[0].w_in.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_feedback_gives_zero_hidden_gradients() {
        let mut p = tiny(ModelKind::Alif, BroadcastMode::Random);
        for b in &mut p.b_feedback {
            b.fill(0.0);
        }
        let out = run_sample(&p, &utterance(20, 5, 1), Mode::Train, &RegConfig::NONE).unwrap();
        let g = out.grads.unwrap();
        assert!(g.layers[0].w_in.as_slice().iter().all(|&x| x == 0.0));
        assert!(g.layers[0].w_rec.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradients_linear_in_learning_signal() {
        for model in [ModelKind::Alif, ModelKind::StdpAlif, ModelKind::Izhikevich] {
            let p = tiny(model, BroadcastMode::Random);
            let mut p2 = p.clone();
            for b in &mut p2.b_feedback {
                b.scale(2.0);
            }
            let u = utterance(25, 5, 2);
            let g1 = run_sample(&p, &u, Mode::Train, &RegConfig::NONE)
                .unwrap()
                .grads
                .unwrap();
            let g2 = run_sample(&p2, &u, Mode::Train, &RegConfig::NONE)
                .unwrap()
                .grads
                .unwrap();
            for (a, b) in g1.layers[0]
                .w_in
                .as_slice()
                .iter()
                .zip(g2.layers[0].w_in.as_slice())
            {
                assert_eq!(2.0 * a, *b);
            }
            for (a, b) in g1.layers[0]
                .w_rec
                .as_slice()
                .iter()
                .zip(g2.layers[0].w_rec.as_slice())
            {
                assert_eq!(2.0 * a, *b);
            }
        }
    }

    #[test]
    fn masked_entries_get_no_gradient() {
        let p = tiny(ModelKind::Alif, BroadcastMode::Symmetric);
        let reg = RegConfig::default();
        let g = run_sample(&p, &utterance(30, 5, 4), Mode::Train, &reg)
            .unwrap()
            .grads
            .unwrap();
        let l = &p.layers[0];
        for (i, &on) in l.in_mask.active_flags().iter().enumerate() {
            if !on {
                assert_eq!(g.layers[0].w_in.as_slice()[i], 0.0);
            }
        }
        for (i, &on) in l.rec_mask.active_flags().iter().enumerate() {
            if !on {
                assert_eq!(g.layers[0].w_rec.as_slice()[i], 0.0);
            }
        }
    }

    #[test]
    fn single_step_gradient_is_signal_times_trace() {
        // one neuron, one input, one step: grad = L^1 * e^1 with e^1 = psi * x
        let c = NetworkConfig {
            n_neurons: 1,
            n_inputs: 1,
            n_outputs: 2,
            sparsity: 0.0,
            lif_fraction: 1.0,
            ..NetworkConfig::default()
        };
        let mut p = init_network(&c, &NeuronParams::default(), 0).unwrap();
        p.layers[0].w_in.set(0, 0, 0.9);
        p.w_out = Matrix::from_vec(2, 1, vec![0.4, -0.2]);
        p.b_feedback[0] = p.w_out.transpose();
        let u = Utterance {
            frames: Matrix::from_vec(1, 1, vec![1.0]),
            labels: vec![1],
        };
        let g = run_sample(&p, &u, Mode::Train, &RegConfig::NONE)
            .unwrap()
            .grads
            .unwrap();
        // v = 0.9 < v_th: no spike, y = 0, pi uniform
        let psi = 0.3 * (1.0 - (0.9f64 - 0.95).abs() / 0.95);
        let l = 0.4 * 0.5 + -0.2 * (0.5 - 1.0);
        assert_abs_diff_eq!(g.layers[0].w_in.get(0, 0), l * psi * 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_mode_has_no_gradients() {
        let p = tiny(ModelKind::Alif, BroadcastMode::Symmetric);
        let u = utterance(10, 5, 0);
        let e = run_sample(&p, &u, Mode::Eval, &RegConfig::default()).unwrap();
        assert!(e.grads.is_none());
        let t = run_sample(&p, &u, Mode::Train, &RegConfig::default()).unwrap();
        assert_eq!(e.stats, t.stats);
    }

    #[test]
    fn input_errors() {
        let p = tiny(ModelKind::Alif, BroadcastMode::Symmetric);
        let empty = Utterance {
            frames: Matrix::zeros(0, 5),
            labels: vec![],
        };
        assert!(matches!(
            run_sample(&p, &empty, Mode::Train, &RegConfig::NONE),
            Err(Error::Input(_))
        ));
        let mut u = utterance(4, 5, 0);
        u.labels[2] = 3;
        assert!(run_sample(&p, &u, Mode::Eval, &RegConfig::NONE).is_err());
        let wide = utterance(4, 6, 0);
        assert!(matches!(
            run_sample(&p, &wide, Mode::Eval, &RegConfig::NONE),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn cross_entropy_cases() {
        let k = 61;
        let uniform = vec![vec![1.0 / k as f64; k]; 5];
        let labels = vec![3u16; 5];
        assert_abs_diff_eq!(
            cross_entropy(&uniform, &labels).unwrap(),
            5.0 * (k as f64).ln(),
            epsilon = 1e-12
        );
        let doubled: Vec<_> = uniform.iter().chain(&uniform).cloned().collect();
        assert_abs_diff_eq!(
            cross_entropy(&doubled, &[3u16; 10]).unwrap(),
            2.0 * cross_entropy(&uniform, &labels).unwrap(),
            epsilon = 1e-12
        );
        let mut sure = vec![0.0; k];
        sure[0] = 1.0 - 1e-12;
        assert!(cross_entropy(&[sure], &[0]).unwrap() < 1e-11);
        let zero = vec![0.0; k];
        assert_abs_diff_eq!(cross_entropy(&[zero], &[0]).unwrap(), -XENT_FLOOR.ln());
        assert!(cross_entropy(&uniform, &[0u16; 4]).is_err());
    }

    #[test]
    fn firing_rate_reg_cases() {
        let mut s = RegState::new(1, 0.01);
        for _ in 0..10 {
            s.observe([0.0].iter());
        }
        let (g, err) = firing_rate_reg(&s, 50.0).unwrap();
        assert_abs_diff_eq!(err, 5e-5, epsilon = 1e-18);
        // silent neuron: negative contribution, hence growth after -eta
        assert!(g[0] < 0.0);
        assert_abs_diff_eq!(g[0], 50.0 * 10.0 * -0.01, epsilon = 1e-12);

        let mut at_target = RegState::new(1, 0.5);
        at_target.observe([1.0].iter());
        at_target.observe([0.0].iter());
        // f_av = 1 then 0.5
        let (g, err) = firing_rate_reg(&at_target, 1.0).unwrap();
        assert_abs_diff_eq!(g[0], 0.5, epsilon = 1e-15);
        assert_eq!(err, 0.0);

        assert!(firing_rate_reg(&RegState::new(2, 0.01), 1.0).is_err());
    }

    #[test]
    fn l2_cases() {
        let w = Matrix::from_vec(1, 3, vec![0.0, 1.0, 1.0]);
        let mask = SparsityPattern::from_active(1, 3, vec![true, true, false]);
        let mut g = Matrix::zeros(1, 3);
        l2_reg(&w, Some(&mask), 1e-5, &mut g);
        assert_eq!(g.as_slice(), &[0.0, 1e-5, 0.0]);
    }
}
