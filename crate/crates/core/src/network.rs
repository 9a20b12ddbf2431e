//! Layered recurrent spiking network: topology, initialization, forward pass,
//! leaky softmax readout and the broadcast learning signal.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{softmax_into, Matrix, SparsityPattern};
use crate::neuron::{HiddenState, Jacobian, ModelKind, NeuronParams};

/// How the feedback weights `B` relate to the readout weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BroadcastMode {
    /// Fixed random feedback.
    Random,
    /// `B = W_out^T` at all times.
    Symmetric,
    /// Random start, then follows every readout update.
    Adaptive,
}

impl FromStr for BroadcastMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Self::Random),
            "symmetric" => Ok(Self::Symmetric),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(Error::Config(format!("unknown broadcast mode {other:?}"))),
        }
    }
}

impl fmt::Display for BroadcastMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Symmetric => "symmetric",
            Self::Adaptive => "adaptive",
        })
    }
}

/// Topology and initialization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub n_layers: usize,
    /// Total neuron count, split evenly across layers.
    pub n_neurons: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub model: ModelKind,
    pub broadcast: BroadcastMode,
    /// Share of neurons per layer with `beta = 0`.
    pub lif_fraction: f64,
    /// Share of input and recurrent weights zeroed and frozen at init.
    pub sparsity: f64,
    /// When false every recurrent weight is masked out.
    pub recurrent: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_layers: 1,
            n_neurons: 800,
            n_inputs: 39,
            n_outputs: 61,
            model: ModelKind::Alif,
            broadcast: BroadcastMode::Symmetric,
            lif_fraction: 0.25,
            sparsity: 0.8,
            recurrent: true,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_layers) {
            return Err(Error::Config(format!(
                "n_layers must be 1, 2 or 3, got {}",
                self.n_layers
            )));
        }
        if self.n_neurons < self.n_layers || self.n_inputs == 0 || self.n_outputs == 0 {
            return Err(Error::Config(
                "layer, input and output sizes must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lif_fraction) || !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::Config(
                "lif_fraction must be in [0,1] and sparsity in [0,1)".into(),
            ));
        }
        Ok(())
    }

    /// Neurons per layer (the total is divided evenly, remainder dropped).
    pub fn layer_size(&self) -> usize {
        self.n_neurons / self.n_layers
    }
}

/// Weights of one recurrent layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Fan-in from the network input (layer 1) or the previous layer.
    pub w_in: Matrix,
    /// Intra-layer recurrent weights, zero diagonal.
    pub w_rec: Matrix,
    pub in_mask: SparsityPattern,
    pub rec_mask: SparsityPattern,
    /// Adaptation strength per neuron; 0 marks a LIF neuron.
    pub beta: Vec<f64>,
}

impl LayerParams {
    pub fn size(&self) -> usize {
        self.w_rec.rows()
    }

    pub fn fan_in(&self) -> usize {
        self.w_in.cols()
    }
}

/// All trainable and structural parameters of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    pub neuron: NeuronParams,
    pub layers: Vec<LayerParams>,
    /// Readout weights, `n_outputs x total neurons`, columns ordered layer by layer.
    pub w_out: Matrix,
    pub bias: Vec<f64>,
    /// Feedback weights per layer, `layer size x n_outputs`.
    pub b_feedback: Vec<Matrix>,
}

fn sample_matrix(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let normal = Normal::new(0.0, std).expect("finite positive std");
    Matrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

/// Picks exactly `n_zero` entries among `candidates` to mask out.
fn choose_mask(
    rows: usize,
    cols: usize,
    mut candidates: Vec<usize>,
    n_zero: usize,
    always_masked: &[usize],
    rng: &mut ChaCha8Rng,
) -> SparsityPattern {
    let mut active = vec![true; rows * cols];
    for &i in always_masked {
        active[i] = false;
    }
    candidates.shuffle(rng);
    for &i in candidates.iter().take(n_zero) {
        active[i] = false;
    }
    SparsityPattern::from_active(rows, cols, active)
}

/// Samples a fresh network.
///
/// Weights are drawn from `N(0, 1/sqrt(fan_in))`; a fixed share of every input
/// and recurrent matrix is then zeroed and frozen, together with the recurrent
/// diagonal.
pub fn init_network(
    config: &NetworkConfig,
    neuron: &NeuronParams,
    seed: u64,
) -> Result<NetworkParams> {
    config.validate()?;
    neuron.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.layer_size();
    let mut layers = Vec::with_capacity(config.n_layers);

    for r in 0..config.n_layers {
        let fan_in = if r == 0 { config.n_inputs } else { n };
        let mut w_in = sample_matrix(n, fan_in, 1.0 / (fan_in as f64).sqrt(), &mut rng);
        let rec_std = if n > 1 {
            1.0 / ((n - 1) as f64).sqrt()
        } else {
            1.0
        };
        let mut w_rec = sample_matrix(n, n, rec_std, &mut rng);

        let n_zero_in = (config.sparsity * (n * fan_in) as f64).floor() as usize;
        let in_mask = choose_mask(
            n,
            fan_in,
            (0..n * fan_in).collect(),
            n_zero_in,
            &[],
            &mut rng,
        );

        let diagonal: Vec<usize> = (0..n).map(|i| i * n + i).collect();
        let rec_mask = if config.recurrent {
            let off_diag: Vec<usize> = (0..n * n).filter(|i| i / n != i % n).collect();
            let n_zero = ((config.sparsity * (n * n) as f64).floor() as usize).min(off_diag.len());
            choose_mask(n, n, off_diag, n_zero, &diagonal, &mut rng)
        } else {
            SparsityPattern::empty(n, n)
        };
        in_mask.apply(&mut w_in);
        rec_mask.apply(&mut w_rec);

        let n_lif = (config.lif_fraction * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut beta = vec![neuron.beta; n];
        for &j in order.iter().take(n_lif) {
            beta[j] = 0.0;
        }

        layers.push(LayerParams {
            w_in,
            w_rec,
            in_mask,
            rec_mask,
            beta,
        });
    }

    let total = n * config.n_layers;
    let out_std = 1.0 / (total as f64).sqrt();
    let w_out = sample_matrix(config.n_outputs, total, out_std, &mut rng);
    let bias = vec![0.0; config.n_outputs];
    let b_feedback = match config.broadcast {
        BroadcastMode::Symmetric => (0..config.n_layers)
            .map(|r| w_out_block(&w_out, r * n, n).transpose())
            .collect(),
        BroadcastMode::Random | BroadcastMode::Adaptive => (0..config.n_layers)
            .map(|_| sample_matrix(n, config.n_outputs, out_std, &mut rng))
            .collect(),
    };

    Ok(NetworkParams {
        config: config.clone(),
        neuron: *neuron,
        layers,
        w_out,
        bias,
        b_feedback,
    })
}

/// Columns `[offset, offset + len)` of the readout matrix.
fn w_out_block(w_out: &Matrix, offset: usize, len: usize) -> Matrix {
    Matrix::from_fn(w_out.rows(), len, |k, j| w_out.get(k, offset + j))
}

impl NetworkParams {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.w_out.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn total_neurons(&self) -> usize {
        self.layers.iter().map(LayerParams::size).sum()
    }

    /// Global index of the first neuron of layer `r` (readout column offset).
    pub fn layer_offset(&self, r: usize) -> usize {
        self.layers[..r].iter().map(LayerParams::size).sum()
    }

    /// Neuron parameters of neuron `j` in layer `r`.
    #[inline]
    pub fn neuron_params(&self, r: usize, j: usize) -> NeuronParams {
        self.neuron.with_beta(self.layers[r].beta[j])
    }

    /// Re-ties or adapts the feedback weights after a readout update.
    pub fn update_broadcast(&mut self, delta_w_out: &Matrix) {
        match self.config.broadcast {
            BroadcastMode::Random => {}
            BroadcastMode::Symmetric => {
                for r in 0..self.layers.len() {
                    let off = self.layer_offset(r);
                    let n = self.layers[r].size();
                    self.b_feedback[r] = w_out_block(&self.w_out, off, n).transpose();
                }
            }
            BroadcastMode::Adaptive => {
                for r in 0..self.layers.len() {
                    let off = self.layer_offset(r);
                    let b = &mut self.b_feedback[r];
                    for j in 0..b.rows() {
                        for k in 0..b.cols() {
                            let v = b.get(j, k) + delta_w_out.get(k, off + j);
                            b.set(j, k, v);
                        }
                    }
                }
            }
        }
    }

    /// Names of the trainable tensors in [`NetworkParams::tensors`] order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(2 * self.layers.len() + 2);
        for r in 0..self.layers.len() {
            names.push(format!("layer{}.w_in", r + 1));
            names.push(format!("layer{}.w_rec", r + 1));
        }
        names.push("w_out".into());
        names.push("bias".into());
        names
    }

    /// Trainable tensors: per layer `w_in`, `w_rec`, then `w_out`, `bias`.
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

    /// Zeroes every masked weight.
    pub fn apply_masks(&mut self) {
        for l in &mut self.layers {
            l.in_mask.apply(&mut l.w_in);
            l.rec_mask.apply(&mut l.w_rec);
        }
    }

    /// True when every masked weight is exactly zero.
    pub fn masks_hold(&self) -> bool {
        self.layers.iter().all(|l| {
            let ok = |m: &Matrix, p: &SparsityPattern| {
                m.as_slice()
                    .iter()
                    .zip(p.active_flags())
                    .all(|(&w, &on)| on || w == 0.0)
            };
            ok(&l.w_in, &l.in_mask) && ok(&l.w_rec, &l.rec_mask)
        })
    }

    /// True when `B_r == W_out[:, block r]^T` exactly for every layer.
    pub fn feedback_is_tied(&self) -> bool {
        (0..self.layers.len()).all(|r| {
            let off = self.layer_offset(r);
            let b = &self.b_feedback[r];
            (0..b.rows()).all(|j| (0..b.cols()).all(|k| b.get(j, k) == self.w_out.get(k, off + j)))
        })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w_in.is_finite() && l.w_rec.is_finite())
            && self.w_out.is_finite()
            && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Leaky readout accumulators and their softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutState {
    pub y: Vec<f64>,
    pub pi: Vec<f64>,
}

/// Runtime state of one layer within a sample.
#[derive(Debug, Clone)]
pub struct LayerState {
    pub neurons: Vec<HiddenState>,
    /// Spikes `z^t` as 0/1.
    pub z: Vec<f64>,
    /// Spikes `z^{t-1}` as 0/1.
    pub z_prev: Vec<f64>,
    /// Pseudo-derivatives at `t`.
    pub psi: Vec<f64>,
    /// Jacobian of the transition `t -> t+1`.
    pub jac: Vec<Jacobian>,
    /// Jacobian of the transition `t-1 -> t`.
    pub jac_prev: Vec<Jacobian>,
    drive: Vec<f64>,
}

/// Runtime state of a whole network within a sample.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub layers: Vec<LayerState>,
    pub readout: ReadoutState,
    /// Steps taken since the last reset.
    pub t: usize,
}

impl NetworkState {
    pub fn new(params: &NetworkParams) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| {
                let n = l.size();
                LayerState {
                    neurons: vec![params.config.model.initial_state(); n],
                    z: vec![0.0; n],
                    z_prev: vec![0.0; n],
                    psi: vec![0.0; n],
                    jac: vec![Jacobian::default(); n],
                    jac_prev: vec![Jacobian::default(); n],
                    drive: vec![0.0; n],
                }
            })
            .collect();
        let k = params.n_outputs();
        Self {
            layers,
            readout: ReadoutState {
                y: vec![0.0; k],
                pi: vec![1.0 / k as f64; k],
            },
            t: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.readout.y.iter().all(|y| y.is_finite())
            && self
                .layers
                .iter()
                .all(|l| l.neurons.iter().all(|n| n.v.is_finite() && n.a.is_finite()))
    }
}

/// Drive of every neuron in layer `r` from its presynaptic sources.
fn layer_drive(layer: &LayerParams, pre: &[f64], z_prev: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|d| *d = 0.0);
    layer.in_mask.matvec_add(&layer.w_in, pre, out);
    layer.rec_mask.matvec_add(&layer.w_rec, z_prev, out);
}

/// Advances the whole network by one step.
///
/// Layers are updated shallow to deep: layer 1 sees `x^t` and its own
/// `z^{t-1}`, deeper layers see the previous layer's `z^t`. The readout then
/// integrates the spikes of all layers.
pub fn forward_step(params: &NetworkParams, state: &mut NetworkState, input: &[f64]) -> Result<()> {
    if input.len() != params.n_inputs() {
        return Err(Error::Shape {
            what: "input frame",
            expected: params.n_inputs(),
            actual: input.len(),
        });
    }
    let model = params.config.model;
    for r in 0..params.layers.len() {
        let (shallower, rest) = state.layers.split_at_mut(r);
        let ls = &mut rest[0];
        let pre: &[f64] = if r == 0 { input } else { &shallower[r - 1].z };
        let layer = &params.layers[r];

        std::mem::swap(&mut ls.z, &mut ls.z_prev);
        std::mem::swap(&mut ls.jac, &mut ls.jac_prev);
        layer_drive(layer, pre, &ls.z_prev, &mut ls.drive);

        for j in 0..layer.size() {
            let np = params.neuron_params(r, j);
            let out = model.step(&mut ls.neurons[j], ls.drive[j], &np)?;
            ls.z[j] = out.spike as u8 as f64;
            ls.psi[j] = out.psi;
            ls.jac[j] = model.jacobian(&ls.neurons[j], out.psi, &np);
        }
    }

    let kappa = params.neuron.kappa;
    let ro = &mut state.readout;
    for (k, y) in ro.y.iter_mut().enumerate() {
        let row = params.w_out.row(k);
        let mut acc = kappa * *y + params.bias[k];
        let mut g = 0;
        for ls in &state.layers {
            for &z in &ls.z {
                if z != 0.0 {
                    acc += row[g];
                }
                g += 1;
            }
        }
        *y = acc;
    }
    softmax_into(&ro.y, &mut ro.pi);
    state.t += 1;
    Ok(())
}

/// `L_j = sum_k B_jk (pi_k - pi*_k)` for one layer.
pub fn learning_signal(b_feedback: &Matrix, residual: &[f64], out: &mut [f64]) {
    for (j, l) in out.iter_mut().enumerate() {
        *l = b_feedback
            .row(j)
            .iter()
            .zip(residual)
            .map(|(b, r)| b * r)
            .sum();
    }
}
