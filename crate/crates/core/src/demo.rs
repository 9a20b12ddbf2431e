//! Single-synapse simulation: a presynaptic and a postsynaptic neuron driven
//! by scripted current pulses, with the eligibility quantities of the one
//! synapse between them recorded at every step.
//!
//! The synapse carries the presynaptic spike of the previous step, as a
//! recurrent connection does. The accumulated weight change is
//! `sum_t L * ebar^t` under a constant learning signal `L`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{EligibilityState, Jacobian, ModelKind, NeuronParams};

pub const DEMO_HEADER: &str = "t,I,v_pre,v_post,z_pre,z_post,eps_v,eps_a,e,ebar,acc_dW";

/// Neuron model of a demo, including the unclipped Izhikevich variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoModel {
    Alif,
    StdpAlif,
    Izh,
    IzhUnclipped,
}

impl DemoModel {
    pub fn kind(self) -> ModelKind {
        match self {
            DemoModel::Alif => ModelKind::Alif,
            DemoModel::StdpAlif => ModelKind::StdpAlif,
            DemoModel::Izh | DemoModel::IzhUnclipped => ModelKind::Izhikevich,
        }
    }
}

impl FromStr for DemoModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alif" => Ok(DemoModel::Alif),
            "stdp-alif" => Ok(DemoModel::StdpAlif),
            "izh" => Ok(DemoModel::Izh),
            "izh-unclipped" => Ok(DemoModel::IzhUnclipped),
            other => Err(Error::Config(format!(
                "unknown demo model {other:?}; expected alif, stdp-alif, izh or izh-unclipped"
            ))),
        }
    }
}

impl fmt::Display for DemoModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemoModel::Alif => "alif",
            DemoModel::StdpAlif => "stdp-alif",
            DemoModel::Izh => "izh",
            DemoModel::IzhUnclipped => "izh-unclipped",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Pre,
    Post,
}

/// Current `amplitude` injected into `target` for `duration` steps from `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub t: usize,
    pub amplitude: f64,
    pub target: Target,
    #[serde(default = "one")]
    pub duration: usize,
}

fn one() -> usize {
    1
}

/// A scripted stimulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    /// Model used when the caller does not pick one.
    pub model: DemoModel,
    /// Steps `1..=steps` are simulated.
    pub steps: usize,
    /// Synaptic weight from pre to post.
    #[serde(default)]
    pub weight: f64,
    #[serde(default = "unit")]
    pub learning_signal: f64,
    /// Standard deviation of Gaussian current added to both neurons.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub neuron: Option<NeuronParams>,
    #[serde(default, rename = "pulse")]
    pub pulses: Vec<Pulse>,
}

fn unit() -> f64 {
    1.0
}

impl Protocol {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Protocol = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("protocol needs at least one step".into()));
        }
        let finite = [self.weight, self.learning_signal, self.noise_std]
            .iter()
            .chain(self.pulses.iter().map(|p| &p.amplitude))
            .all(|x| x.is_finite());
        if !finite || self.noise_std < 0.0 {
            return Err(Error::Config(
                "protocol values must be finite, noise_std >= 0".into(),
            ));
        }
        if let Some(n) = &self.neuron {
            n.validate()?;
        }
        Ok(())
    }

    /// External current of both neurons at step `t`.
    fn injected(&self, t: usize) -> (f64, f64) {
        let mut cur = (0.0, 0.0);
        for p in &self.pulses {
            if t >= p.t && t < p.t + p.duration.max(1) {
                match p.target {
                    Target::Pre => cur.0 += p.amplitude,
                    Target::Post => cur.1 += p.amplitude,
                }
            }
        }
        cur
    }
}

/// One step of the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoRow {
    pub t: usize,
    /// External current into either neuron (pre plus post).
    pub current: f64,
    pub v_pre: f64,
    pub v_post: f64,
    pub z_pre: bool,
    pub z_post: bool,
    pub eps_v: f64,
    pub eps_a: f64,
    pub e: f64,
    pub ebar: f64,
    pub acc_dw: f64,
}

impl DemoRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.current,
            self.v_pre,
            self.v_post,
            self.z_pre as u8,
            self.z_post as u8,
            self.eps_v,
            self.eps_a,
            self.e,
            self.ebar,
            self.acc_dw
        )
    }
}

/// Runs `protocol` with `model` (the protocol's own model when `None`).
pub fn run_demo(protocol: &Protocol, model: Option<DemoModel>) -> Result<Vec<DemoRow>> {
    protocol.validate()?;
    let model = model.unwrap_or(protocol.model);
    let kind = model.kind();
    let mut params = protocol.neuron.unwrap_or_default();
    if kind == ModelKind::Izhikevich {
        params.clip_izhikevich = model == DemoModel::Izh;
    }
    let clip = kind.clip_bounds(&params);
    let noise = Normal::new(0.0, protocol.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);

    let mut pre = kind.initial_state();
    let mut post = kind.initial_state();
    let mut jac_prev = Jacobian::default();
    let mut elig = EligibilityState::default();
    let mut acc = 0.0;
    let mut rows = Vec::with_capacity(protocol.steps);
    for t in 1..=protocol.steps {
        let (i_pre, i_post) = protocol.injected(t);
        let (n_pre, n_post) = if protocol.noise_std > 0.0 {
            (noise.sample(&mut rng), noise.sample(&mut rng))
        } else {
            (0.0, 0.0)
        };
        let presyn = pre.last_z as u8 as f64;
        kind.step(&mut pre, i_pre + n_pre, &params)?;
        let out = kind.step(
            &mut post,
            i_post + n_post + protocol.weight * presyn,
            &params,
        )?;

        elig.advance(&jac_prev, presyn, clip);
        let e = elig.trace(&kind.trace_coef(out.psi, &params));
        let ebar = elig.filter(e, params.kappa);
        jac_prev = kind.jacobian(&post, out.psi, &params);
        acc += protocol.learning_signal * ebar;

        rows.push(DemoRow {
            t,
            current: i_pre + i_post,
            v_pre: pre.v,
            v_post: post.v,
            z_pre: pre.last_z,
            z_post: post.last_z,
            eps_v: elig.eps_v,
            eps_a: elig.eps_a,
            e,
            ebar,
            acc_dw: acc,
        });
    }
    Ok(rows)
}

pub fn write_demo_csv(path: impl AsRef<Path>, rows: &[DemoRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{DEMO_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(w, "{}", r.csv_row()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Protocols shipped with the crate, by file stem.
pub const BUILTIN_PROTOCOLS: [(&str, &str); 4] = [
    ("alif", include_str!("../protocols/alif.toml")),
    ("stdp_alif", include_str!("../protocols/stdp_alif.toml")),
    ("izhikevich", include_str!("../protocols/izhikevich.toml")),
    (
        "izhikevich_corrected",
        include_str!("../protocols/izhikevich_corrected.toml"),
    ),
];

pub fn builtin_protocol(name: &str) -> Result<Protocol> {
    let (_, text) = BUILTIN_PROTOCOLS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("no built-in protocol {name:?}")))?;
    Protocol::from_toml_str(text)
}
