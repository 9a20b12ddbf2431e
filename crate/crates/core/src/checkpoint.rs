//! Versioned binary checkpoints for exact resume.
//!
//! Layout: `b"EPCK"`, format version `u32` LE, header length `u64` LE, a JSON
//! header, then the blocks the header lists, back to back. `f64` blocks are
//! little-endian; `u8` blocks hold masks (1 = trainable).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SparsityPattern};
use crate::network::{LayerParams, NetworkConfig, NetworkParams};
use crate::neuron::NeuronParams;
use crate::trainer::{OptimizerState, Progress, Trainer};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Where the training data came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Timit { feature_hash: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BlockKind {
    F64,
    U8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Block {
    name: String,
    kind: BlockKind,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    run: RunConfig,
    network: NetworkConfig,
    neuron: NeuronParams,
    data: DataSource,
    progress: Progress,
    opt_step_count: u64,
    best_val_miscls: Option<f64>,
    blocks: Vec<Block>,
}

/// Everything needed to continue or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub run: RunConfig,
    pub data: DataSource,
    pub params: NetworkParams,
    pub opt: OptimizerState,
    pub progress: Progress,
    pub best_val_miscls: Option<f64>,
}

fn ck_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

enum Payload<'a> {
    F64(&'a [f64]),
    U8(Vec<u8>),
}

fn mask_bytes(p: &SparsityPattern) -> Vec<u8> {
    p.active_flags().iter().map(|&a| a as u8).collect()
}

impl Checkpoint {
    pub fn from_trainer(
        trainer: &Trainer,
        run: &RunConfig,
        data: DataSource,
        best_val_miscls: Option<f64>,
    ) -> Self {
        Self {
            run: RunConfig {
                train: trainer.config.clone(),
                ..run.clone()
            },
            data,
            params: trainer.params.clone(),
            opt: trainer.opt.clone(),
            progress: trainer.progress,
            best_val_miscls,
        }
    }

    pub fn into_trainer(self) -> Result<Trainer> {
        let mut t = Trainer::new(self.params, self.run.train)?;
        t.opt = self.opt;
        t.progress = self.progress;
        Ok(t)
    }

    fn payload(&self) -> Vec<(String, Payload<'_>)> {
        let p = &self.params;
        let names = p.tensor_names();
        let mut out: Vec<(String, Payload)> = names
            .iter()
            .cloned()
            .zip(p.tensors().into_iter().map(Payload::F64))
            .collect();
        for (r, l) in p.layers.iter().enumerate() {
            let n = r + 1;
            out.push((format!("layer{n}.beta"), Payload::F64(&l.beta)));
            out.push((
                format!("layer{n}.b_feedback"),
                Payload::F64(p.b_feedback[r].as_slice()),
            ));
            out.push((
                format!("layer{n}.in_mask"),
                Payload::U8(mask_bytes(&l.in_mask)),
            ));
            out.push((
                format!("layer{n}.rec_mask"),
                Payload::U8(mask_bytes(&l.rec_mask)),
            ));
        }
        for (i, name) in names.iter().enumerate() {
            out.push((format!("adam.m.{name}"), Payload::F64(&self.opt.m[i])));
            out.push((format!("adam.v.{name}"), Payload::F64(&self.opt.v2[i])));
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload = self.payload();
        let blocks = payload
            .iter()
            .map(|(name, p)| match p {
                Payload::F64(x) => Block {
                    name: name.clone(),
                    kind: BlockKind::F64,
                    len: x.len(),
                },
                Payload::U8(x) => Block {
                    name: name.clone(),
                    kind: BlockKind::U8,
                    len: x.len(),
                },
            })
            .collect();
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            run: self.run.clone(),
            network: self.params.config.clone(),
            neuron: self.params.neuron,
            data: self.data.clone(),
            progress: self.progress,
            opt_step_count: self.opt.step_count,
            best_val_miscls: self.best_val_miscls,
            blocks,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, p) in &payload {
            match p {
                Payload::F64(x) => x
                    .iter()
                    .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                Payload::U8(x) => out.extend_from_slice(x),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(ck_err("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(ck_err(format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json = bytes
            .get(16..16usize.saturating_add(hlen))
            .ok_or_else(|| ck_err("truncated header"))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| ck_err(format!("bad header: {e}")))?;
        if header.format_version != version {
            return Err(ck_err("header and preamble versions differ"));
        }
        let mut reader = BlockReader {
            blocks: header.blocks.iter(),
            data: &bytes[16 + hlen..],
        };
        let params = read_params(&header, &mut reader)?;
        let names = params.tensor_names();
        let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        let mut opt = OptimizerState::new(&lens);
        for (i, name) in names.iter().enumerate() {
            opt.m[i] = reader.f64(&format!("adam.m.{name}"), lens[i])?;
            opt.v2[i] = reader.f64(&format!("adam.v.{name}"), lens[i])?;
        }
        opt.step_count = header.opt_step_count;
        if reader.blocks.next().is_some() || !reader.data.is_empty() {
            return Err(ck_err("trailing data after the last block"));
        }
        Ok(Self {
            run: header.run,
            data: header.data,
            params,
            opt,
            progress: header.progress,
            best_val_miscls: header.best_val_miscls,
        })
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct BlockReader<'a> {
    blocks: std::slice::Iter<'a, Block>,
    data: &'a [u8],
}

impl BlockReader<'_> {
    fn take(&mut self, name: &str, kind: BlockKind, len: usize) -> Result<&[u8]> {
        let b = self
            .blocks
            .next()
            .ok_or_else(|| ck_err(format!("missing block {name}")))?;
        if b.name != name || b.kind != kind || b.len != len {
            return Err(ck_err(format!(
                "expected block {name} ({kind:?} x {len}), found {} ({:?} x {})",
                b.name, b.kind, b.len
            )));
        }
        let nbytes = len * if kind == BlockKind::F64 { 8 } else { 1 };
        if self.data.len() < nbytes {
            return Err(ck_err(format!("block {name} is truncated")));
        }
        let (head, rest) = self.data.split_at(nbytes);
        self.data = rest;
        Ok(head)
    }

    fn f64(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(name, BlockKind::F64, len)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        Ok(Matrix::from_vec(rows, cols, self.f64(name, rows * cols)?))
    }

    fn mask(&mut self, name: &str, rows: usize, cols: usize) -> Result<SparsityPattern> {
        let raw = self.take(name, BlockKind::U8, rows * cols)?;
        if raw.iter().any(|&b| b > 1) {
            return Err(ck_err(format!("mask {name} holds values other than 0/1")));
        }
        Ok(SparsityPattern::from_active(
            rows,
            cols,
            raw.iter().map(|&b| b == 1).collect(),
        ))
    }
}

fn read_params(h: &Header, reader: &mut BlockReader<'_>) -> Result<NetworkParams> {
    let cfg = &h.network;
    cfg.validate()?;
    h.neuron.validate()?;
    let n = cfg.layer_size();
    let total = n * cfg.n_layers;
    let mut w = Vec::with_capacity(cfg.n_layers);
    for r in 0..cfg.n_layers {
        let fan_in = if r == 0 { cfg.n_inputs } else { n };
        let w_in = reader.matrix(&format!("layer{}.w_in", r + 1), n, fan_in)?;
        let w_rec = reader.matrix(&format!("layer{}.w_rec", r + 1), n, n)?;
        w.push((w_in, w_rec));
    }
    let w_out = reader.matrix("w_out", cfg.n_outputs, total)?;
    let bias = reader.f64("bias", cfg.n_outputs)?;
    let mut layers = Vec::with_capacity(cfg.n_layers);
    let mut b_feedback = Vec::with_capacity(cfg.n_layers);
    for (r, (w_in, w_rec)) in w.into_iter().enumerate() {
        let k = r + 1;
        let beta = reader.f64(&format!("layer{k}.beta"), n)?;
        b_feedback.push(reader.matrix(&format!("layer{k}.b_feedback"), n, cfg.n_outputs)?);
        let in_mask = reader.mask(&format!("layer{k}.in_mask"), n, w_in.cols())?;
        let rec_mask = reader.mask(&format!("layer{k}.rec_mask"), n, n)?;
        layers.push(LayerParams {
            w_in,
            w_rec,
            in_mask,
            rec_mask,
            beta,
        });
    }
    let params = NetworkParams {
        config: cfg.clone(),
        neuron: h.neuron,
        layers,
        w_out,
        bias,
        b_feedback,
    };
    if !params.masks_hold() {
        return Err(ck_err("masked weights are non-zero"));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, BroadcastMode};

    fn sample(layers: usize, broadcast: BroadcastMode) -> Checkpoint {
        let cfg = NetworkConfig {
            n_layers: layers,
            n_neurons: 12,
            n_inputs: 5,
            n_outputs: 3,
            broadcast,
            ..NetworkConfig::default()
        };
        let params = init_network(&cfg, &NeuronParams::default(), 9).unwrap();
        let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        let mut opt = OptimizerState::new(&lens);
        for (i, m) in opt.m.iter_mut().enumerate() {
            m.iter_mut()
                .enumerate()
                .for_each(|(j, x)| *x = (i * 100 + j) as f64 * 1e-3 - 0.1);
        }
        for v in opt.v2.iter_mut() {
            v.iter_mut()
                .enumerate()
                .for_each(|(j, x)| *x = 1.0 / (j + 3) as f64);
        }
        opt.step_count = 17;
        Checkpoint {
            run: RunConfig::default(),
            data: DataSource::Timit {
                feature_hash: "abc".into(),
            },
            params,
            opt,
            progress: Progress {
                epoch: 2,
                cursor: 5,
                iter: 17,
                last_eval: Some(15),
            },
            best_val_miscls: Some(12.5),
        }
    }

    #[test]
    fn exact_round_trip() {
        for (layers, b) in [
            (1, BroadcastMode::Symmetric),
            (2, BroadcastMode::Random),
            (3, BroadcastMode::Adaptive),
        ] {
            let ck = sample(layers, b);
            let bytes = ck.to_bytes().unwrap();
            assert_eq!(&bytes[..4], b"EPCK");
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("best.ckpt");
        let ck = sample(1, BroadcastMode::Symmetric);
        ck.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), ck);
        assert!(!dir.path().join("best.ckpt.tmp").exists());
    }

    #[test]
    fn corruption_detected() {
        let bytes = sample(1, BroadcastMode::Symmetric).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..20]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut magic = bytes.clone();
        magic[1] = b'X';
        assert!(Checkpoint::from_bytes(&magic).is_err());
        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&version),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn trainer_round_trip() {
        let ck = sample(2, BroadcastMode::Symmetric);
        let t = ck.clone().into_trainer().unwrap();
        assert_eq!(t.progress, ck.progress);
        let back = Checkpoint::from_trainer(&t, &ck.run, ck.data.clone(), ck.best_val_miscls);
        assert_eq!(back, ck);
    }
}
