//! Per-utterance binary feature caches and the manifest describing them.
//!
//! File layout, all little-endian: `b"EPFT"`, version `u32`, frame count
//! `u32`, channel count `u32`, labels flag `u8`, frames as row-major `f32`,
//! then one `u16` label per frame when the flag is set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::phones::{read_phones, PhoneMap};
use super::timit::{index_corpus, IndexMode, Split};
use super::{audio::read_audio, Utterance};
use crate::error::{Error, Result};
use crate::features::{
    align_targets, standardize, ChannelStats, FeatureConfig, MfccExtractor, StatsAccumulator,
};
use crate::linalg::Matrix;

pub const CACHE_MAGIC: &[u8; 4] = b"EPFT";
pub const CACHE_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1;

fn cache_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Cache {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Frames are stored as `f32`; values already representable in `f32`
/// survive the round trip bit for bit.
pub fn encode_cache(frames: &Matrix, labels: Option<&[u16]>) -> Result<Vec<u8>> {
    if let Some(l) = labels {
        if l.len() != frames.rows() {
            return Err(Error::Shape {
                what: "labels per frame",
                expected: frames.rows(),
                actual: l.len(),
            });
        }
    }
    let n_frames =
        u32::try_from(frames.rows()).map_err(|_| Error::Input("too many frames".into()))?;
    let n_channels =
        u32::try_from(frames.cols()).map_err(|_| Error::Input("too many channels".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * frames.as_slice().len() + 2 * frames.rows());
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&n_frames.to_le_bytes());
    out.extend_from_slice(&n_channels.to_le_bytes());
    out.push(labels.is_some() as u8);
    for &x in frames.as_slice() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    for &l in labels.unwrap_or(&[]) {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cache(bytes: &[u8], path: &Path) -> Result<(Matrix, Option<Vec<u16>>)> {
    if bytes.len() < HEADER_LEN {
        return Err(cache_error(
            path,
            format!("{} bytes is shorter than the header", bytes.len()),
        ));
    }
    if &bytes[..4] != CACHE_MAGIC {
        return Err(cache_error(path, "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != CACHE_VERSION {
        return Err(cache_error(path, format!("unsupported version {version}")));
    }
    let n_frames = word(8) as usize;
    let n_channels = word(12) as usize;
    let has_labels = match bytes[16] {
        0 => false,
        1 => true,
        f => return Err(cache_error(path, format!("bad labels flag {f}"))),
    };
    let n_values = n_frames * n_channels;
    let expected = HEADER_LEN + 4 * n_values + if has_labels { 2 * n_frames } else { 0 };
    if bytes.len() != expected {
        return Err(cache_error(
            path,
            format!(
                "length mismatch: header implies {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let body = &bytes[HEADER_LEN..];
    let data = body[..4 * n_values]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let labels = has_labels.then(|| {
        body[4 * n_values..]
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect()
    });
    Ok((Matrix::from_vec(n_frames, n_channels, data), labels))
}

pub fn write_cache(path: impl AsRef<Path>, frames: &Matrix, labels: Option<&[u16]>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_cache(frames, labels)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<(Matrix, Option<Vec<u16>>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cache(&bytes, path)
}

/// Describes a cache directory. Cache files hold raw features; loaders
/// standardize with `stats`, computed over the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub feature_config: FeatureConfig,
    pub config_hash: String,
    pub seed: u64,
    pub phone_map: PhoneMap,
    pub stats: ChannelStats,
    /// Utterance ids per split; each id names `<id>.epft` in the cache dir.
    pub splits: BTreeMap<Split, Vec<String>>,
}

impl Manifest {
    pub fn count(&self, split: Split) -> usize {
        self.splits.get(&split).map_or(0, Vec::len)
    }
}

pub fn read_manifest(cache_dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = cache_dir.as_ref().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| cache_error(&path, e.to_string()))
}

fn write_manifest(cache_dir: &Path, m: &Manifest) -> Result<()> {
    let path = cache_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(m)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn cache_path(cache_dir: &Path, id: &str) -> PathBuf {
    cache_dir.join(format!("{id}.epft"))
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub corpus_root: PathBuf,
    pub cache_dir: PathBuf,
    pub seed: u64,
    pub mode: IndexMode,
    /// Rebuild even when an up-to-date manifest exists.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildSummary {
    pub manifest: Manifest,
    /// True when an existing cache matched and nothing was written.
    pub reused: bool,
}

/// Indexes the corpus, extracts features for every utterance in parallel and
/// writes one cache file per utterance plus the manifest (written last).
pub fn build_feature_cache(opts: &BuildOptions, cfg: &FeatureConfig) -> Result<BuildSummary> {
    cfg.validate()?;
    let hash = cfg.hash();
    if !opts.force {
        match read_manifest(&opts.cache_dir) {
            Ok(m) if m.config_hash == hash && m.seed == opts.seed => {
                log::info!(
                    "feature cache in {} is up to date",
                    opts.cache_dir.display()
                );
                return Ok(BuildSummary {
                    manifest: m,
                    reused: true,
                });
            }
            Ok(_) => log::info!("feature cache is stale, rebuilding"),
            Err(_) => {}
        }
    }
    let index = index_corpus(&opts.corpus_root, opts.seed, opts.mode)?;
    std::fs::create_dir_all(&opts.cache_dir).map_err(|e| Error::io(&opts.cache_dir, e))?;

    // Sequential so class indices follow corpus order.
    let mut phone_map = PhoneMap::new();
    let mut labelled = Vec::with_capacity(index.records.len());
    for rec in &index.records {
        let intervals = read_phones(&rec.phones)?;
        labelled.push(phone_map.label(&intervals)?);
    }

    let extractor = MfccExtractor::new(cfg.clone())?;
    let written: Vec<(Split, String, Option<Matrix>)> = index
        .records
        .par_iter()
        .zip(labelled.par_iter())
        .map(|(rec, intervals)| {
            let samples = read_audio(&rec.audio, cfg.sample_rate)?;
            let frames = extractor.extract(&samples)?;
            let labels = align_targets(intervals, frames.rows(), cfg)?;
            let id = rec.id();
            write_cache(cache_path(&opts.cache_dir, &id), &frames, Some(&labels))?;
            let train_frames = (rec.split == Split::Train).then(|| round_to_f32(frames));
            Ok((rec.split, id, train_frames))
        })
        .collect::<Result<_>>()?;

    let mut acc = StatsAccumulator::new();
    let mut splits: BTreeMap<Split, Vec<String>> =
        Split::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for (split, id, frames) in &written {
        if let Some(f) = frames {
            acc.add(f)?;
        }
        splits
            .get_mut(split)
            .expect("all splits present")
            .push(id.clone());
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        feature_config: cfg.clone(),
        config_hash: hash,
        seed: opts.seed,
        phone_map,
        stats: acc.finish()?,
        splits,
    };
    write_manifest(&opts.cache_dir, &manifest)?;
    Ok(BuildSummary {
        manifest,
        reused: false,
    })
}

/// Statistics should describe what loaders will read back.
fn round_to_f32(mut m: Matrix) -> Matrix {
    for x in m.as_mut_slice() {
        *x = *x as f32 as f64;
    }
    m
}

/// Loads and standardizes one split. Refuses caches built with a different
/// feature configuration.
pub fn load_split(
    cache_dir: impl AsRef<Path>,
    split: Split,
    cfg: &FeatureConfig,
) -> Result<(Vec<Utterance>, Manifest)> {
    let cache_dir = cache_dir.as_ref();
    let manifest = read_manifest(cache_dir)?;
    if manifest.config_hash != cfg.hash() {
        return Err(cache_error(
            &cache_dir.join(MANIFEST_FILE),
            "built with a different feature configuration; rebuild with `eprop features --force`",
        ));
    }
    let ids = manifest
        .splits
        .get(&split)
        .map(Vec::as_slice)
        .unwrap_or(&[]);
    let utts = ids
        .par_iter()
        .map(|id| {
            let path = cache_path(cache_dir, id);
            let (mut frames, labels) = read_cache(&path)?;
            let labels = labels.ok_or_else(|| cache_error(&path, "no labels"))?;
            if frames.cols() != manifest.stats.mean.len() {
                return Err(cache_error(&path, "channel count differs from manifest"));
            }
            standardize(&mut frames, &manifest.stats);
            Ok(Utterance { frames, labels })
        })
        .collect::<Result<_>>()?;
    Ok((utts, manifest))
}
