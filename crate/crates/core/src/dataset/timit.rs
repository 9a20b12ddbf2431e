//! TIMIT directory layout: `{TRAIN,TEST}/DRn/SPEAKER/SENTENCE.{WAV,PHN}`,
//! matched case-insensitively.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 24 speakers of the standard core test set (2 male, 1 female per
/// dialect region), as listed in the TIMIT documentation (`testset.doc`).
pub const CORE_TEST_SPEAKERS: [&str; 24] = [
    "MDAB0", "MWBT0", "FELC0", "MTAS1", "MWEW0", "FPAS0", "MJMP0", "MLNT0", "FPKT0", "MLLL0",
    "MTLS0", "FJLM0", "MBPM0", "MKLT0", "FNLP0", "MCMJ0", "MJDH0", "FMGD0", "MGRT0", "MNJM0",
    "FDHC0", "MJLN0", "MPAM0", "FMLD0",
];

pub const N_TRAIN: usize = 3696;
pub const N_VAL: usize = 400;
pub const N_TEST: usize = 192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SentenceType {
    /// Dialect calibration sentences, read by every speaker.
    Sa,
    /// Phonetically compact.
    Sx,
    /// Phonetically diverse.
    Si,
}

impl SentenceType {
    fn from_id(id: &str) -> Option<Self> {
        let id = id.to_ascii_uppercase();
        if id.starts_with("SA") {
            Some(SentenceType::Sa)
        } else if id.starts_with("SX") {
            Some(SentenceType::Sx)
        } else if id.starts_with("SI") {
            Some(SentenceType::Si)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub audio: PathBuf,
    pub phones: PathBuf,
    /// Upper-case speaker directory name, e.g. `FCJF0`.
    pub speaker: String,
    /// Upper-case dialect directory name, e.g. `DR1`.
    pub dialect: String,
    /// Upper-case sentence id, e.g. `SI1027`.
    pub sentence: String,
    pub kind: SentenceType,
    pub split: Split,
}

impl UtteranceRecord {
    /// Stable file-name-safe identifier.
    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.dialect, self.speaker, self.sentence).to_ascii_lowercase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    /// Split sizes must be exactly 3696/400/192.
    Strict,
    /// Any subset of the layout; validation takes up to 400 utterances.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIndex {
    /// Ordered by split, then by path.
    pub records: Vec<UtteranceRecord>,
    /// Non-SA test-side utterances not drawn for validation.
    pub unused: usize,
}

impl CorpusIndex {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &UtteranceRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn speakers(&self, split: Split) -> BTreeSet<&str> {
        self.split(split).map(|r| r.speaker.as_str()).collect()
    }
}

fn is_core_speaker(name: &str) -> bool {
    CORE_TEST_SPEAKERS
        .iter()
        .any(|s| s.eq_ignore_ascii_case(name))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn file_name_upper(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().to_ascii_uppercase())
        .unwrap_or_default()
}

fn find_child_dir(root: &Path, name: &str) -> Result<Option<PathBuf>> {
    Ok(sorted_entries(root)?
        .into_iter()
        .find(|p| p.is_dir() && file_name_upper(p) == name))
}

/// Walks one of `TRAIN` / `TEST`, collecting `(record-without-split, is_core)`.
fn scan_side(side: &Path, problems: &mut Vec<PathBuf>) -> Result<Vec<(UtteranceRecord, bool)>> {
    let mut out = Vec::new();
    for dialect_dir in sorted_entries(side)? {
        if !dialect_dir.is_dir() {
            continue;
        }
        let dialect = file_name_upper(&dialect_dir);
        if !dialect.starts_with("DR") {
            problems.push(dialect_dir);
            continue;
        }
        for speaker_dir in sorted_entries(&dialect_dir)? {
            if !speaker_dir.is_dir() {
                problems.push(speaker_dir);
                continue;
            }
            let speaker = file_name_upper(&speaker_dir);
            let files = sorted_entries(&speaker_dir)?;
            for audio in &files {
                let ext = audio
                    .extension()
                    .map(|e| e.to_string_lossy().to_ascii_uppercase());
                if ext.as_deref() != Some("WAV") {
                    continue;
                }
                let stem = audio
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let phones = files.iter().find(|p| {
                    p.file_stem()
                        .map(|s| s.to_string_lossy().eq_ignore_ascii_case(&stem))
                        == Some(true)
                        && p.extension()
                            .map(|e| e.to_string_lossy().eq_ignore_ascii_case("phn"))
                            == Some(true)
                });
                let Some(phones) = phones else {
                    problems.push(audio.clone());
                    continue;
                };
                let Some(kind) = SentenceType::from_id(&stem) else {
                    problems.push(audio.clone());
                    continue;
                };
                out.push((
                    UtteranceRecord {
                        audio: audio.clone(),
                        phones: phones.clone(),
                        speaker: speaker.clone(),
                        dialect: dialect.clone(),
                        sentence: stem.to_ascii_uppercase(),
                        kind,
                        split: Split::Train,
                    },
                    is_core_speaker(&speaker),
                ));
            }
        }
    }
    Ok(out)
}

/// Train: every non-SA utterance under `TRAIN`. Test: non-SA utterances of
/// the core speakers. Validation: a seeded draw of 400 non-SA utterances
/// from the remaining `TEST` speakers.
pub fn index_corpus(root: impl AsRef<Path>, seed: u64, mode: IndexMode) -> Result<CorpusIndex> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Index {
            reason: "corpus root is not a directory".into(),
            paths: vec![root.to_path_buf()],
        });
    }
    let mut problems = Vec::new();
    let train_dir = find_child_dir(root, "TRAIN")?;
    let test_dir = find_child_dir(root, "TEST")?;
    let (Some(train_dir), Some(test_dir)) = (train_dir, test_dir) else {
        return Err(Error::Index {
            reason: "expected TRAIN and TEST directories".into(),
            paths: vec![root.to_path_buf()],
        });
    };
    let train_side = scan_side(&train_dir, &mut problems)?;
    let test_side = scan_side(&test_dir, &mut problems)?;
    if !problems.is_empty() {
        return Err(Error::Index {
            reason: format!(
                "{} malformed entries or unpaired audio files",
                problems.len()
            ),
            paths: problems,
        });
    }

    let mut train = Vec::new();
    for (rec, core) in train_side {
        if core {
            problems.push(rec.audio);
        } else if rec.kind != SentenceType::Sa {
            train.push(rec);
        }
    }
    if !problems.is_empty() {
        return Err(Error::Index {
            reason: "core test speakers found under TRAIN".into(),
            paths: problems,
        });
    }

    let mut test = Vec::new();
    let mut pool = Vec::new();
    for (mut rec, core) in test_side {
        if rec.kind == SentenceType::Sa {
            continue;
        }
        if core {
            rec.split = Split::Test;
            test.push(rec);
        } else {
            rec.split = Split::Val;
            pool.push(rec);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let n_val = N_VAL.min(pool.len());
    let unused = pool.len() - n_val;
    pool.truncate(n_val);
    pool.sort_by(|a, b| a.audio.cmp(&b.audio));

    if mode == IndexMode::Strict {
        let counts = [train.len(), pool.len(), test.len()];
        if counts != [N_TRAIN, N_VAL, N_TEST] {
            return Err(Error::Index {
                reason: format!(
                    "split sizes {counts:?}, expected [{N_TRAIN}, {N_VAL}, {N_TEST}]; \
                     use partial indexing for corpus subsets"
                ),
                paths: vec![root.to_path_buf()],
            });
        }
    }

    let mut records = train;
    records.append(&mut pool);
    records.append(&mut test);
    let index = CorpusIndex { records, unused };
    debug_assert!(index.speakers(Split::Test).is_disjoint(
        &index
            .speakers(Split::Train)
            .union(&index.speakers(Split::Val))
            .copied()
            .collect()
    ));
    Ok(index)
}
