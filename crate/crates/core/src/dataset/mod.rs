//! Labelled frame sequences: the TIMIT corpus reader, feature caches and a
//! synthetic stand-in task.

pub mod audio;
pub mod cache;
pub mod phones;
mod synthetic;
pub mod timit;

pub use audio::read_audio;
pub use cache::{
    build_feature_cache, load_split, read_cache, read_manifest, write_cache, BuildOptions, Manifest,
};
pub use phones::{read_phones, PhoneInterval, PhoneMap, N_PHONES};
pub use synthetic::{SyntheticConfig, SyntheticTask};
pub use timit::{index_corpus, CorpusIndex, IndexMode, Split, UtteranceRecord, CORE_TEST_SPEAKERS};

use crate::linalg::Matrix;

/// Feature frames (`T x channels`) with one class index per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub frames: Matrix,
    pub labels: Vec<u16>,
}

impl Utterance {
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }
}
