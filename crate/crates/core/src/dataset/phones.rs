//! Phone transcripts and the phone-to-class map.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledInterval;

/// Number of distinct phone classes.
pub const N_PHONES: usize = 61;

/// `[start, end)` in samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneInterval {
    pub start: u64,
    pub end: u64,
    pub phone: String,
}

pub fn read_phones(path: impl AsRef<Path>) -> Result<Vec<PhoneInterval>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_phones(&text, path)
}

/// Lines are `start end phone`. Out-of-order lines are sorted; overlaps and
/// gaps are reported but kept.
pub fn parse_phones(text: &str, path: &Path) -> Result<Vec<PhoneInterval>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Format {
            path: path.to_path_buf(),
            reason: format!(
                "line {}: expected `start end phone`, got {line:?}",
                lineno + 1
            ),
        };
        let mut parts = line.split_whitespace();
        let (Some(s), Some(e), Some(p), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let start: u64 = s.parse().map_err(|_| bad())?;
        let end: u64 = e.parse().map_err(|_| bad())?;
        if end < start {
            return Err(bad());
        }
        out.push(PhoneInterval {
            start,
            end,
            phone: p.to_string(),
        });
    }
    if out.windows(2).any(|w| w[1].start < w[0].start) {
        log::warn!("{}: phone intervals out of order, sorting", path.display());
        out.sort_by_key(|iv| (iv.start, iv.end));
    }
    for w in out.windows(2) {
        if w[1].start < w[0].end {
            log::warn!(
                "{}: overlapping intervals at sample {}",
                path.display(),
                w[1].start
            );
        } else if w[1].start > w[0].end {
            log::warn!(
                "{}: gap between samples {} and {}",
                path.display(),
                w[0].end,
                w[1].start
            );
        }
    }
    Ok(out)
}

/// Phone strings to class indices, assigned in order of first encounter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct PhoneMap {
    phones: Vec<String>,
    index: HashMap<String, u16>,
}

impl PhoneMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    pub fn get(&self, phone: &str) -> Option<u16> {
        self.index.get(phone).copied()
    }

    pub fn phone(&self, class: u16) -> Option<&str> {
        self.phones.get(class as usize).map(String::as_str)
    }

    pub fn phones(&self) -> &[String] {
        &self.phones
    }

    pub fn get_or_insert(&mut self, phone: &str) -> Result<u16> {
        if let Some(c) = self.get(phone) {
            return Ok(c);
        }
        if self.phones.len() >= N_PHONES {
            return Err(Error::PhoneMapFull {
                capacity: N_PHONES,
                phone: phone.to_string(),
            });
        }
        let c = self.phones.len() as u16;
        self.phones.push(phone.to_string());
        self.index.insert(phone.to_string(), c);
        Ok(c)
    }

    /// Converts intervals to class-labelled intervals, growing the map.
    pub fn label(&mut self, intervals: &[PhoneInterval]) -> Result<Vec<LabeledInterval>> {
        intervals
            .iter()
            .map(|iv| {
                Ok(LabeledInterval {
                    start: iv.start,
                    end: iv.end,
                    label: self.get_or_insert(&iv.phone)?,
                })
            })
            .collect()
    }
}

impl From<Vec<String>> for PhoneMap {
    fn from(phones: Vec<String>) -> Self {
        let mut map = PhoneMap::new();
        for p in phones {
            // Duplicates collapse; capacity was enforced when the map was built.
            if map.get(&p).is_none() {
                map.index.insert(p.clone(), map.phones.len() as u16);
                map.phones.push(p);
            }
        }
        map
    }
}

impl From<PhoneMap> for Vec<String> {
    fn from(map: PhoneMap) -> Self {
        map.phones
    }
}
