//! Segment manifests: one CSV row per 1-s segment.
//!
//! Header: `key,path,label,split,speaker_id,device_id,source`. Labels are
//! case-insensitive and accept the synonyms listed on [`Label`]'s
//! `FromStr`; split and source are case-insensitive.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::preprocess::Label;

pub const HEADER: [&str; 7] = ["key", "path", "label", "split", "speaker_id", "device_id", "source"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "val" | "valid" | "validation" | "dev" => Ok(Split::Val),
            "test" | "eval" | "testing" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Asvspoof,
    Inhouse,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Asvspoof => "asvspoof",
            Source::Inhouse => "inhouse",
            Source::Synthetic => "synthetic",
        }
    }

    /// Sources whose speakers must not cross splits.
    pub fn requires_speaker_disjoint(self) -> bool {
        matches!(self, Source::Inhouse | Source::Synthetic)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asvspoof" => Ok(Source::Asvspoof),
            "inhouse" | "in-house" => Ok(Source::Inhouse),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub key: String,
    /// WAV path relative to the manifest's directory, or an embedding key.
    pub path: String,
    pub label: Label,
    pub split: Split,
    pub speaker_id: String,
    pub device_id: String,
    pub source: Source,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: u64, column: &'static str, message: String },
    #[error("speaker {speaker:?} appears in splits {splits:?}")]
    SpeakerLeakage { speaker: String, splits: Vec<Split> },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: u64, column: &'static str, message: impl Into<String>) -> ManifestError {
    ManifestError::Parse { line, column, message: message.into() }
}

pub fn parse_manifest<R: Read>(reader: R) -> Result<Vec<ManifestRecord>, ManifestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::to_ascii_lowercase).ne(HEADER.iter().map(|s| s.to_string())) {
        return Err(parse_err(
            1,
            "header",
            format!("expected {}, found {}", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str, ManifestError> {
            let v = row.get(i).unwrap_or("");
            if v.is_empty() {
                Err(parse_err(line, HEADER[i], "empty field"))
            } else {
                Ok(v)
            }
        };
        records.push(ManifestRecord {
            key: field(0)?.to_string(),
            path: field(1)?.to_string(),
            label: field(2)?.parse().map_err(|e: String| parse_err(line, "label", e))?,
            split: field(3)?.parse().map_err(|e: String| parse_err(line, "split", e))?,
            speaker_id: field(4)?.to_string(),
            device_id: row.get(5).unwrap_or("").to_string(),
            source: field(6)?.parse().map_err(|e: String| parse_err(line, "source", e))?,
        });
    }
    validate(&records)?;
    Ok(records)
}

/// Checks key uniqueness and speaker-disjointness of splits.
pub fn validate(records: &[ManifestRecord]) -> Result<(), ManifestError> {
    let mut keys = HashSet::new();
    let mut speaker_splits: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    for r in records {
        if !keys.insert(r.key.as_str()) {
            return Err(ManifestError::DuplicateKey(r.key.clone()));
        }
        if r.source.requires_speaker_disjoint() {
            speaker_splits.entry(&r.speaker_id).or_default().insert(r.split);
        }
    }
    if let Some((speaker, splits)) = speaker_splits.into_iter().find(|(_, s)| s.len() > 1) {
        return Err(ManifestError::SpeakerLeakage { speaker: speaker.to_string(), splits: splits.into_iter().collect() });
    }
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, ManifestError> {
    parse_manifest(fs::File::open(path)?)
}

pub fn write_manifest_to<W: Write>(records: &[ManifestRecord], writer: W) -> Result<(), ManifestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.key.as_str(),
            r.path.as_str(),
            r.label.as_str(),
            r.split.as_str(),
            r.speaker_id.as_str(),
            r.device_id.as_str(),
            r.source.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_manifest(records: &[ManifestRecord], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    write_manifest_to(records, fs::File::create(path)?)
}

pub fn records_in_split(records: &[ManifestRecord], split: Split) -> Vec<&ManifestRecord> {
    records.iter().filter(|r| r.split == split).collect()
}
