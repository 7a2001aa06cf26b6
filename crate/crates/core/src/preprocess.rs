//! Segmentation into overlapping 1-s windows and per-segment energy
//! normalization.

use std::fmt;
use std::str::FromStr;

use crate::audio_io::AudioClip;

/// Samples per segment (1 s at 16 kHz).
pub const SEGMENT_LEN: usize = 16_000;
/// Hop between consecutive segments (50 % overlap).
pub const SEGMENT_HOP: usize = 8_000;
/// Default per-segment RMS, about -20 dBFS.
pub const TARGET_RMS: f64 = 0.1;
/// Segments quieter than this are flagged silent and left untouched.
pub const SILENCE_RMS: f64 = 1e-8;

/// Class of a segment. Class index 0 is natural, 1 is emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Natural,
    Emitted,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Natural, Label::Emitted];

    pub fn index(self) -> usize {
        match self {
            Label::Natural => 0,
            Label::Emitted => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Natural),
            1 => Some(Label::Emitted),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Natural => "natural",
            Label::Emitted => "emitted",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts case variants and the common anti-spoofing synonyms.
///
/// | input (case-insensitive)                         | label   |
/// |--------------------------------------------------|---------|
/// | natural, genuine, bonafide, bona-fide, human      | natural |
/// | emitted, spoof, spoofed, replay, replayed, loudspeaker | emitted |
impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "natural" | "genuine" | "bonafide" | "bona-fide" | "bona_fide" | "human" => Ok(Label::Natural),
            "emitted" | "spoof" | "spoofed" | "replay" | "replayed" | "loudspeaker" => Ok(Label::Emitted),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Canonical segment key, shared with the embedding exporter.
pub fn segment_key(clip_id: &str, start_sample: usize) -> String {
    format!("{clip_id}@{start_sample}")
}

/// Splits a key into clip id and start offset. The split is on the last `@`.
pub fn parse_segment_key(key: &str) -> Option<(&str, usize)> {
    let (clip, start) = key.rsplit_once('@')?;
    Some((clip, start.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub clip_id: String,
    pub start_sample: usize,
    pub label: Option<Label>,
    pub samples: Vec<f64>,
}

impl Segment {
    pub fn key(&self) -> String {
        segment_key(&self.clip_id, self.start_sample)
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Number of full windows in a signal of `n` samples.
pub fn segment_count(n: usize, window: usize, hop: usize) -> usize {
    assert!(window > 0 && hop > 0 && hop <= window, "need window > 0 and 0 < hop <= window");
    if n < window {
        0
    } else {
        (n - window) / hop + 1
    }
}

/// Start offsets of every full window. Trailing partial windows are dropped.
pub fn segment_starts(n: usize, window: usize, hop: usize) -> impl Iterator<Item = usize> {
    (0..segment_count(n, window, hop)).map(move |i| i * hop)
}

/// Cuts a clip into full windows, unlabeled.
///
/// # Panics
/// If `window == 0`, `hop == 0` or `hop > window`.
pub fn segment(clip: &AudioClip, window: usize, hop: usize) -> Vec<Segment> {
    segment_starts(clip.len(), window, hop)
        .map(|start| Segment {
            clip_id: clip.id.clone(),
            start_sample: start,
            label: None,
            samples: clip.samples[start..start + window].to_vec(),
        })
        .collect()
}

/// 1-s windows with 50 % overlap.
pub fn segment_default(clip: &AudioClip) -> Vec<Segment> {
    segment(clip, SEGMENT_LEN, SEGMENT_HOP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub segment: Segment,
    /// Input RMS was below [`SILENCE_RMS`]; samples were left unchanged.
    pub silent: bool,
}

/// Scales a segment to `target_rms`.
///
/// # Panics
/// If `target_rms` is not strictly positive.
pub fn normalize_energy(seg: Segment, target_rms: f64) -> Normalized {
    assert!(target_rms > 0.0, "target_rms must be positive");
    let level = seg.rms();
    if level < SILENCE_RMS {
        return Normalized { segment: seg, silent: true };
    }
    let gain = target_rms / level;
    let mut seg = seg;
    seg.samples.iter_mut().for_each(|s| *s *= gain);
    Normalized { segment: seg, silent: false }
}
