//! Writes a labelled synthetic corpus: natural clips, their replays through
//! each channel, and a segment manifest.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::channel::{simulate_replay, ChannelConfig, ChannelError};
use super::speech::{synth_voice, VoiceProfile};
use crate::audio_io::{write_wav, AudioClip, AudioError, SAMPLE_RATE_HZ};
use crate::eval::manifest::{write_manifest, ManifestError, ManifestRecord, Source, Split};
use crate::preprocess::{segment_key, segment_starts, Label, SEGMENT_HOP, SEGMENT_LEN};

pub const MIN_SPEAKERS: usize = 5;
pub const MANIFEST_NAME: &str = "manifest.csv";
pub const CHANNELS_NAME: &str = "channels.txt";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("need at least {MIN_SPEAKERS} speakers, got {0}")]
    TooFewSpeakers(usize),
    #[error("invalid dataset parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n_speakers: usize,
    pub clips_per_speaker: usize,
    pub clip_duration_s: f64,
    pub channels: Vec<ChannelConfig>,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self { n_speakers: 10, clips_per_speaker: 6, clip_duration_s: 3.0, channels: super::channel::default_channels(), seed: 0 }
    }
}

/// splitmix64 finaliser, for deriving independent child seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Speakers `0..n` in order: the first 60 % train, the next 20 % val, the rest test.
pub fn speaker_split(index: usize, n_speakers: usize) -> Split {
    let n_train = (n_speakers * 6).div_ceil(10);
    let n_val = ((n_speakers - n_train) / 2).max(1);
    if index < n_train {
        Split::Train
    } else if index < n_train + n_val {
        Split::Val
    } else {
        Split::Test
    }
}

pub fn read_channels(text: &str) -> Result<Vec<ChannelConfig>, ChannelError> {
    text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty()).map(ChannelConfig::parse).collect()
}

fn segment_records(
    clip: &AudioClip,
    rel_path: &str,
    label: Label,
    split: Split,
    speaker: &str,
    device: &str,
) -> Vec<ManifestRecord> {
    segment_starts(clip.len(), SEGMENT_LEN, SEGMENT_HOP)
        .map(|start| ManifestRecord {
            key: segment_key(&clip.id, start),
            path: rel_path.to_string(),
            label,
            split,
            speaker_id: speaker.to_string(),
            device_id: device.to_string(),
            source: Source::Synthetic,
        })
        .collect()
}

/// Generates the corpus under `out_dir` and returns the manifest rows.
pub fn build_synthetic_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<Vec<ManifestRecord>, SimError> {
    if spec.n_speakers < MIN_SPEAKERS {
        return Err(SimError::TooFewSpeakers(spec.n_speakers));
    }
    if spec.clips_per_speaker == 0 || spec.channels.is_empty() {
        return Err(SimError::Invalid("need at least one clip per speaker and one channel".into()));
    }
    if spec.clip_duration_s * (SAMPLE_RATE_HZ as f64) < SEGMENT_LEN as f64 {
        return Err(SimError::Invalid(format!("clips of {} s hold no 1-s segment", spec.clip_duration_s)));
    }
    for c in &spec.channels {
        c.validate()?;
    }
    fs::create_dir_all(out_dir.join("natural"))?;
    fs::create_dir_all(out_dir.join("emitted"))?;

    let mut records = Vec::new();
    for s in 0..spec.n_speakers {
        let speaker = format!("spk{s:02}");
        let split = speaker_split(s, spec.n_speakers);
        let voice = VoiceProfile::random(mix_seed(spec.seed, s as u64));
        for c in 0..spec.clips_per_speaker {
            let clip_seed = mix_seed(mix_seed(spec.seed, s as u64), 1000 + c as u64);
            let id = format!("{speaker}_clip{c:02}");
            let natural = AudioClip::new(id.clone(), synth_voice(&voice, clip_seed, spec.clip_duration_s));
            let rel = format!("natural/{id}.wav");
            write_wav(&natural, out_dir.join(&rel))?;
            records.extend(segment_records(&natural, &rel, Label::Natural, split, &speaker, "mic"));

            for (ch, channel) in spec.channels.iter().enumerate() {
                let mut replay = simulate_replay(&natural, channel)?;
                replay.id = format!("{id}_ch{ch}");
                let rel = format!("emitted/{}.wav", replay.id);
                write_wav(&replay, out_dir.join(&rel))?;
                records.extend(segment_records(&replay, &rel, Label::Emitted, split, &speaker, &format!("ch{ch}")));
            }
        }
    }
    write_manifest(&records, out_dir.join(MANIFEST_NAME))?;
    let channels: String = spec.channels.iter().map(|c| c.to_line() + "\n").collect();
    fs::write(out_dir.join(CHANNELS_NAME), channels)?;
    log::info!("wrote {} segments from {} speakers to {}", records.len(), spec.n_speakers, out_dir.display());
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::manifest::load_manifest;

    #[test]
    fn split_proportions() {
        let splits: Vec<Split> = (0..10).map(|i| speaker_split(i, 10)).collect();
        assert_eq!(splits.iter().filter(|&&s| s == Split::Train).count(), 6);
        assert_eq!(splits.iter().filter(|&&s| s == Split::Val).count(), 2);
        assert_eq!(splits.iter().filter(|&&s| s == Split::Test).count(), 2);
        for n in 5..30 {
            let test = (0..n).filter(|&i| speaker_split(i, n) == Split::Test).count();
            let val = (0..n).filter(|&i| speaker_split(i, n) == Split::Val).count();
            assert!(test >= 1 && val >= 1, "n={n}");
        }
    }

    #[test]
    fn small_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec { n_speakers: 5, clips_per_speaker: 1, clip_duration_s: 1.5, ..Default::default() };
        let recs = build_synthetic_dataset(&spec, dir.path()).unwrap();
        // one clip of 1.5 s gives two segments; four versions per clip
        assert_eq!(recs.len(), 5 * 4 * 2);
        assert_eq!(load_manifest(dir.path().join(MANIFEST_NAME)).unwrap(), recs);
        assert!(dir.path().join("emitted/spk04_clip00_ch2.wav").exists());
        assert_eq!(read_channels(&fs::read_to_string(dir.path().join(CHANNELS_NAME)).unwrap()).unwrap(), spec.channels);
    }

    #[test]
    fn too_few_speakers() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec { n_speakers: 4, ..Default::default() };
        assert!(matches!(build_synthetic_dataset(&spec, dir.path()), Err(SimError::TooFewSpeakers(4))));
    }
}
