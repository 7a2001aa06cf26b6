//! WAV decoding and encoding.
//!
//! Only one on-disk format is accepted: RIFF/WAVE, PCM (format tag 1),
//! 16-bit, mono, 16 kHz. Anything else is rejected rather than converted,
//! so corpus problems surface at load time.
//!
//! Samples map to reals as `value / 32768`, which makes `-1.0` exactly
//! representable; encoding saturates at `32767`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

/// The only sample rate the pipeline accepts.
pub const SAMPLE_RATE_HZ: u32 = 16_000;

const PCM_SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("not a RIFF/WAVE file")]
    NotWav,
    #[error("unsupported encoding: format tag {format_tag}, {bits_per_sample} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits_per_sample: u16 },
    #[error("expected mono audio, found {0} channels")]
    ChannelMismatch(u16),
    #[error("expected {SAMPLE_RATE_HZ} Hz, found {0} Hz")]
    RateMismatch(u32),
    #[error("truncated file: {0}")]
    TruncatedFile(&'static str),
    #[error("sample {index} is not in [-1, 1]: {value}")]
    OutOfRange { index: usize, value: f64 },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] io::Error),
}

/// A decoded mono clip.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, samples: Vec<f64>) -> Self {
        Self { id: id.into(), sample_rate_hz: SAMPLE_RATE_HZ, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes an in-memory WAV image. `id` becomes the clip id.
pub fn decode_wav(bytes: &[u8], id: impl Into<String>) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWav);
    }

    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    loop {
        if pos + 8 > bytes.len() {
            return Err(AudioError::TruncatedFile("missing data chunk"));
        }
        let chunk_id = &bytes[pos..pos + 4];
        let chunk_len = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;

        match chunk_id {
            b"fmt " => {
                if chunk_len < 16 || body + 16 > bytes.len() {
                    return Err(AudioError::TruncatedFile("fmt chunk"));
                }
                let format_tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                format = Some((format_tag, channels, rate, bits));
            }
            b"data" => {
                let (format_tag, channels, rate, bits) =
                    format.ok_or(AudioError::TruncatedFile("data chunk before fmt chunk"))?;
                if format_tag != 1 || bits != 16 {
                    return Err(AudioError::UnsupportedEncoding { format_tag, bits_per_sample: bits });
                }
                if channels != 1 {
                    return Err(AudioError::ChannelMismatch(channels));
                }
                if rate != SAMPLE_RATE_HZ {
                    return Err(AudioError::RateMismatch(rate));
                }
                if body + chunk_len > bytes.len() {
                    return Err(AudioError::TruncatedFile("data chunk shorter than its header"));
                }
                if !chunk_len.is_multiple_of(2) {
                    return Err(AudioError::TruncatedFile("odd data chunk length"));
                }
                let samples = bytes[body..body + chunk_len]
                    .chunks_exact(2)
                    .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / PCM_SCALE)
                    .collect();
                return Ok(AudioClip { id: id.into(), sample_rate_hz: rate, samples });
            }
            // LIST, fact, cue and friends
            _ => {}
        }
        // chunks are word aligned
        pos = body + chunk_len + (chunk_len & 1);
    }
}

/// Reads a WAV file. The clip id is the file stem.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode_wav(&bytes, id)
}

/// Quantizes one sample to PCM16, saturating at the positive rail.
pub fn quantize(sample: f64) -> i16 {
    (sample * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes a clip as a canonical 44-byte-header WAV image.
pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>, AudioError> {
    if let Some((index, &value)) = clip.samples.iter().enumerate().find(|(_, s)| !(-1.0..=1.0).contains(*s)) {
        return Err(AudioError::OutOfRange { index, value });
    }
    let data_len = (clip.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    Ok(out)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let bytes = encode_wav(clip)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a WAV image field by field, independent of `encode_wav`.
    fn wav_bytes(channels: u16, rate: u32, bits: u16, format_tag: u16, pcm: &[i16]) -> Vec<u8> {
        let data: Vec<u8> = pcm.iter().flat_map(|s| s.to_le_bytes()).collect();
        let mut v = Vec::new();
        v.extend_from_slice(b"RIFF");
        v.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        v.extend_from_slice(b"WAVE");
        v.extend_from_slice(b"fmt ");
        v.extend_from_slice(&16u32.to_le_bytes());
        v.extend_from_slice(&format_tag.to_le_bytes());
        v.extend_from_slice(&channels.to_le_bytes());
        v.extend_from_slice(&rate.to_le_bytes());
        v.extend_from_slice(&(rate * u32::from(channels) * u32::from(bits) / 8).to_le_bytes());
        v.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        v.extend_from_slice(&bits.to_le_bytes());
        v.extend_from_slice(b"data");
        v.extend_from_slice(&(data.len() as u32).to_le_bytes());
        v.extend_from_slice(&data);
        v
    }

    #[test]
    fn decodes_sine_fixture_sample_by_sample() {
        let amplitude = 0.5;
        let pcm: Vec<i16> = (0..16000)
            .map(|n| {
                let t = n as f64 / 16000.0;
                (amplitude * 32767.0 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()).round() as i16
            })
            .collect();
        let clip = decode_wav(&wav_bytes(1, 16000, 16, 1, &pcm), "sine").unwrap();
        assert_eq!(clip.len(), 16000);
        for (s, p) in clip.samples.iter().zip(&pcm) {
            assert_eq!(*s, f64::from(*p) / 32768.0);
        }
        let peak = clip.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((peak - amplitude * 32767.0 / 32768.0).abs() < 1.0 / 32768.0);
    }

    #[test]
    fn rejects_wrong_rate_channels_and_encoding() {
        let pcm = [0i16; 32];
        assert!(matches!(decode_wav(&wav_bytes(1, 44100, 16, 1, &pcm), "x"), Err(AudioError::RateMismatch(44100))));
        assert!(matches!(decode_wav(&wav_bytes(2, 16000, 16, 1, &pcm), "x"), Err(AudioError::ChannelMismatch(2))));
        assert!(matches!(
            decode_wav(&wav_bytes(1, 16000, 16, 3, &pcm), "x"),
            Err(AudioError::UnsupportedEncoding { format_tag: 3, .. })
        ));
        assert!(matches!(decode_wav(b"RIFX....WAVEfmt ", "x"), Err(AudioError::NotWav)));
    }

    #[test]
    fn truncated_data_chunk_is_an_error() {
        let mut bytes = wav_bytes(1, 16000, 16, 1, &[1, 2, 3, 4]);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_wav(&bytes, "x"), Err(AudioError::TruncatedFile(_))));
    }

    #[test]
    fn skips_extra_chunks() {
        let plain = wav_bytes(1, 16000, 16, 1, &[100, -200, 300]);
        // splice an odd-length LIST chunk (padded) between fmt and data
        let mut bytes = plain[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&plain[36..]);
        let clip = decode_wav(&bytes, "x").unwrap();
        assert_eq!(clip.samples, vec![100.0 / 32768.0, -200.0 / 32768.0, 300.0 / 32768.0]);
    }

    #[test]
    fn zeros_round_trip_exactly() {
        let clip = AudioClip::new("z", vec![0.0; 16000]);
        let back = decode_wav(&encode_wav(&clip).unwrap(), "z").unwrap();
        assert_eq!(back, clip);
    }

    #[test]
    fn positive_full_scale_saturates() {
        let clip = AudioClip::new("s", vec![1.0, -1.0]);
        let back = decode_wav(&encode_wav(&clip).unwrap(), "s").unwrap();
        assert_eq!(back.samples, vec![32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn out_of_range_samples_are_refused() {
        let clip = AudioClip::new("s", vec![0.0, 1.5]);
        assert!(matches!(encode_wav(&clip), Err(AudioError::OutOfRange { index: 1, .. })));
    }

    #[test]
    fn file_round_trip_uses_stem_as_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spk0_clip1.wav");
        let clip = AudioClip::new("spk0_clip1", vec![0.25, -0.5, 0.125]);
        write_wav(&clip, &path).unwrap();
        assert_eq!(read_wav(&path).unwrap(), clip);
    }

    proptest::proptest! {
        #[test]
        fn round_trip_error_within_one_lsb(samples in proptest::collection::vec(-1.0f64..=1.0, 0..2000)) {
            let clip = AudioClip::new("p", samples);
            let back = decode_wav(&encode_wav(&clip).unwrap(), "p").unwrap();
            proptest::prop_assert_eq!(back.len(), clip.len());
            for (a, b) in clip.samples.iter().zip(&back.samples) {
                proptest::prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
