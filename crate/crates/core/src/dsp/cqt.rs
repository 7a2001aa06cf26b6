//! Constant-Q transform of a 1-s segment.
//!
//! The transform is evaluated in the frequency domain: the zero-padded
//! segment is transformed once, and each CQ bin applies a Hann-shaped
//! band-pass window centered on `f_min * 2^(k/B)` whose half-width equals
//! `f_k / Q`. The windowed band is demodulated into a short buffer and
//! inverse transformed, which yields the bin's complex envelope at a
//! uniform decimated frame rate. Bins whose nominal bandwidth falls below
//! the frequency resolution of a 1-s signal get a minimum window width, so
//! the constant-Q property only holds above roughly 135 Hz.

use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio_io::SAMPLE_RATE_HZ;
use crate::preprocess::{Segment, SEGMENT_LEN};

/// Transform length of the zero-padded segment.
const PADDED_LEN: usize = 32_768;
/// Decimated envelope length over the padded signal.
const ENVELOPE_LEN: usize = 256;
/// Smallest allowed window half-width, in transform bins.
const MIN_HALF_WIDTH_BINS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqtConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub bins_per_octave: usize,
    /// Uniform resampling period: the first octave is split into this many
    /// equal steps when the log spectrum is resampled onto a linear axis.
    pub resample_period: usize,
}

impl Default for CqtConfig {
    fn default() -> Self {
        Self { f_min_hz: 15.0, f_max_hz: 8000.0, bins_per_octave: 96, resample_period: 16 }
    }
}

impl CqtConfig {
    /// `ceil(B * log2(f_max / f_min))`
    pub fn bin_count(&self) -> usize {
        (self.bins_per_octave as f64 * (self.f_max_hz / self.f_min_hz).log2()).ceil() as usize
    }

    pub fn center_frequency(&self, bin: usize) -> f64 {
        self.f_min_hz * 2f64.powf(bin as f64 / self.bins_per_octave as f64)
    }

    /// `1 / (2^(1/B) - 1)`
    pub fn q_factor(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    /// Fractional bin position of a frequency.
    pub fn bin_position(&self, hz: f64) -> f64 {
        self.bins_per_octave as f64 * (hz / self.f_min_hz).log2()
    }
}

/// Magnitudes, `bins x frames`, stored bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CqtSpectrogram {
    pub bins: usize,
    pub frames: usize,
    pub magnitudes: Vec<f64>,
}

impl CqtSpectrogram {
    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.magnitudes[bin * self.frames + frame]
    }

    pub fn bin(&self, bin: usize) -> &[f64] {
        &self.magnitudes[bin * self.frames..(bin + 1) * self.frames]
    }

    /// Time-averaged magnitude per bin.
    pub fn mean_per_bin(&self) -> Vec<f64> {
        (0..self.bins).map(|k| self.bin(k).iter().sum::<f64>() / self.frames as f64).collect()
    }
}

struct BandWindow {
    first_bin: usize,
    weights: Vec<f64>,
}

pub struct Cqt {
    config: CqtConfig,
    windows: Vec<BandWindow>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Cqt {
    pub fn new(config: CqtConfig) -> Self {
        let nyquist_bin = PADDED_LEN / 2;
        let bin_hz = f64::from(SAMPLE_RATE_HZ) / PADDED_LEN as f64;
        let q = config.q_factor();
        let windows = (0..config.bin_count())
            .map(|k| {
                let center = config.center_frequency(k) / bin_hz;
                let half = (center / q).max(MIN_HALF_WIDTH_BINS);
                let lo = (center - half).ceil().max(0.0) as usize;
                let hi = ((center + half).floor() as usize).min(nyquist_bin);
                let weights = (lo..=hi)
                    .map(|j| 0.5 * (1.0 + (std::f64::consts::PI * (j as f64 - center) / half).cos()))
                    .collect::<Vec<_>>();
                assert!(weights.len() <= ENVELOPE_LEN, "band wider than envelope buffer");
                BandWindow { first_bin: lo, weights }
            })
            .collect();
        let mut planner = FftPlanner::new();
        Self { config, windows, forward: planner.plan_fft_forward(PADDED_LEN), inverse: planner.plan_fft_inverse(ENVELOPE_LEN) }
    }

    pub fn config(&self) -> &CqtConfig {
        &self.config
    }

    /// Envelope frames covering the unpadded segment.
    pub fn frame_count(&self) -> usize {
        (SEGMENT_LEN * ENVELOPE_LEN).div_ceil(PADDED_LEN)
    }

    /// Samples between consecutive frames.
    pub fn frame_hop(&self) -> usize {
        PADDED_LEN / ENVELOPE_LEN
    }

    pub fn compute(&self, samples: &[f64]) -> CqtSpectrogram {
        assert_eq!(samples.len(), SEGMENT_LEN, "CQT expects a {SEGMENT_LEN}-sample segment");
        let mut spectrum = vec![Complex::new(0.0, 0.0); PADDED_LEN];
        for (s, &x) in spectrum.iter_mut().zip(samples) {
            s.re = x;
        }
        self.forward.process(&mut spectrum);

        let frames = self.frame_count();
        // analytic band signal scaled so a unit-amplitude tone at a bin
        // center has envelope magnitude ~1
        let scale = 2.0 / PADDED_LEN as f64;
        let mut magnitudes = Vec::with_capacity(self.windows.len() * frames);
        let mut buf = vec![Complex::new(0.0, 0.0); ENVELOPE_LEN];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for w in &self.windows {
            buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
            for (i, &weight) in w.weights.iter().enumerate() {
                let j = w.first_bin + i;
                buf[j % ENVELOPE_LEN] += spectrum[j] * weight;
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            magnitudes.extend(buf[..frames].iter().map(|c| c.norm() * scale));
        }
        CqtSpectrogram { bins: self.windows.len(), frames, magnitudes }
    }
}

pub(crate) fn default_cqt() -> &'static Cqt {
    static CQT: OnceLock<Cqt> = OnceLock::new();
    CQT.get_or_init(|| Cqt::new(CqtConfig::default()))
}

pub fn cqt(seg: &Segment, cfg: &CqtConfig) -> CqtSpectrogram {
    if *cfg == CqtConfig::default() {
        default_cqt().compute(&seg.samples)
    } else {
        Cqt::new(*cfg).compute(&seg.samples)
    }
}
