use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// 25 ms at 16 kHz.
pub const FRAME_LEN: usize = 400;
/// 10 ms at 16 kHz.
pub const FRAME_HOP: usize = 160;
pub const FFT_LEN: usize = 512;
pub const SPECTRUM_BINS: usize = FFT_LEN / 2 + 1;

/// Short-time framing. Frames are centered on multiples of `hop` with
/// reflection padding, so an `n`-sample signal yields `1 + n / hop` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub frame_len: usize,
    pub hop: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { frame_len: FRAME_LEN, hop: FRAME_HOP }
    }
}

impl FrameConfig {
    pub fn frame_count(&self, n: usize) -> usize {
        1 + n / self.hop
    }
}

fn reflect_index(i: isize, n: usize) -> usize {
    // numpy "reflect": edge sample not repeated
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period.max(1));
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Centered frames with reflection padding.
pub fn frame_centered(signal: &[f64], cfg: FrameConfig) -> Vec<Vec<f64>> {
    assert!(signal.len() > 1, "need at least two samples to reflect");
    let half = (cfg.frame_len / 2) as isize;
    (0..cfg.frame_count(signal.len()))
        .map(|t| {
            let start = (t * cfg.hop) as isize - half;
            (0..cfg.frame_len as isize).map(|i| signal[reflect_index(start + i, signal.len())]).collect()
        })
        .collect()
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Orthonormal DCT-II as a dense `n_out x n` matrix (rows are basis vectors).
pub fn dct_ii_matrix(n: usize, n_out: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|q| {
            let scale = if q == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n).map(|j| scale * (PI * q as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos()).collect()
        })
        .collect()
}

/// Hann-windowed 512-point power spectrum of a 400-sample frame.
pub struct PowerSpectrum {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Default for PowerSpectrum {
    fn default() -> Self {
        Self::new()
    }
}

impl PowerSpectrum {
    pub fn new() -> Self {
        Self { window: hann_window(FRAME_LEN), fft: FftPlanner::new().plan_fft_forward(FFT_LEN) }
    }

    /// `|DFT|^2` for bins `0..=256`, unnormalized.
    pub fn compute(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), FRAME_LEN, "frame must be {FRAME_LEN} samples");
        let mut buf = vec![Complex::new(0.0, 0.0); FFT_LEN];
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = x * w;
        }
        self.fft.process(&mut buf);
        buf[..SPECTRUM_BINS].iter().map(|c| c.norm_sqr()).collect()
    }
}

pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    PowerSpectrum::new().compute(frame)
}
