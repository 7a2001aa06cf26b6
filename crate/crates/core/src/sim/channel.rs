//! Loudspeaker-to-microphone channel: band limiting, driver saturation,
//! room reverberation and additive noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

use crate::audio_io::{AudioClip, SAMPLE_RATE_HZ};
use crate::preprocess::rms;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    Invalid(String),
}

/// Butterworth high-pass at `low_hz` cascaded with a low-pass at `high_hz`.
/// A low-pass at or above Nyquist is skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandpass {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
}

/// Exponentially decaying noise tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reverb {
    pub rt60_s: f64,
    /// Direct-to-reverberant energy ratio.
    pub direct_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub bandpass: Option<Bandpass>,
    /// `tanh` drive; 0 disables the nonlinearity.
    pub drive: f64,
    pub reverb: Option<Reverb>,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn identity() -> Self {
        Self { bandpass: None, drive: 0.0, reverb: None, snr_db: None, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let nyquist = SAMPLE_RATE_HZ as f64 / 2.0;
        if let Some(b) = self.bandpass {
            if b.order == 0 || !(b.low_hz > 0.0 && b.low_hz < b.high_hz && b.low_hz < nyquist) {
                return Err(ChannelError::Invalid(format!("bandpass {b:?}")));
            }
        }
        if !(self.drive >= 0.0 && self.drive.is_finite()) {
            return Err(ChannelError::Invalid(format!("drive {}", self.drive)));
        }
        if let Some(r) = self.reverb {
            if !(r.rt60_s >= 0.0 && r.rt60_s <= 10.0 && r.direct_ratio > 0.0 && r.direct_ratio.is_finite()) {
                return Err(ChannelError::Invalid(format!("reverb {r:?}")));
            }
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(ChannelError::Invalid(format!("snr {s}")));
            }
        }
        Ok(())
    }

    /// Parses `low=100 high=7000 order=4 drive=2 rt60=0.3 direct=4 snr=30 seed=1`.
    /// Omitted stages are disabled.
    pub fn parse(line: &str) -> Result<Self, ChannelError> {
        let mut c = Self::identity();
        let (mut low, mut high, mut order) = (None, None, 4usize);
        let (mut rt60, mut direct) = (None, 4.0);
        for tok in line.split_whitespace() {
            let (k, v) =
                tok.split_once('=').ok_or_else(|| ChannelError::Invalid(format!("expected key=value, found {tok:?}")))?;
            let num = || v.parse::<f64>().map_err(|_| ChannelError::Invalid(format!("{k}: bad number {v:?}")));
            match k {
                "low" => low = Some(num()?),
                "high" => high = Some(num()?),
                "order" => order = num()? as usize,
                "drive" => c.drive = num()?,
                "rt60" => rt60 = Some(num()?),
                "direct" => direct = num()?,
                "snr" => c.snr_db = Some(num()?),
                "seed" => c.seed = v.parse().map_err(|_| ChannelError::Invalid(format!("seed {v:?}")))?,
                other => return Err(ChannelError::Invalid(format!("unknown key {other:?}"))),
            }
        }
        if low.is_some() || high.is_some() {
            c.bandpass =
                Some(Bandpass { low_hz: low.unwrap_or(1.0), high_hz: high.unwrap_or(SAMPLE_RATE_HZ as f64 / 2.0), order });
        }
        if let Some(rt60_s) = rt60 {
            c.reverb = Some(Reverb { rt60_s, direct_ratio: direct });
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_line(&self) -> String {
        let mut parts = Vec::new();
        if let Some(b) = self.bandpass {
            parts.push(format!("low={} high={} order={}", b.low_hz, b.high_hz, b.order));
        }
        if self.drive > 0.0 {
            parts.push(format!("drive={}", self.drive));
        }
        if let Some(r) = self.reverb {
            parts.push(format!("rt60={} direct={}", r.rt60_s, r.direct_ratio));
        }
        if let Some(s) = self.snr_db {
            parts.push(format!("snr={s}"));
        }
        parts.push(format!("seed={}", self.seed));
        parts.join(" ")
    }
}

/// Three devices of increasing degradation.
pub fn default_channels() -> Vec<ChannelConfig> {
    vec![
        ChannelConfig {
            bandpass: Some(Bandpass { low_hz: 300.0, high_hz: 6500.0, order: 4 }),
            drive: 1.5,
            reverb: Some(Reverb { rt60_s: 0.25, direct_ratio: 6.0 }),
            snr_db: Some(35.0),
            seed: 101,
        },
        ChannelConfig {
            bandpass: Some(Bandpass { low_hz: 400.0, high_hz: 5000.0, order: 4 }),
            drive: 2.5,
            reverb: Some(Reverb { rt60_s: 0.4, direct_ratio: 4.0 }),
            snr_db: Some(30.0),
            seed: 202,
        },
        ChannelConfig {
            bandpass: Some(Bandpass { low_hz: 500.0, high_hz: 4000.0, order: 2 }),
            drive: 3.5,
            reverb: Some(Reverb { rt60_s: 0.6, direct_ratio: 2.0 }),
            snr_db: Some(25.0),
            seed: 303,
        },
    ]
}

/// Normalised biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        Self { b: b.map(|v| v / a[0]), a: [a[1] / a[0], a[2] / a[0]] }
    }

    fn lowpass(f0: f64, q: f64, fs: f64) -> Self {
        let w = 2.0 * PI * f0 / fs;
        let (s, c) = w.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw([(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    fn highpass(f0: f64, q: f64, fs: f64) -> Self {
        let w = 2.0 * PI * f0 / fs;
        let (s, c) = w.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw([(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    /// Bilinear one-pole section stored as a degenerate biquad.
    fn first_order(f0: f64, fs: f64, high: bool) -> Self {
        let k = (PI * f0 / fs).tan();
        let a1 = (k - 1.0) / (k + 1.0);
        let b = if high { [1.0 / (1.0 + k), -1.0 / (1.0 + k), 0.0] } else { [k / (1.0 + k), k / (1.0 + k), 0.0] };
        Self { b, a: [a1, 0.0] }
    }

    /// Complex gain at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -2.0 * PI * freq_hz / fs);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }

    /// Transposed direct form II.
    pub fn filter(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + s1;
            s1 = self.b[1] * *v - self.a[0] * y + s2;
            s2 = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }
}

fn butterworth(order: usize, f0: f64, fs: f64, high: bool) -> Vec<Biquad> {
    let mut out: Vec<Biquad> = (0..order / 2)
        .map(|k| {
            let q = 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2 * order) as f64).sin());
            if high {
                Biquad::highpass(f0, q, fs)
            } else {
                Biquad::lowpass(f0, q, fs)
            }
        })
        .collect();
    if order % 2 == 1 {
        out.push(Biquad::first_order(f0, fs, high));
    }
    out
}

/// The band-pass cascade as biquad sections.
pub fn bandpass_sections(b: &Bandpass, fs: f64) -> Vec<Biquad> {
    let mut s = butterworth(b.order, b.low_hz, fs, true);
    if b.high_hz < fs / 2.0 {
        s.extend(butterworth(b.order, b.high_hz, fs, false));
    }
    s
}

/// Decaying Gaussian tail reaching -60 dB at `rt60_s`, with `h[0] = 1`
/// and tail energy `1 / direct_ratio`.
pub fn reverb_impulse_response(r: &Reverb, fs: f64, seed: u64) -> Vec<f64> {
    let len = (r.rt60_s * fs).ceil() as usize;
    if len < 2 {
        return vec![1.0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = 1000f64.ln() / (r.rt60_s * fs);
    let mut h: Vec<f64> = (0..len)
        .map(|n| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * (-decay * n as f64).exp()
        })
        .collect();
    h[0] = 0.0;
    let tail: f64 = h.iter().map(|v| v * v).sum();
    let scale = (1.0 / (r.direct_ratio * tail)).sqrt();
    h.iter_mut().for_each(|v| *v *= scale);
    h[0] = 1.0;
    h
}

/// Linear convolution truncated to `x.len()`.
pub fn fft_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut b: Vec<Complex<f64>> = v.iter().map(|&s| Complex::new(s, 0.0)).collect();
        b.resize(n, Complex::new(0.0, 0.0));
        b
    };
    let mut a = pad(x);
    let mut b = pad(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    a[..x.len()].iter().map(|c| c.re / n as f64).collect()
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// Plays `clip` through the channel. The room response depends only on
/// `config.seed`; the noise also depends on the clip id, so different clips
/// through one device get different noise.
pub fn simulate_replay(clip: &AudioClip, config: &ChannelConfig) -> Result<AudioClip, ChannelError> {
    config.validate()?;
    let fs = clip.sample_rate_hz as f64;
    let mut x = clip.samples.clone();
    let input_rms = rms(&x);

    if let Some(b) = &config.bandpass {
        for s in bandpass_sections(b, fs) {
            s.filter(&mut x);
        }
    }
    if config.drive > 0.0 {
        let d = config.drive;
        let norm = d.tanh();
        x.iter_mut().for_each(|v| *v = (d * *v).tanh() / norm);
    }
    if let Some(r) = &config.reverb {
        let h = reverb_impulse_response(r, fs, config.seed);
        if h.len() > 1 {
            x = fft_convolve(&x, &h);
        }
    }
    if let Some(snr) = config.snr_db {
        let sigma = rms(&x) / 10f64.powf(snr / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ fnv1a(&clip.id));
        for v in x.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * g;
        }
    }

    let out_rms = rms(&x);
    if input_rms > 0.0 && out_rms > 0.0 && out_rms != input_rms {
        let g = input_rms / out_rms;
        x.iter_mut().for_each(|v| *v *= g);
    }
    let mut clipped = 0usize;
    for v in x.iter_mut() {
        if v.abs() > 1.0 {
            *v = v.clamp(-1.0, 1.0);
            clipped += 1;
        }
    }
    if clipped > 0 {
        log::debug!("replay of {}: {clipped} samples clipped", clip.id);
    }
    Ok(AudioClip { samples: x, ..clip.clone() })
}
