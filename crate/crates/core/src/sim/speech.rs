//! Pseudo-speech: a glottal harmonic source through two moving formants.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio_io::{AudioClip, SAMPLE_RATE_HZ};

pub const F0_MIN_HZ: f64 = 90.0;
pub const F0_MAX_HZ: f64 = 250.0;
const PEAK: f64 = 0.8;
const HARMONIC_CEILING_HZ: f64 = 7600.0;
const CONTROL_BLOCK: usize = 64;

/// Per-speaker voice parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceProfile {
    pub base_f0_hz: f64,
    /// Relative depth of the slow pitch contour.
    pub f0_excursion: f64,
    pub formant1_hz: (f64, f64),
    pub formant2_hz: (f64, f64),
    pub syllable_rate_hz: f64,
    /// Aspiration noise level relative to the voiced source.
    pub breathiness: f64,
    /// Harmonic amplitude roll-off exponent.
    pub spectral_tilt: f64,
}

impl VoiceProfile {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f1_lo = rng.random_range(280.0..420.0);
        let f2_lo = rng.random_range(850.0..1200.0);
        Self {
            base_f0_hz: rng.random_range(105.0..210.0),
            f0_excursion: rng.random_range(0.08..0.18),
            formant1_hz: (f1_lo, f1_lo + rng.random_range(250.0..450.0)),
            formant2_hz: (f2_lo, f2_lo + rng.random_range(700.0..1300.0)),
            syllable_rate_hz: rng.random_range(3.5..4.5),
            breathiness: rng.random_range(0.02..0.08),
            spectral_tilt: rng.random_range(1.0..1.2),
        }
    }
}

/// Two-pole resonator with unit gain at its centre frequency.
#[derive(Debug, Clone, Default)]
struct Resonator {
    b0: f64,
    a1: f64,
    a2: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq_hz: f64, bandwidth_hz: f64, fs: f64) {
        let r = (-PI * bandwidth_hz / fs).exp();
        let w = 2.0 * PI * freq_hz / fs;
        self.a1 = 2.0 * r * w.cos();
        self.a2 = -r * r;
        self.b0 = (1.0 - r) * (1.0 + r * r - 2.0 * r * (2.0 * w).cos()).sqrt();
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Synthesises `duration_s` of pseudo-speech for `voice`, peak-normalised
/// to 0.8.
pub fn synth_voice(voice: &VoiceProfile, seed: u64, duration_s: f64) -> Vec<f64> {
    let fs = SAMPLE_RATE_HZ as f64;
    let n = (duration_s * fs).round().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase_pitch = rng.random_range(0.0..2.0 * PI);
    let phase_syl = rng.random_range(0.0..2.0 * PI);
    let phase_f1 = rng.random_range(0.0..2.0 * PI);
    let phase_f2 = rng.random_range(0.0..2.0 * PI);
    let pitch_rate = rng.random_range(0.2..0.6);

    let mut r1 = Resonator::default();
    let mut r2 = Resonator::default();
    let mut phase = 0.0f64;
    let mut drift = 0.0f64;
    let mut f0 = voice.base_f0_hz;
    let mut out = Vec::with_capacity(n);

    for i in 0..n {
        let t = i as f64 / fs;
        if i % CONTROL_BLOCK == 0 {
            // slow random walk on top of a sinusoidal contour
            let step: f64 = StandardNormal.sample(&mut rng);
            drift = (0.995 * drift + 0.004 * step).clamp(-0.1, 0.1);
            let contour = 1.0 + voice.f0_excursion * (2.0 * PI * pitch_rate * t + phase_pitch).sin() + drift;
            f0 = (voice.base_f0_hz * contour).clamp(F0_MIN_HZ, F0_MAX_HZ);

            let syl = voice.syllable_rate_hz;
            let m1 = 0.5 + 0.5 * (2.0 * PI * syl * t + phase_f1).sin();
            let m2 = 0.5 + 0.5 * (2.0 * PI * 0.7 * syl * t + phase_f2).sin();
            let (a, b) = voice.formant1_hz;
            r1.tune(a + (b - a) * m1, 90.0, fs);
            let (a, b) = voice.formant2_hz;
            r2.tune(a + (b - a) * m2, 130.0, fs);
        }

        phase = (phase + 2.0 * PI * f0 / fs) % (2.0 * PI);
        let harmonics = (HARMONIC_CEILING_HZ / f0) as usize;
        let mut voiced = 0.0;
        for h in 1..=harmonics {
            voiced += (h as f64 * phase).sin() / (h as f64).powf(voice.spectral_tilt);
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        let source = voiced + voice.breathiness * 4.0 * noise;

        let shaped = r1.tick(source) + 0.7 * r2.tick(source) + 0.1 * source;

        let syllable = 0.5 + 0.5 * (2.0 * PI * voice.syllable_rate_hz * t + phase_syl).sin();
        let envelope = 0.05 + 0.95 * syllable.powf(1.5);
        out.push(shaped * envelope);
    }

    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let g = PEAK / peak;
        out.iter_mut().for_each(|x| *x *= g);
    }
    out
}

/// A clip from a voice derived from `seed`.
pub fn synth_speech(seed: u64, duration_s: f64) -> AudioClip {
    let voice = VoiceProfile::random(seed);
    AudioClip::new(format!("synth{seed}"), synth_voice(&voice, seed.wrapping_add(1), duration_s))
}
