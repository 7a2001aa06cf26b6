use std::f64::consts::PI;
use std::sync::OnceLock;

use super::cqt::{Cqt, CqtConfig};
use super::{FeatureKind, FeatureVector, LOG_FLOOR};
use crate::preprocess::Segment;

pub const CQCC_COEFFS: usize = 12;
pub const CQCC_FRAMES: usize = 117;
pub const CQCC_DIM: usize = CQCC_COEFFS * CQCC_FRAMES;

/// CQCC extractor.
///
/// Per CQT frame: log power, linear interpolation of the geometric bin
/// axis onto a uniform grid with step `f_min / d`, orthonormal DCT-II over
/// the whole grid keeping c0..c11. Interpolation and truncated DCT are
/// both linear, so they collapse into one `12 x bins` matrix. The frame
/// axis is then linearly resampled to exactly 117 frames.
pub struct Cqcc {
    cqt: Cqt,
    projection: Vec<Vec<f64>>,
    uniform_points: usize,
}

impl Default for Cqcc {
    fn default() -> Self {
        Self::new(CqtConfig::default())
    }
}

impl Cqcc {
    pub fn new(config: CqtConfig) -> Self {
        let bins = config.bin_count();
        let top_hz = config.center_frequency(bins - 1);
        let step_hz = config.f_min_hz / config.resample_period as f64;
        let uniform_points = ((top_hz - config.f_min_hz) / step_hz).floor() as usize + 1;

        // (lower bin, upper weight) for each uniform grid point
        let taps: Vec<(usize, f64)> = (0..uniform_points)
            .map(|j| {
                let pos = config.bin_position(config.f_min_hz + j as f64 * step_hz).clamp(0.0, (bins - 1) as f64);
                let lower = (pos.floor() as usize).min(bins - 2);
                (lower, pos - lower as f64)
            })
            .collect();

        let n = uniform_points as f64;
        let projection = (0..CQCC_COEFFS)
            .map(|q| {
                let scale = if q == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                let mut row = vec![0.0; bins];
                for (j, &(lower, frac)) in taps.iter().enumerate() {
                    let basis = scale * (PI * q as f64 * (2 * j + 1) as f64 / (2.0 * n)).cos();
                    row[lower] += basis * (1.0 - frac);
                    row[lower + 1] += basis * frac;
                }
                row
            })
            .collect();
        Self { cqt: Cqt::new(config), projection, uniform_points }
    }

    /// Length of the uniform frequency grid the DCT runs over.
    pub fn uniform_points(&self) -> usize {
        self.uniform_points
    }

    /// Frame-major coefficients: 117 frames x c0..c11.
    pub fn compute(&self, samples: &[f64]) -> Vec<f64> {
        let spec = self.cqt.compute(samples);
        let frames = spec.frames;
        let mut cepstra = vec![[0.0; CQCC_COEFFS]; frames];
        let mut log_power = vec![0.0; spec.bins];
        for (t, cep) in cepstra.iter_mut().enumerate() {
            for (k, lp) in log_power.iter_mut().enumerate() {
                *lp = spec.get(k, t).powi(2).max(LOG_FLOOR).ln();
            }
            for (c, row) in cep.iter_mut().zip(&self.projection) {
                *c = row.iter().zip(&log_power).map(|(w, l)| w * l).sum();
            }
        }

        let mut out = Vec::with_capacity(CQCC_DIM);
        for i in 0..CQCC_FRAMES {
            let pos = i as f64 * (frames - 1) as f64 / (CQCC_FRAMES - 1) as f64;
            let lower = (pos.floor() as usize).min(frames - 2);
            let frac = pos - lower as f64;
            out.extend((0..CQCC_COEFFS).map(|q| cepstra[lower][q] * (1.0 - frac) + cepstra[lower + 1][q] * frac));
        }
        out
    }

    pub fn extract(&self, seg: &Segment) -> FeatureVector {
        FeatureVector::new(FeatureKind::Cqcc, self.compute(&seg.samples)).expect("log floor keeps CQCC finite")
    }
}

/// 1404-dim CQCC of a 1-s segment.
pub fn cqcc(seg: &Segment) -> FeatureVector {
    static EXTRACTOR: OnceLock<Cqcc> = OnceLock::new();
    EXTRACTOR.get_or_init(Cqcc::default).extract(seg)
}
