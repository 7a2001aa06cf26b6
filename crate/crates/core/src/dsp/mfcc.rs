use std::sync::OnceLock;

use super::spectrum::{dct_ii_matrix, frame_centered, hz_to_mel, mel_to_hz, FrameConfig, PowerSpectrum, FFT_LEN, SPECTRUM_BINS};
use super::{FeatureKind, FeatureVector, LOG_FLOOR};
use crate::audio_io::SAMPLE_RATE_HZ;
use crate::preprocess::{Segment, SEGMENT_LEN};

pub const MEL_BANDS: usize = 26;
/// c1..c12; c0 is dropped.
pub const MFCC_COEFFS: usize = 12;
pub const MFCC_FRAMES: usize = 101;
pub const MFCC_DIM: usize = MFCC_COEFFS * MFCC_FRAMES;

/// Triangular filters on the HTK mel scale, peak height 1.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `bands x SPECTRUM_BINS`
    pub weights: Vec<Vec<f64>>,
    /// `bands + 2` edge frequencies in Hz, increasing.
    pub edges_hz: Vec<f64>,
}

pub fn mel_filterbank(bands: usize, low_hz: f64, high_hz: f64) -> MelFilterbank {
    let (lo, hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
    let edges_hz: Vec<f64> = (0..bands + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64)).collect();
    let bin_hz = f64::from(SAMPLE_RATE_HZ) / FFT_LEN as f64;
    let weights = (0..bands)
        .map(|b| {
            let (left, center, right) = (edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]);
            (0..SPECTRUM_BINS)
                .map(|j| {
                    let f = j as f64 * bin_hz;
                    let rising = (f - left) / (center - left);
                    let falling = (right - f) / (right - center);
                    rising.min(falling).max(0.0)
                })
                .collect()
        })
        .collect();
    MelFilterbank { weights, edges_hz }
}

/// Reusable MFCC extractor. Construction plans the FFT and builds the
/// filterbank and DCT tables once.
pub struct Mfcc {
    spectrum: PowerSpectrum,
    filterbank: MelFilterbank,
    dct: Vec<Vec<f64>>,
    framing: FrameConfig,
}

impl Default for Mfcc {
    fn default() -> Self {
        Self::new()
    }
}

impl Mfcc {
    pub fn new() -> Self {
        let dct = dct_ii_matrix(MEL_BANDS, MFCC_COEFFS + 1).split_off(1);
        Self {
            spectrum: PowerSpectrum::new(),
            filterbank: mel_filterbank(MEL_BANDS, 0.0, f64::from(SAMPLE_RATE_HZ) / 2.0),
            dct,
            framing: FrameConfig::default(),
        }
    }

    /// Frame-major coefficients: 101 frames x c1..c12.
    pub fn compute(&self, samples: &[f64]) -> Vec<f64> {
        assert_eq!(samples.len(), SEGMENT_LEN, "MFCC expects a {SEGMENT_LEN}-sample segment");
        let mut out = Vec::with_capacity(MFCC_DIM);
        let mut log_mel = vec![0.0; MEL_BANDS];
        for frame in frame_centered(samples, self.framing) {
            let power = self.spectrum.compute(&frame);
            for (lm, row) in log_mel.iter_mut().zip(&self.filterbank.weights) {
                let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                *lm = e.max(LOG_FLOOR).ln();
            }
            out.extend(self.dct.iter().map(|basis| basis.iter().zip(&log_mel).map(|(b, l)| b * l).sum::<f64>()));
        }
        out
    }

    pub fn extract(&self, seg: &Segment) -> FeatureVector {
        FeatureVector::new(FeatureKind::Mfcc, self.compute(&seg.samples)).expect("log floor keeps MFCC finite")
    }
}

/// 1212-dim MFCC of a 1-s segment.
pub fn mfcc(seg: &Segment) -> FeatureVector {
    static EXTRACTOR: OnceLock<Mfcc> = OnceLock::new();
    EXTRACTOR.get_or_init(Mfcc::new).extract(seg)
}
