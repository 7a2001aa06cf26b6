//! Binary container for trained models and PCA projections.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "RDM1"  u16 version  u8 kind (1 mlp, 2 gmm, 3 pca)
//! u8 n_features  u8 feature_kind x n_features
//! kind-specific block
//! ```
//!
//! MLP block: `f64 input_scale`, the training config, `u32 n_layers`,
//! `u32 sizes[n_layers]`, then `f64` parameters in the model's flat order.
//! GMM block: `f64 input_scale`, the config, then the natural and the
//! emitted mixture, each as `u32 M, u32 d, f64 weights[M], f64 means[M*d],
//! f64 variances[M*d]`. PCA block: `u32 d, u32 k, u32 rank, f64 mean[d],
//! f64 components[k*d], f64 explained_variance[k]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::classifiers::{Classifier, DiagonalGmm, GmmClassifier, GmmConfig, LabeledData, MlpConfig, MlpModel, OptimizerKind};
use crate::dsp::FeatureKind;
use crate::eval::report::{EvalError, Predictor};
use crate::pca::PcaModel;
use crate::preprocess::Label;

pub const MAGIC: &[u8; 4] = b"RDM1";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Mlp = 1,
    Gmm = 2,
    Pca = 3,
}

impl FileKind {
    fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(FileKind::Mlp),
            2 => Some(FileKind::Gmm),
            3 => Some(FileKind::Pca),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown model kind code {0}")]
    UnknownKind(u8),
    #[error("expected a {expected:?} file, found {found:?}")]
    WrongKind { expected: &'static str, found: FileKind },
    #[error("model file truncated")]
    Truncated,
    #[error("{0} trailing bytes after model data")]
    TrailingBytes(usize),
    #[error("invalid model data: {0}")]
    Invalid(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// A classifier plus what it expects as input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Feature files the classifier was trained on, in fusion order.
    pub feature_kinds: Vec<FeatureKind>,
    /// Multiplies every input value before classification.
    pub input_scale: f64,
    pub classifier: Classifier,
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.classifier.input_dim()
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * self.input_scale).collect()
    }
}

impl Predictor for TrainedModel {
    fn predict_label(&self, x: &[f64]) -> Result<Label, EvalError> {
        self.classifier.predict_label(&self.scale(x))
    }
}

/// `1 / sqrt(mean of x^2)` over every value, so scaled training data has unit
/// mean square. Falls back to 1 for all-zero data.
pub fn unit_power_scale(data: &LabeledData) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for x in &data.features {
        sum += x.iter().map(|v| v * v).sum::<f64>();
        count += x.len();
    }
    let ms = if count == 0 { 0.0 } else { sum / count as f64 };
    if ms > 0.0 && ms.is_finite() {
        1.0 / ms.sqrt()
    } else {
        1.0
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(ModelFileError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ModelFileError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, ModelFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelFileError> {
        let bytes = self.take(n.checked_mul(8).ok_or(ModelFileError::Truncated)?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn finish(&self) -> Result<(), ModelFileError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(ModelFileError::TrailingBytes(n)),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> ModelFileError {
    ModelFileError::Invalid(e.to_string())
}

fn write_header(w: &mut Writer, kind: FileKind, features: &[FeatureKind]) {
    w.0.extend_from_slice(MAGIC);
    w.u16(VERSION);
    w.u8(kind as u8);
    w.u8(features.len() as u8);
    features.iter().for_each(|f| w.u8(f.code()));
}

fn read_header(r: &mut Reader) -> Result<(FileKind, Vec<FeatureKind>), ModelFileError> {
    if r.take(4).map_err(|_| ModelFileError::BadMagic)? != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let code = r.u8()?;
    let kind = FileKind::from_code(code).ok_or(ModelFileError::UnknownKind(code))?;
    let n = r.u8()? as usize;
    let features = (0..n)
        .map(|_| {
            let c = r.u8()?;
            FeatureKind::from_code(c).ok_or_else(|| invalid(format!("feature kind code {c}")))
        })
        .collect::<Result<_, _>>()?;
    Ok((kind, features))
}

fn write_mlp_config(w: &mut Writer, c: &MlpConfig) {
    w.u32(c.hidden.len());
    c.hidden.iter().for_each(|&h| w.u32(h));
    w.f64(c.learning_rate);
    w.u32(c.batch_size);
    w.u8(c.optimizer.code());
    w.f64s(&[c.beta1, c.beta2, c.epsilon]);
    w.u32(c.max_epochs);
    w.u32(c.patience);
    w.u64(c.seed);
    w.u8(c.class_weighting as u8);
}

fn read_mlp_config(r: &mut Reader) -> Result<MlpConfig, ModelFileError> {
    let n = r.u32()?;
    let hidden = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
    let learning_rate = r.f64()?;
    let batch_size = r.u32()?;
    let code = r.u8()?;
    let optimizer = OptimizerKind::from_code(code).ok_or_else(|| invalid(format!("optimizer code {code}")))?;
    Ok(MlpConfig {
        hidden,
        learning_rate,
        batch_size,
        optimizer,
        beta1: r.f64()?,
        beta2: r.f64()?,
        epsilon: r.f64()?,
        max_epochs: r.u32()?,
        patience: r.u32()?,
        seed: r.u64()?,
        class_weighting: r.u8()? != 0,
    })
}

fn write_gmm(w: &mut Writer, g: &DiagonalGmm) {
    w.u32(g.components());
    w.u32(g.dim());
    w.f64s(&g.weights);
    g.means.iter().for_each(|m| w.f64s(m));
    g.variances.iter().for_each(|v| w.f64s(v));
}

fn read_gmm(r: &mut Reader) -> Result<DiagonalGmm, ModelFileError> {
    let m = r.u32()?;
    let d = r.u32()?;
    let weights = r.f64s(m)?;
    let means = (0..m).map(|_| r.f64s(d)).collect::<Result<_, _>>()?;
    let variances = (0..m).map(|_| r.f64s(d)).collect::<Result<_, _>>()?;
    DiagonalGmm::new(weights, means, variances).map_err(invalid)
}

pub fn model_to_bytes(model: &TrainedModel) -> Vec<u8> {
    let mut w = Writer::default();
    match &model.classifier {
        Classifier::Mlp(m) => {
            write_header(&mut w, FileKind::Mlp, &model.feature_kinds);
            w.f64(model.input_scale);
            write_mlp_config(&mut w, &m.config);
            w.u32(m.sizes().len());
            m.sizes().iter().for_each(|&s| w.u32(s));
            w.f64s(m.params());
        }
        Classifier::Gmm(g) => {
            write_header(&mut w, FileKind::Gmm, &model.feature_kinds);
            w.f64(model.input_scale);
            let c = &g.config;
            w.u32(c.components);
            w.u32(c.max_iterations);
            w.f64(c.tolerance);
            w.f64(c.variance_floor);
            w.u64(c.seed);
            write_gmm(&mut w, &g.natural);
            write_gmm(&mut w, &g.emitted);
        }
    }
    w.0
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<TrainedModel, ModelFileError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let (kind, feature_kinds) = read_header(&mut r)?;
    let input_scale = match kind {
        FileKind::Pca => return Err(ModelFileError::WrongKind { expected: "classifier", found: kind }),
        _ => r.f64()?,
    };
    let classifier = match kind {
        FileKind::Mlp => {
            let config = read_mlp_config(&mut r)?;
            let n = r.u32()?;
            let sizes: Vec<usize> = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
            let params = r.f64s(MlpModel::param_count_for(&sizes))?;
            Classifier::Mlp(MlpModel::from_parts(sizes, params, config).map_err(invalid)?)
        }
        FileKind::Gmm => {
            let config = GmmConfig {
                components: r.u32()?,
                max_iterations: r.u32()?,
                tolerance: r.f64()?,
                variance_floor: r.f64()?,
                seed: r.u64()?,
            };
            let natural = read_gmm(&mut r)?;
            let emitted = read_gmm(&mut r)?;
            if natural.dim() != emitted.dim() {
                return Err(invalid("class mixtures disagree on dimension"));
            }
            Classifier::Gmm(GmmClassifier { natural, emitted, config })
        }
        FileKind::Pca => unreachable!(),
    };
    r.finish()?;
    Ok(TrainedModel { feature_kinds, input_scale, classifier })
}

pub fn pca_to_bytes(pca: &PcaModel, feature: FeatureKind) -> Vec<u8> {
    let mut w = Writer::default();
    write_header(&mut w, FileKind::Pca, &[feature]);
    w.u32(pca.input_dim());
    w.u32(pca.output_dim());
    w.u32(pca.rank);
    w.f64s(&pca.mean);
    pca.components.iter().for_each(|c| w.f64s(c));
    w.f64s(&pca.explained_variance);
    w.0
}

pub fn pca_from_bytes(bytes: &[u8]) -> Result<(PcaModel, FeatureKind), ModelFileError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let (kind, features) = read_header(&mut r)?;
    if kind != FileKind::Pca {
        return Err(ModelFileError::WrongKind { expected: "pca", found: kind });
    }
    let feature = match features.as_slice() {
        [f] => *f,
        other => return Err(invalid(format!("pca file lists {} feature kinds", other.len()))),
    };
    let d = r.u32()?;
    let k = r.u32()?;
    let rank = r.u32()?;
    if rank > k || k > d {
        return Err(invalid(format!("pca shape d={d} k={k} rank={rank}")));
    }
    let mean = r.f64s(d)?;
    let components = (0..k).map(|_| r.f64s(d)).collect::<Result<_, _>>()?;
    let explained_variance = r.f64s(k)?;
    r.finish()?;
    Ok((PcaModel { mean, components, explained_variance, rank }, feature))
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    Ok(write_atomic(path.as_ref(), &model_to_bytes(model))?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, ModelFileError> {
    model_from_bytes(&fs::read(path)?)
}

pub fn save_pca(pca: &PcaModel, feature: FeatureKind, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    Ok(write_atomic(path.as_ref(), &pca_to_bytes(pca, feature))?)
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<(PcaModel, FeatureKind), ModelFileError> {
    pca_from_bytes(&fs::read(path)?)
}
