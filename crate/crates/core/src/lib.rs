//! Natural versus loudspeaker-emitted speech classification.
//!
//! The pipeline cuts 16 kHz mono audio into 1-s segments, computes MFCC or
//! CQCC features (or loads precomputed network embeddings), optionally
//! reduces them with PCA, and classifies with an MLP or a GMM pair.

pub mod audio_io;
pub mod classifiers;
pub mod dsp;
pub mod embedding_store;
pub mod eval;
pub mod model_file;
pub mod pca;
pub mod preprocess;
pub mod sim;

pub use audio_io::{read_wav, write_wav, AudioClip, AudioError, SAMPLE_RATE_HZ};
pub use classifiers::{
    train_gmm, train_gmm_classifier, train_mlp, Classifier, ClassifierError, GmmClassifier, GmmConfig, LabeledData, MlpConfig,
    MlpModel, OptimizerKind, Prediction,
};
pub use dsp::{cqcc, extract, mfcc, FeatureError, FeatureKind, FeatureVector};
pub use embedding_store::{EmbeddingStore, StoreError};
pub use eval::{EvalReport, ManifestRecord, Split};
pub use model_file::{load_model, save_model, TrainedModel};
pub use pca::{PcaError, PcaModel};
pub use preprocess::{normalize_energy, segment, Label, Segment};
