//! Manifests, cross-validation, grid search and evaluation reports.

pub mod grid;
pub mod kfold;
pub mod manifest;
pub mod report;

pub use grid::{grid_search, grid_search_with, CellResult, ConfigLabel, GridError, GridResult, ParamGrid};
pub use kfold::{kfold_by_group, kfold_split, Fold, FoldError};
pub use manifest::{load_manifest, parse_manifest, write_manifest, ManifestError, ManifestRecord, Source, Split};
pub use report::{evaluate, ConstantPredictor, EvalError, EvalReport, FeatureSource, Predictor};
