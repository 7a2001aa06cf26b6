use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use voxsource::classifiers::{train_gmm_classifier, train_mlp, GmmConfig, LabeledData, MlpConfig};
use voxsource::dsp::{extract, FeatureKind};
use voxsource::embedding_store::{fused_lookup, sort_for_fusion, EmbeddingStore, StoreError};
use voxsource::eval::grid::{grid_search_with, parse_hidden, ConfigLabel, ParamGrid};
use voxsource::eval::report::{evaluate, EvalError, FeatureSource};
use voxsource::eval::{kfold_split, load_manifest, ManifestRecord, Split};
use voxsource::model_file::{load_model, load_pca, save_model, save_pca, unit_power_scale, TrainedModel};
use voxsource::pca;
use voxsource::preprocess::{normalize_energy, parse_segment_key, Segment, SEGMENT_LEN, TARGET_RMS};
use voxsource::sim::{build_synthetic_dataset, default_channels, read_channels, DatasetSpec};
use voxsource::{read_wav, Classifier, Label};

use crate::args::{EvalArgs, ExtractArgs, ModelChoice, SignalFeature, SynthArgs, TrainArgs};
use crate::error::{internal, usage, Result};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(internal)
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<ManifestRecord>> {
    let channels = match &args.channels {
        Some(path) => read_channels(&fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?)?,
        None => default_channels(),
    };
    let spec = DatasetSpec {
        n_speakers: args.speakers,
        clips_per_speaker: args.clips,
        clip_duration_s: args.duration,
        channels,
        seed: args.seed,
    };
    let records = build_synthetic_dataset(&spec, &args.out)?;
    let natural = records.iter().filter(|r| r.label == Label::Natural).count();
    println!("segments={} natural={} emitted={}", records.len(), natural, records.len() - natural);
    println!("manifest={}", args.out.join("manifest.csv").display());
    Ok(records)
}

fn feature_kind(f: SignalFeature) -> FeatureKind {
    match f {
        SignalFeature::Mfcc => FeatureKind::Mfcc,
        SignalFeature::Cqcc => FeatureKind::Cqcc,
    }
}

type IndexedFeature = (usize, Vec<f64>);

/// Reads each WAV once and computes the feature for every segment that
/// points into it. Output order follows `records`.
pub fn extract_features(records: &[ManifestRecord], base: &Path, kind: FeatureKind, workers: usize) -> Result<Vec<Vec<f64>>> {
    let mut by_path: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_path.entry(&r.path).or_default().push(i);
    }
    let groups: Vec<(&str, Vec<usize>)> = by_path.into_iter().collect();
    let computed: Vec<Result<Vec<IndexedFeature>>> = pool(workers)?.install(|| {
        groups
            .par_iter()
            .map(|(path, idxs)| {
                let clip = read_wav(base.join(path)).map_err(|e| usage(format!("{path}: {e}")))?;
                idxs.iter()
                    .map(|&i| {
                        let r = &records[i];
                        let (clip_id, start) =
                            parse_segment_key(&r.key).ok_or_else(|| usage(format!("malformed segment key {:?}", r.key)))?;
                        let end = start + SEGMENT_LEN;
                        if end > clip.len() {
                            return Err(usage(format!("segment {} runs past the end of {path} ({} samples)", r.key, clip.len())));
                        }
                        let seg = Segment {
                            clip_id: clip_id.to_string(),
                            start_sample: start,
                            label: Some(r.label),
                            samples: clip.samples[start..end].to_vec(),
                        };
                        let norm = normalize_energy(seg, TARGET_RMS);
                        if norm.silent {
                            log::warn!("segment {} is silent", r.key);
                        }
                        let fv = extract(kind, &norm.segment).ok_or_else(|| usage(format!("no extractor for {kind}")))?;
                        Ok((i, fv.into_values()))
                    })
                    .collect()
            })
            .collect()
    });
    let mut out = vec![Vec::new(); records.len()];
    for group in computed {
        for (i, v) in group? {
            out[i] = v;
        }
    }
    Ok(out)
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<EmbeddingStore> {
    let records = load_manifest(&args.manifest)?;
    if records.is_empty() {
        return Err(usage("manifest has no records"));
    }
    let kind = feature_kind(args.feature);
    let mut features = extract_features(&records, &manifest_dir(&args.manifest), kind, args.workers)?;

    match (args.pca, &args.pca_model) {
        (Some(k), pca_path) => {
            let train: Vec<&Vec<f64>> =
                records.iter().zip(&features).filter(|(r, _)| r.split == Split::Train).map(|(_, f)| f).collect();
            if train.is_empty() {
                return Err(usage("--pca needs train-split records to fit on"));
            }
            let model = pca::fit(&train, k)?;
            if model.is_rank_deficient() {
                log::warn!("pca: only {} of {} components carry variance", model.rank, k);
            }
            for f in features.iter_mut() {
                *f = model.transform(f)?;
            }
            if let Some(p) = pca_path {
                save_pca(&model, kind, p)?;
            }
        }
        (None, Some(p)) => {
            let (model, fitted_on) = load_pca(p)?;
            if fitted_on != kind {
                return Err(usage(format!("{} holds a {fitted_on} projection, not {kind}", p.display())));
            }
            for f in features.iter_mut() {
                *f = model.transform(f)?;
            }
        }
        (None, None) => {}
    }

    let mut store = EmbeddingStore::new(kind, features[0].len())?;
    for (r, f) in records.iter().zip(&features) {
        store.insert(r.key.clone(), f)?;
    }
    // save() writes a temp file and renames, so a failure leaves no partial output
    store.save(&args.out)?;
    println!("records={} dim={} kind={} out={}", store.len(), store.dim(), kind, args.out.display());
    Ok(store)
}

/// Embedding stores fused in the fixed order, looked up by segment key.
pub struct FusedFeatures {
    pub stores: Vec<EmbeddingStore>,
}

impl FusedFeatures {
    pub fn load(paths: &[PathBuf]) -> Result<Self> {
        let mut stores = paths
            .iter()
            .map(|p| EmbeddingStore::load(p).map_err(|e| usage(format!("{}: {e}", p.display()))))
            .collect::<Result<Vec<_>>>()?;
        sort_for_fusion(&mut stores);
        Ok(Self { stores })
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.stores.iter().map(EmbeddingStore::kind).collect()
    }

    pub fn labeled(&self, records: &[&ManifestRecord]) -> Result<LabeledData> {
        let mut data = LabeledData::default();
        for r in records {
            data.push(self.features(&r.key)?, r.label);
        }
        Ok(data)
    }
}

impl FeatureSource for FusedFeatures {
    fn features(&self, key: &str) -> std::result::Result<Vec<f64>, EvalError> {
        match fused_lookup(&self.stores, key) {
            Ok(v) => Ok(v.into_values()),
            Err(StoreError::MissingKey(k)) => Err(EvalError::MissingFeature(k)),
            Err(e) => Err(EvalError::Other(e.to_string())),
        }
    }
}

fn mlp_config(args: &TrainArgs) -> Result<MlpConfig> {
    Ok(MlpConfig {
        hidden: parse_hidden(&args.hidden).map_err(usage)?,
        learning_rate: args.lr,
        batch_size: args.batch,
        optimizer: args.optimizer.parse().map_err(usage)?,
        max_epochs: args.max_epochs,
        patience: args.patience,
        seed: args.seed,
        class_weighting: args.class_weighting,
        ..MlpConfig::default()
    })
}

fn split_of(records: &[ManifestRecord], split: Split) -> Vec<&ManifestRecord> {
    records.iter().filter(|r| r.split == split).collect()
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainedModel> {
    let records = load_manifest(&args.manifest)?;
    let features = FusedFeatures::load(&args.features)?;
    let train_records = split_of(&records, Split::Train);
    let val_records = split_of(&records, Split::Val);
    if train_records.is_empty() {
        return Err(EvalError::EmptySplit.into());
    }
    let raw_train = features.labeled(&train_records)?;
    let raw_val = features.labeled(&val_records)?;
    let input_scale = if args.no_scale { 1.0 } else { unit_power_scale(&raw_train) };
    let scale = |d: &LabeledData| LabeledData {
        features: d.features.iter().map(|x| x.iter().map(|v| v * input_scale).collect()).collect(),
        labels: d.labels.clone(),
    };
    let (train, val) = (scale(&raw_train), scale(&raw_val));
    log::info!("train: {} segments, val: {} segments, dim {}, input scale {input_scale:e}", train.len(), val.len(), train.dim());

    let classifier = match args.model {
        ModelChoice::Mlp => {
            let mut config = mlp_config(args)?;
            if let Some(grid_path) = &args.grid {
                let text = fs::read_to_string(grid_path).map_err(|e| usage(format!("{}: {e}", grid_path.display())))?;
                let grid = ParamGrid::parse_with_base(&text, config.clone())?;
                let owned: Vec<ManifestRecord> = train_records.iter().map(|r| (*r).clone()).collect();
                let folds = kfold_split(&owned, args.folds, args.seed)?;
                let workers = pool(args.workers)?;
                let result = grid_search_with(&train, &grid, &folds, |configs, eval| {
                    workers.install(|| configs.par_iter().map(eval).collect())
                })?;
                print!("{}", result.table());
                config = result.best_config().clone();
                println!("grid_best={}", ConfigLabel(&config));
            }
            let (model, history) = train_mlp(&train, &val, &config).map_err(internal)?;
            println!("epochs={} best_epoch={}", history.epochs.len(), history.best_epoch);
            Classifier::Mlp(model)
        }
        ModelChoice::Gmm => {
            let config = GmmConfig {
                components: args.components,
                max_iterations: args.gmm_iterations,
                seed: args.seed,
                ..GmmConfig::default()
            };
            let g =
                train_gmm_classifier(&train.of_class(Label::Natural), &train.of_class(Label::Emitted), &config).map_err(usage)?;
            Classifier::Gmm(g)
        }
    };

    let model = TrainedModel { feature_kinds: features.kinds(), input_scale, classifier };
    let train_report = evaluate(&model, train_records.iter().copied(), &features)?;
    println!("train_accuracy={:.6}", train_report.accuracy);
    if !val_records.is_empty() {
        let val_report = evaluate(&model, val_records.iter().copied(), &features)?;
        println!("val_accuracy={:.6}", val_report.accuracy);
    }
    save_model(&model, &args.out)?;
    println!("model={}", args.out.display());
    Ok(model)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<voxsource::EvalReport> {
    let split: Split = args.split.parse().map_err(usage)?;
    let model = load_model(&args.model)?;
    let records = load_manifest(&args.manifest)?;
    let features = FusedFeatures::load(&args.features)?;
    if features.kinds() != model.feature_kinds {
        return Err(usage(format!(
            "model was trained on {:?} features, got {:?}",
            model.feature_kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
            features.kinds().iter().map(|k| k.as_str()).collect::<Vec<_>>()
        )));
    }
    let report = evaluate(&model, split_of(&records, split), &features)?;
    println!("split={split}");
    print!("{report}");
    print!("{}", report.key_values());
    Ok(report)
}
