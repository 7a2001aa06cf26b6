use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use voxsource::classifiers::{LabeledData, MlpConfig};
use voxsource::eval::grid::select_best;
use voxsource::eval::{grid_search, kfold_by_group, CellResult, ParamGrid};
use voxsource::Label;

/// Two Gaussian blobs, 20 rows per speaker across 10 speakers.
fn blobs(seed: u64) -> (LabeledData, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.6).unwrap();
    let mut data = LabeledData::default();
    let mut groups = Vec::new();
    for s in 0..10 {
        for _ in 0..20 {
            let label = if rng.random_bool(0.5) { Label::Emitted } else { Label::Natural };
            let c = if label == Label::Emitted { 1.5 } else { -1.5 };
            data.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)], label);
            groups.push(format!("spk{s:02}"));
        }
    }
    (data, groups)
}

#[test]
fn kfold_puts_two_of_ten_speakers_in_each_fold() {
    let groups: Vec<String> = (0..10).flat_map(|s| std::iter::repeat_n(format!("spk{s:02}"), 7)).collect();
    let folds = kfold_by_group(&groups, 5, 3).unwrap();
    assert_eq!(folds.len(), 5);
    let mut seen = Vec::new();
    for fold in &folds {
        let mut val: Vec<&str> = fold.val.iter().map(|&i| groups[i].as_str()).collect();
        val.sort();
        val.dedup();
        assert_eq!(val.len(), 2);
        for &i in &fold.train {
            assert!(!val.contains(&groups[i].as_str()));
        }
        assert_eq!(fold.train.len() + fold.val.len(), groups.len());
        seen.extend(val.into_iter().map(str::to_string));
    }
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 10);
}

#[test]
fn trained_cell_beats_frozen_cell() {
    let (data, groups) = blobs(11);
    let folds = kfold_by_group(&groups, 5, 0).unwrap();
    let grid = ParamGrid {
        hidden: vec![vec![8]],
        learning_rates: vec![0.0, 0.01],
        batch_sizes: vec![32],
        optimizers: vec![voxsource::OptimizerKind::Adam],
        base: MlpConfig { max_epochs: 40, patience: 40, ..MlpConfig::default() },
    };
    let result = grid_search(&data, &grid, &folds).unwrap();
    assert_eq!(result.cells.len(), 2);
    assert_eq!(result.best_config().learning_rate, 0.01);
    assert!(result.best_cell().mean > 0.95, "{}", result.table());
}

#[test]
fn equal_accuracy_prefers_the_smaller_network() {
    let cell = |hidden: usize, params: usize| CellResult {
        config: MlpConfig { hidden: vec![hidden], ..MlpConfig::default() },
        param_count: params,
        fold_accuracies: vec![0.9; 5],
        mean: 0.9,
        std: 0.0,
        error: None,
    };
    let cells = vec![cell(100, 100 * 131 + 100 * 2 + 2), cell(50, 50 * 131 + 50 * 2 + 2)];
    assert_eq!(select_best(&cells), Some(1));
}
