//! Hyper-parameter grid search over MLP configurations with k-fold CV.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use super::kfold::Fold;
use crate::classifiers::{train_mlp, LabeledData, MlpConfig, MlpModel, OptimizerKind};

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("grid axis {0} is empty")]
    EmptyAxis(&'static str),
    #[error("no folds supplied")]
    NoFolds,
    #[error("every grid cell failed")]
    AllCellsFailed,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_value_lines(text: &str) -> Result<Vec<(usize, String, String)>, GridError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| GridError::Parse { line: i + 1, message: format!("expected key=value, found {line:?}") })?;
        out.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses `100` or `100x50` into hidden layer widths. `0` or `none` means no hidden layer.
pub fn parse_hidden(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    if s == "0" || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split(['x', 'X'])
        .map(|w| match w.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("bad hidden layer spec {s:?}")),
            Ok(n) => Ok(n),
        })
        .collect()
}

pub fn format_hidden(hidden: &[usize]) -> String {
    if hidden.is_empty() {
        return "0".into();
    }
    hidden.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

/// The axes of the search. Every other field comes from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub hidden: Vec<Vec<usize>>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub optimizers: Vec<OptimizerKind>,
    pub base: MlpConfig,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            hidden: vec![vec![50], vec![100], vec![200]],
            learning_rates: vec![0.00005, 0.0005, 0.005],
            batch_sizes: vec![500, 5000],
            optimizers: vec![OptimizerKind::Adam],
            base: MlpConfig::default(),
        }
    }
}

fn list<T>(line: usize, v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, GridError> {
    v.split(',').map(|item| f(item.trim()).map_err(|message| GridError::Parse { line, message })).collect()
}

impl ParamGrid {
    /// Reads a grid file. Axis keys take comma-separated lists:
    ///
    /// ```text
    /// hidden = 50, 100, 100x50
    /// learning_rate = 0.00005, 0.001
    /// batch_size = 500, 5000
    /// optimizer = adam, sgd
    /// max_epochs = 200
    /// ```
    pub fn parse(text: &str) -> Result<Self, GridError> {
        Self::parse_with_base(text, MlpConfig::default())
    }

    /// As [`ParamGrid::parse`], with non-axis fields starting from `base`.
    pub fn parse_with_base(text: &str, base: MlpConfig) -> Result<Self, GridError> {
        let mut grid = ParamGrid { base, ..ParamGrid::default() };
        for (line, key, value) in parse_key_value_lines(text)? {
            let num = |v: &str| -> Result<f64, GridError> {
                v.parse().map_err(|_| GridError::Parse { line, message: format!("{key}: bad number {v:?}") })
            };
            match key.as_str() {
                "hidden" => grid.hidden = list(line, &value, parse_hidden)?,
                "learning_rate" | "lr" => {
                    grid.learning_rates = list(line, &value, |s| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}")))?
                }
                "batch_size" | "batch" => {
                    grid.batch_sizes = list(line, &value, |s| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}")))?
                }
                "optimizer" => grid.optimizers = list(line, &value, str::parse)?,
                "max_epochs" => grid.base.max_epochs = num(&value)? as usize,
                "patience" => grid.base.patience = num(&value)? as usize,
                "seed" => grid.base.seed = num(&value)? as u64,
                "beta1" => grid.base.beta1 = num(&value)?,
                "beta2" => grid.base.beta2 = num(&value)?,
                "epsilon" => grid.base.epsilon = num(&value)?,
                "class_weighting" => {
                    grid.base.class_weighting =
                        value.parse().map_err(|_| GridError::Parse { line, message: format!("class_weighting: {value:?}") })?
                }
                other => return Err(GridError::Parse { line, message: format!("unknown key {other:?}") }),
            }
        }
        grid.check()?;
        Ok(grid)
    }

    fn check(&self) -> Result<(), GridError> {
        if self.hidden.is_empty() {
            return Err(GridError::EmptyAxis("hidden"));
        }
        if self.learning_rates.is_empty() {
            return Err(GridError::EmptyAxis("learning_rate"));
        }
        if self.batch_sizes.is_empty() {
            return Err(GridError::EmptyAxis("batch_size"));
        }
        if self.optimizers.is_empty() {
            return Err(GridError::EmptyAxis("optimizer"));
        }
        Ok(())
    }

    /// Cartesian product in axis order hidden, lr, batch, optimizer.
    pub fn configs(&self) -> Vec<MlpConfig> {
        let mut out = Vec::new();
        for h in &self.hidden {
            for &lr in &self.learning_rates {
                for &b in &self.batch_sizes {
                    for &o in &self.optimizers {
                        out.push(MlpConfig {
                            hidden: h.clone(),
                            learning_rate: lr,
                            batch_size: b,
                            optimizer: o,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Compact `hidden=.. lr=.. batch=.. opt=..` label.
pub struct ConfigLabel<'a>(pub &'a MlpConfig);

impl fmt::Display for ConfigLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.0;
        write!(f, "hidden={} lr={} batch={} opt={}", format_hidden(&c.hidden), c.learning_rate, c.batch_size, c.optimizer)
    }
}

fn config_order(a: &MlpConfig, b: &MlpConfig) -> Ordering {
    a.hidden
        .cmp(&b.hidden)
        .then(a.learning_rate.total_cmp(&b.learning_rate))
        .then(a.batch_size.cmp(&b.batch_size))
        .then(a.optimizer.cmp(&b.optimizer))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub config: MlpConfig,
    pub param_count: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub error: Option<String>,
}

impl CellResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    /// Index into `cells`.
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }

    pub fn best_config(&self) -> &MlpConfig {
        &self.cells[self.best].config
    }

    /// One row per cell: configuration, mean and std of fold accuracy.
    pub fn table(&self) -> String {
        let mut s = format!("{:<48} {:>8} {:>8}  {}\n", "config", "mean", "std", "note");
        for (i, c) in self.cells.iter().enumerate() {
            let note = match (&c.error, i == self.best) {
                (Some(e), _) => format!("FAILED: {e}"),
                (None, true) => "best".into(),
                (None, false) => String::new(),
            };
            let label = ConfigLabel(&c.config).to_string();
            if c.failed() {
                s += &format!("{label:<48} {:>8} {:>8}  {note}\n", "-", "-");
            } else {
                s += &format!("{label:<48} {:>8.4} {:>8.4}  {note}\n", c.mean, c.std);
            }
        }
        s
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluates one configuration on every fold.
pub fn evaluate_cell(data: &LabeledData, folds: &[Fold], config: &MlpConfig) -> CellResult {
    let mut sizes = vec![data.dim()];
    sizes.extend(&config.hidden);
    sizes.push(2);
    let param_count = MlpModel::param_count_for(&sizes);

    let mut accs = Vec::with_capacity(folds.len());
    for (i, fold) in folds.iter().enumerate() {
        let train = data.subset(&fold.train);
        let val = data.subset(&fold.val);
        let outcome = train_mlp(&train, &val, config).and_then(|(model, _)| model.accuracy(&val));
        match outcome {
            Ok(a) => accs.push(a),
            Err(e) => {
                log::warn!("grid cell {} failed on fold {i}: {e}", ConfigLabel(config));
                return CellResult {
                    config: config.clone(),
                    param_count,
                    fold_accuracies: accs,
                    mean: f64::NAN,
                    std: f64::NAN,
                    error: Some(format!("fold {i}: {e}")),
                };
            }
        }
    }
    let (mean, std) = mean_std(&accs);
    CellResult { config: config.clone(), param_count, fold_accuracies: accs, mean, std, error: None }
}

/// Picks the cell with the highest mean fold accuracy. Ties go to fewer
/// parameters, then to the lexicographically smaller configuration.
pub fn select_best(cells: &[CellResult]) -> Option<usize> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.failed())
        .min_by(|(_, a), (_, b)| {
            b.mean.total_cmp(&a.mean).then(a.param_count.cmp(&b.param_count)).then_with(|| config_order(&a.config, &b.config))
        })
        .map(|(i, _)| i)
}

/// Runs every grid cell over `folds`. `run_cells` lets the caller map cells
/// concurrently; pass [`sequential`] for a plain loop.
pub fn grid_search_with<F>(data: &LabeledData, grid: &ParamGrid, folds: &[Fold], run_cells: F) -> Result<GridResult, GridError>
where
    F: FnOnce(&[MlpConfig], &(dyn Fn(&MlpConfig) -> CellResult + Sync)) -> Vec<CellResult>,
{
    grid.check()?;
    if folds.is_empty() {
        return Err(GridError::NoFolds);
    }
    let configs = grid.configs();
    let eval = |c: &MlpConfig| evaluate_cell(data, folds, c);
    let cells = run_cells(&configs, &eval);
    let best = select_best(&cells).ok_or(GridError::AllCellsFailed)?;
    Ok(GridResult { cells, best })
}

pub fn sequential(configs: &[MlpConfig], eval: &(dyn Fn(&MlpConfig) -> CellResult + Sync)) -> Vec<CellResult> {
    configs.iter().map(eval).collect()
}

pub fn grid_search(data: &LabeledData, grid: &ParamGrid, folds: &[Fold]) -> Result<GridResult, GridError> {
    grid_search_with(data, grid, folds, sequential)
}
