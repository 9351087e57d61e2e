//! Hyperparameter selection: k-sweeps for KNN and exhaustive (C, gamma)
//! grid search for the SVM, scored by repeated chip-level validation
//! resplits of the training data.
//!
//! Each sweep point / grid cell derives its fold seeds from the base seed
//! and the cell's own identity (k value, or the C and gamma bit patterns),
//! so results do not depend on enumeration order or thread scheduling.

use rayon::prelude::*;

use crate::classifiers::{
    balanced_class_weights, SvmParams, TieBreak, TrainedKnn, TrainedSvm,
};
use crate::dataset::{LabeledDataset, Scaler};
use crate::error::{Error, Result};
use crate::eval::{rates, ConfusionCounts};
use crate::seeding::derive_seed;

/// Identity of one swept configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepParam {
    K(usize),
    CGamma { c: f64, gamma: f64 },
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepParam::K(k) => write!(f, "{k}"),
            SweepParam::CGamma { c, gamma } => write!(f, "{c};{gamma}"),
        }
    }
}

/// Mean validation metrics of one swept configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: SweepParam,
    pub accuracy: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// Candidate grids for the SVM search. Values must be strictly positive
/// and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c_values: vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
            gamma_values: vec![0.001, 0.01, 0.1, 1.0, 10.0],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, vals) in [("C", &self.c_values), ("gamma", &self.gamma_values)] {
            if vals.is_empty() {
                return Err(Error::Argument(format!("{name} grid is empty")));
            }
            for w in vals.windows(2) {
                if !(w[0] < w[1]) {
                    return Err(Error::Argument(format!(
                        "{name} grid must be strictly increasing"
                    )));
                }
            }
            if !(vals[0] > 0.0) {
                return Err(Error::Argument(format!(
                    "{name} grid must be strictly positive"
                )));
            }
        }
        Ok(())
    }
}

/// Validation protocol shared by sweeps and grid search: repeated random
/// chip-level subsampling of the training corpus.
#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// Fraction of chips kept on the fit side of each resplit.
    pub train_fraction: f64,
    /// Weight SVM penalties by inverse class frequency.
    pub balanced_svm: bool,
    pub tie_break: TieBreak,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            balanced_svm: true,
            tie_break: TieBreak::default(),
        }
    }
}

/// Chip-level resplit of a training corpus for one validation fold.
fn chip_resplit(
    train: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let n_chips = train.n_chips();
    if n_chips < 2 {
        return Err(Error::Data(
            "validation resplits need at least two chips".into(),
        ));
    }
    let n_sub = ((n_chips as f64 * fraction).floor() as usize).clamp(1, n_chips - 1);
    train.split_by_chip(n_sub, seed)
}

fn fold_metrics(
    predictions: &[crate::dataset::Label],
    truth: &[crate::dataset::Label],
) -> Result<(f64, f64, f64)> {
    let counts = ConfusionCounts::from_predictions(predictions, truth)?;
    let m = rates(&counts)?;
    Ok((m.accuracy, m.fpr, m.fnr))
}

/// Mean validation metrics of KNN for every k in `k_lo..=k_hi`, over
/// `n_reps` chip-level resplits per k. Deterministic given `seed`.
pub fn k_sweep(
    train: &LabeledDataset,
    k_lo: usize,
    k_hi: usize,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<SweepResult>> {
    k_sweep_with(train, k_lo, k_hi, n_reps, seed, &ValidationOptions::default())
}

pub fn k_sweep_with(
    train: &LabeledDataset,
    k_lo: usize,
    k_hi: usize,
    n_reps: usize,
    seed: u64,
    options: &ValidationOptions,
) -> Result<Vec<SweepResult>> {
    if k_lo < 1 || k_lo > k_hi {
        return Err(Error::Argument(format!("bad k range [{k_lo}, {k_hi}]")));
    }
    if n_reps < 1 {
        return Err(Error::Argument("n_reps must be >= 1".into()));
    }
    (k_lo..=k_hi)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| {
            let cell_seed = derive_seed(seed, &[k as u64]);
            let mut acc_sum = 0.0;
            let mut fpr_sum = 0.0;
            let mut fnr_sum = 0.0;
            for rep in 0..n_reps {
                let rep_seed = derive_seed(cell_seed, &[rep as u64]);
                let (sub, val) = chip_resplit(train, options.train_fraction, rep_seed)?;
                if k_hi > sub.n_samples() {
                    return Err(Error::Argument(format!(
                        "k range upper bound {k_hi} exceeds fold size {}",
                        sub.n_samples()
                    )));
                }
                let scaler = Scaler::fit(&sub)?;
                let sub_std = scaler.apply(&sub)?;
                let val_std = scaler.apply(&val)?;
                let model = TrainedKnn::fit(&sub_std, k)?;
                let preds = val_std
                    .samples()
                    .iter()
                    .map(|s| model.classify(s.features()))
                    .collect::<Result<Vec<_>>>()?;
                let (a, p, n) = fold_metrics(&preds, &val_std.labels())?;
                acc_sum += a;
                fpr_sum += p;
                fnr_sum += n;
            }
            let inv = 1.0 / n_reps as f64;
            Ok(SweepResult {
                param: SweepParam::K(k),
                accuracy: acc_sum * inv,
                fpr: fpr_sum * inv,
                fnr: fnr_sum * inv,
            })
        })
        .collect()
}

/// Smallest k whose accuracy is within `acc_slack` of the best, preferring
/// lower FPR first. Encodes the small-k preference: large k plateaus in
/// accuracy while over-fitting drives FPR up.
pub fn select_k(results: &[SweepResult]) -> Result<usize> {
    select_k_with_slack(results, 0.02)
}

pub fn select_k_with_slack(results: &[SweepResult], acc_slack: f64) -> Result<usize> {
    let ks: Vec<(usize, &SweepResult)> = results
        .iter()
        .filter_map(|r| match r.param {
            SweepParam::K(k) => Some((k, r)),
            _ => None,
        })
        .collect();
    if ks.is_empty() {
        return Err(Error::Argument("no k entries in sweep results".into()));
    }
    let best_acc = ks
        .iter()
        .map(|(_, r)| r.accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut chosen: Option<(usize, f64)> = None;
    for (k, r) in &ks {
        if r.accuracy >= best_acc - acc_slack {
            let better = match chosen {
                None => true,
                Some((ck, cf)) => r.fpr < cf || (r.fpr == cf && *k < ck),
            };
            if better {
                chosen = Some((*k, r.fpr));
            }
        }
    }
    Ok(chosen.expect("non-empty candidates").0)
}

/// Mean validation metrics for every (C, gamma) grid cell. Cell order in
/// the result follows the grid (C-major).
pub fn evaluate_grid(
    train: &LabeledDataset,
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<SweepResult>> {
    evaluate_grid_with(train, grid, n_reps, seed, &ValidationOptions::default())
}

pub fn evaluate_grid_with(
    train: &LabeledDataset,
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
    options: &ValidationOptions,
) -> Result<Vec<SweepResult>> {
    grid.validate()?;
    if n_reps < 1 {
        return Err(Error::Argument("n_reps must be >= 1".into()));
    }
    let cells: Vec<(f64, f64)> = grid
        .c_values
        .iter()
        .flat_map(|&c| grid.gamma_values.iter().map(move |&g| (c, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(c, gamma)| {
            let cell_seed = derive_seed(seed, &[c.to_bits(), gamma.to_bits()]);
            let mut acc_sum = 0.0;
            let mut fpr_sum = 0.0;
            let mut fnr_sum = 0.0;
            for rep in 0..n_reps {
                let rep_seed = derive_seed(cell_seed, &[rep as u64]);
                let (sub, val) = both_class_resplit(train, options.train_fraction, rep_seed)?;
                let scaler = Scaler::fit(&sub)?;
                let sub_std = scaler.apply(&sub)?;
                let val_std = scaler.apply(&val)?;
                let weights = if options.balanced_svm {
                    Some(balanced_class_weights(&sub_std)?)
                } else {
                    None
                };
                let model = TrainedSvm::fit(
                    &sub_std,
                    &SvmParams {
                        c,
                        gamma,
                        class_weights: weights,
                        tie_break: options.tie_break,
                        ..SvmParams::default()
                    },
                )?;
                let preds = val_std
                    .samples()
                    .iter()
                    .map(|s| model.classify(s.features()))
                    .collect::<Result<Vec<_>>>()?;
                let (a, p, n) = fold_metrics(&preds, &val_std.labels())?;
                acc_sum += a;
                fpr_sum += p;
                fnr_sum += n;
            }
            let inv = 1.0 / n_reps as f64;
            Ok(SweepResult {
                param: SweepParam::CGamma { c, gamma },
                accuracy: acc_sum * inv,
                fpr: fpr_sum * inv,
                fnr: fnr_sum * inv,
            })
        })
        .collect()
}

/// Resplit with both classes present on the fit side; resamples with fresh
/// seeds up to a cap.
fn both_class_resplit(
    train: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    const CAP: u64 = 100;
    for attempt in 0..CAP {
        let (sub, val) = chip_resplit(train, fraction, derive_seed(seed, &[attempt]))?;
        let has_pos = sub.labels().iter().any(|l| l.is_trojan());
        let has_neg = sub.labels().iter().any(|l| !l.is_trojan());
        if has_pos && has_neg {
            return Ok((sub, val));
        }
    }
    Err(Error::Data(format!(
        "no fold with both classes after {CAP} resamples"
    )))
}

/// Exhaustive grid search: evaluates every cell and returns the best by
/// (higher accuracy, lower FPR, smaller C, smaller gamma).
pub fn grid_search(
    train: &LabeledDataset,
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
) -> Result<(f64, f64, SweepResult)> {
    grid_search_with(train, grid, n_reps, seed, &ValidationOptions::default())
}

pub fn grid_search_with(
    train: &LabeledDataset,
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
    options: &ValidationOptions,
) -> Result<(f64, f64, SweepResult)> {
    let table = evaluate_grid_with(train, grid, n_reps, seed, options)?;
    let best = pick_best_cell(&table).expect("grid validated non-empty");
    match best.param {
        SweepParam::CGamma { c, gamma } => Ok((c, gamma, best.clone())),
        SweepParam::K(_) => unreachable!("grid table carries CGamma params"),
    }
}

/// Argmax under the deterministic tie-break order; independent of the
/// table's enumeration order.
pub fn pick_best_cell(table: &[SweepResult]) -> Option<&SweepResult> {
    let key = |r: &SweepResult| match r.param {
        SweepParam::CGamma { c, gamma } => (r.accuracy, -r.fpr, -c, -gamma),
        SweepParam::K(k) => (r.accuracy, -r.fpr, -(k as f64), 0.0),
    };
    table.iter().reduce(|best, r| {
        if key(r) > key(best) {
            r
        } else {
            best
        }
    })
}
