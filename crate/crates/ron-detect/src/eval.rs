//! Confusion-count bookkeeping, the four rate metrics plus accuracy, and
//! the trial harness: repeated seeded chip-level splits per training size,
//! scale / tune / train / evaluate, mean metrics per (classifier, size).
//!
//! Rates (Trojan positive):
//!
//! ```text
//! TPR = TP/(TP+FN)   TNR = TN/(TN+FP)   FNR = FN/(FN+TP)   FPR = FP/(FP+TN)
//! accuracy = (TP+TN)/total
//! ```
//!
//! A rate whose denominator is zero (e.g. a test fold without golden
//! samples) is reported as the vacuous success 1.0 with complement 0.0, and
//! the metrics row is flagged so such trials stay auditable instead of
//! poisoning means with NaN.

use rayon::prelude::*;

use crate::classifiers::{
    balanced_class_weights, Classifier, EnsembleMember, GnbParams, SvmParams, TieBreak,
    TrainedEnsemble, TrainedGnb, TrainedKnn, TrainedSvm,
};
use crate::dataset::{Label, LabeledDataset, Scaler};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, hash_str};
use crate::tuning::{self, GridSpec, ValidationOptions};

// ── Confusion counts and rates ───────────────────────────────────────────

/// TP/TN/FP/FN tallies with Trojan as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, true_neg: u64, false_pos: u64, false_neg: u64) -> Self {
        Self {
            true_pos,
            true_neg,
            false_pos,
            false_neg,
        }
    }

    pub fn from_predictions(predictions: &[Label], truth: &[Label]) -> Result<Self> {
        if predictions.len() != truth.len() {
            return Err(Error::Argument(format!(
                "{} predictions vs {} truth labels",
                predictions.len(),
                truth.len()
            )));
        }
        if predictions.is_empty() {
            return Err(Error::Argument("empty prediction list".into()));
        }
        let mut c = Self::new(0, 0, 0, 0);
        for (p, t) in predictions.iter().zip(truth) {
            match (p.is_trojan(), t.is_trojan()) {
                (true, true) => c.true_pos += 1,
                (false, false) => c.true_neg += 1,
                (true, false) => c.false_pos += 1,
                (false, true) => c.false_neg += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }
}

/// The four rates and accuracy, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMetrics {
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub accuracy: f64,
    /// True when any rate had a zero denominator and took its sentinel.
    pub vacuous: bool,
}

/// Derive the rates from confusion counts.
pub fn rates(counts: &ConfusionCounts) -> Result<RateMetrics> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::Argument("no evaluated samples".into()));
    }
    let pos = counts.true_pos + counts.false_neg;
    let neg = counts.true_neg + counts.false_pos;
    let mut vacuous = false;
    let (tpr, fnr) = if pos == 0 {
        vacuous = true;
        (1.0, 0.0)
    } else {
        (
            counts.true_pos as f64 / pos as f64,
            counts.false_neg as f64 / pos as f64,
        )
    };
    let (tnr, fpr) = if neg == 0 {
        vacuous = true;
        (1.0, 0.0)
    } else {
        (
            counts.true_neg as f64 / neg as f64,
            counts.false_pos as f64 / neg as f64,
        )
    };
    Ok(RateMetrics {
        tpr,
        tnr,
        fpr,
        fnr,
        accuracy: (counts.true_pos + counts.true_neg) as f64 / total as f64,
        vacuous,
    })
}

// ── Classifier specifications ────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClassifierKind {
    Knn,
    Svm,
    Gnb,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Gnb => "gnb",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ClassifierKind::Knn),
            "svm" => Ok(ClassifierKind::Svm),
            "gnb" => Ok(ClassifierKind::Gnb),
            other => Err(Error::Argument(format!(
                "unknown classifier {other:?}; valid: knn, svm, gnb, ensemble:<a+b[+c]>"
            ))),
        }
    }
}

/// One benchmark configuration: a single classifier or a voting ensemble,
/// with optional fixed hyperparameters (tuned per size when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    kinds: Vec<ClassifierKind>,
    pub fixed_k: Option<usize>,
    pub fixed_c_gamma: Option<(f64, f64)>,
}

impl ClassifierSpec {
    pub fn single(kind: ClassifierKind) -> Self {
        Self {
            kinds: vec![kind],
            fixed_k: None,
            fixed_c_gamma: None,
        }
    }

    pub fn ensemble(kinds: Vec<ClassifierKind>) -> Result<Self> {
        if !(2..=3).contains(&kinds.len()) {
            return Err(Error::Argument("ensemble needs 2 or 3 member kinds".into()));
        }
        let mut sorted = kinds.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != kinds.len() {
            return Err(Error::Argument("duplicate ensemble member kinds".into()));
        }
        Ok(Self {
            kinds,
            fixed_k: None,
            fixed_c_gamma: None,
        })
    }

    /// Parse a CLI token: `knn`, `svm`, `gnb`, or `ensemble:knn+svm[+gnb]`.
    pub fn parse(token: &str) -> Result<Self> {
        if let Some(rest) = token.strip_prefix("ensemble:") {
            let kinds = rest
                .split('+')
                .map(str::parse)
                .collect::<Result<Vec<ClassifierKind>>>()?;
            Self::ensemble(kinds)
        } else {
            Ok(Self::single(token.parse()?))
        }
    }

    pub fn with_fixed_k(mut self, k: usize) -> Self {
        self.fixed_k = Some(k);
        self
    }

    pub fn with_fixed_svm(mut self, c: f64, gamma: f64) -> Self {
        self.fixed_c_gamma = Some((c, gamma));
        self
    }

    pub fn kinds(&self) -> &[ClassifierKind] {
        &self.kinds
    }

    pub fn is_ensemble(&self) -> bool {
        self.kinds.len() > 1
    }

    fn uses(&self, kind: ClassifierKind) -> bool {
        self.kinds.contains(&kind)
    }

    /// Display name; ensembles keep the member order they were given.
    pub fn name(&self) -> String {
        if self.is_ensemble() {
            let joined = self
                .kinds
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join("+");
            format!("ensemble:{joined}")
        } else {
            self.kinds[0].as_str().to_string()
        }
    }

    /// Order-independent identity used for seed derivation, so permuting
    /// the classifier list (or ensemble member order) cannot change any
    /// classifier's trials.
    pub fn canonical_name(&self) -> String {
        if self.is_ensemble() {
            let mut kinds = self.kinds.clone();
            kinds.sort();
            let joined = kinds
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join("+");
            format!("ensemble:{joined}")
        } else {
            self.kinds[0].as_str().to_string()
        }
    }
}

// ── Harness configuration ────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct TuningConfig {
    pub k_range: (usize, usize),
    pub grid: GridSpec,
    pub n_reps: usize,
    pub acc_slack: f64,
    pub train_fraction: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            k_range: (1, 40),
            grid: GridSpec::default(),
            n_reps: 10,
            acc_slack: 0.02,
            train_fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    /// Training sizes in chips; the remaining chips form each test set.
    pub sizes: Vec<usize>,
    pub n_trials: usize,
    pub seed: u64,
    pub tie_break: TieBreak,
    /// Weight SVM penalties by inverse class frequency.
    pub balanced_svm: bool,
    /// Re-tune hyperparameters on every trial instead of once per size on
    /// the first trial's training split.
    pub tune_per_trial: bool,
    pub tuning: TuningConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            sizes: vec![6, 12, 24],
            n_trials: 20,
            seed: 0,
            tie_break: TieBreak::default(),
            balanced_svm: true,
            tune_per_trial: false,
            tuning: TuningConfig::default(),
        }
    }
}

// ── Trial reports ────────────────────────────────────────────────────────

/// Outcome of one (classifier, size, trial) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub classifier: String,
    pub size: usize,
    pub trial: usize,
    pub counts: ConfusionCounts,
    pub metrics: RateMetrics,
}

/// Mean metrics of one (classifier, size) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub classifier: String,
    pub size: usize,
    pub mean: RateMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    /// One row per (classifier, size), classifier-major in input order.
    pub rows: Vec<ReportRow>,
    /// Every individual trial, for long-form output.
    pub records: Vec<TrialRecord>,
    pub sizes: Vec<usize>,
    pub n_trials: usize,
    pub seed: u64,
}

/// Seed of one trial: a pure function of the run seed, the classifier's
/// canonical name, the training size, and the trial index.
pub fn trial_seed(seed: u64, canonical_name: &str, size: usize, trial: usize) -> u64 {
    derive_seed(seed, &[hash_str(canonical_name), size as u64, trial as u64])
}

// tag separating tuning seeds from trial indices
const TUNING_TAG: u64 = 0x7u64 << 60;

fn tuning_seed(seed: u64, canonical_name: &str, size: usize, kind: ClassifierKind) -> u64 {
    derive_seed(
        seed,
        &[
            hash_str(canonical_name),
            size as u64,
            TUNING_TAG ^ hash_str(kind.as_str()),
        ],
    )
}

/// Hyperparameters resolved for one (classifier, size).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams {
    pub k: Option<usize>,
    pub c_gamma: Option<(f64, f64)>,
}

fn resolve_params(
    data: &LabeledDataset,
    spec: &ClassifierSpec,
    size: usize,
    trial: usize,
    cfg: &HarnessConfig,
) -> Result<ResolvedParams> {
    let canonical = spec.canonical_name();
    let needs_knn = spec.uses(ClassifierKind::Knn);
    let needs_svm = spec.uses(ClassifierKind::Svm);
    let split_seed = trial_seed(cfg.seed, &canonical, size, trial);
    let options = ValidationOptions {
        train_fraction: cfg.tuning.train_fraction,
        balanced_svm: cfg.balanced_svm,
        tie_break: cfg.tie_break,
    };

    let mut k = spec.fixed_k;
    let mut c_gamma = spec.fixed_c_gamma;
    if (needs_knn && k.is_none()) || (needs_svm && c_gamma.is_none()) {
        let (train, _) = data.split_by_chip(size, split_seed)?;
        if needs_knn && k.is_none() {
            let (lo, hi) = cfg.tuning.k_range;
            let sweep = tuning::k_sweep_with(
                &train,
                lo,
                hi,
                cfg.tuning.n_reps,
                tuning_seed(cfg.seed, &canonical, size, ClassifierKind::Knn),
                &options,
            )?;
            k = Some(tuning::select_k_with_slack(&sweep, cfg.tuning.acc_slack)?);
        }
        if needs_svm && c_gamma.is_none() {
            let (c, gamma, _) = tuning::grid_search_with(
                &train,
                &cfg.tuning.grid,
                cfg.tuning.n_reps,
                tuning_seed(cfg.seed, &canonical, size, ClassifierKind::Svm),
                &options,
            )?;
            c_gamma = Some((c, gamma));
        }
    }
    Ok(ResolvedParams { k, c_gamma })
}

fn build_member(
    kind: ClassifierKind,
    train_std: &LabeledDataset,
    params: &ResolvedParams,
    cfg: &HarnessConfig,
) -> Result<EnsembleMember> {
    Ok(match kind {
        ClassifierKind::Knn => {
            let k = params
                .k
                .ok_or_else(|| Error::Argument("knn member without k".into()))?;
            EnsembleMember::Knn(TrainedKnn::fit(train_std, k)?)
        }
        ClassifierKind::Svm => {
            let (c, gamma) = params
                .c_gamma
                .ok_or_else(|| Error::Argument("svm member without C/gamma".into()))?;
            let weights = if cfg.balanced_svm {
                Some(balanced_class_weights(train_std)?)
            } else {
                None
            };
            EnsembleMember::Svm(TrainedSvm::fit(
                train_std,
                &SvmParams {
                    c,
                    gamma,
                    class_weights: weights,
                    tie_break: cfg.tie_break,
                    ..SvmParams::default()
                },
            )?)
        }
        ClassifierKind::Gnb => EnsembleMember::Gnb(TrainedGnb::fit_with(
            train_std,
            &GnbParams {
                tie_break: cfg.tie_break,
                ..GnbParams::default()
            },
        )?),
    })
}

/// Train the spec's model on a standardized training split.
pub fn build_model(
    spec: &ClassifierSpec,
    train_std: &LabeledDataset,
    params: &ResolvedParams,
    cfg: &HarnessConfig,
) -> Result<Box<dyn Classifier + Send + Sync>> {
    if spec.is_ensemble() {
        let members = spec
            .kinds
            .iter()
            .map(|&kind| build_member(kind, train_std, params, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(TrainedEnsemble::new(members, cfg.tie_break)?))
    } else {
        Ok(match build_member(spec.kinds[0], train_std, params, cfg)? {
            EnsembleMember::Knn(m) => Box::new(m),
            EnsembleMember::Svm(m) => Box::new(m),
            EnsembleMember::Gnb(m) => Box::new(m),
        })
    }
}

fn run_one_trial(
    data: &LabeledDataset,
    spec: &ClassifierSpec,
    params: &ResolvedParams,
    size: usize,
    trial: usize,
    cfg: &HarnessConfig,
) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.seed, &spec.canonical_name(), size, trial);
    let (train, test) = data.split_by_chip(size, seed)?;
    let scaler = Scaler::fit(&train)?;
    let train_std = scaler.apply(&train)?;
    let test_std = scaler.apply(&test)?;
    let model = build_model(spec, &train_std, params, cfg)?;
    let predictions = model.classify_dataset(&test_std)?;
    let counts = ConfusionCounts::from_predictions(&predictions, &test_std.labels())?;
    Ok(TrialRecord {
        classifier: spec.name(),
        size,
        trial,
        counts,
        metrics: rates(&counts)?,
    })
}

fn mean_metrics(records: &[TrialRecord]) -> RateMetrics {
    let n = records.len() as f64;
    let mut m = RateMetrics {
        tpr: 0.0,
        tnr: 0.0,
        fpr: 0.0,
        fnr: 0.0,
        accuracy: 0.0,
        vacuous: false,
    };
    for r in records {
        m.tpr += r.metrics.tpr;
        m.tnr += r.metrics.tnr;
        m.fpr += r.metrics.fpr;
        m.fnr += r.metrics.fnr;
        m.accuracy += r.metrics.accuracy;
        m.vacuous |= r.metrics.vacuous;
    }
    m.tpr /= n;
    m.tnr /= n;
    m.fpr /= n;
    m.fnr /= n;
    m.accuracy /= n;
    m
}

/// Run the full benchmark protocol: for every (classifier, size), tune on
/// the first trial's training split (unless fixed or `tune_per_trial`),
/// then evaluate `n_trials` seeded chip-level splits and average.
///
/// Deterministic for fixed inputs; per-classifier results are invariant
/// under permutation of `specs` and under parallel scheduling.
pub fn run_trials(
    data: &LabeledDataset,
    specs: &[ClassifierSpec],
    cfg: &HarnessConfig,
) -> Result<TrialReport> {
    if specs.is_empty() {
        return Err(Error::Argument("no classifiers requested".into()));
    }
    if cfg.n_trials < 1 {
        return Err(Error::Argument("n_trials must be >= 1".into()));
    }
    if cfg.sizes.is_empty() {
        return Err(Error::Argument("no training sizes requested".into()));
    }
    for &size in &cfg.sizes {
        if size >= data.n_chips() {
            return Err(Error::Argument(format!(
                "training size {size} needs held-out chips; corpus has {}",
                data.n_chips()
            )));
        }
    }

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for spec in specs {
        for &size in &cfg.sizes {
            let shared_params = if cfg.tune_per_trial {
                None
            } else {
                Some(resolve_params(data, spec, size, 0, cfg)?)
            };
            let cell: Vec<TrialRecord> = (0..cfg.n_trials)
                .into_par_iter()
                .map(|trial| {
                    let params = match &shared_params {
                        Some(p) => *p,
                        None => resolve_params(data, spec, size, trial, cfg)?,
                    };
                    run_one_trial(data, spec, &params, size, trial, cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(ReportRow {
                classifier: spec.name(),
                size,
                mean: mean_metrics(&cell),
            });
            records.extend(cell);
        }
    }
    Ok(TrialReport {
        rows,
        records,
        sizes: cfg.sizes.clone(),
        n_trials: cfg.n_trials,
        seed: cfg.seed,
    })
}

// ── Report rendering ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Render a report: markdown mirrors the metric-by-training-size table
/// layout (one table per classifier, 3 decimal places); CSV is one
/// long-form row per trial.
pub fn emit_report(report: &TrialReport, format: ReportFormat) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::Argument("empty report".into()));
    }
    match format {
        ReportFormat::Markdown => Ok(render_markdown(report)),
        ReportFormat::Csv => Ok(render_csv(report)),
    }
}

fn render_markdown(report: &TrialReport) -> String {
    let mut out = String::new();
    let mut classifiers: Vec<&str> = Vec::new();
    for row in &report.rows {
        if !classifiers.contains(&row.classifier.as_str()) {
            classifiers.push(&row.classifier);
        }
    }
    for (ci, name) in classifiers.iter().enumerate() {
        if ci > 0 {
            out.push('\n');
        }
        out.push_str(&format!("## {name}\n\n"));
        out.push_str("| Metric |");
        for size in &report.sizes {
            out.push_str(&format!(" {size} Samples |"));
        }
        out.push('\n');
        out.push_str("| --- |");
        for _ in &report.sizes {
            out.push_str(" --- |");
        }
        out.push('\n');
        let metric = |m: &RateMetrics, which: usize| match which {
            0 => m.tnr,
            1 => m.fpr,
            2 => m.fnr,
            3 => m.tpr,
            _ => m.accuracy,
        };
        for (which, label) in ["TNR", "FPR", "FNR", "TPR", "Accuracy"].iter().enumerate() {
            out.push_str(&format!("| {label} |"));
            for size in &report.sizes {
                let cell = report
                    .rows
                    .iter()
                    .find(|r| r.classifier == *name && r.size == *size)
                    .map(|r| format!(" {:.3} |", metric(&r.mean, which)))
                    .unwrap_or_else(|| " - |".to_string());
                out.push_str(&cell);
            }
            out.push('\n');
        }
    }
    out
}

pub const TRIAL_CSV_HEADER: &str = "classifier,size,trial,tp,tn,fp,fn,tpr,tnr,fpr,fnr,accuracy";

fn render_csv(report: &TrialReport) -> String {
    let mut out = String::from(TRIAL_CSV_HEADER);
    out.push('\n');
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.classifier,
            r.size,
            r.trial,
            r.counts.true_pos,
            r.counts.true_neg,
            r.counts.false_pos,
            r.counts.false_neg,
            r.metrics.tpr,
            r.metrics.tnr,
            r.metrics.fpr,
            r.metrics.fnr,
            r.metrics.accuracy
        ));
    }
    out
}

/// Rebuild a report from long-form trial CSV (mean rows recomputed).
pub fn parse_trial_csv(text: &str) -> Result<TrialReport> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == TRIAL_CSV_HEADER => {}
        Some(h) => return Err(Error::Schema(format!("bad trial CSV header {h:?}"))),
        None => return Err(Error::EmptyDataset),
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 2;
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 12 {
            return Err(Error::Row {
                line: lineno,
                msg: format!("{} fields, expected 12", f.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Row {
                line: lineno,
                msg: format!("bad {what} {s:?}"),
            })
        };
        let int = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Row {
                line: lineno,
                msg: format!("bad {what} {s:?}"),
            })
        };
        let counts = ConfusionCounts::new(
            int(f[3], "tp")?,
            int(f[4], "tn")?,
            int(f[5], "fp")?,
            int(f[6], "fn")?,
        );
        records.push(TrialRecord {
            classifier: f[0].to_string(),
            size: int(f[1], "size")? as usize,
            trial: int(f[2], "trial")? as usize,
            counts,
            metrics: RateMetrics {
                tpr: num(f[7], "tpr")?,
                tnr: num(f[8], "tnr")?,
                fpr: num(f[9], "fpr")?,
                fnr: num(f[10], "fnr")?,
                accuracy: num(f[11], "accuracy")?,
                vacuous: false,
            },
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sizes = Vec::new();
    let mut cells: Vec<(String, usize)> = Vec::new();
    for r in &records {
        if !sizes.contains(&r.size) {
            sizes.push(r.size);
        }
        let cell = (r.classifier.clone(), r.size);
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    let rows = cells
        .iter()
        .map(|(name, size)| {
            let cell: Vec<TrialRecord> = records
                .iter()
                .filter(|r| &r.classifier == name && r.size == *size)
                .cloned()
                .collect();
            ReportRow {
                classifier: name.clone(),
                size: *size,
                mean: mean_metrics(&cell),
            }
        })
        .collect();
    let n_trials = records.iter().map(|r| r.trial + 1).max().unwrap_or(1);
    Ok(TrialReport {
        rows,
        records,
        sizes,
        n_trials,
        seed: 0,
    })
}
