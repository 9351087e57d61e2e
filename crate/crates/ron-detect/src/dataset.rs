//! Labeled RON-fingerprint data model, CSV ingestion, feature
//! standardization, and chip-level train/test splitting.
//!
//! One [`FrequencySample`] is the 8-dimensional frequency fingerprint of one
//! IC under one workload (one feature per ring oscillator, each an average
//! over repeated counter reads). Samples are grouped by `chip_id`; splits
//! operate on whole chips so that the per-chip process-variation signature
//! never leaks across the train/test boundary.
//!
//! # CSV schema
//!
//! UTF-8, comma-separated, one header row:
//!
//! ```text
//! chip_id,region_id,sample_kind,benchmark_id,f1,f2,f3,f4,f5,f6,f7,f8
//! ```
//!
//! `sample_kind` is `golden` or `trojan`; `benchmark_id` is empty on golden
//! rows; `f1..fN` are decimal frequencies in Hz. [`save_csv`] emits the same
//! schema with 6 significant digits, so save followed by load is the
//! identity on the written representation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeding;

/// Default number of ring oscillators (features) per IC.
pub const DEFAULT_N_FEATURES: usize = 8;

/// Binary class of a sample. Trojan is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Golden,
    Trojan,
}

impl Label {
    /// -1 for Golden, +1 for Trojan.
    pub fn sign(self) -> f64 {
        match self {
            Label::Golden => -1.0,
            Label::Trojan => 1.0,
        }
    }

    pub fn is_trojan(self) -> bool {
        matches!(self, Label::Trojan)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Golden => write!(f, "golden"),
            Label::Trojan => write!(f, "trojan"),
        }
    }
}

/// Provenance of a sample: a verified clean measurement or a run with a
/// known inserted Trojan benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleKind {
    Golden,
    /// Carries the benchmark identifier of the inserted Trojan. Retained as
    /// metadata only; classification is binary.
    Trojan(String),
}

impl SampleKind {
    pub fn label(&self) -> Label {
        match self {
            SampleKind::Golden => Label::Golden,
            SampleKind::Trojan(_) => Label::Trojan,
        }
    }
}

/// One labeled RO-frequency fingerprint of one IC.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySample {
    chip_id: String,
    region_id: u32,
    kind: SampleKind,
    features: Vec<f64>,
}

impl FrequencySample {
    /// Build a sample from raw measurements. Every feature must be finite
    /// and strictly positive; `region_id` must be 0..=3.
    pub fn new(
        chip_id: impl Into<String>,
        region_id: u32,
        kind: SampleKind,
        features: Vec<f64>,
    ) -> Result<Self> {
        let chip_id = chip_id.into();
        if chip_id.is_empty() || chip_id.contains(',') {
            return Err(Error::Argument(format!("bad chip_id {chip_id:?}")));
        }
        if region_id > 3 {
            return Err(Error::Argument(format!(
                "region_id {region_id} outside 0..=3"
            )));
        }
        if features.is_empty() {
            return Err(Error::Argument("sample has no features".into()));
        }
        for (i, &f) in features.iter().enumerate() {
            if !f.is_finite() || f <= 0.0 {
                return Err(Error::Argument(format!(
                    "feature {i} is {f}; frequencies must be finite and positive"
                )));
            }
        }
        if let SampleKind::Trojan(b) = &kind {
            if b.contains(',') {
                return Err(Error::Argument(format!("bad benchmark_id {b:?}")));
            }
        }
        Ok(Self {
            chip_id,
            region_id,
            kind,
            features,
        })
    }

    /// Same sample with the feature vector replaced; used by the scaler,
    /// whose outputs are centered and may be negative.
    pub(crate) fn with_features_unchecked(&self, features: Vec<f64>) -> Self {
        Self {
            chip_id: self.chip_id.clone(),
            region_id: self.region_id,
            kind: self.kind.clone(),
            features,
        }
    }

    pub fn chip_id(&self) -> &str {
        &self.chip_id
    }

    pub fn region_id(&self) -> u32 {
        self.region_id
    }

    pub fn kind(&self) -> &SampleKind {
        &self.kind
    }

    pub fn label(&self) -> Label {
        self.kind.label()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

/// A collection of samples with chip provenance.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    samples: Vec<FrequencySample>,
    n_features: usize,
    chip_index: BTreeMap<String, Vec<usize>>,
}

impl LabeledDataset {
    /// Build a dataset; all samples must share one feature count.
    pub fn new(samples: Vec<FrequencySample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_features = samples[0].features.len();
        let mut chip_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != n_features {
                return Err(Error::Argument(format!(
                    "sample {i} has {} features, expected {n_features}",
                    s.features.len()
                )));
            }
            chip_index.entry(s.chip_id.clone()).or_default().push(i);
        }
        Ok(Self {
            samples,
            n_features,
            chip_index,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn samples(&self) -> &[FrequencySample] {
        &self.samples
    }

    /// Sample indices grouped by chip, ordered by chip id.
    pub fn chip_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.chip_index
    }

    /// Distinct chip ids in sorted order.
    pub fn chip_ids(&self) -> Vec<&str> {
        self.chip_index.keys().map(String::as_str).collect()
    }

    pub fn n_chips(&self) -> usize {
        self.chip_index.len()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label()).collect()
    }

    /// Chip-level split: `n_train_chips` chips drawn uniformly (seeded) form
    /// the train side, all remaining chips the test side. Sample order
    /// within each side follows the original dataset.
    pub fn split_by_chip(&self, n_train_chips: usize, seed: u64) -> Result<(Self, Self)> {
        let n_chips = self.n_chips();
        if n_train_chips < 1 || n_train_chips >= n_chips {
            return Err(Error::Argument(format!(
                "n_train_chips {n_train_chips} outside 1..{n_chips}"
            )));
        }
        let mut chips: Vec<&String> = self.chip_index.keys().collect();
        let mut rng = seeding::rng_from(seed, &[]);
        chips.shuffle(&mut rng);
        let train_set: std::collections::BTreeSet<&str> = chips[..n_train_chips]
            .iter()
            .map(|s| s.as_str())
            .collect();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for s in &self.samples {
            if train_set.contains(s.chip_id.as_str()) {
                train.push(s.clone());
            } else {
                test.push(s.clone());
            }
        }
        Ok((Self::new(train)?, Self::new(test)?))
    }
}

/// Per-feature standardization fitted on a training split.
///
/// Stores the per-feature sample mean and sample standard deviation
/// (unbiased, n-1 denominator). Standard deviations are strictly positive;
/// degenerate features are rejected at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(train: &LabeledDataset) -> Result<Self> {
        let n = train.n_samples();
        if n < 2 {
            return Err(Error::Argument(
                "scaler needs at least two training samples".into(),
            ));
        }
        let d = train.n_features();
        let mut means = vec![0.0; d];
        for s in train.samples() {
            for (m, &x) in means.iter_mut().zip(s.features()) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut stds = vec![0.0; d];
        for s in train.samples() {
            for ((v, &m), &x) in stds.iter_mut().zip(&means).zip(s.features()) {
                *v += (x - m) * (x - m);
            }
        }
        for (j, v) in stds.iter_mut().enumerate() {
            *v = (*v / (n - 1) as f64).sqrt();
            if *v <= 0.0 || !v.is_finite() {
                return Err(Error::DegenerateFeature { index: j });
            }
        }
        Ok(Self { means, stds })
    }

    /// Build a scaler from explicit parameters (model reload path).
    pub fn from_parts(means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.len() != stds.len() || means.is_empty() {
            return Err(Error::Argument("scaler mean/std length mismatch".into()));
        }
        if let Some(j) = stds.iter().position(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(Error::DegenerateFeature { index: j });
        }
        Ok(Self { means, stds })
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// Replace each feature x with (x - mean) / std. Labels and provenance
    /// are unchanged.
    pub fn apply(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        if data.n_features() != self.n_features() {
            return Err(Error::Argument(format!(
                "scaler has {} features, data has {}",
                self.n_features(),
                data.n_features()
            )));
        }
        let samples = data
            .samples()
            .iter()
            .map(|s| {
                let f = s
                    .features()
                    .iter()
                    .zip(&self.means)
                    .zip(&self.stds)
                    .map(|((&x, &m), &sd)| (x - m) / sd)
                    .collect();
                s.with_features_unchecked(f)
            })
            .collect();
        LabeledDataset::new(samples)
    }

    /// Transform one raw feature vector.
    pub fn apply_point(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.n_features() {
            return Err(Error::Argument(format!(
                "scaler has {} features, point has {}",
                self.n_features(),
                features.len()
            )));
        }
        Ok(features
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((&x, &m), &sd)| (x - m) / sd)
            .collect())
    }
}

fn expected_header(n_features: usize) -> Vec<String> {
    let mut cols = vec![
        "chip_id".to_string(),
        "region_id".to_string(),
        "sample_kind".to_string(),
        "benchmark_id".to_string(),
    ];
    cols.extend((1..=n_features).map(|i| format!("f{i}")));
    cols
}

/// Load a dataset expecting the default 8-feature schema.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    load_csv_with(path, DEFAULT_N_FEATURES)
}

/// Load a dataset expecting `n_features` frequency columns.
pub fn load_csv_with(path: impl AsRef<Path>, n_features: usize) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = match lines.next() {
        Some(h) if !h.trim().is_empty() => h,
        _ => return Err(Error::EmptyDataset),
    };
    let expected = expected_header(n_features);
    let actual: Vec<&str> = header.trim_end().split(',').collect();
    for i in 0..expected.len().max(actual.len()) {
        match (expected.get(i), actual.get(i)) {
            (Some(e), None) => {
                return Err(Error::Schema(format!("missing column '{e}'")));
            }
            (None, Some(a)) => {
                return Err(Error::Schema(format!("unexpected extra column '{a}'")));
            }
            (Some(e), Some(a)) if e != a => {
                return Err(Error::Schema(format!(
                    "expected column '{e}' at position {}, found '{a}'",
                    i + 1
                )));
            }
            _ => {}
        }
    }

    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2; // header is line 1
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != expected.len() {
            return Err(Error::Row {
                line: lineno,
                msg: format!("{} fields, expected {}", fields.len(), expected.len()),
            });
        }
        let row_err = |msg: String| Error::Row { line: lineno, msg };
        let chip_id = fields[0];
        let region_id: u32 = fields[1]
            .parse()
            .map_err(|_| row_err(format!("bad region_id {:?}", fields[1])))?;
        let kind = match fields[2] {
            "golden" => {
                if !fields[3].is_empty() {
                    return Err(row_err(format!(
                        "golden row must have empty benchmark_id, found {:?}",
                        fields[3]
                    )));
                }
                SampleKind::Golden
            }
            "trojan" => SampleKind::Trojan(fields[3].to_string()),
            other => {
                return Err(row_err(format!(
                    "bad sample_kind {other:?}, expected golden or trojan"
                )))
            }
        };
        let mut features = Vec::with_capacity(n_features);
        for (j, raw) in fields[4..].iter().enumerate() {
            let v: f64 = raw
                .parse()
                .map_err(|_| row_err(format!("non-numeric frequency f{} = {raw:?}", j + 1)))?;
            if !v.is_finite() || v <= 0.0 {
                return Err(row_err(format!(
                    "frequency f{} = {raw} must be finite and positive",
                    j + 1
                )));
            }
            features.push(v);
        }
        let sample = FrequencySample::new(chip_id, region_id, kind, features)
            .map_err(|e| row_err(e.to_string()))?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    LabeledDataset::new(samples)
}

/// Render one frequency with 6 significant digits.
fn format_freq(v: f64) -> String {
    format!("{v:.5e}")
}

/// Serialize a dataset in the CSV schema (6 significant digits per
/// frequency).
pub fn to_csv_string(data: &LabeledDataset) -> String {
    let mut out = expected_header(data.n_features()).join(",");
    out.push('\n');
    for s in data.samples() {
        let (kind, bench) = match s.kind() {
            SampleKind::Golden => ("golden", ""),
            SampleKind::Trojan(b) => ("trojan", b.as_str()),
        };
        out.push_str(s.chip_id());
        out.push(',');
        out.push_str(&s.region_id().to_string());
        out.push(',');
        out.push_str(kind);
        out.push(',');
        out.push_str(bench);
        for &f in s.features() {
            out.push(',');
            out.push_str(&format_freq(f));
        }
        out.push('\n');
    }
    out
}

/// Write a dataset to `path` in the CSV schema.
pub fn save_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_csv_string(data))?;
    Ok(())
}
