//! Versioned plain-text serialization for trained models.
//!
//! A model file carries the fitted scaler plus one model block, so a saved
//! classifier can score raw (unstandardized) fingerprints after reload.
//! Floats are written with 17 significant digits, which round-trips every
//! f64 exactly: decision values before save and after load are identical.
//!
//! ```text
//! ronmodel v1
//! scaler <dims>
//! mean <v> ...
//! std <v> ...
//! kind <knn|svm|gnb|ensemble>
//! ...kind-specific fields...
//! ```

use std::fs;
use std::path::Path;

use crate::classifiers::{
    ClassStats, Classifier, EnsembleMember, TieBreak, TrainedEnsemble, TrainedGnb, TrainedKnn,
    TrainedSvm,
};
use crate::dataset::{Label, LabeledDataset, Scaler};
use crate::error::{Error, Result};

/// Any trained model kind, with its uniform prediction surface.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Knn(TrainedKnn),
    Svm(TrainedSvm),
    Gnb(TrainedGnb),
    Ensemble(TrainedEnsemble),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Svm(_) => "svm",
            TrainedModel::Gnb(_) => "gnb",
            TrainedModel::Ensemble(_) => "ensemble",
        }
    }

    /// Label plus a kind-specific score: Trojan vote fraction for KNN and
    /// ensembles, decision value for SVM, Trojan posterior for GNB.
    pub fn predict(&self, query: &[f64]) -> Result<(Label, f64)> {
        Ok(match self {
            TrainedModel::Knn(m) => (m.classify(query)?, m.trojan_vote_fraction(query)?),
            TrainedModel::Svm(m) => (m.classify(query)?, m.decision(query)?),
            TrainedModel::Gnb(m) => {
                let post = m.posterior_trojan(query)?;
                (m.classify(query)?.0, post)
            }
            TrainedModel::Ensemble(m) => (m.classify(query)?, m.trojan_vote_fraction(query)?),
        })
    }
}

impl Classifier for TrainedModel {
    fn classify_point(&self, query: &[f64]) -> Result<Label> {
        Ok(self.predict(query)?.0)
    }

    fn n_features(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::Svm(m) => m.n_features(),
            TrainedModel::Gnb(m) => m.n_features(),
            TrainedModel::Ensemble(m) => m.n_features(),
        }
    }
}

/// A model bundled with the scaler it was trained behind.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub scaler: Scaler,
    pub model: TrainedModel,
}

impl SavedModel {
    /// Standardize a raw dataset and classify every sample.
    pub fn predict_dataset(&self, data: &LabeledDataset) -> Result<Vec<(Label, f64)>> {
        if data.n_features() != self.scaler.n_features() {
            return Err(Error::Argument(format!(
                "model expects {} features, dataset has {}",
                self.scaler.n_features(),
                data.n_features()
            )));
        }
        let std = self.scaler.apply(data)?;
        std.samples()
            .iter()
            .map(|s| self.model.predict(s.features()))
            .collect()
    }
}

const MAGIC: &str = "ronmodel v1";

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_floats(vs: &[f64]) -> String {
    vs.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(" ")
}

fn label_token(l: Label) -> &'static str {
    if l.is_trojan() {
        "+1"
    } else {
        "-1"
    }
}

/// Serialize a model (plus scaler) to the plain-text format.
pub fn write_model(saved: &SavedModel) -> String {
    let mut out = String::from(MAGIC);
    out.push('\n');
    out.push_str(&format!("scaler {}\n", saved.scaler.n_features()));
    out.push_str(&format!("mean {}\n", fmt_floats(saved.scaler.means())));
    out.push_str(&format!("std {}\n", fmt_floats(saved.scaler.stds())));
    write_model_block(&mut out, &saved.model);
    out
}

fn write_model_block(out: &mut String, model: &TrainedModel) {
    match model {
        TrainedModel::Knn(m) => {
            out.push_str("kind knn\n");
            out.push_str(&format!(
                "k {} points {} dims {}\n",
                m.k(),
                m.points().len(),
                m.points()[0].len()
            ));
            for (p, l) in m.points().iter().zip(m.labels()) {
                out.push_str(&format!("p {} {}\n", label_token(*l), fmt_floats(p)));
            }
        }
        TrainedModel::Svm(m) => {
            out.push_str("kind svm\n");
            out.push_str(&format!("tie {}\n", m.tie_break().as_str()));
            out.push_str(&format!(
                "gamma {} c_neg {} c_pos {} bias {}\n",
                fmt_f(m.gamma()),
                fmt_f(m.penalty(Label::Golden)),
                fmt_f(m.penalty(Label::Trojan)),
                fmt_f(m.bias())
            ));
            out.push_str(&format!(
                "points {} dims {}\n",
                m.points().len(),
                m.points()[0].len()
            ));
            for ((p, l), a) in m.points().iter().zip(m.labels()).zip(m.alphas()) {
                out.push_str(&format!(
                    "p {} {} {}\n",
                    label_token(*l),
                    fmt_f(*a),
                    fmt_floats(p)
                ));
            }
        }
        TrainedModel::Gnb(m) => {
            out.push_str("kind gnb\n");
            out.push_str(&format!("tie {}\n", m.tie_break().as_str()));
            out.push_str(&format!(
                "var_floor {} dims {}\n",
                fmt_f(m.var_floor()),
                m.golden_stats().means.len()
            ));
            out.push_str(&format!("prior_golden {}\n", fmt_f(m.golden_stats().prior)));
            out.push_str(&format!("prior_trojan {}\n", fmt_f(m.trojan_stats().prior)));
            out.push_str(&format!(
                "golden_mean {}\n",
                fmt_floats(&m.golden_stats().means)
            ));
            out.push_str(&format!(
                "golden_var {}\n",
                fmt_floats(&m.golden_stats().vars)
            ));
            out.push_str(&format!(
                "trojan_mean {}\n",
                fmt_floats(&m.trojan_stats().means)
            ));
            out.push_str(&format!(
                "trojan_var {}\n",
                fmt_floats(&m.trojan_stats().vars)
            ));
        }
        TrainedModel::Ensemble(m) => {
            out.push_str("kind ensemble\n");
            out.push_str(&format!("tie {}\n", m.tie_break().as_str()));
            out.push_str(&format!("members {}\n", m.members().len()));
            for member in m.members() {
                let as_model = match member {
                    EnsembleMember::Knn(x) => TrainedModel::Knn(x.clone()),
                    EnsembleMember::Svm(x) => TrainedModel::Svm(x.clone()),
                    EnsembleMember::Gnb(x) => TrainedModel::Gnb(x.clone()),
                };
                write_model_block(out, &as_model);
            }
        }
    }
}

pub fn save_model(saved: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_model(saved))?;
    Ok(())
}

struct Cursor<'a> {
    lines: std::str::Lines<'a>,
    lineno: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines(),
            lineno: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        self.lineno += 1;
        self.lines
            .next()
            .ok_or_else(|| Error::Format(format!("truncated model file at line {}", self.lineno)))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format(format!("line {}: {}", self.lineno, msg.into()))
    }

    /// Next line, split as `<key> <rest>` with the key checked.
    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
        if head != key {
            return Err(self.err(format!("expected {key:?}, found {head:?}")));
        }
        Ok(rest)
    }
}

fn parse_f(cursor: &Cursor<'_>, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| cursor.err(format!("bad float {s:?}")))
}

fn parse_floats(cursor: &Cursor<'_>, s: &str, n: usize) -> Result<Vec<f64>> {
    let vals = s
        .split_whitespace()
        .map(|t| parse_f(cursor, t))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != n {
        return Err(cursor.err(format!("expected {n} floats, found {}", vals.len())));
    }
    Ok(vals)
}

fn parse_label(cursor: &Cursor<'_>, s: &str) -> Result<Label> {
    match s {
        "+1" => Ok(Label::Trojan),
        "-1" => Ok(Label::Golden),
        other => Err(cursor.err(format!("bad label {other:?}"))),
    }
}

/// Parse the plain-text format back into a model.
pub fn read_model(text: &str) -> Result<SavedModel> {
    let mut cursor = Cursor::new(text);
    let magic = cursor.next()?;
    if magic.trim_end() != MAGIC {
        return Err(Error::Format(format!(
            "unsupported model header {magic:?}; expected {MAGIC:?}"
        )));
    }
    let dims: usize = {
        let rest = cursor.keyed("scaler")?;
        rest.trim()
            .parse()
            .map_err(|_| cursor.err(format!("bad scaler dims {rest:?}")))?
    };
    let means = {
        let rest = cursor.keyed("mean")?;
        parse_floats(&cursor, rest, dims)?
    };
    let stds = {
        let rest = cursor.keyed("std")?;
        parse_floats(&cursor, rest, dims)?
    };
    let scaler = Scaler::from_parts(means, stds)?;
    let model = read_model_block(&mut cursor)?;
    Ok(SavedModel { scaler, model })
}

fn read_model_block(cursor: &mut Cursor<'_>) -> Result<TrainedModel> {
    let kind = cursor.keyed("kind")?.trim().to_string();
    match kind.as_str() {
        "knn" => {
            let header = cursor.keyed("k")?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 5 || parts[1] != "points" || parts[3] != "dims" {
                return Err(cursor.err("expected `k <k> points <n> dims <d>`"));
            }
            let k: usize = parts[0]
                .parse()
                .map_err(|_| cursor.err(format!("bad k {:?}", parts[0])))?;
            let n: usize = parts[2]
                .parse()
                .map_err(|_| cursor.err(format!("bad point count {:?}", parts[2])))?;
            let d: usize = parts[4]
                .parse()
                .map_err(|_| cursor.err(format!("bad dims {:?}", parts[4])))?;
            let mut points = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let rest = cursor.keyed("p")?;
                let (label, values) = rest
                    .split_once(' ')
                    .ok_or_else(|| cursor.err("bad point row"))?;
                labels.push(parse_label(cursor, label)?);
                points.push(parse_floats(cursor, values, d)?);
            }
            Ok(TrainedModel::Knn(TrainedKnn::from_parts(k, points, labels)?))
        }
        "svm" => {
            let tie: TieBreak = cursor.keyed("tie")?.trim().parse()?;
            let header = cursor.keyed("gamma")?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 7 || parts[1] != "c_neg" || parts[3] != "c_pos" || parts[5] != "bias"
            {
                return Err(cursor.err("expected `gamma <g> c_neg <c> c_pos <c> bias <b>`"));
            }
            let gamma = parse_f(cursor, parts[0])?;
            let c_neg = parse_f(cursor, parts[2])?;
            let c_pos = parse_f(cursor, parts[4])?;
            let bias = parse_f(cursor, parts[6])?;
            let header = cursor.keyed("points")?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 3 || parts[1] != "dims" {
                return Err(cursor.err("expected `points <n> dims <d>`"));
            }
            let n: usize = parts[0]
                .parse()
                .map_err(|_| cursor.err(format!("bad point count {:?}", parts[0])))?;
            let d: usize = parts[2]
                .parse()
                .map_err(|_| cursor.err(format!("bad dims {:?}", parts[2])))?;
            let mut points = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            let mut alphas = Vec::with_capacity(n);
            for _ in 0..n {
                let rest = cursor.keyed("p")?;
                let mut it = rest.splitn(3, ' ');
                let label = it.next().ok_or_else(|| cursor.err("bad point row"))?;
                let alpha = it.next().ok_or_else(|| cursor.err("bad point row"))?;
                let values = it.next().ok_or_else(|| cursor.err("bad point row"))?;
                labels.push(parse_label(cursor, label)?);
                alphas.push(parse_f(cursor, alpha)?);
                points.push(parse_floats(cursor, values, d)?);
            }
            Ok(TrainedModel::Svm(TrainedSvm::from_parts(
                points, labels, alphas, bias, gamma, c_neg, c_pos, tie,
            )?))
        }
        "gnb" => {
            let tie: TieBreak = cursor.keyed("tie")?.trim().parse()?;
            let header = cursor.keyed("var_floor")?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 3 || parts[1] != "dims" {
                return Err(cursor.err("expected `var_floor <v> dims <d>`"));
            }
            let var_floor = parse_f(cursor, parts[0])?;
            let d: usize = parts[2]
                .parse()
                .map_err(|_| cursor.err(format!("bad dims {:?}", parts[2])))?;
            let prior_golden = {
                let rest = cursor.keyed("prior_golden")?;
                parse_f(cursor, rest.trim())?
            };
            let prior_trojan = {
                let rest = cursor.keyed("prior_trojan")?;
                parse_f(cursor, rest.trim())?
            };
            let golden_mean = {
                let rest = cursor.keyed("golden_mean")?;
                parse_floats(cursor, rest, d)?
            };
            let golden_var = {
                let rest = cursor.keyed("golden_var")?;
                parse_floats(cursor, rest, d)?
            };
            let trojan_mean = {
                let rest = cursor.keyed("trojan_mean")?;
                parse_floats(cursor, rest, d)?
            };
            let trojan_var = {
                let rest = cursor.keyed("trojan_var")?;
                parse_floats(cursor, rest, d)?
            };
            Ok(TrainedModel::Gnb(TrainedGnb::from_parts(
                ClassStats {
                    prior: prior_golden,
                    means: golden_mean,
                    vars: golden_var,
                },
                ClassStats {
                    prior: prior_trojan,
                    means: trojan_mean,
                    vars: trojan_var,
                },
                var_floor,
                tie,
            )?))
        }
        "ensemble" => {
            let tie: TieBreak = cursor.keyed("tie")?.trim().parse()?;
            let n: usize = {
                let rest = cursor.keyed("members")?;
                rest.trim()
                    .parse()
                    .map_err(|_| cursor.err(format!("bad member count {rest:?}")))?
            };
            let mut members = Vec::with_capacity(n);
            for _ in 0..n {
                members.push(match read_model_block(cursor)? {
                    TrainedModel::Knn(m) => EnsembleMember::Knn(m),
                    TrainedModel::Svm(m) => EnsembleMember::Svm(m),
                    TrainedModel::Gnb(m) => EnsembleMember::Gnb(m),
                    TrainedModel::Ensemble(_) => {
                        return Err(cursor.err("nested ensembles are not supported"))
                    }
                });
            }
            Ok(TrainedModel::Ensemble(TrainedEnsemble::new(members, tie)?))
        }
        other => Err(cursor.err(format!("unknown model kind {other:?}"))),
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    read_model(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::SvmParams;
    use crate::synth::{generate, SynthConfig};

    fn setup() -> (Scaler, LabeledDataset, LabeledDataset) {
        let data = generate(
            &SynthConfig {
                n_chips: 8,
                ..SynthConfig::default()
            },
            21,
        )
        .unwrap();
        let (train, test) = data.split_by_chip(5, 3).unwrap();
        let scaler = Scaler::fit(&train).unwrap();
        let train_std = scaler.apply(&train).unwrap();
        (scaler, train_std, test)
    }

    #[test]
    fn all_kinds_round_trip_with_identical_scores() {
        let (scaler, train_std, test) = setup();
        let knn = TrainedKnn::fit(&train_std, 2).unwrap();
        let svm = TrainedSvm::fit(
            &train_std,
            &SvmParams {
                c: 1.0,
                gamma: 0.1,
                class_weights: Some((3.0, 0.6)),
                ..SvmParams::default()
            },
        )
        .unwrap();
        let gnb = TrainedGnb::fit(&train_std).unwrap();
        let ens = TrainedEnsemble::new(
            vec![
                EnsembleMember::Knn(knn.clone()),
                EnsembleMember::Svm(svm.clone()),
                EnsembleMember::Gnb(gnb.clone()),
            ],
            TieBreak::PreferNegative,
        )
        .unwrap();

        for model in [
            TrainedModel::Knn(knn),
            TrainedModel::Svm(svm),
            TrainedModel::Gnb(gnb),
            TrainedModel::Ensemble(ens),
        ] {
            let saved = SavedModel {
                scaler: scaler.clone(),
                model,
            };
            let before = saved.predict_dataset(&test).unwrap();
            let text = write_model(&saved);
            let loaded = read_model(&text).unwrap();
            assert_eq!(saved.model.kind_name(), loaded.model.kind_name());
            let after = loaded.predict_dataset(&test).unwrap();
            for ((l1, s1), (l2, s2)) in before.iter().zip(&after) {
                assert_eq!(l1, l2);
                assert!(
                    (s1 - s2).abs() <= 1e-12 * s1.abs().max(1.0),
                    "score {s1} vs {s2} for {}",
                    saved.model.kind_name()
                );
            }
            // serialization is stable
            assert_eq!(text, write_model(&loaded));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (scaler, train_std, _) = setup();
        let knn = TrainedKnn::fit(&train_std, 1).unwrap();
        let saved = SavedModel {
            scaler,
            model: TrainedModel::Knn(knn),
        };
        let narrow = generate(
            &SynthConfig {
                n_chips: 3,
                n_ros: 4,
                ..SynthConfig::default()
            },
            9,
        )
        .unwrap();
        assert!(matches!(
            saved.predict_dataset(&narrow).unwrap_err(),
            Error::Argument(_)
        ));
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(read_model(""), Err(Error::Format(_))));
        assert!(matches!(
            read_model("wrongmagic\nscaler 1\n"),
            Err(Error::Format(_))
        ));
        let (scaler, train_std, _) = setup();
        let knn = TrainedKnn::fit(&train_std, 1).unwrap();
        let text = write_model(&SavedModel {
            scaler,
            model: TrainedModel::Knn(knn),
        });
        // truncate mid-file
        let cut = text.len() / 2;
        assert!(read_model(&text[..cut]).is_err());
    }

    #[test]
    fn predict_scores_orient_toward_trojan() {
        let (scaler, train_std, test) = setup();
        let gnb = TrainedGnb::fit(&train_std).unwrap();
        let saved = SavedModel {
            scaler,
            model: TrainedModel::Gnb(gnb),
        };
        for (label, score) in saved.predict_dataset(&test).unwrap() {
            if label == Label::Trojan {
                assert!(score >= 0.5);
            } else {
                assert!(score <= 0.5);
            }
        }
    }
}
