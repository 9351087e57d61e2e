//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its runtime. Oracles here are written against the
//! definitions directly and stay independent of the library's
//! implementation paths.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ron_detect::classifiers::{rbf_kernel, SvmParams, TieBreak, TrainedGnb, TrainedKnn, TrainedSvm};
use ron_detect::dataset::{FrequencySample, Label, LabeledDataset, SampleKind, Scaler};
use ron_detect::eval::{
    self, emit_report, rates, ClassifierSpec, ConfusionCounts, HarnessConfig, RateMetrics,
    ReportFormat, ReportRow, TrialRecord, TrialReport,
};
use ron_detect::synth::{generate, SynthConfig};
use ron_detect::tuning::{self, GridSpec, SweepParam};

fn criterion(
    id: u32,
    desc: &str,
    budget: Duration,
    body: impl FnOnce() -> Result<String, String>,
) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    match outcome {
        Ok(detail) if elapsed <= budget => {
            println!(
                "[criterion {id}] {desc}: PASS ({detail}; {:.2}s of {:.0}s budget)",
                elapsed.as_secs_f64(),
                budget.as_secs_f64()
            );
        }
        Ok(_) => {
            println!(
                "[criterion {id}] {desc}: FAIL (exceeded {:.0}s budget: {:.2}s)",
                budget.as_secs_f64(),
                elapsed.as_secs_f64()
            );
            panic!("criterion {id} exceeded its runtime budget");
        }
        Err(msg) => {
            println!("[criterion {id}] {desc}: FAIL — {msg}");
            panic!("criterion {id} failed: {msg}");
        }
    }
}

/// Labeled points wrapped as a dataset (features are standardized-space
/// values; chip ids are synthetic).
fn points_dataset(points: &[Vec<f64>], labels: &[Label]) -> LabeledDataset {
    let samples: Vec<FrequencySample> = points
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (p, l))| {
            let kind = match l {
                Label::Golden => SampleKind::Golden,
                Label::Trojan => SampleKind::Trojan("t".into()),
            };
            let raw: Vec<f64> = p.iter().map(|v| v + 1000.0).collect();
            FrequencySample::new(format!("c{i:04}"), 0, kind, raw).unwrap()
        })
        .collect();
    // shift back down with an offset-only scaler
    let ds = LabeledDataset::new(samples).unwrap();
    let dims = points[0].len();
    Scaler::from_parts(vec![1000.0; dims], vec![1.0; dims])
        .unwrap()
        .apply(&ds)
        .unwrap()
}

// ── criterion 1 ──────────────────────────────────────────────────────────

#[test]
fn criterion_1_metric_identities() {
    criterion(
        1,
        "rate identities on 1,000 random confusion counts",
        Duration::from_secs(1),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(1001);
            let mut checked = 0;
            while checked < 1000 {
                let c = ConfusionCounts::new(
                    rng.gen_range(0..200),
                    rng.gen_range(0..200),
                    rng.gen_range(0..200),
                    rng.gen_range(0..200),
                );
                if c.total() == 0 {
                    continue;
                }
                checked += 1;
                let m = rates(&c).map_err(|e| e.to_string())?;
                if (m.tpr + m.fnr - 1.0).abs() > 1e-12 {
                    return Err(format!("TPR+FNR != 1 for {c:?}"));
                }
                if (m.tnr + m.fpr - 1.0).abs() > 1e-12 {
                    return Err(format!("TNR+FPR != 1 for {c:?}"));
                }
                let acc = (c.true_pos + c.true_neg) as f64 / c.total() as f64;
                if (m.accuracy - acc).abs() > 1e-12 {
                    return Err(format!("accuracy mismatch for {c:?}"));
                }
            }
            Ok("1000 random counts".into())
        },
    );
}

// ── criterion 2 ──────────────────────────────────────────────────────────

/// Brute force: sort all distances, vote among the first k, split vote to
/// the nearest neighbor.
fn knn_oracle(points: &[Vec<f64>], labels: &[Label], k: usize, query: &[f64]) -> Label {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = p
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            (d, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let trojan = order[..k].iter().filter(|&&(_, i)| labels[i].is_trojan()).count();
    match (2 * trojan).cmp(&k) {
        std::cmp::Ordering::Greater => Label::Trojan,
        std::cmp::Ordering::Less => Label::Golden,
        std::cmp::Ordering::Equal => labels[order[0].1],
    }
}

#[test]
fn criterion_2_knn_oracle_equivalence() {
    criterion(
        2,
        "knn matches the brute-force oracle on 100 random datasets",
        Duration::from_secs(10),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(2002);
            let mut agreements = 0u64;
            for _ in 0..100 {
                let n = rng.gen_range(20..=200);
                let points: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect())
                    .collect();
                let labels: Vec<Label> = (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            Label::Trojan
                        } else {
                            Label::Golden
                        }
                    })
                    .collect();
                let ds = points_dataset(&points, &labels);
                let mut queries: Vec<Vec<f64>> = (0..20)
                    .map(|_| (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect())
                    .collect();
                for i in 0..5 {
                    queries.push(points[i * n / 5].clone());
                }
                for &k in &[1usize, 2, 3, 5, 15] {
                    if k > n {
                        continue;
                    }
                    let model = TrainedKnn::fit(&ds, k).map_err(|e| e.to_string())?;
                    for q in &queries {
                        let got = model.classify(q).map_err(|e| e.to_string())?;
                        let want = knn_oracle(&points, &labels, k, q);
                        if got != want {
                            return Err(format!("disagreement at k={k}"));
                        }
                        agreements += 1;
                    }
                }
            }
            Ok(format!("{agreements} classifications, 100% agreement"))
        },
    );
}

// ── criterion 3 ──────────────────────────────────────────────────────────

/// Reference dual solver for tiny problems: exhaustive enumeration of
/// active-set patterns. Each variable is pinned at 0, pinned at its box
/// cap, or left free; free variables solve the stationarity system with
/// the equality multiplier exactly. The optimum's own pattern reproduces
/// it to machine precision, and every other feasible candidate scores
/// lower on the concave dual, so the best feasible candidate is the exact
/// global maximum.
struct TinyQp {
    q: Vec<Vec<f64>>,
    y: Vec<f64>,
    cbox: Vec<f64>,
}

/// Gaussian elimination with partial pivoting; None on singular systems.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

impl TinyQp {
    fn new(points: &[Vec<f64>], y: &[f64], cbox: &[f64], gamma: f64) -> Self {
        let n = points.len();
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let k = rbf_kernel(&points[i], &points[j], gamma).unwrap();
                q[i][j] = y[i] * y[j] * k;
            }
        }
        Self {
            q,
            y: y.to_vec(),
            cbox: cbox.to_vec(),
        }
    }

    fn objective(&self, a: &[f64]) -> f64 {
        let n = a.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * self.q[i][j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    }

    fn feasible(&self, a: &[f64]) -> bool {
        let eq: f64 = a.iter().zip(&self.y).map(|(ai, yi)| ai * yi).sum();
        if eq.abs() > 1e-7 * (1.0 + self.cbox.iter().sum::<f64>()) {
            return false;
        }
        a.iter()
            .zip(&self.cbox)
            .all(|(ai, ci)| *ai >= -1e-9 && *ai <= ci + 1e-9 * ci.max(1.0))
    }

    /// Exhaustive active-set search for the exact dual maximum.
    fn solve_exact(&self) -> Vec<f64> {
        let n = self.y.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut consider = |a: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
            if !self.feasible(&a) {
                return;
            }
            let w = self.objective(&a);
            if best.as_ref().map_or(true, |(bw, _)| w > *bw) {
                *best = Some((w, a));
            }
        };
        // base-3 pattern code: 0 = pinned at zero, 1 = pinned at cap, 2 = free
        let patterns = 3usize.pow(n as u32);
        for code in 0..patterns {
            let mut state = Vec::with_capacity(n);
            let mut rem = code;
            for _ in 0..n {
                state.push(rem % 3);
                rem /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            let mut alpha = vec![0.0; n];
            for i in 0..n {
                if state[i] == 1 {
                    alpha[i] = self.cbox[i];
                }
            }
            if free.is_empty() {
                consider(alpha, &mut best);
                continue;
            }
            // stationarity over free vars plus the equality constraint:
            // [Q_FF  y_F] [a_F]   [1 - Q_FB a_B   ]
            // [y_F^T  0 ] [lam] = [-sum_B y_i a_i ]
            let m = free.len();
            let mut mat = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    mat[r][c] = self.q[i][j];
                }
                mat[r][m] = self.y[i];
                let bound_term: f64 = (0..n)
                    .filter(|j| state[*j] == 1)
                    .map(|j| self.q[i][j] * alpha[j])
                    .sum();
                rhs[r] = 1.0 - bound_term;
            }
            for (c, &j) in free.iter().enumerate() {
                mat[m][c] = self.y[j];
            }
            rhs[m] = -(0..n)
                .filter(|j| state[*j] == 1)
                .map(|j| self.y[j] * alpha[j])
                .sum::<f64>();
            let Some(solution) = solve_linear(mat, rhs) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = solution[r];
            }
            consider(alpha, &mut best);
        }
        best.expect("alpha = 0 is always feasible").1
    }

    /// Bias interval midpoint from the solution's KKT inequalities.
    fn bias(&self, a: &[f64], points: &[Vec<f64>], gamma: f64) -> f64 {
        let n = a.len();
        let u = |i: usize| -> f64 {
            (0..n)
                .map(|j| a[j] * self.y[j] * rbf_kernel(&points[j], &points[i], gamma).unwrap())
                .sum()
        };
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let v = self.y[i] - u(i);
            let positive = self.y[i] > 0.0;
            if (positive && a[i] < self.cbox[i] - 1e-9) || (!positive && a[i] > 1e-9) {
                lo = lo.max(v);
            }
            if (positive && a[i] > 1e-9) || (!positive && a[i] < self.cbox[i] - 1e-9) {
                hi = hi.min(v);
            }
        }
        0.5 * (lo + hi)
    }
}

#[test]
fn criterion_3_svm_solver_against_qp_reference() {
    criterion(
        3,
        "svm dual matches the exhaustive QP reference on tiny problems",
        Duration::from_secs(30),
        || {
            // oracle self-check on the analytically solvable 2-point problem:
            // W* = 1 / (1 - e^{-0.4})
            {
                let points = vec![vec![0.0], vec![2.0]];
                let y = [-1.0, 1.0];
                let cbox = [1000.0, 1000.0];
                let qp = TinyQp::new(&points, &y, &cbox, 0.1);
                let a = qp.solve_exact();
                let expect = 1.0 / (1.0 - (-0.4f64).exp());
                if (qp.objective(&a) - expect).abs() > 1e-9 * expect {
                    return Err(format!(
                        "oracle self-check failed: {} vs {expect}",
                        qp.objective(&a)
                    ));
                }
            }

            let mut rng = ChaCha8Rng::seed_from_u64(3003);
            let tol = 1e-3;
            for trial in 0..200 {
                let n = rng.gen_range(2..=6);
                let mut points: Vec<Vec<f64>> = Vec::new();
                let mut labels: Vec<Label> = Vec::new();
                for i in 0..n {
                    let trojan = if i == 0 {
                        false
                    } else if i == 1 {
                        true
                    } else {
                        rng.gen_bool(0.5)
                    };
                    let shift = if trojan { 0.8 } else { -0.8 };
                    points.push(vec![
                        rng.gen_range(-1.5..1.5) + shift,
                        rng.gen_range(-1.5..1.5),
                    ]);
                    labels.push(if trojan { Label::Trojan } else { Label::Golden });
                }
                let c = [0.5, 1.0, 10.0][trial % 3];
                let gamma = [0.1, 0.5, 1.0][(trial / 3) % 3];
                let weights = if trial % 4 == 0 { Some((2.0, 0.5)) } else { None };

                let ds = points_dataset(&points, &labels);
                let params = SvmParams {
                    c,
                    gamma,
                    class_weights: weights,
                    tol,
                    ..SvmParams::default()
                };
                let model = TrainedSvm::fit(&ds, &params).map_err(|e| e.to_string())?;

                let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
                let (w_neg, w_pos) = weights.unwrap_or((1.0, 1.0));
                let cbox: Vec<f64> = labels
                    .iter()
                    .map(|l| if l.is_trojan() { c * w_pos } else { c * w_neg })
                    .collect();
                let qp = TinyQp::new(&points, &y, &cbox, gamma);
                let reference = qp.solve_exact();

                let w_ref = qp.objective(&reference);
                let w_got = model.dual_objective();
                if (w_got - w_ref).abs() > 1e-4 * w_ref.abs().max(1.0) {
                    return Err(format!(
                        "dual objective {w_got} vs reference {w_ref} (trial {trial})"
                    ));
                }

                // KKT: selection gap and the per-point margin conditions
                if model.kkt_violation() > tol + 1e-9 {
                    return Err(format!(
                        "KKT gap {} > {tol} (trial {trial})",
                        model.kkt_violation()
                    ));
                }
                for (i, p) in points.iter().enumerate() {
                    let margin = y[i] * model.decision(p).map_err(|e| e.to_string())?;
                    let a = model.alphas()[i];
                    let ci = cbox[i];
                    let ok = if a <= 0.0 {
                        margin >= 1.0 - tol - 1e-9
                    } else if a >= ci {
                        margin <= 1.0 + tol + 1e-9
                    } else {
                        (margin - 1.0).abs() <= tol + 1e-9
                    };
                    if !ok {
                        return Err(format!(
                            "per-point KKT violated: alpha {a}, margin {margin} (trial {trial})"
                        ));
                    }
                }

                // decision agreement where the reference bias is pinned by a
                // free support vector; compare against a tightly converged
                // fit so the check measures correctness, not the default
                // stopping slack
                let free = reference
                    .iter()
                    .zip(&cbox)
                    .any(|(a, ci)| *a > 0.05 * ci && *a < 0.95 * ci);
                if free {
                    let tight = TrainedSvm::fit(
                        &ds,
                        &SvmParams {
                            tol: 1e-6,
                            ..params.clone()
                        },
                    )
                    .map_err(|e| e.to_string())?;
                    let b_ref = qp.bias(&reference, &points, gamma);
                    for _ in 0..5 {
                        let q = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                        let f_ref: f64 = (0..n)
                            .map(|j| {
                                reference[j]
                                    * y[j]
                                    * rbf_kernel(&points[j], &q, gamma).unwrap()
                            })
                            .sum::<f64>()
                            + b_ref;
                        let f_got = tight.decision(&q).map_err(|e| e.to_string())?;
                        if (f_got - f_ref).abs() > 1e-3 * f_ref.abs().max(1.0) {
                            return Err(format!(
                                "decision {f_got} vs reference {f_ref} (trial {trial})"
                            ));
                        }
                    }
                }
            }

            // separable 4-point sets at C=1e6 classify their training data
            // perfectly (hard-margin limit)
            for trial in 0..50 {
                let mut rng = ChaCha8Rng::seed_from_u64(3300 + trial);
                let mut points = Vec::new();
                let mut labels = Vec::new();
                for i in 0..4 {
                    let trojan = i % 2 == 0;
                    let center = if trojan { 3.0 } else { -3.0 };
                    points.push(vec![
                        center + rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                    ]);
                    labels.push(if trojan { Label::Trojan } else { Label::Golden });
                }
                let ds = points_dataset(&points, &labels);
                let model = TrainedSvm::fit(
                    &ds,
                    &SvmParams {
                        c: 1e6,
                        gamma: 0.5,
                        ..SvmParams::default()
                    },
                )
                .map_err(|e| e.to_string())?;
                for (p, l) in points.iter().zip(&labels) {
                    if model.classify(p).map_err(|e| e.to_string())? != *l {
                        return Err(format!("training error on separable set {trial}"));
                    }
                }
            }
            Ok("200 reference comparisons + 50 separable sets".into())
        },
    );
}

// ── criterion 4 ──────────────────────────────────────────────────────────

#[test]
fn criterion_4_gnb_posterior_exactness() {
    criterion(
        4,
        "gnb posteriors match a direct density-evaluation oracle",
        Duration::from_secs(10),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(4004);
            let n = 120;
            let points: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let shift = if i % 4 == 0 { 0.9 } else { -0.4 };
                    (0..8).map(|_| rng.gen_range(-1.0..1.0) + shift).collect()
                })
                .collect();
            let labels: Vec<Label> = (0..n)
                .map(|i| {
                    if i % 4 == 0 {
                        Label::Golden
                    } else {
                        Label::Trojan
                    }
                })
                .collect();
            let ds = points_dataset(&points, &labels);
            let model = TrainedGnb::fit(&ds).map_err(|e| e.to_string())?;

            // direct evaluation: prior times the product of Gaussian
            // densities, normalized; plain arithmetic, no logs
            let density = |stats: &ron_detect::classifiers::ClassStats, q: &[f64]| -> f64 {
                let mut p = stats.prior;
                for ((&x, &mu), &var) in q.iter().zip(&stats.means).zip(&stats.vars) {
                    p *= (2.0 * std::f64::consts::PI * var).sqrt().recip()
                        * (-(x - mu) * (x - mu) / (2.0 * var)).exp();
                }
                p
            };

            for _ in 0..1000 {
                let q: Vec<f64> = (0..8).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let pg = density(model.golden_stats(), &q);
                let pt = density(model.trojan_stats(), &q);
                let want = pt / (pg + pt);
                let got = model.posterior_trojan(&q).map_err(|e| e.to_string())?;
                if (want - got).abs() > 1e-12 {
                    return Err(format!("posterior {got} vs oracle {want}"));
                }
                let (label, posterior) = model.classify(&q).map_err(|e| e.to_string())?;
                let sum = if label.is_trojan() {
                    posterior + pg / (pg + pt)
                } else {
                    posterior + got
                };
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(format!("posteriors sum to {sum}"));
                }
            }
            Ok("1000 queries within 1e-12".into())
        },
    );
}

// ── criteria 5 and 6: synthetic-corpus behavior ──────────────────────────

fn all_seven_specs() -> Vec<ClassifierSpec> {
    [
        "knn",
        "svm",
        "gnb",
        "ensemble:knn+svm+gnb",
        "ensemble:knn+svm",
        "ensemble:knn+gnb",
        "ensemble:svm+gnb",
    ]
    .iter()
    .map(|t| ClassifierSpec::parse(t).unwrap())
    .collect()
}

fn mean_of(report: &TrialReport, classifier: &str, size: usize) -> RateMetrics {
    report
        .rows
        .iter()
        .find(|r| r.classifier == classifier && r.size == size)
        .unwrap_or_else(|| panic!("missing row {classifier}/{size}"))
        .mean
}

#[test]
fn criterion_5_high_signal_accuracy() {
    criterion(
        5,
        "every classifier reaches 0.95 accuracy on the high-signal corpus",
        Duration::from_secs(120),
        || {
            let cfg = SynthConfig {
                trojan_drop_rel_min: 0.02,
                trojan_drop_rel_max: 0.03,
                ..SynthConfig::default()
            };
            let data = generate(&cfg, 7).map_err(|e| e.to_string())?;
            let harness = HarnessConfig {
                sizes: vec![24],
                n_trials: 20,
                seed: 4,
                ..HarnessConfig::default()
            };
            let report =
                eval::run_trials(&data, &all_seven_specs(), &harness).map_err(|e| e.to_string())?;
            let mut detail = String::new();
            for spec in all_seven_specs() {
                let acc = mean_of(&report, &spec.name(), 24).accuracy;
                detail.push_str(&format!("{}={:.3} ", spec.name(), acc));
                if acc < 0.95 {
                    return Err(format!(
                        "{} mean accuracy {acc:.3} < 0.95 at 24 chips",
                        spec.name()
                    ));
                }
            }
            Ok(detail.trim_end().to_string())
        },
    );
}

#[test]
fn criterion_6_trend_orderings() {
    criterion(
        6,
        "trend orderings at default signal levels",
        Duration::from_secs(600),
        || {
            let data = generate(&SynthConfig::default(), 7).map_err(|e| e.to_string())?;
            // split votes resolve toward Golden here: the reported ensemble
            // behavior (zero FPR below every member's FPR) is the
            // trojan-only-if-both-agree reading, and the default tie rule is
            // explicitly overridable when optimizing FPR
            let harness = HarnessConfig {
                sizes: vec![6, 12, 24],
                n_trials: 20,
                seed: 4,
                tie_break: TieBreak::PreferNegative,
                ..HarnessConfig::default()
            };
            let specs = all_seven_specs();
            let report = eval::run_trials(&data, &specs, &harness).map_err(|e| e.to_string())?;

            // (a) SVM mean FPR shrinks from 6 to 24 training chips
            let svm6 = mean_of(&report, "svm", 6).fpr;
            let svm24 = mean_of(&report, "svm", 24).fpr;
            if !(svm24 < svm6) {
                return Err(format!("svm FPR {svm6:.3}@6 -> {svm24:.3}@24 not decreasing"));
            }

            // (b) GNB misses more Trojans than it flags golden chips
            for size in [6, 12, 24] {
                let m = mean_of(&report, "gnb", size);
                if !(m.fnr > m.fpr) {
                    return Err(format!(
                        "gnb FNR {:.3} not above FPR {:.3} at size {size}",
                        m.fnr, m.fpr
                    ));
                }
            }

            // (c) the GNB ensembles have the lowest mean FPR at 24 chips
            let fpr24: Vec<(String, f64)> = specs
                .iter()
                .map(|s| (s.name(), mean_of(&report, &s.name(), 24).fpr))
                .collect();
            let lowest = fpr24.iter().map(|(_, f)| *f).fold(f64::INFINITY, f64::min);
            for name in ["ensemble:knn+gnb", "ensemble:svm+gnb"] {
                let f = fpr24.iter().find(|(n, _)| n == name).unwrap().1;
                if f > lowest {
                    return Err(format!(
                        "{name} FPR {f:.3} above the minimum {lowest:.3} at 24 chips"
                    ));
                }
            }
            Ok(format!(
                "svm fpr {svm6:.3}->{svm24:.3}; gnb fnr>fpr at all sizes; gnb-ensemble fpr@24 = {:.3}/{:.3}",
                fpr24.iter().find(|(n, _)| n == "ensemble:knn+gnb").unwrap().1,
                fpr24.iter().find(|(n, _)| n == "ensemble:svm+gnb").unwrap().1
            ))
        },
    );
}

// ── criterion 7 ──────────────────────────────────────────────────────────

fn sweep_csv(results: &[tuning::SweepResult]) -> String {
    let mut out = String::from("param,accuracy,fpr,fnr\n");
    for r in results {
        out.push_str(&format!("{},{},{},{}\n", r.param, r.accuracy, r.fpr, r.fnr));
    }
    out
}

#[test]
fn criterion_7_tuning_determinism_and_shape() {
    criterion(
        7,
        "k-sweep shape, grid self-consistency, byte-identical reruns",
        Duration::from_secs(300),
        || {
            let data = generate(
                &SynthConfig {
                    n_chips: 16,
                    ..SynthConfig::default()
                },
                5,
            )
            .map_err(|e| e.to_string())?;

            let sweep1 = tuning::k_sweep(&data, 1, 40, 10, 77).map_err(|e| e.to_string())?;
            let sweep2 = tuning::k_sweep(&data, 1, 40, 10, 77).map_err(|e| e.to_string())?;
            if sweep1.len() != 40 {
                return Err(format!("sweep has {} points, expected 40", sweep1.len()));
            }
            for (i, r) in sweep1.iter().enumerate() {
                if r.param != SweepParam::K(i + 1) {
                    return Err(format!("sweep point {i} is {:?}", r.param));
                }
            }
            if sweep_csv(&sweep1) != sweep_csv(&sweep2) {
                return Err("k-sweep reruns differ".into());
            }

            let grid = GridSpec::default();
            let (c, gamma, best) =
                tuning::grid_search(&data, &grid, 10, 78).map_err(|e| e.to_string())?;
            let table1 = tuning::evaluate_grid(&data, &grid, 10, 78).map_err(|e| e.to_string())?;
            let table2 = tuning::evaluate_grid(&data, &grid, 10, 78).map_err(|e| e.to_string())?;
            if sweep_csv(&table1) != sweep_csv(&table2) {
                return Err("grid reruns differ".into());
            }
            let recomputed = tuning::pick_best_cell(&table1).unwrap();
            if recomputed.param != (SweepParam::CGamma { c, gamma }) {
                return Err(format!(
                    "grid winner {c};{gamma} does not maximize its re-evaluated table ({:?})",
                    recomputed.param
                ));
            }
            if !grid.c_values.contains(&c) || !grid.gamma_values.contains(&gamma) {
                return Err("grid winner is not a grid member".into());
            }
            Ok(format!(
                "40 sweep points; grid winner C={c}, gamma={gamma}, accuracy {:.3}",
                best.accuracy
            ))
        },
    );
}

// ── criterion 8 ──────────────────────────────────────────────────────────

#[test]
fn criterion_8_report_fidelity() {
    criterion(
        8,
        "markdown report layout with three-decimal fixture cells",
        Duration::from_secs(1),
        || {
            let mk = |classifier: &str, size, tp, tn, fp, fn_| {
                let counts = ConfusionCounts::new(tp, tn, fp, fn_);
                TrialRecord {
                    classifier: classifier.into(),
                    size,
                    trial: 0,
                    counts,
                    metrics: rates(&counts).unwrap(),
                }
            };
            // knn FPR 94/1000 = 0.094 at 24; svm accuracy 974/1000 = 0.974
            let records = vec![
                mk("knn", 6, 900, 813, 187, 100),
                mk("knn", 12, 920, 815, 185, 80),
                mk("knn", 24, 945, 906, 94, 55),
                mk("svm", 6, 940, 445, 555, 60),
                mk("svm", 12, 946, 605, 355, 54),
                mk("svm", 24, 500, 474, 8, 18),
            ];
            let rows: Vec<ReportRow> = records
                .iter()
                .map(|r| ReportRow {
                    classifier: r.classifier.clone(),
                    size: r.size,
                    mean: r.metrics,
                })
                .collect();
            let report = TrialReport {
                rows,
                records,
                sizes: vec![6, 12, 24],
                n_trials: 1,
                seed: 0,
            };
            let md = emit_report(&report, ReportFormat::Markdown).map_err(|e| e.to_string())?;
            if !md.contains("| Metric | 6 Samples | 12 Samples | 24 Samples |") {
                return Err(format!("missing size header:\n{md}"));
            }
            for label in ["| TNR |", "| FPR |", "| FNR |", "| TPR |", "| Accuracy |"] {
                if md.lines().filter(|l| l.starts_with(label)).count() != 2 {
                    return Err(format!("metric row {label} missing:\n{md}"));
                }
            }
            let knn_fpr = md
                .lines()
                .skip_while(|l| !l.starts_with("## knn"))
                .find(|l| l.starts_with("| FPR |"))
                .ok_or("no knn FPR row")?;
            if !knn_fpr.ends_with("| 0.094 |") {
                return Err(format!("knn FPR row lacks the 0.094 cell: {knn_fpr}"));
            }
            let svm_acc = md
                .lines()
                .skip_while(|l| !l.starts_with("## svm"))
                .find(|l| l.starts_with("| Accuracy |"))
                .ok_or("no svm accuracy row")?;
            if !svm_acc.ends_with("| 0.974 |") {
                return Err(format!("svm accuracy row lacks the 0.974 cell: {svm_acc}"));
            }
            // verify the svm accuracy cell arithmetic: (500+474)/1000
            let m = rates(&ConfusionCounts::new(500, 474, 8, 18)).unwrap();
            if (m.accuracy - 0.974).abs() > 1e-12 {
                return Err("fixture accuracy is not 0.974".into());
            }
            Ok("layout and fixture cells verified".into())
        },
    );
}
