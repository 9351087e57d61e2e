//! Deterministic generator for synthetic RON frequency corpora.
//!
//! The generative model mirrors a measurement campaign over a population of
//! ICs: a per-chip frequency offset (chip-to-chip process variation), a
//! per-RO offset within each chip, measurement noise attenuated by
//! averaging repeated counter reads, and a multiplicative frequency
//! depression for Trojan samples that decays exponentially with RO index
//! distance from the Trojan site (supply droop spreads to nearby
//! oscillators; RO index stands in for placement).
//!
//! Generation is a pure function of `(config, seed)`: each chip derives its
//! own sub-seed, so results are identical across runs and thread schedules.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataset::{FrequencySample, LabeledDataset, SampleKind};
use crate::error::{Error, Result};
use crate::seeding;

/// Generative model parameters.
///
/// Defaults produce overlapping classes: the weakest Trojans sink below the
/// noise floor while the strongest depress the site RO far outside the
/// golden spread.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of ICs (8 boards x 4 regions by default).
    pub n_chips: usize,
    /// Ring oscillators (features) per IC.
    pub n_ros: usize,
    /// Nominal RO frequency in Hz.
    pub f_nominal: f64,
    /// Relative std of the per-chip frequency offset.
    pub sigma_chip_rel: f64,
    /// Relative std of the per-RO offset within a chip.
    pub sigma_ro_rel: f64,
    /// Relative std of a single frequency measurement.
    pub sigma_meas_rel: f64,
    /// Measurements averaged per reported frequency.
    pub n_meas_avg: usize,
    pub n_golden_per_chip: usize,
    pub n_trojan_per_chip: usize,
    /// Relative frequency depression range per Trojan sample.
    pub trojan_drop_rel_min: f64,
    pub trojan_drop_rel_max: f64,
    /// Attenuation of the depression across RO index distance from the
    /// Trojan site: weight = exp(-locality_decay * |r - site|).
    pub locality_decay: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_chips: 32,
            n_ros: 8,
            f_nominal: 100e6,
            sigma_chip_rel: 5e-4,
            sigma_ro_rel: 5e-4,
            sigma_meas_rel: 3e-3,
            n_meas_avg: 50,
            n_golden_per_chip: 2,
            n_trojan_per_chip: 23,
            trojan_drop_rel_min: 2e-4,
            trojan_drop_rel_max: 3e-2,
            locality_decay: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chips < 1 {
            return Err(Error::Argument("n_chips must be >= 1".into()));
        }
        if self.n_ros < 1 {
            return Err(Error::Argument("n_ros must be >= 1".into()));
        }
        if !(self.f_nominal > 0.0) || !self.f_nominal.is_finite() {
            return Err(Error::Argument("f_nominal must be positive".into()));
        }
        for (name, v) in [
            ("sigma_chip_rel", self.sigma_chip_rel),
            ("sigma_ro_rel", self.sigma_ro_rel),
            ("sigma_meas_rel", self.sigma_meas_rel),
            ("locality_decay", self.locality_decay),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be >= 0")));
            }
        }
        if self.n_meas_avg < 1 {
            return Err(Error::Argument("n_meas_avg must be >= 1".into()));
        }
        if self.n_golden_per_chip < 1 || self.n_trojan_per_chip < 1 {
            return Err(Error::Argument("per-chip sample counts must be >= 1".into()));
        }
        let (lo, hi) = (self.trojan_drop_rel_min, self.trojan_drop_rel_max);
        if !(lo >= 0.0) || !hi.is_finite() || lo > hi {
            return Err(Error::Argument(format!(
                "trojan drop range [{lo}, {hi}] must satisfy 0 <= min <= max"
            )));
        }
        if hi >= 1.0 {
            return Err(Error::Argument(
                "trojan_drop_rel_max must be < 1 (frequencies stay positive)".into(),
            ));
        }
        Ok(())
    }

    /// Parse a `key=value` configuration file; blank lines and `#` comments
    /// are ignored; every key is optional and defaults apply.
    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected key=value, got {raw:?}", idx + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                Error::Format(format!("line {}: bad {what} value {value:?}", idx + 1))
            };
            match key {
                "n_chips" => cfg.n_chips = value.parse().map_err(|_| bad(key))?,
                "n_ros" => cfg.n_ros = value.parse().map_err(|_| bad(key))?,
                "f_nominal" => cfg.f_nominal = value.parse().map_err(|_| bad(key))?,
                "sigma_chip_rel" => cfg.sigma_chip_rel = value.parse().map_err(|_| bad(key))?,
                "sigma_ro_rel" => cfg.sigma_ro_rel = value.parse().map_err(|_| bad(key))?,
                "sigma_meas_rel" => cfg.sigma_meas_rel = value.parse().map_err(|_| bad(key))?,
                "n_meas_avg" => cfg.n_meas_avg = value.parse().map_err(|_| bad(key))?,
                "n_golden_per_chip" => {
                    cfg.n_golden_per_chip = value.parse().map_err(|_| bad(key))?
                }
                "n_trojan_per_chip" => {
                    cfg.n_trojan_per_chip = value.parse().map_err(|_| bad(key))?
                }
                "trojan_drop_rel_min" => {
                    cfg.trojan_drop_rel_min = value.parse().map_err(|_| bad(key))?
                }
                "trojan_drop_rel_max" => {
                    cfg.trojan_drop_rel_max = value.parse().map_err(|_| bad(key))?
                }
                "locality_decay" => cfg.locality_decay = value.parse().map_err(|_| bad(key))?,
                other => {
                    return Err(Error::Format(format!(
                        "line {}: unknown key {other:?}",
                        idx + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

/// Generate a labeled synthetic corpus. Deterministic for fixed
/// `(config, seed)` regardless of thread count.
pub fn generate(config: &SynthConfig, seed: u64) -> Result<LabeledDataset> {
    config.validate()?;
    let per_chip: Vec<Vec<FrequencySample>> = (0..config.n_chips)
        .into_par_iter()
        .map(|c| generate_chip(config, seed, c))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(per_chip.into_iter().flatten().collect())
}

fn generate_chip(cfg: &SynthConfig, seed: u64, chip: usize) -> Result<Vec<FrequencySample>> {
    let mut rng = seeding::rng_from(seed, &[chip as u64]);
    let f = cfg.f_nominal;
    let chip_offset = Normal::new(0.0, cfg.sigma_chip_rel * f)
        .expect("validated sigma")
        .sample(&mut rng);
    let ro_dist = Normal::new(0.0, cfg.sigma_ro_rel * f).expect("validated sigma");
    let base: Vec<f64> = (0..cfg.n_ros)
        .map(|_| f + chip_offset + ro_dist.sample(&mut rng))
        .collect();
    // variance of a mean of n_meas_avg i.i.d. reads
    let meas_std = cfg.sigma_meas_rel * f / (cfg.n_meas_avg as f64).sqrt();
    let meas_dist = Normal::new(0.0, meas_std).expect("validated sigma");

    let chip_id = format!("b{:02}r{}", chip / 4, chip % 4);
    let region_id = (chip % 4) as u32;
    let mut samples = Vec::with_capacity(cfg.n_golden_per_chip + cfg.n_trojan_per_chip);
    let mk = |features: Vec<f64>, kind: SampleKind| {
        FrequencySample::new(chip_id.clone(), region_id, kind, features).map_err(|e| {
            Error::Data(format!(
                "generated invalid frequency on chip {chip_id}: {e}; check sigma/drop ranges"
            ))
        })
    };

    for _ in 0..cfg.n_golden_per_chip {
        let features: Vec<f64> = base.iter().map(|&b| b + meas_dist.sample(&mut rng)).collect();
        samples.push(mk(features, SampleKind::Golden)?);
    }
    for j in 0..cfg.n_trojan_per_chip {
        let drop = rng.gen_range(cfg.trojan_drop_rel_min..=cfg.trojan_drop_rel_max);
        let site = rng.gen_range(0..cfg.n_ros);
        let features: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(r, &b)| {
                let dist = (r as f64 - site as f64).abs();
                let weight = (-cfg.locality_decay * dist).exp();
                b + meas_dist.sample(&mut rng) - drop * weight * f
            })
            .collect();
        samples.push(mk(features, SampleKind::Trojan(format!("t{:02}", j + 1)))?);
    }
    Ok(samples)
}
