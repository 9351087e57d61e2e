//! Shared helpers for unit tests: datasets built directly from labeled
//! points in feature space (bypassing the raw-frequency positivity rule,
//! which applies to measurements, not standardized values).

use crate::dataset::{FrequencySample, Label, LabeledDataset, SampleKind};

/// One chip per point.
pub(crate) fn point_dataset(points: &[(Vec<f64>, Label)]) -> LabeledDataset {
    point_dataset_chipped(points, 1)
}

/// Dataset from labeled points, grouping consecutive points into chips of
/// `per_chip` samples.
pub(crate) fn point_dataset_chipped(
    points: &[(Vec<f64>, Label)],
    per_chip: usize,
) -> LabeledDataset {
    let samples = points
        .iter()
        .enumerate()
        .map(|(i, (p, l))| {
            let kind = match l {
                Label::Golden => SampleKind::Golden,
                Label::Trojan => SampleKind::Trojan("t".into()),
            };
            let chip = format!("c{:03}", i / per_chip);
            FrequencySample::new(chip, 0, kind, vec![1.0; p.len()])
                .unwrap()
                .with_features_unchecked(p.clone())
        })
        .collect();
    LabeledDataset::new(samples).unwrap()
}
