//! Binary segmentation metrics: OA, per-class IoU, MIoU and F1.
//!
//! Undefined metrics (zero denominators) are `None` and are left out of any
//! mean they would otherwise enter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;

/// Pixel tallies with cropland as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same tallies with cropland and non-cropland swapped.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Which F1 the report headlines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    /// F1 of the cropland class.
    #[default]
    Cropland,
    /// Mean of the cropland and non-cropland F1 scores.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tile_id: Option<String>,
    pub cm: ConfusionMatrix,
    pub oa: Option<f64>,
    pub iou_crop: Option<f64>,
    pub iou_noncrop: Option<f64>,
    pub miou: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn confusion(pred: &Mask, gt: &Mask, ignore: Option<&Mask>) -> Result<ConfusionMatrix> {
    if !pred.same_shape(gt) || ignore.is_some_and(|m| !m.same_shape(gt)) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{}, ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (p, g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if ignore.is_some_and(|m| m.data()[i] == 1) {
            continue;
        }
        match (p, g) {
            (1, 1) => cm.tp += 1,
            (1, _) => cm.fp += 1,
            (_, 1) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

pub fn compute_metrics(cm: ConfusionMatrix) -> MetricsReport {
    compute_metrics_with(cm, F1Mode::Cropland)
}

pub fn compute_metrics_with(cm: ConfusionMatrix, f1_mode: F1Mode) -> MetricsReport {
    let ConfusionMatrix { tp, fp, fn_, tn } = cm;
    let iou_crop = ratio(tp, tp + fp + fn_);
    let iou_noncrop = ratio(tn, tn + fn_ + fp);
    let f1_crop = ratio(2 * tp, 2 * tp + fp + fn_);
    let f1 = match f1_mode {
        F1Mode::Cropland => f1_crop,
        F1Mode::Macro => mean_defined([f1_crop, ratio(2 * tn, 2 * tn + fp + fn_)]),
    };
    MetricsReport {
        tile_id: None,
        cm,
        oa: ratio(tp + tn, cm.total()),
        iou_crop,
        iou_noncrop,
        miou: mean_defined([iou_crop, iou_noncrop]),
        f1,
    }
}

/// Per-tile means, informational next to the micro numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMeans {
    pub oa: Option<f64>,
    pub miou: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub tiles: usize,
    /// Metrics of the summed confusion matrix.
    pub micro: MetricsReport,
    #[serde(rename = "macro")]
    pub macro_: MacroMeans,
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Aggregate> {
    aggregate_with(reports, F1Mode::Cropland)
}

pub fn aggregate_with(reports: &[MetricsReport], f1_mode: F1Mode) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cm: ConfusionMatrix = reports.iter().map(|r| r.cm).sum();
    Ok(Aggregate {
        tiles: reports.len(),
        micro: compute_metrics_with(cm, f1_mode),
        macro_: MacroMeans {
            oa: mean_defined(reports.iter().map(|r| r.oa)),
            miou: mean_defined(reports.iter().map(|r| r.miou)),
            f1: mean_defined(reports.iter().map(|r| r.f1)),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(w: usize, h: usize, d: &[u8]) -> Mask {
        Mask::new(w, h, d.to_vec()).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let g = m(3, 2, &[1, 0, 1, 1, 0, 0]);
        let cm = confusion(&g, &g, None).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
    }

    #[test]
    fn hand_enumerated_case() {
        let gt = m(2, 2, &[1, 1, 0, 1]);
        let pred = m(2, 2, &[1, 0, 0, 1]);
        assert_eq!(confusion(&pred, &gt, None).unwrap(), ConfusionMatrix::new(2, 0, 1, 1));
    }

    #[test]
    fn full_ignore_counts_nothing() {
        let g = m(2, 1, &[1, 0]);
        let ignore = m(2, 1, &[1, 1]);
        assert_eq!(confusion(&g, &g, Some(&ignore)).unwrap().total(), 0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            confusion(&m(2, 1, &[1, 0]), &m(1, 2, &[1, 0]), None),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn metrics_of_hand_case() {
        let r = compute_metrics(ConfusionMatrix::new(2, 0, 1, 1));
        assert_eq!(r.oa, Some(0.75));
        assert!((r.iou_crop.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.iou_noncrop, Some(0.5));
        assert!((r.miou.unwrap() - 7.0 / 12.0).abs() < 1e-15);
        assert!((r.f1.unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn degenerate_all_positive() {
        let r = compute_metrics(ConfusionMatrix::new(9, 0, 0, 0));
        assert_eq!(r.oa, Some(1.0));
        assert_eq!(r.iou_crop, Some(1.0));
        assert_eq!(r.iou_noncrop, None);
        assert_eq!(r.miou, Some(1.0));
        assert_eq!(r.f1, Some(1.0));
    }

    #[test]
    fn degenerate_all_negative() {
        let r = compute_metrics(ConfusionMatrix::new(0, 0, 0, 9));
        assert_eq!(r.oa, Some(1.0));
        assert_eq!(r.f1, None);
        assert_eq!(r.miou, Some(1.0));
    }

    #[test]
    fn empty_matrix_is_all_undefined() {
        let r = compute_metrics(ConfusionMatrix::default());
        assert_eq!((r.oa, r.miou, r.f1), (None, None, None));
    }

    #[test]
    fn macro_f1_mode() {
        let r = compute_metrics_with(ConfusionMatrix::new(2, 0, 1, 1), F1Mode::Macro);
        // cropland F1 = 0.8, non-cropland F1 = 2/3
        assert!((r.f1.unwrap() - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_single_is_identity() {
        let r = compute_metrics(ConfusionMatrix::new(2, 0, 1, 1));
        assert_eq!(aggregate(std::slice::from_ref(&r)).unwrap().micro, r);
    }

    #[test]
    fn aggregate_sums_matrices() {
        let a = compute_metrics(ConfusionMatrix::new(1, 0, 0, 3));
        let b = compute_metrics(ConfusionMatrix::new(3, 0, 0, 1));
        let agg = aggregate(&[a, b]).unwrap();
        assert_eq!(agg.micro.cm, ConfusionMatrix::new(4, 0, 0, 4));
        assert_eq!(agg.micro.oa, Some(1.0));
    }

    #[test]
    fn macro_excludes_undefined_f1() {
        let a = compute_metrics(ConfusionMatrix::new(0, 0, 0, 4));
        let b = compute_metrics(ConfusionMatrix::new(2, 0, 1, 1));
        let agg = aggregate(&[a, b]).unwrap();
        assert!((agg.macro_.f1.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(agg.macro_.oa, Some((1.0 + 0.75) / 2.0));
    }

    #[test]
    fn aggregate_empty() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput)));
    }
}
