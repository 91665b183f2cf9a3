//! Standard classification and regression metrics.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::per_molecule_error;
use crate::num::{sigmoid, Scalar};
use crate::store::TaskKind;

const BCE_CLIP: f64 = 1e-7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("no inputs")]
    EmptyInput,
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("both classes must be present")]
    SingleClassInput,
    #[error("no positive labels")]
    NoPositives,
    #[error("labels must be 0 or 1")]
    NotBinary,
    #[error("zero variance")]
    ZeroVariance,
    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("non-finite input")]
    NonFinite,
}

fn check<T: Scalar>(a: &[T], b: &[T]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn check_binary<T: Scalar>(labels: &[T]) -> Result<usize, MetricError> {
    let mut positives = 0;
    for &l in labels {
        if l == T::one() {
            positives += 1;
        } else if l != T::zero() {
            return Err(MetricError::NotBinary);
        }
    }
    Ok(positives)
}

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("finite values compare")
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| cmp(&values[a], &values[b]));
    let mut ranks = vec![T::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = T::of_usize(start + 1 + end) / T::of(2.0);
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties worth one half.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[T]) -> Result<T, MetricError> {
    check(scores, labels)?;
    let positives = check_binary(labels)?;
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClassInput);
    }
    let ranks = average_ranks(scores);
    let rank_sum: T = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == T::one())
        .map(|(&r, _)| r)
        .sum();
    let p = T::of_usize(positives);
    let u = rank_sum - p * (p + T::one()) / T::of(2.0);
    Ok(u / (p * T::of_usize(negatives)))
}

/// Mean precision at the rank of each positive. Equal scores keep input order.
pub fn average_precision<T: Scalar>(scores: &[T], labels: &[T]) -> Result<T, MetricError> {
    check(scores, labels)?;
    let positives = check_binary(labels)?;
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(&scores[b], &scores[a]));
    let mut hits = 0usize;
    let mut total = T::zero();
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == T::one() {
            hits += 1;
            total = total + T::of_usize(hits) / T::of_usize(k + 1);
        }
    }
    Ok(total / T::of_usize(positives))
}

/// Mean binary cross-entropy of `σ(score)`, clipped to `[1e-7, 1 − 1e-7]`.
pub fn bce_loss<T: Scalar>(scores: &[T], labels: &[T]) -> Result<T, MetricError> {
    check(scores, labels)?;
    check_binary(labels)?;
    let lo = T::of(BCE_CLIP);
    let hi = T::one() - lo;
    let total: T = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let p = sigmoid(s).max(lo).min(hi);
            -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
        })
        .sum();
    Ok(total / T::of_usize(scores.len()))
}

pub fn mse<T: Scalar>(preds: &[T], labels: &[T]) -> Result<T, MetricError> {
    check(preds, labels)?;
    let total: T = preds
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - y) * (p - y))
        .sum();
    Ok(total / T::of_usize(preds.len()))
}

pub fn mae<T: Scalar>(preds: &[T], labels: &[T]) -> Result<T, MetricError> {
    check(preds, labels)?;
    let total: T = preds.iter().zip(labels).map(|(&p, &y)| (p - y).abs()).sum();
    Ok(total / T::of_usize(preds.len()))
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::of_usize(v.len())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2<T: Scalar>(preds: &[T], labels: &[T]) -> Result<T, MetricError> {
    check(preds, labels)?;
    let m = mean(labels);
    let ss_tot: T = labels.iter().map(|&y| (y - m) * (y - m)).sum();
    if ss_tot == T::zero() {
        return Err(MetricError::ZeroVariance);
    }
    let ss_res: T = preds
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - y) * (p - y))
        .sum();
    Ok(T::one() - ss_res / ss_tot)
}

pub fn pearson_r<T: Scalar>(x: &[T], y: &[T]) -> Result<T, MetricError> {
    check(x, y)?;
    if x.len() < 2 {
        return Err(MetricError::TooFewPoints {
            needed: 2,
            found: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}

/// Pearson correlation of average ranks.
pub fn spearman_r<T: Scalar>(x: &[T], y: &[T]) -> Result<T, MetricError> {
    check(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

/// Mean battle error over the inputs.
pub fn avg_error<T: Scalar>(task: TaskKind, scores: &[T], labels: &[T]) -> Result<T, MetricError> {
    check(scores, labels)?;
    let total: T = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| per_molecule_error(task, s, y))
        .sum();
    Ok(total / T::of_usize(scores.len()))
}

pub const CLASSIFICATION_METRICS: [&str; 4] =
    ["roc_auc", "average_precision", "bce_loss", "avg_error"];
pub const REGRESSION_METRICS: [&str; 6] =
    ["mse", "mae", "r2", "pearson_r", "spearman_r", "avg_error"];

/// Every metric of the task's suite that is defined on these inputs, plus
/// the names of the ones that were not (with the reason).
pub fn metric_suite<T: Scalar>(
    task: TaskKind,
    scores: &[T],
    labels: &[T],
) -> (BTreeMap<&'static str, T>, Vec<(&'static str, MetricError)>) {
    let mut ok = BTreeMap::new();
    let mut skipped = Vec::new();
    let names: &[&'static str] = match task {
        TaskKind::BinaryClassification => &CLASSIFICATION_METRICS,
        TaskKind::Regression => &REGRESSION_METRICS,
    };
    for &name in names {
        let value = match name {
            "roc_auc" => roc_auc(scores, labels),
            "average_precision" => average_precision(scores, labels),
            "bce_loss" => bce_loss(scores, labels),
            "mse" => mse(scores, labels),
            "mae" => mae(scores, labels),
            "r2" => r2(scores, labels),
            "pearson_r" => pearson_r(scores, labels),
            "spearman_r" => spearman_r(scores, labels),
            "avg_error" => avg_error(task, scores, labels),
            _ => unreachable!("metric names are fixed"),
        };
        match value {
            Ok(v) => {
                ok.insert(name, v);
            }
            Err(e) => skipped.push((name, e)),
        }
    }
    (ok, skipped)
}

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub fold: usize,
    pub captioner: String,
    pub metric: String,
    pub value: f64,
}

/// Metric values per (dataset, fold, captioner).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
}

impl MetricReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["dataset", "fold", "captioner", "metric", "value"])?;
        for r in &self.records {
            w.write_record([
                r.dataset.as_str(),
                &r.fold.to_string(),
                &r.captioner,
                &r.metric,
                &format!("{:.12}", r.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(input);
        let records = r.deserialize().collect::<Result<Vec<MetricRecord>, _>>()?;
        Ok(MetricReport { records })
    }

    /// Mean over folds of each (captioner, dataset, metric).
    pub fn fold_means(&self) -> BTreeMap<(String, String, String), f64> {
        let mut acc: BTreeMap<(String, String, String), (f64, usize)> = BTreeMap::new();
        for r in &self.records {
            let e = acc
                .entry((r.captioner.clone(), r.dataset.clone(), r.metric.clone()))
                .or_default();
            e.0 += r.value;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn auc_examples() {
        let labels = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.3, 0.4], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4, 0.3, 0.2, 0.1], &labels).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &labels).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.5, 0.5, 0.5, 0.5], &labels).unwrap(), 0.5);
        assert_eq!(
            roc_auc(&[0.1, 0.2], &[1.0, 1.0]),
            Err(MetricError::SingleClassInput)
        );
    }

    #[test]
    fn ap_examples() {
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.1], &[1.0, 1.0, 0.0]).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(
            average_precision(&[0.9, 0.8, 0.1], &[1.0, 0.0, 1.0]).unwrap(),
            5.0 / 6.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            average_precision(&[0.9, 0.8, 0.7, 0.1], &[0.0, 0.0, 0.0, 1.0]).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        // equal scores keep input order
        assert_eq!(average_precision(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(
            average_precision(&[0.5], &[0.0]),
            Err(MetricError::NoPositives)
        );
    }

    #[test]
    fn bce_examples() {
        assert_abs_diff_eq!(
            bce_loss(&[0.0, 0.0, 0.0], &[1.0, 0.0, 1.0]).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        let clipped: f64 = bce_loss(&[1e6], &[1.0]).unwrap();
        assert!(clipped.is_finite());
        assert_abs_diff_eq!(clipped, -(1.0f64 - 1e-7).ln(), epsilon = 1e-15);
        let worst = bce_loss(&[1e6], &[0.0]).unwrap();
        assert_abs_diff_eq!(worst, -(1e-7f64).ln(), epsilon = 1e-6);
    }

    #[test]
    fn regression_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(mse::<f64>(&[], &[]), Err(MetricError::EmptyInput));
        let labels = [1.0, 2.0, 3.0, 6.0];
        assert_eq!(r2(&labels, &labels).unwrap(), 1.0);
        assert_eq!(r2(&[3.0; 4], &labels).unwrap(), 0.0);
        let worse = r2(&[6.0, 3.0, 2.0, 1.0], &labels).unwrap();
        // SS_res = 25 + 1 + 1 + 25, SS_tot = 4 + 1 + 0 + 9
        assert_abs_diff_eq!(worse, 1.0 - 52.0 / 14.0, epsilon = 1e-15);
        assert_eq!(r2(&[1.0, 2.0], &[3.0, 3.0]), Err(MetricError::ZeroVariance));
    }

    #[test]
    fn correlation_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson_r(&x, &y).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spearman_r(&x, &y).unwrap(), 1.0, epsilon = 1e-15);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_abs_diff_eq!(spearman_r(&x, &rev).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(pearson_r(&x, &[1.0; 5]), Err(MetricError::ZeroVariance));
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn avg_error_examples() {
        assert_eq!(
            avg_error(TaskKind::BinaryClassification, &[0.0; 3], &[1.0, 0.0, 1.0]).unwrap(),
            0.5
        );
        assert_eq!(
            avg_error(TaskKind::Regression, &[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn suite_skips_undefined_metrics() {
        let (ok, skipped) = metric_suite(TaskKind::BinaryClassification, &[0.1, 0.2], &[0.0, 0.0]);
        assert!(ok.contains_key("bce_loss"));
        assert!(skipped.iter().any(|(n, _)| *n == "roc_auc"));
        assert!(skipped.iter().any(|(n, _)| *n == "average_precision"));
        let (ok, _) = metric_suite(TaskKind::Regression, &[0.1, 0.2, 0.4], &[0.0, 1.0, 2.0]);
        assert_eq!(ok.len(), 6);
    }

    #[test]
    fn csv_roundtrip() {
        let report = MetricReport {
            records: vec![MetricRecord {
                dataset: "bbbp".into(),
                fold: 1,
                captioner: "A".into(),
                metric: "roc_auc".into(),
                value: 0.75,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "dataset,fold,captioner,metric,value\nbbbp,1,A,roc_auc,0.750000000000\n"
        );
        assert_eq!(MetricReport::read_csv(&buf[..]).unwrap(), report);
    }
}
