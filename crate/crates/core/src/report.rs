//! Leaderboards, grouped leaderboards and correlation tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::str::FromStr;

use thiserror::Error;

use crate::arena::{bootstrap_ratings, ArenaError, BattleSet, BootstrapParams, RatingTable};
use crate::metrics::{pearson_r, spearman_r, MetricReport};
use crate::store::{CaptionerMeta, DatasetManifest, Representation};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown group key {0:?} (expected model_family, prompt_variant, representation or size_label)")]
    UnknownGroupKey(String),
    #[error("captioner {captioner:?} has no {key} value")]
    MissingGroupValue { captioner: String, key: GroupKey },
    #[error("unknown correlation mode {0:?} (expected rating_vs_metrics or split_a_vs_split_b)")]
    UnknownMode(String),
    #[error("{left} vs {right}: need at least 3 shared captioners, found {n}")]
    TooFewPoints {
        left: String,
        right: String,
        n: usize,
    },
    #[error("dataset groups overlap on {0:?}")]
    OverlappingGroups(String),
    #[error("nothing to correlate")]
    NothingToCompare,
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Captioner metadata field used to pool captioners into groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    ModelFamily,
    PromptVariant,
    Representation,
    SizeLabel,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::ModelFamily => "model_family",
            GroupKey::PromptVariant => "prompt_variant",
            GroupKey::Representation => "representation",
            GroupKey::SizeLabel => "size_label",
        }
    }

    /// The group of `meta`, or `None` when the field is empty.
    pub fn value(self, meta: &CaptionerMeta) -> Option<String> {
        let v = match self {
            GroupKey::ModelFamily => meta.model_family.clone(),
            GroupKey::PromptVariant => meta.prompt_variant.clone(),
            GroupKey::Representation => match meta.representation {
                Representation::Smiles => "smiles".to_string(),
                Representation::Fragments => "fragments".to_string(),
                Representation::None => "none".to_string(),
            },
            GroupKey::SizeLabel => meta.size_label.clone().unwrap_or_default(),
        };
        (!v.is_empty()).then_some(v)
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupKey {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model_family" => Ok(GroupKey::ModelFamily),
            "prompt_variant" => Ok(GroupKey::PromptVariant),
            "representation" => Ok(GroupKey::Representation),
            "size_label" => Ok(GroupKey::SizeLabel),
            other => Err(ReportError::UnknownGroupKey(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderRow {
    pub name: String,
    pub rating: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Captioners pooled into this row (grouped boards only).
    pub members: Vec<String>,
    pub metrics: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaderboard {
    pub grouped: bool,
    /// `(dataset, metric)` for every metric column.
    pub metric_columns: Vec<(String, String)>,
    pub rows: Vec<LeaderRow>,
}

impl Leaderboard {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), ReportError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header: Vec<String> = vec![
            if self.grouped { "group" } else { "captioner" }.into(),
            "rating".into(),
            "ci_low".into(),
            "ci_high".into(),
        ];
        if self.grouped {
            header.push("members".into());
        }
        header.extend(self.metric_columns.iter().map(|(d, m)| format!("{d}/{m}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.name.clone(),
                format!("{:.6}", r.rating),
                format!("{:.6}", r.ci_low),
                format!("{:.6}", r.ci_high),
            ];
            if self.grouped {
                rec.push(r.members.join(";"));
            }
            rec.extend(
                r.metrics
                    .iter()
                    .map(|v| v.map(|v| format!("{v:.6}")).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Captioners by rating (descending) with their fold-mean metrics per dataset.
pub fn leaderboard(ratings: &RatingTable<f64>, metrics: &MetricReport) -> Leaderboard {
    let means = metrics.fold_means();
    let columns: BTreeSet<(String, String)> = means
        .keys()
        .map(|(_, d, m)| (d.clone(), m.clone()))
        .collect();
    let metric_columns: Vec<(String, String)> = columns.into_iter().collect();
    let rows = ratings
        .sorted()
        .into_iter()
        .map(|e| LeaderRow {
            name: e.captioner.clone(),
            rating: e.rating,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            members: vec![e.captioner.clone()],
            metrics: metric_columns
                .iter()
                .map(|(d, m)| {
                    means
                        .get(&(e.captioner.clone(), d.clone(), m.clone()))
                        .copied()
                })
                .collect(),
        })
        .collect();
    Leaderboard {
        grouped: false,
        metric_columns,
        rows,
    }
}

/// Relabel every battle participant by its group, drop within-group battles
/// and refit with bootstrap CIs.
pub fn grouped_leaderboard(
    battles: &BattleSet,
    manifests: &[DatasetManifest],
    key: GroupKey,
    params: &BootstrapParams,
) -> Result<Leaderboard, ReportError> {
    let mut group_of: BTreeMap<String, String> = BTreeMap::new();
    for name in battles.roster() {
        let meta = manifests
            .iter()
            .find_map(|m| m.captioner(name))
            .ok_or_else(|| ArenaError::UnknownCaptioner(name.clone()))?;
        let group = key
            .value(meta)
            .ok_or_else(|| ReportError::MissingGroupValue {
                captioner: name.clone(),
                key,
            })?;
        group_of.insert(name.clone(), group);
    }
    let relabeled = battles.relabel(|name| group_of.get(name).cloned())?;
    let table = bootstrap_ratings::<f64>(&relabeled, params)?;
    let rows = table
        .sorted()
        .into_iter()
        .map(|e| LeaderRow {
            name: e.captioner.clone(),
            rating: e.rating,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            members: group_of
                .iter()
                .filter(|(_, g)| **g == e.captioner)
                .map(|(c, _)| c.clone())
                .collect(),
            metrics: Vec::new(),
        })
        .collect();
    Ok(Leaderboard {
        grouped: true,
        metric_columns: Vec::new(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMode {
    RatingVsMetrics,
    SplitAVsSplitB,
}

impl FromStr for CorrelationMode {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rating_vs_metrics" => Ok(CorrelationMode::RatingVsMetrics),
            "split_a_vs_split_b" => Ok(CorrelationMode::SplitAVsSplitB),
            other => Err(ReportError::UnknownMode(other.to_string())),
        }
    }
}

/// `None` where a coefficient is undefined (a constant column).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub left: String,
    pub right: String,
    pub n: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Correlate two per-captioner columns over the captioners they share.
pub fn correlate_columns(
    left_name: &str,
    left: &BTreeMap<String, f64>,
    right_name: &str,
    right: &BTreeMap<String, f64>,
) -> Result<CorrelationRow, ReportError> {
    let (x, y): (Vec<f64>, Vec<f64>) = left
        .iter()
        .filter_map(|(c, &l)| right.get(c).map(|&r| (l, r)))
        .unzip();
    if x.len() < 3 {
        return Err(ReportError::TooFewPoints {
            left: left_name.to_string(),
            right: right_name.to_string(),
            n: x.len(),
        });
    }
    Ok(CorrelationRow {
        left: left_name.to_string(),
        right: right_name.to_string(),
        n: x.len(),
        pearson: pearson_r(&x, &y).ok(),
        spearman: spearman_r(&x, &y).ok(),
    })
}

fn rating_column(ratings: &RatingTable<f64>) -> BTreeMap<String, f64> {
    ratings
        .entries
        .iter()
        .map(|e| (e.captioner.clone(), e.rating))
        .collect()
}

/// Rating against every `(dataset, metric)` fold-mean column.
pub fn rating_vs_metrics(
    ratings: &RatingTable<f64>,
    metrics: &MetricReport,
) -> Result<Vec<CorrelationRow>, ReportError> {
    let rating = rating_column(ratings);
    let mut columns: BTreeMap<(String, String), BTreeMap<String, f64>> = BTreeMap::new();
    for ((c, d, m), v) in metrics.fold_means() {
        columns.entry((d, m)).or_default().insert(c, v);
    }
    if columns.is_empty() {
        return Err(ReportError::NothingToCompare);
    }
    columns
        .iter()
        .map(|((d, m), col)| correlate_columns("rating", &rating, &format!("{d}/{m}"), col))
        .collect()
}

/// Mean over `datasets` of each captioner's fold-mean `metric`; captioners
/// missing from any of the datasets are left out.
fn group_metric(
    means: &BTreeMap<(String, String, String), f64>,
    datasets: &[String],
    metric: &str,
) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((c, d, m), v) in means {
        if m == metric && datasets.contains(d) {
            let e = acc.entry(c.clone()).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .filter(|(_, (_, n))| *n == datasets.len())
        .map(|(c, (s, n))| (c, s / n as f64))
        .collect()
}

/// Two disjoint sides compared captioner by captioner: two rating tables
/// (for example from classification vs regression battles, or two folds),
/// and/or every metric shared by two disjoint dataset groups.
pub fn split_a_vs_split_b(
    ratings: Option<(&RatingTable<f64>, &RatingTable<f64>)>,
    metrics: Option<(&MetricReport, &[String], &[String])>,
) -> Result<Vec<CorrelationRow>, ReportError> {
    let mut rows = Vec::new();
    if let Some((a, b)) = ratings {
        rows.push(correlate_columns(
            "a/rating",
            &rating_column(a),
            "b/rating",
            &rating_column(b),
        )?);
    }
    if let Some((report, group_a, group_b)) = metrics {
        if let Some(d) = group_a.iter().find(|d| group_b.contains(d)) {
            return Err(ReportError::OverlappingGroups(d.clone()));
        }
        let names_in = |group: &[String]| -> BTreeSet<String> {
            report
                .records
                .iter()
                .filter(|r| group.contains(&r.dataset))
                .map(|r| r.metric.clone())
                .collect()
        };
        let means = report.fold_means();
        for metric in names_in(group_a).intersection(&names_in(group_b)) {
            rows.push(correlate_columns(
                &format!("a/{metric}"),
                &group_metric(&means, group_a, metric),
                &format!("b/{metric}"),
                &group_metric(&means, group_b, metric),
            )?);
        }
    }
    if rows.is_empty() {
        return Err(ReportError::NothingToCompare);
    }
    Ok(rows)
}

pub fn write_correlations<W: io::Write>(
    rows: &[CorrelationRow],
    out: W,
) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["left", "right", "n", "pearson", "spearman"])?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.12}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.left.clone(),
            r.right.clone(),
            r.n.to_string(),
            fmt(r.pearson),
            fmt(r.spearman),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
