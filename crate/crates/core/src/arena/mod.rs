//! Battles between captioners and the ratings derived from them.

mod battle;
mod bootstrap;
mod bradley_terry;
mod winrate;

use std::collections::HashMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::FusionError;
use crate::num::Scalar;

pub use battle::{generate_battles, BattleRecord, BattleSet, Outcome, TIE_TOLERANCE};
pub use bootstrap::{bootstrap_ratings, bootstrap_round, percentile, BootstrapParams, Sampling};
pub use bradley_terry::{
    elo_scale, fit_bradley_terry, fit_bradley_terry_traced, fit_counts, log_likelihood, BtFit,
    PairCounts, SMOOTHING, THETA_TOLERANCE,
};
pub use winrate::{win_rate_matrix, Scope, WinRateMatrix};

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("captioner {0} cannot battle itself")]
    SelfBattle(String),
    #[error("duplicate captioner in roster")]
    DuplicateCaptioner,
    #[error("need at least two captioners, found {0}")]
    TooFewCaptioners(usize),
    #[error("battle between {0} and {1} is not in name order")]
    Unordered(String, String),
    #[error("unknown captioner {0}")]
    UnknownCaptioner(String),
    #[error("no cross-group battles")]
    NoCrossGroupBattles,
    #[error("no battles to fit")]
    NoBattles,
    #[error("captioner {0} has no battles")]
    NoBattlesFor(String),
    #[error("bootstrap needs at least one round and one battle per round")]
    BadBootstrap,
    #[error("no battles in scope {0}")]
    EmptyScope(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn roster_index(roster: &[String]) -> HashMap<&str, usize> {
    roster
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEntry<T> {
    pub captioner: String,
    pub rating: T,
    pub ci_low: T,
    pub ci_high: T,
    pub theta: T,
}

/// Ratings in roster order.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable<T> {
    pub entries: Vec<RatingEntry<T>>,
}

impl<T: Scalar> RatingTable<T> {
    pub fn get(&self, captioner: &str) -> Option<&RatingEntry<T>> {
        self.entries.iter().find(|e| e.captioner == captioner)
    }

    /// Rating descending, then name.
    pub fn sorted(&self) -> Vec<&RatingEntry<T>> {
        let mut v: Vec<&RatingEntry<T>> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            b.rating
                .partial_cmp(&a.rating)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.captioner.cmp(&b.captioner))
        });
        v
    }

    pub fn top(&self) -> Option<&str> {
        self.sorted().first().map(|e| e.captioner.as_str())
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), ArenaError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["captioner", "rating", "ci_low", "ci_high", "theta"])?;
        for e in self.sorted() {
            w.write_record([
                e.captioner.clone(),
                format!("{:.6}", e.rating),
                format!("{:.6}", e.ci_low),
                format!("{:.6}", e.ci_high),
                format!("{:.9}", e.theta),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

impl RatingTable<f64> {
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, ArenaError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers
            .iter()
            .ne(["captioner", "rating", "ci_low", "ci_high", "theta"])
        {
            return Err(ArenaError::Parse {
                line: 1,
                message: "expected header captioner,rating,ci_low,ci_high,theta".into(),
            });
        }
        let mut entries = Vec::new();
        for (k, rec) in r.deserialize::<RatingEntry<f64>>().enumerate() {
            entries.push(rec.map_err(|e| ArenaError::Parse {
                line: k + 2,
                message: e.to_string(),
            })?);
        }
        Ok(RatingTable { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_csv_round_trip() {
        let table = RatingTable {
            entries: vec![
                RatingEntry {
                    captioner: "b".into(),
                    rating: 990.0,
                    ci_low: 980.0,
                    ci_high: 1000.0,
                    theta: -0.01,
                },
                RatingEntry {
                    captioner: "a".into(),
                    rating: 1010.0,
                    ci_low: 1001.5,
                    ci_high: 1020.25,
                    theta: 0.01,
                },
            ],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "captioner,rating,ci_low,ci_high,theta\n\
             a,1010.000000,1001.500000,1020.250000,0.010000000\n\
             b,990.000000,980.000000,1000.000000,-0.010000000\n"
        );
        let back = RatingTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.get("b"), table.get("b"));
        assert_eq!(back.top(), Some("a"));
    }
}
