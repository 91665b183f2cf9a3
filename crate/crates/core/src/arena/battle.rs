//! Battle records, their CSV form, and battle generation from pair models.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ArenaError;
use crate::chem::SplitAssignment;
use crate::fusion::{head_to_head, SvmParams};
use crate::num::Scalar;
use crate::store::ArenaInputs;

/// Errors closer than this are a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    A,
    B,
    #[serde(rename = "tie")]
    Tie,
}

impl Outcome {
    pub fn flipped(self) -> Self {
        match self {
            Outcome::A => Outcome::B,
            Outcome::B => Outcome::A,
            Outcome::Tie => Outcome::Tie,
        }
    }

    /// Battle outcome from the two captioners' errors (lower wins).
    pub fn from_errors<T: Scalar>(error_a: T, error_b: T) -> Self {
        let tau = T::of(TIE_TOLERANCE);
        if error_a < error_b - tau {
            Outcome::A
        } else if error_b < error_a - tau {
            Outcome::B
        } else {
            Outcome::Tie
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::A => "A",
            Outcome::B => "B",
            Outcome::Tie => "tie",
        })
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Outcome::A),
            "B" => Ok(Outcome::B),
            "tie" => Ok(Outcome::Tie),
            other => Err(format!("unknown outcome {other:?}")),
        }
    }
}

/// One comparison of two captioners on one molecule. `a < b` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BattleRecord {
    pub dataset: String,
    pub fold: usize,
    pub molecule_id: String,
    #[serde(rename = "captioner_a")]
    pub a: String,
    #[serde(rename = "captioner_b")]
    pub b: String,
    pub outcome: Outcome,
}

impl BattleRecord {
    /// Build a record, swapping the sides (and the outcome) so that `a < b`.
    pub fn new(
        dataset: impl Into<String>,
        fold: usize,
        molecule_id: impl Into<String>,
        first: &str,
        second: &str,
        outcome: Outcome,
    ) -> Result<Self, ArenaError> {
        if first == second {
            return Err(ArenaError::SelfBattle(first.to_string()));
        }
        let (a, b, outcome) = if first < second {
            (first, second, outcome)
        } else {
            (second, first, outcome.flipped())
        };
        Ok(BattleRecord {
            dataset: dataset.into(),
            fold,
            molecule_id: molecule_id.into(),
            a: a.to_string(),
            b: b.to_string(),
            outcome,
        })
    }

    pub fn winner(&self) -> Option<&str> {
        match self.outcome {
            Outcome::A => Some(&self.a),
            Outcome::B => Some(&self.b),
            Outcome::Tie => None,
        }
    }
}

/// Battles plus the full captioner roster.
#[derive(Debug, Clone, PartialEq)]
pub struct BattleSet {
    battles: Vec<BattleRecord>,
    roster: Vec<String>,
}

impl BattleSet {
    pub fn new(battles: Vec<BattleRecord>, roster: Vec<String>) -> Result<Self, ArenaError> {
        let unique: BTreeSet<&str> = roster.iter().map(String::as_str).collect();
        if unique.len() != roster.len() {
            return Err(ArenaError::DuplicateCaptioner);
        }
        if roster.len() < 2 {
            return Err(ArenaError::TooFewCaptioners(roster.len()));
        }
        for b in &battles {
            if b.a >= b.b {
                return Err(if b.a == b.b {
                    ArenaError::SelfBattle(b.a.clone())
                } else {
                    ArenaError::Unordered(b.a.clone(), b.b.clone())
                });
            }
            for name in [&b.a, &b.b] {
                if !unique.contains(name.as_str()) {
                    return Err(ArenaError::UnknownCaptioner(name.clone()));
                }
            }
        }
        Ok(BattleSet { battles, roster })
    }

    /// Roster taken from the names that appear in `battles`, sorted.
    pub fn from_battles(battles: Vec<BattleRecord>) -> Result<Self, ArenaError> {
        let roster: BTreeSet<String> = battles
            .iter()
            .flat_map(|b| [b.a.clone(), b.b.clone()])
            .collect();
        BattleSet::new(battles, roster.into_iter().collect())
    }

    pub fn battles(&self) -> &[BattleRecord] {
        &self.battles
    }

    pub fn roster(&self) -> &[String] {
        &self.roster
    }

    pub fn is_empty(&self) -> bool {
        self.battles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.battles.len()
    }

    /// Distinct datasets in first-appearance order.
    pub fn datasets(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.battles
            .iter()
            .filter(|b| seen.insert(b.dataset.as_str()))
            .map(|b| b.dataset.as_str())
            .collect()
    }

    pub fn filter(&self, keep: impl Fn(&BattleRecord) -> bool) -> Result<BattleSet, ArenaError> {
        BattleSet::new(
            self.battles.iter().filter(|b| keep(b)).cloned().collect(),
            self.roster.clone(),
        )
    }

    /// Concatenate battle sets; rosters are merged and sorted.
    pub fn merge(sets: impl IntoIterator<Item = BattleSet>) -> Result<BattleSet, ArenaError> {
        let mut battles = Vec::new();
        let mut roster = BTreeSet::new();
        for s in sets {
            roster.extend(s.roster);
            battles.extend(s.battles);
        }
        BattleSet::new(battles, roster.into_iter().collect())
    }

    /// Relabel every captioner through `group_of`, dropping battles inside a group.
    pub fn relabel(
        &self,
        group_of: impl Fn(&str) -> Option<String>,
    ) -> Result<BattleSet, ArenaError> {
        let mut out = Vec::new();
        for b in &self.battles {
            let ga = group_of(&b.a).ok_or_else(|| ArenaError::UnknownCaptioner(b.a.clone()))?;
            let gb = group_of(&b.b).ok_or_else(|| ArenaError::UnknownCaptioner(b.b.clone()))?;
            if ga != gb {
                out.push(BattleRecord::new(
                    &b.dataset,
                    b.fold,
                    &b.molecule_id,
                    &ga,
                    &gb,
                    b.outcome,
                )?);
            }
        }
        if out.is_empty() {
            return Err(ArenaError::NoCrossGroupBattles);
        }
        let mut groups = BTreeSet::new();
        for name in &self.roster {
            groups
                .insert(group_of(name).ok_or_else(|| ArenaError::UnknownCaptioner(name.clone()))?);
        }
        BattleSet::new(out, groups.into_iter().collect())
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), ArenaError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for b in &self.battles {
            w.serialize(b)?;
        }
        if self.battles.is_empty() {
            w.write_record([
                "dataset",
                "fold",
                "molecule_id",
                "captioner_a",
                "captioner_b",
                "outcome",
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Parse a battles CSV; the roster is every name that appears.
    pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<BattleRecord>, ArenaError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let expected = [
            "dataset",
            "fold",
            "molecule_id",
            "captioner_a",
            "captioner_b",
            "outcome",
        ];
        if headers.iter().ne(expected) {
            return Err(ArenaError::Parse {
                line: 1,
                message: format!("expected header {}", expected.join(",")),
            });
        }
        let mut out = Vec::new();
        for (k, rec) in r.deserialize::<BattleRecord>().enumerate() {
            let rec = rec.map_err(|e| ArenaError::Parse {
                line: k + 2,
                message: e.to_string(),
            })?;
            if rec.a >= rec.b {
                return Err(ArenaError::Parse {
                    line: k + 2,
                    message: "captioner_a must sort before captioner_b".into(),
                });
            }
            out.push(rec);
        }
        Ok(out)
    }
}

/// Run every pair model on every fold and turn the per-molecule errors into
/// battles. Pairs run in parallel; the output order is fold, pair, molecule.
pub fn generate_battles<T: Scalar>(
    inputs: &ArenaInputs,
    splits: &[SplitAssignment],
    hp: SvmParams<T>,
    seed: u64,
) -> Result<BattleSet, ArenaError> {
    let mut names: Vec<&str> = inputs.captioners();
    if names.len() < 2 {
        return Err(ArenaError::TooFewCaptioners(names.len()));
    }
    names.sort_unstable();
    let mut jobs = Vec::new();
    for split in splits {
        for (k, &a) in names.iter().enumerate() {
            for &b in &names[k + 1..] {
                jobs.push((split, a, b));
            }
        }
    }
    let dataset = &inputs.manifest().dataset;
    let per_job: Vec<Vec<BattleRecord>> = jobs
        .par_iter()
        .map(|&(split, a, b)| {
            let table = head_to_head((a, b), inputs, split, hp, seed)?;
            table
                .rows
                .iter()
                .map(|r| {
                    BattleRecord::new(
                        dataset.as_str(),
                        split.fold,
                        &r.molecule_id,
                        a,
                        b,
                        Outcome::from_errors(r.error_i, r.error_j),
                    )
                })
                .collect()
        })
        .collect::<Result<_, ArenaError>>()?;
    BattleSet::new(
        per_job.into_iter().flatten().collect(),
        names.iter().map(|s| s.to_string()).collect(),
    )
}
