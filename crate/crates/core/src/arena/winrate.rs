//! Pairwise win-rate matrices.

use std::collections::BTreeMap;
use std::io;

use super::{roster_index, ArenaError, BattleSet, Outcome};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Dataset(String),
    Aggregate,
}

impl Scope {
    pub fn parse(s: &str) -> Self {
        if s == "aggregate" {
            Scope::Aggregate
        } else {
            Scope::Dataset(s.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Scope::Dataset(d) => d,
            Scope::Aggregate => "aggregate",
        }
    }
}

/// `cell(i, j)` = share of battles between `i` and `j` won by `i` (ties half).
/// Pairs that never met have no value.
#[derive(Debug, Clone, PartialEq)]
pub struct WinRateMatrix {
    pub names: Vec<String>,
    cells: Vec<Option<f64>>,
}

impl WinRateMatrix {
    pub fn cell(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i * self.names.len() + j]
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        self.cell(i, j)
    }

    /// Lowest win rate of `name` against any opponent it met.
    pub fn row_min(&self, name: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == name)?;
        (0..self.names.len())
            .filter_map(|j| self.cell(i, j))
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Names in the first row and column; cells with six decimals; absent pairs empty.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), ArenaError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, name) in self.names.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend((0..self.names.len()).map(|j| {
                self.cell(i, j)
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_default()
            }));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn dataset_rates(battles: &BattleSet, dataset: &str) -> Vec<Option<f64>> {
    let n = battles.roster().len();
    let index = roster_index(battles.roster());
    let mut wins = vec![0.0; n * n];
    let mut games = vec![0usize; n * n];
    for b in battles.battles().iter().filter(|b| b.dataset == dataset) {
        let (i, j) = (index[b.a.as_str()], index[b.b.as_str()]);
        games[i * n + j] += 1;
        games[j * n + i] += 1;
        let (wi, wj) = match b.outcome {
            Outcome::A => (1.0, 0.0),
            Outcome::B => (0.0, 1.0),
            Outcome::Tie => (0.5, 0.5),
        };
        wins[i * n + j] += wi;
        wins[j * n + i] += wj;
    }
    wins.iter()
        .zip(&games)
        .map(|(&w, &g)| (g > 0).then(|| w / g as f64))
        .collect()
}

/// Win rates for one dataset, or the unweighted mean of per-dataset win
/// rates over the datasets where each pair met.
pub fn win_rate_matrix(battles: &BattleSet, scope: &Scope) -> Result<WinRateMatrix, ArenaError> {
    let datasets = battles.datasets();
    let selected: Vec<&str> = match scope {
        Scope::Dataset(d) => datasets.into_iter().filter(|x| x == d).collect(),
        Scope::Aggregate => datasets,
    };
    if selected.is_empty() {
        return Err(ArenaError::EmptyScope(scope.label().to_string()));
    }
    let n = battles.roster().len();
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for d in selected {
        for (k, rate) in dataset_rates(battles, d).into_iter().enumerate() {
            if let Some(r) = rate {
                let e = sums.entry(k).or_default();
                e.0 += r;
                e.1 += 1;
            }
        }
    }
    let mut cells = vec![None; n * n];
    for (k, (s, c)) in sums {
        cells[k] = Some(s / c as f64);
    }
    Ok(WinRateMatrix {
        names: battles.roster().to_vec(),
        cells,
    })
}
