//! Bootstrap confidence intervals for ratings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bradley_terry::{elo_scale, fit_bradley_terry, fit_counts, PairCounts};
use super::{roster_index, ArenaError, BattleSet, RatingTable};
use crate::num::Scalar;

/// How a bootstrap round draws its battles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Uniform dataset first, then a uniform battle within it.
    #[default]
    Stratified,
    /// Uniform over all battles.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub rounds: usize,
    pub per_round: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            rounds: 10,
            per_round: 250_000,
            seed: 0,
            sampling: Sampling::Stratified,
        }
    }
}

impl BootstrapParams {
    pub fn validate(&self) -> Result<(), ArenaError> {
        if self.rounds == 0 || self.per_round == 0 {
            return Err(ArenaError::BadBootstrap);
        }
        Ok(())
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Ratings of one bootstrap round (`None` for captioners absent from the sample).
pub fn bootstrap_round<T: Scalar>(
    battles: &BattleSet,
    params: &BootstrapParams,
    round: usize,
) -> Vec<Option<T>> {
    let index = roster_index(battles.roster());
    let encoded: Vec<(usize, usize, super::Outcome)> = battles
        .battles()
        .iter()
        .map(|b| (index[b.a.as_str()], index[b.b.as_str()], b.outcome))
        .collect();
    let strata = strata(battles);
    sample_round(&encoded, &strata, battles.roster().len(), params, round)
}

fn strata(battles: &BattleSet) -> Vec<Vec<usize>> {
    let datasets = battles.datasets();
    let mut out = vec![Vec::new(); datasets.len()];
    for (k, b) in battles.battles().iter().enumerate() {
        let d = datasets
            .iter()
            .position(|&d| d == b.dataset)
            .expect("dataset listed");
        out[d].push(k);
    }
    out
}

fn sample_round<T: Scalar>(
    encoded: &[(usize, usize, super::Outcome)],
    strata: &[Vec<usize>],
    n: usize,
    params: &BootstrapParams,
    round: usize,
) -> Vec<Option<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(round as u64);
    let mut counts = PairCounts::zeros(n);
    for _ in 0..params.per_round {
        let k = match params.sampling {
            Sampling::Stratified => {
                let stratum = &strata[rng.gen_range(0..strata.len())];
                stratum[rng.gen_range(0..stratum.len())]
            }
            Sampling::Pooled => rng.gen_range(0..encoded.len()),
        };
        let (a, b, outcome) = encoded[k];
        counts.add(a, b, outcome);
    }
    fit_counts::<T>(&counts)
        .theta
        .into_iter()
        .map(|t| t.map(elo_scale))
        .collect()
}

/// Point ratings from the full battle set, with 2.5/97.5 percentile CIs over
/// resampled rounds. Rounds run in parallel; each round seeds its own RNG
/// stream, so results do not depend on scheduling.
pub fn bootstrap_ratings<T: Scalar>(
    battles: &BattleSet,
    params: &BootstrapParams,
) -> Result<RatingTable<T>, ArenaError> {
    params.validate()?;
    let mut table = fit_bradley_terry::<T>(battles)?;
    let index = roster_index(battles.roster());
    let encoded: Vec<(usize, usize, super::Outcome)> = battles
        .battles()
        .iter()
        .map(|b| (index[b.a.as_str()], index[b.b.as_str()], b.outcome))
        .collect();
    let strata = strata(battles);
    let n = battles.roster().len();
    let rounds: Vec<Vec<Option<T>>> = (0..params.rounds)
        .into_par_iter()
        .map(|r| sample_round(&encoded, &strata, n, params, r))
        .collect();

    for (i, entry) in table.entries.iter_mut().enumerate() {
        let mut samples: Vec<T> = rounds.iter().filter_map(|r| r[i]).collect();
        if samples.is_empty() {
            continue;
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite ratings"));
        entry.ci_low = percentile(&samples, 0.025).min(entry.rating);
        entry.ci_high = percentile(&samples, 0.975).max(entry.rating);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{BattleRecord, Outcome};

    fn two_player(wins: usize, losses: usize) -> BattleSet {
        let battles = (0..wins + losses)
            .map(|k| {
                let o = if k < wins { Outcome::A } else { Outcome::B };
                BattleRecord::new("d", 0, format!("m{k}"), "A", "B", o).unwrap()
            })
            .collect();
        BattleSet::from_battles(battles).unwrap()
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.975), 4.9);
        assert_eq!(percentile(&[7.0], 0.025), 7.0);
    }

    #[test]
    fn deterministic_and_ordered() {
        let set = two_player(60, 40);
        let params = BootstrapParams {
            rounds: 10,
            per_round: 500,
            seed: 3,
            sampling: Sampling::Stratified,
        };
        let a = bootstrap_ratings::<f64>(&set, &params).unwrap();
        let b = bootstrap_ratings::<f64>(&set, &params).unwrap();
        assert_eq!(a, b);
        for e in &a.entries {
            assert!(e.ci_low <= e.rating && e.rating <= e.ci_high);
            assert!(e.ci_low < e.ci_high);
        }
        let c = bootstrap_ratings::<f64>(&set, &BootstrapParams { seed: 4, ..params }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stratified_sampling_balances_datasets() {
        // dataset "big" has 99 A-wins, dataset "small" has 1 B-win
        let mut battles: Vec<BattleRecord> = (0..99)
            .map(|k| BattleRecord::new("big", 0, format!("m{k}"), "A", "B", Outcome::A).unwrap())
            .collect();
        battles.push(BattleRecord::new("small", 0, "x", "A", "B", Outcome::B).unwrap());
        let set = BattleSet::from_battles(battles).unwrap();
        let params = BootstrapParams {
            rounds: 1,
            per_round: 20_000,
            seed: 1,
            sampling: Sampling::Stratified,
        };
        let strat = bootstrap_round::<f64>(&set, &params, 0);
        let pooled = bootstrap_round::<f64>(
            &set,
            &BootstrapParams {
                sampling: Sampling::Pooled,
                ..params
            },
            0,
        );
        let gap = |r: &[Option<f64>]| r[0].unwrap() - r[1].unwrap();
        // roughly half the stratified draws come from "small"
        assert!(gap(&strat).abs() < 20.0, "{}", gap(&strat));
        assert!(gap(&pooled) > 300.0, "{}", gap(&pooled));
    }

    #[test]
    fn rejects_empty_rounds() {
        let set = two_player(1, 1);
        let params = BootstrapParams {
            rounds: 0,
            ..BootstrapParams::default()
        };
        assert!(matches!(
            bootstrap_ratings::<f64>(&set, &params),
            Err(ArenaError::BadBootstrap)
        ));
    }
}
