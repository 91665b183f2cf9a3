//! Bradley-Terry maximum likelihood by damped Newton iterations.

use nalgebra::{DMatrix, DVector};

use super::{ArenaError, BattleSet, Outcome, RatingEntry, RatingTable};
use crate::num::Scalar;

/// Virtual half-win credited in both directions of every pair that met.
pub const SMOOTHING: f64 = 0.01;
/// Stop when no log-strength moves more than this between iterations.
pub const THETA_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 500;
const MAX_HALVINGS: usize = 60;

/// Win weights between players: `wins[i * n + j]` = wins of `i` over `j`
/// plus half of their ties.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    pub n: usize,
    pub wins: Vec<f64>,
}

impl PairCounts {
    pub fn zeros(n: usize) -> Self {
        PairCounts {
            n,
            wins: vec![0.0; n * n],
        }
    }

    pub fn add(&mut self, a: usize, b: usize, outcome: Outcome) {
        let n = self.n;
        match outcome {
            Outcome::A => self.wins[a * n + b] += 1.0,
            Outcome::B => self.wins[b * n + a] += 1.0,
            Outcome::Tie => {
                self.wins[a * n + b] += 0.5;
                self.wins[b * n + a] += 0.5;
            }
        }
    }

    pub fn from_battles(set: &BattleSet) -> Self {
        let index = super::roster_index(set.roster());
        let mut counts = PairCounts::zeros(set.roster().len());
        for b in set.battles() {
            counts.add(index[b.a.as_str()], index[b.b.as_str()], b.outcome);
        }
        counts
    }

    fn met(&self, i: usize, j: usize) -> bool {
        self.wins[i * self.n + j] + self.wins[j * self.n + i] > 0.0
    }

    /// Weights with the smoothing term added to every pair that met.
    pub fn smoothed<T: Scalar>(&self) -> Vec<T> {
        let n = self.n;
        let mut w = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && self.met(i, j) {
                    w[i * n + j] = T::of(self.wins[i * n + j] + SMOOTHING);
                }
            }
        }
        w
    }
}

/// Log-likelihood `Σ w_ij ln σ(θ_i − θ_j)` under smoothed weights.
pub fn log_likelihood<T: Scalar>(weights: &[T], theta: &[T]) -> T {
    let n = theta.len();
    let mut total = T::zero();
    for i in 0..n {
        for j in 0..n {
            let w = weights[i * n + j];
            if w > T::zero() {
                // ln σ(d) = −ln(1 + e^{−d})
                total = total - w * (theta[j] - theta[i]).exp().ln_1p();
            }
        }
    }
    total
}

/// Result of a fit: centered log-strengths (`None` for players without
/// battles) and the log-likelihood after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BtFit<T> {
    pub theta: Vec<Option<T>>,
    pub log_likelihood: Vec<T>,
    pub iterations: usize,
}

/// Fit log-strengths to pair counts.
pub fn fit_counts<T: Scalar>(counts: &PairCounts) -> BtFit<T> {
    fit_counts_inner(counts, false)
}

/// Connected components of the "met" graph among active players.
fn components(counts: &PairCounts, active: &[bool]) -> Vec<Vec<usize>> {
    let n = counts.n;
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in (0..n).filter(|&i| active[i]) {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            let i = comp[k];
            let fresh: Vec<usize> = (0..n)
                .filter(|&j| j != i && !seen[j] && counts.met(i, j))
                .collect();
            for j in fresh {
                seen[j] = true;
                comp.push(j);
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Newton direction. Within each component the Hessian is minus a weighted
/// Laplacian; adding `J / m` makes it definite and keeps the step centered.
fn newton_step<T: Scalar>(w: &[T], theta: &[T], comps: &[Vec<usize>]) -> Vec<T> {
    let n = theta.len();
    let mut step = vec![T::zero(); n];
    for comp in comps {
        let m = comp.len();
        if m < 2 {
            continue;
        }
        let mut h = DMatrix::<f64>::from_element(m, m, 1.0 / m as f64);
        let mut g = DVector::<f64>::zeros(m);
        for (a, &i) in comp.iter().enumerate() {
            for (b, &j) in comp.iter().enumerate() {
                let games = w[i * n + j] + w[j * n + i];
                if a == b || games <= T::zero() {
                    continue;
                }
                let p = crate::num::sigmoid(theta[i] - theta[j]);
                g[a] += (w[i * n + j] - games * p).as_f64();
                let curv = (games * p * (T::one() - p)).as_f64();
                h[(a, a)] += curv;
                h[(a, b)] -= curv;
            }
        }
        let delta = h
            .cholesky()
            .expect("regularized Laplacian of a connected component is positive definite")
            .solve(&g);
        for (a, &i) in comp.iter().enumerate() {
            step[i] = T::of(delta[a]);
        }
    }
    step
}

fn fit_counts_inner<T: Scalar>(counts: &PairCounts, record: bool) -> BtFit<T> {
    let n = counts.n;
    let w = counts.smoothed::<T>();
    let active: Vec<bool> = (0..n)
        .map(|i| (0..n).any(|j| j != i && counts.met(i, j)))
        .collect();
    let comps = components(counts, &active);

    let mut theta = vec![T::zero(); n];
    let mut ll = log_likelihood(&w, &theta);
    let mut trace = Vec::new();
    if record {
        trace.push(ll);
    }
    // f32 cannot resolve 1e-8 steps
    let tolerance = T::of(THETA_TOLERANCE).max(T::epsilon() * T::of(16.0));
    let mut iterations = 0;
    while !comps.is_empty() && iterations < MAX_ITERATIONS {
        iterations += 1;
        let direction = newton_step(&w, &theta, &comps);
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let next: Vec<T> = theta
                .iter()
                .zip(&direction)
                .map(|(&a, &d)| a + t * d)
                .collect();
            let next_ll = log_likelihood(&w, &next);
            if next_ll >= ll {
                accepted = Some((next, next_ll));
                break;
            }
            t = t / T::of(2.0);
        }
        let Some((next, next_ll)) = accepted else {
            break;
        };
        let delta = theta
            .iter()
            .zip(&next)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
        theta = next;
        ll = next_ll;
        if record {
            trace.push(ll);
        }
        if delta < tolerance {
            break;
        }
    }
    let n_active = active.iter().filter(|&&a| a).count();
    if n_active > 0 {
        let mean =
            (0..n).filter(|&i| active[i]).map(|i| theta[i]).sum::<T>() / T::of_usize(n_active);
        for i in (0..n).filter(|&i| active[i]) {
            theta[i] = theta[i] - mean;
        }
    }
    BtFit {
        theta: theta
            .into_iter()
            .zip(&active)
            .map(|(t, &a)| a.then_some(t))
            .collect(),
        log_likelihood: trace,
        iterations,
    }
}

/// Elo-style display scale: `1000 + 400 / ln 10 · θ`.
pub fn elo_scale<T: Scalar>(theta: T) -> T {
    T::of(1000.0) + T::of(400.0) / T::LN_10() * theta
}

/// Point estimates (CIs collapse onto the rating).
pub fn fit_bradley_terry<T: Scalar>(battles: &BattleSet) -> Result<RatingTable<T>, ArenaError> {
    fit_bradley_terry_traced(battles).map(|(t, _)| t)
}

pub fn fit_bradley_terry_traced<T: Scalar>(
    battles: &BattleSet,
) -> Result<(RatingTable<T>, BtFit<T>), ArenaError> {
    if battles.is_empty() {
        return Err(ArenaError::NoBattles);
    }
    let counts = PairCounts::from_battles(battles);
    let fit = fit_counts_inner::<T>(&counts, true);
    let entries = battles
        .roster()
        .iter()
        .zip(&fit.theta)
        .map(|(name, theta)| {
            let theta = theta.ok_or_else(|| ArenaError::NoBattlesFor(name.clone()))?;
            let rating = elo_scale(theta);
            Ok(RatingEntry {
                captioner: name.clone(),
                rating,
                ci_low: rating,
                ci_high: rating,
                theta,
            })
        })
        .collect::<Result<_, ArenaError>>()?;
    Ok((RatingTable { entries }, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::BattleRecord;
    use approx::assert_abs_diff_eq;

    fn battles(table: &[(&str, &str, usize, usize, usize)]) -> BattleSet {
        let mut out = Vec::new();
        for &(a, b, wins_a, wins_b, ties) in table {
            let outcomes = std::iter::repeat_n(Outcome::A, wins_a)
                .chain(std::iter::repeat_n(Outcome::B, wins_b))
                .chain(std::iter::repeat_n(Outcome::Tie, ties));
            for (k, o) in outcomes.enumerate() {
                out.push(BattleRecord::new("d", 0, format!("m{k}"), a, b, o).unwrap());
            }
        }
        BattleSet::from_battles(out).unwrap()
    }

    #[test]
    fn two_player_closed_form() {
        let t = fit_bradley_terry::<f64>(&battles(&[("A", "B", 75, 25, 0)])).unwrap();
        let gap = t.get("A").unwrap().rating - t.get("B").unwrap().rating;
        assert_abs_diff_eq!(gap, 400.0 * 3f64.log10(), epsilon = 0.5);
        // smoothed MLE is exactly ln(75.01 / 25.01)
        let d = t.get("A").unwrap().theta - t.get("B").unwrap().theta;
        assert_abs_diff_eq!(d, (75.01f64 / 25.01).ln(), epsilon = 1e-7);
    }

    #[test]
    fn balanced_round_robin_is_flat() {
        let names = ["A", "B", "C", "D"];
        let mut table = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                table.push((names[i], names[j], 10, 10, 0));
            }
        }
        let t = fit_bradley_terry::<f64>(&battles(&table)).unwrap();
        for e in &t.entries {
            assert_eq!(e.rating, 1000.0);
        }
    }

    #[test]
    fn theta_is_centered_and_likelihood_increases() {
        let set = battles(&[
            ("A", "B", 30, 10, 2),
            ("B", "C", 20, 15, 0),
            ("A", "C", 40, 1, 0),
            ("C", "D", 5, 0, 0),
        ]);
        let (t, fit) = fit_bradley_terry_traced::<f64>(&set).unwrap();
        let mean: f64 = t.entries.iter().map(|e| e.theta).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert!(fit.log_likelihood.len() > 2);
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        // winless D still gets a finite rating thanks to smoothing
        assert!(t.get("D").unwrap().rating.is_finite());
        assert!(t.get("D").unwrap().rating < t.get("C").unwrap().rating);
    }

    #[test]
    fn translation_invariance_of_win_probabilities() {
        let t = fit_bradley_terry::<f64>(&battles(&[("A", "B", 7, 3, 1), ("B", "C", 4, 6, 0)]))
            .unwrap();
        let p = |x: f64, y: f64| 1.0 / (1.0 + (-(x - y)).exp());
        let th: Vec<f64> = t.entries.iter().map(|e| e.theta).collect();
        for shift in [-3.0, 0.5, 100.0] {
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(
                        p(th[i], th[j]),
                        p(th[i] + shift, th[j] + shift),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn f32_fit() {
        let t = fit_bradley_terry::<f32>(&battles(&[("A", "B", 75, 25, 0)])).unwrap();
        let gap = t.get("A").unwrap().rating - t.get("B").unwrap().rating;
        assert!((gap - 190.849).abs() < 0.5);
    }

    #[test]
    fn errors() {
        let empty = BattleSet::new(vec![], vec!["A".into(), "B".into()]).unwrap();
        assert!(matches!(
            fit_bradley_terry::<f64>(&empty),
            Err(ArenaError::NoBattles)
        ));
        let r = BattleRecord::new("d", 0, "m", "A", "B", Outcome::A).unwrap();
        let lonely = BattleSet::new(vec![r], vec!["A".into(), "B".into(), "C".into()]).unwrap();
        assert!(matches!(
            fit_bradley_terry::<f64>(&lonely),
            Err(ArenaError::NoBattlesFor(n)) if n == "C"
        ));
    }
}
