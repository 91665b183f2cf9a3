//! Linear support vector machines trained by dual coordinate descent.
//!
//! The intercept is learned as the weight of an implicit constant feature
//! (value 1), so it is regularized together with `w`. Regression targets are
//! centered on their mean first and the mean is added back into the bias.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{FeatureMatrix, FusionError};
use crate::num::Scalar;
use crate::store::TaskKind;

const UPDATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams<T> {
    /// Loss weight.
    pub c: T,
    /// Half-width of the regression insensitivity tube.
    pub epsilon: T,
    /// Stop once the largest projected-gradient violation in an epoch is below this.
    pub tol: T,
    pub max_epochs: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SvmParams<T> {
    fn default() -> Self {
        SvmParams {
            c: T::one(),
            epsilon: T::of(0.1),
            tol: T::of(1e-4),
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl<T: Scalar> SvmParams<T> {
    pub fn with_seed(self, seed: u64) -> Self {
        SvmParams { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let ok = self.c > T::zero()
            && self.c.is_finite()
            && self.epsilon >= T::zero()
            && self.tol > T::zero()
            && self.max_epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(FusionError::BadHyperparameters)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub task: TaskKind,
    pub weights: Vec<T>,
    pub bias: T,
    pub standardizer: Standardizer<T>,
    pub hyperparams: SvmParams<T>,
}

/// Dual objective after every epoch (index 0 is the starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace<T> {
    pub objective: Vec<T>,
    pub epochs: usize,
    pub converged: bool,
}

impl<T: Scalar> LinearModel<T> {
    /// Fit a standardizer on raw rows, then train on the standardized rows.
    pub fn fit(
        task: TaskKind,
        x: &FeatureMatrix<T>,
        y: &[T],
        hp: SvmParams<T>,
    ) -> Result<Self, FusionError> {
        let standardizer = Standardizer::fit(x)?;
        let xs = standardizer.transform(x);
        let mut model = match task {
            TaskKind::BinaryClassification => train_classifier(&xs, y, hp)?,
            TaskKind::Regression => train_regressor(&xs, y, hp)?,
        };
        model.standardizer = standardizer;
        Ok(model)
    }

    /// Raw score on an unstandardized feature vector.
    pub fn predict(&self, x: &[T]) -> Result<T, FusionError> {
        if x.len() != self.weights.len() {
            return Err(FusionError::DimMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        let xs = self.standardizer.transform_row(x);
        Ok(dot(&self.weights, &xs) + self.bias)
    }
}

pub fn predict<T: Scalar>(model: &LinearModel<T>, x: &[T]) -> Result<T, FusionError> {
    model.predict(x)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

fn check_inputs<T: Scalar>(x: &FeatureMatrix<T>, y: &[T]) -> Result<(), FusionError> {
    if x.rows() != y.len() {
        return Err(FusionError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if x.rows() == 0 {
        return Err(FusionError::EmptyInput);
    }
    x.check_finite()?;
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(FusionError::NonFiniteLabel { row });
    }
    Ok(())
}

struct DualState<T> {
    w: Vec<T>,
    wb: T,
    diag: Vec<T>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> DualState<T> {
    fn new(x: &FeatureMatrix<T>, seed: u64) -> Self {
        DualState {
            w: vec![T::zero(); x.dim()],
            wb: T::zero(),
            diag: x.iter_rows().map(|r| dot(r, r) + T::one()).collect(),
            order: (0..x.rows()).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn half_norm(&self) -> T {
        (dot(&self.w, &self.w) + self.wb * self.wb) * T::of(0.5)
    }

    fn margin(&self, row: &[T]) -> T {
        dot(&self.w, row) + self.wb
    }

    fn step(&mut self, row: &[T], delta: T) {
        axpy(delta, row, &mut self.w);
        self.wb = self.wb + delta;
    }

    fn finish(self, task: TaskKind, hp: SvmParams<T>, offset: T) -> LinearModel<T> {
        let dim = self.w.len();
        LinearModel {
            task,
            weights: self.w,
            bias: self.wb + offset,
            standardizer: Standardizer::identity(dim),
            hyperparams: hp,
        }
    }
}

/// L2-regularized hinge-loss classifier on already standardized rows.
pub fn train_classifier<T: Scalar>(
    x: &FeatureMatrix<T>,
    y: &[T],
    hp: SvmParams<T>,
) -> Result<LinearModel<T>, FusionError> {
    train_classifier_traced(x, y, hp).map(|(m, _)| m)
}

pub fn train_classifier_traced<T: Scalar>(
    x: &FeatureMatrix<T>,
    y: &[T],
    hp: SvmParams<T>,
) -> Result<(LinearModel<T>, SolverTrace<T>), FusionError> {
    hp.validate()?;
    check_inputs(x, y)?;
    if let Some(row) = y.iter().position(|&v| v != T::zero() && v != T::one()) {
        return Err(FusionError::NotBinaryLabel { row });
    }
    let positives = y.iter().filter(|&&v| v == T::one()).count();
    if positives == 0 || positives == y.len() {
        return Err(FusionError::SingleClassInput);
    }
    let signs: Vec<T> = y
        .iter()
        .map(|&v| if v == T::one() { T::one() } else { -T::one() })
        .collect();
    let c = hp.c;
    let mut st = DualState::new(x, hp.seed);
    let mut alpha = vec![T::zero(); x.rows()];
    let mut trace = SolverTrace {
        objective: vec![T::zero()],
        epochs: 0,
        converged: false,
    };

    for _ in 0..hp.max_epochs {
        let mut order = std::mem::take(&mut st.order);
        order.shuffle(&mut st.rng);
        let mut max_violation = T::zero();
        for &i in &order {
            let row = x.row(i);
            let g = signs[i] * st.margin(row) - T::one();
            let pg = if alpha[i] == T::zero() {
                g.min(T::zero())
            } else if alpha[i] == c {
                g.max(T::zero())
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg.abs() > T::of(UPDATE_EPS) {
                let old = alpha[i];
                alpha[i] = (old - g / st.diag[i]).max(T::zero()).min(c);
                st.step(row, (alpha[i] - old) * signs[i]);
            }
        }
        st.order = order;
        trace.epochs += 1;
        let sum_alpha: T = alpha.iter().copied().sum();
        trace.objective.push(st.half_norm() - sum_alpha);
        if max_violation < hp.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((
        st.finish(TaskKind::BinaryClassification, hp, T::zero()),
        trace,
    ))
}

/// Linear epsilon-insensitive support vector regression on standardized rows.
pub fn train_regressor<T: Scalar>(
    x: &FeatureMatrix<T>,
    y: &[T],
    hp: SvmParams<T>,
) -> Result<LinearModel<T>, FusionError> {
    train_regressor_traced(x, y, hp).map(|(m, _)| m)
}

pub fn train_regressor_traced<T: Scalar>(
    x: &FeatureMatrix<T>,
    y: &[T],
    hp: SvmParams<T>,
) -> Result<(LinearModel<T>, SolverTrace<T>), FusionError> {
    hp.validate()?;
    check_inputs(x, y)?;
    if y.len() < 2 {
        return Err(FusionError::TooFewExamples {
            needed: 2,
            found: y.len(),
        });
    }
    let offset = y.iter().copied().sum::<T>() / T::of_usize(y.len());
    let target: Vec<T> = y.iter().map(|&v| v - offset).collect();
    let (c, eps) = (hp.c, hp.epsilon);
    let mut st = DualState::new(x, hp.seed);
    let mut beta = vec![T::zero(); x.rows()];
    let mut trace = SolverTrace {
        objective: vec![T::zero()],
        epochs: 0,
        converged: false,
    };

    for _ in 0..hp.max_epochs {
        let mut order = std::mem::take(&mut st.order);
        order.shuffle(&mut st.rng);
        let mut max_violation = T::zero();
        for &i in &order {
            let row = x.row(i);
            let h = st.diag[i];
            let g = st.margin(row) - target[i];
            let gp = g + eps;
            let gn = g - eps;
            let b = beta[i];
            let violation = if b == T::zero() {
                (-gp).max(gn).max(T::zero())
            } else if b == c {
                gp.max(T::zero())
            } else if b == -c {
                (-gn).max(T::zero())
            } else if b > T::zero() {
                gp.abs()
            } else {
                gn.abs()
            };
            max_violation = max_violation.max(violation);
            if violation <= T::of(UPDATE_EPS) {
                continue;
            }
            // exact minimizer of the one-dimensional piecewise quadratic
            let step = if gp < h * b {
                -gp / h
            } else if gn > h * b {
                -gn / h
            } else {
                -b
            };
            let next = (b + step).max(-c).min(c);
            if next != b {
                beta[i] = next;
                st.step(row, next - b);
            }
        }
        st.order = order;
        trace.epochs += 1;
        let linear: T = beta
            .iter()
            .zip(&target)
            .fold(T::zero(), |acc, (&b, &t)| acc - t * b + eps * b.abs());
        trace.objective.push(st.half_norm() + linear);
        if max_violation < hp.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((st.finish(TaskKind::Regression, hp, offset), trace))
}
