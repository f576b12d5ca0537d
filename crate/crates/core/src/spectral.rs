//! Resolvents `G_α = (α − L)^{-1}` and semigroups `T_t = e^{tL}` of validated
//! generators.
//!
//! Semigroups use uniformization: with `Λ = max_x q(x)` and the stochastic
//! matrix `P = I + L/Λ`,
//! `T_t f = Σ_k e^{−Λt} (Λt)^k / k! · P^k f`.
//! Every summand is a convex combination of values of `f`, so positivity and
//! the Markov bounds hold by construction up to round-off.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;
use crate::sampling::{stream, uniform_vector};

/// Neglected Poisson mass allowed in uniformization.
pub const POISSON_TAIL: f64 = 1e-12;

/// Power iterations used for operator-norm estimates.
pub const POWER_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSolve {
    pub alpha: f64,
    pub values: Vec<f64>,
    /// `max_x |A_α(u, 1_x) − (f, 1_x)_μ|`
    pub residual: f64,
}

/// A factorised `α − L`.
#[derive(Debug, Clone)]
pub struct Resolvent<'g> {
    gen: &'g GeneratorMatrix,
    alpha: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'g> Resolvent<'g> {
    pub fn new(gen: &'g GeneratorMatrix, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        let n = gen.dim();
        let m = DMatrix::identity(n, n) * alpha - gen.to_dense();
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular(format!("alpha - L is singular at alpha = {alpha}")));
        }
        Ok(Self { gen, alpha, lu })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn apply(&self, f: &[f64]) -> Result<ResolventSolve> {
        let n = self.gen.dim();
        if f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.len(),
            });
        }
        let u = self
            .lu
            .solve(&DVector::from_column_slice(f))
            .ok_or_else(|| Error::Singular("resolvent solve failed".into()))?;
        let values: Vec<f64> = u.iter().copied().collect();
        let lu_vals = self.gen.apply(&values);
        let residual = (0..n)
            .map(|x| (self.gen.measure()[x] * (self.alpha * values[x] - lu_vals[x] - f[x])).abs())
            .fold(0.0f64, f64::max);
        Ok(ResolventSolve {
            alpha: self.alpha,
            values,
            residual,
        })
    }
}

/// `G_α f`, solving `A_α(u, v) = (f, v)_μ` for all `v`.
pub fn resolvent(gen: &GeneratorMatrix, alpha: f64, f: &[f64]) -> Result<ResolventSolve> {
    Resolvent::new(gen, alpha)?.apply(f)
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupApply {
    pub t: f64,
    pub values: Vec<f64>,
    /// `Λ`
    pub uniformization_rate: f64,
    /// Poisson terms `k ∈ [first_term, last_term]` were summed.
    pub first_term: usize,
    pub last_term: usize,
}

#[derive(Debug, Clone)]
pub struct Semigroup<'g> {
    gen: &'g GeneratorMatrix,
    rate: f64,
    tail: f64,
}

impl<'g> Semigroup<'g> {
    /// Fails unless every off-diagonal rate is nonnegative.
    pub fn new(gen: &'g GeneratorMatrix) -> Result<Self> {
        let report = gen.validate_rates();
        if !report.valid {
            return Err(Error::InvalidGenerator(format!(
                "{} negative rates; uniformization needs a Markov generator",
                report.violations.len()
            )));
        }
        let rate = gen.diagonal().iter().fold(0.0f64, |m, &d| m.max(-d));
        Ok(Self {
            gen,
            rate,
            tail: POISSON_TAIL,
        })
    }

    /// Poisson mass allowed to fall outside the truncation window.
    pub fn with_tail(mut self, tail: f64) -> Result<Self> {
        if !(tail > 0.0 && tail < 1.0) {
            return Err(Error::InvalidArgument(format!("Poisson tail must lie in (0, 1), got {tail}")));
        }
        self.tail = tail;
        Ok(self)
    }

    pub fn uniformization_rate(&self) -> f64 {
        self.rate
    }

    /// `T_t f`
    pub fn apply(&self, t: f64, f: &[f64]) -> Result<SemigroupApply> {
        self.run(t, f, |v| self.gen.apply(v))
    }

    /// `T_t* f`, the adjoint in `L²(μ)`: `μ^{-1} T_tᵀ μ f`.
    pub fn apply_adjoint(&self, t: f64, f: &[f64]) -> Result<SemigroupApply> {
        let mu = self.gen.measure();
        let weighted: Vec<f64> = f.iter().zip(mu).map(|(v, m)| v * m).collect();
        let mut out = self.run(t, &weighted, |v| self.gen.apply_transpose(v))?;
        out.values.iter_mut().zip(mu).for_each(|(v, m)| *v /= m);
        Ok(out)
    }

    fn run(&self, t: f64, f: &[f64], step: impl Fn(&[f64]) -> Vec<f64>) -> Result<SemigroupApply> {
        if f.len() != self.gen.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.gen.dim(),
                found: f.len(),
            });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
        }
        let mean = self.rate * t;
        if mean == 0.0 {
            return Ok(SemigroupApply {
                t,
                values: f.to_vec(),
                uniformization_rate: self.rate,
                first_term: 0,
                last_term: 0,
            });
        }
        let (first, weights) = poisson_weights(mean, self.tail);
        let last = first + weights.len() - 1;
        let mut v = f.to_vec();
        let mut acc = vec![0.0; f.len()];
        for k in 0..=last {
            if k >= first {
                let w = weights[k - first];
                acc.iter_mut().zip(&v).for_each(|(a, x)| *a += w * x);
            }
            if k < last {
                let lv = step(&v);
                v.iter_mut().zip(&lv).for_each(|(x, l)| *x += l / self.rate);
            }
        }
        Ok(SemigroupApply {
            t,
            values: acc,
            uniformization_rate: self.rate,
            first_term: first,
            last_term: last,
        })
    }
}

/// `T_t f`
pub fn semigroup_apply(gen: &GeneratorMatrix, t: f64, f: &[f64]) -> Result<SemigroupApply> {
    Semigroup::new(gen)?.apply(t, f)
}

/// Normalised Poisson(`mean`) probabilities on a window `[first, first + len)`
/// that leaves out less than `tail` mass. Weights are grown outward from the
/// mode by the ratio recurrence so nothing underflows for large means.
pub fn poisson_weights(mean: f64, tail: f64) -> (usize, Vec<f64>) {
    let mode = mean.floor() as usize;
    let cutoff = tail * 0.1;
    let mut right = vec![1.0];
    let mut total = 1.0;
    let mut k = mode;
    loop {
        let w = right[right.len() - 1] * mean / (k + 1) as f64;
        k += 1;
        right.push(w);
        total += w;
        let ratio = mean / (k + 1) as f64;
        if ratio < 1.0 && w / (1.0 - ratio) < cutoff * total {
            break;
        }
    }
    let mut left = Vec::new();
    let mut k = mode;
    let mut w = 1.0;
    while k > 0 {
        w *= k as f64 / mean;
        k -= 1;
        left.push(w);
        total += w;
        let ratio = k as f64 / mean;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < cutoff * total {
            break;
        }
    }
    let first = k;
    let mut weights: Vec<f64> = left.into_iter().rev().chain(right).collect();
    weights.iter_mut().for_each(|w| *w /= total);
    (first, weights)
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovCheckReport {
    pub t: f64,
    pub trials: usize,
    pub min_value: f64,
    pub max_value: f64,
    pub passed: bool,
}

/// `0 ≤ f ≤ 1 ⇒ 0 ≤ T_t f ≤ 1` on seeded uniform `f`, the constant 1 and the
/// indicators of the first 64 vertices, up to `slack`.
pub fn markov_check(gen: &GeneratorMatrix, t: f64, trials: usize, seed: u64, slack: f64) -> Result<MarkovCheckReport> {
    let sg = Semigroup::new(gen)?;
    let n = gen.dim();
    let mut min_value = f64::INFINITY;
    let mut max_value = f64::NEG_INFINITY;
    let mut record = |values: &[f64]| {
        for &v in values {
            min_value = min_value.min(v);
            max_value = max_value.max(v);
        }
    };
    for k in 0..trials {
        let f = uniform_vector(&mut stream(seed, k as u64), n, 0.0, 1.0);
        record(&sg.apply(t, &f)?.values);
    }
    record(&sg.apply(t, &vec![1.0; n])?.values);
    for x in 0..n.min(64) {
        let mut f = vec![0.0; n];
        f[x] = 1.0;
        record(&sg.apply(t, &f)?.values);
    }
    Ok(MarkovCheckReport {
        t,
        trials,
        min_value,
        max_value,
        passed: min_value >= -slack && max_value <= 1.0 + slack,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthPoint {
    pub t: f64,
    pub norm_estimate: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub lambda: f64,
    pub points: Vec<GrowthPoint>,
    pub passed: bool,
}

fn mu_norm(mu: &[f64], v: &[f64]) -> f64 {
    mu.iter().zip(v).map(|(m, x)| m * x * x).sum::<f64>().sqrt()
}

/// Estimates `‖T_t‖` on `L²(μ)` by power iteration on `T_t* T_t` and compares
/// it with `e^{λt}`.
pub fn contraction_growth_check(gen: &GeneratorMatrix, lambda: f64, t_grid: &[f64], seed: u64) -> Result<GrowthReport> {
    let sg = Semigroup::new(gen)?;
    let mu = gen.measure();
    let mut points = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let mut v = uniform_vector(&mut stream(seed, k as u64), gen.dim(), 0.0, 1.0);
        let mut estimate = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let norm = mu_norm(mu, &v);
            v.iter_mut().for_each(|x| *x /= norm);
            let tv = sg.apply(t, &v)?.values;
            estimate = mu_norm(mu, &tv);
            v = sg.apply_adjoint(t, &tv)?.values;
        }
        points.push(GrowthPoint {
            t,
            norm_estimate: estimate,
            bound: (lambda * t).exp(),
        });
    }
    let passed = points.iter().all(|p| p.norm_estimate <= p.bound * (1.0 + 1e-8));
    Ok(GrowthReport { lambda, points, passed })
}
