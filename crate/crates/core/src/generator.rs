//! The generator `L_n` of the perturbed form and its jump-chain description.
//!
//! Off the diagonal `L(x, y) = μ(x)^{-1} c(x, y) (1 + η(x, y))` and the diagonal
//! is minus the row sum, so `(−L f, g)_μ = A^n(f, g)`. The chain waits an
//! exponential time with rate `q(x) = −L(x, x)` at `x` and then jumps to `y`
//! with probability `π(x, y) = L(x, y) / q(x)`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::LevelDrift;
use crate::error::{Error, Result};
use crate::network::ConductanceNetwork;
use crate::sampling::stream;
use crate::VertexId;

#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    /// Off-diagonal entries per row, sorted by column.
    rows: Vec<Vec<(usize, f64)>>,
    /// `1 + η(x, y)` aligned with `rows`.
    factors: Vec<Vec<f64>>,
    diagonal: Vec<f64>,
    measure: Vec<f64>,
}

pub fn build_generator(net: &ConductanceNetwork, drift: &LevelDrift, measure: &[f64]) -> Result<GeneratorMatrix> {
    let n = net.len();
    if measure.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: measure.len(),
        });
    }
    if let Some(x) = measure.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidGenerator(format!("reference measure vanishes at vertex {}", net.ids()[x])));
    }
    let perturbed = drift.term_count() > 0;
    if perturbed && drift.b.iter().chain(&drift.h).any(|v| v.len() != n) {
        return Err(Error::InvalidDrift("drift and network live on different levels".into()));
    }
    let mut rows = Vec::with_capacity(n);
    let mut factors = Vec::with_capacity(n);
    let mut diagonal = Vec::with_capacity(n);
    for x in 0..n {
        let mut row = Vec::with_capacity(net.neighbours(x).len());
        let mut fac = Vec::with_capacity(net.neighbours(x).len());
        let mut total = 0.0;
        for &(y, c) in net.neighbours(x) {
            let factor = if perturbed { 1.0 + drift.eta_at(x, y) } else { 1.0 };
            let rate = c * factor / measure[x];
            total += rate;
            row.push((y, rate));
            fac.push(factor);
        }
        rows.push(row);
        factors.push(fac);
        diagonal.push(-total);
    }
    Ok(GeneratorMatrix {
        rows,
        factors,
        diagonal,
        measure: measure.to_vec(),
    })
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.diagonal[x];
        }
        self.rows[x]
            .binary_search_by_key(&y, |&(k, _)| k)
            .map(|k| self.rows[x][k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for x in 0..n {
            m[(x, x)] = self.diagonal[x];
            for &(y, v) in &self.rows[x] {
                m[(x, y)] = v;
            }
        }
        m
    }

    /// `L f`
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|x| self.diagonal[x] * f[x] + self.rows[x].iter().map(|&(y, v)| v * f[y]).sum::<f64>())
            .collect()
    }

    /// `Lᵀ f`
    pub fn apply_transpose(&self, f: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diagonal.iter().zip(f).map(|(d, v)| d * v).collect();
        for x in 0..self.dim() {
            for &(y, v) in &self.rows[x] {
                out[y] += v * f[x];
            }
        }
        out
    }

    /// `(−L f, g)_{L²(μ)}`, which must equal `A^n(f, g)`.
    pub fn dual_form(&self, f: &[f64], g: &[f64]) -> f64 {
        let lf = self.apply(f);
        lf.iter()
            .zip(g)
            .zip(&self.measure)
            .map(|((l, g), m)| -l * g * m)
            .sum()
    }

    /// `max_{x≠y} |μ(x) L(x, y) − μ(y) L(y, x)|`; zero exactly for reversible chains.
    pub fn detailed_balance_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.dim() {
            for &(y, v) in &self.rows[x] {
                let d = self.measure[x] * v - self.measure[y] * self.entry(y, x);
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// Lists every edge whose rate factor `1 + η(x, y)` is negative.
    pub fn validate_rates(&self) -> RateReport {
        let mut violations = Vec::new();
        let mut min_factor = f64::INFINITY;
        for x in 0..self.dim() {
            for (&(y, _), &factor) in self.rows[x].iter().zip(&self.factors[x]) {
                min_factor = min_factor.min(factor);
                if factor < 0.0 {
                    violations.push(RateViolation { from: x, to: y, factor });
                }
            }
        }
        RateReport {
            valid: violations.is_empty(),
            min_factor,
            violations,
        }
    }

    pub fn jump_parameters(&self) -> Result<JumpChain> {
        let report = self.validate_rates();
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidGenerator(format!(
                "{} negative rates, first on edge ({}, {}) with 1 + eta = {}",
                report.violations.len(),
                v.from,
                v.to,
                v.factor
            )));
        }
        let mut rates = Vec::with_capacity(self.dim());
        let mut targets = Vec::with_capacity(self.dim());
        let mut cumulative = Vec::with_capacity(self.dim());
        for x in 0..self.dim() {
            let q = -self.diagonal[x];
            if !(q > 0.0) {
                return Err(Error::InvalidGenerator(format!("vertex {x} is absorbing")));
            }
            let mut acc = 0.0;
            let mut cum = Vec::with_capacity(self.rows[x].len());
            for &(_, v) in &self.rows[x] {
                acc += v / q;
                cum.push(acc);
            }
            rates.push(q);
            targets.push(self.rows[x].iter().map(|&(y, _)| y).collect());
            cumulative.push(cum);
        }
        Ok(JumpChain {
            rates,
            targets,
            cumulative,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateViolation {
    pub from: VertexId,
    pub to: VertexId,
    pub factor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub valid: bool,
    pub min_factor: f64,
    pub violations: Vec<RateViolation>,
}

/// Holding rates `q` and the jump kernel `π`.
#[derive(Debug, Clone)]
pub struct JumpChain {
    rates: Vec<f64>,
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl JumpChain {
    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    /// `q(x) = −L(x, x)`
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// The row `π(x, ·)` as `(target, probability)`.
    pub fn kernel_row(&self, x: usize) -> Vec<(usize, f64)> {
        let mut prev = 0.0;
        self.targets[x]
            .iter()
            .zip(&self.cumulative[x])
            .map(|(&y, &c)| {
                let p = c - prev;
                prev = c;
                (y, p)
            })
            .collect()
    }

    pub fn probability(&self, x: usize, y: usize) -> f64 {
        self.kernel_row(x).into_iter().find(|&(z, _)| z == y).map_or(0.0, |(_, p)| p)
    }

    fn next_state(&self, x: usize, u: f64) -> usize {
        let cum = &self.cumulative[x];
        // the last cumulative value may fall short of 1 by round-off
        let u = u * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.targets[x][k]
    }

    fn step(&self, rng: &mut impl Rng, x: usize) -> (f64, usize) {
        let hold = Exp::new(self.rates[x]).expect("positive rate").sample(rng);
        let u: f64 = rng.random();
        (hold, self.next_state(x, u))
    }
}

fn check_initial(initial: &[f64], dim: usize) -> Result<()> {
    if initial.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: initial.len(),
        });
    }
    if initial.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (initial.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "initial distribution must be nonnegative and sum to 1".into(),
        ));
    }
    Ok(())
}

fn draw_initial(rng: &mut impl Rng, initial: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (x, &p) in initial.iter().enumerate() {
        acc += p;
        if u < acc {
            return x;
        }
    }
    initial.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn point_mass(dim: usize, x: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[x] = 1.0;
    v
}

/// A càdlàg path: `states[k]` is held on `[jump_times[k], jump_times[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub index: u64,
    pub horizon: f64,
    pub jump_times: Vec<f64>,
    pub states: Vec<VertexId>,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Result<VertexId> {
        if t > self.horizon || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        let k = self.jump_times.partition_point(|&s| s <= t);
        Ok(self.states[k - 1])
    }

    /// Completed sojourns at `x`; the final, censored sojourn is excluded.
    pub fn holding_times_at(&self, x: VertexId) -> Vec<f64> {
        self.jump_times
            .windows(2)
            .zip(&self.states)
            .filter(|(_, &s)| s == x)
            .map(|(w, _)| w[1] - w[0])
            .collect()
    }
}

/// One path on `[0, horizon]` drawn from stream `(seed, index)`.
pub fn simulate(chain: &JumpChain, initial: &[f64], horizon: f64, seed: u64, index: u64) -> Result<Trajectory> {
    check_initial(initial, chain.dim())?;
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument("horizon must be nonnegative".into()));
    }
    let mut rng = stream(seed, index);
    let mut x = draw_initial(&mut rng, initial);
    let mut jump_times = vec![0.0];
    let mut states = vec![x];
    let mut time = 0.0;
    loop {
        let (hold, next) = chain.step(&mut rng, x);
        if time + hold > horizon {
            break;
        }
        time += hold;
        x = next;
        jump_times.push(time);
        states.push(x);
    }
    Ok(Trajectory {
        seed,
        index,
        horizon,
        jump_times,
        states,
    })
}

/// `count` paths with indices `0..count`, simulated in parallel.
pub fn simulate_many(chain: &JumpChain, initial: &[f64], horizon: f64, seed: u64, count: usize) -> Result<Vec<Trajectory>> {
    check_initial(initial, chain.dim())?;
    (0..count as u64)
        .into_par_iter()
        .map(|k| simulate(chain, initial, horizon, seed, k))
        .collect()
}

/// The states at the sorted `times` of paths `0..count`, without storing the
/// paths. Path `k` coincides with `simulate(.., seed, k)`.
pub fn sample_states(chain: &JumpChain, initial: &[f64], times: &[f64], seed: u64, count: usize) -> Result<Vec<Vec<VertexId>>> {
    check_initial(initial, chain.dim())?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidArgument("observation times must be sorted and nonnegative".into()));
    }
    let horizon = times.last().copied().unwrap_or(0.0);
    Ok((0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let mut x = draw_initial(&mut rng, initial);
            let mut time = 0.0;
            let mut out = Vec::with_capacity(times.len());
            let mut pending = times.iter().peekable();
            loop {
                let (hold, next) = chain.step(&mut rng, x);
                let leave = time + hold;
                while let Some(&&t) = pending.peek() {
                    if t < leave || leave > horizon {
                        out.push(x);
                        pending.next();
                    } else {
                        break;
                    }
                }
                if leave > horizon || pending.peek().is_none() {
                    break;
                }
                time = leave;
                x = next;
            }
            out
        })
        .collect())
}

/// Occupation frequencies at time `t`.
pub fn empirical_law(trajectories: &[Trajectory], t: f64, dim: usize) -> Result<Vec<f64>> {
    let mut law = vec![0.0; dim];
    if trajectories.is_empty() {
        return Ok(law);
    }
    for traj in trajectories {
        law[traj.state_at(t)?] += 1.0;
    }
    let n = trajectories.len() as f64;
    law.iter_mut().for_each(|p| *p /= n);
    Ok(law)
}

pub fn write_trajectories_jsonl(mut w: impl Write, trajectories: &[Trajectory]) -> Result<()> {
    for traj in trajectories {
        serde_json::to_writer(&mut w, traj)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Rows `path,time,state` on a common time grid.
pub fn write_trajectory_grid_csv(w: impl Write, trajectories: &[Trajectory], grid: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["path", "time", "state"])?;
    for traj in trajectories {
        for &t in grid {
            let state = traj.state_at(t)?;
            out.write_record([traj.index.to_string(), format!("{t}"), state.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
