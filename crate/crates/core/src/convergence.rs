//! Level-to-level convergence diagnostics.
//!
//! The limit objects on the fractal are not computable, so every comparison is
//! made against a fine reference level `M`: functions on `V_M` are restricted
//! to `V_n` (the identity on the id prefix `0..|V_n|`), and level-`n` resolvents,
//! semigroups and path expectations are compared with the level-`M` ones on
//! `V_n` in the sup norm.

use std::io::Write;

use serde::Serialize;

use crate::drift::{check_condition_i, select_constants, default_delta, Constants, DriftSpec, LevelDrift};
use crate::error::{Error, Result};
use crate::generator::{build_generator, point_mass, sample_states, GeneratorMatrix};
use crate::model::{FractalModel, Level};
use crate::spectral::{resolvent, Semigroup, POISSON_TAIL};

/// Banner attached to path-law reports.
pub const PATH_LAW_BANNER: &str =
    "fixed-time test-function expectations stand in for convergence in law on path space; Skorokhod J1 convergence is not tested";

/// `f ↦ f|V_n` from level `source` to level `target ≤ source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestrictionMap {
    pub source: usize,
    pub target: usize,
    target_len: usize,
}

impl RestrictionMap {
    pub fn new(model: &FractalModel, source: usize, target: usize) -> Result<Self> {
        if target > source {
            return Err(Error::InvalidArgument(format!(
                "cannot restrict from level {source} to finer level {target}"
            )));
        }
        Ok(Self {
            source,
            target,
            target_len: model.structure.vertex_count(target),
        })
    }

    pub fn apply<'a>(&self, f: &'a [f64]) -> &'a [f64] {
        &f[..self.target_len]
    }

    /// `Φ_target ∘ Φ_{other}` where `other` maps into this map's source.
    pub fn compose(&self, inner: &RestrictionMap) -> Result<RestrictionMap> {
        if inner.target != self.source {
            return Err(Error::InvalidArgument("restriction maps do not compose".into()));
        }
        Ok(RestrictionMap {
            source: inner.source,
            target: self.target,
            target_len: self.target_len,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    KsNorm,
    ResolventSup,
    SemigroupSup,
    PathLaw,
}

impl Quantity {
    pub fn file_stem(self) -> &'static str {
        match self {
            Quantity::KsNorm => "ks_norm",
            Quantity::ResolventSup => "resolvent",
            Quantity::SemigroupSup => "semigroup",
            Quantity::PathLaw => "path_law",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub quantity: Quantity,
    pub reference_level: usize,
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    /// First level from which the errors never increase again.
    pub non_increasing_from: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub banner: Option<String>,
}

impl ConvergenceReport {
    fn new(quantity: Quantity, reference_level: usize, levels: Vec<usize>, errors: Vec<f64>) -> Self {
        let mut start = errors.len();
        while start > 0 && (start == errors.len() || errors[start - 1] >= errors[start]) {
            start -= 1;
        }
        let non_increasing_from = levels.get(start).copied();
        Self {
            quantity,
            reference_level,
            levels,
            errors,
            non_increasing_from,
            banner: None,
        }
    }

    /// `errors[last] / errors[first]`
    pub fn final_to_initial(&self) -> Option<f64> {
        let first = *self.errors.first()?;
        let last = *self.errors.last()?;
        Some(last / first)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["level", "error"])?;
        for (n, e) in self.levels.iter().zip(&self.errors) {
            out.write_record([n.to_string(), format!("{e:e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn l2_norm(mu: &[f64], f: &[f64]) -> f64 {
    mu.iter().zip(f).map(|(m, v)| m * v * v).sum::<f64>().sqrt()
}

/// Level data with the drift realised and the generator built.
#[derive(Debug, Clone)]
pub struct LevelSystem {
    pub level: Level,
    pub drift: LevelDrift,
    pub generator: GeneratorMatrix,
}

/// A model, a drift and a reference level, with the reference-level diameter
/// proxy and the constants `(δ, s, t, λ)` shared by every level.
#[derive(Debug, Clone)]
pub struct ConvergenceLab {
    pub model: FractalModel,
    pub drift: DriftSpec,
    pub reference: usize,
    pub diam_proxy: f64,
    pub constants: Constants,
    /// Poisson mass dropped when applying semigroups.
    pub poisson_tail: f64,
}

impl ConvergenceLab {
    pub fn new(model: FractalModel, drift: DriftSpec, reference: usize, delta: Option<f64>) -> Result<Self> {
        let top = model.level(reference)?;
        let diam_proxy = top.network.resistance_diameter()?;
        let realized = drift.realize(&model, &top)?;
        let cond = check_condition_i(&top.network, &realized, diam_proxy)?;
        let delta = delta.unwrap_or_else(|| default_delta(diam_proxy));
        let constants = select_constants(cond.drift_energy, diam_proxy, delta)?;
        Ok(Self {
            model,
            drift,
            reference,
            diam_proxy,
            constants,
            poisson_tail: POISSON_TAIL,
        })
    }

    /// Builds level `n`, failing if the drift is inadmissible there
    /// (Condition I violated or a negative jump rate).
    pub fn system(&self, n: usize) -> Result<LevelSystem> {
        let level = self.model.level(n)?;
        let drift = self.drift.realize(&self.model, &level)?;
        let cond = check_condition_i(&level.network, &drift, self.diam_proxy)?;
        if !cond.satisfied {
            return Err(Error::Inadmissible(format!(
                "Condition I fails on level {n}: drift energy {} >= {}",
                cond.drift_energy, cond.threshold
            )));
        }
        let generator = build_generator(&level.network, &drift, &level.measure)?;
        let rates = generator.validate_rates();
        if !rates.valid {
            return Err(Error::Inadmissible(format!(
                "{} negative jump rates on level {n}",
                rates.violations.len()
            )));
        }
        Ok(LevelSystem {
            level,
            drift,
            generator,
        })
    }

    fn semigroup(&self, gen: &GeneratorMatrix, t: f64, f: &[f64]) -> Result<crate::spectral::SemigroupApply> {
        Semigroup::new(gen)?.with_tail(self.poisson_tail)?.apply(t, f)
    }

    fn check_reference_function(&self, f: &[f64]) -> Result<()> {
        let expected = self.model.structure.vertex_count(self.reference);
        if f.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: f.len(),
            });
        }
        Ok(())
    }

    fn check_levels(&self, levels: &[usize]) -> Result<()> {
        if levels.iter().any(|&n| n > self.reference) {
            return Err(Error::InvalidArgument(format!(
                "levels must not exceed the reference level {}",
                self.reference
            )));
        }
        Ok(())
    }

    /// `| ‖f|V_n‖_{L²(μ_n)} − ‖f‖_{L²(μ_M)} |` per level.
    pub fn ks_norm_check(&self, f: &[f64], levels: &[usize]) -> Result<ConvergenceReport> {
        self.check_reference_function(f)?;
        self.check_levels(levels)?;
        let top = self.model.level(self.reference)?;
        let reference_norm = l2_norm(&top.measure, f);
        let errors = levels
            .iter()
            .map(|&n| {
                let level = self.model.level(n)?;
                let restricted = RestrictionMap::new(&self.model, self.reference, n)?.apply(f);
                Ok((l2_norm(&level.measure, restricted) - reference_norm).abs())
            })
            .collect::<Result<_>>()?;
        Ok(ConvergenceReport::new(Quantity::KsNorm, self.reference, levels.to_vec(), errors))
    }

    pub fn resolvent_convergence(&self, alpha: f64, f: &[f64], levels: &[usize]) -> Result<ConvergenceReport> {
        self.check_reference_function(f)?;
        self.check_levels(levels)?;
        if !(alpha > self.constants.lambda) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} must exceed lambda = {}",
                self.constants.lambda
            )));
        }
        let top = self.system(self.reference)?;
        let reference = resolvent(&top.generator, alpha, f)?.values;
        let errors = levels
            .iter()
            .map(|&n| {
                let sys = self.system(n)?;
                let restricted = &f[..sys.level.vertex_count()];
                let u = resolvent(&sys.generator, alpha, restricted)?.values;
                Ok(sup_distance(&u, &reference[..u.len()]))
            })
            .collect::<Result<_>>()?;
        Ok(ConvergenceReport::new(Quantity::ResolventSup, self.reference, levels.to_vec(), errors))
    }

    pub fn semigroup_convergence(&self, t: f64, f: &[f64], levels: &[usize]) -> Result<ConvergenceReport> {
        self.check_reference_function(f)?;
        self.check_levels(levels)?;
        let top = self.system(self.reference)?;
        let reference = self.semigroup(&top.generator, t, f)?.values;
        let errors = levels
            .iter()
            .map(|&n| {
                let sys = self.system(n)?;
                let restricted = &f[..sys.level.vertex_count()];
                let u = self.semigroup(&sys.generator, t, restricted)?.values;
                Ok(sup_distance(&u, &reference[..u.len()]))
            })
            .collect::<Result<_>>()?;
        Ok(ConvergenceReport::new(Quantity::SemigroupSup, self.reference, levels.to_vec(), errors))
    }

    /// Monte Carlo estimates of `E[f(Y_n(t))]` started from `start` (a vertex
    /// of `V_0`, hence of every level), checked against the exact value
    /// `(T^n_t f)(start)`. The report's errors are
    /// `max_f |(T^n_t f)(start) − (T^M_t f)(start)|`.
    pub fn path_law_convergence(
        &self,
        t: f64,
        test_functions: &[Vec<f64>],
        levels: &[usize],
        start: usize,
        paths: usize,
        seed: u64,
    ) -> Result<PathLawReport> {
        for f in test_functions {
            self.check_reference_function(f)?;
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("test function is not finite at every vertex".into()));
            }
        }
        self.check_levels(levels)?;
        if start >= self.model.structure.boundary_size() {
            return Err(Error::InvalidArgument("start must be a vertex of V_0".into()));
        }
        let top = self.system(self.reference)?;
        let reference: Vec<f64> = test_functions
            .iter()
            .map(|f| Ok(self.semigroup(&top.generator, t, f)?.values[start]))
            .collect::<Result<_>>()?;

        let mut rows = Vec::new();
        let mut errors = Vec::new();
        for &n in levels {
            let sys = if n == self.reference { top.clone() } else { self.system(n)? };
            let dim = sys.level.vertex_count();
            let states = if paths > 0 {
                let chain = sys.generator.jump_parameters()?;
                sample_states(&chain, &point_mass(dim, start), &[t], seed, paths)?
            } else {
                Vec::new()
            };
            let mut worst: f64 = 0.0;
            for (k, f) in test_functions.iter().enumerate() {
                let restricted = &f[..dim];
                let exact = self.semigroup(&sys.generator, t, restricted)?.values[start];
                let (mean, standard_error) = mean_and_se(states.iter().map(|s| restricted[s[0]]));
                worst = worst.max((exact - reference[k]).abs());
                rows.push(PathLawRow {
                    level: n,
                    function: k,
                    t,
                    mc_mean: mean,
                    standard_error,
                    exact,
                    reference: reference[k],
                    within_3se: paths == 0 || (mean - exact).abs() <= 3.0 * standard_error,
                });
            }
            errors.push(worst);
        }
        let mut summary = ConvergenceReport::new(Quantity::PathLaw, self.reference, levels.to_vec(), errors);
        summary.banner = Some(PATH_LAW_BANNER.into());
        Ok(PathLawReport {
            summary,
            paths,
            seed,
            start,
            rows,
        })
    }

    /// `E^n(f|V_n)` per level for `f` on the reference level.
    pub fn energy_monotonicity_profile(&self, f: &[f64], levels: &[usize]) -> Result<MonotonicityReport> {
        self.check_reference_function(f)?;
        self.check_levels(levels)?;
        energy_monotonicity_profile(&self.model, f, levels)
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        sum += v;
        sum_sq += v * v;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct PathLawRow {
    pub level: usize,
    pub function: usize,
    pub t: f64,
    pub mc_mean: f64,
    pub standard_error: f64,
    pub exact: f64,
    pub reference: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathLawReport {
    pub summary: ConvergenceReport,
    pub paths: usize,
    pub seed: u64,
    pub start: usize,
    pub rows: Vec<PathLawRow>,
}

impl PathLawReport {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["level", "function", "t", "mc_mean", "standard_error", "exact", "reference"])?;
        for r in &self.rows {
            out.write_record([
                r.level.to_string(),
                r.function.to_string(),
                format!("{}", r.t),
                format!("{:e}", r.mc_mean),
                format!("{:e}", r.standard_error),
                format!("{:e}", r.exact),
                format!("{:e}", r.reference),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub levels: Vec<usize>,
    pub energies: Vec<f64>,
    pub non_decreasing: bool,
}

/// `E^n(f|V_n)` for each level; `f` lives on the finest level `n` requested or
/// any finer one.
pub fn energy_monotonicity_profile(model: &FractalModel, f: &[f64], levels: &[usize]) -> Result<MonotonicityReport> {
    let energies: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let level = model.level(n)?;
            if f.len() < level.vertex_count() {
                return Err(Error::DimensionMismatch {
                    expected: level.vertex_count(),
                    found: f.len(),
                });
            }
            level.network.quadratic_energy(&f[..level.vertex_count()])
        })
        .collect::<Result<_>>()?;
    let non_decreasing = energies.windows(2).all(|w| w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0));
    Ok(MonotonicityReport {
        levels: levels.to_vec(),
        energies,
        non_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(reference: usize) -> ConvergenceLab {
        ConvergenceLab::new(FractalModel::sierpinski(), DriftSpec::none(), reference, None).unwrap()
    }

    #[test]
    fn trend_flag() {
        let r = ConvergenceReport::new(Quantity::KsNorm, 5, vec![1, 2, 3, 4], vec![1.0, 2.0, 0.5, 0.1]);
        assert_eq!(r.non_increasing_from, Some(2));
        let r = ConvergenceReport::new(Quantity::KsNorm, 5, vec![1, 2], vec![1.0, 0.5]);
        assert_eq!(r.non_increasing_from, Some(1));
    }

    #[test]
    fn restriction_composes() {
        let model = FractalModel::sierpinski();
        let outer = RestrictionMap::new(&model, 3, 1).unwrap();
        let inner = RestrictionMap::new(&model, 5, 3).unwrap();
        let f: Vec<f64> = (0..model.structure.vertex_count(5)).map(|x| x as f64).collect();
        let composed = outer.compose(&inner).unwrap();
        assert_eq!(composed.apply(&f), outer.apply(inner.apply(&f)));
        assert!(RestrictionMap::new(&model, 1, 3).is_err());
    }

    #[test]
    fn constants_give_zero_errors() {
        let lab = lab(4);
        let one = vec![1.0; lab.model.structure.vertex_count(4)];
        let levels = [1, 2, 3];
        assert!(lab.ks_norm_check(&one, &levels).unwrap().errors.iter().all(|&e| e < 1e-14));
        let alpha = lab.constants.lambda + 1.0;
        assert!(lab.resolvent_convergence(alpha, &one, &levels).unwrap().errors.iter().all(|&e| e < 1e-12));
        assert!(lab.semigroup_convergence(0.05, &one, &levels).unwrap().errors.iter().all(|&e| e < 1e-10));
    }

    #[test]
    fn alpha_below_lambda_rejected() {
        let lab = lab(3);
        let one = vec![1.0; lab.model.structure.vertex_count(3)];
        assert!(lab.resolvent_convergence(lab.constants.lambda * 0.5, &one, &[1]).is_err());
    }

    #[test]
    fn levels_above_reference_rejected() {
        let lab = lab(2);
        let one = vec![1.0; lab.model.structure.vertex_count(2)];
        assert!(lab.ks_norm_check(&one, &[3]).is_err());
    }

    #[test]
    fn mean_and_se_basic() {
        let (m, se) = mean_and_se([1.0, 3.0].into_iter());
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
