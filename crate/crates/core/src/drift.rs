//! Non-symmetric drift perturbations `A^n = E^n + Q^n` and their admissibility.
//!
//! The drift is `Q^n = Σ_i Q^n_i` with
//! `Q^n_i(f, g) = ½ Σ_{x≠y} c(x, y) b_i(x) g(x) (f(x) − f(y)) (h_i(x) − h_i(y))`.
//! As matrices every form here follows the convention `form(f, g) = gᵀ M f`,
//! so the row index belongs to the second argument.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FractalModel, Level};
use crate::network::ConductanceNetwork;
use crate::sampling::{stream, uniform_vector};
use crate::structure::LevelComplex;
use crate::VertexId;

/// Nonnegativity tolerance for the Markov property checks.
pub const MARKOV_TOLERANCE: f64 = 1e-12;

/// Values of a function on `V_m`. On finer levels it is represented by its
/// harmonic extension, on coarser levels by restriction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseValues {
    pub level: usize,
    pub values: Vec<f64>,
}

/// How a coefficient `b_i` is sampled on each level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    Constant(f64),
    /// An expression in the planar coordinates `x` and `y`.
    Expression(String),
    Samples(BaseValues),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTerm {
    pub b: Coefficient,
    pub h: BaseValues,
}

/// The perturbation data `(b_i, h_i)_{i ≤ N}`. No terms means no drift.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    #[serde(default)]
    pub terms: Vec<DriftTerm>,
}

impl DriftSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// One term with constant `b` and `h` the harmonic function on the
    /// structure with boundary values `boundary`.
    pub fn single_constant(b: f64, boundary: Vec<f64>) -> Self {
        Self {
            terms: vec![DriftTerm {
                b: Coefficient::Constant(b),
                h: BaseValues {
                    level: 0,
                    values: boundary,
                },
            }],
        }
    }

    /// One constant-coefficient term along the harmonic function with
    /// boundary values `(1, 0, ..., 0)`, with `b` chosen so the drift energy is
    /// a quarter of the Condition I threshold `2/diam`.
    pub fn default_admissible(model: &FractalModel, diam: f64) -> Result<Self> {
        let mut boundary = vec![0.0; model.structure.boundary_size()];
        boundary[0] = 1.0;
        let unit = Self::single_constant(1.0, boundary);
        let base = model.level(0)?;
        let energy = check_condition_i(&base.network, &unit.realize(model, &base)?, diam)?.drift_energy;
        if !(energy > 0.0) {
            return Err(Error::InvalidDrift("harmonic direction has zero energy".into()));
        }
        Ok(unit.scaled(0.5 * (2.0 / diam / energy).sqrt()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// The same drift with every `b_i` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let b = match &term.b {
                    Coefficient::Constant(c) => Coefficient::Constant(c * factor),
                    Coefficient::Samples(s) => Coefficient::Samples(BaseValues {
                        level: s.level,
                        values: s.values.iter().map(|v| v * factor).collect(),
                    }),
                    Coefficient::Expression(e) => Coefficient::Expression(format!("({factor:e}) * ({e})")),
                };
                DriftTerm { b, h: term.h.clone() }
            })
            .collect();
        Self { terms }
    }

    /// Samples every `b_i` and extends every `h_i` to `level`.
    pub fn realize(&self, model: &FractalModel, level: &Level) -> Result<LevelDrift> {
        let mut b = Vec::with_capacity(self.terms.len());
        let mut h = Vec::with_capacity(self.terms.len());
        let mut potential_energy = Vec::with_capacity(self.terms.len());
        for (i, term) in self.terms.iter().enumerate() {
            let hv = extend_base_values(model, level, &term.h)
                .map_err(|e| Error::InvalidDrift(format!("h_{}: {e}", i + 1)))?;
            let bv = match &term.b {
                Coefficient::Constant(c) => vec![*c; level.vertex_count()],
                Coefficient::Samples(s) => extend_base_values(model, level, s)
                    .map_err(|e| Error::InvalidDrift(format!("b_{}: {e}", i + 1)))?,
                Coefficient::Expression(e) => sample_expression(e, &level.complex)
                    .map_err(|err| Error::InvalidDrift(format!("b_{}: {err}", i + 1)))?,
            };
            if bv.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDrift(format!("b_{} has non-finite samples", i + 1)));
            }
            // A piecewise-harmonic h has the energy of its base data.
            let base = model.level(term.h.level)?;
            potential_energy.push(base.network.quadratic_energy(&term.h.values)?);
            b.push(bv);
            h.push(hv);
        }
        Ok(LevelDrift {
            level: level.n(),
            b,
            h,
            potential_energy,
        })
    }
}

fn extend_base_values(model: &FractalModel, level: &Level, base: &BaseValues) -> Result<Vec<f64>> {
    let expected = model.structure.vertex_count(base.level);
    if base.values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: base.values.len(),
        });
    }
    if base.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDrift("non-finite base values".into()));
    }
    if level.n() <= base.level {
        return Ok(base.values[..level.vertex_count()].to_vec());
    }
    let data: Vec<(VertexId, f64)> = base.values.iter().copied().enumerate().collect();
    Ok(level.network.harmonic_extension(&data)?.into_inner())
}

fn sample_expression(expr: &str, complex: &LevelComplex) -> Result<Vec<f64>> {
    use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Value};

    let coords = complex
        .coordinates
        .as_ref()
        .ok_or_else(|| Error::InvalidDrift("coordinate expressions need an embedded structure".into()))?;
    let tree = build_operator_tree::<DefaultNumericTypes>(expr).map_err(|e| Error::Parse(e.to_string()))?;
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    coords
        .iter()
        .map(|p| {
            ctx.set_value("x".into(), Value::Float(p[0])).map_err(|e| Error::Parse(e.to_string()))?;
            ctx.set_value("y".into(), Value::Float(p[1])).map_err(|e| Error::Parse(e.to_string()))?;
            tree.eval_number_with_context(&ctx).map_err(|e| Error::Parse(e.to_string()))
        })
        .collect()
}

/// The drift data sampled on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDrift {
    pub level: usize,
    pub b: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    /// `E(h_i)` of the piecewise-harmonic potentials.
    pub potential_energy: Vec<f64>,
}

impl LevelDrift {
    /// Drift given directly by vertex samples; `E(h_i)` is taken on `net`.
    pub fn from_samples(net: &ConductanceNetwork, b: Vec<Vec<f64>>, h: Vec<Vec<f64>>) -> Result<Self> {
        if b.len() != h.len() {
            return Err(Error::InvalidDrift(format!("{} coefficients but {} potentials", b.len(), h.len())));
        }
        for v in b.iter().chain(&h) {
            if v.len() != net.len() {
                return Err(Error::DimensionMismatch {
                    expected: net.len(),
                    found: v.len(),
                });
            }
        }
        let potential_energy = h.iter().map(|hi| net.quadratic_energy(hi)).collect::<Result<_>>()?;
        Ok(Self {
            level: 0,
            b,
            h,
            potential_energy,
        })
    }

    pub fn none(level: usize) -> Self {
        Self {
            level,
            b: Vec::new(),
            h: Vec::new(),
            potential_energy: Vec::new(),
        }
    }

    pub fn term_count(&self) -> usize {
        self.b.len()
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(|bi| bi.iter().all(|&v| v == 0.0))
    }

    /// `Σ_i b_i(x) (h_i(x) − h_i(y))`, i.e. `2 η(x, y)`.
    pub fn gradient(&self, x: usize, y: usize) -> f64 {
        self.b
            .iter()
            .zip(&self.h)
            .map(|(bi, hi)| bi[x] * (hi[x] - hi[y]))
            .sum()
    }

    /// `η(x, y) = ½ Σ_i b_i(x) (h_i(x) − h_i(y))`. Not symmetric in general.
    pub fn eta_at(&self, x: usize, y: usize) -> f64 {
        0.5 * self.gradient(x, y)
    }

    pub fn sup_norms(&self) -> Vec<f64> {
        self.b.iter().map(|bi| bi.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect()
    }

    fn check(&self, net: &ConductanceNetwork) -> Result<()> {
        for v in self.b.iter().chain(&self.h) {
            if v.len() != net.len() {
                return Err(Error::InvalidDrift(format!(
                    "drift sampled on {} vertices but network has {}",
                    v.len(),
                    net.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eta {
    pub value: f64,
    /// False when `c(x, y) = 0`, where `η` has no effect.
    pub on_edge: bool,
}

pub fn eta(net: &ConductanceNetwork, drift: &LevelDrift, x: VertexId, y: VertexId) -> Result<Eta> {
    drift.check(net)?;
    let (i, j) = (net.position(x)?, net.position(y)?);
    Ok(Eta {
        value: drift.eta_at(i, j),
        on_edge: net.conductance_at(i, j) > 0.0,
    })
}

/// The matrix `B` with `Q^n(f, g) = gᵀ B f`.
pub fn assemble_drift_matrix(net: &ConductanceNetwork, drift: &LevelDrift) -> Result<DMatrix<f64>> {
    drift.check(net)?;
    let n = net.len();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        for &(y, c) in net.neighbours(x) {
            let w = c * drift.eta_at(x, y);
            m[(x, x)] += w;
            m[(x, y)] -= w;
        }
    }
    Ok(m)
}

/// The Laplacian `K` with `E^n(f, g) = gᵀ K f`.
pub fn assemble_energy_matrix(net: &ConductanceNetwork) -> DMatrix<f64> {
    net.laplacian()
}

/// `Σ_{x≠y} c(x, y) g(x) (h(x) − h(y)) (h'(x) − h'(y))`, the level-`n`
/// pairing of `g` against the mutual energy measure of `h` and `h'`.
pub fn discrete_mutual_energy(net: &ConductanceNetwork, h: &[f64], h2: &[f64], g: &[f64]) -> Result<f64> {
    for v in [h, h2, g] {
        if v.len() != net.len() {
            return Err(Error::DimensionMismatch {
                expected: net.len(),
                found: v.len(),
            });
        }
    }
    let mut total = 0.0;
    for x in 0..net.len() {
        for &(y, c) in net.neighbours(x) {
            total += c * g[x] * (h[x] - h[y]) * (h2[x] - h2[y]);
        }
    }
    Ok(total)
}

/// `E^n`, `Q^n`, `A^n` as matrices together with `μ_n`.
#[derive(Debug, Clone)]
pub struct FormAssembly {
    pub level: usize,
    pub energy: DMatrix<f64>,
    pub drift: DMatrix<f64>,
    pub form: DMatrix<f64>,
    pub measure: Vec<f64>,
}

impl FormAssembly {
    pub fn new(level: usize, net: &ConductanceNetwork, drift: &LevelDrift, measure: &[f64]) -> Result<Self> {
        if measure.len() != net.len() {
            return Err(Error::DimensionMismatch {
                expected: net.len(),
                found: measure.len(),
            });
        }
        if measure.iter().any(|&m| !(m > 0.0)) || (measure.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(
                "reference measure must be strictly positive with total mass 1".into(),
            ));
        }
        let energy = assemble_energy_matrix(net);
        let drift = assemble_drift_matrix(net, drift)?;
        let form = &energy + &drift;
        Ok(Self {
            level,
            energy,
            drift,
            form,
            measure: measure.to_vec(),
        })
    }

    pub fn for_level(level: &Level, drift: &LevelDrift) -> Result<Self> {
        Self::new(level.n(), &level.network, drift, &level.measure)
    }

    pub fn dim(&self) -> usize {
        self.measure.len()
    }

    fn bilinear(m: &DMatrix<f64>, f: &[f64], g: &[f64]) -> f64 {
        let n = f.len();
        let mut total = 0.0;
        for r in 0..n {
            if g[r] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for c in 0..n {
                row += m[(r, c)] * f[c];
            }
            total += g[r] * row;
        }
        total
    }

    pub fn energy_form(&self, f: &[f64], g: &[f64]) -> f64 {
        Self::bilinear(&self.energy, f, g)
    }

    pub fn drift_form(&self, f: &[f64], g: &[f64]) -> f64 {
        Self::bilinear(&self.drift, f, g)
    }

    /// `A^n(f, g)`
    pub fn form(&self, f: &[f64], g: &[f64]) -> f64 {
        Self::bilinear(&self.form, f, g)
    }

    /// `(f, g)_{L²(μ_n)}`
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.measure.iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
    }

    pub fn norm_sq(&self, f: &[f64]) -> f64 {
        self.inner(f, f)
    }

    /// `E^n_λ(f) = E^n(f) + λ ‖f‖²`
    pub fn energy_lambda(&self, f: &[f64], lambda: f64) -> f64 {
        self.energy_form(f, f) + lambda * self.norm_sq(f)
    }

    /// `A^n_λ(f) = A^n(f) + λ ‖f‖²`
    pub fn form_lambda(&self, f: &[f64], lambda: f64) -> f64 {
        self.form(f, f) + lambda * self.norm_sq(f)
    }

    pub fn form_matrix(&self) -> &DMatrix<f64> {
        &self.form
    }

    pub fn apply_form(&self, f: &[f64]) -> DVector<f64> {
        &self.form * DVector::from_column_slice(f)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionI {
    pub drift_energy: f64,
    pub threshold: f64,
    pub satisfied: bool,
    /// `threshold − drift_energy`
    pub margin: f64,
}

/// `Σ_{i,j} ∫ b_i b_j dν_{h_i,h_j} < 2 / diam`, the integral discretised with
/// `g(x) = b_i(x) b_j(x)` at the left endpoint.
pub fn check_condition_i(net: &ConductanceNetwork, drift: &LevelDrift, diam: f64) -> Result<ConditionI> {
    drift.check(net)?;
    let mut drift_energy = 0.0;
    for i in 0..drift.term_count() {
        for j in 0..drift.term_count() {
            let g: Vec<f64> = drift.b[i].iter().zip(&drift.b[j]).map(|(a, b)| a * b).collect();
            drift_energy += discrete_mutual_energy(net, &drift.h[i], &drift.h[j], &g)?;
        }
    }
    let threshold = 2.0 / diam;
    Ok(ConditionI {
        drift_energy,
        threshold,
        satisfied: drift_energy < threshold,
        margin: threshold - drift_energy,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionII {
    /// `max_x E(Σ_i b_i(x) h_i)`
    pub max: f64,
    pub argmax: VertexId,
    pub threshold: f64,
    pub satisfied: bool,
    pub margin: f64,
}

/// `E(Σ_i b_i(x) h_i) ≤ 1 / diam` for every vertex `x`, energies taken on `net`.
pub fn check_condition_ii(net: &ConductanceNetwork, drift: &LevelDrift, diam: f64) -> Result<ConditionII> {
    drift.check(net)?;
    let k = drift.term_count();
    let mut gram = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let e = net.energy(&drift.h[i], &drift.h[j])?;
            gram[i][j] = e;
            gram[j][i] = e;
        }
    }
    let mut max = 0.0f64;
    let mut argmax = 0;
    for x in 0..net.len() {
        let mut v = 0.0;
        for i in 0..k {
            for j in 0..k {
                v += drift.b[i][x] * drift.b[j][x] * gram[i][j];
            }
        }
        if v > max {
            max = v;
            argmax = net.ids()[x];
        }
    }
    let threshold = 1.0 / diam;
    Ok(ConditionII {
        max,
        argmax,
        threshold,
        satisfied: max <= threshold,
        margin: threshold - max,
    })
}

/// Finite ramification exhibited through the cell decomposition: each
/// component of `X \ V_n` is the interior of a level-`n` cell whose boundary
/// lies in `V_n`, and every conductance is carried by a cell.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionIII {
    pub satisfied: bool,
    pub cell_count: usize,
    pub edges_outside_cells: usize,
    pub note: String,
}

pub fn check_condition_iii(level: &Level) -> ConditionIII {
    let complex = &level.complex;
    let mut in_cell = std::collections::HashSet::new();
    for cell in &complex.cells {
        for (a, &x) in cell.boundary.iter().enumerate() {
            for &y in &cell.boundary[a + 1..] {
                in_cell.insert((x.min(y), x.max(y)));
            }
        }
    }
    let outside = level
        .network
        .edges()
        .filter(|&(i, j, _)| {
            let (x, y) = (level.network.ids()[i], level.network.ids()[j]);
            !in_cell.contains(&(x.min(y), x.max(y)))
        })
        .count();
    ConditionIII {
        satisfied: outside == 0,
        cell_count: complex.cells.len(),
        edges_outside_cells: outside,
        note: "holds structurally for p.c.f. self-similar sets; cells play the role of the closures of the components of X \\ V_n".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub delta: f64,
    pub s: f64,
    pub t: f64,
    pub lambda: f64,
}

/// Default `δ = 0.1 · diam^{1/2}`.
pub fn default_delta(diam: f64) -> f64 {
    0.1 * diam.sqrt()
}

/// Picks `s` at the midpoint of `((drift_energy/2)^{1/2}(diam^{1/2} + δ), 1)` and
/// sets `λ = (4δ)^{-1}(diam^{1/2} + δ)^{-1}`, `t = λ s`.
pub fn select_constants(drift_energy: f64, diam: f64, delta: f64) -> Result<Constants> {
    if !(delta > 0.0) || !(diam > 0.0) {
        return Err(Error::InvalidArgument("delta and diameter must be positive".into()));
    }
    let root = diam.sqrt() + delta;
    let lower = (drift_energy.max(0.0) / 2.0).sqrt() * root;
    if lower >= 1.0 {
        return Err(Error::Inadmissible(format!(
            "no admissible s: lower bound {lower:.6} is not below 1; shrink the drift (Condition I)"
        )));
    }
    let s = 0.5 * (lower + 1.0);
    let lambda = 1.0 / (4.0 * delta * root);
    Ok(Constants {
        delta,
        s,
        t: lambda * s,
        lambda,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallnessReport {
    pub level: usize,
    pub diam_proxy: f64,
    pub diam_caveat: String,
    pub drift_energy: f64,
    pub condition_i: ConditionI,
    pub condition_ii: ConditionII,
    pub condition_iii: ConditionIII,
    pub delta: f64,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub lambda: Option<f64>,
    pub constants_error: Option<String>,
}

impl SmallnessReport {
    pub fn evaluate(level: &Level, drift: &LevelDrift, diam_proxy: f64, delta: Option<f64>) -> Result<Self> {
        let condition_i = check_condition_i(&level.network, drift, diam_proxy)?;
        let condition_ii = check_condition_ii(&level.network, drift, diam_proxy)?;
        let condition_iii = check_condition_iii(level);
        let delta = delta.unwrap_or_else(|| default_delta(diam_proxy));
        let (constants, constants_error) = match select_constants(condition_i.drift_energy, diam_proxy, delta) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(Self {
            level: level.n(),
            diam_proxy,
            diam_caveat: "diam_proxy is the resistance diameter of V_n, a lower bound for the diameter of the limit set"
                .into(),
            drift_energy: condition_i.drift_energy,
            condition_i,
            condition_ii,
            condition_iii,
            delta,
            s: constants.map(|c| c.s),
            t: constants.map(|c| c.t),
            lambda: constants.map(|c| c.lambda),
            constants_error,
        })
    }

    pub fn constants(&self) -> Option<Constants> {
        Some(Constants {
            delta: self.delta,
            s: self.s?,
            t: self.t?,
            lambda: self.lambda?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub level: usize,
    pub draws: usize,
    pub passed: bool,
    /// `min A_λ(f) / E_λ(f)`, to compare with `1 − s`.
    pub min_ratio: f64,
    /// `max A_λ(f) / E_λ(f)`, to compare with `1 + s`.
    pub max_ratio: f64,
    /// `min (s E(f) + t ‖f‖² − |Q(f)|)` over the draws.
    pub drift_bound_slack: f64,
    pub drift_bound_passed: bool,
}

/// Checks `(1 − s) E_λ(f) ≤ A_λ(f) ≤ (1 + s) E_λ(f)` and
/// `|Q(f)| ≤ s E(f) + t ‖f‖²` on `draws` seeded uniform `f ∈ [−1, 1]^{V_n}`
/// plus the constant function.
pub fn verify_sandwich(assembly: &FormAssembly, constants: &Constants, draws: usize, seed: u64) -> SandwichReport {
    let Constants { s, t, lambda, .. } = *constants;
    let dim = assembly.dim();
    let evaluate = |f: &[f64]| {
        let e = assembly.energy_form(f, f);
        let q = assembly.drift_form(f, f);
        let nsq = assembly.norm_sq(f);
        let el = e + lambda * nsq;
        let al = e + q + lambda * nsq;
        (al / el, s * e + t * nsq - q.abs())
    };
    let mut samples: Vec<(f64, f64)> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let f = uniform_vector(&mut stream(seed, k as u64), dim, -1.0, 1.0);
            evaluate(&f)
        })
        .collect();
    samples.push(evaluate(&vec![1.0; dim]));
    let min_ratio = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let drift_bound_slack = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let eps = 1e-12;
    SandwichReport {
        level: assembly.level,
        draws,
        passed: min_ratio >= 1.0 - s - eps && max_ratio <= 1.0 + s + eps,
        min_ratio,
        max_ratio,
        drift_bound_slack,
        drift_bound_passed: drift_bound_slack >= -eps,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SdReport {
    pub level: usize,
    pub draws: usize,
    /// `min A_λ(f)` over the draws.
    pub sd1_min: f64,
    pub sd1_passed: bool,
    pub sector_empirical: f64,
    pub sector_bound: f64,
    pub sd3_passed: bool,
    /// `min A(f ∧ a, f − f ∧ a)` over the draws.
    pub sd4_min: f64,
    pub sd4_passed: bool,
    /// `min_{edges} (1 + Σ_i b_i(x)(h_i(x) − h_i(y))) = min (1 + 2η)`, the factor
    /// that decides the sign of each edge term of `A(f ∧ a, f − f ∧ a)`.
    pub markov_certificate_min: f64,
    /// `min_{edges} (1 + η)`, the factor in the jump rates.
    pub rate_certificate_min: f64,
    pub certificates_passed: bool,
}

/// Empirical checks of the semi-Dirichlet axioms on seeded random functions.
///
/// SD4 passes when `A(f ∧ a, f − f ∧ a) ≥ −sd4_tolerance` on every draw
/// ([`MARKOV_TOLERANCE`] is the usual choice). The sector bound is
/// `(1 − s)^{-1} {1 + (diam^{1/2} + 2δ) Σ_i ‖b_i‖_∞ E(h_i)^{1/2}}`.
pub fn verify_sd_axioms(
    assembly: &FormAssembly,
    net: &ConductanceNetwork,
    drift: &LevelDrift,
    constants: &Constants,
    diam: f64,
    draws: usize,
    seed: u64,
    sd4_tolerance: f64,
) -> Result<SdReport> {
    drift.check(net)?;
    let Constants { s, lambda, delta, .. } = *constants;
    let dim = assembly.dim();
    let drift_size: f64 = drift
        .sup_norms()
        .iter()
        .zip(&drift.potential_energy)
        .map(|(b, e)| b * e.sqrt())
        .sum();
    let sector_bound = (1.0 + (diam.sqrt() + 2.0 * delta) * drift_size) / (1.0 - s);

    // draw k: f, g for SD1/SD3 and f, a for SD4
    let per_draw: Vec<(f64, f64, f64)> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let f = uniform_vector(&mut rng, dim, -1.0, 1.0);
            let g = uniform_vector(&mut rng, dim, -1.0, 1.0);
            let a = uniform_vector(&mut rng, 1, 0.0, 1.0)[0];
            let af = assembly.form_lambda(&f, lambda);
            let ag = assembly.form_lambda(&g, lambda);
            let sector = assembly.form(&f, &g).abs() / (af.sqrt() * ag.sqrt());
            let low: Vec<f64> = f.iter().map(|&v| v.min(a)).collect();
            let high: Vec<f64> = f.iter().zip(&low).map(|(v, l)| v - l).collect();
            (af.min(ag), sector, assembly.form(&low, &high))
        })
        .collect();

    let sd1_min = per_draw.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let sector_empirical = per_draw.iter().map(|d| d.1).fold(0.0f64, f64::max);
    let sd4_min = per_draw.iter().map(|d| d.2).fold(f64::INFINITY, f64::min);

    let mut markov_certificate_min = f64::INFINITY;
    let mut rate_certificate_min = f64::INFINITY;
    for x in 0..net.len() {
        for &(y, _) in net.neighbours(x) {
            let grad = drift.gradient(x, y);
            markov_certificate_min = markov_certificate_min.min(1.0 + grad);
            rate_certificate_min = rate_certificate_min.min(1.0 + 0.5 * grad);
        }
    }

    Ok(SdReport {
        level: assembly.level,
        draws,
        sd1_min,
        sd1_passed: sd1_min >= 0.0,
        sector_empirical,
        sector_bound,
        sd3_passed: sector_empirical <= sector_bound,
        sd4_min,
        sd4_passed: sd4_min >= -sd4_tolerance,
        markov_certificate_min,
        rate_certificate_min,
        certificates_passed: markov_certificate_min >= 0.0 && rate_certificate_min >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn triangle() -> ConductanceNetwork {
        ConductanceNetwork::complete(vec![0, 1, 2], 1.0).unwrap()
    }

    #[test]
    fn eta_by_hand() {
        let net = triangle();
        let drift = LevelDrift::from_samples(&net, vec![vec![2.0; 3]], vec![vec![3.0, 1.0, 0.0]]).unwrap();
        let e = eta(&net, &drift, 0, 1).unwrap();
        assert_eq!(e.value, 2.0);
        assert!(e.on_edge);
        assert_eq!(eta(&net, &drift, 1, 0).unwrap().value, -2.0);
    }

    #[test]
    fn zero_drift_gives_zero_matrix_and_eta() {
        let net = triangle();
        let drift = LevelDrift::from_samples(&net, vec![vec![0.0; 3]], vec![vec![3.0, 1.0, 0.0]]).unwrap();
        assert_eq!(eta(&net, &drift, 0, 2).unwrap().value, 0.0);
        assert!(assemble_drift_matrix(&net, &drift).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_edge_is_flagged() {
        let net = ConductanceNetwork::new(vec![0, 1, 2], [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let drift = LevelDrift::from_samples(&net, vec![vec![1.0; 3]], vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let e = eta(&net, &drift, 0, 2).unwrap();
        assert!(!e.on_edge);
        assert_eq!(e.value, 0.5);
    }

    #[test]
    fn level_mismatch_rejected() {
        let net = triangle();
        let drift = LevelDrift {
            level: 1,
            b: vec![vec![1.0; 6]],
            h: vec![vec![0.0; 6]],
            potential_energy: vec![0.0],
        };
        assert!(assemble_drift_matrix(&net, &drift).is_err());
    }

    #[test]
    fn mutual_energy_identities() {
        let net = triangle();
        let h = [0.3, -1.0, 2.0];
        let e = net.quadratic_energy(&h).unwrap();
        assert_relative_eq!(discrete_mutual_energy(&net, &h, &h, &[1.0; 3]).unwrap(), 2.0 * e, epsilon = 1e-14);
        assert_eq!(discrete_mutual_energy(&net, &[5.0; 3], &h, &[0.1, 0.2, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn default_admissible_on_sierpinski() {
        let model = FractalModel::sierpinski();
        let spec = DriftSpec::default_admissible(&model, 2.0 / 3.0).unwrap();
        match spec.terms[0].b {
            Coefficient::Constant(b) => assert_relative_eq!(b, 0.5 * (0.75f64).sqrt(), epsilon = 1e-12),
            _ => panic!("expected a constant coefficient"),
        }
    }

    #[test]
    fn constants_without_drift() {
        let diam: f64 = 2.0 / 3.0;
        let delta = default_delta(diam);
        let c = select_constants(0.0, diam, delta).unwrap();
        assert_eq!(c.s, 0.5);
        assert_relative_eq!(c.lambda, 1.0 / (4.0 * delta * (diam.sqrt() + delta)));
        assert_relative_eq!(c.t, c.lambda * c.s);
    }

    #[test]
    fn lambda_decreases_in_delta() {
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let c = select_constants(0.1, 0.5, 0.05 * k as f64).unwrap();
            assert!(c.lambda < prev);
            prev = c.lambda;
        }
    }

    #[test]
    fn empty_admissible_interval_is_an_error() {
        assert!(matches!(select_constants(10.0, 1.0, 0.1), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn condition_ii_scalar_threshold() {
        // N = 1: b(x)^2 E(h) ≤ 1/diam
        let net = triangle();
        let h = vec![1.0, 0.0, 0.0];
        let drift = LevelDrift::from_samples(&net, vec![vec![0.5, -0.25, 0.1]], vec![h.clone()]).unwrap();
        let c = check_condition_ii(&net, &drift, 2.0 / 3.0).unwrap();
        assert_relative_eq!(c.max, 0.25 * 2.0, epsilon = 1e-15);
        assert_eq!(c.argmax, 0);
        assert!(c.satisfied);
    }
}
