//! A self-similar structure together with its renormalised energies and
//! reference measures, i.e. everything needed to produce level `n`.

use crate::error::{Error, Result};
use crate::network::{assemble_self_similar, ConductanceNetwork};
use crate::structure::{build_sierpinski_structure, LevelComplex, SelfSimilarStructure};

/// Renormalisation data: resistance scales `r_i`, measure weights `θ_i` and the
/// base network `E^0` on `V_0`.
#[derive(Debug, Clone)]
pub struct FormParameters {
    pub resistance_scales: Vec<f64>,
    pub measure_weights: Vec<f64>,
    pub base: ConductanceNetwork,
}

#[derive(Debug, Clone)]
pub struct FractalModel {
    pub structure: SelfSimilarStructure,
    pub form: FormParameters,
}

/// One approximation level: `V_n`, `E^n` and `μ_n`.
#[derive(Debug, Clone)]
pub struct Level {
    pub complex: LevelComplex,
    pub network: ConductanceNetwork,
    pub measure: Vec<f64>,
}

impl Level {
    pub fn n(&self) -> usize {
        self.complex.level
    }

    pub fn vertex_count(&self) -> usize {
        self.complex.vertex_count
    }
}

impl FractalModel {
    pub fn new(structure: SelfSimilarStructure, form: FormParameters) -> Result<Self> {
        let m = structure.symbol_count();
        if form.resistance_scales.len() != m || form.measure_weights.len() != m {
            return Err(Error::InvalidStructure(format!(
                "expected {m} resistance scales and measure weights, got {} and {}",
                form.resistance_scales.len(),
                form.measure_weights.len()
            )));
        }
        if form.resistance_scales.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::InvalidStructure("resistance scales must lie in (0, 1)".into()));
        }
        if form.measure_weights.iter().any(|&t| !(t > 0.0 && t < 1.0))
            || (form.measure_weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidStructure(
                "measure weights must lie in (0, 1) and sum to 1".into(),
            ));
        }
        let b = structure.boundary_size();
        if form.base.len() != b || form.base.ids().iter().enumerate().any(|(k, &id)| k != id) {
            return Err(Error::InvalidStructure(format!(
                "base network must live on the boundary ids 0..{b}"
            )));
        }
        if !form.base.is_connected() {
            return Err(Error::InvalidStructure("base network is disconnected".into()));
        }
        Ok(Self { structure, form })
    }

    /// The Sierpiński gasket with `r_i = 3/5`, `θ_i = 1/3` and unit `c_0`.
    pub fn sierpinski() -> Self {
        let base = ConductanceNetwork::complete(vec![0, 1, 2], 1.0).expect("unit triangle");
        Self::new(
            build_sierpinski_structure(),
            FormParameters {
                resistance_scales: vec![3.0 / 5.0; 3],
                measure_weights: vec![1.0 / 3.0; 3],
                base,
            },
        )
        .expect("standard Sierpinski gasket data")
    }

    pub fn level(&self, n: usize) -> Result<Level> {
        let complex = self.structure.build_level(n);
        let network = assemble_self_similar(&self.form.base, &self.form.resistance_scales, &complex)?;
        let measure = level_measure(&complex, &self.form.measure_weights);
        Ok(Level {
            complex,
            network,
            measure,
        })
    }

    /// Largest entrywise deviation between `Tr(E^1 | V_0)` and `E^0`. The
    /// energies `E^n` form a compatible sequence exactly when this vanishes.
    pub fn compatibility_defect(&self) -> Result<f64> {
        let level1 = self.level(1)?;
        let b = self.structure.boundary_size();
        let boundary: Vec<usize> = (0..b).collect();
        let traced = level1.network.trace(&boundary)?;
        let mut worst = 0.0f64;
        for x in 0..b {
            for y in x + 1..b {
                let d = traced.conductance_at(x, y) - self.form.base.conductance_at(x, y);
                worst = worst.max(d.abs());
            }
        }
        Ok(worst)
    }
}

/// `μ_n(x) = |V_0|^{-1} Σ_{w ∈ W_n} θ_w 1_{F_w(V_0)}(x)`.
pub fn level_measure(complex: &LevelComplex, weights: &[f64]) -> Vec<f64> {
    let mut mu = vec![0.0; complex.vertex_count];
    for cell in &complex.cells {
        let theta: f64 = cell.word.iter().map(|&i| weights[i]).product();
        let share = theta / cell.boundary.len() as f64;
        for &x in &cell.boundary {
            mu[x] += share;
        }
    }
    mu
}
