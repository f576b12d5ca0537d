//! TOML configuration files.
//!
//! A structure file describes a p.c.f. self-similar set by its level-one data
//! plus the self-similar form on it:
//!
//! ```toml
//! symbol_count = 2
//! boundary_size = 2
//! identifications = [[[0, 1], [1, 0]]]
//! density_assumed = true
//!
//! [form]
//! resistance_scales = [0.5, 0.5]
//! ```
//!
//! See `docs/formats.md` for every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FormParameters, FractalModel};
use crate::network::ConductanceNetwork;
use crate::structure::{CellPoint, Embedding, SelfSimilarStructure};
use crate::VertexId;

/// Largest tolerated `|Tr(E¹|V_0) − E⁰|` for a configured form.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormConfig {
    pub resistance_scales: Vec<f64>,
    /// Defaults to the uniform weights `1/M`.
    #[serde(default)]
    pub measure_weights: Option<Vec<f64>>,
    /// `[x, y, c]` triples on `V_0`; defaults to the complete graph with unit
    /// conductances.
    #[serde(default)]
    pub base_conductances: Option<Vec<(VertexId, VertexId, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub symbol_count: usize,
    pub boundary_size: usize,
    /// `[[i, a], [j, b]]` means `F_i(p_a) = F_j(p_b)`. May be omitted when an
    /// embedding is given, in which case points are identified by coordinates.
    #[serde(default)]
    pub identifications: Option<Vec<[[usize; 2]; 2]>>,
    /// `[i, a, c]` means `F_i(p_a) = p_c`; defaults to `F_i(p_i) = p_i`.
    #[serde(default)]
    pub boundary_maps: Option<Vec<[usize; 3]>>,
    #[serde(default)]
    pub embedding: Option<Embedding>,
    /// Density of `V_*` in the resistance metric cannot be checked here; a
    /// configured structure records it as an assumption.
    #[serde(default)]
    pub density_assumed: bool,
    pub form: FormConfig,
}

impl StructureConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn structure(&self) -> Result<SelfSimilarStructure> {
        let (m, b) = (self.symbol_count, self.boundary_size);
        let boundary_maps = match &self.boundary_maps {
            Some(maps) => maps.iter().map(|&[i, a, c]| (i, a, c)).collect(),
            None => (0..m.min(b)).map(|i| (i, i, i)).collect(),
        };
        match (&self.identifications, &self.embedding) {
            (Some(pairs), embedding) => {
                let identifications: Vec<[CellPoint; 2]> = pairs
                    .iter()
                    .map(|&[[i, a], [j, b]]| [(i, a), (j, b)])
                    .collect();
                SelfSimilarStructure::new(m, b, identifications, boundary_maps, embedding.clone())
            }
            (None, Some(embedding)) => {
                let structure = SelfSimilarStructure::from_embedding(embedding.clone())?;
                if structure.symbol_count() != m || structure.boundary_size() != b {
                    return Err(Error::InvalidStructure(
                        "embedding disagrees with symbol_count or boundary_size".into(),
                    ));
                }
                Ok(structure)
            }
            (None, None) => Err(Error::InvalidStructure(
                "either identifications or an embedding is required".into(),
            )),
        }
    }

    /// The model, rejected unless `Tr(E¹|V_0) = E⁰` holds.
    pub fn model(&self) -> Result<FractalModel> {
        let structure = self.structure()?;
        let m = self.symbol_count;
        let ids: Vec<VertexId> = (0..self.boundary_size).collect();
        let base = match &self.form.base_conductances {
            Some(edges) => ConductanceNetwork::new(ids, edges.iter().copied())?,
            None => ConductanceNetwork::complete(ids, 1.0)?,
        };
        let form = FormParameters {
            resistance_scales: self.form.resistance_scales.clone(),
            measure_weights: self
                .form
                .measure_weights
                .clone()
                .unwrap_or_else(|| vec![1.0 / m as f64; m]),
            base,
        };
        let model = FractalModel::new(structure, form)?;
        let defect = model.compatibility_defect()?;
        if defect > COMPATIBILITY_TOLERANCE {
            return Err(Error::InvalidStructure(format!(
                "Tr(E^1|V_0) differs from E^0 by {defect:e}; adjust the resistance scales or base conductances"
            )));
        }
        Ok(model)
    }
}

/// A model together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedStructure {
    pub name: String,
    pub model: FractalModel,
    pub density_assumed: bool,
}

/// `"sg"` for the built-in gasket, otherwise a path to a structure file.
pub fn load_structure(spec: &str) -> Result<LoadedStructure> {
    if spec.eq_ignore_ascii_case("sg") {
        return Ok(LoadedStructure {
            name: "sg".into(),
            model: FractalModel::sierpinski(),
            density_assumed: false,
        });
    }
    let config = StructureConfig::load(Path::new(spec))?;
    Ok(LoadedStructure {
        name: spec.into(),
        model: config.model()?,
        density_assumed: config.density_assumed,
    })
}

/// Inclusive level lists written as `"1-5"`, `"2,4,6"` or a TOML array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    List(Vec<usize>),
    Text(String),
}

impl LevelSpec {
    pub fn levels(&self) -> Result<Vec<usize>> {
        let levels = match self {
            LevelSpec::List(v) => v.clone(),
            LevelSpec::Text(s) => parse_levels(s)?,
        };
        if levels.is_empty() || levels.contains(&0) {
            return Err(Error::InvalidArgument("levels must be nonempty and at least 1".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("levels must be strictly increasing".into()));
        }
        Ok(levels)
    }
}

pub fn parse_levels(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parse(format!("cannot read levels `{text}`"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once('-') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

/// Numerical tolerances used by the command-line runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Poisson mass dropped by the uniformization window.
    pub poisson_tail: f64,
    /// Slack for `A(f ∧ a, f − f ∧ a) ≥ 0`.
    pub sd4: f64,
    /// Random draws per semi-Dirichlet check.
    pub sd_draws: usize,
    /// Slack for `0 ≤ T_t f ≤ 1`.
    pub markov_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            poisson_tail: crate::spectral::POISSON_TAIL,
            sd4: crate::drift::MARKOV_TOLERANCE,
            sd_draws: 1000,
            markov_slack: 1e-10,
        }
    }
}

/// Run settings read from a TOML file. Every key is optional; keys present
/// here take precedence over command-line flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub structure: Option<String>,
    pub levels: Option<LevelSpec>,
    pub drift: Option<String>,
    pub function: Option<PathBuf>,
    pub alpha: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub assumption: Option<String>,
    pub reference_level: Option<usize>,
    pub delta: Option<f64>,
    pub start: Option<VertexId>,
    pub tolerances: Option<Tolerances>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INTERVAL: &str = r#"
symbol_count = 2
boundary_size = 2
identifications = [[[0, 1], [1, 0]]]
density_assumed = true

[form]
resistance_scales = [0.5, 0.5]
"#;

    #[test]
    fn interval_config_builds() {
        let cfg = StructureConfig::from_toml(INTERVAL).unwrap();
        assert!(cfg.density_assumed);
        let model = cfg.model().unwrap();
        assert_eq!(model.form.measure_weights, vec![0.5, 0.5]);
        assert_eq!(model.structure.vertex_count(3), 9);
    }

    #[test]
    fn incompatible_scales_rejected() {
        let text = INTERVAL.replace("[0.5, 0.5]", "[0.6, 0.6]");
        let err = StructureConfig::from_toml(&text).unwrap().model().unwrap_err();
        assert!(err.to_string().contains("Tr(E^1|V_0)"));
    }

    #[test]
    fn embedding_alone_suffices() {
        let text = r#"
symbol_count = 3
boundary_size = 3

[embedding]
boundary = [[0.5, 0.8660254037844386], [0.0, 0.0], [1.0, 0.0]]
maps = [
  { linear = [[0.5, 0.0], [0.0, 0.5]], offset = [0.25, 0.4330127018922193] },
  { linear = [[0.5, 0.0], [0.0, 0.5]], offset = [0.0, 0.0] },
  { linear = [[0.5, 0.0], [0.0, 0.5]], offset = [0.5, 0.0] },
]

[form]
resistance_scales = [0.6, 0.6, 0.6]
"#;
        let model = StructureConfig::from_toml(text).unwrap().model().unwrap();
        assert_eq!(model.structure.vertex_count(2), 15);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(StructureConfig::from_toml(&format!("{INTERVAL}\nbogus = 1\n")).is_err());
        assert!(RunConfig::from_toml("levls = \"1-3\"").is_err());
    }

    #[test]
    fn level_specs() {
        assert_eq!(parse_levels("1-4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_levels("2, 5").unwrap(), vec![2, 5]);
        assert!(LevelSpec::Text("0-2".into()).levels().is_err());
        assert!(LevelSpec::List(vec![3, 2]).levels().is_err());
        let run = RunConfig::from_toml("levels = [1, 2]\n[tolerances]\nsd_draws = 10\n").unwrap();
        assert_eq!(run.levels.unwrap().levels().unwrap(), vec![1, 2]);
        let tol = run.tolerances.unwrap();
        assert_eq!(tol.sd_draws, 10);
        assert_eq!(tol.sd4, Tolerances::default().sd4);
    }
}
