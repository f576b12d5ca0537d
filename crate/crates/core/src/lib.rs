//! Drift-perturbed semi-Dirichlet forms on finite approximations of
//! post-critically finite self-similar sets.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod drift;
pub mod error;
pub mod generator;
pub mod model;
pub mod network;
pub mod sampling;
pub mod spectral;
pub mod structure;
pub mod textio;

pub use error::{Error, Result};
pub use model::{FormParameters, FractalModel, Level};
pub use network::{assemble_self_similar, ConductanceNetwork, VertexFunction};
pub use structure::{build_sierpinski_structure, LevelComplex, SelfSimilarStructure};

/// Canonical vertex identifier. On level `n` the ids are exactly `0..|V_n|`.
pub type VertexId = usize;
