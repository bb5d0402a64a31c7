//! Experiment configuration files. Every file carries a `schema_version`
//! and rejects unknown keys so typos fail loudly instead of corrupting a
//! sweep. All randomness is pinned by explicit seeds.

use ilo_core::generator::{LayeredGenerator, SynthesisSpec};
use ilo_core::operators::{NoiseSpec, OperatorSpec};
use ilo_core::solver::SolverConfig;
use ilo_core::theory::TheoryParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::AppError;

pub const SCHEMA_VERSION: u32 = 1;

/// Where the generator comes from: a model file or a synthesis recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Path(PathBuf),
    Synthesize(SynthesisSpec),
}

impl ModelSource {
    pub fn load(&self) -> Result<LayeredGenerator, AppError> {
        match self {
            ModelSource::Path(p) => {
                if !p.exists() {
                    return Err(AppError::Config(format!(
                        "model file not found: {}",
                        p.display()
                    )));
                }
                LayeredGenerator::load(p)
                    .map_err(|e| AppError::Config(format!("model file {}: {e}", p.display())))
            }
            ModelSource::Synthesize(spec) => LayeredGenerator::synthesize(spec)
                .map_err(|e| AppError::Config(format!("model synthesis: {e}"))),
        }
    }
}

/// How the hidden signal is planted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// x = G(z*) with z* in the input ball.
    InRange { seed: u64 },
    /// x = G2(G1(z*) + v) with an s-sparse deviation of l1 mass
    /// `l1_budget_fraction`·r2 at the planted split.
    ExtendedRange {
        seed: u64,
        sparsity: usize,
        l1_budget_fraction: f64,
        /// Defaults to the first solver split.
        #[serde(default)]
        split_index: Option<usize>,
    },
}

impl PlantSpec {
    pub fn seed(&self) -> u64 {
        match self {
            PlantSpec::InRange { seed } => *seed,
            PlantSpec::ExtendedRange { seed, .. } => *seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> PlantSpec {
        let mut out = self.clone();
        match &mut out {
            PlantSpec::InRange { seed: s } => *s = seed,
            PlantSpec::ExtendedRange { seed: s, .. } => *s = seed,
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Csgm,
    Ilo,
}


/// Config for `ilo solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema_version: u32,
    pub model: ModelSource,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub plant: PlantSpec,
    pub method: Method,
    #[serde(default)]
    pub split_indices: Vec<usize>,
    pub solver: SolverConfig,
}

/// Sweep axis for `ilo bench`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// "m" (measurement rows) or "keep_prob" (randomized inpainting).
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Config for `ilo bench`: paired CSGM/ILO trials over a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub schema_version: u32,
    pub model: ModelSource,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub plant: PlantSpec,
    #[serde(default)]
    pub split_indices: Vec<usize>,
    pub solver: SolverConfig,
    pub trials: usize,
    pub sweep: Sweep,
}

/// Config for `ilo gen-model`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenModelConfig {
    pub schema_version: u32,
    pub synthesize: SynthesisSpec,
}

/// Grid section of `ilo theory-table`: cartesian product of the axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsGrid {
    pub d: Vec<usize>,
    pub r: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityGrid {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub gamma: f64,
    #[serde(default = "one")]
    pub c: f64,
    pub l1: f64,
    pub l2: f64,
    pub r1: f64,
    pub big_k: Vec<f64>,
    pub delta: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryTableConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub bounds: Option<BoundsGrid>,
    #[serde(default)]
    pub complexity: Option<ComplexityGrid>,
    /// Optional chained-cover table for one parameter point.
    #[serde(default)]
    pub chain: Option<TheoryParams>,
}

/// Config for `ilo srec-test`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrecConfig {
    pub schema_version: u32,
    pub model: ModelSource,
    pub split_index: usize,
    /// K, δ, γ, C; dims and Lipschitz bounds come from the model.
    pub big_k: f64,
    pub delta: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub c: f64,
    pub r1: f64,
    pub pairs: usize,
    pub matrix_draws: usize,
    #[serde(default = "default_sparsity")]
    pub sparsity: usize,
    /// Which ensembles to certify.
    pub ensembles: Vec<String>,
    /// Inflate the circulant ensemble's m by log⁴(n), capped at n.
    #[serde(default = "yes")]
    pub circulant_log4_inflation: bool,
    pub seed: u64,
}

fn default_sparsity() -> usize {
    3
}

fn yes() -> bool {
    true
}

pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: T = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("config {}: {e}", path.display())))?;
    Ok(value)
}

pub fn check_schema_version(version: u32, path: &Path) -> Result<(), AppError> {
    if version != SCHEMA_VERSION {
        return Err(AppError::Config(format!(
            "config {}: schema_version {} unsupported (expected {SCHEMA_VERSION})",
            path.display(),
            version
        )));
    }
    Ok(())
}
