//! Experiment configuration read from JSON.

use serde::{Deserialize, Serialize};

use crate::directions::{carbery_set, lacunary2d, nsw_set, slopes2d, uniform_set, DirectionSet};
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::normlab::EstimatorConfig;
use crate::symbols::Convention;
use crate::weights::WeightFamily;

/// Direction set generators, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Lacunary2d { order: u32, depth: usize },
    /// Slopes 2^{−k}, k = 1..count.
    Slopes { count: usize },
    Nsw { lambda: f64, alphas: Vec<f64>, count: usize },
    Carbery { n: usize, lo: i32, hi: i32 },
    Uniform { n: usize },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<DirectionSet> {
        match self {
            GeneratorSpec::Lacunary2d { order, depth } => lacunary2d(*order, *depth),
            GeneratorSpec::Slopes { count } => slopes2d(*count),
            GeneratorSpec::Nsw { lambda, alphas, count } => nsw_set(*lambda, alphas, *count),
            GeneratorSpec::Carbery { n, lo, hi } => carbery_set(*n, *lo, *hi),
            GeneratorSpec::Uniform { n } => uniform_set(*n),
        }
    }
}

fn default_grid() -> Grid {
    Grid::unit(2, 64).expect("valid default grid")
}

fn default_n_list() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

fn default_generator() -> GeneratorSpec {
    GeneratorSpec::Slopes { count: 64 }
}

fn default_iters() -> usize {
    EstimatorConfig::default().iters
}

fn default_restarts() -> usize {
    EstimatorConfig::default().restarts
}

fn default_tol() -> f64 {
    EstimatorConfig::default().tol
}

fn default_convention() -> Convention {
    Convention::Indicator
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CexConfig {
    pub d: usize,
    pub n_list: Vec<usize>,
    pub side: usize,
}

impl Default for CexConfig {
    fn default() -> Self {
        CexConfig { d: 2, n_list: vec![4, 8], side: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_generator")]
    pub generator: GeneratorSpec,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_grid")]
    pub grid: Grid,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_convention")]
    pub convention: Convention,
    #[serde(default)]
    pub weights: Option<WeightFamily>,
    #[serde(default)]
    pub cex: Option<CexConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return invalid("N list must be nonempty and positive");
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("N list must be strictly increasing");
        }
        if self.restarts == 0 || self.iters == 0 {
            return invalid("iters and restarts must be positive");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return invalid("tol must be positive");
        }
        Ok(())
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig { iters: self.iters, restarts: self.restarts, tol: self.tol, seed: self.seed }
    }
}
