use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ExplorationSettings;
use crate::parallel::Deadline;
use crate::limit_tree::{LimitSampler, RegimeParams, DEFAULT_BUDGET, DEFAULT_HORIZON, DEFAULT_NODE_CAP};
use crate::local_limit::{CodeOptions, ConvergenceSettings, HistogramMeta, DEFAULT_SEARCH_CAP, DEFAULT_VERTEX_CAP};
use crate::models::{
    derive, size_biased, DegreeModel, DegreeSpec, DerivedQuantities, OffspringModel, WeightModel, DEFAULT_TOL,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    #[default]
    Malthusian,
    Explosive,
}

impl RegimeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeKind::Malthusian => "malthusian",
            RegimeKind::Explosive => "explosive",
        }
    }
}

mod defaults {
    pub fn n_grid() -> Vec<usize> {
        vec![1000]
    }
    pub fn radius() -> u32 {
        1
    }
    pub fn samples() -> usize {
        1000
    }
    pub fn graphs_per_point() -> usize {
        20
    }
    pub fn eps() -> f64 {
        0.5
    }
    pub fn budget() -> usize {
        super::DEFAULT_BUDGET
    }
    pub fn horizon() -> u32 {
        super::DEFAULT_HORIZON
    }
    pub fn yes() -> bool {
        true
    }
    pub fn bootstrap() -> usize {
        200
    }
    pub fn vertex_cap() -> usize {
        super::DEFAULT_VERTEX_CAP
    }
    pub fn search_cap() -> usize {
        super::DEFAULT_SEARCH_CAP
    }
    pub fn node_cap() -> usize {
        super::DEFAULT_NODE_CAP
    }
    pub fn tol() -> f64 {
        super::DEFAULT_TOL
    }
}

/// One experiment, as read from a JSON file. Only `degree` and `weight` are
/// required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub degree: DegreeSpec,
    pub weight: WeightModel,
    #[serde(default)]
    pub regime: RegimeKind,
    /// The user vouches that the models explode; nothing here can check it.
    #[serde(default)]
    pub explosive_attested: bool,
    #[serde(default = "defaults::n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "defaults::radius")]
    pub radius: u32,
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::graphs_per_point")]
    pub graphs_per_point: usize,
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    /// Exploration steps, and the birth budget of explosive limit trees.
    #[serde(default = "defaults::budget")]
    pub budget: usize,
    #[serde(default = "defaults::horizon")]
    pub horizon: u32,
    #[serde(default)]
    pub weight_bins: u32,
    #[serde(default = "defaults::yes")]
    pub include_colour: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "defaults::bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "defaults::vertex_cap")]
    pub vertex_cap: usize,
    #[serde(default = "defaults::search_cap")]
    pub search_cap: usize,
    #[serde(default = "defaults::node_cap")]
    pub node_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_runtime_secs: Option<f64>,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn new(degree: DegreeSpec, weight: WeightModel) -> Self {
        serde_json::from_value(serde_json::json!({ "degree": degree, "weight": weight }))
            .expect("defaults deserialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(vec![format!("malformed config: {e}")]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Every invariant the config breaks; empty when it can be run.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_grid.is_empty() {
            v.push("n_grid must be nonempty".to_string());
        }
        if self.n_grid.contains(&0) {
            v.push("n_grid entries must be positive".to_string());
        }
        for (name, value) in [
            ("samples", self.samples),
            ("graphs_per_point", self.graphs_per_point),
            ("budget", self.budget),
            ("bootstrap", self.bootstrap),
            ("vertex_cap", self.vertex_cap),
            ("search_cap", self.search_cap),
            ("node_cap", self.node_cap),
        ] {
            if value == 0 {
                v.push(format!("{name} must be at least 1"));
            }
        }
        if self.horizon == 0 {
            v.push("horizon must be at least 1".to_string());
        }
        if self.workers == Some(0) {
            v.push("workers must be at least 1".to_string());
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            v.push("eps must be positive".to_string());
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            v.push("tol must be positive".to_string());
        }
        if let Some(t) = self.max_runtime_secs {
            if !(t.is_finite() && t > 0.0) {
                v.push("max_runtime_secs must be positive".to_string());
            }
        }
        if let Err(e) = self.weight.validate() {
            v.push(format!("invalid weight law: {e}"));
        }
        let degree = match DegreeModel::new(self.degree.clone()) {
            Ok(d) => d,
            Err(e) => {
                v.push(format!("invalid degree law: {e}"));
                return v;
            }
        };
        let nu = size_biased(&degree).map(|off| off.mean());
        match nu {
            Ok(nu) if nu > 1.0 => {
                if !nu.is_finite() && self.regime == RegimeKind::Malthusian {
                    v.push("malthusian regime requires a finite nu".to_string());
                }
            }
            Ok(nu) => v.push(format!("not supercritical (nu = {nu})")),
            Err(e) => v.push(format!("not supercritical ({e})")),
        }
        match self.regime {
            RegimeKind::Malthusian => {
                if !degree.is_regular() {
                    v.push("malthusian regime requires a regular degree law".to_string());
                }
            }
            RegimeKind::Explosive => {
                if !self.explosive_attested {
                    v.push("explosive regime requires \"explosive_attested\": true".to_string());
                }
            }
        }
        v
    }

    /// Validate and build the models.
    pub fn prepare(&self) -> Result<Prepared> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(Error::Config(violations));
        }
        let degree = DegreeModel::new(self.degree.clone())?;
        let offspring = size_biased(&degree)?;
        let derived = derive(&degree, &self.weight, self.tol)?;
        let params = match self.regime {
            RegimeKind::Malthusian => RegimeParams::Malthusian {
                lambda: derived.lambda.ok_or(Error::NotSupercritical)?,
                horizon: self.horizon,
            },
            RegimeKind::Explosive => RegimeParams::Explosive { budget: self.budget },
        };
        Ok(Prepared {
            config: self.clone(),
            degree,
            offspring,
            derived,
            params,
        })
    }
}

/// A validated config with its models built.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub degree: DegreeModel,
    pub offspring: OffspringModel,
    pub derived: DerivedQuantities,
    pub params: RegimeParams,
}

impl Prepared {
    pub fn code_options(&self) -> CodeOptions {
        let c = &self.config;
        CodeOptions {
            include_colour: c.include_colour,
            vertex_cap: c.vertex_cap,
            search_cap: c.search_cap,
            ..CodeOptions::default()
        }
        .with_bins(c.weight_bins, c.weight)
    }

    pub fn limit_sampler(&self) -> LimitSampler {
        LimitSampler {
            degree: self.degree.clone(),
            offspring: self.offspring.clone(),
            weights: self.config.weight,
            zeta: self.derived.zeta,
            params: self.params,
            node_cap: self.config.node_cap,
            vertex_cap: self.config.vertex_cap,
        }
    }

    pub fn meta(&self, n: Option<usize>, code: &CodeOptions) -> HistogramMeta {
        HistogramMeta {
            radius: self.config.radius,
            n,
            regime: self.config.regime.as_str().to_string(),
            seed: self.config.seed,
            weight_bins: code.weight_bins,
            bin_edges: code.bin_edges(),
            include_colour: code.include_colour,
        }
    }

    pub fn deadline(&self) -> Deadline {
        Deadline::after(self.config.max_runtime_secs.map(Duration::from_secs_f64))
    }

    pub fn convergence_settings(&self, workers: usize, deadline: Deadline) -> ConvergenceSettings {
        let c = &self.config;
        ConvergenceSettings {
            degree: self.degree.clone(),
            weights: c.weight,
            limit: self.limit_sampler(),
            radius: c.radius,
            n_grid: c.n_grid.clone(),
            samples: c.samples,
            graphs_per_point: c.graphs_per_point,
            code: self.code_options(),
            seed: c.seed,
            workers,
            bootstrap: c.bootstrap,
            black_frac_expected: 1.0 - self.derived.zeta * self.derived.zeta,
            regime: c.regime.as_str().to_string(),
            deadline,
        }
    }

    /// Exploration settings for graphs of size `n`; codes ignore colour,
    /// since explored subgraphs carry none.
    pub fn exploration_settings(&self, n: usize, workers: usize, deadline: Deadline) -> ExplorationSettings {
        let c = &self.config;
        ExplorationSettings {
            degree: self.degree.clone(),
            offspring: self.offspring.clone(),
            weights: c.weight,
            n,
            radius: c.radius,
            steps: c.budget,
            eps: c.eps,
            samples: c.samples,
            graphs: c.graphs_per_point,
            seed: c.seed,
            workers,
            code: CodeOptions {
                include_colour: false,
                ..self.code_options()
            },
            node_cap: c.node_cap,
            deadline,
            trace: true,
        }
    }
}
