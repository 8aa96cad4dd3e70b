//! Solver reports and their TOML form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::controller::SolverConfig;
use crate::error::{Error, Result};
use crate::metrics::IterationRecord;
use crate::model::InstanceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    IterationBudget,
}

/// Resolved configuration of the algorithm that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmConfig {
    Adaptive(SolverConfig),
    Classic(BaselineConfig),
    Randomized(BaselineConfig),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Adaptive(_) => "adaptive",
            AlgorithmConfig::Classic(_) => "classic",
            AlgorithmConfig::Randomized(_) => "randomized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: String,
    pub instance_name: String,
    pub instance_hash: String,
    pub seed: u64,
    pub termination: TerminationReason,
    pub iterations: usize,
    pub qps_cumulative: u64,
    pub sample_size: usize,
    pub xbar: Vec<f64>,
    pub duality_gap: f64,
    /// `1 + |f(x̄)|` on the final sample; the gap is judged relative to it.
    pub scale_constant: f64,
    pub lambda_sum_norm: f64,
    pub lambda: Vec<Vec<f64>>,
    pub config: AlgorithmConfig,
    pub history: Vec<IterationRecord>,
}

impl SolveReport {
    pub fn new(
        instance: &InstanceSpec,
        seed: u64,
        config: AlgorithmConfig,
        termination: TerminationReason,
        xbar: Vec<f64>,
        lambda: Vec<Vec<f64>>,
        history: Vec<IterationRecord>,
    ) -> Self {
        let last = history.last();
        SolveReport {
            algorithm: config.name().to_string(),
            instance_name: instance.name.clone(),
            instance_hash: instance.content_hash(),
            seed,
            termination,
            iterations: last.map_or(0, |r| r.k),
            qps_cumulative: last.map_or(0, |r| r.qps_cumulative),
            sample_size: lambda.len(),
            xbar,
            duality_gap: last.map_or(f64::NAN, |r| r.duality_gap),
            scale_constant: 1.0 + last.map_or(0.0, |r| r.primal_value.abs()),
            lambda_sum_norm: last.map_or(0.0, |r| r.lambda_sum_norm),
            lambda,
            config,
            history,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("report serializes to TOML")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "report.toml".into(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
