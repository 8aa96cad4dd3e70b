use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::family::FunctionFamily;
use crate::error::{Error, Result};

/// Axis-aligned feasible region `X = ∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn clamped(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.clamp(&mut out);
        out
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((v, lo), hi)| *v >= lo - tol && *v <= hi + tol)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std_dev: f64 },
}

/// Law of the random realization `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Finitely many outcomes, sampled with replacement.
    FiniteSet {
        scenarios: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// Independent coordinates.
    Generator { components: Vec<Component> },
}

impl DistributionSpec {
    /// Dimension of a realization.
    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::FiniteSet { scenarios, .. } => scenarios.first().map_or(0, Vec::len),
            DistributionSpec::Generator { components } => components.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::FiniteSet { scenarios, weights } => {
                if scenarios.is_empty() {
                    return Err(Error::validation("distribution.scenarios", "must not be empty"));
                }
                if weights.len() != scenarios.len() {
                    return Err(Error::validation(
                        "distribution.weights",
                        format!("expected {} weights, found {}", scenarios.len(), weights.len()),
                    ));
                }
                let m = scenarios[0].len();
                if m == 0 {
                    return Err(Error::validation("distribution.scenarios", "realizations must be non-empty"));
                }
                for (i, s) in scenarios.iter().enumerate() {
                    if s.len() != m {
                        return Err(Error::validation(
                            format!("distribution.scenarios[{i}]"),
                            format!("expected length {m}, found {}", s.len()),
                        ));
                    }
                    if s.iter().any(|v| !v.is_finite()) {
                        return Err(Error::validation(format!("distribution.scenarios[{i}]"), "entries must be finite"));
                    }
                }
                if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::validation(
                        format!("distribution.weights[{i}]"),
                        "weights must be finite and nonnegative",
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::validation(
                        "distribution.weights",
                        format!("weights sum to {total}, expected 1"),
                    ));
                }
            }
            DistributionSpec::Generator { components } => {
                if components.is_empty() {
                    return Err(Error::validation("distribution.components", "must not be empty"));
                }
                for (i, c) in components.iter().enumerate() {
                    let ok = match *c {
                        Component::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
                        Component::Normal { mean, std_dev } => mean.is_finite() && std_dev.is_finite() && std_dev >= 0.0,
                    };
                    if !ok {
                        return Err(Error::validation(
                            format!("distribution.components[{i}]"),
                            "need finite parameters with low < high (uniform) or std_dev >= 0 (normal)",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A convex stochastic program `min_{x∈X} E[h(x, ω)]` over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub name: String,
    pub n: usize,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub seed: u64,
    pub family: FunctionFamily,
    pub distribution: DistributionSpec,
}

impl InstanceSpec {
    pub fn bounds(&self) -> BoxBounds {
        BoxBounds {
            lo: self.box_lo.clone(),
            hi: self.box_hi.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n", "must be at least 1"));
        }
        for (field, v) in [("box_lo", &self.box_lo), ("box_hi", &self.box_hi)] {
            if v.len() != self.n {
                return Err(Error::validation(
                    field,
                    format!("expected length n = {}, found {}", self.n, v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(field, "entries must be finite"));
            }
        }
        if let Some(i) = (0..self.n).find(|&i| self.box_lo[i] >= self.box_hi[i]) {
            return Err(Error::validation(
                format!("box_lo[{i}]"),
                format!("box_lo ({}) must be below box_hi ({})", self.box_lo[i], self.box_hi[i]),
            ));
        }
        self.distribution.validate()?;
        self.family.validate(self.n, self.distribution.dim())
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let spec: InstanceSpec = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("instance serializes to TOML")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<InstanceSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    InstanceSpec::from_toml_str(&text, path)
}
