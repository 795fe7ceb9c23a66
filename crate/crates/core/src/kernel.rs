//! Kernel functions `K(x_i, x_j)`.

use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, PointSet};
use crate::error::{invalid, Result};

/// A kernel family together with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `exp(-|x - y|^2 / sigma^2)`.
    GaussianFixed { sigma: f64 },
    /// `exp(-|x - y|^2 / sigma_j^2)` with the bandwidth taken from the
    /// source point `j`. Not symmetric.
    GaussianVariable { sigmas: Vec<f64> },
    /// `1 / (|x - y| + epsilon)`. With `epsilon == 0` the value at zero
    /// distance is defined as 0, which drops the singular self term.
    LaplaceReciprocal { epsilon: f64 },
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let k = KernelSpec::GaussianFixed { sigma };
        k.validate(None)?;
        Ok(k)
    }

    pub fn gaussian_variable(sigmas: Vec<f64>) -> Result<Self> {
        let k = KernelSpec::GaussianVariable { sigmas };
        k.validate(None)?;
        Ok(k)
    }

    pub fn laplace(epsilon: f64) -> Result<Self> {
        let k = KernelSpec::LaplaceReciprocal { epsilon };
        k.validate(None)?;
        Ok(k)
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::GaussianFixed { .. } => "gaussian-fixed",
            KernelSpec::GaussianVariable { .. } => "gaussian-variable",
            KernelSpec::LaplaceReciprocal { .. } => "laplace-reciprocal",
        }
    }

    /// Checks parameter ranges, and the bandwidth count when `n` is given.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        match self {
            KernelSpec::GaussianFixed { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return invalid(format!("sigma must be positive and finite, got {sigma}"));
                }
            }
            KernelSpec::GaussianVariable { sigmas } => {
                if let Some(j) = sigmas.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
                    return invalid(format!("sigma[{j}] = {} is not positive", sigmas[j]));
                }
                if let Some(n) = n {
                    if sigmas.len() != n {
                        return invalid(format!("{} bandwidths for {n} points", sigmas.len()));
                    }
                }
            }
            KernelSpec::LaplaceReciprocal { epsilon } => {
                if !(epsilon.is_finite() && *epsilon >= 0.0) {
                    return invalid(format!("epsilon must be >= 0, got {epsilon}"));
                }
            }
        }
        Ok(())
    }

    /// Kernel value for a squared distance; the caller guarantees a valid
    /// `source_index` for the variable-bandwidth family.
    #[inline(always)]
    pub(crate) fn at_sq_dist(&self, r2: f64, source_index: usize) -> f64 {
        match self {
            KernelSpec::GaussianFixed { sigma } => (-r2 / (sigma * sigma)).exp(),
            KernelSpec::GaussianVariable { sigmas } => {
                let s = sigmas[source_index];
                (-r2 / (s * s)).exp()
            }
            KernelSpec::LaplaceReciprocal { epsilon } => {
                if r2 == 0.0 && *epsilon == 0.0 {
                    0.0
                } else {
                    1.0 / (r2.sqrt() + epsilon)
                }
            }
        }
    }

    #[inline(always)]
    pub(crate) fn eval_unchecked(&self, target: &[f64], source: &[f64], source_index: usize) -> f64 {
        self.at_sq_dist(sq_dist(target, source), source_index)
    }

    /// `K(target, source)`; `source_index` selects the bandwidth of the
    /// variable-bandwidth family and is ignored otherwise.
    pub fn eval(&self, target: &[f64], source: &[f64], source_index: usize) -> Result<f64> {
        if target.len() != source.len() {
            return invalid(format!(
                "dimension mismatch: target has {}, source has {}",
                target.len(),
                source.len()
            ));
        }
        if let KernelSpec::GaussianVariable { sigmas } = self {
            if source_index >= sigmas.len() {
                return invalid(format!(
                    "source index {source_index} has no bandwidth ({} given)",
                    sigmas.len()
                ));
            }
        }
        Ok(self.eval_unchecked(target, source, source_index))
    }

    /// Evaluates `K(target, x_j)` for every `j` in `source_indices`.
    pub fn row(&self, target: &[f64], sources: &PointSet, source_indices: &[usize]) -> Result<Vec<f64>> {
        if target.len() != sources.dim() {
            return invalid(format!(
                "dimension mismatch: target has {}, sources have {}",
                target.len(),
                sources.dim()
            ));
        }
        let limit = match self {
            KernelSpec::GaussianVariable { sigmas } => sigmas.len().min(sources.len()),
            _ => sources.len(),
        };
        if let Some(&j) = source_indices.iter().find(|&&j| j >= limit) {
            return invalid(format!("source index {j} out of range"));
        }
        Ok(source_indices
            .iter()
            .map(|&j| self.eval_unchecked(target, sources.row(j), j))
            .collect())
    }
}
