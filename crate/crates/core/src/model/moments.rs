use nalgebra::{DMatrix, DVector};

use super::VariableId;
use crate::error::{Error, Result};
use crate::linalg;

/// Mean vector and covariance matrix over an ordered set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub variables: Vec<VariableId>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.as_str() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn mean_of(&self, name: &str) -> Result<f64> {
        Ok(self.mean[self.index_of(name)?])
    }

    pub fn variance_of(&self, name: &str) -> Result<f64> {
        let i = self.index_of(name)?;
        Ok(self.cov[(i, i)])
    }

    /// Moments of the listed variables, in the order given.
    pub fn marginal<S: AsRef<str>>(&self, names: &[S]) -> Result<GaussianMoments> {
        let idx = names
            .iter()
            .map(|n| self.index_of(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianMoments {
            variables: idx.iter().map(|&i| self.variables[i].clone()).collect(),
            mean: linalg::select_vec(&self.mean, &idx),
            cov: linalg::select(&self.cov, &idx, &idx),
        })
    }

    /// Largest entrywise difference in mean and covariance; `inf` when the
    /// variable lists differ.
    pub fn max_abs_diff(&self, other: &GaussianMoments) -> f64 {
        if self.variables != other.variables {
            return f64::INFINITY;
        }
        let dm = (&self.mean - &other.mean).amax();
        let dc = (&self.cov - &other.cov).amax();
        dm.max(dc)
    }
}
