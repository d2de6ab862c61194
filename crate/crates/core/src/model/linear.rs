use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::VariableId;
use crate::error::{Error, Result};
use crate::linalg;

/// Numerical slack used by validation and the Gaussian engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Symmetry and PSD slack, relative to the largest absolute covariance entry.
    pub sym_rel: f64,
    /// Smallest accepted reciprocal condition number for `I - B` and `I - B_yy`.
    pub rcond_floor: f64,
    /// Eigenvalues of an observed covariance block below this fraction of the
    /// largest one are dropped by the pseudo-inverse.
    pub pinv_rel: f64,
    /// Largest observation residual outside the observable range, relative to
    /// the observation scale, before evidence is declared contradictory.
    pub residual_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym_rel: 1e-9,
            rcond_floor: 1e-12,
            pinv_rel: 1e-10,
            residual_rel: 1e-6,
        }
    }
}

/// Linear structural equation model `x = Bx + ε`, `ε ~ N(μ_ε, Σ_εε)`.
///
/// Row `i` of `coeff` holds the equation of variable `i`: entry `(i, j)` is
/// the coefficient of variable `j` on its right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    variables: Vec<VariableId>,
    coeff: DMatrix<f64>,
    dist_mean: DVector<f64>,
    dist_cov: DMatrix<f64>,
}

impl LinearScm {
    /// Checks names and shapes only; numerical assumptions are left to
    /// [`validate_linear`].
    pub fn new(
        variables: Vec<VariableId>,
        coeff: DMatrix<f64>,
        dist_mean: DVector<f64>,
        dist_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let n = variables.len();
        let mut seen = BTreeSet::new();
        for v in &variables {
            if !seen.insert(v.as_str()) {
                return Err(Error::DuplicateVariable(v.to_string()));
            }
        }
        if coeff.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "coefficient matrix is {}x{}, expected {n}x{n}",
                coeff.nrows(),
                coeff.ncols()
            )));
        }
        if dist_mean.len() != n {
            return Err(Error::Dimension(format!(
                "disturbance mean has length {}, expected {n}",
                dist_mean.len()
            )));
        }
        if dist_cov.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "disturbance covariance is {}x{}, expected {n}x{n}",
                dist_cov.nrows(),
                dist_cov.ncols()
            )));
        }
        let finite = coeff
            .iter()
            .chain(dist_mean.iter())
            .chain(dist_cov.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("parameters must be finite".into()));
        }
        Ok(Self {
            variables,
            coeff,
            dist_mean,
            dist_cov,
        })
    }

    pub fn variables(&self) -> &[VariableId] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn coeff(&self) -> &DMatrix<f64> {
        &self.coeff
    }

    pub fn dist_mean(&self) -> &DVector<f64> {
        &self.dist_mean
    }

    pub fn dist_cov(&self) -> &DMatrix<f64> {
        &self.dist_cov
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.as_str() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Indices of `names`, deduplicated and sorted into model order.
    pub fn indices<I, S>(&self, names: I) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut idx = BTreeSet::new();
        for name in names {
            idx.insert(self.index_of(name.as_ref())?);
        }
        Ok(idx.into_iter().collect())
    }
}

/// Outcome of [`validate_linear`]. Not an error: callers decide what to do
/// with a failing model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    /// Largest `|Σ_ij - Σ_ji|` of the disturbance covariance.
    pub symmetry_defect: f64,
    /// Smallest eigenvalue of the (symmetrized) disturbance covariance.
    pub min_eigenvalue: f64,
    /// 1-norm reciprocal condition number of `I - B`.
    pub rcond: f64,
    pub self_loops: Vec<VariableId>,
    pub diagnostics: Vec<String>,
}

impl ValidationReport {
    pub fn nonsingular(&self, tol: &Tolerances) -> bool {
        self.rcond >= tol.rcond_floor
    }
}

pub fn validate_linear(model: &LinearScm) -> ValidationReport {
    validate_linear_with(model, &Tolerances::default())
}

pub fn validate_linear_with(model: &LinearScm, tol: &Tolerances) -> ValidationReport {
    analyze(model, tol).0
}

/// Validation plus `S = (I - B)^-1` when it exists.
pub(crate) fn analyze(
    model: &LinearScm,
    tol: &Tolerances,
) -> (ValidationReport, Option<DMatrix<f64>>) {
    let n = model.len();
    let cov = model.dist_cov();
    let scale = linalg::max_abs(cov);
    let slack = tol.sym_rel * scale;
    let symmetry_defect = linalg::asymmetry(cov);
    let min_eigenvalue = linalg::min_eigenvalue(cov);
    let mut diagnostics = Vec::new();

    if symmetry_defect > slack {
        diagnostics.push(format!(
            "disturbance covariance is not symmetric (defect {symmetry_defect:e} exceeds {slack:e})"
        ));
    }
    if n > 0 && min_eigenvalue < -slack {
        diagnostics.push(format!(
            "disturbance covariance is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})"
        ));
    }

    let self_loops: Vec<VariableId> = (0..n)
        .filter(|&i| model.coeff()[(i, i)] != 0.0)
        .map(|i| model.variables()[i].clone())
        .collect();
    if !self_loops.is_empty() {
        let names: Vec<&str> = self_loops.iter().map(|v| v.as_str()).collect();
        diagnostics.push(format!(
            "self-loop: variable(s) {} appear in their own equation",
            names.join(", ")
        ));
    }

    let i_minus_b = DMatrix::identity(n, n) - model.coeff();
    let (rcond, inverse) = linalg::inverse_with_rcond(&i_minus_b);
    if rcond < tol.rcond_floor {
        diagnostics.push(format!(
            "I - B is singular: reciprocal condition number {rcond:e} is below {:e}",
            tol.rcond_floor
        ));
    }

    let report = ValidationReport {
        passed: diagnostics.is_empty(),
        symmetry_defect,
        min_eigenvalue,
        rcond,
        self_loops,
        diagnostics,
    };
    let inverse = if rcond >= tol.rcond_floor {
        inverse
    } else {
        None
    };
    (report, inverse)
}

/// Split of the variables into free (`y`) and intervened (`z`) sets, with the
/// matching blocks of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Free variable indices, model order.
    pub y: Vec<usize>,
    /// Intervened variable indices, model order.
    pub z: Vec<usize>,
    pub b_yy: DMatrix<f64>,
    pub b_yz: DMatrix<f64>,
    pub b_zy: DMatrix<f64>,
    pub b_zz: DMatrix<f64>,
}

impl Partition {
    /// Puts the four blocks back into an `n×n` matrix in model order.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let n = self.y.len() + self.z.len();
        let mut b = DMatrix::zeros(n, n);
        let blocks = [
            (&self.y, &self.y, &self.b_yy),
            (&self.y, &self.z, &self.b_yz),
            (&self.z, &self.y, &self.b_zy),
            (&self.z, &self.z, &self.b_zz),
        ];
        for (rows, cols, block) in blocks {
            for (bi, &i) in rows.iter().enumerate() {
                for (bj, &j) in cols.iter().enumerate() {
                    b[(i, j)] = block[(bi, bj)];
                }
            }
        }
        b
    }
}

pub fn partition<I, S>(model: &LinearScm, intervened: I) -> Result<Partition>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let z = model.indices(intervened)?;
    let y: Vec<usize> = (0..model.len()).filter(|i| !z.contains(i)).collect();
    let b = model.coeff();
    Ok(Partition {
        b_yy: linalg::select(b, &y, &y),
        b_yz: linalg::select(b, &y, &z),
        b_zy: linalg::select(b, &z, &y),
        b_zz: linalg::select(b, &z, &z),
        y,
        z,
    })
}

/// The action-pruned coefficient matrix: rows of intervened variables are
/// zeroed.
pub fn prune<I, S>(model: &LinearScm, intervened: I) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let z = model.indices(intervened)?;
    let mut pruned = model.coeff().clone();
    for i in z {
        pruned.row_mut(i).fill(0.0);
    }
    Ok(pruned)
}
