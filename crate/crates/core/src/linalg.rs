//! Small dense linear-algebra helpers shared by the engines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest absolute entry, 0 for an empty matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute entry of `m - mᵗ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `m` with `(m + mᵗ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a square matrix together with its 1-norm reciprocal condition
/// number. A matrix LU cannot invert reports `rcond = 0` and no inverse.
pub fn inverse_with_rcond(m: &DMatrix<f64>) -> (f64, Option<DMatrix<f64>>) {
    if m.nrows() == 0 {
        return (1.0, Some(DMatrix::zeros(0, 0)));
    }
    match m.clone().lu().try_inverse() {
        Some(inv) => {
            let denom = norm1(m) * norm1(&inv);
            let rcond = if denom.is_finite() && denom > 0.0 {
                1.0 / denom
            } else {
                0.0
            };
            (rcond, Some(inv))
        }
        None => (0.0, None),
    }
}

/// Smallest eigenvalue of the symmetric part of `m`, `+inf` when empty.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, with the eigenbasis of
/// the retained range kept for consistency checks.
#[derive(Debug, Clone)]
pub struct SymmetricPinv {
    pub pinv: DMatrix<f64>,
    /// Orthonormal columns spanning the retained eigenspace.
    pub range: DMatrix<f64>,
    pub rank: usize,
    pub largest_eigenvalue: f64,
}

impl SymmetricPinv {
    /// Part of `v` lying outside the retained range.
    pub fn off_range(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.rank == 0 {
            return v.clone();
        }
        let coords = self.range.transpose() * v;
        v - &self.range * coords
    }
}

/// Eigenvalues below `rel_cutoff * λ_max` (and all non-positive ones) are
/// treated as zero.
pub fn symmetric_pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> SymmetricPinv {
    let n = m.nrows();
    if n == 0 {
        return SymmetricPinv {
            pinv: DMatrix::zeros(0, 0),
            range: DMatrix::zeros(0, 0),
            rank: 0,
            largest_eigenvalue: 0.0,
        };
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let largest = eig.eigenvalues.max();
    let cutoff = rel_cutoff * largest;
    let kept: Vec<usize> = (0..n)
        .filter(|&k| largest > 0.0 && eig.eigenvalues[k] > cutoff)
        .collect();

    let mut pinv = DMatrix::zeros(n, n);
    let mut range = DMatrix::zeros(n, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        pinv += (v * v.transpose()) / eig.eigenvalues[k];
        range.set_column(col, &v);
    }
    SymmetricPinv {
        pinv,
        range,
        rank: kept.len(),
        largest_eigenvalue: largest.max(0.0),
    }
}

/// Symmetric square root with negative eigenvalues clamped to zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Rows `rows` and columns `cols` of `m`, in the given order.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}
