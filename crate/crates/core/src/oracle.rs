//! Independent reference engines used to check the analytic paths.
//!
//! The samplers never condition a Gaussian: they draw disturbances, solve the
//! structural equations, and keep draws whose factual solution lands inside a
//! box around the observations. The boolean enumerator evaluates expressions
//! recursively from the roots rather than through the engine's compiled
//! evaluation order.
//!
//! Draws are split into fixed-size chunks; chunk `k` uses a ChaCha8 stream
//! seeded with `(seed, k)`. Chunks run in parallel and their moments are merged
//! in chunk order, so results depend only on the seed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::boolean::{to_bool, World};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Assignment, BoolExpr, BooleanScm, LinearScm, VariableId};

const CHUNK: usize = 1 << 14;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub variables: Vec<VariableId>,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub n_drawn: usize,
    pub n_accepted: usize,
    /// Sample standard deviation over `sqrt(n_accepted)`, per coordinate.
    pub std_err: Vec<f64>,
}

impl OracleEstimate {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.as_str() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }
}

/// Running mean and co-moment matrix (Welford), mergeable across chunks.
#[derive(Clone)]
struct Moments {
    n: usize,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

// paired index loops over two buffers
#[allow(clippy::needless_range_loop)]
impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    fn push(&mut self, x: &[f64], delta: &mut [f64]) {
        let d = self.mean.len();
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for i in 0..d {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] * inv;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += after * delta[j];
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let d = self.mean.len();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let diff: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] +=
                    other.comoment[i * d + j] + diff[i] * diff[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += diff[i] * nb / n;
        }
        self.n += other.n;
    }
}

/// Dense row-major matrix-vector product into `out`.
fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * d..(i + 1) * d]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum();
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn solve_matrix(coeff: &DMatrix<f64>, label: &'static str) -> Result<DMatrix<f64>> {
    let n = coeff.nrows();
    let (rcond, inv) = linalg::inverse_with_rcond(&(DMatrix::identity(n, n) - coeff));
    match inv {
        Some(inv) if rcond >= 1e-12 => Ok(inv),
        _ => Err(Error::Singular {
            matrix: label,
            rcond,
            floor: 1e-12,
        }),
    }
}

/// What the sampler does with each disturbance draw.
type Forced = Vec<(usize, f64)>;

struct Plan {
    dim: usize,
    mu: Vec<f64>,
    root: Vec<f64>,
    factual: Vec<f64>,
    /// `(index, value)` boxes on the factual solution.
    accept: Vec<(usize, f64)>,
    delta: f64,
    /// Pruned system and the forced values, when there is an action.
    counterfactual: Option<(Vec<f64>, Forced)>,
}

impl Plan {
    fn run(&self, n: usize, seed: u64) -> Moments {
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Moments> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let count = CHUNK.min(n - k * CHUNK);
                self.run_chunk(k as u64, count, seed)
            })
            .collect();
        let mut total = Moments::new(self.dim);
        for p in &parts {
            total.merge(p);
        }
        total
    }

    fn run_chunk(&self, stream: u64, count: usize, seed: u64) -> Moments {
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut acc = Moments::new(d);
        let (mut z, mut eps, mut x, mut x_cf, mut scratch) = (
            vec![0.0; d],
            vec![0.0; d],
            vec![0.0; d],
            vec![0.0; d],
            vec![0.0; d],
        );
        for _ in 0..count {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            matvec(&self.root, &z, &mut eps);
            for (e, m) in eps.iter_mut().zip(&self.mu) {
                *e += m;
            }
            matvec(&self.factual, &eps, &mut x);
            if !self
                .accept
                .iter()
                .all(|&(i, o)| (x[i] - o).abs() <= self.delta)
            {
                continue;
            }
            match &self.counterfactual {
                None => acc.push(&x, &mut scratch),
                Some((pruned, forced)) => {
                    for &(i, a) in forced {
                        eps[i] = a;
                    }
                    matvec(pruned, &eps, &mut x_cf);
                    // the LU inverse leaves ~1 ulp noise on unit rows
                    for &(i, a) in forced {
                        x_cf[i] = a;
                    }
                    acc.push(&x_cf, &mut scratch);
                }
            }
        }
        acc
    }
}

fn estimate(model: &LinearScm, m: Moments, n_drawn: usize) -> OracleEstimate {
    let d = model.len();
    let k = m.n as f64;
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if m.n > 1 {
                        m.comoment[i * d + j] / (k - 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let std_err = (0..d)
        .map(|i| {
            if m.n > 1 {
                (cov[i][i].max(0.0) / k).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    OracleEstimate {
        variables: model.variables().to_vec(),
        mean: m.mean,
        cov,
        n_drawn,
        n_accepted: m.n,
        std_err,
    }
}

fn base_plan(model: &LinearScm) -> Result<Plan> {
    let factual = solve_matrix(model.coeff(), "I - B")?;
    Ok(Plan {
        dim: model.len(),
        mu: model.dist_mean().iter().copied().collect(),
        root: row_major(&linalg::symmetric_sqrt(model.dist_cov())),
        factual: row_major(&factual),
        accept: Vec::new(),
        delta: f64::INFINITY,
        counterfactual: None,
    })
}

/// Empirical moments of `n` draws from the model's prior.
pub fn mc_prior(model: &LinearScm, n: usize, seed: u64) -> Result<OracleEstimate> {
    if n < 2 {
        return Err(Error::SampleCount { n, min: 2 });
    }
    let plan = base_plan(model)?;
    Ok(estimate(model, plan.run(n, seed), n))
}

/// Rejection-sampling estimate of the counterfactual distribution.
///
/// A draw is accepted when its factual solution is within `delta` of every
/// observation; the accepted disturbances are then pushed through the
/// equations with the action's rows replaced by the forced values. The bias
/// from the finite band is `O(delta)`.
pub fn rejection_counterfactual(
    model: &LinearScm,
    observations: &Assignment,
    action: &Assignment,
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidBand(delta));
    }
    if n < 2 {
        return Err(Error::SampleCount { n, min: 2 });
    }
    let mut plan = base_plan(model)?;
    plan.delta = delta;
    plan.accept = observations
        .iter()
        .map(|(v, &o)| Ok((model.index_of(v.as_str())?, o)))
        .collect::<Result<_>>()?;

    if !action.is_empty() {
        let mut pruned = model.coeff().clone();
        let mut forced = Vec::with_capacity(action.len());
        for (v, &a) in action {
            let i = model.index_of(v.as_str())?;
            pruned.row_mut(i).fill(0.0);
            forced.push((i, a));
        }
        let solve = solve_matrix(&pruned, "I - B (pruned)")?;
        plan.counterfactual = Some((row_major(&solve), forced));
    }

    let moments = plan.run(n, seed);
    if moments.n == 0 {
        return Err(Error::ZeroAcceptance { n, delta });
    }
    Ok(estimate(model, moments, n))
}

fn eval_recursive(
    model: &BooleanScm,
    var: &VariableId,
    roots: &BTreeMap<&VariableId, bool>,
    memo: &mut BTreeMap<VariableId, bool>,
) -> bool {
    if let Some(&b) = roots.get(var) {
        return b;
    }
    if let Some(&b) = memo.get(var) {
        return b;
    }
    let expr = model
        .equation(var.as_str())
        .expect("non-root has an equation");
    let value = eval_expr(model, expr, roots, memo);
    memo.insert(var.clone(), value);
    value
}

fn eval_expr(
    model: &BooleanScm,
    expr: &BoolExpr,
    roots: &BTreeMap<&VariableId, bool>,
    memo: &mut BTreeMap<VariableId, bool>,
) -> bool {
    match expr {
        BoolExpr::Const(b) => *b,
        BoolExpr::Var(v) => eval_recursive(model, v, roots, memo),
        BoolExpr::Not(e) => !eval_expr(model, e, roots, memo),
        BoolExpr::And(l, r) => {
            let a = eval_expr(model, l, roots, memo);
            let b = eval_expr(model, r, roots, memo);
            a && b
        }
        BoolExpr::Or(l, r) => {
            let a = eval_expr(model, l, roots, memo);
            let b = eval_expr(model, r, roots, memo);
            a || b
        }
    }
}

/// Every root world consistent with the observations, with its abnormality
/// count, in lexicographic order of the root assignment.
pub fn enumerate_boolean(
    model: &BooleanScm,
    observations: &Assignment,
    max_roots: usize,
) -> Result<Vec<(World, usize)>> {
    let roots = model.roots();
    if roots.len() > max_roots || roots.len() >= 64 {
        return Err(Error::TooManyRoots {
            roots: roots.len(),
            max: max_roots.min(63),
        });
    }
    let obs: Vec<(&VariableId, bool)> = observations
        .iter()
        .map(|(v, &x)| {
            model.index_of(v.as_str())?;
            Ok((v, to_bool(v, x)?))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    let k = roots.len();
    let mut bits = vec![false; k];
    loop {
        let assignment: BTreeMap<&VariableId, bool> =
            roots.iter().zip(bits.iter().copied()).collect();
        let mut memo = BTreeMap::new();
        if obs
            .iter()
            .all(|(v, b)| eval_recursive(model, v, &assignment, &mut memo) == *b)
        {
            let world = World {
                assignment: roots.iter().cloned().zip(bits.iter().copied()).collect(),
            };
            let count = roots
                .iter()
                .zip(&bits)
                .filter(|(r, b)| **b && model.is_abnormal(r.as_str()))
                .count();
            out.push((world, count));
        }
        // Binary increment with the first root as the most significant digit.
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if bits[pos] {
                bits[pos] = false;
            } else {
                bits[pos] = true;
                break;
            }
        }
    }
}

/// Per-coordinate agreement between an analytic mean and an oracle estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub variable: VariableId,
    pub analytic: f64,
    pub oracle: f64,
    pub abs_diff: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Checks `|analytic - oracle| <= 4·std_err + 2·delta` for every coordinate.
pub fn agreement(analytic_mean: &DVector<f64>, est: &OracleEstimate, delta: f64) -> Vec<Agreement> {
    est.variables
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let abs_diff = (analytic_mean[i] - est.mean[i]).abs();
            let bound = 4.0 * est.std_err[i] + 2.0 * delta;
            Agreement {
                variable: v.clone(),
                analytic: analytic_mean[i],
                oracle: est.mean[i],
                abs_diff,
                bound,
                pass: abs_diff <= bound,
            }
        })
        .collect()
}
