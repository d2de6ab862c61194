//! Random model generators shared by the integration suites and the
//! acceptance harness. Everything is driven by an explicit seed.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use counterfact::dsl::{ModelBody, ModelDocument};
use counterfact::{Assignment, BoolExpr, BooleanScm, LinearScm, VariableId};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn id(name: &str) -> VariableId {
    VariableId::new(name).unwrap()
}

pub fn assign(pairs: &[(&str, f64)]) -> Assignment {
    pairs.iter().map(|(k, v)| (id(k), *v)).collect()
}

pub fn coffee() -> LinearScm {
    LinearScm::new(
        vec![id("p"), id("q"), id("r")],
        DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, -1.8, 0.0, 0.0, 1.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 19.0, 3.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0])),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn normal(rng: &mut StdRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    b.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Random linear model with `n` variables. Acyclic models are strictly lower
/// triangular under a random ordering; cyclic ones get a dense `B` scaled to
/// spectral radius below 0.9.
pub fn random_linear(seed: u64, n: usize, cyclic: bool) -> LinearScm {
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let allowed = if cyclic { i != j } else { order[i] > order[j] };
            if allowed && r.random_bool(0.6) {
                b[(i, j)] = r.random_range(-1.5..1.5);
            }
        }
    }
    if cyclic {
        // make sure there is at least one loop
        let (i, j) = (order[0], order[n - 1]);
        b[(i, j)] = 0.7;
        b[(j, i)] = -0.6;
        let rho = spectral_radius(&b);
        if rho >= 0.85 {
            b *= 0.85 / rho;
        }
    }
    let a = DMatrix::from_fn(n, n, |_, _| normal(&mut r));
    let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    let mean = DVector::from_fn(n, |_, _| r.random_range(-5.0..5.0));
    let vars = (0..n).map(|i| id(&format!("x{i}"))).collect();
    LinearScm::new(vars, b, mean, cov).unwrap()
}

/// Random subset of the model's variables (possibly empty) with values drawn
/// around the prior.
pub fn random_assignment(seed: u64, model: &LinearScm, max: usize) -> Assignment {
    let mut r = rng(seed);
    let prior = counterfact::gaussian::prior_moments(model).unwrap();
    let k = r.random_range(0..=max.min(model.len()));
    let mut idx: Vec<usize> = (0..model.len()).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, r.random_range(0..=i));
    }
    idx.truncate(k);
    idx.into_iter()
        .map(|i| {
            let sd = prior.cov[(i, i)].max(1e-6).sqrt();
            (
                model.variables()[i].clone(),
                prior.mean[i] + sd * normal(&mut r),
            )
        })
        .collect()
}

fn random_expr(r: &mut StdRng, pool: &[VariableId], depth: u32) -> BoolExpr {
    let leaf = depth == 0 || r.random_bool(0.35);
    if leaf {
        if r.random_bool(0.05) {
            return BoolExpr::Const(r.random_bool(0.5));
        }
        return BoolExpr::var(&pool[r.random_range(0..pool.len())]);
    }
    match r.random_range(0..3) {
        0 => BoolExpr::not(random_expr(r, pool, depth - 1)),
        1 => BoolExpr::and(
            random_expr(r, pool, depth - 1),
            random_expr(r, pool, depth - 1),
        ),
        _ => BoolExpr::or(
            random_expr(r, pool, depth - 1),
            random_expr(r, pool, depth - 1),
        ),
    }
}

/// Random boolean model with `roots` root variables (some abnormal) and a few
/// derived variables, each a function of earlier ones.
pub fn random_boolean(seed: u64, roots: usize, derived: usize, weighted: bool) -> BooleanScm {
    let mut r = rng(seed);
    let root_ids: Vec<VariableId> = (0..roots).map(|i| id(&format!("u{i}"))).collect();
    let mut abnormals: Vec<VariableId> = root_ids
        .iter()
        .filter(|_| r.random_bool(0.6))
        .cloned()
        .collect();
    if abnormals.is_empty() {
        abnormals.push(root_ids[0].clone());
    }
    let mut pool = root_ids.clone();
    let mut eqs = BTreeMap::new();
    let mut vars = root_ids.clone();
    for k in 0..derived {
        let v = id(&format!("y{k}"));
        eqs.insert(v.clone(), random_expr(&mut r, &pool, 3));
        pool.push(v.clone());
        vars.push(v);
    }
    let mut weights = BTreeMap::new();
    if weighted {
        for a in &abnormals {
            if r.random_bool(0.5) {
                weights.insert(a.clone(), r.random_range(0.1..5.0));
            }
        }
    }
    BooleanScm::new(vars, root_ids, abnormals, eqs, weights).unwrap()
}

/// Observations on derived variables taken from one concrete world, so at
/// least that world is consistent.
pub fn consistent_observations(seed: u64, model: &BooleanScm) -> Assignment {
    let mut r = rng(seed);
    let world: BTreeMap<VariableId, bool> = model
        .roots()
        .iter()
        .map(|v| (v.clone(), r.random_bool(0.3)))
        .collect();
    let mut values = world.clone();
    for &i in model.evaluation_order() {
        let v = &model.variables()[i];
        if let Some(e) = model.equation(v.as_str()) {
            let b = e.eval(&|u: &VariableId| values[u]);
            values.insert(v.clone(), b);
        }
    }
    values
        .into_iter()
        .filter(|(v, _)| {
            let keep = if model.is_root(v.as_str()) { 0.12 } else { 0.6 };
            r.random_bool(keep)
        })
        .map(|(v, b)| (v, if b { 1.0 } else { 0.0 }))
        .collect()
}

fn random_float(r: &mut StdRng) -> f64 {
    match r.random_range(0..5) {
        0 => r.random_range(-3..=3) as f64,
        1 => r.random_range(-1.0..1.0),
        2 => r.random_range(-1e4..1e4),
        3 => r.random_range(-1.0..1.0) * 1e-7,
        _ => (r.random_range(-99..=99) as f64) / 10.0,
    }
}

/// Random valid document, linear or boolean. Linear parameters are arbitrary
/// finite numbers; the parser does not check numerical assumptions.
pub fn random_document(seed: u64) -> ModelDocument {
    let mut r = rng(seed);
    let name = id(&format!("m{}", r.random_range(0..1000)));
    let body = if r.random_bool(0.5) {
        let n = r.random_range(1..=6);
        let b = DMatrix::from_fn(n, n, |_, _| {
            if r.random_bool(0.4) {
                random_float(&mut r)
            } else {
                0.0
            }
        });
        let mean = DVector::from_fn(n, |_, _| random_float(&mut r));
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            cov[(i, i)] = random_float(&mut r).abs();
            for j in 0..i {
                if r.random_bool(0.3) {
                    let c = random_float(&mut r);
                    cov[(i, j)] = c;
                    cov[(j, i)] = c;
                }
            }
        }
        let vars = (0..n)
            .map(|i| id(&format!("v{i}_{}", r.random_range(0..10))))
            .collect();
        ModelBody::Linear(LinearScm::new(vars, b, mean, cov).unwrap())
    } else {
        let roots = r.random_range(1..=5);
        let derived = r.random_range(0..=5);
        ModelBody::Boolean(random_boolean(
            r.random(),
            roots,
            derived,
            r.random_bool(0.5),
        ))
    };
    ModelDocument { name, body }
}
