//! Counterfactuals over boolean structural models with abnormality terms.
//!
//! Abduction enumerates every assignment of the root variables, keeps those
//! whose forward evaluation reproduces the observations, and retains the ones
//! with the fewest abnormalities set. The antecedent then replaces the
//! equations of its variables with constants and each retained world is
//! evaluated again under the modified equations.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Assignment, BoolExpr, BooleanScm, VariableId};

pub const DEFAULT_MAX_ROOTS: usize = 20;

/// Total assignment of the root variables, in model root order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct World {
    pub assignment: Vec<(VariableId, bool)>,
}

impl World {
    pub fn get(&self, name: &str) -> Option<bool> {
        self.assignment
            .iter()
            .find(|(v, _)| v.as_str() == name)
            .map(|(_, b)| *b)
    }

    pub fn abnormality_count(&self, model: &BooleanScm) -> usize {
        self.assignment
            .iter()
            .filter(|(v, b)| *b && model.is_abnormal(v.as_str()))
            .count()
    }

    /// Builds the world whose `k`-th root is bit `len-1-k` of `mask`, so that
    /// increasing masks enumerate worlds lexicographically.
    pub(crate) fn from_mask(roots: &[VariableId], mask: u64) -> Self {
        let k = roots.len();
        World {
            assignment: roots
                .iter()
                .enumerate()
                .map(|(i, r)| (r.clone(), mask >> (k - 1 - i) & 1 == 1))
                .collect(),
        }
    }
}

/// A single boolean proposition `variable = value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Literal {
    pub variable: VariableId,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbductionResult {
    /// Minimal-abnormality worlds, lexicographic by root assignment.
    pub worlds: Vec<World>,
    pub abnormality_count: usize,
    /// Consistent worlds at any abnormality level.
    pub total_consistent: usize,
    /// When the model declares abnormality weights: indices into `worlds`
    /// with their likelihood score (product of the weights of the active
    /// abnormalities), most believable first.
    pub ranking: Option<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Aggregate {
    AllTrue,
    AllFalse,
    Ambiguous,
}

impl Aggregate {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregate::AllTrue => "ALL_TRUE",
            Aggregate::AllFalse => "ALL_FALSE",
            Aggregate::Ambiguous => "AMBIGUOUS",
        }
    }

    fn classify(outcomes: impl Iterator<Item = bool>) -> Self {
        let (mut any_true, mut any_false) = (false, false);
        for o in outcomes {
            any_true |= o;
            any_false |= !o;
        }
        match (any_true, any_false) {
            (true, false) => Aggregate::AllTrue,
            (false, true) => Aggregate::AllFalse,
            _ => Aggregate::Ambiguous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldOutcome {
    pub world: World,
    /// Counterfactual value of each consequent variable in this world.
    pub values: Vec<(VariableId, bool)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualVerdict {
    pub abduction: AbductionResult,
    pub per_world: Vec<WorldOutcome>,
    pub aggregate: Vec<(Literal, Aggregate)>,
}

/// Expression tree over variable indices.
#[derive(Debug, Clone)]
enum Compiled {
    Const(bool),
    Var(usize),
    Not(Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    fn new(expr: &BoolExpr, model: &BooleanScm) -> Self {
        match expr {
            BoolExpr::Const(b) => Compiled::Const(*b),
            BoolExpr::Var(v) => Compiled::Var(model.index_of(v.as_str()).expect("validated model")),
            BoolExpr::Not(e) => Compiled::Not(Box::new(Self::new(e, model))),
            BoolExpr::And(l, r) => {
                Compiled::And(Box::new(Self::new(l, model)), Box::new(Self::new(r, model)))
            }
            BoolExpr::Or(l, r) => {
                Compiled::Or(Box::new(Self::new(l, model)), Box::new(Self::new(r, model)))
            }
        }
    }

    fn eval(&self, values: &[bool]) -> bool {
        match self {
            Compiled::Const(b) => *b,
            Compiled::Var(i) => values[*i],
            Compiled::Not(e) => !e.eval(values),
            Compiled::And(l, r) => l.eval(values) && r.eval(values),
            Compiled::Or(l, r) => l.eval(values) || r.eval(values),
        }
    }
}

struct Evaluator {
    roots: Vec<usize>,
    steps: Vec<(usize, Compiled)>,
    n: usize,
}

impl Evaluator {
    fn new(model: &BooleanScm) -> Self {
        let roots = model
            .roots()
            .iter()
            .map(|r| model.index_of(r.as_str()).expect("validated model"))
            .collect();
        let steps = model
            .evaluation_order()
            .iter()
            .map(|&i| {
                let expr = model
                    .equation(model.variables()[i].as_str())
                    .expect("non-root has an equation");
                (i, Compiled::new(expr, model))
            })
            .collect();
        Self {
            roots,
            steps,
            n: model.variables().len(),
        }
    }

    fn run_mask(&self, mask: u64) -> Vec<bool> {
        let k = self.roots.len();
        let mut values = vec![false; self.n];
        for (pos, &i) in self.roots.iter().enumerate() {
            values[i] = mask >> (k - 1 - pos) & 1 == 1;
        }
        self.propagate(&mut values);
        values
    }

    fn propagate(&self, values: &mut [bool]) {
        for (i, expr) in &self.steps {
            values[*i] = expr.eval(values);
        }
    }
}

/// Abduction settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BooleanEngine {
    pub max_roots: usize,
}

impl Default for BooleanEngine {
    fn default() -> Self {
        Self {
            max_roots: DEFAULT_MAX_ROOTS,
        }
    }
}

/// Converts observed `0`/`1` values to booleans keyed by variable index.
pub(crate) fn boolean_observations(
    model: &BooleanScm,
    observations: &Assignment,
) -> Result<Vec<(usize, bool)>> {
    observations
        .iter()
        .map(|(v, &x)| {
            let i = model.index_of(v.as_str())?;
            Ok((i, to_bool(v, x)?))
        })
        .collect()
}

pub(crate) fn to_bool(variable: &VariableId, value: f64) -> Result<bool> {
    if value == 0.0 {
        Ok(false)
    } else if value == 1.0 {
        Ok(true)
    } else {
        Err(Error::NonBooleanValue {
            variable: variable.to_string(),
            value,
        })
    }
}

impl BooleanEngine {
    pub fn new(max_roots: usize) -> Self {
        Self { max_roots }
    }

    fn check_roots(&self, model: &BooleanScm) -> Result<()> {
        let roots = model.roots().len();
        if roots > self.max_roots || roots >= 64 {
            return Err(Error::TooManyRoots {
                roots,
                max: self.max_roots.min(63),
            });
        }
        Ok(())
    }

    pub fn abduce(&self, model: &BooleanScm, observations: &Assignment) -> Result<AbductionResult> {
        self.check_roots(model)?;
        let obs = boolean_observations(model, observations)?;
        let eval = Evaluator::new(model);
        let abnormal_pos: Vec<usize> = model
            .roots()
            .iter()
            .enumerate()
            .filter(|(_, r)| model.is_abnormal(r.as_str()))
            .map(|(p, _)| p)
            .collect();
        let k = model.roots().len();

        // Indexed parallel iterators keep the mask order on collect.
        let consistent: Vec<(u64, usize)> = (0..1u64 << k)
            .into_par_iter()
            .filter_map(|mask| {
                let values = eval.run_mask(mask);
                obs.iter().all(|&(i, b)| values[i] == b).then(|| {
                    let count = abnormal_pos
                        .iter()
                        .filter(|&&p| mask >> (k - 1 - p) & 1 == 1)
                        .count();
                    (mask, count)
                })
            })
            .collect();

        let min = consistent
            .iter()
            .map(|&(_, c)| c)
            .min()
            .ok_or(Error::NoConsistentWorld)?;
        let worlds: Vec<World> = consistent
            .iter()
            .filter(|&&(_, c)| c == min)
            .map(|&(mask, _)| World::from_mask(model.roots(), mask))
            .collect();
        let ranking = rank(model, &worlds);
        Ok(AbductionResult {
            worlds,
            abnormality_count: min,
            total_consistent: consistent.len(),
            ranking,
        })
    }

    pub fn counterfactual_bool(
        &self,
        model: &BooleanScm,
        observations: &Assignment,
        antecedent: &Assignment,
        consequent: &[Literal],
    ) -> Result<CounterfactualVerdict> {
        for lit in consequent {
            model.index_of(lit.variable.as_str())?;
        }
        let abduction = self.abduce(model, observations)?;
        let pruned = intervene_bool(model, antecedent)?;
        let mut per_world = Vec::with_capacity(abduction.worlds.len());
        for world in &abduction.worlds {
            let values = forward_eval(&pruned, &restrict(world, &pruned))?;
            per_world.push(WorldOutcome {
                world: world.clone(),
                values: consequent
                    .iter()
                    .map(|lit| (lit.variable.clone(), values[&lit.variable]))
                    .collect(),
            });
        }
        let aggregate = consequent
            .iter()
            .enumerate()
            .map(|(c, lit)| {
                let agg = Aggregate::classify(per_world.iter().map(|w| w.values[c].1 == lit.value));
                (lit.clone(), agg)
            })
            .collect();
        Ok(CounterfactualVerdict {
            abduction,
            per_world,
            aggregate,
        })
    }
}

fn rank(model: &BooleanScm, worlds: &[World]) -> Option<Vec<(usize, f64)>> {
    if model.weights().is_empty() {
        return None;
    }
    let mut scored: Vec<(usize, f64)> = worlds
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let score = w
                .assignment
                .iter()
                .filter(|(v, b)| *b && model.is_abnormal(v.as_str()))
                .map(|(v, _)| model.weights().get(v).copied().unwrap_or(1.0))
                .product::<f64>();
            (i, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Some(scored)
}

/// Keeps the entries of `world` that are still roots of `model`.
fn restrict(world: &World, model: &BooleanScm) -> World {
    World {
        assignment: model
            .roots()
            .iter()
            .map(|r| (r.clone(), world.get(r.as_str()).unwrap_or(false)))
            .collect(),
    }
}

/// Values of every variable given a total assignment of the roots.
pub fn forward_eval(model: &BooleanScm, world: &World) -> Result<BTreeMap<VariableId, bool>> {
    let eval = Evaluator::new(model);
    let mut values = vec![false; model.variables().len()];
    for r in model.roots() {
        let i = model.index_of(r.as_str())?;
        values[i] = world
            .get(r.as_str())
            .ok_or_else(|| Error::Query(format!("world does not assign root `{r}`")))?;
    }
    eval.propagate(&mut values);
    Ok(model.variables().iter().cloned().zip(values).collect())
}

/// Replaces the equation of each antecedent variable with its constant.
/// Antecedent roots stop being roots (and abnormalities).
pub fn intervene_bool(model: &BooleanScm, antecedent: &Assignment) -> Result<BooleanScm> {
    if antecedent.is_empty() {
        return Ok(model.clone());
    }
    let mut equations = model.equations().clone();
    for (v, &x) in antecedent {
        model.index_of(v.as_str())?;
        equations.insert(v.clone(), BoolExpr::Const(to_bool(v, x)?));
    }
    let keep = |v: &&VariableId| !antecedent.contains_key(*v);
    let weights = model
        .weights()
        .iter()
        .filter(|(v, _)| !antecedent.contains_key(*v))
        .map(|(v, w)| (v.clone(), *w))
        .collect();
    BooleanScm::new(
        model.variables().to_vec(),
        model.roots().iter().filter(keep).cloned(),
        model.abnormals().iter().filter(keep).cloned(),
        equations,
        weights,
    )
}

pub fn abduce(model: &BooleanScm, observations: &Assignment) -> Result<AbductionResult> {
    BooleanEngine::default().abduce(model, observations)
}

pub fn counterfactual_bool(
    model: &BooleanScm,
    observations: &Assignment,
    antecedent: &Assignment,
    consequent: &[Literal],
) -> Result<CounterfactualVerdict> {
    BooleanEngine::default().counterfactual_bool(model, observations, antecedent, consequent)
}
