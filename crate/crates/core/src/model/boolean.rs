use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::VariableId;
use crate::error::{Error, Result};

/// AND/OR/NOT expression over model variables and the constants 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Const(bool),
    Var(VariableId),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn var(name: &VariableId) -> Self {
        BoolExpr::Var(name.clone())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    pub fn and(l: BoolExpr, r: BoolExpr) -> Self {
        BoolExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: BoolExpr, r: BoolExpr) -> Self {
        BoolExpr::Or(Box::new(l), Box::new(r))
    }

    pub fn eval(&self, lookup: &dyn Fn(&VariableId) -> bool) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Var(v) => lookup(v),
            BoolExpr::Not(e) => !e.eval(lookup),
            BoolExpr::And(l, r) => l.eval(lookup) && r.eval(lookup),
            BoolExpr::Or(l, r) => l.eval(lookup) || r.eval(lookup),
        }
    }

    /// Variables referenced anywhere in the expression.
    pub fn variables(&self) -> BTreeSet<&VariableId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a VariableId>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(v) => {
                out.insert(v);
            }
            BoolExpr::Not(e) => e.collect_vars(out),
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            BoolExpr::Or(..) => 0,
            BoolExpr::And(..) => 1,
            BoolExpr::Not(_) => 2,
            BoolExpr::Const(_) | BoolExpr::Var(_) => 3,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let prec = self.precedence();
        if prec < min_prec {
            f.write_str("(")?;
        }
        match self {
            BoolExpr::Const(b) => f.write_str(if *b { "1" } else { "0" })?,
            BoolExpr::Var(v) => write!(f, "{v}")?,
            BoolExpr::Not(e) => {
                f.write_str("!")?;
                e.fmt_at(f, 2)?;
            }
            // Binary operators are left-associative, so a right operand of the
            // same precedence needs parentheses to keep the tree shape.
            BoolExpr::And(l, r) => {
                l.fmt_at(f, 1)?;
                f.write_str(" & ")?;
                r.fmt_at(f, 2)?;
            }
            BoolExpr::Or(l, r) => {
                l.fmt_at(f, 0)?;
                f.write_str(" | ")?;
                r.fmt_at(f, 1)?;
            }
        }
        if prec < min_prec {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Minimal-parenthesis rendering in the model-file syntax.
impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

/// Boolean structural model. Roots carry no equation; every other variable
/// is defined by a [`BoolExpr`]. Abnormality variables are a subset of the
/// roots and are what abduction minimizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanScm {
    variables: Vec<VariableId>,
    roots: Vec<VariableId>,
    abnormals: Vec<VariableId>,
    equations: BTreeMap<VariableId, BoolExpr>,
    weights: BTreeMap<VariableId, f64>,
    /// Non-root variable indices in evaluation order.
    order: Vec<usize>,
}

impl BooleanScm {
    /// `roots` and `abnormals` are stored in model declaration order.
    /// `weights` are optional relative likelihoods of abnormalities, used only
    /// to rank equally minimal worlds.
    pub fn new(
        variables: Vec<VariableId>,
        roots: impl IntoIterator<Item = VariableId>,
        abnormals: impl IntoIterator<Item = VariableId>,
        equations: BTreeMap<VariableId, BoolExpr>,
        weights: BTreeMap<VariableId, f64>,
    ) -> Result<Self> {
        let mut declared = BTreeSet::new();
        for v in &variables {
            if !declared.insert(v.clone()) {
                return Err(Error::DuplicateVariable(v.to_string()));
            }
        }
        let check_declared = |v: &VariableId| {
            if declared.contains(v) {
                Ok(())
            } else {
                Err(Error::UnknownVariable(v.to_string()))
            }
        };

        let root_set: BTreeSet<VariableId> = roots.into_iter().collect();
        let abn_set: BTreeSet<VariableId> = abnormals.into_iter().collect();
        for v in &root_set {
            check_declared(v)?;
        }
        for v in &abn_set {
            check_declared(v)?;
            if !root_set.contains(v) {
                return Err(Error::InvalidModel(format!(
                    "abnormality variable `{v}` must be a root"
                )));
            }
        }
        for (v, w) in &weights {
            check_declared(v)?;
            if !abn_set.contains(v) {
                return Err(Error::InvalidModel(format!(
                    "weight given for `{v}`, which is not an abnormality variable"
                )));
            }
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "weight for `{v}` must be positive and finite"
                )));
            }
        }
        for (v, expr) in &equations {
            check_declared(v)?;
            if root_set.contains(v) {
                return Err(Error::InvalidModel(format!(
                    "root variable `{v}` has an equation"
                )));
            }
            for dep in expr.variables() {
                check_declared(dep)?;
            }
        }
        for v in &variables {
            if !root_set.contains(v) && !equations.contains_key(v) {
                return Err(Error::InvalidModel(format!(
                    "variable `{v}` is neither a root nor defined by an equation"
                )));
            }
        }

        let pos: BTreeMap<&VariableId, usize> =
            variables.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let order = topological_order(&variables, &equations, &pos)?;

        let roots = variables
            .iter()
            .filter(|v| root_set.contains(*v))
            .cloned()
            .collect();
        let abnormals = variables
            .iter()
            .filter(|v| abn_set.contains(*v))
            .cloned()
            .collect();
        Ok(Self {
            variables,
            roots,
            abnormals,
            equations,
            weights,
            order,
        })
    }

    pub fn variables(&self) -> &[VariableId] {
        &self.variables
    }

    pub fn roots(&self) -> &[VariableId] {
        &self.roots
    }

    pub fn abnormals(&self) -> &[VariableId] {
        &self.abnormals
    }

    pub fn equations(&self) -> &BTreeMap<VariableId, BoolExpr> {
        &self.equations
    }

    pub fn equation(&self, v: &str) -> Option<&BoolExpr> {
        self.equations.get(v)
    }

    pub fn weights(&self) -> &BTreeMap<VariableId, f64> {
        &self.weights
    }

    pub fn is_root(&self, v: &str) -> bool {
        self.roots.iter().any(|r| r.as_str() == v)
    }

    pub fn is_abnormal(&self, v: &str) -> bool {
        self.abnormals.iter().any(|r| r.as_str() == v)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.as_str() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Non-root variable indices such that every equation's dependencies come
    /// earlier (or are roots).
    pub fn evaluation_order(&self) -> &[usize] {
        &self.order
    }
}

fn topological_order(
    variables: &[VariableId],
    equations: &BTreeMap<VariableId, BoolExpr>,
    pos: &BTreeMap<&VariableId, usize>,
) -> Result<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    let mut marks = vec![Mark::Fresh; variables.len()];
    let mut order = Vec::with_capacity(equations.len());

    // Iterative DFS, visiting in declaration order for a stable result.
    for start in 0..variables.len() {
        if marks[start] != Mark::Fresh || !equations.contains_key(&variables[start]) {
            continue;
        }
        let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
        let deps = |i: usize| -> Vec<usize> {
            equations
                .get(&variables[i])
                .map(|e| e.variables().into_iter().map(|d| pos[d]).collect())
                .unwrap_or_default()
        };
        marks[start] = Mark::Active;
        stack.push((start, deps(start)));
        while let Some((node, pending)) = stack.last_mut() {
            if let Some(next) = pending.pop() {
                match marks[next] {
                    Mark::Done => {}
                    Mark::Active => {
                        return Err(Error::InvalidModel(format!(
                            "equations are cyclic through `{}`",
                            variables[next]
                        )))
                    }
                    Mark::Fresh => {
                        if equations.contains_key(&variables[next]) {
                            marks[next] = Mark::Active;
                            let d = deps(next);
                            stack.push((next, d));
                        } else {
                            marks[next] = Mark::Done;
                        }
                    }
                }
            } else {
                let node = *node;
                marks[node] = Mark::Done;
                order.push(node);
                stack.pop();
            }
        }
    }
    Ok(order)
}
