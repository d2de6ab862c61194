use std::collections::BTreeMap;
use std::fmt;

use super::VariableId;

/// Variable assignments; booleans are carried as `0.0`/`1.0`.
pub type Assignment = BTreeMap<VariableId, f64>;

/// A variable asked about. Boolean models may pin the proposition to a value
/// (`ask t=0`); a bare name asks whether the variable is true.
#[derive(Debug, Clone, PartialEq)]
pub struct Consequent {
    pub variable: VariableId,
    pub value: Option<f64>,
}

impl Consequent {
    pub fn new(variable: VariableId) -> Self {
        Self {
            variable,
            value: None,
        }
    }
}

/// A counterfactual query `a → c | o`: observations `o`, forced assignments
/// `a`, and consequent targets `c`.
///
/// Observations are facts about the world before the intervention. With an
/// empty intervention the query is a plain conditional; with no observations
/// it is a plain intervention.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Query {
    pub observations: Assignment,
    pub intervention: Assignment,
    pub consequents: Vec<Consequent>,
}

impl Query {
    pub fn is_counterfactual(&self) -> bool {
        !self.observations.is_empty() && !self.intervention.is_empty()
    }
}

fn write_assignments(f: &mut fmt::Formatter<'_>, items: &Assignment) -> fmt::Result {
    for (k, (name, value)) in items.iter().enumerate() {
        if k > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{name}={value}")?;
    }
    Ok(())
}

/// Renders the query in the text grammar accepted by
/// [`crate::dsl::parse_query`].
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !first {
                f.write_str("; ")?;
            }
            first = false;
            Ok(())
        };
        if !self.observations.is_empty() {
            sep(f)?;
            f.write_str("observe ")?;
            write_assignments(f, &self.observations)?;
        }
        if !self.intervention.is_empty() {
            sep(f)?;
            f.write_str("do ")?;
            write_assignments(f, &self.intervention)?;
        }
        if !self.consequents.is_empty() {
            sep(f)?;
            f.write_str("ask ")?;
            for (k, c) in self.consequents.iter().enumerate() {
                if k > 0 {
                    f.write_str(", ")?;
                }
                match c.value {
                    Some(v) => write!(f, "{}={v}", c.variable)?,
                    None => write!(f, "{}", c.variable)?,
                }
            }
        }
        Ok(())
    }
}
