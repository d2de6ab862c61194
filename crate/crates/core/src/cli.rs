//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (validation, contradictory
//! evidence, oracle disagreement), 2 usage, I/O or parse errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use crate::boolean::{self, Aggregate, BooleanEngine, CounterfactualVerdict, Literal};
use crate::dsl::{self, ModelBody, ModelDocument};
use crate::error::Error;
use crate::gaussian::{GaussianEngine, RankDecision};
use crate::model::{
    validate_linear_with, Assignment, BooleanScm, GaussianMoments, LinearScm, Query, Tolerances,
};
use crate::oracle::{self, Agreement};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "counterfact",
    version,
    about = "Counterfactual queries over structural causal models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct QueryInput {
    /// Query text, e.g. "observe r=4; do p=7; ask q"
    query: Option<String>,
    /// Read the query from a file instead
    #[arg(long, conflicts_with = "query")]
    query_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model's standing assumptions
    Validate {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Answer a conditional, interventional or counterfactual query
    Query {
        model: PathBuf,
        #[command(flatten)]
        input: QueryInput,
        #[arg(long)]
        json: bool,
        /// Report moments over every variable, not just the asked ones
        #[arg(long)]
        full_joint: bool,
        #[arg(long, default_value_t = boolean::DEFAULT_MAX_ROOTS)]
        max_roots: usize,
    },
    /// Conditional vs interventional vs counterfactual, side by side
    Compare {
        model: PathBuf,
        #[command(flatten)]
        input: QueryInput,
        #[arg(long)]
        json: bool,
    },
    /// Cross-check the analytic answer against rejection sampling
    OracleCheck {
        model: PathBuf,
        #[command(flatten)]
        input: QueryInput,
        #[arg(long, default_value_t = oracle::DEFAULT_SAMPLES)]
        n: usize,
        #[arg(long, default_value_t = oracle::DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = oracle::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Print a summary of a parsed model
    Describe {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_)
            | Error::UnknownVariable(_)
            | Error::InvalidName(_)
            | Error::Query(_)
            | Error::NonBooleanValue { .. }
            | Error::SampleCount { .. }
            | Error::InvalidBand(_)
            | Error::TooManyRoots { .. } => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { model, json } => cmd_validate(&model, json, out),
        Command::Query {
            model,
            input,
            json,
            full_joint,
            max_roots,
        } => cmd_query(&model, &input, json, full_joint, max_roots, out),
        Command::Compare { model, input, json } => cmd_compare(&model, &input, json, out),
        Command::OracleCheck {
            model,
            input,
            n,
            delta,
            seed,
            json,
        } => cmd_oracle_check(&model, &input, n, delta, seed, json, out),
        Command::Describe { model, json } => cmd_describe(&model, json, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_model(path: &Path) -> Result<ModelDocument, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    dsl::parse_model_bytes(&bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_query(input: &QueryInput) -> Result<Query, Failure> {
    let text = match (&input.query, &input.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => String::new(),
    };
    dsl::parse_query(&text).map_err(|e| Failure::usage(format!("query: {e}")))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Failure::usage(e.to_string()))
}

fn emit_text(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::usage(e.to_string()))
}

fn require_linear<'a>(doc: &'a ModelDocument, what: &str) -> Result<&'a LinearScm, Failure> {
    match &doc.body {
        ModelBody::Linear(m) => Ok(m),
        ModelBody::Boolean(_) => Err(Failure::usage(format!("{what} needs a linear model"))),
    }
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    model: &'a str,
    kind: &'static str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<crate::model::ValidationReport>,
}

fn cmd_validate(path: &Path, json: bool, out: &mut dyn Write) -> CmdResult {
    let doc = load_model(path)?;
    let tol = Tolerances::default();
    let report = match &doc.body {
        ModelBody::Linear(m) => Some(validate_linear_with(m, &tol)),
        // Boolean models are fully checked by the parser.
        ModelBody::Boolean(_) => None,
    };
    let passed = report.as_ref().is_none_or(|r| r.passed);
    if json {
        emit_json(
            out,
            &ValidateOutput {
                model: doc.name.as_str(),
                kind: doc.kind().as_str(),
                passed,
                report,
            },
        )?;
    } else {
        let mut text = format!("model {} ({})\n", doc.name, doc.kind().as_str());
        if let Some(r) = &report {
            let _ = writeln!(
                text,
                "  covariance symmetry defect  {:e}",
                r.symmetry_defect
            );
            let _ = writeln!(text, "  covariance min eigenvalue   {:e}", r.min_eigenvalue);
            let _ = writeln!(text, "  rcond(I - B)                {:e}", r.rcond);
            for d in &r.diagnostics {
                let _ = writeln!(text, "  FAIL: {d}");
            }
        }
        let _ = writeln!(text, "{}", if passed { "PASS" } else { "FAIL" });
        emit_text(out, &text)?;
    }
    Ok(if passed { EXIT_OK } else { EXIT_DOMAIN })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResultKind {
    Prior,
    Conditional,
    Interventional,
    Counterfactual,
    BooleanVerdict,
}

impl ResultKind {
    fn of(query: &Query) -> Self {
        match (query.observations.is_empty(), query.intervention.is_empty()) {
            (true, true) => ResultKind::Prior,
            (false, true) => ResultKind::Conditional,
            (true, false) => ResultKind::Interventional,
            (false, false) => ResultKind::Counterfactual,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ResultKind::Prior => "prior",
            ResultKind::Conditional => "conditional",
            ResultKind::Interventional => "interventional",
            ResultKind::Counterfactual => "counterfactual",
            ResultKind::BooleanVerdict => "boolean-verdict",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct QueryEcho {
    pub text: String,
    pub observe: BTreeMap<String, f64>,
    #[serde(rename = "do")]
    pub action: BTreeMap<String, f64>,
    pub ask: Vec<String>,
}

impl QueryEcho {
    fn new(q: &Query) -> Self {
        let map = |a: &Assignment| a.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self {
            text: q.to_string(),
            observe: map(&q.observations),
            action: map(&q.intervention),
            ask: q
                .consequents
                .iter()
                .map(|c| c.variable.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MomentsPayload {
    pub variables: Vec<String>,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl From<&GaussianMoments> for MomentsPayload {
    fn from(m: &GaussianMoments) -> Self {
        let n = m.variables.len();
        Self {
            variables: m.variables.iter().map(|v| v.to_string()).collect(),
            mean: m.mean.iter().copied().collect(),
            cov: (0..n)
                .map(|i| (0..n).map(|j| m.cov[(i, j)]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EngineMetadata {
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_inverse: Option<RankDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_roots: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct BooleanPayload {
    pub abnormality_count: usize,
    pub total_consistent: usize,
    pub worlds: Vec<BooleanWorld>,
    pub aggregate: BTreeMap<String, Aggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<(usize, f64)>>,
}

#[derive(Debug, Serialize)]
pub struct BooleanWorld {
    pub roots: BTreeMap<String, u8>,
    pub consequents: BTreeMap<String, u8>,
}

#[derive(Debug, Serialize)]
pub struct QueryOutput {
    pub model: String,
    pub query: QueryEcho,
    pub kind: ResultKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<MomentsPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<BooleanPayload>,
    pub metadata: EngineMetadata,
}

/// Dispatches a query against a linear model by which clauses are present.
fn linear_query(
    engine: &GaussianEngine,
    model: &LinearScm,
    q: &Query,
) -> Result<GaussianMoments, Error> {
    match ResultKind::of(q) {
        ResultKind::Prior => engine.prior_moments(model),
        ResultKind::Conditional => engine.condition(model, &q.observations),
        ResultKind::Interventional => engine.intervene(model, &q.intervention),
        _ => engine.counterfactual(model, &q.observations, &q.intervention),
    }
}

fn asked_names(q: &Query, all: &[crate::model::VariableId]) -> Vec<String> {
    if q.consequents.is_empty() {
        all.iter().map(|v| v.to_string()).collect()
    } else {
        q.consequents
            .iter()
            .map(|c| c.variable.to_string())
            .collect()
    }
}

fn rank_decision(
    engine: &GaussianEngine,
    model: &LinearScm,
    q: &Query,
) -> Result<Option<RankDecision>, Error> {
    if q.observations.is_empty() {
        return Ok(None);
    }
    Ok(Some(
        engine.abduct_disturbances(model, &q.observations)?.rank,
    ))
}

pub fn answer_linear(
    doc_name: &str,
    model: &LinearScm,
    q: &Query,
    full_joint: bool,
) -> Result<QueryOutput, Error> {
    if let Some(c) = q.consequents.iter().find(|c| c.value.is_some()) {
        return Err(Error::Query(format!(
            "`ask {}=...` pins a boolean proposition; linear models report moments",
            c.variable
        )));
    }
    let engine = GaussianEngine::default();
    let joint = linear_query(&engine, model, q)?;
    let asked = joint.marginal(&asked_names(q, model.variables()))?;
    Ok(QueryOutput {
        model: doc_name.to_string(),
        query: QueryEcho::new(q),
        kind: ResultKind::of(q),
        moments: Some((&asked).into()),
        joint: full_joint.then(|| (&joint).into()),
        verdict: None,
        metadata: EngineMetadata {
            tolerances: engine.tol,
            pseudo_inverse: rank_decision(&engine, model, q)?,
            max_roots: None,
        },
    })
}

pub fn answer_boolean(
    doc_name: &str,
    model: &BooleanScm,
    q: &Query,
    max_roots: usize,
) -> Result<QueryOutput, Error> {
    let consequents: Vec<Literal> = if q.consequents.is_empty() {
        model
            .variables()
            .iter()
            .map(|v| Literal {
                variable: v.clone(),
                value: true,
            })
            .collect()
    } else {
        q.consequents
            .iter()
            .map(|c| {
                Ok(Literal {
                    variable: c.variable.clone(),
                    value: boolean::to_bool(&c.variable, c.value.unwrap_or(1.0))?,
                })
            })
            .collect::<Result<_, Error>>()?
    };
    let verdict = BooleanEngine::new(max_roots).counterfactual_bool(
        model,
        &q.observations,
        &q.intervention,
        &consequents,
    )?;
    Ok(QueryOutput {
        model: doc_name.to_string(),
        query: QueryEcho::new(q),
        kind: ResultKind::BooleanVerdict,
        moments: None,
        joint: None,
        verdict: Some(boolean_payload(&verdict)),
        metadata: EngineMetadata {
            tolerances: Tolerances::default(),
            pseudo_inverse: None,
            max_roots: Some(max_roots),
        },
    })
}

fn bit(b: bool) -> u8 {
    u8::from(b)
}

fn boolean_payload(v: &CounterfactualVerdict) -> BooleanPayload {
    BooleanPayload {
        abnormality_count: v.abduction.abnormality_count,
        total_consistent: v.abduction.total_consistent,
        worlds: v
            .per_world
            .iter()
            .map(|w| BooleanWorld {
                roots: w
                    .world
                    .assignment
                    .iter()
                    .map(|(k, b)| (k.to_string(), bit(*b)))
                    .collect(),
                consequents: w
                    .values
                    .iter()
                    .map(|(k, b)| (k.to_string(), bit(*b)))
                    .collect(),
            })
            .collect(),
        aggregate: v
            .aggregate
            .iter()
            .map(|(lit, a)| (format!("{}={}", lit.variable, bit(lit.value)), *a))
            .collect(),
        ranking: v.abduction.ranking.clone(),
    }
}

fn moments_table(m: &MomentsPayload) -> String {
    let mut text = format!("{:<12} {:>10} {:>10}\n", "variable", "mean", "variance");
    for (i, v) in m.variables.iter().enumerate() {
        let _ = writeln!(text, "{:<12} {:>10.2} {:>10.2}", v, m.mean[i], m.cov[i][i]);
    }
    text
}

fn covariance_table(m: &MomentsPayload) -> String {
    let mut text = format!("{:<12}", "cov");
    for v in &m.variables {
        let _ = write!(text, " {v:>10}");
    }
    text.push('\n');
    for (i, v) in m.variables.iter().enumerate() {
        let _ = write!(text, "{v:<12}");
        for j in 0..m.variables.len() {
            let _ = write!(text, " {:>10.2}", m.cov[i][j]);
        }
        text.push('\n');
    }
    text
}

fn render_query(o: &QueryOutput) -> String {
    let mut text = format!(
        "model {}  query: {}\nresult: {}\n",
        o.model,
        o.query.text,
        o.kind.as_str()
    );
    if let Some(m) = &o.moments {
        text.push_str(&moments_table(m));
        if m.variables.len() > 1 {
            text.push_str(&covariance_table(m));
        }
    }
    if let Some(j) = &o.joint {
        text.push_str("full joint:\n");
        text.push_str(&moments_table(j));
        text.push_str(&covariance_table(j));
    }
    if let Some(v) = &o.verdict {
        let _ = writeln!(
            text,
            "minimal abnormality count {} ({} minimal of {} consistent worlds)",
            v.abnormality_count,
            v.worlds.len(),
            v.total_consistent
        );
        for (k, w) in v.worlds.iter().enumerate() {
            let roots: Vec<String> = w.roots.iter().map(|(n, b)| format!("{n}={b}")).collect();
            let cons: Vec<String> = w
                .consequents
                .iter()
                .map(|(n, b)| format!("{n}={b}"))
                .collect();
            let _ = writeln!(
                text,
                "  world {}: {}  =>  {}",
                k + 1,
                roots.join(" "),
                cons.join(" ")
            );
        }
        for (prop, agg) in &v.aggregate {
            let _ = writeln!(text, "{prop}: {}", agg.as_str());
        }
        if let Some(ranking) = &v.ranking {
            let order: Vec<String> = ranking
                .iter()
                .map(|(i, s)| format!("world {} ({s})", i + 1))
                .collect();
            let _ = writeln!(text, "ranking: {}", order.join(", "));
        }
    }
    text
}

fn cmd_query(
    path: &Path,
    input: &QueryInput,
    json: bool,
    full_joint: bool,
    max_roots: usize,
    out: &mut dyn Write,
) -> CmdResult {
    let doc = load_model(path)?;
    let query = load_query(input)?;
    let output = match &doc.body {
        ModelBody::Linear(m) => answer_linear(doc.name.as_str(), m, &query, full_joint)?,
        ModelBody::Boolean(m) => answer_boolean(doc.name.as_str(), m, &query, max_roots)?,
    };
    if json {
        emit_json(out, &output)?;
    } else {
        emit_text(out, &render_query(&output))?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct CompareOutput {
    pub model: String,
    pub query: QueryEcho,
    /// Action treated as one more observation.
    pub conditional: MomentsPayload,
    pub interventional: MomentsPayload,
    pub counterfactual: MomentsPayload,
}

pub fn compare(doc_name: &str, model: &LinearScm, q: &Query) -> Result<CompareOutput, Error> {
    let engine = GaussianEngine::default();
    let mut as_observed = q.observations.clone();
    as_observed.extend(q.intervention.iter().map(|(k, v)| (k.clone(), *v)));
    let names = asked_names(q, model.variables());
    let conditional = engine.condition(model, &as_observed)?.marginal(&names)?;
    let interventional = engine.intervene(model, &q.intervention)?.marginal(&names)?;
    let counterfactual = engine
        .counterfactual(model, &q.observations, &q.intervention)?
        .marginal(&names)?;
    Ok(CompareOutput {
        model: doc_name.to_string(),
        query: QueryEcho::new(q),
        conditional: (&conditional).into(),
        interventional: (&interventional).into(),
        counterfactual: (&counterfactual).into(),
    })
}

fn cmd_compare(path: &Path, input: &QueryInput, json: bool, out: &mut dyn Write) -> CmdResult {
    let doc = load_model(path)?;
    let model = require_linear(&doc, "compare")?;
    let query = load_query(input)?;
    let cmp = compare(doc.name.as_str(), model, &query)?;
    if json {
        emit_json(out, &cmp)?;
    } else {
        let mut text = format!("model {}  query: {}\n", cmp.model, cmp.query.text);
        let _ = writeln!(
            text,
            "{:<12} {:>22} {:>22} {:>22}",
            "variable", "conditional", "interventional", "counterfactual"
        );
        let _ = writeln!(
            text,
            "{:<12} {:>22} {:>22} {:>22}",
            "", "mean (var)", "mean (var)", "mean (var)"
        );
        let cell = |m: &MomentsPayload, i: usize| format!("{:.2} ({:.2})", m.mean[i], m.cov[i][i]);
        for (i, v) in cmp.conditional.variables.iter().enumerate() {
            let _ = writeln!(
                text,
                "{:<12} {:>22} {:>22} {:>22}",
                v,
                cell(&cmp.conditional, i),
                cell(&cmp.interventional, i),
                cell(&cmp.counterfactual, i)
            );
        }
        emit_text(out, &text)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub model: String,
    pub query: QueryEcho,
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub n_accepted: usize,
    pub coordinates: Vec<Agreement>,
    pub passed: bool,
}

pub fn oracle_check(
    doc_name: &str,
    model: &LinearScm,
    q: &Query,
    n: usize,
    delta: f64,
    seed: u64,
) -> Result<OracleReport, Error> {
    let analytic =
        GaussianEngine::default().counterfactual(model, &q.observations, &q.intervention)?;
    let est =
        oracle::rejection_counterfactual(model, &q.observations, &q.intervention, delta, n, seed)?;
    let mean: DVector<f64> = analytic.mean.clone();
    let names = asked_names(q, model.variables());
    let coordinates: Vec<Agreement> = oracle::agreement(&mean, &est, delta)
        .into_iter()
        .filter(|a| names.iter().any(|n| n == a.variable.as_str()))
        .collect();
    let passed = coordinates.iter().all(|a| a.pass);
    Ok(OracleReport {
        model: doc_name.to_string(),
        query: QueryEcho::new(q),
        n,
        delta,
        seed,
        n_accepted: est.n_accepted,
        coordinates,
        passed,
    })
}

fn cmd_oracle_check(
    path: &Path,
    input: &QueryInput,
    n: usize,
    delta: f64,
    seed: u64,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let doc = load_model(path)?;
    let model = require_linear(&doc, "oracle-check")?;
    let query = load_query(input)?;
    let report = oracle_check(doc.name.as_str(), model, &query, n, delta, seed)?;
    if json {
        emit_json(out, &report)?;
    } else {
        let mut text = format!(
            "model {}  query: {}\nn={} delta={} seed={} accepted={}\n",
            report.model, report.query.text, report.n, report.delta, report.seed, report.n_accepted
        );
        let _ = writeln!(
            text,
            "{:<12} {:>12} {:>12} {:>12} {:>12}  status",
            "variable", "analytic", "oracle", "|diff|", "bound"
        );
        for a in &report.coordinates {
            let _ = writeln!(
                text,
                "{:<12} {:>12.4} {:>12.4} {:>12.4} {:>12.4}  {}",
                a.variable,
                a.analytic,
                a.oracle,
                a.abs_diff,
                a.bound,
                if a.pass { "ok" } else { "FAIL" }
            );
        }
        let _ = writeln!(text, "{}", if report.passed { "PASS" } else { "FAIL" });
        emit_text(out, &text)?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_DOMAIN })
}

#[derive(Serialize)]
struct Describe {
    model: String,
    kind: &'static str,
    variables: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    roots: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abnormals: Option<Vec<String>>,
    equations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    disturbances: Option<MomentsPayload>,
}

fn cmd_describe(path: &Path, json: bool, out: &mut dyn Write) -> CmdResult {
    let doc = load_model(path)?;
    let names =
        |v: &[crate::model::VariableId]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    // The canonical text carries the equations; reuse its `eq` lines.
    let canonical = dsl::serialize(&doc);
    let equations: Vec<String> = canonical
        .lines()
        .filter_map(|l| l.strip_prefix("eq "))
        .map(str::to_string)
        .collect();
    let summary = match &doc.body {
        ModelBody::Linear(m) => Describe {
            model: doc.name.to_string(),
            kind: "linear",
            variables: names(m.variables()),
            roots: None,
            abnormals: None,
            equations,
            disturbances: Some(
                (&GaussianMoments {
                    variables: m.variables().to_vec(),
                    mean: m.dist_mean().clone(),
                    cov: m.dist_cov().clone(),
                })
                    .into(),
            ),
        },
        ModelBody::Boolean(m) => Describe {
            model: doc.name.to_string(),
            kind: "boolean",
            variables: names(m.variables()),
            roots: Some(names(m.roots())),
            abnormals: Some(names(m.abnormals())),
            equations,
            disturbances: None,
        },
    };
    if json {
        emit_json(out, &summary)?;
    } else {
        let mut text = format!("model {} ({})\n", summary.model, summary.kind);
        let _ = writeln!(text, "variables: {}", summary.variables.join(" "));
        if let Some(r) = &summary.roots {
            let _ = writeln!(text, "roots: {}", r.join(" "));
        }
        if let Some(a) = &summary.abnormals {
            let _ = writeln!(text, "abnormals: {}", a.join(" "));
        }
        for e in &summary.equations {
            let _ = writeln!(text, "  {e}");
        }
        if let Some(d) = &summary.disturbances {
            text.push_str("disturbances:\n");
            text.push_str(&moments_table(d));
        }
        emit_text(out, &text)?;
    }
    Ok(EXIT_OK)
}
