//! The `.scm.txt` model format and the query grammar.
//!
//! Models are line oriented; `#` starts a comment. A linear model:
//!
//! ```text
//! linear model coffee
//! var p q r
//! eq p = 0.5*q + eps
//! eq q = -1.8*p + eps
//! eq r = 1*p + eps
//! eps p ~ N(0, 1)
//! eps q ~ N(19, 3)
//! eps r ~ N(3, 2)
//! cov eps(p) eps(q) 0      # optional off-diagonal disturbance covariance
//! ```
//!
//! A boolean model:
//!
//! ```text
//! boolean model firing_squad
//! var c b t ab_b1 ab_b2 ab_t1 ab_t2
//! root c ab_b1 ab_b2 ab_t1 ab_t2
//! abnormal ab_b1 ab_b2 ab_t1 ab_t2
//! eq b = (c | ab_b1) & !ab_b2
//! eq t = (b | c) & !ab_t1 | ab_t2
//! weight ab_b1 2           # optional relative likelihood, ranks minimal worlds
//! ```
//!
//! Queries: `observe r=4; do p=7; ask q, r`. Clauses are separated by `;` or
//! newlines, each optional and at most once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::ParseError;
use crate::model::{Assignment, BoolExpr, BooleanScm, Consequent, LinearScm, Query, VariableId};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Linear(LinearScm),
    Boolean(BooleanScm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Boolean,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Boolean => "boolean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub name: VariableId,
    pub body: ModelBody,
}

impl ModelDocument {
    pub fn kind(&self) -> ModelKind {
        match self.body {
            ModelBody::Linear(_) => ModelKind::Linear,
            ModelBody::Boolean(_) => ModelKind::Boolean,
        }
    }
}

type PResult<T> = Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn lex_line(line: &str, line_no: usize) -> PResult<Vec<Token>> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                let frac = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i == frac {
                    return Err(ParseError::new(
                        line_no,
                        i + 1,
                        "expected digits after decimal point",
                    ));
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(ParseError::new(line_no, i + 1, "malformed number"));
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::new(line_no, col, format!("malformed number `{text}`")))?;
            if !value.is_finite() {
                return Err(ParseError::new(line_no, col, "number out of range"));
            }
            out.push(Token {
                tok: Tok::Number(value),
                col,
            });
        } else if "=*+-~(),&|!;".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                col,
            });
            i += 1;
        } else {
            return Err(ParseError::new(
                line_no,
                col,
                format!("unexpected character `{c}`"),
            ));
        }
    }
    Ok(out)
}

/// Cursor over the tokens of one line.
struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], line: usize, line_len: usize) -> Self {
        Self {
            toks,
            pos: 0,
            line,
            end_col: line_len + 1,
        }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(self.line, self.col(), msg))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect_end(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> PResult<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`"))
        }
    }

    /// Identifier with its column.
    fn ident(&mut self) -> PResult<(VariableId, usize)> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                let id = VariableId::new(s.as_str()).map_err(|_| {
                    ParseError::new(self.line, col, format!("invalid identifier `{s}`"))
                })?;
                Ok((id, col))
            }
            _ => self.err("expected identifier"),
        }
    }

    fn unsigned_number(&mut self) -> PResult<f64> {
        match self.peek() {
            Some(Tok::Number(v)) => {
                self.pos += 1;
                Ok(*v)
            }
            _ => self.err("expected number"),
        }
    }

    fn signed_number(&mut self) -> PResult<f64> {
        if self.eat_sym('-') {
            Ok(-self.unsigned_number()?)
        } else {
            self.eat_sym('+');
            self.unsigned_number()
        }
    }
}

struct Line {
    no: usize,
    len: usize,
    toks: Vec<Token>,
}

fn lex(text: &str) -> PResult<Vec<Line>> {
    let mut lines = Vec::new();
    for (k, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let toks = lex_line(raw, k + 1)?;
        if !toks.is_empty() {
            lines.push(Line {
                no: k + 1,
                len: raw.chars().count(),
                toks,
            });
        }
    }
    Ok(lines)
}

/// Parses raw bytes, reporting invalid UTF-8 at its position.
pub fn parse_model_bytes(bytes: &[u8]) -> PResult<ModelDocument> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_model(text),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
            let line_start = prefix
                .iter()
                .rposition(|&b| b == b'\n')
                .map_or(0, |p| p + 1);
            let column = String::from_utf8_lossy(&prefix[line_start..])
                .chars()
                .count()
                + 1;
            Err(ParseError::new(line, column, "input is not valid UTF-8"))
        }
    }
}

pub fn parse_model(text: &str) -> PResult<ModelDocument> {
    let lines = lex(text)?;
    let Some(header) = lines.first() else {
        return Err(ParseError::new(
            1,
            1,
            "missing model header (`linear model <name>` or `boolean model <name>`)",
        ));
    };
    let mut cur = Cursor::new(&header.toks, header.no, header.len);
    let kind = if cur.eat_keyword("linear") {
        ModelKind::Linear
    } else if cur.eat_keyword("boolean") {
        ModelKind::Boolean
    } else {
        return cur.err("expected model header (`linear model <name>` or `boolean model <name>`)");
    };
    cur.expect_keyword("model")?;
    let (name, _) = cur.ident()?;
    cur.expect_end()?;

    let body = match kind {
        ModelKind::Linear => ModelBody::Linear(parse_linear(&lines[1..], header.no)?),
        ModelKind::Boolean => ModelBody::Boolean(parse_boolean(&lines[1..], header.no)?),
    };
    Ok(ModelDocument { name, body })
}

/// Declared variables with their declaration positions.
#[derive(Default)]
struct Declarations {
    order: Vec<VariableId>,
    at: BTreeMap<VariableId, (usize, usize)>,
}

impl Declarations {
    fn declare(&mut self, cur: &mut Cursor<'_>) -> PResult<()> {
        if cur.at_end() {
            return cur.err("expected at least one identifier");
        }
        while !cur.at_end() {
            let (id, col) = cur.ident()?;
            if self.at.contains_key(&id) {
                return Err(ParseError::new(
                    cur.line,
                    col,
                    format!("variable `{id}` declared twice"),
                ));
            }
            self.at.insert(id.clone(), (cur.line, col));
            self.order.push(id);
        }
        Ok(())
    }

    fn index(&self, id: &VariableId, line: usize, col: usize) -> PResult<usize> {
        self.order
            .iter()
            .position(|v| v == id)
            .ok_or_else(|| ParseError::new(line, col, format!("unknown identifier `{id}`")))
    }

    /// Resolves an identifier to its declared id, or fails positioned at it.
    fn known(&self, cur: &mut Cursor<'_>) -> PResult<(VariableId, usize)> {
        let (id, col) = cur.ident()?;
        self.index(&id, cur.line, col)?;
        Ok((id, col))
    }
}

fn parse_linear(lines: &[Line], header_line: usize) -> PResult<LinearScm> {
    let mut decls = Declarations::default();
    let mut rows: BTreeMap<usize, (Vec<(usize, f64)>, usize)> = BTreeMap::new();
    let mut eps: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut covs: BTreeMap<(usize, usize), f64> = BTreeMap::new();

    for line in lines {
        let mut cur = Cursor::new(&line.toks, line.no, line.len);
        let kw_col = cur.col();
        if cur.eat_keyword("var") {
            let before = decls.order.len();
            decls.declare(&mut cur)?;
            if let Some(pos) = decls.order[before..]
                .iter()
                .position(|v| v.as_str() == "eps")
            {
                let (l, c) = decls.at[&decls.order[before + pos]];
                return Err(ParseError::new(l, c, "`eps` is reserved"));
            }
        } else if cur.eat_keyword("eq") {
            let (target, col) = decls.known(&mut cur)?;
            let row = decls.index(&target, line.no, col)?;
            if rows.contains_key(&row) {
                return Err(ParseError::new(
                    line.no,
                    col,
                    format!("duplicate equation for `{target}`"),
                ));
            }
            cur.expect_sym('=')?;
            let terms = parse_linear_rhs(&mut cur, &decls)?;
            rows.insert(row, (terms, line.no));
        } else if cur.eat_keyword("eps") {
            let (target, col) = decls.known(&mut cur)?;
            let i = decls.index(&target, line.no, col)?;
            if eps.contains_key(&i) {
                return Err(ParseError::new(
                    line.no,
                    col,
                    format!("duplicate disturbance for `{target}`"),
                ));
            }
            cur.expect_sym('~')?;
            cur.expect_keyword("N")?;
            cur.expect_sym('(')?;
            let mean = cur.signed_number()?;
            cur.expect_sym(',')?;
            let var_col = cur.col();
            let var = cur.signed_number()?;
            if var < 0.0 {
                return Err(ParseError::new(
                    line.no,
                    var_col,
                    "variance must be non-negative",
                ));
            }
            cur.expect_sym(')')?;
            cur.expect_end()?;
            eps.insert(i, (mean, var));
        } else if cur.eat_keyword("cov") {
            let a = disturbance_ref(&mut cur, &decls)?;
            let b_col = cur.col();
            let b = disturbance_ref(&mut cur, &decls)?;
            if a == b {
                return Err(ParseError::new(
                    line.no,
                    b_col,
                    "use `eps` to set a disturbance variance",
                ));
            }
            let key = (a.min(b), a.max(b));
            if covs.contains_key(&key) {
                return Err(ParseError::new(
                    line.no,
                    kw_col,
                    "duplicate covariance entry",
                ));
            }
            let value = cur.signed_number()?;
            cur.expect_end()?;
            covs.insert(key, value);
        } else {
            return cur.err("expected `var`, `eq`, `eps` or `cov`");
        }
    }

    if decls.order.is_empty() {
        return Err(ParseError::new(
            header_line + 1,
            1,
            "model declares no variables",
        ));
    }
    let n = decls.order.len();
    for (i, v) in decls.order.iter().enumerate() {
        if !eps.contains_key(&i) {
            let (l, c) = decls.at[v];
            return Err(ParseError::new(
                l,
                c,
                format!("missing disturbance declaration for `{v}`"),
            ));
        }
    }

    let mut coeff = DMatrix::zeros(n, n);
    for (&i, (terms, _)) in &rows {
        for &(j, c) in terms {
            coeff[(i, j)] = c;
        }
    }
    let mean = DVector::from_fn(n, |i, _| eps[&i].0);
    let mut cov = DMatrix::from_fn(n, n, |i, j| if i == j { eps[&i].1 } else { 0.0 });
    for (&(i, j), &v) in &covs {
        cov[(i, j)] = v;
        cov[(j, i)] = v;
    }
    LinearScm::new(decls.order, coeff, mean, cov)
        .map_err(|e| ParseError::new(header_line, 1, e.to_string()))
}

fn disturbance_ref(cur: &mut Cursor<'_>, decls: &Declarations) -> PResult<usize> {
    cur.expect_keyword("eps")?;
    cur.expect_sym('(')?;
    let (id, col) = decls.known(cur)?;
    cur.expect_sym(')')?;
    decls.index(&id, cur.line, col)
}

/// `[±] term (± term)*` where a term is `eps`, `<num>*<id>` or `<id>`; `eps`
/// must appear exactly once, with a plus sign.
fn parse_linear_rhs(cur: &mut Cursor<'_>, decls: &Declarations) -> PResult<Vec<(usize, f64)>> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut seen_eps = false;
    let mut first = true;
    loop {
        let sign_col = cur.col();
        let negative = if cur.eat_sym('-') {
            true
        } else if cur.eat_sym('+') || first {
            false
        } else if cur.at_end() {
            break;
        } else {
            return cur.err("expected `+` or `-`");
        };
        first = false;

        if cur.eat_keyword("eps") {
            if seen_eps {
                return Err(ParseError::new(cur.line, sign_col, "`eps` appears twice"));
            }
            if negative {
                return Err(ParseError::new(
                    cur.line,
                    sign_col,
                    "`eps` must be added, not subtracted",
                ));
            }
            seen_eps = true;
            continue;
        }
        let coef = match cur.peek() {
            Some(Tok::Number(_)) => {
                let c = cur.unsigned_number()?;
                cur.expect_sym('*')?;
                c
            }
            _ => 1.0,
        };
        let (id, col) = decls.known(cur)?;
        let j = decls.index(&id, cur.line, col)?;
        if terms.iter().any(|&(k, _)| k == j) {
            return Err(ParseError::new(
                cur.line,
                col,
                format!("`{id}` appears twice in the equation"),
            ));
        }
        terms.push((j, if negative { -coef } else { coef }));
    }
    if !seen_eps {
        return cur.err("equation must end with `+ eps`");
    }
    Ok(terms)
}

fn parse_boolean(lines: &[Line], header_line: usize) -> PResult<BooleanScm> {
    let mut decls = Declarations::default();
    let mut roots: BTreeMap<VariableId, (usize, usize)> = BTreeMap::new();
    let mut abnormals: BTreeMap<VariableId, (usize, usize)> = BTreeMap::new();
    let mut equations: BTreeMap<VariableId, (BoolExpr, usize, usize)> = BTreeMap::new();
    let mut weights: BTreeMap<VariableId, (f64, usize, usize)> = BTreeMap::new();

    for line in lines {
        let mut cur = Cursor::new(&line.toks, line.no, line.len);
        if cur.eat_keyword("var") {
            decls.declare(&mut cur)?;
        } else if cur.eat_keyword("root") || cur.eat_keyword("abnormal") {
            let is_root = matches!(&line.toks[0].tok, Tok::Ident(s) if s == "root");
            let set = if is_root { &mut roots } else { &mut abnormals };
            while !cur.at_end() {
                let (id, col) = decls.known(&mut cur)?;
                if set.insert(id.clone(), (line.no, col)).is_some() {
                    return Err(ParseError::new(
                        line.no,
                        col,
                        format!("`{id}` listed twice"),
                    ));
                }
            }
        } else if cur.eat_keyword("eq") {
            let (target, col) = decls.known(&mut cur)?;
            if equations.contains_key(&target) {
                return Err(ParseError::new(
                    line.no,
                    col,
                    format!("duplicate equation for `{target}`"),
                ));
            }
            cur.expect_sym('=')?;
            let expr = parse_or(&mut cur, &decls, 0)?;
            cur.expect_end()?;
            equations.insert(target, (expr, line.no, col));
        } else if cur.eat_keyword("weight") {
            let (id, col) = decls.known(&mut cur)?;
            let w_col = cur.col();
            let w = cur.unsigned_number()?;
            if w <= 0.0 {
                return Err(ParseError::new(line.no, w_col, "weight must be positive"));
            }
            cur.expect_end()?;
            if weights.insert(id.clone(), (w, line.no, col)).is_some() {
                return Err(ParseError::new(
                    line.no,
                    col,
                    format!("duplicate weight for `{id}`"),
                ));
            }
        } else {
            return cur.err("expected `var`, `root`, `abnormal`, `eq` or `weight`");
        }
    }

    if decls.order.is_empty() {
        return Err(ParseError::new(
            header_line + 1,
            1,
            "model declares no variables",
        ));
    }
    for (v, &(l, c)) in &abnormals {
        if !roots.contains_key(v) {
            return Err(ParseError::new(
                l,
                c,
                format!("abnormality variable `{v}` must also be a root"),
            ));
        }
    }
    for (v, &(_, l, c)) in &equations {
        if roots.contains_key(v) {
            return Err(ParseError::new(
                l,
                c,
                format!("root variable `{v}` cannot have an equation"),
            ));
        }
    }
    for v in &decls.order {
        if !roots.contains_key(v) && !equations.contains_key(v) {
            let (l, c) = decls.at[v];
            return Err(ParseError::new(
                l,
                c,
                format!("variable `{v}` is neither a root nor defined by an equation"),
            ));
        }
    }
    for (v, &(_, l, c)) in &weights {
        if !abnormals.contains_key(v) {
            return Err(ParseError::new(
                l,
                c,
                format!("weight given for non-abnormal `{v}`"),
            ));
        }
    }
    if let Some((l, c)) = find_cycle(&decls, &equations) {
        return Err(ParseError::new(l, c, "equations form a cycle"));
    }

    let eq_positions: BTreeMap<VariableId, (usize, usize)> = equations
        .iter()
        .map(|(k, (_, l, c))| (k.clone(), (*l, *c)))
        .collect();
    let equations: BTreeMap<VariableId, BoolExpr> =
        equations.into_iter().map(|(k, (e, _, _))| (k, e)).collect();
    BooleanScm::new(
        decls.order,
        roots.into_keys(),
        abnormals.into_keys(),
        equations,
        weights.into_iter().map(|(k, (w, _, _))| (k, w)).collect(),
    )
    .map_err(|e| {
        let (l, c) = eq_positions
            .values()
            .next()
            .copied()
            .unwrap_or((header_line, 1));
        ParseError::new(l, c, e.to_string())
    })
}

/// Position of an equation that lies on a dependency cycle, if any.
fn find_cycle(
    decls: &Declarations,
    equations: &BTreeMap<VariableId, (BoolExpr, usize, usize)>,
) -> Option<(usize, usize)> {
    // Kahn's algorithm on equation-defined variables.
    let deps: BTreeMap<&VariableId, BTreeSet<&VariableId>> = equations
        .iter()
        .map(|(k, (e, _, _))| {
            (
                k,
                e.variables()
                    .into_iter()
                    .filter(|d| equations.contains_key(*d))
                    .collect(),
            )
        })
        .collect();
    let mut remaining = deps.clone();
    loop {
        let ready: Vec<&VariableId> = remaining
            .iter()
            .filter(|(_, ds)| ds.is_empty())
            .map(|(k, _)| *k)
            .collect();
        if ready.is_empty() {
            break;
        }
        for k in &ready {
            remaining.remove(k);
        }
        for ds in remaining.values_mut() {
            for k in &ready {
                ds.remove(k);
            }
        }
    }
    // Report the first cyclic equation in declaration order.
    decls
        .order
        .iter()
        .find(|v| remaining.contains_key(v))
        .map(|v| (equations[v].1, equations[v].2))
}

const MAX_EXPR_DEPTH: usize = 256;

fn parse_or(cur: &mut Cursor<'_>, decls: &Declarations, depth: usize) -> PResult<BoolExpr> {
    let mut lhs = parse_and(cur, decls, depth)?;
    while cur.eat_sym('|') {
        let rhs = parse_and(cur, decls, depth)?;
        lhs = BoolExpr::or(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor<'_>, decls: &Declarations, depth: usize) -> PResult<BoolExpr> {
    let mut lhs = parse_not(cur, decls, depth)?;
    while cur.eat_sym('&') {
        let rhs = parse_not(cur, decls, depth)?;
        lhs = BoolExpr::and(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_not(cur: &mut Cursor<'_>, decls: &Declarations, depth: usize) -> PResult<BoolExpr> {
    if depth > MAX_EXPR_DEPTH {
        return cur.err("expression nested too deeply");
    }
    if cur.eat_sym('!') {
        return Ok(BoolExpr::not(parse_not(cur, decls, depth + 1)?));
    }
    if cur.eat_sym('(') {
        let e = parse_or(cur, decls, depth + 1)?;
        cur.expect_sym(')')?;
        return Ok(e);
    }
    match cur.peek() {
        Some(Tok::Number(v)) if *v == 0.0 || *v == 1.0 => {
            let b = *v == 1.0;
            cur.pos += 1;
            Ok(BoolExpr::Const(b))
        }
        Some(Tok::Number(_)) => cur.err("boolean literals are `0` and `1`"),
        Some(Tok::Ident(_)) => Ok(BoolExpr::Var(decls.known(cur)?.0)),
        _ => cur.err("expected variable, literal, `!` or `(`"),
    }
}

/// Query text: `observe <id>=<value>, ...; do <id>=<value>, ...; ask <id>[=<value>], ...`.
pub fn parse_query(text: &str) -> PResult<Query> {
    let mut query = Query::default();
    let mut seen: BTreeMap<&'static str, (usize, usize)> = BTreeMap::new();

    for (k, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let line_no = k + 1;
        let toks = lex_line(raw, line_no)?;
        for clause in toks.split(|t| t.tok == Tok::Sym(';')) {
            if clause.is_empty() {
                continue;
            }
            let mut cur = Cursor::new(clause, line_no, raw.chars().count());
            let col = cur.col();
            let kw = if cur.eat_keyword("observe") {
                "observe"
            } else if cur.eat_keyword("do") {
                "do"
            } else if cur.eat_keyword("ask") {
                "ask"
            } else {
                return cur.err("expected `observe`, `do` or `ask`");
            };
            if seen.insert(kw, (line_no, col)).is_some() {
                return Err(ParseError::new(
                    line_no,
                    col,
                    format!("duplicate `{kw}` clause"),
                ));
            }
            match kw {
                "observe" => query.observations = parse_assignments(&mut cur)?,
                "do" => query.intervention = parse_assignments(&mut cur)?,
                _ => query.consequents = parse_consequents(&mut cur)?,
            }
        }
    }
    Ok(query)
}

fn parse_assignments(cur: &mut Cursor<'_>) -> PResult<Assignment> {
    let mut out = Assignment::new();
    loop {
        let (id, col) = cur.ident()?;
        cur.expect_sym('=')?;
        let value = cur.signed_number()?;
        if out.insert(id.clone(), value).is_some() {
            return Err(ParseError::new(
                cur.line,
                col,
                format!("`{id}` assigned twice in one clause"),
            ));
        }
        if !cur.eat_sym(',') {
            break;
        }
    }
    cur.expect_end()?;
    Ok(out)
}

fn parse_consequents(cur: &mut Cursor<'_>) -> PResult<Vec<Consequent>> {
    let mut out: Vec<Consequent> = Vec::new();
    loop {
        let (id, col) = cur.ident()?;
        let value = if cur.eat_sym('=') {
            Some(cur.signed_number()?)
        } else {
            None
        };
        if out.iter().any(|c| c.variable == id) {
            return Err(ParseError::new(
                cur.line,
                col,
                format!("`{id}` asked twice"),
            ));
        }
        out.push(Consequent {
            variable: id,
            value,
        });
        if !cur.eat_sym(',') {
            break;
        }
    }
    cur.expect_end()?;
    Ok(out)
}

/// Canonical text for a document. Floats use the shortest decimal that
/// parses back to the same value, so `parse_model(&serialize(d)) == d`.
pub fn serialize(doc: &ModelDocument) -> String {
    let mut out = String::new();
    match &doc.body {
        ModelBody::Linear(m) => serialize_linear(&mut out, &doc.name, m),
        ModelBody::Boolean(m) => serialize_boolean(&mut out, &doc.name, m),
    }
    out
}

fn num(v: f64) -> String {
    // `{}` never uses exponent notation for f64 and round-trips exactly.
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn id_list(ids: &[VariableId]) -> String {
    ids.iter()
        .map(VariableId::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

fn serialize_linear(out: &mut String, name: &VariableId, m: &LinearScm) {
    let vars = m.variables();
    let _ = writeln!(out, "linear model {name}");
    let _ = writeln!(out, "var {}", id_list(vars));
    for (i, v) in vars.iter().enumerate() {
        let mut rhs = String::new();
        for (j, u) in vars.iter().enumerate() {
            let c = m.coeff()[(i, j)];
            if c == 0.0 {
                continue;
            }
            if rhs.is_empty() {
                rhs = format!("{}*{u}", num(c));
            } else if c < 0.0 {
                let _ = write!(rhs, " - {}*{u}", num(-c));
            } else {
                let _ = write!(rhs, " + {}*{u}", num(c));
            }
        }
        if rhs.is_empty() {
            let _ = writeln!(out, "eq {v} = eps");
        } else {
            let _ = writeln!(out, "eq {v} = {rhs} + eps");
        }
    }
    for (i, v) in vars.iter().enumerate() {
        let _ = writeln!(
            out,
            "eps {v} ~ N({}, {})",
            num(m.dist_mean()[i]),
            num(m.dist_cov()[(i, i)])
        );
    }
    for i in 0..vars.len() {
        for j in (i + 1)..vars.len() {
            let c = m.dist_cov()[(i, j)];
            if c != 0.0 {
                let _ = writeln!(out, "cov eps({}) eps({}) {}", vars[i], vars[j], num(c));
            }
        }
    }
}

fn serialize_boolean(out: &mut String, name: &VariableId, m: &BooleanScm) {
    let _ = writeln!(out, "boolean model {name}");
    let _ = writeln!(out, "var {}", id_list(m.variables()));
    if !m.roots().is_empty() {
        let _ = writeln!(out, "root {}", id_list(m.roots()));
    }
    if !m.abnormals().is_empty() {
        let _ = writeln!(out, "abnormal {}", id_list(m.abnormals()));
    }
    for v in m.variables() {
        if let Some(e) = m.equation(v.as_str()) {
            let _ = writeln!(out, "eq {v} = {e}");
        }
    }
    for v in m.abnormals() {
        if let Some(w) = m.weights().get(v) {
            let _ = writeln!(out, "weight {v} {}", num(*w));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COFFEE: &str = "\
# coffee / tea demand
linear model coffee
var p q r
eq p = 0.5*q + eps
eq q = -1.8*p + eps
eq r = 1.0*p + eps
eps p ~ N(0, 1)
eps q ~ N(19, 3)
eps r ~ N(3, 2)
";

    const FIRING: &str = "\
boolean model fs
var c b t ab_b1 ab_b2 ab_t1 ab_t2
root c ab_b1 ab_b2 ab_t1 ab_t2
abnormal ab_b1 ab_b2 ab_t1 ab_t2
eq b = (c | ab_b1) & !ab_b2
eq t = (b | c) & !ab_t1 | ab_t2
";

    fn linear(doc: &ModelDocument) -> &LinearScm {
        match &doc.body {
            ModelBody::Linear(m) => m,
            _ => panic!("expected linear model"),
        }
    }

    fn boolean(doc: &ModelDocument) -> &BooleanScm {
        match &doc.body {
            ModelBody::Boolean(m) => m,
            _ => panic!("expected boolean model"),
        }
    }

    fn id(n: &str) -> VariableId {
        VariableId::new(n).unwrap()
    }

    #[test]
    fn coffee_model_parses_to_expected_parameters() {
        let doc = parse_model(COFFEE).unwrap();
        assert_eq!(doc.name.as_str(), "coffee");
        let m = linear(&doc);
        assert_eq!(
            *m.coeff(),
            DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, -1.8, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        assert_eq!(*m.dist_mean(), DVector::from_vec(vec![0.0, 19.0, 3.0]));
        assert_eq!(
            *m.dist_cov(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]))
        );
    }

    #[test]
    fn firing_squad_equation_tree() {
        let doc = parse_model(FIRING).unwrap();
        let m = boolean(&doc);
        let v = |n: &str| BoolExpr::Var(id(n));
        assert_eq!(
            m.equation("b").unwrap(),
            &BoolExpr::and(BoolExpr::or(v("c"), v("ab_b1")), BoolExpr::not(v("ab_b2")))
        );
        assert_eq!(
            m.equation("t").unwrap(),
            &BoolExpr::or(
                BoolExpr::and(BoolExpr::or(v("b"), v("c")), BoolExpr::not(v("ab_t1"))),
                v("ab_t2")
            )
        );
        assert_eq!(m.abnormals().len(), 4);
    }

    #[test]
    fn empty_input_is_missing_header() {
        let err = parse_model("").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
        assert!(err.message.contains("header"));
        assert!(parse_model("# only a comment\n\n").is_err());
    }

    #[test]
    fn errors_carry_positions() {
        let cases: &[(&str, (usize, usize), &str)] = &[
            (
                "linear model m\nvar a\neq a = 2*b + eps\neps a ~ N(0, 1)\n",
                (3, 10),
                "unknown identifier",
            ),
            (
                "linear model m\nvar a b\neq a = eps\neq a = eps\neps a ~ N(0,1)\neps b ~ N(0,1)\n",
                (4, 4),
                "duplicate equation",
            ),
            (
                "linear model m\nvar a b\neps a ~ N(0, 1)\n",
                (2, 7),
                "missing disturbance",
            ),
            (
                "linear model m\nvar a\neq a = 1.5 + eps\n",
                (3, 12),
                "expected `*`",
            ),
            ("linear model m\nvar a $\n", (2, 7), "unexpected character"),
            (
                "boolean model m\nvar a b\nroot a\neq b = a & b\n",
                (4, 4),
                "cycle",
            ),
            (
                "boolean model m\nvar a b\nroot a\neq b = a &\n",
                (4, 11),
                "expected variable",
            ),
            (
                "boolean model m\nvar a b\nroot a\n",
                (2, 7),
                "neither a root",
            ),
            (
                "boolean model m\nvar a b\nroot a\nabnormal b\neq b = a\n",
                (4, 10),
                "must also be a root",
            ),
        ];
        for (text, pos, msg) in cases {
            let err = parse_model(text).unwrap_err();
            assert_eq!((err.line, err.column), *pos, "{text:?}: {err}");
            assert!(err.message.contains(msg), "{text:?}: {err}");
        }
    }

    #[test]
    fn self_loop_and_singular_models_parse() {
        // Numerical problems are for validation, not the parser.
        let doc = parse_model("linear model m\nvar a b\neq a = b + eps\neq b = a + eps\neps a ~ N(0, 1)\neps b ~ N(0, 1)\n").unwrap();
        assert_eq!(linear(&doc).coeff()[(0, 1)], 1.0);
    }

    #[test]
    fn crlf_and_comments() {
        let text = COFFEE
            .replace('\n', "\r\n")
            .replace("eq r = 1.0*p + eps", "eq r = p + eps # unit");
        assert_eq!(parse_model(&text).unwrap(), parse_model(COFFEE).unwrap());
    }

    #[test]
    fn cov_clause_fills_both_triangles() {
        let text = format!("{COFFEE}cov eps(r) eps(p) -0.25\n");
        let doc = parse_model(&text).unwrap();
        let m = linear(&doc);
        assert_eq!(m.dist_cov()[(0, 2)], -0.25);
        assert_eq!(m.dist_cov()[(2, 0)], -0.25);
        assert!(serialize(&doc).contains("cov eps(p) eps(r) -0.25"));
        assert_eq!(parse_model(&serialize(&doc)).unwrap(), doc);
    }

    #[test]
    fn serialize_round_trips() {
        for text in [COFFEE, FIRING] {
            let doc = parse_model(text).unwrap();
            let out = serialize(&doc);
            assert_eq!(parse_model(&out).unwrap(), doc, "{out}");
        }
    }

    #[test]
    fn serialized_coffee_is_canonical() {
        let out = serialize(&parse_model(COFFEE).unwrap());
        assert_eq!(
            out,
            "linear model coffee\nvar p q r\neq p = 0.5*q + eps\neq q = -1.8*p + eps\neq r = 1*p + eps\n\
             eps p ~ N(0, 1)\neps q ~ N(19, 3)\neps r ~ N(3, 2)\n"
        );
    }

    #[test]
    fn query_for_price_control_given_tea() {
        let q = parse_query("observe r=4; do p=7; ask q,r").unwrap();
        assert_eq!(q.observations, [(id("r"), 4.0)].into_iter().collect());
        assert_eq!(q.intervention, [(id("p"), 7.0)].into_iter().collect());
        assert_eq!(
            q.consequents,
            vec![Consequent::new(id("q")), Consequent::new(id("r"))]
        );
        assert_eq!(q.to_string(), "observe r=4; do p=7; ask q, r");
    }

    #[test]
    fn query_for_price_control_alone() {
        let q = parse_query("do p=7; ask q").unwrap();
        assert!(q.observations.is_empty());
        assert_eq!(q.intervention.len(), 1);
        assert_eq!(q.consequents.len(), 1);
    }

    #[test]
    fn marginal_query() {
        let q = parse_query("ask q").unwrap();
        assert!(q.observations.is_empty() && q.intervention.is_empty());
        assert_eq!(parse_query("").unwrap(), Query::default());
    }

    #[test]
    fn query_on_several_lines_with_pinned_consequent() {
        let q = parse_query("observe c=0, t=1\ndo b=0\nask t=0\n").unwrap();
        assert_eq!(q.observations.len(), 2);
        assert_eq!(q.consequents[0].value, Some(0.0));
        assert_eq!(
            parse_query("do x=-1.5").unwrap().intervention[&id("x")],
            -1.5
        );
    }

    #[test]
    fn query_errors() {
        let cases: &[(&str, (usize, usize))] = &[
            ("observe r=4; observe p=7", (1, 14)),
            ("do p=7, p=8", (1, 9)),
            ("ask q, q", (1, 8)),
            ("look q", (1, 1)),
            ("observe r", (1, 10)),
            ("do p=7 q", (1, 8)),
        ];
        for (text, pos) in cases {
            let err = parse_query(text).unwrap_err();
            assert_eq!((err.line, err.column), *pos, "{text:?}: {err}");
        }
    }

    #[test]
    fn invalid_utf8_is_positioned() {
        let err = parse_model_bytes(b"linear model m\nvar a\xff\n").unwrap_err();
        assert_eq!((err.line, err.column), (2, 6));
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let expr = format!("{}a{}", "(".repeat(5000), ")".repeat(5000));
        let text = format!("boolean model m\nvar a b\nroot a\neq b = {expr}\n");
        assert!(parse_model(&text).unwrap_err().message.contains("deeply"));
    }

    #[test]
    fn weights_round_trip() {
        let text = format!("{FIRING}weight ab_b1 2.5\nweight ab_t2 0.5\n");
        let doc = parse_model(&text).unwrap();
        assert_eq!(boolean(&doc).weights().len(), 2);
        assert_eq!(parse_model(&serialize(&doc)).unwrap(), doc);
        let err = parse_model(&format!("{FIRING}weight c 2\n")).unwrap_err();
        assert_eq!((err.line, err.column), (7, 8));
    }
}
