//! Text formats: networks, constraints, parameter specs, instantiations and
//! regions.
//!
//! Network grammar:
//!
//! ```text
//! var NAME { values: a, b; parents: P1, P2 }
//! cpt NAME { (p1val, p2val): 0.72, 0.28; ... }
//! ```
//!
//! Root rows are written `(): ...` or without the parenthesised key.
//! Comments run from `#` or `//` to the end of the line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;

use crate::bn::{BayesNet, Constraint, Dag, Direction, EntryCoord, Literal, ParamAssignment, Variable, ROW_SUM_TOL};
use crate::error::{Error, Result};
use crate::poly::{Instantiation, Interval, Region};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if "{}():;,".contains(c) {
                out.push(Token { tok: Tok::Punct(c), line: ln + 1, column: i + 1 });
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len()
                && !chars[i].is_whitespace()
                && !"{}():;,#".contains(chars[i])
                && !(chars[i] == '/' && chars.get(i + 1) == Some(&'/'))
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Word(word), line: ln + 1, column: start + 1 });
        }
    }
    out
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, column) = self.here();
        Err(Error::Parse { line, column, message: message.into() })
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.column))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn punct(&mut self, c: char) -> Result<()> {
        if self.peek_punct(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn word(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    /// Comma-separated words up to (not including) `;` or `}`.
    fn word_list(&mut self, what: &str) -> Result<Vec<String>> {
        let mut out = vec![self.word(what)?];
        while self.peek_punct(',') {
            self.pos += 1;
            out.push(self.word(what)?);
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<f64> {
        let here = self.pos;
        let w = self.word("a probability")?;
        match w.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => {
                self.pos = here;
                self.err(format!("malformed number `{w}`"))
            }
        }
    }
}

struct VarDecl {
    name: String,
    values: Vec<String>,
    parents: Vec<String>,
    at: (usize, usize),
}

struct CptRow {
    key: Vec<String>,
    probs: Vec<f64>,
    at: (usize, usize),
}

struct CptDecl {
    rows: Vec<CptRow>,
    at: (usize, usize),
}

/// Parses a network. Rows must sum to 1 within `1e-9`.
pub fn parse_network(text: &str) -> Result<BayesNet> {
    parse_network_with(text, false)
}

/// As [`parse_network`]; with `renormalize`, rows off by more than the
/// tolerance are rescaled instead of rejected.
pub fn parse_network_with(text: &str, renormalize: bool) -> Result<BayesNet> {
    let toks = tokenize(text);
    let end = (text.lines().count().max(1), 1);
    let mut p = Parser { toks, pos: 0, end };
    let mut vars: Vec<VarDecl> = Vec::new();
    let mut cpts: BTreeMap<String, CptDecl> = BTreeMap::new();
    while p.peek().is_some() {
        let at = p.here();
        match p.peek() {
            Some(Tok::Word(w)) if w == "var" => {
                p.pos += 1;
                let name = p.word("a variable name")?;
                p.punct('{')?;
                let mut values = None;
                let mut parents = Vec::new();
                while !p.peek_punct('}') {
                    let key_at = p.pos;
                    let key = p.word("`values` or `parents`")?;
                    p.punct(':')?;
                    match key.as_str() {
                        "values" => values = Some(p.word_list("a value name")?),
                        "parents" => {
                            if !p.peek_punct(';') && !p.peek_punct('}') {
                                parents = p.word_list("a parent name")?;
                            }
                        }
                        other => {
                            p.pos = key_at;
                            return p.err(format!("unknown field `{other}`"));
                        }
                    }
                    if p.peek_punct(';') {
                        p.pos += 1;
                    } else if !p.peek_punct('}') {
                        return p.err("expected `;` or `}`");
                    }
                }
                p.punct('}')?;
                let Some(values) = values else {
                    return Err(Error::Parse { line: at.0, column: at.1, message: format!("`{name}` has no values") });
                };
                if vars.iter().any(|v| v.name == name) {
                    return Err(Error::Parse { line: at.0, column: at.1, message: format!("`{name}` declared twice") });
                }
                vars.push(VarDecl { name, values, parents, at });
            }
            Some(Tok::Word(w)) if w == "cpt" => {
                p.pos += 1;
                let name = p.word("a variable name")?;
                p.punct('{')?;
                let mut rows = Vec::new();
                while !p.peek_punct('}') {
                    let row_at = p.here();
                    let mut key = Vec::new();
                    if p.peek_punct('(') {
                        p.pos += 1;
                        if !p.peek_punct(')') {
                            key = p.word_list("a parent value")?;
                        }
                        p.punct(')')?;
                        p.punct(':')?;
                    }
                    let mut probs = vec![p.number()?];
                    while p.peek_punct(',') {
                        p.pos += 1;
                        probs.push(p.number()?);
                    }
                    if p.peek_punct(';') {
                        p.pos += 1;
                    } else if !p.peek_punct('}') {
                        return p.err("expected `;` or `}`");
                    }
                    rows.push(CptRow { key, probs, at: row_at });
                }
                p.punct('}')?;
                if cpts.insert(name.clone(), CptDecl { rows, at }).is_some() {
                    return Err(Error::Parse { line: at.0, column: at.1, message: format!("second CPT for `{name}`") });
                }
            }
            _ => return p.err("expected `var` or `cpt`"),
        }
    }
    build(vars, cpts, renormalize)
}

fn build(vars: Vec<VarDecl>, mut cpts: BTreeMap<String, CptDecl>, renormalize: bool) -> Result<BayesNet> {
    let index: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut dag_vars = Vec::with_capacity(vars.len());
    for v in &vars {
        let parents = v
            .parents
            .iter()
            .map(|p| {
                index.get(p.as_str()).copied().ok_or_else(|| Error::Parse {
                    line: v.at.0,
                    column: v.at.1,
                    message: format!("unknown parent `{p}` of `{}`", v.name),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        dag_vars.push(Variable { name: v.name.clone(), values: v.values.clone(), parents });
    }
    if let Some((name, decl)) = cpts.iter().find(|(n, _)| !index.contains_key(n.as_str())) {
        return Err(Error::Parse { line: decl.at.0, column: decl.at.1, message: format!("CPT for undeclared `{name}`") });
    }
    let dag = Dag::new(dag_vars)?;
    let mut tables = Vec::with_capacity(dag.len());
    for (v, decl) in vars.iter().enumerate() {
        let Some(cpt) = cpts.remove(&decl.name) else {
            return Err(Error::Parse { line: decl.at.0, column: decl.at.1, message: format!("no CPT for `{}`", decl.name) });
        };
        let parents = &dag.var(v).parents;
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; dag.row_count(v)];
        for row in cpt.rows {
            let perr = |message: String| Error::Parse { line: row.at.0, column: row.at.1, message };
            if row.key.len() != parents.len() {
                return Err(perr(format!(
                    "row key has {} values, `{}` has {} parents",
                    row.key.len(),
                    decl.name,
                    parents.len()
                )));
            }
            let pvals = row
                .key
                .iter()
                .zip(parents)
                .map(|(val, &pv)| dag.value_index(pv, val))
                .collect::<Result<Vec<_>>>()?;
            let r = dag.row_index(v, &pvals);
            if row.probs.len() != decl.values.len() {
                return Err(perr(format!(
                    "row has {} entries, `{}` has {} values",
                    row.probs.len(),
                    decl.name,
                    decl.values.len()
                )));
            }
            if let Some(x) = row.probs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(perr(format!("probability {x} outside [0, 1]")));
            }
            let sum: f64 = row.probs.iter().sum();
            let mut probs = row.probs;
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                if !renormalize || sum <= 0.0 {
                    return Err(Error::RowSum {
                        var: decl.name.clone(),
                        row: format!("{} (line {})", dag.row_label(v, r), row.at.0),
                        sum,
                    });
                }
                probs.iter_mut().for_each(|x| *x /= sum);
            }
            if rows[r].replace(probs).is_some() {
                return Err(perr(format!("row {} of `{}` given twice", dag.row_label(v, r), decl.name)));
            }
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(r, row)| {
                row.ok_or_else(|| Error::Parse {
                    line: cpt.at.0,
                    column: cpt.at.1,
                    message: format!("row {} of `{}` missing", dag.row_label(v, r), decl.name),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tables.push(rows);
    }
    BayesNet::new(dag, tables)
}

/// Inverse of [`parse_network`]; floats use the shortest round-tripping form.
pub fn write_network(bn: &BayesNet) -> String {
    let dag = bn.dag();
    let mut out = String::new();
    for v in dag.vars() {
        let _ = write!(out, "var {} {{ values: {}", v.name, v.values.join(", "));
        if !v.parents.is_empty() {
            let names: Vec<&str> = v.parents.iter().map(|&p| dag.var(p).name.as_str()).collect();
            let _ = write!(out, "; parents: {}", names.join(", "));
        }
        out.push_str(" }\n");
    }
    for (i, v) in dag.vars().iter().enumerate() {
        let _ = writeln!(out, "cpt {} {{", v.name);
        for (r, row) in bn.cpt(i).iter().enumerate() {
            let key: Vec<&str> = v
                .parents
                .iter()
                .zip(dag.row_values(i, r))
                .map(|(&p, val)| dag.var(p).values[val].as_str())
                .collect();
            let probs: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "  ({}): {};", key.join(", "), probs.join(", "));
        }
        out.push_str("}\n");
    }
    out
}

fn parse_literals(dag: &Dag, text: &str) -> Result<Vec<Literal>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(['&', ','])
        .map(|lit| {
            let (var, value) = lit
                .split_once('=')
                .ok_or_else(|| Error::InvalidConstraint(format!("literal `{}` lacks `=`", lit.trim())))?;
            let var = dag.index_of(var.trim())?;
            let value = dag.value_index(var, value.trim())?;
            Ok(Literal { var, value })
        })
        .collect()
}

/// `P(H=h & ... | E=e & ...) <= 0.5` (or `>=`).
pub fn parse_constraint(dag: &Dag, text: &str) -> Result<Constraint> {
    let text = text.trim();
    let bad = |m: &str| Error::InvalidConstraint(format!("{m} in `{text}`"));
    let rest = text
        .strip_prefix("P(")
        .or_else(|| text.strip_prefix("Pr("))
        .ok_or_else(|| bad("expected `P(`"))?;
    let close = rest.rfind(')').ok_or_else(|| bad("missing `)`"))?;
    let (inner, tail) = (&rest[..close], rest[close + 1..].trim());
    let (direction, threshold) = if let Some(t) = tail.strip_prefix("<=") {
        (Direction::AtMost, t)
    } else if let Some(t) = tail.strip_prefix(">=") {
        (Direction::AtLeast, t)
    } else {
        return Err(bad("expected `<=` or `>=`"));
    };
    let threshold: f64 = threshold
        .trim()
        .parse()
        .map_err(|_| bad(&format!("malformed threshold `{}`", threshold.trim())))?;
    let (h, e) = inner.split_once('|').unwrap_or((inner, ""));
    let hypothesis = parse_literals(dag, h)?;
    let evidence = parse_literals(dag, e)?;
    Constraint::new(dag, hypothesis, evidence, direction, threshold)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default = "default_covariation")]
    covariation: String,
    delta: Option<f64>,
    #[serde(default, rename = "param")]
    params: Vec<SpecParam>,
}

fn default_covariation() -> String {
    "linear-proportional".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecParam {
    name: String,
    variable: String,
    #[serde(default)]
    parents: Vec<String>,
    value: String,
    bounds: Option<[f64; 2]>,
}

/// Parameter assignments from a TOML spec, plus the optional clamp `delta`.
///
/// ```toml
/// covariation = "linear-proportional"
/// [[param]]
/// name = "p"
/// variable = "Antigen"
/// parents = ["yes", "yes"]
/// value = "pos"
/// ```
pub fn parse_param_spec(bn: &BayesNet, text: &str) -> Result<(Vec<ParamAssignment>, Option<f64>)> {
    let spec: SpecFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| {
                let before = &text[..s.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                (line, column)
            })
            .unwrap_or((0, 0));
        Error::Parse { line, column, message: e.message().to_string() }
    })?;
    if spec.covariation != "linear-proportional" {
        return Err(Error::InvalidArgument(format!("unsupported co-variation scheme `{}`", spec.covariation)));
    }
    let dag = bn.dag();
    let mut out = Vec::with_capacity(spec.params.len());
    for p in spec.params {
        let var = dag.index_of(&p.variable)?;
        let parents = &dag.var(var).parents;
        if p.parents.len() != parents.len() {
            return Err(Error::InvalidModel(format!(
                "parameter `{}`: `{}` has {} parents, {} values given",
                p.name,
                p.variable,
                parents.len(),
                p.parents.len()
            )));
        }
        let pvals = p
            .parents
            .iter()
            .zip(parents)
            .map(|(val, &pv)| dag.value_index(pv, val))
            .collect::<Result<Vec<_>>>()?;
        let coord = EntryCoord { var, row: dag.row_index(var, &pvals), value: dag.value_index(var, &p.value)? };
        let interval = p.bounds.map(|[lb, ub]| Interval::new(lb, ub));
        out.push(ParamAssignment { coord, name: p.name, interval });
    }
    Ok((out, spec.delta))
}

/// `p=0.9,q=0.95`.
pub fn parse_instantiation(text: &str) -> Result<Instantiation> {
    let mut u = Instantiation::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("`{part}` is not name=value")))?;
        let x: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("malformed number `{}`", value.trim())))?;
        if u.get(name.trim()).is_some() {
            return Err(Error::InvalidArgument(format!("`{}` given twice", name.trim())));
        }
        u.insert(name.trim(), x);
    }
    Ok(u)
}

/// `p=0.2:0.6,q=0.1:0.3`, axes ordered as `names`.
pub fn parse_region(text: &str, names: &[String]) -> Result<Region> {
    let mut bounds: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || Error::InvalidArgument(format!("`{part}` is not name=lb:ub"));
        let (name, range) = part.split_once('=').ok_or_else(bad)?;
        let (lb, ub) = range.split_once(':').ok_or_else(bad)?;
        let lb: f64 = lb.trim().parse().map_err(|_| bad())?;
        let ub: f64 = ub.trim().parse().map_err(|_| bad())?;
        if bounds.insert(name.trim(), (lb, ub)).is_some() {
            return Err(Error::InvalidArgument(format!("`{}` given twice", name.trim())));
        }
    }
    let mut ordered = Vec::with_capacity(names.len());
    for n in names {
        let b = bounds.remove(n.as_str()).ok_or_else(|| Error::UnboundParameter(n.clone()))?;
        ordered.push(b);
    }
    if let Some(extra) = bounds.keys().next() {
        return Err(Error::InvalidArgument(format!("unknown parameter `{extra}`")));
    }
    Region::from_bounds(&ordered)
}
