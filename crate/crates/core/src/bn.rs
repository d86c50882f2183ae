//! Discrete Bayesian networks, their parametric counterparts, and the
//! linear proportional parametrization that turns one into the other.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::{exact_decimal, to_f64, Instantiation, Interval, Polynomial, Rational, Region};

/// Tolerance for numeric row sums of constant CPT rows.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Default clamp keeping parameters away from 0 and 1.
pub const DEFAULT_DELTA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
    /// Indices into the owning [`Dag`].
    pub parents: Vec<usize>,
}

/// The graph part shared by plain and parametric networks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    vars: Vec<Variable>,
}

impl Dag {
    pub fn new(vars: Vec<Variable>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for v in &vars {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate variable `{}`", v.name)));
            }
            if v.values.len() < 2 {
                return Err(Error::InvalidModel(format!(
                    "variable `{}` needs at least two values",
                    v.name
                )));
            }
            let labels: BTreeSet<&str> = v.values.iter().map(String::as_str).collect();
            if labels.len() != v.values.len() {
                return Err(Error::InvalidModel(format!("duplicate value label in `{}`", v.name)));
            }
            let parents: BTreeSet<usize> = v.parents.iter().copied().collect();
            if parents.len() != v.parents.len() {
                return Err(Error::InvalidModel(format!("duplicate parent of `{}`", v.name)));
            }
            if let Some(&p) = v.parents.iter().find(|&&p| p >= vars.len()) {
                return Err(Error::InvalidModel(format!("parent index {p} of `{}` out of range", v.name)));
            }
        }
        let dag = Dag { vars };
        if dag.topological_order().len() != dag.len() {
            return Err(Error::InvalidModel("graph has a cycle".into()));
        }
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, v: usize) -> &Variable {
        &self.vars[v]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn value_index(&self, var: usize, value: &str) -> Result<usize> {
        let v = &self.vars[var];
        v.values.iter().position(|x| x == value).ok_or_else(|| Error::UnknownValue {
            var: v.name.clone(),
            value: value.to_string(),
        })
    }

    pub fn row_count(&self, var: usize) -> usize {
        self.vars[var]
            .parents
            .iter()
            .map(|&p| self.vars[p].values.len())
            .product()
    }

    /// Mixed-radix index of a parent evaluation; the first parent is the most
    /// significant digit.
    pub fn row_index(&self, var: usize, parent_values: &[usize]) -> usize {
        self.vars[var]
            .parents
            .iter()
            .zip(parent_values)
            .fold(0, |acc, (&p, &val)| acc * self.vars[p].values.len() + val)
    }

    pub fn row_values(&self, var: usize, mut row: usize) -> Vec<usize> {
        let parents = &self.vars[var].parents;
        let mut out = vec![0; parents.len()];
        for (slot, &p) in out.iter_mut().zip(parents).rev() {
            let k = self.vars[p].values.len();
            *slot = row % k;
            row /= k;
        }
        out
    }

    pub fn row_label(&self, var: usize, row: usize) -> String {
        let labels: Vec<&str> = self
            .row_values(var, row)
            .iter()
            .zip(&self.vars[var].parents)
            .map(|(&val, &p)| self.vars[p].values[val].as_str())
            .collect();
        format!("{}({})", self.vars[var].name, labels.join(", "))
    }

    pub fn coord_label(&self, c: EntryCoord) -> String {
        format!("{}={}", self.row_label(c.var, c.row), self.vars[c.var].values[c.value])
    }

    /// Kahn's algorithm, preferring lower indices; shorter than `len()` iff
    /// the graph is cyclic.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = self.vars.iter().map(|v| v.parents.len()).collect();
        let mut children = vec![Vec::new(); self.len()];
        for (i, v) in self.vars.iter().enumerate() {
            for &p in &v.parents {
                children[p].push(i);
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        order
    }

    pub fn check_order(&self, order: &[usize]) -> Result<()> {
        if order.len() != self.len() {
            return Err(Error::BadOrder(format!(
                "order has {} variables, network has {}",
                order.len(),
                self.len()
            )));
        }
        let mut position = vec![usize::MAX; self.len()];
        for (i, &v) in order.iter().enumerate() {
            if v >= self.len() || position[v] != usize::MAX {
                return Err(Error::BadOrder(format!("variable index {v} repeated or out of range")));
            }
            position[v] = i;
        }
        for (v, var) in self.vars.iter().enumerate() {
            if let Some(&p) = var.parents.iter().find(|&&p| position[p] > position[v]) {
                return Err(Error::BadOrder(format!(
                    "`{}` comes after its child `{}`",
                    self.vars[p].name, var.name
                )));
            }
        }
        Ok(())
    }

    pub fn order_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let order = names
            .iter()
            .map(|n| self.index_of(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.check_order(&order)?;
        Ok(order)
    }
}

/// Position of a single CPT entry: variable, parent-evaluation row, value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryCoord {
    pub var: usize,
    pub row: usize,
    pub value: usize,
}

/// A Bayesian network with constant CPT entries.
#[derive(Clone, Debug, PartialEq)]
pub struct BayesNet {
    dag: Dag,
    cpts: Vec<Vec<Vec<f64>>>,
}

impl BayesNet {
    pub fn new(dag: Dag, cpts: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        check_shape(&dag, &cpts)?;
        for (v, rows) in cpts.iter().enumerate() {
            for (r, row) in rows.iter().enumerate() {
                if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(Error::InvalidModel(format!(
                        "entry {x} of {} outside [0, 1]",
                        dag.row_label(v, r)
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::RowSum {
                        var: dag.var(v).name.clone(),
                        row: dag.row_label(v, r),
                        sum,
                    });
                }
            }
        }
        Ok(BayesNet { dag, cpts })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpt(&self, var: usize) -> &[Vec<f64>] {
        &self.cpts[var]
    }

    pub fn entry(&self, c: EntryCoord) -> f64 {
        self.cpts[c.var][c.row][c.value]
    }

    /// Probability of a full assignment (one value index per variable).
    pub fn joint(&self, assignment: &[usize]) -> f64 {
        let mut prob = 1.0;
        let mut parent_vals = Vec::new();
        for (v, var) in self.dag.vars.iter().enumerate() {
            parent_vals.clear();
            parent_vals.extend(var.parents.iter().map(|&p| assignment[p]));
            prob *= self.cpts[v][self.dag.row_index(v, &parent_vals)][assignment[v]];
            if prob == 0.0 {
                break;
            }
        }
        prob
    }
}

fn check_shape<E>(dag: &Dag, cpts: &[Vec<Vec<E>>]) -> Result<()> {
    if cpts.len() != dag.len() {
        return Err(Error::InvalidModel(format!(
            "{} CPTs for {} variables",
            cpts.len(),
            dag.len()
        )));
    }
    for (v, rows) in cpts.iter().enumerate() {
        if rows.len() != dag.row_count(v) {
            return Err(Error::InvalidModel(format!(
                "CPT of `{}` has {} rows, expected {}",
                dag.var(v).name,
                rows.len(),
                dag.row_count(v)
            )));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != dag.var(v).values.len()) {
            return Err(Error::InvalidModel(format!(
                "row of `{}` has {} entries, expected {}",
                dag.var(v).name,
                row.len(),
                dag.var(v).values.len()
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub interval: Interval,
    /// Value in the unmodified network.
    pub original: f64,
}

/// A Bayesian network whose CPT entries are multi-affine polynomials over
/// named parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBN {
    dag: Dag,
    cpts: Vec<Vec<Vec<Polynomial>>>,
    params: Vec<Parameter>,
    modif: BTreeSet<EntryCoord>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    EntryOutOfRange { coord: EntryCoord, lo: f64, hi: f64 },
    RowSumNotOne { var: usize, row: usize, sum: String },
}

impl ParamBN {
    pub fn new(
        dag: Dag,
        cpts: Vec<Vec<Vec<Polynomial>>>,
        params: Vec<Parameter>,
        modif: BTreeSet<EntryCoord>,
    ) -> Result<Self> {
        check_shape(&dag, &cpts)?;
        let mut names = BTreeSet::new();
        for p in &params {
            if !names.insert(p.name.as_str()) {
                return Err(Error::InvalidModel(format!("parameter `{}` declared twice", p.name)));
            }
            let iv = p.interval;
            if !(iv.lb > 0.0 && iv.ub < 1.0 && iv.lb <= iv.ub) {
                return Err(Error::InvalidModel(format!(
                    "interval [{}, {}] of `{}` is not within (0, 1)",
                    iv.lb, iv.ub, p.name
                )));
            }
        }
        for (v, rows) in cpts.iter().enumerate() {
            for (r, row) in rows.iter().enumerate() {
                for (d, e) in row.iter().enumerate() {
                    if let Some(name) = e.params().into_iter().find(|n| !names.contains(n)) {
                        return Err(Error::UnboundParameter(name.to_string()));
                    }
                    if !e.is_multi_affine() {
                        return Err(Error::UnsupportedDegree(format!(
                            "{}: {e}",
                            dag.coord_label(EntryCoord { var: v, row: r, value: d })
                        )));
                    }
                    if let Some(c) = e.constant_value() {
                        if c < Rational::zero() || c > Rational::one() {
                            return Err(Error::InvalidModel(format!(
                                "constant entry {e} outside [0, 1]"
                            )));
                        }
                    }
                }
            }
        }
        let pbn = ParamBN { dag, cpts, params, modif };
        let u0 = pbn.original();
        for &c in &pbn.modif {
            if c.var >= pbn.dag.len() || c.row >= pbn.cpts[c.var].len() || c.value >= pbn.cpts[c.var][c.row].len() {
                return Err(Error::InvalidModel(format!("modified entry {c:?} out of range")));
            }
            let x = pbn.cpts[c.var][c.row][c.value].eval(&u0)?;
            if x <= 0.0 || x >= 1.0 {
                return Err(Error::ZeroEntry(pbn.dag.coord_label(c)));
            }
        }
        Ok(pbn)
    }

    /// A parametric view of a plain network with no parameters.
    pub fn from_bn(bn: &BayesNet) -> Self {
        let cpts = bn
            .cpts
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| row.iter().map(|&x| Polynomial::constant(exact_decimal(x))).collect())
                    .collect()
            })
            .collect();
        ParamBN {
            dag: bn.dag.clone(),
            cpts,
            params: Vec::new(),
            modif: BTreeSet::new(),
        }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpt(&self, var: usize) -> &[Vec<Polynomial>] {
        &self.cpts[var]
    }

    pub fn entry(&self, c: EntryCoord) -> &Polynomial {
        &self.cpts[c.var][c.row][c.value]
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn modif(&self) -> &BTreeSet<EntryCoord> {
        &self.modif
    }

    /// The instantiation reproducing the original network.
    pub fn original(&self) -> Instantiation {
        self.params.iter().map(|p| (p.name.as_str(), p.original)).collect()
    }

    /// The declared parameter space as a box.
    pub fn parameter_space(&self) -> Region {
        Region::new(self.params.iter().map(|p| p.interval).collect()).expect("validated intervals")
    }

    /// Variables whose CPT mentions at least one parameter.
    pub fn parametrized_vars(&self) -> BTreeSet<usize> {
        (0..self.dag.len())
            .filter(|&v| self.cpts[v].iter().flatten().any(|e| !e.is_constant()))
            .collect()
    }

    fn check_covers(&self, u: &Instantiation) -> Result<()> {
        for p in &self.params {
            if u.get(&p.name).is_none() {
                return Err(Error::UnboundParameter(p.name.clone()));
            }
        }
        if u.len() != self.params.len() {
            let extra = u
                .iter()
                .find(|(n, _)| !self.params.iter().any(|p| p.name == *n))
                .map(|(n, _)| n.to_string())
                .unwrap_or_default();
            return Err(Error::InvalidArgument(format!("unknown parameter `{extra}` in instantiation")));
        }
        Ok(())
    }

    /// Replaces every parameter by its value; entries are evaluated exactly
    /// and rounded once.
    pub fn instantiate(&self, u: &Instantiation) -> Result<BayesNet> {
        self.check_covers(u)?;
        self.instantiate_with(|e| e.eval(u))
    }

    /// Floating-point instantiation for dense sampling loops.
    pub fn instantiate_fast(&self, u: &Instantiation) -> Result<BayesNet> {
        self.check_covers(u)?;
        self.instantiate_with(|e| e.eval_f64(|n| u.get(n)))
    }

    fn instantiate_with<F: Fn(&Polynomial) -> Result<f64>>(&self, eval: F) -> Result<BayesNet> {
        let mut cpts = Vec::with_capacity(self.cpts.len());
        for (v, rows) in self.cpts.iter().enumerate() {
            let mut out_rows = Vec::with_capacity(rows.len());
            for (r, row) in rows.iter().enumerate() {
                let mut out = Vec::with_capacity(row.len());
                for e in row {
                    let x = eval(e)?;
                    if !(0.0..=1.0).contains(&x) {
                        return Err(Error::NotWellFormed(format!(
                            "entry of {} evaluates to {x}",
                            self.dag.row_label(v, r)
                        )));
                    }
                    out.push(x);
                }
                out_rows.push(out);
            }
            cpts.push(out_rows);
        }
        BayesNet::new(self.dag.clone(), cpts).map_err(|e| match e {
            Error::RowSum { row, sum, .. } => Error::NotWellFormed(format!("row {row} sums to {sum}")),
            other => other,
        })
    }

    /// Checks that every row stays a distribution over `region`. An empty
    /// result means the parametrization is valid there.
    pub fn validate(&self, region: &Region) -> Result<Vec<Diagnostic>> {
        let names = self.param_names();
        let mut out = Vec::new();
        for (v, rows) in self.cpts.iter().enumerate() {
            for (r, row) in rows.iter().enumerate() {
                for (d, e) in row.iter().enumerate() {
                    let (lo, hi) = e.bounds(&names, region)?;
                    if lo < -1e-12 || hi > 1.0 + 1e-12 {
                        out.push(Diagnostic::EntryOutOfRange {
                            coord: EntryCoord { var: v, row: r, value: d },
                            lo,
                            hi,
                        });
                    }
                }
                let sum = row.iter().fold(Polynomial::zero(), |acc, e| &acc + e);
                let ok = match sum.constant_value() {
                    Some(c) => (to_f64(&c) - 1.0).abs() <= ROW_SUM_TOL,
                    None => false,
                };
                if !ok {
                    out.push(Diagnostic::RowSumNotOne { var: v, row: r, sum: sum.to_string() });
                }
            }
        }
        Ok(out)
    }
}

/// One explicitly modified entry and the parameter replacing it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamAssignment {
    pub coord: EntryCoord,
    pub name: String,
    /// Defaults to `[delta, 1 - delta]`.
    pub interval: Option<Interval>,
}

/// Linear proportional parametrization: each modified entry `θ_k` becomes a
/// parameter `x`, every other entry `θ_j` of its row becomes
/// `θ_j (1 - x) / (1 - θ_k)`. Rows without modified entries stay constant.
pub fn parametrize(bn: &BayesNet, assignments: &[ParamAssignment], delta: f64) -> Result<ParamBN> {
    let dag = bn.dag();
    let mut by_row: BTreeMap<(usize, usize), &ParamAssignment> = BTreeMap::new();
    let mut params: Vec<Parameter> = Vec::new();
    let mut originals: BTreeMap<&str, Rational> = BTreeMap::new();
    let mut modif = BTreeSet::new();

    for a in assignments {
        let c = a.coord;
        if c.var >= dag.len() || c.row >= dag.row_count(c.var) || c.value >= dag.var(c.var).values.len() {
            return Err(Error::InvalidModel(format!("entry {c:?} out of range")));
        }
        if by_row.insert((c.var, c.row), a).is_some() {
            return Err(Error::UnsupportedMultiEntryRow(dag.row_label(c.var, c.row)));
        }
        let theta = bn.entry(c);
        if theta <= 0.0 || theta >= 1.0 {
            return Err(Error::ZeroEntry(dag.coord_label(c)));
        }
        let exact = exact_decimal(theta);
        match originals.get(a.name.as_str()) {
            Some(prev) if *prev != exact => {
                return Err(Error::InconsistentSharedParameter { name: a.name.clone() });
            }
            Some(_) => {}
            None => {
                let interval = a.interval.unwrap_or(Interval::new(delta, 1.0 - delta));
                if !interval.contains(theta) {
                    return Err(Error::InvalidModel(format!(
                        "interval [{}, {}] of `{}` excludes its original value {theta}",
                        interval.lb, interval.ub, a.name
                    )));
                }
                originals.insert(a.name.as_str(), exact);
                params.push(Parameter { name: a.name.clone(), interval, original: theta });
            }
        }
        modif.insert(c);
    }

    let mut cpts = Vec::with_capacity(dag.len());
    for v in 0..dag.len() {
        let mut rows = Vec::with_capacity(dag.row_count(v));
        for (r, row) in bn.cpt(v).iter().enumerate() {
            let exact: Vec<Rational> = row.iter().map(|&x| exact_decimal(x)).collect();
            let polys = match by_row.get(&(v, r)) {
                None => exact.into_iter().map(Polynomial::constant).collect(),
                Some(a) => {
                    let k = a.coord.value;
                    let x = Polynomial::var(&a.name);
                    let rest = &Polynomial::one() - &x;
                    // co-varied mass; equals 1 - θ_k for exactly normalized rows
                    let mass: Rational = exact
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, t)| t.clone())
                        .sum();
                    if mass.is_zero() {
                        return Err(Error::ZeroEntry(dag.coord_label(a.coord)));
                    }
                    exact
                        .iter()
                        .enumerate()
                        .map(|(j, t)| if j == k { x.clone() } else { rest.scale(&(t / &mass)) })
                        .collect()
                }
            };
            rows.push(polys);
        }
        cpts.push(rows);
    }
    ParamBN::new(dag.clone(), cpts, params, modif)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: usize,
    pub value: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    AtMost,
    AtLeast,
}

impl Direction {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::AtMost => value <= threshold,
            Direction::AtLeast => value >= threshold,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AtMost => "<=",
            Direction::AtLeast => ">=",
        })
    }
}

/// `Pr(H | E) ∼ λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub hypothesis: Vec<Literal>,
    pub evidence: Vec<Literal>,
    pub direction: Direction,
    pub threshold: f64,
}

impl Constraint {
    pub fn new(
        dag: &Dag,
        hypothesis: Vec<Literal>,
        evidence: Vec<Literal>,
        direction: Direction,
        threshold: f64,
    ) -> Result<Self> {
        if hypothesis.is_empty() {
            return Err(Error::InvalidConstraint("empty hypothesis".into()));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConstraint(format!("threshold {threshold} outside [0, 1]")));
        }
        for lits in [&hypothesis, &evidence] {
            let mut seen = BTreeSet::new();
            for l in lits.iter() {
                if l.var >= dag.len() || l.value >= dag.var(l.var).values.len() {
                    return Err(Error::InvalidConstraint(format!("literal {l:?} out of range")));
                }
                if !seen.insert(l.var) {
                    return Err(Error::InvalidConstraint(format!(
                        "variable `{}` constrained twice",
                        dag.var(l.var).name
                    )));
                }
            }
        }
        if let Some(l) = hypothesis.iter().find(|h| evidence.iter().any(|e| e.var == h.var)) {
            return Err(Error::InvalidConstraint(format!(
                "`{}` occurs in both hypothesis and evidence",
                dag.var(l.var).name
            )));
        }
        Ok(Constraint { hypothesis, evidence, direction, threshold })
    }

    pub fn holds(&self, value: f64) -> bool {
        self.direction.holds(value, self.threshold)
    }

    pub fn render(&self, dag: &Dag) -> String {
        let lits = |ls: &[Literal]| {
            ls.iter()
                .map(|l| format!("{}={}", dag.var(l.var).name, dag.var(l.var).values[l.value]))
                .collect::<Vec<_>>()
                .join(" & ")
        };
        if self.evidence.is_empty() {
            format!("P({}) {} {}", lits(&self.hypothesis), self.direction, self.threshold)
        } else {
            format!(
                "P({} | {}) {} {}",
                lits(&self.hypothesis),
                lits(&self.evidence),
                self.direction,
                self.threshold
            )
        }
    }
}

/// All literals agree with a full assignment.
pub fn literals_hold(lits: &[Literal], assignment: &[usize]) -> bool {
    lits.iter().all(|l| assignment[l.var] == l.value)
}
