//! Parametric Markov chains compiled from parametric Bayesian networks.
//!
//! The chain walks the variables in a topological order. A state at level
//! `i` records the value of the variable just drawn plus every earlier
//! variable some later CPT (or the query) still reads; everything else is
//! forgotten, which merges states that only differ in don't-care values.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::bn::{Constraint, Direction, Literal, ParamBN, Parameter};
use crate::error::{Error, Result};
use crate::poly::{CompiledPoly, Instantiation, Polynomial, RatFunc, Rational};

/// Upper bound on compiled chain size.
pub const MAX_STATES: usize = 2_000_000;

/// Guard for symbolic state elimination.
pub const MAX_SYMBOLIC_STATES: usize = 10_000;

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateLabel {
    /// Number of variables drawn so far; 0 is the initial state.
    pub level: usize,
    /// Retained (variable, value) pairs sorted by variable.
    pub assignment: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct Pmc {
    labels: Vec<StateLabel>,
    names: Vec<String>,
    transitions: Vec<Vec<(usize, Polynomial)>>,
    compiled: Vec<Vec<(usize, CompiledPoly)>>,
    params: Vec<Parameter>,
    levels: usize,
}

/// Reachability objective `Pr(◊ targets) ∼ λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachSpec {
    pub targets: Vec<usize>,
    pub direction: Direction,
    pub threshold: f64,
}

impl ReachSpec {
    pub fn new(targets: Vec<usize>, direction: Direction, threshold: f64) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyInput("reachability targets".into()));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConstraint(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(ReachSpec { targets, direction, threshold })
    }
}

impl Pmc {
    /// Builds a chain from explicit transitions; state 0 is initial. Every
    /// state's outgoing polynomials must sum to 1 symbolically.
    pub fn new(
        names: Vec<String>,
        transitions: Vec<Vec<(usize, Polynomial)>>,
        params: Vec<Parameter>,
    ) -> Result<Self> {
        let labels = (0..names.len())
            .map(|_| StateLabel { level: 0, assignment: Vec::new() })
            .collect();
        Self::assemble(labels, names, transitions, params, 0)
    }

    fn assemble(
        labels: Vec<StateLabel>,
        names: Vec<String>,
        mut transitions: Vec<Vec<(usize, Polynomial)>>,
        params: Vec<Parameter>,
        levels: usize,
    ) -> Result<Self> {
        if names.is_empty() || names.len() != transitions.len() {
            return Err(Error::InvalidModel("chain needs one transition list per state".into()));
        }
        let n = names.len();
        let index: BTreeMap<&str, usize> =
            params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        let mut compiled = Vec::with_capacity(n);
        for (s, succ) in transitions.iter_mut().enumerate() {
            succ.retain(|(_, p)| !p.is_zero());
            succ.sort_by_key(|(t, _)| *t);
            if let Some((t, _)) = succ.iter().find(|(t, _)| *t >= n) {
                return Err(Error::InvalidModel(format!("transition {s} -> {t} out of range")));
            }
            let sum = succ.iter().fold(Polynomial::zero(), |acc, (_, p)| &acc + p);
            if !sum.is_one() {
                return Err(Error::InvalidModel(format!(
                    "outgoing probabilities of state {} sum to {sum}",
                    names[s]
                )));
            }
            let c = succ
                .iter()
                .map(|(t, p)| p.compile(|name| index.get(name).copied()).map(|cp| (*t, cp)))
                .collect::<Result<Vec<_>>>()?;
            compiled.push(c);
        }
        Ok(Pmc { labels, names, transitions, compiled, params, levels })
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.names[s]
    }

    pub fn label(&self, s: usize) -> &StateLabel {
        &self.labels[s]
    }

    pub fn transitions(&self, s: usize) -> &[(usize, Polynomial)] {
        &self.transitions[s]
    }

    pub fn compiled(&self, s: usize) -> &[(usize, CompiledPoly)] {
        &self.compiled[s]
    }

    pub fn transition(&self, from: usize, to: usize) -> Option<&Polynomial> {
        self.transitions[from].iter().find(|(t, _)| *t == to).map(|(_, p)| p)
    }

    /// Final-level states of a compiled chain.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.num_states())
            .filter(|&s| self.levels > 0 && self.labels[s].level == self.levels)
            .collect()
    }

    /// Numeric transition matrix at `values` (ordered like `params`).
    pub fn instantiate_values(&self, values: &[f64]) -> Result<Vec<Vec<(usize, f64)>>> {
        let mut out = Vec::with_capacity(self.num_states());
        for (s, succ) in self.compiled.iter().enumerate() {
            let mut row = Vec::with_capacity(succ.len());
            let mut sum = 0.0;
            for (t, p) in succ {
                let x = p.eval(values);
                if !(-1e-12..=1.0 + 1e-12).contains(&x) || !x.is_finite() {
                    return Err(Error::NotWellFormed(format!(
                        "transition {} -> {} evaluates to {x}",
                        self.names[s], self.names[*t]
                    )));
                }
                sum += x;
                if x > 0.0 {
                    row.push((*t, x));
                }
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotWellFormed(format!(
                    "outgoing probabilities of {} sum to {sum}",
                    self.names[s]
                )));
            }
            out.push(row);
        }
        Ok(out)
    }

    pub fn to_dot(&self, targets: &[usize]) -> String {
        let mut out = String::from("digraph pmc {\n  rankdir=TB;\n");
        for s in 0..self.num_states() {
            let shape = if targets.contains(&s) { "doublecircle" } else { "ellipse" };
            let _ = writeln!(
                out,
                "  s{s} [label=\"s{s}\\n{}\", shape={shape}];",
                self.names[s].replace('"', "\\\"")
            );
        }
        for (s, succ) in self.transitions.iter().enumerate() {
            for (t, p) in succ {
                let _ = writeln!(out, "  s{s} -> s{t} [label=\"{p}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

struct Compiler<'a> {
    pbn: &'a ParamBN,
    order: &'a [usize],
    /// `needed[i]`: variables read by the CPT of some `order[j]`, `j >= i`.
    needed: Vec<BTreeSet<usize>>,
    keep: BTreeSet<usize>,
    evidence: Vec<Literal>,
}

impl Compiler<'_> {
    fn retained(&self, level: usize, w: usize) -> bool {
        self.needed[level].contains(&w) || self.keep.contains(&w)
    }

    fn name(&self, label: &StateLabel) -> String {
        if label.level == 0 {
            return "init".into();
        }
        let dag = self.pbn.dag();
        label
            .assignment
            .iter()
            .map(|&(v, d)| format!("{}={}", dag.var(v).name, dag.var(v).values[d]))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn run(&self) -> Result<Pmc> {
        let dag = self.pbn.dag();
        let n = self.order.len();
        let init = StateLabel { level: 0, assignment: Vec::new() };
        let mut labels = vec![init.clone()];
        let mut index: HashMap<StateLabel, usize> = HashMap::from([(init, 0)]);
        let mut transitions: Vec<Vec<(usize, Polynomial)>> = vec![Vec::new()];
        let mut queue = VecDeque::from([0usize]);

        while let Some(s) = queue.pop_front() {
            let label = labels[s].clone();
            if label.level == n {
                transitions[s] = vec![(s, Polynomial::one())];
                continue;
            }
            let v = self.order[label.level];
            let lookup: BTreeMap<usize, usize> = label.assignment.iter().copied().collect();
            let parent_vals: Vec<usize> = dag.var(v).parents.iter().map(|p| lookup[p]).collect();
            let row = &self.pbn.cpt(v)[dag.row_index(v, &parent_vals)];
            let mut out: BTreeMap<usize, Polynomial> = BTreeMap::new();
            for (d, entry) in row.iter().enumerate() {
                if entry.is_zero() {
                    continue;
                }
                let restart = self.evidence.iter().any(|l| l.var == v && l.value != d);
                let target = if restart {
                    0
                } else {
                    let mut assignment: Vec<(usize, usize)> = label
                        .assignment
                        .iter()
                        .copied()
                        .filter(|&(w, _)| self.retained(label.level + 1, w))
                        .collect();
                    assignment.push((v, d));
                    assignment.sort_unstable();
                    let next = StateLabel { level: label.level + 1, assignment };
                    match index.get(&next) {
                        Some(&t) => t,
                        None => {
                            let t = labels.len();
                            if t >= MAX_STATES {
                                return Err(Error::TooLarge(format!("more than {MAX_STATES} chain states")));
                            }
                            index.insert(next.clone(), t);
                            labels.push(next);
                            transitions.push(Vec::new());
                            queue.push_back(t);
                            t
                        }
                    }
                };
                let slot = out.entry(target).or_default();
                *slot = &*slot + entry;
            }
            transitions[s] = out.into_iter().collect();
        }
        let names = labels.iter().map(|l| self.name(l)).collect();
        Pmc::assemble(labels, names, transitions, self.pbn.params().to_vec(), n)
    }
}

fn compile_with(pbn: &ParamBN, order: &[usize], keep: BTreeSet<usize>, evidence: Vec<Literal>) -> Result<Pmc> {
    let dag = pbn.dag();
    dag.check_order(order)?;
    let n = order.len();
    let mut needed = vec![BTreeSet::new(); n + 1];
    for i in (0..n).rev() {
        let mut set = needed[i + 1].clone();
        set.extend(dag.var(order[i]).parents.iter().copied());
        needed[i] = set;
    }
    Compiler { pbn, order, needed, keep, evidence }.run()
}

/// Plain chain: retains only what later CPTs read.
pub fn compile(pbn: &ParamBN, order: &[usize]) -> Result<Pmc> {
    compile_with(pbn, order, BTreeSet::new(), Vec::new())
}

/// Plain chain whose leaves keep the hypothesis and evidence variables, as
/// needed by [`conditional_via_ratio`].
pub fn compile_for_query(pbn: &ParamBN, order: &[usize], c: &Constraint) -> Result<Pmc> {
    let keep = c.hypothesis.iter().chain(&c.evidence).map(|l| l.var).collect();
    compile_with(pbn, order, keep, Vec::new())
}

/// Evidence-tailored chain: a draw contradicting the evidence restarts at
/// the initial state, so reaching a hypothesis leaf has probability
/// `Pr(H | E)`.
pub fn compile_tailored(pbn: &ParamBN, order: &[usize], c: &Constraint) -> Result<(Pmc, ReachSpec)> {
    let keep = c.hypothesis.iter().map(|l| l.var).collect();
    tailor(compile_with(pbn, order, keep, c.evidence.clone())?, c)
}

fn tailor(pmc: Pmc, c: &Constraint) -> Result<(Pmc, ReachSpec)> {
    let leaves = pmc.leaves();
    if leaves.is_empty() {
        return Err(Error::EvidenceImpossible);
    }
    let targets: Vec<usize> = leaves
        .into_iter()
        .filter(|&s| {
            let a = &pmc.label(s).assignment;
            c.hypothesis.iter().all(|h| a.iter().any(|&(v, d)| v == h.var && d == h.value))
        })
        .collect();
    let spec = ReachSpec { targets, direction: c.direction, threshold: c.threshold };
    Ok((pmc, spec))
}

/// As [`compile_tailored`] but without forgetting any variable; a
/// reference for checking the don't-care abstraction.
pub fn compile_tailored_full(pbn: &ParamBN, order: &[usize], c: &Constraint) -> Result<(Pmc, ReachSpec)> {
    let keep = (0..pbn.dag().len()).collect();
    tailor(compile_with(pbn, order, keep, c.evidence.clone())?, c)
}

/// Values that state elimination can operate on.
trait Weight: Clone {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    /// `1 - self_loop`; `rest` is the sum of the non-loop outgoing weights.
    fn complement(self_loop: &Self, rest: &Self) -> Self;
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn complement(_self_loop: &Self, rest: &Self) -> Self {
        // rows stay stochastic, so the outgoing mass avoids cancellation
        *rest
    }
}

impl Weight for RatFunc {
    fn zero() -> Self {
        RatFunc::from_poly(Polynomial::zero())
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
    fn add(&self, other: &Self) -> Self {
        if self.num.is_zero() {
            return other.clone();
        }
        if other.num.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            RatFunc { num: &self.num + &other.num, den: self.den.clone() }
        } else {
            RatFunc {
                num: &(&self.num * &other.den) + &(&other.num * &self.den),
                den: &self.den * &other.den,
            }
        }
    }
    fn mul(&self, other: &Self) -> Self {
        RatFunc { num: &self.num * &other.num, den: &self.den * &other.den }
    }
    fn div(&self, other: &Self) -> Self {
        RatFunc { num: &self.num * &other.den, den: &self.den * &other.num }
    }
    fn complement(self_loop: &Self, _rest: &Self) -> Self {
        RatFunc { num: &self_loop.den - &self_loop.num, den: self_loop.den.clone() }
    }
}

/// Probability of eventually reaching `targets` from `init` by eliminating
/// every other state. Back edges are handled through self-loop division.
fn eliminate<W: Weight>(init: usize, targets: &[usize], edges: Vec<Vec<(usize, W)>>) -> W {
    let n = edges.len();
    let is_target: Vec<bool> = {
        let mut t = vec![false; n];
        for &s in targets {
            t[s] = true;
        }
        t
    };
    debug_assert!(!is_target[init], "callers handle an initial target");
    // backward reachability over positive edges
    let mut preds = vec![Vec::new(); n];
    for (s, succ) in edges.iter().enumerate() {
        for (t, w) in succ {
            if !w.is_zero() {
                preds[*t].push(s);
            }
        }
    }
    let mut live = is_target.clone();
    let mut stack: Vec<usize> = targets.to_vec();
    while let Some(t) = stack.pop() {
        for &s in &preds[t] {
            if !live[s] {
                live[s] = true;
                stack.push(s);
            }
        }
    }
    if !live[init] {
        return W::zero();
    }
    // sinks: `target` collects all targets, `dead` all states that cannot reach them
    let target = n;
    let dead = n + 1;
    let mut fwd: Vec<BTreeMap<usize, W>> = vec![BTreeMap::new(); n + 2];
    let mut bwd: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 2];
    for (s, succ) in edges.into_iter().enumerate() {
        if !live[s] || is_target[s] {
            continue;
        }
        for (t, w) in succ {
            if w.is_zero() {
                continue;
            }
            let t = if is_target[t] {
                target
            } else if live[t] {
                t
            } else {
                dead
            };
            let slot = fwd[s].entry(t).or_insert_with(W::zero);
            *slot = slot.add(&w);
            bwd[t].insert(s);
        }
    }
    for s in (0..n).rev() {
        if s == init || !live[s] || is_target[s] {
            continue;
        }
        let mut out = std::mem::take(&mut fwd[s]);
        let self_loop = out.remove(&s);
        bwd[s].remove(&s);
        if let Some(l) = self_loop {
            let rest = out.values().fold(W::zero(), |acc, w| acc.add(w));
            let denom = W::complement(&l, &rest);
            for w in out.values_mut() {
                *w = w.div(&denom);
            }
        }
        for &b in out.keys() {
            bwd[b].remove(&s);
        }
        let preds: Vec<usize> = std::mem::take(&mut bwd[s]).into_iter().collect();
        for a in preds {
            let w_as = fwd[a].remove(&s).expect("predecessor edge present");
            for (&b, w_sb) in &out {
                let slot = fwd[a].entry(b).or_insert_with(W::zero);
                *slot = slot.add(&w_as.mul(w_sb));
                bwd[b].insert(a);
            }
        }
    }
    let mut out = std::mem::take(&mut fwd[init]);
    let hit = out.remove(&target).unwrap_or_else(W::zero);
    match out.remove(&init) {
        Some(l) => {
            let rest = out.values().fold(hit.clone(), |acc, w| acc.add(w));
            hit.div(&W::complement(&l, &rest))
        }
        None => hit,
    }
}

/// Exact reachability probability of the instantiated chain, via sparse
/// Gaussian elimination over the states.
pub fn reach_prob(pmc: &Pmc, u: &Instantiation, targets: &[usize]) -> Result<f64> {
    let values = u.values_for(&pmc.param_names())?;
    reach_prob_values(pmc, &values, targets)
}

/// As [`reach_prob`], with parameter values ordered like `pmc.params()`.
pub fn reach_prob_values(pmc: &Pmc, values: &[f64], targets: &[usize]) -> Result<f64> {
    let edges = pmc.instantiate_values(values)?;
    if targets.contains(&pmc.initial()) {
        return Ok(1.0);
    }
    Ok(eliminate(pmc.initial(), targets, edges))
}

/// `Pr(◊ targets)` as a ratio of polynomials, by symbolic state
/// elimination in reverse level order. The result is scaled to integer
/// coefficients without common factor.
pub fn sensitivity_function(pmc: &Pmc, targets: &[usize]) -> Result<RatFunc> {
    if pmc.num_states() > MAX_SYMBOLIC_STATES {
        return Err(Error::TooLarge(format!(
            "{} states exceed the symbolic elimination guard of {MAX_SYMBOLIC_STATES}",
            pmc.num_states()
        )));
    }
    if targets.contains(&pmc.initial()) {
        return Ok(RatFunc::from_poly(Polynomial::one()));
    }
    let edges: Vec<Vec<(usize, RatFunc)>> = (0..pmc.num_states())
        .map(|s| {
            pmc.transitions(s)
                .iter()
                .map(|(t, p)| (*t, RatFunc::from_poly(p.clone())))
                .collect()
        })
        .collect();
    Ok(normalize(eliminate(pmc.initial(), targets, edges)))
}

fn normalize(f: RatFunc) -> RatFunc {
    if f.num.is_zero() {
        return RatFunc::from_poly(Polynomial::zero());
    }
    let coeffs = || f.num.terms().chain(f.den.terms()).map(|(_, c)| c);
    let lcm = coeffs().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let scaled = |c: &Rational| (c * Rational::from_integer(lcm.clone())).to_integer();
    let gcd = coeffs().fold(BigInt::zero(), |acc, c| acc.gcd(&scaled(c)));
    let mut factor = Rational::new(lcm, gcd);
    let leading_negative = f
        .den
        .terms()
        .max_by(|a, b| a.0.degree().cmp(&b.0.degree()).then_with(|| b.0.cmp(a.0)))
        .is_some_and(|(_, c)| c.is_negative());
    if leading_negative {
        factor = -factor;
    }
    RatFunc { num: f.num.scale(&factor), den: f.den.scale(&factor) }
}

/// `Pr(H | E)` on a plain chain as
/// `(1 - Pr(◊ ¬H∨¬E leaves)) / (1 - Pr(◊ ¬E leaves))`.
pub fn conditional_via_ratio(pmc: &Pmc, c: &Constraint, u: &Instantiation) -> Result<f64> {
    let leaves = pmc.leaves();
    let mut not_e = Vec::new();
    let mut not_h_or_not_e = Vec::new();
    for &s in &leaves {
        let a: BTreeMap<usize, usize> = pmc.label(s).assignment.iter().copied().collect();
        let check = |lits: &[Literal]| -> Result<bool> {
            lits.iter().try_fold(true, |ok, l| match a.get(&l.var) {
                Some(&d) => Ok(ok && d == l.value),
                None => Err(Error::InvalidArgument(
                    "chain leaves do not retain the query variables".into(),
                )),
            })
        };
        let e_holds = check(&c.evidence)?;
        let h_holds = check(&c.hypothesis)?;
        if !e_holds {
            not_e.push(s);
        }
        if !e_holds || !h_holds {
            not_h_or_not_e.push(s);
        }
    }
    let values = u.values_for(&pmc.param_names())?;
    let p_not_e = if not_e.is_empty() { 0.0 } else { reach_prob_values(pmc, &values, &not_e)? };
    let p_not_he = if not_h_or_not_e.is_empty() {
        0.0
    } else {
        reach_prob_values(pmc, &values, &not_h_or_not_e)?
    };
    let denom = 1.0 - p_not_e;
    if denom <= 0.0 {
        return Err(Error::EvidenceImpossible);
    }
    Ok((1.0 - p_not_he) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::{parametrize, BayesNet, Dag, Variable, DEFAULT_DELTA};
    use crate::format::{parse_constraint, parse_network, parse_param_spec};
    use crate::oracle;
    use crate::poly::Interval;

    const COVID: &str = include_str!("../../../models/covid.bn");
    const COVID_PARAMS: &str = include_str!("../../../models/covid-params.toml");
    const QUERY: &str = "P(COVID-19=no | Antigen=pos & PCR=pos) <= 0.009";

    fn covid() -> (ParamBN, Constraint) {
        let bn = parse_network(COVID).unwrap();
        let (ps, _) = parse_param_spec(&bn, COVID_PARAMS).unwrap();
        let pbn = parametrize(&bn, &ps, DEFAULT_DELTA).unwrap();
        let c = parse_constraint(pbn.dag(), QUERY).unwrap();
        (pbn, c)
    }

    fn at(p: f64, q: f64) -> Instantiation {
        [("p", p), ("q", q)].into_iter().collect()
    }

    fn toy_chain() -> Pmc {
        let x = Polynomial::var("x");
        let not_x = &Polynomial::one() - &x;
        Pmc::new(
            vec!["s0".into(), "T".into(), "sink".into()],
            vec![vec![(1, x), (2, not_x)], vec![(1, Polynomial::one())], vec![(2, Polynomial::one())]],
            vec![Parameter { name: "x".into(), interval: Interval::new(0.01, 0.99), original: 0.5 }],
        )
        .unwrap()
    }

    #[test]
    fn plain_chain_matches_fig_1b() {
        let (pbn, _) = covid();
        let pmc = compile(&pbn, &[0, 1, 2, 3]).unwrap();
        assert_eq!(pmc.num_states(), 13);
        let find = |level: usize, a: &[(usize, usize)]| {
            (0..pmc.num_states())
                .find(|&s| pmc.label(s).level == level && pmc.label(s).assignment == a)
                .unwrap()
        };
        let cs = find(2, &[(0, 0), (1, 0)]);
        let ca = find(3, &[(0, 0), (2, 0)]);
        assert_eq!(pmc.transition(cs, ca).unwrap().to_string(), "p");
        for s in pmc.leaves() {
            assert_eq!(pmc.transitions(s), &[(s, Polynomial::one())]);
        }
    }

    #[test]
    fn tailored_chain_matches_fig_1c() {
        let (pbn, c) = covid();
        let (pmc, spec) = compile_tailored(&pbn, &[0, 1, 2, 3], &c).unwrap();
        assert_eq!(pmc.num_states(), 11);
        assert_eq!(spec.targets, vec![10]);
        assert_eq!(pmc.transition(3, 0).unwrap().to_string(), "-p + 1");
        assert_eq!(pmc.params().len(), 2);
    }

    #[test]
    fn single_node_chain() {
        let dag = Dag::new(vec![Variable { name: "v".into(), values: vec!["yes".into(), "no".into()], parents: vec![] }])
            .unwrap();
        let bn = BayesNet::new(dag, vec![vec![vec![0.3, 0.7]]]).unwrap();
        let pmc = compile(&ParamBN::from_bn(&bn), &[0]).unwrap();
        assert_eq!(pmc.num_states(), 3);
        let p = reach_prob_values(&pmc, &[], &[1]).unwrap();
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn independent_nodes_merge_dont_cares() {
        let var = |n: &str| Variable { name: n.into(), values: vec!["t".into(), "f".into()], parents: vec![] };
        let dag = Dag::new(vec![var("A"), var("B")]).unwrap();
        let bn = BayesNet::new(dag, vec![vec![vec![0.2, 0.8]], vec![vec![0.6, 0.4]]]).unwrap();
        let pmc = compile(&ParamBN::from_bn(&bn), &[0, 1]).unwrap();
        assert_eq!(pmc.num_states(), 5);
    }

    #[test]
    fn reach_at_original_values() {
        let (pbn, c) = covid();
        let (pmc, spec) = compile_tailored(&pbn, &[0, 1, 2, 3], &c).unwrap();
        let p = reach_prob(&pmc, &at(0.72, 0.95), &spec.targets).unwrap();
        assert!((p - 0.011089).abs() < 1e-5, "{p}");
        assert!((p - 3610.0 / 325527.0).abs() < 1e-15, "{p}");
        assert_eq!(reach_prob(&pmc, &at(0.72, 0.95), &[0]).unwrap(), 1.0);
    }

    #[test]
    fn reach_at_spot_value() {
        // the closed form gives 0.0089755 here; see the acceptance suite
        let (pbn, c) = covid();
        let (pmc, spec) = compile_tailored(&pbn, &[0, 1, 2, 3], &c).unwrap();
        let p = reach_prob(&pmc, &at(0.92075, 0.97475), &spec.targets).unwrap();
        let closed = 361.0 / (34900.0 * 0.92075 * 0.97475 + 8758.0 * 0.97475 + 361.0);
        assert!((p - closed).abs() < 1e-12);
    }

    #[test]
    fn sensitivity_function_of_fig_1c() {
        let (pbn, c) = covid();
        let (pmc, spec) = compile_tailored(&pbn, &[0, 1, 2, 3], &c).unwrap();
        let f = sensitivity_function(&pmc, &spec.targets).unwrap();
        assert_eq!(f.num.to_string(), "361");
        assert_eq!(f.den.to_string(), "34900*p*q + 8758*q + 361");
    }

    #[test]
    fn sensitivity_function_of_toy_and_constant_chains() {
        let f = sensitivity_function(&toy_chain(), &[1]).unwrap();
        assert_eq!((f.num.to_string(), f.den.to_string()), ("x".into(), "1".into()));
        let dag = Dag::new(vec![Variable { name: "v".into(), values: vec!["a".into(), "b".into()], parents: vec![] }])
            .unwrap();
        let bn = BayesNet::new(dag, vec![vec![vec![0.25, 0.75]]]).unwrap();
        let pmc = compile(&ParamBN::from_bn(&bn), &[0]).unwrap();
        let f = sensitivity_function(&pmc, &[1]).unwrap();
        assert_eq!(f.eval(&Instantiation::new()).unwrap(), 0.25);
    }

    #[test]
    fn ratio_form_agrees_with_tailored_chain() {
        let (pbn, c) = covid();
        let order = [0, 1, 2, 3];
        let plain = compile_for_query(&pbn, &order, &c).unwrap();
        let (tailored, spec) = compile_tailored(&pbn, &order, &c).unwrap();
        for (p, q) in [(0.72, 0.95), (0.1, 0.2), (0.5, 0.99), (0.999, 0.001)] {
            let u = at(p, q);
            let a = conditional_via_ratio(&plain, &c, &u).unwrap();
            let b = reach_prob(&tailored, &u, &spec.targets).unwrap();
            let o = oracle::infer_constraint(&pbn.instantiate(&u).unwrap(), &c).unwrap();
            assert!((a - b).abs() < 1e-10 && (b - o).abs() < 1e-10, "{a} {b} {o}");
        }
    }

    #[test]
    fn ratio_form_needs_query_variables() {
        let (pbn, c) = covid();
        let plain = compile(&pbn, &[0, 1, 2, 3]).unwrap();
        assert!(matches!(conditional_via_ratio(&plain, &c, &at(0.72, 0.95)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn root_evidence_restarts_from_root_state() {
        let (pbn, _) = covid();
        let c = parse_constraint(pbn.dag(), "P(PCR=pos | COVID-19=yes) >= 0.5").unwrap();
        let (pmc, spec) = compile_tailored(&pbn, &[0, 1, 2, 3], &c).unwrap();
        // drawing C=no goes straight back to the initial state
        assert!(pmc.transition(0, 0).is_some());
        let u = at(0.72, 0.95);
        let p = reach_prob(&pmc, &u, &spec.targets).unwrap();
        assert!((p - 0.95).abs() < 1e-12);
    }

    #[test]
    fn bad_order_and_impossible_evidence() {
        let (pbn, c) = covid();
        assert!(matches!(compile(&pbn, &[1, 0, 2, 3]), Err(Error::BadOrder(_))));
        let dag = Dag::new(vec![
            Variable { name: "A".into(), values: vec!["t".into(), "f".into()], parents: vec![] },
            Variable { name: "B".into(), values: vec!["t".into(), "f".into()], parents: vec![0] },
        ])
        .unwrap();
        let bn = BayesNet::new(dag, vec![vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0], vec![0.5, 0.5]]]).unwrap();
        let pbn2 = ParamBN::from_bn(&bn);
        let c2 = parse_constraint(pbn2.dag(), "P(A=t | B=f) <= 0.5").unwrap();
        assert!(matches!(compile_tailored(&pbn2, &[0, 1], &c2), Err(Error::EvidenceImpossible)));
        let _ = c;
    }

    #[test]
    fn stochastic_rows_are_enforced() {
        let x = Polynomial::var("x");
        let err = Pmc::new(
            vec!["s0".into(), "s1".into()],
            vec![vec![(1, x)], vec![(1, Polynomial::one())]],
            vec![Parameter { name: "x".into(), interval: Interval::new(0.1, 0.9), original: 0.5 }],
        );
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn dot_output_lists_edges() {
        let dot = toy_chain().to_dot(&[1]);
        assert!(dot.contains("s0 -> s1 [label=\"x\"]"));
        assert!(dot.contains("doublecircle"));
    }
}
