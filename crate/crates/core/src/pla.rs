//! Parameter lifting.
//!
//! Relaxation gives every state its own copy of each parameter it reads, so
//! states can pick parameter values independently. Substituting the vertices
//! of the region into each state's distribution yields an MDP whose minimal
//! and maximal reachability bound the chain's reachability at every point
//! of the region.

use std::collections::BTreeMap;

use crate::bn::Direction;
use crate::error::{Error, Result};
use crate::pmc::{Pmc, ReachSpec};
use crate::poly::Region;

pub const DEFAULT_VI_TOL: f64 = 1e-10;
pub const DEFAULT_MARGIN: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accepting,
    Rejecting,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accepting => "Accepting",
            Verdict::Rejecting => "Rejecting",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Opt {
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreshParam {
    pub name: String,
    /// Index into the chain's parameter list.
    pub original: usize,
    pub state: usize,
}

/// A chain whose states no longer share parameters.
#[derive(Clone, Debug)]
pub struct RelaxedPmc<'a> {
    pmc: &'a Pmc,
    fresh: Vec<FreshParam>,
    /// Per state: (fresh parameter index, original parameter index).
    local: Vec<Vec<(usize, usize)>>,
}

impl<'a> RelaxedPmc<'a> {
    pub fn pmc(&self) -> &'a Pmc {
        self.pmc
    }

    pub fn fresh_params(&self) -> &[FreshParam] {
        &self.fresh
    }

    /// Original parameter behind each fresh copy.
    pub fn renaming(&self) -> BTreeMap<&str, &str> {
        self.fresh
            .iter()
            .map(|f| (f.name.as_str(), self.pmc.params()[f.original].name.as_str()))
            .collect()
    }

    /// Fresh parameters read by state `s`.
    pub fn local_params(&self, s: usize) -> Vec<&str> {
        self.local[s].iter().map(|&(f, _)| self.fresh[f].name.as_str()).collect()
    }
}

/// Splits each parameter into one copy per state reading it. The first
/// occurrence keeps the original name; later copies are primed.
pub fn relax(pmc: &Pmc) -> RelaxedPmc<'_> {
    let mut fresh = Vec::new();
    let mut copies = vec![0usize; pmc.params().len()];
    let mut local = Vec::with_capacity(pmc.num_states());
    for s in 0..pmc.num_states() {
        let mut used: Vec<usize> = pmc
            .compiled(s)
            .iter()
            .flat_map(|(_, p)| p.params())
            .collect();
        used.sort_unstable();
        used.dedup();
        let mut state_local = Vec::with_capacity(used.len());
        for x in used {
            let name = format!("{}{}", pmc.params()[x].name, "'".repeat(copies[x]));
            copies[x] += 1;
            state_local.push((fresh.len(), x));
            fresh.push(FreshParam { name, original: x, state: s });
        }
        local.push(state_local);
    }
    RelaxedPmc { pmc, fresh, local }
}

/// Non-parametric MDP: one action per vertex of each state's local box.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundMdp {
    actions: Vec<Vec<Vec<(usize, f64)>>>,
    initial: usize,
}

impl BoundMdp {
    pub fn new(actions: Vec<Vec<Vec<(usize, f64)>>>, initial: usize) -> Self {
        BoundMdp { actions, initial }
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self, s: usize) -> &[Vec<(usize, f64)>] {
        &self.actions[s]
    }

    pub fn initial(&self) -> usize {
        self.initial
    }
}

/// Replaces each state's parameters by the vertices of its local sub-box.
pub fn substitute(r: &RelaxedPmc<'_>, region: &Region) -> Result<BoundMdp> {
    let pmc = r.pmc;
    check_region(pmc, region)?;
    let mut values: Vec<f64> = region.intervals().iter().map(|iv| iv.lb).collect();
    let mut actions = Vec::with_capacity(pmc.num_states());
    for s in 0..pmc.num_states() {
        let axes: Vec<usize> = r.local[s].iter().map(|&(_, x)| x).collect();
        let mut state_actions: Vec<Vec<(usize, f64)>> = Vec::with_capacity(1 << axes.len());
        for vertex in region.vertices(&axes) {
            for (&axis, &v) in axes.iter().zip(&vertex) {
                values[axis] = v;
            }
            let dist: Vec<(usize, f64)> = pmc
                .compiled(s)
                .iter()
                .map(|(t, p)| (*t, p.eval(&values)))
                .filter(|&(_, x)| x != 0.0)
                .collect();
            if !state_actions.contains(&dist) {
                state_actions.push(dist);
            }
        }
        actions.push(state_actions);
    }
    Ok(BoundMdp { actions, initial: pmc.initial() })
}

fn check_region(pmc: &Pmc, region: &Region) -> Result<()> {
    if region.dim() != pmc.params().len() {
        return Err(Error::BadRegion(format!(
            "region has {} axes, chain has {} parameters",
            region.dim(),
            pmc.params().len()
        )));
    }
    for (iv, p) in region.intervals().iter().zip(pmc.params()) {
        if iv.lb < p.interval.lb - 1e-12 || iv.ub > p.interval.ub + 1e-12 {
            return Err(Error::BadRegion(format!(
                "[{}, {}] for `{}` leaves its interval [{}, {}]",
                iv.lb, iv.ub, p.name, p.interval.lb, p.interval.ub
            )));
        }
    }
    Ok(())
}

/// States from which the targets are unreachable; for `Min`, also states
/// where some scheduler avoids them forever.
fn zero_states(mdp: &BoundMdp, is_target: &[bool], mode: Opt) -> Vec<bool> {
    let n = mdp.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in &mdp.actions[s] {
            for &(t, _) in a {
                preds[t].push(s);
            }
        }
    }
    match mode {
        Opt::Max => {
            let mut reach = is_target.to_vec();
            let mut stack: Vec<usize> = (0..n).filter(|&s| is_target[s]).collect();
            while let Some(t) = stack.pop() {
                for &s in &preds[t] {
                    if !reach[s] {
                        reach[s] = true;
                        stack.push(s);
                    }
                }
            }
            reach.into_iter().map(|r| !r).collect()
        }
        Opt::Min => {
            // states where every action has a successor already known to
            // reach the targets with positive probability under all schedulers
            let mut positive = is_target.to_vec();
            let mut changed = true;
            while changed {
                changed = false;
                for s in 0..n {
                    if positive[s] || mdp.actions[s].is_empty() {
                        continue;
                    }
                    let all = mdp.actions[s]
                        .iter()
                        .all(|a| a.iter().any(|&(t, _)| positive[t]));
                    if all {
                        positive[s] = true;
                        changed = true;
                    }
                }
            }
            positive.into_iter().map(|p| !p).collect()
        }
    }
}

/// Optimal reachability probability at the initial state over memoryless
/// deterministic schedulers, by Gauss-Seidel value iteration.
pub fn extremal_reach(mdp: &BoundMdp, targets: &[usize], mode: Opt, tol: f64) -> f64 {
    extremal_values(mdp, targets, mode, tol)[mdp.initial]
}

pub fn extremal_values(mdp: &BoundMdp, targets: &[usize], mode: Opt, tol: f64) -> Vec<f64> {
    let n = mdp.num_states();
    let mut is_target = vec![false; n];
    for &t in targets {
        is_target[t] = true;
    }
    let zero = zero_states(mdp, &is_target, mode);
    let mut x: Vec<f64> = is_target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let active: Vec<usize> = (0..n).rev().filter(|&s| !is_target[s] && !zero[s]).collect();
    for _ in 0..MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for &s in &active {
            let mut best = match mode {
                Opt::Max => f64::NEG_INFINITY,
                Opt::Min => f64::INFINITY,
            };
            for a in &mdp.actions[s] {
                let v: f64 = a.iter().map(|&(t, p)| p * x[t]).sum();
                best = match mode {
                    Opt::Max => best.max(v),
                    Opt::Min => best.min(v),
                };
            }
            delta = delta.max((best - x[s]).abs());
            x[s] = best;
        }
        if delta < tol {
            break;
        }
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub vi_tol: f64,
    pub margin: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { vi_tol: DEFAULT_VI_TOL, margin: DEFAULT_MARGIN }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionCheck {
    pub verdict: Verdict,
    /// Extremal values computed on the way to the verdict.
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Verifies many regions against one chain and objective; the relaxation
/// is computed once.
#[derive(Clone, Debug)]
pub struct RegionVerifier<'a> {
    relaxed: RelaxedPmc<'a>,
    spec: ReachSpec,
    opts: VerifyOptions,
}

impl<'a> RegionVerifier<'a> {
    pub fn new(pmc: &'a Pmc, spec: ReachSpec, opts: VerifyOptions) -> Self {
        RegionVerifier { relaxed: relax(pmc), spec, opts }
    }

    pub fn pmc(&self) -> &'a Pmc {
        self.relaxed.pmc
    }

    pub fn spec(&self) -> &ReachSpec {
        &self.spec
    }

    pub fn check(&self, region: &Region) -> Result<RegionCheck> {
        let mdp = substitute(&self.relaxed, region)?;
        let lambda = self.spec.threshold;
        let margin = self.opts.margin;
        let value = |mode| extremal_reach(&mdp, &self.spec.targets, mode, self.opts.vi_tol);
        let check = match self.spec.direction {
            Direction::AtMost => {
                let max = value(Opt::Max);
                if max <= lambda - margin {
                    RegionCheck { verdict: Verdict::Accepting, min: None, max: Some(max) }
                } else {
                    let min = value(Opt::Min);
                    let verdict = if min > lambda + margin { Verdict::Rejecting } else { Verdict::Inconclusive };
                    RegionCheck { verdict, min: Some(min), max: Some(max) }
                }
            }
            Direction::AtLeast => {
                let min = value(Opt::Min);
                if min >= lambda + margin {
                    RegionCheck { verdict: Verdict::Accepting, min: Some(min), max: None }
                } else {
                    let max = value(Opt::Max);
                    let verdict = if max < lambda - margin { Verdict::Rejecting } else { Verdict::Inconclusive };
                    RegionCheck { verdict, min: Some(min), max: Some(max) }
                }
            }
        };
        Ok(check)
    }

    pub fn verify(&self, region: &Region) -> Result<Verdict> {
        self.check(region).map(|c| c.verdict)
    }
}

/// Three-valued verdict for a single region.
pub fn verify_region(pmc: &Pmc, region: &Region, spec: &ReachSpec) -> Result<Verdict> {
    RegionVerifier::new(pmc, spec.clone(), VerifyOptions::default()).verify(region)
}
