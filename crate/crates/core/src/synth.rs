//! Seeded random networks for property tests and smoke runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bn::{parametrize, BayesNet, Constraint, Dag, Direction, EntryCoord, Literal, ParamAssignment, ParamBN, Variable, DEFAULT_DELTA};
use crate::error::Result;
use crate::oracle;
use crate::poly::Instantiation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub vars: usize,
    pub max_parents: usize,
    /// Parents are drawn from the previous `window` variables.
    pub window: usize,
    pub max_domain: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { vars: 6, max_parents: 2, window: 4, max_domain: 3 }
    }
}

/// Row of `k` probabilities, each a multiple of 1/1000 in `[1/1000, 1)`,
/// summing exactly to 1 in decimal.
fn random_row<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    const UNITS: u32 = 1000;
    let weights: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=20)).collect();
    let total: u32 = weights.iter().sum();
    let mut units: Vec<u32> = weights.iter().map(|w| (w * UNITS / total).max(1)).collect();
    let assigned: u32 = units[..k - 1].iter().sum();
    if assigned >= UNITS {
        // only possible for many tiny weights; fall back to an even split
        units = vec![1; k];
        units[k - 1] = UNITS - (k as u32 - 1);
    } else {
        units[k - 1] = UNITS - assigned;
    }
    units.into_iter().map(|u| u as f64 / UNITS as f64).collect()
}

pub fn random_network<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> Result<BayesNet> {
    let mut vars = Vec::with_capacity(cfg.vars);
    for i in 0..cfg.vars {
        let domain = rng.gen_range(2..=cfg.max_domain.max(2));
        let lo = i.saturating_sub(cfg.window);
        let mut pool: Vec<usize> = (lo..i).collect();
        pool.shuffle(rng);
        let n = rng.gen_range(0..=cfg.max_parents.min(pool.len()));
        let mut parents: Vec<usize> = pool[..n].to_vec();
        parents.sort_unstable();
        vars.push(Variable {
            name: format!("X{i}"),
            values: (0..domain).map(|d| format!("v{d}")).collect(),
            parents,
        });
    }
    let dag = Dag::new(vars)?;
    let cpts = (0..dag.len())
        .map(|v| (0..dag.row_count(v)).map(|_| random_row(rng, dag.var(v).values.len())).collect())
        .collect();
    BayesNet::new(dag, cpts)
}

/// Parametrizes up to `n_params` distinct rows, one entry each.
pub fn random_pbn<R: Rng>(rng: &mut R, bn: &BayesNet, n_params: usize) -> Result<ParamBN> {
    let dag = bn.dag();
    let mut rows: Vec<(usize, usize)> =
        (0..dag.len()).flat_map(|v| (0..dag.row_count(v)).map(move |r| (v, r))).collect();
    rows.shuffle(rng);
    let assignments: Vec<ParamAssignment> = rows
        .into_iter()
        .take(n_params)
        .enumerate()
        .map(|(i, (var, row))| {
            let value = rng.gen_range(0..dag.var(var).values.len());
            ParamAssignment { coord: EntryCoord { var, row, value }, name: format!("x{i}"), interval: None }
        })
        .collect();
    parametrize(bn, &assignments, DEFAULT_DELTA)
}

/// One hypothesis literal, up to two evidence literals on other variables.
pub fn random_constraint<R: Rng>(rng: &mut R, dag: &Dag) -> Result<Constraint> {
    let mut vars: Vec<usize> = (0..dag.len()).collect();
    vars.shuffle(rng);
    let n_evidence = rng.gen_range(0..=2usize.min(dag.len() - 1));
    let lit = |rng: &mut R, v: usize| Literal { var: v, value: rng.gen_range(0..dag.var(v).values.len()) };
    let hypothesis = vec![lit(rng, vars[0])];
    let mut evidence: Vec<Literal> = vars[1..=n_evidence].iter().map(|&v| lit(rng, v)).collect();
    evidence.sort();
    let direction = if rng.gen_bool(0.5) { Direction::AtMost } else { Direction::AtLeast };
    let threshold = rng.gen_range(1..100) as f64 / 100.0;
    Constraint::new(dag, hypothesis, evidence, direction, threshold)
}

/// A random pBN with `1..=max_params` parameters and a constraint whose
/// threshold is the query value at a random instantiation, so the
/// constraint splits the parameter space.
pub fn random_problem<R: Rng>(rng: &mut R, cfg: &SynthConfig, max_params: usize) -> Result<(ParamBN, Constraint)> {
    let bn = random_network(rng, cfg)?;
    let n_params = rng.gen_range(1..=max_params.max(1));
    let pbn = random_pbn(rng, &bn, n_params)?;
    let c = random_constraint(rng, pbn.dag())?;
    let u: Instantiation = pbn
        .params()
        .iter()
        .map(|p| (p.name.clone(), rng.gen_range(p.interval.lb..=p.interval.ub)))
        .collect();
    let value = oracle::infer_constraint(&pbn.instantiate_fast(&u)?, &c)?;
    let c = Constraint::new(pbn.dag(), c.hypothesis, c.evidence, c.direction, value.clamp(0.0, 1.0))?;
    Ok((pbn, c))
}
