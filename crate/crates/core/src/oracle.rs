//! Brute-force references: joint enumeration, exact CD distance and grid
//! search over small parameter spaces. Used to cross-check the chain-based
//! pipeline; exponential by design.

use rayon::prelude::*;

use crate::bn::{literals_hold, BayesNet, Constraint, Literal, ParamBN};
use crate::error::{Error, Result};
use crate::poly::Instantiation;
use crate::tune::Measure;

/// Largest joint table enumerated.
pub const MAX_JOINT: u64 = 1 << 22;
/// Largest number of grid points searched.
pub const MAX_GRID: u64 = 1 << 26;

fn joint_size(bn: &BayesNet) -> Result<u64> {
    let mut size: u64 = 1;
    for v in bn.dag().vars() {
        size = size.saturating_mul(v.values.len() as u64);
        if size > MAX_JOINT {
            return Err(Error::TooLarge(format!("joint distribution exceeds {MAX_JOINT} entries")));
        }
    }
    Ok(size)
}

/// Calls `f` on every full assignment, last variable varying fastest.
fn for_each_assignment(bn: &BayesNet, mut f: impl FnMut(&[usize])) {
    let dims: Vec<usize> = bn.dag().vars().iter().map(|v| v.values.len()).collect();
    let mut a = vec![0usize; dims.len()];
    loop {
        f(&a);
        let mut i = dims.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            a[i] += 1;
            if a[i] < dims[i] {
                break;
            }
            a[i] = 0;
        }
    }
}

/// The full joint distribution, assignments in odometer order.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    pub entries: Vec<(Vec<usize>, f64)>,
}

impl JointTable {
    pub fn new(bn: &BayesNet) -> Result<Self> {
        joint_size(bn)?;
        let mut entries = Vec::new();
        for_each_assignment(bn, |a| entries.push((a.to_vec(), bn.joint(a))));
        Ok(JointTable { entries })
    }

    pub fn marginal(&self, lits: &[Literal]) -> f64 {
        self.entries.iter().filter(|(a, _)| literals_hold(lits, a)).map(|(_, p)| p).sum()
    }
}

/// `Pr(H | E)` by summing the joint distribution.
pub fn infer(bn: &BayesNet, hypothesis: &[Literal], evidence: &[Literal]) -> Result<f64> {
    joint_size(bn)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for_each_assignment(bn, |a| {
        if literals_hold(evidence, a) {
            let p = bn.joint(a);
            den += p;
            if literals_hold(hypothesis, a) {
                num += p;
            }
        }
    });
    if den <= 0.0 {
        return Err(Error::EvidenceImpossible);
    }
    Ok(num / den)
}

pub fn infer_constraint(bn: &BayesNet, c: &Constraint) -> Result<f64> {
    infer(bn, &c.hypothesis, &c.evidence)
}

/// Chan-Darwiche distance between two networks over the same graph, by
/// enumerating the joint distributions. `0/0` counts as ratio 1; any other
/// zero makes the distance infinite.
pub fn cd_exact(a: &BayesNet, b: &BayesNet) -> Result<f64> {
    if a.dag() != b.dag() {
        return Err(Error::InvalidArgument("networks differ in structure".into()));
    }
    joint_size(a)?;
    let mut max_ratio: f64 = 1.0;
    let mut min_ratio: f64 = 1.0;
    let mut infinite = false;
    for_each_assignment(a, |x| {
        let (pa, pb) = (a.joint(x), b.joint(x));
        match (pa == 0.0, pb == 0.0) {
            (true, true) => {}
            (true, false) | (false, true) => infinite = true,
            (false, false) => {
                let r = pb / pa;
                max_ratio = max_ratio.max(r);
                min_ratio = min_ratio.min(r);
            }
        }
    });
    if infinite {
        return Ok(f64::INFINITY);
    }
    Ok(max_ratio.ln() - min_ratio.ln())
}

/// Grid points per axis: `lb + i (ub - lb) / k` for `i = 0..=k`, with
/// `k = ceil((ub - lb) / resolution)`.
fn axis_points(lb: f64, ub: f64, resolution: f64) -> Vec<f64> {
    if ub <= lb {
        return vec![lb];
    }
    let k = ((ub - lb) / resolution).ceil().max(1.0) as usize;
    (0..=k).map(|i| if i == k { ub } else { lb + (ub - lb) * i as f64 / k as f64 }).collect()
}

/// Distance of the closest grid point satisfying the constraint, with that
/// point; `None` if no grid point does. The grid spans each parameter's
/// declared interval. The original instantiation is checked first and wins
/// with distance 0.
pub fn grid_min_distance(
    pbn: &ParamBN,
    c: &Constraint,
    measure: Measure,
    resolution: f64,
) -> Result<Option<(Instantiation, f64)>> {
    let names = pbn.param_names();
    if names.len() > 3 {
        return Err(Error::TooLarge(format!("grid search over {} parameters", names.len())));
    }
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(Error::InvalidArgument(format!("grid resolution {resolution}")));
    }
    let u0 = pbn.original();
    let bn0 = pbn.instantiate_fast(&u0)?;
    if c.holds(infer_constraint(&bn0, c)?) {
        return Ok(Some((u0, 0.0)));
    }
    let axes: Vec<Vec<f64>> = pbn
        .parameter_space()
        .intervals()
        .iter()
        .map(|iv| axis_points(iv.lb, iv.ub, resolution))
        .collect();
    let total = axes.iter().map(|a| a.len() as u64).product::<u64>();
    if total > MAX_GRID {
        return Err(Error::TooLarge(format!("{total} grid points")));
    }
    let origin = u0.values_for(&names)?;
    let dist = |point: &[f64], bn: &BayesNet| -> Result<f64> {
        match measure {
            Measure::Ec => Ok(point.iter().zip(&origin).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()),
            Measure::Cd => cd_exact(&bn0, bn),
        }
    };
    let points: Vec<Vec<f64>> = axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect()
    });
    let scored = points
        .par_iter()
        .map(|p| -> Result<Option<f64>> {
            let u = Instantiation::from_values(&names, p);
            let bn = pbn.instantiate_fast(&u)?;
            match infer_constraint(&bn, c) {
                Ok(v) if c.holds(v) => Ok(Some(dist(p, &bn)?)),
                Ok(_) | Err(Error::EvidenceImpossible) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scored
        .iter()
        .enumerate()
        .filter_map(|(i, d)| d.map(|d| (i, d)))
        .fold(None::<(usize, f64)>, |best, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        });
    Ok(best.map(|(i, d)| (Instantiation::from_values(&names, &points[i]), d)))
}
