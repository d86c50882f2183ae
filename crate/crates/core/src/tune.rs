//! Minimal-change tuning: grow a box around the original instantiation until
//! partitioning finds accepting sub-boxes, then pick the closest point of
//! those sub-boxes.

use std::fmt;
use std::str::FromStr;

use crate::bn::{Constraint, ParamBN, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::pla::{RegionVerifier, VerifyOptions, DEFAULT_MARGIN, DEFAULT_VI_TOL};
use crate::pmc::{compile_tailored, reach_prob_values};
use crate::poly::{Instantiation, Interval, Region};
use crate::refine::{partition, PartitionOptions, PartitionResult, DEFAULT_MAX_BOXES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Euclidean distance between parameter vectors.
    Ec,
    /// Chan-Darwiche distance between the joint distributions.
    Cd,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Ec => "ec",
            Measure::Cd => "cd",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ec" => Ok(Measure::Ec),
            "cd" => Ok(Measure::Cd),
            other => Err(Error::InvalidArgument(format!("unknown distance measure `{other}`"))),
        }
    }
}

/// Hyper-parameters of the tuning loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyper {
    /// Coverage factor η.
    pub eta: f64,
    /// Expansion factor γ; each round divides ε by γ.
    pub gamma: f64,
    /// Number of ε values tried, K.
    pub max_iters: usize,
    pub measure: Measure,
    pub delta: f64,
    pub vi_tol: f64,
    pub margin: f64,
    pub max_boxes: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            eta: 0.99,
            gamma: 0.5,
            max_iters: 6,
            measure: Measure::Ec,
            delta: DEFAULT_DELTA,
            vi_tol: DEFAULT_VI_TOL,
            margin: DEFAULT_MARGIN,
            max_boxes: DEFAULT_MAX_BOXES,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidArgument(format!("eta {} outside [0, 1]", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidArgument(format!("delta {} outside (0, 0.5)", self.delta)));
        }
        if self.vi_tol.is_nan() || self.vi_tol <= 0.0 || self.margin.is_nan() || self.margin < 0.0 {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Satisfied,
    Tuned,
    Infeasible,
    Unknown,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Satisfied => "Satisfied",
            Status::Tuned => "Tuned",
            Status::Infeasible => "Infeasible",
            Status::Unknown => "Unknown",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceReport {
    pub measure: Measure,
    pub value: f64,
    /// Sum of squared parameter deviations, reported for every measure.
    pub squared: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationStats {
    pub epsilon: f64,
    pub region: Region,
    pub verifications: usize,
    pub accepting: usize,
    pub rejecting: usize,
    pub unknown: usize,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub status: Status,
    pub instantiation: Option<Instantiation>,
    pub distance: Option<DistanceReport>,
    /// Exact `Pr(H | E)` at the returned instantiation.
    pub probability: Option<f64>,
    pub epsilon_final: Option<f64>,
    pub iterations: Vec<IterationStats>,
    /// Coverage of the last partitioning run.
    pub coverage: f64,
    pub last_partition: Option<PartitionResult>,
}

fn check_same_params(u: &Instantiation, u0: &Instantiation) -> Result<()> {
    for (name, _) in u.iter() {
        if u0.get(name).is_none() {
            return Err(Error::UnboundParameter(name.to_string()));
        }
    }
    for (name, _) in u0.iter() {
        if u.get(name).is_none() {
            return Err(Error::UnboundParameter(name.to_string()));
        }
    }
    Ok(())
}

/// Euclidean distance and its square.
pub fn distance_ec(u: &Instantiation, u0: &Instantiation) -> Result<(f64, f64)> {
    check_same_params(u, u0)?;
    let squared: f64 = u
        .iter()
        .map(|(n, x)| {
            let d = x - u0.get(n).expect("checked");
            d * d
        })
        .sum();
    Ok((squared.sqrt(), squared))
}

/// The variable whose CPT holds every parameter, as the closed-form CD
/// distance requires.
pub fn single_cpt(pbn: &ParamBN) -> Result<usize> {
    let vars = pbn.parametrized_vars();
    match vars.len() {
        1 => Ok(*vars.iter().next().unwrap()),
        0 => Err(Error::UnsupportedForCD("network has no parameters".into())),
        k => Err(Error::UnsupportedForCD(format!("parameters occur in {k} CPTs"))),
    }
}

/// Closed-form CD distance for a single parametrized CPT:
/// `ln max θ'[u]/θ'[u0] - ln min θ'[u]/θ'[u0]` over that CPT's entries.
pub fn distance_cd(u: &Instantiation, u0: &Instantiation, pbn: &ParamBN) -> Result<f64> {
    check_same_params(u, u0)?;
    let v = single_cpt(pbn)?;
    let mut max_ratio: f64 = 1.0;
    let mut min_ratio: f64 = 1.0;
    for row in pbn.cpt(v) {
        for e in row {
            let new = e.eval_f64(|n| u.get(n))?;
            let old = e.eval_f64(|n| u0.get(n))?;
            let ratio = match (old == 0.0, new == 0.0) {
                (true, true) => 1.0,
                (true, false) => f64::INFINITY,
                _ => new / old,
            };
            max_ratio = max_ratio.max(ratio);
            min_ratio = min_ratio.min(ratio);
        }
    }
    Ok(max_ratio.ln() - min_ratio.ln())
}

pub fn distance(measure: Measure, u: &Instantiation, u0: &Instantiation, pbn: &ParamBN) -> Result<DistanceReport> {
    let (ec, squared) = distance_ec(u, u0)?;
    let value = match measure {
        Measure::Ec => ec,
        Measure::Cd => distance_cd(u, u0, pbn)?,
    };
    Ok(DistanceReport { measure, value, squared })
}

/// Upper bound on the distance from the original instantiation to any
/// point of the parameter space.
pub fn d0_upper(measure: Measure, pbn: &ParamBN) -> Result<f64> {
    match measure {
        Measure::Ec => Ok((pbn.params().len() as f64).sqrt()),
        Measure::Cd => {
            let v = single_cpt(pbn)?;
            let names = pbn.param_names();
            let space = pbn.parameter_space();
            if space.intervals().iter().any(|iv| iv.lb <= 0.0 || iv.ub >= 1.0) {
                return Err(Error::UnsupportedForCD("parameter bounds touch 0 or 1".into()));
            }
            let u0 = pbn.original();
            // extreme ratios of every entry over the whole space; entries are
            // multi-affine, so vertices suffice
            let mut max_ratio: f64 = 1.0;
            let mut min_ratio: f64 = 1.0;
            for row in pbn.cpt(v) {
                for e in row {
                    let old = e.eval_f64(|n| u0.get(n))?;
                    if old == 0.0 {
                        continue;
                    }
                    let (lo, hi) = e.bounds(&names, &space)?;
                    max_ratio = max_ratio.max(hi / old);
                    min_ratio = min_ratio.min(lo / old);
                }
            }
            if min_ratio <= 0.0 {
                return Err(Error::UnsupportedForCD("an entry can reach 0 inside the space".into()));
            }
            Ok(max_ratio.ln() - min_ratio.ln())
        }
    }
}

fn clamp_interval(lb: f64, ub: f64, delta: f64) -> Interval {
    let lb = lb.max(delta);
    let ub = ub.min(1.0 - delta);
    Interval::new(lb, ub.max(lb))
}

/// Box of half-width `ε/√n` around `u0`, clamped to `[δ, 1-δ]`; every point
/// lies within EC distance `ε`.
pub fn expand_region_ec(u0: &[f64], epsilon: f64, delta: f64) -> Region {
    let half = epsilon / (u0.len() as f64).sqrt();
    Region::new(u0.iter().map(|&x| clamp_interval(x - half, x + half, delta)).collect())
        .expect("clamped intervals")
}

/// Box `[u0/α, u0·α]` with `α = e^{ε/2}`, clamped to `[δ, 1-δ]`.
pub fn expand_region_cd(u0: &[f64], epsilon: f64, delta: f64) -> Region {
    let alpha = (epsilon / 2.0).exp();
    Region::new(u0.iter().map(|&x| clamp_interval(x / alpha, x * alpha, delta)).collect())
        .expect("clamped intervals")
}

/// As [`expand_region_cd`], additionally keeping the co-varied mass
/// `1 - x` within a factor `α` of `1 - u0`, so every CPT entry of a linear
/// proportional row stays within that factor and the CD distance stays
/// below `ε`.
pub fn expand_region_cd_covaried(u0: &[f64], epsilon: f64, delta: f64) -> Region {
    let alpha = (epsilon / 2.0).exp();
    Region::new(
        u0.iter()
            .map(|&x| {
                let rest = 1.0 - x;
                let lb = (x / alpha).max(1.0 - rest * alpha);
                let ub = (x * alpha).min(1.0 - rest / alpha);
                clamp_interval(lb, ub, delta)
            })
            .collect(),
    )
    .expect("clamped intervals")
}

/// Per box, clamp `u0` into the box axis by axis; return the candidate of
/// least distance (first one on ties).
pub fn minimal_instantiation(
    boxes: &[Region],
    u0: &Instantiation,
    names: &[String],
    measure: Measure,
    pbn: &ParamBN,
) -> Result<(Instantiation, DistanceReport)> {
    if boxes.is_empty() {
        return Err(Error::EmptyInput("no accepting regions".into()));
    }
    let origin = u0.values_for(names)?;
    let mut best: Option<(Instantiation, DistanceReport)> = None;
    for b in boxes {
        let point: Vec<f64> = b
            .intervals()
            .iter()
            .zip(&origin)
            .map(|(iv, &x)| x.clamp(iv.lb, iv.ub))
            .collect();
        let candidate = Instantiation::from_values(names, &point);
        let d = distance(measure, &candidate, u0, pbn)?;
        if best.as_ref().is_none_or(|(_, bd)| d.value < bd.value) {
            best = Some((candidate, d));
        }
    }
    Ok(best.expect("nonempty"))
}

fn stats(epsilon: f64, region: &Region, p: &PartitionResult) -> IterationStats {
    IterationStats {
        epsilon,
        region: region.clone(),
        verifications: p.verifications,
        accepting: p.accepting.len(),
        rejecting: p.rejecting.len(),
        unknown: p.unknown.len(),
        coverage: p.coverage,
    }
}

/// The full tuning loop. `order` defaults to the network's topological
/// order preferring declaration order.
pub fn tune(
    pbn: &ParamBN,
    u0: &Instantiation,
    c: &Constraint,
    h: &Hyper,
    order: Option<&[usize]>,
) -> Result<TuneResult> {
    h.validate()?;
    let default_order;
    let order = match order {
        Some(o) => o,
        None => {
            default_order = pbn.dag().topological_order();
            &default_order
        }
    };
    let (pmc, spec) = compile_tailored(pbn, order, c)?;
    let names = pmc.param_names();
    let origin = u0.values_for(&names)?;
    if u0.len() != names.len() {
        return Err(Error::InvalidArgument("instantiation has unknown parameters".into()));
    }
    let space = pbn.parameter_space();
    if !space.contains(&origin) {
        return Err(Error::BadRegion(format!("original instantiation {u0} outside the parameter space")));
    }
    let p0 = reach_prob_values(&pmc, &origin, &spec.targets)?;
    let mut result = TuneResult {
        status: Status::Unknown,
        instantiation: None,
        distance: None,
        probability: Some(p0),
        epsilon_final: None,
        iterations: Vec::new(),
        coverage: 0.0,
        last_partition: None,
    };
    if c.holds(p0) {
        result.status = Status::Satisfied;
        result.instantiation = Some(u0.clone());
        result.distance = Some(DistanceReport { measure: h.measure, value: 0.0, squared: 0.0 });
        result.epsilon_final = Some(0.0);
        result.coverage = 1.0;
        return Ok(result);
    }
    result.probability = None;
    if names.is_empty() {
        result.status = Status::Infeasible;
        result.coverage = 1.0;
        return Ok(result);
    }

    let d0 = d0_upper(h.measure, pbn)?;
    let verifier = RegionVerifier::new(&pmc, spec.clone(), VerifyOptions { vi_tol: h.vi_tol, margin: h.margin });
    let popts = PartitionOptions { max_boxes: h.max_boxes };
    let k = h.max_iters;
    for i in 0..k {
        let last = i + 1 == k;
        let epsilon = d0 * h.gamma.powi((k - 1 - i) as i32);
        let expanded = if last {
            // every instantiation is within d0
            space.clone()
        } else {
            match h.measure {
                Measure::Ec => expand_region_ec(&origin, epsilon, h.delta),
                Measure::Cd => expand_region_cd_covaried(&origin, epsilon, h.delta),
            }
        };
        let region = expanded.intersect(&space).expect("box contains the original instantiation");
        result.epsilon_final = Some(epsilon);
        let (part, complete) = match partition(&verifier, &region, h.eta, popts) {
            Ok(p) => (p, true),
            Err(Error::CoverageUnreachable(p)) => (*p, false),
            Err(e) => return Err(e),
        };
        result.iterations.push(stats(epsilon, &region, &part));
        result.coverage = part.coverage;
        if !part.accepting.is_empty() {
            let (u, d) = minimal_instantiation(&part.accepting, u0, &names, h.measure, pbn)?;
            let values = u.values_for(&names)?;
            let p = reach_prob_values(&pmc, &values, &spec.targets)?;
            let confirmed = c.holds(p);
            result.status = if confirmed && complete { Status::Tuned } else { Status::Unknown };
            result.instantiation = Some(u);
            result.distance = Some(d);
            result.probability = Some(p);
            result.last_partition = Some(part);
            return Ok(result);
        }
        let exhausted = part.coverage >= 1.0;
        result.last_partition = Some(part);
        if !complete {
            result.status = Status::Unknown;
            return Ok(result);
        }
        if last {
            result.status = if exhausted { Status::Infeasible } else { Status::Unknown };
        }
    }
    Ok(result)
}
