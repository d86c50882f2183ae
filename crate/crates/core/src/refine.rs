//! Region partitioning to a coverage factor.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pla::{RegionVerifier, Verdict};
use crate::poly::Region;

pub const DEFAULT_MAX_BOXES: usize = 1 << 16;

/// Boxes verified per parallel round. Fixed so results do not depend on
/// the worker count.
const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionResult {
    pub accepting: Vec<Region>,
    pub rejecting: Vec<Region>,
    pub unknown: Vec<Region>,
    /// Conclusive fraction of the normalized volume.
    pub coverage: f64,
    pub verifications: usize,
}

impl PartitionResult {
    /// One row per box: verdict, then lb/ub per parameter.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("verdict");
        for n in names {
            let _ = write!(out, ",{n}_lb,{n}_ub");
        }
        out.push('\n');
        let groups = [
            ("Accepting", &self.accepting),
            ("Rejecting", &self.rejecting),
            ("Inconclusive", &self.unknown),
        ];
        for (tag, boxes) in groups {
            for b in boxes.iter() {
                out.push_str(tag);
                for iv in b.intervals() {
                    let _ = write!(out, ",{:.16e},{:.16e}", iv.lb, iv.ub);
                }
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionOptions {
    pub max_boxes: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions { max_boxes: DEFAULT_MAX_BOXES }
    }
}

struct Pending {
    region: Region,
    /// Number of bisections from the input; normalized volume is 2^-depth.
    depth: u32,
}

/// Axis with the largest width relative to the input region; lowest index
/// wins ties. `None` if every axis is degenerate.
fn split_axis(region: &Region, input: &Region) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (iv, full)) in region.intervals().iter().zip(input.intervals()).enumerate() {
        if full.width() <= 0.0 || iv.width() <= 0.0 {
            continue;
        }
        let w = iv.width() / full.width();
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((i, w));
        }
    }
    best.map(|(i, _)| i)
}

fn volume(depth: u32) -> f64 {
    (-(depth as f64)).exp2()
}

/// Breadth-first worklist: verify, bisect inconclusive boxes, stop once the
/// conclusive volume reaches `eta` of the input.
pub fn partition(
    verifier: &RegionVerifier<'_>,
    region: &Region,
    eta: f64,
    opts: PartitionOptions,
) -> Result<PartitionResult> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("coverage factor {eta} outside [0, 1]")));
    }
    let mut queue = VecDeque::from([Pending { region: region.clone(), depth: 0 }]);
    let mut accepting = Vec::new();
    let mut rejecting = Vec::new();
    let mut stuck = Vec::new();
    let mut conclusive = 0.0f64;
    let mut verifications = 0usize;
    let mut guard_tripped = false;

    // at least one verification, even for eta = 0
    while !queue.is_empty() && (verifications == 0 || conclusive < eta) {
        if verifications >= opts.max_boxes {
            guard_tripped = true;
            break;
        }
        let take = queue.len().min(CHUNK).min(opts.max_boxes - verifications);
        let batch: Vec<Pending> = queue.drain(..take).collect();
        let verdicts = batch
            .par_iter()
            .map(|p| verifier.verify(&p.region))
            .collect::<Result<Vec<_>>>()?;
        verifications += batch.len();
        for (p, verdict) in batch.into_iter().zip(verdicts) {
            match verdict {
                Verdict::Accepting => {
                    conclusive += volume(p.depth);
                    accepting.push(p.region);
                }
                Verdict::Rejecting => {
                    conclusive += volume(p.depth);
                    rejecting.push(p.region);
                }
                Verdict::Inconclusive => match split_axis(&p.region, region) {
                    Some(axis) => {
                        let (lo, hi) = p.region.bisect(axis);
                        queue.push_back(Pending { region: lo, depth: p.depth + 1 });
                        queue.push_back(Pending { region: hi, depth: p.depth + 1 });
                    }
                    None => stuck.push(p),
                },
            }
        }
    }

    let mut unknown: Vec<Region> = stuck.into_iter().chain(queue).map(|p| p.region).collect();
    for list in [&mut accepting, &mut rejecting, &mut unknown] {
        list.sort_by(|a, b| a.cmp_bounds(b));
    }
    let result = PartitionResult { accepting, rejecting, unknown, coverage: conclusive, verifications };
    if conclusive < eta && (guard_tripped || !result.unknown.is_empty()) {
        return Err(Error::CoverageUnreachable(Box::new(result)));
    }
    Ok(result)
}
