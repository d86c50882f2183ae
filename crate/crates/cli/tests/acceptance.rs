//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use bntune_core::bn::{parametrize, BayesNet, Dag, EntryCoord, ParamAssignment, ParamBN, Variable, DEFAULT_DELTA};
use bntune_core::format::{parse_constraint, parse_network, parse_param_spec};
use bntune_core::pla::{extremal_reach, relax, substitute, Opt, RegionVerifier, VerifyOptions};
use bntune_core::pmc::{compile_tailored, reach_prob_values, sensitivity_function};
use bntune_core::poly::{Instantiation, Interval, Region};
use bntune_core::refine::{partition, PartitionOptions};
use bntune_core::synth::{random_network, random_pbn, random_problem, SynthConfig};
use bntune_core::tune::{
    distance, distance_cd, expand_region_cd, expand_region_cd_covaried, minimal_instantiation, tune, Hyper, Measure,
    Status,
};
use bntune_core::{oracle, Constraint, Direction, Error, Literal, Verdict};

const COVID_QUERY: &str = "P(COVID-19=no | Antigen=pos & PCR=pos) <= 0.009";

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn covid() -> ParamBN {
    let bn = parse_network(include_str!("../../../models/covid.bn")).unwrap();
    let (ps, _) = parse_param_spec(&bn, include_str!("../../../models/covid-params.toml")).unwrap();
    parametrize(&bn, &ps, DEFAULT_DELTA).unwrap()
}

fn cli(args: &[&str]) -> (Option<i32>, Value) {
    let net = models().join("covid.bn");
    let params = models().join("covid-params.toml");
    let mut all = vec![args[0], "--network", net.to_str().unwrap(), "--params", params.to_str().unwrap()];
    all.extend_from_slice(&args[1..]);
    let out = Command::new(env!("CARGO_BIN_EXE_bntune")).args(&all).output().expect("binary runs");
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code(), v)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn small() -> SynthConfig {
    SynthConfig { vars: 5, max_parents: 2, window: 3, max_domain: 3 }
}

fn random_box(rng: &mut ChaCha8Rng, space: &Region) -> Region {
    let ivs = space
        .intervals()
        .iter()
        .map(|iv| {
            let w = (iv.ub - iv.lb) * rng.gen_range(0.0..0.5);
            let lb = rng.gen_range(iv.lb..=iv.ub - w);
            Interval::new(lb, (lb + w).min(iv.ub))
        })
        .collect();
    Region::new(ivs).unwrap()
}

/// `A -> B`, both ternary; B's rows 0 and 1 carry `x0`, `x1`.
fn single_cpt(rng: &mut ChaCha8Rng) -> ParamBN {
    let values = || vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let dag = Dag::new(vec![
        Variable { name: "A".into(), values: values(), parents: vec![] },
        Variable { name: "B".into(), values: values(), parents: vec![0] },
    ])
    .unwrap();
    let mut row = || {
        let a = rng.gen_range(1..=900u32);
        let b = rng.gen_range(1..1000 - a);
        vec![a as f64 / 1000.0, b as f64 / 1000.0, (1000 - a - b) as f64 / 1000.0]
    };
    let bn = BayesNet::new(dag, vec![vec![vec![0.2, 0.3, 0.5]], vec![row(), row(), row()]]).unwrap();
    let ps: Vec<ParamAssignment> = (0..2)
        .map(|r| ParamAssignment { coord: EntryCoord { var: 1, row: r, value: r }, name: format!("x{r}"), interval: None })
        .collect();
    parametrize(&bn, &ps, DEFAULT_DELTA).unwrap()
}

fn c1_baseline() -> Outcome {
    let start = Instant::now();
    let (code, v) = cli(&["infer", "--constraint", COVID_QUERY]);
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    let p = v["probability"].as_f64().ok_or("no probability in output")?;
    check(code == Some(0) && (p - 0.011089).abs() <= 1e-5, format!("Pr = {p:.9}, target 0.011089 +- 1e-5, {elapsed:.2?}"))
}

fn c2_sensitivity() -> Outcome {
    let start = Instant::now();
    let pbn = covid();
    let c = parse_constraint(pbn.dag(), COVID_QUERY).unwrap();
    let (pmc, spec) = compile_tailored(&pbn, &pbn.dag().topological_order(), &c).unwrap();
    let f = sensitivity_function(&pmc, &spec.targets).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (p, q) = (rng.gen_range(DEFAULT_DELTA..1.0 - DEFAULT_DELTA), rng.gen_range(DEFAULT_DELTA..1.0 - DEFAULT_DELTA));
        let expected = 361.0 / (34900.0 * p * q + 8758.0 * q + 361.0);
        let got = f.eval(&Instantiation::from_values(&pbn.param_names(), &[p, q])).unwrap();
        worst = worst.max((got - expected).abs());
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    check(worst <= 1e-9, format!("f = {f}; max deviation {worst:.1e} over 100 points (tol 1e-9)"))
}

fn c3_worked_example() -> Outcome {
    let t = Instant::now();
    let (code, v) = cli(&["tune", "--constraint", COVID_QUERY, "--eta", "0.99", "--gamma", "0.5", "--distance", "ec"]);
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    let status = v["status"].as_str().unwrap_or("?").to_string();
    let sq = v["distance"]["squared"].as_f64().ok_or(format!("status {status}, no distance"))?;
    let at: Vec<String> =
        v["instantiation"].as_object().ok_or("no instantiation")?.iter().map(|(k, x)| format!("{k}={x}")).collect();
    let u: Instantiation = v["instantiation"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, x)| (k.clone(), x.as_f64().unwrap()))
        .collect();
    // exact re-check, independent of the CLI
    let pbn = covid();
    let c = parse_constraint(pbn.dag(), COVID_QUERY).unwrap();
    let exact = oracle::infer_constraint(&pbn.instantiate(&u).unwrap(), &c).unwrap();
    let bound = 0.040913125 + (1.0 - 0.99) * 2.0;
    check(
        code == Some(0) && status == "Tuned" && c.holds(exact) && sq <= bound,
        format!("{status} at {}, Pr = {exact:.7}, squared distance {sq:.6} <= {bound}, {elapsed:.2?}", at.join(",")),
    )
}

fn c4_spot_value() -> Outcome {
    let pbn = covid();
    let c = parse_constraint(pbn.dag(), COVID_QUERY).unwrap();
    let (pmc, spec) = compile_tailored(&pbn, &pbn.dag().topological_order(), &c).unwrap();
    let p = reach_prob_values(&pmc, &[0.92075, 0.97475], &spec.targets).unwrap();
    check((p - 0.008798).abs() <= 1e-5, format!("reach = {p:.7}, target 0.008798 +- 1e-5"))
}

struct Case {
    pbn: ParamBN,
    c: Constraint,
    regions: Vec<Region>,
}

fn corpus() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..50)
        .map(|_| {
            let (pbn, c) = random_problem(&mut rng, &small(), 3).unwrap();
            let space = pbn.parameter_space();
            let regions = (0..6).map(|_| random_box(&mut rng, &space)).collect();
            Case { pbn, c, regions }
        })
        .collect()
}

fn c5_soundness(cases: &[Case]) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut accepting, mut rejecting, mut bad) = (0, 0, 0);
    for case in cases {
        let (pmc, spec) = compile_tailored(&case.pbn, &case.pbn.dag().topological_order(), &case.c).unwrap();
        let verifier = RegionVerifier::new(&pmc, spec, VerifyOptions::default());
        let names = case.pbn.param_names();
        for r in &case.regions {
            let verdict = verifier.verify(r).unwrap();
            match verdict {
                Verdict::Accepting => accepting += 1,
                Verdict::Rejecting => rejecting += 1,
                Verdict::Inconclusive => continue,
            }
            for _ in 0..1000 {
                let u = Instantiation::from_values(&names, &r.sample(&mut rng));
                let p = oracle::infer_constraint(&case.pbn.instantiate_fast(&u).unwrap(), &case.c).unwrap();
                if case.c.holds(p) != (verdict == Verdict::Accepting) {
                    bad += 1;
                }
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    check(
        bad == 0 && accepting + rejecting > 0,
        format!("{accepting} accepting, {rejecting} rejecting regions x 1000 samples, {bad} disagreements, {:.2?}", start.elapsed()),
    )
}

fn c6_sandwich(cases: &[Case]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut samples, mut bad, mut worst) = (0, 0, 0.0f64);
    for case in cases {
        let (pmc, spec) = compile_tailored(&case.pbn, &case.pbn.dag().topological_order(), &case.c).unwrap();
        let relaxed = relax(&pmc);
        let names = case.pbn.param_names();
        for r in &case.regions {
            let mdp = substitute(&relaxed, r).unwrap();
            let lo = extremal_reach(&mdp, &spec.targets, Opt::Min, 1e-10);
            let hi = extremal_reach(&mdp, &spec.targets, Opt::Max, 1e-10);
            for _ in 0..100 {
                let u = Instantiation::from_values(&names, &r.sample(&mut rng));
                let p = oracle::infer_constraint(&case.pbn.instantiate_fast(&u).unwrap(), &case.c).unwrap();
                samples += 1;
                worst = worst.max(lo - p).max(p - hi);
                if p < lo - 1e-8 || p > hi + 1e-8 {
                    bad += 1;
                }
            }
        }
    }
    check(bad == 0, format!("{samples} samples, {bad} outside [min - 1e-8, max + 1e-8], worst excess {worst:.1e}"))
}

fn c7_coverage() -> Outcome {
    let mut problems = vec![{
        let pbn = covid();
        let c = parse_constraint(pbn.dag(), COVID_QUERY).unwrap();
        (pbn, c)
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    problems.extend((0..10).map(|_| random_problem(&mut rng, &small(), 2).unwrap()));
    let (mut complete, mut unreachable, mut bad) = (0, 0, Vec::new());
    let mut worst_tiling = 0.0f64;
    for (i, (pbn, c)) in problems.iter().enumerate() {
        let (pmc, spec) = compile_tailored(pbn, &pbn.dag().topological_order(), c).unwrap();
        let verifier = RegionVerifier::new(&pmc, spec, VerifyOptions::default());
        let input = pbn.parameter_space();
        for eta in [0.9, 0.99, 0.999] {
            let (r, done) = match partition(&verifier, &input, eta, PartitionOptions::default()) {
                Ok(r) => (r, true),
                Err(Error::CoverageUnreachable(r)) => (*r, false),
                Err(e) => return Err(e.to_string()),
            };
            let vol = |bs: &[Region]| bs.iter().map(|b| b.normalized_volume(&input)).sum::<f64>();
            let unknown = vol(&r.unknown);
            let total = vol(&r.accepting) + vol(&r.rejecting) + unknown;
            worst_tiling = worst_tiling.max((total - 1.0).abs());
            if done {
                complete += 1;
                if unknown > 1.0 - eta + 1e-9 {
                    bad.push(format!("problem {i} eta {eta}: unknown {unknown}"));
                }
            } else {
                unreachable += 1;
            }
        }
    }
    check(
        bad.is_empty() && worst_tiling <= 1e-12 && complete > 0,
        format!(
            "{complete} complete runs within bound, {unreachable} reported CoverageUnreachable, tiling error {worst_tiling:.1e}{}",
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.join("; ")) }
        ),
    )
}

fn c8_alg2_vs_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = 0;
    for k in 0..1000 {
        let pbn = single_cpt(&mut rng);
        let names = pbn.param_names();
        let u0 = pbn.original();
        let measure = if k % 2 == 0 { Measure::Ec } else { Measure::Cd };
        let corners: Vec<f64> = (0..4).map(|_| rng.gen_range(0.001..0.999)).collect();
        let b = Region::from_bounds(&[
            (corners[0].min(corners[1]), corners[0].max(corners[1])),
            (corners[2].min(corners[3]), corners[2].max(corners[3])),
        ])
        .unwrap();
        let (_, best) = minimal_instantiation(std::slice::from_ref(&b), &u0, &names, measure, &pbn).unwrap();
        let (x, y) = (b.interval(0), b.interval(1));
        'grid: for i in 0..100 {
            for j in 0..100 {
                let p = [x.lb + x.width() * i as f64 / 99.0, y.lb + y.width() * j as f64 / 99.0];
                let d = distance(measure, &Instantiation::from_values(&names, &p), &u0, &pbn).unwrap();
                if best.value > d.value + 1e-12 {
                    bad += 1;
                    break 'grid;
                }
            }
        }
    }
    check(bad == 0, format!("1000 boxes (500 EC, 500 CD) x 10^4 grid points, {bad} boxes beaten by the grid"))
}

fn c9_corollary4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut vertices, mut over, mut mismatch, mut raw_over) = (0, 0, 0, 0);
    for _ in 0..500 {
        let pbn = single_cpt(&mut rng);
        let names = pbn.param_names();
        let u0 = pbn.original();
        let bn0 = pbn.instantiate(&u0).unwrap();
        let eps = rng.gen_range(0.001..4.0);
        let origin = u0.values_for(&names).unwrap();
        for (raw, r) in [(false, expand_region_cd_covaried(&origin, eps, DEFAULT_DELTA)), (true, expand_region_cd(&origin, eps, DEFAULT_DELTA))] {
            for v in r.vertices(&[0, 1]) {
                let u = Instantiation::from_values(&names, &v);
                let d = distance_cd(&u, &u0, &pbn).unwrap();
                if raw {
                    raw_over += usize::from(d > eps + 1e-9);
                    continue;
                }
                vertices += 1;
                over += usize::from(d > eps + 1e-9);
                let exact = oracle::cd_exact(&bn0, &pbn.instantiate_fast(&u).unwrap()).unwrap();
                mismatch += usize::from((d - exact).abs() > 1e-9);
            }
        }
    }
    check(
        over == 0 && mismatch == 0,
        format!(
            "{vertices} vertices of the co-variation-aware box: {over} with CD > eps + 1e-9, {mismatch} closed-form/exact mismatches; \
             the per-parameter box alone exceeds eps at {raw_over} vertices"
        ),
    )
}

fn c10_infeasible() -> Outcome {
    let pbn = covid();
    let c = parse_constraint(pbn.dag(), "P(COVID-19=no | Antigen=pos & PCR=pos) <= 0.005").unwrap();
    let h = Hyper { eta: 1.0, ..Hyper::default() };
    let r = tune(&pbn, &pbn.original(), &c, &h, None).map_err(|e| e.to_string())?;
    let last = r.iterations.last().ok_or("no iterations")?;
    let full = last.region == pbn.parameter_space();
    check(
        r.status == Status::Infeasible && last.verifications == 1 && full,
        format!(
            "{}, {} iterations, final full-space iteration used {} verification(s)",
            r.status.as_str(),
            r.iterations.len(),
            last.verifications
        ),
    )
}

/// 30-node network, 2 parameters, a constraint violated at the original values.
fn smoke() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig { vars: 30, max_parents: 2, window: 3, max_domain: 2 };
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bn = random_network(&mut rng, &cfg).unwrap();
        let pbn = random_pbn(&mut rng, &bn, 2).unwrap();
        let targets: Vec<usize> = pbn.parametrized_vars().into_iter().collect();
        let hyp = Literal { var: 29, value: 0 };
        if !targets.iter().all(|&v| v < 29) {
            continue;
        }
        let probe = |threshold| Constraint::new(pbn.dag(), vec![hyp], vec![], Direction::AtLeast, threshold).unwrap();
        let order = pbn.dag().topological_order();
        let (pmc, spec) = compile_tailored(&pbn, &order, &probe(0.5)).unwrap();
        let names = pbn.param_names();
        let at0 = reach_prob_values(&pmc, &pbn.original().values_for(&names).unwrap(), &spec.targets).unwrap();
        let at1 = reach_prob_values(&pmc, &[0.95, 0.95], &spec.targets).unwrap();
        let at2 = reach_prob_values(&pmc, &[0.05, 0.05], &spec.targets).unwrap();
        let hi = at1.max(at2);
        if hi - at0 < 0.01 {
            continue;
        }
        let c = probe((at0 + hi) / 2.0);
        let r = tune(&pbn, &pbn.original(), &c, &Hyper::default(), None).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        within(elapsed, Duration::from_secs(300))?;
        return check(
            r.status == Status::Tuned,
            format!(
                "seed {seed}: {} states, {} at distance {:.4}, {elapsed:.2?}",
                pmc.num_states(),
                r.status.as_str(),
                r.distance.map_or(f64::NAN, |d| d.value)
            ),
        );
    }
    Err("no seed produced a parameter-sensitive query".into())
}

fn main() {
    let cases = corpus();
    let criteria: Vec<Criterion> = vec![
        ("1", "COVID baseline", Box::new(c1_baseline)),
        ("2", "sensitivity function", Box::new(c2_sensitivity)),
        ("3", "worked-example tuning", Box::new(c3_worked_example)),
        ("4", "spot value", Box::new(c4_spot_value)),
        ("5", "verdict soundness", Box::new(|| c5_soundness(&cases))),
        ("6", "lifting sandwich", Box::new(|| c6_sandwich(&cases))),
        ("7", "coverage contract", Box::new(c7_coverage)),
        ("8", "clamped candidate vs grid", Box::new(c8_alg2_vs_grid)),
        ("9", "CD expansion closeness", Box::new(c9_corollary4)),
        ("10", "infeasibility fast path", Box::new(c10_infeasible)),
        ("smoke", "30-node tuning", Box::new(smoke)),
    ];
    let mut failed = 0;
    for (id, name, run) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  [{id}] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  [{id}] {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
