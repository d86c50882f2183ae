mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use bntune_core::bn::{parametrize, DEFAULT_DELTA};
use bntune_core::format::{parse_constraint, parse_instantiation, parse_network_with, parse_param_spec, parse_region};
use bntune_core::pla::{RegionVerifier, VerifyOptions, DEFAULT_MARGIN, DEFAULT_VI_TOL};
use bntune_core::pmc::{compile, compile_tailored, Pmc, ReachSpec};
use bntune_core::refine::{partition, PartitionOptions, PartitionResult, DEFAULT_MAX_BOXES};
use bntune_core::tune::{tune, Hyper, Measure, Status};
use bntune_core::{oracle, Constraint, Error, Instantiation, ParamBN, Region, Verdict};

use report::{instantiation_json, num, region_json, Timer};

#[derive(Parser)]
#[command(name = "bntune", version, about = "Minimal-change parameter tuning for Bayesian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional probability by joint enumeration.
    Infer(InferArgs),
    /// Compile to a parametric Markov chain and report its size.
    Compile(CompileArgs),
    /// Verify one region by parameter lifting.
    Verify(VerifyArgs),
    /// Partition a region into accepting, rejecting and unknown boxes.
    Partition(PartitionArgs),
    /// Find a close instantiation satisfying the constraint.
    Tune(TuneArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Network file.
    #[arg(long)]
    network: PathBuf,
    /// Parameter spec (TOML); without it the network has no parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Clamp keeping default parameter intervals inside [delta, 1-delta].
    #[arg(long)]
    delta: Option<f64>,
    /// Rescale CPT rows that do not sum to 1 instead of rejecting them.
    #[arg(long)]
    renormalize: bool,
    /// Variable order for compilation, comma separated.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<String>>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    constraint: String,
    /// Parameter values, e.g. `p=0.9,q=0.95`; defaults to the original values.
    #[arg(long)]
    at: Option<String>,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Build the evidence-tailored chain for this constraint.
    #[arg(long)]
    constraint: Option<String>,
    #[arg(long)]
    emit_dot: Option<PathBuf>,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long, default_value_t = DEFAULT_VI_TOL)]
    vi_tol: f64,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    /// Oracle samples drawn from conclusive boxes to cross-check verdicts.
    #[arg(long, default_value_t = 0)]
    self_check: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    constraint: String,
    /// Box, e.g. `p=0.2:0.6,q=0.1:0.3`; defaults to the parameter space.
    #[arg(long)]
    region: Option<String>,
    #[command(flatten)]
    lift: LiftArgs,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    constraint: String,
    #[arg(long)]
    region: Option<String>,
    #[arg(long, default_value_t = 0.99)]
    eta: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_BOXES)]
    max_boxes: usize,
    #[arg(long)]
    emit_boxes: Option<PathBuf>,
    #[command(flatten)]
    lift: LiftArgs,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    constraint: String,
    #[arg(long, default_value_t = 0.99)]
    eta: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 6)]
    max_iters: usize,
    /// Distance measure: ec or cd.
    #[arg(long, default_value = "ec")]
    distance: Measure,
    #[arg(long, default_value_t = DEFAULT_MAX_BOXES)]
    max_boxes: usize,
    /// CSV of the boxes of the last partitioning run.
    #[arg(long)]
    emit_boxes: Option<PathBuf>,
    #[arg(long)]
    emit_dot: Option<PathBuf>,
    #[command(flatten)]
    lift: LiftArgs,
}

struct Model {
    pbn: ParamBN,
    order: Vec<usize>,
    delta: f64,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn load(args: &ModelArgs) -> Result<Model, Error> {
    if let Some(n) = args.threads {
        // fails only if the pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let bn = parse_network_with(&read(&args.network)?, args.renormalize)?;
    let (assignments, file_delta) = match &args.params {
        Some(path) => parse_param_spec(&bn, &read(path)?)?,
        None => (Vec::new(), None),
    };
    let delta = args.delta.or(file_delta).unwrap_or(DEFAULT_DELTA);
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside (0, 0.5)")));
    }
    let pbn = parametrize(&bn, &assignments, delta)?;
    let order = match &args.order {
        Some(names) => pbn.dag().order_from_names(names)?,
        None => pbn.dag().topological_order(),
    };
    Ok(Model { pbn, order, delta })
}

fn region_arg(pbn: &ParamBN, text: Option<&str>) -> Result<Region, Error> {
    match text {
        Some(t) => parse_region(t, &pbn.param_names()),
        None => Ok(pbn.parameter_space()),
    }
}

/// Samples `n` points per conclusive box and counts oracle disagreements.
fn self_check(
    pbn: &ParamBN,
    c: &Constraint,
    boxes: &[(&Region, Verdict)],
    n: usize,
    seed: u64,
) -> Result<Value, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = pbn.param_names();
    let mut samples = 0usize;
    let mut violations = 0usize;
    for &(b, verdict) in boxes {
        if verdict == Verdict::Inconclusive {
            continue;
        }
        for _ in 0..n {
            let u = Instantiation::from_values(&names, &b.sample(&mut rng));
            let holds = c.holds(oracle::infer_constraint(&pbn.instantiate_fast(&u)?, c)?);
            samples += 1;
            if holds != (verdict == Verdict::Accepting) {
                violations += 1;
            }
        }
    }
    Ok(json!({ "samples": samples, "violations": violations }))
}

fn lifted(m: &Model, constraint: &str) -> Result<(Constraint, Pmc, ReachSpec), Error> {
    let c = parse_constraint(m.pbn.dag(), constraint)?;
    let (pmc, spec) = compile_tailored(&m.pbn, &m.order, &c)?;
    Ok((c, pmc, spec))
}

fn boxes_json(p: &PartitionResult) -> Value {
    json!({
        "accepting": p.accepting.len(),
        "rejecting": p.rejecting.len(),
        "unknown": p.unknown.len(),
    })
}

fn run_infer(a: &InferArgs, t: &mut Timer) -> Result<(Map<String, Value>, u8), Error> {
    let m = load(&a.model)?;
    let c = parse_constraint(m.pbn.dag(), &a.constraint)?;
    let u = match &a.at {
        Some(text) => parse_instantiation(text)?,
        None => m.pbn.original(),
    };
    t.lap("parse");
    let p = oracle::infer_constraint(&m.pbn.instantiate(&u)?, &c)?;
    t.lap("infer");
    let mut out = Map::new();
    out.insert("constraint".into(), json!(c.render(m.pbn.dag())));
    out.insert("instantiation".into(), instantiation_json(&u));
    out.insert("probability".into(), num(p));
    out.insert("satisfied".into(), json!(c.holds(p)));
    Ok((out, 0))
}

fn run_compile(a: &CompileArgs, t: &mut Timer) -> Result<(Map<String, Value>, u8), Error> {
    let m = load(&a.model)?;
    t.lap("parse");
    let (pmc, targets) = match &a.constraint {
        Some(text) => {
            let c = parse_constraint(m.pbn.dag(), text)?;
            let (pmc, spec) = compile_tailored(&m.pbn, &m.order, &c)?;
            (pmc, spec.targets)
        }
        None => {
            let pmc = compile(&m.pbn, &m.order)?;
            (pmc, Vec::new())
        }
    };
    t.lap("compile");
    if let Some(path) = &a.emit_dot {
        write(path, &pmc.to_dot(&targets))?;
    }
    let dag = m.pbn.dag();
    let mut out = Map::new();
    out.insert("order".into(), json!(m.order.iter().map(|&v| dag.var(v).name.as_str()).collect::<Vec<_>>()));
    out.insert("states".into(), json!(pmc.num_states()));
    out.insert("transitions".into(), json!(pmc.num_transitions()));
    out.insert("parameters".into(), json!(pmc.param_names()));
    out.insert("targets".into(), json!(targets));
    Ok((out, 0))
}

fn run_verify(a: &VerifyArgs, t: &mut Timer) -> Result<(Map<String, Value>, u8), Error> {
    let m = load(&a.model)?;
    let (c, pmc, spec) = lifted(&m, &a.constraint)?;
    let region = region_arg(&m.pbn, a.region.as_deref())?;
    t.lap("compile");
    let opts = VerifyOptions { vi_tol: a.lift.vi_tol, margin: a.lift.margin };
    let check = RegionVerifier::new(&pmc, spec, opts).check(&region)?;
    t.lap("verify");
    let mut out = Map::new();
    out.insert("verdict".into(), json!(check.verdict.as_str()));
    out.insert("region".into(), region_json(&m.pbn.param_names(), &region));
    out.insert("min".into(), check.min.map_or(Value::Null, num));
    out.insert("max".into(), check.max.map_or(Value::Null, num));
    if a.lift.self_check > 0 {
        let sc = self_check(&m.pbn, &c, &[(&region, check.verdict)], a.lift.self_check, a.lift.seed)?;
        out.insert("self_check".into(), sc);
    }
    Ok((out, 0))
}

fn run_partition(a: &PartitionArgs, t: &mut Timer) -> Result<(Map<String, Value>, u8), Error> {
    let m = load(&a.model)?;
    let (c, pmc, spec) = lifted(&m, &a.constraint)?;
    let region = region_arg(&m.pbn, a.region.as_deref())?;
    t.lap("compile");
    let opts = VerifyOptions { vi_tol: a.lift.vi_tol, margin: a.lift.margin };
    let verifier = RegionVerifier::new(&pmc, spec, opts);
    let (result, complete) = match partition(&verifier, &region, a.eta, PartitionOptions { max_boxes: a.max_boxes }) {
        Ok(r) => (r, true),
        Err(Error::CoverageUnreachable(r)) => (*r, false),
        Err(e) => return Err(e),
    };
    t.lap("partition");
    let names = m.pbn.param_names();
    if let Some(path) = &a.emit_boxes {
        write(path, &result.to_csv(&names))?;
    }
    let mut out = Map::new();
    out.insert("status".into(), json!(if complete { "Complete" } else { "CoverageUnreachable" }));
    out.insert("region".into(), region_json(&names, &region));
    out.insert("coverage".into(), num(result.coverage));
    out.insert("verifications".into(), json!(result.verifications));
    out.insert("boxes".into(), boxes_json(&result));
    if a.lift.self_check > 0 {
        let boxes: Vec<(&Region, Verdict)> = result
            .accepting
            .iter()
            .map(|b| (b, Verdict::Accepting))
            .chain(result.rejecting.iter().map(|b| (b, Verdict::Rejecting)))
            .collect();
        out.insert("self_check".into(), self_check(&m.pbn, &c, &boxes, a.lift.self_check, a.lift.seed)?);
    }
    Ok((out, if complete { 0 } else { 3 }))
}

fn run_tune(a: &TuneArgs, t: &mut Timer) -> Result<(Map<String, Value>, u8), Error> {
    let m = load(&a.model)?;
    let c = parse_constraint(m.pbn.dag(), &a.constraint)?;
    t.lap("parse");
    if let Some(path) = &a.emit_dot {
        let (pmc, spec) = compile_tailored(&m.pbn, &m.order, &c)?;
        write(path, &pmc.to_dot(&spec.targets))?;
    }
    let h = Hyper {
        eta: a.eta,
        gamma: a.gamma,
        max_iters: a.max_iters,
        measure: a.distance,
        delta: m.delta,
        vi_tol: a.lift.vi_tol,
        margin: a.lift.margin,
        max_boxes: a.max_boxes,
    };
    let u0 = m.pbn.original();
    let r = tune(&m.pbn, &u0, &c, &h, Some(&m.order))?;
    t.lap("tune");
    let names = m.pbn.param_names();
    if let (Some(path), Some(p)) = (&a.emit_boxes, &r.last_partition) {
        write(path, &p.to_csv(&names))?;
    }
    let mut out = Map::new();
    out.insert("status".into(), json!(r.status.as_str()));
    out.insert("instantiation".into(), r.instantiation.as_ref().map_or(Value::Null, instantiation_json));
    out.insert(
        "distance".into(),
        r.distance.map_or(Value::Null, |d| {
            json!({ "measure": d.measure.to_string(), "value": num(d.value), "squared": num(d.squared) })
        }),
    );
    out.insert("probability".into(), r.probability.map_or(Value::Null, num));
    out.insert("epsilon_final".into(), r.epsilon_final.map_or(Value::Null, num));
    let iterations: Vec<Value> = r
        .iterations
        .iter()
        .map(|s| {
            json!({
                "epsilon": num(s.epsilon),
                "region": region_json(&names, &s.region),
                "verifications": s.verifications,
                "accepting": s.accepting,
                "rejecting": s.rejecting,
                "unknown": s.unknown,
                "coverage": num(s.coverage),
            })
        })
        .collect();
    out.insert("iterations".into(), Value::Array(iterations));
    out.insert("coverage".into(), num(r.coverage));
    out.insert(
        "boxes".into(),
        r.last_partition.as_ref().map_or(json!({ "accepting": 0, "rejecting": 0, "unknown": 0 }), boxes_json),
    );
    if a.lift.self_check > 0 {
        if let Some(p) = &r.last_partition {
            let boxes: Vec<(&Region, Verdict)> = p.accepting.iter().map(|b| (b, Verdict::Accepting)).collect();
            out.insert("self_check".into(), self_check(&m.pbn, &c, &boxes, a.lift.self_check, a.lift.seed)?);
        }
    }
    let code = match r.status {
        Status::Satisfied | Status::Tuned => 0,
        Status::Infeasible => 2,
        Status::Unknown => 3,
    };
    Ok((out, code))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut timer = Timer::start();
    let (result, out_path) = match &cli.command {
        Command::Infer(a) => (run_infer(a, &mut timer), &a.model.out),
        Command::Compile(a) => (run_compile(a, &mut timer), &a.model.out),
        Command::Verify(a) => (run_verify(a, &mut timer), &a.model.out),
        Command::Partition(a) => (run_partition(a, &mut timer), &a.model.out),
        Command::Tune(a) => (run_tune(a, &mut timer), &a.model.out),
    };
    match result {
        Ok((mut doc, code)) => {
            doc.insert("timings_ms".into(), timer.finish());
            let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable") + "\n";
            let written = match out_path {
                Some(path) => write(path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
