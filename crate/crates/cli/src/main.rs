//! `spinelab` command-line front end.
//!
//! Exit codes: 0 all checks pass, 1 a check fails or a computation fails,
//! 2 some result is inconclusive, 3 usage or configuration error.

mod output;
mod parse;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use spinelab::diffusion::{exit_time_estimate, measure_from_samples};
use spinelab::regularity::{default_probe, ito_mckean_test};
use spinelab::scenarios::{
    catalog, describe_scenarios, parse_scenarios, run_test, verdict_label, DomainConfig, Num,
    OperatorConfig, Outcome, Overrides, Scenario, ScenarioResult, Setup, TestKind,
};
use spinelab::{
    run_scenario, simulate_paths, Error, ExitSample, LambdaField, PotentialSpec, QuadConfig,
    Result, SimConfig, SpineProfile, Verdict,
};

use output::{envelope, pretty, Format, Sink, Table};

#[derive(Parser)]
#[command(
    name = "spinelab",
    version,
    about = "Boundary regularity near thin spines: potentials, tests, diffusion probes"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize)]
struct Global {
    /// Scenario document used instead of the built-in catalog.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write results into this directory instead of standard output.
    #[arg(long, global = true)]
    #[serde(skip)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; defaults to the number of cores. Output does not
    /// depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Potential, ω or PDE residual on an (x, r) grid.
    Eval(EvalArgs),
    /// Integral regularity test for the Laplacian at the spine tip.
    Classify(ClassifyArgs),
    /// Barrier hypotheses for a candidate w.
    Barrier(BarrierArgs),
    /// Irregularity witness for the scenario potential u and w = |x|^{-p}.
    Witness(WitnessArgs),
    /// Exit samples and estimates of the diffusion of the operator.
    Simulate(SimulateArgs),
    /// Scenario catalog.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Plot-ready CSV for named figures.
    Plotdata(PlotArgs),
}

/// Domain, operator and potential, from a scenario or from flags.
#[derive(Args, Serialize, Clone)]
struct SetupArgs {
    /// Take the setup from this scenario.
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario parameter override, NAME=VALUE.
    #[arg(long = "set", value_parser = parse::assignment)]
    set: Vec<(String, f64)>,
    /// Dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Spine profile: exp:EPS, power:ETA, logpower:ETA, iterlog:P, poweriterlog, dm3loglog.
    #[arg(long)]
    profile: Option<String>,
    /// Ball radius.
    #[arg(long)]
    c: Option<f64>,
    /// Remove the mirrored spine as well.
    #[arg(long)]
    symmetric: bool,
    /// laplacian, constant:LAMBDA or omega:SCALE.
    #[arg(long)]
    operator: Option<String>,
    /// lebesgue, t21_d3:EPS, t21_dge4:EPS,ALPHA, t23_d3, t23_dge4:GAMMA, l71:MU0,GAMMA, pilot:MU.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    setup: SetupArgs,
    /// x values: FROM:TO:COUNT or a list.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// r values: FROM:TO:COUNT or a list.
    #[arg(long)]
    r: String,
    #[arg(long, value_enum, default_value_t = Quantity::U)]
    quantity: Quantity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Quantity {
    U,
    Omega,
    Residual,
    All,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    /// Profile(s); several give a comparison table.
    #[arg(long, required = true)]
    profile: Vec<String>,
    /// Dimension(s).
    #[arg(long, required = true)]
    d: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
}

#[derive(Args, Serialize)]
struct BarrierArgs {
    #[command(flatten)]
    setup: SetupArgs,
    /// radial:A for |x'|^A or inverse:P for |x|^{-P}. Defaults to
    /// radial with A = 1 - λ(d-2) for a constant operator.
    #[arg(long)]
    w: Option<String>,
    /// Annuli as fractions of the ball radius.
    #[arg(long, default_value = "0.05:0.1,0.1:0.2,0.2:0.4")]
    annuli: String,
    /// Grid points per unit of log-radius and angle.
    #[arg(long, default_value_t = 8)]
    density: usize,
}

#[derive(Args, Serialize)]
struct WitnessArgs {
    #[command(flatten)]
    setup: SetupArgs,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Annuli as fractions of the ball radius.
    #[arg(long, default_value = "0.1:0.2,0.2:0.4")]
    annuli: String,
}

#[derive(Args, Serialize, Clone)]
struct SimArgs {
    /// Start point x1,...,xd; repeat for several.
    #[arg(long, required = true, allow_hyphen_values = true)]
    start: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    /// Halvings of the step near the boundary.
    #[arg(long, default_value_t = 10)]
    depth: u32,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    setup: SetupArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Boundary function for E g(X_τ): tent:RHO, const:V or potential.
    #[arg(long)]
    g: Option<String>,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Catalog entries with expectations and provenance.
    List,
    /// Run scenarios (all when none is named). Unknown flags --NAME VALUE
    /// override scenario parameters.
    Run(RunArgs),
}

#[derive(Args, Serialize)]
struct RunArgs {
    names: Vec<String>,
    /// Parameter override, NAME=VALUE.
    #[arg(long = "set", value_parser = parse::assignment)]
    set: Vec<(String, f64)>,
    /// Include long-running tests.
    #[arg(long)]
    heavy: bool,
    /// Path count for probe tests.
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Figure {
    PotentialAlongSpine,
    OmegaHeatmap,
    ExitHistogram,
}

#[derive(Args, Serialize)]
struct PlotArgs {
    #[arg(value_enum)]
    figure: Figure,
    #[command(flatten)]
    setup: SetupArgs,
    /// Spine figure: first and last x and the point count (geometric).
    #[arg(long, default_value = "0.1:1e-6:25")]
    spine: String,
    /// Heatmap x values.
    #[arg(long, default_value = "-0.5:0.5:41", allow_hyphen_values = true)]
    x: String,
    /// Heatmap r values.
    #[arg(long, default_value = "0.0125:0.5:40")]
    r: String,
    /// Histogram start point.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 10)]
    depth: u32,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Histogram of the exit point norm or the exit time.
    #[arg(long, value_enum, default_value_t = HistQuantity::Norm)]
    quantity: HistQuantity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum HistQuantity {
    Norm,
    Time,
}

/// Status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    /// Failures outrank inconclusive results.
    fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
            _ => Status::Pass,
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Hypothesis(_)
        | Error::Grid(_)
        | Error::StartOutsideDomain(_) => 3,
        Error::Inconclusive(_) | Error::ExcessCensoring { .. } => 2,
        _ => 1,
    }
}

struct Ctx<'a> {
    global: &'a Global,
    sink: Sink,
}

impl Ctx<'_> {
    fn format(&self, default: Format) -> Format {
        self.global.format.unwrap_or(default)
    }

    fn quad(&self) -> Result<QuadConfig> {
        let mut q = QuadConfig::default();
        if let Some(t) = self.global.tol {
            if !(t > 0.0) {
                return Err(Error::Config("--tol must be positive".into()));
            }
            q.rel_tol = t;
        }
        Ok(q)
    }

    fn overrides(&self, params: &[(String, f64)]) -> Overrides {
        Overrides {
            params: params.iter().cloned().collect(),
            seed: self.global.seed,
            tol: self.global.tol,
            ..Overrides::default()
        }
    }

    fn documents(&self) -> Result<Vec<Scenario>> {
        match &self.global.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
                parse_scenarios(&text)
            }
            None => catalog(),
        }
    }

    fn find(&self, name: &str) -> Result<Scenario> {
        self.documents()?
            .into_iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("no scenario named '{name}'")))
    }

    /// The scenario named by `--scenario`, or one assembled from flags.
    fn scenario(&self, a: &SetupArgs, need_domain: bool) -> Result<Scenario> {
        if let Some(name) = &a.scenario {
            if a.d.is_some()
                || a.profile.is_some()
                || a.c.is_some()
                || a.operator.is_some()
                || a.preset.is_some()
            {
                return Err(Error::Config(
                    "--scenario cannot be combined with --d, --profile, --c, --operator or --preset".into(),
                ));
            }
            return self.find(name);
        }
        if !a.set.is_empty() {
            return Err(Error::Config("--set needs --scenario".into()));
        }
        let profile = match (&a.profile, need_domain) {
            (Some(p), _) => parse::profile(p)?,
            (None, false) => parse::profile("power:2")?,
            (None, true) => return Err(Error::Config("give --scenario or --profile".into())),
        };
        Ok(Scenario {
            name: "command_line".into(),
            description: String::new(),
            d: a.d.unwrap_or(3),
            params: BTreeMap::new(),
            constraints: Vec::new(),
            domain: DomainConfig {
                c: Num::Lit(a.c.unwrap_or(0.5)),
                symmetric: a.symmetric,
                profile,
            },
            operator: match &a.operator {
                Some(o) => parse::operator(o)?,
                None => OperatorConfig::Laplacian,
            },
            potential: a.preset.as_deref().map(parse::preset).transpose()?,
            tests: Vec::new(),
        })
    }

    fn setup(&self, a: &SetupArgs, need_domain: bool) -> Result<Setup> {
        self.scenario(a, need_domain)?
            .setup(&self.overrides(&a.set))
    }

    fn potential(&self, a: &SetupArgs) -> Result<(Setup, PotentialSpec)> {
        let s = self.setup(a, false)?;
        let spec = s.spec.clone().ok_or_else(|| {
            Error::Config("this command needs a potential (--preset or a scenario with one)".into())
        })?;
        Ok((s, spec))
    }
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<Status> {
    let (_, spec) = ctx.potential(&a.setup)?;
    let q = ctx.quad()?;
    let xs = parse::grid(&a.x)?;
    let rs = parse::grid(&a.r)?;
    let mut cols = vec!["x", "r"];
    let (u, om, res) = match a.quantity {
        Quantity::U => (true, false, false),
        Quantity::Omega => (false, true, false),
        Quantity::Residual => (false, false, true),
        Quantity::All => (true, true, true),
    };
    if u {
        cols.extend(["u", "u_error"]);
    }
    if om {
        cols.push("omega");
    }
    if res {
        cols.extend(["residual", "residual_error"]);
    }
    let points: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| rs.iter().map(move |&r| (x, r)))
        .collect();
    let rows: Vec<Result<Vec<Value>>> = points
        .par_iter()
        .map(|&(x, r)| {
            let mut row = vec![json!(x), json!(r)];
            if u {
                let e = spec.eval_u(x, r, &q)?;
                row.extend([json!(e.value), json!(e.error)]);
            }
            if om {
                row.push(json!(spec.eval_omega(x, r, &q)?));
            }
            if res {
                let e = spec.pde_residual(x, r, &q)?;
                row.extend([json!(e.residual), json!(e.error)]);
            }
            Ok(row)
        })
        .collect();
    let mut t = Table::new(&cols);
    for r in rows {
        t.push(r?);
    }
    let config = json!({ "potential": spec.name(), "args": a, "global": ctx.global });
    write_table(ctx, "eval", &config, &t, Format::Csv)?;
    Ok(Status::Pass)
}

fn write_table(ctx: &Ctx, name: &str, config: &Value, t: &Table, default: Format) -> Result<()> {
    let f = ctx.format(default);
    let body = match f {
        Format::Csv => t.to_csv()?,
        Format::Md => t.to_markdown(),
        Format::Json => pretty(&envelope(name, config, t.to_json())),
    };
    ctx.sink.emit(&format!("{name}.{}", f.extension()), &body)
}

fn classify(ctx: &Ctx, a: &ClassifyArgs) -> Result<Status> {
    let q = ctx.quad()?;
    let mut cases = Vec::new();
    for p in &a.profile {
        for &d in &a.d {
            let cfg = parse::profile(p)?;
            let kind = cfg.resolve(d, &BTreeMap::new())?;
            cases.push((p.clone(), d, SpineProfile::new(kind, a.c)?));
        }
    }
    let verdicts: Vec<Result<_>> = cases
        .par_iter()
        .map(|(_, d, prof)| ito_mckean_test(prof, *d, &default_probe(prof.c), &q))
        .collect();
    let mut status = Status::Pass;
    let mut records = Vec::new();
    let mut t = Table::new(&[
        "profile",
        "d",
        "operator",
        "verdict",
        "probe_verdict",
        "closed_form",
        "fitted_model",
    ]);
    for ((p, d, prof), v) in cases.iter().zip(verdicts) {
        let v = v?;
        if v.verdict == Verdict::Inconclusive || !v.agrees_with_closed_form {
            status = status.combine(Status::Inconclusive);
        }
        t.push(vec![
            json!(prof.name()),
            json!(d),
            json!("Laplacian"),
            json!(verdict_label(v.verdict)),
            json!(verdict_label(v.probe_verdict)),
            json!(v.closed_form.as_ref().map(|c| verdict_label(c.verdict))),
            json!(v.fitted_model.as_ref().map(|m| m.description.clone())),
        ]);
        records.push(json!({ "profile": p, "profile_name": prof.name(), "d": d, "record": v }));
    }
    let f = ctx.format(Format::Json);
    let body = match f {
        Format::Json => pretty(&envelope(
            "classify",
            &json!({ "args": a, "global": ctx.global }),
            Value::Array(records),
        )),
        Format::Csv => t.to_csv()?,
        Format::Md => t.to_markdown(),
    };
    ctx.sink
        .emit(&format!("classify.{}", f.extension()), &body)?;
    Ok(status)
}

/// Runs one test kind against a setup and writes the report.
fn single_test(
    ctx: &Ctx,
    name: &str,
    setup: &Setup,
    kind: &TestKind,
    pass: &str,
    config: Value,
) -> Result<Status> {
    let (label, detail, status) = match run_test(kind, setup) {
        Ok((label, detail)) => {
            let status = if label == pass {
                Status::Pass
            } else {
                Status::Fail
            };
            (label, detail, status)
        }
        Err(Error::Inconclusive(m)) => (
            "inconclusive".to_string(),
            json!({ "message": m }),
            Status::Inconclusive,
        ),
        Err(e) => return Err(e),
    };
    let f = ctx.format(Format::Json);
    let body = match f {
        Format::Json => pretty(&envelope(
            name,
            &config,
            json!({ "outcome": label, "report": detail }),
        )),
        _ => {
            let mut t = Table::new(&["item", "value"]);
            t.push(vec![json!("outcome"), json!(label)]);
            if let Value::Object(m) = &detail {
                for (k, v) in m {
                    if !v.is_array() && !v.is_object() {
                        t.push(vec![json!(k), v.clone()]);
                    }
                }
            }
            if f == Format::Csv {
                t.to_csv()?
            } else {
                t.to_markdown()
            }
        }
    };
    ctx.sink.emit(&format!("{name}.{}", f.extension()), &body)?;
    Ok(status)
}

fn barrier(ctx: &Ctx, a: &BarrierArgs) -> Result<Status> {
    let setup = ctx.setup(&a.setup, true)?;
    let annuli = parse::annuli(&a.annuli)?;
    let w = match &a.w {
        Some(w) => w.clone(),
        None => match setup.field {
            LambdaField::Constant(l) => format!("radial:{}", 1.0 - l * (setup.d as f64 - 2.0)),
            _ => return Err(Error::Config("give --w for a non-constant operator".into())),
        },
    };
    let (kind, value) = w
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("cannot parse --w '{w}'")))?;
    let value: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse --w '{w}'")))?;
    let (test, pass) = match kind {
        "radial" => (
            TestKind::Barrier {
                exponent: Num::Lit(value),
                annuli,
                density: a.density,
            },
            "passes",
        ),
        "inverse" => {
            let c = setup.domain.c;
            (
                TestKind::Superharmonic {
                    p: Num::Lit(value),
                    annuli: annuli.iter().map(|(x, y)| (x * c, y * c)).collect(),
                    density: a.density,
                },
                "holds",
            )
        }
        _ => {
            return Err(Error::Config(format!(
                "--w must be radial:A or inverse:P, got '{w}'"
            )))
        }
    };
    let config =
        json!({ "w": w, "operator": setup.field.describe(), "args": a, "global": ctx.global });
    single_test(ctx, "barrier", &setup, &test, pass, config)
}

fn witness(ctx: &Ctx, a: &WitnessArgs) -> Result<Status> {
    let setup = ctx.setup(&a.setup, true)?;
    if setup.spec.is_none() {
        return Err(Error::Config(
            "the witness needs a potential (--preset or a scenario with one)".into(),
        ));
    }
    let test = TestKind::Witness {
        p: Num::Lit(a.p),
        annuli: parse::annuli(&a.annuli)?,
    };
    let config = json!({ "operator": setup.field.describe(), "args": a, "global": ctx.global });
    single_test(ctx, "witness", &setup, &test, "valid", config)
}

fn sim_config(ctx: &Ctx, paths: usize, step: f64, max_steps: u64, depth: u32) -> Result<SimConfig> {
    let cfg = SimConfig {
        step,
        max_steps,
        paths,
        seed: ctx.global.seed,
        refinement_depth: depth,
        ..SimConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

type BoundaryFn = Box<dyn Fn(&[f64]) -> f64 + Sync>;

fn boundary_fn(spec: &str, setup: &Setup, q: QuadConfig) -> Result<BoundaryFn> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let num = || {
        rest.parse::<f64>()
            .map_err(|_| Error::Config(format!("cannot parse --g '{spec}'")))
    };
    Ok(match kind {
        "tent" => {
            let rho = num()?;
            Box::new(move |x: &[f64]| {
                (1.0 - x.iter().map(|v| v * v).sum::<f64>().sqrt() / rho).max(0.0)
            })
        }
        "const" => {
            let v = num()?;
            Box::new(move |_: &[f64]| v)
        }
        "potential" => {
            let s = setup
                .spec
                .clone()
                .ok_or_else(|| Error::Config("--g potential needs a potential".into()))?;
            Box::new(move |x: &[f64]| {
                let r = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                s.eval_u(x[0], r, &q).map(|e| e.value).unwrap_or(f64::NAN)
            })
        }
        _ => {
            return Err(Error::Config(format!(
                "--g must be tent:RHO, const:V or potential, got '{spec}'"
            )))
        }
    })
}

fn class_name(s: &ExitSample) -> String {
    format!("{:?}", s.boundary_class).to_lowercase()
}

fn estimate_json(r: Result<spinelab::MeasureEstimate>, status: &mut Status) -> Result<Value> {
    match r {
        Ok(e) => Ok(json!(e)),
        Err(e @ Error::ExcessCensoring { .. }) => {
            *status = status.combine(Status::Inconclusive);
            Ok(json!({ "error": e.to_string() }))
        }
        Err(e) => Err(e),
    }
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Status> {
    let setup = ctx.setup(&a.setup, true)?;
    let cfg = sim_config(ctx, a.sim.paths, a.sim.step, a.sim.max_steps, a.sim.depth)?;
    let g =
        a.g.as_deref()
            .map(|s| boundary_fn(s, &setup, setup.q))
            .transpose()?;
    let starts: Vec<Vec<f64>> = a
        .sim
        .start
        .iter()
        .map(|s| parse::point(s))
        .collect::<Result<_>>()?;
    let d = setup.d;
    let mut cols: Vec<String> = vec!["start".into(), "path".into()];
    cols.extend((1..=d).map(|i| format!("x{i}")));
    cols.extend(["exit_time", "censored", "class", "steps"].map(String::from));
    let mut samples = Table {
        columns: cols,
        rows: Vec::new(),
    };
    let mut status = Status::Pass;
    let mut estimates = Vec::new();
    for (k, start) in starts.iter().enumerate() {
        if start.len() != d {
            return Err(Error::Config(format!(
                "start {k} has {} coordinates, the dimension is {d}",
                start.len()
            )));
        }
        let s = simulate_paths(&setup.domain, &setup.field, start, &cfg)?;
        for (i, e) in s.iter().enumerate() {
            let mut row = vec![json!(k), json!(i)];
            row.extend(e.exit_point.iter().map(|v| json!(v)));
            row.extend([
                json!(e.exit_time),
                json!(e.censored),
                json!(class_name(e)),
                json!(e.steps),
            ]);
            samples.rows.push(row);
        }
        let mut classes = BTreeMap::new();
        for e in &s {
            *classes.entry(class_name(e)).or_insert(0usize) += 1;
        }
        let time = estimate_json(exit_time_estimate(&s), &mut status)?;
        let measure = match &g {
            Some(g) => estimate_json(measure_from_samples(&s, g), &mut status)?,
            None => Value::Null,
        };
        estimates.push(json!({
            "start": start,
            "exit_time": time,
            "measure": measure,
            "exit_classes": classes,
        }));
    }
    let config = json!({
        "domain": setup.domain,
        "operator": setup.field.describe(),
        "sim": cfg,
        "g": a.g,
        "args": a,
        "global": ctx.global,
    });
    let est = pretty(&envelope(
        "simulate",
        &config,
        Value::Array(estimates.clone()),
    ));
    if ctx.sink.out_dir.is_some() {
        ctx.sink.emit("samples.csv", &samples.to_csv()?)?;
        ctx.sink.emit("estimate.json", &est)?;
        return Ok(status);
    }
    match ctx.format(Format::Json) {
        Format::Json => ctx.sink.emit("", &est)?,
        Format::Csv => ctx.sink.emit("", &samples.to_csv()?)?,
        Format::Md => {
            let mut t = Table::new(&[
                "start",
                "mean_exit_time",
                "half_width_95",
                "measure",
                "measure_half_width_95",
            ]);
            for e in &estimates {
                t.push(vec![
                    json!(format!("{}", e["start"])),
                    e["exit_time"]["mean"].clone(),
                    e["exit_time"]["half_width_95"].clone(),
                    e["measure"]["mean"].clone(),
                    e["measure"]["half_width_95"].clone(),
                ]);
            }
            ctx.sink.emit("", &t.to_markdown())?
        }
    }
    Ok(status)
}

fn outcome_status(r: &ScenarioResult) -> Status {
    r.results.iter().fold(Status::Pass, |s, t| {
        s.combine(match t.outcome {
            Outcome::Pass | Outcome::Skipped => Status::Pass,
            Outcome::Inconclusive => Status::Inconclusive,
            Outcome::Fail | Outcome::Error => Status::Fail,
        })
    })
}

fn scenario_list(ctx: &Ctx) -> Result<Status> {
    let entries = describe_scenarios(ctx.documents()?);
    let mut t = Table::new(&[
        "scenario",
        "d",
        "params",
        "test",
        "expect",
        "provenance",
        "heavy",
        "claim",
    ]);
    for e in &entries {
        let params: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        for test in &e.tests {
            t.push(vec![
                json!(e.name),
                json!(e.d),
                json!(params.join(" ")),
                json!(test.test),
                json!(test.expect),
                json!(format!("{:?}", test.provenance).to_lowercase()),
                json!(test.heavy),
                json!(test.claim),
            ]);
        }
    }
    let f = ctx.format(Format::Md);
    let body = match f {
        Format::Json => pretty(&envelope(
            "scenario_list",
            &json!({ "global": ctx.global }),
            json!(entries),
        )),
        Format::Csv => t.to_csv()?,
        Format::Md => t.to_markdown(),
    };
    ctx.sink
        .emit(&format!("scenarios.{}", f.extension()), &body)?;
    Ok(Status::Pass)
}

fn scenario_run(ctx: &Ctx, a: &RunArgs) -> Result<Status> {
    let docs = ctx.documents()?;
    let chosen: Vec<Scenario> = if a.names.is_empty() {
        docs
    } else {
        a.names
            .iter()
            .map(|n| {
                docs.iter()
                    .find(|s| &s.name == n)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("no scenario named '{n}'")))
            })
            .collect::<Result<_>>()?
    };
    let ov = Overrides {
        include_heavy: a.heavy,
        paths: a.paths,
        ..ctx.overrides(&a.set)
    };
    // Overrides apply to the scenarios that have the parameter.
    let runs: Vec<Result<ScenarioResult>> = chosen
        .par_iter()
        .map(|s| {
            let mut ov = ov.clone();
            if a.names.is_empty() {
                ov.params.retain(|k, _| s.params.contains_key(k));
            }
            run_scenario(s, &ov)
        })
        .collect();
    let results: Vec<ScenarioResult> = runs.into_iter().collect::<Result<_>>()?;
    let status = results
        .iter()
        .fold(Status::Pass, |s, r| s.combine(outcome_status(r)));
    let f = ctx.format(Format::Md);
    let body = match f {
        Format::Json => pretty(&envelope(
            "scenario_run",
            &json!({ "args": a, "global": ctx.global }),
            json!(results),
        )),
        Format::Md => {
            let mut s = String::new();
            for r in &results {
                s.push_str(&r.to_markdown());
                s.push('\n');
            }
            s
        }
        Format::Csv => {
            let mut t = Table::new(&[
                "scenario",
                "test",
                "expected",
                "observed",
                "outcome",
                "provenance",
            ]);
            for r in &results {
                for x in &r.results {
                    t.push(vec![
                        json!(r.scenario),
                        json!(x.test),
                        json!(x.expected),
                        json!(x.observed),
                        json!(format!("{:?}", x.outcome).to_lowercase()),
                        json!(format!("{:?}", x.provenance).to_lowercase()),
                    ]);
                }
            }
            t.to_csv()?
        }
    };
    ctx.sink
        .emit(&format!("scenario_run.{}", f.extension()), &body)?;
    Ok(status)
}

fn geometric(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || {
        Error::Config(format!(
            "expected FROM:TO:COUNT with positive ends, got '{spec}'"
        ))
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(a > 0.0 && b > 0.0) || n < 2 {
        return Err(bad());
    }
    Ok((0..n)
        .map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64))
        .collect())
}

fn plotdata(ctx: &Ctx, a: &PlotArgs) -> Result<Status> {
    let q = ctx.quad()?;
    let mut config = json!({ "args": a, "global": ctx.global });
    let (name, table) = match a.figure {
        Figure::PotentialAlongSpine => {
            let setup = ctx.setup(&a.setup, true)?;
            let spec = setup
                .spec
                .clone()
                .ok_or_else(|| Error::Config("this figure needs a potential".into()))?;
            let xs = geometric(&a.spine)?;
            let rows: Vec<Result<Vec<Value>>> = xs
                .par_iter()
                .map(|&x| {
                    let r = setup.domain.profile.eval(x)?;
                    // r(x) can underflow to 0, where u is not defined.
                    let on_spine = if r > 0.0 {
                        Some(spec.eval_u(x, r, &q)?.value)
                    } else {
                        None
                    };
                    let on_axis = spec.eval_u(0.0, x, &q)?;
                    Ok(vec![
                        json!(x),
                        json!(r),
                        json!(on_spine),
                        json!(on_axis.value),
                    ])
                })
                .collect();
            let mut t = Table::new(&["x", "r", "u_spine", "u_transverse"]);
            for r in rows {
                t.push(r?);
            }
            config["potential"] = json!(spec.name());
            ("potential_along_spine", t)
        }
        Figure::OmegaHeatmap => {
            let (_, spec) = ctx.potential(&a.setup)?;
            let xs = parse::grid(&a.x)?;
            let rs = parse::grid(&a.r)?;
            let points: Vec<(f64, f64)> = xs
                .iter()
                .flat_map(|&x| rs.iter().map(move |&r| (x, r)))
                .collect();
            let rows: Vec<Result<Vec<Value>>> = points
                .par_iter()
                .map(|&(x, r)| Ok(vec![json!(x), json!(r), json!(spec.eval_omega(x, r, &q)?)]))
                .collect();
            let mut t = Table::new(&["x", "r", "omega"]);
            for r in rows {
                t.push(r?);
            }
            config["potential"] = json!(spec.name());
            ("omega_heatmap", t)
        }
        Figure::ExitHistogram => {
            let setup = ctx.setup(&a.setup, true)?;
            let start = match &a.start {
                Some(s) => parse::point(s)?,
                None => return Err(Error::Config("exit-histogram needs --start".into())),
            };
            if a.bins == 0 {
                return Err(Error::Config("--bins must be positive".into()));
            }
            let cfg = sim_config(
                ctx,
                a.paths,
                a.step,
                SimConfig::default().max_steps,
                a.depth,
            )?;
            let s = simulate_paths(&setup.domain, &setup.field, &start, &cfg)?;
            let values: Vec<f64> = s
                .iter()
                .filter(|e| !e.censored)
                .map(|e| match a.quantity {
                    HistQuantity::Norm => e.exit_point.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    HistQuantity::Time => e.exit_time,
                })
                .collect();
            let hi = match a.quantity {
                HistQuantity::Norm => setup.domain.c,
                HistQuantity::Time => values.iter().copied().fold(0.0, f64::max),
            };
            let width = if hi > 0.0 { hi / a.bins as f64 } else { 1.0 };
            let mut counts = vec![0usize; a.bins];
            for v in &values {
                let k = ((v / width) as usize).min(a.bins - 1);
                counts[k] += 1;
            }
            let mut t = Table::new(&["bin_low", "bin_high", "count", "fraction"]);
            for (k, c) in counts.iter().enumerate() {
                t.push(vec![
                    json!(k as f64 * width),
                    json!((k + 1) as f64 * width),
                    json!(c),
                    json!(*c as f64 / s.len() as f64),
                ]);
            }
            config["censored"] = json!(s.len() - values.len());
            config["sim"] = json!(cfg);
            ("exit_histogram", t)
        }
    };
    write_table(ctx, name, &config, &table, Format::Csv)?;
    Ok(Status::Pass)
}

/// Rewrites `scenario run ... --eps 0.5` into `--set eps=0.5` for flags
/// that are not options of the command.
fn rewrite_param_flags(args: Vec<String>) -> Vec<String> {
    let Some(pos) = args
        .windows(2)
        .position(|w| w[0] == "scenario" && w[1] == "run")
    else {
        return args;
    };
    let cmd = Cli::command();
    let mut known: Vec<String> = cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(String::from))
        .collect();
    if let Some(run) = cmd
        .find_subcommand("scenario")
        .and_then(|s| s.find_subcommand("run"))
    {
        known.extend(
            run.get_arguments()
                .filter_map(|a| a.get_long().map(String::from)),
        );
    }
    known.extend(["help".to_string(), "version".to_string()]);
    let mut out: Vec<String> = args[..pos + 2].to_vec();
    let mut it = args[pos + 2..].iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--").filter(|f| !f.is_empty()) else {
            out.push(a.clone());
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        if known.iter().any(|k| k == name) {
            out.push(a.clone());
            continue;
        }
        match inline.or_else(|| it.next().cloned()) {
            Some(v) => {
                out.push("--set".into());
                out.push(format!("{name}={v}"));
            }
            None => out.push(a.clone()),
        }
    }
    out
}

fn run(cli: &Cli) -> Result<Status> {
    let ctx = Ctx {
        global: &cli.global,
        sink: Sink {
            out_dir: cli.global.out_dir.clone(),
        },
    };
    match &cli.command {
        Command::Eval(a) => eval(&ctx, a),
        Command::Classify(a) => classify(&ctx, a),
        Command::Barrier(a) => barrier(&ctx, a),
        Command::Witness(a) => witness(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Scenario(ScenarioCommand::List) => scenario_list(&ctx),
        Command::Scenario(ScenarioCommand::Run(a)) => scenario_run(&ctx, a),
        Command::Plotdata(a) => plotdata(&ctx, a),
    }
}

fn main() -> ExitCode {
    let args = rewrite_param_flags(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0
            || rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .is_err()
        {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(3);
        }
    }
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parameter_flags_become_overrides() {
        let out = rewrite_param_flags(strings(&[
            "spinelab",
            "scenario",
            "run",
            "thm_2_1_d3",
            "--eps",
            "0.5",
            "--heavy",
            "--eta=3",
        ]));
        assert_eq!(
            out,
            strings(&[
                "spinelab",
                "scenario",
                "run",
                "thm_2_1_d3",
                "--set",
                "eps=0.5",
                "--heavy",
                "--set",
                "eta=3"
            ])
        );
        let other = strings(&["spinelab", "eval", "--preset", "lebesgue"]);
        assert_eq!(rewrite_param_flags(other.clone()), other);
    }

    #[test]
    fn status_order() {
        assert_eq!(
            Status::Pass.combine(Status::Inconclusive),
            Status::Inconclusive
        );
        assert_eq!(Status::Inconclusive.combine(Status::Fail), Status::Fail);
        assert_eq!(Status::Fail.code(), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
