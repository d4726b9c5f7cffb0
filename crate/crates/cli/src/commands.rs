use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use mginf::busy_cycle::{BusyCycleLaw, RenewalMode};
use mginf::busy_period::MomentTable;
use mginf::simulator::{
    dkw_bound, mean_and_se, run_busy_cycles, run_renewal_counts, write_renewal_csv,
    write_samples, EmpiricalCdf, SimConfig, StartMode,
};
use mginf::validation::{self, Budget};
use mginf::{BetaSpec, MomentMethod, QueueParams, ServiceLaw, Tolerance};

use crate::curves::{evaluate, Method, Target};
use crate::params::ParamArgs;
use crate::table::{emit_json, Cell, Format, OutputArgs, Table};
use crate::{Usage, EXIT_VALIDATION};

type Outcome = anyhow::Result<u8>;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    target: Target,
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 101)]
    steps: usize,
    /// Default: closed for constant β, general otherwise.
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn eval(a: EvalArgs) -> Outcome {
    let law = a.params.law()?;
    let curve = evaluate(&law, a.target, a.method, a.t_max, a.steps)?;
    let mut table = Table::new(
        std::iter::once("t".to_string()).chain(curve.columns.iter().map(|c| c.0.clone())),
    );
    for (k, &t) in curve.times.iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        row.extend(curve.columns.iter().map(|c| Cell::Num(c.1[k])));
        table.push(row);
    }
    if let Some(sup) = curve.sup_abs_diff {
        table.footer.push(("sup_abs_diff".into(), sup.into()));
    }
    table.emit(&a.output)?;
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "T")]
    Service,
    #[value(name = "B")]
    BusyPeriod,
    #[value(name = "Z")]
    BusyCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentRoute {
    Quadrature,
    Series,
    Discretized,
    Recursion,
    Closed,
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    #[arg(long, value_enum, default_value_t = Which::Service)]
    which: Which,
    /// T: quadrature, series or discretized; B and Z: recursion or closed.
    #[arg(long, value_enum)]
    method: Option<MomentRoute>,
    /// Lattice refinement for the discretized route.
    #[arg(long, default_value_t = 2048)]
    m: usize,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn moments(a: MomentsArgs) -> Outcome {
    if a.n_max < 1 {
        return Err(Usage("--n-max must be at least 1".into()).into());
    }
    let law = a.params.law()?;
    let mut table = Table::new([
        "n",
        "value",
        "method",
        "truncation_required",
        "truncation_used",
        "lower_bound",
        "upper_bound",
        "monotone_refinement",
    ]);
    match a.which {
        Which::Service => {
            let method = match a.method.unwrap_or(MomentRoute::Quadrature) {
                MomentRoute::Quadrature => MomentMethod::Quadrature,
                MomentRoute::Series => {
                    if law.rho() >= std::f64::consts::LN_2 {
                        return Err(Usage(format!(
                            "the series route needs rho < ln 2 (geometric expansion in 1 - e^rho); got rho = {}",
                            law.rho()
                        ))
                        .into());
                    }
                    MomentMethod::Series
                }
                MomentRoute::Discretized => MomentMethod::Discretized { m: a.m },
                other => {
                    return Err(Usage(format!("method {other:?} applies to B and Z, not T")).into())
                }
            };
            let with_bounds = law.is_constant() && !law.is_degenerate();
            for n in 1..=a.n_max as u32 {
                let est = law.moment(n, method)?;
                let (lo, hi) = if with_bounds {
                    let (l, h) = law.moment_bounds(n)?;
                    (Cell::Num(l), Cell::Num(h))
                } else {
                    (Cell::Empty, Cell::Empty)
                };
                let (req, used) = est
                    .truncation
                    .map_or((Cell::Empty, Cell::Empty), |t| (t.required.into(), t.used.into()));
                table.push(vec![
                    (n as usize).into(),
                    est.value.into(),
                    route_name(method).into(),
                    req,
                    used,
                    lo,
                    hi,
                    est.monotone_refinement.map_or(Cell::Empty, Cell::Bool),
                ]);
            }
        }
        Which::BusyPeriod | Which::BusyCycle => {
            let route = a.method.unwrap_or(MomentRoute::Recursion);
            let bc = BusyCycleLaw::new(law);
            let busy = match route {
                MomentRoute::Recursion => bc.busy_period().moments(a.n_max, &Tolerance::default())?,
                MomentRoute::Closed => MomentTable {
                    n_max: a.n_max,
                    values: bc.busy_period().moments_closed(a.n_max)?,
                    c_values: Vec::new(),
                },
                other => {
                    return Err(Usage(format!("method {other:?} applies to T, not B or Z")).into())
                }
            };
            let values = if a.which == Which::BusyPeriod {
                busy.values.clone()
            } else {
                bc.moments_from(&busy)
            };
            let name = if route == MomentRoute::Closed { "closed" } else { "recursion" };
            for (k, v) in values.into_iter().enumerate() {
                let mut row = vec![(k + 1).into(), v.into(), name.into()];
                row.resize(8, Cell::Empty);
                table.push(row);
            }
        }
    }
    table.emit(&a.output)?;
    Ok(0)
}

fn route_name(m: MomentMethod) -> String {
    match m {
        MomentMethod::Quadrature => "quadrature".into(),
        MomentMethod::Series => "series".into(),
        MomentMethod::Discretized { m } => format!("discretized(m={m})"),
    }
}

#[derive(Args, Debug)]
pub struct PeaksArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn peaks(a: PeaksArgs) -> Outcome {
    let law = a.params.law()?;
    let bc = BusyCycleLaw::new(law);
    let busy = bc.busy_period().peaks()?;
    let cycle = bc.peaks_from(&busy);
    let mut table = Table::new(["quantity", "value"]);
    for (name, value) in [
        ("pi", Some(busy.pi)),
        ("qi", Some(busy.qi)),
        ("pi_numeric", Some(busy.pi_numeric)),
        ("pi_formula", busy.pi_formula),
        ("qi_printed_variant", busy.qi_printed_variant),
        ("pi_cycle", Some(cycle.pi)),
        ("qi_cycle", Some(cycle.qi)),
        ("pi_cycle_formula", cycle.pi_formula),
    ] {
        table.push(vec![name.into(), value.into()]);
    }
    table.emit(&a.output)?;
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    Empty,
    Arrival,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, env = "MGINF_SEED", default_value_t = 42)]
    seed: u64,
    /// Busy cycles to collect.
    #[arg(long, default_value_t = 200_000)]
    n_cycles: usize,
    /// Replications for the renewal counts.
    #[arg(long, default_value_t = 200)]
    replications: usize,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Renewal count grid points on [0, horizon], endpoints included.
    #[arg(long, default_value_t = 11)]
    renewal_steps: usize,
    /// Initial state for the busy-cycle run; renewal counting always starts with an arrival.
    #[arg(long, value_enum, default_value_t = StartArg::Empty)]
    start_mode: StartArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Directory for the sample dumps, renewal counts and summary.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs) -> Outcome {
    let law = a.params.law()?;
    let times = crate::curves::time_grid(a.horizon, a.renewal_steps)?;
    let mut cfg = SimConfig::new(law.clone(), a.seed);
    cfg.n_cycles = a.n_cycles;
    cfg.n_replications = a.replications;
    cfg.renewal_horizon = a.horizon;
    cfg.renewal_times = times.clone();
    cfg.start_mode = match a.start_mode {
        StartArg::Empty => StartMode::EmptyAtZero,
        StartArg::Arrival => StartMode::ArrivalAtZero,
    };
    cfg.validate().map_err(|e| Usage(e.to_string()))?;
    let cycles = run_busy_cycles(&cfg)?;
    cfg.start_mode = StartMode::ArrivalAtZero;
    let counts = run_renewal_counts(&cfg)?;

    let bc = BusyCycleLaw::new(law.clone());
    let n = cycles.busy_samples.len();
    let (mean_b, se_b) = mean_and_se(&cycles.busy_samples);
    let (mean_z, se_z) = mean_and_se(&cycles.cycle_samples);
    let atom = cycles.busy_samples.iter().filter(|&&b| b == 0.0).count() as f64 / n as f64;
    let expected_b = if law.is_degenerate() { 0.0 } else { law.rho().exp_m1() / law.lambda() };
    let (ks_b, ks_z) = if law.is_constant() {
        (
            Some(EmpiricalCdf::new(&cycles.busy_samples)?
                .ks_distance(|t| bc.busy_period().cdf_closed(t).unwrap_or(f64::NAN))),
            Some(EmpiricalCdf::new(&cycles.cycle_samples)?
                .ks_distance(|t| bc.cdf_closed(t).unwrap_or(f64::NAN))),
        )
    } else {
        (None, None)
    };
    let reference = if law.is_constant() {
        None
    } else {
        Some(bc.renewal(a.horizon, 0.05_f64.min(a.horizon / 10.0), RenewalMode::Numeric)?.grid)
    };
    let mut renewal = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let xs: Vec<f64> = counts.renewal_counts.iter().map(|c| c[j] as f64).collect();
        let (mean, se) = mean_and_se(&xs);
        let expected = match &reference {
            Some(g) => g.eval(t),
            None => bc.renewal_closed(t)?,
        };
        renewal.push((t, mean, se, expected));
    }

    let mut summary = json!({
        "seed": a.seed,
        "n_cycles": n,
        "start_mode": a.start_mode.to_possible_value().map(|v| v.get_name().to_string()),
        "empirical_mean_B": mean_b,
        "se_mean_B": se_b,
        "expected_mean_B": expected_b,
        "atom_fraction_B": atom,
        "expected_atom_B": law.atom(),
        "empirical_mean_Z": mean_z,
        "se_mean_Z": se_z,
        "expected_mean_Z": 1.0 / law.lambda() + expected_b,
        "ks_B": ks_b,
        "ks_Z": ks_z,
        "dkw_bound_99": dkw_bound(n, 0.01),
        "replications": a.replications,
        "renewal": renewal
            .iter()
            .map(|&(t, mean, se, expected)| json!({"t": t, "mean": mean, "se": se, "expected": expected}))
            .collect::<Vec<_>>(),
    });

    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let file = |name: &str| fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        write_samples(file("busy_periods.txt")?, &cycles.busy_samples)?;
        write_samples(file("busy_cycles.txt")?, &cycles.cycle_samples)?;
        write_renewal_csv(file("renewal_counts.csv")?, &counts)?;
        summary["files"] = json!(["busy_periods.txt", "busy_cycles.txt", "renewal_counts.csv", "summary.json"]);
        emit_json(&summary, Some(&dir.join("summary.json")))?;
    }
    match a.format {
        Format::Json => emit_json(&summary, None)?,
        Format::Csv => summary_table(&summary, &renewal).emit(&OutputArgs { format: Format::Csv, out: None })?,
    }
    Ok(0)
}

fn summary_table(summary: &Value, renewal: &[(f64, f64, f64, f64)]) -> Table {
    let mut table = Table::new(["quantity", "t", "value"]);
    if let Value::Object(map) = summary {
        for (k, v) in map {
            let cell = match v {
                Value::Number(x) if x.is_u64() => Cell::Int(x.as_u64().unwrap()),
                Value::Number(x) => Cell::Num(x.as_f64().unwrap()),
                Value::String(s) => Cell::Text(s.clone()),
                Value::Null => Cell::Empty,
                _ => continue,
            };
            table.push(vec![k.as_str().into(), Cell::Empty, cell]);
        }
    }
    for &(t, mean, se, expected) in renewal {
        table.push(vec!["renewal_mean".into(), t.into(), mean.into()]);
        table.push(vec!["renewal_se".into(), t.into(), se.into()]);
        table.push(vec!["renewal_expected".into(), t.into(), expected.into()]);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BudgetArg {
    Quick,
    Full,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value_t = BudgetArg::Quick)]
    budget: BudgetArg,
    #[arg(long, env = "MGINF_SEED", default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn validate(a: ValidateArgs) -> Outcome {
    let params = a.params.params()?;
    let budget = match a.budget {
        BudgetArg::Quick => Budget::Quick,
        BudgetArg::Full => Budget::Full,
    };
    let report = validation::validate(&params, budget, a.seed)?;
    match a.output.format {
        Format::Json => emit_json(&serde_json::to_value(&report)?, a.output.out.as_deref())?,
        Format::Csv => {
            let mut table = Table::new([
                "name", "kind", "criterion", "lhs", "rhs", "tolerance", "pass", "detail",
            ]);
            for c in &report.checks {
                table.push(vec![
                    c.name.as_str().into(),
                    serde_label(&c.kind).into(),
                    serde_label(&c.criterion).into(),
                    c.lhs.into(),
                    c.rhs.into(),
                    c.tolerance.into(),
                    c.pass.into(),
                    c.detail.as_str().into(),
                ]);
            }
            for f in &report.paper_flags {
                table.push(vec![
                    f.equation.as_str().into(),
                    "paper-flag".into(),
                    Cell::Empty,
                    f.printed_value.into(),
                    f.computed_value.into(),
                    Cell::Empty,
                    Cell::Empty,
                    f.note.as_str().into(),
                ]);
            }
            table.footer.push(("seed".into(), Cell::Int(report.seed_echo)));
            table.footer.push(("pass".into(), report.pass.into()));
            table.emit(&a.output)?;
        }
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    eprintln!(
        "validate: {} checks, {} failed{}",
        report.checks.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(": {}", failed.join(", ")) }
    );
    Ok(if report.pass { 0 } else { EXIT_VALIDATION })
}

fn serde_label<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepTarget {
    #[value(name = "G")]
    ServiceCdf,
    #[value(name = "g")]
    ServicePdf,
    #[value(name = "B")]
    BusyPeriod,
    #[value(name = "Z")]
    BusyCycle,
    #[value(name = "R")]
    Renewal,
    #[value(name = "bounds")]
    Bounds,
    /// Scalar peaks and means; no time grid.
    #[value(name = "peaks")]
    Peaks,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("drift").required(true).args(["beta", "eta"]))]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "eta")]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SweepTarget::BusyPeriod)]
    target: SweepTarget,
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, default_value_t = 11)]
    steps: usize,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Write to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub fn sweep(a: SweepArgs) -> Outcome {
    let mut sets: Vec<QueueParams> = Vec::new();
    for &lambda in &a.lambda {
        for &rho in &a.rho {
            if a.eta.is_empty() {
                let ps = if a.p.is_empty() { vec![0.0] } else { a.p.clone() };
                for &p in &ps {
                    for &beta in &a.beta {
                        sets.push(QueueParams::new(lambda, rho, p, BetaSpec::Constant(beta)));
                    }
                }
            } else {
                for &eta in &a.eta {
                    sets.push(QueueParams::with_eta(lambda, rho, eta));
                }
            }
        }
    }

    let mut table = Table::new(["lambda", "rho", "p", "beta", "eta", "quantity", "method", "t", "value"]);
    let mut skipped = 0;
    for params in sets {
        let law = match ServiceLaw::new(params.clone()) {
            Ok(law) => law,
            Err(e @ (mginf::Error::Constraint { .. } | mginf::Error::InvalidParameter(_))) => {
                eprintln!("sweep: skipping {params:?}: {e}");
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let BetaSpec::Constant(beta) = params.beta else { unreachable!() };
        let eta = law.eta().expect("constant drift");
        let head = || -> Vec<Cell> {
            vec![params.lambda.into(), params.rho.into(), params.p.into(), beta.into(), eta.into()]
        };
        let target = match a.target {
            SweepTarget::Peaks => {
                let bc = BusyCycleLaw::new(law.clone());
                let busy = bc.busy_period().peaks()?;
                let cycle = bc.peaks_from(&busy);
                for (name, v) in [
                    ("pi", busy.pi),
                    ("qi", busy.qi),
                    ("pi_cycle", cycle.pi),
                    ("qi_cycle", cycle.qi),
                    ("atom", law.atom()),
                ] {
                    let mut row = head();
                    row.extend([name.into(), "closed".into(), Cell::Empty, v.into()]);
                    table.push(row);
                }
                continue;
            }
            SweepTarget::ServiceCdf => Target::ServiceCdf,
            SweepTarget::ServicePdf => Target::ServicePdf,
            SweepTarget::BusyPeriod => Target::BusyPeriod,
            SweepTarget::BusyCycle => Target::BusyCycle,
            SweepTarget::Renewal => Target::Renewal,
            SweepTarget::Bounds => Target::Bounds,
        };
        let curve = evaluate(&law, target, a.method, a.t_max, a.steps)?;
        let method_of = |col: &str| -> String {
            match (target, a.method) {
                (Target::Bounds, _) => String::new(),
                (_, Some(Method::Both)) => col.to_string(),
                (_, Some(Method::General)) => "general".into(),
                _ => "closed".into(),
            }
        };
        for (k, &t) in curve.times.iter().enumerate() {
            for (name, values) in &curve.columns {
                let quantity = if target == Target::Bounds { name.as_str() } else { target.label() };
                let mut row = head();
                row.extend([quantity.into(), method_of(name).into(), t.into(), values[k].into()]);
                table.push(row);
            }
        }
    }
    if table.rows.is_empty() {
        return Err(Usage(format!("no parameter set in the grid is admissible ({skipped} skipped)")).into());
    }
    table.emit(&OutputArgs { format: Format::Csv, out: a.out })?;
    Ok(0)
}
