use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use bootperc::engine::{
    martingale_series, write_trace_csv, Classification, EdgeSource, SeedSpec, TraceOptions,
};
use bootperc::fmt::sig12;
use bootperc::graph::{largest_component, sample_gnp_with, ExplicitGraph};
use bootperc::montecarlo::{
    classify, curve, sweep, write_curve_csv, CurveRow, ExperimentConfig, Mode, SeedSize, TrialClass,
};
use bootperc::rng::seeded_rng;
use bootperc::stages::{run_with_stages, StageReport};
use bootperc::thresholds::{
    chernoff_lower, chernoff_upper, critical_pair, martingale_tail_bound, rho_fixed_point, t_zero,
    theorem_subcritical_bound, theorem_supercritical_bound, BoundInputs, CriticalValues,
    ProcessParams,
};
use serde::Serialize;

use crate::cli::{
    BoundsArgs, Cli, Command, Format, GiantArgs, ModeArg, ParamArgs, RunArgs, SweepArgs,
};
use crate::CliError;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if cli.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let format = cli.format;
    let text = match &cli.command {
        Command::Thresholds(args) => thresholds(args, format)?,
        Command::Run(args) => run(cli, args, args.stages, format)?,
        Command::Stages(args) => run(cli, args, true, format)?,
        Command::Sweep(args) => sweep_cmd(cli, args, format)?,
        Command::Giant(args) => giant(cli, args, format)?,
        Command::Bounds(args) => bounds(args, format)?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn params_of(args: &ParamArgs) -> Result<ProcessParams, CliError> {
    Ok(ProcessParams::new(args.n, args.p, args.r)?)
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// One header row plus one row per record.
fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn render<J: Serialize, C: Serialize>(
    format: Format,
    json_value: &J,
    csv_row: &C,
) -> Result<String, CliError> {
    match format {
        Format::Json => json(json_value),
        Format::Csv => csv_rows(std::slice::from_ref(csv_row)),
    }
}

#[derive(Serialize)]
struct ThresholdsOut {
    params: ProcessParams,
    critical: CriticalValues,
}

#[derive(Serialize)]
struct ThresholdsRow {
    n: u64,
    #[serde(serialize_with = "sig12")]
    p: f64,
    r: u32,
    regime_ok: bool,
    delta: f64,
    t0: f64,
    t0_int: u64,
    tc: u64,
    ac: f64,
    tc_asym: f64,
    ac_asym: f64,
    #[serde(serialize_with = "sig12")]
    pi_hat_tc: f64,
}

fn thresholds(args: &ParamArgs, format: Option<Format>) -> Result<String, CliError> {
    let params = params_of(args)?;
    let critical = critical_pair(&params)?;
    let row = ThresholdsRow {
        n: params.n(),
        p: params.p(),
        r: params.r(),
        regime_ok: params.regime_ok(),
        delta: critical.delta,
        t0: critical.t0,
        t0_int: critical.t0_int,
        tc: critical.tc,
        ac: critical.ac,
        tc_asym: critical.tc_asym,
        ac_asym: critical.ac_asym,
        pi_hat_tc: critical.pi_hat_tc,
    };
    render(
        format.unwrap_or(Format::Json),
        &ThresholdsOut { params, critical },
        &row,
    )
}

#[derive(Serialize)]
struct RunOut {
    params: ProcessParams,
    critical: CriticalValues,
    seed: u64,
    mode: Mode,
    a: u64,
    final_size: u64,
    #[serde(rename = "T")]
    stop: u64,
    completed: bool,
    classification: Classification,
    class: TrialClass,
    edges_revealed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stages: Option<StageReport>,
}

#[derive(Serialize)]
struct RunRow {
    n: u64,
    #[serde(serialize_with = "sig12")]
    p: f64,
    r: u32,
    seed: u64,
    a: u64,
    final_size: u64,
    #[serde(rename = "T")]
    stop: u64,
    completed: bool,
    classification: Classification,
    class: TrialClass,
}

fn run(
    cli: &Cli,
    args: &RunArgs,
    stages: bool,
    format: Option<Format>,
) -> Result<String, CliError> {
    let params = params_of(&args.params)?;
    if !(args.threshold > 0.0 && args.threshold <= 1.0) {
        return Err(CliError::Usage(format!(
            "--threshold must satisfy 0 < threshold <= 1 (got {})",
            args.threshold
        )));
    }
    let critical = critical_pair(&params)?;
    let n = params.n();
    let a = match (args.a, args.alpha_offset) {
        (Some(a), _) => a,
        (None, Some(c)) if c.is_finite() => SeedSize::Offset(c).resolve(&critical, n),
        _ => return Err(CliError::Usage("--alpha-offset must be finite".into())),
    };
    let seed = SeedSpec::new(a as usize, n as usize)?;
    let mut rng = seeded_rng(cli.seed);

    let graph = match (&args.graph, args.mode) {
        (Some(path), _) => {
            let file = File::open(path)
                .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
            Some(ExplicitGraph::read_edge_list(
                n as usize,
                BufReader::new(file),
            )?)
        }
        (None, ModeArg::Explicit) => Some(sample_gnp_with(n as usize, params.p(), &mut rng)),
        (None, ModeArg::Implicit) => None,
    };
    let source = match &graph {
        Some(g) => EdgeSource::Explicit(g),
        None => EdgeSource::implicit(&params),
    };
    let opts = TraceOptions {
        percolation_threshold: args.threshold,
        max_steps: args.max_steps,
        ..TraceOptions::default()
    };
    let (trace, report) = if stages {
        let alpha = a as f64 - critical.ac;
        if alpha <= 0.0 {
            return Err(CliError::Usage(format!(
                "stage diagnostics need a > a_c (got a = {a}, a_c = {})",
                critical.ac
            )));
        }
        let staged = run_with_stages(source, &params, &critical, seed, alpha, &opts, &mut rng)?;
        (staged.trace, Some(staged.report))
    } else {
        (
            bootperc::engine::run_process(source, seed, params.r(), &opts, &mut rng),
            None,
        )
    };

    if let Some(path) = &args.trace_out {
        let series = martingale_series(&trace, &params)?;
        let file = BufWriter::new(File::create(path)?);
        write_trace_csv(&trace, &series, file)?;
    }

    let class = classify(trace.final_size, &critical, n, args.threshold);
    let mode = if graph.is_some() {
        Mode::Explicit
    } else {
        Mode::Implicit
    };
    let out = RunOut {
        params,
        critical,
        seed: cli.seed,
        mode,
        a,
        final_size: trace.final_size,
        stop: trace.stop,
        completed: trace.completed,
        classification: trace.classification,
        class,
        edges_revealed: trace.edges_revealed,
        stages: report,
    };
    match format.unwrap_or(Format::Json) {
        Format::Json => json(&out),
        Format::Csv => {
            let row = RunRow {
                n,
                p: params.p(),
                r: params.r(),
                seed: cli.seed,
                a,
                final_size: out.final_size,
                stop: out.stop,
                completed: out.completed,
                classification: out.classification,
                class,
            };
            match &out.stages {
                // Stage fields go in a second table below the run row.
                Some(rep) => Ok(format!(
                    "{}\n{}",
                    csv_rows(&[row])?,
                    csv_rows(std::slice::from_ref(rep))?
                )),
                None => csv_rows(&[row]),
            }
        }
    }
}

#[derive(Serialize)]
struct SweepOut {
    params: ProcessParams,
    critical: CriticalValues,
    master_seed: u64,
    trials: u64,
    curve: Vec<CurveRow>,
}

fn sweep_cmd(cli: &Cli, args: &SweepArgs, format: Option<Format>) -> Result<String, CliError> {
    let params = params_of(&args.params)?;
    let sizes: Vec<SeedSize> = match (&args.a_list, &args.alpha_list) {
        (Some(a), _) => a.iter().map(|&a| SeedSize::Absolute(a)).collect(),
        (None, Some(c)) => c.iter().map(|&c| SeedSize::Offset(c)).collect(),
        (None, None) => Vec::new(),
    };
    let mut config = ExperimentConfig::new(params, SeedSize::Absolute(0), args.trials, cli.seed);
    config.mode = match args.mode {
        ModeArg::Implicit => Mode::Implicit,
        ModeArg::Explicit => Mode::Explicit,
    };
    config.percolation_threshold = args.threshold;
    config.max_steps = args.max_steps;
    config.workers = cli.workers;
    // Only the curve is printed, so skip the trajectory aggregation.
    config.trajectory_horizon = Some(0);
    let summaries = sweep(&config, &sizes)?;
    let rows = curve(&summaries);
    match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_curve_csv(&rows, &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv output is utf-8"))
        }
        Format::Json => json(&SweepOut {
            params,
            critical: summaries[0].critical,
            master_seed: cli.seed,
            trials: args.trials,
            curve: rows,
        }),
    }
}

#[derive(Serialize)]
struct GiantOut {
    m: usize,
    #[serde(serialize_with = "sig12")]
    eps: f64,
    #[serde(serialize_with = "sig12")]
    p: f64,
    seed: u64,
    edges: usize,
    component_count: usize,
    largest_size: usize,
    #[serde(serialize_with = "sig12")]
    rho: f64,
    #[serde(serialize_with = "sig12")]
    predicted_size: f64,
    #[serde(serialize_with = "sig12")]
    relative_error: f64,
}

fn giant(cli: &Cli, args: &GiantArgs, format: Option<Format>) -> Result<String, CliError> {
    if args.m < 1 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let p = (1.0 + args.eps) / args.m as f64;
    if !(p.is_finite() && p > 0.0 && p <= 1.0) {
        return Err(CliError::Usage(format!(
            "--eps must give 0 < (1+eps)/m <= 1 (got p = {p})"
        )));
    }
    // For eps <= 0 the only root of 1 − ρ = exp(−(1+eps)ρ) in [0,1) is 0.
    let rho = if args.eps > 0.0 {
        rho_fixed_point(args.eps)?
    } else {
        0.0
    };
    let g = sample_gnp_with(args.m, p, &mut seeded_rng(cli.seed));
    let summary = largest_component(&g, None, false);
    let predicted = rho * args.m as f64;
    let out = GiantOut {
        m: args.m,
        eps: args.eps,
        p,
        seed: cli.seed,
        edges: g.edge_count(),
        component_count: summary.component_count,
        largest_size: summary.largest_size,
        rho,
        predicted_size: predicted,
        relative_error: if predicted > 0.0 {
            (summary.largest_size as f64 - predicted) / predicted
        } else {
            f64::NAN
        },
    };
    render(format.unwrap_or(Format::Json), &out, &out)
}

#[derive(Serialize, Default)]
struct BoundsOut {
    bound: &'static str,
    #[serde(serialize_with = "sig12")]
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "opt_sig12")]
    upper_tail: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    var_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<ProcessParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

fn opt_sig12<S: serde::Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => sig12(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Serialize)]
struct BoundsRow {
    bound: &'static str,
    #[serde(serialize_with = "sig12")]
    value: f64,
}

fn need<T: Copy>(value: Option<T>, flag: &str, kind: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("{kind} needs --{flag}")))
}

fn nonnegative(x: f64, flag: &str) -> Result<f64, CliError> {
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(CliError::Usage(format!(
            "--{flag} must be finite and >= 0 (got {x})"
        )))
    }
}

fn bounds(args: &BoundsArgs, format: Option<Format>) -> Result<String, CliError> {
    let out = if args.chernoff {
        let mean = nonnegative(need(args.mean, "mean", "--chernoff")?, "mean")?;
        let lambda = nonnegative(need(args.lambda, "lambda", "--chernoff")?, "lambda")?;
        BoundsOut {
            bound: "chernoff",
            value: chernoff_lower(mean, lambda),
            upper_tail: Some(chernoff_upper(mean, lambda)),
            mean: Some(mean),
            lambda: Some(lambda),
            ..BoundsOut::default()
        }
    } else if args.martingale {
        let kind = "--martingale";
        let inputs = BoundInputs::new(
            need(args.lambda, "lambda", kind)?,
            need(args.max_step, "max-step", kind)?,
            need(args.var_sum, "var-sum", kind)?,
        )?;
        BoundsOut {
            bound: "martingale",
            value: martingale_tail_bound(&inputs),
            lambda: Some(inputs.lambda()),
            max_step: Some(inputs.max_step()),
            var_sum: Some(inputs.var_sum()),
            ..BoundsOut::default()
        }
    } else {
        let (kind, name) = if args.theorem1 {
            ("--theorem1", "theorem1")
        } else {
            ("--theorem2", "theorem2")
        };
        let params = ProcessParams::new(
            need(args.n, "n", kind)?,
            need(args.p, "p", kind)?,
            need(args.r, "r", kind)?,
        )?;
        let alpha = nonnegative(need(args.alpha, "alpha", kind)?, "alpha")?;
        let value = if args.theorem1 {
            theorem_subcritical_bound(&params, alpha)
        } else {
            theorem_supercritical_bound(&params, alpha)
        };
        BoundsOut {
            bound: name,
            value,
            params: Some(params),
            t0: Some(t_zero(&params)),
            alpha: Some(alpha),
            ..BoundsOut::default()
        }
    };
    let row = BoundsRow {
        bound: out.bound,
        value: out.value,
    };
    render(format.unwrap_or(Format::Json), &out, &row)
}
