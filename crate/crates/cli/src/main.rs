mod config;
mod pipeline;
mod sweep;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use majda_core::model::ModelParams;
use majda_core::spectral::HighFreqBound;
use majda_core::zero_ea::{bench_frontier, shoot_zero_ea, ZeroEaOutcome};
use serde::Serialize;

use config::{read_json, PointConfig, SweepConfig};
use pipeline::{a_priori_bound, assess, solve, Assessment, Solved};

/// Samples written for a zero-ea profile CSV.
const ZERO_EA_SAMPLES: usize = 2001;
const FRONTIER_TOL: f64 = 1e-9;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical { code: &'static str, message: String },
    Uncertified(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Uncertified(_) => 4,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical { code, .. } => code,
            CliError::Uncertified(_) => "uncertified_winding",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Uncertified(m) | CliError::Io(m) => m,
            CliError::Numerical { message, .. } => message,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "majda", version, about = "Evans-function stability of viscous strong detonations in the Majda model")]
struct Cli {
    /// JSON configuration; a point config for single-point commands, a sweep
    /// config for `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Contour radius, overriding the exclusion radius.
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Parameter overrides applied on top of the config (or the defaults).
#[derive(Args, Debug, Default, Clone)]
struct PointArgs {
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long = "D")]
    d: Option<f64>,
    #[arg(long)]
    ea: Option<f64>,
    #[arg(long)]
    u_plus: Option<f64>,
    #[arg(long)]
    u_ig: Option<f64>,
    /// First-quadrant contour nodes.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the traveling-wave profile and write it as CSV with a JSON sidecar.
    Profile(PointArgs),
    /// Evans function on the contour: trace CSV and verdict JSON.
    Evans(PointArgs),
    /// Winding-number verdict only.
    Wind(PointArgs),
    /// Exclusion radius for eigenvalues with nonnegative real part.
    Hfbound(PointArgs),
    /// Heaviside-ignition profile, bench frontier and winding.
    ZeroEa(PointArgs),
    /// Batch run over a parameter grid.
    Sweep,
}

fn point_config(cli: &Cli, args: &PointArgs) -> Result<PointConfig, CliError> {
    let mut cfg: PointConfig = match &cli.config {
        Some(path) => read_json(path)?,
        None => PointConfig::default(),
    };
    let p = &mut cfg.params;
    let overrides = [
        (&mut p.q, args.q),
        (&mut p.k, args.k),
        (&mut p.d, args.d),
        (&mut p.ea, args.ea),
        (&mut p.u_plus, args.u_plus),
        (&mut p.u_ig, args.u_ig),
    ];
    for (field, v) in overrides {
        if let Some(v) = v {
            *field = v;
        }
    }
    if let Some(r) = cli.radius {
        cfg.radius = Some(r);
    }
    if let Some(n) = args.nodes {
        cfg.nodes = n;
    }
    if let Some(r) = cfg.radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CliError::Validation(format!("radius must be positive, got {r}")));
        }
    }
    if cfg.nodes < 8 {
        return Err(CliError::Validation(format!("nodes = {} is below 8", cfg.nodes)));
    }
    cfg.params.checked()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_solved(dir: &Path, s: &Solved) -> Result<(), CliError> {
    match s {
        Solved::Profile(p) => {
            p.write_csv(create(dir, "profile.csv")?)?;
            write_json(dir, "profile.json", &p.sidecar())
        }
        Solved::ZeroEa(z) => {
            z.write_csv(create(dir, "zero_ea_profile.csv")?, ZERO_EA_SAMPLES)?;
            write_json(dir, "zero_ea.json", &z.report(None))
        }
    }
}

fn cmd_profile(cli: &Cli, args: &PointArgs) -> Result<(), CliError> {
    let cfg = point_config(cli, args)?;
    let solved = solve(&cfg.params, None)?;
    let dir = out_dir(cli)?;
    write_solved(&dir, &solved)?;
    match &solved {
        Solved::Profile(p) => print_json(&p.sidecar()),
        Solved::ZeroEa(z) => print_json(&z.report(None)),
    }
}

/// Exit status of a finished assessment.
fn assessment_status(a: &Assessment) -> Result<(), CliError> {
    if a.infeasible {
        return Err(CliError::Numerical {
            code: "bound_infeasible",
            message: a.verdict.note.clone().unwrap_or_default(),
        });
    }
    if let Some(e) = &a.error {
        return Err(pipeline::cli_error(e));
    }
    if !a.verdict.certified {
        return Err(CliError::Uncertified(format!("winding not certified: {:?}", a.run.as_ref().map(|r| r.result))));
    }
    Ok(())
}

fn cmd_evans(cli: &Cli, args: &PointArgs, with_trace: bool) -> Result<(), CliError> {
    let cfg = point_config(cli, args)?;
    let solved = solve(&cfg.params, None)?;
    let a = assess(&solved, cfg.radius, cfg.nodes, cfg.feasible_radius);
    if with_trace || cli.out.is_some() {
        let dir = out_dir(cli)?;
        write_json(&dir, "verdict.json", &a.verdict)?;
        if let (true, Some(run)) = (with_trace, &a.run) {
            run.trace.write_csv(create(&dir, "evans_trace.csv")?)?;
        }
    }
    print_json(&a.verdict)?;
    assessment_status(&a)
}

pub const HFBOUND_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct HfReport {
    schema_version: u32,
    params: ModelParams,
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "R")]
    r: f64,
    feasible_radius: f64,
    feasible: bool,
    /// Profile-free bound from the ignition function alone.
    a_priori: Option<HighFreqBound>,
    a_priori_feasible: Option<bool>,
}

fn cmd_hfbound(cli: &Cli, args: &PointArgs) -> Result<(), CliError> {
    let cfg = point_config(cli, args)?;
    if cfg.params.ea == 0.0 {
        return Err(CliError::Validation("no exclusion radius for ea = 0; use zero-ea with --radius".into()));
    }
    let solved = solve(&cfg.params, None)?;
    let b = pipeline::exclusion_bound(&solved).expect("profile for ea > 0");
    let a = a_priori_bound(&solved);
    let report = HfReport {
        schema_version: HFBOUND_SCHEMA_VERSION,
        params: cfg.params,
        l: b.l,
        m: b.m,
        r: b.r,
        feasible_radius: cfg.feasible_radius,
        feasible: b.r <= cfg.feasible_radius,
        a_priori: a,
        a_priori_feasible: a.map(|a| a.r <= cfg.feasible_radius),
    };
    if cli.out.is_some() {
        write_json(&out_dir(cli)?, "hfbound.json", &report)?;
    }
    print_json(&report)
}

fn cmd_zero_ea(cli: &Cli, args: &PointArgs) -> Result<(), CliError> {
    let mut cfg = point_config(cli, &PointArgs { ea: Some(0.0), ..args.clone() })?;
    let shot = shoot_zero_ea(&cfg.params)?;
    let frontier = bench_frontier(&cfg.params, FRONTIER_TOL).ok();
    let dir = out_dir(cli)?;
    let report = shot.report(frontier);
    write_json(&dir, "zero_ea.json", &report)?;
    print_json(&report)?;
    if shot.outcome != ZeroEaOutcome::Connection {
        return Err(CliError::Numerical { code: "no_connection", message: format!("shot outcome {:?}", shot.outcome) });
    }
    shot.write_csv(create(&dir, "zero_ea_profile.csv")?, ZERO_EA_SAMPLES)?;
    cfg.radius = cfg.radius.or(Some(config::ZERO_EA_RADIUS));
    let a = assess(&Solved::ZeroEa(shot), cfg.radius, cfg.nodes, cfg.feasible_radius);
    write_json(&dir, "verdict.json", &a.verdict)?;
    if let Some(run) = &a.run {
        run.trace.write_csv(create(&dir, "evans_trace.csv")?)?;
    }
    assessment_status(&a)
}

fn cmd_sweep(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("sweep needs --config".into()))?;
    let mut cfg: SweepConfig = read_json(path)?;
    if let Some(r) = cli.radius {
        cfg.radius = Some(r);
    }
    cfg.check()?;
    let dir = match (&cli.out, &cfg.out) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let jobs = cli.jobs.or(cfg.jobs);
    let (ledger, timings) = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Validation(e.to_string()))?
            .install(|| sweep::run_sweep(&cfg)),
        None => sweep::run_sweep(&cfg),
    };
    write_json(&dir, "ledger.json", &ledger)?;
    let mut w = csv::Writer::from_writer(create(&dir, "timings.csv")?);
    for t in &timings {
        w.serialize(t).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush()?;
    print_json(&ledger.summary)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let (Some(n), false) = (cli.jobs, matches!(cli.command, Command::Sweep)) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    match &cli.command {
        Command::Profile(a) => cmd_profile(cli, a),
        Command::Evans(a) => cmd_evans(cli, a, true),
        Command::Wind(a) => cmd_evans(cli, a, false),
        Command::Hfbound(a) => cmd_hfbound(cli, a),
        Command::ZeroEa(a) => cmd_zero_ea(cli, a),
        Command::Sweep => cmd_sweep(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.code(), "message": e.message() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code())
        }
    }
}
