use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nncs_reach::bernstein::{build_approx, DegreeVector};
use nncs_reach::config::{read_system_file, ParamOverrides, SystemFile};
use nncs_reach::error_bound::{certify, CertifyOptions};
use nncs_reach::flowpipe::{verify, Mode, Verdict};
use nncs_reach::interval::{Interval, IntervalBox};
use nncs_reach::lipschitz::network_lipschitz_report;
use nncs_reach::nn::Network;
use nncs_reach::simulate::{default_dt, simulate_many, trajectories_csv, Trajectory};
use nncs_reach::svg::emit_svg;
use nncs_reach::{Error, Result};

/// Reachability verification for neural-network controlled systems.
#[derive(Parser, Debug)]
#[command(name = "nncs-reach", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check whether every run from the initial set ends in the goal.
    Verify(VerifyArgs),
    /// Print the Bernstein approximation of a network over a box.
    Approx(ApproxArgs),
    /// Print a certified Lipschitz constant of a network over a box.
    Lipschitz(LipschitzArgs),
    /// Simulate closed-loop runs from random initial states.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct SystemArgs {
    /// System description (JSON).
    #[arg(long)]
    system: PathBuf,
    /// Controller weight file; overrides the system file's `model`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Bernstein degree per state dimension, e.g. `3,3`.
    #[arg(long, value_delimiter = ',')]
    degree: Option<Vec<u32>>,
    /// Sampling precision for the controller error bound.
    #[arg(long = "delta")]
    delta_bar: Option<f64>,
    #[arg(long)]
    tm_order: Option<u32>,
    /// Integration sub-steps per control step.
    #[arg(long)]
    substeps: Option<usize>,
    /// `bernstein` or `interval`.
    #[arg(long)]
    mode: Option<Mode>,
    /// Give up once a flowpipe is wider than this.
    #[arg(long)]
    width_cap: Option<f64>,
    /// Largest sampling grid before falling back to the a priori bound.
    #[arg(long)]
    max_samples: Option<usize>,
    /// Write the flowpipe boxes as JSON.
    #[arg(long)]
    flowpipes: Option<PathBuf>,
    /// Write an SVG plot.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// State dimensions plotted in the SVG.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    dims: Vec<usize>,
    /// Simulated runs drawn into the SVG.
    #[arg(long, default_value_t = 0)]
    trajectories: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input box `l1,u1;l2,u2;...`.
    #[arg(long = "box", allow_hyphen_values = true)]
    domain: String,
    #[arg(long, value_delimiter = ',')]
    degree: Vec<u32>,
    /// When given, also certify an error bound with this precision.
    #[arg(long = "delta")]
    delta_bar: Option<f64>,
}

#[derive(Args, Debug)]
struct LipschitzArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input box `l1,u1;l2,u2;...`.
    #[arg(long = "box", allow_hyphen_values = true)]
    domain: String,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Integration step; defaults to the control step / 200.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write trajectories as CSV instead of printing them.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    dims: Vec<usize>,
}

fn parse_box(text: &str) -> Result<IntervalBox> {
    let bad = || Error::InvalidArgument(format!("box must look like `l1,u1;l2,u2`, got `{text}`"));
    let ivs = text
        .split(';')
        .map(|part| {
            let mut it = part.split(',').map(|s| s.trim().parse::<f64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(lo)), Some(Ok(hi)), None) => Interval::new(lo, hi),
                _ => Err(bad()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntervalBox::new(ivs))
}

fn read_network(path: &Path) -> Result<Network> {
    Network::parse(&fs::read_to_string(path)?)
}

fn load(args: &SystemArgs) -> Result<(SystemFile, Network)> {
    let file = read_system_file(&args.system)?;
    let model = args
        .model
        .clone()
        .or_else(|| file.model.clone())
        .ok_or_else(|| Error::InvalidArgument("no controller given: pass --model or set `model`".into()))?;
    let net = read_network(&model)?;
    let n = file.system.n_state();
    if net.input_dim() != n || net.output_dim() != file.system.n_control() {
        return Err(Error::InvalidArgument(format!(
            "network maps {} inputs to {} outputs, system has {} states and {} controls",
            net.input_dim(),
            net.output_dim(),
            n,
            file.system.n_control()
        )));
    }
    Ok((file, net))
}

fn check_dims(dims: &[usize], n: usize) -> Result<(usize, usize)> {
    match dims {
        [a, b] if *a < n && *b < n => Ok((*a, *b)),
        _ => Err(Error::InvalidArgument(format!(
            "--dims needs two state indices below {n}, got {dims:?}"
        ))),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(v)?))
}

fn cmd_verify(a: VerifyArgs) -> Result<Verdict> {
    let (file, net) = load(&a.sys)?;
    let sys = &file.system;
    let dims = if a.svg.is_some() {
        Some(check_dims(&a.dims, sys.n_state())?)
    } else {
        None
    };
    let flags = ParamOverrides {
        degree: a.degree,
        delta_bar: a.delta_bar,
        tm_order: a.tm_order,
        substeps: a.substeps,
        mode: a.mode,
        width_cap: a.width_cap,
        max_samples: a.max_samples,
        rebox_every: None,
        symbolic_remainder: None,
    };
    let params = file.params.merged(&flags).resolve(sys.n_state())?;
    let verdict = verify(sys, &net, &params)?;

    if let Some(path) = &a.flowpipes {
        let out = json!({
            "verdict": verdict.to_json(),
            "flowpipes": verdict.flowpipes,
            "step_boxes": verdict.step_boxes,
        });
        fs::write(path, serde_json::to_string_pretty(&out)?)?;
    }
    if let (Some(path), Some(dims)) = (&a.svg, dims) {
        let trajs = if a.trajectories > 0 {
            simulate_many(sys, &net, a.trajectories, a.seed, default_dt(sys))?
        } else {
            Vec::new()
        };
        write_svg(path, &file, &verdict.flowpipes.iter().map(|p| p.enclosure.clone()).collect::<Vec<_>>(), &trajs, dims)?;
    }
    print_json(&verdict.to_json())?;
    Ok(verdict)
}

fn write_svg(path: &Path, file: &SystemFile, boxes: &[IntervalBox], trajs: &[Trajectory], dims: (usize, usize)) -> Result<()> {
    let names = &file.system.symbols.state;
    let svg = emit_svg(boxes, trajs, Some(&file.system.goal), dims, (&names[dims.0], &names[dims.1]));
    fs::write(path, svg)?;
    Ok(())
}

fn cmd_approx(a: ApproxArgs) -> Result<()> {
    let net = read_network(&a.model)?;
    let domain = parse_box(&a.domain)?;
    let degree = if a.degree.len() == 1 && domain.dim() > 1 {
        DegreeVector::uniform(domain.dim(), a.degree[0])?
    } else {
        DegreeVector::new(a.degree)?
    };
    let approx = build_approx(&net, &domain, &degree)?;
    let mut outputs: Vec<serde_json::Value> = approx
        .outputs
        .iter()
        .map(|o| json!({ "poly": o.poly.to_string(), "terms": o.poly }))
        .collect();
    if let Some(delta_bar) = a.delta_bar {
        let (_, reports) = certify(&net, approx.clone(), CertifyOptions::new(delta_bar))?;
        for (o, r) in outputs.iter_mut().zip(reports) {
            o["eps"] = json!(r.eps_used);
            o["error"] = serde_json::to_value(r)?;
        }
    }
    print_json(&json!({
        "domain": approx.domain,
        "degree": approx.degree,
        "outputs": outputs,
    }))
}

fn cmd_lipschitz(a: LipschitzArgs) -> Result<()> {
    let net = read_network(&a.model)?;
    let domain = parse_box(&a.domain)?;
    let report = network_lipschitz_report(&net, &domain)?;
    print_json(&serde_json::to_value(report)?)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let (file, net) = load(&a.sys)?;
    let sys = &file.system;
    let dims = match &a.svg {
        Some(_) => Some(check_dims(&a.dims, sys.n_state())?),
        None => None,
    };
    let dt = a.dt.unwrap_or_else(|| default_dt(sys));
    let trajs = simulate_many(sys, &net, a.count, a.seed, dt)?;
    let csv = trajectories_csv(sys, &trajs);
    match &a.csv {
        Some(path) => fs::write(path, csv)?,
        None => emit(&csv)?,
    }
    if let (Some(path), Some(dims)) = (&a.svg, dims) {
        write_svg(path, &file, &[], &trajs, dims)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Verify(a) => cmd_verify(a).map(|v| if v.is_yes() { 0 } else { 1 }),
        Command::Approx(a) => cmd_approx(a).map(|_| 0),
        Command::Lipschitz(a) => cmd_lipschitz(a).map(|_| 0),
        Command::Simulate(a) => cmd_simulate(a).map(|_| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
