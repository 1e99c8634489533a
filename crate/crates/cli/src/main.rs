use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use rayon::prelude::*;
use serde_json::json;

use fracvrp::exact::{solve_exact, ExactParams, ExactResult, ExactStatus};
use fracvrp::instance::{make_class_ca, make_class_pa, parse_tsplib, CvrpInstance};
use fracvrp::Instance;

mod bounds;
mod oracle;

#[derive(Parser)]
#[command(name = "fracvrp", version, about = "Exact solver for vehicle routing with a fractional objective")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build VRPFO instances from TSPLIB CVRP files.
    Generate(GenerateArgs),
    /// Compare the bounding procedures.
    Bounds(bounds::BoundsArgs),
    /// Solve instances to optimality.
    Solve(SolveArgs),
    /// Check the solver against exhaustive enumeration on random instances.
    OracleCheck(oracle::OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Class {
    #[value(name = "CA", alias = "ca")]
    Ca,
    #[value(name = "PA", alias = "pa")]
    Pa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

/// How TSPLIB inputs become instances.
#[derive(Args, Clone)]
struct ClassArgs {
    /// Benchmark class built from TSPLIB files.
    #[arg(long, value_enum, default_value = "CA")]
    class: Class,
    /// Fraction of mandatory customers; without it both the `a` (0.5) and `b` (0.75) variants are built.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Output file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// TSPLIB files or directories holding them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    class: ClassArgs,
    /// Directory for the generated files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance files (VRPFO or TSPLIB) or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    class: ClassArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    output: OutputArgs,
}

/// Overrides of the exact method's parameters.
#[derive(Args, Clone)]
struct MethodArgs {
    /// ng-neighbourhood size for pricing and route generation.
    #[arg(long)]
    delta_ng: Option<usize>,
    #[arg(long)]
    delta_max: Option<usize>,
    /// Time limit in seconds for the first reduced problem.
    #[arg(long)]
    tlim: Option<f64>,
    #[arg(long)]
    itermax: Option<usize>,
    /// Relative gap that stops the method; infinite by default (no gap test).
    #[arg(long)]
    gapmax: Option<f64>,
    #[arg(long)]
    nstatb: Option<usize>,
}

impl MethodArgs {
    fn params(&self) -> ExactParams {
        let mut p = ExactParams::default();
        if let Some(d) = self.delta_ng {
            p.ng_delta = d;
            p.pricing_ng = d;
        }
        if let Some(v) = self.delta_max {
            p.delta_max = v;
        }
        if let Some(v) = self.tlim {
            p.tlim = v;
        }
        if let Some(v) = self.itermax {
            p.itermax = v;
        }
        if let Some(v) = self.gapmax {
            p.gapmax = v;
        }
        if let Some(v) = self.nstatb {
            p.nstatb = v;
        }
        p
    }
}

fn alpha_suffix(alpha: f64) -> String {
    if alpha == 0.5 {
        "a".into()
    } else if alpha == 0.75 {
        "b".into()
    } else {
        format!("-{alpha}")
    }
}

fn build(cvrp: &CvrpInstance, class: Class, alpha: f64) -> Result<Instance> {
    let name = format!("{}{}", cvrp.name, alpha_suffix(alpha));
    let inst = match class {
        Class::Ca => make_class_ca(cvrp, alpha, &name),
        Class::Pa => make_class_pa(cvrp, alpha, &name),
    };
    inst.with_context(|| format!("building {name}"))
}

fn class_instances(cvrp: &CvrpInstance, args: &ClassArgs) -> Result<Vec<Instance>> {
    match args.alpha {
        Some(a) if !(a > 0.0 && a < 1.0) => bail!("--alpha must lie in (0, 1), got {a}"),
        Some(a) => Ok(vec![build(cvrp, args.class, a)?]),
        None => [0.5, 0.75].iter().map(|&a| build(cvrp, args.class, a)).collect(),
    }
}

fn is_tsplib(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("vrp"))
}

fn is_vrpfo(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("vrpfo"))
}

/// Files under the inputs, directories expanded one level and sorted.
fn expand(inputs: &[PathBuf], keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && keep(p))
                .collect();
            found.sort();
            if found.is_empty() {
                warn!("no instance files in {}", input.display());
            }
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_cvrp(path: &Path) -> Result<CvrpInstance> {
    parse_tsplib(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Loads instances from VRPFO files directly and from TSPLIB files via the class settings.
fn load_instances(inputs: &[PathBuf], class: &ClassArgs) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for path in expand(inputs, |p| is_tsplib(p) || is_vrpfo(p))? {
        if is_tsplib(&path) {
            out.extend(class_instances(&read_cvrp(&path)?, class)?);
        } else {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let inst = Instance::from_text(&name, &read(&path)?).with_context(|| format!("parsing {}", path.display()))?;
            out.push(inst);
        }
    }
    Ok(out)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode> {
    let files = expand(&args.inputs, is_tsplib)?;
    if files.is_empty() {
        warn!("nothing to generate");
        return Ok(ExitCode::SUCCESS);
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for path in files {
        for inst in class_instances(&read_cvrp(&path)?, &args.class)? {
            let target = args.out.join(format!("{}.vrpfo", inst.name));
            std::fs::write(&target, inst.to_text()).with_context(|| format!("writing {}", target.display()))?;
            println!("{}", target.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn format_solve(results: &[(Instance, ExactResult)], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            for (inst, r) in results {
                let shown = r.solution.reported_value(inst.objective);
                let _ = writeln!(out, "INSTANCE {}", inst.name);
                let _ = writeln!(out, "STATUS {}", r.status.as_str());
                let _ = writeln!(out, "OBJECTIVE {} {} ({:.6})", inst.objective.as_str(), shown, shown.to_f64());
                let _ = writeln!(out, "DUAL_BOUND {:.6}", r.dual_bound);
                let _ = writeln!(out, "VEHICLES {} window {}..={}", r.solution.routes.len(), r.m_min, r.m_max);
                out.push_str(&r.solution.to_text());
                out.push_str(&r.trace_csv());
                out.push('\n');
            }
        }
        Format::Csv => {
            out.push_str("instance,status,value,num,den,routes,dual_bound,iterations,time\n");
            for (inst, r) in results {
                let v = r.solution.reported_value(inst.objective);
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{},{},{},{:.6},{},{:.2}",
                    inst.name,
                    r.status.as_str(),
                    v.to_f64(),
                    v.num(),
                    v.den(),
                    r.solution.routes.len(),
                    r.dual_bound,
                    r.trace.len(),
                    r.elapsed
                );
            }
        }
        Format::Json => {
            let items: Vec<_> = results
                .iter()
                .map(|(inst, r)| {
                    let v = r.solution.reported_value(inst.objective);
                    json!({
                        "instance": inst.name,
                        "objective": inst.objective.as_str(),
                        "status": r.status.as_str(),
                        "value": { "num": v.num(), "den": v.den(), "approx": v.to_f64() },
                        "dual_bound": r.dual_bound,
                        "vehicle_window": [r.m_min, r.m_max],
                        "routes": r.solution.routes.iter().map(|x| json!({
                            "customers": x.customers(),
                            "cost": x.cost,
                            "working_time": x.working_time,
                        })).collect::<Vec<_>>(),
                        "trace": r.trace,
                        "elapsed": r.elapsed,
                    })
                })
                .collect();
            out = serde_json::to_string_pretty(&items).expect("JSON values serialize");
            out.push('\n');
        }
    }
    out
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let instances = load_instances(&args.inputs, &args.class)?;
    if instances.is_empty() {
        bail!("no instances to solve");
    }
    let params = args.method.params();
    let results: Vec<Result<(Instance, ExactResult)>> = instances
        .into_par_iter()
        .map(|inst| {
            let r = solve_exact(&inst, &params).with_context(|| format!("solving {}", inst.name))?;
            Ok((inst, r))
        })
        .collect();
    let results: Vec<(Instance, ExactResult)> = results.into_iter().collect::<Result<_>>()?;
    emit(&args.output.out, &format_solve(&results, args.output.format))?;
    let all_optimal = results.iter().all(|(_, r)| r.status == ExactStatus::Optimal);
    Ok(if all_optimal { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FRACVRP_THREADS") {
        let n: usize = v.parse().with_context(|| format!("FRACVRP_THREADS must be a count, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker threads")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Bounds(a) => bounds::cmd_bounds(a),
        Command::Solve(a) => cmd_solve(a),
        Command::OracleCheck(a) => oracle::cmd_oracle_check(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
