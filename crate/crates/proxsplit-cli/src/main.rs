//! Command-line front end: generate synthetic instances, run the splitting
//! methods with schedule presets, certify local rates, audit the energy
//! inequality, and compare schedules side by side.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure,
//! 4 insufficient data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proxsplit::error::Error;
use proxsplit::experiments::{
    compare_runs, generate, parse_config, run_experiment, ConfigFile, ExperimentOptions, Method,
    Preset, ProblemInstance, ProblemSpec, RunReport,
};
use proxsplit::linear::Subspace;
use proxsplit::smooth::lipschitz_moduli;

#[derive(Parser)]
#[command(name = "proxsplit", about = "proximal operator-splitting laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key=value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for CSV and plot outputs (one subdirectory per run).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Instance seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Problem family: lasso_constrained | group_tv.
    #[arg(long)]
    family: Option<String>,
    /// Schedule preset: stationary | case1 | case2 | case3 | case4.
    #[arg(long)]
    preset: Option<String>,
    /// Method: fdr | fb | gfb | tos.
    #[arg(long)]
    method: Option<String>,
    /// Iteration cap of the main run.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Residual stopping tolerance on the governing sequence.
    #[arg(long)]
    tol: Option<f64>,
    /// Recording stride.
    #[arg(long)]
    stride: Option<usize>,
    /// Emit SVG plots next to the CSV.
    #[arg(long, default_value_t = false)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and print its summary.
    Generate(CommonArgs),
    /// Run one method/preset pipeline end to end.
    Run(CommonArgs),
    /// Run and report the local linear-rate certificate.
    Rate(CommonArgs),
    /// Run unrelaxed and audit the per-iteration energy inequality.
    Audit(CommonArgs),
    /// Run several presets on the same instance and tabulate the decay.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated preset list.
        #[arg(long, default_value = "stationary,case1,case3,case4")]
        presets: String,
    },
}

struct Resolved {
    spec: ProblemSpec,
    method: Method,
    preset: Preset,
    opts: ExperimentOptions,
    out_dir: Option<PathBuf>,
}

fn resolve(common: &CommonArgs) -> Result<Resolved, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => ConfigFile::default(),
    };
    if let Some(f) = &common.family {
        cfg.family = Some(match f.as_str() {
            "lasso_constrained" => proxsplit::experiments::Family::LassoConstrained,
            "group_tv" => proxsplit::experiments::Family::GroupTv,
            other => return Err(Error::invalid(format!("unknown family '{other}'"))),
        });
    }
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(m) = &common.method {
        cfg.method = Some(m.parse()?);
    }
    if let Some(p) = &common.preset {
        cfg.preset = Some(p.parse()?);
    }
    if let Some(v) = common.max_iter {
        cfg.max_iter = Some(v);
    }
    if let Some(v) = common.tol {
        cfg.tol = Some(v);
    }
    if let Some(v) = common.stride {
        cfg.stride = Some(v);
    }
    let spec = cfg.to_spec();
    let method = cfg.method.unwrap_or(match spec.family {
        proxsplit::experiments::Family::LassoConstrained => Method::Fdr,
        proxsplit::experiments::Family::GroupTv => Method::Tos,
    });
    let preset = cfg.preset.unwrap_or(Preset::Stationary);
    let mut opts = ExperimentOptions::default();
    if let Some(v) = cfg.max_iter {
        opts.max_iter = v;
    }
    if let Some(v) = cfg.tol {
        opts.residual_tol = v;
    }
    if let Some(v) = cfg.stride {
        opts.record_stride = v;
    }
    opts.emit_plots = common.plots;
    Ok(Resolved { spec, method, preset, opts, out_dir: common.out_dir.clone() })
}

fn print_report(report: &RunReport) {
    println!("run        : {} / {} / {}", report.fingerprint, report.method, report.preset);
    println!("stopped    : {:?} after {} iterations ({} ms)", report.stop_reason, report.total_iterations, report.wall_clock_ms);
    for c in &report.validation.conditions {
        println!("schedule   : {:<28} {:?}  {}", c.name, c.status, c.detail);
    }
    match report.identification.identified_at {
        Some(k) => println!("identified : k = {k}"),
        None => println!("identified : never"),
    }
    if let Some(m) = report.identification.margin {
        println!("margin     : {m:.6e}");
    }
    if let Some(last) = report.rows.last() {
        println!("terminal   : dist_z = {:.6e}, objective = {:.12e}", last.dist_z, last.objective);
    }
    if let Some(cert) = &report.certificate {
        println!(
            "rate       : predicted {:.6} observed {:.6} [{:?}] window {:?} {}{}",
            cert.predicted_rho,
            cert.observed_factor,
            cert.series,
            cert.window,
            if cert.matched { "MATCH" } else { "MISMATCH" },
            if cert.dominated_by_schedule { " (dominated by schedule)" } else { "" },
        );
    }
    if let Some(audit) = &report.audit {
        println!("audit      : {} rows, max violation {:.3e}", audit.rows.len(), audit.max_violation);
    }
    if let Some(path) = &report.csv_path {
        println!("csv        : {}", path.display());
    }
    for p in &report.plot_paths {
        println!("plot       : {}", p.display());
    }
}

fn cmd_generate(common: &CommonArgs) -> Result<(), Error> {
    let resolved = resolve(common)?;
    let instance = generate(&resolved.spec)?;
    println!("instance   : {}", resolved.spec.fingerprint());
    match &instance {
        ProblemInstance::Lasso { smooth, subspace, ground_truth, .. } => {
            let (beta, beta_v) = lipschitz_moduli(smooth, subspace)?;
            println!("family     : constrained lasso, K is {}x{}", smooth.operator().nrows(), smooth.operator().ncols());
            println!("subspace   : dim {} of {}", subspace.dim(), subspace.ambient_dim());
            println!("moduli     : beta = {beta:.6e}, beta_V = {beta_v:.6e}");
            let support: Vec<usize> = ground_truth
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect();
            println!("truth      : support {support:?}");
        }
        ProblemInstance::GroupTv { smooth, ground_truth, .. } => {
            let n = smooth.operator().ncols();
            let (beta, _) = lipschitz_moduli(smooth, &Subspace::full(n))?;
            println!("family     : group-sparse + TV, K is {}x{}", smooth.operator().nrows(), n);
            println!("moduli     : beta = {beta:.6e}");
            let nonzeros = ground_truth.iter().filter(|v| **v != 0.0).count();
            println!("truth      : {nonzeros} non-zero coordinates");
        }
    }
    Ok(())
}

fn cmd_run(common: &CommonArgs) -> Result<(), Error> {
    let r = resolve(common)?;
    let report = run_experiment(&r.spec, r.method, r.preset, &r.opts, r.out_dir.as_deref())?;
    print_report(&report);
    Ok(())
}

fn cmd_rate(common: &CommonArgs) -> Result<(), Error> {
    let r = resolve(common)?;
    let report = run_experiment(&r.spec, r.method, r.preset, &r.opts, r.out_dir.as_deref())?;
    print_report(&report);
    match &report.certificate {
        Some(_) => Ok(()),
        None => Err(Error::insufficient(
            "no rate certificate: identification missing or the window is too short",
        )),
    }
}

fn cmd_audit(common: &CommonArgs) -> Result<(), Error> {
    let r = resolve(common)?;
    if r.opts.record_stride != 1 {
        return Err(Error::invalid("the audit requires stride 1"));
    }
    let report = run_experiment(&r.spec, r.method, r.preset, &r.opts, r.out_dir.as_deref())?;
    print_report(&report);
    match &report.audit {
        Some(audit) => {
            println!("max violation: {:.6e}", audit.max_violation);
            Ok(())
        }
        None => Err(Error::invalid("the audit needs an unrelaxed subspace-constrained run")),
    }
}

fn cmd_compare(common: &CommonArgs, presets: &str) -> Result<(), Error> {
    let r = resolve(common)?;
    let presets: Vec<Preset> = presets
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()?;
    if presets.len() < 2 {
        return Err(Error::invalid("compare needs at least two presets"));
    }
    let mut reports = Vec::new();
    for preset in &presets {
        println!("--- running {preset}");
        reports.push(run_experiment(&r.spec, r.method, *preset, &r.opts, r.out_dir.as_deref())?);
    }
    let refs: Vec<&RunReport> = reports.iter().collect();
    let table = compare_runs(&refs)?;
    println!("\n{:>8} {}", "k", table.labels.iter().map(|l| format!("{l:>22}")).collect::<String>());
    let step = (table.rows.len() / 20).max(1);
    for (i, (k, values)) in table.rows.iter().enumerate() {
        if i % step == 0 || i + 1 == table.rows.len() {
            let cells: String = values.iter().map(|v| format!("{v:>22.6e}")).collect();
            println!("{k:>8} {cells}");
        }
    }
    println!("\nterminal errors      : {:?}", table.terminal_errors);
    println!("identification iters : {:?}", table.identification);
    println!("observed factors     : {:?}", table.observed_factors);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(c) => cmd_generate(c),
        Command::Run(c) => cmd_run(c),
        Command::Rate(c) => cmd_rate(c),
        Command::Audit(c) => cmd_audit(c),
        Command::Compare { common, presets } => cmd_compare(common, presets),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidInput(_) => 2,
                Error::NumericalFailure { .. } => 3,
                Error::UnsupportedFeature(_) => 2,
                Error::InsufficientData(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
