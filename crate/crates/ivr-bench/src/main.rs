//! Command-line benchmark driver: single case runs, basis-size sweeps,
//! offline basis generation, and error recomputation from field dumps.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ivr_bench::config::{CaseConfig, ConfigFile, Overrides};
use ivr_bench::context::{
    compute_all_bases, prepare, run_case, save_bases, train, ErrorReport, Prepared,
};
use ivr_bench::dump::FieldDump;
use ivr_bench::metrics::compute_errors;
use ivr_bench::sweep::{sweep_basis, to_csv};

#[derive(Parser)]
#[command(
    name = "ivr-bench",
    about = "Solid-body-rotation transmission benchmark: full-order, reduced, and hybrid couplings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configured case and write initial/final field dumps.
    Run(CaseArgs),
    /// Run a basis-size sweep and write a CSV table plus a convergence slope.
    Sweep(SweepArgs),
    /// Offline phase only: train, compute all bases, and save them.
    Snapshots(CaseArgs),
    /// Recompute error metrics from previously written field dumps.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct CaseArgs {
    /// TOML config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// pure_advection or high_peclet.
    #[arg(long)]
    variant: Option<String>,
    /// global_fem, global_rom, fem_fem, rom_fem, or rom_rom.
    #[arg(long)]
    coupling: Option<String>,
    /// Global cell count in x (even; the interface sits at x = 0.5).
    #[arg(long)]
    nx: Option<usize>,
    /// Global cell count in y.
    #[arg(long)]
    ny: Option<usize>,
    /// Requested time step (shrunk to divide ds_t exactly).
    #[arg(long)]
    dt: Option<f64>,
    /// Final time (default: one full rotation, 2 pi).
    #[arg(long)]
    t_final: Option<f64>,
    /// Snapshot spacing (default: the variant's reference spacing).
    #[arg(long)]
    ds_t: Option<f64>,
    /// Truncation for the left/single basis: energy:F, threshold:D, fixed:N.
    #[arg(long)]
    truncation_left: Option<String>,
    /// Truncation for the right basis.
    #[arg(long)]
    truncation_right: Option<String>,
    /// Directory for dumps, CSVs, and saved bases.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Load bases from this directory instead of building them.
    #[arg(long)]
    basis_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Comma-separated basis sizes, e.g. 40,60,80,110,150.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Slope regression window (inclusive) on the average mode count.
    #[arg(long, default_value_t = 40.0)]
    window_lo: f64,
    #[arg(long, default_value_t = 150.0)]
    window_hi: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Field dump of the candidate final state.
    #[arg(long)]
    candidate: PathBuf,
    /// Field dump of the reference (global FEM) final state.
    #[arg(long)]
    reference: PathBuf,
    /// Field dump of the initial state.
    #[arg(long)]
    initial: PathBuf,
}

impl CaseArgs {
    fn resolve(&self) -> Result<CaseConfig> {
        let file = self
            .config
            .as_deref()
            .map(ConfigFile::load)
            .transpose()?;
        let cli = Overrides {
            variant: self.variant.clone(),
            coupling: self.coupling.clone(),
            nx: self.nx,
            ny: self.ny,
            dt: self.dt,
            t_final: self.t_final,
            ds_t: self.ds_t,
            truncation_left: self.truncation_left.clone(),
            truncation_right: self.truncation_right.clone(),
            output_dir: self.output_dir.clone(),
            basis_dir: self.basis_dir.clone(),
        };
        CaseConfig::resolve(file.as_ref(), &cli)
    }
}

fn print_report(prep: &Prepared, report: &ErrorReport) {
    println!("variant={}", report.variant);
    println!("coupling={}", report.coupling);
    println!("nx={} ny={}", report.nx, report.ny);
    println!(
        "dt_eff={} steps={}{}",
        prep.dt_eff,
        prep.n_full,
        prep.remainder.map_or(String::new(), |r| format!("+remainder({r})"))
    );
    println!(
        "n_r_left={} n_r_right={}",
        report.n_r_left.map_or("-".into(), |n| n.to_string()),
        report.n_r_right.map_or("-".into(), |n| n.to_string()),
    );
    println!("eps={:.16e}", report.eps);
    match report.eps0 {
        Some(e) => println!("eps0={e:.16e}"),
        None => println!("eps0=-"),
    }
    println!("online_cpu_seconds={:.6}", report.online_cpu_seconds);
    println!("offline_cpu_seconds={:.6}", report.offline_cpu_seconds);
}

fn cmd_run(args: &CaseArgs) -> Result<()> {
    let prep = prepare(args.resolve()?)?;
    let result = run_case(&prep)?;
    let cfg = &prep.config;
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output dir {}", cfg.output_dir.display()))?;
    let variant = cfg.variant.as_str();
    FieldDump::new(cfg.nx, cfg.ny, 0.0, variant, result.initial_global.clone())?
        .write(&cfg.output_dir.join(format!("initial_{}.txt", cfg.coupling)))?;
    FieldDump::new(cfg.nx, cfg.ny, cfg.t_final, variant, result.final_global.clone())?
        .write(&cfg.output_dir.join(format!("final_{}.txt", cfg.coupling)))?;
    print_report(&prep, &result.report);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let prep = prepare(args.case.resolve()?)?;
    let result = sweep_basis(&prep, &args.sizes, (args.window_lo, args.window_hi))?;
    let csv = to_csv(&result);
    std::fs::create_dir_all(&prep.config.output_dir)?;
    let path = prep.config.output_dir.join("sweep.csv");
    std::fs::write(&path, &csv)
        .with_context(|| format!("cannot write {}", path.display()))?;
    print!("{csv}");
    match result.slope {
        Some(s) => println!(
            "slope={:.6} over avg_n_r in [{}, {}]",
            s, result.window.0, result.window.1
        ),
        None => println!(
            "slope=- (fewer than two sweep points inside [{}, {}])",
            result.window.0, result.window.1
        ),
    }
    Ok(())
}

fn cmd_snapshots(args: &CaseArgs) -> Result<()> {
    let prep = prepare(args.resolve()?)?;
    let training = train(&prep)?;
    let bases = compute_all_bases(&prep, &training)?;
    let dir = prep
        .config
        .basis_dir
        .clone()
        .unwrap_or_else(|| prep.config.output_dir.clone());
    save_bases(&bases, &dir)?;
    println!("snapshots_per_subdomain={}", prep.n_snapshots);
    for basis in [&bases.left, &bases.right, &bases.global].into_iter().flatten() {
        println!(
            "basis subdomain={} modes={} file={}",
            basis.subdomain,
            basis.n_r(),
            dir.join(ivr_bench::context::basis_file_name(basis.subdomain))
                .display()
        );
    }
    println!("training_seconds={:.6}", training.online_seconds);
    println!("svd_seconds={:.6}", bases.svd_seconds);
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let candidate = FieldDump::read(&args.candidate)?;
    let reference = FieldDump::read(&args.reference)?;
    let initial = FieldDump::read(&args.initial)?;
    for (name, dump) in [("reference", &reference), ("initial", &initial)] {
        if (dump.nx, dump.ny) != (candidate.nx, candidate.ny) {
            bail!(
                "{name} dump is on a {}x{} grid but the candidate is {}x{}",
                dump.nx,
                dump.ny,
                candidate.nx,
                candidate.ny
            );
        }
    }
    let (eps, eps0) = compute_errors(&candidate.values, &reference.values, &initial.values);
    println!("eps={eps:.16e}");
    println!("eps0={eps0:.16e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Snapshots(args) => cmd_snapshots(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
