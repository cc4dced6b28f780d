use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use forchflow_core::config::Config;
use forchflow_core::constitutive::suite::run_suite;
use forchflow_core::constitutive::PotentialTable;
use forchflow_core::energy::{sandwich_spot_check, trace_probe, CheckStatus, ConstantsLedger};
use forchflow_core::error::Error;
use forchflow_core::grid::StructuredGrid;
use forchflow_core::output::{
    self, format_checks_csv, format_checks_text, format_constants, format_gronwall, format_snapshot, ledger_checks,
    parse_checks_csv, read_constants, read_ledger, CheckRecord, LedgerWriter, Manifest, RunDir, RunStatus,
};
use forchflow_core::solver::mms::{convergence_study, ConvergenceReport, LadderLevel, Refinement};
use forchflow_core::solver::{run, SimulationState};

/// Simulator for two interacting populations with Forchheimer-type
/// degenerate diffusion.
#[derive(Parser)]
#[command(name = "forchflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides FORCHFLOW_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reject inadmissible parameters and fail on violated bound checks.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots, the energy ledger and checks.
    Run,
    /// Check the constitutive law on sampled gradient magnitudes.
    VerifyConstitutive,
    /// Run manufactured-solution convergence ladders.
    Mms {
        #[arg(long, value_enum, default_value_t = Ladder::Both)]
        ladder: Ladder,
    },
    /// Re-run the energy bound checks on the ledger of a finished run.
    EnergyCheck {
        /// Run directory (defaults to the output directory).
        run_dir: Option<PathBuf>,
    },
    /// Print the resolved configuration, defaults included.
    DumpConfig,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ladder {
    Space,
    Time,
    Both,
}

/// Outcome classes mapped to process exit codes.
enum Failure {
    Config(String),
    Numeric(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Check(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) | Failure::Check(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numeric(_) | Error::Step { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("forchflow: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run => cmd_run(cli, &config),
        Command::VerifyConstitutive => cmd_verify(&config),
        Command::Mms { ladder } => cmd_mms(cli, &config, *ladder),
        Command::EnergyCheck { run_dir } => {
            let dir = run_dir
                .clone()
                .unwrap_or_else(|| output::resolve_out_dir(cli.out.as_deref(), &config.io.out_dir));
            cmd_energy_check(&dir)
        }
        Command::DumpConfig => {
            config.resolve(cli.strict)?;
            print!("{}", config.dump()?);
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn cmd_run(cli: &Cli, config: &Config) -> Result<(), Failure> {
    let setup = Instant::now();
    let resolved = config.resolve(cli.strict)?;
    let params = &resolved.params;
    let grid = StructuredGrid::new(&resolved.grid).map_err(Error::from)?;
    let target = output::resolve_out_dir(cli.out.as_deref(), &config.io.out_dir);
    let dir = RunDir::create(&target)?;
    let config_path = cli.config.as_ref().map_or("<defaults>".into(), |p| p.display().to_string());
    let mut manifest = Manifest::new(&config_path, &target, config.clone());
    dir.write(output::MANIFEST_FILE, &manifest.to_toml()?)?;

    let state = SimulationState::new(
        config.initial.u.sample(&grid),
        config.initial.v.sample(&grid),
        params.lambda,
    );
    let bounds = params
        .poly
        .estimate_bounds(config.energy.xi_max, config.energy.samples)
        .map_err(Error::from)?;
    let potential = PotentialTable::new(&params.poly, config.energy.xi_max).map_err(Error::from)?;
    let mut ledger_out = LedgerWriter::create(&dir.path(output::LEDGER_FILE))?;
    manifest.setup_seconds = setup.elapsed().as_secs_f64();

    let started = Instant::now();
    let every = config.io.snapshot_every;
    let mut snapshots = 0usize;
    let mut steps = 0usize;
    let mut sandwich_worst: f64 = 0.0;
    let mut nonmonotone = Vec::new();
    let result = run(
        &grid,
        params,
        &resolved.stepper,
        &bounds,
        state,
        None,
        |s, row, record| {
            ledger_out.push(row)?;
            let last = s.t >= params.t_final;
            let due = match record {
                None => true,
                Some(_) => {
                    steps += 1;
                    last || (every > 0 && steps % every == 0)
                }
            };
            if let Some(r) = record {
                log::info!("t = {:.6}: {} coupling iterations", r.t, r.coupling_iters);
                if r.traces.iter().any(|t| !trace_monotone(t)) {
                    nonmonotone.push(r.t);
                }
            }
            if due {
                dir.write(&output::snapshot_name(snapshots), &format_snapshot(&grid, s))?;
                snapshots += 1;
                sandwich_worst = sandwich_worst.max(sandwich_spot_check(&grid, params, &potential, s)?);
            }
            Ok(())
        },
    );
    manifest.run_seconds = started.elapsed().as_secs_f64();
    manifest.steps = steps;
    manifest.snapshots = snapshots;
    drop(ledger_out);

    let summary = match result {
        Ok(s) => s,
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            dir.write(output::MANIFEST_FILE, &manifest.to_toml()?)?;
            let path = dir.commit()?;
            eprintln!("partial output written to {}", path.display());
            return Err(e.into());
        }
    };

    let constants = &summary.constants;
    dir.write(output::CONSTANTS_FILE, &format_constants(constants)?)?;
    dir.write(output::GRONWALL_FILE, &format_gronwall(&summary.ledger, constants.c3))?;
    let mut checks = ledger_checks(&summary.ledger, constants);
    checks.push(CheckRecord {
        name: "h_sandwich".into(),
        status: if sandwich_worst <= 1e-8 { CheckStatus::Pass } else { CheckStatus::Fail }
            .label()
            .into(),
        margin: 0.0 - sandwich_worst,
        detail: format!("worst relative violation over {snapshots} snapshots"),
    });
    checks.push(CheckRecord {
        name: "coupling_monotone".into(),
        status: if nonmonotone.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail }
            .label()
            .into(),
        margin: 0.0,
        detail: match nonmonotone.first() {
            Some(t) => format!("{} steps with a non-decreasing update; first at t = {t:e}", nonmonotone.len()),
            None => "coupling updates decrease after the first iteration".into(),
        },
    });
    let mut text = format_checks_text(&checks);
    text.push_str(&trace_probe_text(&grid, constants, &summary.final_state, config.energy.trace_eps));
    dir.write(output::CHECKS_CSV_FILE, &format_checks_csv(&checks))?;
    dir.write(output::CHECKS_TEXT_FILE, &text)?;
    manifest.status = RunStatus::Completed;
    dir.write(output::MANIFEST_FILE, &manifest.to_toml()?)?;
    let path = dir.commit()?;

    let iters: Vec<usize> = summary.steps.iter().map(|s| s.coupling_iters).collect();
    println!(
        "completed {} steps to t = {} in {:.2} s",
        summary.steps.len(),
        summary.final_state.t,
        manifest.run_seconds
    );
    if let (Some(min), Some(max)) = (iters.iter().min(), iters.iter().max()) {
        println!("coupling iterations per step: min {min}, max {max}");
    }
    print!("{text}");
    println!("output: {}", path.display());
    let failed: Vec<&str> = checks.iter().filter(|c| c.failed()).map(|c| c.name.as_str()).collect();
    if cli.strict && !failed.is_empty() {
        return Err(Failure::Check(format!("failed checks: {}", failed.join(", "))));
    }
    Ok(())
}

fn trace_monotone(trace: &[f64]) -> bool {
    trace.len() < 3 || trace[1..].windows(2).all(|w| w[1] <= w[0])
}

fn trace_probe_text(
    grid: &StructuredGrid,
    constants: &ConstantsLedger,
    state: &SimulationState,
    eps: f64,
) -> String {
    if !grid.has_robin() {
        return "trace probe: skipped (no exit boundary)\n".into();
    }
    match trace_probe(grid, constants, &state.u, eps) {
        Ok(r) => format!(
            "trace probe at t = {}: lhs {:e}, gradient term {:e}, minimal C {:e}\n",
            state.t, r.lhs, r.gradient_term, r.minimal_c
        ),
        Err(e) => format!("trace probe: not applicable ({e})\n"),
    }
}

fn cmd_verify(config: &Config) -> Result<(), Failure> {
    let poly = config.polynomial()?;
    let report = run_suite(&poly, 1e8, config.energy.suite_points).map_err(Error::from)?;
    print!("{report}");
    let b = poly
        .estimate_bounds(config.energy.xi_max, config.energy.samples)
        .map_err(Error::from)?;
    println!(
        "estimated bounds on [0, {:e}]: a = {}, d1 = {:e}, d2 = {:e}, d3 = {:e}",
        b.xi_max, b.a, b.d1, b.d2, b.d3
    );
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Check("constitutive property suite failed".into()))
    }
}

fn cmd_mms(cli: &Cli, config: &Config, ladder: Ladder) -> Result<(), Failure> {
    let resolved = config.resolve(cli.strict)?;
    let mut params = resolved.params.clone();
    params.t_final = config.mms.t_final;
    let mut failures = Vec::new();
    let mut text = String::new();
    let mut study = |name: &str, levels: &[LadderLevel], r: Refinement, min: Option<f64>| -> Result<(), Failure> {
        let report = convergence_study(&params, &resolved.grid, &resolved.stepper, &config.mms.exact, levels, r)?;
        let block = format!("{name} refinement\n{report}");
        print!("{block}");
        text.push_str(&block);
        if let Some(why) = ladder_failure(&report, min) {
            failures.push(format!("{name}: {why}"));
        }
        Ok(())
    };
    if ladder != Ladder::Time {
        study("space", &config.mms.space, Refinement::Space, config.mms.min_space_order)?;
    }
    if ladder != Ladder::Space {
        study("time", &config.mms.time, Refinement::Time, config.mms.min_time_order)?;
    }
    if let Some(out) = &cli.out {
        let dir = RunDir::create(out)?;
        dir.write("mms.txt", &text)?;
        dir.commit()?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("; ")))
    }
}

fn ladder_failure(report: &ConvergenceReport, min_order: Option<f64>) -> Option<String> {
    if !report.monotone_u() {
        return Some("errors in u do not decrease monotonically".into());
    }
    let min = min_order?;
    let worst = report.orders_u().into_iter().fold(f64::INFINITY, f64::min);
    (!(worst >= min)).then(|| format!("observed order {worst:.3} below {min}"))
}

fn cmd_energy_check(dir: &Path) -> Result<(), Failure> {
    let ledger = read_ledger(&dir.join(output::LEDGER_FILE))?;
    let constants = read_constants(&dir.join(output::CONSTANTS_FILE))?;
    let checks = ledger_checks(&ledger, &constants);
    print!("{}", format_checks_text(&checks));
    let stored_path = dir.join(output::CHECKS_CSV_FILE);
    let mut problems = Vec::new();
    if stored_path.exists() {
        let text = std::fs::read_to_string(&stored_path).map_err(|e| Error::io(&stored_path, e))?;
        let stored = parse_checks_csv(&text, &stored_path)?;
        for c in &checks {
            if let Some(s) = stored.iter().find(|s| s.name == c.name) {
                if s.status != c.status {
                    problems.push(format!("{}: recorded {} but recomputed {}", c.name, s.status, c.status));
                }
            }
        }
        if problems.is_empty() {
            println!("verdicts match {}", stored_path.display());
        }
    }
    problems.extend(checks.iter().filter(|c| c.failed()).map(|c| format!("{} failed", c.name)));
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(problems.join("; ")))
    }
}
