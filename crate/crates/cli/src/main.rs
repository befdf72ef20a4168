use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hydrasim::harness::{self, Execution, SweepSpec};
use hydrasim::sim::oracle::{run_equivalence, OracleConfig};
use hydrasim::sim::{RunStatus, Scenario};

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "hydrasim", version, about = "Heavy-duty manipulator contact simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV log and JSON summary.
    Run {
        /// Scenario file or bundled scenario name.
        scenario: String,
        #[arg(long, env = "HYDRASIM_OUT", default_value = "out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a parameter sweep and write one summary row per grid value.
    Sweep {
        spec: PathBuf,
        #[arg(long, env = "HYDRASIM_OUT", default_value = "out")]
        out: PathBuf,
        /// Worker count (overrides the spec).
        #[arg(short = 'j', long)]
        jobs: Option<usize>,
        /// Run cells one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Run the built-in invariant suite.
    Check,
    /// Compare the chain observer with the two-link Lagrangian observer.
    Oracle {
        /// Gain of the Lagrangian observer when it should differ from the chain observer.
        #[arg(long)]
        lagrangian_gain: Option<f64>,
        /// Drop the wall so neither observer sees a contact force.
        #[arg(long)]
        no_contact: bool,
    },
}

fn fail(code: u8, err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn cmd_run(scenario: &str, out: PathBuf, seed: Option<u64>) -> ExitCode {
    let mut s = match Scenario::resolve(scenario) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Err(e) = s.validate() {
        return fail(EXIT_CONFIG, e);
    }
    match harness::run_to_dir(&s, &out) {
        Ok((output, files)) => {
            let sum = &output.summary;
            println!("scenario  {}", sum.scenario);
            println!("status    {}", sum.status);
            println!("ticks     {}", sum.ticks);
            println!("rms e_p   {:.6e} m", sum.rms_position_error_m);
            match sum.rho_s {
                Some(rho) => println!("rho       {rho:.6} s"),
                None => println!("rho       undefined"),
            }
            println!("peak f    {:.3} N", sum.peak_estimated_force_n);
            println!("csv       {}", files.csv.display());
            println!("summary   {}", files.summary.display());
            if let RunStatus::Diverged { time, reason } = &output.status {
                eprintln!("diverged at t = {time:.4} s: {reason}");
            }
            ExitCode::from(harness::run_exit_code(&output.status) as u8)
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn cmd_sweep(path: PathBuf, out: PathBuf, jobs: Option<usize>, sequential: bool) -> ExitCode {
    let spec = match SweepSpec::load(&path) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let base = match spec.base_scenario() {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let exec = if sequential {
        Execution::Sequential
    } else {
        match spec.execution() {
            Execution::Parallel { threads } => Execution::Parallel {
                threads: jobs.or(threads),
            },
            e => e,
        }
    };
    let report = match harness::sweep(&base, &spec.parameter, &spec.values, exec) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Err(e) = std::fs::create_dir_all(&out) {
        return fail(EXIT_CONFIG, format!("{}: {e}", out.display()));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let file = out.join(format!("{stem}.sweep.csv"));
    let written = std::fs::File::create(&file).and_then(|f| report.write_csv(std::io::BufWriter::new(f)));
    if let Err(e) = written {
        return fail(EXIT_CONFIG, format!("{}: {e}", file.display()));
    }
    report.write_csv(std::io::stdout().lock()).ok();
    if report.failures() > 0 {
        eprintln!("{} of {} cells failed", report.failures(), report.rows.len());
    }
    ExitCode::SUCCESS
}

fn cmd_check() -> ExitCode {
    let results = harness::check();
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn cmd_oracle(lagrangian_gain: Option<f64>, no_contact: bool) -> ExitCode {
    let mut cfg = OracleConfig {
        contact: !no_contact,
        ..OracleConfig::default()
    };
    if let Some(k) = lagrangian_gain {
        cfg.lagrangian_gain = k;
    }
    let report = match run_equivalence(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    println!("ticks              {}", report.ticks);
    println!("peak contact force {:.3} N", report.peak_contact_force_n);
    println!("max |r| chain      {:.6e}", report.max_chain);
    println!("max |r| lagrangian {:.6e}", report.max_reference);
    println!("max deviation      {:.6e}", report.max_abs_deviation);
    println!("relative deviation {:.6e}", report.relative_deviation);
    if report.passes(harness::EQUIVALENCE_TOLERANCE) {
        println!("PASS");
        ExitCode::SUCCESS
    } else {
        println!("FAIL (tolerance {:e})", harness::EQUIVALENCE_TOLERANCE);
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, seed } => cmd_run(&scenario, out, seed),
        Command::Sweep {
            spec,
            out,
            jobs,
            sequential,
        } => cmd_sweep(spec, out, jobs, sequential),
        Command::Check => cmd_check(),
        Command::Oracle {
            lagrangian_gain,
            no_contact,
        } => cmd_oracle(lagrangian_gain, no_contact),
    }
}
