use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use engm_phd::config::{ConfigError, ScenarioConfig};
use engm_phd::output::{write_outputs, Timing};
use engm_phd::scenario::{run_monte_carlo, MonteCarlo, RunError};
use engm_phd::{validate, FilterKind};

#[derive(Parser)]
#[command(name = "engm-phd", version, about = "Multi-target PHD filter experiments on a radar crossing scenario")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo runs of one filter.
    Run {
        #[arg(long, env = "ENGM_PHD_FILTER", default_value = "engm")]
        filter: FilterKind,
        #[command(flatten)]
        common: Common,
    },
    /// All three filters on paired scans, plus a joint comparison table.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Oracle and invariant self-checks.
    Validate,
    /// Writes the default configuration.
    EmitConfig {
        /// Output file; stdout when omitted.
        #[arg(long, env = "ENGM_PHD_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, env = "ENGM_PHD_RUNS", default_value_t = 1)]
    runs: usize,
    /// Master seed; overrides `scenario.seed` from the config.
    #[arg(long, env = "ENGM_PHD_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "ENGM_PHD_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "ENGM_PHD_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "ENGM_PHD_THREADS")]
    threads: Option<usize>,
    /// Record per-step wall time in the records files (makes them nondeterministic).
    #[arg(long, env = "ENGM_PHD_TIMING")]
    timing: bool,
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        match self {
            Failure::Config(m) => {
                eprintln!("error: {m}");
                ExitCode::from(1)
            }
            Failure::Numerical(m) => {
                eprintln!("numerical failure: {m}");
                ExitCode::from(2)
            }
            Failure::Io(m) => {
                eprintln!("i/o error: {m}");
                ExitCode::from(1)
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    let Some(path) = path else { return Ok(ScenarioConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    ScenarioConfig::parse(&text).map_err(|e| match e {
        ConfigError::Parse(m) => Failure::Config(format!("{}: {m}", path.display())),
        other => Failure::Config(format!("{}: {other}", path.display())),
    })
}

fn metadata(config: &ScenarioConfig, seed: u64, runs: usize, filters: &[FilterKind]) -> String {
    let mut s = String::new();
    let names: Vec<&str> = filters.iter().map(|f| f.name()).collect();
    let _ = writeln!(s, "filters = {}", names.join(","));
    let _ = writeln!(s, "runs = {runs}");
    let _ = writeln!(s, "seed = {seed}");
    let _ = writeln!(s, "run_seeds = {}..={}", seed, seed.wrapping_add(runs.saturating_sub(1) as u64));
    let _ = writeln!(s, "paired_scans = true  # every filter sees the same measurements in run r");
    let _ = writeln!(s, "steps = {}", config.steps());
    let _ = writeln!(s, "particle_count = {}", config.scenario.particle_count);
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    s
}

fn experiment(filters: &[FilterKind], common: &Common) -> Result<(), Failure> {
    let config = load_config(common.config.as_deref())?;
    if common.runs == 0 {
        return Err(Failure::Config("--runs must be at least 1".into()));
    }
    let seed = common.seed.unwrap_or(config.scenario.seed);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Config(e.to_string()))?;
    let results: Vec<MonteCarlo> = pool.install(|| {
        filters
            .iter()
            .map(|&kind| run_monte_carlo(&config, kind, seed, common.runs))
            .collect()
    });

    // Configuration problems surface in every run; report them as such.
    for mc in &results {
        if let Some(f) = mc.failures.iter().find(|f| matches!(f.error, RunError::Config(_))) {
            return Err(Failure::Config(f.error.to_string()));
        }
    }
    let refs: Vec<&MonteCarlo> = results.iter().collect();
    let timing = if common.timing { Timing::Include } else { Timing::Omit };
    write_outputs(
        &common.out_dir,
        &refs,
        &config.to_toml(),
        &metadata(&config, seed, common.runs, filters),
        config.scenario.particle_count,
        timing,
    )
    .map_err(|e| Failure::Io(format!("{}: {e}", common.out_dir.display())))?;

    for mc in &results {
        let s = &mc.summary;
        eprintln!(
            "{:>4}: {} runs ok, {} failed, mean OSPA(k>=10) {:.3}, mean cardinality {:.3}, {:.2} s",
            mc.filter.name(),
            s.n_runs,
            s.n_failed,
            s.mean_ospa_over(10..=usize::MAX),
            s.mean_n_hat_over(0..=usize::MAX),
            s.total_wall.as_secs_f64()
        );
    }
    let failed: Vec<String> = results
        .iter()
        .flat_map(|mc| mc.failures.iter().map(move |f| format!("{} run {}: {}", mc.filter, f.run, f.error)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(failed.join("; ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { filter, common } => experiment(&[filter], &common),
        Command::Compare { common } => experiment(&FilterKind::ALL, &common),
        Command::Validate => {
            let checks = validate::run_all();
            for c in &checks {
                match &c.outcome {
                    Ok(note) => println!("PASS {:<32} {note} ({:.2} s)", c.name, c.seconds),
                    Err(why) => println!("FAIL {:<32} {why}", c.name),
                }
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(Failure::Numerical(format!("{failed} self-check(s) failed")))
            }
        }
        Command::EmitConfig { out } => {
            let text = ScenarioConfig::default().to_toml();
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
