//! CSV writers. Floats use Rust's shortest round-trip formatting, so the
//! files are byte-identical for identical inputs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::filter::FilterKind;
use crate::scenario::{MonteCarlo, RunRecord, Summary};

pub const RECORDS_HEADER: &str = "run,filter,k,n_true,n_hat,ospa,ospa_loc,ospa_card,n_components,wall_ms";
pub const STATES_HEADER: &str = "run,filter,k,target_slot,rx,ry,rz,vx,vy,vz";
pub const SUMMARY_HEADER: &str =
    "filter,k,n_runs,n_true,mean_n_hat,mean_ospa,mean_ospa_loc,mean_ospa_card,mean_components";
pub const EFFICIENCY_HEADER: &str = "filter,n_runs,n_failed,particles_per_step,mean_components,total_seconds,mean_run_seconds";

/// Whether measured wall-clock time goes into the per-step records.
/// Timing makes the records nondeterministic, so it is opt-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    #[default]
    Omit,
    Include,
}

pub fn records_csv(runs: &[RunRecord], timing: Timing) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in runs {
        for s in &r.steps {
            let wall = match timing {
                Timing::Omit => String::new(),
                Timing::Include => format!("{:.3}", s.wall.as_secs_f64() * 1e3),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.run,
                r.filter,
                s.k,
                s.n_true,
                s.n_hat,
                s.ospa.total,
                s.ospa.localization,
                s.ospa.cardinality,
                s.n_components,
                wall
            );
        }
    }
    out
}

pub fn states_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from(STATES_HEADER);
    out.push('\n');
    for r in runs {
        for s in &r.steps {
            for (slot, x) in s.estimates.iter().enumerate() {
                let _ = write!(out, "{},{},{},{}", r.run, r.filter, s.k, slot);
                for v in x.iter() {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn summary_csv(summaries: &[&Summary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for sm in summaries {
        for s in &sm.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                sm.filter,
                s.k,
                sm.n_runs,
                s.n_true,
                s.mean_n_hat,
                s.mean_ospa,
                s.mean_ospa_loc,
                s.mean_ospa_card,
                s.mean_components
            );
        }
    }
    out
}

/// Cost table: components or particles carried per step and wall time.
pub fn efficiency_csv(summaries: &[&Summary], particles_per_step: usize) -> String {
    let mut out = String::from(EFFICIENCY_HEADER);
    out.push('\n');
    for sm in summaries {
        let particles = match sm.filter {
            FilterKind::Gm => String::new(),
            FilterKind::Smc | FilterKind::Engm => particles_per_step.to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6}",
            sm.filter,
            sm.n_runs,
            sm.n_failed,
            particles,
            sm.mean_components,
            sm.total_wall.as_secs_f64(),
            sm.mean_run_seconds()
        );
    }
    out
}

/// Side-by-side per-step means for the filters in `summaries`.
pub fn comparison_csv(summaries: &[&Summary]) -> String {
    let mut out = String::from("k,n_true");
    for col in ["ospa", "n_hat", "components"] {
        for sm in summaries {
            let _ = write!(out, ",{}_{col}", sm.filter);
        }
    }
    out.push('\n');
    let Some(first) = summaries.first() else { return out };
    for (i, s) in first.steps.iter().enumerate() {
        let _ = write!(out, "{},{}", s.k, s.n_true);
        for sm in summaries {
            let _ = write!(out, ",{}", sm.steps[i].mean_ospa);
        }
        for sm in summaries {
            let _ = write!(out, ",{}", sm.steps[i].mean_n_hat);
        }
        for sm in summaries {
            let _ = write!(out, ",{}", sm.steps[i].mean_components);
        }
        out.push('\n');
    }
    out
}

pub fn failures_text(results: &[&MonteCarlo]) -> String {
    let mut out = String::new();
    for mc in results {
        for f in &mc.failures {
            let _ = writeln!(out, "{} run {}: {}", mc.filter, f.run, f.error);
        }
    }
    out
}

/// Writes the standard file set for one or more Monte Carlo results.
pub fn write_outputs(
    dir: &Path,
    results: &[&MonteCarlo],
    config_toml: &str,
    metadata: &str,
    particles_per_step: usize,
    timing: Timing,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for mc in results {
        let name = mc.filter.name();
        fs::write(dir.join(format!("records_{name}.csv")), records_csv(&mc.runs, timing))?;
        fs::write(dir.join(format!("states_{name}.csv")), states_csv(&mc.runs))?;
        fs::write(dir.join(format!("summary_{name}.csv")), summary_csv(&[&mc.summary]))?;
    }
    let summaries: Vec<&Summary> = results.iter().map(|m| &m.summary).collect();
    fs::write(dir.join("efficiency.csv"), efficiency_csv(&summaries, particles_per_step))?;
    if summaries.len() > 1 {
        fs::write(dir.join("comparison.csv"), comparison_csv(&summaries))?;
    }
    fs::write(dir.join("failures.txt"), failures_text(results))?;
    fs::write(dir.join("config.toml"), config_toml)?;
    fs::write(dir.join("metadata.txt"), metadata)?;
    Ok(())
}
