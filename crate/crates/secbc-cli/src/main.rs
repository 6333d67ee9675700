//! `secbc`: rate regions, Monte Carlo simulation, trace reproduction, and
//! secrecy audits for secure broadcast over erasure channels with feedback.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error. All output is
//! CSV or plain text; every command is deterministic given its inputs. The
//! `SECBC_SEED` environment variable overrides the configured seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use secbc_core::audit::{self, count_observed_encrypted, leak_audit, Conditioning};
use secbc_core::config::{load_config, parse_joint_table, RunConfig};
use secbc_core::harness::{run_trial, run_trials, sweep, GridPoint};
use secbc_core::regions::{
    correlated_outer_bound, eavesdropper_capacity, RateTuple, RegionKind, BISECTION_TOL,
};
use secbc_core::Transcript;

#[derive(Parser)]
#[command(name = "secbc", version, about = "Secure broadcast erasure-channel toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trace an achievable-rate region boundary to CSV.
    Region {
        /// One of: nonsecure, secure, dishonest, dis, correlated.
        #[arg(long)]
        region: String,
        /// Erasure probabilities delta_1,delta_2 (independent models).
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        /// Joint probability table file (selector `correlated`).
        #[arg(long)]
        joint: Option<PathBuf>,
        /// Number of R_1 grid points.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Secrecy capacity against a passive eavesdropper, with reference curves.
    Capacity {
        /// Legitimate receiver's erasure probability.
        #[arg(long)]
        delta: f64,
        /// Explicit eavesdropper erasure probabilities (overrides --grid).
        #[arg(long = "delta-e", value_delimiter = ',')]
        delta_e: Option<Vec<f64>>,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a trial batch from a configuration file; batch statistics as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single trial and list every transmission symbolically.
    Trace {
        #[arg(long)]
        config: PathBuf,
        /// Write the machine-readable transcript here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a serialized transcript: leaked dimensions and decodability.
    Audit {
        #[arg(long)]
        transcript: PathBuf,
        /// Observing receivers, one-based, '+'-joined (e.g. `2` or `1+2`).
        #[arg(long)]
        observers: String,
        /// Target receiver, one-based.
        #[arg(long)]
        target: usize,
        /// `none` or `others-known`.
        #[arg(long, default_value = "none")]
        condition: String,
    },
}

enum AppError {
    Validation(String),
    Runtime(String),
}

impl AppError {
    fn code(&self) -> ExitCode {
        match self {
            AppError::Validation(_) => ExitCode::from(1),
            AppError::Runtime(_) => ExitCode::from(2),
        }
    }
}

fn validation(e: impl std::fmt::Display) -> AppError {
    AppError::Validation(e.to_string())
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), AppError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| AppError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_delta(delta: &[f64]) -> Result<(), AppError> {
    for &d in delta {
        if !(0.0..=1.0).contains(&d) {
            return Err(validation(format!("erasure probability {d} outside [0,1]")));
        }
    }
    Ok(())
}

fn cmd_region(
    region: &str,
    delta: &[f64],
    joint: Option<&Path>,
    grid: usize,
    out: Option<&Path>,
) -> Result<(), AppError> {
    check_delta(delta)?;
    if grid < 2 {
        return Err(validation("grid must have at least 2 points"));
    }
    let (label, inside): (String, Box<dyn Fn(f64, f64) -> bool>) = if region == "correlated" {
        let path = joint.ok_or_else(|| validation("selector `correlated` needs --joint"))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
        let model = parse_joint_table(&text, 2, &path.display().to_string()).map_err(validation)?;
        let f = move |r1: f64, r2: f64| {
            RateTuple::new(vec![r1, r2])
                .ok()
                .and_then(|r| correlated_outer_bound(&r, &model).ok())
                .map(|v| v.inside)
                .unwrap_or(false)
        };
        ("correlated".to_string(), Box::new(f))
    } else {
        let kind = RegionKind::parse(region).map_err(validation)?;
        if delta.len() != 2 {
            return Err(validation("boundary tracing needs exactly two --delta values"));
        }
        let (d1, d2) = (delta[0], delta[1]);
        (kind.name().to_string(), Box::new(move |r1, r2| kind.contains(r1, r2, d1, d2)))
    };

    // Largest R_1 with R_2 = 0, then a uniform R_1 grid up to it.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if inside(mid, 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r1_grid: Vec<f64> = (0..grid).map(|i| lo * i as f64 / (grid - 1) as f64).collect();
    let points = secbc_core::regions::boundary_trace(|r1, r2| inside(r1, r2), &r1_grid);

    let deltas = delta.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";");
    let mut csv = String::from("region,deltas,r_1,r_2_max\n");
    for (r1, r2) in points {
        csv.push_str(&format!("{label},{deltas},{r1:.9},{r2:.9}\n"));
    }
    emit(&csv, out)
}

fn cmd_capacity(
    delta: f64,
    delta_e: Option<Vec<f64>>,
    grid: usize,
    out: Option<&Path>,
) -> Result<(), AppError> {
    check_delta(&[delta])?;
    let points = match delta_e {
        Some(p) => {
            check_delta(&p)?;
            p
        }
        None => {
            if grid < 2 {
                return Err(validation("grid must have at least 2 points"));
            }
            (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect()
        }
    };
    let mut csv = String::from("delta_e,c_e,no_feedback,secret_key\n");
    for de in points {
        let c_e = eavesdropper_capacity(delta, de);
        let no_fb = (de - delta).max(0.0);
        let sk = de * (1.0 - delta);
        csv.push_str(&format!("{de:.6},{c_e:.6},{no_fb:.6},{sk:.6}\n"));
    }
    emit(&csv, out)
}

fn load(path: &Path) -> Result<RunConfig, AppError> {
    let mut run = load_config(path).map_err(validation)?;
    if let Ok(seed) = std::env::var("SECBC_SEED") {
        run.trial.seed = seed
            .parse()
            .map_err(|e| validation(format!("SECBC_SEED: {e}")))?;
    }
    Ok(run)
}

fn cmd_simulate(config: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let run = load(config)?;
    let csv = sweep(&run.trial, &[GridPoint::identity()])
        .map_err(|e| AppError::Runtime(e.to_string()))?;
    let stats = run_trials(&run.trial).map_err(|e| AppError::Runtime(e.to_string()))?;

    let out = out.or(run.out.as_deref());
    emit(&csv, out)?;
    println!(
        "{} scheme, {} trials, mean length {:.1}",
        run.trial.scheme.name(),
        stats.trials,
        stats.mean_tx
    );
    for j in 0..stats.k {
        println!(
            "receiver {}: error rate {:.4} ± {:.4}, achieved rate {:.6}, keys {:.1}/{:.1}, \
             dishonesty verdicts {:.4}",
            j + 1,
            stats.error_rate[j],
            stats.error_half_width[j],
            stats.achieved_rate[j],
            stats.mean_keys_consumed[j],
            stats.mean_keys_generated[j],
            stats.verdict_rate[j],
        );
    }
    for a in &stats.audits {
        println!(
            "audit observers mask {} target {} ({}): mean leaked {:.4}, max {}, zero in {:.4}",
            a.spec.observer_mask,
            a.spec.target + 1,
            a.spec.conditioning.name(),
            a.mean_leaked,
            a.max_leaked,
            a.zero_rate,
        );
    }
    Ok(())
}

fn cmd_trace(config: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let run = load(config)?;
    if run.trial.trials != 1 {
        return Err(validation("trace runs a single trial; set trials = 1"));
    }
    let o = run_trial(&run.trial, 0).map_err(|e| AppError::Runtime(e.to_string()))?;
    let t = &o.transcript;
    for r in &t.records {
        println!(
            "X_{:<3} {:<8} {:<30} state={} ack={}",
            r.index + 1,
            r.phase.to_string(),
            r.expr.to_text(),
            r.state.to_text(t.k),
            r.ack.to_text(t.k),
        );
    }
    for j in 0..t.k {
        println!(
            "receiver {}: decoded={} error={} dishonest={} keys {}/{}",
            j + 1,
            o.report.decoded[j],
            o.report.error[j],
            o.report.dishonest[j],
            o.report.keys_consumed[j],
            o.report.keys_generated[j],
        );
    }
    if let Some(path) = out {
        std::fs::write(path, t.to_text())
            .map_err(|e| AppError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_audit(
    transcript: &Path,
    observers: &str,
    target: usize,
    condition: &str,
) -> Result<(), AppError> {
    let text = std::fs::read_to_string(transcript)
        .map_err(|e| validation(format!("cannot read {}: {e}", transcript.display())))?;
    let t = Transcript::from_text(&text).map_err(validation)?;
    let mut mask = 0u32;
    for obs in observers.split('+') {
        let r: usize = obs
            .trim()
            .parse()
            .map_err(|e| validation(format!("bad observer {obs:?}: {e}")))?;
        if r == 0 || r > t.k {
            return Err(validation(format!("observer {r} outside 1..={}", t.k)));
        }
        mask |= 1 << (r - 1);
    }
    if target == 0 || target > t.k {
        return Err(validation(format!("target {target} outside 1..={}", t.k)));
    }
    let conditioning = Conditioning::parse(condition).map_err(validation)?;
    let field = t.field();
    let a = leak_audit(&field, &t, mask, target - 1, conditioning);
    println!("{}", audit::csv_header());
    println!("{}", a.csv_row());
    println!("receiver,decodable");
    for j in 0..t.k {
        println!("{},{}", j + 1, audit::check_decodable(&field, &t, j));
    }
    // Distinct encrypted packets of each receiver seen by each observer.
    println!("observer,owner,observed_encrypted");
    for obs in 0..t.k {
        if mask & (1 << obs) == 0 {
            continue;
        }
        for owner in 0..t.k {
            println!("{},{},{}", obs + 1, owner + 1, count_observed_encrypted(&t, obs, owner));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.cmd {
        Cmd::Region { region, delta, joint, grid, out } => {
            cmd_region(&region, &delta, joint.as_deref(), grid, out.as_deref())
        }
        Cmd::Capacity { delta, delta_e, grid, out } => {
            cmd_capacity(delta, delta_e, grid, out.as_deref())
        }
        Cmd::Simulate { config, out } => cmd_simulate(&config, out.as_deref()),
        Cmd::Trace { config, out } => cmd_trace(&config, out.as_deref()),
        Cmd::Audit { transcript, observers, target, condition } => {
            cmd_audit(&transcript, &observers, target, &condition)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = match &e {
                AppError::Validation(m) | AppError::Runtime(m) => m,
            };
            eprintln!("error: {message}");
            e.code()
        }
    }
}
