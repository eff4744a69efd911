//! Argument parsing and dispatch for the `latent-causal` binary.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
//! Every stochastic subcommand requires `--seed`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use latent_causal::dynamics::ConsensusNetwork;
use latent_causal::experiments::{
    fig1_csv, nonlinear_csv, run_fig1, run_intro_averaged, run_nonlinear_with, Fig1Config,
};
use latent_causal::{io, ConsensusParams};
use nalgebra::DVector;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version output requested; not an error for the caller.
    #[error("{0}")]
    Display(String),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "latent-causal", version, about = "1-step causal structure recovery with latent states")]
struct Cli {
    #[command(subcommand)]
    command: CliInvocation,
}

/// A parsed and validated command line.
#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum CliInvocation {
    /// Simulate a latent linear system loaded from a system file.
    Simulate(SimulateArgs),
    /// Sample a random consensus network and write its system file.
    GenConsensus(GenConsensusArgs),
    /// Fit a VAR model to a trajectory.
    Fit(FitArgs),
    /// Threshold the lag-1 coefficients of a fit into a support matrix.
    Recover(RecoverArgs),
    /// Estimate a conditional mutual information from a sample CSV.
    Cmi(CmiArgs),
    /// Lag-1 fit on the observed pair of the latent counter-example.
    ExpIntro(ExpIntroArgs),
    /// Support-recovery error versus lag over random consensus networks.
    ExpFig1(ExpFig1Args),
    /// CMI asymmetry on the three-state nonlinear system.
    ExpNonlinear(ExpNonlinearArgs),
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub steps: usize,
    /// Comma-separated initial observed state; zeros when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct GenConsensusArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub q: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_tries: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also simulate this many steps and write the trajectory.
    #[arg(long, requires = "traj_out")]
    pub steps: Option<usize>,
    #[arg(long, requires = "steps")]
    pub traj_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub lag: usize,
    /// Rows skipped before the first target; defaults to the lag.
    #[arg(long)]
    pub drop_prefix: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct CmiArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Columns of X, as 0-based indices or header labels.
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<String>,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ExpIntroArgs {
    #[arg(long = "T")]
    pub trajectory_len: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub noise_var: f64,
    /// Number of consecutive seeds averaged, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ExpFig1Args {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// One or more comma-separated p values.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub p: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2: f64,
    #[arg(long = "T")]
    pub trajectory_len: usize,
    #[arg(long)]
    pub instances: usize,
    /// Lags as `start:end` (inclusive) and/or comma-separated values.
    #[arg(long, value_parser = parse_lags)]
    pub lags: LagList,
    /// Support threshold; defaults to a/2.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_tries: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ExpNonlinearArgs {
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = latent_causal::experiments::NONLINEAR_NOISE_VAR, allow_negative_numbers = true)]
    pub noise_var: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagList(pub Vec<usize>);

/// Expands `1:4,7` into `[1, 2, 3, 4, 7]`.
pub fn parse_lags(s: &str) -> Result<LagList, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let mut out = Vec::new();
    for part in s.split(',') {
        match part.split_once(':') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty lag range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(LagList(out))
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid value for '--{flag}': {msg}"))
}

fn consensus_params(
    n: usize,
    m: usize,
    p: f64,
    q: f64,
    a: f64,
    b: f64,
    sigma2: f64,
    max_tries: usize,
) -> Result<ConsensusParams, CliError> {
    let params = ConsensusParams { n, m, p, q, a, b, sigma2, max_tries };
    let checks: [(&str, bool, &str); 7] = [
        ("n", n >= 1, "must be >= 1"),
        ("p", (0.0..=0.5).contains(&p), "must lie in [0, 0.5]"),
        ("q", (0.0..=0.5).contains(&q), "must lie in [0, 0.5]"),
        ("a", a > 0.0 && a.is_finite(), "must be > 0"),
        ("b", b > 0.0 && b.is_finite(), "must be > 0"),
        ("sigma2", sigma2 >= 0.0 && sigma2.is_finite(), "must be >= 0"),
        ("max-tries", max_tries >= 1, "must be >= 1"),
    ];
    for (flag, ok, msg) in checks {
        if !ok {
            return Err(usage(flag, msg));
        }
    }
    Ok(params)
}

impl CliInvocation {
    fn validate(&self) -> Result<(), CliError> {
        match self {
            CliInvocation::Simulate(a) => {
                if a.steps == 0 {
                    return Err(usage("steps", "must be >= 1"));
                }
            }
            CliInvocation::GenConsensus(a) => {
                consensus_params(a.n, a.m, a.p, a.q, a.a, a.b, a.sigma2, a.max_tries)?;
                if a.steps == Some(0) {
                    return Err(usage("steps", "must be >= 1"));
                }
            }
            CliInvocation::Fit(a) => {
                if a.lag == 0 {
                    return Err(usage("lag", "must be >= 1"));
                }
            }
            CliInvocation::Recover(a) => {
                if !(a.threshold >= 0.0 && a.threshold.is_finite()) {
                    return Err(usage("threshold", "must be >= 0"));
                }
            }
            CliInvocation::Cmi(a) => {
                if a.k == 0 {
                    return Err(usage("k", "must be >= 1"));
                }
            }
            CliInvocation::ExpIntro(a) => {
                if a.trajectory_len < latent_causal::experiments::INTRO_MIN_LEN {
                    return Err(usage("T", format!("must be >= {}", latent_causal::experiments::INTRO_MIN_LEN)));
                }
                if !(a.noise_var >= 0.0 && a.noise_var.is_finite()) {
                    return Err(usage("noise-var", "must be >= 0"));
                }
                if a.seeds == 0 {
                    return Err(usage("seeds", "must be >= 1"));
                }
            }
            CliInvocation::ExpFig1(a) => {
                fig1_config(a)?;
            }
            CliInvocation::ExpNonlinear(a) => {
                if a.k == 0 {
                    return Err(usage("k", "must be >= 1"));
                }
                if a.samples <= a.k {
                    return Err(usage("samples", "must exceed --k"));
                }
                if !(a.noise_var >= 0.0 && a.noise_var.is_finite()) {
                    return Err(usage("noise-var", "must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Path of the primary output file.
    pub fn out_path(&self) -> &Path {
        match self {
            CliInvocation::Simulate(a) => &a.out,
            CliInvocation::GenConsensus(a) => &a.out,
            CliInvocation::Fit(a) => &a.out,
            CliInvocation::Recover(a) => &a.out,
            CliInvocation::Cmi(a) => &a.out,
            CliInvocation::ExpIntro(a) => &a.out,
            CliInvocation::ExpFig1(a) => &a.out,
            CliInvocation::ExpNonlinear(a) => &a.out,
        }
    }
}

fn fig1_config(a: &ExpFig1Args) -> Result<Fig1Config, CliError> {
    let p0 = a.p.first().copied().unwrap_or(0.1);
    let consensus = consensus_params(a.n, a.m, p0, a.q, a.a, a.b, a.sigma2, a.max_tries)?;
    if a.p.is_empty() || a.p.iter().any(|&p| !(p > 0.0 && p < 0.5)) {
        return Err(usage("p", "every value must lie in (0, 0.5)"));
    }
    if a.trajectory_len == 0 {
        return Err(usage("T", "must be >= 1"));
    }
    if a.instances == 0 {
        return Err(usage("instances", "must be >= 1"));
    }
    if a.lags.0.is_empty() || a.lags.0[0] == 0 || a.lags.0.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("lags", "must be ascending values >= 1"));
    }
    let threshold = a.threshold.unwrap_or(a.a / 2.0);
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(usage("threshold", "must be >= 0"));
    }
    Ok(Fig1Config {
        consensus,
        trajectory_len: a.trajectory_len,
        instances: a.instances,
        lag_values: a.lags.0.clone(),
        p_values: a.p.clone(),
        threshold,
        base_seed: a.seed,
    })
}

/// Parses `argv` (including the program name) strictly: unknown flags,
/// missing required flags and out-of-range values are usage errors.
pub fn parse_args<I, T>(argv: I) -> Result<CliInvocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Display(e.to_string()),
            _ => {
                let text = e.to_string();
                let head: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
                CliError::Usage(head.join(" ").trim_start_matches("error: ").to_owned())
            }
        }
    })?;
    cli.command.validate()?;
    Ok(cli.command)
}

#[derive(Debug, Error)]
enum RunError {
    #[error(transparent)]
    Core(#[from] latent_causal::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

/// Writes `contents` to a temporary file beside `path` and renames it into
/// place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| RunError::File { path: path.to_owned(), source })
}

struct Output {
    path: PathBuf,
    text: String,
}

impl Output {
    fn new(path: &Path, text: String) -> Self {
        Self { path: path.to_owned(), text }
    }
}

fn resolve_columns(samples: &latent_causal::SampleSet, specs: &[String]) -> Result<Vec<usize>, RunError> {
    specs
        .iter()
        .map(|s| {
            samples
                .column_index(s)
                .or_else(|| s.parse::<usize>().ok().filter(|&i| i < samples.dim()))
                .ok_or_else(|| RunError::Input(format!("unknown column {s:?}")))
        })
        .collect()
}

fn run(inv: &CliInvocation) -> Result<Vec<Output>, RunError> {
    let outputs = match inv {
        CliInvocation::Simulate(a) => {
            let sys = io::read_system(&read_file(&a.system)?)?;
            let x0 = match &a.x0 {
                Some(v) => DVector::from_vec(v.clone()),
                None => DVector::zeros(sys.n()),
            };
            let traj = latent_causal::simulate_linear(&sys, a.steps, &x0, a.seed)?;
            vec![Output::new(&a.out, io::write_trajectory(&traj))]
        }
        CliInvocation::GenConsensus(a) => {
            let params = consensus_params(a.n, a.m, a.p, a.q, a.a, a.b, a.sigma2, a.max_tries)
                .map_err(|e| RunError::Input(e.to_string()))?;
            let net = ConsensusNetwork::sample(&params, a.seed)?;
            let mut outs = vec![Output::new(&a.out, io::write_system(&net.system))];
            if let (Some(steps), Some(path)) = (a.steps, &a.traj_out) {
                let traj = latent_causal::simulate_linear(&net.system, steps, &DVector::zeros(a.n), a.seed)?;
                outs.push(Output::new(path, io::write_trajectory(&traj)));
            }
            outs
        }
        CliInvocation::Fit(a) => {
            let traj = io::read_trajectory(&read_file(&a.traj)?)?;
            let fit = latent_causal::fit_var(&traj, a.lag, a.drop_prefix.unwrap_or(a.lag))?;
            if fit.degenerate {
                eprintln!("warning: regressors are rank deficient; using the minimum-norm solution");
            }
            vec![Output::new(&a.out, io::write_var_fit(&fit))]
        }
        CliInvocation::Recover(a) => {
            let fit = io::read_var_fit(&read_file(&a.fit)?)?;
            let support = latent_causal::recover_support(&fit, a.threshold);
            vec![Output::new(&a.out, support.to_string())]
        }
        CliInvocation::Cmi(a) => {
            let samples = io::read_sample_set(&read_file(&a.samples)?)?;
            let (x, y, z) = (
                resolve_columns(&samples, &a.x)?,
                resolve_columns(&samples, &a.y)?,
                resolve_columns(&samples, &a.z)?,
            );
            let est = latent_causal::cmi_knn(&samples, &x, &y, &z, a.k)?;
            let text = format!("{}\n{}\n", latent_causal::CmiEstimate::CSV_HEADER, est.to_csv_row());
            vec![Output::new(&a.out, text)]
        }
        CliInvocation::ExpIntro(a) => {
            let est = run_intro_averaged(a.trajectory_len, a.noise_var, a.seed, a.seeds)?;
            vec![Output::new(&a.out, io::write_matrix(&est))]
        }
        CliInvocation::ExpFig1(a) => {
            let config = fig1_config(a).map_err(|e| RunError::Input(e.to_string()))?;
            let points = run_fig1(&config)?;
            vec![Output::new(&a.out, fig1_csv(&points))]
        }
        CliInvocation::ExpNonlinear(a) => {
            let (first, second) = run_nonlinear_with(a.samples, a.k, a.noise_var, a.seed)?;
            vec![Output::new(&a.out, nonlinear_csv(&first, &second))]
        }
    };
    for out in &outputs {
        write_atomic(&out.path, &out.text)
            .map_err(|source| RunError::File { path: out.path.clone(), source })?;
    }
    Ok(outputs)
}

/// Runs a validated invocation, printing a one-line summary on success and
/// a single `error:` line on failure. Returns the process exit status.
pub fn dispatch(inv: &CliInvocation) -> i32 {
    let start = Instant::now();
    match run(inv) {
        Ok(outputs) => {
            let elapsed = start.elapsed().as_secs_f64();
            for out in &outputs {
                println!("wrote {} rows to {} in {elapsed:.3}s", out.text.lines().count(), out.path.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("latent-causal").chain(s.split_whitespace()).map(String::from).collect()
    }

    #[test]
    fn fig1_full_sweep_invocation() {
        let inv = parse_args(args(
            "exp-fig1 --n 10 --m 10 --p 0.1 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1 --T 10000 \
             --instances 50 --lags 1:12 --seed 7 --out fig1.csv",
        ))
        .unwrap();
        let CliInvocation::ExpFig1(a) = &inv else { panic!("{inv:?}") };
        let config = fig1_config(a).unwrap();
        assert_eq!(config.lag_values, (1..=12).collect::<Vec<_>>());
        assert_eq!(config.p_values, vec![0.1]);
        assert_eq!(config.threshold, 0.1);
        assert_eq!(config.trajectory_len, 10_000);
        assert_eq!(config.base_seed, 7);
        assert_eq!(inv.out_path(), Path::new("fig1.csv"));
    }

    #[test]
    fn lag_zero_is_usage_error() {
        let err = parse_args(args("fit --traj t.csv --lag 0 --out f.txt")).unwrap_err();
        let CliError::Usage(msg) = err else { panic!() };
        assert!(msg.contains("--lag"), "{msg}");
    }

    #[test]
    fn nonlinear_invocation() {
        let inv = parse_args(args("exp-nonlinear --samples 1000 --k 10 --seed 1 --out nl.csv")).unwrap();
        assert!(matches!(inv, CliInvocation::ExpNonlinear(ExpNonlinearArgs { samples: 1000, k: 10, seed: 1, .. })));
    }

    #[test]
    fn seed_is_required_for_stochastic_commands() {
        for cmd in [
            "simulate --system s.txt --steps 10 --out t.csv",
            "gen-consensus --n 3 --m 2 --p 0.1 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1 --out s.txt",
            "exp-intro --T 1000 --out i.txt",
            "exp-nonlinear --samples 100 --k 5 --out nl.csv",
            "exp-fig1 --n 3 --m 2 --p 0.1 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1 --T 500 --instances 2 --lags 1:2 --out f.csv",
        ] {
            let err = parse_args(args(cmd)).unwrap_err();
            let CliError::Usage(msg) = err else { panic!("{cmd}") };
            assert!(msg.contains("--seed"), "{cmd}: {msg}");
        }
    }

    #[test]
    fn unknown_flags_and_bad_ranges() {
        assert!(matches!(
            parse_args(args("fit --traj t.csv --lag 1 --out f.txt --verbose")),
            Err(CliError::Usage(_))
        ));
        for (cmd, flag) in [
            ("gen-consensus --n 3 --m 2 --p 0.7 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1 --seed 1 --out s.txt", "--p"),
            ("exp-intro --T 10 --seed 1 --out i.txt", "--T"),
            ("exp-nonlinear --samples 5 --k 10 --seed 1 --out nl.csv", "--samples"),
            ("recover --fit f.txt --threshold -1 --out s.txt", "--threshold"),
            ("cmi --samples s.csv --x 0 --y 1 --k 0 --out c.csv", "--k"),
            ("exp-fig1 --n 3 --m 2 --p 0.1 --q 0.1 --a 0.2 --b 0.7 --sigma2 0.1 --T 500 --instances 2 --lags 3:1 --seed 1 --out f.csv", "--lags"),
        ] {
            let Err(CliError::Usage(msg)) = parse_args(args(cmd)) else { panic!("{cmd}") };
            assert!(msg.contains(flag), "{cmd}: {msg}");
        }
    }

    #[test]
    fn help_is_not_an_error() {
        assert!(matches!(parse_args(args("--help")), Err(CliError::Display(_))));
    }

    #[test]
    fn lag_syntax() {
        assert_eq!(parse_lags("1:3,7").unwrap().0, vec![1, 2, 3, 7]);
        assert_eq!(parse_lags("5").unwrap().0, vec![5]);
        assert!(parse_lags("4:2").is_err());
        assert!(parse_lags("a").is_err());
    }
}
