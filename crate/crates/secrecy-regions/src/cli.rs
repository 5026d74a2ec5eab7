//! Command-line entry point: ordering checks, region evaluation, code
//! simulation, standalone Fourier-Motzkin elimination, and frontier export.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 hypothesis violation
//! without `--force`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::channel::Terminal;
use crate::codesim::{
    self, build_codebook, build_rate_split, build_time_shared, CodebookSpec, RateSplitSpec,
    SimulationReport, TimeSharedSpec,
};
use crate::geometry::{eliminate, piece_satisfied, RateRegion};
use crate::io::{self, ChannelInput};
use crate::orderings::{check_degraded, check_less_noisy, OrderingBudget};
use crate::regions::{
    common_message_capacity, region_corollary1, region_no_common, region_theorem1,
    region_theorem4, region_theorem5, region_theorem6, sum_secrecy_capacity, CapacityResult,
    RegionError, SearchConfig,
};
use crate::{AuxiliaryChain, BroadcastWiretapChannel, Channel, Distribution, ParallelChannel};

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 2;
const EXIT_HYPOTHESIS: i32 = 3;

#[derive(Parser)]
#[command(
    name = "secrecy-regions",
    version,
    about = "Secrecy capacity regions of multi-receiver wiretap channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a degradedness or less-noisiness claim between two terminals.
    CheckOrder(CheckOrderArgs),
    /// Evaluate a capacity region or scalar capacity.
    ComputeRegion(ComputeRegionArgs),
    /// Simulate a layered wiretap code on the given channel.
    SimulateCode(SimulateCodeArgs),
    /// Standalone Fourier-Motzkin elimination on a JSON inequality system.
    Fme(FmeArgs),
    /// Export frontier samples of a computed region as CSV.
    ExportFrontier(ExportFrontierArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderMode {
    Degraded,
    LessNoisy,
}

#[derive(Args)]
struct CheckOrderArgs {
    /// Channel description (JSON).
    #[arg(long)]
    channel: PathBuf,
    /// Terminal pair `A,B` claiming A dominates B, e.g. `Y1,Z`.
    #[arg(long)]
    pair: String,
    #[arg(long, value_enum)]
    mode: OrderMode,
    /// Write the JSON verdict here as well as to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ComputeRegionArgs {
    /// Which result to evaluate: 1, cor1, 2, 3, 4, no-common, 5, or 6.
    #[arg(long)]
    theorem: String,
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    restarts: Option<usize>,
    /// Grid resolution for the scalar cross-checks.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of time-sharing weights swept (switched-sum region only).
    #[arg(long)]
    alpha_steps: Option<usize>,
    /// Evaluate the formulas even when a hypothesis pre-check fails.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Superposition,
    RateSplit,
    TimeShared,
}

#[derive(Args)]
struct SimulateCodeArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// Block length.
    #[arg(long)]
    n: usize,
    /// Message rates `r0,r1,...` in bits per channel use.
    #[arg(long)]
    rates: String,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also compute exact equivocation per message and overall.
    #[arg(long)]
    exact_equivocation: bool,
    /// Per-symbol typicality slack of the decoder.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Fraction of the block on channel 1 (time-shared scheme).
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FmeArgs {
    /// Inequality system (JSON array of `{"coeffs": .., "bound": ..}`).
    #[arg(long = "in")]
    input: PathBuf,
    /// Variable to eliminate.
    #[arg(long)]
    eliminate: String,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportFrontierArgs {
    /// A `compute-region` output file (JSON).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of frontier directions sampled.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    inputs: Vec<String>,
    config: serde_json::Value,
    version: String,
    seed: Option<u64>,
}

impl RunManifest {
    fn new(subcommand: &str, inputs: &[&Path], config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
        }
    }
}

#[derive(Debug)]
struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<io::IoError> for CliError {
    fn from(e: io::IoError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<RegionError> for CliError {
    fn from(e: RegionError) -> Self {
        let code = match &e {
            RegionError::HypothesisViolated(_) => EXIT_HYPOTHESIS,
            _ => EXIT_VALIDATION,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

impl From<crate::channel::ChannelError> for CliError {
    fn from(e: crate::channel::ChannelError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<codesim::CodeSimError> for CliError {
    fn from(e: codesim::CodeSimError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<crate::geometry::GeometryError> for CliError {
    fn from(e: crate::geometry::GeometryError) -> Self {
        CliError::validation(e.to_string())
    }
}

/// Parses and runs one invocation; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 { EXIT_OK } else { EXIT_VALIDATION };
        }
    };
    if let Err(e) = read_thread_cap() {
        eprintln!("error: {e}");
        return e.code;
    }
    let result = match cli.command {
        Command::CheckOrder(args) => check_order(&args),
        Command::ComputeRegion(args) => compute_region(&args),
        Command::SimulateCode(args) => simulate_code(&args),
        Command::Fme(args) => fme(&args),
        Command::ExportFrontier(args) => export_frontier(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// Worker-count cap; the evaluators are single-threaded, so the cap only
/// needs validating.
fn read_thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("SECRECY_REGIONS_THREADS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::validation(format!(
                "SECRECY_REGIONS_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn parse_terminal(name: &str, bc: &BroadcastWiretapChannel) -> Result<Terminal, CliError> {
    let name = name.trim();
    if name.eq_ignore_ascii_case("Z") {
        return Ok(Terminal::Eavesdropper);
    }
    if let Some(num) = name.strip_prefix('Y').or_else(|| name.strip_prefix('y')) {
        if let Ok(k) = num.parse::<usize>() {
            if k >= 1 && k <= bc.num_receivers() {
                return Ok(Terminal::Receiver(k - 1));
            }
        }
    }
    Err(CliError::validation(format!(
        "unknown terminal {name:?}; expected Y1..Y{} or Z",
        bc.num_receivers()
    )))
}

fn single_channel(path: &Path) -> Result<BroadcastWiretapChannel, CliError> {
    match io::load_channel(path)? {
        ChannelInput::Single(bc) => Ok(bc),
        ChannelInput::Parallel(_) => Err(CliError::validation(format!(
            "{}: expected a single channel, found sub-channels",
            path.display()
        ))),
    }
}

fn parallel_channel(path: &Path) -> Result<ParallelChannel, CliError> {
    match io::load_channel(path)? {
        ChannelInput::Parallel(pc) => Ok(pc),
        ChannelInput::Single(_) => Err(CliError::validation(format!(
            "{}: expected a parallel channel with sub-channels",
            path.display()
        ))),
    }
}

fn emit(out: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    if let Some(path) = out {
        io::write_json_atomic(path, value)?;
    }
    Ok(())
}

fn check_order(args: &CheckOrderArgs) -> Result<(), CliError> {
    let bc = single_channel(&args.channel)?;
    let parts: Vec<&str> = args.pair.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::validation(format!(
            "--pair must name two terminals like Y1,Z; got {:?}",
            args.pair
        )));
    }
    let a = parse_terminal(parts[0], &bc)?;
    let b = parse_terminal(parts[1], &bc)?;
    if a == b {
        return Err(CliError::validation("--pair must name two distinct terminals"));
    }
    let ca = bc.marginal_channel(a)?;
    let cb = bc.marginal_channel(b)?;
    let verdict = match args.mode {
        OrderMode::Degraded => check_degraded(&ca, &cb)?,
        OrderMode::LessNoisy => {
            let budget = OrderingBudget {
                seed: args.seed,
                ..OrderingBudget::default()
            };
            check_less_noisy(&ca, &cb, &budget)?
        }
    };
    let manifest = RunManifest::new(
        "check-order",
        &[&args.channel],
        json!({
            "pair": [parts[0].trim(), parts[1].trim()],
            "mode": match args.mode { OrderMode::Degraded => "degraded", OrderMode::LessNoisy => "less-noisy" },
        }),
        Some(args.seed),
    );
    let output = json!({
        "manifest": manifest,
        "verdict": verdict,
    });
    println!("{}", serde_json::to_string_pretty(&output).expect("verdict serialization cannot fail"));
    emit(args.out.as_deref(), &output)
}

fn compute_region(args: &ComputeRegionArgs) -> Result<(), CliError> {
    let mut cfg = SearchConfig::default();
    if let Some(r) = args.restarts {
        cfg.num_restarts = r;
    }
    if let Some(g) = args.grid {
        cfg.grid_resolution = g;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.alpha_steps {
        cfg.alpha_steps = a;
    }
    cfg.force = args.force;

    let result: CapacityResult = match args.theorem.as_str() {
        "1" => region_theorem1(&single_channel(&args.channel)?, &cfg)?,
        "cor1" => region_corollary1(&single_channel(&args.channel)?, &cfg)?,
        "2" => common_message_capacity(&parallel_channel(&args.channel)?, &cfg)?,
        "3" => sum_secrecy_capacity(&parallel_channel(&args.channel)?, &cfg)?,
        "4" => region_theorem4(&parallel_channel(&args.channel)?, &cfg)?,
        "no-common" => region_no_common(&parallel_channel(&args.channel)?, &cfg)?,
        "5" => region_theorem5(&parallel_channel(&args.channel)?, &cfg)?,
        "6" => {
            let pc = parallel_channel(&args.channel)?;
            if pc.num_subchannels() != 2 {
                return Err(CliError::validation(
                    "the switched-sum region needs exactly 2 sub-channels",
                ));
            }
            region_theorem6(&pc.subchannels()[0], &pc.subchannels()[1], &cfg)?
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown theorem {other:?}; expected 1, cor1, 2, 3, 4, no-common, 5, or 6"
            )))
        }
    };

    if let Some(value) = result.value {
        println!("C = {value:.6} bits");
    } else if let Some(region) = &result.region {
        println!(
            "region over [{}]: {} pieces, {} hull vertices",
            region.variables().join(", "),
            region.pieces().len(),
            region.hull_vertices().map_or(0, |h| h.len()),
        );
    }

    let manifest = RunManifest::new(
        "compute-region",
        &[&args.channel],
        json!({ "theorem": args.theorem, "search": cfg }),
        Some(cfg.seed),
    );
    let output = json!({
        "manifest": manifest,
        "result": result,
    });
    emit(args.out.as_deref(), &output)
}

fn parse_rates(text: &str, expected: usize) -> Result<Vec<f64>, CliError> {
    let rates: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::validation(format!("bad --rates value: {e}")))?;
    if rates.len() != expected {
        return Err(CliError::validation(format!(
            "expected {expected} rates, got {}",
            rates.len()
        )));
    }
    if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CliError::validation("rates must be finite and nonnegative"));
    }
    Ok(rates)
}

/// Default auxiliary chain: every layer carries the input alphabet with
/// identity links, i.e. plain stochastic-encoding superposition without
/// auxiliary randomization between layers.
fn identity_chain(input_size: usize, vars: usize) -> AuxiliaryChain {
    let links = vec![Channel::identity(input_size); vars.saturating_sub(1)];
    AuxiliaryChain::new(Distribution::uniform(input_size), links)
        .expect("identity chain construction cannot fail")
}

fn simulate_code(args: &SimulateCodeArgs) -> Result<(), CliError> {
    let (codebook, message_names): (codesim::Codebook, Vec<String>) = match args.scheme {
        Scheme::Superposition => {
            let bc = single_channel(&args.channel)?;
            let k = bc.num_receivers();
            let rates = parse_rates(&args.rates, k + 1)?;
            let spec = CodebookSpec {
                n: args.n,
                message_rates: rates,
                confusion_rates: None,
                chain: identity_chain(bc.input_size(), k),
                seed: args.seed,
                epsilon: args.epsilon,
            };
            let names = std::iter::once("w0".to_string())
                .chain((1..=k).map(|u| format!("w{u}")))
                .collect();
            (build_codebook(&spec, &bc)?, names)
        }
        Scheme::RateSplit => {
            let pc = parallel_channel(&args.channel)?;
            if pc.num_subchannels() != 2 || pc.num_receivers() != 2 {
                return Err(CliError::validation(
                    "rate splitting needs 2 users and 2 sub-channels",
                ));
            }
            let rates = parse_rates(&args.rates, 3)?;
            let x2 = pc.subchannels()[1].input_size();
            let spec = RateSplitSpec {
                n: args.n,
                rates: [rates[0], rates[1], rates[2]],
                split: None,
                input0: Distribution::uniform(pc.subchannels()[0].input_size()),
                chain1: identity_chain(x2, 2),
                seed: args.seed,
                epsilon: args.epsilon,
            };
            let names = ["w0", "w1a", "w1b", "w2"].iter().map(|s| s.to_string()).collect();
            (build_rate_split(&spec, &pc)?, names)
        }
        Scheme::TimeShared => {
            let pc = parallel_channel(&args.channel)?;
            if pc.num_subchannels() != 2 || pc.num_receivers() != 2 {
                return Err(CliError::validation(
                    "time sharing needs 2 users and 2 component channels",
                ));
            }
            let rates = parse_rates(&args.rates, 3)?;
            let ch1 = &pc.subchannels()[0];
            let ch2 = &pc.subchannels()[1];
            let spec = TimeSharedSpec {
                n: args.n,
                alpha: args.alpha,
                rates: [rates[0], rates[1], rates[2]],
                chain1: identity_chain(ch1.input_size(), 2),
                chain2: identity_chain(ch2.input_size(), 2),
                split1: None,
                split2: None,
                seed: args.seed,
                epsilon: args.epsilon,
            };
            let names = ["w0", "w1a", "w1b", "w2a", "w2b"].iter().map(|s| s.to_string()).collect();
            (build_time_shared(&spec, ch1, ch2)?, names)
        }
    };

    let mut report: SimulationReport = codesim::estimate_error(&codebook, args.trials, args.seed)?;
    if args.exact_equivocation {
        let all: Vec<usize> = (0..codebook.message_counts.len()).collect();
        for subset in std::iter::once(all.clone()).chain(all.iter().map(|&id| vec![id])) {
            let bits = codesim::exact_equivocation(&codebook, &subset)?;
            report.equivocation.push(codesim::EquivocationEntry {
                subset,
                bits_per_use: bits,
            });
        }
    }

    // Human-readable table.
    println!("message counts:");
    for (name, (&count, &rate)) in message_names
        .iter()
        .zip(codebook.message_counts.iter().zip(&codebook.realized_rates))
    {
        println!("  {name}: {count} messages, {rate:.4} bits/use");
    }
    println!("per-user block error ({} trials):", report.trials);
    for (u, est) in report.error_estimates.iter().enumerate() {
        println!(
            "  user {}: {:.4} (95% CI {:.4}..{:.4})",
            u + 1,
            est.rate,
            est.wilson_low,
            est.wilson_high
        );
    }
    if !report.equivocation.is_empty() {
        println!("exact equivocation:");
        for entry in &report.equivocation {
            let label: Vec<&str> = entry.subset.iter().map(|&id| message_names[id].as_str()).collect();
            println!("  {{{}}}: {:.4} bits/use", label.join(","), entry.bits_per_use);
        }
    }

    let manifest = RunManifest::new(
        "simulate-code",
        &[&args.channel],
        json!({
            "scheme": match args.scheme {
                Scheme::Superposition => "superposition",
                Scheme::RateSplit => "rate-split",
                Scheme::TimeShared => "time-shared",
            },
            "n": args.n,
            "rates": args.rates,
            "trials": args.trials,
            "epsilon": args.epsilon,
            "alpha": args.alpha,
            "message_counts": codebook.message_counts,
            "realized_rates": codebook.realized_rates,
        }),
        Some(args.seed),
    );
    let output = json!({
        "manifest": manifest,
        "report": report,
    });
    emit(args.out.as_deref(), &output)
}

fn fme(args: &FmeArgs) -> Result<(), CliError> {
    let system = io::load_inequalities(&args.input)?;
    let projected = eliminate(&system, &args.eliminate);
    match &args.out {
        Some(path) => io::save_inequalities(path, &projected)?,
        None => {
            let raw: Vec<serde_json::Value> = projected
                .iter()
                .map(|i| json!({"coeffs": i.coeffs, "bound": i.bound}))
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&raw).expect("inequality serialization cannot fail")
            );
        }
    }
    Ok(())
}

fn export_frontier(args: &ExportFrontierArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::validation("--samples must be positive"));
    }
    let text = std::fs::read_to_string(&args.input).map_err(|e| {
        CliError::validation(format!("{}: {e}", args.input.display()))
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: invalid JSON: {e}", args.input.display())))?;
    let region_value = value
        .pointer("/result/region")
        .cloned()
        .filter(|v| !v.is_null())
        .ok_or_else(|| {
            CliError::validation(format!(
                "{}: no region found (scalar results have no frontier)",
                args.input.display()
            ))
        })?;
    let region: RateRegion = serde_json::from_value(region_value)
        .map_err(|e| CliError::validation(format!("{}: bad region: {e}", args.input.display())))?;

    let dim = region.dim();
    let directions = frontier_directions(dim, args.samples, args.seed);
    let frontier = region.pareto_frontier(&directions)?;
    let rows: Vec<(Vec<f64>, usize)> = frontier
        .into_iter()
        .map(|point| {
            let piece_id = region
                .pieces()
                .iter()
                .position(|p| piece_satisfied(p, region.variables(), &point, 1e-7))
                .unwrap_or(region.pieces().len());
            (point, piece_id)
        })
        .collect();
    io::write_frontier_csv(&args.out, region.variables(), &rows)?;
    println!("wrote {} frontier samples to {}", rows.len(), args.out.display());
    Ok(())
}

/// Deterministic nonnegative directions: axis directions, the all-ones
/// direction, then a seeded low-discrepancy fill of the simplex.
fn frontier_directions(dim: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for d in 0..dim {
        let mut v = vec![0.0; dim];
        v[d] = 1.0;
        dirs.push(v);
    }
    dirs.push(vec![1.0; dim]);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < samples.max(dim + 1) {
        let mut v: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
            dirs.push(v);
        }
    }
    dirs.truncate(samples.max(dim + 1));
    dirs
}
