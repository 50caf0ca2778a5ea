//! Command-line front end. `run` takes raw arguments and returns a process
//! exit code so the whole interface is testable without spawning a binary.
//!
//! Exit codes
//!   solve:      0 equilibrium found, 1 non-existence proven, 2 limit hit,
//!               3 I/O or parse error, 4 usage error
//!   best-alpha: 0 converged, 1 alpha unbounded, 2 limit hit, 3 I/O, 4 usage
//!   generate / verify / report: 0 success, 3 I/O or parse error, 4 usage
//!   (verify also exits 4 when the instance is outside the oracle's reach)

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adaptive::{self, SearchParams, Variant};
use crate::bnc::{self, Limits, SolveStatus, Tolerances};
use crate::flowgame::{self, GenParams};
use crate::model::{self, Game};
use crate::oracle;
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Parser)]
#[command(
    name = "nashcut",
    about = "Branch-and-cut solver for approximate equilibria of mixed-integer Nash games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance for a fixed (alpha, beta) approximation guarantee.
    Solve(SolveArgs),
    /// Binary-search the minimal uniform alpha admitting an (alpha, 0)-NE.
    BestAlpha(BestAlphaArgs),
    /// Generate random flow-game instances.
    #[command(alias = "gen")]
    Generate(GenerateArgs),
    /// Cross-check an all-integer instance against the brute-force oracle.
    Verify(VerifyArgs),
    /// Aggregate best-alpha result documents into CSV tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonLimits {
    /// Wall-time limit in seconds.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Node limit for each tree.
    #[arg(long, default_value_t = u64::MAX)]
    node_limit: u64,
    /// Equilibrium-check tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol_ne: f64,
    /// Node pruning threshold on the LP value.
    #[arg(long, default_value_t = 1e-5)]
    tol_prune: f64,
    /// Minimal cut violation worth adding.
    #[arg(long, default_value_t = 5e-6)]
    tol_cut: f64,
}

impl CommonLimits {
    fn limits(&self) -> Limits {
        Limits {
            time: self.time_limit,
            nodes: self.node_limit,
            tol: Tolerances {
                ne: self.tol_ne,
                prune: self.tol_prune,
                cut: self.tol_cut,
            },
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file: a game document or a flow-game instance.
    #[arg(long)]
    instance: PathBuf,
    /// Multiplicative guarantees, comma-separated; one value is broadcast to
    /// every player.
    #[arg(long, default_value = "1")]
    alpha: String,
    /// Additive guarantees, same format as --alpha.
    #[arg(long, default_value = "0")]
    beta: String,
    /// Write the result document (JSON) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    limits: CommonLimits,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Multitree,
    ReuseTree,
    ReuseTreeCuts,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Multitree => Variant::Multitree,
            VariantArg::ReuseTree => Variant::ReuseTree,
            VariantArg::ReuseTreeCuts => Variant::ReuseTreeCuts,
        }
    }
}

#[derive(Args)]
struct BestAlphaArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "multitree")]
    variant: VariantArg,
    /// First upper-bound probe of the growth phase.
    #[arg(long, default_value_t = 10.0)]
    alpha0: f64,
    /// Growth factor between upper-bound probes.
    #[arg(long, default_value_t = 10.0)]
    factor: f64,
    /// Target width of the final alpha interval.
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
    /// Growth-phase probe budget before declaring alpha unbounded.
    #[arg(long, default_value_t = 20)]
    max_growth: u32,
    /// Write the search document (JSON) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-iteration CSV trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    limits: CommonLimits,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 3)]
    n_nodes: usize,
    #[arg(long, default_value_t = 4)]
    n_edges: usize,
    #[arg(long, default_value_t = 2)]
    n_players: usize,
    #[arg(long, default_value_t = 1)]
    demand_min: i64,
    #[arg(long, default_value_t = 2)]
    demand_max: i64,
    #[arg(long, default_value_t = 0)]
    mu_min: i64,
    #[arg(long, default_value_t = 4)]
    mu_max: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Constrain generation to one shared source and identical utilities.
    #[arg(long)]
    single_source_identical_mu: bool,
    /// Number of instances (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Directory receiving flow-<seed>.json files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "1")]
    alpha: String,
    #[arg(long, default_value = "0")]
    beta: String,
    /// Write the oracle report (JSON) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of best-alpha JSON documents.
    #[arg(long)]
    dir: PathBuf,
    /// Directory receiving solve_time_ecdf.csv and alpha_hist.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Runs the CLI on the given arguments (including argv[0]) and returns the
/// process exit code. Diagnostics go to stderr, results to stdout or --out.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits, not usage errors.
            let code = if e.exit_code() == 0 {
                EXIT_OK
            } else {
                EXIT_USAGE
            };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::BestAlpha(a) => cmd_best_alpha(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn parse_guarantees(text: &str, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == 1 => Ok(vec![v[0]; n]),
        Ok(v) if v.len() == n => Ok(v),
        Ok(v) => Err(format!(
            "--{what} has {} values but the game has {} players",
            v.len(),
            n
        )),
        Err(e) => Err(format!("--{what}: {e}")),
    }
}

/// Loads an instance file, accepting either the game document format or a
/// flow-game instance (which is then encoded as a game).
pub fn load_game(path: &Path) -> Result<Game, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match model::load_instance(&text) {
        Ok(game) => Ok(game),
        Err(game_err) => match flowgame::load_flow_instance(&text) {
            Ok(inst) => inst
                .encode()
                .map_err(|e| format!("{}: {e}", path.display())),
            Err(_) => Err(format!("{}: {game_err}", path.display())),
        },
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(a: &SolveArgs) -> i32 {
    let game = match load_game(&a.instance) {
        Ok(g) => g,
        Err(e) => return io_error(&e),
    };
    let n = game.n_players();
    let (alpha, beta) = match (
        parse_guarantees(&a.alpha, n, "alpha"),
        parse_guarantees(&a.beta, n, "beta"),
    ) {
        (Ok(alpha), Ok(beta)) => (alpha, beta),
        (Err(e), _) | (_, Err(e)) => return usage_error(&e),
    };
    let result = match bnc::solve(&game, &alpha, &beta, &a.limits.limits()) {
        Ok(r) => r,
        Err(e) => return usage_error(&e.to_string()),
    };
    let text = serde_json::to_string_pretty(&result.document()).unwrap();
    if let Err(e) = emit(&a.out, &text) {
        return io_error(&e);
    }
    match result.status {
        SolveStatus::NeFound => EXIT_OK,
        SolveStatus::NoNeExists => EXIT_NEGATIVE,
        SolveStatus::TimeLimit | SolveStatus::NodeLimit | SolveStatus::CutLimit => EXIT_LIMIT,
    }
}

fn cmd_best_alpha(a: &BestAlphaArgs) -> i32 {
    let game = match load_game(&a.instance) {
        Ok(g) => g,
        Err(e) => return io_error(&e),
    };
    let params = SearchParams {
        alpha0: a.alpha0,
        factor: a.factor,
        tol: a.tol,
        max_growth: a.max_growth,
        limits: a.limits.limits(),
    };
    let result = match adaptive::best_alpha(&game, &params, a.variant.into()) {
        Ok(r) => r,
        Err(e) => return usage_error(&e.to_string()),
    };
    if let Some(path) = &a.trace {
        if let Err(e) = fs::write(path, result.trace_csv()) {
            return io_error(&format!("{}: {e}", path.display()));
        }
    }
    let text = serde_json::to_string_pretty(&result.document()).unwrap();
    if let Err(e) = emit(&a.out, &text) {
        return io_error(&e);
    }
    match result.status {
        adaptive::SearchStatus::Converged => EXIT_OK,
        adaptive::SearchStatus::AlphaUnbounded => EXIT_NEGATIVE,
        adaptive::SearchStatus::LimitHit => EXIT_LIMIT,
    }
}

fn cmd_generate(a: &GenerateArgs) -> i32 {
    if let Err(e) = fs::create_dir_all(&a.out_dir) {
        return io_error(&format!("{}: {e}", a.out_dir.display()));
    }
    for k in 0..a.count {
        let params = GenParams {
            n_nodes: a.n_nodes,
            n_edges: a.n_edges,
            n_players: a.n_players,
            demand_range: (a.demand_min, a.demand_max),
            mu_range: (a.mu_min, a.mu_max),
            seed: a.seed + k,
            single_source_identical_mu: a.single_source_identical_mu,
        };
        let inst = match flowgame::generate(&params) {
            Ok(i) => i,
            Err(e) => return usage_error(&e.to_string()),
        };
        let path = a.out_dir.join(format!("flow-{}.json", params.seed));
        if let Err(e) = fs::write(&path, flowgame::serialize_flow_instance(&inst)) {
            return io_error(&format!("{}: {e}", path.display()));
        }
        println!("{}", path.display());
    }
    EXIT_OK
}

fn cmd_verify(a: &VerifyArgs) -> i32 {
    let game = match load_game(&a.instance) {
        Ok(g) => g,
        Err(e) => return io_error(&e),
    };
    let n = game.n_players();
    let (alpha, beta) = match (
        parse_guarantees(&a.alpha, n, "alpha"),
        parse_guarantees(&a.beta, n, "beta"),
    ) {
        (Ok(alpha), Ok(beta)) => (alpha, beta),
        (Err(e), _) | (_, Err(e)) => return usage_error(&e),
    };
    let report = match oracle::oracle_report(&game, &alpha, &beta) {
        Ok(r) => r,
        Err(e) => return usage_error(&format!("oracle cannot handle this instance: {e}")),
    };
    let text = serde_json::to_string_pretty(&report).unwrap();
    match emit(&a.out, &text) {
        Ok(()) => EXIT_OK,
        Err(e) => io_error(&e),
    }
}

fn cmd_report(a: &ReportArgs) -> i32 {
    let tables = match report::report_dir(&a.dir) {
        Ok(t) => t,
        Err(e) => return io_error(&format!("{}: {e}", a.dir.display())),
    };
    if let Err(e) = fs::create_dir_all(&a.out_dir) {
        return io_error(&format!("{}: {e}", a.out_dir.display()));
    }
    let ecdf = a.out_dir.join("solve_time_ecdf.csv");
    let hist = a.out_dir.join("alpha_hist.csv");
    if let Err(e) = fs::write(&ecdf, tables.ecdf_csv) {
        return io_error(&format!("{}: {e}", ecdf.display()));
    }
    if let Err(e) = fs::write(&hist, tables.alpha_hist_csv) {
        return io_error(&format!("{}: {e}", hist.display()));
    }
    println!("{}", ecdf.display());
    println!("{}", hist.display());
    EXIT_OK
}

fn io_error(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    EXIT_IO
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}
