//! `polarforge`: construct, select, simulate, and map trade-off regions
//! for polar-like codes with arbitrary kernels over erasure channels.
//!
//! Exit status: 0 on success, 1 on a validation or input error, 2 when all
//! artifacts were written but a checked invariant was violated.

mod emit;
mod error;
mod pipelines;
mod presets;
mod recipes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pipelines::{
    EstimateMuArgs, Globals, Outcome, SelectArgs, SelectMode, SimulateArgs, TradeoffArgs,
};

#[derive(Parser)]
#[command(
    name = "polarforge",
    version,
    about = "Polar-like codes with arbitrary kernels over q-ary erasure channels",
    propagate_version = true
)]
struct Cli {
    /// Root seed; reruns with the same seed are byte-identical.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Largest channel tree any command may build, in nodes.
    #[arg(long, global = true, default_value_t = polarforge_core::DEFAULT_NODE_BUDGET)]
    budget_nodes: usize,

    /// Largest Monte Carlo effort any command may spend, in trials.
    #[arg(long, global = true, default_value_t = polarforge_core::DEFAULT_TRIAL_BUDGET)]
    budget_trials: u64,

    /// Directory for artifacts named with relative paths.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a kernel: distances, exponent, dice, operator norm.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Build the channel tree a recipe describes and list its leaves.
    Construct {
        /// Recipe file: `q epsilon`, a kernel schedule, optionally a graft.
        #[arg(long)]
        recipe: PathBuf,
        /// Per-leaf CSV: path index, depth, ln Z, exact reach probability.
        #[arg(long, default_value = "tree.csv")]
        out: PathBuf,
    },
    /// Choose an information set and emit it with round-by-round bookkeeping.
    Select {
        #[arg(long)]
        recipe: PathBuf,
        /// threshold | recyclable | disposable | graft
        #[arg(long, value_enum)]
        mode: SelectMode,
        /// Threshold mode cutoff on ln Z (default: -depth^(2/3)).
        #[arg(long, allow_negative_numbers = true)]
        ln_z_cutoff: Option<f64>,
        /// Target error exponent β′ (disposable and graft modes).
        #[arg(long)]
        beta_p: Option<f64>,
        /// Target gap exponent 1/μ′ (disposable mode; optional cross-check
        /// against the recipe in graft mode).
        #[arg(long)]
        inv_mu_p: Option<f64>,
        /// Scaling exponent: a number or a preset name.
        #[arg(long)]
        mu_star: Option<String>,
        /// Information-set CSV (leaf id, ln Z).
        #[arg(long, default_value = "A.csv")]
        out_a: PathBuf,
        /// Per-round partition measures and rate bounds.
        #[arg(long, default_value = "diag.csv")]
        out_diag: PathBuf,
    },
    /// Monte Carlo a recipe + information set and check the union bound.
    Simulate {
        #[arg(long)]
        recipe: PathBuf,
        /// Information set produced by `select` (first field = leaf id).
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Sample base erasures at this rate instead of the recipe's.
        #[arg(long)]
        eps: Option<f64>,
        /// Worker count; 0 lets the thread pool decide. Never affects output.
        #[arg(long, default_value_t = 0)]
        shards: usize,
        #[arg(long, default_value = "sim.csv")]
        out: PathBuf,
    },
    /// Map the achievable (β′, 1/μ′) region for a kernel.
    Tradeoff {
        /// Kernel file or preset name (with --mu-star).
        #[arg(long)]
        kernel: Option<String>,
        /// Scaling exponent: a number or a preset name (with --kernel).
        #[arg(long)]
        mu_star: Option<String>,
        /// Named kernel/exponent pair, e.g. arikan-bec.
        #[arg(long)]
        preset: Option<String>,
        /// Grid resolution along β′.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value = "region.csv")]
        out: PathBuf,
        /// Also render the region as an SVG figure.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Cross-check the scan against the two-point-mixture hull.
        #[arg(long)]
        hull_check: bool,
    },
    /// Estimate the scaling exponent from finite-depth rate gaps.
    EstimateMu {
        /// Kernel file or preset name.
        #[arg(long)]
        kernel: String,
        /// Comma-separated base erasure rates.
        #[arg(long, default_value = "0.3,0.5,0.7")]
        eps_grid: String,
        #[arg(long, default_value_t = 6)]
        n_lo: u32,
        #[arg(long, default_value_t = 16)]
        n_hi: u32,
        #[arg(long, default_value = "mu.csv")]
        out: PathBuf,
    },
    /// Render the standard trade-off figure set into the output directory.
    Figures,
}

#[derive(Subcommand)]
enum KernelAction {
    /// Print the kernel's figures of merit as one CSV row.
    Analyze {
        /// Kernel file or preset name (arikan, rs4, rs8, ...).
        kernel: String,
        /// Also write the row to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Honor POLARFORGE_THREADS before rayon spins up its default pool.
fn init_threads() {
    if let Ok(v) = std::env::var("POLARFORGE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn run(command: Command, g: &Globals) -> error::Result<Outcome> {
    match command {
        Command::Kernel { action } => match action {
            KernelAction::Analyze { kernel, out } => {
                pipelines::kernel_analyze(&kernel, out.as_deref(), g)
            }
        },
        Command::Construct { recipe, out } => pipelines::construct(&recipe, &out, g),
        Command::Select {
            recipe,
            mode,
            ln_z_cutoff,
            beta_p,
            inv_mu_p,
            mu_star,
            out_a,
            out_diag,
        } => pipelines::select(
            &SelectArgs {
                recipe,
                mode,
                ln_z_cutoff,
                beta_p,
                inv_mu_p,
                mu_star,
                out_a,
                out_diag,
            },
            g,
        ),
        Command::Simulate {
            recipe,
            a,
            trials,
            eps,
            shards,
            out,
        } => pipelines::simulate(
            &SimulateArgs {
                recipe,
                a,
                trials,
                eps,
                shards,
                out,
            },
            g,
        ),
        Command::Tradeoff {
            kernel,
            mu_star,
            preset,
            grid,
            out,
            svg,
            hull_check,
        } => pipelines::tradeoff(
            &TradeoffArgs {
                kernel,
                mu_star,
                preset,
                grid,
                out,
                svg,
                hull_check,
            },
            g,
        ),
        Command::EstimateMu {
            kernel,
            eps_grid,
            n_lo,
            n_hi,
            out,
        } => pipelines::estimate_mu(
            &EstimateMuArgs {
                kernel,
                eps_grid,
                n_lo,
                n_hi,
                out,
            },
            g,
        ),
        Command::Figures => pipelines::figures(g),
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are validation errors (status 1); --help and
            // --version print to stdout and succeed.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let globals = Globals {
        seed: cli.seed,
        budget_nodes: cli.budget_nodes,
        budget_trials: cli.budget_trials,
        out_dir: cli.out_dir,
    };
    match run(cli.command, &globals) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Flagged(msg)) => {
            eprintln!("flagged: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
