//! `rfic`: command-line front end to the estimators and the J-sweep.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rfic_core::extrema::{sample_stretch_pairs, stretch_max_energy, Direction};
use rfic_core::harness::{self, Budget, EmitFormat};
use rfic_core::maxenergy::{dp_max_energy, ergodic_max_energy};
use rfic_core::renewal::{self, FitWindow, LadderDirection};
use rfic_core::stats::RunningMoments;
use rfic_core::transfer::free_energy_estimate_bc;
use rfic_core::{BoundaryCondition, DisorderLaw, Error, SeededStream};
use serde_json::json;

use output::{Format, Output};

fn law_arg(s: &str) -> Result<DisorderLaw, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn count_arg(s: &str) -> Result<u64, String> {
    rfic_core::parse_count(s).map_err(|e| e.to_string())
}

fn size_arg(s: &str) -> Result<usize, String> {
    count_arg(s).and_then(|n| usize::try_from(n).map_err(|e| e.to_string()))
}

fn positive_arg(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(format!("`{s}` is not a finite number > 0")),
    }
}

/// Comma-separated positive numbers.
#[derive(Debug, Clone)]
struct List(Vec<f64>);

fn list_arg(s: &str) -> Result<List, String> {
    s.split(',').map(positive_arg).collect::<Result<_, _>>().map(List)
}

fn bc_arg(s: &str) -> Result<BoundaryCondition, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Parser)]
#[command(name = "rfic", version, about = "Strong-coupling numerics for the random field Ising chain")]
struct Cli {
    /// TOML file whose keys mirror the subcommand's flags; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Chain {
    /// Disorder law, e.g. `gaussian:1`, `laplace:1`, `logistic_sech`.
    #[arg(long, value_parser = law_arg)]
    law: DisorderLaw,

    #[arg(long = "J", value_parser = positive_arg)]
    j: f64,

    /// Sites per replica.
    #[arg(long = "N", value_parser = count_arg, default_value = "1e7")]
    n: u64,

    #[arg(long, value_parser = size_arg, default_value = "32")]
    replicas: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Dp,
    Ergodic,
    Stretch,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Ascending,
    Descending,
}

#[derive(Subcommand)]
enum Command {
    /// Free energy density from random matrix products.
    #[command(args_override_self = true)]
    FreeEnergy {
        #[command(flatten)]
        chain: Chain,
        /// Boundary condition `gd`.
        #[arg(long, value_parser = bc_arg, default_value = "++")]
        bc: BoundaryCondition,
        #[command(flatten)]
        common: Common,
    },
    /// Maximal energy density by DP, ergodic X-chain or stretch ratios.
    #[command(args_override_self = true)]
    MaxEnergy {
        #[command(flatten)]
        chain: Chain,
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
        /// Ergodic burn-in (default 10⌈Γ²/ϑ²⌉).
        #[arg(long, value_parser = count_arg)]
        burn_in: Option<u64>,
        /// Stretch pairs per replica.
        #[arg(long = "K", value_parser = size_arg, default_value = "2000")]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Stretch samples of the Γ-decomposition with a moment summary.
    #[command(args_override_self = true)]
    ExtremaStats {
        #[arg(long, value_parser = law_arg)]
        law: DisorderLaw,
        #[arg(long, value_parser = positive_arg)]
        gamma: f64,
        /// Stretch pairs.
        #[arg(long = "K", value_parser = size_arg, default_value = "2000")]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// The expansion constants.
    Constants {
        #[command(subcommand)]
        which: Constant,
    },
    /// Renewal-sum invariant CDF of the Lindley chain and its asymptote.
    #[command(args_override_self = true)]
    LindleyCdf {
        #[arg(long, value_parser = law_arg)]
        law: DisorderLaw,
        #[arg(long, value_enum, default_value_t = SideArg::Ascending)]
        direction: SideArg,
        /// Renewal chains.
        #[arg(long, value_parser = size_arg, default_value = "20000")]
        chains: usize,
        /// Fit window in T-units (default `[10ϑ, 30ϑ]`).
        #[arg(long, value_parser = positive_arg)]
        fit_lo: Option<f64>,
        #[arg(long, value_parser = positive_arg)]
        fit_hi: Option<f64>,
        #[arg(long, value_parser = size_arg, default_value = "201")]
        fit_points: usize,
        /// Spacing of the exported table.
        #[arg(long, value_parser = positive_arg, default_value = "0.25")]
        step: f64,
        #[command(flatten)]
        common: Common,
    },
    /// J-sweep with every estimator, residuals and verdicts.
    #[command(args_override_self = true)]
    Sweep {
        #[arg(long, value_parser = law_arg)]
        law: DisorderLaw,
        /// Comma-separated couplings.
        #[arg(long = "J", value_parser = list_arg)]
        j: List,
        #[arg(long = "N", value_parser = count_arg, default_value = "1e7")]
        n: u64,
        #[arg(long, value_parser = size_arg, default_value = "32")]
        replicas: usize,
        #[arg(long, value_parser = size_arg, default_value = "1e5")]
        n_ladder: usize,
        #[arg(long, value_parser = size_arg, default_value = "4000")]
        n_envs: usize,
        #[arg(long = "K", value_parser = size_arg, default_value = "2000")]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SweepFormat::Csv)]
        format: SweepFormat,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Exact algorithms against brute-force enumeration.
    #[command(args_override_self = true)]
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random instances per grid point.
        #[arg(long, value_parser = size_arg, default_value = "200")]
        instances: usize,
    },
}

#[derive(Subcommand)]
enum Constant {
    /// `κ̂` from strict and weak ladder heights.
    #[command(args_override_self = true)]
    KappaHat {
        #[arg(long, value_parser = law_arg)]
        law: DisorderLaw,
        /// Ladder samples per direction and mode.
        #[arg(long, value_parser = size_arg, default_value = "1e5")]
        n: usize,
        /// Epoch cap per ladder walk.
        #[arg(long, value_parser = count_arg, default_value = "1e6")]
        cap: u64,
        #[command(flatten)]
        common: Common,
    },
    /// `κ̃` from environments around Γ-minima.
    #[command(args_override_self = true)]
    KappaTilde {
        #[arg(long, value_parser = law_arg)]
        law: DisorderLaw,
        /// Comma-separated Γ values.
        #[arg(long, value_parser = list_arg)]
        gamma: List,
        #[arg(long, value_parser = size_arg, default_value = "4000")]
        n_envs: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepFormat {
    Csv,
    Json,
    Plotdata,
}

/// Usage-type failures exit with 2, everything else with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. } | Error::LawSpec { .. } | Error::TooLarge { .. } => 2,
        _ => 1,
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

/// `Ok(false)`: the command ran but its checks failed.
fn run(command: Command) -> rfic_core::Result<bool> {
    match command {
        Command::FreeEnergy { chain, bc, common } => {
            let s = SeededStream::new(common.seed);
            let f = free_energy_estimate_bc(&chain.law, chain.j, chain.n, chain.replicas, bc, &s)?;
            let mut out = Output::new(&common);
            out.record(
                &["law", "J", "N", "replicas", "bc", "seed", "F_mean", "F_stderr"],
                &[
                    chain.law.to_string(),
                    chain.j.to_string(),
                    chain.n.to_string(),
                    chain.replicas.to_string(),
                    bc.to_string(),
                    common.seed.to_string(),
                    f.mean.to_string(),
                    f.stderr.to_string(),
                ],
            );
            out.finish()?;
            Ok(true)
        }
        Command::MaxEnergy {
            chain,
            method,
            burn_in,
            k,
            common,
        } => {
            // Methods use disjoint streams so `all` reports independent estimates.
            let s = SeededStream::new(common.seed);
            let mut out = Output::new(&common);
            let header = ["law", "J", "method", "seed", "M_mean", "M_stderr", "n_samples"];
            let mut emit = |name: &str, e: rfic_core::Estimate| {
                out.record(
                    &header,
                    &[
                        chain.law.to_string(),
                        chain.j.to_string(),
                        name.to_string(),
                        common.seed.to_string(),
                        e.mean.to_string(),
                        e.stderr.to_string(),
                        e.n_samples.to_string(),
                    ],
                )
            };
            if matches!(method, Method::Dp | Method::All) {
                emit("dp", dp_max_energy(&chain.law, chain.j, chain.n, chain.replicas, &s.split(0))?);
            }
            if matches!(method, Method::Ergodic | Method::All) {
                let e = ergodic_max_energy(&chain.law, chain.j, chain.n, burn_in, chain.replicas, &s.split(1))?;
                warn_all(&e.warnings);
                emit("ergodic", e.value);
            }
            if matches!(method, Method::Stretch | Method::All) {
                emit("stretch", stretch_max_energy(&chain.law, chain.j, k, chain.replicas, &s.split(2))?);
            }
            out.finish()?;
            Ok(true)
        }
        Command::ExtremaStats { law, gamma, k, common } => {
            if k == 0 {
                return Err(Error::InvalidParameter {
                    name: "K",
                    reason: "need at least one stretch pair".into(),
                });
            }
            let pools = sample_stretch_pairs(&law, gamma, k, SeededStream::new(common.seed));
            let mut summary = Vec::new();
            for (name, pool) in [("descending", &pools.descending), ("ascending", &pools.ascending)] {
                let (mut h, mut l) = (RunningMoments::default(), RunningMoments::default());
                for s in pool.iter() {
                    h.push(s.height);
                    l.push(s.length as f64);
                }
                summary.push(json!({
                    "direction": name,
                    "count": h.count(),
                    "height_mean": h.mean(),
                    "height_stderr": h.stderr(),
                    "length_mean": l.mean(),
                    "length_stderr": l.stderr(),
                    "length_mean_over_gamma2": l.mean() / (gamma * gamma),
                }));
            }
            let mut out = Output::new(&common);
            for s in &summary {
                out.comment(&s.to_string());
            }
            out.extra("summary", json!(summary));
            for (i, (d, a)) in pools.descending.iter().zip(&pools.ascending).enumerate() {
                for s in [d, a] {
                    let dir = match s.direction {
                        Direction::Descending => "descending",
                        Direction::Ascending => "ascending",
                    };
                    out.record(
                        &["pair", "direction", "height", "length"],
                        &[(i + 1).to_string(), dir.to_string(), s.height.to_string(), s.length.to_string()],
                    );
                }
            }
            out.finish()?;
            Ok(true)
        }
        Command::Constants { which } => match which {
            Constant::KappaHat { law, n, cap, common } => {
                let k = renewal::kappa_hat_with_cap(&law, n, cap, &SeededStream::new(common.seed))?;
                warn_all(&k.warnings);
                let mut out = Output::new(&common);
                let header = ["law", "expression", "seed", "kappa_hat", "stderr", "n_samples"];
                for (name, e) in [("strict", k.value.strict), ("weak", k.value.weak)] {
                    out.record(
                        &header,
                        &[
                            law.to_string(),
                            name.into(),
                            common.seed.to_string(),
                            e.mean.to_string(),
                            e.stderr.to_string(),
                            e.n_samples.to_string(),
                        ],
                    );
                }
                out.extra("truncated", json!(k.value.truncated));
                out.extra("warnings", json!(k.warnings));
                eprintln!("κ̂ = {:.3}", k.value.strict);
                out.finish()?;
            Ok(true)
            }
            Constant::KappaTilde {
                law,
                gamma,
                n_envs,
                common,
            } => {
                let k = renewal::kappa_tilde(&law, &gamma.0, n_envs, &SeededStream::new(common.seed))?;
                warn_all(&k.warnings);
                let mut out = Output::new(&common);
                for kt in &k.value {
                    out.record(
                        &["law", "gamma", "seed", "inner_mean", "inner_stderr", "full_mean", "full_stderr", "n_envs"],
                        &[
                            law.to_string(),
                            kt.gamma.to_string(),
                            common.seed.to_string(),
                            kt.inner.mean.to_string(),
                            kt.inner.stderr.to_string(),
                            kt.full.mean.to_string(),
                            kt.full.stderr.to_string(),
                            kt.inner.n_samples.to_string(),
                        ],
                    );
                }
                out.extra("warnings", json!(k.warnings));
                out.finish()?;
            Ok(true)
            }
        },
        Command::LindleyCdf {
            law,
            direction,
            chains,
            fit_lo,
            fit_hi,
            fit_points,
            step,
            common,
        } => {
            let default = FitWindow::for_law(&law);
            let window = FitWindow::new(fit_lo.unwrap_or(default.lo), fit_hi.unwrap_or(default.hi), fit_points)?;
            let side = match direction {
                SideArg::Ascending => LadderDirection::Ascending,
                SideArg::Descending => LadderDirection::Descending,
            };
            let x_max = window.hi + step;
            let r = renewal::lindley_cdf_renewal(&law, side, x_max, chains, &window, &SeededStream::new(common.seed))?;
            warn_all(&r.warnings);
            let r = r.value;
            let mut out = Output::new(&common);
            out.comment(&format!(
                "law {law}; {chains} chains; slope {} before rescaling; intercept {:.6} on [{}, {}]",
                r.raw_slope, r.intercept, window.lo, window.hi
            ));
            out.extra(
                "fit",
                json!({
                    "window": window,
                    "raw_slope": r.raw_slope,
                    "fit": r.fit,
                    "intercept": r.intercept,
                    "truncated": r.truncated,
                }),
            );
            let points = (window.hi / step).floor() as usize;
            for i in 0..=points {
                let x = i as f64 * step;
                out.record(&["x", "F"], &[x.to_string(), r.cdf.eval(x).to_string()]);
            }
            out.finish()?;
            Ok(true)
        }
        Command::Sweep {
            law,
            j,
            n,
            replicas,
            n_ladder,
            n_envs,
            k,
            seed,
            format,
            out,
        } => {
            let budget = Budget {
                n,
                replicas,
                n_ladder,
                n_envs,
                stretch_pairs: k,
            };
            let report = harness::run_sweep(&law, &j.0, &budget, seed)?;
            warn_all(&report.warnings);
            let format = match format {
                SweepFormat::Csv => EmitFormat::Csv,
                SweepFormat::Json => EmitFormat::Json,
                SweepFormat::Plotdata => EmitFormat::Plotdata,
            };
            let path = harness::emit(&report, format, &out)?;
            println!("κ̂ = {:.4}, κ̃ = {:.4}, κ = κ̂ − κ̃ = {:.4}", report.kappa_hat_estimate(), report.kappa_tilde_estimate(), report.kappa());
            for v in &report.verdicts {
                println!("{v}");
            }
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Selftest { seed, instances } => {
            let laws = [
                DisorderLaw::gaussian(1.0)?,
                DisorderLaw::laplace(1.0)?,
                DisorderLaw::rademacher(1.0)?,
            ];
            let grid = harness::oracle_grid(&laws, &[0.5, 1.0, 2.0], 16, instances, seed)?;
            println!(
                "oracle grid: {} cases, worst log Z relative error {:.2e}, worst max-energy error {:.2e}",
                grid.cases, grid.max_log_z_rel, grid.max_energy_abs
            );
            let config = harness::maximal_config_check(&laws[0], 2.0, 5, 50, seed)?;
            println!("maximal configurations: worst energy gap {config:.2e}");
            for f in &grid.failures {
                println!("mismatch: {f}");
            }
            let passed = grid.passed() && config <= 1e-10;
            println!("selftest {}", if passed { "passed" } else { "FAILED" });
            Ok(passed)
        }
    }
}

fn main() -> ExitCode {
    let raw: Vec<_> = std::env::args_os().collect();
    let root = Cli::command();
    let parsed = config::merged_args(raw, &root)
        .and_then(|args| root.clone().try_get_matches_from(args))
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot start {k} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
