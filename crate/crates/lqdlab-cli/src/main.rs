//! `lqdlab` command line: generate instances, simulate policies, solve the
//! offline optimum, build analysis ledgers, verify the whole inequality
//! suite, search for adversarial instances, and reproduce the closed-form
//! ratio bound.
//!
//! Exit codes: 0 all checks pass, 1 verification failure, 2 usage or I/O
//! error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lqdlab::codec;
use lqdlab::config::{search_ties, ExperimentConfig};
use lqdlab::gen::{adversarial_search, gen_random, GenParams, LoadProfile, SearchParams};
use lqdlab::ledger::build_ledger;
use lqdlab::opt::{brute_force, solve_exact, upper_bound_relaxed, SearchLimits};
use lqdlab::pipeline::{run_suite, verify_instance, SuiteConfig};
use lqdlab::ratio::{known_bounds, optimize_alpha, rho_of_alpha};
use lqdlab::switch::{simulate_policy, Policy, TieBreak};
use lqdlab::{parse_decimal_rat, Instance};

#[derive(Parser)]
#[command(name = "lqdlab", version, about = "Shared-memory switch buffer management lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Profit-split parameter alpha as a decimal in (0, 0.6].
    #[arg(long, default_value = "0.57635")]
    alpha: String,
    /// Override beta (defaults to alpha^2 / (8 (1 - alpha))).
    #[arg(long)]
    beta: Option<String>,
    /// Per-queue profit floor coefficient rho.
    #[arg(long, default_value = "1.41478")]
    rho: String,
    /// Tie-break set, comma separated: min, max, rand:<seed>.
    #[arg(long, default_value = "min,max,rand:12648430")]
    ties: String,
    /// Node budget for the exact solver.
    #[arg(long, default_value_t = 20_000_000)]
    solver_nodes: u64,
    /// Refuse uncertified offline schedules.
    #[arg(long, default_value_t = true)]
    strict: bool,
}

impl ParamArgs {
    fn to_config(&self, seed: u64) -> Result<ExperimentConfig, String> {
        let alpha = parse_decimal_rat(&self.alpha).ok_or("bad --alpha")?;
        let beta = match &self.beta {
            Some(b) => Some(parse_decimal_rat(b).ok_or("bad --beta")?),
            None => None,
        };
        let rho = parse_decimal_rat(&self.rho).ok_or("bad --rho")?;
        let mut ties = Vec::new();
        for part in self.ties.split(',') {
            ties.push(TieBreak::parse(part.trim()).ok_or_else(|| format!("bad tie-break `{part}`"))?);
        }
        let cfg = ExperimentConfig {
            alpha,
            beta,
            rho,
            ties,
            solver_nodes: self.solver_nodes,
            strict: self.strict,
            seed,
            ..ExperimentConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random instance.
    Gen {
        #[arg(long, default_value_t = 8)]
        m: u32,
        #[arg(long, default_value_t = 4)]
        n: u32,
        #[arg(long, default_value_t = 10)]
        t: u32,
        /// uniform:<rate> | bursty:<burst>,<period> | trickle:<rate>
        #[arg(long, default_value = "uniform:0.9")]
        profile: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        max_packets: u32,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a policy on an instance and emit the trace as JSONL.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "lqd")]
        policy: String,
        #[arg(long, default_value = "min")]
        tie: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the exact offline optimum (optionally brute force).
    Opt {
        #[arg(long)]
        instance: PathBuf,
        /// Use the exhaustive oracle instead of branch and bound.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 14)]
        oracle_cap: u32,
        #[arg(long, default_value_t = 20_000_000)]
        solver_nodes: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and export the full analysis ledger for one tie-break.
    Analyze {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "min")]
        tie: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole check battery on one instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hill-climb for instances with a large certified OPT/LQD ratio.
    Search {
        #[arg(long, default_value_t = 4)]
        m: u32,
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 10)]
        t: u32,
        #[arg(long, default_value_t = 20_000)]
        budget: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        restarts: u32,
        #[arg(long, default_value_t = 32)]
        max_packets: u32,
        #[arg(long, default_value_t = 4_000_000)]
        solver_nodes: u64,
        /// Champion instance output path; a `.meta.json` sidecar records
        /// seed, budget, and the ratio.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the closed-form bound: alpha*, rho*, and 1 + 1/rho*.
    Rho {
        /// Evaluate rho at one alpha instead of optimizing.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Known competitive-ratio bounds for a given M and N.
    Bounds {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
    },
    /// Run the experiment battery and write a results directory.
    Suite {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        count: u32,
        #[arg(long, default_value_t = 24)]
        burst_trickle: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        m_max: u32,
        #[arg(long, default_value_t = 6)]
        n_max: u32,
        #[arg(long, default_value_t = 12)]
        t_max: u32,
        #[command(flatten)]
        params: ParamArgs,
    },
}

fn load_instance(path: &PathBuf) -> Result<Instance, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    codec::decode_instance(&text).map_err(|e| e.to_string())
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

fn parse_profile(s: &str) -> Result<LoadProfile, String> {
    let (kind, rest) = s.split_once(':').ok_or("profile needs kind:params")?;
    match kind {
        "uniform" => Ok(LoadProfile::Uniform { rate: rest.parse().map_err(|_| "bad rate")? }),
        "trickle" => Ok(LoadProfile::Trickle { rate: rest.parse().map_err(|_| "bad rate")? }),
        "bursty" => {
            let (b, p) = rest.split_once(',').ok_or("bursty needs burst,period")?;
            Ok(LoadProfile::Bursty {
                burst: b.parse().map_err(|_| "bad burst")?,
                period: p.parse().map_err(|_| "bad period")?,
            })
        }
        _ => Err(format!("unknown profile kind `{kind}`")),
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Gen { m, n, t, profile, seed, max_packets, out } => {
            let params = GenParams {
                capacity: m,
                queues: n,
                horizon: t,
                profile: parse_profile(&profile)?,
                seed,
                max_packets,
            };
            let inst = gen_random(&params).map_err(|e| e.to_string())?;
            emit(&out, &codec::encode_instance(&inst))?;
            Ok(true)
        }
        Command::Simulate { instance, policy, tie, out } => {
            let inst = load_instance(&instance)?;
            let policy = Policy::parse(&policy).ok_or(format!("unknown policy `{policy}`"))?;
            let tie = TieBreak::parse(&tie).ok_or(format!("unknown tie `{tie}`"))?;
            let trace = simulate_policy(&inst, policy, &tie);
            emit(&out, &codec::encode_trace_jsonl(&trace))?;
            Ok(true)
        }
        Command::Opt { instance, oracle, oracle_cap, solver_nodes, out } => {
            let inst = load_instance(&instance)?;
            let schedule = if oracle {
                brute_force(&inst, oracle_cap).map_err(|e| e.to_string())?
            } else {
                solve_exact(&inst, &SearchLimits { max_nodes: solver_nodes })
            };
            eprintln!(
                "throughput={} certified={} relaxed_bound={}",
                schedule.throughput,
                schedule.certified,
                upper_bound_relaxed(&inst)
            );
            emit(&out, &codec::encode_schedule(&schedule))?;
            Ok(true)
        }
        Command::Analyze { instance, tie, params, out } => {
            let cfg = params.to_config(1)?;
            let inst = load_instance(&instance)?;
            let tie = TieBreak::parse(&tie).ok_or(format!("unknown tie `{tie}`"))?;
            let normalized =
                lqdlab::switch::normalize_a2(&inst, &tie).map_err(|e| e.to_string())?;
            let trace = lqdlab::switch::simulate_lqd(&normalized, &tie);
            let schedule = solve_exact(&normalized, &SearchLimits { max_nodes: cfg.solver_nodes });
            let beta = cfg.beta_value();
            let ledger = build_ledger(&normalized, &trace, &schedule, &tie, &cfg.alpha, Some(&beta))
                .map_err(|e| e.to_string())?;
            emit(&out, &codec::encode_ledger(&ledger))?;
            Ok(true)
        }
        Command::Verify { instance, params, out } => {
            let cfg = params.to_config(1)?;
            let inst = load_instance(&instance)?;
            let outcome = verify_instance("cli", &inst, &cfg).map_err(|e| e.to_string())?;
            let mut report = outcome.report.clone();
            report.checks.get_mut("fact1").unwrap().merge(&lqdlab::verify::fact1_outcome(128));
            report
                .checks
                .get_mut("claim1")
                .unwrap()
                .merge(&lqdlab::verify::claim1_outcome(500, cfg.seed ^ 0xCAFE));
            for (id, check) in &report.checks {
                eprintln!(
                    "{id}: {:?} ({} applied, {} failed)",
                    check.status, check.applicable, check.failed
                );
            }
            eprintln!(
                "lqd={} opt={} ratio={:.6} a1_flags={}",
                outcome.lqd, outcome.opt, outcome.ratio, outcome.a1_flags
            );
            emit(&out, &codec::encode_report(&report))?;
            Ok(report.all_pass())
        }
        Command::Search { m, n, t, budget, seed, restarts, max_packets, solver_nodes, out } => {
            let params = SearchParams {
                capacity: m,
                max_queues: n,
                horizon: t,
                max_packets,
                solver_nodes,
            };
            let ties = search_ties(seed);
            let runs: Vec<_> = (0..restarts.max(1))
                .map(|r| adversarial_search(&params, &ties, budget, seed.wrapping_add(r as u64)))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let best = runs
                .into_iter()
                .max_by(|a, b| a.ratio.partial_cmp(&b.ratio).unwrap())
                .expect("at least one restart");
            eprintln!(
                "champion ratio={:.6} opt={} lqd={} evaluated={} skipped={}",
                best.ratio, best.opt, best.worst_lqd, best.evaluated, best.skipped_uncertified
            );
            if let Some(path) = &out {
                fs::write(path, codec::encode_instance(&best.champion))
                    .map_err(|e| e.to_string())?;
                let meta = serde_json::json!({
                    "seed": seed,
                    "budget": budget,
                    "restarts": restarts,
                    "ratio": best.ratio,
                    "opt": best.opt,
                    "worst_lqd": best.worst_lqd,
                    "history": best.history.iter().map(|h| (h.iteration, h.ratio)).collect::<Vec<_>>(),
                });
                let sidecar = path.with_extension("meta.json");
                fs::write(&sidecar, serde_json::to_string_pretty(&meta).unwrap())
                    .map_err(|e| e.to_string())?;
            } else {
                println!("{}", codec::encode_instance(&best.champion));
            }
            Ok(true)
        }
        Command::Rho { alpha } => {
            match alpha {
                Some(a) => {
                    let r = rho_of_alpha(a).map_err(|e| e.to_string())?;
                    println!("{}", serde_json::to_string_pretty(&r).unwrap());
                    eprintln!(
                        "alpha={:.6} beta={:.6} rho={:.6} ratio<={:.6} x*={:.6}",
                        r.alpha,
                        r.beta,
                        r.rho,
                        1.0 + 1.0 / r.rho,
                        r.x_star
                    );
                }
                None => {
                    let r = optimize_alpha().map_err(|e| e.to_string())?;
                    println!("{}", serde_json::to_string_pretty(&r).unwrap());
                    eprintln!(
                        "alpha*={:.6} beta*={:.6} rho*={:.6} ratio<={:.6} x*={:.6}",
                        r.alpha_star, r.beta_star, r.rho, r.ratio_bound, r.x_star
                    );
                }
            }
            Ok(true)
        }
        Command::Bounds { m, n } => {
            let b = known_bounds(m, n);
            println!("{}", serde_json::to_string_pretty(&b).unwrap());
            Ok(true)
        }
        Command::Suite { out, count, burst_trickle, seed, m_max, n_max, t_max, params } => {
            let base = params.to_config(seed)?;
            let cfg = SuiteConfig {
                base,
                random_count: count,
                burst_trickle_count: burst_trickle,
                m_max,
                n_max,
                t_max,
                out_dir: out,
                ..SuiteConfig::default()
            };
            let summary = run_suite(&cfg).map_err(|e| e.to_string())?;
            for (id, check) in &summary.report.checks {
                eprintln!(
                    "{id}: {:?} ({} applied, {} failed)",
                    check.status, check.applicable, check.failed
                );
            }
            eprintln!(
                "instances={} max_ratio={:.6} all_pass={}",
                summary.rows.len(),
                summary.max_ratio,
                summary.all_pass()
            );
            Ok(summary.all_pass())
        }
    }
}

fn main() -> ExitCode {
    if let Ok(workers) = std::env::var("LQDLAB_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
