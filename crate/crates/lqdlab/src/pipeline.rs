//! End-to-end runs: normalize, simulate, solve, rebuild the ledger, check
//! everything, and orchestrate whole experiment suites with persisted
//! artifacts.
//!
//! Queue-reuse normalization depends on the tie-break (queue identities
//! differ even though the size multiset does not), so each tie-break gets
//! its own normalized instance, offline optimum, and ledger. LQD throughput
//! is invariant across the set, which keeps per-instance summary rows
//! well-defined.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::codec;
use crate::config::ExperimentConfig;
use crate::gen::{gen_burst_trickle, gen_random, trim_after_drain, GenParams, LoadProfile};
use crate::ledger::{build_ledger, AnalysisLedger, LedgerError};
use crate::opt::{solve_exact, OptSchedule, SearchLimits};
use crate::switch::{check_a1, normalize_a2, simulate_lqd, Instance, SwitchError, Trace};
use crate::verify::{claim1_outcome, fact1_outcome, verify_ledger, VerificationReport, VerifyError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("could not generate an instance within caps after {0} attempts")]
    Generation(u32),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One tie-break's full analysis of an instance.
pub struct TieRun {
    pub label: String,
    pub normalized: Instance,
    pub trace: Trace,
    pub schedule: OptSchedule,
    pub ledger: AnalysisLedger,
    pub report: VerificationReport,
}

pub struct RunOutcome {
    pub id: String,
    pub instance: Instance,
    pub a1_flags: usize,
    pub per_tie: Vec<TieRun>,
    pub lqd: u64,
    /// Worst (largest) certified OPT across the tie set.
    pub opt: u64,
    pub ratio: f64,
    pub report: VerificationReport,
}

/// Simulate + solve + ledger + all checks for every configured tie-break.
pub fn verify_instance(
    id: &str,
    instance: &Instance,
    cfg: &ExperimentConfig,
) -> Result<RunOutcome, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let a1_flags = check_a1(instance, &cfg.ties[0]).flags.len();
    let beta = cfg.beta_value();
    let limits = SearchLimits { max_nodes: cfg.solver_nodes };

    let mut per_tie = Vec::new();
    let mut merged = VerificationReport::new(id);
    let mut lqd = 0u64;
    let mut opt = 0u64;
    for tie in &cfg.ties {
        let normalized = normalize_a2(instance, tie)?;
        let trace = simulate_lqd(&normalized, tie);
        let schedule = solve_exact(&normalized, &limits);
        let ledger = build_ledger(&normalized, &trace, &schedule, tie, &cfg.alpha, Some(&beta))?;
        let context = format!("{id}[{}]", tie.label());
        let report = verify_ledger(&ledger, &cfg.rho, cfg.strict, &context)?;
        lqd = trace.throughput();
        opt = opt.max(schedule.throughput);
        merged.merge(&report);
        per_tie.push(TieRun {
            label: tie.label(),
            normalized,
            trace,
            schedule,
            ledger,
            report,
        });
    }
    let ratio = if lqd > 0 { opt as f64 / lqd as f64 } else { 0.0 };
    Ok(RunOutcome { id: id.to_string(), instance: instance.clone(), a1_flags, per_tie, lqd, opt, ratio, report: merged })
}

// ── Suite orchestration ─────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub base: ExperimentConfig,
    pub random_count: u32,
    pub burst_trickle_count: u32,
    pub m_max: u32,
    pub n_max: u32,
    pub t_max: u32,
    /// Size of the always-on numeric sweeps folded into the suite report.
    pub fact1_max: u64,
    pub claim1_samples: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            base: ExperimentConfig::default(),
            random_count: 500,
            burst_trickle_count: 24,
            m_max: 12,
            n_max: 6,
            t_max: 12,
            fact1_max: 512,
            claim1_samples: 2_000,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub id: String,
    pub m: u32,
    pub n: u32,
    pub t: u32,
    pub lqd: u64,
    pub opt: u64,
    pub ratio: f64,
    pub checks_passed: u64,
    pub checks_failed: u64,
}

pub struct SuiteSummary {
    pub rows: Vec<SummaryRow>,
    pub report: VerificationReport,
    pub csv: String,
    pub max_ratio: f64,
}

impl SuiteSummary {
    pub fn all_pass(&self) -> bool {
        self.report.all_pass()
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic instance plan for the suite: a slice of the burst/trickle
/// family plus seeded random workloads mixing every profile.
pub fn suite_instances(cfg: &SuiteConfig) -> Result<Vec<(String, Instance)>, PipelineError> {
    let mut out = Vec::new();
    let tie = &cfg.base.ties[0];

    let mut bt = 0u32;
    'family: for m in [3u32, 4, 6, 8, 12] {
        for burst_queues in [1u32, 2] {
            for trickle in [2u32, 4, 8, 12] {
                if bt >= cfg.burst_trickle_count {
                    break 'family;
                }
                if m > cfg.m_max || trickle > cfg.t_max || burst_queues + 1 > cfg.n_max {
                    continue;
                }
                let inst = gen_burst_trickle(m, burst_queues, trickle);
                if inst.total_packets() > cfg.base.max_packets as u64 {
                    continue;
                }
                out.push((format!("bt{bt:03}"), trim_after_drain(&inst, tie)));
                bt += 1;
            }
        }
    }

    let mut state = cfg.base.seed;
    for i in 0..cfg.random_count {
        let mut attempts = 0u32;
        let inst = loop {
            attempts += 1;
            if attempts > 64 {
                return Err(PipelineError::Generation(attempts));
            }
            let s = splitmix64(&mut state);
            let m = 2 + (s % (cfg.m_max as u64 - 1)) as u32;
            let n = 2 + ((s >> 8) % (cfg.n_max as u64 - 1)) as u32;
            let t = 3 + ((s >> 16) % (cfg.t_max as u64 - 2)) as u32;
            let profile = match (s >> 24) % 3 {
                0 => LoadProfile::Uniform { rate: 0.3 + ((s >> 32) % 100) as f64 / 80.0 },
                1 => LoadProfile::Bursty {
                    burst: 2 + ((s >> 32) % (m as u64 + 2)) as u32,
                    period: 2 + ((s >> 40) % (t as u64)) as u32,
                },
                _ => LoadProfile::Trickle { rate: 0.4 + ((s >> 32) % 60) as f64 / 100.0 },
            };
            let params = GenParams {
                capacity: m,
                queues: n,
                horizon: t,
                profile,
                seed: splitmix64(&mut state),
                max_packets: cfg.base.max_packets,
            };
            match gen_random(&params) {
                Ok(inst) if inst.total_packets() > 0 => break trim_after_drain(&inst, tie),
                _ => continue,
            }
        };
        out.push((format!("r{i:05}"), inst));
    }
    Ok(out)
}

/// Runs the whole battery. With an output directory set, persists
/// instances, traces, ledgers, and reports per instance plus an atomically
/// written `summary.csv`.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteSummary, PipelineError> {
    cfg.base.validate().map_err(PipelineError::Config)?;
    let plan = suite_instances(cfg)?;

    if let Some(dir) = &cfg.out_dir {
        for sub in ["instances", "traces", "ledgers", "reports"] {
            fs::create_dir_all(dir.join(sub))?;
        }
    }

    let results: Vec<Result<RunOutcome, PipelineError>> = plan
        .par_iter()
        .map(|(id, inst)| {
            let outcome = verify_instance(id, inst, &cfg.base)?;
            if let Some(dir) = &cfg.out_dir {
                persist_outcome(dir, &outcome)?;
            }
            Ok(outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut report = VerificationReport::new("suite");
    let mut max_ratio = 0.0f64;
    for res in results {
        let outcome = res?;
        max_ratio = max_ratio.max(outcome.ratio);
        let (m, n) = (outcome.instance.buffer_capacity(), outcome.instance.queue_count());
        let t = outcome.instance.last_arrival_step().map_or(0, |s| s + 1);
        rows.push(SummaryRow {
            id: outcome.id.clone(),
            m,
            n,
            t,
            lqd: outcome.lqd,
            opt: outcome.opt,
            ratio: outcome.ratio,
            checks_passed: outcome.report.total_passed(),
            checks_failed: outcome.report.total_failed(),
        });
        report.merge(&outcome.report);
    }

    // Instance-independent numeric facts join the aggregated report once.
    let f1 = fact1_outcome(cfg.fact1_max);
    report.checks.get_mut("fact1").unwrap().merge(&f1);
    let c1 = claim1_outcome(cfg.claim1_samples, cfg.base.seed ^ 0xCAFE);
    report.checks.get_mut("claim1").unwrap().merge(&c1);

    let mut csv = String::from("id,m,n,t,lqd,opt,ratio,checks_passed\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{}\n",
            r.id, r.m, r.n, r.t, r.lqd, r.opt, r.ratio, r.checks_passed
        ));
    }
    if let Some(dir) = &cfg.out_dir {
        write_atomic(&dir.join("summary.csv"), csv.as_bytes())?;
    }
    Ok(SuiteSummary { rows, report, csv, max_ratio })
}

fn persist_outcome(dir: &Path, outcome: &RunOutcome) -> Result<(), PipelineError> {
    fs::write(
        dir.join("instances").join(format!("{}.json", outcome.id)),
        codec::encode_instance(&outcome.instance),
    )?;
    for tie in &outcome.per_tie {
        let stem = format!("{}.{}", outcome.id, tie.label);
        fs::write(dir.join("traces").join(format!("{stem}.jsonl")), codec::encode_trace_jsonl(&tie.trace))?;
        fs::write(dir.join("ledgers").join(format!("{stem}.json")), codec::encode_ledger(&tie.ledger))?;
        fs::write(dir.join("reports").join(format!("{stem}.json")), codec::encode_report(&tie.report))?;
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switch::{build_instance, ArrivalEvent};

    fn ev(step: u32, queue: u32, count: u32) -> ArrivalEvent {
        ArrivalEvent { step, queue, count }
    }

    #[test]
    fn verify_instance_two_queue_burst() {
        let inst = build_instance(3, &[ev(0, 0, 3), ev(0, 1, 2)]).unwrap();
        let cfg = ExperimentConfig::default();
        let outcome = verify_instance("t0", &inst, &cfg).unwrap();
        assert!(outcome.report.all_pass(), "failed: {:?}", outcome.report.failed_ids());
        assert_eq!(outcome.lqd, 3);
        assert_eq!(outcome.opt, 3);
        assert_eq!(outcome.per_tie.len(), 3);
    }

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let cfg = SuiteConfig {
            random_count: 40,
            burst_trickle_count: 6,
            fact1_max: 64,
            claim1_samples: 200,
            ..SuiteConfig::default()
        };
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a.csv, b.csv);
        assert!(a.all_pass(), "failed: {:?}", a.report.failed_ids());
        assert!(a.max_ratio <= 1.70683 + 1e-12);
        assert!(a.rows.len() == 46);
    }
}
