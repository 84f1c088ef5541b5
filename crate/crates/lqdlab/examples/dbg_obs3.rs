use lqdlab::pipeline::{run_suite, SuiteConfig};
use std::time::Instant;

fn main() {
    let count: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let cfg = SuiteConfig {
        random_count: count,
        burst_trickle_count: 24,
        fact1_max: 128,
        claim1_samples: 500,
        ..SuiteConfig::default()
    };
    let t0 = Instant::now();
    let s = run_suite(&cfg).unwrap();
    println!("suite of {} rows in {:?}, max_ratio={:.6}", s.rows.len(), t0.elapsed(), s.max_ratio);
    for (id, check) in &s.report.checks {
        println!(
            "{id:22} {:?}\tapplied={} failed={} skipped={} worst_slack={:?}",
            check.status, check.applicable, check.failed, check.skipped, check.worst_slack
        );
        if let Some(ce) = &check.counterexample {
            println!("   ce: {} phase={:?} q={:?} {}", ce.context, ce.phase, ce.queue, ce.detail);
        }
    }
    let overflowing = s.rows.iter().filter(|r| r.ratio > 1.0).count();
    println!("instances with OPT>LQD: {overflowing}/{}", s.rows.len());
}
