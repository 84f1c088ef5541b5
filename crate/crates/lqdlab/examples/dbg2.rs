use lqdlab::config::ExperimentConfig;
use lqdlab::ledger::build_ledger;
use lqdlab::opt::{solve_exact, SearchLimits};
use lqdlab::pipeline::{suite_instances, SuiteConfig};
use lqdlab::switch::{normalize_a2, simulate_lqd, TieBreak};

fn main() {
    let cfg = SuiteConfig { random_count: 4000, burst_trickle_count: 24, ..SuiteConfig::default() };
    let plan = suite_instances(&cfg).unwrap();
    let (_, inst) = plan.iter().find(|(pid, _)| pid == "r00035").unwrap();
    let tie = TieBreak::MaxQueueId;
    let norm = normalize_a2(inst, &tie).unwrap();
    println!("normalized {:?}", norm);
    let trace = simulate_lqd(&norm, &tie);
    let sched = solve_exact(&norm, &SearchLimits::default());
    println!("lqd={} opt={}", trace.throughput(), sched.throughput);
    let base = ExperimentConfig::default();
    let ledger = build_ledger(&norm, &trace, &sched, &tie, &base.alpha, Some(&base.beta_value())).unwrap();
    println!("t_q={:?} taus={:?} horizon={}", ledger.phases.t_q, ledger.phases.taus, ledger.horizon);
    println!("e_q={:?} m_q={:?} ehat_q={:?}", ledger.extras.e_q, ledger.mapping.m_q, ledger.ehat_q);
    println!("unassigned={:?}", ledger.mapping.unassigned);
    println!("assignments={:?}", ledger.mapping.assignments);
    for t in 0..ledger.horizon {
        let n = ledger.queue_count;
        let lq: Vec<u32> = (0..n).map(|q| ledger.lqd_size(t, q)).collect();
        let op: Vec<u32> = (0..n).map(|q| ledger.opt_size(t, q)).collect();
        let le: Vec<u32> = (0..n).map(|q| ledger.extras.lqd_extra[t as usize][q as usize] as u32).collect();
        let oe: Vec<u32> = (0..n).map(|q| ledger.extras.opt_extra[t as usize][q as usize] as u32).collect();
        println!("t={t} lqd={lq:?} opt={op:?} lqdx={le:?} optx={oe:?}");
    }
    println!("q_sets={:?}", ledger.phases.q_sets);
    println!("t_prime: {:?}", (0..ledger.queue_count).map(|q| ledger.t_prime(q)).collect::<Vec<_>>());
    for ((i, q), view) in &ledger.views {
        println!(
            "phase {i} q={q}: live={:?} dying={:?} sigma={} sigma'={} ehat_iq={} e_iq={}",
            view.live, view.dying, view.sigma, view.sigma_next, view.ehat_iq, view.e_iq
        );
    }
}
