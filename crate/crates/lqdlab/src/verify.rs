//! Machine checks of the analysis inequalities on concrete ledgers, plus the
//! standalone numeric facts used to close the bound.
//!
//! Every check either passes, fails with a replayable counterexample, or is
//! skipped because its stated preconditions never applied; nothing is
//! silently omitted. Checks over counts, sigma values, and the profit split
//! run in exact rational arithmetic. Checks involving logarithms run in f64
//! with compensated summation and a 1e-9 slack so a true strict inequality
//! cannot fail from rounding.

use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};
use serde::Serialize;
use thiserror::Error;

use crate::ledger::AnalysisLedger;
use crate::switch::QueueId;
use crate::{rat_int, rat_to_f64, rat_u, Rat};

/// Tolerance for transcendental (log-based) inequalities.
pub const FLOAT_SLACK: f64 = 1e-9;

/// Every check id a verifier run reports, in reporting order.
pub const CHECK_IDS: &[&str] = &[
    "obs1",
    "obs2",
    "obs3",
    "obs4",
    "obs5",
    "lem1",
    "lem2",
    "lem3",
    "lem4",
    "lem5",
    "lem6",
    "lem7",
    "lem8",
    "eq1",
    "eq19",
    "s_total",
    "l_sum",
    "phi_feasibility",
    "phi_total",
    "throughput_identity",
    "global_ratio",
    "fact1",
    "claim1",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("refusing uncertified schedule in strict mode")]
    Uncertified,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    SkippedPrecondition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub context: String,
    pub phase: Option<u32>,
    pub queue: Option<u32>,
    pub detail: String,
}

/// Aggregated outcome of one check id over any number of applications.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub status: CheckStatus,
    pub applicable: u64,
    pub failed: u64,
    pub skipped: u64,
    /// Minimum margin (LHS minus RHS in the passing direction) observed.
    pub worst_slack: Option<f64>,
    pub counterexample: Option<Counterexample>,
}

impl CheckOutcome {
    fn empty() -> CheckOutcome {
        CheckOutcome {
            status: CheckStatus::SkippedPrecondition,
            applicable: 0,
            failed: 0,
            skipped: 0,
            worst_slack: None,
            counterexample: None,
        }
    }

    fn add_pass(&mut self, slack: f64) {
        self.applicable += 1;
        self.note_slack(slack);
        self.refresh();
    }

    fn add_fail(&mut self, slack: f64, ce: Counterexample) {
        self.applicable += 1;
        self.failed += 1;
        self.note_slack(slack);
        if self.counterexample.is_none() {
            self.counterexample = Some(ce);
        }
        self.refresh();
    }

    fn add_skip(&mut self) {
        self.skipped += 1;
        self.refresh();
    }

    fn note_slack(&mut self, slack: f64) {
        self.worst_slack = Some(match self.worst_slack {
            Some(w) => w.min(slack),
            None => slack,
        });
    }

    fn refresh(&mut self) {
        self.status = if self.failed > 0 {
            CheckStatus::Fail
        } else if self.applicable > 0 {
            CheckStatus::Pass
        } else {
            CheckStatus::SkippedPrecondition
        };
    }

    pub fn merge(&mut self, other: &CheckOutcome) {
        self.applicable += other.applicable;
        self.failed += other.failed;
        self.skipped += other.skipped;
        if let Some(s) = other.worst_slack {
            self.note_slack(s);
        }
        if self.counterexample.is_none() {
            self.counterexample = other.counterexample.clone();
        }
        self.refresh();
    }
}

/// Outcome of every check id for one run (or an aggregation of runs).
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub context: String,
    pub certified: bool,
    pub checks: BTreeMap<String, CheckOutcome>,
}

impl VerificationReport {
    pub fn new(context: &str) -> VerificationReport {
        let checks = CHECK_IDS
            .iter()
            .map(|&id| (id.to_string(), CheckOutcome::empty()))
            .collect();
        VerificationReport { context: context.to_string(), certified: true, checks }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, c)| c.status == CheckStatus::Fail)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn total_passed(&self) -> u64 {
        self.checks.values().map(|c| c.applicable - c.failed).sum()
    }

    pub fn total_failed(&self) -> u64 {
        self.checks.values().map(|c| c.failed).sum()
    }

    pub fn merge(&mut self, other: &VerificationReport) {
        self.certified = self.certified && other.certified;
        for (id, outcome) in &other.checks {
            self.checks.entry(id.clone()).or_insert_with(CheckOutcome::empty).merge(outcome);
        }
    }

    fn out(&mut self, id: &str) -> &mut CheckOutcome {
        self.checks.get_mut(id).expect("check id registered")
    }
}

fn ce(ctx: &str, phase: Option<u32>, queue: Option<u32>, detail: String) -> Counterexample {
    Counterexample { context: ctx.to_string(), phase, queue, detail }
}

/// Overflow test on the recorded LQD snapshots (Definition 1).
fn overflows_at(ledger: &AnalysisLedger, t: u32, q: QueueId) -> bool {
    if ledger.lqd_total_at(t) < ledger.buffer_capacity {
        return false;
    }
    let threshold = ledger.s_max(t).saturating_sub(1).max(1);
    ledger.lqd_size(t, q) >= threshold
}

/// Records an exact-rational `lhs >= rhs` application.
fn check_ge(
    report: &mut VerificationReport,
    id: &str,
    lhs: &Rat,
    rhs: &Rat,
    phase: Option<u32>,
    queue: Option<u32>,
    detail: impl Fn() -> String,
) {
    let slack = rat_to_f64(&(lhs - rhs));
    let ctx = report.context.clone();
    if lhs >= rhs {
        report.out(id).add_pass(slack);
    } else {
        report.out(id).add_fail(slack, ce(&ctx, phase, queue, detail()));
    }
}

/// Records a float `lhs >= rhs - FLOAT_SLACK` application.
fn check_ge_f64(
    report: &mut VerificationReport,
    id: &str,
    lhs: f64,
    rhs: f64,
    phase: Option<u32>,
    queue: Option<u32>,
    detail: impl Fn() -> String,
) {
    let slack = lhs - rhs;
    let ctx = report.context.clone();
    if slack >= -FLOAT_SLACK {
        report.out(id).add_pass(slack);
    } else {
        report.out(id).add_fail(slack, ce(&ctx, phase, queue, detail()));
    }
}

// ── Ledger-level verification ───────────────────────────────────────────────

/// Runs every per-ledger check at the given `rho`. `strict` refuses
/// ledgers built from uncertified schedules.
pub fn verify_ledger(
    ledger: &AnalysisLedger,
    rho: &Rat,
    strict: bool,
    context: &str,
) -> Result<VerificationReport, VerifyError> {
    if strict && !ledger.certified {
        return Err(VerifyError::Uncertified);
    }
    let mut report = VerificationReport::new(context);
    report.certified = ledger.certified;
    verify_phase_inequalities(ledger, &mut report);
    verify_l_increase(ledger, &mut report);
    verify_queue_totals(ledger, rho, &mut report);
    verify_global(ledger, rho, &mut report);
    Ok(report)
}

/// Observations 1-5 and Lemmas 1-4, per (phase, queue) pair at the stated
/// preconditions.
pub fn verify_phase_inequalities(ledger: &AnalysisLedger, report: &mut VerificationReport) {
    let n = ledger.queue_count;
    let alpha = ledger.alpha.clone();
    let ctx = report.context.clone();

    // Observation 1: for all t and q past its last overflow with positive
    // OPT size, the OPT surplus dominates the pending extras.
    for t in 0..ledger.horizon {
        for q in 0..n {
            if ledger.phases.t_q[q as usize] <= t as i64 && ledger.opt_size(t, q) > 0 {
                let surplus =
                    ledger.opt_size(t, q).saturating_sub(ledger.lqd_size(t, q)) as i64;
                let pending = ledger.extras.e_t_q[t as usize][q as usize] as i64;
                check_ge(
                    report,
                    "obs1",
                    &rat_int(surplus),
                    &rat_int(pending),
                    None,
                    Some(q),
                    || format!("step {t}: surplus {surplus} < pending extras {pending}"),
                );
            }
        }
    }

    // Observation 2: once dying, never live again; live turns dying only by
    // overflowing at the transition step.
    for q in 0..n {
        if ledger.ehat_q[q as usize] == 0 || ledger.phases.t_q[q as usize] < 0 {
            continue;
        }
        let start = ledger.phases.t_q[q as usize] as u32;
        let mut ever_dying = vec![false; n as usize];
        let mut prev_live = vec![false; n as usize];
        for t in start..ledger.horizon {
            let (live, dying) = ledger.live_split_at(q, t);
            let mut ok = true;
            let mut detail = String::new();
            for &q2 in &live {
                if ever_dying[q2 as usize] {
                    ok = false;
                    detail = format!("queue {q2} revived at step {t} w.r.t. {q}");
                }
            }
            if t > start {
                for &q2 in &dying {
                    if prev_live[q2 as usize] && !overflows_at(ledger, t, q2) {
                        ok = false;
                        detail = format!(
                            "queue {q2} went live->dying at step {t} without overflowing"
                        );
                    }
                }
            }
            let out = report.out("obs2");
            if ok {
                out.add_pass(0.0);
            } else {
                out.add_fail(-1.0, ce(&ctx, None, Some(q), detail));
            }
            for f in prev_live.iter_mut() {
                *f = false;
            }
            for &q2 in &live {
                prev_live[q2 as usize] = true;
            }
            for &q2 in &dying {
                ever_dying[q2 as usize] = true;
            }
        }
    }

    for ((i, q), view) in &ledger.views {
        let i = *i;
        let q = *q;
        let tau = ledger.phases.taus[i];
        let end = ledger.phases.phase_end(i);
        let len = rat_u((end - tau) as u64);
        let totals = &ledger.phase_totals[i];
        let live_count = rat_u(view.live.len() as u64);
        // Live queues are guaranteed non-empty (and transmitting) only up to
        // the step where the fixed queue's pending extras run out; a phase
        // can outlive that point, so the chargeable span caps there.
        let span = rat_u((ledger.t_prime(q).clamp(tau, end) - tau) as u64);

        // Observation 3: live queues transmit throughout the chargeable
        // span and only dying-queue transmissions can hide inside o^i.
        check_ge(report, "obs3", &rat_u(totals.n), &(live_count.clone() * span.clone()), Some(i as u32), Some(q), || {
            format!("n^i={} < |L|*span={}*{}", totals.n, view.live.len(), span)
        });
        let lhs = rat_u(totals.n) + alpha.clone() * rat_u(totals.o);
        let rhs = live_count.clone() * span.clone() + alpha.clone() * rat_u(view.d_q as u64);
        check_ge(report, "obs3", &lhs, &rhs, Some(i as u32), Some(q), || {
            format!("n+a*o < |L|*span + a*d (d={})", view.d_q)
        });

        // Observation 4: the live average cannot exceed the longest queue.
        let smax = rat_u(ledger.s_max(tau) as u64);
        check_ge(report, "obs4", &smax, &view.sigma.ceil(), Some(i as u32), Some(q), || {
            format!("ceil(sigma)={} > s_max={}", view.sigma.ceil(), smax)
        });

        // Observation 5: live queues hold >= 2 packets on average while the
        // fixed queue still has uncancelled extras.
        if !view.live.is_empty() && view.ehat_iq > 0 {
            check_ge(report, "obs5", &view.sigma, &rat_int(2), Some(i as u32), Some(q), || {
                format!("sigma={} < 2", view.sigma)
            });
        } else {
            report.out("obs5").add_skip();
        }

        // Lemma 1 (both forms) for pairs with pending uncancelled extras.
        // The subtrahend accounts for every way a queue can leave the live
        // set by the phase's end: `w` queues overflow one last time and turn
        // dying (holding at least sigma' - 1 packets each), and `dead`
        // queues drain empty, surrendering their place in the buffer
        // entirely. With no early deaths this reduces to the plain `- v`.
        if view.ehat_iq > 0 {
            let sigma = view.sigma.clone();
            let sigma_next = view.sigma_next.clone();
            let d = rat_u(view.d_q as u64);
            let u = rat_u(totals.u as u64);
            let (live_next, dying_next) = ledger.live_split_at(q, end);
            let dead = view
                .live
                .iter()
                .filter(|&&x| ledger.lqd_size(end, x) == 0)
                .count() as u64;
            let w = view
                .live
                .iter()
                .filter(|&&x| dying_next.binary_search(&x).is_ok())
                .count() as u64;
            debug_assert_eq!(live_next, view.live_next);
            let leavers = sigma_next.clone() * rat_u(dead) + rat_u(w);
            let rhs5 = (sigma_next.clone() - sigma.clone()) * live_count.clone()
                + sigma_next.clone() * u.clone()
                - leavers.clone();
            check_ge(report, "lem1", &d, &rhs5, Some(i as u32), Some(q), || {
                format!(
                    "d={} < (sigma'-sigma)|L|+sigma'*u-(sigma'*dead+w) with sigma={} sigma'={} \
                     |L|={} u={} dead={dead} w={w}",
                    view.d_q, view.sigma, view.sigma_next, view.live.len(), totals.u
                )
            });
            if sigma_next.is_positive() {
                let rhs6 = live_count.clone() * (sigma.clone() / sigma_next.clone() - rat_int(1))
                    + d.clone() / sigma_next.clone()
                    + leavers / sigma_next.clone();
                check_ge(report, "lem1", &rhs6, &u, Some(i as u32), Some(q), || {
                    format!("u={} exceeds the rearranged dying bound", totals.u)
                });
            }
        } else {
            report.out("lem1").add_skip();
        }

        // Lemma 2 applies only to short phases.
        if len <= view.sigma.clone() - rat_int(2) {
            let lhs = rat_u((totals.n + totals.o) as u64);
            let rhs = rat_u(totals.u as u64) * rat_int(2);
            check_ge(report, "lem2", &lhs, &rhs, Some(i as u32), Some(q), || {
                format!("u^i={} > (n+o)/2 with n+o={}", totals.u, totals.n + totals.o)
            });
        } else {
            report.out("lem2").add_skip();
        }
    }

    // Lemmas 3 and 4 quantify over q in Q^i; live/dying splits are computed
    // directly so that queues without a stored view still get checked.
    for i in 0..ledger.phases.phase_count() {
        let tau = ledger.phases.taus[i];
        let m_sum: u64 = ledger.phases.q_sets[i]
            .iter()
            .map(|&q2| ledger.mapping.m_q[q2 as usize] as u64)
            .sum();
        let ehat_total = ledger.phase_totals[i].ehat_total;
        for &q in &ledger.phases.q_sets[i] {
            let unmatched = ledger.ehat_q[q as usize];
            if unmatched == 0 {
                report.out("lem3").add_skip();
            } else {
                let (live, dying) = ledger.live_split_at(q, tau);
                let z = live.iter().filter(|&&x| ledger.opt_size(tau, x) > 0).count() as u64;
                let excess: u64 = dying
                    .iter()
                    .map(|&x| {
                        ledger.lqd_size(tau, x).saturating_sub(ledger.opt_size(tau, x)) as u64
                    })
                    .sum();
                let rhs = excess + live.len() as u64 - z;
                check_ge(report, "lem3", &rat_u(m_sum), &rat_u(rhs), Some(i as u32), Some(q), || {
                    format!("sum m={m_sum} < lqd-excess {excess} + empty-live {}", live.len() as u64 - z)
                });
            }

            if ledger.ehat_at(tau, q) > 0 {
                let (live, _) = ledger.live_split_at(q, tau);
                let sigma = ledger.sigma_at(q, tau);
                let rhs = rat_u(ehat_total);
                let lhs = (sigma.clone() - rat_int(1)) * rat_u(live.len() as u64);
                check_ge(report, "lem4", &lhs, &rhs, Some(i as u32), Some(q), || {
                    format!(
                        "ehat^i={ehat_total} > (sigma-1)|L| with sigma={sigma} |L|={}",
                        live.len()
                    )
                });
            } else {
                report.out("lem4").add_skip();
            }
        }
    }
}

/// Lemmas 5-7: lower bounds on the L-increase actually assigned by the
/// profit split, dispatched on how the live set and sigma evolve.
pub fn verify_l_increase(ledger: &AnalysisLedger, report: &mut VerificationReport) {
    let alpha = ledger.alpha.clone();
    let beta_formula = crate::ledger::beta_from_alpha(&alpha);
    let lem7_applicable =
        ledger.beta == beta_formula && alpha <= crate::rat_frac(8, 9);

    for ((i, q), view) in &ledger.views {
        let i = *i;
        let q = *q;
        if view.ehat_iq == 0 || !ledger.phases.q_sets[i].contains(&q) {
            continue;
        }
        let tau = ledger.phases.taus[i];
        let end = ledger.phases.phase_end(i);
        // Same chargeable-span cap as in Observation 3: the live set is only
        // good for one transmission per queue per step up to the extras'
        // exhaustion point. The decreasing-sigma bound needs no cap; its
        // per-step sum vanishes past that point on its own.
        let span = rat_u((ledger.t_prime(q).clamp(tau, end) - tau) as u64);
        let l_increase = ledger
            .profit
            .get(&(i, q))
            .map(|p| p.l_increase.clone())
            .expect("paid pair has a profit entry");
        let sigma = view.sigma.clone();
        let sigma_m1 = sigma.clone() - rat_int(1);
        if !sigma_m1.is_positive() {
            let ctx = report.context.clone();
            report.out("lem5").add_fail(
                -1.0,
                ce(&ctx, Some(i as u32), Some(q), "sigma <= 1 with pending extras".into()),
            );
            continue;
        }
        let ehat_iq = rat_u(view.ehat_iq as u64);

        if view.live_next.is_empty() {
            // No live queue in the next phase.
            let rhs = ehat_iq.clone() * span.clone() / sigma_m1.clone();
            check_ge(report, "lem5", &l_increase, &rhs, Some(i as u32), Some(q), || {
                format!("L-increase {l_increase} < ehat*len/(sigma-1) = {rhs}")
            });
            report.out("lem6").add_skip();
            report.out("lem7").add_skip();
        } else if view.sigma_next >= view.sigma {
            let rhs = ehat_iq.clone()
                * (alpha.clone() * (view.sigma_next.clone() - sigma.clone()) + span.clone())
                / sigma_m1.clone();
            check_ge(report, "lem6", &l_increase, &rhs, Some(i as u32), Some(q), || {
                format!("L-increase {l_increase} < nondecreasing-sigma bound {rhs}")
            });
            report.out("lem5").add_skip();
            report.out("lem7").add_skip();
        } else if lem7_applicable {
            let sum_ehat: u64 = (tau..end).map(|t| ledger.ehat_at(t, q) as u64).sum();
            let ehat_next = ledger.ehat_at(end, q);
            let mut rhs = rat_u(sum_ehat) / sigma_m1.clone()
                - rat_u(view.g_q as u64) / (rat_int(2) * sigma_m1.clone());
            if ehat_next > 0 {
                let sigma_next_m1 = view.sigma_next.clone() - rat_int(1);
                if !sigma_next_m1.is_positive() {
                    let ctx = report.context.clone();
                    report.out("lem7").add_fail(
                        -1.0,
                        ce(
                            &ctx,
                            Some(i as u32),
                            Some(q),
                            "sigma' <= 1 with pending extras in next phase".into(),
                        ),
                    );
                    continue;
                }
                rhs -= rat_u(ehat_next as u64)
                    * (rat_int(1) / sigma_next_m1 - rat_int(1) / sigma_m1.clone());
            }
            check_ge(report, "lem7", &l_increase, &rhs, Some(i as u32), Some(q), || {
                format!("L-increase {l_increase} < decreasing-sigma bound {rhs}")
            });
            report.out("lem5").add_skip();
            report.out("lem6").add_skip();
        } else {
            report.out("lem7").add_skip();
        }
    }
}

/// Witness sequences for the per-queue summation: `a` over phases from the
/// queue's own boundary, `b` re-indexed per step.
#[derive(Debug, Clone)]
pub struct LSumWitness {
    pub queue: QueueId,
    pub first_phase: usize,
    pub b0: u64,
    pub a: Vec<Rat>,
    pub b: Vec<Rat>,
}

pub fn lsum_witness(ledger: &AnalysisLedger, q: QueueId) -> Option<LSumWitness> {
    let first_phase = ledger.tq_phase[q as usize]?;
    let t_q = ledger.phases.t_q[q as usize] as u32;
    let ell = ledger.phases.phase_count();
    let mut a: Vec<Rat> = Vec::with_capacity(ell - first_phase);
    for i in first_phase..ell {
        let sigma = ledger.views.get(&(i, q)).map(|v| v.sigma.clone())?;
        let next = if i == first_phase {
            sigma.ceil() - rat_int(1)
        } else {
            let prev = a.last().unwrap().clone();
            (sigma - rat_int(1)).max(prev)
        };
        a.push(next);
    }
    let b0 = a[0].to_integer().to_u64()?;
    let mut b = Vec::new();
    for j in 0..(ledger.horizon.saturating_sub(t_q)) {
        let phase = ledger.phases.phase_of_step(t_q + j)?;
        b.push(a[phase - first_phase].clone());
    }
    Some(LSumWitness { queue: q, first_phase, b0, a, b })
}

/// Per-queue totals: the S-increase floor, the summed lower bound on the
/// whole profit, and the headline `phi_q >= rho * ehat_q`.
pub fn verify_queue_totals(ledger: &AnalysisLedger, rho: &Rat, report: &mut VerificationReport) {
    let alpha = rat_to_f64(&ledger.alpha);
    let beta = rat_to_f64(&ledger.beta);
    let ctx = report.context.clone();
    for q in 0..ledger.queue_count {
        let ehat = ledger.ehat_q[q as usize];
        if ehat == 0 {
            report.out("lem8").add_skip();
            report.out("eq19").add_skip();
            report.out("s_total").add_skip();
            report.out("l_sum").add_skip();
            continue;
        }
        let witness = match lsum_witness(ledger, q) {
            Some(w) => w,
            None => {
                report.out("lem8").add_fail(
                    -1.0,
                    ce(&ctx, None, Some(q), "no witness: queue with extras never overflowed".into()),
                );
                continue;
            }
        };
        let b0 = witness.b0;
        let phi = &ledger.phi_q[q as usize];
        let phi_f = rat_to_f64(phi);

        check_ge(report, "lem8", phi, &(rho.clone() * rat_u(ehat as u64)), None, Some(q), || {
            format!("phi_q={phi} < rho*ehat with ehat={ehat}")
        });

        let s_total: Rat = (0..ledger.phases.phase_count())
            .filter_map(|i| ledger.profit.get(&(i, q)))
            .map(|p| p.s_increase.clone())
            .sum();
        let s_floor = (rat_int(1) - &ledger.alpha - &ledger.beta) * rat_u(b0);
        check_ge(report, "s_total", &s_total, &s_floor, None, Some(q), || {
            format!("S-increase total {s_total} < (1-a-b)*b0 with b0={b0}")
        });

        let l_total: Rat = (0..ledger.phases.phase_count())
            .filter_map(|i| ledger.profit.get(&(i, q)))
            .map(|p| p.l_increase.clone())
            .sum();
        let e = ehat as f64;
        let b0f = b0 as f64;
        let log_bound =
            alpha * e * (1.0 + b0f / e) * (1.0 + e / b0f).ln() + alpha * e * (1.0 / alpha).ln();
        check_ge_f64(report, "l_sum", rat_to_f64(&l_total), log_bound, None, Some(q), || {
            format!("L-increase total {} < {log_bound}", rat_to_f64(&l_total))
        });

        let eq19_rhs = (1.0 - alpha - beta) * b0f + log_bound;
        check_ge_f64(report, "eq19", phi_f, eq19_rhs, None, Some(q), || {
            format!("phi_q={phi_f} < summed lower bound {eq19_rhs}")
        });
    }
}

/// Global accounting: the main inequality, the profit-total sanity, the
/// throughput identity, and the headline ratio bounds.
pub fn verify_global(ledger: &AnalysisLedger, rho: &Rat, report: &mut VerificationReport) {
    let lqd = rat_u(ledger.lqd_total);
    let opt = rat_u(ledger.opt_total);

    let extra_gap =
        rat_u(ledger.extras.opt_extra_total) - rat_u(ledger.extras.lqd_extra_total);
    check_ge(report, "eq1", &lqd, &(rho.clone() * extra_gap), None, None, || {
        format!(
            "rho*(OPT_EXTRA-LQD_EXTRA) > LQD with extras {}-{} and LQD={}",
            ledger.extras.opt_extra_total, ledger.extras.lqd_extra_total, ledger.lqd_total
        )
    });

    // Per-phase feasibility of the split, then the whole-run profit total.
    for i in 0..ledger.phases.phase_count() {
        let assigned: Rat = ledger
            .paid_queues(i)
            .iter()
            .filter_map(|&q| ledger.profit.get(&(i, q)))
            .map(|p| p.l_increase.clone() + p.s_increase.clone())
            .sum();
        let cap = rat_u(ledger.phase_totals[i].lqd) - ledger.phase_totals[i].delta_psi.clone();
        check_ge(report, "phi_feasibility", &cap, &assigned, Some(i as u32), None, || {
            format!("phase pays {assigned} over LQD^i - dPsi = {cap}")
        });
    }
    let phi_sum: Rat = ledger.phi_q.iter().cloned().sum();
    check_ge(report, "phi_total", &lqd, &phi_sum, None, None, || {
        format!(
            "sum phi={phi_sum} > LQD={}; localizes to the initial-potential accounting \
             if every per-phase feasibility check passed",
            ledger.lqd_total
        )
    });

    let lhs_ident = rat_u(ledger.opt_total) - rat_u(ledger.extras.opt_extra_total);
    let rhs_ident = rat_u(ledger.lqd_total) - rat_u(ledger.extras.lqd_extra_total);
    let ctx = report.context.clone();
    if lhs_ident == rhs_ident {
        report.out("throughput_identity").add_pass(0.0);
    } else {
        report.out("throughput_identity").add_fail(
            rat_to_f64(&(rhs_ident.clone() - lhs_ident.clone())).min(-1.0),
            ce(&ctx, None, None, format!("OPT-OPT_EXTRA={lhs_ident} != LQD-LQD_EXTRA={rhs_ident}")),
        );
    }

    let bound = crate::rat_frac(170683, 100000);
    check_ge(report, "global_ratio", &(bound * lqd.clone()), &opt, None, None, || {
        format!("OPT/LQD = {}/{} exceeds 1.70683", ledger.opt_total, ledger.lqd_total)
    });
    check_ge(report, "global_ratio", &(rat_int(2) * lqd.clone()), &opt, None, None, || {
        format!("OPT/LQD = {}/{} exceeds 2", ledger.opt_total, ledger.lqd_total)
    });
    if ledger.lqd_total == 0 && ledger.opt_total > 0 {
        report.out("global_ratio").add_fail(
            f64::NEG_INFINITY,
            ce(&ctx, None, None, "OPT positive while LQD is zero".into()),
        );
    }
}

// ── Standalone numeric facts ────────────────────────────────────────────────

/// Neumaier-compensated sum of `ln k` for `k` in `(m, n]`, i.e.
/// `ln(n!/m!)` by exact log-gamma summation.
fn ln_factorial_ratio(n: u64, m: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in (m + 1)..=n {
        let x = (k as f64).ln();
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Fact: `ln(n!/m!) > n ln(n/m) + (n-m)(ln m - 1)` for `n > m >= 1`.
/// Returns the truth value and the slack.
pub fn check_fact_stirling(n: u64, m: u64) -> Result<(bool, f64), VerifyError> {
    if m < 1 || n <= m {
        return Err(VerifyError::Precondition(format!("need n > m >= 1, got n={n} m={m}")));
    }
    let lhs = ln_factorial_ratio(n, m);
    let rhs = n as f64 * ((n as f64) / (m as f64)).ln() + (n - m) as f64 * ((m as f64).ln() - 1.0);
    let slack = lhs - rhs;
    Ok((slack > -FLOAT_SLACK, slack))
}

/// Sweeps the factorial fact over all `1 <= m < n <= n_max` using prefix
/// sums. Returns (pairs checked, all true, worst slack).
pub fn fact1_sweep(n_max: u64) -> (u64, bool, f64) {
    let mut prefix = vec![0.0f64; (n_max + 1) as usize];
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 1..=n_max {
        let x = (k as f64).ln();
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        prefix[k as usize] = sum + comp;
    }
    let mut checked = 0u64;
    let mut all = true;
    let mut worst = f64::INFINITY;
    for m in 1..n_max {
        let ln_m = (m as f64).ln();
        for n in (m + 1)..=n_max {
            let lhs = prefix[n as usize] - prefix[m as usize];
            let rhs = n as f64 * ((n as f64).ln() - ln_m) + (n - m) as f64 * (ln_m - 1.0);
            let slack = lhs - rhs;
            checked += 1;
            worst = worst.min(slack);
            if slack <= -FLOAT_SLACK {
                all = false;
            }
        }
    }
    (checked, all, worst)
}

/// Claim: for `alpha <= 0.6`, any integer `m >= b0 + 1`, and a
/// non-decreasing positive sequence starting at `b0 >= 1`,
/// `sum_{j<m} (alpha (b_{j+1}-b_j) + 1)/b_j - 1/(2 b_{m-1})
///  >= alpha (1 + ln(1/alpha) - ln b0 + ln m)`.
pub fn check_claim_inner_sum(
    b: &[f64],
    m: usize,
    alpha: f64,
) -> Result<(bool, f64), VerifyError> {
    if !(0.0 < alpha && alpha <= 0.6) {
        return Err(VerifyError::Precondition(format!("alpha={alpha} outside (0, 0.6]")));
    }
    if b.len() < m + 1 {
        return Err(VerifyError::Precondition(format!(
            "sequence of length {} too short for m={m}",
            b.len()
        )));
    }
    let b0 = b[0];
    if b0 < 1.0 {
        return Err(VerifyError::Precondition(format!("b0={b0} below 1")));
    }
    if (m as f64) < b0 + 1.0 {
        return Err(VerifyError::Precondition(format!("m={m} below b0+1={}", b0 + 1.0)));
    }
    for w in b.windows(2) {
        if w[1] < w[0] || w[0] <= 0.0 {
            return Err(VerifyError::Precondition("sequence not non-decreasing positive".into()));
        }
    }
    let mut lhs = 0.0f64;
    for j in 0..m {
        lhs += (alpha * (b[j + 1] - b[j]) + 1.0) / b[j];
    }
    lhs -= 1.0 / (2.0 * b[m - 1]);
    let rhs = alpha * (1.0 + (1.0 / alpha).ln() - b0.ln() + (m as f64).ln());
    let slack = lhs - rhs;
    Ok((slack > -FLOAT_SLACK, slack))
}

/// Small always-on sweeps so every report carries the standalone facts.
pub fn fact1_outcome(n_max: u64) -> CheckOutcome {
    let (checked, all, worst) = fact1_sweep(n_max);
    let mut out = CheckOutcome::empty();
    out.applicable = checked;
    out.worst_slack = Some(worst);
    if !all {
        out.failed = 1;
        out.counterexample =
            Some(ce("fact1", None, None, format!("sweep to {n_max} found a violation")));
    }
    out.refresh();
    out
}

pub fn claim1_outcome(samples: u64, seed: u64) -> CheckOutcome {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let alphas = [0.3, 0.5, 0.57635, 0.6];
    let mut out = CheckOutcome::empty();
    for s in 0..samples {
        let b0 = rng.random_range(1..=12u32) as f64;
        let m = (b0 as usize) + 1 + rng.random_range(0..24usize);
        let mut b = vec![b0];
        for _ in 0..m {
            let step = if rng.random_bool(0.4) {
                0.0
            } else {
                rng.random_range(0.0..3.0f64)
            };
            b.push(b.last().unwrap() + step);
        }
        let alpha = alphas[(s % 4) as usize];
        match check_claim_inner_sum(&b, m, alpha) {
            Ok((true, slack)) => out.add_pass(slack),
            Ok((false, slack)) => {
                out.add_fail(slack, ce("claim1", None, None, format!("b={b:?} m={m} alpha={alpha}")))
            }
            Err(e) => out.add_fail(-1.0, ce("claim1", None, None, e.to_string())),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::build_ledger;
    use crate::opt::{solve_exact, SearchLimits};
    use crate::switch::{build_instance, simulate_lqd, ArrivalEvent, TieBreak};

    fn ev(step: u32, queue: u32, count: u32) -> ArrivalEvent {
        ArrivalEvent { step, queue, count }
    }

    fn default_rho() -> Rat {
        crate::rat_frac(141478, 100000)
    }

    #[test]
    fn vacuous_pass_without_phases() {
        let inst = build_instance(16, &[ev(0, 0, 3), ev(1, 1, 2)]).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let sched = solve_exact(&inst, &SearchLimits::default());
        let alpha = crate::rat_frac(57635, 100000);
        let ledger =
            build_ledger(&inst, &lqd, &sched, &TieBreak::MinQueueId, &alpha, None).unwrap();
        let report = verify_ledger(&ledger, &default_rho(), true, "t").unwrap();
        assert!(report.all_pass(), "failed: {:?}", report.failed_ids());
        assert_eq!(report.checks["lem8"].applicable, 0);
    }

    #[test]
    fn overflow_instance_all_checks_pass() {
        let inst =
            build_instance(3, &[ev(0, 0, 3), ev(0, 1, 2), ev(2, 2, 3), ev(3, 1, 1)]).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let sched = solve_exact(&inst, &SearchLimits::default());
        let alpha = crate::rat_frac(57635, 100000);
        let ledger =
            build_ledger(&inst, &lqd, &sched, &TieBreak::MinQueueId, &alpha, None).unwrap();
        let report = verify_ledger(&ledger, &default_rho(), true, "t").unwrap();
        assert!(report.all_pass(), "failed: {:?}", report.failed_ids());
        assert!(report.checks["obs1"].applicable > 0);
    }

    #[test]
    fn strict_mode_rejects_uncertified() {
        let inst = build_instance(3, &[ev(0, 0, 3), ev(0, 1, 2)]).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let mut sched = solve_exact(&inst, &SearchLimits::default());
        sched.certified = false;
        let alpha = crate::rat_frac(57635, 100000);
        let ledger =
            build_ledger(&inst, &lqd, &sched, &TieBreak::MinQueueId, &alpha, None).unwrap();
        assert_eq!(
            verify_ledger(&ledger, &default_rho(), true, "t").unwrap_err(),
            VerifyError::Uncertified
        );
        assert!(verify_ledger(&ledger, &default_rho(), false, "t").is_ok());
    }

    #[test]
    fn fact_stirling_examples() {
        let (ok, slack) = check_fact_stirling(2, 1).unwrap();
        assert!(ok);
        // ln 2 vs 2 ln 2 - 1.
        assert!((slack - (2f64.ln() - (2.0 * 2f64.ln() - 1.0))).abs() < 1e-12);
        for m in 1..=10_000u64 {
            if m % 997 == 0 || m <= 16 {
                assert!(check_fact_stirling(m + 1, m).unwrap().0, "m={m}");
            }
        }
        assert!(check_fact_stirling(1, 1).is_err());
    }

    #[test]
    fn claim_constant_sequence() {
        // Constant b_j = b0: LHS = m/b0 - 1/(2 b0).
        let b0 = 3.0;
        let m = 7usize;
        let b = vec![b0; m + 1];
        let (ok, slack) = check_claim_inner_sum(&b, m, 0.57635).unwrap();
        let lhs = m as f64 / b0 - 1.0 / (2.0 * b0);
        let rhs = 0.57635 * (1.0 + (1.0 / 0.57635f64).ln() - b0.ln() + (m as f64).ln());
        assert!(ok);
        assert!((slack - (lhs - rhs)).abs() < 1e-12);
    }

    #[test]
    fn claim_boundary_alpha() {
        // alpha at 0.6 and m = b0 + 1.
        for b0 in 1..=24u32 {
            let m = b0 as usize + 1;
            let b = vec![b0 as f64; m + 1];
            assert!(check_claim_inner_sum(&b, m, 0.6).unwrap().0, "b0={b0}");
        }
        assert!(check_claim_inner_sum(&[1.0, 1.0, 1.0], 2, 0.7).is_err());
    }

    #[test]
    fn witness_sequences_monotone() {
        let inst =
            build_instance(4, &[ev(0, 0, 6), ev(0, 1, 2), ev(1, 2, 1), ev(3, 2, 5), ev(4, 1, 2)])
                .unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let sched = solve_exact(&inst, &SearchLimits::default());
        let alpha = crate::rat_frac(57635, 100000);
        let ledger =
            build_ledger(&inst, &lqd, &sched, &TieBreak::MinQueueId, &alpha, None).unwrap();
        for q in 0..ledger.queue_count {
            if ledger.ehat_q[q as usize] == 0 {
                continue;
            }
            let w = lsum_witness(&ledger, q).unwrap();
            assert!(w.a.windows(2).all(|p| p[0] <= p[1]));
            assert!(w.b.windows(2).all(|p| p[0] <= p[1]));
            assert!(w.b0 >= 1);
        }
    }
}
