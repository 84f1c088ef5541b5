//! Reconstruction of the competitive-analysis bookkeeping from an (LQD
//! trace, offline schedule) pair: extra packets, last-overflow steps and
//! phases, the extra-packet mapping, live/dying queue partitions, sigma
//! averages, the potential, and the per-phase profit split.
//!
//! All rational quantities (sigma, profit shares, the potential) are kept as
//! exact rationals; ceilings and strict inequalities downstream must not
//! drift. The analysis timeline runs to one past the last step in which
//! either algorithm still holds packets, which stands in for the paper-side
//! "infinity" end of the final phase.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::opt::OptSchedule;
use crate::switch::{Instance, QueueId, TieBreak, Trace};
use crate::{rat_int, rat_u, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("trace and schedule belong to different instances")]
    FingerprintMismatch,
    #[error("alpha must satisfy 0 < alpha <= 0.6")]
    AlphaOutOfRange,
    #[error("alpha + beta must be below 1")]
    BetaTooLarge,
    #[error("queue {0} still has pending extras at the analysis horizon")]
    OpenExtras(QueueId),
}

// ── Offline view ────────────────────────────────────────────────────────────

/// Per-step occupancy and transmissions implied by an offline schedule.
#[derive(Debug, Clone)]
pub struct OptView {
    pub horizon: u32,
    pub sizes: Vec<Vec<u32>>,
    pub transmit: Vec<Vec<bool>>,
    pub throughput: u64,
    pub certified: bool,
    pub instance_fingerprint: u64,
}

pub fn opt_view(instance: &Instance, schedule: &OptSchedule) -> OptView {
    let n = instance.queue_count() as usize;
    let horizon = schedule.transmit.iter().map(|r| r.step + 1).max().unwrap_or(0);
    let mut sizes = vec![vec![0u32; n]; horizon as usize];
    let mut transmit = vec![vec![false; n]; horizon as usize];
    for r in &schedule.transmit {
        transmit[r.step as usize][r.queue as usize] = true;
        for t in r.arrival_step..=r.step {
            sizes[t as usize][r.queue as usize] += 1;
        }
    }
    OptView {
        horizon,
        sizes,
        transmit,
        throughput: schedule.throughput,
        certified: schedule.certified,
        instance_fingerprint: schedule.instance_fingerprint,
    }
}

// ── Extras ──────────────────────────────────────────────────────────────────

/// Which algorithm transmitted "extra" (the other idle on that queue) at
/// each (step, queue), with the suffix counters `e^t_q`.
#[derive(Debug, Clone)]
pub struct ExtrasTimeline {
    pub horizon: u32,
    pub opt_extra: Vec<Vec<bool>>,
    pub lqd_extra: Vec<Vec<bool>>,
    pub e_q: Vec<u32>,
    /// `e_t_q[t][q]` = OPT-extras from `q` transmitted at step `t` or later;
    /// one extra row at `t = horizon` holding zeros.
    pub e_t_q: Vec<Vec<u32>>,
    pub opt_extra_total: u64,
    pub lqd_extra_total: u64,
}

pub fn compute_extras(lqd: &Trace, opt: &OptView) -> Result<ExtrasTimeline, LedgerError> {
    if lqd.instance_fingerprint != opt.instance_fingerprint {
        return Err(LedgerError::FingerprintMismatch);
    }
    let n = lqd.queue_count as usize;
    let horizon = (lqd.steps.len() as u32).max(opt.horizon);
    let mut opt_extra = vec![vec![false; n]; horizon as usize];
    let mut lqd_extra = vec![vec![false; n]; horizon as usize];
    for t in 0..horizon {
        for q in 0..n as u32 {
            let l = lqd.transmits_at(t, q);
            let o = opt
                .transmit
                .get(t as usize)
                .is_some_and(|row| row[q as usize]);
            if o && !l {
                opt_extra[t as usize][q as usize] = true;
            }
            if l && !o {
                lqd_extra[t as usize][q as usize] = true;
            }
        }
    }
    let mut e_t_q = vec![vec![0u32; n]; horizon as usize + 1];
    for t in (0..horizon as usize).rev() {
        for q in 0..n {
            e_t_q[t][q] = e_t_q[t + 1][q] + u32::from(opt_extra[t][q]);
        }
    }
    let e_q: Vec<u32> = (0..n).map(|q| e_t_q[0][q]).collect();
    let opt_extra_total = e_q.iter().map(|&v| v as u64).sum();
    let lqd_extra_total = lqd_extra.iter().flatten().filter(|&&b| b).count() as u64;
    Ok(ExtrasTimeline {
        horizon,
        opt_extra,
        lqd_extra,
        e_q,
        e_t_q,
        opt_extra_total,
        lqd_extra_total,
    })
}

// ── Phases ──────────────────────────────────────────────────────────────────

/// Last-overflow steps, the phase boundaries they induce, and the potential
/// bookkeeping sets.
#[derive(Debug, Clone)]
pub struct PhaseDecomposition {
    pub horizon: u32,
    /// Last overflow step per queue, -1 if the queue never overflows.
    pub t_q: Vec<i64>,
    pub taus: Vec<u32>,
    /// `Q^{tau_i}`: queues past their last overflow with positive OPT size.
    pub q_sets: Vec<Vec<QueueId>>,
    /// Active queues at `tau_i` that will overflow later.
    pub a_sets: Vec<Vec<QueueId>>,
    pub u: Vec<u32>,
    pub v: Vec<u32>,
}

impl PhaseDecomposition {
    pub fn phase_count(&self) -> usize {
        self.taus.len()
    }

    /// End of phase `i`: the next boundary, or the analysis horizon for the
    /// final phase.
    pub fn phase_end(&self, i: usize) -> u32 {
        self.taus.get(i + 1).copied().unwrap_or(self.horizon)
    }

    pub fn phase_of_step(&self, t: u32) -> Option<usize> {
        if self.taus.is_empty() || t < self.taus[0] {
            return None;
        }
        match self.taus.binary_search(&t) {
            Ok(i) => Some(i),
            Err(i) => Some(i - 1),
        }
    }
}

pub fn decompose_phases(lqd: &Trace, opt: &OptView) -> PhaseDecomposition {
    let n = lqd.queue_count as usize;
    let horizon = (lqd.steps.len() as u32).max(opt.horizon);
    let mut t_q = vec![-1i64; n];
    for rec in &lqd.steps {
        for q in crate::switch::overflow_set(rec, lqd.buffer_capacity) {
            t_q[q as usize] = rec.step as i64;
        }
        // A queue a packet was actually dropped from overflows at that step
        // even when the snapshot test misses it. The two sets differ only in
        // the degenerate case where the victim drains to zero at a step
        // whose longest queue holds a single packet; losing that step would
        // leave a rejection after the recorded t_q.
        for d in &rec.drops {
            t_q[d.queue as usize] = t_q[d.queue as usize].max(rec.step as i64);
        }
    }
    let mut taus: Vec<u32> = t_q.iter().filter(|&&t| t >= 0).map(|&t| t as u32).collect();
    taus.sort_unstable();
    taus.dedup();

    let lqd_size = |t: u32, q: u32| lqd.size_at(t, q);
    let opt_size = |t: u32, q: u32| -> u32 {
        opt.sizes.get(t as usize).map_or(0, |row| row[q as usize])
    };
    let active = |t: u32, q: u32| lqd_size(t, q) >= 1 || opt_size(t, q) >= 1;

    let mut q_sets = Vec::new();
    let mut a_sets = Vec::new();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for (i, &tau) in taus.iter().enumerate() {
        let end = taus.get(i + 1).copied().unwrap_or(horizon);
        q_sets.push(
            (0..n as u32)
                .filter(|&q| t_q[q as usize] <= tau as i64 && opt_size(tau, q) > 0)
                .collect(),
        );
        a_sets.push(
            (0..n as u32)
                .filter(|&q| active(tau, q) && t_q[q as usize] > tau as i64)
                .collect(),
        );
        u.push(
            (0..n as u32)
                .filter(|&q| active(end, q) && !active(tau, q) && t_q[q as usize] > end as i64)
                .count() as u32,
        );
        v.push(
            (0..n as u32)
                .filter(|&q| active(tau, q) && t_q[q as usize] == end as i64)
                .count() as u32,
        );
    }
    PhaseDecomposition { horizon, t_q, taus, q_sets, a_sets, u, v }
}

// ── Extra-packet mapping ────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MapAssignment {
    pub phase: u32,
    pub packet_step: u32,
    pub packet_queue: QueueId,
    pub assigned_queue: QueueId,
}

#[derive(Debug, Clone)]
pub struct MappingResult {
    pub m_q: Vec<u32>,
    pub assignments: Vec<MapAssignment>,
    pub unassigned: Vec<(u32, QueueId)>,
}

/// Assigns transmitted LQD-extra packets to queues that still have
/// uncancelled OPT-extras, phase by phase, preferring the queue with the
/// earliest last-overflow step. Extra packets are identified by their
/// (step, queue) and processed in that order inside a phase.
///
/// Eligibility demands `m'_q` below the extras still pending at the
/// packet's own step, not merely below the queue's total `e_q`: an
/// assignment must cancel an outstanding extra. Allowing cancellations of
/// extras already transmitted lets an early-overflow queue soak up
/// assignments that a later queue's pending extras needed, and the
/// unmatched-extra bound against the live-queue mass genuinely fails then.
pub fn run_mapping(
    phases: &PhaseDecomposition,
    extras: &ExtrasTimeline,
    lqd: &Trace,
    tie: &TieBreak,
) -> MappingResult {
    let n = extras.e_q.len();
    let mut m_q = vec![0u32; n];
    let mut assignments = Vec::new();
    let mut unassigned = Vec::new();
    let mut picker = crate::switch::TiePicker::new(tie);

    let mut packets: Vec<(u32, QueueId)> = Vec::new();
    for t in 0..extras.horizon {
        for q in 0..n as u32 {
            if extras.lqd_extra[t as usize][q as usize] {
                packets.push((t, q));
            }
        }
    }
    for (t, pq) in packets {
        let phase = match phases.phase_of_step(t) {
            Some(i) => i,
            None => {
                unassigned.push((t, pq));
                continue;
            }
        };
        let eligible: Vec<QueueId> = phases.q_sets[phase]
            .iter()
            .copied()
            .filter(|&q| m_q[q as usize] < extras.e_t_q[t as usize][q as usize])
            .collect();
        if eligible.is_empty() {
            unassigned.push((t, pq));
            continue;
        }
        let min_tq = eligible.iter().map(|&q| phases.t_q[q as usize]).min().unwrap();
        let candidates: Vec<QueueId> = eligible
            .into_iter()
            .filter(|&q| phases.t_q[q as usize] == min_tq)
            .collect();
        let sizes = lqd.steps.get(t as usize).map(|s| s.sizes.as_slice()).unwrap_or(&[]);
        let chosen = if candidates.len() == 1 {
            candidates[0]
        } else {
            picker.pick(sizes, &candidates)
        };
        m_q[chosen as usize] += 1;
        assignments.push(MapAssignment {
            phase: phase as u32,
            packet_step: t,
            packet_queue: pq,
            assigned_queue: chosen,
        });
    }
    MappingResult { m_q, assignments, unassigned }
}

// ── Per-phase, per-queue views and the profit split ─────────────────────────

/// Everything the lemma checks need about one (phase, fixed queue) pair.
#[derive(Debug, Clone)]
pub struct PhaseQueueView {
    pub phase: usize,
    pub queue: QueueId,
    pub live: Vec<QueueId>,
    pub dying: Vec<QueueId>,
    pub live_next: Vec<QueueId>,
    pub sigma: Rat,
    pub sigma_next: Rat,
    /// `e^{tau_i}_q` and its mapping-adjusted version.
    pub e_iq: u32,
    pub ehat_iq: u32,
    pub o_q: u32,
    pub g_q: u32,
    pub h_q: u32,
    pub d_q: u32,
    pub z_q: u32,
}

#[derive(Debug, Clone)]
pub struct PhaseTotals {
    pub lqd: u64,
    pub n: u64,
    pub o: u64,
    pub u: u32,
    pub v: u32,
    pub delta_psi: Rat,
    /// `ehat^i = sum over Q^i of ehat^i_q`.
    pub ehat_total: u64,
}

#[derive(Debug, Clone)]
pub struct ProfitEntry {
    pub l_increase: Rat,
    pub s_increase: Rat,
}

#[derive(Debug, Clone)]
pub struct AnalysisLedger {
    pub alpha: Rat,
    pub beta: Rat,
    pub queue_count: u32,
    pub buffer_capacity: u32,
    pub horizon: u32,
    pub lqd_total: u64,
    pub opt_total: u64,
    pub certified: bool,
    pub instance_fingerprint: u64,
    pub extras: ExtrasTimeline,
    pub phases: PhaseDecomposition,
    pub mapping: MappingResult,
    pub ehat_q: Vec<u32>,
    /// Index of the phase whose boundary is `t_q`, per queue with `t_q >= 0`.
    pub tq_phase: Vec<Option<usize>>,
    pub phase_totals: Vec<PhaseTotals>,
    pub views: BTreeMap<(usize, QueueId), PhaseQueueView>,
    pub profit: BTreeMap<(usize, QueueId), ProfitEntry>,
    pub phi_q: Vec<Rat>,
    pub pre_phase_profit: u64,
    lqd_sizes: Vec<Vec<u32>>,
    opt_sizes: Vec<Vec<u32>>,
    lqd_transmit: Vec<Vec<bool>>,
    opt_transmit: Vec<Vec<bool>>,
    t_prime: Vec<u32>,
}

impl AnalysisLedger {
    pub fn lqd_size(&self, t: u32, q: QueueId) -> u32 {
        self.lqd_sizes.get(t as usize).map_or(0, |r| r[q as usize])
    }

    pub fn opt_size(&self, t: u32, q: QueueId) -> u32 {
        self.opt_sizes.get(t as usize).map_or(0, |r| r[q as usize])
    }

    pub fn lqd_transmits(&self, t: u32, q: QueueId) -> bool {
        self.lqd_transmit.get(t as usize).is_some_and(|r| r[q as usize])
    }

    pub fn opt_transmits(&self, t: u32, q: QueueId) -> bool {
        self.opt_transmit.get(t as usize).is_some_and(|r| r[q as usize])
    }

    pub fn s_max(&self, t: u32) -> u32 {
        self.lqd_sizes
            .get(t as usize)
            .map_or(0, |r| r.iter().copied().max().unwrap_or(0))
    }

    pub fn lqd_total_at(&self, t: u32) -> u32 {
        self.lqd_sizes.get(t as usize).map_or(0, |r| r.iter().sum())
    }

    /// First step at which all of `q`'s OPT-extras have been transmitted.
    pub fn t_prime(&self, q: QueueId) -> u32 {
        self.t_prime[q as usize]
    }

    /// `ehat^t_q = max(e^t_q - m_q, 0)`.
    pub fn ehat_at(&self, t: u32, q: QueueId) -> u32 {
        let t = (t as usize).min(self.extras.e_t_q.len() - 1);
        self.extras.e_t_q[t][q as usize].saturating_sub(self.mapping.m_q[q as usize])
    }

    /// Live/dying split w.r.t. `fixed_q` at an arbitrary step. The partition
    /// covers exactly the queues holding LQD packets at `t`.
    pub fn live_split_at(&self, fixed_q: QueueId, t: u32) -> (Vec<QueueId>, Vec<QueueId>) {
        let tp = self.t_prime(fixed_q);
        let mut live = Vec::new();
        let mut dying = Vec::new();
        for q2 in 0..self.queue_count {
            if self.lqd_size(t, q2) == 0 {
                continue;
            }
            let future_overflow = (t as i64) < self.phases.t_q[q2 as usize];
            let clause_two =
                self.extras.e_q[q2 as usize] == 0 && self.lqd_size(tp, q2) > 0;
            if future_overflow || clause_two {
                live.push(q2);
            } else {
                dying.push(q2);
            }
        }
        (live, dying)
    }

    pub fn sigma_at(&self, fixed_q: QueueId, t: u32) -> Rat {
        let (live, _) = self.live_split_at(fixed_q, t);
        sigma_of(&live, |q| self.lqd_size(t, q))
    }

    /// Stored per-phase view for an eligible `(phase, queue)` pair.
    pub fn view(&self, phase: usize, q: QueueId) -> Option<&PhaseQueueView> {
        self.views.get(&(phase, q))
    }

    /// Queues the profit split actually pays in phase `i`.
    pub fn paid_queues(&self, phase: usize) -> Vec<QueueId> {
        self.phases.q_sets[phase]
            .iter()
            .copied()
            .filter(|&q| self.ehat_at(self.phases.taus[phase], q) > 0)
            .collect()
    }
}

fn sigma_of(live: &[QueueId], size: impl Fn(QueueId) -> u32) -> Rat {
    if live.is_empty() {
        return rat_int(1);
    }
    let sum: u64 = live.iter().map(|&q| size(q) as u64).sum();
    rat_u(sum) / rat_u(live.len() as u64)
}

/// Default profit-split second parameter: `beta = alpha^2 / (8 (1 - alpha))`.
pub fn beta_from_alpha(alpha: &Rat) -> Rat {
    alpha * alpha / (rat_int(8) * (rat_int(1) - alpha))
}

/// Builds the full analysis ledger for one (instance, LQD trace, schedule)
/// run. `beta` defaults to the `alpha^2/(8(1-alpha))` formula.
pub fn build_ledger(
    instance: &Instance,
    lqd: &Trace,
    schedule: &OptSchedule,
    tie: &TieBreak,
    alpha: &Rat,
    beta: Option<&Rat>,
) -> Result<AnalysisLedger, LedgerError> {
    if lqd.instance_fingerprint != instance.fingerprint()
        || schedule.instance_fingerprint != instance.fingerprint()
    {
        return Err(LedgerError::FingerprintMismatch);
    }
    if !alpha.is_positive() || alpha > &crate::rat_frac(3, 5) {
        return Err(LedgerError::AlphaOutOfRange);
    }
    let beta = match beta {
        Some(b) => b.clone(),
        None => beta_from_alpha(alpha),
    };
    if alpha + &beta >= rat_int(1) {
        return Err(LedgerError::BetaTooLarge);
    }

    let n = instance.queue_count() as usize;
    let view = opt_view(instance, schedule);
    let extras = compute_extras(lqd, &view)?;
    let phases = decompose_phases(lqd, &view);
    let mapping = run_mapping(&phases, &extras, lqd, tie);
    let horizon = extras.horizon;

    let mut lqd_sizes = vec![vec![0u32; n]; horizon as usize];
    let mut lqd_transmit = vec![vec![false; n]; horizon as usize];
    for rec in &lqd.steps {
        lqd_sizes[rec.step as usize] = rec.sizes.clone();
        for &q in &rec.transmit {
            lqd_transmit[rec.step as usize][q as usize] = true;
        }
    }
    let mut opt_sizes = vec![vec![0u32; n]; horizon as usize];
    let mut opt_transmit = vec![vec![false; n]; horizon as usize];
    for t in 0..view.horizon as usize {
        opt_sizes[t] = view.sizes[t].clone();
        opt_transmit[t] = view.transmit[t].clone();
    }

    let t_prime: Vec<u32> = (0..n)
        .map(|q| {
            (0..=horizon)
                .find(|&t| extras.e_t_q[t as usize][q] == 0)
                .expect("suffix counter reaches zero by the horizon")
        })
        .collect();
    for q in 0..n {
        if extras.e_t_q[horizon as usize][q] != 0 {
            return Err(LedgerError::OpenExtras(q as u32));
        }
    }

    let ehat_q: Vec<u32> =
        (0..n).map(|q| extras.e_q[q] - mapping.m_q[q]).collect();
    let tq_phase: Vec<Option<usize>> = (0..n)
        .map(|q| {
            let t = phases.t_q[q];
            if t < 0 {
                None
            } else {
                phases.taus.binary_search(&(t as u32)).ok()
            }
        })
        .collect();

    let mut ledger = AnalysisLedger {
        alpha: alpha.clone(),
        beta: beta.clone(),
        queue_count: instance.queue_count(),
        buffer_capacity: instance.buffer_capacity(),
        horizon,
        lqd_total: lqd.throughput(),
        opt_total: schedule.throughput,
        certified: schedule.certified,
        instance_fingerprint: instance.fingerprint(),
        extras,
        phases,
        mapping,
        ehat_q,
        tq_phase,
        phase_totals: Vec::new(),
        views: BTreeMap::new(),
        profit: BTreeMap::new(),
        phi_q: vec![Rat::zero(); n],
        pre_phase_profit: 0,
        lqd_sizes,
        opt_sizes,
        lqd_transmit,
        opt_transmit,
        t_prime,
    };

    let ell = ledger.phases.phase_count();
    let transmissions_in = |from: u32, to: u32, q: QueueId, l: &AnalysisLedger| -> u32 {
        (from..to).filter(|&t| l.lqd_transmits(t, q)).count() as u32
    };

    // Profit before the first boundary belongs to no phase.
    let first_tau = ledger.phases.taus.first().copied().unwrap_or(horizon);
    ledger.pre_phase_profit = (0..first_tau)
        .map(|t| (0..n as u32).filter(|&q| ledger.lqd_transmits(t, q)).count() as u64)
        .sum();

    for i in 0..ell {
        let tau = ledger.phases.taus[i];
        let end = ledger.phases.phase_end(i);
        let lqd_i: u64 = (tau..end)
            .map(|t| (0..n as u32).filter(|&q| ledger.lqd_transmits(t, q)).count() as u64)
            .sum();
        let o_i: u64 = ledger.phases.q_sets[i]
            .iter()
            .filter(|&&q| ledger.extras.e_q[q as usize] > 0)
            .map(|&q| transmissions_in(tau, end, q, &ledger) as u64)
            .sum();
        let n_i = lqd_i - o_i;
        let delta_psi = alpha.clone()
            * (rat_int(ledger.phases.u[i] as i64) - rat_int(ledger.phases.v[i] as i64));
        let ehat_total: u64 = ledger.phases.q_sets[i]
            .iter()
            .map(|&q| ledger.ehat_at(tau, q) as u64)
            .sum();
        ledger.phase_totals.push(PhaseTotals {
            lqd: lqd_i,
            n: n_i,
            o: o_i,
            u: ledger.phases.u[i],
            v: ledger.phases.v[i],
            delta_psi,
            ehat_total,
        });
    }

    // Views for every pair the definitions serve: tau_i >= t_q and global
    // ehat_q > 0.
    for i in 0..ell {
        let tau = ledger.phases.taus[i];
        let end = ledger.phases.phase_end(i);
        for q in 0..n as u32 {
            if ledger.ehat_q[q as usize] == 0 {
                continue;
            }
            let tq = ledger.phases.t_q[q as usize];
            if tq < 0 || tq > tau as i64 {
                continue;
            }
            let (live, dying) = ledger.live_split_at(q, tau);
            let (live_next, _) = ledger.live_split_at(q, end);
            let sigma = sigma_of(&live, |x| ledger.lqd_size(tau, x));
            let sigma_next = sigma_of(&live_next, |x| ledger.lqd_size(end, x));
            let d_q: u32 = dying.iter().map(|&x| transmissions_in(tau, end, x, &ledger)).sum();
            let z_q = live.iter().filter(|&&x| ledger.opt_size(tau, x) > 0).count() as u32;
            let o_q = transmissions_in(tau, end, q, &ledger);
            let g_q = (tau..end)
                .filter(|&t| ledger.extras.opt_extra[t as usize][q as usize])
                .count() as u32;
            let h_q = (tau..end)
                .filter(|&t| !ledger.lqd_transmits(t, q) && !ledger.opt_transmits(t, q))
                .count() as u32;
            let e_iq = ledger.extras.e_t_q[tau as usize][q as usize];
            let ehat_iq = ledger.ehat_at(tau, q);
            ledger.views.insert(
                (i, q),
                PhaseQueueView {
                    phase: i,
                    queue: q,
                    live,
                    dying,
                    live_next,
                    sigma,
                    sigma_next,
                    e_iq,
                    ehat_iq,
                    o_q,
                    g_q,
                    h_q,
                    d_q,
                    z_q,
                },
            );
        }
    }

    // Profit split: only queues in Q^i with uncancelled extras are paid.
    for i in 0..ell {
        let tau = ledger.phases.taus[i];
        let totals = &ledger.phase_totals[i];
        let pool = rat_u(totals.n) + alpha.clone() * rat_u(totals.o) - totals.delta_psi.clone();
        let ehat_total = totals.ehat_total;
        if ehat_total == 0 {
            continue;
        }
        let mut entries = Vec::new();
        for &q in &ledger.phases.q_sets[i] {
            let ehat_iq = ledger.ehat_at(tau, q);
            if ehat_iq == 0 {
                continue;
            }
            let view = ledger.views.get(&(i, q)).expect("paid pair must have a view");
            let share = rat_u(ehat_iq as u64) / rat_u(ehat_total);
            let l_increase = share * pool.clone() + beta.clone() * rat_u(view.o_q as u64);
            let s_increase =
                (rat_int(1) - alpha - &beta) * rat_u(view.o_q as u64);
            entries.push((q, l_increase, s_increase));
        }
        for (q, l, s) in entries {
            ledger.phi_q[q as usize] += &l + &s;
            ledger.profit.insert((i, q), ProfitEntry { l_increase: l, s_increase: s });
        }
    }

    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::{schedule_from_rejections, solve_exact, SearchLimits};
    use crate::switch::{build_instance, simulate_lqd, ArrivalEvent};
    use num_traits::ToPrimitive;

    fn ev(step: u32, queue: u32, count: u32) -> ArrivalEvent {
        ArrivalEvent { step, queue, count }
    }

    /// M=4 burst/trickle instance with the offline witness that hoards the
    /// burst queue: X keeps 4, the step-0 trickle packet is rejected.
    fn burst_trickle_ledger() -> AnalysisLedger {
        let mut events = vec![ev(0, 0, 4)];
        for t in 0..8 {
            events.push(ev(t, 1, 1));
        }
        let inst = build_instance(4, &events).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let mut rej = BTreeMap::new();
        rej.insert((0u32, 1u32), 1u32);
        let mut sched = schedule_from_rejections(&inst, &rej).unwrap();
        assert_eq!(sched.throughput, 11);
        let best = solve_exact(&inst, &SearchLimits::default());
        assert_eq!(best.throughput, sched.throughput);
        sched.certified = true;
        let alpha = crate::rat_frac(57635, 100000);
        build_ledger(&inst, &lqd, &sched, &TieBreak::MinQueueId, &alpha, None).unwrap()
    }

    #[test]
    fn identical_runs_have_no_extras() {
        let inst = build_instance(6, &[ev(0, 0, 2), ev(1, 1, 3)]).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let sched = solve_exact(&inst, &SearchLimits::default());
        let view = opt_view(&inst, &sched);
        let extras = compute_extras(&lqd, &view).unwrap();
        assert_eq!(extras.opt_extra_total, 0);
        assert_eq!(extras.lqd_extra_total, 0);
        assert!(extras.e_q.iter().all(|&e| e == 0));
    }

    #[test]
    fn burst_trickle_extras_and_phases() {
        let ledger = burst_trickle_ledger();
        // OPT-extra from X at step 3; LQD-extra from L at step 0.
        assert_eq!(ledger.extras.e_q, vec![1, 0]);
        assert!(ledger.extras.opt_extra[3][0]);
        assert_eq!(ledger.extras.lqd_extra_total, 1);
        assert!(ledger.extras.lqd_extra[0][1]);
        // t_X = 0; the trickle queue holds 1 < s_max - 1 = 2 at step 0.
        assert_eq!(ledger.phases.t_q, vec![0, -1]);
        assert_eq!(ledger.phases.taus, vec![0]);
        assert_eq!(ledger.phases.q_sets[0], vec![0]);
        // The single LQD-extra packet lands on X, cancelling its extra.
        assert_eq!(ledger.mapping.m_q, vec![1, 0]);
        assert_eq!(ledger.ehat_q, vec![0, 0]);
        // Throughput identity.
        assert_eq!(
            ledger.opt_total - ledger.extras.opt_extra_total,
            ledger.lqd_total - ledger.extras.lqd_extra_total
        );
    }

    #[test]
    fn no_overflow_has_no_phases() {
        let inst = build_instance(9, &[ev(0, 0, 3), ev(0, 1, 2)]).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let view = opt_view(&inst, &solve_exact(&inst, &SearchLimits::default()));
        let phases = decompose_phases(&lqd, &view);
        assert!(phases.taus.is_empty());
        assert_eq!(phases.t_q, vec![-1, -1]);
    }

    #[test]
    fn two_queue_burst_phase_accounting() {
        let inst = build_instance(3, &[ev(0, 0, 3), ev(0, 1, 2)]).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let sched = solve_exact(&inst, &SearchLimits::default());
        let alpha = crate::rat_frac(57635, 100000);
        let ledger =
            build_ledger(&inst, &lqd, &sched, &TieBreak::MinQueueId, &alpha, None).unwrap();
        // Both queues overflow at step 0 and never again.
        assert_eq!(ledger.phases.t_q, vec![0, 0]);
        assert_eq!(ledger.phases.taus, vec![0]);
        // Q_1 holds the queues with positive OPT size at step 0.
        let expected: Vec<u32> = (0..2u32).filter(|&q| ledger.opt_size(0, q) > 0).collect();
        assert_eq!(ledger.phases.q_sets[0], expected);
        // n_i + o_i = LQD^i.
        let t = &ledger.phase_totals[0];
        assert_eq!(t.n + t.o, t.lqd);
        assert_eq!(t.lqd, 3);
    }

    #[test]
    fn potential_telescopes() {
        let inst =
            build_instance(4, &[ev(0, 0, 5), ev(0, 1, 2), ev(2, 2, 6), ev(4, 1, 3)]).unwrap();
        let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let sched = solve_exact(&inst, &SearchLimits::default());
        let view = opt_view(&inst, &sched);
        let phases = decompose_phases(&lqd, &view);
        for i in 0..phases.phase_count() {
            let next_a = if i + 1 < phases.phase_count() {
                phases.a_sets[i + 1].len() as i64
            } else {
                0
            };
            assert_eq!(
                next_a - phases.a_sets[i].len() as i64,
                phases.u[i] as i64 - phases.v[i] as i64,
                "phase {i} of {phases:?}"
            );
        }
    }

    #[test]
    fn profit_pool_feasible_per_phase() {
        let ledger = {
            let inst =
                build_instance(4, &[ev(0, 0, 6), ev(0, 1, 2), ev(1, 2, 1), ev(3, 2, 5)]).unwrap();
            let lqd = simulate_lqd(&inst, &TieBreak::MinQueueId);
            let sched = solve_exact(&inst, &SearchLimits::default());
            let alpha = crate::rat_frac(57635, 100000);
            build_ledger(&inst, &lqd, &sched, &TieBreak::MinQueueId, &alpha, None).unwrap()
        };
        for i in 0..ledger.phases.phase_count() {
            let assigned: Rat = ledger
                .paid_queues(i)
                .iter()
                .filter_map(|&q| ledger.profit.get(&(i, q)))
                .map(|p| p.l_increase.clone() + p.s_increase.clone())
                .sum();
            let cap = rat_u(ledger.phase_totals[i].lqd) - ledger.phase_totals[i].delta_psi.clone();
            assert!(assigned <= cap, "phase {i} pays {assigned} over cap {cap}");
        }
    }

    #[test]
    fn beta_formula_value() {
        let alpha = crate::rat_frac(57635, 100000);
        let beta = beta_from_alpha(&alpha);
        let approx = beta.to_f64().unwrap();
        assert!((approx - 0.098011).abs() < 1e-6);
    }
}
