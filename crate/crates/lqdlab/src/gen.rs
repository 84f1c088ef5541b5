//! Workload generators and adversarial instance search.
//!
//! Generators are seeded and reproducible. The suite keeps its instances
//! within the caps that keep the exact solver certified, and trims any
//! arrivals that would follow a full buffer drain, since the analysis treats
//! a drained buffer as the end of an adversary's episode.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::opt::{solve_exact, SearchLimits};
use crate::switch::{build_instance, check_a1, simulate_lqd, ArrivalEvent, Instance, TieBreak};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("generated {got} packets, cap is {cap}")]
    CapViolation { got: u64, cap: u32 },
    #[error("search budget must be positive")]
    ZeroBudget,
    #[error("profile parameters must be positive")]
    BadProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LoadProfile {
    /// Poisson(rate) packets per (queue, step).
    Uniform { rate: f64 },
    /// Periodic bursts of `burst` packets per queue at a random offset.
    Bursty { burst: u32, period: u32 },
    /// Bernoulli(rate) single packets per (queue, step).
    Trickle { rate: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GenParams {
    pub capacity: u32,
    pub queues: u32,
    pub horizon: u32,
    pub profile: LoadProfile,
    pub seed: u64,
    pub max_packets: u32,
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> u32 {
    // Knuth's product method; rates here are well below 10.
    let l = (-rate).exp();
    let mut k = 0u32;
    let mut p = 1.0;
    loop {
        p *= rng.random_range(0.0..1.0f64);
        if p <= l {
            return k;
        }
        k += 1;
    }
}

/// Seeded random instance for the given profile. Errors if the draw
/// exceeds the packet cap; callers retry with a fresh seed.
pub fn gen_random(params: &GenParams) -> Result<Instance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut events = Vec::new();
    match params.profile {
        LoadProfile::Uniform { rate } => {
            if rate <= 0.0 {
                return Err(GenError::BadProfile);
            }
            for step in 0..params.horizon {
                for q in 0..params.queues {
                    let c = poisson(&mut rng, rate);
                    if c > 0 {
                        events.push(ArrivalEvent { step, queue: q, count: c });
                    }
                }
            }
        }
        LoadProfile::Bursty { burst, period } => {
            if burst == 0 || period == 0 {
                return Err(GenError::BadProfile);
            }
            for q in 0..params.queues {
                let offset = rng.random_range(0..period);
                let mut step = offset;
                while step < params.horizon {
                    events.push(ArrivalEvent { step, queue: q, count: burst });
                    step += period;
                }
            }
        }
        LoadProfile::Trickle { rate } => {
            if rate <= 0.0 || rate > 1.0 {
                return Err(GenError::BadProfile);
            }
            for step in 0..params.horizon {
                for q in 0..params.queues {
                    if rng.random_bool(rate) {
                        events.push(ArrivalEvent { step, queue: q, count: 1 });
                    }
                }
            }
        }
    }
    let total: u64 = events.iter().map(|e| e.count as u64).sum();
    if total > params.max_packets as u64 {
        return Err(GenError::CapViolation { got: total, cap: params.max_packets });
    }
    Ok(build_instance(params.capacity, &events).expect("generated events are well-formed"))
}

/// The burst/trickle family: `burst_queue_count` queues receive an M-packet
/// burst at step 0 and one further queue trickles a packet per step.
pub fn gen_burst_trickle(capacity: u32, burst_queue_count: u32, trickle_steps: u32) -> Instance {
    let mut events = Vec::new();
    for q in 0..burst_queue_count {
        events.push(ArrivalEvent { step: 0, queue: q, count: capacity });
    }
    for step in 0..trickle_steps {
        events.push(ArrivalEvent { step, queue: burst_queue_count, count: 1 });
    }
    build_instance(capacity, &events).expect("family events are well-formed")
}

/// Drops every arrival that follows a step where the LQD buffer held at
/// most one packet: the adversary gains nothing by continuing past a drain,
/// and the analysis assumes it does not.
pub fn trim_after_drain(instance: &Instance, tie: &TieBreak) -> Instance {
    let report = check_a1(instance, tie);
    let Some(first) = report.flags.first() else {
        return instance.clone();
    };
    let cut = first.step;
    let events: Vec<ArrivalEvent> =
        instance.arrivals().iter().copied().filter(|e| e.step <= cut).collect();
    let trimmed = build_instance(instance.buffer_capacity(), &events)
        .expect("trimming preserves well-formedness");
    debug_assert!(check_a1(&trimmed, tie).flags.is_empty());
    trimmed
}

// ── Adversarial search ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchParams {
    pub capacity: u32,
    pub max_queues: u32,
    pub horizon: u32,
    pub max_packets: u32,
    pub solver_nodes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryEntry {
    pub iteration: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub champion: Instance,
    pub ratio: f64,
    pub opt: u64,
    pub worst_lqd: u64,
    pub history: Vec<HistoryEntry>,
    pub evaluated: u64,
    pub skipped_uncertified: u64,
}

/// Certified OPT over the worst LQD throughput across the tie-break set.
/// Returns None when the solver cannot certify within its budget; such
/// candidates never contribute a reported ratio.
pub fn certified_ratio(
    instance: &Instance,
    ties: &[TieBreak],
    limits: &SearchLimits,
) -> Option<(f64, u64, u64)> {
    if instance.total_packets() == 0 {
        return None;
    }
    let schedule = solve_exact(instance, limits);
    if !schedule.certified {
        return None;
    }
    let worst_lqd = ties
        .iter()
        .map(|tie| simulate_lqd(instance, tie).throughput())
        .min()
        .expect("tie set is non-empty");
    if worst_lqd == 0 {
        return None;
    }
    Some((schedule.throughput as f64 / worst_lqd as f64, schedule.throughput, worst_lqd))
}

/// Hill climbing with simulated-annealing acceptance over arrival
/// schedules, maximizing certified OPT / worst-tie LQD. Mutations move
/// events in time or across queues, split and merge bursts, resize them,
/// and toggle trickle steps.
pub fn adversarial_search(
    params: &SearchParams,
    ties: &[TieBreak],
    budget: u64,
    seed: u64,
) -> Result<SearchOutcome, GenError> {
    if budget == 0 {
        return Err(GenError::ZeroBudget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = SearchLimits { max_nodes: params.solver_nodes };

    // Start from a burst/trickle family member; it reliably overflows.
    let mut current = gen_burst_trickle(
        params.capacity,
        1.min(params.max_queues.saturating_sub(1)).max(1),
        params.horizon.min(8).max(1),
    );
    let mut current_ratio = certified_ratio(&current, ties, &limits)
        .map(|(r, _, _)| r)
        .unwrap_or(1.0);
    let mut champion = current.clone();
    let mut champion_stats = certified_ratio(&champion, ties, &limits);
    let mut champion_ratio = champion_stats.as_ref().map(|s| s.0).unwrap_or(0.0);

    let mut history = Vec::new();
    let mut evaluated = 0u64;
    let mut skipped = 0u64;

    for iteration in 0..budget {
        let temperature = 0.08 * (1.0 - iteration as f64 / budget as f64) + 1e-4;
        let candidate = mutate(&current, params, &mut rng);
        let Some((ratio, opt, lqd)) = certified_ratio(&candidate, ties, &limits) else {
            skipped += 1;
            continue;
        };
        evaluated += 1;
        let accept = ratio >= current_ratio || {
            let delta = current_ratio - ratio;
            rng.random_range(0.0..1.0f64) < (-delta / temperature).exp()
        };
        if accept {
            current = candidate;
            current_ratio = ratio;
        }
        if ratio > champion_ratio {
            champion_ratio = ratio;
            champion = current.clone();
            champion_stats = Some((ratio, opt, lqd));
            history.push(HistoryEntry { iteration, ratio });
        }
    }

    let (ratio, opt, worst_lqd) = champion_stats.unwrap_or((0.0, 0, 0));
    Ok(SearchOutcome {
        champion,
        ratio,
        opt,
        worst_lqd,
        history,
        evaluated,
        skipped_uncertified: skipped,
    })
}

fn mutate(instance: &Instance, params: &SearchParams, rng: &mut ChaCha8Rng) -> Instance {
    let mut events: Vec<ArrivalEvent> = instance.arrivals().to_vec();
    let total: u64 = events.iter().map(|e| e.count as u64).sum();
    for _ in 0..8 {
        let op = rng.random_range(0..6u32);
        match op {
            // Move one event in time.
            0 if !events.is_empty() => {
                let i = rng.random_range(0..events.len());
                events[i].step = rng.random_range(0..params.horizon);
            }
            // Move one event across queues.
            1 if !events.is_empty() => {
                let i = rng.random_range(0..events.len());
                events[i].queue = rng.random_range(0..params.max_queues);
            }
            // Split a burst.
            2 if !events.is_empty() => {
                let i = rng.random_range(0..events.len());
                if events[i].count >= 2 {
                    let half = events[i].count / 2;
                    events[i].count -= half;
                    let mut other = events[i];
                    other.count = half;
                    other.step = rng.random_range(0..params.horizon);
                    events.push(other);
                }
            }
            // Grow or shrink a burst.
            3 if !events.is_empty() => {
                let i = rng.random_range(0..events.len());
                if rng.random_bool(0.5) && total < params.max_packets as u64 {
                    events[i].count += 1;
                } else if events[i].count > 1 {
                    events[i].count -= 1;
                } else {
                    events.remove(i);
                }
            }
            // Add a trickle packet.
            4 => {
                if total < params.max_packets as u64 {
                    events.push(ArrivalEvent {
                        step: rng.random_range(0..params.horizon),
                        queue: rng.random_range(0..params.max_queues),
                        count: 1,
                    });
                }
            }
            // Remove an event.
            _ if !events.is_empty() => {
                let i = rng.random_range(0..events.len());
                events.remove(i);
            }
            _ => {}
        }
        if rng.random_bool(0.6) {
            break;
        }
    }
    // Clamp back under the packet cap deterministically.
    let mut running = 0u64;
    events.retain(|e| {
        running += e.count as u64;
        running <= params.max_packets as u64
    });
    build_instance(instance.buffer_capacity(), &events).expect("mutated events are well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::search_ties;

    #[test]
    fn generation_is_reproducible() {
        let p = GenParams {
            capacity: 6,
            queues: 3,
            horizon: 8,
            profile: LoadProfile::Uniform { rate: 0.7 },
            seed: 11,
            max_packets: 64,
        };
        assert_eq!(gen_random(&p).unwrap(), gen_random(&p).unwrap());
    }

    #[test]
    fn uniform_load_matches_rate() {
        let rate = 0.8;
        let mut total = 0u64;
        let draws = 10_000u64;
        let queues = 3u32;
        let horizon = 4u32;
        for seed in 0..draws {
            let p = GenParams {
                capacity: 100,
                queues,
                horizon,
                profile: LoadProfile::Uniform { rate },
                seed,
                max_packets: 10_000,
            };
            total += gen_random(&p).unwrap().total_packets();
        }
        let mean_per_step = total as f64 / (draws * horizon as u64) as f64;
        let expected = queues as f64 * rate;
        assert!(
            (mean_per_step - expected).abs() < 0.05 * expected,
            "mean {mean_per_step} vs expected {expected}"
        );
    }

    #[test]
    fn oversized_bursts_always_overflow() {
        for seed in 0..50 {
            let p = GenParams {
                capacity: 5,
                queues: 2,
                horizon: 6,
                profile: LoadProfile::Bursty { burst: 6, period: 3 },
                seed,
                max_packets: 64,
            };
            let inst = gen_random(&p).unwrap();
            let trace = simulate_lqd(&inst, &TieBreak::MinQueueId);
            let drops: u32 = trace.steps.iter().flat_map(|s| &s.drops).map(|d| d.count).sum();
            assert!(drops > 0, "seed {seed} did not overflow");
        }
    }

    #[test]
    fn burst_trickle_family() {
        let inst = gen_burst_trickle(4, 1, 8);
        assert_eq!(inst.queue_count(), 2);
        assert_eq!(inst.total_packets(), 12);
        // Always at least one overflow.
        let trace = simulate_lqd(&inst, &TieBreak::MinQueueId);
        assert!(trace
            .steps
            .iter()
            .any(|s| !crate::switch::overflow_set(s, 4).is_empty()));
    }

    #[test]
    fn trim_removes_post_drain_arrivals() {
        let inst = build_instance(
            4,
            &[
                ArrivalEvent { step: 0, queue: 0, count: 2 },
                ArrivalEvent { step: 6, queue: 1, count: 5 },
            ],
        )
        .unwrap();
        let trimmed = trim_after_drain(&inst, &TieBreak::MinQueueId);
        assert_eq!(trimmed.total_packets(), 2);
        assert!(check_a1(&trimmed, &TieBreak::MinQueueId).flags.is_empty());
    }

    #[test]
    fn search_smoke() {
        let params = SearchParams {
            capacity: 4,
            max_queues: 2,
            horizon: 8,
            max_packets: 24,
            solver_nodes: 2_000_000,
        };
        let out = adversarial_search(&params, &search_ties(3), 400, 9).unwrap();
        assert!(out.ratio >= 1.0, "ratio {}", out.ratio);
        assert!(out.evaluated > 0);
        assert!(
            adversarial_search(&params, &search_ties(3), 0, 9).is_err(),
            "zero budget must error"
        );
    }
}
