//! Experiment configuration. Defaults pin the parameter point the analysis
//! is optimized at: alpha = 0.57635, beta = alpha^2/(8(1-alpha)),
//! rho = 1.41478. All randomness flows from explicit seeds.

use crate::ledger::beta_from_alpha;
use crate::switch::TieBreak;
use crate::{rat_frac, rat_int, Rat};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub alpha: Rat,
    /// None means the beta formula; an override must keep alpha + beta < 1.
    pub beta: Option<Rat>,
    pub rho: Rat,
    pub ties: Vec<TieBreak>,
    pub solver_nodes: u64,
    /// Packet cap for the brute-force oracle.
    pub oracle_cap: u32,
    /// Packet cap generators respect so the exact solver stays certified.
    pub max_packets: u32,
    pub strict: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: rat_frac(57635, 100000),
            beta: None,
            rho: rat_frac(141478, 100000),
            ties: default_ties(0xC0FFEE),
            solver_nodes: 20_000_000,
            oracle_cap: 14,
            max_packets: 48,
            strict: true,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn beta_value(&self) -> Rat {
        self.beta.clone().unwrap_or_else(|| beta_from_alpha(&self.alpha))
    }

    pub fn validate(&self) -> Result<(), String> {
        use num_traits::Signed;
        if !self.alpha.is_positive() || self.alpha > rat_frac(3, 5) {
            return Err("alpha must lie in (0, 0.6]".into());
        }
        if &self.alpha + &self.beta_value() >= rat_int(1) {
            return Err("alpha + beta must stay below 1".into());
        }
        if self.ties.is_empty() {
            return Err("tie-break set must be non-empty".into());
        }
        Ok(())
    }
}

/// The suite's tie-break set: both deterministic extremes plus one seeded
/// random rule.
pub fn default_ties(seed: u64) -> Vec<TieBreak> {
    vec![TieBreak::MinQueueId, TieBreak::MaxQueueId, TieBreak::SeededRandom(seed)]
}

/// The wider set adversarial search ranks candidates against: the theorem
/// quantifies over every tie-breaking rule, so lower bounds must hold under
/// the least favorable one available.
pub fn search_ties(seed: u64) -> Vec<TieBreak> {
    vec![
        TieBreak::MinQueueId,
        TieBreak::MaxQueueId,
        TieBreak::SeededRandom(seed),
        TieBreak::SeededRandom(seed.wrapping_add(1)),
        TieBreak::SeededRandom(seed.wrapping_add(2)),
    ]
}
