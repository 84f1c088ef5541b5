//! A laboratory for buffer management in shared-memory switches.
//!
//! The crate simulates the Longest Queue Drop (LQD) online policy on a
//! slotted-time switch with a shared buffer of `M` packets, computes a
//! certified exact offline optimum for the same arrival sequence, rebuilds
//! the full competitive-analysis bookkeeping (extras, phases, live/dying
//! queues, profit split with potential), and machine-checks the analysis
//! inequalities on concrete traces. A small numeric module reproduces the
//! closed-form competitive-ratio bound 1.70683 via Lambert-W optimization.
//!
//! Modules:
//! - [`switch`]: instances, traces, tie-breaking, LQD and baseline policies
//! - [`opt`]: exact offline optimum (branch and bound) plus a brute-force oracle
//! - [`ledger`]: per-step / per-phase / per-queue analysis quantities
//! - [`verify`]: inequality checks with counterexample payloads
//! - [`ratio`]: Lambert-W evaluation, rho(alpha), and the alpha optimization
//! - [`gen`]: workload generators and adversarial instance search
//! - [`codec`]: canonical JSON / JSONL codecs for all external formats
//! - [`pipeline`]: end-to-end verification runs and the experiment suite

pub mod codec;
pub mod config;
pub mod gen;
pub mod ledger;
pub mod opt;
pub mod pipeline;
pub mod ratio;
pub mod switch;
pub mod verify;

pub use config::ExperimentConfig;
pub use switch::{Instance, TieBreak, Trace};

use num_bigint::BigInt;
use num_rational::BigRational;

/// Exact rational scalar used throughout the analysis ledger and the exact
/// inequality checks. Ceilings and strict comparisons on sigma values must
/// not suffer floating-point drift.
pub type Rat = BigRational;

pub(crate) fn rat_int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

pub(crate) fn rat_u(v: u64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

pub(crate) fn rat_frac(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub(crate) fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses a decimal literal like `0.57635` into an exact rational.
pub fn parse_decimal_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    let neg = s.starts_with('-');
    let body = s.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let den = BigInt::from(10u32).pow(frac_part.len() as u32);
    let r = Rat::new(num, den);
    Some(if neg { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parse_is_exact() {
        assert_eq!(parse_decimal_rat("0.57635").unwrap(), rat_frac(57635, 100000));
        assert_eq!(parse_decimal_rat("2").unwrap(), rat_int(2));
        assert_eq!(parse_decimal_rat("-1.5").unwrap(), rat_frac(-3, 2));
        assert!(parse_decimal_rat("abc").is_none());
    }
}
