//! Posterior probability that a candidate signature is a true signature,
//! given how many distinct records it recurs in.
//!
//! Signatures and non-signatures are modelled as Poisson recurrences with
//! means `λ < μ`, and a prior signature rate `c`. The posterior collapses to
//! `1 / (1 + a^k·b)` with `a = μ/λ` and `b = e^(λ−μ)(1−c)/c`; only `a` and
//! `b` are configured.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the recurrence cap derived from `ρ`.
pub const DEFAULT_K_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityModel {
    a: f64,
    b: f64,
}

impl ProbabilityModel {
    /// Requires `a > 1` and `b > 0`, both finite.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::Config(format!(
                "model.a must be a finite value > 1, got {a}"
            )));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Config(format!(
                "model.b must be a finite value > 0, got {b}"
            )));
        }
        if b >= 1.0 {
            log::warn!("model.b = {b} >= 1: every candidate signature has probability below 1/2");
        }
        Ok(ProbabilityModel { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `1 / (1 + a^k·b)` for a candidate observed in `k ≥ 1` records.
    ///
    /// # Panics
    ///
    /// If `k == 0`; a key present in an index has at least one posting.
    pub fn signature_probability(&self, k: usize) -> f64 {
        assert!(k >= 1, "recurrence must be at least 1");
        posterior(self.a, self.b, k as f64)
    }

    /// Largest `k ≥ 0` with `signature_probability(k) > rho`, capped at
    /// `k_cap`. Zero when even a single occurrence fails.
    pub fn max_recurrence(&self, rho: f64, k_cap: usize) -> Result<usize> {
        check_unit_open("link.rho", rho)?;
        // a^k·b < 1/ρ − 1  ⇔  k < ln((1/ρ − 1)/b) / ln a
        let bound = ((1.0 / rho - 1.0) / self.b).ln() / self.a.ln();
        let mut k = if bound.is_nan() || bound <= 0.0 {
            0
        } else if bound >= k_cap as f64 {
            k_cap
        } else {
            bound.floor() as usize
        };
        // Settle rounding at the boundary against the probability itself.
        while k > 0 && self.signature_probability(k) <= rho {
            k -= 1;
        }
        while k < k_cap && self.signature_probability(k + 1) > rho {
            k += 1;
        }
        if k == k_cap && k_cap > 0 {
            log::info!(
                "recurrence cap reached: rho = {rho} admits more than {k_cap} occurrences; using {k_cap}"
            );
        }
        Ok(k)
    }
}

fn posterior(a: f64, b: f64, k: f64) -> f64 {
    1.0 / (1.0 + a.powf(k) * b)
}

pub(crate) fn check_unit_open(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must lie in (0, 1), got {value}"
        )))
    }
}
