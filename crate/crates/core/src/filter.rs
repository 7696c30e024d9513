//! Semantic filtering: fixed-length admission by realization set, the
//! adaptive-length freshness inspection with its order-d drop thresholds, and
//! the closed-form acceptance factor that feeds the waiting-time analytics.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// Admit a fixed set of realizations, drop the rest outright.
    Fixed,
    /// Fixed admission plus a pairwise freshness inspection against the last
    /// admitted packet.
    Adaptive,
    /// Adaptive inspection over the full alphabet.
    AdaptiveAsymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Deterministic thresholds using the Erlang mean; feeds the analytics.
    Expectation,
    /// Thresholds drawn per inspection; used inside the event simulator.
    Sampled,
}

/// Filter configuration for one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub kind: FilterKind,
    /// Cap on the drop order d tracked between admissions.
    pub d_max: u32,
    /// Upper bound a codeword length converges to; infinity is allowed.
    pub ell_max: f64,
    pub threshold_mode: ThresholdMode,
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 {
            return Err(Error::invalid("d_max must be at least 1"));
        }
        if !(self.ell_max > 0.0) {
            return Err(Error::invalid("ell_max must be positive"));
        }
        Ok(())
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.kind, FilterKind::Adaptive | FilterKind::AdaptiveAsymptotic)
    }
}

/// Acceptance probability of an admitted-set packet under adaptive
/// inspection; exactly one for fixed-length filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceFactor {
    pub psi: f64,
}

/// Drop threshold of order `d`: the attenuation ratio above which a candidate
/// cannot raise the utility before its own decoding completes.
///
/// `lambda_q` is the pre-inspection rate of admitted-set arrivals. In
/// expectation mode the Erlang waiting term is replaced by its mean `d /
/// lambda_q`; in sampled mode it is drawn as a sum of `d` exponentials.
pub fn drop_threshold<R: Rng + ?Sized>(
    d: u32,
    lambda_q: f64,
    ell_max: f64,
    mode: ThresholdMode,
    rng: Option<&mut R>,
) -> f64 {
    debug_assert!(d >= 1 && lambda_q > 0.0);
    let wait = match mode {
        ThresholdMode::Expectation => d as f64 / lambda_q,
        ThresholdMode::Sampled => {
            let rng = rng.expect("sampled threshold mode needs an rng");
            let mut w = 0.0;
            for _ in 0..d {
                let u: f64 = rng.random();
                w += -(1.0 - u).ln() / lambda_q;
            }
            w
        }
    };
    (d + 1) as f64 + wait / ell_max
}

/// Adaptive inspection: admit the candidate iff its attenuation does not
/// exceed the governing packet's by more than the order-d threshold.
pub fn adaptive_admit<R: Rng + ?Sized>(
    rho_current: f64,
    rho_candidate: f64,
    d_since_last_pass: u32,
    policy: &FilterPolicy,
    lambda_q: f64,
    rng: Option<&mut R>,
) -> bool {
    let d = d_since_last_pass.clamp(1, policy.d_max);
    let tau = drop_threshold(d, lambda_q, policy.ell_max, policy.threshold_mode, rng);
    rho_candidate / rho_current <= tau
}

/// Exact acceptance factor over a finite admitted set: the pair (previous
/// admission, candidate) is drawn independently from the admitted pmf and the
/// drop indicator is averaged over the threshold orders.
pub fn acceptance_factor(
    rho_values: &[f64],
    pmf: &[f64],
    d_max: u32,
    thresholds: &[f64],
) -> Result<AcceptanceFactor> {
    if rho_values.len() != pmf.len() || rho_values.is_empty() {
        return Err(Error::invalid("rho/pmf vectors must align and be non-empty"));
    }
    if thresholds.len() != d_max as usize {
        return Err(Error::invalid("need one threshold per drop order"));
    }
    let mass: f64 = pmf.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::invalid("admitted pmf mass must be positive"));
    }
    let mut drop = 0.0;
    for (i, &rho_prev) in rho_values.iter().enumerate() {
        for (j, &rho_new) in rho_values.iter().enumerate() {
            let ratio = rho_new / rho_prev;
            let exceeded = thresholds.iter().filter(|&&t| ratio > t).count();
            drop += pmf[i] / mass * pmf[j] / mass * exceeded as f64 / d_max as f64;
        }
    }
    let psi = (1.0 - drop).clamp(0.0, 1.0);
    if psi <= 0.0 {
        return Err(Error::invalid("acceptance factor collapsed to zero"));
    }
    Ok(AcceptanceFactor { psi })
}

/// Expectation-mode thresholds for orders 1..=d_max.
pub fn expectation_thresholds(d_max: u32, lambda_q: f64, ell_max: f64) -> Vec<f64> {
    (1..=d_max)
        .map(|d| {
            drop_threshold::<rand_chacha::ChaCha12Rng>(
                d,
                lambda_q,
                ell_max,
                ThresholdMode::Expectation,
                None,
            )
        })
        .collect()
}
