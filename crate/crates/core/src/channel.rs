//! Rayleigh block-fading packet error models for truncated ARQ and
//! chase-combining HARQ, semantics-aware retransmission budgets, the expected
//! channel-time multiplier per delivered packet, and service-time moments.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Arq,
    Harq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmaxMode {
    /// Every packet gets the same retransmission budget.
    Fixed,
    /// Budget scales with the packet's meta-value relative to the admitted mean.
    SemanticsAware,
}

/// Error-control configuration of one link; all SNR-like quantities are in
/// linear scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorControlConfig {
    pub protocol: Protocol,
    /// Average received SNR.
    pub snr_avg: f64,
    /// Packet-error-rate waterfall threshold of the fitted PER model.
    pub gamma_m: f64,
    /// Slope factor of the fitted PER model.
    pub g: f64,
    /// Reverse of the channel-coding rate in the delivery cost factor;
    /// forced to 1 for ARQ.
    pub c: f64,
    /// On-air time per codeword bit per round; the configured rate reverse
    /// applies to channel occupancy under both protocols.
    pub phy_time: f64,
    pub r_max: u32,
    pub rmax_mode: RmaxMode,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ErrorControlConfig {
    /// Build from decibel-scale SNR figures. ARQ sends uncoded packets, so the
    /// rate-reverse is pinned to 1 regardless of the configured value.
    pub fn from_db(
        protocol: Protocol,
        snr_avg_db: f64,
        gamma_m_db: f64,
        g: f64,
        c: f64,
        r_max: u32,
        rmax_mode: RmaxMode,
    ) -> Result<Self> {
        let cfg = ErrorControlConfig {
            protocol,
            snr_avg: db_to_linear(snr_avg_db),
            gamma_m: db_to_linear(gamma_m_db),
            g,
            c: match protocol {
                Protocol::Arq => 1.0,
                Protocol::Harq => c,
            },
            phy_time: c,
            r_max,
            rmax_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr_avg > 0.0 && self.gamma_m > 0.0 && self.g > 0.0) {
            return Err(Error::invalid("SNR figures and g must be positive"));
        }
        if self.c < 1.0 || self.phy_time < 1.0 {
            return Err(Error::invalid("rate reverse must be at least 1"));
        }
        if self.protocol == Protocol::Arq && self.c != 1.0 {
            return Err(Error::invalid("ARQ requires c = 1"));
        }
        if self.r_max == 0 {
            return Err(Error::invalid("r_max must be at least 1"));
        }
        Ok(())
    }

    /// Probability that the first `r` transmission rounds all fail.
    pub fn residual_error_prob(&self, r: u32) -> f64 {
        if r == 0 {
            return 1.0;
        }
        match self.protocol {
            Protocol::Arq => self.arq_residual(r),
            Protocol::Harq => self.harq_residual(r),
        }
    }

    fn round_error_prob(&self) -> f64 {
        let gg = self.g * self.snr_avg;
        1.0 - gg / (1.0 + gg) * (-self.gamma_m / self.snr_avg).exp()
    }

    fn arq_residual(&self, r: u32) -> f64 {
        self.round_error_prob().powi(r as i32)
    }

    /// Chase combining accumulates SNR over rounds: the residual error after
    /// r rounds mixes the Poisson tail of the threshold crossing with the
    /// per-round combining products. The tail is summed term by term; the
    /// complemented closed form cancels catastrophically once the tail falls
    /// under machine precision.
    fn harq_residual(&self, r: u32) -> f64 {
        let x = self.gamma_m / self.snr_avg;
        let e = (-x).exp();
        let mut term = 1.0; // x^i / i!
        let mut combined = 0.0;
        for i in 0..r {
            // prod_{i'=1}^{r-i} 1 / (1 + i' g snr)
            let mut prod = 1.0;
            for step in 1..=(r - i) {
                prod /= 1.0 + step as f64 * self.g * self.snr_avg;
            }
            combined += term * prod;
            term *= x / (i + 1) as f64;
        }
        // term now holds x^r / r!; sum the Poisson tail from there.
        let mut tail = 0.0;
        let mut t = term;
        let mut i = r;
        loop {
            tail += t;
            i += 1;
            t *= x / i as f64;
            if t <= tail * 1e-18 + 1e-300 || i > r + 10_000 {
                break;
            }
        }
        (e * tail + e * combined).clamp(0.0, 1.0)
    }

    /// Expected channel-time multiplier per delivered packet under a
    /// truncated protocol with the given round budget.
    pub fn tx_cost_factor(&self, r_budget: u32) -> Result<f64> {
        if r_budget == 0 {
            return Err(Error::invalid("round budget must be at least 1"));
        }
        let theta_r = self.residual_error_prob(r_budget);
        if theta_r >= 1.0 - 1e-15 {
            return Err(Error::DegenerateCodebook(
                "channel never succeeds within the budget".into(),
            ));
        }
        let mut rounds = r_budget as f64 * theta_r;
        let mut prev = 1.0;
        for rr in 1..=r_budget {
            let cur = self.residual_error_prob(rr);
            rounds += rr as f64 * (prev - cur);
            prev = cur;
        }
        Ok(self.c / (1.0 - theta_r) * rounds)
    }

    /// Draw the transmission process for one packet: rounds consumed and
    /// whether the packet was delivered within its budget.
    pub fn sample_rounds<R: Rng + ?Sized>(&self, r_budget: u32, rng: &mut R) -> (u32, bool) {
        debug_assert!(r_budget >= 1);
        let mut prev = 1.0;
        for r in 1..=r_budget {
            let cur = self.residual_error_prob(r);
            let fail_given_prev = if prev > 0.0 { cur / prev } else { 0.0 };
            if rng.random::<f64>() >= fail_given_prev {
                return (r, true);
            }
            prev = cur;
        }
        (r_budget, false)
    }
}

/// Semantics-aware retransmission budget: scale the base budget by the
/// packet's meta-value relative to the admitted-set mean, rounded to the
/// nearest round and never below one.
pub fn retx_budget(v: f64, v_mean: f64, r_max: u32, mode: RmaxMode) -> u32 {
    match mode {
        RmaxMode::Fixed => r_max,
        RmaxMode::SemanticsAware => {
            let scaled = (v / v_mean * r_max as f64).round();
            (scaled as u32).max(1)
        }
    }
}

/// `E[phi L^c]` over the admitted set, normalized by the admitted mass.
pub fn service_moment(lengths: &[f64], admitted_pmf: &[f64], phis: &[f64], c_exp: u32) -> f64 {
    debug_assert!(lengths.len() == admitted_pmf.len() && phis.len() == lengths.len());
    let mass: f64 = admitted_pmf.iter().sum();
    let total: f64 = lengths
        .iter()
        .zip(admitted_pmf)
        .zip(phis)
        .map(|((&l, &p), &phi)| p * phi * l.powi(c_exp as i32))
        .sum();
    total / mass
}
