//! Semantic value assessment: Gaussian-sum value functions over feature
//! samples, Sugeno/Choquet fusion of extrinsic features, meta-values, and the
//! meta-value-to-attenuation mapping.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of uniform grid points used for normalization and calibration.
/// Critical points are always appended to the grid.
const GRID_POINTS: usize = 1001;

/// A normalized sum-of-Gaussians value function over a feature range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunctionSpec {
    pub critical_points: Vec<f64>,
    pub criticality: Vec<f64>,
    pub z_min: f64,
    pub z_max: f64,
    /// Minimum importance every sample point must reach after calibration.
    pub vf_min: f64,
    pub sigma: f64,
    /// Grid maximum of the raw Gaussian sum, cached at construction.
    normalizer: f64,
}

fn raw_sum(z: f64, points: &[f64], weights: &[f64], sigma: f64) -> f64 {
    let two_s2 = 2.0 * sigma * sigma;
    points
        .iter()
        .zip(weights)
        .map(|(&c, &w)| w * (-(z - c) * (z - c) / two_s2).exp())
        .sum()
}

fn grid(z_min: f64, z_max: f64, critical_points: &[f64]) -> Vec<f64> {
    let step = (z_max - z_min) / (GRID_POINTS - 1) as f64;
    let mut g: Vec<f64> = (0..GRID_POINTS).map(|k| z_min + step * k as f64).collect();
    g.extend(critical_points.iter().copied());
    g
}

fn validate_shape(points: &[f64], weights: &[f64], z_min: f64, z_max: f64, vf_min: f64) -> Result<()> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::invalid(
            "critical points and criticality must be non-empty and equal length",
        ));
    }
    if !(z_min < z_max) {
        return Err(Error::invalid("feature range must satisfy z_min < z_max"));
    }
    if !(0.0..1.0).contains(&vf_min) {
        return Err(Error::invalid("vf_min must lie in [0, 1)"));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::invalid("criticality must be non-negative"));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::invalid("at least one criticality must be positive"));
    }
    Ok(())
}

impl ValueFunctionSpec {
    pub fn new(
        critical_points: Vec<f64>,
        criticality: Vec<f64>,
        z_min: f64,
        z_max: f64,
        vf_min: f64,
        sigma: f64,
    ) -> Result<Self> {
        validate_shape(&critical_points, &criticality, z_min, z_max, vf_min)?;
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let normalizer = grid(z_min, z_max, &critical_points)
            .iter()
            .map(|&z| raw_sum(z, &critical_points, &criticality, sigma))
            .fold(0.0f64, f64::max);
        Ok(ValueFunctionSpec {
            critical_points,
            criticality,
            z_min,
            z_max,
            vf_min,
            sigma,
            normalizer,
        })
    }

    /// Calibrate sigma, then construct. Sigma is searched over
    /// `sigma_start + k * step` until the normalized grid minimum reaches
    /// `vf_min`.
    pub fn calibrated(
        critical_points: Vec<f64>,
        criticality: Vec<f64>,
        z_min: f64,
        z_max: f64,
        vf_min: f64,
        sigma_start: f64,
        step: f64,
        max_iters: usize,
    ) -> Result<Self> {
        let sigma = calibrate_sigma(
            &critical_points,
            &criticality,
            z_min,
            z_max,
            vf_min,
            sigma_start,
            step,
            max_iters,
        )?;
        Self::new(critical_points, criticality, z_min, z_max, vf_min, sigma)
    }

    /// Normalized importance of a sample point, in [0, 1].
    pub fn value(&self, z: f64) -> Result<f64> {
        if z < self.z_min - 1e-12 || z > self.z_max + 1e-12 {
            return Err(Error::invalid(format!(
                "sample {z} outside feature range [{}, {}]",
                self.z_min, self.z_max
            )));
        }
        let v = raw_sum(z, &self.critical_points, &self.criticality, self.sigma) / self.normalizer;
        Ok(v.min(1.0))
    }
}

fn grid_min_normalized(points: &[f64], weights: &[f64], z_min: f64, z_max: f64, sigma: f64) -> f64 {
    let g = grid(z_min, z_max, points);
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for &z in &g {
        let v = raw_sum(z, points, weights, sigma);
        max = max.max(v);
        min = min.min(v);
    }
    min / max
}

/// Smallest sigma in the arithmetic search sequence whose normalized value
/// function stays at or above `vf_min` over the whole range.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_sigma(
    critical_points: &[f64],
    criticality: &[f64],
    z_min: f64,
    z_max: f64,
    vf_min: f64,
    sigma_start: f64,
    step: f64,
    max_iters: usize,
) -> Result<f64> {
    validate_shape(critical_points, criticality, z_min, z_max, vf_min)?;
    if !(sigma_start > 0.0) || !(step > 0.0) {
        return Err(Error::invalid("sigma_start and step must be positive"));
    }
    let mut best = (sigma_start, 0.0f64);
    for k in 0..max_iters {
        let sigma = sigma_start + step * k as f64;
        let min = grid_min_normalized(critical_points, criticality, z_min, z_max, sigma);
        if min >= vf_min {
            return Ok(sigma);
        }
        if min > best.1 {
            best = (sigma, min);
        }
    }
    Err(Error::Calibration {
        best_sigma: best.0,
        achieved_min: best.1,
    })
}

/// The nonzero Sugeno measure parameter: the root of
/// `prod(1 + lambda w_b) = 1 + lambda` in (-1, 0) or (0, inf), or zero when
/// the weights already sum to one.
pub fn sugeno_lambda(weights: &[f64]) -> Result<f64> {
    if weights.len() < 2 {
        return Err(Error::invalid("need at least two extrinsic weights"));
    }
    if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(Error::invalid("weights must lie in [0, 1]"));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::invalid("weights must not all be zero"));
    }
    if (total - 1.0).abs() <= 1e-12 {
        return Ok(0.0);
    }
    let f = |lambda: f64| -> f64 {
        weights.iter().map(|&w| 1.0 + lambda * w).product::<f64>() - (1.0 + lambda)
    };
    let (mut lo, mut hi) = if total < 1.0 {
        // Positive branch: f dips negative off zero and is eventually positive.
        let mut hi = 1.0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::invalid(
                    "no admissible positive Sugeno root for these weights",
                ));
            }
        }
        (1e-12, hi)
    } else {
        let lo = -1.0 + 1e-9;
        if f(lo) <= 0.0 {
            return Err(Error::invalid(
                "no admissible negative Sugeno root for these weights",
            ));
        }
        (lo, -1e-12)
    };
    // Bisection; f has exactly one root strictly inside the bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 {
            break;
        }
        let fm = f(mid);
        let flo = f(lo);
        if (fm >= 0.0) == (flo >= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Subset weights of the Choquet integral from the per-feature weights and
/// the Sugeno parameter: `U_0 = 0`, `U_b = (1 + lambda w_b) U_{b-1} + w_b`.
pub fn choquet_weights(weights: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut u = Vec::with_capacity(weights.len() + 1);
    u.push(0.0);
    for (b, &w) in weights.iter().enumerate() {
        let next = (1.0 + lambda * w) * u[b] + w;
        if next < u[b] - 1e-12 {
            return Err(Error::InconsistentWeights { u_last: next });
        }
        u.push(next);
    }
    let last = *u.last().unwrap();
    if (last - 1.0).abs() > 1e-8 {
        return Err(Error::InconsistentWeights { u_last: last });
    }
    Ok(u)
}

/// Meta-value of one realization: product of powered intrinsic values times
/// the discrete Choquet fusion of the powered extrinsic values.
///
/// Extrinsic values are paired with the subset-weight increments in
/// descending order of their powered value; the sort is applied here, so
/// pre-sorted input is accepted unchanged.
pub fn meta_value(
    intrinsic_vals: &[f64],
    alphas: &[f64],
    extrinsic_vals: &[f64],
    alpha_bars: &[f64],
    u: &[f64],
) -> Result<f64> {
    if intrinsic_vals.len() != alphas.len() {
        return Err(Error::invalid("intrinsic values/exponents length mismatch"));
    }
    if extrinsic_vals.len() != alpha_bars.len() || u.len() != extrinsic_vals.len() + 1 {
        return Err(Error::invalid("extrinsic values/exponents/U length mismatch"));
    }
    let product: f64 = intrinsic_vals
        .iter()
        .zip(alphas)
        .map(|(&g, &a)| g.powf(a))
        .product();
    let mut powered: Vec<f64> = extrinsic_vals
        .iter()
        .zip(alpha_bars)
        .map(|(&h, &ab)| h.powf(ab))
        .collect();
    powered.sort_by(|a, b| b.total_cmp(a));
    let fusion: f64 = powered
        .iter()
        .enumerate()
        .map(|(b, &h)| (u[b + 1] - u[b]) * h)
        .sum();
    Ok(product * fusion)
}

/// Map a meta-value to its attenuation factor. `v` must be pre-normalized so
/// that `v_max_link - v` lies in [0, 1].
pub fn attenuation_factor(v: f64, v_max_link: f64, rho_min: f64, rho_max: f64) -> Result<f64> {
    if !(rho_min > 0.0) || rho_max < rho_min {
        return Err(Error::invalid("need 0 < rho_min <= rho_max"));
    }
    if v < -1e-12 || v > v_max_link + 1e-12 {
        return Err(Error::invalid("meta-value outside [0, v_max_link]"));
    }
    let gap = v_max_link - v;
    if gap > 1.0 + 1e-9 {
        return Err(Error::invalid(
            "meta-values must be normalized so v_max - v <= 1",
        ));
    }
    Ok(rho_min + gap.clamp(0.0, 1.0) * (rho_max - rho_min))
}

/// Per-link meta-value table: normalized values, attenuation factors, and the
/// descending-importance realization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkValues {
    /// Meta-values normalized by the link maximum, in [0, 1].
    pub v: Vec<f64>,
    /// Attenuation factor of each realization.
    pub rho: Vec<f64>,
    /// Realization indices sorted by descending meta-value, ties to lower index.
    pub order: Vec<usize>,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl LinkValues {
    pub fn from_raw(v_raw: &[f64], rho_min: f64, rho_max: f64) -> Result<Self> {
        if v_raw.is_empty() {
            return Err(Error::invalid("empty meta-value vector"));
        }
        if v_raw.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("meta-values must be finite and non-negative"));
        }
        let v_max = v_raw.iter().copied().fold(0.0f64, f64::max);
        if v_max <= 0.0 {
            return Err(Error::invalid("all meta-values are zero"));
        }
        let v: Vec<f64> = v_raw.iter().map(|&x| x / v_max).collect();
        let rho: Vec<f64> = v
            .iter()
            .map(|&x| attenuation_factor(x, 1.0, rho_min, rho_max))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        Ok(LinkValues {
            v,
            rho,
            order,
            rho_min,
            rho_max,
        })
    }

    /// Mean normalized meta-value over a set of realizations.
    pub fn mean_value(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.v[i]).sum::<f64>() / indices.len() as f64
    }
}
