//! Semantics-of-information analytics: instantaneous timeliness utilities,
//! the closed-form expected polygon area between deliveries for the three
//! utility families, time-averaged SoI from simulated traces, and the
//! network-wide objective.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    /// Exponential utility of timeliness.
    Eut,
    /// Logarithmic utility of timeliness.
    Lut,
    /// Reciprocal utility of timeliness.
    Rut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityForm {
    pub kind: UtilityKind,
    pub beta: f64,
    /// Reciprocal exponent; only meaningful for RUT.
    pub kappa: u32,
}

impl UtilityForm {
    pub fn new(kind: UtilityKind, beta: f64, kappa: u32) -> Result<Self> {
        if kind == UtilityKind::Rut && kappa == 0 {
            return Err(Error::invalid("RUT needs kappa >= 1"));
        }
        Ok(UtilityForm { kind, beta, kappa })
    }
}

/// Instantaneous utility at age `delta` under attenuation `rho`.
///
/// The logarithmic family uses the non-increasing surrogate
/// `beta - ln(1 + rho delta)`: it equals `beta` at zero age and has the same
/// first-order decay as the exponential family. RUT diverges at zero age and
/// reports the honest infinity.
pub fn utility(delta: f64, rho: f64, form: &UtilityForm) -> f64 {
    debug_assert!(delta >= 0.0 && rho > 0.0);
    match form.kind {
        UtilityKind::Eut => (-rho * delta).exp() + form.beta,
        UtilityKind::Lut => form.beta - (rho * delta).ln_1p(),
        UtilityKind::Rut => {
            if delta == 0.0 {
                f64::INFINITY
            } else {
                (rho * delta).powi(-(form.kappa as i32)) + form.beta
            }
        }
    }
}

/// The expectation bundle feeding the closed-form polygon area and the
/// codeword-length optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Mean waiting time between admissions, `1 / (lambda psi q)`.
    pub gamma: f64,
    /// Admitted-pmf mean attenuation factor.
    pub rho_bar: f64,
    /// Admitted-pmf mean transmission cost factor.
    pub phi_bar: f64,
    /// `E[phi L]`.
    pub e_phi_l: f64,
    /// `E[phi L^2]`.
    pub e_phi_l2: f64,
    /// `E[rho phi L]`.
    pub e_rho_phi_l: f64,
    /// `E[rho phi L^2]`.
    pub e_rho_phi_l2: f64,
}

impl Moments {
    /// Assemble from aligned admitted-set vectors. `pmf` need not be
    /// normalized; every expectation is taken over the admitted mass.
    pub fn from_parts(
        pmf: &[f64],
        rho: &[f64],
        phi: &[f64],
        lengths: &[f64],
        gamma: f64,
    ) -> Result<Self> {
        let l = pmf.len();
        if rho.len() != l || phi.len() != l || lengths.len() != l || l == 0 {
            return Err(Error::invalid("moment inputs must align and be non-empty"));
        }
        let mass: f64 = pmf.iter().sum();
        if !(mass > 0.0) || !(gamma > 0.0) {
            return Err(Error::invalid("admitted mass and gamma must be positive"));
        }
        let mean = |f: &dyn Fn(usize) -> f64| -> f64 {
            (0..l).map(|i| pmf[i] * f(i)).sum::<f64>() / mass
        };
        Ok(Moments {
            gamma,
            rho_bar: mean(&|i| rho[i]),
            phi_bar: mean(&|i| phi[i]),
            e_phi_l: mean(&|i| phi[i] * lengths[i]),
            e_phi_l2: mean(&|i| phi[i] * lengths[i] * lengths[i]),
            e_rho_phi_l: mean(&|i| rho[i] * phi[i] * lengths[i]),
            e_rho_phi_l2: mean(&|i| rho[i] * phi[i] * lengths[i] * lengths[i]),
        })
    }

    /// Importance-service coupling ratio `E[rho phi L] / (rho_bar E[phi L])`.
    pub fn coupling_ratio(&self) -> Result<f64> {
        if self.e_phi_l <= 0.0 {
            return Err(Error::DegenerateCodebook(
                "coupling ratio undefined for zero service time".into(),
            ));
        }
        Ok(self.e_rho_phi_l / (self.rho_bar * self.e_phi_l))
    }

    /// Self-consistency of the cross moment: `chi rho_bar E[phi L] = E[rho phi L]`.
    pub fn check_consistency(&self) -> Result<()> {
        if self.e_phi_l > 0.0 {
            let lhs = self.coupling_ratio()? * self.rho_bar * self.e_phi_l;
            let scale = self.e_rho_phi_l.abs().max(1.0);
            if (lhs - self.e_rho_phi_l).abs() > 1e-10 * scale {
                return Err(Error::invalid("inconsistent cross moments"));
            }
        }
        Ok(())
    }

    /// Stress indicator of the second-order expansion behind the closed
    /// forms; values above one half mean the approximation is extrapolating.
    pub fn taylor_stress(&self, rho_max_admitted: f64) -> f64 {
        rho_max_admitted * (self.gamma + self.e_phi_l)
    }
}

/// Closed-form expected polygon area between consecutive deliveries.
pub fn expected_polygon(form: &UtilityForm, m: &Moments) -> f64 {
    let (b, g) = (form.beta, m.gamma);
    match form.kind {
        UtilityKind::Eut => {
            (1.0 + b - m.rho_bar * g - m.e_rho_phi_l) * m.e_phi_l
                - 0.5 * m.rho_bar * m.e_phi_l2
                - g * m.e_rho_phi_l
                - m.rho_bar * g * g
                + (1.0 + b) * g
        }
        UtilityKind::Lut => {
            -2.0 * m.e_rho_phi_l * m.e_phi_l - m.rho_bar * m.e_phi_l2
                - 2.0 * g * m.e_rho_phi_l
                + (b - 1.0 - 2.0 * m.rho_bar * g) * m.e_phi_l
                - 2.0 * m.rho_bar * g * g
                + (b - 1.0) * g
        }
        UtilityKind::Rut => {
            let k = form.kappa as f64;
            let bias = k / (k + 1.0) + b;
            -k * m.e_rho_phi_l * m.e_phi_l - 0.5 * k * m.e_rho_phi_l2
                - 2.0 * k * g * m.e_rho_phi_l
                + (bias - k * m.rho_bar * g) * m.e_phi_l
                - 2.0 * k * m.rho_bar * g * g
                + bias * g
        }
    }
}

/// Time-averaged SoI from the closed form: delivery rate times expected
/// polygon area.
pub fn average_soi(form: &UtilityForm, m: &Moments, eta: f64) -> f64 {
    eta * expected_polygon(form, m)
}

/// One delivered update as seen by a monitor layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub time: f64,
    pub rho: f64,
    /// Generation-to-decode lag; the age restarts here.
    pub service_time: f64,
}

/// Time-ordered delivery record of one monitor layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoiTrace {
    pub deliveries: Vec<Delivery>,
    pub horizon: f64,
    /// Attenuation governing the utility before the first delivery.
    pub initial_rho: f64,
    /// Age at time zero.
    pub initial_age: f64,
}

impl SoiTrace {
    pub fn new(horizon: f64, initial_rho: f64) -> Self {
        SoiTrace {
            deliveries: Vec::new(),
            horizon,
            initial_rho,
            initial_age: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        let mut last = 0.0f64;
        for d in &self.deliveries {
            if d.time < last || d.time > self.horizon {
                return Err(Error::invalid("delivery times must increase within [0, T]"));
            }
            last = d.time;
        }
        Ok(())
    }
}

/// Closed-form integral of the utility over one age interval `[a, b)`.
fn segment_area(form: &UtilityForm, rho: f64, a: f64, b: f64) -> f64 {
    debug_assert!(b >= a && a >= 0.0);
    if b == a {
        return 0.0;
    }
    let beta_part = form.beta * (b - a);
    match form.kind {
        UtilityKind::Eut => {
            // int exp(-rho x) = exp(-rho a) (1 - exp(-rho (b-a))) / rho
            beta_part + (-rho * a).exp() * (-(-(rho * (b - a))).exp_m1()) / rho
        }
        UtilityKind::Lut => {
            // int -ln(1 + rho x) = -[(1 + rho x)(ln(1 + rho x) - 1)] / rho
            let anti = |x: f64| -> f64 {
                let y = 1.0 + rho * x;
                y * (y.ln() - 1.0) / rho
            };
            beta_part - (anti(b) - anti(a))
        }
        UtilityKind::Rut => {
            if a == 0.0 {
                return f64::INFINITY;
            }
            let k = form.kappa as f64;
            let powered = if form.kappa == 1 {
                (b.ln() - a.ln()) / rho
            } else {
                rho.powi(-(form.kappa as i32)) * (a.powf(1.0 - k) - b.powf(1.0 - k)) / (k - 1.0)
            };
            beta_part + powered
        }
    }
}

/// Result of integrating a trace: the time-averaged SoI plus a flag noting
/// that no delivery arrived and only the initial decay was integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSoi {
    pub value: f64,
    pub initial_segment_only: bool,
}

/// Numerically exact time average of the utility along a delivery trace: the
/// age ramps from each delivery's service time until the next delivery, with
/// the delivering packet's attenuation in force.
pub fn empirical_soi(trace: &SoiTrace, form: &UtilityForm) -> Result<EmpiricalSoi> {
    trace.validate()?;
    let t_end = trace.horizon;
    let mut total = 0.0;
    // Initial decay until the first delivery.
    let first_t = trace
        .deliveries
        .first()
        .map(|d| d.time)
        .unwrap_or(t_end);
    total += segment_area(
        form,
        trace.initial_rho,
        trace.initial_age,
        trace.initial_age + first_t,
    );
    for (j, d) in trace.deliveries.iter().enumerate() {
        let next_t = trace
            .deliveries
            .get(j + 1)
            .map(|n| n.time)
            .unwrap_or(t_end);
        let span = (next_t - d.time).max(0.0);
        total += segment_area(form, d.rho, d.service_time, d.service_time + span);
    }
    Ok(EmpiricalSoi {
        value: total / t_end,
        initial_segment_only: trace.deliveries.is_empty(),
    })
}

/// Network objective: weighted sum over monitors of the observation-weighted
/// per-link average SoI.
pub fn objective_eval(per_link_soi: &[(usize, f64, f64)], monitor_weights: &[f64]) -> f64 {
    per_link_soi
        .iter()
        .map(|&(m, obs_prob, soi)| monitor_weights[m] * obs_prob * soi)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn eut(beta: f64) -> UtilityForm {
        UtilityForm::new(UtilityKind::Eut, beta, 1).unwrap()
    }

    #[test]
    fn utility_examples() {
        assert_close(utility(0.0, 1.0, &eut(5.0)), 6.0, 1e-15);
        let rut = UtilityForm::new(UtilityKind::Rut, 5.0, 2).unwrap();
        assert_close(utility(2.0, 0.5, &rut), 6.0, 1e-12); // (rho delta)^-2 = 1
        assert!(utility(0.0, 0.5, &rut).is_infinite());
    }

    #[test]
    fn eut_utility_is_non_increasing() {
        let f = eut(5.0);
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let u = utility(k as f64 * 0.3, 0.8, &f);
            assert!(u <= prev);
            prev = u;
        }
    }

    fn sample_moments() -> Moments {
        // Two-symbol instance, all quantities hand-evaluated.
        let pmf = [0.6, 0.4];
        let rho = [0.2, 1.0];
        let phi = [2.0, 3.0];
        let len = [1.0, 3.0];
        Moments::from_parts(&pmf, &rho, &phi, &len, 2.5).unwrap()
    }

    #[test]
    fn moments_hand_check() {
        let m = sample_moments();
        assert_close(m.rho_bar, 0.6 * 0.2 + 0.4 * 1.0, 1e-15);
        assert_close(m.phi_bar, 0.6 * 2.0 + 0.4 * 3.0, 1e-15);
        assert_close(m.e_phi_l, 0.6 * 2.0 * 1.0 + 0.4 * 3.0 * 3.0, 1e-15);
        assert_close(m.e_phi_l2, 0.6 * 2.0 * 1.0 + 0.4 * 3.0 * 9.0, 1e-15);
        assert_close(m.e_rho_phi_l, 0.6 * 0.2 * 2.0 + 0.4 * 1.0 * 9.0, 1e-15);
        m.check_consistency().unwrap();
    }

    #[test]
    fn expected_polygon_eut_term_by_term() {
        let m = sample_moments();
        let beta = 5.0;
        let expect = (1.0 + beta - m.rho_bar * m.gamma - m.e_rho_phi_l) * m.e_phi_l
            - 0.5 * m.rho_bar * m.e_phi_l2
            - m.gamma * m.e_rho_phi_l
            - m.rho_bar * m.gamma * m.gamma
            + (1.0 + beta) * m.gamma;
        assert_close(expected_polygon(&eut(beta), &m), expect, 1e-12);
    }

    #[test]
    fn lut_doubles_eut_length_couplings() {
        // At equal moments the LUT form carries exactly double the EUT
        // length-coupled coefficients with the constant beta-1 in place of
        // beta+1. Verified by reconstructing LUT from the EUT pieces.
        let m = sample_moments();
        let beta = 5.0;
        let lut = expected_polygon(
            &UtilityForm::new(UtilityKind::Lut, beta, 1).unwrap(),
            &m,
        );
        let rebuilt = -2.0 * (m.e_rho_phi_l * m.e_phi_l)
            - 2.0 * 0.5 * m.rho_bar * m.e_phi_l2
            - 2.0 * (m.gamma * m.e_rho_phi_l)
            - 2.0 * (m.rho_bar * m.gamma) * m.e_phi_l
            - 2.0 * (m.rho_bar * m.gamma * m.gamma)
            + (beta - 1.0) * (m.e_phi_l + m.gamma);
        assert_close(lut, rebuilt, 1e-12);
    }

    #[test]
    fn zero_length_codebook_reduces_to_waiting_terms() {
        let m = Moments::from_parts(&[1.0], &[0.7], &[2.0], &[0.0], 3.0).unwrap();
        let beta = 5.0;
        let q = expected_polygon(&eut(beta), &m);
        assert_close(q, -0.7 * 9.0 + (1.0 + beta) * 3.0, 1e-12);
    }

    #[test]
    fn rut_kappa_bias_term() {
        // kappa -> large drives the bias term toward beta + 1.
        let m = sample_moments();
        let q2 = expected_polygon(&UtilityForm::new(UtilityKind::Rut, 5.0, 2).unwrap(), &m);
        assert!(q2.is_finite());
        let bias = |k: f64| k / (k + 1.0);
        assert_close(bias(2.0), 2.0 / 3.0, 1e-15);
        assert!(bias(1000.0) > 0.999);
    }

    #[test]
    fn average_soi_scales_linearly_in_eta() {
        let m = sample_moments();
        let f = eut(5.0);
        assert_eq!(average_soi(&f, &m, 0.0), 0.0);
        let one = average_soi(&f, &m, 0.3);
        assert_close(average_soi(&f, &m, 0.6), 2.0 * one, 1e-12);
    }

    #[test]
    fn empirical_single_delivery_closed_form() {
        // One delivery at time zero with zero service: the EUT average over
        // [0, T] is beta + (1 - exp(-rho T)) / (rho T).
        let mut trace = SoiTrace::new(50.0, 5.0);
        trace.deliveries.push(Delivery {
            time: 0.0,
            rho: 0.4,
            service_time: 0.0,
        });
        let got = empirical_soi(&trace, &eut(5.0)).unwrap();
        let expect = 5.0 + (1.0 - (-0.4f64 * 50.0).exp()) / (0.4 * 50.0);
        assert_close(got.value, expect, 1e-12);
        assert!(!got.initial_segment_only);
    }

    #[test]
    fn empirical_empty_trace_is_flagged() {
        let trace = SoiTrace::new(10.0, 1.0);
        let got = empirical_soi(&trace, &eut(5.0)).unwrap();
        assert!(got.initial_segment_only);
        let expect = 5.0 + (1.0 - (-10.0f64).exp()) / 10.0;
        assert_close(got.value, expect, 1e-12);
    }

    #[test]
    fn near_zero_attenuation_approaches_constant_utility() {
        let mut trace = SoiTrace::new(100.0, 1e-9);
        trace.deliveries.push(Delivery {
            time: 0.0,
            rho: 1e-9,
            service_time: 0.0,
        });
        let got = empirical_soi(&trace, &eut(5.0)).unwrap();
        assert_close(got.value, 6.0, 1e-6);
    }

    #[test]
    fn piecewise_integration_matches_quadrature() {
        // Adaptive Simpson oracle over the same piecewise age process.
        let form = eut(5.0);
        let mut trace = SoiTrace::new(30.0, 2.0);
        for (t, rho, s) in [(2.0, 0.5, 1.0), (9.5, 1.4, 2.5), (20.0, 0.3, 0.7)] {
            trace.deliveries.push(Delivery {
                time: t,
                rho,
                service_time: s,
            });
        }
        let age_rho = |t: f64| -> (f64, f64) {
            let mut cur = (t, trace.initial_rho);
            for d in &trace.deliveries {
                if t >= d.time {
                    cur = (t - d.time + d.service_time, d.rho);
                }
            }
            cur
        };
        let f = |t: f64| {
            let (age, rho) = age_rho(t);
            utility(age, rho, &form)
        };
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let coarse = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
            if depth == 0 {
                return coarse;
            }
            let fine = {
                let m1 = 0.5 * (a + m);
                let m2 = 0.5 * (m + b);
                (m - a) / 6.0 * (f(a) + 4.0 * f(m1) + f(m))
                    + (b - m) / 6.0 * (f(m) + 4.0 * f(m2) + f(b))
            };
            if (fine - coarse).abs() < 1e-12 {
                fine
            } else {
                simpson(f, a, m, depth - 1) + simpson(f, m, b, depth - 1)
            }
        }
        // Integrate piecewise between breakpoints so the oracle never spans a
        // discontinuity.
        let mut pts = vec![0.0];
        pts.extend(trace.deliveries.iter().map(|d| d.time));
        pts.push(trace.horizon);
        let mut oracle = 0.0;
        for w in pts.windows(2) {
            oracle += simpson(&f, w[0] + 1e-12, w[1] - 1e-12, 30);
        }
        oracle /= trace.horizon;
        let got = empirical_soi(&trace, &form).unwrap().value;
        assert_close(got, oracle, 1e-9);
    }

    #[test]
    fn lut_and_rut_segments_match_quadrature() {
        for form in [
            UtilityForm::new(UtilityKind::Lut, 5.0, 1).unwrap(),
            UtilityForm::new(UtilityKind::Rut, 5.0, 2).unwrap(),
            UtilityForm::new(UtilityKind::Rut, 5.0, 1).unwrap(),
        ] {
            let (a, b, rho) = (0.4, 3.7, 0.9);
            let n = 200_000;
            let h = (b - a) / n as f64;
            let mut sum = 0.5 * (utility(a, rho, &form) + utility(b, rho, &form));
            for k in 1..n {
                sum += utility(a + k as f64 * h, rho, &form);
            }
            let trapz = sum * h;
            assert_close(segment_area(&form, rho, a, b), trapz, 1e-6);
        }
    }

    #[test]
    fn objective_is_linear() {
        let weights = [1.0, 2.0];
        let links = [(0usize, 1.0, 3.0), (1usize, 0.5, 4.0)];
        assert_close(objective_eval(&links, &weights), 3.0 + 4.0, 1e-15);
        let single = [(0usize, 1.0, 3.0)];
        assert_close(objective_eval(&single, &weights), 3.0, 1e-15);
        let twice = [(0usize, 1.0, 3.0), (0usize, 1.0, 3.0)];
        assert_close(objective_eval(&twice, &weights), 6.0, 1e-15);
    }

    #[test]
    fn trace_validation_rejects_disorder() {
        let mut trace = SoiTrace::new(10.0, 1.0);
        trace.deliveries.push(Delivery {
            time: 5.0,
            rho: 1.0,
            service_time: 0.1,
        });
        trace.deliveries.push(Delivery {
            time: 3.0,
            rho: 1.0,
            service_time: 0.1,
        });
        assert!(empirical_soi(&trace, &eut(5.0)).is_err());
    }
}
