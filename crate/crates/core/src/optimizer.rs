//! Kraft-constrained codeword length optimization: the principal Lambert-W
//! branch, closed-form per-realization lengths for the three utility
//! families, the two-loop multiplier/coupling solver, integer rounding, and
//! admission-size selection over a whole link.

use crate::channel::{retx_budget, ErrorControlConfig};
use crate::error::{Error, Result};
use crate::filter::{acceptance_factor, expectation_thresholds, FilterKind, FilterPolicy};
use crate::soi::{average_soi, expected_polygon, Moments, UtilityForm, UtilityKind};
use crate::source::AdmittedSet;
use crate::value::LinkValues;
use serde::{Deserialize, Serialize};

const LN2: f64 = std::f64::consts::LN_2;

/// Principal branch of the Lambert W function: the `w >= -1` solving
/// `w e^w = y` for `y >= -1/e`. Halley iteration from a branch-appropriate
/// seed; residual `|w e^w - y| <= 1e-12 max(1, |y|)`.
pub fn lambert_w0(y: f64) -> Result<f64> {
    let min_y = -(-1.0f64).exp();
    if !y.is_finite() {
        return Err(Error::Domain(format!("lambert_w0 argument {y} not finite")));
    }
    if y < min_y {
        return Err(Error::Domain(format!(
            "lambert_w0 argument {y} below -1/e"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y - min_y < 1e-300 {
        return Ok(-1.0);
    }
    // Huge arguments overflow the Halley correction; solve in log space.
    if y > 1e15 {
        return Ok(lambert_w0_of_ln(y.ln()));
    }
    let mut w = if y < -0.25 {
        // Puiseux series around the branch point.
        let p = (2.0 * (1.0 + std::f64::consts::E * y)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0
    } else if y < std::f64::consts::E {
        y.ln_1p()
    } else {
        let l = y.ln();
        l - l.ln()
    };
    let tol = 1e-13 * y.abs().max(1.0);
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - y;
        if f.abs() <= tol {
            return Ok(w);
        }
        let d1 = ew * (1.0 + w);
        let d2 = ew * (2.0 + w);
        let denom = d1 - f * d2 / (2.0 * d1);
        let step = f / denom;
        w -= step;
        if w < -1.0 {
            w = -1.0 + 1e-16;
        }
    }
    Err(Error::Domain(format!("lambert_w0 failed to converge at {y}")))
}

/// Lambert W for arguments given in natural log, for `ln y` too large to
/// exponentiate: solves `w + ln w = ln y` by Newton.
fn lambert_w0_of_ln(ln_y: f64) -> f64 {
    let mut w = ln_y - ln_y.ln();
    for _ in 0..80 {
        let h = w + w.ln() - ln_y;
        w -= h / (1.0 + 1.0 / w);
        if h.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// The common length shift of the closed-form solution, per utility family.
pub fn length_shift(
    form: &UtilityForm,
    chi: f64,
    mu: f64,
    rho_bar: f64,
    phi_bar: f64,
    gamma: f64,
) -> f64 {
    let beta = form.beta;
    match form.kind {
        UtilityKind::Eut => {
            (2.0 * chi * mu * LN2 + rho_bar * gamma * (1.0 + chi) - (1.0 + beta))
                / (rho_bar * (1.0 + 2.0 * chi * phi_bar))
        }
        UtilityKind::Lut => {
            (4.0 * chi * mu * LN2 + 2.0 * rho_bar * gamma * (1.0 + chi) - (beta - 1.0))
                / (2.0 * rho_bar * (1.0 + 2.0 * chi * phi_bar))
        }
        UtilityKind::Rut => {
            let k = form.kappa as f64;
            (2.0 * k * chi * mu * LN2 + k * rho_bar * gamma * (1.0 + 2.0 * chi)
                - (k / (k + 1.0) + beta))
                / (k * rho_bar * (1.0 + 2.0 * chi * phi_bar))
        }
    }
}

/// Closed-form real codeword lengths for a given multiplier and shift:
/// `l_i = W0(a_i 2^xi) / ln 2 - xi` with `a_i = mu ln^2 2 / (rho_bar p_i phi_i)`.
pub fn closed_form_lengths(
    admitted_pmf: &[f64],
    phis: &[f64],
    rho_bar: f64,
    mu: f64,
    xi: f64,
) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::invalid("multiplier must be positive"));
    }
    let ln_mu_l2 = mu.ln() + 2.0 * LN2.ln();
    admitted_pmf
        .iter()
        .zip(phis)
        .map(|(&p, &phi)| {
            if !(p > 0.0 && phi > 0.0) {
                return Err(Error::invalid("pmf and cost factors must be positive"));
            }
            let ln_a = ln_mu_l2 - (rho_bar * p * phi).ln();
            let ln_y = ln_a + xi * LN2;
            let w = if ln_y > 700.0 {
                lambert_w0_of_ln(ln_y)
            } else {
                lambert_w0(ln_y.exp())?
            };
            Ok(w / LN2 - xi)
        })
        .collect()
}

/// Kraft sum of real lengths.
pub fn kraft_sum(lengths: &[f64]) -> f64 {
    lengths.iter().map(|&l| (-l * LN2).exp()).sum()
}

/// Ceiling-round real lengths to integers; each at least one bit. The ceiling
/// can only deepen the Kraft sum, so decodability is preserved.
pub fn round_lengths(lengths_real: &[f64]) -> Vec<u32> {
    lengths_real
        .iter()
        .map(|&l| ((l - 1e-9).ceil().max(1.0)) as u32)
        .collect()
}

/// Asymptotic relative length scale `x - ln x` with `x = p_phi_max / p_phi`;
/// used only for ordering checks against the exact solution.
pub fn asymptotic_length_scale(p_phi: f64, p_phi_max: f64) -> f64 {
    debug_assert!(p_phi > 0.0);
    let x = p_phi_max / p_phi;
    x - x.ln()
}

/// Converged output of the two-loop solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookAssignment {
    /// Real codeword lengths, aligned with the admitted index order.
    pub lengths: Vec<f64>,
    /// Ceiling-rounded integer lengths.
    pub lengths_int: Vec<u32>,
    pub kraft_sum: f64,
    pub mu: f64,
    pub chi: f64,
    pub xi: f64,
    pub inner_iterations: u32,
    pub outer_iterations: u32,
}

/// Solver knobs; the defaults follow the published procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Coupling-ratio stopping accuracy of the inner loop.
    pub epsilon: f64,
    pub max_outer: u32,
    pub max_inner: u32,
    /// Initial multiplier for the bracketing phase.
    pub mu_start: f64,
    pub bisection_steps: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon: 1e-8,
            max_outer: 200,
            max_inner: 200,
            mu_start: 1e-3,
            bisection_steps: 60,
        }
    }
}

struct InnerOutcome {
    lengths: Vec<f64>,
    chi: f64,
    xi: f64,
    kraft: f64,
    iterations: u32,
}

fn inner_converge(
    form: &UtilityForm,
    pi: &[f64],
    rho: &[f64],
    phi: &[f64],
    gamma: f64,
    mu: f64,
    chi_start: f64,
    opts: &SolverOptions,
) -> Result<InnerOutcome> {
    let rho_bar: f64 = pi.iter().zip(rho).map(|(&p, &r)| p * r).sum();
    let phi_bar: f64 = pi.iter().zip(phi).map(|(&p, &f)| p * f).sum();
    let mut chi = chi_start;
    let mut lengths = Vec::new();
    let mut xi = 0.0;
    let mut iters = 0;
    for it in 0..opts.max_inner {
        iters = it + 1;
        xi = length_shift(form, chi, mu, rho_bar, phi_bar, gamma);
        lengths = closed_form_lengths(pi, phi, rho_bar, mu, xi)?;
        let e_phi_l: f64 = pi
            .iter()
            .zip(phi)
            .zip(&lengths)
            .map(|((&p, &f), &l)| p * f * l)
            .sum();
        if !(e_phi_l > 1e-12) {
            break;
        }
        let e_rho_phi_l: f64 = pi
            .iter()
            .zip(rho)
            .zip(phi)
            .zip(&lengths)
            .map(|(((&p, &r), &f), &l)| p * r * f * l)
            .sum();
        let chi_new = e_rho_phi_l / (rho_bar * e_phi_l);
        // Outside the solution region (negative trial lengths during
        // bracketing) the ratio can degenerate; keep the iterate sane and let
        // the Kraft sum steer the multiplier.
        if !chi_new.is_finite() || chi_new <= 0.0 {
            break;
        }
        let chi_new = chi_new.clamp(1e-3, 1e3);
        let delta = (chi_new - chi).abs();
        chi = chi_new;
        if delta <= opts.epsilon {
            break;
        }
    }
    let kraft = kraft_sum(&lengths);
    Ok(InnerOutcome {
        kraft: if kraft.is_finite() { kraft } else { f64::INFINITY },
        lengths,
        chi,
        xi,
        iterations: iters,
    })
}

/// Two-loop solver for the Kraft-tight real codeword lengths.
///
/// The inner loop fixes the multiplier and iterates the coupling ratio to a
/// fixed point; the outer loop brackets and bisects the multiplier until the
/// Kraft sum is one. The Kraft sum must respond monotonically to the
/// multiplier; a violation during bracketing is a hard error.
///
/// A single-realization book cannot satisfy Kraft equality with a positive
/// length; it is pinned to the one-bit floor with a slack multiplier.
pub fn optimize_codebook(
    form: &UtilityForm,
    admitted_pmf: &[f64],
    rho_values: &[f64],
    phis: &[f64],
    gamma: f64,
    opts: &SolverOptions,
) -> Result<CodebookAssignment> {
    let l = admitted_pmf.len();
    if l == 0 || rho_values.len() != l || phis.len() != l {
        return Err(Error::invalid("solver inputs must align and be non-empty"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let mass: f64 = admitted_pmf.iter().sum();
    let pi: Vec<f64> = admitted_pmf.iter().map(|&p| p / mass).collect();

    if l == 1 {
        return Ok(CodebookAssignment {
            lengths: vec![1.0],
            lengths_int: vec![1],
            kraft_sum: 0.5,
            mu: 0.0,
            chi: 1.0,
            xi: 0.0,
            inner_iterations: 0,
            outer_iterations: 0,
        });
    }

    // Complementary slackness: with a zero multiplier the stationarity gives
    // equal lengths `-xi`. When those are positive and leave the Kraft sum
    // strictly below one, the constraint never binds and this interior point
    // is the solution; otherwise the equality search below takes over.
    {
        let rho_bar: f64 = pi.iter().zip(rho_values).map(|(&p, &r)| p * r).sum();
        let phi_bar: f64 = pi.iter().zip(phis).map(|(&p, &f)| p * f).sum();
        let e_rho_phi: f64 = pi
            .iter()
            .zip(rho_values)
            .zip(phis)
            .map(|((&p, &r), &f)| p * r * f)
            .sum();
        let chi0 = e_rho_phi / (rho_bar * phi_bar);
        let xi0 = length_shift(form, chi0, 0.0, rho_bar, phi_bar, gamma);
        if xi0 < 0.0 {
            let kraft0 = l as f64 * 2f64.powf(xi0);
            if kraft0 < 1.0 - 1e-9 {
                let lengths = vec![-xi0; l];
                return Ok(CodebookAssignment {
                    lengths_int: round_lengths(&lengths),
                    kraft_sum: kraft0,
                    lengths,
                    mu: 0.0,
                    chi: chi0,
                    xi: xi0,
                    inner_iterations: 0,
                    outer_iterations: 0,
                });
            }
        }
    }

    let mut outer = 0u32;
    let mut inner_total = 0u32;
    let mut chi = 1.0;
    let eval = |mu: f64, chi_start: f64| -> Result<InnerOutcome> {
        inner_converge(form, &pi, rho_values, phis, gamma, mu, chi_start, opts)
    };

    // Bracket the Kraft-equality multiplier. The Kraft sum is not globally
    // monotone in mu: it can rise to a peak and then fall off. The published
    // update direction (Kraft below one: decrease mu) corresponds to the
    // falling branch, so the search targets the falling-branch crossing:
    // expand upward through the above-one region and take the first descent
    // below one; if the start sits right of the peak with Kraft below one,
    // expand downward instead.
    let mut mu_lo = 0.0;
    let mut mu_hi = 0.0;
    let start = eval(opts.mu_start, chi)?;
    inner_total += start.iterations;
    outer += 1;
    chi = start.chi;
    let mut bracketed = false;
    if start.kraft > 1.0 {
        let mut prev_mu = opts.mu_start;
        let mut mu = opts.mu_start;
        while outer < opts.max_outer {
            mu *= 2.0;
            outer += 1;
            let out = eval(mu, chi)?;
            inner_total += out.iterations;
            chi = out.chi;
            if out.kraft <= 1.0 {
                mu_lo = prev_mu;
                mu_hi = mu;
                bracketed = true;
                break;
            }
            prev_mu = mu;
        }
    } else {
        // Scan upward looking for the above-one region, then its far edge.
        let mut prev_mu = opts.mu_start;
        let mut mu = opts.mu_start;
        let mut seen_above = false;
        for _ in 0..64 {
            if outer >= opts.max_outer {
                break;
            }
            mu *= 2.0;
            outer += 1;
            let out = eval(mu, chi)?;
            inner_total += out.iterations;
            chi = out.chi;
            if out.kraft > 1.0 {
                seen_above = true;
            } else if seen_above {
                mu_lo = prev_mu;
                mu_hi = mu;
                bracketed = true;
                break;
            }
            prev_mu = mu;
        }
        if !bracketed {
            // Falling branch may extend below the start; scan downward.
            let mut hi = opts.mu_start;
            let mut mu = opts.mu_start;
            while outer < opts.max_outer {
                mu *= 0.5;
                outer += 1;
                let out = eval(mu, chi)?;
                inner_total += out.iterations;
                chi = out.chi;
                if out.kraft >= 1.0 {
                    mu_lo = mu;
                    mu_hi = hi;
                    bracketed = true;
                    break;
                }
                hi = mu;
            }
        }
    }
    if !bracketed {
        return Err(Error::NonMonotoneKraft { mu: opts.mu_start });
    }

    // Bisect the multiplier on the bracket.
    let mut best: Option<(f64, InnerOutcome)> = None;
    for _ in 0..opts.bisection_steps {
        let mu = 0.5 * (mu_lo + mu_hi);
        outer += 1;
        let out = eval(mu, chi)?;
        inner_total += out.iterations;
        chi = out.chi;
        let residual = out.kraft - 1.0;
        if residual > 0.0 {
            mu_lo = mu;
        } else {
            mu_hi = mu;
        }
        let better = best
            .as_ref()
            .map(|(_, b)| residual.abs() < (b.kraft - 1.0).abs())
            .unwrap_or(true);
        if better {
            best = Some((mu, out));
        }
        if residual.abs() <= 1e-13 {
            break;
        }
    }
    let (mu, out) = best.expect("bisection always evaluates at least once");
    let residual = out.kraft - 1.0;
    if residual.abs() > 1e-6 {
        return Err(Error::Convergence {
            kraft_residual: residual,
            outer_iterations: outer,
            lengths: out.lengths,
        });
    }
    if out.lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::DegenerateCodebook(
            "solver produced a non-positive codeword length".into(),
        ));
    }
    Ok(CodebookAssignment {
        lengths_int: round_lengths(&out.lengths),
        kraft_sum: out.kraft,
        lengths: out.lengths,
        mu,
        chi: out.chi,
        xi: out.xi,
        inner_iterations: inner_total,
        outer_iterations: outer,
    })
}

/// Everything the analytics need to know about one link, before choosing the
/// admitted size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProblem {
    /// Full-alphabet source pmf.
    pub pmf: Vec<f64>,
    pub values: LinkValues,
    pub lambda: f64,
    pub filter: FilterPolicy,
    pub error: ErrorControlConfig,
    pub form: UtilityForm,
    /// Monitor weight in the network objective.
    pub weight: f64,
    /// Observation probability of this sensor at the monitor.
    pub obs_prob: f64,
}

/// Per-admitted-size derived quantities shared by analytics and simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittedDesign {
    pub admitted: AdmittedSet,
    /// Conditional pmf over the admitted indices (sums to one).
    pub pi: Vec<f64>,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    pub budgets: Vec<u32>,
    /// Per-realization delivery probability within the round budget.
    pub deliver: Vec<f64>,
    pub psi: f64,
    /// Pre-inspection admitted arrival rate `lambda q`.
    pub lambda_q: f64,
    /// Mean waiting time between accepted admissions, `1/(lambda psi q)`.
    pub gamma: f64,
}

/// Which steady-state rate scales the expected polygon area into a time
/// average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// Accepted-admission rate `lambda psi q`.
    Admission,
    /// Renewal delivery rate: successes per mean cycle of waiting plus
    /// channel occupancy.
    Delivery,
}

impl AdmittedDesign {
    /// The chosen steady-state rate, given the solved codeword lengths.
    pub fn eta(&self, lengths: &[f64], mode: EtaMode) -> f64 {
        match mode {
            EtaMode::Admission => self.lambda_q * self.psi,
            EtaMode::Delivery => {
                let success: f64 = self
                    .pi
                    .iter()
                    .zip(&self.deliver)
                    .map(|(&p, &d)| p * d)
                    .sum();
                let occupancy: f64 = self
                    .pi
                    .iter()
                    .zip(&self.deliver)
                    .zip(&self.phi)
                    .zip(lengths)
                    .map(|(((&p, &d), &phi), &len)| p * d * phi * len)
                    .sum();
                success / (self.gamma + occupancy)
            }
        }
    }
}

/// Derive the admitted-set design for the `l` most valuable realizations.
pub fn admitted_design(link: &LinkProblem, l: usize) -> Result<AdmittedDesign> {
    let n = link.pmf.len();
    if link.filter.kind == FilterKind::AdaptiveAsymptotic && l != n {
        return Err(Error::invalid(
            "asymptotic adaptive filtering admits the full alphabet",
        ));
    }
    let admitted = AdmittedSet::top_of_order(&link.values.order, l, &link.pmf)?;
    let q = admitted.mass;
    let pi: Vec<f64> = admitted.indices.iter().map(|&i| link.pmf[i] / q).collect();
    let rho: Vec<f64> = admitted.indices.iter().map(|&i| link.values.rho[i]).collect();
    let v_mean = link.values.mean_value(&admitted.indices);
    let budgets: Vec<u32> = admitted
        .indices
        .iter()
        .map(|&i| {
            retx_budget(
                link.values.v[i],
                v_mean,
                link.error.r_max,
                link.error.rmax_mode,
            )
        })
        .collect();
    let phi: Vec<f64> = budgets
        .iter()
        .map(|&b| link.error.tx_cost_factor(b))
        .collect::<Result<_>>()?;
    let deliver: Vec<f64> = budgets
        .iter()
        .map(|&b| 1.0 - link.error.residual_error_prob(b))
        .collect();
    let lambda_q = link.lambda * q;
    let psi = if link.filter.is_adaptive() {
        let thresholds =
            expectation_thresholds(link.filter.d_max, lambda_q, link.filter.ell_max);
        acceptance_factor(&rho, &pi, link.filter.d_max, &thresholds)?.psi
    } else {
        1.0
    };
    Ok(AdmittedDesign {
        admitted,
        pi,
        rho,
        phi,
        budgets,
        deliver,
        psi,
        lambda_q,
        gamma: 1.0 / (link.lambda * psi * q),
    })
}

/// Analytic evaluation of one (link, admitted size) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPoint {
    pub l: usize,
    /// Contribution to the network objective, weight and observation included.
    pub j_soi: f64,
    pub expected_polygon: f64,
    pub admitted_mass: f64,
    pub psi: f64,
    pub gamma: f64,
    pub mean_length: f64,
    pub kraft_residual: f64,
    /// Second-order expansion stress at this point.
    pub taylor_stress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub l_star: usize,
    pub curve: Vec<SelectionPoint>,
}

/// Evaluate one admitted size through the full analytic pipeline.
pub fn evaluate_admission(
    link: &LinkProblem,
    l: usize,
    eta_mode: EtaMode,
    opts: &SolverOptions,
) -> Result<(SelectionPoint, AdmittedDesign, CodebookAssignment)> {
    let design = admitted_design(link, l)?;
    let assignment = optimize_codebook(
        &link.form,
        &design.pi,
        &design.rho,
        &design.phi,
        design.gamma,
        opts,
    )?;
    let moments = Moments::from_parts(
        &design.pi,
        &design.rho,
        &design.phi,
        &assignment.lengths,
        design.gamma,
    )?;
    let e_q = expected_polygon(&link.form, &moments);
    let eta = design.eta(&assignment.lengths, eta_mode);
    let j = link.weight * link.obs_prob * average_soi(&link.form, &moments, eta);
    let rho_max_admitted = design.rho.iter().copied().fold(0.0f64, f64::max);
    let mean_length: f64 = design
        .pi
        .iter()
        .zip(&assignment.lengths)
        .map(|(&p, &len)| p * len)
        .sum();
    let point = SelectionPoint {
        l,
        j_soi: j,
        expected_polygon: e_q,
        admitted_mass: design.admitted.mass,
        psi: design.psi,
        gamma: design.gamma,
        mean_length,
        kraft_residual: assignment.kraft_sum - 1.0,
        taylor_stress: moments.taylor_stress(rho_max_admitted),
    };
    Ok((point, design, assignment))
}

/// Sweep candidate admitted sizes and return the objective-maximizing one
/// together with the whole curve. Ties resolve to the smaller size.
pub fn select_admission_size(
    link: &LinkProblem,
    l_range: impl IntoIterator<Item = usize>,
    eta_mode: EtaMode,
    opts: &SolverOptions,
) -> Result<SelectionResult> {
    let mut curve = Vec::new();
    for l in l_range {
        let (point, _, _) = evaluate_admission(link, l, eta_mode, opts)?;
        curve.push(point);
    }
    if curve.is_empty() {
        return Err(Error::invalid("empty admitted-size range"));
    }
    let mut best = 0usize;
    for (i, p) in curve.iter().enumerate() {
        if p.j_soi > curve[best].j_soi {
            best = i;
        }
    }
    Ok(SelectionResult {
        l_star: curve[best].l,
        curve,
    })
}
