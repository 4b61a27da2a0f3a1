//! Search for nearby weights making the phase-advance vector rational.
//!
//! The phase-advance map f(tau0, tau_1, ..., tau_{m-1}) = tau0 D^{-1} chi
//! (with tau constrained to the unit sphere, so tau_m is dependent) is
//! smooth wherever the two Riccati equations keep nonsingular stabilizing
//! solutions. When its Jacobian is nonsingular, rational targets arbitrarily
//! close to the current value can be hit exactly; this module estimates the
//! Jacobian by central differences and runs a damped Newton iteration
//! toward a rounded rational target, re-checking the synthesis conditions
//! at every accepted step.

use ndarray::Array2;
use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::numlin::{self, is_pos};
use crate::pendulum::{self, NonlinearityBank};
use crate::riccati;

use super::hinf::build_two_riccati;
use super::lagrange::{lagrange_output_feedback_uncontrollable, LagrangeSynthesis};
use super::{Plant, SynthesisParams};

#[derive(Debug, Clone)]
pub struct RationalitySearchConfig {
    /// Radius of the ball around the starting point the search may use.
    pub epsilon: f64,
    /// Denominator bound for the rational target.
    pub max_den: i64,
    /// Acceptance tolerance on |f - target|.
    pub tol: f64,
    pub max_steps: usize,
    /// Central-difference step is fd_step_scale * max(parameter, 0.1).
    pub fd_step_scale: f64,
}

impl Default for RationalitySearchConfig {
    fn default() -> Self {
        RationalitySearchConfig {
            epsilon: 0.05,
            max_den: 1000,
            tol: 1e-9,
            max_steps: 25,
            fd_step_scale: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RationalitySearchResult {
    pub tau0: f64,
    /// Full unit-normalized weight vector at the solution.
    pub tau: Vec<f64>,
    /// Rational target that was hit.
    pub nu: Vec<Rational64>,
    /// Phase-advance values at the solution.
    pub f: Vec<f64>,
    pub steps: usize,
    /// Condition number of the estimated Jacobian (absent when the start
    /// was already rational and no Jacobian was needed).
    pub jacobian_cond: Option<f64>,
    /// Full synthesis at the adjusted parameters.
    pub synthesis: LagrangeSynthesis,
}

/// Pack (tau0, free tau entries) and recover the dependent last entry.
fn unpack_tau(tilde: &[f64]) -> Result<(f64, Vec<f64>)> {
    let tau0 = tilde[0];
    if !is_pos(tau0) {
        return Err(Error::SearchFailed(format!("tau0 = {tau0} left the positive cone")));
    }
    let m = tilde.len(); // tau has m entries, tilde has 1 + (m-1)
    let mut tau = Vec::with_capacity(m);
    let mut sq_sum = 0.0;
    for &t in &tilde[1..] {
        if !is_pos(t) {
            return Err(Error::SearchFailed(format!("tau entry {t} left the positive cone")));
        }
        tau.push(t);
        sq_sum += t * t;
    }
    if sq_sum >= 1.0 - 1e-12 {
        return Err(Error::SearchFailed(
            "unit-sphere constraint violated: free entries exceed norm one".into(),
        ));
    }
    tau.push((1.0 - sq_sum).sqrt());
    Ok((tau0, tau))
}

/// (final point, rational target hit, map values there, steps taken,
/// Jacobian condition when one was computed).
pub(crate) type NewtonOutcome = (Vec<f64>, Vec<Rational64>, Vec<f64>, usize, Option<f64>);

/// Newton iteration toward a rational target of a smooth map. Factored out
/// of the synthesis plumbing so the step logic is testable on synthetic
/// maps.
pub(crate) fn newton_to_rational<F>(
    mut f: F,
    start: &[f64],
    cfg: &RationalitySearchConfig,
) -> Result<NewtonOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let dim = start.len();
    let f0 = f(start)?;
    if let Ok(nu) = pendulum::rationalize(&f0, cfg.max_den, cfg.tol) {
        return Ok((start.to_vec(), nu, f0, 0, None));
    }

    let mut point = start.to_vec();
    let mut value = f0;
    let m_out = value.len();

    // rounded nonzero rational target
    let target: Vec<Rational64> = value
        .iter()
        .map(|&x| {
            let r = pendulum::round_to_rational(x, cfg.max_den);
            if r.numer() == &0 {
                Rational64::new(if x >= 0.0 { 1 } else { -1 }, cfg.max_den)
            } else {
                r
            }
        })
        .collect();
    let target_f: Vec<f64> = target.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect();

    for step in 1..=cfg.max_steps {
        // central-difference Jacobian at the current point
        let mut jac = Array2::<f64>::zeros((m_out, dim));
        for j in 0..dim {
            let h = cfg.fd_step_scale * point[j].abs().max(0.1);
            let mut plus = point.clone();
            plus[j] += h;
            let mut minus = point.clone();
            minus[j] -= h;
            let fp = f(&plus)?;
            let fm = f(&minus)?;
            for i in 0..m_out {
                jac[[i, j]] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let cond = numlin::cond_2(&jac.view())?;
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::SingularJacobian { cond });
        }

        let residual: Vec<f64> = target_f.iter().zip(&value).map(|(t, v)| t - v).collect();
        let rhs = Array2::from_shape_fn((m_out, 1), |(i, _)| residual[i]);
        let delta = numlin::solve_real(&jac.view(), &rhs.view())?;

        let mut accepted = false;
        let mut damping = 1.0;
        while damping >= 1.0 / 64.0 {
            let candidate: Vec<f64> = point
                .iter()
                .enumerate()
                .map(|(j, &p)| p + damping * delta[[j, 0]])
                .collect();
            let dist = candidate
                .iter()
                .zip(start)
                .map(|(c, s)| (c - s) * (c - s))
                .sum::<f64>()
                .sqrt();
            if dist > cfg.epsilon {
                damping *= 0.5;
                continue;
            }
            match f(&candidate) {
                Ok(v) => {
                    point = candidate;
                    value = v;
                    accepted = true;
                    break;
                }
                Err(_) => {
                    damping *= 0.5;
                }
            }
        }
        if !accepted {
            return Err(Error::SearchFailed(
                "no admissible damped step inside the search radius".into(),
            ));
        }
        let err = target_f
            .iter()
            .zip(&value)
            .map(|(t, v)| (t - v).abs())
            .fold(0.0_f64, f64::max);
        if err <= cfg.tol {
            return Ok((point, target, value, step, Some(cond)));
        }
    }
    Err(Error::SearchFailed(format!(
        "no convergence to the rational target within {} steps",
        cfg.max_steps
    )))
}

/// Adjust (tau0, tau) near the start so that the phase-advance vector of
/// the uncontrollable output-feedback loop becomes rational with bounded
/// denominators, then run the full synthesis at the adjusted parameters.
pub fn rationality_search(
    plant: &Plant,
    bank: &NonlinearityBank,
    params: &SynthesisParams,
    cfg: &RationalitySearchConfig,
) -> Result<RationalitySearchResult> {
    let m = params.channels();
    let (tau_unit, _) = params.normalized_tau();
    let mut tilde = Vec::with_capacity(m);
    tilde.push(params.tau0);
    tilde.extend_from_slice(&tau_unit[..m - 1]);
    let periods = bank.periods();

    let eval = |tilde: &[f64]| -> Result<Vec<f64>> {
        let (tau0, tau) = unpack_tau(tilde)?;
        let p = SynthesisParams::new(params.lambda, tau, tau0, params.mu.clone())?;
        phase_advance_map(plant, &p, &periods)
    };

    let (tilde_final, nu, f, steps, jacobian_cond) = newton_to_rational(eval, &tilde, cfg)?;
    let (tau0, tau) = unpack_tau(&tilde_final)?;
    let final_params = SynthesisParams::new(params.lambda, tau.clone(), tau0, params.mu.clone())?;
    let synthesis = lagrange_output_feedback_uncontrollable(plant, bank, &final_params)?;
    Ok(RationalitySearchResult { tau0, tau, nu, f, steps, jacobian_cond, synthesis })
}

/// f(tilde) = tau0 D^{-1} chi for the uncontrollable loop at the given
/// weights; errors when conditions I-III fail there.
fn phase_advance_map(plant: &Plant, params: &SynthesisParams, periods: &[f64]) -> Result<Vec<f64>> {
    let infeasible = |what: String| Error::SearchFailed(format!("left feasible set: {what}"));
    let tr = build_two_riccati(plant, params.lambda, &params.tau, &params.mu)
        .map_err(|e| infeasible(e.to_string()))?;
    let x_sol = riccati::solve_stabilizing(&tr.x_prob).map_err(|e| infeasible(e.to_string()))?;
    if !x_sol.inertia.is_pseudo_positive_definite() {
        return Err(infeasible(format!("X inertia {}", x_sol.inertia)));
    }
    let y_sol = riccati::solve_stabilizing(&tr.y_prob).map_err(|e| infeasible(e.to_string()))?;
    if !y_sol.inertia.is_positive_definite() {
        return Err(infeasible(format!("Y inertia {}", y_sol.inertia)));
    }
    let rho = numlin::spectral_radius(&x_sol.p.dot(&y_sol.p).view())?;
    if rho >= 1.0 {
        return Err(infeasible(format!("spectral radius {rho}")));
    }
    let dec = pendulum::decompose_uncontrollable(plant)?;
    let pieces = super::lagrange::uncontrollable_controller_and_kernel(
        plant, params, &tr, &dec, &x_sol.p, &y_sol.p,
    )?;
    let n = plant.states();
    let super::Controller::Dynamic { cc, .. } = &pieces.controller else { unreachable!() };
    // chi = [D12 Cc, C1] d
    let d_ctrl = pieces.d_bar.slice(ndarray::s![..n]).to_owned();
    let d_plant = pieces.d_bar.slice(ndarray::s![n..]).to_owned();
    let chi = plant.d12.dot(cc).dot(&d_ctrl) + plant.c1.dot(&d_plant);
    Ok(chi
        .iter()
        .zip(periods)
        .map(|(&x, &delta)| params.tau0 * x / delta)
        .collect())
}
