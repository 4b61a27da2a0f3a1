//! Lagrange-stabilizing synthesis.
//!
//! The output-feedback procedures here are the shifted, sector-weighted
//! versions of the pseudo-H-infinity procedures: replace A by A + lambda I,
//! scale the channel data by the diagonal weights built from (tau, mu),
//! and run the corresponding two-Riccati construction. What is new is the
//! lattice bookkeeping: the plant must carry its zero mode in the
//! unobservable (or uncontrollable) part, the compensator must preserve it,
//! and the resulting phase-advance vector must be rational so that a finite
//! multiple of the kernel direction shifts every nonlinearity by whole
//! periods.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::numlin::{self, is_pos, Inertia};
use crate::pendulum::{
    self, KalmanDecomposition, NonlinearityBank, PendulumCertificate,
};
use crate::riccati::{self, RiccatiSolution};
use crate::sbrl::{self, LagrangeSweep, SweepGrid};

use super::hinf::{build_two_riccati, scale_cols, TwoRiccati};
use super::{failures_to_error, ClosedLoop, ConditionCheck, Controller, Plant, SynthesisParams};

/// Outcome of a successful Lagrange synthesis.
#[derive(Debug, Clone)]
pub struct LagrangeSynthesis {
    pub controller: Controller,
    pub closed_loop: ClosedLoop,
    pub certificate: PendulumCertificate,
    pub sweep: LagrangeSweep,
    /// A_cl + lambda I has exactly one eigenvalue right of the axis band.
    pub shifted_pseudo_hurwitz: bool,
    pub x: Array2<f64>,
    pub x_inertia: Inertia,
    pub y: Option<Array2<f64>>,
    pub y_inertia: Option<Inertia>,
    pub rho_xy: Option<f64>,
    pub decomposition: KalmanDecomposition,
    pub checks: Vec<ConditionCheck>,
}

fn bank_matches_params(bank: &NonlinearityBank, params: &SynthesisParams) -> Result<()> {
    if bank.len() != params.channels() {
        return Err(Error::Dimension(format!(
            "bank has {} nonlinearities, parameters carry {} channels",
            bank.len(),
            params.channels()
        )));
    }
    for (i, (entry_mu, param_mu)) in
        bank.sector_bounds().iter().zip(&params.mu).enumerate()
    {
        if (entry_mu - param_mu).abs() > 1e-12 * entry_mu.max(1.0) {
            return Err(Error::Validation(format!(
                "sector bound mismatch on channel {i}: bank {entry_mu}, parameters {param_mu}"
            )));
        }
    }
    Ok(())
}

fn solve_condition(
    prob: &riccati::AreProblem,
    name: &str,
    want_ppd: bool,
    checks: &mut Vec<ConditionCheck>,
) -> Option<RiccatiSolution> {
    match riccati::solve_stabilizing(prob) {
        Ok(sol) => {
            let ok = if want_ppd {
                sol.inertia.is_pseudo_positive_definite()
            } else {
                sol.inertia.is_positive_definite()
            };
            let expect = if want_ppd { "pseudo-positive definite" } else { "positive definite" };
            checks.push(ConditionCheck::new(
                name,
                ok,
                format!("stabilizing solution has inertia {} (need {expect})", sol.inertia),
            ));
            ok.then_some(sol)
        }
        Err(e) => {
            checks.push(ConditionCheck::new(name, false, e.to_string()));
            None
        }
    }
}

struct AssumptionScaffold {
    tr: TwoRiccati,
    dec: KalmanDecomposition,
    checks: Vec<ConditionCheck>,
}

fn assumptions_and_riccatis(
    plant: &Plant,
    bank: &NonlinearityBank,
    params: &SynthesisParams,
    flavor: pendulum::DecompositionFlavor,
    theorem: &'static str,
) -> Result<AssumptionScaffold> {
    bank_matches_params(bank, params)?;
    let mut checks = Vec::new();
    let tr = match build_two_riccati(plant, params.lambda, &params.tau, &params.mu) {
        Ok(tr) => {
            checks.push(ConditionCheck::new("Assumption 1", true, "weighted control penalty positive definite"));
            checks.push(ConditionCheck::new("Assumption 2", true, "weighted measurement noise positive definite"));
            tr
        }
        Err(Error::SynthesisConditions { failures, .. }) => {
            for f in failures {
                checks.push(ConditionCheck::new(f.condition, false, f.detail));
            }
            return Err(failures_to_error(theorem, &checks).unwrap());
        }
        Err(e) => return Err(e),
    };

    let dec = match flavor {
        pendulum::DecompositionFlavor::Unobservable => pendulum::decompose_unobservable(plant),
        pendulum::DecompositionFlavor::Uncontrollable => pendulum::decompose_uncontrollable(plant),
    };
    let structural = match flavor {
        pendulum::DecompositionFlavor::Unobservable => "Assumption 3",
        pendulum::DecompositionFlavor::Uncontrollable => "Assumption 5",
    };
    let dec = match dec {
        Ok(dec) if dec.dims.1 == 1 => {
            checks.push(ConditionCheck::new(
                structural,
                true,
                format!("single zero mode isolated (cond T = {:.3e})", dec.cond_t),
            ));
            dec
        }
        Ok(dec) => {
            checks.push(ConditionCheck::new(
                structural,
                false,
                format!("zero-mode subspace has dimension {}", dec.dims.1),
            ));
            return Err(failures_to_error(theorem, &checks).unwrap());
        }
        Err(e) => {
            checks.push(ConditionCheck::new(structural, false, e.to_string()));
            return Err(failures_to_error(theorem, &checks).unwrap());
        }
    };
    Ok(AssumptionScaffold { tr, dec, checks })
}

/// Riccati data threaded into the final assembly step.
struct SolutionSummary {
    x: Array2<f64>,
    x_inertia: Inertia,
    y: Option<Array2<f64>>,
    y_inertia: Option<Inertia>,
    rho_xy: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn finish_synthesis(
    theorem: &'static str,
    plant: &Plant,
    bank: &NonlinearityBank,
    params: &SynthesisParams,
    controller: Controller,
    d_bar: Array1<f64>,
    dec: KalmanDecomposition,
    solutions: SolutionSummary,
    mut checks: Vec<ConditionCheck>,
    rationality_condition: &str,
) -> Result<LagrangeSynthesis> {
    let closed_loop = ClosedLoop::assemble(plant, &controller, bank.clone())?;

    let certificate = match pendulum::pendulum_certificate_with_direction(
        &closed_loop.a.view(),
        &closed_loop.c.view(),
        bank,
        params.tau0,
        d_bar,
    ) {
        Ok(cert) => {
            checks.push(ConditionCheck::new(
                rationality_condition,
                true,
                format!(
                    "phase advances {:?} with common denominator {}",
                    cert.nu, cert.p_bar
                ),
            ));
            Some(cert)
        }
        Err(e) => {
            checks.push(ConditionCheck::new(rationality_condition, false, e.to_string()));
            None
        }
    };

    let lti = closed_loop.as_lti()?;
    let shifted = &closed_loop.a + &(Array2::<f64>::eye(closed_loop.order()) * params.lambda);
    let shifted_pseudo_hurwitz =
        numlin::is_pseudo_hurwitz(&shifted.view(), numlin::default_axis_tol(&shifted.view()))?;
    checks.push(ConditionCheck::new(
        "shifted pseudo-Hurwitz",
        shifted_pseudo_hurwitz,
        "closed-loop matrix plus lambda I must have exactly one unstable eigenvalue",
    ));
    let sweep =
        sbrl::check_lagrange_frequency(&lti, params.lambda, &params.tau, &params.mu, &SweepGrid::default())?;
    checks.push(ConditionCheck::new(
        "frequency sweep",
        sweep.holds,
        format!("worst margin {:.6e} at omega {:.6e}", sweep.worst_margin, sweep.worst_omega),
    ));

    if let Some(err) = failures_to_error(theorem, &checks) {
        return Err(err);
    }
    Ok(LagrangeSynthesis {
        controller,
        closed_loop,
        certificate: certificate.expect("certificate present when all checks pass"),
        sweep,
        shifted_pseudo_hurwitz,
        x: solutions.x,
        x_inertia: solutions.x_inertia,
        y: solutions.y,
        y_inertia: solutions.y_inertia,
        rho_xy: solutions.rho_xy,
        decomposition: dec,
        checks,
    })
}

/// Output feedback for plants whose zero mode is unobservable:
/// conditions are X > 0 (stabilizing), Y pseudo-positive definite
/// (stabilizing), rho(XY) < 1; the phase-advance vector comes from the
/// plant part of the kernel direction alone.
pub fn lagrange_output_feedback_unobservable(
    plant: &Plant,
    bank: &NonlinearityBank,
    params: &SynthesisParams,
) -> Result<LagrangeSynthesis> {
    const THEOREM: &str = "unobservable output-feedback synthesis";
    let AssumptionScaffold { tr, dec, mut checks } = assumptions_and_riccatis(
        plant,
        bank,
        params,
        pendulum::DecompositionFlavor::Unobservable,
        THEOREM,
    )?;

    // Assumption 4 can be checked before the Riccati conditions: the
    // phase-advance vector depends only on the plant kernel direction.
    let zero_dir = dec.zero_mode_direction();
    let chi = plant.c1.dot(&zero_dir);
    let nu_float: Vec<f64> = chi
        .iter()
        .zip(bank.periods())
        .map(|(&x, delta)| params.tau0 * x / delta)
        .collect();
    match pendulum::rationalize(&nu_float, pendulum::RAT_MAX_DEN, pendulum::RAT_TOL) {
        Ok(nu) => checks.push(ConditionCheck::new(
            "Assumption 4",
            true,
            format!("nu = {nu:?} rational and nonzero"),
        )),
        Err(e) => checks.push(ConditionCheck::new("Assumption 4", false, e.to_string())),
    }

    let x_sol = solve_condition(&tr.x_prob, "I", false, &mut checks);
    let y_sol = solve_condition(&tr.y_prob, "II", true, &mut checks);
    let (Some(x_sol), Some(y_sol)) = (x_sol, y_sol) else {
        return Err(failures_to_error(THEOREM, &checks).unwrap());
    };
    let (x, y) = (x_sol.p, y_sol.p);
    let rho = numlin::spectral_radius(&x.dot(&y).view())?;
    checks.push(ConditionCheck::new(
        "III",
        rho < 1.0,
        format!("spectral radius of XY is {rho:.6e}"),
    ));
    if let Some(err) = failures_to_error(THEOREM, &checks) {
        return Err(err);
    }

    // Bc = -(Y C2' + B1 diag(mm) D21') E2^{-1}
    // Cc = E1^{-1} (B2' X + D12' Mt C1) (I - YX)^{-1}
    // Ac = A + Bc C2 - B2 Cc + Y C1' (Mt C1 - Mt D12 Cc)
    let b1_mm = scale_cols(&plant.b1.view(), &tr.mm);
    let bc = -(&y.dot(&plant.c2.t()) + &b1_mm.dot(&plant.d21.t())).dot(&tr.e2_inv);
    let mtau_c1 = super::hinf::scale_rows(&plant.c1.view(), &params.tau);
    let lhs = tr.e1_inv.dot(&(&plant.b2.t().dot(&x) + &plant.d12.t().dot(&mtau_c1)));
    let iyx = Array2::<f64>::eye(plant.states()) - y.dot(&x);
    let cc_t = numlin::solve_real(&iyx.t(), &lhs.t())?;
    let cc = cc_t.t().to_owned();
    let mt_d12 = super::hinf::scale_rows(&plant.d12.view(), &params.tau);
    let ac = &plant.a + &bc.dot(&plant.c2) - &plant.b2.dot(&cc)
        + &y.dot(&plant.c1.t()).dot(&(&mtau_c1 - &mt_d12.dot(&cc)));
    let controller = Controller::Dynamic { ac, bc, cc };

    // kernel direction of the [xc; x] loop: controller part zero, plant
    // part the isolated zero mode
    let n = plant.states();
    let mut d_bar = Array1::<f64>::zeros(2 * n);
    d_bar.slice_mut(s![n..]).assign(&zero_dir);

    let solutions = SolutionSummary {
        x,
        x_inertia: x_sol.inertia,
        y: Some(y),
        y_inertia: Some(y_sol.inertia),
        rho_xy: Some(rho),
    };
    finish_synthesis(
        THEOREM,
        plant,
        bank,
        params,
        controller,
        d_bar,
        dec,
        solutions,
        checks,
        "lattice certificate",
    )
}

/// Output feedback for plants whose zero mode is uncontrollable:
/// conditions are X pseudo-positive definite (stabilizing), Y > 0
/// (stabilizing), rho(XY) < 1, plus the kernel/rationality condition on
/// the assembled compensator.
pub fn lagrange_output_feedback_uncontrollable(
    plant: &Plant,
    bank: &NonlinearityBank,
    params: &SynthesisParams,
) -> Result<LagrangeSynthesis> {
    const THEOREM: &str = "uncontrollable output-feedback synthesis";
    let AssumptionScaffold { tr, dec, mut checks } = assumptions_and_riccatis(
        plant,
        bank,
        params,
        pendulum::DecompositionFlavor::Uncontrollable,
        THEOREM,
    )?;

    let x_sol = solve_condition(&tr.x_prob, "I", true, &mut checks);
    let y_sol = solve_condition(&tr.y_prob, "II", false, &mut checks);
    let (Some(x_sol), Some(y_sol)) = (x_sol, y_sol) else {
        return Err(failures_to_error(THEOREM, &checks).unwrap());
    };
    let (x, y) = (x_sol.p, y_sol.p);
    let rho = numlin::spectral_radius(&x.dot(&y).view())?;
    checks.push(ConditionCheck::new(
        "III",
        rho < 1.0,
        format!("spectral radius of XY is {rho:.6e}"),
    ));
    if let Some(err) = failures_to_error(THEOREM, &checks) {
        return Err(err);
    }

    let pieces = uncontrollable_controller_and_kernel(plant, params, &tr, &dec, &x, &y)?;
    let UncontrollablePieces { controller, d_bar, block_cond } = pieces;
    checks.push(ConditionCheck::new(
        "IV (kernel block)",
        block_cond.is_finite(),
        format!("kernel block matrix condition {block_cond:.3e}"),
    ));
    if let Some(err) = failures_to_error(THEOREM, &checks) {
        return Err(err);
    }

    let solutions = SolutionSummary {
        x,
        x_inertia: x_sol.inertia,
        y: Some(y),
        y_inertia: Some(y_sol.inertia),
        rho_xy: Some(rho),
    };
    finish_synthesis(
        THEOREM,
        plant,
        bank,
        params,
        controller,
        d_bar,
        dec,
        solutions,
        checks,
        "IV (rationality)",
    )
}

pub(crate) struct UncontrollablePieces {
    pub controller: Controller,
    pub d_bar: Array1<f64>,
    pub block_cond: f64,
}

/// Compensator and closed-loop kernel direction for the uncontrollable
/// flavor. Shared with the rationality search, which re-evaluates the
/// phase-advance map many times.
pub(crate) fn uncontrollable_controller_and_kernel(
    plant: &Plant,
    params: &SynthesisParams,
    tr: &TwoRiccati,
    dec: &KalmanDecomposition,
    x: &Array2<f64>,
    y: &Array2<f64>,
) -> Result<UncontrollablePieces> {
    let n = plant.states();
    let keep = dec.dims.0;

    // Cc = -E1^{-1} (B2' X + D12' Mt C1)
    // Bc = (I - YX)^{-1} (Y C2' + B1 diag(mm) D21') E2^{-1}
    // Ac = A + B2 Cc - Bc C2 + (B1 diag(mm) - Bc D21 diag(mm)) B1' X
    let mtau_c1 = super::hinf::scale_rows(&plant.c1.view(), &params.tau);
    let cc = -tr.e1_inv.dot(&(&plant.b2.t().dot(x) + &plant.d12.t().dot(&mtau_c1)));
    let b1_mm = scale_cols(&plant.b1.view(), &tr.mm);
    let rhs = (&y.dot(&plant.c2.t()) + &b1_mm.dot(&plant.d21.t())).dot(&tr.e2_inv);
    let iyx = Array2::<f64>::eye(n) - y.dot(x);
    let bc = numlin::solve_real(&iyx.view(), &rhs.view())?;
    let d21_mm = scale_cols(&plant.d21.view(), &tr.mm);
    let ac = &plant.a + &plant.b2.dot(&cc) - &bc.dot(&plant.c2)
        + &(&b1_mm - &bc.dot(&d21_mm)).dot(&plant.b1.t()).dot(x);

    // kernel block system: [[Ac, Bc C2a], [B2a Cc, A1]] v = -[Bc C2b; A2]
    let a1t = dec.a_t.slice(s![..keep, ..keep]).to_owned();
    let a2t = dec.a_t.slice(s![..keep, keep..]).to_owned();
    let b2a = dec.b2_t.slice(s![..keep, ..]).to_owned();
    let c2a = dec.c2_t.slice(s![.., ..keep]).to_owned();
    let c2b = dec.c2_t.slice(s![.., keep..]).to_owned();

    let total = n + keep;
    let mut block = Array2::<f64>::zeros((total, total));
    block.slice_mut(s![..n, ..n]).assign(&ac);
    block.slice_mut(s![..n, n..]).assign(&bc.dot(&c2a));
    block.slice_mut(s![n.., ..n]).assign(&b2a.dot(&cc));
    block.slice_mut(s![n.., n..]).assign(&a1t);

    let mut rhs_vec = Array2::<f64>::zeros((total, 1));
    rhs_vec.slice_mut(s![..n, ..]).assign(&-bc.dot(&c2b));
    rhs_vec.slice_mut(s![n.., ..]).assign(&-a2t);

    let block_cond = numlin::cond_2(&block.view())?;
    if !block_cond.is_finite() || block_cond > numlin::COND_LIMIT {
        return Err(Error::SynthesisConditions {
            theorem: "uncontrollable output-feedback synthesis",
            failures: vec![crate::error::ConditionFailure {
                condition: "IV (kernel block)".into(),
                detail: format!("kernel block matrix is singular (condition {block_cond:.3e})"),
            }],
        });
    }
    let d0 = numlin::solve_real(&block.view(), &rhs_vec.view())?;

    // d = blockdiag(I, T) [d0; 1]: controller part verbatim, plant part
    // through the staircase transformation
    let mut plant_coord = Array1::<f64>::zeros(n);
    for i in 0..keep {
        plant_coord[i] = d0[[n + i, 0]];
    }
    plant_coord[n - 1] = 1.0;
    let plant_part = dec.t.dot(&plant_coord);
    let mut d_bar = Array1::<f64>::zeros(2 * n);
    for i in 0..n {
        d_bar[i] = d0[[i, 0]];
        d_bar[n + i] = plant_part[i];
    }

    Ok(UncontrollablePieces {
        controller: Controller::Dynamic { ac, bc, cc },
        d_bar,
        block_cond,
    })
}

/// Static state feedback for the uncontrollable flavor: a single
/// pseudo-positive definite solution of the control-type equation with a
/// Hurwitz closure yields the gain; kernel bookkeeping as above but on the
/// n-state loop.
pub fn lagrange_state_feedback(
    plant: &Plant,
    bank: &NonlinearityBank,
    params: &SynthesisParams,
) -> Result<LagrangeSynthesis> {
    const THEOREM: &str = "state-feedback synthesis";
    let AssumptionScaffold { tr, dec, mut checks } = assumptions_and_riccatis(
        plant,
        bank,
        params,
        pendulum::DecompositionFlavor::Uncontrollable,
        THEOREM,
    )?;

    // stabilizing branch first, then anti-stabilizing: the closure must be
    // Hurwitz (condition I), which only the stabilizing branch delivers,
    // but the search order is part of the contract
    let mut chosen = None;
    let mut notes = Vec::new();
    for solver in [riccati::solve_stabilizing, riccati::solve_anti_stabilizing] {
        match solver(&tr.x_prob) {
            Ok(sol) => {
                let hurwitz =
                    numlin::eigenvalues(&sol.closure_matrix.view())?.is_hurwitz();
                if sol.inertia.is_pseudo_positive_definite() && hurwitz {
                    chosen = Some(sol);
                    break;
                }
                notes.push(format!(
                    "{}: inertia {}, closure Hurwitz {hurwitz}",
                    sol.kind, sol.inertia
                ));
            }
            Err(e) => notes.push(e.to_string()),
        }
    }
    let Some(x_sol) = chosen else {
        checks.push(ConditionCheck::new(
            "I",
            false,
            format!(
                "no pseudo-positive definite solution with Hurwitz closure ({})",
                notes.join("; ")
            ),
        ));
        return Err(failures_to_error(THEOREM, &checks).unwrap());
    };
    checks.push(ConditionCheck::new(
        "I",
        true,
        format!("{} branch, inertia {}, closure Hurwitz", x_sol.kind, x_sol.inertia),
    ));
    let x = x_sol.p.clone();

    // K = -E1^{-1} (B2' X + D12' Mt C1)
    let mtau_c1 = super::hinf::scale_rows(&plant.c1.view(), &params.tau);
    let k = -tr.e1_inv.dot(&(&plant.b2.t().dot(&x) + &plant.d12.t().dot(&mtau_c1)));
    let a_cl = &plant.a + &plant.b2.dot(&k);

    // kernel direction: transform the closed loop, solve the retained block
    let keep = dec.dims.0;
    let m_t = dec.t_inv.dot(&a_cl).dot(&dec.t);
    let m11 = m_t.slice(s![..keep, ..keep]).to_owned();
    let m12 = m_t.slice(s![..keep, keep..]).to_owned();
    let cond_m11 = numlin::cond_2(&m11.view())?;
    if !cond_m11.is_finite() || cond_m11 > numlin::COND_LIMIT {
        checks.push(ConditionCheck::new(
            "kernel block",
            false,
            format!("retained closed-loop block is singular (condition {cond_m11:.3e})"),
        ));
        return Err(failures_to_error(THEOREM, &checks).unwrap());
    }
    let d0 = numlin::solve_real(&m11.view(), &m12.view())?;
    let n = plant.states();
    let mut coord = Array1::<f64>::zeros(n);
    for i in 0..keep {
        coord[i] = -d0[[i, 0]];
    }
    coord[n - 1] = 1.0;
    let d_bar = dec.t.dot(&coord);

    let controller = Controller::StaticGain { k };
    let solutions = SolutionSummary {
        x,
        x_inertia: x_sol.inertia,
        y: None,
        y_inertia: None,
        rho_xy: None,
    };
    finish_synthesis(
        THEOREM,
        plant,
        bank,
        params,
        controller,
        d_bar,
        dec,
        solutions,
        checks,
        "II (rationality)",
    )
}

/// Rescaling map between solution sets at tau and gamma tau: the
/// conditions of the output-feedback procedures are invariant under it.
pub fn tau_scaling_normalize(
    x: &Array2<f64>,
    y: &Array2<f64>,
    tau: &[f64],
    gamma: f64,
) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>)> {
    if !is_pos(gamma) {
        return Err(Error::Validation(format!("gamma = {gamma} must be positive")));
    }
    Ok((
        x.mapv(|v| v * gamma),
        y.mapv(|v| v / gamma),
        tau.iter().map(|t| t * gamma).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn tau_scaling_examples() {
        let x = arr2(&[[1.0]]);
        let y = arr2(&[[0.5]]);
        let (xs, ys, ts) = tau_scaling_normalize(&x, &y, &[1.0], 1.0).unwrap();
        assert_eq!(xs[[0, 0]], 1.0);
        assert_eq!(ys[[0, 0]], 0.5);
        assert_eq!(ts, vec![1.0]);

        let (xs, ys, ts) = tau_scaling_normalize(&x, &y, &[1.0], 2.0).unwrap();
        assert_eq!(xs[[0, 0]], 2.0);
        assert_eq!(ys[[0, 0]], 0.25);
        assert_eq!(ts, vec![2.0]);

        assert!(tau_scaling_normalize(&x, &y, &[1.0], 0.0).is_err());
    }
}
