//! State- and output-feedback procedures making the closed loop pseudo
//! strict bounded real.
//!
//! Both output-feedback routes solve the same pair of Riccati equations
//! (a control-type one in X, a filter-type one in Y) and differ only in
//! which solution must be pseudo-positive definite and in the compensator
//! formulas; they are transpose-duals of each other.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::numlin::{self, Inertia};
use crate::riccati::{self, AreProblem, RiccatiSolution, SolutionKind};
use crate::sbrl::{self, LtiSystem, SbrVerdict, SweepGrid};

use super::{failures_to_error, ConditionCheck, Controller, Plant};

/// E1 = D12' M D12 with its inverse, or the reason it is not positive
/// definite.
pub(crate) fn weighted_e1(d12: &ArrayView2<f64>, weights: &[f64]) -> Result<(Array2<f64>, Array2<f64>)> {
    let scaled = scale_rows(d12, weights);
    let e1 = d12.t().dot(&scaled);
    let e1s = symmetrize(&e1);
    let inertia = numlin::inertia_symmetric(&e1s.view(), numlin::default_zero_tol(&e1s.view()))?;
    if !inertia.is_positive_definite() {
        return Err(Error::SynthesisConditions {
            theorem: "assumption check",
            failures: vec![crate::error::ConditionFailure {
                condition: "Assumption 1".into(),
                detail: format!("D12-weighted control penalty has inertia {inertia}"),
            }],
        });
    }
    let e1_inv = numlin::inverse_guarded(&e1s.view(), numlin::COND_LIMIT)?;
    Ok((e1s, e1_inv))
}

pub(crate) fn scale_rows(m: &ArrayView2<f64>, weights: &[f64]) -> Array2<f64> {
    let mut out = m.to_owned();
    for (i, &w) in weights.iter().enumerate() {
        out.row_mut(i).mapv_inplace(|x| x * w);
    }
    out
}

pub(crate) fn scale_cols(m: &ArrayView2<f64>, weights: &[f64]) -> Array2<f64> {
    let mut out = m.to_owned();
    for (j, &w) in weights.iter().enumerate() {
        out.column_mut(j).mapv_inplace(|x| x * w);
    }
    out
}

pub(crate) fn symmetrize(m: &Array2<f64>) -> Array2<f64> {
    (m + &m.t()) * 0.5
}

/// The two Riccati problems behind the output-feedback procedures, built
/// for shift `lambda` and channel weights (tau, mu). The unweighted,
/// unshifted case is lambda = 0, tau = mu = 1.
pub(crate) struct TwoRiccati {
    pub e1_inv: Array2<f64>,
    pub e2_inv: Array2<f64>,
    /// diag(mu_i^2 / tau_i), the sector-scaled disturbance weight.
    pub mm: Vec<f64>,
    /// Control-type problem in standard orientation; the stabilizing
    /// solution is X.
    pub x_prob: AreProblem,
    /// Filter-type problem, transposed into standard orientation; the
    /// stabilizing solution is Y.
    pub y_prob: AreProblem,
}

/// The control-type half alone (enough for static state feedback, which
/// has no measurement-noise assumption).
pub(crate) struct ControlRiccati {
    pub e1_inv: Array2<f64>,
    pub mm: Vec<f64>,
    pub x_prob: AreProblem,
}

pub(crate) fn build_control_riccati(
    plant: &Plant,
    lambda: f64,
    tau: &[f64],
    mu: &[f64],
) -> Result<ControlRiccati> {
    let n = plant.states();
    let m = plant.channels();
    if tau.len() != m || mu.len() != m {
        return Err(Error::Dimension(format!(
            "weights must have length {m}: tau {}, mu {}",
            tau.len(),
            mu.len()
        )));
    }
    let (_, e1_inv) = weighted_e1(&plant.d12.view(), tau)?;
    let mm: Vec<f64> = tau.iter().zip(mu).map(|(&t, &u)| u * u / t).collect();

    let shift = Array2::<f64>::eye(n) * lambda;
    let mtau_c1 = scale_rows(&plant.c1.view(), tau);

    // control-type: (lI + A - B2 E1^{-1} D12' Mt C1)' X + X (.) + X R1 X + Q1 = 0
    // with R1 = B1 diag(mm) B1' - B2 E1^{-1} B2'
    // and  Q1 = C1' (Mt - Mt D12 E1^{-1} D12' Mt) C1
    let a1 = &shift + &plant.a - &plant.b2.dot(&e1_inv).dot(&plant.d12.t()).dot(&mtau_c1);
    let r1 = &plant.b1.dot(&scale_rows(&plant.b1.t(), &mm))
        - &plant.b2.dot(&e1_inv).dot(&plant.b2.t());
    let mt_d12 = scale_rows(&plant.d12.view(), tau);
    let inner = array_diag(tau) - mt_d12.dot(&e1_inv).dot(&mt_d12.t());
    let q1 = plant.c1.t().dot(&inner).dot(&plant.c1);
    let x_prob = AreProblem::new(a1, symmetrize(&r1), symmetrize(&q1))?;
    Ok(ControlRiccati { e1_inv, mm, x_prob })
}

pub(crate) fn build_two_riccati(
    plant: &Plant,
    lambda: f64,
    tau: &[f64],
    mu: &[f64],
) -> Result<TwoRiccati> {
    let n = plant.states();
    let ControlRiccati { e1_inv, mm, x_prob } = build_control_riccati(plant, lambda, tau, mu)?;

    // E2 = D21 diag(mm) D21'
    let e2 = plant.d21.dot(&scale_rows(&plant.d21.t(), &mm));
    let e2s = symmetrize(&e2);
    let inertia = numlin::inertia_symmetric(&e2s.view(), numlin::default_zero_tol(&e2s.view()))?;
    if !inertia.is_positive_definite() {
        return Err(Error::SynthesisConditions {
            theorem: "assumption check",
            failures: vec![crate::error::ConditionFailure {
                condition: "Assumption 2".into(),
                detail: format!("D21-weighted measurement noise has inertia {inertia}"),
            }],
        });
    }
    let e2_inv = numlin::inverse_guarded(&e2s.view(), numlin::COND_LIMIT)?;

    let shift = Array2::<f64>::eye(n) * lambda;
    let mtau_c1 = scale_rows(&plant.c1.view(), tau);

    // filter-type: A2 Y + Y A2' + Y R2 Y + Q2 = 0 with
    // A2 = lI + A - B1 diag(mm) D21' E2^{-1} C2,
    // R2 = C1' Mt C1 - C2' E2^{-1} C2,
    // Q2 = B1 (diag(mm) - diag(mm) D21' E2^{-1} D21 diag(mm)) B1'
    let b1_mm = scale_cols(&plant.b1.view(), &mm);
    let a2 = &shift + &plant.a - &b1_mm.dot(&plant.d21.t()).dot(&e2_inv).dot(&plant.c2);
    let r2 = &mtau_c1.t().dot(&plant.c1) - &plant.c2.t().dot(&e2_inv).dot(&plant.c2);
    let d21t = plant.d21.t();
    let mm_d21t = scale_rows(&d21t, &mm);
    let inner2 = array_diag(&mm) - mm_d21t.dot(&e2_inv).dot(&mm_d21t.t());
    let q2 = plant.b1.dot(&inner2).dot(&plant.b1.t());
    let y_prob = AreProblem::new(a2.t().to_owned(), symmetrize(&r2), symmetrize(&q2))?;

    Ok(TwoRiccati { e1_inv, e2_inv, mm, x_prob, y_prob })
}

pub(crate) fn array_diag(d: &[f64]) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((d.len(), d.len()));
    for (i, &x) in d.iter().enumerate() {
        m[[i, i]] = x;
    }
    m
}

#[derive(Debug, Clone)]
pub struct StateFeedbackResult {
    pub controller: Controller,
    pub solution: RiccatiSolution,
    pub branch: SolutionKind,
    pub closed_loop: LtiSystem,
    pub certificate: SbrVerdict,
    pub checks: Vec<ConditionCheck>,
}

/// Static gain u = -E1^{-1}(B2' P + D12' C1) x from a pseudo-positive
/// definite solution of the control-type Riccati equation, stabilizing
/// branch first.
pub fn state_feedback_pseudo_hinf(plant: &Plant) -> Result<StateFeedbackResult> {
    let m = plant.channels();
    let ones = vec![1.0; m];
    let tr = build_two_riccati(plant, 0.0, &ones, &ones)?;
    let mut checks = Vec::new();
    checks.push(ConditionCheck::new("Assumption 1", true, "control penalty positive definite"));

    let mut chosen: Option<RiccatiSolution> = None;
    let mut branch_notes = Vec::new();
    for solver in [riccati::solve_stabilizing, riccati::solve_anti_stabilizing] {
        match solver(&tr.x_prob) {
            Ok(sol) => {
                let spectrum = numlin::eigenvalues(&sol.closure_matrix.view())?;
                if sol.inertia.is_pseudo_positive_definite() && spectrum.is_axis_free() {
                    chosen = Some(sol);
                    break;
                }
                branch_notes.push(format!("{}: inertia {}", sol.kind, sol.inertia));
            }
            Err(e) => branch_notes.push(e.to_string()),
        }
    }
    let Some(sol) = chosen else {
        checks.push(ConditionCheck::new(
            "Riccati solution",
            false,
            format!("no pseudo-positive definite solution on searched branches ({})",
                branch_notes.join("; ")),
        ));
        return Err(failures_to_error("state feedback synthesis", &checks).unwrap());
    };
    checks.push(ConditionCheck::new(
        "Riccati solution",
        true,
        format!("{} branch, inertia {}", sol.kind, sol.inertia),
    ));

    // K = -E1^{-1} (B2' P + D12' C1)
    let k = -tr.e1_inv.dot(&(&plant.b2.t().dot(&sol.p) + &plant.d12.t().dot(&plant.c1)));
    let a_cl = &plant.a + &plant.b2.dot(&k);
    let c_cl = &plant.c1 + &plant.d12.dot(&k);
    let closed_loop = LtiSystem::new(a_cl, plant.b1.clone(), c_cl)?;
    let certificate = sbrl::check_gain_condition(&closed_loop, &SweepGrid::default())?;
    checks.push(ConditionCheck::new(
        "closed-loop verification",
        certificate.holds,
        format!(
            "pseudo-Hurwitz {} and peak gain {:.6e}",
            certificate.pseudo_hurwitz, certificate.peak_gain
        ),
    ));
    if let Some(err) = failures_to_error("state feedback synthesis", &checks) {
        return Err(err);
    }
    let branch = sol.kind;
    Ok(StateFeedbackResult {
        controller: Controller::StaticGain { k },
        solution: sol,
        branch,
        closed_loop,
        certificate,
        checks,
    })
}

#[derive(Debug, Clone)]
pub struct OutputFeedbackResult {
    pub controller: Controller,
    pub x: Array2<f64>,
    pub x_inertia: Inertia,
    pub y: Array2<f64>,
    pub y_inertia: Inertia,
    pub rho_xy: f64,
    pub closed_loop: LtiSystem,
    pub certificate: SbrVerdict,
    pub checks: Vec<ConditionCheck>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum OutputFeedbackVariant {
    /// X pseudo-positive definite, Y positive definite.
    V1,
    /// X positive definite, Y pseudo-positive definite.
    V2,
}

/// Output feedback with X pseudo-positive definite and Y positive definite.
pub fn output_feedback_pseudo_hinf_v1(plant: &Plant) -> Result<OutputFeedbackResult> {
    output_feedback(plant, OutputFeedbackVariant::V1)
}

/// Transpose-dual variant: X positive definite, Y pseudo-positive definite.
pub fn output_feedback_pseudo_hinf_v2(plant: &Plant) -> Result<OutputFeedbackResult> {
    output_feedback(plant, OutputFeedbackVariant::V2)
}

fn output_feedback(plant: &Plant, variant: OutputFeedbackVariant) -> Result<OutputFeedbackResult> {
    let m = plant.channels();
    let ones = vec![1.0; m];
    let tr = build_two_riccati(plant, 0.0, &ones, &ones)?;
    let theorem = match variant {
        OutputFeedbackVariant::V1 => "output feedback synthesis (v1)",
        OutputFeedbackVariant::V2 => "output feedback synthesis (v2)",
    };
    let mut checks = vec![
        ConditionCheck::new("Assumption 1", true, "control penalty positive definite"),
        ConditionCheck::new("Assumption 2", true, "measurement noise positive definite"),
    ];

    let (want_x_ppd, want_y_ppd) = match variant {
        OutputFeedbackVariant::V1 => (true, false),
        OutputFeedbackVariant::V2 => (false, true),
    };

    let x_sol = riccati::solve_stabilizing(&tr.x_prob);
    let y_sol = riccati::solve_stabilizing(&tr.y_prob);
    let (x, x_inertia) = match &x_sol {
        Ok(sol) => {
            let ok = if want_x_ppd {
                sol.inertia.is_pseudo_positive_definite()
            } else {
                sol.inertia.is_positive_definite()
            };
            checks.push(ConditionCheck::new(
                "i",
                ok,
                format!("stabilizing X has inertia {}", sol.inertia),
            ));
            (sol.p.clone(), sol.inertia)
        }
        Err(e) => {
            checks.push(ConditionCheck::new("i", false, format!("X equation: {e}")));
            (Array2::zeros((plant.states(), plant.states())), Inertia {
                positive: 0,
                negative: 0,
                zero: plant.states(),
            })
        }
    };
    let (y, y_inertia) = match &y_sol {
        Ok(sol) => {
            let ok = if want_y_ppd {
                sol.inertia.is_pseudo_positive_definite()
            } else {
                sol.inertia.is_positive_definite()
            };
            checks.push(ConditionCheck::new(
                "ii",
                ok,
                format!("stabilizing Y has inertia {}", sol.inertia),
            ));
            (sol.p.clone(), sol.inertia)
        }
        Err(e) => {
            checks.push(ConditionCheck::new("ii", false, format!("Y equation: {e}")));
            (Array2::zeros((plant.states(), plant.states())), Inertia {
                positive: 0,
                negative: 0,
                zero: plant.states(),
            })
        }
    };
    if let Some(err) = failures_to_error(theorem, &checks) {
        return Err(err);
    }

    let rho_xy = numlin::spectral_radius(&x.dot(&y).view())?;
    checks.push(ConditionCheck::new(
        "iii",
        rho_xy < 1.0,
        format!("spectral radius of XY is {rho_xy:.6e}"),
    ));
    if let Some(err) = failures_to_error(theorem, &checks) {
        return Err(err);
    }

    let controller = match variant {
        OutputFeedbackVariant::V1 => {
            // Cc = -E1^{-1}(B2'X + D12'C1)
            // Bc = (I - YX)^{-1}(Y C2' + B1 D21') E2^{-1}
            // Ac = A + B2 Cc - Bc C2 + (B1 - Bc D21) B1' X
            let cc = -tr.e1_inv.dot(&(&plant.b2.t().dot(&x) + &plant.d12.t().dot(&plant.c1)));
            let iyx = Array2::<f64>::eye(plant.states()) - y.dot(&x);
            let rhs = (&y.dot(&plant.c2.t()) + &plant.b1.dot(&plant.d21.t())).dot(&tr.e2_inv);
            let bc = numlin::solve_real(&iyx.view(), &rhs.view())?;
            let ac = &plant.a + &plant.b2.dot(&cc) - &bc.dot(&plant.c2)
                + &(&plant.b1 - &bc.dot(&plant.d21)).dot(&plant.b1.t()).dot(&x);
            Controller::Dynamic { ac, bc, cc }
        }
        OutputFeedbackVariant::V2 => {
            // Bc = -(Y C2' + B1 D21') E2^{-1}
            // Cc = E1^{-1}(B2'X + D12'C1)(I - YX)^{-1}
            // Ac = A + Bc C2 - B2 Cc + Y C1'(C1 - D12 Cc)
            let bc = -(&y.dot(&plant.c2.t()) + &plant.b1.dot(&plant.d21.t())).dot(&tr.e2_inv);
            let iyx = Array2::<f64>::eye(plant.states()) - y.dot(&x);
            let lhs = tr.e1_inv.dot(&(&plant.b2.t().dot(&x) + &plant.d12.t().dot(&plant.c1)));
            // Cc (I - YX) = lhs  =>  (I - YX)' Cc' = lhs'
            let cc_t = numlin::solve_real(&iyx.t(), &lhs.t())?;
            let cc = cc_t.t().to_owned();
            let ac = &plant.a + &bc.dot(&plant.c2) - &plant.b2.dot(&cc)
                + &y.dot(&plant.c1.t()).dot(&(&plant.c1 - &plant.d12.dot(&cc)));
            Controller::Dynamic { ac, bc, cc }
        }
    };

    let closed_loop = closed_loop_lti(plant, &controller)?;
    let certificate = sbrl::check_gain_condition(&closed_loop, &SweepGrid::default())?;
    checks.push(ConditionCheck::new(
        "closed-loop verification",
        certificate.holds,
        format!(
            "pseudo-Hurwitz {} and peak gain {:.6e}",
            certificate.pseudo_hurwitz, certificate.peak_gain
        ),
    ));
    if let Some(err) = failures_to_error(theorem, &checks) {
        return Err(err);
    }
    Ok(OutputFeedbackResult {
        controller,
        x,
        x_inertia,
        y,
        y_inertia,
        rho_xy,
        closed_loop,
        certificate,
        checks,
    })
}

/// Linear closed loop [xc; x] of a plant and a dynamic controller,
/// channels w -> z.
pub(crate) fn closed_loop_lti(plant: &Plant, controller: &Controller) -> Result<LtiSystem> {
    use ndarray::s;
    match controller {
        Controller::StaticGain { k } => {
            let a = &plant.a + &plant.b2.dot(k);
            let c = &plant.c1 + &plant.d12.dot(k);
            LtiSystem::new(a, plant.b1.clone(), c)
        }
        Controller::Dynamic { ac, bc, cc } => {
            let n = plant.states();
            let nc = ac.nrows();
            let total = nc + n;
            let mut a = Array2::<f64>::zeros((total, total));
            a.slice_mut(s![..nc, ..nc]).assign(ac);
            a.slice_mut(s![..nc, nc..]).assign(&bc.dot(&plant.c2));
            a.slice_mut(s![nc.., ..nc]).assign(&plant.b2.dot(cc));
            a.slice_mut(s![nc.., nc..]).assign(&plant.a);
            let mut b = Array2::<f64>::zeros((total, plant.channels()));
            b.slice_mut(s![..nc, ..]).assign(&bc.dot(&plant.d21));
            b.slice_mut(s![nc.., ..]).assign(&plant.b1);
            let mut c = Array2::<f64>::zeros((plant.channels(), total));
            c.slice_mut(s![.., ..nc]).assign(&plant.d12.dot(cc));
            c.slice_mut(s![.., nc..]).assign(&plant.c1);
            LtiSystem::new(a, b, c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn scalar_plant(a: f64, b1: f64, b2: f64, c1: f64, d12: f64) -> Plant {
        Plant::new(
            arr2(&[[a]]),
            arr2(&[[b1]]),
            arr2(&[[b2]]),
            arr2(&[[c1]]),
            arr2(&[[1.0]]),
            arr2(&[[d12]]),
            arr2(&[[1.0]]),
        )
        .unwrap()
    }

    #[test]
    fn state_feedback_scalar_matches_hand_root() {
        // Abar = 1, R = 3 - 1 = 2, Q = 0: P in {0, -1}; pseudo-positive
        // definite root is P = -1, K = -(1*(-1) + 0) = 1, loop A + B2 K = 2
        let plant = scalar_plant(1.0, 3.0_f64.sqrt(), 1.0, 0.0, 1.0);
        let result = state_feedback_pseudo_hinf(&plant).unwrap();
        let Controller::StaticGain { k } = &result.controller else {
            panic!("static gain expected")
        };
        assert!((k[[0, 0]] - 1.0).abs() < 1e-9);
        assert!((result.solution.p[[0, 0]] + 1.0).abs() < 1e-9);
        assert!(result.certificate.holds);
        // |G| = sqrt(3)/sqrt(4 + w^2) peaks at sqrt(3)/2
        assert!((result.certificate.peak_gain - 3.0_f64.sqrt() / 2.0).abs() < 1e-6);
    }

    #[test]
    fn state_feedback_closed_loop_passes_sweep() {
        let plant = scalar_plant(0.8, 1.2, 1.0, 0.1, 1.0);
        let result = state_feedback_pseudo_hinf(&plant).unwrap();
        let sweep = sbrl::check_gain_condition(&result.closed_loop, &SweepGrid::default()).unwrap();
        assert!(sweep.holds);
    }

    #[test]
    fn state_feedback_zero_disturbance_gives_zero_gain_peak() {
        // B1 = 0: candidates are P = 0 and P = -2A/R; with A = -1, R = -1
        // the anti-stabilizing branch delivers P = -2, the gain flips the
        // loop to A + B2 K = 1, and the transfer function is identically 0
        let plant = scalar_plant(-1.0, 0.0, 1.0, 0.0, 1.0);
        let result = state_feedback_pseudo_hinf(&plant).unwrap();
        assert_eq!(result.branch, crate::riccati::SolutionKind::AntiStabilizing);
        assert!((result.solution.p[[0, 0]] + 2.0).abs() < 1e-10);
        assert!(result.certificate.peak_gain < 1e-12);
        assert!(result.certificate.holds);
    }

    #[test]
    fn assumption_violations_are_named() {
        // D12 = 0 breaks the control penalty
        let plant = Plant::new(
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[0.0]]),
            arr2(&[[1.0]]),
        )
        .unwrap();
        match state_feedback_pseudo_hinf(&plant) {
            Err(Error::SynthesisConditions { failures, .. }) => {
                assert!(failures.iter().any(|f| f.condition == "Assumption 1"));
            }
            other => panic!("expected assumption failure, got {other:?}"),
        }

        // D21 = 0 breaks the measurement noise condition for output feedback
        let plant = Plant::new(
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[1.0]]),
            arr2(&[[0.0]]),
        )
        .unwrap();
        match output_feedback_pseudo_hinf_v1(&plant) {
            Err(Error::SynthesisConditions { failures, .. }) => {
                assert!(failures.iter().any(|f| f.condition == "Assumption 2"));
            }
            other => panic!("expected assumption failure, got {other:?}"),
        }
    }
}
