//! Controller construction.
//!
//! State-feedback and output-feedback procedures that make the closed loop
//! pseudo strict bounded real, plus the Lagrange-stabilizing variants that
//! additionally preserve the pendulum lattice structure. Every synthesis
//! routine re-verifies its own closed loop (gain sweep or shifted weighted
//! sweep) and reports per-condition verdicts rather than a bare boolean:
//! the underlying results are sufficient conditions, so a caller tuning
//! (lambda, tau) needs to know which condition to push on.

mod hinf;
mod lagrange;
mod search;

pub use hinf::{
    output_feedback_pseudo_hinf_v1, output_feedback_pseudo_hinf_v2, state_feedback_pseudo_hinf,
    OutputFeedbackResult, StateFeedbackResult,
};
pub use lagrange::{
    lagrange_output_feedback_uncontrollable, lagrange_output_feedback_unobservable,
    lagrange_state_feedback, tau_scaling_normalize, LagrangeSynthesis,
};
pub use search::{rationality_search, RationalitySearchConfig, RationalitySearchResult};

use crate::riccati::AreProblem;

/// The two Riccati problems of the weighted output-feedback construction
/// at shift `lambda` and weights (tau, mu), in standard orientation: the
/// stabilizing solution of the first is X, of the second is Y.
pub fn weighted_riccati_pair(
    plant: &Plant,
    lambda: f64,
    tau: &[f64],
    mu: &[f64],
) -> crate::error::Result<(AreProblem, AreProblem)> {
    let tr = hinf::build_two_riccati(plant, lambda, tau, mu)?;
    Ok((tr.x_prob, tr.y_prob))
}

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::numlin::is_pos;
use crate::exact::RatMat;
use crate::pendulum::NonlinearityBank;

/// State-space data of the controlled plant:
///
/// ```text
/// x' = A x + B2 u + B1 w
/// z  = C1 x + D12 u
/// y  = C2 x + D21 w
/// ```
///
/// w and z are the nonlinearity input/output channels (m of each), u the
/// control (q), y the measurement (p).
#[derive(Debug, Clone)]
pub struct Plant {
    pub a: Array2<f64>,
    pub b1: Array2<f64>,
    pub b2: Array2<f64>,
    pub c1: Array2<f64>,
    pub c2: Array2<f64>,
    pub d12: Array2<f64>,
    pub d21: Array2<f64>,
    /// Exact-rational copy of the data when the source carried exact entries.
    pub exact: Option<ExactPlant>,
}

#[derive(Debug, Clone)]
pub struct ExactPlant {
    pub a: RatMat,
    pub b1: RatMat,
    pub b2: RatMat,
    pub c1: RatMat,
    pub c2: RatMat,
    pub d12: RatMat,
    pub d21: RatMat,
}

impl Plant {
    pub fn new(
        a: Array2<f64>,
        b1: Array2<f64>,
        b2: Array2<f64>,
        c1: Array2<f64>,
        c2: Array2<f64>,
        d12: Array2<f64>,
        d21: Array2<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("A must be square".into()));
        }
        let m = b1.ncols();
        let q = b2.ncols();
        let p = c2.nrows();
        let checks = [
            (b1.nrows() == n, format!("B1 must have {n} rows")),
            (b2.nrows() == n, format!("B2 must have {n} rows")),
            (c1.ncols() == n, format!("C1 must have {n} cols")),
            (c1.nrows() == m, format!("C1 must have {m} rows (one per nonlinearity)")),
            (c2.ncols() == n, format!("C2 must have {n} cols")),
            (d12.dim() == (m, q), format!("D12 must be {m}x{q}")),
            (d21.dim() == (p, m), format!("D21 must be {p}x{m}")),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Dimension(msg));
            }
        }
        for (mat, what) in [
            (&a, "A"),
            (&b1, "B1"),
            (&b2, "B2"),
            (&c1, "C1"),
            (&c2, "C2"),
            (&d12, "D12"),
            (&d21, "D21"),
        ] {
            if mat.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("non-finite entries in {what}")));
            }
        }
        Ok(Plant { a, b1, b2, c1, c2, d12, d21, exact: None })
    }

    pub fn with_exact(mut self, exact: ExactPlant) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn channels(&self) -> usize {
        self.b1.ncols()
    }

    pub fn controls(&self) -> usize {
        self.b2.ncols()
    }

    pub fn measurements(&self) -> usize {
        self.c2.nrows()
    }

    /// Transpose-dual plant (the role swap used to map the two
    /// output-feedback procedures onto each other).
    pub fn transpose_dual(&self) -> Plant {
        Plant {
            a: self.a.t().to_owned(),
            b1: self.c1.t().to_owned(),
            b2: self.c2.t().to_owned(),
            c1: self.b1.t().to_owned(),
            c2: self.b2.t().to_owned(),
            d12: self.d21.t().to_owned(),
            d21: self.d12.t().to_owned(),
            exact: self.exact.as_ref().map(|e| ExactPlant {
                a: e.a.transpose(),
                b1: e.c1.transpose(),
                b2: e.c2.transpose(),
                c1: e.b1.transpose(),
                c2: e.b2.transpose(),
                d12: e.d21.transpose(),
                d21: e.d12.transpose(),
            }),
        }
    }
}

/// Shift and weights entering the weighted Riccati equations.
#[derive(Debug, Clone)]
pub struct SynthesisParams {
    pub lambda: f64,
    pub tau: Vec<f64>,
    pub tau0: f64,
    pub mu: Vec<f64>,
}

impl SynthesisParams {
    pub fn new(lambda: f64, tau: Vec<f64>, tau0: f64, mu: Vec<f64>) -> Result<Self> {
        if !is_pos(lambda) {
            return Err(Error::Validation(format!("lambda = {lambda} must be positive")));
        }
        if !is_pos(tau0) {
            return Err(Error::Validation(format!("tau0 = {tau0} must be positive")));
        }
        if tau.is_empty() || tau.len() != mu.len() {
            return Err(Error::Dimension(format!(
                "tau ({}) and mu ({}) must have equal positive length",
                tau.len(),
                mu.len()
            )));
        }
        if !tau.iter().all(|&t| is_pos(t)) || !mu.iter().all(|&u| is_pos(u)) {
            return Err(Error::Validation("tau and mu entries must be positive".into()));
        }
        Ok(SynthesisParams { lambda, tau, tau0, mu })
    }

    pub fn channels(&self) -> usize {
        self.tau.len()
    }

    /// Rescale tau to a unit vector (conditions are invariant under this).
    pub fn normalized_tau(&self) -> (Vec<f64>, f64) {
        let norm = self.tau.iter().map(|t| t * t).sum::<f64>().sqrt();
        (self.tau.iter().map(|t| t / norm).collect(), norm)
    }
}

/// Synthesized feedback law.
#[derive(Debug, Clone)]
pub enum Controller {
    /// u = K x.
    StaticGain { k: Array2<f64> },
    /// xc' = Ac xc + Bc y, u = Cc xc.
    Dynamic { ac: Array2<f64>, bc: Array2<f64>, cc: Array2<f64> },
}

impl Controller {
    pub fn order(&self) -> usize {
        match self {
            Controller::StaticGain { .. } => 0,
            Controller::Dynamic { ac, .. } => ac.nrows(),
        }
    }
}

/// Closed loop of plant and controller as a driven nonlinear system
/// x' = Acl x + Bcl phi(Ccl x).
///
/// For dynamic controllers the state is stacked as [xc; x].
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
    pub bank: NonlinearityBank,
}

impl ClosedLoop {
    pub fn assemble(plant: &Plant, controller: &Controller, bank: NonlinearityBank) -> Result<Self> {
        if bank.len() != plant.channels() {
            return Err(Error::Dimension(format!(
                "nonlinearity bank has {} entries, plant has {} channels",
                bank.len(),
                plant.channels()
            )));
        }
        match controller {
            Controller::StaticGain { k } => {
                if k.dim() != (plant.controls(), plant.states()) {
                    return Err(Error::Dimension(format!(
                        "gain must be {}x{}, got {:?}",
                        plant.controls(),
                        plant.states(),
                        k.dim()
                    )));
                }
                let a = &plant.a + &plant.b2.dot(k);
                let c = &plant.c1 + &plant.d12.dot(k);
                Ok(ClosedLoop { a, b: plant.b1.clone(), c, bank })
            }
            Controller::Dynamic { ac, bc, cc } => {
                let n = plant.states();
                let nc = ac.nrows();
                if ac.ncols() != nc
                    || bc.dim() != (nc, plant.measurements())
                    || cc.dim() != (plant.controls(), nc)
                {
                    return Err(Error::Dimension(format!(
                        "controller blocks inconsistent: Ac {:?}, Bc {:?}, Cc {:?}",
                        ac.dim(),
                        bc.dim(),
                        cc.dim()
                    )));
                }
                // [xc; x] stacking:
                //   xc' = Ac xc + Bc C2 x + Bc D21 w
                //   x'  = B2 Cc xc + A x + B1 w
                //   z   = D12 Cc xc + C1 x
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

                Ok(ClosedLoop { a, b, c, bank })
            }
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn as_lti(&self) -> Result<crate::sbrl::LtiSystem> {
        crate::sbrl::LtiSystem::new(self.a.clone(), self.b.clone(), self.c.clone())
    }

    /// Right-hand side of the driven dynamics at state x.
    pub fn dynamics(&self, x: &Array1<f64>, out: &mut Array1<f64>) {
        let z = self.c.dot(x);
        let w = self.bank.eval_all(&z);
        out.assign(&self.a.dot(x));
        *out += &self.b.dot(&w);
    }
}

/// Record of one named condition check inside a synthesis procedure.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl ConditionCheck {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        ConditionCheck { name: name.into(), passed, detail: detail.into() }
    }
}

pub(crate) fn failures_to_error(
    theorem: &'static str,
    checks: &[ConditionCheck],
) -> Option<Error> {
    let failures: Vec<_> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| crate::error::ConditionFailure {
            condition: c.name.clone(),
            detail: c.detail.clone(),
        })
        .collect();
    if failures.is_empty() {
        None
    } else {
        Some(Error::SynthesisConditions { theorem, failures })
    }
}
