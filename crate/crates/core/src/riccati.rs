//! Game-type algebraic Riccati equations.
//!
//! Solves A'P + P A + P R P + Q = 0 for symmetric P, where R may be
//! sign-indefinite. Solutions come from the invariant subspaces of the
//! Hamiltonian [[A, R], [-Q, -A']]: the stable subspace gives the
//! stabilizing solution (A + R P Hurwitz), the unstable one the
//! anti-stabilizing solution. Newton iteration is deliberately not used:
//! with indefinite R its convergence theory is weak, while the subspace
//! route also classifies the solution for free.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::numlin::{self, Inertia};

/// Condition-number threshold on the leading subspace block beyond which the
/// branch is reported as having no solution.
pub const BASIS_COND_LIMIT: f64 = 1e12;

/// Data of A'P + P A + P R P + Q = 0.
#[derive(Debug, Clone)]
pub struct AreProblem {
    pub a: Array2<f64>,
    pub r: Array2<f64>,
    pub q: Array2<f64>,
}

/// Which invariant subspace of the Hamiltonian produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    Stabilizing,
    AntiStabilizing,
}

impl std::fmt::Display for SolutionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolutionKind::Stabilizing => write!(f, "stabilizing"),
            SolutionKind::AntiStabilizing => write!(f, "anti-stabilizing"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: Array2<f64>,
    /// A + R P.
    pub closure_matrix: Array2<f64>,
    pub kind: SolutionKind,
    pub inertia: Inertia,
    pub residual_norm: f64,
}

impl AreProblem {
    pub fn new(a: Array2<f64>, r: Array2<f64>, q: Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || r.dim() != (n, n) || q.dim() != (n, n) {
            return Err(Error::Dimension(format!(
                "ARE blocks must all be {n}x{n}: A {:?}, R {:?}, Q {:?}",
                a.dim(),
                r.dim(),
                q.dim()
            )));
        }
        check_sym(&r.view())?;
        check_sym(&q.view())?;
        Ok(AreProblem { a, r, q })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// 2n x 2n Hamiltonian [[A, R], [-Q, -A']].
    pub fn hamiltonian(&self) -> Array2<f64> {
        let n = self.dim();
        let mut h = Array2::<f64>::zeros((2 * n, 2 * n));
        h.slice_mut(s![..n, ..n]).assign(&self.a);
        h.slice_mut(s![..n, n..]).assign(&self.r);
        h.slice_mut(s![n.., ..n]).assign(&(-&self.q));
        h.slice_mut(s![n.., n..]).assign(&(-self.a.t().to_owned()));
        h
    }
}

fn check_sym(m: &ArrayView2<f64>) -> Result<()> {
    let n = m.nrows();
    let scale = numlin::fro_norm(m).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let asym = (m[[i, j]] - m[[j, i]]).abs();
            if asym > 1e-8 * scale {
                return Err(Error::NotSymmetric { asymmetry: asym, tol: 1e-8 * scale });
            }
        }
    }
    Ok(())
}

/// Frobenius norm of A'P + P A + P R P + Q.
pub fn residual(prob: &AreProblem, p: &ArrayView2<f64>) -> Result<f64> {
    Ok(numlin::fro_norm(&residual_matrix(prob, p)?.view()))
}

pub fn residual_matrix(prob: &AreProblem, p: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = prob.dim();
    if p.dim() != (n, n) {
        return Err(Error::Dimension(format!("P must be {n}x{n}, got {:?}", p.dim())));
    }
    let p = p.to_owned();
    Ok(prob.a.t().dot(&p) + p.dot(&prob.a) + p.dot(&prob.r).dot(&p) + &prob.q)
}

/// True iff A'P + P A + P R P + Q is negative definite with margin
/// `zero_tol` (strict inequality certified by eigenvalue sign counts).
pub fn check_riccati_inequality(
    prob: &AreProblem,
    p: &ArrayView2<f64>,
    zero_tol: f64,
) -> Result<bool> {
    let m = residual_matrix(prob, p)?;
    let sym = (&m + &m.t()) * 0.5;
    let inertia = numlin::inertia_symmetric(&sym.view(), zero_tol)?;
    Ok(inertia.negative == prob.dim())
}

pub fn solve_stabilizing(prob: &AreProblem) -> Result<RiccatiSolution> {
    solve_branch(prob, SolutionKind::Stabilizing)
}

pub fn solve_anti_stabilizing(prob: &AreProblem) -> Result<RiccatiSolution> {
    solve_branch(prob, SolutionKind::AntiStabilizing)
}

fn solve_branch(prob: &AreProblem, kind: SolutionKind) -> Result<RiccatiSolution> {
    let n = prob.dim();
    let h = prob.hamiltonian();
    let basis = match kind {
        SolutionKind::Stabilizing => numlin::stable_invariant_subspace(&h.view())?,
        SolutionKind::AntiStabilizing => numlin::unstable_invariant_subspace(&h.view())?,
    };
    if basis.ncols() != n {
        // Hamiltonian spectra are symmetric about the imaginary axis, so an
        // uneven split only happens on dichotomy failure; keep the guard for
        // ill-scaled inputs.
        return Err(Error::NoDichotomy {
            count: n.abs_diff(basis.ncols()),
            band: numlin::default_axis_tol(&h.view()),
        });
    }
    let x1 = basis.slice(s![..n, ..]).to_owned();
    let x2 = basis.slice(s![n.., ..]).to_owned();
    let cond = numlin::cond_2(&x1.view())?;
    if !cond.is_finite() || cond > BASIS_COND_LIMIT {
        return Err(Error::NoBranchSolution { cond });
    }
    // P = X2 X1^{-1}, via X1' P' = X2'
    let pt = numlin::solve_real(&x1.t(), &x2.t())?;
    let p = (&pt.t() + &pt) * 0.5;

    let closure = &prob.a + &prob.r.dot(&p);
    let spec = numlin::eigenvalues(&closure.view())?;
    let classified_ok = match kind {
        SolutionKind::Stabilizing => spec.is_hurwitz(),
        SolutionKind::AntiStabilizing => spec.is_anti_hurwitz(),
    };
    if !classified_ok {
        return Err(Error::NoBranchSolution { cond });
    }
    let inertia = numlin::inertia_symmetric(&p.view(), numlin::default_zero_tol(&p.view()))?;
    let residual_norm = residual(prob, &p.view())?;
    Ok(RiccatiSolution { p, closure_matrix: closure, kind, inertia, residual_norm })
}

/// Scale against which the residual norm should be judged.
pub fn residual_scale(prob: &AreProblem, p: &ArrayView2<f64>) -> f64 {
    let np = numlin::fro_norm(p);
    numlin::fro_norm(&prob.a.view()) * np.max(1.0)
        + numlin::fro_norm(&prob.r.view()) * np * np
        + numlin::fro_norm(&prob.q.view())
        + 1.0
}
