//! Pseudo strict bounded real certificates.
//!
//! A system `x' = Ax + Bw, z = Cx` is pseudo strict bounded real when A has
//! exactly one unstable eigenvalue and the gain of G(s) = C(sI-A)^{-1}B
//! stays strictly below one along the imaginary axis. The state-space
//! certificate route goes through the game-type Riccati equation
//! A'P + PA + P BB' P + C'C = 0: a pseudo-positive definite solution whose
//! closure A + BB'P avoids the axis certifies the property. The
//! frequency-domain route samples the gain on a log grid with local
//! refinement; its verdicts are grid-certified, not proofs.
//!
//! The shifted, weighted variant used for Lagrange stability replaces
//! G(jw) by G(jw - lambda) and the unit bound by the sector-weighted bound
//! M_mu^{-1} M_tau M_mu^{-1}.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numlin::{self, is_pos, Inertia, Spectrum};
use crate::riccati::{self, AreProblem, SolutionKind};

/// Absolute floor used to certify the strict inequalities "< 1" and "< 0".
pub const MARGIN_FLOOR: f64 = 1e-9;

/// Points inserted around the running peak on each refinement pass.
const REFINE_POINTS: usize = 24;

/// Realization of G(s) = C (sI - A)^{-1} B.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
}

impl LtiSystem {
    pub fn new(a: Array2<f64>, b: Array2<f64>, c: Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("state matrix must be square".into()));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "input matrix has {} rows, state dimension is {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "output matrix has {} cols, state dimension is {n}",
                c.ncols()
            )));
        }
        for (m, what) in [(&a, "A"), (&b, "B"), (&c, "C")] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("non-finite entries in {what}")));
            }
        }
        Ok(LtiSystem { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Logarithmic frequency grid with local refinement around the peak.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub refine_passes: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { omega_min: 1e-4, omega_max: 1e4, points: 400, refine_passes: 3 }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if !is_pos(self.omega_min) || !(self.omega_max.is_finite() && self.omega_max > self.omega_min) {
            return Err(Error::Validation(format!(
                "sweep range [{}, {}] must satisfy 0 < min < max",
                self.omega_min, self.omega_max
            )));
        }
        if self.points < 2 {
            return Err(Error::Validation("sweep grid needs at least 2 points".into()));
        }
        Ok(())
    }

    /// Base grid: omega = 0 plus `points` log-spaced values.
    pub fn base_omegas(&self) -> Vec<f64> {
        let mut o = Vec::with_capacity(self.points + 1);
        o.push(0.0);
        let l0 = self.omega_min.log10();
        let l1 = self.omega_max.log10();
        for k in 0..self.points {
            let t = k as f64 / (self.points - 1) as f64;
            o.push(10f64.powf(l0 + t * (l1 - l0)));
        }
        o
    }
}

/// Verdict of the strict gain bound with pseudo-Hurwitz side condition.
#[derive(Debug, Clone)]
pub struct SbrVerdict {
    pub pseudo_hurwitz: bool,
    /// Largest sampled sigma_max(G(jw)).
    pub peak_gain: f64,
    pub peak_omega: f64,
    /// 1 - peak_gain.
    pub margin: f64,
    pub holds: bool,
    /// Frequencies where the resolvent was singular and the sample skipped.
    pub skipped: Vec<f64>,
}

/// Verdict of the shifted weighted sweep (grid-certified).
#[derive(Debug, Clone)]
pub struct LagrangeSweep {
    pub holds: bool,
    /// Largest eigenvalue of G(jw-l)^* M_tau G(jw-l) - M_mu^{-1} M_tau M_mu^{-1}
    /// over the grid; negative when the condition holds.
    pub worst_margin: f64,
    pub worst_omega: f64,
    /// Peak of the scaled form sigma_max(M_tau^{1/2} G(jw-l) M_mu M_tau^{-1/2}).
    pub weighted_peak: f64,
    pub weighted_peak_omega: f64,
    /// Margin of the omega -> infinity limit matrix (always negative for
    /// strictly positive weights; recorded for completeness).
    pub limit_margin: f64,
    pub skipped: Vec<f64>,
}

/// C ((jw - shift) I - A)^{-1} B.
pub fn frequency_response(
    sys: &LtiSystem,
    omega: f64,
    shift: f64,
) -> Result<Array2<Complex64>> {
    let n = sys.order();
    let s = Complex64::new(-shift, omega);
    let mut res = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            res[[i, j]] = -Complex64::new(sys.a[[i, j]], 0.0);
        }
        res[[i, i]] += s;
    }
    // singular resolvent check: smallest singular value relative to largest
    use ndarray_linalg::SVD;
    let (_, sv, _) = res
        .svd(false, false)
        .map_err(|e| Error::Backend(format!("zgesvd: {e}")))?;
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if smin <= 1e-12 * smax.max(1.0) {
        return Err(Error::PoleOnShiftedAxis { omega });
    }
    let b = Array2::from_shape_fn((n, sys.inputs()), |(i, j)| {
        Complex64::new(sys.b[[i, j]], 0.0)
    });
    let x = numlin::solve_complex(&res, &b)?;
    let c = Array2::from_shape_fn((sys.outputs(), n), |(i, j)| {
        Complex64::new(sys.c[[i, j]], 0.0)
    });
    Ok(c.dot(&x))
}

struct SweepOutcome {
    peak: f64,
    peak_omega: f64,
    skipped: Vec<f64>,
}

/// Sample at one frequency: value, skipped pole, or hard error.
type SampleResult = std::result::Result<(f64, f64), (f64, Option<Error>)>;

/// Maximize `eval` over the grid with refinement passes around the running
/// peak. Pole hits are skipped and recorded; other errors propagate.
fn sweep_max<F>(grid: &SweepGrid, eval: F) -> Result<SweepOutcome>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    grid.validate()?;
    let mut omegas = grid.base_omegas();
    let mut evaluated: Vec<(f64, f64)> = Vec::new();
    let mut skipped: Vec<f64> = Vec::new();

    for pass in 0..=grid.refine_passes {
        let batch: Vec<SampleResult> = omegas
            .par_iter()
            .map(|&w| match eval(w) {
                Ok(v) => Ok((w, v)),
                Err(Error::PoleOnShiftedAxis { .. }) => Err((w, None)),
                Err(e) => Err((w, Some(e))),
            })
            .collect();
        for item in batch {
            match item {
                Ok(pair) => evaluated.push(pair),
                Err((w, None)) => skipped.push(w),
                Err((_, Some(e))) => return Err(e),
            }
        }
        if pass == grid.refine_passes {
            break;
        }
        evaluated.sort_by(|a, b| a.0.total_cmp(&b.0));
        let Some(peak_idx) = argmax(&evaluated) else { break };
        let lo = if peak_idx == 0 { evaluated[0].0 } else { evaluated[peak_idx - 1].0 };
        let hi = if peak_idx + 1 == evaluated.len() {
            evaluated[peak_idx].0
        } else {
            evaluated[peak_idx + 1].0
        };
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
        omegas = interior_points(lo, hi, REFINE_POINTS);
    }

    evaluated.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(idx) = argmax(&evaluated) else {
        return Err(Error::Validation("sweep evaluated no grid points".into()));
    };
    skipped.sort_by(f64::total_cmp);
    skipped.dedup();
    Ok(SweepOutcome { peak: evaluated[idx].1, peak_omega: evaluated[idx].0, skipped })
}

fn argmax(values: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(_, v)) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b].1) {
            best = Some(i);
        }
    }
    best
}

fn interior_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if lo <= 0.0 {
        // linear near zero, log spacing is undefined there
        for k in 1..=count {
            out.push(lo + (hi - lo) * k as f64 / (count + 1) as f64);
        }
    } else {
        let (la, lb) = (lo.log10(), hi.log10());
        for k in 1..=count {
            let t = k as f64 / (count + 1) as f64;
            out.push(10f64.powf(la + t * (lb - la)));
        }
    }
    out
}

/// Strict gain bound sup_w sigma_max(G(jw)) < 1 together with the
/// pseudo-Hurwitz check on A.
pub fn check_gain_condition(sys: &LtiSystem, grid: &SweepGrid) -> Result<SbrVerdict> {
    let pseudo_hurwitz =
        numlin::is_pseudo_hurwitz(&sys.a.view(), numlin::default_axis_tol(&sys.a.view()))?;
    let out = sweep_max(grid, |w| {
        let g = frequency_response(sys, w, 0.0)?;
        numlin::max_singular_value(&g.view())
    })?;
    let margin = 1.0 - out.peak;
    Ok(SbrVerdict {
        pseudo_hurwitz,
        peak_gain: out.peak,
        peak_omega: out.peak_omega,
        margin,
        holds: pseudo_hurwitz && out.peak < 1.0 - MARGIN_FLOOR && out.skipped.is_empty(),
        skipped: out.skipped,
    })
}

/// State-space certificate outcome.
#[derive(Debug, Clone)]
pub enum Theorem1Outcome {
    Certified(SbrCertificate),
    /// Both Riccati branches solved but neither yields a qualifying solution.
    NotCertified { reason: String },
    /// The Hamiltonian has axis eigenvalues; the subspace route cannot decide.
    Inconclusive { reason: String },
}

#[derive(Debug, Clone)]
pub struct SbrCertificate {
    pub p: Array2<f64>,
    pub branch: SolutionKind,
    pub inertia: Inertia,
    pub closure_spectrum: Spectrum,
}

impl Theorem1Outcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, Theorem1Outcome::Certified(_))
    }
}

/// Search the stabilizing and anti-stabilizing branches of
/// A'P + PA + P BB' P + C'C = 0 for a pseudo-positive definite solution
/// whose closure avoids the axis band.
pub fn check_theorem1(sys: &LtiSystem) -> Result<Theorem1Outcome> {
    let r = sys.b.dot(&sys.b.t());
    let q = sys.c.t().dot(&sys.c);
    let prob = AreProblem::new(sys.a.clone(), r, q)?;

    let mut reasons = Vec::new();
    let mut dichotomy_failures = 0;
    for solver in [riccati::solve_stabilizing, riccati::solve_anti_stabilizing] {
        match solver(&prob) {
            Ok(sol) => {
                let spectrum = numlin::eigenvalues(&sol.closure_matrix.view())?;
                if sol.inertia.is_pseudo_positive_definite() && spectrum.is_axis_free() {
                    return Ok(Theorem1Outcome::Certified(SbrCertificate {
                        p: sol.p,
                        branch: sol.kind,
                        inertia: sol.inertia,
                        closure_spectrum: spectrum,
                    }));
                }
                reasons.push(format!("{} branch: inertia {}", sol.kind, sol.inertia));
            }
            Err(Error::NoDichotomy { count, band }) => {
                dichotomy_failures += 1;
                reasons.push(format!("{count} Hamiltonian eigenvalue(s) in band {band:.3e}"));
            }
            Err(Error::NoBranchSolution { cond }) => {
                reasons.push(format!("branch basis condition {cond:.3e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let reason = reasons.join("; ");
    if dichotomy_failures > 0 {
        Ok(Theorem1Outcome::Inconclusive { reason })
    } else {
        Ok(Theorem1Outcome::NotCertified { reason })
    }
}

/// Shifted weighted frequency condition: for every grid omega,
/// G(jw-l)^* M_tau G(jw-l) - M_mu^{-1} M_tau M_mu^{-1} must be negative
/// definite. `weighted_peak` reports the equivalent scaled-gain form.
pub fn check_lagrange_frequency(
    sys: &LtiSystem,
    lambda: f64,
    tau: &[f64],
    mu: &[f64],
    grid: &SweepGrid,
) -> Result<LagrangeSweep> {
    if !is_pos(lambda) {
        return Err(Error::Validation(format!("shift lambda = {lambda} must be positive")));
    }
    let m = sys.inputs();
    if sys.outputs() != m || tau.len() != m || mu.len() != m {
        return Err(Error::Dimension(format!(
            "square channel structure required: {} outputs, {} inputs, {} tau, {} mu",
            sys.outputs(),
            m,
            tau.len(),
            mu.len()
        )));
    }
    if !tau.iter().all(|&t| is_pos(t)) || !mu.iter().all(|&u| is_pos(u)) {
        return Err(Error::Validation("tau and mu entries must be positive".into()));
    }

    // right-hand side diag(tau_i / mu_i^2)
    let rhs: Vec<f64> = tau.iter().zip(mu).map(|(&t, &u)| t / (u * u)).collect();
    let limit_margin = -rhs.iter().fold(f64::INFINITY, |a, &b| a.min(b));

    let hermitian = sweep_max(grid, |w| {
        let g = frequency_response(sys, w, lambda)?;
        let mut gram = Array2::<Complex64>::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..m {
                    acc += g[[k, i]].conj() * tau[k] * g[[k, j]];
                }
                gram[[i, j]] = acc;
            }
            gram[[i, i]] -= rhs[i];
        }
        let (eigs, _) = gram
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Backend(format!("zheev: {e}")))?;
        Ok(eigs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
    })?;

    let weighted = sweep_max(grid, |w| {
        let g = frequency_response(sys, w, lambda)?;
        let mut scaled = Array2::<Complex64>::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                scaled[[i, j]] = g[[i, j]] * (tau[i].sqrt() * mu[j] / tau[j].sqrt());
            }
        }
        numlin::max_singular_value(&scaled.view())
    })?;

    let mut skipped = hermitian.skipped;
    skipped.extend(weighted.skipped);
    skipped.sort_by(f64::total_cmp);
    skipped.dedup();

    Ok(LagrangeSweep {
        holds: hermitian.peak < -MARGIN_FLOOR && skipped.is_empty(),
        worst_margin: hermitian.peak,
        worst_omega: hermitian.peak_omega,
        weighted_peak: weighted.peak,
        weighted_peak_omega: weighted.peak_omega,
        limit_margin,
        skipped,
    })
}

/// One row of the plot-ready sweep table (base grid only, no refinement).
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub omega: f64,
    /// sigma_max of the weighted shifted response at this frequency.
    pub peak_sv: f64,
    /// max eigenvalue of the Hermitian condition matrix at this frequency.
    pub margin: f64,
}

pub fn lagrange_sweep_table(
    sys: &LtiSystem,
    lambda: f64,
    tau: &[f64],
    mu: &[f64],
    grid: &SweepGrid,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let m = sys.inputs();
    if sys.outputs() != m || tau.len() != m || mu.len() != m {
        return Err(Error::Dimension("square channel structure required".into()));
    }
    let rhs: Vec<f64> = tau.iter().zip(mu).map(|(&t, &u)| t / (u * u)).collect();
    let mut rows = Vec::new();
    for w in grid.base_omegas() {
        let g = match frequency_response(sys, w, lambda) {
            Ok(g) => g,
            Err(Error::PoleOnShiftedAxis { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut scaled = Array2::<Complex64>::zeros((m, m));
        let mut gram = Array2::<Complex64>::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                scaled[[i, j]] = g[[i, j]] * (tau[i].sqrt() * mu[j] / tau[j].sqrt());
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..m {
                    acc += g[[k, i]].conj() * tau[k] * g[[k, j]];
                }
                gram[[i, j]] = acc;
            }
            gram[[i, i]] -= rhs[i];
        }
        let sv = numlin::max_singular_value(&scaled.view())?;
        let (eigs, _) = gram
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Backend(format!("zheev: {e}")))?;
        let margin = eigs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        rows.push(SweepRow { omega: w, peak_sv: sv, margin });
    }
    Ok(rows)
}
