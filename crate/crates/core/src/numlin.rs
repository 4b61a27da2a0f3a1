//! Dense real/complex linear-algebra kernel.
//!
//! Thin layer over LAPACK (via `ndarray-linalg`) that adds the conventions
//! the rest of the crate relies on: conjugate-pair symmetrization of real
//! spectra, relative axis/zero tolerance bands, eigenvalue-count
//! classification (pseudo-Hurwitz, pseudo-positive definite), and invariant
//! subspace extraction for Hamiltonian matrices.

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Eig, Eigh, Inverse, Solve, QR, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative scale factor for the imaginary-axis band.
pub const AXIS_TOL_REL: f64 = 1e-8;
/// Relative scale factor for the symmetric zero-eigenvalue band.
pub const ZERO_TOL_REL: f64 = 1e-8;
/// Condition-number guard for linear solves whose failure must be reported
/// as "no solution" rather than garbage.
pub const COND_LIMIT: f64 = 1e12;

/// Eigenvalues of a square real matrix, classified against an axis band.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Conjugate-symmetrized eigenvalues (no particular order beyond the
    /// LAPACK pairing convention).
    pub eigenvalues: Vec<Complex64>,
    pub stable_count: usize,
    pub unstable_count: usize,
    pub imaginary_count: usize,
    /// Band half-width used for the classification.
    pub axis_tol: f64,
}

/// Sign counts of a symmetric matrix's spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn dimension(&self) -> usize {
        self.positive + self.negative + self.zero
    }

    /// Inertia (n-1, 1, 0): exactly one negative eigenvalue, none zero.
    pub fn is_pseudo_positive_definite(&self) -> bool {
        self.negative == 1 && self.zero == 0
    }

    pub fn is_positive_definite(&self) -> bool {
        self.negative == 0 && self.zero == 0
    }
}

impl std::fmt::Display for Inertia {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.positive, self.negative, self.zero)
    }
}

/// Finite and strictly positive.
pub fn is_pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

pub fn fro_norm(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Copy into guaranteed standard layout. `to_owned`/`mapv` on unit-size
/// axes can yield zero strides, which the LAPACK layer rejects.
pub(crate) fn dense<T: Clone + num_traits::Zero>(a: &ArrayView2<T>) -> Array2<T> {
    Array2::from_shape_fn(a.dim(), |(i, j)| a[[i, j]].clone())
}

pub(crate) fn dense_vec<T: Clone + num_traits::Zero>(a: &ndarray::ArrayView1<T>) -> Array1<T> {
    Array1::from_iter(a.iter().cloned())
}

/// Default axis band: relative to the matrix scale, with a floor so the zero
/// matrix still gets a nonempty band.
pub fn default_axis_tol(m: &ArrayView2<f64>) -> f64 {
    AXIS_TOL_REL * fro_norm(m).max(1.0)
}

pub fn default_zero_tol(s: &ArrayView2<f64>) -> f64 {
    ZERO_TOL_REL * fro_norm(s).max(1.0)
}

fn check_square_finite(m: &ArrayView2<f64>, what: &'static str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::Dimension(format!("{what} must be square, got {r}x{c}")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(r)
}

fn check_symmetric(s: &ArrayView2<f64>) -> Result<usize> {
    let n = check_square_finite(s, "symmetric matrix")?;
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((s[[i, j]] - s[[j, i]]).abs());
        }
    }
    let tol = 1e-8 * fro_norm(s).max(1.0);
    if asym > tol {
        return Err(Error::NotSymmetric { asymmetry: asym, tol });
    }
    Ok(n)
}

/// LAPACK returns conjugate pairs of a real matrix consecutively (positive
/// imaginary part first); average each pair to remove rounding drift.
fn symmetrize_conjugates(vals: &mut [Complex64]) {
    let scale = vals.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
    let pair_tol = 1e-7 * scale;
    let mut k = 0;
    while k < vals.len() {
        if vals[k].im.abs() <= f64::EPSILON * scale {
            vals[k].im = 0.0;
            k += 1;
            continue;
        }
        if k + 1 < vals.len() && (vals[k + 1] - vals[k].conj()).norm() <= pair_tol {
            let re = 0.5 * (vals[k].re + vals[k + 1].re);
            let im = 0.5 * (vals[k].im - vals[k + 1].im);
            vals[k] = Complex64::new(re, im);
            vals[k + 1] = Complex64::new(re, -im);
            k += 2;
        } else {
            k += 1;
        }
    }
}

/// Eigenvalues of a square real matrix with the default axis band.
pub fn eigenvalues(m: &ArrayView2<f64>) -> Result<Spectrum> {
    eigenvalues_with_tol(m, default_axis_tol(m))
}

pub fn eigenvalues_with_tol(m: &ArrayView2<f64>, axis_tol: f64) -> Result<Spectrum> {
    check_square_finite(m, "eigenvalue input")?;
    let (vals, _) = dense(m)
        .eig()
        .map_err(|e| Error::Backend(format!("dgeev: {e}")))?;
    let mut vals: Vec<Complex64> = vals.to_vec();
    symmetrize_conjugates(&mut vals);
    Ok(Spectrum::classify(vals, axis_tol))
}

impl Spectrum {
    pub fn classify(eigenvalues: Vec<Complex64>, axis_tol: f64) -> Self {
        let mut stable = 0;
        let mut unstable = 0;
        let mut imaginary = 0;
        for v in &eigenvalues {
            if v.re < -axis_tol {
                stable += 1;
            } else if v.re > axis_tol {
                unstable += 1;
            } else {
                imaginary += 1;
            }
        }
        Spectrum {
            eigenvalues,
            stable_count: stable,
            unstable_count: unstable,
            imaginary_count: imaginary,
            axis_tol,
        }
    }

    pub fn is_hurwitz(&self) -> bool {
        self.stable_count == self.eigenvalues.len()
    }

    pub fn is_anti_hurwitz(&self) -> bool {
        self.unstable_count == self.eigenvalues.len()
    }

    /// n-1 strictly stable eigenvalues and exactly one strictly unstable.
    pub fn is_pseudo_hurwitz(&self) -> bool {
        self.unstable_count == 1 && self.stable_count == self.eigenvalues.len() - 1
    }

    /// No eigenvalue inside the axis band.
    pub fn is_axis_free(&self) -> bool {
        self.imaginary_count == 0
    }
}

/// Eigenvalue sign counts of a symmetric real matrix.
pub fn inertia_symmetric(s: &ArrayView2<f64>, zero_tol: f64) -> Result<Inertia> {
    check_symmetric(s)?;
    let (w, _) = dense(s)
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Backend(format!("dsyev: {e}")))?;
    let mut inertia = Inertia { positive: 0, negative: 0, zero: 0 };
    for &x in w.iter() {
        if x > zero_tol {
            inertia.positive += 1;
        } else if x < -zero_tol {
            inertia.negative += 1;
        } else {
            inertia.zero += 1;
        }
    }
    Ok(inertia)
}

/// Exactly n-1 eigenvalues strictly left of the axis band and one strictly
/// right of it.
pub fn is_pseudo_hurwitz(m: &ArrayView2<f64>, axis_tol: f64) -> Result<bool> {
    Ok(eigenvalues_with_tol(m, axis_tol)?.is_pseudo_hurwitz())
}

/// Inertia (n-1, 1, 0).
pub fn is_pseudo_positive_definite(s: &ArrayView2<f64>, zero_tol: f64) -> Result<bool> {
    Ok(inertia_symmetric(s, zero_tol)?.is_pseudo_positive_definite())
}

/// Largest singular value of a complex matrix.
pub fn max_singular_value(m: &ArrayView2<Complex64>) -> Result<f64> {
    if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::NonFinite("singular value input"));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let (_, sv, _) = dense(m)
        .svd(false, false)
        .map_err(|e| Error::Backend(format!("zgesvd: {e}")))?;
    Ok(sv.iter().fold(0.0_f64, |a, &b| a.max(b)))
}

pub fn max_singular_value_real(m: &ArrayView2<f64>) -> Result<f64> {
    let mc = Array2::from_shape_fn(m.dim(), |(i, j)| Complex64::new(m[[i, j]], 0.0));
    max_singular_value(&mc.view())
}

/// Smallest singular value of a complex matrix.
pub fn min_singular_value(m: &ArrayView2<Complex64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let (_, sv, _) = dense(m)
        .svd(false, false)
        .map_err(|e| Error::Backend(format!("zgesvd: {e}")))?;
    Ok(sv.iter().fold(f64::INFINITY, |a, &b| a.min(b)))
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(m: &ArrayView2<f64>) -> Result<f64> {
    let spec = eigenvalues_with_tol(m, 0.0)?;
    Ok(spec.eigenvalues.iter().map(|v| v.norm()).fold(0.0, f64::max))
}

/// 2-norm condition number via singular values; +inf when singular.
pub fn cond_2(m: &ArrayView2<f64>) -> Result<f64> {
    let mc = Array2::from_shape_fn(m.dim(), |(i, j)| Complex64::new(m[[i, j]], 0.0));
    let (_, sv, _) = mc
        .svd(false, false)
        .map_err(|e| Error::Backend(format!("gesvd: {e}")))?;
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if smin == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(smax / smin)
    }
}

/// Inverse with an explicit condition-number guard.
pub fn inverse_guarded(m: &ArrayView2<f64>, cond_limit: f64) -> Result<Array2<f64>> {
    let cond = cond_2(m)?;
    if !cond.is_finite() || cond > cond_limit {
        return Err(Error::IllConditioned { cond, limit: cond_limit });
    }
    dense(m)
        .inv()
        .map_err(|e| Error::Backend(format!("getri: {e}")))
}

/// Solve A X = B for real square A.
pub fn solve_real(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = check_square_finite(a, "solve lhs")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "solve rhs has {} rows, lhs is {n}x{n}",
            b.nrows()
        )));
    }
    let a = dense(a);
    let mut cols = Vec::with_capacity(b.ncols());
    for j in 0..b.ncols() {
        let x = a
            .solve(&dense_vec(&b.column(j)))
            .map_err(|e| Error::Backend(format!("getrs: {e}")))?;
        cols.push(x);
    }
    stack_columns(n, &cols)
}

/// Solve A X = B for complex square A.
pub fn solve_complex(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension("complex solve dimensions".into()));
    }
    let a = dense(&a.view());
    let mut out = Array2::<Complex64>::zeros((n, b.ncols()));
    for j in 0..b.ncols() {
        let x = a
            .solve(&dense_vec(&b.column(j)))
            .map_err(|e| Error::Backend(format!("zgetrs: {e}")))?;
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

fn stack_columns(n: usize, cols: &[Array1<f64>]) -> Result<Array2<f64>> {
    let mut out = Array2::<f64>::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    Ok(out)
}

/// Orthonormal basis for the invariant subspace of all eigenvalues with
/// negative real part. Eigenvalues inside the default axis band make the
/// split ill-posed and are reported as a dichotomy failure.
pub fn stable_invariant_subspace(h: &ArrayView2<f64>) -> Result<Array2<f64>> {
    invariant_subspace(h, true)
}

/// Orthonormal basis for the eigenvalues with positive real part.
pub fn unstable_invariant_subspace(h: &ArrayView2<f64>) -> Result<Array2<f64>> {
    invariant_subspace(h, false)
}

fn invariant_subspace(h: &ArrayView2<f64>, stable: bool) -> Result<Array2<f64>> {
    let n = check_square_finite(h, "invariant subspace input")?;
    let axis_tol = default_axis_tol(h);
    let (vals, vecs) = dense(h)
        .eig()
        .map_err(|e| Error::Backend(format!("dgeev: {e}")))?;

    let on_axis = vals.iter().filter(|v| v.re.abs() <= axis_tol).count();
    if on_axis > 0 {
        return Err(Error::NoDichotomy { count: on_axis, band: axis_tol });
    }

    // One real column per real eigenvalue; (Re v, Im v) per conjugate pair,
    // taking the member with positive imaginary part.
    let scale = vals.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
    let imag_tol = 1e-12 * scale;
    let mut cols: Vec<Array1<f64>> = Vec::new();
    for (i, v) in vals.iter().enumerate() {
        let selected = if stable { v.re < 0.0 } else { v.re > 0.0 };
        if !selected {
            continue;
        }
        if v.im.abs() <= imag_tol {
            cols.push(Array1::from_iter(vecs.column(i).iter().map(|z| z.re)));
        } else if v.im > 0.0 {
            cols.push(Array1::from_iter(vecs.column(i).iter().map(|z| z.re)));
            cols.push(Array1::from_iter(vecs.column(i).iter().map(|z| z.im)));
        }
    }
    let k = cols.len();
    if k == 0 {
        return Ok(Array2::zeros((n, 0)));
    }
    let m = stack_columns(n, &cols)?;
    let (q, _) = m.qr().map_err(|e| Error::Backend(format!("geqrf: {e}")))?;
    let basis = q.slice(ndarray::s![.., ..k]).to_owned();

    // The stacked eigenvectors must actually span an invariant subspace;
    // near-defective pencils fail this residual check.
    let hv = h.dot(&basis);
    let small = basis.t().dot(&hv);
    let resid = &hv - &basis.dot(&small);
    let rel = fro_norm(&resid.view()) / fro_norm(h).max(1.0);
    if rel > 1e-6 {
        return Err(Error::DefectiveSubspace { residual: rel });
    }
    Ok(basis)
}
