//! Pendulum-likeness machinery.
//!
//! A closed loop with periodic channel nonlinearities is pendulum-like when
//! shifting the state by a fixed lattice vector maps trajectories onto
//! trajectories. The ingredients assembled here: the bank of periodic
//! sector-bounded functions, the single zero-mode kernel direction, Kalman
//! decompositions that isolate the unobservable/uncontrollable zero mode,
//! rational approximation of the phase-advance vector, and the common
//! denominator that scales the kernel into an actual lattice generator.

use ndarray::{Array1, Array2, ArrayView2};
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::{Rat, RatMat};
use crate::numlin::{self, is_pos};
use crate::synthesis::Plant;

/// Relative tolerance for kernel residuals.
pub const NULL_TOL: f64 = 1e-9;
/// Separation factor between the smallest and second-smallest singular
/// values required to call the zero mode "single".
pub const NULL_GAP_FACTOR: f64 = 1e3;
/// Defaults for rational approximation of phase-advance vectors.
pub const RAT_MAX_DEN: i64 = 1_000_000;
pub const RAT_TOL: f64 = 1e-9;

/// Closed family of channel nonlinearities. Families are constructed from
/// (amplitude, period) so periodicity and the attainable sector bound are
/// checkable rather than trusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearityKind {
    /// z -> amplitude * sin(2 pi z / period).
    ScaledSine { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityEntry {
    pub kind: NonlinearityKind,
    pub period: f64,
    /// Declared sector bound: |phi(z)/z| <= mu for all z != 0.
    pub mu: f64,
}

impl NonlinearityEntry {
    pub fn scaled_sine(amplitude: f64, period: f64, mu: f64) -> Result<Self> {
        if !is_pos(period) || !is_pos(mu) || !amplitude.is_finite() {
            return Err(Error::Validation(format!(
                "scaled sine needs period > 0 and mu > 0, got period {period}, mu {mu}"
            )));
        }
        Ok(NonlinearityEntry { kind: NonlinearityKind::ScaledSine { amplitude }, period, mu })
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self.kind {
            NonlinearityKind::ScaledSine { amplitude } => {
                amplitude * (2.0 * std::f64::consts::PI * z / self.period).sin()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NonlinearityBank {
    pub entries: Vec<NonlinearityEntry>,
}

impl NonlinearityBank {
    pub fn new(entries: Vec<NonlinearityEntry>) -> Self {
        NonlinearityBank { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn periods(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.period).collect()
    }

    pub fn sector_bounds(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mu).collect()
    }

    pub fn eval_all(&self, z: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter(self.entries.iter().zip(z.iter()).map(|(e, &zi)| e.eval(zi)))
    }
}

/// Result of sampling one nonlinearity against its declared sector bound.
#[derive(Debug, Clone)]
pub struct SectorVerdict {
    pub pass: bool,
    /// Largest sampled |phi(z)/z|.
    pub worst_ratio: f64,
    pub worst_z: f64,
    /// Sample points where the declared bound was exceeded.
    pub violations: Vec<f64>,
    /// Largest sampled |phi(z + period) - phi(z)|.
    pub periodicity_defect: f64,
}

/// Sample each entry over one period plus pseudo-random points and compare
/// against the declared sector bound.
pub fn verify_sector(bank: &NonlinearityBank, samples: usize) -> Result<Vec<SectorVerdict>> {
    if samples < 100 {
        return Err(Error::Validation(format!(
            "sector verification needs at least 100 samples per period, got {samples}"
        )));
    }
    let mut out = Vec::with_capacity(bank.len());
    for entry in &bank.entries {
        let mut worst_ratio: f64 = 0.0;
        let mut worst_z = 0.0;
        let mut violations = Vec::new();
        let mut periodicity_defect: f64 = 0.0;
        let mut state: u64 = 0x9e3779b97f4a7c15;
        let check = |z: f64| -> Option<(f64, f64)> {
            if z == 0.0 {
                return None;
            }
            Some((z, (entry.eval(z) / z).abs()))
        };
        let mut record = |z: f64, ratio: f64| {
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_z = z;
            }
            if ratio > entry.mu * (1.0 + 1e-12) + 1e-12 {
                violations.push(z);
            }
        };
        for k in 0..samples {
            let z = entry.period * (k as f64 + 0.5) / samples as f64 - entry.period / 2.0;
            if let Some((z, r)) = check(z) {
                record(z, r);
            }
            periodicity_defect =
                periodicity_defect.max((entry.eval(z + entry.period) - entry.eval(z)).abs());
        }
        for _ in 0..samples {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            // spread random probes over several periods and near the origin
            let z = (u - 0.5) * 8.0 * entry.period;
            if let Some((z, r)) = check(z) {
                record(z, r);
            }
            let z_small = (u - 0.5) * 1e-3 * entry.period;
            if let Some((z, r)) = check(z_small) {
                record(z, r);
            }
        }
        violations.truncate(16);
        out.push(SectorVerdict {
            pass: violations.is_empty(),
            worst_ratio,
            worst_z,
            violations,
            periodicity_defect,
        });
    }
    Ok(out)
}

/// Unit-norm kernel direction of a matrix with a one-dimensional nullspace.
pub fn kernel_direction(a: &ArrayView2<f64>) -> Result<Array1<f64>> {
    use ndarray_linalg::SVD;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("kernel direction needs a square matrix".into()));
    }
    let ac = Array2::from_shape_fn((n, n), |(i, j)| num_complex::Complex64::new(a[[i, j]], 0.0));
    let (_, sv, vt) = ac
        .svd(false, true)
        .map_err(|e| Error::Backend(format!("gesvd: {e}")))?;
    let vt = vt.expect("requested right singular vectors");
    let smax = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let tol = NULL_TOL * smax.max(1.0);
    let smallest = sv[n - 1];
    if smallest > tol {
        return Err(Error::NotSingleZeroMode { nullity: 0 });
    }
    if n >= 2 && sv[n - 2] <= tol * NULL_GAP_FACTOR {
        let nullity = sv.iter().filter(|&&s| s <= tol * NULL_GAP_FACTOR).count();
        return Err(Error::NotSingleZeroMode { nullity });
    }
    let mut d = Array1::from_iter(vt.row(n - 1).iter().map(|z| z.re));
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.mapv_inplace(|x| x / norm);
    // deterministic sign: first component of nonnegligible size positive
    if let Some(&lead) = d.iter().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            d.mapv_inplace(|x| -x);
        }
    }
    Ok(d)
}

/// Best rational approximations with bounded denominator via continued
/// fractions. Fails when an element cannot be matched within `tol` or
/// rounds to zero.
pub fn rationalize(xs: &[f64], max_den: i64, tol: f64) -> Result<Vec<Rational64>> {
    if max_den < 1 {
        return Err(Error::Validation(format!("max_den = {max_den} must be >= 1")));
    }
    let mut out = Vec::with_capacity(xs.len());
    for (index, &x) in xs.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite("rationalize input"));
        }
        let best = best_rational(x, max_den)
            .ok_or(Error::NotRational { index, value: x, tol })?;
        let err = (x - ratio_to_f64(best)).abs();
        if err > tol {
            return Err(Error::NotRational { index, value: x, tol });
        }
        if best.numer().is_zero() {
            return Err(Error::ZeroRational { index });
        }
        out.push(best);
    }
    Ok(out)
}

fn ratio_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Nearest fraction with denominator at most max_den, with no accuracy
/// requirement (used to pick search targets).
pub fn round_to_rational(x: f64, max_den: i64) -> Rational64 {
    best_rational(x, max_den).unwrap_or_else(|| Rational64::from_integer(0))
}

/// Closest fraction to x among all with denominator <= max_den, by the
/// classic convergent/semiconvergent argument.
fn best_rational(x: f64, max_den: i64) -> Option<Rational64> {
    if !x.is_finite() {
        return None;
    }
    let negative = x < 0.0;
    let mut v = x.abs();
    // convergent recurrence h_i = a_i h_{i-1} + h_{i-2}
    let (mut h_prev, mut k_prev): (i128, i128) = (0, 1);
    let (mut h_cur, mut k_cur): (i128, i128) = (1, 0);
    let limit = max_den as i128;
    for _ in 0..64 {
        let a = v.floor();
        if a > i64::MAX as f64 {
            return None;
        }
        let ai = a as i128;
        let h_new = ai.checked_mul(h_cur)?.checked_add(h_prev)?;
        let k_new = ai.checked_mul(k_cur)?.checked_add(k_prev)?;
        if k_new > limit {
            // k_cur >= 1 here: the first convergent has denominator 1 <= limit
            let conv = make_ratio(h_cur, k_cur, negative)?;
            let t = (limit - k_prev) / k_cur;
            let ks = t.checked_mul(k_cur)?.checked_add(k_prev)?;
            if t >= 1 && ks >= 1 {
                // largest semiconvergent still within the bound
                let hs = t.checked_mul(h_cur)?.checked_add(h_prev)?;
                let semi = make_ratio(hs, ks, negative)?;
                let err_conv = (x - ratio_to_f64(conv)).abs();
                let err_semi = (x - ratio_to_f64(semi)).abs();
                return Some(if err_semi < err_conv { semi } else { conv });
            }
            return Some(conv);
        }
        h_prev = h_cur;
        k_prev = k_cur;
        h_cur = h_new;
        k_cur = k_new;
        let frac = v - a;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    make_ratio(h_cur, k_cur, negative)
}

fn make_ratio(h: i128, k: i128, negative: bool) -> Option<Rational64> {
    if k == 0 {
        return None;
    }
    let h: i64 = h.try_into().ok()?;
    let k: i64 = k.try_into().ok()?;
    let r = Rational64::new(h, k);
    Some(if negative { -r } else { r })
}

/// Least common multiple of the denominators, exact.
pub fn lcmd(nu: &[Rational64]) -> Result<i64> {
    let mut acc: i64 = 1;
    for r in nu {
        if r.numer().is_zero() {
            return Err(Error::ZeroRational { index: 0 });
        }
        let d = *r.denom();
        let g = acc.gcd(&d);
        acc = (acc / g).checked_mul(d).ok_or(Error::LcmOverflow)?;
    }
    Ok(acc.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionFlavor {
    Unobservable,
    Uncontrollable,
}

/// Coordinate change isolating the zero modes last (unobservable flavor)
/// or in the trailing rows (uncontrollable flavor), together with the
/// transformed plant blocks.
#[derive(Debug, Clone)]
pub struct KalmanDecomposition {
    pub flavor: DecompositionFlavor,
    pub t: Array2<f64>,
    pub t_inv: Array2<f64>,
    /// Exact transformation when the plant carried exact entries.
    pub exact_t: Option<RatMat>,
    pub exact_t_inv: Option<RatMat>,
    /// (retained dimension n - l, zero-mode dimension l).
    pub dims: (usize, usize),
    pub a_t: Array2<f64>,
    pub b1_t: Array2<f64>,
    pub b2_t: Array2<f64>,
    pub c1_t: Array2<f64>,
    pub c2_t: Array2<f64>,
    pub cond_t: f64,
}

impl KalmanDecomposition {
    pub fn n(&self) -> usize {
        self.dims.0 + self.dims.1
    }

    /// Last column of T (the isolated zero-mode direction), exact when
    /// available.
    pub fn zero_mode_direction(&self) -> Array1<f64> {
        let n = self.n();
        Array1::from_iter((0..n).map(|i| self.t[[i, n - 1]]))
    }

    pub fn exact_zero_mode_direction(&self) -> Option<Vec<Rat>> {
        self.exact_t.as_ref().map(|t| t.column(t.ncols() - 1))
    }
}

/// Observability-style staircase for (A, C2): T with the unobservable zero
/// modes as the last l columns, so that
/// T^{-1} A T = [[A1, 0], [A2, 0]] and C2 T = [C2a, 0].
///
/// The block form requires the unobservable subspace to consist of zero
/// modes of A (each unobservable direction x must satisfy A x = 0); this is
/// exactly the situation the synthesis procedures assume, and it is
/// reported as a failed assumption otherwise.
pub fn decompose_unobservable(plant: &Plant) -> Result<KalmanDecomposition> {
    decompose(plant, DecompositionFlavor::Unobservable)
}

/// Dual staircase for (A, B2): T with bottom rows of T^{-1} A T and
/// T^{-1} B2 zero.
pub fn decompose_uncontrollable(plant: &Plant) -> Result<KalmanDecomposition> {
    decompose(plant, DecompositionFlavor::Uncontrollable)
}

fn decompose(plant: &Plant, flavor: DecompositionFlavor) -> Result<KalmanDecomposition> {
    // Work on (A, C) where C = C2 for the unobservable flavor and the dual
    // pair (A', B2') for the uncontrollable one; the dual transformation
    // then is T_bar = T_dual^{-T}.
    let n = plant.states();
    let (a, c) = match flavor {
        DecompositionFlavor::Unobservable => (plant.a.clone(), plant.c2.clone()),
        DecompositionFlavor::Uncontrollable => {
            (plant.a.t().to_owned(), plant.b2.t().to_owned())
        }
    };

    let exact_pair = plant.exact.as_ref().map(|e| match flavor {
        DecompositionFlavor::Unobservable => (e.a.clone(), e.c2.clone()),
        DecompositionFlavor::Uncontrollable => (e.a.transpose(), e.b2.transpose()),
    });

    let (t, t_inv, exact_t, exact_t_inv, l) = if let Some((ea, ec)) = exact_pair {
        let (t, t_inv, l) = exact_staircase(&ea, &ec, flavor)?;
        (t.to_f64(), t_inv.to_f64(), Some(t), Some(t_inv), l)
    } else {
        let (t, t_inv, l) = float_staircase(&a, &c, flavor)?;
        (t, t_inv, None, None, l)
    };

    // Map back to the original coordinates for the dual flavor.
    let (t, t_inv, exact_t, exact_t_inv) = match flavor {
        DecompositionFlavor::Unobservable => (t, t_inv, exact_t, exact_t_inv),
        DecompositionFlavor::Uncontrollable => (
            t_inv.t().to_owned(),
            t.t().to_owned(),
            exact_t_inv.map(|m| m.transpose()),
            exact_t.map(|m| m.transpose()),
        ),
    };

    // with exact data the transformed blocks are computed exactly, so the
    // structural zeros are literal zeros after conversion
    let (a_t, b1_t, b2_t, c1_t, c2_t) = match (&exact_t, &exact_t_inv, &plant.exact) {
        (Some(et), Some(eti), Some(ex)) => (
            eti.mul(&ex.a)?.mul(et)?.to_f64(),
            eti.mul(&ex.b1)?.to_f64(),
            eti.mul(&ex.b2)?.to_f64(),
            ex.c1.mul(et)?.to_f64(),
            ex.c2.mul(et)?.to_f64(),
        ),
        _ => (
            t_inv.dot(&plant.a).dot(&t),
            t_inv.dot(&plant.b1),
            t_inv.dot(&plant.b2),
            plant.c1.dot(&t),
            plant.c2.dot(&t),
        ),
    };
    let cond_t = numlin::cond_2(&t.view())?;

    let dec = KalmanDecomposition {
        flavor,
        t,
        t_inv,
        exact_t,
        exact_t_inv,
        dims: (n - l, l),
        a_t,
        b1_t,
        b2_t,
        c1_t,
        c2_t,
        cond_t,
    };
    verify_block_structure(&dec, plant)?;
    Ok(dec)
}

fn structural_residual(dec: &KalmanDecomposition) -> f64 {
    let (keep, l) = dec.dims;
    let n = keep + l;
    let mut worst: f64 = 0.0;
    match dec.flavor {
        DecompositionFlavor::Unobservable => {
            for i in 0..n {
                for j in keep..n {
                    worst = worst.max(dec.a_t[[i, j]].abs());
                }
            }
            for i in 0..dec.c2_t.nrows() {
                for j in keep..n {
                    worst = worst.max(dec.c2_t[[i, j]].abs());
                }
            }
        }
        DecompositionFlavor::Uncontrollable => {
            for i in keep..n {
                for j in 0..n {
                    worst = worst.max(dec.a_t[[i, j]].abs());
                }
                for j in 0..dec.b2_t.ncols() {
                    worst = worst.max(dec.b2_t[[i, j]].abs());
                }
            }
        }
    }
    worst
}

fn verify_block_structure(dec: &KalmanDecomposition, plant: &Plant) -> Result<()> {
    let scale = numlin::fro_norm(&plant.a.view()).max(1.0) * dec.cond_t.max(1.0);
    let worst = structural_residual(dec);
    if worst > 1e-9 * scale {
        return Err(Error::Decomposition {
            flavor: flavor_name(dec.flavor),
            detail: format!("structural blocks fail to vanish (residual {worst:.3e})"),
        });
    }
    Ok(())
}

fn flavor_name(f: DecompositionFlavor) -> &'static str {
    match f {
        DecompositionFlavor::Unobservable => "unobservable",
        DecompositionFlavor::Uncontrollable => "uncontrollable",
    }
}

/// SVD-based path: orthogonal T from the right singular vectors of the
/// observability matrix.
fn float_staircase(
    a: &Array2<f64>,
    c: &Array2<f64>,
    flavor: DecompositionFlavor,
) -> Result<(Array2<f64>, Array2<f64>, usize)> {
    use ndarray_linalg::SVD;
    let n = a.nrows();
    let obs = observability_matrix(a, c);
    let obs_c = Array2::from_shape_fn(obs.dim(), |(i, j)| {
        num_complex::Complex64::new(obs[[i, j]], 0.0)
    });
    let (_, sv, vt) = obs_c
        .svd(false, true)
        .map_err(|e| Error::Backend(format!("gesvd: {e}")))?;
    let vt = vt.expect("requested right singular vectors");
    let smax = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let tol = 1e-10 * smax.max(1.0);
    let l = sv.iter().filter(|&&s| s <= tol).count();
    if l == 0 {
        return Err(Error::Decomposition {
            flavor: flavor_name(flavor),
            detail: match flavor {
                DecompositionFlavor::Unobservable => {
                    "plant is observable; no unobservable mode to isolate".into()
                }
                DecompositionFlavor::Uncontrollable => {
                    "plant is controllable; no uncontrollable mode to isolate".into()
                }
            },
        });
    }
    // rows of vt are right singular vectors; null vectors are the last l
    let mut t = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let row = vt.row(j);
        let mut col = Array1::from_iter(row.iter().map(|z| z.re));
        if let Some(&lead) = col.iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                col.mapv_inplace(|x| -x);
            }
        }
        t.column_mut(j).assign(&col);
    }
    let t_inv = t.t().to_owned();

    // form attainable only when the isolated modes are zero modes of A
    for j in (n - l)..n {
        let col = t.column(j).to_owned();
        let residual = a.dot(&col).iter().map(|x| x * x).sum::<f64>().sqrt();
        if residual > 1e-9 * numlin::fro_norm(&a.view()).max(1.0) {
            return Err(Error::Decomposition {
                flavor: flavor_name(flavor),
                detail: format!(
                    "isolated subspace is not a zero mode of the state matrix \
                     (|A v| = {residual:.3e}); the required assumption fails"
                ),
            });
        }
    }
    Ok((t, t_inv, l))
}

fn observability_matrix(a: &Array2<f64>, c: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let p = c.nrows();
    let mut rows = Array2::<f64>::zeros((p * n, n));
    let mut block = c.clone();
    for k in 0..n {
        rows.slice_mut(ndarray::s![k * p..(k + 1) * p, ..]).assign(&block);
        block = block.dot(a);
    }
    rows
}

/// Exact path: rational nullspace of the exact observability matrix, with
/// standard basis vectors completing T. Keeps every entry of T rational.
fn exact_staircase(
    a: &RatMat,
    c: &RatMat,
    flavor: DecompositionFlavor,
) -> Result<(RatMat, RatMat, usize)> {
    let n = a.nrows();
    let mut obs = c.clone();
    let mut block = c.clone();
    for _ in 1..n {
        block = block.mul(a)?;
        obs = obs.stack_below(&block)?;
    }
    let kernel = obs.nullspace();
    let l = kernel.len();
    if l == 0 {
        return Err(Error::Decomposition {
            flavor: flavor_name(flavor),
            detail: "exact observability matrix has full rank; required zero mode missing".into(),
        });
    }
    // primitive integer form of each kernel vector
    let kernel: Vec<Vec<Rat>> = kernel.into_iter().map(primitive_vector).collect();

    // the block form needs A k = 0 exactly
    for k in &kernel {
        let kv = RatMat::from_rows(k.iter().map(|x| vec![x.clone()]).collect())?;
        if !a.mul(&kv)?.is_zero() {
            return Err(Error::Decomposition {
                flavor: flavor_name(flavor),
                detail: "unobservable direction is not an exact zero mode of A".into(),
            });
        }
    }

    // pivot rows of the kernel columns, found by exact elimination
    let kmat = RatMat::from_rows(
        (0..n).map(|i| kernel.iter().map(|k| k[i].clone()).collect()).collect(),
    )?;
    let mut kt = kmat.transpose();
    let pivots = kt.rref();
    let complement: Vec<usize> = (0..n).filter(|i| !pivots.contains(i)).collect();
    if complement.len() != n - l {
        return Err(Error::Decomposition {
            flavor: flavor_name(flavor),
            detail: "exact kernel has inconsistent pivot structure".into(),
        });
    }

    let mut t = RatMat::zeros(n, n);
    for (j, &row) in complement.iter().enumerate() {
        t[(row, j)] = Rat::from_integer(1.into());
    }
    for (j, k) in kernel.iter().enumerate() {
        for i in 0..n {
            t[(i, n - l + j)] = k[i].clone();
        }
    }
    let t_inv = t.inverse().ok_or_else(|| Error::Decomposition {
        flavor: flavor_name(flavor),
        detail: "exact transformation is singular".into(),
    })?;
    Ok((t, t_inv, l))
}

fn primitive_vector(v: Vec<Rat>) -> Vec<Rat> {
    use num_bigint::BigInt;
    let mut den_lcm = BigInt::from(1);
    for x in &v {
        den_lcm = den_lcm.lcm(x.denom());
    }
    let scaled: Vec<BigInt> =
        v.iter().map(|x| x.numer() * (&den_lcm / x.denom())).collect();
    let mut g = BigInt::from(0);
    for s in &scaled {
        g = g.gcd(s);
    }
    if g.is_zero() {
        return v;
    }
    let mut out: Vec<Rat> = scaled.into_iter().map(|s| Rat::from_integer(s / &g)).collect();
    // sign convention: first nonzero entry positive
    if let Some(first) = out.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in &mut out {
                *x = -x.clone();
            }
        }
    }
    out
}

/// Lattice certificate: kernel direction, output vector, rational
/// phase-advance vector, common denominator and lattice generator.
#[derive(Debug, Clone)]
pub struct PendulumCertificate {
    pub d_bar: Array1<f64>,
    pub chi: Array1<f64>,
    pub nu: Vec<Rational64>,
    pub p_bar: i64,
    pub tau0: f64,
    pub lattice_vector: Array1<f64>,
}

impl PendulumCertificate {
    /// nu scaled by the common denominator; integral by construction.
    pub fn integer_phase_advances(&self) -> Vec<i64> {
        self.nu
            .iter()
            .map(|r| {
                let scaled = r * Rational64::from_integer(self.p_bar);
                debug_assert!(scaled.is_integer());
                scaled.to_integer()
            })
            .collect()
    }
}

/// Certificate from the kernel direction of `a_cl`.
///
/// The kernel fixes the direction only up to scale, and the lattice
/// exists exactly when some scale makes every phase advance rational; the
/// unit-norm representative is therefore rescaled so that the first
/// nonzero advance becomes a low-denominator rational before the
/// rationality test runs. Callers with a structurally exact direction
/// (synthesis staircases) should use
/// [`pendulum_certificate_with_direction`] instead.
pub fn pendulum_certificate(
    a_cl: &ArrayView2<f64>,
    c_cl: &ArrayView2<f64>,
    bank: &NonlinearityBank,
    tau0: f64,
) -> Result<PendulumCertificate> {
    let mut d = kernel_direction(a_cl)?;
    let chi = c_cl.dot(&d);
    if let Some((i, &x)) = chi.iter().enumerate().find(|(_, x)| x.abs() > 1e-9) {
        let nu0 = tau0 * x / bank.entries[i].period;
        let r = round_to_rational(nu0, 1000);
        if *r.numer() != 0 {
            let s = ratio_to_f64(r) / nu0;
            d.mapv_inplace(|v| v * s);
        }
    }
    pendulum_certificate_with_direction(a_cl, c_cl, bank, tau0, d)
}

/// Certificate for a caller-supplied kernel direction. Synthesis procedures
/// pass the exact staircase direction here, whose scaling is what makes the
/// phase-advance vector rational; the unit-norm default is only canonical
/// up to an irrational factor.
pub fn pendulum_certificate_with_direction(
    a_cl: &ArrayView2<f64>,
    c_cl: &ArrayView2<f64>,
    bank: &NonlinearityBank,
    tau0: f64,
    d_bar: Array1<f64>,
) -> Result<PendulumCertificate> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n || c_cl.ncols() != n || d_bar.len() != n {
        return Err(Error::Dimension("certificate operands must share the state dimension".into()));
    }
    if c_cl.nrows() != bank.len() {
        return Err(Error::Dimension(format!(
            "output matrix has {} rows, bank has {} entries",
            c_cl.nrows(),
            bank.len()
        )));
    }
    if !is_pos(tau0) {
        return Err(Error::Validation(format!("tau0 = {tau0} must be positive")));
    }
    let d_norm = d_bar.iter().map(|x| x * x).sum::<f64>().sqrt();
    let resid = a_cl.dot(&d_bar).iter().map(|x| x * x).sum::<f64>().sqrt();
    let a_scale = numlin::fro_norm(a_cl).max(1.0);
    if resid > NULL_TOL * a_scale * d_norm.max(1.0) {
        return Err(Error::Validation(format!(
            "direction is not in the kernel: |A d| = {resid:.3e}"
        )));
    }

    let chi = c_cl.dot(&d_bar);
    let chi_scale = d_norm.max(1.0);
    for (i, &x) in chi.iter().enumerate() {
        if x.abs() <= 1e-9 * chi_scale {
            return Err(Error::DegenerateOutputDirection { index: i });
        }
    }
    let nu_float: Vec<f64> = chi
        .iter()
        .zip(bank.periods())
        .map(|(&x, delta)| tau0 * x / delta)
        .collect();
    let nu = rationalize(&nu_float, RAT_MAX_DEN, RAT_TOL)?;
    let p_bar = lcmd(&nu)?;
    let lattice_vector = d_bar.mapv(|x| x * tau0 * p_bar as f64);
    Ok(PendulumCertificate { d_bar, chi, nu, p_bar, tau0, lattice_vector })
}
