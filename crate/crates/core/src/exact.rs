//! Exact rational arithmetic support.
//!
//! Model files may carry matrix entries as `"p/q"` strings. Lattice
//! constructions (kernel directions, Kalman transformations) performed on
//! such data stay in exact arithmetic so that rationality assumptions can
//! hold literally instead of up to floating-point noise.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Parse `"p/q"`, an integer literal, or a plain decimal such as `"-0.125"`.
pub fn parse_rational(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = |_| Error::Validation(format!("cannot parse rational from {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let p: BigInt = num.trim().parse().map_err(bad)?;
        let q: BigInt = den.trim().parse().map_err(bad)?;
        if q.is_zero() {
            return Err(Error::Validation(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int = int.trim();
        let neg = int.starts_with('-');
        let ip: BigInt = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            int.parse().map_err(bad)?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Validation(format!("cannot parse rational from {s:?}")));
        }
        let fp: BigInt = frac.parse().map_err(bad)?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = Rat::new(fp, scale);
        let int_part = Rat::from_integer(ip);
        return Ok(if neg { int_part - frac_part } else { int_part + frac_part });
    }
    let p: BigInt = s.parse().map_err(bad)?;
    Ok(Rat::from_integer(p))
}

/// Exact value of a finite double (every finite f64 is p / 2^k).
pub fn rational_from_f64(x: f64) -> Result<Rat> {
    Rat::from_float(x).ok_or(Error::NonFinite("rational conversion"))
}

pub fn rational_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Dense matrix over the rationals. Small-scale (Kalman decompositions of
/// desk-size plants); no attempt at asymptotic cleverness.
#[derive(Debug, Clone, PartialEq)]
pub struct RatMat {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl RatMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMat { rows, cols, data: vec![Rat::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RatMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rat::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rational matrix".into()));
        }
        Ok(RatMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> RatMat {
        let mut t = RatMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMat) -> Result<RatMat> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "rational product {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = RatMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Rat::zero();
                for k in 0..self.cols {
                    if !self[(i, k)].is_zero() && !other[(k, j)].is_zero() {
                        acc += &self[(i, k)] * &other[(k, j)];
                    }
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    pub fn column(&self, j: usize) -> Vec<Rat> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn stack_below(&self, other: &RatMat) -> Result<RatMat> {
        if self.cols != other.cols {
            return Err(Error::Dimension("vertical stack width mismatch".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(RatMat { rows: self.rows + other.rows, cols: self.cols, data })
    }

    pub fn to_f64(&self) -> ndarray::Array2<f64> {
        ndarray::Array2::from_shape_fn((self.rows, self.cols), |(i, j)| {
            rational_to_f64(&self[(i, j)])
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Exact reduced row echelon form; returns pivot column indices.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row >= self.rows {
                break;
            }
            let mut pivot_row = None;
            for r in row..self.rows {
                if !self[(r, col)].is_zero() {
                    let better = match pivot_row {
                        None => true,
                        Some(p) => self[(r, col)].abs() > self[(p, col)].abs(),
                    };
                    if better {
                        pivot_row = Some(r);
                    }
                }
            }
            let Some(p) = pivot_row else { continue };
            self.swap_rows(row, p);
            let inv = Rat::one() / self[(row, col)].clone();
            for j in col..self.cols {
                let v = self[(row, j)].clone() * &inv;
                self[(row, j)] = v;
            }
            for r in 0..self.rows {
                if r != row && !self[(r, col)].is_zero() {
                    let factor = self[(r, col)].clone();
                    for j in col..self.cols {
                        let v = self[(r, j)].clone() - &factor * &self[(row, j)];
                        self[(r, j)] = v;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Exact nullspace basis (one column per free variable, entry 1 at the
    /// free position).
    pub fn nullspace(&self) -> Vec<Vec<Rat>> {
        let mut work = self.clone();
        let pivots = work.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = Vec::with_capacity(free.len());
        for &f in &free {
            let mut v = vec![Rat::zero(); self.cols];
            v[f] = Rat::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -work[(r, f)].clone();
            }
            basis.push(v);
        }
        basis
    }

    /// Exact inverse via Gauss-Jordan; None when singular.
    pub fn inverse(&self) -> Option<RatMat> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut aug = RatMat::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Rat::one();
        }
        let pivots = aug.rref();
        if pivots.len() < n || pivots.iter().take(n).enumerate().any(|(k, &p)| p != k) {
            return None;
        }
        let mut inv = RatMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[(i, n + j)].clone();
            }
        }
        Some(inv)
    }
}

impl std::ops::Index<(usize, usize)> for RatMat {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }
}
