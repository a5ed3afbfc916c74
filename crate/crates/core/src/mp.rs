//! Extended-precision complex arithmetic on MPFR: conversions, polynomial
//! evaluation, dense solves and simultaneous root finding.

use rug::{Complex, Float};

use crate::{poly, Error, Result, C64};

/// Default significand width for moments and Hankel solves.
pub const DEFAULT_PRECISION: u32 = 256;

pub fn mpc(z: C64, prec: u32) -> Complex {
    Complex::with_val(prec, (z.re, z.im))
}

pub fn zero(prec: u32) -> Complex {
    Complex::new(prec)
}

pub fn one(prec: u32) -> Complex {
    Complex::with_val(prec, 1)
}

pub fn to_c64(z: &Complex) -> C64 {
    C64::new(z.real().to_f64(), z.imag().to_f64())
}

pub fn abs(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

/// `|z|` as `f64` (saturates to 0 below the `f64` range).
pub fn abs_f64(z: &Complex) -> f64 {
    abs(z).to_f64()
}

/// Horner evaluation, ascending coefficients.
pub fn horner(coeffs: &[Complex], z: &Complex) -> Complex {
    let prec = z.prec().0;
    coeffs.iter().rev().fold(zero(prec), |acc, c| acc * z + c)
}

pub fn derivative(coeffs: &[Complex]) -> Vec<Complex> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| c.clone() * k as u32).collect()
}

/// Monic polynomial with the given roots, ascending coefficients.
pub fn from_roots(roots: &[Complex], prec: u32) -> Vec<Complex> {
    let mut p = vec![one(prec)];
    for r in roots {
        let mut next = vec![zero(prec); p.len() + 1];
        for (k, c) in p.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c.clone() * r;
        }
        p = next;
    }
    p
}

/// Outcome of a dense solve by Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct Solve {
    pub x: Vec<Complex>,
    /// `min |pivot| / max |pivot|`; a cheap proxy for the reciprocal condition.
    pub pivot_ratio: f64,
}

/// Solves `M x = b` for a square row-major `M`.
pub fn solve(mut m: Vec<Vec<Complex>>, mut b: Vec<Complex>) -> Result<Solve> {
    let n = b.len();
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid("matrix shape mismatch".into()));
    }
    if n == 0 {
        return Ok(Solve { x: vec![], pivot_ratio: 1.0 });
    }
    let mut pivots = Vec::with_capacity(n);
    for col in 0..n {
        let (best, mag) = (col..n)
            .map(|r| (r, abs(&m[r][col])))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty range");
        if mag.is_zero() {
            return Err(Error::Invalid(format!("singular matrix at column {col}")));
        }
        pivots.push(mag);
        m.swap(col, best);
        b.swap(col, best);
        let (head, tail) = m.split_at_mut(col + 1);
        let pivot_row = &head[col];
        for (off, row) in tail.iter_mut().enumerate() {
            let factor = row[col].clone() / &pivot_row[col];
            if factor.is_zero() {
                continue;
            }
            for k in col..n {
                row[k] -= factor.clone() * &pivot_row[k];
            }
            let bc = factor * &b[col];
            b[col + 1 + off] -= bc;
        }
    }
    let prec = b[0].prec().0;
    let mut x = vec![zero(prec); n];
    for i in (0..n).rev() {
        let mut s = b[i].clone();
        for k in i + 1..n {
            s -= m[i][k].clone() * &x[k];
        }
        x[i] = s / &m[i][i];
    }
    let max = pivots.iter().max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap().clone();
    let min = pivots.iter().min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap().clone();
    let ratio = Float::with_val(prec, min / max).to_f64();
    Ok(Solve { x, pivot_ratio: ratio })
}

/// All roots of a polynomial: `f64` Aberth-Ehrlich starts refined by
/// Aberth-Ehrlich steps in full precision.
pub fn roots(coeffs: &[Complex]) -> Vec<Complex> {
    let n = coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0);
    if n == 0 {
        return vec![];
    }
    let prec = coeffs[n].prec().0;
    let monic: Vec<Complex> = coeffs[..=n].iter().map(|c| c.clone() / &coeffs[n]).collect();
    let d = derivative(&monic);
    let approx: Vec<C64> = monic.iter().map(to_c64).collect();
    let mut z: Vec<Complex> = poly::roots(&approx).into_iter().map(|r| mpc(r, prec)).collect();
    let eps = Float::with_val(prec, Float::i_exp(1, 8 - prec as i32));
    for _ in 0..200 {
        let mut done = true;
        for i in 0..n {
            let ratio = horner(&monic, &z[i]) / horner(&d, &z[i]);
            if !ratio.real().is_finite() || !ratio.imag().is_finite() {
                continue;
            }
            let mut repulsion = zero(prec);
            for j in 0..n {
                if j != i {
                    repulsion += (z[i].clone() - &z[j]).recip();
                }
            }
            let step = ratio.clone() / (one(prec) - ratio * repulsion);
            if !step.real().is_finite() || !step.imag().is_finite() {
                continue;
            }
            let scale = Float::with_val(prec, abs(&z[i]) + 1u32);
            if abs(&step) > Float::with_val(prec, &eps * &scale) {
                done = false;
            }
            z[i] -= step;
        }
        if done {
            break;
        }
    }
    z
}
