//! Dense complex polynomials in double precision, coefficients ascending.

use crate::C64;

pub fn eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect()
}

pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial with the given roots.
pub fn from_roots(roots: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        out = mul(&out, &[-r, C64::new(1.0, 0.0)]);
    }
    out
}

pub fn degree(coeffs: &[C64]) -> usize {
    coeffs.iter().rposition(|c| c.norm() > 0.0).unwrap_or(0)
}

/// Evaluates `Π (z - r_k)`.
pub fn eval_roots(roots: &[C64], z: C64) -> C64 {
    roots.iter().fold(C64::new(1.0, 0.0), |acc, &r| acc * (z - r))
}

/// Roots by Aberth-Ehrlich iteration from points on a circle bounding the roots.
pub fn roots(coeffs: &[C64]) -> Vec<C64> {
    let n = degree(coeffs);
    if n == 0 {
        return vec![];
    }
    let lead = coeffs[n];
    let monic: Vec<C64> = coeffs[..=n].iter().map(|c| c / lead).collect();
    let d = derivative(&monic);
    let bound = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> =
        (0..n).map(|k| C64::from_polar(0.5 * bound, 0.4 + std::f64::consts::TAU * k as f64 / n as f64)).collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let ratio = eval(&monic, z[i]) / eval(&d, z[i]);
            let repulsion: C64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Converts real coefficients.
pub fn real(coeffs: &[f64]) -> Vec<C64> {
    coeffs.iter().map(|&c| C64::new(c, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn roots_round_trip() {
        let p = from_roots(&[c64(1.0, 0.0), c64(-1.0, 0.0)]);
        assert_eq!(p, vec![c64(-1.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert_eq!(eval(&p, c64(2.0, 0.0)), c64(3.0, 0.0));
        assert_eq!(derivative(&p), vec![c64(0.0, 0.0), c64(2.0, 0.0)]);
        assert_eq!(degree(&p), 2);
        let mut r = roots(&from_roots(&[c64(0.5, 1.0), c64(-2.0, 0.0), c64(0.0, -0.3)]));
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((r[0] - c64(-2.0, 0.0)).norm() < 1e-12);
        assert!((r[2] - c64(0.5, 1.0)).norm() < 1e-12);
    }
}
