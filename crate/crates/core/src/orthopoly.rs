//! Complex orthogonal polynomials in extended precision: Laurent moments,
//! Padé denominators, varying-weight orthogonality, Heine-Stieltjes pairs,
//! zero-counting measures and their potential diagnostics.

use rand::{Rng, SeedableRng};
use rug::ops::Pow;
use rug::Complex;
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::contours::ContourSystem;
use crate::fields::ExternalField;
use crate::measures::{potential, DiscreteMeasure};
use crate::mp::{self, abs_f64, horner, mpc, one, to_c64, zero};
use crate::{poly, Error, Result, C64};

/// `f(z) = scale · Π (z - a_k)^{α_k}`, the branch behaving like
/// `scale · z^{Σα}` at infinity with cuts joining the origin to each `a_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub factors: Vec<(C64, f64)>,
    pub scale: C64,
}

impl BranchSpec {
    pub fn new(factors: Vec<(C64, f64)>, scale: C64) -> Self {
        Self { factors, scale }
    }

    /// `f ≡ 1`.
    pub fn one() -> Self {
        Self::new(vec![], C64::new(1.0, 0.0))
    }

    /// `1/√(z² - 1)`, the Markov function of the arcsine law.
    pub fn inverse_sqrt_segment() -> Self {
        Self::new(vec![(C64::new(-1.0, 0.0), -0.5), (C64::new(1.0, 0.0), -0.5)], C64::new(1.0, 0.0))
    }

    /// `Σ α_k`, the order of growth at infinity.
    pub fn order_at_infinity(&self) -> f64 {
        self.factors.iter().map(|f| f.1).sum()
    }

    pub fn eval_mp(&self, z: &Complex) -> Complex {
        let prec = z.prec().0;
        let total = self.order_at_infinity();
        let rounded = total.round();
        let mut v = if (total - rounded).abs() < 1e-12 { z.clone().pow(rounded as i32) } else { z.clone().pow(total) };
        for &(a, alpha) in &self.factors {
            let ratio = one(prec) - mpc(a, prec) / z;
            v *= ratio.pow(alpha);
        }
        v * mpc(self.scale, prec)
    }

    pub fn eval(&self, z: C64) -> C64 {
        let total = self.order_at_infinity();
        self.factors.iter().fold(self.scale * z.powf(total), |acc, &(a, alpha)| acc * (1.0 - a / z).powf(alpha))
    }

    fn radius(&self) -> f64 {
        self.factors.iter().map(|f| f.0.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    ContourQuadrature,
    LaurentSeries,
}

/// Expansion `f(z) = Σ_k f_k z^{-k}` at infinity; `coeffs[k] = f_k`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub coeffs: Vec<Complex>,
    pub source: MomentSource,
    pub precision_bits: u32,
}

impl MomentTable {
    pub fn from_series(coeffs: &[C64], precision: u32) -> Result<Self> {
        check_precision(precision)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite Laurent coefficient".into()));
        }
        Ok(Self {
            coeffs: coeffs.iter().map(|&c| mpc(c, precision)).collect(),
            source: MomentSource::LaurentSeries,
            precision_bits: precision,
        })
    }

    pub fn get(&self, k: usize) -> C64 {
        to_c64(&self.coeffs[k])
    }

    /// Power moments `c_k = f_{k+1}` of the Markov form `Σ c_k z^{-k-1}`.
    pub fn markov_moments(&self) -> Vec<C64> {
        self.coeffs.iter().skip(1).map(to_c64).collect()
    }
}

fn check_precision(bits: u32) -> Result<()> {
    if bits < 128 {
        return Err(Error::Invalid(format!("precision {bits} below 128 bits")));
    }
    Ok(())
}

/// `f_0, …, f_{2n}` by the trapezoidal rule on a circle of four times the
/// branch-point radius; working precision grows with the index so that the
/// `4^k` amplification of rounding stays below the requested precision.
pub fn laurent_moments(f: &BranchSpec, n: usize, precision: u32) -> Result<MomentTable> {
    check_precision(precision)?;
    let total = f.order_at_infinity();
    if (total - total.round()).abs() > 1e-12 {
        return Err(Error::Invalid(format!("Σα = {total} is not an integer; f is not single valued near infinity")));
    }
    if total > 0.5 {
        return Err(Error::Invalid(format!("f grows like z^{total} at infinity")));
    }
    let count = 2 * n + 1;
    let work = precision + 2 * count as u32 + 32;
    let rho = 4.0 * f.radius().max(0.25);
    let m = (work / 2 + 16) as usize;
    let mut acc = vec![zero(work); count];
    let rho_mp = rug::Float::with_val(work, rho);
    for j in 0..m {
        let angle = rug::Float::with_val(work, rug::float::Constant::Pi) * 2u32 * j as u32 / m as u32;
        let (s, c) = angle.sin_cos(rug::Float::new(work));
        let u = Complex::with_val(work, (c, s));
        let z = u.clone() * &rho_mp;
        let g = f.eval_mp(&z);
        let mut uk = one(work);
        for a in acc.iter_mut() {
            *a += g.clone() * &uk;
            uk *= &u;
        }
    }
    let mut scale = rug::Float::with_val(work, 1) / m as u32;
    let coeffs = acc
        .into_iter()
        .map(|a| {
            let v = Complex::with_val(precision, a * &scale);
            scale *= &rho_mp;
            v
        })
        .collect();
    Ok(MomentTable { coeffs, source: MomentSource::ContourQuadrature, precision_bits: precision })
}

/// Monic polynomial in extended precision with its zeros.
#[derive(Debug, Clone)]
pub struct PolyRecord {
    /// Ascending; the last entry is exactly 1.
    pub coeffs: Vec<Complex>,
    pub zeros: Vec<C64>,
    pub moment_residual: f64,
    pub precision_bits: u32,
    /// Degree asked for; larger than `degree()` after a rank fallback.
    pub requested_degree: usize,
    /// Pivot-based condition estimate of the moment system.
    pub condition: f64,
}

impl Serialize for PolyRecord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let places = (self.precision_bits as f64 * std::f64::consts::LOG10_2) as usize;
        let digits = |x: &rug::Float| format!("{x:.places$e}");
        let coeffs: Vec<[String; 2]> = self.coeffs.iter().map(|c| [digits(c.real()), digits(c.imag())]).collect();
        let mut st = s.serialize_struct("PolyRecord", 6)?;
        st.serialize_field("degree", &self.degree())?;
        st.serialize_field("precision_bits", &self.precision_bits)?;
        st.serialize_field("coeffs", &coeffs)?;
        st.serialize_field("zeros", &self.zeros)?;
        st.serialize_field("moment_residual", &self.moment_residual)?;
        st.serialize_field("condition", &self.condition)?;
        st.end()
    }
}

impl PolyRecord {
    pub fn from_zeros(zeros: &[C64], precision: u32) -> Self {
        let roots: Vec<Complex> = zeros.iter().map(|&z| mpc(z, precision)).collect();
        Self {
            coeffs: mp::from_roots(&roots, precision),
            zeros: zeros.to_vec(),
            moment_residual: 0.0,
            precision_bits: precision,
            requested_degree: zeros.len(),
            condition: 1.0,
        }
    }

    fn from_coeffs(coeffs: Vec<Complex>, precision: u32) -> Self {
        let zeros = mp::roots(&coeffs).iter().map(to_c64).collect();
        let n = coeffs.len() - 1;
        Self { coeffs, zeros, moment_residual: 0.0, precision_bits: precision, requested_degree: n, condition: 1.0 }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs_f64(&self) -> Vec<C64> {
        self.coeffs.iter().map(to_c64).collect()
    }

    pub fn eval(&self, z: C64) -> C64 {
        to_c64(&horner(&self.coeffs, &mpc(z, self.precision_bits)))
    }

    /// Largest relative mismatch between the coefficients and the product
    /// over the stored zeros.
    pub fn round_trip_error(&self) -> f64 {
        let rebuilt = poly::from_roots(&self.zeros);
        let scale = self.coeffs.iter().map(abs_f64).fold(1.0, f64::max);
        rebuilt.iter().zip(&self.coeffs).map(|(a, b)| (a - to_c64(b)).norm()).fold(0.0, f64::max) / scale
    }

    pub fn write_zeros_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["re", "im"])?;
        for z in &self.zeros {
            w.write_record([z.re.to_string(), z.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the monic moment system `Σ_{j<d} q_j m(j+k) = -m(d+k)`, `k < d`,
/// lowering `d` while the system is numerically singular.
fn monic_from_moments(m: impl Fn(usize) -> Complex, n: usize, prec: u32) -> (Vec<Complex>, f64) {
    let threshold = (2f64).powf(-(prec as f64) * 0.6);
    for d in (1..=n).rev() {
        let rows: Vec<Vec<Complex>> = (0..d).map(|k| (0..d).map(|j| m(j + k)).collect()).collect();
        let rhs: Vec<Complex> = (0..d).map(|k| -m(d + k)).collect();
        if let Ok(sol) = mp::solve(rows, rhs) {
            if sol.pivot_ratio > threshold {
                let mut q = sol.x;
                q.push(one(prec));
                return (q, 1.0 / sol.pivot_ratio);
            }
        }
    }
    (vec![one(prec)], 1.0)
}

/// Denominator of the diagonal Padé approximant at infinity:
/// `(Q_n f - P_n)(z) = O(z^{-n-1})`.
pub fn pade_denominator(moments: &MomentTable, n: usize) -> Result<PolyRecord> {
    if moments.coeffs.len() < 2 * n + 1 {
        return Err(Error::Invalid(format!("{} coefficients given, {} needed", moments.coeffs.len(), 2 * n + 1)));
    }
    if moments.coeffs[1..].iter().all(|c| c.is_zero()) {
        return Err(Error::TrivialFunction);
    }
    let prec = moments.precision_bits;
    let (coeffs, condition) = monic_from_moments(|k| moments.coeffs[k + 1].clone(), n, prec);
    let mut rec = PolyRecord::from_coeffs(coeffs, prec);
    rec.requested_degree = n;
    rec.condition = condition;
    rec.moment_residual = pade_defect(moments, &rec.coeffs, n);
    Ok(rec)
}

/// Largest Laurent coefficient of `Q f` at `z^{-1}, …, z^{-n}`.
pub fn pade_defect(moments: &MomentTable, q: &[Complex], n: usize) -> f64 {
    let prec = moments.precision_bits;
    (1..=n)
        .map(|m| {
            let mut s = zero(prec);
            for (j, qj) in q.iter().enumerate() {
                if let Some(f) = moments.coeffs.get(j + m) {
                    s += qj.clone() * f;
                }
            }
            abs_f64(&s)
        })
        .fold(0.0, f64::max)
}

/// Quadrature nodes `(t, dt)` along the contour: Gauss-Legendre panels,
/// graded quadratically towards the ends of open arcs.
pub fn contour_quadrature(contour: &ContourSystem, panels: usize, order: usize) -> Vec<(C64, C64)> {
    let (x, w) = crate::quad::gauss_legendre(order);
    let mut out = Vec::new();
    for g in contour.geoms() {
        if g.is_point() {
            continue;
        }
        let len = g.length();
        let grade = |u: f64| if g.closed { u } else { u * u / (u * u + (1.0 - u) * (1.0 - u)) };
        let dgrade = |u: f64| {
            if g.closed {
                1.0
            } else {
                let d = u * u + (1.0 - u) * (1.0 - u);
                2.0 * u * (1.0 - u) / (d * d)
            }
        };
        for p in 0..panels {
            let (u0, u1) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for (xi, wi) in x.iter().zip(&w) {
                let u = u0 + 0.5 * (xi + 1.0) * (u1 - u0);
                let (z, tau) = g.at_length(len * grade(u));
                let ds = len * dgrade(u) * 0.5 * (u1 - u0) * wi;
                out.push((z, tau * ds));
            }
        }
    }
    out
}

/// `exp(-2n Φ(t))` in extended precision.
fn varying_factor(field: &ExternalField, n: usize, t: &Complex) -> Complex {
    let prec = t.prec().0;
    match field {
        ExternalField::Zero => one(prec),
        ExternalField::Polynomial { coeffs } => {
            let c: Vec<Complex> = coeffs.iter().map(|&c| mpc(c, prec)).collect();
            (horner(&c, t) * -(2.0 * n as f64)).exp()
        }
        ExternalField::LogCharges { charges } => charges
            .iter()
            .fold(one(prec), |acc, ch| acc * (t.clone() - mpc(ch.at, prec)).pow(2.0 * n as f64 * ch.alpha)),
    }
}

/// Monic `Q_n` with `∫_Γ Q_n(t) t^k f(t) e^{-2nΦ(t)} dt = 0` for `k < n`.
pub fn orthopoly_varying(
    contour: &ContourSystem,
    f: &BranchSpec,
    field: &ExternalField,
    n: usize,
    precision: u32,
) -> Result<PolyRecord> {
    check_precision(precision)?;
    let nodes = contour_quadrature(contour, 32, 32);
    if nodes.is_empty() {
        return Err(Error::EmptyContour);
    }
    let weights: Vec<(Complex, Complex)> = crate::par::map_slice(&nodes, |&(t, dt)| {
        let tm = mpc(t, precision);
        let g = f.eval_mp(&tm) * varying_factor(field, n, &tm) * mpc(dt, precision);
        (tm, g)
    });
    if weights.iter().any(|(_, g)| !g.real().is_finite() || !g.imag().is_finite()) {
        return Err(Error::Invalid("weight is not integrable on the contour nodes".into()));
    }
    let mut moments = vec![zero(precision); 2 * n];
    for (t, g) in &weights {
        let mut p = g.clone();
        for m in moments.iter_mut() {
            *m += &p;
            p *= t;
        }
    }
    let (coeffs, condition) = monic_from_moments(|k| moments[k].clone(), n, precision);
    let mut rec = PolyRecord::from_coeffs(coeffs, precision);
    rec.requested_degree = n;
    rec.condition = condition;
    rec.moment_residual = orthogonality_defect(&weights, &rec.coeffs, n);
    Ok(rec)
}

/// `max_k |∫ Q t^k w dt| / ∫ |Q t^k w dt|` over `k < n`.
fn orthogonality_defect(weights: &[(Complex, Complex)], q: &[Complex], n: usize) -> f64 {
    let prec = q[0].prec().0;
    let vals: Vec<(Complex, Complex)> = weights.iter().map(|(t, g)| (t.clone(), horner(q, t) * g)).collect();
    (0..n)
        .map(|k| {
            let mut s = zero(prec);
            let mut a = 0.0;
            for (t, v) in &vals {
                let term = v.clone() * t.clone().pow(k as u32);
                a += abs_f64(&term);
                s += term;
            }
            abs_f64(&s) / a.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// A polynomial solution of `A Q'' + B Q' - n(n+α-1) V Q = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct HeineStieltjes {
    /// Monic, degree `p - 2`, ascending coefficients.
    pub v: Vec<C64>,
    pub q: PolyRecord,
    /// Largest coefficient of the defect relative to the largest term.
    pub residual: f64,
}

/// Newton on the zero system `Σ_{j≠i} 2/(x_i - x_j) + B(x_i)/A(x_i) = 0`.
fn hs_newton(a: &[C64], b: &[C64], start: Vec<C64>) -> Option<Vec<C64>> {
    let n = start.len();
    let da = poly::derivative(a);
    let db = poly::derivative(b);
    let mut x = start;
    let system = |x: &[C64]| -> Vec<C64> {
        (0..n)
            .map(|i| {
                let s: C64 = (0..n).filter(|&j| j != i).map(|j| 2.0 / (x[i] - x[j])).sum();
                s + poly::eval(b, x[i]) / poly::eval(a, x[i])
            })
            .collect()
    };
    let norm = |f: &[C64]| f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    // largest single term, so that the stopping test is relative
    let size = |x: &[C64]| -> f64 {
        (0..n)
            .map(|i| {
                let pair = (0..n).filter(|&j| j != i).map(|j| 2.0 / (x[i] - x[j]).norm()).fold(0.0, f64::max);
                pair.max((poly::eval(b, x[i]) / poly::eval(a, x[i])).norm())
            })
            .fold(1.0, f64::max)
    };
    // zeros stay near the anchors; escaping to infinity solves the system only asymptotically
    let roots = poly::roots(a);
    let radius = roots.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut f = system(&x);
    for _ in 0..100 {
        if !norm(&f).is_finite() || x.iter().any(|z| z.norm() > 2.0 * radius) {
            return None;
        }
        if norm(&f) < 1e-13 * size(&x) {
            return Some(x);
        }
        let mut jac = nalgebra::DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            let (av, bv) = (poly::eval(a, x[i]), poly::eval(b, x[i]));
            let mut diag = (poly::eval(&db, x[i]) * av - bv * poly::eval(&da, x[i])) / (av * av);
            for j in 0..n {
                if j != i {
                    let d = 2.0 / ((x[i] - x[j]) * (x[i] - x[j]));
                    diag -= d;
                    jac[(i, j)] = d;
                }
            }
            jac[(i, i)] = diag;
        }
        let step = jac.lu().solve(&nalgebra::DVector::from_column_slice(&f))?;
        // no zero moves more than half way to its nearest neighbour or anchor
        let mut lambda: f64 = 1.0;
        for i in 0..n {
            let near = (0..n)
                .filter(|&j| j != i)
                .map(|j| (x[i] - x[j]).norm())
                .chain(roots.iter().map(|r| (x[i] - r).norm()))
                .fold(f64::INFINITY, f64::min);
            let len = step[i].norm();
            if len > 0.5 * near {
                lambda = lambda.min(0.5 * near / len);
            }
        }
        loop {
            let trial: Vec<C64> = x.iter().zip(step.iter()).map(|(xi, s)| xi - lambda * s).collect();
            let ft = system(&trial);
            if norm(&ft) < norm(&f) || lambda < 1e-4 {
                x = trial;
                f = ft;
                break;
            }
            lambda *= 0.5;
        }
    }
    (norm(&f) < 1e-9 * size(&x)).then_some(x)
}

/// Polishes the zeros in extended precision with a few Newton steps.
fn hs_polish(a: &[C64], b: &[C64], x: &[C64], prec: u32) -> Vec<Complex> {
    let n = x.len();
    let am: Vec<Complex> = a.iter().map(|&c| mpc(c, prec)).collect();
    let bm: Vec<Complex> = b.iter().map(|&c| mpc(c, prec)).collect();
    let (dam, dbm) = (mp::derivative(&am), mp::derivative(&bm));
    let mut xm: Vec<Complex> = x.iter().map(|&z| mpc(z, prec)).collect();
    for _ in 0..8 {
        let mut f = Vec::with_capacity(n);
        let mut jac = vec![vec![zero(prec); n]; n];
        for i in 0..n {
            let (av, bv) = (horner(&am, &xm[i]), horner(&bm, &xm[i]));
            let mut s = bv.clone() / &av;
            let mut diag = (horner(&dbm, &xm[i]) * &av - bv * horner(&dam, &xm[i])) / (av.clone() * &av);
            for j in 0..n {
                if j != i {
                    let inv = (xm[i].clone() - &xm[j]).recip();
                    s += inv.clone() * 2u32;
                    let d = inv.clone() * &inv * 2u32;
                    diag -= &d;
                    jac[i][j] = d;
                }
            }
            jac[i][i] = diag;
            f.push(s);
        }
        let Ok(sol) = mp::solve(jac, f) else { break };
        for (xi, s) in xm.iter_mut().zip(sol.x) {
            *xi -= s;
        }
    }
    xm
}

/// `V = (A Q'' + B Q') / (λ Q)` with the relative size of the remainder.
fn van_vleck(a: &[Complex], b: &[Complex], q: &[Complex], lambda: f64) -> (Vec<Complex>, f64) {
    let prec = q[0].prec().0;
    let d1 = mp::derivative(q);
    let d2 = mp::derivative(&d1);
    let mul = |x: &[Complex], y: &[Complex]| {
        let mut out = vec![zero(prec); x.len() + y.len() - 1];
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                out[i + j] += xi.clone() * yj;
            }
        }
        out
    };
    let mut num = if d2.is_empty() { vec![zero(prec)] } else { mul(a, &d2) };
    if !d1.is_empty() {
        let t = mul(b, &d1);
        if t.len() > num.len() {
            num.resize(t.len(), zero(prec));
        }
        for (k, c) in t.into_iter().enumerate() {
            num[k] += c;
        }
    }
    let scale = num.iter().map(abs_f64).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // divide by the monic λQ
    let dq = q.len() - 1;
    let mut rem = num;
    let dv = rem.len().saturating_sub(dq + 1);
    let mut v = vec![zero(prec); dv + 1];
    for k in (0..=dv).rev() {
        let c = rem[k + dq].clone();
        for (j, qj) in q.iter().enumerate() {
            rem[k + j] -= c.clone() * qj;
        }
        v[k] = c / lambda;
    }
    let r = rem.iter().map(abs_f64).fold(0.0, f64::max) / scale;
    (v, r)
}

/// Heine-Stieltjes pairs `(V_n, Q_n)` found by Newton from structured
/// starts (Chebyshev points on anchor pairs, splits of `n` over consecutive
/// anchors) and seeded perturbations of them.
pub fn heine_stieltjes(a_poly: &[C64], b_poly: &[C64], n: usize, seed: u64) -> Result<Vec<HeineStieltjes>> {
    let p = poly::degree(a_poly);
    if p < 2 || poly::degree(b_poly) >= p {
        return Err(Error::Invalid("need deg A = p ≥ 2 and deg B ≤ p - 1".into()));
    }
    let lead = a_poly[p];
    let a: Vec<C64> = a_poly[..=p].iter().map(|c| c / lead).collect();
    let mut b: Vec<C64> = b_poly.iter().map(|c| c / lead).collect();
    b.resize(p, C64::new(0.0, 0.0));
    let alpha = b[p - 1];
    if alpha.im.abs() > 1e-14 {
        return Err(Error::Invalid("leading coefficient of B must be real".into()));
    }
    let lambda = n as f64 * (n as f64 + alpha.re - 1.0);
    let prec = mp::DEFAULT_PRECISION;
    if n == 0 {
        return Ok(vec![]);
    }
    let mut anchors = poly::roots(&a);
    anchors.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let cheb = |lo: C64, hi: C64, k: usize| -> Vec<C64> {
        (0..k)
            .map(|i| {
                let t = (std::f64::consts::PI * (i as f64 + 0.5) / k as f64).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * t * 0.9
            })
            .collect()
    };
    let mut starts: Vec<Vec<C64>> = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            starts.push(cheb(anchors[i], anchors[j], n));
        }
    }
    let mut split = vec![0usize; p - 1];
    compositions(n, 0, &mut split, &mut |parts| {
        let mut s = Vec::new();
        for (k, &m) in parts.iter().enumerate() {
            s.extend(cheb(anchors[k], anchors[k + 1], m));
        }
        starts.push(s);
    });
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let scale = anchors.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let base = starts.clone();
    for s in base.iter().take(64) {
        for _ in 0..2 {
            starts.push(
                s.iter()
                    .map(|z| z + C64::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)) * scale)
                    .collect(),
            );
        }
    }
    let found: Vec<Option<HeineStieltjes>> = crate::par::map_slice(&starts, |s| {
        let x = hs_newton(&a, &b, s.clone())?;
        if x.iter().any(|z| anchors.iter().any(|w| (z - w).norm() < 1e-8 * scale)) {
            return None;
        }
        let xm = hs_polish(&a, &b, &x, prec);
        let q = mp::from_roots(&xm, prec);
        let am: Vec<Complex> = a.iter().map(|&c| mpc(c, prec)).collect();
        let bm: Vec<Complex> = b.iter().map(|&c| mpc(c, prec)).collect();
        let (v, residual) = van_vleck(&am, &bm, &q, lambda);
        let zeros = xm.iter().map(to_c64).collect();
        let q = PolyRecord {
            coeffs: q,
            zeros,
            moment_residual: residual,
            precision_bits: prec,
            requested_degree: n,
            condition: 1.0,
        };
        Some(HeineStieltjes { v: v.iter().map(to_c64).collect(), q, residual })
    });
    let mut out: Vec<HeineStieltjes> = Vec::new();
    for hs in found.into_iter().flatten() {
        let same = |o: &HeineStieltjes| o.v.iter().zip(&hs.v).all(|(x, y)| (x - y).norm() <= 1e-8 * (1.0 + x.norm()));
        if hs.residual < 1e-8 && !out.iter().any(same) {
            out.push(hs);
        }
    }
    out.sort_by(|x, y| {
        let key = |h: &HeineStieltjes| h.v.first().map_or((0.0, 0.0), |c| (c.re, c.im));
        key(x).partial_cmp(&key(y)).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

fn compositions(n: usize, k: usize, parts: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if k + 1 == parts.len() {
        parts[k] = n;
        emit(parts);
        return;
    }
    for m in 0..=n {
        parts[k] = m;
        compositions(n - m, k + 1, parts, emit);
    }
}

/// `(1/n) Σ δ(ζ)` over the zeros, coincident zeros merged.
pub fn zero_counting(q: &PolyRecord) -> Result<DiscreteMeasure> {
    let n = q.zeros.len();
    if n == 0 {
        return Err(Error::DegenerateMeasure("polynomial of degree 0 has no zeros".into()));
    }
    let scale = q.zeros.iter().map(|z| z.norm()).fold(1.0, f64::max);
    DiscreteMeasure::merged(q.zeros.clone(), vec![1.0 / n as f64; n], 1e-9 * scale)
}

fn check_probe(mu: &DiscreteMeasure, z: C64) -> Result<()> {
    if mu.nodes().iter().zip(mu.weights()).any(|(q, &w)| w > 0.0 && (q - z).norm() < 0.1) {
        return Err(Error::ProbeTooClose(z));
    }
    Ok(())
}

/// `max_z |V^μ(z) - V^ν(z)|` over probes at least 0.1 away from both supports.
pub fn weak_star_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, probes: &[C64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in probes {
        check_probe(mu, z)?;
        check_probe(nu, z)?;
        worst = worst.max((potential(mu, z) - potential(nu, z)).abs());
    }
    Ok(worst)
}

/// `max_z |(1/n) log|Q_n(z)| + V^λ(z)|`; probes on a zero of `Q_n` are
/// skipped and returned separately.
pub fn nth_root_check(q: &PolyRecord, lambda: &DiscreteMeasure, probes: &[C64]) -> Result<(f64, Vec<C64>)> {
    let n = q.zeros.len().max(1) as f64;
    let mut worst: f64 = 0.0;
    let mut skipped = Vec::new();
    for &z in probes {
        check_probe(lambda, z)?;
        if q.zeros.contains(&z) {
            skipped.push(z);
            continue;
        }
        let log_q: f64 = q.zeros.iter().map(|r| (z - r).norm().ln()).sum::<f64>() / n;
        worst = worst.max((log_q + potential(lambda, z)).abs());
    }
    Ok((worst, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::contours::Arc;

    const P: u32 = 256;

    #[test]
    fn laurent_examples() {
        let m = laurent_moments(&BranchSpec::inverse_sqrt_segment(), 3, P).unwrap();
        let expect = [0.0, 1.0, 0.0, 0.5, 0.0, 0.375, 0.0];
        for (k, e) in expect.iter().enumerate() {
            assert!(abs_f64(&(m.coeffs[k].clone() - *e)) < 1e-60, "{k}");
        }
        for (c, e) in m.markov_moments().iter().zip([1.0, 0.0, 0.5, 0.0]) {
            assert!((c - e).norm() < 1e-15);
        }

        // √((z-1)/(z+1)) = 1 - 1/z + 1/(2z²) - …
        let f = BranchSpec::new(vec![(c64(1.0, 0.0), 0.5), (c64(-1.0, 0.0), -0.5)], c64(1.0, 0.0));
        let m = laurent_moments(&f, 1, P).unwrap();
        for (k, e) in [1.0, -1.0, 0.5].iter().enumerate() {
            assert!(abs_f64(&(m.coeffs[k].clone() - *e)) < 1e-60);
        }

        // 1/(z - a): f_k = a^{k-1}
        let a = c64(0.3, 0.4);
        let m = laurent_moments(&BranchSpec::new(vec![(a, -1.0)], c64(1.0, 0.0)), 4, P).unwrap();
        let am = mpc(a, P);
        for k in 1..9 {
            let exact = am.clone().pow((k - 1) as u32);
            assert!(abs_f64(&(m.coeffs[k].clone() - exact)) < 1e-60);
        }
        assert!(laurent_moments(&BranchSpec::new(vec![(a, 0.5)], c64(1.0, 0.0)), 2, P).is_err());
        assert!(laurent_moments(&BranchSpec::new(vec![(a, 1.0)], c64(1.0, 0.0)), 2, P).is_err());
    }

    #[test]
    fn pade_examples() {
        let m = laurent_moments(&BranchSpec::inverse_sqrt_segment(), 5, P).unwrap();
        let q1 = pade_denominator(&m, 1).unwrap();
        assert!(abs_f64(&q1.coeffs[0]) < 1e-60);
        let q5 = pade_denominator(&m, 5).unwrap();
        assert_eq!(q5.degree(), 5);
        // monic Chebyshev: T_5/16 = z⁵ - 5z³/4 + 5z/16
        let expect = [0.0, 5.0 / 16.0, 0.0, -1.25, 0.0, 1.0];
        for (c, e) in q5.coeffs.iter().zip(expect) {
            assert!(abs_f64(&(c.clone() - e)) < 1e-50);
        }
        assert!(q5.zeros.iter().all(|z| z.im.abs() < 1e-12 && z.re.abs() < 1.0));
        assert!(q5.round_trip_error() < 1e-6);
        assert!(q5.moment_residual < 1e-50);

        // (z + 2)/((z - 0.5)(z + 0.25)) has degree (1, 2)
        let f =
            BranchSpec::new(vec![(c64(-2.0, 0.0), 1.0), (c64(0.5, 0.0), -1.0), (c64(-0.25, 0.0), -1.0)], c64(1.0, 0.0));
        let m = laurent_moments(&f, 5, P).unwrap();
        let q = pade_denominator(&m, 5).unwrap();
        assert_eq!((q.degree(), q.requested_degree), (2, 5));
        assert!(q.moment_residual <= 1e-20);

        let zero = MomentTable::from_series(&[c64(0.0, 0.0); 7], P).unwrap();
        assert!(matches!(pade_denominator(&zero, 3), Err(Error::TrivialFunction)));
    }

    #[test]
    fn varying_orthogonality() {
        let f = BranchSpec::inverse_sqrt_segment();
        let circle = ContourSystem::new(vec![Arc::circle(c64(0.0, 0.0), 2.0, 64)], vec![]);
        let q = orthopoly_varying(&circle, &f, &ExternalField::Zero, 4, P).unwrap();
        let pade = pade_denominator(&laurent_moments(&f, 4, P).unwrap(), 4).unwrap();
        for (a, b) in q.coeffs.iter().zip(&pade.coeffs) {
            assert!(abs_f64(&(a.clone() - b)) <= 1e-10);
        }

        let seg = ContourSystem::segment(c64(-2.0, 0.0), c64(2.0, 0.0));
        let field = ExternalField::quadratic(c64(1.0, 0.0));
        let q = orthopoly_varying(&seg, &BranchSpec::one(), &field, 8, P).unwrap();
        assert!(q.moment_residual <= 1e-10);
        assert!(q.zeros.iter().all(|z| z.re.abs() <= 1.05 && z.im.abs() < 1e-10));
        for k in (1..8).step_by(2) {
            assert!(abs_f64(&q.coeffs[k]) <= 1e-10);
        }
        let eq = crate::measures::solve_equilibrium(&seg, &field, 1.0, 400, 1e-10).unwrap();
        let probes = [c64(2.0, 0.0), c64(0.0, 1.5), c64(-1.5, 0.5)];
        let d = weak_star_distance(&zero_counting(&q).unwrap(), &eq.measure, &probes).unwrap();
        assert!(d <= 2e-2, "{d}");
    }

    #[test]
    fn heine_stieltjes_examples() {
        let a = poly::real(&[-1.0, 0.0, 1.0]);
        let b = poly::real(&[0.0, 2.0]);
        let hs = heine_stieltjes(&a, &b, 2, 1).unwrap();
        assert_eq!(hs.len(), 1);
        assert!((hs[0].v[0] - 1.0).norm() <= 1e-10);
        let expect = [-1.0 / 3.0, 0.0, 1.0];
        for (c, e) in hs[0].q.coeffs.iter().zip(expect) {
            assert!(abs_f64(&(c.clone() - e)) <= 1e-10);
        }
        for n in [3, 5] {
            assert_eq!(heine_stieltjes(&a, &b, n, 1).unwrap().len(), 1);
        }
        // higher degrees must not lose zeros to infinity
        for n in [16, 24] {
            let hs = heine_stieltjes(&a, &b, n, 0).unwrap();
            assert_eq!(hs.len(), 1, "n = {n}");
            assert!(hs[0].q.zeros.iter().all(|z| z.re.abs() < 1.0 && z.im.abs() < 1e-12));
        }

        let a = poly::real(&[0.0, -1.0, 0.0, 1.0]);
        let b = poly::real(&[-1.0, 0.0, 3.0]);
        let hs = heine_stieltjes(&a, &b, 2, 1).unwrap();
        assert_eq!(hs.len(), 3);
        let vs: Vec<C64> = hs.iter().map(|h| -h.v[0]).collect();
        for h in &hs {
            assert!(h.residual <= 1e-10);
            let v = -h.v[0];
            assert!(v.norm() < 1e-8 || vs.iter().any(|w| (w + v).norm() < 1e-8));
        }
    }

    #[test]
    fn counting_and_probes() {
        let q = PolyRecord::from_zeros(&[c64(-1.0, 0.0), c64(1.0, 0.0)], P);
        let mu = zero_counting(&q).unwrap();
        assert_eq!(mu.weights(), &[0.5, 0.5]);
        let origin = PolyRecord::from_zeros(&[c64(0.0, 0.0); 6], P);
        let mu0 = zero_counting(&origin).unwrap();
        assert_eq!(mu0.len(), 1);
        assert!((mu0.weights()[0] - 1.0).abs() < 1e-15);

        let arcsine = DiscreteMeasure::arcsine(2000);
        let d = weak_star_distance(&arcsine, &mu, &[c64(2.0, 0.0)]).unwrap();
        assert!((d - 0.074_56).abs() < 1e-4, "{d}");
        assert_eq!(weak_star_distance(&mu, &mu, &[c64(2.0, 0.0)]).unwrap(), 0.0);
        assert!(matches!(weak_star_distance(&mu, &mu, &[c64(1.05, 0.0)]), Err(Error::ProbeTooClose(_))));

        let probes = [c64(2.0, 0.0), c64(0.5, 0.15), c64(-0.3, -0.2)];
        let chebyshev = |n: usize| {
            let z: Vec<C64> =
                (0..n).map(|k| c64((std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos(), 0.0)).collect();
            PolyRecord::from_zeros(&z, P)
        };
        let mut last = f64::INFINITY;
        for n in [5, 10, 20] {
            let d = weak_star_distance(&zero_counting(&chebyshev(n)).unwrap(), &arcsine, &probes).unwrap();
            assert!(d < last);
            last = d;
        }
        let (r, _) = nth_root_check(&chebyshev(20), &arcsine, &[c64(2.0, 0.0)]).unwrap();
        assert!(r <= 0.05);
        let mut last = f64::INFINITY;
        for n in [5, 10, 20, 40] {
            let (r, _) = nth_root_check(&chebyshev(n), &arcsine, &probes).unwrap();
            assert!(r < last, "{n} {r}");
            last = r;
        }
        let (r, _) =
            nth_root_check(&origin, &DiscreteMeasure::dirac(c64(0.0, 0.0)), &[c64(1.0, 1.0), c64(-3.0, 0.5)]).unwrap();
        assert!(r < 1e-15);
    }
}
