//! Bernstein-Szegő model on [-1, 1]: the Szegő function of a weight, the
//! exterior approximation `W_n`, and its electrostatic form through an
//! equilibrium measure of mass `n`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::contours::ContourSystem;
use crate::fields::ExternalField;
use crate::measures::{solve_equilibrium, DiscreteMeasure, EquilibriumResult};
use crate::orthopoly::PolyRecord;
use crate::{mp, poly, Error, Result, C64};

/// `w(x) = scale · (1-x)^α (1+x)^β · p(x) · exp(-flat/(1-x²))` on [-1, 1],
/// with `p` a polynomial positive on the interval (ascending coefficients;
/// empty means 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub scale: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub factor: Vec<f64>,
    #[serde(default)]
    pub flat: f64,
}

impl Weight {
    pub fn jacobi(alpha: f64, beta: f64) -> Self {
        Self { scale: 1.0, alpha, beta, factor: vec![], flat: 0.0 }
    }

    pub fn unit() -> Self {
        Self::jacobi(0.0, 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self { scale: c, ..Self::unit() }
    }

    /// `√(1 - x²)`.
    pub fn chebyshev_u() -> Self {
        Self::jacobi(0.5, 0.5)
    }

    pub fn with_factor(mut self, factor: Vec<f64>) -> Self {
        self.factor = factor;
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.log(x).exp()
    }

    pub fn log(&self, x: f64) -> f64 {
        self.log_parts(1.0 - x, 1.0 + x, x)
    }

    /// `log w(cos θ)` with `1 ∓ cos θ` formed from half-angle sines so the
    /// endpoint factors keep full relative accuracy.
    pub fn log_at_angle(&self, theta: f64) -> f64 {
        let (s, c) = (0.5 * theta).sin_cos();
        self.log_parts(2.0 * s * s, 2.0 * c * c, theta.cos())
    }

    fn log_parts(&self, one_minus: f64, one_plus: f64, x: f64) -> f64 {
        let mut g = self.scale.ln();
        if self.alpha != 0.0 {
            g += self.alpha * one_minus.ln();
        }
        if self.beta != 0.0 {
            g += self.beta * one_plus.ln();
        }
        if !self.factor.is_empty() {
            g += self.factor.iter().rev().fold(0.0, |acc, c| acc * x + c).ln();
        }
        if self.flat != 0.0 {
            g -= self.flat / (one_minus * one_plus);
        }
        g
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || self.alpha <= -1.0 || self.beta <= -1.0 {
            return Err(Error::Invalid("weight must be positive and integrable".into()));
        }
        if self.flat > 0.0 {
            return Err(Error::SzegoConditionFails("log w has a non-integrable flat zero at the endpoints".into()));
        }
        for r in self.factor_roots() {
            if r.im.abs() < 1e-12 && r.re.abs() <= 1.0 {
                return Err(Error::Invalid(format!("factor vanishes at {} inside the interval", r.re)));
            }
        }
        if self.factor.iter().rev().fold(0.0, |acc, c| acc * 0.0 + c) <= 0.0 && !self.factor.is_empty() {
            return Err(Error::Invalid("factor must be positive on the interval".into()));
        }
        Ok(())
    }

    fn factor_roots(&self) -> Vec<C64> {
        poly::roots(&poly::real(&self.factor))
    }

    /// `φ₀ = ½ log(1/w₀)` with `w₀ = √(1-x²) w`, up to an additive constant.
    pub fn trigonometric_field(&self) -> Result<ExternalField> {
        self.validate()?;
        let mut charges =
            vec![(C64::new(1.0, 0.0), 0.25 + 0.5 * self.alpha), (C64::new(-1.0, 0.0), 0.25 + 0.5 * self.beta)];
        charges.extend(self.factor_roots().into_iter().map(|r| (r, 0.5)));
        ExternalField::log_charges(charges)
    }
}

/// Nodes and weights on `[a, b]` after a polynomial change of variables
/// whose derivative vanishes to third order at both ends.
fn graded_rule(a: f64, b: f64) -> Vec<(f64, f64)> {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    let (x, w) = RULE.get_or_init(|| crate::quad::gauss_legendre(160));
    x.iter()
        .zip(w)
        .map(|(xi, wi)| {
            let t = 0.5 * (xi + 1.0);
            let map = t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t.powi(3));
            let jac = 140.0 * (t * (1.0 - t)).powi(3);
            (a + (b - a) * map, jac * 0.5 * wi * (b - a))
        })
        .collect()
}

fn graded(a: f64, b: f64, f: impl Fn(f64) -> C64) -> C64 {
    graded_rule(a, b).into_iter().map(|(t, w)| f(t) * w).sum()
}

fn exterior_sqrt(z: C64) -> C64 {
    (z - 1.0).sqrt() * (z + 1.0).sqrt()
}

/// `∫_0^π log w(cos θ) / (z - cos θ) dθ`; near the interval the value of
/// `log w` at `Re z` is subtracted and integrated in closed form.
fn szego_integral(w: &Weight, z: C64) -> C64 {
    let near = z.re.abs() < 1.0 && z.im.abs() < 0.5;
    let theta0 = if near { z.re.acos() } else { 0.5 * PI };
    let g0 = if near { w.log(z.re) } else { 0.0 };
    let f = |t: f64| C64::new(w.log_at_angle(t) - g0, 0.0) / (z - t.cos());
    let mut s = graded(0.0, theta0, f) + graded(theta0, PI, f);
    if near {
        s += g0 * PI / exterior_sqrt(z);
    }
    s
}

/// `log D(∞) = -(1/2π) ∫_0^π log w(cos θ) dθ`.
pub fn log_d_infinity(w: &Weight) -> Result<f64> {
    w.validate()?;
    let v = (graded(0.0, 0.5 * PI, |t| C64::new(w.log_at_angle(t), 0.0))
        + graded(0.5 * PI, PI, |t| C64::new(w.log_at_angle(t), 0.0)))
    .re;
    if !v.is_finite() {
        return Err(Error::SzegoConditionFails(format!("∫ log w dθ = {v}")));
    }
    Ok(-v / (2.0 * PI))
}

/// Szegő function: analytic off [-1, 1], positive at infinity, with
/// `|D^±|^{-2} = w` on the interval.
pub fn szego_function(w: &Weight, z: C64) -> Result<C64> {
    w.validate()?;
    if z.im == 0.0 && z.re.abs() <= 1.0 {
        return Err(Error::SingularPoint(z));
    }
    let s = szego_integral(w, z);
    let v = (-exterior_sqrt(z) * s / (2.0 * PI)).exp();
    if !v.is_finite() {
        return Err(Error::SzegoConditionFails(format!("D({z}) is not finite")));
    }
    Ok(v)
}

/// `D^±(x)` as the limit from `x ± iε`, Richardson-extrapolated from
/// `ε = 0.01 · 2^{-k}`, `k = 0..4`.
pub fn boundary_value(w: &Weight, x: f64, side: f64) -> Result<C64> {
    let mut table: Vec<C64> = (0..4)
        .map(|k| szego_function(w, C64::new(x, side.signum() * 0.01 / f64::powi(2.0, k))))
        .collect::<Result<_>>()?;
    for round in 1..4 {
        let f = f64::powi(2.0, round);
        table = table.windows(2).map(|p| (f * p[1] - p[0]) / (f - 1.0)).collect();
    }
    Ok(table[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SzegoModel {
    pub weight: Weight,
    pub n: usize,
    pub d_infinity: f64,
    /// `1 / (2^{n+1/2} D(∞))`.
    pub c_n: f64,
}

impl SzegoModel {
    pub fn new(weight: Weight, n: usize) -> Result<Self> {
        let d_infinity = log_d_infinity(&weight)?.exp();
        let c_n = 1.0 / (f64::powf(2.0, n as f64 + 0.5) * d_infinity);
        Ok(Self { weight, n, d_infinity, c_n })
    }
}

/// `W_n(z) = C_n D(z) (z²-1)^{-1/4} (z + √(z²-1))^{n+1/2}`, computed as
/// `C_n D w^n (2w²/(w²-1))^{1/2}` with `w = z + √(z²-1)`.
pub fn build_wn(model: &SzegoModel, z: C64) -> Result<C64> {
    let d = szego_function(&model.weight, z)?;
    let w = z + exterior_sqrt(z);
    let tail = (2.0 * w * w / (w * w - 1.0)).sqrt();
    Ok(model.c_n * d * w.powu(model.n as u32) * tail)
}

/// How `λ_n` is built from the weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Equilibrium of mass `n` in `φ₀ = ½ log(1/w₀)`, `w₀ = √(1-x²) w`.
    #[default]
    Positive,
    /// The endpoint charges `a, b` of `φ₀` traded for atoms `-a δ(1) - b δ(-1)`
    /// next to an equilibrium of mass `n + a + b` in the remaining field.
    /// For `w ≡ 1` this is `λ̃ - ¼δ(1) - ¼δ(-1)`.
    Signed,
}

/// The measure `λ_n` and the interior model `A_n(x) cos Φ_n(x)` built from it.
#[derive(Debug, Clone)]
pub struct ElectrostaticModel {
    /// Positive part of `λ_n`.
    pub lambda_n: DiscreteMeasure,
    /// Cell intervals `[lo, hi]` carrying each atom of `lambda_n`.
    pub cells: Vec<(f64, f64)>,
    /// Masses removed at `1` and `-1` (zero for [`Construction::Positive`]).
    pub endpoint_atoms: (f64, f64),
    pub weight: Weight,
    /// Amplitude constant `2 C_n`; the factor 2 collects `W⁺ + W⁻`.
    pub amplitude: f64,
    pub equilibrium: EquilibriumResult,
}

impl ElectrostaticModel {
    /// `A_n(x) = 2 C_n w₀(x)^{-1/2}`.
    pub fn a_n(&self, x: f64) -> f64 {
        self.amplitude * ((1.0 - x * x).sqrt() * self.weight.eval(x)).powf(-0.5)
    }

    /// `λ_n([x, 1])`, atoms of the positive part spread over their cells.
    pub fn mass_above(&self, x: f64) -> f64 {
        let spread: f64 = self
            .lambda_n
            .weights()
            .iter()
            .zip(&self.cells)
            .map(|(&m, &(lo, hi))| m * ((hi - x) / (hi - lo)).clamp(0.0, 1.0))
            .sum();
        let (top, bottom) = self.endpoint_atoms;
        spread - if x <= 1.0 { top } else { 0.0 } - if x <= -1.0 { bottom } else { 0.0 }
    }

    /// `Φ_n(x) = π λ_n([x, 1])`.
    pub fn phi_n(&self, x: f64) -> f64 {
        PI * self.mass_above(x)
    }

    pub fn model(&self, x: f64) -> f64 {
        self.a_n(x) * self.phi_n(x).cos()
    }
}

/// `λ_n` on [-1, 1] for the model's weight and degree.
pub fn electrostatic_model(
    model: &SzegoModel,
    n_nodes: usize,
    construction: Construction,
) -> Result<ElectrostaticModel> {
    let field = model.weight.trigonometric_field()?;
    let (field, mass, atoms) = match (construction, &field) {
        (Construction::Signed, ExternalField::LogCharges { charges }) => {
            let (top, bottom) = (charges[0].alpha, charges[1].alpha);
            let rest: Vec<(C64, f64)> = charges[2..].iter().map(|c| (c.at, c.alpha)).collect();
            let field = if rest.is_empty() { ExternalField::Zero } else { ExternalField::log_charges(rest)? };
            (field, model.n as f64 + top + bottom, (top, bottom))
        }
        _ => (field, model.n as f64, (0.0, 0.0)),
    };
    let seg = ContourSystem::segment(C64::new(-1.0, 0.0), C64::new(1.0, 0.0));
    let eq = solve_equilibrium(&seg, &field, mass, n_nodes, 1e-10)?;
    let cells = eq.nodes.nodes.iter().zip(&eq.nodes.cells).map(|(z, s)| (z.re - 0.5 * s, z.re + 0.5 * s)).collect();
    Ok(ElectrostaticModel {
        lambda_n: eq.measure.clone(),
        cells,
        endpoint_atoms: atoms,
        weight: model.weight.clone(),
        amplitude: 2.0 * model.c_n,
        equilibrium: eq,
    })
}

/// `max |Q_n(x) - A_n cos Φ_n(x)| / max |A_n cos Φ_n(x)|` over the probes.
pub fn compare_interior(model: &ElectrostaticModel, q: &PolyRecord, probes_x: &[f64]) -> f64 {
    let coeffs = q.coeffs_f64();
    let mut err: f64 = 0.0;
    let mut size: f64 = 0.0;
    for &x in probes_x {
        let m = model.model(x);
        err = err.max((poly::eval(&coeffs, C64::new(x, 0.0)).re - m).abs());
        size = size.max(m.abs());
    }
    err / size.max(f64::MIN_POSITIVE)
}

/// `λ_n` mass between consecutive real zeros.
pub fn counting_between_zeros(model: &ElectrostaticModel, zeros: &[f64]) -> Vec<f64> {
    let mut z = zeros.to_vec();
    z.sort_by(f64::total_cmp);
    z.windows(2).map(|p| model.mass_above(p[0]) - model.mass_above(p[1])).collect()
}

/// Monic `P_n` from `P_{k+1} = (x - a_k) P_k - γ_k P_{k-1}` with
/// `(a_k, γ_k) = coef(k)`, in extended precision.
pub fn recurrence(n: usize, coef: impl Fn(usize) -> (f64, f64), precision: u32) -> PolyRecord {
    let mut prev: Vec<rug::Complex> = vec![];
    let mut cur = vec![mp::one(precision)];
    for k in 0..n {
        let (a, gamma) = coef(k);
        let mut next = vec![mp::zero(precision); k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c.clone() * a;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c.clone() * gamma;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    let zeros: Vec<C64> = mp::roots(&cur).iter().map(mp::to_c64).collect();
    let mut rec = PolyRecord::from_zeros(&zeros, precision);
    rec.coeffs = cur;
    rec
}

/// Recurrence coefficients of the monic orthogonal polynomials of `w` by
/// the discretized Stieltjes procedure on a graded rule in `θ = arccos x`.
pub fn recurrence_coefficients(w: &Weight, n: usize) -> Result<Vec<(f64, f64)>> {
    w.validate()?;
    let nodes: Vec<(f64, f64)> = [(0.0, 0.5 * PI), (0.5 * PI, PI)]
        .into_iter()
        .flat_map(|(lo, hi)| graded_rule(lo, hi))
        .map(|(t, m)| (t.cos(), m * w.log_at_angle(t).exp() * t.sin()))
        .collect();
    let mut p_prev = vec![0.0; nodes.len()];
    let mut p = vec![1.0; nodes.len()];
    let mut norm_prev = 1.0;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let norm: f64 = nodes.iter().zip(&p).map(|((_, m), v)| m * v * v).sum();
        let a = nodes.iter().zip(&p).map(|((x, m), v)| m * x * v * v).sum::<f64>() / norm;
        let gamma = if k == 0 { 0.0 } else { norm / norm_prev };
        out.push((a, gamma));
        let next: Vec<f64> =
            nodes.iter().zip(p.iter().zip(&p_prev)).map(|((x, _), (v, u))| (x - a) * v - gamma * u).collect();
        p_prev = std::mem::replace(&mut p, next);
        norm_prev = norm;
    }
    Ok(out)
}

/// Monic orthogonal polynomial of degree `n` for the weight `w`.
pub fn orthogonal_polynomial(w: &Weight, n: usize) -> Result<PolyRecord> {
    let coef = recurrence_coefficients(w, n)?;
    Ok(recurrence(n, |k| coef[k], mp::DEFAULT_PRECISION))
}

/// Monic Legendre polynomial.
pub fn legendre(n: usize) -> PolyRecord {
    recurrence(n, |k| (0.0, (k * k) as f64 / (4 * k * k).saturating_sub(1).max(1) as f64), mp::DEFAULT_PRECISION)
}

/// Monic Chebyshev polynomial of the second kind, `2^{-n} U_n`.
pub fn chebyshev_u(n: usize) -> PolyRecord {
    recurrence(n, |k| (0.0, if k == 0 { 0.0 } else { 0.25 }), mp::DEFAULT_PRECISION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn szego_function_examples() {
        for z in [c64(2.0, 0.0), c64(0.3, 0.7), c64(-1.5, -0.2)] {
            assert!((szego_function(&Weight::unit(), z).unwrap() - 1.0).norm() < 1e-14);
            let d = szego_function(&Weight::constant(4.0), z).unwrap();
            assert!((d - 0.5).norm() < 1e-12, "{d}");
        }
        let w = Weight::jacobi(1.0, 1.0);
        for x in [0.0, 0.5, -0.5] {
            for side in [1.0, -1.0] {
                let d = boundary_value(&w, x, side).unwrap();
                assert!((d.norm().powi(-2) - w.eval(x)).abs() <= 1e-6, "{x} {side} {}", d.norm().powi(-2));
            }
        }
        let bad = Weight { flat: 1.0, ..Weight::unit() };
        assert!(matches!(szego_function(&bad, c64(2.0, 0.0)), Err(Error::SzegoConditionFails(_))));
    }

    #[test]
    fn smooth_weight_round_trip() {
        use rand::{Rng, SeedableRng};
        let w = Weight::unit().with_factor(vec![2.0, 0.5, 0.3]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: f64 = rng.gen_range(-0.95..0.95);
            let d = boundary_value(&w, x, if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).unwrap();
            assert!((d.norm().powi(-2) - w.eval(x)).abs() <= 1e-4);
        }
        assert!(SzegoModel::new(w, 3).unwrap().d_infinity > 0.0);
    }

    #[test]
    fn wn_examples() {
        let model = SzegoModel::new(Weight::unit(), 20).unwrap();
        let z = c64(2.0, 0.0);
        let ratio = legendre(20).eval(z) / build_wn(&model, z).unwrap();
        assert!((ratio - 1.0).norm() <= 0.05, "{ratio}");

        let model = SzegoModel::new(Weight::chebyshev_u(), 10).unwrap();
        let ratio = chebyshev_u(10).eval(z) / build_wn(&model, z).unwrap();
        assert!((ratio - 1.0).norm() <= 1e-3, "{ratio}");

        let far = c64(1e4, 3e3);
        let r = build_wn(&model, far).unwrap() / far.powu(10);
        assert!((r - 1.0).norm() < 1e-3);
    }

    #[test]
    fn electrostatic_examples() {
        let n = 20;
        let model = SzegoModel::new(Weight::unit(), n).unwrap();
        let em = electrostatic_model(&model, 400, Construction::Positive).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=40 {
            let x = -0.9 + 1.8 * k as f64 / 40.0;
            worst = worst.max((em.phi_n(x) - ((n as f64 + 0.5) * x.acos() - PI / 4.0)).abs());
        }
        assert!(worst <= 2e-2, "{worst}");
        assert_eq!(em.phi_n(1.0), 0.0);
        assert!((em.phi_n(-1.0) - PI * n as f64).abs() <= PI);

        let probes: Vec<f64> = (0..=32).map(|k| -0.8 + 1.6 * k as f64 / 32.0).collect();
        let fit = compare_interior(&em, &legendre(n), &probes);
        assert!(fit <= 0.1, "{fit}");

        let zeros: Vec<f64> = legendre(n).zeros.iter().map(|z| z.re).collect();
        let counts = counting_between_zeros(&em, &zeros);
        for c in &counts[1..counts.len() - 1] {
            assert!((c - 1.0).abs() <= 0.1, "{c}");
        }

        let model = SzegoModel::new(Weight::chebyshev_u(), 10).unwrap();
        let signed = electrostatic_model(&model, 400, Construction::Signed).unwrap();
        let fit = compare_interior(&signed, &chebyshev_u(10), &probes);
        assert!(fit <= 1e-2, "{fit}");
        // the positive model shrinks its support away from the charged ends
        let positive = electrostatic_model(&model, 400, Construction::Positive).unwrap();
        let fit = compare_interior(&positive, &chebyshev_u(10), &probes);
        assert!(fit > 3e-2 && fit < 6e-2, "{fit}");
    }

    #[test]
    fn stieltjes_matches_closed_forms() {
        for (w, q) in [(Weight::unit(), legendre(12)), (Weight::chebyshev_u(), chebyshev_u(9))] {
            let n = q.degree();
            let p = orthogonal_polynomial(&w, n).unwrap();
            for (a, b) in p.coeffs_f64().iter().zip(q.coeffs_f64()) {
                assert!((a - b).norm() < 1e-12, "{a} {b}");
            }
        }
        let jac = orthogonal_polynomial(&Weight::jacobi(-0.5, -0.5), 6).unwrap();
        let t6 = [-1.0 / 32.0, 0.0, 18.0 / 32.0, 0.0, -48.0 / 32.0, 0.0, 1.0];
        for (a, b) in jac.coeffs_f64().iter().zip(t6) {
            assert!((a.re - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn signed_unit_weight_is_shifted_arcsine() {
        let model = SzegoModel::new(Weight::unit(), 8).unwrap();
        let em = electrostatic_model(&model, 400, Construction::Signed).unwrap();
        assert_eq!(em.endpoint_atoms, (0.25, 0.25));
        for x in [-0.7, 0.0, 0.4] {
            assert!((em.phi_n(x) - (8.5 * f64::acos(x) - PI / 4.0)).abs() < 1e-2);
        }
    }
}
