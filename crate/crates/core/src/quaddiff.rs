//! The quadratic differential `-R(z) dz²` of a critical measure: evaluation,
//! rational fits, trajectories, periods and Chebotarev continua.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::contours::{Arc, ContourSystem};
use crate::fields::ExternalField;
use crate::measures::{cauchy_transform, solve_equilibrium, DiscreteMeasure};
use crate::{poly, Error, Result, C64};

/// Relative misfit above which a rational fit is rejected.
pub const FIT_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadDiff {
    /// `(C^μ + Φ')²`, evaluated from the measure.
    FromMeasure {
        measure: DiscreteMeasure,
        field: ExternalField,
        /// Unit tangent and spacing at each node, estimated from the nearest
        /// neighbour; used to average across the support.
        frames: Vec<(C64, f64)>,
    },
    /// `numerator / denominator`, ascending coefficients.
    Rational { numerator: Vec<C64>, denominator: Vec<C64>, fit_residual: f64, poles: Vec<C64> },
}

/// `R = (C^μ + Φ')²` for a measure and field.
pub fn build_r(mu: &DiscreteMeasure, field: &ExternalField) -> QuadDiff {
    let nodes = mu.nodes();
    let frames = crate::par::map_range(nodes.len(), |i| {
        let mut best = (f64::INFINITY, C64::new(1.0, 0.0));
        for (j, &q) in nodes.iter().enumerate() {
            let d = (q - nodes[i]).norm();
            if j != i && d < best.0 {
                best = (d, (q - nodes[i]) / d);
            }
        }
        (best.1, best.0)
    });
    QuadDiff::FromMeasure { measure: mu.clone(), field: field.clone(), frames }
}

impl QuadDiff {
    /// Plain evaluation; errors at atoms and poles.
    pub fn eval_raw(&self, z: C64) -> Result<C64> {
        match self {
            QuadDiff::FromMeasure { measure, field, .. } => {
                if field.is_singular(z) {
                    return Err(Error::SingularPoint(z));
                }
                let c = cauchy_transform(measure, z)? + field.deriv_unchecked(z);
                Ok(c * c)
            }
            QuadDiff::Rational { numerator, denominator, .. } => {
                let d = poly::eval(denominator, z);
                if d.norm() == 0.0 {
                    return Err(Error::SingularPoint(z));
                }
                Ok(poly::eval(numerator, z) / d)
            }
        }
    }

    /// Evaluation that averages `R(ζ ± ε n)` when `z` lies within two node
    /// spacings of the discrete support (`ε` = three spacings), so points on
    /// the support get the common boundary value of both sides.
    pub fn eval(&self, z: C64) -> Result<C64> {
        if let QuadDiff::FromMeasure { measure, frames, .. } = self {
            let nearest =
                measure.nodes().iter().enumerate().map(|(i, q)| (i, (z - q).norm())).min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, d)) = nearest {
                let (tangent, spacing) = frames[i];
                if spacing.is_finite() && d < 2.0 * spacing {
                    let q = measure.nodes()[i];
                    let along = ((z - q) * tangent.conj()).re;
                    let foot = q + tangent * along;
                    let n = tangent * C64::new(0.0, 3.0 * spacing);
                    return Ok(0.5 * (self.eval_raw(foot + n)? + self.eval_raw(foot - n)?));
                }
            }
        }
        self.eval_raw(z)
    }

    /// Known zeros and poles (rational form only).
    pub fn critical_points(&self) -> Vec<C64> {
        match self {
            QuadDiff::FromMeasure { .. } => vec![],
            QuadDiff::Rational { numerator, poles, .. } => {
                let mut c = poly::roots(numerator);
                c.extend(poles.iter().copied());
                c
            }
        }
    }

    pub fn rational(numerator: Vec<C64>, denominator: Vec<C64>) -> QuadDiff {
        let poles = poly::roots(&denominator);
        QuadDiff::Rational { numerator, denominator, fit_residual: 0.0, poles }
    }
}

/// Two-sided limits of `R` at `ζ` along `±n`, each extrapolated from
/// `R(ζ ± kε n)`, `k = 1, 2, 3` (exact for quadratics).
fn side_limits(r: &QuadDiff, zeta: C64, n: C64, eps: f64) -> Result<(C64, C64)> {
    let lim = |s: f64| -> Result<C64> {
        let f = |k: f64| r.eval_raw(zeta + n * (s * k * eps));
        Ok(3.0 * f(1.0)? - 3.0 * f(2.0)? + f(3.0)?)
    };
    Ok((lim(1.0)?, lim(-1.0)?))
}

/// Largest relative jump `|R⁺ - R⁻| / (1 + |R⁺|)` across the contour over
/// probes in the middle 80% of every arc.
pub fn holomorphy_residual(r: &QuadDiff, contour: &ContourSystem, offset: f64) -> Result<f64> {
    let mut probes = Vec::new();
    for g in contour.geoms() {
        if g.is_point() {
            continue;
        }
        let len = g.length();
        for k in 0..=64 {
            probes.push(g.at_length(len * (0.1 + 0.8 * k as f64 / 64.0)));
        }
    }
    let vals = crate::par::map_slice(&probes, |&(z, t)| -> Result<f64> {
        let (plus, minus) = side_limits(r, z, t * C64::new(0.0, 1.0), offset)?;
        Ok((plus - minus).norm() / (1.0 + plus.norm()))
    });
    vals.into_iter().try_fold(0.0, |acc, v| Ok(f64::max(acc, v?)))
}

/// Least-squares fit of `R·A` (zero field) or `R·A²` (charges at the
/// anchors) by a polynomial of degree `p - 2` or `2p - 2`.
pub fn fit_rational_r(r: &QuadDiff, field: &ExternalField, anchors: &[C64]) -> Result<QuadDiff> {
    let p = anchors.len();
    if p < 2 {
        return Err(Error::Invalid("at least two anchors required".into()));
    }
    let (power, deg) = match field {
        ExternalField::Zero => (1, p - 2),
        ExternalField::LogCharges { .. } => (2, 2 * p - 2),
        ExternalField::Polynomial { .. } => {
            return Err(Error::Invalid("rational fits need a zero or log-charge field".into()))
        }
    };
    let a = poly::from_roots(anchors);
    let denom = (1..power).fold(a.clone(), |acc, _| poly::mul(&acc, &a));
    let mut extent: Vec<C64> = anchors.to_vec();
    if let QuadDiff::FromMeasure { measure, .. } = r {
        extent.extend(measure.nodes().iter().copied());
    }
    let center = extent.iter().sum::<C64>() / extent.len() as f64;
    let radius = 2.0 * extent.iter().map(|z| (z - center).norm()).fold(0.0, f64::max).max(1e-3);
    let m = 64;
    let samples: Vec<C64> =
        (0..m).map(|k| center + C64::from_polar(radius, std::f64::consts::TAU * k as f64 / m as f64)).collect();
    let values: Vec<C64> =
        samples.iter().map(|&z| Ok(r.eval_raw(z)? * poly::eval(&denom, z))).collect::<Result<_>>()?;
    // basis ((z - c)/ρ)^k is orthonormal for equispaced samples on the circle
    let mut local = vec![C64::new(0.0, 0.0); deg + 1];
    for (k, coef) in local.iter_mut().enumerate() {
        *coef =
            samples.iter().zip(&values).map(|(z, v)| v * ((z - center) / radius).powu(k as u32).conj()).sum::<C64>()
                / m as f64;
    }
    // expand Σ b_k ((z - c)/ρ)^k into monomials
    let mut numerator = vec![C64::new(0.0, 0.0); deg + 1];
    let shift = [-center / radius, C64::new(1.0 / radius, 0.0)];
    let mut basis = vec![C64::new(1.0, 0.0)];
    for b in &local {
        for (i, c) in basis.iter().enumerate() {
            numerator[i] += b * c;
        }
        basis = poly::mul(&basis, &shift);
    }
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let residual =
        samples.iter().zip(&values).map(|(&z, v)| (poly::eval(&numerator, z) - v).norm()).fold(0.0, f64::max) / scale;
    if residual > FIT_TOL {
        return Err(Error::NotRational(residual));
    }
    Ok(QuadDiff::Rational { numerator, denominator: denom, fit_residual: residual, poles: anchors.to_vec() })
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Critical,
    Closed,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxLength,
    CriticalPoint,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<C64>,
    pub kind: TrajectoryKind,
    pub start: C64,
    pub terminated: Termination,
    /// Critical point the trajectory ran into, when known.
    pub end_point: Option<C64>,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Unit direction `i/√R` with the sign closest to `reference`.
fn direction(r: &QuadDiff, z: C64, reference: C64) -> Option<C64> {
    let v = r.eval_raw(z).ok()?;
    if !(v.norm() > 0.0) || !v.is_finite() {
        return None;
    }
    let u = C64::new(0.0, 1.0) / v.sqrt();
    let u = u / u.norm();
    Some(if (u * reference.conj()).re >= 0.0 { u } else { -u })
}

fn rk4(r: &QuadDiff, z: C64, dir: C64, h: f64) -> Option<(C64, C64)> {
    let k1 = direction(r, z, dir)?;
    let k2 = direction(r, z + k1 * (0.5 * h), k1)?;
    let k3 = direction(r, z + k2 * (0.5 * h), k2)?;
    let k4 = direction(r, z + k3 * h, k3)?;
    let next = z + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
    // reject steps across which the field turns sharply (sheet jumps)
    if (k4 * k1.conj()).re < 0.7 {
        return None;
    }
    Some((next, k4))
}

/// Integrates `dz/ds = ±i/√R` (unit speed) from `z0`.
pub fn trace_trajectory(r: &QuadDiff, z0: C64, sign: f64, max_len: f64) -> Result<Trajectory> {
    let v = r.eval_raw(z0)?;
    if v.norm() == 0.0 || !v.is_finite() {
        return Err(Error::SingularPoint(z0));
    }
    let u = C64::new(0.0, 1.0) / v.sqrt();
    trace_from(r, z0, u / u.norm() * sign.signum(), max_len)
}

/// Integrates from `z0` along the trajectory whose initial direction is
/// closest to `initial`.
pub fn trace_from(r: &QuadDiff, z0: C64, initial: C64, max_len: f64) -> Result<Trajectory> {
    let critical = r.critical_points();
    let scale = critical.iter().map(|c| c.norm()).fold(z0.norm(), f64::max).max(1.0);
    let h_min = 1e-11 * scale;
    let tol = 1e-11 * scale;
    let snap = 1e-7 * scale;
    let mut dir = direction(r, z0, initial).ok_or(Error::SingularPoint(z0))?;
    let start_dir = dir;
    let mut z = z0;
    let mut pts = vec![z0];
    let mut travelled = 0.0;
    let mut h = (1e-2 * max_len).min(0.05 * scale);
    let mut result = (Termination::MaxLength, None);
    loop {
        if travelled >= max_len {
            break;
        }
        if let Some(c) = critical.iter().copied().min_by(|a, b| (z - a).norm().total_cmp(&(z - b).norm())) {
            let d = (z - c).norm();
            if d < snap && travelled > 0.0 {
                pts.push(c);
                result = (Termination::CriticalPoint, Some(c));
                break;
            }
            h = h.min(0.5 * d);
        }
        h = h.min(max_len - travelled);
        let full = rk4(r, z, dir, h);
        let half = rk4(r, z, dir, 0.5 * h).and_then(|(m, d)| rk4(r, m, d, 0.5 * h));
        match (full, half) {
            (Some((zf, _)), Some((zh, dh))) if (zf - zh).norm() <= tol.max(1e-9 * h) => {
                z = zh;
                dir = dh;
                travelled += h;
                pts.push(z);
                h *= 1.5;
            }
            _ => {
                h *= 0.5;
                if h < h_min {
                    result = (Termination::CriticalPoint, None);
                    break;
                }
                continue;
            }
        }
        if travelled > 1e-2 && (z - z0).norm() < 1e-3 && (dir * start_dir.conj()).re > 0.0 {
            pts.push(z0);
            result = (Termination::Closed, None);
            break;
        }
        if pts.len() > 200_000 {
            break;
        }
    }
    let kind = match result.0 {
        Termination::CriticalPoint => TrajectoryKind::Critical,
        Termination::Closed => TrajectoryKind::Closed,
        Termination::MaxLength => TrajectoryKind::Generic,
    };
    Ok(Trajectory { points: pts, kind, start: z0, terminated: result.0, end_point: result.1 })
}

/// `√R` with the sign closest to `prev`.
fn continued_sqrt(r: &QuadDiff, z: C64, prev: Option<C64>) -> Result<C64> {
    let s = r.eval_raw(z)?.sqrt();
    Ok(match prev {
        Some(p) if (s * p.conj()).re < 0.0 => -s,
        _ => s,
    })
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// `∫ √R dz` over one straight piece, split until `arg R` changes by at
/// most π/4 between consecutive evaluation points.
fn piece_integral(r: &QuadDiff, a: C64, b: C64, prev: &mut Option<C64>, depth: usize) -> Result<C64> {
    let ra = r.eval_raw(a)?;
    let rb = r.eval_raw(b)?;
    let rm = r.eval_raw(0.5 * (a + b))?;
    let turn = (rm / ra).arg().abs().max((rb / rm).arg().abs());
    if turn > std::f64::consts::FRAC_PI_4 {
        if depth > 40 {
            return Err(Error::BranchTracking(format!("no convergence near {}", 0.5 * (a + b))));
        }
        let m = 0.5 * (a + b);
        return Ok(piece_integral(r, a, m, prev, depth + 1)? + piece_integral(r, m, b, prev, depth + 1)?);
    }
    let half = 0.5 * (b - a);
    let mut s = C64::new(0.0, 0.0);
    for (x, w) in GL8 {
        let z = a + half * (x + 1.0);
        let v = continued_sqrt(r, z, *prev)?;
        *prev = Some(v);
        s += v * w;
    }
    Ok(s * half)
}

/// `∫ √R dz` along a polyline with the branch continued along the path.
pub fn period(r: &QuadDiff, path: &[C64]) -> Result<C64> {
    let mut prev = None;
    let mut total = C64::new(0.0, 0.0);
    for w in path.windows(2) {
        total += piece_integral(r, w[0], w[1], &mut prev, 0)?;
    }
    Ok(total)
}

/// Largest `|Re ∫ √R dz|` from the start to any point of the polyline.
pub fn trajectory_drift(r: &QuadDiff, traj: &Trajectory) -> Result<f64> {
    let mut prev = None;
    let mut acc = C64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    let pts = &traj.points;
    for (k, w) in pts.windows(2).enumerate() {
        // the last piece may end exactly on a pole; stop just short of it
        let end =
            if k + 2 == pts.len() && traj.end_point.is_some() { w[0] + (w[1] - w[0]) * (1.0 - 1e-9) } else { w[1] };
        acc += piece_integral(r, w[0], end, &mut prev, 0)?;
        worst = worst.max(acc.re.abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Chebotarev continua

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Vertex {
    Anchor(usize),
    Junction(usize),
}

/// A tree connecting the anchors through junctions; `multiplicity[j]` is
/// the order of the zero of `V` at junction `j`.
#[derive(Debug, Clone)]
struct Topology {
    multiplicity: Vec<u32>,
    edges: Vec<(Vertex, Vertex)>,
    starts: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chebotarev {
    pub anchors: Vec<C64>,
    /// Zeros of `V`, repeated by multiplicity.
    pub zeros: Vec<C64>,
    /// Monic `V`, ascending coefficients.
    pub v_poly: Vec<C64>,
    pub contour: ContourSystem,
    /// Largest `|Re ∫ √(V/A) dz|` over the edges of the continuum.
    pub residual: f64,
    /// Equilibrium energy of the continuum (its Robin constant).
    pub energy: f64,
}

fn integrand(anchors: &[C64], zeros: &[(C64, u32)], z: C64) -> C64 {
    let v = zeros.iter().fold(C64::new(1.0, 0.0), |acc, &(c, m)| acc * (z - c).powu(m));
    v / poly::eval_roots(anchors, z)
}

/// `∫_p^q √(V/A) dz` along the straight segment, with the substitution
/// `z = p + (q - p)(1 - cos πs)/2` absorbing square-root endpoint behaviour.
fn edge_integral(anchors: &[C64], zeros: &[(C64, u32)], p: C64, q: C64) -> C64 {
    let (x, w) = gl64();
    let mut prev: Option<C64> = None;
    let mut s = C64::new(0.0, 0.0);
    for (xi, wi) in x.iter().zip(w.iter()) {
        let t = 0.5 * (xi + 1.0);
        let z = p + (q - p) * (0.5 * (1.0 - (std::f64::consts::PI * t).cos()));
        let dz = (q - p) * (0.5 * std::f64::consts::PI * (std::f64::consts::PI * t).sin());
        let mut f = integrand(anchors, zeros, z).sqrt();
        if let Some(pv) = prev {
            if (f * pv.conj()).re < 0.0 {
                f = -f;
            }
        }
        prev = Some(f);
        s += f * dz * (0.5 * wi);
    }
    s
}

fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| crate::quad::gauss_legendre(64))
}

fn positions(x: &[f64], anchors: &[C64], v: Vertex) -> C64 {
    match v {
        Vertex::Anchor(k) => anchors[k],
        Vertex::Junction(j) => C64::new(x[2 * j], x[2 * j + 1]),
    }
}

fn residuals(top: &Topology, anchors: &[C64], x: &[f64]) -> Vec<f64> {
    let zeros: Vec<(C64, u32)> =
        top.multiplicity.iter().enumerate().map(|(j, &m)| (C64::new(x[2 * j], x[2 * j + 1]), m)).collect();
    top.edges
        .iter()
        .map(|&(a, b)| edge_integral(anchors, &zeros, positions(x, anchors, a), positions(x, anchors, b)).re)
        .collect()
}

/// Gauss-Newton on the edge conditions from one start.
fn newton(top: &Topology, anchors: &[C64], start: &[C64], scale: f64) -> Option<(Vec<f64>, f64)> {
    let mut x: Vec<f64> = start.iter().flat_map(|z| [z.re, z.im]).collect();
    let norm = |r: &[f64]| r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut r = residuals(top, anchors, &x);
    for _ in 0..60 {
        if norm(&r) <= 1e-13 {
            break;
        }
        let h = 1e-7 * scale;
        let m = r.len();
        let n = x.len();
        let mut jac = nalgebra::DMatrix::<f64>::zeros(m, n);
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (rp, rm) = (residuals(top, anchors, &xp), residuals(top, anchors, &xm));
            for i in 0..m {
                jac[(i, c)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(&r);
        let step = jac.svd(true, true).solve(&rhs, 1e-12).ok()?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
            let too_close = (0..n / 2).any(|j| {
                let z = C64::new(trial[2 * j], trial[2 * j + 1]);
                anchors.iter().any(|a| (z - a).norm() < 1e-6 * scale)
            });
            if !too_close {
                let rt = residuals(top, anchors, &trial);
                if norm(&rt) < norm(&r) {
                    x = trial;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let res = norm(&r);
    res.is_finite().then_some((x, res))
}

/// Critical trajectories leaving a zero of order `m` of `V/A`.
fn trace_star(
    r: &QuadDiff,
    v: C64,
    m: u32,
    others: &[(C64, u32)],
    anchors: &[C64],
    scale: f64,
) -> Result<Vec<Trajectory>> {
    let c = others.iter().fold(C64::new(1.0, 0.0), |acc, &(w, k)| acc * (v - w).powu(k)) / poly::eval_roots(anchors, v);
    let rho = 1e-4 * scale;
    (0..m + 2)
        .map(|k| {
            let psi = (std::f64::consts::PI - c.arg() + std::f64::consts::TAU * k as f64) / (m + 2) as f64;
            let dir = C64::from_polar(1.0, psi);
            let mut t = trace_from(r, v + dir * rho, dir, 20.0 * scale)?;
            t.points.insert(0, v);
            t.start = v;
            Ok(t)
        })
        .collect()
}

fn topologies(anchors: &[C64], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Topology> {
    let p = anchors.len();
    let centroid = anchors.iter().sum::<C64>() / p as f64;
    let scale = anchors.iter().map(|a| (a - centroid).norm()).fold(0.0, f64::max);
    let mut jitter = |z: C64| z + C64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)) * scale;
    match p {
        3 => {
            let mut starts = vec![vec![centroid]];
            for a in &anchors[..3] {
                starts.push(vec![(centroid * 2.0 + a) / 3.0]);
            }
            for _ in 0..4 {
                starts.push(vec![jitter(centroid)]);
            }
            vec![Topology {
                multiplicity: vec![1],
                edges: (0..3).map(|k| (Vertex::Junction(0), Vertex::Anchor(k))).collect(),
                starts,
            }]
        }
        4 => {
            let mut out = Vec::new();
            for (i, j, k, l) in [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2)] {
                let c1 = (anchors[i] + anchors[j] + centroid) / 3.0;
                let c2 = (anchors[k] + anchors[l] + centroid) / 3.0;
                let mut starts = vec![vec![c1, c2], vec![(c1 + centroid) / 2.0, (c2 + centroid) / 2.0]];
                for _ in 0..4 {
                    starts.push(vec![jitter(c1), jitter(c2)]);
                }
                out.push(Topology {
                    multiplicity: vec![1, 1],
                    edges: vec![
                        (Vertex::Junction(0), Vertex::Anchor(i)),
                        (Vertex::Junction(0), Vertex::Anchor(j)),
                        (Vertex::Junction(1), Vertex::Anchor(k)),
                        (Vertex::Junction(1), Vertex::Anchor(l)),
                        (Vertex::Junction(0), Vertex::Junction(1)),
                    ],
                    starts,
                });
            }
            let mut starts = vec![vec![centroid]];
            for _ in 0..4 {
                starts.push(vec![jitter(centroid)]);
            }
            out.push(Topology {
                multiplicity: vec![2],
                edges: (0..4).map(|k| (Vertex::Junction(0), Vertex::Anchor(k))).collect(),
                starts,
            });
            out
        }
        _ => vec![],
    }
}

/// Assembles the continuum from critical trajectories leaving the zeros of
/// `V`; fails unless every trajectory ends on an anchor or another zero.
fn assemble(anchors: &[C64], zeros: &[(C64, u32)], scale: f64) -> Result<ContourSystem> {
    let v = zeros.iter().fold(vec![C64::new(1.0, 0.0)], |acc, &(c, m)| {
        (0..m).fold(acc, |a, _| poly::mul(&a, &[-c, C64::new(1.0, 0.0)]))
    });
    let r = QuadDiff::rational(v, poly::from_roots(anchors));
    let mut arcs: Vec<Arc> = Vec::new();
    let mut junction_links: Vec<(usize, usize)> = Vec::new();
    for (j, &(z, m)) in zeros.iter().enumerate() {
        let others: Vec<(C64, u32)> = zeros.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, &w)| w).collect();
        for t in trace_star(&r, z, m, &others, anchors, scale)? {
            let end = t
                .end_point
                .ok_or_else(|| Error::BranchTracking(format!("trajectory from {z} did not reach a critical point")))?;
            if let Some(k) = zeros.iter().position(|&(w, _)| (w - end).norm() < 1e-6 * scale) {
                let key = (j.min(k), j.max(k));
                if junction_links.contains(&key) {
                    continue;
                }
                junction_links.push(key);
            } else if !anchors.iter().any(|a| (a - end).norm() < 1e-6 * scale) {
                return Err(Error::BranchTracking(format!("trajectory ended at {end}, not an anchor")));
            }
            arcs.push(Arc::polyline(t.points));
        }
    }
    Ok(ContourSystem::new(arcs, anchors.to_vec()).with_max_components(1))
}

/// Minimal-capacity continuum through 2 to 4 anchors: the zeros of `V` and
/// the union of critical trajectories of `(V/A) dz²` joining them.
pub fn chebotarev_solve(anchors: &[C64]) -> Result<Chebotarev> {
    let p = anchors.len();
    if !(2..=4).contains(&p) {
        return Err(Error::Invalid(format!("2 to 4 anchors supported, got {p}")));
    }
    for (i, a) in anchors.iter().enumerate() {
        if anchors[i + 1..].iter().any(|b| (a - b).norm() < 1e-12) {
            return Err(Error::Invalid("anchors must be distinct".into()));
        }
    }
    let n_nodes = 400;
    if p == 2 {
        let contour = ContourSystem::segment(anchors[0], anchors[1]).with_max_components(1);
        let energy = solve_equilibrium(&contour, &ExternalField::Zero, 1.0, n_nodes, 1e-8)?.energy;
        return Ok(Chebotarev {
            anchors: anchors.to_vec(),
            zeros: vec![],
            v_poly: vec![C64::new(1.0, 0.0)],
            contour,
            residual: 0.0,
            energy,
        });
    }
    let centroid = anchors.iter().sum::<C64>() / p as f64;
    let scale = anchors.iter().map(|a| (a - centroid).norm()).fold(0.0, f64::max);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut best: Option<Chebotarev> = None;
    let mut best_residual = f64::INFINITY;
    for top in topologies(anchors, &mut rng) {
        for start in &top.starts {
            let Some((x, res)) = newton(&top, anchors, start, scale) else { continue };
            best_residual = best_residual.min(res);
            if res > 1e-9 {
                continue;
            }
            let zeros: Vec<(C64, u32)> =
                top.multiplicity.iter().enumerate().map(|(j, &m)| (C64::new(x[2 * j], x[2 * j + 1]), m)).collect();
            let Ok(contour) = assemble(anchors, &zeros, scale) else { continue };
            if contour.components().len() != 1 {
                continue;
            }
            let energy = solve_equilibrium(&contour, &ExternalField::Zero, 1.0, n_nodes, 1e-8)?.energy;
            let flat: Vec<C64> = zeros.iter().flat_map(|&(z, m)| std::iter::repeat_n(z, m as usize)).collect();
            let cand = Chebotarev {
                anchors: anchors.to_vec(),
                v_poly: poly::from_roots(&flat),
                zeros: flat,
                contour,
                residual: res,
                energy,
            };
            // the minimal-capacity continuum has the largest Robin constant
            if best.as_ref().is_none_or(|b| cand.energy > b.energy + 1e-9) {
                best = Some(cand);
            }
            break;
        }
    }
    best.ok_or_else(|| {
        Error::NewtonFailed(format!("no admissible continuum; best period residual {best_residual:.3e}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::contours::Arc as CArc;
    use std::f64::consts::PI;

    fn arcsine_r() -> QuadDiff {
        QuadDiff::rational(vec![c64(1.0, 0.0)], vec![c64(-1.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)])
    }

    #[test]
    fn build_r_examples() {
        let r = build_r(&DiscreteMeasure::arcsine(400), &ExternalField::Zero);
        assert!((r.eval(c64(2.0, 0.0)).unwrap() - c64(1.0 / 3.0, 0.0)).norm() < 1e-10);
        let d = build_r(&DiscreteMeasure::dirac(c64(0.0, 0.0)), &ExternalField::Zero);
        for z in [c64(1.0, 0.0), c64(0.3, -2.0)] {
            assert!((d.eval(z).unwrap() - 1.0 / (z * z)).norm() < 1e-15);
        }
    }

    #[test]
    fn holomorphy_examples() {
        let mu = DiscreteMeasure::arcsine(400);
        let seg = ContourSystem::segment(c64(-1.0, 0.0), c64(1.0, 0.0));
        let r = build_r(&mu, &ExternalField::Zero);
        let spacing = PI / 400.0;
        assert!(holomorphy_residual(&r, &seg, 3.0 * spacing).unwrap() <= 5e-2);
        let far = ContourSystem::new(vec![CArc::circle(c64(0.0, 0.0), 5.0, 32)], vec![]);
        assert!(holomorphy_residual(&r, &far, 1e-3).unwrap() <= 1e-10);

        let rot = C64::from_polar(1.0, 10f64.to_radians());
        let moved = mu.with_nodes(mu.nodes().iter().map(|z| z * rot).collect()).unwrap();
        let field = ExternalField::quadratic(c64(1.0, 0.0));
        let r = build_r(&moved, &field);
        let seg = ContourSystem::segment(-rot, rot);
        assert!(holomorphy_residual(&r, &seg, 3.0 * spacing).unwrap() > 0.2);
    }

    #[test]
    fn rational_fit_of_arcsine() {
        let r = build_r(&DiscreteMeasure::arcsine(400), &ExternalField::Zero);
        let fit = fit_rational_r(&r, &ExternalField::Zero, &[c64(-1.0, 0.0), c64(1.0, 0.0)]).unwrap();
        let QuadDiff::Rational { numerator, fit_residual, .. } = &fit else { panic!() };
        assert_eq!(numerator.len(), 1);
        assert!((numerator[0] - 1.0).norm() < 1e-3 && *fit_residual < 1e-3);
        let wrong = fit_rational_r(&r, &ExternalField::Zero, &[c64(-2.0, 0.0), c64(2.0, 0.0)]);
        assert!(matches!(wrong, Err(Error::NotRational(_))));
    }

    #[test]
    fn trajectories() {
        let one = QuadDiff::rational(vec![c64(1.0, 0.0)], vec![c64(1.0, 0.0)]);
        let t = trace_trajectory(&one, c64(0.0, 0.0), 1.0, 2.0).unwrap();
        assert!(t.points.iter().all(|z| z.re.abs() < 1e-12));
        assert!((t.length() - 2.0).abs() < 1e-9);

        let r = arcsine_r();
        for sign in [1.0, -1.0] {
            let t = trace_trajectory(&r, c64(0.0, 0.0), sign, 5.0).unwrap();
            assert_eq!(t.terminated, Termination::CriticalPoint);
            let end = *t.points.last().unwrap();
            assert!((end.re.abs() - 1.0).abs() < 1e-6 && end.im.abs() < 1e-9, "{end}");
            assert!(trajectory_drift(&r, &t).unwrap() <= 1e-6 * t.length());
        }

        let inv = QuadDiff::rational(vec![c64(1.0, 0.0)], vec![c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let t = trace_trajectory(&inv, c64(1.0, 0.0), 1.0, 20.0).unwrap();
        assert_eq!(t.kind, TrajectoryKind::Closed);
        assert!(t.points.iter().all(|z| (z.norm() - 1.0).abs() < 1e-6));
    }

    #[test]
    fn periods() {
        let circle: Vec<C64> = (0..=256).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / 256.0)).collect();
        let inv = QuadDiff::rational(vec![c64(1.0, 0.0)], vec![c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let p = period(&inv, &circle).unwrap();
        assert!((p - c64(0.0, 2.0 * PI)).norm() < 1e-10, "{p}");
        let loop2: Vec<C64> = circle.iter().map(|z| z * 2.0).collect();
        let p = period(&arcsine_r(), &loop2).unwrap();
        assert!((p.norm() - 2.0 * PI).abs() < 1e-10 && p.re.abs() < 1e-10, "{p}");
        let small: Vec<C64> = circle.iter().map(|z| c64(3.0, 3.0) + z * 0.5).collect();
        assert!(period(&arcsine_r(), &small).unwrap().norm() < 1e-12);
    }

    #[test]
    fn chebotarev_examples() {
        let seg = chebotarev_solve(&[c64(-1.0, 0.0), c64(1.0, 0.0)]).unwrap();
        assert_eq!(seg.v_poly, vec![c64(1.0, 0.0)]);
        let roots: Vec<C64> = (0..3).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0)).collect();
        let c = chebotarev_solve(&roots).unwrap();
        assert!(c.zeros[0].norm() <= 1e-6, "{}", c.zeros[0]);
        assert_eq!(c.contour.arcs.len(), 3);
        let c = chebotarev_solve(&[c64(-1.0, 0.0), c64(1.0, 0.0), c64(0.0, 2.0)]).unwrap();
        assert!(c.residual <= 1e-8);
    }

    use crate::measures::NodeSet;

    #[test]
    fn semicircle_r_at_origin() {
        let field = ExternalField::quadratic(c64(1.0, 0.0));
        let seg = ContourSystem::segment(c64(-2.0, 0.0), c64(2.0, 0.0));
        let eq = solve_equilibrium(&seg, &field, 1.0, 800, 1e-10).unwrap();
        let r = build_r(&eq.measure, &field);
        let v = r.eval(c64(0.0, 0.0)).unwrap();
        assert!((v - c64(-4.0, 0.0)).norm() <= 5e-2, "{v}");
        let v = r.eval(c64(0.4, 1.0)).unwrap();
        let z = c64(0.4, 1.0);
        assert!((v - 4.0 * (z * z - 1.0)).norm() <= 1e-2, "{v}");
    }

    #[test]
    fn log_field_residues() {
        let anchors = [c64(-1.0, 0.0), c64(1.0, 0.0)];
        let field = ExternalField::log_charges(anchors.iter().map(|&a| (a, 0.5))).unwrap();
        let nodes = NodeSet::segment(anchors[0], anchors[1], 400);
        let eq = crate::measures::solve_on_nodes(&nodes, &field, 1.0, Default::default()).unwrap();
        let r = build_r(&eq.measure, &field);
        let fit = fit_rational_r(&r, &field, &anchors).unwrap();
        let QuadDiff::Rational { numerator, .. } = &fit else { panic!() };
        let a = poly::from_roots(&anchors);
        let da = poly::derivative(&a);
        for &z in &anchors {
            let res = (poly::eval(numerator, z).sqrt() / poly::eval(&da, z)).norm();
            assert!((res - 0.5).abs() <= 1e-2, "{res}");
        }
    }

    #[test]
    fn fit_for_cube_roots() {
        let roots: Vec<C64> = (0..3).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 3.0)).collect();
        let cheb = chebotarev_solve(&roots).unwrap();
        let eq = solve_equilibrium(&cheb.contour, &ExternalField::Zero, 1.0, 600, 1e-10).unwrap();
        let r = build_r(&eq.measure, &ExternalField::Zero);
        let fit = fit_rational_r(&r, &ExternalField::Zero, &roots).unwrap();
        let QuadDiff::Rational { numerator, fit_residual, .. } = &fit else { panic!() };
        let v = -numerator[0] / numerator[1];
        assert!(v.norm() <= 1e-2 && *fit_residual <= 1e-2, "{v}");
        // re-evaluation on the annulus stays within the recorded residual
        for k in 0..16 {
            let z = C64::from_polar(2.0, k as f64 * 0.4);
            let (a, b) = (r.eval_raw(z).unwrap(), fit.eval_raw(z).unwrap());
            assert!((a - b).norm() / a.norm() <= 2.0 * fit_residual.max(1e-12) + 1e-3);
        }
    }

    #[test]
    fn chebotarev_four_anchors() {
        let anchors = [c64(-1.0, -0.5), c64(1.0, -0.5), c64(1.0, 0.5), c64(-1.0, 0.5)];
        let c = chebotarev_solve(&anchors).unwrap();
        assert!(c.residual <= 1e-8);
        assert_eq!(c.contour.components().len(), 1);
        assert_eq!(c.zeros.len(), 2);
    }
}
