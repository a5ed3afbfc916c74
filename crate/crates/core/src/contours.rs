//! Curve systems, the Hausdorff metric and A-variations `z -> z + t h(z)`.

use serde::{Deserialize, Serialize};

use crate::measures::{DiscreteMeasure, NodeSet};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    /// Cubic spline through the control points, chord-length parametrized
    /// (natural end conditions, periodic when closed).
    #[default]
    Spline,
    Polyline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub points: Vec<C64>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default)]
    pub interp: Interp,
}

impl Arc {
    pub fn spline(points: Vec<C64>) -> Self {
        Arc { points, closed: false, interp: Interp::Spline }
    }

    pub fn polyline(points: Vec<C64>) -> Self {
        Arc { points, closed: false, interp: Interp::Polyline }
    }

    pub fn segment(a: C64, b: C64) -> Self {
        Arc::polyline(vec![a, b])
    }

    pub fn closed_spline(points: Vec<C64>) -> Self {
        Arc { points, closed: true, interp: Interp::Spline }
    }

    /// Circle through `n` equally spaced control points.
    pub fn circle(center: C64, radius: f64, n: usize) -> Self {
        let pts =
            (0..n).map(|k| center + C64::from_polar(radius, std::f64::consts::TAU * k as f64 / n as f64)).collect();
        Arc::closed_spline(pts)
    }

    /// Circular arc from `a` to `b` through `mid`, sampled with `n` control points.
    pub fn three_point_arc(a: C64, mid: C64, b: C64, n: usize) -> Self {
        // circumcenter of a, mid, b
        let d = 2.0 * (a.re * (mid.im - b.im) + mid.re * (b.im - a.im) + b.re * (a.im - mid.im));
        if d.abs() < 1e-14 {
            let pts = (0..n).map(|k| a + (b - a) * (k as f64 / (n - 1) as f64)).collect();
            return Arc::spline(pts);
        }
        let (a2, m2, b2) = (a.norm_sqr(), mid.norm_sqr(), b.norm_sqr());
        let ux = (a2 * (mid.im - b.im) + m2 * (b.im - a.im) + b2 * (a.im - mid.im)) / d;
        let uy = (a2 * (b.re - mid.re) + m2 * (a.re - b.re) + b2 * (mid.re - a.re)) / d;
        let c = C64::new(ux, uy);
        let r = (a - c).norm();
        let ta = (a - c).arg();
        let tm = (mid - c).arg();
        let tb = (b - c).arg();
        // choose the sweep from ta to tb that passes through tm
        let wrap = |x: f64| x.rem_euclid(std::f64::consts::TAU);
        let sweep_ccw = wrap(tb - ta);
        let sweep = if wrap(tm - ta) <= sweep_ccw { sweep_ccw } else { sweep_ccw - std::f64::consts::TAU };
        let mut pts: Vec<C64> =
            (0..n).map(|k| c + C64::from_polar(r, ta + sweep * k as f64 / (n - 1) as f64)).collect();
        pts[0] = a;
        pts[n - 1] = b;
        Arc::spline(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSystem {
    pub arcs: Vec<Arc>,
    #[serde(default)]
    pub anchors: Vec<C64>,
    #[serde(default = "default_max_components")]
    pub max_components: usize,
}

fn default_max_components() -> usize {
    usize::MAX
}

/// One cubic piece `p0 + c1 τ + c2 τ² + c3 τ³`, `τ ∈ [0, h]`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    p0: C64,
    c1: C64,
    c2: C64,
    c3: C64,
    h: f64,
    /// arc length of the piece
    len: f64,
}

impl Piece {
    fn at(&self, t: f64) -> C64 {
        self.p0 + t * (self.c1 + t * (self.c2 + t * self.c3))
    }
    fn d(&self, t: f64) -> C64 {
        self.c1 + t * (2.0 * self.c2 + 3.0 * t * self.c3)
    }
    fn length_to(&self, t: f64) -> f64 {
        const GL: [(f64, f64); 8] = gl8();
        let half = 0.5 * t;
        GL.iter().map(|&(x, w)| w * self.d(half * (x + 1.0)).norm()).sum::<f64>() * half
    }
}

const fn gl8() -> [(f64, f64); 8] {
    [
        (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
        (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
        (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
        (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    ]
}

/// Evaluable geometry of an [`Arc`].
#[derive(Debug, Clone)]
pub struct ArcGeom {
    pieces: Vec<Piece>,
    cum: Vec<f64>,
    single: Option<C64>,
    pub closed: bool,
}

impl ArcGeom {
    pub fn new(arc: &Arc) -> Self {
        let mut pts: Vec<C64> = Vec::with_capacity(arc.points.len());
        for &p in &arc.points {
            if pts.last().is_none_or(|&q: &C64| (p - q).norm() > 0.0) {
                pts.push(p);
            }
        }
        let closed = arc.closed && pts.len() >= 3;
        if closed && (pts[0] - pts[pts.len() - 1]).norm() == 0.0 {
            pts.pop();
        }
        if pts.len() < 2 {
            return ArcGeom { pieces: vec![], cum: vec![0.0], single: pts.first().copied(), closed: false };
        }
        let pieces = match arc.interp {
            Interp::Polyline => linear_pieces(&pts, closed),
            Interp::Spline => spline_pieces(&pts, closed),
        };
        let mut cum = vec![0.0];
        for p in &pieces {
            cum.push(cum.last().unwrap() + p.len);
        }
        ArcGeom { pieces, cum, single: None, closed }
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn is_point(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn start(&self) -> C64 {
        self.single.unwrap_or_else(|| self.pieces[0].p0)
    }

    pub fn end(&self) -> C64 {
        match self.single {
            Some(p) => p,
            None => {
                let last = self.pieces.last().unwrap();
                last.at(last.h)
            }
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length());
        let k = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(self.pieces.len() - 1),
            Err(k) => k.saturating_sub(1).min(self.pieces.len() - 1),
        };
        let piece = &self.pieces[k];
        let target = s - self.cum[k];
        // Newton on the arc-length function of the piece, safeguarded by bisection
        let (mut lo, mut hi) = (0.0, piece.h);
        let mut t = piece.h * (target / piece.len.max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let f = piece.length_to(t) - target;
            if f.abs() <= 1e-15 * piece.len.max(1e-300) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = piece.d(t).norm();
            let mut next = t - f / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-16 * piece.h {
                t = next;
                break;
            }
            t = next;
        }
        (k, t)
    }

    /// Point and unit tangent at arc length `s`.
    pub fn at_length(&self, s: f64) -> (C64, C64) {
        if let Some(p) = self.single {
            return (p, C64::new(1.0, 0.0));
        }
        let (k, t) = self.locate(s);
        let piece = &self.pieces[k];
        let d = piece.d(t);
        (piece.at(t), d / d.norm())
    }

    /// Points along the arc with spacing at most `spacing` (endpoints included).
    pub fn samples(&self, spacing: f64) -> Vec<C64> {
        if let Some(p) = self.single {
            return vec![p];
        }
        let len = self.length();
        let n = ((len / spacing).ceil() as usize).max(1);
        let mut out: Vec<C64> = (0..=n).map(|k| self.at_length(len * k as f64 / n as f64).0).collect();
        if self.closed {
            out[n] = out[0];
        }
        out
    }
}

fn linear_pieces(pts: &[C64], closed: bool) -> Vec<Piece> {
    let m = if closed { pts.len() } else { pts.len() - 1 };
    (0..m)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            let h = (b - a).norm();
            Piece { p0: a, c1: (b - a) / h, c2: C64::new(0.0, 0.0), c3: C64::new(0.0, 0.0), h, len: h }
        })
        .collect()
}

fn spline_pieces(pts: &[C64], closed: bool) -> Vec<Piece> {
    let np = pts.len();
    let m = if closed { np } else { np - 1 };
    let y = |i: usize| pts[i % np];
    let h: Vec<f64> = (0..m).map(|i| (y(i + 1) - y(i)).norm()).collect();
    // second derivatives at the knots
    let mut second = vec![C64::new(0.0, 0.0); np];
    if closed || np > 2 {
        let idx: Vec<usize> = if closed { (0..np).collect() } else { (1..np - 1).collect() };
        let dim = idx.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = nalgebra::DMatrix::<f64>::zeros(dim, 2);
        for (row, &i) in idx.iter().enumerate() {
            let (hp, hn) = if closed { (h[(i + m - 1) % m], h[i % m]) } else { (h[i - 1], h[i]) };
            let prev = if closed { (i + np - 1) % np } else { i - 1 };
            let next = (i + 1) % np;
            let r = 6.0 * ((y(next) - y(i)) / hn - (y(i) - y(prev)) / hp);
            a[(row, row)] += 2.0 * (hp + hn);
            if let Some(col) = idx.iter().position(|&j| j == prev) {
                a[(row, col)] += hp;
            }
            if let Some(col) = idx.iter().position(|&j| j == next) {
                a[(row, col)] += hn;
            }
            rhs[(row, 0)] = r.re;
            rhs[(row, 1)] = r.im;
        }
        let sol = a.lu().solve(&rhs).expect("spline system is diagonally dominant");
        for (row, &i) in idx.iter().enumerate() {
            second[i] = C64::new(sol[(row, 0)], sol[(row, 1)]);
        }
    }
    (0..m)
        .map(|i| {
            let (y0, y1) = (y(i), y(i + 1));
            let (m0, m1) = (second[i % np], second[(i + 1) % np]);
            let hi = h[i];
            let mut piece = Piece {
                p0: y0,
                c1: (y1 - y0) / hi - hi * (2.0 * m0 + m1) / 6.0,
                c2: m0 / 2.0,
                c3: (m1 - m0) / (6.0 * hi),
                h: hi,
                len: 0.0,
            };
            // composite rule keeps the length accurate for strongly curved pieces
            let parts = 4;
            piece.len = (0..parts)
                .map(|k| {
                    let t0 = hi * k as f64 / parts as f64;
                    let t1 = hi * (k + 1) as f64 / parts as f64;
                    piece.length_to(t1) - piece.length_to(t0)
                })
                .sum();
            piece
        })
        .collect()
}

impl ContourSystem {
    pub fn new(arcs: Vec<Arc>, anchors: Vec<C64>) -> Self {
        ContourSystem { arcs, anchors, max_components: usize::MAX }
    }

    pub fn segment(a: C64, b: C64) -> Self {
        ContourSystem::new(vec![Arc::segment(a, b)], vec![a, b])
    }

    pub fn with_max_components(mut self, s: usize) -> Self {
        self.max_components = s;
        self
    }

    pub fn geoms(&self) -> Vec<ArcGeom> {
        self.arcs.iter().map(ArcGeom::new).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.geoms().iter().map(ArcGeom::length).sum()
    }

    pub fn control_points(&self) -> impl Iterator<Item = C64> + '_ {
        self.arcs.iter().flat_map(|a| a.points.iter().copied())
    }

    /// Largest distance between two control points (a cheap diameter proxy
    /// that is exact for polylines).
    pub fn control_diameter(&self) -> f64 {
        let pts: Vec<C64> = self.control_points().collect();
        diameter(&pts)
    }

    pub fn diameter(&self) -> f64 {
        let scale = self.control_diameter().max(1e-300);
        diameter(&self.sampled(scale * 1e-2).concat())
    }

    /// Sampled polylines, one per arc.
    pub fn sampled(&self, spacing: f64) -> Vec<Vec<C64>> {
        self.geoms().iter().map(|g| g.samples(spacing)).collect()
    }

    /// Connected components as lists of arc indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.arcs.len();
        let scale = self.control_diameter().max(1.0);
        let tol = 1e-9 * scale;
        let geoms = self.geoms();
        let samples: Vec<Vec<C64>> = geoms.iter().map(|g| g.samples((g.length() / 400.0).max(1e-12 * scale))).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            let mut j = i;
            while p[j] != r {
                let nx = p[j];
                p[j] = r;
                j = nx;
            }
            r
        }
        for i in 0..n {
            for j in i + 1..n {
                let touch = [geoms[i].start(), geoms[i].end()].iter().any(|&p| dist_to_polyline(p, &samples[j]) <= tol)
                    || [geoms[j].start(), geoms[j].end()].iter().any(|&p| dist_to_polyline(p, &samples[i]) <= tol);
                if touch {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_of: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            match root_of[r] {
                Some(g) => groups[g].push(i),
                None => {
                    root_of[r] = Some(groups.len());
                    groups.push(vec![i]);
                }
            }
        }
        groups
    }

    /// Whether every arc is free of self-intersections at sampling resolution.
    pub fn is_simple(&self) -> bool {
        self.geoms().iter().all(|g| {
            if g.is_point() {
                return true;
            }
            let pts = g.samples(g.length() / 256.0);
            let m = pts.len() - 1;
            for i in 0..m {
                for j in i + 2..m {
                    if g.closed && i == 0 && j == m - 1 {
                        continue;
                    }
                    if segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                        return false;
                    }
                }
            }
            true
        })
    }

    /// Structural problems: too many components, anchors off the curve,
    /// self-intersecting arcs.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.arcs.is_empty() {
            issues.push("no arcs".to_string());
            return issues;
        }
        let comps = self.components().len();
        if comps > self.max_components {
            issues.push(format!("{comps} components exceed the budget {}", self.max_components));
        }
        let samples = self.sampled(self.control_diameter().max(1.0) * 1e-4);
        for &a in &self.anchors {
            let on = self.control_points().any(|p| (p - a).norm() <= 1e-12)
                || samples.iter().any(|s| dist_to_polyline(a, s) <= 1e-12);
            if !on {
                issues.push(format!("anchor {a} is not on the contour"));
            }
        }
        if !self.is_simple() {
            issues.push("self-intersecting arc".to_string());
        }
        issues
    }

    pub fn bbox(&self) -> (C64, C64) {
        let pts = self.sampled(self.control_diameter().max(1e-9) * 1e-2).concat();
        bbox(&pts)
    }

    /// Replaces every control point equal to `from` (within `tol`) by `to`.
    pub fn move_point(&mut self, from: C64, to: C64, tol: f64) {
        for arc in &mut self.arcs {
            for p in &mut arc.points {
                if (*p - from).norm() <= tol {
                    *p = to;
                }
            }
        }
    }
}

pub(crate) fn bbox(pts: &[C64]) -> (C64, C64) {
    let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.re = lo.re.min(p.re);
        lo.im = lo.im.min(p.im);
        hi.re = hi.re.max(p.re);
        hi.im = hi.im.max(p.im);
    }
    (lo, hi)
}

pub(crate) fn diameter(pts: &[C64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    let cross = |o: C64, p: C64, q: C64| (p - o).re * (q - o).im - (p - o).im * (q - o).re;
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub(crate) fn dist_to_segment(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / l2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub(crate) fn dist_to_polyline(p: C64, line: &[C64]) -> f64 {
    if line.len() == 1 {
        return (p - line[0]).norm();
    }
    line.windows(2).map(|w| dist_to_segment(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between resamplings of two systems (Euclidean metric).
///
/// Both systems are resampled at spacing `1e-3 * diam`; each sample of one
/// system is measured against the polylines of the other, so the value is
/// exact for polylines and within [`hausdorff_bound`]'s error bar otherwise.
pub fn hausdorff_distance(k1: &ContourSystem, k2: &ContourSystem) -> Result<f64> {
    hausdorff_with_bound(k1, k2).map(|(d, _)| d)
}

/// Same as [`hausdorff_distance`], also returning the resampling error bar
/// (half the sampling spacing).
pub fn hausdorff_with_bound(k1: &ContourSystem, k2: &ContourSystem) -> Result<(f64, f64)> {
    if k1.arcs.is_empty() || k2.arcs.is_empty() {
        return Err(Error::EmptyContour);
    }
    let scale = k1.control_diameter().max(k2.control_diameter()).max(1e-12);
    let spacing = 1e-3 * scale;
    let s1 = k1.sampled(spacing);
    let s2 = k2.sampled(spacing);
    let one_sided = |from: &[Vec<C64>], to: &[Vec<C64>]| -> f64 {
        let pts: Vec<C64> = from.concat();
        crate::par::map_slice(&pts, |&p| to.iter().map(|l| dist_to_polyline(p, l)).fold(f64::INFINITY, f64::min))
            .into_iter()
            .fold(0.0, f64::max)
    };
    let d = one_sided(&s1, &s2).max(one_sided(&s2, &s1));
    Ok((d, 0.5 * spacing))
}

// ---------------------------------------------------------------------------
// Variations

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariationKind {
    /// `amplitude * (1 - r^2)^2`, `r = |z - center| / radius`, zero for `r >= 1`.
    Bump { center: C64, radius: f64, amplitude: C64 },
    /// `A(z) / (z - pole)` with `A(z) = Π (z - a_k)` over `anchors`.
    Schiffer { pole: C64, anchors: Vec<C64> },
}

/// A `C^1` vector field `h` defining the variation `z -> z + t h(z)`.
///
/// `h` is multiplied by a cutoff that vanishes within `cutoff` of every point
/// of `fixed` and equals one beyond `2 * cutoff`; `cutoff = 0` disables it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationField {
    pub kind: VariationKind,
    #[serde(default)]
    pub fixed: Vec<C64>,
    #[serde(default)]
    pub cutoff: f64,
}

/// Default anchor cutoff: 5% of the smallest anchor separation.
pub fn default_cutoff(anchors: &[C64]) -> f64 {
    let mut d = f64::INFINITY;
    for (i, a) in anchors.iter().enumerate() {
        for b in &anchors[i + 1..] {
            d = d.min((a - b).norm());
        }
    }
    if d.is_finite() {
        0.05 * d
    } else {
        0.0
    }
}

fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * (3.0 - 2.0 * x)
    }
}

impl VariationField {
    pub fn bump(center: C64, radius: f64, amplitude: C64) -> Self {
        VariationField { kind: VariationKind::Bump { center, radius, amplitude }, fixed: vec![], cutoff: 0.0 }
    }

    /// Schiffer field with anchor cutoff `cutoff` (0 for the bare field).
    pub fn schiffer(pole: C64, anchors: Vec<C64>, cutoff: f64) -> Self {
        VariationField { kind: VariationKind::Schiffer { pole, anchors: anchors.clone() }, fixed: anchors, cutoff }
    }

    pub fn with_fixed(mut self, fixed: Vec<C64>, cutoff: f64) -> Self {
        self.fixed = fixed;
        self.cutoff = cutoff;
        self
    }

    pub fn zero() -> Self {
        VariationField::bump(C64::new(0.0, 0.0), 1.0, C64::new(0.0, 0.0))
    }

    fn cutoff_factor(&self, z: C64) -> f64 {
        if self.cutoff <= 0.0 {
            return 1.0;
        }
        self.fixed.iter().map(|a| smoothstep((z - a).norm() / self.cutoff - 1.0)).product()
    }

    pub fn eval(&self, z: C64) -> C64 {
        let theta = self.cutoff_factor(z);
        if theta == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let core = match &self.kind {
            VariationKind::Bump { center, radius, amplitude } => {
                let r2 = (z - center).norm_sqr() / (radius * radius);
                if r2 >= 1.0 {
                    C64::new(0.0, 0.0)
                } else {
                    amplitude * (1.0 - r2) * (1.0 - r2)
                }
            }
            VariationKind::Schiffer { pole, anchors } => crate::poly::eval_roots(anchors, z) / (z - pole),
        };
        core * theta
    }

    /// Wirtinger derivatives `(h_z, h_zbar)` by central differences.
    pub fn wirtinger(&self, z: C64) -> (C64, C64) {
        let e = 1e-6 * (1.0 + z.norm());
        let hx = (self.eval(z + C64::new(e, 0.0)) - self.eval(z - C64::new(e, 0.0))) / (2.0 * e);
        let hy = (self.eval(z + C64::new(0.0, e)) - self.eval(z - C64::new(0.0, e))) / (2.0 * e);
        let i = C64::new(0.0, 1.0);
        (0.5 * (hx - i * hy), 0.5 * (hx + i * hy))
    }

    /// Complex derivative used on the diagonal of the discrete first variation.
    pub fn deriv(&self, z: C64) -> C64 {
        self.wirtinger(z).0
    }

    /// Largest operator norm `|h_z| + |h_zbar|` over the given points.
    pub fn lipschitz_on(&self, pts: &[C64]) -> f64 {
        pts.iter()
            .map(|&z| {
                let (a, b) = self.wirtinger(z);
                a.norm() + b.norm()
            })
            .fold(0.0, f64::max)
    }

    fn points_for_lipschitz(contour: &ContourSystem) -> Vec<C64> {
        let scale = contour.control_diameter().max(1e-12);
        let mut pts = contour.sampled(scale / 200.0).concat();
        pts.extend(contour.control_points());
        pts
    }
}

fn check_injective(h: &VariationField, pts: &[C64], t: f64) -> Result<()> {
    if t == 0.0 {
        return Ok(());
    }
    let lip = h.lipschitz_on(pts);
    if t.abs() * lip >= 1.0 {
        return Err(Error::VariationTooLarge(t.abs() * lip));
    }
    Ok(())
}

/// Maps the control points by `z + t h(z)`; anchors stay put.
pub fn apply_variation(contour: &ContourSystem, h: &VariationField, t: f64) -> Result<ContourSystem> {
    check_injective(h, &VariationField::points_for_lipschitz(contour), t)?;
    let mut out = contour.clone();
    for arc in &mut out.arcs {
        for p in &mut arc.points {
            if contour.anchors.iter().any(|a| (*a - *p).norm() <= 1e-12) {
                continue;
            }
            *p += h.eval(*p) * t;
        }
    }
    Ok(out)
}

/// `dμ^t(z^t) = dμ(z)`: nodes move, weights stay.
pub fn pushforward_measure(mu: &DiscreteMeasure, h: &VariationField, t: f64) -> Result<DiscreteMeasure> {
    check_injective(h, mu.nodes(), t)?;
    let nodes = mu.nodes().iter().map(|&z| z + h.eval(z) * t).collect();
    mu.with_nodes(nodes)
}

/// Pushes a discretization forward, rescaling cell lengths by the tangential
/// stretch of the map.
pub fn pushforward_nodes(nodes: &NodeSet, h: &VariationField, t: f64) -> Result<NodeSet> {
    check_injective(h, &nodes.nodes, t)?;
    let mut out = nodes.clone();
    for i in 0..nodes.len() {
        let z = nodes.nodes[i];
        let tau = nodes.tangents[i];
        let (hz, hzb) = h.wirtinger(z);
        let dt = tau + (hz * tau + hzb * tau.conj()) * t;
        out.nodes[i] = z + h.eval(z) * t;
        out.cells[i] = nodes.cells[i] * dt.norm();
        out.tangents[i] = dt / dt.norm();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Families

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub center: C64,
    pub radius: f64,
}

/// Declares a class of admissible contours: an initial member, the pinned
/// anchor set (taken from `initial.anchors`), the component budget and discs
/// the contours must bypass (e.g. around negative charges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub initial: ContourSystem,
    #[serde(default = "default_max_components")]
    pub max_components: usize,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
    /// Distance within which a control point is snapped onto an anchor;
    /// defaults to `1e-3 * diameter`.
    #[serde(default)]
    pub snap_tol: Option<f64>,
}

impl FamilySpec {
    pub fn new(initial: ContourSystem) -> Self {
        let max_components = initial.max_components;
        FamilySpec { initial, max_components, exclusions: vec![], snap_tol: None }
    }

    pub fn anchors(&self) -> &[C64] {
        &self.initial.anchors
    }
}

/// Nearest admissible member: anchors re-snapped, exclusion discs bypassed,
/// surplus components joined by their shortest connecting segments.
pub fn family_project(contour: &ContourSystem, family: &FamilySpec) -> ContourSystem {
    let mut out = contour.clone();
    out.anchors = family.initial.anchors.clone();
    out.max_components = family.max_components;
    let scale = out.control_diameter().max(1e-12);
    let snap = family.snap_tol.unwrap_or(1e-3 * scale);
    for &a in &family.initial.anchors {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, arc) in out.arcs.iter().enumerate() {
            for (j, p) in arc.points.iter().enumerate() {
                let d = (p - a).norm();
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        if let Some((i, j, d)) = best {
            if d <= snap && d > 0.0 {
                let old = out.arcs[i].points[j];
                out.move_point(old, a, 0.0);
            }
        }
    }
    for ex in &family.exclusions {
        for arc in &mut out.arcs {
            for p in &mut arc.points {
                if family.initial.anchors.iter().any(|a| (*a - *p).norm() == 0.0) {
                    continue;
                }
                let d = *p - ex.center;
                if d.norm() < ex.radius {
                    let dir = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
                    *p = ex.center + dir * ex.radius * (1.0 + 1e-9);
                }
            }
        }
    }
    loop {
        let comps = out.components();
        if comps.len() <= family.max_components.max(1) {
            break;
        }
        let samples = out.sampled(1e-3 * scale);
        let mut best = (f64::INFINITY, C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for (ci, a) in comps.iter().enumerate() {
            for b in &comps[ci + 1..] {
                for &i in a {
                    for &j in b {
                        for &p in &samples[i] {
                            for &q in &samples[j] {
                                let d = (p - q).norm();
                                if d < best.0 {
                                    best = (d, p, q);
                                }
                            }
                        }
                    }
                }
            }
        }
        out.arcs.push(Arc::segment(best.1, best.2));
    }
    out
}
