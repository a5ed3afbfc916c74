//! Discrete measures, logarithmic potentials, energies and the equilibrium solver.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::contours::{ArcGeom, ContourSystem};
use crate::fields::ExternalField;
use crate::{Error, Result, C64};

/// Positive point masses `Σ w_i δ(z_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    nodes: Vec<C64>,
    weights: Vec<f64>,
    mass: f64,
}

impl DiscreteMeasure {
    /// Measure with mass equal to the sum of the weights.
    pub fn new(nodes: Vec<C64>, weights: Vec<f64>) -> Result<Self> {
        let mass = weights.iter().sum();
        Self::with_mass(nodes, weights, mass)
    }

    /// Validates the weights and rescales them to sum to `mass` exactly.
    pub fn with_mass(nodes: Vec<C64>, mut weights: Vec<f64>, mass: f64) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Invalid(format!("{} nodes but {} weights", nodes.len(), weights.len())));
        }
        if nodes.is_empty() {
            return Err(Error::DegenerateMeasure("no nodes".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Invalid(format!("negative or non-finite weight {w}")));
        }
        if nodes.iter().any(|z| !z.is_finite()) {
            return Err(Error::Invalid("non-finite node".into()));
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total != mass {
            let s = mass / total;
            weights.iter_mut().for_each(|w| *w *= s);
        }
        Ok(DiscreteMeasure { nodes, weights, mass })
    }

    /// Like [`DiscreteMeasure::new`], merging nodes closer than `tol`.
    pub fn merged(nodes: Vec<C64>, weights: Vec<f64>, tol: f64) -> Result<Self> {
        let mut out_n: Vec<C64> = Vec::new();
        let mut out_w: Vec<f64> = Vec::new();
        for (z, w) in nodes.into_iter().zip(weights) {
            match out_n.iter().position(|p| (p - z).norm() <= tol) {
                Some(k) => out_w[k] += w,
                None => {
                    out_n.push(z);
                    out_w.push(w);
                }
            }
        }
        Self::new(out_n, out_w)
    }

    /// Gauss-Chebyshev discretization of the arcsine measure on `[-1, 1]`,
    /// nodes ascending, equal weights.
    pub fn arcsine(n: usize) -> Self {
        let nodes = (1..=n)
            .rev()
            .map(|k| C64::new(((2 * k - 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos(), 0.0))
            .collect();
        DiscreteMeasure { nodes, weights: vec![1.0 / n as f64; n], mass: 1.0 }
    }

    /// Same weights on moved nodes.
    pub fn with_nodes(&self, nodes: Vec<C64>) -> Result<Self> {
        if nodes.len() != self.nodes.len() || nodes.iter().any(|z| !z.is_finite()) {
            return Err(Error::Invalid("node list does not match the measure".into()));
        }
        Ok(DiscreteMeasure { nodes, weights: self.weights.clone(), mass: self.mass })
    }

    pub fn dirac(at: C64) -> Self {
        DiscreteMeasure { nodes: vec![at], weights: vec![1.0], mass: 1.0 }
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DiscreteMeasure {
            nodes: self.nodes.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            mass: self.mass * factor,
        }
    }

    pub fn min_separation(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                d = d.min((a - b).norm());
            }
        }
        d
    }

    /// Writes `re,im,weight` rows with a header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["re", "im", "weight"])?;
        for (z, m) in self.nodes.iter().zip(&self.weights) {
            w.write_record([format!("{:e}", z.re), format!("{:e}", z.im), format!("{m:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for rec in r.deserialize() {
            let (re, im, w): (f64, f64, f64) = rec?;
            nodes.push(C64::new(re, im));
            weights.push(w);
        }
        Self::new(nodes, weights)
    }
}

/// `V^μ(z) = Σ w_i log(1/|z - z_i|)`; `+inf` at a node of positive weight.
pub fn potential(mu: &DiscreteMeasure, z: C64) -> f64 {
    let mut v = 0.0;
    for (p, w) in mu.nodes.iter().zip(&mu.weights) {
        let d = (z - p).norm();
        if d == 0.0 {
            if *w > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        v -= w * d.ln();
    }
    v
}

/// `C^μ(z) = Σ w_i / (z_i - z)`.
pub fn cauchy_transform(mu: &DiscreteMeasure, z: C64) -> Result<C64> {
    let mut c = C64::new(0.0, 0.0);
    for (p, w) in mu.nodes.iter().zip(&mu.weights) {
        let d = p - z;
        if d.norm() == 0.0 {
            return Err(Error::EvaluationAtAtom(z));
        }
        c += w / d;
    }
    Ok(c)
}

/// Off-diagonal logarithmic energy `Σ_{i≠j} w_i w_j log(1/|z_i - z_j|)`.
pub fn discrete_energy(mu: &DiscreteMeasure) -> Result<f64> {
    let n = mu.len();
    let rows = crate::par::map_range(n, |i| {
        let zi = mu.nodes[i];
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                let d = (zi - mu.nodes[j]).norm();
                if d == 0.0 {
                    return Err(Error::DegenerateMeasure(format!("coincident nodes at {zi}")));
                }
                s -= mu.weights[j] * d.ln();
            }
        }
        Ok(mu.weights[i] * s)
    });
    rows.into_iter().sum()
}

/// `discrete_energy(μ) + 2 Σ w_i φ(z_i)`.
pub fn weighted_energy(mu: &DiscreteMeasure, field: &ExternalField) -> Result<f64> {
    let mut e = discrete_energy(mu)?;
    for (z, w) in mu.nodes.iter().zip(&mu.weights) {
        if field.is_singular(*z) {
            return Err(Error::FieldSingularAtNode(*z));
        }
        e += 2.0 * w * field.value_unchecked(*z);
    }
    Ok(e)
}

/// Self-energy of a uniform unit mass on a straight cell of length `s`.
pub fn cell_self_energy(s: f64) -> f64 {
    1.5 - s.ln()
}

// ---------------------------------------------------------------------------
// Node sets

/// Fixed quadrature nodes on a contour: each node represents a cell of the
/// curve with known length and tangent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub nodes: Vec<C64>,
    pub cells: Vec<f64>,
    pub tangents: Vec<C64>,
    /// Arc each node belongs to.
    pub arc: Vec<usize>,
    /// Relative arc-length position of the node on its arc, in `[0, 1]`.
    pub fraction: Vec<f64>,
    /// Arcs shorter than the node spacing, represented by a single node.
    pub collapsed: Vec<usize>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn subset(&self, keep: &[usize]) -> NodeSet {
        NodeSet {
            nodes: keep.iter().map(|&i| self.nodes[i]).collect(),
            cells: keep.iter().map(|&i| self.cells[i]).collect(),
            tangents: keep.iter().map(|&i| self.tangents[i]).collect(),
            arc: keep.iter().map(|&i| self.arc[i]).collect(),
            fraction: keep.iter().map(|&i| self.fraction[i]).collect(),
            collapsed: self.collapsed.clone(),
        }
    }

    /// Nodes along a straight segment with Chebyshev-graded cells.
    pub fn segment(a: C64, b: C64, n: usize) -> NodeSet {
        discretize(&ContourSystem::segment(a, b), n).expect("segment has positive length")
    }
}

/// Node counts per arc proportional to length (largest remainder), at least
/// two per arc that is longer than the mean spacing.
pub(crate) fn allocate(lengths: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = lengths.iter().sum();
    let spacing = total / n as f64;
    let raw: Vec<f64> = lengths.iter().map(|l| n as f64 * l / total).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut rem: usize = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    for &k in order.iter().cycle().take(lengths.len() * 2) {
        if rem == 0 {
            break;
        }
        counts[k] += 1;
        rem -= 1;
    }
    for (k, c) in counts.iter_mut().enumerate() {
        *c = if lengths[k] < spacing { 1 } else { (*c).max(2) };
    }
    counts
}

/// Places about `n` nodes on the contour: Chebyshev-graded cells on open
/// arcs, uniform cells on closed ones, node at the arc-length midpoint of
/// each cell.
pub fn discretize(contour: &ContourSystem, n: usize) -> Result<NodeSet> {
    let geoms: Vec<ArcGeom> = contour.geoms();
    let lengths: Vec<f64> = geoms.iter().map(ArcGeom::length).collect();
    let total: f64 = lengths.iter().sum();
    if geoms.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyContour);
    }
    let counts = allocate(&lengths, n.max(1));
    discretize_with_counts(contour, &geoms, &counts)
}

/// As [`discretize`] with explicit per-arc node counts.
pub fn discretize_counts(contour: &ContourSystem, counts: &[usize]) -> Result<NodeSet> {
    let geoms = contour.geoms();
    if geoms.len() != counts.len() {
        return Err(Error::Invalid("one node count per arc required".into()));
    }
    discretize_with_counts(contour, &geoms, counts)
}

fn discretize_with_counts(contour: &ContourSystem, geoms: &[ArcGeom], counts: &[usize]) -> Result<NodeSet> {
    let total: f64 = geoms.iter().map(ArcGeom::length).sum();
    let scale = contour.control_diameter().max(total).max(1e-300);
    let mut set =
        NodeSet { nodes: vec![], cells: vec![], tangents: vec![], arc: vec![], fraction: vec![], collapsed: vec![] };
    for (k, (g, &m)) in geoms.iter().zip(counts).enumerate() {
        let len = g.length();
        if m <= 1 {
            let (z, t) = g.at_length(0.5 * len);
            set.nodes.push(z);
            set.cells.push(len.max(1e-12 * scale));
            set.tangents.push(t);
            set.arc.push(k);
            set.fraction.push(0.5);
            set.collapsed.push(k);
            continue;
        }
        let bounds: Vec<f64> = (0..=m)
            .map(|j| {
                let u = j as f64 / m as f64;
                if g.closed {
                    len * u
                } else {
                    0.5 * len * (1.0 - (std::f64::consts::PI * u).cos())
                }
            })
            .collect();
        for j in 0..m {
            let mid = 0.5 * (bounds[j] + bounds[j + 1]);
            let (z, t) = g.at_length(mid);
            set.nodes.push(z);
            set.cells.push(bounds[j + 1] - bounds[j]);
            set.tangents.push(t);
            set.arc.push(k);
            set.fraction.push(mid / len);
        }
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Equilibrium solver

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub measure: DiscreteMeasure,
    pub constant_w: f64,
    /// Discrete weighted energy including the cell self-energies.
    pub energy: f64,
    pub support_mask: Vec<bool>,
    pub residual_eq: f64,
    pub residual_ineq: f64,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub nodes: NodeSet,
}

#[derive(Serialize)]
struct EquilibriumSummary<'a> {
    measure_path: &'a str,
    constant_w: f64,
    energy: f64,
    residual_eq: f64,
    residual_ineq: f64,
}

impl EquilibriumResult {
    /// Weight per unit length at each node.
    pub fn density(&self) -> Vec<f64> {
        self.measure.weights().iter().zip(&self.nodes.cells).map(|(w, s)| w / s).collect()
    }

    /// Outermost cell boundaries (in arc length from the start of `arc`)
    /// of the supported nodes on that arc.
    pub fn support_extent(&self, arc: usize) -> Option<(C64, C64)> {
        let idx: Vec<usize> =
            (0..self.nodes.len()).filter(|&i| self.nodes.arc[i] == arc && self.support_mask[i]).collect();
        let first = *idx.first()?;
        let last = *idx.last()?;
        let lo = self.nodes.nodes[first] - self.nodes.tangents[first] * (0.5 * self.nodes.cells[first]);
        let hi = self.nodes.nodes[last] + self.nodes.tangents[last] * (0.5 * self.nodes.cells[last]);
        Some((lo, hi))
    }

    /// Total potential `V^λ + φ` off the nodes.
    pub fn total_potential(&self, field: &ExternalField, z: C64) -> f64 {
        potential(&self.measure, z) + field.value_unchecked(z)
    }

    pub fn summary_json(&self, measure_path: &str) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EquilibriumSummary {
            measure_path,
            constant_w: self.constant_w,
            energy: self.energy,
            residual_eq: self.residual_eq,
            residual_ineq: self.residual_ineq,
        })?)
    }
}

/// Dense kernel: `log(1/|z_i - z_j|)` off the diagonal and the cell
/// self-energy on it.
pub fn kernel_matrix(nodes: &NodeSet) -> Vec<f64> {
    let n = nodes.len();
    let mut k = vec![0.0; n * n];
    crate::par::fill_rows(&mut k, n, |i, row| {
        let zi = nodes.nodes[i];
        for (j, r) in row.iter_mut().enumerate() {
            *r = if i == j { cell_self_energy(nodes.cells[i]) } else { -(zi - nodes.nodes[j]).norm().ln() };
        }
    });
    k
}

/// Equilibrium measure of mass `mass` on a contour, `n_nodes` nodes.
pub fn solve_equilibrium(
    contour: &ContourSystem,
    field: &ExternalField,
    mass: f64,
    n_nodes: usize,
    tol: f64,
) -> Result<EquilibriumResult> {
    let nodes = discretize(contour, n_nodes)?;
    solve_on_nodes(&nodes, field, mass, SolverOptions { tol, ..SolverOptions::default() })
}

/// Minimizes `wᵀKw + 2φᵀw` over `{w >= 0, Σw = mass}` by a primal
/// active-set method. Nodes in the singular set of the field are dropped.
pub fn solve_on_nodes(
    nodes: &NodeSet,
    field: &ExternalField,
    mass: f64,
    opts: SolverOptions,
) -> Result<EquilibriumResult> {
    if !(mass > 0.0) {
        return Err(Error::Invalid(format!("mass must be positive, got {mass}")));
    }
    let keep: Vec<usize> = (0..nodes.len()).filter(|&i| !field.is_singular(nodes.nodes[i])).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateMeasure("no admissible nodes".into()));
    }
    let nodes = if keep.len() == nodes.len() { nodes.clone() } else { nodes.subset(&keep) };
    let phi: Vec<f64> = nodes.nodes.iter().map(|&z| field.value_unchecked(z)).collect();
    if phi.iter().any(|p| !p.is_finite()) {
        return Err(Error::EnergyUnbounded("field not finite on a node".into()));
    }
    let kernel = kernel_matrix(&nodes);
    let mut qp = ActiveSet::new(&kernel, &phi, mass);
    let outcome = qp.run(opts);
    let result = qp.finish(nodes, opts.tol);
    match outcome {
        Outcome::Converged => Ok(result),
        Outcome::Unbounded(msg) => Err(Error::EnergyUnbounded(msg)),
        Outcome::Cap => {
            let residual = result.residual_eq.max(result.residual_ineq);
            if residual <= opts.tol {
                Ok(result)
            } else {
                Err(Error::NotConverged { iterations: result.iterations, residual, best: Box::new(result) })
            }
        }
    }
}

enum Outcome {
    Converged,
    Cap,
    Unbounded(String),
}

/// State of the active-set iteration. `inv` is the inverse of the bordered
/// matrix `[[0, 1ᵀ], [1, K_FF]]` in the order `[border, free...]`.
struct ActiveSet<'a> {
    kernel: &'a [f64],
    phi: &'a [f64],
    n: usize,
    mass: f64,
    free: Vec<usize>,
    inv: DMatrix<f64>,
    w: Vec<f64>,
    updates: usize,
    iterations: usize,
    trace: Vec<f64>,
}

impl<'a> ActiveSet<'a> {
    fn new(kernel: &'a [f64], phi: &'a [f64], mass: f64) -> Self {
        let n = phi.len();
        let start = (0..n).min_by(|&a, &b| phi[a].total_cmp(&phi[b])).unwrap();
        let kii = kernel[start * n + start];
        let inv = DMatrix::from_row_slice(2, 2, &[-kii, 1.0, 1.0, 0.0]);
        let mut w = vec![0.0; n];
        w[start] = mass;
        let mut s =
            ActiveSet { kernel, phi, n, mass, free: vec![start], inv, w, updates: 0, iterations: 0, trace: vec![] };
        let e = s.energy();
        s.trace.push(e);
        s
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.n + j]
    }

    fn energy(&self) -> f64 {
        let mut e = 0.0;
        for &i in &self.free {
            let mut s = 0.0;
            for &j in &self.free {
                s += self.k(i, j) * self.w[j];
            }
            e += self.w[i] * (s + 2.0 * self.phi[i]);
        }
        e
    }

    /// `U = Kw + φ` at every node.
    fn total_potential(&self) -> Vec<f64> {
        crate::par::map_range(self.n, |i| {
            let row = &self.kernel[i * self.n..(i + 1) * self.n];
            self.phi[i] + self.free.iter().map(|&j| row[j] * self.w[j]).sum::<f64>()
        })
    }

    fn refresh(&mut self) -> bool {
        let k = self.free.len();
        let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
        for a in 0..k {
            m[(0, a + 1)] = 1.0;
            m[(a + 1, 0)] = 1.0;
            for b in 0..k {
                m[(a + 1, b + 1)] = self.k(self.free[a], self.free[b]);
            }
        }
        self.updates = 0;
        match m.lu().try_inverse() {
            Some(inv) => {
                self.inv = inv;
                true
            }
            None => false,
        }
    }

    /// Minimizer of the quadratic on the current free set: `(w_F, W)`.
    fn subproblem(&self) -> (Vec<f64>, f64) {
        let k = self.free.len();
        let mut x = vec![0.0; k + 1];
        for (r, xr) in x.iter_mut().enumerate() {
            let mut s = self.inv[(r, 0)] * self.mass;
            for a in 0..k {
                s -= self.inv[(r, a + 1)] * self.phi[self.free[a]];
            }
            *xr = s;
        }
        (x[1..].to_vec(), -x[0])
    }

    fn add(&mut self, j: usize) -> Result<(), String> {
        let k = self.free.len();
        let mut b = vec![1.0; k + 1];
        for a in 0..k {
            b[a + 1] = self.k(self.free[a], j);
        }
        let u: Vec<f64> = (0..=k).map(|r| (0..=k).map(|c| self.inv[(r, c)] * b[c]).sum()).collect();
        let schur = self.k(j, j) - b.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>();
        if !(schur > 1e-14 * self.k(j, j).abs().max(1.0)) {
            return Err(format!("kernel not positive on the feasible set (schur complement {schur:.3e})"));
        }
        let mut inv = DMatrix::<f64>::zeros(k + 2, k + 2);
        for r in 0..=k {
            for c in 0..=k {
                inv[(r, c)] = self.inv[(r, c)] + u[r] * u[c] / schur;
            }
            inv[(r, k + 1)] = -u[r] / schur;
            inv[(k + 1, r)] = -u[r] / schur;
        }
        inv[(k + 1, k + 1)] = 1.0 / schur;
        self.inv = inv;
        self.free.push(j);
        self.updates += 1;
        Ok(())
    }

    fn remove(&mut self, pos: usize) {
        let r = pos + 1;
        let k = self.free.len();
        let prr = self.inv[(r, r)];
        let idx: Vec<usize> = (0..=k).filter(|&i| i != r).collect();
        let mut inv = DMatrix::<f64>::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                inv[(a, b)] = self.inv[(i, j)] - self.inv[(i, r)] * self.inv[(r, j)] / prr;
            }
        }
        self.inv = inv;
        self.w[self.free[pos]] = 0.0;
        self.free.remove(pos);
        self.updates += 1;
    }

    fn run(&mut self, opts: SolverOptions) -> Outcome {
        let neg_tol = 1e-14 * self.mass;
        let mut refreshed_at_end = false;
        while self.iterations < opts.max_iter {
            self.iterations += 1;
            if self.updates >= 64 && !self.refresh() {
                return Outcome::Unbounded("singular bordered kernel".into());
            }
            let (target, _) = self.subproblem();
            let blocking = target
                .iter()
                .enumerate()
                .filter(|(_, &t)| t < -neg_tol)
                .map(|(a, &t)| {
                    let cur = self.w[self.free[a]];
                    (a, cur / (cur - t))
                })
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match blocking {
                Some((pos, alpha)) => {
                    for (a, &t) in target.iter().enumerate() {
                        let i = self.free[a];
                        self.w[i] += alpha * (t - self.w[i]);
                    }
                    self.remove(pos);
                    self.renormalize();
                    let e = self.energy();
                    self.trace.push(e);
                    continue;
                }
                None => {
                    for (a, &t) in target.iter().enumerate() {
                        self.w[self.free[a]] = t.max(0.0);
                    }
                    self.renormalize();
                }
            }
            let e = self.energy();
            self.trace.push(e);
            let u = self.total_potential();
            let level = self.level(&u);
            let free_mask = self.free_mask();
            let (j, gap) = (0..self.n)
                .filter(|&i| !free_mask[i])
                .map(|i| (i, u[i] - level))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap_or((usize::MAX, 0.0));
            let stop = 1e-12 * (1.0 + level.abs());
            if j == usize::MAX || gap >= -stop {
                if refreshed_at_end {
                    return Outcome::Converged;
                }
                // polish once with a fresh factorization
                if !self.refresh() {
                    return Outcome::Unbounded("singular bordered kernel".into());
                }
                refreshed_at_end = true;
                continue;
            }
            refreshed_at_end = false;
            if let Err(msg) = self.add(j) {
                return Outcome::Unbounded(msg);
            }
        }
        Outcome::Cap
    }

    fn free_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &i in &self.free {
            m[i] = true;
        }
        m
    }

    /// Mass-weighted mean of the total potential over the free set.
    fn level(&self, u: &[f64]) -> f64 {
        self.free.iter().map(|&i| self.w[i] * u[i]).sum::<f64>() / self.mass
    }

    fn renormalize(&mut self) {
        let s: f64 = self.w.iter().sum();
        if s > 0.0 {
            let f = self.mass / s;
            self.w.iter_mut().for_each(|w| *w *= f);
        }
    }

    fn finish(self, nodes: NodeSet, tol: f64) -> EquilibriumResult {
        let u = self.total_potential();
        let level = self.level(&u);
        let threshold = tol.max(1e-3 / self.n as f64) * self.mass;
        let support_mask: Vec<bool> = self.w.iter().map(|&w| w > threshold).collect();
        let mut residual_eq: f64 = 0.0;
        let mut min_off = f64::INFINITY;
        for i in 0..self.n {
            if support_mask[i] {
                residual_eq = residual_eq.max((u[i] - level).abs());
            } else {
                min_off = min_off.min(u[i]);
            }
        }
        let residual_ineq = if min_off.is_finite() { (level - min_off).max(0.0) } else { 0.0 };
        let energy = self.energy();
        let measure = DiscreteMeasure::with_mass(nodes.nodes.clone(), self.w.clone(), self.mass)
            .expect("solver weights are valid");
        EquilibriumResult {
            measure,
            constant_w: level,
            energy,
            support_mask,
            residual_eq,
            residual_ineq,
            iterations: self.iterations,
            energy_trace: self.trace,
            nodes,
        }
    }
}
