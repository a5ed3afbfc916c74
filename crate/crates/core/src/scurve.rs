//! Max-min energy search over contour families and the residuals that certify
//! its output: first variations, the S-property and criticality.

use serde::{Deserialize, Serialize};

use crate::contours::{default_cutoff, family_project, pushforward_nodes, ContourSystem, FamilySpec, VariationField};
use crate::fields::ExternalField;
use crate::measures::{
    discretize, discretize_counts, potential, solve_on_nodes, DiscreteMeasure, EquilibriumResult, NodeSet,
    SolverOptions,
};
use crate::{Error, Result, C64};

/// Derivative at `t = 0` of the discrete weighted energy (cell self-energies
/// included) when node `i` moves with velocity `dz[i]` and the log of its
/// cell length changes at rate `dlog_cell[i]`, weights held fixed.
pub fn first_variation(
    nodes: &[C64],
    weights: &[f64],
    dz: &[C64],
    dlog_cell: &[f64],
    field: &ExternalField,
) -> Result<f64> {
    if let Some(z) = nodes.iter().find(|z| field.is_singular(**z)) {
        return Err(Error::FieldSingularAtNode(*z));
    }
    let n = nodes.len();
    let rows = crate::par::map_range(n, |i| {
        let (zi, hi) = (nodes[i], dz[i]);
        let mut s = C64::new(0.0, 0.0);
        for j in 0..n {
            if j != i {
                s += weights[j] * (hi - dz[j]) / (zi - nodes[j]);
            }
        }
        let field_term = 2.0 * (field.deriv_unchecked(zi) * hi).re;
        weights[i] * (-s.re - weights[i] * dlog_cell[i] + field_term)
    });
    Ok(rows.iter().sum())
}

/// `D_h E(μ)`: first variation of the weighted energy of `mu` under
/// `z -> z + t h(z)`, with the difference quotient on the diagonal replaced
/// by `h_z`.
pub fn energy_variation(mu: &DiscreteMeasure, field: &ExternalField, h: &VariationField) -> Result<f64> {
    let dz: Vec<C64> = mu.nodes().iter().map(|&z| h.eval(z)).collect();
    let dlog: Vec<f64> = mu.nodes().iter().map(|&z| h.deriv(z).re).collect();
    first_variation(mu.nodes(), mu.weights(), &dz, &dlog, field)
}

/// As [`energy_variation`] for an equilibrium on a node set, using the
/// tangential stretch `Re(h_z + h_zbar τ̄²)` of each cell on the diagonal.
/// This is the exact derivative of the discrete energy that
/// [`finite_diff_variation`] differentiates.
pub fn energy_variation_on(result: &EquilibriumResult, field: &ExternalField, h: &VariationField) -> Result<f64> {
    let nodes = &result.nodes;
    let dz: Vec<C64> = nodes.nodes.iter().map(|&z| h.eval(z)).collect();
    let dlog: Vec<f64> = nodes
        .nodes
        .iter()
        .zip(&nodes.tangents)
        .map(|(&z, &tau)| {
            let (hz, hzb) = h.wirtinger(z);
            (hz + hzb * tau.conj() * tau.conj()).re
        })
        .collect();
    first_variation(&nodes.nodes, result.measure.weights(), &dz, &dlog, field)
}

/// `(E[K^t] - E[K]) / t` from two inner solves on the pushed-forward node set
/// of an `n_nodes` discretization of `contour`.
pub fn finite_diff_variation(
    contour: &ContourSystem,
    field: &ExternalField,
    h: &VariationField,
    t: f64,
    n_nodes: usize,
) -> Result<f64> {
    let nodes = discretize(contour, n_nodes)?;
    let opts = SolverOptions::default();
    let base = solve_on_nodes(&nodes, field, 1.0, opts)?;
    let moved = solve_on_nodes(&pushforward_nodes(&nodes, h, t)?, field, 1.0, opts)?;
    Ok((moved.energy - base.energy) / t)
}

/// Forward differences at `t, t/2, t/4` combined by two rounds of
/// Richardson extrapolation.
pub fn richardson_variation(
    contour: &ContourSystem,
    field: &ExternalField,
    h: &VariationField,
    t: f64,
    n_nodes: usize,
) -> Result<f64> {
    let nodes = discretize(contour, n_nodes)?;
    let opts = SolverOptions::default();
    let base = solve_on_nodes(&nodes, field, 1.0, opts)?.energy;
    let quotient = |s: f64| -> Result<f64> {
        let moved = solve_on_nodes(&pushforward_nodes(&nodes, h, s)?, field, 1.0, opts)?;
        Ok((moved.energy - base) / s)
    };
    let (d1, d2, d3) = (quotient(t)?, quotient(0.5 * t)?, quotient(0.25 * t)?);
    let (r1, r2) = (2.0 * d2 - d1, 2.0 * d3 - d2);
    Ok((4.0 * r2 - r1) / 3.0)
}

/// Largest mismatch of the two opposite normal derivatives of `V^λ + φ`
/// over support nodes in the middle 80% of their arc.
///
/// Each derivative is the one-sided second-order difference
/// `(-3w + 4U(ε) - U(2ε)) / (2ε)` with the equilibrium constant `w` as the
/// value on the curve; `probe_offset = None` uses three local cell lengths.
pub fn sproperty_residual(result: &EquilibriumResult, field: &ExternalField, probe_offset: Option<f64>) -> Result<f64> {
    let nodes = &result.nodes;
    let probes: Vec<usize> = (0..nodes.len())
        .filter(|&i| {
            result.support_mask[i]
                && (0.1..=0.9).contains(&nodes.fraction[i])
                && !nodes.collapsed.contains(&nodes.arc[i])
        })
        .collect();
    let w = result.constant_w;
    let values = crate::par::map_slice(&probes, |&i| {
        let z = nodes.nodes[i];
        let normal = nodes.tangents[i] * C64::new(0.0, 1.0);
        let eps = probe_offset.unwrap_or(3.0 * nodes.cells[i]);
        let total = |p: C64| potential(&result.measure, p) + field.value_unchecked(p);
        let nearest = |p: C64| nodes.nodes.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
        let mut side = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let p1 = z + normal * (sign * eps);
            let p2 = z + normal * (2.0 * sign * eps);
            if nearest(p1) < 0.5 * eps || field.is_singular(p1) || field.is_singular(p2) {
                return None;
            }
            side[k] = (-3.0 * w + 4.0 * total(p1) - total(p2)) / (2.0 * eps);
        }
        Some((side[0] - side[1]).abs())
    });
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    if kept.is_empty() && !probes.is_empty() {
        return Err(Error::ProbeTooClose(nodes.nodes[probes[0]]));
    }
    Ok(kept.into_iter().fold(0.0, f64::max))
}

/// `energy_variation` for every basis field.
pub fn critical_residual(mu: &DiscreteMeasure, field: &ExternalField, basis: &[VariationField]) -> Result<Vec<f64>> {
    crate::par::map_slice(basis, |h| energy_variation(mu, field, h)).into_iter().collect()
}

/// Schiffer fields with poles at three points around the contour, vanishing
/// near its anchors.
pub fn schiffer_basis(contour: &ContourSystem) -> Vec<VariationField> {
    let (lo, hi) = crate::contours::bbox(&contour.control_points().collect::<Vec<_>>());
    let center = 0.5 * (lo + hi);
    let r = (0.5 * (hi - lo).norm()).max(1e-3);
    let cutoff = default_cutoff(&contour.anchors);
    [C64::new(0.0, 2.0), C64::new(0.0, -2.0), C64::new(3.0, 0.0)]
        .iter()
        .map(|&p| VariationField::schiffer(center + p * r, contour.anchors.clone(), cutoff))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub n_nodes: usize,
    pub max_iter: usize,
    /// Stop when every control-point gradient is at most this large.
    pub tol: f64,
    /// Initial step as a fraction of the contour diameter.
    pub initial_step: f64,
    /// Smallest step, as a fraction of the initial diameter, before the
    /// search is declared stalled.
    pub min_step: f64,
    /// Component diameter below which the search reports a collapse, as a
    /// fraction of the initial diameter.
    pub min_diameter: f64,
    /// Absolute diameter cap; defaults to ten times the anchor-set diameter
    /// (or the initial diameter without anchors).
    pub diameter_cap: Option<f64>,
    pub energy_cap: f64,
    pub solver: SolverOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            n_nodes: 200,
            max_iter: 300,
            tol: 1e-7,
            initial_step: 0.05,
            min_step: 1e-7,
            min_diameter: 1e-3,
            diameter_cap: None,
            energy_cap: 1e3,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurveResult {
    pub contour: ContourSystem,
    pub equilibrium: EquilibriumResult,
    pub s_residual: f64,
    pub variation_residuals: Vec<f64>,
    /// `(iteration, energy)` after every accepted step.
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
}

/// Control points that move together (shared junctions), as `(arc, index)`.
fn free_groups(contour: &ContourSystem) -> Vec<Vec<(usize, usize)>> {
    let mut groups: Vec<(C64, Vec<(usize, usize)>)> = Vec::new();
    for (a, arc) in contour.arcs.iter().enumerate() {
        for (k, &p) in arc.points.iter().enumerate() {
            if contour.anchors.iter().any(|q| (p - q).norm() <= 1e-12) {
                continue;
            }
            match groups.iter_mut().find(|(q, _)| (p - *q).norm() <= 1e-12) {
                Some((_, g)) => g.push((a, k)),
                None => groups.push((p, vec![(a, k)])),
            }
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn shifted(contour: &ContourSystem, group: &[(usize, usize)], d: C64) -> ContourSystem {
    let mut out = contour.clone();
    for &(a, k) in group {
        out.arcs[a].points[k] += d;
    }
    out
}

struct Evaluated {
    contour: ContourSystem,
    counts: Vec<usize>,
    keep: Vec<usize>,
    eq: EquilibriumResult,
}

/// Solves on a discretization with node counts proportional to the current
/// arc lengths.
fn evaluate(contour: ContourSystem, n_nodes: usize, field: &ExternalField, solver: SolverOptions) -> Result<Evaluated> {
    let lengths: Vec<f64> = contour.geoms().iter().map(|g| g.length()).collect();
    let counts = crate::measures::allocate(&lengths, n_nodes);
    let all = discretize_counts(&contour, &counts)?;
    let keep: Vec<usize> = (0..all.len()).filter(|&i| !field.is_singular(all.nodes[i])).collect();
    let eq = solve_on_nodes(&all.subset(&keep), field, 1.0, solver)?;
    Ok(Evaluated { contour, counts, keep, eq })
}

/// Exact gradient of the discrete equilibrium energy with respect to each
/// free control-point group (complex: `∂/∂x + i ∂/∂y`). Weights are held at
/// their optimum, so only node and cell motion contribute.
fn control_gradient(state: &Evaluated, groups: &[Vec<(usize, usize)>], field: &ExternalField) -> Result<Vec<C64>> {
    let counts = &state.counts;
    let scale = state.contour.control_diameter().max(1e-12);
    let eps = 1e-6 * scale;
    let base: &NodeSet = &state.eq.nodes;
    let weights = state.eq.measure.weights();
    let parts = crate::par::map_range(groups.len() * 2, |job| -> Result<f64> {
        let g = &groups[job / 2];
        let dir = if job % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
        let plus = discretize_counts(&shifted(&state.contour, g, dir * eps), counts)?.subset(&state.keep);
        let minus = discretize_counts(&shifted(&state.contour, g, -dir * eps), counts)?.subset(&state.keep);
        let dz: Vec<C64> = plus.nodes.iter().zip(&minus.nodes).map(|(p, m)| (p - m) / (2.0 * eps)).collect();
        let dlog: Vec<f64> = plus.cells.iter().zip(&minus.cells).map(|(p, m)| (p / m).ln() / (2.0 * eps)).collect();
        first_variation(&base.nodes, weights, &dz, &dlog, field)
    });
    let parts: Vec<f64> = parts.into_iter().collect::<Result<_>>()?;
    Ok(parts.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

fn component_diameters(contour: &ContourSystem) -> Vec<f64> {
    let scale = contour.control_diameter().max(1e-300);
    let samples = contour.sampled(scale * 1e-2);
    contour
        .components()
        .iter()
        .map(|comp| {
            crate::contours::diameter(&comp.iter().flat_map(|&a| samples[a].iter().copied()).collect::<Vec<_>>())
        })
        .collect()
}

/// Ascent of the equilibrium energy over the family, starting from its
/// initial member. Anchors stay fixed; every step is projected back onto
/// the family and accepted only if the energy strictly increases.
pub fn maximize_energy(family: &FamilySpec, field: &ExternalField, opts: SearchOptions) -> Result<SCurveResult> {
    let start = family_project(&family.initial, family);
    let init_diam = start.diameter();
    let anchor_diam = crate::contours::diameter(&family.initial.anchors);
    let cap =
        opts.diameter_cap.unwrap_or(10.0 * if family.initial.anchors.len() >= 2 { anchor_diam } else { init_diam });
    let min_diam = opts.min_diameter * init_diam;
    let groups = free_groups(&start);

    let mut state = evaluate(start, opts.n_nodes, field, opts.solver)?;
    let mut trace = vec![(0, state.eq.energy)];
    let mut step = opts.initial_step * init_diam;
    let mut converged = false;
    for it in 1..=opts.max_iter {
        if groups.is_empty() {
            converged = true;
            break;
        }
        let grad = control_gradient(&state, &groups, field)?;
        let gmax = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if gmax <= opts.tol {
            converged = true;
            break;
        }
        let mut accepted = None;
        while step >= opts.min_step * init_diam {
            let mut cand = state.contour.clone();
            for (g, d) in groups.iter().zip(&grad) {
                cand = shifted(&cand, g, d * (step / gmax));
            }
            let cand = family_project(&cand, family);
            let ok = cand.arcs.len() == state.contour.arcs.len() && cand.is_simple();
            if ok {
                if let Ok(next) = evaluate(cand, opts.n_nodes, field, opts.solver) {
                    if next.eq.energy > state.eq.energy {
                        accepted = Some(next);
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            converged = true;
            break;
        };
        state = next;
        step *= 1.5;
        trace.push((it, state.eq.energy));
        let diams = component_diameters(&state.contour);
        if let Some(d) = diams.iter().find(|&&d| d < min_diam) {
            return Err(Error::CollapseDetected(format!(
                "component diameter {d:.3e} below {min_diam:.3e} after {it} steps (energy {:.6})",
                state.eq.energy
            )));
        }
        if let Some(d) = diams.iter().find(|&&d| d > cap) {
            return Err(Error::EnergyUnbounded(format!(
                "component diameter {d:.3e} passed the cap {cap:.3e} with energy still increasing ({:.6})",
                state.eq.energy
            )));
        }
        if state.eq.energy > opts.energy_cap {
            return Err(Error::EnergyUnbounded(format!("energy {:.6e} passed the cap", state.eq.energy)));
        }
    }
    let s_residual = sproperty_residual(&state.eq, field, None)?;
    let basis = schiffer_basis(&state.contour);
    let variation_residuals = critical_residual(&state.eq.measure, field, &basis)?;
    Ok(SCurveResult {
        contour: state.contour,
        equilibrium: state.eq,
        s_residual,
        variation_residuals,
        trace,
        converged,
    })
}
