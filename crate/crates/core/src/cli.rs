//! Scenario runner behind the `scurves` binary: JSON configs with flag
//! overrides, deterministic summaries and CSV/SVG artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::contours::{ContourSystem, Exclusion, FamilySpec};
use crate::fields::ExternalField;
use crate::measures::{discretize, solve_on_nodes, DiscreteMeasure, EquilibriumResult, SolverOptions};
use crate::orthopoly::{
    heine_stieltjes, laurent_moments, nth_root_check, orthopoly_varying, pade_denominator, weak_star_distance,
    zero_counting, BranchSpec, PolyRecord,
};
use crate::quaddiff::chebotarev_solve;
use crate::scurve::{maximize_energy, sproperty_residual, SearchOptions};
use crate::szego::{
    build_wn, compare_interior, counting_between_zeros, electrostatic_model, orthogonal_polynomial, Construction,
    SzegoModel, Weight,
};
use crate::{c64, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Equilibrium,
    Scurve,
    Chebotarev,
    Pade,
    Heine,
    Szego,
    Verify,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Equilibrium => "equilibrium",
            Scenario::Scurve => "scurve",
            Scenario::Chebotarev => "chebotarev",
            Scenario::Pade => "pade",
            Scenario::Heine => "heine",
            Scenario::Szego => "szego",
            Scenario::Verify => "verify",
        }
    }
}

/// Everything a scenario reads. Missing keys in a config file take these
/// defaults; `out_dir` is excluded from the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub field: ExternalField,
    pub contour: ContourSystem,
    pub exclusions: Vec<Exclusion>,
    pub mass: f64,
    pub n_nodes: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub search_iter: usize,
    pub precision_bits: u32,
    pub seed: u64,
    /// Fixed points of a Chebotarev problem.
    pub anchors: Vec<C64>,
    /// Function expanded at infinity for Padé.
    pub branch: BranchSpec,
    pub degrees: Vec<usize>,
    /// Points where zero-counting measures are compared to the equilibrium.
    pub probes: Vec<C64>,
    pub a_poly: Vec<C64>,
    pub b_poly: Vec<C64>,
    pub heine_degree: usize,
    pub weight: Weight,
    pub szego_degree: usize,
    pub construction: Construction,
    pub svg: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::Equilibrium,
            field: ExternalField::Zero,
            contour: ContourSystem::segment(c64(-1.0, 0.0), c64(1.0, 0.0)),
            exclusions: vec![],
            mass: 1.0,
            n_nodes: 400,
            tol: 1e-8,
            max_iter: 5000,
            search_iter: 300,
            precision_bits: crate::mp::DEFAULT_PRECISION,
            seed: 0,
            anchors: vec![],
            branch: BranchSpec::inverse_sqrt_segment(),
            degrees: vec![4, 8, 16, 24],
            probes: vec![c64(2.0, 0.0), c64(0.0, 1.5), c64(-1.5, 0.5)],
            a_poly: vec![c64(-1.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)],
            b_poly: vec![c64(0.0, 0.0), c64(2.0, 0.0)],
            heine_degree: 2,
            weight: Weight::unit(),
            szego_degree: 20,
            construction: Construction::Positive,
            svg: false,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if !(self.mass > 0.0) || !(self.tol > 0.0) {
            return bad(format!("mass and tol must be positive (mass {}, tol {})", self.mass, self.tol));
        }
        if self.n_nodes < 2 || self.max_iter == 0 || self.search_iter == 0 {
            return bad("n_nodes >= 2 and positive iteration caps required".into());
        }
        if self.precision_bits < 128 {
            return bad(format!("precision_bits {} below 128", self.precision_bits));
        }
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return bad("degrees must be a non-empty list of positive integers".into());
        }
        if self.heine_degree == 0 || self.szego_degree == 0 {
            return bad("heine_degree and szego_degree must be positive".into());
        }
        if self.probes.is_empty() {
            return bad("at least one probe point required".into());
        }
        if self.contour.arcs.is_empty() {
            return Err(Error::EmptyContour);
        }
        let problems = self.contour.validate();
        if !problems.is_empty() {
            return bad(problems.join("; "));
        }
        self.field.validate()
    }

    /// SHA-256 of the canonical JSON form, output directory cleared.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.out_dir = None;
        let digest = Sha256::digest(serde_json::to_vec(&canon)?);
        Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }
}

/// One declared tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value <= limit }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Check { name: name.into(), value: if ok { 1.0 } else { 0.0 }, limit: 1.0, passed: ok }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub scenario: Scenario,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub summary: Value,
    pub out_dir: PathBuf,
}

impl ExitReport {
    pub fn exit_code(&self) -> u8 {
        match (&self.error, self.passed) {
            (Some(_), _) => 3,
            (None, false) => 1,
            (None, true) => 0,
        }
    }
}

/// Geometry handed to [`render_svg`].
#[derive(Debug, Clone, Default)]
pub struct SvgArtifacts {
    pub contours: Vec<ContourSystem>,
    pub trajectories: Vec<Vec<C64>>,
    pub measures: Vec<DiscreteMeasure>,
}

struct Outcome {
    results: Value,
    checks: Vec<Check>,
    svg: SvgArtifacts,
}

/// Runs the configured scenario and writes `summary.json`,
/// `metadata.json` and its artifacts into the output directory.
pub fn run(config: &RunConfig) -> Result<ExitReport> {
    config.validate()?;
    let out = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let hash = config.hash()?;
    let started = Instant::now();
    let outcome = match config.scenario {
        Scenario::Equilibrium => equilibrium(config, &out),
        Scenario::Scurve => scurve(config, &out),
        Scenario::Chebotarev => chebotarev(config, &out),
        Scenario::Pade => pade(config, &out),
        Scenario::Heine => heine(config, &out),
        Scenario::Szego => szego(config, &out),
        Scenario::Verify => verify(config, &out),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let header = json!({
        "scenario": config.scenario,
        "config_hash": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "precision_bits": config.precision_bits,
    });
    let timestamp =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_json(&out.join("metadata.json"), &json!({ "unix_time": timestamp, "elapsed_seconds": elapsed }))?;
    match outcome {
        Ok(o) => {
            let passed = o.checks.iter().all(|c| c.passed);
            let mut summary = header;
            summary["passed"] = json!(passed);
            summary["checks"] = serde_json::to_value(&o.checks)?;
            summary["results"] = o.results;
            write_json(&out.join("summary.json"), &summary)?;
            if config.svg {
                std::fs::write(out.join("figure.svg"), render_svg(&o.svg))?;
            }
            Ok(ExitReport { scenario: config.scenario, passed, checks: o.checks, error: None, summary, out_dir: out })
        }
        Err(e) => {
            let mut diag = header;
            diag["passed"] = json!(false);
            diag["error"] = json!(e.to_string());
            write_json(&out.join("diagnostic.json"), &diag)?;
            Ok(ExitReport {
                scenario: config.scenario,
                passed: false,
                checks: vec![],
                error: Some(e.to_string()),
                summary: diag,
                out_dir: out,
            })
        }
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_points(path: &Path, points: &[C64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["re", "im"])?;
    for z in points {
        w.write_record([z.re.to_string(), z.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn solver(config: &RunConfig) -> SolverOptions {
    SolverOptions { tol: config.tol, max_iter: config.max_iter }
}

/// Equilibrium on the configured contour; a non-converged solve still
/// reports its best iterate.
fn equilibrium_on(
    config: &RunConfig,
    contour: &ContourSystem,
    field: &ExternalField,
) -> Result<(EquilibriumResult, bool)> {
    let nodes = discretize(contour, config.n_nodes)?;
    match solve_on_nodes(&nodes, field, config.mass, solver(config)) {
        Ok(eq) => Ok((eq, true)),
        Err(Error::NotConverged { best, .. }) => Ok((*best, false)),
        Err(e) => Err(e),
    }
}

fn extents(eq: &EquilibriumResult, arcs: usize) -> Value {
    (0..arcs).map(|a| eq.support_extent(a).map(|(lo, hi)| json!([lo, hi]))).collect::<Vec<_>>().into()
}

fn equilibrium(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let (eq, converged) = equilibrium_on(config, &config.contour, &config.field)?;
    eq.measure.write_csv(&out.join("measure.csv"))?;
    let s_residual = sproperty_residual(&eq, &config.field, None).ok();
    let results = json!({
        "measure_path": "measure.csv",
        "constant_w": eq.constant_w,
        "energy": eq.energy,
        "residual_eq": eq.residual_eq,
        "residual_ineq": eq.residual_ineq,
        "iterations": eq.iterations,
        "s_residual": s_residual,
        "support": extents(&eq, config.contour.arcs.len()),
    });
    Ok(Outcome {
        results,
        checks: vec![Check::flag("solver_converged", converged)],
        svg: SvgArtifacts { contours: vec![config.contour.clone()], measures: vec![eq.measure], ..Default::default() },
    })
}

fn family(config: &RunConfig) -> FamilySpec {
    let mut f = FamilySpec::new(config.contour.clone());
    f.exclusions = config.exclusions.clone();
    f
}

fn search_options(config: &RunConfig) -> SearchOptions {
    SearchOptions {
        n_nodes: config.n_nodes,
        max_iter: config.search_iter,
        solver: solver(config),
        ..SearchOptions::default()
    }
}

fn scurve(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let r = maximize_energy(&family(config), &config.field, search_options(config))?;
    r.equilibrium.measure.write_csv(&out.join("measure.csv"))?;
    write_json(&out.join("contour.json"), &serde_json::to_value(&r.contour)?)?;
    let results = json!({
        "measure_path": "measure.csv",
        "contour_path": "contour.json",
        "energy": r.equilibrium.energy,
        "constant_w": r.equilibrium.constant_w,
        "s_residual": r.s_residual,
        "variation_residuals": r.variation_residuals,
        "steps": r.trace.len(),
        "converged": r.converged,
        "support": extents(&r.equilibrium, r.contour.arcs.len()),
    });
    Ok(Outcome {
        results,
        checks: vec![Check::flag("search_converged", r.converged)],
        svg: SvgArtifacts { contours: vec![r.contour], measures: vec![r.equilibrium.measure], ..Default::default() },
    })
}

fn chebotarev(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let c = chebotarev_solve(&config.anchors)?;
    write_json(&out.join("contour.json"), &serde_json::to_value(&c.contour)?)?;
    let v_norm = c.zeros.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let results = json!({
        "contour_path": "contour.json",
        "zeros": c.zeros,
        "v": c.v_poly,
        "v_max_abs_zero": v_norm,
        "residual": c.residual,
        "energy": c.energy,
    });
    Ok(Outcome {
        results,
        checks: vec![Check::at_most("period_residual", c.residual, 1e-8)],
        svg: SvgArtifacts { contours: vec![c.contour], ..Default::default() },
    })
}

/// Zero distribution of a sequence of polynomials against a reference
/// measure: one record per degree and a strict-decrease flag.
fn zero_sequence(
    records: &[PolyRecord],
    lambda: &DiscreteMeasure,
    probes: &[C64],
    out: &Path,
) -> Result<(Value, Vec<Check>)> {
    let mut rows = Vec::new();
    let mut dists = Vec::new();
    let mut last_nth = 0.0;
    for q in records {
        let n = q.degree();
        q.write_zeros_csv(&out.join(format!("zeros_{n}.csv")))?;
        let d = weak_star_distance(&zero_counting(q)?, lambda, probes)?;
        let (nth, skipped) = nth_root_check(q, lambda, probes)?;
        dists.push(d);
        last_nth = nth;
        rows.push(json!({
            "degree": n,
            "requested_degree": q.requested_degree,
            "zeros_path": format!("zeros_{n}.csv"),
            "weak_star": d,
            "nth_root": nth,
            "skipped_probes": skipped,
            "moment_residual": q.moment_residual,
            "condition": q.condition,
        }));
    }
    let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
    let checks = vec![Check::flag("weak_star_decreasing", decreasing), Check::at_most("nth_root_last", last_nth, 0.05)];
    Ok((json!({ "degrees": rows, "weak_star_decreasing": decreasing }), checks))
}

fn pade(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let top = *config.degrees.iter().max().expect("validated non-empty");
    let moments = laurent_moments(&config.branch, top, config.precision_bits)?;
    let records: Vec<PolyRecord> =
        config.degrees.iter().map(|&n| pade_denominator(&moments, n)).collect::<Result<_>>()?;
    let (lambda, converged) = equilibrium_on(config, &config.contour, &ExternalField::Zero)?;
    let (results, mut checks) = zero_sequence(&records, &lambda.measure, &config.probes, out)?;
    checks.push(Check::flag("reference_converged", converged));
    let zeros = records
        .iter()
        .map(|q| DiscreteMeasure::new(q.zeros.clone(), vec![1.0; q.zeros.len()]))
        .collect::<Result<_>>()?;
    Ok(Outcome {
        results,
        checks,
        svg: SvgArtifacts { contours: vec![config.contour.clone()], measures: zeros, ..Default::default() },
    })
}

fn heine(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let solutions = heine_stieltjes(&config.a_poly, &config.b_poly, config.heine_degree, config.seed)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, h) in solutions.iter().enumerate() {
        write_points(&out.join(format!("heine_{k}.csv")), &h.q.zeros)?;
        worst = worst.max(h.residual);
        rows.push(json!({ "v": h.v, "q": h.q, "residual": h.residual, "zeros_path": format!("heine_{k}.csv") }));
    }
    let results = json!({ "count": solutions.len(), "solutions": rows });
    let checks =
        vec![Check::flag("found_solution", !solutions.is_empty()), Check::at_most("ode_residual", worst, 1e-10)];
    Ok(Outcome { results, checks, svg: SvgArtifacts::default() })
}

fn szego(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let n = config.szego_degree;
    let model = SzegoModel::new(config.weight.clone(), n)?;
    let q = orthogonal_polynomial(&config.weight, n)?;
    q.write_zeros_csv(&out.join("zeros.csv"))?;
    let z = c64(2.0, 0.0);
    let ratio = (q.eval(z) / build_wn(&model, z)? - 1.0).norm();
    let em = electrostatic_model(&model, config.n_nodes, config.construction)?;
    em.lambda_n.write_csv(&out.join("lambda_n.csv"))?;
    let probes: Vec<f64> = (0..=40).map(|k| -0.8 + 0.04 * k as f64).collect();
    let fit = compare_interior(&em, &q, &probes);
    let real: Vec<f64> = q.zeros.iter().map(|z| z.re).collect();
    let counts = counting_between_zeros(&em, &real);
    let spread = counts.iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max);
    let results = json!({
        "degree": n,
        "d_infinity": model.d_infinity,
        "c_n": model.c_n,
        "exterior_ratio_error": ratio,
        "interior_fit": fit,
        "counting_max_deviation": spread,
        "zeros_path": "zeros.csv",
        "lambda_path": "lambda_n.csv",
    });
    let checks = vec![
        Check::at_most("exterior_ratio", ratio, 0.05),
        Check::at_most("interior_fit", fit, 0.1),
        Check::at_most("counting", spread, 0.1),
    ];
    Ok(Outcome { results, checks, svg: SvgArtifacts { measures: vec![em.lambda_n], ..Default::default() } })
}

/// S-curve search followed by varying-weight orthogonal polynomials on the
/// found contour; their zero distributions must approach its equilibrium.
fn verify(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let r = maximize_energy(&family(config), &config.field, search_options(config))?;
    r.equilibrium.measure.write_csv(&out.join("measure.csv"))?;
    write_json(&out.join("contour.json"), &serde_json::to_value(&r.contour)?)?;
    let records: Vec<PolyRecord> = config
        .degrees
        .iter()
        .map(|&n| orthopoly_varying(&r.contour, &BranchSpec::one(), &config.field, n, config.precision_bits))
        .collect::<Result<_>>()?;
    let (mut seq, mut checks) = zero_sequence(&records, &r.equilibrium.measure, &config.probes, out)?;
    checks.pop();
    seq["energy"] = json!(r.equilibrium.energy);
    seq["s_residual"] = json!(r.s_residual);
    seq["search_converged"] = json!(r.converged);
    let zeros = records
        .iter()
        .map(|q| DiscreteMeasure::new(q.zeros.clone(), vec![1.0; q.zeros.len()]))
        .collect::<Result<_>>()?;
    Ok(Outcome {
        results: seq,
        checks,
        svg: SvgArtifacts { contours: vec![r.contour], measures: zeros, ..Default::default() },
    })
}

/// The `verify` defaults: a bulged arc through the anchors `±2` in the
/// field `Re z²`.
pub fn verify_config() -> RunConfig {
    let arc = crate::contours::Arc::three_point_arc(c64(-2.0, 0.0), c64(0.0, 0.6), c64(2.0, 0.0), 7);
    RunConfig {
        scenario: Scenario::Verify,
        field: ExternalField::quadratic(c64(1.0, 0.0)),
        contour: ContourSystem::new(vec![arc], vec![c64(-2.0, 0.0), c64(2.0, 0.0)]),
        n_nodes: 200,
        ..RunConfig::default()
    }
}

// ---------------------------------------------------------------------------
// SVG

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Deterministic SVG: contours as one path each (a subpath per arc),
/// trajectories as paths, measure atoms as circles with radius
/// proportional to weight.
pub fn render_svg(artifacts: &SvgArtifacts) -> String {
    let contour_paths: Vec<Vec<Vec<C64>>> =
        artifacts.contours.iter().map(|c| c.sampled((c.diameter() / 400.0).max(1e-9))).collect();
    let all = contour_paths
        .iter()
        .flatten()
        .flatten()
        .chain(artifacts.trajectories.iter().flatten())
        .chain(artifacts.measures.iter().flat_map(|m| m.nodes()));
    let (mut lo, mut hi) = (c64(f64::INFINITY, f64::INFINITY), c64(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for z in all {
        lo = c64(lo.re.min(z.re), lo.im.min(z.im));
        hi = c64(hi.re.max(z.re), hi.im.max(z.im));
    }
    if !lo.re.is_finite() {
        lo = c64(-1.0, -1.0);
        hi = c64(1.0, 1.0);
    }
    let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-9);
    let w = (hi.re - lo.re).max(0.1 * span);
    let h = (hi.im - lo.im).max(0.1 * span);
    let (mx, my) = (0.05 * w, 0.05 * h);
    let mid = (lo + hi) * 0.5;
    let (x0, y0, vw, vh) = (mid.re - 0.5 * w - mx, -(mid.im + 0.5 * h + my), w + 2.0 * mx, h + 2.0 * my);
    let stroke = 0.004 * span;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0:.6} {y0:.6} {vw:.6} {vh:.6}\" width=\"800\" height=\"{:.0}\">",
        800.0 * vh / vw
    );
    let subpath = |pts: &[C64], d: &mut String| {
        for (k, z) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.6} {:.6} ", if k == 0 { "M" } else { "L" }, z.re, -z.im);
        }
    };
    for (k, arcs) in contour_paths.iter().enumerate() {
        let mut d = String::new();
        for pts in arcs {
            subpath(pts, &mut d);
        }
        let _ = writeln!(
            s,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{stroke:.6}\"/>",
            d.trim_end(),
            PALETTE[k % PALETTE.len()]
        );
    }
    for (k, pts) in artifacts.trajectories.iter().enumerate() {
        let mut d = String::new();
        subpath(pts, &mut d);
        let _ = writeln!(
            s,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.6}\" stroke-dasharray=\"{:.6}\"/>",
            d.trim_end(),
            PALETTE[(k + 1) % PALETTE.len()],
            0.5 * stroke,
            2.0 * stroke
        );
    }
    for (k, m) in artifacts.measures.iter().enumerate() {
        let wmax = m.weights().iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let color = PALETTE[(k + 2) % PALETTE.len()];
        for (z, wt) in m.nodes().iter().zip(m.weights()) {
            let r = 0.01 * span * wt / wmax;
            let _ = writeln!(s, "<circle cx=\"{:.6}\" cy=\"{:.6}\" r=\"{r:.6}\" fill=\"{color}\"/>", z.re, -z.im);
        }
    }
    s.push_str("</svg>\n");
    s
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "scurves", version, about = "Equilibrium measures, S-curves and orthogonal polynomial experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "SCURVES_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Working precision in bits for extended-precision stages.
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Also write figure.svg.
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Weighted equilibrium measure on a fixed contour.
    Equilibrium,
    /// Energy ascent over a contour family.
    Scurve,
    /// Minimal-capacity continuum through the anchors.
    Chebotarev,
    /// Padé denominators of a branch function.
    Pade,
    /// Heine-Stieltjes polynomial solutions.
    Heine,
    /// Strong asymptotics model on [-1, 1].
    Szego,
    /// S-curve search cross-checked by orthogonal polynomial zeros.
    Verify,
}

impl Command {
    pub fn scenario(self) -> Scenario {
        match self {
            Command::Equilibrium => Scenario::Equilibrium,
            Command::Scurve => Scenario::Scurve,
            Command::Chebotarev => Scenario::Chebotarev,
            Command::Pade => Scenario::Pade,
            Command::Heine => Scenario::Heine,
            Command::Szego => Scenario::Szego,
            Command::Verify => Scenario::Verify,
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let scenario = self.command.scenario();
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let mut value: Value = serde_json::from_str(&text)?;
                if let Some(obj) = value.as_object_mut() {
                    obj.insert("scenario".into(), serde_json::to_value(scenario)?);
                }
                if scenario == Scenario::Verify {
                    let mut base = serde_json::to_value(verify_config())?;
                    merge(&mut base, value);
                    serde_json::from_value(base)?
                } else {
                    serde_json::from_value(value)?
                }
            }
            None if scenario == Scenario::Verify => verify_config(),
            None => RunConfig { scenario, ..RunConfig::default() },
        };
        if let Some(v) = &self.out {
            cfg.out_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.precision {
            cfg.precision_bits = v;
        }
        if let Some(v) = self.nodes {
            cfg.n_nodes = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        cfg.svg |= self.svg;
        Ok(cfg)
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base.as_object_mut(), over) {
        (Some(b), Value::Object(o)) => {
            for (k, v) in o {
                b.insert(k, v);
            }
        }
        (_, o) => *base = o,
    }
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let report = cli.resolve().and_then(|cfg| run(&cfg));
    match report {
        Ok(r) => {
            println!("{}", serde_json::to_string_pretty(&r.summary).unwrap_or_default());
            r.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
