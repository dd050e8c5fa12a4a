//! Verification suites: sample a family on a grid, evaluate every applicable
//! identity pointwise and reduce to named checks.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::families::{
    calabi_lambda, centro_affine_sphere, cp, jtangency_complex_check, lambda_from_alpha, matrix_a,
    named_family, pair, source, sphere_from_pair, suspend, torus_quadric_defect, CentroAffineSphere, Family,
    FamilyKind, FamilySpec, Geometry,
};
use crate::hypersurface::{
    blaschke_normalize, curvature_from, decompose, decompose_jets, fundamental_residuals,
    fundamental_residuals_from, Hypersurface, InducedObjects, TOL_ALGEBRAIC, TOL_DIFF1, TOL_DIFF2,
};
use crate::jets::linalg::det_f64;
use crate::jets::{DomainBox, Jet};
use crate::paracomplex::{
    decompose2_jets, eta_bracket, eta_bracket_formula, eta_brackets_at, field_jets, frame_invariant_residual,
    h1h2_relation_residual, h_xi_xi, h_zeta_in_basis, jtangency_residual, jtilde, normalize_affine_normal2,
    paracontact_from, paracontact_residuals_from, CodimTwoSurface, DBasis, ParacontactJets, INVOLUTIVITY_TOL,
    PARACONTACT_IDENTITIES,
};

/// Fraction of skipped grid points above which a suite fails.
pub const MAX_SKIP_FRACTION: f64 = 0.05;

/// Per-axis sample counts, optionally with overridden ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<(f64, f64)>>,
}

impl GridSpec {
    pub fn uniform(n: usize) -> GridSpec {
        GridSpec {
            counts: vec![n],
            ranges: None,
        }
    }

    /// 8 points per axis up to three dimensions, 4 above.
    pub fn default_for(dim: usize) -> GridSpec {
        GridSpec::uniform(if dim <= 3 { 8 } else { 4 })
    }

    /// Resolved grid description for a domain.
    pub fn resolve(&self, domain: &DomainBox) -> Result<GridDescription> {
        let dim = domain.dim();
        let counts = match self.counts.len() {
            1 => vec![self.counts[0]; dim],
            l if l == dim => self.counts.clone(),
            l => {
                return Err(GeomError::InvalidParameter(format!(
                    "grid has {l} axis counts for a {dim}-dimensional domain"
                )))
            }
        };
        if counts.contains(&0) {
            return Err(GeomError::InvalidParameter("grid counts must be positive".into()));
        }
        let ranges = match &self.ranges {
            Some(r) if r.len() == dim => r.clone(),
            Some(r) => {
                return Err(GeomError::InvalidParameter(format!(
                    "grid has {} ranges for a {dim}-dimensional domain",
                    r.len()
                )))
            }
            None => domain.ranges.clone(),
        };
        for (i, ((lo, hi), (dlo, dhi))) in ranges.iter().zip(&domain.ranges).enumerate() {
            if lo > hi || *lo < dlo - 1e-12 || *hi > dhi + 1e-12 {
                return Err(GeomError::InvalidParameter(format!(
                    "range ({lo}, {hi}) on axis {i} leaves the domain ({dlo}, {dhi})"
                )));
            }
        }
        Ok(GridDescription { counts, ranges })
    }
}

/// Fully resolved sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescription {
    pub counts: Vec<usize>,
    pub ranges: Vec<(f64, f64)>,
}

impl GridDescription {
    /// Tensor grid, last axis fastest; a single sample sits at the centre.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .counts
            .iter()
            .zip(&self.ranges)
            .map(|(&n, &(lo, hi))| {
                if n == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..n)
                        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut pts = vec![Vec::new()];
        for axis in &axes {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        pts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One named residual check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
}

impl CheckResult {
    pub fn new(
        name: impl Into<String>,
        max_residual: f64,
        tolerance: f64,
        witness: Option<Vec<f64>>,
    ) -> CheckResult {
        let pass = max_residual < tolerance;
        CheckResult {
            name: name.into(),
            max_residual,
            tolerance,
            pass,
            witness: if pass { None } else { witness.or(Some(Vec::new())) },
            constants: BTreeMap::new(),
        }
    }

    pub fn with_constant(mut self, key: &str, v: f64) -> CheckResult {
        self.constants.insert(key.to_string(), v);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family: String,
    pub parameters: Vec<f64>,
    pub grid: GridDescription,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub constants: Constants,
    pub skipped_points: usize,
    pub wall_time_s: f64,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The report with the timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> VerificationReport {
        VerificationReport {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// Residuals gathered at one point.
#[derive(Debug, Default)]
struct PointOutcome {
    residuals: Vec<(&'static str, f64, f64)>,
    shape: Option<Vec<Vec<f64>>>,
    h_xi_xi: Option<f64>,
    pick: Option<f64>,
}

impl PointOutcome {
    fn push(&mut self, name: &'static str, value: f64, tol: f64) {
        self.residuals.push((name, value, tol));
    }
}

/// Max-with-witness reduction in grid order.
#[derive(Default)]
struct Reducer {
    order: Vec<&'static str>,
    entries: BTreeMap<&'static str, (f64, f64, Option<Vec<f64>>)>,
}

impl Reducer {
    fn add(&mut self, name: &'static str, value: f64, tol: f64, p: &[f64]) {
        let e = self.entries.entry(name).or_insert_with(|| {
            self.order.push(name);
            (f64::NEG_INFINITY, tol, None)
        });
        let bad = !value.is_finite();
        if bad || value > e.0 {
            e.0 = if bad { f64::INFINITY } else { value };
            e.2 = Some(p.to_vec());
        }
    }

    fn finish(self) -> Vec<CheckResult> {
        self.order
            .iter()
            .map(|n| {
                let (v, tol, w) = self.entries[n].clone();
                CheckResult::new(*n, v, tol, w)
            })
            .collect()
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Data shared across grid points of one suite.
struct SuiteContext<'a> {
    family: &'a Family,
    seed: u64,
    dbasis: Option<DBasis>,
    /// Blaschke normalization of the sources (Calabi checks).
    sources: Option<(CentroAffineSphere, CentroAffineSphere)>,
    blaschke_hs: Option<Hypersurface>,
    idempotent: Option<Hypersurface>,
    perturbed: Option<Hypersurface>,
    matrix_identity: Option<(crate::jets::SmoothMap, crate::jets::SmoothMap)>,
}

/// Generator keyed by the point itself, so nested grids draw identical samples.
fn point_rng(seed: u64, p: &[f64]) -> ChaCha8Rng {
    let key = p.iter().fold(seed, |h, x| {
        (h ^ x.to_bits())
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(29)
    });
    ChaCha8Rng::seed_from_u64(key)
}

fn hyper_point(ctx: &SuiteContext, hs: &Hypersurface, p: &[f64]) -> Result<PointOutcome> {
    let fam = ctx.family;
    let mut out = PointOutcome::default();
    let gram = hs.f.jacobian_gram(p)?;
    out.push("immersion", if gram > 1e-12 { 0.0 } else { 1.0 }, 0.5);

    let ind = decompose_jets(hs, p, 4)?;
    out.push("reconstruction", ind.reconstruction_residual(), TOL_ALGEBRAIC);
    let fr = fundamental_residuals_from(&ind)?;
    out.push("gauss_equation", fr.gauss, TOL_DIFF1);
    out.push("codazzi_h", fr.codazzi_h, TOL_DIFF1);
    out.push("codazzi_s", fr.codazzi_s, TOL_DIFF1);
    out.push("ricci", fr.ricci, TOL_DIFF1);
    if let Some(ph) = &ctx.perturbed {
        out.push(
            "fundamental_perturbed",
            fundamental_residuals(ph, p)?.max(),
            TOL_DIFF1,
        );
    }

    let values = ind.values();
    if fam.claims.sphere {
        out.push("blaschke_tau", max_abs(values.tau.iter().copied()), TOL_DIFF1);
        out.push(
            "blaschke_volume",
            (values.omega_h - values.theta.abs()).abs() / values.theta.abs(),
            TOL_DIFF1,
        );
        let sphere_hs = ctx.blaschke_hs.as_ref().unwrap_or(hs);
        let sv: InducedObjects = decompose(sphere_hs, p)?;
        out.shape = Some(sv.shape);
    }
    if let (Some(s), Some(b)) = (&fam.sphere, &ctx.blaschke_hs) {
        let c = b.c.field_jets(p, 0)?;
        let fv = hs.f.eval(p)?;
        let norm = fv.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = c
            .iter()
            .zip(&fv)
            .map(|(a, f)| (a.value() + s.lambda * f).powi(2))
            .sum::<f64>()
            .sqrt();
        out.push("centro_affine_field", d / norm, TOL_DIFF1);
        if let Some(twice) = &ctx.idempotent {
            let c2 = twice.c.field_jets(p, 0)?;
            let diff = max_abs(c.iter().zip(&c2).map(|(a, b)| a.value() - b.value()));
            out.push("blaschke_idempotence", diff, TOL_ALGEBRAIC);
        }
    }

    let curv = curvature_from(&ind)?;
    out.push("curvature_gauss", curv.gauss_equation_residual, TOL_DIFF1);
    if fam.claims.sphere {
        out.push("cubic_symmetry", curv.cubic_asymmetry, 1e-9);
    }
    if fam.claims.flat {
        out.push("metric_flatness", curv.riemann_metric_max, TOL_DIFF2);
    }
    if fam.claims.parallel_cubic {
        out.push("parallel_cubic", curv.cubic_parallel_residual, TOL_DIFF2);
    }
    out.pick = Some(curv.pick);

    if fam.claims.jtangent {
        out.push("jtangency", jtangency_residual(hs, p)?, 1e-12);
        let pj: ParacontactJets = paracontact_from(decompose_jets(hs, p, 3)?)?;
        let frame = pj.frame();
        out.push(
            "paracontact_frame",
            frame_invariant_residual(&frame),
            TOL_ALGEBRAIC,
        );
        let pr = paracontact_residuals_from(&pj)?;
        for (name, v) in PARACONTACT_IDENTITIES.iter().zip(pr.0) {
            out.push(name, v, TOL_DIFF1);
        }
        if let Some(basis) = &ctx.dbasis {
            let fields = basis.fields(&pj);
            let ker = max_abs(fields.iter().map(|f| pj.eta_of(f).value()));
            out.push("d_equals_ker_eta", ker, TOL_ALGEBRAIC);
            out.push("involutivity", eta_brackets_at(hs, basis, p)?, INVOLUTIVITY_TOL);
        }
        // the bracket identity for seeded random constant-coefficient fields
        let m = hs.dim();
        let mut rng = point_rng(ctx.seed, p);
        let space = pj.eta[0].space().clone();
        let mut worst: f64 = 0.0;
        for _ in 0..3 {
            let mut rand_field = || -> Vec<Jet> {
                (0..m)
                    .map(|_| Jet::constant(&space, rng.gen_range(-1.0..1.0)))
                    .collect()
            };
            let (xf, yf) = (rand_field(), rand_field());
            worst = worst.max((eta_bracket(&pj, &xf, &yf) - eta_bracket_formula(&pj, &xf, &yf)).abs());
        }
        out.push("paracontact_random_fields", worst, TOL_DIFF1);
        out.h_xi_xi = Some(h_xi_xi(&pj));
    }

    match fam.kind {
        FamilyKind::Example => {
            let h = &values.h;
            let want = [[0.0, -1.0, 0.0], [-1.0, 0.0, 2.0 * p[0]], [0.0, 2.0 * p[0], -1.0]];
            let d = max_abs((0..3).flat_map(|i| (0..3).map(move |j| h[i][j] - want[i][j])));
            out.push("example_h", d, 1e-9);
            let pj = paracontact_from(decompose_jets(hs, p, 3)?)?;
            let space = pj.eta[0].space().clone();
            let dx = vec![
                Jet::constant(&space, 1.0),
                Jet::constant(&space, 0.0),
                Jet::constant(&space, 0.0),
            ];
            let w = field_jets(&crate::families::example_w(), &fam.domain, p, 1)?;
            out.push(
                "example_eta_bracket",
                (eta_bracket(&pj, &dx, &w) - 2.0).abs(),
                1e-9,
            );
        }
        FamilyKind::Suspension => {
            let fj = hs.f.eval_jets(p, 1)?;
            let z = hs.dim() - 1;
            let jf = jtilde(&fj.iter().map(Jet::value).collect::<Vec<_>>())?;
            out.push(
                "suspension_ode",
                max_abs(fj.iter().zip(&jf).map(|(c, j)| c.d(z) + j)),
                1e-14,
            );
            if let Some((sp, ac)) = &ctx.matrix_identity {
                let fv = hs.f.eval(p)?;
                let a = sp.eval(p)?;
                let b = ac.eval(p)?;
                out.push(
                    "sphere_from_pair",
                    max_abs(fv.iter().zip(&a).map(|(u, v)| u - v)),
                    1e-14,
                );
                out.push(
                    "calabi_matrix_identity",
                    max_abs(fv.iter().zip(&b).map(|(u, v)| u - v)),
                    1e-12,
                );
            }
        }
        FamilyKind::Calabi => {
            if let (Some((s1, s2)), Some(sphere)) = (&ctx.sources, &fam.sphere) {
                for (name, v, tol) in calabi_point(&values, s1, s2, sphere.lambda, p)? {
                    out.push(name, v, tol);
                }
            }
        }
        FamilyKind::TorusQuadric => {
            let x = hs.f.eval(p)?;
            out.push("defining_equation", torus_quadric_defect(&x).abs(), 1e-12);
            out.push("complex_tangency", jtangency_complex_check(&x).abs(), 1e-12);
        }
        _ => {}
    }
    Ok(out)
}

/// Calabi identities at `p = (x, y, z)`.
fn calabi_point(
    v: &InducedObjects,
    s1: &CentroAffineSphere,
    s2: &CentroAffineSphere,
    lambda: f64,
    p: &[f64],
) -> Result<Vec<(&'static str, f64, f64)>> {
    let n = s1.hypersurface.dim();
    let (xp, rest) = p.split_at(n);
    let yp = &rest[..n];
    let (a, b) = (s1.lambda, s2.lambda);
    let v1 = decompose(&s1.hypersurface, xp)?;
    let v2 = decompose(&s2.hypersurface, yp)?;
    let m = 2 * n + 1;
    let z = 2 * n;
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);

    let mut metric: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let want = match (i < n, j < n, i == z, j == z) {
                (_, _, true, true) => -1.0 / lambda,
                (true, true, _, _) => 0.5 * a / lambda * v1.h[i][j],
                (false, false, false, false) => 0.5 * b / lambda * v2.h[i - n][j - n],
                _ => 0.0,
            };
            metric = metric.max(rel(v.h[i][j], want));
        }
    }

    let mut conn: f64 = 0.0;
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let (ix, iy, iz) = (i < n, i >= n && i < z, i == z);
                let (jx, jy, jz) = (j < n, j >= n && j < z, j == z);
                let want = if ix && jx {
                    if k < n {
                        v1.gamma[k][i][j]
                    } else if k == z {
                        0.5 * a * v1.h[i][j]
                    } else {
                        0.0
                    }
                } else if iy && jy {
                    if k >= n && k < z {
                        v2.gamma[k - n][i - n][j - n]
                    } else if k == z {
                        -0.5 * b * v2.h[i - n][j - n]
                    } else {
                        0.0
                    }
                } else if (ix && jz) || (iz && jx) {
                    let t = if ix { i } else { j };
                    if k == t {
                        -1.0
                    } else {
                        0.0
                    }
                } else if (iy && jz) || (iz && jy) {
                    let t = if iy { i } else { j };
                    if k == t {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
                conn = conn.max(rel(v.gamma[k][i][j], want));
            }
        }
    }

    let nf = n as f64;
    let omega_want =
        ((a * b).powf(nf) / (4f64.powf(nf) * lambda.powf(2.0 * nf + 1.0))).sqrt() * v1.omega_h * v2.omega_h;
    let theta_want = (-2f64).powi(n as i32 + 2) * lambda / (a * b) * v1.theta * v2.theta;
    Ok(vec![
        ("calabi_metric", metric, 1e-9),
        ("calabi_connection", conn, 1e-9),
        ("calabi_omega", rel(v.omega_h, omega_want), TOL_DIFF1),
        ("calabi_theta", rel(v.theta, theta_want), TOL_DIFF1),
    ])
}

fn codim_two_point(gs: &CodimTwoSurface, p: &[f64], seed: u64) -> Result<PointOutcome> {
    let mut out = PointOutcome::default();
    let gram = gs.g.jacobian_gram(p)?;
    out.push("immersion", if gram > 1e-12 { 0.0 } else { 1.0 }, 0.5);
    let j = decompose2_jets(gs, p, 2)?;
    out.push("reconstruction", j.reconstruction_residual(), TOL_ALGEBRAIC);
    let (jt, normal) = j.tangent_jtilde()?;
    out.push("paraholomorphic", normal, TOL_ALGEBRAIC);
    let v = j.values();
    out.push("h1_h2_relations", h1h2_relation_residual(&v, &jt), TOL_ALGEBRAIC);
    let m = gs.dim();
    let mut rng = point_rng(seed, p);
    let mut basis = || -> Vec<Vec<f64>> {
        loop {
            let b: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            if det_f64(&b).abs() > 0.1 {
                return b;
            }
        }
    };
    let (b1, b2) = (basis(), basis());
    let h1 = h_zeta_in_basis(&v, &b1)?;
    let h2 = h_zeta_in_basis(&v, &b2)?;
    let scale = v.h_zeta.abs().max(1e-300);
    out.push(
        "h_zeta_invariance",
        ((h1 - h2).abs().max((h1 - v.h_zeta).abs())) / scale,
        TOL_ALGEBRAIC,
    );
    Ok(out)
}

fn base_point(fam: &Family) -> Vec<f64> {
    fam.domain.center()
}

/// Run every applicable check for a family on a grid.
pub fn run_suite(spec: &FamilySpec, grid: &GridSpec, seed: u64) -> Result<VerificationReport> {
    let start = Instant::now();
    let fam = named_family(spec)?;
    let desc = grid.resolve(&fam.domain)?;
    let points = desc.points();
    let mut checks = Vec::new();
    let mut constants = Constants::default();
    let mut reducer = Reducer::default();
    let skipped;

    match &fam.geometry {
        Geometry::Hyper(hs) => {
            let ctx = hyper_context(&fam, hs, seed)?;
            let outcomes: Vec<Result<PointOutcome>> =
                points.par_iter().map(|p| hyper_point(&ctx, hs, p)).collect();
            skipped = outcomes.iter().filter(|o| o.is_err()).count();
            let mut shapes = Vec::new();
            let mut hxx = Vec::new();
            let mut picks = Vec::new();
            for (p, o) in points.iter().zip(&outcomes) {
                if let Ok(o) = o {
                    for (name, v, tol) in &o.residuals {
                        reducer.add(name, *v, *tol, p);
                    }
                    if let Some(s) = &o.shape {
                        shapes.push((p.clone(), s.clone()));
                    }
                    if let Some(h) = o.h_xi_xi {
                        hxx.push((p.clone(), h));
                    }
                    picks.extend(o.pick);
                }
            }
            checks.extend(reducer.finish());
            if fam.claims.sphere && !shapes.is_empty() {
                let (lambda, sphere_check) = sphere_check(&shapes);
                constants.lambda = Some(lambda);
                checks.push(sphere_check);
                if fam.claims.jtangent {
                    let (dev, w) = hxx.iter().fold((0.0f64, None), |(d, w), (p, h)| {
                        let r = (h + lambda).abs();
                        if r > d {
                            (r, Some(p.clone()))
                        } else {
                            (d, w)
                        }
                    });
                    checks.push(CheckResult::new("xi_self_pairing", dev, TOL_DIFF1, w));
                    checks.push(CheckResult::new("lambda_nonzero", 1e-3 / lambda.abs(), 1.0, None));
                }
            }
            if !picks.is_empty() {
                let mean = picks.iter().sum::<f64>() / picks.len() as f64;
                if let Some(c) = checks.iter_mut().find(|c| c.name == "curvature_gauss") {
                    c.constants.insert("pick".into(), mean);
                }
            }
            relation_checks(&fam, &mut checks, &mut constants)?;
        }
        Geometry::CodimTwo(gs) => {
            let outcomes: Vec<Result<PointOutcome>> =
                points.par_iter().map(|p| codim_two_point(gs, p, seed)).collect();
            skipped = outcomes.iter().filter(|o| o.is_err()).count();
            for (p, o) in points.iter().zip(&outcomes) {
                if let Ok(o) = o {
                    for (name, v, tol) in &o.residuals {
                        reducer.add(name, *v, *tol, p);
                    }
                }
            }
            checks.extend(reducer.finish());
            let good: Vec<Vec<f64>> = points
                .iter()
                .zip(&outcomes)
                .filter(|(_, o)| o.is_ok())
                .map(|(p, _)| p.clone())
                .collect();
            match normalize_affine_normal2(gs, &good) {
                Ok(an) => {
                    constants.alpha = Some(an.alpha);
                    checks.push(
                        CheckResult::new("affine_normal2", an.h_residual.max(an.tau1_max), TOL_DIFF1, None)
                            .with_constant("alpha", an.alpha),
                    );
                    checks.push(CheckResult::new(
                        "para_sphere",
                        an.shape_deviation.max(an.tau2_max).max(an.alpha_spread),
                        TOL_DIFF1,
                        None,
                    ));
                    if let Some((a, b)) = &fam.sources {
                        let n = a.domain_dim();
                        let f = suspend(&pair(a, b)?)?;
                        let s = centro_affine_sphere(&f, &f.domain().center())?;
                        constants.lambda = Some(s.lambda);
                        let want = lambda_from_alpha(an.alpha, n)?;
                        checks.push(
                            CheckResult::new(
                                "alpha_lambda_relation",
                                (s.lambda.abs() - want).abs(),
                                TOL_DIFF1,
                                None,
                            )
                            .with_constant("lambda", s.lambda),
                        );
                    }
                }
                Err(_) => checks.push(failed("affine_normal2")),
            }
        }
    }

    let total = points.len().max(1);
    checks.push(CheckResult::new(
        "skipped_points",
        skipped as f64 / total as f64,
        MAX_SKIP_FRACTION + 1e-15,
        None,
    ));
    Ok(VerificationReport {
        family: fam.spec.name.clone(),
        parameters: fam.spec.parameters.clone(),
        grid: desc,
        seed,
        checks,
        constants,
        skipped_points: skipped,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// A check that could not be evaluated; serializes its residual as null.
fn failed(name: &str) -> CheckResult {
    CheckResult::new(name, f64::INFINITY, TOL_DIFF1, None)
}

fn hyper_context<'a>(fam: &'a Family, hs: &Hypersurface, seed: u64) -> Result<SuiteContext<'a>> {
    let base = base_point(fam);
    let dbasis = if fam.claims.jtangent {
        Some(DBasis::at(hs, &base)?)
    } else {
        None
    };
    let sources = match (fam.kind, &fam.sources) {
        (FamilyKind::Calabi, Some((a, b))) if !fam.spec.name.starts_with("calabi-") => Some((
            centro_affine_sphere(a, &a.domain().center())?,
            centro_affine_sphere(b, &b.domain().center())?,
        )),
        _ => None,
    };
    let (blaschke_hs, idempotent) = match &fam.sphere {
        Some(s) => {
            let b = hs.with_field(std::sync::Arc::new(s.blaschke.clone()));
            let again = blaschke_normalize(&b, &base, &[])?;
            let twice = hs.with_field(std::sync::Arc::new(again));
            (Some(b), Some(twice))
        }
        None => (None, None),
    };
    let perturbed = match (&fam.sphere, fam.kind) {
        (_, _) if hs.f.max_order() < 4 => None,
        (Some(s), _) => Some(-s.lambda),
        (None, FamilyKind::Example) => Some(-1.0),
        _ => None,
    }
    .map(|k| {
        let field = hs.f.scale(k).add_scaled(0.1, &hs.f.partial(0));
        hs.with_field(std::sync::Arc::new(field))
    });
    let matrix_identity = match (fam.kind, &fam.sources) {
        (FamilyKind::Suspension, Some((a, b))) => Some((
            sphere_from_pair(a, b)?,
            cp(a, b)?.linear(&matrix_a(a.domain_dim())),
        )),
        _ => None,
    };
    Ok(SuiteContext {
        family: fam,
        seed,
        dbasis,
        sources,
        blaschke_hs,
        idempotent,
        perturbed,
        matrix_identity,
    })
}

fn sphere_check(shapes: &[(Vec<f64>, Vec<Vec<f64>>)]) -> (f64, CheckResult) {
    let m = shapes[0].1.len();
    let means: Vec<f64> = shapes
        .iter()
        .map(|(_, s)| (0..m).map(|i| s[i][i]).sum::<f64>() / m as f64)
        .collect();
    let n = means.len() as f64;
    let lambda = means.iter().sum::<f64>() / n;
    let spread = (means.iter().map(|l| (l - lambda).powi(2)).sum::<f64>() / n).sqrt();
    let mut dev = spread;
    let mut witness = None;
    for (p, s) in shapes {
        for i in 0..m {
            for j in 0..m {
                let t = if i == j { lambda } else { 0.0 };
                let d = (s[i][j] - t).abs();
                if d > dev {
                    dev = d;
                    witness = Some(p.clone());
                }
            }
        }
    }
    (
        lambda,
        CheckResult::new("affine_sphere", dev, crate::hypersurface::SPHERE_TOL, witness)
            .with_constant("lambda", lambda),
    )
}

/// λ against the closed-form relations, with α, β from the component spheres.
fn relation_checks(fam: &Family, checks: &mut Vec<CheckResult>, constants: &mut Constants) -> Result<()> {
    let (Some((a, b)), Some(lambda)) = (&fam.sources, constants.lambda) else {
        return Ok(());
    };
    if fam.spec.name.starts_with("calabi-") {
        return Ok(());
    }
    let n = a.domain_dim();
    let alpha = centro_affine_sphere(a, &a.domain().center())?.lambda;
    let beta = centro_affine_sphere(b, &b.domain().center())?.lambda;
    constants.alpha = Some(alpha);
    constants.beta = Some(beta);
    let want = calabi_lambda(alpha, beta, n)?;
    checks.push(
        CheckResult::new("calabi_lambda_relation", (lambda - want).abs(), TOL_DIFF1, None)
            .with_constant("formula", want),
    );
    Ok(())
}

/// Compare λ of the suspension of `pair(scale·a, b)` against both closed-form relations.
pub fn cross_relation_check(a: &str, b: &str, scale: f64) -> Result<CheckResult> {
    let f1 = source(a)?.scale(scale);
    let f2 = source(b)?;
    let n = f1.domain_dim();
    let alpha = centro_affine_sphere(&f1, &f1.domain().center())?.lambda;
    let beta = centro_affine_sphere(&f2, &f2.domain().center())?.lambda;
    let g = pair(&f1, &f2)?;
    let f = suspend(&g)?;
    let lambda = centro_affine_sphere(&f, &f.domain().center())?.lambda;
    let region = GridSpec::uniform(3).resolve(g.domain())?.points();
    let an = normalize_affine_normal2(&CodimTwoSurface::radial(g)?, &region)?;
    let r1 = (lambda.abs() - lambda_from_alpha(an.alpha, n)?).abs();
    let r2 = (lambda - calabi_lambda(alpha, beta, n)?).abs();
    Ok(CheckResult::new(
        format!("cross_relation({a},{b},{scale})"),
        r1.max(r2),
        TOL_DIFF1,
        None,
    )
    .with_constant("lambda", lambda)
    .with_constant("alpha_pc", an.alpha)
    .with_constant("alpha", alpha)
    .with_constant("beta", beta))
}
