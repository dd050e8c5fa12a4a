//! Closed-form immersions, product constructions and the named-family registry.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::hypersurface::{blaschke_normalize, BlaschkeField, Hypersurface, TransversalField};
use crate::jets::linalg::det_f64;
use crate::jets::{DomainBox, Expr, Jet, SmoothMap};
use crate::paracomplex::{jtangency_residual, CodimTwoSurface, ParaStructure};

/// Parameter range for trigonometric chart coordinates.
pub const TRIG_RANGE: (f64, f64) = (-FRAC_PI_2 + 0.1, FRAC_PI_2 - 0.1);
/// Parameter range for hyperbolic and exponential chart coordinates.
pub const HYP_RANGE: (f64, f64) = (-1.5, 1.5);
/// Range of the suspension / Calabi coordinate `z`.
pub const Z_RANGE: (f64, f64) = (-1.0, 1.0);

fn x(i: usize) -> Expr {
    Expr::coord(i)
}

pub fn ellipse() -> SmoothMap {
    SmoothMap::new(
        "ellipse",
        DomainBox::new(vec![TRIG_RANGE]),
        vec![x(0).cos(), x(0).sin()],
    )
}

pub fn hyperbola() -> SmoothMap {
    SmoothMap::new(
        "hyperbola",
        DomainBox::new(vec![HYP_RANGE]),
        vec![x(0).cosh(), x(0).sinh()],
    )
}

/// `x² + y² + z² = 1`.
pub fn sphere() -> SmoothMap {
    let (u, v) = (x(0), x(1));
    SmoothMap::new(
        "sphere",
        DomainBox::new(vec![TRIG_RANGE, TRIG_RANGE]),
        vec![&u.cos() * &v.cos(), &u.cos() * &v.sin(), u.sin()],
    )
}

/// `x² + y² − z² = 1`.
pub fn hyperboloid1() -> SmoothMap {
    let (u, v) = (x(0), x(1));
    SmoothMap::new(
        "hyperboloid1",
        DomainBox::new(vec![HYP_RANGE, TRIG_RANGE]),
        vec![&u.cosh() * &v.cos(), &u.cosh() * &v.sin(), u.sinh()],
    )
}

/// Upper sheet of `x² + y² − z² = −1`; the chart is singular at `u = 0`.
pub fn hyperboloid2() -> SmoothMap {
    let (u, v) = (x(0), x(1));
    SmoothMap::new(
        "hyperboloid2",
        DomainBox::new(vec![(0.1, HYP_RANGE.1), TRIG_RANGE]),
        vec![&u.sinh() * &v.cos(), &u.sinh() * &v.sin(), u.cosh()],
    )
}

/// `xyz = 1`.
pub fn xyz_surface() -> SmoothMap {
    let (u, v) = (x(0), x(1));
    SmoothMap::new(
        "xyz",
        DomainBox::new(vec![HYP_RANGE, HYP_RANGE]),
        vec![u.exp(), v.exp(), (-(u + v)).exp()],
    )
}

/// `(x² + y²) z = 1`.
pub fn circular_surface() -> SmoothMap {
    let (u, v) = (x(0), x(1));
    SmoothMap::new(
        "circular",
        DomainBox::new(vec![HYP_RANGE, TRIG_RANGE]),
        vec![&u.exp() * &v.cos(), &u.exp() * &v.sin(), (-2.0 * u).exp()],
    )
}

pub const SOURCES: [&str; 7] = [
    "ellipse",
    "hyperbola",
    "sphere",
    "hyperboloid1",
    "hyperboloid2",
    "xyz",
    "circular",
];

pub fn source(name: &str) -> Result<SmoothMap> {
    Ok(match name {
        "ellipse" | "e" => ellipse(),
        "hyperbola" | "h" => hyperbola(),
        "sphere" => sphere(),
        "hyperboloid1" => hyperboloid1(),
        "hyperboloid2" => hyperboloid2(),
        "xyz" => xyz_surface(),
        "circular" => circular_surface(),
        _ => return Err(GeomError::UnknownFamily(name.to_string())),
    })
}

fn same_dim(f1: &SmoothMap, f2: &SmoothMap) -> Result<usize> {
    let n = f1.domain_dim();
    if f2.domain_dim() != n || f1.codomain_dim() != n + 1 || f2.codomain_dim() != n + 1 {
        return Err(GeomError::Dimension(format!(
            "need two hypersurfaces of equal dimension, got {} and {}",
            f1.name(),
            f2.name()
        )));
    }
    Ok(n)
}

/// `g = f₁×f₂ + J̃∘(f₁×(−f₂))`, i.e. `(f₁(x) − f₂(y), f₁(x) + f₂(y))`.
pub fn pair(f1: &SmoothMap, f2: &SmoothMap) -> Result<SmoothMap> {
    let n = same_dim(f1, f2)?;
    let prod = f1.product(f2);
    let c = prod.components();
    let (a, b) = c.split_at(n + 1);
    let first = a.iter().zip(b).map(|(p, q)| p - q);
    let second = a.iter().zip(b).map(|(p, q)| p + q);
    Ok(SmoothMap::new(
        format!("pair({},{})", f1.name(), f2.name()),
        prod.domain().clone(),
        first.chain(second).collect(),
    ))
}

fn with_z(domain: &DomainBox) -> DomainBox {
    domain.product(&DomainBox::new(vec![Z_RANGE]))
}

/// `f = J̃g cosh z − g sinh z` with `z` appended as the last coordinate.
pub fn suspend(g: &SmoothMap) -> Result<SmoothMap> {
    let s = ParaStructure::for_ambient(g.codomain_dim())?;
    let z = x(g.domain_dim());
    let (ch, sh) = (z.cosh(), z.sinh());
    let comps = s
        .apply(g.components())
        .iter()
        .zip(g.components())
        .map(|(jg, gc)| &(jg * &ch) - &(gc * &sh))
        .collect();
    Ok(SmoothMap::new(
        format!("susp({})", g.name()),
        with_z(g.domain()),
        comps,
    ))
}

/// The sphere decomposition written out directly:
/// `(J̃(f₁×f₂) + f₁×(−f₂)) cosh z − ((f₁×f₂) + J̃(f₁×(−f₂))) sinh z`.
pub fn sphere_from_pair(f1: &SmoothMap, f2: &SmoothMap) -> Result<SmoothMap> {
    let n = same_dim(f1, f2)?;
    let prod = f1.product(f2);
    let neg = f1.product(&f2.scale(-1.0));
    let s = ParaStructure::new(n + 1);
    let z = x(2 * n);
    let (ch, sh) = (z.cosh(), z.sinh());
    let jp = s.apply(prod.components());
    let jn = s.apply(neg.components());
    let comps = (0..2 * n + 2)
        .map(|r| {
            let a = &jp[r] + &neg.components()[r];
            let b = &prod.components()[r] + &jn[r];
            &(&a * &ch) - &(&b * &sh)
        })
        .collect();
    Ok(SmoothMap::new(
        format!("sphere({},{})", f1.name(), f2.name()),
        with_z(prod.domain()),
        comps,
    ))
}

/// `(x, y, z) ↦ (c₁ e^{kaz} f₁(x), c₂ e^{−kaz} f₂(y))`, `k = √((n₂+1)/(n₁+1))`.
pub fn calabi_product(f1: &SmoothMap, f2: &SmoothMap, c1: f64, c2: f64, a: f64) -> Result<SmoothMap> {
    if c1 == 0.0 || c2 == 0.0 || a == 0.0 {
        return Err(GeomError::InvalidParameter(
            "Calabi constants c1, c2, a must be nonzero".into(),
        ));
    }
    let (n1, n2) = (f1.domain_dim(), f2.domain_dim());
    let prod = f1.product(f2);
    let k = ((n2 as f64 + 1.0) / (n1 as f64 + 1.0)).sqrt() * a;
    let z = x(n1 + n2);
    let up = (k * z.clone()).exp();
    let down = (-k * z).exp();
    let comps = prod
        .components()
        .iter()
        .enumerate()
        .map(|(r, c)| if r <= n1 { c1 * (&up * c) } else { c2 * (&down * c) })
        .collect();
    Ok(SmoothMap::new(
        format!("calabi({},{})", f1.name(), f2.name()),
        with_z(prod.domain()),
        comps,
    ))
}

/// `CP(f₁, f₂)(x, y, z) = (2e^{−z} f₁(x), e^{z} f₂(y))`.
pub fn cp(f1: &SmoothMap, f2: &SmoothMap) -> Result<SmoothMap> {
    same_dim(f1, f2)?;
    Ok(calabi_product(f1, f2, 2.0, 1.0, -1.0)?.with_name(format!("CP({},{})", f1.name(), f2.name())))
}

/// `A = [[½I, I], [½I, −I]]` of size `2n+2`.
pub fn matrix_a(n: usize) -> Vec<Vec<f64>> {
    let k = n + 1;
    (0..2 * k)
        .map(|r| {
            (0..2 * k)
                .map(|c| match (r < k, c < k) {
                    (_, true) if r % k == c => 0.5,
                    (true, false) if r == c - k => 1.0,
                    (false, false) if r == c => -1.0,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

pub fn det_matrix_a(n: usize) -> f64 {
    det_f64(&matrix_a(n))
}

/// `|λ| = |α|^{(2n+4)/(2n+3)}`.
pub fn lambda_from_alpha(alpha: f64, n: usize) -> Result<f64> {
    if alpha == 0.0 {
        return Err(GeomError::InvalidParameter("alpha must be nonzero".into()));
    }
    let n = n as f64;
    Ok(alpha.abs().powf((2.0 * n + 4.0) / (2.0 * n + 3.0)))
}

/// `λ = [(αβ)^{n+2} / 2^{4n+4}]^{1/(2n+3)}`.
pub fn calabi_lambda(alpha: f64, beta: f64, n: usize) -> Result<f64> {
    if alpha == 0.0 || beta == 0.0 {
        return Err(GeomError::InvalidParameter(
            "alpha and beta must be nonzero".into(),
        ));
    }
    let n = n as f64;
    let inner = (alpha * beta).powf(n + 2.0) / 2f64.powf(4.0 * n + 4.0);
    Ok(inner.powf(1.0 / (2.0 * n + 3.0)))
}

/// Explicit three-dimensional families built from `γ₁ = (cos, sin)`, `γ₂ = (cosh, sinh)`.
pub fn three_dim_family(index: usize) -> Result<SmoothMap> {
    let (xs, ys, z) = (x(0), x(1), x(2));
    let curve = |hyper: bool, t: &Expr| -> (Expr, Expr) {
        if hyper {
            (t.cosh(), t.sinh())
        } else {
            (t.cos(), t.sin())
        }
    };
    let (hx, hy) = match index {
        1 => (false, false),
        2 => (true, true),
        3 => (false, true),
        4 => (true, false),
        _ => return Err(GeomError::UnknownFamily(format!("f{index}"))),
    };
    let (a0, a1) = curve(hx, &xs);
    let (b0, b1) = curve(hy, &ys);
    let first = [&a0 + &b0, &a1 + &b1, &a0 - &b0, &a1 - &b1];
    let second = [&a0 - &b0, &a1 - &b1, &a0 + &b0, &a1 + &b1];
    let (ch, sh) = (z.cosh(), z.sinh());
    let comps = first
        .iter()
        .zip(&second)
        .map(|(p, q)| &(p * &ch) - &(q * &sh))
        .collect();
    let r = |h: bool| if h { HYP_RANGE } else { TRIG_RANGE };
    Ok(SmoothMap::new(
        format!("f{index}"),
        DomainBox::new(vec![r(hx), r(hy), Z_RANGE]),
        comps,
    ))
}

/// The hypersphere with a non-involutive `𝔇`.
pub fn example_noninvolutive() -> SmoothMap {
    let (xs, ys, z) = (x(0), x(1), x(2));
    let xy = &xs * &ys;
    let first = [
        xy.clone() + 1.0.into(),
        xs.clone() + 0.5 * ys.clone(),
        xy.clone(),
        xs.clone() - 0.5 * ys.clone(),
    ];
    let second = [
        xy.clone(),
        xs.clone() - 0.5 * ys.clone(),
        xy + 1.0.into(),
        xs + 0.5 * ys,
    ];
    let (ch, sh) = (z.cosh(), z.sinh());
    let comps = first
        .iter()
        .zip(&second)
        .map(|(p, q)| &(p * &ch) - &(q * &sh))
        .collect();
    SmoothMap::new("example-noninvolutive", DomainBox::cube(3, -1.0, 1.0), comps)
}

/// The `𝔇^-` field `W = 2x²∂x + ∂y + 2x∂z` of the non-involutive example.
pub fn example_w() -> Vec<Expr> {
    let xs = x(0);
    vec![2.0 * (&xs * &xs), Expr::constant(1.0), 2.0 * xs]
}

/// Chart of `∏_k (x_k² + x_{n+1+k}²) = 1` with coordinates `(v₁…v_{n+1}, u₁…u_n)`.
pub fn torus_quadric(n: usize) -> SmoothMap {
    let v: Vec<Expr> = (0..=n).map(x).collect();
    let u: Vec<Expr> = (0..n).map(|i| x(n + 1 + i)).collect();
    let total = u.iter().cloned().fold(Expr::constant(0.0), |a, b| a + b);
    let radius: Vec<Expr> = u
        .iter()
        .map(Expr::exp)
        .chain(std::iter::once((-total).exp()))
        .collect();
    let mut comps = Vec::with_capacity(2 * n + 2);
    for k in 0..=n {
        comps.push(&radius[k] * &v[k].cos());
    }
    for k in 0..=n {
        comps.push(&radius[k] * &v[k].sin());
    }
    let mut ranges = vec![TRIG_RANGE; n + 1];
    ranges.extend(vec![HYP_RANGE; n]);
    SmoothMap::new(format!("torus-quadric-{n}"), DomainBox::new(ranges), comps)
}

/// `∏_k (x_k² + x_{n+1+k}²) − 1`.
pub fn torus_quadric_defect(p: &[f64]) -> f64 {
    let k = p.len() / 2;
    (0..k).map(|i| p[i] * p[i] + p[k + i] * p[k + i]).product::<f64>() - 1.0
}

/// `G · (J x)` with `G` the gradient of `Σ log(x_k² + x_{n+1+k}²)` and `J` the
/// standard complex structure `(x, y) ↦ (−y, x)`.
pub fn jtangency_complex_check(p: &[f64]) -> f64 {
    let k = p.len() / 2;
    let q: Vec<f64> = (0..k).map(|i| p[i] * p[i] + p[k + i] * p[k + i]).collect();
    let grad: Vec<f64> = (0..2 * k).map(|i| 2.0 * p[i] / q[i % k]).collect();
    let jx: Vec<f64> = (0..2 * k)
        .map(|i| if i < k { -p[k + i] } else { p[i - k] })
        .collect();
    grad.iter().zip(&jx).map(|(a, b)| a * b).sum()
}

/// Graph paraboloid in `R^4` with the constant field `e₄`.
pub fn paraboloid4() -> Result<Hypersurface> {
    let (a, b, c) = (x(0), x(1), x(2));
    let f = SmoothMap::new(
        "paraboloid4",
        DomainBox::cube(3, -1.0, 1.0),
        vec![a.clone(), b.clone(), c.clone(), &(&a * &a + &b * &b) + &(&c * &c)],
    );
    let e4 = SmoothMap::new(
        "e4",
        f.domain().clone(),
        vec![0.0.into(), 0.0.into(), 0.0.into(), 1.0.into()],
    );
    Hypersurface::with_map_field(f, e4)
}

/// `J̃`-tangency residual of a hypersurface at a point.
pub fn jtangency_check(hs: &Hypersurface, p: &[f64]) -> Result<f64> {
    jtangency_residual(hs, p)
}

/// A proper affine sphere centred at the origin, normalized from the trial field `−f`.
#[derive(Debug, Clone)]
pub struct CentroAffineSphere {
    /// `f` with the exact field `C = −λ f`.
    pub hypersurface: Hypersurface,
    /// The normalized trial field, evaluated lazily.
    pub blaschke: BlaschkeField,
    pub lambda: f64,
}

/// Sign of `Θ(∂_1, …, ∂_m)` for the field `−f` at `p`.
pub fn centro_orientation(f: &SmoothMap, p: &[f64]) -> Result<f64> {
    let j = f.eval_jets(p, 1)?;
    let m = f.domain_dim();
    let rows: Vec<Vec<f64>> = j
        .iter()
        .map(|c| (0..m).map(|i| c.d(i)).chain([-c.value()]).collect())
        .collect();
    let d = det_f64(&rows);
    if d == 0.0 {
        return Err(GeomError::Frame { point: p.to_vec() });
    }
    Ok(d.signum())
}

pub fn centro_affine_sphere(f: &SmoothMap, base: &[f64]) -> Result<CentroAffineSphere> {
    let orientation = centro_orientation(f, base)?;
    let trial = Hypersurface::with_map_field(f.clone(), f.scale(-1.0))?.with_orientation(orientation);
    let blaschke = blaschke_normalize(&trial, base, &[])?;
    let c: Vec<f64> = blaschke.field_jets(base, 0)?.iter().map(Jet::value).collect();
    let fv = f.eval(base)?;
    let ff: f64 = fv.iter().map(|v| v * v).sum();
    let lambda = -c.iter().zip(&fv).map(|(a, b)| a * b).sum::<f64>() / ff;
    let exact = f.scale(-lambda).with_name(format!("-λ·{}", f.name()));
    let hypersurface = Hypersurface::with_map_field(f.clone(), exact)?.with_orientation(orientation);
    Ok(CentroAffineSphere {
        hypersurface,
        blaschke,
        lambda,
    })
}

/// `max |B(p) + λ f(p)| / |f(p)|` on a set of points.
pub fn centro_affine_deviation(s: &CentroAffineSphere, points: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in points {
        let c = s.blaschke.field_jets(p, 0)?;
        let fv = s.hypersurface.f.eval(p)?;
        let norm = fv.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = c
            .iter()
            .zip(&fv)
            .map(|(a, b)| (a.value() + s.lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(d / norm);
    }
    Ok(worst)
}

/// Family name, parameters and parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub parameters: Vec<f64>,
    pub domain: Option<DomainBox>,
}

impl FamilySpec {
    pub fn named(name: impl Into<String>) -> FamilySpec {
        FamilySpec {
            name: name.into(),
            parameters: Vec::new(),
            domain: None,
        }
    }

    pub fn with_parameters(mut self, p: Vec<f64>) -> FamilySpec {
        self.parameters = p;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Source,
    Suspension,
    Example,
    Pair,
    Calabi,
    TorusQuadric,
    Paraboloid,
}

/// What the family is expected to satisfy; drives which checks run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Claims {
    pub sphere: bool,
    pub jtangent: bool,
    pub involutive: Option<bool>,
    pub flat: bool,
    pub parallel_cubic: bool,
}

#[derive(Debug, Clone)]
pub enum Geometry {
    Hyper(Hypersurface),
    CodimTwo(CodimTwoSurface),
}

#[derive(Debug, Clone)]
pub struct Family {
    pub spec: FamilySpec,
    pub kind: FamilyKind,
    pub domain: DomainBox,
    pub geometry: Geometry,
    pub claims: Claims,
    /// Component spheres of pairs, suspensions and Calabi products.
    pub sources: Option<(SmoothMap, SmoothMap)>,
    /// Normalized sphere data for centro-affine families.
    pub sphere: Option<CentroAffineSphere>,
}

impl Family {
    pub fn hypersurface(&self) -> Option<&Hypersurface> {
        match &self.geometry {
            Geometry::Hyper(h) => Some(h),
            Geometry::CodimTwo(_) => None,
        }
    }

    pub fn map(&self) -> &SmoothMap {
        match &self.geometry {
            Geometry::Hyper(h) => &h.f,
            Geometry::CodimTwo(g) => &g.g,
        }
    }
}

/// One registry line for listing.
#[derive(Debug, Clone, Serialize)]
pub struct RegistryEntry {
    pub name: String,
    pub kind: FamilyKind,
    pub parameters: Vec<&'static str>,
    pub description: String,
}

fn pair_names() -> Vec<(String, String, String)> {
    let mut v = Vec::new();
    for (dim, names) in [(1, &SOURCES[..2]), (2, &SOURCES[2..])] {
        let _ = dim;
        for a in names {
            for b in names {
                v.push((a.to_string(), b.to_string(), format!("{a}-{b}")));
            }
        }
    }
    v
}

/// Every name accepted by [`named_family`].
pub fn registry() -> Vec<RegistryEntry> {
    let mut out = Vec::new();
    let entry = |name: String, kind, parameters: Vec<&'static str>, description: String| RegistryEntry {
        name,
        kind,
        parameters,
        description,
    };
    for s in SOURCES {
        out.push(entry(
            s.into(),
            FamilyKind::Source,
            vec![],
            format!("proper affine sphere `{s}` with C = -λf"),
        ));
    }
    for i in 1..=4 {
        out.push(entry(
            format!("f{i}"),
            FamilyKind::Suspension,
            vec![],
            "three-dimensional J̃-tangent affine hypersphere with involutive 𝔇".into(),
        ));
    }
    out.push(entry(
        "example-noninvolutive".into(),
        FamilyKind::Example,
        vec![],
        "J̃-tangent affine hypersphere with non-involutive 𝔇, C = -f".into(),
    ));
    for (a, b, tag) in pair_names() {
        out.push(entry(
            format!("pair-{tag}"),
            FamilyKind::Pair,
            vec![],
            format!("para-complex sphere from ({a}, {b}), ζ = -g"),
        ));
        out.push(entry(
            format!("susp-{tag}"),
            FamilyKind::Suspension,
            vec![],
            format!("suspension of pair({a}, {b})"),
        ));
        out.push(entry(
            format!("cp-{tag}"),
            FamilyKind::Calabi,
            vec![],
            format!("Calabi product CP({a}, {b})"),
        ));
        out.push(entry(
            format!("calabi-{tag}"),
            FamilyKind::Calabi,
            vec!["c1", "c2", "a"],
            format!("Calabi product of ({a}, {b}) with constants c1, c2, a"),
        ));
    }
    for (name, tag) in [
        ("flat1", "xyz-xyz"),
        ("flat2", "circular-circular"),
        ("flat3", "circular-xyz"),
    ] {
        out.push(entry(
            name.into(),
            FamilyKind::Calabi,
            vec![],
            format!("flat five-dimensional sphere cp-{tag}"),
        ));
    }
    out.push(entry(
        "torus-quadric".into(),
        FamilyKind::TorusQuadric,
        vec!["n"],
        "∏(x_k² + x_{n+1+k}²) = 1, J-tangent chart".into(),
    ));
    out.push(entry(
        "paraboloid4".into(),
        FamilyKind::Paraboloid,
        vec![],
        "graph paraboloid in R^4 with C = e4 (not J̃-tangent)".into(),
    ));
    out
}

fn split_pair(tag: &str) -> Result<(SmoothMap, SmoothMap)> {
    for (a, b, t) in pair_names() {
        if t == tag {
            return Ok((source(&a)?, source(&b)?));
        }
    }
    Err(GeomError::UnknownFamily(tag.to_string()))
}

fn is_flat_source(name: &str) -> bool {
    matches!(name, "ellipse" | "hyperbola" | "xyz" | "circular")
}

fn centro_family(
    spec: FamilySpec,
    kind: FamilyKind,
    f: SmoothMap,
    claims: Claims,
    sources: Option<(SmoothMap, SmoothMap)>,
) -> Result<Family> {
    let f = match &spec.domain {
        Some(d) => f.with_domain(d.clone()),
        None => f,
    };
    let domain = f.domain().clone();
    let sphere = centro_affine_sphere(&f, &domain.center())?;
    Ok(Family {
        spec,
        kind,
        domain,
        geometry: Geometry::Hyper(sphere.hypersurface.clone()),
        claims,
        sources,
        sphere: Some(sphere),
    })
}

/// Build a registered family.
pub fn named_family(spec: &FamilySpec) -> Result<Family> {
    let spec = spec.clone();
    let name = spec.name.clone();
    let sphere_claims = |jtangent: bool, involutive: Option<bool>, flat: bool, parallel: bool| Claims {
        sphere: true,
        jtangent,
        involutive,
        flat,
        parallel_cubic: parallel,
    };
    if SOURCES.contains(&name.as_str()) {
        let f = source(&name)?;
        let flat = is_flat_source(&name);
        return centro_family(
            spec,
            FamilyKind::Source,
            f,
            sphere_claims(false, None, flat, true),
            None,
        );
    }
    if let Some(i) = name.strip_prefix('f').and_then(|s| s.parse::<usize>().ok()) {
        let f = three_dim_family(i)?;
        let (a, b) = match i {
            1 => ("ellipse", "ellipse"),
            2 => ("hyperbola", "hyperbola"),
            3 => ("ellipse", "hyperbola"),
            _ => ("hyperbola", "ellipse"),
        };
        let sources = Some((source(a)?, source(b)?));
        return centro_family(
            spec,
            FamilyKind::Suspension,
            f,
            sphere_claims(true, Some(true), true, true),
            sources,
        );
    }
    if name == "example-noninvolutive" {
        let f = example_noninvolutive();
        let f = match &spec.domain {
            Some(d) => f.with_domain(d.clone()),
            None => f,
        };
        let domain = f.domain().clone();
        let orientation = centro_orientation(&f, &domain.center())?;
        let hs = Hypersurface::with_map_field(f.clone(), f.scale(-1.0))?.with_orientation(orientation);
        return Ok(Family {
            spec,
            kind: FamilyKind::Example,
            domain,
            geometry: Geometry::Hyper(hs),
            claims: sphere_claims(true, Some(false), false, false),
            sources: None,
            sphere: None,
        });
    }
    if let Some(tag) = name.strip_prefix("pair-") {
        let (a, b) = split_pair(tag)?;
        let g = pair(&a, &b)?;
        let g = match &spec.domain {
            Some(d) => g.with_domain(d.clone()),
            None => g,
        };
        let domain = g.domain().clone();
        return Ok(Family {
            spec,
            kind: FamilyKind::Pair,
            domain,
            geometry: Geometry::CodimTwo(CodimTwoSurface::radial(g)?),
            claims: Claims {
                sphere: true,
                ..Claims::default()
            },
            sources: Some((a, b)),
            sphere: None,
        });
    }
    if let Some(tag) = name.strip_prefix("susp-") {
        let (a, b) = split_pair(tag)?;
        let f = suspend(&pair(&a, &b)?)?;
        let flat = is_flat_source(a.name()) && is_flat_source(b.name());
        return centro_family(
            spec,
            FamilyKind::Suspension,
            f,
            sphere_claims(true, Some(true), flat, true),
            Some((a, b)),
        );
    }
    let calabi_tag = |name: &str| -> Option<(String, bool)> {
        match name {
            "flat1" => Some(("xyz-xyz".into(), false)),
            "flat2" => Some(("circular-circular".into(), false)),
            "flat3" => Some(("circular-xyz".into(), false)),
            _ => name
                .strip_prefix("cp-")
                .map(|t| (t.to_string(), false))
                .or_else(|| name.strip_prefix("calabi-").map(|t| (t.to_string(), true))),
        }
    };
    if let Some((tag, general)) = calabi_tag(&name) {
        let (a, b) = split_pair(&tag)?;
        let f = if general {
            let p = &spec.parameters;
            let (c1, c2, ca) = (
                p.first().copied().unwrap_or(2.0),
                p.get(1).copied().unwrap_or(1.0),
                p.get(2).copied().unwrap_or(-1.0),
            );
            calabi_product(&a, &b, c1, c2, ca)?
        } else {
            cp(&a, &b)?
        };
        let flat = is_flat_source(a.name()) && is_flat_source(b.name());
        return centro_family(
            spec,
            FamilyKind::Calabi,
            f,
            sphere_claims(false, None, flat, true),
            Some((a, b)),
        );
    }
    if name == "torus-quadric" {
        let n = spec.parameters.first().copied().unwrap_or(1.0);
        if n < 1.0 || n.fract() != 0.0 || n > 3.0 {
            return Err(GeomError::InvalidParameter(format!(
                "torus-quadric needs an integer n in 1..=3, got {n}"
            )));
        }
        let f = torus_quadric(n as usize);
        return centro_family(
            spec,
            FamilyKind::TorusQuadric,
            f,
            sphere_claims(false, None, true, true),
            None,
        );
    }
    if name == "paraboloid4" {
        let hs = paraboloid4()?;
        return Ok(Family {
            domain: hs.f.domain().clone(),
            spec,
            kind: FamilyKind::Paraboloid,
            geometry: Geometry::Hyper(hs),
            claims: Claims::default(),
            sources: None,
            sphere: None,
        });
    }
    Err(GeomError::UnknownFamily(name))
}

/// Attach a different field to a family's immersion (used for perturbation tests).
pub fn with_field(hs: &Hypersurface, c: SmoothMap) -> Hypersurface {
    hs.with_field(Arc::new(c) as Arc<dyn TransversalField>)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &SmoothMap, b: &SmoothMap, p: &[f64]) -> f64 {
        let (u, v) = (a.eval(p).unwrap(), b.eval(p).unwrap());
        u.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn f1_at_origin() {
        let f = three_dim_family(1).unwrap();
        let j = f.eval_jets(&[0.0, 0.0, 0.0], 1).unwrap();
        let val: Vec<f64> = j.iter().map(Jet::value).collect();
        assert_eq!(val, vec![2.0, 0.0, 0.0, 0.0]);
        let col = |i| j.iter().map(|c| c.d(i)).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(col(1), vec![0.0, 1.0, 0.0, -1.0]);
        assert_eq!(col(2), vec![0.0, 0.0, -2.0, 0.0]);
    }

    #[test]
    fn pair_of_ellipses_expands() {
        let g = pair(&ellipse(), &ellipse()).unwrap();
        let (a, b) = (0.3, -0.8);
        let v = g.eval(&[a, b]).unwrap();
        let want = [
            a.cos() - b.cos(),
            a.sin() - b.sin(),
            a.cos() + b.cos(),
            a.sin() + b.sin(),
        ];
        for (x, y) in v.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn suspension_matches_display_and_decomposition() {
        let p = [0.4, -0.3, 0.7];
        for (i, (a, b)) in [(1, ("e", "e")), (2, ("h", "h")), (3, ("e", "h")), (4, ("h", "e"))] {
            let (fa, fb) = (source(a).unwrap(), source(b).unwrap());
            let s = suspend(&pair(&fa, &fb).unwrap()).unwrap();
            let d = three_dim_family(i).unwrap();
            let sp = sphere_from_pair(&fa, &fb).unwrap();
            assert!(max_diff(&s, &d, &p) < 1e-14);
            assert!(max_diff(&s, &sp, &p) < 1e-14);
        }
    }

    #[test]
    fn suspension_at_z0_is_jtilde_g() {
        let g = pair(&ellipse(), &hyperbola()).unwrap();
        let s = suspend(&g).unwrap();
        let gv = g.eval(&[0.2, 0.9]).unwrap();
        let sv = s.eval(&[0.2, 0.9, 0.0]).unwrap();
        assert_eq!(sv, ParaStructure::new(2).apply(&gv));
    }

    #[test]
    fn matrix_a_and_calabi() {
        for n in 0..5 {
            assert_eq!(det_matrix_a(n), if n % 2 == 0 { -1.0 } else { 1.0 });
        }
        let c = cp(&ellipse(), &ellipse()).unwrap();
        assert_eq!(c.eval(&[0.0, 0.0, 0.0]).unwrap(), vec![2.0, 0.0, 1.0, 0.0]);
        let f = c.linear(&matrix_a(1));
        assert_eq!(f.eval(&[0.0, 0.0, 0.0]).unwrap(), vec![2.0, 0.0, 0.0, 0.0]);
        let f1 = three_dim_family(1).unwrap();
        assert!(max_diff(&f, &f1, &[0.5, -1.1, 0.4]) < 1e-12);
    }

    #[test]
    fn calabi_exponent_symmetry() {
        let (a, b) = (sphere(), ellipse());
        let (c1, c2, k) = (1.5, 0.5, 0.7);
        let lhs = calabi_product(&a, &b, c1, c2, k).unwrap();
        // a' = a (n2 + 1) / (n1 + 1) with n1 = 2, n2 = 1
        let k2 = k * 2.0 / 3.0;
        let rhs = calabi_product(&b, &a, c2, c1, -k2).unwrap();
        let (u, v, t, z) = (0.2, -0.4, 0.6, 0.3);
        let l = lhs.eval(&[u, v, t, z]).unwrap();
        let r = rhs.eval(&[t, u, v, z]).unwrap();
        let swapped: Vec<f64> = r[2..].iter().chain(&r[..2]).copied().collect();
        for (x, y) in l.iter().zip(&swapped) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn lambda_formulas() {
        assert_eq!(lambda_from_alpha(1.0, 3).unwrap(), 1.0);
        assert!((calabi_lambda(1.0, 1.0, 1).unwrap() - 2f64.powf(-1.6)).abs() < 1e-15);
        assert!(calabi_lambda(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn f1_normalizes_to_known_lambda() {
        let s = centro_affine_sphere(&three_dim_family(1).unwrap(), &[0.0, 0.0, 0.0]).unwrap();
        assert!((s.lambda - 2f64.powf(-1.6)).abs() < 1e-12);
        let dev = centro_affine_deviation(&s, &[vec![0.3, -0.5, 0.8]]).unwrap();
        assert!(dev < 1e-12);
    }

    #[test]
    fn torus_quadric_equation() {
        let f = torus_quadric(1);
        let p = f.eval(&[0.3, -0.7, 0.4]).unwrap();
        assert!(torus_quadric_defect(&p).abs() < 1e-12);
        assert!(jtangency_complex_check(&p).abs() < 1e-12);
    }

    #[test]
    fn registry_names_resolve() {
        for e in registry() {
            assert!(
                named_family(&FamilySpec::named(e.name.clone())).is_ok(),
                "{}",
                e.name
            );
        }
        assert!(matches!(
            named_family(&FamilySpec::named("nope")),
            Err(GeomError::UnknownFamily(_))
        ));
    }

    #[test]
    fn paraboloid_is_not_jtangent() {
        let hs = paraboloid4().unwrap();
        assert!(jtangency_check(&hs, &[0.1, 0.5, -0.2]).unwrap() > 0.5);
    }
}
