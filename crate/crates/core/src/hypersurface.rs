//! Induced affine geometry of a codimension-one immersion.
//!
//! Everything here is computed from jets of `f` and of the transversal field,
//! so derivatives of the induced objects (needed by Codazzi, Ricci and the
//! curvature of the affine metric) are exact up to rounding.

use std::fmt;
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::jets::linalg::det_f64;
use crate::jets::{Jet, JetLu, SmoothMap};

/// Blaschke conditions and once-differentiated identities.
pub const TOL_DIFF1: f64 = 1e-8;
/// Purely algebraic identities.
pub const TOL_ALGEBRAIC: f64 = 1e-10;
/// Twice-differentiated quantities (curvature of `h`, `∇̂C`).
pub const TOL_DIFF2: f64 = 1e-6;
/// `|det h|` below this is a hard degeneracy error.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// A transversal vector field that can be evaluated to jets.
pub trait TransversalField: Send + Sync + fmt::Debug {
    fn field_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>>;
    fn max_order(&self) -> usize;
    fn label(&self) -> String;
}

impl TransversalField for SmoothMap {
    fn field_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.eval_jets(p, order)
    }

    fn max_order(&self) -> usize {
        SmoothMap::max_order(self)
    }

    fn label(&self) -> String {
        self.name().to_string()
    }
}

/// Immersion `f: R^m -> R^{m+1}` with a transversal field.
///
/// `orientation` (±1) fixes which sign of `Θ(∂_1,…,∂_m)` counts as
/// positive when a Blaschke field is normalized.
#[derive(Debug, Clone)]
pub struct Hypersurface {
    pub f: SmoothMap,
    pub c: Arc<dyn TransversalField>,
    pub orientation: f64,
}

impl Hypersurface {
    pub fn new(f: SmoothMap, c: Arc<dyn TransversalField>) -> Result<Hypersurface> {
        if f.codomain_dim() != f.domain_dim() + 1 {
            return Err(GeomError::Dimension(format!(
                "hypersurface needs codomain = domain + 1, got {} -> {}",
                f.domain_dim(),
                f.codomain_dim()
            )));
        }
        Ok(Hypersurface {
            f,
            c,
            orientation: 1.0,
        })
    }

    pub fn with_map_field(f: SmoothMap, c: SmoothMap) -> Result<Hypersurface> {
        if c.codomain_dim() != f.codomain_dim() || c.domain_dim() != f.domain_dim() {
            return Err(GeomError::Dimension("transversal field shape".into()));
        }
        Hypersurface::new(f, Arc::new(c))
    }

    pub fn with_orientation(mut self, orientation: f64) -> Hypersurface {
        self.orientation = orientation.signum();
        self
    }

    pub fn with_field(&self, c: Arc<dyn TransversalField>) -> Hypersurface {
        Hypersurface {
            f: self.f.clone(),
            c,
            orientation: self.orientation,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.domain_dim()
    }

    /// Highest order at which Gauss-part objects (Γ, h) are available.
    pub fn gauss_order(&self) -> usize {
        let fo = self.f.max_order();
        (fo.saturating_sub(2)).min(self.c.max_order())
    }

    /// Highest order at which Weingarten-part objects (S, τ) are available.
    pub fn weingarten_order(&self) -> usize {
        self.f.max_order().min(self.c.max_order()).saturating_sub(1)
    }
}

/// Jet-valued induced objects at one point.
///
/// Index conventions: `gamma[k][i][j] = Γ^k_{ij}`, `shape[k][i] = S^k_i`
/// (so `S ∂_i = Σ_k S^k_i ∂_k`).
#[derive(Debug, Clone)]
pub struct InducedJets {
    pub m: usize,
    pub gauss_order: usize,
    pub weingarten_order: usize,
    pub tangent: Vec<Vec<Jet>>,
    pub transversal: Vec<Jet>,
    pub second: Vec<Vec<Vec<Jet>>>,
    pub gamma: Vec<Vec<Vec<Jet>>>,
    pub h: Vec<Vec<Jet>>,
    pub shape: Vec<Vec<Jet>>,
    pub tau: Vec<Jet>,
    pub theta: Jet,
    frame: JetLu,
}

/// Value-level induced objects.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InducedObjects {
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub h: Vec<Vec<f64>>,
    pub shape: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub theta: f64,
    pub omega_h: f64,
}

fn frame_matrix(cols: &[&[Jet]]) -> Vec<Vec<Jet>> {
    let rows = cols[0].len();
    (0..rows)
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect()
}

/// Jet-valued decomposition with `f` evaluated at `f_order`.
pub fn decompose_jets(hs: &Hypersurface, p: &[f64], f_order: usize) -> Result<InducedJets> {
    let m = hs.dim();
    if f_order < 2 {
        return Err(GeomError::Structure("decomposition needs f to order >= 2".into()));
    }
    let c_order = f_order.min(hs.c.max_order());
    if c_order < 1 {
        return Err(GeomError::OrderTooHigh {
            requested: 1,
            max: c_order,
        });
    }
    let fj = hs.f.eval_jets(p, f_order)?;
    let cj = hs.c.field_jets(p, c_order)?;
    let frame_order = (f_order - 1).min(c_order);
    let gauss_order = (f_order - 2).min(frame_order);
    let weingarten_order = c_order - 1;

    let tangent: Vec<Vec<Jet>> = (0..m)
        .map(|i| fj.iter().map(|c| c.partial(i)).collect())
        .collect();
    let transversal: Vec<Jet> = cj.iter().map(|c| c.truncate(frame_order)).collect();
    let mut cols: Vec<&[Jet]> = tangent.iter().map(|v| v.as_slice()).collect();
    cols.push(&transversal);
    let frame = JetLu::new(&frame_matrix(&cols)).map_err(|_| GeomError::Frame { point: p.to_vec() })?;
    let theta = frame.det();

    let mut second = vec![vec![Vec::new(); m]; m];
    let mut gamma = vec![vec![vec![Jet::zero(theta.space()); m]; m]; m];
    let mut h = vec![vec![Jet::zero(theta.space()); m]; m];
    for i in 0..m {
        for j in i..m {
            let fij: Vec<Jet> = tangent[i]
                .iter()
                .map(|c| c.partial(j).truncate(gauss_order))
                .collect();
            let sol = frame.solve(&fij)?;
            for k in 0..m {
                gamma[k][i][j] = sol[k].truncate(gauss_order);
                gamma[k][j][i] = gamma[k][i][j].clone();
            }
            h[i][j] = sol[m].truncate(gauss_order);
            h[j][i] = h[i][j].clone();
            second[i][j] = fij.clone();
            second[j][i] = fij;
        }
    }

    let mut shape = vec![vec![Jet::zero(theta.space()); m]; m];
    let mut tau = Vec::with_capacity(m);
    for i in 0..m {
        let dc: Vec<Jet> = cj.iter().map(|c| c.partial(i)).collect();
        let sol = frame.solve(&dc)?;
        for k in 0..m {
            shape[k][i] = (-&sol[k]).truncate(weingarten_order);
        }
        tau.push(sol[m].truncate(weingarten_order));
    }

    Ok(InducedJets {
        m,
        gauss_order,
        weingarten_order,
        tangent,
        transversal,
        second,
        gamma,
        h,
        shape,
        tau,
        theta,
        frame,
    })
}

impl InducedJets {
    pub fn values(&self) -> InducedObjects {
        let m = self.m;
        let v2 = |a: &Vec<Vec<Jet>>| -> Vec<Vec<f64>> {
            a.iter().map(|r| r.iter().map(Jet::value).collect()).collect()
        };
        let h = v2(&self.h);
        InducedObjects {
            gamma: self.gamma.iter().map(v2).collect(),
            omega_h: det_f64(&h).abs().sqrt(),
            h,
            shape: v2(&self.shape),
            tau: self.tau.iter().map(Jet::value).collect(),
            theta: self.theta.value(),
        }
        .checked(m)
    }

    /// Components of an ambient jet vector in the frame `[f_*∂_1, …, f_*∂_m, C]`.
    pub fn frame_components(&self, v: &[Jet]) -> Result<Vec<Jet>> {
        self.frame.solve(v)
    }

    /// `max |∂_i∂_j f − Γ^k_ij f_*∂_k − h_ij C|`, relative to `max(1, |∂_i∂_j f|)`.
    pub fn reconstruction_residual(&self) -> f64 {
        let m = self.m;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = &self.second[i][j];
                let scale = target.iter().map(|c| c.value().abs()).fold(1.0, f64::max);
                for (r, t) in target.iter().enumerate() {
                    let mut acc = self.h[i][j].value() * self.transversal[r].value();
                    for k in 0..m {
                        acc += self.gamma[k][i][j].value() * self.tangent[k][r].value();
                    }
                    worst = worst.max((t.value() - acc).abs() / scale);
                }
            }
        }
        worst
    }

    /// Metric volume `|det h|^{1/2}` as a jet.
    pub fn det_h(&self) -> Result<Jet> {
        Ok(JetLu::new(&self.h)?.det())
    }

    /// `∇_a h (b, c)` as a jet of order `gauss_order - 1`.
    pub fn nabla_h(&self, a: usize, b: usize, c: usize) -> Jet {
        let mut v = self.h[b][c].partial(a);
        for l in 0..self.m {
            v -= &(&self.gamma[l][a][b] * &self.h[l][c]);
            v -= &(&self.gamma[l][a][c] * &self.h[b][l]);
        }
        v
    }
}

impl InducedObjects {
    fn checked(self, _m: usize) -> InducedObjects {
        self
    }
}

/// Value-level decomposition at `p`.
pub fn decompose(hs: &Hypersurface, p: &[f64]) -> Result<InducedObjects> {
    Ok(decompose_jets(hs, p, 2)?.values())
}

/// Maxima over all coordinate index triples of the four fundamental equations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FundamentalResiduals {
    pub gauss: f64,
    pub codazzi_h: f64,
    pub codazzi_s: f64,
    pub ricci: f64,
}

impl FundamentalResiduals {
    pub fn max(&self) -> f64 {
        self.gauss.max(self.codazzi_h).max(self.codazzi_s).max(self.ricci)
    }
}

/// `R(∂_a,∂_b)∂_c` of the induced connection, component `k`, from jets.
fn riemann_from(gamma: &[Vec<Vec<Jet>>], k: usize, a: usize, b: usize, c: usize) -> f64 {
    let m = gamma.len();
    let mut r = gamma[k][b][c].d(a) - gamma[k][a][c].d(b);
    for l in 0..m {
        r +=
            gamma[k][a][l].value() * gamma[l][b][c].value() - gamma[k][b][l].value() * gamma[l][a][c].value();
    }
    r
}

/// Residuals of the Gauss, Codazzi (h and S) and Ricci equations at `p`.
pub fn fundamental_residuals(hs: &Hypersurface, p: &[f64]) -> Result<FundamentalResiduals> {
    let ind = decompose_jets(hs, p, 3)?;
    fundamental_residuals_from(&ind)
}

pub fn fundamental_residuals_from(ind: &InducedJets) -> Result<FundamentalResiduals> {
    if ind.gauss_order < 1 || ind.weingarten_order < 1 {
        return Err(GeomError::OrderTooHigh {
            requested: 1,
            max: ind.gauss_order.min(ind.weingarten_order),
        });
    }
    let m = ind.m;
    let g = &ind.gamma;
    let hv = |i: usize, j: usize| ind.h[i][j].value();
    let sv = |k: usize, i: usize| ind.shape[k][i].value();
    let tv = |i: usize| ind.tau[i].value();
    let mut out = FundamentalResiduals {
        gauss: 0.0,
        codazzi_h: 0.0,
        codazzi_s: 0.0,
        ricci: 0.0,
    };
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for k in 0..m {
                    let lhs = riemann_from(g, k, a, b, c);
                    let rhs = hv(b, c) * sv(k, a) - hv(a, c) * sv(k, b);
                    out.gauss = out.gauss.max((lhs - rhs).abs());
                }
                let ch = ind.nabla_h(a, b, c).value() + tv(a) * hv(b, c)
                    - ind.nabla_h(b, a, c).value()
                    - tv(b) * hv(a, c);
                out.codazzi_h = out.codazzi_h.max(ch.abs());
            }
            for k in 0..m {
                let nabla_s = |x: usize, y: usize| {
                    let mut v = ind.shape[k][y].d(x);
                    for l in 0..m {
                        v += g[k][x][l].value() * sv(l, y) - sv(k, l) * g[l][x][y].value();
                    }
                    v
                };
                let cs = nabla_s(a, b) - tv(a) * sv(k, b) - nabla_s(b, a) + tv(b) * sv(k, a);
                out.codazzi_s = out.codazzi_s.max(cs.abs());
            }
            let mut lhs = 0.0;
            for l in 0..m {
                lhs += hv(a, l) * sv(l, b) - sv(l, a) * hv(l, b);
            }
            let dtau2 = ind.tau[b].d(a) - ind.tau[a].d(b);
            out.ricci = out.ricci.max((lhs - dtau2).abs());
        }
    }
    Ok(out)
}

/// Curvature data of the induced connection and of the affine metric `h`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurvatureData {
    /// `riemann_affine[k][a][b][c]`: component `k` of `R(∂_a,∂_b)∂_c`.
    pub riemann_affine: Vec<Vec<Vec<Vec<f64>>>>,
    /// Max deviation of `R` from `h(Y,Z)SX − h(X,Z)SY`.
    pub gauss_equation_residual: f64,
    /// Christoffel symbols of the Levi-Civita connection of `h`.
    pub levi_civita: Vec<Vec<Vec<f64>>>,
    pub riemann_metric: Vec<Vec<Vec<Vec<f64>>>>,
    pub riemann_metric_max: f64,
    /// `cubic[a][b][c] = (∇_a h)(b, c)`.
    pub cubic: Vec<Vec<Vec<f64>>>,
    pub cubic_asymmetry: f64,
    pub cubic_parallel_residual: f64,
    pub pick: f64,
}

impl CurvatureData {
    /// Sectional curvature of `h` on the plane spanned by `∂_a, ∂_b`.
    pub fn sectional(&self, h: &[Vec<f64>], a: usize, b: usize) -> f64 {
        let m = h.len();
        // h(R(∂a,∂b)∂b, ∂a)
        let num: f64 = (0..m).map(|k| self.riemann_metric[k][a][b][b] * h[k][a]).sum();
        num / (h[a][a] * h[b][b] - h[a][b] * h[a][b])
    }
}

/// Full curvature data at `p` (needs `f` to order 4).
pub fn curvature(hs: &Hypersurface, p: &[f64]) -> Result<CurvatureData> {
    let ind = decompose_jets(hs, p, 4)?;
    curvature_from(&ind)
}

pub fn curvature_from(ind: &InducedJets) -> Result<CurvatureData> {
    if ind.gauss_order < 2 {
        return Err(GeomError::OrderTooHigh {
            requested: 2,
            max: ind.gauss_order,
        });
    }
    let m = ind.m;
    let det = ind.det_h()?;
    if det.value().abs() < DEGENERACY_EPS {
        return Err(GeomError::Degenerate { det: det.value() });
    }
    // h^{-1} as jets (order gauss_order)
    let lu = JetLu::new(&ind.h)?;
    let space = ind.h[0][0].space().clone();
    let mut hinv = vec![vec![Jet::zero(&space); m]; m];
    for j in 0..m {
        let e: Vec<Jet> = (0..m)
            .map(|i| Jet::constant(&space, if i == j { 1.0 } else { 0.0 }))
            .collect();
        let col = lu.solve(&e)?;
        for i in 0..m {
            hinv[i][j] = col[i].clone();
        }
    }
    // Levi-Civita symbols, order gauss_order - 1
    let dh = |i: usize, j: usize, l: usize| ind.h[j][l].partial(i);
    let mut lc = vec![vec![vec![Jet::zero(&space); m]; m]; m];
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let mut acc = Jet::zero(&JetSpace_of(&ind.h[0][0], 1));
                for l in 0..m {
                    let bracket = &(&dh(i, j, l) + &dh(j, i, l)) - &dh(l, i, j);
                    acc += &(&hinv[k][l] * &bracket);
                }
                lc[k][i][j] = acc.scale(0.5);
                lc[k][j][i] = lc[k][i][j].clone();
            }
        }
    }

    let mut riemann_affine = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    let mut riemann_metric = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    let mut gauss_res: f64 = 0.0;
    let mut rm_max: f64 = 0.0;
    for k in 0..m {
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let r = riemann_from(&ind.gamma, k, a, b, c);
                    riemann_affine[k][a][b][c] = r;
                    if ind.weingarten_order != usize::MAX {
                        let rhs = ind.h[b][c].value() * ind.shape[k][a].value()
                            - ind.h[a][c].value() * ind.shape[k][b].value();
                        gauss_res = gauss_res.max((r - rhs).abs());
                    }
                    let rm = riemann_from(&lc, k, a, b, c);
                    riemann_metric[k][a][b][c] = rm;
                    rm_max = rm_max.max(rm.abs());
                }
            }
        }
    }

    // cubic form as jets of order gauss_order - 1
    let mut cubic_j = vec![vec![vec![Jet::zero(&space); m]; m]; m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                cubic_j[a][b][c] = ind.nabla_h(a, b, c);
            }
        }
    }
    let mut asym: f64 = 0.0;
    let mut parallel: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let v = cubic_j[a][b][c].value();
                asym = asym
                    .max((v - cubic_j[b][a][c].value()).abs())
                    .max((v - cubic_j[c][b][a].value()).abs());
                for l in 0..m {
                    let mut d = cubic_j[a][b][c].d(l);
                    for s in 0..m {
                        d -= lc[s][l][a].value() * cubic_j[s][b][c].value()
                            + lc[s][l][b].value() * cubic_j[a][s][c].value()
                            + lc[s][l][c].value() * cubic_j[a][b][s].value();
                    }
                    parallel = parallel.max(d.abs());
                }
            }
        }
    }

    // Pick invariant: |K|_h^2 / (m(m-1)), K = ∇ − ∇̂
    let kdiff = |k: usize, i: usize, j: usize| ind.gamma[k][i][j].value() - lc[k][i][j].value();
    let hi = |i: usize, j: usize| hinv[i][j].value();
    let mut pick = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        for c in 0..m {
                            pick +=
                                hi(i, a) * hi(j, b) * ind.h[k][c].value() * kdiff(k, i, j) * kdiff(c, a, b);
                        }
                    }
                }
            }
        }
    }
    let norm = if m >= 2 { (m * (m - 1)) as f64 } else { 1.0 };

    Ok(CurvatureData {
        riemann_affine,
        gauss_equation_residual: gauss_res,
        levi_civita: lc
            .iter()
            .map(|a| a.iter().map(|r| r.iter().map(Jet::value).collect()).collect())
            .collect(),
        riemann_metric,
        riemann_metric_max: rm_max,
        cubic: cubic_j
            .iter()
            .map(|a| a.iter().map(|r| r.iter().map(Jet::value).collect()).collect())
            .collect(),
        cubic_asymmetry: asym,
        cubic_parallel_residual: parallel,
        pick: pick / norm,
    })
}

#[allow(non_snake_case)]
fn JetSpace_of(j: &Jet, drop: usize) -> std::sync::Arc<crate::jets::JetSpace> {
    crate::jets::JetSpace::get(j.dim(), j.order() - drop)
}

/// Blaschke-condition residuals at one point: `(max |τ_i|, |ω_h − |Θ|| / |Θ|)`.
pub fn blaschke_residuals_at(hs: &Hypersurface, p: &[f64]) -> Result<(f64, f64)> {
    let v = decompose(hs, p)?;
    let tau = v.tau.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let vol = (v.omega_h - v.theta.abs()).abs() / v.theta.abs();
    Ok((tau, vol))
}

/// Blaschke field obtained from a trial transversal field by the unimodular
/// scaling `φ = |det h / Θ²|^{1/(m+2)}` and the tangential correction `Z`
/// solving `h(Z, ·) = −(dφ + φτ)`.
#[derive(Debug, Clone)]
pub struct BlaschkeField {
    f: SmoothMap,
    trial: Arc<dyn TransversalField>,
    sign: f64,
}

impl BlaschkeField {
    pub fn sign(&self) -> f64 {
        self.sign
    }

    fn unsigned(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let hs = Hypersurface {
            f: self.f.clone(),
            c: self.trial.clone(),
            orientation: 1.0,
        };
        let ind = decompose_jets(&hs, p, order + 3)?;
        let m = ind.m;
        let det_h = ind.det_h()?;
        if det_h.value().abs() < DEGENERACY_EPS {
            return Err(GeomError::Degenerate { det: det_h.value() });
        }
        let theta2 = &ind.theta * &ind.theta;
        let phi = det_h.div_jet(&theta2).abs().powf(1.0 / (m as f64 + 2.0));
        let rhs: Vec<Jet> = (0..m)
            .map(|i| -(&phi.partial(i) + &(&phi * &ind.tau[i])))
            .collect();
        let z = JetLu::new(&ind.h)?.solve(&rhs)?;
        let phi_r = phi.truncate(order);
        let mut out: Vec<Jet> = ind.transversal.iter().map(|c| &phi_r * c).collect();
        for (i, zi) in z.iter().enumerate() {
            for (o, t) in out.iter_mut().zip(&ind.tangent[i]) {
                *o += &(zi * t);
            }
        }
        Ok(out.into_iter().map(|j| j.truncate(order)).collect())
    }
}

impl TransversalField for BlaschkeField {
    fn field_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        if order > self.max_order() {
            return Err(GeomError::OrderTooHigh {
                requested: order,
                max: self.max_order(),
            });
        }
        Ok(self
            .unsigned(p, order)?
            .into_iter()
            .map(|j| j.scale(self.sign))
            .collect())
    }

    fn max_order(&self) -> usize {
        self.f
            .max_order()
            .saturating_sub(3)
            .min(self.trial.max_order().saturating_sub(1))
    }

    fn label(&self) -> String {
        format!("blaschke({})", self.trial.label())
    }
}

/// Normalize `hs.c` into the Blaschke field of `hs.f`.
///
/// `base` fixes the sign (`orientation · Θ > 0` there); every point of
/// `region` is checked for degeneracy of `h`.
pub fn blaschke_normalize(hs: &Hypersurface, base: &[f64], region: &[Vec<f64>]) -> Result<BlaschkeField> {
    if hs.f.max_order() < 3 || hs.c.max_order() < 1 {
        return Err(GeomError::OrderTooHigh {
            requested: 3,
            max: hs.f.max_order(),
        });
    }
    for p in region.iter().chain(std::iter::once(&base.to_vec())) {
        let v = decompose(hs, p)?;
        let d = det_f64(&v.h);
        if d.abs() < DEGENERACY_EPS {
            return Err(GeomError::Degenerate { det: d });
        }
    }
    let mut field = BlaschkeField {
        f: hs.f.clone(),
        trial: hs.c.clone(),
        sign: 1.0,
    };
    let c0 = field.unsigned(base, 0)?;
    let fj = hs.f.eval_jets(base, 1)?;
    let m = hs.dim();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|i| fj.iter().map(|c| c.d(i)).collect()).collect();
    cols.push(c0.iter().map(Jet::value).collect());
    let rows: Vec<Vec<f64>> = (0..=m).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
    let theta = det_f64(&rows);
    field.sign = if hs.orientation * theta >= 0.0 { 1.0 } else { -1.0 };
    Ok(field)
}

/// Result of the affine-sphere test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SphereTest {
    pub is_sphere: bool,
    pub lambda: f64,
    pub improper: bool,
    /// `max |S − λ·Id|` over the region.
    pub max_deviation: f64,
    /// Standard deviation of the pointwise mean eigenvalue.
    pub lambda_spread: f64,
}

pub const SPHERE_TOL: f64 = 1e-8;

/// Decide whether `hs` (with a Blaschke field) is an affine hypersphere on `region`.
pub fn is_affine_sphere(hs: &Hypersurface, region: &[Vec<f64>]) -> Result<SphereTest> {
    let mut shapes = Vec::with_capacity(region.len());
    for p in region {
        let v = decompose(hs, p)?;
        let tau = v.tau.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        let vol = (v.omega_h - v.theta.abs()).abs() / v.theta.abs();
        if tau >= TOL_DIFF1 || vol >= TOL_DIFF1 {
            return Err(GeomError::NotBlaschke { tau, volume: vol });
        }
        shapes.push(v.shape);
    }
    let m = hs.dim();
    let means: Vec<f64> = shapes
        .iter()
        .map(|s| (0..m).map(|i| s[i][i]).sum::<f64>() / m as f64)
        .collect();
    let n = means.len() as f64;
    let lambda = means.iter().sum::<f64>() / n;
    let spread = (means.iter().map(|l| (l - lambda).powi(2)).sum::<f64>() / n).sqrt();
    let mut dev: f64 = 0.0;
    for s in &shapes {
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { lambda } else { 0.0 };
                dev = dev.max((s[i][j] - target).abs());
            }
        }
    }
    let is_sphere = dev < SPHERE_TOL && spread < SPHERE_TOL;
    Ok(SphereTest {
        is_sphere,
        lambda,
        improper: is_sphere && lambda.abs() < SPHERE_TOL,
        max_deviation: dev,
        lambda_spread: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{DomainBox, Expr};

    fn paraboloid() -> SmoothMap {
        let (x, y) = (Expr::coord(0), Expr::coord(1));
        SmoothMap::new(
            "paraboloid",
            DomainBox::cube(2, -1.0, 1.0),
            vec![x.clone(), y.clone(), &x * &x + &y * &y],
        )
    }

    fn constant_field(dim: usize, v: Vec<f64>) -> SmoothMap {
        SmoothMap::new(
            "const",
            DomainBox::cube(dim, -1.0, 1.0),
            v.into_iter().map(Expr::constant).collect(),
        )
    }

    fn ellipse() -> SmoothMap {
        let t = Expr::coord(0);
        SmoothMap::new("ellipse", DomainBox::cube(1, -1.4, 1.4), vec![t.cos(), t.sin()])
    }

    #[test]
    fn paraboloid_with_vertical_field() {
        let hs = Hypersurface::with_map_field(paraboloid(), constant_field(2, vec![0.0, 0.0, 1.0])).unwrap();
        let v = decompose(&hs, &[0.3, -0.4]).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(v.gamma[k][i][j].abs() < 1e-14);
                }
                assert!(v.shape[k][i].abs() < 1e-14);
            }
        }
        assert!((v.h[0][0] - 2.0).abs() < 1e-14 && (v.h[1][1] - 2.0).abs() < 1e-14);
        assert!(v.h[0][1].abs() < 1e-14);
        assert!(v.tau.iter().all(|t| t.abs() < 1e-14));
    }

    #[test]
    fn ellipse_centroaffine() {
        let e = ellipse();
        let hs = Hypersurface::with_map_field(e.clone(), e.scale(-1.0)).unwrap();
        let v = decompose(&hs, &[0.7]).unwrap();
        assert!(v.gamma[0][0][0].abs() < 1e-14);
        assert!((v.h[0][0] - 1.0).abs() < 1e-14);
        assert!((v.shape[0][0] - 1.0).abs() < 1e-14);
        assert!(v.tau[0].abs() < 1e-14);
        let r = fundamental_residuals(&hs, &[0.7]).unwrap();
        assert_eq!(r.gauss, 0.0);
    }

    #[test]
    fn paraboloid_affine_normal_is_sqrt2() {
        let hs = Hypersurface::with_map_field(paraboloid(), constant_field(2, vec![0.0, 0.0, 1.0])).unwrap();
        let region = vec![vec![0.0, 0.0], vec![0.5, -0.5]];
        let b = blaschke_normalize(&hs, &[0.0, 0.0], &region).unwrap();
        for p in &region {
            let c = b.field_jets(p, 0).unwrap();
            assert!(c[0].value().abs() < 1e-12 && c[1].value().abs() < 1e-12);
            assert!((c[2].value() - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_normalizes_to_minus_f() {
        let e = ellipse();
        let hs = Hypersurface::with_map_field(e.clone(), e.scale(-2.0)).unwrap();
        let b = blaschke_normalize(&hs, &[0.0], &[vec![0.5]]).unwrap();
        let c = b.field_jets(&[0.5], 1).unwrap();
        let f = e.eval_jets(&[0.5], 1).unwrap();
        for (ci, fi) in c.iter().zip(&f) {
            assert!((ci + fi).max_abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_trial_is_rejected() {
        // a straight line has h = 0
        let t = Expr::coord(0);
        let line = SmoothMap::new("line", DomainBox::cube(1, -1.0, 1.0), vec![t.clone(), 0.5 * t]);
        let hs = Hypersurface::with_map_field(line, constant_field(1, vec![0.0, 1.0])).unwrap();
        assert!(matches!(
            blaschke_normalize(&hs, &[0.0], &[vec![0.2]]),
            Err(GeomError::Degenerate { .. })
        ));
    }

    #[test]
    fn non_transversal_frame_is_rejected() {
        let hs = Hypersurface::with_map_field(paraboloid(), constant_field(2, vec![1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            decompose(&hs, &[0.0, 0.0]),
            Err(GeomError::Frame { .. })
        ));
    }

    #[test]
    fn sphere_test_refuses_non_blaschke() {
        let e = ellipse();
        let hs = Hypersurface::with_map_field(e.clone(), e.scale(-2.0)).unwrap();
        assert!(matches!(
            is_affine_sphere(&hs, &[vec![0.1]]),
            Err(GeomError::NotBlaschke { .. })
        ));
    }
}
