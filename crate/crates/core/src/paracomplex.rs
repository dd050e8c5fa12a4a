//! Para-complex structure, induced almost paracontact structures and
//! codimension-two para-complex hypersurfaces.

use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::hypersurface::{decompose_jets, Hypersurface, InducedJets, TransversalField};
use crate::jets::linalg::det_f64;
use crate::jets::{Expr, Jet, JetLu, SmoothMap};

/// `J̃²C` tangency tolerance used by [`induced_paracontact`].
pub const JTANGENT_EPS: f64 = 1e-10;
/// Rank threshold for the eigen-projections of `φ`.
pub const RANK_EPS: f64 = 1e-9;

/// The block swap `(x, y) -> (y, x)` on `R^{2(n+1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParaStructure {
    half_dim: usize,
}

impl ParaStructure {
    pub fn new(half_dim: usize) -> ParaStructure {
        ParaStructure { half_dim }
    }

    pub fn for_ambient(dim: usize) -> Result<ParaStructure> {
        if !dim.is_multiple_of(2) {
            return Err(GeomError::OddDimension(dim));
        }
        Ok(ParaStructure { half_dim: dim / 2 })
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn apply<T: Clone>(&self, v: &[T]) -> Vec<T> {
        let k = self.half_dim;
        v[k..].iter().chain(&v[..k]).cloned().collect()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let d = 2 * self.half_dim;
        (0..d)
            .map(|r| {
                (0..d)
                    .map(|c| if c == (r + self.half_dim) % d { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub fn det(&self) -> f64 {
        det_f64(&self.matrix())
    }

    pub fn trace(&self) -> f64 {
        let m = self.matrix();
        (0..m.len()).map(|i| m[i][i]).sum()
    }
}

pub fn jtilde(v: &[f64]) -> Result<Vec<f64>> {
    Ok(ParaStructure::for_ambient(v.len())?.apply(v))
}

pub fn jtilde_jets(v: &[Jet]) -> Result<Vec<Jet>> {
    Ok(ParaStructure::for_ambient(v.len())?.apply(v))
}

/// `J̃ ∘ g` as a map.
pub fn jtilde_map(g: &SmoothMap) -> Result<SmoothMap> {
    let s = ParaStructure::for_ambient(g.codomain_dim())?;
    Ok(SmoothMap::new(
        format!("J̃{}", g.name()),
        g.domain().clone(),
        s.apply(g.components()),
    ))
}

/// Induced `(φ, ξ, η)` at a point, in coordinate components.
///
/// `phi[k][i]` is the `∂_k` component of `φ∂_i`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ParacontactFrame {
    pub phi: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Jet-valued `(φ, ξ, η)` together with the induced objects they came from.
#[derive(Debug, Clone)]
pub struct ParacontactJets {
    pub induced: InducedJets,
    pub phi: Vec<Vec<Jet>>,
    pub xi: Vec<Jet>,
    pub eta: Vec<Jet>,
    /// `C`-component of `J̃C` in the frame `[f_*∂, C]`.
    pub tangency_residual: f64,
}

/// Normalized tangency defect of `J̃C`: `det[f_*∂, J̃C] / det[f_*∂, C]`.
pub fn jtangency_residual(hs: &Hypersurface, p: &[f64]) -> Result<f64> {
    let ind = decompose_jets(hs, p, 2)?;
    let jc = jtilde_jets(&ind.transversal)?;
    Ok(ind.frame_components(&jc)?[ind.m].value().abs())
}

/// Decompose `J̃f_*∂_i = f_*(φ∂_i) + η(∂_i) C` and `J̃C = f_*ξ`.
pub fn paracontact_from(induced: InducedJets) -> Result<ParacontactJets> {
    let m = induced.m;
    let jc = jtilde_jets(&induced.transversal)?;
    let comps = induced.frame_components(&jc)?;
    let residual = comps[m].value().abs();
    if residual > JTANGENT_EPS {
        return Err(GeomError::NotJTangent { residual });
    }
    let order = induced.transversal[0].order().min(induced.tangent[0][0].order());
    let xi: Vec<Jet> = comps[..m].iter().map(|j| j.truncate(order)).collect();
    let space = xi[0].space().clone();
    let mut phi = vec![vec![Jet::zero(&space); m]; m];
    let mut eta = Vec::with_capacity(m);
    for i in 0..m {
        let jt = jtilde_jets(&induced.tangent[i])?;
        let c = induced.frame_components(&jt)?;
        for k in 0..m {
            phi[k][i] = c[k].truncate(order);
        }
        eta.push(c[m].truncate(order));
    }
    Ok(ParacontactJets {
        induced,
        phi,
        xi,
        eta,
        tangency_residual: residual,
    })
}

/// Jet-valued paracontact data with `f` evaluated at `f_order`.
pub fn paracontact_jets(hs: &Hypersurface, p: &[f64], f_order: usize) -> Result<ParacontactJets> {
    paracontact_from(decompose_jets(hs, p, f_order)?)
}

impl ParacontactJets {
    pub fn frame(&self) -> ParacontactFrame {
        ParacontactFrame {
            phi: self
                .phi
                .iter()
                .map(|r| r.iter().map(Jet::value).collect())
                .collect(),
            xi: self.xi.iter().map(Jet::value).collect(),
            eta: self.eta.iter().map(Jet::value).collect(),
        }
    }

    /// `η(X)` for a jet-valued vector field.
    pub fn eta_of(&self, x: &[Jet]) -> Jet {
        let mut acc = &self.eta[0] * &x[0];
        for (e, xi) in self.eta.iter().zip(x).skip(1) {
            acc += &(e * xi);
        }
        acc
    }

    /// Coefficient jets of `Π ± φ` applied to `∂_c`, halved: the `𝔇^±` part of `∂_c`.
    pub fn projected(&self, c: usize, sign: f64) -> Vec<Jet> {
        let m = self.induced.m;
        (0..m)
            .map(|k| {
                let mut v = (&self.xi[k] * &self.eta[c]).scale(-1.0);
                if k == c {
                    v = v.add_scalar(1.0);
                }
                (&v + &self.phi[k][c].scale(sign)).scale(0.5)
            })
            .collect()
    }
}

pub fn induced_paracontact(hs: &Hypersurface, p: &[f64]) -> Result<ParacontactFrame> {
    Ok(paracontact_jets(hs, p, 2)?.frame())
}

/// Deviations from `φ² = Id − η⊗ξ`, `η(ξ) = 1`, `φξ = 0`, `η∘φ = 0`.
pub fn frame_invariant_residual(fr: &ParacontactFrame) -> f64 {
    let m = fr.xi.len();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for k in 0..m {
            let phi2: f64 = (0..m).map(|l| fr.phi[k][l] * fr.phi[l][i]).sum();
            let target = if i == k { 1.0 } else { 0.0 } - fr.eta[i] * fr.xi[k];
            worst = worst.max((phi2 - target).abs());
        }
        let phi_xi: f64 = (0..m).map(|l| fr.phi[i][l] * fr.xi[l]).sum();
        let eta_phi: f64 = (0..m).map(|l| fr.eta[l] * fr.phi[l][i]).sum();
        worst = worst.max(phi_xi.abs()).max(eta_phi.abs());
    }
    let eta_xi: f64 = (0..m).map(|l| fr.eta[l] * fr.xi[l]).sum();
    worst.max((eta_xi - 1.0).abs())
}

/// Greedy column selection with partial pivoting; returns the chosen columns.
fn pivot_columns(cols: &[Vec<f64>], want: usize) -> Result<Vec<usize>> {
    let mut work: Vec<Vec<f64>> = cols.to_vec();
    let mut chosen = Vec::with_capacity(want);
    for _ in 0..want {
        let (best, norm) = (0..work.len())
            .filter(|c| !chosen.contains(c))
            .map(|c| (c, work[c].iter().map(|v| v * v).sum::<f64>().sqrt()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX || norm < RANK_EPS {
            return Err(GeomError::RankDrop { pivot: norm.max(0.0) });
        }
        chosen.push(best);
        let u: Vec<f64> = work[best].iter().map(|v| v / norm).collect();
        for col in work.iter_mut() {
            let dot: f64 = col.iter().zip(&u).map(|(a, b)| a * b).sum();
            for (c, b) in col.iter_mut().zip(&u) {
                *c -= dot * b;
            }
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Which coordinate fields are projected to span `𝔇^+` and `𝔇^-`.
///
/// The choice is made once (at a base point) so the resulting fields
/// `D^±_j = ½(Π ± φ)∂_{c_j}` are smooth on the whole region.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct DBasis {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

impl DBasis {
    pub fn at(hs: &Hypersurface, base: &[f64]) -> Result<DBasis> {
        let pj = paracontact_jets(hs, base, 2)?;
        DBasis::from_jets(&pj)
    }

    pub fn from_jets(pj: &ParacontactJets) -> Result<DBasis> {
        let m = pj.induced.m;
        if m.is_multiple_of(2) {
            return Err(GeomError::Structure(format!(
                "paracontact manifolds are odd-dimensional, got {m}"
            )));
        }
        let n = (m - 1) / 2;
        let pick = |sign: f64| -> Result<Vec<usize>> {
            let cols: Vec<Vec<f64>> = (0..m)
                .map(|c| pj.projected(c, sign).iter().map(Jet::value).collect())
                .collect();
            pivot_columns(&cols, n)
        };
        Ok(DBasis {
            plus: pick(1.0)?,
            minus: pick(-1.0)?,
        })
    }

    /// Jet-valued fields: the `𝔇^+` fields first, then the `𝔇^-` ones.
    pub fn fields(&self, pj: &ParacontactJets) -> Vec<Vec<Jet>> {
        self.plus
            .iter()
            .map(|&c| pj.projected(c, 1.0))
            .chain(self.minus.iter().map(|&c| pj.projected(c, -1.0)))
            .collect()
    }
}

/// A basis of `𝔇_p` (coordinate components), `𝔇^+` part first.
pub fn distribution_d(hs: &Hypersurface, p: &[f64]) -> Result<Vec<Vec<f64>>> {
    let pj = paracontact_jets(hs, p, 2)?;
    let m = pj.induced.m;
    let eta_norm = pj.eta.iter().fold(0.0f64, |a, e| a.max(e.value().abs()));
    if eta_norm < RANK_EPS {
        return Err(GeomError::Structure(format!(
            "J̃-invariant part of the tangent space has dimension {m}, expected {}",
            m.saturating_sub(1)
        )));
    }
    let basis = DBasis::from_jets(&pj)?;
    let fields: Vec<Vec<f64>> = basis
        .fields(&pj)
        .iter()
        .map(|f| f.iter().map(Jet::value).collect())
        .collect();
    let rank_check = pivot_columns(&fields, fields.len())?;
    debug_assert_eq!(rank_check.len(), m - 1);
    Ok(fields)
}

/// Values of the Lie bracket `[X, Y]` of jet-valued fields (order ≥ 1).
pub fn lie_bracket(x: &[Jet], y: &[Jet]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .map(|k| {
            (0..m)
                .map(|l| x[l].value() * y[k].d(l) - y[l].value() * x[k].d(l))
                .sum()
        })
        .collect()
}

/// `η([X, Y])` from the bracket directly.
pub fn eta_bracket(pj: &ParacontactJets, x: &[Jet], y: &[Jet]) -> f64 {
    lie_bracket(x, y)
        .iter()
        .zip(&pj.eta)
        .map(|(b, e)| b * e.value())
        .sum()
}

/// Right-hand side of the `η([X,Y])` identity for arbitrary fields.
pub fn eta_bracket_formula(pj: &ParacontactJets, x: &[Jet], y: &[Jet]) -> f64 {
    let m = pj.induced.m;
    let h = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += a[i] * b[j] * pj.induced.h[i][j].value();
            }
        }
        s
    };
    let phi = |v: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|k| (0..m).map(|l| pj.phi[k][l].value() * v[l]).sum())
            .collect()
    };
    let xv: Vec<f64> = x.iter().map(Jet::value).collect();
    let yv: Vec<f64> = y.iter().map(Jet::value).collect();
    let eta_x = pj.eta_of(x);
    let eta_y = pj.eta_of(y);
    let dir = |v: &[f64], j: &Jet| -> f64 { (0..m).map(|l| v[l] * j.d(l)).sum() };
    let tau = |v: &[f64]| -> f64 { (0..m).map(|l| v[l] * pj.induced.tau[l].value()).sum() };
    h(&xv, &phi(&yv)) - h(&yv, &phi(&xv)) + dir(&xv, &eta_y) - dir(&yv, &eta_x) + eta_y.value() * tau(&xv)
        - eta_x.value() * tau(&yv)
}

/// Maximum `|η([D_i, D_j])|` over the `𝔇`-basis fields on a region.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Involutivity {
    pub involutive: bool,
    pub max: f64,
    pub witness: Option<Vec<f64>>,
    pub basis: DBasis,
}

pub const INVOLUTIVITY_TOL: f64 = 1e-9;

pub fn eta_brackets_at(hs: &Hypersurface, basis: &DBasis, p: &[f64]) -> Result<f64> {
    let pj = paracontact_jets(hs, p, 3)?;
    let fields = basis.fields(&pj);
    let mut worst: f64 = 0.0;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            worst = worst.max(eta_bracket(&pj, &fields[i], &fields[j]).abs());
        }
    }
    Ok(worst)
}

pub fn involutivity_check(hs: &Hypersurface, base: &[f64], region: &[Vec<f64>]) -> Result<Involutivity> {
    let basis = DBasis::at(hs, base)?;
    let mut max: f64 = 0.0;
    let mut witness = None;
    for p in region {
        let v = eta_brackets_at(hs, &basis, p)?;
        if v > max {
            max = v;
            witness = Some(p.clone());
        }
    }
    Ok(Involutivity {
        involutive: max < INVOLUTIVITY_TOL,
        max,
        witness,
        basis,
    })
}

/// Check names for the six paracontact identities, in residual order.
pub const PARACONTACT_IDENTITIES: [&str; 6] = [
    "paracontact_eta_of_connection",
    "paracontact_phi_of_connection",
    "paracontact_eta_antisymmetric",
    "paracontact_phi_torsion",
    "paracontact_eta_nabla_xi",
    "paracontact_shape_xi",
];

/// Residuals of the six identities satisfied by an induced paracontact structure.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ParacontactResiduals(pub [f64; 6]);

impl ParacontactResiduals {
    pub fn max(&self) -> f64 {
        self.0.iter().fold(0.0, |a, b| a.max(*b))
    }
}

pub fn paracontact_residuals(hs: &Hypersurface, p: &[f64]) -> Result<ParacontactResiduals> {
    paracontact_residuals_from(&paracontact_jets(hs, p, 3)?)
}

pub fn paracontact_residuals_from(pj: &ParacontactJets) -> Result<ParacontactResiduals> {
    let ind = &pj.induced;
    if ind.gauss_order < 1 || pj.eta[0].order() < 1 {
        return Err(GeomError::OrderTooHigh { requested: 1, max: 0 });
    }
    let m = ind.m;
    let g = |k: usize, i: usize, j: usize| ind.gamma[k][i][j].value();
    let h = |i: usize, j: usize| ind.h[i][j].value();
    let s = |k: usize, i: usize| ind.shape[k][i].value();
    let tau = |i: usize| ind.tau[i].value();
    let phi = |k: usize, i: usize| pj.phi[k][i].value();
    let eta = |i: usize| pj.eta[i].value();
    let xi = |k: usize| pj.xi[k].value();
    // (∇_a φ∂_b)^k
    let nabla_phi = |a: usize, b: usize, k: usize| -> f64 {
        pj.phi[k][b].d(a) + (0..m).map(|l| g(k, a, l) * phi(l, b)).sum::<f64>()
    };
    let mut r = [0.0f64; 6];
    for a in 0..m {
        for b in 0..m {
            let lhs1: f64 = (0..m).map(|k| g(k, a, b) * eta(k)).sum();
            let h_a_phib: f64 = (0..m).map(|k| h(a, k) * phi(k, b)).sum();
            let h_b_phia: f64 = (0..m).map(|k| h(b, k) * phi(k, a)).sum();
            let rhs1 = h_a_phib + pj.eta[b].d(a) + eta(b) * tau(a);
            r[0] = r[0].max((lhs1 - rhs1).abs());

            for k in 0..m {
                let lhs2: f64 = (0..m).map(|l| phi(k, l) * g(l, a, b)).sum();
                let rhs2 = nabla_phi(a, b, k) - eta(b) * s(k, a) - h(a, b) * xi(k);
                r[1] = r[1].max((lhs2 - rhs2).abs());

                let rhs4 = nabla_phi(a, b, k) - nabla_phi(b, a, k) + eta(a) * s(k, b) - eta(b) * s(k, a);
                r[3] = r[3].max(rhs4.abs());
            }

            let rhs3 =
                h_a_phib - h_b_phia + pj.eta[b].d(a) - pj.eta[a].d(b) + eta(b) * tau(a) - eta(a) * tau(b);
            r[2] = r[2].max(rhs3.abs());
        }
        let nabla_xi: f64 = (0..m)
            .map(|k| eta(k) * (pj.xi[k].d(a) + (0..m).map(|l| g(k, a, l) * xi(l)).sum::<f64>()))
            .sum();
        r[4] = r[4].max((nabla_xi - tau(a)).abs());
        let eta_s: f64 = (0..m).map(|k| eta(k) * s(k, a)).sum();
        let h_xi: f64 = (0..m).map(|k| h(a, k) * xi(k)).sum();
        r[5] = r[5].max((eta_s + h_xi).abs());
    }
    Ok(ParacontactResiduals(r))
}

/// `h(ξ, ξ)` at a point.
pub fn h_xi_xi(pj: &ParacontactJets) -> f64 {
    let m = pj.induced.m;
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += pj.xi[i].value() * pj.xi[j].value() * pj.induced.h[i][j].value();
        }
    }
    s
}

/// A para-holomorphic immersion `g: R^{2n} -> R^{2n+2}` with transversal bundle `{ζ, J̃ζ}`.
#[derive(Debug, Clone)]
pub struct CodimTwoSurface {
    pub g: SmoothMap,
    pub zeta: Arc<dyn TransversalField>,
}

impl CodimTwoSurface {
    pub fn new(g: SmoothMap, zeta: Arc<dyn TransversalField>) -> Result<CodimTwoSurface> {
        let d = g.codomain_dim();
        ParaStructure::for_ambient(d)?;
        if g.domain_dim() + 2 != d {
            return Err(GeomError::Dimension(format!(
                "codimension-two surface needs codomain = domain + 2, got {} -> {d}",
                g.domain_dim()
            )));
        }
        Ok(CodimTwoSurface { g, zeta })
    }

    /// `g` with the radial field `ζ = −g`.
    pub fn radial(g: SmoothMap) -> Result<CodimTwoSurface> {
        let z = g.scale(-1.0);
        CodimTwoSurface::new(g, Arc::new(z))
    }

    pub fn dim(&self) -> usize {
        self.g.domain_dim()
    }
}

/// Jet-valued codimension-two Gauss/Weingarten data.
#[derive(Debug, Clone)]
pub struct CodimTwoJets {
    pub m: usize,
    pub gauss_order: usize,
    pub tangent: Vec<Vec<Jet>>,
    pub zeta: Vec<Jet>,
    pub second: Vec<Vec<Vec<Jet>>>,
    pub gamma: Vec<Vec<Vec<Jet>>>,
    pub h1: Vec<Vec<Jet>>,
    pub h2: Vec<Vec<Jet>>,
    pub shape: Vec<Vec<Jet>>,
    pub tau1: Vec<Jet>,
    pub tau2: Vec<Jet>,
    pub theta: Jet,
    frame: JetLu,
}

/// Value-level codimension-two induced objects.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CodimTwoInduced {
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub h1: Vec<Vec<f64>>,
    pub h2: Vec<Vec<f64>>,
    pub shape: Vec<Vec<f64>>,
    pub tau1: Vec<f64>,
    pub tau2: Vec<f64>,
    pub theta_zeta: f64,
    pub h_zeta: f64,
}

pub fn decompose2_jets(gs: &CodimTwoSurface, p: &[f64], g_order: usize) -> Result<CodimTwoJets> {
    let m = gs.dim();
    let c_order = g_order.min(gs.zeta.max_order());
    if g_order < 2 || c_order < 1 {
        return Err(GeomError::OrderTooHigh {
            requested: 2,
            max: g_order.min(c_order + 1),
        });
    }
    let gj = gs.g.eval_jets(p, g_order)?;
    let zj = gs.zeta.field_jets(p, c_order)?;
    let frame_order = (g_order - 1).min(c_order);
    let gauss_order = (g_order - 2).min(frame_order);
    let w_order = c_order - 1;
    let tangent: Vec<Vec<Jet>> = (0..m)
        .map(|i| gj.iter().map(|c| c.partial(i)).collect())
        .collect();
    let zeta: Vec<Jet> = zj.iter().map(|c| c.truncate(frame_order)).collect();
    let jzeta = jtilde_jets(&zeta)?;
    let rows = m + 2;
    let mat: Vec<Vec<Jet>> = (0..rows)
        .map(|r| {
            tangent
                .iter()
                .map(|t| t[r].clone())
                .chain([zeta[r].clone(), jzeta[r].clone()])
                .collect()
        })
        .collect();
    let frame = JetLu::new(&mat).map_err(|_| GeomError::Frame { point: p.to_vec() })?;
    let theta = frame.det();
    let space = theta.space().clone();
    let zero = Jet::zero(&space);
    let mut second = vec![vec![Vec::new(); m]; m];
    let mut gamma = vec![vec![vec![zero.clone(); m]; m]; m];
    let mut h1 = vec![vec![zero.clone(); m]; m];
    let mut h2 = vec![vec![zero.clone(); m]; m];
    for i in 0..m {
        for j in i..m {
            let gij: Vec<Jet> = tangent[i]
                .iter()
                .map(|c| c.partial(j).truncate(gauss_order))
                .collect();
            let sol = frame.solve(&gij)?;
            for k in 0..m {
                gamma[k][i][j] = sol[k].truncate(gauss_order);
                gamma[k][j][i] = gamma[k][i][j].clone();
            }
            h1[i][j] = sol[m].truncate(gauss_order);
            h1[j][i] = h1[i][j].clone();
            h2[i][j] = sol[m + 1].truncate(gauss_order);
            h2[j][i] = h2[i][j].clone();
            second[i][j] = gij.clone();
            second[j][i] = gij;
        }
    }
    let mut shape = vec![vec![zero.clone(); m]; m];
    let mut tau1 = Vec::with_capacity(m);
    let mut tau2 = Vec::with_capacity(m);
    for i in 0..m {
        let dz: Vec<Jet> = zj.iter().map(|c| c.partial(i)).collect();
        let sol = frame.solve(&dz)?;
        for k in 0..m {
            shape[k][i] = (-&sol[k]).truncate(w_order);
        }
        tau1.push(sol[m].truncate(w_order));
        tau2.push(sol[m + 1].truncate(w_order));
    }
    Ok(CodimTwoJets {
        m,
        gauss_order,
        tangent,
        zeta,
        second,
        gamma,
        h1,
        h2,
        shape,
        tau1,
        tau2,
        theta,
        frame,
    })
}

fn values2(a: &[Vec<Jet>]) -> Vec<Vec<f64>> {
    a.iter().map(|r| r.iter().map(Jet::value).collect()).collect()
}

impl CodimTwoJets {
    pub fn values(&self) -> CodimTwoInduced {
        let h1 = values2(&self.h1);
        let theta = self.theta.value();
        CodimTwoInduced {
            gamma: self.gamma.iter().map(|g| values2(g)).collect(),
            h_zeta: det_f64(&h1) / (theta * theta),
            h1,
            h2: values2(&self.h2),
            shape: values2(&self.shape),
            tau1: self.tau1.iter().map(Jet::value).collect(),
            tau2: self.tau2.iter().map(Jet::value).collect(),
            theta_zeta: theta,
        }
    }

    /// `max |∂_i∂_j g − Γ^k_ij g_*∂_k − h1_ij ζ − h2_ij J̃ζ|`, relative to `max(1, |∂_i∂_j g|)`.
    pub fn reconstruction_residual(&self) -> f64 {
        let m = self.m;
        let jz: Vec<f64> = ParaStructure::new((m + 2) / 2)
            .apply(&self.zeta)
            .iter()
            .map(Jet::value)
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = &self.second[i][j];
                let scale = target.iter().map(|c| c.value().abs()).fold(1.0, f64::max);
                for (r, t) in target.iter().enumerate() {
                    let mut acc =
                        self.h1[i][j].value() * self.zeta[r].value() + self.h2[i][j].value() * jz[r];
                    for k in 0..m {
                        acc += self.gamma[k][i][j].value() * self.tangent[k][r].value();
                    }
                    worst = worst.max((t.value() - acc).abs() / scale);
                }
            }
        }
        worst
    }

    /// Matrix of `J̃` on the tangent space (`[k][j]`: `∂_k` component of
    /// `J̃∂_j`) and the largest transversal component of `J̃g_*∂_j`.
    pub fn tangent_jtilde(&self) -> Result<(Vec<Vec<f64>>, f64)> {
        let m = self.m;
        let mut a = vec![vec![0.0; m]; m];
        let mut normal: f64 = 0.0;
        for j in 0..m {
            let jt = jtilde_jets(&self.tangent[j])?;
            let c = self.frame.solve(&jt)?;
            for k in 0..m {
                a[k][j] = c[k].value();
            }
            normal = normal.max(c[m].value().abs()).max(c[m + 1].value().abs());
        }
        Ok((a, normal))
    }
}

pub fn decompose2(gs: &CodimTwoSurface, p: &[f64]) -> Result<CodimTwoInduced> {
    Ok(decompose2_jets(gs, p, 2)?.values())
}

/// Max over index pairs of the three `h₁`/`h₂` relations under `J̃`.
pub fn h1h2_relation_residual(ind: &CodimTwoInduced, jt: &[Vec<f64>]) -> f64 {
    let m = ind.h1.len();
    let bil = |b: &[Vec<f64>], x: usize, col: usize| -> f64 {
        // b(∂_x, J̃∂_col)
        (0..m).map(|k| b[x][k] * jt[k][col]).sum()
    };
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let h1_x_jy = bil(&ind.h1, i, j);
            let h1_jx_y = bil(&ind.h1, j, i);
            let h2_x_jy = bil(&ind.h2, i, j);
            worst = worst
                .max((h1_x_jy - ind.h2[i][j]).abs())
                .max((h1_jx_y - ind.h2[i][j]).abs())
                .max((h2_x_jy - ind.h1[i][j]).abs());
        }
    }
    worst
}

/// `det[h₁(X_i, X_j)]` for the basis `X_i = Σ_k basis[i][k] ∂_k`, with the first
/// vector rescaled so that `θ_ζ(X_1, …, X_m) = 1`.
pub fn h_zeta_in_basis(ind: &CodimTwoInduced, basis: &[Vec<f64>]) -> Result<f64> {
    let m = ind.h1.len();
    let b = det_f64(basis);
    if b.abs() < 1e-12 {
        return Err(GeomError::Singular { pivot: b.abs() });
    }
    let mut x = basis.to_vec();
    let k = 1.0 / (b * ind.theta_zeta);
    for v in x[0].iter_mut() {
        *v *= k;
    }
    let g: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = 0.0;
                    for a in 0..m {
                        for c in 0..m {
                            s += x[i][a] * ind.h1[a][c] * x[j][c];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect();
    Ok(det_f64(&g))
}

/// Outcome of the radial affine-normal normalization `ζ' = −α g`.
#[derive(Debug, Clone)]
pub struct AffineNormal2 {
    pub alpha: f64,
    /// Ratio `ζ'/ζ` relative to the input field (1 when the input is already normalized).
    pub rescale: f64,
    pub alpha_spread: f64,
    pub field: SmoothMap,
    /// `max ||H_ζ'| − 1|`.
    pub h_residual: f64,
    pub tau1_max: f64,
    pub tau2_max: f64,
    /// `max |S − α Id|`.
    pub shape_deviation: f64,
    pub is_sphere: bool,
}

pub const RADIAL_EPS: f64 = 1e-10;

/// Scale a radial field `ζ = c·g` to the affine normal `−α g`, `α = |H_{−g}|^{1/(m+4)}`.
pub fn normalize_affine_normal2(gs: &CodimTwoSurface, region: &[Vec<f64>]) -> Result<AffineNormal2> {
    let m = gs.dim();
    let mut alphas = Vec::with_capacity(region.len());
    let mut ratios = Vec::with_capacity(region.len());
    for p in region {
        let g = gs.g.eval(p)?;
        let z: Vec<f64> = gs.zeta.field_jets(p, 0)?.iter().map(Jet::value).collect();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let c = g.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / gg;
        let off = g
            .iter()
            .zip(&z)
            .map(|(a, b)| (b - c * a).powi(2))
            .sum::<f64>()
            .sqrt();
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if off > RADIAL_EPS * zn.max(1.0) {
            return Err(GeomError::NotCentroAffine);
        }
        ratios.push(c);
        let radial = CodimTwoSurface::radial(gs.g.clone())?;
        let v = decompose2(&radial, p)?;
        if det_f64(&v.h1).abs() < 1e-12 {
            return Err(GeomError::Degenerate { det: det_f64(&v.h1) });
        }
        alphas.push(v.h_zeta.abs().powf(1.0 / (m as f64 + 4.0)));
    }
    let n = alphas.len() as f64;
    let alpha = alphas.iter().sum::<f64>() / n;
    let spread = (alphas.iter().map(|a| (a - alpha).powi(2)).sum::<f64>() / n).sqrt();
    let c_mean = ratios.iter().sum::<f64>() / n;
    let field =
        gs.g.scale(-alpha)
            .with_name(format!("affine normal of {}", gs.g.name()));
    let normalized = CodimTwoSurface::new(gs.g.clone(), Arc::new(field.clone()))?;
    let (mut h_res, mut t1, mut t2, mut dev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in region {
        let v = decompose2(&normalized, p)?;
        h_res = h_res.max((v.h_zeta.abs() - 1.0).abs());
        t1 = v.tau1.iter().fold(t1, |a, t| a.max(t.abs()));
        t2 = v.tau2.iter().fold(t2, |a, t| a.max(t.abs()));
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { alpha } else { 0.0 };
                dev = dev.max((v.shape[i][j] - target).abs());
            }
        }
    }
    let tol = crate::hypersurface::TOL_DIFF1;
    Ok(AffineNormal2 {
        alpha,
        rescale: -alpha / c_mean,
        alpha_spread: spread,
        field,
        h_residual: h_res,
        tau1_max: t1,
        tau2_max: t2,
        shape_deviation: dev,
        is_sphere: h_res < tol && t1 < tol && t2 < tol && dev < tol && spread < tol,
    })
}

/// Coefficient map of a vector field given by expressions, evaluated as jets.
pub fn field_jets(
    coeffs: &[Expr],
    domain: &crate::jets::DomainBox,
    p: &[f64],
    order: usize,
) -> Result<Vec<Jet>> {
    SmoothMap::new("field", domain.clone(), coeffs.to_vec()).eval_jets(p, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::DomainBox;

    #[test]
    fn block_swap() {
        assert_eq!(jtilde(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![3.0, 4.0, 1.0, 2.0]);
        assert!(matches!(
            jtilde(&[1.0, 2.0, 3.0]),
            Err(GeomError::OddDimension(3))
        ));
    }

    #[test]
    fn structure_invariants() {
        for half in 1..6 {
            let s = ParaStructure::new(half);
            assert_eq!(s.trace(), 0.0);
            assert_eq!(s.det(), if half % 2 == 0 { 1.0 } else { -1.0 });
            let v: Vec<f64> = (0..2 * half).map(|i| i as f64 * 0.7 - 1.0).collect();
            assert_eq!(s.apply(&s.apply(&v)), v);
            let plus: Vec<f64> = v.iter().zip(s.apply(&v)).map(|(a, b)| a + b).collect();
            assert_eq!(s.apply(&plus), plus);
        }
    }

    fn pair_ee() -> SmoothMap {
        let (x, y) = (Expr::coord(0), Expr::coord(1));
        SmoothMap::new(
            "pair",
            DomainBox::cube(2, -1.4, 1.4),
            vec![
                x.cos() - y.cos(),
                x.sin() - y.sin(),
                x.cos() + y.cos(),
                x.sin() + y.sin(),
            ],
        )
    }

    #[test]
    fn pair_of_ellipses_radial_frame() {
        let gs = CodimTwoSurface::radial(pair_ee()).unwrap();
        let j = decompose2_jets(&gs, &[0.3, -0.2], 2).unwrap();
        let v = j.values();
        assert!((v.theta_zeta - 8.0).abs() < 1e-12);
        assert!((v.h1[0][0] - 0.5).abs() < 1e-12 && (v.h1[1][1] - 0.5).abs() < 1e-12);
        assert!((v.h2[0][0] - 0.5).abs() < 1e-12 && (v.h2[1][1] + 0.5).abs() < 1e-12);
        assert!((v.h_zeta - 1.0 / 256.0).abs() < 1e-14);
        for i in 0..2 {
            assert!((v.shape[i][i] - 1.0).abs() < 1e-12);
            assert!(v.tau1[i].abs() < 1e-12 && v.tau2[i].abs() < 1e-12);
        }
        let (jt, normal) = j.tangent_jtilde().unwrap();
        assert!(normal < 1e-12);
        assert!(h1h2_relation_residual(&v, &jt) < 1e-12);
        assert!(j.reconstruction_residual() < 1e-12);
    }

    #[test]
    fn h_zeta_is_basis_independent() {
        let gs = CodimTwoSurface::radial(pair_ee()).unwrap();
        let v = decompose2(&gs, &[0.1, 0.4]).unwrap();
        let a = h_zeta_in_basis(&v, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = h_zeta_in_basis(&v, &[vec![0.3, -2.0], vec![1.5, 0.2]]).unwrap();
        assert!((a - v.h_zeta).abs() < 1e-14);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn affine_normal_of_pair_of_ellipses() {
        let gs = CodimTwoSurface::radial(pair_ee()).unwrap();
        let region = vec![vec![0.0, 0.0], vec![0.5, -0.7], vec![-1.0, 0.3]];
        let an = normalize_affine_normal2(&gs, &region).unwrap();
        assert!((an.alpha - 2f64.powf(-4.0 / 3.0)).abs() < 1e-12);
        assert!(an.is_sphere);
        let again = CodimTwoSurface::new(gs.g.clone(), Arc::new(an.field.clone())).unwrap();
        let an2 = normalize_affine_normal2(&again, &region).unwrap();
        assert!((an2.rescale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_radial_field_is_refused() {
        let g = pair_ee();
        let zeta = SmoothMap::new(
            "const",
            g.domain().clone(),
            vec![1.0.into(), 0.0.into(), 0.0.into(), 0.5.into()],
        );
        let gs = CodimTwoSurface::new(g, Arc::new(zeta)).unwrap();
        assert!(matches!(
            normalize_affine_normal2(&gs, &[vec![0.2, 0.1]]),
            Err(GeomError::NotCentroAffine)
        ));
    }
}
