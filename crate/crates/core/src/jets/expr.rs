//! Expression graphs for smooth maps `R^m -> R^N`.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use super::jet::Jet;
use super::space::{JetSpace, MAX_ORDER};
use crate::error::{GeomError, Result};

#[derive(Debug)]
enum Node {
    Const(f64),
    Coord(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Neg(Expr),
    Powf(Expr, f64),
    Exp(Expr),
    Sin(Expr),
    Cos(Expr),
    Sinh(Expr),
    Cosh(Expr),
    /// `∂/∂x_i` of the inner expression.
    Partial(Expr, usize),
}

/// Scalar expression over the domain coordinates.
#[derive(Debug, Clone)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr(Arc::new(Node::Const(v)))
    }

    pub fn coord(i: usize) -> Expr {
        Expr(Arc::new(Node::Coord(i)))
    }

    pub fn powf(&self, p: f64) -> Expr {
        Expr(Arc::new(Node::Powf(self.clone(), p)))
    }

    pub fn exp(&self) -> Expr {
        Expr(Arc::new(Node::Exp(self.clone())))
    }

    pub fn sin(&self) -> Expr {
        Expr(Arc::new(Node::Sin(self.clone())))
    }

    pub fn cos(&self) -> Expr {
        Expr(Arc::new(Node::Cos(self.clone())))
    }

    pub fn sinh(&self) -> Expr {
        Expr(Arc::new(Node::Sinh(self.clone())))
    }

    pub fn cosh(&self) -> Expr {
        Expr(Arc::new(Node::Cosh(self.clone())))
    }

    pub fn partial(&self, coord: usize) -> Expr {
        Expr(Arc::new(Node::Partial(self.clone(), coord)))
    }

    fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Replace each coordinate `x_i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        let mut memo = HashMap::new();
        self.subst_rec(subs, &mut memo)
    }

    fn subst_rec(&self, subs: &[Expr], memo: &mut HashMap<*const Node, Expr>) -> Expr {
        let key = Arc::as_ptr(&self.0);
        if let Some(e) = memo.get(&key) {
            return e.clone();
        }
        let out = match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Coord(i) => subs[*i].clone(),
            Node::Add(a, b) => a.subst_rec(subs, memo) + b.subst_rec(subs, memo),
            Node::Sub(a, b) => a.subst_rec(subs, memo) - b.subst_rec(subs, memo),
            Node::Mul(a, b) => a.subst_rec(subs, memo) * b.subst_rec(subs, memo),
            Node::Neg(a) => -a.subst_rec(subs, memo),
            Node::Powf(a, p) => a.subst_rec(subs, memo).powf(*p),
            Node::Exp(a) => a.subst_rec(subs, memo).exp(),
            Node::Sin(a) => a.subst_rec(subs, memo).sin(),
            Node::Cos(a) => a.subst_rec(subs, memo).cos(),
            Node::Sinh(a) => a.subst_rec(subs, memo).sinh(),
            Node::Cosh(a) => a.subst_rec(subs, memo).cosh(),
            Node::Partial(a, i) => {
                // only pure coordinate shifts keep the chain rule trivial
                let shifted = match &*subs[*i].0 {
                    Node::Coord(j) => *j,
                    _ => {
                        panic!("substitution under a partial derivative must map coordinates to coordinates")
                    }
                };
                a.subst_rec(subs, memo).partial(shifted)
            }
        };
        memo.insert(key, out.clone());
        out
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::constant(v)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(0.0), _) => rhs,
            (_, Some(0.0)) => self,
            _ => Expr(Arc::new(Node::Add(self, rhs))),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (_, Some(0.0)) => self,
            (Some(0.0), _) => -rhs,
            _ => Expr(Arc::new(Node::Sub(self, rhs))),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(1.0), _) => rhs,
            (_, Some(1.0)) => self,
            _ => Expr(Arc::new(Node::Mul(self, rhs))),
        }
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::constant(self) * rhs
    }
}

impl Add<Expr> for f64 {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::constant(self) + rhs
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr(Arc::new(Node::Neg(self)))
    }
}

impl<'a> Add<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        self.clone() + rhs.clone()
    }
}

impl<'a> Sub<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self.clone() - rhs.clone()
    }
}

impl<'a> Mul<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        self.clone() * rhs.clone()
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Coord(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Powf(usize, f64),
    Exp(usize),
    Sin(usize),
    Cos(usize),
    Sinh(usize),
    Cosh(usize),
    Partial(usize, usize),
}

impl Op {
    fn children(&self) -> (Option<usize>, Option<usize>) {
        match *self {
            Op::Const(_) | Op::Coord(_) => (None, None),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => (Some(a), Some(b)),
            Op::Neg(a)
            | Op::Powf(a, _)
            | Op::Exp(a)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::Sinh(a)
            | Op::Cosh(a)
            | Op::Partial(a, _) => (Some(a), None),
        }
    }
}

/// Topologically ordered, deduplicated form of a set of output expressions.
#[derive(Debug)]
struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    /// Extra derivative orders each slot needs beyond what its consumer asks.
    depth: Vec<usize>,
}

impl Tape {
    fn compile(outputs: &[Expr]) -> Tape {
        let mut ops = Vec::new();
        let mut seen: HashMap<*const Node, usize> = HashMap::new();
        let outs = outputs
            .iter()
            .map(|e| Tape::emit(e, &mut ops, &mut seen))
            .collect();
        let mut tape = Tape {
            depth: vec![0; ops.len()],
            ops,
            outputs: outs,
        };
        // depth[k] = deepest chain of Partial nodes below k
        for k in 0..tape.ops.len() {
            let extra = usize::from(matches!(tape.ops[k], Op::Partial(..)));
            let (a, b) = tape.ops[k].children();
            let d = a.map_or(0, |a| tape.depth[a]).max(b.map_or(0, |b| tape.depth[b]));
            tape.depth[k] = d + extra;
        }
        tape
    }

    fn emit(e: &Expr, ops: &mut Vec<Op>, seen: &mut HashMap<*const Node, usize>) -> usize {
        let key = Arc::as_ptr(&e.0);
        if let Some(&k) = seen.get(&key) {
            return k;
        }
        let op = match &*e.0 {
            Node::Const(v) => Op::Const(*v),
            Node::Coord(i) => Op::Coord(*i),
            Node::Add(a, b) => Op::Add(Tape::emit(a, ops, seen), Tape::emit(b, ops, seen)),
            Node::Sub(a, b) => Op::Sub(Tape::emit(a, ops, seen), Tape::emit(b, ops, seen)),
            Node::Mul(a, b) => Op::Mul(Tape::emit(a, ops, seen), Tape::emit(b, ops, seen)),
            Node::Neg(a) => Op::Neg(Tape::emit(a, ops, seen)),
            Node::Powf(a, p) => Op::Powf(Tape::emit(a, ops, seen), *p),
            Node::Exp(a) => Op::Exp(Tape::emit(a, ops, seen)),
            Node::Sin(a) => Op::Sin(Tape::emit(a, ops, seen)),
            Node::Cos(a) => Op::Cos(Tape::emit(a, ops, seen)),
            Node::Sinh(a) => Op::Sinh(Tape::emit(a, ops, seen)),
            Node::Cosh(a) => Op::Cosh(Tape::emit(a, ops, seen)),
            Node::Partial(a, i) => Op::Partial(Tape::emit(a, ops, seen), *i),
        };
        ops.push(op);
        let k = ops.len() - 1;
        seen.insert(key, k);
        k
    }

    fn max_output_depth(&self) -> usize {
        self.outputs.iter().map(|&o| self.depth[o]).max().unwrap_or(0)
    }

    fn eval(&self, dim: usize, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = self.ops.len();
        let mut need: Vec<Option<usize>> = vec![None; n];
        for &o in &self.outputs {
            need[o] = Some(order);
        }
        for k in (0..n).rev() {
            let Some(nk) = need[k] else { continue };
            let bump = usize::from(matches!(self.ops[k], Op::Partial(..)));
            let (a, b) = self.ops[k].children();
            for c in [a, b].into_iter().flatten() {
                let v = nk + bump;
                need[c] = Some(need[c].map_or(v, |u| u.max(v)));
            }
        }
        if let Some(worst) = need.iter().flatten().max() {
            if *worst > MAX_ORDER {
                return Err(GeomError::OrderTooHigh {
                    requested: *worst,
                    max: MAX_ORDER,
                });
            }
        }
        let mut vals: Vec<Option<Jet>> = vec![None; n];
        for k in 0..n {
            let Some(nk) = need[k] else { continue };
            let get = |i: usize| -> Jet { vals[i].as_ref().expect("child evaluated").truncate(nk) };
            let space = || JetSpace::get(dim, nk);
            let j = match self.ops[k] {
                Op::Const(v) => Jet::constant(&space(), v),
                Op::Coord(i) => Jet::variable(&space(), i, point[i]),
                Op::Add(a, b) => &get(a) + &get(b),
                Op::Sub(a, b) => &get(a) - &get(b),
                Op::Mul(a, b) => &get(a) * &get(b),
                Op::Neg(a) => -get(a),
                Op::Powf(a, p) => get(a).powf(p),
                Op::Exp(a) => get(a).exp(),
                Op::Sin(a) => get(a).sin(),
                Op::Cos(a) => get(a).cos(),
                Op::Sinh(a) => get(a).sinh(),
                Op::Cosh(a) => get(a).cosh(),
                Op::Partial(a, i) => vals[a]
                    .as_ref()
                    .expect("child evaluated")
                    .truncate(nk + 1)
                    .partial(i),
            };
            vals[k] = Some(j);
        }
        Ok(self
            .outputs
            .iter()
            .map(|&o| vals[o].as_ref().expect("output evaluated").clone())
            .collect())
    }
}

/// Axis-aligned parameter box.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainBox {
    pub ranges: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(ranges: Vec<(f64, f64)>) -> DomainBox {
        DomainBox { ranges }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> DomainBox {
        DomainBox {
            ranges: vec![(lo, hi); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        const SLACK: f64 = 1e-12;
        p.len() == self.ranges.len()
            && p.iter()
                .zip(&self.ranges)
                .all(|(x, (lo, hi))| *x >= lo - SLACK && *x <= hi + SLACK)
    }

    pub fn center(&self) -> Vec<f64> {
        self.ranges.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn product(&self, other: &DomainBox) -> DomainBox {
        let mut ranges = self.ranges.clone();
        ranges.extend(other.ranges.iter().copied());
        DomainBox { ranges }
    }
}

/// A smooth map given by an expression graph over a rectangular domain.
#[derive(Debug, Clone)]
pub struct SmoothMap {
    name: String,
    domain: DomainBox,
    components: Vec<Expr>,
    tape: Arc<OnceLock<Tape>>,
}

impl SmoothMap {
    pub fn new(name: impl Into<String>, domain: DomainBox, components: Vec<Expr>) -> SmoothMap {
        SmoothMap {
            name: name.into(),
            domain,
            components,
            tape: Arc::new(OnceLock::new()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> SmoothMap {
        self.name = name.into();
        self
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn with_domain(&self, domain: DomainBox) -> SmoothMap {
        assert_eq!(domain.dim(), self.domain_dim());
        SmoothMap::new(self.name.clone(), domain, self.components.clone())
    }

    pub fn domain_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn codomain_dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    fn tape(&self) -> &Tape {
        self.tape.get_or_init(|| Tape::compile(&self.components))
    }

    /// Highest order at which every component can be evaluated.
    pub fn max_order(&self) -> usize {
        MAX_ORDER.saturating_sub(self.tape().max_output_depth())
    }

    /// All mixed partials up to `order` of every component at `point`.
    pub fn eval_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        if order > MAX_ORDER {
            return Err(GeomError::OrderTooHigh {
                requested: order,
                max: MAX_ORDER,
            });
        }
        if !self.domain.contains(point) {
            return Err(GeomError::OutsideDomain {
                point: point.to_vec(),
            });
        }
        let out = self.tape().eval(self.domain_dim(), point, order)?;
        if out.iter().any(|j| !j.is_finite()) {
            return Err(GeomError::NonFinite {
                what: self.name.clone(),
            });
        }
        Ok(out)
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_jets(point, 0)?.iter().map(Jet::value).collect())
    }

    /// Apply a constant matrix to the output: `x -> A f(x)`.
    pub fn linear(&self, matrix: &[Vec<f64>]) -> SmoothMap {
        assert!(matrix.iter().all(|r| r.len() == self.codomain_dim()));
        let comps = matrix
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.components)
                    .filter(|(a, _)| **a != 0.0)
                    .fold(Expr::constant(0.0), |acc, (a, c)| acc + *a * c.clone())
            })
            .collect();
        SmoothMap::new(format!("A∘{}", self.name), self.domain.clone(), comps)
    }

    /// Concatenate the outputs of two maps on the same domain.
    pub fn stack(&self, other: &SmoothMap) -> SmoothMap {
        assert_eq!(self.domain_dim(), other.domain_dim());
        let mut comps = self.components.clone();
        comps.extend(other.components.iter().cloned());
        SmoothMap::new(
            format!("({},{})", self.name, other.name),
            self.domain.clone(),
            comps,
        )
    }

    /// `(x, y) -> (f(x), g(y))` on the product domain.
    pub fn product(&self, other: &SmoothMap) -> SmoothMap {
        let m = self.domain_dim();
        let left: Vec<Expr> = (0..m).map(Expr::coord).collect();
        let right: Vec<Expr> = (0..other.domain_dim()).map(|i| Expr::coord(m + i)).collect();
        let mut comps: Vec<Expr> = self.components.iter().map(|c| c.substitute(&left)).collect();
        comps.extend(other.components.iter().map(|c| c.substitute(&right)));
        SmoothMap::new(
            format!("{}×{}", self.name, other.name),
            self.domain.product(&other.domain),
            comps,
        )
    }

    /// Precompose with a scalar reparametrization `x_i -> subs[i](u)`.
    pub fn compose(&self, subs: &[Expr], domain: DomainBox) -> SmoothMap {
        assert_eq!(subs.len(), self.domain_dim());
        let comps = self.components.iter().map(|c| c.substitute(subs)).collect();
        SmoothMap::new(self.name.clone(), domain, comps)
    }

    /// Reinterpret the map on a larger domain whose first coordinates are the old ones.
    pub fn extend_domain(&self, domain: DomainBox) -> SmoothMap {
        assert!(domain.dim() >= self.domain_dim());
        SmoothMap::new(self.name.clone(), domain, self.components.clone())
    }

    /// Componentwise `∂f/∂x_i`.
    pub fn partial(&self, coord: usize) -> SmoothMap {
        let comps = self.components.iter().map(|c| c.partial(coord)).collect();
        SmoothMap::new(format!("∂{coord}{}", self.name), self.domain.clone(), comps)
    }

    pub fn scale(&self, k: f64) -> SmoothMap {
        let comps = self.components.iter().map(|c| k * c.clone()).collect();
        SmoothMap::new(format!("{k}·{}", self.name), self.domain.clone(), comps)
    }

    /// Componentwise `self + k * other`.
    pub fn add_scaled(&self, k: f64, other: &SmoothMap) -> SmoothMap {
        assert_eq!(self.codomain_dim(), other.codomain_dim());
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.clone() + k * b.clone())
            .collect();
        SmoothMap::new(self.name.clone(), self.domain.clone(), comps)
    }

    /// Full-rank test of the Jacobian at `point`; returns the Gram determinant.
    pub fn jacobian_gram(&self, point: &[f64]) -> Result<f64> {
        let jets = self.eval_jets(point, 1)?;
        let m = self.domain_dim();
        let gram: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| jets.iter().map(|c| c.d(i) * c.d(j)).sum())
                    .collect()
            })
            .collect();
        Ok(super::linalg::det_f64(&gram))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_subexpressions_compile_once() {
        let x = Expr::coord(0);
        let s = x.sin();
        let m = SmoothMap::new(
            "t",
            DomainBox::cube(1, -1.0, 1.0),
            vec![&s * &s, s.clone() + s.clone()],
        );
        assert!(m.tape().ops.len() <= 4);
        let v = m.eval(&[0.5]).unwrap();
        assert!((v[0] - 0.5f64.sin().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn partial_node_lowers_max_order() {
        let x = Expr::coord(0);
        let m = SmoothMap::new("c", DomainBox::cube(1, -1.0, 1.0), vec![x.cos()]);
        let d = m.partial(0);
        assert_eq!(d.max_order(), 3);
        let j = d.eval_jets(&[0.3], 3).unwrap();
        assert!((j[0].value() + 0.3f64.sin()).abs() < 1e-15);
        assert!((j[0].coeff(&[3]).unwrap() - 0.3f64.cos()).abs() < 1e-15);
        assert!(matches!(
            d.eval_jets(&[0.3], 4),
            Err(GeomError::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn domain_and_order_errors() {
        let m = SmoothMap::new("x", DomainBox::cube(1, 0.0, 1.0), vec![Expr::coord(0)]);
        assert!(matches!(
            m.eval_jets(&[2.0], 1),
            Err(GeomError::OutsideDomain { .. })
        ));
        assert!(matches!(
            m.eval_jets(&[0.5], 5),
            Err(GeomError::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn non_finite_is_reported() {
        let m = SmoothMap::new(
            "bad",
            DomainBox::cube(1, -1.0, 1.0),
            vec![Expr::coord(0).powf(-1.0)],
        );
        assert!(matches!(m.eval_jets(&[0.0], 1), Err(GeomError::NonFinite { .. })));
    }

    #[test]
    fn product_map_splits_coordinates() {
        let a = SmoothMap::new("a", DomainBox::cube(1, -1.0, 1.0), vec![Expr::coord(0).cos()]);
        let b = SmoothMap::new("b", DomainBox::cube(1, -1.0, 1.0), vec![Expr::coord(0).sinh()]);
        let p = a.product(&b);
        let v = p.eval(&[0.2, 0.7]).unwrap();
        assert_eq!(v, vec![0.2f64.cos(), 0.7f64.sinh()]);
    }
}
