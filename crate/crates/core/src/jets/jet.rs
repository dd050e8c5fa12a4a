use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use super::space::JetSpace;

/// Scalar jet: all mixed partials `∂^α u` of a function at one point with
/// `|α| <= order`.
///
/// Coefficients are raw partial derivatives, not Taylor coefficients, so
/// `coeff(&[1, 1])` of `x*y` is `1`.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.space.dim())
            .field("order", &self.space.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn zero(space: &Arc<JetSpace>) -> Jet {
        Jet::constant(space, 0.0)
    }

    /// The coordinate function `x_i` evaluated at `value`.
    pub fn variable(space: &Arc<JetSpace>, coord: usize, value: f64) -> Jet {
        let mut j = Jet::constant(space, value);
        if space.order() >= 1 {
            let mut idx = vec![0u8; space.dim()];
            idx[coord] = 1;
            let s = space.slot(&idx).expect("first-order slot");
            j.coeffs[s] = 1.0;
        }
        j
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), space.len());
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Mixed partial for the given multi-index, `None` if it exceeds the order.
    pub fn coeff(&self, multi_index: &[u8]) -> Option<f64> {
        self.space.slot(multi_index).map(|s| self.coeffs[s])
    }

    /// First partial `∂_i u` at the point.
    pub fn d(&self, coord: usize) -> f64 {
        let mut idx = vec![0u8; self.dim()];
        idx[coord] = 1;
        self.coeff(&idx).expect("jet has order >= 1")
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let space = JetSpace::get(self.dim(), order);
        Jet {
            coeffs: self.coeffs[..space.len()].to_vec(),
            space,
        }
    }

    /// Jet of `∂u/∂x_i`, one order lower.
    pub fn partial(&self, coord: usize) -> Jet {
        assert!(self.order() >= 1, "partial of an order-0 jet");
        let space = JetSpace::get(self.dim(), self.order() - 1);
        let raise = self.space.raise(coord);
        let coeffs = (0..space.len()).map(|s| self.coeffs[raise[s]]).collect();
        Jet { space, coeffs }
    }

    pub fn scale(&self, k: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add_scalar(&self, k: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    fn aligned<'a>(a: &'a Jet, b: &'a Jet) -> (Arc<JetSpace>, &'a [f64], &'a [f64]) {
        assert_eq!(a.dim(), b.dim(), "jets over different domains");
        let space = if a.order() <= b.order() {
            a.space.clone()
        } else {
            b.space.clone()
        };
        let n = space.len();
        (space, &a.coeffs[..n], &b.coeffs[..n])
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let (space, a, b) = Jet::aligned(self, other);
        let mut coeffs = vec![0.0; space.len()];
        for &(g, l, r, w) in space.product_table() {
            coeffs[g as usize] += w * a[l as usize] * b[r as usize];
        }
        Jet { space, coeffs }
    }

    /// `phi(u)` given `derivs[k] = phi^(k)(u(p))`, via the truncated Taylor
    /// series in the non-constant part of `u`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.order();
        debug_assert!(derivs.len() > order);
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut out = Jet::constant(&self.space, derivs[0]);
        let mut power = Jet::constant(&self.space, 1.0);
        let mut fact = 1.0;
        for (k, dk) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = power.mul_jet(&delta);
            fact *= k as f64;
            let w = dk / fact;
            if w != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += w * p;
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.order() + 1])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    pub fn sinh(&self) -> Jet {
        let v = self.value();
        let (s, c) = (v.sinh(), v.cosh());
        let d: Vec<f64> = (0..=self.order())
            .map(|k| if k % 2 == 0 { s } else { c })
            .collect();
        self.compose(&d)
    }

    pub fn cosh(&self) -> Jet {
        let v = self.value();
        let (s, c) = (v.sinh(), v.cosh());
        let d: Vec<f64> = (0..=self.order())
            .map(|k| if k % 2 == 0 { c } else { s })
            .collect();
        self.compose(&d)
    }

    /// `u^p` for real `p`; requires `u(p) > 0` unless `p` is a non-negative integer.
    pub fn powf(&self, p: f64) -> Jet {
        let v = self.value();
        let is_nonneg_int = p >= 0.0 && p.fract() == 0.0;
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut coef = 1.0;
        for k in 0..=self.order() {
            let e = p - k as f64;
            let val = if is_nonneg_int && e < 0.0 {
                0.0
            } else if is_nonneg_int {
                coef * v.powi(e as i32)
            } else {
                coef * v.powf(e)
            };
            d.push(val);
            coef *= p - k as f64;
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Jet {
        let v = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut coef = 1.0;
        for k in 0..=self.order() {
            d.push(coef / v.powi(k as i32 + 1));
            coef *= -((k + 1) as f64);
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    /// `|u|`, smooth away from zero; the sign is taken from the value part.
    pub fn abs(&self) -> Jet {
        if self.value() < 0.0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn div_jet(&self, other: &Jet) -> Jet {
        self.mul_jet(&other.recip())
    }

    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        let (_, a, b) = Jet::aligned(self, other);
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude among partials of exactly `degree`.
    pub fn max_abs_at_degree(&self, degree: usize) -> f64 {
        (0..self.coeffs.len())
            .filter(|&s| self.space.degree_of(s) == degree)
            .map(|s| self.coeffs[s].abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (space, a, b) = Jet::aligned(self, rhs);
        Jet {
            space,
            coeffs: a.iter().zip(b).map(|(x, y)| x + y).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (space, a, b) = Jet::aligned(self, rhs);
        Jet {
            space,
            coeffs: a.iter().zip(b).map(|(x, y)| x - y).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        *self = &*self - rhs;
    }
}
