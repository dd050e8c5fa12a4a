//! Dense linear algebra over jets.
//!
//! Pivots are chosen from the value parts only; the jet parts follow those
//! pivots, so every solved quantity carries exact derivatives.

use super::jet::Jet;
use crate::error::{GeomError, Result};

/// Pivot magnitude below which a value-part matrix is treated as singular.
pub const PIVOT_EPS: f64 = 1e-12;

/// LU factorization `P A = L U` of a square jet matrix.
#[derive(Debug, Clone)]
pub struct JetLu {
    n: usize,
    lu: Vec<Jet>,
    perm: Vec<usize>,
    sign: f64,
}

impl JetLu {
    /// Factor a row-major `n x n` matrix.
    pub fn new(a: &[Vec<Jet>]) -> Result<JetLu> {
        let n = a.len();
        if a.iter().any(|row| row.len() != n) {
            return Err(GeomError::Dimension("matrix is not square".into()));
        }
        let mut lu: Vec<Jet> = a.iter().flat_map(|r| r.iter().cloned()).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[i * n + k].value().abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < PIVOT_EPS {
                return Err(GeomError::Singular { pivot: best });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let inv = lu[k * n + k].recip();
            for i in k + 1..n {
                let l = &lu[i * n + k] * &inv;
                for j in k + 1..n {
                    let t = &l * &lu[k * n + j];
                    lu[i * n + j] -= &t;
                }
                lu[i * n + k] = l;
            }
        }
        Ok(JetLu { n, lu, perm, sign })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(GeomError::Dimension(format!(
                "rhs length {} for {n}x{n} system",
                rhs.len()
            )));
        }
        let mut y: Vec<Jet> = self.perm.iter().map(|&p| rhs[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let t = &self.lu[i * n + j] * &y[j];
                y[i] -= &t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = &self.lu[i * n + j] * &y[j];
                y[i] -= &t;
            }
            y[i] = y[i].div_jet(&self.lu[i * n + i]);
        }
        Ok(y)
    }

    pub fn det(&self) -> Jet {
        let n = self.n;
        let mut d = self.lu[0].scale(self.sign);
        for i in 1..n {
            d = &d * &self.lu[i * n + i];
        }
        d
    }
}

/// Solve `A x = rhs` with jet entries.
pub fn jet_solve(a: &[Vec<Jet>], rhs: &[Jet]) -> Result<Vec<Jet>> {
    JetLu::new(a)?.solve(rhs)
}

pub fn jet_det(a: &[Vec<Jet>]) -> Result<Jet> {
    Ok(JetLu::new(a)?.det())
}

/// `A x` for a jet matrix and jet vector.
pub fn jet_matvec(a: &[Vec<Jet>], x: &[Jet]) -> Vec<Jet> {
    a.iter()
        .map(|row| {
            let mut acc = &row[0] * &x[0];
            for (r, v) in row.iter().zip(x).skip(1) {
                acc += &(r * v);
            }
            acc
        })
        .collect()
}

/// Solve `A x = b` for plain `f64` data with partial pivoting.
pub fn solve_f64(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .unwrap_or(k);
        if m[p][k].abs() < PIVOT_EPS {
            return Err(GeomError::Singular { pivot: m[p][k].abs() });
        }
        m.swap(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let l = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= l * m[k][j];
            }
            x[i] -= l * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    Ok(x)
}

/// Determinant of a plain matrix (0 when a pivot vanishes exactly).
pub fn det_f64(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .unwrap_or(k);
        if m[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            m.swap(k, p);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let l = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= l * m[k][j];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::JetSpace;

    #[test]
    fn identity_solve_returns_rhs() {
        let s = JetSpace::get(2, 2);
        let one = Jet::constant(&s, 1.0);
        let zero = Jet::zero(&s);
        let a = vec![vec![one.clone(), zero.clone()], vec![zero, one]];
        let b = vec![Jet::variable(&s, 0, 0.3), Jet::variable(&s, 1, -0.2).sin()];
        let x = jet_solve(&a, &b).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert_eq!(xi.max_abs_diff(bi), 0.0);
        }
    }

    #[test]
    fn scalar_quotient() {
        let s = JetSpace::get(1, 1);
        let t = Jet::variable(&s, 0, 0.0);
        let a = vec![vec![t.add_scalar(1.0)]];
        let x = jet_solve(&a, &[t]).unwrap();
        assert_eq!(x[0].value(), 0.0);
        assert!((x[0].d(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_value_part_is_rejected() {
        let s = JetSpace::get(1, 1);
        let t = Jet::variable(&s, 0, 0.0);
        // value part zero even though the derivative is not
        let err = jet_solve(&[vec![t.clone()]], &[t]).unwrap_err();
        assert!(matches!(err, GeomError::Singular { .. }));
    }

    #[test]
    fn determinant_sign_with_pivoting() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(det_f64(&a), -1.0);
        let s = JetSpace::get(1, 0);
        let j: Vec<Vec<Jet>> = a
            .iter()
            .map(|r| r.iter().map(|&v| Jet::constant(&s, v)).collect())
            .collect();
        assert_eq!(jet_det(&j).unwrap().value(), -1.0);
    }
}
