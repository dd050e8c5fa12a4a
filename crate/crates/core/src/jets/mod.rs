//! Exact higher-order forward differentiation.
//!
//! [`Jet`] holds every mixed partial of a scalar up to a fixed order,
//! [`SmoothMap`] is an expression graph evaluated to jets, and
//! [`linalg`] solves linear systems whose entries are jets.

mod expr;
mod jet;
pub mod linalg;
mod space;

pub use expr::{DomainBox, Expr, SmoothMap};
pub use jet::Jet;
pub use linalg::{jet_det, jet_solve, JetLu};
pub use space::{JetSpace, MAX_ORDER};

use crate::error::Result;

/// Vector-valued jet: one scalar jet per ambient component.
#[derive(Debug, Clone)]
pub struct JetTensor {
    components: Vec<Jet>,
}

impl JetTensor {
    pub fn new(components: Vec<Jet>) -> JetTensor {
        JetTensor { components }
    }

    pub fn domain_dim(&self) -> usize {
        self.components.first().map_or(0, Jet::dim)
    }

    pub fn order(&self) -> usize {
        self.components.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn components(&self) -> &[Jet] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Jet> {
        self.components
    }

    pub fn value(&self) -> Vec<f64> {
        self.components.iter().map(Jet::value).collect()
    }

    /// Mixed partial `∂^α` of every component.
    pub fn partial(&self, multi_index: &[u8]) -> Option<Vec<f64>> {
        self.components.iter().map(|c| c.coeff(multi_index)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(Jet::is_finite)
    }
}

/// Evaluate all mixed partials of `map` at `point` up to `order`.
pub fn jet_eval(map: &SmoothMap, point: &[f64], order: usize) -> Result<JetTensor> {
    Ok(JetTensor::new(map.eval_jets(point, order)?))
}
