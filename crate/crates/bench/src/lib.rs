//! Shared fixtures for the kernel benchmarks.

use jsphere_core::families::{named_family, Family, FamilySpec};
use jsphere_core::jets::{Jet, JetSpace};
use jsphere_core::verify::GridSpec;

pub fn family(name: &str) -> Family {
    named_family(&FamilySpec::named(name)).expect("registered family")
}

/// Grid points of a family's domain with `n` samples per axis.
pub fn points(fam: &Family, n: usize) -> Vec<Vec<f64>> {
    GridSpec::uniform(n)
        .resolve(&fam.domain)
        .expect("grid fits")
        .points()
}

/// A jet with every coefficient set, for arithmetic timings.
pub fn dense_jet(dim: usize, order: usize, seed: f64) -> Jet {
    let space = JetSpace::get(dim, order);
    let coeffs = (0..space.len()).map(|i| (seed + i as f64).sin()).collect();
    Jet::from_coeffs(&space, coeffs)
}
