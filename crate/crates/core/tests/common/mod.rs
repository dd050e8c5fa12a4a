#![allow(dead_code)]

use std::sync::Arc;

use jsphere_core::families::{centro_affine_sphere, source, three_dim_family, FamilySpec};
use jsphere_core::hypersurface::{blaschke_normalize, Hypersurface, TransversalField};
use jsphere_core::jets::{jet_solve, DomainBox, Expr, Jet, JetSpace, SmoothMap};
use jsphere_core::verify::{run_suite, GridSpec};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const DIM: usize = 3;

/// Random smooth expressions in three variables built from the supported primitives.
pub fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..DIM).prop_map(Expr::coord),
        (-2.0..2.0f64).prop_map(Expr::constant),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.clone().prop_map(|a| (0.3 * a).exp()),
            inner.clone().prop_map(|a| (0.3 * a).sinh()),
            inner.clone().prop_map(|a| (0.3 * a).cosh()),
            inner.prop_map(|a| (a.clone() * a + Expr::constant(1.0)).powf(0.5)),
        ]
    })
}

pub fn point_strategy() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-0.5..0.5f64, DIM)
}

fn single(e: &Expr) -> SmoothMap {
    SmoothMap::new("e", DomainBox::cube(DIM, -1.0, 1.0), vec![e.clone()])
}

/// Jet first and second partials against central differences (step 1e-5).
pub fn jet_matches_differences(e: &Expr, p: &[f64]) -> Result<(), TestCaseError> {
    let m = single(e);
    let h = 1e-5;
    let jet = &m
        .eval_jets(p, 2)
        .map_err(|e| TestCaseError::fail(e.to_string()))?[0];
    for i in 0..DIM {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[i] += h;
        b[i] -= h;
        let fa = &m.eval_jets(&a, 1).unwrap()[0];
        let fb = &m.eval_jets(&b, 1).unwrap()[0];
        let fd = (fa.value() - fb.value()) / (2.0 * h);
        let scale = jet.value().abs().max(1.0).max(jet.d(i).abs());
        prop_assert!(
            (fd - jet.d(i)).abs() <= 1e-6 * scale,
            "d{i}: jet {} vs fd {fd}",
            jet.d(i)
        );
        for j in 0..DIM {
            let fd2 = (fa.d(j) - fb.d(j)) / (2.0 * h);
            let mut idx = [0u8; DIM];
            idx[i] += 1;
            idx[j] += 1;
            let exact = jet.coeff(&idx).unwrap();
            let scale = scale.max(exact.abs());
            prop_assert!(
                (fd2 - exact).abs() <= 1e-6 * scale,
                "d{i}d{j}: jet {exact} vs fd {fd2}"
            );
        }
    }
    Ok(())
}

/// Diagonally dominant jet matrices with arbitrary higher coefficients.
pub fn jet_system_strategy() -> impl Strategy<Value = (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> {
    let len = JetSpace::get(2, 3).len();
    (2usize..5).prop_flat_map(move |n| {
        let entry = proptest::collection::vec(-1.0..1.0f64, len);
        (
            proptest::collection::vec(proptest::collection::vec(entry.clone(), n), n),
            proptest::collection::vec(entry, n),
        )
    })
}

pub fn jet_solve_round_trip(a: &[Vec<Vec<f64>>], b: &[Vec<f64>]) -> Result<(), TestCaseError> {
    let space = JetSpace::get(2, 3);
    let n = a.len();
    let mat: Vec<Vec<Jet>> = a
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, coeffs)| {
                    let j = Jet::from_coeffs(&space, coeffs.clone());
                    if r == c {
                        j.add_scalar(n as f64 + 1.0)
                    } else {
                        j
                    }
                })
                .collect()
        })
        .collect();
    let rhs: Vec<Jet> = b.iter().map(|c| Jet::from_coeffs(&space, c.clone())).collect();
    let x = jet_solve(&mat, &rhs).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for r in 0..n {
        let mut acc = Jet::zero(&space);
        for c in 0..n {
            acc = &acc + &(&mat[r][c] * &x[c]);
        }
        let err = acc.max_abs_diff(&rhs[r]);
        prop_assert!(err < 1e-10, "row {r}: {err}");
    }
    Ok(())
}

pub const IDEMPOTENCE_SURFACES: [&str; 7] = ["ellipse", "hyperbola", "sphere", "xyz", "circular", "f1", "f3"];

fn surface(name: &str) -> SmoothMap {
    match name {
        "f1" => three_dim_family(1).unwrap(),
        "f3" => three_dim_family(3).unwrap(),
        s => source(s).unwrap(),
    }
}

/// Point of the surface's domain from unit-cube coordinates.
fn domain_point(f: &SmoothMap, t: &[f64]) -> Vec<f64> {
    f.domain()
        .ranges
        .iter()
        .zip(t)
        .map(|((lo, hi), s)| lo + (hi - lo) * s)
        .collect()
}

/// Normalizing an already normalized field, or any constant multiple of −f, gives the same field.
pub fn blaschke_idempotent(name: &str, t: &[f64], k: f64) -> Result<(), TestCaseError> {
    let f = surface(name);
    let p = domain_point(&f, t);
    let base = f.domain().center();
    let fail = |e: jsphere_core::GeomError| TestCaseError::fail(e.to_string());
    let s = centro_affine_sphere(&f, &base).map_err(fail)?;
    let once = s.hypersurface.with_field(Arc::new(s.blaschke.clone()));
    let twice = blaschke_normalize(&once, &base, &[]).map_err(fail)?;
    let scaled = Hypersurface::with_map_field(f.clone(), f.scale(-k))
        .map_err(fail)?
        .with_orientation(s.hypersurface.orientation);
    let other = blaschke_normalize(&scaled, &base, &[]).map_err(fail)?;
    let c1 = s.blaschke.field_jets(&p, 0).map_err(fail)?;
    let c2 = twice.field_jets(&p, 0).map_err(fail)?;
    let c3 = other.field_jets(&p, 0).map_err(fail)?;
    for ((a, b), c) in c1.iter().zip(&c2).zip(&c3) {
        prop_assert!((a.value() - b.value()).abs() < 1e-10);
        prop_assert!((a.value() - c.value()).abs() < 1e-10);
    }
    Ok(())
}

/// Families cheap enough for repeated suites.
pub const SUITE_FAMILIES: [&str; 7] = [
    "ellipse",
    "f1",
    "f4",
    "example-noninvolutive",
    "pair-ellipse-hyperbola",
    "torus-quadric",
    "paraboloid4",
];

pub fn report_deterministic(name: &str, n: usize, seed: u64) -> Result<(), TestCaseError> {
    let spec = FamilySpec::named(name);
    let a = run_suite(&spec, &GridSpec::uniform(n), seed)
        .unwrap()
        .without_timing();
    let b = run_suite(&spec, &GridSpec::uniform(n), seed)
        .unwrap()
        .without_timing();
    prop_assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    Ok(())
}

/// Checks that aggregate over the whole grid rather than maximizing pointwise.
pub const GLOBAL_CHECKS: [&str; 8] = [
    "affine_sphere",
    "xi_self_pairing",
    "lambda_nonzero",
    "skipped_points",
    "calabi_lambda_relation",
    "affine_normal2",
    "para_sphere",
    "alpha_lambda_relation",
];

/// Refining `n → 2n−1` keeps every sample, so pointwise maxima can only grow.
pub fn report_monotone(name: &str, n: usize, seed: u64) -> Result<(), TestCaseError> {
    let spec = FamilySpec::named(name);
    let coarse = run_suite(&spec, &GridSpec::uniform(n), seed).unwrap();
    let fine = run_suite(&spec, &GridSpec::uniform(2 * n - 1), seed).unwrap();
    for c in &coarse.checks {
        if GLOBAL_CHECKS.contains(&c.name.as_str()) {
            continue;
        }
        let f = fine.check(&c.name).expect("same checks on both grids");
        prop_assert!(f.max_residual >= c.max_residual, "{} shrank", c.name);
        prop_assert!(c.pass || !f.pass, "{} turned into a pass", c.name);
    }
    Ok(())
}
