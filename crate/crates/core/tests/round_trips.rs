//! Every exported JSON document re-imports to an equal object.

use cuntz_core::model_space::canonical_basis;
use cuntz_core::operators::{cuntz_family_matrices, gamma_b_matrix, transfer_matrix};
use cuntz_core::rochberg::decompose;
use cuntz_core::{BlaschkeProduct, CircleGrid, Decomposition, FourierSeries, TruncatedOperator};
use num_complex::Complex64;

fn half_and_third() -> BlaschkeProduct {
    BlaschkeProduct::new(vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, -1.0 / 3.0)]).unwrap()
}

#[test]
fn blaschke_spec() {
    let b = half_and_third();
    assert_eq!(BlaschkeProduct::from_json(&b.to_json()).unwrap(), b);
    assert!(BlaschkeProduct::from_json(r#"{"zeros": [[1.0, 0.0]]}"#).is_err());
    assert!(BlaschkeProduct::from_json(r#"{"zeros": []}"#).is_err());
}

#[test]
fn series() {
    let s = FourierSeries::new(-2, vec![Complex64::new(0.1, -0.7), Complex64::new(1.0 / 3.0, 0.0), Complex64::new(-2.5, 1e-300)]).unwrap();
    assert_eq!(FourierSeries::from_json(&s.to_json()).unwrap(), s);
}

#[test]
fn operators() {
    let b = half_and_third();
    let bs = b.branches(4096).unwrap();
    let grid = CircleGrid::new(1024).unwrap();
    let mut ops = vec![gamma_b_matrix(&bs, 8, grid).unwrap(), transfer_matrix(&bs, 8, grid).unwrap()];
    ops.extend(cuntz_family_matrices(&canonical_basis(&b), 8, grid).unwrap());
    ops.push(ops[0].adjoint());
    for op in ops {
        assert_eq!(TruncatedOperator::from_json(&op.to_json()).unwrap(), op);
    }
}

#[test]
fn decomposition_bundle() {
    let b = half_and_third();
    let bs = b.branches(4096).unwrap();
    let f = FourierSeries::new(0, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0), Complex64::new(-0.5, 0.5)]).unwrap();
    let d = decompose(&bs, &canonical_basis(&b), &f, CircleGrid::new(1024).unwrap()).unwrap();
    let back = Decomposition::from_json(&d.to_json()).unwrap();
    assert_eq!(back, d);
    assert_eq!(back.to_json(), d.to_json());
}
