use metacurv::chart::{bundled, Chart};
use metacurv::cli::chart_flat_frame;
use metacurv::connection::Metric;
use metacurv::frobenius::{
    build_commuting_fields, flat_splitting, reconstruct, riemannian_a, Grid, InitialSplitting, ReconstructOptions,
};
use metacurv::symexpr::Scalar;
use metacurv::Error;

fn chart(name: &str) -> Chart {
    Chart::new(bundled(name).unwrap()).unwrap()
}

fn split(name: &str, basis: Vec<Vec<f64>>) -> metacurv::frobenius::Splitting {
    let c = chart(name);
    let (dc, _) = c.connection().unwrap();
    let grid = Grid::around(&c.base, &[0, 1, 2], 0.5, 17).unwrap();
    flat_splitting(&dc, 2, &InitialSplitting::Basis(basis), &grid, &c.base, 0.01).unwrap()
}

#[test]
fn product_splitting_is_zero() {
    let s = split("reg3_product", vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let zero = vec![vec![Scalar::zero()]; 2];
    assert!(s.deviation_from(&zero, &chart("reg3_product").base) < 1e-12);
}

#[test]
fn tilted_splitting_is_constant() {
    let s = split("reg3_product", vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
    let want = vec![vec![Scalar::one()], vec![Scalar::zero()]];
    assert!(s.deviation_from(&want, &chart("reg3_product").base) < 1e-10);
}

#[test]
fn degenerate_initial_basis_is_rejected() {
    let c = chart("reg3_product");
    let (dc, _) = c.connection().unwrap();
    let grid = Grid::around(&c.base, &[0, 1, 2], 0.5, 5).unwrap();
    let basis = InitialSplitting::Basis(vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]);
    assert!(flat_splitting(&dc, 2, &basis, &grid, &c.base, 0.01).is_err());
}

#[test]
fn euclidean_riemannian_a_vanishes() {
    let g = Metric::euclidean(3);
    let a = riemannian_a(&g, 2, &[0.0; 3]).unwrap();
    assert!(a.iter().flatten().all(Scalar::is_zero));
}

#[test]
fn cubic_commuting_fields_are_not_integrable() {
    let c = chart("symp2_cubic");
    let (dc, _) = c.connection().unwrap();
    let ff = chart_flat_frame(&c, dc).unwrap();
    let grid = Grid::around(&c.base, &[0, 1], 0.5, 9).unwrap();
    let err = build_commuting_fields(&ff, &grid, &c.base, 0.01).unwrap_err();
    assert!(matches!(err, Error::NotIntegrable { .. }), "{err}");
}

#[test]
fn quadratic_obstruction_is_t() {
    let c = chart("symp2_quad");
    let (dc, _) = c.connection().unwrap();
    let ff = chart_flat_frame(&c, dc).unwrap();
    let grid = Grid::around(&c.base, &[0, 1], 0.5, 9).unwrap();
    match build_commuting_fields(&ff, &grid, &c.base, 0.01) {
        Err(Error::NotIntegrable { residual, .. }) => assert!((residual - 2.0).abs() < 1e-6, "{residual}"),
        other => panic!("{other:?}"),
    }
    let err = reconstruct(&ff, c.metric.as_ref(), &c.base, &c.names, &ReconstructOptions::default()).unwrap_err();
    assert!(matches!(err, Error::TensorTNonzero(_)), "{err}");
}

#[test]
fn product_reconstruction_is_abelian() {
    let c = chart("reg3_product");
    let (dc, _) = c.connection().unwrap();
    let ff = chart_flat_frame(&c, dc).unwrap();
    let opts = ReconstructOptions { nodes: 17, ..ReconstructOptions::default() };
    let r = reconstruct(&ff, c.metric.as_ref(), &c.base, &c.names, &opts).unwrap();
    assert!(r.c.iter().flatten().flatten().all(|v| v.abs() < 1e-9));
    assert!(r.residuals.first_failure(1e-6).is_none());
    assert!(r.residuals.splitting_deviation.unwrap() < 1e-9);
}

#[test]
fn aff1_structure_constants() {
    let c = chart("aff1_liepoisson");
    let (dc, _) = c.connection().unwrap();
    let ff = chart_flat_frame(&c, dc).unwrap();
    let r = reconstruct(&ff, None, &c.base, &c.names, &ReconstructOptions::default()).unwrap();
    assert!(r.residuals.first_failure(1e-6).is_none(), "{:?}", r.residuals);
    // Non-abelian two-dimensional algebra: c antisymmetric with rank one.
    for i in 0..2 {
        for k in 0..2 {
            assert!((r.c[i][i][k]).abs() < 1e-9);
            assert!((r.c[0][1][k] + r.c[1][0][k]).abs() < 1e-9);
        }
    }
    assert!(r.c[0][1].iter().any(|v| v.abs() > 0.5));
}
