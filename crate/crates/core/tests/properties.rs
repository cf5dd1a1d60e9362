use kerflow_core::geometry::{flow_point_strict, lie_bracket, Point, VectorField};
use kerflow_core::kernels::{self, gram, GramModel};
use kerflow_core::lie::euclidean_motion;
use kerflow_core::linalg::{c, expm, max_abs, CMat};
use kerflow_core::operators::{compress_operator, Symmetry};
use kerflow_core::reflection::{
    os_quotient, os_semigroup, os_semigroup_defect, ReflectionSetup, SmearedKernel, TestFunctionGrid,
    DEFAULT_OS_RANK_CUTOFF,
};
use proptest::prelude::*;

fn points_1d(xs: &[f64]) -> Vec<Point> {
    xs.iter().map(|x| Point::from_element(1, *x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_gram_is_psd_and_whitens(xs in prop::collection::vec(-2.0..2.0f64, 2..12)) {
        let model = gram(&kernels::gaussian_rbf(1, 0.7), &points_1d(&xs)).unwrap();
        let psd = model.psd_check(1e-10);
        prop_assert!(psd.passed);
        prop_assert!(model.rank() >= 1 && model.rank() <= xs.len());
        let kept = &psd.spectrum[..model.rank()];
        let condition = kept[0] / kept[kept.len() - 1];
        prop_assert!(model.whitening_defect() <= 1e-6_f64.max(100.0 * f64::EPSILON * condition));
    }

    #[test]
    fn rotation_flow_is_a_group(x in -1.0..1.0f64, y in -1.0..1.0f64, s in -1.0..1.0f64, t in -1.0..1.0f64) {
        let f = VectorField::rotation();
        let p = Point::from_column_slice(&[x, y]);
        let two = flow_point_strict(&f, &flow_point_strict(&f, &p, s, 1e-3).unwrap(), t, 1e-3).unwrap();
        let one = flow_point_strict(&f, &p, s + t, 1e-3).unwrap();
        prop_assert!((two - one).norm() < 1e-8);
    }

    #[test]
    fn bracket_is_antisymmetric(x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let p = Point::from_column_slice(&[x, y]);
        let a = VectorField::rotation();
        let b = VectorField::trigonometric_2d();
        let ab = lie_bracket(&a, &b).eval(&p).unwrap();
        let ba = lie_bracket(&b, &a).eval(&p).unwrap();
        prop_assert!((ab + ba).norm() < 1e-6);
    }

    #[test]
    fn euclidean_algebras_validate(d in 1usize..4, p in 0usize..4) {
        let p = p.min(d);
        let alg = euclidean_motion(d, p, d - p).unwrap();
        prop_assert!(alg.validate().passed());
        prop_assert!(alg.c_dual().unwrap().validate().passed());
    }

    #[test]
    fn hermitian_compression_gives_unitary_group(
        vals in prop::collection::vec(-1.0..1.0f64, 16),
        t in -2.0..2.0f64,
    ) {
        let xs = [-0.9, -0.3, 0.2, 0.8];
        let model = gram(&kernels::gaussian_rbf(1, 1.0), &points_1d(&xs)).unwrap();
        let raw = CMat::from_fn(4, 4, |i, j| c(vals[4 * i + j]));
        let b = (&raw + raw.adjoint()) * c(0.5);
        let op = compress_operator(&b, &model, Some(Symmetry::Symmetric), 1e-8).unwrap();
        let u = op.unitary_matrix(t).unwrap();
        let r = op.rank();
        prop_assert!(max_abs(&(&u * u.adjoint() - CMat::identity(r, r))) < 1e-10);
        let e = expm(&(&op.matrix * c(t)));
        let spectral = op.semigroup_matrix(t).unwrap();
        prop_assert!(max_abs(&(e - &spectral)) <= 1e-8 * max_abs(&spectral));
    }

    #[test]
    fn twisted_gram_is_psd_for_ou(mass in 0.5..3.0f64, centers in prop::collection::vec(0.4..3.0f64, 1..4)) {
        let g = TestFunctionGrid::symmetric_line(4.0, 161, 2).unwrap();
        let setup = ReflectionSetup::new(&g, 0).unwrap();
        let d = SmearedKernel::new(kernels::ou(1, mass));
        let fns: Vec<_> = centers.iter().map(|c| g.bump(&[*c], 0.2).unwrap()).collect();
        let space = os_quotient(&d, &setup, &fns, DEFAULT_OS_RANK_CUTOFF).unwrap();
        prop_assert_eq!(space.rank(), 1);
        let s = os_semigroup(&space, &d, 0.5).unwrap();
        prop_assert!(s.norm <= 1.0 + 1e-10);
        prop_assert!((s.matrix[(0, 0)].re - (-0.5 * mass).exp()).abs() < 1e-10);
        prop_assert!(os_semigroup_defect(&space, &d, 0.2, 0.3).unwrap() < 1e-8);
    }
}

#[test]
fn gram_from_matrix_rejects_asymmetry() {
    let g = CMat::from_row_slice(2, 2, &[c(1.0), c(0.5), c(0.2), c(1.0)]);
    assert!(GramModel::from_matrix(points_1d(&[0.0, 1.0]), g, 1e-12).is_err());
}
