mod common;

use nalgebra::{Matrix3, Point2};
use proptest::prelude::*;
use rand::Rng;

use common::*;
use regtrack::image::PixelCoords;
use regtrack::ssm::{sl3, CornersBox, Ssm, SsmKind, WarpParams};
use regtrack::Error;

fn coords(pts: &[(f64, f64)]) -> PixelCoords {
    PixelCoords::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
}

fn base() -> CornersBox {
    CornersBox::axis_aligned(20.0, 30.0, 80.0, 70.0)
}

/// Matrix exponential by a long Taylor series after scaling, squared back.
fn expm_oracle(a: &Matrix3<f64>) -> Matrix3<f64> {
    let s = 3;
    let scaled = a / f64::powi(2.0, s);
    let mut term = Matrix3::identity();
    let mut sum = Matrix3::identity();
    for k in 1..40 {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

fn apply(m: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    let v = m * nalgebra::Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

#[test]
fn sl3_single_generators_match_the_exponential() {
    let ssm = Ssm::unit(SsmKind::Sl3);
    let x = coords(&[(0.0, 0.0), (1.0, 0.5), (-2.0, 3.0)]);
    for i in 0..8 {
        let t = 0.3;
        let mut v = vec![0.0; 8];
        v[i] = t;
        let got = ssm
            .warp_points(&WarpParams::new(SsmKind::Sl3, v).unwrap(), &x)
            .unwrap();
        let m = expm_oracle(&(sl3::generator(i) * t));
        for (g, p) in got.points().iter().zip(x.points()) {
            let gap = (g - apply(&m, p)).norm();
            assert!(gap < 1e-12, "generator {i}: {gap}");
        }
    }
    let mut v = vec![0.0; 8];
    v[0] = 2.5;
    let got = ssm
        .warp_points(&WarpParams::new(SsmKind::Sl3, v).unwrap(), &x)
        .unwrap();
    assert!((got.points()[0] - Point2::new(2.5, 0.0)).norm() < 1e-12);
}

#[test]
fn translation_examples() {
    let ssm = Ssm::unit(SsmKind::Translation);
    let tr = |a: f64, b: f64| WarpParams::new(SsmKind::Translation, vec![a, b]).unwrap();
    let moved = ssm
        .warp_points(&tr(3.0, -2.0), &coords(&[(1.0, 1.0)]))
        .unwrap();
    assert_eq!(moved.points()[0], Point2::new(4.0, -1.0));
    assert_eq!(
        ssm.compose(&tr(1.0, 2.0), &tr(3.0, 4.0)).unwrap(),
        tr(4.0, 6.0)
    );
    assert_eq!(ssm.invert(&tr(3.0, -2.0)).unwrap(), tr(-3.0, 2.0));
    assert_eq!(
        ssm.compose(&tr(1.5, 2.0), &ssm.identity()).unwrap(),
        tr(1.5, 2.0)
    );
}

#[test]
fn identity_parameters_by_kind() {
    assert_eq!(
        Ssm::unit(SsmKind::Translation).identity().values(),
        &[0.0, 0.0]
    );
    assert_eq!(
        Ssm::unit(SsmKind::Homography).identity().values(),
        &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
    );
    assert_eq!(
        Ssm::new(SsmKind::Corners, base()).identity().values(),
        &base().to_flat()
    );
    let x = coords(&[(3.0, 4.0), (-1.0, 7.5)]);
    for kind in SsmKind::ALL {
        let ssm = Ssm::new(kind, base());
        let y = ssm.warp_points(&ssm.identity(), &x).unwrap();
        assert!(max_point_gap(&x, &y) < 1e-12, "{kind}");
    }
}

#[test]
fn fits_reproduce_known_warps() {
    let mut r = rng(11);
    let src = random_points(&mut r, 100, 0.0, 100.0);
    for kind in SsmKind::ALL {
        let ssm = Ssm::new(kind, base());
        let truth = match kind {
            SsmKind::Translation => WarpParams::new(kind, vec![3.0, -4.0]).unwrap(),
            SsmKind::Isometry => WarpParams::new(kind, vec![3.0, -4.0, 0.1]).unwrap(),
            SsmKind::Similitude => WarpParams::new(kind, vec![3.0, -4.0, 0.05, 0.1]).unwrap(),
            SsmKind::Affine => {
                WarpParams::new(kind, vec![3.0, -4.0, 0.02, -0.03, 0.01, 0.04]).unwrap()
            }
            _ => ssm
                .params_from_matrix(&Matrix3::new(
                    1.02, 0.03, 3.0, -0.01, 0.98, -4.0, 1e-4, -2e-4, 1.0,
                ))
                .unwrap(),
        };
        let dst = ssm.warp_points(&truth, &src).unwrap();
        let fit = ssm.params_from_points(&src, &dst).unwrap();
        let back = ssm.warp_points(&fit, &src).unwrap();
        assert!(max_point_gap(&back, &dst) < 1e-6, "{kind}");
        let same = ssm.params_from_points(&src, &src).unwrap();
        assert!(
            max_point_gap(&ssm.warp_points(&same, &src).unwrap(), &src) < 1e-9,
            "{kind}"
        );
    }
}

#[test]
fn unit_square_fits() {
    let square = coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
    let shifted = coords(&[(5.0, 0.0), (6.0, 0.0), (6.0, 1.0), (5.0, 1.0)]);
    let t = Ssm::unit(SsmKind::Translation)
        .params_from_points(&square, &shifted)
        .unwrap();
    assert!((t.values()[0] - 5.0).abs() < 1e-12 && t.values()[1].abs() < 1e-12);
    let quad = coords(&[(2.0, 1.0), (9.0, 2.5), (8.0, 7.0), (1.5, 6.0)]);
    let ssm = Ssm::unit(SsmKind::Homography);
    let h = ssm.params_from_points(&square, &quad).unwrap();
    assert!(max_point_gap(&ssm.warp_points(&h, &square).unwrap(), &quad) < 1e-9);
}

#[test]
fn collinear_points_do_not_fit() {
    let line = coords(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
    let other = coords(&[(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (5.0, 3.0), (4.0, 0.0)]);
    for kind in [SsmKind::Affine, SsmKind::Homography] {
        let err = Ssm::unit(kind)
            .params_from_points(&line, &other)
            .unwrap_err();
        assert!(matches!(err, Error::Fit(_)), "{kind}: {err}");
    }
}

#[test]
fn params_to_corners_agrees_with_warp_points() {
    let ssm = Ssm::unit(SsmKind::Homography);
    let p = ssm
        .params_from_matrix(&Matrix3::new(
            1.1, 0.05, 4.0, -0.02, 0.9, 2.0, 3e-4, 1e-4, 1.0,
        ))
        .unwrap();
    let b = base();
    let corners = ssm.params_to_corners(&p, &b).unwrap();
    let warped = ssm.warp_points(&p, &b.to_coords()).unwrap();
    assert!(max_point_gap(&corners.to_coords(), &warped) < 1e-12);
    let t = WarpParams::new(SsmKind::Translation, vec![3.0, 4.0]).unwrap();
    let moved = Ssm::unit(SsmKind::Translation)
        .params_to_corners(&t, &b)
        .unwrap();
    assert_eq!(moved, shifted(&b, 3.0, 4.0));
}

fn params_strategy(kind: SsmKind) -> BoxedStrategy<WarpParams> {
    let t = -8.0..8.0f64;
    let small = -0.08..0.08f64;
    match kind {
        SsmKind::Translation => (t.clone(), t).prop_map(|(a, b)| vec![a, b]).boxed(),
        SsmKind::Isometry => (t.clone(), t, -0.5..0.5f64)
            .prop_map(|(a, b, c)| vec![a, b, c])
            .boxed(),
        SsmKind::Similitude => (t.clone(), t, -0.2..0.2f64, -0.5..0.5f64)
            .prop_map(|(a, b, c, d)| vec![a, b, c, d])
            .boxed(),
        SsmKind::Affine => (t.clone(), t, prop::collection::vec(small, 4))
            .prop_map(|(a, b, rest)| [vec![a, b], rest].concat())
            .boxed(),
        _ => (
            prop::collection::vec(small, 4),
            prop::collection::vec(-8.0..8.0f64, 2),
            prop::collection::vec(-4e-4..4e-4f64, 2),
        )
            .prop_map(|(lin, tr, persp)| {
                vec![
                    1.0 + lin[0],
                    lin[1],
                    tr[0],
                    lin[2],
                    1.0 + lin[3],
                    tr[1],
                    persp[0],
                    persp[1],
                ]
            })
            .boxed(),
    }
    .prop_map(move |v| {
        if kind.dof() < 8 {
            return WarpParams::new(kind, v).unwrap();
        }
        let h = Ssm::unit(SsmKind::Homography);
        let m = h
            .matrix(&WarpParams::new(SsmKind::Homography, v).unwrap())
            .unwrap();
        Ssm::new(kind, base()).params_from_matrix(&m).unwrap()
    })
    .boxed()
}

fn kind_and_triple() -> impl Strategy<Value = (SsmKind, WarpParams, WarpParams, WarpParams)> {
    prop::sample::select(SsmKind::ALL.to_vec()).prop_flat_map(|k| {
        (
            Just(k),
            params_strategy(k),
            params_strategy(k),
            params_strategy(k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn group_laws_hold_in_action((kind, p, q, s) in kind_and_triple(), seed in any::<u64>()) {
        let ssm = Ssm::new(kind, base());
        let x = random_points(&mut rng(seed), 20, 0.0, 100.0);
        let w = |p: &WarpParams| ssm.warp_points(p, &x).unwrap();
        let left = ssm.compose(&ssm.compose(&p, &q).unwrap(), &s).unwrap();
        let right = ssm.compose(&p, &ssm.compose(&q, &s).unwrap()).unwrap();
        prop_assert!(max_point_gap(&w(&left), &w(&right)) < 1e-9);
        let nested = ssm.warp_points(&p, &w(&q)).unwrap();
        prop_assert!(max_point_gap(&w(&ssm.compose(&p, &q).unwrap()), &nested) < 1e-9);
        let inv = ssm.invert(&p).unwrap();
        prop_assert!(max_point_gap(&w(&ssm.compose(&p, &inv).unwrap()), &x) < 1e-9);
        prop_assert!(max_point_gap(&w(&ssm.compose(&inv, &p).unwrap()), &x) < 1e-9);
    }

    #[test]
    fn matrix_round_trips_through_params((kind, p, _q, _s) in kind_and_triple()) {
        let ssm = Ssm::new(kind, base());
        let back = ssm.params_from_matrix(&ssm.matrix(&p).unwrap()).unwrap();
        let x = base().to_coords();
        prop_assert!(max_point_gap(&ssm.warp_points(&p, &x).unwrap(), &ssm.warp_points(&back, &x).unwrap()) < 1e-9);
    }

    #[test]
    fn sl3_has_unit_determinant(v in prop::collection::vec(-0.1..=0.1f64, 8)) {
        prop_assert!((sl3::exp(&v).determinant() - 1.0).abs() < 1e-9);
        let m = Ssm::unit(SsmKind::Sl3).matrix(&WarpParams::new(SsmKind::Sl3, v).unwrap()).unwrap();
        prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn jacobians_match_finite_differences() {
    let mut r = rng(12);
    for kind in SsmKind::ALL {
        let ssm = Ssm::new(kind, base());
        for _ in 0..20 {
            let m = Matrix3::new(
                1.0 + r.random_range(-0.05..0.05),
                r.random_range(-0.05..0.05),
                r.random_range(-5.0..5.0),
                r.random_range(-0.05..0.05),
                1.0 + r.random_range(-0.05..0.05),
                r.random_range(-5.0..5.0),
                r.random_range(-3e-4..3e-4),
                r.random_range(-3e-4..3e-4),
                1.0,
            );
            let p = ssm.params_from_matrix(&m).unwrap();
            let x = random_points(&mut r, 30, 0.0, 100.0);
            let jac = ssm.warp_jacobian(&p, &x).unwrap();
            let fd = central_jacobian(
                |v| {
                    let pv = WarpParams::new(kind, v.to_vec()).unwrap();
                    ssm.warp_points(&pv, &x)
                        .unwrap()
                        .points()
                        .iter()
                        .flat_map(|q| [q.x, q.y])
                        .collect()
                },
                p.values(),
                1e-6,
            );
            let mut num = 0.0;
            for k in 0..x.len() {
                for i in 0..kind.dof() {
                    num += (jac.dx(k, i) - fd[(2 * k, i)]).powi(2)
                        + (jac.dy(k, i) - fd[(2 * k + 1, i)]).powi(2);
                }
            }
            assert!(num.sqrt() / fd.norm() < 1e-5, "{kind}");
        }
    }
}

#[test]
fn lower_kinds_embed_in_higher_ones() {
    let sim = Ssm::unit(SsmKind::Similitude);
    let p = WarpParams::new(SsmKind::Similitude, vec![2.0, -1.0, 0.1, 0.3]).unwrap();
    let m = sim.matrix(&p).unwrap();
    let x = random_points(&mut rng(13), 100, -50.0, 50.0);
    let reference = sim.warp_points(&p, &x).unwrap();
    for kind in [SsmKind::Affine, SsmKind::Homography, SsmKind::Sl3] {
        let ssm = Ssm::new(kind, base());
        let y = ssm
            .warp_points(&ssm.params_from_matrix(&m).unwrap(), &x)
            .unwrap();
        assert!(max_point_gap(&reference, &y) < 1e-9, "{kind}");
    }
}

#[test]
fn points_sent_to_infinity_are_geometry_errors() {
    let ssm = Ssm::unit(SsmKind::Homography);
    let p = WarpParams::new(
        SsmKind::Homography,
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0],
    )
    .unwrap();
    let err = ssm.warp_points(&p, &coords(&[(1.0, 0.0)])).unwrap_err();
    assert!(matches!(err, Error::Geometry(_)));
}
