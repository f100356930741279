use minnorm_core::differential::frame_from_derivatives;
use minnorm_core::{ImplicitSurface, Vec3};
use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;

fn unit(v: [f64; 3]) -> Option<Vec3> {
    let v = Vec3::from(v);
    (v.norm() > 1e-3).then(|| v.normalize())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frame_is_orthonormal_and_consistent(
        a in 0.3f64..1.5, b in 0.3f64..1.5, c in 0.3f64..1.5,
        u in 0.01f64..0.99, v in 0.01f64..0.99,
    ) {
        let s = ImplicitSurface::ellipsoid(a, b, c).unwrap();
        let p = s.map_parameters(u, v).unwrap();
        let g = s.gradient(&p);
        let f = frame_from_derivatives(&g, &s.hessian(&p), &g).unwrap();
        prop_assert!((f.normal.norm() - 1.0).abs() < 1e-12);
        prop_assert!(f.normal.dot(&g) > 0.0);
        for d in [f.dir1, f.dir2] {
            prop_assert!((d.norm() - 1.0).abs() < 1e-9);
            prop_assert!(d.dot(&f.normal).abs() < 1e-9);
        }
        prop_assert!(f.dir1.dot(&f.dir2).abs() < 1e-9);
        prop_assert!(f.kappa1 >= f.kappa2);
        prop_assert!((f.gaussian - f.kappa1 * f.kappa2).abs() <= 1e-12 * f.gaussian.abs().max(1.0));
        prop_assert!((f.mean - 0.5 * (f.kappa1 + f.kappa2)).abs() <= 1e-12 * f.mean.abs().max(1.0));
        // convex surface: curvatures share a sign under the outward normal
        prop_assert!(f.gaussian > 0.0);
        prop_assert!(!f.flagged);
    }

    #[test]
    fn curvatures_are_rotation_and_scale_invariant(
        axis in any::<[f64; 3]>().prop_filter_map("nonzero axis", |v| unit([v[0] % 1.0, v[1] % 1.0, v[2] % 1.0])),
        angle in 0.0f64..6.2,
        gscale in 0.1f64..10.0,
        u in 0.01f64..0.99, v in 0.01f64..0.99,
    ) {
        let s = ImplicitSurface::torus(1.0, 0.3).unwrap();
        let p = s.map_parameters(u, v).unwrap();
        let (g, h) = (s.gradient(&p), s.hessian(&p));
        let base = frame_from_derivatives(&g, &h, &g).unwrap();
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let q: Matrix3<f64> = *rot.matrix();
        let g2 = q * g * gscale;
        let h2 = q * h * q.transpose() * gscale;
        let f = frame_from_derivatives(&g2, &h2, &g2).unwrap();
        prop_assert!((f.kappa1 - base.kappa1).abs() < 1e-9 * base.kappa1.abs().max(1.0));
        prop_assert!((f.kappa2 - base.kappa2).abs() < 1e-9 * base.kappa2.abs().max(1.0));
        prop_assert!((f.normal - q * base.normal).norm() < 1e-9);
    }

    #[test]
    fn orientation_flip_negates_curvature(u in 0.01f64..0.99, v in 0.01f64..0.99) {
        let s = ImplicitSurface::ellipsoid(0.85, 0.35, 0.5).unwrap();
        let p = s.map_parameters(u, v).unwrap();
        let (g, h) = (s.gradient(&p), s.hessian(&p));
        let out = frame_from_derivatives(&g, &h, &g).unwrap();
        let inw = frame_from_derivatives(&g, &h, &-g).unwrap();
        prop_assert!((out.normal + inw.normal).norm() < 1e-12);
        prop_assert!((out.kappa1 + inw.kappa2).abs() < 1e-9);
        prop_assert!((out.kappa2 + inw.kappa1).abs() < 1e-9);
    }
}
