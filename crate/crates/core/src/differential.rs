//! Evaluation of fitted implicit functions and the surface frame of their level sets.

use nalgebra::{DVector, Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::trialspace::TrialSpaceAssembly;
use crate::Vec3;

/// Gradients shorter than this are treated as a vanishing level-set gradient.
pub const MIN_GRADIENT: f64 = 1e-10;

/// Relative size above which the discarded shape-operator eigenvalue flags a frame.
pub const NORMAL_MODE_TOLERANCE: f64 = 1e-4;

/// `F(x) = Σ_j λ_j ψ_j(x)` over the basis of an assembly.
#[derive(Debug, Clone)]
pub struct FittedImplicit {
    pub assembly: TrialSpaceAssembly,
    pub lambda: DVector<f64>,
}

impl FittedImplicit {
    pub fn new(assembly: TrialSpaceAssembly, lambda: DVector<f64>) -> Result<Self> {
        if lambda.len() != assembly.basis_count() {
            return Err(Error::Domain(format!(
                "{} coefficients for {} basis functions",
                lambda.len(),
                assembly.basis_count()
            )));
        }
        Ok(Self { assembly, lambda })
    }

    pub fn eval_f(&self, x: &Vec3) -> f64 {
        let k = &self.assembly.kernels;
        self.assembly.basis.iter().zip(self.lambda.iter()).map(|(b, l)| l * b.value(k, x)).sum()
    }

    pub fn eval_grad(&self, x: &Vec3) -> Vec3 {
        let k = &self.assembly.kernels;
        self.assembly
            .basis
            .iter()
            .zip(self.lambda.iter())
            .fold(Vec3::zeros(), |acc, (b, l)| acc + b.gradient(k, x) * *l)
    }

    pub fn eval_hessian(&self, x: &Vec3) -> Result<Matrix3<f64>> {
        self.assembly.hessian_ready()?;
        let k = &self.assembly.kernels;
        let h = self
            .assembly
            .basis
            .iter()
            .zip(self.lambda.iter())
            .fold(Matrix3::zeros(), |acc, (b, l)| acc + b.hessian(k, x) * *l);
        Ok((h + h.transpose()) * 0.5)
    }

    /// Unit normal `∇F/‖∇F‖` oriented to agree with `orientation_ref`.
    pub fn normal(&self, x: &Vec3, orientation_ref: &Vec3) -> Result<Vec3> {
        oriented_normal(&self.eval_grad(x), orientation_ref).map(|(n, _)| n)
    }

    pub fn surface_frame(&self, x: &Vec3, orientation_ref: &Vec3) -> Result<SurfaceFrame> {
        let g = self.eval_grad(x);
        let h = self.eval_hessian(x)?;
        frame_from_derivatives(&g, &h, orientation_ref)
    }
}

/// Normal, principal curvatures and directions at a point of a level set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub normal: Vec3,
    pub kappa1: f64,
    pub kappa2: f64,
    pub dir1: Vec3,
    pub dir2: Vec3,
    pub gaussian: f64,
    pub mean: f64,
    /// Eigenvalue of the shape operator along the normal (ideally zero).
    pub normal_mode: f64,
    /// Set when `normal_mode` is not negligible next to the curvatures.
    pub flagged: bool,
}

impl SurfaceFrame {
    /// Principal curvature of largest magnitude.
    pub fn dominant_curvature(&self) -> f64 {
        if self.kappa1.abs() >= self.kappa2.abs() {
            self.kappa1
        } else {
            self.kappa2
        }
    }
}

fn oriented_normal(grad: &Vec3, orientation_ref: &Vec3) -> Result<(Vec3, f64)> {
    let len = grad.norm();
    if !(len > MIN_GRADIENT) {
        return Err(Error::DegenerateLevelSet(format!("‖∇F‖ = {len:.3e}")));
    }
    let sign = if grad.dot(orientation_ref) < 0.0 { -1.0 } else { 1.0 };
    Ok((grad * (sign / len), sign))
}

/// Frame from `∇F` and `∇²F`; `S = −P ∇²F P / ‖∇F‖` with `F` sign-flipped if needed so
/// that its gradient points along `orientation_ref`.
pub fn frame_from_derivatives(grad: &Vec3, hess: &Matrix3<f64>, orientation_ref: &Vec3) -> Result<SurfaceFrame> {
    let (n, sign) = oriented_normal(grad, orientation_ref)?;
    let p = Matrix3::identity() - n * n.transpose();
    let s = p * (hess * (-sign / grad.norm())) * p;
    let s = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let normal_idx = (0..3)
        .max_by(|&a, &b| {
            let (x, y) = (eig.eigenvectors.column(a).dot(&n).abs(), eig.eigenvectors.column(b).dot(&n).abs());
            x.total_cmp(&y)
        })
        .unwrap_or(0);
    let mut rest: Vec<usize> = (0..3).filter(|&i| i != normal_idx).collect();
    rest.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (kappa1, kappa2) = (eig.eigenvalues[rest[0]], eig.eigenvalues[rest[1]]);

    // Re-project and orthonormalize the tangent directions against n.
    let mut dir1: Vec3 = p * eig.eigenvectors.column(rest[0]);
    if dir1.norm() < 1e-6 {
        dir1 = any_orthogonal(&n);
    }
    dir1.normalize_mut();
    let dir2 = n.cross(&dir1);

    let normal_mode = eig.eigenvalues[normal_idx];
    let flagged = normal_mode.abs() > NORMAL_MODE_TOLERANCE * kappa1.abs().max(kappa2.abs()).max(1.0);
    Ok(SurfaceFrame {
        normal: n,
        kappa1,
        kappa2,
        dir1,
        dir2,
        gaussian: kappa1 * kappa2,
        mean: 0.5 * (kappa1 + kappa2),
        normal_mode,
        flagged,
    })
}

fn any_orthogonal(n: &Vec3) -> Vec3 {
    let axis = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    n.cross(&axis)
}

/// `‖n* − n‖₂`.
pub fn normal_error(estimated: &Vec3, exact: &Vec3) -> f64 {
    (estimated - exact).norm()
}

/// Maximum and root-mean-square of a set of errors; `None` when empty.
pub fn max_and_rms(errors: &[f64]) -> Option<(f64, f64)> {
    if errors.is_empty() {
        return None;
    }
    let max = errors.iter().copied().fold(0.0, f64::max);
    let rms = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    Some((max, rms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::MaternKernel;
    use crate::stencil::Stencil;
    use crate::trialspace::{assemble_hrbf, assemble_krbf, assemble_rbf, CenterConfig};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ghost_stencil() -> crate::stencil::GhostStencil {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3> = (0..12)
            .map(|_| Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.05..0.05)))
            .collect();
        Stencil { center_index: 0, neighbor_indices: (0..12).collect(), points: pts }
            .attach_ghosts(Vec3::z(), 0.1, 1.0)
            .unwrap()
    }

    fn random_fits() -> Vec<FittedImplicit> {
        let g = ghost_stencil();
        let k3 = MaternKernel::new(5, 3).unwrap();
        let k1 = MaternKernel::new(5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        [
            assemble_rbf(&g, k3).unwrap(),
            assemble_hrbf(&g, k3).unwrap(),
            assemble_krbf(&g, k3, k1, &CenterConfig::default()).unwrap(),
        ]
        .into_iter()
        .map(|asm| {
            let lam = DVector::from_fn(asm.basis_count(), |_, _| rng.random_range(-1.0..1.0));
            FittedImplicit::new(asm, lam).unwrap()
        })
        .collect()
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-5;
        for fit in random_fits() {
            for _ in 0..20 {
                let x = Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2));
                let g = fit.eval_grad(&x);
                let hs = fit.eval_hessian(&x).unwrap();
                for a in 0..3 {
                    let mut e = Vec3::zeros();
                    e[a] = h;
                    let fd = (fit.eval_f(&(x + e)) - fit.eval_f(&(x - e))) / (2.0 * h);
                    assert!((g[a] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{:?} grad {a}: {} vs {fd}", fit.assembly.kind, g[a]);
                    let fdg = (fit.eval_grad(&(x + e)) - fit.eval_grad(&(x - e))) / (2.0 * h);
                    for b in 0..3 {
                        assert!((hs[(b, a)] - fdg[b]).abs() <= 1e-5 * (1.0 + fdg[b].abs()));
                    }
                }
                assert_eq!(hs, hs.transpose());
            }
        }
    }

    #[test]
    fn reproduces_constraint_rows() {
        for fit in random_fits() {
            let a = &fit.assembly.constraint_matrix;
            let b = a * &fit.lambda;
            for (i, x) in fit.assembly.nodes.iter().enumerate() {
                assert_eq!(fit.assembly.basis_row(x), a.row(i).iter().copied().collect::<Vec<_>>());
                assert_relative_eq!(fit.eval_f(x), b[i], max_relative = 1e-12, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn single_center_fit() {
        let g = ghost_stencil();
        let k3 = MaternKernel::new(4, 3).unwrap();
        let mut asm = assemble_rbf(&g, k3).unwrap();
        asm.basis.truncate(1);
        let fit = FittedImplicit::new(asm, DVector::from_element(1, 1.0)).unwrap();
        let p = g.center();
        assert_eq!(fit.eval_f(&p), k3.value_at_origin());
        assert_eq!(fit.eval_grad(&p), Vec3::zeros());
    }

    #[test]
    fn axial_terms_stay_on_axis() {
        use crate::trialspace::Basis;
        let g = ghost_stencil();
        let k3 = MaternKernel::new(4, 3).unwrap();
        let k1 = MaternKernel::new(4, 1).unwrap();
        let mut asm = assemble_krbf(&g, k3, k1, &CenterConfig::default()).unwrap();
        asm.basis = vec![Basis::Axial { axis: 2, center: 0.1 }];
        let fit = FittedImplicit::new(asm, DVector::from_element(1, 1.0)).unwrap();
        let x = Vec3::new(0.3, -0.2, 0.4);
        let grad = fit.eval_grad(&x);
        assert_eq!((grad.x, grad.y), (0.0, 0.0));
        let h = fit.eval_hessian(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if (i, j) != (2, 2) {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
        assert_eq!(fit.eval_grad(&Vec3::new(0.0, 0.0, 0.1)), Vec3::zeros());
        assert!(fit.eval_f(&x) > 0.0);
    }

    #[test]
    fn zero_coefficients_vanish() {
        for fit in random_fits() {
            let fit = FittedImplicit::new(fit.assembly.clone(), DVector::zeros(fit.lambda.len())).unwrap();
            assert_eq!(fit.eval_f(&Vec3::new(0.1, 0.2, 0.3)), 0.0);
        }
    }

    #[test]
    fn hrbf_curvature_needs_tau_four() {
        let g = ghost_stencil();
        let asm = assemble_hrbf(&g, MaternKernel::new(3, 3).unwrap()).unwrap();
        let n = asm.basis_count();
        let fit = FittedImplicit::new(asm, DVector::zeros(n)).unwrap();
        assert!(matches!(fit.eval_hessian(&Vec3::zeros()), Err(Error::Smoothness(_))));
    }

    #[test]
    fn sphere_frame_from_quadratic() {
        // F = ‖x‖²/2 at a point of the unit sphere
        let x = Vec3::new(0.0, 0.6, 0.8);
        let f = frame_from_derivatives(&x, &Matrix3::identity(), &x).unwrap();
        assert_relative_eq!(f.kappa1, -1.0, epsilon = 1e-12);
        assert_relative_eq!(f.kappa2, -1.0, epsilon = 1e-12);
        assert_relative_eq!(f.normal.norm(), 1.0, epsilon = 1e-12);
        assert!(f.dir1.dot(&f.normal).abs() < 1e-8 && f.dir2.dot(&f.normal).abs() < 1e-8);
        assert!(f.dir1.dot(&f.dir2).abs() < 1e-8);
        assert!(!f.flagged);
        assert_eq!(f.gaussian, f.kappa1 * f.kappa2);

        // inward reference flips F and the curvature sign together
        let g = frame_from_derivatives(&x, &Matrix3::identity(), &(-x)).unwrap();
        assert_relative_eq!(g.normal, -f.normal);
        assert_relative_eq!(g.kappa1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_gradient() {
        assert!(matches!(
            frame_from_derivatives(&Vec3::zeros(), &Matrix3::identity(), &Vec3::z()),
            Err(Error::DegenerateLevelSet(_))
        ));
    }

    #[test]
    fn normal_error_values() {
        let a = Vec3::new(0.0, 0.6, 0.8);
        assert_eq!(normal_error(&a, &a), 0.0);
        assert_relative_eq!(normal_error(&a, &-a), 2.0);
        assert_relative_eq!(normal_error(&Vec3::x(), &Vec3::y()), 2f64.sqrt());
        assert_eq!(max_and_rms(&[3.0, 4.0]), Some((4.0, (12.5f64).sqrt())));
        assert_eq!(max_and_rms(&[]), None);
    }
}
