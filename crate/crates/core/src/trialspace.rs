//! Constraint matrices `A` and native-norm Gram matrices `K` for the RBF, Hermite RBF
//! and KAN-inspired (RBF + axial 1-D kernels) trial spaces.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::kernel::MaternKernel;
use crate::solver::NormMatrix;
use crate::stencil::GhostStencil;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialSpaceKind {
    Rbf,
    Hrbf,
    Krbf,
}

impl fmt::Display for TrialSpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rbf => "rbf",
            Self::Hrbf => "hrbf",
            Self::Krbf => "krbf",
        })
    }
}

/// Placement of the 1-D trial centres along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CenterMode {
    /// Projections of the interpolation nodes.
    Original,
    /// Equispaced over the projection range.
    Regrid,
    /// Projections mapped onto an interval of fixed reference length around their mean.
    Stretch,
    /// Equispaced over the stretched interval.
    #[default]
    StretchRegrid,
}

impl CenterMode {
    pub const ALL: [CenterMode; 4] = [Self::Original, Self::Regrid, Self::Stretch, Self::StretchRegrid];

    /// 1-based configuration number used in reports.
    pub fn number(&self) -> u8 {
        match self {
            Self::Original => 1,
            Self::Regrid => 2,
            Self::Stretch => 3,
            Self::StretchRegrid => 4,
        }
    }
}

impl fmt::Display for CenterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Original => "original",
            Self::Regrid => "regrid",
            Self::Stretch => "stretch",
            Self::StretchRegrid => "stretch_regrid",
        })
    }
}

impl FromStr for CenterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "original" => Ok(Self::Original),
            "2" | "regrid" => Ok(Self::Regrid),
            "3" | "stretch" => Ok(Self::Stretch),
            "4" | "stretch_regrid" | "stretch-regrid" => Ok(Self::StretchRegrid),
            other => Err(Error::Domain(format!("unknown center configuration {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CenterConfig {
    pub mode: CenterMode,
    /// Length of the stretched interval; `None` uses twice the node-set diameter.
    pub reference_length: Option<f64>,
}

impl CenterConfig {
    pub fn new(mode: CenterMode) -> Self {
        Self { mode, reference_length: None }
    }
}

/// One column of the trial space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    /// `Φ_{τ,3}(‖x − p‖)`.
    Radial { center: Vec3 },
    /// `∂/∂p_axis Φ_{τ,3}(‖x − p‖)`.
    Hermite { center: Vec3, axis: usize },
    /// `Φ_{τ,1}(|x_axis − c|)`.
    Axial { axis: usize, center: f64 },
}

/// Kernels referenced by the basis functions of one assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernels {
    pub volume: MaternKernel,
    pub axial: Option<MaternKernel>,
}

impl Basis {
    #[inline]
    pub fn value(&self, kernels: &Kernels, x: &Vec3) -> f64 {
        match *self {
            Basis::Radial { center } => kernels.volume.value((x - center).norm()),
            Basis::Hermite { center, axis } => {
                let u = x - center;
                let r = u.norm();
                if r == 0.0 {
                    0.0
                } else {
                    -u[axis] * kernels.volume.phi1_over_r(r)
                }
            }
            Basis::Axial { axis, center } => axial(kernels).value((x[axis] - center).abs()),
        }
    }

    pub fn gradient(&self, kernels: &Kernels, x: &Vec3) -> Vec3 {
        match *self {
            Basis::Radial { center } => {
                let u = x - center;
                let r = u.norm();
                if r == 0.0 {
                    Vec3::zeros()
                } else {
                    u * kernels.volume.phi1_over_r(r)
                }
            }
            Basis::Hermite { center, axis } => {
                let u = x - center;
                -radial_hessian(&kernels.volume, &u).column(axis).into_owned()
            }
            Basis::Axial { axis, center } => {
                let t = x[axis] - center;
                let mut g = Vec3::zeros();
                if t != 0.0 {
                    g[axis] = t * axial(kernels).phi1_over_r(t.abs());
                }
                g
            }
        }
    }

    pub fn hessian(&self, kernels: &Kernels, x: &Vec3) -> Matrix3<f64> {
        match *self {
            Basis::Radial { center } => radial_hessian(&kernels.volume, &(x - center)),
            Basis::Hermite { center, axis } => {
                let u = x - center;
                let r = u.norm();
                if r == 0.0 {
                    return Matrix3::zeros();
                }
                let psi = kernels.volume.hessian_coefficient(r);
                let chi = kernels.volume.third_coefficient(r);
                let mut h = Matrix3::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        let mut t = chi * u[i] * u[j] * u[axis];
                        if i == j {
                            t += psi * u[axis];
                        }
                        if i == axis {
                            t += psi * u[j];
                        }
                        if j == axis {
                            t += psi * u[i];
                        }
                        h[(i, j)] = -t;
                    }
                }
                h
            }
            Basis::Axial { axis, center } => {
                let mut h = Matrix3::zeros();
                h[(axis, axis)] = axial(kernels).phi2((x[axis] - center).abs());
                h
            }
        }
    }
}

#[inline]
fn axial(kernels: &Kernels) -> &MaternKernel {
    kernels.axial.as_ref().expect("axial basis requires a 1-D kernel")
}

/// Hessian of `Φ(‖u‖)`: `φ'/r · I + (φ'' − φ'/r)/r² · u uᵀ`.
fn radial_hessian(kernel: &MaternKernel, u: &Vec3) -> Matrix3<f64> {
    let r = u.norm();
    let mut h = Matrix3::identity() * kernel.phi1_over_r(r);
    if r > 0.0 {
        h += (u * u.transpose()) * kernel.hessian_coefficient(r);
    }
    h
}

/// Constraint matrix, norm Gram and basis description for one stencil.
#[derive(Debug, Clone)]
pub struct TrialSpaceAssembly {
    pub kind: TrialSpaceKind,
    pub kernels: Kernels,
    pub basis: Vec<Basis>,
    pub nodes: Vec<Vec3>,
    pub constraint_matrix: DMatrix<f64>,
    pub norm_gram: NormMatrix,
}

impl TrialSpaceAssembly {
    pub fn basis_count(&self) -> usize {
        self.basis.len()
    }

    /// Row of basis values at `x`; identical to the constraint rows at the nodes.
    pub fn basis_row(&self, x: &Vec3) -> Vec<f64> {
        self.basis.iter().map(|b| b.value(&self.kernels, x)).collect()
    }

    /// Smallest `ν` half-order that keeps the Hessian of every basis continuous.
    pub fn hessian_ready(&self) -> Result<()> {
        let need = match self.kind {
            TrialSpaceKind::Hrbf => 2,
            _ => 1,
        };
        if self.kernels.volume.half_order() < need {
            return Err(Error::Smoothness(format!(
                "{} Hessian needs τ ≥ {} for d = 3",
                self.kind,
                need + 2
            )));
        }
        Ok(())
    }
}

fn constraint_matrix(kernels: &Kernels, basis: &[Basis], nodes: &[Vec3]) -> DMatrix<f64> {
    DMatrix::from_fn(nodes.len(), basis.len(), |i, j| basis[j].value(kernels, &nodes[i]))
}

fn check_distinct(nodes: &[Vec3]) -> Result<()> {
    for i in 0..nodes.len() {
        for j in 0..i {
            if nodes[i] == nodes[j] {
                return Err(Error::SingularAssembly(format!("nodes {j} and {i} coincide")));
            }
        }
    }
    Ok(())
}

fn require_dim(kernel: &MaternKernel, dim: u32) -> Result<()> {
    if kernel.dim() != dim {
        return Err(Error::Kernel(format!("expected a d = {dim} kernel, got d = {}", kernel.dim())));
    }
    Ok(())
}

/// Symmetric Gram `Φ(‖p_i − p_j‖)`, computed on one triangle and mirrored.
fn radial_gram(kernel: &MaternKernel, nodes: &[Vec3]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = kernel.value((nodes[i] - nodes[j]).norm());
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Classical RBF space: `A = K = Φ(Ξ, Ξ)`.
pub fn assemble_rbf(stencil: &GhostStencil, kernel: MaternKernel) -> Result<TrialSpaceAssembly> {
    require_dim(&kernel, 3)?;
    let nodes = stencil.nodes();
    check_distinct(&nodes)?;
    let kernels = Kernels { volume: kernel, axial: None };
    let basis: Vec<Basis> = nodes.iter().map(|&center| Basis::Radial { center }).collect();
    let a = constraint_matrix(&kernels, &basis, &nodes);
    let k = radial_gram(&kernel, &nodes);
    Ok(TrialSpaceAssembly {
        kind: TrialSpaceKind::Rbf,
        kernels,
        basis,
        nodes,
        constraint_matrix: a,
        norm_gram: NormMatrix::Dense(k),
    })
}

/// Hermite space spanned by `Φ(·, p_j)` and `∇^p Φ(·, p_j)`; columns are ordered
/// `[Φ | ∂_{p_1} | ∂_{p_2} | ∂_{p_3}]`.
pub fn assemble_hrbf(stencil: &GhostStencil, kernel: MaternKernel) -> Result<TrialSpaceAssembly> {
    require_dim(&kernel, 3)?;
    if kernel.half_order() < 1 {
        return Err(Error::Smoothness(format!("HRBF needs τ ≥ 3 in 3-D, got τ = {}", kernel.tau())));
    }
    let nodes = stencil.nodes();
    check_distinct(&nodes)?;
    let n = nodes.len();
    let kernels = Kernels { volume: kernel, axial: None };
    let mut basis: Vec<Basis> = nodes.iter().map(|&center| Basis::Radial { center }).collect();
    for axis in 0..3 {
        basis.extend(nodes.iter().map(|&center| Basis::Hermite { center, axis }));
    }
    let a = constraint_matrix(&kernels, &basis, &nodes);

    let m = 4 * n;
    let mut k = DMatrix::zeros(m, m);
    k.view_mut((0, 0), (n, m)).copy_from(&a);
    for i in 0..n {
        for j in 0..=i {
            let u = nodes[i] - nodes[j];
            // ⟨∂_{p_i,k} Φ(·,p_i), ∂_{p_j,l} Φ(·,p_j)⟩ = −H_kl(p_i − p_j)
            let h = radial_hessian(&kernel, &u);
            for ka in 0..3 {
                for la in 0..3 {
                    let v = -h[(ka, la)];
                    k[(n + ka * n + i, n + la * n + j)] = v;
                    k[(n + la * n + j, n + ka * n + i)] = v;
                }
            }
        }
    }
    for i in 0..n {
        for c in n..m {
            k[(c, i)] = k[(i, c)];
        }
    }
    Ok(TrialSpaceAssembly {
        kind: TrialSpaceKind::Hrbf,
        kernels,
        basis,
        nodes,
        constraint_matrix: a,
        norm_gram: NormMatrix::Dense(k),
    })
}

/// Diameter of a point set.
pub fn diameter(points: &[Vec3]) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..points.len() {
        for j in 0..i {
            d = d.max((points[i] - points[j]).norm_squared());
        }
    }
    d.sqrt()
}

/// 1-D trial centres along `axis` (0-based) for the given configuration.
pub fn project_centers(nodes: &[Vec3], axis: usize, config: &CenterConfig) -> Result<Vec<f64>> {
    if nodes.is_empty() {
        return Err(Error::Domain("cannot project an empty node set".into()));
    }
    if axis > 2 {
        return Err(Error::Domain(format!("axis {axis} out of range")));
    }
    let proj: Vec<f64> = nodes.iter().map(|p| p[axis]).collect();
    if config.mode == CenterMode::Original {
        return Ok(proj);
    }
    let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    if !(width > 1e-14 * lo.abs().max(hi.abs()).max(1e-300)) {
        return Err(Error::DegenerateAxis { axis, reason: format!("projection interval has width {width:e}") });
    }
    let n = proj.len();
    let (start, len) = match config.mode {
        CenterMode::Regrid => (lo, width),
        _ => {
            let length = config.reference_length.unwrap_or_else(|| 2.0 * diameter(nodes));
            if !(length > 0.0) {
                return Err(Error::Domain(format!("reference length must be positive, got {length}")));
            }
            let mean = proj.iter().sum::<f64>() / n as f64;
            (mean - 0.5 * length, length)
        }
    };
    Ok(match config.mode {
        CenterMode::Stretch => proj.iter().map(|&x| start + (x - lo) / width * len).collect(),
        _ => equispaced(start, len, n),
    })
}

fn equispaced(start: f64, len: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start + 0.5 * len];
    }
    (0..n).map(|i| start + len * i as f64 / (n - 1) as f64).collect()
}

/// KAN-inspired space `U_{Ξ,Φ_{τ,3}} + K_{Ξ,Φ_{τ,1}}` with block-diagonal norm.
pub fn assemble_krbf(
    stencil: &GhostStencil,
    kernel3: MaternKernel,
    kernel1: MaternKernel,
    config: &CenterConfig,
) -> Result<TrialSpaceAssembly> {
    require_dim(&kernel3, 3)?;
    require_dim(&kernel1, 1)?;
    if kernel3.tau() != kernel1.tau() {
        return Err(Error::Kernel(format!(
            "volume and axial kernels must share τ ({} vs {})",
            kernel3.tau(),
            kernel1.tau()
        )));
    }
    let nodes = stencil.nodes();
    check_distinct(&nodes)?;
    let kernels = Kernels { volume: kernel3, axial: Some(kernel1) };
    let mut basis: Vec<Basis> = nodes.iter().map(|&center| Basis::Radial { center }).collect();
    let mut blocks = vec![radial_gram(&kernel3, &nodes)];
    for axis in 0..3 {
        let mut centers = project_centers(&nodes, axis, config)?;
        // drop coincident 1-D centres
        let mut seen: Vec<f64> = Vec::with_capacity(centers.len());
        centers.retain(|c| {
            if seen.contains(c) {
                false
            } else {
                seen.push(*c);
                true
            }
        });
        let gram = DMatrix::from_fn(centers.len(), centers.len(), |i, j| kernel1.value((centers[i] - centers[j]).abs()));
        blocks.push(gram);
        basis.extend(centers.into_iter().map(|center| Basis::Axial { axis, center }));
    }
    let a = constraint_matrix(&kernels, &basis, &nodes);
    Ok(TrialSpaceAssembly {
        kind: TrialSpaceKind::Krbf,
        kernels,
        basis,
        nodes,
        constraint_matrix: a,
        norm_gram: NormMatrix::BlockDiagonal(blocks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::Stencil;
    use approx::assert_relative_eq;

    fn toy_stencil(n: usize) -> GhostStencil {
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let t = i as f64 * 0.7;
                Vec3::new(0.1 * t.cos() + 0.01 * i as f64, 0.1 * t.sin(), 0.02 * (i as f64).sqrt())
            })
            .collect();
        let s = Stencil { center_index: 0, neighbor_indices: (0..n).collect(), points: pts };
        s.attach_ghosts(Vec3::new(0.1, 0.2, 0.97).normalize(), 0.05, 1.0).unwrap()
    }

    fn k3(tau: u32) -> MaternKernel {
        MaternKernel::new(tau, 3).unwrap()
    }

    fn k1(tau: u32) -> MaternKernel {
        MaternKernel::new(tau, 1).unwrap()
    }

    #[test]
    fn rbf_matches_direct_gram() {
        let g = toy_stencil(3);
        let asm = assemble_rbf(&g, k3(4)).unwrap();
        let nodes = g.nodes();
        assert_eq!(asm.constraint_matrix.shape(), (5, 5));
        for i in 0..5 {
            for j in 0..5 {
                let want = k3(4).eval((nodes[i] - nodes[j]).norm()).unwrap();
                assert_eq!(asm.constraint_matrix[(i, j)], want);
            }
            assert_eq!(asm.constraint_matrix[(i, i)], k3(4).value_at_origin());
        }
        assert_eq!(asm.constraint_matrix, asm.constraint_matrix.transpose());
        assert_eq!(asm.norm_gram.to_dense(), asm.constraint_matrix);
    }

    #[test]
    fn rejects_duplicate_nodes() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::x(), Vec3::y()];
        let s = Stencil { center_index: 0, neighbor_indices: vec![0, 1, 2, 3], points: pts };
        let g = s.attach_ghosts(Vec3::z(), 0.1, 1.0).unwrap();
        assert!(matches!(assemble_rbf(&g, k3(3)), Err(Error::SingularAssembly(_))));
    }

    #[test]
    fn center_projection_modes() {
        let nodes: Vec<Vec3> = [0.0, 0.3, 1.0].iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
        let orig = project_centers(&nodes, 0, &CenterConfig::new(CenterMode::Original)).unwrap();
        assert_eq!(orig, vec![0.0, 0.3, 1.0]);
        let regrid = project_centers(&nodes, 0, &CenterConfig::new(CenterMode::Regrid)).unwrap();
        assert_eq!(regrid, vec![0.0, 0.5, 1.0]);
        assert!(matches!(
            project_centers(&nodes, 1, &CenterConfig::new(CenterMode::Regrid)),
            Err(Error::DegenerateAxis { axis: 1, .. })
        ));

        let sym: Vec<Vec3> = [-0.2, -0.05, 0.05, 0.2].iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
        let cfg = CenterConfig { mode: CenterMode::Stretch, reference_length: Some(2.0) };
        let s = project_centers(&sym, 0, &cfg).unwrap();
        assert_relative_eq!(s[3] - s[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(0.5 * (s[3] + s[0]), 0.0, epsilon = 1e-15);
        assert_relative_eq!(s[1], -0.25, epsilon = 1e-15);
        let cfg = CenterConfig { mode: CenterMode::StretchRegrid, reference_length: Some(2.0) };
        let s = project_centers(&sym, 0, &cfg).unwrap();
        for w in s.windows(2) {
            assert_relative_eq!(w[1] - w[0], 2.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn krbf_shapes_and_blocks() {
        let g = toy_stencil(40);
        let asm = assemble_krbf(&g, k3(3), k1(3), &CenterConfig::default()).unwrap();
        assert_eq!(asm.constraint_matrix.shape(), (42, 168));
        let NormMatrix::BlockDiagonal(blocks) = &asm.norm_gram else { panic!("expected blocks") };
        assert_eq!(blocks.len(), 4);
        assert!(blocks.iter().all(|b| b.shape() == (42, 42)));
        let dense = asm.norm_gram.to_dense();
        assert_eq!(dense.view((0, 42), (42, 126)).amax(), 0.0);

        let asm = assemble_krbf(&g, k3(3), k1(3), &CenterConfig::new(CenterMode::Original)).unwrap();
        let NormMatrix::BlockDiagonal(blocks) = &asm.norm_gram else { panic!("expected blocks") };
        for b in &blocks[1..] {
            for i in 0..b.nrows() {
                assert_eq!(b[(i, i)], k1(3).value_at_origin());
            }
        }
        assert!(assemble_krbf(&g, k3(3), k1(4), &CenterConfig::default()).is_err());
    }

    #[test]
    fn original_mode_drops_coincident_centers() {
        // a flat patch: every node shares z with others
        let pts: Vec<Vec3> = (0..9).map(|i| Vec3::new((i % 3) as f64 * 0.1, (i / 3) as f64 * 0.1, 0.0)).collect();
        let s = Stencil { center_index: 4, neighbor_indices: (0..9).collect(), points: pts };
        let mut s = s;
        s.points.swap(0, 4);
        let g = s.attach_ghosts(Vec3::z(), 0.05, 1.0).unwrap();
        let asm = assemble_krbf(&g, k3(3), k1(3), &CenterConfig::new(CenterMode::Original)).unwrap();
        // x and y take 3 distinct values each, z takes 3 (0, ±h)
        assert_eq!(asm.basis_count(), 11 + 3 + 3 + 3);
    }

    #[test]
    fn axial_columns_match_shifted_volume_kernel() {
        let g = toy_stencil(10);
        let asm = assemble_krbf(&g, k3(3), k1(3), &CenterConfig::new(CenterMode::Original)).unwrap();
        let shifted = k3(4);
        let nodes = g.nodes();
        for (j, b) in asm.basis.iter().enumerate() {
            if let Basis::Axial { axis, center } = *b {
                for (i, x) in nodes.iter().enumerate() {
                    let mut p = Vec3::zeros();
                    p[axis] = center;
                    let mut q = Vec3::zeros();
                    q[axis] = x[axis];
                    let want = shifted.value((q - p).norm());
                    assert_relative_eq!(asm.constraint_matrix[(i, j)], want, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn hrbf_structure() {
        let g = toy_stencil(4);
        let asm = assemble_hrbf(&g, k3(4)).unwrap();
        let n = 6;
        assert_eq!(asm.constraint_matrix.shape(), (n, 4 * n));
        for i in 0..n {
            for axis in 0..3 {
                assert_eq!(asm.constraint_matrix[(i, n + axis * n + i)], 0.0);
            }
        }
        let k = asm.norm_gram.to_dense();
        assert!((&k - k.transpose()).amax() <= 1e-12 * k.amax());
        assert!(assemble_hrbf(&g, k3(2)).is_err());
    }

    #[test]
    fn hrbf_blocks_match_finite_differences() {
        let g = toy_stencil(4);
        let kern = k3(4);
        let asm = assemble_hrbf(&g, kern).unwrap();
        let nodes = g.nodes();
        let n = nodes.len();
        let phi = |x: &Vec3, p: &Vec3| kern.value((x - p).norm());
        let h = 1e-5;
        let e = |k: usize| {
            let mut v = Vec3::zeros();
            v[k] = h;
            v
        };
        let k = asm.norm_gram.to_dense();
        for i in 0..n {
            for j in 0..n {
                for ka in 0..3 {
                    // ∂/∂p_k Φ(x_i, p_j)
                    let fd = (phi(&nodes[i], &(nodes[j] + e(ka))) - phi(&nodes[i], &(nodes[j] - e(ka)))) / (2.0 * h);
                    assert!((asm.constraint_matrix[(i, n + ka * n + j)] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
                    for la in 0..3 {
                        // ∂²/∂p_{i,k} ∂p_{j,l} Φ(p_i, p_j)
                        let f = |a: f64, b: f64| {
                            let mut pi = nodes[i];
                            pi[ka] += a;
                            let mut pj = nodes[j];
                            pj[la] += b;
                            phi(&pi, &pj)
                        };
                        let fd2 = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
                        let got = k[(n + ka * n + i, n + la * n + j)];
                        assert!((got - fd2).abs() < 1e-5 * (1.0 + fd2.abs()), "{got} vs {fd2}");
                    }
                }
            }
        }
    }
}
