//! Equality-constrained minimum-norm solves `min λᵀKλ s.t. Aλ = b`.
//!
//! The native-norm path factors `K = LLᵀ`, substitutes `y = Lᵀλ` and takes the
//! minimum-Euclidean-norm solution of `(A L⁻ᵀ) y = b` from a column-pivoted Householder
//! QR of `L⁻¹Aᵀ`. The ℓ² path is the same with `L = I`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, FullPivLU, SVD};

use crate::error::{Error, Result};

/// Symmetric positive (semi)definite matrix defining the norm.
#[derive(Debug, Clone, PartialEq)]
pub enum NormMatrix {
    Identity(usize),
    Dense(DMatrix<f64>),
    BlockDiagonal(Vec<DMatrix<f64>>),
}

impl NormMatrix {
    pub fn dim(&self) -> usize {
        match self {
            NormMatrix::Identity(m) => *m,
            NormMatrix::Dense(k) => k.nrows(),
            NormMatrix::BlockDiagonal(blocks) => blocks.iter().map(|b| b.nrows()).sum(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            NormMatrix::Identity(m) => *m as f64,
            NormMatrix::Dense(k) => k.trace(),
            NormMatrix::BlockDiagonal(blocks) => blocks.iter().map(|b| b.trace()).sum(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            NormMatrix::Identity(m) => DMatrix::identity(*m, *m),
            NormMatrix::Dense(k) => k.clone(),
            NormMatrix::BlockDiagonal(blocks) => {
                let m = self.dim();
                let mut k = DMatrix::zeros(m, m);
                let mut off = 0;
                for b in blocks {
                    k.view_mut((off, off), b.shape()).copy_from(b);
                    off += b.nrows();
                }
                k
            }
        }
    }

    /// `Kx`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            NormMatrix::Identity(_) => x.clone(),
            NormMatrix::Dense(k) => k * x,
            NormMatrix::BlockDiagonal(blocks) => {
                let mut out = DVector::zeros(x.len());
                let mut off = 0;
                for b in blocks {
                    let n = b.nrows();
                    out.rows_mut(off, n).copy_from(&(b * x.rows(off, n)));
                    off += n;
                }
                out
            }
        }
    }

    /// `xᵀKx`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.apply(x))
    }

    fn blocks(&self) -> Vec<&DMatrix<f64>> {
        match self {
            NormMatrix::Identity(_) => Vec::new(),
            NormMatrix::Dense(k) => vec![k],
            NormMatrix::BlockDiagonal(blocks) => blocks.iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Objective {
    #[default]
    Native,
    L2,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Native => "native",
            Objective::L2 => "l2",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "native" => Ok(Objective::Native),
            "l2" => Ok(Objective::L2),
            other => Err(Error::Domain(format!("unknown norm {other:?}; expected native or l2"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveMethod {
    Native,
    L2,
    Tikhonov,
    Kkt,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::Native => "native",
            SolveMethod::L2 => "l2",
            SolveMethod::Tikhonov => "tikhonov",
            SolveMethod::Kkt => "kkt",
        })
    }
}

/// Tolerances; ε values are relative to `trace(K)/M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Accept `‖Aλ − b‖ ≤ feasibility_tol · (1 + ‖b‖)`.
    pub feasibility_tol: f64,
    /// Pivots below `rank_tol · |R₀₀|` are treated as zero.
    pub rank_tol: f64,
    pub epsilon_start: f64,
    pub epsilon_growth: f64,
    pub epsilon_max: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-8, rank_tol: 1e-12, epsilon_start: 1e-12, epsilon_growth: 10.0, epsilon_max: 1e-4 }
    }
}

pub const DEFAULT_TIKHONOV_MU: f64 = 1e-8;

/// Largest system the dense KKT oracle accepts.
pub const KKT_MAX_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub k: NormMatrix,
    pub objective: Objective,
}

impl MinNormProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, k: NormMatrix, objective: Objective) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Domain(format!("A has {} rows but b has length {}", a.nrows(), b.len())));
        }
        if k.dim() != a.ncols() {
            return Err(Error::Domain(format!("K is {0}×{0} but A has {1} columns", k.dim(), a.ncols())));
        }
        Ok(Self { a, b, k, objective })
    }

    fn residual(&self, lambda: &DVector<f64>) -> f64 {
        (&self.a * lambda - &self.b).norm()
    }

    fn feasibility_bound(&self, opts: &SolverOptions) -> f64 {
        opts.feasibility_tol * (1.0 + self.b.norm())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution {
    pub lambda: DVector<f64>,
    pub residual: f64,
    pub objective_value: f64,
    pub epsilon_used: f64,
    pub method: SolveMethod,
}

/// Dispatches on the problem objective with default options.
pub fn solve(problem: &MinNormProblem) -> Result<MinNormSolution> {
    solve_with(problem, &SolverOptions::default())
}

pub fn solve_with(problem: &MinNormProblem, opts: &SolverOptions) -> Result<MinNormSolution> {
    match problem.objective {
        Objective::Native => solve_native_with(problem, opts),
        Objective::L2 => solve_l2_with(problem, opts),
    }
}

pub fn solve_native(problem: &MinNormProblem) -> Result<MinNormSolution> {
    solve_native_with(problem, &SolverOptions::default())
}

pub fn solve_native_with(problem: &MinNormProblem, opts: &SolverOptions) -> Result<MinNormSolution> {
    let factor = CholeskyFactor::new(&problem.k, opts)?;
    let qr = PivotedQr::new(factor.solve_lower_rows(&problem.a.transpose()));
    let rank = qr.rank(opts.rank_tol);
    let lambda = refine(problem, opts, |r| factor.solve_upper(qr.min_norm_solve(r, rank)));
    finish(problem, lambda, factor.epsilon, SolveMethod::Native, opts)
}

pub fn solve_l2(problem: &MinNormProblem) -> Result<MinNormSolution> {
    solve_l2_with(problem, &SolverOptions::default())
}

pub fn solve_l2_with(problem: &MinNormProblem, opts: &SolverOptions) -> Result<MinNormSolution> {
    let qr = PivotedQr::new(problem.a.transpose());
    let rank = qr.rank(opts.rank_tol);
    let lambda = refine(problem, opts, |r| qr.min_norm_solve(r, rank));
    let residual = problem.residual(&lambda);
    let bound = problem.feasibility_bound(opts);
    if !(residual <= bound) {
        return Err(Error::Infeasible { residual, tolerance: bound });
    }
    let objective_value = lambda.norm_squared();
    Ok(MinNormSolution { lambda, residual, objective_value, epsilon_used: 0.0, method: SolveMethod::L2 })
}

/// `argmin ‖Aλ − b‖² + μ λᵀKλ`.
///
/// With `y = Lᵀλ` and `B = AL⁻ᵀ` this is ridge regression in `y`, whose solution
/// `y = Bᵀ(BBᵀ + μI)⁻¹b` only needs the small `m × m` system. It satisfies the normal
/// equations `(AᵀA + μK)λ = Aᵀb`.
pub fn solve_tikhonov(problem: &MinNormProblem, mu: f64) -> Result<MinNormSolution> {
    solve_tikhonov_with(problem, mu, &SolverOptions::default())
}

pub fn solve_tikhonov_with(problem: &MinNormProblem, mu: f64, opts: &SolverOptions) -> Result<MinNormSolution> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("Tikhonov parameter must be positive, got {mu}")));
    }
    let factor = match problem.objective {
        Objective::Native => CholeskyFactor::new(&problem.k, opts)?,
        Objective::L2 => CholeskyFactor::identity(problem.a.ncols()),
    };
    let bt = factor.solve_lower_rows(&problem.a.transpose());
    let mut gram = bt.tr_mul(&bt);
    for i in 0..gram.nrows() {
        gram[(i, i)] += mu;
    }
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::Conditioning(format!("regularized normal matrix is not positive definite at μ = {mu:e}"))
    })?;
    let y = &bt * chol.solve(&problem.b);
    let lambda = factor.solve_upper(y);
    let residual = problem.residual(&lambda);
    let objective_value = match problem.objective {
        Objective::Native => problem.k.quadratic_form(&lambda),
        Objective::L2 => lambda.norm_squared(),
    };
    Ok(MinNormSolution { lambda, residual, objective_value, epsilon_used: factor.epsilon, method: SolveMethod::Tikhonov })
}

/// Dense saddle-point solve of `[K Aᵀ; A 0][λ; ν] = [0; b]`, for testing.
pub fn kkt_oracle(problem: &MinNormProblem) -> Result<MinNormSolution> {
    let m = problem.a.ncols();
    let n = problem.a.nrows();
    if m > KKT_MAX_DIM {
        return Err(Error::Oracle(format!("{m} unknowns exceed the dense limit {KKT_MAX_DIM}")));
    }
    let mut k = match problem.objective {
        Objective::Native => problem.k.to_dense(),
        Objective::L2 => DMatrix::identity(m, m),
    };
    let mut epsilon = 0.0;
    if problem.objective == Objective::Native && Cholesky::new(k.clone()).is_none() {
        let scale = k.trace() / m as f64;
        epsilon = 1e-12 * scale;
        while Cholesky::new(&k + DMatrix::identity(m, m) * epsilon).is_none() {
            epsilon *= 10.0;
            if epsilon > 1e-4 * scale {
                return Err(Error::Oracle("norm matrix is not positive definite".into()));
            }
        }
        for i in 0..m {
            k[(i, i)] += epsilon;
        }
    }
    let mut kkt = DMatrix::zeros(m + n, m + n);
    kkt.view_mut((0, 0), (m, m)).copy_from(&k);
    kkt.view_mut((m, 0), (n, m)).copy_from(&problem.a);
    kkt.view_mut((0, m), (m, n)).copy_from(&problem.a.transpose());
    let mut rhs = DVector::zeros(m + n);
    rhs.rows_mut(m, n).copy_from(&problem.b);

    let lu = FullPivLU::new(kkt.clone());
    let sol = match lu.solve(&rhs) {
        Some(s) if ((&kkt * &s) - &rhs).norm() <= 1e-9 * (1.0 + rhs.norm()) * (1.0 + kkt.amax()) => s,
        // redundant constraints leave ν undetermined; the pseudo-inverse still fixes λ
        _ => SVD::new(kkt.clone(), true, true)
            .solve(&rhs, 1e-13 * kkt.amax())
            .map_err(|e| Error::Oracle(e.to_string()))?,
    };
    let kkt_residual = (&kkt * &sol - &rhs).norm();
    if !(kkt_residual <= 1e-6 * (1.0 + rhs.norm())) {
        return Err(Error::Oracle(format!("saddle-point system inconsistent (residual {kkt_residual:.3e})")));
    }
    let lambda: DVector<f64> = sol.rows(0, m).into_owned();
    let residual = problem.residual(&lambda);
    let objective_value = lambda.dot(&(&k * &lambda));
    Ok(MinNormSolution { lambda, residual, objective_value, epsilon_used: epsilon, method: SolveMethod::Kkt })
}

fn finish(
    problem: &MinNormProblem,
    lambda: DVector<f64>,
    epsilon: f64,
    method: SolveMethod,
    opts: &SolverOptions,
) -> Result<MinNormSolution> {
    let residual = problem.residual(&lambda);
    let bound = problem.feasibility_bound(opts);
    if !(residual <= bound) {
        return Err(Error::Infeasible { residual, tolerance: bound });
    }
    let objective_value = problem.k.quadratic_form(&lambda) + epsilon * lambda.norm_squared();
    Ok(MinNormSolution { lambda, residual, objective_value, epsilon_used: epsilon, method })
}

/// Block Cholesky factors of `K + εI` with a shared `ε`.
struct CholeskyFactor {
    /// `None` stands for the identity.
    blocks: Option<Vec<Cholesky<f64, Dyn>>>,
    epsilon: f64,
}

impl CholeskyFactor {
    fn identity(_m: usize) -> Self {
        Self { blocks: None, epsilon: 0.0 }
    }

    fn new(k: &NormMatrix, opts: &SolverOptions) -> Result<Self> {
        if matches!(k, NormMatrix::Identity(_)) {
            return Ok(Self::identity(k.dim()));
        }
        let blocks = k.blocks();
        if let Some(f) = Self::try_factor(&blocks, 0.0) {
            return Ok(Self { blocks: Some(f), epsilon: 0.0 });
        }
        let scale = k.trace() / k.dim().max(1) as f64;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Conditioning(format!("norm matrix has trace/M = {scale}")));
        }
        let mut rel = opts.epsilon_start;
        while rel <= opts.epsilon_max * (1.0 + 1e-12) {
            let epsilon = rel * scale;
            if let Some(f) = Self::try_factor(&blocks, epsilon) {
                return Ok(Self { blocks: Some(f), epsilon });
            }
            rel *= opts.epsilon_growth;
        }
        Err(Error::Conditioning(format!(
            "Cholesky failed up to ε = {:.1e}·trace(K)/M",
            opts.epsilon_max
        )))
    }

    fn try_factor(blocks: &[&DMatrix<f64>], epsilon: f64) -> Option<Vec<Cholesky<f64, Dyn>>> {
        blocks
            .iter()
            .map(|b| {
                let mut m = (*b).clone();
                for i in 0..m.nrows() {
                    m[(i, i)] += epsilon;
                }
                Cholesky::new(m)
            })
            .collect()
    }

    /// `L⁻¹X`, applied blockwise to row ranges of `X`.
    fn solve_lower_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let Some(blocks) = &self.blocks else { return x.clone() };
        let mut out = x.clone();
        let mut off = 0;
        for c in blocks {
            let n = c.l_dirty().nrows();
            let mut part = out.rows(off, n).into_owned();
            c.l_dirty().solve_lower_triangular_mut(&mut part);
            out.rows_mut(off, n).copy_from(&part);
            off += n;
        }
        out
    }

    /// `L⁻ᵀy`.
    fn solve_upper(&self, y: DVector<f64>) -> DVector<f64> {
        let Some(blocks) = &self.blocks else { return y };
        let mut out = y;
        let mut off = 0;
        for c in blocks {
            let n = c.l_dirty().nrows();
            let mut part = out.rows(off, n).into_owned();
            c.l_dirty().tr_solve_lower_triangular_mut(&mut part);
            out.rows_mut(off, n).copy_from(&part);
            off += n;
        }
        out
    }
}

/// Minimum-norm `y` with `Cᵀy = b`, from a norm-pivoted Householder QR of `C` (M × m).
///
/// With `CΠ = QR` the constraints read `Rᵀ(Qᵀy) = Πᵀb`; keeping the leading `r`
/// numerically nonzero pivots gives `y = Q [R₁₁⁻ᵀ(Πᵀb)₁; 0]`.
pub fn min_norm_transposed(c: DMatrix<f64>, b: &DVector<f64>, rank_tol: f64) -> DVector<f64> {
    let qr = PivotedQr::new(c);
    let rank = qr.rank(rank_tol);
    qr.min_norm_solve(b, rank)
}

/// Refinement sweeps applied after the first solve.
const REFINEMENT_STEPS: usize = 3;

/// `λ = solve(b)` followed by iterative refinement `λ += solve(b − Aλ)` while the residual
/// is above the feasibility bound and still shrinking.
fn refine(problem: &MinNormProblem, opts: &SolverOptions, solve: impl Fn(&DVector<f64>) -> DVector<f64>) -> DVector<f64> {
    let bound = problem.feasibility_bound(opts);
    let mut lambda = solve(&problem.b);
    let mut r = &problem.b - &problem.a * &lambda;
    for _ in 0..REFINEMENT_STEPS {
        let norm = r.norm();
        if norm <= bound {
            break;
        }
        let candidate = &lambda + solve(&r);
        let next = &problem.b - &problem.a * &candidate;
        if !(next.norm() < norm) {
            break;
        }
        lambda = candidate;
        r = next;
    }
    lambda
}

/// Householder QR with column pivoting on the largest remaining column norm, stored
/// LAPACK-style: `R` in the upper triangle, reflector tails below the diagonal.
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Column-major `rows × cols`.
    data: Vec<f64>,
    tau: Vec<f64>,
    /// Column `j` of `CΠ` is column `perm[j]` of `C`.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(c: DMatrix<f64>) -> Self {
        let (rows, cols) = c.shape();
        let mut data = c.as_slice().to_vec();
        let steps = rows.min(cols);
        let mut tau = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut norms: Vec<f64> = (0..cols).map(|j| sq_norm(&data[j * rows..(j + 1) * rows])).collect();

        for k in 0..steps {
            let (p, _) = norms[k..]
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
            let p = p + k;
            if p != k {
                for i in 0..rows {
                    data.swap(k * rows + i, p * rows + i);
                }
                perm.swap(k, p);
                norms.swap(k, p);
            }

            let col = &mut data[k * rows..(k + 1) * rows];
            let alpha = col[k];
            let tail = sq_norm(&col[k + 1..]);
            let norm = (alpha * alpha + tail).sqrt();
            if norm == 0.0 {
                tau[k] = 0.0;
            } else {
                let beta = if alpha >= 0.0 { -norm } else { norm };
                let v0 = alpha - beta;
                for x in &mut col[k + 1..] {
                    *x /= v0;
                }
                tau[k] = (beta - alpha) / beta;
                col[k] = beta;
                let (head, rest) = data.split_at_mut((k + 1) * rows);
                let v = &head[k * rows + k + 1..(k + 1) * rows];
                for j in 0..cols - k - 1 {
                    let target = &mut rest[j * rows + k..(j + 1) * rows];
                    let mut s = target[0];
                    for (t, vi) in target[1..].iter().zip(v) {
                        s += t * vi;
                    }
                    s *= tau[k];
                    target[0] -= s;
                    for (t, vi) in target[1..].iter_mut().zip(v) {
                        *t -= s * vi;
                    }
                }
            }
            // exact trailing norms keep the pivot order robust against cancellation
            for j in k + 1..cols {
                norms[j] = sq_norm(&data[j * rows + k + 1..(j + 1) * rows]);
            }
        }
        Self { rows, cols, data, tau, perm }
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Diagonal of `R`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.r(i, i)).collect()
    }

    /// Number of pivots with `|R_ii| > tol · |R₀₀|`.
    /// Minimum-norm `y` with `Cᵀy = b` using the leading `rank` pivots.
    pub fn min_norm_solve(&self, b: &DVector<f64>, rank: usize) -> DVector<f64> {
        let mut z = DVector::zeros(self.rows);
        for i in 0..rank {
            let mut s = b[self.perm[i]];
            for k in 0..i {
                s -= self.r(k, i) * z[k];
            }
            z[i] = s / self.r(i, i);
        }
        self.apply_q(&mut z, rank);
        z
    }

    pub fn rank(&self, tol: f64) -> usize {
        let d = self.diagonal();
        let Some(first) = d.first() else { return 0 };
        let cut = tol * first.abs();
        if first.abs() == 0.0 {
            return 0;
        }
        d.iter().take_while(|x| x.abs() > cut).count()
    }

    /// `z ← Q z` using the first `count` reflectors.
    fn apply_q(&self, z: &mut DVector<f64>, count: usize) {
        let rows = self.rows;
        for k in (0..count.min(self.tau.len())).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let v = &self.data[k * rows + k + 1..(k + 1) * rows];
            let zs = z.as_mut_slice();
            let mut s = zs[k];
            for (zi, vi) in zs[k + 1..].iter().zip(v) {
                s += zi * vi;
            }
            s *= self.tau[k];
            zs[k] -= s;
            for (zi, vi) in zs[k + 1..].iter_mut().zip(v) {
                *zi -= s * vi;
            }
        }
    }
}

#[inline]
fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
