//! Matérn-Sobolev kernels `Φ_{τ,d}(r) = K_ν(r) r^ν` with `ν = τ - d/2`.
//!
//! Only half-integer orders `ν = n + 1/2` (n = 0..=4) are supported. For those the
//! modified Bessel function has a terminating expansion and every radial quantity is
//! `sqrt(π/2) e^{-r}` times a (Laurent) polynomial in `r`.
//!
//! All derivatives follow from the single identity
//! `d/dr [r^μ K_μ(r)] = -r · r^{μ-1} K_{μ-1}(r)`, so with `φ_m(r) := r^{m+1/2} K_{m+1/2}(r)`:
//!
//! * `φ'(r) / r = -φ_{n-1}(r)`
//! * `(φ''(r) - φ'(r)/r) / r² = φ_{n-2}(r)`
//! * `d/dr[φ_{n-2}(r)] / r = -φ_{n-3}(r)`
//!
//! `φ_m` with negative `m` is singular at the origin; callers only multiply it by
//! products of coordinate differences that vanish there faster than it blows up.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

/// Largest supported `n` in `ν = n + 1/2`.
pub const MAX_HALF_ORDER: u32 = 4;

/// A Matérn-Sobolev reproducing kernel of smoothness `tau` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaternKernel {
    tau: u32,
    dim: u32,
    /// `ν = half_order + 1/2`.
    half_order: u32,
}

impl MaternKernel {
    pub fn new(tau: u32, dim: u32) -> Result<Self> {
        if dim != 1 && dim != 3 {
            return Err(Error::Kernel(format!("unsupported dimension d = {dim}; expected 1 or 3")));
        }
        // 2ν = 2τ - d must be a positive odd integer.
        if 2 * tau <= dim {
            return Err(Error::Kernel(format!("τ = {tau} must exceed d/2 = {}", dim as f64 / 2.0)));
        }
        let half_order = (2 * tau - dim - 1) / 2;
        if half_order > MAX_HALF_ORDER {
            return Err(Error::Kernel(format!(
                "ν = {} is outside the supported set {{1/2, ..., 9/2}}",
                half_order as f64 + 0.5
            )));
        }
        Ok(Self { tau, dim, half_order })
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// `ν = τ - d/2`.
    pub fn nu(&self) -> f64 {
        self.half_order as f64 + 0.5
    }

    /// Integer part of `ν`.
    pub fn half_order(&self) -> u32 {
        self.half_order
    }

    /// Kernel value `φ(r)`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.value(r))
    }

    /// `φ'(r) / r`, with the analytic limit at `r = 0`. Needs `ν > 1` there.
    pub fn eval_phi1_over_r(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        if r == 0.0 && self.half_order < 1 {
            return Err(Error::Smoothness(format!(
                "φ'(r)/r is singular at r = 0 for ν = {}",
                self.nu()
            )));
        }
        Ok(self.phi1_over_r(r))
    }

    /// Second radial derivative `φ''(r)`.
    ///
    /// At `r = 0` this is only meaningful when `Φ(‖·‖)` is twice differentiable at the
    /// origin, i.e. `ν > 1`.
    pub fn eval_phi2(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        if r == 0.0 && self.half_order < 1 {
            return Err(Error::Smoothness(format!(
                "Φ is not twice differentiable at the origin for ν = {}",
                self.nu()
            )));
        }
        Ok(self.phi2(r))
    }

    /// Unchecked `φ(r)` for `r ≥ 0`.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        family(self.half_order as i32, r)
    }

    /// Unchecked `φ'(r)/r`.
    #[inline]
    pub fn phi1_over_r(&self, r: f64) -> f64 {
        -family(self.half_order as i32 - 1, r)
    }

    /// Unchecked `φ''(r)`.
    #[inline]
    pub fn phi2(&self, r: f64) -> f64 {
        let g = self.phi1_over_r(r);
        if r == 0.0 {
            g
        } else {
            g + r * r * family(self.half_order as i32 - 2, r)
        }
    }

    /// `(φ'' - φ'/r) / r²`; the coefficient of `u uᵀ` in the Hessian of `Φ(‖u‖)`.
    /// Singular at the origin when `ν < 5/2`.
    #[inline]
    pub fn hessian_coefficient(&self, r: f64) -> f64 {
        family(self.half_order as i32 - 2, r)
    }

    /// Derivative of [`Self::hessian_coefficient`] divided by `r`.
    #[inline]
    pub fn third_coefficient(&self, r: f64) -> f64 {
        -family(self.half_order as i32 - 3, r)
    }

    /// Number of continuous derivatives of `Φ(‖·‖)` at the origin guaranteed by `ν`.
    pub fn smoothness(&self) -> u32 {
        // Φ ∈ C^{2k} near the origin iff ν > k; half-integer ν = n + 1/2 gives 2n.
        2 * self.half_order
    }

    /// `Φ(0) = 2^{ν-1} Γ(ν)`.
    pub fn value_at_origin(&self) -> f64 {
        self.value(0.0)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("kernel radius must be finite and nonnegative, got {r}")));
    }
    Ok(())
}

/// `(j + k)! / (k! (j - k)!) 2^{-k}`: coefficients of the terminating Bessel series.
const fn series_coefficient(j: u32, k: u32) -> f64 {
    let mut c = 1.0_f64;
    // (j+k)!/(j-k)! = (j-k+1)(j-k+2)...(j+k)
    let mut i = j - k + 1;
    while i <= j + k {
        c *= i as f64;
        i += 1;
    }
    let mut i = 1;
    while i <= k {
        c /= 2.0 * i as f64;
        i += 1;
    }
    c
}

const fn series_table() -> [[f64; 5]; 5] {
    let mut t = [[0.0; 5]; 5];
    let mut j = 0;
    while j < 5 {
        let mut k = 0;
        while k <= j {
            t[j][k] = series_coefficient(j as u32, k as u32);
            k += 1;
        }
        j += 1;
    }
    t
}

static SERIES: [[f64; 5]; 5] = series_table();

/// `φ_m(r) = r^{m+1/2} K_{m+1/2}(r)` for any integer `m`.
///
/// For `m ≥ 0` the result is finite on `[0, ∞)`. For `m < 0` the value at `r = 0` is
/// infinite; the function then returns `f64::INFINITY` and callers must not use it.
#[inline]
fn family(m: i32, r: f64) -> f64 {
    // K_{-μ} = K_μ, so the series index is j = m for m ≥ 0 and j = -m-1 otherwise.
    let j = if m >= 0 { m as u32 } else { (-m - 1) as u32 };
    if r == 0.0 {
        if m < 0 {
            return f64::INFINITY;
        }
        // only the k = m term survives
        return SQRT_HALF_PI * SERIES[j as usize][j as usize];
    }
    // Σ_k c_{j,k} r^{m-k}, Horner in 1/r around the leading power r^m.
    let inv = 1.0 / r;
    let mut acc = 0.0;
    let coeffs = &SERIES[j as usize];
    for k in (0..=j as usize).rev() {
        acc = acc * inv + coeffs[k];
    }
    SQRT_HALF_PI * (-r).exp() * acc * r.powi(m)
}

/// `2^{ν-1} Γ(ν)` for half-integer `ν`, via `Γ(n + 1/2) = (2n)! √π / (4^n n!)`.
pub fn origin_limit(nu: f64) -> f64 {
    let n = (nu - 0.5).round() as u32;
    let mut gamma = PI.sqrt();
    for i in 0..n {
        gamma *= i as f64 + 0.5;
    }
    2.0_f64.powf(nu - 1.0) * gamma
}

/// True when `Φ_{τ+1,3}` and `Φ_{τ,1}` agree to 1e-12 relative on a fixed radius grid.
pub fn dimension_shift_check(tau: u32) -> bool {
    let (Ok(k3), Ok(k1)) = (MaternKernel::new(tau + 1, 3), MaternKernel::new(tau, 1)) else {
        return false;
    };
    shift_agrees(&k3, &k1)
}

pub(crate) fn shift_agrees(a: &MaternKernel, b: &MaternKernel) -> bool {
    (0..=200).map(|i| i as f64 * 0.05).all(|r| {
        let (x, y) = (a.value(r), b.value(r));
        (x - y).abs() <= 1e-12 * x.abs().max(y.abs())
    })
}
