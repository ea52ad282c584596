//! Spherical Hankel functions, normalized associated Legendre functions and
//! the vector spherical wave basis.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::array_model::PhysicalConfig;
use crate::linalg::J;
use crate::{Complex64, EhbError, Result};

/// Elevation clamp used wherever 1/sinθ appears.
pub const THETA_MIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub s: u8,
    pub m: i32,
    pub n: u32,
}

impl ModeIndex {
    pub fn new(s: u8, m: i32, n: u32) -> Result<Self> {
        if !(s == 1 || s == 2) || n < 1 || m.unsigned_abs() > n {
            return Err(EhbError::Domain(format!("invalid mode index s={s} m={m} n={n}")));
        }
        Ok(Self { s, m, n })
    }

    /// Column position in the (s fastest, then m, then n) enumeration.
    pub fn linear_index(&self) -> usize {
        let n = self.n as i64;
        let before = 2 * ((n - 1) * (n - 1) + 2 * (n - 1)); // 2 (n-1)(n+1)
        (before + 2 * (self.m as i64 + n) + (self.s as i64 - 1)) as usize
    }
}

/// 2N(N+2).
pub fn mode_count(truncation_order: usize) -> usize {
    2 * truncation_order * (truncation_order + 2)
}

pub fn mode_indices(truncation_order: usize) -> Vec<ModeIndex> {
    let mut out = Vec::with_capacity(mode_count(truncation_order));
    for n in 1..=truncation_order as u32 {
        for m in -(n as i32)..=(n as i32) {
            for s in 1..=2u8 {
                out.push(ModeIndex { s, m, n });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct VectorFieldSample {
    pub r_component: Complex64,
    pub theta_component: Complex64,
    pub phi_component: Complex64,
}

impl VectorFieldSample {
    pub fn new(r: Complex64, theta: Complex64, phi: Complex64) -> Self {
        Self {
            r_component: r,
            theta_component: theta,
            phi_component: phi,
        }
    }

    pub fn components(&self) -> [Complex64; 3] {
        [self.r_component, self.theta_component, self.phi_component]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Spherical Bessel functions j_n(x), y_n(x) for n = 0..=n_max.
pub fn spherical_bessel_jy(n_max: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(EhbError::Domain(format!("spherical Bessel argument must be > 0, got {x}")));
    }
    let (s, c) = x.sin_cos();
    let mut y = vec![0.0; n_max + 1];
    y[0] = -c / x;
    if n_max >= 1 {
        y[1] = -c / (x * x) - s / x;
    }
    for n in 1..n_max {
        y[n + 1] = (2 * n + 1) as f64 / x * y[n] - y[n - 1];
    }
    let j = if (n_max as f64) < x {
        let mut j = vec![0.0; n_max + 1];
        j[0] = s / x;
        if n_max >= 1 {
            j[1] = s / (x * x) - c / x;
        }
        for n in 1..n_max {
            j[n + 1] = (2 * n + 1) as f64 / x * j[n] - j[n - 1];
        }
        j
    } else {
        miller_j(n_max, x)
    };
    Ok((j, y))
}

/// Downward recurrence normalized with Σ (2n+1) j_n² = 1.
fn miller_j(n_max: usize, x: f64) -> Vec<f64> {
    let start = n_max.max(x.ceil() as usize) + 20 + (10.0 * (n_max as f64 + x).sqrt()) as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-30;
    for n in (1..=start).rev() {
        vals[n - 1] = (2 * n + 1) as f64 / x * vals[n] - vals[n + 1];
        if vals[n - 1].abs() > 1e200 {
            for v in vals[n - 1..].iter_mut() {
                *v *= 1e-200;
            }
        }
    }
    let sum: f64 = vals
        .iter()
        .enumerate()
        .map(|(n, v)| (2 * n + 1) as f64 * v * v)
        .sum();
    let mut scale = 1.0 / sum.sqrt();
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let reference = if j0.abs() > j1.abs() { (j0, vals[0]) } else { (j1, vals[1]) };
    if reference.0 * reference.1 < 0.0 {
        scale = -scale;
    }
    vals.truncate(n_max + 1);
    vals.iter().map(|v| v * scale).collect()
}

/// h_n^(1)(x) = j_n(x) + i y_n(x) for n = 0..=n_max.
pub fn spherical_hankel1_all(n_max: usize, x: f64) -> Result<Vec<Complex64>> {
    let (j, y) = spherical_bessel_jy(n_max, x)?;
    Ok(j.iter().zip(&y).map(|(a, b)| Complex64::new(*a, *b)).collect())
}

pub fn spherical_hankel1(n: usize, x: f64) -> Result<Complex64> {
    Ok(spherical_hankel1_all(n, x)?[n])
}

/// Fully normalized P̄_n^m with ∫_{-1}^{1} (P̄_n^m)² du = 1 (no Condon-Shortley phase).
pub fn normalized_assoc_legendre(n: usize, m: usize, u: f64) -> Result<f64> {
    if m > n {
        return Err(EhbError::Domain(format!("Legendre order m={m} exceeds degree n={n}")));
    }
    if !(u.abs() <= 1.0) {
        return Err(EhbError::Domain(format!("Legendre argument |u| must be ≤ 1, got {u}")));
    }
    let s = (1.0 - u * u).max(0.0).sqrt();
    Ok(legendre_column(n, m, u, s)[n - m])
}

/// P̄_k^m(u) for k = m..=n_max, given s = sqrt(1−u²).
fn legendre_column(n_max: usize, m: usize, u: f64, s: f64) -> Vec<f64> {
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    let mut out = Vec::with_capacity(n_max + 1 - m);
    out.push(pmm);
    if n_max > m {
        out.push(((2 * m + 3) as f64).sqrt() * u * pmm);
    }
    for n in (m + 2)..=n_max {
        let nf = n as f64;
        let mf = m as f64;
        let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
        let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
        let v = a * (u * out[n - m - 1] - b * out[n - m - 2]);
        out.push(v);
    }
    out
}

/// Table of P̄_n^m(cosθ) and dP̄_n^m/dθ for 0 ≤ m ≤ n ≤ n_max.
#[derive(Clone, Debug)]
pub struct LegendreTable {
    n_max: usize,
    p: Vec<f64>,
    dp: Vec<f64>,
    pub sin_theta: f64,
}

impl LegendreTable {
    pub fn new(n_max: usize, theta: f64) -> Self {
        let theta = clamp_theta(theta);
        let (s, u) = theta.sin_cos();
        let width = n_max + 2;
        let mut p = vec![0.0; width * width];
        for m in 0..=(n_max + 1) {
            let col = legendre_column(n_max + 1, m, u, s);
            for (k, v) in col.into_iter().enumerate() {
                p[(m + k) * width + m] = v;
            }
        }
        let get = |n: usize, m: usize| -> f64 {
            if m > n {
                0.0
            } else {
                p[n * width + m]
            }
        };
        let mut dp = vec![0.0; width * width];
        for n in 0..=n_max {
            for m in 0..=n {
                let nf = n as f64;
                let mf = m as f64;
                dp[n * width + m] = if m == 0 {
                    -(nf * (nf + 1.0)).sqrt() * get(n, 1)
                } else {
                    0.5 * (((nf + mf) * (nf - mf + 1.0)).sqrt() * get(n, m - 1)
                        - ((nf - mf) * (nf + mf + 1.0)).sqrt() * get(n, m + 1))
                };
            }
        }
        Self {
            n_max,
            p,
            dp,
            sin_theta: s,
        }
    }

    pub fn p(&self, n: usize, m: usize) -> f64 {
        debug_assert!(n <= self.n_max + 1);
        if m > n {
            0.0
        } else {
            self.p[n * (self.n_max + 2) + m]
        }
    }

    pub fn dp_dtheta(&self, n: usize, m: usize) -> f64 {
        if m > n {
            0.0
        } else {
            self.dp[n * (self.n_max + 2) + m]
        }
    }
}

pub fn clamp_theta(theta: f64) -> f64 {
    theta.clamp(THETA_MIN, PI - THETA_MIN)
}

fn prefactor(m: i32, n: u32) -> f64 {
    let sign = if m > 0 && m % 2 != 0 { -1.0 } else { 1.0 };
    sign / (2.0 * PI).sqrt() / ((n as f64) * (n as f64 + 1.0)).sqrt()
}

/// Angular pieces shared by both mode types: c·P̄·e^{−jmφ}, c·dP̄/dθ·e^{−jmφ}
/// and (1/sinθ)∂_φ of the generating function.
fn angular_terms(table: &LegendreTable, m: i32, n: u32, phi: f64) -> (Complex64, Complex64, Complex64) {
    let c = prefactor(m, n);
    let am = m.unsigned_abs() as usize;
    let ph = (-J * (m as f64 * phi)).exp();
    let y = ph * (c * table.p(n as usize, am));
    let dy = ph * (c * table.dp_dtheta(n as usize, am));
    let dphi = -J * (m as f64) * y / table.sin_theta;
    (y, dy, dphi)
}

/// F_{s,m,n}(r, θ, φ) with outgoing Hankel radial functions.
pub fn spherical_wave_basis(
    idx: ModeIndex,
    cfg: &PhysicalConfig,
    r: f64,
    theta: f64,
    phi: f64,
) -> Result<VectorFieldSample> {
    if !(r > 0.0) {
        return Err(EhbError::Domain(format!("radius must be positive, got {r}")));
    }
    let n = idx.n as usize;
    let table = LegendreTable::new(n, theta);
    let x = cfg.wavenumber_rad_per_m * r;
    let h = spherical_hankel1_all(n, x)?;
    Ok(mode_sample(idx, &table, &h, x, phi))
}

fn mode_sample(idx: ModeIndex, table: &LegendreTable, h: &[Complex64], x: f64, phi: f64) -> VectorFieldSample {
    let n = idx.n as usize;
    let (y, dy, dphi) = angular_terms(table, idx.m, idx.n, phi);
    let z = h[n];
    if idx.s == 1 {
        VectorFieldSample::new(Complex64::new(0.0, 0.0), z * dphi, -z * dy)
    } else {
        let zeta = h[n - 1] - z * (n as f64 / x);
        let nn1 = (n * (n + 1)) as f64;
        VectorFieldSample::new(z * (nn1 / x) * y, zeta * dy, zeta * dphi)
    }
}

/// All modes up to `truncation_order` at one point, in enumeration order.
pub fn spherical_wave_basis_all(
    truncation_order: usize,
    cfg: &PhysicalConfig,
    r: f64,
    theta: f64,
    phi: f64,
) -> Result<Vec<VectorFieldSample>> {
    if !(r > 0.0) {
        return Err(EhbError::Domain(format!("radius must be positive, got {r}")));
    }
    let table = LegendreTable::new(truncation_order, theta);
    let x = cfg.wavenumber_rad_per_m * r;
    let h = spherical_hankel1_all(truncation_order, x)?;
    Ok(mode_indices(truncation_order)
        .into_iter()
        .map(|idx| mode_sample(idx, &table, &h, x, phi))
        .collect())
}

/// Far-field pattern of F_{s,m,n} with the factor e^{jκr}/(κr) divided out.
pub fn far_field_basis(idx: ModeIndex, theta: f64, phi: f64) -> VectorFieldSample {
    let table = LegendreTable::new(idx.n as usize, theta);
    far_field_sample(idx, &table, phi)
}

fn far_field_sample(idx: ModeIndex, table: &LegendreTable, phi: f64) -> VectorFieldSample {
    let (_, dy, dphi) = angular_terms(table, idx.m, idx.n, phi);
    let zero = Complex64::new(0.0, 0.0);
    if idx.s == 1 {
        let z = (-J).powu(idx.n + 1);
        VectorFieldSample::new(zero, z * dphi, -z * dy)
    } else {
        let zeta = (-J).powu(idx.n);
        VectorFieldSample::new(zero, zeta * dy, zeta * dphi)
    }
}

pub fn far_field_basis_all(truncation_order: usize, theta: f64, phi: f64) -> Vec<VectorFieldSample> {
    let table = LegendreTable::new(truncation_order, theta);
    mode_indices(truncation_order)
        .into_iter()
        .map(|idx| far_field_sample(idx, &table, phi))
        .collect()
}
