//! Spherical wave expansion of sampled element fields and mutual-coupling
//! estimation from coupled/uncoupled coefficient pairs.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::array_model::{steering_vector, ArrayGeometry, Direction, PhysicalConfig};
use crate::linalg::{pinv, J};
use crate::radiation::ElementPattern;
use crate::special_functions::{mode_count, spherical_wave_basis_all};
use crate::{CMat, CVec, Complex64, EhbError, Result};

/// Relative singular-value cutoff for every pseudo-inverse in this module.
pub const PINV_CUTOFF: f64 = 1e-12;
/// Largest condition number accepted for the mode basis.
pub const MAX_BASIS_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweConfig {
    pub truncation_order: usize,
    pub mode_count: usize,
    pub sample_radius_m: f64,
    pub grid_theta: usize,
    pub grid_phi: usize,
}

impl SweConfig {
    pub fn new(truncation_order: usize, sample_radius_m: f64, grid_theta: usize, grid_phi: usize) -> Result<Self> {
        let cfg = Self {
            truncation_order,
            mode_count: mode_count(truncation_order),
            sample_radius_m,
            grid_theta,
            grid_phi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Order from the electrical size of `geom`, sampled at 10λ on a grid that
    /// integrates products of order-N modes exactly.
    pub fn for_geometry(geom: &ArrayGeometry, cfg: &PhysicalConfig, margin: usize) -> Result<Self> {
        let n = truncation_order(geom, cfg, margin);
        Self::with_order(n, cfg)
    }

    pub fn with_order(truncation_order: usize, cfg: &PhysicalConfig) -> Result<Self> {
        Self::new(
            truncation_order,
            10.0 * cfg.wavelength_m,
            truncation_order + 2,
            2 * truncation_order + 2,
        )
    }

    pub fn point_count(&self) -> usize {
        self.grid_theta * self.grid_phi
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation_order < 1 {
            return Err(EhbError::InvalidConfig("truncation order must be ≥ 1".into()));
        }
        if self.mode_count != mode_count(self.truncation_order) {
            return Err(EhbError::InvalidConfig("mode_count must equal 2N(N+2)".into()));
        }
        if self.grid_theta < 2 || self.grid_phi < 2 {
            return Err(EhbError::InvalidConfig("grid sizes must be ≥ 2".into()));
        }
        if 3 * self.point_count() < self.mode_count {
            return Err(EhbError::InvalidConfig(format!(
                "grid of {} points cannot determine {} modes",
                self.point_count(),
                self.mode_count
            )));
        }
        if !(self.sample_radius_m > 0.0) {
            return Err(EhbError::InvalidConfig("sample radius must be positive".into()));
        }
        Ok(())
    }
}

/// ceil(κ a) + margin with a = max element radius + λ/2.
pub fn truncation_order(geom: &ArrayGeometry, cfg: &PhysicalConfig, margin: usize) -> usize {
    let a = geom.max_radius() + 0.5 * cfg.wavelength_m;
    (cfg.wavenumber_rad_per_m * a - 1e-9).ceil().max(1.0) as usize + margin
}

/// Gauss–Legendre nodes and weights on [−1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    /// (r, θ, φ) triples.
    pub points: Vec<(f64, f64, f64)>,
    pub quadrature_weights: Vec<f64>,
}

impl SamplingGrid {
    /// Gauss–Legendre in cosθ times uniform φ.
    pub fn sphere(grid_theta: usize, grid_phi: usize, radius: f64) -> Self {
        let (u, w) = gauss_legendre(grid_theta);
        let dphi = 2.0 * PI / grid_phi as f64;
        let mut points = Vec::with_capacity(grid_theta * grid_phi);
        let mut weights = Vec::with_capacity(grid_theta * grid_phi);
        for (ui, wi) in u.iter().zip(&w) {
            let theta = ui.acos();
            for p in 0..grid_phi {
                points.push((radius, theta, p as f64 * dphi));
                weights.push(wi * dphi);
            }
        }
        Self {
            points,
            quadrature_weights: weights,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Σ w_p f(θ_p, φ_p).
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.quadrature_weights)
            .map(|((_, t, p), w)| w * f(*t, *p))
            .sum()
    }
}

pub fn make_grid(swe: &SweConfig) -> SamplingGrid {
    SamplingGrid::sphere(swe.grid_theta, swe.grid_phi, swe.sample_radius_m)
}

/// 3P × N_T samples, components (r̂, θ̂, φ̂) per point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSampleMatrix {
    pub entries: CMat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeBasisMatrix {
    pub entries: CMat,
    pub truncation_order: usize,
    /// One quadrature weight per row.
    pub row_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub entries: CMat,
    pub condition_number: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub entries: CMat,
}

impl CouplingMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMat::identity(n, n),
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// c_mn = δ_mn + ρ e^{−jκ d_mn} sinc(κ d_mn) off the diagonal.
    pub fn synthetic(geom: &ArrayGeometry, cfg: &PhysicalConfig, rho: f64) -> Self {
        let n = geom.total_count;
        let k = cfg.wavenumber_rad_per_m;
        let entries = CMat::from_fn(n, n, |a, b| {
            if a == b {
                Complex64::new(1.0, 0.0)
            } else {
                let kd = k * geom.distance(a, b);
                (-J * kd).exp() * (rho * kd.sin() / kd)
            }
        });
        Self { entries }
    }
}

pub fn mode_basis_matrix(swe: &SweConfig, cfg: &PhysicalConfig, grid: &SamplingGrid) -> Result<ModeBasisMatrix> {
    let modes = mode_count(swe.truncation_order);
    let mut entries = CMat::zeros(3 * grid.len(), modes);
    let mut row_weights = Vec::with_capacity(3 * grid.len());
    for (p, (&(r, theta, phi), &w)) in grid.points.iter().zip(&grid.quadrature_weights).enumerate() {
        let samples = spherical_wave_basis_all(swe.truncation_order, cfg, r, theta, phi)?;
        for (j, s) in samples.iter().enumerate() {
            for (c, v) in s.components().into_iter().enumerate() {
                entries[(3 * p + c, j)] = v;
            }
        }
        row_weights.extend([w; 3]);
    }
    Ok(ModeBasisMatrix {
        entries,
        truncation_order: swe.truncation_order,
        row_weights,
    })
}

/// Element fields at the grid points including the spherical spreading
/// factor e^{jκr}/(κr) and each element's position phase.
pub fn sample_fields(
    geom: &ArrayGeometry,
    pattern: &ElementPattern,
    cfg: &PhysicalConfig,
    grid: &SamplingGrid,
) -> Result<FieldSampleMatrix> {
    let n = geom.total_count;
    let mut entries = CMat::zeros(3 * grid.len(), n);
    for (p, &(r, theta, phi)) in grid.points.iter().enumerate() {
        let kr = cfg.wavenumber_rad_per_m * r;
        let spread = (J * kr).exp() / kr;
        let g = pattern.value(theta, phi)? * spread;
        let e = steering_vector(geom, cfg, theta, phi);
        for col in 0..n {
            entries[(3 * p + 1, col)] = g * e[col];
        }
    }
    Ok(FieldSampleMatrix { entries })
}

/// Q = (1/(κ√η)) · pinv(W^{1/2} F) · W^{1/2} E.
pub fn mode_coefficients(e: &FieldSampleMatrix, f: &ModeBasisMatrix, cfg: &PhysicalConfig) -> Result<ModeCoefficients> {
    if e.entries.nrows() != f.entries.nrows() {
        return Err(EhbError::Dimension(format!(
            "field rows {} vs basis rows {}",
            e.entries.nrows(),
            f.entries.nrows()
        )));
    }
    let pi = weighted_pinv(f)?;
    Ok(apply_weighted_pinv(&pi, f, e, cfg))
}

/// Weighted pseudo-inverse of a basis, reusable across many field matrices.
#[derive(Clone, Debug)]
pub struct BasisInverse {
    pub matrix: CMat,
    pub condition_number: f64,
}

pub fn weighted_pinv(f: &ModeBasisMatrix) -> Result<BasisInverse> {
    let mut fw = f.entries.clone();
    for (i, w) in f.row_weights.iter().enumerate() {
        let s = w.sqrt();
        fw.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    let p = pinv(&fw, PINV_CUTOFF);
    if !(p.condition_number <= MAX_BASIS_CONDITION) {
        return Err(EhbError::IllPosedExpansion(p.condition_number));
    }
    Ok(BasisInverse {
        matrix: p.matrix,
        condition_number: p.condition_number,
    })
}

pub fn apply_weighted_pinv(
    pi: &BasisInverse,
    f: &ModeBasisMatrix,
    e: &FieldSampleMatrix,
    cfg: &PhysicalConfig,
) -> ModeCoefficients {
    let mut ew = e.entries.clone();
    for (i, w) in f.row_weights.iter().enumerate() {
        let s = w.sqrt();
        ew.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    let scale = 1.0 / (cfg.wavenumber_rad_per_m * cfg.medium_impedance_ohm.sqrt());
    ModeCoefficients {
        entries: (&pi.matrix * ew) * Complex64::new(scale, 0.0),
        condition_number: pi.condition_number,
    }
}

/// Field matrix κ√η · F · Q (inverse of `mode_coefficients`).
pub fn synthesize_from_modes(f: &ModeBasisMatrix, q: &CMat, cfg: &PhysicalConfig) -> FieldSampleMatrix {
    let scale = cfg.wavenumber_rad_per_m * cfg.medium_impedance_ohm.sqrt();
    FieldSampleMatrix {
        entries: (&f.entries * q) * Complex64::new(scale, 0.0),
    }
}

/// C = Q_Cᵀ · pinv(Q_Sᵀ).
pub fn coupling_matrix(q_coupled: &ModeCoefficients, q_uncoupled: &ModeCoefficients) -> Result<CouplingMatrix> {
    if q_coupled.entries.shape() != q_uncoupled.entries.shape() {
        return Err(EhbError::Dimension(format!(
            "coefficient shapes {:?} vs {:?}",
            q_coupled.entries.shape(),
            q_uncoupled.entries.shape()
        )));
    }
    let n = q_uncoupled.entries.ncols();
    let p = pinv(&q_uncoupled.entries.transpose(), PINV_CUTOFF);
    if p.rank < n {
        return Err(EhbError::UnidentifiableCoupling { rank: p.rank, needed: n });
    }
    Ok(CouplingMatrix {
        entries: q_coupled.entries.transpose() * p.matrix,
    })
}

/// E_coupled = E_uncoupled · Cᵀ.
pub fn synthesize_coupled_fields(e_uncoupled: &FieldSampleMatrix, c_true: &CouplingMatrix) -> Result<FieldSampleMatrix> {
    if e_uncoupled.entries.ncols() != c_true.size() {
        return Err(EhbError::Dimension(format!(
            "{} field columns vs coupling size {}",
            e_uncoupled.entries.ncols(),
            c_true.size()
        )));
    }
    Ok(FieldSampleMatrix {
        entries: &e_uncoupled.entries * c_true.entries.transpose(),
    })
}

/// Entry m = Σ_n c_mn i_n g(θ,φ) e_n(θ,φ).
pub fn realized_pattern(
    geom: &ArrayGeometry,
    cfg: &PhysicalConfig,
    pattern: &ElementPattern,
    c: &CouplingMatrix,
    i: &CVec,
    direction: Direction,
) -> Result<CVec> {
    let n = geom.total_count;
    if c.size() != n || i.len() != n {
        return Err(EhbError::Dimension(format!(
            "geometry {n}, coupling {}, currents {}",
            c.size(),
            i.len()
        )));
    }
    let g = pattern.value(direction.theta, direction.phi)?;
    let e = steering_vector(geom, cfg, direction.theta, direction.phi);
    let ideal = CVec::from_fn(n, |k, _| i[k] * e[k] * g);
    Ok(&c.entries * ideal)
}

/// Full estimation chain: sample uncoupled fields, synthesize coupled ones
/// with `c_true`, expand both and recover the coupling matrix.
pub fn estimate_coupling(
    geom: &ArrayGeometry,
    cfg: &PhysicalConfig,
    pattern: &ElementPattern,
    swe: &SweConfig,
    c_true: &CouplingMatrix,
) -> Result<CouplingMatrix> {
    let grid = make_grid(swe);
    let f = mode_basis_matrix(swe, cfg, &grid)?;
    let e = sample_fields(geom, pattern, cfg, &grid)?;
    let ec = synthesize_coupled_fields(&e, c_true)?;
    let pi = weighted_pinv(&f)?;
    let qs = apply_weighted_pinv(&pi, &f, &e, cfg);
    let qc = apply_weighted_pinv(&pi, &f, &ec, cfg);
    coupling_matrix(&qc, &qs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{build_lattice, ApertureMode};

    #[test]
    fn truncation_order_examples() {
        let cfg = PhysicalConfig::default();
        let lam = cfg.wavelength_m;
        let single = ArrayGeometry::from_positions(vec![[0.0; 3]], lam, 1).unwrap();
        assert_eq!(truncation_order(&single, &cfg, 0), 4);
        assert_eq!(truncation_order(&single, &cfg, 2), 6);
        let lin = build_lattice(&cfg, 0.5 * lam, 1, ApertureMode::FixedCount(4)).unwrap();
        assert_eq!(truncation_order(&lin, &cfg, 0), 8);
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn grid_weights() {
        let g = SamplingGrid::sphere(2, 4, 1.0);
        assert_eq!(g.len(), 8);
        assert!((g.quadrature_weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
        let g = SamplingGrid::sphere(64, 128, 1.0);
        assert!((g.integrate(|_, _| 1.0) - 4.0 * PI).abs() < 1e-13);
        assert!((g.integrate(|t, _| t.cos().powi(2)) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_underdetermined_grid() {
        assert!(SweConfig::new(4, 1.0, 2, 2).is_err());
        assert!(SweConfig::new(0, 1.0, 4, 4).is_err());
        assert!(SweConfig::new(2, 1.0, 4, 6).is_ok());
    }
}
