//! Element patterns, impedance-matrix quadrature, directivity and
//! superdirective excitation synthesis.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::array_model::{steering_vector, ArrayGeometry, Direction, PhysicalConfig};
use crate::linalg::{condition_number, hermitian_eigen, hermitize, norm_sq, quad_form, solve_general, solve_hpd};
use crate::swe_coupling::{CouplingMatrix, SamplingGrid};
use crate::{CMat, CVec, Complex64, EhbError, Result};

/// Sampled pattern on a regular (θ, φ) grid, bilinearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPattern {
    /// Rows are θ samples from 0 to π inclusive, columns φ samples from 0
    /// (periodic, φ = 2π excluded). Values as [re, im].
    pub values: Vec<Vec<[f64; 2]>>,
}

impl TabulatedPattern {
    pub fn new(values: Vec<Vec<Complex64>>) -> Result<Self> {
        let t = Self {
            values: values
                .into_iter()
                .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(n_theta: usize, n_phi: usize, f: F) -> Result<Self> {
        let values = (0..n_theta)
            .map(|a| {
                let theta = PI * a as f64 / (n_theta - 1) as f64;
                (0..n_phi)
                    .map(|b| f(theta, 2.0 * PI * b as f64 / n_phi as f64))
                    .collect()
            })
            .collect();
        Self::new(values)
    }

    fn validate(&self) -> Result<()> {
        let nt = self.values.len();
        let np = self.values.first().map_or(0, |r| r.len());
        if nt < 2 || np < 1 || self.values.iter().any(|r| r.len() != np) {
            return Err(EhbError::InvalidConfig(
                "tabulated pattern needs ≥ 2 θ rows of equal length".into(),
            ));
        }
        if self.values.iter().flatten().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(EhbError::InvalidConfig("tabulated pattern has non-finite entries".into()));
        }
        Ok(())
    }

    fn at(&self, a: usize, b: usize) -> Complex64 {
        let v = self.values[a][b % self.values[a].len()];
        Complex64::new(v[0], v[1])
    }

    pub fn value(&self, theta: f64, phi: f64) -> Complex64 {
        let nt = self.values.len();
        let np = self.values[0].len();
        let tpos = (theta.clamp(0.0, PI) / PI) * (nt - 1) as f64;
        let a0 = (tpos.floor() as usize).min(nt - 2);
        let ta = tpos - a0 as f64;
        let ppos = phi.rem_euclid(2.0 * PI) / (2.0 * PI) * np as f64;
        let b0 = (ppos.floor() as usize) % np;
        let pb = ppos - ppos.floor();
        let v00 = self.at(a0, b0);
        let v01 = self.at(a0, b0 + 1);
        let v10 = self.at(a0 + 1, b0);
        let v11 = self.at(a0 + 1, b0 + 1);
        (v00 * (1.0 - pb) + v01 * pb) * (1.0 - ta) + (v10 * (1.0 - pb) + v11 * pb) * ta
    }
}

/// θ̂-polarized element pattern g(θ, φ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementPattern {
    Isotropic,
    DipoleSinTheta,
    Tabulated(TabulatedPattern),
}

impl ElementPattern {
    pub fn value(&self, theta: f64, phi: f64) -> Result<Complex64> {
        Ok(match self {
            ElementPattern::Isotropic => Complex64::new(1.0, 0.0),
            ElementPattern::DipoleSinTheta => Complex64::new(theta.sin(), 0.0),
            ElementPattern::Tabulated(t) => t.value(theta, phi),
        })
    }

    pub fn power(&self, theta: f64, phi: f64) -> f64 {
        self.value(theta, phi).map(|g| g.norm_sqr()).unwrap_or(0.0)
    }

    pub fn descriptor(&self) -> &'static str {
        match self {
            ElementPattern::Isotropic => "isotropic",
            ElementPattern::DipoleSinTheta => "dipole_sin_theta",
            ElementPattern::Tabulated(_) => "tabulated",
        }
    }
}

/// Relative regularization added before every inversion of Z.
pub const REGULARIZATION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceMatrix {
    pub entries: CMat,
    pub regularization_used: f64,
    /// ∮|g|² dΩ under the same quadrature.
    pub pattern_power: f64,
    /// Max relative change of Z against a 1.5× refined grid.
    pub quadrature_change: f64,
}

impl ImpedanceMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Z + δI.
    pub fn regularized(&self) -> CMat {
        let n = self.size();
        &self.entries + CMat::identity(n, n) * Complex64::new(self.regularization_used, 0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *hermitian_eigen(&self.entries).0.last().expect("non-empty matrix")
    }
}

/// Default sphere quadrature for impedance integrals.
pub fn default_grid() -> SamplingGrid {
    SamplingGrid::sphere(64, 128, 1.0)
}

fn impedance_on_grid(geom: &ArrayGeometry, pattern: &ElementPattern, cfg: &PhysicalConfig, grid: &SamplingGrid) -> Result<(CMat, f64)> {
    let n = geom.total_count;
    let mut acc = CMat::zeros(n, n);
    let mut power = 0.0;
    for (&(_, theta, phi), &w) in grid.points.iter().zip(&grid.quadrature_weights) {
        let g2 = pattern.value(theta, phi)?.norm_sqr();
        if g2 == 0.0 {
            continue;
        }
        let wg = w * g2;
        power += wg;
        let e = steering_vector(geom, cfg, theta, phi);
        for b in 0..n {
            let eb = e[b].conj() * wg;
            for a in b..n {
                acc[(a, b)] += e[a] * eb;
            }
        }
    }
    if !(power > 0.0) {
        return Err(EhbError::Degenerate("element pattern has zero power on the grid".into()));
    }
    for b in 0..n {
        for a in 0..b {
            acc[(a, b)] = acc[(b, a)].conj();
        }
    }
    Ok((hermitize(&(acc / Complex64::new(power, 0.0))), power))
}

/// Z = ∮|g|² e e^H dΩ / ∮|g|² dΩ, with a refined-grid convergence check.
pub fn impedance_matrix(
    geom: &ArrayGeometry,
    pattern: &ElementPattern,
    cfg: &PhysicalConfig,
    grid: &SamplingGrid,
) -> Result<ImpedanceMatrix> {
    let (z, power) = impedance_on_grid(geom, pattern, cfg, grid)?;
    let change = match grid_shape(grid) {
        Some((nt, np)) => {
            let finer = SamplingGrid::sphere((3 * nt).div_ceil(2), (3 * np).div_ceil(2), 1.0);
            let (zf, _) = impedance_on_grid(geom, pattern, cfg, &finer)?;
            let change = (&z - &zf).iter().map(|v| v.norm()).fold(0.0, f64::max)
                / zf.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            if change > 1e-6 {
                log::warn!(
                    "impedance quadrature not converged: Z11 {} on grid vs {} refined (relative change {change:.3e})",
                    z[(0, 0)],
                    zf[(0, 0)]
                );
            }
            change
        }
        None => f64::NAN,
    };
    let trace: f64 = (0..z.nrows()).map(|k| z[(k, k)].re).sum();
    Ok(ImpedanceMatrix {
        regularization_used: REGULARIZATION * trace / z.nrows() as f64,
        entries: z,
        pattern_power: power,
        quadrature_change: change,
    })
}

/// Recover (n_theta, n_phi) of a product grid built by `SamplingGrid::sphere`.
fn grid_shape(grid: &SamplingGrid) -> Option<(usize, usize)> {
    let first_theta = grid.points.first()?.1;
    let np = grid.points.iter().take_while(|p| p.1 == first_theta).count();
    if np == 0 || grid.len() % np != 0 {
        return None;
    }
    Some((grid.len() / np, np))
}

/// 4π|g|²|e^H i|² / (i^H Z i · ∮|g|²).
pub fn directivity(
    geom: &ArrayGeometry,
    pattern: &ElementPattern,
    cfg: &PhysicalConfig,
    z: &ImpedanceMatrix,
    i: &CVec,
    direction: Direction,
) -> Result<f64> {
    check_len(z, i)?;
    let p = quad_form(&z.entries, i);
    let scale = norm_sq(i) * z.entries.diagonal().iter().map(|d| d.re).fold(0.0, f64::max);
    if !(p > 1e-15 * scale) {
        return Err(EhbError::DegeneratePower(p));
    }
    let g2 = pattern.value(direction.theta, direction.phi)?.norm_sqr();
    let e = steering_vector(geom, cfg, direction.theta, direction.phi);
    let field = e.dotc(i).norm_sqr();
    Ok(4.0 * PI * g2 * field / (p * z.pattern_power))
}

/// Directivity of the realized pattern when coupling maps currents i to C·i.
pub fn coupled_directivity(
    geom: &ArrayGeometry,
    pattern: &ElementPattern,
    cfg: &PhysicalConfig,
    z: &ImpedanceMatrix,
    c: &CouplingMatrix,
    i: &CVec,
    direction: Direction,
) -> Result<f64> {
    directivity(geom, pattern, cfg, z, &(&c.entries * i), direction)
}

fn check_len(z: &ImpedanceMatrix, v: &CVec) -> Result<()> {
    if z.size() != v.len() {
        return Err(EhbError::Dimension(format!("Z is {0}×{0}, vector has {1} entries", z.size(), v.len())));
    }
    Ok(())
}

fn normalize_to(v: CVec, power_w: f64) -> Result<CVec> {
    let n2 = norm_sq(&v);
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(EhbError::Degenerate("current vector has zero or non-finite norm".into()));
    }
    Ok(v * Complex64::new((power_w / n2).sqrt(), 0.0))
}

/// γ (Z + δI)^{-1} e with ‖i‖² = power_w.
pub fn optimal_currents(z: &ImpedanceMatrix, e: &CVec, power_w: f64) -> Result<CVec> {
    check_len(z, e)?;
    normalize_to(solve_hpd(&z.regularized(), e)?, power_w)
}

/// Largest accepted condition number of a coupling matrix.
pub const MAX_COUPLING_CONDITION: f64 = 1e10;

/// γ C^{-1} (Z + δI)^{-1} e with ‖i‖² = power_w.
pub fn coupled_optimal_currents(c: &CouplingMatrix, z: &ImpedanceMatrix, e: &CVec, power_w: f64) -> Result<CVec> {
    check_len(z, e)?;
    if c.size() != z.size() {
        return Err(EhbError::Dimension("coupling and impedance sizes differ".into()));
    }
    let cond = condition_number(&c.entries);
    if !(cond < MAX_COUPLING_CONDITION) {
        return Err(EhbError::IllConditionedCoupling(cond));
    }
    let base = solve_hpd(&z.regularized(), e)?;
    normalize_to(solve_general(&c.entries, &base)?, power_w)
}

/// Entrywise sum of beams renormalized to power_w.
pub fn multibeam_currents(i_list: &[CVec], power_w: f64) -> Result<CVec> {
    let first = i_list
        .first()
        .ok_or_else(|| EhbError::Degenerate("no beams given".into()))?;
    let mut sum = CVec::zeros(first.len());
    let mut scale = 0.0;
    for v in i_list {
        if v.len() != first.len() {
            return Err(EhbError::Dimension("beam vectors differ in length".into()));
        }
        sum += v;
        scale += v.norm();
    }
    if !(sum.norm() > 1e-12 * scale) {
        return Err(EhbError::Degenerate("beam vectors cancel".into()));
    }
    normalize_to(sum, power_w)
}

/// A = N_T · e^H (Z+δI)^{-1} e / e^H e.
pub fn array_gain(z: &ImpedanceMatrix, e: &CVec) -> Result<f64> {
    check_len(z, e)?;
    let x = solve_hpd(&z.regularized(), e)?;
    Ok(z.size() as f64 * e.dotc(&x).re / norm_sq(e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiationMetrics {
    pub directivity: f64,
    pub gain: f64,
    pub efficiency: f64,
    pub radiated_power_w: f64,
    pub accepted_power_w: f64,
}

/// e_rad = i^H Z i / (i^H Z i + r_loss ‖i‖²).
pub fn radiation_efficiency(z: &ImpedanceMatrix, i: &CVec, loss_ratio: f64) -> Result<f64> {
    Ok(power_split(z, i, loss_ratio)?.0)
}

fn power_split(z: &ImpedanceMatrix, i: &CVec, loss_ratio: f64) -> Result<(f64, f64, f64)> {
    check_len(z, i)?;
    if !(loss_ratio >= 0.0) {
        return Err(EhbError::InvalidConfig(format!("loss ratio must be ≥ 0, got {loss_ratio}")));
    }
    let n2 = norm_sq(i);
    if !(n2 > 0.0) {
        return Err(EhbError::Degenerate("zero currents".into()));
    }
    let p_rad = quad_form(&z.entries, i);
    if !(p_rad > 0.0) {
        return Err(EhbError::DegeneratePower(p_rad));
    }
    let p_acc = p_rad + loss_ratio * n2;
    Ok((p_rad / p_acc, p_rad, p_acc))
}

/// Directivity, efficiency and realized gain of currents i toward `direction`.
#[allow(clippy::too_many_arguments)]
pub fn radiation_metrics(
    geom: &ArrayGeometry,
    pattern: &ElementPattern,
    cfg: &PhysicalConfig,
    z: &ImpedanceMatrix,
    i: &CVec,
    direction: Direction,
    loss_ratio: f64,
) -> Result<RadiationMetrics> {
    let d = directivity(geom, pattern, cfg, z, i, direction)?;
    let (eff, p_rad, p_acc) = power_split(z, i, loss_ratio)?;
    Ok(RadiationMetrics {
        directivity: d,
        gain: eff * d,
        efficiency: eff,
        radiated_power_w: p_rad,
        accepted_power_w: p_acc,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternPoint {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub directivity_dbi: f64,
    pub gain_dbi: f64,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Pattern of fixed currents over a list of directions.
pub fn pattern_cut(
    geom: &ArrayGeometry,
    pattern: &ElementPattern,
    cfg: &PhysicalConfig,
    z: &ImpedanceMatrix,
    i: &CVec,
    directions: &[Direction],
    loss_ratio: f64,
) -> Result<Vec<PatternPoint>> {
    let eff = radiation_efficiency(z, i, loss_ratio)?;
    directions
        .iter()
        .map(|&dir| {
            let d = directivity(geom, pattern, cfg, z, i, dir)?;
            Ok(PatternPoint {
                theta_deg: dir.theta.to_degrees(),
                phi_deg: dir.phi.to_degrees(),
                directivity_dbi: to_db(d),
                gain_dbi: to_db(eff * d),
            })
        })
        .collect()
}

pub fn write_pattern_csv<W: Write>(mut out: W, points: &[PatternPoint]) -> Result<()> {
    writeln!(out, "theta_deg,phi_deg,directivity_dBi,gain_dBi")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.theta_deg, p.phi_deg, p.directivity_dbi, p.gain_dbi)?;
    }
    Ok(())
}
