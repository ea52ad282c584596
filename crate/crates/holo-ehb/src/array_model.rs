//! Physical constants, power budgets and 3D lattice construction.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::linalg::J;
use crate::{CVec, EhbError, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730_313_668;

/// Deserializes from `frequency_hz` (and optionally `medium_impedance_ohm`);
/// wavelength and wavenumber are always recomputed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhysicalInput")]
pub struct PhysicalConfig {
    pub frequency_hz: f64,
    pub wavelength_m: f64,
    pub wavenumber_rad_per_m: f64,
    pub medium_impedance_ohm: f64,
}

#[derive(Deserialize)]
struct PhysicalInput {
    frequency_hz: f64,
    #[serde(default = "free_space")]
    medium_impedance_ohm: f64,
}

fn free_space() -> f64 {
    FREE_SPACE_IMPEDANCE
}

impl TryFrom<PhysicalInput> for PhysicalConfig {
    type Error = EhbError;

    fn try_from(p: PhysicalInput) -> Result<Self> {
        Self::with_impedance(p.frequency_hz, p.medium_impedance_ohm)
    }
}

impl PhysicalConfig {
    /// Free-space configuration at the given carrier frequency.
    pub fn new(frequency_hz: f64) -> Result<Self> {
        Self::with_impedance(frequency_hz, FREE_SPACE_IMPEDANCE)
    }

    pub fn with_impedance(frequency_hz: f64, medium_impedance_ohm: f64) -> Result<Self> {
        if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
            return Err(EhbError::InvalidConfig(format!(
                "frequency must be positive, got {frequency_hz}"
            )));
        }
        if !(medium_impedance_ohm > 0.0) {
            return Err(EhbError::InvalidConfig(format!(
                "medium impedance must be positive, got {medium_impedance_ohm}"
            )));
        }
        let wavelength_m = SPEED_OF_LIGHT / frequency_hz;
        Ok(Self {
            frequency_hz,
            wavelength_m,
            wavenumber_rad_per_m: 2.0 * std::f64::consts::PI / wavelength_m,
            medium_impedance_ohm,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength_m
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber_rad_per_m
    }
}

impl Default for PhysicalConfig {
    /// 1.6 GHz free space.
    fn default() -> Self {
        Self::new(1.6e9).expect("valid default frequency")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub total_w: f64,
    pub analog_w: f64,
    pub digital_w: f64,
    pub noise_variance: f64,
}

impl PowerBudget {
    pub fn new(analog_w: f64, digital_w: f64, noise_variance: f64) -> Result<Self> {
        let b = Self {
            total_w: analog_w + digital_w,
            analog_w,
            digital_w,
            noise_variance,
        };
        b.validate()?;
        Ok(b)
    }

    /// Digital power set from an SNR in dB relative to the noise variance.
    pub fn from_snr_db(snr_db: f64, analog_w: f64, noise_variance: f64) -> Result<Self> {
        Self::new(analog_w, noise_variance * 10f64.powf(snr_db / 10.0), noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.total_w, self.analog_w, self.digital_w, self.noise_variance];
        if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(EhbError::InvalidConfig(format!(
                "power budget entries must be positive: {self:?}"
            )));
        }
        if self.analog_w + self.digital_w > self.total_w * (1.0 + 1e-12) {
            return Err(EhbError::InvalidConfig(format!(
                "analog + digital power exceeds total: {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for PowerBudget {
    /// 1 W analog, 20 dB SNR at unit noise.
    fn default() -> Self {
        Self::from_snr_db(20.0, 1.0, 1.0).expect("valid default budget")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureMode {
    /// Per-layer count floor(1.5λ/d) + 1.
    FixedAperture,
    FixedCount(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerAxis {
    #[default]
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct LatticeOptions {
    #[serde(default)]
    pub layer_axis: LayerAxis,
    /// Inter-layer spacing; defaults to the in-layer spacing.
    #[serde(default)]
    pub layer_spacing_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub positions: Vec<[f64; 3]>,
    pub spacing_m: f64,
    pub layers: usize,
    pub per_layer_count: usize,
    pub total_count: usize,
}

pub fn fixed_aperture_count(cfg: &PhysicalConfig, spacing_m: f64) -> usize {
    (1.5 * cfg.wavelength_m / spacing_m + 1e-9).floor() as usize + 1
}

pub fn build_lattice(
    cfg: &PhysicalConfig,
    spacing_m: f64,
    layers: usize,
    aperture_mode: ApertureMode,
) -> Result<ArrayGeometry> {
    build_lattice_with(cfg, spacing_m, layers, aperture_mode, LatticeOptions::default())
}

/// Linear rows along x with spacing d, rows stacked along the configured axis,
/// centred on the centroid.
pub fn build_lattice_with(
    cfg: &PhysicalConfig,
    spacing_m: f64,
    layers: usize,
    aperture_mode: ApertureMode,
    options: LatticeOptions,
) -> Result<ArrayGeometry> {
    if !(spacing_m > 0.0 && spacing_m.is_finite()) {
        return Err(EhbError::InvalidGeometry(format!(
            "spacing must be positive, got {spacing_m}"
        )));
    }
    if layers == 0 {
        return Err(EhbError::InvalidGeometry("at least one layer required".into()));
    }
    let per_layer = match aperture_mode {
        ApertureMode::FixedAperture => fixed_aperture_count(cfg, spacing_m),
        ApertureMode::FixedCount(n) => n,
    };
    if per_layer < 1 {
        return Err(EhbError::InvalidGeometry("no elements per layer".into()));
    }
    let layer_spacing = options.layer_spacing_m.unwrap_or(spacing_m);
    if !(layer_spacing > 0.0) {
        return Err(EhbError::InvalidGeometry(format!(
            "layer spacing must be positive, got {layer_spacing}"
        )));
    }
    let axis = match options.layer_axis {
        LayerAxis::Y => 1,
        LayerAxis::Z => 2,
    };
    let x0 = 0.5 * (per_layer as f64 - 1.0) * spacing_m;
    let l0 = 0.5 * (layers as f64 - 1.0) * layer_spacing;
    let mut positions = Vec::with_capacity(layers * per_layer);
    for l in 0..layers {
        for n in 0..per_layer {
            let mut p = [0.0; 3];
            p[0] = n as f64 * spacing_m - x0;
            p[axis] = l as f64 * layer_spacing - l0;
            positions.push(p);
        }
    }
    Ok(ArrayGeometry {
        total_count: positions.len(),
        positions,
        spacing_m,
        layers,
        per_layer_count: per_layer,
    })
}

impl ArrayGeometry {
    /// Geometry from explicit positions; they are used as given (not recentred).
    pub fn from_positions(positions: Vec<[f64; 3]>, spacing_m: f64, layers: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(EhbError::InvalidGeometry("no positions".into()));
        }
        if layers == 0 || positions.len() % layers != 0 {
            return Err(EhbError::InvalidGeometry(format!(
                "{} positions cannot be split into {layers} layers",
                positions.len()
            )));
        }
        for (a, pa) in positions.iter().enumerate() {
            if pa.iter().any(|c| !c.is_finite()) {
                return Err(EhbError::InvalidGeometry(format!("position {a} is not finite")));
            }
            for (b, pb) in positions.iter().enumerate().skip(a + 1) {
                if distance(pa, pb) <= 0.0 {
                    return Err(EhbError::InvalidGeometry(format!(
                        "elements {a} and {b} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            total_count: positions.len(),
            per_layer_count: positions.len() / layers,
            positions,
            spacing_m,
            layers,
        })
    }

    pub fn len(&self) -> usize {
        self.total_count
    }

    pub fn is_empty(&self) -> bool {
        self.total_count == 0
    }

    pub fn position(&self, n: usize) -> Vector3<f64> {
        Vector3::from(self.positions[n])
    }

    pub fn distance(&self, m: usize, n: usize) -> f64 {
        distance(&self.positions[m], &self.positions[n])
    }

    /// Largest element distance from the coordinate origin.
    pub fn max_radius(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn to_document(&self, cfg: &PhysicalConfig) -> GeometryDocument {
        GeometryDocument {
            frequency_hz: cfg.frequency_hz,
            spacing_m: self.spacing_m,
            layers: self.layers,
            positions: self.positions.clone(),
        }
    }

    pub fn to_json(&self, cfg: &PhysicalConfig) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(cfg))?)
    }

    pub fn from_json(text: &str) -> Result<(PhysicalConfig, Self)> {
        let doc: GeometryDocument = serde_json::from_str(text)?;
        doc.into_parts()
    }
}

/// Exchange format for geometries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryDocument {
    pub frequency_hz: f64,
    pub spacing_m: f64,
    pub layers: usize,
    pub positions: Vec<[f64; 3]>,
}

impl GeometryDocument {
    pub fn into_parts(self) -> Result<(PhysicalConfig, ArrayGeometry)> {
        let cfg = PhysicalConfig::new(self.frequency_hz)?;
        let geom = ArrayGeometry::from_positions(self.positions, self.spacing_m, self.layers)?;
        Ok((cfg, geom))
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Unit vector for elevation θ (from +z) and azimuth φ (from +x).
pub fn unit_direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// e_n = exp(−jκ r̂·r_n).
pub fn steering_vector(geom: &ArrayGeometry, cfg: &PhysicalConfig, theta: f64, phi: f64) -> CVec {
    let r = unit_direction(theta, phi);
    let k = cfg.wavenumber_rad_per_m;
    CVec::from_iterator(
        geom.total_count,
        geom.positions.iter().map(|p| {
            let proj = r[0] * p[0] + r[1] * p[1] + r[2] * p[2];
            (-J * (k * proj)).exp()
        }),
    )
}

/// A far-field direction in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Direction in the azimuth plane (θ = π/2).
    pub fn azimuth(phi: f64) -> Self {
        Self::new(std::f64::consts::FRAC_PI_2, phi)
    }

    pub fn azimuth_deg(phi_deg: f64) -> Self {
        Self::azimuth(phi_deg.to_radians())
    }
}
