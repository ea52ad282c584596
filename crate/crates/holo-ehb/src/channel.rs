//! Geometry-based stochastic channel: scatterers, pattern samples G,
//! path coefficients S and the effective channel H = (C diag(i) G S)ᵀ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::array_model::{steering_vector, ArrayGeometry, PhysicalConfig};
use crate::linalg::{complex_normal, J};
use crate::radiation::ElementPattern;
use crate::swe_coupling::CouplingMatrix;
use crate::{CMat, CVec, Complex64, EhbError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationModel {
    /// All scatterers in the azimuth plane.
    #[default]
    AzimuthPlane,
    /// Uniform on the sphere.
    FullSphere,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScattererConfig {
    #[serde(default)]
    pub elevation: ElevationModel,
    pub max_delay_s: f64,
    /// Decay constant of the exponential power-delay profile.
    pub power_decay_s: f64,
}

impl Default for ScattererConfig {
    fn default() -> Self {
        Self {
            elevation: ElevationModel::AzimuthPlane,
            max_delay_s: 1e-6,
            power_decay_s: 0.3e-6,
        }
    }
}

/// Per-user parameters of one scatterer path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLink {
    pub delay_s: f64,
    pub power: f64,
    pub fading: [f64; 2],
}

impl PathLink {
    pub fn fading(&self) -> Complex64 {
        Complex64::new(self.fading[0], self.fading[1])
    }

    /// s = √P α e^{−j2π f τ}.
    pub fn coefficient(&self, frequency_hz: f64) -> Complex64 {
        self.fading() * self.power.sqrt() * (-J * (2.0 * PI * frequency_hz * self.delay_s)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub theta: f64,
    pub phi: f64,
    /// One entry per user.
    pub links: Vec<PathLink>,
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// L scatterers connected to all K users plus the L×K coefficient matrix S.
pub fn draw_scatterers(
    paths: usize,
    users: usize,
    seed: u64,
    config: &ScattererConfig,
    cfg: &PhysicalConfig,
) -> Result<(Vec<Scatterer>, CMat)> {
    if users < 1 {
        return Err(EhbError::InvalidConfig("at least one user required".into()));
    }
    if paths < users {
        return Err(EhbError::InsufficientPaths { paths, users });
    }
    if !(config.max_delay_s >= 0.0 && config.power_decay_s > 0.0) {
        return Err(EhbError::InvalidConfig(format!("invalid scatterer config {config:?}")));
    }
    let mut rng = seeded_rng(seed);
    let mut scatterers = Vec::with_capacity(paths);
    for _ in 0..paths {
        let phi = rng.random::<f64>() * 2.0 * PI;
        let theta = match config.elevation {
            ElevationModel::AzimuthPlane => PI / 2.0,
            ElevationModel::FullSphere => (1.0 - 2.0 * rng.random::<f64>()).acos(),
        };
        let links = (0..users)
            .map(|_| {
                let delay = rng.random::<f64>() * config.max_delay_s;
                let f = complex_normal(&mut rng);
                PathLink {
                    delay_s: delay,
                    power: (-delay / config.power_decay_s).exp(),
                    fading: [f.re, f.im],
                }
            })
            .collect();
        scatterers.push(Scatterer { theta, phi, links });
    }
    for k in 0..users {
        let total: f64 = scatterers.iter().map(|s| s.links[k].power).sum();
        for s in scatterers.iter_mut() {
            s.links[k].power /= total;
        }
    }
    let s = coefficient_matrix(&scatterers, cfg);
    Ok((scatterers, s))
}

pub fn coefficient_matrix(scatterers: &[Scatterer], cfg: &PhysicalConfig) -> CMat {
    let users = scatterers.first().map_or(0, |s| s.links.len());
    CMat::from_fn(scatterers.len(), users, |l, k| scatterers[l].links[k].coefficient(cfg.frequency_hz))
}

/// Column l = g(Ω_l) · steering_vector(Ω_l).
pub fn pattern_matrix_g(
    geom: &ArrayGeometry,
    cfg: &PhysicalConfig,
    pattern: &ElementPattern,
    scatterers: &[Scatterer],
) -> Result<CMat> {
    let mut g = CMat::zeros(geom.total_count, scatterers.len());
    for (l, s) in scatterers.iter().enumerate() {
        let gv = pattern.value(s.theta, s.phi)?;
        let e = steering_vector(geom, cfg, s.theta, s.phi);
        g.set_column(l, &(e * gv));
    }
    Ok(g)
}

/// H = (C diag(i) G S)ᵀ.
pub fn assemble_h(c: &CouplingMatrix, i: &CVec, g: &CMat, s: &CMat) -> Result<CMat> {
    let n = c.size();
    if i.len() != n || g.nrows() != n || g.ncols() != s.nrows() {
        return Err(EhbError::Dimension(format!(
            "C {n}×{n}, i {}, G {:?}, S {:?}",
            i.len(),
            g.shape(),
            s.shape()
        )));
    }
    let mut cg = c.entries.clone();
    for col in 0..n {
        let scale = i[col];
        cg.column_mut(col).iter_mut().for_each(|v| *v *= scale);
    }
    Ok((cg * g * s).transpose())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub scatterers: Vec<Scatterer>,
    #[serde(with = "crate::io::cmat")]
    pub s: CMat,
    #[serde(with = "crate::io::cmat")]
    pub g: CMat,
    #[serde(with = "crate::io::cmat")]
    pub h: CMat,
    pub rng_seed: u64,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.s.ncols()
    }

    pub fn paths(&self) -> usize {
        self.s.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.g.nrows()
    }

    /// X = G S, the coupling- and current-free part of the channel.
    pub fn x(&self) -> CMat {
        &self.g * &self.s
    }

    /// Effective channel for other currents or coupling.
    pub fn effective_channel(&self, c: &CouplingMatrix, i: &CVec) -> Result<CMat> {
        assemble_h(c, i, &self.g, &self.s)
    }

    /// Index of each user's strongest path.
    pub fn strongest_paths(&self) -> Vec<usize> {
        (0..self.users())
            .map(|k| {
                (0..self.paths())
                    .max_by(|&a, &b| {
                        self.scatterers[a].links[k]
                            .power
                            .total_cmp(&self.scatterers[b].links[k].power)
                    })
                    .expect("at least one path")
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Draw scatterers, sample patterns and assemble H for the given currents.
#[allow(clippy::too_many_arguments)]
pub fn realize(
    geom: &ArrayGeometry,
    cfg: &PhysicalConfig,
    pattern: &ElementPattern,
    paths: usize,
    users: usize,
    seed: u64,
    config: &ScattererConfig,
    c: &CouplingMatrix,
    i: &CVec,
) -> Result<ChannelRealization> {
    let (scatterers, s) = draw_scatterers(paths, users, seed, config, cfg)?;
    let g = pattern_matrix_g(geom, cfg, pattern, &scatterers)?;
    let h = assemble_h(c, i, &g, &s)?;
    Ok(ChannelRealization {
        scatterers,
        s,
        g,
        h,
        rng_seed: seed,
    })
}
