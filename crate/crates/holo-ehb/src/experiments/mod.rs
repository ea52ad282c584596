//! Configuration-driven sweeps producing plot-ready tables.
//!
//! Every kind is averaged over the listed channel seeds where a channel is
//! involved. Points run on a rayon pool sized by `EHB_WORKERS`; the table is
//! assembled in point order, so results do not depend on the worker count.

mod table;

pub use table::{compare, Column, ColumnData, ColumnDeviation, CompareReport, ResultTable, TableMetadata, Tolerances};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array_model::{
    build_lattice_with, steering_vector, ApertureMode, ArrayGeometry, Direction, LatticeOptions, PhysicalConfig, PowerBudget,
};
use crate::channel::{realize, ScattererConfig};
use crate::ehb::{ehb_alternating, zf_baseline, EhbProblem, OptimizerConfig};
use crate::radiation::{
    array_gain, default_grid, impedance_matrix, optimal_currents, radiation_metrics, to_db,
    ElementPattern, ImpedanceMatrix,
};
use crate::swe_coupling::CouplingMatrix;
use crate::{CVec, Complex64, EhbError, Result};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "EHB_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PatternCut,
    RateVsSpacing,
    RateVsSnr,
    DirectivityVsSpacingFixedAperture,
    GainVsSpacingFixedAperture,
    SweepFixedCount,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::PatternCut => "pattern_cut",
            ExperimentKind::RateVsSpacing => "rate_vs_spacing",
            ExperimentKind::RateVsSnr => "rate_vs_snr",
            ExperimentKind::DirectivityVsSpacingFixedAperture => "directivity_vs_spacing_fixed_aperture",
            ExperimentKind::GainVsSpacingFixedAperture => "gain_vs_spacing_fixed_aperture",
            ExperimentKind::SweepFixedCount => "sweep_fixed_count",
        }
    }

    fn uses_channel(&self) -> bool {
        matches!(
            self,
            ExperimentKind::RateVsSpacing | ExperimentKind::RateVsSnr | ExperimentKind::SweepFixedCount
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    /// Element spacings in wavelengths; one point per entry for spacing sweeps.
    pub spacing_lambda: Vec<f64>,
    #[serde(default = "one")]
    pub layers: usize,
    /// Elements per layer; `None` keeps the 1.5λ aperture fixed.
    #[serde(default)]
    pub per_layer: Option<usize>,
    #[serde(default)]
    pub lattice: LatticeOptions,
    #[serde(default = "dipole")]
    pub pattern: ElementPattern,
}

fn one() -> usize {
    1
}

fn dipole() -> ElementPattern {
    ElementPattern::DipoleSinTheta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_users")]
    pub users: usize,
    pub seeds: Vec<u64>,
    /// ρ of the synthetic coupling model; 0 disables coupling.
    #[serde(default = "default_rho")]
    pub coupling_rho: f64,
    #[serde(default)]
    pub scatterers: ScattererConfig,
}

fn default_paths() -> usize {
    8
}

fn default_users() -> usize {
    4
}

fn default_rho() -> f64 {
    0.8
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            users: default_users(),
            seeds: (0..50).collect(),
            coupling_rho: default_rho(),
            scatterers: ScattererConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSpec {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl Default for AngleSpec {
    /// End-fire along the array rows.
    fn default() -> Self {
        Self {
            theta_deg: 90.0,
            phi_deg: 0.0,
        }
    }
}

impl AngleSpec {
    pub fn direction(&self) -> Direction {
        Direction::new(self.theta_deg.to_radians(), self.phi_deg.to_radians())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AzimuthSweep {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl Default for AzimuthSweep {
    fn default() -> Self {
        Self {
            start_deg: 0.0,
            stop_deg: 180.0,
            step_deg: 1.0,
        }
    }
}

impl AzimuthSweep {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start_deg + k as f64 * self.step_deg).collect()
    }
}

/// How currents are chosen along a pattern cut.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSteering {
    /// Maximum-directivity currents re-optimized toward every azimuth.
    #[default]
    Envelope,
    /// One set of maximum-directivity currents toward `direction`.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub physical: PhysicalConfig,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// SNR points for `rate_vs_snr`.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Beam direction for the directivity and gain sweeps and fixed cuts.
    #[serde(default)]
    pub direction: AngleSpec,
    #[serde(default)]
    pub azimuth: AzimuthSweep,
    #[serde(default)]
    pub steering: PatternSteering,
    /// CSV destination; the JSON sidecar goes next to it.
    #[serde(default)]
    pub output_path: String,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Collects every offending field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let g = &self.geometry;
        if g.spacing_lambda.is_empty() {
            errs.push("geometry.spacing_lambda: empty".to_string());
        }
        for (k, d) in g.spacing_lambda.iter().enumerate() {
            if !(*d > 0.0 && d.is_finite()) {
                errs.push(format!("geometry.spacing_lambda[{k}]: must be positive, got {d}"));
            }
        }
        if g.layers < 1 {
            errs.push("geometry.layers: must be at least 1".into());
        }
        if g.per_layer == Some(0) {
            errs.push("geometry.per_layer: must be at least 1".into());
        }
        if let Some(s) = g.lattice.layer_spacing_m {
            if !(s > 0.0) {
                errs.push(format!("geometry.lattice.layer_spacing_m: must be positive, got {s}"));
            }
        }
        match self.kind {
            ExperimentKind::PatternCut => {
                if g.spacing_lambda.len() != 1 {
                    errs.push("geometry.spacing_lambda: pattern_cut takes exactly one spacing".into());
                }
                let a = &self.azimuth;
                if !(a.step_deg > 0.0 && a.stop_deg >= a.start_deg) {
                    errs.push(format!("azimuth: need step > 0 and stop ≥ start, got {a:?}"));
                }
            }
            ExperimentKind::RateVsSnr => {
                if self.snr_db.is_empty() {
                    errs.push("snr_db: rate_vs_snr needs at least one SNR point".into());
                }
                if g.spacing_lambda.len() != 1 {
                    errs.push("geometry.spacing_lambda: rate_vs_snr takes exactly one spacing".into());
                }
                if self.snr_db.iter().any(|s| !s.is_finite()) {
                    errs.push("snr_db: entries must be finite".into());
                }
            }
            ExperimentKind::DirectivityVsSpacingFixedAperture | ExperimentKind::GainVsSpacingFixedAperture => {
                if g.per_layer.is_some() {
                    errs.push("geometry.per_layer: fixed-aperture sweeps derive the count from the spacing".into());
                }
            }
            ExperimentKind::SweepFixedCount => {
                if g.per_layer.is_none() {
                    errs.push("geometry.per_layer: sweep_fixed_count needs a fixed element count".into());
                }
            }
            ExperimentKind::RateVsSpacing => {}
        }
        if self.kind.uses_channel() {
            let c = &self.channel;
            if c.seeds.is_empty() {
                errs.push("channel.seeds: empty".into());
            }
            if c.users < 1 {
                errs.push("channel.users: must be at least 1".into());
            }
            if c.paths < c.users {
                errs.push(format!("channel.paths: L = {} < K = {}", c.paths, c.users));
            }
            if !(0.0..1.0).contains(&c.coupling_rho) {
                errs.push(format!("channel.coupling_rho: must lie in [0, 1), got {}", c.coupling_rho));
            }
            if !(c.scatterers.max_delay_s >= 0.0 && c.scatterers.power_decay_s > 0.0) {
                errs.push("channel.scatterers: delays must be ≥ 0 and the decay constant > 0".into());
            }
        }
        if let Err(e) = self.optimizer.validate() {
            errs.push(format!("optimizer: {e}"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(EhbError::InvalidSpec(errs))
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    fn geometry_at(&self, spacing_lambda: f64) -> Result<ArrayGeometry> {
        let mode = self.geometry.per_layer.map_or(ApertureMode::FixedAperture, ApertureMode::FixedCount);
        build_lattice_with(
            &self.physical,
            spacing_lambda * self.physical.wavelength_m,
            self.geometry.layers,
            mode,
            self.geometry.lattice,
        )
    }
}

/// Worker count from `EHB_WORKERS`, falling back to rayon's default.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(EhbError::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn steer(geom: &ArrayGeometry, cfg: &PhysicalConfig, d: Direction) -> CVec {
    steering_vector(geom, cfg, d.theta, d.phi)
}

/// Shared per-geometry inputs.
struct Site {
    spacing_lambda: f64,
    geom: ArrayGeometry,
    z: ImpedanceMatrix,
}

#[derive(Clone, Copy, Debug)]
struct RateSample {
    ehb: f64,
    zf_uncoupled: f64,
    zf_aware: f64,
}

fn rate_sample(spec: &ExperimentSpec, site: &Site, config: &OptimizerConfig, seed: u64) -> Result<RateSample> {
    let ch = &spec.channel;
    let n = site.geom.total_count;
    let c = if ch.coupling_rho == 0.0 {
        CouplingMatrix::identity(n)
    } else {
        CouplingMatrix::synthetic(&site.geom, &spec.physical, ch.coupling_rho)
    };
    let ones = CVec::from_element(n, Complex64::new(1.0, 0.0));
    let channel = realize(
        &site.geom,
        &spec.physical,
        &spec.geometry.pattern,
        ch.paths,
        ch.users,
        seed,
        &ch.scatterers,
        &c,
        &ones,
    )?;
    let config = OptimizerConfig { seed, ..*config };
    let problem = EhbProblem::new(&site.geom, &spec.physical, channel, c, site.z.clone(), &config)?;
    let base = zf_baseline(&problem, &config, false)?;
    let aware = zf_baseline(&problem, &config, true)?;
    let ehb = ehb_alternating(&problem, &config)?;
    Ok(RateSample {
        ehb: ehb.sum_rate_bits,
        zf_uncoupled: base.sum_rate_bits,
        zf_aware: aware.sum_rate_bits,
    })
}

struct RatePoint {
    mean: Option<RateSample>,
    failed: usize,
    notes: Vec<String>,
}

fn average(samples: &[Result<RateSample>], label: &str) -> RatePoint {
    let ok: Vec<RateSample> = samples.iter().filter_map(|s| s.as_ref().ok().copied()).collect();
    let notes = samples
        .iter()
        .filter_map(|s| s.as_ref().err())
        .map(|e| format!("{label}: {e}"))
        .collect();
    let n = ok.len() as f64;
    let mean = (!ok.is_empty()).then(|| RateSample {
        ehb: ok.iter().map(|s| s.ehb).sum::<f64>() / n,
        zf_uncoupled: ok.iter().map(|s| s.zf_uncoupled).sum::<f64>() / n,
        zf_aware: ok.iter().map(|s| s.zf_aware).sum::<f64>() / n,
    });
    RatePoint {
        mean,
        failed: samples.len() - ok.len(),
        notes,
    }
}

fn sites(spec: &ExperimentSpec) -> Result<Vec<Site>> {
    spec.geometry
        .spacing_lambda
        .par_iter()
        .map(|&d| {
            let geom = spec.geometry_at(d)?;
            let z = impedance_matrix(&geom, &spec.geometry.pattern, &spec.physical, &default_grid())?;
            Ok(Site {
                spacing_lambda: d,
                geom,
                z,
            })
        })
        .collect()
}

/// Rates for every (point, seed) pair, flattened so seeds of one point can
/// run in parallel; `configs[p]` applies to point p at `sites[site_of(p)]`.
fn rate_points(spec: &ExperimentSpec, sites: &[Site], configs: &[(usize, OptimizerConfig, String)]) -> Vec<RatePoint> {
    let seeds = &spec.channel.seeds;
    let tasks: Vec<(usize, u64)> = (0..configs.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let samples: Vec<Result<RateSample>> = tasks
        .par_iter()
        .map(|&(p, seed)| rate_sample(spec, &sites[configs[p].0], &configs[p].1, seed))
        .collect();
    samples
        .chunks(seeds.len())
        .zip(configs)
        .map(|(chunk, (_, _, label))| average(chunk, label))
        .collect()
}

fn push_rates(table: &mut ResultTable, points: &[RatePoint]) -> Result<()> {
    let col = |f: fn(&RateSample) -> f64| points.iter().map(|p| p.mean.as_ref().map_or(f64::NAN, f)).collect();
    table.push_real("ehb_bits", col(|s| s.ehb))?;
    table.push_real("zf_uncoupled_bits", col(|s| s.zf_uncoupled))?;
    table.push_real("zf_aware_bits", col(|s| s.zf_aware))?;
    table.push_real("failed_seeds", points.iter().map(|p| p.failed as f64).collect())?;
    table.metadata.failures += points.iter().map(|p| p.failed).sum::<usize>();
    table.metadata.notes.extend(points.iter().flat_map(|p| p.notes.iter().cloned()));
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct BeamPoint {
    directivity: f64,
    efficiency: f64,
    gain: f64,
    array_gain: f64,
}

fn beam_point(spec: &ExperimentSpec, site: &Site, direction: Direction) -> Result<BeamPoint> {
    let e = steer(&site.geom, &spec.physical, direction);
    let i = optimal_currents(&site.z, &e, spec.optimizer.power.analog_w)?;
    let m = radiation_metrics(
        &site.geom,
        &spec.geometry.pattern,
        &spec.physical,
        &site.z,
        &i,
        direction,
        spec.optimizer.loss_ratio,
    )?;
    Ok(BeamPoint {
        directivity: m.directivity,
        efficiency: m.efficiency,
        gain: m.gain,
        array_gain: array_gain(&site.z, &e)?,
    })
}

fn beam_points(spec: &ExperimentSpec, sites: &[Site]) -> Result<Vec<BeamPoint>> {
    let dir = spec.direction.direction();
    sites.par_iter().map(|s| beam_point(spec, s, dir)).collect()
}

fn spacing_columns(table: &mut ResultTable, sites: &[Site]) -> Result<()> {
    table.push_real("spacing_lambda", sites.iter().map(|s| s.spacing_lambda).collect())?;
    table.push_real("elements", sites.iter().map(|s| s.geom.total_count as f64).collect())
}

fn pattern_table(spec: &ExperimentSpec, site: &Site, table: &mut ResultTable) -> Result<()> {
    let az = spec.azimuth.points();
    let theta = spec.direction.theta_deg.to_radians();
    let fixed = match spec.steering {
        PatternSteering::Fixed => {
            let e = steer(&site.geom, &spec.physical, spec.direction.direction());
            Some(optimal_currents(&site.z, &e, spec.optimizer.power.analog_w)?)
        }
        PatternSteering::Envelope => None,
    };
    let points: Vec<(f64, f64)> = az
        .par_iter()
        .map(|&phi| {
            let dir = Direction::new(theta, phi.to_radians());
            let i = match &fixed {
                Some(i) => i.clone(),
                None => {
                    let e = steer(&site.geom, &spec.physical, dir);
                    optimal_currents(&site.z, &e, spec.optimizer.power.analog_w)?
                }
            };
            let m = radiation_metrics(
                &site.geom,
                &spec.geometry.pattern,
                &spec.physical,
                &site.z,
                &i,
                dir,
                spec.optimizer.loss_ratio,
            )?;
            Ok((to_db(m.directivity), to_db(m.gain)))
        })
        .collect::<Result<_>>()?;
    table.push_real("azimuth_deg", az)?;
    table.push_real("directivity_dBi", points.iter().map(|p| p.0).collect())?;
    table.push_real("realized_gain_dBi", points.iter().map(|p| p.1).collect())
}

/// Executes the sweep on a pool of `worker_count()` threads.
pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let workers = worker_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EhbError::InvalidConfig(format!("worker pool: {e}")))?;
    let start = Instant::now();
    let mut table = pool.install(|| run_inner(spec))?;
    table.metadata.workers = workers;
    table.metadata.runtime_s = start.elapsed().as_secs_f64();
    Ok(table)
}

fn run_inner(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut table = ResultTable::new(TableMetadata {
        kind: spec.kind.name().into(),
        spec_hash: spec.hash()?,
        seeds: if spec.kind.uses_channel() { spec.channel.seeds.clone() } else { Vec::new() },
        spec: Some(serde_json::to_value(spec)?),
        ..TableMetadata::default()
    });
    let sites = sites(spec)?;
    match spec.kind {
        ExperimentKind::PatternCut => pattern_table(spec, &sites[0], &mut table)?,
        ExperimentKind::DirectivityVsSpacingFixedAperture => {
            let b = beam_points(spec, &sites)?;
            spacing_columns(&mut table, &sites)?;
            table.push_real("directivity_dBi", b.iter().map(|p| to_db(p.directivity)).collect())?;
            table.push_real("array_gain_dB", b.iter().map(|p| to_db(p.array_gain)).collect())?;
            table.push_real("efficiency", b.iter().map(|p| p.efficiency).collect())?;
        }
        ExperimentKind::GainVsSpacingFixedAperture => {
            let b = beam_points(spec, &sites)?;
            spacing_columns(&mut table, &sites)?;
            table.push_real("realized_gain_dBi", b.iter().map(|p| to_db(p.gain)).collect())?;
            table.push_real("efficiency", b.iter().map(|p| p.efficiency).collect())?;
            table.push_real("directivity_dBi", b.iter().map(|p| to_db(p.directivity)).collect())?;
        }
        ExperimentKind::RateVsSpacing => {
            let configs: Vec<_> = sites
                .iter()
                .enumerate()
                .map(|(k, s)| (k, spec.optimizer, format!("d = {}λ", s.spacing_lambda)))
                .collect();
            let points = rate_points(spec, &sites, &configs);
            spacing_columns(&mut table, &sites)?;
            push_rates(&mut table, &points)?;
        }
        ExperimentKind::RateVsSnr => {
            let configs = spec
                .snr_db
                .iter()
                .map(|&snr| {
                    let p = &spec.optimizer.power;
                    let power = PowerBudget::from_snr_db(snr, p.analog_w, p.noise_variance)?;
                    Ok((0, OptimizerConfig { power, ..spec.optimizer }, format!("SNR {snr} dB")))
                })
                .collect::<Result<Vec<_>>>()?;
            let points = rate_points(spec, &sites, &configs);
            table.push_real("snr_db", spec.snr_db.clone())?;
            push_rates(&mut table, &points)?;
        }
        ExperimentKind::SweepFixedCount => {
            let b = beam_points(spec, &sites)?;
            let configs: Vec<_> = sites
                .iter()
                .enumerate()
                .map(|(k, s)| (k, spec.optimizer, format!("d = {}λ", s.spacing_lambda)))
                .collect();
            let points = rate_points(spec, &sites, &configs);
            spacing_columns(&mut table, &sites)?;
            table.push_real("directivity_dBi", b.iter().map(|p| to_db(p.directivity)).collect())?;
            table.push_real("efficiency", b.iter().map(|p| p.efficiency).collect())?;
            table.push_real("realized_gain_dBi", b.iter().map(|p| to_db(p.gain)).collect())?;
            push_rates(&mut table, &points)?;
        }
    }
    Ok(table)
}

/// `run` followed by writing the CSV and sidecar to `csv`.
pub fn run_to(spec: &ExperimentSpec, csv: &Path) -> Result<ResultTable> {
    let table = run(spec)?;
    table.write(csv)?;
    Ok(table)
}
