//! Hybrid beamforming: analog currents i shape the array excitation, the
//! digital precoder W_BB (N_T × K) maps user streams onto it.
//!
//! User k sees h_kᵀ = iᵀ diag(X_k) Cᵀ with X = G S, so the received
//! amplitude of stream j is h_kᵀ w_j and all powers carry the radiation
//! efficiency e_rad.

mod alternating;
mod closed_form;
mod sdr;

pub use alternating::ehb_alternating;
pub use closed_form::{init_direction, single_user_solve, zf_baseline, zf_precoder};
pub use sdr::{analog_step_p6, digital_step_p5, SdrState, StepReport};

use serde::{Deserialize, Serialize};

use crate::array_model::{steering_vector, ArrayGeometry, PhysicalConfig, PowerBudget};
use crate::channel::ChannelRealization;
use crate::conic::SolverConfig;
use crate::radiation::{optimal_currents, radiation_efficiency, ImpedanceMatrix};
use crate::swe_coupling::CouplingMatrix;
use crate::{CMat, CVec, Complex64, EhbError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// AO stops once the sum rate changes by less than this (bits/s/Hz).
    pub epsilon: f64,
    pub max_outer_iterations: usize,
    pub sca_max_iterations: usize,
    pub sca_tol: f64,
    pub power: PowerBudget,
    /// Ohmic loss per unit ‖i‖² relative to the normalized radiation resistance.
    pub loss_ratio: f64,
    pub solver: SolverConfig,
    pub randomization_candidates: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_outer_iterations: 30,
            sca_max_iterations: 20,
            sca_tol: 1e-4,
            power: PowerBudget::default(),
            loss_ratio: 0.01,
            solver: SolverConfig {
                gap_tol: 1e-12,
                feas_tol: 1e-7,
                ..SolverConfig::default()
            },
            randomization_candidates: 100,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(EhbError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_outer_iterations < 1 || self.sca_max_iterations < 1 {
            return Err(EhbError::InvalidConfig("iteration caps must be at least 1".into()));
        }
        if !(self.sca_tol > 0.0 && self.loss_ratio >= 0.0) {
            return Err(EhbError::InvalidConfig("sca_tol must be > 0 and loss_ratio ≥ 0".into()));
        }
        self.power.validate()?;
        self.solver.validate()
    }
}

/// Everything the optimizers need about one channel instance.
#[derive(Clone, Debug)]
pub struct EhbProblem {
    pub channel: ChannelRealization,
    pub coupling: CouplingMatrix,
    pub impedance: ImpedanceMatrix,
    /// Excitation direction e used by the initial and baseline currents.
    pub direction: CVec,
    pub e_rad: f64,
    /// X = G S.
    pub x: CMat,
}

impl EhbProblem {
    /// e is the sum of steering vectors toward every user's strongest path;
    /// e_rad is the efficiency of the uncoupled maximum-directivity currents
    /// for that e and is shared by every scheme evaluated on this instance.
    pub fn new(
        geom: &ArrayGeometry,
        cfg: &PhysicalConfig,
        channel: ChannelRealization,
        coupling: CouplingMatrix,
        impedance: ImpedanceMatrix,
        config: &OptimizerConfig,
    ) -> Result<Self> {
        let direction = init_direction(geom, cfg, &channel)?;
        Self::with_direction(channel, coupling, impedance, direction, config)
    }

    pub fn with_direction(
        channel: ChannelRealization,
        coupling: CouplingMatrix,
        impedance: ImpedanceMatrix,
        direction: CVec,
        config: &OptimizerConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n = channel.antennas();
        if coupling.size() != n || impedance.size() != n || direction.len() != n {
            return Err(EhbError::Dimension(format!(
                "channel has {n} antennas, C {}, Z {}, e {}",
                coupling.size(),
                impedance.size(),
                direction.len()
            )));
        }
        let i0 = optimal_currents(&impedance, &direction, config.power.analog_w)?;
        let e_rad = radiation_efficiency(&impedance, &i0, config.loss_ratio)?;
        let x = channel.x();
        Ok(Self {
            channel,
            coupling,
            impedance,
            direction,
            e_rad,
            x,
        })
    }

    pub fn users(&self) -> usize {
        self.x.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.x.nrows()
    }

    /// H = (C diag(i) X)ᵀ, one row per user.
    pub fn effective_channel(&self, i: &CVec) -> CMat {
        effective_channel(&self.coupling.entries, i, &self.x)
    }

    /// M_kj = e_rad |h_kᵀ w_j|².
    pub fn gain_matrix(&self, i: &CVec, w: &CMat) -> CMat {
        let h = self.effective_channel(i);
        (h * w).map(|v| Complex64::new(self.e_rad * v.norm_sqr(), 0.0))
    }

    pub fn sinrs(&self, i: &CVec, w: &CMat, noise: f64) -> Vec<f64> {
        let g = self.gain_matrix(i, w);
        sinrs_from_gains(&g, noise)
    }

    /// e_rad C* diag(X_k*) R diag(X_k) Cᵀ, so that Tr(H_k F) is the power
    /// user k receives from F = w w^H when R = i* iᵀ.
    pub fn h_matrix(&self, r: &CMat, k: usize) -> CMat {
        let c = &self.coupling.entries;
        let xk = self.x.column(k);
        let n = self.antennas();
        let mid = CMat::from_fn(n, n, |a, b| xk[a].conj() * r[(a, b)] * xk[b]);
        c.conjugate() * mid * c.transpose() * Complex64::new(self.e_rad, 0.0)
    }

    /// e_rad diag(X_k) Cᵀ F C* diag(X_k*), so that Tr(Q R) = Tr(H_k F).
    pub fn q_matrix(&self, f: &CMat, k: usize) -> CMat {
        let c = &self.coupling.entries;
        let xk = self.x.column(k);
        let inner = c.transpose() * f * c.conjugate();
        let n = self.antennas();
        CMat::from_fn(n, n, |a, b| xk[a] * inner[(a, b)] * xk[b].conj() * self.e_rad)
    }
}

pub fn effective_channel(c: &CMat, i: &CVec, x: &CMat) -> CMat {
    let mut ci = c.clone();
    for (col, v) in i.iter().enumerate() {
        ci.column_mut(col).iter_mut().for_each(|z| *z *= v);
    }
    (ci * x).transpose()
}

fn sinrs_from_gains(g: &CMat, noise: f64) -> Vec<f64> {
    let k = g.nrows();
    (0..k)
        .map(|a| {
            let signal = g[(a, a)].re;
            let interference: f64 = (0..g.ncols()).filter(|&b| b != a).map(|b| g[(a, b)].re).sum();
            signal / (interference + noise)
        })
        .collect()
}

/// γ_k from the transmit-side form: signal |h_kᵀ w_k|² over the other
/// streams' leakage plus noise, all scaled by e_rad.
#[allow(clippy::too_many_arguments)]
pub fn sinr_multiuser(
    channel: &ChannelRealization,
    c: &CouplingMatrix,
    i: &CVec,
    w: &CMat,
    e_rad: f64,
    noise: f64,
    k: usize,
) -> Result<f64> {
    let n = channel.antennas();
    if c.size() != n || i.len() != n || w.nrows() != n || w.ncols() != channel.users() || k >= channel.users() {
        return Err(EhbError::Dimension(format!(
            "N_T = {n}, K = {}: C {}, i {}, W {:?}, k {k}",
            channel.users(),
            c.size(),
            i.len(),
            w.shape()
        )));
    }
    if !(noise > 0.0) {
        return Err(EhbError::InvalidConfig("noise variance must be positive".into()));
    }
    let h = channel.effective_channel(c, i)?;
    let row = h.row(k);
    let power = |j: usize| e_rad * (row * w.column(j))[(0, 0)].norm_sqr();
    let interference: f64 = (0..w.ncols()).filter(|&j| j != k).map(power).sum();
    Ok(power(k) / (interference + noise))
}

/// Same SINR through the commuted form |iᵀ diag(X_k) Cᵀ w_j|².
#[allow(clippy::too_many_arguments)]
pub fn sinr_diag_form(
    channel: &ChannelRealization,
    c: &CouplingMatrix,
    i: &CVec,
    w: &CMat,
    e_rad: f64,
    noise: f64,
    k: usize,
) -> Result<f64> {
    let x = channel.x();
    let xk = x.column(k);
    let dk = CMat::from_diagonal(&xk.into_owned());
    let a = i.transpose() * dk * c.entries.transpose();
    let power = |j: usize| e_rad * (&a * w.column(j))[(0, 0)].norm_sqr();
    let interference: f64 = (0..w.ncols()).filter(|&j| j != k).map(power).sum();
    Ok(power(k) / (interference + noise))
}

pub fn sum_rate_bits(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|g| (1.0 + g).log2()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformingSolution {
    #[serde(with = "crate::io::cvec")]
    pub analog_currents: CVec,
    #[serde(with = "crate::io::cmat")]
    pub digital_precoder: CMat,
    pub per_user_sinr: Vec<f64>,
    pub sum_rate_bits: f64,
    /// Sum rate after initialization and after every outer iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Largest σ₂/σ₁ over the blocks of every accepted SDR solve.
    pub block_rank_ratios: Vec<f64>,
    /// Blocks skipped in the rank check because their trace vanished.
    pub zero_blocks: usize,
    pub randomized: bool,
    pub diagnostics: Vec<String>,
    pub runtime_s: f64,
}

#[derive(Serialize)]
struct SolutionExport<'a> {
    analog_currents: Vec<[f64; 2]>,
    digital_precoder: crate::io::ComplexMatrixJson,
    per_user_sinr_db: Vec<f64>,
    sum_rate_bits: f64,
    trace: &'a [f64],
    converged: bool,
    runtime_s: f64,
}

impl BeamformingSolution {
    pub(crate) fn from_vectors(problem: &EhbProblem, i: CVec, w: CMat, noise: f64) -> Self {
        let per_user_sinr = problem.sinrs(&i, &w, noise);
        let sum_rate_bits = sum_rate_bits(&per_user_sinr);
        Self {
            analog_currents: i,
            digital_precoder: w,
            per_user_sinr,
            sum_rate_bits,
            trace: vec![sum_rate_bits],
            converged: true,
            outer_iterations: 0,
            block_rank_ratios: Vec::new(),
            zero_blocks: 0,
            randomized: false,
            diagnostics: Vec::new(),
            runtime_s: 0.0,
        }
    }

    /// Compact JSON export with per-user SINR in dB.
    pub fn to_json(&self) -> Result<String> {
        let export = SolutionExport {
            analog_currents: crate::io::vector_to_pairs(&self.analog_currents),
            digital_precoder: (&self.digital_precoder).into(),
            per_user_sinr_db: self.per_user_sinr.iter().map(|g| 10.0 * g.log10()).collect(),
            sum_rate_bits: self.sum_rate_bits,
            trace: &self.trace,
            converged: self.converged,
            runtime_s: self.runtime_s,
        };
        Ok(serde_json::to_string_pretty(&export)?)
    }
}

pub(crate) fn steering_sum(geom: &ArrayGeometry, cfg: &PhysicalConfig, dirs: &[(f64, f64)]) -> CVec {
    let mut e = CVec::zeros(geom.total_count);
    for &(theta, phi) in dirs {
        e += steering_vector(geom, cfg, theta, phi);
    }
    e
}
