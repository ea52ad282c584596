use serde::{Deserialize, Serialize};

use super::{sum_rate_bits, EhbProblem, OptimizerConfig};
use crate::conic::{solve, ConicProblem, ConicSolution, HermitianVar, SocBlock, SolverConfig, SolverStatus};
use crate::linalg::{hermitian_eigen, hermitize};
use crate::{CMat, CVec, Complex64, Result};

/// Anchors below this SINR are treated as switched-off users.
const INACTIVE_SINR: f64 = 1e-9;
/// Blocks with trace below this fraction of their budget skip the rank check.
pub(crate) const ZERO_BLOCK: f64 = 1e-5;

/// Lifted AO state: F_k = w_k w_k^H and R = i* iᵀ, plus the matrices
/// that are linear in whichever of R or F is being optimized.
#[derive(Clone, Debug)]
pub struct SdrState {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub f_blocks: Vec<CMat>,
    pub r: CMat,
    /// H_k for the current R.
    pub h_cache: Vec<CMat>,
    /// Q_{k,j} for the current F_j.
    pub q_cache: Vec<Vec<CMat>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Sum rate (bits) after every accepted SCA iteration.
    pub rates: Vec<f64>,
    pub sca_iterations: usize,
    /// max σ₂/σ₁ over the non-vanishing blocks of each accepted solve.
    pub rank_ratios: Vec<f64>,
    pub zero_blocks: usize,
    pub solver_iterations: usize,
    pub diagnostics: Vec<String>,
}

fn tr_prod(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            s += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    s
}

fn psd_part(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for (k, &l) in vals.iter().enumerate() {
        if l > 0.0 {
            let v = vecs.column(k);
            out += &v * v.adjoint() * Complex64::new(l, 0.0);
        }
    }
    out
}

/// σ₂/σ₁ of a Hermitian matrix.
pub(crate) fn rank_ratio(m: &CMat) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    let mut mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    if mags.len() < 2 || mags[0] == 0.0 {
        0.0
    } else {
        mags[1] / mags[0]
    }
}

impl SdrState {
    pub fn from_vectors(problem: &EhbProblem, i: &CVec, w: &CMat) -> Self {
        let ic = i.conjugate();
        let r = &ic * ic.adjoint();
        let f_blocks = w.column_iter().map(|c| &c * c.adjoint()).collect();
        let mut state = Self {
            t: Vec::new(),
            u: Vec::new(),
            f_blocks,
            r,
            h_cache: Vec::new(),
            q_cache: Vec::new(),
        };
        state.refresh_h(problem);
        state.refresh_q(problem);
        state
    }

    pub fn refresh_h(&mut self, problem: &EhbProblem) {
        self.h_cache = (0..problem.users()).map(|k| problem.h_matrix(&self.r, k)).collect();
    }

    pub fn refresh_q(&mut self, problem: &EhbProblem) {
        self.q_cache = (0..problem.users())
            .map(|k| self.f_blocks.iter().map(|f| problem.q_matrix(f, k)).collect())
            .collect();
    }

    /// (signal, interference + noise) per user from H_k and F.
    pub fn sinr_parts(&self, noise: f64) -> Vec<(f64, f64)> {
        let k = self.f_blocks.len();
        (0..k)
            .map(|a| {
                let h = &self.h_cache[a];
                let signal = tr_prod(h, &self.f_blocks[a]);
                let interference: f64 = (0..k).filter(|&b| b != a).map(|b| tr_prod(h, &self.f_blocks[b])).sum();
                (signal, interference + noise)
            })
            .collect()
    }

    pub fn sinrs(&self, noise: f64) -> Vec<f64> {
        self.sinr_parts(noise).iter().map(|(s, d)| s.max(0.0) / d).collect()
    }

    pub fn rate_bits(&self, noise: f64) -> f64 {
        sum_rate_bits(&self.sinrs(noise))
    }

    fn set_anchors(&mut self, noise: f64) {
        let parts = self.sinr_parts(noise);
        self.t = parts.iter().map(|(s, d)| s.max(0.0) / d).collect();
        self.u = parts.iter().map(|(_, d)| *d).collect();
    }
}

/// Affine expression Σ c_v z_v + constant.
#[derive(Clone, Debug)]
struct Affine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    fn var(v: usize) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    fn combine(&self, other: &Affine, sign: f64) -> Affine {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|&(v, c)| (v, sign * c)));
        Affine {
            terms,
            constant: self.constant + sign * other.constant,
        }
    }

    fn push_row(&self, soc: &mut SocBlock, row: usize, scale: f64) {
        for &(v, c) in &self.terms {
            soc.add(row, v, scale * c);
        }
        soc.set_offset(row, -scale * self.constant);
    }
}

/// Adds τ ≤ (Π leaves)^{1/K} through a binary tree of 3-dimensional cones
/// [a + b; 2w; a − b] (w² ≤ a b) and returns τ.
fn geometric_mean(problem: &mut ConicProblem, leaves: Vec<Affine>) -> usize {
    let tau = problem.add_variable();
    if leaves.len() == 1 {
        let mut row = leaves[0].terms.clone();
        row.push((tau, -1.0));
        problem.add_linear(&row, -leaves[0].constant);
        return tau;
    }
    let width = leaves.len().next_power_of_two();
    let mut level = leaves;
    while level.len() < width {
        level.push(Affine::var(tau));
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / 2);
        for pair in level.chunks(2) {
            let w = problem.add_variable();
            let mut soc = SocBlock::new(3);
            pair[0].combine(&pair[1], 1.0).push_row(&mut soc, 0, 1.0);
            Affine::var(w).push_row(&mut soc, 1, 2.0);
            pair[0].combine(&pair[1], -1.0).push_row(&mut soc, 2, 1.0);
            problem.add_soc(soc);
            next.push(Affine::var(w));
        }
        level = next;
    }
    let mut row = level[0].terms.clone();
    row.push((tau, -1.0));
    problem.add_linear(&row, -level[0].constant);
    tau
}

/// One convex restriction of the lifted rate problem over `blocks`
/// normalized matrices with Σ Tr ≤ 1. Per user, signal and interference are
/// Σ Tr(M V_b) over the listed (block, M); t_k ≤ signal/ũ_k is enforced by
/// the AM-GM bound (a/2)ũ² + t²/(2a) ≤ signal with a = t^(n)/ũ^(n).
struct Subproblem<'a> {
    blocks: usize,
    n: usize,
    signal: &'a [Vec<(usize, CMat)>],
    interference: &'a [Vec<(usize, CMat)>],
    anchors: &'a [(f64, f64)],
}

struct SubSolution {
    blocks: Vec<CMat>,
    solution: ConicSolution,
}

impl Subproblem<'_> {
    fn solve(&self, solver: &SolverConfig) -> Result<Option<SubSolution>> {
        let mut prob = ConicProblem::new(0);
        let vars: Vec<HermitianVar> = (0..self.blocks).map(|_| HermitianVar::new(&mut prob, self.n)).collect();
        let form = |list: &[(usize, CMat)]| -> Affine {
            let mut terms = Vec::new();
            for (b, m) in list {
                terms.extend(vars[*b].trace_inner(m));
            }
            Affine { terms, constant: 0.0 }
        };
        let mut leaves = Vec::new();
        for (k, &(t_n, u_n)) in self.anchors.iter().enumerate() {
            if t_n < INACTIVE_SINR {
                continue;
            }
            let t = prob.add_variable();
            let u = prob.add_variable();
            let interference = form(&self.interference[k]);
            let mut row = vec![(u, 1.0)];
            row.extend(interference.terms.iter().map(|&(v, c)| (v, -c)));
            prob.add_linear(&row, 1.0);
            let a = t_n / u_n;
            let signal = form(&self.signal[k]);
            let mut soc = SocBlock::new(4);
            signal.combine(&Affine { terms: vec![], constant: 1.0 }, 1.0).push_row(&mut soc, 0, 1.0);
            soc.add(1, u, (2.0 * a).sqrt());
            soc.add(2, t, (2.0 / a).sqrt());
            signal.combine(&Affine { terms: vec![], constant: 1.0 }, -1.0).push_row(&mut soc, 3, 1.0);
            prob.add_soc(soc);
            leaves.push(Affine {
                terms: vec![(t, 1.0)],
                constant: 1.0,
            });
        }
        if leaves.is_empty() {
            return Ok(None);
        }
        let budget: Vec<(usize, f64)> = vars.iter().flat_map(|v| v.trace()).map(|(v, c)| (v, -c)).collect();
        prob.add_linear(&budget, -1.0);
        let tau = geometric_mean(&mut prob, leaves);
        prob.objective[tau] = -1.0;
        let solution = solve(&prob, solver)?;
        let acceptable = match solution.status {
            SolverStatus::Optimal => true,
            SolverStatus::MaxIterations | SolverStatus::NumericalFailure => {
                solution.primal_infeas < 1e-6 && solution.dual_infeas < 1e-4 && solution.duality_gap < 1e-6
            }
            _ => false,
        };
        if !acceptable {
            return Ok(Some(SubSolution {
                blocks: Vec::new(),
                solution,
            }));
        }
        let blocks = vars.iter().map(|v| hermitize(&v.reconstruct(&solution.z))).collect();
        Ok(Some(SubSolution { blocks, solution }))
    }
}

#[derive(Clone, Copy)]
enum Side {
    Digital,
    Analog,
}

fn sca_loop(state: &mut SdrState, problem: &EhbProblem, config: &OptimizerConfig, side: Side) -> Result<StepReport> {
    let noise = config.power.noise_variance;
    let users = problem.users();
    let n = problem.antennas();
    let mut report = StepReport::default();
    match side {
        Side::Digital => state.refresh_h(problem),
        Side::Analog => state.refresh_q(problem),
    }
    let mut current = state.rate_bits(noise);
    for _ in 0..config.sca_max_iterations {
        report.sca_iterations += 1;
        state.set_anchors(noise);
        let anchors: Vec<(f64, f64)> = state.t.iter().zip(&state.u).map(|(t, u)| (*t, u / noise)).collect();
        let (budget, blocks, signal, interference) = match side {
            Side::Digital => {
                let p = config.power.digital_w;
                let scaled: Vec<CMat> = state.h_cache.iter().map(|h| h * Complex64::new(p / noise, 0.0)).collect();
                let signal: Vec<Vec<(usize, CMat)>> = (0..users).map(|k| vec![(k, scaled[k].clone())]).collect();
                let interference: Vec<Vec<(usize, CMat)>> = (0..users)
                    .map(|k| {
                        (0..users)
                            .filter(|&j| j != k)
                            .map(|j| (j, scaled[k].clone()))
                            .collect()
                    })
                    .collect();
                (p, users, signal, interference)
            }
            Side::Analog => {
                let p = config.power.analog_w;
                let s = Complex64::new(p / noise, 0.0);
                let signal: Vec<Vec<(usize, CMat)>> =
                    (0..users).map(|k| vec![(0, &state.q_cache[k][k] * s)]).collect();
                let interference: Vec<Vec<(usize, CMat)>> = (0..users)
                    .map(|k| {
                        let mut sum = CMat::zeros(n, n);
                        for j in (0..users).filter(|&j| j != k) {
                            sum += &state.q_cache[k][j];
                        }
                        vec![(0, sum * s)]
                    })
                    .collect();
                (p, 1, signal, interference)
            }
        };
        let sub = Subproblem {
            blocks,
            n,
            signal: &signal,
            interference: &interference,
            anchors: &anchors,
        };
        let Some(sol) = sub.solve(&config.solver)? else {
            report.diagnostics.push("no active users; step skipped".into());
            break;
        };
        report.solver_iterations += sol.solution.iterations;
        if sol.blocks.is_empty() {
            report.diagnostics.push(format!(
                "subproblem not solved ({:?}: {}; residuals {:.1e}/{:.1e}, gap {:.1e}); previous state kept",
                sol.solution.status,
                sol.solution.message,
                sol.solution.primal_infeas,
                sol.solution.dual_infeas,
                sol.solution.duality_gap
            ));
            break;
        }
        let mut candidate = state.clone();
        let mut worst = 0.0f64;
        let mut zeros = 0;
        let scaled: Vec<CMat> = sol.blocks.iter().map(|b| b * Complex64::new(budget, 0.0)).collect();
        for b in &scaled {
            if b.trace().re <= ZERO_BLOCK * budget {
                zeros += 1;
            } else {
                worst = worst.max(rank_ratio(b));
            }
        }
        match side {
            Side::Digital => candidate.f_blocks = scaled.iter().map(psd_part).collect(),
            Side::Analog => {
                candidate.r = psd_part(&scaled[0]);
                candidate.refresh_h(problem);
            }
        }
        let rate = candidate.rate_bits(noise);
        if !(rate >= current) {
            report
                .diagnostics
                .push(format!("SCA step rejected: rate {rate:.9} below {current:.9}"));
            break;
        }
        *state = candidate;
        report.rank_ratios.push(worst);
        report.zero_blocks += zeros;
        report.rates.push(rate);
        let gain = rate - current;
        current = rate;
        if gain < config.sca_tol {
            break;
        }
    }
    state.set_anchors(noise);
    if let Side::Digital = side {
        state.refresh_q(problem);
    }
    Ok(report)
}

/// Digital block with R fixed: maximize the rate over F_k ⪰ 0,
/// Σ Tr F_k ≤ P_digital.
pub fn digital_step_p5(state: &mut SdrState, problem: &EhbProblem, config: &OptimizerConfig) -> Result<StepReport> {
    sca_loop(state, problem, config, Side::Digital)
}

/// Analog block with F fixed: maximize the rate over R ⪰ 0, Tr R ≤ P_analog.
pub fn analog_step_p6(state: &mut SdrState, problem: &EhbProblem, config: &OptimizerConfig) -> Result<StepReport> {
    sca_loop(state, problem, config, Side::Analog)
}
