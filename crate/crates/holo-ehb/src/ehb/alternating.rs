use std::time::Instant;

use super::sdr::{rank_ratio, ZERO_BLOCK};
use super::{analog_step_p6, digital_step_p5, sum_rate_bits, zf_baseline, BeamformingSolution, EhbProblem, OptimizerConfig, SdrState};
use crate::channel::seeded_rng;
use crate::conic::{gaussian_randomization, rank_one_extract, RANK_ONE_TOL};
use crate::{CMat, CVec, Complex64, Result};

fn scale_to(v: CVec, power: f64) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v * Complex64::new(power.sqrt() / n, 0.0)
    } else {
        v
    }
}

fn scale_matrix_to(w: CMat, power: f64) -> CMat {
    let n = w.norm();
    if n > 0.0 {
        w * Complex64::new(power.sqrt() / n, 0.0)
    } else {
        w
    }
}

/// Alternates the digital and analog SDR blocks from the coupling-aware ZF
/// start until the sum rate moves by less than ε, then extracts vectors.
pub fn ehb_alternating(problem: &EhbProblem, config: &OptimizerConfig) -> Result<BeamformingSolution> {
    let start = Instant::now();
    config.validate()?;
    let noise = config.power.noise_variance;
    let init = zf_baseline(problem, config, true)?;
    let mut state = SdrState::from_vectors(problem, &init.analog_currents, &init.digital_precoder);
    let mut trace = vec![state.rate_bits(noise)];
    let mut diagnostics = init.diagnostics.clone();
    let mut rank_ratios = Vec::new();
    let mut zero_blocks = 0;
    let mut converged = false;
    let mut outer = 0;
    while outer < config.max_outer_iterations {
        outer += 1;
        for report in [
            digital_step_p5(&mut state, problem, config)?,
            analog_step_p6(&mut state, problem, config)?,
        ] {
            rank_ratios.extend(report.rank_ratios);
            zero_blocks += report.zero_blocks;
            diagnostics.extend(report.diagnostics.into_iter().map(|d| format!("iteration {outer}: {d}")));
        }
        let rate = state.rate_bits(noise);
        let prev = *trace.last().expect("trace starts with the initial rate");
        trace.push(rate);
        if (rate - prev).abs() < config.epsilon {
            converged = true;
            break;
        }
    }
    if !converged {
        diagnostics.push(format!("no convergence within {} outer iterations", config.max_outer_iterations));
    }
    if let Some(w) = trace.windows(2).find(|w| w[1] < w[0] - 1e-6) {
        converged = false;
        diagnostics.push(format!("objective decreased from {} to {}", w[0], w[1]));
    }

    let mut rng = seeded_rng(config.seed);
    let mut randomized = false;
    let r_ext = rank_one_extract(&state.r, RANK_ONE_TOL)?;
    let mut i = scale_to(r_ext.vector.conjugate(), config.power.analog_w);
    let users = problem.users();
    let n = problem.antennas();
    let mut w = CMat::zeros(n, users);
    let mut pending = Vec::new();
    for (k, f) in state.f_blocks.iter().enumerate() {
        let ext = rank_one_extract(f, RANK_ONE_TOL)?;
        w.set_column(k, &ext.vector);
        let vanishing = f.trace().re <= ZERO_BLOCK * config.power.digital_w;
        if !ext.is_rank_one && !vanishing {
            pending.push(k);
        }
    }
    for k in pending {
        randomized = true;
        diagnostics.push(format!("F_{k} not rank one (σ₂/σ₁ = {:.2e}); Gaussian randomization", rank_ratio(&state.f_blocks[k])));
        let best = gaussian_randomization(
            &state.f_blocks[k],
            config.randomization_candidates,
            |v| {
                let mut trial = w.clone();
                trial.set_column(k, v);
                sum_rate_bits(&problem.sinrs(&i, &trial, noise))
            },
            &mut rng,
        )?;
        w.set_column(k, &best);
    }
    let w = scale_matrix_to(w, config.power.digital_w);
    if !r_ext.is_rank_one {
        randomized = true;
        diagnostics.push(format!("R not rank one (σ₂/σ₁ = {:.2e}); Gaussian randomization", r_ext.ratio));
        let best = gaussian_randomization(
            &state.r,
            config.randomization_candidates,
            |v| {
                let cand = scale_to(v.conjugate(), config.power.analog_w);
                sum_rate_bits(&problem.sinrs(&cand, &w, noise))
            },
            &mut rng,
        )?;
        i = scale_to(best.conjugate(), config.power.analog_w);
    }

    let mut sol = BeamformingSolution::from_vectors(problem, i, w, noise);
    sol.trace = trace;
    sol.converged = converged;
    sol.outer_iterations = outer;
    sol.block_rank_ratios = rank_ratios;
    sol.zero_blocks = zero_blocks;
    sol.randomized = randomized;
    sol.diagnostics = diagnostics;
    sol.runtime_s = start.elapsed().as_secs_f64();
    Ok(sol)
}
