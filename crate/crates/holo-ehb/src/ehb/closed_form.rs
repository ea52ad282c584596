use std::time::Instant;

use super::{effective_channel, steering_sum, BeamformingSolution, EhbProblem, OptimizerConfig};
use crate::array_model::{ArrayGeometry, PhysicalConfig};
use crate::channel::ChannelRealization;
use crate::linalg::{condition_number, hermitian_eigen, pinv};
use crate::radiation::{coupled_optimal_currents, optimal_currents};
use crate::{CMat, CVec, Complex64, EhbError, Result};

/// Sum of steering vectors toward each user's strongest path.
pub fn init_direction(geom: &ArrayGeometry, cfg: &PhysicalConfig, channel: &ChannelRealization) -> Result<CVec> {
    let dirs: Vec<(f64, f64)> = channel
        .strongest_paths()
        .into_iter()
        .map(|l| (channel.scatterers[l].theta, channel.scatterers[l].phi))
        .collect();
    let e = steering_sum(geom, cfg, &dirs);
    if !(e.norm() > 1e-9 * (geom.total_count as f64).sqrt()) {
        return Err(EhbError::Degenerate("steering vectors toward the users cancel".into()));
    }
    Ok(e)
}

/// W = H^H (H H^H)^{-1} with every column scaled to power P/K. Falls back
/// to the pseudo-inverse when H H^H is singular and says so.
pub fn zf_precoder(h: &CMat, digital_w: f64) -> (CMat, Option<String>) {
    let k = h.nrows();
    let gram = h * h.adjoint();
    let cond = condition_number(&gram);
    let (mut w, note) = match gram.clone().cholesky() {
        Some(ch) if cond < 1e12 => (h.adjoint() * ch.inverse(), None),
        _ => {
            let p = pinv(h, 1e-12);
            (
                p.matrix,
                Some(format!("ZF: effective channel rank {} of {k}, using pseudo-inverse", p.rank)),
            )
        }
    };
    let per = (digital_w / k as f64).sqrt();
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col *= Complex64::new(per / n, 0.0);
        }
    }
    (w, note)
}

/// ZF benchmark. Currents are μ Z^{-1} e (`coupling_aware = false`, designed
/// as if there were no coupling) or μ C^{-1} Z^{-1} e; the precoder is ZF
/// on the channel the design believes in. SINRs use the true coupled channel.
pub fn zf_baseline(problem: &EhbProblem, config: &OptimizerConfig, coupling_aware: bool) -> Result<BeamformingSolution> {
    let start = Instant::now();
    let n = problem.antennas();
    if problem.users() > n {
        return Err(EhbError::InvalidConfig(format!(
            "ZF needs K ≤ N_T, got K = {} and N_T = {n}",
            problem.users()
        )));
    }
    let p_a = config.power.analog_w;
    let (i, design_c) = if coupling_aware {
        (
            coupled_optimal_currents(&problem.coupling, &problem.impedance, &problem.direction, p_a)?,
            problem.coupling.entries.clone(),
        )
    } else {
        (
            optimal_currents(&problem.impedance, &problem.direction, p_a)?,
            CMat::identity(n, n),
        )
    };
    let h_design = effective_channel(&design_c, &i, &problem.x);
    let (w, note) = zf_precoder(&h_design, config.power.digital_w);
    let mut sol = BeamformingSolution::from_vectors(problem, i, w, config.power.noise_variance);
    sol.diagnostics.extend(note);
    sol.runtime_s = start.elapsed().as_secs_f64();
    Ok(sol)
}

/// K = 1 optimum: with A = C diag(X₁), i is the principal eigenvector of
/// A^H A and w that of conj(A A^H), scaled to the two budgets.
pub fn single_user_solve(problem: &EhbProblem, config: &OptimizerConfig) -> Result<BeamformingSolution> {
    let start = Instant::now();
    if problem.users() != 1 {
        return Err(EhbError::InvalidConfig(format!(
            "single-user solve needs K = 1, got {}",
            problem.users()
        )));
    }
    let x = problem.x.column(0).into_owned();
    let a = &problem.coupling.entries * CMat::from_diagonal(&x);
    let (vals_i, vecs_i) = hermitian_eigen(&(a.adjoint() * &a));
    if !(vals_i[0] > 0.0) {
        return Err(EhbError::Degenerate("zero channel".into()));
    }
    let (_, vecs_w) = hermitian_eigen(&(&a * a.adjoint()).conjugate());
    let i = vecs_i.column(0) * Complex64::new(config.power.analog_w.sqrt(), 0.0);
    let w = CMat::from_column_slice(
        x.len(),
        1,
        (vecs_w.column(0) * Complex64::new(config.power.digital_w.sqrt(), 0.0)).as_slice(),
    );
    let mut sol = BeamformingSolution::from_vectors(problem, i, w, config.power.noise_variance);
    sol.runtime_s = start.elapsed().as_secs_f64();
    Ok(sol)
}
