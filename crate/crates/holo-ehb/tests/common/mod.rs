#![allow(dead_code)]

use holo_ehb::conic::{ConicProblem, PsdBlock, SocBlock, SparseSym};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Certified {
    pub problem: ConicProblem,
    pub optimum: f64,
    pub z_star: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    (&a + a.transpose()) * 0.5
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| normal(rng)).qr().q()
}

/// Random problem with an optimal primal-dual pair built by hand: pick the
/// optimal point z*, complementary slacks S* and duals Z*, then set the
/// offsets so that S* is the slack at z* and the objective so that Z* is
/// dual feasible. The optimum is cᵀz* = ⟨B, Z*⟩.
pub fn certified(seed: u64) -> Certified {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variant = seed % 3;
    let psd_sizes: Vec<usize> = match variant {
        0 => vec![rng.random_range(3..=5), 4],
        1 => vec![],
        _ => vec![rng.random_range(2..=4)],
    };
    let soc_sizes: Vec<usize> = match variant {
        0 => vec![],
        1 => vec![rng.random_range(3..=5), 3],
        _ => vec![rng.random_range(3..=5)],
    };
    let lin_rows = if variant == 1 { 3 } else { 2 };
    let dims: usize = psd_sizes.iter().map(|n| n * (n + 1) / 2).sum::<usize>()
        + soc_sizes.iter().sum::<usize>()
        + lin_rows;
    let m = rng.random_range(3..=(dims - 2).min(8));
    let z_star: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
    let zs = DVector::from_vec(z_star.clone());
    let mut c = DVector::<f64>::zeros(m);
    let mut opt_dual = 0.0;
    let mut problem = ConicProblem::new(m);

    for &n in &psd_sizes {
        let coeffs: Vec<DMatrix<f64>> = (0..m).map(|_| random_sym(&mut rng, n)).collect();
        let q = random_orthogonal(&mut rng, n);
        let r = rng.random_range(1..n);
        let mut sd = DVector::zeros(n);
        let mut zd = DVector::zeros(n);
        for k in 0..n {
            if k < r {
                sd[k] = rng.random_range(0.5..2.0);
            } else {
                zd[k] = rng.random_range(0.5..2.0);
            }
        }
        let s_star = &q * DMatrix::from_diagonal(&sd) * q.transpose();
        let z_dual = &q * DMatrix::from_diagonal(&zd) * q.transpose();
        let mut lhs = DMatrix::zeros(n, n);
        for (i, a) in coeffs.iter().enumerate() {
            lhs += a * zs[i];
            c[i] += a.dot(&z_dual);
        }
        let b = lhs - s_star;
        opt_dual += b.dot(&z_dual);
        let mut blk = PsdBlock::new(n);
        for (i, a) in coeffs.iter().enumerate() {
            blk.set_coefficient(i, SparseSym::from_dense(a).unwrap());
        }
        blk.offset = SparseSym::from_dense(&((&b + b.transpose()) * 0.5)).unwrap();
        problem.add_psd(blk);
    }

    for &k in &soc_sizes {
        let d = DMatrix::from_fn(k, m, |_, _| normal(&mut rng));
        let u = DVector::from_fn(k - 1, |_, _| normal(&mut rng)).normalize();
        let t: f64 = rng.random_range(0.5..2.0);
        let rr: f64 = rng.random_range(0.5..2.0);
        let mut s_star = DVector::zeros(k);
        let mut z_dual = DVector::zeros(k);
        s_star[0] = t;
        z_dual[0] = rr;
        for j in 1..k {
            s_star[j] = t * u[j - 1];
            z_dual[j] = -rr * u[j - 1];
        }
        let b = &d * &zs - &s_star;
        c += d.transpose() * &z_dual;
        opt_dual += b.dot(&z_dual);
        let mut blk = SocBlock::new(k);
        for row in 0..k {
            for var in 0..m {
                blk.add(row, var, d[(row, var)]);
            }
            blk.set_offset(row, b[row]);
        }
        problem.add_soc(blk);
    }

    for j in 0..lin_rows {
        let a = DVector::from_fn(m, |_, _| normal(&mut rng));
        let (s, zd) = if j % 2 == 0 {
            (0.0, rng.random_range(0.5..2.0))
        } else {
            (rng.random_range(0.5..2.0), 0.0)
        };
        let b = a.dot(&zs) - s;
        c += &a * zd;
        opt_dual += b * zd;
        let row: Vec<(usize, f64)> = a.iter().cloned().enumerate().collect();
        problem.add_linear(&row, b);
    }

    problem.objective = c.iter().cloned().collect();
    let optimum = c.dot(&zs);
    debug_assert!((optimum - opt_dual).abs() < 1e-9 * optimum.abs().max(1.0));
    Certified {
        problem,
        optimum,
        z_star,
    }
}

use holo_ehb::array_model::{build_lattice, ApertureMode, PhysicalConfig, PowerBudget};
use holo_ehb::channel::{realize, ScattererConfig};
use holo_ehb::ehb::{EhbProblem, OptimizerConfig};
use holo_ehb::radiation::{default_grid, impedance_matrix, ElementPattern};
use holo_ehb::swe_coupling::CouplingMatrix;
use holo_ehb::CVec;

pub struct Instance {
    pub problem: EhbProblem,
    pub config: OptimizerConfig,
}

/// Single-layer dipole array with synthetic coupling and a GSCM channel.
pub fn instance(per_layer: Option<usize>, spacing_lambda: f64, users: usize, paths: usize, rho: f64, seed: u64) -> Instance {
    let cfg = PhysicalConfig::default();
    let mode = per_layer.map_or(ApertureMode::FixedAperture, ApertureMode::FixedCount);
    let geom = build_lattice(&cfg, spacing_lambda * cfg.wavelength_m, 1, mode).unwrap();
    let pattern = ElementPattern::DipoleSinTheta;
    let z = impedance_matrix(&geom, &pattern, &cfg, &default_grid()).unwrap();
    let c = if rho == 0.0 {
        CouplingMatrix::identity(geom.total_count)
    } else {
        CouplingMatrix::synthetic(&geom, &cfg, rho)
    };
    let ones = CVec::from_element(geom.total_count, holo_ehb::Complex64::new(1.0, 0.0));
    let channel = realize(&geom, &cfg, &pattern, paths, users, seed, &ScattererConfig::default(), &c, &ones).unwrap();
    let config = OptimizerConfig {
        power: PowerBudget::from_snr_db(20.0, 1.0, 1.0).unwrap(),
        seed,
        ..OptimizerConfig::default()
    };
    let problem = EhbProblem::new(&geom, &cfg, channel, c, z, &config).unwrap();
    Instance { problem, config }
}
