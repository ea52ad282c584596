//! End-to-end acceptance checks. Each test prints one `criterion N ... PASS|FAIL`
//! line before asserting, so `cargo test -- --nocapture` gives a summary.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use holo_ehb::array_model::*;
use holo_ehb::conic::{solve, SolverConfig, SolverStatus};
use holo_ehb::ehb::*;
use holo_ehb::experiments::{run, ExperimentSpec};
use holo_ehb::linalg::{random_complex_matrix, random_complex_vector, rel_frobenius};
use holo_ehb::radiation::*;
use holo_ehb::special_functions::far_field_basis_all;
use holo_ehb::swe_coupling::*;
use holo_ehb::{CMat, CVec, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} {name}: {detail}");
}

fn cfg() -> PhysicalConfig {
    PhysicalConfig::default()
}

#[test]
fn criterion_01_impedance_oracle() {
    let start = Instant::now();
    let c = cfg();
    let k = c.wavenumber_rad_per_m;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let d = rng.random_range(0.05..=1.0);
        let layers = rng.random_range(1..=3);
        let per = rng.random_range(2..=6);
        let geom = build_lattice(&c, d * c.wavelength_m, layers, ApertureMode::FixedCount(per)).unwrap();
        let z = impedance_matrix(&geom, &ElementPattern::Isotropic, &c, &default_grid()).unwrap();
        for a in 0..geom.total_count {
            for b in 0..geom.total_count {
                let kd = k * geom.distance(a, b);
                let want = if kd == 0.0 { 1.0 } else { kd.sin() / kd };
                worst = worst.max((z.entries[(a, b)] - Complex64::new(want, 0.0)).norm());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "impedance oracle",
        worst < 1e-8 && secs < 5.0,
        format!("max abs error {worst:.2e}, {secs:.2} s"),
    );
}

#[test]
fn criterion_02_classical_directivity() {
    let c = cfg();
    let one = ArrayGeometry::from_positions(vec![[0.0; 3]], 0.5 * c.wavelength_m, 1).unwrap();
    let z1 = impedance_matrix(&one, &ElementPattern::Isotropic, &c, &default_grid()).unwrap();
    let d1 = directivity(&one, &ElementPattern::Isotropic, &c, &z1, &CVec::from_element(1, Complex64::new(1.0, 0.0)), Direction::new(0.7, 1.3)).unwrap();
    let pair = build_lattice(&c, 0.5 * c.wavelength_m, 1, ApertureMode::FixedCount(2)).unwrap();
    let z2 = impedance_matrix(&pair, &ElementPattern::Isotropic, &c, &default_grid()).unwrap();
    let ones = CVec::from_element(2, Complex64::new(1.0, 0.0));
    let d2 = directivity(&pair, &ElementPattern::Isotropic, &c, &z2, &ones, Direction::azimuth(PI / 2.0)).unwrap();
    report(
        2,
        "classical directivity",
        (d1 - 1.0).abs() <= 1e-9 && (d2 - 2.0).abs() <= 1e-9,
        format!("single {d1:.12}, broadside pair {d2:.12}"),
    );
}

#[test]
fn criterion_03_superdirectivity_limit() {
    let start = Instant::now();
    let c = cfg();
    let mut values = Vec::new();
    for d in [0.05, 0.15, 0.25, 0.35, 0.5] {
        let geom = build_lattice(&c, d * c.wavelength_m, 1, ApertureMode::FixedCount(4)).unwrap();
        let z = impedance_matrix(&geom, &ElementPattern::Isotropic, &c, &default_grid()).unwrap();
        let dir = Direction::azimuth(0.0);
        let e = steering_vector(&geom, &c, dir.theta, dir.phi);
        let i = optimal_currents(&z, &e, 1.0).unwrap();
        values.push(directivity(&geom, &ElementPattern::Isotropic, &c, &z, &i, dir).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    report(
        3,
        "superdirectivity limit",
        values[0] >= 0.85 * 16.0 && monotone && secs < 10.0,
        format!("D = {values:.4?}, {secs:.2} s"),
    );
}

#[test]
fn criterion_04_coupling_recovery() {
    let start = Instant::now();
    let c = cfg();
    let geom = build_lattice(&c, 0.3 * c.wavelength_m, 2, ApertureMode::FixedAperture).unwrap();
    let n = geom.total_count;
    let swe = SweConfig::for_geometry(&geom, &c, 2).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c0 = CouplingMatrix {
            entries: CMat::identity(n, n) + random_complex_matrix(&mut rng, n, n) * Complex64::new(0.3, 0.0),
        };
        let got = estimate_coupling(&geom, &c, &ElementPattern::DipoleSinTheta, &swe, &c0).unwrap();
        worst = worst.max(rel_frobenius(&got.entries, &c0.entries));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "coupling recovery",
        worst < 1e-8 && secs < 60.0,
        format!("N_T {n}, order {}, worst relative error {worst:.2e}, {secs:.2} s", swe.truncation_order),
    );
}

#[test]
fn criterion_05_swe_round_trip() {
    let c = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_trip = 0.0f64;
    for order in 1..=6 {
        let swe = SweConfig::with_order(order, &c).unwrap();
        let grid = make_grid(&swe);
        let f = mode_basis_matrix(&swe, &c, &grid).unwrap();
        let q0 = random_complex_matrix(&mut rng, swe.mode_count, 4);
        let q = mode_coefficients(&synthesize_from_modes(&f, &q0, &c), &f, &c).unwrap();
        worst_trip = worst_trip.max(rel_frobenius(&q.entries, &q0));
    }
    let grid = SamplingGrid::sphere(24, 48, 1.0);
    let samples: Vec<Vec<[Complex64; 3]>> = grid
        .points
        .iter()
        .map(|&(_, t, p)| far_field_basis_all(3, t, p).iter().map(|s| s.components()).collect())
        .collect();
    let m = samples[0].len();
    let mut worst_gram = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            let g: Complex64 = samples
                .iter()
                .zip(&grid.quadrature_weights)
                .map(|(s, &w)| (0..3).map(|k| s[b][k].conj() * s[a][k]).sum::<Complex64>() * w)
                .sum();
            let want = if a == b { 1.0 } else { 0.0 };
            worst_gram = worst_gram.max((g - want).norm());
        }
    }
    report(
        5,
        "SWE round trip",
        worst_trip < 1e-10 && worst_gram < 2e-8,
        format!("round trip {worst_trip:.2e}, Gram {worst_gram:.2e} over {m} modes"),
    );
}

#[test]
fn criterion_06_single_user_optimality() {
    let mut beaten = 0;
    let mut worst_gap = 0.0f64;
    for seed in 0..20 {
        let inst = common::instance(None, 0.3, 1, 8, 0.8, seed);
        let (p, config) = (&inst.problem, &inst.config);
        let n = p.antennas();
        let closed = single_user_solve(p, config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let best_random = (0..1000)
            .map(|_| {
                let i = random_complex_vector(&mut rng, n);
                let i = &i * Complex64::new((config.power.analog_w / i.norm_squared()).sqrt(), 0.0);
                let w = random_complex_matrix(&mut rng, n, 1);
                let w = &w * Complex64::new((config.power.digital_w / w.norm_squared()).sqrt(), 0.0);
                p.sinrs(&i, &w, config.power.noise_variance)[0]
            })
            .fold(0.0, f64::max);
        if best_random >= closed.per_user_sinr[0] {
            beaten += 1;
        }
        let ao = ehb_alternating(p, config).unwrap();
        worst_gap = worst_gap.max((ao.sum_rate_bits - closed.sum_rate_bits).abs() / closed.sum_rate_bits);
    }
    report(
        6,
        "single-user optimality",
        beaten == 0 && worst_gap <= 0.01,
        format!("seeds beaten by random pairs: {beaten}/20, worst AO vs closed form {:.3}%", 100.0 * worst_gap),
    );
}

struct SuiteOutcome {
    monotone_failures: Vec<u64>,
    unconverged: Vec<u64>,
    max_iterations: usize,
    worst_rank_ratio: f64,
    zero_blocks: usize,
    secs: f64,
}

fn ao_suite() -> SuiteOutcome {
    let start = Instant::now();
    let mut out = SuiteOutcome {
        monotone_failures: Vec::new(),
        unconverged: Vec::new(),
        max_iterations: 0,
        worst_rank_ratio: 0.0,
        zero_blocks: 0,
        secs: 0.0,
    };
    for seed in 0..20u64 {
        let users = 2 + (seed % 2) as usize;
        let antennas = if (seed / 2) % 2 == 0 { 4 } else { 8 };
        let inst = common::instance(Some(antennas), 0.3, users, 8, 0.8, seed);
        let sol = ehb_alternating(&inst.problem, &inst.config).unwrap();
        if sol.trace.windows(2).any(|w| w[1] < w[0] - 1e-6) {
            out.monotone_failures.push(seed);
        }
        if !sol.converged || sol.outer_iterations > 30 {
            out.unconverged.push(seed);
        }
        out.max_iterations = out.max_iterations.max(sol.outer_iterations);
        out.worst_rank_ratio = sol.block_rank_ratios.iter().fold(out.worst_rank_ratio, |a, &b| a.max(b));
        out.zero_blocks += sol.zero_blocks;
    }
    out.secs = start.elapsed().as_secs_f64();
    out
}

static SUITE: std::sync::OnceLock<SuiteOutcome> = std::sync::OnceLock::new();

#[test]
fn criterion_07_ao_monotone_convergence() {
    let s = SUITE.get_or_init(ao_suite);
    report(
        7,
        "AO monotonicity and convergence",
        s.monotone_failures.is_empty() && s.unconverged.is_empty(),
        format!(
            "non-monotone seeds {:?}, unconverged seeds {:?}, max outer iterations {}, {:.1} s",
            s.monotone_failures, s.unconverged, s.max_iterations, s.secs
        ),
    );
}

#[test]
fn criterion_08_relaxation_tightness() {
    let s = SUITE.get_or_init(ao_suite);
    report(
        8,
        "relaxation tightness",
        s.worst_rank_ratio < 1e-6,
        format!("worst σ₂/σ₁ {:.2e}, vanishing blocks {}", s.worst_rank_ratio, s.zero_blocks),
    );
}

#[test]
fn criterion_09_ehb_vs_uncoupled_zf() {
    let mut ratios = Vec::new();
    let mut below = Vec::new();
    let (mut sum_ehb, mut sum_zf) = (0.0, 0.0);
    for seed in 0..50 {
        let inst = common::instance(None, 0.35, 4, 8, 0.8, seed);
        let ehb = ehb_alternating(&inst.problem, &inst.config).unwrap();
        let zf = zf_baseline(&inst.problem, &inst.config, false).unwrap();
        if ehb.sum_rate_bits < zf.sum_rate_bits - 1e-6 {
            below.push(seed);
        }
        ratios.push(ehb.sum_rate_bits / zf.sum_rate_bits);
        sum_ehb += ehb.sum_rate_bits;
        sum_zf += zf.sum_rate_bits;
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    report(
        9,
        "multi-user EHB vs uncoupled-design ZF",
        mean >= 1.2 && below.is_empty(),
        format!(
            "mean per-seed ratio {mean:.3}, ratio of means {:.3}, seeds below baseline {below:?}",
            sum_ehb / sum_zf
        ),
    );
}

fn cut(layers: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let spec = ExperimentSpec::from_json(&format!(
        r#"{{"kind": "pattern_cut", "geometry": {{"spacing_lambda": [0.2], "layers": {layers}}}}}"#
    ))
    .unwrap();
    let t = run(&spec).unwrap();
    (
        t.column("azimuth_deg").unwrap().to_vec(),
        t.column("directivity_dBi").unwrap().to_vec(),
        t.column("realized_gain_dBi").unwrap().to_vec(),
    )
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn criterion_10_pattern_flatness_and_peaks() {
    let (_, _, g1) = cut(1);
    let (az, d4, g4) = cut(4);
    let (s1, s4) = (std_dev(&g1), std_dev(&g4));
    let maxima: Vec<f64> = (1..d4.len() - 1)
        .filter(|&k| d4[k] > d4[k - 1] && d4[k] >= d4[k + 1])
        .map(|k| az[k])
        .collect();
    let near = |target: f64| maxima.iter().any(|m| (m - target).abs() <= 10.0);
    report(
        10,
        "pattern flatness and diagonal peaks",
        s4 < s1 && near(45.0) && near(135.0),
        format!("gain std 1 layer {s1:.3} dB, 4 layers {s4:.3} dB, 4-layer maxima at {maxima:?}"),
    );
}

#[test]
fn criterion_11_efficiency_gain_tradeoff() {
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "gain_vs_spacing_fixed_aperture",
            "geometry": {"spacing_lambda": [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5], "layers": 2}}"#,
    )
    .unwrap();
    assert_eq!(spec.optimizer.loss_ratio, 0.01);
    let t = run(&spec).unwrap();
    let d = t.column("spacing_lambda").unwrap();
    let g = t.column("realized_gain_dBi").unwrap();
    let best = (0..g.len()).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
    report(
        11,
        "efficiency-gain tradeoff",
        best != 0 && best != g.len() - 1,
        format!("realized gain {g:.3?} dBi, maximum at {}λ", d[best]),
    );
}

#[test]
fn criterion_12_conic_solver() {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    let mut nondeterministic = Vec::new();
    for seed in 0..30 {
        let cert = common::certified(seed);
        let a = solve(&cert.problem, &SolverConfig::default()).unwrap();
        let b = solve(&cert.problem, &SolverConfig::default()).unwrap();
        let err = (a.objective_value - cert.optimum).abs() / cert.optimum.abs().max(1.0);
        if a.status != SolverStatus::Optimal || !(a.duality_gap < 1e-7) || err > 1e-6 {
            bad.push(seed);
        }
        if a != b {
            nondeterministic.push(seed);
        }
        worst = worst.max(a.duality_gap);
    }
    report(
        12,
        "conic solver correctness",
        bad.is_empty() && nondeterministic.is_empty(),
        format!("failed {bad:?}, nondeterministic {nondeterministic:?}, worst gap {worst:.2e}"),
    );
}
