use holo_ehb::array_model::PhysicalConfig;
use holo_ehb::special_functions::*;
use holo_ehb::swe_coupling::SamplingGrid;
use holo_ehb::Complex64;
use nalgebra::Vector3;
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// h_n(x) = (−i)^{n+1} e^{ix}/x Σ_k i^k (n+k)! / (k!(n−k)!(2x)^k).
fn hankel_rayleigh(n: usize, x: f64) -> Complex64 {
    let i = c(0.0, 1.0);
    let mut sum = c(0.0, 0.0);
    for k in 0..=n {
        let mut ratio = 1.0;
        for q in (n - k + 1)..=(n + k) {
            ratio *= q as f64;
        }
        let kf: f64 = (1..=k).map(|q| q as f64).product();
        sum += i.powu(k as u32) * (ratio / (kf * (2.0 * x).powi(k as i32)));
    }
    (-i).powu(n as u32 + 1) * (i * x).exp() / x * sum
}

#[test]
fn hankel_examples() {
    let z0 = spherical_hankel1(0, PI).unwrap();
    assert!((z0 - c(0.0, 1.0 / PI)).norm() < 1e-15);
    let z1 = spherical_hankel1(1, 1.0).unwrap();
    let (s, co) = (1f64.sin(), 1f64.cos());
    assert!((z1 - c(s - co, -(co + s))).norm() < 1e-14);
    assert!((z1 - c(0.30117, -1.38177)).norm() < 1e-5);
    let z5 = spherical_hankel1(5, 10.0).unwrap();
    let want = hankel_rayleigh(5, 10.0);
    assert!((z5 - want).norm() <= 1e-12 * want.norm());
}

#[test]
fn hankel_domain_error() {
    assert!(spherical_hankel1(2, 0.0).is_err());
    assert!(spherical_hankel1(2, -1.0).is_err());
}

#[test]
fn hankel_matches_rayleigh_sum() {
    let mut x = 0.1;
    while x <= 50.0 {
        let all = spherical_hankel1_all(6, x).unwrap();
        for (n, h) in all.iter().enumerate() {
            let want = hankel_rayleigh(n, x);
            assert!((h - want).norm() <= 1e-12 * want.norm(), "n={n} x={x}: {h} vs {want}");
        }
        x *= 1.17;
    }
}

#[test]
fn wronskian() {
    for &x in &[0.5, 0.9, 2.0, 3.7, 8.0, 15.0, 30.0] {
        let (j, y) = spherical_bessel_jy(10, x).unwrap();
        for n in 1..10 {
            // f'_n = f_{n-1} − (n+1)/x f_n
            let jp = j[n - 1] - (n as f64 + 1.0) / x * j[n];
            let yp = y[n - 1] - (n as f64 + 1.0) / x * y[n];
            let w = j[n] * yp - jp * y[n];
            let want = 1.0 / (x * x);
            assert!((w - want).abs() <= 1e-10 * want, "n={n} x={x}: {w}");
        }
    }
}

#[test]
fn legendre_examples() {
    assert!((normalized_assoc_legendre(1, 0, 1.0).unwrap() - 1.5f64.sqrt()).abs() < 1e-15);
    for n in 1..8 {
        for m in 1..=n {
            assert_eq!(normalized_assoc_legendre(n, m, 1.0).unwrap(), 0.0);
            assert_eq!(normalized_assoc_legendre(n, m, -1.0).unwrap(), 0.0);
        }
    }
    assert!(normalized_assoc_legendre(2, 3, 0.0).is_err());
    assert!(normalized_assoc_legendre(2, 1, 1.5).is_err());
}

/// |P̄_m^m(0)| = √((2m+1)/2 · (2m−1)!!/(2m)!!).
#[test]
fn sectoral_values_at_equator() {
    for m in 0..12usize {
        let mut ratio = 1.0;
        for k in 1..=m {
            ratio *= (2 * k - 1) as f64 / (2 * k) as f64;
        }
        let want = ((2 * m + 1) as f64 / 2.0 * ratio).sqrt();
        let got = normalized_assoc_legendre(m, m, 0.0).unwrap().abs();
        assert!((got - want).abs() < 1e-13 * want, "m={m}: {got} vs {want}");
    }
}

#[test]
fn legendre_unit_normalization() {
    let (u, w) = holo_ehb::swe_coupling::gauss_legendre(40);
    for n in 0..10 {
        for m in 0..=n {
            let s: f64 = u.iter().zip(&w).map(|(&x, &wt)| wt * normalized_assoc_legendre(n, m, x).unwrap().powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} m={m}: {s}");
            for n2 in m..n {
                let cross: f64 = u
                    .iter()
                    .zip(&w)
                    .map(|(&x, &wt)| wt * normalized_assoc_legendre(n, m, x).unwrap() * normalized_assoc_legendre(n2, m, x).unwrap())
                    .sum();
                assert!(cross.abs() < 1e-12);
            }
        }
    }
}

#[test]
fn legendre_zero_count() {
    for n in 1..9 {
        for m in 0..=n {
            let mut changes = 0;
            let mut prev = normalized_assoc_legendre(n, m, -1.0 + 1e-9).unwrap();
            for k in 1..=20000 {
                let u = -1.0 + 1e-9 + (2.0 - 2e-9) * k as f64 / 20000.0;
                let v = normalized_assoc_legendre(n, m, u).unwrap();
                if v * prev < 0.0 {
                    changes += 1;
                }
                if v != 0.0 {
                    prev = v;
                }
            }
            assert_eq!(changes, n - m, "n={n} m={m}");
        }
    }
}

fn unit_vectors(theta: f64, phi: f64) -> [Vector3<f64>; 3] {
    let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
    [
        Vector3::new(st * cp, st * sp, ct),
        Vector3::new(ct * cp, ct * sp, -st),
        Vector3::new(-sp, cp, 0.0),
    ]
}

fn cartesian(idx: ModeIndex, cfg: &PhysicalConfig, p: Vector3<f64>) -> [Complex64; 3] {
    let r = p.norm();
    let theta = (p.z / r).acos();
    let phi = p.y.atan2(p.x);
    let f = spherical_wave_basis(idx, cfg, r, theta, phi).unwrap();
    let u = unit_vectors(theta, phi);
    let comps = f.components();
    let mut out = [c(0.0, 0.0); 3];
    for (a, o) in out.iter_mut().enumerate() {
        *o = comps[0] * u[0][a] + comps[1] * u[1][a] + comps[2] * u[2][a];
    }
    out
}

fn curl(idx: ModeIndex, cfg: &PhysicalConfig, p: Vector3<f64>, h: f64) -> [Complex64; 3] {
    let d = |axis: usize, comp: usize| {
        let mut e = Vector3::zeros();
        e[axis] = h;
        let plus = cartesian(idx, cfg, p + e)[comp];
        let minus = cartesian(idx, cfg, p - e)[comp];
        let plus2 = cartesian(idx, cfg, p + 2.0 * e)[comp];
        let minus2 = cartesian(idx, cfg, p - 2.0 * e)[comp];
        (8.0 * (plus - minus) - (plus2 - minus2)) / (12.0 * h)
    };
    [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)]
}

/// TM modes are (1/κ)∇× of TE modes and vice versa.
#[test]
fn modes_are_curls_of_each_other() {
    let cfg = PhysicalConfig::default();
    let k = cfg.wavenumber_rad_per_m;
    let lam = cfg.wavelength_m;
    let points = [
        Vector3::new(0.3, -0.2, 0.5) * lam,
        Vector3::new(-0.7, 0.4, -0.1) * lam,
        Vector3::new(0.2, 0.9, 0.35) * lam,
    ];
    for n in 1..=3u32 {
        for m in -(n as i32)..=(n as i32) {
            let te = ModeIndex::new(1, m, n).unwrap();
            let tm = ModeIndex::new(2, m, n).unwrap();
            for &p in &points {
                let h = 1e-4 * lam;
                let scale = cartesian(te, &cfg, p).iter().chain(cartesian(tm, &cfg, p).iter()).map(|v| v.norm()).fold(0.0, f64::max);
                let curl_te = curl(te, &cfg, p, h);
                let tm_val = cartesian(tm, &cfg, p);
                let curl_tm = curl(tm, &cfg, p, h);
                let te_val = cartesian(te, &cfg, p);
                for a in 0..3 {
                    assert!((curl_te[a] / k - tm_val[a]).norm() < 1e-6 * scale, "n={n} m={m} TE curl");
                    assert!((curl_tm[a] / k - te_val[a]).norm() < 1e-6 * scale, "n={n} m={m} TM curl");
                }
            }
        }
    }
}

#[test]
fn te_modes_are_transverse_and_m0_finite() {
    let cfg = PhysicalConfig::default();
    for idx in mode_indices(4).into_iter().filter(|i| i.s == 1) {
        for &theta in &[1e-8, 0.3, PI / 2.0, PI - 1e-8] {
            let f = spherical_wave_basis(idx, &cfg, 2.0 * cfg.wavelength_m, theta, 0.7).unwrap();
            assert_eq!(f.r_component, c(0.0, 0.0));
            assert!(f.is_finite());
        }
    }
    let idx = ModeIndex::new(1, 0, 1).unwrap();
    let f = spherical_wave_basis(idx, &cfg, cfg.wavelength_m, 0.9, 0.2).unwrap();
    assert_eq!(f.theta_component, c(0.0, 0.0));
    assert!(f.phi_component.norm() > 0.0);
}

#[test]
fn radius_must_be_positive() {
    let cfg = PhysicalConfig::default();
    let idx = ModeIndex::new(2, 0, 1).unwrap();
    assert!(spherical_wave_basis(idx, &cfg, 0.0, 1.0, 0.0).is_err());
}

fn inner(grid: &SamplingGrid, f: impl Fn(f64, f64) -> VectorFieldSample, g: impl Fn(f64, f64) -> VectorFieldSample) -> Complex64 {
    grid.points
        .iter()
        .zip(&grid.quadrature_weights)
        .map(|(&(_, t, p), &w)| {
            let (a, b) = (f(t, p).components(), g(t, p).components());
            (0..3).map(|k| b[k].conj() * a[k]).sum::<Complex64>() * w
        })
        .sum()
}

#[test]
fn tm_pair_orthogonal_on_far_sphere() {
    let cfg = PhysicalConfig::default();
    let grid = SamplingGrid::sphere(64, 128, 10.0 * cfg.wavelength_m);
    let r = 10.0 * cfg.wavelength_m;
    let a = ModeIndex::new(2, 0, 1).unwrap();
    let b = ModeIndex::new(2, 0, 2).unwrap();
    let fa = |t, p| spherical_wave_basis(a, &cfg, r, t, p).unwrap();
    let fb = |t, p| spherical_wave_basis(b, &cfg, r, t, p).unwrap();
    let cross = inner(&grid, fa, fb).norm();
    let na = inner(&grid, fa, fa).norm().sqrt();
    let nb = inner(&grid, fb, fb).norm().sqrt();
    assert!(cross < 1e-10 * na * nb, "{cross}");
}

#[test]
fn far_field_gram_is_identity() {
    let grid = SamplingGrid::sphere(24, 48, 1.0);
    let modes = mode_indices(3);
    let samples: Vec<Vec<VectorFieldSample>> = grid.points.iter().map(|&(_, t, p)| far_field_basis_all(3, t, p)).collect();
    for (a, _) in modes.iter().enumerate() {
        for (b, _) in modes.iter().enumerate() {
            let g: Complex64 = samples
                .iter()
                .zip(&grid.quadrature_weights)
                .map(|(s, &w)| {
                    let (x, y) = (s[a].components(), s[b].components());
                    (0..3).map(|k| y[k].conj() * x[k]).sum::<Complex64>() * w
                })
                .sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((g - want).norm() < 2e-8, "({a},{b}) = {g}");
        }
    }
}

#[test]
fn far_field_is_limit_of_near_field() {
    let cfg = PhysicalConfig::default();
    let k = cfg.wavenumber_rad_per_m;
    let r = 2000.0 * cfg.wavelength_m;
    let j = c(0.0, 1.0);
    for idx in mode_indices(2) {
        let near = spherical_wave_basis(idx, &cfg, r, 1.1, 0.4).unwrap();
        let far = far_field_basis(idx, 1.1, 0.4);
        let factor = (j * k * r).exp() / (k * r);
        for (a, b) in near.components().iter().skip(1).zip(far.components().iter().skip(1)) {
            assert!((a - b * factor).norm() < 1e-3 * factor.norm(), "{idx:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recurrence_three_term(n in 1usize..12, x in 0.2f64..40.0) {
        let h = spherical_hankel1_all(n + 1, x).unwrap();
        let lhs = h[n + 1];
        let rhs = h[n] * ((2 * n + 1) as f64 / x) - h[n - 1];
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn linear_index_inverts_enumeration(order in 1usize..8) {
        for (k, idx) in mode_indices(order).iter().enumerate() {
            prop_assert_eq!(idx.linear_index(), k);
        }
        prop_assert_eq!(mode_indices(order).len(), mode_count(order));
    }
}
