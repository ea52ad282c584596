//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMat, CVec, Complex64, EhbError, Result};

pub const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Pseudo-inverse result with the conditioning information of the input.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub matrix: CMat,
    pub rank: usize,
    pub condition_number: f64,
}

/// SVD pseudo-inverse with singular values below `rel_cutoff * sigma_max` dropped.
pub fn pinv(a: &CMat, rel_cutoff: f64) -> PseudoInverse {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return PseudoInverse {
            matrix: CMat::zeros(n, m),
            rank: 0,
            condition_number: f64::INFINITY,
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let cut = rel_cutoff * smax;
    let mut out = CMat::zeros(n, m);
    let mut rank = 0;
    for k in 0..s.len() {
        if s[k] > cut && s[k] > 0.0 {
            rank += 1;
            let inv = 1.0 / s[k];
            for i in 0..n {
                let vik = v_t[(k, i)].conj() * inv;
                for j in 0..m {
                    out[(i, j)] += vik * u[(j, k)].conj();
                }
            }
        }
    }
    if rank == m.min(n) {
        let k = m.min(n);
        let gram = |x: &CMat| if m >= n { x * a } else { a * x };
        let mut p = gram(&out);
        let mut best = (&p - CMat::identity(k, k)).norm();
        for _ in 0..2 {
            if best < 1e-14 * (k as f64).sqrt() {
                break;
            }
            let two_x = &out * Complex64::new(2.0, 0.0);
            let next = if m >= n { two_x - &p * &out } else { two_x - &out * &p };
            let p_next = gram(&next);
            let r = (&p_next - CMat::identity(k, k)).norm();
            if !(r < best) {
                break;
            }
            (out, p, best) = (next, p_next, r);
        }
    }
    PseudoInverse {
        matrix: out,
        rank,
        condition_number: if smin > 0.0 { smax / smin } else { f64::INFINITY },
    }
}

pub fn condition_number(a: &CMat) -> f64 {
    let s = a.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    }
}

/// (A + A^H)/2.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Largest eigenvalue and its unit eigenvector.
pub fn principal_eigen(a: &CMat) -> (f64, CVec) {
    let (vals, vecs) = hermitian_eigen(a);
    (vals[0], vecs.column(0).into_owned())
}

/// Real symmetric eigen-decomposition, ascending eigenvalues.
pub fn symmetric_eigen_real(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Solve the Hermitian positive-definite system A x = b.
pub fn solve_hpd(a: &CMat, b: &CVec) -> Result<CVec> {
    if let Some(ch) = hermitize(a).cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| EhbError::Singular("Hermitian system".into()))
}

pub fn solve_general(a: &CMat, b: &CVec) -> Result<CVec> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| EhbError::Singular("linear system".into()))
}

/// Real part of x^H A x.
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn norm_sq(x: &CVec) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Circularly-symmetric complex normal sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_complex_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// Relative Frobenius distance ‖a − b‖/‖b‖.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Rotate `v` by the global phase that best aligns it with `reference`.
pub fn align_phase(v: &CVec, reference: &CVec) -> CVec {
    let p = reference.dotc(v);
    if p.norm() == 0.0 {
        return v.clone();
    }
    v * (p.conj() / p.norm())
}
