use rand::Rng;

use crate::linalg::{hermitian_eigen, random_complex_vector};
use crate::{CMat, CVec, Complex64, EhbError, Result};

/// λ₂/λ₁ threshold under which a PSD matrix counts as rank one.
pub const RANK_ONE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct RankOneExtraction {
    /// √λ₁ times the principal unit eigenvector.
    pub vector: CVec,
    pub is_rank_one: bool,
    /// λ₂/λ₁.
    pub ratio: f64,
}

pub fn rank_one_extract(f: &CMat, tol: f64) -> Result<RankOneExtraction> {
    let (vals, vecs) = hermitian_eigen(f);
    let lmax = vals[0];
    let lmin = *vals.last().expect("non-empty");
    if lmin < -1e-9 * lmax.abs().max(1.0) {
        return Err(EhbError::NotPsd(lmin));
    }
    if lmax <= 0.0 {
        return Ok(RankOneExtraction {
            vector: CVec::zeros(f.nrows()),
            is_rank_one: true,
            ratio: 0.0,
        });
    }
    let ratio = vals.get(1).map_or(0.0, |l| l.max(0.0) / lmax);
    Ok(RankOneExtraction {
        vector: vecs.column(0) * Complex64::new(lmax.sqrt(), 0.0),
        is_rank_one: ratio <= tol,
        ratio,
    })
}

/// Draws v = U Λ^{1/2} ξ with ξ ~ CN(0, I), rescales each draw to
/// ‖v‖² = tr F and keeps the candidate (including the principal vector)
/// with the largest objective.
pub fn gaussian_randomization<R: Rng + ?Sized, F: FnMut(&CVec) -> f64>(
    f: &CMat,
    candidates: usize,
    mut objective: F,
    rng: &mut R,
) -> Result<CVec> {
    let (vals, vecs) = hermitian_eigen(f);
    let lmin = *vals.last().expect("non-empty");
    if lmin < -1e-9 * vals[0].abs().max(1.0) {
        return Err(EhbError::NotPsd(lmin));
    }
    let n = f.nrows();
    let mut factor = vecs.clone();
    for (k, l) in vals.iter().enumerate() {
        let s = Complex64::new(l.max(0.0).sqrt(), 0.0);
        factor.column_mut(k).iter_mut().for_each(|x| *x *= s);
    }
    let power: f64 = vals.iter().map(|l| l.max(0.0)).sum();
    let rescale = |v: CVec| {
        let nv = v.norm();
        if nv > 0.0 {
            v * Complex64::new(power.sqrt() / nv, 0.0)
        } else {
            v
        }
    };
    let mut best = rescale(factor.column(0).into_owned());
    let mut best_val = objective(&best);
    for _ in 0..candidates {
        let v = rescale(&factor * random_complex_vector(rng, n));
        let val = objective(&v);
        if val > best_val {
            best_val = val;
            best = v;
        }
    }
    Ok(best)
}
