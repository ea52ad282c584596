use super::problem::{ConicProblem, PsdBlock};
use crate::{CMat, Complex64};

/// Complex Hermitian N×N matrix variable F = A + jB lowered to real scalars
/// and constrained through the embedding [[A, −B], [B, A]] ⪰ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianVar {
    pub n: usize,
    /// A_pp.
    pub diag: Vec<usize>,
    /// A_pq for p < q, row-major over the strict upper triangle.
    pub re: Vec<usize>,
    /// B_pq for p < q.
    pub im: Vec<usize>,
}

impl HermitianVar {
    /// Allocates N² real variables in `problem` and adds the PSD embedding.
    pub fn new(problem: &mut ConicProblem, n: usize) -> Self {
        let pairs = n * n.saturating_sub(1) / 2;
        let diag = problem.add_variables(n).collect();
        let re = problem.add_variables(pairs).collect();
        let im = problem.add_variables(pairs).collect();
        let var = Self { n, diag, re, im };
        problem.add_psd(var.psd_block());
        var
    }

    pub fn pair_index(&self, p: usize, q: usize) -> usize {
        debug_assert!(p < q && q < self.n);
        p * (2 * self.n - p - 1) / 2 + (q - p - 1)
    }

    pub fn psd_block(&self) -> PsdBlock {
        let n = self.n;
        let mut blk = PsdBlock::new(2 * n);
        for p in 0..n {
            blk.add(self.diag[p], p, p, 1.0);
            blk.add(self.diag[p], p + n, p + n, 1.0);
            for q in p + 1..n {
                let k = self.pair_index(p, q);
                blk.add(self.re[k], p, q, 1.0);
                blk.add(self.re[k], p + n, q + n, 1.0);
                blk.add(self.im[k], p, n + q, -1.0);
                blk.add(self.im[k], q, n + p, 1.0);
            }
        }
        blk
    }

    /// Coefficients of the real linear form Tr(H F) for Hermitian H.
    pub fn trace_inner(&self, h: &CMat) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for p in 0..n {
            out.push((self.diag[p], h[(p, p)].re));
            for q in p + 1..n {
                let k = self.pair_index(p, q);
                let hpq = (h[(p, q)] + h[(q, p)].conj()) * 0.5;
                out.push((self.re[k], 2.0 * hpq.re));
                out.push((self.im[k], 2.0 * hpq.im));
            }
        }
        out
    }

    /// Coefficients of Tr F.
    pub fn trace(&self) -> Vec<(usize, f64)> {
        self.diag.iter().map(|&v| (v, 1.0)).collect()
    }

    pub fn reconstruct(&self, z: &[f64]) -> CMat {
        let n = self.n;
        let mut f = CMat::zeros(n, n);
        for p in 0..n {
            f[(p, p)] = Complex64::new(z[self.diag[p]], 0.0);
            for q in p + 1..n {
                let k = self.pair_index(p, q);
                let v = Complex64::new(z[self.re[k]], z[self.im[k]]);
                f[(p, q)] = v;
                f[(q, p)] = v.conj();
            }
        }
        f
    }
}
