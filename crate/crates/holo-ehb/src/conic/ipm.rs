use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::problem::ConicProblem;
use crate::{EhbError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iterations: usize,
    pub step_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            feas_tol: 1e-7,
            max_iterations: 100,
            step_fraction: 0.99,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(EhbError::InvalidConfig("solver tolerances must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(EhbError::InvalidConfig("step fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub z: Vec<f64>,
    pub objective_value: f64,
    pub dual_objective: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    /// ⟨s, z⟩ / max(1, |cᵀz|).
    pub duality_gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub message: String,
    pub history: Vec<IterationRecord>,
}

struct SocOp {
    rows: Vec<Vec<(usize, f64)>>,
    b: DVector<f64>,
    vars: Vec<usize>,
    dense: DMatrix<f64>,
}

struct PsdOp {
    n: usize,
    terms: Vec<(usize, Vec<(usize, usize, f64)>)>,
    b: DMatrix<f64>,
}

/// The affine map z ↦ A z split by cone.
struct Operator {
    nvars: usize,
    lin_rows: Vec<Vec<(usize, f64)>>,
    lin_b: DVector<f64>,
    soc: Vec<SocOp>,
    psd: Vec<PsdOp>,
}

/// Element of the cone product space.
#[derive(Clone, Debug)]
struct Cv {
    lin: DVector<f64>,
    soc: Vec<DVector<f64>>,
    psd: Vec<DMatrix<f64>>,
}

impl Cv {
    fn dot(&self, o: &Cv) -> f64 {
        self.lin.dot(&o.lin)
            + self.soc.iter().zip(&o.soc).map(|(a, b)| a.dot(b)).sum::<f64>()
            + self.psd.iter().zip(&o.psd).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, o: &Cv) {
        self.lin.axpy(alpha, &o.lin, 1.0);
        for (a, b) in self.soc.iter_mut().zip(&o.soc) {
            a.axpy(alpha, b, 1.0);
        }
        for (a, b) in self.psd.iter_mut().zip(&o.psd) {
            *a += b * alpha;
        }
    }

    fn sub(&self, o: &Cv) -> Cv {
        let mut r = self.clone();
        r.axpy(-1.0, o);
        r
    }

    fn add(&self, o: &Cv) -> Cv {
        let mut r = self.clone();
        r.axpy(1.0, o);
        r
    }

    fn symmetrize(&mut self) {
        for m in self.psd.iter_mut() {
            let t = m.transpose();
            *m = (&*m + t) * 0.5;
        }
    }

    fn is_finite(&self) -> bool {
        self.lin.iter().all(|v| v.is_finite())
            && self.soc.iter().flatten().all(|v| v.is_finite())
            && self.psd.iter().flatten().all(|v| v.is_finite())
    }
}

impl Operator {
    fn compile(p: &ConicProblem) -> Self {
        let mut lin_rows = Vec::new();
        let mut lin_b = Vec::new();
        let mut psd = Vec::new();
        for blk in &p.psd_blocks {
            if blk.size == 1 {
                let row = blk
                    .coefficients
                    .iter()
                    .map(|(&var, a)| (var, a.entries.iter().map(|e| e.2).sum::<f64>()))
                    .filter(|e| e.1 != 0.0)
                    .collect();
                lin_rows.push(row);
                lin_b.push(blk.offset.entries.iter().map(|e| e.2).sum::<f64>());
            } else {
                let terms = blk
                    .coefficients
                    .iter()
                    .filter(|(_, a)| !a.is_empty())
                    .map(|(&var, a)| (var, a.entries.clone()))
                    .collect();
                psd.push(PsdOp {
                    n: blk.size,
                    terms,
                    b: blk.offset.to_dense(),
                });
            }
        }
        let soc = p
            .soc_blocks
            .iter()
            .map(|blk| {
                let mut vars: Vec<usize> = blk.rows.iter().flatten().map(|e| e.0).collect();
                vars.sort_unstable();
                vars.dedup();
                let mut dense = DMatrix::zeros(blk.size(), vars.len());
                for (r, row) in blk.rows.iter().enumerate() {
                    for &(var, c) in row {
                        let k = vars.binary_search(&var).expect("variable present");
                        dense[(r, k)] += c;
                    }
                }
                SocOp {
                    rows: blk.rows.clone(),
                    b: DVector::from_vec(blk.offset.clone()),
                    vars,
                    dense,
                }
            })
            .collect();
        Self {
            nvars: p.num_vars,
            lin_b: DVector::from_vec(lin_b),
            lin_rows,
            soc,
            psd,
        }
    }

    fn degree(&self) -> f64 {
        (self.lin_rows.len() + self.soc.len() + self.psd.iter().map(|p| p.n).sum::<usize>()) as f64
    }

    fn apply(&self, x: &DVector<f64>) -> Cv {
        let row_dot = |row: &[(usize, f64)]| row.iter().map(|&(v, c)| c * x[v]).sum::<f64>();
        Cv {
            lin: DVector::from_iterator(self.lin_rows.len(), self.lin_rows.iter().map(|r| row_dot(r))),
            soc: self
                .soc
                .iter()
                .map(|s| DVector::from_iterator(s.rows.len(), s.rows.iter().map(|r| row_dot(r))))
                .collect(),
            psd: self
                .psd
                .iter()
                .map(|p| {
                    let mut m = DMatrix::zeros(p.n, p.n);
                    for (var, entries) in &p.terms {
                        let xv = x[*var];
                        if xv == 0.0 {
                            continue;
                        }
                        for &(r, c, v) in entries {
                            m[(r, c)] += v * xv;
                            if r != c {
                                m[(c, r)] += v * xv;
                            }
                        }
                    }
                    m
                })
                .collect(),
        }
    }

    fn adjoint(&self, z: &Cv) -> DVector<f64> {
        let mut out = DVector::zeros(self.nvars);
        for (row, zi) in self.lin_rows.iter().zip(z.lin.iter()) {
            for &(v, c) in row {
                out[v] += c * zi;
            }
        }
        for (s, zs) in self.soc.iter().zip(&z.soc) {
            for (row, zi) in s.rows.iter().zip(zs.iter()) {
                for &(v, c) in row {
                    out[v] += c * zi;
                }
            }
        }
        for (p, zp) in self.psd.iter().zip(&z.psd) {
            for (var, entries) in &p.terms {
                out[*var] += entries
                    .iter()
                    .map(|&(r, c, v)| if r == c { v * zp[(r, r)] } else { v * (zp[(r, c)] + zp[(c, r)]) })
                    .sum::<f64>();
            }
        }
        out
    }

    fn offset(&self) -> Cv {
        Cv {
            lin: self.lin_b.clone(),
            soc: self.soc.iter().map(|s| s.b.clone()).collect(),
            psd: self.psd.iter().map(|p| p.b.clone()).collect(),
        }
    }

    fn identity(&self) -> Cv {
        Cv {
            lin: DVector::from_element(self.lin_rows.len(), 1.0),
            soc: self
                .soc
                .iter()
                .map(|s| {
                    let mut e = DVector::zeros(s.rows.len());
                    e[0] = 1.0;
                    e
                })
                .collect(),
            psd: self.psd.iter().map(|p| DMatrix::identity(p.n, p.n)).collect(),
        }
    }

    /// Aᵀ H A where H acts blockwise: diagonal weights for the orthant,
    /// dense k×k matrices for SOC blocks and X ↦ T X T for PSD blocks.
    fn normal_matrix(&self, lin_w: &DVector<f64>, soc_t: &[DMatrix<f64>], psd_t: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nvars, self.nvars);
        for (row, &q) in self.lin_rows.iter().zip(lin_w.iter()) {
            for &(i, ai) in row {
                let qa = q * ai;
                for &(j, aj) in row {
                    m[(i, j)] += qa * aj;
                }
            }
        }
        for (s, t) in self.soc.iter().zip(soc_t) {
            let td = t * &s.dense;
            let g = s.dense.transpose() * td;
            for (a, &va) in s.vars.iter().enumerate() {
                for (b, &vb) in s.vars.iter().enumerate() {
                    m[(va, vb)] += g[(a, b)];
                }
            }
        }
        for (p, t) in self.psd.iter().zip(psd_t) {
            let n = p.n;
            let mut y = DMatrix::zeros(n, n);
            for (jj, (vj, ej)) in p.terms.iter().enumerate() {
                y.fill(0.0);
                for &(r, c, v) in ej {
                    let tr = t.column(r);
                    let tc = t.column(c);
                    if r == c {
                        y.ger(v, &tr, &tr, 1.0);
                    } else {
                        y.ger(v, &tr, &tc, 1.0);
                        y.ger(v, &tc, &tr, 1.0);
                    }
                }
                for (vi, ei) in p.terms.iter().take(jj + 1) {
                    let val: f64 = ei
                        .iter()
                        .map(|&(r, c, v)| if r == c { v * y[(r, r)] } else { v * (y[(r, c)] + y[(c, r)]) })
                        .sum();
                    m[(*vi, *vj)] += val;
                    if vi != vj {
                        m[(*vj, *vi)] += val;
                    }
                }
            }
        }
        m
    }
}

struct SocScale {
    beta: f64,
    w: DVector<f64>,
}

impl SocScale {
    fn j(v: &DVector<f64>) -> DVector<f64> {
        let mut r = -v;
        r[0] = v[0];
        r
    }

    /// W v = β (2 w wᵀv − J v).
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        (&self.w * (2.0 * self.w.dot(v)) - Self::j(v)) * self.beta
    }

    /// W⁻¹ v = (2 Jw (Jw)ᵀ v − J v)/β.
    fn apply_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        let jw = Self::j(&self.w);
        (&jw * (2.0 * jw.dot(v)) - Self::j(v)) / self.beta
    }

    fn inv_matrix(&self) -> DMatrix<f64> {
        let k = self.w.len();
        let jw = Self::j(&self.w);
        let mut m = &jw * jw.transpose() * 2.0;
        m[(0, 0)] -= 1.0;
        for i in 1..k {
            m[(i, i)] += 1.0;
        }
        m / self.beta
    }
}

struct PsdScale {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    t: DMatrix<f64>,
}

struct Scaling {
    lin_w: DVector<f64>,
    soc: Vec<SocScale>,
    psd: Vec<PsdScale>,
    lambda: Cv,
}

fn soc_det(u: &DVector<f64>) -> f64 {
    let tail = u.rows(1, u.len() - 1).norm_squared();
    (u[0] - tail.sqrt()) * (u[0] + tail.sqrt())
}

impl Scaling {
    fn new(s: &Cv, z: &Cv) -> Option<Self> {
        let lin_w = s.lin.zip_map(&z.lin, |a, b| (a / b).sqrt());
        let lam_lin = s.lin.zip_map(&z.lin, |a, b| (a * b).sqrt());
        if lin_w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return None;
        }
        let mut soc = Vec::with_capacity(s.soc.len());
        let mut lam_soc = Vec::with_capacity(s.soc.len());
        for (sv, zv) in s.soc.iter().zip(&z.soc) {
            let ds = soc_det(sv);
            let dz = soc_det(zv);
            if !(ds > 0.0 && dz > 0.0 && sv[0] > 0.0 && zv[0] > 0.0) {
                return None;
            }
            let a = ds.sqrt();
            let b = dz.sqrt();
            let sb = sv / a;
            let zb = zv / b;
            let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
            let wbar = (&sb + SocScale::j(&zb)) / (2.0 * gamma);
            let mut w = wbar.clone();
            w[0] += 1.0;
            w /= (2.0 * (wbar[0] + 1.0)).sqrt();
            let sc = SocScale { beta: (a / b).sqrt(), w };
            lam_soc.push(sc.apply(zv));
            soc.push(sc);
        }
        let mut psd = Vec::with_capacity(s.psd.len());
        let mut lam_psd = Vec::with_capacity(s.psd.len());
        for (sm, zm) in s.psd.iter().zip(&z.psd) {
            let ls = Cholesky::new(sm.clone())?.l();
            let lz = Cholesky::new(zm.clone())?.l();
            let prod = lz.transpose() * &ls;
            let svd = prod.svd(false, true);
            let v = svd.v_t.as_ref()?.transpose();
            let sig = &svd.singular_values;
            if sig.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return None;
            }
            let n = sm.nrows();
            let mut r = &ls * &v;
            let mut ls_inv = DMatrix::<f64>::identity(n, n);
            if !ls.solve_lower_triangular_mut(&mut ls_inv) {
                return None;
            }
            let mut rinv = v.transpose() * ls_inv;
            for k in 0..n {
                let f = sig[k].sqrt();
                r.column_mut(k).iter_mut().for_each(|x| *x /= f);
                rinv.row_mut(k).iter_mut().for_each(|x| *x *= f);
            }
            let t = rinv.transpose() * &rinv;
            lam_psd.push(DMatrix::from_diagonal(sig));
            psd.push(PsdScale { r, rinv, t });
        }
        Some(Self {
            lin_w,
            soc,
            psd,
            lambda: Cv {
                lin: lam_lin,
                soc: lam_soc,
                psd: lam_psd,
            },
        })
    }

    /// W v.
    fn w(&self, v: &Cv) -> Cv {
        Cv {
            lin: v.lin.component_mul(&self.lin_w),
            soc: self.soc.iter().zip(&v.soc).map(|(sc, x)| sc.apply(x)).collect(),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, x)| sc.r.transpose() * x * &sc.r).collect(),
        }
    }

    /// W⁻¹ v.
    fn w_inv(&self, v: &Cv) -> Cv {
        Cv {
            lin: v.lin.component_div(&self.lin_w),
            soc: self.soc.iter().zip(&v.soc).map(|(sc, x)| sc.apply_inv(x)).collect(),
            psd: self
                .psd
                .iter()
                .zip(&v.psd)
                .map(|(sc, x)| sc.rinv.transpose() * x * &sc.rinv)
                .collect(),
        }
    }

    /// W⁻ᵀ v.
    fn w_inv_t(&self, v: &Cv) -> Cv {
        Cv {
            lin: v.lin.component_div(&self.lin_w),
            soc: self.soc.iter().zip(&v.soc).map(|(sc, x)| sc.apply_inv(x)).collect(),
            psd: self
                .psd
                .iter()
                .zip(&v.psd)
                .map(|(sc, x)| &sc.rinv * x * sc.rinv.transpose())
                .collect(),
        }
    }

    /// (WᵀW)⁻¹ v.
    fn ww_inv(&self, v: &Cv) -> Cv {
        Cv {
            lin: v.lin.component_div(&self.lin_w.component_mul(&self.lin_w)),
            soc: self
                .soc
                .iter()
                .zip(&v.soc)
                .map(|(sc, x)| sc.apply_inv(&sc.apply_inv(x)))
                .collect(),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, x)| &sc.t * x * &sc.t).collect(),
        }
    }

    fn normal_weights(&self) -> (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let lin = self.lin_w.map(|w| 1.0 / (w * w));
        let soc = self
            .soc
            .iter()
            .map(|sc| {
                let wi = sc.inv_matrix();
                &wi * &wi
            })
            .collect();
        let psd = self.psd.iter().map(|sc| sc.t.clone()).collect();
        (lin, soc, psd)
    }
}

fn jordan(u: &Cv, v: &Cv) -> Cv {
    Cv {
        lin: u.lin.component_mul(&v.lin),
        soc: u
            .soc
            .iter()
            .zip(&v.soc)
            .map(|(a, b)| {
                let mut r = b * a[0] + a * b[0];
                r[0] = a.dot(b);
                r
            })
            .collect(),
        psd: u
            .psd
            .iter()
            .zip(&v.psd)
            .map(|(a, b)| (a * b + b * a) * 0.5)
            .collect(),
    }
}

/// Solve λ ∘ y = r for the diagonal-in-its-frame scaling point λ.
fn lambda_div(lam: &Cv, r: &Cv) -> Cv {
    Cv {
        lin: r.lin.component_div(&lam.lin),
        soc: lam
            .soc
            .iter()
            .zip(&r.soc)
            .map(|(l, rv)| {
                let k = l.len();
                let l1 = l.rows(1, k - 1);
                let r1 = rv.rows(1, k - 1);
                let det = l[0] * l[0] - l1.norm_squared();
                let y0 = (l[0] * rv[0] - l1.dot(&r1)) / det;
                let mut y = DVector::zeros(k);
                y[0] = y0;
                for i in 1..k {
                    y[i] = (rv[i] - l[i] * y0) / l[0];
                }
                y
            })
            .collect(),
        psd: lam
            .psd
            .iter()
            .zip(&r.psd)
            .map(|(l, rm)| {
                let n = l.nrows();
                DMatrix::from_fn(n, n, |i, j| 2.0 * rm[(i, j)] / (l[(i, i)] + l[(j, j)]))
            })
            .collect(),
    }
}

/// Largest α with u + α du in the cone (may be infinite).
fn max_step(u: &Cv, du: &Cv) -> f64 {
    let mut alpha = f64::INFINITY;
    for (a, d) in u.lin.iter().zip(du.lin.iter()) {
        if *d < 0.0 {
            alpha = alpha.min(-a / d);
        }
    }
    for (a, d) in u.soc.iter().zip(&du.soc) {
        alpha = alpha.min(soc_max_step(a, d));
    }
    for (a, d) in u.psd.iter().zip(&du.psd) {
        alpha = alpha.min(psd_max_step(a, d));
    }
    alpha
}

fn soc_max_step(u: &DVector<f64>, du: &DVector<f64>) -> f64 {
    let k = u.len();
    let u1 = u.rows(1, k - 1);
    let d1 = du.rows(1, k - 1);
    let mut alpha = f64::INFINITY;
    if du[0] < 0.0 {
        alpha = -u[0] / du[0];
    }
    let a = du[0] * du[0] - d1.norm_squared();
    let b = u[0] * du[0] - u1.dot(&d1);
    let c = soc_det(u);
    let mut consider = |r: f64| {
        if r > 0.0 && r.is_finite() {
            alpha = alpha.min(r);
        }
    };
    if a == 0.0 {
        if b < 0.0 {
            consider(-c / (2.0 * b));
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(b + b.signum() * sq);
            if q != 0.0 {
                consider(q / a);
                consider(c / q);
            } else {
                consider(-b / a);
            }
        }
    }
    alpha
}

fn psd_max_step(u: &DMatrix<f64>, du: &DMatrix<f64>) -> f64 {
    let l = match Cholesky::new(u.clone()) {
        Some(ch) => ch.l(),
        None => return 0.0,
    };
    let mut x = du.clone();
    if !l.solve_lower_triangular_mut(&mut x) {
        return 0.0;
    }
    let mut xt = x.transpose();
    if !l.solve_lower_triangular_mut(&mut xt) {
        return 0.0;
    }
    let sym = (&xt + xt.transpose()) * 0.5;
    let lmin = sym
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

/// Smallest "eigenvalue" of u in its cone.
fn cone_min(u: &Cv) -> f64 {
    let mut m = f64::INFINITY;
    for v in u.lin.iter() {
        m = m.min(*v);
    }
    for s in &u.soc {
        let k = s.len();
        m = m.min(s[0] - s.rows(1, k - 1).norm());
    }
    for p in &u.psd {
        let sym = (p + p.transpose()) * 0.5;
        m = m.min(sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min));
    }
    m
}

/// Iterate with the smallest tolerance-scaled residual, returned on breakdown.
#[derive(Clone)]
struct Snapshot {
    score: f64,
    x: DVector<f64>,
    pcost: f64,
    dcost: f64,
    relgap: f64,
    pres: f64,
    dres: f64,
}

const REFINEMENT_STEPS: usize = 2;

fn factor(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().amax().max(1e-300);
    let n = m.nrows();
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch);
    }
    let mut reg = 1e-14;
    while reg <= 1e-6 {
        let shifted = &m + DMatrix::identity(n, n) * (reg * scale);
        if let Some(ch) = Cholesky::new(shifted) {
            return Some(ch);
        }
        reg *= 10.0;
    }
    None
}

/// Primal-dual path-following with Nesterov–Todd scaling and Mehrotra
/// predictor-corrector steps from an infeasible start.
pub fn solve(problem: &ConicProblem, config: &SolverConfig) -> Result<ConicSolution> {
    problem.validate()?;
    config.validate()?;
    let op = Operator::compile(problem);
    let c = DVector::from_vec(problem.objective.clone());
    let b = op.offset();
    let e = op.identity();
    let nu = op.degree();
    let nb = b.norm().max(1.0);
    let nc = c.norm().max(1.0);

    let fail = |best: &Option<Snapshot>, iterations: usize, message: String, history: Vec<IterationRecord>| {
        let snap = best.clone().unwrap_or_else(|| Snapshot {
            score: f64::INFINITY,
            x: DVector::zeros(problem.num_vars),
            pcost: 0.0,
            dcost: f64::NAN,
            relgap: f64::NAN,
            pres: f64::NAN,
            dres: f64::NAN,
        });
        ConicSolution {
            z: snap.x.iter().cloned().collect(),
            objective_value: snap.pcost,
            dual_objective: snap.dcost,
            status: SolverStatus::NumericalFailure,
            iterations,
            duality_gap: snap.relgap,
            primal_infeas: snap.pres,
            dual_infeas: snap.dres,
            message,
            history,
        }
    };
    let mut best: Option<Snapshot> = None;

    let ones = DVector::from_element(op.lin_rows.len(), 1.0);
    let soc_eye: Vec<DMatrix<f64>> = op.soc.iter().map(|s| DMatrix::identity(s.rows.len(), s.rows.len())).collect();
    let psd_eye: Vec<DMatrix<f64>> = op.psd.iter().map(|p| DMatrix::identity(p.n, p.n)).collect();
    let gram = op.normal_matrix(&ones, &soc_eye, &psd_eye);
    let Some(gram_ch) = factor(gram) else {
        return Ok(fail(&None, 0, "constraint map has dependent columns".into(), Vec::new()));
    };
    let mut x = gram_ch.solve(&op.adjoint(&b));
    let mut s = op.apply(&x).sub(&b);
    let mut z = op.apply(&gram_ch.solve(&c));
    for v in [&mut s, &mut z] {
        let vmin = cone_min(v);
        let nrm = v.norm().max(1.0);
        if vmin <= 1e-8 * nrm {
            v.axpy(1.0 - vmin, &e);
        }
    }

    let mut history = Vec::new();
    for iter in 0..=config.max_iterations {
        let ax = op.apply(&x);
        let rp = ax.sub(&b).sub(&s);
        let atz = op.adjoint(&z);
        let rd = &atz - &c;
        let pcost = c.dot(&x);
        let dcost = b.dot(&z);
        let gap = s.dot(&z);
        let pres = rp.norm() / nb;
        let dres = rd.norm() / nc;
        let relgap = gap / pcost.abs().max(1.0);
        history.push(IterationRecord {
            primal_objective: pcost,
            dual_objective: dcost,
            gap,
            primal_infeas: pres,
            dual_infeas: dres,
        });
        let finish = |status: SolverStatus, message: String, history: Vec<IterationRecord>| ConicSolution {
            z: x.iter().cloned().collect(),
            objective_value: pcost,
            dual_objective: dcost,
            status,
            iterations: iter,
            duality_gap: relgap,
            primal_infeas: pres,
            dual_infeas: dres,
            message,
            history,
        };
        let score = (pres / config.feas_tol).max(dres / config.feas_tol).max(relgap / config.gap_tol);
        if score.is_finite() && best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(Snapshot {
                score,
                x: x.clone(),
                pcost,
                dcost,
                relgap,
                pres,
                dres,
            });
        }
        if !(pcost.is_finite() && dcost.is_finite() && gap.is_finite()) {
            return Ok(fail(&best, iter, "non-finite iterate".into(), history));
        }
        if pres <= config.feas_tol && dres <= config.feas_tol && relgap <= config.gap_tol {
            return Ok(finish(SolverStatus::Optimal, "optimal".into(), history));
        }
        if dcost > 0.0 && atz.norm() / nc / dcost <= config.feas_tol {
            return Ok(finish(SolverStatus::Infeasible, "primal infeasible (dual ray)".into(), history));
        }
        if pcost < 0.0 && ax.sub(&s).norm() / nb / (-pcost) <= config.feas_tol {
            return Ok(finish(SolverStatus::Infeasible, "dual infeasible (primal ray)".into(), history));
        }
        if iter == config.max_iterations {
            return Ok(finish(SolverStatus::MaxIterations, "iteration limit reached".into(), history));
        }

        let Some(scaling) = Scaling::new(&s, &z) else {
            return Ok(fail(&best, iter, "iterate left the cone interior".into(), history));
        };
        let (lw, sw, pw) = scaling.normal_weights();
        let Some(chol) = factor(op.normal_matrix(&lw, &sw, &pw)) else {
            return Ok(fail(&best, iter, "normal equations singular".into(), history));
        };
        let newton = |rc: &Cv| -> (DVector<f64>, Cv, Cv) {
            let y = lambda_div(&scaling.lambda, rc);
            let v = scaling.w_inv(&y).sub(&scaling.ww_inv(&rp));
            let rhs = &rd + op.adjoint(&v);
            let mut dx = chol.solve(&rhs);
            for _ in 0..REFINEMENT_STEPS {
                let res = &rhs - op.adjoint(&scaling.ww_inv(&op.apply(&dx)));
                dx += chol.solve(&res);
            }
            let adx = op.apply(&dx);
            let dz = v.sub(&scaling.ww_inv(&adx));
            let ds = adx.add(&rp);
            (dx, ds, dz)
        };

        let lam = &scaling.lambda;
        let lam_sq = jordan(lam, lam);
        let mut rc = e.clone();
        rc.axpy(-1.0, &e);
        rc.axpy(-1.0, &lam_sq);
        let (_, ds_a, dz_a) = newton(&rc);
        let alpha_a = max_step(&s, &ds_a).min(max_step(&z, &dz_a)).min(1.0);
        let mut s_try = s.clone();
        s_try.axpy(alpha_a, &ds_a);
        let mut z_try = z.clone();
        z_try.axpy(alpha_a, &dz_a);
        let sigma = (s_try.dot(&z_try).max(0.0) / gap).powi(3).clamp(0.0, 1.0);
        let mu = gap / nu;

        let corr = jordan(&scaling.w_inv_t(&ds_a), &scaling.w(&dz_a));
        let mut rc = e.clone();
        rc.axpy(sigma * mu - 1.0, &e);
        rc.axpy(-1.0, &lam_sq);
        rc.axpy(-1.0, &corr);
        let (dx, ds, dz) = newton(&rc);
        if !(ds.is_finite() && dz.is_finite() && dx.iter().all(|v| v.is_finite())) {
            return Ok(fail(&best, iter, "non-finite search direction".into(), history));
        }
        let alpha = (config.step_fraction * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        x.axpy(alpha, &dx, 1.0);
        s.axpy(alpha, &ds);
        z.axpy(alpha, &dz);
        s.symmetrize();
        z.symmetrize();
    }
    unreachable!("loop returns at the iteration limit")
}
