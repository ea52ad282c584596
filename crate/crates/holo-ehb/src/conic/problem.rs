use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::{EhbError, Result};

/// Symmetric matrix stored as upper-triangle entries (row ≤ col); duplicates add.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    pub size: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: Vec::new(),
        }
    }

    /// Adds v at (r, c) and (c, r).
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.entries.push((r, c, v));
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(EhbError::InvalidProblem("coefficient matrix not square".into()));
        }
        let n = m.nrows();
        let scale = m.amax().max(1.0);
        let mut s = Self::new(n);
        for c in 0..n {
            for r in 0..=c {
                if (m[(r, c)] - m[(c, r)]).abs() > 1e-12 * scale {
                    return Err(EhbError::InvalidProblem(format!(
                        "coefficient matrix not symmetric at ({r}, {c})"
                    )));
                }
                if m[(r, c)] != 0.0 {
                    s.entries.push((r, c, 0.5 * (m[(r, c)] + m[(c, r)])));
                }
            }
        }
        Ok(s)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    /// tr(A Y) for a symmetric Y.
    pub fn inner(&self, y: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * y[(r, r)] } else { v * (y[(r, c)] + y[(c, r)]) })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Σ_i z_i A_i − B ⪰ 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub size: usize,
    pub coefficients: BTreeMap<usize, SparseSym>,
    pub offset: SparseSym,
}

impl PsdBlock {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            coefficients: BTreeMap::new(),
            offset: SparseSym::new(size),
        }
    }

    /// Adds v to both (r, c) and (c, r) of A_var.
    pub fn add(&mut self, var: usize, r: usize, c: usize, v: f64) {
        let size = self.size;
        self.coefficients
            .entry(var)
            .or_insert_with(|| SparseSym::new(size))
            .push(r, c, v);
    }

    pub fn add_offset(&mut self, r: usize, c: usize, v: f64) {
        self.offset.push(r, c, v);
    }

    pub fn set_coefficient(&mut self, var: usize, a: SparseSym) {
        self.coefficients.insert(var, a);
    }
}

/// D z − b ∈ L^k = {(t, x) : t ≥ ‖x‖}; row 0 is the cone axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocBlock {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub offset: Vec<f64>,
}

impl SocBlock {
    pub fn new(size: usize) -> Self {
        Self {
            rows: vec![Vec::new(); size],
            offset: vec![0.0; size],
        }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn add(&mut self, row: usize, var: usize, coeff: f64) {
        self.rows[row].push((var, coeff));
    }

    /// Row `row` of the constraint becomes (D z)_row − b_row.
    pub fn set_offset(&mut self, row: usize, b: f64) {
        self.offset[row] = b;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub num_vars: usize,
    /// Minimized.
    pub objective: Vec<f64>,
    pub psd_blocks: Vec<PsdBlock>,
    pub soc_blocks: Vec<SocBlock>,
}

impl ConicProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            psd_blocks: Vec::new(),
            soc_blocks: Vec::new(),
        }
    }

    pub fn add_variable(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn add_variables(&mut self, count: usize) -> std::ops::Range<usize> {
        let start = self.num_vars;
        for _ in 0..count {
            self.add_variable();
        }
        start..self.num_vars
    }

    pub fn add_psd(&mut self, block: PsdBlock) {
        self.psd_blocks.push(block);
    }

    pub fn add_soc(&mut self, block: SocBlock) {
        self.soc_blocks.push(block);
    }

    /// aᵀz − b ≥ 0 as a size-1 LMI.
    pub fn add_linear(&mut self, row: &[(usize, f64)], b: f64) {
        let mut blk = PsdBlock::new(1);
        for &(var, coeff) in row {
            blk.add(var, 0, 0, coeff);
        }
        blk.add_offset(0, 0, b);
        self.psd_blocks.push(blk);
    }

    /// aᵀz = b as two opposing size-1 LMIs.
    pub fn add_equality(&mut self, row: &[(usize, f64)], b: f64) {
        self.add_linear(row, b);
        let neg: Vec<(usize, f64)> = row.iter().map(|&(v, c)| (v, -c)).collect();
        self.add_linear(&neg, -b);
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(EhbError::InvalidProblem(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.psd_blocks.is_empty() && self.soc_blocks.is_empty() {
            return Err(EhbError::InvalidProblem("no constraint blocks".into()));
        }
        for (b, blk) in self.psd_blocks.iter().enumerate() {
            if blk.size == 0 {
                return Err(EhbError::InvalidProblem(format!("PSD block {b} has size 0")));
            }
            let check = |m: &SparseSym, what: &str| -> Result<()> {
                if m.size != blk.size || m.entries.iter().any(|&(r, c, v)| r >= blk.size || c >= blk.size || !v.is_finite()) {
                    return Err(EhbError::InvalidProblem(format!("PSD block {b}: bad {what}")));
                }
                Ok(())
            };
            check(&blk.offset, "offset")?;
            for (&var, a) in &blk.coefficients {
                if var >= self.num_vars {
                    return Err(EhbError::InvalidProblem(format!("PSD block {b}: variable {var} out of range")));
                }
                check(a, "coefficient")?;
            }
        }
        for (b, blk) in self.soc_blocks.iter().enumerate() {
            if blk.size() < 1 || blk.offset.len() != blk.size() {
                return Err(EhbError::InvalidProblem(format!("SOC block {b} malformed")));
            }
            if blk
                .rows
                .iter()
                .flatten()
                .any(|&(var, c)| var >= self.num_vars || !c.is_finite())
            {
                return Err(EhbError::InvalidProblem(format!("SOC block {b}: bad coefficient")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(EhbError::InvalidProblem("objective not finite".into()));
        }
        Ok(())
    }
}
