//! JSON and CSV exchange formats for complex matrices and vectors.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::{CMat, CVec, Complex64, EhbError, Result};

/// Row-major matrix of [re, im] pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<[f64; 2]>>,
}

impl From<&CMat> for ComplexMatrixJson {
    fn from(m: &CMat) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        }
    }
}

impl ComplexMatrixJson {
    pub fn to_matrix(&self) -> Result<CMat> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(EhbError::Schema(format!(
                "matrix data does not match declared shape {}×{}",
                self.rows, self.cols
            )));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |r, c| {
            Complex64::new(self.data[r][c][0], self.data[r][c][1])
        }))
    }
}

pub fn vector_to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn pairs_to_vector(p: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(p.len(), p.iter().map(|z| Complex64::new(z[0], z[1])))
}

/// Serde adapter for `CMat` fields.
pub mod cmat {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        ComplexMatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        ComplexMatrixJson::deserialize(d)?
            .to_matrix()
            .map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `CVec` fields.
pub mod cvec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> std::result::Result<S::Ok, S::Error> {
        vector_to_pairs(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CVec, D::Error> {
        Ok(pairs_to_vector(&Vec::<[f64; 2]>::deserialize(d)?))
    }
}

pub fn matrix_to_json(m: &CMat) -> Result<String> {
    Ok(serde_json::to_string(&ComplexMatrixJson::from(m))?)
}

pub fn matrix_from_json(text: &str) -> Result<CMat> {
    serde_json::from_str::<ComplexMatrixJson>(text)?.to_matrix()
}

/// One row per entry: row, col, magnitude, phase in degrees.
pub fn write_magnitude_phase_csv<W: Write>(mut out: W, m: &CMat) -> Result<()> {
    writeln!(out, "row,col,magnitude,phase_deg")?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            writeln!(out, "{r},{c},{},{}", z.norm(), z.arg().to_degrees())?;
        }
    }
    Ok(())
}
