use std::fmt::Write;

use super::problem::ConicProblem;

/// Conic Benchmark Format text of the problem, for cross-checking with
/// external solvers. Constraints are written as A z + b ∈ K.
pub fn to_cbf(problem: &ConicProblem) -> String {
    let mut out = String::new();
    let scalar_psd: Vec<_> = problem.psd_blocks.iter().filter(|b| b.size == 1).collect();
    let matrix_psd: Vec<_> = problem.psd_blocks.iter().filter(|b| b.size > 1).collect();

    let _ = writeln!(out, "VER\n3\n\nOBJSENSE\nMIN\n");
    let _ = writeln!(out, "VAR\n{} 1\nF {}\n", problem.num_vars, problem.num_vars);

    if !matrix_psd.is_empty() {
        let _ = writeln!(out, "PSDCON\n{}", matrix_psd.len());
        for b in &matrix_psd {
            let _ = writeln!(out, "{}", b.size);
        }
        out.push('\n');
    }

    let soc_rows: usize = problem.soc_blocks.iter().map(|b| b.size()).sum();
    let rows = scalar_psd.len() + soc_rows;
    let chunks = usize::from(!scalar_psd.is_empty()) + problem.soc_blocks.len();
    let mut acoord = Vec::new();
    let mut bcoord = Vec::new();
    if rows > 0 {
        let _ = writeln!(out, "CON\n{rows} {chunks}");
        if !scalar_psd.is_empty() {
            let _ = writeln!(out, "L+ {}", scalar_psd.len());
        }
        for b in &problem.soc_blocks {
            let _ = writeln!(out, "Q {}", b.size());
        }
        out.push('\n');
        for (r, b) in scalar_psd.iter().enumerate() {
            for (&var, a) in &b.coefficients {
                let v: f64 = a.entries.iter().map(|e| e.2).sum();
                if v != 0.0 {
                    acoord.push((r, var, v));
                }
            }
            let off: f64 = b.offset.entries.iter().map(|e| e.2).sum();
            if off != 0.0 {
                bcoord.push((r, -off));
            }
        }
        let mut r = scalar_psd.len();
        for b in &problem.soc_blocks {
            for (row, off) in b.rows.iter().zip(&b.offset) {
                for &(var, c) in row {
                    acoord.push((r, var, c));
                }
                if *off != 0.0 {
                    bcoord.push((r, -off));
                }
                r += 1;
            }
        }
    }

    let obj: Vec<_> = problem.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).collect();
    let _ = writeln!(out, "OBJACOORD\n{}", obj.len());
    for (j, c) in obj {
        let _ = writeln!(out, "{j} {c:e}");
    }
    out.push('\n');
    if !acoord.is_empty() {
        let _ = writeln!(out, "ACOORD\n{}", acoord.len());
        for (r, j, v) in &acoord {
            let _ = writeln!(out, "{r} {j} {v:e}");
        }
        out.push('\n');
    }
    if !bcoord.is_empty() {
        let _ = writeln!(out, "BCOORD\n{}", bcoord.len());
        for (r, v) in &bcoord {
            let _ = writeln!(out, "{r} {v:e}");
        }
        out.push('\n');
    }

    let mut hcoord = Vec::new();
    let mut dcoord = Vec::new();
    for (i, b) in matrix_psd.iter().enumerate() {
        for (&var, a) in &b.coefficients {
            for &(r, c, v) in &a.entries {
                hcoord.push((i, var, c.max(r), c.min(r), v));
            }
        }
        for &(r, c, v) in &b.offset.entries {
            dcoord.push((i, c.max(r), c.min(r), -v));
        }
    }
    if !hcoord.is_empty() {
        let _ = writeln!(out, "HCOORD\n{}", hcoord.len());
        for (i, j, k, l, v) in &hcoord {
            let _ = writeln!(out, "{i} {j} {k} {l} {v:e}");
        }
        out.push('\n');
    }
    if !dcoord.is_empty() {
        let _ = writeln!(out, "DCOORD\n{}", dcoord.len());
        for (i, k, l, v) in &dcoord {
            let _ = writeln!(out, "{i} {k} {l} {v:e}");
        }
        out.push('\n');
    }
    out
}
