//! Sparse text dump of an [`SdpProblem`] for cross-checking with external
//! solvers.
//!
//! ```text
//! # rangeloc-sdp v1
//! vars <m>
//! blocks <d1> <d2> ...
//! <block> <row> <col> <var> <value>
//! ```
//!
//! Data lines use 1-based `block`, `row` and `col` with `row >= col`.
//! `var = 0` is the constant matrix `A0`, `var = k` the coefficient of
//! `x_k` (1-based). Objective coefficients are written with
//! `block = row = col = 0`. Values print in shortest round-trip form.

use std::io::{BufRead, Write};

use super::SdpProblem;
use crate::error::{Error, Result};

pub fn write_sparse_text<W: Write>(problem: &SdpProblem, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# rangeloc-sdp v1")?;
    writeln!(w, "vars {}", problem.num_vars())?;
    let dims: Vec<String> = problem.blocks().iter().map(|b| b.dim.to_string()).collect();
    writeln!(w, "blocks {}", dims.join(" "))?;
    for (k, &c) in problem.objective().iter().enumerate() {
        if c != 0.0 {
            writeln!(w, "0 0 0 {} {:?}", k + 1, c)?;
        }
    }
    for (b, block) in problem.blocks().iter().enumerate() {
        for (&(r, c), &v) in &block.constant {
            if v != 0.0 {
                writeln!(w, "{} {} {} 0 {:?}", b + 1, r + 1, c + 1, v)?;
            }
        }
        for (&k, entries) in &block.coefficients {
            for (&(r, c), &v) in entries {
                if v != 0.0 {
                    writeln!(w, "{} {} {} {} {:?}", b + 1, r + 1, c + 1, k + 1, v)?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_sparse_text<R: BufRead>(r: R) -> Result<SdpProblem> {
    let bad = |line: usize, m: &str| Error::IllFormedProblem(format!("line {line}: {m}"));
    let mut problem: Option<SdpProblem> = None;
    for (n, line) in r.lines().enumerate() {
        let n = n + 1;
        let line = line.map_err(|e| bad(n, &e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("vars") => {
                let m = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(n, "vars"))?;
                problem = Some(SdpProblem::new(m));
            }
            Some("blocks") => {
                let p = problem.as_mut().ok_or_else(|| bad(n, "blocks before vars"))?;
                for d in it {
                    p.add_block(d.parse().map_err(|_| bad(n, "block dim"))?);
                }
            }
            Some(first) => {
                let p = problem.as_mut().ok_or_else(|| bad(n, "data before header"))?;
                let fields: Vec<&str> = std::iter::once(first).chain(it).collect();
                if fields.len() != 5 {
                    return Err(bad(n, "expected 5 fields"));
                }
                let idx: Vec<usize> = fields[..4]
                    .iter()
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(n, "index"))?;
                let v: f64 = fields[4].parse().map_err(|_| bad(n, "value"))?;
                let (b, row, col, var) = (idx[0], idx[1], idx[2], idx[3]);
                if b == 0 {
                    if var == 0 || var > p.num_vars() {
                        return Err(bad(n, "objective variable out of range"));
                    }
                    p.set_objective(var - 1, v);
                    continue;
                }
                if b > p.blocks().len() || row == 0 || col == 0 || var > p.num_vars() {
                    return Err(bad(n, "index out of range"));
                }
                let dim = p.blocks()[b - 1].dim;
                if row > dim || col > dim {
                    return Err(bad(n, "entry outside block"));
                }
                if var == 0 {
                    p.add_constant(b - 1, row - 1, col - 1, v);
                } else {
                    p.add_coefficient(b - 1, var - 1, row - 1, col - 1, v);
                }
            }
            None => {}
        }
    }
    problem.ok_or_else(|| Error::IllFormedProblem("missing header".into()))
}
