//! Small dense semidefinite programs in LMI form.
//!
//! ```text
//! minimize    cᵀx
//! subject to  A0[b] + Σₖ xₖ·Aₖ[b] ⪰ 0      for every block b
//! ```
//!
//! Scalar inequalities are 1×1 blocks. Matrices are symmetric and stored as
//! sparse lower-triangular entries; duplicate entries accumulate.
//!
//! The solver ([`solve`]) is a primal-dual path-following method and the
//! certificate checker ([`check_certificate`]) recomputes feasibility and the
//! duality gap from the problem data alone.

mod certificate;
mod dump;
mod solver;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use certificate::{check_certificate, CertificateReport};
pub use dump::{read_sparse_text, write_sparse_text};
pub use solver::solve;

/// Lower-triangular sparse symmetric matrix: `(row, col) -> value`, `row >= col`.
pub type SymEntries = BTreeMap<(usize, usize), f64>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub dim: usize,
    pub constant: SymEntries,
    /// Coefficient matrix per variable index; variables absent from the
    /// map have a zero coefficient in this block.
    pub coefficients: BTreeMap<usize, SymEntries>,
}

impl Block {
    fn dense(dim: usize, entries: &SymEntries) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        for (&(r, c), &v) in entries {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    pub fn constant_dense(&self) -> DMatrix<f64> {
        Self::dense(self.dim, &self.constant)
    }

    pub fn coefficient_dense(&self, var: usize) -> DMatrix<f64> {
        match self.coefficients.get(&var) {
            Some(e) => Self::dense(self.dim, e),
            None => DMatrix::zeros(self.dim, self.dim),
        }
    }

    /// `A0 + Σ xₖ Aₖ` for this block.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant_dense();
        for (&k, entries) in &self.coefficients {
            for (&(r, c), &v) in entries {
                m[(r, c)] += x[k] * v;
                if r != c {
                    m[(c, r)] += x[k] * v;
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    objective: Vec<f64>,
    blocks: Vec<Block>,
}

fn lower(row: usize, col: usize) -> (usize, usize) {
    if row >= col {
        (row, col)
    } else {
        (col, row)
    }
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self { objective: vec![0.0; num_vars], blocks: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn set_objective(&mut self, var: usize, c: f64) {
        self.objective[var] = c;
    }

    /// Append an empty `dim × dim` block and return its index.
    pub fn add_block(&mut self, dim: usize) -> usize {
        self.blocks.push(Block { dim, ..Block::default() });
        self.blocks.len() - 1
    }

    /// Add `value` at `(row, col)` and its mirror of the constant matrix.
    pub fn add_constant(&mut self, block: usize, row: usize, col: usize, value: f64) {
        *self.blocks[block].constant.entry(lower(row, col)).or_insert(0.0) += value;
    }

    /// Add `value` at `(row, col)` and its mirror of variable `var`'s matrix.
    pub fn add_coefficient(&mut self, block: usize, var: usize, row: usize, col: usize, value: f64) {
        *self.blocks[block]
            .coefficients
            .entry(var)
            .or_default()
            .entry(lower(row, col))
            .or_insert(0.0) += value;
    }

    /// `constant + Σ coef·x_var ≥ 0` as a new 1×1 block.
    pub fn add_scalar_inequality(&mut self, constant: f64, terms: &[(usize, f64)]) -> usize {
        let b = self.add_block(1);
        if constant != 0.0 {
            self.add_constant(b, 0, 0, constant);
        }
        for &(var, coef) in terms {
            self.add_coefficient(b, var, 0, 0, coef);
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::IllFormedProblem(m));
        let m = self.num_vars();
        if m == 0 {
            return bad("no variables".into());
        }
        if self.blocks.is_empty() {
            return bad("no blocks".into());
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return bad(format!("non-finite objective coefficient {c}"));
        }
        let mut used = vec![false; m];
        for (b, block) in self.blocks.iter().enumerate() {
            if block.dim == 0 {
                return bad(format!("block {b} has dimension 0"));
            }
            let check = |entries: &SymEntries| {
                entries.iter().all(|(&(r, c), v)| r < block.dim && c <= r && v.is_finite())
            };
            if !check(&block.constant) {
                return bad(format!("block {b}: constant entry out of range or non-finite"));
            }
            for (&k, entries) in &block.coefficients {
                if k >= m {
                    return bad(format!("block {b}: variable {k} out of range"));
                }
                if !check(entries) {
                    return bad(format!("block {b}: entry of variable {k} out of range"));
                }
                if entries.values().any(|&v| v != 0.0) {
                    used[k] = true;
                }
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return bad(format!("variable {k} appears in no block"));
        }
        Ok(())
    }

    /// `A0 + Σ xₖ Aₖ` for every block.
    pub fn slack(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.evaluate(x)).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
    /// The LMI has no feasible point (a dual ray was found).
    Infeasible,
    /// The objective is unbounded below on the LMI.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, max_iters: 200, step_fraction: 0.98 }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if pos(self.gap_tol)
            && pos(self.feas_tol)
            && self.max_iters > 0
            && pos(self.step_fraction)
            && self.step_fraction < 1.0
        {
            Ok(())
        } else {
            Err(Error::IllFormedProblem(format!("invalid solver config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// LMI infeasibility `‖A0 + Σ xₖAₖ − S‖ / (1 + ‖A0‖)`.
    pub primal: f64,
    /// Multiplier infeasibility `‖c − (⟨Aₖ, X⟩)ₖ‖ / (1 + ‖c‖)`.
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: DVector<f64>,
    /// `cᵀx`.
    pub objective_value: f64,
    /// `−⟨A0, X⟩`, a lower bound on the optimum when `X` is feasible.
    pub dual_objective: f64,
    /// Multiplier matrix `X` per block, in block order.
    pub dual_blocks: Vec<DMatrix<f64>>,
    pub status: SolveStatus,
    /// `|cᵀx − dual_objective| / (1 + |cᵀx| + |dual_objective|)`.
    pub gap: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
