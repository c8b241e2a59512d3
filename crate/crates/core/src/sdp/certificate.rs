//! Independent optimality check for a claimed primal-dual pair.
//!
//! Everything is recomputed from the [`SdpProblem`] entries with dense
//! arithmetic; nothing is taken from solver internals.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{SdpProblem, SdpSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// Smallest eigenvalue of `A0 + Σ xₖAₖ` over blocks, each divided by
    /// `1 + ‖block‖_F`.
    pub slack_min_eig: f64,
    /// Smallest eigenvalue of `X` over blocks, each divided by `1 + ‖X_b‖_F`.
    pub dual_min_eig: f64,
    /// `‖c − (⟨Aₖ, X⟩)ₖ‖ / (1 + ‖c‖)`.
    pub dual_residual: f64,
    /// `|cᵀx + ⟨A0, X⟩| / (1 + |cᵀx| + |⟨A0, X⟩|)`.
    pub gap: f64,
    pub failures: Vec<String>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn min_eig_scaled(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let scale = 1.0 + sym.norm();
    SymmetricEigen::new(sym).eigenvalues.min() / scale
}

/// Check feasibility of `x` and `solution.dual_blocks` and the duality gap,
/// all to relative tolerance `tol`.
pub fn check_certificate(problem: &SdpProblem, solution: &SdpSolution, tol: f64) -> CertificateReport {
    let mut failures = Vec::new();
    let x = solution.x.as_slice();
    if x.len() != problem.num_vars() || solution.dual_blocks.len() != problem.blocks().len() {
        failures.push("solution shape does not match problem".to_string());
        return CertificateReport {
            slack_min_eig: f64::NAN,
            dual_min_eig: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            failures,
        };
    }

    let slack_min_eig = problem.slack(x).iter().map(min_eig_scaled).fold(f64::INFINITY, f64::min);
    let dual_min_eig = solution.dual_blocks.iter().map(min_eig_scaled).fold(f64::INFINITY, f64::min);

    let c = problem.objective();
    let mut ax = vec![0.0; c.len()];
    let mut a0x = 0.0;
    for (block, xb) in problem.blocks().iter().zip(&solution.dual_blocks) {
        if xb.nrows() != block.dim || xb.ncols() != block.dim {
            failures.push(format!("dual block has shape {}x{}, expected {}", xb.nrows(), xb.ncols(), block.dim));
            continue;
        }
        a0x += block.constant_dense().dot(xb);
        for &k in block.coefficients.keys() {
            ax[k] += block.coefficient_dense(k).dot(xb);
        }
    }
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dual_residual =
        c.iter().zip(&ax).map(|(c, a)| (c - a) * (c - a)).sum::<f64>().sqrt() / (1.0 + c_norm);
    let pobj = problem.objective_value(x);
    let gap = (pobj + a0x).abs() / (1.0 + pobj.abs() + a0x.abs());

    if !(slack_min_eig >= -tol) {
        failures.push(format!("LMI violated: scaled min eigenvalue {slack_min_eig:e}"));
    }
    if !(dual_min_eig >= -tol) {
        failures.push(format!("multiplier not PSD: scaled min eigenvalue {dual_min_eig:e}"));
    }
    if !(dual_residual <= tol) {
        failures.push(format!("multiplier equations violated: residual {dual_residual:e}"));
    }
    if !(gap <= tol) {
        failures.push(format!("duality gap {gap:e}"));
    }
    CertificateReport { slack_min_eig, dual_min_eig, dual_residual, gap, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve, SolverConfig};

    fn am_gm() -> SdpProblem {
        let mut p = SdpProblem::new(2);
        p.set_objective(0, 1.0);
        p.set_objective(1, 1.0);
        let b = p.add_block(2);
        p.add_coefficient(b, 0, 0, 0, 1.0);
        p.add_coefficient(b, 1, 1, 1, 1.0);
        p.add_constant(b, 1, 0, 1.0);
        p.add_scalar_inequality(0.0, &[(0, 1.0)]);
        p
    }

    #[test]
    fn accepts_solver_output() {
        let p = am_gm();
        let s = solve(&p, &SolverConfig::default()).unwrap();
        let r = check_certificate(&p, &s, 1e-6);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn rejects_injected_faults() {
        let p = am_gm();
        let good = solve(&p, &SolverConfig::default()).unwrap();

        let mut bad_x = good.clone();
        bad_x.x[0] = 0.5; // x1·x2 < 1 breaks the LMI
        assert!(!check_certificate(&p, &bad_x, 1e-6).passed());

        let mut bad_mult = good.clone();
        bad_mult.dual_blocks[0][(0, 0)] = -1.0;
        let r = check_certificate(&p, &bad_mult, 1e-6);
        assert!(r.failures.iter().any(|f| f.contains("not PSD")), "{r:?}");

        let mut suboptimal = good.clone();
        suboptimal.x[0] = 2.0;
        suboptimal.x[1] = 2.0;
        let r = check_certificate(&p, &suboptimal, 1e-6);
        assert!(r.failures.iter().any(|f| f.contains("gap")), "{r:?}");

        let mut short = good;
        short.dual_blocks.pop();
        assert!(!check_certificate(&p, &short, 1e-6).passed());
    }
}
