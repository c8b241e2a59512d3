//! Range-only nonlinear least squares, the comparison point for the minimax
//! estimators. It assumes nothing about error bounds and reports no radius.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Area, NetworkScenario, NodeId, Point2};
use crate::seed::rng_from_seed;

pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    #[serde(with = "crate::model::xy_points")]
    pub positions: BTreeMap<NodeId, Point2>,
    /// Gradient norm reached the tolerance before the iteration cap.
    pub converged: bool,
    pub iterations: usize,
    pub cost: f64,
}

/// One residual `‖xᵢ − p‖ − z`, where `p` is sensor `j` or a fixed anchor.
#[derive(Debug, Clone, Copy)]
enum Term {
    Pair { i: usize, j: usize, z: f64 },
    Fixed { i: usize, p: Point2, z: f64 },
}

/// Residual terms in stored edge order; variables are `(x₀, y₀, x₁, …)` in
/// scenario sensor order.
pub struct LeastSquares {
    terms: Vec<Term>,
    n: usize,
}

fn at(x: &[f64], i: usize) -> Point2 {
    Point2::new(x[2 * i], x[2 * i + 1])
}

impl LeastSquares {
    pub fn new(scenario: &NetworkScenario) -> Result<Self> {
        let topo = scenario.topology()?;
        let anchors = scenario.anchor_positions();
        let mut terms: Vec<Term> = topo.sensor_edges.iter().map(|l| Term::Pair { i: l.i, j: l.j, z: l.z }).collect();
        terms.extend(topo.anchor_edges.iter().map(|l| Term::Fixed { i: l.sensor, p: anchors[l.anchor], z: l.z }));
        Ok(Self { terms, n: scenario.n_sensors() })
    }

    pub fn num_vars(&self) -> usize {
        2 * self.n
    }

    /// `Σ r²`.
    pub fn cost(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let r = match *t {
                    Term::Pair { i, j, z } => at(x, i).dist(at(x, j)) - z,
                    Term::Fixed { i, p, z } => at(x, i).dist(p) - z,
                };
                r * r
            })
            .sum()
    }

    /// Residuals and Jacobian. A coincident pair has no defined direction;
    /// its row is left zero.
    fn linearize(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(self.terms.len());
        let mut jac = DMatrix::zeros(self.terms.len(), self.num_vars());
        for (row, t) in self.terms.iter().enumerate() {
            let (i, other, z) = match *t {
                Term::Pair { i, j, z } => (i, at(x, j), z),
                Term::Fixed { i, p, z } => (i, p, z),
            };
            let d = at(x, i) - other;
            let norm = d.norm();
            r[row] = norm - z;
            if norm > 0.0 {
                let u = d * (1.0 / norm);
                jac[(row, 2 * i)] = u.x;
                jac[(row, 2 * i + 1)] = u.y;
                if let Term::Pair { j, .. } = *t {
                    jac[(row, 2 * j)] = -u.x;
                    jac[(row, 2 * j + 1)] = -u.y;
                }
            }
        }
        (r, jac)
    }

    /// Gradient of [`LeastSquares::cost`].
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let (r, jac) = self.linearize(x);
        jac.transpose() * r * 2.0
    }
}

/// Damped Gauss–Newton (Levenberg–Marquardt) from `x0`. Only steps that
/// lower the cost are accepted, so the cost sequence is non-increasing.
pub fn minimize(ls: &LeastSquares, x0: &[f64]) -> (Vec<f64>, bool, usize, Vec<f64>) {
    let mut x = x0.to_vec();
    let mut cost = ls.cost(&x);
    let mut history = vec![cost];
    let mut mu = 1e-3;
    for iter in 0..MAX_ITERATIONS {
        let (r, jac) = ls.linearize(&x);
        let jt = jac.transpose();
        let g = &jt * &r;
        if 2.0 * g.norm() <= GRADIENT_TOL {
            return (x, true, iter, history);
        }
        let jtj = &jt * &jac;
        let mut accepted = false;
        while mu < 1e12 {
            let mut lhs = jtj.clone();
            for k in 0..lhs.nrows() {
                lhs[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 4.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = ls.cost(&trial);
            if c < cost {
                x = trial;
                cost = c;
                history.push(c);
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // No descent at any damping: a stationary point to working precision.
            let converged = 2.0 * ls.gradient(&x).norm() <= GRADIENT_TOL;
            return (x, converged, iter, history);
        }
    }
    let converged = 2.0 * ls.gradient(&x).norm() <= GRADIENT_TOL;
    (x, converged, MAX_ITERATIONS, history)
}

/// Least-squares positions from a start drawn uniformly in `area`.
pub fn baseline_least_squares(scenario: &NetworkScenario, area: Area, seed: u64) -> Result<BaselineResult> {
    scenario.check()?;
    let ls = LeastSquares::new(scenario)?;
    let mut rng = rng_from_seed(seed);
    let x0: Vec<f64> = (0..ls.num_vars()).map(|_| rng.random_range(area.min..=area.max)).collect();
    let (x, converged, iterations, history) = minimize(&ls, &x0);
    let positions = scenario.sensors.iter().enumerate().map(|(i, &id)| (id, at(&x, i))).collect();
    Ok(BaselineResult { positions, converged, iterations, cost: *history.last().expect("initial cost") })
}
