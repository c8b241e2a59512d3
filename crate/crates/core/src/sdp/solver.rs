//! Infeasible primal-dual path-following with the HKM search direction and
//! Mehrotra predictor-corrector steps.
//!
//! The LMI problem `min cᵀx, S = A0 + Σ xₖAₖ ⪰ 0` is paired with the conic
//! dual `max −⟨A0, X⟩, ⟨Aₖ, X⟩ = cₖ, X ⪰ 0`. Blocks of size 1 are collected
//! into a diagonal part so scalar inequalities cost O(1) each.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::{Residuals, SdpProblem, SdpSolution, SolveStatus, SolverConfig, SymEntries};
use crate::error::Result;

/// Both triangles of a symmetric sparse matrix.
type Full = Vec<(usize, usize, f64)>;

fn expand(entries: &SymEntries) -> Full {
    let mut out = Vec::with_capacity(2 * entries.len());
    for (&(r, c), &v) in entries {
        if v != 0.0 {
            out.push((r, c, v));
            if r != c {
                out.push((c, r, v));
            }
        }
    }
    out
}

struct DenseBlock {
    dim: usize,
    a0: DMatrix<f64>,
    /// Sorted by variable index.
    vars: Vec<(usize, Full)>,
}

enum Slot {
    Dense(usize),
    Linear(usize),
}

struct Compiled {
    m: usize,
    c: DVector<f64>,
    dense: Vec<DenseBlock>,
    lin_a0: DVector<f64>,
    /// Per diagonal position, `(var, coefficient)` sorted by var.
    lin_rows: Vec<Vec<(usize, f64)>>,
    slots: Vec<Slot>,
    /// Total cone dimension (sum of block orders).
    order: usize,
}

/// A point of the product cone: dense blocks plus the diagonal part.
#[derive(Clone, Debug)]
struct Point {
    dense: Vec<DMatrix<f64>>,
    lin: DVector<f64>,
}

impl Point {
    fn dot(&self, o: &Point) -> f64 {
        self.dense.iter().zip(&o.dense).map(|(a, b)| a.dot(b)).sum::<f64>() + self.lin.dot(&o.lin)
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, a: f64, o: &Point) {
        for (x, y) in self.dense.iter_mut().zip(&o.dense) {
            x.zip_apply(y, |u, v| *u += a * v);
        }
        self.lin.axpy(a, &o.lin, 1.0);
    }

    fn symmetrize(&mut self) {
        for m in &mut self.dense {
            let t = m.transpose();
            *m += t;
            *m *= 0.5;
        }
    }
}

impl Compiled {
    fn new(p: &SdpProblem) -> Self {
        let m = p.num_vars();
        let mut dense = Vec::new();
        let mut lin_a0 = Vec::new();
        let mut lin_rows = Vec::new();
        let mut slots = Vec::new();
        let mut order = 0;
        for b in p.blocks() {
            order += b.dim;
            if b.dim == 1 {
                slots.push(Slot::Linear(lin_a0.len()));
                lin_a0.push(b.constant.get(&(0, 0)).copied().unwrap_or(0.0));
                lin_rows.push(
                    b.coefficients
                        .iter()
                        .filter_map(|(&k, e)| e.get(&(0, 0)).filter(|v| **v != 0.0).map(|&v| (k, v)))
                        .collect(),
                );
            } else {
                slots.push(Slot::Dense(dense.len()));
                dense.push(DenseBlock {
                    dim: b.dim,
                    a0: b.constant_dense(),
                    vars: b
                        .coefficients
                        .iter()
                        .map(|(&k, e)| (k, expand(e)))
                        .filter(|(_, e)| !e.is_empty())
                        .collect(),
                });
            }
        }
        Self {
            m,
            c: DVector::from_column_slice(p.objective()),
            dense,
            lin_a0: DVector::from_vec(lin_a0),
            lin_rows,
            slots,
            order,
        }
    }

    fn a0(&self) -> Point {
        Point { dense: self.dense.iter().map(|b| b.a0.clone()).collect(), lin: self.lin_a0.clone() }
    }

    fn zero(&self) -> Point {
        Point {
            dense: self.dense.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect(),
            lin: DVector::zeros(self.lin_a0.len()),
        }
    }

    /// `Σ yₖ Aₖ`.
    fn adjoint(&self, y: &DVector<f64>) -> Point {
        let mut out = self.zero();
        for (b, blk) in self.dense.iter().enumerate() {
            for (k, entries) in &blk.vars {
                for &(r, c, v) in entries {
                    out.dense[b][(r, c)] += y[*k] * v;
                }
            }
        }
        for (l, row) in self.lin_rows.iter().enumerate() {
            out.lin[l] = row.iter().map(|&(k, v)| y[k] * v).sum();
        }
        out
    }

    /// `(⟨Aₖ, P⟩)ₖ`.
    fn op(&self, p: &Point) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (b, blk) in self.dense.iter().enumerate() {
            for (k, entries) in &blk.vars {
                out[*k] += entries.iter().map(|&(r, c, v)| v * p.dense[b][(r, c)]).sum::<f64>();
            }
        }
        for (l, row) in self.lin_rows.iter().enumerate() {
            for &(k, v) in row {
                out[k] += v * p.lin[l];
            }
        }
        out
    }

    /// Schur complement `H_kj = Σ_b Tr(Aₖ X Aⱼ S⁻¹)`.
    fn schur(&self, x: &Point, sinv: &Point) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.m, self.m);
        for (b, blk) in self.dense.iter().enumerate() {
            let xb = &x.dense[b];
            let z = &sinv.dense[b];
            let mut xa = DMatrix::<f64>::zeros(blk.dim, blk.dim);
            let mut touched: Vec<usize> = Vec::new();
            for (jj, (j, aj)) in blk.vars.iter().enumerate() {
                // Columns of X·Aⱼ; Aⱼ is sparse so only a few are nonzero.
                for &(p, q, v) in aj {
                    xa.column_mut(q).axpy(v, &xb.column(p), 1.0);
                    touched.push(q);
                }
                touched.sort_unstable();
                touched.dedup();
                for (k, ak) in &blk.vars[..=jj] {
                    let mut s = 0.0;
                    for &(p, q, v) in ak {
                        // (X Aⱼ S⁻¹)[q, p]
                        let w: f64 = touched.iter().map(|&t| xa[(q, t)] * z[(t, p)]).sum();
                        s += v * w;
                    }
                    h[(*k, *j)] += s;
                }
                for &t in &touched {
                    xa.column_mut(t).fill(0.0);
                }
                touched.clear();
            }
        }
        for (l, row) in self.lin_rows.iter().enumerate() {
            let w = x.lin[l] * sinv.lin[l];
            for (a, &(ka, va)) in row.iter().enumerate() {
                for &(kb, vb) in &row[a..] {
                    h[(ka, kb)] += va * vb * w;
                }
            }
        }
        for j in 0..self.m {
            for k in 0..j {
                h[(j, k)] = h[(k, j)];
            }
        }
        h
    }

    fn initial_point(&self) -> (Point, Point) {
        let mut x = self.zero();
        let mut s = self.zero();
        for (b, blk) in self.dense.iter().enumerate() {
            let d = blk.dim as f64;
            let mut rx = 10f64.max(d.sqrt());
            let mut rs = rx.max(blk.a0.norm());
            for (k, e) in &blk.vars {
                let fro = e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt();
                rx = rx.max(d * (1.0 + self.c[*k].abs()) / (1.0 + fro));
                rs = rs.max(fro);
            }
            x.dense[b].fill_with_identity();
            x.dense[b] *= rx;
            s.dense[b].fill_with_identity();
            s.dense[b] *= rs;
        }
        for (l, row) in self.lin_rows.iter().enumerate() {
            let mut rx: f64 = 10.0;
            let mut rs: f64 = 10f64.max(self.lin_a0[l].abs());
            for &(k, v) in row {
                rx = rx.max((1.0 + self.c[k].abs()) / (1.0 + v.abs()));
                rs = rs.max(v.abs());
            }
            x.lin[l] = rx;
            s.lin[l] = rs;
        }
        (x, s)
    }

    fn to_blocks(&self, p: &Point) -> Vec<DMatrix<f64>> {
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Dense(i) => p.dense[i].clone(),
                Slot::Linear(l) => DMatrix::from_element(1, 1, p.lin[l]),
            })
            .collect()
    }
}

/// Largest `α` with `P + αD ⪰ 0`, or `None` if `P` is not positive definite.
fn max_step(p: &Point, d: &Point) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (pm, dm) in p.dense.iter().zip(&d.dense) {
        let l = Cholesky::new(pm.clone())?.unpack();
        let y = l.solve_lower_triangular(dm)?;
        let mut m = l.solve_lower_triangular(&y.transpose())?;
        let t = m.transpose();
        m += t;
        m *= 0.5;
        let lmin = SymmetricEigen::new(m).eigenvalues.min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    for (pv, dv) in p.lin.iter().zip(d.lin.iter()) {
        if *pv <= 0.0 {
            return None;
        }
        if *dv < 0.0 {
            alpha = alpha.min(-pv / dv);
        }
    }
    Some(alpha)
}

fn inverse(p: &Point) -> Option<Point> {
    let mut dense = Vec::with_capacity(p.dense.len());
    for m in &p.dense {
        let inv = Cholesky::new(m.clone())?.inverse();
        dense.push((&inv + inv.transpose()) * 0.5);
    }
    if p.lin.iter().any(|v| *v <= 0.0) {
        return None;
    }
    Some(Point { dense, lin: p.lin.map(|v| 1.0 / v) })
}

fn factor_regularized(h: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(h.clone()) {
        return Some(c);
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut delta = 1e-14;
    while delta <= 1e-6 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += delta * scale;
        }
        if let Some(c) = Cholesky::new(hr) {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

struct Iterate {
    x: DVector<f64>,
    xm: Point,
    s: Point,
}

struct Direction {
    dx: DVector<f64>,
    dxm: Point,
    ds: Point,
}

impl Compiled {
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        sinv: &Point,
        rd: &Point,
        rp: &DVector<f64>,
        chol: &Cholesky<f64, Dyn>,
        sigma_mu: f64,
        corr: Option<&Direction>,
    ) -> Direction {
        // K = σμ S⁻¹ − X − (dXₐ dSₐ) S⁻¹ and T = K − X Rd S⁻¹.
        let mut k = self.zero();
        let mut t = self.zero();
        for b in 0..self.dense.len() {
            let zi = &sinv.dense[b];
            let mut kb = zi * sigma_mu - &it.xm.dense[b];
            if let Some(c) = corr {
                kb -= &c.dxm.dense[b] * &c.ds.dense[b] * zi;
            }
            t.dense[b] = &kb - &it.xm.dense[b] * &rd.dense[b] * zi;
            k.dense[b] = kb;
        }
        for l in 0..self.lin_a0.len() {
            let zi = sinv.lin[l];
            let mut kl = sigma_mu * zi - it.xm.lin[l];
            if let Some(c) = corr {
                kl -= c.dxm.lin[l] * c.ds.lin[l] * zi;
            }
            t.lin[l] = kl - it.xm.lin[l] * rd.lin[l] * zi;
            k.lin[l] = kl;
        }
        let rhs = self.op(&t) - rp;
        let dx = chol.solve(&rhs);
        let mut ds = self.adjoint(&dx);
        ds.axpy(1.0, rd);
        let mut dxm = k;
        for b in 0..self.dense.len() {
            dxm.dense[b] -= &it.xm.dense[b] * &ds.dense[b] * &sinv.dense[b];
        }
        for l in 0..self.lin_a0.len() {
            dxm.lin[l] -= it.xm.lin[l] * ds.lin[l] * sinv.lin[l];
        }
        dxm.symmetrize();
        Direction { dx, dxm, ds }
    }
}

/// Solve the LMI problem. Returns an error only for ill-formed input; all
/// numerical outcomes are reported through [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution> {
    problem.validate()?;
    config.check()?;
    let cp = Compiled::new(problem);
    let a0 = cp.a0();
    let a0_norm = a0.norm();
    let c_norm = cp.c.norm();
    let (xm, s) = cp.initial_point();
    let mut it = Iterate { x: DVector::zeros(cp.m), xm, s };

    let mut best: Option<(f64, SdpSolution)> = None;
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    for iter in 0..=config.max_iters {
        iterations = iter;
        let mut rd = cp.adjoint(&it.x);
        rd.axpy(1.0, &a0);
        rd.axpy(-1.0, &it.s);
        let ax = cp.op(&it.xm);
        let rp = &cp.c - &ax;
        let pobj = cp.c.dot(&it.x);
        let dobj = -a0.dot(&it.xm);
        let residuals = Residuals { primal: rd.norm() / (1.0 + a0_norm), dual: rp.norm() / (1.0 + c_norm) };
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let score = residuals.primal.max(residuals.dual).max(gap);
        if best.as_ref().is_none_or(|(s, _)| score <= *s) {
            let sol = SdpSolution {
                x: it.x.clone(),
                objective_value: pobj,
                dual_objective: dobj,
                dual_blocks: cp.to_blocks(&it.xm),
                status: SolveStatus::MaxIterations,
                gap,
                residuals,
                iterations: iter,
            };
            best = Some((score, sol));
        }
        if residuals.primal <= config.feas_tol && residuals.dual <= config.feas_tol && gap <= config.gap_tol {
            status = SolveStatus::Optimal;
            break;
        }
        if iter > 0 {
            // Normalized dual ray: X ⪰ 0 with 𝒜(X) → 0 and ⟨A0, X⟩ < 0.
            if dobj > 0.0 && ax.norm() <= config.feas_tol * dobj {
                status = SolveStatus::Infeasible;
                break;
            }
            // Normalized primal ray: Σ yₖAₖ ⪰ 0 with cᵀy = −1.
            let mut ray = a0.clone();
            ray.axpy(-1.0, &rd);
            if pobj < 0.0 && ray.norm() <= config.feas_tol * (-pobj) {
                status = SolveStatus::Unbounded;
                break;
            }
        }
        if iter == config.max_iters {
            break;
        }

        let Some(sinv) = inverse(&it.s) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some(chol) = factor_regularized(cp.schur(&it.xm, &sinv)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let mu = it.xm.dot(&it.s) / cp.order as f64;

        let pred = cp.direction(&it, &sinv, &rd, &rp, &chol, 0.0, None);
        let (Some(ap), Some(ad)) = (max_step(&it.xm, &pred.dxm), max_step(&it.s, &pred.ds)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut xa = it.xm.clone();
        xa.axpy(ap, &pred.dxm);
        let mut sa = it.s.clone();
        sa.axpy(ad, &pred.ds);
        let mu_aff = xa.dot(&sa) / cp.order as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        let corr = cp.direction(&it, &sinv, &rd, &rp, &chol, sigma * mu, Some(&pred));
        let (Some(ap), Some(ad)) = (max_step(&it.xm, &corr.dxm), max_step(&it.s, &corr.ds)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = (config.step_fraction * ap).min(1.0);
        let ad = (config.step_fraction * ad).min(1.0);
        if ap.max(ad) < 1e-12 {
            status = SolveStatus::NumericalFailure;
            break;
        }
        it.xm.axpy(ap, &corr.dxm);
        it.xm.symmetrize();
        it.x.axpy(ad, &corr.dx, 1.0);
        it.s.axpy(ad, &corr.ds);
        it.s.symmetrize();
    }

    let mut sol = if status == SolveStatus::Optimal || best.is_none() {
        let pobj = cp.c.dot(&it.x);
        let dobj = -a0.dot(&it.xm);
        let mut rd = cp.adjoint(&it.x);
        rd.axpy(1.0, &a0);
        rd.axpy(-1.0, &it.s);
        SdpSolution {
            x: it.x.clone(),
            objective_value: pobj,
            dual_objective: dobj,
            dual_blocks: cp.to_blocks(&it.xm),
            status,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            residuals: Residuals {
                primal: rd.norm() / (1.0 + a0_norm),
                dual: (&cp.c - cp.op(&it.xm)).norm() / (1.0 + c_norm),
            },
            iterations,
        }
    } else if matches!(status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
        // Report the iterate that carries the ray, not the best-residual one.
        let pobj = cp.c.dot(&it.x);
        let dobj = -a0.dot(&it.xm);
        SdpSolution {
            x: it.x.clone(),
            objective_value: pobj,
            dual_objective: dobj,
            dual_blocks: cp.to_blocks(&it.xm),
            status,
            gap: f64::INFINITY,
            residuals: Residuals { primal: f64::INFINITY, dual: f64::INFINITY },
            iterations,
        }
    } else {
        best.map(|(_, s)| s).expect("best iterate recorded")
    };
    sol.status = status;
    sol.iterations = iterations;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_default(p: &SdpProblem) -> SdpSolution {
        solve(p, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn scalar_lower_bound() {
        // min x s.t. x − 2 ≥ 0
        let mut p = SdpProblem::new(1);
        p.set_objective(0, 1.0);
        p.add_scalar_inequality(-2.0, &[(0, 1.0)]);
        let s = solve_default(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.x[0] - 2.0).abs() < 1e-7, "{}", s.x[0]);
    }

    #[test]
    fn two_by_two_geometric_mean() {
        // min x1 + x2 s.t. [[x1, 1], [1, x2]] ⪰ 0 has optimum x1 = x2 = 1.
        let mut p = SdpProblem::new(2);
        p.set_objective(0, 1.0);
        p.set_objective(1, 1.0);
        let b = p.add_block(2);
        p.add_coefficient(b, 0, 0, 0, 1.0);
        p.add_coefficient(b, 1, 1, 1, 1.0);
        p.add_constant(b, 1, 0, 1.0);
        let s = solve_default(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-6 && (s.x[1] - 1.0).abs() < 1e-6, "{:?}", s.x);
        assert!((s.objective_value - 2.0).abs() < 1e-7);
        assert!((s.dual_objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn detects_infeasible() {
        // x ≥ 0 and −x − 1 ≥ 0
        let mut p = SdpProblem::new(1);
        p.set_objective(0, 1.0);
        p.add_scalar_inequality(0.0, &[(0, 1.0)]);
        p.add_scalar_inequality(-1.0, &[(0, -1.0)]);
        assert_eq!(solve_default(&p).status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_infeasible_matrix() {
        // [[x, 1], [1, −x]] ⪰ 0 has no solution.
        let mut p = SdpProblem::new(1);
        p.set_objective(0, 1.0);
        let b = p.add_block(2);
        p.add_coefficient(b, 0, 0, 0, 1.0);
        p.add_coefficient(b, 0, 1, 1, -1.0);
        p.add_constant(b, 1, 0, 1.0);
        assert_eq!(solve_default(&p).status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // min −x s.t. x ≥ 0
        let mut p = SdpProblem::new(1);
        p.set_objective(0, -1.0);
        p.add_scalar_inequality(0.0, &[(0, 1.0)]);
        assert_eq!(solve_default(&p).status, SolveStatus::Unbounded);
    }

    #[test]
    fn max_iterations_reported() {
        let mut p = SdpProblem::new(2);
        p.set_objective(0, 1.0);
        p.set_objective(1, 1.0);
        let b = p.add_block(2);
        p.add_coefficient(b, 0, 0, 0, 1.0);
        p.add_coefficient(b, 1, 1, 1, 1.0);
        p.add_constant(b, 1, 0, 1.0);
        let cfg = SolverConfig { max_iters: 2, ..Default::default() };
        let s = solve(&p, &cfg).unwrap();
        assert_eq!(s.status, SolveStatus::MaxIterations);
    }

    #[test]
    fn ill_formed_is_an_error() {
        let p = SdpProblem::new(1);
        assert!(solve(&p, &SolverConfig::default()).is_err());
    }

    #[test]
    fn schur_matches_dense_formula() {
        let mut p = SdpProblem::new(3);
        let b = p.add_block(3);
        p.add_coefficient(b, 0, 0, 0, 1.0);
        p.add_coefficient(b, 0, 2, 1, 0.5);
        p.add_coefficient(b, 1, 1, 0, -1.0);
        p.add_coefficient(b, 2, 2, 2, 2.0);
        p.add_coefficient(b, 2, 1, 1, 1.0);
        p.add_scalar_inequality(1.0, &[(0, 1.0), (2, -3.0)]);
        let cp = Compiled::new(&p);
        let xm = Point {
            dense: vec![DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0])],
            lin: DVector::from_vec(vec![0.7]),
        };
        let sm = Point {
            dense: vec![DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 2.0, 0.4, 0.0, 0.4, 3.0])],
            lin: DVector::from_vec(vec![1.3]),
        };
        let sinv = inverse(&sm).unwrap();
        let h = cp.schur(&xm, &sinv);
        let blk = &p.blocks()[0];
        for k in 0..3 {
            for j in 0..3 {
                let ak = blk.coefficient_dense(k);
                let aj = blk.coefficient_dense(j);
                let lk = p.blocks()[1].coefficient_dense(k)[(0, 0)];
                let lj = p.blocks()[1].coefficient_dense(j)[(0, 0)];
                let want = (&ak * &xm.dense[0] * &aj * &sinv.dense[0]).trace() + lk * lj * 0.7 / 1.3;
                assert!((h[(k, j)] - want).abs() < 1e-12, "H[{k},{j}] = {} vs {want}", h[(k, j)]);
            }
        }
    }
}
