//! Centralized minimax localization.
//!
//! The worst-case squared error over the relaxed feasible set is minimized
//! through its Lagrangian dual, which is a single LMI problem in the scalar
//! multipliers
//!
//! ```text
//! t, αᵢⱼ, βᵢⱼ ≥ 0 per sensor edge,   ωᵢₖ, φᵢₖ ≥ 0 per anchor edge.
//! ```
//!
//! With `Eᵢⱼ`, `Eᵢ` the 2n×2n selector matrices of `‖xᵢ − xⱼ‖²` and `‖xᵢ‖²`:
//!
//! ```text
//! M = −Σ(αᵢⱼ − βᵢⱼ)Eᵢⱼ − Σ(ωᵢₖ − φᵢₖ)Eᵢ
//! f = Σ(ωᵢₖ − φᵢₖ)·aₖ placed in sensor i's coordinates
//! h = Σ −αd̲² + βd̄² + ω(‖aₖ‖² − d̲²) + φ(d̄² − ‖aₖ‖²)
//!
//! minimize t + h   s.t.   [[M, f], [fᵀ, t]] ⪰ 0,   M − I ⪰ 0
//! ```
//!
//! and the estimate is `x_est = −M⁻¹f`. For every feasible multiplier set,
//! `t + h` bounds `‖y − x_est‖²` over the relaxed set, so the optimal value is
//! a certified bound on the squared estimation error.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_feasibility_intervals, xy_points, AnchorLink, EdgeKey, IntervalBound, NetworkScenario,
    NodeId, Point2, SensorLink, Topology,
};
use crate::sdp::{solve, SdpProblem, SdpSolution, SolveStatus, SolverConfig};
use crate::seed::rng_from_seed;

/// Smallest admissible eigenvalue of `M` during recovery.
const MIN_M_EIGENVALUE: f64 = 1.0 - 1e-6;
const RECOVERY_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualMultipliers {
    pub alpha: BTreeMap<EdgeKey, f64>,
    pub beta: BTreeMap<EdgeKey, f64>,
    pub omega: BTreeMap<EdgeKey, f64>,
    pub phi: BTreeMap<EdgeKey, f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralEstimate {
    #[serde(with = "xy_points")]
    pub positions: BTreeMap<NodeId, Point2>,
    /// Optimal value of the dual problem: a bound on `Σᵢ‖xᵢ_est − xᵢ‖²`
    /// for any positions consistent with the measurements.
    pub worst_case_value: f64,
    pub status: SolveStatus,
    pub solve_seconds: f64,
    #[serde(skip)]
    pub multipliers: DualMultipliers,
}

/// Variable layout of the dual problem: `t` first, then `α`, `β` per sensor
/// edge and `ω`, `φ` per anchor edge, each in topology order.
#[derive(Debug, Clone)]
pub struct DualSdp {
    pub problem: SdpProblem,
    pub topology: Topology,
    /// Order of the main LMI block (`2n + 1`).
    pub lmi_dim: usize,
}

impl DualSdp {
    pub const T: usize = 0;

    pub fn alpha(&self, e: usize) -> usize {
        1 + e
    }

    pub fn beta(&self, e: usize) -> usize {
        1 + self.topology.sensor_edges.len() + e
    }

    pub fn omega(&self, e: usize) -> usize {
        1 + 2 * self.topology.sensor_edges.len() + e
    }

    pub fn phi(&self, e: usize) -> usize {
        1 + 2 * self.topology.sensor_edges.len() + self.topology.anchor_edges.len() + e
    }

    pub fn multipliers(&self, x: &[f64]) -> DualMultipliers {
        let mut m = DualMultipliers { t: x[Self::T], ..Default::default() };
        for (e, l) in self.topology.sensor_edges.iter().enumerate() {
            m.alpha.insert(l.key, x[self.alpha(e)]);
            m.beta.insert(l.key, x[self.beta(e)]);
        }
        for (e, l) in self.topology.anchor_edges.iter().enumerate() {
            m.omega.insert(l.key, x[self.omega(e)]);
            m.phi.insert(l.key, x[self.phi(e)]);
        }
        m
    }
}

fn bound(bounds: &BTreeMap<EdgeKey, IntervalBound>, key: EdgeKey) -> Result<IntervalBound> {
    bounds
        .get(&key)
        .copied()
        .ok_or_else(|| Error::InvalidScenario(format!("no interval for edge {}-{}", key.a, key.b)))
}

/// `coef·Eᵢⱼ` added to the top-left of `block` for variable `var`.
fn add_edge_selector(p: &mut SdpProblem, block: usize, var: usize, l: &SensorLink, coef: f64) {
    for d in 0..2 {
        let (ri, rj) = (2 * l.i + d, 2 * l.j + d);
        p.add_coefficient(block, var, ri, ri, coef);
        p.add_coefficient(block, var, rj, rj, coef);
        p.add_coefficient(block, var, rj, ri, -coef);
    }
}

/// `coef·Eᵢ` added to the top-left of `block` for variable `var`.
fn add_node_selector(p: &mut SdpProblem, block: usize, var: usize, l: &AnchorLink, coef: f64) {
    for d in 0..2 {
        p.add_coefficient(block, var, 2 * l.sensor + d, 2 * l.sensor + d, coef);
    }
}

pub fn assemble_dual_sdp(
    scenario: &NetworkScenario,
    bounds: &BTreeMap<EdgeKey, IntervalBound>,
) -> Result<DualSdp> {
    let topology = scenario.topology()?;
    if topology.anchor_edges.is_empty() {
        return Err(Error::NoAnchorEdges);
    }
    let n = scenario.n_sensors();
    let anchors = scenario.anchor_positions();
    let ns = topology.sensor_edges.len();
    let na = topology.anchor_edges.len();
    let mut dual = DualSdp {
        problem: SdpProblem::new(1 + 2 * ns + 2 * na),
        topology,
        lmi_dim: 2 * n + 1,
    };
    let (alpha0, beta0, omega0, phi0) = (1, 1 + ns, 1 + 2 * ns, 1 + 2 * ns + na);
    let p = &mut dual.problem;
    let lmi = p.add_block(2 * n + 1);
    let lam = p.add_block(2 * n);
    let last = 2 * n;

    p.set_objective(DualSdp::T, 1.0);
    p.add_coefficient(lmi, DualSdp::T, last, last, 1.0);
    for r in 0..2 * n {
        p.add_constant(lam, r, r, -1.0);
    }

    for (e, l) in dual.topology.sensor_edges.iter().enumerate() {
        let b = bound(bounds, l.key)?;
        let (lo2, up2) = (b.lower * b.lower, b.upper * b.upper);
        p.set_objective(alpha0 + e, -lo2);
        p.set_objective(beta0 + e, up2);
        for block in [lmi, lam] {
            add_edge_selector(p, block, alpha0 + e, l, -1.0);
            add_edge_selector(p, block, beta0 + e, l, 1.0);
        }
    }
    for (e, l) in dual.topology.anchor_edges.iter().enumerate() {
        let b = bound(bounds, l.key)?;
        let (lo2, up2) = (b.lower * b.lower, b.upper * b.upper);
        let a = anchors[l.anchor];
        let a2 = a.norm_sq();
        p.set_objective(omega0 + e, a2 - lo2);
        p.set_objective(phi0 + e, up2 - a2);
        for block in [lmi, lam] {
            add_node_selector(p, block, omega0 + e, l, -1.0);
            add_node_selector(p, block, phi0 + e, l, 1.0);
        }
        p.add_coefficient(lmi, omega0 + e, last, 2 * l.sensor, a.x);
        p.add_coefficient(lmi, omega0 + e, last, 2 * l.sensor + 1, a.y);
        p.add_coefficient(lmi, phi0 + e, last, 2 * l.sensor, -a.x);
        p.add_coefficient(lmi, phi0 + e, last, 2 * l.sensor + 1, -a.y);
    }
    for k in 1..p.num_vars() {
        p.add_scalar_inequality(0.0, &[(k, 1.0)]);
    }
    Ok(dual)
}

/// `M` and `f` from the multipliers.
fn structure(
    scenario: &NetworkScenario,
    topology: &Topology,
    m: &DualMultipliers,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = scenario.n_sensors();
    let anchors = scenario.anchor_positions();
    let mut mm = DMatrix::zeros(2 * n, 2 * n);
    let mut f = DVector::zeros(2 * n);
    let get = |map: &BTreeMap<EdgeKey, f64>, k: &EdgeKey| map.get(k).copied().unwrap_or(0.0);
    for l in &topology.sensor_edges {
        let w = get(&m.beta, &l.key) - get(&m.alpha, &l.key);
        for d in 0..2 {
            let (ri, rj) = (2 * l.i + d, 2 * l.j + d);
            mm[(ri, ri)] += w;
            mm[(rj, rj)] += w;
            mm[(ri, rj)] -= w;
            mm[(rj, ri)] -= w;
        }
    }
    for l in &topology.anchor_edges {
        let w = get(&m.phi, &l.key) - get(&m.omega, &l.key);
        let a = anchors[l.anchor];
        for d in 0..2 {
            mm[(2 * l.sensor + d, 2 * l.sensor + d)] += w;
        }
        f[2 * l.sensor] -= w * a.x;
        f[2 * l.sensor + 1] -= w * a.y;
    }
    (mm, f)
}

/// `x_est = −M⁻¹f`.
pub fn recover_estimate(
    scenario: &NetworkScenario,
    multipliers: &DualMultipliers,
) -> Result<BTreeMap<NodeId, Point2>> {
    let topology = scenario.topology()?;
    let (m, f) = structure(scenario, &topology, multipliers);
    let lmin = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if !(lmin >= MIN_M_EIGENVALUE) {
        return Err(Error::NumericalFailure(format!(
            "multiplier matrix has eigenvalue {lmin}, expected >= 1"
        )));
    }
    let chol = Cholesky::new(m.clone())
        .or_else(|| {
            let mut j = m.clone();
            for i in 0..j.nrows() {
                j[(i, i)] += RECOVERY_JITTER;
            }
            Cholesky::new(j)
        })
        .ok_or_else(|| Error::NumericalFailure("Cholesky of the multiplier matrix failed".into()))?;
    let x = -chol.solve(&f);
    Ok(scenario
        .sensors
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, Point2::new(x[2 * i], x[2 * i + 1])))
        .collect())
}

/// Solve the centralized problem for `scenario` with intervals from its
/// measurements and `gamma`.
pub fn solve_minmax_sdp(scenario: &NetworkScenario, config: &SolverConfig) -> Result<CentralEstimate> {
    let start = Instant::now();
    let bounds = build_feasibility_intervals(scenario);
    let dual = assemble_dual_sdp(scenario, &bounds)?;
    let sol = solve(&dual.problem, config)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver { status: sol.status });
    }
    let multipliers = dual.multipliers(sol.x.as_slice());
    let positions = recover_estimate(scenario, &multipliers)?;
    Ok(CentralEstimate {
        positions,
        // Roundoff can push a zero optimum slightly negative.
        worst_case_value: sol.objective_value.max(0.0),
        status: sol.status,
        solve_seconds: start.elapsed().as_secs_f64(),
        multipliers,
    })
}

/// The relaxed problem itself, in variables `y ∈ ℝ²ⁿ`, the lower triangle of
/// `Δ` and `s`:
///
/// ```text
/// minimize −Tr Δ + s
/// s.t. [[Δ, y], [yᵀ, 1]] ⪰ 0,  [[I, y], [yᵀ, s]] ⪰ 0,
///      d̲² ≤ Tr(EᵢⱼΔ) ≤ d̄²,  d̲² ≤ Tr(EᵢΔ) − 2aₖᵀyᵢ + ‖aₖ‖² ≤ d̄².
/// ```
///
/// Its optimal value is minus the relaxed worst-case value.
#[derive(Debug, Clone)]
pub struct PrimalSdp {
    pub problem: SdpProblem,
    pub n: usize,
}

impl PrimalSdp {
    pub fn y(&self, r: usize) -> usize {
        r
    }

    /// Index of `Δ[r, c]` (either triangle).
    pub fn delta(&self, r: usize, c: usize) -> usize {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        2 * self.n + r * (r + 1) / 2 + c
    }

    pub fn s(&self) -> usize {
        let d = 2 * self.n;
        d + d * (d + 1) / 2
    }

    /// Relaxed worst-case value `max Tr(Δ) − ‖y‖²` from a solution.
    pub fn value(&self, solution: &SdpSolution) -> f64 {
        -solution.objective_value
    }
}

pub fn assemble_primal_sdp(
    scenario: &NetworkScenario,
    bounds: &BTreeMap<EdgeKey, IntervalBound>,
) -> Result<PrimalSdp> {
    let topology = scenario.topology()?;
    if topology.anchor_edges.is_empty() {
        return Err(Error::NoAnchorEdges);
    }
    let n = scenario.n_sensors();
    let d = 2 * n;
    let mut out = PrimalSdp { problem: SdpProblem::new(d + d * (d + 1) / 2 + 1), n };
    let s = out.s();
    let y: Vec<usize> = (0..d).map(|r| out.y(r)).collect();
    let delta_idx: Vec<Vec<usize>> = (0..d).map(|r| (0..d).map(|c| out.delta(r, c)).collect()).collect();
    let p = &mut out.problem;

    let lift = p.add_block(d + 1);
    let norm = p.add_block(d + 1);
    for r in 0..d {
        p.set_objective(delta_idx[r][r], -1.0);
        for c in 0..=r {
            p.add_coefficient(lift, delta_idx[r][c], r, c, 1.0);
        }
        p.add_coefficient(lift, y[r], d, r, 1.0);
        p.add_constant(norm, r, r, 1.0);
        p.add_coefficient(norm, y[r], d, r, 1.0);
    }
    p.add_constant(lift, d, d, 1.0);
    p.set_objective(s, 1.0);
    p.add_coefficient(norm, s, d, d, 1.0);

    let mut two_sided = |terms: Vec<(usize, f64)>, constant: f64, b: IntervalBound| {
        // lower² ≤ g ≤ upper² with g = constant + Σ terms.
        p.add_scalar_inequality(constant - b.lower * b.lower, &terms);
        let neg: Vec<(usize, f64)> = terms.iter().map(|&(k, v)| (k, -v)).collect();
        p.add_scalar_inequality(b.upper * b.upper - constant, &neg);
    };
    for l in &topology.sensor_edges {
        let b = bound(bounds, l.key)?;
        let mut terms = Vec::new();
        for k in 0..2 {
            let (ri, rj) = (2 * l.i + k, 2 * l.j + k);
            terms.push((delta_idx[ri][ri], 1.0));
            terms.push((delta_idx[rj][rj], 1.0));
            terms.push((delta_idx[ri][rj], -2.0));
        }
        two_sided(terms, 0.0, b);
    }
    let anchors = scenario.anchor_positions();
    for l in &topology.anchor_edges {
        let b = bound(bounds, l.key)?;
        let a = anchors[l.anchor];
        let (rx, ry) = (2 * l.sensor, 2 * l.sensor + 1);
        let terms = vec![
            (delta_idx[rx][rx], 1.0),
            (delta_idx[ry][ry], 1.0),
            (y[rx], -2.0 * a.x),
            (y[ry], -2.0 * a.y),
        ];
        two_sided(terms, a.norm_sq(), b);
    }
    Ok(out)
}

/// Rejection-sample up to `wanted` joint sensor placements consistent with
/// every interval in `bounds`, drawing uniformly from a bounding box and
/// stopping after `max_draws` candidates.
pub fn sample_feasible_positions(
    scenario: &NetworkScenario,
    bounds: &BTreeMap<EdgeKey, IntervalBound>,
    wanted: usize,
    max_draws: usize,
    seed: u64,
) -> Result<Vec<BTreeMap<NodeId, Point2>>> {
    let topology = scenario.topology()?;
    let anchors = scenario.anchor_positions();
    let n = scenario.n_sensors();
    let up = |k: EdgeKey| bound(bounds, k).map(|b| b.upper);
    // Per-sensor box from its anchor annuli; otherwise the anchors' box
    // grown by the longest interval times n.
    let mut reach = 0.0f64;
    for b in bounds.values() {
        reach = reach.max(b.upper);
    }
    let (mut gx0, mut gx1, mut gy0, mut gy1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for a in &anchors {
        gx0 = gx0.min(a.x);
        gx1 = gx1.max(a.x);
        gy0 = gy0.min(a.y);
        gy1 = gy1.max(a.y);
    }
    let grow = reach * n as f64;
    let mut boxes = vec![[gx0 - grow, gx1 + grow, gy0 - grow, gy1 + grow]; n];
    let mut constrained = vec![false; n];
    for l in &topology.anchor_edges {
        let a = anchors[l.anchor];
        let u = up(l.key)?;
        let bx = &mut boxes[l.sensor];
        if !constrained[l.sensor] {
            *bx = [f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY];
            constrained[l.sensor] = true;
        }
        bx[0] = bx[0].max(a.x - u);
        bx[1] = bx[1].min(a.x + u);
        bx[2] = bx[2].max(a.y - u);
        bx[3] = bx[3].min(a.y + u);
    }
    let links: Vec<(SensorLink, IntervalBound)> = topology
        .sensor_edges
        .iter()
        .map(|l| bound(bounds, l.key).map(|b| (*l, b)))
        .collect::<Result<_>>()?;
    let alinks: Vec<(AnchorLink, IntervalBound)> = topology
        .anchor_edges
        .iter()
        .map(|l| bound(bounds, l.key).map(|b| (*l, b)))
        .collect::<Result<_>>()?;

    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    let mut pts = vec![Point2::default(); n];
    for _ in 0..max_draws {
        if out.len() >= wanted {
            break;
        }
        for (i, b) in boxes.iter().enumerate() {
            pts[i] = Point2::new(rng.random_range(b[0]..=b[1]), rng.random_range(b[2]..=b[3]));
        }
        let ok = alinks.iter().all(|(l, b)| b.contains(pts[l.sensor].dist(anchors[l.anchor])))
            && links.iter().all(|(l, b)| b.contains(pts[l.i].dist(pts[l.j])));
        if ok {
            out.push(scenario.sensors.iter().copied().zip(pts.iter().copied()).collect());
        }
    }
    Ok(out)
}
