//! Distributed minimax localization.
//!
//! Each sensor first bounds its distance to every anchor by relaying
//! interval bounds along shortest hop paths, solves a small local problem
//! against those anchor annuli for an initial estimate and radius, and then
//! refines synchronously: in round `τ + 1` sensor `i` treats its neighbors'
//! round-`τ` estimates as anchors and keeps its own ball
//! `‖yᵢ − x̂ᵢ(τ)‖ ≤ Rᵢ(τ)` as a constraint, so the radius never grows.
//!
//! Every local problem has the same shape. For constraints
//! `lₘ² ≤ ‖y − cₘ‖² ≤ uₘ²` with multipliers `λₘ` (lower) and `μₘ` (upper):
//!
//! ```text
//! M = Σ μₘ − Σ λₘ ≥ 1,   g = Σ (μₘ − λₘ) cₘ
//! minimize t + Σ λₘ(‖cₘ‖² − lₘ²) + Σ μₘ(uₘ² − ‖cₘ‖²)
//! s.t. [[M·I₂, g], [gᵀ, t]] ⪰ 0
//! ```
//!
//! with estimate `g / M` and squared radius equal to the optimal value.
//! Lower constraints with `l = 0` are implied by the lifting and omitted.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_feasibility_intervals, EdgeKey, IntervalBound, NetworkScenario, NodeId, Point2};
use crate::sdp::{solve, SdpProblem, SolveStatus, SolverConfig};

/// Radii at or below this are treated as exact; the node is not re-solved.
const EXACT_RADIUS_SQ: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorBound {
    pub lower: f64,
    pub upper: f64,
    /// 1 for a direct measurement.
    pub hops: u32,
}

/// Sensor-to-anchor distance bounds, indexed `[sensor][anchor]` in scenario
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub entries: Vec<Vec<AnchorBound>>,
}

impl BoundTable {
    pub fn get(&self, sensor: usize, anchor: usize) -> AnchorBound {
        self.entries[sensor][anchor]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub estimate: Point2,
    pub radius_sq: f64,
    pub localized: bool,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisMinMaxConfig {
    pub epsilon: f64,
    pub max_rounds: usize,
    pub solver: SolverConfig,
    /// Widen each sensor neighbor's interval by that neighbor's radius so the
    /// true position stays feasible. With `false` neighbor estimates are
    /// trusted as exact, and local problems are usually infeasible once a
    /// sensor has more than a few neighbors.
    pub inflate_neighbor_bounds: bool,
}

impl Default for DisMinMaxConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6, max_rounds: 200, solver: SolverConfig::default(), inflate_neighbor_bounds: true }
    }
}

impl DisMinMaxConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) || self.max_rounds == 0 {
            return Err(Error::InvalidScenario(format!("invalid distributed config {self:?}")));
        }
        self.solver.check()
    }
}

/// Relay anchor distance bounds in synchronous rounds until nothing
/// changes. Node `v` without a bound to anchor `k` takes the neighbor with
/// the fewest hops to `k` (smallest id on ties) and combines the edge
/// interval with that neighbor's bound by the triangle inequality. Anchor
/// `k` starts at hop 0 with bound `[0, 0]`, so a direct measurement is the
/// one-hop case. Anchors relay too: another anchor's bound to `k` is its
/// exact distance, known once the hop count reaches it.
pub fn propagate_distance_bounds(
    scenario: &NetworkScenario,
    bounds: &BTreeMap<EdgeKey, IntervalBound>,
) -> Result<BoundTable> {
    let topo = scenario.topology()?;
    let n = scenario.n_sensors();
    let m = scenario.anchors.len();
    let anchors = scenario.anchor_positions();
    // Nodes: sensors 0..n, then anchors n..n+m.
    let ids: Vec<NodeId> = scenario.sensors.iter().chain(scenario.anchors.iter().map(|a| &a.id)).copied().collect();
    let mut nbrs: Vec<Vec<(usize, IntervalBound)>> = vec![Vec::new(); n + m];
    let interval = |key: &EdgeKey| {
        bounds
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidScenario(format!("no interval for {}-{}", key.a, key.b)))
    };
    for l in &topo.sensor_edges {
        let b = interval(&l.key)?;
        nbrs[l.i].push((l.j, b));
        nbrs[l.j].push((l.i, b));
    }
    for l in &topo.anchor_edges {
        let b = interval(&l.key)?;
        nbrs[l.sensor].push((n + l.anchor, b));
        nbrs[n + l.anchor].push((l.sensor, b));
    }
    for v in &mut nbrs {
        v.sort_by_key(|&(u, _)| ids[u]);
    }
    let mut table: Vec<Vec<Option<AnchorBound>>> = vec![vec![None; m]; n + m];
    for k in 0..m {
        table[n + k][k] = Some(AnchorBound { lower: 0.0, upper: 0.0, hops: 0 });
    }
    loop {
        let snapshot = table.clone();
        let mut changed = false;
        for v in 0..n + m {
            for k in 0..m {
                if v == n + k {
                    continue;
                }
                let mut choice: Option<(IntervalBound, AnchorBound)> = None;
                for &(u, e) in &nbrs[v] {
                    if let Some(b) = snapshot[u][k] {
                        if choice.is_none_or(|(_, c)| b.hops < c.hops) {
                            choice = Some((e, b));
                        }
                    }
                }
                let Some((e, b)) = choice else { continue };
                let hops = b.hops + 1;
                let next = if v >= n {
                    let d = anchors[v - n].dist(anchors[k]);
                    AnchorBound { lower: d, upper: d, hops }
                } else {
                    AnchorBound {
                        lower: (e.lower - b.upper).max(b.lower - e.upper).max(0.0),
                        upper: e.upper + b.upper,
                        hops,
                    }
                };
                if table[v][k] != Some(next) {
                    table[v][k] = Some(next);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut entries = Vec::with_capacity(n);
    for (i, row) in table.into_iter().take(n).enumerate() {
        let mut out = Vec::with_capacity(m);
        for (k, b) in row.into_iter().enumerate() {
            out.push(b.ok_or(Error::UnreachableAnchor {
                sensor: scenario.sensors[i],
                anchor: scenario.anchors[k].id,
            })?);
        }
        entries.push(out);
    }
    Ok(BoundTable { entries })
}

/// `lower² ≤ ‖y − center‖² ≤ upper²` in a local problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalConstraint {
    pub center: Point2,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSolution {
    pub estimate: Point2,
    pub value: f64,
    pub status: SolveStatus,
}

/// Variable layout: `t`, then one upper multiplier per constraint, then one
/// lower multiplier per constraint with positive `lower`.
pub fn assemble_local_sdp(constraints: &[LocalConstraint]) -> SdpProblem {
    let lowers: Vec<usize> = (0..constraints.len()).filter(|&m| constraints[m].lower > 0.0).collect();
    let nu = constraints.len();
    let mut p = SdpProblem::new(1 + nu + lowers.len());
    let lmi = p.add_block(3);
    let norm = p.add_block(1);
    p.set_objective(0, 1.0);
    p.add_coefficient(lmi, 0, 2, 2, 1.0);
    p.add_constant(norm, 0, 0, -1.0);
    let place = |p: &mut SdpProblem, var: usize, c: &LocalConstraint, sign: f64| {
        p.add_coefficient(lmi, var, 0, 0, sign);
        p.add_coefficient(lmi, var, 1, 1, sign);
        p.add_coefficient(lmi, var, 2, 0, sign * c.center.x);
        p.add_coefficient(lmi, var, 2, 1, sign * c.center.y);
        p.add_coefficient(norm, var, 0, 0, sign);
        p.add_scalar_inequality(0.0, &[(var, 1.0)]);
    };
    for (m, c) in constraints.iter().enumerate() {
        let var = 1 + m;
        p.set_objective(var, c.upper * c.upper - c.center.norm_sq());
        place(&mut p, var, c, 1.0);
    }
    for (q, &m) in lowers.iter().enumerate() {
        let c = &constraints[m];
        let var = 1 + nu + q;
        p.set_objective(var, c.center.norm_sq() - c.lower * c.lower);
        place(&mut p, var, c, -1.0);
    }
    p
}

/// Solve one local problem.
///
/// The value is rebuilt from the final multipliers, clamped to be
/// nonnegative and topped up to weight 1 on the first constraint: for any
/// such multipliers `|g|²/M + h` bounds the lifted radius around `g/M`. The
/// result is therefore a valid bound even when the solver stops short of
/// optimality, only a looser one. Statuses `Infeasible` and `Unbounded`
/// carry no usable multipliers and yield a NaN value.
pub fn solve_local(constraints: &[LocalConstraint], solver: &SolverConfig) -> Result<LocalSolution> {
    if constraints.is_empty() {
        return Err(Error::InvalidScenario("local problem without constraints".into()));
    }
    let p = assemble_local_sdp(constraints);
    let sol = solve(&p, solver)?;
    let usable = !matches!(sol.status, SolveStatus::Infeasible | SolveStatus::Unbounded)
        && sol.x.iter().all(|v| v.is_finite());
    if !usable {
        return Ok(LocalSolution { estimate: Point2::default(), value: f64::NAN, status: sol.status });
    }
    let nu = constraints.len();
    let mut upper: Vec<f64> = (0..nu).map(|m| sol.x[1 + m].max(0.0)).collect();
    let lower: Vec<f64> = (0..lower_count(constraints))
        .map(|q| sol.x[1 + nu + q].max(0.0))
        .collect();
    let weight = upper.iter().sum::<f64>() - lower.iter().sum::<f64>();
    if weight < 1.0 {
        upper[0] += 1.0 - weight;
    }
    let mut weight = 0.0;
    let mut g = Point2::default();
    let mut h = 0.0;
    for (c, &mu) in constraints.iter().zip(&upper) {
        weight += mu;
        g = g + c.center * mu;
        h += mu * (c.upper * c.upper - c.center.norm_sq());
    }
    for (c, &la) in constraints.iter().filter(|c| c.lower > 0.0).zip(&lower) {
        weight -= la;
        g = g - c.center * la;
        h += la * (c.center.norm_sq() - c.lower * c.lower);
    }
    let value = (g.norm_sq() / weight + h).max(0.0);
    Ok(LocalSolution { estimate: g * (1.0 / weight), value, status: sol.status })
}

fn lower_count(constraints: &[LocalConstraint]) -> usize {
    constraints.iter().filter(|c| c.lower > 0.0).count()
}

/// Initial estimate of sensor `i` from its bounds to every anchor.
pub fn initial_estimate(
    i: usize,
    table: &BoundTable,
    anchors: &[Point2],
    solver: &SolverConfig,
) -> Result<NodeState> {
    let cons: Vec<LocalConstraint> = anchors
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let b = table.get(i, k);
            LocalConstraint { center: a, lower: b.lower, upper: b.upper }
        })
        .collect();
    let sol = solve_local(&cons, solver)?;
    if !sol.value.is_finite() {
        return Err(Error::Solver { status: sol.status });
    }
    Ok(NodeState { estimate: sol.estimate, radius_sq: sol.value, localized: false, iteration: 0 })
}

/// A neighbor as seen by a local update: its current estimate (exact for
/// anchors) and the measured interval to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborView {
    pub estimate: Point2,
    pub bound: IntervalBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeUpdate {
    pub state: NodeState,
    /// Optimal value before clamping to the previous radius.
    pub raw_radius_sq: f64,
    pub status: SolveStatus,
}

/// One refinement step for a single sensor. A non-optimal solve keeps the
/// previous estimate and radius.
pub fn iterate_node(
    own: &NodeState,
    neighbors: &[NeighborView],
    config: &DisMinMaxConfig,
) -> Result<NodeUpdate> {
    let next_iter = own.iteration + 1;
    if !own.radius_sq.is_finite() {
        return Err(Error::NumericalFailure(format!("radius {}", own.radius_sq)));
    }
    // Localization compares accepted radii: a round that cannot tighten the
    // ball leaves it unchanged, which counts as converged.
    let keep = |status, raw_radius_sq| NodeUpdate {
        state: NodeState { iteration: next_iter, localized: true, ..*own },
        raw_radius_sq,
        status,
    };
    if own.radius_sq <= EXACT_RADIUS_SQ || neighbors.is_empty() {
        return Ok(keep(SolveStatus::Optimal, own.radius_sq));
    }
    let mut cons = Vec::with_capacity(neighbors.len() + 1);
    cons.push(LocalConstraint { center: own.estimate, lower: 0.0, upper: own.radius_sq.sqrt() });
    cons.extend(neighbors.iter().map(|nb| LocalConstraint {
        center: nb.estimate,
        lower: nb.bound.lower,
        upper: nb.bound.upper,
    }));
    let sol = solve_local(&cons, &config.solver)?;
    if !(sol.value <= own.radius_sq) {
        return Ok(keep(sol.status, sol.value));
    }
    Ok(NodeUpdate {
        state: NodeState {
            estimate: sol.estimate,
            radius_sq: sol.value,
            localized: own.radius_sq - sol.value <= config.epsilon,
            iteration: next_iter,
        },
        raw_radius_sq: sol.value,
        status: sol.status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub radius_sq: f64,
    pub raw_radius_sq: f64,
    pub localized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub per_node: Vec<NodeRecord>,
    /// `sqrt(Σᵢ Rᵢ² / n)`.
    pub rmse_upper_bound: f64,
    /// Reals received by updating sensors this round.
    pub messages: usize,
    /// Sensors whose solve this round did not reach optimality.
    pub failed: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    AllLocalized,
    MaxRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisMinMaxTrace {
    pub rounds: Vec<RoundRecord>,
    pub status: TraceStatus,
    pub bounds: BoundTable,
}

impl DisMinMaxTrace {
    pub fn final_round(&self) -> &RoundRecord {
        self.rounds.last().expect("trace has the initial round")
    }

    pub fn final_positions(&self) -> BTreeMap<NodeId, Point2> {
        self.final_round().per_node.iter().map(|r| (r.id, Point2::new(r.x, r.y))).collect()
    }

    /// One JSON object per round.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn round_record(
    round: usize,
    ids: &[NodeId],
    states: &[NodeState],
    raw: &[f64],
    messages: usize,
    failed: Vec<NodeId>,
) -> RoundRecord {
    let n = states.len() as f64;
    RoundRecord {
        round,
        per_node: ids
            .iter()
            .zip(states)
            .zip(raw)
            .map(|((&id, s), &raw)| NodeRecord {
                id,
                x: s.estimate.x,
                y: s.estimate.y,
                radius_sq: s.radius_sq,
                raw_radius_sq: raw,
                localized: s.localized,
            })
            .collect(),
        rmse_upper_bound: (states.iter().map(|s| s.radius_sq).sum::<f64>() / n).sqrt(),
        messages,
        failed,
    }
}

/// Run bound propagation, initial estimation and synchronous refinement
/// until every sensor is localized or `max_rounds` refinement rounds ran.
/// Round 0 of the trace holds the initial estimates.
pub fn run_dis_minmax(scenario: &NetworkScenario, config: &DisMinMaxConfig) -> Result<DisMinMaxTrace> {
    config.check()?;
    let topo = scenario.topology()?;
    let bounds = build_feasibility_intervals(scenario);
    let table = propagate_distance_bounds(scenario, &bounds)?;
    let anchors = scenario.anchor_positions();
    let n = scenario.n_sensors();

    let mut states: Vec<NodeState> = (0..n)
        .into_par_iter()
        .map(|i| initial_estimate(i, &table, &anchors, &config.solver))
        .collect::<Result<_>>()?;
    let mut raw: Vec<f64> = states.iter().map(|s| s.radius_sq).collect();
    let ids = &scenario.sensors;
    let mut rounds = vec![round_record(0, ids, &states, &raw, 0, Vec::new())];

    // Sensor neighbors (by index) and anchor neighbors (fixed), id-sorted.
    let mut sensor_nbrs: Vec<BTreeMap<NodeId, (usize, IntervalBound)>> = vec![BTreeMap::new(); n];
    for l in &topo.sensor_edges {
        let b = bounds[&l.key];
        sensor_nbrs[l.i].insert(scenario.sensors[l.j], (l.j, b));
        sensor_nbrs[l.j].insert(scenario.sensors[l.i], (l.i, b));
    }
    let mut anchor_nbrs: Vec<Vec<NeighborView>> = vec![Vec::new(); n];
    for l in &topo.anchor_edges {
        anchor_nbrs[l.sensor].push(NeighborView { estimate: anchors[l.anchor], bound: bounds[&l.key] });
    }

    let mut status = TraceStatus::MaxRounds;
    for round in 1..=config.max_rounds {
        if states.iter().all(|s| s.localized) {
            status = TraceStatus::AllLocalized;
            break;
        }
        let snapshot = &states;
        let updates: Vec<Option<NodeUpdate>> = (0..n)
            .into_par_iter()
            .map(|i| {
                if snapshot[i].localized {
                    return Ok(None);
                }
                let mut views: Vec<NeighborView> = sensor_nbrs[i]
                    .values()
                    .map(|&(j, b)| {
                        let bound = if config.inflate_neighbor_bounds {
                            let r = snapshot[j].radius_sq.sqrt();
                            IntervalBound { lower: (b.lower - r).max(0.0), upper: b.upper + r }
                        } else {
                            b
                        };
                        NeighborView { estimate: snapshot[j].estimate, bound }
                    })
                    .collect();
                views.extend_from_slice(&anchor_nbrs[i]);
                iterate_node(&snapshot[i], &views, config).map(Some)
            })
            .collect::<Result<_>>()?;
        let mut messages = 0;
        let mut failed = Vec::new();
        for (i, u) in updates.into_iter().enumerate() {
            if let Some(u) = u {
                messages += 2 * sensor_nbrs[i].len();
                if u.status != SolveStatus::Optimal {
                    failed.push(ids[i]);
                }
                states[i] = u.state;
                raw[i] = u.raw_radius_sq;
            }
        }
        rounds.push(round_record(round, ids, &states, &raw, messages, failed));
    }
    if states.iter().all(|s| s.localized) {
        status = TraceStatus::AllLocalized;
    }
    Ok(DisMinMaxTrace { rounds, status, bounds: table })
}

/// Sensors with no anchor edges, for diagnostics.
pub fn sensors_without_anchor_edges(scenario: &NetworkScenario) -> Result<BTreeSet<NodeId>> {
    let topo = scenario.topology()?;
    let mut out: BTreeSet<NodeId> = scenario.sensors.iter().copied().collect();
    for l in &topo.anchor_edges {
        out.remove(&scenario.sensors[l.sensor]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{grid_relaxed_center, grid_relaxed_radius, Annulus, FeasibleRegion};
    use crate::model::{Anchor, Measurement};

    fn chain(z_ij: f64, z_jk: f64, gamma: f64) -> NetworkScenario {
        // sensor 0 -- sensor 1 -- anchor 2, plus anchors 3, 4 seen by sensor 1.
        NetworkScenario {
            sensors: vec![NodeId(0), NodeId(1)],
            anchors: vec![
                Anchor { id: NodeId(2), x: 2.0, y: 0.0 },
                Anchor { id: NodeId(3), x: 1.0, y: 1.0 },
                Anchor { id: NodeId(4), x: 1.0, y: -1.0 },
            ],
            true_positions: None,
            edges: vec![
                Measurement { a: NodeId(0), b: NodeId(1), z: z_ij },
                Measurement { a: NodeId(1), b: NodeId(2), z: z_jk },
                Measurement { a: NodeId(1), b: NodeId(3), z: 1.0 },
                Measurement { a: NodeId(1), b: NodeId(4), z: 1.0 },
            ],
            gamma,
            sensing_range: 1.5,
        }
    }

    fn table(s: &NetworkScenario) -> BoundTable {
        propagate_distance_bounds(s, &build_feasibility_intervals(s)).unwrap()
    }

    #[test]
    fn direct_bound() {
        let s = chain(0.5, 0.5, 0.1);
        let b = table(&s).get(1, 0);
        assert_eq!(b.hops, 1);
        assert!((b.lower - 0.4).abs() < 1e-15 && (b.upper - 0.6).abs() < 1e-15);
    }

    #[test]
    fn two_hop_bound() {
        let s = chain(0.5, 0.4, 0.1);
        let b = table(&s).get(0, 0);
        assert_eq!(b.hops, 2);
        assert_eq!(b.lower, 0.0);
        assert!((b.upper - 1.1).abs() < 1e-12);
    }

    #[test]
    fn collinear_chain_is_loose() {
        let s = chain(1.0, 1.0, 0.0);
        let b = table(&s).get(0, 0);
        assert_eq!((b.lower, b.upper, b.hops), (0.0, 2.0, 2));
    }

    #[test]
    fn shortest_path_then_smallest_id() {
        // Sensor 0 reaches anchor 9 through 1 (2 hops) or 2 (4 hops); sensor
        // 3 reaches it through 1 or 4, both 2 hops, and picks 1.
        let s = NetworkScenario {
            sensors: vec![NodeId(0), NodeId(1), NodeId(2), NodeId(3), NodeId(4), NodeId(5)],
            anchors: vec![Anchor { id: NodeId(9), x: 0.0, y: 0.0 }],
            true_positions: None,
            edges: vec![
                Measurement { a: NodeId(0), b: NodeId(1), z: 0.3 },
                Measurement { a: NodeId(0), b: NodeId(2), z: 0.1 },
                Measurement { a: NodeId(2), b: NodeId(5), z: 0.1 },
                Measurement { a: NodeId(5), b: NodeId(4), z: 0.1 },
                Measurement { a: NodeId(1), b: NodeId(9), z: 0.5 },
                Measurement { a: NodeId(4), b: NodeId(9), z: 0.2 },
                Measurement { a: NodeId(3), b: NodeId(1), z: 0.4 },
                Measurement { a: NodeId(3), b: NodeId(4), z: 0.1 },
            ],
            gamma: 0.0,
            sensing_range: 1.0,
        };
        let t = table(&s);
        let b0 = t.get(0, 0);
        assert_eq!(b0.hops, 2);
        assert!((b0.lower - 0.2).abs() < 1e-12 && (b0.upper - 0.8).abs() < 1e-12, "{b0:?}");
        let b3 = t.get(3, 0);
        assert_eq!(b3.hops, 2);
        assert!((b3.upper - 0.9).abs() < 1e-12, "{b3:?}");
        // Sensor 2 ties at 3 hops via 0 (loose) and 5 (tight); id 0 wins.
        let b2 = t.get(2, 0);
        assert_eq!(b2.hops, 3);
        assert!((b2.upper - 0.9).abs() < 1e-12, "{b2:?}");
    }

    #[test]
    fn anchors_relay_with_exact_distances() {
        // sensor 0 -- anchor 2 -- sensor 1 -- anchor 3; anchors 1.0 apart.
        let s = NetworkScenario {
            sensors: vec![NodeId(0), NodeId(1)],
            anchors: vec![Anchor { id: NodeId(2), x: 0.0, y: 0.0 }, Anchor { id: NodeId(3), x: 1.0, y: 0.0 }],
            true_positions: None,
            edges: vec![
                Measurement { a: NodeId(0), b: NodeId(2), z: 0.3 },
                Measurement { a: NodeId(1), b: NodeId(2), z: 0.6 },
                Measurement { a: NodeId(1), b: NodeId(3), z: 0.5 },
            ],
            gamma: 0.05,
            sensing_range: 0.7,
        };
        let b = table(&s).get(0, 1);
        assert_eq!(b.hops, 3);
        assert!((b.lower - 0.65).abs() < 1e-12 && (b.upper - 1.35).abs() < 1e-12, "{b:?}");
    }

    #[test]
    fn unreachable_anchor_is_reported() {
        let mut s = chain(0.5, 0.5, 0.1);
        s.edges.remove(0);
        assert!(matches!(
            propagate_distance_bounds(&s, &build_feasibility_intervals(&s)),
            Err(Error::UnreachableAnchor { sensor: NodeId(0), .. })
        ));
    }

    fn corners() -> Vec<Point2> {
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 1.0)]
    }

    fn direct_table(truth: Point2, anchors: &[Point2], gamma: f64) -> BoundTable {
        BoundTable {
            entries: vec![anchors
                .iter()
                .map(|a| {
                    let d = truth.dist(*a);
                    AnchorBound { lower: (d - gamma).max(0.0), upper: d + gamma, hops: 1 }
                })
                .collect()],
        }
    }

    #[test]
    fn initial_estimate_exact() {
        let truth = Point2::new(0.3, 0.7);
        let t = direct_table(truth, &corners(), 0.0);
        let s = initial_estimate(0, &t, &corners(), &SolverConfig::default()).unwrap();
        assert!(s.estimate.dist(truth) < 1e-4, "{s:?}");
        assert!(s.radius_sq <= 1e-6, "{s:?}");
    }

    #[test]
    fn initial_estimate_matches_relaxed_oracle() {
        let anchors = corners();
        let t = BoundTable {
            entries: vec![anchors.iter().map(|_| AnchorBound { lower: 0.0, upper: 2.0, hops: 3 }).collect()],
        };
        let s = initial_estimate(0, &t, &anchors, &SolverConfig::default()).unwrap();
        let region = FeasibleRegion::new(
            anchors.iter().map(|&a| Annulus { center: a, lower: 0.0, upper: 2.0 }).collect(),
        )
        .unwrap();
        // The square's symmetry fixes the center.
        let center = Point2::new(0.5, 0.5);
        let oracle = grid_relaxed_radius(&region, region.bbox(), 1e-3, center).unwrap();
        assert!(s.estimate.dist(center) < 1e-4, "{s:?}");
        assert!((s.radius_sq - oracle * oracle).abs() < 5e-3, "{s:?} vs {oracle}");
    }

    #[test]
    fn initial_estimate_contains_truth() {
        let truth = Point2::new(0.62, 0.21);
        let t = direct_table(truth, &corners(), 0.08);
        let s = initial_estimate(0, &t, &corners(), &SolverConfig::default()).unwrap();
        assert!(truth.dist_sq(s.estimate) <= s.radius_sq);
    }

    /// The local update must land on the lifted-region center of the
    /// constraint set it sees: own ball plus neighbor annuli.
    #[test]
    fn iterate_matches_relaxed_oracle() {
        let own = NodeState { estimate: Point2::new(0.4, 0.35), radius_sq: 0.04, localized: false, iteration: 3 };
        let nbrs = [
            NeighborView { estimate: Point2::new(0.0, 0.0), bound: IntervalBound { lower: 0.45, upper: 0.6 } },
            NeighborView { estimate: Point2::new(0.9, 0.2), bound: IntervalBound { lower: 0.4, upper: 0.55 } },
            NeighborView { estimate: Point2::new(0.3, 0.9), bound: IntervalBound { lower: 0.0, upper: 0.6 } },
        ];
        let cfg = DisMinMaxConfig::default();
        let u = iterate_node(&own, &nbrs, &cfg).unwrap();
        assert_eq!(u.status, SolveStatus::Optimal);
        let mut ann = vec![Annulus { center: own.estimate, lower: 0.0, upper: 0.2 }];
        ann.extend(nbrs.iter().map(|v| Annulus { center: v.estimate, lower: v.bound.lower, upper: v.bound.upper }));
        let region = FeasibleRegion::new(ann).unwrap();
        let oracle = grid_relaxed_center(&region, region.bbox(), 1e-3).unwrap();
        assert!(u.state.estimate.dist(oracle.center) < 3e-3, "{u:?} vs {oracle:?}");
        assert!((u.raw_radius_sq - oracle.radius.powi(2)).abs() < 2e-3, "{u:?} vs {oracle:?}");
        assert!(u.raw_radius_sq <= own.radius_sq);
        // Descent identity: moving the center costs radius.
        let moved = u.state.estimate.dist_sq(own.estimate);
        assert!(u.raw_radius_sq <= own.radius_sq - moved + 1e-6);
        assert_eq!(u.state.iteration, 4);
    }

    #[test]
    fn exact_neighbors_pin_the_node() {
        let truth = Point2::new(0.35, 0.55);
        let nbrs: Vec<NeighborView> = corners()
            .into_iter()
            .map(|a| {
                let d = truth.dist(a);
                NeighborView { estimate: a, bound: IntervalBound { lower: d, upper: d } }
            })
            .collect();
        let mut own = NodeState { estimate: Point2::new(0.4, 0.5), radius_sq: 0.01, localized: false, iteration: 0 };
        let cfg = DisMinMaxConfig::default();
        for _ in 0..3 {
            own = iterate_node(&own, &nbrs, &cfg).unwrap().state;
        }
        assert!(own.estimate.dist(truth) < 1e-4, "{own:?}");
        assert!(own.radius_sq < 1e-6, "{own:?}");
    }

    #[test]
    fn exact_radius_skips_the_solve() {
        let own = NodeState { estimate: Point2::new(0.1, 0.1), radius_sq: 0.0, localized: false, iteration: 0 };
        let nb = [NeighborView { estimate: Point2::new(0.0, 0.0), bound: IntervalBound { lower: 9.0, upper: 9.0 } }];
        let u = iterate_node(&own, &nb, &DisMinMaxConfig::default()).unwrap();
        assert_eq!(u.state.estimate, own.estimate);
        assert_eq!(u.state.radius_sq, 0.0);
    }

    #[test]
    fn local_sdp_layout() {
        let p = assemble_local_sdp(&[
            LocalConstraint { center: Point2::new(0.0, 0.0), lower: 0.0, upper: 1.0 },
            LocalConstraint { center: Point2::new(1.0, 0.0), lower: 0.5, upper: 1.0 },
        ]);
        // t, two upper multipliers, one lower multiplier.
        assert_eq!(p.num_vars(), 4);
        assert_eq!(p.blocks()[0].dim, 3);
        assert_eq!(p.blocks()[1].dim, 1);
    }
}
