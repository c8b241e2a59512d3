//! Network, measurement and error-model types.
//!
//! A [`NetworkScenario`] holds sensors, anchors, the undirected measurement
//! graph and one range measurement per edge. [`build_feasibility_intervals`]
//! turns measurements into the per-edge distance intervals that define the
//! feasible set of sensor positions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

/// Area tolerance for the anchor non-collinearity test.
pub const COLLINEAR_AREA_TOL: f64 = 1e-12;

/// Regeneration budget when a random draw yields a disconnected graph.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        (self - other).norm_sq()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Twice the signed area of the triangle `abc`.
pub fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

impl Anchor {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Unordered node pair, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub a: NodeId,
    pub b: NodeId,
}

impl EdgeKey {
    pub fn new(u: NodeId, v: NodeId) -> Self {
        if u <= v {
            Self { a: u, b: v }
        } else {
            Self { a: v, b: u }
        }
    }
}

/// One range measurement `z` on the edge `{a, b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub a: NodeId,
    pub b: NodeId,
    pub z: f64,
}

impl Measurement {
    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(self.a, self.b)
    }
}

/// Closed distance interval `[lower, upper]` for one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBound {
    pub lower: f64,
    pub upper: f64,
}

impl IntervalBound {
    /// `[max(z - gamma, 0), z + gamma]`.
    pub fn from_measurement(z: f64, gamma: f64) -> Self {
        Self {
            lower: (z - gamma).max(0.0),
            upper: z + gamma,
        }
    }

    pub fn contains(&self, d: f64) -> bool {
        self.lower <= d && d <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub sensors: Vec<NodeId>,
    pub anchors: Vec<Anchor>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "xy_map")]
    pub true_positions: Option<BTreeMap<NodeId, Point2>>,
    pub edges: Vec<Measurement>,
    pub gamma: f64,
    pub sensing_range: f64,
}

/// A sensor-sensor edge in index form (`i < j` are sensor indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorLink {
    pub key: EdgeKey,
    pub i: usize,
    pub j: usize,
    pub z: f64,
}

/// A sensor-anchor edge in index form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorLink {
    pub key: EdgeKey,
    pub sensor: usize,
    pub anchor: usize,
    pub z: f64,
}

/// Edges of a scenario split by kind and mapped to dense indices.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    pub sensor_edges: Vec<SensorLink>,
    pub anchor_edges: Vec<AnchorLink>,
}

enum Role {
    Sensor(usize),
    Anchor(usize),
}

impl NetworkScenario {
    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn anchor_positions(&self) -> Vec<Point2> {
        self.anchors.iter().map(Anchor::position).collect()
    }

    pub fn sensor_index(&self) -> BTreeMap<NodeId, usize> {
        self.sensors.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    fn roles(&self) -> BTreeMap<NodeId, Role> {
        let mut roles = BTreeMap::new();
        for (i, &id) in self.sensors.iter().enumerate() {
            roles.insert(id, Role::Sensor(i));
        }
        for (k, a) in self.anchors.iter().enumerate() {
            roles.insert(a.id, Role::Anchor(k));
        }
        roles
    }

    /// Structural checks: unique ids, known endpoints, one finite nonnegative
    /// measurement per sensor-sensor or sensor-anchor pair.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let mut ids = BTreeSet::new();
        for id in self.sensors.iter().copied().chain(self.anchors.iter().map(|a| a.id)) {
            if !ids.insert(id) {
                return bad(format!("duplicate node id {id}"));
            }
        }
        if self.sensors.is_empty() {
            return bad("no sensors".into());
        }
        for a in &self.anchors {
            if !a.position().is_finite() {
                return bad(format!("anchor {} has a non-finite position", a.id));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if !(self.sensing_range.is_finite() && self.sensing_range > 0.0) {
            return bad(format!("sensing_range must be > 0, got {}", self.sensing_range));
        }
        if let Some(truth) = &self.true_positions {
            for id in &self.sensors {
                match truth.get(id) {
                    Some(p) if p.is_finite() => {}
                    Some(_) => return bad(format!("true position of {id} is not finite")),
                    None => return bad(format!("true position of sensor {id} missing")),
                }
            }
        }
        let roles = self.roles();
        let mut seen = BTreeSet::new();
        for m in &self.edges {
            if m.a == m.b {
                return bad(format!("self-loop on {}", m.a));
            }
            match (roles.get(&m.a), roles.get(&m.b)) {
                (None, _) => return bad(format!("edge references unknown node {}", m.a)),
                (_, None) => return bad(format!("edge references unknown node {}", m.b)),
                (Some(Role::Anchor(_)), Some(Role::Anchor(_))) => {
                    return bad(format!("anchor-anchor edge {}-{}", m.a, m.b))
                }
                _ => {}
            }
            if !(m.z.is_finite() && m.z >= 0.0) {
                return bad(format!("measurement on {}-{} is {}", m.a, m.b, m.z));
            }
            if !seen.insert(m.key()) {
                return bad(format!("edge {}-{} measured twice", m.a, m.b));
            }
        }
        Ok(())
    }

    /// Split edges into sensor-sensor and sensor-anchor lists.
    pub fn topology(&self) -> Result<Topology> {
        self.check()?;
        let roles = self.roles();
        let mut topo = Topology::default();
        for m in &self.edges {
            let key = m.key();
            match (&roles[&m.a], &roles[&m.b]) {
                (Role::Sensor(i), Role::Sensor(j)) => topo.sensor_edges.push(SensorLink {
                    key,
                    i: (*i).min(*j),
                    j: (*i).max(*j),
                    z: m.z,
                }),
                (Role::Sensor(i), Role::Anchor(k)) | (Role::Anchor(k), Role::Sensor(i)) => {
                    topo.anchor_edges.push(AnchorLink { key, sensor: *i, anchor: *k, z: m.z })
                }
                (Role::Anchor(_), Role::Anchor(_)) => unreachable!("rejected by check"),
            }
        }
        Ok(topo)
    }

    pub fn position_of(&self, id: NodeId) -> Option<Point2> {
        if let Some(a) = self.anchors.iter().find(|a| a.id == id) {
            return Some(a.position());
        }
        self.true_positions.as_ref()?.get(&id).copied()
    }

    /// True length of every edge, when the truth is known.
    pub fn true_distance(&self, m: &Measurement) -> Option<f64> {
        Some(self.position_of(m.a)?.dist(self.position_of(m.b)?))
    }

    /// Whether every realized error `|z - d|` is within `gamma`. `None`
    /// without ground truth.
    pub fn errors_within_bound(&self) -> Option<bool> {
        let mut ok = true;
        for m in &self.edges {
            let d = self.true_distance(m)?;
            ok &= (m.z - d).abs() <= self.gamma;
        }
        Some(ok)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let scenario: Self = serde_json::from_str(s).map_err(|source| Error::Json {
            context: "scenario".into(),
            source,
        })?;
        scenario.check()?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// `true_positions` is written as `{"id": [x, y]}`.
mod xy_map {
    use super::{NodeId, Point2};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &Option<BTreeMap<NodeId, Point2>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        map.as_ref()
            .map(|m| m.iter().map(|(k, p)| (*k, [p.x, p.y])).collect::<BTreeMap<_, _>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<BTreeMap<NodeId, Point2>>, D::Error> {
        let raw: Option<BTreeMap<NodeId, [f64; 2]>> = Option::deserialize(d)?;
        Ok(raw.map(|m| m.into_iter().map(|(k, [x, y])| (k, Point2::new(x, y))).collect()))
    }
}

/// Serde helper writing a position map as `{"id": [x, y]}`.
pub mod xy_points {
    use super::{NodeId, Point2};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(map: &BTreeMap<NodeId, Point2>, s: S) -> Result<S::Ok, S::Error> {
        map.iter().map(|(k, p)| (*k, [p.x, p.y])).collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<NodeId, Point2>, D::Error> {
        let raw: BTreeMap<NodeId, [f64; 2]> = BTreeMap::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, [x, y])| (k, Point2::new(x, y))).collect())
    }
}

/// Square deployment area `[min, max]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub min: f64,
    pub max: f64,
}

impl Area {
    /// The unit square centred at the origin.
    pub const UNIT_CENTERED: Area = Area { min: -0.5, max: 0.5 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_sensors: usize,
    pub anchors: Vec<Point2>,
    pub sensing_range: f64,
    pub area: Area,
}

impl ScenarioConfig {
    /// Four anchors at `(±0.3, ±0.3)` in the centred unit square.
    pub fn inner_anchors(n_sensors: usize, sensing_range: f64) -> Self {
        Self {
            n_sensors,
            anchors: vec![
                Point2::new(-0.3, -0.3),
                Point2::new(0.3, -0.3),
                Point2::new(-0.3, 0.3),
                Point2::new(0.3, 0.3),
            ],
            sensing_range,
            area: Area::UNIT_CENTERED,
        }
    }

    /// Four anchors on the corners `(±0.5, ±0.5)` of the centred unit square.
    pub fn corner_anchors(n_sensors: usize, sensing_range: f64) -> Self {
        Self {
            n_sensors,
            anchors: vec![
                Point2::new(-0.5, -0.5),
                Point2::new(0.5, -0.5),
                Point2::new(-0.5, 0.5),
                Point2::new(0.5, 0.5),
            ],
            sensing_range,
            area: Area::UNIT_CENTERED,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n_sensors == 0 {
            return bad("n_sensors must be >= 1".into());
        }
        if !(self.sensing_range.is_finite() && self.sensing_range > 0.0) {
            return bad("sensing_range must be > 0".into());
        }
        if !(self.area.min.is_finite() && self.area.max.is_finite() && self.area.min < self.area.max)
        {
            return bad("empty deployment area".into());
        }
        if !anchors_noncollinear(&self.anchors) {
            return bad("need at least three non-collinear anchors".into());
        }
        Ok(())
    }
}

/// True when some anchor triple spans a triangle of area above
/// [`COLLINEAR_AREA_TOL`].
pub fn anchors_noncollinear(anchors: &[Point2]) -> bool {
    let n = anchors.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if 0.5 * cross(anchors[i], anchors[j], anchors[k]).abs() > COLLINEAR_AREA_TOL {
                    return true;
                }
            }
        }
    }
    false
}

/// Random network: sensors uniform on the area, an edge for every
/// sensor-sensor and sensor-anchor pair within sensing range, exact
/// measurements and `gamma = 0`. Sensors get ids `0..n`, anchors `n..n+m`.
///
/// A disconnected draw is regenerated from `derive_seed(seed, attempt)`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<NetworkScenario> {
    config.check()?;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt as u64) };
        let scenario = draw_scenario(config, s);
        if graph_connected(&scenario) {
            return Ok(scenario);
        }
    }
    Err(Error::Disconnected { attempts: MAX_GENERATION_ATTEMPTS })
}

fn draw_scenario(config: &ScenarioConfig, seed: u64) -> NetworkScenario {
    let mut rng = rng_from_seed(seed);
    let n = config.n_sensors;
    let span = config.area.max - config.area.min;
    let positions: Vec<Point2> = (0..n)
        .map(|_| {
            let x = config.area.min + span * rng.random::<f64>();
            let y = config.area.min + span * rng.random::<f64>();
            Point2::new(x, y)
        })
        .collect();
    let sensors: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
    let anchors: Vec<Anchor> = config
        .anchors
        .iter()
        .enumerate()
        .map(|(k, p)| Anchor { id: NodeId((n + k) as u32), x: p.x, y: p.y })
        .collect();

    let r = config.sensing_range;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = positions[i].dist(positions[j]);
            if d <= r {
                edges.push(Measurement { a: sensors[i], b: sensors[j], z: d });
            }
        }
        for a in &anchors {
            let d = positions[i].dist(a.position());
            if d <= r {
                edges.push(Measurement { a: sensors[i], b: a.id, z: d });
            }
        }
    }
    edges.sort_by_key(Measurement::key);

    NetworkScenario {
        true_positions: Some(sensors.iter().copied().zip(positions).collect()),
        sensors,
        anchors,
        edges,
        gamma: 0.0,
        sensing_range: r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ErrorModel {
    /// Errors uniform on `[-gamma, gamma]`.
    Uniform { gamma: f64 },
    /// Zero-mean Gaussian errors; the assumed bound is `3 sigma`.
    Gaussian { sigma: f64 },
    /// Gaussian inliers plus outliers uniform on `[-3 sigma, 3 sigma]`, with
    /// `round(ratio * inliers)` outliers.
    Mixture { sigma: f64, ratio: f64 },
}

impl ErrorModel {
    pub fn check(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            ErrorModel::Uniform { gamma } if gamma.is_finite() && gamma >= 0.0 => Ok(()),
            ErrorModel::Gaussian { sigma } if ok(sigma) => Ok(()),
            ErrorModel::Mixture { sigma, ratio } if ok(sigma) && ratio.is_finite() && ratio >= 0.0 => {
                Ok(())
            }
            m => Err(Error::InvalidModel(format!("{m:?}"))),
        }
    }

    /// The error bound assumed by the estimators.
    pub fn gamma(&self) -> f64 {
        match *self {
            ErrorModel::Uniform { gamma } => gamma,
            ErrorModel::Gaussian { sigma } | ErrorModel::Mixture { sigma, .. } => 3.0 * sigma,
        }
    }
}

/// Outliers among `n_edges` so that `outliers ≈ ratio * inliers`.
pub fn mixture_outlier_count(n_edges: usize, ratio: f64) -> usize {
    let o = (n_edges as f64 * ratio / (1.0 + ratio)).round() as usize;
    o.min(n_edges)
}

/// Replace every measurement with `true distance + error` and set `gamma`.
/// Errors are drawn per edge in stored edge order; a negative result is
/// clamped to zero.
pub fn apply_errors(
    scenario: &NetworkScenario,
    model: &ErrorModel,
    seed: u64,
) -> Result<NetworkScenario> {
    model.check()?;
    scenario.check()?;
    let errors = sample_errors(model, scenario.edges.len(), seed);
    let mut out = scenario.clone();
    for (m, e) in out.edges.iter_mut().zip(errors) {
        let d = scenario.true_distance(m).ok_or_else(|| {
            Error::InvalidScenario("apply_errors needs true positions".into())
        })?;
        m.z = (d + e).max(0.0);
    }
    out.gamma = model.gamma();
    Ok(out)
}

/// Draw `n` independent errors from `model`.
pub fn sample_errors(model: &ErrorModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    match *model {
        ErrorModel::Uniform { gamma } => {
            (0..n).map(|_| gamma * (2.0 * rng.random::<f64>() - 1.0)).collect()
        }
        ErrorModel::Gaussian { sigma } => {
            (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
        }
        ErrorModel::Mixture { sigma, ratio } => {
            outlier_mask(&mut rng, n, ratio)
                .into_iter()
                .map(|o| {
                    if o {
                        3.0 * sigma * (2.0 * rng.random::<f64>() - 1.0)
                    } else {
                        sigma * rng.sample::<f64, _>(StandardNormal)
                    }
                })
                .collect()
        }
    }
}

fn outlier_mask<R: Rng>(rng: &mut R, n: usize, ratio: f64) -> Vec<bool> {
    let mut outlier = vec![false; n];
    for idx in rand::seq::index::sample(rng, n, mixture_outlier_count(n, ratio)) {
        outlier[idx] = true;
    }
    outlier
}

/// `[max(z - gamma, 0), z + gamma]` for every edge.
pub fn build_feasibility_intervals(scenario: &NetworkScenario) -> BTreeMap<EdgeKey, IntervalBound> {
    scenario
        .edges
        .iter()
        .map(|m| (m.key(), IntervalBound::from_measurement(m.z, scenario.gamma)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub connected: bool,
    pub anchors_noncollinear: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.connected && self.anchors_noncollinear
    }
}

/// Necessary conditions for unique localizability: a connected graph over
/// sensors and anchors, and three non-collinear anchors.
pub fn validate_scenario(scenario: &NetworkScenario) -> ValidationReport {
    let mut warnings = Vec::new();
    if let Err(e) = scenario.check() {
        warnings.push(e.to_string());
    }
    if scenario.anchors.len() < 3 {
        warnings.push(format!("only {} anchors", scenario.anchors.len()));
    }
    let anchor_edges = scenario
        .edges
        .iter()
        .filter(|m| scenario.anchors.iter().any(|a| a.id == m.a || a.id == m.b))
        .count();
    if anchor_edges == 0 {
        warnings.push("no sensor-anchor measurements".into());
    }
    let mut degree: BTreeMap<NodeId, usize> = scenario.sensors.iter().map(|&s| (s, 0)).collect();
    for m in &scenario.edges {
        for id in [m.a, m.b] {
            if let Some(d) = degree.get_mut(&id) {
                *d += 1;
            }
        }
    }
    for (id, d) in degree {
        if d < 3 {
            warnings.push(format!("sensor {id} has only {d} measurements"));
        }
    }
    ValidationReport {
        connected: graph_connected(scenario),
        anchors_noncollinear: anchors_noncollinear(&scenario.anchor_positions()),
        warnings,
    }
}

fn graph_connected(scenario: &NetworkScenario) -> bool {
    let nodes: Vec<NodeId> = scenario
        .sensors
        .iter()
        .copied()
        .chain(scenario.anchors.iter().map(|a| a.id))
        .collect();
    let Some(&start) = nodes.first() else {
        return true;
    };
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = nodes.iter().map(|&v| (v, Vec::new())).collect();
    for m in &scenario.edges {
        if let (true, true) = (adj.contains_key(&m.a), adj.contains_key(&m.b)) {
            adj.get_mut(&m.a).unwrap().push(m.b);
            adj.get_mut(&m.b).unwrap().push(m.a);
        }
    }
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[&v] {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen.len() == nodes.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkScenario {
        NetworkScenario {
            sensors: vec![NodeId(0), NodeId(1)],
            anchors: vec![
                Anchor { id: NodeId(2), x: 0.0, y: 0.0 },
                Anchor { id: NodeId(3), x: 1.0, y: 0.0 },
                Anchor { id: NodeId(4), x: 0.0, y: 1.0 },
            ],
            true_positions: Some(BTreeMap::from([
                (NodeId(0), Point2::new(0.3, 0.4)),
                (NodeId(1), Point2::new(0.6, 0.2)),
            ])),
            edges: vec![
                Measurement { a: NodeId(0), b: NodeId(1), z: 0.36 },
                Measurement { a: NodeId(0), b: NodeId(2), z: 0.5 },
                Measurement { a: NodeId(1), b: NodeId(3), z: 0.45 },
                Measurement { a: NodeId(1), b: NodeId(4), z: 1.0 },
            ],
            gamma: 0.1,
            sensing_range: 1.0,
        }
    }

    #[test]
    fn interval_arithmetic() {
        assert_eq!(IntervalBound::from_measurement(0.5, 0.1).lower, 0.4);
        assert!((IntervalBound::from_measurement(0.5, 0.1).upper - 0.6).abs() < 1e-15);
        let clipped = IntervalBound::from_measurement(0.05, 0.1);
        assert_eq!(clipped.lower, 0.0);
        assert!((clipped.upper - 0.15).abs() < 1e-15);
        let exact = IntervalBound::from_measurement(0.7, 0.0);
        assert_eq!((exact.lower, exact.upper), (0.7, 0.7));
    }

    #[test]
    fn intervals_ignore_edge_order() {
        let s = tiny();
        let mut r = s.clone();
        r.edges.reverse();
        for m in &mut r.edges {
            std::mem::swap(&mut m.a, &mut m.b);
        }
        assert_eq!(build_feasibility_intervals(&s), build_feasibility_intervals(&r));
    }

    #[test]
    fn collinear_anchors_detected() {
        let mut s = tiny();
        s.anchors[2] = Anchor { id: NodeId(4), x: 2.0, y: 0.0 };
        let rep = validate_scenario(&s);
        assert!(!rep.anchors_noncollinear);
        assert!(rep.connected);
    }

    #[test]
    fn disconnected_graph_detected() {
        let mut s = tiny();
        s.edges.remove(0);
        s.edges.retain(|m| m.a != NodeId(1) && m.b != NodeId(1));
        let rep = validate_scenario(&s);
        assert!(!rep.connected);
    }

    #[test]
    fn check_rejects_bad_edges() {
        let mut s = tiny();
        s.edges.push(Measurement { a: NodeId(2), b: NodeId(3), z: 1.0 });
        assert!(s.check().is_err());
        let mut s = tiny();
        s.edges.push(Measurement { a: NodeId(1), b: NodeId(0), z: 0.3 });
        assert!(s.check().is_err());
        let mut s = tiny();
        s.edges[0].z = -0.1;
        assert!(s.check().is_err());
        let mut s = tiny();
        s.edges.push(Measurement { a: NodeId(0), b: NodeId(9), z: 0.3 });
        assert!(s.check().is_err());
    }

    #[test]
    fn topology_classifies_edges() {
        let t = tiny().topology().unwrap();
        assert_eq!(t.sensor_edges.len(), 1);
        assert_eq!(t.anchor_edges.len(), 3);
        assert_eq!((t.anchor_edges[1].sensor, t.anchor_edges[1].anchor), (1, 1));
        assert_eq!((t.anchor_edges[2].sensor, t.anchor_edges[2].anchor), (1, 2));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::inner_anchors(30, 0.5);
        let a = generate_scenario(&cfg, 11).unwrap();
        let b = generate_scenario(&cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_scenario(&cfg, 12).unwrap());
    }

    #[test]
    fn generated_edges_match_sensing_range() {
        let cfg = ScenarioConfig::corner_anchors(40, 0.3);
        let s = generate_scenario(&cfg, 5).unwrap();
        let truth = s.true_positions.as_ref().unwrap();
        let keys: BTreeSet<EdgeKey> = s.edges.iter().map(Measurement::key).collect();
        let mut pos: Vec<(NodeId, Point2)> = truth.iter().map(|(k, v)| (*k, *v)).collect();
        pos.extend(s.anchors.iter().map(|a| (a.id, a.position())));
        for (x, (u, pu)) in pos.iter().enumerate() {
            for (v, pv) in pos.iter().skip(x + 1) {
                let anchor_pair = s.anchors.iter().any(|a| a.id == *u)
                    && s.anchors.iter().any(|a| a.id == *v);
                let expected = !anchor_pair && pu.dist(*pv) <= 0.3;
                assert_eq!(keys.contains(&EdgeKey::new(*u, *v)), expected);
            }
        }
        for p in truth.values() {
            assert!(p.x >= -0.5 && p.x <= 0.5 && p.y >= -0.5 && p.y <= 0.5);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ScenarioConfig::inner_anchors(5, 0.5);
        cfg.anchors = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        assert!(generate_scenario(&cfg, 0).is_err());
        let cfg = ScenarioConfig::inner_anchors(0, 0.5);
        assert!(generate_scenario(&cfg, 0).is_err());
    }

    #[test]
    fn sparse_range_exhausts_retries() {
        let cfg = ScenarioConfig::corner_anchors(30, 0.01);
        assert!(matches!(generate_scenario(&cfg, 0), Err(Error::Disconnected { attempts: 100 })));
    }

    #[test]
    fn gaussian_sets_three_sigma() {
        let s = generate_scenario(&ScenarioConfig::inner_anchors(10, 0.6), 1).unwrap();
        let noisy = apply_errors(&s, &ErrorModel::Gaussian { sigma: 0.02 }, 3).unwrap();
        assert!((noisy.gamma - 0.06).abs() < 1e-15);
    }

    #[test]
    fn uniform_errors_within_support() {
        let s = generate_scenario(&ScenarioConfig::inner_anchors(30, 0.5), 2).unwrap();
        let noisy = apply_errors(&s, &ErrorModel::Uniform { gamma: 0.1 }, 9).unwrap();
        assert_eq!(noisy.gamma, 0.1);
        assert_eq!(noisy.errors_within_bound(), Some(true));
        for e in sample_errors(&ErrorModel::Uniform { gamma: 0.1 }, 10_000, 4) {
            assert!((-0.1..=0.1).contains(&e));
        }
    }

    #[test]
    fn mixture_outlier_count_oracle() {
        // Count oracle: the integer split o + i = n minimizing |o - ratio*i|.
        let oracle = |n: usize, ratio: f64| {
            (0..=n)
                .min_by(|&a, &b| {
                    let fa = (a as f64 - ratio * (n - a) as f64).abs();
                    let fb = (b as f64 - ratio * (n - b) as f64).abs();
                    fa.partial_cmp(&fb).unwrap()
                })
                .unwrap()
        };
        assert_eq!(mixture_outlier_count(100, 0.5), 33);
        for n in [1usize, 7, 50, 100, 333] {
            for ratio in [0.0, 0.1, 0.25, 0.5, 1.0] {
                let got = mixture_outlier_count(n, ratio) as i64;
                assert!((got - oracle(n, ratio) as i64).abs() <= 1, "n={n} ratio={ratio}");
            }
        }
        let mask = outlier_mask(&mut rng_from_seed(8), 100, 0.5);
        assert_eq!(mask.iter().filter(|&&o| o).count(), 33);
        assert_eq!(mask.iter().filter(|&&o| !o).count(), 67);
    }

    #[test]
    fn json_schema_round_trip() {
        let s = tiny();
        let text = s.to_json_string();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["anchors"][1]["x"], 1.0);
        assert_eq!(v["true_positions"]["0"][0], 0.3);
        assert_eq!(v["edges"][0]["z"], 0.36);
        assert_eq!(NetworkScenario::from_json_str(&text).unwrap(), s);
    }

    #[test]
    fn json_field_order_irrelevant() {
        let text = r#"{"sensing_range": 1.0, "gamma": 0.0,
            "edges": [{"z": 1.0, "b": 1, "a": 0}],
            "anchors": [{"y": 0.0, "x": 0.0, "id": 1}], "sensors": [0]}"#;
        let s = NetworkScenario::from_json_str(text).unwrap();
        assert_eq!(s.edges[0].key(), EdgeKey::new(NodeId(0), NodeId(1)));
        assert!(s.true_positions.is_none());
    }
}
