//! Brute-force geometry for a single sensor's feasible region.
//!
//! A region is an intersection of closed annuli. All oracles work on a
//! regular grid: feasible grid points are enumerated once, and centers are
//! searched over every grid point of the bounding box by branch and bound on
//! a 1-Lipschitz objective. Ties go to the lexicographically smallest grid
//! index `(i, j)`, `i` along x.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EdgeKey, IntervalBound, NetworkScenario, NodeId, Point2};

pub const DEFAULT_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: Point2,
    pub lower: f64,
    pub upper: f64,
}

impl Annulus {
    pub fn contains(&self, p: Point2) -> bool {
        let d = p.dist(self.center);
        self.lower <= d && d <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub constraints: Vec<Annulus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Point2,
    pub max: Point2,
}

impl FeasibleRegion {
    pub fn new(constraints: Vec<Annulus>) -> Result<Self> {
        for c in &constraints {
            if !(c.center.is_finite() && c.lower >= 0.0 && c.lower <= c.upper && c.upper.is_finite()) {
                return Err(Error::InvalidScenario(format!("bad annulus {c:?}")));
            }
        }
        if constraints.is_empty() {
            return Err(Error::InvalidScenario("region needs at least one constraint".into()));
        }
        Ok(Self { constraints })
    }

    /// Region of `sensor` from its anchor measurements and the given
    /// intervals. Sensor-sensor edges are ignored.
    pub fn for_sensor(
        scenario: &NetworkScenario,
        bounds: &BTreeMap<EdgeKey, IntervalBound>,
        sensor: NodeId,
    ) -> Result<Self> {
        let mut constraints = Vec::new();
        for a in &scenario.anchors {
            if let Some(b) = bounds.get(&EdgeKey::new(sensor, a.id)) {
                constraints.push(Annulus { center: a.position(), lower: b.lower, upper: b.upper });
            }
        }
        Self::new(constraints)
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.constraints.iter().all(|c| c.contains(p))
    }

    /// Intersection of the constraints' outer-disc boxes. It contains the
    /// region, hence its convex hull and every Chebyshev center.
    pub fn bbox(&self) -> BBox {
        let mut b = BBox {
            min: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            max: Point2::new(f64::INFINITY, f64::INFINITY),
        };
        for c in &self.constraints {
            b.min.x = b.min.x.max(c.center.x - c.upper);
            b.min.y = b.min.y.max(c.center.y - c.upper);
            b.max.x = b.max.x.min(c.center.x + c.upper);
            b.max.y = b.max.y.min(c.center.y + c.upper);
        }
        b
    }

    /// Largest feasible `δ` of the lifted region at `p`:
    /// `lower² ≤ ‖p − c‖² + δ ≤ upper²` for all constraints and `δ ≥ 0`.
    fn lift_slack(&self, p: Point2) -> Option<f64> {
        let mut hi = f64::INFINITY;
        let mut lo = 0.0f64;
        for c in &self.constraints {
            let d2 = p.dist_sq(c.center);
            hi = hi.min(c.upper * c.upper - d2);
            lo = lo.max(c.lower * c.lower - d2);
        }
        (hi >= lo).then_some(hi)
    }
}

pub fn membership(p: Point2, region: &FeasibleRegion) -> bool {
    region.contains(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point2,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(bbox: BBox, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidScenario(format!("resolution must be > 0, got {resolution}")));
        }
        let w = bbox.max.x - bbox.min.x;
        let h = bbox.max.y - bbox.min.y;
        if !(w >= 0.0 && h >= 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::EmptyRegion);
        }
        // The half-step slack keeps a corner that sits on the box edge.
        let nx = (w / resolution + 0.5).floor() as usize + 1;
        let ny = (h / resolution + 0.5).floor() as usize + 1;
        Ok(Self { origin: bbox.min, resolution, nx, ny })
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + i as f64 * self.resolution,
            self.origin.y + j as f64 * self.resolution,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevResult {
    pub center: Point2,
    pub radius: f64,
    pub grid_resolution: f64,
}

/// Feasible points of a region on a grid, with their convex hull.
#[derive(Debug, Clone)]
pub struct FeasibleGrid {
    pub grid: Grid,
    /// Feasible grid indices in lexicographic order.
    pub points: Vec<[usize; 2]>,
    hull: Vec<[usize; 2]>,
}

fn cross(o: [usize; 2], a: [usize; 2], b: [usize; 2]) -> i128 {
    let (ox, oy) = (o[0] as i128, o[1] as i128);
    (a[0] as i128 - ox) * (b[1] as i128 - oy) - (a[1] as i128 - oy) * (b[0] as i128 - ox)
}

/// Monotone chain on integer grid indices (exact). Input sorted.
fn convex_hull(points: &[[usize; 2]]) -> Vec<[usize; 2]> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let mut lower: Vec<[usize; 2]> = Vec::new();
    for &p in points {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[usize; 2]> = Vec::new();
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[derive(PartialEq)]
struct Node {
    bound: f64,
    rect: [usize; 4],
}

impl Eq for Node {}

impl Ord for Node {
    // Min-heap on bound, then on rectangle for a deterministic order.
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then_with(|| o.rect.cmp(&self.rect))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Grid point of `grid` minimizing the 1-Lipschitz function `g`; ties go to
/// the smallest `(i, j)`.
fn grid_argmin<G: Fn(Point2) -> f64>(grid: &Grid, g: G) -> ([usize; 2], f64) {
    let mut best = ([usize::MAX, usize::MAX], f64::INFINITY);
    // Evaluates `g` at the rectangle's middle grid point and bounds `g` on
    // the whole rectangle from below.
    let probe = |rect: [usize; 4]| {
        let [i0, i1, j0, j1] = rect;
        let (ci, cj) = ((i0 + i1) / 2, (j0 + j1) / 2);
        let v = g(grid.point(ci, cj));
        let dx = (ci - i0).max(i1 - ci) as f64 * grid.resolution;
        let dy = (cj - j0).max(j1 - cj) as f64 * grid.resolution;
        // Slack absorbs roundoff in the bound itself.
        let bound = v - (dx * dx + dy * dy).sqrt() - 1e-12 * (1.0 + v.abs());
        ([ci, cj], v, Node { bound, rect })
    };
    let mut heap = BinaryHeap::new();
    let mut pending = vec![[0, grid.nx - 1, 0, grid.ny - 1]];
    loop {
        for rect in pending.drain(..) {
            let (idx, v, node) = probe(rect);
            if v < best.1 || (v == best.1 && idx < best.0) {
                best = (idx, v);
            }
            if node.bound <= best.1 && (rect[0] != rect[1] || rect[2] != rect[3]) {
                heap.push(node);
            }
        }
        let Some(node) = heap.pop() else { break };
        if node.bound > best.1 {
            break;
        }
        let [i0, i1, j0, j1] = node.rect;
        if i1 - i0 >= j1 - j0 {
            let m = (i0 + i1) / 2;
            pending.push([i0, m, j0, j1]);
            pending.push([m + 1, i1, j0, j1]);
        } else {
            let m = (j0 + j1) / 2;
            pending.push([i0, i1, j0, m]);
            pending.push([i0, i1, m + 1, j1]);
        }
    }
    best
}

impl FeasibleGrid {
    /// Enumerate grid points of `bbox` at `resolution` that satisfy `keep`.
    fn scan<F: Fn(Point2) -> bool + Sync>(bbox: BBox, resolution: f64, keep: F) -> Result<Self> {
        let grid = Grid::new(bbox, resolution)?;
        let points: Vec<[usize; 2]> = (0..grid.nx)
            .into_par_iter()
            .flat_map_iter(|i| {
                let keep = &keep;
                (0..grid.ny).filter(move |&j| keep(grid.point(i, j))).map(move |j| [i, j])
            })
            .collect();
        if points.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let hull = convex_hull(&points);
        Ok(Self { grid, points, hull })
    }

    pub fn new(region: &FeasibleRegion, bbox: BBox, resolution: f64) -> Result<Self> {
        Self::scan(bbox, resolution, |p| region.contains(p))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: [usize; 2]) -> Point2 {
        self.grid.point(idx[0], idx[1])
    }

    /// `max_{y ∈ F} ‖c − y‖`, attained at a hull vertex.
    pub fn farthest_distance(&self, c: Point2) -> f64 {
        self.hull.iter().map(|&v| c.dist_sq(self.point(v))).fold(0.0, f64::max).sqrt()
    }

    /// Grid point of the box minimizing the farthest feasible distance.
    pub fn chebyshev_center(&self) -> ChebyshevResult {
        let (idx, radius) = grid_argmin(&self.grid, |c| self.farthest_distance(c));
        ChebyshevResult { center: self.point(idx), radius, grid_resolution: self.grid.resolution }
    }

    /// Feasible grid point nearest to `p`.
    pub fn nearest(&self, p: Point2) -> Point2 {
        let mut best = (self.points[0], f64::INFINITY);
        for &idx in &self.points {
            let d = p.dist_sq(self.point(idx));
            if d < best.1 {
                best = (idx, d);
            }
        }
        self.point(best.0)
    }
}

pub fn grid_chebyshev_center(region: &FeasibleRegion, bbox: BBox, resolution: f64) -> Result<ChebyshevResult> {
    Ok(FeasibleGrid::new(region, bbox, resolution)?.chebyshev_center())
}

fn lifted_grid(region: &FeasibleRegion, bbox: BBox, resolution: f64) -> Result<(FeasibleGrid, Vec<(Point2, f64)>)> {
    // The outer-disc box bounds the projection of the lifted region.
    let fg = FeasibleGrid::scan(bbox, resolution, |p| region.lift_slack(p).is_some())?;
    let lifted = fg
        .points
        .iter()
        .map(|&idx| {
            let p = fg.point(idx);
            (p, region.lift_slack(p).expect("feasible by construction"))
        })
        .collect();
    Ok((fg, lifted))
}

fn relaxed_radius(lifted: &[(Point2, f64)], x: Point2) -> f64 {
    lifted.par_iter().map(|&(p, s)| p.dist_sq(x) + s).reduce(|| 0.0, f64::max).sqrt()
}

/// Relaxed radius of a fixed center `x`, as scored by
/// [`grid_relaxed_center`]. One pass over the grid, so usable on regions too
/// large for the full search.
pub fn grid_relaxed_radius(region: &FeasibleRegion, bbox: BBox, resolution: f64, x: Point2) -> Result<f64> {
    let (_, lifted) = lifted_grid(region, bbox, resolution)?;
    Ok(relaxed_radius(&lifted, x))
}

/// Center of the lifted (relaxed) region: minimizes over grid points `x`
/// the quantity `max ‖p − x‖² + δ` over grid points `p` and slacks `δ ≥ 0`
/// with `lower² ≤ ‖p − c‖² + δ ≤ upper²` for every constraint. The reported
/// radius is the square root of that maximum.
///
/// For a single sensor this is the quantity the centralized relaxation
/// minimizes, so its estimate should land here rather than at the exact
/// Chebyshev center.
pub fn grid_relaxed_center(region: &FeasibleRegion, bbox: BBox, resolution: f64) -> Result<ChebyshevResult> {
    let (fg, lifted) = lifted_grid(region, bbox, resolution)?;
    let (idx, radius) = grid_argmin(&fg.grid, |x| relaxed_radius(&lifted, x));
    Ok(ChebyshevResult { center: fg.point(idx), radius, grid_resolution: resolution })
}

/// Feasible grid point nearest to `p`; ties go to the smallest grid index.
pub fn project_to_region(p: Point2, region: &FeasibleRegion, bbox: BBox, resolution: f64) -> Result<Point2> {
    Ok(FeasibleGrid::new(region, bbox, resolution)?.nearest(p))
}
