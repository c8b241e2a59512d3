//! Sensor network localization from interval-bounded range measurements.
//!
//! Every estimator here minimizes the worst-case error over the set of
//! positions consistent with the measurements, relaxed to a semidefinite
//! program: [`central`] solves one program for the whole network, [`dist`]
//! runs small per-sensor programs in synchronous rounds. [`geom`] holds grid
//! oracles for single-sensor regions, [`baseline`] a least-squares reference.

pub mod baseline;
pub mod central;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod geom;
pub mod metrics;
pub mod model;
pub mod sdp;
pub mod seed;

pub use baseline::{baseline_least_squares, BaselineResult};
pub use central::{solve_minmax_sdp, CentralEstimate};
pub use dist::{run_dis_minmax, DisMinMaxConfig, DisMinMaxTrace, NodeState, RoundRecord};
pub use error::{Error, Result};
pub use experiment::{emit_outputs, run_experiment, Estimator, ExperimentReport, ExperimentSpec};
pub use geom::{grid_chebyshev_center, ChebyshevResult, FeasibleRegion};
pub use metrics::rmse;
pub use model::{
    apply_errors, build_feasibility_intervals, generate_scenario, validate_scenario, Anchor, Area, EdgeKey,
    ErrorModel, IntervalBound, Measurement, NetworkScenario, NodeId, Point2, ScenarioConfig,
};
pub use sdp::{solve, SdpProblem, SdpSolution, SolveStatus, SolverConfig};
