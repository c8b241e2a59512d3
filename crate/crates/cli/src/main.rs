//! `rangeloc`: generate scenarios, run the estimators and sweep experiments.
//!
//! Exit codes: 0 success, 1 usage or invalid input, 2 numerical failure,
//! 3 I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rangeloc::central::solve_minmax_sdp;
use rangeloc::dist::{run_dis_minmax, DisMinMaxConfig};
use rangeloc::experiment::{emit_outputs, run_experiment, ExperimentSpec};
use rangeloc::geom::{grid_chebyshev_center, grid_relaxed_center, FeasibleRegion, DEFAULT_RESOLUTION};
use rangeloc::model::{
    apply_errors, build_feasibility_intervals, generate_scenario, validate_scenario, ErrorModel, NetworkScenario,
    NodeId, ScenarioConfig,
};
use rangeloc::sdp::SolverConfig;
use rangeloc::Error;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rangeloc", version, about = "Minimax localization from bounded-error range measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate(GenerateArgs),
    /// Solve the network-wide semidefinite program.
    SolveCentral(SolveArgs),
    /// Run the distributed rounds; writes one JSON object per round.
    SolveDist(DistArgs),
    /// Grid Chebyshev center of one sensor's anchor-only region.
    Oracle(OracleArgs),
    /// Run a sweep described by a JSON spec; writes `<out>.csv` and `<out>.json`.
    Experiment(ExperimentArgs),
    /// Check connectivity and anchor geometry.
    Validate(InputArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorLayout {
    /// (±0.3, ±0.3)
    Inner,
    /// (±0.5, ±0.5)
    Corner,
}

#[derive(Args)]
struct ErrorArgs {
    /// Uniform errors on [-gamma, gamma].
    #[arg(long, conflicts_with = "sigma")]
    gamma: Option<f64>,
    /// Gaussian errors; the assumed bound is 3 sigma.
    #[arg(long)]
    sigma: Option<f64>,
    /// With --sigma: outlier ratio of a Gaussian/uniform mixture.
    #[arg(long, requires = "sigma")]
    ratio: Option<f64>,
}

impl ErrorArgs {
    fn model(&self) -> ErrorModel {
        match (self.gamma, self.sigma, self.ratio) {
            (_, Some(sigma), Some(ratio)) => ErrorModel::Mixture { sigma, ratio },
            (_, Some(sigma), None) => ErrorModel::Gaussian { sigma },
            (gamma, None, _) => ErrorModel::Uniform { gamma: gamma.unwrap_or(0.0) },
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, short = 'n', default_value_t = 20)]
    sensors: usize,
    /// Sensing range.
    #[arg(long, default_value_t = 0.5)]
    range: f64,
    #[arg(long, value_enum, default_value_t = AnchorLayout::Inner)]
    anchors: AnchorLayout,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    errors: ErrorArgs,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Scenario JSON.
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Override the scenario's error bound.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 200)]
    max_rounds: usize,
    /// Trust neighbor estimates as exact instead of widening their intervals.
    #[arg(long)]
    literal_neighbors: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Sensor id; defaults to the first sensor.
    #[arg(long)]
    sensor: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec JSON.
    spec: PathBuf,
    /// Output prefix.
    #[arg(long, default_value = "experiment")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Io { .. } | Error::Json { .. } | Error::Csv { .. } => Failure::Io(m),
            Error::Solver { .. }
            | Error::NumericalFailure(_)
            | Error::Degenerate(_)
            | Error::EmptyRegion
            | Error::IllFormedProblem(_) => Failure::Numerical(m),
            _ => Failure::Usage(m),
        }
    }
}

type Outcome = Result<(), Failure>;

fn write_output(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Outcome {
    let io = |p: &Path, e: std::io::Error| Failure::Io(format!("{}: {e}", p.display()));
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| io(p, e))?;
            let mut w = BufWriter::new(f);
            body(&mut w).and_then(|_| w.flush()).map_err(|e| io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).map_err(|e| io(Path::new("<stdout>"), e))
        }
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Outcome {
    write_output(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn load(path: &Path, gamma: Option<f64>) -> Result<NetworkScenario, Failure> {
    let mut s = NetworkScenario::read(path)?;
    if let Some(g) = gamma {
        if !(g.is_finite() && g >= 0.0) {
            return Err(Failure::Usage(format!("--gamma must be finite and nonnegative, got {g}")));
        }
        s.gamma = g;
    }
    Ok(s)
}

fn generate(a: &GenerateArgs) -> Outcome {
    let config = match a.anchors {
        AnchorLayout::Inner => ScenarioConfig::inner_anchors(a.sensors, a.range),
        AnchorLayout::Corner => ScenarioConfig::corner_anchors(a.sensors, a.range),
    };
    let exact = generate_scenario(&config, a.seed)?;
    let s = apply_errors(&exact, &a.errors.model(), rangeloc::seed::derive_seed(a.seed, 1))?;
    write_output(a.out.as_deref(), |w| writeln!(w, "{}", s.to_json_string()))
}

fn solve_central(a: &SolveArgs) -> Outcome {
    let s = load(&a.input.scenario, a.gamma)?;
    let est = solve_minmax_sdp(&s, &SolverConfig::default())?;
    write_json(a.input.out.as_deref(), &est)
}

fn solve_dist(a: &DistArgs) -> Outcome {
    let s = load(&a.input.scenario, a.gamma)?;
    let config = DisMinMaxConfig {
        epsilon: a.epsilon,
        max_rounds: a.max_rounds,
        inflate_neighbor_bounds: !a.literal_neighbors,
        ..DisMinMaxConfig::default()
    };
    let trace = run_dis_minmax(&s, &config)?;
    eprintln!(
        "{:?} after {} rounds, rmse upper bound {:.6}",
        trace.status,
        trace.rounds.len() - 1,
        trace.final_round().rmse_upper_bound
    );
    write_output(a.input.out.as_deref(), |w| trace.write_jsonl(w))
}

#[derive(Serialize)]
struct OracleReport {
    sensor: NodeId,
    resolution: f64,
    chebyshev_center: [f64; 2],
    chebyshev_radius: f64,
    relaxed_center: [f64; 2],
    relaxed_radius: f64,
}

fn oracle(a: &OracleArgs) -> Outcome {
    let s = load(&a.input.scenario, a.gamma)?;
    let sensor = match a.sensor {
        Some(id) => NodeId(id),
        None => *s.sensors.first().ok_or_else(|| Failure::Usage("scenario has no sensors".into()))?,
    };
    if !s.sensors.contains(&sensor) {
        return Err(Failure::Usage(format!("no sensor {sensor}")));
    }
    let region = FeasibleRegion::for_sensor(&s, &build_feasibility_intervals(&s), sensor)?;
    let exact = grid_chebyshev_center(&region, region.bbox(), a.resolution)?;
    let relaxed = grid_relaxed_center(&region, region.bbox(), a.resolution)?;
    write_json(
        a.input.out.as_deref(),
        &OracleReport {
            sensor,
            resolution: a.resolution,
            chebyshev_center: [exact.center.x, exact.center.y],
            chebyshev_radius: exact.radius,
            relaxed_center: [relaxed.center.x, relaxed.center.y],
            relaxed_radius: relaxed.radius,
        },
    )
}

fn experiment(a: &ExperimentArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| Failure::Io(format!("{}: {e}", a.spec.display())))?;
    let mut spec = ExperimentSpec::from_json_str(&text)?;
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = a.seed {
        spec.master_seed = s;
    }
    let report = run_experiment(&spec)?;
    let csv = a.out.with_extension("csv");
    let json = a.out.with_extension("json");
    emit_outputs(&report, &csv, &json)?;
    for p in &report.points {
        for g in &p.aggregates {
            eprintln!(
                "{:>8} {:<12} n={:<3} rmse {:.5} ± {:.5}",
                p.sweep_value,
                g.estimator.name(),
                g.count,
                g.mean_rmse,
                g.stdev_rmse
            );
        }
    }
    Ok(())
}

fn validate(a: &InputArgs) -> Outcome {
    let s = NetworkScenario::read(&a.scenario)?;
    let report = validate_scenario(&s);
    write_json(a.out.as_deref(), &report)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Usage("scenario failed validation".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::SolveCentral(a) => solve_central(a),
        Command::SolveDist(a) => solve_dist(a),
        Command::Oracle(a) => oracle(a),
        Command::Experiment(a) => experiment(a),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
