use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;
use swarm_core::classify::{analyze_system, SystemAnalysis};
use swarm_core::clustering::{perturbation_stability, predict_clusters, ClusterError};
use swarm_core::simulate::{
    self, assemble, empirical_clusters, integrate, limit_dynamics_check, seeded_initial_state,
    IntegrateOptions, SimError, TrajectoryRecord, DEFAULT_REL_TOL, DEFAULT_WINDOW_FRACTION,
};
use swarm_core::spectral::{SpectralReport, HURWITZ_EPS};
use swarm_core::VertexSet;
use thiserror::Error;

use crate::report::{
    partition, AnalyzeReport, ClassifyReport, ClusterReport, GroupCheck, HorizonSource,
    SimulationReport, VerifyReport,
};
use crate::spec::{SpecError, SystemSpec};

const PERTURBATION_TRIALS: usize = 16;

/// Decay factor `e^-12` required of the slowest agreeing mode.
const DECAY_EXPONENT: f64 = 12.0;
/// Growth factor `e^25` allowed before the overflow guard comes into view.
const GROWTH_EXPONENT: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Classify,
    Cluster,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub svg: bool,
    pub csv: Option<PathBuf>,
    pub tol: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Analysis(#[from] swarm_core::Error),
    #[error("graph has no spanning tree; cluster prediction needs one (see `analyze` for per-group verdicts)")]
    NoSpanningTree,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid option {flag}: {message}")]
    Option { flag: &'static str, message: String },
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Analysis(e.into())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        CliError::Analysis(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Spec(_) | CliError::Option { .. } => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Spec(_) => "spec",
            CliError::Option { .. } => "option",
            CliError::Analysis(_) => "analysis",
            CliError::NoSpanningTree => "no_spanning_tree",
            CliError::Io { .. } => "io",
        }
    }
}

struct Settings {
    dt: f64,
    t_end: f64,
    seed: u64,
    tol: f64,
}

fn settings(spec: &SystemSpec, opts: &Options) -> Result<Settings, CliError> {
    let dt = opts.dt.unwrap_or(spec.sim.dt);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::Option {
            flag: "--dt",
            message: format!("must be positive, got {dt}"),
        });
    }
    let t_end = opts.t_end.unwrap_or(spec.sim.t_end);
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(CliError::Option {
            flag: "--t-end",
            message: format!("must be nonnegative, got {t_end}"),
        });
    }
    let tol = opts.tol.unwrap_or(swarm_core::clustering::DEFAULT_PSI_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Option {
            flag: "--tol",
            message: format!("must be positive, got {tol}"),
        });
    }
    Ok(Settings {
        dt,
        t_end,
        seed: opts.seed.unwrap_or(spec.sim.seed),
        tol,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs `command` on `spec`; the returned JSON is the command's report.
pub fn run(
    command: Command,
    spec: &SystemSpec,
    spec_path: &Path,
    opts: &Options,
) -> Result<Value, CliError> {
    let s = settings(spec, opts)?;
    match command {
        Command::Analyze => {
            let a = analyze(spec)?;
            Ok(to_value(&AnalyzeReport::new(spec.n, spec.d, &a)))
        }
        Command::Classify => {
            let a = analyze(spec)?;
            Ok(to_value(&ClassifyReport::new(&a.motion, a.consensus)))
        }
        Command::Cluster => {
            let a = analyze(spec)?;
            if !a.has_spanning_tree {
                return Err(CliError::NoSpanningTree);
            }
            Ok(to_value(&cluster(&a, s.tol, s.seed)?))
        }
        Command::Simulate => {
            let traj = simulate(spec, &s, s.t_end)?;
            let csv = opts
                .csv
                .clone()
                .unwrap_or_else(|| default_csv_path(spec_path));
            Ok(to_value(&write_outputs(
                &traj,
                &s,
                s.t_end,
                Some(&csv),
                opts.svg,
            )?))
        }
        Command::Verify => verify(spec, opts, &s).map(|r| to_value(&r)),
    }
}

fn analyze(spec: &SystemSpec) -> Result<SystemAnalysis, CliError> {
    log::debug!("analyzing {} agents, d = {}", spec.n, spec.d);
    Ok(analyze_system(&spec.a, &spec.f, &spec.graph)?)
}

fn cluster(a: &SystemAnalysis, tol: f64, seed: u64) -> Result<ClusterReport, CliError> {
    let ca = predict_clusters(&a.laplacian, &a.report, tol)?;
    let stability = perturbation_stability(&ca, &a.laplacian, tol, PERTURBATION_TRIALS, seed);
    if !stability.is_stable() {
        log::warn!(
            "prediction changed in {} of {} perturbation trials",
            stability.flips,
            stability.trials
        );
    }
    Ok(ClusterReport::new(&ca, tol, &stability))
}

fn simulate(spec: &SystemSpec, s: &Settings, t_end: f64) -> Result<TrajectoryRecord, CliError> {
    let sys = assemble(&spec.a, &spec.f, &spec.graph.laplacian())?;
    let x0 = spec
        .x0
        .clone()
        .unwrap_or_else(|| seeded_initial_state(spec.n, spec.d, s.seed));
    log::info!("integrating to t = {t_end} with dt = {}", s.dt);
    let traj = integrate(&sys, &x0, s.dt, t_end, IntegrateOptions::default())?;
    if traj.truncated {
        log::warn!("state left the overflow bound at t = {}", traj.final_time());
    }
    Ok(traj)
}

fn default_csv_path(spec_path: &Path) -> PathBuf {
    let stem = spec_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into());
    PathBuf::from(format!("{stem}.csv"))
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_outputs(
    traj: &TrajectoryRecord,
    s: &Settings,
    t_end: f64,
    csv: Option<&Path>,
    svg: bool,
) -> Result<SimulationReport, CliError> {
    let mut csv_name = None;
    let mut svg_name = None;
    if let Some(path) = csv {
        let mut out = BufWriter::new(File::create(path).map_err(io_error(path))?);
        simulate::write_csv(traj, &mut out).map_err(io_error(path))?;
        out.flush().map_err(io_error(path))?;
        csv_name = Some(path.display().to_string());
    }
    if svg {
        let path = csv
            .map(|p| p.with_extension("svg"))
            .unwrap_or_else(|| PathBuf::from("trajectory.svg"));
        let doc = simulate::render_svg(traj)?;
        std::fs::write(&path, doc).map_err(io_error(&path))?;
        svg_name = Some(path.display().to_string());
    }
    let clusters = match empirical_clusters(traj, DEFAULT_REL_TOL, DEFAULT_WINDOW_FRACTION) {
        Ok(p) => partition(&p),
        Err(SimError::WindowTooShort { .. }) => {
            log::warn!("run too short for the agreement detector; reporting singletons");
            (1..=traj.n).map(|i| vec![i]).collect()
        }
        Err(e) => return Err(e.into()),
    };
    Ok(SimulationReport {
        dt: s.dt,
        t_end,
        seed: s.seed,
        method: traj.method.to_string(),
        samples: traj.len(),
        final_time: traj.final_time(),
        truncated: traj.truncated,
        rel_tol: DEFAULT_REL_TOL,
        window_fraction: DEFAULT_WINDOW_FRACTION,
        clusters,
        csv: csv_name,
        svg: svg_name,
    })
}

/// Horizon over which the slowest agreeing mode decays by `e^-12`, capped so
/// the fastest growing mode stays below `e^25`, and never shorter than
/// `floor`.
pub fn derived_horizon(report: &SpectralReport, floor: f64) -> f64 {
    let rates: Vec<f64> = report
        .nonzero_entries()
        .map(|e| e.verdict.max_real_part)
        .collect();
    let slowest = rates
        .iter()
        .filter(|&&r| r < -HURWITZ_EPS)
        .map(|r| -r)
        .fold(f64::INFINITY, f64::min);
    let growth = report
        .entries
        .iter()
        .map(|e| e.verdict.max_real_part)
        .fold(0.0, f64::max);
    let mut t = if slowest.is_finite() {
        (DECAY_EXPONENT / slowest).max(floor)
    } else {
        floor
    };
    if growth > 0.0 {
        t = t.min(GROWTH_EXPONENT / growth);
    }
    t
}

fn verify(spec: &SystemSpec, opts: &Options, s: &Settings) -> Result<VerifyReport, CliError> {
    // the horizon needs the spectrum; the prediction itself runs alongside
    // the integration
    let analysis = analyze(spec)?;
    let (horizon, source) = match opts.t_end {
        Some(t) => (t, HorizonSource::Flag),
        None => (
            derived_horizon(&analysis.report, spec.sim.t_end),
            HorizonSource::Derived,
        ),
    };
    let (prediction, traj) = std::thread::scope(|scope| {
        let sim = scope.spawn(|| simulate(spec, s, horizon));
        let prediction = if analysis.has_spanning_tree {
            Some(predict_clusters(
                &analysis.laplacian,
                &analysis.report,
                s.tol,
            ))
        } else {
            None
        };
        (prediction, sim.join().expect("simulation thread panicked"))
    });
    let traj = traj?;

    let csv = opts.csv.as_deref();
    let sim_report = write_outputs(&traj, s, horizon, csv, opts.svg)?;
    let empirical = empirical_clusters(&traj, DEFAULT_REL_TOL, DEFAULT_WINDOW_FRACTION)
        .unwrap_or_else(|_| (1..=spec.n).map(|i| VertexSet::new([i]).unwrap()).collect());

    let (predicted, note) = match prediction {
        None => (
            None,
            Some("no spanning tree: judged per independent group".to_string()),
        ),
        Some(Ok(ca)) => (Some(ca.prediction.partition), None),
        Some(Err(e)) => (None, Some(format!("prediction unavailable: {e}"))),
    };

    let mut groups = Vec::new();
    for g in &analysis.groups {
        let observed = empirical
            .iter()
            .any(|block| g.group.members().iter().all(|&v| block.contains(v)));
        let residual_ratio = if g.agrees {
            // relative to the group's state size, so growing trajectories
            // are judged on the same footing as decaying ones
            let r = limit_dynamics_check(&traj, &g.group, &spec.a)?;
            let rel: Vec<f64> = r
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let size = g
                        .group
                        .members()
                        .iter()
                        .map(|&id| traj.agent_state(k, id).norm())
                        .fold(0.0, f64::max);
                    if size > 0.0 {
                        v / size
                    } else {
                        0.0
                    }
                })
                .collect();
            let peak = rel.iter().copied().fold(0.0, f64::max);
            let last = rel.last().copied().unwrap_or(0.0);
            Some(if peak > 0.0 { last / peak } else { 0.0 })
        } else {
            None
        };
        groups.push(GroupCheck {
            members: g.group.members().to_vec(),
            predicted_agree: g.agrees,
            observed_agree: observed,
            residual_ratio,
            consistent: g.agrees == observed,
        });
    }
    let partition_ok = predicted.as_ref().is_none_or(|p| *p == empirical);
    let agreement = !traj.truncated && partition_ok && groups.iter().all(|g| g.consistent);
    log::info!("verify: agreement = {agreement}");

    Ok(VerifyReport {
        label: analysis.motion.label,
        horizon,
        horizon_source: source,
        predicted_clusters: predicted.as_deref().map(partition),
        prediction_note: note,
        empirical_clusters: partition(&empirical),
        groups,
        simulation: sim_report,
        agreement,
    })
}
