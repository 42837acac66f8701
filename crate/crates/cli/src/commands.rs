use std::fs;
use std::path::{Path, PathBuf};

use lpv_guidance::gains::LoopKind;
use lpv_guidance::planner::plan_trajectory;
use lpv_guidance::sim::{compute_metrics, run_simulation};
use lpv_guidance::synthesis::{dynamic_vertex_models, kinematic_vertex_models, synthesize, SynthesisReport};
use lpv_guidance::{GainDocument, Metrics, Scenario, Telemetry};
use serde::Serialize;

use crate::svg::{render, Panel, Series};
use crate::{CliError, RunConfig};

pub const KINEMATIC_GAINS: &str = "kinematic_gains.json";
pub const DYNAMIC_GAINS: &str = "dynamic_gains.json";
pub const SYNTHESIS_REPORT: &str = "synthesis_report.json";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const TELEMETRY: &str = "telemetry.csv";
pub const METRICS: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const PLOTS: [&str; 4] = ["path.svg", "velocity.svg", "position_errors.svg", "actuators.svg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopSelection {
    Kinematic,
    Dynamic,
    Both,
}

impl LoopSelection {
    fn loops(self) -> Vec<LoopKind> {
        match self {
            LoopSelection::Kinematic => vec![LoopKind::Kinematic],
            LoopSelection::Dynamic => vec![LoopKind::Dynamic],
            LoopSelection::Both => vec![LoopKind::Kinematic, LoopKind::Dynamic],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Svg,
    CsvOnly,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct LoopOutcome {
    #[serde(rename = "loop")]
    loop_kind: LoopKind,
    vertices: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<SynthesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Synthesizes the selected loops and writes one gain document per loop that passes validation,
/// plus a report covering every selected loop.
pub fn synth(cfg: &RunConfig, out: &Path, selection: LoopSelection) -> Result<Vec<PathBuf>, CliError> {
    create_dir(out)?;
    let mut outcomes = Vec::new();
    let mut written = Vec::new();
    let mut failures = Vec::new();
    for kind in selection.loops() {
        let (bounds, scfg, file) = match kind {
            LoopKind::Kinematic => (&cfg.bounds.kinematic, &cfg.synthesis.kinematic, KINEMATIC_GAINS),
            LoopKind::Dynamic => (&cfg.bounds.dynamic, &cfg.synthesis.dynamic, DYNAMIC_GAINS),
        };
        let models = match kind {
            LoopKind::Kinematic => kinematic_vertex_models(bounds),
            LoopKind::Dynamic => dynamic_vertex_models(bounds, &cfg.vehicle, &cfg.lpv),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let vertices = models.0.len();
        match synthesize(&models.0, &models.1, bounds, scfg) {
            Ok(outcome) if outcome.report.passed => {
                let path = out.join(file);
                let doc = GainDocument::new(kind, &outcome.gains, scfg, Some(outcome.report.clone()));
                write_file(&path, &(doc.to_json()? + "\n"))?;
                written.push(path);
                outcomes.push(LoopOutcome {
                    loop_kind: kind,
                    vertices,
                    report: Some(outcome.report),
                    error: None,
                });
            }
            Ok(outcome) => {
                let msg = format!(
                    "{} gains fail validation: a vertex closed loop is slower than decay {}",
                    kind.name(),
                    outcome.report.decay
                );
                failures.push(msg.clone());
                outcomes.push(LoopOutcome {
                    loop_kind: kind,
                    vertices,
                    report: Some(outcome.report),
                    error: Some(msg),
                });
            }
            Err(e) => {
                let msg = format!("{} loop: {e}", kind.name());
                failures.push(msg.clone());
                outcomes.push(LoopOutcome {
                    loop_kind: kind,
                    vertices,
                    report: None,
                    error: Some(msg),
                });
            }
        }
    }
    let report_path = out.join(SYNTHESIS_REPORT);
    let text = serde_json::to_string_pretty(&outcomes).map_err(|e| CliError::Other(e.to_string()))?;
    write_file(&report_path, &(text + "\n"))?;
    written.push(report_path);
    if failures.is_empty() {
        Ok(written)
    } else {
        Err(CliError::Synthesis(failures.join("; ")))
    }
}

fn read_gains(dir: &Path, file: &str) -> Result<GainDocument, CliError> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "missing gain document {} (run `synth` first)",
            path.display()
        )));
    }
    GainDocument::read(&path).map_err(|e| CliError::Config(e.to_string()))
}

/// Plans the trajectory, runs the closed loop and writes trajectory, telemetry and metrics.
pub fn simulate(
    cfg: &RunConfig,
    gains_dir: &Path,
    out: &Path,
    horizon: Option<f64>,
    circuit: Option<&Path>,
) -> Result<Metrics, CliError> {
    let kin = read_gains(gains_dir, KINEMATIC_GAINS)?;
    let dyn_doc = read_gains(gains_dir, DYNAMIC_GAINS)?;
    let (waypoints, closed) = cfg.waypoints(circuit)?;
    let trajectory = plan_trajectory(&waypoints, closed, &cfg.planner.constraints, cfg.planner.sample_period)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut scenario = Scenario::from_documents(
        trajectory,
        &kin,
        &dyn_doc,
        &cfg.bounds.kinematic,
        &cfg.bounds.dynamic,
        cfg.vehicle,
        cfg.limits,
        cfg.lpv,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    scenario.ts_kin = cfg.scenario.ts_kin;
    scenario.ts_dyn = cfg.scenario.ts_dyn;
    scenario.horizon = horizon.or(cfg.scenario.horizon);
    scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let telemetry = run_simulation(&scenario).map_err(|e| match e {
        lpv_guidance::Error::SimulationAbort { .. } | lpv_guidance::Error::Domain(_) => CliError::Abort(e.to_string()),
        other => CliError::from(other),
    })?;
    let metrics = compute_metrics(&telemetry)?;
    create_dir(out)?;
    scenario.trajectory.write_csv(&out.join(TRAJECTORY))?;
    telemetry.write(&out.join(TELEMETRY))?;
    metrics.write(&out.join(METRICS))?;
    Ok(metrics)
}

fn metrics_csv(m: &Metrics) -> String {
    format!(
        "rmse_v,rmse_w,rmse_y,max_ev,max_ey\n{},{},{},{},{}\n",
        m.rmse_v, m.rmse_w, m.rmse_y, m.max_ev, m.max_ey
    )
}

fn plots(t: &Telemetry) -> Vec<(&'static str, String)> {
    let r = &t.records;
    let col = |f: fn(&lpv_guidance::TelemetryRecord) -> (f64, f64)| r.iter().map(f).collect::<Vec<_>>();
    let mut path = Panel::new(
        "Path",
        "x [m]",
        "y [m]",
        vec![
            Series::new("reference", "#888888", col(|s| (s.x_d, s.y_d))).dashed(),
            Series::new("vehicle", "#1f77b4", col(|s| (s.x, s.y))),
        ],
    );
    path.equal_aspect = true;
    let velocity = [
        Panel::new(
            "Longitudinal velocity",
            "t [s]",
            "v [m/s]",
            vec![
                Series::new("v_d", "#888888", col(|s| (s.t, s.v_d))).dashed(),
                Series::new("v", "#1f77b4", col(|s| (s.t, s.v))),
            ],
        ),
        Panel::new(
            "Yaw rate",
            "t [s]",
            "omega [rad/s]",
            vec![
                Series::new("omega_d", "#888888", col(|s| (s.t, s.omega_d))).dashed(),
                Series::new("omega", "#d62728", col(|s| (s.t, s.omega))),
            ],
        ),
    ];
    let errors = [
        Panel::new(
            "Longitudinal error",
            "t [s]",
            "x_e [m]",
            vec![Series::new("x_e", "#2ca02c", col(|s| (s.t, s.x_e)))],
        ),
        Panel::new(
            "Lateral error",
            "t [s]",
            "y_e [m]",
            vec![Series::new("y_e", "#9467bd", col(|s| (s.t, s.y_e)))],
        ),
    ];
    let actuators = [
        Panel::new(
            "Rear traction force",
            "t [s]",
            "F_xR [N]",
            vec![Series::new("F_xR", "#ff7f0e", col(|s| (s.t, s.force)))],
        ),
        Panel::new(
            "Front steering angle",
            "t [s]",
            "delta [rad]",
            vec![Series::new("delta", "#8c564b", col(|s| (s.t, s.delta)))],
        ),
    ];
    vec![
        (PLOTS[0], render(&[path])),
        (PLOTS[1], render(&velocity)),
        (PLOTS[2], render(&errors)),
        (PLOTS[3], render(&actuators)),
    ]
}

/// Renders the plots (or only the metrics) for a telemetry file. Everything is built in memory
/// before the first write, so bad input leaves the output directory untouched.
pub fn report(telemetry: &Path, out: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(telemetry).map_err(|e| CliError::Config(format!("{}: {e}", telemetry.display())))?;
    let t = Telemetry::from_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", telemetry.display())))?;
    if t.is_empty() {
        return Err(CliError::Config(format!(
            "{}: telemetry has no data rows",
            telemetry.display()
        )));
    }
    let metrics = compute_metrics(&t)?;
    let files: Vec<(&str, String)> = match format {
        ReportFormat::Svg => plots(&t),
        ReportFormat::CsvOnly => vec![
            (METRICS, metrics.to_json()? + "\n"),
            (METRICS_CSV, metrics_csv(&metrics)),
        ],
    };
    create_dir(out)?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out.join(name);
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}
