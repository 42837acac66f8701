//! Two-rate cascade closed-loop simulation of the nonlinear plant, telemetry and metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::gains::{GainDocument, LoopKind};
use crate::lpv::{kinematic_lpv_matrices, pose_error_body, LpvConfig, SchedulingBounds};
use crate::planner::{ReferencePoint, ReferenceTrajectory};
use crate::plant::{
    plant_derivatives, plant_vector, resistive_force, saturate_inputs, split_plant_vector, step_rk4, ActuatorInput,
    ActuatorLimits, DynamicState, Pose, VehicleParams,
};
use crate::scheduler::{dynamic_control, kinematic_control, ControllerState, GainScheduler};
use crate::{Error, Result};

/// Speed below which the `1/v` terms of the plant are no longer trusted [m/s].
pub const V_FLOOR: f64 = 0.05;

pub const TELEMETRY_HEADER: &str =
    "t,x,y,theta,v,alpha,omega,x_d,y_d,theta_d,v_d,omega_d,x_e,y_e,theta_e,F_xR,delta,uC_v,uC_w,uF_F,uF_d";

#[derive(Debug, Clone)]
pub struct Scenario {
    pub trajectory: ReferenceTrajectory,
    pub initial_pose: Pose,
    pub initial_state: DynamicState,
    pub params: VehicleParams,
    pub limits: ActuatorLimits,
    pub scheduler: GainScheduler,
    pub ts_kin: f64,
    pub ts_dyn: f64,
    /// Simulated duration; the trajectory horizon when absent.
    pub horizon: Option<f64>,
}

impl Scenario {
    /// Scenario starting on the first reference sample with `v(0) = max(v_d(0), 1)`.
    pub fn new(trajectory: ReferenceTrajectory, scheduler: GainScheduler, limits: ActuatorLimits) -> Result<Self> {
        let first = *trajectory
            .points
            .first()
            .ok_or_else(|| Error::Config("reference trajectory is empty".into()))?;
        let v0 = first.v_d.max(1.0);
        Ok(Self {
            initial_pose: Pose::new(first.x_d, first.y_d, first.theta_d),
            initial_state: DynamicState::new(v0, 0.0, first.omega_d),
            params: scheduler.params,
            limits,
            scheduler,
            trajectory,
            ts_kin: 0.1,
            ts_dyn: 0.01,
            horizon: None,
        })
    }

    /// Builds the scheduler from two gain documents, rejecting mismatched bounds or shapes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_documents(
        trajectory: ReferenceTrajectory,
        kinematic: &GainDocument,
        dynamic: &GainDocument,
        kinematic_bounds: &SchedulingBounds,
        dynamic_bounds: &SchedulingBounds,
        params: VehicleParams,
        limits: ActuatorLimits,
        lpv: LpvConfig,
    ) -> Result<Self> {
        let k = kinematic.check_compatible(LoopKind::Kinematic, kinematic_bounds, (2, 3))?;
        let d = dynamic.check_compatible(LoopKind::Dynamic, dynamic_bounds, (2, 6))?;
        Self::new(trajectory, GainScheduler::new(k, d, params, lpv)?, limits)
    }

    /// Number of dynamic steps (= telemetry rows).
    pub fn steps(&self) -> usize {
        let horizon = self.horizon.unwrap_or_else(|| self.trajectory.horizon());
        (horizon / self.ts_dyn + 1e-9).floor() as usize
    }

    fn kin_ratio(&self) -> Result<usize> {
        if !(self.ts_dyn > 0.0 && self.ts_kin > 0.0) {
            return Err(Error::Config("sample periods must be positive".into()));
        }
        let ratio = self.ts_kin / self.ts_dyn;
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "ts_kin ({}) must be an integer multiple of ts_dyn ({})",
                self.ts_kin, self.ts_dyn
            )));
        }
        Ok(r as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.kin_ratio()?;
        self.params.validate()?;
        self.limits.validate()?;
        self.scheduler.lpv.validate(self.limits.delta_max)?;
        let horizon = self.horizon.unwrap_or_else(|| self.trajectory.horizon());
        if !(horizon > 0.0) {
            return Err(Error::Config(format!(
                "simulation horizon must be positive, got {horizon}"
            )));
        }
        let needed = (self.steps().max(1) - 1) as f64 * self.ts_dyn;
        if needed > self.trajectory.horizon() + 1e-9 {
            return Err(Error::Config(format!(
                "horizon {horizon} s exceeds the trajectory ({} s)",
                self.trajectory.horizon()
            )));
        }
        if !(self.initial_state.v >= V_FLOOR) {
            return Err(Error::Config(format!(
                "initial speed {} below {V_FLOOR}",
                self.initial_state.v
            )));
        }
        Ok(())
    }
}

/// One dynamic step. Plant and actuator values are those held over `[t, t + Ts_dyn)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub alpha: f64,
    pub omega: f64,
    pub x_d: f64,
    pub y_d: f64,
    pub theta_d: f64,
    pub v_d: f64,
    pub omega_d: f64,
    pub x_e: f64,
    pub y_e: f64,
    pub theta_e: f64,
    pub force: f64,
    pub delta: f64,
    pub uc_v: f64,
    pub uc_w: f64,
    pub uf_force: f64,
    pub uf_delta: f64,
}

impl TelemetryRecord {
    fn values(&self) -> [f64; 21] {
        [
            self.t,
            self.x,
            self.y,
            self.theta,
            self.v,
            self.alpha,
            self.omega,
            self.x_d,
            self.y_d,
            self.theta_d,
            self.v_d,
            self.omega_d,
            self.x_e,
            self.y_e,
            self.theta_e,
            self.force,
            self.delta,
            self.uc_v,
            self.uc_w,
            self.uf_force,
            self.uf_delta,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        Self {
            t: v[0],
            x: v[1],
            y: v[2],
            theta: v[3],
            v: v[4],
            alpha: v[5],
            omega: v[6],
            x_d: v[7],
            y_d: v[8],
            theta_d: v[9],
            v_d: v[10],
            omega_d: v[11],
            x_e: v[12],
            y_e: v[13],
            theta_e: v[14],
            force: v[15],
            delta: v[16],
            uc_v: v[17],
            uc_w: v[18],
            uf_force: v[19],
            uf_delta: v[20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Telemetry {
    pub records: Vec<TelemetryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse_v: f64,
    pub rmse_w: f64,
    pub rmse_y: f64,
    pub max_ev: f64,
    pub max_ey: f64,
}

/// Advances the actuator filter `ż = γ_f (u_f − z)`, `z = (F_f, δ_f)`, over one step.
///
/// The part of `u_f` that feeds back the filter's own states is applied continuously: the filter
/// sits inside the controller, so only plant and integrator states are sample-and-hold. This
/// makes the step exact for the closed 2×2 filter block whatever the size of those gains.
fn filter_step(
    ctrl: &ControllerState,
    u_f: &Vector2<f64>,
    gain: &DMatrix<f64>,
    gamma_f: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let z = Vector2::new(ctrl.force_f, ctrl.delta_f);
    let k_zz = gain.fixed_view::<2, 2>(0, 3).into_owned();
    // held part of the input: u_f minus its filter-state feedback
    let held = u_f - k_zz * z;
    let mut aug = DMatrix::<f64>::zeros(3, 3);
    for i in 0..2 {
        for j in 0..2 {
            aug[(i, j)] = gamma_f * (k_zz[(i, j)] - if i == j { 1.0 } else { 0.0 });
        }
        aug[(i, 2)] = gamma_f * held[i];
    }
    let phi = (aug * dt).exp();
    let next = Vector2::new(
        phi[(0, 0)] * z[0] + phi[(0, 1)] * z[1] + phi[(0, 2)],
        phi[(1, 0)] * z[0] + phi[(1, 1)] * z[1] + phi[(1, 2)],
    );
    if next.iter().all(|v| v.is_finite()) {
        Ok((next[0], next[1]))
    } else {
        Err(Error::Singular("actuator filter transition is not finite".into()))
    }
}

/// Runs the cascade: the kinematic law every `ts_kin`, the dynamic law, actuator filter and one
/// RK4 plant step every `ts_dyn`.
pub fn run_simulation(scenario: &Scenario) -> Result<Telemetry> {
    scenario.validate()?;
    let ratio = scenario.kin_ratio()?;
    let sched = &scenario.scheduler;
    let params = scenario.params;
    let eps = sched.lpv.epsilon;
    let dt = scenario.ts_dyn;

    let mut x = plant_vector(&scenario.initial_pose, &scenario.initial_state);
    let mut ctrl = ControllerState {
        i_p: 0.0,
        force_f: resistive_force(scenario.initial_state.v, &params),
        delta_f: 0.0,
    };
    let mut u_c = Vector2::zeros();
    let steps = scenario.steps();
    let mut records = Vec::with_capacity(steps);

    for k in 0..steps {
        let t = k as f64 * dt;
        let (pose, state) = split_plant_vector(&x);
        let reference = scenario.trajectory.sample(t)?;
        let err = pose_error_body(&pose, &Pose::new(reference.x_d, reference.y_d, reference.theta_d));

        if k % ratio == 0 {
            let k_c = sched.kinematic_gain(reference.v_d, reference.omega_d, err.theta_e)?;
            let r_c = Vector2::new(reference.v_d * err.theta_e.cos(), reference.omega_d);
            u_c = kinematic_control(&err, &r_c, &k_c);
        }

        ctrl.i_p += (u_c[1] - state.omega) * dt;
        let law = sched.dynamic_law(state.v, ctrl.delta_f + eps)?;
        let x_dyn =
            DVector::from_column_slice(&[state.v, state.alpha, state.omega, ctrl.force_f, ctrl.delta_f, ctrl.i_p]);
        let u_f = dynamic_control(&x_dyn, &u_c, &law.gain, &law.feedforward);
        let (force_f, delta_f) = filter_step(&ctrl, &u_f, &law.gain, sched.lpv.gamma_f, dt)?;
        // the filter states are the physical actuator positions, so they saturate with them
        let applied = saturate_inputs(&ActuatorInput::new(force_f, delta_f), &scenario.limits);
        ctrl.force_f = applied.force;
        ctrl.delta_f = applied.delta;

        records.push(TelemetryRecord {
            t,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            v: state.v,
            alpha: state.alpha,
            omega: state.omega,
            x_d: reference.x_d,
            y_d: reference.y_d,
            theta_d: reference.theta_d,
            v_d: reference.v_d,
            omega_d: reference.omega_d,
            x_e: err.x_e,
            y_e: err.y_e,
            theta_e: err.theta_e,
            force: applied.force,
            delta: applied.delta,
            uc_v: u_c[0],
            uc_w: u_c[1],
            uf_force: u_f[0],
            uf_delta: u_f[1],
        });

        x = step_rk4(|s, u| plant_derivatives(s, u, &params), &x, &applied, dt).map_err(|e| {
            Error::SimulationAbort {
                t,
                reason: e.to_string(),
            }
        })?;
        let t_next = t + dt;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::SimulationAbort {
                t: t_next,
                reason: format!("plant state {i} is not finite"),
            });
        }
        if x[3] < V_FLOOR {
            return Err(Error::SimulationAbort {
                t: t_next,
                reason: format!("speed {:.4} m/s fell below {V_FLOOR} m/s", x[3]),
            });
        }
        if !(ctrl.i_p.is_finite() && ctrl.force_f.is_finite() && ctrl.delta_f.is_finite()) {
            return Err(Error::SimulationAbort {
                t: t_next,
                reason: "controller state is not finite".into(),
            });
        }
    }
    Ok(Telemetry { records })
}

fn rms(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for e in values {
        sum += e * e;
        max = max.max(e.abs());
        n += 1;
    }
    ((sum / n as f64).sqrt(), max)
}

pub fn compute_metrics(telemetry: &Telemetry) -> Result<Metrics> {
    let r = &telemetry.records;
    if r.is_empty() {
        return Err(Error::EmptyTelemetry);
    }
    let (rmse_v, max_ev) = rms(r.iter().map(|s| s.v - s.v_d));
    let (rmse_w, _) = rms(r.iter().map(|s| s.omega - s.omega_d));
    let (rmse_y, max_ey) = rms(r.iter().map(|s| s.y_e));
    Ok(Metrics {
        rmse_v,
        rmse_w,
        rmse_y,
        max_ev,
        max_ey,
    })
}

impl Telemetry {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.records.len() * 21 * 20);
        out.push_str(TELEMETRY_HEADER);
        out.push('\n');
        for r in &self.records {
            for (i, v) in r.values().iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:.12e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TELEMETRY_HEADER => {}
            Some(h) => return Err(Error::Parse(format!("unexpected telemetry header '{h}'"))),
            None => return Err(Error::Parse("telemetry file is empty".into())),
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("telemetry row {}: {e}", n + 1)))?;
            if values.len() != 21 {
                return Err(Error::Parse(format!(
                    "telemetry row {} has {} fields, expected 21",
                    n + 1,
                    values.len()
                )));
            }
            records.push(TelemetryRecord::from_values(&values));
        }
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Metrics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Closed-loop eigenvalues of both loops frozen at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationCheck {
    /// Dynamic-loop poles sorted by real part, slowest first.
    pub dynamic_poles: Vec<(f64, f64)>,
    pub kinematic_poles: Vec<(f64, f64)>,
}

impl SeparationCheck {
    /// Largest real part among the `n` slowest dynamic poles.
    pub fn slowest_dynamic(&self, n: usize) -> f64 {
        self.dynamic_poles
            .iter()
            .take(n)
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn slowest_kinematic(&self) -> f64 {
        self.kinematic_poles
            .iter()
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn sorted_poles(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = m.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    p.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    p
}

/// Poles of `A + B K` for both loops at speed `v`, yaw rate `omega`, zero heading error and the
/// steady-state steering of a neutral bicycle.
pub fn separation_check(scheduler: &GainScheduler, v: f64, omega: f64) -> Result<SeparationCheck> {
    let p = &scheduler.params;
    let sigma = (p.a + p.b) * omega / v + scheduler.lpv.epsilon;
    let law = scheduler.dynamic_law(v, sigma)?;
    let model = crate::lpv::dynamic_lpv_matrices(
        law.point.value(&scheduler.dynamic.bounds, "v")?,
        law.point.value(&scheduler.dynamic.bounds, "sigma")?,
        p,
        &scheduler.lpv,
    )?;
    let dyn_cl = &model.a + &model.b * &law.gain;
    let k_c = scheduler.kinematic_gain(v, omega, 0.0)?;
    let kin = kinematic_lpv_matrices(v, omega, 0.0, omega);
    let kin_cl = &kin.a + &kin.b * &k_c;
    Ok(SeparationCheck {
        dynamic_poles: sorted_poles(&dyn_cl),
        kinematic_poles: sorted_poles(&kin_cl),
    })
}

/// Reference samples as telemetry would see them, for plotting.
pub fn reference_at(telemetry: &TelemetryRecord) -> ReferencePoint {
    ReferencePoint {
        t: telemetry.t,
        x_d: telemetry.x_d,
        y_d: telemetry.y_d,
        theta_d: telemetry.theta_d,
        v_d: telemetry.v_d,
        omega_d: telemetry.omega_d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(v: f64, v_d: f64, y_e: f64) -> TelemetryRecord {
        TelemetryRecord {
            v,
            v_d,
            y_e,
            ..Default::default()
        }
    }

    #[test]
    fn metrics_examples() {
        let t = Telemetry {
            records: (0..10).map(|_| record(1.1, 1.0, 0.0)).collect(),
        };
        let m = compute_metrics(&t).unwrap();
        assert!((m.rmse_v - 0.1).abs() < 1e-12);
        assert_eq!(m.rmse_y, 0.0);
        let t = Telemetry {
            records: (0..10)
                .map(|i| record(0.0, 0.0, if i % 2 == 0 { 0.1 } else { -0.1 }))
                .collect(),
        };
        let m = compute_metrics(&t).unwrap();
        assert!((m.rmse_y - 0.1).abs() < 1e-12);
        assert!((m.max_ey - 0.1).abs() < 1e-12);
        assert!(matches!(
            compute_metrics(&Telemetry::default()),
            Err(Error::EmptyTelemetry)
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let t = Telemetry {
            records: (0..5)
                .map(|i| TelemetryRecord {
                    t: i as f64 * 0.01,
                    v: 10.0 + 1.0 / 3.0 * i as f64,
                    v_d: 10.0,
                    y_e: -1e-4 * i as f64,
                    omega: 0.123456789012,
                    ..Default::default()
                })
                .collect(),
        };
        let back = Telemetry::from_csv(&t.to_csv()).unwrap();
        let (a, b) = (compute_metrics(&t).unwrap(), compute_metrics(&back).unwrap());
        assert!((a.rmse_v - b.rmse_v).abs() < 1e-9 && (a.rmse_y - b.rmse_y).abs() < 1e-9);
        assert_eq!(Telemetry::default().to_csv(), format!("{TELEMETRY_HEADER}\n"));
        assert!(Telemetry::from_csv("t,x\n").is_err());
        assert!(Telemetry::from_csv(&format!("{TELEMETRY_HEADER}\n1,2\n")).is_err());
    }

    #[test]
    fn metrics_json_keys() {
        let m = Metrics {
            rmse_v: 0.1,
            rmse_w: 0.2,
            rmse_y: 0.3,
            max_ev: 0.4,
            max_ey: 0.5,
        };
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        for k in ["rmse_v", "rmse_w", "rmse_y", "max_ev", "max_ey"] {
            assert!(v.get(k).is_some());
        }
    }
}
