//! LPV representations of the vehicle: the kinematic tracking-error model (three scheduling
//! variables) and the filter- and integrator-augmented dynamic model (two scheduling
//! variables), plus bounding-box vertex enumeration.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::plant::{normalize_angle, resistive_force, Pose, VehicleParams};
use crate::{Error, Result};

/// Tracking error expressed in the vehicle body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KinematicError {
    pub x_e: f64,
    pub y_e: f64,
    pub theta_e: f64,
}

impl KinematicError {
    pub fn new(x_e: f64, y_e: f64, theta_e: f64) -> Self {
        Self { x_e, y_e, theta_e }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x_e, self.y_e, self.theta_e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulingVariable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Ordered scheduling-variable intervals defining a bounding-box polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchedulingBounds {
    pub variables: Vec<SchedulingVariable>,
}

impl SchedulingBounds {
    pub fn new(vars: &[(&str, f64, f64)]) -> Result<Self> {
        let bounds = Self {
            variables: vars
                .iter()
                .map(|&(name, lower, upper)| SchedulingVariable {
                    name: name.to_string(),
                    lower,
                    upper,
                })
                .collect(),
        };
        bounds.validate()?;
        Ok(bounds)
    }

    /// `v ∈ [1, 18]`, `sigma ∈ [0.0873, 0.9599]`.
    pub fn dynamic_default() -> Self {
        Self::new(&[("v", 1.0, 18.0), ("sigma", 0.0873, 0.9599)]).unwrap()
    }

    /// `v_d ∈ [1, 18]`, `omega ∈ [-1.417, 1.417]`, `theta_e ∈ [-0.139, 0.139]`.
    pub fn kinematic_default() -> Self {
        Self::new(&[("v_d", 1.0, 18.0), ("omega", -1.417, 1.417), ("theta_e", -0.139, 0.139)]).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::Config("scheduling bounds are empty".into()));
        }
        for var in &self.variables {
            if !(var.lower.is_finite() && var.upper.is_finite() && var.lower < var.upper) {
                return Err(Error::Config(format!(
                    "scheduling variable '{}' has degenerate interval [{}, {}]",
                    var.name, var.lower, var.upper
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        1 << self.variables.len()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Config(format!("scheduling variable '{name}' not present")))
    }

    pub fn get(&self, name: &str) -> Result<&SchedulingVariable> {
        Ok(&self.variables[self.index_of(name)?])
    }
}

/// Current scheduling-variable values, in the order of the bounds they refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchedulingPoint(pub Vec<f64>);

impl SchedulingPoint {
    pub fn value(&self, bounds: &SchedulingBounds, name: &str) -> Result<f64> {
        let i = bounds.index_of(name)?;
        self.0
            .get(i)
            .copied()
            .ok_or_else(|| Error::DimensionMismatch(format!("point has no component {i}")))
    }
}

/// Polytope corners in canonical binary order (last variable toggles fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet(pub Vec<SchedulingPoint>);

impl VertexSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SchedulingPoint> {
        self.0.iter()
    }
}

pub fn enumerate_vertices(bounds: &SchedulingBounds) -> VertexSet {
    let n = bounds.len();
    let points = (0..bounds.vertex_count())
        .map(|i| {
            SchedulingPoint(
                bounds
                    .variables
                    .iter()
                    .enumerate()
                    .map(|(j, var)| {
                        if (i >> (n - 1 - j)) & 1 == 1 {
                            var.upper
                        } else {
                            var.lower
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    VertexSet(points)
}

/// Which steering value the trigonometric entries of the dynamic `A` are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringEvaluation {
    /// Evaluate at the shifted scheduling variable `σ` itself.
    Sigma,
    /// Evaluate at the physical steering angle `δ = σ − ε`.
    #[default]
    Delta,
}

/// Sign convention of the slip-angle row of the dynamic `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlipRow {
    /// Jacobian of the nonlinear slip equation (`∂α̇/∂δ > 0`).
    #[default]
    Jacobian,
    /// The `Cx` terms of the row negated: `(Cx cos σ − Cx)/(Mv)`, `(Cx a cos σ − Cx b)/(Mv²) − 1`,
    /// `−Cx cos σ/(Mv)`. Not quadratically stabilisable over the default polytope.
    Negated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpvConfig {
    /// Steering shift `σ = δ + ε` [rad].
    pub epsilon: f64,
    /// Actuator filter gain [1/s].
    pub gamma_f: f64,
    #[serde(default)]
    pub steering: SteeringEvaluation,
    #[serde(default)]
    pub slip_row: SlipRow,
}

impl Default for LpvConfig {
    // The nominal offset is 0.5236 to four places; it is not meant to be π/6.
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            epsilon: 0.5236,
            gamma_f: 50.0,
            steering: SteeringEvaluation::Delta,
            slip_row: SlipRow::Jacobian,
        }
    }
}

impl LpvConfig {
    pub fn validate(&self, delta_max: f64) -> Result<()> {
        if !(self.epsilon > delta_max) {
            return Err(Error::Config(format!(
                "epsilon ({}) must exceed the steering bound ({delta_max})",
                self.epsilon
            )));
        }
        if !(self.gamma_f > 0.0) {
            return Err(Error::Config(format!("gamma_f must be positive, got {}", self.gamma_f)));
        }
        Ok(())
    }
}

/// State-space matrices of an LPV model frozen at one scheduling point.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Reference vector `(v_d cos θ_e, ω_d)`; kinematic model only.
    pub r: Option<DVector<f64>>,
}

/// Rotates the world-frame pose difference into the body frame of `pose`.
pub fn pose_error_body(pose: &Pose, reference: &Pose) -> KinematicError {
    let dx = reference.x - pose.x;
    let dy = reference.y - pose.y;
    let (s, c) = pose.theta.sin_cos();
    KinematicError {
        x_e: c * dx + s * dy,
        y_e: -s * dx + c * dy,
        theta_e: normalize_angle(reference.theta - pose.theta),
    }
}

/// Open-loop tracking-error dynamics for commanded `(v, ω)` and reference `(v_d, ω_d)`.
pub fn kinematic_error_derivatives(err: &KinematicError, command: (f64, f64), reference: (f64, f64)) -> Vector3<f64> {
    let (v, omega) = command;
    let (v_d, omega_d) = reference;
    Vector3::new(
        omega * err.y_e + v_d * err.theta_e.cos() - v,
        -omega * err.x_e + v_d * err.theta_e.sin(),
        omega_d - omega,
    )
}

/// `sin(x)/x`, continuous through zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() / x
    }
}

pub fn kinematic_input_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, 0.0, 0.0, -1.0])
}

/// Kinematic LPV model at `(v_d, ω, θ_e)`; `omega_d` only enters the reference vector.
pub fn kinematic_lpv_matrices(v_d: f64, omega: f64, theta_e: f64, omega_d: f64) -> LpvMatrices {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[0.0, omega, 0.0, -omega, 0.0, v_d * sinc(theta_e), 0.0, 0.0, 0.0],
    );
    LpvMatrices {
        a,
        b: kinematic_input_matrix(),
        c: DMatrix::identity(3, 3),
        r: Some(DVector::from_column_slice(&[v_d * theta_e.cos(), omega_d])),
    }
}

/// Kinematic `A` at a point ordered like `bounds` (which must name `v_d`, `omega`, `theta_e`).
pub fn kinematic_lpv_at(bounds: &SchedulingBounds, point: &SchedulingPoint) -> Result<LpvMatrices> {
    Ok(kinematic_lpv_matrices(
        point.value(bounds, "v_d")?,
        point.value(bounds, "omega")?,
        point.value(bounds, "theta_e")?,
        0.0,
    ))
}

pub fn dynamic_input_matrix(cfg: &LpvConfig) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(6, 2);
    b[(3, 0)] = cfg.gamma_f;
    b[(4, 1)] = cfg.gamma_f;
    b
}

/// Selects `(v, ω)` from the dynamic state.
pub fn dynamic_output_matrix(states: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(2, states);
    c[(0, 0)] = 1.0;
    c[(1, 2)] = 1.0;
    c
}

/// Augmented dynamic LPV model with state `(v, α, ω, F_xR, δ, i_p)`, scheduled on `(v, σ = δ + ε)`, and filter inputs
/// `(u_F, u_σ)`.
pub fn dynamic_lpv_matrices(v: f64, sigma: f64, params: &VehicleParams, cfg: &LpvConfig) -> Result<LpvMatrices> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("dynamic LPV model needs v > 0, got {v}")));
    }
    let steer = match cfg.steering {
        SteeringEvaluation::Sigma => sigma,
        SteeringEvaluation::Delta => sigma - cfg.epsilon,
    };
    let (sd, cd) = steer.sin_cos();
    let VehicleParams {
        a: la,
        b: lb,
        mass: m,
        inertia: iz,
        tire_stiffness: cx,
        ..
    } = *params;
    let g = cfg.gamma_f;

    let mut a = DMatrix::zeros(6, 6);
    a[(0, 0)] = -resistive_force(v, params) / (m * v);
    a[(0, 1)] = cx * sd / m;
    a[(0, 2)] = cx * la * sd / (m * v);
    a[(0, 3)] = 1.0 / m;
    a[(0, 4)] = -cx * sd / m;
    match cfg.slip_row {
        SlipRow::Jacobian => {
            a[(1, 1)] = -(cx * cd + cx) / (m * v);
            a[(1, 2)] = (cx * lb - cx * la * cd) / (m * v * v) - 1.0;
            a[(1, 4)] = cx * cd / (m * v);
        }
        SlipRow::Negated => {
            a[(1, 1)] = (cx * cd - cx) / (m * v);
            a[(1, 2)] = (cx * la * cd - cx * lb) / (m * v * v) - 1.0;
            a[(1, 4)] = -cx * cd / (m * v);
        }
    }
    a[(2, 1)] = (cx * lb - cx * la * cd) / iz;
    a[(2, 2)] = -(cx * lb * lb + cx * la * la * cd) / (iz * v);
    a[(2, 4)] = cx * la * cd / iz;
    a[(3, 3)] = -g;
    a[(4, 4)] = -g;
    a[(5, 2)] = -1.0;

    Ok(LpvMatrices {
        a,
        b: dynamic_input_matrix(cfg),
        c: dynamic_output_matrix(6),
        r: None,
    })
}

/// Dynamic model at a point ordered like `bounds` (which must name `v` and `sigma`).
pub fn dynamic_lpv_at(
    bounds: &SchedulingBounds,
    point: &SchedulingPoint,
    params: &VehicleParams,
    cfg: &LpvConfig,
) -> Result<LpvMatrices> {
    dynamic_lpv_matrices(point.value(bounds, "v")?, point.value(bounds, "sigma")?, params, cfg)
}

/// Drops the integral state: the 5-state `(A, B)` used for the feedforward computation.
pub fn without_integrator(model: &LpvMatrices) -> (DMatrix<f64>, DMatrix<f64>) {
    let a5 = model.a.view((0, 0), (5, 5)).into_owned();
    let b5 = model.b.view((0, 0), (5, 2)).into_owned();
    (a5, b5)
}
