//! Nonlinear ground-truth vehicle: kinematic pose propagation, the dynamic bicycle model with
//! linear tire forces, aerodynamic drag and rolling friction, and a fixed-step RK4 integrator.

use std::f64::consts::PI;

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical constants of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Distance from the centre of gravity to the front axle [m].
    pub a: f64,
    /// Distance from the centre of gravity to the rear axle [m].
    pub b: f64,
    /// Mass [kg].
    pub mass: f64,
    /// Yaw inertia [kg m²].
    pub inertia: f64,
    /// Drag coefficient [-].
    pub drag_coeff: f64,
    /// Frontal area [m²].
    pub frontal_area: f64,
    /// Air density [kg/m³].
    pub air_density: f64,
    /// Rolling friction coefficient [-].
    pub friction: f64,
    /// Tire cornering stiffness [N/rad].
    pub tire_stiffness: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            a: 0.758,
            b: 1.036,
            mass: 683.0,
            inertia: 560.94,
            drag_coeff: 0.36,
            frontal_area: 1.91,
            air_density: 1.184,
            friction: 0.09,
            tire_stiffness: 25000.0,
            gravity: 9.81,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("mass", self.mass),
            ("inertia", self.inertia),
            ("drag_coeff", self.drag_coeff),
            ("frontal_area", self.frontal_area),
            ("air_density", self.air_density),
            ("friction", self.friction),
            ("tire_stiffness", self.tire_stiffness),
            ("gravity", self.gravity),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "vehicle.{name} must be strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// World-frame pose. `theta` is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Maps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Body-frame dynamic state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DynamicState {
    /// Linear speed [m/s].
    pub v: f64,
    /// Slip angle [rad].
    pub alpha: f64,
    /// Yaw rate [rad/s].
    pub omega: f64,
}

impl DynamicState {
    pub fn new(v: f64, alpha: f64, omega: f64) -> Self {
        Self { v, alpha, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorInput {
    /// Rear longitudinal force [N].
    pub force: f64,
    /// Front steering angle [rad].
    pub delta: f64,
}

impl ActuatorInput {
    pub fn new(force: f64, delta: f64) -> Self {
        Self { force, delta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorLimits {
    /// Upper bound on the rear force [N]; the lower bound is always 0 (no brake actuator).
    pub force_max: f64,
    /// Symmetric steering bound [rad].
    pub delta_max: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self {
            force_max: 5000.0,
            delta_max: 0.4363,
        }
    }
}

impl ActuatorLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.force_max > 0.0 && self.delta_max > 0.0) {
            return Err(Error::Config(format!(
                "actuator limits must be positive, got force_max = {}, delta_max = {}",
                self.force_max, self.delta_max
            )));
        }
        Ok(())
    }
}

/// Pose time-derivative `(v cos θ, v sin θ, ω)`.
pub fn kinematic_derivatives(pose: &Pose, v: f64, omega: f64) -> Vector3<f64> {
    let (s, c) = pose.theta.sin_cos();
    Vector3::new(v * c, v * s, omega)
}

fn check_speed(v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("speed must be positive, got v = {v}")))
    }
}

/// Front and rear lateral tire forces `(F_yF, F_yR)`.
pub fn tire_forces(state: &DynamicState, delta: f64, params: &VehicleParams) -> Result<(f64, f64)> {
    check_speed(state.v)?;
    let DynamicState { v, alpha, omega } = *state;
    let c = params.tire_stiffness;
    let front = c * (delta - alpha - params.a * omega / v);
    let rear = c * (-alpha + params.b * omega / v);
    Ok((front, rear))
}

/// Aerodynamic drag plus rolling friction.
pub fn resistive_force(v: f64, params: &VehicleParams) -> f64 {
    0.5 * params.drag_coeff * params.air_density * params.frontal_area * v * v
        + params.friction * params.mass * params.gravity
}

/// `(v̇, α̇, ω̇)` of the dynamic bicycle model.
pub fn dynamic_derivatives(
    state: &DynamicState,
    input: &ActuatorInput,
    params: &VehicleParams,
) -> Result<Vector3<f64>> {
    let (fy_front, fy_rear) = tire_forces(state, input.delta, params)?;
    let DynamicState { v, alpha, omega } = *state;
    let ActuatorInput { force, delta } = *input;
    let m = params.mass;

    let v_dot = (force * alpha.cos() + fy_front * (alpha - delta).sin() + fy_rear * alpha.sin()
        - resistive_force(v, params))
        / m;
    let alpha_dot = (-force * alpha.sin() + fy_front * (alpha - delta).cos() + fy_rear * alpha.cos()) / (m * v) - omega;
    let omega_dot = (fy_front * params.a * delta.cos() - fy_rear * params.b) / params.inertia;
    Ok(Vector3::new(v_dot, alpha_dot, omega_dot))
}

/// One classical fourth-order Runge–Kutta step with the input held constant over the step.
pub fn step_rk4<const N: usize, U, F>(f: F, x: &SVector<f64, N>, input: &U, dt: f64) -> Result<SVector<f64, N>>
where
    F: Fn(&SVector<f64, N>, &U) -> Result<SVector<f64, N>>,
{
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("integration step must be positive, got {dt}")));
    }
    let k1 = f(x, input)?;
    let k2 = f(&(x + k1 * (dt / 2.0)), input)?;
    let k3 = f(&(x + k2 * (dt / 2.0)), input)?;
    let k4 = f(&(x + k3 * dt), input)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Full plant state `(x, y, θ, v, α, ω)`.
pub type PlantVector = SVector<f64, 6>;

pub fn plant_vector(pose: &Pose, state: &DynamicState) -> PlantVector {
    PlantVector::from([pose.x, pose.y, pose.theta, state.v, state.alpha, state.omega])
}

pub fn split_plant_vector(x: &PlantVector) -> (Pose, DynamicState) {
    (Pose::new(x[0], x[1], x[2]), DynamicState::new(x[3], x[4], x[5]))
}

/// Combined kinematic + dynamic derivative of the full plant.
pub fn plant_derivatives(x: &PlantVector, input: &ActuatorInput, params: &VehicleParams) -> Result<PlantVector> {
    let (pose, state) = split_plant_vector(x);
    let pose_dot = kinematic_derivatives(&pose, state.v, state.omega);
    let dyn_dot = dynamic_derivatives(&state, input, params)?;
    Ok(PlantVector::from([
        pose_dot[0],
        pose_dot[1],
        pose_dot[2],
        dyn_dot[0],
        dyn_dot[1],
        dyn_dot[2],
    ]))
}

/// Componentwise clamp: force to `[0, force_max]`, steering to `[-delta_max, delta_max]`.
pub fn saturate_inputs(input: &ActuatorInput, limits: &ActuatorLimits) -> ActuatorInput {
    ActuatorInput {
        force: input.force.clamp(0.0, limits.force_max),
        delta: input.delta.clamp(-limits.delta_max, limits.delta_max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SVector;
    use proptest::prelude::*;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn kinematics_examples() {
        let d = kinematic_derivatives(&Pose::new(0.0, 0.0, 0.0), 1.0, 0.0);
        assert_eq!(d, Vector3::new(1.0, 0.0, 0.0));
        let d = kinematic_derivatives(&Pose::new(0.0, 0.0, PI / 2.0), 2.0, 0.0);
        assert_abs_diff_eq!(d, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-15);
        let d = kinematic_derivatives(&Pose::new(0.0, 0.0, PI / 4.0), 2f64.sqrt(), 0.3);
        assert_abs_diff_eq!(d, Vector3::new(1.0, 1.0, 0.3), epsilon = 1e-15);
    }

    #[test]
    fn tire_force_examples() {
        let p = params();
        let (f, r) = tire_forces(&DynamicState::new(10.0, 0.0, 0.0), 0.0, &p).unwrap();
        assert_eq!((f, r), (0.0, 0.0));
        let (f, r) = tire_forces(&DynamicState::new(10.0, 0.0, 0.0), 0.1, &p).unwrap();
        assert_abs_diff_eq!(f, 2500.0, epsilon = 1e-9);
        assert_eq!(r, 0.0);
        let (f, r) = tire_forces(&DynamicState::new(10.0, 0.0, 0.5), 0.0, &p).unwrap();
        assert_abs_diff_eq!(f, -947.5, epsilon = 1e-9);
        assert_abs_diff_eq!(r, 1295.0, epsilon = 1e-9);
    }

    #[test]
    fn tire_forces_reject_nonpositive_speed() {
        let p = params();
        assert!(matches!(
            tire_forces(&DynamicState::new(0.0, 0.0, 0.0), 0.0, &p),
            Err(Error::Domain(_))
        ));
        assert!(dynamic_derivatives(&DynamicState::new(-1.0, 0.0, 0.0), &ActuatorInput::default(), &p).is_err());
    }

    #[test]
    fn resistive_force_examples() {
        let p = params();
        assert_abs_diff_eq!(resistive_force(0.0, &p), 603.0207, epsilon = 1e-4);
        assert_abs_diff_eq!(resistive_force(10.0, &p), 643.72662, epsilon = 1e-4);
        let free = VehicleParams {
            friction: 0.0,
            drag_coeff: 0.0,
            ..p
        };
        assert_eq!(resistive_force(7.0, &free), 0.0);
    }

    #[test]
    fn dynamic_derivative_examples() {
        let p = params();
        let s = DynamicState::new(10.0, 0.0, 0.0);
        let fdf = resistive_force(10.0, &p);
        let d = dynamic_derivatives(&s, &ActuatorInput::new(fdf, 0.0), &p).unwrap();
        assert_eq!(d, Vector3::zeros());
        let d = dynamic_derivatives(&s, &ActuatorInput::new(0.0, 0.0), &p).unwrap();
        assert_abs_diff_eq!(d[0], -fdf / 683.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[0], -0.9425, epsilon = 1e-4);
        assert_eq!((d[1], d[2]), (0.0, 0.0));
        let d = dynamic_derivatives(&s, &ActuatorInput::new(fdf, 0.1), &p).unwrap();
        assert_abs_diff_eq!(d[2], 2500.0 * 0.758 * 0.1f64.cos() / 560.94, epsilon = 1e-12);
        assert_abs_diff_eq!(d[2], 3.361, epsilon = 1e-3);
    }

    #[test]
    fn rk4_decay_matches_closed_form() {
        let f = |x: &SVector<f64, 1>, _: &()| Ok(-x);
        let mut x = SVector::<f64, 1>::new(1.0);
        for _ in 0..100 {
            x = step_rk4(f, &x, &(), 0.01).unwrap();
        }
        assert_abs_diff_eq!(x[0], (-1f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn rk4_zero_and_constant_fields() {
        let zero = |_: &SVector<f64, 2>, _: &()| Ok(SVector::<f64, 2>::zeros());
        let x = SVector::<f64, 2>::new(0.3, -4.0);
        assert_eq!(step_rk4(zero, &x, &(), 0.1).unwrap(), x);

        let pose = Pose::new(0.0, 0.0, 0.0);
        let f = |x: &Vector3<f64>, u: &(f64, f64)| Ok(kinematic_derivatives(&Pose::from_vector(x), u.0, u.1));
        let next = step_rk4(f, &pose.to_vector(), &(1.0, 0.0), 0.1).unwrap();
        assert_eq!(next, Vector3::new(0.1, 0.0, 0.0));
        assert!(step_rk4(f, &pose.to_vector(), &(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn rk4_propagates_domain_errors() {
        let p = params();
        let x = plant_vector(&Pose::default(), &DynamicState::new(0.0, 0.0, 0.0));
        let r = step_rk4(|x, u| plant_derivatives(x, u, &p), &x, &ActuatorInput::default(), 0.01);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn rk4_global_error_is_fourth_order() {
        let err = |steps: usize| {
            let dt = 1.0 / steps as f64;
            let f = |x: &SVector<f64, 1>, _: &()| Ok(-x);
            let mut x = SVector::<f64, 1>::new(1.0);
            for _ in 0..steps {
                x = step_rk4(f, &x, &(), dt).unwrap();
            }
            (x[0] - (-1f64).exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!((16.0 * 0.8..=16.0 * 1.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn saturation_examples() {
        let lim = ActuatorLimits::default();
        assert_eq!(saturate_inputs(&ActuatorInput::new(-200.0, 0.0), &lim).force, 0.0);
        assert_eq!(saturate_inputs(&ActuatorInput::new(10.0, 0.6), &lim).delta, 0.4363);
        let inside = ActuatorInput::new(1200.0, -0.2);
        assert_eq!(saturate_inputs(&inside, &lim), inside);
    }

    #[test]
    fn angle_normalization() {
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(7.0), 7.0 - 2.0 * PI, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn equilibrium_holds_for_any_speed(v in 0.01f64..40.0) {
            let p = params();
            let d = dynamic_derivatives(
                &DynamicState::new(v, 0.0, 0.0),
                &ActuatorInput::new(resistive_force(v, &p), 0.0),
                &p,
            ).unwrap();
            prop_assert_eq!(d, Vector3::zeros());
        }

        #[test]
        fn mirror_symmetry(
            v in 1.0f64..18.0,
            alpha in -0.05f64..0.05,
            omega in -0.3f64..0.3,
            delta in -0.1f64..0.1,
            force in 0.0f64..2000.0,
        ) {
            let p = params();
            let d = dynamic_derivatives(&DynamicState::new(v, alpha, omega), &ActuatorInput::new(force, delta), &p).unwrap();
            let m = dynamic_derivatives(&DynamicState::new(v, -alpha, -omega), &ActuatorInput::new(force, -delta), &p).unwrap();
            let tol = |x: f64| 1e-6 * x.abs().max(1e-9);
            prop_assert!((d[0] - m[0]).abs() <= tol(d[0]));
            prop_assert!((d[1] + m[1]).abs() <= tol(d[1]));
            prop_assert!((d[2] + m[2]).abs() <= tol(d[2]));
        }

        #[test]
        fn saturation_is_idempotent(force in -1e4f64..1e4, delta in -2.0f64..2.0) {
            let lim = ActuatorLimits::default();
            let once = saturate_inputs(&ActuatorInput::new(force, delta), &lim);
            prop_assert_eq!(saturate_inputs(&once, &lim), once);
            prop_assert!(once.force >= 0.0 && once.force <= lim.force_max);
            prop_assert!(once.delta.abs() <= lim.delta_max);
        }
    }
}
