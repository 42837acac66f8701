//! Runtime side of the cascade: scheduling-point clamping, polytopic weights, gain blending,
//! the DC feedforward and the two affine control laws.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::lpv::{
    dynamic_lpv_matrices, without_integrator, KinematicError, LpvConfig, SchedulingBounds, SchedulingPoint,
};
use crate::plant::VehicleParams;
use crate::synthesis::VertexGainSet;
use crate::{Error, Result};

/// Integrator and actuator-filter states carried between dynamic steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    /// Integral of the yaw-rate tracking error [rad].
    pub i_p: f64,
    /// Force filter state [N].
    pub force_f: f64,
    /// Steering filter state [rad]; the scheduling value is `δ_f + ε`.
    pub delta_f: f64,
}

/// Polytopic interpolation weights in canonical vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// 2×2 map from `(v_ref, ω_ref)` to filter inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardMatrix(pub DMatrix<f64>);

/// Clamps every component into its interval. Speeds below the lower bound (including the
/// `[0, 1)` start-up range) therefore use the controller designed at the lowest speed.
pub fn schedule_point(raw: &[f64], bounds: &SchedulingBounds) -> Result<SchedulingPoint> {
    if raw.len() != bounds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scheduling values for {} variables",
            raw.len(),
            bounds.len()
        )));
    }
    Ok(SchedulingPoint(
        raw.iter()
            .zip(&bounds.variables)
            .map(|(x, var)| {
                if x.is_nan() {
                    var.lower
                } else {
                    x.clamp(var.lower, var.upper)
                }
            })
            .collect(),
    ))
}

/// Per-variable `(M_lower, M_upper)` with `M_lower = (x − lower)/(upper − lower)` and
/// `M_upper = 1 − M_lower`.
pub fn normalized_coords(sv: &SchedulingPoint, bounds: &SchedulingBounds) -> Vec<(f64, f64)> {
    sv.0.iter()
        .zip(&bounds.variables)
        .map(|(x, var)| {
            let m = (x - var.lower) / (var.upper - var.lower);
            (m, 1.0 - m)
        })
        .collect()
}

/// Multilinear weights: vertex `j` takes `M_lower` for variables at their upper value in `j`
/// and `M_upper` otherwise, so the weight of a corner is 1 on that corner.
pub fn interpolation_weights(coords: &[(f64, f64)]) -> WeightVector {
    let n = coords.len();
    WeightVector(
        (0..1usize << n)
            .map(|j| {
                coords
                    .iter()
                    .enumerate()
                    .map(
                        |(k, &(m_lo, m_up))| {
                            if (j >> (n - 1 - k)) & 1 == 1 {
                                m_lo
                            } else {
                                m_up
                            }
                        },
                    )
                    .product()
            })
            .collect(),
    )
}

pub fn interpolate_gain(gains: &VertexGainSet, mu: &WeightVector) -> Result<DMatrix<f64>> {
    if mu.len() != gains.gains.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} vertex gains",
            mu.len(),
            gains.gains.len()
        )));
    }
    let (r, c) = gains.shape();
    let mut k = DMatrix::zeros(r, c);
    for (w, ki) in mu.0.iter().zip(&gains.gains) {
        if *w != 0.0 {
            k += ki * *w;
        }
    }
    Ok(k)
}

/// `N_ff = [C (−B K − A)⁻¹ B]⁻¹`.
pub fn feedforward_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<FeedforwardMatrix> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || k.shape() != (b.ncols(), n) || c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "feedforward: A {:?}, B {:?}, K {:?}, C {:?}",
            a.shape(),
            b.shape(),
            k.shape(),
            c.shape()
        )));
    }
    let m = -(b * k) - a;
    let x = m
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("closed loop −BK − A is singular".into()))?;
    let dc = c * x;
    let n_ff = dc
        .try_inverse()
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("closed-loop DC gain is singular".into()))?;
    Ok(FeedforwardMatrix(n_ff))
}

/// Selects `v` and `ω` from the 5-state dynamic vector.
pub fn feedforward_output_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 5, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
}

/// `u_f = K_D x_D + N_ff r_D`.
pub fn dynamic_control(
    x_d: &DVector<f64>,
    r_d: &Vector2<f64>,
    k_d: &DMatrix<f64>,
    n_ff: &FeedforwardMatrix,
) -> Vector2<f64> {
    let u = k_d * x_d + &n_ff.0 * DVector::from_column_slice(r_d.as_slice());
    Vector2::new(u[0], u[1])
}

/// `u_C = K_C x_C + r_C`.
pub fn kinematic_control(x_c: &KinematicError, r_c: &Vector2<f64>, k_c: &DMatrix<f64>) -> Vector2<f64> {
    let x = DVector::from_column_slice(x_c.to_vector().as_slice());
    let u = k_c * x;
    Vector2::new(u[0] + r_c[0], u[1] + r_c[1])
}

/// Gain-scheduled controller pair bound to its polytopes and plant model.
#[derive(Debug, Clone)]
pub struct GainScheduler {
    pub kinematic: VertexGainSet,
    pub dynamic: VertexGainSet,
    pub params: VehicleParams,
    pub lpv: LpvConfig,
}

/// Interpolated dynamic-loop law at one operating point.
#[derive(Debug, Clone)]
pub struct DynamicLaw {
    pub point: SchedulingPoint,
    pub gain: DMatrix<f64>,
    pub feedforward: FeedforwardMatrix,
}

impl GainScheduler {
    pub fn new(
        kinematic: VertexGainSet,
        dynamic: VertexGainSet,
        params: VehicleParams,
        lpv: LpvConfig,
    ) -> Result<Self> {
        if kinematic.shape() != (2, 3) {
            return Err(Error::Config(format!(
                "kinematic gains must be 2x3, got {:?}",
                kinematic.shape()
            )));
        }
        if dynamic.shape() != (2, 6) {
            return Err(Error::Config(format!(
                "dynamic gains must be 2x6, got {:?}",
                dynamic.shape()
            )));
        }
        for name in ["v_d", "omega", "theta_e"] {
            kinematic.bounds.index_of(name)?;
        }
        for name in ["v", "sigma"] {
            dynamic.bounds.index_of(name)?;
        }
        Ok(Self {
            kinematic,
            dynamic,
            params,
            lpv,
        })
    }

    fn raw_point(bounds: &SchedulingBounds, named: &[(&str, f64)]) -> Result<Vec<f64>> {
        let mut raw = vec![f64::NAN; bounds.len()];
        for &(name, value) in named {
            raw[bounds.index_of(name)?] = value;
        }
        Ok(raw)
    }

    pub fn kinematic_gain(&self, v_d: f64, omega: f64, theta_e: f64) -> Result<DMatrix<f64>> {
        let bounds = &self.kinematic.bounds;
        let raw = Self::raw_point(bounds, &[("v_d", v_d), ("omega", omega), ("theta_e", theta_e)])?;
        let point = schedule_point(&raw, bounds)?;
        interpolate_gain(
            &self.kinematic,
            &interpolation_weights(&normalized_coords(&point, bounds)),
        )
    }

    /// Gain and feedforward at `(v, σ)`, both evaluated at the clamped point.
    pub fn dynamic_law(&self, v: f64, sigma: f64) -> Result<DynamicLaw> {
        let bounds = &self.dynamic.bounds;
        let raw = Self::raw_point(bounds, &[("v", v), ("sigma", sigma)])?;
        let point = schedule_point(&raw, bounds)?;
        let gain = interpolate_gain(
            &self.dynamic,
            &interpolation_weights(&normalized_coords(&point, bounds)),
        )?;
        let model = dynamic_lpv_matrices(
            point.value(bounds, "v")?,
            point.value(bounds, "sigma")?,
            &self.params,
            &self.lpv,
        )?;
        let (a5, b5) = without_integrator(&model);
        let k5 = gain.columns(0, 5).into_owned();
        let feedforward = feedforward_matrix(&a5, &b5, &k5, &feedforward_output_matrix())?;
        Ok(DynamicLaw {
            point,
            gain,
            feedforward,
        })
    }
}
