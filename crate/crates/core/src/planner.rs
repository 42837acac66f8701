//! Offline reference generation: a C² piecewise-quintic path through waypoints, an
//! acceleration-limited speed profile along it, and uniform time sampling.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::Path as FsPath;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Speed target from this waypoint on [m/s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

impl Waypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, speed: None }
    }

    pub fn with_speed(x: f64, y: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            speed: Some(speed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConstraints {
    /// Longitudinal acceleration bound [m/s²].
    pub a_max: f64,
    /// Deceleration bound [m/s²]. The vehicle has no brakes, so this should stay below the
    /// coast-down deceleration from rolling friction (≈ 0.88 m/s² for the default vehicle).
    #[serde(default = "default_decel")]
    pub decel_max: f64,
    pub v_max: f64,
    pub v_min: f64,
    /// Lateral comfort bound: `v ≤ sqrt(a_lat_max/|κ|)` [m/s²].
    pub a_lat_max: f64,
    /// Yaw-rate cap: `v ≤ omega_max/|κ|` [rad/s].
    pub omega_max: f64,
    /// Speed at the first sample; `v_min` when absent. The default of 2 m/s keeps the start
    /// above the speed range where the 0.01 s dynamic loop loses stability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_start: Option<f64>,
    /// Speed at the last sample; `v_min` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_end: Option<f64>,
}

fn default_decel() -> f64 {
    0.8
}

impl Default for PlannerConstraints {
    fn default() -> Self {
        Self {
            a_max: 1.0,
            decel_max: default_decel(),
            v_max: 10.0,
            v_min: 1.0,
            a_lat_max: 2.0,
            omega_max: 1.417,
            v_start: Some(2.0),
            v_end: Some(2.0),
        }
    }
}

/// Speed ceiling imposed by the scheduling polytopes.
pub const SCHEDULED_SPEED_MAX: f64 = 18.0;

impl PlannerConstraints {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min > 0.0 && self.v_min <= self.v_max && self.v_max <= SCHEDULED_SPEED_MAX) {
            return Err(Error::Config(format!(
                "planner speeds must satisfy 0 < v_min ({}) <= v_max ({}) <= {SCHEDULED_SPEED_MAX}",
                self.v_min, self.v_max
            )));
        }
        if !(self.a_max > 0.0 && self.decel_max > 0.0 && self.a_lat_max > 0.0 && self.omega_max > 0.0) {
            return Err(Error::Config(
                "a_max, decel_max, a_lat_max and omega_max must be positive".into(),
            ));
        }
        for v in [self.v_start, self.v_end].into_iter().flatten() {
            if !(v >= self.v_min && v <= self.v_max) {
                return Err(Error::Config(format!(
                    "boundary speed {v} outside [{}, {}]",
                    self.v_min, self.v_max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub t: f64,
    pub x_d: f64,
    pub y_d: f64,
    pub theta_d: f64,
    pub v_d: f64,
    pub omega_d: f64,
}

/// Reference samples at a fixed period starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub dt: f64,
    pub points: Vec<ReferencePoint>,
}

const POWER: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
];

const TABLE_STEPS: usize = 64;

#[derive(Debug, Clone)]
struct Segment {
    cx: [f64; 6],
    cy: [f64; 6],
}

impl Segment {
    /// Quintic Hermite segment; `m`, `a` are first and second derivatives w.r.t. `u ∈ [0, 1]`.
    fn hermite(p0: [f64; 2], m0: [f64; 2], a0: [f64; 2], a1: [f64; 2], m1: [f64; 2], p1: [f64; 2]) -> Self {
        let data = [p0, m0, a0, a1, m1, p1];
        let mut cx = [0.0; 6];
        let mut cy = [0.0; 6];
        for (basis, v) in POWER.iter().zip(data) {
            for k in 0..6 {
                cx[k] += basis[k] * v[0];
                cy[k] += basis[k] * v[1];
            }
        }
        Self { cx, cy }
    }

    fn eval(c: &[f64; 6], u: f64) -> (f64, f64, f64) {
        let mut p = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for k in (0..6).rev() {
            p = p * u + c[k];
        }
        for k in (1..6).rev() {
            d1 = d1 * u + k as f64 * c[k];
        }
        for k in (2..6).rev() {
            d2 = d2 * u + (k * (k - 1)) as f64 * c[k];
        }
        (p, d1, d2)
    }

    fn point(&self, u: f64) -> PathPoint {
        let (x, dx, ddx) = Self::eval(&self.cx, u);
        let (y, dy, ddy) = Self::eval(&self.cy, u);
        let speed = dx.hypot(dy);
        PathPoint {
            x,
            y,
            heading: dy.atan2(dx),
            curvature: (dx * ddy - dy * ddx) / speed.powi(3),
            speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub x: f64,
    pub y: f64,
    /// Tangent direction in (−π, π].
    pub heading: f64,
    /// Signed curvature, positive to the left [1/m].
    pub curvature: f64,
    speed: f64,
}

/// Arc-length parameterised geometric path.
#[derive(Debug, Clone)]
pub struct GeometricPath {
    segments: Vec<Segment>,
    /// Cumulative arc length at every table node; `TABLE_STEPS` nodes per segment plus one.
    table: Vec<f64>,
    closed: bool,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn scale(a: [f64; 2], k: f64) -> [f64; 2] {
    [a[0] * k, a[1] * k]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Signed curvature of the circle through three points (0 when collinear).
fn circumcurvature(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    let a = sub(p1, p0);
    let b = sub(p2, p1);
    let c = sub(p2, p0);
    let den = norm(a) * norm(b) * norm(c);
    if den == 0.0 {
        0.0
    } else {
        2.0 * cross(a, b) / den
    }
}

/// Knot derivatives of the C² cubic spline through `pts` on the chord-length parameter;
/// periodic when `closed`, clamped ends otherwise.
fn spline_knot_tangents(pts: &[[f64; 2]], chords: &[f64], closed: bool) -> Vec<[f64; 2]> {
    let n = pts.len();
    let seg_count = chords.len();
    let next = |i: usize| (i + 1) % n;
    let slope = |i: usize| scale(sub(pts[next(i)], pts[i]), 1.0 / chords[i]);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, 2);
    for i in 0..n {
        if closed || (i > 0 && i < n - 1) {
            let prev = if i == 0 { seg_count - 1 } else { i - 1 };
            let (h0, h1) = (chords[prev], chords[i]);
            m[(i, (i + n - 1) % n)] += h0;
            m[(i, i)] += 2.0 * (h0 + h1);
            m[(i, next(i))] += h1;
            let d = sub(slope(i), slope(prev));
            rhs[(i, 0)] = 6.0 * d[0];
            rhs[(i, 1)] = 6.0 * d[1];
        } else if n == 2 {
            m[(i, i)] = 1.0;
        } else {
            // clamped to the end chord's reflection of the neighbouring Bessel tangent, which
            // is exact on circles
            let (k, inner) = if i == 0 { (0, 1) } else { (seg_count - 1, n - 2) };
            let (h0, h1) = (chords[inner - 1], chords[inner]);
            let (s0, s1) = (slope(inner - 1), slope(inner));
            let bessel = [
                (h1 * s0[0] + h0 * s1[0]) / (h0 + h1),
                (h1 * s0[1] + h0 * s1[1]) / (h0 + h1),
            ];
            let bn = norm(bessel).max(1e-12);
            let t = scale(bessel, 1.0 / bn);
            let d = slope(k);
            let c = 2.0 * (t[0] * d[0] + t[1] * d[1]);
            let end = [c * d[0] - t[0], c * d[1] - t[1]];
            let h = chords[k];
            if i == 0 {
                m[(0, 0)] = 2.0 * h;
                m[(0, 1)] = h;
                rhs[(0, 0)] = 6.0 * (d[0] - end[0]);
                rhs[(0, 1)] = 6.0 * (d[1] - end[1]);
            } else {
                m[(i, i - 1)] = h;
                m[(i, i)] = 2.0 * h;
                rhs[(i, 0)] = 6.0 * (end[0] - d[0]);
                rhs[(i, 1)] = 6.0 * (end[1] - d[1]);
            }
        }
    }
    let acc = m.lu().solve(&rhs).unwrap_or_else(|| DMatrix::zeros(n, 2));
    (0..n)
        .map(|i| {
            let (k, j, sign) = if i < seg_count {
                (i, next(i), -1.0)
            } else {
                (i - 1, i, 1.0)
            };
            let h = chords[k];
            let d = slope(k);
            // derivative at the start (sign −1) or end (sign +1) of segment k
            let w = if sign < 0.0 { (2.0, 1.0) } else { (1.0, 2.0) };
            [
                d[0] + sign * h * (w.0 * acc[(k, 0)] + w.1 * acc[(j, 0)]) / 6.0,
                d[1] + sign * h * (w.0 * acc[(k, 1)] + w.1 * acc[(j, 1)]) / 6.0,
            ]
        })
        .collect()
}

impl GeometricPath {
    /// Interpolates the waypoints. With `closed`, the path returns to the first waypoint with
    /// matching tangent and curvature.
    pub fn through(waypoints: &[Waypoint], closed: bool) -> Result<Self> {
        if waypoints.len() < 2 || (closed && waypoints.len() < 3) {
            return Err(Error::Planner(format!(
                "need at least {} waypoints, got {}",
                if closed { 3 } else { 2 },
                waypoints.len()
            )));
        }
        let mut pts: Vec<[f64; 2]> = waypoints.iter().map(|w| [w.x, w.y]).collect();
        if closed && norm(sub(pts[0], pts[pts.len() - 1])) < 1e-9 {
            pts.pop();
        }
        for w in &pts {
            if !(w[0].is_finite() && w[1].is_finite()) {
                return Err(Error::Planner("waypoint coordinates must be finite".into()));
            }
        }
        let n = pts.len();
        let seg_count = if closed { n } else { n - 1 };
        let next = |i: usize| (i + 1) % n;
        let chords: Vec<f64> = (0..seg_count).map(|i| norm(sub(pts[next(i)], pts[i]))).collect();
        if let Some(i) = chords.iter().position(|h| *h < 1e-9) {
            return Err(Error::Planner(format!("waypoints {i} and {} coincide", next(i))));
        }
        let dir: Vec<[f64; 2]> = (0..seg_count)
            .map(|i| scale(sub(pts[next(i)], pts[i]), 1.0 / chords[i]))
            .collect();

        // unit tangents from the C² cubic spline through the knots, curvature from the circle
        // through each knot and its neighbours
        let d1 = spline_knot_tangents(&pts, &chords, closed);
        let knots = n;
        let mut tangent = vec![[0.0; 2]; knots];
        let mut accel = vec![[0.0; 2]; knots];
        for i in 0..knots {
            let interior = closed || (i > 0 && i < n - 1);
            if interior {
                let tn = norm(d1[i]);
                if tn < 1e-9 {
                    return Err(Error::Planner(format!("path reverses at waypoint {i}")));
                }
                tangent[i] = scale(d1[i], 1.0 / tn);
                let k = circumcurvature(pts[(i + n - 1) % n], pts[i], pts[next(i)]);
                accel[i] = scale([-tangent[i][1], tangent[i][0]], k);
            }
        }
        // open ends: mirror the neighbouring tangent about the end chord
        if !closed {
            if n > 2 {
                let mirror = |t: [f64; 2], d: [f64; 2]| {
                    let k = 2.0 * (t[0] * d[0] + t[1] * d[1]);
                    [k * d[0] - t[0], k * d[1] - t[1]]
                };
                tangent[0] = mirror(tangent[1], dir[0]);
                tangent[n - 1] = mirror(tangent[n - 2], dir[seg_count - 1]);
            } else {
                tangent[0] = dir[0];
                tangent[1] = dir[0];
            }
        }
        if !closed && n > 2 {
            // ends continue the curvature of their neighbour
            let k0 = cross(tangent[1], accel[1]);
            accel[0] = scale([-tangent[0][1], tangent[0][0]], k0);
            let kn = cross(tangent[n - 2], accel[n - 2]);
            accel[n - 1] = scale([-tangent[n - 1][1], tangent[n - 1][0]], kn);
        }

        let segments: Vec<Segment> = (0..seg_count)
            .map(|i| {
                let j = next(i);
                let h = chords[i];
                Segment::hermite(
                    pts[i],
                    scale(tangent[i], h),
                    scale(accel[i], h * h),
                    scale(accel[j], h * h),
                    scale(tangent[j], h),
                    pts[j],
                )
            })
            .collect();

        let mut table = Vec::with_capacity(seg_count * TABLE_STEPS + 1);
        let mut s = 0.0;
        table.push(0.0);
        for seg in &segments {
            let du = 1.0 / TABLE_STEPS as f64;
            for k in 0..TABLE_STEPS {
                let u0 = k as f64 * du;
                // Simpson on each table cell
                let f = |u: f64| seg.point(u).speed;
                s += du / 6.0 * (f(u0) + 4.0 * f(u0 + 0.5 * du) + f(u0 + du));
                table.push(s);
            }
        }
        Ok(Self {
            segments,
            table,
            closed,
        })
    }

    pub fn length(&self) -> f64 {
        *self.table.last().unwrap_or(&0.0)
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Point at arc length `s`, clamped into `[0, length]`.
    pub fn at(&self, s: f64) -> PathPoint {
        let s = s.clamp(0.0, self.length());
        let idx = match self.table.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(self.table.len() - 2);
        let (s0, s1) = (self.table[idx], self.table[idx + 1]);
        let frac = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let seg = (idx / TABLE_STEPS).min(self.segments.len() - 1);
        let local = idx - seg * TABLE_STEPS;
        let u = (local as f64 + frac) / TABLE_STEPS as f64;
        self.segments[seg].point(u)
    }

    pub fn curvature(&self, s: f64) -> f64 {
        self.at(s).curvature
    }
}

/// Forward (acceleration) and backward (deceleration) passes over the grid; `v²` is linear
/// in `s` per cell.
fn limit_profile(limit: &[f64], ds: f64, accel: f64, decel: f64) -> Vec<f64> {
    let mut v = limit.to_vec();
    for i in 1..v.len() {
        v[i] = v[i].min((v[i - 1] * v[i - 1] + 2.0 * accel * ds).sqrt());
    }
    for i in (0..v.len() - 1).rev() {
        v[i] = v[i].min((v[i + 1] * v[i + 1] + 2.0 * decel * ds).sqrt());
    }
    v
}

/// Speed along the path on a uniform arc-length grid.
#[derive(Debug, Clone)]
pub struct SpeedProfile {
    pub ds: f64,
    pub speeds: Vec<f64>,
}

/// Builds `v_d(s)` from the speed caps, per-waypoint targets, curvature rules and the
/// acceleration bound.
pub fn speed_profile(
    path: &GeometricPath,
    waypoints: &[Waypoint],
    constraints: &PlannerConstraints,
) -> Result<SpeedProfile> {
    constraints.validate()?;
    let length = path.length();
    let cells = ((length / 0.1).ceil() as usize).max(1);
    let ds = length / cells as f64;

    // targets are carried from the waypoint where they are set, by arc length of the waypoints
    let mut target_at: Vec<(f64, f64)> = Vec::new();
    {
        let mut s_w = 0.0;
        let mut prev = [waypoints[0].x, waypoints[0].y];
        for (i, w) in waypoints.iter().enumerate() {
            if i > 0 {
                s_w += (w.x - prev[0]).hypot(w.y - prev[1]);
                prev = [w.x, w.y];
            }
            if let Some(v) = w.speed {
                if !(v > 0.0) {
                    return Err(Error::Planner(format!("waypoint {i} has non-positive speed {v}")));
                }
                target_at.push((s_w, v));
            }
        }
        // chord sums under-estimate arc length; rescale onto the path
        let chord_total = if path.is_closed() {
            s_w + (waypoints[0].x - prev[0]).hypot(waypoints[0].y - prev[1])
        } else {
            s_w
        };
        if chord_total > 0.0 {
            for t in &mut target_at {
                t.0 *= length / chord_total;
            }
        }
    }

    let mut limit = Vec::with_capacity(cells + 1);
    for i in 0..=cells {
        let s = i as f64 * ds;
        let k = path.curvature(s).abs();
        let mut v = constraints.v_max;
        if let Some(&(_, target)) = target_at.iter().rev().find(|(s_t, _)| *s_t <= s + 1e-9) {
            v = v.min(target);
        }
        if k > 0.0 {
            let curve = (constraints.a_lat_max / k).sqrt().min(constraints.omega_max / k);
            if curve < constraints.v_min {
                return Err(Error::Planner(format!(
                    "curvature {k:.4} 1/m at s = {s:.2} m forces speed {curve:.3} below v_min {}",
                    constraints.v_min
                )));
            }
            v = v.min(curve);
        }
        limit.push(v.max(constraints.v_min));
    }
    limit[0] = limit[0].min(constraints.v_start.unwrap_or(constraints.v_min));
    limit[cells] = limit[cells].min(constraints.v_end.unwrap_or(constraints.v_min));
    Ok(SpeedProfile {
        ds,
        speeds: limit_profile(&limit, ds, constraints.a_max, constraints.decel_max),
    })
}

/// Samples the path/profile pair every `dt` seconds. Each grid cell is traversed at the
/// constant acceleration that makes `v²` linear in `s`, so the sampled speed obeys the
/// acceleration bound exactly.
pub fn sample_trajectory(path: &GeometricPath, profile: &SpeedProfile, dt: f64) -> Result<ReferenceTrajectory> {
    if !(dt > 0.0) {
        return Err(Error::Planner(format!("sample period must be positive, got {dt}")));
    }
    let v = &profile.speeds;
    let ds = profile.ds;
    let mut cell_t = Vec::with_capacity(v.len());
    cell_t.push(0.0);
    for i in 0..v.len() - 1 {
        let t = cell_t[i] + 2.0 * ds / (v[i] + v[i + 1]);
        cell_t.push(t);
    }
    let total = *cell_t.last().unwrap();
    let count = (total / dt + 1e-9).floor() as usize + 1;

    let mut points = Vec::with_capacity(count);
    let mut cell = 0usize;
    let mut heading_prev: Option<f64> = None;
    for k in 0..count {
        let t = k as f64 * dt;
        while cell + 1 < v.len() - 1 && cell_t[cell + 1] <= t {
            cell += 1;
        }
        let (v0, v1) = (v[cell], v[cell + 1]);
        let tau = (t - cell_t[cell]).max(0.0);
        let acc = (v1 * v1 - v0 * v0) / (2.0 * ds);
        let speed = (v0 + acc * tau).clamp(v0.min(v1), v0.max(v1));
        let s = (cell as f64 * ds + v0 * tau + 0.5 * acc * tau * tau).min(path.length());
        let p = path.at(s);
        let theta = match heading_prev {
            None => p.heading,
            Some(prev) => prev + crate::plant::normalize_angle(p.heading - prev),
        };
        heading_prev = Some(theta);
        points.push(ReferencePoint {
            t,
            x_d: p.x,
            y_d: p.y,
            theta_d: theta,
            v_d: speed,
            omega_d: speed * p.curvature,
        });
    }
    Ok(ReferenceTrajectory { dt, points })
}

/// GeometricPath, profile and sampling in one call.
pub fn plan_trajectory(
    waypoints: &[Waypoint],
    closed: bool,
    constraints: &PlannerConstraints,
    dt: f64,
) -> Result<ReferenceTrajectory> {
    let path = GeometricPath::through(waypoints, closed)?;
    let profile = speed_profile(&path, waypoints, constraints)?;
    sample_trajectory(&path, &profile, dt)
}

impl ReferenceTrajectory {
    pub fn horizon(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }

    /// Reference at time `t`; stored samples are returned exactly, times in between are
    /// linearly interpolated.
    pub fn sample(&self, t: f64) -> Result<ReferencePoint> {
        let horizon = self.horizon();
        if self.points.is_empty() || !(t >= 0.0 && t <= horizon + 1e-9) {
            return Err(Error::Planner(format!(
                "t = {t} outside the trajectory horizon [0, {horizon}]"
            )));
        }
        let pos = t / self.dt;
        let i = (pos.floor() as usize).min(self.points.len() - 1);
        let frac = pos - i as f64;
        if frac.abs() < 1e-9 || i + 1 >= self.points.len() {
            return Ok(self.points[i]);
        }
        if (1.0 - frac).abs() < 1e-9 {
            return Ok(self.points[i + 1]);
        }
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        let lerp = |x: f64, y: f64| x + frac * (y - x);
        Ok(ReferencePoint {
            t,
            x_d: lerp(a.x_d, b.x_d),
            y_d: lerp(a.y_d, b.y_d),
            theta_d: lerp(a.theta_d, b.theta_d),
            v_d: lerp(a.v_d, b.v_d),
            omega_d: lerp(a.omega_d, b.omega_d),
        })
    }

    /// Constant-speed straight line along +x, sampled every `dt` for `horizon` seconds.
    pub fn straight_line(speed: f64, horizon: f64, dt: f64) -> Self {
        let count = (horizon / dt + 1e-9).floor() as usize + 1;
        Self {
            dt,
            points: (0..count)
                .map(|k| {
                    let t = k as f64 * dt;
                    ReferencePoint {
                        t,
                        x_d: speed * t,
                        y_d: 0.0,
                        theta_d: 0.0,
                        v_d: speed,
                        omega_d: 0.0,
                    }
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x_d,y_d,theta_d,v_d,omega_d\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.6},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                p.t, p.x_d, p.y_d, p.theta_d, p.v_d, p.omega_d
            );
        }
        out
    }

    pub fn write_csv(&self, path: &FsPath) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Parses `x y [speed]` lines; blank lines and `#` comments are ignored.
pub fn parse_waypoints(text: &str) -> Result<Vec<Waypoint>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        let num = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: '{f}' is not a number", n + 1)))
        };
        match fields.as_slice() {
            [x, y] => out.push(Waypoint::new(num(x)?, num(y)?)),
            [x, y, v] => out.push(Waypoint::with_speed(num(x)?, num(y)?, num(v)?)),
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: expected 'x y [speed]', got '{line}'",
                    n + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn read_waypoints(path: &FsPath) -> Result<Vec<Waypoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_waypoints(&text)
}

/// A straight or constant-radius piece of a course.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoursePiece {
    Straight(f64),
    /// Radius and signed turn angle (positive = left).
    Arc(f64, f64),
}

/// Samples a course built from pieces at roughly `spacing` metres.
pub fn course_waypoints(start: (f64, f64, f64), pieces: &[CoursePiece], spacing: f64) -> Vec<Waypoint> {
    let (mut x, mut y, mut th) = start;
    let mut out = vec![Waypoint::new(x, y)];
    for piece in pieces {
        match *piece {
            CoursePiece::Straight(len) => {
                let n = (len / spacing).ceil().max(1.0) as usize;
                let (x0, y0) = (x, y);
                for k in 1..=n {
                    let d = len * k as f64 / n as f64;
                    out.push(Waypoint::new(x0 + d * th.cos(), y0 + d * th.sin()));
                }
                x = x0 + len * th.cos();
                y = y0 + len * th.sin();
            }
            CoursePiece::Arc(radius, angle) => {
                let side = angle.signum();
                let (cx, cy) = (x - side * radius * th.sin(), y + side * radius * th.cos());
                let n = (radius * angle.abs() / spacing).ceil().max(1.0) as usize;
                let th0 = th;
                for k in 1..=n {
                    let a = th0 + angle * k as f64 / n as f64;
                    out.push(Waypoint::new(
                        cx + side * radius * a.sin(),
                        cy - side * radius * a.cos(),
                    ));
                }
                th = th0 + angle;
                x = cx + side * radius * th.sin();
                y = cy - side * radius * th.cos();
            }
        }
    }
    out
}

/// Default closed course: a rounded rectangle with straights of 150, 80, 158 and 42 m and
/// left-hand quarter turns of radius 20, 12, 35 and 35 m, starting at (35, 0) heading east.
pub fn default_circuit() -> Vec<Waypoint> {
    let mut pts = course_waypoints(
        (35.0, 0.0, 0.0),
        &[
            CoursePiece::Straight(150.0),
            CoursePiece::Arc(20.0, FRAC_PI_2),
            CoursePiece::Straight(80.0),
            CoursePiece::Arc(12.0, FRAC_PI_2),
            CoursePiece::Straight(158.0),
            CoursePiece::Arc(35.0, FRAC_PI_2),
            CoursePiece::Straight(42.0),
            CoursePiece::Arc(35.0, FRAC_PI_2),
        ],
        2.0,
    );
    // the course closes on its start point
    pts.pop();
    pts
}
