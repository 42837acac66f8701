//! Acceptance suite. Runs without the libtest harness so every criterion prints exactly one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lpv_guidance::lpv::{
    dynamic_lpv_matrices, kinematic_error_derivatives, kinematic_lpv_matrices, without_integrator,
};
use lpv_guidance::planner::{default_circuit, plan_trajectory};
use lpv_guidance::plant::step_rk4;
use lpv_guidance::scheduler::{
    feedforward_output_matrix, interpolate_gain, interpolation_weights, normalized_coords, GainScheduler,
};
use lpv_guidance::sim::{compute_metrics, run_simulation};
use lpv_guidance::synthesis::{
    assemble_lqr_lmi, dynamic_vertex_models, kinematic_vertex_models, riccati_gain, solve_sdp, synthesize,
    SynthesisOutcome,
};
use lpv_guidance::{
    ActuatorLimits, KinematicError, LpvConfig, PlannerConstraints, ReferenceTrajectory, Scenario, SchedulingBounds,
    SchedulingPoint, SynthesisConfig, VehicleParams, VertexGainSet,
};
use nalgebra::{DMatrix, DVector, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.2} s exceeds {limit_s} s", elapsed.as_secs_f64())
    })
}

fn dynamic_synthesis() -> SynthesisOutcome {
    let bounds = SchedulingBounds::dynamic_default();
    let (a, b) = dynamic_vertex_models(&bounds, &VehicleParams::default(), &LpvConfig::default()).unwrap();
    synthesize(&a, &b, &bounds, &SynthesisConfig::dynamic_default()).unwrap()
}

fn kinematic_synthesis() -> SynthesisOutcome {
    let bounds = SchedulingBounds::kinematic_default();
    let (a, b) = kinematic_vertex_models(&bounds).unwrap();
    synthesize(&a, &b, &bounds, &SynthesisConfig::kinematic_default()).unwrap()
}

fn default_scheduler() -> GainScheduler {
    GainScheduler::new(
        kinematic_synthesis().gains,
        dynamic_synthesis().gains,
        VehicleParams::default(),
        LpvConfig::default(),
    )
    .unwrap()
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

fn c1_riccati_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 20 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=2usize.min(n));
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.5..1.5));
        let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let q_diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
        let r_diag: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..5.0)).collect();
        let q = DMatrix::from_diagonal(&DVector::from_vec(q_diag.clone()));
        let r = DMatrix::from_diagonal(&DVector::from_vec(r_diag.clone()));
        // Draws that are not stabilizable (or numerically close to it) are redrawn.
        let Ok(k_ref) = riccati_gain(&a, &b, &q, &r) else {
            continue;
        };
        let mut cfg = SynthesisConfig {
            q_diag,
            r_diag,
            gamma_bound: 1e6,
            decay: 0.0,
            tol: 1e-9,
            max_iter: 2000,
            gamma_target: None,
        };
        let sol = solve_sdp(
            &assemble_lqr_lmi(std::slice::from_ref(&a), &b, &cfg).map_err(|e| e.to_string())?,
            &cfg.solver_settings(),
        );
        ensure(sol.status.is_usable(), || {
            format!("system {done}: loose solve {:?}", sol.status)
        })?;
        cfg.gamma_bound = 1.01 * sol.objective;
        let sol = solve_sdp(
            &assemble_lqr_lmi(std::slice::from_ref(&a), &b, &cfg).map_err(|e| e.to_string())?,
            &cfg.solver_settings(),
        );
        ensure(sol.status.is_usable(), || {
            format!("system {done}: tight solve {:?}", sol.status)
        })?;
        let p_inv = sol.p.clone().try_inverse().ok_or("singular P")?;
        let k = &sol.w[0] * p_inv;
        let e = rel_err(&k, &k_ref);
        ensure(e <= 1e-2, || {
            format!("system {done} (n={n}, m={m}): relative gain error {e:.2e}")
        })?;
        worst = worst.max(e);
        done += 1;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "20 systems, worst relative error {worst:.1e}, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn c2_certificates() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (name, outcome, decay, vertices) in [
        ("dynamic", dynamic_synthesis(), 3.0, 4),
        ("kinematic", kinematic_synthesis(), 0.5, 8),
    ] {
        let rep = &outcome.report;
        ensure(rep.vertices.len() == vertices, || {
            format!("{name}: {} vertices", rep.vertices.len())
        })?;
        ensure(rep.decay == decay, || format!("{name}: decay {}", rep.decay))?;
        let min_margin = rep.lmi_margins.iter().map(|b| b.margin).fold(f64::INFINITY, f64::min);
        ensure(min_margin >= 1e-8, || {
            format!("{name}: smallest LMI margin {min_margin:.3e}")
        })?;
        let slowest = rep
            .vertices
            .iter()
            .map(|v| v.max_real_part)
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(slowest < -decay + 1e-6, || {
            format!("{name}: slowest vertex pole {slowest:.4} vs -{decay}")
        })?;
        notes.push(format!("{name} margin {min_margin:.1e} slowest {slowest:.3}"));
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("{}, {:.2} s", notes.join("; "), start.elapsed().as_secs_f64()))
}

const REFERENCE_VERTEX_GAINS: [[f64; 12]; 4] = [
    [
        -0.7845, -0.1760, -0.0802, -0.0002, 0.0027, -0.3280, 0.0000, 0.1073, -0.2441, 0.0000, -0.0107, 0.5575,
    ],
    [
        -0.6129, -0.7835, -0.2095, -0.0000, 0.0010, -1.3048, 0.0003, 0.1559, -0.2622, 0.0000, -0.0111, 0.6480,
    ],
    [
        -1.7823, -0.1366, -0.1164, 0.0001, 0.0046, -0.3888, 0.0003, 0.0988, -0.2684, 0.0000, -0.0111, 0.5564,
    ],
    [
        -0.6104, -0.4180, -0.2686, -0.0000, 0.0044, -3.1728, 0.0002, 0.1591, -0.2621, 0.0000, -0.0111, 0.6489,
    ],
];

fn c3_interpolation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dims in 1..=4 {
        for _ in 0..500 {
            let coords: Vec<(f64, f64)> = (0..dims)
                .map(|_| {
                    let lo: f64 = rng.gen_range(0.0..=1.0);
                    (lo, 1.0 - lo)
                })
                .collect();
            let mu = interpolation_weights(&coords);
            ensure((mu.sum() - 1.0).abs() <= 1e-12, || format!("Σμ = {}", mu.sum()))?;
            ensure(mu.0.iter().all(|&w| w >= 0.0), || "negative weight".into())?;
        }
    }

    let bounds = SchedulingBounds::kinematic_default();
    let gains: Vec<DMatrix<f64>> = (0..8)
        .map(|i| DMatrix::from_fn(2, 3, |r, c| (i * 6 + r * 3 + c) as f64 * 0.37 - 4.0))
        .collect();
    let set = VertexGainSet::new(bounds.clone(), gains.clone()).map_err(|e| e.to_string())?;
    for (i, vertex) in lpv_guidance::lpv::enumerate_vertices(&bounds).iter().enumerate() {
        let k = interpolate_gain(&set, &interpolation_weights(&normalized_coords(vertex, &bounds)))
            .map_err(|e| e.to_string())?;
        ensure(k == gains[i], || format!("vertex {i} not recovered exactly"))?;
    }

    let centre =
        |b: &SchedulingBounds| SchedulingPoint(b.variables.iter().map(|v| 0.5 * (v.lower + v.upper)).collect());
    let dyn_bounds = SchedulingBounds::dynamic_default();
    let mu2 = interpolation_weights(&normalized_coords(&centre(&dyn_bounds), &dyn_bounds));
    ensure(mu2.0 == vec![0.25; 4], || format!("2-D centre weights {:?}", mu2.0))?;
    let mu3 = interpolation_weights(&normalized_coords(&centre(&bounds), &bounds));
    ensure(mu3.0 == vec![0.125; 8], || format!("3-D centre weights {:?}", mu3.0))?;

    let reference: Vec<DMatrix<f64>> = REFERENCE_VERTEX_GAINS
        .iter()
        .map(|row| DMatrix::from_row_slice(2, 6, row) * 1e4)
        .collect();
    let set = VertexGainSet::new(dyn_bounds.clone(), reference).map_err(|e| e.to_string())?;
    let mean = interpolate_gain(&set, &mu2).map_err(|e| e.to_string())?;
    ensure((mean[(0, 0)] + 9475.25).abs() < 1e-9, || {
        format!("mean K(1,1) = {}", mean[(0, 0)])
    })?;

    within(start.elapsed(), 1.0)?;
    Ok(format!(
        "mean K(1,1) = {}, {:.3} s",
        mean[(0, 0)],
        start.elapsed().as_secs_f64()
    ))
}

fn c4_feedforward_dc() -> Outcome {
    let sched = default_scheduler();
    let bounds = SchedulingBounds::dynamic_default();
    let (vb, sb) = (&bounds.variables[0], &bounds.variables[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let v = rng.gen_range(vb.lower..=vb.upper);
        let sigma = rng.gen_range(sb.lower..=sb.upper);
        let law = sched.dynamic_law(v, sigma).map_err(|e| e.to_string())?;
        let model = dynamic_lpv_matrices(v, sigma, &sched.params, &sched.lpv).map_err(|e| e.to_string())?;
        let (a, b) = without_integrator(&model);
        let k = law.gain.columns(0, 5).into_owned();
        let closed = -(&b * &k) - &a;
        let x = closed.lu().solve(&b).ok_or("singular closed loop")?;
        let dc = feedforward_output_matrix() * x * &law.feedforward.0;
        let err = (dc - DMatrix::<f64>::identity(2, 2)).amax();
        worst = worst.max(err);
    }
    ensure(worst <= 1e-8, || format!("worst DC deviation {worst:.2e}"))?;
    Ok(format!("50 points, worst |DC - I| {worst:.1e}"))
}

fn c5_cruise() -> Outcome {
    let sched = default_scheduler();
    let start = Instant::now();
    let traj = ReferenceTrajectory::straight_line(10.0, 20.0, 0.1);
    let scenario = Scenario::new(traj, sched, ActuatorLimits::default()).map_err(|e| e.to_string())?;
    let t = run_simulation(&scenario).map_err(|e| e.to_string())?;
    let late = t
        .records
        .iter()
        .filter(|r| r.t > 5.0)
        .map(|r| (r.v - r.v_d).abs())
        .fold(0.0, f64::max);
    within(start.elapsed(), 5.0)?;
    ensure(late <= 0.14, || format!("max |v - v_d| after 5 s = {late:.4} m/s"))?;
    Ok(format!(
        "max |v - v_d| after 5 s = {late:.2e} m/s, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn c6_circuit() -> Outcome {
    let sched = default_scheduler();
    let start = Instant::now();
    let traj =
        plan_trajectory(&default_circuit(), true, &PlannerConstraints::default(), 0.1).map_err(|e| e.to_string())?;
    let horizon = traj.horizon();
    let scenario = Scenario::new(traj, sched, ActuatorLimits::default()).map_err(|e| e.to_string())?;
    let t = run_simulation(&scenario).map_err(|e| format!("aborted: {e}"))?;
    let m = compute_metrics(&t).map_err(|e| e.to_string())?;
    within(start.elapsed(), 60.0)?;
    ensure(m.rmse_v <= 0.15 && m.rmse_w <= 0.05 && m.rmse_y <= 0.15, || {
        format!("{m:?}")
    })?;
    Ok(format!(
        "lap {horizon:.1} s: rmse_v {:.4} m/s, rmse_w {:.4} rad/s, rmse_y {:.4} m, {:.2} s",
        m.rmse_v,
        m.rmse_w,
        m.rmse_y,
        start.elapsed().as_secs_f64()
    ))
}

fn c7_embedding() -> Outcome {
    let bounds = SchedulingBounds::kinematic_default();
    let vars = &bounds.variables;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let v_d = rng.gen_range(vars[0].lower..=vars[0].upper);
        let omega = rng.gen_range(vars[1].lower..=vars[1].upper);
        let theta_e = rng.gen_range(vars[2].lower..=vars[2].upper);
        let err = KinematicError::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), theta_e);
        let v = rng.gen_range(0.0..20.0);
        let omega_d = rng.gen_range(-1.5..1.5);
        let exact = kinematic_error_derivatives(&err, (v, omega), (v_d, omega_d));
        let m = kinematic_lpv_matrices(v_d, omega, theta_e, omega_d);
        let u = DVector::from_column_slice(&[v, omega]);
        let r = m.r.clone().ok_or("kinematic model without reference vector")?;
        let x = DVector::from_column_slice(err.to_vector().as_slice());
        let lpv = &m.a * x + &m.b * (u - r);
        for i in 0..3 {
            let e = (lpv[i] - exact[i]).abs() / exact[i].abs().max(1.0);
            worst = worst.max(e);
        }
    }
    ensure(worst <= 1e-12, || format!("worst derivative mismatch {worst:.2e}"))?;
    Ok(format!("1000 samples, worst mismatch {worst:.1e}"))
}

fn c8_rk4_order() -> Outcome {
    let global_error = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let mut x = SVector::<f64, 1>::new(1.0);
        for _ in 0..steps {
            x = step_rk4(|x: &SVector<f64, 1>, _: &()| Ok(-x), &x, &(), dt).unwrap();
        }
        (x[0] - (-1f64).exp()).abs()
    };
    let ratio = global_error(0.1) / global_error(0.05);
    ensure((13.0..=19.0).contains(&ratio), || format!("error ratio {ratio:.3}"))?;
    Ok(format!("error ratio {ratio:.3}"))
}

fn c9_determinism() -> Outcome {
    let run = || -> Result<String, String> {
        let traj = plan_trajectory(&default_circuit(), true, &PlannerConstraints::default(), 0.1)
            .map_err(|e| e.to_string())?;
        let scenario =
            Scenario::new(traj, default_scheduler(), ActuatorLimits::default()).map_err(|e| e.to_string())?;
        Ok(run_simulation(&scenario).map_err(|e| e.to_string())?.to_csv())
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    std::fs::write(&p1, run()?).map_err(|e| e.to_string())?;
    std::fs::write(&p2, run()?).map_err(|e| e.to_string())?;
    let (a, b) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    ensure(a == b, || "telemetry files differ".into())?;
    Ok(format!("{} identical bytes", a.len()))
}

fn main() -> ExitCode {
    // `cargo test -- --list` and friends: report one test so the harness protocol stays happy.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 9] = [
        ("1 riccati-oracle equivalence", c1_riccati_equivalence),
        ("2 certificate check", c2_certificates),
        ("3 interpolation properties", c3_interpolation),
        ("4 feedforward DC tracking", c4_feedforward_dc),
        ("5 cruise regulation", c5_cruise),
        ("6 full-circuit tracking", c6_circuit),
        ("7 LPV embedding exactness", c7_embedding),
        ("8 integrator order", c8_rk4_order),
        ("9 determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
