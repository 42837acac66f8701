use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lpv_guidance::planner::{default_circuit, plan_trajectory};
use lpv_guidance::scheduler::GainScheduler;
use lpv_guidance::sim::run_simulation;
use lpv_guidance::synthesis::{dynamic_vertex_models, kinematic_vertex_models, synthesize};
use lpv_guidance::{
    ActuatorLimits, LpvConfig, PlannerConstraints, Scenario, SchedulingBounds, SynthesisConfig, VehicleParams,
};

fn scheduler() -> GainScheduler {
    let (kb, db) = (
        SchedulingBounds::kinematic_default(),
        SchedulingBounds::dynamic_default(),
    );
    let (a, b) = kinematic_vertex_models(&kb).unwrap();
    let k = synthesize(&a, &b, &kb, &SynthesisConfig::kinematic_default()).unwrap();
    let (a, b) = dynamic_vertex_models(&db, &VehicleParams::default(), &LpvConfig::default()).unwrap();
    let d = synthesize(&a, &b, &db, &SynthesisConfig::dynamic_default()).unwrap();
    GainScheduler::new(k.gains, d.gains, VehicleParams::default(), LpvConfig::default()).unwrap()
}

fn synthesis(c: &mut Criterion) {
    let mut g = c.benchmark_group("synthesis");
    g.sample_size(20);
    let db = SchedulingBounds::dynamic_default();
    let (a, b) = dynamic_vertex_models(&db, &VehicleParams::default(), &LpvConfig::default()).unwrap();
    let cfg = SynthesisConfig::dynamic_default();
    g.bench_function("dynamic_4_vertices", |bench| {
        bench.iter(|| synthesize(black_box(&a), &b, &db, &cfg).unwrap())
    });
    let kb = SchedulingBounds::kinematic_default();
    let (a, b) = kinematic_vertex_models(&kb).unwrap();
    let cfg = SynthesisConfig::kinematic_default();
    g.bench_function("kinematic_8_vertices", |bench| {
        bench.iter(|| synthesize(black_box(&a), &b, &kb, &cfg).unwrap())
    });
    g.finish();
}

fn scheduling(c: &mut Criterion) {
    let s = scheduler();
    c.bench_function("dynamic_law", |bench| {
        bench.iter(|| s.dynamic_law(black_box(7.3), black_box(0.61)).unwrap())
    });
    c.bench_function("kinematic_gain", |bench| {
        bench.iter(|| {
            s.kinematic_gain(black_box(7.3), black_box(0.2), black_box(0.01))
                .unwrap()
        })
    });
}

fn planning_and_simulation(c: &mut Criterion) {
    let waypoints = default_circuit();
    let constraints = PlannerConstraints::default();
    c.bench_function("plan_default_circuit", |bench| {
        bench.iter(|| plan_trajectory(black_box(&waypoints), true, &constraints, 0.1).unwrap())
    });
    let traj = plan_trajectory(&waypoints, true, &constraints, 0.1).unwrap();
    let scenario = Scenario::new(traj, scheduler(), ActuatorLimits::default()).unwrap();
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    g.bench_function("default_circuit_lap", |bench| {
        bench.iter(|| run_simulation(black_box(&scenario)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, synthesis, scheduling, planning_and_simulation);
criterion_main!(benches);
