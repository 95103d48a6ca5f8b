use std::hint::black_box;

use bpmf_bench::{reference_timeline, seeds, typical_problem};
use bpmf_core::harness::{run_on_timeline, TrialSeeds};
use bpmf_core::netmodel::MotionKind;
use bpmf_core::projection::{objective, objective_gradient, solve_projection};
use bpmf_core::specfun::kummer_pair;
use bpmf_core::{EngineConfig, PriorInitRule, SolverConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn label(kind: MotionKind) -> &'static str {
    match kind {
        MotionKind::RandomWalk => "mm1",
        MotionKind::ConstantVelocity => "mm2",
    }
}

fn special_functions(c: &mut Criterion) {
    let mut g = c.benchmark_group("kummer_pair");
    for x in [-0.5, -20.0, -1e4] {
        g.bench_function(format!("x={x}"), |b| b.iter(|| kummer_pair(black_box(x))));
    }
    g.finish();
}

fn objective_eval(c: &mut Criterion) {
    for kind in [MotionKind::RandomWalk, MotionKind::ConstantVelocity] {
        let problem = typical_problem(kind);
        let belief = problem.moments.class_belief();
        c.bench_function(&format!("objective/{}", label(kind)), |b| b.iter(|| objective(black_box(&belief), &problem)));
        c.bench_function(&format!("gradient/{}", label(kind)), |b| {
            b.iter(|| objective_gradient(black_box(&belief), &problem))
        });
    }
}

fn projection(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    for kind in [MotionKind::RandomWalk, MotionKind::ConstantVelocity] {
        let problem = typical_problem(kind);
        for count in [1, 80] {
            let s = seeds(&problem, count);
            c.bench_function(&format!("solve/{}/{count}_seeds", label(kind)), |b| {
                b.iter(|| solve_projection(black_box(&problem), &s, &cfg))
            });
        }
    }
}

fn engine_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("reference_trial_3_steps");
    g.sample_size(10);
    for kind in [MotionKind::RandomWalk, MotionKind::ConstantVelocity] {
        let tl = reference_timeline(kind, 3);
        let rule = PriorInitRule::from_scenario(&tl.config);
        let cfg = EngineConfig { t_star: 5, ..EngineConfig::default() };
        g.bench_function(label(kind), |b| {
            b.iter(|| run_on_timeline(&tl, &cfg, &rule, 0, TrialSeeds::derive(1, 0), &mut ()).expect("trial runs"))
        });
    }
    g.finish();
}

criterion_group!(benches, special_functions, objective_eval, projection, engine_step);
criterion_main!(benches);
