use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use vtsi_core::beam::BridgeKind;
use vtsi_core::coupling::{constraint_rates, VehicleBridgeModel};
use vtsi_core::harness::{build_bridge, Scenario};
use vtsi_core::integrators::{Integrator, IntegratorConfig, Strategy};
use vtsi_core::path::{Path, PlanSpec};
use vtsi_core::splines::Side;

fn basis(c: &mut Criterion) {
    let path = Path::from_plan(&PlanSpec::default(), 10, 3).unwrap();
    let curve = path.curve();
    let (lo, hi) = curve.domain();
    c.bench_function("rational_basis_p3_d2", |b| {
        let mut xi = lo;
        b.iter(|| {
            xi += 0.37;
            if xi > hi {
                xi -= hi - lo;
            }
            black_box(curve.rational_basis(black_box(xi), 2).unwrap())
        })
    });
    c.bench_function("path_kinematics", |b| b.iter(|| black_box(path.kinematics(black_box(77.7), 100.0).unwrap())));
}

fn constraint(c: &mut Criterion) {
    for kind in [BridgeKind::Nurbs, BridgeKind::Fem] {
        let mut s = Scenario::default();
        s.bridge.kind = kind;
        let bridge = build_bridge(&s).unwrap();
        c.bench_function(&format!("constraint_rates_{kind:?}").to_lowercase(), |b| {
            b.iter(|| black_box(constraint_rates(&bridge, black_box(63.3), 100.0, Side::Right).unwrap()))
        });
    }
}

fn step(c: &mut Criterion) {
    let s = Scenario::default();
    let model = VehicleBridgeModel::new(s.vehicle.clone(), build_bridge(&s).unwrap(), false).unwrap();
    for (name, strategy, rho) in [
        ("step_a_rho09", Strategy::IndexThree, Some(0.9)),
        ("step_b_newmark", Strategy::AccelerationConstraint, None),
        ("step_c_newmark", Strategy::Projected, None),
    ] {
        let integrator = Integrator::new(&model, IntegratorConfig::new(strategy, rho, 1e-3)).unwrap();
        let start = integrator.initial_state().unwrap();
        c.bench_function(name, |b| b.iter_batched(|| start.clone(), |st| black_box(integrator.step(&st).unwrap()), BatchSize::SmallInput));
    }
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    for kind in [BridgeKind::Nurbs, BridgeKind::Fem] {
        let mut s = Scenario::default();
        s.bridge.kind = kind;
        group.bench_function(format!("{kind:?}").to_lowercase(), |b| b.iter(|| black_box(build_bridge(&s).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, basis, constraint, step, assembly);
criterion_main!(benches);
