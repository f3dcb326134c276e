//! Acceptance criteria 1–9. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix4, Rotation3, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vtsi_core::beam::{BeamSection, BoundaryConditions, BridgeKind, BridgeOptions, BridgeSystem, EndFixity, ShearTreatment, UB};
use vtsi_core::coupling::{constraint_rates, ConstraintEval, DaeModel, VehicleBlock};
use vtsi_core::harness::{
    build_bridge, centripetal_check, oscillation_index, rigid_profile_history, run_simulation, run_to_dir, signals, SchemeChoice,
    SchemeName, Scenario, TimeHistory,
};
use vtsi_core::integrators::{CoupledState, Integrator, IntegratorConfig, Strategy};
use vtsi_core::path::{CosineProfile, FrameKinematics, Path, PlanSpec, SpanKind};
use vtsi_core::splines::Side;
use vtsi_core::vehicle::{mass_matrix, vehicle_energy, VehicleParams};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn signal(h: &TimeHistory, name: &str) -> Vec<f64> {
    signals(h).remove(name).unwrap_or_else(|| panic!("no signal {name}"))
}

fn oi(h: &TimeHistory, name: &str) -> f64 {
    oscillation_index(&signal(h, name), h.dt).unwrap()
}

fn newmark() -> Option<SchemeChoice> {
    Some(SchemeChoice::Named(SchemeName::Newmark))
}

fn straight_fem_span(rho: Option<SchemeChoice>) -> Scenario {
    let mut s = Scenario { plan: PlanSpec::single_straight(30.0), ..Scenario::default() };
    s.bridge.kind = BridgeKind::Fem;
    s.run.rho_inf = rho;
    s.validate().unwrap();
    s
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let run = |rho| oi(&run_simulation(&straight_fem_span(rho)).unwrap(), "wheel_acc_b");
    let nm = run(newmark());
    let one = run(Some(SchemeChoice::RhoInf(1.0)));
    let damped = run(Some(SchemeChoice::RhoInf(0.9)));
    let secs = start.elapsed().as_secs_f64();
    let pass = nm >= 10.0 * damped && one >= 10.0 * damped && secs < 10.0;
    Verdict::new(pass, format!("wheel_acc_b OI newmark {nm:.3e}, rho 1 {one:.3e}, rho 0.9 {damped:.3e}; {secs:.2} s"))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let run = |kind| {
        let mut s = Scenario::default();
        s.bridge.kind = kind;
        oi(&run_simulation(&s).unwrap(), "lam_y")
    };
    let nurbs = run(BridgeKind::Nurbs);
    let fem = run(BridgeKind::Fem);
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(nurbs * 5.0 <= fem && secs < 60.0, format!("lam_y OI nurbs {nurbs:.3e}, fem {fem:.3e}; {secs:.2} s"))
}

fn criterion_3() -> Verdict {
    let s = Scenario::default();
    let h = run_simulation(&s).unwrap();
    let c = centripetal_check(&h, &s).unwrap();
    Verdict::new(c.error <= 0.15, format!("mean lam_y {:.1} N vs {:.1} N, relative error {:.2e}", c.mean_lambda_y, c.reference, c.error))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let params = VehicleParams::default();
    let profile = CosineProfile::new(0.01, 30.0).unwrap();
    let peak = profile.peak_acceleration(params.v);
    let run = |corrected: bool| {
        let mut cfg = IntegratorConfig::new(Strategy::IndexThree, None, 1e-3);
        cfg.t0_correction = corrected;
        rigid_profile_history(&params, &profile, cfg, 0.6).unwrap()
    };
    let fixed = run(true);
    let raw = run(false);
    let max_err = fixed.records.iter().map(|r| (r.a_t[1] - profile.at_time(r.t, params.v)[2]).abs()).fold(0.0, f64::max);
    let first_increment = (fixed.records[1].a_t[1] - fixed.records[0].a_t[1]).abs();
    let jump = (raw.records[1].a_t[1] - raw.records[0].a_t[1]).abs();
    let secs = start.elapsed().as_secs_f64();
    let pass = max_err <= 0.05 * peak && jump >= 10.0 * first_increment && secs < 5.0;
    Verdict::new(
        pass,
        format!("max error {:.2e} of peak; uncorrected jump {jump:.3e} vs corrected increment {first_increment:.3e}; {secs:.2} s", max_err / peak),
    )
}

fn strategy_b(degree: usize, repair: Option<usize>) -> Scenario {
    let mut s = Scenario::default();
    s.run.strategy = Strategy::AccelerationConstraint;
    s.run.rho_inf = newmark();
    s.run.horizon = Some(0.9);
    s.run.displacement_repair_every = repair;
    s.bridge.degree = degree;
    s.validate().unwrap();
    s
}

fn criterion_5() -> Verdict {
    let mut baseline = strategy_b(3, None);
    baseline.run.strategy = Strategy::IndexThree;
    let base = run_simulation(&baseline).unwrap();
    let p3 = run_simulation(&strategy_b(3, None)).unwrap();
    let p5 = run_simulation(&strategy_b(5, None)).unwrap();
    let repaired = run_simulation(&strategy_b(3, Some(750))).unwrap();

    let acc_res = p3.records.iter().map(|r| r.residuals.relative[2]).fold(0.0, f64::max);
    let drift = p3.records.iter().map(|r| r.gap[1].abs()).fold(0.0, f64::max);
    let base_oi = oi(&base, "wheel_acc_b");
    let drift_oi = oi(&p3, "drift_b");
    let wheel_oi = oi(&p3, "wheel_acc_b");
    let repairs: Vec<_> = repaired.records.iter().filter(|r| r.repaired).collect();
    let single_repair = repairs.len() == 1 && (repairs[0].t - 0.75).abs() < 1e-12 && repairs[0].gap.iter().all(|g| *g == 0.0);
    let plotted = ["midspan:ab_b", "car_acc_b", "lam_y", "wheel_acc_n"];
    let ordered = plotted.iter().all(|n| oi(&p5, n) <= oi(&p3, n));

    let pass = acc_res <= 1e-9 && drift > 0.0 && drift_oi * 10.0 <= base_oi && wheel_oi * 10.0 <= base_oi && single_repair && ordered;
    Verdict::new(
        pass,
        format!(
            "acc residual {acc_res:.1e}, drift max {drift:.2e}, drift OI {drift_oi:.3e} and wheel OI {wheel_oi:.3e} vs baseline {base_oi:.3e}, \
             single exact repair {single_repair}, p5 <= p3 {ordered}"
        ),
    )
}

fn criterion_6() -> Verdict {
    let run = |strategy, rho| {
        let mut s = Scenario::default();
        s.run.strategy = strategy;
        s.run.rho_inf = rho;
        s.run.dt = 1e-4;
        run_simulation(&s).unwrap()
    };
    let c = run(Strategy::Projected, newmark());
    let a = run(Strategy::IndexThree, Some(SchemeChoice::RhoInf(0.9)));
    let worst: Vec<f64> = (0..3).map(|k| c.records.iter().map(|r| r.residuals.relative[k]).fold(0.0, f64::max)).collect();
    let mid_a = a.series(|r| r.probes[0][1]);
    let mid_c = c.series(|r| r.probes[0][1]);
    let peak = mid_a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rms = (mid_a.iter().zip(&mid_c).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / mid_a.len() as f64).sqrt();
    let pass = worst.iter().all(|w| *w <= 1e-9) && rms <= 0.02 * peak;
    Verdict::new(pass, format!("residuals {:.1e}/{:.1e}/{:.1e}, midspan RMS difference {:.2e} of peak", worst[0], worst[1], worst[2], rms / peak))
}

fn random_frame(rng: &mut ChaCha8Rng) -> FrameKinematics {
    let mut v = |scale: f64| Vector3::from_fn(|_, _| rng.random_range(-scale..scale));
    FrameKinematics {
        rotation: *Rotation3::new(v(3.0)).matrix(),
        omega: v(0.05),
        omega_dot: v(0.5),
        origin: v(100.0),
        origin_vel: v(0.1),
        origin_acc: v(3.0),
    }
}

fn mass_hessian_error() -> f64 {
    let p = VehicleParams::default();
    let m = mass_matrix(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let fk = random_frame(&mut rng);
        let u = Vector4::from_fn(|_, _| rng.random_range(-0.05..0.05));
        let du = Vector4::from_fn(|_, _| rng.random_range(-0.05..0.05));
        let energy = |i: usize, a: f64, j: usize, b: f64| {
            let mut d = du;
            d[i] += a;
            d[j] += b;
            vehicle_energy(&p, &fk, &fk, &u, &d).0
        };
        let hess = Matrix4::from_fn(|i, j| (energy(i, h, j, h) - energy(i, h, j, -h) - energy(i, -h, j, h) + energy(i, -h, j, -h)) / (4.0 * h * h));
        worst = worst.max((hess - m).norm() / m.norm());
    }
    worst
}

fn default_bridge(kind: BridgeKind) -> BridgeSystem {
    let mut s = Scenario::default();
    s.bridge.kind = kind;
    build_bridge(&s).unwrap()
}

fn rate_order(bridge: &BridgeSystem, s: f64) -> (f64, f64) {
    let v = 100.0;
    let t = s / v;
    let at = |tt: f64| constraint_rates(bridge, v * tt, v, Side::Right).unwrap();
    let snap = at(t);
    // central differences of L for L̇ and of the analytic L̇ for L̈; a second
    // difference of L is exact for the nearly cubic NURBS rows
    let err = |h: f64| {
        let (fwd, bwd) = (at(t + h), at(t - h));
        let d1 = (&fwd.l - &bwd.l) / (2.0 * h);
        let d2 = (&fwd.l_dot - &bwd.l_dot) / (2.0 * h);
        ((d1 - &snap.l_dot).norm() / snap.l_dot.norm(), (d2 - &snap.l_ddot).norm() / snap.l_ddot.norm())
    };
    let (a, b) = (err(4e-3), err(2e-3));
    ((a.0 / b.0).log2(), (a.1 / b.1).log2())
}

fn partition_of_unity_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let path = Path::from_plan(&PlanSpec::default(), 10, 3).unwrap();
    let curve = path.curve();
    let (lo, hi) = curve.domain();
    (0..1000)
        .map(|_| {
            let b = curve.rational_basis(rng.random_range(lo..=hi), 0).unwrap();
            (b.values().iter().sum::<f64>() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn l_ddot_jump(b: &BridgeSystem, s: f64) -> f64 {
    let left = constraint_rates(b, s, 100.0, Side::Left).unwrap().l_ddot;
    let right = constraint_rates(b, s, 100.0, Side::Right).unwrap().l_ddot;
    (&left - &right).norm() / left.norm().max(right.norm())
}

fn criterion_7() -> Verdict {
    let hess = mass_hessian_error();
    let nurbs = default_bridge(BridgeKind::Nurbs);
    let fem = default_bridge(BridgeKind::Fem);
    let orders: Vec<(f64, f64)> = [(&nurbs, 46.5), (&nurbs, 76.5), (&fem, 46.5)].iter().map(|(b, s)| rate_order(b, *s)).collect();
    let min_order = orders.iter().flat_map(|(a, b)| [*a, *b]).fold(f64::INFINITY, f64::min);
    let pou = partition_of_unity_error();

    let curve = nurbs.path.curve();
    let geometric_jump = curve
        .knots()
        .interior_breaks()
        .iter()
        .map(|(xi, _)| {
            let l = curve.derivatives_sided(*xi, 2, Side::Left).unwrap()[2];
            let r = curve.derivatives_sided(*xi, 2, Side::Right).unwrap()[2];
            (l - r).norm() / l.norm().max(r.norm())
        })
        .fold(0.0, f64::max);
    let stations = [36.0, 51.0, 63.0, 75.0, 87.0];
    let nurbs_jump = stations.iter().map(|s| l_ddot_jump(&nurbs, *s)).fold(0.0, f64::max);
    let fem_jump = stations.iter().map(|s| l_ddot_jump(&fem, *s)).fold(f64::INFINITY, f64::min);

    let pass = hess <= 1e-6 && min_order >= 1.9 && pou <= 1e-12 && geometric_jump <= 1e-8 && nurbs_jump <= 1e-8 && fem_jump >= 0.1;
    Verdict::new(
        pass,
        format!(
            "mass Hessian {hess:.1e}; rate order min {min_order:.2}; partition {pou:.1e}; NURBS jumps curve {geometric_jump:.1e}, \
             rows {nurbs_jump:.1e}; FEM row jump min {fem_jump:.2}"
        ),
    )
}

struct Oscillator {
    m: DMatrix<f64>,
    c: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl DaeModel for Oscillator {
    fn sizes(&self) -> (usize, usize, usize) {
        (0, 1, 0)
    }
    fn vehicle(&self, _t: f64) -> vtsi_core::Result<VehicleBlock> {
        Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DVector::zeros(0)))
    }
    fn bridge(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) {
        (&self.m, &self.c, &self.k)
    }
    fn bridge_load(&self, _t: f64) -> vtsi_core::Result<DVector<f64>> {
        Ok(DVector::zeros(1))
    }
    fn constraint(&self, _t: f64) -> vtsi_core::Result<ConstraintEval> {
        Ok(ConstraintEval::empty(0, 1))
    }
    fn initial_bridge_displacement(&self) -> vtsi_core::Result<DVector<f64>> {
        Ok(DVector::zeros(1))
    }
}

fn oscillator_error(rho: f64, dt: f64) -> f64 {
    let (m, k) = (1.0, 40.0_f64);
    let omega = (k / m).sqrt();
    let model = Oscillator { m: DMatrix::from_element(1, 1, m), c: DMatrix::zeros(1, 1), k: DMatrix::from_element(1, 1, k) };
    let integrator = Integrator::new(&model, IntegratorConfig::new(Strategy::IndexThree, Some(rho), dt)).unwrap();
    let mut s = CoupledState::zeros(0, 1, 0);
    s.u_b[0] = 1.0;
    s.a_b[0] = -omega * omega;
    let mut worst: f64 = 0.0;
    for _ in 0..integrator.step_count(3.0).unwrap() {
        s = integrator.step(&s).unwrap().0;
        worst = worst.max((s.u_b[0] - (omega * s.t).cos()).abs());
    }
    worst
}

fn straight_bridge(kind: BridgeKind, elements: usize, section: BeamSection, bc: BoundaryConditions) -> BridgeSystem {
    let path = Path::from_plan(&PlanSpec::single_straight(30.0), elements, 3).unwrap();
    let options = BridgeOptions { kind, section, bc, rayleigh: (0.0, 0.0), shear: ShearTreatment::Projected, elements_per_span: elements };
    BridgeSystem::assemble(&path, &options).unwrap()
}

fn criterion_8() -> Verdict {
    let orders: Vec<f64> = [1.0, 0.9].iter().map(|&rho| (oscillator_error(rho, 2e-3) / oscillator_error(rho, 1e-3)).log2()).collect();

    // a huge shear area makes the section shear-rigid
    let length = 30.0;
    let rigid = BeamSection { a_n: Some(1e6), a_b: Some(1e6), ..BeamSection::default() };
    let ss = straight_bridge(BridgeKind::Nurbs, 12, rigid.clone(), BoundaryConditions { ends: EndFixity::Pinned, interior_supports: vec![] });
    let f = ss.natural_frequencies().unwrap()[0];
    let f_exact = std::f64::consts::PI / (2.0 * length * length) * (rigid.e * rigid.i_n / rigid.rho_lin).sqrt();

    // cantilever: clamp only the first node of a fixed-fixed assembly
    let mut cant = straight_bridge(BridgeKind::Fem, 8, BeamSection::default(), BoundaryConditions::default());
    let rows: Vec<Vec<(usize, f64)>> = (0..6).map(|c| vec![(c, 1.0)]).collect();
    let (t, _) = vtsi_core::beam::elimination_transform(cant.n_full(), &rows);
    cant.k = t.transpose() * &cant.k_full * &t;
    cant.transform = t;
    let tip = cant.n_points() - 1;
    let force = 1e5;
    let mut load = DVector::zeros(cant.n_full());
    load[6 * tip + UB] = -force;
    let q = cant.static_solution(&(cant.transform.transpose() * load)).unwrap();
    let deflection = cant.expand(&q)[6 * tip + UB].abs();
    let section = BeamSection::default();
    let d_exact = force * length.powi(3) / (3.0 * section.e * section.i_n);

    let f_err = (f - f_exact).abs() / f_exact;
    let d_err = (deflection - d_exact).abs() / d_exact;
    let pass = orders.iter().all(|o| (1.9..=2.1).contains(o)) && f_err <= 0.01 && d_err <= 0.005;
    Verdict::new(
        pass,
        format!("oscillator orders {:.3}/{:.3}; frequency error {f_err:.2e}; cantilever error {d_err:.2e}", orders[0], orders[1]),
    )
}

fn criterion_9() -> Verdict {
    let s = Scenario::from_json("{}").unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_to_dir(&s, d.path()).unwrap();
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("timehistory.csv")).unwrap();
    let identical = read(&dirs[0]) == read(&dirs[1]);

    let v = &s.vehicle;
    let vehicle = (v.m_c, v.i_c, v.m_w, v.i_w, v.k_s, v.l_0, v.v) == (41750.0, 23.2e3, 7120.0, 1.14e3, 865.6e3, 1.37, 100.0);
    let b = &s.bridge.section;
    let section = (b.e, b.a, b.i_t, b.i_n, b.i_b, b.rho_lin) == (28.25e9, 7.73, 15.65, 7.84, 74.42, 41740.0);
    let kinds: Vec<SpanKind> = s.plan.spans.iter().map(|sp| sp.kind).collect();
    let plan = kinds == [SpanKind::Straight, SpanKind::Transition, SpanKind::Arc, SpanKind::Transition, SpanKind::Straight]
        && s.plan.spans.iter().all(|sp| sp.length == 30.0)
        && s.plan.spans[2].radius_start == Some(6000.0);
    let run = s.bridge.kind == BridgeKind::Nurbs
        && s.bridge.degree == 3
        && s.run.strategy == Strategy::IndexThree
        && s.run.rho_inf() == Some(0.9)
        && s.run.dt == 1e-3;
    let pass = identical && vehicle && section && plan && run;
    Verdict::new(pass, format!("identical CSV {identical}; defaults vehicle {vehicle}, section {section}, plan {plan}, run {run}"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [fn() -> Verdict; 9] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9];
    let mut failed = Vec::new();
    // written straight to stdout so the lines survive the test harness capture
    let mut out = std::io::stdout().lock();
    for (i, criterion) in criteria.iter().enumerate() {
        let v = criterion();
        writeln!(out, "criterion {}: {} ({})", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail).unwrap();
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
