//! Property tests over randomized inputs.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;

use vtsi_core::beam::{BridgeKind, BridgeSystem};
use vtsi_core::coupling::{wheel_selection, ConstraintEval, DaeModel, VehicleBridgeModel};
use vtsi_core::harness::{
    apply_override, build_bridge, csv_header, growth_exponent, oscillation_index, write_timehistory_to, Record, Scenario, TimeHistory,
};
use vtsi_core::integrators::{constraint_residuals, project_constraints, ConstraintLevel, ConstraintResiduals, CoupledState};
use vtsi_core::path::{Path, PlanSpec, UP};
use vtsi_core::splines::{KnotVector, NurbsCurve, Side};
use vtsi_core::vehicle::VehicleParams;

fn default_path() -> &'static Path {
    static PATH: OnceLock<Path> = OnceLock::new();
    PATH.get_or_init(|| Path::from_plan(&PlanSpec::default(), 10, 3).unwrap())
}

fn default_bridge() -> &'static BridgeSystem {
    static BRIDGE: OnceLock<BridgeSystem> = OnceLock::new();
    BRIDGE.get_or_init(|| build_bridge(&Scenario::default()).unwrap())
}

fn random_curve() -> impl Strategy<Value = NurbsCurve> {
    (1usize..=5, 1usize..=8).prop_flat_map(|(p, ne)| {
        let n = p + ne;
        (
            prop::collection::vec(prop::array::uniform3(-5.0..5.0f64), n),
            prop::collection::vec(0.2..3.0f64, n),
        )
            .prop_map(move |(pts, w)| {
                let knots = KnotVector::open_uniform(p, ne).unwrap();
                NurbsCurve::new(knots, pts.into_iter().map(Vector3::from).collect(), w).unwrap()
            })
    })
}

fn dvec(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0..1.0f64, n).prop_map(DVector::from_vec)
}

fn constraint_eval(nb: usize) -> impl Strategy<Value = ConstraintEval> {
    (dvec(3 * nb), dvec(3 * nb), dvec(3 * nb), dvec(3), dvec(3), dvec(3)).prop_map(move |(l, ld, ldd, o0, o1, o2)| ConstraintEval {
        g_t: wheel_selection(),
        l: DMatrix::from_vec(3, nb, l.data.into()),
        l_dot: DMatrix::from_vec(3, nb, ld.data.into()),
        l_ddot: DMatrix::from_vec(3, nb, ldd.data.into()),
        offset: [o0, o1, o2],
    })
}

fn coupled_state(nb: usize) -> impl Strategy<Value = CoupledState> {
    (dvec(4), dvec(4), dvec(4), dvec(nb), dvec(nb), dvec(nb)).prop_map(|(u_t, v_t, a_t, u_b, v_b, a_b)| CoupledState {
        t: 0.0,
        u_t,
        v_t,
        a_t,
        u_b,
        v_b,
        a_b,
        lambda: DVector::zeros(3),
    })
}

fn level() -> impl Strategy<Value = ConstraintLevel> {
    prop_oneof![Just(ConstraintLevel::Displacement), Just(ConstraintLevel::Velocity), Just(ConstraintLevel::Acceleration)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rational_basis_partitions_unity(curve in random_curve(), u in 0.0..=1.0f64) {
        let (lo, hi) = curve.domain();
        let b = curve.rational_basis(lo + u * (hi - lo), 2).unwrap();
        let sum: f64 = b.values().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        let d1: f64 = b.derivative(1).iter().sum();
        let scale: f64 = b.derivative(1).iter().map(|v| v.abs()).sum();
        prop_assert!(d1.abs() <= 1e-10 * (1.0 + scale));
    }

    #[test]
    fn basis_is_nonnegative_with_local_support(curve in random_curve(), u in 0.0..=1.0f64) {
        let (lo, hi) = curve.domain();
        let b = curve.rational_basis(lo + u * (hi - lo), 0).unwrap();
        prop_assert_eq!(b.values().len(), curve.degree() + 1);
        prop_assert!(b.values().iter().all(|v| *v >= -1e-15));
    }

    #[test]
    fn frenet_frames_are_orthonormal_and_upright(frac in 0.0..=1.0f64) {
        let path = default_path();
        let f = path.frame(frac * path.length()).unwrap();
        let r = f.rotation();
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).amax() <= 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
        prop_assert!(f.b.dot(&UP) >= 0.0);
    }

    #[test]
    fn arclength_map_round_trips(frac in 0.0..=1.0f64) {
        let path = default_path();
        let s = frac * path.length();
        let xi = path.xi_of_s(s).unwrap();
        prop_assert!((path.s_of_xi(xi).unwrap() - s).abs() <= 1e-8);
    }

    #[test]
    fn projection_is_exact_and_idempotent(ce in constraint_eval(5), state in coupled_state(5), level in level()) {
        let p = project_constraints(&ce, &state, level).unwrap();
        prop_assert_eq!(&p.u_b, &state.u_b);
        prop_assert_eq!(&p.v_b, &state.v_b);
        prop_assert_eq!(&p.a_b, &state.a_b);
        prop_assert_eq!(p.u_t[3], state.u_t[3]);
        let r = constraint_residuals(&ce, &p);
        prop_assert!(r.relative[level as usize] <= 1e-14, "{:?}", r);
        prop_assert_eq!(project_constraints(&ce, &p, level).unwrap(), p);
    }

    #[test]
    fn constraint_forces_do_no_work_when_the_track_is_still(
        frac in 0.01..0.99f64,
        vt in dvec(4),
        lambda in dvec(3),
        vb in dvec(default_bridge().n_free()),
    ) {
        // with v = 0 the rows are frozen, so λ·ġ equals the constraint power
        let params = VehicleParams { v: 0.0, ..VehicleParams::default() };
        let model = VehicleBridgeModel::new(params, default_bridge().clone(), false).unwrap();
        let (_, nb, _) = model.sizes();
        let ub = DVector::zeros(nb);
        let ce = model.constraint(frac).unwrap();
        let lambda = lambda * 1e5;
        let power = vt.dot(&(ce.g_t.transpose() * &lambda)) + vb.dot(&(ce.l.transpose() * &lambda));
        let rate = ce.velocity_gap(&ub, &vt, &vb);
        let scale = lambda.norm() * (vt.norm() + ce.l.norm() * vb.norm());
        prop_assert!((power - lambda.dot(&rate)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn oscillation_index_is_scale_invariant(xs in prop::collection::vec(-1.0..1.0f64, 8..64), c in 1e-3..1e3f64, dt in 1e-4..1e-1f64) {
        prop_assume!(xs.iter().any(|x| x.abs() > 1e-3));
        let a = oscillation_index(&xs, dt).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let b = oscillation_index(&scaled, dt).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        // no unit-RMS signal beats the alternating sequence bound 4/Δt²
        prop_assert!(a * dt * dt <= 4.0 * (xs.len() as f64 / (xs.len() - 2) as f64).sqrt() + 1e-12);
    }

    #[test]
    fn oscillation_index_vanishes_on_affine_signals(a in -10.0..10.0f64, b in -10.0..10.0f64, n in 8usize..100) {
        prop_assume!(a.abs() + b.abs() > 1e-3);
        let xs: Vec<f64> = (0..n).map(|k| a + b * k as f64).collect();
        let oi = oscillation_index(&xs, 1e-3).unwrap();
        prop_assert!(oi * 1e-6 <= 1e-9, "{oi}");
    }

    #[test]
    fn growth_exponent_recovers_power_laws(k in 0.5..4.0f64, c in 1e-9..1e3f64) {
        let t: Vec<f64> = (1..200).map(|i| i as f64 * 1e-3).collect();
        let y: Vec<f64> = t.iter().map(|t| c * t.powf(k)).collect();
        let e = growth_exponent(&t, &y).unwrap();
        prop_assert!((e - k).abs() <= 1e-9);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 19)) {
        let record = Record {
            t: values[0],
            u_t: [values[1], values[2], values[3], values[4]],
            v_t: [values[5], values[6], values[7], values[8]],
            a_t: [values[9], values[10], values[11], values[12]],
            lambda: [values[13], values[14], values[15]],
            probes: vec![[values[16], values[17], values[18], values[0]]],
            gap: [0.0; 3],
            residuals: ConstraintResiduals::default(),
            condition: 1.0,
            repaired: false,
        };
        let history = TimeHistory { dt: 1e-3, probe_names: vec!["p".into()], records: vec![record] };
        let mut buf = Vec::new();
        write_timehistory_to(&history, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        prop_assert_eq!(lines.next().unwrap().split(',').count(), csv_header(&history).len());
        let parsed: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        let mut expected = values[..16].to_vec();
        expected.extend([values[16], values[17], values[18], values[0]]);
        for (p, e) in parsed.iter().zip(&expected) {
            prop_assert_eq!(p.to_bits(), e.to_bits());
        }
    }

    #[test]
    fn dotted_overrides_reach_the_scenario(dt in 1e-5..1e-2f64, degree in 2usize..6) {
        let mut value = serde_json::json!({});
        apply_override(&mut value, "run.dt", &format!("{dt:e}")).unwrap();
        apply_override(&mut value, "bridge.degree", &degree.to_string()).unwrap();
        let s = Scenario::from_value(value).unwrap();
        prop_assert_eq!(s.run.dt, dt);
        prop_assert_eq!(s.bridge.degree, degree);
    }
}

#[test]
fn fem_and_nurbs_rows_share_the_support_structure() {
    let nurbs = default_bridge();
    let mut s = Scenario::default();
    s.bridge.kind = BridgeKind::Fem;
    let fem = build_bridge(&s).unwrap();
    assert_eq!(nurbs.slaves.len(), fem.slaves.len());
    for b in [nurbs, &fem] {
        let rows = b.field_rows(45.0, Side::Right, 0).unwrap();
        assert!(!rows[0][1].is_empty());
    }
}
