//! Wheel–bridge constraints and the coupled equations of motion
//!
//! ```text
//! M_t ü_t + C_t u̇_t + K_t u_t + Gᵀ λ = P_t
//! M_b ü_b + C_b u̇_b + K_b u_b + Lᵀ λ = P_b
//!                     G u_t + L u_b + g = 0
//! ```
//!
//! with `G = (L^tr)ᵀ = −[I₃ 0]` selecting the wheel DOFs, `L(t)` the bridge
//! field rows at the wheel position and `g(t)` an optional prescribed offset.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::beam::{BridgeSystem, SparseRow, TT, UB, UN};
use crate::error::{Error, Result};
use crate::path::{CosineProfile, FrameKinematics};
use crate::splines::Side;
use crate::vehicle::{l_tr, vehicle_matrices, VehicleParams};

/// Bridge field components tied to the wheel: transverse, vertical, torsion.
pub const COUPLED_COMPONENTS: [usize; 3] = [UN, UB, TT];

/// Constraint rows at the wheel location over reduced bridge DOFs.
#[derive(Clone, Debug)]
pub struct ConstraintSnapshot {
    /// Wheel arclength (m).
    pub s: f64,
    pub l: DMatrix<f64>,
    pub l_dot: DMatrix<f64>,
    pub l_ddot: DMatrix<f64>,
    /// `L` over the full (unreduced) bridge DOFs.
    pub rows_full: [SparseRow; 3],
}

/// `L` only; rates are zero.
pub fn constraint_matrix(bridge: &BridgeSystem, s: f64) -> Result<ConstraintSnapshot> {
    constraint_rates(bridge, s, 0.0, Side::Right)
}

/// `L`, `L̇ = v ∂L/∂s` and `L̈ = v² ∂²L/∂s²` for a wheel at `s` moving at
/// constant speed `v`.
pub fn constraint_rates(bridge: &BridgeSystem, s: f64, v: f64, side: Side) -> Result<ConstraintSnapshot> {
    let length = bridge.path.length();
    if !(s >= -1e-9 * length && s <= length * (1.0 + 1e-9)) {
        return Err(Error::OffPath { s, length });
    }
    let rows = bridge.field_rows(s, side, 2)?;
    let n = bridge.n_free();
    let mut mats = [DMatrix::zeros(3, n), DMatrix::zeros(3, n), DMatrix::zeros(3, n)];
    let scale = [1.0, v, v * v];
    for (k, mat) in mats.iter_mut().enumerate() {
        for (i, &c) in COUPLED_COMPONENTS.iter().enumerate() {
            let row = bridge.reduce_row(&rows[k][c]) * scale[k];
            mat.set_row(i, &row.transpose());
        }
    }
    let [l, l_dot, l_ddot] = mats;
    let rows_full = std::array::from_fn(|i| rows[0][COUPLED_COMPONENTS[i]].clone());
    Ok(ConstraintSnapshot { s, l, l_dot, l_ddot, rows_full })
}

/// Constraint data consumed by the time integrators at one instant.
#[derive(Clone, Debug)]
pub struct ConstraintEval {
    /// Vehicle block `G` (n_c × n_t).
    pub g_t: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub l_dot: DMatrix<f64>,
    pub l_ddot: DMatrix<f64>,
    /// Prescribed offset and its first two time derivatives.
    pub offset: [DVector<f64>; 3],
}

impl ConstraintEval {
    pub fn empty(n_t: usize, n_b: usize) -> Self {
        Self {
            g_t: DMatrix::zeros(0, n_t),
            l: DMatrix::zeros(0, n_b),
            l_dot: DMatrix::zeros(0, n_b),
            l_ddot: DMatrix::zeros(0, n_b),
            offset: [DVector::zeros(0), DVector::zeros(0), DVector::zeros(0)],
        }
    }

    pub fn n_c(&self) -> usize {
        self.g_t.nrows()
    }

    /// `G u_t + L u_b + g`.
    pub fn displacement_gap(&self, u_t: &DVector<f64>, u_b: &DVector<f64>) -> DVector<f64> {
        &self.g_t * u_t + &self.l * u_b + &self.offset[0]
    }

    /// Time derivative of the gap.
    pub fn velocity_gap(&self, u_b: &DVector<f64>, v_t: &DVector<f64>, v_b: &DVector<f64>) -> DVector<f64> {
        &self.g_t * v_t + &self.l_dot * u_b + &self.l * v_b + &self.offset[1]
    }

    /// Second time derivative of the gap.
    pub fn acceleration_gap(&self, u_b: &DVector<f64>, v_b: &DVector<f64>, a_t: &DVector<f64>, a_b: &DVector<f64>) -> DVector<f64> {
        &self.g_t * a_t + &self.l_ddot * u_b + &self.l_dot * v_b * 2.0 + &self.l * a_b + &self.offset[2]
    }
}

/// Wheel selection block `G = (L^tr)ᵀ`.
pub fn wheel_selection() -> DMatrix<f64> {
    let g = l_tr().transpose();
    DMatrix::from_fn(3, 4, |i, j| g[(i, j)])
}

/// Vehicle matrices at one instant as dynamic matrices (`M, C, K, P`).
pub type VehicleBlock = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>);

/// A linear, time-varying constrained system in the block form above.
pub trait DaeModel: Sync {
    /// `(n_t, n_b, n_c)`: vehicle DOFs, bridge DOFs and constraints.
    fn sizes(&self) -> (usize, usize, usize);
    fn vehicle(&self, t: f64) -> Result<VehicleBlock>;
    /// Constant bridge `(M, C, K)`.
    fn bridge(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>);
    fn bridge_load(&self, t: f64) -> Result<DVector<f64>>;
    fn constraint(&self, t: f64) -> Result<ConstraintEval>;
    /// Bridge displacement at `t = 0`.
    fn initial_bridge_displacement(&self) -> Result<DVector<f64>>;
}

/// The vehicle riding on a flexible bridge along the bridge path.
#[derive(Clone, Debug)]
pub struct VehicleBridgeModel {
    pub params: VehicleParams,
    pub bridge: BridgeSystem,
    pub add_static_axle_load: bool,
    initial_rotation: Matrix3<f64>,
    g_t: DMatrix<f64>,
}

impl VehicleBridgeModel {
    pub fn new(params: VehicleParams, bridge: BridgeSystem, add_static_axle_load: bool) -> Result<Self> {
        let initial_rotation = bridge.path.kinematics(0.0, params.v)?.rotation;
        Ok(Self { params, bridge, add_static_axle_load, initial_rotation, g_t: wheel_selection() })
    }

    /// Time for the wheel to cross the whole bridge.
    pub fn crossing_time(&self) -> f64 {
        self.bridge.path.length() / self.params.v
    }

    pub fn wheel_position(&self, t: f64) -> f64 {
        self.params.v * t
    }

    pub fn frame(&self, t: f64) -> Result<FrameKinematics> {
        self.bridge.path.kinematics(self.wheel_position(t), self.params.v)
    }

    fn snapshot(&self, t: f64) -> Result<ConstraintSnapshot> {
        constraint_rates(&self.bridge, self.wheel_position(t), self.params.v, Side::Right)
    }
}

fn to_dynamic4(m: &nalgebra::Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |i, j| m[(i, j)])
}

impl DaeModel for VehicleBridgeModel {
    fn sizes(&self) -> (usize, usize, usize) {
        (4, self.bridge.n_free(), 3)
    }

    fn vehicle(&self, t: f64) -> Result<VehicleBlock> {
        let sys = vehicle_matrices(&self.params, &self.frame(t)?, &self.initial_rotation);
        Ok((to_dynamic4(&sys.m), to_dynamic4(&sys.c), to_dynamic4(&sys.k), DVector::from_column_slice(sys.p.as_slice())))
    }

    fn bridge(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) {
        (&self.bridge.m, &self.bridge.c, &self.bridge.k)
    }

    fn bridge_load(&self, t: f64) -> Result<DVector<f64>> {
        let mut p = self.bridge.p.clone();
        if self.add_static_axle_load {
            let snap = constraint_matrix(&self.bridge, self.wheel_position(t))?;
            let weight = self.params.total_mass() * self.params.g;
            p.axpy(-weight, &snap.l.row(1).transpose(), 1.0);
        }
        Ok(p)
    }

    fn constraint(&self, t: f64) -> Result<ConstraintEval> {
        let snap = self.snapshot(t)?;
        Ok(ConstraintEval {
            g_t: self.g_t.clone(),
            l: snap.l,
            l_dot: snap.l_dot,
            l_ddot: snap.l_ddot,
            offset: [DVector::zeros(3), DVector::zeros(3), DVector::zeros(3)],
        })
    }

    fn initial_bridge_displacement(&self) -> Result<DVector<f64>> {
        self.bridge.static_solution(&self.bridge_load(0.0)?)
    }
}

/// The vehicle on a rigid vertical cosine profile along a straight track.
#[derive(Clone, Debug)]
pub struct RigidProfileModel {
    pub params: VehicleParams,
    pub profile: CosineProfile,
    empty: DMatrix<f64>,
    g_t: DMatrix<f64>,
}

impl RigidProfileModel {
    pub fn new(params: VehicleParams, profile: CosineProfile) -> Self {
        Self { params, profile, empty: DMatrix::zeros(0, 0), g_t: wheel_selection() }
    }

    fn frame(&self) -> FrameKinematics {
        let mut fk = FrameKinematics::identity();
        fk.origin_vel = nalgebra::Vector3::x() * self.params.v;
        fk
    }
}

impl DaeModel for RigidProfileModel {
    fn sizes(&self) -> (usize, usize, usize) {
        (4, 0, 3)
    }

    fn vehicle(&self, _t: f64) -> Result<VehicleBlock> {
        let sys = vehicle_matrices(&self.params, &self.frame(), &Matrix3::identity());
        Ok((to_dynamic4(&sys.m), to_dynamic4(&sys.c), to_dynamic4(&sys.k), DVector::from_column_slice(sys.p.as_slice())))
    }

    fn bridge(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) {
        (&self.empty, &self.empty, &self.empty)
    }

    fn bridge_load(&self, _t: f64) -> Result<DVector<f64>> {
        Ok(DVector::zeros(0))
    }

    fn constraint(&self, t: f64) -> Result<ConstraintEval> {
        let z = self.profile.at_time(t, self.params.v);
        let offset = std::array::from_fn(|k| DVector::from_vec(vec![0.0, z[k], 0.0]));
        Ok(ConstraintEval {
            g_t: self.g_t.clone(),
            l: DMatrix::zeros(3, 0),
            l_dot: DMatrix::zeros(3, 0),
            l_ddot: DMatrix::zeros(3, 0),
            offset,
        })
    }

    fn initial_bridge_displacement(&self) -> Result<DVector<f64>> {
        Ok(DVector::zeros(0))
    }
}

/// Residuals of the coupled equations at time `t`:
/// `(M_t ü_t + C_t u̇_t + K_t u_t + Gᵀλ − P_t, M_b ü_b + … + Lᵀλ − P_b, gap)`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_residual(
    model: &dyn DaeModel,
    t: f64,
    u_t: &DVector<f64>,
    v_t: &DVector<f64>,
    a_t: &DVector<f64>,
    u_b: &DVector<f64>,
    v_b: &DVector<f64>,
    a_b: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let (mt, ct, kt, pt) = model.vehicle(t)?;
    let (mb, cb, kb) = model.bridge();
    let pb = model.bridge_load(t)?;
    let ce = model.constraint(t)?;
    let rt = &mt * a_t + &ct * v_t + &kt * u_t + ce.g_t.transpose() * lambda - pt;
    let rb = mb * a_b + cb * v_b + kb * u_b + ce.l.transpose() * lambda - pb;
    let gap = ce.displacement_gap(u_t, u_b);
    Ok((rt, rb, gap))
}
