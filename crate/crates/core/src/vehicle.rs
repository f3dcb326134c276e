//! Four-DOF corotational vehicle: a wheel mass and a car body on a
//! suspension spring, described in the moving Frenet frame of the track.
//!
//! Generalized coordinates: `u1` transverse (along `n`), `u2` wheel vertical
//! (along `b`), `u3` roll, `u4` car vertical.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Matrix4x3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{hat, FrameKinematics};

/// Vehicle parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Wheel mass (kg).
    pub m_w: f64,
    /// Car body mass (kg).
    pub m_c: f64,
    /// Wheel roll inertia (kg·m²).
    pub i_w: f64,
    /// Car body roll inertia (kg·m²).
    pub i_c: f64,
    /// Suspension stiffness (N/m).
    pub k_s: f64,
    /// Height of the car centre of gravity above the wheel (m).
    pub l_0: f64,
    pub g: f64,
    /// Constant running speed (m/s).
    pub v: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m_w: 7120.0,
            m_c: 41750.0,
            i_w: 1.14e3,
            i_c: 23.2e3,
            k_s: 865.6e3,
            l_0: 1.37,
            g: 9.81,
            v: 100.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m_w", self.m_w),
            ("m_c", self.m_c),
            ("i_w", self.i_w),
            ("i_c", self.i_c),
            ("k_s", self.k_s),
            ("l_0", self.l_0),
            ("g", self.g),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Scenario {
                    key: format!("vehicle.{name}"),
                    message: format!("must be positive and finite, got {value}"),
                });
            }
        }
        if !(self.v >= 0.0) || !self.v.is_finite() {
            return Err(Error::Scenario { key: "vehicle.v".into(), message: format!("must be non-negative, got {}", self.v) });
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.m_w + self.m_c
    }

    fn car_offset(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.l_0)
    }
}

/// Wheel selection matrix: frame-local wheel offset `T^w u`.
pub fn t_wheel() -> Matrix3x4<f64> {
    Matrix3x4::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

/// Car selection matrix: frame-local car offset `T^c u` (roll lever `l_0`).
pub fn t_car(l_0: f64) -> Matrix3x4<f64> {
    Matrix3x4::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -l_0, 0.0, 0.0, 0.0, 0.0, 1.0)
}

/// Wheel constraint matrix `L^tr` (4×3). The constraint row acting on the
/// vehicle coordinates is its transpose.
pub fn l_tr() -> Matrix4x3<f64> {
    Matrix4x3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0)
}

/// Vehicle matrices at one instant: `M ü + C u̇ + K u + L^tr λ = P`.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleSystem {
    pub m: Matrix4<f64>,
    pub c: Matrix4<f64>,
    pub k: Matrix4<f64>,
    pub p: Vector4<f64>,
}

/// Contact forces on the wheel: transverse, vertical (N) and roll (N·m).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintForces {
    pub lambda_y: f64,
    pub lambda_z: f64,
    pub lambda_thx: f64,
}

impl From<Vector3<f64>> for ConstraintForces {
    fn from(v: Vector3<f64>) -> Self {
        Self { lambda_y: v.x, lambda_z: v.y, lambda_thx: v.z }
    }
}

/// Constant mass matrix.
pub fn mass_matrix(p: &VehicleParams) -> Matrix4<f64> {
    let (mw, mc, l0) = (p.m_w, p.m_c, p.l_0);
    Matrix4::new(
        mw + mc, 0.0, -mc * l0, 0.0,
        0.0, mw, 0.0, 0.0,
        -mc * l0, 0.0, mc * l0 * l0 + p.i_w + p.i_c, 0.0,
        0.0, 0.0, 0.0, mc,
    )
}

/// Snapshot of the time-varying matrices. `initial_rotation` is the frame
/// orientation at t = 0, against which gravity heights are measured.
pub fn vehicle_matrices(p: &VehicleParams, fk: &FrameKinematics, initial_rotation: &Matrix3<f64>) -> VehicleSystem {
    let (mw, mc, l0, ks) = (p.m_w, p.m_c, p.l_0, p.k_s);
    let [w1, w2, w3] = [fk.omega.x, fk.omega.y, fk.omega.z];
    let wd1 = fk.omega_dot.x;
    let s13 = w1 * w1 + w3 * w3;
    let s12 = w1 * w1 + w2 * w2;
    let minus = wd1 - w2 * w3;
    let plus = wd1 + w2 * w3;

    let c = Matrix4::new(
        0.0, -2.0 * mw * w1, 0.0, -2.0 * mc * w1,
        2.0 * mw * w1, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 2.0 * mc * w1 * l0,
        2.0 * mc * w1, 0.0, -2.0 * mc * w1 * l0, 0.0,
    );
    let k = Matrix4::new(
        -(mw + mc) * s13, -mw * minus, mc * s13 * l0, -mc * minus,
        mw * plus, -mw * s12 + ks, 0.0, -ks,
        mc * s13 * l0, 0.0, -mc * s13 * l0 * l0, mc * minus * l0,
        mc * plus, -ks, -mc * plus * l0, -mc * s12 + ks,
    );

    let tw = t_wheel();
    let tc = t_car(l0);
    let rt = fk.rotation.transpose();
    let offset = p.car_offset();
    let what = hat(&fk.omega);
    let wdhat = hat(&fk.omega_dot);
    let up = Vector3::z();
    let transport = (tw.transpose() * mw + tc.transpose() * mc) * (rt * fk.origin_acc);
    let car_inertial = tc.transpose() * (wdhat * offset + what * what * offset) * mc;
    let gravity = (tw.transpose() * (mw * p.g) + tc.transpose() * (mc * p.g)) * ((rt - initial_rotation.transpose()) * up);
    let load = -transport - car_inertial - gravity;

    VehicleSystem { m: mass_matrix(p), c, k, p: load }
}

/// Global wheel position `x^F + R T^w u`.
pub fn wheel_position(fk: &FrameKinematics, u: &Vector4<f64>) -> Vector3<f64> {
    fk.origin + fk.rotation * (t_wheel() * u)
}

/// Global car position `x^F + R (T^c u + (0, 0, l_0))`.
pub fn car_position(p: &VehicleParams, fk: &FrameKinematics, u: &Vector4<f64>) -> Vector3<f64> {
    fk.origin + fk.rotation * (t_car(p.l_0) * u + p.car_offset())
}

pub fn wheel_velocity(fk: &FrameKinematics, u: &Vector4<f64>, du: &Vector4<f64>) -> Vector3<f64> {
    let tw = t_wheel();
    fk.origin_vel + fk.rotation * (hat(&fk.omega) * (tw * u) + tw * du)
}

pub fn car_velocity(p: &VehicleParams, fk: &FrameKinematics, u: &Vector4<f64>, du: &Vector4<f64>) -> Vector3<f64> {
    let tc = t_car(p.l_0);
    let what = hat(&fk.omega);
    fk.origin_vel + fk.rotation * (what * (tc * u) + tc * du + what * p.car_offset())
}

/// Kinetic and potential energy `(T, V)`. Gravity heights are measured from
/// the vehicle's configuration on the `initial` frame with `u = 0`.
pub fn vehicle_energy(
    p: &VehicleParams,
    fk: &FrameKinematics,
    initial: &FrameKinematics,
    u: &Vector4<f64>,
    du: &Vector4<f64>,
) -> (f64, f64) {
    let vw = wheel_velocity(fk, u, du);
    let vc = car_velocity(p, fk, u, du);
    let kinetic = 0.5 * p.m_w * vw.norm_squared() + 0.5 * p.m_c * vc.norm_squared() + 0.5 * (p.i_w + p.i_c) * du[2] * du[2];
    let zero = Vector4::zeros();
    let hw = wheel_position(fk, u).z - wheel_position(initial, &zero).z;
    let hc = car_position(p, fk, u).z - car_position(p, initial, &zero).z;
    let stretch = u[3] - u[1];
    let potential = 0.5 * p.k_s * stretch * stretch + p.m_w * p.g * hw + p.m_c * p.g * hc;
    (kinetic, potential)
}
