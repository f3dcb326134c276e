//! Time stepping of the coupled vehicle–bridge DAE.
//!
//! All three strategies share one linear block solve per step. The bridge
//! block of the effective matrix is constant and factorised once; the
//! vehicle block (4×4) and the constraint rows change every step and enter
//! through a small Schur complement in the multipliers.
//!
//! * [`Strategy::IndexThree`]: generalized-α on the displacement-level
//!   constraint, enforced at `t_{n+1}`.
//! * [`Strategy::AccelerationConstraint`]: the algebraic row is the second
//!   time derivative of the constraint, so displacements drift.
//! * [`Strategy::Projected`]: the index-3 step followed by projection of the
//!   wheel velocities and accelerations onto the constraint manifold.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::coupling::{ConstraintEval, DaeModel, RigidProfileModel};
use crate::error::{Error, Result};
use crate::path::CosineProfile;
use crate::vehicle::VehicleParams;

/// Default bound on the condition number of the multiplier system.
pub const CONDITION_LIMIT: f64 = 1e14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[default]
    #[serde(rename = "A", alias = "a")]
    IndexThree,
    #[serde(rename = "B", alias = "b")]
    AccelerationConstraint,
    #[serde(rename = "C", alias = "c")]
    Projected,
}

/// Generalized-α coefficients. Newmark (trapezoidal) when both α vanish.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchemeParams {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `None` for plain Newmark.
    pub rho_inf: Option<f64>,
    pub dt: f64,
}

impl SchemeParams {
    pub fn is_newmark(&self) -> bool {
        self.alpha_m == 0.0 && self.alpha_f == 0.0
    }
}

/// Chung–Hulbert parameters for spectral radius `rho_inf`, or Newmark
/// `(0, 0, ¼, ½)` for `None`.
pub fn scheme_params(rho_inf: Option<f64>, dt: f64) -> Result<SchemeParams> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let Some(rho) = rho_inf else {
        return Ok(SchemeParams { alpha_m: 0.0, alpha_f: 0.0, beta: 0.25, gamma: 0.5, rho_inf: None, dt });
    };
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho_inf must lie in [0, 1], got {rho}")));
    }
    let alpha_m = (2.0 * rho - 1.0) / (rho + 1.0);
    let alpha_f = rho / (rho + 1.0);
    let gamma = 0.5 - alpha_m + alpha_f;
    let beta = 0.25 * (1.0 - alpha_m + alpha_f).powi(2);
    Ok(SchemeParams { alpha_m, alpha_f, beta, gamma, rho_inf: Some(rho), dt })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintLevel {
    Displacement,
    Velocity,
    Acceleration,
}

/// Full coupled state at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub u_t: DVector<f64>,
    pub v_t: DVector<f64>,
    pub a_t: DVector<f64>,
    pub u_b: DVector<f64>,
    pub v_b: DVector<f64>,
    pub a_b: DVector<f64>,
    /// Multipliers from the last step (zero at the initial instant).
    pub lambda: DVector<f64>,
}

impl CoupledState {
    pub fn zeros(n_t: usize, n_b: usize, n_c: usize) -> Self {
        let z = DVector::zeros;
        Self { t: 0.0, u_t: z(n_t), v_t: z(n_t), a_t: z(n_t), u_b: z(n_b), v_b: z(n_b), a_b: z(n_b), lambda: z(n_c) }
    }
}

/// Constraint residuals at the three levels, absolute (`∞`-norm) and
/// relative to the largest term entering each gap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    pub absolute: [f64; 3],
    pub relative: [f64; 3],
}

fn relative(gap: &DVector<f64>, terms: &[DVector<f64>]) -> f64 {
    let g = gap.amax();
    if g == 0.0 {
        return 0.0;
    }
    let scale = terms.iter().map(|v| v.amax()).fold(0.0, f64::max);
    g / (scale + f64::MIN_POSITIVE)
}

/// Residuals of `state` against the constraint evaluated at `state.t`.
pub fn constraint_residuals(ce: &ConstraintEval, s: &CoupledState) -> ConstraintResiduals {
    if ce.n_c() == 0 {
        return ConstraintResiduals::default();
    }
    let d = ce.displacement_gap(&s.u_t, &s.u_b);
    let v = ce.velocity_gap(&s.u_b, &s.v_t, &s.v_b);
    let a = ce.acceleration_gap(&s.u_b, &s.v_b, &s.a_t, &s.a_b);
    // scales include the state itself so round-off on a vanishing gap stays small
    let rel_d = relative(&d, &[&ce.g_t * &s.u_t, &ce.l * &s.u_b, ce.offset[0].clone(), s.u_t.clone(), s.u_b.clone()]);
    let rel_v = relative(
        &v,
        &[&ce.g_t * &s.v_t, &ce.l_dot * &s.u_b, &ce.l * &s.v_b, ce.offset[1].clone(), s.v_t.clone(), s.v_b.clone()],
    );
    let rel_a = relative(
        &a,
        &[
            &ce.g_t * &s.a_t,
            &ce.l_ddot * &s.u_b,
            &ce.l_dot * &s.v_b * 2.0,
            &ce.l * &s.a_b,
            ce.offset[2].clone(),
            s.a_t.clone(),
            s.a_b.clone(),
        ],
    );
    ConstraintResiduals { absolute: [d.amax(), v.amax(), a.amax()], relative: [rel_d, rel_v, rel_a] }
}

/// Overwrite the wheel DOFs (the columns where `G` is `−I`) so that the
/// chosen constraint level holds exactly. Bridge states are untouched.
pub fn project_constraints(ce: &ConstraintEval, state: &CoupledState, level: ConstraintLevel) -> Result<CoupledState> {
    let nc = ce.n_c();
    let mut out = state.clone();
    if nc == 0 || ce.g_t.ncols() < nc {
        return Ok(out);
    }
    // gap with the wheel entries removed, then solve the wheel block for them
    let mut cleared = state.clone();
    for v in [&mut cleared.u_t, &mut cleared.v_t, &mut cleared.a_t] {
        v.rows_mut(0, nc).fill(0.0);
    }
    let rest = match level {
        ConstraintLevel::Displacement => ce.displacement_gap(&cleared.u_t, &state.u_b),
        ConstraintLevel::Velocity => ce.velocity_gap(&state.u_b, &cleared.v_t, &state.v_b),
        ConstraintLevel::Acceleration => ce.acceleration_gap(&state.u_b, &state.v_b, &cleared.a_t, &state.a_b),
    };
    let gw = ce.g_t.columns(0, nc).into_owned();
    let wheel = gw
        .lu()
        .solve(&(-rest))
        .ok_or_else(|| Error::InvalidArgument("wheel block of the constraint is singular".into()))?;
    let target = match level {
        ConstraintLevel::Displacement => &mut out.u_t,
        ConstraintLevel::Velocity => &mut out.v_t,
        ConstraintLevel::Acceleration => &mut out.a_t,
    };
    target.rows_mut(0, nc).copy_from(&wheel);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub strategy: Strategy,
    /// `None` selects Newmark.
    pub rho_inf: Option<f64>,
    pub dt: f64,
    pub t0_correction: bool,
    /// Displacement projection every `k` steps.
    pub displacement_repair_every: Option<usize>,
    pub condition_limit: f64,
}

impl IntegratorConfig {
    pub fn new(strategy: Strategy, rho_inf: Option<f64>, dt: f64) -> Self {
        Self { strategy, rho_inf, dt, t0_correction: true, displacement_repair_every: None, condition_limit: CONDITION_LIMIT }
    }
}

/// Per-step diagnostics handed to run observers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepInfo {
    pub step: usize,
    /// Condition number of the multiplier system (1 without constraints).
    pub condition: f64,
    pub residuals: ConstraintResiduals,
    pub repaired: bool,
}

#[derive(Clone, Copy)]
enum Rows {
    Displacement,
    Acceleration,
}

pub struct Integrator<'a> {
    model: &'a dyn DaeModel,
    config: IntegratorConfig,
    scheme: SchemeParams,
    c0: f64,
    c1: f64,
    sizes: (usize, usize, usize),
    sb: Option<Cholesky<f64, Dyn>>,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a dyn DaeModel, config: IntegratorConfig) -> Result<Self> {
        let scheme = scheme_params(config.rho_inf, config.dt)?;
        let dt = scheme.dt;
        let c0 = 1.0 / (scheme.beta * dt * dt);
        let c1 = scheme.gamma / (scheme.beta * dt);
        let sizes = model.sizes();
        let sb = if sizes.1 > 0 {
            let (m, c, k) = model.bridge();
            let s = m * ((1.0 - scheme.alpha_m) * c0) + c * ((1.0 - scheme.alpha_f) * c1) + k * (1.0 - scheme.alpha_f);
            Some(Cholesky::new(s).ok_or(Error::SingularSystem { t: 0.0, condition: f64::INFINITY })?)
        } else {
            None
        };
        Ok(Self { model, config, scheme, c0, c1, sizes, sb })
    }

    pub fn scheme(&self) -> &SchemeParams {
        &self.scheme
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    pub fn model(&self) -> &dyn DaeModel {
        self.model
    }

    /// Vehicle at rest, bridge in static equilibrium, optionally with the
    /// wheel rates projected onto the constraint.
    pub fn initial_state(&self) -> Result<CoupledState> {
        let (nt, nb, nc) = self.sizes;
        let mut s = CoupledState::zeros(nt, nb, nc);
        s.u_b = self.model.initial_bridge_displacement()?;
        if self.config.t0_correction {
            let ce = self.model.constraint(0.0)?;
            s = project_constraints(&ce, &s, ConstraintLevel::Velocity)?;
            s = project_constraints(&ce, &s, ConstraintLevel::Acceleration)?;
        }
        Ok(s)
    }

    /// Advance one step with the configured strategy. Returns the new state
    /// and the condition number of the multiplier system.
    pub fn step(&self, state: &CoupledState) -> Result<(CoupledState, f64)> {
        match self.config.strategy {
            Strategy::IndexThree => self.solve(state, Rows::Displacement),
            Strategy::AccelerationConstraint => self.solve(state, Rows::Acceleration),
            Strategy::Projected => {
                let (next, cond) = self.solve(state, Rows::Displacement)?;
                let ce = self.model.constraint(next.t)?;
                let next = project_constraints(&ce, &next, ConstraintLevel::Velocity)?;
                Ok((project_constraints(&ce, &next, ConstraintLevel::Acceleration)?, cond))
            }
        }
    }

    fn predictors(&self, v: &DVector<f64>, a: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (b, g, dt) = (self.scheme.beta, self.scheme.gamma, self.scheme.dt);
        let a_hat = v * (-1.0 / (b * dt)) - a * (0.5 / b - 1.0);
        let v_hat = v * (1.0 - g / b) + a * (dt * (1.0 - 0.5 * g / b));
        (a_hat, v_hat)
    }

    fn solve(&self, s: &CoupledState, rows: Rows) -> Result<(CoupledState, f64)> {
        let (nt, nb, nc) = self.sizes;
        let SchemeParams { alpha_m: am, alpha_f: af, dt, .. } = self.scheme;
        let (c0, c1) = (self.c0, self.c1);
        let t1 = s.t + dt;
        let tf = s.t + (1.0 - af) * dt;

        let (at_hat, vt_hat) = self.predictors(&s.v_t, &s.a_t);
        let (ab_hat, vb_hat) = self.predictors(&s.v_b, &s.a_b);

        // vehicle block
        let (mt, ct, kt, pt) = self.model.vehicle(tf)?;
        let rt = pt - &mt * (&at_hat * (1.0 - am) + &s.a_t * am) - &ct * (&vt_hat * (1.0 - af) + &s.v_t * af) - &kt * &s.u_t;
        let st_lu = (mt * ((1.0 - am) * c0) + ct * ((1.0 - af) * c1) + kt * (1.0 - af)).lu();
        let solve_t = |x: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            if nt == 0 {
                return Ok(DMatrix::zeros(0, x.ncols()));
            }
            st_lu.solve(x).ok_or(Error::SingularSystem { t: t1, condition: f64::INFINITY })
        };

        // bridge block
        let (mb, cb, kb) = self.model.bridge();
        let pb = self.model.bridge_load(tf)?;
        let rb = pb - mb * (&ab_hat * (1.0 - am) + &s.a_b * am) - cb * (&vb_hat * (1.0 - af) + &s.v_b * af) - kb * &s.u_b;
        let solve_b = |x: &DMatrix<f64>| -> DMatrix<f64> {
            match &self.sb {
                Some(ch) => ch.solve(x),
                None => DMatrix::zeros(0, x.ncols()),
            }
        };

        let zt = solve_t(&DMatrix::from_column_slice(nt, 1, rt.as_slice()))?.column(0).into_owned();
        let zb = solve_b(&DMatrix::from_column_slice(nb, 1, rb.as_slice())).column(0).into_owned();

        let (du_t, du_b, lambda, condition) = if nc == 0 {
            (zt, zb, DVector::zeros(0), 1.0)
        } else {
            let ce = self.model.constraint(t1)?;
            // λ lives at the α_f point, so its force acts through the rows at t_f
            let force_rows = if af == 0.0 { None } else { Some(self.model.constraint(tf)?) };
            let fe = force_rows.as_ref().unwrap_or(&ce);
            let yt = solve_t(&fe.g_t.transpose())?;
            let yb = solve_b(&fe.l.transpose());
            let (row_b, h) = match rows {
                Rows::Displacement => (ce.l.clone(), -(&ce.g_t * &s.u_t + &ce.l * &s.u_b + &ce.offset[0])),
                Rows::Acceleration => {
                    let row = &ce.l + &ce.l_dot * (2.0 * c1 / c0) + &ce.l_ddot * (1.0 / c0);
                    let rhs = &ce.g_t * &at_hat + &ce.l_ddot * &s.u_b + &ce.l_dot * &vb_hat * 2.0 + &ce.l * &ab_hat + &ce.offset[2];
                    (row, -rhs / c0)
                }
            };
            let z = &ce.g_t * &yt + &row_b * &yb;
            let rhs = &ce.g_t * &zt + &row_b * &zb - h;
            let condition = condition_number(&z);
            if !(condition.is_finite() && condition <= self.config.condition_limit) {
                return Err(Error::SingularSystem { t: t1, condition });
            }
            let lambda = z.lu().solve(&rhs).ok_or(Error::SingularSystem { t: t1, condition })?;
            (zt - &yt * &lambda, zb - &yb * &lambda, lambda, condition)
        };

        let next = CoupledState {
            t: t1,
            a_t: &du_t * c0 + at_hat,
            v_t: &du_t * c1 + vt_hat,
            u_t: &s.u_t + du_t,
            a_b: &du_b * c0 + ab_hat,
            v_b: &du_b * c1 + vb_hat,
            u_b: &s.u_b + du_b,
            lambda,
        };
        Ok((next, condition))
    }

    /// Number of steps covering `horizon`.
    pub fn step_count(&self, horizon: f64) -> Result<usize> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        Ok((horizon / self.scheme.dt + 1e-9).floor() as usize)
    }

    /// Integrate from the initial state over `horizon`, calling `observe` for
    /// the initial state and after every step.
    pub fn run<F>(&self, horizon: f64, mut observe: F) -> Result<CoupledState>
    where
        F: FnMut(&CoupledState, &StepInfo) -> Result<()>,
    {
        let n = self.step_count(horizon)?;
        let mut state = self.initial_state()?;
        let ce = self.model.constraint(state.t)?;
        observe(&state, &StepInfo { step: 0, condition: 1.0, residuals: constraint_residuals(&ce, &state), repaired: false })?;
        for k in 1..=n {
            let (mut next, condition) = self.step(&state)?;
            // keep the time grid exact
            next.t = k as f64 * self.scheme.dt;
            let ce = self.model.constraint(next.t)?;
            let repaired = matches!(self.config.displacement_repair_every, Some(every) if every > 0 && k % every == 0);
            if repaired {
                next = project_constraints(&ce, &next, ConstraintLevel::Displacement)?;
            }
            observe(&next, &StepInfo { step: k, condition, residuals: constraint_residuals(&ce, &next), repaired })?;
            state = next;
        }
        Ok(state)
    }
}

/// Ratio of extreme singular values; infinite for singular or non-finite input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Vehicle riding a rigid vertical cosine profile. Returns every state
/// including the initial one.
pub fn run_rigid_profile(params: &VehicleParams, profile: &CosineProfile, config: IntegratorConfig, horizon: f64) -> Result<Vec<CoupledState>> {
    let model = RigidProfileModel::new(params.clone(), *profile);
    let integrator = Integrator::new(&model, config)?;
    let mut states = Vec::new();
    integrator.run(horizon, |s, _| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok(states)
}
