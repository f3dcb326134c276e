//! Scenarios, simulation runs, CSV output and diagnostics.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::beam::{BeamSection, BoundaryConditions, BridgeKind, BridgeOptions, BridgeSystem, EndFixity, ShearTreatment, UB, UN};
use crate::coupling::{DaeModel, RigidProfileModel, VehicleBridgeModel};
use crate::error::{Error, Result};
use crate::integrators::{ConstraintResiduals, CoupledState, Integrator, IntegratorConfig, StepInfo, Strategy, CONDITION_LIMIT};
use crate::path::{CosineProfile, Path, PlanSpec};
use crate::splines::Side;
use crate::vehicle::VehicleParams;

/// Vertical deck acceleration limit (m/s²).
pub const DECK_ACCELERATION_LIMIT: f64 = 3.5;
/// Car body vertical acceleration limit (m/s²).
pub const CAR_ACCELERATION_LIMIT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Newmark,
}

/// `rho_inf` in a scenario: a spectral radius or the string `"newmark"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeChoice {
    RhoInf(f64),
    Named(SchemeName),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportConfig {
    pub ends: EndFixity,
    /// Interior support stations (m); `None` puts one at every span joint.
    pub interior: Option<Vec<f64>>,
}

impl Default for SupportConfig {
    fn default() -> Self {
        Self { ends: EndFixity::Fixed, interior: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayleighConfig {
    pub a0: f64,
    pub a1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeConfig {
    pub kind: BridgeKind,
    /// Spline degree of the path and of the NURBS bridge.
    pub degree: usize,
    pub elements_per_span: usize,
    pub section: BeamSection,
    pub supports: SupportConfig,
    pub rayleigh: RayleighConfig,
    pub shear: ShearTreatment,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            kind: BridgeKind::Nurbs,
            degree: 3,
            elements_per_span: 10,
            section: BeamSection::default(),
            supports: SupportConfig::default(),
            rayleigh: RayleighConfig::default(),
            shear: ShearTreatment::Projected,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: Strategy,
    /// Defaults to 0.9 for strategy A and Newmark otherwise.
    pub rho_inf: Option<SchemeChoice>,
    pub dt: f64,
    /// Defaults to the crossing time.
    pub horizon: Option<f64>,
    pub t0_correction: bool,
    pub displacement_repair_every: Option<usize>,
    pub condition_limit: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::IndexThree,
            rho_inf: None,
            dt: 1e-3,
            horizon: None,
            t0_correction: true,
            displacement_repair_every: None,
            condition_limit: CONDITION_LIMIT,
        }
    }
}

impl RunConfig {
    /// Effective spectral radius, `None` for Newmark.
    pub fn rho_inf(&self) -> Option<f64> {
        match self.rho_inf {
            Some(SchemeChoice::RhoInf(r)) => Some(r),
            Some(SchemeChoice::Named(SchemeName::Newmark)) => None,
            None => match self.strategy {
                Strategy::IndexThree => Some(0.9),
                _ => None,
            },
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            strategy: self.strategy,
            rho_inf: self.rho_inf(),
            dt: self.dt,
            t0_correction: self.t0_correction,
            displacement_repair_every: self.displacement_repair_every,
            condition_limit: self.condition_limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub name: String,
    /// Arclength station (m).
    pub s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub add_static_axle_load: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub plan: PlanSpec,
    pub bridge: BridgeConfig,
    pub vehicle: VehicleParams,
    pub run: RunConfig,
    /// Empty selects the midpoint of the central span.
    pub probes: Vec<Probe>,
    pub flags: Flags,
    /// Replace the bridge by a rigid vertical cosine profile on a straight track.
    pub rigid_profile: Option<CosineProfile>,
}

fn scenario_err(key: &str, message: impl Into<String>) -> Error {
    Error::Scenario { key: key.into(), message: message.into() }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            Error::Scenario { key, message: inner.to_string() }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        Self::from_json(&value.to_string())
    }

    /// Probes actually used, filling in the default.
    pub fn effective_probes(&self) -> Vec<Probe> {
        if !self.probes.is_empty() {
            return self.probes.clone();
        }
        let joints = self.plan.joints();
        let mid = (joints.len() - 1) / 2;
        vec![Probe { name: "midspan".into(), s: 0.5 * (joints[mid] + joints[mid + 1]) }]
    }

    pub fn path_length(&self) -> f64 {
        self.plan.total_length()
    }

    /// Horizon actually used.
    pub fn horizon(&self) -> f64 {
        self.run.horizon.unwrap_or_else(|| self.path_length() / self.vehicle.v)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.vehicle.validate()?;
        self.bridge.section.validate()?;
        let b = &self.bridge;
        if b.degree < 1 {
            return Err(scenario_err("bridge.degree", "must be at least 1"));
        }
        if b.elements_per_span < 1 {
            return Err(scenario_err("bridge.elements_per_span", "must be at least 1"));
        }
        if !(b.rayleigh.a0 >= 0.0 && b.rayleigh.a1 >= 0.0) {
            return Err(scenario_err("bridge.rayleigh", "coefficients must be non-negative"));
        }
        let length = self.path_length();
        if let Some(interior) = &b.supports.interior {
            for (i, &s) in interior.iter().enumerate() {
                if !(s > 0.0 && s < length) {
                    return Err(scenario_err(&format!("bridge.supports.interior[{i}]"), format!("{s} is not strictly inside the path (0, {length})")));
                }
            }
        }
        let r = &self.run;
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(scenario_err("run.dt", "must be positive"));
        }
        if let Some(SchemeChoice::RhoInf(rho)) = r.rho_inf {
            if !(0.0..=1.0).contains(&rho) {
                return Err(scenario_err("run.rho_inf", format!("{rho} is outside [0, 1]")));
            }
        }
        if !(r.condition_limit > 1.0) {
            return Err(scenario_err("run.condition_limit", "must exceed 1"));
        }
        if r.displacement_repair_every == Some(0) {
            return Err(scenario_err("run.displacement_repair_every", "must be at least 1"));
        }
        let horizon = self.horizon();
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(scenario_err("run.horizon", "must be positive and finite (set it explicitly when vehicle.v is 0)"));
        }
        if let Some(profile) = &self.rigid_profile {
            CosineProfile::new(profile.amplitude, profile.wavelength).map_err(|e| scenario_err("rigid_profile", e.to_string()))?;
        } else {
            if self.vehicle.v * horizon > length * (1.0 + 1e-9) {
                return Err(scenario_err("run.horizon", format!("{horizon} s carries the wheel past the end of the {length} m path")));
            }
            for (i, p) in self.probes.iter().enumerate() {
                if !(p.s >= 0.0 && p.s <= length) {
                    return Err(scenario_err(&format!("probes[{i}].s"), format!("{} is off the {length} m path", p.s)));
                }
                if p.name.is_empty() || p.name.contains(',') {
                    return Err(scenario_err(&format!("probes[{i}].name"), "must be non-empty and free of commas"));
                }
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: &FsPath) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text)
}

/// Set a dotted key (`run.dt`) in a JSON scenario. The raw value is read as
/// JSON when it parses and as a string otherwise.
pub fn apply_override(value: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(scenario_err(key, "empty path segment"));
        }
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return Err(scenario_err(key, format!("`{}` is not an object", parts[..i].join("."))));
            }
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

pub fn build_bridge(scenario: &Scenario) -> Result<BridgeSystem> {
    let b = &scenario.bridge;
    let path = Path::from_plan(&scenario.plan, b.elements_per_span, b.degree)?;
    let interior = match &b.supports.interior {
        Some(list) => list.clone(),
        None => {
            let joints = scenario.plan.joints();
            joints[1..joints.len() - 1].to_vec()
        }
    };
    let options = BridgeOptions {
        kind: b.kind,
        section: b.section.clone(),
        bc: BoundaryConditions { ends: b.supports.ends, interior_supports: interior },
        rayleigh: (b.rayleigh.a0, b.rayleigh.a1),
        shear: b.shear,
        elements_per_span: b.elements_per_span,
    };
    BridgeSystem::assemble(&path, &options)
}

/// One sampled instant of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub u_t: [f64; 4],
    pub v_t: [f64; 4],
    pub a_t: [f64; 4],
    /// `(λ_y, λ_z, λ_θx)`.
    pub lambda: [f64; 3],
    /// Per probe: `(υ_n, υ_b, a_n, a_b)`.
    pub probes: Vec<[f64; 4]>,
    /// Signed displacement gap `G u_t + L u_b + g`.
    pub gap: [f64; 3],
    pub residuals: ConstraintResiduals,
    pub condition: f64,
    pub repaired: bool,
}

/// Uniformly sampled history, initial state included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeHistory {
    pub dt: f64,
    pub probe_names: Vec<String>,
    pub records: Vec<Record>,
}

fn four(v: &nalgebra::DVector<f64>) -> [f64; 4] {
    std::array::from_fn(|i| v.get(i).copied().unwrap_or(0.0))
}

fn three(v: &nalgebra::DVector<f64>) -> [f64; 3] {
    std::array::from_fn(|i| v.get(i).copied().unwrap_or(0.0))
}

impl TimeHistory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn series(&self, f: impl Fn(&Record) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn probe_index(&self, name: &str) -> Option<usize> {
        self.probe_names.iter().position(|n| n == name)
    }
}

/// Reduced probe rows `(υ_n, υ_b)` for each probe.
type ProbeRows = Vec<[nalgebra::DVector<f64>; 2]>;

fn probe_rows(bridge: &BridgeSystem, probes: &[Probe]) -> Result<ProbeRows> {
    probes
        .iter()
        .map(|p| {
            let rows = bridge.field_rows(p.s, Side::Right, 0)?;
            Ok([bridge.reduce_row(&rows[0][UN]), bridge.reduce_row(&rows[0][UB])])
        })
        .collect()
}

fn record(model: &dyn DaeModel, rows: &ProbeRows, s: &CoupledState, info: &StepInfo) -> Result<Record> {
    let ce = model.constraint(s.t)?;
    let gap = if ce.n_c() > 0 { three(&ce.displacement_gap(&s.u_t, &s.u_b)) } else { [0.0; 3] };
    let probes = rows.iter().map(|[n, b]| [n.dot(&s.u_b), b.dot(&s.u_b), n.dot(&s.a_b), b.dot(&s.a_b)]).collect();
    Ok(Record {
        t: s.t,
        u_t: four(&s.u_t),
        v_t: four(&s.v_t),
        a_t: four(&s.a_t),
        lambda: three(&s.lambda),
        probes,
        gap,
        residuals: info.residuals,
        condition: info.condition,
        repaired: info.repaired,
    })
}

fn run_model(model: &dyn DaeModel, config: IntegratorConfig, horizon: f64, names: Vec<String>, rows: ProbeRows) -> Result<TimeHistory> {
    let integrator = Integrator::new(model, config)?;
    let mut records = Vec::with_capacity(integrator.step_count(horizon)? + 1);
    integrator.run(horizon, |s, info| {
        records.push(record(model, &rows, s, info)?);
        Ok(())
    })?;
    Ok(TimeHistory { dt: config.dt, probe_names: names, records })
}

/// Vehicle on a rigid cosine profile, recorded without probes.
pub fn rigid_profile_history(params: &VehicleParams, profile: &CosineProfile, config: IntegratorConfig, horizon: f64) -> Result<TimeHistory> {
    let model = RigidProfileModel::new(params.clone(), *profile);
    run_model(&model, config, horizon, Vec::new(), Vec::new())
}

/// Run a scenario from start to horizon.
pub fn run_simulation(scenario: &Scenario) -> Result<TimeHistory> {
    scenario.validate()?;
    let config = scenario.run.integrator_config();
    let horizon = scenario.horizon();
    if let Some(profile) = &scenario.rigid_profile {
        return rigid_profile_history(&scenario.vehicle, profile, config, horizon);
    }
    let bridge = build_bridge(scenario)?;
    let probes = scenario.effective_probes();
    let rows = probe_rows(&bridge, &probes)?;
    let names = probes.into_iter().map(|p| p.name).collect();
    let model = VehicleBridgeModel::new(scenario.vehicle.clone(), bridge, scenario.flags.add_static_axle_load)?;
    run_model(&model, config, horizon, names, rows)
}

/// CSV column names for a history.
pub fn csv_header(history: &TimeHistory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["ut", "vt", "at"] {
        h.extend((1..=4).map(|i| format!("{prefix}{i}")));
    }
    h.extend(["lam_y", "lam_z", "lam_thx"].map(String::from));
    for name in &history.probe_names {
        h.extend(["ub_n", "ub_b", "ab_n", "ab_b"].map(|c| format!("{name}:{c}")));
    }
    h
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_timehistory_to<W: std::io::Write>(history: &TimeHistory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(csv_header(history)).map_err(io)?;
    for r in &history.records {
        let mut row = vec![fmt(r.t)];
        row.extend(r.u_t.iter().chain(&r.v_t).chain(&r.a_t).chain(&r.lambda).map(|&x| fmt(x)));
        row.extend(r.probes.iter().flatten().map(|&x| fmt(x)));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timehistory(history: &TimeHistory, out: &FsPath) -> Result<()> {
    let file = std::fs::File::create(out)?;
    write_timehistory_to(history, std::io::BufWriter::new(file))
}

/// RMS of the second difference over `Δt²·RMS(signal)`.
pub fn oscillation_index(signal: &[f64], dt: f64) -> Result<f64> {
    if signal.len() < 8 {
        return Err(Error::InvalidArgument(format!("oscillation index needs at least 8 samples, got {}", signal.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("sample spacing must be positive, got {dt}")));
    }
    let rms = |it: &mut dyn Iterator<Item = f64>, n: usize| (it.map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let n2 = signal.len() - 2;
    let d2 = rms(&mut signal.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]), n2);
    let base = rms(&mut signal.iter().copied(), signal.len());
    Ok(d2 / (dt * dt * base + f64::MIN_POSITIVE))
}

/// Mean lateral contact force on a circular span against `m v²/R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CentripetalCheck {
    /// Arclength window of the circular span (m).
    pub window: (f64, f64),
    pub radius: f64,
    pub reference: f64,
    pub mean_lambda_y: f64,
    /// Relative to the reference, or absolute when the reference is zero.
    pub error: f64,
}

pub fn centripetal_check(history: &TimeHistory, scenario: &Scenario) -> Result<CentripetalCheck> {
    let windows = scenario.plan.arc_windows();
    let &(s0, s1, radius) = windows.first().ok_or_else(|| Error::InvalidArgument("the plan has no circular span".into()))?;
    let v = scenario.vehicle.v;
    let reference = scenario.vehicle.total_mass() * v * v / radius;
    let inside: Vec<f64> = history
        .records
        .iter()
        .filter(|r| {
            let s = v * r.t;
            s >= s0 && s <= s1
        })
        .map(|r| r.lambda[0])
        .collect();
    let mean = if inside.is_empty() { 0.0 } else { inside.iter().sum::<f64>() / inside.len() as f64 };
    let error = if reference != 0.0 { (mean - reference).abs() / reference.abs() } else { mean.abs() };
    Ok(CentripetalCheck { window: (s0, s1), radius, reference, mean_lambda_y: mean, error })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub displacement: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Displacement-constraint drift over the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftSummary {
    pub max_abs: f64,
    pub final_abs: f64,
    /// Oscillation index of the vertical gap.
    pub oscillation_index: f64,
    /// Log-log slope of the gap magnitude against time before the first
    /// repair, or `None` when the gap stays zero.
    pub growth_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdFlags {
    pub deck_limit: f64,
    pub deck_peak: f64,
    pub deck_exceeded: bool,
    pub car_limit: f64,
    pub car_peak: f64,
    pub car_exceeded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub steps: usize,
    pub dt: f64,
    pub oscillation_indices: BTreeMap<String, f64>,
    pub max_relative_residuals: ResidualSummary,
    pub max_condition: f64,
    pub drift: DriftSummary,
    pub centripetal: Option<CentripetalCheck>,
    pub thresholds: ThresholdFlags,
}

/// Slope of `log|y|` against `log t` by least squares over the samples with
/// `t > 0` and `y ≠ 0`.
pub fn growth_exponent(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(t, y)| **t > 0.0 && y.abs() > 0.0).map(|(t, y)| (t.ln(), y.abs().ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Named signals used in the report.
pub fn signals(history: &TimeHistory) -> BTreeMap<String, Vec<f64>> {
    let mut out = BTreeMap::new();
    out.insert("wheel_acc_n".into(), history.series(|r| r.a_t[0]));
    out.insert("wheel_acc_b".into(), history.series(|r| r.a_t[1]));
    out.insert("car_acc_b".into(), history.series(|r| r.a_t[1] + r.a_t[3]));
    out.insert("lam_y".into(), history.series(|r| r.lambda[0]));
    out.insert("lam_z".into(), history.series(|r| r.lambda[1]));
    out.insert("lam_thx".into(), history.series(|r| r.lambda[2]));
    out.insert("drift_b".into(), history.series(|r| r.gap[1]));
    for (i, name) in history.probe_names.iter().enumerate() {
        out.insert(format!("{name}:ub_b"), history.series(|r| r.probes[i][1]));
        out.insert(format!("{name}:ab_n"), history.series(|r| r.probes[i][2]));
        out.insert(format!("{name}:ab_b"), history.series(|r| r.probes[i][3]));
    }
    out
}

pub fn build_report(history: &TimeHistory, scenario: &Scenario) -> Result<DiagnosticReport> {
    let dt = history.dt;
    let sigs = signals(history);
    let mut oscillation_indices = BTreeMap::new();
    for (name, s) in &sigs {
        oscillation_indices.insert(name.clone(), oscillation_index(s, dt)?);
    }
    let max_rel = |k: usize| history.records.iter().map(|r| r.residuals.relative[k]).fold(0.0, f64::max);
    let gap_abs: Vec<f64> = history.series(|r| r.gap.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
    let first_repair = history.records.iter().position(|r| r.repaired).unwrap_or(history.records.len());
    let drift = DriftSummary {
        max_abs: gap_abs.iter().copied().fold(0.0, f64::max),
        final_abs: gap_abs.last().copied().unwrap_or(0.0),
        oscillation_index: oscillation_indices["drift_b"],
        growth_exponent: growth_exponent(&history.times()[..first_repair], &gap_abs[..first_repair]),
    };
    let centripetal = if scenario.rigid_profile.is_none() && !scenario.plan.arc_windows().is_empty() {
        Some(centripetal_check(history, scenario)?)
    } else {
        None
    };
    let deck_peak = history.records.iter().flat_map(|r| r.probes.iter().map(|p| p[3].abs())).fold(0.0, f64::max);
    let car_peak = sigs["car_acc_b"].iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    Ok(DiagnosticReport {
        steps: history.records.len().saturating_sub(1),
        dt,
        oscillation_indices,
        max_relative_residuals: ResidualSummary { displacement: max_rel(0), velocity: max_rel(1), acceleration: max_rel(2) },
        max_condition: history.records.iter().map(|r| r.condition).fold(1.0, f64::max),
        drift,
        centripetal,
        thresholds: ThresholdFlags {
            deck_limit: DECK_ACCELERATION_LIMIT,
            deck_peak,
            deck_exceeded: deck_peak > DECK_ACCELERATION_LIMIT,
            car_limit: CAR_ACCELERATION_LIMIT,
            car_peak,
            car_exceeded: car_peak > CAR_ACCELERATION_LIMIT,
        },
    })
}

/// Run a scenario and write `timehistory.csv` and `report.json` into `dir`.
pub fn run_to_dir(scenario: &Scenario, dir: &FsPath) -> Result<DiagnosticReport> {
    let history = run_simulation(scenario)?;
    let report = build_report(&history, scenario)?;
    std::fs::create_dir_all(dir)?;
    write_timehistory(&history, &dir.join("timehistory.csv"))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    Ok(report)
}
