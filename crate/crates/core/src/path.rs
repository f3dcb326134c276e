//! Track plan geometry, arclength maps, Frenet frames and the kinematics of
//! the moving frame carried along the path at constant speed.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splines::{chord_length_params, fit_least_squares, NurbsCurve, Side};

/// Global vertical direction.
pub const UP: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// Below this curvature estimate (1/m) the binormal falls back to [`UP`].
pub const STRAIGHT_CURVATURE: f64 = 1e-9;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n, started from the Chebyshev-like estimate.
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Kind of a plan span.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    Straight,
    Transition,
    Arc,
}

/// One span of the plan. A missing radius means an infinite one (zero
/// curvature); a positive radius turns left, a negative one right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanSpec {
    pub kind: SpanKind,
    pub length: f64,
    #[serde(default)]
    pub radius_start: Option<f64>,
    #[serde(default)]
    pub radius_end: Option<f64>,
}

impl SpanSpec {
    pub fn straight(length: f64) -> Self {
        Self { kind: SpanKind::Straight, length, radius_start: None, radius_end: None }
    }

    pub fn arc(length: f64, radius: f64) -> Self {
        Self { kind: SpanKind::Arc, length, radius_start: Some(radius), radius_end: Some(radius) }
    }

    pub fn transition(length: f64, radius_start: Option<f64>, radius_end: Option<f64>) -> Self {
        Self { kind: SpanKind::Transition, length, radius_start, radius_end }
    }

    fn curvature_start(&self) -> f64 {
        self.radius_start.map_or(0.0, |r| 1.0 / r)
    }

    fn curvature_end(&self) -> f64 {
        self.radius_end.map_or(0.0, |r| 1.0 / r)
    }
}

/// Ordered list of spans making up the track plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub spans: Vec<SpanSpec>,
}

impl Default for PlanSpec {
    /// Straight, transition, R = 6000 m arc, transition, straight; 30 m each.
    fn default() -> Self {
        let r = 6000.0;
        Self {
            spans: vec![
                SpanSpec::straight(30.0),
                SpanSpec::transition(30.0, None, Some(r)),
                SpanSpec::arc(30.0, r),
                SpanSpec::transition(30.0, Some(r), None),
                SpanSpec::straight(30.0),
            ],
        }
    }
}

impl PlanSpec {
    pub fn single_straight(length: f64) -> Self {
        Self { spans: vec![SpanSpec::straight(length)] }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |i: usize, field: &str, message: String| Error::Scenario {
            key: format!("plan.spans[{i}].{field}"),
            message,
        };
        if self.spans.is_empty() {
            return Err(Error::Scenario { key: "plan.spans".into(), message: "at least one span is required".into() });
        }
        for (i, span) in self.spans.iter().enumerate() {
            if !(span.length > 0.0) || !span.length.is_finite() {
                return Err(err(i, "length", format!("must be positive, got {}", span.length)));
            }
            for (field, r) in [("radius_start", span.radius_start), ("radius_end", span.radius_end)] {
                if let Some(r) = r {
                    if r == 0.0 || !r.is_finite() {
                        return Err(err(i, field, format!("must be nonzero and finite (use null for a straight), got {r}")));
                    }
                }
            }
            match span.kind {
                SpanKind::Straight if span.radius_start.is_some() || span.radius_end.is_some() => {
                    return Err(err(i, "radius_start", "a straight span has no radius".into()));
                }
                SpanKind::Arc if span.radius_start.is_none() || span.radius_start != span.radius_end => {
                    return Err(err(i, "radius_end", "an arc needs equal finite start and end radii".into()));
                }
                _ => {}
            }
            if i > 0 {
                let prev = self.spans[i - 1].curvature_end();
                let here = span.curvature_start();
                if (prev - here).abs() > 1e-12 * (1.0 + prev.abs().max(here.abs())) {
                    return Err(err(i, "radius_start", format!("curvature jumps from {prev} to {here} 1/m at the joint")));
                }
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.spans.iter().map(|s| s.length).sum()
    }

    /// Arclength of every span boundary, including 0 and the total length.
    pub fn joints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut acc = 0.0;
        for span in &self.spans {
            acc += span.length;
            out.push(acc);
        }
        out
    }

    /// Start and end arclength of every arc span.
    pub fn arc_windows(&self) -> Vec<(f64, f64, f64)> {
        let joints = self.joints();
        self.spans
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == SpanKind::Arc)
            .map(|(i, s)| (joints[i], joints[i + 1], s.radius_start.unwrap_or(f64::INFINITY)))
            .collect()
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let mut start = 0.0;
        for (i, span) in self.spans.iter().enumerate() {
            if s <= start + span.length || i == self.spans.len() - 1 {
                return (i, (s - start).clamp(0.0, span.length));
            }
            start += span.length;
        }
        unreachable!("plan has at least one span")
    }

    /// Exact plan curvature (linear in arclength within each span).
    pub fn curvature(&self, s: f64) -> f64 {
        let (i, local) = self.locate(s);
        let span = &self.spans[i];
        let (k0, k1) = (span.curvature_start(), span.curvature_end());
        k0 + (k1 - k0) * local / span.length
    }

    /// Heading angle from the +x axis.
    pub fn heading(&self, s: f64) -> f64 {
        let (i, local) = self.locate(s);
        let mut theta: f64 = self.spans[..i]
            .iter()
            .map(|sp| 0.5 * (sp.curvature_start() + sp.curvature_end()) * sp.length)
            .sum();
        let span = &self.spans[i];
        let (k0, k1) = (span.curvature_start(), span.curvature_end());
        theta += k0 * local + 0.5 * (k1 - k0) * local * local / span.length;
        theta
    }

    /// Exact plan points at the given increasing arclengths, starting at the
    /// origin heading along +x; clothoids are integrated with Gauss quadrature.
    pub fn sample(&self, stations: &[f64]) -> Vec<Vector3<f64>> {
        let (gx, gw) = gauss_legendre(8);
        let mut out = Vec::with_capacity(stations.len());
        let mut pos = Vector3::zeros();
        let mut last = 0.0;
        for &s in stations {
            // integrate piecewise between span joints so the integrand is smooth
            let mut a = last;
            let joints = self.joints();
            while a < s {
                let b = joints.iter().copied().find(|&j| j > a + 1e-15).unwrap_or(s).min(s);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (x, w) in gx.iter().zip(&gw) {
                    let th = self.heading(mid + half * x);
                    pos += Vector3::new(th.cos(), th.sin(), 0.0) * (w * half);
                }
                a = b;
            }
            last = s;
            out.push(pos);
        }
        out
    }
}

/// Monotone map between arclength `s` and curve parameter `xi`.
#[derive(Clone, Debug)]
pub struct ArclengthMap {
    xi: Vec<f64>,
    s: Vec<f64>,
}

const MAP_CELLS_PER_ELEMENT: usize = 32;

impl ArclengthMap {
    /// Tabulates `s(xi) = ∫ ‖x'‖ dxi` with adaptive Gauss quadrature.
    pub fn build(curve: &NurbsCurve) -> Result<Self> {
        let mut xi = Vec::new();
        let mut s = Vec::new();
        let mut acc = 0.0;
        let elements = curve.knots().elements();
        xi.push(elements[0].1);
        s.push(0.0);
        for (_, a, b) in elements {
            for c in 0..MAP_CELLS_PER_ELEMENT {
                let lo = a + (b - a) * c as f64 / MAP_CELLS_PER_ELEMENT as f64;
                let hi = a + (b - a) * (c + 1) as f64 / MAP_CELLS_PER_ELEMENT as f64;
                acc += adaptive_length(curve, lo, hi, 0)?;
                xi.push(hi);
                s.push(acc);
            }
        }
        Ok(Self { xi, s })
    }

    pub fn length(&self) -> f64 {
        *self.s.last().expect("map has entries")
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (self.xi[0], *self.xi.last().expect("map has entries"))
    }

    fn cell_of_xi(&self, xi: f64) -> usize {
        match self.xi.binary_search_by(|v| v.partial_cmp(&xi).expect("finite")) {
            Ok(i) => i.min(self.xi.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xi.len() - 2),
        }
    }

    pub fn s_of_xi(&self, curve: &NurbsCurve, xi: f64) -> Result<f64> {
        let (lo, hi) = self.xi_range();
        if xi < lo - 1e-12 || xi > hi + 1e-12 {
            return Err(Error::OutOfDomain { xi, lo, hi });
        }
        let xi = xi.clamp(lo, hi);
        let c = self.cell_of_xi(xi);
        Ok(self.s[c] + gauss_length(curve, self.xi[c], xi)?)
    }

    /// Inverse map by safeguarded Newton iteration.
    pub fn xi_of_s(&self, curve: &NurbsCurve, s: f64) -> Result<f64> {
        let length = self.length();
        let slack = 1e-9 * length.max(1.0);
        if !s.is_finite() || s < -slack || s > length + slack {
            return Err(Error::OffPath { s, length });
        }
        let s = s.clamp(0.0, length);
        let c = match self.s.binary_search_by(|v| v.partial_cmp(&s).expect("finite")) {
            Ok(i) => return Ok(self.xi[i]),
            Err(i) => i.saturating_sub(1).min(self.s.len() - 2),
        };
        let (mut a, mut b) = (self.xi[c], self.xi[c + 1]);
        let (sa, sb) = (self.s[c], self.s[c + 1]);
        let mut x = a + (b - a) * (s - sa) / (sb - sa);
        for _ in 0..50 {
            let f = self.s[c] + gauss_length(curve, self.xi[c], x)? - s;
            if f.abs() <= 1e-13 * length.max(1.0) {
                break;
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let jac = curve.derivatives(x, 1)?[1].norm();
            let mut next = x - f / jac;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            x = next;
        }
        Ok(x)
    }
}

fn gauss_length(curve: &NurbsCurve, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let (gx, gw) = gauss_legendre(8);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in gx.iter().zip(&gw) {
        sum += w * curve.derivatives(mid + half * x, 1)?[1].norm();
    }
    Ok(sum * half)
}

fn adaptive_length(curve: &NurbsCurve, a: f64, b: f64, depth: usize) -> Result<f64> {
    let whole = gauss_length(curve, a, b)?;
    let m = 0.5 * (a + b);
    let halves = gauss_length(curve, a, m)? + gauss_length(curve, m, b)?;
    if depth >= 12 || (whole - halves).abs() <= 1e-14 * halves.abs().max(1e-300) {
        Ok(halves)
    } else {
        Ok(adaptive_length(curve, a, m, depth + 1)? + adaptive_length(curve, m, b, depth + 1)?)
    }
}

/// Right-handed Frenet triad with `n = b × t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrenetFrame {
    pub origin: Vector3<f64>,
    pub t: Vector3<f64>,
    pub n: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl FrenetFrame {
    /// Rotation matrix with columns `[t n b]`.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.t, self.n, self.b])
    }
}

/// Differential geometry of the path at one parameter value.
#[derive(Clone, Copy, Debug)]
pub struct PathPoint {
    pub xi: f64,
    /// `ds/dxi`.
    pub jacobian: f64,
    /// `d²s/dxi²`.
    pub jacobian_rate: f64,
    pub frame: FrenetFrame,
    /// Signed curvature about `b` (positive when the path turns toward `n`).
    pub kappa: f64,
    pub dkappa_ds: f64,
    pub tau: f64,
    pub dtau_ds: f64,
}

/// Motion of the Frenet frame for a point travelling at constant speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameKinematics {
    pub rotation: Matrix3<f64>,
    /// Angular velocity in frame components (rad/s).
    pub omega: Vector3<f64>,
    /// Angular acceleration in frame components (rad/s²).
    pub omega_dot: Vector3<f64>,
    pub origin: Vector3<f64>,
    /// Global-frame origin velocity (m/s).
    pub origin_vel: Vector3<f64>,
    /// Global-frame origin acceleration (m/s²).
    pub origin_acc: Vector3<f64>,
}

impl FrameKinematics {
    /// Frame at rest with the identity orientation.
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            omega: Vector3::zeros(),
            omega_dot: Vector3::zeros(),
            origin: Vector3::zeros(),
            origin_vel: Vector3::zeros(),
            origin_acc: Vector3::zeros(),
        }
    }
}

/// Skew matrix `hat(w)` with `hat(w) x = w × x`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Fitted spline path together with its arclength map.
#[derive(Clone, Debug)]
pub struct Path {
    curve: NurbsCurve,
    map: ArclengthMap,
    plan: Option<PlanSpec>,
}

/// Dense samples per curve element used when fitting a plan.
const SAMPLES_PER_ELEMENT: usize = 24;

impl Path {
    pub fn from_curve(curve: NurbsCurve) -> Result<Self> {
        let map = ArclengthMap::build(&curve)?;
        Ok(Self { curve, map, plan: None })
    }

    /// Samples the exact plan densely and fits a degree-`p` spline with
    /// `elements_per_span` elements per span.
    pub fn from_plan(plan: &PlanSpec, elements_per_span: usize, p: usize) -> Result<Self> {
        plan.validate()?;
        if elements_per_span == 0 {
            return Err(Error::InvalidArgument("elements_per_span must be positive".into()));
        }
        let n_elems = elements_per_span * plan.spans.len();
        let n_samples = (SAMPLES_PER_ELEMENT * n_elems).max(4 * (n_elems + p));
        let total = plan.total_length();
        let stations: Vec<f64> = (0..n_samples).map(|i| total * i as f64 / (n_samples - 1) as f64).collect();
        let points = plan.sample(&stations);
        let params = chord_length_params(&points, 0.0, n_elems as f64);
        let samples: Vec<_> = params.into_iter().zip(points).collect();
        let curve = fit_least_squares(&samples, p, n_elems + p)?;
        let mut path = Self::from_curve(curve)?;
        path.plan = Some(plan.clone());
        Ok(path)
    }

    pub fn curve(&self) -> &NurbsCurve {
        &self.curve
    }

    pub fn map(&self) -> &ArclengthMap {
        &self.map
    }

    pub fn plan(&self) -> Option<&PlanSpec> {
        self.plan.as_ref()
    }

    pub fn length(&self) -> f64 {
        self.map.length()
    }

    pub fn xi_of_s(&self, s: f64) -> Result<f64> {
        self.map.xi_of_s(&self.curve, s)
    }

    pub fn s_of_xi(&self, xi: f64) -> Result<f64> {
        self.map.s_of_xi(&self.curve, xi)
    }

    /// Geometry at parameter `xi`, one-sided at knots.
    pub fn point_at_xi(&self, xi: f64, side: Side) -> Result<PathPoint> {
        let d = self.curve.derivatives_sided(xi, 4, side)?;
        Ok(frenet_from_derivatives(xi, &d))
    }

    pub fn point_at(&self, s: f64) -> Result<PathPoint> {
        self.point_at_xi(self.xi_of_s(s)?, Side::Right)
    }

    pub fn frame(&self, s: f64) -> Result<FrenetFrame> {
        Ok(self.point_at(s)?.frame)
    }

    /// Frame kinematics for a point at arclength `s` moving with speed `v`.
    pub fn kinematics(&self, s: f64, v: f64) -> Result<FrameKinematics> {
        Ok(kinematics_from_point(&self.point_at(s)?, v))
    }
}

/// Frenet triad and curvature/torsion from parametric derivatives
/// `d[0..=4]` (position and derivatives with respect to `xi`).
pub fn frenet_from_derivatives(xi: f64, d: &[Vector3<f64>]) -> PathPoint {
    let (x1, x2, x3) = (d[1], d[2], d[3]);
    let x4 = d.get(4).copied().unwrap_or_else(Vector3::zeros);
    let jac = x1.norm();
    let jac_rate = x1.dot(&x2) / jac;
    let t = x1 / jac;
    let c = x1.cross(&x2);
    let c_norm = c.norm();
    let b = if c_norm / jac.powi(3) < STRAIGHT_CURVATURE {
        let b = UP - t * UP.dot(&t);
        b / b.norm()
    } else {
        let b = c / c_norm;
        if b.dot(&UP) < 0.0 {
            -b
        } else {
            b
        }
    };
    let n = b.cross(&t);
    let c_rate = x1.cross(&x3);
    let kappa = c.dot(&b) / jac.powi(3);
    let dkappa_dxi = c_rate.dot(&b) / jac.powi(3) - 3.0 * kappa * jac_rate / jac;
    let (tau, dtau_dxi) = if c_norm / jac.powi(3) < STRAIGHT_CURVATURE {
        (0.0, 0.0)
    } else {
        let c2 = c_norm * c_norm;
        let tau = c.dot(&x3) / c2;
        (tau, c.dot(&x4) / c2 - 2.0 * tau * c.dot(&c_rate) / c2)
    };
    PathPoint {
        xi,
        jacobian: jac,
        jacobian_rate: jac_rate,
        frame: FrenetFrame { origin: d[0], t, n, b },
        kappa,
        dkappa_ds: dkappa_dxi / jac,
        tau,
        dtau_ds: dtau_dxi / jac,
    }
}

/// Frenet–Serret transport: `omega = v (tau, 0, kappa)` in frame components.
pub fn kinematics_from_point(p: &PathPoint, v: f64) -> FrameKinematics {
    FrameKinematics {
        rotation: p.frame.rotation(),
        omega: Vector3::new(v * p.tau, 0.0, v * p.kappa),
        omega_dot: Vector3::new(v * v * p.dtau_ds, 0.0, v * v * p.dkappa_ds),
        origin: p.frame.origin,
        origin_vel: p.frame.t * v,
        origin_acc: p.frame.n * (v * v * p.kappa),
    }
}

/// Rigid vertical cosine profile `z(s) = (A/2)(1 − cos(2πs/λ))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineProfile {
    pub amplitude: f64,
    pub wavelength: f64,
}

impl CosineProfile {
    pub fn new(amplitude: f64, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::InvalidArgument(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(Self { amplitude, wavelength })
    }

    fn k(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Height and its first two arclength derivatives.
    pub fn at(&self, s: f64) -> [f64; 3] {
        let (k, h) = (self.k(), 0.5 * self.amplitude);
        [h * (1.0 - (k * s).cos()), h * k * (k * s).sin(), h * k * k * (k * s).cos()]
    }

    /// Height, vertical velocity and vertical acceleration at time `t` for
    /// a point moving with speed `v`.
    pub fn at_time(&self, t: f64, v: f64) -> [f64; 3] {
        let [z, dz, d2z] = self.at(v * t);
        [z, v * dz, v * v * d2z]
    }

    /// Peak vertical acceleration at speed `v`.
    pub fn peak_acceleration(&self, v: f64) -> f64 {
        0.5 * self.amplitude.abs() * (self.k() * v).powi(2)
    }
}
