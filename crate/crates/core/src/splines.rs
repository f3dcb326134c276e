//! B-spline and NURBS machinery: knot vectors, basis functions with
//! derivatives (Cox–de Boor), rational curves and least-squares fitting.
//!
//! Parameters are dimensionless (`xi`). Open-uniform knot vectors use the
//! integer pattern `{0,..,0, 1, 2, .., ne-1, ne,..,ne}` so that knot spans and
//! elements coincide one to one.

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};

/// Relative slack applied when checking whether a parameter lies in the
/// knot domain; values within it are clamped onto the end knots.
const DOMAIN_SLACK: f64 = 1e-12;

/// Which one-sided limit to evaluate at an interior knot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Clamped (open) knot vector of degree `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    values: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(values: Vec<f64>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument("degree-0 splines are not supported".into()));
        }
        let len = values.len();
        if len < 2 * (degree + 1) {
            return Err(Error::InvalidArgument(format!(
                "knot vector of degree {degree} needs at least {} knots, got {len}",
                2 * (degree + 1)
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("knot values must be finite".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("knot values must be non-decreasing".into()));
        }
        let first = values[0];
        let last = values[len - 1];
        let clamped_start = values[..=degree].iter().all(|&v| v == first) && values[degree + 1] > first;
        let clamped_end = values[len - degree - 1..].iter().all(|&v| v == last) && values[len - degree - 2] < last;
        if !clamped_start || !clamped_end {
            return Err(Error::InvalidArgument(format!(
                "end knots must have multiplicity exactly {}",
                degree + 1
            )));
        }
        Ok(Self { values, degree })
    }

    /// Open-uniform knots `{0×(p+1), 1, .., n_elems-1, n_elems×(p+1)}`.
    pub fn open_uniform(degree: usize, n_elems: usize) -> Result<Self> {
        if degree == 0 || n_elems == 0 {
            return Err(Error::InvalidArgument(format!(
                "open-uniform knots need degree >= 1 and at least one element (got p={degree}, n_elems={n_elems})"
            )));
        }
        let mut values = vec![0.0; degree + 1];
        values.extend((1..n_elems).map(|i| i as f64));
        values.extend(std::iter::repeat_n(n_elems as f64, degree + 1));
        Self::new(values, degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of basis functions `n = len - p - 1`.
    pub fn num_basis(&self) -> usize {
        self.values.len() - self.degree - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.values[0], self.values[self.values.len() - 1])
    }

    /// Nonzero knot spans as `(span index, start, end)`.
    pub fn elements(&self) -> Vec<(usize, f64, f64)> {
        (self.degree..self.num_basis())
            .filter(|&i| self.values[i + 1] > self.values[i])
            .map(|i| (i, self.values[i], self.values[i + 1]))
            .collect()
    }

    pub fn num_elements(&self) -> usize {
        self.elements().len()
    }

    /// Interior knots with the continuity they carry (`p - multiplicity`).
    pub fn interior_breaks(&self) -> Vec<(f64, usize)> {
        let (lo, hi) = self.domain();
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in &self.values {
            if v <= lo || v >= hi {
                continue;
            }
            match out.last_mut() {
                Some((k, mult)) if *k == v => *mult += 1,
                _ => out.push((v, 1)),
            }
        }
        out.into_iter().map(|(k, m)| (k, self.degree.saturating_sub(m))).collect()
    }

    fn clamp_to_domain(&self, xi: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let slack = DOMAIN_SLACK * (hi - lo).abs().max(1.0);
        if !xi.is_finite() || xi < lo - slack || xi > hi + slack {
            return Err(Error::OutOfDomain { xi, lo, hi });
        }
        Ok(xi.clamp(lo, hi))
    }

    /// Span index `i` with `U[i] <= xi < U[i+1]` (or the one-sided variant at
    /// an interior knot). The right end of the domain maps to the last span.
    pub fn find_span_sided(&self, xi: f64, side: Side) -> Result<usize> {
        let xi = self.clamp_to_domain(xi)?;
        let n = self.num_basis();
        let p = self.degree;
        let (lo, hi) = self.domain();
        if xi >= hi {
            return Ok(self.last_nonzero_span());
        }
        if xi <= lo {
            return Ok(p);
        }
        let u = &self.values;
        // binary search over [p, n)
        let (mut low, mut high) = (p, n);
        let idx = loop {
            let mid = (low + high) / 2;
            if xi < u[mid] {
                high = mid;
            } else if xi >= u[mid + 1] {
                low = mid + 1;
            } else {
                break mid;
            }
            if low >= high {
                break low.min(n - 1);
            }
        };
        if side == Side::Left && xi == u[idx] {
            let mut j = idx;
            while j > p && u[j] == xi {
                j -= 1;
            }
            if u[j] < xi {
                return Ok(j);
            }
        }
        Ok(idx)
    }

    pub fn find_span(&self, xi: f64) -> Result<usize> {
        self.find_span_sided(xi, Side::Right)
    }

    fn last_nonzero_span(&self) -> usize {
        let mut i = self.num_basis() - 1;
        while i > self.degree && self.values[i] == self.values[i + 1] {
            i -= 1;
        }
        i
    }

    /// Nonzero basis functions and their derivatives up to order `k` at `xi`.
    pub fn basis(&self, xi: f64, k: usize) -> Result<BasisSpan> {
        self.basis_sided(xi, k, Side::Right)
    }

    pub fn basis_sided(&self, xi: f64, k: usize, side: Side) -> Result<BasisSpan> {
        let span = self.find_span_sided(xi, side)?;
        let xi = self.clamp_to_domain(xi)?;
        Ok(self.basis_in_span(span, xi, k))
    }

    /// Piegl–Tiller derivative recurrence evaluated in a fixed span. The
    /// caller is responsible for `xi` lying in (the closure of) that span.
    pub fn basis_in_span(&self, span: usize, xi: f64, k: usize) -> BasisSpan {
        let p = self.degree;
        let u = &self.values;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; k + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let n = k.min(p);
        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for kk in 1..=n {
                let mut d = 0.0;
                let rk = r as isize - kk as isize;
                let pk = p - kk;
                if r >= kk {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize) - 1 <= pk as isize { kk - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][kk] = -a[s1][kk - 1] / ndu[pk + 1][r];
                    d += a[s2][kk] * ndu[r][pk];
                }
                ders[kk][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (kk, row) in ders.iter_mut().enumerate().take(n + 1).skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (p - kk) as f64;
        }
        BasisSpan { span, degree: p, ders }
    }
}

/// The `p+1` nonzero basis functions at a parameter, with derivatives.
/// `ders[k][j]` is the k-th derivative of basis function `first() + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSpan {
    pub span: usize,
    pub degree: usize,
    pub ders: Vec<Vec<f64>>,
}

impl BasisSpan {
    /// Global index of the first nonzero basis function.
    pub fn first(&self) -> usize {
        self.span - self.degree
    }

    pub fn order(&self) -> usize {
        self.ders.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.ders[0]
    }

    /// Derivative row of order `k`, or zeros past the stored order.
    pub fn derivative(&self, k: usize) -> Vec<f64> {
        self.ders.get(k).cloned().unwrap_or_else(|| vec![0.0; self.degree + 1])
    }
}

/// Rational B-spline curve in 3D.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsCurve {
    knots: KnotVector,
    control_points: Vec<Vector3<f64>>,
    weights: Vec<f64>,
}

impl NurbsCurve {
    pub fn new(knots: KnotVector, control_points: Vec<Vector3<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = knots.num_basis();
        if control_points.len() != n || weights.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} control points and weights, got {} and {}",
                control_points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be positive".into()));
        }
        Ok(Self { knots, control_points, weights })
    }

    /// Non-rational curve (all weights 1).
    pub fn bspline(knots: KnotVector, control_points: Vec<Vector3<f64>>) -> Result<Self> {
        let n = control_points.len();
        Self::new(knots, control_points, vec![1.0; n])
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn control_points(&self) -> &[Vector3<f64>] {
        &self.control_points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain(&self) -> (f64, f64) {
        self.knots.domain()
    }

    pub fn point(&self, xi: f64) -> Result<Vector3<f64>> {
        Ok(self.derivatives(xi, 0)?[0])
    }

    /// Curve point and derivatives `d^j x / dxi^j`, `j = 0..=k`.
    pub fn derivatives(&self, xi: f64, k: usize) -> Result<Vec<Vector3<f64>>> {
        self.derivatives_sided(xi, k, Side::Right)
    }

    pub fn derivatives_sided(&self, xi: f64, k: usize, side: Side) -> Result<Vec<Vector3<f64>>> {
        let basis = self.knots.basis_sided(xi, k, side)?;
        let first = basis.first();
        let mut a_ders = vec![Vector3::zeros(); k + 1];
        let mut w_ders = vec![0.0; k + 1];
        for (order, row) in basis.ders.iter().enumerate() {
            for (j, &nv) in row.iter().enumerate() {
                let w = self.weights[first + j];
                a_ders[order] += self.control_points[first + j] * (nv * w);
                w_ders[order] += nv * w;
            }
        }
        let mut out: Vec<Vector3<f64>> = Vec::with_capacity(k + 1);
        for order in 0..=k {
            let mut v = a_ders[order];
            for i in 1..=order {
                v -= out[order - i] * (binomial(order, i) * w_ders[i]);
            }
            out.push(v / w_ders[0]);
        }
        Ok(out)
    }

    /// Rational basis `R_i` and derivatives up to order `k` at `xi`.
    pub fn rational_basis(&self, xi: f64, k: usize) -> Result<BasisSpan> {
        self.rational_basis_sided(xi, k, Side::Right)
    }

    pub fn rational_basis_sided(&self, xi: f64, k: usize, side: Side) -> Result<BasisSpan> {
        let basis = self.knots.basis_sided(xi, k, side)?;
        Ok(self.rationalize(basis))
    }

    /// Rational basis in a fixed element span (used by quadrature loops).
    pub fn rational_basis_in_span(&self, span: usize, xi: f64, k: usize) -> BasisSpan {
        self.rationalize(self.knots.basis_in_span(span, xi, k))
    }

    fn rationalize(&self, basis: BasisSpan) -> BasisSpan {
        let p = basis.degree;
        let first = basis.first();
        let k = basis.order();
        let w: Vec<f64> = (0..=p).map(|j| self.weights[first + j]).collect();
        let w_ders: Vec<f64> = basis
            .ders
            .iter()
            .map(|row| row.iter().zip(&w).map(|(n, w)| n * w).sum())
            .collect();
        let mut r = vec![vec![0.0; p + 1]; k + 1];
        for order in 0..=k {
            for j in 0..=p {
                let mut v = basis.ders[order][j] * w[j];
                for i in 1..=order {
                    v -= binomial(order, i) * w_ders[i] * r[order - i][j];
                }
                r[order][j] = v / w_ders[0];
            }
        }
        BasisSpan { span: basis.span, degree: p, ders: r }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Chord-length parameters for a point sequence, rescaled onto `[lo, hi]`.
pub fn chord_length_params(points: &[Vector3<f64>], lo: f64, hi: f64) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut total = 0.0;
    acc.push(0.0);
    for w in points.windows(2) {
        total += (w[1] - w[0]).norm();
        acc.push(total);
    }
    if total == 0.0 {
        return vec![lo; points.len()];
    }
    let mut out: Vec<f64> = acc.into_iter().map(|d| lo + (hi - lo) * d / total).collect();
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    out
}

/// Least-squares B-spline fit (unit weights) on an open-uniform knot vector
/// with `n_ctrl - p` elements. Sample parameters must lie in `[0, n_ctrl - p]`.
pub fn fit_least_squares(samples: &[(f64, Vector3<f64>)], p: usize, n_ctrl: usize) -> Result<NurbsCurve> {
    if n_ctrl <= p {
        return Err(Error::InvalidArgument(format!(
            "need more than {p} control points for degree {p}, got {n_ctrl}"
        )));
    }
    if n_ctrl > samples.len() {
        return Err(Error::InvalidArgument(format!(
            "{n_ctrl} control points exceed {} samples",
            samples.len()
        )));
    }
    let knots = KnotVector::open_uniform(p, n_ctrl - p)?;
    let mut design = DMatrix::<f64>::zeros(samples.len(), n_ctrl);
    for (row, (xi, _)) in samples.iter().enumerate() {
        let b = knots.basis(*xi, 0)?;
        for (j, v) in b.values().iter().enumerate() {
            design[(row, b.first() + j)] = *v;
        }
    }
    for col in 0..n_ctrl {
        if design.column(col).iter().all(|v| *v == 0.0) {
            return Err(Error::RankDeficient(format!("basis function {col} is not activated by any sample")));
        }
    }
    let normal = design.transpose() * &design;
    let rhs = {
        let mut pts = DMatrix::<f64>::zeros(samples.len(), 3);
        for (row, (_, x)) in samples.iter().enumerate() {
            for c in 0..3 {
                pts[(row, c)] = x[c];
            }
        }
        design.transpose() * pts
    };
    let chol = normal
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("normal matrix is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if dmin <= 1e-7 * dmax {
        return Err(Error::RankDeficient(format!("pivot ratio {:e}", dmin / dmax)));
    }
    let sol = chol.solve(&rhs);
    let ctrl = (0..n_ctrl).map(|i| Vector3::new(sol[(i, 0)], sol[(i, 1)], sol[(i, 2)])).collect();
    NurbsCurve::bspline(knots, ctrl)
}
