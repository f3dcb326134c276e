//! Bridge discretizations: isogeometric curved Timoshenko beams on the path's
//! own NURBS basis, and straight Euler–Bernoulli frame elements on chords.
//!
//! Both kinds carry six DOFs per control point or node, expressed in the
//! local Frenet basis of the path: `(υt, υn, υb, θt, θn, θb)`.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{gauss_legendre, Path, PathPoint, UP};
use crate::splines::{KnotVector, Side};

pub const UT: usize = 0;
pub const UN: usize = 1;
pub const UB: usize = 2;
pub const TT: usize = 3;
pub const TN: usize = 4;
pub const TB: usize = 5;
pub const DOFS_PER_POINT: usize = 6;

/// A sparse row over full (unreduced) bridge DOFs.
pub type SparseRow = Vec<(usize, f64)>;

/// Cross-section and material properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    /// Young's modulus (Pa).
    pub e: f64,
    /// Shear modulus (Pa).
    pub g: f64,
    /// Area (m²).
    pub a: f64,
    /// Shear area for `ε_n` (m²); defaults to `a`.
    pub a_n: Option<f64>,
    /// Shear area for `ε_b` (m²); defaults to `a`.
    pub a_b: Option<f64>,
    /// Torsion constant (m⁴).
    pub i_t: f64,
    /// Second moment about `n`, governing vertical bending (m⁴).
    pub i_n: f64,
    /// Second moment about `b`, governing lateral bending (m⁴).
    pub i_b: f64,
    /// Mass per unit length (kg/m).
    pub rho_lin: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            e: 28.25e9,
            g: 1e12,
            a: 7.73,
            a_n: None,
            a_b: None,
            i_t: 15.65,
            i_n: 7.84,
            i_b: 74.42,
            rho_lin: 41740.0,
        }
    }
}

impl BeamSection {
    pub fn shear_area_n(&self) -> f64 {
        self.a_n.unwrap_or(self.a)
    }

    pub fn shear_area_b(&self) -> f64 {
        self.a_b.unwrap_or(self.a)
    }

    /// `diag(EA, GA_n, GA_b, GI_t, EI_n, EI_b)`.
    pub fn rigidities(&self) -> [f64; 6] {
        [
            self.e * self.a,
            self.g * self.shear_area_n(),
            self.g * self.shear_area_b(),
            self.g * self.i_t,
            self.e * self.i_n,
            self.e * self.i_b,
        ]
    }

    /// Mass per unit length for each DOF component.
    pub fn inertias(&self) -> [f64; 6] {
        let r = self.rho_lin / self.a;
        [self.rho_lin, self.rho_lin, self.rho_lin, r * self.i_t, r * self.i_n, r * self.i_b]
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("e", Some(self.e)),
            ("g", Some(self.g)),
            ("a", Some(self.a)),
            ("a_n", self.a_n),
            ("a_b", self.a_b),
            ("i_t", Some(self.i_t)),
            ("i_n", Some(self.i_n)),
            ("i_b", Some(self.i_b)),
            ("rho_lin", Some(self.rho_lin)),
        ];
        for (name, value) in fields {
            if let Some(v) = value {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Scenario {
                        key: format!("bridge.section.{name}"),
                        message: format!("must be positive and finite, got {v}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Generalized Timoshenko strains `(ε_t, ε_n, ε_b, β_t, β_n, β_b)` from
/// Frenet-component fields and their arclength derivatives.
pub fn generalized_strain(
    u: &Vector3<f64>,
    du: &Vector3<f64>,
    th: &Vector3<f64>,
    dth: &Vector3<f64>,
    kappa: f64,
    tau: f64,
) -> [f64; 6] {
    [
        du.x - kappa * u.y,
        du.y + kappa * u.x - tau * u.z - th.z,
        du.z + tau * u.y + th.y,
        dth.x - kappa * th.y,
        dth.y + kappa * th.x - tau * th.z,
        dth.z + tau * th.y,
    ]
}

/// Strain operator at one point: 6 × 6(p+1) matrix acting on the element's
/// control values, given basis values `r` and arclength derivatives `dr`.
pub fn strain_operator(r: &[f64], dr: &[f64], kappa: f64, tau: f64) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(6, DOFS_PER_POINT * r.len());
    for (a, (&n, &dn)) in r.iter().zip(dr).enumerate() {
        let c = DOFS_PER_POINT * a;
        b[(0, c + UT)] = dn;
        b[(0, c + UN)] = -kappa * n;
        b[(1, c + UN)] = dn;
        b[(1, c + UT)] = kappa * n;
        b[(1, c + UB)] = -tau * n;
        b[(1, c + TB)] = -n;
        b[(2, c + UB)] = dn;
        b[(2, c + UN)] = tau * n;
        b[(2, c + TN)] = n;
        b[(3, c + TT)] = dn;
        b[(3, c + TN)] = -kappa * n;
        b[(4, c + TN)] = dn;
        b[(4, c + TT)] = kappa * n;
        b[(4, c + TB)] = -tau * n;
        b[(5, c + TB)] = dn;
        b[(5, c + TN)] = tau * n;
    }
    b
}

/// How the transverse shear strains enter the NURBS stiffness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShearTreatment {
    /// Plain Gauss integration of all six strains.
    Full,
    /// Shear strains replaced by their L2 projection onto the degree p−1
    /// spline space on the same knots (B-bar), which removes shear locking.
    #[default]
    Projected,
}

/// Bridge discretization kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeKind {
    #[default]
    Nurbs,
    Fem,
}

/// End restraint of the bridge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndFixity {
    /// All six DOFs fixed at both ends.
    #[default]
    Fixed,
    /// `υn, υb, θt` fixed at both ends and `υt` at the start.
    Pinned,
}

/// Boundary conditions: end fixity plus interior supports restraining
/// `υn, υb, θt` at the given arclengths.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryConditions {
    pub ends: EndFixity,
    pub interior_supports: Vec<f64>,
}

/// Assembly options.
#[derive(Clone, Debug)]
pub struct BridgeOptions {
    pub kind: BridgeKind,
    pub section: BeamSection,
    pub bc: BoundaryConditions,
    /// Rayleigh damping coefficients `(a0, a1)`.
    pub rayleigh: (f64, f64),
    pub shear: ShearTreatment,
    /// Frame elements per plan span (FEM kind only); the NURBS kind uses the
    /// elements of the path curve.
    pub elements_per_span: usize,
}

/// Straight frame element on a chord between two path stations.
#[derive(Clone, Debug)]
pub struct FemElement {
    pub nodes: (usize, usize),
    pub s: (f64, f64),
    pub length: f64,
    /// Columns are the local axes `e_x` (chord), `e_y`, `e_z` in global coordinates.
    pub axes: Matrix3<f64>,
    /// Maps nodal Frenet-basis DOFs to local element DOFs.
    pub gamma: SMatrix<f64, 12, 12>,
}

/// Chord mesh of the path.
#[derive(Clone, Debug)]
pub struct FemMesh {
    pub nodes: Vec<PathPoint>,
    pub node_s: Vec<f64>,
    pub elements: Vec<FemElement>,
}

#[derive(Clone, Debug)]
pub enum Discretization {
    Nurbs,
    Fem(FemMesh),
}

/// Assembled bridge with boundary conditions eliminated.
///
/// Full DOF vectors relate to the reduced ones through `u = T q`.
#[derive(Clone, Debug)]
pub struct BridgeSystem {
    pub kind: BridgeKind,
    pub path: Path,
    pub discretization: Discretization,
    pub section: BeamSection,
    pub m_full: DMatrix<f64>,
    pub k_full: DMatrix<f64>,
    pub p_full: DVector<f64>,
    pub transform: DMatrix<f64>,
    /// Full DOF indices eliminated by the constraints.
    pub slaves: Vec<usize>,
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub p: DVector<f64>,
}

impl BridgeSystem {
    pub fn assemble(path: &Path, options: &BridgeOptions) -> Result<Self> {
        options.section.validate()?;
        let (discretization, m_full, k_full, p_full) = match options.kind {
            BridgeKind::Nurbs => {
                let (m, k, p) = assemble_nurbs(path, &options.section, options.shear)?;
                (Discretization::Nurbs, m, k, p)
            }
            BridgeKind::Fem => {
                let mesh = FemMesh::build(path, options.elements_per_span)?;
                let (m, k, p) = assemble_fem(&mesh, &options.section);
                (Discretization::Fem(mesh), m, k, p)
            }
        };
        let mut system = Self {
            kind: options.kind,
            path: path.clone(),
            discretization,
            section: options.section.clone(),
            transform: DMatrix::identity(m_full.nrows(), m_full.nrows()),
            m_full,
            k_full,
            p_full,
            slaves: Vec::new(),
            m: DMatrix::zeros(0, 0),
            c: DMatrix::zeros(0, 0),
            k: DMatrix::zeros(0, 0),
            p: DVector::zeros(0),
        };
        let rows = system.support_rows(&options.bc)?;
        let (transform, slaves) = elimination_transform(system.n_full(), &rows);
        let tt = transform.transpose();
        system.m = &tt * &system.m_full * &transform;
        system.k = &tt * &system.k_full * &transform;
        system.p = &tt * &system.p_full;
        system.c = &system.m * options.rayleigh.0 + &system.k * options.rayleigh.1;
        system.transform = transform;
        system.slaves = slaves;
        Ok(system)
    }

    pub fn n_full(&self) -> usize {
        self.m_full.nrows()
    }

    /// Number of free (reduced) DOFs.
    pub fn n_free(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.n_full() / DOFS_PER_POINT
    }

    /// Expands reduced DOFs to the full set.
    pub fn expand(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.transform * q
    }

    /// Projects a full-DOF row onto the reduced DOFs.
    pub fn reduce_row(&self, row: &SparseRow) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_free());
        for &(i, v) in row {
            out.axpy(v, &self.transform.row(i).transpose(), 1.0);
        }
        out
    }

    /// Constraint rows for the boundary conditions in full DOFs.
    fn support_rows(&self, bc: &BoundaryConditions) -> Result<Vec<SparseRow>> {
        let mut rows = Vec::new();
        let last = self.n_points() - 1;
        let end_components: &[usize] = match bc.ends {
            EndFixity::Fixed => &[UT, UN, UB, TT, TN, TB],
            EndFixity::Pinned => &[UN, UB, TT],
        };
        for &point in &[0, last] {
            for &c in end_components {
                rows.push(vec![(DOFS_PER_POINT * point + c, 1.0)]);
            }
        }
        if bc.ends == EndFixity::Pinned {
            rows.push(vec![(UT, 1.0)]);
        }
        let length = self.path.length();
        for &s in &bc.interior_supports {
            if !(s >= 0.0 && s <= length * (1.0 + 1e-9)) {
                return Err(Error::SupportOffPath(s));
            }
            let field = self.field_rows(s, Side::Right, 0)?;
            for c in [UN, UB, TT] {
                rows.push(field[0][c].clone());
            }
        }
        Ok(rows)
    }

    /// Rows evaluating the six Frenet-component fields and their arclength
    /// derivatives up to `order` at `s`: `out[k][c]` is `d^k f_c / ds^k`.
    pub fn field_rows(&self, s: f64, side: Side, order: usize) -> Result<Vec<[SparseRow; 6]>> {
        match &self.discretization {
            Discretization::Nurbs => nurbs_field_rows(&self.path, s, side, order),
            Discretization::Fem(mesh) => mesh.field_rows(&self.path, s, side, order),
        }
    }

    /// Static response `K q = P` in reduced DOFs.
    pub fn static_solution(&self, load: &DVector<f64>) -> Result<DVector<f64>> {
        let chol = self
            .k
            .clone()
            .cholesky()
            .ok_or(Error::SingularSystem { t: 0.0, condition: f64::INFINITY })?;
        Ok(chol.solve(load))
    }

    /// Natural frequencies (Hz), ascending, of the undamped reduced system.
    pub fn natural_frequencies(&self) -> Result<Vec<f64>> {
        let chol = self
            .m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("mass factor is singular".into()))?;
        let a = &linv * &self.k * linv.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let eig = a.symmetric_eigen();
        let mut f: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&w2| w2.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect();
        f.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(f)
    }

    /// One-sided turning angle between adjacent chords at interior FEM
    /// nodes, `(s, angle)`. Empty for NURBS bridges, whose geometry has no
    /// kinks.
    pub fn chord_turning_angles(&self) -> Vec<(f64, f64)> {
        match &self.discretization {
            Discretization::Nurbs => Vec::new(),
            Discretization::Fem(mesh) => mesh
                .elements
                .windows(2)
                .map(|w| {
                    let a = w[0].axes.column(0).into_owned();
                    let b = w[1].axes.column(0).into_owned();
                    (w[0].s.1, a.cross(&b).norm().atan2(a.dot(&b)))
                })
                .collect(),
        }
    }
}

/// Reduced-row-echelon elimination of linear constraints `C u = 0`.
/// Returns `T` with `u = T q` and the eliminated DOF indices.
pub fn elimination_transform(n: usize, rows: &[SparseRow]) -> (DMatrix<f64>, Vec<usize>) {
    let mut c = DMatrix::<f64>::zeros(rows.len(), n);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            c[(i, j)] += v;
        }
    }
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut is_pivot = vec![false; n];
    for i in 0..rows.len() {
        let norm = c.row(i).amax();
        if norm == 0.0 {
            continue;
        }
        let (mut best, mut best_val) = (usize::MAX, 0.0);
        for j in 0..n {
            if !is_pivot[j] && c[(i, j)].abs() > best_val {
                best = j;
                best_val = c[(i, j)].abs();
            }
        }
        if best == usize::MAX || best_val <= 1e-12 * norm.max(1.0) {
            continue;
        }
        let pv = c[(i, best)];
        for j in 0..n {
            c[(i, j)] /= pv;
        }
        for r in 0..rows.len() {
            if r != i && c[(r, best)] != 0.0 {
                let f = c[(r, best)];
                for j in 0..n {
                    c[(r, j)] -= f * c[(i, j)];
                }
                c[(r, best)] = 0.0;
            }
        }
        is_pivot[best] = true;
        pivots.push((i, best));
    }
    let free: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
    let mut t = DMatrix::zeros(n, free.len());
    for (k, &j) in free.iter().enumerate() {
        t[(j, k)] = 1.0;
    }
    for &(i, j) in &pivots {
        for (k, &f) in free.iter().enumerate() {
            let v = c[(i, f)];
            if v != 0.0 {
                t[(j, k)] = -v;
            }
        }
    }
    let mut slaves: Vec<usize> = pivots.iter().map(|&(_, j)| j).collect();
    slaves.sort_unstable();
    (t, slaves)
}

fn add_block(target: &mut DMatrix<f64>, dofs: &[usize], block: &DMatrix<f64>) {
    for (a, &i) in dofs.iter().enumerate() {
        for (b, &j) in dofs.iter().enumerate() {
            target[(i, j)] += block[(a, b)];
        }
    }
}

/// Projection basis for the shear strains in one element: indices and values.
struct ShearBasis {
    knots: Option<KnotVector>,
    degree: usize,
}

impl ShearBasis {
    fn new(knots: &KnotVector) -> Result<Self> {
        let p = knots.degree();
        if p == 1 {
            return Ok(Self { knots: None, degree: 0 });
        }
        let v = knots.values();
        Ok(Self { knots: Some(KnotVector::new(v[1..v.len() - 1].to_vec(), p - 1)?), degree: p - 1 })
    }

    fn dim(&self, n_elems: usize) -> usize {
        match &self.knots {
            Some(k) => k.num_basis(),
            None => n_elems,
        }
    }

    /// `(first index, values)` at `xi` inside element `elem` with span `span`.
    fn eval(&self, elem: usize, span: usize, xi: f64) -> (usize, Vec<f64>) {
        match &self.knots {
            Some(k) => {
                let b = k.basis_in_span(span - 1, xi, 0);
                (span - 1 - self.degree, b.ders[0].clone())
            }
            None => (elem, vec![1.0]),
        }
    }
}

/// Assembles full NURBS mass, stiffness and self-weight load.
pub fn assemble_nurbs(path: &Path, section: &BeamSection, shear: ShearTreatment) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let curve = path.curve();
    let knots = curve.knots();
    let p = knots.degree();
    let n = knots.num_basis();
    let ndof = DOFS_PER_POINT * n;
    let mut m = DMatrix::zeros(ndof, ndof);
    let mut k = DMatrix::zeros(ndof, ndof);
    let mut load = DVector::zeros(ndof);
    let d = section.rigidities();
    let rho = section.inertias();
    let weight = -section.rho_lin * 9.81;
    let (gx, gw) = gauss_legendre(p + 1);
    let elements = knots.elements();

    let projected = shear == ShearTreatment::Projected;
    let shear_basis = ShearBasis::new(knots)?;
    let nh = shear_basis.dim(elements.len());
    let mut gram = DMatrix::<f64>::zeros(nh, nh);
    let mut h = [DMatrix::<f64>::zeros(nh, ndof), DMatrix::<f64>::zeros(nh, ndof)];

    for (e, &(span, a, b)) in elements.iter().enumerate() {
        let first = span - p;
        let dofs: Vec<usize> = (DOFS_PER_POINT * first..DOFS_PER_POINT * (first + p + 1)).collect();
        let ne = dofs.len();
        let mut ke = DMatrix::zeros(ne, ne);
        let mut me = DMatrix::zeros(ne, ne);
        let half = 0.5 * (b - a);
        for (x, w) in gx.iter().zip(&gw) {
            let xi = 0.5 * (a + b) + half * x;
            let rb = curve.rational_basis_in_span(span, xi, 1);
            let pt = path.point_at_xi(xi, Side::Right)?;
            let jw = pt.jacobian * w * half;
            let r = &rb.ders[0];
            let dr: Vec<f64> = rb.ders[1].iter().map(|v| v / pt.jacobian).collect();
            let bmat = strain_operator(r, &dr, pt.kappa, pt.tau);
            for (row, &rig) in d.iter().enumerate() {
                if projected && (row == 1 || row == 2) {
                    continue;
                }
                let br = bmat.row(row);
                ke += br.transpose() * br * (rig * jw);
            }
            if projected {
                let (hf, hv) = shear_basis.eval(e, span, xi);
                for (i, vi) in hv.iter().enumerate() {
                    for (j, vj) in hv.iter().enumerate() {
                        gram[(hf + i, hf + j)] += vi * vj * jw;
                    }
                    for (c, hc) in h.iter_mut().enumerate() {
                        for (col, &dof) in dofs.iter().enumerate() {
                            hc[(hf + i, dof)] += vi * bmat[(c + 1, col)] * jw;
                        }
                    }
                }
            }
            let q = Vector3::new(pt.frame.t.dot(&UP), pt.frame.n.dot(&UP), pt.frame.b.dot(&UP)) * weight;
            for (ai, &na) in r.iter().enumerate() {
                for comp in 0..3 {
                    load[dofs[DOFS_PER_POINT * ai + comp]] += na * q[comp] * jw;
                }
                for (bi, &nb) in r.iter().enumerate() {
                    for comp in 0..DOFS_PER_POINT {
                        me[(DOFS_PER_POINT * ai + comp, DOFS_PER_POINT * bi + comp)] += rho[comp] * na * nb * jw;
                    }
                }
            }
        }
        add_block(&mut k, &dofs, &ke);
        add_block(&mut m, &dofs, &me);
    }

    if projected {
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("shear projection Gram matrix is singular".into()))?;
        for (c, hc) in h.iter().enumerate() {
            let solved = chol.solve(hc);
            k += hc.transpose() * solved * d[c + 1];
        }
    }
    let k = (&k + k.transpose()) * 0.5;
    let m = (&m + m.transpose()) * 0.5;
    Ok((m, k, load))
}

fn nurbs_field_rows(path: &Path, s: f64, side: Side, order: usize) -> Result<Vec<[SparseRow; 6]>> {
    let xi = path.xi_of_s(s)?;
    let curve = path.curve();
    let rb = curve.rational_basis_sided(xi, order.max(2), side)?;
    let pt = path.point_at_xi(xi, side)?;
    let (j, dj) = (pt.jacobian, pt.jacobian_rate);
    let first = rb.first();
    let mut out = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let vals: Vec<f64> = match k {
            0 => rb.ders[0].clone(),
            1 => rb.ders[1].iter().map(|v| v / j).collect(),
            2 => rb.ders[2].iter().zip(&rb.ders[1]).map(|(d2, d1)| d2 / (j * j) - d1 * dj / (j * j * j)).collect(),
            _ => return Err(Error::InvalidArgument("field derivatives above second order are not available".into())),
        };
        let rows: [SparseRow; 6] = std::array::from_fn(|c| {
            vals.iter().enumerate().map(|(a, &v)| (DOFS_PER_POINT * (first + a) + c, v)).collect()
        });
        out.push(rows);
    }
    Ok(out)
}

/// Hermite cubic shape functions on `[0, 1]` and their `ξ` derivatives.
/// Slopes are scaled by the element length `l`.
fn hermite(xi: f64, l: f64) -> [[f64; 4]; 4] {
    let x = xi;
    [
        [1.0 - 3.0 * x * x + 2.0 * x * x * x, l * (x - 2.0 * x * x + x * x * x), 3.0 * x * x - 2.0 * x * x * x, l * (-x * x + x * x * x)],
        [-6.0 * x + 6.0 * x * x, l * (1.0 - 4.0 * x + 3.0 * x * x), 6.0 * x - 6.0 * x * x, l * (-2.0 * x + 3.0 * x * x)],
        [-6.0 + 12.0 * x, l * (-4.0 + 6.0 * x), 6.0 - 12.0 * x, l * (-2.0 + 6.0 * x)],
        [12.0, 6.0 * l, -12.0, 6.0 * l],
    ]
}

/// Local interpolation matrices `d^k/dξ^k [u; θ] = S_k d` (6 × 12) for a
/// frame element, `k = 0..=2`. Local DOF order per node: `ux uy uz θx θy θz`.
pub fn frame_shape(xi: f64, l: f64) -> [SMatrix<f64, 6, 12>; 3] {
    let h = hermite(xi, l);
    let lin = [[1.0 - xi, xi], [-1.0, 1.0], [0.0, 0.0]];
    std::array::from_fn(|k| {
        let mut s = SMatrix::<f64, 6, 12>::zeros();
        // axial and twist: linear
        s[(0, 0)] = lin[k][0];
        s[(0, 6)] = lin[k][1];
        s[(3, 3)] = lin[k][0];
        s[(3, 9)] = lin[k][1];
        // u_y with slope θz
        s[(1, 1)] = h[k][0];
        s[(1, 5)] = h[k][1];
        s[(1, 7)] = h[k][2];
        s[(1, 11)] = h[k][3];
        // u_z with slope −θy
        s[(2, 2)] = h[k][0];
        s[(2, 4)] = -h[k][1];
        s[(2, 8)] = h[k][2];
        s[(2, 10)] = -h[k][3];
        // rotations follow the slopes: θz = u_y', θy = −u_z'
        for (idx, col) in [1usize, 5, 7, 11].into_iter().enumerate() {
            s[(5, col)] = h[k + 1][idx] / l;
        }
        for (idx, (col, sign)) in [(2usize, 1.0), (4, -1.0), (8, 1.0), (10, -1.0)].into_iter().enumerate() {
            s[(4, col)] = -sign * h[k + 1][idx] / l;
        }
        s
    })
}

/// Local 12×12 stiffness, consistent mass and self-weight load of a frame
/// element, integrated from [`frame_shape`]. `q` is the distributed load in
/// local axes.
pub fn frame_element_local(section: &BeamSection, l: f64, q: &Vector3<f64>) -> (SMatrix<f64, 12, 12>, SMatrix<f64, 12, 12>, SMatrix<f64, 12, 1>) {
    let ea = section.e * section.a;
    let gj = section.g * section.i_t;
    let ei_y = section.e * section.i_n;
    let ei_z = section.e * section.i_b;
    let rho = section.rho_lin;
    let rho_t = section.rho_lin / section.a * section.i_t;
    let (gx, gw) = gauss_legendre(4);
    let mut k = SMatrix::<f64, 12, 12>::zeros();
    let mut m = SMatrix::<f64, 12, 12>::zeros();
    let mut p = SMatrix::<f64, 12, 1>::zeros();
    for (x, w) in gx.iter().zip(&gw) {
        let xi = 0.5 * (1.0 + x);
        let wl = 0.5 * w * l;
        let s = frame_shape(xi, l);
        // strain rows: u_x', θ_x', u_y'', u_z''
        let d1 = s[1] / l;
        let d2 = s[2] / (l * l);
        let rows = [(d1.row(0).into_owned(), ea), (d1.row(3).into_owned(), gj), (d2.row(1).into_owned(), ei_z), (d2.row(2).into_owned(), ei_y)];
        for (r, stiff) in rows {
            k += r.transpose() * r * (stiff * wl);
        }
        for (row, dens) in [(0usize, rho), (1, rho), (2, rho), (3, rho_t)] {
            let r = s[0].row(row);
            m += r.transpose() * r * (dens * wl);
        }
        for comp in 0..3 {
            p += s[0].row(comp).transpose() * (q[comp] * wl);
        }
    }
    (k, m, p)
}

impl FemMesh {
    /// Nodes placed uniformly within each plan span (or along the whole path
    /// when it has no plan), at stations on the fitted curve.
    pub fn build(path: &Path, elements_per_span: usize) -> Result<Self> {
        if elements_per_span == 0 {
            return Err(Error::InvalidArgument("elements_per_span must be positive".into()));
        }
        let length = path.length();
        let joints: Vec<f64> = match path.plan() {
            Some(plan) => {
                let scale = length / plan.total_length();
                plan.joints().iter().map(|j| j * scale).collect()
            }
            None => vec![0.0, length],
        };
        let mut node_s = vec![0.0];
        for w in joints.windows(2) {
            for i in 1..=elements_per_span {
                node_s.push(w[0] + (w[1] - w[0]) * i as f64 / elements_per_span as f64);
            }
        }
        *node_s.last_mut().expect("nodes") = length;
        let nodes: Vec<PathPoint> = node_s.iter().map(|&s| path.point_at(s)).collect::<Result<_>>()?;
        let mut elements = Vec::with_capacity(nodes.len() - 1);
        for i in 0..nodes.len() - 1 {
            let (pa, pb) = (&nodes[i], &nodes[i + 1]);
            let chord = pb.frame.origin - pa.frame.origin;
            let l = chord.norm();
            if l <= 0.0 {
                return Err(Error::InvalidArgument(format!("zero-length frame element {i}")));
            }
            let ex = chord / l;
            let bz = pa.frame.b + pb.frame.b;
            let ez = (bz - ex * bz.dot(&ex)).normalize();
            let ey = ez.cross(&ex);
            let axes = Matrix3::from_columns(&[ex, ey, ez]);
            let ra = axes.transpose() * pa.frame.rotation();
            let rb = axes.transpose() * pb.frame.rotation();
            let mut gamma = SMatrix::<f64, 12, 12>::zeros();
            for (blk, r) in [ra, ra, rb, rb].iter().enumerate() {
                gamma.fixed_view_mut::<3, 3>(3 * blk, 3 * blk).copy_from(r);
            }
            elements.push(FemElement { nodes: (i, i + 1), s: (node_s[i], node_s[i + 1]), length: l, axes, gamma });
        }
        Ok(Self { nodes, node_s, elements })
    }

    fn locate(&self, s: f64, side: Side) -> usize {
        let n = self.elements.len();
        let tol = 1e-10 * self.node_s[n];
        let idx = self.node_s.partition_point(|&x| x <= s);
        // snap to a node within round-off so the side choice is honoured
        let near = if idx < self.node_s.len() && self.node_s[idx] - s <= tol { idx } else { idx.saturating_sub(1) };
        if (self.node_s[near] - s).abs() <= tol {
            return match side {
                Side::Left => near.saturating_sub(1),
                Side::Right => near.min(n - 1),
            };
        }
        idx.saturating_sub(1).min(n - 1)
    }

    fn field_rows(&self, path: &Path, s: f64, side: Side, order: usize) -> Result<Vec<[SparseRow; 6]>> {
        if order > 2 {
            return Err(Error::InvalidArgument("field derivatives above second order are not available".into()));
        }
        let length = path.length();
        if !(s >= -1e-9 * length && s <= length * (1.0 + 1e-9)) {
            return Err(Error::OffPath { s, length });
        }
        let s = s.clamp(0.0, length);
        let el = &self.elements[self.locate(s, side)];
        let ds = el.s.1 - el.s.0;
        let xi = ((s - el.s.0) / ds).clamp(0.0, 1.0);
        let shapes = frame_shape(xi, el.length);
        // global interpolation operators for d^k/ds^k of [u; θ] (6 × 12 nodal DOFs)
        let q6 = {
            let mut q = SMatrix::<f64, 6, 6>::zeros();
            q.fixed_view_mut::<3, 3>(0, 0).copy_from(&el.axes);
            q.fixed_view_mut::<3, 3>(3, 3).copy_from(&el.axes);
            q
        };
        let g: [SMatrix<f64, 6, 12>; 3] = std::array::from_fn(|k| q6 * shapes[k] * el.gamma / ds.powi(k as i32));
        let pt = path.point_at_xi(path.xi_of_s(s)?, side)?;
        let frame_ders = frame_derivatives(&pt);
        let dofs: Vec<usize> = (DOFS_PER_POINT * el.nodes.0..DOFS_PER_POINT * (el.nodes.0 + 2)).collect();
        let mut out = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let rows: [SparseRow; 6] = std::array::from_fn(|c| {
                let (block, axis) = (c / 3, c % 3);
                let mut row = SMatrix::<f64, 1, 12>::zeros();
                // Leibniz rule on e_c(s) · (interpolated vector)
                for j in 0..=k {
                    let binom = if j == 0 || j == k { 1.0 } else { 2.0 };
                    let e = frame_ders[k - j][axis];
                    let part = g[j].fixed_view::<3, 12>(3 * block, 0);
                    row += e.transpose() * part * binom;
                }
                dofs.iter().enumerate().map(|(a, &d)| (d, row[a])).collect()
            });
            out.push(rows);
        }
        Ok(out)
    }
}

/// `[order][axis]`: arclength derivatives (0..=2) of the frame vectors t, n, b.
fn frame_derivatives(p: &PathPoint) -> [[Vector3<f64>; 3]; 3] {
    let (t, n, b) = (p.frame.t, p.frame.n, p.frame.b);
    let (k, dk, tau, dtau) = (p.kappa, p.dkappa_ds, p.tau, p.dtau_ds);
    let dt = n * k;
    let dn = -t * k + b * tau;
    let db = -n * tau;
    let ddt = n * dk + dn * k;
    let ddn = -t * dk - dt * k + b * dtau + db * tau;
    let ddb = -n * dtau - dn * tau;
    [[t, n, b], [dt, dn, db], [ddt, ddn, ddb]]
}

/// Assembles full FEM mass, stiffness and self-weight load in nodal Frenet DOFs.
pub fn assemble_fem(mesh: &FemMesh, section: &BeamSection) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let ndof = DOFS_PER_POINT * mesh.nodes.len();
    let mut m = DMatrix::zeros(ndof, ndof);
    let mut k = DMatrix::zeros(ndof, ndof);
    let mut load = DVector::zeros(ndof);
    let weight = UP * (-section.rho_lin * 9.81);
    for el in &mesh.elements {
        let q = el.axes.transpose() * weight / section.rho_lin;
        let (kl, ml, pl) = frame_element_local(section, el.length, &(q * section.rho_lin));
        let ke = el.gamma.transpose() * kl * el.gamma;
        let me = el.gamma.transpose() * ml * el.gamma;
        let pe = el.gamma.transpose() * pl;
        let base = DOFS_PER_POINT * el.nodes.0;
        for i in 0..12 {
            load[base + i] += pe[i];
            for j in 0..12 {
                k[(base + i, base + j)] += ke[(i, j)];
                m[(base + i, base + j)] += me[(i, j)];
            }
        }
    }
    (m, k, load)
}
