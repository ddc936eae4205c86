//! Closed-form homogeneous solutions, half-space profile pairs and the
//! approximate solutions built from them.
//!
//! Triples are returned as `(u1, u2, u3)` with `u2 = -u1 - u3`. Pairs are
//! returned in the `(u, w)` convention of the two-obstacle system, where
//! `u = u1` and `w = -u3`.

use nalgebra::{Matrix2, SymmetricEigen};

use crate::error::{LabError, Result};

/// Tolerance on the unit norm of directions.
pub const UNIT_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue in positive semidefiniteness checks.
pub const PSD_TOL: f64 = -1e-10;
/// Tolerance on the symmetric-frame condition of the approximate solutions.
pub const FRAME_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

/// A unit vector in R^d (d = 1 or 2). One-dimensional directions are `±1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    dim: usize,
    c: [f64; 2],
}

impl Direction {
    /// Wraps the components without normalising; `validate_spec` reports
    /// the norm defect.
    pub fn new(components: &[f64]) -> Result<Self> {
        match components.len() {
            1 => Ok(Self {
                dim: 1,
                c: [components[0], 0.0],
            }),
            2 => Ok(Self {
                dim: 2,
                c: [components[0], components[1]],
            }),
            n => Err(LabError::InvalidProfile(format!(
                "directions must have 1 or 2 components, got {n}"
            ))),
        }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self {
            dim: 2,
            c: [theta.cos(), theta.sin()],
        }
    }

    /// The first basis vector `e1` of R^dim.
    pub fn e1(dim: usize) -> Self {
        Self { dim, c: [1.0, 0.0] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.c[i]
    }

    pub fn angle(&self) -> f64 {
        self.c[1].atan2(self.c[0])
    }

    pub fn norm(&self) -> f64 {
        (self.c[0] * self.c[0] + self.c[1] * self.c[1]).sqrt()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        if self.dim == 1 {
            self.c[0] * x[0]
        } else {
            self.c[0] * x[0] + self.c[1] * x[1]
        }
    }

    pub fn distance(&self, other: &Direction) -> f64 {
        ((self.c[0] - other.c[0]).powi(2) + (self.c[1] - other.c[1]).powi(2)).sqrt()
    }
}

/// A symmetric d×d matrix stored as its upper triangle `[m11, m12, m22]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    m: [f64; 3],
}

impl SymMatrix {
    pub fn new_1d(m11: f64) -> Self {
        Self {
            dim: 1,
            m: [m11, 0.0, 0.0],
        }
    }

    pub fn new_2d(m11: f64, m12: f64, m22: f64) -> Self {
        Self {
            dim: 2,
            m: [m11, m12, m22],
        }
    }

    /// `s · I` in dimension `dim`.
    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        if dim == 1 {
            Self::new_1d(s)
        } else {
            Self::new_2d(s, 0.0, s)
        }
    }

    /// Builds from the upper triangle given row by row (1 or 3 entries).
    pub fn from_upper(entries: &[f64]) -> Result<Self> {
        match entries.len() {
            1 => Ok(Self::new_1d(entries[0])),
            3 => Ok(Self::new_2d(entries[0], entries[1], entries[2])),
            n => Err(LabError::InvalidProfile(format!(
                "a symmetric matrix needs 1 or 3 upper-triangle entries, got {n}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn upper(&self) -> &[f64] {
        if self.dim == 1 {
            &self.m[..1]
        } else {
            &self.m
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.m[0],
            (0, 1) => self.m[1],
            (1, 1) => self.m[2],
            _ => 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        if self.dim == 1 {
            self.m[0]
        } else {
            self.m[0] + self.m[2]
        }
    }

    /// `x · M x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        if self.dim == 1 {
            self.m[0] * x[0] * x[0]
        } else {
            self.m[0] * x[0] * x[0] + 2.0 * self.m[1] * x[0] * x[1] + self.m[2] * x[1] * x[1]
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        self.combine(1.0, other, 1.0)
    }

    /// `s·self + t·other`.
    pub fn combine(&self, s: f64, other: &SymMatrix, t: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            m: [
                s * self.m[0] + t * other.m[0],
                s * self.m[1] + t * other.m[1],
                s * self.m[2] + t * other.m[2],
            ],
        }
    }

    /// `e ⊗ e`.
    pub fn outer(e: &Direction) -> SymMatrix {
        SymMatrix {
            dim: e.dim(),
            m: [
                e.get(0) * e.get(0),
                e.get(0) * e.get(1),
                e.get(1) * e.get(1),
            ],
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 1 {
            return self.m[0];
        }
        let mat = Matrix2::new(self.m[0], self.m[1], self.m[1], self.m[2]);
        SymmetricEigen::new(mat).eigenvalues.min()
    }
}

/// Closed-form profile descriptors.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    /// Stable half-space solution.
    SH {
        e: Direction,
    },
    /// Unstable half-space solution.
    UH {
        e: Direction,
    },
    /// Hybrid solution with the half-space term in `u1`.
    HybridEB {
        e: Direction,
        b: SymMatrix,
    },
    /// Hybrid solution with the half-space term in `u3`.
    HybridBE {
        b: SymMatrix,
        e: Direction,
    },
    Parabola {
        a: SymMatrix,
        b: SymMatrix,
    },
    /// `(½max(x·α−a,0)², ½max(x·β−b,0)²)`.
    HalfPairR {
        alpha: Direction,
        beta: Direction,
        a: f64,
        b: f64,
    },
    /// Shifted unstable pair.
    HalfPairS {
        alpha: Direction,
        beta: Direction,
        a: f64,
        b: f64,
    },
    Approx1 {
        alpha: Direction,
        beta: Direction,
        a: f64,
        b: f64,
    },
    Approx2 {
        alpha: Direction,
        beta: Direction,
        a: f64,
        b: f64,
    },
    /// `½max(x·α−a,0)²`, a solution of the one-phase obstacle problem.
    ObstacleHalf {
        alpha: Direction,
        a: f64,
    },
}

impl ProfileSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileSpec::SH { .. } => "SH",
            ProfileSpec::UH { .. } => "UH",
            ProfileSpec::HybridEB { .. } => "HybridEB",
            ProfileSpec::HybridBE { .. } => "HybridBE",
            ProfileSpec::Parabola { .. } => "Parabola",
            ProfileSpec::HalfPairR { .. } => "HalfPairR",
            ProfileSpec::HalfPairS { .. } => "HalfPairS",
            ProfileSpec::Approx1 { .. } => "Approx1",
            ProfileSpec::Approx2 { .. } => "Approx2",
            ProfileSpec::ObstacleHalf { .. } => "ObstacleHalf",
        }
    }

    /// Spatial dimension implied by the parameters.
    pub fn dim(&self) -> usize {
        match self {
            ProfileSpec::SH { e } | ProfileSpec::UH { e } => e.dim(),
            ProfileSpec::HybridEB { e, .. } | ProfileSpec::HybridBE { e, .. } => e.dim(),
            ProfileSpec::Parabola { a, .. } => a.dim(),
            ProfileSpec::HalfPairR { alpha, .. }
            | ProfileSpec::HalfPairS { alpha, .. }
            | ProfileSpec::Approx1 { alpha, .. }
            | ProfileSpec::Approx2 { alpha, .. }
            | ProfileSpec::ObstacleHalf { alpha, .. } => alpha.dim(),
        }
    }

    /// Evaluates without validating the spec. Use [`eval_profile`] for a
    /// checked call.
    pub fn evaluate(&self, x: &[f64]) -> ProfileValue {
        match self {
            ProfileSpec::SH { e } => {
                let u1 = 0.5 * pos(e.dot(x)).powi(2);
                triple(u1, -u1)
            }
            ProfileSpec::UH { e } => {
                let t = e.dot(x);
                let (lo, hi) = (neg(t).powi(2), pos(t).powi(2));
                triple(0.5 * lo + 0.25 * hi, -0.25 * lo - 0.5 * hi)
            }
            ProfileSpec::HybridEB { e, b } => {
                let q = b.quad(x);
                triple(0.25 * pos(e.dot(x)).powi(2) + 0.25 * q, -0.5 * q)
            }
            ProfileSpec::HybridBE { b, e } => {
                let q = b.quad(x);
                triple(0.5 * q, -0.25 * pos(e.dot(x)).powi(2) - 0.25 * q)
            }
            ProfileSpec::Parabola { a, b } => triple(0.5 * a.quad(x), 0.5 * b.quad(x)),
            ProfileSpec::HalfPairR { alpha, beta, a, b } => {
                let (p, q) = half_pair_r(alpha, beta, *a, *b, x);
                ProfileValue::Pair(p, q)
            }
            ProfileSpec::HalfPairS { alpha, beta, a, b } => {
                let (p, q) = half_pair_s(alpha, beta, *a, *b, x);
                ProfileValue::Pair(p, q)
            }
            ProfileSpec::Approx1 { alpha, beta, a, b } => {
                let (p, q) = approx_case1(alpha, beta, *a, *b, x);
                ProfileValue::Pair(p, q)
            }
            ProfileSpec::Approx2 { alpha, beta, a, b } => {
                let (p, q) = approx_case2(alpha, beta, *a, *b, x);
                ProfileValue::Pair(p, q)
            }
            ProfileSpec::ObstacleHalf { alpha, a } => {
                ProfileValue::Scalar(0.5 * pos(alpha.dot(x) - a).powi(2))
            }
        }
    }
}

fn triple(u1: f64, u3: f64) -> ProfileValue {
    ProfileValue::Triple([u1, -u1 - u3, u3])
}

#[inline]
fn pos(t: f64) -> f64 {
    t.max(0.0)
}

#[inline]
fn neg(t: f64) -> f64 {
    t.min(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileValue {
    Triple([f64; 3]),
    Pair(f64, f64),
    Scalar(f64),
}

impl ProfileValue {
    /// The `(u, w)` pair view: `(u1, -u3)` for triples.
    pub fn pair(&self) -> Option<(f64, f64)> {
        match *self {
            ProfileValue::Triple(t) => Some((t[0], -t[2])),
            ProfileValue::Pair(p, q) => Some((p, q)),
            ProfileValue::Scalar(_) => None,
        }
    }

    pub fn triple(&self) -> Option<[f64; 3]> {
        match *self {
            ProfileValue::Triple(t) => Some(t),
            _ => None,
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match *self {
            ProfileValue::Scalar(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub passed: bool,
    /// Signed slack: non-negative when satisfied.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub constraints: Vec<Constraint>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.constraints.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Constraint> {
        self.constraints.iter().filter(|c| !c.passed).collect()
    }

    fn push_eq(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        let margin = tol - (value - target).abs();
        self.constraints.push(Constraint {
            name: name.to_string(),
            passed: margin >= 0.0,
            margin,
        });
    }

    fn push_ge(&mut self, name: &str, value: f64, floor: f64) {
        let margin = value - floor;
        self.constraints.push(Constraint {
            name: name.to_string(),
            passed: margin >= 0.0,
            margin,
        });
    }

    fn push_unit(&mut self, name: &str, d: &Direction) {
        self.push_eq(&format!("|{name}| = 1"), d.norm(), 1.0, UNIT_TOL);
    }

    fn push_dim(&mut self, name: &str, dim: usize, expected: usize) {
        self.constraints.push(Constraint {
            name: format!("{name} has dimension {expected}"),
            passed: dim == expected,
            margin: if dim == expected { 0.0 } else { -1.0 },
        });
    }
}

/// Checks the algebraic constraints attached to each profile family.
pub fn validate_spec(spec: &ProfileSpec) -> ValidationReport {
    let mut r = ValidationReport {
        constraints: Vec::new(),
    };
    let dim = spec.dim();
    match spec {
        ProfileSpec::SH { e } | ProfileSpec::UH { e } => r.push_unit("e", e),
        ProfileSpec::HybridEB { e, b } | ProfileSpec::HybridBE { b, e } => {
            r.push_unit("e", e);
            r.push_dim("B", b.dim(), dim);
            r.push_eq("trace(B) = 1", b.trace(), 1.0, TRACE_TOL);
            let m = b.combine(3.0, &SymMatrix::outer(e), -1.0);
            r.push_ge("3B - e⊗e ⪰ 0", m.min_eigenvalue(), PSD_TOL);
        }
        ProfileSpec::Parabola { a, b } => {
            r.push_dim("B", b.dim(), dim);
            r.push_eq("trace(A) = 1", a.trace(), 1.0, TRACE_TOL);
            r.push_eq("trace(B) = -1", b.trace(), -1.0, TRACE_TOL);
            r.push_ge(
                "2A + B ⪰ 0",
                a.combine(2.0, b, 1.0).min_eigenvalue(),
                PSD_TOL,
            );
            r.push_ge(
                "A + 2B ⪯ 0",
                a.combine(-1.0, b, -2.0).min_eigenvalue(),
                PSD_TOL,
            );
        }
        ProfileSpec::HalfPairR { alpha, beta, a, b }
        | ProfileSpec::HalfPairS { alpha, beta, a, b }
        | ProfileSpec::Approx1 { alpha, beta, a, b }
        | ProfileSpec::Approx2 { alpha, beta, a, b } => {
            r.push_unit("alpha", alpha);
            r.push_unit("beta", beta);
            r.push_dim("beta", beta.dim(), dim);
            r.push_ge(
                "a, b finite",
                if a.is_finite() && b.is_finite() {
                    0.0
                } else {
                    -1.0
                },
                0.0,
            );
            if matches!(
                spec,
                ProfileSpec::Approx1 { .. } | ProfileSpec::Approx2 { .. }
            ) {
                let defect = frame_defect(alpha, beta);
                r.push_ge("symmetric frame", FRAME_TOL - defect, 0.0);
            }
        }
        ProfileSpec::ObstacleHalf { alpha, a } => {
            r.push_unit("alpha", alpha);
            r.push_ge("a finite", if a.is_finite() { 0.0 } else { -1.0 }, 0.0);
        }
    }
    r
}

/// Validates `spec` and evaluates it at `point`.
pub fn eval_profile(spec: &ProfileSpec, point: &[f64]) -> Result<ProfileValue> {
    let report = validate_spec(spec);
    if !report.passed() {
        let names: Vec<String> = report
            .failures()
            .iter()
            .map(|c| format!("{} (margin {:e})", c.name, c.margin))
            .collect();
        return Err(LabError::InvalidProfile(format!(
            "{} violates {}",
            spec.name(),
            names.join(", ")
        )));
    }
    if point.len() != spec.dim() {
        return Err(LabError::InvalidArgument(format!(
            "point has {} coordinates, profile is {}-dimensional",
            point.len(),
            spec.dim()
        )));
    }
    Ok(spec.evaluate(point))
}

/// Distance of `(α, β)` from the frame `α1 = β1 > 0`, `α2 = -β2 ≥ 0`.
/// Returns infinity when `α1 ≤ 0`.
pub fn frame_defect(alpha: &Direction, beta: &Direction) -> f64 {
    if alpha.get(0) <= 0.0 || beta.get(0) <= 0.0 {
        return f64::INFINITY;
    }
    let d1 = (alpha.get(0) - beta.get(0)).abs();
    let d2 = (alpha.get(1) + beta.get(1)).abs();
    let sign = (-alpha.get(1)).max(0.0);
    d1.max(d2).max(sign)
}

fn half_pair_r(alpha: &Direction, beta: &Direction, a: f64, b: f64, x: &[f64]) -> (f64, f64) {
    (
        0.5 * pos(alpha.dot(x) - a).powi(2),
        0.5 * pos(beta.dot(x) - b).powi(2),
    )
}

fn half_pair_s(alpha: &Direction, beta: &Direction, a: f64, b: f64, x: &[f64]) -> (f64, f64) {
    let s = alpha.dot(x) - a;
    let t = beta.dot(x) - b;
    (
        0.5 * neg(s).powi(2) + 0.25 * pos(t).powi(2),
        0.25 * neg(s).powi(2) + 0.5 * pos(t).powi(2),
    )
}

/// `(2α - β)·x` and `(2β - α)·x`.
fn crossed(alpha: &Direction, beta: &Direction, x: &[f64]) -> (f64, f64) {
    let ax = alpha.dot(x);
    let bx = beta.dot(x);
    (2.0 * ax - bx, 2.0 * bx - ax)
}

fn x2(x: &[f64]) -> f64 {
    if x.len() > 1 {
        x[1]
    } else {
        0.0
    }
}

fn approx_case1(alpha: &Direction, beta: &Direction, a: f64, b: f64, x: &[f64]) -> (f64, f64) {
    let s = alpha.dot(x) - a;
    let t = beta.dot(x) - b;
    let k = 2.0 * alpha.get(1) * x2(x) - a + b;
    let (c_ab, c_ba) = crossed(alpha, beta, x);
    if alpha.get(1) * x2(x) >= 0.5 * (a - b) {
        let phi = 0.5 * pos(s).powi(2);
        let psi = if c_ba < 2.0 * b - a {
            0.25 * pos(s).powi(2)
        } else {
            0.5 * t * t + 0.5 * k * k
        };
        (phi, psi)
    } else {
        let phi = if c_ab < 2.0 * a - b {
            0.25 * pos(t).powi(2)
        } else {
            0.5 * s * s + 0.5 * k * k
        };
        (phi, 0.5 * pos(t).powi(2))
    }
}

fn approx_case2(alpha: &Direction, beta: &Direction, a: f64, b: f64, x: &[f64]) -> (f64, f64) {
    if alpha.get(1) * x2(x) >= 0.5 * (a - b) {
        return half_pair_s(alpha, beta, a, b, x);
    }
    let s = alpha.dot(x) - a;
    let t = beta.dot(x) - b;
    let k = 2.0 * alpha.get(1) * x2(x) - a + b;
    let (c_ab, c_ba) = crossed(alpha, beta, x);
    let phi = if c_ab < 2.0 * a - b {
        0.5 * s * s + k * k
    } else {
        0.25 * t * t + 0.5 * k * k
    };
    let psi = if c_ba < 2.0 * b - a {
        0.25 * s * s + 0.5 * k * k
    } else {
        0.5 * t * t + k * k
    };
    (phi, psi)
}

/// Which approximate-solution construction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxCase {
    /// Built on the stable pair (regular points).
    One,
    /// Built on the unstable pair (singular points of type 1).
    Two,
}

impl ApproxCase {
    pub fn from_index(case: u8) -> Result<Self> {
        match case {
            1 => Ok(ApproxCase::One),
            2 => Ok(ApproxCase::Two),
            other => Err(LabError::InvalidArgument(format!(
                "approximate solution case must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Evaluates the approximate solution `(Φ, Ψ)`; `(α, β)` must already be in
/// the symmetric frame.
pub fn eval_approx(
    case: ApproxCase,
    alpha: &Direction,
    beta: &Direction,
    a: f64,
    b: f64,
    point: &[f64],
) -> Result<(f64, f64)> {
    let defect = frame_defect(alpha, beta);
    if defect > FRAME_TOL {
        return Err(LabError::FrameViolation(format!(
            "alpha = {:?}, beta = {:?} (defect {defect:e})",
            alpha.components(),
            beta.components()
        )));
    }
    Ok(match case {
        ApproxCase::One => approx_case1(alpha, beta, a, b, point),
        ApproxCase::Two => approx_case2(alpha, beta, a, b, point),
    })
}

/// An orthogonal change of variables `y = Q x` taking a direction pair to
/// the symmetric frame `α1 = β1 > 0`, `α2 = -β2 ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricFrame {
    dim: usize,
    /// Rows of Q.
    q: [[f64; 2]; 2],
}

impl SymmetricFrame {
    pub fn new(alpha: &Direction, beta: &Direction) -> Result<Self> {
        if alpha.dim() != beta.dim() {
            return Err(LabError::FrameViolation(
                "alpha and beta have different dimensions".into(),
            ));
        }
        if alpha.dim() == 1 {
            let (sa, sb) = (alpha.get(0).signum(), beta.get(0).signum());
            if sa != sb {
                return Err(LabError::FrameViolation(
                    "opposite one-dimensional directions".into(),
                ));
            }
            return Ok(Self {
                dim: 1,
                q: [[sa, 0.0], [0.0, 1.0]],
            });
        }
        let s = [alpha.get(0) + beta.get(0), alpha.get(1) + beta.get(1)];
        let ns = (s[0] * s[0] + s[1] * s[1]).sqrt();
        if ns < 1e-12 {
            return Err(LabError::FrameViolation(
                "alpha = -beta has no bisector".into(),
            ));
        }
        let m = [s[0] / ns, s[1] / ns];
        // Rotation taking the bisector to e1.
        let mut q = [[m[0], m[1]], [-m[1], m[0]]];
        let a2 = q[1][0] * alpha.get(0) + q[1][1] * alpha.get(1);
        if a2 < 0.0 {
            q[1] = [-q[1][0], -q[1][1]];
        }
        Ok(Self { dim: 2, q })
    }

    /// `Q x`.
    pub fn apply(&self, x: &[f64]) -> [f64; 2] {
        if self.dim == 1 {
            [self.q[0][0] * x[0], 0.0]
        } else {
            [
                self.q[0][0] * x[0] + self.q[0][1] * x[1],
                self.q[1][0] * x[0] + self.q[1][1] * x[1],
            ]
        }
    }

    pub fn map_direction(&self, d: &Direction) -> Direction {
        let y = self.apply(d.components());
        Direction {
            dim: self.dim,
            c: if self.dim == 1 { [y[0], 0.0] } else { y },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Approximate solution attached to an arbitrary direction pair: the frame
/// rotation is applied internally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxSolution {
    pub case: ApproxCase,
    frame: SymmetricFrame,
    alpha: Direction,
    beta: Direction,
    pub a: f64,
    pub b: f64,
}

impl ApproxSolution {
    pub fn new(
        case: ApproxCase,
        alpha: &Direction,
        beta: &Direction,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        let frame = SymmetricFrame::new(alpha, beta)?;
        let fa = frame.map_direction(alpha);
        let fb = frame.map_direction(beta);
        // Clean up rounding so the frame test is exact.
        let (fa, fb) = if frame.dim == 1 {
            (Direction::e1(1), Direction::e1(1))
        } else {
            let c1 = 0.5 * (fa.get(0) + fb.get(0));
            let c2 = 0.5 * (fa.get(1) - fb.get(1));
            (
                Direction {
                    dim: 2,
                    c: [c1, c2],
                },
                Direction {
                    dim: 2,
                    c: [c1, -c2],
                },
            )
        };
        if frame_defect(&fa, &fb) > FRAME_TOL {
            return Err(LabError::FrameViolation(format!(
                "rotated pair {:?}, {:?} is not in the symmetric frame",
                fa.components(),
                fb.components()
            )));
        }
        Ok(Self {
            case,
            frame,
            alpha: fa,
            beta: fb,
            a,
            b,
        })
    }

    /// `(Φ, Ψ)(x)` in original coordinates.
    pub fn eval(&self, x: &[f64]) -> (f64, f64) {
        let y = self.frame.apply(x);
        match self.case {
            ApproxCase::One => approx_case1(&self.alpha, &self.beta, self.a, self.b, &y),
            ApproxCase::Two => approx_case2(&self.alpha, &self.beta, self.a, self.b, &y),
        }
    }

    /// The half-space pair `(P, Q)` that this construction approximates.
    pub fn reference_pair(&self, x: &[f64]) -> (f64, f64) {
        let y = self.frame.apply(x);
        match self.case {
            ApproxCase::One => half_pair_r(&self.alpha, &self.beta, self.a, self.b, &y),
            ApproxCase::Two => half_pair_s(&self.alpha, &self.beta, self.a, self.b, &y),
        }
    }
}
