//! Harmonic tools: the half-plane Poisson integral `h0`, the dyadic series
//! `H`, half-disc Dirichlet solves and the boundary functionals `γ1`, `γ2`.
//!
//! `h0` is harmonic in `{x1 > 0}`, equals `x2²` on `{x1 = 0, 1 < x2 < 2}`,
//! vanishes on the rest of the axis and at infinity. `H = Σ_k 4^-k h0(2^k x)`
//! has boundary values `x2²` on `(0, 1)` and satisfies
//! `|H − A1 x1 + A2 x1 x2 ln r| ≤ C r²` on `B_r ∩ {x1 > 0}` with the natural
//! logarithm normalisation `A2 = ∂12 h0(0) / ln 2`.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::io::Write;
use std::sync::Arc;

use quadrature::double_exponential;

use crate::error::{LabError, Result};
use crate::grid::{Lattice, ScalarField};
use crate::report::fmt_num;
use crate::thresholds;

/// Requested absolute accuracy of the Poisson quadratures.
const QUAD_TOL: f64 = 1e-13;

fn require_half_plane(x1: f64) -> Result<()> {
    if !(x1 > 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "the point must satisfy x1 > 0, got x1 = {x1}"
        )));
    }
    Ok(())
}

/// `h0(x) = (x1/π) ∫_1^2 t² / ((x2 − t)² + x1²) dt`.
///
/// The substitution `t = x2 + x1 tan φ` turns the kernel into `dφ/π`, so the
/// integrand is the bounded function `t(φ)²` even when `x1` is tiny.
pub fn h0_eval(x: &[f64]) -> Result<f64> {
    require_half_plane(x[0])?;
    Ok(h0_unchecked(x[0], x[1]))
}

fn h0_unchecked(x1: f64, x2: f64) -> f64 {
    let p1 = ((1.0 - x2) / x1).atan();
    let p2 = ((2.0 - x2) / x1).atan();
    let r = double_exponential::integrate(
        |p| {
            let t = x2 + x1 * p.tan();
            t * t
        },
        p1,
        p2,
        QUAD_TOL,
    );
    r.integral / PI
}

/// Boundary data of `h0` on `{x1 = 0, 1 < x2 < 2}`.
fn boundary_g(t: f64) -> f64 {
    t * t
}

/// `(A1, A2)` with `A1 = ∂1 h0(0)` and `A2 = ∂12 h0(0) / ln 2`, both by
/// differentiating the Poisson integral under the integral sign.
pub fn aux_constants() -> (f64, f64) {
    (aux_a1(), aux_d12() / LN_2)
}

/// `∂1 h0(0) = (1/π) ∫_1^2 g(t) / t² dt` with `g(t) = t²`.
pub fn aux_a1() -> f64 {
    double_exponential::integrate(|t| boundary_g(t) / (t * t), 1.0, 2.0, QUAD_TOL).integral / PI
}

/// `∂12 h0(0) = (2/π) ∫_1^2 g(t) / t³ dt` with `g(t) = t²`.
pub fn aux_d12() -> f64 {
    2.0 * double_exponential::integrate(|t| boundary_g(t) / (t * t * t), 1.0, 2.0, QUAD_TOL)
        .integral
        / PI
}

/// Partial sum `Σ_{k=1}^{K} 4^-k h0(2^k x)`.
pub fn aux_h_eval(x: &[f64], terms: usize) -> Result<f64> {
    require_half_plane(x[0])?;
    if terms == 0 {
        return Err(LabError::InvalidArgument(
            "at least one term is required".into(),
        ));
    }
    let mut acc = 0.0;
    let mut scale = 1.0;
    let mut weight = 1.0;
    for _ in 0..terms {
        scale *= 2.0;
        weight *= 0.25;
        acc += weight * h0_unchecked(scale * x[0], scale * x[1]);
    }
    Ok(acc)
}

/// Bound on the omitted tail `Σ_{k>K} 4^-k h0(2^k x)` from `0 ≤ h0 ≤ 4`.
pub fn aux_tail_bound(terms: usize) -> f64 {
    4.0 / 3.0 * 0.25_f64.powi(terms as i32)
}

/// Number of series terms used by the remainder check.
pub const REMAINDER_TERMS: usize = 48;

/// Polar sample counts for the remainder supremum.
const REMAINDER_RADIAL: usize = 24;
const REMAINDER_ANGULAR: usize = 48;

/// One row of the remainder table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderRow {
    pub r: f64,
    /// `sup |H − A1 x1 + A2 x1 x2 ln r| / r²` over the samples.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    pub a1: f64,
    pub a2: f64,
    pub rows: Vec<RemainderRow>,
    /// `max C / min C`.
    pub ratio: f64,
    /// Least-squares slope of `C` against `log2(1/r)`.
    pub log_slope: f64,
    pub bounded: bool,
    pub passed: bool,
}

impl RemainderReport {
    /// CSV dump with header `r,C`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,C")?;
        for row in &self.rows {
            writeln!(out, "{},{}", fmt_num(row.r), fmt_num(row.c))?;
        }
        Ok(())
    }
}

/// Remainder constants with an explicit `A2` (use `aux_constants().1` for
/// the genuine check, `0` to drop the logarithmic term).
pub fn aux_remainder_check_with(radii: &[f64], a2: f64) -> Result<RemainderReport> {
    if radii.is_empty() {
        return Err(LabError::InvalidArgument("no radii given".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && **r < 0.5)) {
        return Err(LabError::InvalidArgument(format!(
            "radii must lie in (0, 1/2), got {r}"
        )));
    }
    let a1 = aux_a1();
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut sup: f64 = 0.0;
        for i in 1..=REMAINDER_RADIAL {
            let rho = r * i as f64 / REMAINDER_RADIAL as f64 * (1.0 - 1e-9);
            for j in 0..REMAINDER_ANGULAR {
                let th = -FRAC_PI_2 + PI * (j as f64 + 0.5) / REMAINDER_ANGULAR as f64;
                let x = [rho * th.cos(), rho * th.sin()];
                let hv = aux_h_eval(&x, REMAINDER_TERMS)?;
                let rem = hv - a1 * x[0] + a2 * x[0] * x[1] * r.ln();
                sup = sup.max(rem.abs());
            }
        }
        rows.push(RemainderRow {
            r,
            c: sup / (r * r),
        });
    }
    let max = rows
        .iter()
        .map(|row| row.c)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|row| row.c).fold(f64::INFINITY, f64::min);
    let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
    let log_slope = log_growth_slope(&rows);
    let bounded = ratio <= thresholds::REMAINDER_RATIO;
    let growing = rows.len() >= 3 && log_slope > thresholds::REMAINDER_LOG_SLOPE * max;
    Ok(RemainderReport {
        a1,
        a2,
        rows,
        ratio,
        log_slope,
        bounded,
        passed: bounded && !growing,
    })
}

/// Remainder check with the computed constants.
pub fn aux_remainder_check(radii: &[f64]) -> Result<RemainderReport> {
    aux_remainder_check_with(radii, aux_constants().1)
}

/// Slope of the least-squares line through `(log2(1/r), C)`.
fn log_growth_slope(rows: &[RemainderRow]) -> f64 {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = rows.iter().map(|row| -row.r.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = rows.iter().map(|row| row.c).sum::<f64>() / n;
    let sxy: f64 = xs
        .iter()
        .zip(rows)
        .map(|(x, row)| (x - mx) * (row.c - my))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Bounded data on an arc or on the unit circle, as a function of the
/// polar angle.
#[derive(Clone)]
pub struct BoundaryFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    bound: f64,
}

impl std::fmt::Debug for BoundaryFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryFunction")
            .field("bound", &self.bound)
            .finish()
    }
}

impl BoundaryFunction {
    /// Wraps `f` with the claimed bound `|f| ≤ bound`.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, bound: f64) -> Result<Self> {
        if !bound.is_finite() || bound < 0.0 {
            return Err(LabError::InvalidArgument(format!(
                "boundary functions need a finite bound, got {bound}"
            )));
        }
        Ok(Self {
            f: Arc::new(f),
            bound,
        })
    }

    /// `Σ_n cos[n] cos(nθ) + sin[n] sin(nθ)`.
    pub fn fourier(cos: &[f64], sin: &[f64]) -> Self {
        let (c, s) = (cos.to_vec(), sin.to_vec());
        let bound = c.iter().chain(&s).map(|v| v.abs()).sum();
        Self {
            f: Arc::new(move |th| fourier_value(&c, &s, th)),
            bound,
        }
    }

    pub fn zero() -> Self {
        Self::fourier(&[], &[])
    }

    pub fn eval(&self, theta: f64) -> f64 {
        (self.f)(theta)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &BoundaryFunction, b: f64) -> Self {
        let (f, g) = (self.f.clone(), other.f.clone());
        Self {
            f: Arc::new(move |th| a * f(th) + b * g(th)),
            bound: a.abs() * self.bound + b.abs() * other.bound,
        }
    }
}

/// Truncated Fourier series value.
pub fn fourier_value(cos: &[f64], sin: &[f64], theta: f64) -> f64 {
    let c: f64 = cos
        .iter()
        .enumerate()
        .map(|(n, a)| a * (n as f64 * theta).cos())
        .sum();
    let s: f64 = sin
        .iter()
        .enumerate()
        .map(|(n, b)| b * (n as f64 * theta).sin())
        .sum();
    c + s
}

/// Result of a half-disc solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfDiscSolution {
    pub field: ScalarField,
    pub sweeps: usize,
    /// Largest normalised residual `|u − stencil average|` at the end.
    pub residual: f64,
    pub converged: bool,
}

/// Stencil of one half-disc node: neighbour weights and the constant part
/// contributed by Dirichlet data.
struct HalfDiscRow {
    node: usize,
    diag: f64,
    nbrs: Vec<(usize, f64)>,
    constant: f64,
}

/// Residual target of the half-disc solve.
pub const HALFDISC_RESIDUAL: f64 = 1e-10;

/// Solves `Δh = 0` in `B_1 ∩ {x1 > 0}` with `h = f` on the arc and `h = 0`
/// on the diameter, by SOR on the 5-point stencil with Shortley–Weller arms
/// at the arc.
pub fn halfdisc_dirichlet(
    boundary: &BoundaryFunction,
    lattice: Lattice,
) -> Result<HalfDiscSolution> {
    if lattice.dim() != 2 || lattice.half_width() < 1.0 {
        return Err(LabError::InvalidArgument(
            "the half-disc solve needs a planar lattice covering the unit disc".into(),
        ));
    }
    if !boundary.bound().is_finite() {
        return Err(LabError::InvalidArgument("unbounded boundary data".into()));
    }
    let h = lattice.spacing();
    let inside = |p: &[f64; 2]| p[0] > 1e-12 && p[0] * p[0] + p[1] * p[1] < 1.0;
    let mask: Vec<bool> = lattice.points().map(|(_, p)| inside(&p)).collect();
    let mut rows = Vec::new();
    for (node, p) in lattice.points() {
        if !mask[node] {
            continue;
        }
        let mut diag = 0.0;
        let mut nbrs = Vec::new();
        let mut constant = 0.0;
        for axis in 0..2 {
            // arm lengths and their end values (Some(node) or data)
            let mut arms = [(h, None, 0.0); 2];
            for (slot, step) in [(0usize, -1isize), (1, 1)] {
                let j = lattice.step(node, axis, step).expect("interior node");
                let q = lattice.point(j);
                if mask[j] {
                    arms[slot] = (h, Some(j), 0.0);
                } else if q[0] <= 1e-12 && q[0] * q[0] + q[1] * q[1] < 1.0 {
                    // diameter node: zero data at full distance
                    arms[slot] = (h, None, 0.0);
                } else {
                    // distance to the unit circle along the axis
                    let s = step as f64;
                    let (a, b) = if axis == 0 {
                        (p[0], p[1])
                    } else {
                        (p[1], p[0])
                    };
                    let t = ((1.0 - b * b).max(0.0).sqrt() - s * a).abs();
                    let t = t.clamp(1e-6 * h, h);
                    let mut hit = p;
                    hit[axis] += s * t;
                    let theta = hit[1].atan2(hit[0]);
                    arms[slot] = (t, None, boundary.eval(theta));
                }
            }
            let (hl, hr) = (arms[0].0, arms[1].0);
            let wl = 2.0 / (hl * (hl + hr));
            let wr = 2.0 / (hr * (hl + hr));
            diag += wl + wr;
            for (w, arm) in [(wl, arms[0]), (wr, arms[1])] {
                match arm.1 {
                    Some(j) => nbrs.push((j, w)),
                    None => constant += w * arm.2,
                }
            }
        }
        rows.push(HalfDiscRow {
            node,
            diag,
            nbrs,
            constant,
        });
    }
    let mut values = vec![0.0; lattice.len()];
    for (node, p) in lattice.points() {
        if !mask[node] && p[0] > 1e-12 {
            values[node] = boundary.eval(p[1].atan2(p[0]));
        }
    }
    let omega = 2.0 / (1.0 + (PI * h).sin());
    let max_sweeps = 400 * lattice.per_axis();
    let mut sweeps = 0;
    let mut converged = false;
    let relax = |values: &mut [f64]| -> f64 {
        let mut max_update: f64 = 0.0;
        for row in &rows {
            let s: f64 = row.nbrs.iter().map(|&(j, w)| w * values[j]).sum::<f64>() + row.constant;
            let target = s / row.diag;
            let delta = omega * (target - values[row.node]);
            values[row.node] += delta;
            max_update = max_update.max(delta.abs());
        }
        max_update
    };
    while sweeps < max_sweeps {
        let upd = relax(&mut values);
        sweeps += 1;
        if upd < 0.01 * HALFDISC_RESIDUAL {
            converged = true;
            break;
        }
    }
    let residual = rows
        .iter()
        .map(|row| {
            let s: f64 = row.nbrs.iter().map(|&(j, w)| w * values[j]).sum::<f64>() + row.constant;
            (s / row.diag - values[row.node]).abs()
        })
        .fold(0.0, f64::max);
    let field = ScalarField::with_mask(lattice, values, mask)?;
    Ok(HalfDiscSolution {
        field,
        sweeps,
        residual,
        converged: converged && residual <= HALFDISC_RESIDUAL,
    })
}

/// Default spacing of the half-disc solves behind the γ functionals.
pub const GAMMA_SPACING: f64 = 1.0 / 128.0;

/// `(γ1, γ2) = (∂1 h(0), ∂12 h(0))` of the half-disc harmonic extension.
pub fn gamma_functionals(f: &BoundaryFunction) -> Result<(f64, f64)> {
    gamma_functionals_with(f, GAMMA_SPACING)
}

/// As [`gamma_functionals`] on a lattice of the given spacing. Difference
/// quotients with offsets `4h` and `8h` are combined by one Richardson step.
pub fn gamma_functionals_with(f: &BoundaryFunction, spacing: f64) -> Result<(f64, f64)> {
    let lattice = Lattice::new(2, 1.0 + 2.0 * spacing, spacing)?;
    let sol = halfdisc_dirichlet(f, lattice)?;
    if !sol.converged {
        return Err(LabError::InvalidArgument(format!(
            "half-disc solve did not converge (residual {:e})",
            sol.residual
        )));
    }
    let u = &sol.field;
    let at = |x1: f64, x2: f64| -> Result<f64> {
        let node = lattice
            .node_at(&[x1, x2])
            .ok_or_else(|| LabError::InvalidArgument("stencil point is not a node".into()))?;
        Ok(u.value(node))
    };
    let g1 = |d: f64| -> Result<f64> { Ok(at(d, 0.0)? / d) };
    let g2 = |d: f64| -> Result<f64> { Ok((at(d, d)? - at(d, -d)?) / (2.0 * d * d)) };
    let (d1, d2) = (4.0 * spacing, 8.0 * spacing);
    let gamma1 = (4.0 * g1(d1)? - g1(d2)?) / 3.0;
    let gamma2 = (4.0 * g2(d1)? - g2(d2)?) / 3.0;
    Ok((gamma1, gamma2))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form antiderivative oracle for `h0`.
    fn h0_closed(x1: f64, x2: f64) -> f64 {
        let g = |t: f64| {
            t + x2 * ((t - x2).powi(2) + x1 * x1).ln()
                + (x2 * x2 - x1 * x1) / x1 * ((t - x2) / x1).atan()
        };
        x1 / PI * (g(2.0) - g(1.0))
    }

    #[test]
    fn h0_matches_closed_form() {
        for &(x1, x2) in &[
            (0.3, 1.2),
            (1e-3, 1.0),
            (2.0, -3.0),
            (0.05, 0.5),
            (5.0, 1.5),
        ] {
            let v = h0_eval(&[x1, x2]).unwrap();
            assert!((v - h0_closed(x1, x2)).abs() < 1e-10, "{x1} {x2}");
        }
    }

    #[test]
    fn h0_boundary_and_decay() {
        assert!((h0_eval(&[1e-6, 1.5]).unwrap() - 2.25).abs() < 1e-3);
        assert!(h0_eval(&[100.0, 0.0]).unwrap() <= 1e-2);
        assert!(h0_eval(&[0.0, 1.0]).is_err());
        assert!(h0_eval(&[-1.0, 1.0]).is_err());
    }

    #[test]
    fn constants() {
        let (a1, a2) = aux_constants();
        assert!((a1 - 1.0 / PI).abs() < 1e-8);
        assert!((aux_d12() - 2.0 * LN_2 / PI).abs() < 1e-8);
        assert!(a1 > 0.0 && a2 > 0.0);
    }

    #[test]
    fn dyadic_series() {
        let v = aux_h_eval(&[1e-6, 0.5], 40).unwrap();
        assert!((v - 0.25).abs() < 1e-3, "{v}");
        assert!(aux_h_eval(&[1e-6, 0.0], 40).unwrap().abs() < 1e-3);
        let d = aux_h_eval(&[0.3, 0.2], 2).unwrap() - aux_h_eval(&[0.3, 0.2], 1).unwrap();
        assert!(d.abs() <= 1.0);
        assert!(aux_h_eval(&[0.3, 0.2], 0).is_err());
    }

    #[test]
    fn remainder_radius_checked() {
        assert!(aux_remainder_check(&[0.75]).is_err());
    }

    #[test]
    fn remainder_needs_the_log_term() {
        let radii: Vec<f64> = (2..10).map(|k| 0.5_f64.powi(k)).collect();
        let with = aux_remainder_check(&radii).unwrap();
        assert!(with.passed, "{:?}", with.rows);
        let without = aux_remainder_check_with(&radii, 0.0).unwrap();
        assert!(without.bounded && !without.passed, "{}", without.log_slope);
    }

    #[test]
    fn gamma_of_harmonic_polynomials() {
        // cos θ extends to x1, sin θ cos θ to x1 x2; the five-point stencil is exact on both
        let f = BoundaryFunction::fourier(&[0.0, 1.0], &[]);
        let (g1, g2) = gamma_functionals_with(&f, 1.0 / 64.0).unwrap();
        assert!((g1 - 1.0).abs() < 1e-6 && g2.abs() < 1e-6);
        let f = BoundaryFunction::fourier(&[], &[0.0, 0.0, 0.5]);
        let (g1, g2) = gamma_functionals_with(&f, 1.0 / 64.0).unwrap();
        assert!(g1.abs() < 1e-6 && (g2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fourier_values() {
        let f = BoundaryFunction::fourier(&[0.0, 1.0], &[0.0, 0.0, 0.5]);
        let th = 0.3_f64;
        assert!((f.eval(th) - (th.cos() + 0.5 * (2.0 * th).sin())).abs() < 1e-15);
        assert_eq!(f.bound(), 1.5);
    }
}
