//! Blow-up rescaling, point classification by limiting Weiss energy plus a
//! profile fit, and multiscale angle dynamics of the fitted hyperplanes.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::energy::weiss_at;
use crate::error::{LabError, Result};
use crate::freeboundary::{fit_flatness, nelder_mead, stack_gammas, FitMode, GammaSet};
use crate::grid::{dist, Lattice, Point, ScalarField};
use crate::profiles::{Direction, ProfileSpec, SymMatrix};
use crate::report::fmt_num;
use crate::solver::{worker_pool, MembraneStack};
use crate::thresholds::{
    classification_contact_tolerance, CONFIRM_EPS, ENERGY_BAND, INTERSECTION_CELLS,
    MIN_RADIUS_CELLS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Reg,
    Sing1,
    Sing2,
    Hybrid,
    Undetermined,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::Reg,
        Verdict::Sing1,
        Verdict::Sing2,
        Verdict::Hybrid,
        Verdict::Undetermined,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Reg => "Reg",
            Verdict::Sing1 => "Sing1",
            Verdict::Sing2 => "Sing2",
            Verdict::Hybrid => "Hybrid",
            Verdict::Undetermined => "Undetermined",
        }
    }

    /// Limiting energy of the family in units of `W0`.
    pub fn energy_ratio(&self) -> Option<f64> {
        match self {
            Verdict::Reg => Some(1.0),
            Verdict::Sing1 => Some(1.5),
            Verdict::Hybrid => Some(1.75),
            Verdict::Sing2 => Some(2.0),
            Verdict::Undetermined => None,
        }
    }
}

/// Weiss energy of the stable half-space solution: `1/6` on the line and
/// `π/16` in the plane.
pub fn reference_w0(dim: usize) -> Result<f64> {
    match dim {
        1 => Ok(1.0 / 6.0),
        2 => Ok(PI / 16.0),
        _ => Err(LabError::InvalidArgument(format!(
            "no reference energy in dimension {dim}"
        ))),
    }
}

/// Family whose band `[1 ± ENERGY_BAND]·ratio·W0` contains `energy`, if any.
pub fn energy_verdict(energy: f64, w0: f64) -> Verdict {
    let mut best = (f64::INFINITY, Verdict::Undetermined);
    for v in [
        Verdict::Reg,
        Verdict::Sing1,
        Verdict::Hybrid,
        Verdict::Sing2,
    ] {
        let reference = v.energy_ratio().unwrap() * w0;
        let rel = (energy - reference).abs() / reference;
        if rel < best.0 {
            best = (rel, v);
        }
    }
    if best.0 <= ENERGY_BAND {
        best.1
    } else {
        Verdict::Undetermined
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointClass {
    pub center: Point,
    pub verdict: Verdict,
    /// Weiss energy at `radius`, the limiting-energy estimate.
    pub energy: f64,
    pub radius: f64,
    /// Verdict suggested by the energy alone.
    pub energy_verdict: Verdict,
    /// Best fit within the energy verdict's family.
    pub profile: Option<ProfileSpec>,
    /// Rescaled sup misfit of `profile`; infinite when no fit was made.
    pub epsilon: f64,
}

/// Intersection points `Γ1 ∩ Γ2` of a stack: points of `Γ1` within
/// `INTERSECTION_CELLS·h` of `Γ2`.
pub fn intersection_points(stack: &MembraneStack) -> Result<(GammaSet, GammaSet, Vec<Point>)> {
    let h = stack.lattice().spacing();
    let (g1, g2) = stack_gammas(stack, classification_contact_tolerance(h))?;
    let reach = INTERSECTION_CELLS * h;
    let dim = g1.dim;
    let pts = g1
        .points
        .iter()
        .filter(|p| g2.distance_to(&p[..dim]) <= reach)
        .copied()
        .collect();
    Ok((g1, g2, pts))
}

/// The blow-up rescaling `u_k(center + r y) / r²` on the unit ball.
///
/// The target spacing is `max(h/r, h)`, rounded down to the nearest `1/m`.
/// Nodes whose preimage leaves the source hull (corners of the unit cube
/// outside the ball) are sampled at the nearest hull point.
pub fn rescale_at(stack: &MembraneStack, center: &[f64], r: f64) -> Result<MembraneStack> {
    let lat = stack.lattice();
    let dim = lat.dim();
    if !(r > 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "rescaling radius must be positive, got {r}"
        )));
    }
    let reach = lat.half_width() + 1e-12;
    for axis in 0..dim {
        if (center[axis] - r).abs() > reach || (center[axis] + r).abs() > reach {
            let mut p = center[..dim].to_vec();
            p[axis] += r;
            return Err(LabError::OutsideHull {
                point: p,
                half_width: lat.half_width(),
            });
        }
    }
    let h = lat.spacing();
    let target = (h / r).max(h);
    let m = (1.0 / target).ceil().max(1.0);
    let unit = Lattice::new(dim, 1.0, 1.0 / m)?;
    let hw = lat.half_width();
    let mut fields = Vec::with_capacity(stack.len());
    for f in stack.fields() {
        let mut values = Vec::with_capacity(unit.len());
        for (_, y) in unit.points() {
            let mut x = [0.0; 2];
            for i in 0..dim {
                x[i] = (center[i] + r * y[i]).clamp(-hw, hw);
            }
            values.push(f.interpolate(&x[..dim])? / (r * r));
        }
        fields.push(ScalarField::new(unit, values)?);
    }
    MembraneStack::new(fields, stack.forces().to_vec())
}

/// `(y, v/r²)` samples of one field on the masked nodes of `B_r(center)`.
fn ball_samples(f: &ScalarField, center: &[f64], r: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let lat = f.lattice();
    let dim = lat.dim();
    let mut ys = Vec::new();
    let mut vs = Vec::new();
    for (node, p) in lat.points() {
        if !f.is_masked(node) || dist(&p[..dim], &center[..dim]) >= r {
            continue;
        }
        let y1 = if dim == 2 {
            (p[1] - center[1]) / r
        } else {
            0.0
        };
        ys.push([(p[0] - center[0]) / r, y1]);
        vs.push(f.value(node) / (r * r));
    }
    (ys, vs)
}

/// Least-squares `M` with `v ≈ ½ yᵀ M y`.
fn fit_quadratic(dim: usize, ys: &[[f64; 2]], vs: &[f64]) -> SymMatrix {
    let cols = if dim == 1 { 1 } else { 3 };
    let a = DMatrix::from_fn(ys.len(), cols, |i, j| {
        let y = ys[i];
        match (dim, j) {
            (1, _) => 0.5 * y[0] * y[0],
            (_, 0) => 0.5 * y[0] * y[0],
            (_, 1) => y[0] * y[1],
            _ => 0.5 * y[1] * y[1],
        }
    });
    let b = DVector::from_column_slice(vs);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .expect("both factors were requested");
    if dim == 1 {
        SymMatrix::new_1d(sol[0])
    } else {
        SymMatrix::new_2d(sol[0], sol[1], sol[2])
    }
}

fn sup_misfit(ys: &[[f64; 2]], vs: &[f64], model: impl Fn(&[f64; 2]) -> f64) -> f64 {
    ys.iter()
        .zip(vs)
        .fold(0.0_f64, |m, (y, v)| m.max((v - model(y)).abs()))
}

fn direction_at(dim: usize, theta: f64) -> Direction {
    if dim == 1 {
        Direction::new(&[if theta.cos() >= 0.0 { 1.0 } else { -1.0 }]).unwrap()
    } else {
        Direction::from_angle(theta)
    }
}

/// Best `e` for `v ≈ ¼ max(e·y, 0)²` in sup norm.
fn fit_quarter_half(dim: usize, ys: &[[f64; 2]], vs: &[f64]) -> (Direction, f64) {
    let cost = |theta: f64| {
        let e = direction_at(dim, theta);
        sup_misfit(ys, vs, |y| 0.25 * e.dot(&y[..dim]).max(0.0).powi(2))
    };
    let thetas: Vec<f64> = if dim == 1 {
        vec![0.0, PI]
    } else {
        (0..720).map(|k| TAU * k as f64 / 720.0).collect()
    };
    let (mut best_t, mut best_v) = (0.0, f64::INFINITY);
    for &t in &thetas {
        let v = cost(t);
        if v < best_v {
            (best_t, best_v) = (t, v);
        }
    }
    if dim == 2 {
        let (x, v) = nelder_mead(&|p| cost(p[0]), &[best_t], &[TAU / 720.0], 200, 1e-15);
        if v < best_v {
            (best_t, best_v) = (x[0], v);
        }
    }
    (direction_at(dim, best_t), best_v)
}

/// Parabola fit of `(u1, u3)` on `B_r(center)`.
fn fit_parabola(stack: &MembraneStack, center: &[f64], r: f64) -> (ProfileSpec, f64) {
    let dim = stack.lattice().dim();
    let (ys, v1) = ball_samples(stack.field(0), center, r);
    let (_, v3) = ball_samples(stack.field(2), center, r);
    let a = fit_quadratic(dim, &ys, &v1);
    let b = fit_quadratic(dim, &ys, &v3);
    let e1 = sup_misfit(&ys, &v1, |y| 0.5 * a.quad(&y[..dim]));
    let e3 = sup_misfit(&ys, &v3, |y| 0.5 * b.quad(&y[..dim]));
    (ProfileSpec::Parabola { a, b }, e1.max(e3))
}

/// Hybrid fit over both orderings; returns the better one.
fn fit_hybrid(stack: &MembraneStack, center: &[f64], r: f64) -> (ProfileSpec, f64) {
    let dim = stack.lattice().dim();
    let (ys, v1) = ball_samples(stack.field(0), center, r);
    let (_, v3) = ball_samples(stack.field(2), center, r);

    // u3 = -½ yBy, u1 = ¼ (e·y)₊² + ¼ yBy
    let b_eb = fit_quadratic(dim, &ys, &v3.iter().map(|v| -v).collect::<Vec<_>>());
    let rest: Vec<f64> = ys
        .iter()
        .zip(&v1)
        .map(|(y, v)| v - 0.25 * b_eb.quad(&y[..dim]))
        .collect();
    let (e_eb, m_eb) = fit_quarter_half(dim, &ys, &rest);
    let eps_eb = m_eb.max(sup_misfit(&ys, &v3, |y| -0.5 * b_eb.quad(&y[..dim])));

    // u1 = ½ yBy, u3 = -¼ (e·y)₊² - ¼ yBy
    let b_be = fit_quadratic(dim, &ys, &v1);
    let rest: Vec<f64> = ys
        .iter()
        .zip(&v3)
        .map(|(y, v)| -v - 0.25 * b_be.quad(&y[..dim]))
        .collect();
    let (e_be, m_be) = fit_quarter_half(dim, &ys, &rest);
    let eps_be = m_be.max(sup_misfit(&ys, &v1, |y| 0.5 * b_be.quad(&y[..dim])));

    if eps_eb <= eps_be {
        (ProfileSpec::HybridEB { e: e_eb, b: b_eb }, eps_eb)
    } else {
        (ProfileSpec::HybridBE { b: b_be, e: e_be }, eps_be)
    }
}

fn half_pair_fit(
    stack: &MembraneStack,
    center: &[f64],
    r: f64,
    mode: FitMode,
) -> Result<(ProfileSpec, f64)> {
    let (u, w) = stack.pair_view()?;
    let fit = fit_flatness(&u, &w, center, r, mode)?;
    let spec = match mode {
        FitMode::R => ProfileSpec::HalfPairR {
            alpha: fit.alpha,
            beta: fit.beta,
            a: fit.a,
            b: fit.b,
        },
        FitMode::S => ProfileSpec::HalfPairS {
            alpha: fit.alpha,
            beta: fit.beta,
            a: fit.a,
            b: fit.b,
        },
    };
    Ok((spec, fit.epsilon))
}

/// Classifies `center ∈ Γ1 ∩ Γ2`.
///
/// The energy is `weiss_at` at the smallest radius `≥ 8h` among `radii`
/// that fits in the lattice; the verdict is the family whose energy band
/// contains it, confirmed by a fit in that family with misfit
/// `≤ CONFIRM_EPS` at the same radius. Any disagreement gives
/// `Undetermined`.
pub fn classify_point(stack: &MembraneStack, center: &[f64], radii: &[f64]) -> Result<PointClass> {
    let (g1, g2) = stack_gammas(
        stack,
        classification_contact_tolerance(stack.lattice().spacing()),
    )?;
    classify_with_gammas(stack, &g1, &g2, center, radii)
}

fn classify_with_gammas(
    stack: &MembraneStack,
    g1: &GammaSet,
    g2: &GammaSet,
    center: &[f64],
    radii: &[f64],
) -> Result<PointClass> {
    let lat = stack.lattice();
    let dim = lat.dim();
    let h = lat.spacing();
    let reach = INTERSECTION_CELLS * h;
    if g1.distance_to(&center[..dim]) > reach || g2.distance_to(&center[..dim]) > reach {
        return Err(LabError::NotOnFreeBoundary(format!(
            "{:?} is not within {reach} of both free boundaries",
            &center[..dim]
        )));
    }
    let w0 = reference_w0(dim)?;
    let inside = |r: f64| {
        (0..dim).all(|i| {
            (center[i] - r).abs() <= lat.half_width() && (center[i] + r).abs() <= lat.half_width()
        })
    };
    let radius = radii
        .iter()
        .copied()
        .filter(|&r| r >= MIN_RADIUS_CELLS * h && inside(r))
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))))
        .ok_or_else(|| {
            LabError::InvalidArgument(format!(
                "no radius at least {} fits around {:?}",
                MIN_RADIUS_CELLS * h,
                &center[..dim]
            ))
        })?;
    let energy = weiss_at(stack, center, radius)?;
    let by_energy = energy_verdict(energy, w0);
    let fitted = match by_energy {
        Verdict::Reg => Some(half_pair_fit(stack, center, radius, FitMode::R)?),
        Verdict::Sing1 => Some(half_pair_fit(stack, center, radius, FitMode::S)?),
        Verdict::Sing2 => Some(fit_parabola(stack, center, radius)),
        Verdict::Hybrid => Some(fit_hybrid(stack, center, radius)),
        Verdict::Undetermined => None,
    };
    let (profile, epsilon) = match fitted {
        Some((p, e)) => (Some(p), e),
        None => (None, f64::INFINITY),
    };
    let verdict = if epsilon <= CONFIRM_EPS {
        by_energy
    } else {
        Verdict::Undetermined
    };
    Ok(PointClass {
        center: [center[0], if dim == 2 { center[1] } else { 0.0 }],
        verdict,
        energy,
        radius,
        energy_verdict: by_energy,
        profile,
        epsilon,
    })
}

/// Classifies every intersection point in `B_inner(0)`, in `Γ1` order.
pub fn classify_intersections(
    stack: &MembraneStack,
    inner: f64,
    radii: &[f64],
) -> Result<Vec<PointClass>> {
    let (g1, g2, pts) = intersection_points(stack)?;
    let dim = stack.lattice().dim();
    let pts: Vec<Point> = pts
        .into_iter()
        .filter(|p| dist(&p[..dim], &[0.0, 0.0][..dim]) < inner)
        .collect();
    worker_pool().install(|| {
        pts.par_iter()
            .map(|p| classify_with_gammas(stack, &g1, &g2, &p[..dim], radii))
            .collect()
    })
}

/// Count per verdict in `Verdict::ALL` order.
pub fn verdict_counts(classes: &[PointClass]) -> [usize; 5] {
    let mut counts = [0; 5];
    for c in classes {
        let i = Verdict::ALL.iter().position(|v| *v == c.verdict).unwrap();
        counts[i] += 1;
    }
    counts
}

/// CSV dump with header `x1[,x2],verdict,energy,eps`.
pub fn write_classification_csv<W: Write>(
    dim: usize,
    classes: &[PointClass],
    mut out: W,
) -> Result<()> {
    if dim == 1 {
        writeln!(out, "x1,verdict,energy,eps")?;
    } else {
        writeln!(out, "x1,x2,verdict,energy,eps")?;
    }
    for c in classes {
        let coords: Vec<String> = c.center[..dim].iter().map(|v| fmt_num(*v)).collect();
        writeln!(
            out,
            "{},{},{},{}",
            coords.join(","),
            c.verdict.as_str(),
            fmt_num(c.energy),
            fmt_num(c.epsilon)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    pub radii: Vec<f64>,
    /// `|α − β|` of the fit at each radius.
    pub angle_gap: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub mode: Vec<FitMode>,
    /// A fit failed below the last reported radius.
    pub truncated: bool,
}

impl AngleSeries {
    /// `|α − β|(r) · |log₂ r|`.
    pub fn log_scaled_gap(&self) -> Vec<f64> {
        self.radii
            .iter()
            .zip(&self.angle_gap)
            .map(|(r, g)| g * r.log2().abs())
            .collect()
    }
}

/// Flatness fits of the pair view on `B_r(center)` for each radius in
/// decreasing order. Fitting on `B_r` after rescaling by `r` is the same as
/// fitting the rescaled stack on the unit ball, so the source lattice is
/// used directly.
pub fn angle_dynamics(
    stack: &MembraneStack,
    center: &[f64],
    radii: &[f64],
    mode: FitMode,
) -> Result<AngleSeries> {
    let h = stack.lattice().spacing();
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LabError::InvalidArgument(
            "radii must be strictly decreasing".into(),
        ));
    }
    if let Some(r) = radii.iter().find(|r| **r < MIN_RADIUS_CELLS * h) {
        return Err(LabError::InvalidArgument(format!(
            "radius {r} is below {} lattice spacings",
            MIN_RADIUS_CELLS
        )));
    }
    let (u, w) = stack.pair_view()?;
    let mut series = AngleSeries {
        radii: Vec::new(),
        angle_gap: Vec::new(),
        epsilon: Vec::new(),
        mode: Vec::new(),
        truncated: false,
    };
    for &r in radii {
        match fit_flatness(&u, &w, center, r, mode) {
            Ok(fit) => {
                series.radii.push(r);
                series.angle_gap.push(fit.alpha.distance(&fit.beta));
                series.epsilon.push(fit.epsilon);
                series.mode.push(mode);
            }
            Err(_) => {
                series.truncated = true;
                break;
            }
        }
    }
    Ok(series)
}
