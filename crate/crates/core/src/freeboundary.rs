//! Contact sets, free-boundary points, sup-norm flatness fits against
//! half-space profile pairs, width profiles and translation trapping.

use std::io::Write;

use crate::error::{LabError, Result};
use crate::grid::{dist, Lattice, Point, ScalarField};
use crate::profiles::{ApproxCase, ApproxSolution, Direction};
use crate::report::fmt_num;
use crate::solver::{MembraneStack, ORDERING_TOL};

/// Coarse angular resolution of the flatness search in the plane.
pub const COARSE_ANGLES: usize = 720;
/// Nodes used by the coarse stage; larger balls are strided.
const COARSE_NODE_BUDGET: usize = 1500;

/// Which free boundary a point set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaLabel {
    /// `∂{u1 > u2}`
    Gamma1,
    /// `∂{u2 > u3}`
    Gamma2,
    /// `∂{u > w/2}`
    GammaU,
    /// `∂{w > u/2}`
    GammaW,
}

impl GammaLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            GammaLabel::Gamma1 => "Gamma1",
            GammaLabel::Gamma2 => "Gamma2",
            GammaLabel::GammaU => "GammaU",
            GammaLabel::GammaW => "GammaW",
        }
    }
}

/// Edge midpoints where a contact indicator changes.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    pub dim: usize,
    pub points: Vec<Point>,
    pub label: GammaLabel,
}

impl GammaSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Distance from `p` to the nearest point of the set.
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|q| dist(&q[..self.dim], &p[..self.dim]))
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV dump with header `x1[,x2],label`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            writeln!(
                out,
                "{}",
                if self.dim == 1 {
                    "x1,label"
                } else {
                    "x1,x2,label"
                }
            )?;
        }
        for p in &self.points {
            if self.dim == 1 {
                writeln!(out, "{},{}", fmt_num(p[0]), self.label.as_str())?;
            } else {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt_num(p[0]),
                    fmt_num(p[1]),
                    self.label.as_str()
                )?;
            }
        }
        Ok(())
    }
}

/// Contact masks `{u_k - u_{k+1} ≤ tolerance}` for each consecutive pair.
pub fn contact_sets(stack: &MembraneStack, tolerance: f64) -> Result<Vec<Vec<bool>>> {
    stack.check_ordering(ORDERING_TOL)?;
    let n = stack.len();
    Ok((0..n - 1)
        .map(|k| {
            let (a, b) = (stack.field(k), stack.field(k + 1));
            (0..stack.lattice().len())
                .map(|node| a.value(node) - b.value(node) <= tolerance)
                .collect()
        })
        .collect())
}

/// Contact masks `{u - w/2 ≤ tol}` and `{w - u/2 ≤ tol}` of a pair.
pub fn pair_contact_sets(
    u: &ScalarField,
    w: &ScalarField,
    tolerance: f64,
) -> (Vec<bool>, Vec<bool>) {
    let n = u.lattice().len();
    (
        (0..n)
            .map(|i| u.value(i) - 0.5 * w.value(i) <= tolerance)
            .collect(),
        (0..n)
            .map(|i| w.value(i) - 0.5 * u.value(i) <= tolerance)
            .collect(),
    )
}

/// Midpoints of lattice edges whose endpoints are both in `domain` and
/// carry different `mask` values.
pub fn extract_gamma(
    lattice: &Lattice,
    domain: &[bool],
    mask: &[bool],
    label: GammaLabel,
) -> GammaSet {
    let mut points = Vec::new();
    for node in 0..lattice.len() {
        if !domain[node] {
            continue;
        }
        for axis in 0..lattice.dim() {
            if let Some(j) = lattice.step(node, axis, 1) {
                if domain[j] && mask[node] != mask[j] {
                    let (p, q) = (lattice.point(node), lattice.point(j));
                    points.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                }
            }
        }
    }
    GammaSet {
        dim: lattice.dim(),
        points,
        label,
    }
}

/// Sub-cell version of [`extract_gamma`] for the free boundary of
/// `{gap > tolerance}`. Near a free boundary the gap grows quadratically, so
/// `√gap` is extrapolated linearly from the two nearest non-contact nodes
/// of each crossing edge; edges without a second non-contact node fall
/// back to the midpoint.
pub fn extract_gamma_subcell(
    lattice: &Lattice,
    domain: &[bool],
    gap: &[f64],
    tolerance: f64,
    label: GammaLabel,
) -> GammaSet {
    let h = lattice.spacing();
    let contact = |n: usize| gap[n] <= tolerance;
    let mut points = Vec::new();
    for node in 0..lattice.len() {
        if !domain[node] {
            continue;
        }
        for axis in 0..lattice.dim() {
            let Some(j) = lattice.step(node, axis, 1) else {
                continue;
            };
            if !domain[j] || contact(node) == contact(j) {
                continue;
            }
            // c: contact node, o: open node, step from c towards o
            let (c, o, dir) = if contact(node) {
                (node, j, 1)
            } else {
                (j, node, -1)
            };
            let pc = lattice.point(c);
            let mut t = 0.5;
            if let Some(o2) = lattice.step(o, axis, dir) {
                if domain[o2] && !contact(o2) {
                    let (s1, s2) = (gap[o].max(0.0).sqrt(), gap[o2].max(0.0).sqrt());
                    if s2 > s1 {
                        // zero of the line through (1, s1), (2, s2), in cells from c
                        t = (1.0 - s1 / (s2 - s1)).clamp(0.0, 1.0);
                    }
                }
            }
            let mut p = pc;
            p[axis] += dir as f64 * t * h;
            points.push(p);
        }
    }
    GammaSet {
        dim: lattice.dim(),
        points,
        label,
    }
}

/// Sub-cell `Γ1` and `Γ2` of a stack with at least three membranes.
pub fn stack_gammas_subcell(stack: &MembraneStack, tolerance: f64) -> Result<(GammaSet, GammaSet)> {
    stack.check_ordering(ORDERING_TOL)?;
    if stack.len() < 3 {
        return Err(LabError::InvalidArgument(
            "two free boundaries need at least three membranes".into(),
        ));
    }
    let lat = stack.lattice();
    let gap = |k: usize| -> Vec<f64> {
        let (a, b) = (stack.field(k), stack.field(k + 1));
        (0..lat.len()).map(|n| a.value(n) - b.value(n)).collect()
    };
    Ok((
        extract_gamma_subcell(lat, stack.mask(), &gap(0), tolerance, GammaLabel::Gamma1),
        extract_gamma_subcell(lat, stack.mask(), &gap(1), tolerance, GammaLabel::Gamma2),
    ))
}

/// `Γ1` and `Γ2` of a stack with at least three membranes.
pub fn stack_gammas(stack: &MembraneStack, tolerance: f64) -> Result<(GammaSet, GammaSet)> {
    let c = contact_sets(stack, tolerance)?;
    if c.len() < 2 {
        return Err(LabError::InvalidArgument(
            "two free boundaries need at least three membranes".into(),
        ));
    }
    let lat = stack.lattice();
    Ok((
        extract_gamma(lat, stack.mask(), &c[0], GammaLabel::Gamma1),
        extract_gamma(lat, stack.mask(), &c[1], GammaLabel::Gamma2),
    ))
}

/// Fitting family: stable pairs (`R`) or unstable pairs (`S`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    R,
    S,
}

impl FitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitMode::R => "R",
            FitMode::S => "S",
        }
    }

    pub fn approx_case(&self) -> ApproxCase {
        match self {
            FitMode::R => ApproxCase::One,
            FitMode::S => ApproxCase::Two,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessFit {
    pub alpha: Direction,
    pub beta: Direction,
    pub a: f64,
    pub b: f64,
    /// Rescaled sup-norm misfit.
    pub epsilon: f64,
    pub mode: FitMode,
    pub center: Point,
    pub radius: f64,
    /// Both fields vanish on the ball; the directions carry no information.
    pub degenerate: bool,
}

/// Rescaled samples `(y, u/r², w/r²)` on the masked nodes of a ball.
struct BallSamples {
    dim: usize,
    ys: Vec<[f64; 2]>,
    u: Vec<f64>,
    w: Vec<f64>,
}

impl BallSamples {
    fn collect(u: &ScalarField, w: &ScalarField, center: &[f64], radius: f64) -> Result<Self> {
        let lat = u.lattice();
        if w.lattice() != lat {
            return Err(LabError::InvalidArgument(
                "u and w live on different lattices".into(),
            ));
        }
        if !(radius > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "fitting radius must be positive, got {radius}"
            )));
        }
        let dim = lat.dim();
        let far = [
            center[0] + radius,
            if dim == 2 { center[1] + radius } else { 0.0 },
        ];
        let near = [
            center[0] - radius,
            if dim == 2 { center[1] - radius } else { 0.0 },
        ];
        if !lat.contains(&far[..dim]) || !lat.contains(&near[..dim]) {
            return Err(LabError::OutsideHull {
                point: far[..dim].to_vec(),
                half_width: lat.half_width(),
            });
        }
        let r2 = radius * radius;
        let mut s = BallSamples {
            dim,
            ys: Vec::new(),
            u: Vec::new(),
            w: Vec::new(),
        };
        for (node, p) in lat.points() {
            if !u.is_masked(node) || dist(&p[..dim], &center[..dim]) >= radius {
                continue;
            }
            let y0 = (p[0] - center[0]) / radius;
            let y1 = if dim == 2 {
                (p[1] - center[1]) / radius
            } else {
                0.0
            };
            s.ys.push([y0, y1]);
            s.u.push(u.value(node) / r2);
            s.w.push(w.value(node) / r2);
        }
        if s.ys.is_empty() {
            return Err(LabError::InvalidArgument(
                "fitting ball contains no nodes".into(),
            ));
        }
        Ok(s)
    }

    fn strided(&self, budget: usize) -> BallSamples {
        let stride = self.ys.len().div_ceil(budget).max(1);
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect();
        BallSamples {
            dim: self.dim,
            ys: self.ys.iter().step_by(stride).copied().collect(),
            u: pick(&self.u),
            w: pick(&self.w),
        }
    }
}

fn dir_for(dim: usize, theta: f64) -> [f64; 2] {
    if dim == 1 {
        [if theta.cos() >= 0.0 { 1.0 } else { -1.0 }, 0.0]
    } else {
        [theta.cos(), theta.sin()]
    }
}

#[inline]
fn dot(d: &[f64; 2], y: &[f64; 2]) -> f64 {
    d[0] * y[0] + d[1] * y[1]
}

/// `max |v - ½max(y·d - a, 0)²|` over the samples.
fn misfit_half(ys: &[[f64; 2]], v: &[f64], d: [f64; 2], a: f64) -> f64 {
    let mut m: f64 = 0.0;
    for (y, &val) in ys.iter().zip(v) {
        let t = (dot(&d, y) - a).max(0.0);
        m = m.max((val - 0.5 * t * t).abs());
    }
    m
}

/// Sup misfit of the unstable pair at `(θα, θβ, a, b)`.
fn misfit_s(s: &BallSamples, p: &[f64]) -> f64 {
    let da = dir_for(s.dim, p[0]);
    let db = dir_for(s.dim, p[1]);
    let (a, b) = (p[2], p[3]);
    let mut m: f64 = 0.0;
    for ((y, &u), &w) in s.ys.iter().zip(&s.u).zip(&s.w) {
        let lo = (dot(&da, y) - a).min(0.0).powi(2);
        let hi = (dot(&db, y) - b).max(0.0).powi(2);
        m = m
            .max((u - 0.5 * lo - 0.25 * hi).abs())
            .max((w - 0.25 * lo - 0.5 * hi).abs());
    }
    m
}

/// Downhill simplex minimisation from `x0` with initial steps `steps`.
pub(crate) fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    max_iter: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol * (vals[0].abs() + 1e-300) + 1e-15 {
            let spread: f64 = (0..n)
                .map(|i| (simplex[n][i] - simplex[0][i]).abs())
                .fold(0.0, f64::max);
            if spread < 1e-12 || vals[n] - vals[0] <= 1e-16 {
                break;
            }
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|v| v[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + t * (simplex[n][i] - centroid[i]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for k in 1..=n {
                    for i in 0..n {
                        simplex[k][i] = simplex[0][i] + 0.5 * (simplex[k][i] - simplex[0][i]);
                    }
                    vals[k] = f(&simplex[k]);
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .unwrap();
    (simplex[best].clone(), vals[best])
}

/// Best `(θ, a)` for one half-space profile against `v`.
fn fit_half(full: &BallSamples, coarse: &BallSamples, use_u: bool) -> (f64, f64, f64) {
    let pick = |s: &BallSamples| if use_u { s.u.clone() } else { s.w.clone() };
    let (vf, vc) = (pick(full), pick(coarse));
    let thetas: Vec<f64> = if full.dim == 1 {
        vec![0.0, std::f64::consts::PI]
    } else {
        (0..COARSE_ANGLES)
            .map(|k| std::f64::consts::TAU * k as f64 / COARSE_ANGLES as f64)
            .collect()
    };
    let offsets: Vec<f64> = (-10..=10).map(|k| 0.05 * k as f64).collect();
    let mut cands: Vec<(f64, f64, f64)> = Vec::with_capacity(thetas.len() * offsets.len());
    for &th in &thetas {
        let d = dir_for(full.dim, th);
        for &a in &offsets {
            cands.push((misfit_half(&coarse.ys, &vc, d, a), th, a));
        }
    }
    cands.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.total_cmp(&y.2))
    });
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut seen: Vec<(f64, f64)> = Vec::new();
    for &(_, th, a) in cands.iter() {
        if seen.len() >= 6 {
            break;
        }
        if seen
            .iter()
            .any(|&(t, b)| angle_gap(t, th) < 0.02 && (b - a).abs() < 0.11)
        {
            continue;
        }
        seen.push((th, a));
        let (x, v) = if full.dim == 1 {
            let d = dir_for(1, th);
            let (x, v) = nelder_mead(
                &|p| misfit_half(&full.ys, &vf, d, p[0]),
                &[a],
                &[0.025],
                400,
                1e-14,
            );
            (vec![th, x[0]], v)
        } else {
            nelder_mead(
                &|p| misfit_half(&full.ys, &vf, dir_for(2, p[0]), p[1]),
                &[th, a],
                &[std::f64::consts::TAU / COARSE_ANGLES as f64, 0.025],
                600,
                1e-14,
            )
        };
        if v < best.0 {
            best = (v, x[0], x[1]);
        }
    }
    best
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

fn direction_from(dim: usize, theta: f64) -> Direction {
    let c = dir_for(dim, theta);
    Direction::new(&c[..dim]).expect("dimension is 1 or 2")
}

/// Sup-norm fit of `(u, w)` on `B_radius(center)` by the stable pair
/// `(½max(x·α−a,0)², ½max(x·β−b,0)²)` (mode R) or the unstable pair
/// (mode S), after rescaling `y = (x − center)/radius`, values `/radius²`.
pub fn fit_flatness(
    u: &ScalarField,
    w: &ScalarField,
    center: &[f64],
    radius: f64,
    mode: FitMode,
) -> Result<FlatnessFit> {
    let full = BallSamples::collect(u, w, center, radius)?;
    let coarse = full.strided(COARSE_NODE_BUDGET);
    let dim = full.dim;
    let c: Point = [center[0], if dim == 2 { center[1] } else { 0.0 }];
    let scale = full
        .u
        .iter()
        .chain(&full.w)
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        let e = Direction::e1(dim);
        return Ok(FlatnessFit {
            alpha: e,
            beta: e,
            a: 0.0,
            b: 0.0,
            epsilon: 0.0,
            mode,
            center: c,
            radius,
            degenerate: true,
        });
    }
    match mode {
        FitMode::R => {
            let (eu, ta, a) = fit_half(&full, &coarse, true);
            let (ew, tb, b) = fit_half(&full, &coarse, false);
            Ok(FlatnessFit {
                alpha: direction_from(dim, ta),
                beta: direction_from(dim, tb),
                a,
                b,
                epsilon: eu.max(ew),
                mode,
                center: c,
                radius,
                degenerate: false,
            })
        }
        FitMode::S => {
            let thetas: Vec<f64> = if dim == 1 {
                vec![0.0, std::f64::consts::PI]
            } else {
                (0..COARSE_ANGLES)
                    .map(|k| std::f64::consts::TAU * k as f64 / COARSE_ANGLES as f64)
                    .collect()
            };
            let mut cands: Vec<(f64, f64)> = thetas
                .iter()
                .map(|&t| (misfit_s(&coarse, &[t, t, 0.0, 0.0]), t))
                .collect();
            cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
            let mut starts: Vec<f64> = Vec::new();
            for &(_, t) in &cands {
                if starts.len() >= 4 {
                    break;
                }
                if starts.iter().all(|&s| angle_gap(s, t) > 0.05) {
                    starts.push(t);
                }
            }
            let mut best = (f64::INFINITY, vec![0.0; 4]);
            for &t in &starts {
                for &(a0, b0) in &[(0.0, 0.0), (0.05, -0.05), (-0.05, 0.05)] {
                    let (x, v) = if dim == 1 {
                        let (x, v) = nelder_mead(
                            &|p| misfit_s(&full, &[t, t, p[0], p[1]]),
                            &[a0, b0],
                            &[0.02, 0.02],
                            800,
                            1e-14,
                        );
                        (vec![t, t, x[0], x[1]], v)
                    } else {
                        let step = std::f64::consts::TAU / COARSE_ANGLES as f64;
                        let (x1, _) = nelder_mead(
                            &|p| misfit_s(&full, p),
                            &[t, t, a0, b0],
                            &[step, step, 0.02, 0.02],
                            1500,
                            1e-14,
                        );
                        // restart from the first optimum to escape a collapsed simplex
                        nelder_mead(
                            &|p| misfit_s(&full, p),
                            &x1,
                            &[step / 4.0, step / 4.0, 0.005, 0.005],
                            1500,
                            1e-14,
                        )
                    };
                    if v < best.0 {
                        best = (v, x);
                    }
                }
            }
            let p = best.1;
            Ok(FlatnessFit {
                alpha: direction_from(dim, p[0]),
                beta: direction_from(dim, p[1]),
                a: p[2],
                b: p[3],
                epsilon: best.0,
                mode,
                center: c,
                radius,
                degenerate: false,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthRow {
    pub r: f64,
    /// `None` when no point of the set lies in `B_r`.
    pub width: Option<f64>,
    /// `width · (−ln r) / r`
    pub log_scaled: Option<f64>,
    /// `width / r`
    pub linear_scaled: Option<f64>,
}

/// `width(r) = max |(x − center)·direction − offset|` over points of `gamma`
/// in `B_r(center)`.
pub fn width_profile(
    gamma: &GammaSet,
    center: &[f64],
    direction: &Direction,
    offset: f64,
    radii: &[f64],
) -> Result<Vec<WidthRow>> {
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::InvalidArgument(
            "width radii must be positive and increasing".into(),
        ));
    }
    let dim = gamma.dim;
    Ok(radii
        .iter()
        .map(|&r| {
            let width = gamma
                .points
                .iter()
                .filter(|p| dist(&p[..dim], &center[..dim]) < r)
                .map(|p| {
                    let y = [
                        p[0] - center[0],
                        if dim == 2 { p[1] - center[1] } else { 0.0 },
                    ];
                    (direction.dot(&y[..dim]) - offset).abs()
                })
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
            WidthRow {
                r,
                width,
                log_scaled: width.map(|w| w * (-r.ln()) / r),
                linear_scaled: width.map(|w| w / r),
            }
        })
        .collect())
}

/// Least-squares slope of `values` against `log2(1/r)`, divided by the
/// largest absolute value: the relative drift per dyadic scale.
pub fn relative_drift(radii: &[f64], values: &[f64]) -> f64 {
    let n = radii.len().min(values.len());
    let scale = values[..n].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if n < 2 || scale == 0.0 {
        return 0.0;
    }
    let xs: Vec<f64> = radii[..n].iter().map(|r| -r.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = values[..n].iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs
        .iter()
        .zip(values)
        .map(|(x, v)| (x - mx) * (v - my))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingCheck {
    pub holds: bool,
    /// Worst signed slack of the sandwich; negative means violated.
    pub margin: f64,
}

/// Slack below which a sandwich counts as violated.
pub const TRAPPING_SLACK: f64 = 1e-8;

/// Checks that `(u, w)` is trapped between translates of the approximate
/// solution attached to `fit` on `B_{radius/2}(center)` (rescaled
/// coordinates). Mode R shifts along `α` by `A·ε`; mode S shifts the
/// offsets `(a, b)` to `(a ∓ Aε, b ± Aε)`.
pub fn check_trapping(
    u: &ScalarField,
    w: &ScalarField,
    fit: &FlatnessFit,
    shift_constant: f64,
) -> Result<TrappingCheck> {
    if fit.epsilon >= 0.05 {
        return Err(LabError::InvalidArgument(format!(
            "trapping needs a flat fit (epsilon < 0.05), got {}",
            fit.epsilon
        )));
    }
    let samples = BallSamples::collect(u, w, &fit.center, 0.5 * fit.radius)?;
    let dim = samples.dim;
    // samples are rescaled by radius/2; bring them back to the fit scale
    let k = 0.5;
    let shift = shift_constant * fit.epsilon;
    let (lower, upper, translate) = match fit.mode {
        FitMode::R => (
            ApproxSolution::new(ApproxCase::One, &fit.alpha, &fit.beta, fit.a, fit.b)?,
            ApproxSolution::new(ApproxCase::One, &fit.alpha, &fit.beta, fit.a, fit.b)?,
            true,
        ),
        FitMode::S => (
            ApproxSolution::new(
                ApproxCase::Two,
                &fit.alpha,
                &fit.beta,
                fit.a - shift,
                fit.b + shift,
            )?,
            ApproxSolution::new(
                ApproxCase::Two,
                &fit.alpha,
                &fit.beta,
                fit.a + shift,
                fit.b - shift,
            )?,
            false,
        ),
    };
    let mut margin = f64::INFINITY;
    for ((y, &us), &ws) in samples.ys.iter().zip(&samples.u).zip(&samples.w) {
        let z = [k * y[0], k * y[1]];
        let (uu, ww) = (us * k * k, ws * k * k);
        let (lo, hi) = if translate {
            let al = fit.alpha.components();
            let zm: Vec<f64> = (0..dim).map(|i| z[i] - shift * al[i]).collect();
            let zp: Vec<f64> = (0..dim).map(|i| z[i] + shift * al[i]).collect();
            (lower.eval(&zm), upper.eval(&zp))
        } else {
            (lower.eval(&z[..dim]), upper.eval(&z[..dim]))
        };
        margin = margin
            .min(uu - lo.0)
            .min(hi.0 - uu)
            .min(ww - lo.1)
            .min(hi.1 - ww);
    }
    Ok(TrappingCheck {
        holds: margin >= -TRAPPING_SLACK,
        margin,
    })
}

/// Smallest shift constant from `candidates` (ascending) for which the
/// trapping holds.
pub fn minimal_trapping_constant(
    u: &ScalarField,
    w: &ScalarField,
    fit: &FlatnessFit,
    candidates: &[f64],
) -> Result<Option<f64>> {
    for &a in candidates {
        if check_trapping(u, w, fit, a)?.holds {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_lattice;
    use crate::profiles::ProfileSpec;

    fn pair_from(lat: Lattice, spec: &ProfileSpec) -> (ScalarField, ScalarField) {
        let u = ScalarField::from_fn(lat, |x| spec.evaluate(x).pair().unwrap().0);
        let w = ScalarField::from_fn(lat, |x| spec.evaluate(x).pair().unwrap().1);
        (u, w)
    }

    #[test]
    fn subcell_gamma_locates_shifted_line() {
        let h = 1.0 / 32.0;
        let lat = make_lattice(2, 1.0, h).unwrap();
        let shift = 0.3 * h;
        let spec = ProfileSpec::SH {
            e: Direction::e1(2),
        };
        let fields: Vec<ScalarField> = (0..3)
            .map(|k| {
                ScalarField::from_fn(lat, |x| {
                    spec.evaluate(&[x[0] - shift, x[1]]).triple().unwrap()[k]
                })
            })
            .collect();
        let s = MembraneStack::new(fields, vec![1.0, 0.0, -1.0]).unwrap();
        let (g1, g2) = stack_gammas_subcell(&s, 1e-14).unwrap();
        for g in [&g1, &g2] {
            assert!(!g.is_empty());
            for p in &g.points {
                assert!((p[0] - shift).abs() < 1e-9, "{p:?}");
            }
        }
    }

    #[test]
    fn exact_stable_pair_fits_exactly() {
        let lat = make_lattice(2, 1.0, 1.0 / 32.0).unwrap();
        let e = Direction::e1(2);
        let (u, w) = pair_from(
            lat,
            &ProfileSpec::HalfPairR {
                alpha: e,
                beta: e,
                a: 0.0,
                b: 0.0,
            },
        );
        let fit = fit_flatness(&u, &w, &[0.0, 0.0], 0.5, FitMode::R).unwrap();
        assert!(fit.epsilon <= 1e-8, "{}", fit.epsilon);
        assert!(fit.alpha.distance(&e) < 1e-6 && fit.beta.distance(&e) < 1e-6);
        assert!(fit.a.abs() < 1e-6 && fit.b.abs() < 1e-6);
    }

    #[test]
    fn rotated_sh_recovers_angle() {
        let lat = make_lattice(2, 1.0, 1.0 / 32.0).unwrap();
        let e = Direction::from_angle(0.1);
        let (u, w) = pair_from(lat, &ProfileSpec::SH { e });
        let fit = fit_flatness(&u, &w, &[0.0, 0.0], 0.5, FitMode::R).unwrap();
        assert!(
            fit.alpha.distance(&e) < 1e-3 && fit.beta.distance(&e) < 1e-3,
            "{fit:?}"
        );
        assert!(fit.epsilon < 1e-6);
    }

    #[test]
    fn exact_uh_fits_in_mode_s() {
        let lat = make_lattice(2, 1.0, 1.0 / 32.0).unwrap();
        let e = Direction::e1(2);
        let (u, w) = pair_from(lat, &ProfileSpec::UH { e });
        let fit = fit_flatness(&u, &w, &[0.0, 0.0], 0.5, FitMode::S).unwrap();
        assert!(fit.epsilon <= 1e-8, "{fit:?}");
        assert!(fit.alpha.distance(&e) < 1e-6 && fit.beta.distance(&e) < 1e-6);
    }

    #[test]
    fn one_dimensional_fits() {
        let lat = make_lattice(1, 1.0, 1.0 / 64.0).unwrap();
        let e = Direction::new(&[-1.0]).unwrap();
        let (u, w) = pair_from(
            lat,
            &ProfileSpec::HalfPairR {
                alpha: e,
                beta: e,
                a: 0.1,
                b: -0.05,
            },
        );
        let fit = fit_flatness(&u, &w, &[0.0], 0.5, FitMode::R).unwrap();
        // offsets are measured at the fitting scale
        assert!(fit.epsilon < 1e-8);
        assert!(
            (fit.a - 0.2).abs() < 1e-6 && (fit.b + 0.1).abs() < 1e-6,
            "{fit:?}"
        );
    }

    #[test]
    fn zero_fields_are_degenerate() {
        let lat = make_lattice(2, 1.0, 0.125).unwrap();
        let z = ScalarField::from_fn(lat, |_| 0.0);
        let fit = fit_flatness(&z, &z, &[0.0, 0.0], 0.5, FitMode::R).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn gamma_of_sh_is_the_hyperplane() {
        let lat = make_lattice(2, 1.0, 1.0 / 32.0).unwrap();
        let stack = MembraneStack::from_profile(
            lat,
            &ProfileSpec::SH {
                e: Direction::e1(2),
            },
        )
        .unwrap();
        let h = lat.spacing();
        let (g1, _) = stack_gammas(&stack, 0.5 * h * h).unwrap();
        assert!(!g1.is_empty());
        // the node at x1 = h has gap h²/2 and counts as contact
        assert!(g1.points.iter().all(|p| p[0].abs() <= 1.5 * h + 1e-12));
        let (g1, _) = stack_gammas(&stack, 0.25 * h * h).unwrap();
        assert!(g1.points.iter().all(|p| p[0].abs() <= 0.5 * h + 1e-12));
        let all = vec![true; lat.len()];
        assert!(extract_gamma(&lat, stack.mask(), &all, GammaLabel::Gamma1).is_empty());
    }

    #[test]
    fn widths() {
        let pts: Vec<Point> = (-50..=50)
            .map(|k| {
                let y = k as f64 / 50.0;
                [0.3 * y * y, y]
            })
            .collect();
        let g = GammaSet {
            dim: 2,
            points: pts,
            label: GammaLabel::Gamma1,
        };
        let rows = width_profile(&g, &[0.0, 0.0], &Direction::e1(2), 0.0, &[0.25, 0.5]).unwrap();
        assert!((rows[1].width.unwrap() - 0.3 * 0.25).abs() < 0.02);
        let empty = GammaSet {
            dim: 2,
            points: vec![],
            label: GammaLabel::Gamma1,
        };
        assert!(
            width_profile(&empty, &[0.0, 0.0], &Direction::e1(2), 0.0, &[0.5]).unwrap()[0]
                .width
                .is_none()
        );
        assert!(width_profile(&g, &[0.0, 0.0], &Direction::e1(2), 0.0, &[0.5, 0.25]).is_err());
    }

    #[test]
    fn trapping_of_exact_and_mismatched_fits() {
        let lat = make_lattice(2, 1.0, 1.0 / 32.0).unwrap();
        let e = Direction::e1(2);
        let (u, w) = pair_from(
            lat,
            &ProfileSpec::HalfPairR {
                alpha: e,
                beta: e,
                a: 0.0,
                b: 0.0,
            },
        );
        let fit = fit_flatness(&u, &w, &[0.0, 0.0], 0.5, FitMode::R).unwrap();
        assert!(check_trapping(&u, &w, &fit, 1.0).unwrap().holds);
        let mut bad = fit.clone();
        bad.a = -0.2;
        bad.b = -0.2;
        bad.epsilon = 1e-3;
        assert!(!check_trapping(&u, &w, &bad, 1.0).unwrap().holds);
    }
}
