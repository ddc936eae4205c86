//! Weiss energy, the family constants `W0..W3`, and the Monneau functional.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::grid::{dist, make_lattice, Lattice, Point, ScalarField};
use crate::profiles::{validate_spec, Direction, ProfileSpec, SymMatrix};
use crate::report::fmt_num;
use crate::solver::MembraneStack;
use crate::thresholds;

/// Subsamples per axis used to measure the part of a cell inside a ball.
const CELL_SUBSAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Weiss,
    Monneau,
}

impl SeriesKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesKind::Weiss => "weiss",
            SeriesKind::Monneau => "monneau",
        }
    }
}

/// Energy values over increasing radii with a monotonicity verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct WeissSeries {
    pub center: Point,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
    /// Allowed decrease between consecutive radii.
    pub slack: f64,
    /// Largest decrease `values[i] - values[i+1]` observed (0 if none).
    pub worst_drop: f64,
    pub monotone: bool,
}

impl WeissSeries {
    fn new(center: Point, radii: Vec<f64>, values: Vec<f64>, kind: SeriesKind, slack: f64) -> Self {
        let worst_drop = values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0_f64, f64::max);
        Self {
            center,
            radii,
            values,
            kind,
            slack,
            worst_drop,
            monotone: worst_drop <= slack,
        }
    }

    /// `max - min` of the values.
    pub fn spread(&self) -> f64 {
        let max = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// CSV dump with header `r,value,kind`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "r,value,kind")?;
        }
        for (r, v) in self.radii.iter().zip(&self.values) {
            writeln!(
                out,
                "{},{},{}",
                fmt_num(*r),
                fmt_num(*v),
                self.kind.as_str()
            )?;
        }
        Ok(())
    }
}

fn check_ball(lat: &Lattice, center: &[f64], radius: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    for axis in 0..lat.dim() {
        for s in [-1.0, 1.0] {
            let mut p = [center[0], if lat.dim() == 2 { center[1] } else { 0.0 }];
            p[axis] += s * radius;
            if !lat.contains(&p[..lat.dim()]) {
                return Err(LabError::OutsideHull {
                    point: p[..lat.dim()].to_vec(),
                    half_width: lat.half_width(),
                });
            }
        }
    }
    Ok(())
}

/// Fraction of the node-centred cell of `p` lying inside `B_r(c)`.
fn cell_fraction(lat: &Lattice, p: &[f64], c: &[f64], r: f64) -> f64 {
    let h = lat.spacing();
    let d = lat.dim();
    let dc = dist(&p[..d], &c[..d]);
    let half_diag = 0.5 * h * (d as f64).sqrt();
    if dc + half_diag < r {
        return 1.0;
    }
    if dc - half_diag >= r {
        return 0.0;
    }
    if d == 1 {
        let lo = (p[0] - 0.5 * h).max(c[0] - r);
        let hi = (p[0] + 0.5 * h).min(c[0] + r);
        return ((hi - lo) / h).clamp(0.0, 1.0);
    }
    let m = CELL_SUBSAMPLES;
    let mut inside = 0usize;
    for i in 0..m {
        let x = p[0] - 0.5 * h + (i as f64 + 0.5) * h / m as f64;
        for j in 0..m {
            let y = p[1] - 0.5 * h + (j as f64 + 0.5) * h / m as f64;
            if (x - c[0]).powi(2) + (y - c[1]).powi(2) < r * r {
                inside += 1;
            }
        }
    }
    inside as f64 / (m * m) as f64
}

/// Squared gradient norm by centred differences, one-sided at the lattice
/// edge.
fn grad_sq(f: &ScalarField, node: usize) -> f64 {
    let lat = f.lattice();
    let h = lat.spacing();
    let mut s = 0.0;
    for axis in 0..lat.dim() {
        let g = match (lat.step(node, axis, -1), lat.step(node, axis, 1)) {
            (Some(a), Some(b)) => (f.value(b) - f.value(a)) / (2.0 * h),
            (None, Some(b)) => (f.value(b) - f.value(node)) / h,
            (Some(a), None) => (f.value(node) - f.value(a)) / h,
            (None, None) => 0.0,
        };
        s += g * g;
    }
    s
}

/// `∫_{B_r(c)} g` by the node-centred midpoint rule with cut-cell weights.
fn ball_integral(lat: &Lattice, center: &[f64], radius: f64, g: impl Fn(usize) -> f64) -> f64 {
    let h = lat.spacing();
    let d = lat.dim();
    let vol = h.powi(d as i32);
    let per = lat.per_axis();
    let range = |c: f64| {
        let lo = ((c - radius + lat.half_width()) / h).floor() as isize - 1;
        let hi = ((c + radius + lat.half_width()) / h).ceil() as isize + 1;
        (lo.max(0) as usize, (hi.min(per as isize - 1)) as usize)
    };
    let (i0, i1) = range(center[0]);
    let (j0, j1) = if d == 2 { range(center[1]) } else { (0, 0) };
    let mut acc = 0.0;
    for i in i0..=i1 {
        for j in j0..=j1 {
            let node = lat.node([i, j]);
            let p = lat.point(node);
            let frac = cell_fraction(lat, &p, center, radius);
            if frac > 0.0 {
                acc += frac * vol * g(node);
            }
        }
    }
    acc
}

/// `∫_{∂B_r(c)} g` from interpolated traces (the two endpoints in d = 1).
fn sphere_integral(
    fields: &[&ScalarField],
    center: &[f64],
    radius: f64,
    g: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let lat = fields[0].lattice();
    let samples = if lat.dim() == 1 {
        2
    } else {
        thresholds::boundary_samples(radius, lat.spacing())
    };
    let traces: Vec<Vec<f64>> = fields
        .iter()
        .map(|f| f.circle_trace(center, radius, samples))
        .collect::<Result<_>>()?;
    let mut acc = 0.0;
    let mut vals = vec![0.0; fields.len()];
    for s in 0..samples {
        for (k, t) in traces.iter().enumerate() {
            vals[k] = t[s];
        }
        acc += g(&vals);
    }
    Ok(if lat.dim() == 1 {
        acc
    } else {
        acc * std::f64::consts::TAU * radius / samples as f64
    })
}

fn is_three_membrane(stack: &MembraneStack) -> bool {
    stack.len() == 3 && stack.forces() == [1.0, 0.0, -1.0]
}

/// Weiss energy
/// `r^-(d+2) ∫_{B_r} (½Σ|∇u_k|² + u1 − u3) − r^-(d+3) ∫_{∂B_r} Σu_k²`.
pub fn weiss_at(stack: &MembraneStack, center: &[f64], radius: f64) -> Result<f64> {
    if !is_three_membrane(stack) {
        return Err(LabError::InvalidArgument(
            "the Weiss energy is defined for three membranes with forces (1, 0, -1)".into(),
        ));
    }
    let lat = *stack.lattice();
    check_ball(&lat, center, radius)?;
    let d = lat.dim() as i32;
    let (u1, u2, u3) = (stack.field(0), stack.field(1), stack.field(2));
    let volume = ball_integral(&lat, center, radius, |n| {
        0.5 * (grad_sq(u1, n) + grad_sq(u2, n) + grad_sq(u3, n)) + u1.value(n) - u3.value(n)
    });
    let surface = sphere_integral(&[u1, u2, u3], center, radius, |v| {
        v.iter().map(|x| x * x).sum()
    })?;
    Ok(volume / radius.powi(d + 2) - surface / radius.powi(d + 3))
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty()
        || radii.iter().any(|r| !(*r > 0.0))
        || radii.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(LabError::InvalidArgument(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Weiss energy at each radius, with a monotonicity verdict of slack
/// `C·h`.
pub fn weiss_series(stack: &MembraneStack, center: &[f64], radii: &[f64]) -> Result<WeissSeries> {
    check_radii(radii)?;
    let values = radii
        .iter()
        .map(|&r| weiss_at(stack, center, r))
        .collect::<Result<Vec<_>>>()?;
    let h = stack.lattice().spacing();
    Ok(WeissSeries::new(
        point_of(center),
        radii.to_vec(),
        values,
        SeriesKind::Weiss,
        thresholds::MONOTONE_SLACK_PER_H * h,
    ))
}

fn point_of(c: &[f64]) -> Point {
    [c[0], if c.len() > 1 { c[1] } else { 0.0 }]
}

/// Monneau functional `r^-(d+3) ∫_{∂B_r} Σ(u_k − v_k)²` against the parabola
/// stack `v_k(x) = ½(x−c)·A_k(x−c)`.
pub fn monneau_series(
    stack: &MembraneStack,
    parabolas: &[SymMatrix],
    center: &[f64],
    radii: &[f64],
) -> Result<WeissSeries> {
    check_radii(radii)?;
    let lat = *stack.lattice();
    if parabolas.len() != stack.len() {
        return Err(LabError::InvalidArgument(format!(
            "{} parabolas for {} membranes",
            parabolas.len(),
            stack.len()
        )));
    }
    for (k, (a, f)) in parabolas.iter().zip(stack.forces()).enumerate() {
        if a.dim() != lat.dim() {
            return Err(LabError::InvalidArgument(format!(
                "parabola {} has the wrong dimension",
                k + 1
            )));
        }
        if (a.trace() - f).abs() > 1e-10 {
            return Err(LabError::InvalidArgument(format!(
                "trace(A_{}) = {} differs from the force {f}",
                k + 1,
                a.trace()
            )));
        }
    }
    for k in 0..parabolas.len() - 1 {
        let diff = parabolas[k].combine(1.0, &parabolas[k + 1], -1.0);
        if diff.min_eigenvalue() < -1e-10 {
            return Err(LabError::InvalidArgument(format!(
                "parabola stack is not ordered: A_{} - A_{} is not positive semidefinite",
                k + 1,
                k + 2
            )));
        }
    }
    let d = lat.dim();
    let c = point_of(center);
    // interpolate the nodal differences so exact samples give exactly zero
    let diffs: Vec<ScalarField> = stack
        .fields()
        .iter()
        .zip(parabolas)
        .map(|(f, a)| {
            let mut g = f.clone();
            for (node, p) in lat.points() {
                let y = [p[0] - c[0], p[1] - c[1]];
                g.values_mut()[node] -= 0.5 * a.quad(&y[..d]);
            }
            g
        })
        .collect();
    let refs: Vec<&ScalarField> = diffs.iter().collect();
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        check_ball(&lat, center, r)?;
        let integral = sphere_integral(&refs, center, r, |v| v.iter().map(|x| x * x).sum())?;
        values.push(integral / r.powi(d as i32 + 3));
    }
    Ok(WeissSeries::new(
        c,
        radii.to_vec(),
        values,
        SeriesKind::Monneau,
        thresholds::MONOTONE_SLACK_PER_H * lat.spacing(),
    ))
}

/// Limiting energies of the four homogeneous families.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    pub dim: usize,
    pub spacing: f64,
    /// `W0..W3`: stable half-space, unstable half-space, hybrid, parabola.
    pub values: [f64; 4],
    /// `W_k / W0`.
    pub ratios: [f64; 4],
    /// Spread of `W_k` over the sampled specs of each family.
    pub spreads: [f64; 4],
    /// Every sampled spec with its energy.
    pub samples: Vec<(usize, ProfileSpec, f64)>,
}

/// Default lattice spacing for the energy table.
pub fn default_table_spacing(dim: usize) -> f64 {
    if dim == 1 {
        1.0 / 512.0
    } else {
        1.0 / 128.0
    }
}

/// A random valid hybrid spec (both orderings alternate with `index`).
pub fn random_hybrid(dim: usize, rng: &mut impl Rng, index: usize) -> ProfileSpec {
    let (e, b) = if dim == 1 {
        let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        (Direction::new(&[s]).unwrap(), SymMatrix::new_1d(1.0))
    } else {
        let e = Direction::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
        // B = e⊗e/3 + c v⊗v + (2/3 − c) v⊥⊗v⊥ keeps trace 1 and 3B − e⊗e ⪰ 0
        let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let c: f64 = rng.gen_range(0.0..(2.0 / 3.0));
        let v = Direction::from_angle(t);
        let vp = Direction::from_angle(t + std::f64::consts::FRAC_PI_2);
        let b = SymMatrix::outer(&e)
            .combine(1.0 / 3.0, &SymMatrix::outer(&v), c)
            .combine(1.0, &SymMatrix::outer(&vp), 2.0 / 3.0 - c);
        (e, b)
    };
    if index.is_multiple_of(2) {
        ProfileSpec::HybridEB { e, b }
    } else {
        ProfileSpec::HybridBE { b, e }
    }
}

/// A random valid parabola spec.
pub fn random_parabola(dim: usize, rng: &mut impl Rng) -> ProfileSpec {
    if dim == 1 {
        return ProfileSpec::Parabola {
            a: SymMatrix::new_1d(1.0),
            b: SymMatrix::new_1d(-1.0),
        };
    }
    // traceless perturbations of norm ≤ 1/6 keep 2A+B ⪰ 0 ⪰ A+2B
    let mut traceless = || {
        let s = rng.gen_range(0.0..(1.0 / 6.0));
        let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        SymMatrix::new_2d(s * t.cos(), s * t.sin(), -s * t.cos())
    };
    let (s, t) = (traceless(), traceless());
    ProfileSpec::Parabola {
        a: SymMatrix::scaled_identity(2, 0.5).add(&s),
        b: SymMatrix::scaled_identity(2, -0.5).add(&t),
    }
}

/// Lattice covering `B_1` with a few spare layers.
fn table_lattice(dim: usize, spacing: f64) -> Result<Lattice> {
    make_lattice(dim, 1.0 + 4.0 * spacing, spacing)
}

/// `W0..W3` at `r = 1` on exact profile samples, with hybrid and parabola
/// energies averaged over `draws` random valid specs each.
pub fn energy_table_with(dim: usize, spacing: f64, draws: usize, seed: u64) -> Result<EnergyTable> {
    if dim != 1 && dim != 2 {
        return Err(LabError::InvalidArgument(format!(
            "dimension must be 1 or 2, got {dim}"
        )));
    }
    if draws == 0 {
        return Err(LabError::InvalidArgument(
            "at least one draw per family".into(),
        ));
    }
    let lat = table_lattice(dim, spacing)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = [0.0, 0.0];
    let mut samples = Vec::new();
    let e = Direction::e1(dim);
    let mut families: Vec<Vec<ProfileSpec>> = vec![
        vec![ProfileSpec::SH { e }],
        vec![ProfileSpec::UH { e }],
        Vec::new(),
        Vec::new(),
    ];
    for i in 0..draws {
        families[2].push(random_hybrid(dim, &mut rng, i));
        families[3].push(random_parabola(dim, &mut rng));
    }
    let mut values = [0.0; 4];
    let mut spreads = [0.0; 4];
    for (k, specs) in families.iter().enumerate() {
        let mut ws = Vec::new();
        for spec in specs {
            debug_assert!(validate_spec(spec).passed());
            let stack = MembraneStack::from_profile(lat, spec)?;
            let w = weiss_at(&stack, &origin[..dim], 1.0)?;
            samples.push((k, spec.clone(), w));
            ws.push(w);
        }
        values[k] = ws.iter().sum::<f64>() / ws.len() as f64;
        let max = ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ws.iter().copied().fold(f64::INFINITY, f64::min);
        spreads[k] = max - min;
    }
    let ratios = values.map(|v| v / values[0]);
    Ok(EnergyTable {
        dim,
        spacing,
        values,
        ratios,
        spreads,
        samples,
    })
}

/// Energy table at the default spacing with five draws per family.
pub fn energy_table(dim: usize) -> Result<EnergyTable> {
    energy_table_with(dim, default_table_spacing(dim), 5, 0)
}
