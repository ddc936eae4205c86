//! The registered experiment pipelines.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{
    angle_dynamics, classify_intersections, classify_point, intersection_points, verdict_counts,
    write_classification_csv, PointClass, Verdict,
};
use crate::energy::{energy_table_with, monneau_series, weiss_series, WeissSeries};
use crate::error::{LabError, Result};
use crate::freeboundary::{
    extract_gamma_subcell, fit_flatness, relative_drift, stack_gammas_subcell, width_profile,
    FitMode, GammaLabel, GammaSet, WidthRow,
};
use crate::grid::{dist, make_lattice, Lattice, Point};
use crate::harmonic::{
    aux_a1, aux_constants, aux_d12, aux_remainder_check, aux_remainder_check_with,
    gamma_functionals, BoundaryFunction, RemainderReport,
};
use crate::profiles::{validate_spec, Direction, ProfileSpec, SymMatrix};
use crate::report::fmt_num;
use crate::solver::{
    solve_membranes, solve_obstacle, MembraneProblem, MembraneStack, DEFAULT_TOLERANCE,
};
use crate::thresholds::{
    BAND_RATIO, CONSTANT_DRIFT, INTERSECTION_CELLS, MIN_RADIUS_CELLS, SUBCELL_CONTACT_TOL,
};

use super::config::ExperimentConfig;
use super::ReportBundle;

/// Oracle tolerance of the Poisson-integral constants.
const CONSTANT_TOL: f64 = 1e-8;
/// Energy ratio tolerance of the table.
const RATIO_TOL: f64 = 1e-3;
/// Tolerance of the one-dimensional `W0 = 1/6` anchor.
const ANCHOR_TOL: f64 = 1e-4;
/// Hybrid and parabola draws per family in the energy table.
const TABLE_DRAWS: usize = 5;
/// Smallest number of dyadic scales a width band must cover.
const MIN_SCALES: usize = 4;

/// Generic perturbation pair `φ = cos θ (1 + 2 s1 sin θ)`,
/// `ψ = cos θ (1 + 2 s2 sin θ)` drawn from `seed`, subject to the boundary
/// ordering constraints `2|2s1 − s2| ≤ 1`, `2|2s2 − s1| ≤ 1` and a
/// `γ2` gap `|s1 − s2| ≥ 0.1`.
pub fn random_perturbation(seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let s1: f64 = rng.gen_range(-1.0 / 6.0..1.0 / 6.0);
        let s2: f64 = rng.gen_range(-1.0 / 6.0..1.0 / 6.0);
        let ordered = 2.0 * (2.0 * s1 - s2).abs() <= 1.0 && 2.0 * (2.0 * s2 - s1).abs() <= 1.0;
        if ordered && (s1 - s2).abs() >= 0.1 {
            return (
                vec![0.0, 1.0],
                vec![0.0, 0.0, s1],
                vec![0.0, 1.0],
                vec![0.0, 0.0, s2],
            );
        }
    }
}

fn matrix(dim: usize, entries: &[f64]) -> SymMatrix {
    if dim == 1 {
        SymMatrix::new_1d(entries[0])
    } else {
        SymMatrix::new_2d(entries[0], entries[1], entries[2])
    }
}

fn direction(cfg: &ExperimentConfig) -> Direction {
    if cfg.dim == 1 {
        let s = if cfg.profile_angle.cos() >= 0.0 {
            1.0
        } else {
            -1.0
        };
        Direction::new(&[s]).expect("unit")
    } else {
        Direction::from_angle(cfg.profile_angle)
    }
}

fn profile_spec(cfg: &ExperimentConfig) -> Result<ProfileSpec> {
    let e = direction(cfg);
    let spec = match cfg.profile.as_str() {
        "SH" => ProfileSpec::SH { e },
        "UH" => ProfileSpec::UH { e },
        _ => ProfileSpec::Parabola {
            a: matrix(cfg.dim, &cfg.profile_a),
            b: matrix(cfg.dim, &cfg.profile_b),
        },
    };
    let report = validate_spec(&spec);
    if !report.passed() {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(LabError::InvalidProfile(format!(
            "boundary profile {} violates {}",
            spec.name(),
            names.join(", ")
        )));
    }
    Ok(spec)
}

fn lattice(cfg: &ExperimentConfig) -> Result<Lattice> {
    make_lattice(cfg.dim, cfg.half_width, cfg.spacing)
}

/// `φ`, `ψ` with amplitude, acting on the half `{x·e > 0}` with the angle
/// measured from `e`.
struct Perturbation {
    eps: f64,
    phi: BoundaryFunction,
    psi: BoundaryFunction,
    e: Direction,
}

impl Perturbation {
    fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            eps: cfg.amplitude,
            phi: BoundaryFunction::fourier(&cfg.phi_cos, &cfg.phi_sin),
            psi: BoundaryFunction::fourier(&cfg.psi_cos, &cfg.psi_sin),
            e: direction(cfg),
        }
    }

    /// `(εφ, εψ)` at `x`.
    fn at(&self, x: &[f64]) -> (f64, f64) {
        let along = self.e.dot(x);
        if self.eps == 0.0 || along <= 0.0 {
            return (0.0, 0.0);
        }
        let theta = if x.len() == 2 {
            let c = self.e.components();
            (-x[0] * c[1] + x[1] * c[0]).atan2(along)
        } else {
            0.0
        };
        (
            self.eps * self.phi.eval(theta),
            self.eps * self.psi.eval(theta),
        )
    }

    /// `γ1`, `γ2` of `φ` and of `ψ`.
    fn gammas(&self) -> Result<((f64, f64), (f64, f64))> {
        Ok((gamma_functionals(&self.phi)?, gamma_functionals(&self.psi)?))
    }
}

/// Three-membrane problem with data `u1 = p1 + εφ`, `u3 = p3 − εψ` and
/// `u2 = p2 + ε(ψ − φ)`.
fn perturbed_problem(
    lat: Lattice,
    spec: &ProfileSpec,
    pert: &Perturbation,
) -> Result<MembraneProblem> {
    MembraneProblem::from_boundary_fn(lat, vec![1.0, 0.0, -1.0], |x| {
        let t = spec.evaluate(x).triple().expect("three-membrane profile");
        let (f, g) = pert.at(x);
        vec![t[0] + f, t[1] + g - f, t[2] - g]
    })
}

fn fits_around(lat: &Lattice, c: &[f64], r: f64) -> bool {
    (0..lat.dim())
        .all(|i| (c[i] - r).abs() <= lat.half_width() && (c[i] + r).abs() <= lat.half_width())
}

/// Radii at least `8h`, strictly decreasing, that fit around `c`.
fn usable_radii(lat: &Lattice, c: &[f64], radii: &[f64]) -> Vec<f64> {
    let mut rs: Vec<f64> = radii
        .iter()
        .copied()
        .filter(|&r| r >= MIN_RADIUS_CELLS * lat.spacing() && fits_around(lat, c, r))
        .collect();
    rs.sort_by(|a, b| b.total_cmp(a));
    rs.dedup();
    rs
}

fn gamma_csv(sets: &[&GammaSet]) -> Result<String> {
    let mut out = Vec::new();
    for (i, g) in sets.iter().enumerate() {
        g.write_csv(&mut out, i == 0)?;
    }
    Ok(String::from_utf8(out).expect("ascii"))
}

fn series_csv(series: &[&WeissSeries]) -> Result<String> {
    let mut out = Vec::new();
    for (i, s) in series.iter().enumerate() {
        s.write_csv(&mut out, i == 0)?;
    }
    Ok(String::from_utf8(out).expect("ascii"))
}

fn classification_csv(dim: usize, classes: &[PointClass]) -> Result<String> {
    let mut out = Vec::new();
    write_classification_csv(dim, classes, &mut out)?;
    Ok(String::from_utf8(out).expect("ascii"))
}

fn width_csv(rows: &[WidthRow]) -> String {
    let mut s = String::from("r,width,log_scaled,linear_scaled\n");
    let f = |v: Option<f64>| fmt_num(v.unwrap_or(f64::NAN));
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_num(row.r),
            f(row.width),
            f(row.log_scaled),
            f(row.linear_scaled)
        );
    }
    s
}

fn remainder_csv(rep: &RemainderReport) -> Result<String> {
    let mut out = Vec::new();
    rep.write_csv(&mut out)?;
    Ok(String::from_utf8(out).expect("ascii"))
}

fn max_over_min(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Distance from the origin to the nearest point, or infinity.
fn nearest_distance(dim: usize, pts: &[Point]) -> f64 {
    pts.iter()
        .map(|p| dist(&p[..dim], &[0.0, 0.0][..dim]))
        .fold(f64::INFINITY, f64::min)
}

fn inner_points(dim: usize, pts: &[Point], inner: f64) -> Vec<Point> {
    pts.iter()
        .filter(|p| dist(&p[..dim], &[0.0, 0.0][..dim]) < inner)
        .copied()
        .collect()
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    let mut bundle = ReportBundle::new(cfg);
    match cfg.experiment.as_str() {
        "energy-table" => energy_table_experiment(cfg, &mut bundle)?,
        "clog-width" => clog_width(cfg, &mut bundle)?,
        "generic-regular" => generic_regular(cfg, &mut bundle)?,
        "sing1-instability" => sing1_instability(cfg, &mut bundle)?,
        "monneau-sing2" => monneau_sing2(cfg, &mut bundle)?,
        "obstacle-flatness" => obstacle_flatness(cfg, &mut bundle)?,
        "aux-function" => aux_function(cfg, &mut bundle)?,
        other => {
            return Err(LabError::UnknownExperiment {
                name: other.to_string(),
                registered: super::REGISTERED
                    .iter()
                    .map(|(n, _)| n.to_string())
                    .collect(),
            })
        }
    }
    Ok(bundle)
}

/// Checks the preconditions of an experiment without solving anything.
pub(super) fn validate(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.experiment.as_str() {
        "energy-table" => {
            lattice(cfg)?;
        }
        "clog-width" | "generic-regular" | "sing1-instability" => {
            let spec = profile_spec(cfg)?;
            perturbed_problem(lattice(cfg)?, &spec, &Perturbation::from_config(cfg))?;
        }
        "monneau-sing2" => {
            monneau_problems(cfg)?;
        }
        "obstacle-flatness" => {
            obstacle_data(cfg)?;
        }
        "aux-function" => {
            if let Some(r) = cfg.radii.iter().find(|r| !(**r > 0.0 && **r < 0.5)) {
                return Err(LabError::Config(format!(
                    "aux-function radii must lie in (0, 1/2), got {r}"
                )));
            }
        }
        _ => unreachable!("names are checked when the config is resolved"),
    }
    Ok(())
}

fn energy_table_experiment(cfg: &ExperimentConfig, b: &mut ReportBundle) -> Result<()> {
    let t = energy_table_with(cfg.dim, cfg.spacing, TABLE_DRAWS, cfg.seed)?;
    let names = ["W0", "W1", "W2", "W3"];
    let families = ["stable", "unstable", "hybrid", "parabola"];
    let mut csv = String::from("name,family,value,ratio,spread\n");
    for k in 0..4 {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            names[k],
            families[k],
            fmt_num(t.values[k]),
            fmt_num(t.ratios[k]),
            fmt_num(t.spreads[k])
        );
        b.num(names[k], t.values[k]);
        b.num(&format!("{}_ratio", names[k]), t.ratios[k]);
    }
    b.table("table", csv);
    let ok = [(1, 1.5), (2, 1.75), (3, 2.0)]
        .iter()
        .all(|&(k, target)| (t.ratios[k] - target).abs() <= RATIO_TOL);
    b.verdict("ratios", ok);
    if cfg.dim == 1 {
        b.verdict("anchor_w0", (t.values[0] - 1.0 / 6.0).abs() <= ANCHOR_TOL);
    }
    // Weiss series of the exact unstable profile and the stable profile fields
    let lat = lattice(cfg)?;
    let e = direction(cfg);
    let uh = MembraneStack::from_profile(lat, &ProfileSpec::UH { e })?;
    let series = weiss_series(&uh, &[0.0, 0.0][..cfg.dim], &[0.25, 0.5, 0.75, 1.0])?;
    b.table("series", series_csv(&[&series])?);
    if cfg.dim == 1 {
        let sh = MembraneStack::from_profile(lat, &ProfileSpec::SH { e })?;
        for k in 0..3 {
            let mut out = Vec::new();
            sh.field(k).write_csv(&mut out)?;
            b.table(
                &format!("sh_u{}", k + 1),
                String::from_utf8(out).expect("ascii"),
            );
        }
    }
    Ok(())
}

/// Width analysis at the intersection point nearest the origin.
struct WidthAnalysis {
    center: Point,
    rows_gamma1: Vec<WidthRow>,
    rows_gamma2: Vec<WidthRow>,
    angles: String,
    log_ratio: f64,
    linear_drift: f64,
    scales: usize,
}

impl WidthAnalysis {
    fn log_band(&self) -> bool {
        self.scales >= MIN_SCALES && self.log_ratio <= BAND_RATIO
    }

    fn linear_constant(&self) -> bool {
        self.linear_drift.abs() <= CONSTANT_DRIFT
    }

    fn record(&self, b: &mut ReportBundle) {
        b.num("center_x1", self.center[0]);
        b.num("center_x2", self.center[1]);
        b.num("log_scaled_ratio", self.log_ratio);
        b.num("linear_scaled_drift", self.linear_drift);
        b.int("width_scales", self.scales as u64);
        b.verdict("log_band", self.log_band());
        b.verdict("linear_not_constant", !self.linear_constant());
        b.table("width", width_csv(&self.rows_gamma1));
        b.table("width_gamma2", width_csv(&self.rows_gamma2));
        b.table("angles", self.angles.clone());
    }
}

/// Center at the sub-cell crossing of `Γ1` and `Γ2`: the closest pair of
/// sub-cell points near any of the intersection nodes. Widths are then
/// measured against the outermost flatness fit.
fn width_analysis(
    stack: &MembraneStack,
    pts: &[Point],
    radii: &[f64],
) -> Result<Option<WidthAnalysis>> {
    let lat = *stack.lattice();
    let dim = lat.dim();
    let h = lat.spacing();
    if pts.is_empty() {
        return Ok(None);
    }
    let (s1, s2) = stack_gammas_subcell(stack, SUBCELL_CONTACT_TOL)?;
    let reach = INTERSECTION_CELLS * h;
    let mut best = (f64::INFINITY, pts[0]);
    for seed in pts {
        for p in s1
            .points
            .iter()
            .filter(|p| dist(&p[..dim], &seed[..dim]) <= reach)
        {
            for q in s2
                .points
                .iter()
                .filter(|q| dist(&q[..dim], &p[..dim]) <= reach)
            {
                let d = dist(&p[..dim], &q[..dim]);
                if d < best.0 {
                    best = (d, [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                }
            }
        }
    }
    let center = best.1;
    let rs = usable_radii(&lat, &center, radii);
    if rs.is_empty() {
        return Ok(None);
    }
    let (u, w) = stack.pair_view()?;
    let fit = fit_flatness(&u, &w, &center[..dim], rs[0], FitMode::R)?;
    let mut ascending = rs.clone();
    ascending.reverse();
    let rows_gamma1 = width_profile(&s1, &center[..dim], &fit.alpha, 0.0, &ascending)?;
    let rows_gamma2 = width_profile(&s2, &center[..dim], &fit.beta, 0.0, &ascending)?;
    let measured: Vec<WidthRow> = rows_gamma1
        .iter()
        .filter(|r| r.width.is_some())
        .copied()
        .collect();
    let logs: Vec<f64> = measured.iter().map(|r| r.log_scaled.unwrap()).collect();
    let lin: Vec<f64> = measured.iter().map(|r| r.linear_scaled.unwrap()).collect();
    let lin_r: Vec<f64> = measured.iter().map(|r| r.r).collect();
    let dynamics = angle_dynamics(stack, &center[..dim], &rs, FitMode::R)?;
    let mut angles = String::from("r,angle_gap,epsilon,log_scaled_gap\n");
    for (i, lg) in dynamics.log_scaled_gap().iter().enumerate() {
        let _ = writeln!(
            angles,
            "{},{},{},{}",
            fmt_num(dynamics.radii[i]),
            fmt_num(dynamics.angle_gap[i]),
            fmt_num(dynamics.epsilon[i]),
            fmt_num(*lg)
        );
    }
    let scales = measured.len();
    Ok(Some(WidthAnalysis {
        center,
        rows_gamma1,
        rows_gamma2,
        angles,
        log_ratio: max_over_min(&logs),
        linear_drift: relative_drift(&lin_r, &lin),
        scales,
    }))
}

fn clog_width(cfg: &ExperimentConfig, b: &mut ReportBundle) -> Result<()> {
    let spec = profile_spec(cfg)?;
    let pert = Perturbation::from_config(cfg);
    let (stack, report) = solve_membranes(&perturbed_problem(lattice(cfg)?, &spec, &pert)?)?;
    b.int("sweeps", report.sweeps as u64);
    b.verdict("solver_converged", report.converged);
    let (_, _, pts) = intersection_points(&stack)?;
    let inner = inner_points(cfg.dim, &pts, cfg.inner_radius);
    b.int("intersections_inner", inner.len() as u64);
    match width_analysis(&stack, &inner, &cfg.radii)? {
        Some(w) => w.record(b),
        None => b.verdict("log_band", false),
    }
    Ok(())
}

fn generic_regular(cfg: &ExperimentConfig, b: &mut ReportBundle) -> Result<()> {
    let spec = profile_spec(cfg)?;
    let pert = Perturbation::from_config(cfg);
    let ((g1p, g2p), (g1q, g2q)) = pert.gammas()?;
    let (d1, d2) = ((g1p - g1q).abs(), (g2p - g2q).abs());
    b.num("gamma1_phi", g1p);
    b.num("gamma2_phi", g2p);
    b.num("gamma1_psi", g1q);
    b.num("gamma2_psi", g2q);
    // alternative one of the dichotomy with r0 = 4 · inner radius
    let r0 = 4.0 * cfg.inner_radius;
    let predicted_empty = d1 >= 0.5 * r0 * d2;
    b.text(
        "predicted",
        if predicted_empty { "empty" } else { "nonempty" },
    );

    let lat = lattice(cfg)?;
    let (stack, report) = solve_membranes(&perturbed_problem(lat, &spec, &pert)?)?;
    b.int("sweeps", report.sweeps as u64);
    b.verdict("solver_converged", report.converged);
    let (g1, g2, pts) = intersection_points(&stack)?;
    b.table("gamma", gamma_csv(&[&g1, &g2])?);
    let inner = inner_points(cfg.dim, &pts, cfg.inner_radius);
    let nearest = nearest_distance(cfg.dim, &pts);
    b.num("nearest_intersection", nearest);
    let mut sweep = String::from("r,count\n");
    let mut rho = cfg.inner_radius;
    while rho >= MIN_RADIUS_CELLS * lat.spacing() {
        let count = inner_points(cfg.dim, &pts, rho).len();
        let _ = writeln!(sweep, "{},{}", fmt_num(rho), count);
        rho *= 0.5;
    }
    b.table("sweep", sweep);
    let observed_empty = inner.is_empty();
    b.text(
        "observed",
        if observed_empty { "empty" } else { "nonempty" },
    );
    b.int("intersections_inner", inner.len() as u64);
    b.verdict("alternative", observed_empty == predicted_empty);

    let classes = classify_intersections(&stack, cfg.inner_radius, &cfg.radii)?;
    b.table("classification", classification_csv(cfg.dim, &classes)?);
    record_counts(b, &classes);
    if !observed_empty {
        match width_analysis(&stack, &inner, &cfg.radii)? {
            Some(w) => w.record(b),
            None => b.verdict("log_band", false),
        }
    }
    Ok(())
}

fn record_counts(b: &mut ReportBundle, classes: &[PointClass]) {
    for (v, n) in Verdict::ALL.iter().zip(verdict_counts(classes)) {
        b.int(&format!("count_{}", v.as_str()), n as u64);
    }
}

fn sing1_instability(cfg: &ExperimentConfig, b: &mut ReportBundle) -> Result<()> {
    let spec = profile_spec(cfg)?;
    let pert = Perturbation::from_config(cfg);
    let ((_, g2p), (_, g2q)) = pert.gammas()?;
    b.num("gamma2_gap", (g2p - g2q).abs());
    b.verdict(
        "gamma2_mismatch",
        (g2p - g2q).abs() > 1e-6 && cfg.amplitude > 0.0,
    );

    let lat = lattice(cfg)?;
    let (stack, report) = solve_membranes(&perturbed_problem(lat, &spec, &pert)?)?;
    b.int("sweeps", report.sweeps as u64);
    b.verdict("solver_converged", report.converged);
    let (g1, g2, pts) = intersection_points(&stack)?;
    b.table("gamma", gamma_csv(&[&g1, &g2])?);
    b.num("nearest_intersection", nearest_distance(cfg.dim, &pts));
    let classes = classify_intersections(&stack, cfg.inner_radius, &cfg.radii)?;
    b.table("classification", classification_csv(cfg.dim, &classes)?);
    record_counts(b, &classes);
    let sing1 = classes
        .iter()
        .filter(|c| c.verdict == Verdict::Sing1)
        .count();
    b.verdict("no_sing1", sing1 == 0);

    // control: the unperturbed data classify as Sing1 at the origin
    let (control, _) = solve_membranes(&MembraneProblem::from_profile(lat, &spec)?)?;
    let c = classify_point(&control, &[0.0, 0.0][..cfg.dim], &cfg.radii)?;
    b.text("control_verdict", c.verdict.as_str());
    b.num("control_energy", c.energy);
    b.verdict("control_sing1", c.verdict == Verdict::Sing1);
    Ok(())
}

/// Cubic harmonic added to every membrane: `Re z³` in the plane, `x³` on
/// the line. It leaves all differences, hence all contact sets, unchanged.
fn cubic_shift(amplitude: f64, x: &[f64]) -> f64 {
    if x.len() == 2 {
        amplitude * (x[0].powi(3) - 3.0 * x[0] * x[1] * x[1])
    } else {
        amplitude * x[0].powi(3)
    }
}

const FORCES_N4: [f64; 4] = [1.5, 0.5, -0.5, -1.5];

struct MonneauSetup {
    n3: MembraneProblem,
    n3_reference: Vec<SymMatrix>,
    n4: MembraneProblem,
    n4_reference: Vec<SymMatrix>,
}

fn monneau_problems(cfg: &ExperimentConfig) -> Result<MonneauSetup> {
    if cfg.profile != "parabola" {
        return Err(LabError::Config(
            "monneau-sing2 needs parabola boundary data".into(),
        ));
    }
    let spec = profile_spec(cfg)?;
    let reference = ProfileSpec::Parabola {
        a: matrix(cfg.dim, &cfg.reference_a),
        b: matrix(cfg.dim, &cfg.reference_b),
    };
    if !validate_spec(&reference).passed() {
        return Err(LabError::InvalidProfile(
            "reference parabola violates the parabola constraints".into(),
        ));
    }
    let lat = lattice(cfg)?;
    let amp = cfg.amplitude;
    let n3 = MembraneProblem::from_boundary_fn(lat, vec![1.0, 0.0, -1.0], |x| {
        let t = spec.evaluate(x).triple().expect("parabola triple");
        let s = cubic_shift(amp, x);
        t.iter().map(|v| v + s).collect()
    })?;
    let (ra, rb) = (
        matrix(cfg.dim, &cfg.reference_a),
        matrix(cfg.dim, &cfg.reference_b),
    );
    let n3_reference = vec![ra, ra.combine(-1.0, &rb, -1.0), rb];

    let d = cfg.dim as f64;
    let data: Vec<SymMatrix> = FORCES_N4
        .iter()
        .map(|f| SymMatrix::scaled_identity(cfg.dim, f / d))
        .collect();
    let n4 = MembraneProblem::from_boundary_fn(lat, FORCES_N4.to_vec(), |x| {
        let s = cubic_shift(amp, x);
        data.iter().map(|a| 0.5 * a.quad(x) + s).collect()
    })?;
    let n4_reference = if cfg.dim == 1 {
        data.clone()
    } else {
        let tilt = [0.05, -0.05, 0.05, -0.05];
        FORCES_N4
            .iter()
            .zip(tilt)
            .map(|(f, t)| SymMatrix::new_2d(f / d + t, 0.0, f / d - t))
            .collect()
    };
    Ok(MonneauSetup {
        n3,
        n3_reference,
        n4,
        n4_reference,
    })
}

fn monneau_sing2(cfg: &ExperimentConfig, b: &mut ReportBundle) -> Result<()> {
    let setup = monneau_problems(cfg)?;
    let origin = [0.0, 0.0];
    let o = &origin[..cfg.dim];
    let mut radii: Vec<f64> = cfg.radii.clone();
    radii.sort_by(f64::total_cmp);

    let (s3, rep3) = solve_membranes(&setup.n3)?;
    let (s4, rep4) = solve_membranes(&setup.n4)?;
    b.verdict("solver_converged", rep3.converged && rep4.converged);
    let m3 = monneau_series(&s3, &setup.n3_reference, o, &radii)?;
    let w3 = weiss_series(&s3, o, &radii)?;
    let m4 = monneau_series(&s4, &setup.n4_reference, o, &radii)?;
    b.table("series", series_csv(&[&w3, &m3])?);
    b.table("series_n4", series_csv(&[&m4])?);
    b.num("monneau_n3_worst_drop", m3.worst_drop);
    b.num("monneau_n4_worst_drop", m4.worst_drop);
    b.num("weiss_n3_worst_drop", w3.worst_drop);
    b.verdict("monneau_n3_monotone", m3.monotone);
    b.verdict("monneau_n4_monotone", m4.monotone);
    b.verdict("weiss_n3_monotone", w3.monotone);
    let c = classify_point(&s3, o, &radii)?;
    b.text("center_verdict", c.verdict.as_str());
    b.num("center_energy", c.energy);
    b.verdict("center_sing2", c.verdict == Verdict::Sing2);
    Ok(())
}

fn obstacle_data(cfg: &ExperimentConfig) -> Result<(Lattice, Vec<f64>)> {
    let lat = lattice(cfg)?;
    let pert = Perturbation::from_config(cfg);
    let e = direction(cfg);
    let data: Vec<f64> = lat
        .points()
        .map(|(_, p)| {
            let x = &p[..cfg.dim];
            0.5 * e.dot(x).max(0.0).powi(2) + pert.at(x).0
        })
        .collect();
    let mask = lat.ball_mask(&[0.0, 0.0], lat.half_width());
    for node in crate::solver::boundary_layer(&lat, &mask) {
        if !(data[node] >= 0.0) {
            return Err(LabError::InvalidProblem(format!(
                "obstacle boundary value {} at {:?} is negative; φ must be non-negative on the perturbed half",
                data[node],
                lat.point(node)
            )));
        }
    }
    Ok((lat, data))
}

fn obstacle_flatness(cfg: &ExperimentConfig, b: &mut ReportBundle) -> Result<()> {
    let (lat, data) = obstacle_data(cfg)?;
    let dim = cfg.dim;
    let (u, report) = solve_obstacle(&data, lat, DEFAULT_TOLERANCE, 200 * lat.per_axis())?;
    b.int("sweeps", report.sweeps as u64);
    b.verdict("solver_converged", report.converged);
    let gamma = extract_gamma_subcell(
        &lat,
        u.mask(),
        u.values(),
        SUBCELL_CONTACT_TOL,
        GammaLabel::GammaU,
    );
    b.table("gamma", gamma_csv(&[&gamma])?);
    let Some(center) = gamma.points.iter().copied().min_by(|p, q| {
        dist(&p[..dim], &[0.0, 0.0][..dim]).total_cmp(&dist(&q[..dim], &[0.0, 0.0][..dim]))
    }) else {
        b.verdict("flatness_decay", false);
        return Ok(());
    };
    b.num("center_x1", center[0]);
    b.num("center_x2", center[1]);
    let rs = usable_radii(&lat, &center, &cfg.radii);
    if rs.len() < 2 {
        b.verdict("flatness_decay", false);
        return Ok(());
    }
    let outer = fit_flatness(&u, &u, &center[..dim], rs[0], FitMode::R)?;
    let mut ascending = rs.clone();
    ascending.reverse();
    let widths = width_profile(&gamma, &center[..dim], &outer.alpha, 0.0, &ascending)?;
    let mut csv = String::from("r,epsilon,width,linear_scaled,angle\n");
    let mut eps = Vec::new();
    for row in &widths {
        let fit = fit_flatness(&u, &u, &center[..dim], row.r, FitMode::R)?;
        eps.push(fit.epsilon);
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_num(row.r),
            fmt_num(fit.epsilon),
            fmt_num(row.width.unwrap_or(f64::NAN)),
            fmt_num(row.linear_scaled.unwrap_or(f64::NAN)),
            fmt_num(fit.alpha.angle())
        );
    }
    b.table("flatness", csv);
    // ε(r) ≈ C r^a by least squares in log-log coordinates
    let exponent = loglog_slope(&ascending, &eps);
    b.num("flatness_exponent", exponent);
    b.verdict(
        "flatness_decay",
        exponent > 0.0 && eps[0] < eps[eps.len() - 1],
    );
    Ok(())
}

/// Least-squares slope of `log v` against `log r`.
fn loglog_slope(r: &[f64], v: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(v)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn aux_function(cfg: &ExperimentConfig, b: &mut ReportBundle) -> Result<()> {
    let (a1, a2) = aux_constants();
    let d12 = aux_d12();
    b.num("A1", a1);
    b.num("A2", a2);
    b.num("d12_h0", d12);
    b.verdict("A1", (aux_a1() - 1.0 / PI).abs() <= CONSTANT_TOL);
    b.verdict("d12_h0", (d12 - 2.0 * LN_2 / PI).abs() <= CONSTANT_TOL);
    let with = aux_remainder_check(&cfg.radii)?;
    let without = aux_remainder_check_with(&cfg.radii, 0.0)?;
    b.table("remainder", remainder_csv(&with)?);
    b.table("remainder_without_log", remainder_csv(&without)?);
    b.num("ratio", with.ratio);
    b.num("log_slope", with.log_slope);
    b.num("ratio_without_log", without.ratio);
    b.num("log_slope_without_log", without.log_slope);
    b.verdict("remainder_bounded", with.passed);
    b.verdict("log_term_needed", !without.passed);
    Ok(())
}
