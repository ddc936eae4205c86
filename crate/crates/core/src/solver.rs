//! Discrete minimisation of the ordered N-membrane energy, the one-phase
//! obstacle problem, and residual/membership diagnostics.
//!
//! The discrete energy is
//!
//! ```text
//! E = Σ_k [ Σ_edges ½ h^(d-2) (u_k(i) - u_k(j))² + Σ_masked h^d f_k u_k(i) ]
//! ```
//!
//! where the edge sum runs over lattice edges with at least one masked
//! endpoint. Unmasked nodes carry the Dirichlet data.
//!
//! Sweeps are red-black: nodes of one colour only see nodes of the other
//! colour through the 5-point stencil, so every colour phase is computed
//! from a frozen snapshot and the result does not depend on the number of
//! worker threads.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid::{Lattice, ScalarField};
use crate::profiles::ProfileSpec;

/// Environment variable selecting the number of worker threads.
pub const WORKERS_ENV: &str = "MEMBRANE_LAB_WORKERS";
/// Largest supported number of membranes.
pub const MAX_MEMBRANES: usize = 16;
/// Default stopping tolerance on the largest nodewise update.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Ordering defect tolerated by the diagnostics.
pub const ORDERING_TOL: f64 = 1e-9;

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// The shared worker pool, sized from `MEMBRANE_LAB_WORKERS` when set.
pub fn worker_pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build worker pool")
    })
}

/// Weighted least-squares projection of `values` onto non-increasing
/// sequences (pool-adjacent-violators).
pub fn pava_decreasing(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(LabError::InvalidArgument(format!(
            "pava needs equal non-empty lengths, got {} values and {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(LabError::InvalidArgument(format!(
            "pava weights must be positive, got {w}"
        )));
    }
    // (weighted sum, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v * w, w, 1));
        while blocks.len() > 1 {
            let (s1, w1, n1) = blocks[blocks.len() - 1];
            let (s0, w0, n0) = blocks[blocks.len() - 2];
            if s0 / w0 < s1 / w1 {
                blocks.pop();
                let last = blocks.last_mut().unwrap();
                *last = (s0 + s1, w0 + w1, n0 + n1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, w, n) in blocks {
        out.extend(std::iter::repeat_n(s / w, n));
    }
    Ok(out)
}

/// Equal-weight PAVA on a short slice, in place and allocation free.
fn pava_in_place(v: &mut [f64]) {
    let n = v.len();
    if n <= 1 {
        return;
    }
    let mut sums = [0.0; MAX_MEMBRANES];
    let mut lens = [0usize; MAX_MEMBRANES];
    let mut nb = 0;
    for &x in v.iter() {
        sums[nb] = x;
        lens[nb] = 1;
        nb += 1;
        while nb > 1 && sums[nb - 2] / (lens[nb - 2] as f64) < sums[nb - 1] / (lens[nb - 1] as f64)
        {
            sums[nb - 2] += sums[nb - 1];
            lens[nb - 2] += lens[nb - 1];
            nb -= 1;
        }
    }
    let mut i = 0;
    for b in 0..nb {
        let mean = sums[b] / lens[b] as f64;
        for _ in 0..lens[b] {
            v[i] = mean;
            i += 1;
        }
    }
}

/// The ordered N-membrane problem on a masked lattice.
#[derive(Debug, Clone)]
pub struct MembraneProblem {
    lattice: Lattice,
    mask: Vec<bool>,
    forces: Vec<f64>,
    boundary: Vec<Vec<f64>>,
    tolerance: f64,
    max_sweeps: usize,
    relaxation: Option<f64>,
}

impl MembraneProblem {
    /// `boundary[k][node]` is the Dirichlet value of membrane `k`; only
    /// entries at unmasked nodes are read. The domain is the ball
    /// `{|x| < R}`.
    pub fn new(lattice: Lattice, forces: Vec<f64>, boundary: Vec<Vec<f64>>) -> Result<Self> {
        let mask = lattice.ball_mask(&[0.0, 0.0], lattice.half_width());
        let p = Self {
            lattice,
            mask,
            forces,
            boundary,
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: 200 * lattice.per_axis(),
            relaxation: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Samples the boundary data from `g(x) = (b_1, …, b_N)` at every node.
    pub fn from_boundary_fn(
        lattice: Lattice,
        forces: Vec<f64>,
        g: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let n = forces.len();
        let mut boundary = vec![vec![0.0; lattice.len()]; n];
        for (node, p) in lattice.points() {
            let v = g(&p[..lattice.dim()]);
            if v.len() != n {
                return Err(LabError::InvalidProblem(format!(
                    "boundary function returned {} values for {n} membranes",
                    v.len()
                )));
            }
            for k in 0..n {
                boundary[k][node] = v[k];
            }
        }
        Self::new(lattice, forces, boundary)
    }

    /// Three membranes with forces `(1, 0, -1)` and data from a profile
    /// triple.
    pub fn from_profile(lattice: Lattice, spec: &ProfileSpec) -> Result<Self> {
        let report = crate::profiles::validate_spec(spec);
        if !report.passed() {
            return Err(LabError::InvalidProfile(format!(
                "{} failed validation",
                spec.name()
            )));
        }
        if spec.dim() != lattice.dim() {
            return Err(LabError::InvalidProblem(format!(
                "profile is {}-dimensional, lattice {}-dimensional",
                spec.dim(),
                lattice.dim()
            )));
        }
        Self::from_boundary_fn(lattice, vec![1.0, 0.0, -1.0], |x| {
            spec.evaluate(x)
                .triple()
                .map(|t| t.to_vec())
                .unwrap_or_else(|| vec![f64::NAN; 3])
        })
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.mask = mask;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        self.tolerance = tolerance;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_sweeps(mut self, max_sweeps: usize) -> Self {
        self.max_sweeps = max_sweeps;
        self
    }

    /// Over-relaxation factor in `(0, 2)`; `1` is plain projected
    /// Gauss–Seidel.
    pub fn with_relaxation(mut self, omega: f64) -> Result<Self> {
        self.relaxation = Some(omega);
        self.validate()?;
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn forces(&self) -> &[f64] {
        &self.forces
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn boundary(&self) -> &[Vec<f64>] {
        &self.boundary
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn max_sweeps(&self) -> usize {
        self.max_sweeps
    }

    pub fn relaxation(&self) -> f64 {
        self.relaxation
            .unwrap_or_else(|| default_relaxation(&self.lattice))
    }

    fn validate(&self) -> Result<()> {
        let n = self.forces.len();
        if !(2..=MAX_MEMBRANES).contains(&n) {
            return Err(LabError::InvalidProblem(format!(
                "number of membranes must be in 2..={MAX_MEMBRANES}, got {n}"
            )));
        }
        if self.forces.windows(2).any(|f| !(f[0] > f[1])) {
            return Err(LabError::InvalidProblem(format!(
                "forces must be strictly decreasing, got {:?}",
                self.forces
            )));
        }
        if self.boundary.len() != n || self.boundary.iter().any(|b| b.len() != self.lattice.len()) {
            return Err(LabError::InvalidProblem(
                "boundary data must hold one value per node for every membrane".into(),
            ));
        }
        if self.mask.len() != self.lattice.len() {
            return Err(LabError::InvalidProblem("mask length mismatch".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(LabError::InvalidProblem(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if let Some(w) = self.relaxation {
            if !(w > 0.0 && w < 2.0) {
                return Err(LabError::InvalidProblem(format!(
                    "relaxation factor must lie in (0, 2), got {w}"
                )));
            }
        }
        let per = self.lattice.per_axis();
        for node in 0..self.lattice.len() {
            if self.mask[node] {
                let m = self.lattice.multi_index(node);
                let on_edge = (0..self.lattice.dim()).any(|a| m[a] == 0 || m[a] + 1 == per);
                if on_edge {
                    return Err(LabError::InvalidProblem(format!(
                        "masked node {node} lies on the lattice edge"
                    )));
                }
            }
        }
        for node in boundary_layer(&self.lattice, &self.mask) {
            for k in 0..n {
                let v = self.boundary[k][node];
                if !v.is_finite() {
                    return Err(LabError::InvalidProblem(format!(
                        "non-finite boundary value for membrane {} at node {node}",
                        k + 1
                    )));
                }
                if k + 1 < n {
                    let gap = v - self.boundary[k + 1][node];
                    if gap < -1e-12 {
                        return Err(LabError::OrderingViolated {
                            node,
                            upper: k + 1,
                            lower: k + 2,
                            gap,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Near-optimal SOR factor for the Dirichlet Laplacian on a domain of
/// diameter `2R`.
pub fn default_relaxation(lattice: &Lattice) -> f64 {
    let t = std::f64::consts::PI * lattice.spacing() / (2.0 * lattice.half_width());
    2.0 / (1.0 + t.sin())
}

/// Unmasked nodes adjacent to a masked node: the ones read by the stencil.
pub fn boundary_layer(lattice: &Lattice, mask: &[bool]) -> Vec<usize> {
    (0..lattice.len())
        .filter(|&n| !mask[n] && lattice.neighbors(n).any(|m| mask[m]))
        .collect()
}

/// The discrete membranes `(u_1, …, u_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneStack {
    fields: Vec<ScalarField>,
    forces: Vec<f64>,
}

impl MembraneStack {
    pub fn new(fields: Vec<ScalarField>, forces: Vec<f64>) -> Result<Self> {
        if fields.is_empty() || fields.len() != forces.len() {
            return Err(LabError::InvalidArgument(format!(
                "{} fields for {} forces",
                fields.len(),
                forces.len()
            )));
        }
        let lat = *fields[0].lattice();
        if fields
            .iter()
            .any(|f| *f.lattice() != lat || f.mask() != fields[0].mask())
        {
            return Err(LabError::InvalidArgument(
                "stack fields must share lattice and mask".into(),
            ));
        }
        Ok(Self { fields, forces })
    }

    /// Samples a validated profile triple at every node; forces `(1, 0, -1)`.
    pub fn from_profile(lattice: Lattice, spec: &ProfileSpec) -> Result<Self> {
        let report = crate::profiles::validate_spec(spec);
        if !report.passed() {
            return Err(LabError::InvalidProfile(format!(
                "{} failed validation",
                spec.name()
            )));
        }
        if spec.evaluate(&vec![0.0; spec.dim()]).triple().is_none() {
            return Err(LabError::InvalidProfile(format!(
                "{} is not a membrane triple",
                spec.name()
            )));
        }
        let fields = (0..3)
            .map(|k| ScalarField::from_fn(lattice, |x| spec.evaluate(x).triple().unwrap()[k]))
            .collect();
        Self::new(fields, vec![1.0, 0.0, -1.0])
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, k: usize) -> &ScalarField {
        &self.fields[k]
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn forces(&self) -> &[f64] {
        &self.forces
    }

    pub fn lattice(&self) -> &Lattice {
        self.fields[0].lattice()
    }

    pub fn mask(&self) -> &[bool] {
        self.fields[0].mask()
    }

    /// Smallest `u_k - u_{k+1}` over masked nodes and the index `k` (0-based)
    /// and node where it occurs.
    pub fn min_gap(&self) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0);
        for node in 0..self.lattice().len() {
            if !self.mask()[node] {
                continue;
            }
            for k in 0..self.len() - 1 {
                let g = self.fields[k].value(node) - self.fields[k + 1].value(node);
                if g < best.0 {
                    best = (g, k, node);
                }
            }
        }
        best
    }

    pub fn check_ordering(&self, tol: f64) -> Result<()> {
        let (gap, k, node) = self.min_gap();
        if gap < -tol {
            return Err(LabError::OrderingViolated {
                node,
                upper: k + 1,
                lower: k + 2,
                gap,
            });
        }
        Ok(())
    }

    /// The pair `(u, w) = (u_1, -u_3)` of a three-membrane stack.
    pub fn pair_view(&self) -> Result<(ScalarField, ScalarField)> {
        if self.len() != 3 {
            return Err(LabError::InvalidArgument(format!(
                "the pair view needs 3 membranes, got {}",
                self.len()
            )));
        }
        Ok((self.fields[0].clone(), self.fields[2].map(|v| -v)))
    }

    /// Discrete energy of the stack.
    pub fn energy(&self) -> f64 {
        let n = self.len();
        let lat = *self.lattice();
        let mut flat = vec![0.0; lat.len() * n];
        for (k, f) in self.fields.iter().enumerate() {
            for (node, v) in f.values().iter().enumerate() {
                flat[node * n + k] = *v;
            }
        }
        discrete_energy(&lat, self.mask(), &self.forces, &flat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub sweeps: usize,
    pub max_update: f64,
    pub energy: f64,
    /// Energy after each sweep, starting with the initial guess.
    pub energy_history: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Copy)]
enum Projection {
    Ordered,
    NonNegative,
}

impl Projection {
    fn apply(self, v: &mut [f64]) {
        match self {
            Projection::Ordered => pava_in_place(v),
            Projection::NonNegative => {
                for x in v {
                    *x = x.max(0.0);
                }
            }
        }
    }
}

/// Energy of node-major values `vals[node * n + k]`.
fn discrete_energy(lat: &Lattice, mask: &[bool], forces: &[f64], vals: &[f64]) -> f64 {
    let n = forces.len();
    let h = lat.spacing();
    let d = lat.dim() as i32;
    let edge_w = 0.5 * h.powi(d - 2);
    let vol = h.powi(d);
    const CHUNK: usize = 2048;
    let nodes = lat.len();
    let partials: Vec<f64> = worker_pool().install(|| {
        (0..nodes.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = 0.0;
                for i in c * CHUNK..((c + 1) * CHUNK).min(nodes) {
                    for axis in 0..lat.dim() {
                        if let Some(j) = lat.step(i, axis, 1) {
                            if mask[i] || mask[j] {
                                for k in 0..n {
                                    let diff = vals[i * n + k] - vals[j * n + k];
                                    acc += edge_w * diff * diff;
                                }
                            }
                        }
                    }
                    if mask[i] {
                        for k in 0..n {
                            acc += vol * forces[k] * vals[i * n + k];
                        }
                    }
                }
                acc
            })
            .collect()
    });
    partials.iter().sum()
}

/// Boundary-interpolant initial guess: along each axis line through a
/// masked node, linear interpolation between the nearest unmasked nodes;
/// the axis values are averaged.
fn initial_guess(lat: &Lattice, mask: &[bool], boundary: &[Vec<f64>]) -> Vec<f64> {
    let n = boundary.len();
    let mut vals = vec![0.0; lat.len() * n];
    for node in 0..lat.len() {
        if !mask[node] {
            for k in 0..n {
                vals[node * n + k] = boundary[k][node];
            }
            continue;
        }
        let mut acc = vec![0.0; n];
        for axis in 0..lat.dim() {
            let walk = |step: isize| {
                let mut cur = node;
                let mut dist = 0usize;
                while mask[cur] {
                    cur = lat
                        .step(cur, axis, step)
                        .expect("masked nodes are interior");
                    dist += 1;
                }
                (cur, dist as f64)
            };
            let (lo, dl) = walk(-1);
            let (hi, dh) = walk(1);
            for k in 0..n {
                acc[k] += (boundary[k][lo] * dh + boundary[k][hi] * dl) / (dl + dh);
            }
        }
        for k in 0..n {
            vals[node * n + k] = acc[k] / lat.dim() as f64;
        }
        pava_in_place(&mut vals[node * n..node * n + n]);
    }
    vals
}

struct Sweeper<'a> {
    lat: Lattice,
    forces: &'a [f64],
    projection: Projection,
    omega: f64,
    /// Masked nodes by colour, each followed by its neighbour list.
    colors: [Vec<usize>; 2],
    neighbors: [Vec<usize>; 2],
}

impl<'a> Sweeper<'a> {
    fn new(
        lat: Lattice,
        mask: &[bool],
        forces: &'a [f64],
        projection: Projection,
        omega: f64,
    ) -> Self {
        let mut colors = [Vec::new(), Vec::new()];
        let mut neighbors = [Vec::new(), Vec::new()];
        for node in 0..lat.len() {
            if !mask[node] {
                continue;
            }
            let m = lat.multi_index(node);
            let c = (m[0] + m[1]) % 2;
            colors[c].push(node);
            neighbors[c].extend(lat.neighbors(node));
        }
        Self {
            lat,
            forces,
            projection,
            omega,
            colors,
            neighbors,
        }
    }

    /// One red-black sweep; returns the largest nodewise update.
    fn sweep(&self, vals: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        let n = self.forces.len();
        let deg = 2 * self.lat.dim();
        let h2 = self.lat.spacing() * self.lat.spacing();
        let inv = 1.0 / deg as f64;
        let mut max_update: f64 = 0.0;
        for c in 0..2 {
            let nodes = &self.colors[c];
            let nbrs = &self.neighbors[c];
            scratch.clear();
            scratch.resize(nodes.len() * n, 0.0);
            let snapshot: &[f64] = vals;
            worker_pool().install(|| {
                scratch
                    .par_chunks_mut(n)
                    .enumerate()
                    .with_min_len(256)
                    .for_each(|(idx, out)| {
                        let node = nodes[idx];
                        let nb = &nbrs[idx * deg..(idx + 1) * deg];
                        for k in 0..n {
                            let s: f64 = nb.iter().map(|&j| snapshot[j * n + k]).sum();
                            let m = (s - h2 * self.forces[k]) * inv;
                            let u = snapshot[node * n + k];
                            out[k] = u + self.omega * (m - u);
                        }
                        self.projection.apply(out);
                    });
            });
            for (idx, &node) in nodes.iter().enumerate() {
                for k in 0..n {
                    let new = scratch[idx * n + k];
                    let old = &mut vals[node * n + k];
                    max_update = max_update.max((new - *old).abs());
                    *old = new;
                }
            }
        }
        max_update
    }
}

struct RawSolve {
    vals: Vec<f64>,
    report: SolveReport,
}

#[allow(clippy::too_many_arguments)]
fn run_sweeps(
    lat: Lattice,
    mask: &[bool],
    forces: &[f64],
    projection: Projection,
    omega: f64,
    mut vals: Vec<f64>,
    tolerance: f64,
    max_sweeps: usize,
) -> RawSolve {
    let sweeper = Sweeper::new(lat, mask, forces, projection, omega);
    let mut history = vec![discrete_energy(&lat, mask, forces, &vals)];
    let mut scratch = Vec::new();
    let mut sweeps = 0;
    let mut max_update = f64::INFINITY;
    let mut converged = false;
    while sweeps < max_sweeps {
        max_update = sweeper.sweep(&mut vals, &mut scratch);
        sweeps += 1;
        history.push(discrete_energy(&lat, mask, forces, &vals));
        if max_update < tolerance {
            converged = true;
            break;
        }
    }
    let energy = *history.last().unwrap();
    RawSolve {
        vals,
        report: SolveReport {
            sweeps,
            max_update,
            energy,
            energy_history: history,
            converged,
        },
    }
}

/// Minimises the discrete energy under `u_1 ≥ … ≥ u_N` by projected SOR
/// with a nodewise PAVA projection.
pub fn solve_membranes(problem: &MembraneProblem) -> Result<(MembraneStack, SolveReport)> {
    problem.validate()?;
    let lat = problem.lattice;
    let n = problem.forces.len();
    let init = initial_guess(&lat, &problem.mask, &problem.boundary);
    let raw = run_sweeps(
        lat,
        &problem.mask,
        &problem.forces,
        Projection::Ordered,
        problem.relaxation(),
        init,
        problem.tolerance,
        problem.max_sweeps,
    );
    let fields = (0..n)
        .map(|k| {
            let values = (0..lat.len()).map(|node| raw.vals[node * n + k]).collect();
            ScalarField::with_mask(lat, values, problem.mask.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let stack = MembraneStack::new(fields, problem.forces.clone())?;
    Ok((stack, raw.report))
}

/// Solves `Δu = χ{u>0}`, `u ≥ 0` on the ball `{|x| < R}` by projected SOR.
/// `boundary[node]` is read at unmasked nodes.
pub fn solve_obstacle(
    boundary: &[f64],
    lattice: Lattice,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<(ScalarField, SolveReport)> {
    if boundary.len() != lattice.len() {
        return Err(LabError::InvalidProblem(format!(
            "{} boundary values for {} nodes",
            boundary.len(),
            lattice.len()
        )));
    }
    if !(tolerance > 0.0) {
        return Err(LabError::InvalidProblem(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let mask = lattice.ball_mask(&[0.0, 0.0], lattice.half_width());
    for node in boundary_layer(&lattice, &mask) {
        let v = boundary[node];
        if !(v >= 0.0) || !v.is_finite() {
            return Err(LabError::InvalidProblem(format!(
                "obstacle boundary value {v} at node {node} must be finite and non-negative"
            )));
        }
    }
    let data = vec![boundary.to_vec()];
    let mut init = initial_guess(&lattice, &mask, &data);
    for v in init.iter_mut() {
        *v = v.max(0.0);
    }
    let raw = run_sweeps(
        lattice,
        &mask,
        &[1.0],
        Projection::NonNegative,
        default_relaxation(&lattice),
        init,
        tolerance,
        max_sweeps,
    );
    let field = ScalarField::with_mask(lattice, raw.vals, mask)?;
    Ok((field, raw.report))
}

/// 5-point Laplacian of `f` at an interior node.
pub fn discrete_laplacian(f: &ScalarField, node: usize) -> f64 {
    let lat = f.lattice();
    let h2 = lat.spacing() * lat.spacing();
    let deg = 2 * lat.dim();
    let s: f64 = lat.neighbors(node).map(|j| f.value(j)).sum();
    (s - deg as f64 * f.value(node)) / h2
}

fn is_interior(lat: &Lattice, node: usize) -> bool {
    let m = lat.multi_index(node);
    (0..lat.dim()).all(|a| m[a] > 0 && m[a] + 1 < lat.per_axis())
}

/// Marks masked nodes within `band` (Euclidean) of a node whose indicator
/// differs from their own.
fn near_interface(lat: &Lattice, mask: &[bool], indicator: &[bool], band: f64) -> Vec<bool> {
    let reach = (band / lat.spacing()).floor() as isize;
    let per = lat.per_axis() as isize;
    let r2 = band * band / (lat.spacing() * lat.spacing()) + 1e-9;
    let mut out = vec![false; lat.len()];
    for node in 0..lat.len() {
        if !mask[node] {
            continue;
        }
        let m = lat.multi_index(node);
        let own = indicator[node];
        let jr = if lat.dim() == 2 { reach } else { 0 };
        'search: for di in -reach..=reach {
            for dj in -jr..=jr {
                if ((di * di + dj * dj) as f64) > r2 {
                    continue;
                }
                let (i, j) = (m[0] as isize + di, m[1] as isize + dj);
                if i < 0 || i >= per || j < 0 || (lat.dim() == 2 && j >= per) {
                    continue;
                }
                let other = lat.node([i as usize, j as usize]);
                if mask[other] && indicator[other] != own {
                    out[node] = true;
                    break 'search;
                }
            }
        }
    }
    out
}

/// Options for [`pair_membership`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipOptions {
    /// Threshold deciding `u > w/2` and `w > u/2`.
    pub contact_tolerance: f64,
    /// Nodes closer than this to a change of the indicator are skipped in
    /// the Laplacian tests.
    pub band: f64,
    /// Slack on the Laplacian inequalities.
    pub laplacian_tolerance: f64,
    /// Slack on the pointwise inequalities.
    pub value_tolerance: f64,
}

impl MembershipOptions {
    pub fn for_lattice(lat: &Lattice) -> Self {
        let h = lat.spacing();
        Self {
            contact_tolerance: h * h,
            band: 2.0 * h,
            laplacian_tolerance: 1e-8,
            value_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub subsolution: bool,
    pub supersolution: bool,
    /// Smallest slack over the subsolution inequalities (negative = violated).
    pub sub_margin: f64,
    /// Smallest slack over the supersolution inequalities.
    pub super_margin: f64,
    pub checked_nodes: usize,
}

/// Discrete sub/supersolution test of a pair `(u, w)` for the two-obstacle
/// system: `u, w ≥ 0`, `u ≥ w/2`, `w ≥ u/2`, `Δu ≥ χ{u > w/2}`,
/// `Δw ≥ χ{w > u/2}` (sub) and `Δu ≤ 1`, `Δw ≤ 1` (super).
pub fn pair_membership(
    u: &ScalarField,
    w: &ScalarField,
    opts: &MembershipOptions,
) -> Result<Membership> {
    if u.lattice() != w.lattice() || u.mask() != w.mask() {
        return Err(LabError::InvalidArgument(
            "u and w must share lattice and mask".into(),
        ));
    }
    let lat = *u.lattice();
    let mask = u.mask();
    let ind_u: Vec<bool> = (0..lat.len())
        .map(|n| u.value(n) - 0.5 * w.value(n) > opts.contact_tolerance)
        .collect();
    let ind_w: Vec<bool> = (0..lat.len())
        .map(|n| w.value(n) - 0.5 * u.value(n) > opts.contact_tolerance)
        .collect();
    let near_u = near_interface(&lat, mask, &ind_u, opts.band);
    let near_w = near_interface(&lat, mask, &ind_w, opts.band);
    let mut sub_margin = f64::INFINITY;
    let mut super_margin = f64::INFINITY;
    let mut checked = 0;
    for node in 0..lat.len() {
        if !mask[node] || !is_interior(&lat, node) {
            continue;
        }
        checked += 1;
        let (uv, wv) = (u.value(node), w.value(node));
        let pointwise = uv.min(wv).min(uv - 0.5 * wv).min(wv - 0.5 * uv);
        sub_margin = sub_margin.min(pointwise + opts.value_tolerance);
        let lu = discrete_laplacian(u, node);
        let lw = discrete_laplacian(w, node);
        if !near_u[node] {
            let need = if ind_u[node] { 1.0 } else { 0.0 };
            sub_margin = sub_margin.min(lu - need + opts.laplacian_tolerance);
        }
        if !near_w[node] {
            let need = if ind_w[node] { 1.0 } else { 0.0 };
            sub_margin = sub_margin.min(lw - need + opts.laplacian_tolerance);
        }
        if !near_u[node] && !near_w[node] {
            super_margin = super_margin.min(1.0 - lu.max(lw) + opts.laplacian_tolerance);
        }
    }
    Ok(Membership {
        subsolution: sub_margin >= 0.0,
        supersolution: super_margin >= 0.0,
        sub_margin,
        super_margin,
        checked_nodes: checked,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Largest `|Δu_k - rhs_k|` over checked nodes.
    pub max_residual: f64,
    /// Per-node largest residual; NaN where not checked.
    pub residuals: Vec<f64>,
    pub checked_nodes: usize,
    pub excluded_nodes: usize,
    /// Membership of `(u_1, -u_3)` for three-membrane stacks.
    pub pair: Option<Membership>,
}

/// Discrete Euler–Lagrange residuals. At each node the membranes split into
/// maximal runs of consecutive contacts (`u_k - u_{k+1} ≤ contact_tolerance`);
/// each run must satisfy `Δu_k = mean of its forces`. Nodes within `2h` of
/// a change in the contact pattern are excluded.
pub fn residual_report(stack: &MembraneStack, contact_tolerance: f64) -> Result<ResidualReport> {
    stack.check_ordering(ORDERING_TOL)?;
    let lat = *stack.lattice();
    let mask = stack.mask();
    let n = stack.len();
    let pattern: Vec<Vec<bool>> = (0..n - 1)
        .map(|k| {
            (0..lat.len())
                .map(|node| {
                    stack.field(k).value(node) - stack.field(k + 1).value(node) <= contact_tolerance
                })
                .collect()
        })
        .collect();
    let band = 2.0 * lat.spacing();
    let mut excluded = vec![false; lat.len()];
    for p in &pattern {
        for (node, e) in near_interface(&lat, mask, p, band).into_iter().enumerate() {
            excluded[node] |= e;
        }
    }
    let mut residuals = vec![f64::NAN; lat.len()];
    let mut max_residual: f64 = 0.0;
    let mut checked = 0;
    let mut n_excluded = 0;
    for node in 0..lat.len() {
        if !mask[node] || !is_interior(&lat, node) {
            continue;
        }
        if excluded[node] {
            n_excluded += 1;
            continue;
        }
        checked += 1;
        let mut worst: f64 = 0.0;
        let mut start = 0;
        while start < n {
            let mut end = start;
            while end + 1 < n && pattern[end][node] {
                end += 1;
            }
            let rhs = stack.forces()[start..=end].iter().sum::<f64>() / (end - start + 1) as f64;
            for k in start..=end {
                worst = worst.max((discrete_laplacian(stack.field(k), node) - rhs).abs());
            }
            start = end + 1;
        }
        residuals[node] = worst;
        max_residual = max_residual.max(worst);
    }
    let pair = if n == 3 {
        let (u, w) = stack.pair_view()?;
        let mut opts = MembershipOptions::for_lattice(&lat);
        opts.contact_tolerance = contact_tolerance;
        Some(pair_membership(&u, &w, &opts)?)
    } else {
        None
    };
    Ok(ResidualReport {
        max_residual,
        residuals,
        checked_nodes: checked,
        excluded_nodes: n_excluded,
        pair,
    })
}
