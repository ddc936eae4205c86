//! Uniform lattices on `[-R, R]^d` (d = 1 or 2), ball masks, node-sampled
//! scalar fields, multilinear interpolation and circle traces.
//!
//! Nodes are stored row-major over the axis indices `(i1, i2)`, so `i2`
//! (the `x2` axis) varies fastest. In one dimension the second index is
//! always zero and points carry `x2 = 0`.

use std::io::Write;

use crate::error::{LabError, Result};
use crate::report::fmt_num;

/// Lattice coordinates. In one dimension the second component is zero.
pub type Point = [f64; 2];

const HULL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    dim: usize,
    half_width: f64,
    spacing: f64,
    per_axis: usize,
}

impl Lattice {
    /// Builds the lattice of `[-half_width, half_width]^dim` with the given
    /// spacing. `2 * half_width / spacing` must be an even integer so that the
    /// origin is a node.
    pub fn new(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(LabError::InvalidLattice(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(LabError::InvalidLattice(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(LabError::InvalidLattice(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let cells = 2.0 * half_width / spacing;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) || rounded < 2.0 {
            return Err(LabError::InvalidLattice(format!(
                "2*{half_width}/{spacing} = {cells} is not an integer"
            )));
        }
        let cells = rounded as usize;
        if !cells.is_multiple_of(2) {
            return Err(LabError::InvalidLattice(format!(
                "2*{half_width}/{spacing} = {cells} is odd; the origin would not be a node"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            spacing,
            per_axis: cells + 1,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Nodes per axis.
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn center_index(&self) -> usize {
        self.per_axis / 2
    }

    /// Coordinate of the axis index `i`. The two extreme indices return
    /// exactly `-R` and `R`, the central one exactly `0`.
    pub fn coord(&self, i: usize) -> f64 {
        let c = self.center_index();
        if i == 0 {
            -self.half_width
        } else if i + 1 == self.per_axis {
            self.half_width
        } else {
            (i as f64 - c as f64) * self.spacing
        }
    }

    /// Axis index of an exact node coordinate.
    pub fn axis_index(&self, x: f64) -> Option<usize> {
        let t = (x + self.half_width) / self.spacing;
        let i = t.round();
        if (t - i).abs() > 1e-9 || i < 0.0 || i as usize >= self.per_axis {
            return None;
        }
        Some(i as usize)
    }

    pub fn node(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.per_axis + idx[1]
        }
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        if self.dim == 1 {
            [node, 0]
        } else {
            [node / self.per_axis, node % self.per_axis]
        }
    }

    pub fn point(&self, node: usize) -> Point {
        let [i, j] = self.multi_index(node);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    /// The node located exactly at `p`, if any.
    pub fn node_at(&self, p: &[f64]) -> Option<usize> {
        let i = self.axis_index(p[0])?;
        if self.dim == 1 {
            return Some(i);
        }
        let j = self.axis_index(p[1])?;
        Some(self.node([i, j]))
    }

    /// Nearest node to `p` (clamped into the lattice).
    pub fn nearest_node(&self, p: &[f64]) -> usize {
        let idx = |x: f64| {
            let t = ((x + self.half_width) / self.spacing).round();
            t.clamp(0.0, (self.per_axis - 1) as f64) as usize
        };
        if self.dim == 1 {
            idx(p[0])
        } else {
            self.node([idx(p[0]), idx(p[1])])
        }
    }

    /// Axis neighbours of `node` that exist in the lattice, in the order
    /// `-x1, +x1, -x2, +x2`.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let [i, j] = self.multi_index(node);
        let n = self.per_axis;
        let dim = self.dim;
        let cands: [Option<[usize; 2]>; 4] = [
            (i > 0).then(|| [i - 1, j]),
            (i + 1 < n).then(|| [i + 1, j]),
            (dim == 2 && j > 0).then(|| [i, j.wrapping_sub(1)]),
            (dim == 2 && j + 1 < n).then(|| [i, j + 1]),
        ];
        cands.into_iter().flatten().map(move |m| self.node(m))
    }

    /// Neighbour of `node` one step along `axis` in direction `step` (±1).
    pub fn step(&self, node: usize, axis: usize, step: isize) -> Option<usize> {
        let mut m = self.multi_index(node);
        let v = m[axis] as isize + step;
        if v < 0 || v >= self.per_axis as isize || axis >= self.dim {
            return None;
        }
        m[axis] = v as usize;
        Some(self.node(m))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let lim = self.half_width * (1.0 + HULL_SLACK) + HULL_SLACK;
        p.iter().take(self.dim).all(|x| x.abs() <= lim)
    }

    /// Mask of the ball `{|x - center| < radius}`.
    pub fn ball_mask(&self, center: &[f64], radius: f64) -> Vec<bool> {
        (0..self.len())
            .map(|n| dist(&self.point(n)[..self.dim], &center[..self.dim]) < radius)
            .collect()
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, Point)> + '_ {
        (0..self.len()).map(move |n| (n, self.point(n)))
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Node samples of a function on a lattice together with a domain mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    lattice: Lattice,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ScalarField {
    /// Wraps raw values; the mask defaults to the ball `{|x| < R}`.
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        let mask = lattice.ball_mask(&[0.0, 0.0], lattice.half_width());
        Self::with_mask(lattice, values, mask)
    }

    pub fn with_mask(lattice: Lattice, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != lattice.len() || mask.len() != lattice.len() {
            return Err(LabError::InvalidArgument(format!(
                "field has {} values and {} mask entries for {} nodes",
                values.len(),
                mask.len(),
                lattice.len()
            )));
        }
        if let Some(n) = (0..values.len()).find(|&n| mask[n] && !values[n].is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "non-finite value on masked node {n}"
            )));
        }
        Ok(Self {
            lattice,
            values,
            mask,
        })
    }

    /// Samples `f` at every node (the coordinate slice has length `dim`).
    pub fn from_fn(lattice: Lattice, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = lattice
            .points()
            .map(|(_, p)| f(&p[..lattice.dim()]))
            .collect();
        let mask = lattice.ball_mask(&[0.0, 0.0], lattice.half_width());
        Self {
            lattice,
            values,
            mask,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn is_masked(&self, node: usize) -> bool {
        self.mask[node]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            lattice: self.lattice,
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Multilinear interpolation of the node values at `p`.
    pub fn interpolate(&self, p: &[f64]) -> Result<f64> {
        let lat = &self.lattice;
        if !lat.contains(p) {
            return Err(LabError::OutsideHull {
                point: p[..lat.dim()].to_vec(),
                half_width: lat.half_width(),
            });
        }
        let n = lat.per_axis();
        let locate = |x: f64| {
            let t = ((x + lat.half_width()) / lat.spacing()).clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            (i, t - i as f64)
        };
        let (i, s) = locate(p[0]);
        if lat.dim() == 1 {
            let v0 = self.values[i];
            let v1 = self.values[i + 1];
            return Ok(v0 + s * (v1 - v0));
        }
        let (j, t) = locate(p[1]);
        let v00 = self.values[lat.node([i, j])];
        let v10 = self.values[lat.node([i + 1, j])];
        let v01 = self.values[lat.node([i, j + 1])];
        let v11 = self.values[lat.node([i + 1, j + 1])];
        Ok((1.0 - s) * ((1.0 - t) * v00 + t * v01) + s * ((1.0 - t) * v10 + t * v11))
    }

    /// Field values on the circle of `radius` around `center`, at `samples`
    /// equispaced angles starting from the `+x1` axis (d = 2), or at
    /// `center ∓ radius` (d = 1, where `samples` must be 2).
    pub fn circle_trace(&self, center: &[f64], radius: f64, samples: usize) -> Result<Vec<f64>> {
        if !(radius > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        if self.lattice.dim() == 1 {
            if samples != 2 {
                return Err(LabError::InvalidArgument(format!(
                    "a one-dimensional trace has exactly 2 samples, got {samples}"
                )));
            }
            return Ok(vec![
                self.interpolate(&[center[0] - radius])?,
                self.interpolate(&[center[0] + radius])?,
            ]);
        }
        if samples < 4 {
            return Err(LabError::InvalidArgument(format!(
                "a circle trace needs at least 4 samples, got {samples}"
            )));
        }
        (0..samples)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / samples as f64;
                self.interpolate(&[center[0] + radius * th.cos(), center[1] + radius * th.sin()])
            })
            .collect()
    }

    /// Grid dump: header `x1[,x2],v`, one row per masked node in node order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.lattice.dim();
        writeln!(out, "{}", if dim == 1 { "x1,v" } else { "x1,x2,v" })?;
        for (n, p) in self.lattice.points() {
            if !self.mask[n] {
                continue;
            }
            if dim == 1 {
                writeln!(out, "{},{}", fmt_num(p[0]), fmt_num(self.values[n]))?;
            } else {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt_num(p[0]),
                    fmt_num(p[1]),
                    fmt_num(self.values[n])
                )?;
            }
        }
        Ok(())
    }
}

/// Free-function form of [`Lattice::new`].
pub fn make_lattice(dim: usize, half_width: f64, spacing: f64) -> Result<Lattice> {
    Lattice::new(dim, half_width, spacing)
}
