//! Verdict thresholds shared by the diagnostics, the experiments and the
//! acceptance suite. Raw series are always reported next to the verdicts,
//! so results can be re-judged against different values without
//! re-solving.

/// Allowed decrease of a Weiss or Monneau series between consecutive radii,
/// per unit of lattice spacing.
pub const MONOTONE_SLACK_PER_H: f64 = 1.0;

/// Relative half-width of the acceptance band around each limiting energy.
pub const ENERGY_BAND: f64 = 0.05;

/// Largest profile misfit accepted as confirming a classification.
pub const CONFIRM_EPS: f64 = 0.05;

/// Smallest classification radius in units of the lattice spacing.
pub const MIN_RADIUS_CELLS: f64 = 8.0;

/// Largest distance, in lattice spacings, between a point of `Γ1` and a
/// point of `Γ2` for the pair to count as an intersection.
pub const INTERSECTION_CELLS: f64 = 2.0;

/// Bounded-band test: `max / min` of a positive series.
pub const BAND_RATIO: f64 = 4.0;

/// Boundedness test for the auxiliary-function remainder constants.
pub const REMAINDER_RATIO: f64 = 10.0;

/// Logarithmic-growth test for the same constants: a least-squares slope of
/// `C` against `log2(1/r)` above this fraction of `max C` counts as growth.
pub const REMAINDER_LOG_SLOPE: f64 = 0.05;

/// Circle samples used for boundary integrals: `max(64, ⌈2πr/h⌉)`.
pub fn boundary_samples(radius: f64, spacing: f64) -> usize {
    let n = (std::f64::consts::TAU * radius / spacing).ceil() as usize;
    n.max(64)
}

/// Contact tolerance used to locate free boundaries for classification:
/// `h²/8`, below the smallest non-contact gap `h²/4` of the homogeneous
/// profiles one node away from their free boundary.
pub fn classification_contact_tolerance(spacing: f64) -> f64 {
    spacing * spacing / 8.0
}

/// Contact tolerance for sub-cell free-boundary location. The ordering
/// projection pools contact nodes to identical values, so contact is exact
/// up to rounding.
pub const SUBCELL_CONTACT_TOL: f64 = 1e-12;

/// Constant test for a scale series: the least-squares slope against
/// `log2(1/r)`, relative to the series maximum, must not exceed this.
pub const CONSTANT_DRIFT: f64 = 0.05;
