//! Flat TOML experiment configs. Every key is optional except `experiment`;
//! missing keys take per-experiment defaults and the resolved config is
//! echoed verbatim into `summary.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::default_table_spacing;
use crate::error::{LabError, Result};

use super::REGISTERED;

/// Config as written by the user.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: String,
    pub dim: Option<usize>,
    pub spacing: Option<f64>,
    pub half_width: Option<f64>,
    pub profile: Option<String>,
    pub profile_angle: Option<f64>,
    pub profile_a: Option<Vec<f64>>,
    pub profile_b: Option<Vec<f64>>,
    pub reference_a: Option<Vec<f64>>,
    pub reference_b: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub phi_cos: Option<Vec<f64>>,
    pub phi_sin: Option<Vec<f64>>,
    pub psi_cos: Option<Vec<f64>>,
    pub psi_sin: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub inner_radius: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<String>,
}

/// Fully resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub dim: usize,
    pub spacing: f64,
    pub half_width: f64,
    /// Boundary profile family: `SH`, `UH` or `parabola`.
    pub profile: String,
    /// Angle of the half-space direction `e` in the plane.
    pub profile_angle: f64,
    /// Upper-triangle entries of the parabola matrices.
    pub profile_a: Vec<f64>,
    pub profile_b: Vec<f64>,
    /// Parabola the Monneau functional is measured against.
    pub reference_a: Vec<f64>,
    pub reference_b: Vec<f64>,
    /// Perturbation amplitude `ε`.
    pub amplitude: f64,
    /// Fourier coefficients of `φ` and `ψ` (index = frequency).
    pub phi_cos: Vec<f64>,
    pub phi_sin: Vec<f64>,
    pub psi_cos: Vec<f64>,
    pub psi_sin: Vec<f64>,
    pub radii: Vec<f64>,
    pub inner_radius: f64,
    pub seed: u64,
    pub output: String,
}

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 0.5_f64.powi(k)).collect()
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Fills in the defaults of the named experiment.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let name = self.experiment.as_str();
        if !REGISTERED.iter().any(|(n, _)| *n == name) {
            return Err(LabError::UnknownExperiment {
                name: self.experiment.clone(),
                registered: REGISTERED.map(|(n, _)| n).join(", "),
            });
        }
        let dim = self.dim.unwrap_or(2);
        let default_spacing = match name {
            "energy-table" => default_table_spacing(dim),
            "monneau-sing2" => 1.0 / 64.0,
            "aux-function" => 1.0 / 128.0,
            _ => 1.0 / 128.0,
        };
        let spacing = self.spacing.unwrap_or(default_spacing);
        let half_width = self.half_width.unwrap_or(match name {
            "energy-table" => 1.0 + 4.0 * spacing,
            _ => 1.0,
        });
        let profile = self.profile.unwrap_or_else(|| {
            match name {
                "sing1-instability" => "UH",
                "monneau-sing2" => "parabola",
                _ => "SH",
            }
            .to_string()
        });
        let (pa, pb, ra, rb) = if dim == 1 {
            (vec![1.0], vec![-1.0], vec![1.0], vec![-1.0])
        } else {
            (
                vec![0.5, 0.0, 0.5],
                vec![-0.5, 0.0, -0.5],
                vec![0.55, 0.0, 0.45],
                vec![-0.45, 0.0, -0.55],
            )
        };
        let amplitude = self.amplitude.unwrap_or(match name {
            "generic-regular" | "clog-width" | "obstacle-flatness" => 0.5,
            "sing1-instability" => 0.2,
            "monneau-sing2" => 0.1,
            _ => 0.0,
        });
        let given = self.phi_cos.is_some()
            || self.phi_sin.is_some()
            || self.psi_cos.is_some()
            || self.psi_sin.is_some();
        let seed = self.seed.unwrap_or(match name {
            "clog-width" => 1,
            _ => 0,
        });
        let (phi_cos, phi_sin, psi_cos, psi_sin) = if name == "clog-width" && !given {
            super::experiments::random_perturbation(seed)
        } else {
            let psi_s = if name == "obstacle-flatness" {
                0.3
            } else {
                -0.16
            };
            let phi_s = if name == "obstacle-flatness" {
                0.3
            } else {
                0.16
            };
            (
                self.phi_cos.unwrap_or_else(|| vec![0.0, 1.0]),
                self.phi_sin.unwrap_or_else(|| vec![0.0, 0.0, phi_s]),
                self.psi_cos.unwrap_or_else(|| vec![0.0, 1.0]),
                self.psi_sin.unwrap_or_else(|| vec![0.0, 0.0, psi_s]),
            )
        };
        let radii = self.radii.unwrap_or_else(|| match name {
            "aux-function" => dyadic(2, 4),
            "sing1-instability" => vec![0.125, 0.25],
            "monneau-sing2" => (1..=7).map(|k| 0.125 * k as f64).collect(),
            "energy-table" => Vec::new(),
            _ => dyadic(1, 4),
        });
        let cfg = ExperimentConfig {
            experiment: self.experiment,
            dim,
            spacing,
            half_width,
            profile,
            profile_angle: self.profile_angle.unwrap_or(0.0),
            profile_a: self.profile_a.unwrap_or(pa),
            profile_b: self.profile_b.unwrap_or(pb),
            reference_a: self.reference_a.unwrap_or(ra),
            reference_b: self.reference_b.unwrap_or(rb),
            amplitude,
            phi_cos,
            phi_sin,
            psi_cos,
            psi_sin,
            radii,
            inner_radius: self.inner_radius.unwrap_or(0.5),
            seed,
            output: self.output.unwrap_or_else(|| "reports".to_string()),
        };
        cfg.check()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    /// Parses and resolves a config file.
    pub fn load(path: &Path) -> Result<Self> {
        RawConfig::load(path)?.resolve()
    }

    /// Parses and resolves config text.
    pub fn parse(text: &str) -> Result<Self> {
        RawConfig::parse(text)?.resolve()
    }

    /// Resolved defaults of an experiment.
    pub fn defaults(name: &str) -> Result<Self> {
        RawConfig {
            experiment: name.to_string(),
            ..Default::default()
        }
        .resolve()
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if !(1..=2).contains(&self.dim) {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return bad(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude
            ));
        }
        if !["SH", "UH", "parabola"].contains(&self.profile.as_str()) {
            return bad(format!(
                "profile must be SH, UH or parabola, got {}",
                self.profile
            ));
        }
        let entries = if self.dim == 1 { 1 } else { 3 };
        for (key, m) in [
            ("profile_a", &self.profile_a),
            ("profile_b", &self.profile_b),
            ("reference_a", &self.reference_a),
            ("reference_b", &self.reference_b),
        ] {
            if m.len() != entries {
                return bad(format!(
                    "{key} needs {entries} upper-triangle entries, got {}",
                    m.len()
                ));
            }
        }
        if self.experiment == "energy-table"
            && (self.half_width - (1.0 + 4.0 * self.spacing)).abs() > 1e-12
        {
            return bad("energy-table uses half_width = 1 + 4·spacing".into());
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) {
            return bad("radii must be positive".into());
        }
        if !(self.inner_radius > 0.0) {
            return bad(format!(
                "inner_radius must be positive, got {}",
                self.inner_radius
            ));
        }
        let planar = [
            "clog-width",
            "generic-regular",
            "sing1-instability",
            "obstacle-flatness",
            "aux-function",
        ];
        if planar.contains(&self.experiment.as_str()) && self.dim != 2 {
            return bad(format!("{} runs in the plane only", self.experiment));
        }
        Ok(())
    }

    /// TOML rendering of the resolved config; parsing it back gives the
    /// same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }
}
