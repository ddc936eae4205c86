//! Experiment driver: configs, the registered pipelines and deterministic
//! report bundles.

pub mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::report::round_sig;

pub use config::{ExperimentConfig, RawConfig};
pub use experiments::random_perturbation;

/// Registered experiments with a one-line description.
pub const REGISTERED: [(&str, &str); 7] = [
    (
        "energy-table",
        "limiting Weiss energies W0..W3 and their ratios",
    ),
    (
        "clog-width",
        "free-boundary width decay at a regular intersection point",
    ),
    (
        "generic-regular",
        "gamma-functional dichotomy for perturbed half-space data",
    ),
    (
        "sing1-instability",
        "classification of intersection points for perturbed unstable data",
    ),
    (
        "monneau-sing2",
        "Monneau monotonicity at a parabola point for three and four membranes",
    ),
    (
        "obstacle-flatness",
        "flatness decay of the scalar obstacle free boundary",
    ),
    (
        "aux-function",
        "auxiliary harmonic function constants and remainder bound",
    ),
];

/// CSV tables plus the JSON summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    /// `(name, csv)` in construction order.
    pub tables: Vec<(String, String)>,
    pub verdicts: Vec<(String, bool)>,
    pub constants: Map<String, Value>,
}

impl ReportBundle {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            tables: Vec::new(),
            verdicts: Vec::new(),
            constants: Map::new(),
        }
    }

    fn table(&mut self, name: &str, csv: String) {
        self.tables.push((name.to_string(), csv));
    }

    fn verdict(&mut self, name: &str, pass: bool) {
        self.verdicts.push((name.to_string(), pass));
    }

    /// Numbers are rounded to 12 significant digits; non-finite values
    /// become `null`.
    fn num(&mut self, name: &str, v: f64) {
        self.constants.insert(name.to_string(), json!(round_sig(v)));
    }

    fn int(&mut self, name: &str, v: u64) {
        self.constants.insert(name.to_string(), json!(v));
    }

    fn text(&mut self, name: &str, v: &str) {
        self.constants.insert(name.to_string(), json!(v));
    }

    pub fn experiment(&self) -> &str {
        &self.config.experiment
    }

    /// All verdicts passed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|(_, p)| *p)
    }

    pub fn verdict_of(&self, name: &str) -> Option<bool> {
        self.verdicts
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| *p)
    }

    pub fn constant(&self, name: &str) -> Option<&Value> {
        self.constants.get(name)
    }

    pub fn table_of(&self, name: &str) -> Option<&str> {
        self.tables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    pub fn summary(&self) -> Value {
        let verdicts: Map<String, Value> = self
            .verdicts
            .iter()
            .map(|(n, p)| (n.clone(), Value::Bool(*p)))
            .collect();
        json!({
            "experiment": self.config.experiment,
            "config": serde_json::to_value(&self.config).expect("config serialises"),
            "verdicts": verdicts,
            "constants": self.constants,
            "passed": self.passed(),
        })
    }
}

/// Runs the pipeline named in `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    experiments::run(config)
}

/// Checks an experiment's preconditions without solving.
pub fn validate_experiment(config: &ExperimentConfig) -> Result<()> {
    experiments::validate(config)
}

/// Writes `<dir>/<experiment>/<table>.csv` and `<dir>/<experiment>/summary.json`.
pub fn write_report(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let root = dir.join(bundle.experiment());
    fs::create_dir_all(&root)?;
    let mut paths = Vec::new();
    for (name, csv) in &bundle.tables {
        let p = root.join(format!("{name}.csv"));
        fs::write(&p, csv)?;
        paths.push(p);
    }
    let p = root.join("summary.json");
    let mut text = serde_json::to_string_pretty(&bundle.summary())?;
    text.push('\n');
    fs::write(&p, text)?;
    paths.push(p);
    Ok(paths)
}
