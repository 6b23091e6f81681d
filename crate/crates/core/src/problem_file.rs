//! JSON problem files: coefficients as grammar strings, solver knobs,
//! output paths and, for the golden corpus, expected values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientSet, FormulaSource};
use crate::error::{Error, Result};
use crate::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Flux. Optional when `h` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FormulaSource>,
    #[serde(rename = "D")]
    pub d: FormulaSource,
    pub g: FormulaSource,
    /// `f'`, when known in closed form or when `f` is not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<FormulaSource>,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "OutputSection::is_empty")]
    pub output: OutputSection,
    /// Build `z` straight from the given member instead of going through
    /// the admissible set; for instances outside the standing assumptions.
    #[serde(default, skip_serializing_if = "is_false")]
    pub direct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectations>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub ode_rtol: f64,
    pub zero_factor: f64,
    pub grid: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        SolverSection { tol: c.tol, ode_rtol: c.ode_rtol, zero_factor: c.zero_factor, grid: c.grid }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

impl OutputSection {
    pub fn is_empty(&self) -> bool {
        self.profile_csv.is_none() && self.report.is_none()
    }
}

/// Reference values checked by the golden runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    /// Threshold values keyed `c11`, `c12`, `c31`, `c32`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default = "default_speed_tol")]
    pub speed_tol: f64,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<ExpectedSet>,
    /// Speed of the member to reconstruct.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Closed form of `z` for that member.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<FormulaSource>,
    #[serde(default = "default_z_tol")]
    pub z_tol: f64,
    /// `phi'` where the profile crosses `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_alpha: Option<f64>,
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
    /// Whether a plateau at `gamma` can be inserted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<bool>,
}

fn default_speed_tol() -> f64 {
    1e-3
}

fn default_z_tol() -> f64 {
    1e-4
}

fn default_slope_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSet {
    /// `empty`, `singleton` or `interval`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

impl ProblemFile {
    pub fn from_json(s: &str) -> Result<ProblemFile> {
        serde_json::from_str(s).map_err(|e| Error::InvalidProblem(format!("problem file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn load(path: &Path) -> Result<ProblemFile> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidProblem(format!("{}: {e}", path.display())))?;
        ProblemFile::from_json(&s)
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        CoefficientSet::from_formulas(
            self.f.as_ref().map(FormulaSource::to_formula).transpose()?,
            self.d.to_formula()?,
            self.g.to_formula()?,
            self.h.as_ref().map(FormulaSource::to_formula).transpose()?,
            self.alpha,
            self.gamma,
        )
    }

    pub fn config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig { tol: s.tol, ode_rtol: s.ode_rtol, zero_factor: s.zero_factor, grid: s.grid }
    }
}
