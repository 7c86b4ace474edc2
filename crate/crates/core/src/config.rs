//! Run configuration.
//!
//! Real numbers are written as decimal strings (`"0.3"`, never `0.3`) so
//! that a config means the same thing under every precision backend.
//!
//! ```json
//! {
//!   "omega": { "builder": { "c_omega": "10", "c_eps": "3", "c_delta": "0.5",
//!                           "gamma": "0.5", "depth": 5, "prefix": [3] } },
//!   "phases": [ { "phi_hat": { "constant": "1", "sin": ["0.3"] },
//!                 "lambda_hat": { "constant": "1" } } ],
//!   "epsilon": { "lo": "0.12", "hi": "0.22", "points": 50 },
//!   "precision_bits": 106,
//!   "max_level": 1
//! }
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cocycle::{PhaseEntry, PhaseFamily, PhaseModel, Profile};
use crate::error::{Error, Result};
use crate::precision::Precision;
use crate::rotation::{
    build_condition_a_omega, cf_expand, check_condition_a, ConditionABuild, ConditionAConstants, ConditionAReport,
    RotationNumber, Spacing,
};
use crate::torus::{TorusPotential, TorusTerm};

/// A real number written as a decimal string.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Dec {
    text: String,
    value: f64,
}

impl Dec {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl TryFrom<String> for Dec {
    type Error = String;

    fn try_from(text: String) -> std::result::Result<Self, String> {
        let value: f64 = text
            .trim()
            .parse()
            .map_err(|_| format!("`{text}` is not a decimal number"))?;
        if !value.is_finite() {
            return Err(format!("`{text}` is not finite"));
        }
        Ok(Dec { text, value })
    }
}

impl From<Dec> for String {
    fn from(d: Dec) -> String {
        d.text
    }
}

impl From<f64> for Dec {
    fn from(value: f64) -> Self {
        Dec {
            text: value.to_string(),
            value,
        }
    }
}

impl fmt::Debug for Dec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub c_omega: Dec,
    pub c_eps: Dec,
    pub c_delta: Dec,
    pub gamma: Dec,
}

impl ConstantsConfig {
    pub fn constants(&self) -> ConditionAConstants {
        ConditionAConstants {
            c_omega: self.c_omega.value(),
            c_eps: self.c_eps.value(),
            c_delta: self.c_delta.value(),
            gamma: self.gamma.value(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderConfig {
    #[serde(flatten)]
    pub constants: ConstantsConfig,
    #[serde(default = "every_index")]
    pub spacing: Spacing,
    pub depth: usize,
    #[serde(default)]
    pub prefix: Vec<u64>,
    #[serde(default = "one")]
    pub filler: u64,
}

fn every_index() -> Spacing {
    Spacing::EveryIndex
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaConfig {
    /// Comma-separated partial quotients `a_1, a_2, ...`.
    Quotients(String),
    Decimal { digits: String, depth: usize },
    Builder(BuilderConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub constant: Dec,
    #[serde(default)]
    pub cos: Vec<Dec>,
    #[serde(default)]
    pub sin: Vec<Dec>,
}

impl ProfileConfig {
    pub fn profile(&self) -> Profile {
        if self.cos.iter().chain(&self.sin).all(|d| d.value() == 0.0) {
            Profile::constant(self.constant.value())
        } else {
            Profile::Trig {
                constant: self.constant.value(),
                cos: self.cos.iter().map(Dec::value).collect(),
                sin: self.sin.iter().map(Dec::value).collect(),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub phi_hat: ProfileConfig,
    pub lambda_hat: ProfileConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub j1: i32,
    pub j2: i32,
    #[serde(default = "zero")]
    pub cos: Dec,
    #[serde(default = "zero")]
    pub sin: Dec,
}

fn zero() -> Dec {
    Dec::from(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default = "zero")]
    pub constant: Dec,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    #[serde(default = "default_root_tol")]
    pub root_tol: Dec,
    /// Points `x` at which the potential is read off.
    #[serde(default = "default_x_grid")]
    pub x_grid: usize,
    /// Feed x-independent phases into a scan.
    #[serde(default)]
    pub chain_scan: bool,
}

fn default_root_tol() -> Dec {
    Dec::from(1e-13)
}

fn default_x_grid() -> usize {
    64
}

impl PotentialConfig {
    pub fn potential(&self) -> TorusPotential {
        TorusPotential {
            constant: self.constant.value(),
            terms: self
                .terms
                .iter()
                .map(|t| TorusTerm {
                    j1: t.j1,
                    j2: t.j2,
                    cos: t.cos.value(),
                    sin: t.sin.value(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lo: Dec,
    pub hi: Dec,
    pub points: usize,
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.lo.value(), self.hi.value());
        match self.points {
            0 => Vec::new(),
            1 => vec![lo],
            n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsConfig {
    #[serde(default = "default_slack")]
    pub slack: Dec,
    #[serde(default = "default_max_jump")]
    pub max_jump: Dec,
    #[serde(default = "default_witness_ratio")]
    pub witness_ratio: Dec,
    #[serde(default = "default_kappa_max")]
    pub kappa_max: Dec,
    #[serde(default = "default_c_delta_shift")]
    pub c_delta_shift: Dec,
}

fn default_slack() -> Dec {
    Dec::from(0.1)
}
fn default_max_jump() -> Dec {
    Dec::from(0.1)
}
fn default_witness_ratio() -> Dec {
    Dec::from(0.5)
}
fn default_kappa_max() -> Dec {
    Dec::from(0.9)
}
fn default_c_delta_shift() -> Dec {
    Dec::from(0.5)
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            slack: default_slack(),
            max_jump: default_max_jump(),
            witness_ratio: default_witness_ratio(),
            kappa_max: default_kappa_max(),
            c_delta_shift: default_c_delta_shift(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub omega: OmegaConfig,
    /// Constants for checking a given (not built) rotation number.
    #[serde(default)]
    pub condition_a: Option<ConstantsConfig>,
    #[serde(default)]
    pub phases: Option<Vec<PhaseConfig>>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub epsilon: Option<SweepConfig>,
    #[serde(default = "default_bits")]
    pub precision_bits: u32,
    /// Step counts for growth checks; defaults to the convergent
    /// denominators up to `q_8`.
    #[serde(default)]
    pub schedule: Option<Vec<u64>>,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    #[serde(default = "default_max_level")]
    pub max_level: usize,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Spatial grid for hyperbolicity tests.
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Samples drawn for property (H).
    #[serde(default = "default_h_samples")]
    pub h_samples: usize,
}

fn default_bits() -> u32 {
    53
}
fn default_max_level() -> usize {
    1
}
fn default_grid_size() -> usize {
    16
}
fn default_h_samples() -> usize {
    256
}

/// Line of the first occurrence of `"key"` in the config text, for error
/// messages.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn field_error(text: &str, key: &str, msg: impl fmt::Display) -> Error {
    match line_of(text, key) {
        Some(line) => Error::Config(format!("line {line}: `{key}`: {msg}")),
        None => Error::Config(format!("`{key}`: {msg}")),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks cross-field rules; `text` anchors messages to lines.
    pub fn validate(&self, text: &str) -> Result<()> {
        if self.phases.is_some() && self.potential.is_some() {
            return Err(field_error(text, "potential", "give either `phases` or `potential`, not both"));
        }
        if let Some(p) = &self.phases {
            if p.is_empty() {
                return Err(field_error(text, "phases", "needs at least one factor"));
            }
        }
        if let Some(s) = &self.epsilon {
            let (lo, hi) = (s.lo.value(), s.hi.value());
            if !(lo > 0.0) {
                return Err(field_error(text, "lo", format!("epsilon range must start above 0, got {lo}")));
            }
            if hi < lo {
                return Err(field_error(text, "hi", format!("upper end {hi} lies below the lower end {lo}")));
            }
        }
        if self.precision_bits == 0 || self.precision_bits > 106 {
            return Err(field_error(
                text,
                "precision_bits",
                format!("{} bits requested; supported are up to 53 (double) and 106 (double-double)", self.precision_bits),
            ));
        }
        if let OmegaConfig::Quotients(q) = &self.omega {
            RotationNumber::parse_quotients(q).map_err(|e| field_error(text, "quotients", e))?;
        }
        if let Some(s) = &self.schedule {
            if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(field_error(text, "schedule", "must be strictly increasing positive step counts"));
            }
        }
        Ok(())
    }

    pub fn precision(&self) -> Precision {
        Precision::from_bits(self.precision_bits)
    }

    /// SHA-256 of the canonical (re-serialized) config, output location
    /// excluded.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output = None;
        let canonical = serde_json::to_string(&cfg).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Rotation number plus a condition-(A) report when constants are
    /// known (always for the builder).
    pub fn omega(&self) -> Result<(RotationNumber, Option<ConditionAReport>)> {
        match &self.omega {
            OmegaConfig::Quotients(q) => {
                let omega = RotationNumber::parse_quotients(q)?;
                let report = self.check(&omega)?;
                Ok((omega, report))
            }
            OmegaConfig::Decimal { digits, depth } => {
                let omega = cf_expand(digits, *depth)?;
                let report = self.check(&omega)?;
                Ok((omega, report))
            }
            OmegaConfig::Builder(b) => {
                let spec = ConditionABuild {
                    constants: b.constants.constants(),
                    spacing: b.spacing.clone(),
                    depth: b.depth,
                    prefix: b.prefix.clone(),
                    filler: b.filler,
                };
                let (omega, report) = build_condition_a_omega(&spec)?;
                Ok((omega, Some(report)))
            }
        }
    }

    fn check(&self, omega: &RotationNumber) -> Result<Option<ConditionAReport>> {
        let Some(c) = &self.condition_a else {
            return Ok(None);
        };
        let constants = c.constants();
        constants.validate()?;
        let conv = omega.convergents();
        let depth = conv.depth().saturating_sub(1);
        let c_b = crate::rotation::brjuno_sum(conv, depth)?.c_b;
        Ok(Some(check_condition_a(conv, constants, c_b)))
    }

    pub fn phase_family(&self) -> Result<Option<PhaseFamily>> {
        let Some(phases) = &self.phases else {
            return Ok(None);
        };
        let entries = phases
            .iter()
            .map(|p| PhaseEntry {
                phi_hat: p.phi_hat.profile(),
                lambda_hat: p.lambda_hat.profile(),
            })
            .collect();
        PhaseFamily::new(entries).map(Some)
    }

    pub fn model(&self) -> Result<PhaseModel> {
        if let Some(f) = self.phase_family()? {
            return Ok(PhaseModel::Family { phases: f });
        }
        if let Some(p) = &self.potential {
            return Ok(PhaseModel::Schrodinger {
                potential: p.potential(),
                root_tol: p.root_tol.value(),
            });
        }
        Err(Error::Config("either `phases` or `potential` is required".into()))
    }

    /// Configured schedule, or convergent denominators `q_1..q_8` of `omega`.
    pub fn schedule(&self, omega: &RotationNumber) -> Vec<u64> {
        if let Some(s) = &self.schedule {
            return s.clone();
        }
        let conv = omega.convergents();
        let mut out: Vec<u64> = (1..=conv.depth().min(8)).filter_map(|n| conv.q_u64(n)).collect();
        out.dedup();
        out
    }
}
