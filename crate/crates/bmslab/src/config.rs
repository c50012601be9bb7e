//! Configuration documents, presets and command-line overrides.
//!
//! A document is JSON with the sections `rule`, `model`, `portfolio`,
//! `numerics` and `simulation`. Unknown keys are rejected and every error
//! names the offending key, e.g. `model.sigma2` or
//! `portfolio.classes[1].lambda1`.

use std::collections::BTreeMap;
use std::path::Path;

use bmslab_core::portfolio::{CategoricalMargin, MarginLevel};
use bmslab_core::random_effects::DEFAULT_NODES;
use bmslab_core::{
    BmsRule, GlmCoefficients, Integration, MixingModel, Portfolio, QuadratureGrid, RiskClass, SimConfig,
    SolveTolerances,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_error, CliError, Result};

/// Documents shipped with the binary, addressable by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("example3", include_str!("../configs/example3.json")),
    ("example4", include_str!("../configs/example4.json")),
    ("lgpif_model1", include_str!("../configs/lgpif_model1.json")),
    ("lgpif_model2", include_str!("../configs/lgpif_model2.json")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    let stem = name
        .strip_suffix(".json")
        .or_else(|| name.strip_suffix(".cfg"))
        .unwrap_or(name)
        .replace('-', "_");
    PRESETS.iter().find(|(n, _)| *n == stem).map(|(_, text)| *text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub rule: RuleSection,
    pub model: ModelSection,
    pub portfolio: PortfolioSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSection {
    pub z: u32,
    pub h: u32,
    #[serde(default)]
    pub pen: u32,
    #[serde(default)]
    pub l0: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    Frequency {
        sigma2: f64,
    },
    FrequencySeverity {
        sigma1_2: f64,
        sigma2_2: f64,
        rho: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        severity_shape_inv: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<ClassSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glm: Option<GlmSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub label: String,
    pub lambda1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlmSpec {
    pub frequency: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<BTreeMap<String, f64>>,
    pub margins: Vec<MarginSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSpec {
    pub name: String,
    pub levels: Vec<MarginLevelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginLevelSpec {
    pub label: String,
    pub proportion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    /// Gauss-Hermite nodes over the frequency effect. `1` switches the
    /// random effect off.
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default)]
    pub integration: IntegrationSpec,
    #[serde(default)]
    pub tolerances: TolerancesSpec,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            quadrature_nodes: DEFAULT_NODES,
            integration: IntegrationSpec::default(),
            tolerances: TolerancesSpec::default(),
        }
    }
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegrationSpec {
    #[default]
    Reduced,
    Tensor {
        inner_nodes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSpec {
    #[serde(default = "default_row_sum")]
    pub row_sum: f64,
    #[serde(default = "default_residual")]
    pub stationary_residual: f64,
}

impl Default for TolerancesSpec {
    fn default() -> Self {
        TolerancesSpec {
            row_sum: default_row_sum(),
            stationary_residual: default_residual(),
        }
    }
}

fn default_row_sum() -> f64 {
    SolveTolerances::default().row_sum
}

fn default_residual() -> f64 {
    SolveTolerances::default().residual
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_policyholders")]
    pub policyholders: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in_years: u32,
    #[serde(default = "default_measured")]
    pub measured_years: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            policyholders: default_policyholders(),
            burn_in_years: default_burn_in(),
            measured_years: default_measured(),
            seed: default_seed(),
        }
    }
}

fn default_policyholders() -> u64 {
    100_000
}
fn default_burn_in() -> u32 {
    500
}
fn default_measured() -> u32 {
    1
}
fn default_seed() -> u64 {
    1
}

/// Values given on the command line win over the document.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub z: Option<u32>,
    pub h: Option<u32>,
    pub pen: Option<u32>,
    pub l0: Option<u32>,
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
    pub policyholders: Option<u64>,
    pub burn_in_years: Option<u32>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let mut key = if path == "." { "document".to_string() } else { path };
            let message = e.into_inner().to_string();
            // Tagged sections report unknown fields without descending.
            if let Some(field) = message
                .strip_prefix("unknown field `")
                .and_then(|rest| rest.split('`').next())
            {
                if !key.ends_with(field) {
                    key = format!("{key}.{field}");
                }
            }
            config_error(key, message)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Reads `spec` as a file path, falling back to a preset name when no
    /// such file exists.
    pub fn resolve(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if !path.exists() {
            if let Some(text) = preset(spec) {
                return Self::parse(text);
            }
        }
        Self::load(path)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.z {
            self.rule.z = v;
        }
        if let Some(v) = o.h {
            self.rule.h = v;
        }
        if let Some(v) = o.pen {
            self.rule.pen = v;
        }
        if let Some(v) = o.l0 {
            self.rule.l0 = v;
        }
        if let Some(v) = o.nodes {
            self.numerics.quadrature_nodes = v;
        }
        if let Some(v) = o.seed {
            self.simulation.seed = v;
        }
        if let Some(v) = o.policyholders {
            self.simulation.policyholders = v;
        }
        if let Some(v) = o.burn_in_years {
            self.simulation.burn_in_years = v;
        }
    }

    /// Checks everything and builds the engine inputs.
    pub fn validate(&self) -> Result<RunConfig> {
        let rule = BmsRule::new(self.rule.z, self.rule.h, self.rule.pen, self.rule.l0)?;
        let model = match self.model {
            ModelSection::Frequency { sigma2 } => MixingModel::frequency(sigma2)?,
            ModelSection::FrequencySeverity {
                sigma1_2,
                sigma2_2,
                rho,
                severity_shape_inv,
            } => {
                if let Some(v) = severity_shape_inv {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(config_error(
                            "model.severity_shape_inv",
                            "must be finite and positive",
                        ));
                    }
                }
                let integration = match self.numerics.integration {
                    IntegrationSpec::Reduced => Integration::Reduced,
                    IntegrationSpec::Tensor { inner_nodes } => {
                        if inner_nodes < 2 {
                            return Err(config_error(
                                "numerics.integration.inner_nodes",
                                "must be at least 2",
                            ));
                        }
                        Integration::Tensor { inner_nodes }
                    }
                };
                MixingModel::frequency_severity(sigma1_2, sigma2_2, rho)?.with_integration(integration)
            }
        };
        let portfolio = self.portfolio()?;
        if let MixingModel::FrequencySeverity { .. } = model {
            if let Some(GlmSpec { severity: None, .. }) = self.portfolio.glm {
                return Err(config_error(
                    "portfolio.glm.severity",
                    "required by the frequency-severity model",
                ));
            }
            portfolio.require_severity()?;
        }

        let nodes = self.numerics.quadrature_nodes;
        let grid = match nodes {
            0 => return Err(config_error("numerics.quadrature_nodes", "must be at least 1")),
            1 => QuadratureGrid::point_mass(),
            m => model.grid(m)?,
        };

        let t = self.numerics.tolerances;
        for (key, value) in [
            ("numerics.tolerances.row_sum", t.row_sum),
            ("numerics.tolerances.stationary_residual", t.stationary_residual),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(config_error(key, "must be finite and positive"));
            }
        }

        let simulation = SimConfig {
            rule,
            policyholders: self.simulation.policyholders,
            burn_in_years: self.simulation.burn_in_years,
            measured_years: self.simulation.measured_years,
            seed: self.simulation.seed,
        };
        simulation.validate()?;

        Ok(RunConfig {
            fingerprint: self.fingerprint(),
            document: self.clone(),
            rule,
            model,
            portfolio,
            grid,
            tolerances: SolveTolerances {
                row_sum: t.row_sum,
                residual: t.stationary_residual,
            },
            simulation,
        })
    }

    fn portfolio(&self) -> Result<Portfolio> {
        match (&self.portfolio.classes, &self.portfolio.glm) {
            (Some(classes), None) => {
                let classes = classes
                    .iter()
                    .map(|c| {
                        let class = RiskClass::new(c.label.clone(), c.lambda1, c.weight);
                        match c.lambda2 {
                            Some(m) => class.with_severity(m),
                            None => class,
                        }
                    })
                    .collect();
                Ok(Portfolio::new(classes)?)
            }
            (None, Some(glm)) => {
                let coefficients = GlmCoefficients {
                    frequency: glm.frequency.clone(),
                    severity: glm.severity.clone(),
                    severity_shape_inverse: match self.model {
                        ModelSection::FrequencySeverity {
                            severity_shape_inv, ..
                        } => severity_shape_inv,
                        ModelSection::Frequency { .. } => None,
                    },
                };
                let margins: Vec<CategoricalMargin> = glm
                    .margins
                    .iter()
                    .map(|m| CategoricalMargin {
                        name: m.name.clone(),
                        levels: m
                            .levels
                            .iter()
                            .map(|l| MarginLevel::new(&l.label, l.proportion, l.coefficient.as_deref()))
                            .collect(),
                    })
                    .collect();
                Ok(Portfolio::from_margins(&coefficients, &margins)?)
            }
            (Some(_), Some(_)) => Err(config_error(
                "portfolio",
                "give either `classes` or `glm`, not both",
            )),
            (None, None) => Err(config_error("portfolio", "one of `classes` or `glm` is required")),
        }
    }

    /// Short hash of everything that determines the tables.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(&(&self.rule, &self.model, &self.portfolio, &self.numerics))
            .expect("documents always serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A validated document, ready to compute.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub document: ConfigDocument,
    pub rule: BmsRule,
    pub model: MixingModel,
    pub portfolio: Portfolio,
    pub grid: QuadratureGrid,
    pub tolerances: SolveTolerances,
    pub simulation: SimConfig,
    pub fingerprint: String,
}

impl RunConfig {
    /// One-line model summary for table footers.
    pub fn model_summary(&self) -> String {
        let nodes = self.document.numerics.quadrature_nodes;
        match self.document.model {
            ModelSection::Frequency { sigma2 } => {
                format!("frequency sigma2={sigma2} classes={} nodes={nodes}", self.portfolio.len())
            }
            ModelSection::FrequencySeverity {
                sigma1_2,
                sigma2_2,
                rho,
                ..
            } => format!(
                "frequency_severity sigma1_2={sigma1_2} sigma2_2={sigma2_2} rho={rho} classes={} nodes={nodes}",
                self.portfolio.len()
            ),
        }
    }
}

/// `-1/+h` or `-1/+h/pen`.
pub fn parse_system(text: &str) -> Result<(u32, Option<u32>)> {
    let bad = || CliError::Usage(format!("system `{text}` is not of the form -1/+h or -1/+h/pen"));
    let mut parts = text.trim().split('/');
    if parts.next() != Some("-1") {
        return Err(bad());
    }
    let h = parts
        .next()
        .and_then(|p| p.strip_prefix('+'))
        .and_then(|p| p.parse().ok())
        .ok_or_else(bad)?;
    let pen = match parts.next() {
        Some(p) => Some(p.parse().map_err(|_| bad())?),
        None => None,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((h, pen))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for (name, text) in PRESETS {
            let doc = ConfigDocument::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let mut small = doc.clone();
            small.numerics.quadrature_nodes = 32;
            small.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn system_strings() {
        assert_eq!(parse_system("-1/+2").unwrap(), (2, None));
        assert_eq!(parse_system("-1/+1/3").unwrap(), (1, Some(3)));
        for bad in ["-2/+1", "-1/2", "-1/+x", "-1/+1/2/3", ""] {
            assert!(parse_system(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn fingerprint_ignores_simulation() {
        let a = ConfigDocument::parse(preset("example3").unwrap()).unwrap();
        let mut b = a.clone();
        b.simulation.seed += 1;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.rule.pen = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
