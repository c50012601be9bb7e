//! Risk classes, their weights and a-priori means from log-link GLM
//! coefficients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Name of the intercept in a coefficient map.
pub const INTERCEPT: &str = "(Intercept)";

/// One a-priori risk class.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskClass {
    pub label: String,
    /// A-priori frequency mean `lambda^[1]`.
    pub frequency_mean: f64,
    /// A-priori severity mean `lambda^[2]`; only the frequency-severity
    /// model reads it.
    pub severity_mean: Option<f64>,
    pub weight: f64,
}

impl RiskClass {
    pub fn new(label: impl Into<String>, frequency_mean: f64, weight: f64) -> Self {
        RiskClass {
            label: label.into(),
            frequency_mean,
            severity_mean: None,
            weight,
        }
    }

    pub fn with_severity(mut self, severity_mean: f64) -> Self {
        self.severity_mean = Some(severity_mean);
        self
    }
}

/// Validated list of risk classes whose weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    classes: Vec<RiskClass>,
    warnings: Vec<String>,
}

impl Portfolio {
    /// Validates the classes and renormalises their weights.
    pub fn new(classes: Vec<RiskClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::config("portfolio.classes", "portfolio is empty"));
        }
        for (i, class) in classes.iter().enumerate() {
            if !(class.weight.is_finite() && class.weight >= 0.0) {
                return Err(Error::config(
                    &format!("portfolio.classes[{i}].weight"),
                    "must be finite and nonnegative",
                ));
            }
            if !(class.frequency_mean.is_finite() && class.frequency_mean > 0.0) {
                return Err(Error::config(
                    &format!("portfolio.classes[{i}].lambda1"),
                    "must be finite and positive",
                ));
            }
            if let Some(m) = class.severity_mean {
                if !(m.is_finite() && m > 0.0) {
                    return Err(Error::config(
                        &format!("portfolio.classes[{i}].lambda2"),
                        "must be finite and positive",
                    ));
                }
            }
        }
        let total: f64 = classes.iter().map(|c| c.weight).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::config("portfolio.classes", "weights sum to zero"));
        }
        let mut classes = classes;
        if total != 1.0 {
            for c in &mut classes {
                c.weight /= total;
            }
        }
        Ok(Portfolio {
            classes,
            warnings: Vec::new(),
        })
    }

    /// One class carrying all the weight.
    pub fn single(frequency_mean: f64, severity_mean: Option<f64>) -> Result<Self> {
        let mut class = RiskClass::new("all", frequency_mean, 1.0);
        class.severity_mean = severity_mean;
        Portfolio::new(alloc::vec![class])
    }

    /// Cross product of categorical margins, each class weighted by the
    /// product of its marginal proportions. The joint law is not known, so
    /// a warning is recorded on the result.
    pub fn from_margins(coefficients: &GlmCoefficients, margins: &[CategoricalMargin]) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::config("portfolio.glm.margins", "no margins given"));
        }
        for (i, margin) in margins.iter().enumerate() {
            if margin.levels.is_empty() {
                return Err(Error::config(
                    &format!("portfolio.glm.margins[{i}].levels"),
                    "margin has no levels",
                ));
            }
            let mut sum = 0.0;
            for (j, level) in margin.levels.iter().enumerate() {
                if !(level.proportion.is_finite() && level.proportion >= 0.0) {
                    return Err(Error::config(
                        &format!("portfolio.glm.margins[{i}].levels[{j}].proportion"),
                        "must be finite and nonnegative",
                    ));
                }
                sum += level.proportion;
            }
            if libm::fabs(sum - 1.0) > 0.01 {
                return Err(Error::config(
                    &format!("portfolio.glm.margins[{i}]"),
                    format!("proportions of `{}` sum to {sum}", margin.name),
                ));
            }
        }

        let mut classes = Vec::new();
        let mut index = alloc::vec![0usize; margins.len()];
        loop {
            let mut label = String::new();
            let mut weight = 1.0;
            let mut covariates: Vec<&str> = Vec::new();
            for (m, &i) in margins.iter().zip(&index) {
                let level = &m.levels[i];
                if !label.is_empty() {
                    label.push('|');
                }
                label.push_str(&level.label);
                weight *= level.proportion;
                if let Some(name) = &level.coefficient {
                    covariates.push(name);
                }
            }
            let frequency_mean = class_mean(&coefficients.frequency, &covariates)
                .map_err(|e| prefix_key(e, "portfolio.glm.frequency"))?;
            let severity_mean = match &coefficients.severity {
                Some(sev) => {
                    Some(class_mean(sev, &covariates).map_err(|e| prefix_key(e, "portfolio.glm.severity"))?)
                }
                None => None,
            };
            classes.push(RiskClass {
                label,
                frequency_mean,
                severity_mean,
                weight,
            });

            // odometer over the margins, last margin fastest
            let mut d = margins.len();
            loop {
                if d == 0 {
                    let mut portfolio = Portfolio::new(classes)?;
                    portfolio.warnings.push(
                        "joint class weights formed as the product of marginal proportions; \
                         the true joint law of the covariates is unknown"
                            .to_string(),
                    );
                    return Ok(portfolio);
                }
                d -= 1;
                index[d] += 1;
                if index[d] < margins[d].levels.len() {
                    break;
                }
                index[d] = 0;
            }
        }
    }

    pub fn classes(&self) -> &[RiskClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Every severity mean multiplied by `factor`.
    pub fn scale_severity(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.classes {
            c.severity_mean = c.severity_mean.map(|m| m * factor);
        }
        out
    }

    /// Fails unless every class has a severity mean.
    pub fn require_severity(&self) -> Result<()> {
        match self.classes.iter().position(|c| c.severity_mean.is_none()) {
            Some(i) => Err(Error::config(
                &format!("portfolio.classes[{i}].lambda2"),
                "required by the frequency-severity model",
            )),
            None => Ok(()),
        }
    }
}

fn prefix_key(err: Error, prefix: &str) -> Error {
    match err {
        Error::Config { key, message } => Error::Config {
            key: format!("{prefix}.{key}"),
            message,
        },
        other => other,
    }
}

/// Posterior point estimates of the log-link regressions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlmCoefficients {
    pub frequency: BTreeMap<String, f64>,
    pub severity: Option<BTreeMap<String, f64>>,
    /// `1 / psi^[2]`. Parsed and carried along; relativities and HMSE do
    /// not depend on it.
    pub severity_shape_inverse: Option<f64>,
}

/// `exp(intercept + sum of the named coefficients)`.
///
/// `covariates` lists the indicator coefficients that are switched on for
/// the class; reference categories are simply omitted.
pub fn class_mean(coefficients: &BTreeMap<String, f64>, covariates: &[&str]) -> Result<f64> {
    let mut eta = *coefficients
        .get(INTERCEPT)
        .ok_or_else(|| Error::config(INTERCEPT, "missing coefficient"))?;
    for name in covariates {
        eta += *coefficients
            .get(*name)
            .ok_or_else(|| Error::config(name, "missing coefficient"))?;
    }
    let mean = libm::exp(eta);
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Numeric(format!(
            "class mean exp({eta}) is not finite and positive"
        )));
    }
    Ok(mean)
}

/// Marginal distribution of one categorical covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalMargin {
    pub name: String,
    pub levels: Vec<MarginLevel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginLevel {
    pub label: String,
    pub proportion: f64,
    /// Indicator coefficient for this level, `None` for the reference.
    pub coefficient: Option<String>,
}

impl MarginLevel {
    pub fn new(label: &str, proportion: f64, coefficient: Option<&str>) -> Self {
        MarginLevel {
            label: label.into(),
            proportion,
            coefficient: coefficient.map(Into::into),
        }
    }
}
