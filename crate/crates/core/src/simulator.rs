//! Seeded Monte-Carlo simulation of policyholder trajectories.
//!
//! Every policyholder gets its own ChaCha stream (`stream = index`) under
//! the master seed, so results do not depend on how the population is
//! split into ranges or threads.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::portfolio::Portfolio;
use crate::relativity::{MixingModel, ModelKind};
use crate::state_space::{BmsRule, RawHistoryState, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub rule: BmsRule,
    pub policyholders: u64,
    /// Years simulated before anything is recorded.
    pub burn_in_years: u32,
    /// Years recorded per policyholder after the burn-in.
    pub measured_years: u32,
    pub seed: u64,
}

impl SimConfig {
    /// 100 000 policyholders, 500 burn-in years, one measured year.
    pub fn new(rule: BmsRule, seed: u64) -> Self {
        SimConfig {
            rule,
            policyholders: 100_000,
            burn_in_years: 500,
            measured_years: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.policyholders == 0 {
            return Err(Error::config("simulation.policyholders", "must be at least 1"));
        }
        if self.burn_in_years == 0 {
            return Err(Error::config("simulation.burn_in_years", "must be at least 1"));
        }
        if self.measured_years == 0 {
            return Err(Error::config("simulation.measured_years", "must be at least 1"));
        }
        Ok(())
    }
}

/// One recorded policyholder-year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub class: u32,
    pub level: u32,
    /// A-priori premium scale of the class.
    pub scale: f64,
    /// Random part of the correct premium: `theta` or `theta1 theta2`.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub rule: BmsRule,
    pub level_counts: Vec<u64>,
    pub state_counts: Vec<u64>,
    pub observations: Vec<Observation>,
}

impl SimReport {
    fn empty(rule: BmsRule) -> Self {
        SimReport {
            rule,
            level_counts: vec![0; rule.level_count()],
            state_counts: vec![0; rule.state_count()],
            observations: Vec::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.level_counts.iter().sum()
    }

    /// Appends `other`, which must cover the policyholders right after
    /// those of `self`.
    pub fn merge(&mut self, other: SimReport) {
        for (a, b) in self.level_counts.iter_mut().zip(&other.level_counts) {
            *a += b;
        }
        for (a, b) in self.state_counts.iter_mut().zip(&other.state_counts) {
            *a += b;
        }
        self.observations.extend(other.observations);
    }

    pub fn level_probs(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.level_counts.iter().map(|c| *c as f64 / n).collect()
    }

    pub fn state_probs(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.state_counts.iter().map(|c| *c as f64 / n).collect()
    }

    /// `sqrt(p (1 - p) / n)` per level at the empirical `p`.
    pub fn level_standard_errors(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.level_probs()
            .iter()
            .map(|p| libm::sqrt(p * (1.0 - p) / n))
            .collect()
    }

    /// Compares every level with `analytic`, using the binomial standard
    /// error at the analytic probability.
    pub fn compare_levels(&self, analytic: &[f64], sigmas: f64) -> Vec<CellCheck> {
        compare(&self.level_counts, analytic, sigmas)
    }

    /// Same as [`SimReport::compare_levels`] over the augmented states;
    /// `index` in each check is the state index.
    pub fn compare_states(&self, analytic: &[f64], sigmas: f64) -> Vec<CellCheck> {
        compare(&self.state_counts, analytic, sigmas)
    }
}

fn compare(counts: &[u64], analytic: &[f64], sigmas: f64) -> Vec<CellCheck> {
    let n = counts.iter().sum::<u64>() as f64;
    counts
        .iter()
        .zip(analytic)
        .enumerate()
        .map(|(index, (&count, &p))| {
            let empirical = count as f64 / n;
            let standard_error = libm::sqrt(p * (1.0 - p) / n);
            let deviation = libm::fabs(empirical - p);
            CellCheck {
                index,
                empirical,
                analytic: p,
                standard_error,
                pass: deviation <= sigmas * standard_error || deviation == 0.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCheck {
    /// Level or state index.
    pub index: usize,
    pub empirical: f64,
    pub analytic: f64,
    pub standard_error: f64,
    pub pass: bool,
}

impl CellCheck {
    /// `|empirical - analytic|` in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.standard_error > 0.0 {
            libm::fabs(self.empirical - self.analytic) / self.standard_error
        } else if self.empirical == self.analytic {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
    pub count: u64,
}

/// Simulates the whole population sequentially.
pub fn simulate(config: &SimConfig, portfolio: &Portfolio, model: &MixingModel) -> Result<SimReport> {
    simulate_range(config, portfolio, model, 0..config.policyholders)
}

/// Simulates policyholders `range` of the population. Concatenating the
/// reports of consecutive ranges in order reproduces [`simulate`] exactly.
pub fn simulate_range(
    config: &SimConfig,
    portfolio: &Portfolio,
    model: &MixingModel,
    range: Range<u64>,
) -> Result<SimReport> {
    config.validate()?;
    if model.kind() == ModelKind::FrequencySeverity {
        portfolio.require_severity()?;
    }
    let rule = config.rule;
    let space = StateSpace::new(rule);
    let cumulative: Vec<f64> = portfolio
        .classes()
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight;
            Some(*acc)
        })
        .collect();
    let mut report = SimReport::empty(rule);
    report
        .observations
        .reserve((range.end - range.start) as usize * config.measured_years as usize);

    for index in range {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index);

        let u: f64 = rng.random();
        let k = cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(cumulative.len() - 1);
        let class = &portfolio.classes()[k];
        let (theta, target, scale) = match model {
            MixingModel::Frequency(effect) => {
                let t = effect.sample(&mut rng);
                (t, t, class.frequency_mean)
            }
            MixingModel::FrequencySeverity { effect, .. } => {
                let (t1, t2) = effect.sample(&mut rng);
                let severity = class.severity_mean.expect("checked above");
                (t1, t1 * t2, class.frequency_mean * severity)
            }
        };
        let mean = class.frequency_mean * theta;
        let claims = if mean > 0.0 {
            Some(
                Poisson::new(mean)
                    .map_err(|e| Error::Numeric(format!("policyholder {index}: Poisson mean {mean}: {e}")))?,
            )
        } else {
            None
        };

        let mut raw = RawHistoryState::new(&rule);
        let mut state = rule.entry_state();
        for year in 0..config.burn_in_years + config.measured_years {
            let n = match &claims {
                Some(p) => {
                    let draw: f64 = p.sample(&mut rng);
                    if draw >= f64::from(u32::MAX) {
                        u32::MAX
                    } else {
                        draw as u32
                    }
                }
                None => 0,
            };
            raw.advance(n, &rule);
            state = rule.step(state, n);
            if raw.level != state.level {
                return Err(Error::Inconsistency(format!(
                    "policyholder {index}, year {}: raw rule gives level {}, augmented rule gives {state}",
                    year + 1,
                    raw.level
                )));
            }
            if year >= config.burn_in_years {
                report.level_counts[state.level as usize] += 1;
                let s = space.index_of(state).expect("closed");
                report.state_counts[s] += 1;
                report.observations.push(Observation {
                    class: k as u32,
                    level: state.level,
                    scale,
                    target,
                });
            }
        }
    }
    Ok(report)
}

/// Sample mean of `(scale * target - scale * zeta(level))^2` over the
/// recorded observations.
pub fn empirical_hmse(report: &SimReport, relativities: &[f64]) -> Result<Estimate> {
    if relativities.len() != report.rule.level_count() {
        return Err(Error::config(
            "relativities",
            format!(
                "expected {} values, got {}",
                report.rule.level_count(),
                relativities.len()
            ),
        ));
    }
    let n = report.observations.len();
    if n < 2 {
        return Err(Error::Numeric("need at least two observations".into()));
    }
    let errors = report.observations.iter().map(|o| {
        let d = o.scale * (o.target - relativities[o.level as usize]);
        d * d
    });
    // Welford keeps the variance accurate for large means.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, e) in errors.enumerate() {
        let delta = e - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (e - mean);
    }
    let variance = m2 / (n - 1) as f64;
    Ok(Estimate {
        mean,
        standard_error: libm::sqrt(variance / n as f64),
        count: n as u64,
    })
}
