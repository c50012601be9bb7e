//! Mixed stationary distributions, optimal relativities and HMSE.
//!
//! Everything reduces to one stationary solve per (risk class, quadrature
//! node) pair. Each solve contributes to four per-state sums:
//!
//! * `P(L* = s) = sum_k w_k sum_j w_j pi_s(lambda_k theta_j)`,
//! * `C_s = sum_k w_k s_k^2 sum_j w_j pi_s`,
//! * `B_s = sum_k w_k s_k^2 sum_j w_j T_j pi_s`,
//! * `A_s = sum_k w_k s_k^2 sum_j w_j T2_j pi_s`,
//!
//! where `s_k` is the a-priori premium scale of class `k` (`lambda_k` for
//! the frequency model, `lambda^[1]_k lambda^[2]_k` for the
//! frequency-severity model), `T_j` is the conditional expectation of the
//! random part of the correct premium at node `j` and `T2_j` that of its
//! square. The optimal relativity of level `l` is `sum B / sum C` over the
//! states of the level and
//! `HMSE(zeta) = sum_s A_s - 2 zeta(l) B_s + zeta(l)^2 C_s`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::markov::{build_matrix, stationary, ClaimCountDistribution};
use crate::portfolio::Portfolio;
use crate::random_effects::{gauss_hermite, BivariateEffect, LognormalEffect, QuadratureGrid};
use crate::state_space::{BmsRule, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Frequency-only premium `Lambda Theta`.
    Frequency,
    /// Frequency-severity premium `Lambda1 Lambda2 Theta1 Theta2`.
    FrequencySeverity,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Frequency => "frequency",
            ModelKind::FrequencySeverity => "frequency_severity",
        })
    }
}

/// How the severity effect is integrated out in the frequency-severity
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    /// Closed-form conditional moments of `Theta2` given `Theta1`.
    Reduced,
    /// Inner Gauss-Hermite rule over the part of `ln Theta2` independent
    /// of `Theta1`.
    Tensor { inner_nodes: usize },
}

/// Random-effect model used to mix the stationary distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingModel {
    Frequency(LognormalEffect),
    FrequencySeverity {
        effect: BivariateEffect,
        integration: Integration,
    },
}

/// Per-node quantities of the mixing integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingNode {
    /// Frequency effect `theta`.
    pub theta: f64,
    pub weight: f64,
    /// `E[random part of the correct premium | theta]`.
    pub target: f64,
    /// `E[(random part)^2 | theta]`.
    pub target_sq: f64,
}

impl MixingModel {
    pub fn frequency(sigma2: f64) -> Result<Self> {
        Ok(MixingModel::Frequency(LognormalEffect::new(sigma2)?))
    }

    pub fn frequency_severity(sigma1_2: f64, sigma2_2: f64, rho: f64) -> Result<Self> {
        Ok(MixingModel::FrequencySeverity {
            effect: BivariateEffect::new(sigma1_2, sigma2_2, rho)?,
            integration: Integration::Reduced,
        })
    }

    /// Same model with the severity effect integrated by `integration`.
    /// No effect on the frequency model.
    pub fn with_integration(self, integration: Integration) -> Self {
        match self {
            MixingModel::FrequencySeverity { effect, .. } => {
                MixingModel::FrequencySeverity { effect, integration }
            }
            other => other,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            MixingModel::Frequency(_) => ModelKind::Frequency,
            MixingModel::FrequencySeverity { .. } => ModelKind::FrequencySeverity,
        }
    }

    pub fn frequency_effect(&self) -> LognormalEffect {
        match self {
            MixingModel::Frequency(e) => *e,
            MixingModel::FrequencySeverity { effect, .. } => effect.frequency(),
        }
    }

    /// Gauss-Hermite grid over the frequency effect.
    pub fn grid(&self, nodes: usize) -> Result<QuadratureGrid> {
        self.frequency_effect().grid(nodes)
    }

    /// `E[T]`: 1 for the frequency model, `E[Theta1 Theta2]` otherwise.
    pub fn mean_target(&self) -> f64 {
        match self {
            MixingModel::Frequency(_) => 1.0,
            MixingModel::FrequencySeverity { effect, .. } => effect.cross_moment(),
        }
    }

    /// Mixing nodes for `grid`. A point-mass grid removes all
    /// heterogeneity, including the severity effect.
    pub fn nodes(&self, grid: &QuadratureGrid) -> Result<Vec<MixingNode>> {
        if grid.is_point_mass() {
            return Ok(vec![MixingNode {
                theta: 1.0,
                weight: 1.0,
                target: 1.0,
                target_sq: 1.0,
            }]);
        }
        let triples = grid.scores().iter().zip(grid.thetas()).zip(grid.weights());
        match *self {
            MixingModel::Frequency(_) => Ok(triples
                .map(|((_, &theta), &weight)| MixingNode {
                    theta,
                    weight,
                    target: theta,
                    target_sq: theta * theta,
                })
                .collect()),
            MixingModel::FrequencySeverity {
                effect,
                integration: Integration::Reduced,
            } => Ok(triples
                .map(|((&x, &theta), &weight)| MixingNode {
                    theta,
                    weight,
                    target: theta * effect.conditional_severity_mean_at_score(x),
                    target_sq: theta * theta * effect.conditional_severity_second_moment_at_score(x),
                })
                .collect()),
            MixingModel::FrequencySeverity {
                effect,
                integration: Integration::Tensor { inner_nodes },
            } => {
                let (us, ws) = gauss_hermite(inner_nodes)?;
                Ok(triples
                    .map(|((&x, &theta), &weight)| {
                        let mut target = 0.0;
                        let mut target_sq = 0.0;
                        for (&u, &wu) in us.iter().zip(&ws) {
                            let (t1, t2) = effect.at_scores(x, u);
                            let prod = t1 * t2;
                            target += wu * prod;
                            target_sq += wu * prod * prod;
                        }
                        MixingNode {
                            theta,
                            weight,
                            target,
                            target_sq,
                        }
                    })
                    .collect())
            }
        }
    }
}

/// Checks applied to every transition matrix and stationary vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveTolerances {
    /// Largest allowed `|row sum - 1|`.
    pub row_sum: f64,
    /// Largest allowed `max |pi - pi P|`.
    pub residual: f64,
}

impl Default for SolveTolerances {
    fn default() -> Self {
        SolveTolerances {
            row_sum: 1e-12,
            residual: 1e-10,
        }
    }
}

/// One stationary solve: class `class` at quadrature node `node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingJob {
    pub class: usize,
    pub node: usize,
    /// `lambda_k theta_j`.
    pub claim_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct PlanClass {
    label: String,
    weight: f64,
    frequency_mean: f64,
    scale: f64,
}

/// Everything needed for the (class, node) solves, in a fixed order.
///
/// [`MixingPlan::jobs`] enumerates classes in the outer loop and nodes in
/// the inner loop; [`MixingPlan::assemble`] expects solutions in exactly
/// that order, which keeps the reduction deterministic whichever way the
/// solves are scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingPlan {
    space: StateSpace,
    tolerances: SolveTolerances,
    kind: ModelKind,
    mean_target: f64,
    classes: Vec<PlanClass>,
    nodes: Vec<MixingNode>,
}

impl MixingPlan {
    pub fn new(
        rule: BmsRule,
        portfolio: &Portfolio,
        model: &MixingModel,
        grid: &QuadratureGrid,
    ) -> Result<Self> {
        let kind = model.kind();
        if kind == ModelKind::FrequencySeverity {
            portfolio.require_severity()?;
        }
        let classes = portfolio
            .classes()
            .iter()
            .map(|c| PlanClass {
                label: c.label.clone(),
                weight: c.weight,
                frequency_mean: c.frequency_mean,
                scale: match kind {
                    ModelKind::Frequency => c.frequency_mean,
                    ModelKind::FrequencySeverity => {
                        c.frequency_mean * c.severity_mean.expect("checked above")
                    }
                },
            })
            .collect();
        let mean_target = if grid.is_point_mass() {
            1.0
        } else {
            model.mean_target()
        };
        Ok(MixingPlan {
            space: StateSpace::new(rule),
            tolerances: SolveTolerances::default(),
            kind,
            mean_target,
            classes,
            nodes: model.nodes(grid)?,
        })
    }

    pub fn with_tolerances(mut self, tolerances: SolveTolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn nodes(&self) -> &[MixingNode] {
        &self.nodes
    }

    pub fn job_count(&self) -> usize {
        self.classes.len() * self.nodes.len()
    }

    pub fn jobs(&self) -> impl Iterator<Item = MixingJob> + '_ {
        self.classes.iter().enumerate().flat_map(move |(k, c)| {
            self.nodes.iter().enumerate().map(move |(j, n)| MixingJob {
                class: k,
                node: j,
                claim_mean: c.frequency_mean * n.theta,
            })
        })
    }

    /// Stationary vector for one job, checked against the plan's
    /// tolerances.
    pub fn solve(&self, job: &MixingJob) -> Result<Vec<f64>> {
        let where_ = || {
            format!(
                "class {} (`{}`), node {}",
                job.class, self.classes[job.class].label, job.node
            )
        };
        let context = |e: Error| match e {
            Error::Degenerate { mean, p0, message } => Error::Degenerate {
                mean,
                p0,
                message: format!("{}: {message}", where_()),
            },
            Error::Numeric(message) => Error::Numeric(format!("{}: {message}", where_())),
            other => other,
        };
        let dist = ClaimCountDistribution::poisson(job.claim_mean).map_err(context)?;
        let matrix = build_matrix(&self.space, &dist).map_err(context)?;
        let row_error = matrix.max_row_sum_error();
        if row_error > self.tolerances.row_sum {
            return Err(context(Error::Numeric(format!(
                "row sums deviate from 1 by {row_error:e} at claim mean {:e}",
                job.claim_mean
            ))));
        }
        let pi = stationary(&matrix).map_err(context)?;
        let residual = pi.residual(&matrix);
        if residual > self.tolerances.residual {
            return Err(context(Error::Numeric(format!(
                "stationary residual {residual:e} at claim mean {:e}",
                job.claim_mean
            ))));
        }
        Ok(pi.into_vec())
    }

    /// Folds per-job stationary vectors, given in [`MixingPlan::jobs`]
    /// order, into the mixed sums.
    pub fn assemble<I>(&self, solutions: I) -> Result<MixedStationary>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let n = self.space.len();
        let mut probs = vec![0.0; n];
        let mut square = vec![0.0; n];
        let mut cross = vec![0.0; n];
        let mut weight = vec![0.0; n];
        let mut jobs = self.jobs();
        let mut seen = 0usize;
        for pi in solutions {
            let job = jobs.next().ok_or_else(|| {
                Error::Inconsistency(format!("more than {} stationary vectors", self.job_count()))
            })?;
            if pi.len() != n {
                return Err(Error::Inconsistency(format!(
                    "stationary vector of length {} for a space of {n} states",
                    pi.len()
                )));
            }
            let class = &self.classes[job.class];
            let node = &self.nodes[job.node];
            let w = class.weight * node.weight;
            let ws = w * class.scale * class.scale;
            for (s, &p) in pi.iter().enumerate() {
                probs[s] += w * p;
                weight[s] += ws * p;
                cross[s] += ws * node.target * p;
                square[s] += ws * node.target_sq * p;
            }
            seen += 1;
        }
        if seen != self.job_count() {
            return Err(Error::Inconsistency(format!(
                "{seen} stationary vectors for {} jobs",
                self.job_count()
            )));
        }
        let rule = *self.space.rule();
        let level_probs = (0..=rule.max_level())
            .map(|l| self.space.indices_of_level(l).map(|s| probs[s]).sum())
            .collect();
        Ok(MixedStationary {
            space: self.space.clone(),
            kind: self.kind,
            mean_target: self.mean_target,
            state_probs: probs,
            level_probs,
            square,
            cross,
            weight,
        })
    }
}

/// Stationary distribution mixed over risk classes and the random effect,
/// together with the sums needed for relativities and HMSE.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStationary {
    space: StateSpace,
    kind: ModelKind,
    mean_target: f64,
    state_probs: Vec<f64>,
    level_probs: Vec<f64>,
    square: Vec<f64>,
    cross: Vec<f64>,
    weight: Vec<f64>,
}

/// Solves every (class, node) pair sequentially and mixes the results.
pub fn mixed_stationary(
    rule: BmsRule,
    portfolio: &Portfolio,
    model: &MixingModel,
    grid: &QuadratureGrid,
) -> Result<MixedStationary> {
    let plan = MixingPlan::new(rule, portfolio, model, grid)?;
    let solutions = plan
        .jobs()
        .map(|job| plan.solve(&job))
        .collect::<Result<Vec<_>>>()?;
    plan.assemble(solutions)
}

impl MixedStationary {
    pub fn rule(&self) -> &BmsRule {
        self.space.rule()
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// `P(L* = (l)_a)` in state-space order.
    pub fn state_probs(&self) -> &[f64] {
        &self.state_probs
    }

    /// `P(L = l) = sum_a P(L* = (l)_a)`.
    pub fn level_probs(&self) -> &[f64] {
        &self.level_probs
    }

    /// `E[T]` of the premium target the sums were built for.
    pub fn mean_target(&self) -> f64 {
        self.mean_target
    }

    fn level_sum(&self, values: &[f64], level: u32) -> f64 {
        self.space.indices_of_level(level).map(|s| values[s]).sum()
    }

    /// Numerator of the optimal relativity of `level`.
    pub fn numerator(&self, level: u32) -> f64 {
        self.level_sum(&self.cross, level)
    }

    /// Denominator of the optimal relativity of `level`.
    pub fn denominator(&self, level: u32) -> f64 {
        self.level_sum(&self.weight, level)
    }

    /// `sum_s A_s`: the expected squared correct premium.
    pub fn second_moment(&self) -> f64 {
        self.square.iter().sum()
    }

    /// Optimal relativity per level, `None` where the level carries no
    /// stationary mass.
    pub fn optimal_relativities(&self) -> Vec<Option<f64>> {
        (0..=self.rule().max_level())
            .map(|l| {
                let den = self.denominator(l);
                if den > 0.0 {
                    Some(self.numerator(l) / den)
                } else {
                    None
                }
            })
            .collect()
    }

    /// HMSE of an arbitrary relativity vector over levels `0..=z`. Levels
    /// with no stationary mass contribute nothing.
    pub fn hmse(&self, relativities: &[f64]) -> Result<f64> {
        let levels = self.rule().level_count();
        if relativities.len() != levels {
            return Err(Error::config(
                "relativities",
                format!("expected {levels} values, got {}", relativities.len()),
            ));
        }
        let mut total = 0.0;
        for (l, &zeta) in relativities.iter().enumerate() {
            let l = l as u32;
            let den = self.denominator(l);
            if den == 0.0 {
                continue;
            }
            if !zeta.is_finite() {
                return Err(Error::config(
                    "relativities",
                    format!("level {l} has non-finite relativity {zeta}"),
                ));
            }
            let a = self.level_sum(&self.square, l);
            total += a - 2.0 * zeta * self.numerator(l) + zeta * zeta * den;
        }
        Ok(total.max(0.0))
    }

    /// Optimal relativities with their HMSE.
    pub fn relativity_table(&self) -> RelativityTable {
        let relativities = self.optimal_relativities();
        let filled: Vec<f64> = relativities.iter().map(|r| r.unwrap_or(0.0)).collect();
        let hmse = self.hmse(&filled).expect("length matches by construction");
        RelativityTable {
            rule: *self.rule(),
            kind: self.kind,
            relativities,
            level_probs: self.level_probs.clone(),
            hmse,
        }
    }

    /// Per-level residual of the normal equation
    /// `sum_{s in l} (B_s - zeta(l) C_s) = 0`, relative to the numerator.
    pub fn first_order_residuals(&self, relativities: &[f64]) -> Vec<f64> {
        relativities
            .iter()
            .enumerate()
            .map(|(l, &zeta)| {
                let num = self.numerator(l as u32);
                let den = self.denominator(l as u32);
                if den == 0.0 {
                    0.0
                } else {
                    libm::fabs(num - zeta * den) / num.max(f64::MIN_POSITIVE)
                }
            })
            .collect()
    }
}

/// Optimal relativities, level distribution and HMSE for one
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativityTable {
    pub rule: BmsRule,
    pub kind: ModelKind,
    /// `None` marks a level with no stationary mass.
    pub relativities: Vec<Option<f64>>,
    pub level_probs: Vec<f64>,
    pub hmse: f64,
}

impl RelativityTable {
    /// `sum_l zeta(l) P(L = l)` over defined levels.
    pub fn balance(&self) -> f64 {
        self.relativities
            .iter()
            .zip(&self.level_probs)
            .filter_map(|(r, p)| r.map(|r| r * p))
            .sum()
    }

    /// Relativities with undefined levels replaced by `fill`.
    pub fn values_or(&self, fill: f64) -> Vec<f64> {
        self.relativities.iter().map(|r| r.unwrap_or(fill)).collect()
    }
}

/// Optimal relativities under the frequency-only model.
pub fn optimal_relativities_model1(
    rule: BmsRule,
    portfolio: &Portfolio,
    effect: &LognormalEffect,
    grid: &QuadratureGrid,
) -> Result<RelativityTable> {
    let model = MixingModel::Frequency(*effect);
    Ok(mixed_stationary(rule, portfolio, &model, grid)?.relativity_table())
}

/// Optimal relativities under the frequency-severity model, with the
/// severity effect integrated in closed form.
pub fn optimal_relativities_model2(
    rule: BmsRule,
    portfolio: &Portfolio,
    effect: &BivariateEffect,
    grid: &QuadratureGrid,
) -> Result<RelativityTable> {
    let model = MixingModel::FrequencySeverity {
        effect: *effect,
        integration: Integration::Reduced,
    };
    Ok(mixed_stationary(rule, portfolio, &model, grid)?.relativity_table())
}
