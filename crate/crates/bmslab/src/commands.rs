//! The subcommands, each rendering its complete output into a string.

use bmslab_core::markov::{build_matrix, power_iteration, stationary};
use bmslab_core::simulator::empirical_hmse;
use bmslab_core::state_space::replay_raw;
use bmslab_core::{BmsRule, ClaimCountDistribution, StateSpace};

use crate::compute::{mixed_stationary_for, simulate};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::format::{fixed, matrix_table, significant, trace_table, Format, Table};
use crate::golden::TableId;
use crate::reproduce::Reproduction;

/// Standard errors allowed per simulated cell.
pub const CELL_SIGMAS: f64 = 4.0;
/// Standard errors allowed for the simulated HMSE.
pub const HMSE_SIGMAS: f64 = 3.0;

/// Output of a command together with whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub passed: bool,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, passed: true }
    }
}

fn footer(table: &mut Table, run: &RunConfig) {
    table.note("rule", run.rule.to_string());
    table.note("model", run.model_summary());
    table.note("fingerprint", run.fingerprint.clone());
    for w in run.portfolio.warnings() {
        table.note("warning", w.clone());
    }
}

fn check_length(relativities: &[f64], rule: &BmsRule) -> Result<()> {
    if relativities.len() != rule.level_count() {
        return Err(CliError::Usage(format!(
            "--relativities has {} values but the rule has {} levels",
            relativities.len(),
            rule.level_count()
        )));
    }
    Ok(())
}

/// Optimal relativities and level distribution, with the HMSE of the
/// optimal vector (or of `relativities` when given) in the footer.
pub fn tabulate(
    run: &RunConfig,
    format: Format,
    digits: usize,
    relativities: Option<&[f64]>,
) -> Result<Output> {
    if let Some(r) = relativities {
        check_length(r, &run.rule)?;
    }
    let ms = mixed_stationary_for(run)?;
    let table = ms.relativity_table();
    let mut t = Table::new(["level", "relativity", "stationary_prob"]);
    for (level, (r, p)) in table.relativities.iter().zip(&table.level_probs).enumerate() {
        t.push([level.to_string(), fixed(*r, digits), fixed(Some(*p), digits)]);
    }
    t.note("hmse", significant(table.hmse));
    if let Some(r) = relativities {
        t.note("hmse_given", significant(ms.hmse(r)?));
    }
    footer(&mut t, run);
    Ok(Output::ok(t.render(format)))
}

/// Parses `0,0,2,1`. The empty string is the empty history.
pub fn parse_claims(text: &str) -> Result<Vec<u32>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .enumerate()
        .map(|(i, c)| {
            c.trim().parse::<u32>().map_err(|_| {
                CliError::Usage(format!(
                    "claim count #{} `{}` is not a nonnegative integer",
                    i + 1,
                    c.trim()
                ))
            })
        })
        .collect()
}

/// Level path of a claim history under the raw rule and the augmented
/// chain, optionally followed by the transition matrix at `matrix_mean`.
pub fn trace(rule: BmsRule, claims: &[u32], format: Format, matrix_mean: Option<f64>) -> Result<Output> {
    let trajectory = replay_raw(claims, &rule);
    if !trajectory.is_consistent() {
        return Err(bmslab_core::Error::Inconsistency(format!(
            "raw levels {:?} differ from the augmented path",
            trajectory.levels
        ))
        .into());
    }
    let mut text = trace_table(claims, &trajectory).render(format);
    if let Some(mean) = matrix_mean {
        let space = StateSpace::new(rule);
        let matrix = build_matrix(&space, &ClaimCountDistribution::poisson(mean)?)?;
        text.push('\n');
        text.push_str(&matrix_table(&space, &matrix).render(format));
    }
    Ok(Output::ok(text))
}

/// Monte-Carlo run against the analytic distribution and HMSE.
pub fn simulate_report(run: &RunConfig, format: Format, relativities: Option<&[f64]>) -> Result<Output> {
    if let Some(r) = relativities {
        check_length(r, &run.rule)?;
    }
    let ms = mixed_stationary_for(run)?;
    let zeta = match relativities {
        Some(r) => r.to_vec(),
        None => ms.relativity_table().values_or(0.0),
    };
    let analytic_hmse = ms.hmse(&zeta)?;
    let report = simulate(&run.simulation, &run.portfolio, &run.model)?;
    let estimate = empirical_hmse(&report, &zeta)?;

    let levels = report.compare_levels(ms.level_probs(), CELL_SIGMAS);
    let states = report.compare_states(ms.state_probs(), CELL_SIGMAS);
    let mut t = Table::new(["cell", "empirical", "analytic", "std_error", "z_score", "status"]);
    let space = ms.space();
    let rows = levels
        .iter()
        .map(|c| (format!("L={}", c.index), c))
        .chain(states.iter().map(|c| (format!("L*={}", space.state(c.index)), c)));
    let mut failures = 0;
    let mut cells = 0;
    for (name, c) in rows {
        cells += 1;
        failures += usize::from(!c.pass);
        t.push([
            name,
            format!("{:.6}", c.empirical),
            format!("{:.6}", c.analytic),
            format!("{:.6}", c.standard_error),
            format!("{:.2}", c.z_score()),
            if c.pass { "PASS" } else { "FAIL" }.to_string(),
        ]);
    }
    let hmse_pass = (estimate.mean - analytic_hmse).abs() <= HMSE_SIGMAS * estimate.standard_error;
    t.note(
        "hmse",
        format!(
            "empirical {} se {} analytic {} {}",
            significant(estimate.mean),
            significant(estimate.standard_error),
            significant(analytic_hmse),
            if hmse_pass { "PASS" } else { "FAIL" }
        ),
    );
    let sim = &run.simulation;
    t.note(
        "simulation",
        format!(
            "policyholders={} burn_in_years={} measured_years={} seed={}",
            sim.policyholders, sim.burn_in_years, sim.measured_years, sim.seed
        ),
    );
    footer(&mut t, run);
    let passed = failures == 0 && hmse_pass;
    t.note(
        "result",
        format!(
            "{} ({}/{cells} cells within {CELL_SIGMAS} se, hmse within {HMSE_SIGMAS} se: {})",
            if passed { "PASS" } else { "FAIL" },
            cells - failures,
            if hmse_pass { "yes" } else { "no" }
        ),
    );
    Ok(Output {
        text: t.render(format),
        passed,
    })
}

pub fn reproduce(id: TableId, nodes: Option<usize>, format: Format) -> Result<Output> {
    let r = Reproduction::run(id, nodes)?;
    Ok(Output {
        text: r.render(format),
        passed: r.passed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum InspectView {
    /// Augmented states in matrix order.
    #[default]
    States,
    /// Transition matrix at one claim mean.
    Matrix,
    /// Stationary vector by direct solve and by power iteration.
    Stationary,
    /// Quadrature grid over the frequency effect.
    Grid,
    /// Risk classes after validation.
    Classes,
}

pub fn inspect(
    rule: BmsRule,
    run: Option<&RunConfig>,
    view: InspectView,
    mean: f64,
    format: Format,
) -> Result<Output> {
    let space = StateSpace::new(rule);
    let mut t = match view {
        InspectView::States => {
            let mut t = Table::new(["index", "state", "level", "counter"]);
            for (i, s) in space.states().iter().enumerate() {
                t.push([
                    i.to_string(),
                    s.to_string(),
                    s.level.to_string(),
                    s.counter.to_string(),
                ]);
            }
            t.note("states", space.len().to_string());
            t
        }
        InspectView::Matrix => {
            let matrix = build_matrix(&space, &ClaimCountDistribution::poisson(mean)?)?;
            let mut t = matrix_table(&space, &matrix);
            t.note("claim_mean", format!("{mean}"));
            t.note("max_row_sum_error", format!("{:e}", matrix.max_row_sum_error()));
            t
        }
        InspectView::Stationary => {
            let matrix = build_matrix(&space, &ClaimCountDistribution::poisson(mean)?)?;
            let direct = stationary(&matrix)?;
            let power = power_iteration(&matrix, 1_000_000, 1e-15);
            let mut t = Table::new(["index", "state", "direct", "power", "abs_diff"]);
            for (i, s) in space.states().iter().enumerate() {
                let (a, b) = (direct.probs()[i], power.vector.probs()[i]);
                t.push([
                    i.to_string(),
                    s.to_string(),
                    format!("{a:.12}"),
                    format!("{b:.12}"),
                    format!("{:e}", (a - b).abs()),
                ]);
            }
            t.note("claim_mean", format!("{mean}"));
            t.note("residual", format!("{:e}", direct.residual(&matrix)));
            t.note("power_iterations", power.iterations.to_string());
            t.note("power_last_change", format!("{:e}", power.last_change));
            t
        }
        InspectView::Grid => {
            let run = run.ok_or_else(|| CliError::Usage("--show grid needs --config".into()))?;
            let mut t = Table::new(["node", "score", "theta", "weight"]);
            for (i, ((x, th), w)) in run
                .grid
                .scores()
                .iter()
                .zip(run.grid.thetas())
                .zip(run.grid.weights())
                .enumerate()
            {
                t.push([
                    i.to_string(),
                    format!("{x:.12}"),
                    format!("{th:.12e}"),
                    format!("{w:.12e}"),
                ]);
            }
            let effect = run.model.frequency_effect();
            for k in 1..=2 {
                let exact = if run.grid.is_point_mass() {
                    1.0
                } else {
                    effect.moment(k)
                };
                t.note(
                    format!("E[theta^{k}]"),
                    format!("{:.15} exact {:.15}", run.grid.moment(k), exact),
                );
            }
            t
        }
        InspectView::Classes => {
            let run = run.ok_or_else(|| CliError::Usage("--show classes needs --config".into()))?;
            let mut t = Table::new(["class", "label", "lambda1", "lambda2", "weight"]);
            for (i, c) in run.portfolio.classes().iter().enumerate() {
                t.push([
                    i.to_string(),
                    c.label.clone(),
                    format!("{:.9}", c.frequency_mean),
                    c.severity_mean.map_or("NA".into(), |m| format!("{m:.6}")),
                    format!("{:.9}", c.weight),
                ]);
            }
            t
        }
    };
    t.note("rule", rule.to_string());
    if let Some(run) = run {
        t.note("fingerprint", run.fingerprint.clone());
        for w in run.portfolio.warnings() {
            t.note("warning", w.clone());
        }
    }
    Ok(Output::ok(t.render(format)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claims_lists() {
        assert_eq!(parse_claims("").unwrap(), Vec::<u32>::new());
        assert_eq!(parse_claims(" 0, 2 ,1").unwrap(), vec![0, 2, 1]);
        assert!(matches!(parse_claims("0,-1"), Err(CliError::Usage(_))));
        assert!(matches!(parse_claims("0,,1"), Err(CliError::Usage(_))));
    }
}
