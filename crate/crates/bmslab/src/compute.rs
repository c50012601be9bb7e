//! Parallel drivers over the engine. Work is split into independent
//! pieces and collected back in a fixed order, so results do not depend on
//! the number of threads.

use bmslab_core::simulator::simulate_range;
use bmslab_core::{
    BmsRule, MixedStationary, MixingModel, MixingPlan, Portfolio, QuadratureGrid, SimConfig, SimReport,
    SolveTolerances,
};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::Result;

/// Policyholders per simulation task.
const SIM_CHUNK: u64 = 4096;

/// Mixed stationary distribution with one stationary solve per (class,
/// node) pair, solved in parallel.
pub fn mixed_stationary(
    rule: BmsRule,
    portfolio: &Portfolio,
    model: &MixingModel,
    grid: &QuadratureGrid,
    tolerances: SolveTolerances,
) -> Result<MixedStationary> {
    let plan = MixingPlan::new(rule, portfolio, model, grid)?.with_tolerances(tolerances);
    let jobs: Vec<_> = plan.jobs().collect();
    let solutions: Vec<_> = jobs.par_iter().map(|job| plan.solve(job)).collect();
    // The first failing job in enumeration order is reported.
    let solutions = solutions.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(plan.assemble(solutions)?)
}

pub fn mixed_stationary_for(run: &RunConfig) -> Result<MixedStationary> {
    mixed_stationary(run.rule, &run.portfolio, &run.model, &run.grid, run.tolerances)
}

/// Monte-Carlo run split into chunks of policyholders.
pub fn simulate(config: &SimConfig, portfolio: &Portfolio, model: &MixingModel) -> Result<SimReport> {
    config.validate()?;
    let n = config.policyholders;
    let ranges: Vec<_> = (0..n.div_ceil(SIM_CHUNK))
        .map(|i| i * SIM_CHUNK..((i + 1) * SIM_CHUNK).min(n))
        .collect();
    let parts: Vec<_> = ranges
        .into_par_iter()
        .map(|r| simulate_range(config, portfolio, model, r))
        .collect();
    let mut parts = parts.into_iter();
    let mut report = parts.next().expect("at least one policyholder")?;
    for part in parts {
        report.merge(part?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bmslab_core::relativity;

    #[test]
    fn parallel_matches_sequential() {
        let rule = BmsRule::new(9, 1, 2, 0).unwrap();
        let model = MixingModel::frequency_severity(0.99, 0.29, -0.45).unwrap();
        let portfolio = Portfolio::new(vec![
            bmslab_core::RiskClass::new("a", 0.05, 0.3).with_severity(2.0),
            bmslab_core::RiskClass::new("b", 0.4, 0.7).with_severity(5.0),
        ])
        .unwrap();
        let grid = model.grid(48).unwrap();
        let par = mixed_stationary(rule, &portfolio, &model, &grid, SolveTolerances::default()).unwrap();
        let seq = relativity::mixed_stationary(rule, &portfolio, &model, &grid).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn chunked_simulation_matches_sequential() {
        let rule = BmsRule::new(5, 2, 1, 0).unwrap();
        let config = SimConfig {
            policyholders: 9_000,
            burn_in_years: 40,
            ..SimConfig::new(rule, 7)
        };
        let model = MixingModel::frequency(0.5).unwrap();
        let portfolio = Portfolio::single(0.2, None).unwrap();
        let par = simulate(&config, &portfolio, &model).unwrap();
        let seq = bmslab_core::simulator::simulate(&config, &portfolio, &model).unwrap();
        assert_eq!(par, seq);
    }
}
