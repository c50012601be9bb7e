//! The classical `-1/+h` system on its own `z + 1` levels, without any
//! augmentation. Serves as an independent reference for `pen = 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::markov::{stationary, ClaimCountDistribution, TransitionMatrix};
use crate::portfolio::Portfolio;
use crate::random_effects::QuadratureGrid;
use crate::relativity::{MixingModel, ModelKind};

/// `(z + 1) x (z + 1)` transition matrix of the `-1/+h` system.
pub fn classical_matrix(max_level: u32, jump: u32, claim_mean: f64) -> Result<TransitionMatrix> {
    if jump == 0 || jump > max_level {
        return Err(Error::config("rule.h", "must satisfy 1 <= h <= z"));
    }
    let dist = ClaimCountDistribution::poisson(claim_mean)?;
    let z = max_level as usize;
    let h = jump as usize;
    let mut rows = vec![vec![0.0; z + 1]; z + 1];
    for (l, row) in rows.iter_mut().enumerate() {
        row[l.saturating_sub(1)] += dist.pmf(0);
        let mut covered = dist.pmf(0);
        let mut n = 1;
        while l + h * n < z {
            let p = dist.pmf(n as u32);
            row[l + h * n] += p;
            covered += p;
            n += 1;
        }
        row[z] += dist.tail(n as u32);
        debug_assert!(covered <= 1.0 + 1e-12);
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    TransitionMatrix::from_rows(&refs)
}

/// Relativities and level distribution of the classical system, computed
/// directly from the closed forms over the unaugmented chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTable {
    pub relativities: Vec<Option<f64>>,
    pub level_probs: Vec<f64>,
}

/// Optimal relativities of the `-1/+h` system:
/// `zeta(l) = sum_k w_k s_k^2 int T pi_l g / sum_k w_k s_k^2 int pi_l g`.
pub fn classical_relativities(
    max_level: u32,
    jump: u32,
    portfolio: &Portfolio,
    model: &MixingModel,
    grid: &QuadratureGrid,
) -> Result<ClassicalTable> {
    if model.kind() == ModelKind::FrequencySeverity {
        portfolio.require_severity()?;
    }
    let nodes = model.nodes(grid)?;
    let levels = max_level as usize + 1;
    let mut num = vec![0.0; levels];
    let mut den = vec![0.0; levels];
    let mut probs = vec![0.0; levels];
    for class in portfolio.classes() {
        let scale = match model.kind() {
            ModelKind::Frequency => class.frequency_mean,
            ModelKind::FrequencySeverity => class.frequency_mean * class.severity_mean.unwrap_or(0.0),
        };
        let s2 = scale * scale;
        for node in &nodes {
            let matrix = classical_matrix(max_level, jump, class.frequency_mean * node.theta)?;
            let pi = stationary(&matrix)?;
            for (l, &p) in pi.probs().iter().enumerate() {
                let w = class.weight * node.weight;
                probs[l] += w * p;
                den[l] += w * s2 * p;
                num[l] += w * s2 * node.target * p;
            }
        }
    }
    let relativities = num
        .iter()
        .zip(&den)
        .map(|(n, d)| if *d > 0.0 { Some(n / d) } else { None })
        .collect();
    Ok(ClassicalTable {
        relativities,
        level_probs: probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matrix_rows() {
        let p = classical_matrix(5, 2, 0.3).unwrap();
        assert!(p.max_row_sum_error() < 1e-14);
        let d = ClaimCountDistribution::poisson(0.3).unwrap();
        assert_abs_diff_eq!(p.get(0, 0), d.pmf(0), epsilon = 1e-16);
        assert_abs_diff_eq!(p.get(0, 2), d.pmf(1), epsilon = 1e-16);
        assert_abs_diff_eq!(p.get(0, 4), d.pmf(2), epsilon = 1e-16);
        assert_abs_diff_eq!(p.get(0, 5), d.tail(3), epsilon = 1e-16);
        assert_abs_diff_eq!(p.get(3, 5), d.tail(1), epsilon = 1e-16);
        assert!(classical_matrix(5, 6, 0.3).is_err());
    }
}
