//! Transition matrices over the augmented state space and their
//! stationary distributions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state_space::StateSpace;

/// Supported claim-count families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimFamily {
    Poisson,
}

/// Conditional claim-count law for one policyholder-year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimCountDistribution {
    mean: f64,
    family: ClaimFamily,
    /// Inert for Poisson.
    dispersion: f64,
}

impl ClaimCountDistribution {
    pub fn poisson(mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(Error::Numeric(format!(
                "claim mean must be finite and nonnegative, got {mean}"
            )));
        }
        Ok(ClaimCountDistribution {
            mean,
            family: ClaimFamily::Poisson,
            dispersion: 1.0,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn family(&self) -> ClaimFamily {
        self.family
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    /// `P(N = n)`, evaluated on the log scale so large means underflow
    /// cleanly to zero.
    pub fn pmf(&self, n: u32) -> f64 {
        match self.family {
            ClaimFamily::Poisson => {
                if self.mean == 0.0 {
                    return if n == 0 { 1.0 } else { 0.0 };
                }
                let n_f = f64::from(n);
                libm::exp(-self.mean + n_f * libm::log(self.mean) - libm::lgamma(n_f + 1.0))
            }
        }
    }

    /// `P(N >= k)`.
    ///
    /// Taken as `1 - P(N < k)` unless that partial sum is close to one, in
    /// which case the upper series is summed directly to avoid
    /// cancellation.
    pub fn tail(&self, k: u32) -> f64 {
        let partial: f64 = (0..k).map(|n| self.pmf(n)).sum();
        if partial <= 0.5 {
            return (1.0 - partial).max(0.0);
        }
        let mut acc = 0.0;
        let mut n = k;
        loop {
            let term = self.pmf(n);
            acc += term;
            if f64::from(n) > self.mean && term <= acc * 1e-18 {
                break;
            }
            n += 1;
            if n > k + 100_000 {
                break;
            }
        }
        acc
    }
}

/// Row-stochastic matrix over the ordered augmented states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    dim: usize,
    data: Vec<f64>,
    claim_mean: f64,
    p0: f64,
}

impl TransitionMatrix {
    /// Wraps an explicit row-major matrix, mainly for tests and small
    /// hand-built chains.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::config(
                    "matrix",
                    format!("row {i} has {} entries, expected {dim}", row.len()),
                ));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Numeric(format!("row {i} has an invalid probability")));
            }
            data.extend_from_slice(row);
        }
        Ok(TransitionMatrix {
            dim,
            data,
            claim_mean: f64::NAN,
            p0: f64::NAN,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.dim + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.dim..(from + 1) * self.dim]
    }

    /// Claim mean the matrix was built for (NaN for hand-built matrices).
    pub fn claim_mean(&self) -> f64 {
        self.claim_mean
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.dim)
            .map(|i| libm::fabs(self.row(i).iter().sum::<f64>() - 1.0))
            .fold(0.0, f64::max)
    }

    /// `x P` for a row vector `x`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.row(i)) {
                *o += xi * p;
            }
        }
        out
    }
}

/// Builds `P` for a rule and a claim-count law.
///
/// Claim counts that push the level to `z` or beyond are pooled into the
/// `(z)_pen` column as a single tail probability.
pub fn build_matrix(space: &StateSpace, dist: &ClaimCountDistribution) -> Result<TransitionMatrix> {
    let rule = space.rule();
    let dim = space.len();
    let z = rule.max_level();
    let h = rule.jump();
    let top = space.top_index();
    let pmf_len = z / h + 2;
    let pmf: Vec<f64> = (0..pmf_len).map(|n| dist.pmf(n)).collect();
    if let Some(n) = pmf.iter().position(|p| !p.is_finite()) {
        return Err(Error::Numeric(format!(
            "P(N = {n}) is not finite at mean {}",
            dist.mean()
        )));
    }

    let mut data = vec![0.0; dim * dim];
    for (i, &state) in space.states().iter().enumerate() {
        let row = &mut data[i * dim..(i + 1) * dim];
        let stay = space.index_of(rule.step(state, 0)).expect("closed");
        row[stay] += pmf[0];
        let mut n = 1u32;
        while state.level + h * n < z {
            let j = space.index_of(rule.step(state, n)).expect("closed");
            row[j] += pmf[n as usize];
            n += 1;
        }
        let tail = dist.tail(n);
        if !tail.is_finite() {
            return Err(Error::Numeric(format!(
                "P(N >= {n}) is not finite at mean {}",
                dist.mean()
            )));
        }
        row[top] += tail;
    }
    Ok(TransitionMatrix {
        dim,
        data,
        claim_mean: dist.mean(),
        p0: pmf[0],
    })
}

/// Stationary probabilities indexed like the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryVector {
    probs: Vec<f64>,
}

impl StationaryVector {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// `max |pi - pi P|`.
    pub fn residual(&self, matrix: &TransitionMatrix) -> f64 {
        matrix
            .left_multiply(&self.probs)
            .iter()
            .zip(&self.probs)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

fn degenerate(matrix: &TransitionMatrix, message: impl Into<String>) -> Error {
    Error::Degenerate {
        mean: matrix.claim_mean,
        p0: matrix.p0,
        message: message.into(),
    }
}

/// Solves `pi = pi P`, `pi e = 1` by LU with the last balance equation
/// replaced by the normalisation.
pub fn stationary(matrix: &TransitionMatrix) -> Result<StationaryVector> {
    let n = matrix.dim;
    if n == 0 {
        return Err(degenerate(matrix, "empty state space"));
    }
    let mut a = DMatrix::<f64>::from_fn(n, n, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        matrix.get(c, r) - delta
    });
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solution = a
        .lu()
        .solve(&b)
        .ok_or_else(|| degenerate(matrix, "singular balance system"))?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(degenerate(matrix, "non-finite stationary probability"));
    }
    // Round-off can leave entries at -1e-18 or so.
    let mut probs: Vec<f64> = solution.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(degenerate(matrix, "stationary vector has no mass"));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(StationaryVector { probs })
}

/// Outcome of [`power_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub vector: StationaryVector,
    pub iterations: usize,
    /// Max-norm change in the final iteration.
    pub last_change: f64,
}

/// Iterates `x <- x P` from the uniform vector until the max-norm change
/// drops below `tolerance` or `max_iterations` is reached. Useful as a
/// convergence diagnostic.
pub fn power_iteration(matrix: &TransitionMatrix, max_iterations: usize, tolerance: f64) -> PowerIteration {
    let n = matrix.dim;
    let mut x = vec![1.0 / n as f64; n];
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        let next = matrix.left_multiply(&x);
        last_change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max);
        x = next;
        iterations += 1;
        if last_change < tolerance {
            break;
        }
    }
    PowerIteration {
        vector: StationaryVector { probs: x },
        iterations,
        last_change,
    }
}
