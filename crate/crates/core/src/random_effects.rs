//! Lognormal random effects, the Gaussian-copula bivariate effect and the
//! quadrature grids used for every mixing integral.
//!
//! All effects are parameterised on the standard-normal scale: a frequency
//! effect is `theta = exp(sigma * x - sigma^2 / 2)` with `x ~ N(0, 1)`, so
//! `E[theta] = 1`. With a Gaussian copula and lognormal marginals the pair
//! of log-effects is jointly normal with correlation `rho`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Default node count for mixing integrals. Integrands such as
/// `theta * pi_l(lambda * theta)` at high levels are far from polynomial
/// in `x`, so 64 nodes leave errors in the third decimal of the
/// relativities; 200 nodes bring them below 1e-4.
pub const DEFAULT_NODES: usize = 200;

const RESCALE: f64 = 1e100;

/// Mean-one lognormal effect with log-variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalEffect {
    sigma2: f64,
}

impl LognormalEffect {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::config("model.sigma2", "must be finite and positive"));
        }
        Ok(LognormalEffect { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.sigma2)
    }

    /// `theta` at standard-normal score `x`.
    pub fn at_score(&self, x: f64) -> f64 {
        libm::exp(self.sigma() * x - self.sigma2 / 2.0)
    }

    /// Standard-normal score of `theta`.
    pub fn score(&self, theta: f64) -> f64 {
        (libm::log(theta) + self.sigma2 / 2.0) / self.sigma()
    }

    /// `E[theta^k] = exp(k (k - 1) sigma^2 / 2)`.
    pub fn moment(&self, k: i32) -> f64 {
        let k = f64::from(k);
        libm::exp(k * (k - 1.0) * self.sigma2 / 2.0)
    }

    /// Gauss-Hermite grid with `nodes` points.
    pub fn grid(&self, nodes: usize) -> Result<QuadratureGrid> {
        QuadratureGrid::for_effect(self, nodes)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x: f64 = StandardNormal.sample(rng);
        self.at_score(x)
    }
}

/// `(Theta1, Theta2)` with mean-one lognormal marginals joined by a
/// Gaussian copula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateEffect {
    frequency: LognormalEffect,
    severity: LognormalEffect,
    rho: f64,
}

impl BivariateEffect {
    pub fn new(sigma1_2: f64, sigma2_2: f64, rho: f64) -> Result<Self> {
        let frequency = LognormalEffect::new(sigma1_2)
            .map_err(|_| Error::config("model.sigma1_2", "must be finite and positive"))?;
        let severity = LognormalEffect::new(sigma2_2)
            .map_err(|_| Error::config("model.sigma2_2", "must be finite and positive"))?;
        if !(rho.is_finite() && rho > -1.0 && rho < 1.0) {
            return Err(Error::config("model.rho", "must lie strictly inside (-1, 1)"));
        }
        Ok(BivariateEffect {
            frequency,
            severity,
            rho,
        })
    }

    pub fn frequency(&self) -> LognormalEffect {
        self.frequency
    }

    pub fn severity(&self) -> LognormalEffect {
        self.severity
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `E[Theta2 | Theta1]` as a function of the frequency score `x`.
    pub fn conditional_severity_mean_at_score(&self, x: f64) -> f64 {
        let s2 = self.severity.sigma();
        libm::exp(self.rho * s2 * x - self.rho * self.rho * self.severity.sigma2 / 2.0)
    }

    /// `E[Theta2^2 | Theta1]` as a function of the frequency score `x`.
    pub fn conditional_severity_second_moment_at_score(&self, x: f64) -> f64 {
        let s2 = self.severity.sigma();
        let v = self.severity.sigma2;
        libm::exp(2.0 * self.rho * s2 * x + v * (1.0 - 2.0 * self.rho * self.rho))
    }

    /// `E[Theta2 | Theta1 = theta1]`.
    pub fn conditional_severity_mean(&self, theta1: f64) -> f64 {
        self.conditional_severity_mean_at_score(self.frequency.score(theta1))
    }

    /// `E[Theta1 Theta2] = exp(rho sigma1 sigma2)`.
    pub fn cross_moment(&self) -> f64 {
        libm::exp(self.rho * self.frequency.sigma() * self.severity.sigma())
    }

    /// `(theta1, theta2)` from independent standard-normal scores.
    pub fn at_scores(&self, x: f64, u: f64) -> (f64, f64) {
        let y = self.rho * x + libm::sqrt(1.0 - self.rho * self.rho) * u;
        (self.frequency.at_score(x), self.severity.at_score(y))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let x: f64 = StandardNormal.sample(rng);
        let u: f64 = StandardNormal.sample(rng);
        self.at_scores(x, u)
    }
}

/// `count` seeded draws of a frequency effect.
pub fn sample_lognormal(effect: &LognormalEffect, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| effect.sample(&mut rng)).collect()
}

/// `count` seeded draws of a bivariate effect.
pub fn sample_bivariate(effect: &BivariateEffect, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| effect.sample(&mut rng)).collect()
}

/// Probabilists' Gauss-Hermite rule: nodes and weights for
/// `E[f(X)]`, `X ~ N(0, 1)`, ascending nodes, weights summing to one.
///
/// Starting nodes are the eigenvalues of the Jacobi matrix; each is then
/// polished by Newton iteration on the orthonormal Hermite recurrence and
/// its weight taken from the same recurrence, which keeps full relative
/// accuracy in the tiny outer weights.
pub fn gauss_hermite(nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if nodes == 0 {
        return Err(Error::Accuracy {
            nodes,
            message: "a rule needs at least one node".into(),
        });
    }
    let n = nodes;
    // Physicists' Jacobi matrix: zero diagonal, off-diagonal sqrt(k / 2).
    let jacobi = DMatrix::<f64>::from_fn(n, n, |r, c| {
        if r + 1 == c || c + 1 == r {
            libm::sqrt(r.max(c) as f64 / 2.0)
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));

    let mut x = Vec::with_capacity(n);
    let mut log_w = Vec::with_capacity(n);
    for (i, &guess) in guesses.iter().enumerate() {
        let mut root = guess;
        let mut converged = false;
        let mut eval = hermite_at(n, root);
        for _ in 0..50 {
            let step = eval.value / eval.derivative;
            root -= step;
            eval = hermite_at(n, root);
            if libm::fabs(step) <= 1e-15 * libm::fabs(root).max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !root.is_finite() || libm::fabs(root - guess) > 1e-6 * libm::fabs(guess).max(1.0) {
            return Err(Error::Accuracy {
                nodes,
                message: format!("Newton polish of node {i} did not converge"),
            });
        }
        x.push(root);
        log_w.push(core::f64::consts::LN_2 - 2.0 * eval.log_abs_derivative);
    }

    // Physicists' rule -> probabilists' rule, symmetrised.
    let mut nodes_std = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let norm = 0.5 * libm::log(PI);
    for i in 0..n {
        let j = n - 1 - i;
        nodes_std[i] = (x[i] - x[j]) / 2.0 * core::f64::consts::SQRT_2;
        weights[i] = libm::exp((log_w[i] + log_w[j]) / 2.0 - norm);
    }
    let total: f64 = weights.iter().sum();
    if libm::fabs(total - 1.0) > 1e-10 {
        return Err(Error::Accuracy {
            nodes,
            message: format!("raw weights sum to {total}"),
        });
    }
    for v in &mut weights {
        *v /= total;
    }
    Ok((nodes_std, weights))
}

struct HermiteEval {
    value: f64,
    derivative: f64,
    log_abs_derivative: f64,
}

/// Orthonormal Hermite polynomial of degree `n` and its derivative at `x`.
/// Ratios are exact; the common scale factor is only tracked in the log
/// of the derivative, because the unweighted values overflow for the
/// outer nodes of large rules.
fn hermite_at(n: usize, x: f64) -> HermiteEval {
    let mut p1 = libm::pow(PI, -0.25);
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * libm::sqrt(2.0 / (jf + 1.0)) * p2 - libm::sqrt(jf / (jf + 1.0)) * p3;
        if libm::fabs(p1) > RESCALE {
            p1 /= RESCALE;
            p2 /= RESCALE;
            log_scale += libm::log(RESCALE);
        }
    }
    let derivative = libm::sqrt(2.0 * n as f64) * p2;
    HermiteEval {
        value: p1,
        derivative,
        log_abs_derivative: libm::log(libm::fabs(derivative)) + log_scale,
    }
}

/// Discretisation of a frequency effect.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    scores: Vec<f64>,
    thetas: Vec<f64>,
    weights: Vec<f64>,
    point_mass: bool,
}

impl QuadratureGrid {
    /// Gauss-Hermite grid for `effect`, checked against `E[theta] = 1`.
    pub fn for_effect(effect: &LognormalEffect, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::Accuracy {
                nodes,
                message: "at least two nodes are required".into(),
            });
        }
        let (scores, weights) = gauss_hermite(nodes)?;
        let thetas: Vec<f64> = scores.iter().map(|&x| effect.at_score(x)).collect();
        let grid = QuadratureGrid {
            scores,
            thetas,
            weights,
            point_mass: false,
        };
        let mean = grid.moment(1);
        if libm::fabs(mean - 1.0) > 1e-8 {
            return Err(Error::Accuracy {
                nodes,
                message: format!("E[theta] is {mean}, expected 1 within 1e-8"),
            });
        }
        Ok(grid)
    }

    /// Degenerate effect `theta = 1`: no unobserved heterogeneity.
    pub fn point_mass() -> Self {
        QuadratureGrid {
            scores: alloc::vec![0.0],
            thetas: alloc::vec![1.0],
            weights: alloc::vec![1.0],
            point_mass: true,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        self.point_mass
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Standard-normal scores behind each node.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// `sum_j w_j theta_j^k`.
    pub fn moment(&self, k: i32) -> f64 {
        self.thetas
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * libm::pow(*t, f64::from(k)))
            .sum()
    }

    /// `sum_j w_j f(theta_j)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.thetas
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(*t))
            .sum()
    }
}
