use approx::{assert_abs_diff_eq, assert_relative_eq};
use bmslab_core::classical::classical_relativities;
use bmslab_core::relativity::mixed_stationary;
use bmslab_core::{BmsRule, MixingModel, Portfolio, RiskClass};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Trapezoid rule against the standard normal density on [-12, 12].
fn normal_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let n = 24_000;
    let h = 24.0 / n as f64;
    (0..=n)
        .map(|i| {
            let x = -12.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(x) * (-0.5 * x * x).exp()
        })
        .sum::<f64>()
        * h
        / (2.0 * std::f64::consts::PI).sqrt()
}

// For z = 1, h = 1 the chain is small enough to solve by hand:
// pen = 0 gives P(L = 0) = p0, pen = 1 gives P(L = 0) = p0^2.
fn two_level_oracle(lambda: f64, sigma2: f64, pen: u32) -> (f64, f64, f64) {
    let s = sigma2.sqrt();
    let theta = |x: f64| (s * x - sigma2 / 2.0).exp();
    let bottom = |x: f64| (-lambda * theta(x)).exp().powi(pen as i32 + 1);
    let p0 = normal_expectation(bottom);
    let zeta0 = normal_expectation(|x| theta(x) * bottom(x)) / p0;
    let zeta1 = normal_expectation(|x| theta(x) * (1.0 - bottom(x))) / (1.0 - p0);
    (p0, zeta0, zeta1)
}

#[test]
fn two_level_system_matches_hand_solution() {
    for pen in [0, 1] {
        for (lambda, sigma2) in [(0.05, 0.99), (0.6, 0.3), (2.0, 1.5)] {
            let model = MixingModel::frequency(sigma2).unwrap();
            let grid = model.grid(200).unwrap();
            let rule = BmsRule::new(1, 1, pen, 0).unwrap();
            let table = mixed_stationary(rule, &Portfolio::single(lambda, None).unwrap(), &model, &grid)
                .unwrap()
                .relativity_table();
            let (p0, z0, z1) = two_level_oracle(lambda, sigma2, pen);
            assert_abs_diff_eq!(table.level_probs[0], p0, epsilon = 1e-9);
            assert_relative_eq!(table.relativities[0].unwrap(), z0, max_relative = 1e-8);
            assert_relative_eq!(table.relativities[1].unwrap(), z1, max_relative = 1e-8);
        }
    }
}

#[test]
fn two_level_frequency_severity_matches_double_integral() {
    let (s1, s2, rho) = (0.99f64, 0.29f64, -0.45f64);
    let (a, b) = (s1.sqrt(), s2.sqrt());
    let lambda = 0.4;
    let model = MixingModel::frequency_severity(s1, s2, rho).unwrap();
    let grid = model.grid(200).unwrap();
    let rule = BmsRule::new(1, 1, 1, 0).unwrap();
    let table = mixed_stationary(
        rule,
        &Portfolio::single(lambda, Some(3.0)).unwrap(),
        &model,
        &grid,
    )
    .unwrap()
    .relativity_table();

    // E[Theta1 Theta2 q(Theta1)] with y = rho x + sqrt(1 - rho^2) u
    let theta1 = |x: f64| (a * x - s1 / 2.0).exp();
    let q = |x: f64| (-lambda * theta1(x)).exp().powi(2);
    let c = (1.0 - rho * rho).sqrt();
    let both = |x: f64| {
        normal_expectation(|u| {
            let y = rho * x + c * u;
            theta1(x) * (b * y - s2 / 2.0).exp()
        })
    };
    let p0 = normal_expectation(q);
    let zeta0 = normal_expectation(|x| both(x) * q(x)) / p0;
    assert_relative_eq!(table.relativities[0].unwrap(), zeta0, max_relative = 1e-7);
}

#[test]
fn flat_relativities_give_the_variance() {
    let (lambda, sigma2) = (0.05, 0.99);
    let model = MixingModel::frequency(sigma2).unwrap();
    let grid = model.grid(200).unwrap();
    for pen in 0..=3 {
        let ms = mixed_stationary(
            BmsRule::new(9, 1, pen, 0).unwrap(),
            &Portfolio::single(lambda, None).unwrap(),
            &model,
            &grid,
        )
        .unwrap();
        let expected = lambda * lambda * (sigma2.exp() - 1.0);
        assert_relative_eq!(ms.hmse(&[1.0; 10]).unwrap(), expected, max_relative = 1e-8);
    }

    let (s1, s2, rho) = (0.99f64, 0.29f64, -0.45f64);
    let (l1, l2) = (0.05, 8f64.exp());
    let model = MixingModel::frequency_severity(s1, s2, rho).unwrap();
    let grid = model.grid(200).unwrap();
    let ms = mixed_stationary(
        BmsRule::new(9, 2, 1, 0).unwrap(),
        &Portfolio::single(l1, Some(l2)).unwrap(),
        &model,
        &grid,
    )
    .unwrap();
    let cross = (rho * (s1 * s2).sqrt()).exp();
    let square = (s1 + s2 + 4.0 * rho * (s1 * s2).sqrt()).exp();
    let expected = (l1 * l2).powi(2) * (square - 2.0 * cross + 1.0);
    assert_relative_eq!(ms.hmse(&[1.0; 10]).unwrap(), expected, max_relative = 1e-8);
}

fn random_portfolio(rng: &mut ChaCha8Rng, severity: bool) -> Portfolio {
    let k = rng.random_range(1..=4);
    let classes = (0..k)
        .map(|i| {
            let c = RiskClass::new(
                format!("c{i}"),
                rng.random_range(0.01..1.5),
                rng.random_range(0.1..1.0),
            );
            if severity {
                c.with_severity(rng.random_range(1.0..5000.0))
            } else {
                c
            }
        })
        .collect();
    Portfolio::new(classes).unwrap()
}

#[test]
fn no_penalty_agrees_with_classical_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..20 {
        let z = rng.random_range(2..=15);
        let h = rng.random_range(1..=z.min(4));
        let severity = case % 2 == 1;
        let model = if severity {
            MixingModel::frequency_severity(
                rng.random_range(0.2..1.2),
                rng.random_range(0.1..0.6),
                rng.random_range(-0.8..0.8),
            )
            .unwrap()
        } else {
            MixingModel::frequency(rng.random_range(0.2..1.2)).unwrap()
        };
        let portfolio = random_portfolio(&mut rng, severity);
        let grid = model.grid(64).unwrap();
        let augmented = mixed_stationary(BmsRule::new(z, h, 0, 0).unwrap(), &portfolio, &model, &grid)
            .unwrap()
            .relativity_table();
        let classical = classical_relativities(z, h, &portfolio, &model, &grid).unwrap();
        for l in 0..=z as usize {
            let (a, c) = (
                augmented.relativities[l].unwrap(),
                classical.relativities[l].unwrap(),
            );
            assert!(
                (a - c).abs() <= 1e-12 * c.abs().max(1.0),
                "case {case} level {l}: {a} vs {c}"
            );
            assert!((augmented.level_probs[l] - classical.level_probs[l]).abs() <= 1e-12);
        }
    }
}

#[test]
fn optimum_is_not_improved_by_perturbation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..10 {
        let z = rng.random_range(3..=12);
        let h = rng.random_range(1..=2);
        let pen = rng.random_range(0..=3);
        let severity = case % 3 == 2;
        let model = if severity {
            MixingModel::frequency_severity(0.99, 0.29, -0.45).unwrap()
        } else {
            MixingModel::frequency(rng.random_range(0.3..1.2)).unwrap()
        };
        let portfolio = random_portfolio(&mut rng, severity);
        let ms = mixed_stationary(
            BmsRule::new(z, h, pen, 0).unwrap(),
            &portfolio,
            &model,
            &model.grid(64).unwrap(),
        )
        .unwrap();
        let table = ms.relativity_table();
        let best = table.values_or(0.0);
        let floor = ms.hmse(&best).unwrap();
        for _ in 0..100 {
            let trial: Vec<f64> = best.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
            assert!(ms.hmse(&trial).unwrap() >= floor - 1e-12 * floor.max(1.0));
        }
    }
}

#[test]
fn single_class_balance() {
    for pen in 0..=3 {
        let model = MixingModel::frequency(0.99).unwrap();
        let t = mixed_stationary(
            BmsRule::new(14, 2, pen, 0).unwrap(),
            &Portfolio::single(1.0, None).unwrap(),
            &model,
            &model.grid(200).unwrap(),
        )
        .unwrap()
        .relativity_table();
        assert_abs_diff_eq!(t.balance(), 1.0, epsilon = 1e-8);

        let model = MixingModel::frequency_severity(0.99, 0.29, -0.45).unwrap();
        let t = mixed_stationary(
            BmsRule::new(14, 2, pen, 0).unwrap(),
            &Portfolio::single(1.0, Some(2.0)).unwrap(),
            &model,
            &model.grid(200).unwrap(),
        )
        .unwrap()
        .relativity_table();
        assert_abs_diff_eq!(
            t.balance(),
            (-0.45 * (0.99f64 * 0.29).sqrt()).exp(),
            epsilon = 1e-8
        );
    }
}
