use approx::assert_abs_diff_eq;
use bmslab_core::classical::classical_matrix;
use bmslab_core::markov::{build_matrix, power_iteration, stationary};
use bmslab_core::{AugmentedState, BmsRule, ClaimCountDistribution, StateSpace};

// Rows of the -1/+2/1 matrix with z = 7 written with symbols:
// "pN" is P(N = N), "tN" is P(N >= N) and "." is an exact zero.
const EXAMPLE: [[&str; 14]; 14] = [
    [
        "p0", ".", ".", "p1", ".", ".", ".", "p2", ".", ".", ".", "p3", ".", "t4",
    ],
    [
        "p0", ".", ".", ".", ".", "p1", ".", ".", ".", "p2", ".", ".", ".", "t3",
    ],
    [
        ".", "p0", ".", ".", ".", ".", ".", "p1", ".", ".", ".", "p2", ".", "t3",
    ],
    [
        ".", ".", "p0", ".", ".", ".", ".", "p1", ".", ".", ".", "p2", ".", "t3",
    ],
    [
        ".", ".", "p0", ".", ".", ".", ".", ".", ".", "p1", ".", ".", ".", "t2",
    ],
    [
        ".", ".", ".", ".", "p0", ".", ".", ".", ".", "p1", ".", ".", ".", "t2",
    ],
    [
        ".", ".", ".", ".", "p0", ".", ".", ".", ".", ".", ".", "p1", ".", "t2",
    ],
    [
        ".", ".", ".", ".", ".", ".", "p0", ".", ".", ".", ".", "p1", ".", "t2",
    ],
    [
        ".", ".", ".", ".", ".", ".", "p0", ".", ".", ".", ".", ".", ".", "t1",
    ],
    [
        ".", ".", ".", ".", ".", ".", ".", ".", "p0", ".", ".", ".", ".", "t1",
    ],
    [
        ".", ".", ".", ".", ".", ".", ".", ".", "p0", ".", ".", ".", ".", "t1",
    ],
    [
        ".", ".", ".", ".", ".", ".", ".", ".", ".", ".", "p0", ".", ".", "t1",
    ],
    [
        ".", ".", ".", ".", ".", ".", ".", ".", ".", ".", "p0", ".", ".", "t1",
    ],
    [
        ".", ".", ".", ".", ".", ".", ".", ".", ".", ".", ".", ".", "p0", "t1",
    ],
];

fn symbol(s: &str, dist: &ClaimCountDistribution) -> f64 {
    let n: u32 = s[1..].parse().unwrap();
    // the tail is summed independently of the engine's own tail
    match &s[..1] {
        "p" => dist.pmf(n),
        "t" => 1.0 - (0..n).map(|k| dist.pmf(k)).sum::<f64>(),
        _ => unreachable!(),
    }
}

#[test]
fn fourteen_state_example_matches_symbolic_matrix() {
    let rule = BmsRule::new(7, 2, 1, 0).unwrap();
    let space = StateSpace::new(rule);
    assert_eq!(space.len(), 14);
    let labels: Vec<String> = space.states().iter().map(|s| s.to_string()).collect();
    assert_eq!(
        labels,
        [
            "(0)_0", "(1)_0", "(2)_0", "(2)_1", "(3)_0", "(3)_1", "(4)_0", "(4)_1", "(5)_0", "(5)_1",
            "(6)_0", "(6)_1", "(7)_0", "(7)_1"
        ]
    );
    for mean in [0.01, 0.1, 0.7, 2.5] {
        let dist = ClaimCountDistribution::poisson(mean).unwrap();
        let p = build_matrix(&space, &dist).unwrap();
        for (i, row) in EXAMPLE.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if *cell == "." {
                    assert_eq!(p.get(i, j), 0.0, "({i},{j}) mean {mean}");
                } else {
                    assert!(p.get(i, j) > 0.0, "({i},{j}) mean {mean}");
                    assert_abs_diff_eq!(p.get(i, j), symbol(cell, &dist), epsilon = 1e-15);
                }
            }
        }
    }
}

#[test]
fn state_counts_follow_formula() {
    for z in 1..=20 {
        for h in 1..=z {
            for pen in 0..=4 {
                let space = StateSpace::new(BmsRule::new(z, h, pen, 0).unwrap());
                assert_eq!(space.len() as u32, h + (z - h + 1) * (pen + 1));
            }
        }
    }
}

#[test]
fn rows_stochastic_and_fixed_points() {
    for (z, h, pen) in [(9, 1, 0), (9, 2, 3), (14, 1, 3), (20, 2, 2), (25, 5, 4)] {
        let space = StateSpace::new(BmsRule::new(z, h, pen, 0).unwrap());
        for mean in [1e-4, 0.05, 0.3, 1.0, 4.0, 12.0] {
            let p = build_matrix(&space, &ClaimCountDistribution::poisson(mean).unwrap()).unwrap();
            assert!(p.max_row_sum_error() <= 1e-12);
            let pi = stationary(&p).unwrap();
            assert!(pi.residual(&p) <= 1e-10, "z{z} h{h} pen{pen} mean {mean}");
            assert_abs_diff_eq!(pi.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn direct_solve_agrees_with_power_iteration() {
    for (z, h, pen, mean) in [(5, 1, 1, 0.4), (7, 2, 1, 0.2), (9, 3, 2, 0.8), (6, 2, 0, 1.5)] {
        let space = StateSpace::new(BmsRule::new(z, h, pen, 0).unwrap());
        let p = build_matrix(&space, &ClaimCountDistribution::poisson(mean).unwrap()).unwrap();
        let direct = stationary(&p).unwrap();
        let power = power_iteration(&p, 2_000_000, 1e-15);
        for (a, b) in direct.probs().iter().zip(power.vector.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }
}

#[test]
fn no_penalty_chain_is_the_classical_chain() {
    for (z, h) in [(9, 1), (9, 2), (14, 3), (5, 5)] {
        let space = StateSpace::new(BmsRule::new(z, h, 0, 0).unwrap());
        for mean in [0.05, 0.5, 2.0] {
            let dist = ClaimCountDistribution::poisson(mean).unwrap();
            let augmented = build_matrix(&space, &dist).unwrap();
            let classical = classical_matrix(z, h, mean).unwrap();
            for l in 0..=z as usize {
                assert_eq!(space.index_of(AugmentedState::new(l as u32, 0)), Some(l));
                for m in 0..=z as usize {
                    assert_abs_diff_eq!(augmented.get(l, m), classical.get(l, m), epsilon = 1e-15);
                }
            }
            let a = stationary(&augmented).unwrap();
            let c = stationary(&classical).unwrap();
            for (x, y) in a.probs().iter().zip(c.probs()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-13);
            }
        }
    }
}
