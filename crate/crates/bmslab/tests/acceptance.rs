//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so that every criterion is evaluated and printed
//! even when an earlier one fails. The process exits with status 0 unless
//! `BMSLAB_ACCEPTANCE_STRICT=1` is set, in which case any FAIL makes it
//! exit with status 1.

use std::process::Command;
use std::time::Instant;

use bmslab::compute::{mixed_stationary, simulate};
use bmslab::config::{preset, ConfigDocument, Overrides};
use bmslab::golden::TableId;
use bmslab::reproduce::Reproduction;
use bmslab_core::classical::classical_relativities;
use bmslab_core::markov::{build_matrix, stationary};
use bmslab_core::simulator::empirical_hmse;
use bmslab_core::{
    BivariateEffect, BmsRule, ClaimCountDistribution, Integration, LognormalEffect, MixingModel, Portfolio,
    RiskClass, SolveTolerances, StateSpace,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn tolerances() -> SolveTolerances {
    SolveTolerances::default()
}

/// Cell and HMSE comparison of reference tables.
fn tables(ids: &[TableId]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &id in ids {
        let r = match Reproduction::run(id, None) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{id}: {e}")),
        };
        pass &= r.passed();
        let mut worst = Vec::new();
        for c in &r.cells {
            if !c.relativity_pass() {
                worst.push(format!(
                    "relativity l={} pen={} {} vs {}",
                    c.level,
                    c.pen,
                    c.relativity.map_or("NA".into(), |v| format!("{v:.4}")),
                    c.golden_relativity.text
                ));
            }
            if !c.prob_pass() {
                worst.push(format!(
                    "prob l={} pen={} {:.4} vs {}",
                    c.level, c.pen, c.stationary_prob, c.golden_prob.text
                ));
            }
        }
        for h in &r.hmse {
            if h.pass() == Some(false) {
                let tol = h.tolerance.expect("exact tables carry a tolerance");
                worst.push(format!(
                    "hmse pen={} {:.6} vs {} (deviation {:.2e}, {tol})",
                    h.pen,
                    h.computed,
                    h.golden.text,
                    tol.deviation(h.computed, h.golden.value)
                ));
            }
        }
        let cells = r.cells.len() * 2;
        parts.push(format!(
            "{id}: {}/{cells} cells, {}/{} hmse{}",
            cells - r.cell_failures(),
            r.hmse.len() - r.hmse_failures(),
            r.hmse.len(),
            if worst.is_empty() {
                String::new()
            } else {
                format!(" [{}]", worst.join("; "))
            }
        ));
    }
    outcome(pass, parts.join(" | "))
}

fn criterion_1() -> Outcome {
    tables(&[TableId::T1a])
}

fn criterion_2() -> Outcome {
    tables(&[TableId::T1b, TableId::T1c])
}

fn criterion_3() -> Outcome {
    tables(&[TableId::T2a, TableId::T2b, TableId::T2c])
}

fn criterion_4() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_bmslab"))
        .args(["trace", "--z", "20", "--h", "2", "--pen", "2", "--l0", "10"])
        .args(["--claims", "0,0,2,1,0,0,0,0,1"])
        .output()
        .expect("binary runs");
    let expected = "\
t,0,1,2,3,4,5,6,7,8,9
N_{t+1},0,0,2,1,0,0,0,0,1,
L_t,10,9,8,12,14,14,14,13,12,14
pen*_t,0,1,2,2,2,2,2,2,2,2
L*_t,(10)_0,(9)_0,(8)_0,(12)_2,(14)_2,(14)_1,(14)_0,(13)_0,(12)_0,(14)_2
";
    let stdout = String::from_utf8_lossy(&out.stdout);
    let pass = out.status.success() && stdout == expected;
    outcome(
        pass,
        if pass {
            "L_t, pen*_t and L*_t rows identical".to_string()
        } else {
            format!("got {stdout:?} (status {})", out.status)
        },
    )
}

fn criterion_5() -> Outcome {
    // 'x' marks a positive entry of the -1/+2/1 matrix with z = 7
    const PATTERN: [&str; 14] = [
        "x..x...x...x.x",
        "x....x...x...x",
        ".x.....x...x.x",
        "..x....x...x.x",
        "..x......x...x",
        "....x....x...x",
        "....x......x.x",
        "......x....x.x",
        "......x......x",
        "........x....x",
        "........x....x",
        "..........x..x",
        "..........x..x",
        "............xx",
    ];
    let space = StateSpace::new(BmsRule::new(7, 2, 1, 0).unwrap());
    if space.len() != 14 {
        return outcome(false, format!("{} states", space.len()));
    }
    let mut mismatches = Vec::new();
    for mean in [0.05, 0.5, 3.0] {
        let p = build_matrix(&space, &ClaimCountDistribution::poisson(mean).unwrap()).unwrap();
        for (i, row) in PATTERN.iter().enumerate() {
            for (j, c) in row.chars().enumerate() {
                if (c == 'x') != (p.get(i, j) > 0.0) {
                    mismatches.push(format!("({i},{j}) at mean {mean}"));
                }
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "14 states, nonzero pattern identical".to_string()
        } else {
            mismatches.join(", ")
        },
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let z = rng.random_range(2..=15u32);
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
        let classes = (0..rng.random_range(1..=4))
            .map(|i| {
                RiskClass::new(
                    format!("c{i}"),
                    rng.random_range(0.01..1.5),
                    rng.random_range(0.1..1.0),
                )
                .with_severity(rng.random_range(1.0..5000.0))
            })
            .collect();
        let portfolio = Portfolio::new(classes).unwrap();
        let grid = model.grid(64).unwrap();
        let rule = BmsRule::new(z, h, 0, 0).unwrap();
        let prop = mixed_stationary(rule, &portfolio, &model, &grid, tolerances())
            .unwrap()
            .relativity_table();
        let closed = classical_relativities(z, h, &portfolio, &model, &grid).unwrap();
        for (a, b) in prop.relativities.iter().zip(&closed.relativities) {
            let (a, b) = (a.unwrap(), b.unwrap());
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    outcome(
        worst <= 1e-12,
        format!("20 configurations, max deviation {worst:.2e} (bound 1e-12)"),
    )
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["example3", "example4"] {
        for pen in 0..=3 {
            let mut doc = ConfigDocument::parse(preset(name).unwrap()).unwrap();
            doc.apply(&Overrides {
                h: Some(1),
                pen: Some(pen),
                ..Overrides::default()
            });
            let run = doc.validate().unwrap();
            assert_eq!(run.simulation.policyholders, 100_000);
            let ms = mixed_stationary(run.rule, &run.portfolio, &run.model, &run.grid, tolerances()).unwrap();
            let zeta = ms.relativity_table().values_or(0.0);
            let analytic = ms.hmse(&zeta).unwrap();
            let report = match simulate(&run.simulation, &run.portfolio, &run.model) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("{name} pen {pen}: {e}")),
            };
            let cells = report.compare_levels(ms.level_probs(), 4.0);
            let max_z = cells.iter().map(|c| c.z_score()).fold(0.0, f64::max);
            let est = empirical_hmse(&report, &zeta).unwrap();
            let hmse_z = (est.mean - analytic).abs() / est.standard_error;
            let ok = cells.iter().all(|c| c.pass) && hmse_z <= 3.0;
            pass &= ok;
            parts.push(format!(
                "{name} pen {pen}: max cell z {max_z:.2}, hmse z {hmse_z:.2}"
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let mut worst_row: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for (z, h, pen) in [(9, 1, 0), (9, 2, 3), (14, 1, 3), (20, 2, 2), (30, 3, 4)] {
        let space = StateSpace::new(BmsRule::new(z, h, pen, 0).unwrap());
        for mean in [1e-3, 0.05, 0.3, 1.0, 5.0] {
            let p = build_matrix(&space, &ClaimCountDistribution::poisson(mean).unwrap()).unwrap();
            worst_row = worst_row.max(p.max_row_sum_error());
            worst_residual = worst_residual.max(stationary(&p).unwrap().residual(&p));
        }
    }
    let mut worst_mean: f64 = 0.0;
    let mut worst_square: f64 = 0.0;
    for sigma2 in [0.1, 0.29, 0.99, 1.5] {
        let effect = LognormalEffect::new(sigma2).unwrap();
        let grid = effect.grid(200).unwrap();
        worst_mean = worst_mean.max((grid.moment(1) - 1.0).abs());
        worst_square = worst_square.max((grid.moment(2) - sigma2.exp()).abs());
    }
    let effect = BivariateEffect::new(0.99, 0.29, -0.45).unwrap();
    let model = MixingModel::frequency_severity(0.99, 0.29, -0.45).unwrap();
    let mut cross_error: f64 = 0.0;
    for model in [
        model,
        model.with_integration(Integration::Tensor { inner_nodes: 64 }),
    ] {
        let nodes = model.nodes(&model.grid(200).unwrap()).unwrap();
        let cross: f64 = nodes.iter().map(|n| n.weight * n.target).sum();
        cross_error = cross_error.max((cross - effect.cross_moment()).abs());
    }

    let model = MixingModel::frequency(0.99).unwrap();
    let grid = model.grid(200).unwrap();
    let mut worst_balance: f64 = 0.0;
    for pen in 0..=3 {
        let t = mixed_stationary(
            BmsRule::new(9, 1, pen, 0).unwrap(),
            &Portfolio::single(0.05, None).unwrap(),
            &model,
            &grid,
            tolerances(),
        )
        .unwrap()
        .relativity_table();
        worst_balance = worst_balance.max((t.balance() - 1.0).abs());
    }
    let pass = worst_row <= 1e-12
        && worst_residual <= 1e-10
        && worst_mean <= 1e-8
        && worst_square <= 1e-6
        && cross_error <= 1e-6
        && worst_balance <= 1e-8;
    outcome(
        pass,
        format!(
            "row sums {worst_row:.1e}, residual {worst_residual:.1e}, E[theta] {worst_mean:.1e}, \
             E[theta^2] {worst_square:.1e}, E[theta1 theta2] {cross_error:.1e}, balance {worst_balance:.1e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for case in 0..10 {
        let z = rng.random_range(3..=14u32);
        let h = rng.random_range(1..=2u32);
        let pen = rng.random_range(0..=3u32);
        let model = if case % 2 == 0 {
            MixingModel::frequency(rng.random_range(0.3..1.2)).unwrap()
        } else {
            MixingModel::frequency_severity(0.99, 0.29, rng.random_range(-0.7..0.7)).unwrap()
        };
        let classes = (0..rng.random_range(1..=3))
            .map(|i| {
                RiskClass::new(
                    format!("c{i}"),
                    rng.random_range(0.02..1.0),
                    rng.random_range(0.2..1.0),
                )
                .with_severity(rng.random_range(1.0..50.0))
            })
            .collect();
        let portfolio = Portfolio::new(classes).unwrap();
        let ms = mixed_stationary(
            BmsRule::new(z, h, pen, 0).unwrap(),
            &portfolio,
            &model,
            &model.grid(64).unwrap(),
            tolerances(),
        )
        .unwrap();
        let best = ms.relativity_table().values_or(0.0);
        let floor = ms.hmse(&best).unwrap();
        for _ in 0..100 {
            let trial: Vec<f64> = best.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
            let gap = ms.hmse(&trial).unwrap() - floor;
            tightest = tightest.min(gap);
            if gap < -1e-12 {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("1000 perturbations, {violations} improved the optimum, smallest increase {tightest:.2e}"),
    )
}

fn criterion_10() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for id in [TableId::T7a, TableId::T7b] {
        let r = match Reproduction::run(id, None) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{id}: {e}")),
        };
        for (i, q) in r.qualitative.iter().enumerate() {
            pass &= q.pass;
            let tag = ["i", "ii", "iii", "iv"][i];
            parts.push(format!(
                "{id}/{} ({tag}) {}{}",
                partner_of(id),
                if q.pass { "PASS" } else { "FAIL" },
                if q.pass {
                    String::new()
                } else {
                    format!(": {}", q.detail)
                }
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn partner_of(id: TableId) -> TableId {
    bmslab::reproduce::partner(id).expect("data tables come in pairs")
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("table 1a reproduction", criterion_1),
        ("tables 1b and 1c reproduction", criterion_2),
        ("tables 2a-2c reproduction", criterion_3),
        ("worked trace", criterion_4),
        ("14-state matrix structure", criterion_5),
        ("pen=0 closed-form consistency", criterion_6),
        ("Monte-Carlo cross-check", criterion_7),
        ("structural invariants", criterion_8),
        ("optimality under perturbation", criterion_9),
        ("data tables, qualitative properties", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let n = i + 1;
        println!(
            "{} criterion {n:>2} {name} ({:.1} s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(n.to_string());
        }
    }
    println!(
        "acceptance: {}/{} criteria PASS{}",
        criteria.len() - failed.len(),
        criteria.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; FAIL: {}", failed.join(", "))
        }
    );
    if !failed.is_empty() && std::env::var("BMSLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
