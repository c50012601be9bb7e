//! Recomputes the reference tables for `pen = 0..=3` and compares them
//! with the shipped values.

use bmslab_core::RelativityTable;

use crate::compute::mixed_stationary_for;
use crate::config::{preset, ConfigDocument, Overrides};
use crate::error::Result;
use crate::format::{fixed, significant, Format, Table};
use crate::golden::{GoldenTable, Printed, TableId};

/// Allowed deviation of a table cell from its 3-decimal reference value.
pub fn cell_tolerance(golden: f64, is_relativity: bool) -> f64 {
    if is_relativity && golden > 1.0 {
        (0.002 * golden).max(0.0015)
    } else {
        0.0015
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HmseTolerance {
    Absolute(f64),
    Relative(f64),
}

impl HmseTolerance {
    pub fn for_table(id: TableId) -> Option<Self> {
        match id {
            TableId::T1a | TableId::T1b => Some(HmseTolerance::Absolute(2e-5)),
            TableId::T1c => Some(HmseTolerance::Relative(0.002)),
            TableId::T2a | TableId::T2b | TableId::T2c => Some(HmseTolerance::Relative(0.001)),
            _ => None,
        }
    }

    /// Deviation in the unit of the tolerance.
    pub fn deviation(self, computed: f64, golden: f64) -> f64 {
        match self {
            HmseTolerance::Absolute(_) => (computed - golden).abs(),
            HmseTolerance::Relative(_) => (computed - golden).abs() / golden.abs(),
        }
    }

    pub fn bound(self) -> f64 {
        match self {
            HmseTolerance::Absolute(t) | HmseTolerance::Relative(t) => t,
        }
    }

    pub fn accepts(self, computed: f64, golden: f64) -> bool {
        self.deviation(computed, golden) <= self.bound()
    }
}

impl std::fmt::Display for HmseTolerance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HmseTolerance::Absolute(t) => write!(f, "abs {t:e}"),
            HmseTolerance::Relative(t) => write!(f, "rel {t:e}"),
        }
    }
}

/// Configuration behind a reference table, at `pen = 0`.
pub fn document_for(id: TableId) -> ConfigDocument {
    let name = match id {
        TableId::T1a | TableId::T1b | TableId::T1c => "example3",
        TableId::T2a | TableId::T2b | TableId::T2c => "example4",
        TableId::T7a | TableId::T7b => "lgpif_model1",
        TableId::T8a | TableId::T8b => "lgpif_model2",
    };
    let mut doc = ConfigDocument::parse(preset(name).expect("preset exists")).expect("preset parses");
    doc.rule.pen = 0;
    doc.rule.h = match id {
        TableId::T1b | TableId::T2b | TableId::T7b | TableId::T8b => 2,
        _ => 1,
    };
    if matches!(id, TableId::T1c | TableId::T2c) {
        doc.rule.z = 14;
        for class in doc.portfolio.classes.iter_mut().flatten() {
            class.lambda1 = 1.0;
        }
    }
    doc
}

/// The other model on the same rule: 7x pairs with 8x.
pub fn partner(id: TableId) -> Option<TableId> {
    match id {
        TableId::T7a => Some(TableId::T8a),
        TableId::T7b => Some(TableId::T8b),
        TableId::T8a => Some(TableId::T7a),
        TableId::T8b => Some(TableId::T7b),
        _ => None,
    }
}

/// Optimal relativity tables for `pen = 0..=3`.
pub fn compute_tables(id: TableId, nodes: Option<usize>) -> Result<Vec<RelativityTable>> {
    let base = document_for(id);
    let mut runs = Vec::new();
    for pen in 0..=3 {
        let mut doc = base.clone();
        doc.apply(&Overrides {
            pen: Some(pen),
            nodes,
            ..Overrides::default()
        });
        runs.push(doc.validate()?);
    }
    runs.iter()
        .map(|run| Ok(mixed_stationary_for(run)?.relativity_table()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDiff {
    pub level: u32,
    pub pen: u32,
    pub relativity: Option<f64>,
    pub golden_relativity: Printed,
    pub stationary_prob: f64,
    pub golden_prob: Printed,
}

impl CellDiff {
    pub fn relativity_diff(&self) -> Option<f64> {
        self.relativity.map(|r| (r - self.golden_relativity.value).abs())
    }

    pub fn prob_diff(&self) -> f64 {
        (self.stationary_prob - self.golden_prob.value).abs()
    }

    pub fn relativity_pass(&self) -> bool {
        self.relativity_diff()
            .is_some_and(|d| d <= cell_tolerance(self.golden_relativity.value, true))
    }

    pub fn prob_pass(&self) -> bool {
        self.prob_diff() <= cell_tolerance(self.golden_prob.value, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmseDiff {
    pub pen: u32,
    pub computed: f64,
    pub golden: Printed,
    pub tolerance: Option<HmseTolerance>,
}

impl HmseDiff {
    pub fn pass(&self) -> Option<bool> {
        self.tolerance
            .map(|t| t.accepts(self.computed, self.golden.value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualitativeCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub id: TableId,
    pub golden: GoldenTable,
    pub tables: Vec<RelativityTable>,
    pub cells: Vec<CellDiff>,
    pub hmse: Vec<HmseDiff>,
    /// Only for tables that cannot be matched cell by cell.
    pub qualitative: Vec<QualitativeCheck>,
}

impl Reproduction {
    pub fn run(id: TableId, nodes: Option<usize>) -> Result<Self> {
        let tables = compute_tables(id, nodes)?;
        let qualitative = match partner(id) {
            Some(other) => {
                let other_tables = compute_tables(other, nodes)?;
                let (model1, model2) = if matches!(id, TableId::T7a | TableId::T7b) {
                    (&tables, &other_tables)
                } else {
                    (&other_tables, &tables)
                };
                qualitative_checks(model1, model2)
            }
            None => Vec::new(),
        };
        Ok(Self::compare(id, tables, qualitative))
    }

    pub fn compare(id: TableId, tables: Vec<RelativityTable>, qualitative: Vec<QualitativeCheck>) -> Self {
        let golden = GoldenTable::load(id);
        let mut cells = Vec::new();
        let mut hmse = Vec::new();
        for (pen, table) in tables.iter().enumerate() {
            let pen = pen as u32;
            for level in 0..=golden.max_level() {
                let g = golden.cell(level, pen).expect("reference cell");
                cells.push(CellDiff {
                    level,
                    pen,
                    relativity: table.relativities.get(level as usize).copied().flatten(),
                    golden_relativity: g.relativity.clone(),
                    stationary_prob: table.level_probs.get(level as usize).copied().unwrap_or(f64::NAN),
                    golden_prob: g.stationary_prob.clone(),
                });
            }
            hmse.push(HmseDiff {
                pen,
                computed: table.hmse,
                golden: golden.hmse(pen).expect("reference hmse").clone(),
                tolerance: HmseTolerance::for_table(id),
            });
        }
        Reproduction {
            id,
            golden,
            tables,
            cells,
            hmse,
            qualitative,
        }
    }

    pub fn cell_failures(&self) -> usize {
        self.cells
            .iter()
            .map(|c| usize::from(!c.relativity_pass()) + usize::from(!c.prob_pass()))
            .sum()
    }

    pub fn hmse_failures(&self) -> usize {
        self.hmse.iter().filter(|h| h.pass() == Some(false)).count()
    }

    pub fn passed(&self) -> bool {
        if self.id.is_exact() {
            self.cell_failures() == 0 && self.hmse_failures() == 0
        } else {
            self.qualitative.iter().all(|q| q.pass)
        }
    }

    pub fn render(&self, format: Format) -> String {
        let exact = self.id.is_exact();
        let status = |pass: bool| {
            if !exact {
                "info"
            } else if pass {
                "PASS"
            } else {
                "FAIL"
            }
        };
        let mut t = Table::new([
            "level",
            "pen",
            "relativity",
            "reference",
            "abs_diff",
            "status",
            "stationary_prob",
            "reference_prob",
            "abs_diff_prob",
            "status_prob",
        ]);
        for c in &self.cells {
            t.push([
                c.level.to_string(),
                c.pen.to_string(),
                fixed(c.relativity, 6),
                c.golden_relativity.text.clone(),
                fixed(c.relativity_diff(), 6),
                status(c.relativity_pass()).to_string(),
                fixed(Some(c.stationary_prob), 6),
                c.golden_prob.text.clone(),
                fixed(Some(c.prob_diff()), 6),
                status(c.prob_pass()).to_string(),
            ]);
        }
        t.note("table", format!("{}: {}", self.id, self.golden.description));
        for h in &self.hmse {
            let verdict = match (h.tolerance, h.pass()) {
                (Some(tol), Some(pass)) => format!(
                    "deviation {:.3e} ({tol}) {}",
                    tol.deviation(h.computed, h.golden.value),
                    if pass { "PASS" } else { "FAIL" }
                ),
                _ => "info".to_string(),
            };
            t.note(
                format!("hmse pen={}", h.pen),
                format!("{} vs {} {verdict}", significant(h.computed), h.golden.text),
            );
        }
        for q in &self.qualitative {
            t.note(
                format!("check {}", q.name),
                format!("{} {}", if q.pass { "PASS" } else { "FAIL" }, q.detail),
            );
        }
        let summary = if exact {
            let cells = self.cells.len() * 2;
            format!(
                "{} ({}/{cells} cells, {}/{} hmse)",
                if self.passed() { "PASS" } else { "FAIL" },
                cells - self.cell_failures(),
                self.hmse.len() - self.hmse_failures(),
                self.hmse.len()
            )
        } else {
            format!(
                "{} ({}/{} qualitative checks; cells are informational)",
                if self.passed() { "PASS" } else { "FAIL" },
                self.qualitative.iter().filter(|q| q.pass).count(),
                self.qualitative.len()
            )
        };
        t.note("result", summary);
        t.render(format)
    }
}

fn spread(table: &RelativityTable) -> f64 {
    let values: Vec<f64> = table.relativities.iter().flatten().copied().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Pattern checks across `pen = 0..=3` for a frequency table series and a
/// frequency-severity table series on the same rule.
pub fn qualitative_checks(model1: &[RelativityTable], model2: &[RelativityTable]) -> Vec<QualitativeCheck> {
    const SLACK: f64 = 1e-12;
    let mut out = Vec::new();

    let mut bad = Vec::new();
    for (name, series) in [("frequency", model1), ("frequency_severity", model2)] {
        for pair in series.windows(2) {
            let pen = pair[1].rule.penalty();
            for (level, (a, b)) in pair[0].relativities.iter().zip(&pair[1].relativities).enumerate() {
                if let (Some(a), Some(b)) = (a, b) {
                    if *b > a + SLACK {
                        bad.push(format!("{name} level {level} pen {pen}: {b:.4} > {a:.4}"));
                    }
                }
            }
        }
    }
    out.push(QualitativeCheck {
        name: "relativity non-increasing in pen",
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            "every level, both models".to_string()
        } else {
            bad.join("; ")
        },
    });

    let mut bad = Vec::new();
    for (name, series) in [("frequency", model1), ("frequency_severity", model2)] {
        for pair in series.windows(2) {
            let pen = pair[1].rule.penalty();
            let (top0, top1) = (pair[0].level_probs.last(), pair[1].level_probs.last());
            if let (Some(a), Some(b)) = (top0, top1) {
                if *b + SLACK < *a {
                    bad.push(format!("{name} P(L=z) pen {pen}: {b:.4} < {a:.4}"));
                }
            }
            let (a, b) = (pair[0].level_probs[0], pair[1].level_probs[0]);
            if b > a + SLACK {
                bad.push(format!("{name} P(L=0) pen {pen}: {b:.4} > {a:.4}"));
            }
        }
    }
    out.push(QualitativeCheck {
        name: "top level mass up and bottom level mass down in pen",
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            "both models".to_string()
        } else {
            bad.join("; ")
        },
    });

    let spreads: Vec<(f64, f64)> = model1
        .iter()
        .zip(model2)
        .map(|(a, b)| (spread(a), spread(b)))
        .collect();
    out.push(QualitativeCheck {
        name: "frequency-severity relativities less spread",
        pass: spreads.iter().all(|(a, b)| b < a),
        detail: spreads
            .iter()
            .enumerate()
            .map(|(pen, (a, b))| format!("pen {pen}: {b:.4} vs {a:.4}"))
            .collect::<Vec<_>>()
            .join("; "),
    });

    let above: Vec<String> = model2
        .iter()
        .enumerate()
        .flat_map(|(pen, t)| {
            t.relativities
                .iter()
                .enumerate()
                .filter_map(move |(level, r)| match r {
                    Some(r) if *r >= 1.0 => Some(format!("pen {pen} level {level}: {r:.4}")),
                    _ => None,
                })
        })
        .collect();
    out.push(QualitativeCheck {
        name: "frequency-severity relativities below 1",
        pass: above.is_empty(),
        detail: if above.is_empty() {
            "every level and pen".to_string()
        } else {
            above.join("; ")
        },
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances() {
        assert_eq!(cell_tolerance(0.5, true), 0.0015);
        assert!((cell_tolerance(17.096, true) - 0.034192).abs() < 1e-12);
        assert_eq!(cell_tolerance(17.0, false), 0.0015);
        let t = HmseTolerance::Relative(0.001);
        assert!(t.accepts(14180.0, 14179.63));
        assert!(!t.accepts(14200.0, 14179.63));
    }

    #[test]
    fn documents() {
        let d = document_for(TableId::T1c);
        assert_eq!((d.rule.z, d.rule.h), (14, 1));
        assert_eq!(d.portfolio.classes.as_ref().unwrap()[0].lambda1, 1.0);
        assert_eq!(document_for(TableId::T8b).rule.h, 2);
        for id in TableId::ALL {
            let mut d = document_for(id);
            d.numerics.quadrature_nodes = 16;
            d.validate().unwrap();
        }
    }
}
