//! Plain-text renderings: CSV for machines, aligned markdown for people.
//!
//! Everything is rendered into a `String` first so that a failing command
//! never leaves half a file behind.

use bmslab_core::state_space::Trajectory;
use bmslab_core::{StateSpace, TransitionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Md,
}

/// Rows of cells plus `key, value` metadata printed after the rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footer: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            ..Table::default()
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(Into::into).collect());
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.footer.push((key.into(), value.into()));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Md => self.markdown(),
        }
    }

    /// Header, rows, then one `# key,value` line per footer entry.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<_> = row.iter().map(|c| csv_field(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for (k, v) in &self.footer {
            out.push_str(&format!("# {},{}\n", csv_field(k), csv_field(v)));
        }
        out
    }

    pub fn markdown(&self) -> String {
        let columns = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count().max(3)).collect();
        let mut numeric = vec![true; columns];
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate().take(columns) {
                widths[i] = widths[i].max(cell.chars().count());
                if !is_numeric(cell) {
                    numeric[i] = false;
                }
            }
        }
        let line = |cells: &[String], out: &mut String| {
            out.push('|');
            for i in 0..columns {
                let cell = cells.get(i).map_or("", String::as_str);
                let pad = widths[i] - cell.chars().count();
                if numeric[i] {
                    out.push_str(&format!(" {}{} |", " ".repeat(pad), cell));
                } else {
                    out.push_str(&format!(" {}{} |", cell, " ".repeat(pad)));
                }
            }
            out.push('\n');
        };
        let mut out = String::new();
        line(&self.header, &mut out);
        out.push('|');
        for i in 0..columns {
            let dashes = "-".repeat(widths[i]);
            if numeric[i] {
                out.push_str(&format!(" {}: |", &dashes[1..]));
            } else {
                out.push_str(&format!(" {dashes} |"));
            }
        }
        out.push('\n');
        for row in &self.rows {
            line(row, &mut out);
        }
        if !self.footer.is_empty() {
            out.push('\n');
            for (k, v) in &self.footer {
                out.push_str(&format!("{k}: {v}\n"));
            }
        }
        out
    }
}

fn is_numeric(cell: &str) -> bool {
    cell == "NA" || cell.is_empty() || cell.parse::<f64>().is_ok()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Fixed decimals; `NA` for undefined values.
pub fn fixed(value: Option<f64>, digits: usize) -> String {
    match value {
        Some(v) => {
            let s = format!("{v:.digits$}");
            // no negative zero after rounding
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
        None => "NA".to_string(),
    }
}

/// Seven significant digits, never in exponent form for the magnitudes
/// that occur here.
pub fn significant(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).clamp(0, 17) as usize;
    format!("{value:.decimals$}")
}

/// Trajectory layout: one row per quantity, one column per year.
pub fn trace_table(claims: &[u32], trajectory: &Trajectory) -> Table {
    let years = trajectory.levels.len();
    let mut table = Table::new(std::iter::once("t".to_string()).chain((0..years).map(|t| t.to_string())));
    let mut row = |name: &str, cells: Vec<String>| {
        table.push(std::iter::once(name.to_string()).chain(cells));
    };
    row(
        "N_{t+1}",
        (0..years)
            .map(|t| claims.get(t).map_or(String::new(), u32::to_string))
            .collect(),
    );
    row("L_t", trajectory.levels.iter().map(u32::to_string).collect());
    row(
        "pen*_t",
        trajectory.penalties.iter().map(u32::to_string).collect(),
    );
    row("L*_t", trajectory.states.iter().map(|s| s.to_string()).collect());
    table
}

/// Row-major dump with state labels along both axes.
pub fn matrix_table(space: &StateSpace, matrix: &TransitionMatrix) -> Table {
    let labels: Vec<String> = space.states().iter().map(|s| s.to_string()).collect();
    let mut table = Table::new(std::iter::once("from\\to".to_string()).chain(labels.iter().cloned()));
    for (i, label) in labels.iter().enumerate() {
        table.push(
            std::iter::once(label.clone()).chain(matrix.row(i).iter().map(|p| {
                if *p == 0.0 {
                    "0".to_string()
                } else {
                    format!("{p:e}")
                }
            })),
        );
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_footer_and_quoting() {
        let mut t = Table::new(["a", "b"]);
        t.push(["1", "x,y"]);
        t.note("hmse", "0.5");
        assert_eq!(t.csv(), "a,b\n1,\"x,y\"\n# hmse,0.5\n");
    }

    #[test]
    fn markdown_aligns() {
        let mut t = Table::new(["level", "name"]);
        t.push(["10", "x"]);
        t.push(["9", "long"]);
        let md = t.markdown();
        let lines: Vec<_> = md.lines().collect();
        assert_eq!(lines[0], "| level | name |");
        assert_eq!(lines[1], "| ----: | ---- |");
        assert_eq!(lines[2], "|    10 | x    |");
        assert_eq!(lines[3], "|     9 | long |");
    }

    #[test]
    fn number_formats() {
        assert_eq!(fixed(Some(17.0964), 3), "17.096");
        assert_eq!(fixed(Some(-0.0001), 3), "0.000");
        assert_eq!(fixed(None, 3), "NA");
        assert_eq!(significant(0.0028712341), "0.002871234");
        assert_eq!(significant(14179.6312), "14179.63");
        assert_eq!(significant(4649638.4), "4649638");
    }
}
