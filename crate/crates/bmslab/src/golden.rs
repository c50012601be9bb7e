//! Reference tables shipped with the binary.
//!
//! Each file lists `level,pen,relativity,stationary_prob` rows rounded to
//! three decimals, followed by `hmse,pen,value,` rows. Numbers are kept
//! as printed so that reports can echo them verbatim.

use std::fmt;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableId {
    T1a,
    T1b,
    T1c,
    T2a,
    T2b,
    T2c,
    T7a,
    T7b,
    T8a,
    T8b,
}

impl TableId {
    pub const ALL: [TableId; 10] = [
        TableId::T1a,
        TableId::T1b,
        TableId::T1c,
        TableId::T2a,
        TableId::T2b,
        TableId::T2c,
        TableId::T7a,
        TableId::T7b,
        TableId::T8a,
        TableId::T8b,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::T1a => "1a",
            TableId::T1b => "1b",
            TableId::T1c => "1c",
            TableId::T2a => "2a",
            TableId::T2b => "2b",
            TableId::T2c => "2c",
            TableId::T7a => "7a",
            TableId::T7b => "7b",
            TableId::T8a => "8a",
            TableId::T8b => "8b",
        }
    }

    fn source(self) -> &'static str {
        match self {
            TableId::T1a => include_str!("../golden/table_1a.csv"),
            TableId::T1b => include_str!("../golden/table_1b.csv"),
            TableId::T1c => include_str!("../golden/table_1c.csv"),
            TableId::T2a => include_str!("../golden/table_2a.csv"),
            TableId::T2b => include_str!("../golden/table_2b.csv"),
            TableId::T2c => include_str!("../golden/table_2c.csv"),
            TableId::T7a => include_str!("../golden/table_7a.csv"),
            TableId::T7b => include_str!("../golden/table_7b.csv"),
            TableId::T8a => include_str!("../golden/table_8a.csv"),
            TableId::T8b => include_str!("../golden/table_8b.csv"),
        }
    }

    /// Tables whose inputs are fully known and can be matched cell by
    /// cell. The others depend on unknown joint class weights.
    pub fn is_exact(self) -> bool {
        matches!(
            self,
            TableId::T1a | TableId::T1b | TableId::T1c | TableId::T2a | TableId::T2b | TableId::T2c
        )
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let known: Vec<_> = TableId::ALL.iter().map(|id| id.as_str()).collect();
                CliError::Usage(format!(
                    "unknown table `{s}`; expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

/// A printed number and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Printed {
    pub text: String,
    pub value: f64,
}

impl Printed {
    fn parse(text: &str) -> Self {
        Printed {
            text: text.to_string(),
            value: text
                .parse()
                .unwrap_or_else(|_| panic!("bad number `{text}` in reference table")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCell {
    pub level: u32,
    pub pen: u32,
    pub relativity: Printed,
    pub stationary_prob: Printed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenTable {
    pub id: TableId,
    pub description: String,
    pub cells: Vec<GoldenCell>,
    pub hmse: Vec<(u32, Printed)>,
}

impl GoldenTable {
    pub fn load(id: TableId) -> Self {
        let mut description = String::new();
        let mut cells = Vec::new();
        let mut hmse = Vec::new();
        for line in id.source().lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if description.is_empty() {
                    let c = comment.trim();
                    description = c.split_once(": ").map_or(c, |(_, d)| d).to_string();
                }
                continue;
            }
            if line.is_empty() || line.starts_with("level,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields[0] == "hmse" {
                hmse.push((fields[1].parse().expect("pen"), Printed::parse(fields[2])));
            } else {
                cells.push(GoldenCell {
                    level: fields[0].parse().expect("level"),
                    pen: fields[1].parse().expect("pen"),
                    relativity: Printed::parse(fields[2]),
                    stationary_prob: Printed::parse(fields[3]),
                });
            }
        }
        GoldenTable {
            id,
            description,
            cells,
            hmse,
        }
    }

    pub fn max_level(&self) -> u32 {
        self.cells.iter().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn pens(&self) -> Vec<u32> {
        let mut pens: Vec<u32> = self.cells.iter().map(|c| c.pen).collect();
        pens.sort_unstable();
        pens.dedup();
        pens
    }

    pub fn cell(&self, level: u32, pen: u32) -> Option<&GoldenCell> {
        self.cells.iter().find(|c| c.level == level && c.pen == pen)
    }

    pub fn hmse(&self, pen: u32) -> Option<&Printed> {
        self.hmse.iter().find(|(p, _)| *p == pen).map(|(_, v)| v)
    }
}
