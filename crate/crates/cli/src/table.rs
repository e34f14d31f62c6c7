//! Plain tables rendered as CSV (rounded or full precision) or markdown.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Empty,
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Six significant digits.
    Table,
    /// Shortest representation that round-trips.
    Raw,
}

impl Cell {
    fn render(&self, precision: Precision) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => match precision {
                Precision::Table => format!("{v:.5e}"),
                Precision::Raw => format!("{v:e}"),
            },
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, precision: Precision) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render(precision)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Markdown table; absent values show as `-`.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", self.headers.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.headers.len()));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Empty => "-".to_string(),
                    c => c.render(Precision::Table),
                })
                .collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_csv_and_markdown() {
        let mut t = Table::new(&["level", "err", "eoc"]);
        t.push(vec![Cell::Int(5), Cell::Real(8.203521234e-4), Cell::Empty]);
        t.push(vec![Cell::Int(6), Cell::Text("FAILED".into()), Cell::Real(2.0)]);
        assert_eq!(
            t.to_csv(Precision::Table),
            "level,err,eoc\n5,8.20352e-4,\n6,FAILED,2.00000e0\n"
        );
        assert_eq!(
            t.to_csv(Precision::Raw),
            "level,err,eoc\n5,8.203521234e-4,\n6,FAILED,2e0\n"
        );
        let md = t.to_markdown();
        assert!(md.starts_with("| level | err | eoc |\n|---|---|---|\n"));
        assert!(md.contains("| 5 | 8.20352e-4 | - |"));
    }

    #[test]
    fn raw_round_trips() {
        for v in [0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, 5e-324] {
            let s = Cell::Real(v).render(Precision::Raw);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
