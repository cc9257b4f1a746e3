//! Model × evaluation score grid with TSV, JSON and Markdown renderings.
//!
//! TSV layout: a header `model<TAB>col...`, then one row per model. A cell is
//! empty, a bare value (`93.5`), or a value with counts (`93.5 [120/3]`,
//! meaning 120 used and 3 skipped). Values render with one decimal place.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evals::EvalScore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_skipped: Option<usize>,
}

impl Cell {
    pub fn value(value: f64) -> Self {
        Self {
            value,
            n_used: None,
            n_skipped: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub cells: Vec<Option<Cell>>,
}

/// Rectangular: every row has one (possibly empty) cell per column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Tsv,
    Json,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown table format {other:?}")),
        }
    }
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Tsv => "tsv",
            Self::Json => "json",
            Self::Markdown => "md",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("empty table text")]
    Empty,
    #[error("header must start with \"model\"")]
    BadHeader,
    #[error("line {line}: expected {expected} fields, got {got}")]
    Ragged {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: bad cell {text:?}")]
    BadCell { line: usize, text: String },
    #[error("duplicate model {0:?}")]
    DuplicateModel(String),
}

impl ReportTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    /// Rows in first-appearance order; columns follow `columns`, then any
    /// eval names not listed there in first-appearance order.
    pub fn from_scores(scores: &[EvalScore], columns: &[&str]) -> Self {
        let mut cols: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        for s in scores {
            if !cols.contains(&s.eval_name) {
                cols.push(s.eval_name.clone());
            }
        }
        let mut table = Self::new(cols);
        for s in scores {
            table.set(
                &s.model,
                &s.eval_name,
                Cell {
                    value: s.value,
                    n_used: Some(s.n_used),
                    n_skipped: Some(s.n_skipped),
                },
            );
        }
        table
    }

    fn row_index(&mut self, model: &str) -> usize {
        match self.rows.iter().position(|r| r.model == model) {
            Some(i) => i,
            None => {
                self.rows.push(ReportRow {
                    model: model.to_string(),
                    cells: vec![None; self.columns.len()],
                });
                self.rows.len() - 1
            }
        }
    }

    pub fn set(&mut self, model: &str, column: &str, cell: Cell) {
        let c = match self.columns.iter().position(|c| c == column) {
            Some(c) => c,
            None => {
                self.columns.push(column.to_string());
                for r in &mut self.rows {
                    r.cells.push(None);
                }
                self.columns.len() - 1
            }
        };
        let r = self.row_index(model);
        self.rows[r].cells[c] = Some(cell);
    }

    pub fn get(&self, model: &str, column: &str) -> Option<Cell> {
        let c = self.columns.iter().position(|c| c == column)?;
        self.rows.iter().find(|r| r.model == model)?.cells[c]
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.model.as_str())
    }

    /// `(model, value)` for every row with a value in `column`.
    pub fn column_values(&self, column: &str) -> Vec<(String, f64)> {
        let Some(c) = self.columns.iter().position(|x| x == column) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|r| r.cells[c].map(|cell| (r.model.clone(), cell.value)))
            .collect()
    }

    pub fn column_map(&self, column: &str) -> BTreeMap<String, f64> {
        self.column_values(column).into_iter().collect()
    }

    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Tsv => self.to_tsv(),
            TableFormat::Json => self.to_json(),
            TableFormat::Markdown => self.to_markdown(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model");
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.model);
            for cell in &r.cells {
                out.push('\t');
                if let Some(cell) = cell {
                    out.push_str(&render_cell(cell));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| model |");
        for c in &self.columns {
            let _ = write!(out, " {c} |");
        }
        out.push_str("\n|---|");
        for _ in &self.columns {
            out.push_str("---:|");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "| {} |", r.model);
            for cell in &r.cells {
                match cell {
                    Some(cell) => {
                        let _ = write!(out, " {:.1}", cell.value);
                        if let Some(sk) = cell.n_skipped.filter(|&n| n > 0) {
                            let _ = write!(out, " ({sk} skipped)");
                        }
                        out.push_str(" |");
                    }
                    None => out.push_str("  |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self, ReportError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or(ReportError::Empty)?;
        let mut head = header.split('\t');
        if head.next() != Some("model") {
            return Err(ReportError::BadHeader);
        }
        let mut table = Self::new(head.map(|s| s.trim().to_string()).collect());
        let expected = table.columns.len() + 1;
        for (n, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != expected {
                return Err(ReportError::Ragged {
                    line: n + 1,
                    expected,
                    got: fields.len(),
                });
            }
            let model = fields[0].trim().to_string();
            if table.rows.iter().any(|r| r.model == model) {
                return Err(ReportError::DuplicateModel(model));
            }
            let cells = fields[1..]
                .iter()
                .map(|f| {
                    parse_cell(f.trim()).ok_or_else(|| ReportError::BadCell {
                        line: n + 1,
                        text: f.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.rows.push(ReportRow { model, cells });
        }
        Ok(table)
    }
}

fn render_cell(cell: &Cell) -> String {
    match (cell.n_used, cell.n_skipped) {
        (Some(u), Some(s)) => format!("{:.1} [{u}/{s}]", cell.value),
        _ => format!("{:.1}", cell.value),
    }
}

fn parse_cell(text: &str) -> Option<Option<Cell>> {
    if text.is_empty() {
        return Some(None);
    }
    let (value, counts) = match text.split_once('[') {
        Some((v, rest)) => (v.trim(), Some(rest.strip_suffix(']')?)),
        None => (text, None),
    };
    let value: f64 = value.parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    let mut cell = Cell::value(value);
    if let Some(c) = counts {
        let (u, s) = c.split_once('/')?;
        cell.n_used = Some(u.trim().parse().ok()?);
        cell.n_skipped = Some(s.trim().parse().ok()?);
    }
    Some(Some(cell))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round_trip_at_one_decimal() {
        let mut t = ReportTable::new(vec!["a".into(), "b".into()]);
        t.set("m1", "a", Cell::value(93.46));
        t.set(
            "m2",
            "b",
            Cell {
                value: 50.0,
                n_used: Some(10),
                n_skipped: Some(2),
            },
        );
        let tsv = t.to_tsv();
        assert_eq!(tsv, "model\ta\tb\nm1\t93.5\t\nm2\t\t50.0 [10/2]\n");
        let back = ReportTable::parse_tsv(&tsv).unwrap();
        assert_eq!(back.get("m1", "a").unwrap().value, 93.5);
        assert_eq!(back.get("m2", "b").unwrap().n_skipped, Some(2));
        assert!(back.get("m1", "b").is_none());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(
            ReportTable::parse_tsv("model\ta\tb\nm\t1.0\n"),
            Err(ReportError::Ragged { .. })
        ));
    }

    #[test]
    fn markdown_shows_skips() {
        let mut t = ReportTable::new(vec!["a".into()]);
        t.set(
            "m",
            "a",
            Cell {
                value: 1.24,
                n_used: Some(3),
                n_skipped: Some(1),
            },
        );
        assert!(t.to_markdown().contains("| m | 1.2 (1 skipped) |"));
    }
}
