//! Table rendering shared by the subcommands. Text pads columns and rounds
//! numbers; CSV keeps full precision.

use anyhow::Result;

#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    /// Value and the decimals shown in text output.
    Num(f64, usize),
    Int(u64),
    Missing,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn for_text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(x, d) => format!("{x:.d$}"),
            Cell::Int(n) => n.to_string(),
            Cell::Missing => "-".into(),
        }
    }

    fn for_csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(x, _) => format!("{x}"),
            Cell::Int(n) => n.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn numeric(&self) -> bool {
        matches!(self, Cell::Num(..) | Cell::Int(_))
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::for_text).collect())
            .collect();
        let width: Vec<usize> = (0..self.header.len())
            .map(|c| {
                cells
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.header[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let right: Vec<bool> = (0..self.header.len())
            .map(|c| self.rows.iter().any(|r| r[c].numeric()))
            .collect();
        let line = |vals: &[String]| {
            let parts: Vec<String> = vals
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    let pad = width[c] - v.chars().count();
                    if right[c] {
                        format!("{}{v}", " ".repeat(pad))
                    } else {
                        format!("{v}{}", " ".repeat(pad))
                    }
                })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        for r in &cells {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::for_csv))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

pub fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
