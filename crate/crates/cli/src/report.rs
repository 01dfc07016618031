//! Scenario reports: a JSON summary plus flat CSV tables.
//!
//! Every headline number names the table, column and reduction it came
//! from, so `verify` can recompute it from the CSVs alone. Reductions only
//! ever select or count, never do arithmetic, so the recomputed value is
//! the same string.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "ltg";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Input {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Reduce {
    /// Largest value, compared numerically; returned as written.
    Max,
    Min,
    /// Number of rows.
    Count,
    /// Number of rows whose value is `true`.
    CountTrue,
    /// `true` iff every value is `true`.
    All,
    First,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Headline {
    pub name: String,
    pub value: String,
    pub table: String,
    pub column: String,
    pub reduce: Reduce,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub name: String,
    pub inputs: Vec<Input>,
    pub parameters: BTreeMap<String, String>,
    pub headlines: Vec<Headline>,
    pub assertions: Vec<Assertion>,
    pub tables: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).with_context(|| format!("no column {name:?}"))
    }
}

/// Applies `reduce` to `values`; numeric comparisons parse as exact
/// rationals so `"1/3"` and `"0.25"` order correctly.
pub fn reduce(values: &[String], how: Reduce) -> Result<String> {
    let number = |v: &String| ltg::scalar::parse_rational(v).map_err(anyhow::Error::msg);
    Ok(match how {
        Reduce::Count => values.len().to_string(),
        Reduce::CountTrue => values.iter().filter(|v| *v == "true").count().to_string(),
        Reduce::All => values.iter().all(|v| v == "true").to_string(),
        Reduce::First => values.first().cloned().unwrap_or_default(),
        Reduce::Max | Reduce::Min => {
            let mut best: Option<(&String, ltg::scalar::Rational)> = None;
            for v in values {
                let x = number(v)?;
                let better = match &best {
                    None => true,
                    Some((_, b)) => (how == Reduce::Max && x > *b) || (how == Reduce::Min && x < *b),
                };
                if better {
                    best = Some((v, x));
                }
            }
            best.map(|(v, _)| v.clone()).unwrap_or_default()
        }
    })
}

#[derive(Debug, Clone)]
pub struct Report {
    pub kind: String,
    pub name: String,
    pub inputs: Vec<Input>,
    pub parameters: BTreeMap<String, String>,
    pub tables: BTreeMap<String, Table>,
    pub headlines: Vec<Headline>,
    pub assertions: Vec<Assertion>,
    /// Extra files (relative path, contents), e.g. certificates.
    pub files: BTreeMap<String, String>,
}

impl Report {
    pub fn new(kind: &str, name: &str) -> Self {
        Report {
            kind: kind.into(),
            name: name.into(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            tables: BTreeMap::new(),
            headlines: Vec::new(),
            assertions: Vec::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, label: &str, bytes: &[u8]) {
        let digest = Sha256::digest(bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(Input { path: label.into(), sha256 });
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.into(), value.to_string());
    }

    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.into(), table);
    }

    /// Records a headline derived from an existing table.
    pub fn headline(&mut self, name: &str, table: &str, column: &str, how: Reduce) -> Result<String> {
        let t = self.tables.get(table).with_context(|| format!("no table {table:?}"))?;
        let c = t.column(column)?;
        let values: Vec<String> = t.rows.iter().map(|r| r[c].clone()).collect();
        let value = reduce(&values, how)?;
        self.headlines.push(Headline {
            name: name.into(),
            value: value.clone(),
            table: table.into(),
            column: column.into(),
            reduce: how,
        });
        Ok(value)
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) -> bool {
        self.assertions.push(Assertion { name: name.into(), pass, detail: detail.into() });
        pass
    }

    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            tool: TOOL.into(),
            version: VERSION.into(),
            kind: self.kind.clone(),
            name: self.name.clone(),
            inputs: self.inputs.clone(),
            parameters: self.parameters.clone(),
            headlines: self.headlines.clone(),
            assertions: self.assertions.clone(),
            tables: self.tables.keys().map(|k| format!("{k}.csv")).collect(),
            pass: self.pass(),
        }
    }

    /// Writes `summary.json`, `assertions.csv`, one CSV per table and any
    /// extra files under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut json = serde_json::to_string_pretty(&self.summary())?;
        json.push('\n');
        fs::write(dir.join("summary.json"), json)?;
        let mut assertions = Table::new(&["name", "pass", "detail"]);
        for a in &self.assertions {
            assertions.push(vec![a.name.clone(), a.pass.to_string(), a.detail.clone()]);
        }
        write_csv(&dir.join("assertions.csv"), &assertions)?;
        for (name, table) in &self.tables {
            write_csv(&dir.join(format!("{name}.csv")), table)?;
        }
        for (rel, body) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, body)?;
        }
        Ok(())
    }
}

fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok(Table { header, rows })
}

/// One re-derived headline.
#[derive(Debug, Clone, PartialEq)]
pub struct Recheck {
    pub name: String,
    pub reported: String,
    pub derived: String,
}

impl Recheck {
    pub fn ok(&self) -> bool {
        self.reported == self.derived
    }
}

/// Recomputes every headline of the report in `dir` from its CSV tables,
/// and the overall verdict from `assertions.csv`.
pub fn verify_dir(dir: &Path) -> Result<Vec<Recheck>> {
    let text = fs::read_to_string(dir.join("summary.json")).with_context(|| format!("reading {}/summary.json", dir.display()))?;
    let summary: Summary = serde_json::from_str(&text)?;
    let mut out = Vec::new();
    for h in &summary.headlines {
        let table = read_csv(&dir.join(format!("{}.csv", h.table)))?;
        let c = table.column(&h.column)?;
        let values: Vec<String> = table.rows.iter().map(|r| r[c].clone()).collect();
        out.push(Recheck { name: h.name.clone(), reported: h.value.clone(), derived: reduce(&values, h.reduce)? });
    }
    let assertions = read_csv(&dir.join("assertions.csv"))?;
    let c = assertions.column("pass")?;
    let values: Vec<String> = assertions.rows.iter().map(|r| r[c].clone()).collect();
    out.push(Recheck { name: "pass".into(), reported: summary.pass.to_string(), derived: reduce(&values, Reduce::All)? });
    if summary.tool != TOOL {
        bail!("report written by {:?}, not {TOOL}", summary.tool);
    }
    Ok(out)
}
