//! Tabular micro-data, the model specification bound to it, and the
//! group split that every estimation step starts from.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cell of a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Number(f64),
    Text(String),
}

impl Cell {
    /// Parses a raw CSV field. Empty fields (after trimming) and the optional
    /// sentinel become [`Cell::Missing`].
    pub fn parse(raw: &str, missing_sentinel: Option<&str>) -> Cell {
        let trimmed = raw.trim();
        if trimmed.is_empty() || missing_sentinel == Some(trimmed) {
            return Cell::Missing;
        }
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Number(v),
            _ => Cell::Text(trimmed.to_string()),
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Whether this cell holds the categorical level `level`. Numeric cells
    /// match a level spelled as the same number, so `1` matches `"1"` and `"1.0"`.
    pub fn matches_level(&self, level: &str) -> bool {
        match self {
            Cell::Missing => false,
            Cell::Text(s) => s == level,
            Cell::Number(v) => level.trim().parse::<f64>().is_ok_and(|l| l == *v),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Missing => Ok(()),
            Cell::Number(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// CSV dialect options.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Extra spelling for a missing cell besides the empty string, e.g. `NA`.
    pub missing_sentinel: Option<String>,
}

/// Row-major table of typed cells with a header.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    column_names: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    pub fn new(column_names: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("duplicate column `{name}`")));
            }
        }
        if let Some((i, row)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != column_names.len())
        {
            return Err(Error::Validation(format!(
                "row {} has {} cells, header has {}",
                i + 1,
                row.len(),
                column_names.len()
            )));
        }
        Ok(Dataset { column_names, rows })
    }

    pub fn empty(column_names: Vec<String>) -> Self {
        Dataset {
            column_names,
            rows: Vec::new(),
        }
    }

    pub fn from_csv_reader<R: Read>(reader: R, options: &CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .delimiter(b',')
            .from_reader(reader);
        let column_names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let sentinel = options.missing_sentinel.as_deref();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(|f| Cell::parse(f, sentinel)).collect());
        }
        Dataset::new(column_names, rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Dataset::from_csv_reader(std::io::BufReader::new(file), options)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.column_names)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|c| c.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn cell(&self, row: usize, column: usize) -> &Cell {
        &self.rows[row][column]
    }

    /// New dataset made of the given rows, in the given order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            column_names: self.column_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    Continuous,
    /// Dummy-coded against `reference`; `levels` order is the reporting order.
    Categorical {
        levels: Vec<String>,
        reference: String,
    },
    /// Square of another continuous predictor, materialized as its own column.
    SquaredOf { base: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

impl VariableSpec {
    pub fn continuous(name: &str) -> Self {
        VariableSpec {
            name: name.to_string(),
            kind: VariableKind::Continuous,
        }
    }

    pub fn categorical(name: &str, levels: &[&str], reference: &str) -> Self {
        VariableSpec {
            name: name.to_string(),
            kind: VariableKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
                reference: reference.to_string(),
            },
        }
    }

    pub fn squared_of(name: &str, base: &str) -> Self {
        VariableSpec {
            name: name.to_string(),
            kind: VariableKind::SquaredOf {
                base: base.to_string(),
            },
        }
    }

    /// Dataset column this predictor is read from. `None` for derived terms.
    pub fn source_column(&self) -> Option<&str> {
        match self.kind {
            VariableKind::SquaredOf { .. } => None,
            _ => Some(&self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeTransform {
    #[default]
    Identity,
    Log,
}

/// Wage-equation specification shared by both groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub outcome: String,
    #[serde(default)]
    pub outcome_transform: OutcomeTransform,
    pub predictors: Vec<VariableSpec>,
    pub group_variable: String,
    /// Advantaged group (conventionally "male").
    pub group_a_label: String,
    /// Comparison group (conventionally "female").
    pub group_b_label: String,
}

impl ModelSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(s)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        ModelSpec::from_json_str(&text)
    }

    /// Checks the internal invariants of the specification itself.
    pub fn check(&self) -> Result<()> {
        if self.group_a_label == self.group_b_label {
            return Err(Error::InvalidSpec("group labels must differ".into()));
        }
        let mut names = HashSet::new();
        for var in &self.predictors {
            if !names.insert(var.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate predictor `{}`", var.name)));
            }
            if var.name == self.outcome || var.name == self.group_variable {
                return Err(Error::InvalidSpec(format!(
                    "predictor `{}` reuses the outcome or group column",
                    var.name
                )));
            }
            match &var.kind {
                VariableKind::Continuous => {}
                VariableKind::Categorical { levels, reference } => {
                    if !levels.contains(reference) {
                        return Err(Error::InvalidSpec(format!(
                            "reference `{reference}` of `{}` is not one of its levels",
                            var.name
                        )));
                    }
                    let distinct: HashSet<_> = levels.iter().collect();
                    if distinct.len() != levels.len() {
                        return Err(Error::InvalidSpec(format!(
                            "`{}` declares a level twice",
                            var.name
                        )));
                    }
                }
                VariableKind::SquaredOf { base } => {
                    let ok = self
                        .predictors
                        .iter()
                        .any(|p| &p.name == base && p.kind == VariableKind::Continuous);
                    if !ok {
                        return Err(Error::InvalidSpec(format!(
                            "`{}` squares `{base}`, which is not a continuous predictor of this model",
                            var.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn predictor(&self, name: &str) -> Option<&VariableSpec> {
        self.predictors.iter().find(|p| p.name == name)
    }

    /// Every dataset column the model reads: outcome, group, then predictor sources.
    pub fn used_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.outcome.as_str(), self.group_variable.as_str()];
        cols.extend(self.predictors.iter().filter_map(|p| p.source_column()));
        cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellIssue {
    /// 1-based data row (header excluded).
    pub row: usize,
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCount {
    pub label: String,
    pub count: usize,
}

/// Everything that stands between a dataset and a fit.
///
/// Missing cells are listed but are not blocking: estimation applies
/// listwise deletion and reports the dropped count.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub missing_columns: Vec<String>,
    pub unknown_levels: Vec<CellIssue>,
    pub unknown_groups: Vec<CellIssue>,
    pub non_numeric: Vec<CellIssue>,
    pub non_positive_outcomes: Vec<CellIssue>,
    pub missing_cells: Vec<CellIssue>,
    pub empty_groups: Vec<String>,
    pub group_counts: Vec<GroupCount>,
}

impl ValidationReport {
    /// No findings of any kind (group counts are informational).
    pub fn is_empty(&self) -> bool {
        !self.has_blocking_issues() && self.missing_cells.is_empty()
    }

    pub fn has_blocking_issues(&self) -> bool {
        !(self.missing_columns.is_empty()
            && self.unknown_levels.is_empty()
            && self.unknown_groups.is_empty()
            && self.non_numeric.is_empty()
            && self.non_positive_outcomes.is_empty()
            && self.empty_groups.is_empty())
    }

    pub fn count_for(&self, label: &str) -> usize {
        self.group_counts
            .iter()
            .find(|g| g.label == label)
            .map_or(0, |g| g.count)
    }

    /// One line per finding.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.missing_columns {
            out.push(format!("missing column `{c}`"));
        }
        let cell = |what: &str, i: &CellIssue| {
            format!("row {}: column `{}` {what} `{}`", i.row, i.column, i.value)
        };
        out.extend(self.unknown_levels.iter().map(|i| cell("has unknown level", i)));
        out.extend(self.unknown_groups.iter().map(|i| cell("has unknown group", i)));
        out.extend(self.non_numeric.iter().map(|i| cell("is not numeric:", i)));
        out.extend(
            self.non_positive_outcomes
                .iter()
                .map(|i| cell("is not positive under log transform:", i)),
        );
        out.extend(
            self.missing_cells
                .iter()
                .map(|i| format!("row {}: column `{}` is missing", i.row, i.column)),
        );
        for g in &self.empty_groups {
            out.push(format!("group `{g}` has no rows (n = 0)"));
        }
        out
    }
}

/// Reports every problem that would stop `spec` from being fitted on `dataset`.
pub fn validate(dataset: &Dataset, spec: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut resolved = Vec::new();
    for name in spec.used_columns() {
        match dataset.column_index(name) {
            Some(i) => resolved.push(Some(i)),
            None => {
                report.missing_columns.push(name.to_string());
                resolved.push(None);
            }
        }
    }

    let outcome_col = dataset.column_index(&spec.outcome);
    let group_col = dataset.column_index(&spec.group_variable);
    let mut count_a = 0;
    let mut count_b = 0;

    for (r, row) in dataset.rows().iter().enumerate() {
        let issue = |col: usize| CellIssue {
            row: r + 1,
            column: dataset.column_names()[col].clone(),
            value: row[col].to_string(),
        };
        for col in resolved.iter().flatten() {
            if row[*col].is_missing() {
                report.missing_cells.push(issue(*col));
            }
        }
        if let Some(c) = group_col {
            let cell = &row[c];
            if cell.matches_level(&spec.group_a_label) {
                count_a += 1;
            } else if cell.matches_level(&spec.group_b_label) {
                count_b += 1;
            } else if !cell.is_missing() {
                report.unknown_groups.push(issue(c));
            }
        }
        if let Some(c) = outcome_col {
            match &row[c] {
                Cell::Number(v) => {
                    if spec.outcome_transform == OutcomeTransform::Log && *v <= 0.0 {
                        report.non_positive_outcomes.push(issue(c));
                    }
                }
                Cell::Text(_) => report.non_numeric.push(issue(c)),
                Cell::Missing => {}
            }
        }
        for var in &spec.predictors {
            let Some(c) = dataset.column_index(&var.name) else {
                continue;
            };
            match (&var.kind, &row[c]) {
                (_, Cell::Missing) | (VariableKind::SquaredOf { .. }, _) => {}
                (VariableKind::Continuous, Cell::Text(_)) => report.non_numeric.push(issue(c)),
                (VariableKind::Continuous, Cell::Number(_)) => {}
                (VariableKind::Categorical { levels, .. }, cell) => {
                    if !levels.iter().any(|l| cell.matches_level(l)) {
                        report.unknown_levels.push(issue(c));
                    }
                }
            }
        }
    }

    report.group_counts = vec![
        GroupCount {
            label: spec.group_a_label.clone(),
            count: count_a,
        },
        GroupCount {
            label: spec.group_b_label.clone(),
            count: count_b,
        },
    ];
    for g in &report.group_counts {
        if g.count == 0 {
            report.empty_groups.push(g.label.clone());
        }
    }
    report
}

/// Result of [`split_groups`]. `a.n_rows() + b.n_rows() + dropped` equals the
/// input row count.
#[derive(Debug, Clone)]
pub struct GroupSplit {
    pub a: Dataset,
    pub b: Dataset,
    /// Rows removed by listwise deletion or carrying no recognised group.
    pub dropped: usize,
}

/// Partitions rows by group, dropping rows with a missing cell in any
/// column the model uses.
pub fn split_groups(dataset: &Dataset, spec: &ModelSpec) -> Result<GroupSplit> {
    let used: Vec<usize> = spec
        .used_columns()
        .into_iter()
        .map(|name| {
            dataset
                .column_index(name)
                .ok_or_else(|| Error::Validation(format!("missing column `{name}`")))
        })
        .collect::<Result<_>>()?;
    let group_col = used[1];

    let mut idx_a = Vec::new();
    let mut idx_b = Vec::new();
    let mut dropped = 0;
    for (r, row) in dataset.rows().iter().enumerate() {
        if used.iter().any(|&c| row[c].is_missing()) {
            dropped += 1;
        } else if row[group_col].matches_level(&spec.group_a_label) {
            idx_a.push(r);
        } else if row[group_col].matches_level(&spec.group_b_label) {
            idx_b.push(r);
        } else {
            dropped += 1;
        }
    }
    if idx_a.is_empty() {
        return Err(Error::EmptyGroup(spec.group_a_label.clone()));
    }
    if idx_b.is_empty() {
        return Err(Error::EmptyGroup(spec.group_b_label.clone()));
    }
    Ok(GroupSplit {
        a: dataset.select_rows(&idx_a),
        b: dataset.select_rows(&idx_b),
        dropped,
    })
}
