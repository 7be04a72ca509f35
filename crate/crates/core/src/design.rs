//! Intercept-first design matrices with labelled columns.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::data::{Cell, Dataset, ModelSpec, OutcomeTransform, VariableKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Intercept,
    Continuous,
    Squared { base: String },
    Level(String),
}

/// Ties a design column back to the predictor (and level) it encodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnLabel {
    pub variable: String,
    pub term: Term,
}

pub const INTERCEPT_NAME: &str = "(Intercept)";

impl ColumnLabel {
    pub fn intercept() -> Self {
        ColumnLabel {
            variable: INTERCEPT_NAME.to_string(),
            term: Term::Intercept,
        }
    }

    pub fn level(&self) -> Option<&str> {
        match &self.term {
            Term::Level(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.term {
            Term::Level(l) => write!(f, "{}={}", self.variable, l),
            _ => f.write_str(&self.variable),
        }
    }
}

impl Serialize for ColumnLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Column labels `spec` produces, in design order: intercept, then each
/// predictor in declaration order, categorical predictors expanding to one
/// column per non-reference level.
pub fn design_labels(spec: &ModelSpec) -> Vec<ColumnLabel> {
    let mut labels = vec![ColumnLabel::intercept()];
    for var in &spec.predictors {
        match &var.kind {
            VariableKind::Continuous => labels.push(ColumnLabel {
                variable: var.name.clone(),
                term: Term::Continuous,
            }),
            VariableKind::SquaredOf { base } => labels.push(ColumnLabel {
                variable: var.name.clone(),
                term: Term::Squared { base: base.clone() },
            }),
            VariableKind::Categorical { levels, reference } => {
                labels.extend(levels.iter().filter(|l| *l != reference).map(|l| ColumnLabel {
                    variable: var.name.clone(),
                    term: Term::Level(l.clone()),
                }))
            }
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub labels: Vec<ColumnLabel>,
}

impl DesignMatrix {
    pub const INTERCEPT_INDEX: usize = 0;

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, indices: &[usize]) -> DesignMatrix {
        DesignMatrix {
            values: self.values.select_rows(indices),
            labels: self.labels.clone(),
        }
    }

    /// Recovers the level of categorical `variable` for each row from its
    /// dummy columns; rows with no active dummy hold `reference`.
    pub fn decode_levels(&self, variable: &str, reference: &str) -> Vec<String> {
        let cols: Vec<(usize, &str)> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.variable == variable)
            .filter_map(|(j, l)| l.level().map(|lv| (j, lv)))
            .collect();
        (0..self.n_rows())
            .map(|i| {
                cols.iter()
                    .find(|(j, _)| self.values[(i, *j)] == 1.0)
                    .map_or(reference, |(_, lv)| lv)
                    .to_string()
            })
            .collect()
    }
}

/// Encodes a (group-filtered, complete) dataset. Returns the design and the
/// transformed outcome vector.
pub fn build_design(dataset: &Dataset, spec: &ModelSpec) -> Result<(DesignMatrix, DVector<f64>)> {
    let labels = design_labels(spec);
    let n = dataset.n_rows();
    let column = |name: &str| {
        dataset
            .column_index(name)
            .ok_or_else(|| Error::Validation(format!("missing column `{name}`")))
    };
    let outcome_col = column(&spec.outcome)?;

    let numeric = |row: usize, col: usize| -> Result<f64> {
        match dataset.cell(row, col) {
            Cell::Number(v) => Ok(*v),
            Cell::Missing => Err(Error::MissingCell {
                row: row + 1,
                column: dataset.column_names()[col].clone(),
            }),
            Cell::Text(t) => Err(Error::NotNumeric {
                row: row + 1,
                column: dataset.column_names()[col].clone(),
                value: t.clone(),
            }),
        }
    };

    let mut y = DVector::zeros(n);
    for i in 0..n {
        let v = numeric(i, outcome_col)?;
        y[i] = match spec.outcome_transform {
            OutcomeTransform::Identity => v,
            OutcomeTransform::Log => {
                if v <= 0.0 {
                    return Err(Error::NonPositiveOutcome { row: i + 1, value: v });
                }
                v.ln()
            }
        };
    }

    let mut x = DMatrix::zeros(n, labels.len());
    x.column_mut(0).fill(1.0);
    let mut j = 1;
    for var in &spec.predictors {
        match &var.kind {
            VariableKind::Continuous => {
                let c = column(&var.name)?;
                for i in 0..n {
                    x[(i, j)] = numeric(i, c)?;
                }
                j += 1;
            }
            VariableKind::SquaredOf { base } => {
                let c = column(base)?;
                for i in 0..n {
                    let v = numeric(i, c)?;
                    x[(i, j)] = v * v;
                }
                j += 1;
            }
            VariableKind::Categorical { levels, reference } => {
                let c = column(&var.name)?;
                let dummies: Vec<&String> = levels.iter().filter(|l| *l != reference).collect();
                for i in 0..n {
                    let cell = dataset.cell(i, c);
                    if cell.is_missing() {
                        return Err(Error::MissingCell {
                            row: i + 1,
                            column: var.name.clone(),
                        });
                    }
                    if cell.matches_level(reference) {
                        continue;
                    }
                    match dummies.iter().position(|l| cell.matches_level(l)) {
                        Some(k) => x[(i, j + k)] = 1.0,
                        None => {
                            return Err(Error::UnknownLevel {
                                row: i + 1,
                                column: var.name.clone(),
                                level: cell.to_string(),
                            })
                        }
                    }
                }
                j += dummies.len();
            }
        }
    }
    debug_assert_eq!(j, labels.len());
    Ok((DesignMatrix { values: x, labels }, y))
}

/// Per-column means of a design (X̄). The intercept entry is exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanVector {
    #[serde(serialize_with = "serialize_dvector")]
    pub values: DVector<f64>,
    pub labels: Vec<ColumnLabel>,
}

pub(crate) fn serialize_dvector<S: Serializer>(
    v: &DVector<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn column_means(design: &DesignMatrix) -> Result<MeanVector> {
    let n = design.n_rows();
    if n == 0 {
        return Err(Error::Validation("cannot take column means of an empty design".into()));
    }
    let values = DVector::from_iterator(
        design.n_cols(),
        design.values.column_iter().map(|c| c.sum() / n as f64),
    );
    Ok(MeanVector {
        values,
        labels: design.labels.clone(),
    })
}
