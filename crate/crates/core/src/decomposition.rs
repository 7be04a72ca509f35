//! Twofold and threefold Oaxaca-Blinder decompositions of the mean outcome
//! gap between group a (advantaged) and group b.
//!
//! With ΔX̄ = X̄_a − X̄_b and Δα̂ = α̂_a − α̂_b the gap α̂_a'X̄_a − α̂_b'X̄_b splits as
//!
//! | reference | explained / endowments | unexplained | coefficients | interaction |
//! |-----------|------------------------|-------------|--------------|-------------|
//! | female (b)| α̂_b'ΔX̄                | Δα̂'X̄_a     | Δα̂'X̄_b      | Δα̂'ΔX̄      |
//! | male (a)  | α̂_a'ΔX̄                | Δα̂'X̄_b     | Δα̂'X̄_a      | −Δα̂'ΔX̄     |
//!
//! Every total is the sum of its per-column terms.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{ModelSpec, VariableKind};
use crate::design::{ColumnLabel, MeanVector, Term, INTERCEPT_NAME};
use crate::error::{Error, Result};
use crate::ols::OlsFit;

/// Which group's coefficient vector is taken as the non-discriminatory wage
/// structure. `Female` is group b's, `Male` is group a's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Female,
    Male,
}

impl Reference {
    pub fn as_str(self) -> &'static str {
        match self {
            Reference::Female => "female",
            Reference::Male => "male",
        }
    }
}

/// Estimates for one group: coefficients and design means on shared labels.
#[derive(Debug, Clone, Copy)]
pub struct GroupEstimate<'a> {
    pub coefficients: &'a DVector<f64>,
    pub means: &'a DVector<f64>,
    pub labels: &'a [ColumnLabel],
}

impl<'a> GroupEstimate<'a> {
    pub fn new(fit: &'a OlsFit, means: &'a MeanVector) -> Result<Self> {
        check_labels(&fit.labels, &means.labels)?;
        Ok(GroupEstimate {
            coefficients: &fit.coefficients,
            means: &means.values,
            labels: &fit.labels,
        })
    }
}

fn check_labels(a: &[ColumnLabel], b: &[ColumnLabel]) -> Result<()> {
    if a == b {
        return Ok(());
    }
    let mut columns: Vec<String> = Vec::new();
    for i in 0..a.len().max(b.len()) {
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) if x == y => {}
            (x, y) => columns.push(format!(
                "#{i}: {} vs {}",
                x.map_or("-".to_string(), |l| l.to_string()),
                y.map_or("-".to_string(), |l| l.to_string())
            )),
        }
    }
    Err(Error::LabelMismatch { columns })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwofoldColumn {
    pub label: ColumnLabel,
    pub explained: f64,
    pub unexplained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwofoldResult {
    pub reference: Reference,
    pub gap: f64,
    pub explained: f64,
    pub unexplained: f64,
    pub per_column: Vec<TwofoldColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreefoldColumn {
    pub label: ColumnLabel,
    pub endowments: f64,
    pub coefficients: f64,
    pub interaction: f64,
}

/// Per-column terms summed over one source variable's columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableContribution {
    pub variable: String,
    pub endowments: f64,
    pub coefficients: f64,
    pub interaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreefoldResult {
    pub reference: Reference,
    pub gap: f64,
    /// α̂_a'X̄_a, the advantaged group's mean outcome.
    pub mean_a: f64,
    pub mean_b: f64,
    pub endowments: f64,
    pub coefficients: f64,
    pub interaction: f64,
    /// coefficients + interaction.
    pub discrimination: f64,
    /// mean_a − discrimination.
    pub counterfactual_wage_a: f64,
    pub per_column: Vec<ThreefoldColumn>,
    pub per_variable_group: Vec<VariableContribution>,
}

impl ThreefoldResult {
    /// endowments + coefficients + interaction − gap.
    pub fn additivity_residual(&self) -> f64 {
        self.endowments + self.coefficients + self.interaction - self.gap
    }
}

/// Aggregate identities of a threefold decomposition, usable on published
/// totals as well as on computed ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreefoldTotals {
    pub mean_a: f64,
    pub endowments: f64,
    pub coefficients: f64,
    pub interaction: f64,
}

impl ThreefoldTotals {
    pub fn gap(&self) -> f64 {
        self.endowments + self.coefficients + self.interaction
    }

    pub fn discrimination(&self) -> f64 {
        self.coefficients + self.interaction
    }

    /// What group a would earn on average without the discrimination component.
    pub fn counterfactual_wage_a(&self) -> f64 {
        self.mean_a - self.discrimination()
    }

    pub fn mean_b(&self) -> f64 {
        self.mean_a - self.gap()
    }
}

fn deltas(a: &GroupEstimate, b: &GroupEstimate) -> Result<(DVector<f64>, DVector<f64>)> {
    check_labels(a.labels, b.labels)?;
    Ok((a.means - b.means, a.coefficients - b.coefficients))
}

pub fn twofold_estimates(a: &GroupEstimate, b: &GroupEstimate, reference: Reference) -> Result<TwofoldResult> {
    let (dx, db) = deltas(a, b)?;
    let per_column: Vec<TwofoldColumn> = (0..dx.len())
        .map(|j| {
            let (explained, unexplained) = match reference {
                Reference::Female => (b.coefficients[j] * dx[j], db[j] * a.means[j]),
                Reference::Male => (a.coefficients[j] * dx[j], db[j] * b.means[j]),
            };
            TwofoldColumn {
                label: a.labels[j].clone(),
                explained,
                unexplained,
            }
        })
        .collect();
    Ok(TwofoldResult {
        reference,
        gap: a.coefficients.dot(a.means) - b.coefficients.dot(b.means),
        explained: per_column.iter().map(|c| c.explained).sum(),
        unexplained: per_column.iter().map(|c| c.unexplained).sum(),
        per_column,
    })
}

pub fn threefold_estimates(a: &GroupEstimate, b: &GroupEstimate, reference: Reference) -> Result<ThreefoldResult> {
    let (dx, db) = deltas(a, b)?;
    let per_column: Vec<ThreefoldColumn> = (0..dx.len())
        .map(|j| {
            let (endowments, coefficients, interaction) = match reference {
                Reference::Female => (b.coefficients[j] * dx[j], db[j] * b.means[j], db[j] * dx[j]),
                Reference::Male => (a.coefficients[j] * dx[j], db[j] * a.means[j], -db[j] * dx[j]),
            };
            ThreefoldColumn {
                label: a.labels[j].clone(),
                endowments,
                coefficients,
                interaction,
            }
        })
        .collect();
    let endowments: f64 = per_column.iter().map(|c| c.endowments).sum();
    let coefficients: f64 = per_column.iter().map(|c| c.coefficients).sum();
    let interaction: f64 = per_column.iter().map(|c| c.interaction).sum();
    let mean_a = a.coefficients.dot(a.means);
    let mean_b = b.coefficients.dot(b.means);
    let discrimination = coefficients + interaction;
    Ok(ThreefoldResult {
        reference,
        gap: mean_a - mean_b,
        mean_a,
        mean_b,
        endowments,
        coefficients,
        interaction,
        discrimination,
        counterfactual_wage_a: mean_a - discrimination,
        per_variable_group: group_by_variable(&per_column),
        per_column,
    })
}

pub fn twofold(
    fit_a: &OlsFit,
    fit_b: &OlsFit,
    means_a: &MeanVector,
    means_b: &MeanVector,
    reference: Reference,
) -> Result<TwofoldResult> {
    twofold_estimates(
        &GroupEstimate::new(fit_a, means_a)?,
        &GroupEstimate::new(fit_b, means_b)?,
        reference,
    )
}

pub fn threefold(
    fit_a: &OlsFit,
    fit_b: &OlsFit,
    means_a: &MeanVector,
    means_b: &MeanVector,
    reference: Reference,
) -> Result<ThreefoldResult> {
    threefold_estimates(
        &GroupEstimate::new(fit_a, means_a)?,
        &GroupEstimate::new(fit_b, means_b)?,
        reference,
    )
}

/// Sums per-column terms by source variable, in order of first appearance.
pub fn group_by_variable(columns: &[ThreefoldColumn]) -> Vec<VariableContribution> {
    let mut out: Vec<VariableContribution> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for c in columns {
        let i = *index.entry(c.label.variable.as_str()).or_insert_with(|| {
            out.push(VariableContribution {
                variable: c.label.variable.clone(),
                endowments: 0.0,
                coefficients: 0.0,
                interaction: 0.0,
            });
            out.len() - 1
        });
        out[i].endowments += c.endowments;
        out[i].coefficients += c.coefficients;
        out[i].interaction += c.interaction;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetailKind {
    Intercept,
    Term,
    /// One dummy level of a categorical variable.
    Level,
    /// Sum over a categorical variable's levels.
    Subtotal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetailRow {
    pub kind: DetailKind,
    pub variable: String,
    pub level: Option<String>,
    pub endowments: f64,
    pub coefficients: f64,
    pub interaction: f64,
    /// coefficients + interaction.
    pub nepotism: f64,
}

impl DetailRow {
    fn new(kind: DetailKind, variable: &str, level: Option<&str>, e: f64, c: f64, i: f64) -> Self {
        DetailRow {
            kind,
            variable: variable.to_string(),
            level: level.map(str::to_string),
            endowments: e,
            coefficients: c,
            interaction: i,
            nepotism: c + i,
        }
    }

    pub fn label(&self) -> String {
        match &self.level {
            Some(l) => format!("{}={l}", self.variable),
            None => self.variable.clone(),
        }
    }
}

/// Variable-by-variable threefold table: intercept, scalar terms, and for each
/// categorical variable a subtotal row followed by its level rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetailedTable {
    pub reference: Reference,
    pub rows: Vec<DetailRow>,
    /// Componentwise sum of every non-subtotal row.
    pub overall: DetailRow,
}

impl DetailedTable {
    /// Builds the table from per-column terms. Columns are visited in the
    /// given order; level rows of one variable are kept together.
    pub fn from_columns(columns: &[ThreefoldColumn], reference: Reference) -> DetailedTable {
        let mut rows = Vec::new();
        let mut i = 0;
        while i < columns.len() {
            let c = &columns[i];
            match &c.label.term {
                Term::Intercept => {
                    rows.push(DetailRow::new(DetailKind::Intercept, INTERCEPT_NAME, None, c.endowments, c.coefficients, c.interaction));
                    i += 1;
                }
                Term::Continuous | Term::Squared { .. } => {
                    rows.push(DetailRow::new(DetailKind::Term, &c.label.variable, None, c.endowments, c.coefficients, c.interaction));
                    i += 1;
                }
                Term::Level(_) => {
                    let var = &c.label.variable;
                    let end = columns[i..]
                        .iter()
                        .position(|x| &x.label.variable != var)
                        .map_or(columns.len(), |p| i + p);
                    let group = &columns[i..end];
                    rows.push(DetailRow::new(
                        DetailKind::Subtotal,
                        var,
                        None,
                        group.iter().map(|x| x.endowments).sum(),
                        group.iter().map(|x| x.coefficients).sum(),
                        group.iter().map(|x| x.interaction).sum(),
                    ));
                    for x in group {
                        rows.push(DetailRow::new(DetailKind::Level, var, x.label.level(), x.endowments, x.coefficients, x.interaction));
                    }
                    i = end;
                }
            }
        }
        let leaves = || rows.iter().filter(|r| r.kind != DetailKind::Subtotal);
        let overall = DetailRow::new(
            DetailKind::Term,
            "Overall",
            None,
            leaves().map(|r| r.endowments).sum(),
            leaves().map(|r| r.coefficients).sum(),
            leaves().map(|r| r.interaction).sum(),
        );
        DetailedTable {
            reference,
            rows,
            overall,
        }
    }
}

/// Per-variable detail of a threefold result, with variables (and levels)
/// ordered as declared in `spec`.
pub fn detailed_by_variable(result: &ThreefoldResult, spec: &ModelSpec) -> DetailedTable {
    let rank = |c: &ThreefoldColumn| -> (usize, usize) {
        if c.label.term == Term::Intercept {
            return (0, 0);
        }
        let Some(vi) = spec.predictors.iter().position(|p| p.name == c.label.variable) else {
            return (usize::MAX, 0);
        };
        let li = match (&spec.predictors[vi].kind, c.label.level()) {
            (VariableKind::Categorical { levels, .. }, Some(l)) => levels.iter().position(|x| x == l).unwrap_or(usize::MAX),
            _ => 0,
        };
        (vi + 1, li)
    };
    let mut columns = result.per_column.clone();
    columns.sort_by_key(|c| rank(c));
    DetailedTable::from_columns(&columns, result.reference)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub tolerance: f64,
    pub checks: Vec<IdentityCheck>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// |lhs − rhs| relative to the magnitude of the terms involved.
pub fn relative_error(lhs: f64, rhs: f64, scale: f64) -> f64 {
    let diff = (lhs - rhs).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(lhs.abs()).max(rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

fn check(identity: &str, lhs: f64, rhs: f64, scale: f64) -> IdentityCheck {
    let relative_error = relative_error(lhs, rhs, scale);
    IdentityCheck {
        identity: identity.to_string(),
        lhs,
        rhs,
        relative_error,
        passed: relative_error <= IDENTITY_TOLERANCE,
    }
}

/// Verifies the algebraic bridge between a twofold and a threefold result
/// computed from the same estimates.
///
/// Same reference: explained = endowments, unexplained = coefficients + interaction.
/// Male twofold against female threefold (or the reverse):
/// explained = endowments + interaction, unexplained = coefficients.
/// Both results' additivity and per-column sums are checked as well.
pub fn consistency_check(two: &TwofoldResult, three: &ThreefoldResult) -> ConsistencyReport {
    let terms = three.endowments.abs() + three.coefficients.abs() + three.interaction.abs();
    let mut checks = vec![
        check("twofold: explained + unexplained = gap", two.explained + two.unexplained, two.gap, two.explained.abs() + two.unexplained.abs()),
        check("threefold: endowments + coefficients + interaction = gap", three.endowments + three.coefficients + three.interaction, three.gap, terms),
        check("gaps agree", two.gap, three.gap, two.gap.abs()),
        check("discrimination = coefficients + interaction", three.discrimination, three.coefficients + three.interaction, terms),
    ];
    if two.reference == three.reference {
        checks.push(check("explained = endowments", two.explained, three.endowments, terms));
        checks.push(check(
            "unexplained = coefficients + interaction",
            two.unexplained,
            three.coefficients + three.interaction,
            terms,
        ));
    } else {
        checks.push(check("explained = endowments + interaction", two.explained, three.endowments + three.interaction, terms));
        checks.push(check("unexplained = coefficients", two.unexplained, three.coefficients, terms));
    }
    let col_sum = |f: fn(&ThreefoldColumn) -> f64| three.per_column.iter().map(f).sum::<f64>();
    checks.push(check("per-column endowments sum", col_sum(|c| c.endowments), three.endowments, terms));
    checks.push(check("per-column coefficients sum", col_sum(|c| c.coefficients), three.coefficients, terms));
    checks.push(check("per-column interaction sum", col_sum(|c| c.interaction), three.interaction, terms));
    ConsistencyReport {
        tolerance: IDENTITY_TOLERANCE,
        checks,
    }
}
