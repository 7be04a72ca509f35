//! Socioeconomic score from categorical asset variables by multiple
//! correspondence analysis of the complete-disjunctive indicator matrix.
//!
//! With Z the n×J indicator matrix over Q variables, P = Z/(nQ), row masses
//! r_i = 1/n and column masses c_j = n_j/(nQ), the fitted object is the SVD of
//! S = D_r^{-1/2} (P − r c') D_c^{-1/2}. Only the first dimension is kept.
//! An individual's score is its row principal coordinate on that dimension,
//! i.e. the average of the standard coordinates of its Q categories.

use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::data::{Cell, Dataset, VariableKind, VariableSpec};
use crate::error::{Error, Result};

/// Category whose coordinate is made positive, fixing the axis orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub variable: String,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCoordinate {
    pub variable: String,
    pub level: String,
    /// Column mass c_j.
    pub mass: f64,
    /// Standard coordinate on dimension 1.
    pub standard: f64,
    /// Principal coordinate (standard × first singular value).
    pub principal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McaModel {
    pub variables: Vec<String>,
    pub category_coordinates: Vec<CategoryCoordinate>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub total_inertia: f64,
    pub anchor: Anchor,
    /// Rows used for fitting after listwise deletion.
    pub n_fit: usize,
}

impl McaModel {
    pub fn first_inertia(&self) -> f64 {
        self.singular_values[0].powi(2)
    }

    pub fn coordinate(&self, variable: &str, level: &str) -> Option<&CategoryCoordinate> {
        self.category_coordinates
            .iter()
            .find(|c| c.variable == variable && c.level == level)
    }
}

/// Levels declared for a categorical spec, or an error naming the variable.
fn declared_levels(var: &VariableSpec) -> Result<&[String]> {
    match &var.kind {
        VariableKind::Categorical { levels, .. } => Ok(levels),
        _ => Err(Error::Mca(format!("`{}` is not categorical", var.name))),
    }
}

fn resolve_columns(dataset: &Dataset, variables: &[VariableSpec]) -> Result<Vec<usize>> {
    variables
        .iter()
        .map(|v| {
            dataset
                .column_index(&v.name)
                .ok_or_else(|| Error::Validation(format!("missing column `{}`", v.name)))
        })
        .collect()
}

pub fn fit_mca(dataset: &Dataset, variables: &[VariableSpec], anchor: Option<&Anchor>) -> Result<McaModel> {
    if variables.len() < 2 {
        return Err(Error::Mca("at least two variables are required".into()));
    }
    let cols = resolve_columns(dataset, variables)?;

    // Level index of every complete row, per variable.
    let mut coded: Vec<Vec<usize>> = Vec::new();
    for (r, row) in dataset.rows().iter().enumerate() {
        if cols.iter().any(|&c| row[c].is_missing()) {
            continue;
        }
        let mut codes = Vec::with_capacity(cols.len());
        for (var, &c) in variables.iter().zip(&cols) {
            let levels = declared_levels(var)?;
            let cell = &row[c];
            let k = levels.iter().position(|l| cell.matches_level(l)).ok_or_else(|| Error::UnknownLevel {
                row: r + 1,
                column: var.name.clone(),
                level: cell.to_string(),
            })?;
            codes.push(k);
        }
        coded.push(codes);
    }
    let n = coded.len();
    if n < 2 {
        return Err(Error::Mca(format!("{n} complete rows, need at least 2")));
    }

    // Observed categories only; unobserved levels carry zero mass.
    let q = variables.len();
    let mut categories: Vec<(usize, usize)> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for (v, var) in variables.iter().enumerate() {
        let levels = declared_levels(var)?;
        let mut per_level = vec![0usize; levels.len()];
        for codes in &coded {
            per_level[codes[v]] += 1;
        }
        let observed = per_level.iter().filter(|&&c| c > 0).count();
        if observed < 2 {
            return Err(Error::Mca(format!(
                "variable `{}` has a single observed level",
                var.name
            )));
        }
        for (k, &count) in per_level.iter().enumerate() {
            if count > 0 {
                categories.push((v, k));
                counts.push(count as f64);
            }
        }
    }
    let j_total = categories.len();
    let nq = (n * q) as f64;
    let masses: Vec<f64> = counts.iter().map(|c| c / nq).collect();
    let mut column_of = vec![Vec::new(); q];
    for (j, &(v, k)) in categories.iter().enumerate() {
        if column_of[v].len() <= k {
            column_of[v].resize(k + 1, usize::MAX);
        }
        column_of[v][k] = j;
    }

    let r = 1.0 / n as f64;
    let mut s = DMatrix::zeros(n, j_total);
    for (i, codes) in coded.iter().enumerate() {
        for (j, &c) in masses.iter().enumerate() {
            s[(i, j)] = -r * c / (r * c).sqrt();
        }
        for (v, &k) in codes.iter().enumerate() {
            let j = column_of[v][k];
            let c = masses[j];
            s[(i, j)] = (1.0 / nq - r * c) / (r * c).sqrt();
        }
    }

    let total_inertia = s.norm_squared();
    let svd = s.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma1 = singular_values[0];
    if !(sigma1 > 1e-12) {
        return Err(Error::Mca("indicator matrix carries no inertia (all rows identical)".into()));
    }
    let lead = order[0];
    let mut standard: Vec<f64> = (0..j_total).map(|j| v_t[(lead, j)] / masses[j].sqrt()).collect();

    let anchor = match anchor {
        Some(a) => a.clone(),
        None => Anchor {
            variable: variables[0].name.clone(),
            level: declared_levels(&variables[0])?.last().cloned().unwrap_or_default(),
        },
    };
    let anchor_col = categories
        .iter()
        .position(|&(v, k)| {
            variables[v].name == anchor.variable && declared_levels(&variables[v]).map(|l| l[k] == anchor.level).unwrap_or(false)
        })
        .ok_or_else(|| {
            Error::Mca(format!(
                "anchor `{}={}` is not an observed category",
                anchor.variable, anchor.level
            ))
        })?;
    if standard[anchor_col] < 0.0 {
        standard.iter_mut().for_each(|x| *x = -*x);
    }

    let category_coordinates = categories
        .iter()
        .enumerate()
        .map(|(j, &(v, k))| CategoryCoordinate {
            variable: variables[v].name.clone(),
            level: declared_levels(&variables[v]).map(|l| l[k].clone()).unwrap_or_default(),
            mass: masses[j],
            standard: standard[j],
            principal: standard[j] * sigma1,
        })
        .collect();

    Ok(McaModel {
        variables: variables.iter().map(|v| v.name.clone()).collect(),
        category_coordinates,
        singular_values,
        total_inertia,
        anchor,
        n_fit: n,
    })
}

/// Dimension-1 row principal coordinate for each row; `None` where a
/// selected cell is missing.
pub fn score_individuals(model: &McaModel, dataset: &Dataset) -> Result<Vec<Option<f64>>> {
    let cols: Vec<usize> = model
        .variables
        .iter()
        .map(|v| {
            dataset
                .column_index(v)
                .ok_or_else(|| Error::Validation(format!("missing column `{v}`")))
        })
        .collect::<Result<_>>()?;
    let q = cols.len() as f64;
    let by_variable: Vec<Vec<&CategoryCoordinate>> = model
        .variables
        .iter()
        .map(|v| model.category_coordinates.iter().filter(|c| &c.variable == v).collect())
        .collect();

    dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(r, row)| {
            if cols.iter().any(|&c| row[c].is_missing()) {
                return Ok(None);
            }
            let mut total = 0.0;
            for ((&c, cats), name) in cols.iter().zip(&by_variable).zip(&model.variables) {
                let cell: &Cell = &row[c];
                let coord = cats.iter().find(|k| cell.matches_level(&k.level)).ok_or_else(|| Error::UnknownLevel {
                    row: r + 1,
                    column: name.clone(),
                    level: cell.to_string(),
                })?;
                total += coord.standard;
            }
            Ok(Some(total / q))
        })
        .collect()
}

/// Categorical specs for `names`, with levels as first seen in the data.
pub fn infer_variables(dataset: &Dataset, names: &[String]) -> Result<Vec<VariableSpec>> {
    names
        .iter()
        .map(|name| {
            let c = dataset
                .column_index(name)
                .ok_or_else(|| Error::Validation(format!("missing column `{name}`")))?;
            let mut levels: Vec<String> = Vec::new();
            for row in dataset.rows() {
                if !row[c].is_missing() {
                    let s = row[c].to_string();
                    if !levels.contains(&s) {
                        levels.push(s);
                    }
                }
            }
            let reference = levels.first().cloned().unwrap_or_default();
            Ok(VariableSpec {
                name: name.clone(),
                kind: VariableKind::Categorical { levels, reference },
            })
        })
        .collect()
}
