//! Seeded synthetic wage data with known group coefficient vectors.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Cell, Dataset, ModelSpec, OutcomeTransform, VariableKind};
use crate::decomposition::{threefold_estimates, GroupEstimate, Reference, ThreefoldResult};
use crate::design::{design_labels, ColumnLabel, Term};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    /// Level → probability; absent levels have probability 0.
    Categorical { probabilities: BTreeMap<String, f64> },
}

/// Data-generating process of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDgp {
    pub n: usize,
    pub noise_sd: f64,
    /// Keyed by design column label (`(Intercept)`, `age`, `education=primary`);
    /// absent columns have coefficient 0.
    pub coefficients: BTreeMap<String, f64>,
    /// Keyed by source predictor name.
    pub predictors: BTreeMap<String, Distribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub model: ModelSpec,
    pub group_a: GroupDgp,
    pub group_b: GroupDgp,
}

const PROBABILITY_TOLERANCE: f64 = 1e-9;

impl SyntheticSpec {
    pub fn from_json_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let spec: SyntheticSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        self.model.check()?;
        let labels: Vec<String> = design_labels(&self.model).iter().map(|l| l.to_string()).collect();
        for (name, g) in [("a", &self.group_a), ("b", &self.group_b)] {
            if g.n == 0 {
                return Err(Error::InvalidSpec(format!("empty group {name}")));
            }
            if !(g.noise_sd >= 0.0) {
                return Err(Error::InvalidSpec(format!("group {name}: noise sd must be >= 0")));
            }
            if let Some(k) = g.coefficients.keys().find(|k| !labels.contains(k)) {
                return Err(Error::InvalidSpec(format!("group {name}: `{k}` is not a design column")));
            }
            for var in &self.model.predictors {
                let dist = match &var.kind {
                    VariableKind::SquaredOf { .. } => continue,
                    _ => g.predictors.get(&var.name).ok_or_else(|| {
                        Error::InvalidSpec(format!("group {name}: no distribution for `{}`", var.name))
                    })?,
                };
                match (&var.kind, dist) {
                    (VariableKind::Continuous, Distribution::Normal { sd, .. }) => {
                        if !(*sd >= 0.0) {
                            return Err(Error::InvalidSpec(format!("group {name}: `{}` sd must be >= 0", var.name)));
                        }
                    }
                    (VariableKind::Categorical { levels, .. }, Distribution::Categorical { probabilities }) => {
                        if let Some(l) = probabilities.keys().find(|l| !levels.contains(l)) {
                            return Err(Error::InvalidSpec(format!("group {name}: `{}` has no level `{l}`", var.name)));
                        }
                        if probabilities.values().any(|p| !(*p >= 0.0)) {
                            return Err(Error::InvalidSpec(format!("group {name}: negative probability for `{}`", var.name)));
                        }
                        let total: f64 = probabilities.values().sum();
                        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                            return Err(Error::InvalidSpec(format!(
                                "group {name}: probabilities of `{}` sum to {total}",
                                var.name
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::InvalidSpec(format!(
                            "group {name}: distribution of `{}` does not match its kind",
                            var.name
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    fn column_names(&self) -> Vec<String> {
        let mut cols = vec![self.model.group_variable.clone(), self.model.outcome.clone()];
        cols.extend(self.model.predictors.iter().filter_map(|p| p.source_column().map(str::to_string)));
        cols
    }

    /// Draws the dataset: all group-a rows, then all group-b rows, from one
    /// ChaCha8 stream seeded by `seed`.
    pub fn generate(&self) -> Result<Dataset> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let labels = design_labels(&self.model);
        let mut rows = Vec::with_capacity(self.group_a.n + self.group_b.n);
        for (label, g) in [(&self.model.group_a_label, &self.group_a), (&self.model.group_b_label, &self.group_b)] {
            let coef = coefficient_vector(g, &labels);
            let samplers = self.samplers(g)?;
            for _ in 0..g.n {
                let mut cells = Vec::new();
                let mut continuous: BTreeMap<&str, f64> = BTreeMap::new();
                let mut chosen: BTreeMap<&str, &String> = BTreeMap::new();
                for (var, sampler) in self.model.predictors.iter().zip(&samplers) {
                    match (&var.kind, sampler) {
                        (VariableKind::Continuous, Sampler::Normal { mean, sd }) => {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            let v = mean + sd * z;
                            continuous.insert(&var.name, v);
                            cells.push(Cell::Number(v));
                        }
                        (VariableKind::Categorical { levels, .. }, Sampler::Categorical(w)) => {
                            let level = &levels[w.sample(&mut rng)];
                            chosen.insert(&var.name, level);
                            cells.push(Cell::Text(level.clone()));
                        }
                        (VariableKind::SquaredOf { .. }, _) => {}
                        _ => unreachable!("checked by SyntheticSpec::check"),
                    }
                }
                let x: Vec<f64> = labels
                    .iter()
                    .map(|l| match &l.term {
                        Term::Intercept => 1.0,
                        Term::Continuous => continuous[l.variable.as_str()],
                        Term::Squared { base } => continuous[base.as_str()].powi(2),
                        Term::Level(level) => f64::from(chosen[l.variable.as_str()] == level),
                    })
                    .collect();
                let noise: f64 = StandardNormal.sample(&mut rng);
                let lp: f64 = x.iter().zip(coef.iter()).map(|(a, b)| a * b).sum::<f64>() + g.noise_sd * noise;
                let outcome = match self.model.outcome_transform {
                    OutcomeTransform::Identity => lp,
                    OutcomeTransform::Log => lp.exp(),
                };
                let mut row = vec![Cell::Text(label.clone()), Cell::Number(outcome)];
                row.extend(cells);
                rows.push(row);
            }
        }
        Dataset::new(self.column_names(), rows)
    }

    fn samplers(&self, g: &GroupDgp) -> Result<Vec<Sampler>> {
        self.model
            .predictors
            .iter()
            .map(|var| match (&var.kind, g.predictors.get(&var.name)) {
                (VariableKind::Continuous, Some(Distribution::Normal { mean, sd })) => Ok(Sampler::Normal { mean: *mean, sd: *sd }),
                (VariableKind::Categorical { levels, .. }, Some(Distribution::Categorical { probabilities })) => {
                    let w: Vec<f64> = levels.iter().map(|l| probabilities.get(l).copied().unwrap_or(0.0)).collect();
                    WeightedIndex::new(w)
                        .map(Sampler::Categorical)
                        .map_err(|e| Error::InvalidSpec(format!("`{}`: {e}", var.name)))
                }
                _ => Ok(Sampler::Derived),
            })
            .collect()
    }

    /// Population mean of every design column for one group.
    pub fn population_means(&self, g: &GroupDgp) -> DVector<f64> {
        let labels = design_labels(&self.model);
        DVector::from_iterator(
            labels.len(),
            labels.iter().map(|l| match &l.term {
                Term::Intercept => 1.0,
                Term::Continuous => match g.predictors.get(&l.variable) {
                    Some(Distribution::Normal { mean, .. }) => *mean,
                    _ => 0.0,
                },
                Term::Squared { base } => match g.predictors.get(base) {
                    Some(Distribution::Normal { mean, sd }) => mean * mean + sd * sd,
                    _ => 0.0,
                },
                Term::Level(level) => match g.predictors.get(&l.variable) {
                    Some(Distribution::Categorical { probabilities }) => probabilities.get(level).copied().unwrap_or(0.0),
                    _ => 0.0,
                },
            }),
        )
    }

    /// Threefold decomposition evaluated at the true coefficients and
    /// population means.
    pub fn true_threefold(&self, reference: Reference) -> Result<ThreefoldResult> {
        let labels = design_labels(&self.model);
        let coef_a = coefficient_vector(&self.group_a, &labels);
        let coef_b = coefficient_vector(&self.group_b, &labels);
        let mean_a = self.population_means(&self.group_a);
        let mean_b = self.population_means(&self.group_b);
        threefold_estimates(
            &GroupEstimate { coefficients: &coef_a, means: &mean_a, labels: &labels },
            &GroupEstimate { coefficients: &coef_b, means: &mean_b, labels: &labels },
            reference,
        )
    }
}

enum Sampler {
    Normal { mean: f64, sd: f64 },
    Categorical(WeightedIndex<f64>),
    Derived,
}

fn coefficient_vector(g: &GroupDgp, labels: &[ColumnLabel]) -> DVector<f64> {
    DVector::from_iterator(
        labels.len(),
        labels.iter().map(|l| g.coefficients.get(&l.to_string()).copied().unwrap_or(0.0)),
    )
}
