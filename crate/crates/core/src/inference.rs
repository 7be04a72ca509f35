//! Percentile bootstrap intervals for threefold decomposition components.
//!
//! Rows are resampled with replacement within each group. Replicate `r`
//! draws its indices from a ChaCha8 stream keyed by `(seed, r)`, so results
//! do not depend on how replicates are scheduled across threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_groups, Dataset, ModelSpec};
use crate::decomposition::{threefold, Reference, ThreefoldResult};
use crate::design::{build_design, column_means, DesignMatrix};
use crate::error::{Error, Result};
use crate::ols::fit_ols;

/// Share of discarded (rank-deficient) replicates above which the bootstrap fails.
pub const MAX_DISCARD_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn check(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidArgument(format!(
                "bootstrap needs at least 2 replications, got {}",
                self.replications
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {} not in (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentInterval {
    /// `total.<component>` or `<variable>.<component>`.
    pub key: String,
    pub point: f64,
    pub low: f64,
    pub high: f64,
    /// Standard deviation over the retained replicates.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentIntervals {
    pub config: BootstrapConfig,
    pub reference: Reference,
    pub replicates_used: usize,
    pub replicates_discarded: usize,
    pub intervals: Vec<ComponentInterval>,
}

impl ComponentIntervals {
    pub fn get(&self, key: &str) -> Option<&ComponentInterval> {
        self.intervals.iter().find(|c| c.key == key)
    }
}

/// Keys and values of every bootstrapped statistic of one threefold result,
/// in a fixed order: totals first, then each variable's three components.
pub fn component_statistics(result: &ThreefoldResult) -> Vec<(String, f64)> {
    let mut out = vec![
        ("total.gap".to_string(), result.gap),
        ("total.endowments".to_string(), result.endowments),
        ("total.coefficients".to_string(), result.coefficients),
        ("total.interaction".to_string(), result.interaction),
        ("total.discrimination".to_string(), result.discrimination),
    ];
    for v in &result.per_variable_group {
        out.push((format!("{}.endowments", v.variable), v.endowments));
        out.push((format!("{}.coefficients", v.variable), v.coefficients));
        out.push((format!("{}.interaction", v.variable), v.interaction));
    }
    out
}

/// Resampled row indices for replicate `replicate`: `n_a` draws from group a
/// then `n_b` draws from group b.
pub fn replicate_indices(seed: u64, replicate: usize, n_a: usize, n_b: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    let a = (0..n_a).map(|_| rng.random_range(0..n_a)).collect();
    let b = (0..n_b).map(|_| rng.random_range(0..n_b)).collect();
    (a, b)
}

/// Linear-interpolation sample quantile of sorted data (R type 7).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Designs and outcomes for both groups, built once.
#[derive(Debug, Clone)]
pub struct GroupDesigns {
    pub design_a: DesignMatrix,
    pub outcome_a: DVector<f64>,
    pub design_b: DesignMatrix,
    pub outcome_b: DVector<f64>,
}

impl GroupDesigns {
    pub fn build(dataset: &Dataset, spec: &ModelSpec) -> Result<Self> {
        let split = split_groups(dataset, spec)?;
        let (design_a, outcome_a) = build_design(&split.a, spec)?;
        let (design_b, outcome_b) = build_design(&split.b, spec)?;
        Ok(GroupDesigns {
            design_a,
            outcome_a,
            design_b,
            outcome_b,
        })
    }

    /// Fits both groups on the given rows and decomposes.
    pub fn threefold_on(&self, rows_a: &[usize], rows_b: &[usize], reference: Reference) -> Result<ThreefoldResult> {
        let xa = self.design_a.select_rows(rows_a);
        let xb = self.design_b.select_rows(rows_b);
        let ya = DVector::from_iterator(rows_a.len(), rows_a.iter().map(|&i| self.outcome_a[i]));
        let yb = DVector::from_iterator(rows_b.len(), rows_b.iter().map(|&i| self.outcome_b[i]));
        threefold_from_designs(&xa, &ya, &xb, &yb, reference)
    }

    pub fn threefold(&self, reference: Reference) -> Result<ThreefoldResult> {
        threefold_from_designs(&self.design_a, &self.outcome_a, &self.design_b, &self.outcome_b, reference)
    }
}

fn threefold_from_designs(
    xa: &DesignMatrix,
    ya: &DVector<f64>,
    xb: &DesignMatrix,
    yb: &DVector<f64>,
    reference: Reference,
) -> Result<ThreefoldResult> {
    let fit_a = fit_ols(xa, ya)?;
    let fit_b = fit_ols(xb, yb)?;
    threefold(&fit_a, &fit_b, &column_means(xa)?, &column_means(xb)?, reference)
}

pub fn bootstrap_decomposition(
    dataset: &Dataset,
    spec: &ModelSpec,
    reference: Reference,
    config: &BootstrapConfig,
) -> Result<ComponentIntervals> {
    config.check()?;
    let designs = GroupDesigns::build(dataset, spec)?;
    bootstrap_designs(&designs, reference, config)
}

/// Bootstrap over prebuilt group designs. Resampling design rows is
/// equivalent to resampling dataset rows and rebuilding, since encoding is row-wise.
pub fn bootstrap_designs(designs: &GroupDesigns, reference: Reference, config: &BootstrapConfig) -> Result<ComponentIntervals> {
    config.check()?;
    let point = component_statistics(&designs.threefold(reference)?);
    let n_a = designs.design_a.n_rows();
    let n_b = designs.design_b.n_rows();

    let replicates: Vec<Option<Vec<f64>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let (ia, ib) = replicate_indices(config.seed, r, n_a, n_b);
            match designs.threefold_on(&ia, &ib, reference) {
                Ok(res) => Ok(Some(component_statistics(&res).into_iter().map(|(_, v)| v).collect())),
                Err(Error::RankDeficient { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let kept: Vec<&Vec<f64>> = replicates.iter().flatten().collect();
    let discarded = config.replications - kept.len();
    if discarded as f64 > MAX_DISCARD_FRACTION * config.replications as f64 || kept.len() < 2 {
        return Err(Error::BootstrapDegenerate {
            discarded,
            total: config.replications,
        });
    }

    let alpha = 1.0 - config.level;
    let intervals = point
        .into_iter()
        .enumerate()
        .map(|(k, (key, value))| {
            let mut draws: Vec<f64> = kept.iter().map(|v| v[k]).collect();
            draws.sort_by(f64::total_cmp);
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            ComponentInterval {
                key,
                point: value,
                low: percentile(&draws, alpha / 2.0),
                high: percentile(&draws, 1.0 - alpha / 2.0),
                std_error: var.sqrt(),
            }
        })
        .collect();

    Ok(ComponentIntervals {
        config: *config,
        reference,
        replicates_used: kept.len(),
        replicates_discarded: discarded,
        intervals,
    })
}
