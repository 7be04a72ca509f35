//! Ordinary least squares for one group's wage equation.
//!
//! Coefficients come from a column-pivoted Householder QR of the design;
//! the normal equations are never formed. The covariance is the classical
//! homoskedastic σ̂²(X'X)⁻¹ with σ̂² = RSS / (n − k − 1).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::design::{ColumnLabel, DesignMatrix, MeanVector};
use crate::error::{Error, Result};
use crate::qr::PivotedQr;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub residual_std_error: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    /// Numerator degrees of freedom of F (regressors excluding the intercept).
    pub df_model: usize,
    /// n − k − 1.
    pub df_residual: usize,
    pub n: usize,
    pub rss: f64,
    pub outcome_mean: f64,
    pub labels: Vec<ColumnLabel>,
}

/// Fits `outcome` on `design`. The first design column is taken to be the intercept.
pub fn fit_ols(design: &DesignMatrix, outcome: &DVector<f64>) -> Result<OlsFit> {
    let x = &design.values;
    let (n, p) = x.shape();
    if outcome.len() != n {
        return Err(Error::InvalidArgument(format!(
            "outcome has {} entries, design has {n} rows",
            outcome.len()
        )));
    }
    if n <= p {
        return Err(Error::TooFewObservations { n, columns: p });
    }

    let qr = PivotedQr::new(x);
    if qr.rank() < p {
        return Err(Error::RankDeficient {
            columns: qr
                .dependent_set()
                .into_iter()
                .map(|j| design.labels[j].to_string())
                .collect(),
        });
    }

    let coefficients = qr.solve(outcome);
    let residuals = outcome - x * &coefficients;
    let rss = residuals.norm_squared();
    let outcome_mean = outcome.mean();
    let tss: f64 = outcome.iter().map(|v| (v - outcome_mean).powi(2)).sum();

    let df_residual = n - p;
    let df_model = p - 1;
    let sigma2 = rss / df_residual as f64;
    let vcov = qr.xtx_inverse() * sigma2;
    let vcov = (&vcov + vcov.transpose()) * 0.5;

    let r_squared = if df_model == 0 {
        0.0
    } else if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_residual as f64;
    let f_statistic = if df_model == 0 {
        f64::NAN
    } else {
        (r_squared / df_model as f64) / ((1.0 - r_squared) / df_residual as f64)
    };

    Ok(OlsFit {
        coefficients,
        vcov,
        residual_std_error: sigma2.sqrt(),
        r_squared,
        adj_r_squared,
        f_statistic,
        df_model,
        df_residual,
        n,
        rss,
        outcome_mean,
        labels: design.labels.clone(),
    })
}

impl OlsFit {
    pub fn std_errors(&self) -> DVector<f64> {
        self.vcov.diagonal().map(|v| v.max(0.0).sqrt())
    }

    pub fn t_values(&self) -> DVector<f64> {
        self.coefficients.zip_map(&self.std_errors(), |b, se| t_ratio(b, se))
    }

    /// Two-sided p-values from Student-t with `df_residual` degrees of freedom.
    pub fn p_values(&self) -> DVector<f64> {
        let t = student_t(self.df_residual);
        self.t_values().map(|tv| two_sided_p(&t, tv))
    }

    pub fn f_p_value(&self) -> f64 {
        if !self.f_statistic.is_finite() {
            return if self.f_statistic == f64::INFINITY { 0.0 } else { f64::NAN };
        }
        FisherSnedecor::new(self.df_model as f64, self.df_residual as f64)
            .map(|f| f.sf(self.f_statistic))
            .unwrap_or(f64::NAN)
    }

    /// α̂'X̄ for a mean vector on the same columns.
    pub fn predict_mean(&self, means: &MeanVector) -> f64 {
        self.coefficients.dot(&means.values)
    }
}

fn t_ratio(estimate: f64, se: f64) -> f64 {
    if se > 0.0 {
        estimate / se
    } else if estimate == 0.0 {
        0.0
    } else {
        estimate.signum() * f64::INFINITY
    }
}

fn student_t(df: usize) -> StudentsT {
    StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom")
}

/// Upper quantile of Student-t. statrs' own inverse loses about four digits
/// at large df, so its answer only seeds a few Newton steps on the CDF.
pub(crate) fn t_quantile(df: usize, p: f64) -> f64 {
    use statrs::distribution::Continuous;
    let t = student_t(df);
    let mut q = t.inverse_cdf(p);
    for _ in 0..8 {
        let step = (t.cdf(q) - p) / t.pdf(q);
        q -= step;
        if step.abs() <= 1e-15 * q.abs().max(1.0) {
            break;
        }
    }
    q
}

fn two_sided_p(t: &StudentsT, tv: f64) -> f64 {
    if tv.is_infinite() {
        return 0.0;
    }
    (2.0 * t.sf(tv.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Symmetric Student-t intervals, estimate ± t_{(1+level)/2, n−k−1} · se.
pub fn coefficient_intervals(fit: &OlsFit, level: f64) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} not in (0, 1)")));
    }
    let q = t_quantile(fit.df_residual, 0.5 + level / 2.0);
    Ok(fit
        .coefficients
        .iter()
        .zip(fit.std_errors().iter())
        .map(|(b, se)| Interval {
            low: b - q * se,
            high: b + q * se,
        })
        .collect())
}

/// Significance marker at the conventional 0.1 / 0.05 / 0.01 cut-offs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stars {
    None,
    One,
    Two,
    Three,
}

impl Stars {
    pub fn from_p(p: f64) -> Stars {
        if p < 0.01 {
            Stars::Three
        } else if p < 0.05 {
            Stars::Two
        } else if p < 0.1 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

pub fn significance_stars(fit: &OlsFit) -> Vec<Stars> {
    fit.p_values().iter().map(|&p| Stars::from_p(p)).collect()
}
