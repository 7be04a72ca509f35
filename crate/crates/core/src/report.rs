//! Report objects and their text / JSON / CSV renderings.
//!
//! Each report is built once from the estimation results; every output
//! format renders that same object. Text shows three decimals, JSON and CSV
//! carry full precision.

use std::fmt::Write as _;

use serde::Serialize;

use crate::data::{ModelSpec, OutcomeTransform};
use crate::decomposition::{
    consistency_check, detailed_by_variable, twofold, threefold, ConsistencyReport, DetailKind, DetailRow, Reference,
};
use crate::design::{column_means, MeanVector};
use crate::error::Result;
use crate::inference::ComponentIntervals;
use crate::ols::{coefficient_intervals, significance_stars, OlsFit, Stars};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub group: String,
    pub observations: usize,
    pub coefficients: Vec<CoefficientRow>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub residual_std_error: f64,
    pub df_residual: usize,
    pub f_statistic: f64,
    pub f_df1: usize,
    pub f_df2: usize,
    pub f_p_value: f64,
    pub f_stars: &'static str,
}

impl GroupFit {
    pub fn new(group: &str, fit: &OlsFit, level: f64) -> Result<Self> {
        let se = fit.std_errors();
        let t = fit.t_values();
        let p = fit.p_values();
        let ci = coefficient_intervals(fit, level)?;
        let stars = significance_stars(fit);
        let coefficients = (0..fit.coefficients.len())
            .map(|j| CoefficientRow {
                term: fit.labels[j].to_string(),
                estimate: fit.coefficients[j],
                std_error: se[j],
                t_value: t[j],
                p_value: p[j],
                ci_low: ci[j].low,
                ci_high: ci[j].high,
                stars: stars[j].as_str(),
            })
            .collect();
        let f_p_value = fit.f_p_value();
        Ok(GroupFit {
            group: group.to_string(),
            observations: fit.n,
            coefficients,
            r_squared: fit.r_squared,
            adj_r_squared: fit.adj_r_squared,
            residual_std_error: fit.residual_std_error,
            df_residual: fit.df_residual,
            f_statistic: fit.f_statistic,
            f_df1: fit.df_model,
            f_df2: fit.df_residual,
            f_p_value,
            f_stars: Stars::from_p(f_p_value).as_str(),
        })
    }
}

/// Side-by-side wage equations, comparison group first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub outcome: String,
    pub outcome_transform: OutcomeTransform,
    pub confidence_level: f64,
    pub dropped_rows: usize,
    pub groups: Vec<GroupFit>,
}

impl FitReport {
    pub fn new(spec: &ModelSpec, fit_a: &OlsFit, fit_b: &OlsFit, level: f64, dropped_rows: usize) -> Result<Self> {
        Ok(FitReport {
            outcome: spec.outcome.clone(),
            outcome_transform: spec.outcome_transform,
            confidence_level: level,
            dropped_rows,
            groups: vec![
                GroupFit::new(&spec.group_b_label, fit_b, level)?,
                GroupFit::new(&spec.group_a_label, fit_a, level)?,
            ],
        })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Text => Ok(self.text()),
            Format::Json => json_string(self),
            Format::Csv => self.csv(),
        }
    }

    fn csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["group", "term", "estimate", "std_error", "t_value", "p_value", "ci_low", "ci_high", "stars"])?;
            for g in &self.groups {
                for c in &g.coefficients {
                    w.write_record([
                        g.group.clone(),
                        c.term.clone(),
                        c.estimate.to_string(),
                        c.std_error.to_string(),
                        c.t_value.to_string(),
                        c.p_value.to_string(),
                        c.ci_low.to_string(),
                        c.ci_high.to_string(),
                        c.stars.to_string(),
                    ])?;
                }
                for (term, value) in [
                    ("observations", g.observations as f64),
                    ("r_squared", g.r_squared),
                    ("adj_r_squared", g.adj_r_squared),
                    ("residual_std_error", g.residual_std_error),
                    ("df_residual", g.df_residual as f64),
                    ("f_statistic", g.f_statistic),
                    ("f_p_value", g.f_p_value),
                ] {
                    w.write_record([g.group.as_str(), term, &value.to_string(), "", "", "", "", "", ""])?;
                }
            }
            Ok(())
        })
    }

    fn text(&self) -> String {
        let pct = self.confidence_level * 100.0;
        let mut rows: Vec<Vec<String>> = Vec::new();
        // intercept last, as in the usual regression table layout
        let n_terms = self.groups[0].coefficients.len();
        let order: Vec<usize> = (1..n_terms).chain(std::iter::once(0)).collect();
        for &j in &order {
            let mut row = vec![self.groups[0].coefficients[j].term.clone()];
            for g in &self.groups {
                let c = &g.coefficients[j];
                row.push(format!("{:.3}{} ({:.3}, {:.3})", c.estimate, c.stars, c.ci_low, c.ci_high));
            }
            rows.push(row);
        }
        let stat = |name: &str, f: &dyn Fn(&GroupFit) -> String| {
            let mut row = vec![name.to_string()];
            row.extend(self.groups.iter().map(f));
            row
        };
        let footer = vec![
            stat("Observations", &|g| g.observations.to_string()),
            stat("R2", &|g| format!("{:.3}", g.r_squared)),
            stat("Adjusted R2", &|g| format!("{:.3}", g.adj_r_squared)),
            stat("Residual Std. Error", &|g| format!("{:.3} (df = {})", g.residual_std_error, g.df_residual)),
            stat("F Statistic", &|g| format!("{:.3}{} (df = {}; {})", g.f_statistic, g.f_stars, g.f_df1, g.f_df2)),
        ];
        let mut header = vec![String::new()];
        header.extend(self.groups.iter().map(|g| g.group.clone()));

        let all: Vec<&Vec<String>> = std::iter::once(&header).chain(rows.iter()).chain(footer.iter()).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| all.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let line = |r: &Vec<String>| {
            let mut s = format!("{:<w$}", r[0], w = widths[0]);
            for (c, cell) in r.iter().enumerate().skip(1) {
                let _ = write!(s, "  {:>w$}", cell, w = widths[c]);
            }
            s.push('\n');
            s
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)) + "\n";
        let mut out = format!("Dependent variable: {}", self.outcome);
        if self.outcome_transform == OutcomeTransform::Log {
            out.push_str(" (log)");
        }
        let _ = writeln!(out, "   [{pct}% confidence intervals]");
        out.push_str(&rule);
        out.push_str(&line(&header));
        out.push_str(&rule);
        rows.iter().for_each(|r| out.push_str(&line(r)));
        out.push_str(&rule);
        footer.iter().for_each(|r| out.push_str(&line(r)));
        out.push_str(&rule);
        out.push_str("Note: *p<0.1; **p<0.05; ***p<0.01\n");
        if self.dropped_rows > 0 {
            let _ = writeln!(out, "{} rows dropped (missing values or unknown group)", self.dropped_rows);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwofoldSummary {
    pub explained: f64,
    pub unexplained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreefoldSummary {
    pub endowments: f64,
    pub coefficients: f64,
    pub interaction: f64,
    pub discrimination: f64,
    pub counterfactual_wage_a: f64,
}

/// Aggregate and per-variable decomposition for one reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub reference: Reference,
    pub group_a: String,
    pub group_b: String,
    pub outcome: String,
    pub dropped_rows: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub gap: f64,
    pub twofold: TwofoldSummary,
    pub threefold: ThreefoldSummary,
    /// endowments + coefficients + interaction − gap.
    pub additivity_residual: f64,
    pub detail: Vec<DetailRow>,
    pub overall: DetailRow,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<ComponentIntervals>,
}

impl DecompositionReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        spec: &ModelSpec,
        fit_a: &OlsFit,
        fit_b: &OlsFit,
        means_a: &MeanVector,
        means_b: &MeanVector,
        reference: Reference,
        dropped_rows: usize,
        bootstrap: Option<ComponentIntervals>,
    ) -> Result<Self> {
        let two = twofold(fit_a, fit_b, means_a, means_b, reference)?;
        let three = threefold(fit_a, fit_b, means_a, means_b, reference)?;
        let table = detailed_by_variable(&three, spec);
        Ok(DecompositionReport {
            reference,
            group_a: spec.group_a_label.clone(),
            group_b: spec.group_b_label.clone(),
            outcome: spec.outcome.clone(),
            dropped_rows,
            mean_a: three.mean_a,
            mean_b: three.mean_b,
            gap: three.gap,
            twofold: TwofoldSummary {
                explained: two.explained,
                unexplained: two.unexplained,
            },
            threefold: ThreefoldSummary {
                endowments: three.endowments,
                coefficients: three.coefficients,
                interaction: three.interaction,
                discrimination: three.discrimination,
                counterfactual_wage_a: three.counterfactual_wage_a,
            },
            additivity_residual: three.additivity_residual(),
            detail: table.rows,
            overall: table.overall,
            bootstrap,
        })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Text => Ok(self.text()),
            Format::Json => json_string(self),
            Format::Csv => self.csv(),
        }
    }

    fn interval(&self, key: &str) -> (Option<f64>, Option<f64>) {
        match self.bootstrap.as_ref().and_then(|b| b.get(key)) {
            Some(c) => (Some(c.low), Some(c.high)),
            None => (None, None),
        }
    }

    fn csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["section", "label", "component", "value", "low", "high"])?;
            let mut put = |section: &str, label: &str, component: &str, value: f64, key: Option<String>| {
                let (lo, hi) = key.map_or((None, None), |k| self.interval(&k));
                w.write_record([section, label, component, &value.to_string(), &opt(lo), &opt(hi)])
            };
            put("aggregate", "mean", &self.group_a, self.mean_a, None)?;
            put("aggregate", "mean", &self.group_b, self.mean_b, None)?;
            put("aggregate", "gap", "total", self.gap, Some("total.gap".into()))?;
            put("aggregate", "twofold", "explained", self.twofold.explained, None)?;
            put("aggregate", "twofold", "unexplained", self.twofold.unexplained, None)?;
            let t = &self.threefold;
            for (name, v) in [
                ("endowments", t.endowments),
                ("coefficients", t.coefficients),
                ("interaction", t.interaction),
                ("discrimination", t.discrimination),
            ] {
                put("aggregate", "threefold", name, v, Some(format!("total.{name}")))?;
            }
            put("aggregate", "threefold", "counterfactual_wage_a", t.counterfactual_wage_a, None)?;
            put("aggregate", "additivity", "residual", self.additivity_residual, None)?;
            for row in self.detail.iter().chain(std::iter::once(&self.overall)) {
                let section = match row.kind {
                    DetailKind::Level => "detail_level",
                    DetailKind::Subtotal => "detail_variable",
                    _ if row.variable == "Overall" => "detail_overall",
                    _ => "detail_variable",
                };
                let grouped = row.kind != DetailKind::Level && row.variable != "Overall";
                for (name, v) in [
                    ("endowments", row.endowments),
                    ("coefficients", row.coefficients),
                    ("interaction", row.interaction),
                    ("nepotism", row.nepotism),
                ] {
                    let key = (grouped && name != "nepotism").then(|| format!("{}.{name}", row.variable));
                    put(section, &row.label(), name, v, key)?;
                }
            }
            Ok(())
        })
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let t = &self.threefold;
        let _ = writeln!(
            out,
            "Oaxaca-Blinder decomposition of `{}` ({} coefficients as reference)",
            self.outcome,
            self.reference.as_str()
        );
        let agg: Vec<(String, f64, &str)> = vec![
            (format!("Mean outcome, {}", self.group_a), self.mean_a, ""),
            (format!("Mean outcome, {}", self.group_b), self.mean_b, ""),
            ("Overall gap".into(), self.gap, "total.gap"),
            ("Twofold: explained".into(), self.twofold.explained, ""),
            ("Twofold: unexplained".into(), self.twofold.unexplained, ""),
            ("Due to characteristics (endowments)".into(), t.endowments, "total.endowments"),
            ("Due to returns (coefficients)".into(), t.coefficients, "total.coefficients"),
            ("Interaction".into(), t.interaction, "total.interaction"),
            ("Due to discrimination".into(), t.discrimination, "total.discrimination"),
            (format!("{} mean without discrimination", self.group_a), t.counterfactual_wage_a, ""),
        ];
        let w = agg.iter().map(|a| a.0.chars().count()).max().unwrap_or(0);
        for (name, v, key) in &agg {
            let _ = write!(out, "{name:<w$}  {v:>12.3}");
            if let (Some(lo), Some(hi)) = self.interval(key) {
                let _ = write!(out, "  [{lo:.3}, {hi:.3}]");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "Additivity check: endowments + coefficients + interaction - gap = {:.3e}",
            self.additivity_residual
        );
        if self.dropped_rows > 0 {
            let _ = writeln!(out, "{} rows dropped (missing values or unknown group)", self.dropped_rows);
        }
        out.push('\n');

        let labels: Vec<String> = self
            .detail
            .iter()
            .map(|r| match (&r.kind, &r.level) {
                (DetailKind::Level, Some(l)) => format!("  {l}"),
                _ => r.variable.clone(),
            })
            .chain(std::iter::once("Overall".to_string()))
            .collect();
        let lw = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(8);
        let _ = writeln!(
            out,
            "{:<lw$}  {:>12}  {:>12}  {:>12}  {:>12}",
            "", "endowments", "coefficients", "interaction", "nepotism"
        );
        for (row, label) in self.detail.iter().chain(std::iter::once(&self.overall)).zip(&labels) {
            let _ = writeln!(
                out,
                "{label:<lw$}  {:>12.3}  {:>12.3}  {:>12.3}  {:>12.3}",
                row.endowments, row.coefficients, row.interaction, row.nepotism
            );
        }

        if let Some(b) = &self.bootstrap {
            let _ = writeln!(
                out,
                "\nPercentile bootstrap, B = {} ({} used, {} discarded), level {}, seed {}",
                b.config.replications, b.replicates_used, b.replicates_discarded, b.config.level, b.config.seed
            );
            let kw = b.intervals.iter().map(|c| c.key.chars().count()).max().unwrap_or(0);
            let _ = writeln!(out, "{:<kw$}  {:>12}  {:>12}  {:>12}", "", "estimate", "low", "high");
            for c in &b.intervals {
                let _ = writeln!(out, "{:<kw$}  {:>12.3}  {:>12.3}  {:>12.3}", c.key, c.point, c.low, c.high);
            }
        }
        out
    }
}

/// Identity diagnostics for every reference pairing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub pairs: Vec<CheckPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckPair {
    pub twofold_reference: Reference,
    pub threefold_reference: Reference,
    pub report: ConsistencyReport,
}

impl CheckReport {
    pub fn new(fit_a: &OlsFit, fit_b: &OlsFit, xa: &crate::design::DesignMatrix, xb: &crate::design::DesignMatrix) -> Result<Self> {
        let ma = column_means(xa)?;
        let mb = column_means(xb)?;
        let mut pairs = Vec::new();
        for r2 in [Reference::Female, Reference::Male] {
            let two = twofold(fit_a, fit_b, &ma, &mb, r2)?;
            for r3 in [Reference::Female, Reference::Male] {
                let three = threefold(fit_a, fit_b, &ma, &mb, r3)?;
                pairs.push(CheckPair {
                    twofold_reference: r2,
                    threefold_reference: r3,
                    report: consistency_check(&two, &three),
                });
            }
        }
        Ok(CheckReport { pairs })
    }

    pub fn passed(&self) -> bool {
        self.pairs.iter().all(|p| p.report.passed())
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => json_string(self),
            Format::Csv => csv_string(|w| {
                w.write_record(["twofold_reference", "threefold_reference", "identity", "lhs", "rhs", "relative_error", "passed"])?;
                for p in &self.pairs {
                    for c in &p.report.checks {
                        w.write_record([
                            p.twofold_reference.as_str(),
                            p.threefold_reference.as_str(),
                            &c.identity,
                            &c.lhs.to_string(),
                            &c.rhs.to_string(),
                            &c.relative_error.to_string(),
                            if c.passed { "true" } else { "false" },
                        ])?;
                    }
                }
                Ok(())
            }),
            Format::Text => {
                let mut out = String::new();
                for p in &self.pairs {
                    let _ = writeln!(
                        out,
                        "twofold {} / threefold {}:",
                        p.twofold_reference.as_str(),
                        p.threefold_reference.as_str()
                    );
                    for c in &p.report.checks {
                        let _ = writeln!(
                            out,
                            "  [{}] {}  (rel. error {:.2e})",
                            if c.passed { "pass" } else { "FAIL" },
                            c.identity,
                            c.relative_error
                        );
                    }
                }
                let _ = writeln!(out, "{}", if self.passed() { "all identities hold" } else { "identity violations found" });
                Ok(out)
            }
        }
    }
}
