//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical failure
//! (rank deficiency, degenerate bootstrap, failed identity check), 3 I/O failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::data::{split_groups, validate, CsvOptions, Dataset, ModelSpec};
use crate::decomposition::Reference;
use crate::design::{build_design, column_means};
use crate::error::{Error, ErrorClass, Result};
use crate::inference::{bootstrap_designs, BootstrapConfig, GroupDesigns};
use crate::mca::{fit_mca, infer_variables, score_individuals, Anchor};
use crate::ols::fit_ols;
use crate::report::{CheckReport, DecompositionReport, FitReport, Format};
use crate::synth::SyntheticSpec;

#[derive(Debug, Parser)]
#[command(name = "wagegap", version, about = "Oaxaca-Blinder wage-gap decomposition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the wage equation of each group.
    Fit(RunArgs),
    /// Twofold and threefold decomposition with per-variable detail.
    Decompose(RunArgs),
    /// Verify decomposition identities on the fitted data.
    Check(RunArgs),
    /// Append an MCA socioeconomic score column to a CSV.
    Score(ScoreArgs),
    /// Write a synthetic dataset from a data-generating process spec.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    Female,
    Male,
}

impl From<ReferenceArg> for Reference {
    fn from(r: ReferenceArg) -> Self {
        match r {
            ReferenceArg::Female => Reference::Female,
            ReferenceArg::Male => Reference::Male,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Micro-data CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Model specification (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Coefficient vector used as the non-discriminatory wage structure.
    #[arg(long, value_enum, default_value = "female")]
    pub reference: ReferenceArg,
    /// Bootstrap replications; omit to skip the bootstrap.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Confidence level for coefficient and bootstrap intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Additional spelling of a missing cell, e.g. NA.
    #[arg(long)]
    pub na: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Asset CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Score configuration (JSON): variables, optional anchor and score column name.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub na: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Data-generating process (JSON).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the seed in the spec file.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Resolved settings of a `fit` / `decompose` / `check` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub model: PathBuf,
    pub reference: Reference,
    pub bootstrap: Option<BootstrapConfig>,
    pub level: f64,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub csv: CsvOptions,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        for p in [&args.input, &args.model] {
            if !p.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{} does not exist", p.display()),
                )));
            }
        }
        if !(args.level > 0.0 && args.level < 1.0) {
            return Err(Error::InvalidArgument(format!("--level {} not in (0, 1)", args.level)));
        }
        let bootstrap = args.bootstrap.map(|b| BootstrapConfig {
            replications: b,
            level: args.level,
            seed: args.seed,
        });
        if let Some(b) = &bootstrap {
            b.check()?;
        }
        Ok(RunConfig {
            input: args.input.clone(),
            model: args.model.clone(),
            reference: args.reference.into(),
            bootstrap,
            level: args.level,
            format: args.format.into(),
            output: args.output.clone(),
            csv: CsvOptions {
                missing_sentinel: args.na.clone(),
            },
        })
    }
}

/// MCA score configuration file.
#[derive(Debug, Clone, Deserialize)]
pub struct ScoreConfig {
    pub variables: Vec<String>,
    #[serde(default)]
    pub anchor: Option<Anchor>,
    #[serde(default = "default_score_column")]
    pub score_column: String,
}

fn default_score_column() -> String {
    "se_score".to_string()
}

struct Loaded {
    spec: ModelSpec,
    designs: GroupDesigns,
    dropped: usize,
}

fn load(config: &RunConfig) -> Result<Loaded> {
    let spec = ModelSpec::from_json_path(&config.model)?;
    let dataset = Dataset::from_csv_path(&config.input, &config.csv)?;
    let report = validate(&dataset, &spec);
    if report.has_blocking_issues() {
        for line in report.lines() {
            eprintln!("{line}");
        }
        return Err(Error::Validation(format!("{} problem(s) in {}", report.lines().len(), config.input.display())));
    }
    let split = split_groups(&dataset, &spec)?;
    let (design_a, outcome_a) = build_design(&split.a, &spec)?;
    let (design_b, outcome_b) = build_design(&split.b, &spec)?;
    Ok(Loaded {
        spec,
        designs: GroupDesigns {
            design_a,
            outcome_a,
            design_b,
            outcome_b,
        },
        dropped: split.dropped,
    })
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

pub fn cmd_fit(config: &RunConfig) -> Result<String> {
    let l = load(config)?;
    let fit_a = fit_ols(&l.designs.design_a, &l.designs.outcome_a)?;
    let fit_b = fit_ols(&l.designs.design_b, &l.designs.outcome_b)?;
    FitReport::new(&l.spec, &fit_a, &fit_b, config.level, l.dropped)?.render(config.format)
}

pub fn decomposition_report(config: &RunConfig) -> Result<DecompositionReport> {
    let l = load(config)?;
    let d = &l.designs;
    let fit_a = fit_ols(&d.design_a, &d.outcome_a)?;
    let fit_b = fit_ols(&d.design_b, &d.outcome_b)?;
    let bootstrap = match &config.bootstrap {
        Some(b) => Some(bootstrap_designs(d, config.reference, b)?),
        None => None,
    };
    DecompositionReport::new(
        &l.spec,
        &fit_a,
        &fit_b,
        &column_means(&d.design_a)?,
        &column_means(&d.design_b)?,
        config.reference,
        l.dropped,
        bootstrap,
    )
}

pub fn cmd_decompose(config: &RunConfig) -> Result<String> {
    decomposition_report(config)?.render(config.format)
}

pub fn cmd_check(config: &RunConfig) -> Result<(bool, String)> {
    let l = load(config)?;
    let d = &l.designs;
    let fit_a = fit_ols(&d.design_a, &d.outcome_a)?;
    let fit_b = fit_ols(&d.design_b, &d.outcome_b)?;
    let report = CheckReport::new(&fit_a, &fit_b, &d.design_a, &d.design_b)?;
    Ok((report.passed(), report.render(config.format)?))
}

pub fn cmd_score(args: &ScoreArgs) -> Result<String> {
    let config: ScoreConfig = serde_json::from_str(&std::fs::read_to_string(&args.model)?)?;
    let raw = std::fs::read(&args.input)?;
    let options = CsvOptions {
        missing_sentinel: args.na.clone(),
    };
    let dataset = Dataset::from_csv_reader(raw.as_slice(), &options)?;
    if dataset.column_index(&config.score_column).is_some() {
        return Err(Error::Validation(format!("column `{}` already exists", config.score_column)));
    }
    let variables = infer_variables(&dataset, &config.variables)?;
    let model = fit_mca(&dataset, &variables, config.anchor.as_ref())?;
    let scores = score_individuals(&model, &dataset)?;

    // Re-emit the original fields verbatim, plus the score.
    let mut rdr = csv::Reader::from_reader(raw.as_slice());
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = rdr.headers()?.clone();
    header.push_field(&config.score_column);
    wtr.write_record(&header)?;
    for (record, score) in rdr.records().zip(&scores) {
        let mut record = record?;
        record.push_field(&score.map(|s| s.to_string()).unwrap_or_default());
        wtr.write_record(&record)?;
    }
    let bytes = wtr.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 input"))
}

pub fn cmd_synth(spec: &SyntheticSpec, output: &Path) -> Result<()> {
    let dataset = spec.generate()?;
    let file = std::fs::File::create(output)?;
    dataset.write_csv(std::io::BufWriter::new(file))
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Fit(a) => {
            let config = RunConfig::from_args(&a)?;
            emit(&cmd_fit(&config)?, config.output.as_deref())?;
        }
        Command::Decompose(a) => {
            let config = RunConfig::from_args(&a)?;
            emit(&cmd_decompose(&config)?, config.output.as_deref())?;
        }
        Command::Check(a) => {
            let config = RunConfig::from_args(&a)?;
            let (passed, text) = cmd_check(&config)?;
            emit(&text, config.output.as_deref())?;
            return Ok(passed);
        }
        Command::Score(a) => {
            let text = cmd_score(&a)?;
            emit(&text, a.output.as_deref())?;
        }
        Command::Synth(a) => {
            let mut spec = SyntheticSpec::from_json_path(&a.model)?;
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            cmd_synth(&spec, &a.output)?;
        }
    }
    Ok(true)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: decomposition identities violated");
            ExitCode::from(ErrorClass::Numerical.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code())
        }
    }
}
