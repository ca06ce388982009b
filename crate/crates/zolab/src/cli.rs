//! The `zolab` command line.
//!
//! Every command prints one document. JSON documents carry the command, the
//! fully resolved configuration and the result. CSV output starts with a
//! `# config: {...}` comment line followed by a header and data rows.
//! Worker count and output path never change the content.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use zolab_core::folang::{parse, EvalError, Formula, DEFAULT_WORK_BUDGET};
use zolab_core::image::{sample, Color, SampleSpec};
use zolab_core::local::{local_var, min_black_count, min_white_count, BasicLocalSentence, Index, LocalConfig, LocalError};
use zolab_core::percolation::{CrossingSpec, Direction, PercolationError};
use zolab_core::thresholds::{
    classify_index, pattern_bounds, row_seed, Limit, PowerLawRate, Target, ThresholdError, ThresholdExponent,
    DEFAULT_MAX_ENUM_N, DEFAULT_SAMPLES,
};

use crate::formats::{parse_local, parse_pattern, write_csv, EstimateRow, FormatError, PatternDoc};
use crate::parallel::{par_count_profile, par_duality_check, par_estimate, par_factor, par_sweep};
use crate::pbm::{read_pbm, write_pbm_with_comments, PbmError};

#[derive(Debug, Parser)]
#[command(name = "zolab", version, about = "Random binary images, first-order sentences and threshold experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json, env = "ZOLAB_FORMAT")]
    pub format: Format,
    /// Write the output here instead of standard output.
    #[arg(long, global = true, env = "ZOLAB_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "ZOLAB_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random image and print it as plain PBM.
    Sample(SampleArgs),
    /// Decide a sentence on a PBM image.
    Eval(EvalArgs),
    /// Exact probability by enumerating every image.
    Exact(ExactArgs),
    /// Monte Carlo estimate with a Wilson interval.
    Estimate(EstimateArgs),
    /// Index k(L) of a basic local sentence.
    Index(LocalArgs),
    /// Limit of a basic local sentence under p(n) = min(c n^-alpha, 1/2).
    Classify(ClassifyArgs),
    /// Estimates along a list of sides for a power-law rate.
    Sweep(SweepArgs),
    /// Descriptions implying each local formula.
    Decompose(DecomposeArgs),
    /// Crossing estimates, or the exhaustive duality check.
    Percolate(PercolateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Caps {
    /// Largest image side that may be enumerated (hard limit 5).
    #[arg(long, default_value_t = DEFAULT_MAX_ENUM_N, env = "ZOLAB_MAX_ENUM_N")]
    pub max_enum_n: usize,
    /// Largest radius whose ball colourings may be enumerated.
    #[arg(long, default_value_t = 2, env = "ZOLAB_MAX_RADIUS")]
    pub max_radius: usize,
    /// Quantifier steps allowed per formula evaluation.
    #[arg(long, default_value_t = DEFAULT_WORK_BUDGET, env = "ZOLAB_WORK_BUDGET")]
    pub work_budget: u64,
}

impl Caps {
    fn local(&self) -> LocalConfig {
        LocalConfig { max_radius: self.max_radius, ..LocalConfig::default() }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct FormulaSource {
    /// Sentence text.
    #[arg(long, env = "ZOLAB_FORMULA")]
    pub formula: Option<String>,
    /// File holding the sentence (UTF-8, `#` comments).
    #[arg(long, env = "ZOLAB_FORMULA_FILE")]
    pub formula_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Crossing {
    /// Black, left to right.
    Blr,
    /// White, top to bottom.
    Wtb,
    /// White, left to right.
    Wlr,
    /// Black, top to bottom.
    Btb,
}

impl Crossing {
    fn spec(self) -> CrossingSpec {
        let (color, direction) = match self {
            Crossing::Blr => (Color::Black, Direction::LeftRight),
            Crossing::Wtb => (Color::White, Direction::TopBottom),
            Crossing::Wlr => (Color::White, Direction::LeftRight),
            Crossing::Btb => (Color::Black, Direction::TopBottom),
        };
        CrossingSpec { color, direction }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityColor {
    Black,
    White,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct TargetSource {
    /// Sentence text.
    #[arg(long, env = "ZOLAB_FORMULA")]
    pub formula: Option<String>,
    /// File holding the sentence.
    #[arg(long, env = "ZOLAB_FORMULA_FILE")]
    pub formula_file: Option<PathBuf>,
    /// Basic local sentence file `{r, psis}`.
    #[arg(long, env = "ZOLAB_LOCAL")]
    pub local: Option<PathBuf>,
    /// Factored pattern file `{r, templates, slots}`.
    #[arg(long, env = "ZOLAB_PATTERN")]
    pub pattern: Option<PathBuf>,
    /// Monochromatic 6-connected crossing.
    #[arg(long, value_enum)]
    pub crossing: Option<Crossing>,
    /// Even number of pixels of this colour.
    #[arg(long, value_enum)]
    pub parity: Option<ParityColor>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, env = "ZOLAB_N")]
    pub n: usize,
    #[arg(long, env = "ZOLAB_P")]
    pub p: f64,
    #[arg(long, default_value_t = 0, env = "ZOLAB_SEED")]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Plain PBM image.
    #[arg(long, env = "ZOLAB_IMAGE")]
    pub image: PathBuf,
    #[command(flatten)]
    pub source: FormulaSource,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub target: TargetSource,
    #[arg(long, env = "ZOLAB_N")]
    pub n: usize,
    #[arg(long, env = "ZOLAB_P")]
    pub p: f64,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub target: TargetSource,
    #[arg(long, env = "ZOLAB_N")]
    pub n: usize,
    /// Pixel probability; alternatively give `--alpha` and `--c`.
    #[arg(long, env = "ZOLAB_P", required_unless_present = "alpha", conflicts_with_all = ["alpha", "c"])]
    pub p: Option<f64>,
    #[arg(long, env = "ZOLAB_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "ZOLAB_C", requires = "alpha")]
    pub c: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES, env = "ZOLAB_SAMPLES")]
    pub samples: u64,
    #[arg(long, default_value_t = 0, env = "ZOLAB_SEED")]
    pub seed: u64,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LocalArgs {
    /// Basic local sentence file `{r, psis}`.
    #[arg(long, env = "ZOLAB_LOCAL")]
    pub local: PathBuf,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    #[arg(long, env = "ZOLAB_LOCAL")]
    pub local: PathBuf,
    #[arg(long, env = "ZOLAB_ALPHA")]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, env = "ZOLAB_C")]
    pub c: f64,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub target: TargetSource,
    /// Comma-separated image sides.
    #[arg(long, env = "ZOLAB_N_LIST", value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[arg(long, env = "ZOLAB_ALPHA")]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, env = "ZOLAB_C")]
    pub c: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES, env = "ZOLAB_SAMPLES")]
    pub samples: u64,
    #[arg(long, default_value_t = 0, env = "ZOLAB_SEED")]
    pub seed: u64,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(long, env = "ZOLAB_LOCAL")]
    pub local: PathBuf,
    /// Also write the factored pattern document here.
    #[arg(long)]
    pub pattern_out: Option<PathBuf>,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PercolateArgs {
    /// Check duality on every image of side `--n` instead of sampling.
    #[arg(long, conflicts_with_all = ["p", "n_list", "samples", "seed"])]
    pub duality: bool,
    #[arg(long, env = "ZOLAB_N", required_unless_present = "n_list", conflicts_with = "n_list")]
    pub n: Option<usize>,
    #[arg(long, env = "ZOLAB_N_LIST", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, env = "ZOLAB_P", required_unless_present = "duality")]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value_t = Crossing::Blr)]
    pub crossing: Crossing,
    #[arg(long, default_value_t = DEFAULT_SAMPLES, env = "ZOLAB_SAMPLES")]
    pub samples: u64,
    #[arg(long, default_value_t = 0, env = "ZOLAB_SEED")]
    pub seed: u64,
    #[command(flatten)]
    pub caps: Caps,
}

/// A failure with its machine-readable code and exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

impl CliError {
    pub fn input(code: &'static str, message: impl Into<String>) -> CliError {
        CliError { code, message: message.into(), exit: EXIT_INPUT }
    }

    fn resource(code: &'static str, message: impl Into<String>) -> CliError {
        CliError { code, message: message.into(), exit: EXIT_RESOURCE }
    }

    pub fn to_json(&self) -> String {
        json!({"error": {"code": self.code, "message": self.message, "exit": self.exit}}).to_string()
    }
}

impl From<LocalError> for CliError {
    fn from(e: LocalError) -> CliError {
        let message = e.to_string();
        match e {
            LocalError::RadiusTooLarge { .. } => CliError::resource("RadiusTooLarge", message),
            LocalError::TooManyColorings { .. } => CliError::resource("TooManyColorings", message),
            LocalError::TooManyDescriptions { .. } => CliError::resource("TooManyDescriptions", message),
            LocalError::Eval(e) => e.into(),
            LocalError::ImageTooSmall { .. } => CliError::input("ImageTooSmall", message),
            LocalError::WellFormedness(_) => CliError::input("WellFormedness", message),
            _ => CliError::input("InvalidSentence", message),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        match e {
            EvalError::WorkBudgetExceeded(_) => CliError::resource("WorkBudgetExceeded", e.to_string()),
            _ => CliError::input("EvalError", e.to_string()),
        }
    }
}

impl From<ThresholdError> for CliError {
    fn from(e: ThresholdError) -> CliError {
        let message = e.to_string();
        match e {
            ThresholdError::TooLargeToEnumerate { .. } => CliError::resource("TooLargeToEnumerate", message),
            ThresholdError::UnsupportedRate { .. } => CliError::input("UnsupportedRate", message),
            ThresholdError::NoSamples => CliError::input("NoSamples", message),
            ThresholdError::Image(_) => CliError::input("InvalidImageSpec", message),
            ThresholdError::Local(e) => e.into(),
            ThresholdError::Eval(e) => e.into(),
            ThresholdError::WellFormedness(_) => CliError::input("WellFormedness", message),
        }
    }
}

impl From<PercolationError> for CliError {
    fn from(e: PercolationError) -> CliError {
        CliError::resource("TooLargeToEnumerate", e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> CliError {
        match e {
            FormatError::Local(e) => e.into(),
            FormatError::Syntax { .. } => CliError::input("SyntaxError", e.to_string()),
            _ => CliError::input("InvalidDocument", e.to_string()),
        }
    }
}

impl From<PbmError> for CliError {
    fn from(e: PbmError) -> CliError {
        let code = match e {
            PbmError::Malformed { .. } => "MalformedPbm",
            PbmError::NonSquare { .. } => "NonSquare",
        };
        CliError::input(code, e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input("Io", format!("{}: {e}", path.display())))
}

fn read_formula(text: Option<&String>, file: Option<&PathBuf>) -> Result<Formula, CliError> {
    let text = match (text, file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => read_text(path)?,
        (None, None) => return Err(CliError::input("MissingFormula", "no formula given")),
    };
    let f = parse(&text).map_err(|e| CliError::input("SyntaxError", e.to_string()))?;
    f.check_sentence().map_err(|e| CliError::input("WellFormedness", e.to_string()))?;
    Ok(f)
}

fn read_local(path: &Path) -> Result<BasicLocalSentence, CliError> {
    Ok(parse_local(&read_text(path)?)?)
}

/// A resolved target and, for basic local sentences, the sentence itself.
struct Resolved {
    target: Target,
    local: Option<BasicLocalSentence>,
}

fn resolve_target(src: &TargetSource, caps: &Caps) -> Result<Resolved, CliError> {
    if src.formula.is_some() || src.formula_file.is_some() {
        let f = read_formula(src.formula.as_ref(), src.formula_file.as_ref())?;
        return Ok(Resolved { target: Target::Formula(f), local: None });
    }
    if let Some(path) = &src.local {
        let l = read_local(path)?;
        let fp = par_factor(&l, &caps.local())?;
        return Ok(Resolved { target: Target::Pattern(fp), local: Some(l) });
    }
    if let Some(path) = &src.pattern {
        return Ok(Resolved { target: Target::Pattern(parse_pattern(&read_text(path)?)?), local: None });
    }
    if let Some(c) = src.crossing {
        return Ok(Resolved { target: Target::Crossing(c.spec()), local: None });
    }
    if let Some(c) = src.parity {
        let color = if c == ParityColor::Black { Color::Black } else { Color::White };
        return Ok(Resolved { target: Target::EvenCount(color), local: None });
    }
    Err(CliError::input("MissingTarget", "no target given"))
}

fn check_probability(p: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(CliError::input("InvalidProbability", format!("probability {p} is outside [0, 1]")))
    }
}

fn index_value(k: Index) -> Value {
    match k {
        Index::Finite(k) => json!(k),
        Index::Infinite => json!("inf"),
    }
}

fn sentence_index(l: &BasicLocalSentence, caps: &Caps) -> Result<(Index, Vec<Option<usize>>), CliError> {
    let cfg = caps.local();
    let minima = l
        .psis()
        .iter()
        .map(|psi| min_black_count(psi, l.radius(), &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let k = minima
        .iter()
        .map(|m| m.map_or(Index::Infinite, Index::Finite))
        .max()
        .unwrap_or(Index::Infinite);
    Ok((k, minima))
}

/// The document a command produces.
pub enum Output {
    /// Plain text written as is.
    Text(String),
    Json(Value),
    Table { config: Value, rows: Vec<EstimateRow> },
}

fn document(command: &str, config: &impl Serialize, result: Value) -> Value {
    json!({"command": command, "config": config, "result": result})
}

/// Runs one command.
pub fn execute(command: &Command, format: Format) -> Result<Output, CliError> {
    match command {
        Command::Sample(a) => {
            let spec = SampleSpec::new(a.n, check_probability(a.p)?, a.seed)
                .map_err(|e| CliError::input("InvalidImageSpec", e.to_string()))?;
            let img = sample(&spec);
            let config = serde_json::to_string(&json!({"command": "sample", "config": a})).expect("serialisable");
            Ok(Output::Text(write_pbm_with_comments(&img, &[config])))
        }
        Command::Eval(a) => {
            let f = read_formula(a.source.formula.as_ref(), a.source.formula_file.as_ref())?;
            let bytes = fs::read(&a.image).map_err(|e| CliError::input("Io", format!("{}: {e}", a.image.display())))?;
            let img = read_pbm(&bytes)?;
            let holds = Target::Formula(f).prepare(a.caps.work_budget)?.holds(&img)?;
            Ok(Output::Json(document("eval", a, json!({"n": img.n(), "holds": holds}))))
        }
        Command::Exact(a) => {
            check_probability(a.p)?;
            let r = resolve_target(&a.target, &a.caps)?;
            let profile = par_count_profile(&r.target, a.n, a.caps.max_enum_n, a.caps.work_budget)?;
            let result = json!({
                "n": a.n,
                "p": a.p,
                "probability": profile.probability(a.p),
                "satisfying": profile.satisfying(),
                "total": 1u64 << (a.n * a.n),
            });
            Ok(Output::Json(document("exact", a, result)))
        }
        Command::Estimate(a) => {
            let r = resolve_target(&a.target, &a.caps)?;
            let (p, classification) = match (a.p, a.alpha) {
                (Some(p), _) => (check_probability(p)?, None),
                (None, Some(alpha)) => {
                    let rate = PowerLawRate::new(a.c.unwrap_or(1.0), alpha)?;
                    let class = match &r.local {
                        Some(l) => Some(classify_index(sentence_index(l, &a.caps)?.0, &rate)),
                        None => None,
                    };
                    (rate.p(a.n), class)
                }
                (None, None) => return Err(CliError::input("MissingProbability", "give --p or --alpha")),
            };
            let e = par_estimate(&r.target, a.n, p, a.samples, a.seed, a.caps.work_budget)?;
            let bounds = match &r.target {
                Target::Pattern(fp) => pattern_bounds(a.n, p, fp).ok().map(|b| (b.lower, b.upper)),
                _ => None,
            };
            let row = EstimateRow::new(&e, bounds, classification);
            Ok(table("estimate", a, vec![row], format))
        }
        Command::Index(a) => {
            let l = read_local(&a.local)?;
            let (k, minima) = sentence_index(&l, &a.caps)?;
            let result = json!({
                "r": l.radius(),
                "m": l.psis().len(),
                "index": index_value(k),
                "slot_min_black": minima,
                "threshold_exponent": ThresholdExponent::from_index(k).to_string(),
            });
            Ok(Output::Json(document("index", a, result)))
        }
        Command::Classify(a) => {
            let l = read_local(&a.local)?;
            let rate = PowerLawRate::new(a.c, a.alpha)?;
            let (k, _) = sentence_index(&l, &a.caps)?;
            let result = json!({
                "index": index_value(k),
                "threshold_exponent": ThresholdExponent::from_index(k).to_string(),
                "classification": classify_index(k, &rate).as_str(),
            });
            Ok(Output::Json(document("classify", a, result)))
        }
        Command::Sweep(a) => {
            let r = resolve_target(&a.target, &a.caps)?;
            let rate = PowerLawRate::new(a.c, a.alpha)?;
            let classification: Option<Limit> = match &r.local {
                Some(l) => Some(classify_index(sentence_index(l, &a.caps)?.0, &rate)),
                None => None,
            };
            let rows = par_sweep(&r.target, &rate, &a.n_list, a.samples, a.seed, classification, a.caps.work_budget)?;
            let rows = rows.iter().map(EstimateRow::from_sweep).collect();
            let config = json!({"args": a, "row_seeds": a.n_list.iter().map(|&n| row_seed(a.seed, n)).collect::<Vec<_>>()});
            Ok(table("sweep", &config, rows, format))
        }
        Command::Decompose(a) => {
            let l = read_local(&a.local)?;
            let cfg = a.caps.local();
            let fp = par_factor(&l, &cfg)?;
            let slots: Vec<Value> = l
                .psis()
                .iter()
                .zip(fp.slots())
                .map(|(psi, slot)| {
                    Ok(json!({
                        "psi": psi.to_string(),
                        "var": local_var(psi).map_err(|e| CliError::input("WellFormedness", e.to_string()))?,
                        "descriptions": slot.len(),
                        "min_black": slot.iter().map(|d| d.k()).min(),
                        "min_white": min_white_count(psi, l.radius(), &cfg)?,
                    }))
                })
                .collect::<Result<_, CliError>>()?;
            if let Some(path) = &a.pattern_out {
                let text = serde_json::to_string_pretty(&PatternDoc::from_pattern(&fp)).expect("serialisable");
                write_file(path, &(text + "\n"))?;
            }
            let result = json!({
                "r": l.radius(),
                "slots": slots,
                "index": index_value(fp.index()),
                "white_index": index_value(fp.white_index()),
            });
            Ok(Output::Json(document("decompose", a, result)))
        }
        Command::Percolate(a) => {
            if a.duality {
                let n = a.n.ok_or_else(|| CliError::input("MissingN", "--duality needs --n"))?;
                let report = par_duality_check(n, a.caps.max_enum_n)?;
                let result = json!({
                    "n": n,
                    "total": report.total,
                    "violations": report.violations,
                    "blr_count": report.blr_count,
                });
                return Ok(Output::Json(document("percolate", a, result)));
            }
            let p = check_probability(a.p.ok_or_else(|| CliError::input("MissingProbability", "give --p"))?)?;
            let target = Target::Crossing(a.crossing.spec());
            let rows = match (&a.n_list, a.n) {
                (Some(list), _) => list
                    .iter()
                    .map(|&n| par_estimate(&target, n, p, a.samples, row_seed(a.seed, n), a.caps.work_budget))
                    .collect::<Result<Vec<_>, _>>()?,
                (None, Some(n)) => vec![par_estimate(&target, n, p, a.samples, a.seed, a.caps.work_budget)?],
                (None, None) => return Err(CliError::input("MissingN", "give --n or --n-list")),
            };
            let rows = rows.iter().map(|e| EstimateRow::new(e, None, None)).collect();
            Ok(table("percolate", a, rows, format))
        }
    }
}

fn table(command: &str, config: &impl Serialize, rows: Vec<EstimateRow>, format: Format) -> Output {
    let config = json!({"command": command, "config": config});
    match format {
        Format::Csv => Output::Table { config, rows },
        Format::Json => {
            let mut doc = config;
            doc["result"] = json!({"rows": rows});
            Output::Json(doc)
        }
    }
}

/// Renders a document in the requested format.
pub fn render(output: &Output, format: Format) -> Result<String, CliError> {
    match (output, format) {
        (Output::Text(t), _) => Ok(t.clone()),
        (Output::Json(v), Format::Json) => Ok(serde_json::to_string_pretty(v).expect("serialisable") + "\n"),
        (Output::Json(v), Format::Csv) => {
            let mut out = format!("# config: {}\n", v["config"]);
            let result = v["result"].as_object().cloned().unwrap_or_default();
            let cell = |v: &Value| match v {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                other => other.to_string(),
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let fail = |e: csv::Error| CliError::input("Io", e.to_string());
            w.write_record(result.keys()).map_err(fail)?;
            w.write_record(result.values().map(cell)).map_err(fail)?;
            out.push_str(&String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"));
            Ok(out)
        }
        (Output::Table { config, rows }, _) => {
            let mut out = format!("# config: {config}\n").into_bytes();
            write_csv(&mut out, rows)?;
            Ok(String::from_utf8(out).expect("utf-8"))
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::input("Io", format!("{}: {e}", path.display())))
}

/// Parses arguments, runs the command and writes its output. Returns the
/// exit status.
pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::input("Usage", e.to_string().trim_end());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit;
        }
    };
    let result = (|| {
        if let Some(t) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::input("Usage", e.to_string()))?
                .install(|| execute(&cli.command, cli.format))
        } else {
            execute(&cli.command, cli.format)
        }
    })()
    .and_then(|out| render(&out, cli.format));
    match result {
        Ok(text) => {
            if let Some(path) = &cli.out {
                if let Err(e) = write_file(path, &text) {
                    let _ = writeln!(stderr, "{}", e.to_json());
                    return e.exit;
                }
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit
        }
    }
}
