//! JSON documents for sentences and patterns, and tabular result rows.
//!
//! A basic local sentence is `{"r": 1, "psis": ["C(x)", ...]}`. A factored
//! pattern names its templates once and refers to them from the slots:
//!
//! ```json
//! {"r": 1,
//!  "templates": {"d0": ["000", "010", "000"]},
//!  "slots": [["d0"], ["d0"]]}
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use zolab_core::folang::{parse, SyntaxError};
use zolab_core::local::{ball_side, BasicLocalSentence, Description, FactoredPattern, LocalError};
use zolab_core::thresholds::{EstimateResult, Limit, SweepRow};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("psis[{index}]: {source}")]
    Syntax {
        index: usize,
        #[source]
        source: SyntaxError,
    },
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error("slot {slot} refers to unknown template `{id}`")]
    UnknownTemplate { slot: usize, id: String },
    #[error("template `{id}`: {message}")]
    BadTemplate { id: String, message: String },
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSentenceDoc {
    pub r: usize,
    pub psis: Vec<String>,
}

impl LocalSentenceDoc {
    pub fn to_sentence(&self) -> Result<BasicLocalSentence, FormatError> {
        let psis = self
            .psis
            .iter()
            .enumerate()
            .map(|(index, text)| parse(text).map_err(|source| FormatError::Syntax { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BasicLocalSentence::new(self.r, psis)?)
    }

    pub fn from_sentence(l: &BasicLocalSentence) -> LocalSentenceDoc {
        LocalSentenceDoc { r: l.radius(), psis: l.psis().iter().map(ToString::to_string).collect() }
    }
}

pub fn parse_local(text: &str) -> Result<BasicLocalSentence, FormatError> {
    serde_json::from_str::<LocalSentenceDoc>(text)?.to_sentence()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternDoc {
    pub r: usize,
    /// Template rows, top to bottom, as strings of `0` and `1`.
    pub templates: BTreeMap<String, Vec<String>>,
    pub slots: Vec<Vec<String>>,
}

fn template_rows(d: &Description) -> Vec<String> {
    let side = ball_side(d.radius());
    (0..side)
        .map(|i| (0..side).map(|j| if d.cell_at(i, j) { '1' } else { '0' }).collect())
        .collect()
}

fn template_from_rows(id: &str, r: usize, rows: &[String]) -> Result<Description, FormatError> {
    let bad = |message: String| FormatError::BadTemplate { id: id.to_string(), message };
    let side = ball_side(r);
    if rows.len() != side || rows.iter().any(|row| row.chars().count() != side) {
        return Err(bad(format!("expected {side} rows of {side} cells")));
    }
    let mut cells = Vec::with_capacity(side * side);
    for c in rows.iter().flat_map(|row| row.chars()) {
        match c {
            '0' => cells.push(false),
            '1' => cells.push(true),
            other => return Err(bad(format!("unexpected cell `{other}`"))),
        }
    }
    Ok(Description::new(r, &cells)?)
}

impl PatternDoc {
    pub fn to_pattern(&self) -> Result<FactoredPattern, FormatError> {
        let templates = self
            .templates
            .iter()
            .map(|(id, rows)| Ok((id.as_str(), template_from_rows(id, self.r, rows)?)))
            .collect::<Result<BTreeMap<_, _>, FormatError>>()?;
        let slots = self
            .slots
            .iter()
            .enumerate()
            .map(|(slot, ids)| {
                ids.iter()
                    .map(|id| {
                        templates
                            .get(id.as_str())
                            .cloned()
                            .ok_or_else(|| FormatError::UnknownTemplate { slot, id: id.clone() })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FactoredPattern::new(self.r, slots)?)
    }

    /// Each distinct description becomes one template, numbered in order of
    /// first appearance.
    pub fn from_pattern(fp: &FactoredPattern) -> PatternDoc {
        let mut ids: BTreeMap<&Description, String> = BTreeMap::new();
        let mut templates = BTreeMap::new();
        let width = fp.slots().iter().map(Vec::len).sum::<usize>().max(1).to_string().len();
        let slots = fp
            .slots()
            .iter()
            .map(|slot| {
                slot.iter()
                    .map(|d| {
                        let next = ids.len();
                        ids.entry(d)
                            .or_insert_with(|| {
                                let id = format!("d{next:0width$}");
                                templates.insert(id.clone(), template_rows(d));
                                id
                            })
                            .clone()
                    })
                    .collect()
            })
            .collect();
        PatternDoc { r: fp.radius(), templates, slots }
    }
}

pub fn parse_pattern(text: &str) -> Result<FactoredPattern, FormatError> {
    serde_json::from_str::<PatternDoc>(text)?.to_pattern()
}

/// One row of estimate, sweep and crossing tables. Column order is fixed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub n: usize,
    pub p: f64,
    pub samples: u64,
    pub hits: u64,
    pub phat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub classification: Option<String>,
}

pub const ESTIMATE_HEADER: &str = "n,p,samples,hits,phat,ci_low,ci_high,lower_bound,upper_bound,classification";

impl EstimateRow {
    pub fn new(e: &EstimateResult, bounds: Option<(f64, f64)>, classification: Option<Limit>) -> EstimateRow {
        EstimateRow {
            n: e.n,
            p: e.p,
            samples: e.samples,
            hits: e.hits,
            phat: e.phat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            lower_bound: bounds.map(|b| b.0),
            upper_bound: bounds.map(|b| b.1),
            classification: classification.map(|c| c.as_str().to_string()),
        }
    }

    pub fn from_sweep(row: &SweepRow) -> EstimateRow {
        EstimateRow::new(&row.estimate, row.bounds.map(|b| (b.lower, b.upper)), row.classification)
    }
}

/// Writes rows as CSV with a header line. Missing values are empty fields.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), FormatError> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
