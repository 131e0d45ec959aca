//! Aggregation of explanation ratings: mean Likert scores and preference shares.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::Style;

pub const RATING_COLUMNS: [&str; 6] =
    ["participant_id", "item_id", "model_id", "style", "rating", "preferred_model_id"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub participant_id: String,
    pub item_id: String,
    pub model_id: String,
    pub style: Style,
    pub rating: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred_model_id: Option<String>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed header: expected {expected}, got {got}")]
    MalformedHeader { expected: String, got: String },
    #[error("line {line}: {message}")]
    InvalidRow { line: u64, message: String },
    #[error("no rating records")]
    Empty,
    #[error("no preference records{}", .0.map(|s| format!(" for style {}", style_name(s))).unwrap_or_default())]
    NoPreferences(Option<Style>),
}

impl EvalError {
    pub fn is_io(&self) -> bool {
        matches!(self, EvalError::Io { .. })
    }
}

fn style_name(s: Style) -> &'static str {
    match s {
        Style::Plain => "plain",
        Style::Contrastive => "contrastive",
    }
}

fn parse_row(rec: &csv::StringRecord) -> Result<RatingRecord, String> {
    if rec.len() != RATING_COLUMNS.len() {
        return Err(format!("expected {} fields, got {}", RATING_COLUMNS.len(), rec.len()));
    }
    let field = |i: usize| -> Result<String, String> {
        let v = rec[i].trim();
        if v.is_empty() {
            Err(format!("{} is empty", RATING_COLUMNS[i]))
        } else {
            Ok(v.to_string())
        }
    };
    let style = match rec[3].trim() {
        "plain" => Style::Plain,
        "contrastive" => Style::Contrastive,
        other => return Err(format!("style '{other}' is not plain or contrastive")),
    };
    let rating: u8 = rec[4].trim().parse().map_err(|_| format!("rating '{}' is not an integer", rec[4].trim()))?;
    if !(1..=5).contains(&rating) {
        return Err(format!("rating {rating} out of range [1, 5]"));
    }
    let preferred = rec[5].trim();
    Ok(RatingRecord {
        participant_id: field(0)?,
        item_id: field(1)?,
        model_id: field(2)?,
        style,
        rating,
        preferred_model_id: (!preferred.is_empty()).then(|| preferred.to_string()),
    })
}

/// Parse a ratings table. The first invalid row aborts with its line number.
pub fn read_ratings<R: io::Read>(reader: R) -> Result<Vec<RatingRecord>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| EvalError::MalformedHeader { expected: RATING_COLUMNS.join(","), got: e.to_string() })?
        .clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != RATING_COLUMNS {
        return Err(EvalError::MalformedHeader { expected: RATING_COLUMNS.join(","), got: got.join(",") });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvalError::InvalidRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(parse_row(&rec).map_err(|message| EvalError::InvalidRow { line, message })?);
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>, EvalError> {
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })?;
    read_ratings(file)
}

/// Aggregation cell: one style, or both combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleKey {
    Plain,
    Contrastive,
    Combined,
}

impl From<Style> for StyleKey {
    fn from(s: Style) -> Self {
        match s {
            Style::Plain => StyleKey::Plain,
            Style::Contrastive => StyleKey::Contrastive,
        }
    }
}

/// Mean rating per (model, style) and per model over both styles.
pub fn mean_ratings(records: &[RatingRecord]) -> Result<BTreeMap<(String, StyleKey), f64>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    // integer sums keep the means independent of record order
    let mut acc: BTreeMap<(String, StyleKey), (u64, u64)> = BTreeMap::new();
    for r in records {
        for key in [StyleKey::from(r.style), StyleKey::Combined] {
            let cell = acc.entry((r.model_id.clone(), key)).or_default();
            cell.0 += u64::from(r.rating);
            cell.1 += 1;
        }
    }
    Ok(acc.into_iter().map(|(k, (sum, n))| (k, sum as f64 / n as f64)).collect())
}

/// Preference counts over the records that name a preferred model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceShares {
    pub total: u64,
    pub counts: BTreeMap<String, u64>,
}

impl PreferenceShares {
    pub fn percent(&self, model_id: &str) -> f64 {
        self.counts.get(model_id).map_or(0.0, |&c| c as f64 * 100.0 / self.total as f64)
    }

    pub fn percentages(&self) -> BTreeMap<String, f64> {
        self.counts.keys().map(|m| (m.clone(), self.percent(m))).collect()
    }
}

/// One decimal place, as shown in reports.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Share of preference records naming each model. `style = None` pools both
/// styles. The denominator is the number of preference records considered.
pub fn preference_shares(records: &[RatingRecord], style: Option<Style>) -> Result<PreferenceShares, EvalError> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0;
    for r in records.iter().filter(|r| style.is_none_or(|s| r.style == s)) {
        if let Some(m) = &r.preferred_model_id {
            *counts.entry(m.clone()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::NoPreferences(style));
    }
    Ok(PreferenceShares { total, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEntry {
    pub model_id: String,
    pub style: StyleKey,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareEntry {
    pub model_id: String,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: usize,
    pub means: Vec<MeanEntry>,
    pub preference_total: u64,
    /// Rounded to one decimal place.
    pub preferences: Vec<ShareEntry>,
}

/// Means plus pooled preference shares, if any record names a preference.
pub fn aggregate(records: &[RatingRecord]) -> Result<EvalReport, EvalError> {
    let means = mean_ratings(records)?
        .into_iter()
        .map(|((model_id, style), mean)| MeanEntry { model_id, style, mean })
        .collect();
    let (preference_total, preferences) = match preference_shares(records, None) {
        Ok(s) => (
            s.total,
            s.counts
                .iter()
                .map(|(m, &count)| ShareEntry { model_id: m.clone(), count, percent: round1(s.percent(m)) })
                .collect(),
        ),
        Err(EvalError::NoPreferences(_)) => (0, Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(EvalReport { records: records.len(), means, preference_total, preferences })
}
