//! Feature schemas and label encoding.
//!
//! Categorical features are label-encoded: a category's code is its index in the
//! lexicographically sorted category list. Boolean flags are categorical features
//! over `["false", "true"]`, which puts `false` at 0 and `true` at 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub category_codes: Vec<String>,
}

impl FeatureDef {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: FeatureKind::Numeric, category_codes: Vec::new() }
    }

    /// Categories are sorted and deduplicated, so the caller's order never matters.
    pub fn categorical<I, S>(name: impl Into<String>, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let codes: BTreeSet<String> = categories.into_iter().map(Into::into).collect();
        Self { name: name.into(), kind: FeatureKind::Categorical, category_codes: codes.into_iter().collect() }
    }

    pub fn flag(name: impl Into<String>) -> Self {
        Self::categorical(name, ["false", "true"])
    }

    pub fn code_of(&self, category: &str) -> Option<usize> {
        self.category_codes.binary_search_by(|c| c.as_str().cmp(category)).ok()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("duplicate feature name '{0}'")]
    DuplicateFeature(String),
    #[error("categorical feature '{0}' has no categories")]
    NoCategories(String),
    #[error("categories of '{0}' are not sorted and unique")]
    UnsortedCategories(String),
    #[error("missing feature '{0}'")]
    MissingFeature(String),
    #[error("unknown category '{value}' for feature '{feature}'")]
    UnknownCategory { feature: String, value: String },
    #[error("feature '{feature}' expects a {expected} value")]
    WrongValueType { feature: String, expected: &'static str },
    #[error("code {code} out of range for feature '{feature}' with {n} categories")]
    CodeOutOfRange { feature: String, code: f64, n: usize },
    #[error("vector has {got} values but schema has {expected} features")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureDef>", into = "Vec<FeatureDef>")]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
}

impl TryFrom<Vec<FeatureDef>> for FeatureSchema {
    type Error = SchemaError;

    fn try_from(features: Vec<FeatureDef>) -> Result<Self, Self::Error> {
        Self::new(features)
    }
}

impl From<FeatureSchema> for Vec<FeatureDef> {
    fn from(schema: FeatureSchema) -> Self {
        schema.features
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self, SchemaError> {
        let mut seen = BTreeSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(SchemaError::DuplicateFeature(f.name.clone()));
            }
            if f.kind == FeatureKind::Categorical {
                if f.category_codes.is_empty() {
                    return Err(SchemaError::NoCategories(f.name.clone()));
                }
                if f.category_codes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SchemaError::UnsortedCategories(f.name.clone()));
                }
            }
        }
        Ok(Self { features })
    }

    /// All-numeric schema over the given names.
    pub fn numeric<S: AsRef<str>>(names: &[S]) -> Result<Self, SchemaError> {
        Self::new(names.iter().map(|n| FeatureDef::numeric(n.as_ref())).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Check that `vector` is a valid encoding under this schema.
    pub fn check(&self, vector: &FeatureVector) -> Result<(), SchemaError> {
        if vector.len() != self.len() {
            return Err(SchemaError::LengthMismatch { expected: self.len(), got: vector.len() });
        }
        for (f, &v) in self.features.iter().zip(vector.values()) {
            if f.kind == FeatureKind::Categorical {
                category_index(f, v)?;
            }
        }
        Ok(())
    }
}

/// A raw, human-readable feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

impl RawValue {
    pub fn flag(value: bool) -> Self {
        RawValue::Text(if value { "true" } else { "false" }.to_string())
    }

    pub fn text(value: impl Into<String>) -> Self {
        RawValue::Text(value.into())
    }
}

impl From<f64> for RawValue {
    fn from(v: f64) -> Self {
        RawValue::Number(v)
    }
}

impl From<&str> for RawValue {
    fn from(v: &str) -> Self {
        RawValue::Text(v.to_string())
    }
}

impl fmt::Display for RawValue {
    /// Numbers use the shortest round-trip decimal, so `24.0` renders as `24`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Number(v) => write!(f, "{v}"),
            RawValue::Text(s) => f.write_str(s),
        }
    }
}

/// Encoded feature values aligned with a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn category_index(feature: &FeatureDef, code: f64) -> Result<usize, SchemaError> {
    let n = feature.category_codes.len();
    if code.fract() != 0.0 || code < 0.0 || code >= n as f64 {
        return Err(SchemaError::CodeOutOfRange { feature: feature.name.clone(), code, n });
    }
    Ok(code as usize)
}

/// Encode a named raw-value map: numbers pass through, categories become their index.
pub fn encode(schema: &FeatureSchema, named_values: &BTreeMap<String, RawValue>) -> Result<FeatureVector, SchemaError> {
    schema
        .features()
        .iter()
        .map(|f| {
            let raw = named_values.get(&f.name).ok_or_else(|| SchemaError::MissingFeature(f.name.clone()))?;
            match (f.kind, raw) {
                (FeatureKind::Numeric, RawValue::Number(v)) => Ok(*v),
                (FeatureKind::Numeric, RawValue::Text(_)) => {
                    Err(SchemaError::WrongValueType { feature: f.name.clone(), expected: "numeric" })
                }
                (FeatureKind::Categorical, RawValue::Text(s)) => f
                    .code_of(s)
                    .map(|c| c as f64)
                    .ok_or_else(|| SchemaError::UnknownCategory { feature: f.name.clone(), value: s.clone() }),
                (FeatureKind::Categorical, RawValue::Number(_)) => {
                    Err(SchemaError::WrongValueType { feature: f.name.clone(), expected: "categorical" })
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(FeatureVector)
}

pub fn decode_value(feature: &FeatureDef, code: f64) -> Result<RawValue, SchemaError> {
    match feature.kind {
        FeatureKind::Numeric => Ok(RawValue::Number(code)),
        FeatureKind::Categorical => {
            let idx = category_index(feature, code)?;
            Ok(RawValue::Text(feature.category_codes[idx].clone()))
        }
    }
}

pub fn decode(schema: &FeatureSchema, vector: &FeatureVector) -> Result<BTreeMap<String, RawValue>, SchemaError> {
    if vector.len() != schema.len() {
        return Err(SchemaError::LengthMismatch { expected: schema.len(), got: vector.len() });
    }
    schema.features().iter().zip(vector.values()).map(|(f, &v)| Ok((f.name.clone(), decode_value(f, v)?))).collect()
}
