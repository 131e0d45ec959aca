//! Loading, cleaning and annotating recipe catalogs and profile sets.

mod annotate;
mod catalog;
mod features;
mod taxonomy;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::{validate_profile, SchemaError, UserProfile, ValidationReport};
use crate::rules::RulesError;

pub use annotate::{annotate, AnnotationConfig, DatasetSchemas, LabeledDataset, LabeledRow};
pub(crate) use annotate::{profile_rng, sample_sorted};
pub use catalog::{
    load_catalog, read_catalog, write_catalog, write_catalog_to, CatalogStats, DropReason, CATALOG_COLUMNS,
};
pub use features::{
    build_recipe_schema, build_user_schema, recipe_features, recipe_raw_values, recipe_schema, user_features,
    user_raw_values, ALLERGEN_PREFIX, DISLIKE_PREFIX, MAX_USER_FEATURES, RECIPE_FEATURES,
};
pub use taxonomy::{default_taxonomy, IngredientTaxonomy};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("invalid profile file: {0}")]
    ProfileFile(String),
    #[error("profile #{index} is invalid: {report}")]
    InvalidProfile { index: usize, report: ValidationReport },
    #[error("empty input: no {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Rules(#[from] RulesError),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

/// Parse and validate profiles from a JSON array (a single object is also accepted).
pub fn parse_profiles(text: &str) -> Result<Vec<UserProfile>, IngestError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IngestError::ProfileFile(e.to_string()))?;
    let raw: Vec<UserProfile> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value),
        _ => serde_json::from_value(value).map(|p| vec![p]),
    }
    .map_err(|e| IngestError::ProfileFile(e.to_string()))?;

    raw.iter()
        .enumerate()
        .map(|(index, p)| validate_profile(p).map_err(|report| IngestError::InvalidProfile { index, report }))
        .collect()
}

pub fn load_profiles(path: &Path) -> Result<Vec<UserProfile>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_profiles(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_array_or_object() {
        let one = r#"{"id":"emna","age":30,"sex":"female","height_cm":170,"weight_kg":65,
            "activity_level":"sedentary","diet":"vegetarian","health_goal":"maintenance",
            "allergens":[],"dislikes":["Mushroom "],"meal_slot":"dinner"}"#;
        let ps = parse_profiles(one).unwrap();
        assert_eq!(ps[0].dislikes, ["mushroom"]);
        let ps = parse_profiles(&format!("[{one},{one}]")).unwrap();
        assert_eq!(ps.len(), 2);
        let bad = one.replace("\"age\":30", "\"age\":5");
        assert!(matches!(parse_profiles(&bad), Err(IngestError::InvalidProfile { index: 0, .. })));
    }
}
