use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLAIN_HEAD: &str = "Convince me that '";
pub const PLAIN_TAIL: &str = "' is better for me, given ";
pub const CONTRASTIVE_TAIL: &str = "' is better for me than '";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("a prompt needs at least one feature")]
    EmptyFeatures,
    #[error("contrastive prompt compares '{0}' with itself")]
    SameRecipe(String),
}

/// One `name: value` pair as it appears in a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptFeature {
    pub name: String,
    pub value: String,
}

impl PromptFeature {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Self {
        Self { name: name.into(), value: value.into() }
    }
}

fn push_pairs(out: &mut String, features: &[PromptFeature]) {
    for (i, f) in features.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}: {}", f.name, f.value);
    }
}

/// `Convince me that '<name>' is better for me, given <n1>: <v1>, <n2>: <v2>`
pub fn build_plain_prompt(recipe_name: &str, features: &[PromptFeature]) -> Result<String, PromptError> {
    if features.is_empty() {
        return Err(PromptError::EmptyFeatures);
    }
    let mut out = format!("{PLAIN_HEAD}{recipe_name}{PLAIN_TAIL}");
    push_pairs(&mut out, features);
    Ok(out)
}

/// `Convince me that '<A>' is better for me than '<B>', given for '<A>' — <pairs>; and for '<B>' — <pairs>`
pub fn build_contrastive_prompt(
    recipe_a: &str,
    recipe_b: &str,
    features_a: &[PromptFeature],
    features_b: &[PromptFeature],
) -> Result<String, PromptError> {
    if features_a.is_empty() || features_b.is_empty() {
        return Err(PromptError::EmptyFeatures);
    }
    if recipe_a == recipe_b {
        return Err(PromptError::SameRecipe(recipe_a.into()));
    }
    let mut out = format!("{PLAIN_HEAD}{recipe_a}{CONTRASTIVE_TAIL}{recipe_b}', given for '{recipe_a}' \u{2014} ");
    push_pairs(&mut out, features_a);
    let _ = write!(out, "; and for '{recipe_b}' \u{2014} ");
    push_pairs(&mut out, features_b);
    Ok(out)
}
