//! Shared domain types: profiles, recipes, energy needs, feature schemas.

mod profile;
mod recipe;
mod schema;

pub use profile::{
    normalize_tokens, validate_profile, ActivityLevel, Diet, HealthGoal, MealSlot, Sex, Token, UserProfile,
    ValidationIssue, ValidationReport,
};
pub use recipe::{EnergyNeeds, NutritionFacts, Recipe, MAX_CALORIES};
pub use schema::{
    decode, decode_value, encode, FeatureDef, FeatureKind, FeatureSchema, FeatureVector, RawValue, SchemaError,
};

#[cfg(test)]
pub(crate) use profile::emna;
#[cfg(test)]
pub(crate) use recipe::recipe;
