//! User-centric and recipe-centric feature spaces.

use std::collections::{BTreeMap, HashMap};

use super::{IngestError, IngredientTaxonomy};
use crate::domain::{
    encode, ActivityLevel, Diet, FeatureDef, FeatureSchema, FeatureVector, HealthGoal, RawValue, Recipe, SchemaError,
    Sex, Token, UserProfile,
};
use crate::rules;

/// Hard cap on user features; keeps 2^F coalition enumeration cheap.
pub const MAX_USER_FEATURES: usize = 12;
/// Most frequent dislike and allergen tokens considered for dedicated flags.
pub const FLAG_CANDIDATES_PER_KIND: usize = 3;

pub const DISLIKE_PREFIX: &str = "dislikes_";
pub const ALLERGEN_PREFIX: &str = "allergen_";

pub const RECIPE_FEATURES: [&str; 12] = [
    "calories",
    "protein_g",
    "fat_g",
    "carbs_g",
    "fiber_g",
    "sugar_g",
    "sodium_mg",
    "prep_time_min",
    "rating",
    "n_ingredients",
    "contains_meat",
    "seasonal",
];

fn base_user_features() -> Vec<FeatureDef> {
    vec![
        FeatureDef::numeric("age"),
        FeatureDef::categorical("sex", Sex::tokens()),
        FeatureDef::numeric("height_cm"),
        FeatureDef::numeric("weight_kg"),
        FeatureDef::categorical("activity_level", ActivityLevel::tokens()),
        FeatureDef::categorical("diet", Diet::tokens()),
        FeatureDef::categorical("health_goal", HealthGoal::tokens()),
        FeatureDef::numeric("bmr_kcal"),
    ]
}

/// Top tokens by frequency, ties broken alphabetically.
fn most_frequent<'a>(lists: impl Iterator<Item = &'a Vec<String>>, n: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for list in lists {
        for t in list {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

/// Base demographic features plus boolean flags for the most common dislike and
/// allergen tokens, capped at [`MAX_USER_FEATURES`] in total.
pub fn build_user_schema(profiles: &[UserProfile]) -> Result<FeatureSchema, IngestError> {
    if profiles.is_empty() {
        return Err(IngestError::EmptyInput("profiles"));
    }
    let mut features = base_user_features();
    let slots = MAX_USER_FEATURES - features.len();

    let dislikes = most_frequent(profiles.iter().map(|p| &p.dislikes), FLAG_CANDIDATES_PER_KIND);
    let allergens = most_frequent(profiles.iter().map(|p| &p.allergens), FLAG_CANDIDATES_PER_KIND);

    // (count, kind, token): dislikes win ties over allergens, then alphabetical.
    let mut candidates: Vec<(usize, u8, String)> =
        dislikes.into_iter().map(|(t, c)| (c, 0, t)).chain(allergens.into_iter().map(|(t, c)| (c, 1, t))).collect();
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
    candidates.truncate(slots);
    // dislike flags first, then allergen flags, each in frequency order
    candidates.sort_by_key(|c| c.1);

    for (_, kind, token) in candidates {
        let prefix = if kind == 0 { DISLIKE_PREFIX } else { ALLERGEN_PREFIX };
        features.push(FeatureDef::flag(format!("{prefix}{token}")));
    }
    Ok(FeatureSchema::new(features)?)
}

pub fn recipe_schema() -> FeatureSchema {
    FeatureSchema::new(
        RECIPE_FEATURES
            .iter()
            .map(|&n| match n {
                "contains_meat" | "seasonal" => FeatureDef::flag(n),
                _ => FeatureDef::numeric(n),
            })
            .collect(),
    )
    .expect("recipe schema is well formed")
}

pub fn build_recipe_schema(catalog: &[Recipe]) -> Result<FeatureSchema, IngestError> {
    if catalog.is_empty() {
        return Err(IngestError::EmptyInput("catalog"));
    }
    Ok(recipe_schema())
}

/// Raw (human-readable) user feature values for every feature in `schema`.
pub fn user_raw_values(profile: &UserProfile, schema: &FeatureSchema) -> BTreeMap<String, RawValue> {
    schema
        .names()
        .filter_map(|name| {
            let value = match name {
                "age" => RawValue::Number(profile.age as f64),
                "sex" => RawValue::text(profile.sex.token()),
                "height_cm" => RawValue::Number(profile.height_cm),
                "weight_kg" => RawValue::Number(profile.weight_kg),
                "activity_level" => RawValue::text(profile.activity_level.token()),
                "diet" => RawValue::text(profile.diet.token()),
                "health_goal" => RawValue::text(profile.health_goal.token()),
                "bmr_kcal" => RawValue::Number(rules::bmr(profile)),
                n => {
                    if let Some(tok) = n.strip_prefix(DISLIKE_PREFIX) {
                        RawValue::flag(profile.has_dislike(tok))
                    } else {
                        RawValue::flag(profile.has_allergen(n.strip_prefix(ALLERGEN_PREFIX)?))
                    }
                }
            };
            Some((name.to_string(), value))
        })
        .collect()
}

pub fn user_features(profile: &UserProfile, schema: &FeatureSchema) -> Result<FeatureVector, SchemaError> {
    encode(schema, &user_raw_values(profile, schema))
}

pub fn recipe_raw_values(recipe: &Recipe, taxonomy: &IngredientTaxonomy) -> BTreeMap<String, RawValue> {
    let n = &recipe.nutrition;
    let contains_meat = taxonomy.recipe_in_category(recipe, "meat").unwrap_or(false);
    [
        ("calories", RawValue::Number(n.calories)),
        ("protein_g", RawValue::Number(n.protein_g)),
        ("fat_g", RawValue::Number(n.fat_g)),
        ("carbs_g", RawValue::Number(n.carbs_g)),
        ("fiber_g", RawValue::Number(n.fiber_g)),
        ("sugar_g", RawValue::Number(n.sugar_g)),
        ("sodium_mg", RawValue::Number(n.sodium_mg)),
        ("prep_time_min", RawValue::Number(recipe.prep_time_min as f64)),
        ("rating", RawValue::Number(recipe.rating)),
        ("n_ingredients", RawValue::Number(recipe.ingredients.len() as f64)),
        ("contains_meat", RawValue::flag(contains_meat)),
        ("seasonal", RawValue::flag(recipe.seasonal)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn recipe_features(
    recipe: &Recipe,
    schema: &FeatureSchema,
    taxonomy: &IngredientTaxonomy,
) -> Result<FeatureVector, SchemaError> {
    encode(schema, &recipe_raw_values(recipe, taxonomy))
}
