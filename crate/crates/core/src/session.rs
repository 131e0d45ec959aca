//! Per-profile recommendation sessions: the ranking plus the two fitted
//! surrogate trees and their background sets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivityLevel, Diet, FeatureSchema, FeatureVector, HealthGoal, Recipe, Sex, Token, UserProfile};
use crate::ingest::{
    annotate, build_user_schema, profile_rng, recipe_schema, sample_sorted, user_features, AnnotationConfig,
    IngestError, IngredientTaxonomy,
};
use crate::rules::{recommend, Ranking, RankingStatus, RulesConfig, RulesError};
use crate::shap::{BackgroundSet, ShapError};
use crate::tree::{fidelity, fit, DecisionTree, TrainConfig, TreeError};

/// Upper bound on the candidate set that becomes the user tree's class space.
pub const MAX_SESSION_TOP_K: usize = 10;
/// User-tree class for "no candidate passes the rules".
pub const NONE_CLASS: &str = "__none__";
/// Recipe-tree class for "recommended".
pub const RECOMMENDED_CLASS: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Perturbed neighbours of the profile used to train the user tree.
    pub perturbations: usize,
    pub negatives_per_profile: usize,
    pub background_size: usize,
    pub seed: u64,
    /// Train the recipe tree on every known profile instead of this one.
    pub global_recipe_tree: bool,
    pub train: TrainConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            perturbations: 200,
            negatives_per_profile: 200,
            background_size: 100,
            seed: 42,
            global_recipe_tree: false,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no recipe satisfies rules")]
    NoRecipeSatisfiesRules,
    #[error("top_k must be in 1..={MAX_SESSION_TOP_K}, got {0}")]
    InvalidTopK(usize),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Shap(#[from] ShapError),
    #[error(transparent)]
    Schema(#[from] crate::domain::SchemaError),
}

/// A fitted tree with the background it is explained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub tree: DecisionTree,
    pub background: BackgroundSet,
    pub training_rows: usize,
    pub fidelity: f64,
}

impl SurrogateModel {
    pub fn schema(&self) -> &FeatureSchema {
        self.tree.schema()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub profile: UserProfile,
    pub ranking: Ranking,
    pub user_model: SurrogateModel,
    pub recipe_model: SurrogateModel,
    /// Unix seconds.
    pub created_at: u64,
}

impl Session {
    pub fn profile_id(&self) -> &str {
        &self.profile.id
    }

    pub fn is_recommended(&self, recipe_id: &str) -> bool {
        self.ranking.recommendations.iter().any(|r| r.recipe_id == recipe_id)
    }
}

/// A random neighbour of `profile`: numeric attributes jittered, categorical
/// attributes occasionally resampled, each restriction token kept with p = 1/2.
pub fn perturb(profile: &UserProfile, rng: &mut ChaCha8Rng) -> UserProfile {
    fn resample<T: Token>(current: T, rng: &mut ChaCha8Rng, p: f64) -> T {
        if rng.random_bool(p) {
            T::ALL[rng.random_range(0..T::ALL.len())]
        } else {
            current
        }
    }
    let keep = |tokens: &[String], rng: &mut ChaCha8Rng| -> Vec<String> {
        tokens.iter().filter(|_| rng.random_bool(0.5)).cloned().collect()
    };
    let mut p = profile.clone();
    p.age = (profile.age + rng.random_range(-10..=10)).clamp(13, 120);
    p.height_cm = (profile.height_cm + rng.random_range(-15.0..=15.0)).clamp(51.0, 272.0);
    p.weight_kg = (profile.weight_kg + rng.random_range(-15.0..=15.0)).clamp(21.0, 400.0);
    p.sex = resample::<Sex>(profile.sex, rng, 0.2);
    p.activity_level = resample::<ActivityLevel>(profile.activity_level, rng, 0.3);
    p.diet = resample::<Diet>(profile.diet, rng, 0.3);
    p.health_goal = resample::<HealthGoal>(profile.health_goal, rng, 0.3);
    p.allergens = keep(&profile.allergens, rng);
    p.dislikes = keep(&profile.dislikes, rng);
    p
}

fn background(rows: &[FeatureVector], size: usize, seed: u64, stream: usize) -> Result<BackgroundSet, ShapError> {
    let mut rng = profile_rng(seed, stream);
    let picked = sample_sorted(&mut rng, rows.len(), size.max(1));
    BackgroundSet::new(picked.into_iter().map(|i| rows[i].clone()).collect())
}

fn surrogate(
    schema: &FeatureSchema,
    rows: Vec<FeatureVector>,
    labels: Vec<usize>,
    classes: Vec<String>,
    config: &SessionConfig,
    stream: usize,
) -> Result<SurrogateModel, SessionError> {
    let tree = fit(schema, &rows, &labels, classes, &config.train)?;
    Ok(SurrogateModel {
        fidelity: fidelity(&tree, &rows, &labels)?,
        background: background(&rows, config.background_size, config.seed, stream)?,
        training_rows: rows.len(),
        tree,
    })
}

/// User tree: features of the profile and its perturbed neighbours, labelled
/// with the top candidate the rules pick for each neighbour (or [`NONE_CLASS`]).
fn user_model(
    profile: &UserProfile,
    candidates: &[Recipe],
    taxonomy: &IngredientTaxonomy,
    rules: &RulesConfig,
    config: &SessionConfig,
) -> Result<SurrogateModel, SessionError> {
    let schema = build_user_schema(std::slice::from_ref(profile))?;
    let mut classes: Vec<String> = candidates.iter().map(|r| r.id.clone()).collect();
    classes.push(NONE_CLASS.into());
    let top1 = RulesConfig { top_k: 1, ..rules.clone() };

    let mut rng = profile_rng(config.seed, 0);
    let neighbours: Vec<UserProfile> =
        std::iter::once(profile.clone()).chain((0..config.perturbations).map(|_| perturb(profile, &mut rng))).collect();

    let mut rows = Vec::with_capacity(neighbours.len());
    let mut labels = Vec::with_capacity(neighbours.len());
    for p in &neighbours {
        let ranking = recommend(p, candidates, taxonomy, &top1)?;
        let label = match ranking.ids().first() {
            Some(id) => classes.iter().position(|c| c == id).expect("candidate class"),
            None => classes.len() - 1,
        };
        rows.push(user_features(p, &schema)?);
        labels.push(label);
    }
    surrogate(&schema, rows, labels, classes, config, 1)
}

/// Recipe tree: recipe features labelled 1 iff the recipe is in the top-K.
fn recipe_model(
    population: &[UserProfile],
    catalog: &[Recipe],
    taxonomy: &IngredientTaxonomy,
    rules: &RulesConfig,
    config: &SessionConfig,
) -> Result<SurrogateModel, SessionError> {
    let user_schema = build_user_schema(population)?;
    let schema = recipe_schema();
    let annotation = AnnotationConfig { negatives_per_profile: config.negatives_per_profile, seed: config.seed };
    let data = annotate(population, catalog, taxonomy, &user_schema, &schema, rules, &annotation)?;
    let (rows, labels): (Vec<_>, Vec<_>) = data.rows.into_iter().map(|r| (r.recipe, r.label as usize)).unzip();
    surrogate(&schema, rows, labels, vec!["0".into(), RECOMMENDED_CLASS.into()], config, 2)
}

/// Rank the catalog for `profile` and fit both surrogates.
///
/// `population` is only consulted when `global_recipe_tree` is set; the session
/// profile replaces any entry with the same id.
#[allow(clippy::too_many_arguments)]
pub fn build_session(
    session_id: String,
    profile: &UserProfile,
    catalog: &[Recipe],
    taxonomy: &IngredientTaxonomy,
    rules: &RulesConfig,
    config: &SessionConfig,
    population: &[UserProfile],
    created_at: u64,
) -> Result<Session, SessionError> {
    if rules.top_k < 1 || rules.top_k > MAX_SESSION_TOP_K {
        return Err(SessionError::InvalidTopK(rules.top_k));
    }
    let ranking = recommend(profile, catalog, taxonomy, rules)?;
    if ranking.status == RankingStatus::NoRecipeSatisfiesRules {
        return Err(SessionError::NoRecipeSatisfiesRules);
    }
    let candidates: Vec<Recipe> = ranking
        .ids()
        .iter()
        .map(|id| catalog.iter().find(|r| r.id == *id).expect("ranked id in catalog").clone())
        .collect();

    let user_model = user_model(profile, &candidates, taxonomy, rules, config)?;
    let recipe_model = if config.global_recipe_tree {
        let mut pop: Vec<UserProfile> = population.iter().filter(|p| p.id != profile.id).cloned().collect();
        pop.push(profile.clone());
        recipe_model(&pop, catalog, taxonomy, rules, config)?
    } else {
        recipe_model(std::slice::from_ref(profile), catalog, taxonomy, rules, config)?
    };

    Ok(Session { session_id, profile: profile.clone(), ranking, user_model, recipe_model, created_at })
}
