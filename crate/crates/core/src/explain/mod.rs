//! Hybrid attributions, prompt construction and generation over a session.

mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::time::Instant;
use tracing::warn;

use crate::domain::{Recipe, SchemaError};
use crate::gateway::{render, BackendKind, Gateway, GatewayError, DETERMINISTIC_ID};
use crate::ingest::{recipe_features, user_features, IngredientTaxonomy};
use crate::session::{Session, RECOMMENDED_CLASS};
use crate::shap::{rank_features, shap_tree, AttributionReport, FeatureAttribution, RankedFeature, ShapError};

pub use prompt::{
    build_contrastive_prompt, build_plain_prompt, PromptError, PromptFeature, CONTRASTIVE_TAIL, PLAIN_HEAD, PLAIN_TAIL,
};

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Plain,
    Contrastive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    User,
    Recipe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridEntry {
    pub origin: Origin,
    #[serde(flatten)]
    pub entry: RankedFeature,
}

impl HybridEntry {
    pub fn prompt_feature(&self) -> PromptFeature {
        PromptFeature::new(self.entry.feature.clone(), self.entry.raw_value.to_string())
    }
}

/// Interleave ranked user and recipe entries, user first; leftovers of the
/// longer list are appended in order.
pub fn merge_ranked(user: &[RankedFeature], recipe: &[RankedFeature]) -> Vec<HybridEntry> {
    let tag = |origin, e: &RankedFeature| HybridEntry { origin, entry: e.clone() };
    let mut out = Vec::with_capacity(user.len() + recipe.len());
    for i in 0..user.len().max(recipe.len()) {
        if let Some(e) = user.get(i) {
            out.push(tag(Origin::User, e));
        }
        if let Some(e) = recipe.get(i) {
            out.push(tag(Origin::Recipe, e));
        }
    }
    out
}

/// Top-`k` of each attribution, merged user-first.
pub fn hybrid_features(
    user: (&FeatureAttribution, &crate::domain::FeatureSchema),
    recipe: (&FeatureAttribution, &crate::domain::FeatureSchema),
    k: usize,
) -> Result<Vec<HybridEntry>, SchemaError> {
    Ok(merge_ranked(&rank_features(user.0, user.1, k)?, &rank_features(recipe.0, recipe.1, k)?))
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

fn default_backend() -> String {
    DETERMINISTIC_ID.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRequest {
    pub profile_id: String,
    /// Defaults to the profile's latest session.
    #[serde(default)]
    pub session_id: Option<String>,
    pub recipe_id: String,
    pub style: Style,
    #[serde(default)]
    pub contrast_recipe_id: Option<String>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_backend")]
    pub backend_id: String,
}

impl ExplanationRequest {
    pub fn plain(profile_id: &str, recipe_id: &str) -> Self {
        Self {
            profile_id: profile_id.into(),
            session_id: None,
            recipe_id: recipe_id.into(),
            style: Style::Plain,
            contrast_recipe_id: None,
            top_k: DEFAULT_TOP_K,
            backend_id: default_backend(),
        }
    }

    pub fn contrastive(profile_id: &str, recipe_id: &str, contrast_recipe_id: &str) -> Self {
        Self {
            style: Style::Contrastive,
            contrast_recipe_id: Some(contrast_recipe_id.into()),
            ..Self::plain(profile_id, recipe_id)
        }
    }

    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.top_k < 1 {
            return Err(ExplainError::InvalidTopK);
        }
        match (self.style, &self.contrast_recipe_id) {
            (Style::Contrastive, None) => Err(ExplainError::MissingContrast),
            (Style::Plain, Some(_)) => Err(ExplainError::UnexpectedContrast),
            (Style::Contrastive, Some(b)) if *b == self.recipe_id => Err(ExplainError::SameRecipe(b.clone())),
            _ => Ok(()),
        }
    }
}

/// Attributions for one recipe of an explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeAttributions {
    pub recipe_id: String,
    pub recipe_name: String,
    /// Absent when the recipe is not one of the user tree's classes.
    pub user_attribution: Option<AttributionReport>,
    pub recipe_attribution: AttributionReport,
    /// Top-k entries of each attribution, merged user-first; the prompt pairs.
    pub features: Vec<HybridEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationResult {
    pub profile_id: String,
    pub session_id: String,
    pub style: Style,
    pub backend_id: String,
    pub prompt: String,
    pub text: String,
    pub user_features: Vec<RankedFeature>,
    pub recipe_features: Vec<RankedFeature>,
    pub explained: RecipeAttributions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<RecipeAttributions>,
    pub latency_ms: u64,
    pub deterministic_fallback: bool,
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error("contrastive explanations require contrast_recipe_id")]
    MissingContrast,
    #[error("contrast_recipe_id is only allowed with the contrastive style")]
    UnexpectedContrast,
    #[error("cannot contrast recipe '{0}' with itself")]
    SameRecipe(String),
    #[error("session belongs to profile '{session}', not '{requested}'")]
    ProfileMismatch { session: String, requested: String },
    #[error("unknown recipe '{0}'")]
    UnknownRecipe(String),
    #[error("recipe '{0}' is not among this session's recommendations")]
    NotRecommended(String),
    #[error(transparent)]
    Backend(GatewayError),
    #[error("generation failed: {0}")]
    Generation(GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Shap(#[from] ShapError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Everything an explanation needs except the generated text.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExplanation {
    pub prompt: String,
    pub explained: RecipeAttributions,
    pub contrast: Option<RecipeAttributions>,
}

fn find<'a>(catalog: &'a [Recipe], id: &str) -> Result<&'a Recipe, ExplainError> {
    catalog.iter().find(|r| r.id == id).ok_or_else(|| ExplainError::UnknownRecipe(id.into()))
}

fn attribute(
    session: &Session,
    recipe: &Recipe,
    taxonomy: &IngredientTaxonomy,
    k: usize,
) -> Result<RecipeAttributions, ExplainError> {
    let um = &session.user_model;
    let user_attr = match um.tree.class_index(&recipe.id) {
        Some(class) => {
            let x = user_features(&session.profile, um.schema())?;
            Some(shap_tree(&um.tree, &x, &um.background, class)?)
        }
        None => None,
    };

    let rm = &session.recipe_model;
    let class = rm
        .tree
        .class_index(RECOMMENDED_CLASS)
        .ok_or(ShapError::UnknownClass { target: 1, classes: rm.tree.classes().len() })?;
    let x = recipe_features(recipe, rm.schema(), taxonomy)?;
    let recipe_attr = shap_tree(&rm.tree, &x, &rm.background, class)?;

    let user_top = match &user_attr {
        Some(a) => rank_features(a, um.schema(), k)?,
        None => Vec::new(),
    };
    let recipe_top = rank_features(&recipe_attr, rm.schema(), k)?;
    Ok(RecipeAttributions {
        recipe_id: recipe.id.clone(),
        recipe_name: recipe.name.clone(),
        user_attribution: user_attr.as_ref().map(|a| AttributionReport::new(a, um.schema())).transpose()?,
        recipe_attribution: AttributionReport::new(&recipe_attr, rm.schema())?,
        features: merge_ranked(&user_top, &recipe_top),
    })
}

fn pairs(a: &RecipeAttributions) -> Vec<PromptFeature> {
    a.features.iter().map(HybridEntry::prompt_feature).collect()
}

/// Compute attributions and the prompt for `request`. CPU-bound.
pub fn prepare(
    request: &ExplanationRequest,
    session: &Session,
    catalog: &[Recipe],
    taxonomy: &IngredientTaxonomy,
) -> Result<PreparedExplanation, ExplainError> {
    request.validate()?;
    if request.profile_id != session.profile_id() {
        return Err(ExplainError::ProfileMismatch {
            session: session.profile_id().into(),
            requested: request.profile_id.clone(),
        });
    }
    let a = find(catalog, &request.recipe_id)?;
    if !session.is_recommended(&a.id) {
        return Err(ExplainError::NotRecommended(a.id.clone()));
    }
    let explained = attribute(session, a, taxonomy, request.top_k)?;

    match &request.contrast_recipe_id {
        None => Ok(PreparedExplanation {
            prompt: build_plain_prompt(&a.name, &pairs(&explained))?,
            explained,
            contrast: None,
        }),
        Some(b_id) => {
            let b = find(catalog, b_id)?;
            let contrast = attribute(session, b, taxonomy, request.top_k)?;
            // Recipes can share a display name; fall back to ids so the template stays unambiguous.
            let (na, nb) = if a.name == b.name { (&a.id, &b.id) } else { (&a.name, &b.name) };
            Ok(PreparedExplanation {
                prompt: build_contrastive_prompt(na, nb, &pairs(&explained), &pairs(&contrast))?,
                explained,
                contrast: Some(contrast),
            })
        }
    }
}

fn split_origins(features: &[HybridEntry]) -> (Vec<RankedFeature>, Vec<RankedFeature>) {
    let pick = |o| features.iter().filter(|e| e.origin == o).map(|e| e.entry.clone()).collect();
    (pick(Origin::User), pick(Origin::Recipe))
}

/// Generate text for a prepared explanation. A failing remote backend falls
/// back to the deterministic renderer and flags the result.
pub async fn generate(
    request: &ExplanationRequest,
    session: &Session,
    prepared: PreparedExplanation,
    gateway: &Gateway,
    deadline: Instant,
) -> Result<ExplanationResult, ExplainError> {
    let descriptor = gateway.descriptor(&request.backend_id).map_err(ExplainError::Backend)?;
    let start = Instant::now();
    let (text, latency_ms, fallback) = match gateway.generate(&request.backend_id, &prepared.prompt, deadline).await {
        Ok(g) => (g.text, g.latency_ms, false),
        Err(e) if descriptor.kind == BackendKind::RemoteChat => {
            warn!(backend = %request.backend_id, error = %e, "remote generation failed; using deterministic fallback");
            (render(&prepared.prompt), start.elapsed().as_millis() as u64, true)
        }
        Err(e) => return Err(ExplainError::Generation(e)),
    };
    let (user_features, recipe_features) = split_origins(&prepared.explained.features);
    Ok(ExplanationResult {
        profile_id: session.profile_id().into(),
        session_id: session.session_id.clone(),
        style: request.style,
        backend_id: request.backend_id.clone(),
        prompt: prepared.prompt,
        text,
        user_features,
        recipe_features,
        explained: prepared.explained,
        contrast: prepared.contrast,
        latency_ms,
        deterministic_fallback: fallback,
    })
}

/// [`prepare`] then [`generate`].
pub async fn explain(
    request: &ExplanationRequest,
    session: &Session,
    catalog: &[Recipe],
    taxonomy: &IngredientTaxonomy,
    gateway: &Gateway,
    deadline: Instant,
) -> Result<ExplanationResult, ExplainError> {
    gateway.descriptor(&request.backend_id).map_err(ExplainError::Backend)?;
    let prepared = prepare(request, session, catalog, taxonomy)?;
    generate(request, session, prepared, gateway, deadline).await
}
