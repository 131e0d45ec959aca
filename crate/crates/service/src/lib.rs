//! HTTP front end for the recommendation and explanation pipeline.
//!
//! The catalog is loaded once and shared read-only. Profiles and sessions live
//! in a [`Store`] behind a mutex; surrogate fitting and attribution run on the
//! blocking pool.

mod error;
mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::{FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mealmind::config::ConfigError;
use mealmind::domain::{validate_profile, EnergyNeeds, MealSlot};
use mealmind::explain::{self, ExplainError};
use mealmind::gateway::{BackendDescriptor, GatewayError};
use mealmind::ingest::{default_taxonomy, load_catalog, IngestError, IngredientTaxonomy};
use mealmind::rules::{RankingStatus, Rule, RulesConfig};
use mealmind::session::{build_session, SessionConfig, MAX_SESSION_TOP_K};
use mealmind::{AppConfig, ExplanationRequest, Gateway, Recipe, Session, UserProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tower_http::services::ServeDir;
use tracing::info;

pub use error::{ApiError, ErrorBody};
pub use store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("catalog {0} has no usable recipes")]
    EmptyCatalog(PathBuf),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub fn is_io(&self) -> bool {
        match self {
            ServiceError::Config(e) => e.is_io(),
            ServiceError::Ingest(e) => e.is_io(),
            ServiceError::Store(StoreError::Io { .. }) | ServiceError::Bind { .. } => true,
            _ => false,
        }
    }
}

struct Inner {
    catalog: Vec<Recipe>,
    index: HashMap<String, usize>,
    taxonomy: IngredientTaxonomy,
    rules: RulesConfig,
    session: SessionConfig,
    gateway: Gateway,
    store: Mutex<Store>,
    request_timeout: Duration,
    console_dir: Option<PathBuf>,
}

/// Shared, cheaply clonable service state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Load catalog, taxonomy, backends and store as described by `config`.
    pub fn from_config(config: &AppConfig) -> Result<Self, ServiceError> {
        let (catalog, stats) = load_catalog(&config.catalog_path)?;
        if catalog.is_empty() {
            return Err(ServiceError::EmptyCatalog(config.catalog_path.clone()));
        }
        info!(kept = stats.rows_kept, dropped = stats.dropped(), "catalog loaded");
        let taxonomy = match &config.taxonomy_path {
            Some(p) => IngredientTaxonomy::load(p)?,
            None => default_taxonomy(),
        };
        let store = match &config.store_path {
            Some(p) => Store::open(p)?,
            None => Store::in_memory(),
        };
        let gateway = Gateway::from_configs(&config.backends)?;
        Ok(Self::from_parts(config, catalog, taxonomy, gateway, store))
    }

    /// Assemble state from already loaded parts; `config` supplies rules, session
    /// settings, timeout and console directory.
    pub fn from_parts(
        config: &AppConfig,
        catalog: Vec<Recipe>,
        taxonomy: IngredientTaxonomy,
        gateway: Gateway,
        store: Store,
    ) -> Self {
        let index = catalog.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        Self(Arc::new(Inner {
            catalog,
            index,
            taxonomy,
            rules: config.rules.clone(),
            session: config.session_config(),
            gateway,
            store: Mutex::new(store),
            request_timeout: Duration::from_millis(config.request_timeout_ms),
            console_dir: config.console_dir.clone(),
        }))
    }

    pub fn catalog_size(&self) -> usize {
        self.0.catalog.len()
    }

    fn recipe(&self, id: &str) -> Option<&Recipe> {
        self.0.index.get(id).map(|&i| &self.0.catalog[i])
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        self.0.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// `Json` whose rejections use the common error body.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(v) = Json::<T>::from_request(req, state).await?;
        Ok(ApiJson(v))
    }
}

pub fn router(state: AppState) -> Router {
    let console = state.0.console_dir.clone();
    let app = Router::new()
        .route("/profiles", post(create_profile))
        .route("/profiles/{id}", get(get_profile))
        .route("/recommendations", post(create_recommendation))
        .route("/sessions/{id}", get(get_session))
        .route("/explanations", post(create_explanation))
        .route("/recipes", get(list_recipes))
        .route("/recipes/{id}", get(get_recipe))
        .route("/backends", get(list_backends))
        .route("/health", get(health))
        .with_state(state);
    match console {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") }),
    }
}

/// Bind `config.listen_addr` and serve until Ctrl-C.
pub async fn serve(config: &AppConfig) -> Result<(), ServiceError> {
    let state = AppState::from_config(config)?;
    let listener = tokio::net::TcpListener::bind(&config.listen_addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: config.listen_addr.clone(), source })?;
    let addr = listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| config.listen_addr.clone());
    info!(%addr, catalog = state.catalog_size(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServiceError::Bind { addr, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCreated {
    pub profile_id: String,
}

async fn create_profile(
    State(state): State<AppState>,
    ApiJson(raw): ApiJson<UserProfile>,
) -> Result<(StatusCode, Json<ProfileCreated>), ApiError> {
    let mut profile = validate_profile(&raw).map_err(|r| ApiError::validation(&r))?;
    let mut store = state.store();
    if profile.id.is_empty() {
        profile.id = store.next_profile_id();
    }
    let profile_id = profile.id.clone();
    store.put_profile(profile).map_err(|e| ApiError::internal(e.to_string()))?;
    info!(%profile_id, "profile stored");
    Ok((StatusCode::CREATED, Json(ProfileCreated { profile_id })))
}

async fn get_profile(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<UserProfile>, ApiError> {
    state.store().profile(&id).cloned().map(Json).ok_or_else(|| ApiError::not_found("profile", &id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendationRequest {
    pub profile_id: String,
    /// Overrides the profile's own slot for this session.
    #[serde(default)]
    pub meal_slot: Option<MealSlot>,
    #[serde(default)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationView {
    pub rank: usize,
    pub recipe_id: String,
    pub name: String,
    pub calories: f64,
    pub score: f64,
    pub passed_rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSummary {
    pub fidelity: f64,
    pub training_rows: usize,
    pub features: Vec<String>,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub profile_id: String,
    pub meal_slot: MealSlot,
    pub status: RankingStatus,
    pub needs: EnergyNeeds,
    pub recommendations: Vec<RecommendationView>,
    pub user_tree: SurrogateSummary,
    pub recipe_tree: SurrogateSummary,
}

fn summary(m: &mealmind::session::SurrogateModel) -> SurrogateSummary {
    SurrogateSummary {
        fidelity: m.fidelity,
        training_rows: m.training_rows,
        features: m.schema().names().map(str::to_string).collect(),
        classes: m.tree.classes().to_vec(),
    }
}

impl SessionView {
    fn new(s: &Session, state: &AppState) -> Self {
        let recommendations = s
            .ranking
            .recommendations
            .iter()
            .map(|r| {
                let recipe = state.recipe(&r.recipe_id);
                RecommendationView {
                    rank: r.rank,
                    recipe_id: r.recipe_id.clone(),
                    name: recipe.map(|x| x.name.clone()).unwrap_or_default(),
                    calories: recipe.map(|x| x.nutrition.calories).unwrap_or_default(),
                    score: r.score,
                    passed_rules: r.passed_rules.clone(),
                }
            })
            .collect();
        Self {
            session_id: s.session_id.clone(),
            profile_id: s.profile_id().to_string(),
            meal_slot: s.profile.meal_slot,
            status: s.ranking.status,
            needs: s.ranking.needs,
            recommendations,
            user_tree: summary(&s.user_model),
            recipe_tree: summary(&s.recipe_model),
        }
    }
}

async fn create_recommendation(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<RecommendationRequest>,
) -> Result<Json<SessionView>, ApiError> {
    let top_k = req.top_k.unwrap_or(state.0.rules.top_k);
    if !(1..=MAX_SESSION_TOP_K).contains(&top_k) {
        return Err(ApiError::bad_request(
            "invalid_top_k",
            format!("top_k must be in 1..={MAX_SESSION_TOP_K}, got {top_k}"),
        )
        .with_details(json!({ "top_k": top_k })));
    }
    let (mut profile, population, session_id) = {
        let mut store = state.store();
        let profile =
            store.profile(&req.profile_id).cloned().ok_or_else(|| ApiError::not_found("profile", &req.profile_id))?;
        let population: Vec<UserProfile> =
            if state.0.session.global_recipe_tree { store.profiles().cloned().collect() } else { Vec::new() };
        (profile, population, store.next_session_id())
    };
    if let Some(slot) = req.meal_slot {
        profile.meal_slot = slot;
    }

    let worker = state.clone();
    let session = tokio::task::spawn_blocking(move || {
        let inner = &worker.0;
        let rules = RulesConfig { top_k, ..inner.rules.clone() };
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        build_session(
            session_id,
            &profile,
            &inner.catalog,
            &inner.taxonomy,
            &rules,
            &inner.session,
            &population,
            created_at,
        )
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    let session = state.store().put_session(session).map_err(|e| ApiError::internal(e.to_string()))?;
    info!(session_id = %session.session_id, profile_id = %session.profile_id(), "session built");
    Ok(Json(SessionView::new(&session, &state)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = state.store().session(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
    Ok(Json(SessionView::new(&session, &state)))
}

async fn create_explanation(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<ExplanationRequest>,
) -> Result<Response, ApiError> {
    let deadline = tokio::time::Instant::now() + state.0.request_timeout;
    state.0.gateway.descriptor(&req.backend_id).map_err(|e| ApiError::from(ExplainError::Backend(e)))?;
    req.validate()?;

    let session = {
        let store = state.store();
        if store.profile(&req.profile_id).is_none() {
            return Err(ApiError::not_found("profile", &req.profile_id));
        }
        match &req.session_id {
            Some(id) => store.session(id).ok_or_else(|| ApiError::not_found("session", id))?,
            None => store
                .latest_session(&req.profile_id)
                .ok_or_else(|| ApiError::not_found("session", &format!("latest for {}", req.profile_id)))?,
        }
    };

    let worker = state.clone();
    let (req, session, prepared) = tokio::task::spawn_blocking(move || {
        let prepared = explain::prepare(&req, &session, &worker.0.catalog, &worker.0.taxonomy);
        (req, session, prepared)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;

    let result = explain::generate(&req, &session, prepared?, &state.0.gateway, deadline).await?;
    info!(
        session_id = %result.session_id,
        backend = %result.backend_id,
        fallback = result.deterministic_fallback,
        "explanation generated"
    );
    Ok(Json(result).into_response())
}

async fn list_recipes(State(state): State<AppState>) -> Json<Vec<Recipe>> {
    Json(state.0.catalog.clone())
}

async fn get_recipe(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Recipe>, ApiError> {
    state.recipe(&id).cloned().map(Json).ok_or_else(|| ApiError::not_found("recipe", &id))
}

async fn list_backends(State(state): State<AppState>) -> Json<Vec<BackendDescriptor>> {
    Json(state.0.gateway.list_backends())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub name: String,
    pub version: String,
    pub catalog_size: usize,
    pub backends: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        catalog_size: state.catalog_size(),
        backends: state.0.gateway.list_backends().len(),
    })
}
