//! Knowledge-based recommender: energy needs, exclusion rules and ranking.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivityLevel, Diet, EnergyNeeds, HealthGoal, MealSlot, Recipe, Sex, Token, UserProfile};
use crate::ingest::IngredientTaxonomy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RulesError {
    #[error("rule references unknown taxonomy category '{0}'")]
    UnknownCategory(String),
    #[error("invalid rules config: {0}")]
    InvalidConfig(String),
    #[error("catalog is empty")]
    EmptyCatalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub rating_w: f64,
    pub goal_w: f64,
    pub calorie_fit_w: f64,
}

impl ScoreWeights {
    /// Scale arbitrary non-negative weights so they sum to one.
    pub fn normalized(rating_w: f64, goal_w: f64, calorie_fit_w: f64) -> Result<Self, RulesError> {
        let sum = rating_w + goal_w + calorie_fit_w;
        if [rating_w, goal_w, calorie_fit_w].iter().any(|w| w.is_nan() || *w < 0.0) || sum.is_nan() || sum <= 0.0 {
            return Err(RulesError::InvalidConfig("score weights must be non-negative with a positive sum".into()));
        }
        Ok(Self { rating_w: rating_w / sum, goal_w: goal_w / sum, calorie_fit_w: calorie_fit_w / sum })
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { rating_w: 0.4, goal_w: 0.4, calorie_fit_w: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RulesConfig {
    pub activity_multipliers: BTreeMap<ActivityLevel, f64>,
    pub meal_fractions: BTreeMap<MealSlot, f64>,
    pub calorie_tolerance: f64,
    pub score_weights: ScoreWeights,
    pub top_k: usize,
}

impl Default for RulesConfig {
    fn default() -> Self {
        use ActivityLevel::*;
        use MealSlot::*;
        Self {
            activity_multipliers: BTreeMap::from([
                (Sedentary, 1.2),
                (Light, 1.375),
                (Moderate, 1.55),
                (Active, 1.725),
                (VeryActive, 1.9),
            ]),
            meal_fractions: BTreeMap::from([(Breakfast, 0.25), (Lunch, 0.35), (Dinner, 0.30), (Snack, 0.10)]),
            calorie_tolerance: 0.25,
            score_weights: ScoreWeights::default(),
            top_k: 5,
        }
    }
}

impl RulesConfig {
    pub fn validate(&self) -> Result<(), RulesError> {
        let bad = |msg: String| Err(RulesError::InvalidConfig(msg));
        for level in ActivityLevel::ALL {
            match self.activity_multipliers.get(level) {
                Some(m) if (1.0..=2.5).contains(m) => {}
                Some(m) => return bad(format!("multiplier for {level} is {m}, not in [1.0, 2.5]")),
                None => return bad(format!("missing activity multiplier for {level}")),
            }
        }
        let mut sum = 0.0;
        for slot in MealSlot::ALL {
            match self.meal_fractions.get(slot) {
                Some(f) if *f > 0.0 && *f <= 1.0 => sum += f,
                Some(f) => return bad(format!("meal fraction for {slot} is {f}, not in (0, 1]")),
                None => return bad(format!("missing meal fraction for {slot}")),
            }
        }
        if sum > 1.0 + 1e-9 {
            return bad(format!("meal fractions sum to {sum} > 1"));
        }
        if !(0.0..=1.0).contains(&self.calorie_tolerance) {
            return bad(format!("calorie_tolerance {} not in [0, 1]", self.calorie_tolerance));
        }
        let w = self.score_weights;
        if [w.rating_w, w.goal_w, w.calorie_fit_w].iter().any(|x| x.is_nan() || *x < 0.0)
            || (w.rating_w + w.goal_w + w.calorie_fit_w - 1.0).abs() > 1e-9
        {
            return bad("score weights must be non-negative and sum to 1".into());
        }
        if self.top_k < 1 {
            return bad("top_k must be at least 1".into());
        }
        Ok(())
    }

    fn multiplier(&self, level: ActivityLevel) -> f64 {
        self.activity_multipliers.get(&level).copied().unwrap_or(1.0)
    }

    fn meal_fraction(&self, slot: MealSlot) -> f64 {
        self.meal_fractions.get(&slot).copied().unwrap_or(1.0)
    }
}

/// Mifflin-St Jeor basal metabolic rate in kcal/day.
pub fn bmr(profile: &UserProfile) -> f64 {
    let sex_term = match profile.sex {
        Sex::Male => 5.0,
        Sex::Female => -161.0,
    };
    10.0 * profile.weight_kg + 6.25 * profile.height_cm - 5.0 * profile.age as f64 + sex_term
}

pub fn energy_needs(profile: &UserProfile, config: &RulesConfig) -> EnergyNeeds {
    let bmr_kcal = bmr(profile);
    let tdee_kcal = bmr_kcal * config.multiplier(profile.activity_level);
    EnergyNeeds { bmr_kcal, tdee_kcal, meal_budget_kcal: tdee_kcal * config.meal_fraction(profile.meal_slot) }
}

/// Exclusion rules, evaluated in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "R1_allergen")]
    Allergen,
    #[serde(rename = "R2_diet")]
    Diet,
    #[serde(rename = "R3_dislike")]
    Dislike,
    #[serde(rename = "R4_calorie_budget")]
    CalorieBudget,
}

impl Rule {
    pub const ORDER: [Rule; 4] = [Rule::Allergen, Rule::Diet, Rule::Dislike, Rule::CalorieBudget];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Allergen => "R1_allergen",
            Rule::Diet => "R2_diet",
            Rule::Dislike => "R3_dislike",
            Rule::CalorieBudget => "R4_calorie_budget",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOutcome {
    Pass,
    Fail(Rule),
}

/// Taxonomy categories a diet forbids.
pub fn forbidden_categories(diet: Diet) -> &'static [&'static str] {
    match diet {
        Diet::Omnivore => &[],
        Diet::Pescatarian => &["meat"],
        Diet::Vegetarian => &["meat", "fish"],
        Diet::Vegan => &["meat", "fish", "dairy", "egg"],
    }
}

/// Inclusive calorie band around the meal budget.
pub fn calorie_band(needs: &EnergyNeeds, config: &RulesConfig) -> (f64, f64) {
    let b = needs.meal_budget_kcal;
    (b * (1.0 - config.calorie_tolerance), b * (1.0 + config.calorie_tolerance))
}

pub fn apply_rules(
    profile: &UserProfile,
    recipe: &Recipe,
    needs: &EnergyNeeds,
    taxonomy: &IngredientTaxonomy,
    config: &RulesConfig,
) -> Result<RuleOutcome, RulesError> {
    if profile.allergens.iter().any(|a| taxonomy.token_matches(recipe, a)) {
        return Ok(RuleOutcome::Fail(Rule::Allergen));
    }
    for category in forbidden_categories(profile.diet) {
        let hit = taxonomy
            .recipe_in_category(recipe, category)
            .ok_or_else(|| RulesError::UnknownCategory(category.to_string()))?;
        if hit {
            return Ok(RuleOutcome::Fail(Rule::Diet));
        }
    }
    if profile.dislikes.iter().any(|d| taxonomy.token_matches(recipe, d)) {
        return Ok(RuleOutcome::Fail(Rule::Dislike));
    }
    let (lo, hi) = calorie_band(needs, config);
    let kcal = recipe.nutrition.calories;
    if kcal < lo || kcal > hi {
        return Ok(RuleOutcome::Fail(Rule::CalorieBudget));
    }
    Ok(RuleOutcome::Pass)
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// How well a recipe's nutrients serve the health goal, in [0, 1].
pub fn goal_alignment(goal: HealthGoal, recipe: &Recipe) -> f64 {
    let n = &recipe.nutrition;
    match goal {
        HealthGoal::WeightLoss => clamp01(n.fiber_g / 10.0) * 0.5 + clamp01(1.0 - n.fat_g / 40.0) * 0.5,
        HealthGoal::MuscleGain => clamp01(n.protein_g / 40.0),
        HealthGoal::Maintenance => 0.5,
    }
}

pub fn score(profile: &UserProfile, recipe: &Recipe, budget_kcal: f64, weights: &ScoreWeights) -> f64 {
    let fit = 1.0 - (recipe.nutrition.calories - budget_kcal).abs() / budget_kcal;
    clamp01(
        weights.rating_w * (recipe.rating / 5.0)
            + weights.goal_w * goal_alignment(profile.health_goal, recipe)
            + weights.calorie_fit_w * fit,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub recipe_id: String,
    pub score: f64,
    pub rank: usize,
    pub passed_rules: Vec<Rule>,
    pub meal_budget_kcal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingStatus {
    Ok,
    NoRecipeSatisfiesRules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub status: RankingStatus,
    pub needs: EnergyNeeds,
    pub recommendations: Vec<Recommendation>,
}

impl Ranking {
    pub fn ids(&self) -> Vec<&str> {
        self.recommendations.iter().map(|r| r.recipe_id.as_str()).collect()
    }
}

/// Filter the catalog through the rules, score survivors and keep the top `config.top_k`.
pub fn recommend(
    profile: &UserProfile,
    catalog: &[Recipe],
    taxonomy: &IngredientTaxonomy,
    config: &RulesConfig,
) -> Result<Ranking, RulesError> {
    if catalog.is_empty() {
        return Err(RulesError::EmptyCatalog);
    }
    let needs = energy_needs(profile, config);

    let mut survivors: Vec<(&Recipe, f64)> = Vec::new();
    for recipe in catalog {
        if apply_rules(profile, recipe, &needs, taxonomy, config)? == RuleOutcome::Pass {
            survivors.push((recipe, score(profile, recipe, needs.meal_budget_kcal, &config.score_weights)));
        }
    }
    survivors.sort_by(|(ra, sa), (rb, sb)| sb.total_cmp(sa).then_with(|| ra.id.cmp(&rb.id)));

    let recommendations: Vec<Recommendation> = survivors
        .into_iter()
        .take(config.top_k)
        .enumerate()
        .map(|(i, (r, s))| Recommendation {
            recipe_id: r.id.clone(),
            score: s,
            rank: i + 1,
            passed_rules: Rule::ORDER.to_vec(),
            meal_budget_kcal: needs.meal_budget_kcal,
        })
        .collect();

    Ok(Ranking {
        status: if recommendations.is_empty() { RankingStatus::NoRecipeSatisfiesRules } else { RankingStatus::Ok },
        needs,
        recommendations,
    })
}
