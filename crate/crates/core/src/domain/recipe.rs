use serde::{Deserialize, Serialize};

/// Per-serving nutrition facts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NutritionFacts {
    pub calories: f64,
    pub protein_g: f64,
    pub fat_g: f64,
    pub carbs_g: f64,
    pub fiber_g: f64,
    pub sugar_g: f64,
    pub sodium_mg: f64,
}

pub const MAX_CALORIES: f64 = 5000.0;

impl NutritionFacts {
    pub fn values(&self) -> [f64; 7] {
        [self.calories, self.protein_g, self.fat_g, self.carbs_g, self.fiber_g, self.sugar_g, self.sodium_mg]
    }

    pub fn is_valid(&self) -> bool {
        self.values().iter().all(|v| v.is_finite() && *v >= 0.0) && self.calories <= MAX_CALORIES
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: String,
    pub name: String,
    pub ingredients: Vec<String>,
    pub nutrition: NutritionFacts,
    pub prep_time_min: i64,
    pub rating: f64,
    pub rating_count: i64,
    pub seasonal: bool,
    #[serde(default)]
    pub cuisine: Option<String>,
}

impl Recipe {
    /// Whitespace-split keywords of every ingredient. Matching against allergens,
    /// dislikes and taxonomy categories happens per keyword.
    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.ingredients.iter().flat_map(|i| i.split_whitespace())
    }

    pub fn has_keyword(&self, keyword: &str) -> bool {
        self.keywords().any(|k| k == keyword)
    }

    pub fn is_valid(&self) -> bool {
        !self.ingredients.is_empty()
            && (0.0..=5.0).contains(&self.rating)
            && self.prep_time_min >= 0
            && self.nutrition.is_valid()
    }
}

/// Daily and per-meal energy requirements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyNeeds {
    pub bmr_kcal: f64,
    pub tdee_kcal: f64,
    pub meal_budget_kcal: f64,
}

#[cfg(test)]
pub(crate) fn recipe(id: &str, ingredients: &[&str], calories: f64) -> Recipe {
    Recipe {
        id: id.into(),
        name: format!("Recipe {id}"),
        ingredients: ingredients.iter().map(|s| s.to_string()).collect(),
        nutrition: NutritionFacts {
            calories,
            protein_g: 20.0,
            fat_g: 10.0,
            carbs_g: 50.0,
            fiber_g: 5.0,
            sugar_g: 6.0,
            sodium_mg: 400.0,
        },
        prep_time_min: 30,
        rating: 4.0,
        rating_count: 10,
        seasonal: false,
        cuisine: None,
    }
}
