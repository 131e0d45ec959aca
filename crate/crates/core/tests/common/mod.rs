//! Generators and independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use mealmind::domain::{
    ActivityLevel, Diet, FeatureSchema, FeatureVector, HealthGoal, MealSlot, NutritionFacts, Recipe, Sex, Token,
    UserProfile,
};
use mealmind::ingest::IngredientTaxonomy;
use mealmind::shap::BackgroundSet;
use mealmind::tree::{DecisionTree, Node};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn numeric_schema(f: usize) -> FeatureSchema {
    let names: Vec<String> = (0..f).map(|i| format!("x{i}")).collect();
    FeatureSchema::numeric(&names).unwrap()
}

/// Feature values used by random instances; thresholds sit between them.
pub const LEVELS: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
const THRESHOLDS: [f64; 3] = [0.5, 1.5, 2.5];

fn grow(rng: &mut ChaCha8Rng, f: usize, classes: usize, depth: usize, nodes: &mut Vec<Node>) -> u64 {
    let me = nodes.len();
    if depth == 0 || rng.random_bool(0.2) {
        let counts: Vec<u64> = (0..classes).map(|_| rng.random_range(0..6)).collect();
        let mut counts = counts;
        if counts.iter().sum::<u64>() == 0 {
            counts[0] = 1;
        }
        let cover = counts.iter().sum();
        nodes.push(Node::Leaf { class_counts: counts, cover });
        return cover;
    }
    nodes.push(Node::Leaf { class_counts: vec![], cover: 0 });
    let feature_index = rng.random_range(0..f);
    let threshold = THRESHOLDS[rng.random_range(0..THRESHOLDS.len())];
    let left = nodes.len();
    let lc = grow(rng, f, classes, depth - 1, nodes);
    let right = nodes.len();
    let rc = grow(rng, f, classes, depth - 1, nodes);
    nodes[me] = Node::Split { feature_index, threshold, left, right, cover: lc + rc };
    lc + rc
}

/// A random valid tree over `f` numeric features; features may repeat on a path.
pub fn random_tree(rng: &mut ChaCha8Rng, f: usize, classes: usize, max_depth: usize) -> DecisionTree {
    let mut nodes = Vec::new();
    grow(rng, f, classes, max_depth, &mut nodes);
    let labels = (0..classes).map(|c| format!("c{c}")).collect();
    DecisionTree::from_parts(numeric_schema(f), labels, nodes).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, f: usize) -> FeatureVector {
    FeatureVector((0..f).map(|_| LEVELS[rng.random_range(0..LEVELS.len())]).collect())
}

pub fn random_background(rng: &mut ChaCha8Rng, f: usize, n: usize) -> BackgroundSet {
    BackgroundSet::new((0..n).map(|_| random_vector(rng, f)).collect()).unwrap()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Textbook Shapley values of the interventional game, from the definition:
/// every coalition, every background row, predictions via the public API.
pub fn oracle_shap(
    tree: &DecisionTree,
    x: &FeatureVector,
    background: &BackgroundSet,
    class: usize,
) -> (f64, Vec<f64>) {
    let f = x.len();
    let value = |mask: usize| -> f64 {
        let mut total = 0.0;
        for b in background.rows() {
            let z: Vec<f64> = (0..f).map(|i| if mask >> i & 1 == 1 { x[i] } else { b[i] }).collect();
            total += tree.predict_proba(&FeatureVector(z)).unwrap()[class];
        }
        total / background.len() as f64
    };
    let values: Vec<f64> = (0..1usize << f).map(value).collect();
    let mut phis = vec![0.0; f];
    for (i, phi) in phis.iter_mut().enumerate() {
        for mask in 0..1usize << f {
            if mask >> i & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = factorial(s) * factorial(f - s - 1) / factorial(f);
            *phi += w * (values[mask | 1 << i] - values[mask]);
        }
    }
    (values[0], phis)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Rule-soundness generators and checker.

pub const INGREDIENT_POOL: [&str; 24] = [
    "bacon",
    "chicken",
    "beef",
    "salmon",
    "tuna",
    "shrimp",
    "cheese",
    "milk",
    "butter",
    "egg",
    "mushroom",
    "porcini",
    "peanut",
    "bread",
    "pasta",
    "rice",
    "lentil",
    "tomato",
    "onion",
    "basil",
    "tofu",
    "spinach",
    "smoked bacon",
    "olive oil",
];

/// Tokens profiles may list: keywords and category names.
pub const TOKEN_POOL: [&str; 12] =
    ["peanut", "egg", "mushroom", "gluten", "dairy", "fish", "tomato", "onion", "bacon", "shrimp", "basil", "milk"];

fn pick<T: Token>(rng: &mut ChaCha8Rng) -> T {
    T::ALL[rng.random_range(0..T::ALL.len())]
}

fn tokens(rng: &mut ChaCha8Rng, max: usize) -> Vec<String> {
    let n = rng.random_range(0..=max);
    let mut v: Vec<String> = (0..n).map(|_| TOKEN_POOL[rng.random_range(0..TOKEN_POOL.len())].to_string()).collect();
    v.sort();
    v.dedup();
    v
}

pub fn random_profile(rng: &mut ChaCha8Rng, id: usize) -> UserProfile {
    UserProfile {
        id: format!("p{id}"),
        age: rng.random_range(13..=90),
        sex: pick::<Sex>(rng),
        height_cm: rng.random_range(140.0..=200.0),
        weight_kg: rng.random_range(40.0..=130.0),
        activity_level: pick::<ActivityLevel>(rng),
        diet: pick::<Diet>(rng),
        health_goal: pick::<HealthGoal>(rng),
        allergens: tokens(rng, 2),
        dislikes: tokens(rng, 2),
        meal_slot: pick::<MealSlot>(rng),
    }
}

pub fn random_catalog(rng: &mut ChaCha8Rng, n: usize) -> Vec<Recipe> {
    (0..n)
        .map(|i| {
            let k = rng.random_range(1..=5);
            let ingredients =
                (0..k).map(|_| INGREDIENT_POOL[rng.random_range(0..INGREDIENT_POOL.len())].to_string()).collect();
            Recipe {
                id: format!("r{i:03}"),
                name: format!("Dish {i}"),
                ingredients,
                nutrition: NutritionFacts {
                    calories: rng.random_range(80.0..=1400.0),
                    protein_g: rng.random_range(0.0..=60.0),
                    fat_g: rng.random_range(0.0..=60.0),
                    carbs_g: rng.random_range(0.0..=120.0),
                    fiber_g: rng.random_range(0.0..=20.0),
                    sugar_g: rng.random_range(0.0..=40.0),
                    sodium_mg: rng.random_range(0.0..=2000.0),
                },
                prep_time_min: rng.random_range(0..=120),
                rating: rng.random_range(0.0..=5.0),
                rating_count: rng.random_range(0..=500),
                seasonal: rng.random_bool(0.5),
                cuisine: None,
            }
        })
        .collect()
}

fn keywords(r: &Recipe) -> Vec<&str> {
    r.ingredients.iter().flat_map(|i| i.split_whitespace()).collect()
}

fn matches(taxonomy: &IngredientTaxonomy, r: &Recipe, token: &str) -> bool {
    keywords(r).iter().any(|k| *k == token || taxonomy.category(token).is_some_and(|c| c.contains(*k)))
}

/// Mifflin-St Jeor with the default multipliers and meal fractions, by hand.
pub fn expected_band(p: &UserProfile) -> (f64, f64) {
    let s = if p.sex == Sex::Male { 5.0 } else { -161.0 };
    let bmr = 10.0 * p.weight_kg + 6.25 * p.height_cm - 5.0 * p.age as f64 + s;
    let mult = match p.activity_level {
        ActivityLevel::Sedentary => 1.2,
        ActivityLevel::Light => 1.375,
        ActivityLevel::Moderate => 1.55,
        ActivityLevel::Active => 1.725,
        ActivityLevel::VeryActive => 1.9,
    };
    let frac = match p.meal_slot {
        MealSlot::Breakfast => 0.25,
        MealSlot::Lunch => 0.35,
        MealSlot::Dinner => 0.30,
        MealSlot::Snack => 0.10,
    };
    let budget = bmr * mult * frac;
    (budget * 0.75, budget * 1.25)
}

/// Every way `r` could violate `p`'s restrictions; empty when sound.
pub fn violations(p: &UserProfile, r: &Recipe, taxonomy: &IngredientTaxonomy) -> Vec<String> {
    let mut out = Vec::new();
    for a in &p.allergens {
        if matches(taxonomy, r, a) {
            out.push(format!("allergen {a}"));
        }
    }
    for d in &p.dislikes {
        if matches(taxonomy, r, d) {
            out.push(format!("dislike {d}"));
        }
    }
    let banned: &[&str] = match p.diet {
        Diet::Omnivore => &[],
        Diet::Pescatarian => &["meat"],
        Diet::Vegetarian => &["meat", "fish"],
        Diet::Vegan => &["meat", "fish", "dairy", "egg"],
    };
    for c in banned {
        if matches(taxonomy, r, c) {
            out.push(format!("diet {c}"));
        }
    }
    let (lo, hi) = expected_band(p);
    let kcal = r.nutrition.calories;
    // band edges computed in a different order may differ in the last ulp
    if kcal < lo - 1e-9 * lo || kcal > hi + 1e-9 * hi {
        out.push(format!("calories {kcal} outside [{lo}, {hi}]"));
    }
    out
}
