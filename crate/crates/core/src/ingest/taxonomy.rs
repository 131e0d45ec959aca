use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::domain::Recipe;

/// Category token (`meat`, `fish`, `dairy`, ...) to ingredient keywords.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct IngredientTaxonomy {
    categories: BTreeMap<String, BTreeSet<String>>,
}

impl TryFrom<BTreeMap<String, Vec<String>>> for IngredientTaxonomy {
    type Error = IngestError;

    fn try_from(raw: BTreeMap<String, Vec<String>>) -> Result<Self, Self::Error> {
        let mut categories = BTreeMap::new();
        for (category, keywords) in raw {
            let category = category.trim().to_lowercase();
            let keywords: BTreeSet<String> =
                keywords.iter().map(|k| k.trim().to_lowercase()).filter(|k| !k.is_empty()).collect();
            if category.is_empty() || keywords.is_empty() {
                return Err(IngestError::Taxonomy(format!(
                    "category '{category}' must have a name and at least one keyword"
                )));
            }
            categories.insert(category, keywords);
        }
        Ok(Self { categories })
    }
}

impl From<IngredientTaxonomy> for BTreeMap<String, Vec<String>> {
    fn from(t: IngredientTaxonomy) -> Self {
        t.categories.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect()
    }
}

impl IngredientTaxonomy {
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = (&'a str, &'a [&'a str])>,
    {
        pairs
            .into_iter()
            .map(|(c, ks)| (c.to_string(), ks.iter().map(|k| k.to_string()).collect()))
            .collect::<BTreeMap<_, _>>()
            .try_into()
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| IngestError::Taxonomy(e.to_string()))
    }

    pub fn category(&self, name: &str) -> Option<&BTreeSet<String>> {
        self.categories.get(name)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    /// Whether any keyword of `recipe` belongs to `category`; `None` for an unknown category.
    pub fn recipe_in_category(&self, recipe: &Recipe, category: &str) -> Option<bool> {
        let keywords = self.categories.get(category)?;
        Some(recipe.keywords().any(|k| keywords.contains(k)))
    }

    /// A profile token matches when the recipe has it as a keyword, or when the
    /// token names a category and the recipe has one of its keywords.
    pub fn token_matches(&self, recipe: &Recipe, token: &str) -> bool {
        recipe.has_keyword(token) || self.recipe_in_category(recipe, token).unwrap_or(false)
    }
}

/// The taxonomy shipped with the examples and used by tests.
pub fn default_taxonomy() -> IngredientTaxonomy {
    IngredientTaxonomy::from_pairs([
        (
            "meat",
            &[
                "bacon",
                "beef",
                "chicken",
                "chorizo",
                "duck",
                "guanciale",
                "ham",
                "lamb",
                "pancetta",
                "pork",
                "prosciutto",
                "salami",
                "sausage",
                "turkey",
                "veal",
            ][..],
        ),
        ("fish", &["anchovy", "cod", "crab", "prawn", "salmon", "sardine", "shrimp", "tuna"][..]),
        ("dairy", &["butter", "cheese", "cream", "milk", "mozzarella", "parmesan", "pecorino", "yogurt"][..]),
        ("egg", &["egg", "eggs", "mayonnaise"][..]),
        ("mushroom", &["champignon", "mushroom", "mushrooms", "porcini", "shiitake"][..]),
        ("peanut", &["peanut", "peanuts"][..]),
        ("gluten", &["barley", "bread", "flour", "pasta", "spaghetti", "wheat"][..]),
    ])
    .expect("built-in taxonomy is valid")
}
