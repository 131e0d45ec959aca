use std::collections::{BTreeMap, HashSet};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::domain::{NutritionFacts, Recipe, MAX_CALORIES};

pub const CATALOG_COLUMNS: [&str; 15] = [
    "recipe_id",
    "name",
    "ingredients",
    "calories",
    "protein_g",
    "fat_g",
    "carbs_g",
    "fiber_g",
    "sugar_g",
    "sodium_mg",
    "prep_time_min",
    "rating",
    "rating_count",
    "seasonal",
    "cuisine",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    MalformedRow,
    MissingId,
    MissingNutrition,
    NegativeNutrition,
    ZeroCalories,
    CaloriesOverLimit,
    EmptyIngredients,
    InvalidPrepTime,
    RatingOutOfRange,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CatalogStats {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub drop_reasons: BTreeMap<DropReason, usize>,
}

impl CatalogStats {
    pub fn dropped(&self) -> usize {
        self.drop_reasons.values().sum()
    }
}

/// Column positions resolved from the header; extra columns are ignored.
struct Columns([usize; 15]);

impl Columns {
    fn resolve(header: &csv::StringRecord) -> Result<Self, IngestError> {
        let mut idx = [0; 15];
        for (slot, name) in idx.iter_mut().zip(CATALOG_COLUMNS) {
            *slot = header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| IngestError::MalformedHeader(format!("missing column '{name}'")))?;
        }
        Ok(Self(idx))
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, col: usize) -> &'r str {
        record.get(self.0[col]).unwrap_or("").trim()
    }
}

fn parse_ingredients(raw: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    raw.split('|')
        .map(|i| i.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .filter(|i| !i.is_empty() && seen.insert(i.clone()))
        .collect()
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_lowercase().as_str() {
        "" | "0" | "false" | "no" | "n" => Some(false),
        "1" | "true" | "yes" | "y" => Some(true),
        _ => None,
    }
}

fn parse_int(raw: &str) -> Option<i64> {
    raw.parse::<i64>().ok().or_else(|| {
        let f = raw.parse::<f64>().ok()?;
        (f.is_finite() && f.fract() == 0.0).then_some(f as i64)
    })
}

fn parse_row(cols: &Columns, record: &csv::StringRecord) -> Result<Recipe, DropReason> {
    let id = cols.get(record, 0);
    if id.is_empty() {
        return Err(DropReason::MissingId);
    }

    let mut nutrients = [0.0; 7];
    for (k, slot) in nutrients.iter_mut().enumerate() {
        *slot = cols
            .get(record, 3 + k)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(DropReason::MissingNutrition)?;
    }
    let [calories, protein_g, fat_g, carbs_g, fiber_g, sugar_g, sodium_mg] = nutrients;
    if nutrients.iter().any(|v| *v < 0.0) {
        return Err(DropReason::NegativeNutrition);
    }
    if calories == 0.0 {
        return Err(DropReason::ZeroCalories);
    }
    if calories > MAX_CALORIES {
        return Err(DropReason::CaloriesOverLimit);
    }

    let ingredients = parse_ingredients(cols.get(record, 2));
    if ingredients.is_empty() {
        return Err(DropReason::EmptyIngredients);
    }

    let prep_time_min = parse_int(cols.get(record, 10)).filter(|p| *p >= 0).ok_or(DropReason::InvalidPrepTime)?;
    let rating = cols
        .get(record, 11)
        .parse::<f64>()
        .ok()
        .filter(|r| (0.0..=5.0).contains(r))
        .ok_or(DropReason::RatingOutOfRange)?;
    let rating_count = match cols.get(record, 12) {
        "" => 0,
        raw => parse_int(raw).filter(|c| *c >= 0).ok_or(DropReason::MalformedRow)?,
    };
    let seasonal = parse_bool(cols.get(record, 13)).ok_or(DropReason::MalformedRow)?;
    let cuisine = Some(cols.get(record, 14)).filter(|c| !c.is_empty()).map(str::to_string);

    Ok(Recipe {
        id: id.to_string(),
        name: cols.get(record, 1).to_string(),
        ingredients,
        nutrition: NutritionFacts { calories, protein_g, fat_g, carbs_g, fiber_g, sugar_g, sodium_mg },
        prep_time_min,
        rating,
        rating_count,
        seasonal,
        cuisine,
    })
}

/// Read and clean a recipe catalog from any reader.
pub fn read_catalog<R: io::Read>(reader: R) -> Result<(Vec<Recipe>, CatalogStats), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| IngestError::MalformedHeader(e.to_string()))?.clone();
    let cols = Columns::resolve(&header)?;

    let mut stats = CatalogStats::default();
    let mut recipes = Vec::new();
    let mut ids = HashSet::new();

    for record in rdr.records() {
        stats.rows_read += 1;
        let outcome = match record {
            Ok(rec) if rec.len() == header.len() => parse_row(&cols, &rec),
            Ok(_) => Err(DropReason::MalformedRow),
            Err(e) if e.is_io_error() => return Err(IngestError::Csv(e.to_string())),
            Err(_) => Err(DropReason::MalformedRow),
        };
        match outcome {
            Ok(recipe) if !ids.insert(recipe.id.clone()) => {
                *stats.drop_reasons.entry(DropReason::DuplicateId).or_default() += 1;
            }
            Ok(recipe) => recipes.push(recipe),
            Err(reason) => *stats.drop_reasons.entry(reason).or_default() += 1,
        }
    }
    stats.rows_kept = recipes.len();
    debug_assert_eq!(stats.rows_kept + stats.dropped(), stats.rows_read);
    Ok((recipes, stats))
}

pub fn load_catalog(path: &Path) -> Result<(Vec<Recipe>, CatalogStats), IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_catalog(file)
}

pub fn write_catalog_to<W: io::Write>(writer: W, recipes: &[Recipe]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| IngestError::Csv(e.to_string());
    w.write_record(CATALOG_COLUMNS).map_err(csv_err)?;
    for r in recipes {
        let n = &r.nutrition;
        let row = [
            r.id.clone(),
            r.name.clone(),
            r.ingredients.join("|"),
            n.calories.to_string(),
            n.protein_g.to_string(),
            n.fat_g.to_string(),
            n.carbs_g.to_string(),
            n.fiber_g.to_string(),
            n.sugar_g.to_string(),
            n.sodium_mg.to_string(),
            r.prep_time_min.to_string(),
            r.rating.to_string(),
            r.rating_count.to_string(),
            r.seasonal.to_string(),
            r.cuisine.clone().unwrap_or_default(),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.to_string()))
}

pub fn write_catalog(path: &Path, recipes: &[Recipe]) -> Result<(), IngestError> {
    let file = std::fs::File::create(path).map_err(|e| IngestError::io(path, e))?;
    write_catalog_to(file, recipes)
}
