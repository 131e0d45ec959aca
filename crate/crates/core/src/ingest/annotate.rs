use std::collections::HashSet;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{recipe_features, user_features, IngestError, IngredientTaxonomy};
use crate::domain::{FeatureSchema, FeatureVector, Recipe, UserProfile};
use crate::rules::{recommend, RulesConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationConfig {
    /// Upper bound on sampled non-recommended recipes per profile.
    pub negatives_per_profile: usize,
    pub seed: u64,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self { negatives_per_profile: 200, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub profile_id: String,
    pub recipe_id: String,
    pub user: FeatureVector,
    pub recipe: FeatureVector,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub user_schema: FeatureSchema,
    pub recipe_schema: FeatureSchema,
    pub rows: Vec<LabeledRow>,
}

/// Both schemas of a dataset, persisted next to its CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchemas {
    pub user: FeatureSchema,
    pub recipe: FeatureSchema,
}

/// Per-profile RNG stream; independent of how many profiles precede it.
pub(crate) fn profile_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Sample up to `k` indices from `0..n`, returned in ascending order.
pub(crate) fn sample_sorted(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut picked = rand::seq::index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Label (profile, recipe) pairs with the rule engine's top-K decision.
///
/// For each profile the rows are the recommended recipes in rank order
/// (label 1) followed by up to `negatives_per_profile` uniformly sampled other
/// recipes in catalog order (label 0).
pub fn annotate(
    profiles: &[UserProfile],
    catalog: &[Recipe],
    taxonomy: &IngredientTaxonomy,
    user_schema: &FeatureSchema,
    recipe_schema: &FeatureSchema,
    rules: &RulesConfig,
    config: &AnnotationConfig,
) -> Result<LabeledDataset, IngestError> {
    if profiles.is_empty() {
        return Err(IngestError::EmptyInput("profiles"));
    }
    let recipe_vectors =
        catalog.iter().map(|r| recipe_features(r, recipe_schema, taxonomy)).collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (i, profile) in profiles.iter().enumerate() {
        let ranking = recommend(profile, catalog, taxonomy, rules)?;
        let user = user_features(profile, user_schema)?;
        let positives: HashSet<&str> = ranking.ids().into_iter().collect();

        let pool: Vec<usize> = (0..catalog.len()).filter(|&j| !positives.contains(catalog[j].id.as_str())).collect();
        let mut rng = profile_rng(config.seed, i);
        let negatives = sample_sorted(&mut rng, pool.len(), config.negatives_per_profile);

        let by_id = |id: &str| catalog.iter().position(|r| r.id == id).expect("ranked id in catalog");
        let chosen =
            ranking.ids().into_iter().map(|id| (by_id(id), 1u8)).chain(negatives.into_iter().map(|k| (pool[k], 0u8)));

        for (j, label) in chosen {
            rows.push(LabeledRow {
                profile_id: profile.id.clone(),
                recipe_id: catalog[j].id.clone(),
                user: user.clone(),
                recipe: recipe_vectors[j].clone(),
                label,
            });
        }
    }
    Ok(LabeledDataset { user_schema: user_schema.clone(), recipe_schema: recipe_schema.clone(), rows })
}

impl LabeledDataset {
    pub fn schemas(&self) -> DatasetSchemas {
        DatasetSchemas { user: self.user_schema.clone(), recipe: self.recipe_schema.clone() }
    }

    fn header(&self) -> Vec<String> {
        ["profile_id", "recipe_id"]
            .into_iter()
            .map(str::to_string)
            .chain(self.user_schema.names().map(str::to_string))
            .chain(self.recipe_schema.names().map(str::to_string))
            .chain(["label".to_string()])
            .collect()
    }

    /// One column per feature of both schemas plus `label`, preceded by the ids.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), IngestError> {
        let csv_err = |e: csv::Error| IngestError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header()).map_err(csv_err)?;
        for row in &self.rows {
            let record: Vec<String> = [row.profile_id.clone(), row.recipe_id.clone()]
                .into_iter()
                .chain(row.user.values().iter().map(f64::to_string))
                .chain(row.recipe.values().iter().map(f64::to_string))
                .chain([row.label.to_string()])
                .collect();
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| IngestError::Csv(e.to_string()))
    }

    pub fn read_csv<R: io::Read>(reader: R, schemas: &DatasetSchemas) -> Result<Self, IngestError> {
        let mut ds = LabeledDataset {
            user_schema: schemas.user.clone(),
            recipe_schema: schemas.recipe.clone(),
            rows: Vec::new(),
        };
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| IngestError::MalformedHeader(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != ds.header() {
            return Err(IngestError::MalformedHeader("dataset columns do not match the schemas".into()));
        }
        let nu = ds.user_schema.len();
        let nr = ds.recipe_schema.len();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
            let bad = |what: &str| IngestError::Csv(format!("row {}: bad {what}", line + 2));
            let nums = record
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("number"))?;
            let label = match nums[nu + nr] {
                0.0 => 0,
                1.0 => 1,
                _ => return Err(bad("label")),
            };
            let user = FeatureVector(nums[..nu].to_vec());
            let recipe = FeatureVector(nums[nu..nu + nr].to_vec());
            ds.user_schema.check(&user)?;
            ds.recipe_schema.check(&recipe)?;
            ds.rows.push(LabeledRow {
                profile_id: record[0].to_string(),
                recipe_id: record[1].to_string(),
                user,
                recipe,
                label,
            });
        }
        Ok(ds)
    }

    pub fn save(&self, csv_path: &Path, schema_path: &Path) -> Result<(), IngestError> {
        let file = std::fs::File::create(csv_path).map_err(|e| IngestError::io(csv_path, e))?;
        self.write_csv(file)?;
        let json = serde_json::to_string_pretty(&self.schemas()).expect("schemas serialize");
        std::fs::write(schema_path, json).map_err(|e| IngestError::io(schema_path, e))
    }

    pub fn load(csv_path: &Path, schema_path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(schema_path).map_err(|e| IngestError::io(schema_path, e))?;
        let schemas: DatasetSchemas = serde_json::from_str(&text).map_err(|e| IngestError::Csv(e.to_string()))?;
        let file = std::fs::File::open(csv_path).map_err(|e| IngestError::io(csv_path, e))?;
        Self::read_csv(file, &schemas)
    }
}
