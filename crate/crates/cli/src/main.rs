//! `mealmind` command-line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use mealmind::domain::{encode, FeatureSchema, FeatureVector, MealSlot, RawValue};
use mealmind::eval::{aggregate, load_ratings, EvalReport};
use mealmind::explain::{explain, Style};
use mealmind::ingest::{
    annotate, build_user_schema, default_taxonomy, load_catalog, load_profiles, recipe_schema, write_catalog,
    AnnotationConfig, CatalogStats, IngestError, IngredientTaxonomy, LabeledDataset,
};
use mealmind::session::{build_session, Session};
use mealmind::shap::{shap_bruteforce, shap_tree, AttributionReport, BackgroundSet};
use mealmind::tree::{fidelity, fit, DecisionTree, TrainConfig};
use mealmind::{AppConfig, Error, ExplanationRequest, ExplanationResult, Gateway, Recipe, UserProfile};
use serde::Serialize;
use serde_json::Value;

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "mealmind", version, about = "Explainable recipe recommendations")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    /// Seed for every sampling step. Falls back to the config file, then 42.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Sources {
    /// Service config; supplies catalog, taxonomy, rules and backends.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recipe catalog CSV; overrides the config.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Taxonomy JSON; overrides the config. Built-in taxonomy when neither is set.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ProfileArgs {
    /// Profile JSON: one object or an array.
    #[arg(long)]
    profile: PathBuf,
    /// Which profile to use when the file holds several.
    #[arg(long)]
    profile_id: Option<String>,
    /// Meal slot overriding the profile's own.
    #[arg(long, value_parser = parse_slot)]
    slot: Option<MealSlot>,
    /// Number of recommendations (1-10).
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a catalog and optionally annotate profiles into a training set.
    Ingest {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Profiles to annotate against the cleaned catalog.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        negatives: usize,
    },
    /// Rank the catalog for a profile.
    Recommend {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        sources: Sources,
    },
    /// Explain one recommendation, optionally against a contrast recipe.
    Explain {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        sources: Sources,
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        contrast: Option<String>,
        #[arg(long, default_value = "deterministic")]
        backend: String,
        /// Features per attribution that enter the prompt.
        #[arg(long, default_value_t = 3)]
        features: usize,
    },
    /// Fit a surrogate tree on an annotated dataset.
    TrainSurrogate {
        /// Dataset CSV written by `ingest --profiles`.
        #[arg(long)]
        dataset: PathBuf,
        /// Schema JSON; defaults to `<dataset>.schema.json` beside the CSV.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "recipe")]
        view: View,
        /// Where to write the fitted tree.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        min_samples_split: Option<usize>,
        #[arg(long)]
        min_gain: Option<f64>,
    },
    /// Shapley attributions of one instance under a saved tree.
    Shap {
        #[arg(long)]
        tree: PathBuf,
        /// JSON array of encoded values or object of named raw values.
        #[arg(long)]
        instance: PathBuf,
        /// JSON array of instances.
        #[arg(long)]
        background: PathBuf,
        /// Enumerate every coalition instead of the path algorithm.
        #[arg(long)]
        bruteforce: bool,
        /// Target class label; defaults to the predicted class.
        #[arg(long)]
        class: Option<String>,
    },
    /// Mean ratings and preference shares from a ratings CSV.
    Aggregate {
        #[arg(long)]
        ratings: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `listen_addr`.
        #[arg(long)]
        listen: Option<String>,
        /// Overrides `console_dir`.
        #[arg(long)]
        console: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum View {
    User,
    Recipe,
}

fn parse_slot(s: &str) -> Result<MealSlot, String> {
    s.parse()
}

/// Failure classes mapped to exit codes 1 and 2.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Io(m) => m,
        }
    }
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    serde_json::from_str(&read_file(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// A command's result: the JSON document and its text rendering.
struct Report {
    json: Value,
    text: String,
}

impl Report {
    fn new(value: &impl Serialize, text: String) -> Self {
        Self { json: serde_json::to_value(value).expect("reports serialize"), text }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; 2 is reserved for I/O
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();

    match run(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report.json).expect("json")),
                Format::Text => print!("{}", report.text),
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            match cli.format {
                Format::Json => {
                    let kind = if f.code() == 2 { "io_error" } else { "validation_error" };
                    eprintln!("{}", serde_json::json!({"error": kind, "message": f.message()}));
                }
                Format::Text => eprintln!("error: {}", f.message()),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    match &cli.command {
        Command::Ingest { catalog, taxonomy, out, profiles, negatives } => {
            ingest(catalog, taxonomy.as_deref(), out, profiles.as_deref(), *negatives, cli.seed.unwrap_or(DEFAULT_SEED))
        }
        Command::Recommend { profile, sources } => {
            let ctx = Context::load(sources, cli.seed)?;
            let p = ctx.profile(profile)?;
            let session = ctx.session(&p, profile.top_k)?;
            Ok(recommend_report(&session, &ctx.catalog))
        }
        Command::Explain { profile, sources, recipe, contrast, backend, features } => {
            let ctx = Context::load(sources, cli.seed)?;
            let p = ctx.profile(profile)?;
            let session = ctx.session(&p, profile.top_k)?;
            let mut req = match contrast {
                Some(b) => ExplanationRequest::contrastive(&p.id, recipe, b),
                None => ExplanationRequest::plain(&p.id, recipe),
            };
            req.backend_id = backend.clone();
            req.top_k = *features;
            let gateway = Gateway::from_configs(&ctx.config.backends)?;
            let deadline = tokio::time::Instant::now() + Duration::from_millis(ctx.config.request_timeout_ms);
            let rt = runtime()?;
            let result = rt.block_on(explain(&req, &session, &ctx.catalog, &ctx.taxonomy, &gateway, deadline))?;
            Ok(explain_report(&result))
        }
        Command::TrainSurrogate { dataset, schema, view, out, max_depth, min_samples_split, min_gain } => {
            let mut cfg = TrainConfig { seed: cli.seed.unwrap_or(DEFAULT_SEED), ..TrainConfig::default() };
            if let Some(d) = max_depth {
                cfg.max_depth = *d;
            }
            if let Some(m) = min_samples_split {
                cfg.min_samples_split = *m;
            }
            if let Some(g) = min_gain {
                cfg.min_gain = *g;
            }
            train_surrogate(dataset, schema.as_deref(), *view, out, &cfg)
        }
        Command::Shap { tree, instance, background, bruteforce, class } => {
            shap(tree, instance, background, *bruteforce, class.as_deref())
        }
        Command::Aggregate { ratings } => {
            let records = load_ratings(ratings)?;
            let report = aggregate(&records)?;
            Ok(Report::new(&report, aggregate_text(&report)))
        }
        Command::Serve { config, listen, console } => {
            let mut cfg = AppConfig::load(config)?;
            if let Some(addr) = listen {
                cfg.listen_addr = addr.clone();
            }
            if let Some(dir) = console {
                cfg.console_dir = Some(dir.clone());
            }
            if let Some(seed) = cli.seed {
                cfg.shap.seed = seed;
                cfg.train.seed = seed;
            }
            runtime()?.block_on(mealmind_service::serve(&cfg)).map_err(|e| {
                if e.is_io() {
                    Failure::Io(e.to_string())
                } else {
                    invalid(e.to_string())
                }
            })?;
            Ok(Report::new(&serde_json::json!({"status": "stopped"}), "stopped\n".into()))
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Runtime::new().map_err(|e| Failure::Io(format!("cannot start runtime: {e}")))
}

fn load_taxonomy(path: Option<&Path>) -> Result<IngredientTaxonomy, Failure> {
    Ok(match path {
        Some(p) => IngredientTaxonomy::load(p)?,
        None => default_taxonomy(),
    })
}

#[derive(Serialize)]
struct IngestReport {
    catalog: PathBuf,
    stats: CatalogStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<DatasetSummary>,
}

#[derive(Serialize)]
struct DatasetSummary {
    csv: PathBuf,
    schema: PathBuf,
    profiles: usize,
    rows: usize,
    positives: usize,
}

fn ingest(
    catalog: &Path,
    taxonomy: Option<&Path>,
    out: &Path,
    profiles: Option<&Path>,
    negatives: usize,
    seed: u64,
) -> Result<Report, Failure> {
    let taxonomy = load_taxonomy(taxonomy)?;
    let (recipes, stats) = load_catalog(catalog)?;
    if recipes.is_empty() {
        return Err(invalid(format!("{} has no usable recipes", catalog.display())));
    }
    std::fs::create_dir_all(out).map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
    let cleaned = out.join("recipes.csv");
    write_catalog(&cleaned, &recipes)?;
    write_file(&out.join("stats.json"), &serde_json::to_string_pretty(&stats).expect("stats"))?;

    let dataset = match profiles {
        None => None,
        Some(path) => {
            let profiles = load_profiles(path)?;
            let user_schema = build_user_schema(&profiles)?;
            let ann = AnnotationConfig { negatives_per_profile: negatives, seed };
            let data = annotate(
                &profiles,
                &recipes,
                &taxonomy,
                &user_schema,
                &recipe_schema(),
                &mealmind::rules::RulesConfig::default(),
                &ann,
            )?;
            let csv = out.join("dataset.csv");
            let schema = out.join("dataset.schema.json");
            data.save(&csv, &schema)?;
            Some(DatasetSummary {
                csv,
                schema,
                profiles: profiles.len(),
                rows: data.rows.len(),
                positives: data.rows.iter().filter(|r| r.label == 1).count(),
            })
        }
    };

    let mut text = format!("read {} rows, kept {}, dropped {}\n", stats.rows_read, stats.rows_kept, stats.dropped());
    for (reason, n) in &stats.drop_reasons {
        let _ = writeln!(text, "  {}: {n}", serde_json::to_value(reason).unwrap().as_str().unwrap_or_default());
    }
    let _ = writeln!(text, "wrote {}", cleaned.display());
    if let Some(d) = &dataset {
        let _ = writeln!(
            text,
            "annotated {} profiles: {} rows ({} recommended) -> {}",
            d.profiles,
            d.rows,
            d.positives,
            d.csv.display()
        );
    }
    let report = IngestReport { catalog: cleaned, stats, dataset };
    Ok(Report::new(&report, text))
}

struct Context {
    config: AppConfig,
    catalog: Vec<Recipe>,
    taxonomy: IngredientTaxonomy,
}

impl Context {
    fn load(sources: &Sources, seed: Option<u64>) -> Result<Self, Failure> {
        let mut config = match (&sources.config, &sources.catalog) {
            (Some(path), _) => AppConfig::load(path)?,
            (None, Some(catalog)) => AppConfig::new(catalog.clone()),
            (None, None) => return Err(invalid("either --config or --catalog is required")),
        };
        if let Some(c) = &sources.catalog {
            config.catalog_path = c.clone();
        }
        if let Some(t) = &sources.taxonomy {
            config.taxonomy_path = Some(t.clone());
        }
        if let Some(seed) = seed {
            config.shap.seed = seed;
            config.train.seed = seed;
        }
        let (catalog, _) = load_catalog(&config.catalog_path)?;
        let taxonomy = load_taxonomy(config.taxonomy_path.as_deref())?;
        Ok(Self { config, catalog, taxonomy })
    }

    fn profile(&self, args: &ProfileArgs) -> Result<UserProfile, Failure> {
        let profiles = load_profiles(&args.profile)?;
        let mut p = match &args.profile_id {
            Some(id) => profiles
                .into_iter()
                .find(|p| &p.id == id)
                .ok_or_else(|| invalid(format!("no profile '{id}' in {}", args.profile.display())))?,
            None if profiles.len() == 1 => profiles.into_iter().next().unwrap(),
            None => {
                return Err(invalid(format!(
                    "{} holds {} profiles; pick one with --profile-id",
                    args.profile.display(),
                    profiles.len()
                )))
            }
        };
        if p.id.is_empty() {
            p.id = "cli".into();
        }
        if let Some(slot) = args.slot {
            p.meal_slot = slot;
        }
        Ok(p)
    }

    fn session(&self, profile: &UserProfile, top_k: Option<usize>) -> Result<Session, Failure> {
        let mut rules = self.config.rules.clone();
        if let Some(k) = top_k {
            rules.top_k = k;
        }
        Ok(build_session(
            "cli".into(),
            profile,
            &self.catalog,
            &self.taxonomy,
            &rules,
            &self.config.session_config(),
            &[],
            0,
        )?)
    }
}

#[derive(Serialize)]
struct RecommendRow<'a> {
    rank: usize,
    recipe_id: &'a str,
    name: &'a str,
    calories: f64,
    score: f64,
}

fn recommend_report(session: &Session, catalog: &[Recipe]) -> Report {
    let rows: Vec<RecommendRow> = session
        .ranking
        .recommendations
        .iter()
        .map(|r| {
            let recipe = catalog.iter().find(|c| c.id == r.recipe_id).expect("ranked id in catalog");
            RecommendRow {
                rank: r.rank,
                recipe_id: &r.recipe_id,
                name: &recipe.name,
                calories: recipe.nutrition.calories,
                score: r.score,
            }
        })
        .collect();
    let needs = &session.ranking.needs;
    let mut text = format!(
        "profile {} ({}): BMR {:.1} kcal, TDEE {:.1} kcal, meal budget {:.1} kcal\n",
        session.profile.id, session.profile.meal_slot, needs.bmr_kcal, needs.tdee_kcal, needs.meal_budget_kcal
    );
    let _ = writeln!(text, "{:>4}  {:<8}  {:<32}  {:>8}  {:>6}", "rank", "id", "name", "kcal", "score");
    for r in &rows {
        let _ =
            writeln!(text, "{:>4}  {:<8}  {:<32}  {:>8.0}  {:>6.3}", r.rank, r.recipe_id, r.name, r.calories, r.score);
    }
    let json = serde_json::json!({
        "profile_id": session.profile.id,
        "meal_slot": session.profile.meal_slot,
        "needs": needs,
        "recommendations": rows,
    });
    Report { json, text }
}

fn explain_report(result: &ExplanationResult) -> Report {
    let mut text = format!("Prompt: {}\n\n{}\n", result.prompt, result.text);
    if result.deterministic_fallback {
        text.push_str("\n(remote backend failed; deterministic fallback used)\n");
    }
    let _ = writeln!(text, "\nFeatures for {}:", result.explained.recipe_id);
    for e in &result.explained.features {
        let origin = serde_json::to_value(e.origin).unwrap();
        let _ = writeln!(
            text,
            "  [{}] {} = {}  phi {:+.4}",
            origin.as_str().unwrap_or_default(),
            e.entry.feature,
            e.entry.raw_value,
            e.entry.phi
        );
    }
    if result.style == Style::Contrastive {
        if let Some(c) = &result.contrast {
            let _ = writeln!(text, "Features for {}:", c.recipe_id);
            for e in &c.features {
                let _ = writeln!(text, "  {} = {}  phi {:+.4}", e.entry.feature, e.entry.raw_value, e.entry.phi);
            }
        }
    }
    Report::new(result, text)
}

#[derive(Serialize)]
struct TrainReport {
    view: View,
    tree: PathBuf,
    rows: usize,
    fidelity: f64,
    depth: usize,
    leaves: usize,
    features: Vec<String>,
    classes: Vec<String>,
}

fn default_schema_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("schema.json")
}

fn train_surrogate(
    dataset: &Path,
    schema: Option<&Path>,
    view: View,
    out: &Path,
    cfg: &TrainConfig,
) -> Result<Report, Failure> {
    let schema_path = schema.map(Path::to_path_buf).unwrap_or_else(|| default_schema_path(dataset));
    let data = LabeledDataset::load(dataset, &schema_path)?;
    if data.rows.is_empty() {
        return Err(Failure::from(IngestError::EmptyInput("dataset rows")));
    }
    let (schema, rows): (&FeatureSchema, Vec<FeatureVector>) = match view {
        View::User => (&data.user_schema, data.rows.iter().map(|r| r.user.clone()).collect()),
        View::Recipe => (&data.recipe_schema, data.rows.iter().map(|r| r.recipe.clone()).collect()),
    };
    let labels: Vec<usize> = data.rows.iter().map(|r| r.label as usize).collect();
    let tree = fit(schema, &rows, &labels, vec!["0".into(), "1".into()], cfg)?;
    let fid = fidelity(&tree, &rows, &labels)?;
    write_file(out, &serde_json::to_string_pretty(&tree).expect("tree"))?;
    let report = TrainReport {
        view,
        tree: out.to_path_buf(),
        rows: rows.len(),
        fidelity: fid,
        depth: tree.depth(),
        leaves: tree.n_leaves(),
        features: schema.names().map(str::to_string).collect(),
        classes: tree.classes().to_vec(),
    };
    let text = format!(
        "fitted {} tree on {} rows: depth {}, {} leaves, fidelity {:.4}\nwrote {}\n",
        serde_json::to_value(view).unwrap().as_str().unwrap_or_default(),
        report.rows,
        report.depth,
        report.leaves,
        fid,
        out.display()
    );
    Ok(Report::new(&report, text))
}

fn parse_instance(schema: &FeatureSchema, v: &Value) -> Result<FeatureVector, Failure> {
    let x = match v {
        Value::Array(items) => FeatureVector(
            items
                .iter()
                .map(|i| i.as_f64().ok_or_else(|| invalid(format!("non-numeric encoded value {i}"))))
                .collect::<Result<_, _>>()?,
        ),
        Value::Object(map) => {
            let mut named = BTreeMap::new();
            for (k, val) in map {
                let raw = match val {
                    Value::Number(n) => RawValue::Number(n.as_f64().unwrap_or_default()),
                    Value::String(s) => RawValue::text(s.as_str()),
                    Value::Bool(b) => RawValue::flag(*b),
                    other => return Err(invalid(format!("feature '{k}': unsupported value {other}"))),
                };
                named.insert(k.clone(), raw);
            }
            encode(schema, &named)?
        }
        other => return Err(invalid(format!("instance must be an array or object, got {other}"))),
    };
    schema.check(&x)?;
    Ok(x)
}

#[derive(Serialize)]
struct ShapReport {
    method: &'static str,
    #[serde(flatten)]
    attribution: AttributionReport,
    phis: Vec<f64>,
    efficiency_gap: f64,
}

fn shap(
    tree: &Path,
    instance: &Path,
    background: &Path,
    bruteforce: bool,
    class: Option<&str>,
) -> Result<Report, Failure> {
    let tree: DecisionTree =
        serde_json::from_str(&read_file(tree)?).map_err(|e| invalid(format!("{}: {e}", tree.display())))?;
    let schema = tree.schema();
    let x = parse_instance(schema, &read_json(instance)?)?;
    let rows = match read_json(background)? {
        Value::Array(items) => items.iter().map(|v| parse_instance(schema, v)).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(invalid("background must be a JSON array of instances")),
    };
    let bg = BackgroundSet::new(rows)?;
    let target = match class {
        Some(label) => tree
            .class_index(label)
            .ok_or_else(|| invalid(format!("unknown class '{label}'; classes: {}", tree.classes().join(", "))))?,
        None => tree.predict_class(&x)?,
    };
    let attr = if bruteforce { shap_bruteforce(&tree, &x, &bg, target)? } else { shap_tree(&tree, &x, &bg, target)? };
    let report = ShapReport {
        method: if bruteforce { "bruteforce" } else { "tree" },
        attribution: AttributionReport::new(&attr, schema)?,
        phis: attr.phis.clone(),
        efficiency_gap: attr.efficiency_gap(),
    };
    let mut text = format!(
        "class {}: base {:.6}, output {:.6} ({} method)\n",
        attr.target_class, attr.base_value, attr.model_output, report.method
    );
    for e in &report.attribution.entries {
        let _ = writeln!(text, "  {:<24} {:<14} {:+.9}", e.feature, e.raw_value.to_string(), e.phi);
    }
    Ok(Report::new(&report, text))
}

fn aggregate_text(r: &EvalReport) -> String {
    let mut text = format!("{} ratings\n\nmean rating\n", r.records);
    for m in &r.means {
        let style = serde_json::to_value(m.style).unwrap();
        let _ = writeln!(text, "  {:<12} {:<12} {:.3}", m.model_id, style.as_str().unwrap_or_default(), m.mean);
    }
    let _ = writeln!(text, "\npreferred model ({} preferences)", r.preference_total);
    for s in &r.preferences {
        let _ = writeln!(text, "  {:<12} {:>4}  {:.1}%", s.model_id, s.count, s.percent);
    }
    text
}
