use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::io::{
    num, read_rwi, read_training, read_unit_truth, write_csv, write_rwi, write_training, Manifest, RwiRow,
};
use super::training_set;
use crate::awe::{rwi_to_awe, AweMode};
use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate, grid_search, out_of_fold_predictions, univariate_importance, Dataset, Protocol, DEFAULT_FOLDS,
};
use crate::gbdt::{paper_grid, train, GbdtParams, WealthModel};
use crate::ingest::{read_admin_assignment, read_clusters, read_country_stats, read_features, read_households, read_population};
use crate::labels::{cluster_labels, household_index_by_country, LabelMode};
use crate::mapping::{
    aggregate_to_units, predict_tiles, privacy_aggregate, validate_units, PrivacyPolicy, AGGREGATION_CAP_ZOOM,
    PRIVACY_THRESHOLD,
};
use crate::synth::{synth_world, SynthConfig};
use crate::targeting::{emit_table, run_scheme, Scheme, SurveyCluster, TargetHousehold, TargetingContext, BUDGETS, TABLE_COLUMNS};
use crate::tilegrid::{latlon_to_tile, BASE_ZOOM};
use crate::uncertainty::{
    build_error_predictors, country_error_summary, fit_least_squares, predict_error, read_country_attributes,
    ErrorContext, PredictorSpec,
};

#[derive(Debug, Parser)]
#[command(name = "wealthmap", version, about = "Micro-regional wealth estimation pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Base random seed, recorded in every output.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label clusters and join tile features: writes training.csv.
    Ingest(IngestArgs),
    /// Fit the boosted-tree model: writes model.txt.
    Train(TrainArgs),
    /// Cross-validate: writes cv_report.csv and importance.csv.
    Evaluate(EvaluateArgs),
    /// Predict every populated tile with privacy pooling: writes rwi.csv.
    Predict(PredictArgs),
    /// Average tiles into administrative units: writes units.csv.
    Aggregate(AggregateArgs),
    /// Convert relative to absolute wealth: writes awe.csv.
    Awe(AweArgs),
    /// Fit and apply the error model: writes error_model.csv,
    /// error_summary.csv and rwi.csv with an error column.
    Error(ErrorArgs),
    /// Simulate geographic targeting: writes targeting_report.csv.
    Target(TargetArgs),
    /// Generate a synthetic input world.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub population: PathBuf,
    #[arg(long)]
    pub clusters: PathBuf,
    #[arg(long)]
    pub households: PathBuf,
    /// Average household scores with survey weights.
    #[arg(long)]
    pub weighted_labels: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 5)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
}

impl ModelArgs {
    fn params(&self, seed: u64) -> GbdtParams {
        GbdtParams {
            max_depth: self.max_depth,
            min_child_weight: self.min_child_weight,
            n_trees: self.trees,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub training: PathBuf,
    /// Raw tile features; their per-country statistics are stored with the model.
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Choose depth and minimum child weight over the 7 x 5 grid by
    /// cross-validated MSE; writes grid_search.csv.
    #[arg(long)]
    pub tune: bool,
    #[arg(long, default_value = "basic_kfold")]
    pub protocol: Protocol,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub training: PathBuf,
    /// basic_kfold, leave_country_out, spatial or all.
    #[arg(long, default_value = "all")]
    pub protocol: String,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub k: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub population: PathBuf,
    #[arg(long, default_value_t = PRIVACY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = AGGREGATION_CAP_ZOOM)]
    pub cap_zoom: u8,
}

#[derive(Debug, Clone, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub rwi: PathBuf,
    #[arg(long)]
    pub admin: PathBuf,
    /// Ground-truth unit means (level, unit_id, value); writes validation.csv.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AweArgs {
    #[arg(long)]
    pub rwi: PathBuf,
    #[arg(long)]
    pub country_stats: PathBuf,
    /// Scale the rank itself rather than its inverse-CDF value.
    #[arg(long)]
    pub literal: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ErrorArgs {
    #[arg(long)]
    pub rwi: PathBuf,
    #[arg(long)]
    pub training: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub population: PathBuf,
    #[arg(long)]
    pub clusters: PathBuf,
    #[arg(long)]
    pub country_stats: PathBuf,
    #[arg(long)]
    pub country_attributes: PathBuf,
    /// base, imagery or no_model_features.
    #[arg(long, default_value = "base")]
    pub spec: PredictorSpec,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub k: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    #[arg(long)]
    pub rwi: PathBuf,
    #[arg(long)]
    pub population: PathBuf,
    #[arg(long)]
    pub admin: PathBuf,
    /// Survey clusters for the survey and nearest-cluster schemes.
    #[arg(long)]
    pub clusters: PathBuf,
    #[arg(long)]
    pub households: PathBuf,
    /// Geolocated households whose asset index is the ground truth.
    #[arg(long)]
    pub eval_households: PathBuf,
    /// Comma-separated schemes, e.g. ml_tiles,ml_units:district,knn_clusters:5.
    /// Default: every scheme at every admin level, k in {1, 5}.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<Scheme>,
    #[arg(long, value_delimiter = ',', default_values_t = BUDGETS.to_vec())]
    pub budget: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub countries: usize,
    #[arg(long, default_value_t = 500)]
    pub tiles: usize,
    #[arg(long, default_value_t = 60)]
    pub clusters: usize,
    #[arg(long, default_value_t = 12)]
    pub households: usize,
    #[arg(long, default_value_t = 200)]
    pub target_households: usize,
    #[arg(long, default_value_t = 0.0)]
    pub spatial_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub household_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub feature_noise: f64,
    #[arg(long, default_value_t = 2.0)]
    pub jitter_urban_km: f64,
    #[arg(long, default_value_t = 5.0)]
    pub jitter_rural_km: f64,
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run<I, T>(argv: I) -> Result<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::invalid(e.to_string().trim_end().to_string()))?;
    run_cli(&cli)
}

/// Runs a parsed command line inside a pool of the requested size.
pub fn run_cli(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker threads: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cli.common))
}

fn dispatch(command: &Command, common: &Common) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    match command {
        Command::Ingest(a) => ingest(a, common),
        Command::Train(a) => train_model(a, common),
        Command::Evaluate(a) => evaluate(a, common),
        Command::Predict(a) => predict(a, common),
        Command::Aggregate(a) => aggregate(a, common),
        Command::Awe(a) => awe(a, common),
        Command::Error(a) => error_model(a, common),
        Command::Target(a) => target(a, common),
        Command::Synth(a) => synth(a, common),
    }
}

fn manifest(command: &str, common: &Common, inputs: &[&Path]) -> Result<Manifest> {
    let mut m = Manifest::new(command, common.seed);
    for p in inputs {
        m.input(p)?;
    }
    Ok(m)
}

fn ingest(a: &IngestArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let m = manifest("ingest", common, &[&a.features, &a.population, &a.clusters, &a.households])?;
    let features = read_features(&a.features)?;
    let population = read_population(&a.population)?;
    let clusters = read_clusters(&a.clusters)?;
    let households = read_households(&a.households)?;
    let mode = if a.weighted_labels {
        LabelMode::Weighted
    } else {
        LabelMode::Unweighted
    };
    let set = training_set(&features, &population, &clusters, &households, mode)?;
    let path = common.out.join("training.csv");
    write_training(&path, &m, &set)?;
    Ok(vec![path])
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_training_set(&read_training(path)?)
}

fn read_model(path: &Path) -> Result<WealthModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    WealthModel::from_text(&body)
}

fn train_model(a: &TrainArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let m = manifest("train", common, &[&a.training, &a.features])?;
    let data = load_dataset(&a.training)?;
    let features = read_features(&a.features)?;
    let mut params = a.model.params(common.seed);
    params.validate()?;
    let mut written = Vec::new();
    if a.tune {
        let search = grid_search(&data, a.protocol, &paper_grid(), &params, a.k, common.seed)?;
        params = search.best;
        let path = common.out.join("grid_search.csv");
        write_csv(
            &path,
            &m,
            &["max_depth", "min_child_weight", "cv_mse"],
            search
                .points
                .iter()
                .map(|p| [p.max_depth.to_string(), num(p.min_child_weight), num(p.mse)]),
        )?;
        written.push(path);
    }
    let model = train(&data.x, &data.y, None, &params)?
        .with_metadata(data.feature_names.clone(), Some(features.fit_norm_stats()));
    let path = common.out.join("model.txt");
    fs::write(&path, format!("{}\n{}", m.line(), model.to_text())).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn evaluate(a: &EvaluateArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let m = manifest("evaluate", common, &[&a.training])?;
    let data = load_dataset(&a.training)?;
    let params = a.model.params(common.seed);
    params.validate()?;
    let protocols: Vec<Protocol> = if a.protocol == "all" {
        Protocol::ALL.to_vec()
    } else {
        vec![a.protocol.parse()?]
    };
    let mut rows: Vec<[String; 6]> = Vec::new();
    for protocol in protocols {
        let report = cross_validate(&data, protocol, a.k, common.seed, &params)?;
        let p = protocol.as_str().to_string();
        for r in &report.results {
            rows.push([
                p.clone(),
                r.country.to_string(),
                r.fold.to_string(),
                r.r2.map_or_else(String::new, num),
                r.n_test.to_string(),
                num(r.sse),
            ]);
        }
        for (c, r2) in &report.per_country {
            rows.push([p.clone(), c.to_string(), "mean".into(), num(*r2), String::new(), String::new()]);
        }
        let n: usize = report.results.iter().map(|r| r.n_test).sum();
        let sse: f64 = report.results.iter().map(|r| r.sse).sum();
        rows.push([p, "all".into(), "mean".into(), num(report.mean_r2()), n.to_string(), num(sse)]);
    }
    let report_path = common.out.join("cv_report.csv");
    write_csv(&report_path, &m, &["protocol", "country", "fold", "r2", "n_test", "sse"], rows)?;

    let model = train(&data.x, &data.y, None, &params)?;
    let gain = model.gain_importance(data.feature_names.len());
    let mut univariate: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for u in univariate_importance(&data)? {
        let name = data.feature_names.iter().find(|n| **n == u.feature).expect("known feature");
        let e = univariate.entry(name.as_str()).or_default();
        e.0 += u.r2;
        e.1 += 1;
    }
    let importance_path = common.out.join("importance.csv");
    write_csv(
        &importance_path,
        &m,
        &["feature", "mean_gain", "split_count", "univariate_r2"],
        data.feature_names.iter().enumerate().map(|(j, name)| {
            let (s, n) = univariate.get(name.as_str()).copied().unwrap_or((0.0, 0));
            [
                name.clone(),
                num(gain.mean_gain[j]),
                gain.split_count[j].to_string(),
                if n > 0 { num(s / n as f64) } else { String::new() },
            ]
        }),
    )?;
    Ok(vec![report_path, importance_path])
}

fn predict(a: &PredictArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let m = manifest("predict", common, &[&a.model, &a.features, &a.population])?;
    let model = read_model(&a.model)?;
    let features = read_features(&a.features)?;
    let population = read_population(&a.population)?;
    let populated: Vec<_> = predict_tiles(&model, &features, &population)?
        .into_iter()
        .filter(|e| e.population > 0.0)
        .collect();
    let policy = PrivacyPolicy {
        threshold: a.threshold,
        cap_zoom: a.cap_zoom,
    };
    let rows: Vec<RwiRow> = privacy_aggregate(&populated, policy)?
        .into_iter()
        .map(|estimate| RwiRow { estimate, error: None })
        .collect();
    let path = common.out.join("rwi.csv");
    write_rwi(&path, &m, &rows)?;
    Ok(vec![path])
}

fn aggregate(a: &AggregateArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let mut inputs: Vec<&Path> = vec![&a.rwi, &a.admin];
    if let Some(t) = &a.truth {
        inputs.push(t);
    }
    let m = manifest("aggregate", common, &inputs)?;
    let estimates: Vec<_> = read_rwi(&a.rwi)?.into_iter().map(|r| r.estimate).collect();
    let assignment = read_admin_assignment(&a.admin)?;
    let agg = aggregate_to_units(&estimates, &assignment);
    let units_path = common.out.join("units.csv");
    write_csv(
        &units_path,
        &m,
        &["level", "unit_id", "country", "rwi", "population", "n_tiles"],
        agg.units.iter().map(|u| {
            [
                u.level.clone(),
                u.unit_id.clone(),
                u.country.to_string(),
                num(u.mean_value),
                num(u.population),
                u.n_tiles.to_string(),
            ]
        }),
    )?;
    let mut written = vec![units_path];
    if let Some(truth_path) = &a.truth {
        let truth = read_unit_truth(truth_path)?;
        let levels: BTreeSet<&str> = agg.units.iter().map(|u| u.level.as_str()).collect();
        let mut rows = Vec::new();
        for level in levels {
            let units: Vec<_> = agg.units.iter().filter(|u| u.level == level).cloned().collect();
            let v = validate_units(&units, &truth)?;
            rows.push([level.to_string(), "all".into(), num(v.pooled_r2), v.scatter.len().to_string()]);
            for (c, r2) in &v.per_country {
                let n = v.scatter.iter().filter(|p| p.country == *c).count();
                let r2 = match r2 {
                    Ok(r) => num(*r),
                    Err(_) => String::new(),
                };
                rows.push([level.to_string(), c.to_string(), r2, n.to_string()]);
            }
        }
        let path = common.out.join("validation.csv");
        write_csv(&path, &m, &["level", "country", "r2", "n_units"], rows)?;
        written.push(path);
    }
    Ok(written)
}

fn awe(a: &AweArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let m = manifest("awe", common, &[&a.rwi, &a.country_stats])?;
    let rows = read_rwi(&a.rwi)?;
    let stats = read_country_stats(&a.country_stats)?;
    let tiles: Vec<_> = rows
        .iter()
        .map(|r| (r.estimate.tile, r.estimate.country, r.estimate.rwi))
        .collect();
    let mode = if a.literal { AweMode::Literal } else { AweMode::IcdfOfRank };
    let estimates = rwi_to_awe(&tiles, &stats, mode)?;
    let path = common.out.join("awe.csv");
    write_csv(
        &path,
        &m,
        &["quadkey", "country", "rwi", "rank_quantile", "awe_usd"],
        estimates.iter().map(|e| {
            [
                e.tile.quadkey(),
                e.country.to_string(),
                num(e.rwi),
                num(e.rank_quantile),
                num(e.awe_usd),
            ]
        }),
    )?;
    Ok(vec![path])
}

fn error_model(a: &ErrorArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let m = manifest(
        "error",
        common,
        &[
            &a.rwi,
            &a.training,
            &a.features,
            &a.population,
            &a.clusters,
            &a.country_stats,
            &a.country_attributes,
        ],
    )?;
    let rows = read_rwi(&a.rwi)?;
    let data = load_dataset(&a.training)?;
    let features = read_features(&a.features)?;
    let population = read_population(&a.population)?;
    let clusters = read_clusters(&a.clusters)?;
    let stats = read_country_stats(&a.country_stats)?;
    let attributes = read_country_attributes(&a.country_attributes)?;
    let params = a.model.params(common.seed);
    params.validate()?;

    let oof = out_of_fold_predictions(&data, a.k, common.seed, &params)?;
    let ctx = ErrorContext {
        features: &features,
        population: &population,
        clusters: &clusters,
        attributes: &attributes,
        stats: &stats,
    };
    // Residuals are placed at the tile holding each published centroid.
    let mut fit_tiles = Vec::new();
    let mut target = Vec::new();
    let mut squared = Vec::new();
    for i in 0..data.len() {
        let residual = data.y[i] - oof[i];
        squared.push((data.countries[i], residual * residual));
        let tile = latlon_to_tile(data.centroids[i], BASE_ZOOM)?;
        if features.row_of(&tile).is_some() {
            fit_tiles.push(tile);
            target.push(residual.abs());
        }
    }
    let design = build_error_predictors(&ctx, &fit_tiles, a.spec)?;
    let fitted = fit_least_squares(&target, &design.values, None, &design.names)?;
    let tiles: Vec<_> = rows.iter().map(|r| r.estimate.tile).collect();
    let predictors = build_error_predictors(&ctx, &tiles, a.spec)?;
    let predicted = predict_error(&fitted, &predictors.values)?;

    let model_path = common.out.join("error_model.csv");
    let mut coef_rows = vec![["intercept".to_string(), num(fitted.intercept), num(fitted.intercept_se)]];
    coef_rows.extend(
        fitted
            .names
            .iter()
            .zip(&fitted.beta)
            .zip(&fitted.se)
            .map(|((n, b), s)| [n.clone(), num(*b), num(*s)]),
    );
    coef_rows.push(["n".into(), fitted.n.to_string(), String::new()]);
    coef_rows.push(["r2".into(), num(fitted.r2), String::new()]);
    write_csv(&model_path, &m, &["predictor", "beta", "se"], coef_rows)?;

    let by_tile: Vec<(CountryCode, f64)> = rows.iter().zip(&predicted).map(|(r, p)| (r.estimate.country, *p)).collect();
    let summary_path = common.out.join("error_summary.csv");
    let opt = |v: Option<f64>| v.map_or_else(String::new, num);
    write_csv(
        &summary_path,
        &m,
        &[
            "country",
            "n_tiles",
            "error_mean",
            "error_median",
            "error_sd",
            "mse_mean",
            "mse_median",
            "mse_sd",
        ],
        country_error_summary(&by_tile, &squared).iter().map(|s| {
            [
                s.country.to_string(),
                s.predicted.n.to_string(),
                num(s.predicted.mean),
                num(s.predicted.median),
                num(s.predicted.sd),
                opt(s.mse.map(|m| m.mean)),
                opt(s.mse.map(|m| m.median)),
                opt(s.mse.map(|m| m.sd)),
            ]
        }),
    )?;

    let merged: Vec<RwiRow> = rows
        .into_iter()
        .zip(predicted)
        .map(|(r, e)| RwiRow {
            estimate: r.estimate,
            error: Some(e),
        })
        .collect();
    let rwi_path = common.out.join("rwi.csv");
    write_rwi(&rwi_path, &m, &merged)?;
    Ok(vec![model_path, summary_path, rwi_path])
}

fn target(a: &TargetArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let m = manifest(
        "target",
        common,
        &[&a.rwi, &a.population, &a.admin, &a.clusters, &a.households, &a.eval_households],
    )?;
    let estimates: BTreeMap<_, _> = read_rwi(&a.rwi)?
        .into_iter()
        .map(|r| (r.estimate.tile, r.estimate.rwi))
        .collect();
    let population = read_population(&a.population)?;
    let assignment = read_admin_assignment(&a.admin)?;
    let clusters = read_clusters(&a.clusters)?;
    let households = read_households(&a.households)?;
    let scores = household_index_by_country(&households)?;
    let labels = cluster_labels(&clusters, &households, &scores, LabelMode::Unweighted);
    let survey: Vec<SurveyCluster> = clusters
        .iter()
        .filter_map(|c| {
            labels.labels.get(&c.cluster_id).map(|l| SurveyCluster {
                centroid: c.centroid,
                mean_wealth: l.rwi,
                n_households: l.n_households,
            })
        })
        .collect();

    let eval = read_households(&a.eval_households)?;
    let truth = household_index_by_country(&eval)?;
    let mut targets = Vec::with_capacity(eval.len());
    for h in &eval {
        let location = h
            .location
            .ok_or_else(|| Error::invalid(format!("evaluation household {} has no lat/lon", h.id)))?;
        if !(h.weight > 0.0) {
            return Err(Error::invalid(format!("evaluation household {} needs a positive weight", h.id)));
        }
        let Some(&true_wealth) = truth.get(&h.id) else { continue };
        targets.push(TargetHousehold {
            id: h.id.clone(),
            location,
            true_wealth,
            weight: h.weight,
            tile: latlon_to_tile(location, BASE_ZOOM)?,
        });
    }

    let schemes: Vec<Scheme> = if a.scheme.is_empty() {
        let levels: Vec<String> = assignment.levels().map(str::to_string).collect();
        let mut s = vec![Scheme::MlTiles];
        s.extend(levels.iter().cloned().map(Scheme::MlUnits));
        s.extend(levels.iter().cloned().map(Scheme::SurveyUnitsExclude));
        s.extend(levels.iter().cloned().map(Scheme::SurveyUnitsImpute));
        s.extend([Scheme::KnnClusters(1), Scheme::KnnClusters(5)]);
        s
    } else {
        a.scheme.clone()
    };
    let ctx = TargetingContext {
        tile_estimates: &estimates,
        population: &population,
        assignment: &assignment,
        survey: &survey,
    };
    let reports = schemes
        .iter()
        .map(|s| run_scheme(&targets, s, &ctx, &a.budget, common.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["scheme"];
    header.extend(TABLE_COLUMNS);
    let path = common.out.join("targeting_report.csv");
    write_csv(
        &path,
        &m,
        &header,
        emit_table(&reports).into_iter().map(|(label, cols)| {
            let mut row = vec![label];
            row.extend(cols);
            row
        }),
    )?;
    Ok(vec![path])
}

fn synth(a: &SynthArgs, common: &Common) -> Result<Vec<PathBuf>> {
    let cfg = SynthConfig {
        countries: a.countries,
        tiles_per_country: a.tiles,
        clusters_per_country: a.clusters,
        households_per_cluster: a.households,
        target_households_per_country: a.target_households,
        household_noise: a.household_noise,
        spatial_noise: a.spatial_noise,
        feature_noise: a.feature_noise,
        jitter_km: (a.jitter_urban_km, a.jitter_rural_km),
        seed: common.seed,
        ..Default::default()
    };
    let world = synth_world(&cfg)?;
    world.write(&common.out, &Manifest::new("synth", common.seed))?;
    Ok(crate::synth::WORLD_FILES.iter().map(|f| common.out.join(f)).collect())
}
