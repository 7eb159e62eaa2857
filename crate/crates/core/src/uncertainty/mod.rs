//! Per-tile error estimation: predictor construction, a linear model of
//! absolute residuals, country summaries and the dissimilarity curve.

mod index;
mod regression;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

pub use index::GeoGridIndex;
pub use regression::{fit_least_squares, predict_error, LinearErrorModel};

use crate::awe::CountryStats;
use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::ingest::{CsvFile, FeatureTable, PopulationTable, IMAGE_COMPONENTS};
use crate::labels::ClusterRecord;
use crate::matrix::Matrix;
use crate::tilegrid::{LatLon, TileId};

/// Radii (km) for the cluster-count predictors.
pub const COUNT_RADII_KM: [f64; 4] = [50.0, 250.0, 500.0, 1000.0];

/// Latitude band height of the cluster index.
const INDEX_BAND_DEG: f64 = 0.5;

/// Static country characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryAttributes {
    pub iso2: CountryCode,
    pub area_km2: f64,
    pub population: f64,
    pub island: bool,
    pub landlocked: bool,
    pub continent: String,
    /// Neighbouring countries with survey data.
    pub dhs_neighbors: f64,
}

pub fn read_country_attributes(path: &Path) -> Result<BTreeMap<CountryCode, CountryAttributes>> {
    let file = CsvFile::read(
        path,
        &["iso2", "area_km2", "population", "island", "landlocked", "continent", "dhs_neighbors"],
    )?;
    let mut out = BTreeMap::new();
    for (line, rec) in &file.rows {
        let iso2 = file.country(rec, *line, "iso2")?;
        let attrs = CountryAttributes {
            iso2,
            area_km2: file.number(rec, *line, "area_km2")?,
            population: file.number(rec, *line, "population")?,
            island: file.flag(rec, *line, "island")?,
            landlocked: file.flag(rec, *line, "landlocked")?,
            continent: file.str(rec, *line, "continent")?.to_string(),
            dhs_neighbors: file.number(rec, *line, "dhs_neighbors")?,
        };
        if attrs.area_km2 < 0.0 || attrs.population < 0.0 || attrs.dhs_neighbors < 0.0 {
            return Err(file.error(*line, "area, population and neighbour counts must be nonnegative"));
        }
        if out.insert(iso2, attrs).is_some() {
            return Err(file.error(*line, format!("duplicate iso2 {iso2}")));
        }
    }
    Ok(out)
}

/// Which predictor columns enter the error model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictorSpec {
    #[default]
    Base,
    WithImagery,
    /// Drops every tile feature the wealth model itself uses.
    ExcludingModelFeatures,
}

impl std::str::FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(PredictorSpec::Base),
            "imagery" => Ok(PredictorSpec::WithImagery),
            "no_model_features" => Ok(PredictorSpec::ExcludingModelFeatures),
            _ => Err(Error::invalid(format!(
                "unknown predictor spec {s:?} (expected base, imagery or no_model_features)"
            ))),
        }
    }
}

#[derive(Clone, Copy)]
enum Transform {
    Identity,
    Ln1p,
    Flag,
}

/// Tile features entering the base specification: source column, output
/// name and transform.
const TILE_PREDICTORS: [(&str, &str, Transform); 11] = [
    ("road_density", "road_density", Transform::Identity),
    ("slope", "ln_slope", Transform::Ln1p),
    ("elevation", "ln_elevation", Transform::Ln1p),
    ("precipitation", "ln_precipitation", Transform::Ln1p),
    ("urban_builtup", "urban", Transform::Flag),
    ("radiance", "ln_radiance", Transform::Ln1p),
    ("cell_towers", "ln_cell_towers", Transform::Ln1p),
    ("wifi_points", "ln_wifi_points", Transform::Ln1p),
    ("mobile_devices", "ln_mobile_devices", Transform::Ln1p),
    ("android_devices", "ln_android_devices", Transform::Ln1p),
    ("ios_devices", "ln_ios_devices", Transform::Ln1p),
];

fn ln1p0(v: f64) -> f64 {
    v.max(0.0).ln_1p()
}

/// Shared inputs for predictor construction.
pub struct ErrorContext<'a> {
    /// Raw (unnormalized) tile features.
    pub features: &'a FeatureTable,
    pub population: &'a PopulationTable,
    pub clusters: &'a [ClusterRecord],
    pub attributes: &'a BTreeMap<CountryCode, CountryAttributes>,
    pub stats: &'a BTreeMap<CountryCode, CountryStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPredictors {
    pub names: Vec<String>,
    pub tiles: Vec<TileId>,
    pub countries: Vec<CountryCode>,
    pub values: Matrix,
}

/// Column names for a specification, given the continents present.
pub fn predictor_names(spec: PredictorSpec, continents: &[String]) -> Vec<String> {
    let mut names: Vec<String> = [
        "ln_dist_other_dhs_country",
        "ln_dist_closest_cluster",
        "ln_dhs_neighbors",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(COUNT_RADII_KM.iter().map(|r| format!("ln_clusters_within_{r}km")));
    names.extend(["island", "landlocked"].iter().map(|s| s.to_string()));
    // The first continent is the reference level.
    names.extend(continents.iter().skip(1).map(|c| format!("continent_{c}")));
    names.extend(
        ["ln_area", "ln_country_population", "ln_gdp_pc", "gini"]
            .iter()
            .map(|s| s.to_string()),
    );
    if spec != PredictorSpec::ExcludingModelFeatures {
        names.extend(TILE_PREDICTORS.iter().map(|(_, name, _)| name.to_string()));
        names.push("ln_tile_population".into());
    }
    if spec == PredictorSpec::WithImagery {
        names.extend((0..IMAGE_COMPONENTS).map(|i| format!("img_pc_{i:03}")));
    }
    names
}

/// Builds the predictor table at the centers of `tiles`. Every tile must
/// have a feature row, and every country attributes and statistics.
pub fn build_error_predictors(ctx: &ErrorContext<'_>, tiles: &[TileId], spec: PredictorSpec) -> Result<ErrorPredictors> {
    if ctx.clusters.is_empty() {
        return Err(Error::invalid("no clusters: distance predictors are undefined"));
    }
    let continents: Vec<String> = ctx
        .attributes
        .values()
        .map(|a| a.continent.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let names = predictor_names(spec, &continents);

    let points: Vec<LatLon> = ctx.clusters.iter().map(|c| c.centroid).collect();
    let index = GeoGridIndex::new(points, INDEX_BAND_DEG);
    let cluster_country: Vec<CountryCode> = ctx.clusters.iter().map(|c| c.country).collect();

    let feature_col = |name: &str| {
        ctx.features
            .feature_index(name)
            .ok_or_else(|| Error::invalid(format!("feature table lacks `{name}`")))
    };
    let tile_cols: Vec<usize> = if spec == PredictorSpec::ExcludingModelFeatures {
        Vec::new()
    } else {
        TILE_PREDICTORS
            .iter()
            .map(|(source, _, _)| feature_col(source))
            .collect::<Result<_>>()?
    };
    let img_cols: Vec<usize> = if spec == PredictorSpec::WithImagery {
        (0..IMAGE_COMPONENTS)
            .map(|i| feature_col(&format!("img_pc_{i:03}")))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let rows = tiles
        .par_iter()
        .map(|tile| {
            let country = ctx
                .features
                .country_of(tile)
                .ok_or_else(|| Error::invalid(format!("tile {tile} has no feature row")))?;
            let attrs = ctx
                .attributes
                .get(&country)
                .ok_or_else(|| Error::invalid(format!("no country attributes for {country}")))?;
            let stats = ctx
                .stats
                .get(&country)
                .ok_or_else(|| Error::MissingCountryStats(country.to_string()))?;
            let raw = ctx.features.get(tile).expect("country_of implies a row");
            let q = tile.center();
            let (_, nearest) = index.nearest(q).expect("index is nonempty");
            // Proxy for the distance to another surveyed country.
            let foreign = index
                .nearest_where(q, |i| cluster_country[i] != country)
                .map_or(0.0, |(_, d)| d);
            let mut row = vec![ln1p0(foreign), ln1p0(nearest), ln1p0(attrs.dhs_neighbors)];
            row.extend(COUNT_RADII_KM.iter().map(|r| ln1p0(index.count_within(q, *r) as f64)));
            row.push(attrs.island as u8 as f64);
            row.push(attrs.landlocked as u8 as f64);
            row.extend(continents.iter().skip(1).map(|c| (attrs.continent == *c) as u8 as f64));
            row.extend([
                ln1p0(attrs.area_km2),
                ln1p0(attrs.population),
                stats.gdp_pc.ln(),
                stats.gini,
            ]);
            if spec != PredictorSpec::ExcludingModelFeatures {
                for (&col, (_, _, transform)) in tile_cols.iter().zip(&TILE_PREDICTORS) {
                    let v = raw[col];
                    row.push(match transform {
                        Transform::Identity => v,
                        Transform::Ln1p => ln1p0(v),
                        Transform::Flag => (v >= 0.5) as u8 as f64,
                    });
                }
                row.push(ln1p0(ctx.population.get(tile)));
            }
            row.extend(img_cols.iter().map(|&c| raw[c]));
            Ok((country, row))
        })
        .collect::<Result<Vec<_>>>()?;
    let countries = rows.iter().map(|(c, _)| *c).collect();
    let values = Matrix::from_rows(names.len(), rows.iter().map(|(_, r)| r))?;
    Ok(ErrorPredictors {
        names,
        tiles: tiles.to_vec(),
        countries,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        Some(Summary { mean, median, sd, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryErrorSummary {
    pub country: CountryCode,
    pub predicted: Summary,
    /// Squared residuals where ground truth exists.
    pub mse: Option<Summary>,
}

pub fn country_error_summary(
    predicted: &[(CountryCode, f64)],
    squared_residuals: &[(CountryCode, f64)],
) -> Vec<CountryErrorSummary> {
    let group = |pairs: &[(CountryCode, f64)]| {
        let mut out: BTreeMap<CountryCode, Vec<f64>> = BTreeMap::new();
        for (c, v) in pairs {
            out.entry(*c).or_default().push(*v);
        }
        out
    };
    let residuals = group(squared_residuals);
    group(predicted)
        .into_iter()
        .map(|(country, values)| CountryErrorSummary {
            country,
            predicted: Summary::of(&values).expect("grouped values are nonempty"),
            mse: residuals.get(&country).and_then(|v| Summary::of(v)),
        })
        .collect()
}

/// Rank correlation of per-country median predicted error between two
/// specifications, over the countries both summaries cover.
pub fn specification_stability(a: &[CountryErrorSummary], b: &[CountryErrorSummary]) -> Result<f64> {
    let b: BTreeMap<CountryCode, f64> = b.iter().map(|s| (s.country, s.predicted.median)).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|s| b.get(&s.country).map(|m| (s.predicted.median, *m)))
        .unzip();
    crate::evaluation::spearman(&x, &y)
}

/// Country vectors used for the dissimilarity analysis: area, population,
/// island, landlocked, distance to the nearest other surveyed country,
/// surveyed neighbours, GDP per capita and Gini.
pub fn country_attribute_vectors(
    countries: &[CountryCode],
    attributes: &BTreeMap<CountryCode, CountryAttributes>,
    stats: &BTreeMap<CountryCode, CountryStats>,
    clusters: &[ClusterRecord],
) -> Result<Vec<Vec<f64>>> {
    let index = GeoGridIndex::new(clusters.iter().map(|c| c.centroid).collect(), INDEX_BAND_DEG);
    countries
        .iter()
        .map(|c| {
            let a = attributes
                .get(c)
                .ok_or_else(|| Error::invalid(format!("no country attributes for {c}")))?;
            let s = stats.get(c).ok_or_else(|| Error::MissingCountryStats(c.to_string()))?;
            let distance = clusters
                .iter()
                .filter(|k| k.country == *c)
                .filter_map(|k| index.nearest_where(k.centroid, |i| clusters[i].country != *c))
                .map(|(_, d)| d)
                .fold(f64::INFINITY, f64::min);
            let distance = if distance.is_finite() { distance } else { 0.0 };
            Ok(vec![
                ln1p0(a.area_km2),
                ln1p0(a.population),
                a.island as u8 as f64,
                a.landlocked as u8 as f64,
                ln1p0(distance),
                a.dhs_neighbors,
                s.gdp_pc.ln(),
                s.gini,
            ])
        })
        .collect()
}

/// `1 - cos` between column-standardized vectors. A zero vector is
/// treated as orthogonal to everything else.
pub fn cosine_dissimilarity(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, Vec::len);
    let mut z = vectors.to_vec();
    for j in 0..d {
        let mean = vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64;
        let sd = (vectors.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for row in z.iter_mut() {
            row[j] = if sd > 0.0 { (row[j] - mean) / sd } else { 0.0 };
        }
    }
    raw_cosine_dissimilarity(&z)
}

/// `1 - cos` without standardization.
pub fn raw_cosine_dissimilarity(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n = vectors.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&vectors[i], &vectors[j]);
            let denom = norm(a) * norm(b);
            let cos = if denom > 0.0 {
                (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / denom).clamp(-1.0, 1.0)
            } else if a == b {
                1.0
            } else {
                0.0
            };
            out[i][j] = 1.0 - cos;
            out[j][i] = out[i][j];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityPoint {
    pub threshold: f64,
    pub mean_error: f64,
    pub n_countries: usize,
}

/// Mean transfer error when each country is predicted only by countries at
/// least `d` dissimilar, for `d` at the deciles of the pairwise
/// dissimilarity distribution. `transfer_error[i][j]` is the error on
/// country `i` of a model trained on country `j`.
pub fn dissimilarity_curve(dissimilarity: &[Vec<f64>], transfer_error: &[Vec<f64>]) -> Result<Vec<DissimilarityPoint>> {
    let n = dissimilarity.len();
    if n < 2 || transfer_error.len() != n {
        return Err(Error::invalid("dissimilarity curve needs matching matrices for at least two countries"));
    }
    let mut pairs: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| dissimilarity[i][j])
        .collect();
    pairs.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = (0..10).map(|k| pairs[(k * pairs.len()) / 10]).collect();
    thresholds.dedup();
    let mut out = Vec::with_capacity(thresholds.len());
    for d in thresholds {
        let mut errors = Vec::new();
        for i in 0..n {
            let sources: Vec<usize> = (0..n).filter(|&j| j != i && dissimilarity[i][j] >= d).collect();
            if sources.is_empty() {
                log::warn!("country {i} has no training country at dissimilarity {d}");
                continue;
            }
            errors.push(sources.iter().map(|&j| transfer_error[i][j]).sum::<f64>() / sources.len() as f64);
        }
        out.push(DissimilarityPoint {
            threshold: d,
            mean_error: if errors.is_empty() {
                f64::NAN
            } else {
                errors.iter().sum::<f64>() / errors.len() as f64
            },
            n_countries: errors.len(),
        });
    }
    Ok(out)
}
