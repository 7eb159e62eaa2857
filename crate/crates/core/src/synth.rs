//! Synthetic worlds with a known wealth field, for tests and demos.
//!
//! Each country occupies its own square patch of zoom-14 tiles. Wealth is a
//! smooth random field; an optional second, shorter-wavelength field plays
//! the role of spatially autocorrelated noise that no tile feature carries
//! except through location.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::index::sample_weighted;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::awe::CountryStats;
use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::ingest::{standard_feature_names, FeatureTable, PopulationTable, IMAGE_COMPONENTS};
use crate::labels::{ClusterRecord, HouseholdRecord, ASSET_COLUMNS};
use crate::mapping::{AdminAssignment, UnitMembership};
use crate::mix_seed;
use crate::pipeline::{num, write_csv, Manifest};
use crate::tilegrid::{latlon_to_tile, LatLon, TileId, BASE_ZOOM};
use crate::uncertainty::CountryAttributes;

const KM_PER_DEG: f64 = 111.195;
/// Countries per row of the patch layout.
const LAYOUT_COLUMNS: usize = 8;
const PATCH_SPACING_DEG: f64 = 3.0;
/// Tiles per side of a district.
const DISTRICT_TILES: u32 = 5;
const CONTINENTS: [&str; 3] = ["Africa", "Asia", "Americas"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub countries: usize,
    pub tiles_per_country: usize,
    pub clusters_per_country: usize,
    pub households_per_cluster: usize,
    /// Households per country in the targeting evaluation sample.
    pub target_households_per_country: usize,
    /// Standard deviation of household-level idiosyncratic wealth.
    pub household_noise: f64,
    /// Standard deviation of the autocorrelated noise field.
    pub spatial_noise: f64,
    /// Wavelength range of the noise field, km.
    pub noise_wavelength_km: (f64, f64),
    /// Standard deviation of additive noise on tile features.
    pub feature_noise: f64,
    /// Maximum displacement of published cluster centroids, km (urban, rural).
    pub jitter_km: (f64, f64),
    /// Wavelength range of the wealth field, km.
    pub wealth_wavelength_km: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            countries: 3,
            tiles_per_country: 500,
            clusters_per_country: 60,
            households_per_cluster: 12,
            target_households_per_country: 200,
            household_noise: 0.0,
            spatial_noise: 0.0,
            noise_wavelength_km: (8.0, 20.0),
            feature_noise: 0.0,
            jitter_km: (2.0, 5.0),
            wealth_wavelength_km: (40.0, 150.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// No noise of any kind: cluster labels are a deterministic function of
    /// the features around the published centroid.
    pub fn noiseless(seed: u64) -> Self {
        SynthConfig {
            tiles_per_country: 900,
            clusters_per_country: 150,
            jitter_km: (0.0, 0.0),
            seed,
            ..Default::default()
        }
    }

    /// Adds wealth variation that is autocorrelated in space but invisible
    /// to every tile feature except location.
    pub fn spatially_noisy(seed: u64) -> Self {
        SynthConfig {
            tiles_per_country: 900,
            clusters_per_country: 150,
            spatial_noise: 0.5,
            seed,
            ..Default::default()
        }
    }
}

/// A generated world: the full set of input tables plus the truth behind
/// them.
#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub features: FeatureTable,
    pub population: PopulationTable,
    pub clusters: Vec<ClusterRecord>,
    pub households: Vec<HouseholdRecord>,
    /// Geolocated households for targeting evaluation.
    pub target_households: Vec<HouseholdRecord>,
    pub country_stats: BTreeMap<CountryCode, CountryStats>,
    pub attributes: BTreeMap<CountryCode, CountryAttributes>,
    pub assignment: AdminAssignment,
    /// Population-weighted true wealth per (level, unit).
    pub unit_truth: BTreeMap<(String, String), f64>,
    /// True wealth at each tile center.
    pub tile_wealth: BTreeMap<TileId, f64>,
}

/// Sum of plane waves with unit total variance.
struct Field {
    waves: Vec<(f64, f64, f64)>,
    amplitude: f64,
}

impl Field {
    fn new(rng: &mut ChaCha8Rng, n: usize, wavelength_km: (f64, f64), sd: f64) -> Self {
        let waves = (0..n)
            .map(|_| {
                let lambda = rng.random_range(wavelength_km.0..=wavelength_km.1);
                let theta = rng.random_range(0.0..PI);
                let k = 2.0 * PI / lambda;
                (k * theta.cos(), k * theta.sin(), rng.random_range(0.0..2.0 * PI))
            })
            .collect();
        Field {
            waves,
            amplitude: sd * (2.0 / n as f64).sqrt(),
        }
    }

    fn at(&self, (x, y): (f64, f64)) -> f64 {
        self.amplitude * self.waves.iter().map(|(kx, ky, p)| (kx * x + ky * y + p).sin()).sum::<f64>()
    }
}

fn country_code(i: usize) -> CountryCode {
    let code = [b'A' + (i / 26) as u8, b'A' + (i % 26) as u8];
    CountryCode::new(std::str::from_utf8(&code).expect("ascii")).expect("two letters")
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Asset responses of a household with the given wealth. Thresholds are
/// spread across the wealth range so the first principal component tracks
/// wealth monotonically.
fn assets(wealth: f64) -> Vec<f64> {
    (0..ASSET_COLUMNS.len())
        .map(|k| {
            let t = -4.5 + 9.0 * k as f64 / (ASSET_COLUMNS.len() - 1) as f64;
            let v = sigmoid(0.8 * (wealth - t));
            if ASSET_COLUMNS[k] == "rooms" {
                1.0 + 4.0 * v
            } else {
                v
            }
        })
        .collect()
}

struct Patch {
    code: CountryCode,
    origin: LatLon,
    tiles: Vec<(TileId, u32, u32)>,
}

impl Patch {
    fn km(&self, p: LatLon) -> (f64, f64) {
        let cos = self.origin.lat().to_radians().cos();
        (
            (p.lon() - self.origin.lon()) * KM_PER_DEG * cos,
            (self.origin.lat() - p.lat()) * KM_PER_DEG,
        )
    }
}

fn patches(cfg: &SynthConfig) -> Result<Vec<Patch>> {
    let side = (cfg.tiles_per_country as f64).sqrt().ceil() as u32;
    (0..cfg.countries)
        .map(|c| {
            let origin = LatLon::new(
                2.0 + PATCH_SPACING_DEG * (c / LAYOUT_COLUMNS) as f64,
                2.0 + PATCH_SPACING_DEG * (c % LAYOUT_COLUMNS) as f64,
            )?;
            let corner = latlon_to_tile(origin, BASE_ZOOM)?;
            let tiles = (0..cfg.tiles_per_country as u32)
                .map(|i| {
                    let (dx, dy) = (i % side, i / side);
                    let t = corner.offset(dx as i64, dy as i64).expect("patch lies inside the map");
                    (t, dx, dy)
                })
                .collect();
            let b = corner.bounds();
            Ok(Patch {
                code: country_code(c),
                origin: LatLon::new(b.north, b.west)?,
                tiles,
            })
        })
        .collect()
}

/// Random point inside a tile.
fn point_in(tile: TileId, rng: &mut ChaCha8Rng) -> LatLon {
    let b = tile.bounds();
    let pad_lat = 1e-9 * (b.north - b.south);
    let pad_lon = 1e-9 * (b.east - b.west);
    let lat = rng.random_range(b.south + pad_lat..b.north - pad_lat);
    let lon = rng.random_range(b.west + pad_lon..b.east - pad_lon);
    LatLon::new(lat, lon).expect("inside tile bounds")
}

/// Moves a point by up to `max_km` in a random direction.
fn jitter(p: LatLon, max_km: f64, rng: &mut ChaCha8Rng) -> LatLon {
    let d = max_km * rng.random::<f64>();
    let a = rng.random_range(0.0..2.0 * PI);
    let dlat = d * a.cos() / KM_PER_DEG;
    let dlon = d * a.sin() / (KM_PER_DEG * p.lat().to_radians().cos());
    LatLon::new(p.lat() + dlat, p.lon() + dlon).expect("small displacement")
}

pub fn synth_world(cfg: &SynthConfig) -> Result<SynthWorld> {
    if cfg.countries == 0 || cfg.countries > 200 {
        return Err(Error::invalid("country count must lie in 1..=200"));
    }
    if cfg.tiles_per_country < 16 || cfg.tiles_per_country > 16_000 {
        return Err(Error::invalid("tiles per country must lie in 16..=16000"));
    }
    if cfg.clusters_per_country == 0 || cfg.clusters_per_country > cfg.tiles_per_country / 2 {
        return Err(Error::invalid("clusters per country must lie in 1..=tiles/2"));
    }
    if cfg.households_per_cluster < 2 {
        return Err(Error::invalid("need at least two households per cluster"));
    }
    let names = standard_feature_names();
    let patches = patches(cfg)?;

    let mut rows = Vec::new();
    let mut population = Vec::new();
    let mut clusters = Vec::new();
    let mut households = Vec::new();
    let mut target_households = Vec::new();
    let mut country_stats = BTreeMap::new();
    let mut attributes = BTreeMap::new();
    let mut memberships = Vec::new();
    let mut unit_sums: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    let mut tile_wealth = BTreeMap::new();

    for (ci, patch) in patches.iter().enumerate() {
        let code = patch.code;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, code.as_str().as_bytes()));
        let wealth_field = Field::new(&mut rng, 8, cfg.wealth_wavelength_km, 1.0);
        let noise_field = Field::new(&mut rng, 12, cfg.noise_wavelength_km, cfg.spatial_noise);
        let terrain = Field::new(&mut rng, 6, (20.0, 80.0), 1.0);
        let rain = Field::new(&mut rng, 6, (60.0, 200.0), 1.0);
        // Image components: mixtures of wealth and terrain at random strengths.
        let mixes: Vec<(f64, f64)> = (0..IMAGE_COMPONENTS - 2)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let level = rng.random_range(-0.5..0.5);
        let truth = |p: LatLon| {
            let xy = patch.km(p);
            level + wealth_field.at(xy) + noise_field.at(xy)
        };

        let mut pops = Vec::with_capacity(patch.tiles.len());
        let mut total_pop = 0.0;
        for &(tile, dx, dy) in &patch.tiles {
            let center = tile.center();
            let xy = patch.km(center);
            let w = level + wealth_field.at(xy);
            let empty = rng.random_bool(0.05);
            let pop = if empty {
                0.0
            } else {
                (5.0 + 0.8 * w + 0.8 * normal(&mut rng)).exp().floor()
            };
            pops.push(pop);
            total_pop += pop;
            population.push((tile, pop));
            let t = truth(center);
            tile_wealth.insert(tile, t);

            let mut noisy = |v: f64| v + cfg.feature_noise * normal(&mut rng);
            let mut values = vec![
                noisy(2.0 * sigmoid(w)),
                noisy((pop > 400.0) as u8 as f64),
                noisy(300.0 + 150.0 * terrain.at(xy)),
                noisy((3.0 + 2.0 * terrain.at((xy.1, xy.0))).abs()),
                noisy(1200.0 + 400.0 * rain.at(xy)),
                pop,
                noisy(pop / 1500.0 * (0.5 * w).exp()),
                noisy(pop / 400.0 * w.exp()),
                noisy(pop / 6.0 * (0.6 * w).exp()),
                noisy(pop / 9.0 * (0.4 * w).exp()),
                noisy(pop / 40.0 * (1.2 * w).exp()),
                noisy(3.0 * w.exp()),
                xy.0,
                xy.1,
            ];
            values.extend(mixes.iter().map(|(a, b)| a * w + b * terrain.at(xy) + cfg.feature_noise * normal(&mut rng)));
            debug_assert_eq!(values.len(), names.len());
            rows.push((tile, code, values));

            let region = format!("{code}-R{}{}", (dx * 2) / (patch_side(cfg)), (dy * 2) / patch_side(cfg));
            let district = format!("{code}-D{}-{}", dx / DISTRICT_TILES, dy / DISTRICT_TILES);
            for (level, unit) in [("region", region), ("district", district)] {
                let e = unit_sums.entry((level.to_string(), unit.clone())).or_default();
                e.0 += pop * t;
                e.1 += pop;
                memberships.push(UnitMembership {
                    tile,
                    level: level.to_string(),
                    unit_id: unit,
                });
            }
        }

        let weights: Vec<f64> = pops.iter().map(|p| p.max(0.0) + 1e-9).collect();
        let chosen = sample_weighted(&mut rng, pops.len(), |i| weights[i], cfg.clusters_per_country)
            .map_err(|e| Error::invalid(format!("cluster sampling failed: {e}")))?;
        let mut chosen: Vec<usize> = chosen.into_iter().collect();
        chosen.sort_unstable();
        for (k, &i) in chosen.iter().enumerate() {
            let tile = patch.tiles[i].0;
            let urban = pops[i] > 400.0;
            let true_location = point_in(tile, &mut rng);
            let centroid = jitter(true_location, if urban { cfg.jitter_km.0 } else { cfg.jitter_km.1 }, &mut rng);
            let cluster_id = format!("{code}-C{k:04}");
            for h in 0..cfg.households_per_cluster {
                let wealth = truth(true_location) + cfg.household_noise * normal(&mut rng);
                households.push(HouseholdRecord {
                    id: format!("{cluster_id}-H{h:02}"),
                    country: code,
                    cluster_id: cluster_id.clone(),
                    location: None,
                    assets: assets(wealth),
                    weight: rng.random_range(0.5..2.0),
                });
            }
            clusters.push(ClusterRecord {
                cluster_id,
                country: code,
                centroid,
                urban,
                survey_year: Some(2018),
            });
        }

        for h in 0..cfg.target_households_per_country {
            let i = sample_weighted(&mut rng, pops.len(), |i| weights[i], 1)
                .map_err(|e| Error::invalid(format!("household sampling failed: {e}")))?
                .index(0);
            let location = point_in(patch.tiles[i].0, &mut rng);
            let wealth = truth(location) + cfg.household_noise * normal(&mut rng);
            target_households.push(HouseholdRecord {
                id: format!("{code}-T{h:05}"),
                country: code,
                cluster_id: format!("{code}-EA{:05}", i),
                location: Some(location),
                assets: assets(wealth),
                weight: rng.random_range(0.5..2.0),
            });
        }

        let stats = CountryStats::new(code, rng.random_range(500.0..8000.0), rng.random_range(0.3..0.55))?
            .with_years(Some(2019), Some(2018));
        country_stats.insert(code, stats);
        let (row, col) = (ci / LAYOUT_COLUMNS, ci % LAYOUT_COLUMNS);
        let neighbours = (0..cfg.countries)
            .filter(|&o| o != ci)
            .filter(|&o| (o / LAYOUT_COLUMNS).abs_diff(row) <= 1 && (o % LAYOUT_COLUMNS).abs_diff(col) <= 1)
            .count();
        attributes.insert(
            code,
            CountryAttributes {
                iso2: code,
                area_km2: patch.tiles.len() as f64 * 5.9,
                population: total_pop,
                island: ci % 4 == 3,
                landlocked: ci % 3 == 1,
                continent: CONTINENTS[ci % CONTINENTS.len()].to_string(),
                dhs_neighbors: neighbours as f64,
            },
        );
    }

    let unit_truth = unit_sums
        .into_iter()
        .filter(|(_, (_, p))| *p > 0.0)
        .map(|(k, (s, p))| (k, s / p))
        .collect();
    Ok(SynthWorld {
        features: FeatureTable::new(names, rows)?,
        population: PopulationTable::new(population),
        clusters,
        households,
        target_households,
        country_stats,
        attributes,
        assignment: AdminAssignment::new(memberships),
        unit_truth,
        tile_wealth,
    })
}

fn patch_side(cfg: &SynthConfig) -> u32 {
    (cfg.tiles_per_country as f64).sqrt().ceil() as u32
}

/// File names written by [`SynthWorld::write`].
pub const WORLD_FILES: [&str; 9] = [
    "features.csv",
    "population.csv",
    "clusters.csv",
    "households.csv",
    "target_households.csv",
    "country_stats.csv",
    "country_attributes.csv",
    "admin_assignment.csv",
    "unit_truth.csv",
];

fn household_rows(households: &[HouseholdRecord]) -> Vec<Vec<String>> {
    households
        .iter()
        .map(|h| {
            let (lat, lon) = h
                .location
                .map_or((String::new(), String::new()), |p| (num(p.lat()), num(p.lon())));
            let mut row = vec![h.id.clone(), h.country.to_string(), h.cluster_id.clone(), lat, lon, num(h.weight)];
            row.extend(h.assets.iter().map(|v| num(*v)));
            row
        })
        .collect()
}

impl SynthWorld {
    /// Writes every input table into `dir`.
    pub fn write(&self, dir: &Path, manifest: &Manifest) -> Result<()> {
        let path = |name: &str| dir.join(name);

        let mut header = vec!["quadkey", "country"];
        header.extend(self.features.feature_names().iter().map(String::as_str));
        let values = self.features.values();
        write_csv(
            &path("features.csv"),
            manifest,
            &header,
            self.features.tiles().iter().enumerate().map(|(i, t)| {
                let mut row = vec![t.quadkey(), self.features.countries()[i].to_string()];
                row.extend(values.row(i).iter().map(|v| num(*v)));
                row
            }),
        )?;
        write_csv(
            &path("population.csv"),
            manifest,
            &["quadkey", "population"],
            self.population.iter().map(|(t, p)| [t.quadkey(), num(*p)]),
        )?;
        write_csv(
            &path("clusters.csv"),
            manifest,
            &["cluster_id", "country", "lat", "lon", "urban", "survey_year"],
            self.clusters.iter().map(|c| {
                [
                    c.cluster_id.clone(),
                    c.country.to_string(),
                    num(c.centroid.lat()),
                    num(c.centroid.lon()),
                    (c.urban as u8).to_string(),
                    c.survey_year.map_or_else(String::new, |y| y.to_string()),
                ]
            }),
        )?;
        let mut hh_header = vec!["household_id", "country", "cluster_id", "lat", "lon", "weight"];
        hh_header.extend(ASSET_COLUMNS);
        write_csv(&path("households.csv"), manifest, &hh_header, household_rows(&self.households))?;
        write_csv(
            &path("target_households.csv"),
            manifest,
            &hh_header,
            household_rows(&self.target_households),
        )?;
        write_csv(
            &path("country_stats.csv"),
            manifest,
            &["iso2", "gdp_pc_usd", "gdp_year", "gini", "gini_year"],
            self.country_stats.values().map(|s| {
                let year = |y: Option<i32>| y.map_or_else(String::new, |y| y.to_string());
                [s.iso2.to_string(), num(s.gdp_pc), year(s.gdp_year), num(s.gini), year(s.gini_year)]
            }),
        )?;
        write_csv(
            &path("country_attributes.csv"),
            manifest,
            &["iso2", "area_km2", "population", "island", "landlocked", "continent", "dhs_neighbors"],
            self.attributes.values().map(|a| {
                [
                    a.iso2.to_string(),
                    num(a.area_km2),
                    num(a.population),
                    (a.island as u8).to_string(),
                    (a.landlocked as u8).to_string(),
                    a.continent.clone(),
                    num(a.dhs_neighbors),
                ]
            }),
        )?;
        write_csv(
            &path("admin_assignment.csv"),
            manifest,
            &["quadkey", "level", "unit_id"],
            self.assignment.memberships().map(|m| [m.tile.quadkey(), m.level, m.unit_id]),
        )?;
        write_csv(
            &path("unit_truth.csv"),
            manifest,
            &["level", "unit_id", "value"],
            self.unit_truth.iter().map(|((l, u), v)| [l.clone(), u.clone(), num(*v)]),
        )
    }
}
