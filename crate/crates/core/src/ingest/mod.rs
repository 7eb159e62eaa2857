//! Tabular inputs, per-country feature normalization and PCA.

mod pca;
mod tables;

use std::collections::{BTreeMap, HashMap};

pub use pca::{pca_fit, PcaModel};
pub(crate) use tables::CsvFile;
pub use tables::{
    load_tables, read_admin_assignment, read_clusters, read_country_stats, read_features,
    read_households, read_population, InputPaths, InputTables, PopulationTable,
};

use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tilegrid::TileId;

/// The twelve scalar tile features, in file order.
pub const SCALAR_FEATURES: [&str; 12] = [
    "road_density",
    "urban_builtup",
    "elevation",
    "slope",
    "precipitation",
    "population",
    "cell_towers",
    "wifi_points",
    "mobile_devices",
    "android_devices",
    "ios_devices",
    "radiance",
];

/// Number of precomputed image principal components per tile.
pub const IMAGE_COMPONENTS: usize = 100;

/// The standard 112 feature names: scalar features followed by `img_pc_000..img_pc_099`.
pub fn standard_feature_names() -> Vec<String> {
    SCALAR_FEATURES
        .iter()
        .map(|s| s.to_string())
        .chain((0..IMAGE_COMPONENTS).map(|i| format!("img_pc_{i:03}")))
        .collect()
}

/// Mean and population standard deviation of one feature within one country.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

/// Per-(country, feature) normalization statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormStats {
    pub feature_names: Vec<String>,
    pub by_country: BTreeMap<CountryCode, Vec<Moments>>,
}

impl NormStats {
    fn z(m: Moments, v: f64) -> f64 {
        if m.std > 0.0 {
            (v - m.mean) / m.std
        } else {
            0.0
        }
    }

    /// Normalizes one raw row. Countries absent from the statistics are an error.
    pub fn normalize_row(&self, country: CountryCode, raw: &[f64]) -> Result<Vec<f64>> {
        let moments = self
            .by_country
            .get(&country)
            .ok_or_else(|| Error::UnknownCountry(country.to_string()))?;
        if raw.len() != moments.len() {
            return Err(Error::Arity {
                expected: moments.len(),
                got: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .zip(moments)
            .map(|(&v, &m)| Self::z(m, v))
            .collect())
    }

    /// Applies previously fitted statistics to a raw table.
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if table.feature_names != self.feature_names {
            return Err(Error::invalid(
                "feature columns differ from the normalization statistics",
            ));
        }
        let mut values = table.values.clone();
        for i in 0..table.len() {
            let normalized = self.normalize_row(table.countries[i], table.values.row(i))?;
            values.row_mut(i).copy_from_slice(&normalized);
        }
        Ok(FeatureTable {
            values,
            norm_stats: Some(self.clone()),
            ..table.clone()
        })
    }
}

/// Per-tile feature records for one or more countries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    feature_names: Vec<String>,
    tiles: Vec<TileId>,
    countries: Vec<CountryCode>,
    values: Matrix,
    norm_stats: Option<NormStats>,
    index: HashMap<TileId, usize>,
}

impl FeatureTable {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<(TileId, CountryCode, Vec<f64>)>,
    ) -> Result<Self> {
        let d = feature_names.len();
        let mut tiles = Vec::with_capacity(rows.len());
        let mut countries = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * d);
        let mut index = HashMap::with_capacity(rows.len());
        for (i, (tile, country, values)) in rows.into_iter().enumerate() {
            if values.len() != d {
                return Err(Error::Arity {
                    expected: d,
                    got: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite feature in tile {tile}")));
            }
            if index.insert(tile, i).is_some() {
                return Err(Error::invalid(format!("duplicate tile {tile}")));
            }
            tiles.push(tile);
            countries.push(country);
            data.extend(values);
        }
        let n = tiles.len();
        Ok(FeatureTable {
            feature_names,
            tiles,
            countries,
            values: Matrix::from_vec(n, d, data)?,
            norm_stats: None,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn tiles(&self) -> &[TileId] {
        &self.tiles
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }

    pub fn row_of(&self, tile: &TileId) -> Option<usize> {
        self.index.get(tile).copied()
    }

    pub fn get(&self, tile: &TileId) -> Option<&[f64]> {
        self.row_of(tile).map(|i| self.values.row(i))
    }

    pub fn country_of(&self, tile: &TileId) -> Option<CountryCode> {
        self.row_of(tile).map(|i| self.countries[i])
    }

    /// Fits per-country mean/std statistics without applying them.
    pub fn fit_norm_stats(&self) -> NormStats {
        let d = self.feature_names.len();
        let mut groups: BTreeMap<CountryCode, Vec<usize>> = BTreeMap::new();
        for (i, c) in self.countries.iter().enumerate() {
            groups.entry(*c).or_default().push(i);
        }
        let by_country = groups
            .into_iter()
            .map(|(country, rows)| {
                let n = rows.len() as f64;
                let moments = (0..d)
                    .map(|j| {
                        let mean = rows.iter().map(|&i| self.values.get(i, j)).sum::<f64>() / n;
                        let var = rows
                            .iter()
                            .map(|&i| (self.values.get(i, j) - mean).powi(2))
                            .sum::<f64>()
                            / n;
                        Moments {
                            mean,
                            std: var.sqrt(),
                        }
                    })
                    .collect();
                (country, moments)
            })
            .collect();
        NormStats {
            feature_names: self.feature_names.clone(),
            by_country,
        }
    }

    /// Z-scores every feature within each country and records the statistics.
    ///
    /// A feature that is constant within a country maps to 0 there.
    pub fn normalize_per_country(&self) -> FeatureTable {
        let stats = self.fit_norm_stats();
        // Every country in the table has statistics, so this cannot fail.
        stats
            .apply(self)
            .expect("statistics fitted on the same table")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    fn tile(x: u32) -> TileId {
        TileId::new(14, x, 100).unwrap()
    }

    fn table(rows: &[(&str, f64)]) -> FeatureTable {
        FeatureTable::new(
            vec!["f".into()],
            rows.iter()
                .enumerate()
                .map(|(i, (c, v))| (tile(i as u32), cc(c), vec![*v]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn z_scores_use_population_std() {
        let t = table(&[("AA", 1.0), ("AA", 2.0), ("AA", 3.0)]).normalize_per_country();
        let z = t.values().column(0);
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z[0] + expected).abs() < 1e-12);
        assert!(z[1].abs() < 1e-12);
        assert!((z[2] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let t = table(&[("AA", 5.0), ("AA", 5.0)]).normalize_per_country();
        assert_eq!(t.values().column(0), vec![0.0, 0.0]);
    }

    #[test]
    fn countries_normalize_independently() {
        let t = table(&[("AA", 1.0), ("AA", 4.0), ("BB", 1.0), ("BB", 4.0), ("BB", 1.0), ("BB", 4.0)])
            .normalize_per_country();
        let z = t.values().column(0);
        assert_eq!(z[0], z[2]);
        assert_eq!(z[1], z[3]);
    }

    #[test]
    fn normalization_is_idempotent() {
        let t = table(&[("AA", 1.5), ("AA", -2.0), ("AA", 7.25), ("BB", 3.0), ("BB", 3.5)]);
        let once = t.normalize_per_country();
        let twice = once.normalize_per_country();
        for (a, b) in once.values().as_slice().iter().zip(twice.values().as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn unseen_country_is_rejected() {
        let stats = table(&[("AA", 1.0), ("AA", 2.0)]).fit_norm_stats();
        let other = table(&[("BB", 1.0)]);
        assert!(matches!(stats.apply(&other), Err(Error::UnknownCountry(_))));
    }

    #[test]
    fn duplicate_tiles_rejected() {
        let rows = vec![(tile(1), cc("AA"), vec![1.0]), (tile(1), cc("AA"), vec![2.0])];
        assert!(FeatureTable::new(vec!["f".into()], rows).is_err());
    }

    #[test]
    fn standard_names_have_112_entries() {
        let names = standard_feature_names();
        assert_eq!(names.len(), 112);
        assert_eq!(names[12], "img_pc_000");
        assert_eq!(names[111], "img_pc_099");
    }
}
