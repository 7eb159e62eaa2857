//! Ground-truth training rows: household asset index, cluster wealth
//! labels and the population-weighted spatial join of tile features onto
//! survey clusters.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::ingest::{pca_fit, FeatureTable, PopulationTable};
use crate::matrix::Matrix;
use crate::tilegrid::{latlon_to_tile, LatLon, TileId, BASE_ZOOM};

/// Household asset indicators, in file order. `electricity` orients the index.
pub const ASSET_COLUMNS: [&str; 15] = [
    "electricity",
    "telephone",
    "automobile",
    "motorcycle",
    "refrigerator",
    "tv",
    "radio",
    "water_supply",
    "cooking_fuel",
    "trash_disposal",
    "toilet",
    "floor_material",
    "wall_material",
    "roof_material",
    "rooms",
];

/// One survey cluster as read from `clusters.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    pub cluster_id: String,
    pub country: CountryCode,
    pub centroid: LatLon,
    pub urban: bool,
    pub survey_year: Option<i32>,
}

/// One surveyed household. Asset responses are numeric: binary indicators
/// or ordinal scores, used as given.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRecord {
    pub id: String,
    pub country: CountryCode,
    pub cluster_id: String,
    pub location: Option<LatLon>,
    pub assets: Vec<f64>,
    pub weight: f64,
}

/// A labelled survey cluster with its joined feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterObservation {
    pub cluster_id: String,
    pub country: CountryCode,
    pub centroid: LatLon,
    pub urban: bool,
    pub rwi_label: f64,
    pub n_households: usize,
    pub features: Vec<f64>,
}

/// Asset-based wealth index of households from one country: the first
/// principal component of the standardized asset matrix, oriented to
/// correlate positively with electricity access.
pub fn household_wealth_index(households: &[&HouseholdRecord]) -> Result<Vec<f64>> {
    let n = households.len();
    if n < 2 {
        return Err(Error::TooFewRows {
            context: "household wealth index".into(),
            needed: 2,
            got: n,
        });
    }
    let d = households[0].assets.len();
    let x = Matrix::from_rows(d, households.iter().map(|h| &h.assets[..]))?;
    let model = pca_fit(&x, 1, true)?;
    let mut scores = model.project(&x)?.column(0);

    let covariance = |col: &[f64]| -> f64 {
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter().zip(&scores).map(|(c, s)| (c - mean) * s).sum()
    };
    let mut direction = covariance(&x.column(0));
    if direction.abs() < 1e-12 {
        let totals: Vec<f64> = x.iter_rows().map(|r| r.iter().sum()).collect();
        direction = covariance(&totals);
    }
    if direction < 0.0 {
        scores.iter_mut().for_each(|s| *s = -*s);
    }
    Ok(scores)
}

/// Computes the wealth index country by country. Returns household id to score.
pub fn household_index_by_country(households: &[HouseholdRecord]) -> Result<HashMap<String, f64>> {
    let mut groups: BTreeMap<CountryCode, Vec<&HouseholdRecord>> = BTreeMap::new();
    for h in households {
        groups.entry(h.country).or_default().push(h);
    }
    let per_country: Vec<Vec<(String, f64)>> = groups
        .into_par_iter()
        .map(|(_, members)| {
            let scores = household_wealth_index(&members)?;
            Ok(members
                .iter()
                .zip(scores)
                .map(|(h, s)| (h.id.clone(), s))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_country.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Plain mean of household scores.
    #[default]
    Unweighted,
    /// Survey-weighted mean.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterLabel {
    pub rwi: f64,
    pub n_households: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterLabels {
    pub labels: BTreeMap<String, ClusterLabel>,
    /// Clusters without any usable household.
    pub skipped: Vec<String>,
}

/// Mean household wealth per cluster.
pub fn cluster_labels(
    clusters: &[ClusterRecord],
    households: &[HouseholdRecord],
    scores: &HashMap<String, f64>,
    mode: LabelMode,
) -> ClusterLabels {
    let mut sums: HashMap<&str, (f64, f64, usize)> = HashMap::new();
    for h in households {
        let Some(&s) = scores.get(&h.id) else { continue };
        if !s.is_finite() {
            continue;
        }
        let w = match mode {
            LabelMode::Unweighted => 1.0,
            LabelMode::Weighted => h.weight,
        };
        let e = sums.entry(h.cluster_id.as_str()).or_default();
        e.0 += w * s;
        e.1 += w;
        e.2 += 1;
    }
    let mut out = ClusterLabels::default();
    for c in clusters {
        match sums.get(c.cluster_id.as_str()) {
            Some(&(sw, w, n)) if w > 0.0 => {
                out.labels.insert(
                    c.cluster_id.clone(),
                    ClusterLabel {
                        rwi: sw / w,
                        n_households: n,
                    },
                );
            }
            _ => out.skipped.push(c.cluster_id.clone()),
        }
    }
    if !out.skipped.is_empty() {
        log::warn!("{} clusters have no usable households", out.skipped.len());
    }
    out
}

/// Window side length: 2 tiles for urban clusters, 4 for rural.
pub fn window_size(urban: bool) -> usize {
    if urban {
        2
    } else {
        4
    }
}

/// Zoom-14 tiles whose features are averaged for a cluster centroid.
///
/// The 2x2 window holds the centroid tile and its three neighbours toward
/// the quadrant of the tile the centroid falls in; the 4x4 window pads it by
/// one tile on every side. Tiles off the map edge are dropped.
pub fn join_window(centroid: LatLon, urban: bool) -> Vec<TileId> {
    let tile = latlon_to_tile(centroid, BASE_ZOOM).expect("base zoom is valid");
    let (fx, fy) = centroid
        .offset_in_tile(BASE_ZOOM)
        .expect("base zoom is valid");
    let x0: i64 = if fx < 0.5 { -1 } else { 0 };
    let y0: i64 = if fy < 0.5 { -1 } else { 0 };
    let pad: i64 = if urban { 0 } else { 1 };
    let mut out = Vec::with_capacity(16);
    for dy in (y0 - pad)..=(y0 + 1 + pad) {
        for dx in (x0 - pad)..=(x0 + 1 + pad) {
            if let Some(t) = tile.offset(dx, dy) {
                out.push(t);
            }
        }
    }
    out
}

/// Population-weighted mean feature vector over the cluster's window.
///
/// Window tiles without features are left out; when every available tile
/// has zero population the plain mean is used.
pub fn spatial_join(
    centroid: LatLon,
    urban: bool,
    features: &FeatureTable,
    population: &PopulationTable,
) -> Option<Vec<f64>> {
    let available: Vec<(&[f64], f64)> = join_window(centroid, urban)
        .iter()
        .filter_map(|t| features.get(t).map(|v| (v, population.get(t))))
        .collect();
    if available.is_empty() {
        return None;
    }
    let total: f64 = available.iter().map(|(_, p)| p).sum();
    let d = features.feature_names().len();
    let mut out = vec![0.0; d];
    for (values, pop) in &available {
        let w = if total > 0.0 {
            pop / total
        } else {
            1.0 / available.len() as f64
        };
        out.iter_mut().zip(*values).for_each(|(o, v)| *o += w * v);
    }
    Some(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub feature_names: Vec<String>,
    pub observations: Vec<ClusterObservation>,
    /// Labelled clusters with no window tile in the feature table.
    pub unjoinable: Vec<String>,
}

/// Joins features onto every labelled cluster, preserving cluster order.
pub fn build_training_set(
    clusters: &[ClusterRecord],
    labels: &ClusterLabels,
    features: &FeatureTable,
    population: &PopulationTable,
) -> TrainingSet {
    let joined: Vec<(usize, Option<Vec<f64>>)> = clusters
        .par_iter()
        .enumerate()
        .filter(|(_, c)| labels.labels.contains_key(&c.cluster_id))
        .map(|(i, c)| (i, spatial_join(c.centroid, c.urban, features, population)))
        .collect();
    let mut set = TrainingSet {
        feature_names: features.feature_names().to_vec(),
        ..Default::default()
    };
    for (i, vector) in joined {
        let c = &clusters[i];
        match vector {
            Some(features) => {
                let label = labels.labels[&c.cluster_id];
                set.observations.push(ClusterObservation {
                    cluster_id: c.cluster_id.clone(),
                    country: c.country,
                    centroid: c.centroid,
                    urban: c.urban,
                    rwi_label: label.rwi,
                    n_households: label.n_households,
                    features,
                });
            }
            None => set.unjoinable.push(c.cluster_id.clone()),
        }
    }
    if !set.unjoinable.is_empty() {
        log::warn!("{} clusters could not be joined to features", set.unjoinable.len());
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc() -> CountryCode {
        CountryCode::new("TG").unwrap()
    }

    fn household(id: &str, cluster: &str, assets: Vec<f64>, weight: f64) -> HouseholdRecord {
        HouseholdRecord {
            id: id.into(),
            country: cc(),
            cluster_id: cluster.into(),
            location: None,
            assets,
            weight,
        }
    }

    #[test]
    fn richer_household_scores_higher() {
        let rich = household("a", "c", vec![1.0; 15], 1.0);
        let poor = household("b", "c", vec![0.0; 15], 1.0);
        let s = household_wealth_index(&[&rich, &poor]).unwrap();
        assert!(s[0] > s[1]);
    }

    #[test]
    fn two_asset_index_is_symmetric() {
        let hh: Vec<_> = [[1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
            .iter()
            .enumerate()
            .map(|(i, a)| household(&i.to_string(), "c", a.to_vec(), 1.0))
            .collect();
        let refs: Vec<_> = hh.iter().collect();
        let s = household_wealth_index(&refs).unwrap();
        assert!((s[0] + s[3]).abs() < 1e-12);
        assert!((s[1] + s[2]).abs() < 1e-12);
        assert!(s[0] > s[1] && s[0] > s[2] && s[3] < s[1] && s[3] < s[2]);
        assert!(s.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn duplicated_households_get_identical_scores() {
        let base = [[1.0, 0.0, 2.0], [0.0, 1.0, 1.0], [1.0, 1.0, 3.0]];
        let hh: Vec<_> = base
            .iter()
            .chain(base.iter())
            .enumerate()
            .map(|(i, a)| household(&i.to_string(), "c", a.to_vec(), 1.0))
            .collect();
        let refs: Vec<_> = hh.iter().collect();
        let s = household_wealth_index(&refs).unwrap();
        for i in 0..3 {
            assert_eq!(s[i], s[i + 3]);
        }
    }

    #[test]
    fn identical_assets_are_degenerate() {
        let a = household("a", "c", vec![1.0; 15], 1.0);
        let b = household("b", "c", vec![1.0; 15], 1.0);
        assert!(matches!(household_wealth_index(&[&a, &b]), Err(Error::Degenerate(_))));
    }

    fn cluster(id: &str) -> ClusterRecord {
        ClusterRecord {
            cluster_id: id.into(),
            country: cc(),
            centroid: LatLon::new(6.0, 1.0).unwrap(),
            urban: true,
            survey_year: None,
        }
    }

    #[test]
    fn cluster_means() {
        let clusters = vec![cluster("one"), cluster("pair"), cluster("empty")];
        let hh = vec![
            household("h1", "one", vec![], 1.0),
            household("h2", "pair", vec![], 1.0),
            household("h3", "pair", vec![], 3.0),
        ];
        let scores: HashMap<String, f64> =
            [("h1", 0.7), ("h2", 0.0), ("h3", 1.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let plain = cluster_labels(&clusters, &hh, &scores, LabelMode::Unweighted);
        assert_eq!(plain.labels["one"].rwi, 0.7);
        assert_eq!(plain.labels["pair"].rwi, 0.5);
        assert_eq!(plain.skipped, vec!["empty".to_string()]);
        let weighted = cluster_labels(&clusters, &hh, &scores, LabelMode::Weighted);
        assert_eq!(weighted.labels["pair"].rwi, 0.75);

        let sym: HashMap<String, f64> =
            [("h2", -1.0), ("h3", 1.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let l = cluster_labels(&clusters, &hh, &sym, LabelMode::Unweighted);
        assert_eq!(l.labels["pair"].rwi, 0.0);
    }

    #[test]
    fn window_sizes() {
        let p = LatLon::new(6.13, 1.22).unwrap();
        let urban = join_window(p, true);
        let rural = join_window(p, false);
        assert_eq!(urban.len(), 4);
        assert_eq!(rural.len(), 16);
        let home = latlon_to_tile(p, BASE_ZOOM).unwrap();
        assert!(urban.contains(&home));
        assert!(urban.iter().all(|t| rural.contains(t)));
    }

    fn table_for(tiles: &[TileId], vectors: &[Vec<f64>]) -> FeatureTable {
        FeatureTable::new(
            vec!["a".into(), "b".into()],
            tiles.iter().zip(vectors).map(|(t, v)| (*t, cc(), v.clone())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn join_weights_by_population() {
        let p = LatLon::new(6.13, 1.22).unwrap();
        let window = join_window(p, true);
        let t = table_for(&window[..2], &[vec![1.0, 0.0], vec![0.0, 4.0]]);
        let pop = PopulationTable::new([(window[0], 100.0), (window[1], 300.0), (window[2], 999.0)]);
        let v = spatial_join(p, true, &t, &pop).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-12);
        assert!((v[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn join_falls_back_to_plain_mean() {
        let p = LatLon::new(6.13, 1.22).unwrap();
        let window = join_window(p, false);
        let t = table_for(&window[..2], &[vec![1.0, 0.0], vec![3.0, 2.0]]);
        let v = spatial_join(p, false, &t, &PopulationTable::default()).unwrap();
        assert_eq!(v, vec![2.0, 1.0]);
    }

    #[test]
    fn join_of_constant_vectors_is_that_vector() {
        let p = LatLon::new(-1.3, 36.8).unwrap();
        let window = join_window(p, false);
        let vectors = vec![vec![0.5, -2.0]; window.len()];
        let t = table_for(&window, &vectors);
        let pop = PopulationTable::new(window.iter().enumerate().map(|(i, t)| (*t, i as f64 * 7.0)));
        let v = spatial_join(p, false, &t, &pop).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_features_means_unjoinable() {
        let p = LatLon::new(6.13, 1.22).unwrap();
        let t = table_for(&[], &[]);
        assert!(spatial_join(p, true, &t, &PopulationTable::default()).is_none());
    }
}
