//! Cross-validation protocols, grid search and feature-importance tables.

mod metrics;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use metrics::{mean_squared_error, r_squared, r_squared_sse, spearman, subset_r_squared, SubsetR2};

use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::gbdt::{train, GbdtParams};
use crate::labels::TrainingSet;
use crate::matrix::Matrix;
use crate::mix_seed;
use crate::tilegrid::{haversine_km, LatLon};

/// Folds per country in the k-fold and spatial protocols.
pub const DEFAULT_FOLDS: usize = 5;

/// Cluster-level observations in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub countries: Vec<CountryCode>,
    pub centroids: Vec<LatLon>,
    pub urban: Vec<bool>,
    pub ids: Vec<String>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn from_training_set(set: &TrainingSet) -> Result<Self> {
        let obs = &set.observations;
        let x = Matrix::from_rows(set.feature_names.len(), obs.iter().map(|o| &o.features))?;
        Ok(Dataset {
            x,
            y: obs.iter().map(|o| o.rwi_label).collect(),
            countries: obs.iter().map(|o| o.country).collect(),
            centroids: obs.iter().map(|o| o.centroid).collect(),
            urban: obs.iter().map(|o| o.urban).collect(),
            ids: obs.iter().map(|o| o.cluster_id.clone()).collect(),
            feature_names: set.feature_names.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Row indices per country, ascending.
    pub fn country_rows(&self) -> BTreeMap<CountryCode, Vec<usize>> {
        let mut out: BTreeMap<CountryCode, Vec<usize>> = BTreeMap::new();
        for (i, c) in self.countries.iter().enumerate() {
            out.entry(*c).or_default().push(i);
        }
        out
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            countries: rows.iter().map(|&i| self.countries[i]).collect(),
            centroids: rows.iter().map(|&i| self.centroids[i]).collect(),
            urban: rows.iter().map(|&i| self.urban[i]).collect(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    BasicKfold,
    LeaveCountryOut,
    Spatial,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::BasicKfold, Protocol::LeaveCountryOut, Protocol::Spatial];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::BasicKfold => "basic_kfold",
            Protocol::LeaveCountryOut => "leave_country_out",
            Protocol::Spatial => "spatial",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown protocol {s:?}")))
    }
}

/// Train and test rows (indices into the full dataset) of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub country: CountryCode,
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub country: CountryCode,
    pub fold: usize,
    /// `None` when the test labels are constant.
    pub r2: Option<f64>,
    pub sse: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub protocol: Protocol,
    pub params: GbdtParams,
    pub folds: Vec<Fold>,
    pub results: Vec<FoldResult>,
    /// Mean held-out R² per country.
    pub per_country: BTreeMap<CountryCode, f64>,
}

impl CvReport {
    /// Unweighted mean of the per-country values.
    pub fn mean_r2(&self) -> f64 {
        if self.per_country.is_empty() {
            return f64::NAN;
        }
        self.per_country.values().sum::<f64>() / self.per_country.len() as f64
    }

    /// Mean squared error over every held-out prediction.
    pub fn mse(&self) -> f64 {
        let n: usize = self.results.iter().map(|r| r.n_test).sum();
        self.results.iter().map(|r| r.sse).sum::<f64>() / n.max(1) as f64
    }
}

/// Seeded partition of `n` rows into `k` near-equal folds.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, row) in order.into_iter().enumerate() {
        folds[pos % k].push(row);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

/// Training-set size for one spatial repetition.
pub fn spatial_train_size(n: usize, k: usize) -> usize {
    (n * (k - 1)).div_ceil(k)
}

/// Spatial repetitions over local rows: each anchor keeps its nearest
/// rows for training (ties by row id, anchor first) and tests on the rest.
/// Anchors are drawn without replacement.
pub fn spatial_partition(centroids: &[LatLon], k: usize, seed: u64) -> Vec<(usize, Vec<usize>, Vec<usize>)> {
    let n = centroids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = index::sample(&mut rng, n, k).into_vec();
    let n_train = spatial_train_size(n, k);
    anchors
        .into_iter()
        .map(|anchor| {
            let mut order: Vec<(f64, bool, usize)> = (0..n)
                .map(|i| (haversine_km(centroids[anchor], centroids[i]), i != anchor, i))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut train: Vec<usize> = order[..n_train].iter().map(|o| o.2).collect();
            let mut test: Vec<usize> = order[n_train..].iter().map(|o| o.2).collect();
            train.sort_unstable();
            test.sort_unstable();
            (anchor, train, test)
        })
        .collect()
}

fn country_seed(seed: u64, country: CountryCode) -> u64 {
    mix_seed(seed, country.as_str().as_bytes())
}

fn check_rows(country: CountryCode, n: usize, k: usize) -> Result<()> {
    if k < 2 || n < k {
        return Err(Error::TooFewRows {
            context: format!("{k}-fold validation in {country}"),
            needed: k.max(2),
            got: n,
        });
    }
    Ok(())
}

pub fn basic_kfold_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let mut folds = Vec::new();
    for (country, rows) in data.country_rows() {
        check_rows(country, rows.len(), k)?;
        let parts = kfold_partition(rows.len(), k, country_seed(seed, country));
        for (index, test_local) in parts.iter().enumerate() {
            let test: Vec<usize> = test_local.iter().map(|&i| rows[i]).collect();
            let train: Vec<usize> = parts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != index)
                .flat_map(|(_, p)| p.iter().map(|&i| rows[i]))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            folds.push(Fold {
                country,
                index,
                train,
                test,
            });
        }
    }
    Ok(folds)
}

pub fn leave_country_out_folds(data: &Dataset) -> Result<Vec<Fold>> {
    let groups = data.country_rows();
    if groups.len() < 2 {
        return Err(Error::invalid("leave-country-out validation needs at least two countries"));
    }
    Ok(groups
        .iter()
        .enumerate()
        .map(|(index, (&country, rows))| Fold {
            country,
            index,
            train: (0..data.len()).filter(|&i| data.countries[i] != country).collect(),
            test: rows.clone(),
        })
        .collect())
}

pub fn spatial_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let mut folds = Vec::new();
    for (country, rows) in data.country_rows() {
        check_rows(country, rows.len(), k)?;
        let centroids: Vec<LatLon> = rows.iter().map(|&i| data.centroids[i]).collect();
        for (index, (_, train, test)) in spatial_partition(&centroids, k, country_seed(seed, country))
            .into_iter()
            .enumerate()
        {
            folds.push(Fold {
                country,
                index,
                train: train.iter().map(|&i| rows[i]).collect(),
                test: test.iter().map(|&i| rows[i]).collect(),
            });
        }
    }
    Ok(folds)
}

/// Held-out R² of one fold. Constant predictions score 0; constant test
/// labels leave the fold unscored.
fn fold_r2(y: &[f64], pred: &[f64]) -> Option<f64> {
    match r_squared(y, pred, None) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(msg)) if msg.starts_with("predictions") => Some(0.0),
        Err(_) => None,
    }
}

/// Trains and scores every fold in parallel, merging in fold order.
pub fn run_folds(data: &Dataset, protocol: Protocol, folds: Vec<Fold>, params: &GbdtParams) -> Result<CvReport> {
    let results = folds
        .par_iter()
        .map(|fold| {
            let train_set = data.subset(&fold.train);
            let model = train(&train_set.x, &train_set.y, None, params)?;
            let test_set = data.subset(&fold.test);
            let pred = model.predict(&test_set.x)?;
            let sse = test_set.y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(FoldResult {
                country: fold.country,
                fold: fold.index,
                r2: fold_r2(&test_set.y, &pred),
                sse,
                n_test: pred.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums: BTreeMap<CountryCode, (f64, usize)> = BTreeMap::new();
    for r in &results {
        if let Some(v) = r.r2 {
            let e = sums.entry(r.country).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    Ok(CvReport {
        protocol,
        params: *params,
        folds,
        results,
        per_country: sums.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect(),
    })
}

/// Held-out prediction for every row under within-country k-fold splits.
pub fn out_of_fold_predictions(data: &Dataset, k: usize, seed: u64, params: &GbdtParams) -> Result<Vec<f64>> {
    let folds = basic_kfold_folds(data, k, seed)?;
    let parts = folds
        .par_iter()
        .map(|fold| {
            let train_set = data.subset(&fold.train);
            let model = train(&train_set.x, &train_set.y, None, params)?;
            Ok((fold, model.predict(&data.subset(&fold.test).x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![f64::NAN; data.len()];
    for (fold, pred) in parts {
        for (&row, p) in fold.test.iter().zip(pred) {
            out[row] = p;
        }
    }
    Ok(out)
}

pub fn basic_kfold_cv(data: &Dataset, k: usize, seed: u64, params: &GbdtParams) -> Result<CvReport> {
    run_folds(data, Protocol::BasicKfold, basic_kfold_folds(data, k, seed)?, params)
}

pub fn leave_country_out_cv(data: &Dataset, params: &GbdtParams) -> Result<CvReport> {
    run_folds(data, Protocol::LeaveCountryOut, leave_country_out_folds(data)?, params)
}

pub fn spatial_cv(data: &Dataset, k: usize, seed: u64, params: &GbdtParams) -> Result<CvReport> {
    run_folds(data, Protocol::Spatial, spatial_folds(data, k, seed)?, params)
}

pub fn cross_validate(data: &Dataset, protocol: Protocol, k: usize, seed: u64, params: &GbdtParams) -> Result<CvReport> {
    match protocol {
        Protocol::BasicKfold => basic_kfold_cv(data, k, seed, params),
        Protocol::LeaveCountryOut => leave_country_out_cv(data, params),
        Protocol::Spatial => spatial_cv(data, k, seed, params),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best: GbdtParams,
    pub report: CvReport,
    pub points: Vec<GridPoint>,
}

/// Relative MSE difference below which two grid points tie.
const GRID_TIE_TOLERANCE: f64 = 1e-12;

/// Evaluates every (depth, min child weight) pair under one protocol and
/// keeps the lowest cross-validated MSE. Ties go to the smaller depth,
/// then the smaller weight.
pub fn grid_search(
    data: &Dataset,
    protocol: Protocol,
    grid: &[(usize, f64)],
    base: &GbdtParams,
    k: usize,
    seed: u64,
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let reports = grid
        .par_iter()
        .map(|&(d, w)| cross_validate(data, protocol, k, seed, &base.with_depth_and_weight(d, w)))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| {
        grid[a].0.cmp(&grid[b].0).then(grid[a].1.total_cmp(&grid[b].1))
    });
    let mut best = order[0];
    for &i in &order[1..] {
        let (m, bm) = (reports[i].mse(), reports[best].mse());
        if m < bm - GRID_TIE_TOLERANCE * bm.abs().max(f64::MIN_POSITIVE) {
            best = i;
        }
    }
    let points = grid
        .iter()
        .zip(&reports)
        .map(|(&(d, w), r)| GridPoint {
            max_depth: d,
            min_child_weight: w,
            mse: r.mse(),
        })
        .collect();
    let report = reports.into_iter().nth(best).expect("best index in range");
    Ok(GridSearch {
        best: report.params,
        report,
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateR2 {
    pub country: CountryCode,
    pub feature: String,
    pub r2: f64,
}

/// R² of the one-feature least-squares regression of the label, per
/// country and feature. Constant features record 0.
pub fn univariate_importance(data: &Dataset) -> Result<Vec<UnivariateR2>> {
    let mut out = Vec::new();
    for (country, rows) in data.country_rows() {
        let y: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
        for (j, name) in data.feature_names.iter().enumerate() {
            let x: Vec<f64> = rows.iter().map(|&i| data.x.get(i, j)).collect();
            let r2 = match r_squared(&y, &x, None) {
                Ok(v) => v,
                Err(Error::UndefinedMetric(msg)) if msg.starts_with("predictions") => 0.0,
                Err(e) => return Err(e),
            };
            out.push(UnivariateR2 {
                country,
                feature: name.clone(),
                r2,
            });
        }
    }
    Ok(out)
}

/// Entry `[i][j]`: model trained on country `j`, tested on country `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCountryMatrix {
    pub countries: Vec<CountryCode>,
    pub r2: Vec<Vec<f64>>,
    pub mse: Vec<Vec<f64>>,
}

/// Trains one model per country with that country's parameters and scores
/// it on every other country. The diagonal is within-country k-fold.
pub fn cross_country_matrix(
    data: &Dataset,
    params: &BTreeMap<CountryCode, GbdtParams>,
    default: &GbdtParams,
    k: usize,
    seed: u64,
) -> Result<CrossCountryMatrix> {
    let groups = data.country_rows();
    if groups.len() < 2 {
        return Err(Error::invalid("cross-country matrix needs at least two countries"));
    }
    let countries: Vec<CountryCode> = groups.keys().copied().collect();
    let params_of = |c: &CountryCode| params.get(c).copied().unwrap_or(*default);
    let columns = countries
        .par_iter()
        .map(|train_c| {
            let p = params_of(train_c);
            let sub = data.subset(&groups[train_c]);
            let model = train(&sub.x, &sub.y, None, &p)?;
            let mut r2_col = Vec::with_capacity(countries.len());
            let mut mse_col = Vec::with_capacity(countries.len());
            for test_c in &countries {
                if test_c == train_c {
                    let report = basic_kfold_cv(&sub, k, seed, &p)?;
                    r2_col.push(report.per_country.get(train_c).copied().unwrap_or(0.0));
                    mse_col.push(report.mse());
                } else {
                    let test = data.subset(&groups[test_c]);
                    let pred = model.predict(&test.x)?;
                    r2_col.push(fold_r2(&test.y, &pred).unwrap_or(0.0));
                    mse_col.push(mean_squared_error(&test.y, &pred));
                }
            }
            Ok((r2_col, mse_col))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = countries.len();
    let mut r2 = vec![vec![0.0; n]; n];
    let mut mse = vec![vec![0.0; n]; n];
    for (j, (rc, mc)) in columns.into_iter().enumerate() {
        for i in 0..n {
            r2[i][j] = rc[i];
            mse[i][j] = mc[i];
        }
    }
    Ok(CrossCountryMatrix { countries, r2, mse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cc(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    fn linear_dataset(n: usize, countries: &[&str], seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut cs = Vec::new();
        let mut centroids = Vec::new();
        for (ci, c) in countries.iter().enumerate() {
            for _ in 0..n {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                rows.push(vec![a, b]);
                y.push(2.0 * a + 0.5 * b);
                cs.push(cc(c));
                centroids.push(LatLon::new(ci as f64 * 10.0 + a, b).unwrap());
            }
        }
        Dataset {
            x: Matrix::from_rows(2, &rows).unwrap(),
            y,
            urban: vec![false; cs.len()],
            ids: (0..cs.len()).map(|i| i.to_string()).collect(),
            countries: cs,
            centroids,
            feature_names: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn kfold_partition_is_balanced_disjoint_and_seeded() {
        let folds = kfold_partition(100, 5, 3);
        assert!(folds.iter().all(|f| f.len() == 20));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(folds, kfold_partition(100, 5, 3));
        assert_ne!(folds, kfold_partition(100, 5, 4));
    }

    #[test]
    fn spatial_split_sizes_and_contiguity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<LatLon> = (0..100)
            .map(|_| LatLon::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)).unwrap())
            .collect();
        let reps = spatial_partition(&pts, 5, 9);
        assert_eq!(reps.len(), 5);
        let anchors: std::collections::BTreeSet<usize> = reps.iter().map(|r| r.0).collect();
        assert_eq!(anchors.len(), 5);
        for (anchor, train, test) in &reps {
            assert_eq!(train.len(), 80);
            assert_eq!(test.len(), 20);
            assert!(train.contains(anchor));
            let far_train = train.iter().map(|&i| haversine_km(pts[*anchor], pts[i])).fold(0.0, f64::max);
            let near_test = test
                .iter()
                .map(|&i| haversine_km(pts[*anchor], pts[i]))
                .fold(f64::INFINITY, f64::min);
            assert!(far_train <= near_test);
        }
    }

    #[test]
    fn duplicate_centroids_keep_anchor_in_training() {
        let p = LatLon::new(1.0, 1.0).unwrap();
        let reps = spatial_partition(&[p; 6], 3, 0);
        for (anchor, train, _) in reps {
            assert!(train.contains(&anchor));
            assert_eq!(train.len(), 4);
        }
    }

    #[test]
    fn noiseless_linear_target_is_learned() {
        let data = linear_dataset(200, &["AA"], 5);
        let params = GbdtParams {
            n_trees: 300,
            max_depth: 4,
            ..Default::default()
        };
        let report = basic_kfold_cv(&data, 5, 1, &params).unwrap();
        assert_eq!(report.results.len(), 5);
        assert!(report.per_country[&cc("AA")] >= 0.99, "{:?}", report.per_country);
    }

    #[test]
    fn out_of_fold_covers_every_row_once() {
        let data = linear_dataset(40, &["AA", "BB"], 8);
        let params = GbdtParams {
            n_trees: 20,
            ..Default::default()
        };
        let oof = out_of_fold_predictions(&data, 5, 3, &params).unwrap();
        assert_eq!(oof.len(), 80);
        assert!(oof.iter().all(|v| v.is_finite()));
        let report = basic_kfold_cv(&data, 5, 3, &params).unwrap();
        let sse: f64 = report.results.iter().map(|r| r.sse).sum();
        let direct: f64 = oof.iter().zip(&data.y).map(|(p, y)| (p - y) * (p - y)).sum();
        assert!((sse - direct).abs() < 1e-9 * sse.max(1.0));
    }

    #[test]
    fn leave_country_out_trains_on_the_other() {
        let data = linear_dataset(30, &["AA", "BB"], 2);
        let folds = leave_country_out_folds(&data).unwrap();
        assert_eq!(folds.len(), 2);
        for f in &folds {
            assert!(f.train.iter().all(|&i| data.countries[i] != f.country));
            assert!(f.test.iter().all(|&i| data.countries[i] == f.country));
        }
        assert!(leave_country_out_folds(&linear_dataset(10, &["AA"], 2)).is_err());
    }

    #[test]
    fn too_few_rows() {
        let data = linear_dataset(4, &["AA"], 2);
        assert!(matches!(basic_kfold_folds(&data, 5, 0), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn grid_of_one_point() {
        let data = linear_dataset(20, &["AA"], 2);
        let base = GbdtParams {
            n_trees: 5,
            ..Default::default()
        };
        let g = grid_search(&data, Protocol::BasicKfold, &[(3, 5.0)], &base, 5, 0).unwrap();
        assert_eq!((g.best.max_depth, g.best.min_child_weight), (3, 5.0));
    }

    #[test]
    fn tie_prefers_shallow_tree() {
        // A two-region step is fit exactly at any depth.
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let data = Dataset {
            x: Matrix::from_rows(1, &rows).unwrap(),
            y: (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect(),
            countries: vec![cc("AA"); n],
            centroids: vec![LatLon::new(0.0, 0.0).unwrap(); n],
            urban: vec![false; n],
            ids: (0..n).map(|i| i.to_string()).collect(),
            feature_names: vec!["x".into()],
        };
        let base = GbdtParams {
            n_trees: 20,
            learning_rate: 1.0,
            ..Default::default()
        };
        let g = grid_search(&data, Protocol::BasicKfold, &[(30, 1.0), (1, 1.0)], &base, 5, 0).unwrap();
        assert_eq!(g.best.max_depth, 1);
        for p in &g.points {
            assert!(g.report.mse() <= p.mse);
        }
    }

    #[test]
    fn univariate_cases() {
        let mut data = linear_dataset(50, &["AA"], 8);
        let rows: Vec<Vec<f64>> = data.y.iter().map(|&v| vec![v, -v, 1.0]).collect();
        data.x = Matrix::from_rows(3, &rows).unwrap();
        data.feature_names = vec!["same".into(), "neg".into(), "const".into()];
        let out = univariate_importance(&data).unwrap();
        assert!((out[0].r2 - 1.0).abs() < 1e-12);
        assert!((out[1].r2 - 1.0).abs() < 1e-12);
        assert_eq!(out[2].r2, 0.0);
    }

    #[test]
    fn permuted_feature_has_small_r2() {
        let mut data = linear_dataset(2000, &["AA"], 8);
        let mut shuffled = data.y.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(77));
        data.x = Matrix::from_rows(1, shuffled.iter().map(|v| [*v])).unwrap();
        data.feature_names = vec!["perm".into()];
        let out = univariate_importance(&data).unwrap();
        // Under independence n·R² is roughly chi-square with one degree of freedom.
        assert!(out[0].r2 < 0.01, "{}", out[0].r2);
    }

    #[test]
    fn cloned_countries_give_symmetric_matrix() {
        let a = linear_dataset(60, &["AA"], 4);
        let mut b = a.clone();
        b.countries = vec![cc("BB"); b.len()];
        let mut x = a.x.as_slice().to_vec();
        x.extend_from_slice(b.x.as_slice());
        let data = Dataset {
            x: Matrix::from_vec(120, 2, x).unwrap(),
            y: [a.y.clone(), b.y.clone()].concat(),
            countries: [a.countries.clone(), b.countries.clone()].concat(),
            centroids: [a.centroids.clone(), b.centroids.clone()].concat(),
            urban: vec![false; 120],
            ids: (0..120).map(|i| i.to_string()).collect(),
            feature_names: a.feature_names.clone(),
        };
        let params = GbdtParams {
            n_trees: 30,
            ..Default::default()
        };
        let m = cross_country_matrix(&data, &BTreeMap::new(), &params, 5, 3).unwrap();
        assert!((m.r2[0][1] - m.r2[1][0]).abs() < 1e-12);
        assert!((m.r2[0][0] - m.r2[1][1]).abs() < 0.05);
        let diag = basic_kfold_cv(&a, 5, 3, &params).unwrap();
        assert!((m.r2[0][0] - diag.per_country[&cc("AA")]).abs() < 1e-12);
        assert!(m.r2.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }
}
