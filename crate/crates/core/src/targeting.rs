//! Budget-constrained geographic targeting simulations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::r_squared;
use crate::ingest::PopulationTable;
use crate::mapping::AdminAssignment;
use crate::mix_seed;
use crate::tilegrid::{haversine_km, LatLon, TileId};

/// Budget fractions simulated by default.
pub const BUDGETS: [f64; 2] = [0.25, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct TargetHousehold {
    pub id: String,
    pub location: LatLon,
    pub true_wealth: f64,
    pub weight: f64,
    pub tile: TileId,
}

/// A survey cluster summarized by the mean wealth of its households.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurveyCluster {
    pub centroid: LatLon,
    pub mean_wealth: f64,
    pub n_households: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    /// Model estimate of the household's tile.
    MlTiles,
    /// Population-weighted model estimate of the household's unit.
    MlUnits(String),
    /// Survey mean of the unit; unsurveyed units are dropped.
    SurveyUnitsExclude(String),
    /// Survey mean of the unit, or of the nearest surveyed unit.
    SurveyUnitsImpute(String),
    /// Mean of the k nearest survey clusters.
    KnnClusters(usize),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::MlTiles => write!(f, "ml_tiles"),
            Scheme::MlUnits(l) => write!(f, "ml_units:{l}"),
            Scheme::SurveyUnitsExclude(l) => write!(f, "survey_units_exclude:{l}"),
            Scheme::SurveyUnitsImpute(l) => write!(f, "survey_units_impute:{l}"),
            Scheme::KnnClusters(k) => write!(f, "knn_clusters:{k}"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let level = || {
            if arg.is_empty() {
                Err(Error::invalid(format!("scheme {name} needs an admin level, e.g. {name}:canton")))
            } else {
                Ok(arg.to_string())
            }
        };
        match name {
            "ml_tiles" => Ok(Scheme::MlTiles),
            "ml_units" => Ok(Scheme::MlUnits(level()?)),
            "survey_units_exclude" => Ok(Scheme::SurveyUnitsExclude(level()?)),
            "survey_units_impute" => Ok(Scheme::SurveyUnitsImpute(level()?)),
            "knn_clusters" => arg
                .parse()
                .ok()
                .filter(|k| *k > 0)
                .map(Scheme::KnnClusters)
                .ok_or_else(|| Error::invalid(format!("knn_clusters needs a positive k, got {arg:?}"))),
            _ => Err(Error::invalid(format!("unknown targeting scheme {s:?}"))),
        }
    }
}

/// Everything a scheme may draw on.
pub struct TargetingContext<'a> {
    /// Model estimate per zoom-14 tile.
    pub tile_estimates: &'a BTreeMap<TileId, f64>,
    pub population: &'a PopulationTable,
    pub assignment: &'a AdminAssignment,
    pub survey: &'a [SurveyCluster],
}

/// Predicted wealth per household (`None`: excluded from evaluation) and
/// the spatial-unit bookkeeping behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub predicted: Vec<Option<f64>>,
    /// Spatial unit each household is located in.
    pub unit: Vec<String>,
    pub n_units: usize,
    pub n_units_with_estimates: usize,
}

fn unit_of<'a>(ctx: &'a TargetingContext<'_>, h: &TargetHousehold, level: &str) -> Result<&'a str> {
    ctx.assignment.unit_of(&h.tile, level).ok_or_else(|| {
        Error::invalid(format!(
            "household {} (tile {}) lies outside every {level} unit",
            h.id, h.tile
        ))
    })
}

/// Population-weighted centroid of a set of tiles.
fn tile_centroid(tiles: &[TileId], population: &PopulationTable) -> LatLon {
    let total: f64 = tiles.iter().map(|t| population.get(t)).sum();
    let weight = |t: &TileId| {
        if total > 0.0 {
            population.get(t) / total
        } else {
            1.0 / tiles.len() as f64
        }
    };
    let lat = tiles.iter().map(|t| weight(t) * t.center().lat()).sum();
    let lon = tiles.iter().map(|t| weight(t) * t.center().lon()).sum();
    LatLon::new(lat, lon).expect("mean of valid coordinates")
}

/// Survey mean per unit at a level, weighting clusters by household count.
fn survey_unit_means(ctx: &TargetingContext<'_>, level: &str) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for c in ctx.survey {
        let tile = crate::tilegrid::latlon_to_tile(c.centroid, crate::tilegrid::BASE_ZOOM)?;
        if let Some(unit) = ctx.assignment.unit_of(&tile, level) {
            let e = sums.entry(unit.to_string()).or_default();
            e.0 += c.n_households as f64 * c.mean_wealth;
            e.1 += c.n_households as f64;
        }
    }
    Ok(sums
        .into_iter()
        .filter(|(_, (_, n))| *n > 0.0)
        .map(|(u, (s, n))| (u, s / n))
        .collect())
}

pub fn assign_predicted_wealth(
    households: &[TargetHousehold],
    scheme: &Scheme,
    ctx: &TargetingContext<'_>,
) -> Result<Assignment> {
    match scheme {
        Scheme::MlTiles => {
            let predicted = households
                .iter()
                .map(|h| {
                    ctx.tile_estimates
                        .get(&h.tile)
                        .copied()
                        .map(Some)
                        .ok_or_else(|| Error::invalid(format!("household {} lies in unestimated tile {}", h.id, h.tile)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Assignment {
                predicted,
                unit: households.iter().map(|h| h.tile.quadkey()).collect(),
                n_units: ctx.tile_estimates.len(),
                n_units_with_estimates: ctx.tile_estimates.len(),
            })
        }
        Scheme::MlUnits(level) => {
            let units = ctx.assignment.units(level);
            let mut means = BTreeMap::new();
            for (unit, tiles) in &units {
                let (mut s, mut p, mut plain, mut n) = (0.0, 0.0, 0.0, 0usize);
                for t in tiles {
                    if let Some(v) = ctx.tile_estimates.get(t) {
                        let pop = ctx.population.get(t);
                        s += pop * v;
                        p += pop;
                        plain += v;
                        n += 1;
                    }
                }
                if n > 0 {
                    means.insert(unit.clone(), if p > 0.0 { s / p } else { plain / n as f64 });
                }
            }
            let unit = households
                .iter()
                .map(|h| unit_of(ctx, h, level).map(str::to_string))
                .collect::<Result<Vec<_>>>()?;
            Ok(Assignment {
                predicted: unit.iter().map(|u| means.get(u).copied()).collect(),
                unit,
                n_units: units.len(),
                n_units_with_estimates: means.len(),
            })
        }
        Scheme::SurveyUnitsExclude(level) | Scheme::SurveyUnitsImpute(level) => {
            let units = ctx.assignment.units(level);
            let means = survey_unit_means(ctx, level)?;
            let unit = households
                .iter()
                .map(|h| unit_of(ctx, h, level).map(str::to_string))
                .collect::<Result<Vec<_>>>()?;
            let mut predicted: Vec<Option<f64>> = unit.iter().map(|u| means.get(u).copied()).collect();
            if matches!(scheme, Scheme::SurveyUnitsImpute(_)) {
                let surveyed: Vec<(LatLon, f64, &String)> = means
                    .iter()
                    .map(|(u, m)| (tile_centroid(&units[u], ctx.population), *m, u))
                    .collect();
                if surveyed.is_empty() {
                    return Err(Error::invalid(format!("no surveyed {level} unit to impute from")));
                }
                let mut imputed: BTreeMap<&String, f64> = BTreeMap::new();
                for (p, u) in predicted.iter_mut().zip(&unit) {
                    if p.is_none() {
                        let v = *imputed.entry(u).or_insert_with(|| {
                            let c = tile_centroid(&units[u], ctx.population);
                            surveyed
                                .iter()
                                .map(|(sc, m, _)| (haversine_km(c, *sc), *m))
                                .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
                                .1
                        });
                        *p = Some(v);
                    }
                }
            }
            Ok(Assignment {
                predicted,
                unit,
                n_units: units.len(),
                n_units_with_estimates: means.len(),
            })
        }
        Scheme::KnnClusters(k) => {
            if ctx.survey.is_empty() {
                return Err(Error::invalid("no survey clusters for nearest-neighbour targeting"));
            }
            let k = (*k).min(ctx.survey.len());
            let rows: Vec<(f64, String)> = households
                .par_iter()
                .map(|h| {
                    let mut d: Vec<(f64, usize)> = ctx
                        .survey
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (haversine_km(h.location, c.centroid), i))
                        .collect();
                    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let mean = d[..k].iter().map(|(_, i)| ctx.survey[*i].mean_wealth).sum::<f64>() / k as f64;
                    (mean, format!("cluster{}", d[0].1))
                })
                .collect();
            Ok(Assignment {
                predicted: rows.iter().map(|r| Some(r.0)).collect(),
                unit: rows.into_iter().map(|r| r.1).collect(),
                n_units: ctx.survey.len(),
                n_units_with_estimates: ctx.survey.len(),
            })
        }
    }
}

/// Outcome of one fixed-budget simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetOutcome {
    pub budget: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Included share of each household in the true-poor set, in [0, 1].
    pub true_poor: Vec<f64>,
    /// Included share of each household in the selected set, in [0, 1].
    pub selected: Vec<f64>,
}

/// Walks `order` filling a budget of `mass`; the boundary household is
/// included fractionally so the total is exact.
fn fill(order: &[usize], weights: &[f64], mass: f64, share: &mut [f64]) -> f64 {
    let mut used = 0.0;
    for &i in order {
        let room = mass - used;
        if room <= 0.0 {
            break;
        }
        let take = (room / weights[i]).min(1.0);
        share[i] = take;
        used += take * weights[i];
        if take < 1.0 {
            break;
        }
    }
    used
}

/// Fixed-budget targeting of the weighted-poorest `budget` share.
///
/// The true poor are ranked by true wealth (ties by id). Selection takes
/// whole groups of equal predicted wealth in ascending order; inside the
/// marginal group households are drawn with probability proportional to
/// weight, using `seed`.
pub fn simulate_budget_targeting(
    true_wealth: &[f64],
    predicted: &[f64],
    weights: &[f64],
    ids: &[String],
    budget: f64,
    seed: u64,
) -> Result<BudgetOutcome> {
    let n = true_wealth.len();
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::invalid(format!("budget must lie in (0, 1), got {budget}")));
    }
    for (name, len) in [("predicted", predicted.len()), ("weights", weights.len()), ("ids", ids.len())] {
        if len != n {
            return Err(Error::invalid(format!("{name} has {len} entries, expected {n}")));
        }
    }
    if n == 0 {
        return Err(Error::TooFewRows {
            context: "targeting".into(),
            needed: 1,
            got: 0,
        });
    }
    if true_wealth.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::invalid("wealth values must be finite"));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid("household weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    let mass = budget * total;

    let mut by_truth: Vec<usize> = (0..n).collect();
    by_truth.sort_by(|&a, &b| true_wealth[a].total_cmp(&true_wealth[b]).then(ids[a].cmp(&ids[b])));
    let mut true_poor = vec![0.0; n];
    fill(&by_truth, weights, mass, &mut true_poor);

    // Weighted random order inside each group: keys u^(1/w), descending.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut key = vec![0.0; n];
    for &i in &by_id {
        let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        key[i] = u.ln() / weights[i];
    }
    let mut by_prediction: Vec<usize> = (0..n).collect();
    by_prediction.sort_by(|&a, &b| {
        predicted[a]
            .total_cmp(&predicted[b])
            .then(key[b].total_cmp(&key[a]))
            .then(ids[a].cmp(&ids[b]))
    });
    let mut selected = vec![0.0; n];
    fill(&by_prediction, weights, mass, &mut selected);

    let overlap: f64 = (0..n).map(|i| weights[i] * true_poor[i].min(selected[i])).sum();
    let mismatch: f64 = (0..n).map(|i| weights[i] * (true_poor[i] - selected[i]).abs()).sum();
    let precision = overlap / mass;
    Ok(BudgetOutcome {
        budget,
        accuracy: 1.0 - mismatch / total,
        precision,
        recall: precision,
        true_poor,
        selected,
    })
}

/// Survey-weighted squared correlation of household wealth with the
/// prediction assigned to it.
pub fn household_r2(true_wealth: &[f64], predicted: &[f64], weights: &[f64]) -> Result<f64> {
    r_squared(true_wealth, predicted, Some(weights))
}

/// One row of the targeting table.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetingReport {
    pub scheme: Scheme,
    pub n_units: usize,
    pub n_units_with_estimates: usize,
    pub n_units_with_truth: usize,
    pub n_units_with_both: usize,
    pub n_households: usize,
    pub r2: Option<f64>,
    pub outcomes: Vec<BudgetOutcome>,
}

impl TargetingReport {
    pub fn coverage_pct(&self) -> f64 {
        if self.n_units == 0 {
            0.0
        } else {
            100.0 * self.n_units_with_estimates as f64 / self.n_units as f64
        }
    }
}

/// Assigns predictions under `scheme` and simulates every budget.
pub fn run_scheme(
    households: &[TargetHousehold],
    scheme: &Scheme,
    ctx: &TargetingContext<'_>,
    budgets: &[f64],
    seed: u64,
) -> Result<TargetingReport> {
    let assignment = assign_predicted_wealth(households, scheme, ctx)?;
    let kept: Vec<usize> = (0..households.len())
        .filter(|&i| assignment.predicted[i].is_some())
        .collect();
    let truth: Vec<f64> = kept.iter().map(|&i| households[i].true_wealth).collect();
    let pred: Vec<f64> = kept.iter().map(|&i| assignment.predicted[i].expect("kept")).collect();
    let weights: Vec<f64> = kept.iter().map(|&i| households[i].weight).collect();
    let ids: Vec<String> = kept.iter().map(|&i| households[i].id.clone()).collect();
    let label = scheme.to_string();
    let outcomes = budgets
        .iter()
        .map(|&b| {
            let s = mix_seed(seed, format!("{label}/{b}").as_bytes());
            simulate_budget_targeting(&truth, &pred, &weights, &ids, b, s)
        })
        .collect::<Result<Vec<_>>>()?;
    for o in &outcomes {
        assert_eq!(o.precision, o.recall);
    }
    let units_with_truth: BTreeSet<&String> = assignment.unit.iter().collect();
    let units_with_both: BTreeSet<&String> = kept.iter().map(|&i| &assignment.unit[i]).collect();
    let r2 = match household_r2(&truth, &pred, &weights) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{label}: household R² undefined: {e}");
            None
        }
    };
    Ok(TargetingReport {
        scheme: scheme.clone(),
        n_units: assignment.n_units,
        n_units_with_estimates: assignment.n_units_with_estimates,
        n_units_with_truth: units_with_truth.len(),
        n_units_with_both: units_with_both.len(),
        n_households: kept.len(),
        r2,
        outcomes,
    })
}

pub const TABLE_COLUMNS: [&str; 11] = [
    "n_units",
    "n_units_with_estimates",
    "pct_units_with_estimates",
    "n_units_with_truth",
    "n_units_with_estimates_and_truth",
    "n_households",
    "r2",
    "accuracy_25",
    "accuracy_50",
    "precision_recall_25",
    "precision_recall_50",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Rows of the 11-column table, each prefixed by the scheme label.
/// Budgets other than 25% and 50% are not part of the table.
pub fn emit_table(reports: &[TargetingReport]) -> Vec<(String, [String; 11])> {
    reports
        .iter()
        .map(|r| {
            let at = |b: f64| r.outcomes.iter().find(|o| (o.budget - b).abs() < 1e-12);
            let row = [
                r.n_units.to_string(),
                r.n_units_with_estimates.to_string(),
                format!("{:.2}", r.coverage_pct()),
                r.n_units_with_truth.to_string(),
                r.n_units_with_both.to_string(),
                r.n_households.to_string(),
                fmt_opt(r.r2),
                fmt_opt(at(0.25).map(|o| o.accuracy)),
                fmt_opt(at(0.5).map(|o| o.accuracy)),
                fmt_opt(at(0.25).map(|o| o.precision)),
                fmt_opt(at(0.5).map(|o| o.precision)),
            ];
            (r.scheme.to_string(), row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::UnitMembership;
    use crate::tilegrid::BASE_ZOOM;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("h{i:02}")).collect()
    }

    #[test]
    fn oracle_predictions_are_perfect() {
        let w = [1.0, 2.0, 1.5, 0.5, 1.0, 3.0];
        let t = [5.0, 1.0, 3.0, 2.0, 8.0, 4.0];
        for b in BUDGETS {
            let o = simulate_budget_targeting(&t, &t, &w, &ids(6), b, 1).unwrap();
            assert!((o.accuracy - 1.0).abs() < 1e-12);
            assert!((o.precision - 1.0).abs() < 1e-12);
            assert_eq!(o.precision, o.recall);
        }
    }

    #[test]
    fn grouped_units_example() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let p = [0.0, 0.0, 1.0, 1.0];
        let o = simulate_budget_targeting(&t, &p, &[1.0; 4], &ids(4), 0.5, 3).unwrap();
        assert_eq!(o.accuracy, 1.0);
        assert_eq!(o.precision, 1.0);
    }

    #[test]
    fn budget_is_exact() {
        let w = [1.0, 2.0, 1.5, 0.5, 1.0, 3.0, 0.7];
        let t = [5.0, 1.0, 3.0, 2.0, 8.0, 4.0, 0.0];
        let p = [1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let total: f64 = w.iter().sum();
        for b in [0.25, 0.5, 0.33] {
            let o = simulate_budget_targeting(&t, &p, &w, &ids(7), b, 9).unwrap();
            let sel: f64 = o.selected.iter().zip(&w).map(|(s, w)| s * w).sum();
            assert!((sel - b * total).abs() < 1e-12);
            let whole: f64 = o.selected.iter().zip(&w).filter(|(s, _)| **s > 0.0).map(|(_, w)| w).sum();
            assert!(whole - b * total < 3.0 + 1e-12);
            assert_eq!(o.precision, o.recall);
        }
    }

    #[test]
    fn marginal_group_is_seeded() {
        let t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let p = vec![0.0; 20];
        let a = simulate_budget_targeting(&t, &p, &[1.0; 20], &ids(20), 0.25, 4).unwrap();
        let b = simulate_budget_targeting(&t, &p, &[1.0; 20], &ids(20), 0.25, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_budget() {
        assert!(simulate_budget_targeting(&[1.0], &[1.0], &[1.0], &ids(1), 1.0, 0).is_err());
        assert!(simulate_budget_targeting(&[1.0], &[1.0], &[1.0], &ids(1), 0.0, 0).is_err());
    }

    #[test]
    fn household_r2_cases() {
        let r = household_r2(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 1.0, 1.0], &[1.0; 4]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        let two = household_r2(&[0.0, 0.0, 5.0, 5.0], &[1.0, 1.0, 2.0, 2.0], &[1.0; 4]).unwrap();
        assert!((two - 1.0).abs() < 1e-12);
        assert!(household_r2(&[0.0, 1.0], &[1.0, 1.0], &[1.0; 2]).is_err());
    }

    fn household(i: usize, tile: TileId, wealth: f64) -> TargetHousehold {
        TargetHousehold {
            id: format!("h{i}"),
            location: tile.center(),
            true_wealth: wealth,
            weight: 1.0,
            tile,
        }
    }

    #[test]
    fn scheme_assignments() {
        let t0 = TileId::new(BASE_ZOOM, 8192, 8192).unwrap();
        let t1 = t0.offset(1, 0).unwrap();
        let t2 = t0.offset(40, 0).unwrap();
        let estimates: BTreeMap<TileId, f64> = [(t0, 0.3), (t1, 0.5), (t2, -1.0)].into_iter().collect();
        let population = PopulationTable::new([(t0, 1.0), (t1, 3.0), (t2, 10.0)]);
        let assignment = AdminAssignment::new(
            [(t0, "a"), (t1, "a"), (t2, "b")]
                .iter()
                .map(|(t, u)| UnitMembership {
                    tile: *t,
                    level: "canton".into(),
                    unit_id: u.to_string(),
                })
                .collect(),
        );
        let survey = [SurveyCluster {
            centroid: t0.center(),
            mean_wealth: 2.0,
            n_households: 4,
        }];
        let ctx = TargetingContext {
            tile_estimates: &estimates,
            population: &population,
            assignment: &assignment,
            survey: &survey,
        };
        let hh = vec![household(0, t0, 1.0), household(1, t2, 0.0)];

        let tiles = assign_predicted_wealth(&hh, &Scheme::MlTiles, &ctx).unwrap();
        assert_eq!(tiles.predicted, vec![Some(0.3), Some(-1.0)]);

        let units = assign_predicted_wealth(&hh, &Scheme::MlUnits("canton".into()), &ctx).unwrap();
        assert!((units.predicted[0].unwrap() - 0.45).abs() < 1e-12);
        assert_eq!(units.n_units_with_estimates, 2);

        let excl = assign_predicted_wealth(&hh, &Scheme::SurveyUnitsExclude("canton".into()), &ctx).unwrap();
        assert_eq!(excl.predicted, vec![Some(2.0), None]);
        assert_eq!(excl.n_units_with_estimates, 1);

        let imp = assign_predicted_wealth(&hh, &Scheme::SurveyUnitsImpute("canton".into()), &ctx).unwrap();
        assert_eq!(imp.predicted, vec![Some(2.0), Some(2.0)]);

        let stray = vec![household(2, t0.offset(0, 5).unwrap(), 0.0)];
        assert!(assign_predicted_wealth(&stray, &Scheme::MlUnits("canton".into()), &ctx).is_err());
    }

    #[test]
    fn nearest_clusters() {
        let origin = LatLon::new(0.0, 0.0).unwrap();
        let deg = |km: f64| km / 111.195;
        let survey: Vec<SurveyCluster> = [(1.0, 2.0), (5.0, 9.0), (7.0, 1.0), (8.0, 3.0), (9.0, 5.0)]
            .iter()
            .map(|&(km, m)| SurveyCluster {
                centroid: LatLon::new(0.0, deg(km)).unwrap(),
                mean_wealth: m,
                n_households: 1,
            })
            .collect();
        let empty = BTreeMap::new();
        let pop = PopulationTable::default();
        let asg = AdminAssignment::default();
        let ctx = TargetingContext {
            tile_estimates: &empty,
            population: &pop,
            assignment: &asg,
            survey: &survey,
        };
        let tile = crate::tilegrid::latlon_to_tile(origin, BASE_ZOOM).unwrap();
        let hh = vec![TargetHousehold {
            id: "h".into(),
            location: origin,
            true_wealth: 0.0,
            weight: 1.0,
            tile,
        }];
        let one = assign_predicted_wealth(&hh, &Scheme::KnnClusters(1), &ctx).unwrap();
        assert_eq!(one.predicted[0], Some(2.0));
        let five = assign_predicted_wealth(&hh, &Scheme::KnnClusters(5), &ctx).unwrap();
        assert!((five.predicted[0].unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn knn_mean_of_five() {
        let origin = LatLon::new(0.0, 0.0).unwrap();
        let survey: Vec<SurveyCluster> = (1..=5)
            .map(|m| SurveyCluster {
                centroid: LatLon::new(0.0, m as f64 * 0.01).unwrap(),
                mean_wealth: m as f64,
                n_households: 1,
            })
            .collect();
        let empty = BTreeMap::new();
        let pop = PopulationTable::default();
        let asg = AdminAssignment::default();
        let ctx = TargetingContext {
            tile_estimates: &empty,
            population: &pop,
            assignment: &asg,
            survey: &survey,
        };
        let hh = vec![TargetHousehold {
            id: "h".into(),
            location: origin,
            true_wealth: 0.0,
            weight: 1.0,
            tile: crate::tilegrid::latlon_to_tile(origin, BASE_ZOOM).unwrap(),
        }];
        let five = assign_predicted_wealth(&hh, &Scheme::KnnClusters(5), &ctx).unwrap();
        assert_eq!(five.predicted[0], Some(3.0));
    }

    #[test]
    fn scheme_labels_roundtrip() {
        for s in ["ml_tiles", "ml_units:canton", "survey_units_exclude:ward", "survey_units_impute:lga", "knn_clusters:5"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
        assert!("knn_clusters:0".parse::<Scheme>().is_err());
        assert!("ml_units".parse::<Scheme>().is_err());
    }

    #[test]
    fn table_has_eleven_columns() {
        let report = TargetingReport {
            scheme: Scheme::MlTiles,
            n_units: 10,
            n_units_with_estimates: 10,
            n_units_with_truth: 4,
            n_units_with_both: 4,
            n_households: 40,
            r2: Some(0.5),
            outcomes: Vec::new(),
        };
        let rows = emit_table(&[report]);
        assert_eq!(rows[0].1.len(), TABLE_COLUMNS.len());
        assert_eq!(rows[0].1[2], "100.00");
    }
}
