//! Tile-level prediction, privacy aggregation up the quadtree and
//! population-weighted aggregation to administrative units.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::evaluation::r_squared;
use crate::gbdt::WealthModel;
use crate::ingest::{FeatureTable, PopulationTable};
use crate::tilegrid::{TileId, BASE_ZOOM};

/// Population at or below which a tile is pooled with its relatives.
pub const PRIVACY_THRESHOLD: f64 = 50.0;
/// Coarsest level a pooled estimate may climb to before being masked.
pub const AGGREGATION_CAP_ZOOM: u8 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TileEstimate {
    pub tile: TileId,
    pub country: CountryCode,
    pub rwi: f64,
    pub population: f64,
    /// Zoom of the tile whose pooled estimate this cell carries.
    pub aggregation_level: u8,
    pub masked: bool,
}

/// One estimate per feature row. Features are normalized with the model's
/// statistics when the table is raw and the model carries them.
pub fn predict_tiles(
    model: &WealthModel,
    features: &FeatureTable,
    population: &PopulationTable,
) -> Result<Vec<TileEstimate>> {
    let normalized;
    let table = match (features.norm_stats(), &model.norm_stats) {
        (None, Some(stats)) => {
            normalized = stats.apply(features)?;
            &normalized
        }
        _ => features,
    };
    if table.is_empty() {
        return Ok(Vec::new());
    }
    let predictions = model.predict(table.values())?;
    Ok(table
        .tiles()
        .iter()
        .zip(table.countries())
        .zip(predictions)
        .map(|((&tile, &country), rwi)| TileEstimate {
            tile,
            country,
            rwi,
            population: population.get(&tile),
            aggregation_level: BASE_ZOOM,
            masked: false,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyPolicy {
    pub threshold: f64,
    pub cap_zoom: u8,
}

impl Default for PrivacyPolicy {
    fn default() -> Self {
        PrivacyPolicy {
            threshold: PRIVACY_THRESHOLD,
            cap_zoom: AGGREGATION_CAP_ZOOM,
        }
    }
}

fn pooled_mean(estimates: &[TileEstimate], members: &[usize], rwi: &[f64]) -> (f64, f64) {
    let pop: f64 = members.iter().map(|&i| estimates[i].population).sum();
    let mean = if pop > 0.0 {
        members.iter().map(|&i| estimates[i].population * rwi[i]).sum::<f64>() / pop
    } else {
        members.iter().map(|&i| rwi[i]).sum::<f64>() / members.len() as f64
    };
    (pop, mean)
}

/// Pools every tile with population at or below the threshold into the
/// smallest Bing ancestor whose estimated descendants hold more people
/// than the threshold. Tiles still unresolved at the cap are masked.
///
/// Output order matches input order.
pub fn privacy_aggregate(estimates: &[TileEstimate], policy: PrivacyPolicy) -> Result<Vec<TileEstimate>> {
    if policy.cap_zoom == 0 || policy.cap_zoom >= BASE_ZOOM {
        return Err(Error::InvalidLevel {
            zoom: policy.cap_zoom,
            reason: "aggregation cap must lie between 1 and 13",
        });
    }
    if let Some(e) = estimates.iter().find(|e| e.tile.zoom() != BASE_ZOOM) {
        return Err(Error::invalid(format!("estimate for {} is not at zoom {BASE_ZOOM}", e.tile)));
    }
    if let Some(e) = estimates.iter().find(|e| !(e.population >= 0.0) || !e.rwi.is_finite()) {
        return Err(Error::invalid(format!("estimate for {} has invalid rwi or population", e.tile)));
    }

    let mut out = estimates.to_vec();
    let mut rwi: Vec<f64> = estimates.iter().map(|e| e.rwi).collect();
    let mut pending: BTreeSet<usize> = (0..estimates.len())
        .filter(|&i| estimates[i].population <= policy.threshold)
        .collect();

    for zoom in (policy.cap_zoom..BASE_ZOOM).rev() {
        if pending.is_empty() {
            break;
        }
        let mut groups: HashMap<TileId, Vec<usize>> = HashMap::new();
        for (i, e) in estimates.iter().enumerate() {
            groups.entry(ancestor(e.tile, zoom)).or_default().push(i);
        }
        let targets: BTreeSet<TileId> = pending.iter().map(|&i| ancestor(estimates[i].tile, zoom)).collect();
        let pooled: Vec<(&Vec<usize>, f64)> = targets
            .par_iter()
            .filter_map(|parent| {
                let members = &groups[parent];
                let (pop, mean) = pooled_mean(estimates, members, &rwi);
                (pop > policy.threshold).then_some((members, mean))
            })
            .collect();
        for (members, mean) in pooled {
            for &i in members {
                rwi[i] = mean;
                out[i].aggregation_level = zoom;
                pending.remove(&i);
            }
        }
    }

    if !pending.is_empty() {
        let mut groups: BTreeMap<TileId, Vec<usize>> = BTreeMap::new();
        for (i, e) in estimates.iter().enumerate() {
            groups.entry(ancestor(e.tile, policy.cap_zoom)).or_default().push(i);
        }
        let capped: BTreeSet<TileId> = pending
            .iter()
            .map(|&i| ancestor(estimates[i].tile, policy.cap_zoom))
            .collect();
        for parent in capped {
            let members = &groups[&parent];
            let (_, mean) = pooled_mean(estimates, members, &rwi);
            for &i in members {
                rwi[i] = mean;
                out[i].aggregation_level = policy.cap_zoom;
                out[i].masked = true;
            }
        }
        log::warn!("{} tiles masked at zoom {}", pending.len(), policy.cap_zoom);
    }
    for (e, v) in out.iter_mut().zip(rwi) {
        e.rwi = v;
    }
    Ok(out)
}

fn ancestor(tile: TileId, zoom: u8) -> TileId {
    tile.ancestor(zoom).expect("ancestor zoom checked against base zoom")
}

/// Population of the estimated zoom-14 tiles under each estimate's
/// aggregation tile.
pub fn covering_population(estimates: &[TileEstimate]) -> Vec<f64> {
    let mut totals: HashMap<TileId, f64> = HashMap::new();
    for e in estimates {
        for zoom in AGGREGATION_CAP_ZOOM.min(e.aggregation_level)..=BASE_ZOOM {
            *totals.entry(ancestor(e.tile, zoom)).or_default() += e.population;
        }
    }
    estimates
        .iter()
        .map(|e| totals[&ancestor(e.tile, e.aggregation_level)])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UnitMembership {
    pub tile: TileId,
    pub level: String,
    pub unit_id: String,
}

/// Tile to administrative-unit lookup, one unit per tile and level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdminAssignment {
    by_level: BTreeMap<String, BTreeMap<TileId, String>>,
}

impl AdminAssignment {
    pub fn new(rows: Vec<UnitMembership>) -> Self {
        let mut by_level: BTreeMap<String, BTreeMap<TileId, String>> = BTreeMap::new();
        for r in rows {
            by_level.entry(r.level).or_default().insert(r.tile, r.unit_id);
        }
        AdminAssignment { by_level }
    }

    pub fn levels(&self) -> impl Iterator<Item = &str> {
        self.by_level.keys().map(String::as_str)
    }

    pub fn unit_of(&self, tile: &TileId, level: &str) -> Option<&str> {
        self.by_level.get(level)?.get(tile).map(String::as_str)
    }

    /// Member tiles of every unit at a level, in tile order.
    pub fn units(&self, level: &str) -> BTreeMap<String, Vec<TileId>> {
        let mut out: BTreeMap<String, Vec<TileId>> = BTreeMap::new();
        if let Some(tiles) = self.by_level.get(level) {
            for (tile, unit) in tiles {
                out.entry(unit.clone()).or_default().push(*tile);
            }
        }
        out
    }

    pub fn memberships(&self) -> impl Iterator<Item = UnitMembership> + '_ {
        self.by_level.iter().flat_map(|(level, tiles)| {
            tiles.iter().map(move |(tile, unit)| UnitMembership {
                tile: *tile,
                level: level.clone(),
                unit_id: unit.clone(),
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdminAggregate {
    pub level: String,
    pub unit_id: String,
    /// Country holding most of the unit's population.
    pub country: CountryCode,
    pub mean_value: f64,
    pub population: f64,
    pub n_tiles: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitAggregation {
    pub units: Vec<AdminAggregate>,
    /// Units left out because none of their estimated tiles is populated.
    pub excluded: Vec<(String, String)>,
}

/// A value to aggregate for one tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileValue {
    pub country: CountryCode,
    pub value: f64,
    pub population: f64,
}

/// Population-weighted mean per unit over assigned tiles that carry a
/// value. Summation runs in tile order, so the input order is irrelevant.
pub fn aggregate_values(values: &BTreeMap<TileId, TileValue>, assignment: &AdminAssignment) -> UnitAggregation {
    let mut out = UnitAggregation::default();
    for level in assignment.levels() {
        let units = assignment.units(level);
        let results: Vec<(String, Option<AdminAggregate>)> = units
            .into_par_iter()
            .map(|(unit, tiles)| {
                let present: Vec<&TileValue> = tiles.iter().filter_map(|t| values.get(t)).collect();
                let pop: f64 = present.iter().map(|v| v.population).sum();
                if !(pop > 0.0) {
                    return (unit, None);
                }
                let mean = present.iter().map(|v| v.population * v.value).sum::<f64>() / pop;
                let mut by_country: BTreeMap<CountryCode, f64> = BTreeMap::new();
                for v in &present {
                    *by_country.entry(v.country).or_default() += v.population;
                }
                let country = by_country
                    .iter()
                    .fold(None::<(CountryCode, f64)>, |best, (&c, &p)| match best {
                        Some((_, bp)) if bp >= p => best,
                        _ => Some((c, p)),
                    })
                    .map(|(c, _)| c)
                    .expect("unit has population");
                let agg = AdminAggregate {
                    level: level.to_string(),
                    unit_id: unit.clone(),
                    country,
                    mean_value: mean,
                    population: pop,
                    n_tiles: present.iter().filter(|v| v.population > 0.0).count(),
                };
                (unit, Some(agg))
            })
            .collect();
        for (unit, agg) in results {
            match agg {
                Some(a) => out.units.push(a),
                None => out.excluded.push((level.to_string(), unit)),
            }
        }
    }
    if !out.excluded.is_empty() {
        log::warn!("{} units have no populated estimated tile", out.excluded.len());
    }
    out
}

pub fn aggregate_to_units(estimates: &[TileEstimate], assignment: &AdminAssignment) -> UnitAggregation {
    let values = estimates
        .iter()
        .map(|e| {
            (
                e.tile,
                TileValue {
                    country: e.country,
                    value: e.rwi,
                    population: e.population,
                },
            )
        })
        .collect();
    aggregate_values(&values, assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub level: String,
    pub unit_id: String,
    pub country: CountryCode,
    pub predicted: f64,
    pub truth: f64,
    pub population: f64,
}

#[derive(Debug)]
pub struct UnitValidation {
    pub pooled_r2: f64,
    pub per_country: BTreeMap<CountryCode, Result<f64>>,
    pub scatter: Vec<ScatterPoint>,
}

/// Population-weighted R² between unit aggregates and ground-truth unit
/// means keyed by (level, unit id).
pub fn validate_units(
    aggregates: &[AdminAggregate],
    truth: &BTreeMap<(String, String), f64>,
) -> Result<UnitValidation> {
    let scatter: Vec<ScatterPoint> = aggregates
        .iter()
        .filter_map(|a| {
            truth.get(&(a.level.clone(), a.unit_id.clone())).map(|&t| ScatterPoint {
                level: a.level.clone(),
                unit_id: a.unit_id.clone(),
                country: a.country,
                predicted: a.mean_value,
                truth: t,
                population: a.population,
            })
        })
        .collect();
    if scatter.len() < 2 {
        return Err(Error::TooFewRows {
            context: "unit validation".into(),
            needed: 2,
            got: scatter.len(),
        });
    }
    let r2 = |points: &[&ScatterPoint]| {
        let t: Vec<f64> = points.iter().map(|p| p.truth).collect();
        let p: Vec<f64> = points.iter().map(|p| p.predicted).collect();
        let w: Vec<f64> = points.iter().map(|p| p.population).collect();
        r_squared(&t, &p, Some(&w))
    };
    let all: Vec<&ScatterPoint> = scatter.iter().collect();
    let pooled_r2 = r2(&all)?;
    let mut groups: BTreeMap<CountryCode, Vec<&ScatterPoint>> = BTreeMap::new();
    for p in &scatter {
        groups.entry(p.country).or_default().push(p);
    }
    let per_country = groups.into_iter().map(|(c, pts)| (c, r2(&pts))).collect();
    Ok(UnitValidation {
        pooled_r2,
        per_country,
        scatter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc() -> CountryCode {
        CountryCode::new("TG").unwrap()
    }

    fn est(tile: TileId, rwi: f64, population: f64) -> TileEstimate {
        TileEstimate {
            tile,
            country: cc(),
            rwi,
            population,
            aggregation_level: BASE_ZOOM,
            masked: false,
        }
    }

    fn base() -> TileId {
        TileId::new(BASE_ZOOM, 8192, 8192).unwrap()
    }

    #[test]
    fn populated_tile_is_unchanged() {
        let out = privacy_aggregate(&[est(base(), 0.7, 60.0)], PrivacyPolicy::default()).unwrap();
        assert_eq!(out[0], est(base(), 0.7, 60.0));
    }

    #[test]
    fn siblings_pool_at_parent() {
        let kids = base().parent().unwrap().children().unwrap();
        let input: Vec<_> = kids
            .iter()
            .zip([(1.0, 30.0), (-1.0, 30.0), (0.0, 0.0), (0.0, 0.0)])
            .map(|(&t, (r, p))| est(t, r, p))
            .collect();
        let out = privacy_aggregate(&input, PrivacyPolicy::default()).unwrap();
        for e in &out {
            assert_eq!(e.rwi, 0.0);
            assert_eq!(e.aggregation_level, 13);
            assert!(!e.masked);
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let kids = base().parent().unwrap().children().unwrap();
        let out = privacy_aggregate(
            &[est(kids[0], 1.0, 51.0), est(kids[2], 5.0, 51.0)],
            PrivacyPolicy::default(),
        )
        .unwrap();
        assert!(out.iter().all(|e| e.aggregation_level == 14));
        let out = privacy_aggregate(
            &[est(kids[0], 1.0, 51.0), est(kids[1], 3.0, 50.0)],
            PrivacyPolicy::default(),
        )
        .unwrap();
        // The parent pools every estimated child, populated ones included.
        for e in &out {
            assert_eq!(e.aggregation_level, 13);
            assert!((e.rwi - (51.0 + 150.0) / 101.0).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_tile_is_masked_at_cap() {
        let out = privacy_aggregate(&[est(base(), 0.4, 10.0)], PrivacyPolicy::default()).unwrap();
        assert!(out[0].masked);
        assert_eq!(out[0].aggregation_level, AGGREGATION_CAP_ZOOM);
        assert_eq!(out[0].rwi, 0.4);
    }

    #[test]
    fn rejects_bad_cap_and_zoom() {
        let policy = PrivacyPolicy {
            cap_zoom: 14,
            ..Default::default()
        };
        assert!(privacy_aggregate(&[], policy).is_err());
        let coarse = est(base().parent().unwrap(), 0.0, 100.0);
        assert!(privacy_aggregate(&[coarse], PrivacyPolicy::default()).is_err());
    }

    fn assignment(rows: &[(TileId, &str, &str)]) -> AdminAssignment {
        AdminAssignment::new(
            rows.iter()
                .map(|(t, l, u)| UnitMembership {
                    tile: *t,
                    level: l.to_string(),
                    unit_id: u.to_string(),
                })
                .collect(),
        )
    }

    #[test]
    fn unit_means() {
        let a = base();
        let b = a.offset(1, 0).unwrap();
        let c = a.offset(2, 0).unwrap();
        let asg = assignment(&[(a, "canton", "u1"), (b, "canton", "u1"), (c, "canton", "u2")]);
        let agg = aggregate_to_units(&[est(a, 0.0, 1.0), est(b, 1.0, 3.0), est(c, 5.0, 0.0)], &asg);
        assert_eq!(agg.units.len(), 1);
        assert!((agg.units[0].mean_value - 0.75).abs() < 1e-15);
        assert_eq!(agg.units[0].n_tiles, 2);
        assert_eq!(agg.excluded, vec![("canton".to_string(), "u2".to_string())]);

        let single = aggregate_to_units(&[est(c, 5.0, 2.0)], &asg);
        assert_eq!(single.units[0].mean_value, 5.0);
    }

    #[test]
    fn validation_cases() {
        let aggs: Vec<AdminAggregate> = [0.0, 0.0, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| AdminAggregate {
                level: "l".into(),
                unit_id: format!("u{i}"),
                country: cc(),
                mean_value: v,
                population: 1.0,
                n_tiles: 1,
            })
            .collect();
        let truth = |f: &dyn Fn(usize) -> f64| -> BTreeMap<(String, String), f64> {
            (0..4).map(|i| (("l".to_string(), format!("u{i}")), f(i))).collect()
        };
        let v = validate_units(&aggs, &truth(&|i| i as f64)).unwrap();
        assert!((v.pooled_r2 - 0.8).abs() < 1e-12);
        assert_eq!(v.scatter.len(), 4);
        let exact = validate_units(&aggs, &truth(&|i| 3.0 * aggs[i].mean_value - 2.0)).unwrap();
        assert!((exact.pooled_r2 - 1.0).abs() < 1e-12);
        assert!(validate_units(&aggs[..1], &truth(&|i| i as f64)).is_err());
    }
}
