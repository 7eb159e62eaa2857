use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use wealthmap::awe::{rwi_to_awe, AweMode, CountryStats};
use wealthmap::evaluation::r_squared;
use wealthmap::gbdt::{train, GbdtParams, WealthModel};
use wealthmap::mapping::{
    aggregate_to_units, privacy_aggregate, AdminAssignment, PrivacyPolicy, TileEstimate, UnitMembership,
};
use wealthmap::targeting::simulate_budget_targeting;
use wealthmap::tilegrid::{latlon_to_tile, BASE_ZOOM, MAX_LATITUDE, MAX_ZOOM};
use wealthmap::uncertainty::fit_least_squares;
use wealthmap::{CountryCode, LatLon, Matrix, TileId};

fn country() -> CountryCode {
    "KE".parse().unwrap()
}

fn tile_strategy() -> impl Strategy<Value = TileId> {
    (1..=MAX_ZOOM).prop_flat_map(|z| {
        let side = 1u32 << z;
        (0..side, 0..side).prop_map(move |(x, y)| TileId::new(z, x, y).unwrap())
    })
}

// Estimates inside one zoom-11 block (8 x 8 base tiles) plus a few strays.
fn field_strategy() -> impl Strategy<Value = Vec<TileEstimate>> {
    let cell = (0..8u32, 0..8u32, prop_oneof![Just(0.0), 0.0..60.0f64, 0.0..400.0f64], -3.0..3.0f64);
    (0..2000u32, 0..2000u32, prop::collection::vec(cell, 1..30), prop::collection::vec(any::<u16>(), 0..3)).prop_map(
        |(bx, by, cells, strays)| {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            let base = |x: u32, y: u32| TileId::new(BASE_ZOOM, x, y).unwrap();
            let mut push = |tile: TileId, population: f64, rwi: f64| {
                if seen.insert(tile) {
                    out.push(TileEstimate {
                        tile,
                        country: country(),
                        rwi,
                        population,
                        aggregation_level: BASE_ZOOM,
                        masked: false,
                    });
                }
            };
            for (dx, dy, population, rwi) in cells {
                push(base(bx * 8 + dx, by * 8 + dy), population, rwi);
            }
            for s in strays {
                let s = s as u32 % 16_384;
                push(base(s, (s * 7) % 16_384), 10.0, 1.0);
            }
            out
        },
    )
}

proptest! {
    #[test]
    fn quadkey_round_trips(tile in tile_strategy()) {
        let key = tile.quadkey();
        prop_assert_eq!(key.len(), tile.zoom() as usize);
        prop_assert_eq!(TileId::from_quadkey(&key).unwrap(), tile);
        if tile.zoom() > 1 {
            let parent = tile.parent().unwrap();
            prop_assert_eq!(parent.quadkey(), &key[..key.len() - 1]);
            prop_assert!(parent.children().unwrap().contains(&tile));
        }
    }

    #[test]
    fn points_fall_inside_their_tile(
        lat in -MAX_LATITUDE..MAX_LATITUDE,
        lon in -180.0..180.0f64,
        zoom in 1..=MAX_ZOOM,
    ) {
        let p = LatLon::new(lat, lon).unwrap();
        let tile = latlon_to_tile(p, zoom).unwrap();
        prop_assert!(tile.bounds().contains(p));
        prop_assert_eq!(tile.ancestor(1).unwrap(), latlon_to_tile(p, 1).unwrap());
    }

    #[test]
    fn privacy_invariants(field in field_strategy()) {
        let policy = PrivacyPolicy::default();
        let out = privacy_aggregate(&field, policy).unwrap();
        prop_assert_eq!(out.len(), field.len());

        for (before, after) in field.iter().zip(&out) {
            prop_assert_eq!(before.tile, after.tile);
            prop_assert_eq!(before.population, after.population);
            let cell = after.tile.ancestor(after.aggregation_level).unwrap();
            let under: Vec<usize> = (0..field.len())
                .filter(|&j| field[j].tile.ancestor(after.aggregation_level).unwrap() == cell)
                .collect();
            let covering: f64 = under.iter().map(|&j| field[j].population).sum();
            if after.masked {
                prop_assert_eq!(after.aggregation_level, policy.cap_zoom);
            } else {
                prop_assert!(covering > policy.threshold);
            }
            if after.aggregation_level < BASE_ZOOM {
                // Every estimate under a pooled cell reports the same value.
                for &j in &under {
                    prop_assert!(out[j].aggregation_level <= after.aggregation_level);
                    if out[j].aggregation_level == after.aggregation_level {
                        prop_assert_eq!(out[j].rwi, after.rwi);
                    }
                }
            }
        }

        let pop: f64 = field.iter().map(|e| e.population).sum();
        let weighted = |es: &[TileEstimate]| es.iter().map(|e| e.population * e.rwi).sum::<f64>();
        let scale = field.iter().map(|e| e.population * e.rwi.abs()).sum::<f64>().max(1.0);
        prop_assert!((weighted(&field) - weighted(&out)).abs() <= 1e-9 * scale, "pop {}", pop);
    }

    #[test]
    fn unit_means_ignore_tile_order(field in field_strategy(), rotate in 0usize..30) {
        let memberships: Vec<UnitMembership> = field
            .iter()
            .map(|e| UnitMembership {
                tile: e.tile,
                level: "district".into(),
                unit_id: format!("d{}", e.tile.x() % 3),
            })
            .collect();
        let assignment = AdminAssignment::new(memberships);
        let mut shuffled = field.clone();
        let k = rotate % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(aggregate_to_units(&field, &assignment), aggregate_to_units(&shuffled, &assignment));
    }

    #[test]
    fn targeting_budget_is_exact(
        rows in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0.1..4.0f64), 1..80),
        budget in 0.01..0.99f64,
        seed in any::<u64>(),
    ) {
        let truth: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let predicted: Vec<f64> = rows.iter().map(|r| (r.1 * 2.0).round()).collect();
        let weights: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let ids: Vec<String> = (0..rows.len()).map(|i| format!("{i:03}")).collect();
        let out = simulate_budget_targeting(&truth, &predicted, &weights, &ids, budget, seed).unwrap();
        prop_assert_eq!(out.precision, out.recall);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&out.precision));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&out.accuracy));
        let total: f64 = weights.iter().sum();
        for shares in [&out.selected, &out.true_poor] {
            prop_assert!(shares.iter().all(|s| (0.0..=1.0).contains(s)));
            let mass: f64 = shares.iter().zip(&weights).map(|(s, w)| s * w).sum();
            prop_assert!((mass - budget * total).abs() <= 1e-9 * total);
            // At most one household is split.
            prop_assert!(shares.iter().filter(|s| **s > 0.0 && **s < 1.0).count() <= 1);
        }
        let again = simulate_budget_targeting(&truth, &predicted, &weights, &ids, budget, seed).unwrap();
        prop_assert_eq!(out, again);
    }

    #[test]
    fn least_squares_residuals_are_orthogonal(
        rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 4), 12..60),
        beta in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        let x = Matrix::from_rows(3, rows.iter().map(|r| &r[..3])).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + r[..3].iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + r[3]).collect();
        let names: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let fit = fit_least_squares(&y, &x, None, &names).unwrap();
        let resid: Vec<f64> = (0..y.len()).map(|i| y[i] - fit.predict_row(x.row(i))).collect();
        let rn = resid.iter().map(|r| r * r).sum::<f64>().sqrt().max(1e-12);
        let intercept_dot = resid.iter().sum::<f64>().abs() / (rn * (y.len() as f64).sqrt());
        prop_assert!(intercept_dot <= 1e-6);
        for j in 0..3 {
            let col = x.column(j);
            let cn = col.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
            let dot: f64 = resid.iter().zip(&col).map(|(r, c)| r * c).sum();
            prop_assert!(dot.abs() / (rn * cn) <= 1e-6, "column {}: {}", j, dot / (rn * cn));
        }
    }

    #[test]
    fn absolute_wealth_keeps_order_and_mean(
        rwi in prop::collection::vec(-4.0..4.0f64, 1..200),
        gdp in 100.0..60_000.0f64,
        gini in 0.05..0.95f64,
    ) {
        let tiles: Vec<(TileId, CountryCode, f64)> = rwi
            .iter()
            .enumerate()
            .map(|(i, &v)| (TileId::new(BASE_ZOOM, i as u32, 0).unwrap(), country(), v))
            .collect();
        let stats = BTreeMap::from([(country(), CountryStats::new(country(), gdp, gini).unwrap())]);
        let awe = rwi_to_awe(&tiles, &stats, AweMode::IcdfOfRank).unwrap();
        for a in &awe {
            for b in &awe {
                if a.rwi < b.rwi {
                    prop_assert!(a.awe_usd <= b.awe_usd);
                }
                if a.rwi == b.rwi {
                    prop_assert_eq!(a.awe_usd, b.awe_usd);
                }
            }
        }
        let mean = awe.iter().map(|e| e.awe_usd).sum::<f64>() / awe.len() as f64;
        prop_assert!((mean - gdp).abs() <= 1e-9 * gdp);
    }

    #[test]
    fn r_squared_is_affine_invariant(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..40),
        scale in prop_oneof![0.1..10.0f64, -10.0..-0.1f64],
        shift in -100.0..100.0f64,
    ) {
        let t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let p: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
        let moved: Vec<f64> = p.iter().map(|v| scale * v + shift).collect();
        match (r_squared(&t, &p, None), r_squared(&t, &moved, None)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!((a - b).abs() <= 1e-9);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn model_text_round_trip_is_exact(
        rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 4..40),
        depth in 1usize..4,
    ) {
        let x = Matrix::from_rows(3, &rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[0].sin() + r[1] * r[2]).collect();
        let params = GbdtParams { max_depth: depth, n_trees: 15, ..Default::default() };
        let model = train(&x, &y, None, &params).unwrap();
        let restored = WealthModel::from_text(&model.to_text()).unwrap();
        prop_assert_eq!(&restored, &model);
        prop_assert_eq!(restored.predict(&x).unwrap(), model.predict(&x).unwrap());
    }
}
