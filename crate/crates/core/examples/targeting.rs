// Simulates budget-constrained targeting of the poorest households with
// tile estimates, unit averages and survey data.

use std::collections::BTreeMap;

use wealthmap::gbdt::{train, GbdtParams};
use wealthmap::labels::{cluster_labels, household_index_by_country, LabelMode};
use wealthmap::mapping::predict_tiles;
use wealthmap::pipeline::dataset;
use wealthmap::synth::{synth_world, SynthConfig};
use wealthmap::targeting::{
    emit_table, run_scheme, Scheme, SurveyCluster, TargetHousehold, TargetingContext, BUDGETS, TABLE_COLUMNS,
};
use wealthmap::tilegrid::{latlon_to_tile, BASE_ZOOM};

pub fn run_example() -> wealthmap::Result<()> {
    let world = synth_world(&SynthConfig {
        countries: 2,
        tiles_per_country: 400,
        clusters_per_country: 60,
        target_households_per_country: 300,
        seed: 17,
        ..Default::default()
    })?;
    let data = dataset(&world.features, &world.population, &world.clusters, &world.households)?;
    let model = train(&data.x, &data.y, None, &GbdtParams::default())?;
    let estimates: BTreeMap<_, _> = predict_tiles(&model, &world.features.normalize_per_country(), &world.population)?
        .into_iter()
        .map(|e| (e.tile, e.rwi))
        .collect();

    let scores = household_index_by_country(&world.households)?;
    let labels = cluster_labels(&world.clusters, &world.households, &scores, LabelMode::Unweighted);
    let survey: Vec<SurveyCluster> = world
        .clusters
        .iter()
        .filter_map(|c| {
            labels.labels.get(&c.cluster_id).map(|l| SurveyCluster {
                centroid: c.centroid,
                mean_wealth: l.rwi,
                n_households: l.n_households,
            })
        })
        .collect();

    let truth = household_index_by_country(&world.target_households)?;
    let households = world
        .target_households
        .iter()
        .map(|h| {
            let location = h.location.expect("target households are geolocated");
            Ok(TargetHousehold {
                id: h.id.clone(),
                location,
                true_wealth: truth[&h.id],
                weight: h.weight,
                tile: latlon_to_tile(location, BASE_ZOOM)?,
            })
        })
        .collect::<wealthmap::Result<Vec<_>>>()?;

    let ctx = TargetingContext {
        tile_estimates: &estimates,
        population: &world.population,
        assignment: &world.assignment,
        survey: &survey,
    };
    let schemes = [
        Scheme::MlTiles,
        Scheme::MlUnits("district".into()),
        Scheme::SurveyUnitsExclude("district".into()),
        Scheme::SurveyUnitsImpute("district".into()),
        Scheme::KnnClusters(5),
    ];
    let reports = schemes
        .iter()
        .map(|s| run_scheme(&households, s, &ctx, &BUDGETS, 17))
        .collect::<wealthmap::Result<Vec<_>>>()?;

    println!("{:<30} {:>6} {:>8} {:>8} {:>8}", "scheme", "r2", "acc_25", "acc_50", "prec_25");
    for r in &reports {
        let r2 = r.r2.unwrap_or(f64::NAN);
        let (a, b) = (&r.outcomes[0], &r.outcomes[1]);
        println!("{:<30} {r2:>6.3} {:>8.3} {:>8.3} {:>8.3}", r.scheme.to_string(), a.accuracy, b.accuracy, a.precision);
    }
    assert_eq!(emit_table(&reports).len(), schemes.len());
    assert_eq!(TABLE_COLUMNS.len(), 11);
    for r in &reports {
        for o in &r.outcomes {
            assert!((o.precision - o.recall).abs() < 1e-12);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("targeting example");
}
