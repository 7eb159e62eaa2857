// Models where the wealth map is likely to be wrong: a linear regression
// of out-of-fold absolute residuals on tile and country predictors.

use wealthmap::evaluation::out_of_fold_predictions;
use wealthmap::gbdt::GbdtParams;
use wealthmap::pipeline::dataset;
use wealthmap::synth::{synth_world, SynthConfig};
use wealthmap::tilegrid::{latlon_to_tile, BASE_ZOOM};
use wealthmap::uncertainty::{
    build_error_predictors, country_error_summary, fit_least_squares, predict_error, ErrorContext, PredictorSpec,
};

pub fn run_example() -> wealthmap::Result<()> {
    let world = synth_world(&SynthConfig {
        countries: 4,
        tiles_per_country: 225,
        clusters_per_country: 50,
        spatial_noise: 0.4,
        seed: 13,
        ..Default::default()
    })?;
    let data = dataset(&world.features, &world.population, &world.clusters, &world.households)?;
    let params = GbdtParams {
        max_depth: 3,
        n_trees: 50,
        ..Default::default()
    };
    let oof = out_of_fold_predictions(&data, 5, 13, &params)?;

    let ctx = ErrorContext {
        features: &world.features,
        population: &world.population,
        clusters: &world.clusters,
        attributes: &world.attributes,
        stats: &world.country_stats,
    };
    let mut tiles = Vec::new();
    let mut target = Vec::new();
    let mut squared = Vec::new();
    for i in 0..data.len() {
        let residual = data.y[i] - oof[i];
        squared.push((data.countries[i], residual * residual));
        // Jittered centroids can land outside the mapped area.
        let tile = latlon_to_tile(data.centroids[i], BASE_ZOOM)?;
        if world.features.row_of(&tile).is_some() {
            tiles.push(tile);
            target.push(residual.abs());
        }
    }
    let design = build_error_predictors(&ctx, &tiles, PredictorSpec::Base)?;
    let fitted = fit_least_squares(&target, &design.values, None, &design.names)?;
    println!("error model on {} clusters, R² {:.3}, rank {}", fitted.n, fitted.r2, fitted.rank);
    for (name, (b, se)) in fitted.names.iter().zip(fitted.beta.iter().zip(&fitted.se)).take(5) {
        println!("  {name:<20} {b:>9.4} ({se:.4})");
    }

    let all_tiles = world.features.tiles().to_vec();
    let predictors = build_error_predictors(&ctx, &all_tiles, PredictorSpec::Base)?;
    let predicted = predict_error(&fitted, &predictors.values)?;
    let by_tile: Vec<_> = predictors.countries.iter().copied().zip(predicted).collect();
    for s in country_error_summary(&by_tile, &squared) {
        let mse = s.mse.map_or(f64::NAN, |m| m.mean);
        println!("  {} median predicted error {:.3}, held-out MSE {mse:.3}", s.country, s.predicted.median);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("error model example");
}
