// The three validation protocols and a small hyperparameter search.

use wealthmap::evaluation::{cross_validate, grid_search, Protocol, DEFAULT_FOLDS};
use wealthmap::gbdt::GbdtParams;
use wealthmap::pipeline::dataset;
use wealthmap::synth::{synth_world, SynthConfig};

pub fn run_example() -> wealthmap::Result<()> {
    let world = synth_world(&SynthConfig {
        countries: 3,
        tiles_per_country: 225,
        clusters_per_country: 40,
        spatial_noise: 0.3,
        seed: 9,
        ..Default::default()
    })?;
    let data = dataset(&world.features, &world.population, &world.clusters, &world.households)?;
    let params = GbdtParams {
        max_depth: 3,
        n_trees: 40,
        ..Default::default()
    };

    for protocol in Protocol::ALL {
        let report = cross_validate(&data, protocol, DEFAULT_FOLDS, 1, &params)?;
        println!("{:<20} mean R² {:.3}", protocol.as_str(), report.mean_r2());
        for (country, r2) in &report.per_country {
            println!("  {country} {r2:.3}");
        }
    }

    let grid = [(1, 1.0), (3, 1.0), (3, 5.0)];
    let search = grid_search(&data, Protocol::BasicKfold, &grid, &params, DEFAULT_FOLDS, 1)?;
    println!(
        "best depth {} min child weight {}",
        search.best.max_depth, search.best.min_child_weight
    );
    let best = search.points.iter().map(|p| p.mse).fold(f64::INFINITY, f64::min);
    assert!((search.report.mse() - best).abs() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("cross validation example");
}
