// Fits a boosted-tree model, inspects its importances and round-trips it
// through the text format.

use wealthmap::gbdt::{train_with_history, GbdtParams, WealthModel};
use wealthmap::pipeline::dataset;
use wealthmap::synth::{synth_world, SynthConfig};

pub fn run_example() -> wealthmap::Result<()> {
    let world = synth_world(&SynthConfig {
        countries: 2,
        tiles_per_country: 225,
        clusters_per_country: 40,
        seed: 5,
        ..Default::default()
    })?;
    let data = dataset(&world.features, &world.population, &world.clusters, &world.households)?;

    let params = GbdtParams {
        max_depth: 3,
        n_trees: 60,
        ..Default::default()
    };
    let (model, loss) = train_with_history(&data.x, &data.y, None, &params)?;
    println!("training MSE {:.4} -> {:.4} over {} trees", loss[0], loss[loss.len() - 1], model.trees.len());
    assert!(loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));

    let importance = model.gain_importance(data.feature_names.len());
    let mut ranked: Vec<usize> = (0..data.feature_names.len()).collect();
    ranked.sort_by(|&a, &b| importance.mean_gain[b].total_cmp(&importance.mean_gain[a]));
    for &j in ranked.iter().take(3) {
        println!(
            "  {:<16} gain {:.4} splits {}",
            data.feature_names[j], importance.mean_gain[j], importance.split_count[j]
        );
    }

    let restored = WealthModel::from_text(&model.to_text())?;
    assert_eq!(restored.predict(&data.x)?, model.predict(&data.x)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("train model example");
}
