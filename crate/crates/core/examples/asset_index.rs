// Household asset index and cluster labels.

use wealthmap::evaluation::spearman;
use wealthmap::labels::{cluster_labels, household_index_by_country, LabelMode};
use wealthmap::synth::{synth_world, SynthConfig};

pub fn run_example() -> wealthmap::Result<()> {
    let world = synth_world(&SynthConfig {
        countries: 1,
        tiles_per_country: 100,
        clusters_per_country: 25,
        households_per_cluster: 8,
        target_households_per_country: 4,
        household_noise: 0.8,
        seed: 3,
        ..Default::default()
    })?;

    let scores = household_index_by_country(&world.households)?;
    assert_eq!(scores.len(), world.households.len());

    // The index is oriented to rise with electricity access.
    let electricity: Vec<f64> = world.households.iter().map(|h| h.assets[0]).collect();
    let index: Vec<f64> = world.households.iter().map(|h| scores[&h.id]).collect();
    let rho = spearman(&electricity, &index)?;
    println!("rank correlation of index with electricity {rho:.3}");
    assert!(rho > 0.0);

    let plain = cluster_labels(&world.clusters, &world.households, &scores, LabelMode::Unweighted);
    let weighted = cluster_labels(&world.clusters, &world.households, &scores, LabelMode::Weighted);
    println!("{} clusters labelled", plain.labels.len());
    for id in plain.labels.keys().take(3) {
        println!(
            "  {id}: unweighted {:.3}, weighted {:.3}",
            plain.labels[id].rwi, weighted.labels[id].rwi
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("asset index example");
}
