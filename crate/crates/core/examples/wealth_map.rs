// Tile predictions, privacy pooling and validation against unit truth.

use wealthmap::gbdt::{train, GbdtParams};
use wealthmap::mapping::{aggregate_to_units, predict_tiles, privacy_aggregate, validate_units, PrivacyPolicy};
use wealthmap::pipeline::training_set;
use wealthmap::synth::{synth_world, SynthConfig};
use wealthmap::evaluation::Dataset;
use wealthmap::labels::LabelMode;

pub fn run_example() -> wealthmap::Result<()> {
    let world = synth_world(&SynthConfig {
        countries: 2,
        tiles_per_country: 400,
        clusters_per_country: 80,
        seed: 21,
        ..Default::default()
    })?;
    let set = training_set(&world.features, &world.population, &world.clusters, &world.households, LabelMode::Unweighted)?;
    let data = Dataset::from_training_set(&set)?;
    let model = train(&data.x, &data.y, None, &GbdtParams::default())?;

    let normalized = world.features.normalize_per_country();
    let estimates = predict_tiles(&model, &normalized, &world.population)?;
    let populated: Vec<_> = estimates.into_iter().filter(|e| e.population > 0.0).collect();
    let published = privacy_aggregate(&populated, PrivacyPolicy::default())?;
    let pooled = published.iter().filter(|e| e.aggregation_level < 14).count();
    let masked = published.iter().filter(|e| e.masked).count();
    println!("{} populated tiles, {pooled} pooled, {masked} masked", published.len());

    let units = aggregate_to_units(&published, &world.assignment);
    let check = validate_units(&units.units, &world.unit_truth)?;
    println!("pooled unit R² {:.3}", check.pooled_r2);
    for (country, r2) in &check.per_country {
        match r2 {
            Ok(v) => println!("  {country} {v:.3}"),
            Err(e) => println!("  {country} undefined: {e}"),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("wealth map example");
}
