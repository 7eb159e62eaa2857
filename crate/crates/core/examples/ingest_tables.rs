// Writes a synthetic world to disk, loads it back and normalizes features
// within each country.

use wealthmap::ingest::{load_tables, pca_fit, InputPaths, IMAGE_COMPONENTS};
use wealthmap::pipeline::Manifest;
use wealthmap::synth::{synth_world, SynthConfig};
use wealthmap::Matrix;

pub fn run_example() -> wealthmap::Result<()> {
    let cfg = SynthConfig {
        countries: 2,
        tiles_per_country: 144,
        clusters_per_country: 20,
        households_per_cluster: 5,
        target_households_per_country: 10,
        seed: 11,
        ..Default::default()
    };
    let world = synth_world(&cfg)?;
    let dir = std::env::temp_dir().join(format!("wealthmap-ingest-{}", std::process::id()));
    world.write(&dir, &Manifest::new("example", cfg.seed))?;

    let tables = load_tables(&InputPaths {
        features: Some(dir.join("features.csv")),
        population: Some(dir.join("population.csv")),
        country_stats: Some(dir.join("country_stats.csv")),
        clusters: Some(dir.join("clusters.csv")),
        households: Some(dir.join("households.csv")),
    })?;
    let features = tables.features.expect("features requested");
    assert_eq!(features.len(), 288);
    assert_eq!(features.values().as_slice(), world.features.values().as_slice());

    let normalized = features.normalize_per_country();
    let road = normalized.feature_index("road_density").expect("standard column");
    let mean: f64 = normalized.values().column(road).iter().take(144).sum::<f64>() / 144.0;
    println!("per-country mean of normalized road density: {mean:.2e}");
    assert!(mean.abs() < 1e-9);

    // Image components are usually themselves a PCA reduction; here we fit
    // one on the raw component block to show the explained variance.
    let first = features.feature_index("img_pc_000").expect("standard column");
    let block = Matrix::from_rows(
        IMAGE_COMPONENTS,
        features.values().iter_rows().map(|r| r[first..first + IMAGE_COMPONENTS].to_vec()),
    )?;
    let pca = pca_fit(&block, 5, true)?;
    let explained = pca.cumulative_ratio();
    println!("variance explained by 5 components: {:.3}", explained[4]);
    assert!(explained.windows(2).all(|w| w[0] <= w[1] + 1e-12));

    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("ingest example");
}
