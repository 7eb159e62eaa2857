// Converts relative wealth into dollars per capita using GDP and the Gini
// coefficient.

use std::collections::BTreeMap;

use wealthmap::awe::{export_distribution, icdf_params, rwi_to_awe, AweMode, CountryStats};
use wealthmap::tilegrid::BASE_ZOOM;
use wealthmap::{CountryCode, TileId};

pub fn run_example() -> wealthmap::Result<()> {
    let country: CountryCode = "TG".parse()?;
    let stats = CountryStats::new(country, 1_000.0, 0.42)?;
    let spec = icdf_params(&stats)?;
    println!("Pareto tail alpha {:.3}, lognormal sigma {:.3}", spec.alpha, spec.sigma);

    let tiles: Vec<(TileId, CountryCode, f64)> = (0..200u32)
        .map(|i| {
            let rwi = ((i * 37) % 200) as f64 / 50.0 - 2.0;
            Ok((TileId::new(BASE_ZOOM, 8000 + i, 7900)?, country, rwi))
        })
        .collect::<wealthmap::Result<_>>()?;
    let table = BTreeMap::from([(country, stats)]);
    let awe = rwi_to_awe(&tiles, &table, AweMode::IcdfOfRank)?;

    let mean = awe.iter().map(|e| e.awe_usd).sum::<f64>() / awe.len() as f64;
    println!("mean absolute wealth ${mean:.2} (GDP per capita $1000)");
    assert!((mean - 1_000.0).abs() < 1e-6);

    let poorest = awe.iter().min_by(|a, b| a.rwi.total_cmp(&b.rwi)).expect("nonempty");
    let richest = awe.iter().max_by(|a, b| a.rwi.total_cmp(&b.rwi)).expect("nonempty");
    println!("poorest tile ${:.0}, richest tile ${:.0}", poorest.awe_usd, richest.awe_usd);

    let values: Vec<f64> = awe.iter().map(|e| e.awe_usd).collect();
    for bin in export_distribution(&values, &vec![1.0; values.len()], 6)? {
        println!("  ${:>8.0} - ${:>8.0}: {:.0}", bin.lower_usd, bin.upper_usd, bin.weight);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("absolute wealth example");
}
