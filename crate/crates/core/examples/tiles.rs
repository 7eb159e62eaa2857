// Quadkeys, tile hierarchy and great-circle distance.

use wealthmap::tilegrid::{haversine_km, latlon_to_tile, BASE_ZOOM};
use wealthmap::{LatLon, TileId};

pub fn run_example() -> wealthmap::Result<()> {
    let lome = LatLon::new(6.1319, 1.2228)?;
    let tile = latlon_to_tile(lome, BASE_ZOOM)?;
    let key = tile.quadkey();
    println!("Lomé falls in zoom-{BASE_ZOOM} tile {key}");
    assert_eq!(TileId::from_quadkey(&key)?, tile);
    assert!(tile.bounds().contains(lome));

    // A zoom-8 ancestor groups 64 x 64 base tiles.
    let coarse = tile.ancestor(8)?;
    assert!(key.starts_with(&coarse.quadkey()));
    println!("ancestor at zoom 8: {}", coarse.quadkey());
    for child in tile.parent()?.children()? {
        assert_eq!(child.parent()?, tile.parent()?);
    }

    let kara = LatLon::new(9.5511, 1.1861)?;
    let km = haversine_km(lome, kara);
    println!("Lomé to Kara: {km:.1} km");
    assert!((km - 380.0).abs() < 5.0);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("tiles example");
}
