//! Bing tile system math: Web-Mercator tile addressing, quadkeys,
//! quadtree navigation and great-circle distances.
//!
//! Zoom 14 tiles (about 2.4 km at the equator) are the unit every other
//! module works on; their quadkeys are the canonical row key in all CSV
//! files.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Deepest supported zoom level.
pub const MAX_ZOOM: u8 = 23;
/// Zoom level of the wealth estimation grid.
pub const BASE_ZOOM: u8 = 14;
/// Latitude limit of the square Web-Mercator world.
pub const MAX_LATITUDE: f64 = 85.051_128_78;
/// Mean Earth radius (IUGG) in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A point on the globe in degrees.
///
/// Latitude is clamped into the Web-Mercator range and longitude wrapped
/// into `[-180, 180)` on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    lat: f64,
    lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite coordinate ({lat}, {lon})"
            )));
        }
        Ok(LatLon {
            lat: lat.clamp(-MAX_LATITUDE, MAX_LATITUDE),
            lon: normalize_lon(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Normalized Mercator coordinates in `[0, 1]`, origin at the north-west corner.
    fn mercator(&self) -> (f64, f64) {
        let sin_lat = (self.lat * PI / 180.0).sin();
        let px = (self.lon + 180.0) / 360.0;
        let py = 0.5 - ((1.0 + sin_lat) / (1.0 - sin_lat)).ln() / (4.0 * PI);
        (px, py)
    }

    /// Position inside the containing tile at `zoom`, both fractions in `[0, 1)`.
    pub fn offset_in_tile(&self, zoom: u8) -> Result<(f64, f64)> {
        let tile = latlon_to_tile(*self, zoom)?;
        let (px, py) = self.mercator();
        let size = map_size(zoom) as f64;
        let fx = (px * size - tile.x as f64).clamp(0.0, 1.0);
        let fy = (py * size - tile.y as f64).clamp(0.0, 1.0);
        Ok((fx, fy))
    }
}

fn normalize_lon(lon: f64) -> f64 {
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if wrapped >= 180.0 {
        -180.0
    } else {
        wrapped
    }
}

fn map_size(zoom: u8) -> u64 {
    1u64 << zoom
}

fn check_zoom(zoom: u8) -> Result<()> {
    if zoom == 0 || zoom > MAX_ZOOM {
        return Err(Error::InvalidLevel {
            zoom,
            reason: "zoom must be within 1..=23",
        });
    }
    Ok(())
}

/// Address of a Bing map tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileId {
    zoom: u8,
    x: u32,
    y: u32,
}

impl TileId {
    pub fn new(zoom: u8, x: u32, y: u32) -> Result<Self> {
        check_zoom(zoom)?;
        let size = map_size(zoom);
        if u64::from(x) >= size || u64::from(y) >= size {
            return Err(Error::invalid(format!(
                "tile ({x}, {y}) outside the {size}x{size} grid of zoom {zoom}"
            )));
        }
        Ok(TileId { zoom, x, y })
    }

    pub fn zoom(&self) -> u8 {
        self.zoom
    }

    pub fn x(&self) -> u32 {
        self.x
    }

    pub fn y(&self) -> u32 {
        self.y
    }

    /// Base-4 quadkey: digit `i` interleaves bit `i` of y (weight 2) and x (weight 1).
    pub fn quadkey(&self) -> String {
        let mut key = String::with_capacity(self.zoom as usize);
        for level in (1..=self.zoom).rev() {
            let mask = 1u64 << (level - 1);
            let mut digit = b'0';
            if u64::from(self.x) & mask != 0 {
                digit += 1;
            }
            if u64::from(self.y) & mask != 0 {
                digit += 2;
            }
            key.push(digit as char);
        }
        key
    }

    pub fn from_quadkey(quadkey: &str) -> Result<Self> {
        let err = |reason| Error::Quadkey {
            quadkey: quadkey.to_string(),
            reason,
        };
        if quadkey.is_empty() {
            return Err(err("empty quadkey"));
        }
        if quadkey.len() > MAX_ZOOM as usize {
            return Err(err("longer than 23 digits"));
        }
        let (mut x, mut y) = (0u64, 0u64);
        for byte in quadkey.bytes() {
            let digit = match byte {
                b'0'..=b'3' => u64::from(byte - b'0'),
                _ => return Err(err("digits must be 0-3")),
            };
            x = (x << 1) | (digit & 1);
            y = (y << 1) | (digit >> 1);
        }
        Ok(TileId {
            zoom: quadkey.len() as u8,
            x: x as u32,
            y: y as u32,
        })
    }

    pub fn parent(&self) -> Result<TileId> {
        if self.zoom < 2 {
            return Err(Error::InvalidLevel {
                zoom: self.zoom,
                reason: "parent requires zoom >= 2",
            });
        }
        Ok(TileId {
            zoom: self.zoom - 1,
            x: self.x / 2,
            y: self.y / 2,
        })
    }

    /// Ancestor at `zoom` (which must not exceed this tile's zoom).
    pub fn ancestor(&self, zoom: u8) -> Result<TileId> {
        check_zoom(zoom)?;
        if zoom > self.zoom {
            return Err(Error::InvalidLevel {
                zoom,
                reason: "ancestor must be at a coarser zoom",
            });
        }
        let shift = self.zoom - zoom;
        Ok(TileId {
            zoom,
            x: self.x >> shift,
            y: self.y >> shift,
        })
    }

    /// The four tiles one level down, in quadkey digit order.
    pub fn children(&self) -> Result<[TileId; 4]> {
        if self.zoom >= MAX_ZOOM {
            return Err(Error::InvalidLevel {
                zoom: self.zoom,
                reason: "children require zoom <= 22",
            });
        }
        let (zoom, x, y) = (self.zoom + 1, self.x * 2, self.y * 2);
        Ok([
            TileId { zoom, x, y },
            TileId { zoom, x: x + 1, y },
            TileId { zoom, x, y: y + 1 },
            TileId {
                zoom,
                x: x + 1,
                y: y + 1,
            },
        ])
    }

    /// Tile shifted by `(dx, dy)` at the same zoom, or `None` when that
    /// falls off the map.
    pub fn offset(&self, dx: i64, dy: i64) -> Option<TileId> {
        let size = map_size(self.zoom) as i64;
        let x = i64::from(self.x) + dx;
        let y = i64::from(self.y) + dy;
        if (0..size).contains(&x) && (0..size).contains(&y) {
            Some(TileId {
                zoom: self.zoom,
                x: x as u32,
                y: y as u32,
            })
        } else {
            None
        }
    }

    pub fn bounds(&self) -> Bounds {
        let size = map_size(self.zoom) as f64;
        let (x, y) = (f64::from(self.x), f64::from(self.y));
        Bounds {
            west: x / size * 360.0 - 180.0,
            east: (x + 1.0) / size * 360.0 - 180.0,
            north: mercator_y_to_lat(y / size),
            south: mercator_y_to_lat((y + 1.0) / size),
        }
    }

    pub fn center(&self) -> LatLon {
        let size = map_size(self.zoom) as f64;
        LatLon {
            lat: mercator_y_to_lat((f64::from(self.y) + 0.5) / size),
            lon: (f64::from(self.x) + 0.5) / size * 360.0 - 180.0,
        }
    }
}

impl fmt::Display for TileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.quadkey())
    }
}

impl FromStr for TileId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TileId::from_quadkey(s)
    }
}

fn mercator_y_to_lat(py: f64) -> f64 {
    (PI * (1.0 - 2.0 * py)).sinh().atan() * 180.0 / PI
}

/// Geographic box of a tile in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

impl Bounds {
    /// Half-open containment matching the tile assignment rule.
    pub fn contains(&self, p: LatLon) -> bool {
        p.lon >= self.west && p.lon < self.east && p.lat <= self.north && p.lat >= self.south
    }
}

pub fn latlon_to_tile(p: LatLon, zoom: u8) -> Result<TileId> {
    check_zoom(zoom)?;
    let size = map_size(zoom);
    let (px, py) = p.mercator();
    let clip = |v: f64| -> u32 {
        let scaled = (v * size as f64).floor();
        scaled.clamp(0.0, (size - 1) as f64) as u32
    };
    Ok(TileId {
        zoom,
        x: clip(px),
        y: clip(py),
    })
}

/// Great-circle distance in kilometers.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
