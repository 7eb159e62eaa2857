use std::f64::consts::PI;

use crate::tilegrid::{haversine_km, LatLon, EARTH_RADIUS_KM};

/// Exact nearest-neighbour and radius queries over points on the sphere.
///
/// Points are bucketed into latitude bands and sorted by longitude inside
/// each band. Band scans stop once a conservative lower bound on the
/// great-circle distance exceeds the current answer.
#[derive(Debug, Clone)]
pub struct GeoGridIndex {
    band_deg: f64,
    first_band: i64,
    bands: Vec<Vec<(f64, usize)>>,
    points: Vec<LatLon>,
}

fn hav(theta: f64) -> f64 {
    let s = (theta / 2.0).sin();
    s * s
}

fn lon_gap_rad(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d).to_radians()
}

impl GeoGridIndex {
    pub fn new(points: Vec<LatLon>, band_deg: f64) -> Self {
        let band_deg = if band_deg > 0.0 { band_deg } else { 1.0 };
        let band_of = |lat: f64| (lat / band_deg).floor() as i64;
        let (lo, hi) = points
            .iter()
            .map(|p| band_of(p.lat()))
            .fold((i64::MAX, i64::MIN), |(lo, hi), b| (lo.min(b), hi.max(b)));
        let mut bands = if points.is_empty() {
            Vec::new()
        } else {
            vec![Vec::new(); (hi - lo + 1) as usize]
        };
        for (i, p) in points.iter().enumerate() {
            bands[(band_of(p.lat()) - lo) as usize].push((p.lon(), i));
        }
        for b in &mut bands {
            b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        }
        GeoGridIndex {
            band_deg,
            first_band: lo,
            bands,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn band_range(&self, b: usize) -> (f64, f64) {
        let south = (self.first_band + b as i64) as f64 * self.band_deg;
        (south, south + self.band_deg)
    }

    /// Lower bound on the distance from `q` to any point of band `b`, and
    /// the cosine of the band latitude farthest from the equator.
    fn band_bounds(&self, q: LatLon, b: usize) -> (f64, f64) {
        let (south, north) = self.band_range(b);
        let lat_gap = if q.lat() < south {
            south - q.lat()
        } else if q.lat() > north {
            q.lat() - north
        } else {
            0.0
        };
        let max_abs = south.abs().max(north.abs()).min(90.0);
        (EARTH_RADIUS_KM * lat_gap.to_radians(), max_abs.to_radians().cos().max(0.0))
    }

    /// Lower bound from a longitude gap alone, for points in a band.
    fn lon_bound(q: LatLon, band_cos: f64, dlon: f64) -> f64 {
        let h = q.lat().to_radians().cos() * band_cos * hav(dlon);
        2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
    }

    /// Nearest point as (index, km), ties broken by lowest index.
    pub fn nearest(&self, q: LatLon) -> Option<(usize, f64)> {
        self.nearest_where(q, |_| true)
    }

    /// Nearest point among those accepted by `keep`.
    pub fn nearest_where(&self, q: LatLon, keep: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        let mut order: Vec<(f64, f64, usize)> = (0..self.bands.len())
            .map(|b| {
                let (lb, c) = self.band_bounds(q, b);
                (lb, c, b)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut best: Option<(usize, f64)> = None;
        let better = |best: &Option<(usize, f64)>, i: usize, d: f64| match best {
            None => true,
            Some((bi, bd)) => d < *bd || (d == *bd && i < *bi),
        };
        for (lb, band_cos, b) in order {
            if best.is_some_and(|(_, bd)| lb > bd) {
                break;
            }
            let band = &self.bands[b];
            if band.is_empty() {
                continue;
            }
            let start = band.partition_point(|(lon, _)| *lon < q.lon());
            let n = band.len();
            // Walk outward in both directions around the circle.
            for dir in [0usize, 1] {
                for step in 0..n {
                    let pos = if dir == 0 {
                        (start + step) % n
                    } else {
                        (start + n - 1 - step) % n
                    };
                    let (lon, i) = band[pos];
                    let bound = Self::lon_bound(q, band_cos, lon_gap_rad(lon, q.lon()));
                    if best.is_some_and(|(_, bd)| bound > bd) {
                        break;
                    }
                    if !keep(i) {
                        continue;
                    }
                    let d = haversine_km(q, self.points[i]);
                    if better(&best, i, d) {
                        best = Some((i, d));
                    }
                }
            }
        }
        best
    }

    /// Number of points within `radius_km` (inclusive).
    pub fn count_within(&self, q: LatLon, radius_km: f64) -> usize {
        let mut count = 0;
        let target = hav(radius_km / EARTH_RADIUS_KM);
        for b in 0..self.bands.len() {
            let (lb, band_cos) = self.band_bounds(q, b);
            if lb > radius_km {
                continue;
            }
            let band = &self.bands[b];
            let denom = q.lat().to_radians().cos() * band_cos;
            let ratio = if denom > 0.0 { target / denom } else { f64::INFINITY };
            let candidates: Box<dyn Iterator<Item = &(f64, usize)>> = if radius_km >= PI * EARTH_RADIUS_KM || ratio >= 1.0 {
                Box::new(band.iter())
            } else {
                let max_dlon = (2.0 * ratio.sqrt().asin()).to_degrees() + 1e-9;
                Box::new(band.iter().filter(move |(lon, _)| lon_gap_rad(*lon, q.lon()).to_degrees() <= max_dlon))
            };
            count += candidates
                .filter(|(_, i)| haversine_km(q, self.points[*i]) <= radius_km)
                .count();
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[LatLon], q: LatLon) -> (usize, f64) {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, haversine_km(q, *p)))
            .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<LatLon> = (0..400)
            .map(|_| LatLon::new(rng.random_range(-80.0..80.0), rng.random_range(-180.0..180.0)).unwrap())
            .collect();
        let index = GeoGridIndex::new(pts.clone(), 2.0);
        for _ in 0..300 {
            let q = LatLon::new(rng.random_range(-85.0..85.0), rng.random_range(-180.0..180.0)).unwrap();
            let (i, d) = index.nearest(q).unwrap();
            let (bi, bd) = brute_nearest(&pts, q);
            assert_eq!(d, bd);
            assert_eq!(i, bi);
            for r in [50.0, 500.0, 3000.0] {
                let brute = pts.iter().filter(|p| haversine_km(q, **p) <= r).count();
                assert_eq!(index.count_within(q, r), brute);
            }
        }
    }

    #[test]
    fn dateline_neighbours() {
        let pts = vec![
            LatLon::new(0.0, 179.9).unwrap(),
            LatLon::new(0.0, 170.0).unwrap(),
        ];
        let index = GeoGridIndex::new(pts, 1.0);
        let (i, _) = index.nearest(LatLon::new(0.0, -179.9).unwrap()).unwrap();
        assert_eq!(i, 0);
        assert!(GeoGridIndex::new(Vec::new(), 1.0).nearest(LatLon::new(0.0, 0.0).unwrap()).is_none());
    }

    #[test]
    fn radius_counts() {
        // 40 km and 60 km due north of the origin.
        let km_to_deg = 180.0 / (PI * EARTH_RADIUS_KM);
        let origin = LatLon::new(0.0, 0.0).unwrap();
        let pts = vec![
            LatLon::new(40.0 * km_to_deg, 0.0).unwrap(),
            LatLon::new(60.0 * km_to_deg, 0.0).unwrap(),
        ];
        let index = GeoGridIndex::new(pts, 0.5);
        let counts: Vec<usize> = [50.0, 250.0, 500.0, 1000.0]
            .iter()
            .map(|r| index.count_within(origin, *r))
            .collect();
        assert_eq!(counts, vec![1, 2, 2, 2]);
    }
}
