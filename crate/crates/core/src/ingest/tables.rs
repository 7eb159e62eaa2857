//! CSV loaders for every input schema. Lines starting with `#` are
//! manifest comments and are skipped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::StringRecord;

use super::FeatureTable;
use crate::awe::CountryStats;
use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::labels::{ClusterRecord, HouseholdRecord, ASSET_COLUMNS};
use crate::mapping::{AdminAssignment, UnitMembership};
use crate::tilegrid::{LatLon, TileId, BASE_ZOOM};

/// A parsed CSV file with header-based column lookup.
pub(crate) struct CsvFile {
    pub name: String,
    columns: HashMap<String, usize>,
    pub header: Vec<String>,
    pub rows: Vec<(usize, StringRecord)>,
}

impl CsvFile {
    pub fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            ));
        }
        let csv_err = |source| Error::Csv {
            file: name.clone(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let header: Vec<String> = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let columns: HashMap<String, usize> = header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(Error::Schema {
                    file: name.clone(),
                    row: 0,
                    message: format!("missing column `{col}`"),
                });
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            rows.push((line, record));
        }
        Ok(CsvFile {
            name,
            columns,
            header,
            rows,
        })
    }

    pub fn has(&self, col: &str) -> bool {
        self.columns.contains_key(col)
    }

    pub fn error(&self, row: usize, message: impl Into<String>) -> Error {
        Error::Schema {
            file: self.name.clone(),
            row,
            message: message.into(),
        }
    }

    pub fn str<'a>(&self, rec: &'a StringRecord, line: usize, col: &str) -> Result<&'a str> {
        let idx = self.columns[col];
        rec.get(idx)
            .ok_or_else(|| self.error(line, format!("missing value for `{col}`")))
    }

    pub fn parse<T: FromStr>(&self, rec: &StringRecord, line: usize, col: &str) -> Result<T> {
        let raw = self.str(rec, line, col)?;
        raw.parse::<T>()
            .map_err(|_| self.error(line, format!("cannot parse `{col}` value {raw:?}")))
    }

    pub fn number(&self, rec: &StringRecord, line: usize, col: &str) -> Result<f64> {
        let v: f64 = self.parse(rec, line, col)?;
        if !v.is_finite() {
            return Err(self.error(line, format!("non-finite `{col}`")));
        }
        Ok(v)
    }

    pub fn optional_number(&self, rec: &StringRecord, line: usize, col: &str) -> Result<Option<f64>> {
        if !self.has(col) || self.str(rec, line, col)?.is_empty() {
            return Ok(None);
        }
        self.number(rec, line, col).map(Some)
    }

    pub fn flag(&self, rec: &StringRecord, line: usize, col: &str) -> Result<bool> {
        match self.str(rec, line, col)? {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.error(line, format!("`{col}` must be 0 or 1, got {other:?}"))),
        }
    }

    pub fn country(&self, rec: &StringRecord, line: usize, col: &str) -> Result<CountryCode> {
        let raw = self.str(rec, line, col)?;
        CountryCode::new(raw).map_err(|e| self.error(line, e.to_string()))
    }

    pub fn base_tile(&self, rec: &StringRecord, line: usize, col: &str) -> Result<TileId> {
        let raw = self.str(rec, line, col)?;
        if raw.len() != BASE_ZOOM as usize {
            return Err(self.error(
                line,
                format!("quadkey {raw:?} must have {BASE_ZOOM} digits"),
            ));
        }
        TileId::from_quadkey(raw).map_err(|e| self.error(line, e.to_string()))
    }

    pub fn latlon(&self, rec: &StringRecord, line: usize) -> Result<LatLon> {
        let lat = self.number(rec, line, "lat")?;
        let lon = self.number(rec, line, "lon")?;
        LatLon::new(lat, lon).map_err(|e| self.error(line, e.to_string()))
    }
}

/// Population count per zoom-14 tile; tiles absent from the table count as 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PopulationTable(BTreeMap<TileId, f64>);

impl PopulationTable {
    pub fn new(entries: impl IntoIterator<Item = (TileId, f64)>) -> Self {
        PopulationTable(entries.into_iter().collect())
    }

    pub fn get(&self, tile: &TileId) -> f64 {
        self.0.get(tile).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TileId, &f64)> {
        self.0.iter()
    }
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let file = CsvFile::read(path, &["quadkey", "country"])?;
    if file.header.len() < 3 || file.header[0] != "quadkey" || file.header[1] != "country" {
        return Err(file.error(0, "header must start with quadkey,country followed by feature columns"));
    }
    let names: Vec<String> = file.header[2..].to_vec();
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        let tile = file.base_tile(rec, *line, "quadkey")?;
        if !seen.insert(tile) {
            return Err(file.error(*line, format!("duplicate quadkey {tile}")));
        }
        let country = file.country(rec, *line, "country")?;
        let values = names
            .iter()
            .map(|n| file.number(rec, *line, n))
            .collect::<Result<Vec<_>>>()?;
        rows.push((tile, country, values));
    }
    FeatureTable::new(names, rows)
}

pub fn read_population(path: &Path) -> Result<PopulationTable> {
    let file = CsvFile::read(path, &["quadkey", "population"])?;
    let mut map = BTreeMap::new();
    for (line, rec) in &file.rows {
        let tile = file.base_tile(rec, *line, "quadkey")?;
        let pop = file.number(rec, *line, "population")?;
        if pop < 0.0 {
            return Err(file.error(*line, "negative population"));
        }
        if map.insert(tile, pop).is_some() {
            return Err(file.error(*line, format!("duplicate quadkey {tile}")));
        }
    }
    Ok(PopulationTable(map))
}

pub fn read_clusters(path: &Path) -> Result<Vec<ClusterRecord>> {
    let file = CsvFile::read(path, &["cluster_id", "country", "lat", "lon", "urban"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        let cluster_id = file.str(rec, *line, "cluster_id")?.to_string();
        if !seen.insert(cluster_id.clone()) {
            return Err(file.error(*line, format!("duplicate cluster_id {cluster_id}")));
        }
        let survey_year = if file.has("survey_year") && !file.str(rec, *line, "survey_year")?.is_empty() {
            Some(file.parse(rec, *line, "survey_year")?)
        } else {
            None
        };
        out.push(ClusterRecord {
            cluster_id,
            country: file.country(rec, *line, "country")?,
            centroid: file.latlon(rec, *line)?,
            urban: file.flag(rec, *line, "urban")?,
            survey_year,
        });
    }
    Ok(out)
}

pub fn read_households(path: &Path) -> Result<Vec<HouseholdRecord>> {
    let mut required = vec!["household_id", "country", "cluster_id", "weight"];
    required.extend(ASSET_COLUMNS);
    let file = CsvFile::read(path, &required)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        let id = file.str(rec, *line, "household_id")?.to_string();
        if !seen.insert(id.clone()) {
            return Err(file.error(*line, format!("duplicate household_id {id}")));
        }
        let lat = file.optional_number(rec, *line, "lat")?;
        let lon = file.optional_number(rec, *line, "lon")?;
        let location = match (lat, lon) {
            (Some(lat), Some(lon)) => {
                Some(LatLon::new(lat, lon).map_err(|e| file.error(*line, e.to_string()))?)
            }
            (None, None) => None,
            _ => return Err(file.error(*line, "lat and lon must both be present or both empty")),
        };
        let weight = file.number(rec, *line, "weight")?;
        if weight < 0.0 {
            return Err(file.error(*line, "negative survey weight"));
        }
        let assets = ASSET_COLUMNS
            .iter()
            .map(|c| file.number(rec, *line, c))
            .collect::<Result<Vec<_>>>()?;
        out.push(HouseholdRecord {
            id,
            country: file.country(rec, *line, "country")?,
            cluster_id: file.str(rec, *line, "cluster_id")?.to_string(),
            location,
            assets,
            weight,
        });
    }
    Ok(out)
}

pub fn read_country_stats(path: &Path) -> Result<BTreeMap<CountryCode, CountryStats>> {
    let file = CsvFile::read(path, &["iso2", "gdp_pc_usd", "gini"])?;
    let mut out = BTreeMap::new();
    for (line, rec) in &file.rows {
        let iso2 = file.country(rec, *line, "iso2")?;
        let year = |col: &str| -> Result<Option<i32>> {
            if file.has(col) && !file.str(rec, *line, col)?.is_empty() {
                Ok(Some(file.parse(rec, *line, col)?))
            } else {
                Ok(None)
            }
        };
        let stats = CountryStats::new(
            iso2,
            file.number(rec, *line, "gdp_pc_usd")?,
            file.number(rec, *line, "gini")?,
        )
        .map_err(|e| file.error(*line, e.to_string()))?
        .with_years(year("gdp_year")?, year("gini_year")?);
        if out.insert(iso2, stats).is_some() {
            return Err(file.error(*line, format!("duplicate iso2 {iso2}")));
        }
    }
    Ok(out)
}

pub fn read_admin_assignment(path: &Path) -> Result<AdminAssignment> {
    let file = CsvFile::read(path, &["quadkey", "level", "unit_id"])?;
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        let tile = file.base_tile(rec, *line, "quadkey")?;
        let level = file.str(rec, *line, "level")?.to_string();
        if !seen.insert((tile, level.clone())) {
            return Err(file.error(*line, format!("tile {tile} assigned twice at level {level}")));
        }
        rows.push(UnitMembership {
            tile,
            level,
            unit_id: file.str(rec, *line, "unit_id")?.to_string(),
        });
    }
    Ok(AdminAssignment::new(rows))
}

/// Paths of the core input files; any may be omitted.
#[derive(Debug, Clone, Default)]
pub struct InputPaths {
    pub features: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub country_stats: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub households: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct InputTables {
    pub features: Option<FeatureTable>,
    pub population: Option<PopulationTable>,
    pub country_stats: Option<BTreeMap<CountryCode, CountryStats>>,
    pub clusters: Option<Vec<ClusterRecord>>,
    pub households: Option<Vec<HouseholdRecord>>,
}

pub fn load_tables(paths: &InputPaths) -> Result<InputTables> {
    Ok(InputTables {
        features: paths.features.as_deref().map(read_features).transpose()?,
        population: paths.population.as_deref().map(read_population).transpose()?,
        country_stats: paths.country_stats.as_deref().map(read_country_stats).transpose()?,
        clusters: paths.clusters.as_deref().map(read_clusters).transpose()?,
        households: paths.households.as_deref().map(read_households).transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn empty_feature_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "features.csv", "# manifest\nquadkey,country,a,b\n");
        let t = read_features(&p).unwrap();
        assert_eq!(t.len(), 0);
        assert_eq!(t.feature_names(), ["a", "b"]);
    }

    #[test]
    fn rows_keep_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let body = "quadkey,country,a\n\
                    30000000000003,TG,1\n\
                    30000000000001,TG,2\n\
                    30000000000002,BJ,3\n";
        let t = read_features(&write(&dir, "f.csv", body)).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.tiles()[0].quadkey(), "30000000000003");
        assert_eq!(t.values().column(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn short_quadkey_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let body = "quadkey,country,a\n30000000000003,TG,1\n3000,TG,2\n";
        let err = read_features(&write(&dir, "f.csv", body)).unwrap_err();
        match err {
            Error::Schema { row, message, .. } => {
                assert_eq!(row, 3);
                assert!(message.contains("14 digits"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_quadkey_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = "quadkey,population\n30000000000003,5\n30000000000003,6\n";
        assert!(read_population(&write(&dir, "p.csv", body)).is_err());
    }

    #[test]
    fn missing_file_and_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_population(&dir.path().join("nope.csv")),
            Err(Error::Io { .. })
        ));
        let p = write(&dir, "p.csv", "quadkey,pop\n");
        assert!(matches!(read_population(&p), Err(Error::Schema { .. })));
    }

    #[test]
    fn households_with_optional_location() {
        let dir = tempfile::tempdir().unwrap();
        let assets = ASSET_COLUMNS.join(",");
        let zeros = vec!["0"; 15].join(",");
        let body = format!(
            "household_id,country,cluster_id,lat,lon,weight,{assets}\n\
             h1,TG,c1,,,1.5,{zeros}\n\
             h2,TG,c1,6.1,1.2,1,{zeros}\n"
        );
        let hh = read_households(&write(&dir, "h.csv", &body)).unwrap();
        assert!(hh[0].location.is_none());
        assert!(hh[1].location.is_some());
        let bad = format!("household_id,country,cluster_id,lat,lon,weight,{assets}\nh1,TG,c1,6.1,,1,{zeros}\n");
        assert!(read_households(&write(&dir, "h2.csv", &bad)).is_err());
    }
}
