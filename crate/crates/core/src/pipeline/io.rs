use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::ingest::CsvFile;
use crate::labels::{ClusterObservation, TrainingSet};
use crate::mapping::TileEstimate;
use crate::tilegrid::TileId;

/// Provenance line written at the top of every output file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// Input file name and the first 16 hex digits of its SHA-256.
    pub inputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
        }
    }

    /// Records an input file by name and content hash.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        let name = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.push((name, digest[..16].to_string()));
        Ok(())
    }

    pub fn line(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|(n, h)| format!("{n}:{h}")).collect();
        format!(
            "# wealthmap {} command={} seed={} inputs={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.seed,
            if inputs.is_empty() { "-".to_string() } else { inputs.join(",") }
        )
    }
}

/// Writes a CSV file preceded by the manifest comment line.
pub fn write_csv<I, R>(path: &Path, manifest: &Manifest, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut buf = manifest.line().into_bytes();
    buf.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip decimal form, in exponent notation for very small
/// or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Reads `unit_truth.csv`: level, unit_id, value.
pub fn read_unit_truth(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    let file = CsvFile::read(path, &["level", "unit_id", "value"])?;
    let mut out = BTreeMap::new();
    for (line, rec) in &file.rows {
        let key = (
            file.str(rec, *line, "level")?.to_string(),
            file.str(rec, *line, "unit_id")?.to_string(),
        );
        let value = file.number(rec, *line, "value")?;
        if out.insert(key.clone(), value).is_some() {
            return Err(file.error(*line, format!("duplicate unit {}/{}", key.0, key.1)));
        }
    }
    Ok(out)
}

/// Fixed leading columns of `training.csv`; feature columns follow.
pub const TRAINING_COLUMNS: [&str; 7] = ["cluster_id", "country", "label", "lat", "lon", "urban", "n_households"];

pub fn write_training(path: &Path, manifest: &Manifest, set: &TrainingSet) -> Result<()> {
    let mut header: Vec<&str> = TRAINING_COLUMNS.to_vec();
    header.extend(set.feature_names.iter().map(String::as_str));
    write_csv(
        path,
        manifest,
        &header,
        set.observations.iter().map(|o| {
            let mut row = vec![
                o.cluster_id.clone(),
                o.country.to_string(),
                num(o.rwi_label),
                num(o.centroid.lat()),
                num(o.centroid.lon()),
                (o.urban as u8).to_string(),
                o.n_households.to_string(),
            ];
            row.extend(o.features.iter().map(|v| num(*v)));
            row
        }),
    )
}

pub fn read_training(path: &Path) -> Result<TrainingSet> {
    let file = CsvFile::read(path, &TRAINING_COLUMNS)?;
    if file.header[..TRAINING_COLUMNS.len()] != TRAINING_COLUMNS {
        return Err(file.error(0, format!("header must start with {}", TRAINING_COLUMNS.join(","))));
    }
    let feature_names: Vec<String> = file.header[TRAINING_COLUMNS.len()..].to_vec();
    let mut observations = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        observations.push(ClusterObservation {
            cluster_id: file.str(rec, *line, "cluster_id")?.to_string(),
            country: file.country(rec, *line, "country")?,
            centroid: file.latlon(rec, *line)?,
            urban: file.flag(rec, *line, "urban")?,
            rwi_label: file.number(rec, *line, "label")?,
            n_households: file.parse(rec, *line, "n_households")?,
            features: feature_names
                .iter()
                .map(|n| file.number(rec, *line, n))
                .collect::<Result<_>>()?,
        });
    }
    Ok(TrainingSet {
        feature_names,
        observations,
        unjoinable: Vec::new(),
    })
}

/// Column order of `rwi.csv`; an `error` column may follow.
pub const RWI_COLUMNS: [&str; 8] = [
    "quadkey",
    "latitude",
    "longitude",
    "rwi",
    "aggregation_level",
    "masked",
    "population",
    "country",
];

/// One `rwi.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct RwiRow {
    pub estimate: TileEstimate,
    pub error: Option<f64>,
}

pub fn write_rwi(path: &Path, manifest: &Manifest, rows: &[RwiRow]) -> Result<()> {
    let with_error = rows.iter().any(|r| r.error.is_some());
    let mut header = RWI_COLUMNS.to_vec();
    if with_error {
        header.push("error");
    }
    write_csv(
        path,
        manifest,
        &header,
        rows.iter().map(|r| {
            let e = &r.estimate;
            let center = e.tile.center();
            let mut row = vec![
                e.tile.quadkey(),
                format!("{:.6}", center.lat()),
                format!("{:.6}", center.lon()),
                num(e.rwi),
                e.aggregation_level.to_string(),
                (e.masked as u8).to_string(),
                num(e.population),
                e.country.to_string(),
            ];
            if with_error {
                row.push(r.error.map_or_else(String::new, num));
            }
            row
        }),
    )
}

pub fn read_rwi(path: &Path) -> Result<Vec<RwiRow>> {
    let file = CsvFile::read(path, &RWI_COLUMNS)?;
    let mut out = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        let tile: TileId = file.base_tile(rec, *line, "quadkey")?;
        let country: CountryCode = file.country(rec, *line, "country")?;
        let error = if file.has("error") {
            file.optional_number(rec, *line, "error")?
        } else {
            None
        };
        out.push(RwiRow {
            estimate: TileEstimate {
                tile,
                country,
                rwi: file.number(rec, *line, "rwi")?,
                population: file.number(rec, *line, "population")?,
                aggregation_level: file.parse(rec, *line, "aggregation_level")?,
                masked: file.flag(rec, *line, "masked")?,
            },
            error,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_line_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "x\n1\n").unwrap();
        let mut m = Manifest::new("train", 7);
        m.input(&p).unwrap();
        let line = m.line();
        assert!(line.starts_with("# wealthmap "));
        assert!(line.contains("seed=7") && line.contains("a.csv:"));
        assert_eq!(line, m.line());
    }

    #[test]
    fn written_csv_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("t.csv");
        let rows = vec![vec!["L1".to_string(), "u".into(), num(0.5)]];
        write_csv(&p, &Manifest::new("x", 1), &["level", "unit_id", "value"], rows).unwrap();
        let t = read_unit_truth(&p).unwrap();
        assert_eq!(t[&("L1".to_string(), "u".to_string())], 0.5);
    }
}
