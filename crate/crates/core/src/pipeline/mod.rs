//! End-to-end stages shared by the command-line tool and the examples.

mod cli;
mod io;

pub use cli::{run, run_cli, Cli, Command, Common};
pub use io::{
    num, read_rwi, read_training, read_unit_truth, write_csv, write_rwi, write_training, Manifest, RwiRow, RWI_COLUMNS,
    TRAINING_COLUMNS,
};

use crate::error::Result;
use crate::evaluation::Dataset;
use crate::ingest::{FeatureTable, PopulationTable};
use crate::labels::{
    build_training_set, cluster_labels, household_index_by_country, ClusterRecord, HouseholdRecord, LabelMode,
    TrainingSet,
};

/// Survey labels joined to per-country normalized features.
pub fn training_set(
    features: &FeatureTable,
    population: &PopulationTable,
    clusters: &[ClusterRecord],
    households: &[HouseholdRecord],
    mode: LabelMode,
) -> Result<TrainingSet> {
    let scores = household_index_by_country(households)?;
    let labels = cluster_labels(clusters, households, &scores, mode);
    let normalized = features.normalize_per_country();
    Ok(build_training_set(clusters, &labels, &normalized, population))
}

pub fn dataset(
    features: &FeatureTable,
    population: &PopulationTable,
    clusters: &[ClusterRecord],
    households: &[HouseholdRecord],
) -> Result<Dataset> {
    Dataset::from_training_set(&training_set(features, population, clusters, households, LabelMode::Unweighted)?)
}
