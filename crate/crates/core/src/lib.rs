//! Micro-regional wealth estimation: tile features and survey labels in,
//! boosted-tree wealth maps, validation, absolute wealth and targeting
//! simulations out.

pub mod awe;
pub mod country;
pub mod error;
pub mod evaluation;
pub mod gbdt;
pub mod ingest;
pub mod labels;
pub mod mapping;
pub mod matrix;
pub mod pipeline;
pub mod synth;
pub mod targeting;
pub mod tilegrid;
pub mod uncertainty;

pub use country::CountryCode;
pub use error::{Error, Result};
pub use gbdt::{GbdtParams, WealthModel};
pub use ingest::{FeatureTable, PopulationTable};
pub use matrix::Matrix;
pub use tilegrid::{LatLon, TileId};

/// Derives an independent stream seed from a base seed and a label.
pub(crate) fn mix_seed(seed: u64, label: &[u8]) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in label {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
