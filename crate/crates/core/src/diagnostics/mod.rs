//! Executable checks: occupancy invariance, initial discriminator accuracy,
//! the Gaussian-scale sweep and embedding export.

pub mod embeddings;
pub mod occupancy;
pub mod pacc;
pub mod sweep;

pub use embeddings::{confusion_gap, embeddings_csv, export_embeddings, BufferSummary};
pub use occupancy::{occupancy_measure, random_policy, truncated_occupancy, verify_relabeling_invariance, OccupancyTable};
pub use pacc::{initial_p_acc, pacc_init_stat, PaccHistogram, HISTOGRAM_BINS};
pub use sweep::{gaussian_scale_sweep, SweepCell, SweepTable};
