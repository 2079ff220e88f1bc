//! Dataset ingestion, checkpoints and report output.

pub mod checkpoint;
pub mod loader;
pub mod manifest;
pub mod report;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loader::{load_dataset, write_synthetic, LoadedDataset};
pub use manifest::TaskManifest;
pub use report::{emit_report, render_report, ReportFormat};
