//! Dataset directory format, min-max normalization, the synthetic generator,
//! and matrix export.

mod dataset;
mod export;
mod synth;

pub use dataset::{
    load_dataset, normalize_minmax, read_labels, save_dataset, write_labels, DatasetMeta,
    MultiViewDataset, ViewMeta, LABELS_FILE, META_FILE,
};
pub use export::{export_matrix, read_matrix, write_matrix, MatrixFormat};
pub use synth::{synth_generate, synth_parts, SynthParts, SynthSpec};
