//! File ingestion and emission: the `.eamx` matrix container, dataset
//! manifests and ROI atlases.

mod format;
mod manifest;
mod roi;

pub use format::{
    decode, decode_header, encode, read_header, read_matrix, write_matrix, Dtype, Header, Matrix, FORMAT_VERSION,
    HEADER_LEN, MAGIC,
};
pub use manifest::{
    load_manifest, parse_manifest, validate_lambda_grid, write_manifest, BaselineMode, BaselineSection, ConditionEntry,
    ContrastEntry, ContrastMode, DatasetManifest, SubjectEntry, TrMapSection,
};
pub use roi::{read_roi_file, write_roi_file, RoiAtlas};
