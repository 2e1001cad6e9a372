//! File formats: case files, CSV tables, VTK fields and run manifests.

pub mod case_file;
pub mod manifest;
pub mod tables;
pub mod vtk;

pub use case_file::{parse_case_file, parse_case_file_with, parse_case_str, serialize_case, CaseFileError};
pub use manifest::{OutputDir, RunManifest};
pub use vtk::{field_vtk_bytes, write_field_vtk};
