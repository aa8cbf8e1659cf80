//! Model file formats, VTK export, and pipeline configuration.

mod config;
mod model;
mod vtk;

pub use config::PipelineConfig;
pub use model::{
    parse_model, parse_model_str, write_model, FaceData, ModelError, ModelFile, ModelPayload,
    VolumeData,
};
pub use vtk::{export_vtk, vtk_string, VtkField};
