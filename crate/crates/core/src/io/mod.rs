//! File formats: OBJ surfaces, TetGen node/ele meshes, camera JSON, PNG
//! images, binary vertex attributes and the flat run configuration.

mod attributes;
mod cameras;
mod config;
mod image;
mod obj;
mod tetgen;

pub use attributes::{read_attributes, write_attributes, ATTRIBUTES_MAGIC, ATTRIBUTES_VERSION};
pub use cameras::{parse_cameras, read_cameras, write_cameras, CAMERA_TOLERANCE};
pub use config::{parse_config, read_config, RunConfig};
pub use image::{read_png, write_png};
pub use obj::{parse_obj, read_obj, write_obj};
pub use tetgen::{grid_from_tetgen, read_tetgen, write_tetgen, TetgenMesh};

use std::path::{Path, PathBuf};

/// `stem` with `ext` appended (`out/mesh` + `node` → `out/mesh.node`).
pub fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
