//! Procedural shapes, virtual scanning and partial-scan corruption.

pub mod corrupt;
pub mod dataset;
pub mod mesh;
pub mod scan;
pub mod shapes;

pub use corrupt::{corrupt, corrupt_at, CorruptionSpec, DEFAULT_SIGMA};
pub use dataset::{make_dataset, Dataset, DatasetConfig, Manifest, PartialSample, CleanSample};
pub use mesh::Mesh;
pub use scan::{generate_shape, standard_rig, virtual_scan, Camera};
pub use shapes::{ShapeFamily, ShapeParams};
