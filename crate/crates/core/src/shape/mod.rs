//! Analytic part-aware shape backend: primitive parts with exact latent
//! encodings, signed distances, labeled iso-surface meshes and surface
//! sampling.

pub mod mesh;
pub mod mesh_io;
pub mod partset;
pub mod primitive;
pub mod sampling;
pub mod sdf;

pub use mesh::{extract_mesh, extract_mesh_in, LabeledMesh};
pub use mesh_io::{read_mesh, write_mesh};
pub use partset::PartSet;
pub use primitive::{decode_part, encode_part, PartKind, PartPrimitive, Vec3, SEMANTIC_WIDTH};
pub use sampling::sample_surface;
pub use sdf::{part_responsibility, part_sdf, sdf, sdf_gradient};
