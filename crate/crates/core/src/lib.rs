//! Spatial-composition engine: an editable 3D scene built from a text prompt,
//! constrained interaction, and encoders that turn the arrangement into
//! depth, pose, lighting, image and mesh conditions.

pub mod avatar;
pub mod interaction;
pub mod math;
pub mod scene;
pub mod assets;
pub mod llm;
pub mod synthesis;
pub mod encode;
pub mod eval;
