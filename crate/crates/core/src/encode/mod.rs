//! Spatial conditions derived from an arranged scene: shaded image, depth,
//! OpenPose skeletons, camera-frame lighting and raw geometry.

mod depth;
mod geometry;
mod lighting;
mod pointcloud;
mod raster;
mod skeleton;

use image::ImageEncoder;
use image::codecs::png::PngEncoder;
use thiserror::Error;

pub use depth::{DepthImage, DepthMode, category_albedo, depth_from_raster, irradiance, quantize_depth, render_depth, render_scene_image, shade};
pub use geometry::{Owner, SceneGeometry, avatar_mesh, capsule_mesh, scene_geometry};
pub use lighting::{CameraSummary, LightingCondition, LocalLight, encode_lighting};
pub use pointcloud::{SampledPoint, pointcloud_to_ply, sample_pointcloud};
pub use raster::{Raster, rasterize};
pub use skeleton::{KEYPOINT_NAMES, SkeletonFrame, encode_skeleton, keypoints_world, skeletons_json};

use crate::assets::{MeshFormat, MeshStore};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("camera is degenerate (check near < far, fov and image size)")]
    DegenerateCamera,
    #[error("no mesh for `{0}`")]
    MissingMesh(String),
    #[error("scene has no lights")]
    NoLights,
    #[error("scene has no geometry")]
    EmptyScene,
    #[error("point count must be at least 1")]
    InvalidCount,
    #[error("rig has no joint `{0}`")]
    UnmappedJoint(String),
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("png: {0}")]
    Png(String),
}

pub(crate) fn png_bytes<P, C>(img: &image::ImageBuffer<P, C>) -> Result<Vec<u8>, EncodeError>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    use image::EncodableLayout;
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(img.as_raw().as_bytes(), img.width(), img.height(), P::COLOR_TYPE)
        .map_err(|e| EncodeError::Png(e.to_string()))?;
    Ok(out)
}

/// World-space geometry of the whole scene as OBJ or PLY text.
pub fn export_mesh(scene: &Scene, meshes: &MeshStore, format: MeshFormat) -> Result<String, EncodeError> {
    Ok(scene_geometry(scene, meshes)?.to_mesh()?.encode(format))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOptions {
    pub depth_mode: DepthMode,
    pub mesh_format: Option<MeshFormat>,
    /// Point count and seed.
    pub pointcloud: Option<(usize, u64)>,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            depth_mode: DepthMode::Linear,
            mesh_format: Some(MeshFormat::Obj),
            pointcloud: None,
        }
    }
}

/// Every condition for one camera view.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionBundle {
    pub scene_image: image::RgbImage,
    pub depth: DepthImage,
    pub skeletons: Vec<SkeletonFrame>,
    pub lighting: LightingCondition,
    pub mesh_export: Option<(MeshFormat, String)>,
    pub pointcloud: Option<Vec<SampledPoint>>,
}

/// A named file of a bundle, ready to upload or write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionFile {
    pub name: String,
    pub mime: &'static str,
    pub bytes: Vec<u8>,
}

impl ConditionBundle {
    /// `depth.png`, `skeleton.json`, `lighting.json`, `scene.png`, then the
    /// optional mesh and point cloud.
    pub fn files(&self) -> Result<Vec<ConditionFile>, EncodeError> {
        let mut out = vec![
            ConditionFile {
                name: "depth.png".into(),
                mime: "image/png",
                bytes: self.depth.to_png()?,
            },
            ConditionFile {
                name: "skeleton.json".into(),
                mime: "application/json",
                bytes: skeletons_json(&self.skeletons).into_bytes(),
            },
            ConditionFile {
                name: "lighting.json".into(),
                mime: "application/json",
                bytes: self.lighting.to_json().into_bytes(),
            },
            ConditionFile {
                name: "scene.png".into(),
                mime: "image/png",
                bytes: png_bytes(&self.scene_image)?,
            },
        ];
        if let Some((format, text)) = &self.mesh_export {
            out.push(ConditionFile {
                name: format!("mesh.{}", format.extension()),
                mime: "text/plain",
                bytes: text.clone().into_bytes(),
            });
        }
        if let Some(points) = &self.pointcloud {
            out.push(ConditionFile {
                name: "pointcloud.ply".into(),
                mime: "text/plain",
                bytes: pointcloud_to_ply(points).into_bytes(),
            });
        }
        Ok(out)
    }
}

/// Runs all encoders against the scene's own camera.
pub fn encode_all(scene: &Scene, meshes: &MeshStore, options: &EncodeOptions) -> Result<ConditionBundle, EncodeError> {
    let camera = &scene.camera;
    let geometry = scene_geometry(scene, meshes)?;
    let depth = render_depth(&geometry, camera, options.depth_mode)?;
    let scene_image = render_scene_image(&geometry, &scene.lights, camera)?;
    let skeletons = scene.avatars.iter().map(|a| encode_skeleton(a, camera)).collect::<Result<_, _>>()?;
    let lighting = encode_lighting(&scene.lights, camera)?;
    let mesh = if options.mesh_format.is_some() || options.pointcloud.is_some() {
        Some(geometry.to_mesh()?)
    } else {
        None
    };
    let mesh_export = options.mesh_format.map(|f| (f, mesh.as_ref().expect("built above").encode(f)));
    let pointcloud = match options.pointcloud {
        Some((n, seed)) => Some(sample_pointcloud(mesh.as_ref().expect("built above"), n, seed)?),
        None => None,
    };
    Ok(ConditionBundle {
        scene_image,
        depth,
        skeletons,
        lighting,
        mesh_export,
        pointcloud,
    })
}
