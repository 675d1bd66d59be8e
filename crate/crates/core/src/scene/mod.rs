//! Canonical scene data model.
//!
//! A [`Scene`] is an immutable snapshot; [`apply_action`] is the only way to
//! produce an edited one. Persistence lives in [`persist`], the bird's-eye
//! grid mapping in [`grid`].

mod action;
mod grid;
pub mod persist;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use action::{ObjectAction, Rejection, RotationAxis, apply_action, insert_object, snap_to_support};
pub use grid::{BoundsError, grid_from_world, world_from_grid};
pub use persist::{SchemaViolation, light_from_value, light_to_value, load_scene, object_from_value, object_to_value, save_scene};

use crate::avatar::AvatarInstance;
use crate::interaction::{AffordanceSet, ObjectClass};
use crate::math::{Mat3, Quat, Vec3, look_at_rotation};

/// Orientation stored as a unit quaternion. Files carry yaw/pitch/roll degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rotation(Quat);

impl Rotation {
    pub const IDENTITY: Self = Self(Quat::IDENTITY);

    pub fn from_quat(q: Quat) -> Self {
        Self(q.normalize())
    }

    pub fn from_euler_deg(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self(Quat::from_euler_deg(yaw, pitch, roll))
    }

    pub fn yaw_deg(degrees: f64) -> Self {
        Self::from_euler_deg(degrees, 0.0, 0.0)
    }

    pub fn quat(self) -> Quat {
        self.0
    }

    pub fn to_euler_deg(self) -> (f64, f64, f64) {
        self.0.to_euler_deg()
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        self.0.rotate(v)
    }

    pub fn matrix(self) -> Mat3 {
        self.0.to_mat3()
    }

    pub fn inverse(self) -> Self {
        Self(self.0.conjugate())
    }

    /// `self` applied after `inner`.
    pub fn then(self, inner: Rotation) -> Self {
        Self((self.0 * inner.0).normalize())
    }

    pub fn is_unit(self) -> bool {
        (self.0.norm() - 1.0).abs() <= 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformTRS {
    pub translation: Vec3,
    pub rotation: Rotation,
    pub scale: Vec3,
}

impl Default for TransformTRS {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TransformTRS {
    pub const IDENTITY: Self = Self {
        translation: Vec3::ZERO,
        rotation: Rotation::IDENTITY,
        scale: Vec3::ONE,
    };

    pub fn new(translation: Vec3, rotation: Rotation, scale: Vec3) -> Self {
        Self {
            translation,
            rotation,
            scale,
        }
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.translation + self.rotation.rotate(p.mul_elem(self.scale))
    }

    /// Direction transform (no translation, no renormalization).
    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v.mul_elem(self.scale))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Smallest box enclosing all `points`; `None` if empty.
    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Self::new(first, first), |b, p| Self::new(b.min.min(p), b.max.max(p))))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x <= self.max.x && self.min.y <= self.max.y && self.min.z <= self.max.z
    }

    pub fn transformed(&self, t: &TransformTRS) -> Aabb {
        Aabb::from_points(self.corners().map(|c| t.transform_point(c))).expect("eight corners")
    }

    /// True when the xz projections overlap with positive area.
    pub fn overlaps_xz(&self, o: &Aabb) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.z < o.max.z && o.min.z < self.max.z
    }

    pub fn contains_xz(&self, p: Vec3) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.z >= self.min.z && p.z <= self.max.z
    }
}

/// Placement tags carried by assets and the objects built from them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementTag {
    Grounded,
    Accessory,
    WallMounted,
    Illumination,
    AvatarPrefab,
    FreeInteractive,
}

pub type TagSet = BTreeSet<PlacementTag>;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    pub mesh_ref: String,
    pub transform: TransformTRS,
    pub initial_transform: TransformTRS,
    pub local_bounds: Aabb,
    pub object_class: ObjectClass,
    pub affordances: AffordanceSet,
    pub tags: TagSet,
    /// Light driven by this object's intensity slider, if it is a lamp.
    pub light_id: Option<String>,
}

impl SceneObject {
    pub fn world_bounds(&self) -> Aabb {
        self.local_bounds.transformed(&self.transform)
    }

    pub fn has_tag(&self, tag: PlacementTag) -> bool {
        self.tags.contains(&tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub position: Vec3,
    pub rotation: Rotation,
    /// Degrees, in (0, 180).
    pub vertical_fov: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            position: Vec3::new(0.0, 1.6, 3.0),
            rotation: Rotation::IDENTITY,
            vertical_fov: 60.0,
            image_width: 512,
            image_height: 512,
            near: 0.1,
            far: 20.0,
        }
    }
}

impl CameraSpec {
    pub fn looking_at(position: Vec3, target: Vec3) -> Self {
        Self {
            position,
            rotation: Rotation::from_quat(look_at_rotation(position, target)),
            ..Self::default()
        }
    }

    /// Camera-space coordinates (camera looks down -z) of a world point.
    pub fn to_view(&self, p: Vec3) -> Vec3 {
        self.rotation.inverse().rotate(p - self.position)
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.rotate(-Vec3::Z)
    }

    pub fn right(&self) -> Vec3 {
        self.rotation.rotate(Vec3::X)
    }

    pub fn up(&self) -> Vec3 {
        self.rotation.rotate(Vec3::Y)
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        (self.image_height as f64 * 0.5) / (self.vertical_fov.to_radians() * 0.5).tan()
    }

    /// Pixel coordinates and view depth (distance along the viewing axis) of
    /// a world point. `None` when the point is not in front of the camera.
    /// Pixel (i, j) covers [i, i+1) × [j, j+1); the principal point is the
    /// image center.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        let v = self.to_view(p);
        let depth = -v.z;
        if depth <= 1e-12 {
            return None;
        }
        let f = self.focal_px();
        let x = self.image_width as f64 * 0.5 + f * v.x / depth;
        let y = self.image_height as f64 * 0.5 - f * v.y / depth;
        Some((x, y, depth))
    }

    /// World-space unit ray through image point (x, y).
    pub fn pixel_ray(&self, x: f64, y: f64) -> Vec3 {
        let f = self.focal_px();
        let dir = Vec3::new((x - self.image_width as f64 * 0.5) / f, -(y - self.image_height as f64 * 0.5) / f, -1.0);
        self.rotation.rotate(dir).normalize_or(self.forward())
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && self.vertical_fov > 0.0
            && self.vertical_fov < 180.0
            && self.image_width >= 1
            && self.image_height >= 1
            && self.near > 0.0
            && self.near < self.far
            && self.far.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightKind {
    Directional,
    Point,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightSpec {
    pub id: String,
    pub kind: LightKind,
    pub position: Vec3,
    /// Unit vector; for point and global lights it is the nominal aim.
    pub direction: Vec3,
    pub intensity: f64,
}

impl LightSpec {
    pub const DEFAULT_GLOBAL_INTENSITY: f64 = 0.8;

    pub fn global(id: impl Into<String>, intensity: f64) -> Self {
        Self {
            id: id.into(),
            kind: LightKind::Global,
            position: Vec3::ZERO,
            direction: -Vec3::Y,
            intensity: intensity.clamp(0.0, 1.0),
        }
    }

    pub fn point(id: impl Into<String>, position: Vec3, intensity: f64) -> Self {
        Self {
            id: id.into(),
            kind: LightKind::Point,
            position,
            direction: -Vec3::Y,
            intensity: intensity.clamp(0.0, 1.0),
        }
    }

    pub fn directional(id: impl Into<String>, direction: Vec3, intensity: f64) -> Self {
        Self {
            id: id.into(),
            kind: LightKind::Directional,
            position: Vec3::ZERO,
            direction: direction.normalize_or(-Vec3::Y),
            intensity: intensity.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomConfig {
    /// Side of the square floor in meters.
    pub floor_extent: f64,
    pub grid_units: u32,
    pub wall_height: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            floor_extent: 6.0,
            grid_units: 300,
            wall_height: 3.0,
        }
    }
}

impl RoomConfig {
    pub fn meters_per_unit(&self) -> f64 {
        self.floor_extent / self.grid_units as f64
    }

    pub fn half_extent(&self) -> f64 {
        self.floor_extent * 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub avatars: Vec<AvatarInstance>,
    pub lights: Vec<LightSpec>,
    pub camera: CameraSpec,
    pub room: RoomConfig,
    pub prompt: String,
    pub version: u64,
}

impl Default for Scene {
    fn default() -> Self {
        Self::new(String::new(), RoomConfig::default())
    }
}

impl Scene {
    pub fn new(prompt: impl Into<String>, room: RoomConfig) -> Self {
        Self {
            objects: Vec::new(),
            avatars: Vec::new(),
            lights: Vec::new(),
            camera: default_camera(&room),
            room,
            prompt: prompt.into(),
            version: 0,
        }
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn avatar(&self, id: &str) -> Option<&AvatarInstance> {
        self.avatars.iter().find(|a| a.id == id)
    }

    pub fn light(&self, id: &str) -> Option<&LightSpec> {
        self.lights.iter().find(|l| l.id == id)
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.object(id).is_some() || self.avatar(id).is_some() || self.light(id).is_some()
    }

    /// First id of the form `{stem}_{n}` not yet used in the scene.
    pub fn fresh_id(&self, stem: &str) -> String {
        let stem: String = stem
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect();
        (1..)
            .map(|n| format!("{stem}_{n}"))
            .find(|id| !self.contains_id(id))
            .expect("unbounded id space")
    }
}

/// Camera at the room's front edge, 1.6 m high, facing the room center.
pub fn default_camera(room: &RoomConfig) -> CameraSpec {
    CameraSpec::looking_at(Vec3::new(0.0, 1.6, room.half_extent()), Vec3::new(0.0, 0.4, 0.0))
}
