//! A live scene with its accepted-edit log.

use std::collections::BTreeSet;

use canvas3d_clients::{ConditionKind, GenClient, GenError, GenerationRequest, ImageEntry, ImageLibrary, ModelDescriptor};
use canvas3d_core::assets::{CategoryRequest, Mesh, MeshFormat, MeshStore, load_mesh, retrieve_models};
use canvas3d_core::encode::{ConditionBundle, EncodeOptions, encode_all};
use canvas3d_core::interaction::{AffordanceSet, ObjectClass, PlaneLock, assign_affordances};
use canvas3d_core::math::Vec3;
use canvas3d_core::scene::{
    Aabb, LightSpec, ObjectAction, PlacementTag, Rotation, RotationAxis, Scene, SceneObject, TagSet, TransformTRS, apply_action, insert_object,
    light_from_value, light_to_value, object_from_value, object_to_value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::SessionError;
use crate::pipeline::{Assets, SessionReport, build_object, keyword_categories};

/// One accepted edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryEntry {
    Action {
        target: String,
        action: ObjectAction,
    },
    Insert {
        object: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        light: Option<Value>,
        /// OBJ text of an uploaded mesh.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mesh: Option<String>,
    },
}

/// What to add to a running scene.
#[derive(Debug, Clone, PartialEq)]
pub enum AddObject {
    Prompt(String),
    Mesh {
        category: Option<String>,
        format: MeshFormat,
        bytes: Vec<u8>,
    },
}

#[derive(Debug, Clone)]
pub struct SceneSession {
    pub id: String,
    pub initial: Scene,
    pub scene: Scene,
    pub history: Vec<HistoryEntry>,
    /// Index meshes plus uploads.
    pub meshes: MeshStore,
    pub report: Option<SessionReport>,
}

const ROOM_EPS: f64 = 1e-9;

/// Whether `b` lies inside the room box.
fn in_room(scene: &Scene, b: &Aabb) -> bool {
    let h = scene.room.half_extent() + ROOM_EPS;
    b.min.x >= -h && b.max.x <= h && b.min.z >= -h && b.max.z <= h && b.min.y >= -ROOM_EPS && b.max.y <= scene.room.wall_height + ROOM_EPS
}

/// Floor footprints that block new items.
fn floor_blockers(scene: &Scene) -> Vec<Aabb> {
    let objects = scene
        .objects
        .iter()
        .filter(|o| !o.has_tag(PlacementTag::Accessory) && !o.has_tag(PlacementTag::WallMounted))
        .map(SceneObject::world_bounds);
    objects.chain(scene.avatars.iter().map(|a| a.world_bounds())).collect()
}

/// Nearest 0.1 m lattice point to the room center where `local` fits
/// without touching other floor items.
fn free_floor_spot(scene: &Scene, local: &Aabb) -> Vec3 {
    let blockers = floor_blockers(scene);
    let h = scene.room.half_extent();
    let steps = (h / 0.1).floor() as i64;
    let mut cells: Vec<(i64, i64)> = (-steps..=steps).flat_map(|i| (-steps..=steps).map(move |k| (i, k))).collect();
    cells.sort_by_key(|&(i, k)| (i * i + k * k, i, k));
    for (i, k) in cells {
        let at = Vec3::new(i as f64 * 0.1, 0.0, k as f64 * 0.1);
        let b = Aabb::new(local.min + at, local.max + at);
        let inside = b.min.x >= -h && b.max.x <= h && b.min.z >= -h && b.max.z <= h;
        if inside && !blockers.iter().any(|o| o.overlaps_xz(&b)) {
            return at;
        }
    }
    Vec3::ZERO
}

impl SceneSession {
    pub fn new(id: impl Into<String>, initial: Scene, meshes: MeshStore, report: SessionReport) -> Self {
        Self {
            id: id.into(),
            scene: initial.clone(),
            initial,
            history: Vec::new(),
            meshes,
            report: Some(report),
        }
    }

    /// Validates through `apply_action`; only accepted edits are logged.
    pub fn apply(&mut self, target: &str, action: &ObjectAction) -> Result<&Scene, SessionError> {
        self.scene = apply_action(&self.scene, target, action)?;
        self.history.push(HistoryEntry::Action {
            target: target.to_string(),
            action: action.clone(),
        });
        Ok(&self.scene)
    }

    fn insert(&mut self, object: &SceneObject, light: Option<&LightSpec>, mesh: Option<&Mesh>) -> Result<String, SessionError> {
        let entry = HistoryEntry::Insert {
            object: object_to_value(object),
            light: light.map(light_to_value),
            mesh: mesh.map(Mesh::to_obj),
        };
        self.scene = apply_entry(&self.scene, &entry, &mut self.meshes)?;
        self.history.push(entry);
        Ok(object.id.clone())
    }

    /// Adds an index asset named by `prompt`, or an uploaded mesh. Returns
    /// the new object id.
    pub fn add_object(&mut self, request: AddObject, assets: &Assets) -> Result<String, SessionError> {
        match request {
            AddObject::Prompt(text) => self.add_from_prompt(&text, assets),
            AddObject::Mesh { category, format, bytes } => self.add_upload(category.as_deref(), format, &bytes, assets),
        }
    }

    fn add_from_prompt(&mut self, text: &str, assets: &Assets) -> Result<String, SessionError> {
        let index = &assets.index;
        let norm = text.trim().to_lowercase();
        let category = if index.has_category(&norm) {
            Some(norm.clone())
        } else {
            // Skip prerequisites the closure added.
            let found: Vec<CategoryRequest> = keyword_categories(&norm, index);
            found.iter().find(|r| norm.contains(r.category.as_str())).map(|r| r.category.clone())
        };
        let category = category
            .filter(|c| !assets.rules.is_avatar_category(c))
            .ok_or_else(|| SessionError::NoMatchingAsset(text.to_string()))?;
        let record = retrieve_models(text, &[CategoryRequest::new(category.clone(), 1)], index, assets.embedder.as_ref())?.remove(0);
        let local = self.meshes.get(&record.id).ok_or_else(|| SessionError::Index(format!("no mesh for `{}`", record.id)))?.bounds();

        let transform = if record.tags.contains(&PlacementTag::WallMounted) {
            // Back wall, facing into the room.
            let h = self.scene.room.half_extent();
            let at = Vec3::new(0.0, 1.5 - local.center().y, -h - local.min.z);
            TransformTRS::new(at, Rotation::IDENTITY, Vec3::ONE)
        } else {
            let supporter = (record.tags.contains(&PlacementTag::Accessory))
                .then(|| {
                    let prereq: BTreeSet<&str> = index.relation_graph().prerequisites(&category).collect();
                    self.scene.objects.iter().find(|o| prereq.contains(o.category.as_str()))
                })
                .flatten();
            let at = match supporter {
                Some(s) => {
                    let b = s.world_bounds();
                    Vec3::new(b.center().x, b.max.y - local.min.y, b.center().z)
                }
                None => free_floor_spot(&self.scene, &local),
            };
            TransformTRS::new(at, Rotation::IDENTITY, Vec3::ONE)
        };
        let mut requested: BTreeSet<String> = self.scene.objects.iter().map(|o| o.category.clone()).collect();
        requested.insert(category);
        let (object, light) = build_object(&self.scene, &record, &self.meshes, transform, &requested, &assets.rules)?;
        self.insert(&object, light.as_ref(), None)
    }

    fn add_upload(&mut self, category: Option<&str>, format: MeshFormat, bytes: &[u8], assets: &Assets) -> Result<String, SessionError> {
        let parsed = load_mesh(bytes, format)?;
        // Stored as OBJ text; reparse so the live copy matches a replayed one.
        let mesh = load_mesh(parsed.to_obj().as_bytes(), MeshFormat::Obj)?;
        let category = category.map(str::trim).filter(|c| !c.is_empty()).unwrap_or("custom").to_lowercase();
        let id = self.scene.fresh_id(&category);
        let mesh_ref = format!("upload:{id}");
        let local = mesh.bounds();
        let mut at = free_floor_spot(&self.scene, &local);
        at.y = -local.min.y;
        let tags: TagSet = [PlacementTag::Grounded].into();
        let transform = TransformTRS::new(at, Rotation::IDENTITY, Vec3::ONE);
        let affordances: AffordanceSet =
            assign_affordances(ObjectClass::UserSelected, &tags, &category, &assets.rules).map_err(|e| SessionError::Affordance(e.to_string()))?;
        let object = SceneObject {
            id,
            category,
            mesh_ref,
            transform,
            initial_transform: transform,
            local_bounds: local,
            object_class: ObjectClass::UserSelected,
            affordances,
            tags,
            light_id: None,
        };
        self.insert(&object, None, Some(&mesh))
    }

    /// Jitters every user-selected object along its permitted axes: up to
    /// `magnitude`·0.5 m per translation axis and `magnitude`·45° of yaw.
    /// Moves that would leave the room are clamped; turns that would are
    /// skipped. Returns the number of edits applied.
    pub fn randomize_objects(&mut self, magnitude: f64, seed: u64) -> Result<usize, SessionError> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(SessionError::InvalidMagnitude(magnitude));
        }
        if magnitude == 0.0 {
            return Ok(0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<String> = self
            .scene
            .objects
            .iter()
            .filter(|o| o.object_class == ObjectClass::UserSelected)
            .map(|o| o.id.clone())
            .collect();
        let mut applied = 0;
        for id in ids {
            let yaw: f64 = rng.random_range(-1.0..=1.0) * magnitude * 45.0;
            let jitter = Vec3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)) * (magnitude * 0.5);
            let aff = self.scene.object(&id).expect("listed above").affordances.clone();

            if aff.rotate_axes.contains(&RotationAxis::Yaw) && yaw != 0.0 {
                let action = ObjectAction::Rotate { axis: RotationAxis::Yaw, degrees: yaw };
                if let Ok(next) = apply_action(&self.scene, &id, &action)
                    && in_room(&next, &next.object(&id).expect("still there").world_bounds())
                {
                    self.scene = next;
                    self.history.push(HistoryEntry::Action { target: id.clone(), action });
                    applied += 1;
                }
            }

            let b = self.scene.object(&id).expect("listed above").world_bounds();
            let h = self.scene.room.half_extent();
            let clamp = |d: f64, lo: f64, hi: f64| if lo <= hi { d.clamp(lo.min(0.0), hi.max(0.0)) } else { 0.0 };
            let mut delta = Vec3::ZERO;
            for axis in &aff.translate_axes {
                use canvas3d_core::interaction::Axis;
                match axis {
                    Axis::X => delta.x = clamp(jitter.x, -h - b.min.x, h - b.max.x),
                    Axis::Y => delta.y = clamp(jitter.y, -b.min.y, self.scene.room.wall_height - b.max.y),
                    Axis::Z => delta.z = clamp(jitter.z, -h - b.min.z, h - b.max.z),
                }
            }
            if let Some(PlaneLock::Wall { normal }) = aff.plane_locked {
                delta -= normal * delta.dot(normal);
            }
            if delta != Vec3::ZERO {
                let action = ObjectAction::Translate { delta };
                if let Ok(next) = apply_action(&self.scene, &id, &action) {
                    self.scene = next;
                    self.history.push(HistoryEntry::Action { target: id.clone(), action });
                    applied += 1;
                }
            }
        }
        Ok(applied)
    }

    pub fn encode(&self, options: &EncodeOptions) -> Result<ConditionBundle, SessionError> {
        Ok(encode_all(&self.scene, &self.meshes, options)?)
    }

    /// Encodes the current scene, sends the chosen conditions to `model` and
    /// files the result in `library`. An unsupported condition fails before
    /// anything is encoded or sent.
    pub fn generate(
        &self,
        prompt: &str,
        kinds: &[ConditionKind],
        model: &ModelDescriptor,
        client: &GenClient,
        seed: Option<u64>,
        library: &mut ImageLibrary,
    ) -> Result<ImageEntry, SessionError> {
        if let Some(&condition) = kinds.iter().find(|k| !model.supports(**k)) {
            return Err(GenError::UnsupportedCondition {
                model: model.id.clone(),
                condition,
            }
            .into());
        }
        let options = EncodeOptions {
            mesh_format: kinds.contains(&ConditionKind::Mesh).then_some(MeshFormat::Obj),
            ..EncodeOptions::default()
        };
        let bundle = self.encode(&options)?;
        let prompt = if prompt.trim().is_empty() { self.scene.prompt.as_str() } else { prompt };
        let request = GenerationRequest::from_bundle(prompt, &bundle, kinds, model.clone(), seed)?;
        let image = client.generate_image(&request)?;
        Ok(library.add(&image, &request)?.clone())
    }

    /// Rebuilds a session from its start state and log.
    pub fn restore(id: impl Into<String>, initial: Scene, history: Vec<HistoryEntry>, base_meshes: MeshStore) -> Result<Self, SessionError> {
        let mut meshes = base_meshes;
        let scene = replay(&initial, &history, &mut meshes)?;
        Ok(Self {
            id: id.into(),
            initial,
            scene,
            history,
            meshes,
            report: None,
        })
    }
}

fn apply_entry(scene: &Scene, entry: &HistoryEntry, meshes: &mut MeshStore) -> Result<Scene, SessionError> {
    match entry {
        HistoryEntry::Action { target, action } => Ok(apply_action(scene, target, action)?),
        HistoryEntry::Insert { object, light, mesh } => {
            let object = object_from_value(object)?;
            let light = light.as_ref().map(light_from_value).transpose()?;
            let next = insert_object(scene, object.clone(), light)?;
            if let Some(obj) = mesh {
                meshes.insert(object.mesh_ref.clone(), load_mesh(obj.as_bytes(), MeshFormat::Obj)?);
            }
            Ok(next)
        }
    }
}

/// Applies `history` to `initial`; uploaded meshes are added to `meshes`.
pub fn replay(initial: &Scene, history: &[HistoryEntry], meshes: &mut MeshStore) -> Result<Scene, SessionError> {
    let mut scene = initial.clone();
    for entry in history {
        scene = apply_entry(&scene, entry, meshes)?;
    }
    Ok(scene)
}
