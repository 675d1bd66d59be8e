//! Prompt to arranged scene: registration, retrieval, layout, realization,
//! affordances, lighting and camera.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use canvas3d_core::assets::{AssetIndex, AssetRecord, CategoryRequest, Embedder, HashingEmbedder, MeshStore, TableEmbedder, demo_index, infer_categories, retrieve_models};
use canvas3d_core::avatar::{AvatarInstance, PoseTable, Rig, apply_prefab_pose};
use canvas3d_core::interaction::{AffordanceRules, AffordanceSet, ObjectClass, PlaneLock, assign_affordances, classify_object, ensure_global_light};
use canvas3d_core::llm::Llm;
use canvas3d_core::math::Vec3;
use canvas3d_core::scene::{LightSpec, PlacementTag, RoomConfig, Scene, SceneObject, TransformTRS, load_scene, save_scene};
use canvas3d_core::synthesis::{LayoutAsset, LayoutItem, LayoutSource, Placement, RealizeOptions, instance_labels, plan_layout, realize_layout};

use crate::SessionError;
use crate::session::SceneSession;

/// Intensity of the point light attached to a lamp.
pub const LAMP_INTENSITY: f64 = 0.6;

/// Everything a session draws on besides the LLM.
pub struct Assets {
    pub index: AssetIndex,
    pub embedder: Box<dyn Embedder + Send + Sync>,
    pub meshes: MeshStore,
    pub rules: AffordanceRules,
    pub room: RoomConfig,
}

impl std::fmt::Debug for Assets {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Assets")
            .field("records", &self.index.records().len())
            .field("room", &self.room)
            .finish_non_exhaustive()
    }
}

impl Assets {
    /// Bundled demo index with procedural meshes.
    pub fn demo() -> Self {
        let index = demo_index();
        Self {
            embedder: Box::new(HashingEmbedder::new(index.embedding_dim())),
            meshes: MeshStore::procedural(&index),
            index,
            rules: AffordanceRules::shipped(),
            room: RoomConfig::default(),
        }
    }

    /// An index directory: `index.jsonl` + `embeddings.f32`, optional
    /// `meshes/` and `query_embeddings.jsonl`. Without the latter, queries
    /// use the hashing embedder.
    pub fn load_dir(dir: &Path) -> Result<Self, SessionError> {
        let index = AssetIndex::load_dir(dir).map_err(|e| SessionError::Index(e.to_string()))?;
        let mesh_dir = dir.join("meshes");
        let meshes = if mesh_dir.is_dir() {
            MeshStore::with_mesh_dir(&index, &mesh_dir).map_err(|(id, e)| SessionError::Index(format!("mesh `{id}`: {e}")))?
        } else {
            MeshStore::procedural(&index)
        };
        let table = dir.join("query_embeddings.jsonl");
        let embedder: Box<dyn Embedder + Send + Sync> = if table.exists() {
            let text = std::fs::read_to_string(&table)?;
            Box::new(TableEmbedder::from_jsonl(index.embedding_dim(), &text).map_err(SessionError::Index)?)
        } else {
            Box::new(HashingEmbedder::new(index.embedding_dim()))
        };
        Ok(Self {
            index,
            embedder,
            meshes,
            rules: AffordanceRules::shipped(),
            room: RoomConfig::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub requests: Vec<CategoryRequest>,
    /// Categories named by the LLM that the index lacks.
    pub dropped: Vec<String>,
    pub layout_source: LayoutSource,
    pub layout_rejections: Vec<String>,
}

fn count_word(w: &str) -> Option<u32> {
    let n = match w {
        "a" | "an" | "one" | "single" => 1,
        "two" | "pair" | "couple" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        _ => return w.parse().ok().filter(|n| (1..=20).contains(n)),
    };
    Some(n)
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Offline registration: index categories named in the prompt (singular or
/// plural), counted from a preceding number word, closed under the relation
/// graph.
pub fn keyword_categories(prompt: &str, index: &AssetIndex) -> Vec<CategoryRequest> {
    let w = words(prompt);
    let mut found: Vec<(usize, CategoryRequest)> = Vec::new();
    for category in index.categories() {
        let cw = words(category);
        if cw.is_empty() {
            continue;
        }
        let last = cw.len() - 1;
        let mut first = None;
        let mut count = 0u32;
        for start in 0..w.len().saturating_sub(last) {
            let head_ok = (0..last).all(|k| w[start + k] == cw[k]);
            let tail = &w[start + last];
            let plural = *tail == format!("{}s", cw[last]) || *tail == format!("{}es", cw[last]);
            if !head_ok || !(*tail == cw[last] || plural) {
                continue;
            }
            first.get_or_insert(start);
            let stated = start.checked_sub(1).and_then(|p| count_word(&w[p]));
            count = count.max(stated.unwrap_or(if plural { 2 } else { 1 }));
        }
        if let Some(at) = first {
            found.push((at, CategoryRequest::new(category.clone(), count)));
        }
    }
    found.sort_by_key(|(at, _)| *at);
    let requests: Vec<CategoryRequest> = found.into_iter().map(|(_, r)| r).collect();
    index.relation_graph().close(&requests)
}

fn top_center(o: &SceneObject) -> Vec3 {
    let b = o.world_bounds();
    Vec3::new(b.center().x, b.max.y, b.center().z)
}

/// Affordances for a placed object; wall items get their actual wall normal.
pub(crate) fn object_affordances(class: ObjectClass, tags: &canvas3d_core::scene::TagSet, category: &str, transform: &TransformTRS, rules: &AffordanceRules) -> Result<AffordanceSet, SessionError> {
    let mut a = assign_affordances(class, tags, category, rules).map_err(|e| SessionError::Affordance(e.to_string()))?;
    if let Some(PlaneLock::Wall { .. }) = a.plane_locked {
        let normal = transform.rotation.rotate(Vec3::Z);
        let normal = Vec3::new(normal.x.round(), 0.0, normal.z.round()).normalize_or(Vec3::Z);
        a.plane_locked = Some(PlaneLock::Wall { normal });
        a.translate_axes = AffordanceSet::wall_axes(normal);
    }
    Ok(a)
}

/// Builds a scene object (and its lamp light) for an asset at `transform`.
pub(crate) fn build_object(
    scene: &Scene,
    record: &AssetRecord,
    meshes: &MeshStore,
    transform: TransformTRS,
    requested: &BTreeSet<String>,
    rules: &AffordanceRules,
) -> Result<(SceneObject, Option<LightSpec>), SessionError> {
    let mesh = meshes.get(&record.id).ok_or_else(|| SessionError::Index(format!("no mesh for `{}`", record.id)))?;
    let class = classify_object(&record.category, &record.tags, requested, rules);
    let affordances = object_affordances(class, &record.tags, &record.category, &transform, rules)?;
    let id = scene.fresh_id(&record.category);
    let mut object = SceneObject {
        id: id.clone(),
        category: record.category.clone(),
        mesh_ref: record.id.clone(),
        transform,
        initial_transform: transform,
        local_bounds: mesh.bounds(),
        object_class: class,
        affordances,
        tags: record.tags.clone(),
        light_id: None,
    };
    let light = if record.tags.contains(&PlacementTag::Illumination) {
        let light_id = format!("{id}_light");
        object.light_id = Some(light_id.clone());
        Some(LightSpec::point(light_id, top_center(&object), LAMP_INTENSITY))
    } else {
        None
    };
    Ok((object, light))
}

pub(crate) fn build_avatar(scene: &Scene, category: &str, placement: &Placement, rules: &AffordanceRules) -> Result<AvatarInstance, SessionError> {
    let affordances = assign_affordances(ObjectClass::HumanAvatar, &placement.tags, category, rules).map_err(|e| SessionError::Affordance(e.to_string()))?;
    let mut root = placement.transform;
    root.translation.y = 0.0;
    root.scale = Vec3::ONE;
    let a = AvatarInstance::new(scene.fresh_id(category), Rig::humanoid(), root, affordances);
    apply_prefab_pose(&a, "stand", &PoseTable::shipped()).map_err(|e| SessionError::Affordance(e.to_string()))
}

/// Runs the whole synthesis pipeline. Without an LLM, categories come from
/// [`keyword_categories`] and the layout from the fallback solver.
pub fn create_session(prompt: &str, assets: &Assets, llm: Option<&dyn Llm>, seed: u64) -> Result<SceneSession, SessionError> {
    if prompt.trim().is_empty() {
        return Err(SessionError::EmptyPrompt);
    }
    let index = &assets.index;
    let (requests, dropped) = match llm {
        Some(llm) => {
            let inf = infer_categories(prompt, index, llm)?;
            (inf.requests, inf.dropped)
        }
        None => (keyword_categories(prompt, index), Vec::new()),
    };
    if requests.is_empty() {
        return Err(SessionError::NoCategories);
    }
    let records = retrieve_models(prompt, &requests, index, assets.embedder.as_ref())?;

    let mut by_label: BTreeMap<String, AssetRecord> = BTreeMap::new();
    let mut labels = Vec::new();
    let mut sizes = BTreeMap::new();
    let mut rest = records.as_slice();
    for r in &requests {
        let (mine, tail) = rest.split_at(r.count as usize);
        rest = tail;
        let item = LayoutItem::from_records(mine).expect("count >= 1");
        sizes.insert(r.category.clone(), item);
        for (label, rec) in instance_labels(&r.category, r.count).into_iter().zip(mine) {
            labels.push(label.clone());
            by_label.insert(label, rec.clone());
        }
    }

    let outcome = plan_layout(prompt, &requests, &sizes, index.relation_graph(), &assets.room, llm, seed)?;
    let mut layout_assets = BTreeMap::new();
    for (label, rec) in &by_label {
        let mesh = assets.meshes.get(&rec.id).ok_or_else(|| SessionError::Index(format!("no mesh for `{}`", rec.id)))?;
        layout_assets.insert(
            label.clone(),
            LayoutAsset {
                asset_id: rec.id.clone(),
                category: rec.category.clone(),
                local_bounds: mesh.bounds(),
                tags: rec.tags.clone(),
            },
        );
    }
    let placements = realize_layout(&outcome.plan, &layout_assets, &assets.room, &RealizeOptions::default())?;

    let requested: BTreeSet<String> = requests.iter().map(|r| r.category.clone()).collect();
    let mut scene = Scene::new(prompt, assets.room);
    for label in &labels {
        let p = placements.iter().find(|p| &p.label == label).ok_or_else(|| SessionError::Index(format!("layout lost `{label}`")))?;
        let rec = &by_label[label];
        match classify_object(&rec.category, &rec.tags, &requested, &assets.rules) {
            ObjectClass::HumanAvatar => {
                let a = build_avatar(&scene, &rec.category, p, &assets.rules)?;
                scene.avatars.push(a);
            }
            _ => {
                let (object, light) = build_object(&scene, rec, &assets.meshes, p.transform, &requested, &assets.rules)?;
                scene.objects.push(object);
                scene.lights.extend(light);
            }
        }
    }
    let scene = ensure_global_light(&scene);
    // Canonical persisted form.
    let scene = load_scene(&save_scene(&scene)).map_err(SessionError::Schema)?;

    let report = SessionReport {
        requests,
        dropped,
        layout_source: outcome.source,
        layout_rejections: outcome.rejections,
    };
    Ok(SceneSession::new(session_id(prompt, seed), scene, assets.meshes.clone(), report))
}

/// Stable id from prompt and seed.
pub fn session_id(prompt: &str, seed: u64) -> String {
    let h = prompt
        .bytes()
        .chain(seed.to_le_bytes())
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    format!("{:012x}", h & 0xffff_ffff_ffff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keywords_and_counts() {
        let index = demo_index();
        let r = keyword_categories("Two chairs around a table with a laptop and some pillows", &index);
        let got: Vec<(&str, u32)> = r.iter().map(|r| (r.category.as_str(), r.count)).collect();
        assert_eq!(got, vec![("chair", 2), ("table", 1), ("laptop", 1), ("bed", 1), ("pillow", 2)]);
        let r = keyword_categories("a laptop", &index);
        assert_eq!(r.iter().map(|r| r.category.as_str()).collect::<Vec<_>>(), ["table", "laptop"]);
        assert!(keyword_categories("nothing relevant", &index).is_empty());
        let r = keyword_categories("three trash bins", &index);
        assert_eq!(r, vec![CategoryRequest::new("trash bin", 3)]);
    }

    #[test]
    fn ids_are_stable() {
        assert_eq!(session_id("x", 1), session_id("x", 1));
        assert_ne!(session_id("x", 1), session_id("x", 2));
        assert_eq!(session_id("x", 1).len(), 12);
    }
}
