//! Scene documents: UTF-8 JSON, keys sorted, reals kept to 9 significant
//! digits, rotations as yaw/pitch/roll degrees.
//!
//! `save(load(save(s)))` is byte-identical to `save(s)`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{Aabb, CameraSpec, LightKind, LightSpec, RoomConfig, Rotation, Scene, SceneObject, TagSet, TransformTRS};
use crate::avatar::{AvatarInstance, Joint, JointLimits, Rig};
use crate::interaction::{AffordanceSet, ObjectClass};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("schema violation at `{path}`: {message}")]
pub struct SchemaViolation {
    pub path: String,
    pub message: String,
}

impl SchemaViolation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EulerDoc {
    yaw: f64,
    pitch: f64,
    roll: f64,
}

impl From<Rotation> for EulerDoc {
    fn from(r: Rotation) -> Self {
        let (yaw, pitch, roll) = r.to_euler_deg();
        Self { yaw, pitch, roll }
    }
}

impl From<&EulerDoc> for Rotation {
    fn from(e: &EulerDoc) -> Self {
        Rotation::from_euler_deg(e.yaw, e.pitch, e.roll)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformDoc {
    translation: Vec3,
    rotation: EulerDoc,
    scale: Vec3,
}

impl From<&TransformTRS> for TransformDoc {
    fn from(t: &TransformTRS) -> Self {
        Self {
            translation: t.translation,
            rotation: t.rotation.into(),
            scale: t.scale,
        }
    }
}

impl From<&TransformDoc> for TransformTRS {
    fn from(t: &TransformDoc) -> Self {
        TransformTRS::new(t.translation, (&t.rotation).into(), t.scale)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomDoc {
    floor_extent: f64,
    grid_units: u32,
    wall_height: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDoc {
    position: Vec3,
    rotation: EulerDoc,
    vertical_fov: f64,
    image_width: u32,
    image_height: u32,
    near: f64,
    far: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightDoc {
    id: String,
    kind: LightKind,
    position: Vec3,
    direction: Vec3,
    intensity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: String,
    category: String,
    mesh_ref: String,
    transform: TransformDoc,
    initial_transform: TransformDoc,
    local_bounds: Aabb,
    object_class: ObjectClass,
    affordances: AffordanceSet,
    tags: TagSet,
    #[serde(default)]
    light_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    parent: Option<String>,
    rest_offset: Vec3,
    rotation: EulerDoc,
    #[serde(default)]
    limits: Option<JointLimits>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AvatarDoc {
    id: String,
    root_transform: TransformDoc,
    initial_root_transform: TransformDoc,
    prefab_pose: Option<String>,
    affordances: AffordanceSet,
    joints: Vec<JointDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    version: u64,
    prompt: String,
    room: RoomDoc,
    camera: CameraDoc,
    lights: Vec<LightDoc>,
    objects: Vec<ObjectDoc>,
    avatars: Vec<AvatarDoc>,
}

const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds to 9 significant digits; magnitudes below 1e-9 become 0.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v.abs() < 1e-9 {
        return if v.is_finite() { 0.0 } else { v };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().expect("formatted float parses");
    if r == 0.0 { 0.0 } else { r }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn to_doc(scene: &Scene) -> SceneDoc {
    let c = &scene.camera;
    SceneDoc {
        version: scene.version,
        prompt: scene.prompt.clone(),
        room: RoomDoc {
            floor_extent: scene.room.floor_extent,
            grid_units: scene.room.grid_units,
            wall_height: scene.room.wall_height,
        },
        camera: CameraDoc {
            position: c.position,
            rotation: c.rotation.into(),
            vertical_fov: c.vertical_fov,
            image_width: c.image_width,
            image_height: c.image_height,
            near: c.near,
            far: c.far,
        },
        lights: scene
            .lights
            .iter()
            .map(|l| LightDoc {
                id: l.id.clone(),
                kind: l.kind,
                position: l.position,
                direction: l.direction,
                intensity: l.intensity,
            })
            .collect(),
        objects: scene
            .objects
            .iter()
            .map(|o| ObjectDoc {
                id: o.id.clone(),
                category: o.category.clone(),
                mesh_ref: o.mesh_ref.clone(),
                transform: (&o.transform).into(),
                initial_transform: (&o.initial_transform).into(),
                local_bounds: o.local_bounds,
                object_class: o.object_class,
                affordances: o.affordances.clone(),
                tags: o.tags.clone(),
                light_id: o.light_id.clone(),
            })
            .collect(),
        avatars: scene
            .avatars
            .iter()
            .map(|a| AvatarDoc {
                id: a.id.clone(),
                root_transform: (&a.root_transform).into(),
                initial_root_transform: (&a.initial_root_transform).into(),
                prefab_pose: a.prefab_pose.clone(),
                affordances: a.affordances.clone(),
                joints: a
                    .rig
                    .joints()
                    .iter()
                    .map(|j| JointDoc {
                        name: j.name.clone(),
                        parent: j.parent.clone(),
                        rest_offset: j.rest_offset,
                        rotation: j.local_rotation.into(),
                        limits: j.limits,
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Serializes a scene to its canonical document bytes.
pub fn save_scene(scene: &Scene) -> Vec<u8> {
    let mut value = serde_json::to_value(to_doc(scene)).expect("scene documents always serialize");
    round_floats(&mut value);
    let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
    out.push(b'\n');
    out
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// Parses and validates a scene document.
pub fn load_scene(bytes: &[u8]) -> Result<Scene, SchemaViolation> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: SceneDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let path = match missing_field(&message) {
            Some(field) if path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        SchemaViolation::new(path, message)
    })?;
    from_doc(doc)
}

fn finite(path: &str, v: Vec3) -> Result<Vec3, SchemaViolation> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SchemaViolation::new(path, "non-finite vector"))
    }
}

fn transform(path: &str, t: &TransformDoc) -> Result<TransformTRS, SchemaViolation> {
    finite(&format!("{path}.translation"), t.translation)?;
    let s = finite(&format!("{path}.scale"), t.scale)?;
    if s.x <= 0.0 || s.y <= 0.0 || s.z <= 0.0 {
        return Err(SchemaViolation::new(format!("{path}.scale"), "scale components must be > 0"));
    }
    let r = &t.rotation;
    if !(r.yaw.is_finite() && r.pitch.is_finite() && r.roll.is_finite()) {
        return Err(SchemaViolation::new(format!("{path}.rotation"), "non-finite angle"));
    }
    Ok(t.into())
}

fn light_from_doc(path: &str, l: &LightDoc) -> Result<LightSpec, SchemaViolation> {
    if !(0.0..=1.0).contains(&l.intensity) {
        return Err(SchemaViolation::new(format!("{path}.intensity"), "must lie in [0, 1]"));
    }
    let direction = finite(&format!("{path}.direction"), l.direction)?
        .try_normalize()
        .ok_or_else(|| SchemaViolation::new(format!("{path}.direction"), "zero direction"))?;
    Ok(LightSpec {
        id: l.id.clone(),
        kind: l.kind,
        position: finite(&format!("{path}.position"), l.position)?,
        direction,
        intensity: l.intensity,
    })
}

fn object_from_doc(path: &str, o: &ObjectDoc) -> Result<SceneObject, SchemaViolation> {
    if !o.local_bounds.is_valid() {
        return Err(SchemaViolation::new(format!("{path}.local_bounds"), "min must be <= max"));
    }
    Ok(SceneObject {
        id: o.id.clone(),
        category: o.category.clone(),
        mesh_ref: o.mesh_ref.clone(),
        transform: transform(&format!("{path}.transform"), &o.transform)?,
        initial_transform: transform(&format!("{path}.initial_transform"), &o.initial_transform)?,
        local_bounds: o.local_bounds,
        object_class: o.object_class,
        affordances: o.affordances.clone(),
        tags: o.tags.clone(),
        light_id: o.light_id.clone(),
    })
}

fn parse_fragment<T: serde::de::DeserializeOwned>(value: &Value) -> Result<T, SchemaViolation> {
    serde_path_to_error::deserialize(value).map_err(|e| SchemaViolation::new(e.path().to_string(), e.inner().to_string()))
}

/// One object in scene-document form, rounded the same way.
pub fn object_to_value(object: &SceneObject) -> Value {
    let doc = ObjectDoc {
        id: object.id.clone(),
        category: object.category.clone(),
        mesh_ref: object.mesh_ref.clone(),
        transform: (&object.transform).into(),
        initial_transform: (&object.initial_transform).into(),
        local_bounds: object.local_bounds,
        object_class: object.object_class,
        affordances: object.affordances.clone(),
        tags: object.tags.clone(),
        light_id: object.light_id.clone(),
    };
    let mut v = serde_json::to_value(doc).expect("object documents serialize");
    round_floats(&mut v);
    v
}

pub fn object_from_value(value: &Value) -> Result<SceneObject, SchemaViolation> {
    object_from_doc("object", &parse_fragment(value)?)
}

pub fn light_to_value(light: &LightSpec) -> Value {
    let doc = LightDoc {
        id: light.id.clone(),
        kind: light.kind,
        position: light.position,
        direction: light.direction,
        intensity: light.intensity,
    };
    let mut v = serde_json::to_value(doc).expect("light documents serialize");
    round_floats(&mut v);
    v
}

pub fn light_from_value(value: &Value) -> Result<LightSpec, SchemaViolation> {
    light_from_doc("light", &parse_fragment(value)?)
}

fn from_doc(doc: SceneDoc) -> Result<Scene, SchemaViolation> {
    let room = RoomConfig {
        floor_extent: doc.room.floor_extent,
        grid_units: doc.room.grid_units,
        wall_height: doc.room.wall_height,
    };
    if !(room.floor_extent > 0.0 && room.floor_extent.is_finite()) {
        return Err(SchemaViolation::new("room.floor_extent", "must be > 0"));
    }
    if room.grid_units == 0 {
        return Err(SchemaViolation::new("room.grid_units", "must be >= 1"));
    }
    let c = &doc.camera;
    let camera = CameraSpec {
        position: finite("camera.position", c.position)?,
        rotation: (&c.rotation).into(),
        vertical_fov: c.vertical_fov,
        image_width: c.image_width,
        image_height: c.image_height,
        near: c.near,
        far: c.far,
    };
    if !camera.is_valid() {
        return Err(SchemaViolation::new("camera", "requires 0 < fov < 180, size >= 1 and 0 < near < far"));
    }

    let mut ids = HashSet::new();
    let mut claim = |path: String, id: &str| {
        if ids.insert(id.to_string()) {
            Ok(())
        } else {
            Err(SchemaViolation::new(path, format!("duplicate id `{id}`")))
        }
    };

    let mut lights = Vec::with_capacity(doc.lights.len());
    for (i, l) in doc.lights.iter().enumerate() {
        let path = format!("lights[{i}]");
        claim(format!("{path}.id"), &l.id)?;
        lights.push(light_from_doc(&path, l)?);
    }

    let mut objects = Vec::with_capacity(doc.objects.len());
    for (i, o) in doc.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        claim(format!("{path}.id"), &o.id)?;
        if let Some(lid) = &o.light_id
            && !lights.iter().any(|l| &l.id == lid)
        {
            return Err(SchemaViolation::new(format!("{path}.light_id"), format!("unknown light `{lid}`")));
        }
        objects.push(object_from_doc(&path, o)?);
    }

    let mut avatars = Vec::with_capacity(doc.avatars.len());
    for (i, a) in doc.avatars.iter().enumerate() {
        let path = format!("avatars[{i}]");
        claim(format!("{path}.id"), &a.id)?;
        let joints = a
            .joints
            .iter()
            .enumerate()
            .map(|(k, j)| {
                Ok(Joint {
                    name: j.name.clone(),
                    parent: j.parent.clone(),
                    rest_offset: finite(&format!("{path}.joints[{k}].rest_offset"), j.rest_offset)?,
                    local_rotation: (&j.rotation).into(),
                    limits: j.limits,
                })
            })
            .collect::<Result<Vec<_>, SchemaViolation>>()?;
        let rig = Rig::new(joints).map_err(|e| SchemaViolation::new(format!("{path}.joints"), e.to_string()))?;
        avatars.push(AvatarInstance {
            id: a.id.clone(),
            rig,
            root_transform: transform(&format!("{path}.root_transform"), &a.root_transform)?,
            initial_root_transform: transform(&format!("{path}.initial_root_transform"), &a.initial_root_transform)?,
            prefab_pose: a.prefab_pose.clone(),
            affordances: a.affordances.clone(),
        });
    }

    Ok(Scene {
        objects,
        avatars,
        lights,
        camera,
        room,
        prompt: doc.prompt,
        version: doc.version,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{AffordanceRules, assign_affordances, ensure_global_light};
    use crate::scene::PlacementTag;
    use proptest::prelude::*;

    fn empty() -> Scene {
        ensure_global_light(&Scene::new("", RoomConfig::default()))
    }

    #[test]
    fn fragments_round_trip() {
        let tags: TagSet = [PlacementTag::Grounded].into();
        let aff = assign_affordances(ObjectClass::UserSelected, &tags, "table", &AffordanceRules::shipped()).unwrap();
        let t = TransformTRS::new(Vec3::new(0.1, 0.0, -1.0 / 3.0), Rotation::yaw_deg(30.0), Vec3::ONE);
        let o = SceneObject {
            id: "table_1".into(),
            category: "table".into(),
            mesh_ref: "table_01".into(),
            transform: t,
            initial_transform: t,
            local_bounds: Aabb::new(Vec3::new(-0.5, 0.0, -0.3), Vec3::new(0.5, 0.75, 0.3)),
            object_class: ObjectClass::UserSelected,
            affordances: aff,
            tags,
            light_id: None,
        };
        let v = object_to_value(&o);
        let back = object_from_value(&v).unwrap();
        assert_eq!(object_to_value(&back), v);
        assert!((back.transform.translation.z + 1.0 / 3.0).abs() < 1e-9);
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(object_from_value(&serde_json::from_str(&text).unwrap()).unwrap(), back);

        let l = LightSpec::point("p", Vec3::new(1.0, 2.0, 3.0), 0.25);
        assert_eq!(light_from_value(&light_to_value(&l)).unwrap(), l);
        let mut bad = light_to_value(&l);
        bad["intensity"] = Value::from(3.0);
        assert_eq!(light_from_value(&bad).unwrap_err().path, "light.intensity");
    }

    #[test]
    fn empty_scene_round_trips_bytewise() {
        let s = empty();
        let bytes = save_scene(&s);
        let loaded = load_scene(&bytes).unwrap();
        assert_eq!(save_scene(&loaded), bytes);
        assert_eq!(loaded.lights, s.lights);
        let text = String::from_utf8(bytes).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["avatars", "camera", "lights", "objects", "prompt", "room", "version"]);
    }

    #[test]
    fn missing_camera_is_reported_by_path() {
        let mut v: Value = serde_json::from_slice(&save_scene(&empty())).unwrap();
        v.as_object_mut().unwrap().remove("camera");
        let err = load_scene(&serde_json::to_vec(&v).unwrap()).unwrap_err();
        assert_eq!(err.path, "camera");
    }

    #[test]
    fn nested_errors_carry_paths() {
        let mut v: Value = serde_json::from_slice(&save_scene(&empty())).unwrap();
        v["lights"][0]["intensity"] = Value::from(2.0);
        assert_eq!(load_scene(&serde_json::to_vec(&v).unwrap()).unwrap_err().path, "lights[0].intensity");
        let mut v: Value = serde_json::from_slice(&save_scene(&empty())).unwrap();
        v["lights"][0].as_object_mut().unwrap().remove("kind");
        assert_eq!(load_scene(&serde_json::to_vec(&v).unwrap()).unwrap_err().path, "lights[0].kind");
        let mut v: Value = serde_json::from_slice(&save_scene(&empty())).unwrap();
        v["camera"]["near"] = Value::from(50.0);
        assert_eq!(load_scene(&serde_json::to_vec(&v).unwrap()).unwrap_err().path, "camera");
        assert!(load_scene(b"not json").is_err());
    }

    #[test]
    fn round_sig_examples() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333);
        assert_eq!(round_sig(123456789.4), 123456789.0);
        assert_eq!(round_sig(-2.5e-12), 0.0);
        assert_eq!(round_sig(round_sig(0.1 + 0.2)), round_sig(0.1 + 0.2));
    }

    fn object(i: usize, yaw: f64, pitch: f64, roll: f64, at: Vec3, scale: Vec3) -> SceneObject {
        let tags: TagSet = [PlacementTag::Grounded].into();
        let t = TransformTRS::new(at, Rotation::from_euler_deg(yaw, pitch, roll), scale);
        SceneObject {
            id: format!("obj_{i}"),
            category: "box".into(),
            mesh_ref: "box".into(),
            transform: t,
            initial_transform: TransformTRS::new(at * 0.5, Rotation::yaw_deg(yaw), Vec3::ONE),
            local_bounds: Aabb::new(Vec3::new(-0.5, 0.0, -0.25), Vec3::new(0.5, 0.8, 0.25)),
            object_class: ObjectClass::UserSelected,
            affordances: assign_affordances(ObjectClass::UserSelected, &tags, "box", &AffordanceRules::shipped()).unwrap(),
            tags,
            light_id: None,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn save_load_save_is_stable(
            objs in proptest::collection::vec(
                (-180.0..180.0f64, -89.0..89.0f64, -180.0..180.0f64, -3.0..3.0f64, 0.0..2.0f64, -3.0..3.0f64, 0.2..3.0f64),
                0..10),
            version in 0u64..1000,
        ) {
            let mut s = empty();
            s.version = version;
            s.prompt = "a \"quoted\" prompt\nwith newline".into();
            for (i, (y, p, r, x, h, z, k)) in objs.into_iter().enumerate() {
                s.objects.push(object(i, y, p, r, Vec3::new(x, h, z), Vec3::new(k, 1.0, k * 0.5)));
            }
            let a = save_scene(&s);
            let loaded = load_scene(&a).unwrap();
            prop_assert_eq!(&save_scene(&loaded), &a);
            for (o, l) in s.objects.iter().zip(&loaded.objects) {
                prop_assert!(o.transform.translation.distance(l.transform.translation) < 1e-6);
                prop_assert!(o.transform.rotation.quat().angle_to(l.transform.rotation.quat()) < 1e-6);
            }
        }
    }
}
