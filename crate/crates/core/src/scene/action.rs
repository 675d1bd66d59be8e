use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LightSpec, PlacementTag, Rotation, Scene, SceneObject};
use crate::avatar::{IkChain, IkError, IkOptions, PoseTable, apply_prefab_pose, solve_ik};
use crate::interaction::{AffordanceSet, Axis, ObjectClass};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationAxis {
    Yaw,
    Pitch,
    Roll,
}

/// One user edit. Camera variants ignore the action target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObjectAction {
    Translate { delta: Vec3 },
    Rotate { axis: RotationAxis, degrees: f64 },
    Reset,
    SetIntensity { value: f64 },
    JointDrag { joint: String, target: Vec3 },
    CameraMove { delta: Vec3 },
    CameraRotate { axis: RotationAxis, degrees: f64 },
}

impl ObjectAction {
    pub fn is_camera(&self) -> bool {
        matches!(self, ObjectAction::CameraMove { .. } | ObjectAction::CameraRotate { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Rejection {
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("`{target}` does not allow {dof}")]
    DisallowedDegreeOfFreedom { target: String, dof: String },
    #[error("intensity {0} outside [0, 1]")]
    IntensityOutOfRange(f64),
    #[error("invalid action value: {0}")]
    InvalidValue(String),
    #[error("id `{0}` already exists in the scene")]
    DuplicateId(String),
    #[error("inverse kinematics failed: {0}")]
    Ik(#[from] IkError),
}

impl Rejection {
    fn dof(target: &str, dof: impl Into<String>) -> Self {
        Rejection::DisallowedDegreeOfFreedom {
            target: target.to_string(),
            dof: dof.into(),
        }
    }
}

fn pose_table() -> &'static PoseTable {
    static TABLE: OnceLock<PoseTable> = OnceLock::new();
    TABLE.get_or_init(PoseTable::shipped)
}

const AXIS_EPS: f64 = 1e-12;

fn check_finite(v: Vec3) -> Result<(), Rejection> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Rejection::InvalidValue(format!("non-finite vector {v:?}")))
    }
}

fn check_translate(target: &str, aff: &AffordanceSet, delta: Vec3) -> Result<(), Rejection> {
    check_finite(delta)?;
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        if axis.component(delta).abs() > AXIS_EPS && !aff.translate_axes.contains(&axis) {
            return Err(Rejection::dof(target, format!("translation along {axis:?}")));
        }
    }
    Ok(())
}

fn check_rotate(target: &str, aff: &AffordanceSet, axis: RotationAxis, degrees: f64) -> Result<(), Rejection> {
    if !degrees.is_finite() {
        return Err(Rejection::InvalidValue(format!("rotation of {degrees} degrees")));
    }
    if !aff.rotate_axes.contains(&axis) {
        return Err(Rejection::dof(target, format!("{axis:?} rotation")));
    }
    Ok(())
}

fn check_intensity(value: f64) -> Result<(), Rejection> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Rejection::IntensityOutOfRange(value))
    }
}

/// Yaw turns about world up; pitch and roll turn about the object's own axes.
fn rotated(r: Rotation, axis: RotationAxis, degrees: f64) -> Rotation {
    match axis {
        RotationAxis::Yaw => Rotation::yaw_deg(degrees).then(r),
        RotationAxis::Pitch => r.then(Rotation::from_euler_deg(0.0, degrees, 0.0)),
        RotationAxis::Roll => r.then(Rotation::from_euler_deg(0.0, 0.0, degrees)),
    }
}

/// Applies `action` to `target_id`, returning the next snapshot.
///
/// Rejected actions never touch `scene`. Accepted ones bump `version` and
/// re-snap gravity-bound objects onto their support.
pub fn apply_action(scene: &Scene, target_id: &str, action: &ObjectAction) -> Result<Scene, Rejection> {
    let mut next = scene.clone();
    if action.is_camera() {
        apply_camera(&mut next, action)?;
    } else if let Some(i) = next.objects.iter().position(|o| o.id == target_id) {
        apply_to_object(&mut next, i, action)?;
    } else if let Some(i) = next.avatars.iter().position(|a| a.id == target_id) {
        apply_to_avatar(&mut next, i, action)?;
    } else if let Some(i) = next.lights.iter().position(|l| l.id == target_id) {
        apply_to_light(&mut next, i, action)?;
    } else {
        return Err(Rejection::UnknownTarget(target_id.to_string()));
    }
    next.version = scene.version + 1;
    Ok(next)
}

/// Adds a fully built object (used for uploads and prompt-driven additions),
/// together with the light it drives, if any.
pub fn insert_object(scene: &Scene, object: SceneObject, light: Option<LightSpec>) -> Result<Scene, Rejection> {
    if scene.contains_id(&object.id) {
        return Err(Rejection::DuplicateId(object.id));
    }
    let mut next = scene.clone();
    if let Some(light) = light {
        if next.contains_id(&light.id) || light.id == object.id {
            return Err(Rejection::DuplicateId(light.id));
        }
        if object.light_id.as_deref() != Some(light.id.as_str()) {
            return Err(Rejection::InvalidValue(format!("light `{}` is not attached to `{}`", light.id, object.id)));
        }
        check_intensity(light.intensity)?;
        next.lights.push(light);
    } else if let Some(lid) = &object.light_id
        && next.light(lid).is_none()
    {
        return Err(Rejection::UnknownTarget(lid.clone()));
    }
    next.objects.push(object);
    let i = next.objects.len() - 1;
    if next.objects[i].affordances.gravity_bound {
        snap_to_support(&mut next, i);
    }
    sync_attached_light(&mut next, i);
    next.version = scene.version + 1;
    Ok(next)
}

fn apply_camera(scene: &mut Scene, action: &ObjectAction) -> Result<(), Rejection> {
    match action {
        ObjectAction::CameraMove { delta } => {
            check_finite(*delta)?;
            scene.camera.position += *delta;
        }
        ObjectAction::CameraRotate { axis, degrees } => {
            if !degrees.is_finite() {
                return Err(Rejection::InvalidValue(format!("rotation of {degrees} degrees")));
            }
            scene.camera.rotation = rotated(scene.camera.rotation, *axis, *degrees);
        }
        _ => unreachable!("checked by is_camera"),
    }
    Ok(())
}

fn apply_to_object(scene: &mut Scene, i: usize, action: &ObjectAction) -> Result<(), Rejection> {
    let obj = &scene.objects[i];
    let id = obj.id.clone();
    let aff = obj.affordances.clone();
    match action {
        ObjectAction::Translate { delta } => {
            check_translate(&id, &aff, *delta)?;
            scene.objects[i].transform.translation += *delta;
        }
        ObjectAction::Rotate { axis, degrees } => {
            check_rotate(&id, &aff, *axis, *degrees)?;
            let t = &mut scene.objects[i].transform;
            t.rotation = rotated(t.rotation, *axis, *degrees);
        }
        ObjectAction::Reset => {
            if !aff.resettable {
                return Err(Rejection::dof(&id, "reset"));
            }
            let o = &mut scene.objects[i];
            o.transform = o.initial_transform;
        }
        ObjectAction::SetIntensity { value } => {
            if !aff.intensity_slider {
                return Err(Rejection::dof(&id, "intensity adjustment"));
            }
            check_intensity(*value)?;
            let light_id = obj.light_id.clone().ok_or_else(|| Rejection::dof(&id, "intensity adjustment without a light"))?;
            let light = scene
                .lights
                .iter_mut()
                .find(|l| l.id == light_id)
                .ok_or_else(|| Rejection::UnknownTarget(light_id.clone()))?;
            light.intensity = *value;
            return Ok(());
        }
        ObjectAction::JointDrag { .. } => return Err(Rejection::dof(&id, "joint posing")),
        ObjectAction::CameraMove { .. } | ObjectAction::CameraRotate { .. } => unreachable!(),
    }
    if aff.gravity_bound && !matches!(action, ObjectAction::Reset) {
        snap_to_support(scene, i);
    }
    sync_attached_light(scene, i);
    Ok(())
}

fn apply_to_avatar(scene: &mut Scene, i: usize, action: &ObjectAction) -> Result<(), Rejection> {
    let id = scene.avatars[i].id.clone();
    let aff = scene.avatars[i].affordances.clone();
    match action {
        ObjectAction::Translate { delta } => {
            check_translate(&id, &aff, *delta)?;
            let a = &mut scene.avatars[i];
            a.root_transform.translation += *delta;
            if aff.gravity_bound {
                a.root_transform.translation.y = 0.0;
            }
        }
        ObjectAction::Rotate { axis, degrees } => {
            check_rotate(&id, &aff, *axis, *degrees)?;
            let t = &mut scene.avatars[i].root_transform;
            t.rotation = rotated(t.rotation, *axis, *degrees);
        }
        ObjectAction::Reset => {
            if !aff.resettable {
                return Err(Rejection::dof(&id, "reset"));
            }
            let a = &scene.avatars[i];
            let pose = a.prefab_pose.clone().unwrap_or_else(|| "stand".to_string());
            let mut reset = apply_prefab_pose(a, &pose, pose_table()).or_else(|_| apply_prefab_pose(a, "stand", pose_table())).expect("stand pose ships");
            reset.root_transform = reset.initial_root_transform;
            scene.avatars[i] = reset;
        }
        ObjectAction::JointDrag { joint, target } => {
            if !aff.posable {
                return Err(Rejection::dof(&id, "joint posing"));
            }
            check_finite(*target)?;
            let a = &scene.avatars[i];
            let ji = a.rig.index_of(joint).ok_or_else(|| Rejection::UnknownTarget(format!("{id}/{joint}")))?;
            if a.rig.parent_index(ji).is_none() {
                return Err(Rejection::dof(&id, "dragging the root joint"));
            }
            let chain = IkChain::ending_at(a, joint, 2, *target).expect("non-root joint has a parent");
            let mut posed = solve_ik(a, &chain, &IkOptions::default())?.avatar;
            posed.prefab_pose = a.prefab_pose.clone();
            scene.avatars[i] = posed;
        }
        ObjectAction::SetIntensity { .. } => return Err(Rejection::dof(&id, "intensity adjustment")),
        ObjectAction::CameraMove { .. } | ObjectAction::CameraRotate { .. } => unreachable!(),
    }
    Ok(())
}

fn apply_to_light(scene: &mut Scene, i: usize, action: &ObjectAction) -> Result<(), Rejection> {
    let light = &scene.lights[i];
    let id = light.id.clone();
    let aff = AffordanceSet::for_light(light.kind);
    match action {
        ObjectAction::SetIntensity { value } => {
            check_intensity(*value)?;
            scene.lights[i].intensity = *value;
        }
        ObjectAction::Translate { delta } => {
            check_translate(&id, &aff, *delta)?;
            scene.lights[i].position += *delta;
        }
        ObjectAction::Rotate { axis, degrees } => {
            check_rotate(&id, &aff, *axis, *degrees)?;
            let l = &mut scene.lights[i];
            let r = match axis {
                RotationAxis::Yaw => Rotation::yaw_deg(*degrees),
                _ => {
                    let side = l.direction.cross(Vec3::Y).normalize_or(Vec3::X);
                    let axis_vec = if *axis == RotationAxis::Pitch { side } else { l.direction };
                    Rotation::from_quat(crate::math::Quat::from_axis_angle(axis_vec, degrees.to_radians()))
                }
            };
            l.direction = r.rotate(l.direction).normalize_or(-Vec3::Y);
        }
        ObjectAction::Reset => return Err(Rejection::dof(&id, "reset")),
        ObjectAction::JointDrag { .. } => return Err(Rejection::dof(&id, "joint posing")),
        ObjectAction::CameraMove { .. } | ObjectAction::CameraRotate { .. } => unreachable!(),
    }
    Ok(())
}

/// Height of the surface an object at index `i` rests on: the top of the
/// highest grounded piece of furniture under its center for accessories, the
/// floor otherwise.
fn support_height(scene: &Scene, i: usize) -> f64 {
    let obj = &scene.objects[i];
    if !obj.has_tag(PlacementTag::Accessory) {
        return 0.0;
    }
    let center = obj.world_bounds().center();
    scene
        .objects
        .iter()
        .enumerate()
        .filter(|(j, o)| {
            *j != i
                && !o.has_tag(PlacementTag::Accessory)
                && !o.has_tag(PlacementTag::WallMounted)
                && o.object_class != ObjectClass::ContextualElement
        })
        .map(|(_, o)| o.world_bounds())
        .filter(|b| b.contains_xz(center))
        .map(|b| b.max.y)
        .fold(0.0, f64::max)
}

/// Moves object `i` vertically so its world-space bottom rests on its support.
pub fn snap_to_support(scene: &mut Scene, i: usize) {
    let support = support_height(scene, i);
    let bottom = scene.objects[i].world_bounds().min.y;
    scene.objects[i].transform.translation.y += support - bottom;
}

/// Keeps a lamp's light at the top center of the lamp.
fn sync_attached_light(scene: &mut Scene, i: usize) {
    let Some(light_id) = scene.objects[i].light_id.clone() else {
        return;
    };
    let b = scene.objects[i].world_bounds();
    if let Some(l) = scene.lights.iter_mut().find(|l| l.id == light_id) {
        l.position = Vec3::new(b.center().x, b.max.y, b.center().z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avatar::{AvatarInstance, Rig, forward_kinematics};
    use crate::interaction::{AffordanceRules, assign_affordances};
    use crate::scene::{Aabb, LightSpec, RoomConfig, TagSet, TransformTRS, save_scene};

    fn object(id: &str, category: &str, tags: &[PlacementTag], size: Vec3, at: Vec3) -> SceneObject {
        let tags: TagSet = tags.iter().copied().collect();
        let aff = assign_affordances(ObjectClass::UserSelected, &tags, category, &AffordanceRules::shipped()).unwrap();
        let t = TransformTRS::new(at, Rotation::IDENTITY, Vec3::ONE);
        SceneObject {
            id: id.into(),
            category: category.into(),
            mesh_ref: category.into(),
            transform: t,
            initial_transform: t,
            local_bounds: Aabb::new(Vec3::new(-size.x / 2.0, 0.0, -size.z / 2.0), Vec3::new(size.x / 2.0, size.y, size.z / 2.0)),
            object_class: ObjectClass::UserSelected,
            affordances: aff,
            tags,
            light_id: None,
        }
    }

    fn scene() -> Scene {
        let mut s = Scene::new("desk with mug", RoomConfig::default());
        s.objects.push(object("desk_1", "desk", &[PlacementTag::Grounded], Vec3::new(1.2, 0.75, 0.6), Vec3::ZERO));
        s.objects.push(object(
            "mug_1",
            "mug",
            &[PlacementTag::Accessory],
            Vec3::new(0.1, 0.12, 0.1),
            Vec3::new(0.0, 0.75, 0.0),
        ));
        let mut lamp = object("lamp_1", "lamp", &[PlacementTag::Grounded, PlacementTag::Illumination], Vec3::new(0.3, 1.5, 0.3), Vec3::new(2.0, 0.0, 0.0));
        lamp.light_id = Some("lamp_1_light".into());
        s.objects.push(lamp);
        s.lights.push(LightSpec::point("lamp_1_light", Vec3::new(2.0, 1.5, 0.0), 0.5));
        let mut avatar = AvatarInstance::new(
            "human_1",
            Rig::humanoid(),
            TransformTRS::new(Vec3::new(-1.0, 0.0, 0.0), Rotation::IDENTITY, Vec3::ONE),
            assign_affordances(ObjectClass::HumanAvatar, &TagSet::new(), "human", &AffordanceRules::shipped()).unwrap(),
        );
        avatar.prefab_pose = Some("stand".into());
        s.avatars.push(avatar);
        s
    }

    #[test]
    fn reset_restores_initial_transform_and_is_idempotent() {
        let s = scene();
        let moved = apply_action(&s, "desk_1", &ObjectAction::Translate { delta: Vec3::new(0.5, 0.0, -0.3) }).unwrap();
        let turned = apply_action(&moved, "desk_1", &ObjectAction::Rotate { axis: RotationAxis::Yaw, degrees: 30.0 }).unwrap();
        let reset = apply_action(&turned, "desk_1", &ObjectAction::Reset).unwrap();
        assert_eq!(reset.object("desk_1").unwrap().transform, s.object("desk_1").unwrap().initial_transform);
        let again = apply_action(&reset, "desk_1", &ObjectAction::Reset).unwrap();
        assert_eq!(again.objects, reset.objects);
        assert_eq!(again.version, reset.version + 1);
    }

    #[test]
    fn pitch_on_yaw_only_desk_is_rejected_without_side_effects() {
        let s = scene();
        let before = save_scene(&s);
        let err = apply_action(&s, "desk_1", &ObjectAction::Rotate { axis: RotationAxis::Pitch, degrees: 10.0 }).unwrap_err();
        assert!(matches!(err, Rejection::DisallowedDegreeOfFreedom { .. }));
        assert_eq!(save_scene(&s), before);
    }

    #[test]
    fn zero_translate_only_bumps_version() {
        let s = scene();
        let t = apply_action(&s, "desk_1", &ObjectAction::Translate { delta: Vec3::ZERO }).unwrap();
        assert_eq!(t.version, s.version + 1);
        let mut back = t.clone();
        back.version = s.version;
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_target_and_bad_values() {
        let s = scene();
        assert_eq!(
            apply_action(&s, "nope", &ObjectAction::Reset),
            Err(Rejection::UnknownTarget("nope".into()))
        );
        assert!(matches!(
            apply_action(&s, "desk_1", &ObjectAction::Translate { delta: Vec3::new(0.0, 1.0, 0.0) }),
            Err(Rejection::DisallowedDegreeOfFreedom { .. })
        ));
        assert_eq!(
            apply_action(&s, "lamp_1", &ObjectAction::SetIntensity { value: 1.5 }),
            Err(Rejection::IntensityOutOfRange(1.5))
        );
        assert!(matches!(
            apply_action(&s, "desk_1", &ObjectAction::SetIntensity { value: 0.5 }),
            Err(Rejection::DisallowedDegreeOfFreedom { .. })
        ));
        assert!(matches!(
            apply_action(&s, "desk_1", &ObjectAction::Translate { delta: Vec3::new(f64::NAN, 0.0, 0.0) }),
            Err(Rejection::InvalidValue(_))
        ));
    }

    #[test]
    fn lamp_slider_drives_its_light() {
        let s = scene();
        let t = apply_action(&s, "lamp_1", &ObjectAction::SetIntensity { value: 0.2 }).unwrap();
        assert_eq!(t.light("lamp_1_light").unwrap().intensity, 0.2);
        let moved = apply_action(&t, "lamp_1", &ObjectAction::Translate { delta: Vec3::new(-0.5, 0.0, 0.0) }).unwrap();
        assert!((moved.light("lamp_1_light").unwrap().position.x - 1.5).abs() < 1e-12);
    }

    #[test]
    fn accessories_land_on_furniture_or_floor() {
        let s = scene();
        let t = apply_action(&s, "mug_1", &ObjectAction::Translate { delta: Vec3::new(0.3, 0.0, 0.1) }).unwrap();
        assert!((t.object("mug_1").unwrap().world_bounds().min.y - 0.75).abs() < 1e-9);
        let off = apply_action(&t, "mug_1", &ObjectAction::Translate { delta: Vec3::new(1.5, 0.0, 0.0) }).unwrap();
        assert!(off.object("mug_1").unwrap().world_bounds().min.y.abs() < 1e-9);
        let back = apply_action(&off, "mug_1", &ObjectAction::Translate { delta: Vec3::new(-1.5, 0.0, 0.0) }).unwrap();
        assert!((back.object("mug_1").unwrap().world_bounds().min.y - 0.75).abs() < 1e-9);
    }

    #[test]
    fn grounded_objects_stay_on_floor_after_translate() {
        let mut s = scene();
        s.objects[0].transform.translation.y = 0.3;
        let t = apply_action(&s, "desk_1", &ObjectAction::Translate { delta: Vec3::new(0.1, 0.0, 0.0) }).unwrap();
        assert!(t.object("desk_1").unwrap().world_bounds().min.y.abs() <= 1e-6);
    }

    #[test]
    fn joint_drag_poses_avatar() {
        let s = scene();
        let a = s.avatar("human_1").unwrap();
        let wrist = forward_kinematics(a)["r_wrist"];
        let target = wrist + Vec3::new(0.15, -0.2, 0.15);
        let t = apply_action(&s, "human_1", &ObjectAction::JointDrag { joint: "r_wrist".into(), target }).unwrap();
        let moved = forward_kinematics(t.avatar("human_1").unwrap())["r_wrist"];
        assert!(moved.distance(target) <= 1e-3);
        assert!(matches!(
            apply_action(&s, "human_1", &ObjectAction::JointDrag { joint: "pelvis".into(), target }),
            Err(Rejection::DisallowedDegreeOfFreedom { .. })
        ));
        let reset = apply_action(&t, "human_1", &ObjectAction::Reset).unwrap();
        assert_eq!(reset.avatars, s.avatars);
    }

    #[test]
    fn camera_actions() {
        let s = scene();
        let t = apply_action(&s, "camera", &ObjectAction::CameraMove { delta: Vec3::new(0.0, 0.1, 0.0) }).unwrap();
        assert!((t.camera.position.y - s.camera.position.y - 0.1).abs() < 1e-12);
        let r = apply_action(&t, "camera", &ObjectAction::CameraRotate { axis: RotationAxis::Yaw, degrees: 90.0 }).unwrap();
        assert_eq!(r.version, s.version + 2);
    }

    #[test]
    fn insert_rejects_duplicate_ids() {
        let s = scene();
        let dup = s.objects[0].clone();
        assert_eq!(insert_object(&s, dup, None), Err(Rejection::DuplicateId("desk_1".into())));
    }

    #[test]
    fn insert_lamp_with_its_light() {
        let s = scene();
        let mut lamp = object("lamp_2", "lamp", &[PlacementTag::Grounded, PlacementTag::Illumination], Vec3::new(0.3, 1.5, 0.3), Vec3::new(-2.0, 0.4, 1.0));
        lamp.light_id = Some("lamp_2_light".into());
        assert_eq!(insert_object(&s, lamp.clone(), None), Err(Rejection::UnknownTarget("lamp_2_light".into())));
        let t = insert_object(&s, lamp.clone(), Some(LightSpec::point("lamp_2_light", Vec3::ZERO, 0.5))).unwrap();
        let l = t.light("lamp_2_light").unwrap();
        assert!((l.position.y - 1.5).abs() < 1e-12, "light follows lamp top after snapping");
        assert_eq!(t.object("lamp_2").unwrap().world_bounds().min.y, 0.0);
        let stray = LightSpec::point("other", Vec3::ZERO, 0.5);
        assert!(matches!(insert_object(&s, lamp, Some(stray)), Err(Rejection::InvalidValue(_))));
    }
}
