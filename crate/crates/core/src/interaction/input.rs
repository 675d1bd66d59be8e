//! Mouse and keyboard events to scene actions.
//!
//! | input                          | action                          |
//! |--------------------------------|---------------------------------|
//! | LMB drag on object             | translate on its support plane  |
//! | LMB drag on avatar joint       | joint drag (IK)                 |
//! | RMB drag on object             | rotate (objects take priority)  |
//! | RMB drag on empty space        | camera rotate                   |
//! | RMB hold on light + slider     | set intensity                   |
//! | MMB on object                  | reset                           |
//! | W / A / S / D                  | camera move, horizontal         |
//! | Q / E                          | camera move up / down           |

use serde::{Deserialize, Serialize};

use super::{AffordanceSet, Axis, ObjectClass, PlaneLock, RotationAxis};
use crate::math::Vec3;
use crate::scene::{CameraSpec, LightKind, ObjectAction, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    Mouse,
    Keyboard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MouseButton {
    Left,
    Right,
    Middle,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InputEvent {
    pub device: Option<Device>,
    #[serde(default)]
    pub button: Option<MouseButton>,
    #[serde(default)]
    pub key: Option<String>,
    /// Pixels; +x right, +y down.
    #[serde(default)]
    pub drag_delta: (f64, f64),
    /// Cursor pixel at drag start. Defaults to the hovered target's anchor.
    #[serde(default)]
    pub cursor: Option<(f64, f64)>,
    #[serde(default)]
    pub hover_target: Option<String>,
    /// Joint handle under the cursor when the target is an avatar.
    #[serde(default)]
    pub joint: Option<String>,
    #[serde(default)]
    pub slider_value: Option<f64>,
}

impl InputEvent {
    pub fn key(key: &str) -> Self {
        Self {
            device: Some(Device::Keyboard),
            key: Some(key.to_string()),
            ..Default::default()
        }
    }

    pub fn mouse(button: MouseButton, hover_target: Option<&str>, drag_delta: (f64, f64)) -> Self {
        Self {
            device: Some(Device::Mouse),
            button: Some(button),
            drag_delta,
            hover_target: hover_target.map(str::to_string),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSettings {
    pub rotate_deg_per_px: f64,
    pub camera_step: f64,
    pub camera_rotate_deg_per_px: f64,
}

impl Default for InputSettings {
    fn default() -> Self {
        Self {
            rotate_deg_per_px: 0.5,
            camera_step: 0.1,
            camera_rotate_deg_per_px: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedAction {
    pub target: String,
    pub action: ObjectAction,
}

const CAMERA_TARGET: &str = "camera";

enum Hovered<'a> {
    Object { aff: &'a AffordanceSet, anchor: Vec3, plane: Plane, slider_ok: bool },
    Avatar { aff: &'a AffordanceSet, anchor: Vec3 },
    Light { aff: AffordanceSet, anchor: Vec3 },
}

#[derive(Debug, Clone, Copy)]
struct Plane {
    point: Vec3,
    normal: Vec3,
}

fn ray_plane(origin: Vec3, dir: Vec3, plane: Plane) -> Option<Vec3> {
    let denom = dir.dot(plane.normal);
    if denom.abs() < 1e-9 {
        return None;
    }
    let t = (plane.point - origin).dot(plane.normal) / denom;
    (t > 0.0 && t.is_finite()).then(|| origin + dir * t)
}

fn lookup<'a>(scene: &'a Scene, id: &str) -> Option<Hovered<'a>> {
    if let Some(o) = scene.object(id) {
        if matches!(o.object_class, ObjectClass::Excluded) || o.affordances.is_inert() {
            return None;
        }
        let b = o.world_bounds();
        let plane = match o.affordances.plane_locked {
            Some(PlaneLock::Wall { normal }) => Plane { point: b.center(), normal },
            _ => Plane {
                point: Vec3::new(b.center().x, b.min.y, b.center().z),
                normal: Vec3::Y,
            },
        };
        let slider_ok = o.affordances.intensity_slider && o.light_id.as_ref().is_some_and(|l| scene.light(l).is_some());
        return Some(Hovered::Object {
            aff: &o.affordances,
            anchor: plane.point,
            plane,
            slider_ok,
        });
    }
    if let Some(a) = scene.avatar(id) {
        return Some(Hovered::Avatar {
            aff: &a.affordances,
            anchor: a.root_transform.translation,
        });
    }
    scene.light(id).map(|l| Hovered::Light {
        aff: AffordanceSet::for_light(l.kind),
        anchor: if l.kind == LightKind::Point { l.position } else { Vec3::ZERO },
    })
}

/// Intersects the drag start and end rays with `plane` and keeps only the
/// permitted axes of the resulting displacement.
fn plane_drag(camera: &CameraSpec, anchor: Vec3, cursor: Option<(f64, f64)>, delta: (f64, f64), plane: Plane, axes: &std::collections::BTreeSet<Axis>) -> Option<Vec3> {
    if axes.is_empty() {
        return None;
    }
    let (x0, y0) = match cursor {
        Some(c) => c,
        None => {
            let (x, y, _) = camera.project(anchor)?;
            (x, y)
        }
    };
    let p0 = ray_plane(camera.position, camera.pixel_ray(x0, y0), plane)?;
    let p1 = ray_plane(camera.position, camera.pixel_ray(x0 + delta.0, y0 + delta.1), plane)?;
    let d = p1 - p0;
    let keep = |axis: Axis| if axes.contains(&axis) { axis.component(d) } else { 0.0 };
    let out = Vec3::new(keep(Axis::X), keep(Axis::Y), keep(Axis::Z));
    out.is_finite().then_some(out)
}

/// Displacement in the plane through `anchor` parallel to the image plane.
fn screen_drag(camera: &CameraSpec, anchor: Vec3, delta: (f64, f64)) -> Option<Vec3> {
    let depth = -camera.to_view(anchor).z;
    if depth <= 0.0 {
        return None;
    }
    let s = depth / camera.focal_px();
    Some(camera.right() * (delta.0 * s) - camera.up() * (delta.1 * s))
}

/// Picks the rotation axis driven by the dominant drag direction.
fn drag_rotation(axes: &std::collections::BTreeSet<RotationAxis>, delta: (f64, f64), deg_per_px: f64) -> Option<(RotationAxis, f64)> {
    let horizontal = (RotationAxis::Yaw, delta.0 * deg_per_px);
    let vertical = (RotationAxis::Pitch, delta.1 * deg_per_px);
    let order = if delta.1.abs() > delta.0.abs() { [vertical, horizontal] } else { [horizontal, vertical] };
    order.into_iter().find(|(a, _)| axes.contains(a))
}

fn camera_key(key: &str, camera: &CameraSpec, step: f64) -> Option<Vec3> {
    let flat = |v: Vec3| Vec3::new(v.x, 0.0, v.z).try_normalize();
    let forward = flat(camera.forward()).unwrap_or(-Vec3::Z);
    let right = flat(camera.right()).unwrap_or(Vec3::X);
    let dir = match key.to_ascii_lowercase().as_str() {
        "w" => forward,
        "s" => -forward,
        "a" => -right,
        "d" => right,
        "q" => Vec3::Y,
        "e" => -Vec3::Y,
        _ => return None,
    };
    Some(dir * step)
}

/// Maps one input event to at most one action. Pure in `(event, scene)`.
pub fn map_input(event: &InputEvent, scene: &Scene, settings: &InputSettings) -> Option<MappedAction> {
    let camera_action = |action| {
        Some(MappedAction {
            target: CAMERA_TARGET.to_string(),
            action,
        })
    };
    let (dx, dy) = event.drag_delta;
    if !(dx.is_finite() && dy.is_finite()) {
        return None;
    }

    if event.device == Some(Device::Keyboard) || (event.button.is_none() && event.key.is_some()) {
        let delta = camera_key(event.key.as_deref()?, &scene.camera, settings.camera_step)?;
        return camera_action(ObjectAction::CameraMove { delta });
    }

    let button = event.button?;
    let target = event.hover_target.as_deref();
    let hovered = match target {
        Some(id) => Some(lookup(scene, id)?),
        None => None,
    };
    let act = |action| {
        Some(MappedAction {
            target: target.expect("hovered target").to_string(),
            action,
        })
    };

    match (button, hovered) {
        (MouseButton::Middle, None) => None,
        (MouseButton::Middle, Some(Hovered::Light { .. })) => None,
        (MouseButton::Middle, Some(Hovered::Object { aff, .. } | Hovered::Avatar { aff, .. })) => {
            aff.resettable.then_some(())?;
            act(ObjectAction::Reset)
        }

        (MouseButton::Right, None) => {
            let (axis, degrees) = if dy.abs() > dx.abs() {
                (RotationAxis::Pitch, -dy * settings.camera_rotate_deg_per_px)
            } else {
                (RotationAxis::Yaw, -dx * settings.camera_rotate_deg_per_px)
            };
            camera_action(ObjectAction::CameraRotate { axis, degrees })
        }
        (MouseButton::Right, Some(Hovered::Light { aff, .. })) => match event.slider_value {
            Some(v) if v.is_finite() => act(ObjectAction::SetIntensity { value: v.clamp(0.0, 1.0) }),
            Some(_) => None,
            None => {
                let (axis, degrees) = drag_rotation(&aff.rotate_axes, event.drag_delta, settings.rotate_deg_per_px)?;
                act(ObjectAction::Rotate { axis, degrees })
            }
        },
        (MouseButton::Right, Some(Hovered::Object { aff, slider_ok, .. })) => {
            if let Some(v) = event.slider_value.filter(|_| slider_ok) {
                return v.is_finite().then(|| act(ObjectAction::SetIntensity { value: v.clamp(0.0, 1.0) }))?;
            }
            let (axis, degrees) = drag_rotation(&aff.rotate_axes, event.drag_delta, settings.rotate_deg_per_px)?;
            act(ObjectAction::Rotate { axis, degrees })
        }
        (MouseButton::Right, Some(Hovered::Avatar { aff, .. })) => {
            let (axis, degrees) = drag_rotation(&aff.rotate_axes, event.drag_delta, settings.rotate_deg_per_px)?;
            act(ObjectAction::Rotate { axis, degrees })
        }

        (MouseButton::Left, None) => None,
        (MouseButton::Left, Some(Hovered::Object { aff, anchor, plane, .. })) => {
            let delta = plane_drag(&scene.camera, anchor, event.cursor, event.drag_delta, plane, &aff.translate_axes)?;
            act(ObjectAction::Translate { delta })
        }
        (MouseButton::Left, Some(Hovered::Avatar { aff, anchor })) => {
            let avatar = scene.avatar(target?)?;
            match event.joint.as_deref() {
                Some(joint) => {
                    aff.posable.then_some(())?;
                    let ji = avatar.rig.index_of(joint)?;
                    avatar.rig.parent_index(ji)?;
                    let at = avatar.joint_frames()[ji].position;
                    let goal = at + screen_drag(&scene.camera, at, event.drag_delta)?;
                    act(ObjectAction::JointDrag {
                        joint: joint.to_string(),
                        target: goal,
                    })
                }
                None => {
                    let plane = Plane { point: anchor, normal: Vec3::Y };
                    let delta = plane_drag(&scene.camera, anchor, event.cursor, event.drag_delta, plane, &aff.translate_axes)?;
                    act(ObjectAction::Translate { delta })
                }
            }
        }
        (MouseButton::Left, Some(Hovered::Light { aff, anchor })) => {
            let plane = Plane { point: anchor, normal: Vec3::Y };
            let delta = plane_drag(&scene.camera, anchor, event.cursor, event.drag_delta, plane, &aff.translate_axes)?;
            act(ObjectAction::Translate { delta })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avatar::{AvatarInstance, Rig};
    use crate::interaction::{AffordanceRules, assign_affordances, ensure_global_light};
    use crate::scene::{Aabb, LightSpec, PlacementTag, RoomConfig, SceneObject, TagSet, TransformTRS, apply_action};
    use proptest::prelude::*;

    fn object(id: &str, category: &str, tags: &[PlacementTag], at: Vec3) -> SceneObject {
        let tags: TagSet = tags.iter().copied().collect();
        let t = TransformTRS::new(at, Default::default(), Vec3::ONE);
        SceneObject {
            id: id.into(),
            category: category.into(),
            mesh_ref: category.into(),
            transform: t,
            initial_transform: t,
            local_bounds: Aabb::new(Vec3::new(-0.3, 0.0, -0.3), Vec3::new(0.3, 0.9, 0.3)),
            object_class: ObjectClass::UserSelected,
            affordances: assign_affordances(ObjectClass::UserSelected, &tags, category, &AffordanceRules::shipped()).unwrap(),
            tags,
            light_id: None,
        }
    }

    fn fixture() -> Scene {
        let mut s = Scene::new("", RoomConfig::default());
        s.objects.push(object("chair", "chair", &[PlacementTag::Grounded], Vec3::new(0.5, 0.0, 0.0)));
        s.objects.push(object("painting", "painting", &[PlacementTag::WallMounted], Vec3::new(0.0, 1.2, -2.9)));
        s.objects.push(object("ball", "ball", &[PlacementTag::FreeInteractive], Vec3::new(-1.0, 0.5, 0.0)));
        let mut lamp = object("lamp", "lamp", &[PlacementTag::Grounded, PlacementTag::Illumination], Vec3::new(-1.5, 0.0, -1.0));
        lamp.light_id = Some("lamp_light".into());
        s.objects.push(lamp);
        s.lights.push(LightSpec::point("lamp_light", Vec3::new(-1.5, 0.9, -1.0), 0.5));
        let rules = AffordanceRules::shipped();
        let aff = assign_affordances(ObjectClass::HumanAvatar, &TagSet::new(), "human", &rules).unwrap();
        s.avatars
            .push(AvatarInstance::new("human", Rig::humanoid(), TransformTRS::new(Vec3::new(1.0, 0.0, -0.5), Default::default(), Vec3::ONE), aff));
        ensure_global_light(&s)
    }

    fn map(e: &InputEvent, s: &Scene) -> Option<MappedAction> {
        map_input(e, s, &InputSettings::default())
    }

    #[test]
    fn left_drag_translates_on_floor() {
        let s = fixture();
        let m = map(&InputEvent::mouse(MouseButton::Left, Some("chair"), (40.0, 0.0)), &s).unwrap();
        assert_eq!(m.target, "chair");
        let ObjectAction::Translate { delta } = m.action else { panic!("{m:?}") };
        assert!(delta.x > 0.0 && delta.y == 0.0);
        let next = apply_action(&s, &m.target, &m.action).unwrap();
        assert_eq!(next.object("chair").unwrap().world_bounds().min.y, 0.0);
    }

    #[test]
    fn wall_art_stays_in_wall_plane() {
        let s = fixture();
        let m = map(&InputEvent::mouse(MouseButton::Left, Some("painting"), (10.0, -20.0)), &s).unwrap();
        let ObjectAction::Translate { delta } = m.action else { panic!() };
        assert_eq!(delta.z, 0.0);
        assert!(delta.y > 0.0);
    }

    #[test]
    fn right_drag_prefers_object_rotation() {
        let s = fixture();
        let m = map(&InputEvent::mouse(MouseButton::Right, Some("chair"), (20.0, 30.0)), &s).unwrap();
        // chair is yaw-only, so the vertical-dominant drag still yaws
        assert_eq!(m.action, ObjectAction::Rotate { axis: RotationAxis::Yaw, degrees: 10.0 });
        let cam = map(&InputEvent::mouse(MouseButton::Right, None, (20.0, 0.0)), &s).unwrap();
        assert_eq!(cam.action, ObjectAction::CameraRotate { axis: RotationAxis::Yaw, degrees: -4.0 });
        assert!(map(&InputEvent::mouse(MouseButton::Right, Some("painting"), (20.0, 0.0)), &s).is_none());
    }

    #[test]
    fn middle_click_resets() {
        let s = fixture();
        let m = map(&InputEvent::mouse(MouseButton::Middle, Some("chair"), (0.0, 0.0)), &s).unwrap();
        assert_eq!(m.action, ObjectAction::Reset);
        assert!(map(&InputEvent::mouse(MouseButton::Middle, None, (0.0, 0.0)), &s).is_none());
    }

    #[test]
    fn keys_move_camera() {
        let s = fixture();
        let q = map(&InputEvent::key("Q"), &s).unwrap();
        assert_eq!(q.action, ObjectAction::CameraMove { delta: Vec3::new(0.0, 0.1, 0.0) });
        let e = map(&InputEvent::key("e"), &s).unwrap();
        assert_eq!(e.action, ObjectAction::CameraMove { delta: Vec3::new(0.0, -0.1, 0.0) });
        let ObjectAction::CameraMove { delta } = map(&InputEvent::key("w"), &s).unwrap().action else { panic!() };
        assert!(delta.z < 0.0 && delta.y == 0.0);
        assert!(map(&InputEvent::key("x"), &s).is_none());
    }

    #[test]
    fn slider_on_lamp_and_light() {
        let s = fixture();
        let mut e = InputEvent::mouse(MouseButton::Right, Some("lamp"), (0.0, 0.0));
        e.slider_value = Some(0.25);
        assert_eq!(map(&e, &s).unwrap().action, ObjectAction::SetIntensity { value: 0.25 });
        e.hover_target = Some("lamp_light".into());
        assert_eq!(map(&e, &s).unwrap().action, ObjectAction::SetIntensity { value: 0.25 });
        e.hover_target = Some("chair".into());
        assert!(matches!(map(&e, &s).unwrap().action, ObjectAction::Rotate { .. }));
    }

    #[test]
    fn joint_handle_drag() {
        let s = fixture();
        let mut e = InputEvent::mouse(MouseButton::Left, Some("human"), (5.0, -5.0));
        e.joint = Some("r_wrist".into());
        let m = map(&e, &s).unwrap();
        assert!(matches!(m.action, ObjectAction::JointDrag { .. }));
        apply_action(&s, &m.target, &m.action).unwrap();
    }

    #[test]
    fn unknown_or_excluded_targets_do_nothing() {
        let mut s = fixture();
        assert!(map(&InputEvent::mouse(MouseButton::Left, Some("ghost"), (5.0, 0.0)), &s).is_none());
        s.objects[0].object_class = ObjectClass::Excluded;
        assert!(map(&InputEvent::mouse(MouseButton::Left, Some("chair"), (5.0, 0.0)), &s).is_none());
    }

    fn event_strategy() -> impl Strategy<Value = InputEvent> {
        let targets = prop_oneof![
            Just(None),
            Just(Some("chair")),
            Just(Some("painting")),
            Just(Some("ball")),
            Just(Some("lamp")),
            Just(Some("lamp_light")),
            Just(Some("global_light")),
            Just(Some("human")),
        ];
        let joints = prop_oneof![Just(None), Just(Some("r_wrist")), Just(Some("l_knee")), Just(Some("pelvis")), Just(Some("head"))];
        let keys = prop_oneof![Just("w"), Just("a"), Just("s"), Just("d"), Just("q"), Just("e"), Just("z")];
        (
            any::<bool>(),
            0..3usize,
            keys,
            (-200.0..200.0f64, -200.0..200.0f64),
            targets,
            joints,
            proptest::option::of(-0.5..1.5f64),
        )
            .prop_map(|(keyboard, b, key, delta, target, joint, slider)| {
                if keyboard {
                    return InputEvent::key(key);
                }
                let button = [MouseButton::Left, MouseButton::Right, MouseButton::Middle][b];
                let mut e = InputEvent::mouse(button, target, delta);
                e.joint = joint.map(str::to_string);
                e.slider_value = slider;
                e
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn mapped_actions_are_always_accepted(e in event_strategy()) {
            let s = fixture();
            let first = map(&e, &s);
            prop_assert_eq!(&first, &map(&e, &s));
            if let Some(m) = first {
                prop_assert!(apply_action(&s, &m.target, &m.action).is_ok(), "{:?} -> {:?}", e, m);
            }
        }
    }
}
