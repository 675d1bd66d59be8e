//! Decision-tree interaction mapping: object classification, affordance
//! assignment, input-event mapping and the global-light guarantee.

mod input;
mod rules;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use input::{Device, InputEvent, InputSettings, MappedAction, MouseButton, map_input};
pub use rules::{AffordanceRules, RuleError};

use crate::math::Vec3;
use crate::scene::{LightKind, LightSpec, PlacementTag, Scene, TagSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    UserSelected,
    HumanAvatar,
    ContextualElement,
    Excluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn component(self, v: Vec3) -> f64 {
        match self {
            Axis::X => v.x,
            Axis::Y => v.y,
            Axis::Z => v.z,
        }
    }
}

pub use crate::scene::RotationAxis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneLock {
    Floor,
    /// Wall plane; `normal` points into the room.
    Wall { normal: Vec3 },
}

/// Per-object interaction contract.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffordanceSet {
    pub translate_axes: BTreeSet<Axis>,
    pub rotate_axes: BTreeSet<RotationAxis>,
    pub gravity_bound: bool,
    pub plane_locked: Option<PlaneLock>,
    pub intensity_slider: bool,
    pub resettable: bool,
    pub posable: bool,
}

impl AffordanceSet {
    /// True when no interaction at all is permitted.
    pub fn is_inert(&self) -> bool {
        self.translate_axes.is_empty() && self.rotate_axes.is_empty() && !self.intensity_slider && !self.resettable && !self.posable
    }

    /// Affordances of a bare light source (no owning object).
    pub fn for_light(kind: LightKind) -> Self {
        let mut a = AffordanceSet {
            intensity_slider: true,
            ..Default::default()
        };
        match kind {
            LightKind::Point => a.translate_axes = [Axis::X, Axis::Y, Axis::Z].into(),
            LightKind::Directional => a.rotate_axes = [RotationAxis::Yaw, RotationAxis::Pitch].into(),
            LightKind::Global => {}
        }
        a
    }

    /// Translate axes lying in a wall plane with the given normal.
    pub fn wall_axes(normal: Vec3) -> BTreeSet<Axis> {
        if normal.x.abs() > normal.z.abs() {
            [Axis::Y, Axis::Z].into()
        } else {
            [Axis::X, Axis::Y].into()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AffordanceError {
    #[error("object `{0}` is excluded and has no affordances")]
    ExcludedObject(String),
}

fn normalize_category(c: &str) -> String {
    c.trim().to_lowercase()
}

/// Classifies an object. `requested` holds the categories named by the user
/// request (after relation closure).
pub fn classify_object(category: &str, tags: &TagSet, requested: &BTreeSet<String>, rules: &AffordanceRules) -> ObjectClass {
    let c = normalize_category(category);
    if tags.contains(&PlacementTag::AvatarPrefab) || rules.is_avatar_category(&c) {
        ObjectClass::HumanAvatar
    } else if rules.is_contextual_category(&c) {
        ObjectClass::ContextualElement
    } else if requested.iter().any(|r| normalize_category(r) == c) {
        ObjectClass::UserSelected
    } else {
        ObjectClass::Excluded
    }
}

pub fn assign_affordances(class: ObjectClass, tags: &TagSet, category: &str, rules: &AffordanceRules) -> Result<AffordanceSet, AffordanceError> {
    if class == ObjectClass::Excluded {
        return Err(AffordanceError::ExcludedObject(category.to_string()));
    }
    Ok(rules.evaluate(class, tags, &normalize_category(category)))
}

/// Adds a global light of intensity 0.8 when the scene has no light at all.
pub fn ensure_global_light(scene: &Scene) -> Scene {
    let mut out = scene.clone();
    if out.lights.is_empty() {
        let id = if out.contains_id("global_light") {
            out.fresh_id("global_light")
        } else {
            "global_light".to_string()
        };
        out.lights.push(LightSpec::global(id, LightSpec::DEFAULT_GLOBAL_INTENSITY));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RoomConfig;

    fn rules() -> AffordanceRules {
        AffordanceRules::shipped()
    }

    fn tags(t: &[PlacementTag]) -> TagSet {
        t.iter().copied().collect()
    }

    #[test]
    fn classification() {
        let r = rules();
        let requested: BTreeSet<String> = ["desk".to_string(), "lamp".to_string()].into();
        assert_eq!(classify_object("human", &tags(&[]), &requested, &r), ObjectClass::HumanAvatar);
        assert_eq!(classify_object("wall", &tags(&[]), &requested, &r), ObjectClass::ContextualElement);
        assert_eq!(classify_object("zzz-unknown", &tags(&[]), &requested, &r), ObjectClass::Excluded);
        assert_eq!(classify_object("Desk", &tags(&[]), &requested, &r), ObjectClass::UserSelected);
        assert_eq!(
            classify_object("mannequin", &tags(&[PlacementTag::AvatarPrefab]), &requested, &r),
            ObjectClass::HumanAvatar
        );
    }

    #[test]
    fn desk_rotates_about_vertical_only() {
        let a = assign_affordances(ObjectClass::UserSelected, &tags(&[PlacementTag::Grounded]), "desk", &rules()).unwrap();
        assert_eq!(a.rotate_axes, [RotationAxis::Yaw].into());
        assert_eq!(a.translate_axes, [Axis::X, Axis::Z].into());
        assert!(a.gravity_bound && a.resettable && !a.intensity_slider && !a.posable);
    }

    #[test]
    fn lamp_gets_slider() {
        let a = assign_affordances(ObjectClass::UserSelected, &tags(&[PlacementTag::Illumination]), "ceiling lamp", &rules()).unwrap();
        assert!(a.intensity_slider);
        let b = assign_affordances(ObjectClass::UserSelected, &tags(&[]), "ceiling lamp", &rules()).unwrap();
        assert!(!b.intensity_slider);
    }

    #[test]
    fn wall_art_is_plane_locked() {
        let a = assign_affordances(ObjectClass::UserSelected, &tags(&[PlacementTag::WallMounted]), "painting", &rules()).unwrap();
        assert!(matches!(a.plane_locked, Some(PlaneLock::Wall { .. })));
        assert!(!a.gravity_bound);
        assert!(a.rotate_axes.is_empty());
    }

    #[test]
    fn other_classes() {
        let r = rules();
        let free = assign_affordances(ObjectClass::UserSelected, &tags(&[PlacementTag::FreeInteractive]), "ball", &r).unwrap();
        assert_eq!(free.rotate_axes.len(), 3);
        assert_eq!(free.translate_axes.len(), 3);
        assert!(!free.gravity_bound && free.plane_locked.is_none());
        let human = assign_affordances(ObjectClass::HumanAvatar, &tags(&[]), "human", &r).unwrap();
        assert!(human.posable && human.gravity_bound);
        let wall = assign_affordances(ObjectClass::ContextualElement, &tags(&[]), "wall", &r).unwrap();
        assert!(wall.is_inert());
        assert_eq!(
            assign_affordances(ObjectClass::Excluded, &tags(&[]), "zzz", &r),
            Err(AffordanceError::ExcludedObject("zzz".into()))
        );
    }

    #[test]
    fn global_light_added_once() {
        let s = Scene::new("", RoomConfig::default());
        let once = ensure_global_light(&s);
        assert_eq!(once.lights.len(), 1);
        assert_eq!(once.lights[0].kind, LightKind::Global);
        assert_eq!(once.lights[0].intensity, 0.8);
        assert_eq!(ensure_global_light(&once), once);

        let mut lit = s.clone();
        lit.lights.push(LightSpec::point("p", Vec3::Y, 0.5));
        assert_eq!(ensure_global_light(&lit), lit);
    }
}
