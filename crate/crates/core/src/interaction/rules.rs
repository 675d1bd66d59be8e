//! Data-driven affordance rule table.
//!
//! Rules are evaluated top to bottom; every matching rule patches the fields
//! it sets. The result is then normalized so that a plane-locked object is
//! never gravity bound and only illumination objects carry a slider.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer};
use thiserror::Error;

use super::{AffordanceSet, Axis, ObjectClass, PlaneLock, RotationAxis};
use crate::scene::{PlacementTag, TagSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("affordance rule table: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AffordanceRules {
    avatar_categories: BTreeSet<String>,
    contextual_categories: BTreeSet<String>,
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct Rule {
    when: Condition,
    set: Patch,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Condition {
    class: Option<ObjectClass>,
    tag: Option<PlacementTag>,
    category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Patch {
    translate_axes: Option<BTreeSet<Axis>>,
    rotate_axes: Option<BTreeSet<RotationAxis>>,
    gravity_bound: Option<bool>,
    #[serde(default, deserialize_with = "present")]
    plane_locked: Option<Option<PlaneLock>>,
    intensity_slider: Option<bool>,
    resettable: Option<bool>,
    posable: Option<bool>,
}

/// Distinguishes an explicit `null` from an absent key.
fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<PlaneLock>>, D::Error> {
    Option::<PlaneLock>::deserialize(d).map(Some)
}

impl Condition {
    fn matches(&self, class: ObjectClass, tags: &TagSet, category: &str) -> bool {
        self.class.is_none_or(|c| c == class)
            && self.tag.is_none_or(|t| tags.contains(&t))
            && self.category.as_deref().is_none_or(|c| c.eq_ignore_ascii_case(category))
    }
}

impl AffordanceRules {
    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let mut rules: Self = serde_json::from_str(text).map_err(|e| RuleError::Document(e.to_string()))?;
        rules.avatar_categories = rules.avatar_categories.iter().map(|c| c.to_lowercase()).collect();
        rules.contextual_categories = rules.contextual_categories.iter().map(|c| c.to_lowercase()).collect();
        Ok(rules)
    }

    pub fn shipped() -> Self {
        Self::from_json(include_str!("../../resources/affordance_rules.json")).expect("shipped affordance rules are valid")
    }

    pub fn is_avatar_category(&self, category: &str) -> bool {
        self.avatar_categories.contains(category)
    }

    pub fn is_contextual_category(&self, category: &str) -> bool {
        self.contextual_categories.contains(category)
    }

    pub(super) fn evaluate(&self, class: ObjectClass, tags: &TagSet, category: &str) -> AffordanceSet {
        let mut a = AffordanceSet::default();
        for rule in self.rules.iter().filter(|r| r.when.matches(class, tags, category)) {
            let p = &rule.set;
            if let Some(v) = &p.translate_axes {
                a.translate_axes = v.clone();
            }
            if let Some(v) = &p.rotate_axes {
                a.rotate_axes = v.clone();
            }
            if let Some(v) = p.gravity_bound {
                a.gravity_bound = v;
            }
            if let Some(v) = p.plane_locked {
                a.plane_locked = v;
            }
            if let Some(v) = p.intensity_slider {
                a.intensity_slider = v;
            }
            if let Some(v) = p.resettable {
                a.resettable = v;
            }
            if let Some(v) = p.posable {
                a.posable = v;
            }
        }
        if a.plane_locked.is_some() {
            a.gravity_bound = false;
        }
        if !tags.contains(&PlacementTag::Illumination) {
            a.intensity_slider = false;
        }
        a
    }
}
