//! Bird's-eye layout planning: the LLM meta-prompt, its response format,
//! footprint validation, a seeded fallback solver and lifting a plan into
//! world placements.

mod fallback;
mod parse;
mod plan;
mod prompt;
mod realize;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fallback::fallback_layout;
pub use parse::{ParseLayoutError, parse_layout, render_plan};
pub use plan::{LayoutOutcome, LayoutSource, plan_layout};
pub use prompt::{build_layout_prompt, format_item_dict, format_size_dict};
pub use realize::{LayoutAsset, Placement, RealizeError, RealizeOptions, realize_layout};
pub use validate::{Footprint, Violation, validate_layout};

use crate::assets::{AssetRecord, Dims};
use crate::scene::PlacementTag;

/// One placed instance on the 300 × 300 grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub label: String,
    pub grid_x: f64,
    pub grid_y: f64,
    pub theta: f64,
}

/// `top` rests on `down`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackRelation {
    pub top: String,
    pub down: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutPlan {
    pub entries: Vec<LayoutEntry>,
    pub relations: Vec<StackRelation>,
}

impl LayoutPlan {
    pub fn entry(&self, label: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Supporter of `label`, if it stands on something.
    pub fn supporter(&self, label: &str) -> Option<&str> {
        self.relations.iter().find(|r| r.top == label).map(|r| r.down.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemRole {
    Grounded,
    Accessory,
    WallMounted,
}

impl ItemRole {
    pub fn from_tags(tags: &crate::scene::TagSet) -> Self {
        if tags.contains(&PlacementTag::Accessory) {
            ItemRole::Accessory
        } else if tags.contains(&PlacementTag::WallMounted) {
            ItemRole::WallMounted
        } else {
            ItemRole::Grounded
        }
    }
}

/// Per-category layout size in meters and placement role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutItem {
    pub front: f64,
    pub side: f64,
    pub height: f64,
    pub role: ItemRole,
}

impl LayoutItem {
    pub fn new(dims: Dims, role: ItemRole) -> Self {
        Self {
            front: dims.front,
            side: dims.side,
            height: dims.height,
            role,
        }
    }

    /// Largest footprint among `records`, role taken from the first.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a AssetRecord>) -> Option<Self> {
        let mut it = records.into_iter();
        let first = it.next()?;
        let mut item = Self::new(first.dims, ItemRole::from_tags(&first.tags));
        for r in it {
            item.front = item.front.max(r.dims.front);
            item.side = item.side.max(r.dims.side);
            item.height = item.height.max(r.dims.height);
        }
        Some(item)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("no size known for `{0}`")]
    MissingSize(String),
    #[error("items do not fit the room: {0}")]
    DoesNotFit(String),
}

/// Category of an instance label: `"chair 2"` → `"chair"`.
pub fn category_of(label: &str) -> &str {
    match label.rsplit_once(' ') {
        Some((head, tail)) if !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) => head,
        _ => label,
    }
}

/// Instance labels for `count` items: the bare category for one, numbered
/// from 1 otherwise.
pub fn instance_labels(category: &str, count: u32) -> Vec<String> {
    if count == 1 {
        vec![category.to_string()]
    } else {
        (1..=count).map(|i| format!("{category} {i}")).collect()
    }
}
