use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::LayoutPlan;
use super::validate::first_cycle;
use crate::math::Vec3;
use crate::scene::{Aabb, BoundsError, PlacementTag, RoomConfig, Rotation, TagSet, TransformTRS, world_from_grid};

/// The asset chosen for one plan label.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutAsset {
    pub asset_id: String,
    pub category: String,
    pub local_bounds: Aabb,
    pub tags: TagSet,
}

/// A label lifted into the world.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub label: String,
    pub asset_id: String,
    pub category: String,
    pub transform: TransformTRS,
    pub local_bounds: Aabb,
    pub tags: TagSet,
    pub supporter: Option<String>,
}

impl Placement {
    pub fn world_bounds(&self) -> Aabb {
        self.local_bounds.transformed(&self.transform)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizeOptions {
    /// Height of a wall-mounted item's center, meters.
    pub wall_mount_height: f64,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        Self { wall_mount_height: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealizeError {
    #[error("stacking relations form a cycle through `{0}`")]
    CyclicRelations(String),
    #[error("no asset for `{0}`")]
    MissingAsset(String),
    #[error("relation names `{0}`, which the plan does not place")]
    UnknownLabel(String),
    #[error(transparent)]
    OutOfBounds(#[from] BoundsError),
}

/// Turns a plan into world transforms: floor items first, then everything
/// that stands on something, supporters before what they carry.
pub fn realize_layout(
    plan: &LayoutPlan,
    assets: &BTreeMap<String, LayoutAsset>,
    room: &RoomConfig,
    options: &RealizeOptions,
) -> Result<Vec<Placement>, RealizeError> {
    for r in &plan.relations {
        for l in [&r.top, &r.down] {
            if plan.entry(l).is_none() {
                return Err(RealizeError::UnknownLabel(l.clone()));
            }
        }
        if r.top == r.down {
            return Err(RealizeError::CyclicRelations(r.top.clone()));
        }
    }
    if let Some(l) = first_cycle(plan) {
        return Err(RealizeError::CyclicRelations(l));
    }
    for e in &plan.entries {
        if !assets.contains_key(&e.label) {
            return Err(RealizeError::MissingAsset(e.label.clone()));
        }
    }

    let tops: BTreeSet<&str> = plan.relations.iter().map(|r| r.top.as_str()).collect();
    let mut out: Vec<Placement> = Vec::with_capacity(plan.entries.len());

    for e in plan.entries.iter().filter(|e| !tops.contains(e.label.as_str())) {
        let asset = &assets[&e.label];
        let mut transform = world_from_grid(e.grid_x, e.grid_y, e.theta, room)?;
        if asset.tags.contains(&PlacementTag::WallMounted) {
            transform = onto_wall(transform, &asset.local_bounds, room, options.wall_mount_height);
        } else {
            transform.translation.y = -asset.local_bounds.min.y * transform.scale.y;
        }
        out.push(placement(&e.label, asset, transform, None));
    }

    // Supporters always precede; repeat passes until every top is placed.
    let mut remaining: Vec<&str> = plan.entries.iter().map(|e| e.label.as_str()).filter(|l| tops.contains(l)).collect();
    while !remaining.is_empty() {
        let before = remaining.len();
        let mut next = Vec::new();
        for label in remaining {
            let down = plan.supporter(label).expect("tops have supporters");
            let Some(sup) = out.iter().find(|p| p.label == down) else {
                next.push(label);
                continue;
            };
            let top = sup.world_bounds().max.y;
            let e = plan.entry(label).expect("checked");
            let asset = &assets[label];
            let mut transform = world_from_grid(e.grid_x, e.grid_y, e.theta, room)?;
            transform.translation.y = 0.0;
            let lowest = asset.local_bounds.transformed(&transform).min.y;
            transform.translation.y = top - lowest;
            let p = placement(label, asset, transform, Some(down.to_string()));
            out.push(p);
        }
        if next.len() == before {
            return Err(RealizeError::CyclicRelations(next[0].to_string()));
        }
        remaining = next;
    }
    Ok(out)
}

fn placement(label: &str, asset: &LayoutAsset, transform: TransformTRS, supporter: Option<String>) -> Placement {
    Placement {
        label: label.to_string(),
        asset_id: asset.asset_id.clone(),
        category: asset.category.clone(),
        transform,
        local_bounds: asset.local_bounds,
        tags: asset.tags.clone(),
        supporter,
    }
}

/// Moves a wall item to the wall nearest its grid spot, back flush with the
/// wall, facing into the room, centered at `height`.
fn onto_wall(t: TransformTRS, bounds: &Aabb, room: &RoomConfig, height: f64) -> TransformTRS {
    let h = room.half_extent();
    let p = t.translation;
    // (distance, yaw facing inward, inward normal)
    let walls = [
        (h - p.z, 180.0, Vec3::new(0.0, 0.0, -1.0)),
        (p.z + h, 0.0, Vec3::new(0.0, 0.0, 1.0)),
        (p.x + h, 90.0, Vec3::new(1.0, 0.0, 0.0)),
        (h - p.x, 270.0, Vec3::new(-1.0, 0.0, 0.0)),
    ];
    let (_, yaw, n) = walls.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("four walls");
    let rotation = Rotation::yaw_deg(yaw);
    let oriented = bounds.transformed(&TransformTRS::new(Vec3::ZERO, rotation, t.scale));
    let half_along = if n.x == 0.0 { oriented.extent().x } else { oriented.extent().z } * 0.5;
    let along_limit = (h - half_along).max(0.0);
    let mut q = p;
    if n.x == 0.0 {
        q.x = q.x.clamp(-along_limit, along_limit);
        q.z = if n.z < 0.0 { h - oriented.max.z } else { -h - oriented.min.z };
    } else {
        q.z = q.z.clamp(-along_limit, along_limit);
        q.x = if n.x > 0.0 { -h - oriented.min.x } else { h - oriented.max.x };
    }
    q.y = height - 0.5 * (oriented.min.y + oriented.max.y);
    TransformTRS::new(q, rotation, t.scale)
}
