//! Mapping between the bird's-eye layout grid and the world frame.
//!
//! Grid origin is the upper-left corner, x to the right, y downward. The grid
//! center sits at the world origin; grid y grows toward world -z.

use thiserror::Error;

use super::{RoomConfig, Rotation, TransformTRS};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("grid coordinate ({x}, {y}) outside [0, {limit}]")]
pub struct BoundsError {
    pub x: f64,
    pub y: f64,
    pub limit: u32,
}

/// World transform for a grid placement `(grid_x, grid_y, theta)`.
///
/// `theta` is the yaw in degrees about +y; at 0 the object front (local +z)
/// points at grid -y, the top edge of the layout.
pub fn world_from_grid(grid_x: f64, grid_y: f64, theta: f64, room: &RoomConfig) -> Result<TransformTRS, BoundsError> {
    let limit = room.grid_units as f64;
    let in_range = |v: f64| v.is_finite() && (0.0..=limit).contains(&v);
    if !in_range(grid_x) || !in_range(grid_y) || !theta.is_finite() {
        return Err(BoundsError {
            x: grid_x,
            y: grid_y,
            limit: room.grid_units,
        });
    }
    let l = room.floor_extent;
    let translation = Vec3::new((grid_x / limit - 0.5) * l, 0.0, (0.5 - grid_y / limit) * l);
    Ok(TransformTRS::new(translation, Rotation::yaw_deg(theta), Vec3::ONE))
}

/// Inverse of the translation part of [`world_from_grid`]; not range-checked.
pub fn grid_from_world(p: Vec3, room: &RoomConfig) -> (f64, f64) {
    let limit = room.grid_units as f64;
    let l = room.floor_extent;
    ((p.x / l + 0.5) * limit, (0.5 - p.z / l) * limit)
}
