//! Mesh lookup by asset id, with box-built stand-ins for assets that ship
//! no geometry.

use std::collections::BTreeMap;
use std::path::Path;

use super::{AssetIndex, Dims, Mesh, MeshError, MeshFormat, load_mesh};
use crate::math::Vec3;
use crate::scene::TransformTRS;

fn slab(x0: f64, y0: f64, z0: f64, x1: f64, y1: f64, z1: f64) -> Mesh {
    Mesh::cuboid(Vec3::new(x0, y0, z0), Vec3::new(x1, y1, z1))
}

fn union(parts: Vec<Mesh>) -> Mesh {
    let mut it = parts.into_iter();
    let mut m = it.next().expect("at least one part");
    for p in it {
        m.merge(&p);
    }
    m
}

fn legs(hx: f64, hz: f64, top: f64, t: f64) -> Vec<Mesh> {
    [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]
        .iter()
        .map(|&(sx, sz)| {
            let (cx, cz) = (sx * (hx - t), sz * (hz - t));
            slab(cx - t, 0.0, cz - t, cx + t, top, cz + t)
        })
        .collect()
}

/// Rough geometry for a category, spanning x ∈ ±front/2, z ∈ ±side/2,
/// y ∈ [0, height], front facing +z.
pub fn procedural_mesh(category: &str, dims: Dims) -> Mesh {
    let (hx, hz, h) = (dims.front * 0.5, dims.side * 0.5, dims.height);
    let leg = (hx.min(hz) * 0.08).clamp(0.01, 0.04);
    match category {
        "table" | "desk" => {
            let top = (h * 0.05).clamp(0.015, 0.05);
            let mut parts = legs(hx, hz, h - top, leg);
            parts.push(slab(-hx, h - top, -hz, hx, h, hz));
            union(parts)
        }
        "chair" | "bench" => {
            let seat = h * 0.45;
            let mut parts = legs(hx, hz, seat - 0.03, leg);
            parts.push(slab(-hx, seat - 0.03, -hz, hx, seat, hz));
            parts.push(slab(-hx, seat, -hz, hx, h, -hz + 0.04f64.min(dims.side * 0.2)));
            union(parts)
        }
        "lamp" => {
            let base = (h * 0.04).max(0.01);
            let pole = (hx.min(hz) * 0.12).max(0.005);
            let shade = h * 0.25;
            union(vec![
                slab(-hx * 0.6, 0.0, -hz * 0.6, hx * 0.6, base, hz * 0.6),
                slab(-pole, base, -pole, pole, h - shade, pole),
                slab(-hx, h - shade, -hz, hx, h, hz),
            ])
        }
        "bed" => union(vec![
            slab(-hx, 0.0, -hz, hx, h * 0.5, hz),
            slab(-hx, h * 0.5, -hz, hx, h, -hz + 0.06f64.min(dims.side * 0.1)),
        ]),
        _ => slab(-hx, 0.0, -hz, hx, h, hz),
    }
}

/// Meshes keyed by asset id; each lies in its asset's local frame.
#[derive(Debug, Clone, Default)]
pub struct MeshStore {
    meshes: BTreeMap<String, Mesh>,
}

impl MeshStore {
    /// Procedural stand-ins for every record in `index`.
    pub fn procedural(index: &AssetIndex) -> Self {
        let meshes = index.records().iter().map(|r| (r.id.clone(), procedural_mesh(&r.category, r.dims))).collect();
        Self { meshes }
    }

    /// Like [`MeshStore::procedural`], but `dir/{id}.obj` or `dir/{id}.ply`
    /// replaces the stand-in when present. Files are recentered and scaled to
    /// the record's dims.
    pub fn with_mesh_dir(index: &AssetIndex, dir: &Path) -> Result<Self, (String, MeshError)> {
        let mut store = Self::procedural(index);
        for r in index.records() {
            for format in [MeshFormat::Obj, MeshFormat::Ply] {
                let path = dir.join(format!("{}.{}", r.id, format.extension()));
                if let Ok(bytes) = std::fs::read(&path) {
                    let mesh = load_mesh(&bytes, format).map_err(|e| (r.id.clone(), e))?;
                    store.insert(r.id.clone(), fit_to_dims(&mesh, r.dims));
                    break;
                }
            }
        }
        Ok(store)
    }

    pub fn insert(&mut self, id: impl Into<String>, mesh: Mesh) {
        self.meshes.insert(id.into(), mesh);
    }

    pub fn get(&self, id: &str) -> Option<&Mesh> {
        self.meshes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.meshes.contains_key(id)
    }
}

/// Recenters on x/z, rests on y = 0 and scales each axis to `dims`.
pub fn fit_to_dims(mesh: &Mesh, dims: Dims) -> Mesh {
    let b = mesh.bounds();
    let e = b.extent();
    let s = |target: f64, have: f64| if have > 1e-12 { target / have } else { 1.0 };
    let scale = Vec3::new(s(dims.front, e.x), s(dims.height, e.y), s(dims.side, e.z));
    let centered = mesh.transformed(&TransformTRS::new(Vec3::new(-b.center().x, -b.min.y, -b.center().z), Default::default(), Vec3::ONE));
    centered.transformed(&TransformTRS::new(Vec3::ZERO, Default::default(), scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Aabb;
    use approx::assert_abs_diff_eq;

    #[test]
    fn procedural_meshes_fill_their_dims() {
        let d = Dims::new(1.2, 0.6, 0.75);
        for c in ["table", "chair", "lamp", "bed", "mug"] {
            let b = procedural_mesh(c, d).bounds();
            assert_abs_diff_eq!(b.min.x, -0.6, epsilon = 1e-12);
            assert_abs_diff_eq!(b.max.x, 0.6, epsilon = 1e-12);
            assert_abs_diff_eq!(b.min.z, -0.3, epsilon = 1e-12);
            assert_abs_diff_eq!(b.max.z, 0.3, epsilon = 1e-12);
            assert_abs_diff_eq!(b.min.y, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b.max.y, 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn fitting() {
        let m = Mesh::cuboid(Vec3::new(3.0, 1.0, 3.0), Vec3::new(5.0, 2.0, 4.0));
        let f = fit_to_dims(&m, Dims::new(1.0, 0.5, 0.25));
        let b = f.bounds();
        let want = Aabb::new(Vec3::new(-0.5, 0.0, -0.25), Vec3::new(0.5, 0.25, 0.25));
        assert!(b.min.distance(want.min) < 1e-12 && b.max.distance(want.max) < 1e-12);
    }
}
