//! World-space triangles of everything that appears in a condition image.

use super::EncodeError;
use crate::assets::{Mesh, MeshStore};
use crate::avatar::{AvatarInstance, BONE_RADIUS};
use crate::math::Vec3;
use crate::scene::Scene;

const CAPSULE_SEGMENTS: usize = 8;
const CAPSULE_CAP_RINGS: usize = 2;
const HEAD_RADIUS: f64 = 0.1;

/// What a triangle belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Owner {
    Object { id: String, category: String },
    Avatar { id: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneGeometry {
    pub triangles: Vec<[Vec3; 3]>,
    /// Owner of each triangle, by index into `owners`.
    pub owner_of: Vec<u32>,
    pub owners: Vec<Owner>,
}

impl SceneGeometry {
    fn push_mesh(&mut self, mesh: &Mesh, owner: Owner) {
        let o = self.owners.len() as u32;
        self.owners.push(owner);
        for i in 0..mesh.triangles().len() {
            self.triangles.push(mesh.triangle(i));
            self.owner_of.push(o);
        }
    }

    pub fn owner(&self, triangle: u32) -> &Owner {
        &self.owners[self.owner_of[triangle as usize] as usize]
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Objects and avatars as one indexed mesh.
    pub fn to_mesh(&self) -> Result<Mesh, EncodeError> {
        if self.triangles.is_empty() {
            return Err(EncodeError::EmptyScene);
        }
        let vertices: Vec<Vec3> = self.triangles.iter().flatten().copied().collect();
        let tris = (0..self.triangles.len() as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
        Mesh::new(vertices, tris).map_err(|e| EncodeError::Mesh(e.to_string()))
    }
}

/// Closed capsule around the segment `a`–`b`.
pub fn capsule_mesh(a: Vec3, b: Vec3, radius: f64) -> Mesh {
    let axis = (b - a).try_normalize().unwrap_or(Vec3::Y);
    let u = axis.any_orthogonal();
    let v = axis.cross(u);
    // Latitudes from the pole below `a` to the pole above `b`.
    let mut rows: Vec<(Vec3, f64)> = Vec::new();
    for k in 0..=CAPSULE_CAP_RINGS {
        let phi = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::FRAC_PI_2 / CAPSULE_CAP_RINGS as f64;
        rows.push((a, phi));
    }
    for k in 0..=CAPSULE_CAP_RINGS {
        let phi = k as f64 * std::f64::consts::FRAC_PI_2 / CAPSULE_CAP_RINGS as f64;
        rows.push((b, phi));
    }
    let mut vertices = Vec::new();
    for (c, phi) in &rows {
        let (s, co) = phi.sin_cos();
        for j in 0..CAPSULE_SEGMENTS {
            let t = j as f64 * std::f64::consts::TAU / CAPSULE_SEGMENTS as f64;
            let ring = (u * t.cos() + v * t.sin()) * (co * radius);
            vertices.push(*c + ring + axis * (s * radius));
        }
    }
    let n = CAPSULE_SEGMENTS as u32;
    let mut tris = Vec::new();
    for r in 0..rows.len() as u32 - 1 {
        for j in 0..n {
            let (a0, a1) = (r * n + j, r * n + (j + 1) % n);
            let (b0, b1) = (a0 + n, a1 + n);
            tris.push([a0, a1, b1]);
            tris.push([a0, b1, b0]);
        }
    }
    Mesh::new(vertices, tris).expect("capsule is well formed")
}

/// Bone capsules plus a head sphere.
pub fn avatar_mesh(avatar: &AvatarInstance) -> Mesh {
    let frames = avatar.joint_frames();
    let mut mesh: Option<Mesh> = None;
    let mut add = |m: Mesh| match &mut mesh {
        Some(acc) => acc.merge(&m),
        None => mesh = Some(m),
    };
    for (p, c) in avatar.bones() {
        add(capsule_mesh(frames[p].position, frames[c].position, BONE_RADIUS));
    }
    if let Some(h) = avatar.rig.index_of("head") {
        let p = frames[h].position;
        add(capsule_mesh(p, p, HEAD_RADIUS));
    }
    mesh.unwrap_or_else(|| {
        let p = frames[0].position;
        capsule_mesh(p, p, BONE_RADIUS)
    })
}

/// Gathers object meshes (by `mesh_ref`) and avatar capsules. Lights carry
/// no geometry.
pub fn scene_geometry(scene: &Scene, meshes: &MeshStore) -> Result<SceneGeometry, EncodeError> {
    let mut g = SceneGeometry::default();
    for o in &scene.objects {
        let mesh = meshes.get(&o.mesh_ref).ok_or_else(|| EncodeError::MissingMesh(o.mesh_ref.clone()))?;
        g.push_mesh(
            &mesh.transformed(&o.transform),
            Owner::Object {
                id: o.id.clone(),
                category: o.category.clone(),
            },
        );
    }
    for a in &scene.avatars {
        g.push_mesh(&avatar_mesh(a), Owner::Avatar { id: a.id.clone() });
    }
    Ok(g)
}
