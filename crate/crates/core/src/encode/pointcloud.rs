use rand::SeedableRng;
use rand::distr::Distribution;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::EncodeError;
use crate::assets::Mesh;
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPoint {
    pub position: Vec3,
    pub triangle: u32,
}

/// `n` points on the surface: triangles drawn by area, positions uniform
/// within each triangle.
pub fn sample_pointcloud(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<SampledPoint>, EncodeError> {
    if n == 0 {
        return Err(EncodeError::InvalidCount);
    }
    let areas: Vec<f64> = (0..mesh.triangles().len())
        .map(|i| {
            let [a, b, c] = mesh.triangle(i);
            0.5 * (b - a).cross(c - a).length()
        })
        .collect();
    let dist = WeightedIndex::new(&areas).map_err(|_| EncodeError::EmptyScene)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let t = dist.sample(&mut rng);
            let [a, b, c] = mesh.triangle(t);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            SampledPoint {
                position: a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2),
                triangle: t as u32,
            }
        })
        .collect())
}

/// ASCII PLY with vertex elements only.
pub fn pointcloud_to_ply(points: &[SampledPoint]) -> String {
    let mut s = format!("ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n", points.len());
    for p in points {
        s.push_str(&format!("{} {} {}\n", p.position.x, p.position.y, p.position.z));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle() {
        let m = Mesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]]).unwrap();
        let pts = sample_pointcloud(&m, 500, 1).unwrap();
        assert_eq!(pts.len(), 500);
        for p in &pts {
            let q = p.position;
            assert!(q.x >= -1e-12 && q.y >= -1e-12 && q.x + q.y <= 1.0 + 1e-12 && q.z == 0.0);
        }
        assert_eq!(pts, sample_pointcloud(&m, 500, 1).unwrap());
        assert_eq!(sample_pointcloud(&m, 0, 1), Err(EncodeError::InvalidCount));
    }

    #[test]
    fn degenerate_mesh_is_empty() {
        let m = Mesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::X * 2.0], vec![[0, 1, 2]]).unwrap();
        assert_eq!(sample_pointcloud(&m, 3, 0), Err(EncodeError::EmptyScene));
    }
}
