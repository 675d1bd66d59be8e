//! Software z-buffer over world-space triangles.

use super::EncodeError;
use crate::math::Vec3;
use crate::scene::CameraSpec;

/// Per-pixel nearest view depth and the index of the triangle that won it.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    /// Distance along the viewing axis; `f64::INFINITY` where nothing drew.
    pub depth: Vec<f64>,
    pub triangle: Vec<Option<u32>>,
}

impl Raster {
    fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            triangle: vec![None; n],
        }
    }

    pub fn at(&self, x: u32, y: u32) -> (f64, Option<u32>) {
        let i = y as usize * self.width as usize + x as usize;
        (self.depth[i], self.triangle[i])
    }
}

pub(crate) fn check_camera(camera: &CameraSpec) -> Result<(), EncodeError> {
    if camera.is_valid() { Ok(()) } else { Err(EncodeError::DegenerateCamera) }
}

/// Clips a view-space polygon to `z <= -near`.
fn clip_near(poly: &[Vec3], near: f64) -> Vec<Vec3> {
    let inside = |p: &Vec3| -p.z >= near;
    let mut out = Vec::with_capacity(4);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        match (inside(&a), inside(&b)) {
            (true, true) => out.push(b),
            (true, false) | (false, true) => {
                let t = (-near - a.z) / (b.z - a.z);
                out.push(a.lerp(b, t));
                if inside(&b) {
                    out.push(b);
                }
            }
            (false, false) => {}
        }
    }
    out
}

/// Screen point with its view depth.
#[derive(Clone, Copy)]
struct Sv {
    x: f64,
    y: f64,
    d: f64,
}

fn is_top_left(a: Sv, b: Sv) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

fn edge(a: Sv, b: Sv, px: f64, py: f64) -> f64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

fn draw(r: &mut Raster, tri: [Sv; 3], id: u32, far: f64) {
    let [v0, mut v1, mut v2] = tri;
    let mut area = edge(v0, v1, v2.x, v2.y);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        std::mem::swap(&mut v1, &mut v2);
        area = -area;
    }
    let (w, h) = (r.width as f64, r.height as f64);
    let min_x = v0.x.min(v1.x).min(v2.x).floor().max(0.0);
    let max_x = v0.x.max(v1.x).max(v2.x).ceil().min(w);
    let min_y = v0.y.min(v1.y).min(v2.y).floor().max(0.0);
    let max_y = v0.y.max(v1.y).max(v2.y).ceil().min(h);
    if min_x >= max_x || min_y >= max_y {
        return;
    }
    let tl = [is_top_left(v1, v2), is_top_left(v2, v0), is_top_left(v0, v1)];
    let inv = [1.0 / v0.d, 1.0 / v1.d, 1.0 / v2.d];
    for py in min_y as u32..max_y as u32 {
        let cy = py as f64 + 0.5;
        for px in min_x as u32..max_x as u32 {
            let cx = px as f64 + 0.5;
            let e = [edge(v1, v2, cx, cy), edge(v2, v0, cx, cy), edge(v0, v1, cx, cy)];
            if !(0..3).all(|k| e[k] > 0.0 || (e[k] == 0.0 && tl[k])) {
                continue;
            }
            let inv_d = (e[0] * inv[0] + e[1] * inv[1] + e[2] * inv[2]) / area;
            let d = 1.0 / inv_d;
            if d > far {
                continue;
            }
            let i = py as usize * r.width as usize + px as usize;
            if d < r.depth[i] {
                r.depth[i] = d;
                r.triangle[i] = Some(id);
            }
        }
    }
}

/// Rasterizes `triangles` through `camera`, sampling pixel centers with a
/// top-left fill rule and perspective-correct depth. Ties keep the earlier
/// triangle.
pub fn rasterize(camera: &CameraSpec, triangles: &[[Vec3; 3]]) -> Result<Raster, EncodeError> {
    check_camera(camera)?;
    let mut r = Raster::empty(camera.image_width, camera.image_height);
    let f = camera.focal_px();
    let (cx, cy) = (camera.image_width as f64 * 0.5, camera.image_height as f64 * 0.5);
    let to_screen = |v: Vec3| {
        let d = -v.z;
        Sv {
            x: cx + f * v.x / d,
            y: cy - f * v.y / d,
            d,
        }
    };
    for (id, t) in triangles.iter().enumerate() {
        let view = t.map(|p| camera.to_view(p));
        if view.iter().all(|v| -v.z > camera.far) {
            continue;
        }
        let poly = if view.iter().all(|v| -v.z >= camera.near) { view.to_vec() } else { clip_near(&view, camera.near) };
        if poly.len() < 3 {
            continue;
        }
        let s0 = to_screen(poly[0]);
        for k in 1..poly.len() - 1 {
            draw(&mut r, [s0, to_screen(poly[k]), to_screen(poly[k + 1])], id as u32, camera.far);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Rotation;

    fn camera(w: u32, h: u32) -> CameraSpec {
        CameraSpec {
            position: Vec3::ZERO,
            rotation: Rotation::IDENTITY,
            vertical_fov: 90.0,
            image_width: w,
            image_height: h,
            near: 0.1,
            far: 10.0,
        }
    }

    fn quad(z: f64, half: f64) -> [[Vec3; 3]; 2] {
        let p = |x, y| Vec3::new(x, y, z);
        [[p(-half, -half), p(half, -half), p(half, half)], [p(-half, -half), p(half, half), p(-half, half)]]
    }

    #[test]
    fn nearer_triangle_wins() {
        let mut tris = quad(-5.0, 10.0).to_vec();
        tris.extend(quad(-2.0, 0.5));
        let r = rasterize(&camera(32, 32), &tris).unwrap();
        let (d, id) = r.at(16, 16);
        assert!((d - 2.0).abs() < 1e-12);
        assert!(id.unwrap() >= 2);
        let (d, id) = r.at(0, 0);
        assert!((d - 5.0).abs() < 1e-12);
        assert!(id.unwrap() < 2);
    }

    #[test]
    fn shared_edge_covers_each_pixel_once() {
        // A full-screen quad at depth 1 with fov 90 spans exactly the image;
        // every pixel is drawn by exactly one of the two triangles.
        let cam = camera(16, 16);
        let tris = quad(-1.0, 1.0);
        let mut counts = vec![0u32; 256];
        for t in &tris {
            let r = rasterize(&cam, std::slice::from_ref(t)).unwrap();
            for (i, id) in r.triangle.iter().enumerate() {
                counts[i] += id.is_some() as u32;
            }
        }
        assert!(counts.iter().all(|&c| c == 1), "{counts:?}");
    }

    #[test]
    fn clipped_and_degenerate() {
        let cam = camera(8, 8);
        // Crosses the near plane: the visible part still draws.
        let t = [Vec3::new(-1.0, -1.0, 1.0), Vec3::new(1.0, -1.0, -3.0), Vec3::new(0.0, 2.0, -3.0)];
        let r = rasterize(&cam, &[t]).unwrap();
        assert!(r.triangle.iter().any(Option::is_some));
        assert!(r.depth.iter().filter(|d| d.is_finite()).all(|&d| d >= cam.near - 1e-9));
        let r = rasterize(&cam, &[[Vec3::new(0.0, 0.0, -1.0); 3]]).unwrap();
        assert!(r.triangle.iter().all(Option::is_none));
        let bad = CameraSpec { near: 5.0, far: 1.0, ..cam };
        assert_eq!(rasterize(&bad, &[]), Err(EncodeError::DegenerateCamera));
    }
}
