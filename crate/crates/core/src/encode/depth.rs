use image::{ImageBuffer, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use super::geometry::{Owner, SceneGeometry};
use super::raster::{Raster, rasterize};
use super::{EncodeError, png_bytes};
use crate::math::Vec3;
use crate::scene::{CameraSpec, LightKind, LightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// Linear in view depth between the near and far planes.
    #[default]
    Linear,
    /// Linear in 1/depth, as disparity-style backbones expect.
    Inverse,
}

/// 16-bit depth, row-major, near = 65535, background = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u16>,
    pub mode: DepthMode,
}

impl DepthImage {
    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn to_png(&self) -> Result<Vec<u8>, EncodeError> {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width, self.height, self.values.clone()).expect("buffer matches dimensions");
        png_bytes(&img)
    }
}

/// Maps a view depth in [near, far] onto 16 bits.
pub fn quantize_depth(d: f64, camera: &CameraSpec, mode: DepthMode) -> u16 {
    if !d.is_finite() {
        return 0;
    }
    let t = match mode {
        DepthMode::Linear => (camera.far - d) / (camera.far - camera.near),
        DepthMode::Inverse => (1.0 / d - 1.0 / camera.far) / (1.0 / camera.near - 1.0 / camera.far),
    };
    (t.clamp(0.0, 1.0) * 65535.0).round() as u16
}

pub fn depth_from_raster(r: &Raster, camera: &CameraSpec, mode: DepthMode) -> DepthImage {
    DepthImage {
        width: r.width,
        height: r.height,
        values: r.depth.iter().map(|&d| quantize_depth(d, camera, mode)).collect(),
        mode,
    }
}

pub fn render_depth(geometry: &SceneGeometry, camera: &CameraSpec, mode: DepthMode) -> Result<DepthImage, EncodeError> {
    Ok(depth_from_raster(&rasterize(camera, &geometry.triangles)?, camera, mode))
}

const AVATAR_ALBEDO: [f64; 3] = [0.85, 0.7, 0.6];
const POINT_FALLOFF_SQ: f64 = 4.0;

/// Fixed base color per category; unknown categories get a stable hashed tint.
pub fn category_albedo(category: &str) -> [f64; 3] {
    let fixed = match category {
        "table" | "desk" => Some([0.6, 0.42, 0.25]),
        "chair" => Some([0.55, 0.35, 0.2]),
        "sofa" => Some([0.3, 0.4, 0.65]),
        "bed" => Some([0.85, 0.85, 0.8]),
        "lamp" => Some([0.95, 0.9, 0.7]),
        "cabinet" | "bookshelf" => Some([0.5, 0.33, 0.2]),
        "flowerpot" | "trees" | "tree" => Some([0.25, 0.6, 0.25]),
        "display" | "laptop" | "telephone" => Some([0.15, 0.15, 0.18]),
        "mug" | "jar" | "bottle" => Some([0.9, 0.9, 0.92]),
        "pillow" => Some([0.9, 0.8, 0.85]),
        _ => None,
    };
    fixed.unwrap_or_else(|| {
        let h = category.bytes().fold(0x811c_9dc5u32, |h, b| (h ^ b as u32).wrapping_mul(0x0100_0193));
        let c = |s: u32| 0.35 + 0.5 * ((h >> s) & 0xff) as f64 / 255.0;
        [c(0), c(8), c(16)]
    })
}

/// Sum of light contributions at `p` with unit normal `n`, before albedo.
pub fn irradiance(p: Vec3, n: Vec3, lights: &[LightSpec]) -> f64 {
    lights
        .iter()
        .map(|l| match l.kind {
            LightKind::Global => l.intensity * (0.5 + 0.5 * n.dot(-l.direction)),
            LightKind::Directional => l.intensity * n.dot(-l.direction).max(0.0),
            LightKind::Point => {
                let to = l.position - p;
                let d2 = to.length_squared();
                let Some(dir) = to.try_normalize() else { return 0.0 };
                l.intensity * n.dot(dir).max(0.0) / (1.0 + d2 / POINT_FALLOFF_SQ)
            }
        })
        .sum()
}

/// Linear pre-clamp shading per pixel (RGB), `None` for background.
pub fn shade(geometry: &SceneGeometry, lights: &[LightSpec], camera: &CameraSpec) -> Result<Vec<Option<[f64; 3]>>, EncodeError> {
    let r = rasterize(camera, &geometry.triangles)?;
    let f = camera.focal_px();
    let (cx, cy) = (camera.image_width as f64 * 0.5, camera.image_height as f64 * 0.5);
    let mut out = Vec::with_capacity(r.depth.len());
    for y in 0..r.height {
        for x in 0..r.width {
            let (d, tri) = r.at(x, y);
            let Some(t) = tri else {
                out.push(None);
                continue;
            };
            let view = Vec3::new((x as f64 + 0.5 - cx) / f * d, -(y as f64 + 0.5 - cy) / f * d, -d);
            let p = camera.position + camera.rotation.rotate(view);
            let [a, b, c] = geometry.triangles[t as usize];
            let mut n = (b - a).cross(c - a).normalize_or(Vec3::Y);
            if n.dot(camera.position - p) < 0.0 {
                n = -n;
            }
            let albedo = match geometry.owner(t) {
                Owner::Object { category, .. } => category_albedo(category),
                Owner::Avatar { .. } => AVATAR_ALBEDO,
            };
            let e = irradiance(p, n, lights);
            out.push(Some(albedo.map(|k| k * e)));
        }
    }
    Ok(out)
}

/// Flat Lambert render of the geometry; lights themselves are never drawn.
pub fn render_scene_image(geometry: &SceneGeometry, lights: &[LightSpec], camera: &CameraSpec) -> Result<RgbImage, EncodeError> {
    let px = shade(geometry, lights, camera)?;
    let mut img = RgbImage::new(camera.image_width, camera.image_height);
    for (i, p) in px.into_iter().enumerate() {
        let rgb = p.map(|c| c.map(|k| (k.clamp(0.0, 1.0) * 255.0).round() as u8)).unwrap_or([0, 0, 0]);
        let (x, y) = (i as u32 % camera.image_width, i as u32 / camera.image_width);
        img.put_pixel(x, y, image::Rgb(rgb));
    }
    Ok(img)
}
