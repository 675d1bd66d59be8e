use serde::{Deserialize, Serialize};

use super::EncodeError;
use crate::math::Vec3;
use crate::scene::{CameraSpec, LightKind, LightSpec, persist::round_sig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSummary {
    /// Vertical field of view, degrees.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
}

/// A light expressed in the camera frame (x right, y up, looking down -z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLight {
    pub kind: LightKind,
    pub position: [f64; 3],
    pub direction: [f64; 3],
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingCondition {
    pub camera: CameraSummary,
    pub lights: Vec<LocalLight>,
}

impl LightingCondition {
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("plain data");
        round_floats(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("plain data");
        s.push('\n');
        s
    }
}

fn round_floats(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            *v = serde_json::json!(round_sig(n.as_f64().expect("f64")));
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_floats),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Moves every light into the camera's frame; intensities are copied.
pub fn encode_lighting(lights: &[LightSpec], camera: &CameraSpec) -> Result<LightingCondition, EncodeError> {
    if lights.is_empty() {
        return Err(EncodeError::NoLights);
    }
    let inv = camera.rotation.inverse();
    let local = |p: Vec3| inv.rotate(p - camera.position);
    Ok(LightingCondition {
        camera: CameraSummary {
            fov: camera.vertical_fov,
            width: camera.image_width,
            height: camera.image_height,
        },
        lights: lights
            .iter()
            .map(|l| LocalLight {
                kind: l.kind,
                position: local(l.position).to_array(),
                direction: inv.rotate(l.direction).to_array(),
                intensity: l.intensity,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Rotation;

    #[test]
    fn light_at_camera_is_origin() {
        let cam = CameraSpec::looking_at(Vec3::new(1.0, 2.0, 3.0), Vec3::ZERO);
        let out = encode_lighting(&[LightSpec::point("p", cam.position, 0.5)], &cam).unwrap();
        assert!(out.lights[0].position.iter().all(|c| c.abs() < 1e-12));
        assert_eq!(out.lights[0].intensity, 0.5);
    }

    #[test]
    fn identity_camera_keeps_world_coordinates() {
        let cam = CameraSpec {
            position: Vec3::ZERO,
            rotation: Rotation::IDENTITY,
            ..CameraSpec::default()
        };
        let l = LightSpec::directional("d", Vec3::new(1.0, -1.0, 0.0), 1.0);
        let out = encode_lighting(std::slice::from_ref(&l), &cam).unwrap();
        assert_eq!(out.lights[0].direction, l.direction.to_array());
        assert_eq!(encode_lighting(&[], &cam), Err(EncodeError::NoLights));
    }
}
