use serde::{Deserialize, Serialize};

use super::EncodeError;
use crate::avatar::AvatarInstance;
use crate::math::Vec3;
use crate::scene::CameraSpec;

/// OpenPose COCO-18 keypoint names in output order.
pub const KEYPOINT_NAMES: [&str; 18] = [
    "nose", "neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow", "l_wrist", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee",
    "l_ankle", "r_eye", "l_eye", "r_ear", "l_ear",
];

/// Rig joint feeding each of the first fourteen keypoints.
const SOURCE_JOINTS: [&str; 14] = [
    "head", "neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow", "l_wrist", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee",
    "l_ankle",
];

/// 18 `[x, y, confidence]` triples; off-frame points are `[0, 0, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub keypoints: [[f64; 3]; 18],
}

/// World positions of the 18 keypoints. Eyes and ears are placed from the
/// head joint's frame, scaled by the neck–head bone length.
pub fn keypoints_world(avatar: &AvatarInstance) -> Result<[Vec3; 18], EncodeError> {
    let frames = avatar.joint_frames();
    let idx = |name: &str| avatar.rig.index_of(name).ok_or_else(|| EncodeError::UnmappedJoint(name.to_string()));
    let mut out = [Vec3::ZERO; 18];
    for (k, name) in SOURCE_JOINTS.iter().enumerate() {
        out[k] = frames[idx(name)?].position;
    }
    let head = frames[idx("head")?];
    let len = frames[idx("neck")?].position.distance(head.position);
    let fwd = head.rotation.rotate(Vec3::Z);
    // The figure's right is local -x.
    let right = head.rotation.rotate(-Vec3::X);
    let h = head.position;
    out[14] = h + fwd * (0.35 * len) + right * (0.25 * len);
    out[15] = h + fwd * (0.35 * len) - right * (0.25 * len);
    out[16] = h + right * (0.5 * len);
    out[17] = h - right * (0.5 * len);
    Ok(out)
}

pub fn encode_skeleton(avatar: &AvatarInstance, camera: &CameraSpec) -> Result<SkeletonFrame, EncodeError> {
    let world = keypoints_world(avatar)?;
    let (w, h) = (camera.image_width as f64, camera.image_height as f64);
    let keypoints = world.map(|p| match camera.project(p) {
        Some((x, y, _)) if (0.0..w).contains(&x) && (0.0..h).contains(&y) => [x, y, 1.0],
        _ => [0.0, 0.0, 0.0],
    });
    Ok(SkeletonFrame { keypoints })
}

#[derive(Serialize, Deserialize)]
struct Person {
    pose_keypoints_2d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseFile {
    people: Vec<Person>,
}

fn round_px(v: f64) -> f64 {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 { 0.0 } else { r }
}

/// OpenPose-style `{"people": [{"pose_keypoints_2d": [...]}]}`, pixel
/// coordinates rounded to 1/1000.
pub fn skeletons_json(frames: &[SkeletonFrame]) -> String {
    let file = PoseFile {
        people: frames
            .iter()
            .map(|f| Person {
                pose_keypoints_2d: f.keypoints.iter().flatten().map(|&v| round_px(v)).collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("plain data");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avatar::Rig;
    use crate::interaction::AffordanceSet;
    use crate::scene::{Rotation, TransformTRS};

    fn avatar_at(p: Vec3, yaw: f64) -> AvatarInstance {
        AvatarInstance::new("a", Rig::humanoid(), TransformTRS::new(p, Rotation::yaw_deg(yaw), Vec3::ONE), AffordanceSet::default())
    }

    #[test]
    fn eighteen_points_with_head_extras() {
        let a = avatar_at(Vec3::ZERO, 0.0);
        let k = keypoints_world(&a).unwrap();
        let head = k[0];
        // Facing +z: eyes ahead of the head, ears level with it.
        assert!(k[14].z > head.z && k[15].z > head.z);
        assert_eq!(k[16].z, head.z);
        // Figure's right eye and ear sit on -x.
        assert!(k[14].x < head.x && k[16].x < k[14].x);
        assert!(k[15].x > head.x && k[17].x > k[15].x);
    }

    #[test]
    fn behind_camera_is_all_zero() {
        let cam = CameraSpec::looking_at(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 1.0, -5.0));
        let f = encode_skeleton(&avatar_at(Vec3::new(0.0, 0.0, 4.0), 0.0), &cam).unwrap();
        assert!(f.keypoints.iter().all(|k| *k == [0.0, 0.0, 0.0]));
    }

    #[test]
    fn neck_on_axis_projects_to_center_column() {
        let a = avatar_at(Vec3::new(0.0, 0.0, -3.0), 180.0);
        let neck = keypoints_world(&a).unwrap()[1];
        let cam = CameraSpec::looking_at(Vec3::new(0.0, neck.y, 0.0), neck);
        let f = encode_skeleton(&a, &cam).unwrap();
        assert!((f.keypoints[1][0] - cam.image_width as f64 / 2.0).abs() <= 0.5);
        assert_eq!(f.keypoints[1][2], 1.0);
    }

    #[test]
    fn json_shape() {
        let a = avatar_at(Vec3::new(0.0, 0.0, -3.0), 0.0);
        let cam = CameraSpec::looking_at(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 1.0, -3.0));
        let s = skeletons_json(&[encode_skeleton(&a, &cam).unwrap()]);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["people"][0]["pose_keypoints_2d"].as_array().unwrap().len(), 54);
    }
}
