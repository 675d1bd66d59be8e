use std::collections::BTreeMap;

use thiserror::Error;

use super::AvatarInstance;
use crate::scene::Rotation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("unknown pose `{0}`")]
    UnknownPose(String),
    #[error("pose table: {0}")]
    Document(String),
}

/// Named poses: joint name -> (yaw, pitch, roll) degrees. Joints absent from
/// an entry take the identity rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTable {
    poses: BTreeMap<String, BTreeMap<String, [f64; 3]>>,
}

impl PoseTable {
    pub fn from_json(text: &str) -> Result<Self, PoseError> {
        let poses = serde_json::from_str(text).map_err(|e| PoseError::Document(e.to_string()))?;
        Ok(Self { poses })
    }

    /// stand / sit / walk for the shipped humanoid.
    pub fn shipped() -> Self {
        Self::from_json(include_str!("../../resources/poses.json")).expect("shipped pose table is valid")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.poses.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&BTreeMap<String, [f64; 3]>> {
        self.poses.get(name)
    }
}

/// Replaces every local joint rotation with the table entry for `pose_name`.
pub fn apply_prefab_pose(avatar: &AvatarInstance, pose_name: &str, table: &PoseTable) -> Result<AvatarInstance, PoseError> {
    let pose = table.get(pose_name).ok_or_else(|| PoseError::UnknownPose(pose_name.to_string()))?;
    let mut out = avatar.clone();
    for i in 0..out.rig.len() {
        let name = &out.rig.joints()[i].name;
        let r = pose
            .get(name)
            .map_or(Rotation::IDENTITY, |[y, p, r]| Rotation::from_euler_deg(*y, *p, *r));
        out.rig.set_local_rotation(i, r);
    }
    out.prefab_pose = Some(pose_name.to_string());
    Ok(out)
}
