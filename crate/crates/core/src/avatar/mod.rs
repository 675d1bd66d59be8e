//! Articulated humanoid rig: forward kinematics, FABRIK posing and prefab poses.

mod ik;
mod pose;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ik::{IkChain, IkError, IkOptions, IkOutcome, solve_ik};
pub use pose::{PoseError, PoseTable, apply_prefab_pose};

use crate::interaction::AffordanceSet;
use crate::math::Vec3;
use crate::scene::{Aabb, Rotation, TransformTRS};

/// Per-axis Euler limits in degrees (yaw about y, pitch about x, roll about z).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointLimits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll: Option<(f64, f64)>,
}

impl JointLimits {
    pub fn clamp(&self, r: Rotation) -> Rotation {
        let (mut y, mut p, mut z) = r.to_euler_deg();
        let clamp = |v: f64, lim: Option<(f64, f64)>| lim.map_or(v, |(lo, hi)| v.clamp(lo, hi));
        y = clamp(y, self.yaw);
        p = clamp(p, self.pitch);
        z = clamp(z, self.roll);
        Rotation::from_euler_deg(y, p, z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<String>,
    /// Offset from the parent joint, in the parent's frame (meters).
    pub rest_offset: Vec3,
    pub local_rotation: Rotation,
    pub limits: Option<JointLimits>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RigError {
    #[error("rig has no joints")]
    Empty,
    #[error("rig must have exactly one root joint, found {0}")]
    RootCount(usize),
    #[error("duplicate joint name `{0}`")]
    DuplicateJoint(String),
    #[error("joint `{joint}` references unknown parent `{parent}`")]
    UnknownParent { joint: String, parent: String },
    #[error("joint hierarchy contains a cycle through `{0}`")]
    Cycle(String),
    #[error("rig document: {0}")]
    Document(String),
}

/// Joint tree stored parent-before-child.
#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    joints: Vec<Joint>,
    parents: Vec<Option<usize>>,
}

#[derive(Deserialize)]
struct RigDoc {
    joints: Vec<JointDoc>,
}

#[derive(Deserialize)]
struct JointDoc {
    name: String,
    parent: Option<String>,
    rest_offset: Vec3,
    #[serde(default)]
    limits: Option<JointLimits>,
}

impl Rig {
    /// Validates the hierarchy and orders joints parent-first (stable for
    /// already-ordered input).
    pub fn new(joints: Vec<Joint>) -> Result<Self, RigError> {
        if joints.is_empty() {
            return Err(RigError::Empty);
        }
        let mut by_name = HashMap::new();
        for (i, j) in joints.iter().enumerate() {
            if by_name.insert(j.name.clone(), i).is_some() {
                return Err(RigError::DuplicateJoint(j.name.clone()));
            }
        }
        let roots = joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(RigError::RootCount(roots));
        }
        for j in &joints {
            if let Some(p) = &j.parent
                && !by_name.contains_key(p)
            {
                return Err(RigError::UnknownParent {
                    joint: j.name.clone(),
                    parent: p.clone(),
                });
            }
        }
        let mut ordered: Vec<Joint> = Vec::with_capacity(joints.len());
        let mut placed = vec![false; joints.len()];
        while ordered.len() < joints.len() {
            let before = ordered.len();
            for (i, j) in joints.iter().enumerate() {
                if placed[i] {
                    continue;
                }
                let ready = match &j.parent {
                    None => true,
                    Some(p) => placed[by_name[p]],
                };
                if ready {
                    placed[i] = true;
                    ordered.push(j.clone());
                }
            }
            if ordered.len() == before {
                let stuck = joints.iter().zip(&placed).find(|(_, p)| !**p).map(|(j, _)| j.name.clone());
                return Err(RigError::Cycle(stuck.unwrap_or_default()));
            }
        }
        let index: HashMap<&str, usize> = ordered.iter().enumerate().map(|(i, j)| (j.name.as_str(), i)).collect();
        let parents = ordered.iter().map(|j| j.parent.as_deref().map(|p| index[p])).collect();
        Ok(Self { joints: ordered, parents })
    }

    pub fn from_json(text: &str) -> Result<Self, RigError> {
        let doc: RigDoc = serde_json::from_str(text).map_err(|e| RigError::Document(e.to_string()))?;
        Self::new(
            doc.joints
                .into_iter()
                .map(|j| Joint {
                    name: j.name,
                    parent: j.parent,
                    rest_offset: j.rest_offset,
                    local_rotation: Rotation::IDENTITY,
                    limits: j.limits,
                })
                .collect(),
        )
    }

    /// The shipped 16-joint humanoid in a T-pose, facing +z.
    pub fn humanoid() -> Self {
        Self::from_json(include_str!("../../resources/rig_humanoid.json")).expect("shipped rig is valid")
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn parent_index(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn joint(&self, name: &str) -> Option<&Joint> {
        self.index_of(name).map(|i| &self.joints[i])
    }

    pub fn set_local_rotation(&mut self, i: usize, r: Rotation) {
        self.joints[i].local_rotation = r;
    }

    /// Child indices of joint `i`.
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents.iter().enumerate().filter(move |(_, p)| **p == Some(i)).map(|(c, _)| c)
    }
}

/// World-space frame of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFrame {
    pub position: Vec3,
    pub rotation: Rotation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvatarInstance {
    pub id: String,
    pub rig: Rig,
    /// Ground point under the avatar and its facing; scale is ignored.
    pub root_transform: TransformTRS,
    pub initial_root_transform: TransformTRS,
    pub prefab_pose: Option<String>,
    pub affordances: AffordanceSet,
}

/// Capsule radius used when avatars are turned into geometry.
pub const BONE_RADIUS: f64 = 0.05;

impl AvatarInstance {
    pub fn new(id: impl Into<String>, rig: Rig, root_transform: TransformTRS, affordances: AffordanceSet) -> Self {
        Self {
            id: id.into(),
            rig,
            root_transform,
            initial_root_transform: root_transform,
            prefab_pose: None,
            affordances,
        }
    }

    /// World frames of all joints, indexed like `rig.joints()`.
    pub fn joint_frames(&self) -> Vec<JointFrame> {
        let root_rot = self.root_transform.rotation;
        let mut frames: Vec<JointFrame> = Vec::with_capacity(self.rig.len());
        for (i, j) in self.rig.joints().iter().enumerate() {
            let frame = match self.rig.parent_index(i) {
                None => JointFrame {
                    position: self.root_transform.translation + root_rot.rotate(j.rest_offset),
                    rotation: root_rot.then(j.local_rotation),
                },
                Some(p) => {
                    let parent = frames[p];
                    JointFrame {
                        position: parent.position + parent.rotation.rotate(j.rest_offset),
                        rotation: parent.rotation.then(j.local_rotation),
                    }
                }
            };
            frames.push(frame);
        }
        frames
    }

    /// Bones as (parent index, child index) pairs.
    pub fn bones(&self) -> Vec<(usize, usize)> {
        (0..self.rig.len()).filter_map(|i| self.rig.parent_index(i).map(|p| (p, i))).collect()
    }

    pub fn world_bounds(&self) -> Aabb {
        let r = Vec3::splat(BONE_RADIUS);
        let b = Aabb::from_points(self.joint_frames().into_iter().map(|f| f.position)).expect("rig is nonempty");
        Aabb::new(b.min - r, b.max + r)
    }
}

/// World position of every joint, keyed by name.
pub fn forward_kinematics(avatar: &AvatarInstance) -> BTreeMap<String, Vec3> {
    avatar
        .rig
        .joints()
        .iter()
        .zip(avatar.joint_frames())
        .map(|(j, f)| (j.name.clone(), f.position))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn avatar() -> AvatarInstance {
        AvatarInstance::new("a", Rig::humanoid(), TransformTRS::IDENTITY, AffordanceSet::default())
    }

    #[test]
    fn humanoid_has_sixteen_joints_one_root() {
        let rig = Rig::humanoid();
        assert_eq!(rig.len(), 16);
        assert_eq!(rig.joints()[0].name, "pelvis");
        assert_eq!(rig.joints().iter().filter(|j| j.parent.is_none()).count(), 1);
    }

    #[test]
    fn rig_errors() {
        let j = |n: &str, p: Option<&str>| Joint {
            name: n.into(),
            parent: p.map(Into::into),
            rest_offset: Vec3::Y,
            local_rotation: Rotation::IDENTITY,
            limits: None,
        };
        assert_eq!(Rig::new(vec![]), Err(RigError::Empty));
        assert_eq!(Rig::new(vec![j("a", None), j("b", None)]), Err(RigError::RootCount(2)));
        assert!(matches!(Rig::new(vec![j("a", None), j("b", Some("zz"))]), Err(RigError::UnknownParent { .. })));
        assert!(matches!(
            Rig::new(vec![j("r", None), j("a", Some("b")), j("b", Some("a"))]),
            Err(RigError::Cycle(_))
        ));
        // children listed before parents get reordered
        let rig = Rig::new(vec![j("c", Some("b")), j("b", Some("a")), j("a", None)]).unwrap();
        let names: Vec<_> = rig.joints().iter().map(|j| j.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn identity_pose_accumulates_offsets() {
        let mut a = avatar();
        a.root_transform.translation = Vec3::new(1.0, 0.0, -2.0);
        let fk = forward_kinematics(&a);
        // pelvis 0.95, spine +0.25, neck +0.25, shoulder (-0.18, -0.05)
        let s = fk["r_shoulder"];
        assert!((s - Vec3::new(1.0 - 0.18, 0.95 + 0.25 + 0.25 - 0.05, -2.0)).length() < 1e-12);
        let w = fk["r_wrist"];
        assert!((w.x - (1.0 - 0.18 - 0.28 - 0.26)).abs() < 1e-12);
    }

    #[test]
    fn root_half_turn_negates_xz() {
        let a = avatar();
        let mut b = avatar();
        b.root_transform.rotation = Rotation::yaw_deg(180.0);
        let fa = forward_kinematics(&a);
        let fb = forward_kinematics(&b);
        for (name, pa) in &fa {
            let pb = fb[name];
            assert!((pb.x + pa.x).abs() < 1e-12, "{name}");
            assert!((pb.z + pa.z).abs() < 1e-12, "{name}");
            assert!((pb.y - pa.y).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn random_pose_preserves_bone_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = avatar();
        a.root_transform.rotation = Rotation::from_euler_deg(33.0, 0.0, 0.0);
        for i in 0..a.rig.len() {
            let q = Quat::from_euler_deg(
                rng.random_range(-180.0..180.0),
                rng.random_range(-89.0..89.0),
                rng.random_range(-180.0..180.0),
            );
            a.rig.set_local_rotation(i, Rotation::from_quat(q));
        }
        let frames = a.joint_frames();
        for (p, c) in a.bones() {
            let len = frames[c].position.distance(frames[p].position);
            let rest = a.rig.joints()[c].rest_offset.length();
            assert!(((len - rest) / rest).abs() <= 1e-12);
        }
    }
}
