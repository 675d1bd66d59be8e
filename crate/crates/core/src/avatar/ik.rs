//! FABRIK posing for a contiguous joint chain.

use thiserror::Error;

use super::{AvatarInstance, JointFrame};
use crate::math::{Quat, Vec3};
use crate::scene::Rotation;

/// Ordered path from the chain root to the effector, plus a world target.
#[derive(Debug, Clone, PartialEq)]
pub struct IkChain {
    pub joints: Vec<String>,
    pub target: Vec3,
}

impl IkChain {
    pub fn new<S: Into<String>>(joints: impl IntoIterator<Item = S>, target: Vec3) -> Self {
        Self {
            joints: joints.into_iter().map(Into::into).collect(),
            target,
        }
    }

    /// Chain ending at `effector` reaching up at most `bones` parents.
    pub fn ending_at(avatar: &AvatarInstance, effector: &str, bones: usize, target: Vec3) -> Option<Self> {
        let mut i = avatar.rig.index_of(effector)?;
        let mut path = vec![i];
        while path.len() <= bones {
            match avatar.rig.parent_index(i) {
                Some(p) => {
                    path.push(p);
                    i = p;
                }
                None => break,
            }
        }
        if path.len() < 2 {
            return None;
        }
        path.reverse();
        Some(Self {
            joints: path.into_iter().map(|i| avatar.rig.joints()[i].name.clone()).collect(),
            target,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub max_iters: usize,
    /// Effector distance tolerance in meters.
    pub tol: f64,
    pub apply_limits: bool,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iters: 32,
            tol: 1e-3,
            apply_limits: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IkError {
    #[error("chain needs at least two joints")]
    TooShort,
    #[error("unknown joint `{0}` in chain")]
    UnknownJoint(String),
    #[error("joint `{0}` is not the parent of the next chain joint")]
    NotContiguous(String),
    #[error("chain contains a zero-length bone ending at `{0}`")]
    DegenerateChain(String),
    #[error("target is not finite")]
    NonFiniteTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkOutcome {
    pub avatar: AvatarInstance,
    pub iterations: usize,
    /// Effector-to-target distance before the first and after every iteration.
    pub error_history: Vec<f64>,
}

impl IkOutcome {
    pub fn final_error(&self) -> f64 {
        *self.error_history.last().expect("history starts with the initial error")
    }
}

/// Moves the chain effector toward `chain.target` with FABRIK.
///
/// Bone lengths are kept exactly by writing the solved positions back as
/// local joint rotations. Joint limits (if enabled) are enforced after every
/// backward pass. An iteration that would increase the effector error is
/// discarded and the solve stops.
pub fn solve_ik(avatar: &AvatarInstance, chain: &IkChain, opts: &IkOptions) -> Result<IkOutcome, IkError> {
    if !chain.target.is_finite() {
        return Err(IkError::NonFiniteTarget);
    }
    if chain.joints.len() < 2 {
        return Err(IkError::TooShort);
    }
    let mut idx = Vec::with_capacity(chain.joints.len());
    for name in &chain.joints {
        idx.push(avatar.rig.index_of(name).ok_or_else(|| IkError::UnknownJoint(name.clone()))?);
    }
    for w in idx.windows(2) {
        if avatar.rig.parent_index(w[1]) != Some(w[0]) {
            return Err(IkError::NotContiguous(avatar.rig.joints()[w[0]].name.clone()));
        }
    }
    let lengths: Vec<f64> = idx[1..].iter().map(|&i| avatar.rig.joints()[i].rest_offset.length()).collect();
    if let Some(k) = lengths.iter().position(|&l| l <= 1e-12) {
        return Err(IkError::DegenerateChain(chain.joints[k + 1].clone()));
    }

    let target = chain.target;
    let mut current = avatar.clone();
    let mut positions = chain_positions(&current, &idx);
    let mut error = positions.last().unwrap().distance(target);
    let mut history = vec![error];
    if error <= opts.tol {
        return Ok(IkOutcome {
            avatar: current,
            iterations: 0,
            error_history: history,
        });
    }

    let root = positions[0];
    let reach: f64 = lengths.iter().sum();
    let mut iterations = 0;

    if root.distance(target) >= reach {
        // Unreachable: stretch the chain straight at the target.
        let dir = (target - root).normalize_or(Vec3::Y);
        let mut p = root;
        let mut straight = vec![p];
        for l in &lengths {
            p += dir * *l;
            straight.push(p);
        }
        let candidate = pose_from_positions(&current, &idx, &straight, opts.apply_limits);
        let cand_pos = chain_positions(&candidate, &idx);
        let cand_err = cand_pos.last().unwrap().distance(target);
        if cand_err <= error {
            current = candidate;
            error = cand_err;
        }
        history.push(error);
        return Ok(IkOutcome {
            avatar: current,
            iterations: 1,
            error_history: history,
        });
    }

    if is_collinear(&positions) {
        positions = bend(&positions, &current);
    }

    while iterations < opts.max_iters && error > opts.tol {
        iterations += 1;
        let mut p = positions.clone();
        let n = p.len() - 1;
        // forward reaching: effector pinned to target
        p[n] = target;
        for i in (0..n).rev() {
            let dir = (p[i] - p[i + 1]).normalize_or(positions[i] - positions[i + 1]);
            p[i] = p[i + 1] + dir.normalize_or(Vec3::Y) * lengths[i];
        }
        // backward reaching: root pinned
        p[0] = root;
        for i in 0..n {
            let dir = (p[i + 1] - p[i]).normalize_or(positions[i + 1] - positions[i]);
            p[i + 1] = p[i] + dir.normalize_or(Vec3::Y) * lengths[i];
        }
        let candidate = pose_from_positions(&current, &idx, &p, opts.apply_limits);
        let cand_pos = chain_positions(&candidate, &idx);
        let cand_err = cand_pos.last().unwrap().distance(target);
        if cand_err > error {
            history.push(error);
            break;
        }
        current = candidate;
        positions = cand_pos;
        error = cand_err;
        history.push(error);
    }

    Ok(IkOutcome {
        avatar: current,
        iterations,
        error_history: history,
    })
}

fn chain_positions(avatar: &AvatarInstance, idx: &[usize]) -> Vec<Vec3> {
    let frames = avatar.joint_frames();
    idx.iter().map(|&i| frames[i].position).collect()
}

fn is_collinear(p: &[Vec3]) -> bool {
    if p.len() < 3 {
        return false;
    }
    let axis = (p[p.len() - 1] - p[0]).normalize_or(Vec3::Y);
    p.iter().all(|q| {
        let d = *q - p[0];
        (d - axis * d.dot(axis)).length() < 1e-6
    })
}

/// Nudges interior joints off a straight line so FABRIK can fold the chain.
fn bend(p: &[Vec3], avatar: &AvatarInstance) -> Vec<Vec3> {
    let axis = (p[p.len() - 1] - p[0]).normalize_or(Vec3::Y);
    let mut pole = avatar.root_transform.rotation.rotate(Vec3::Z);
    if pole.cross(axis).length() < 1e-6 {
        pole = axis.any_orthogonal();
    }
    let side = (pole - axis * pole.dot(axis)).normalize_or(axis.any_orthogonal());
    let total: f64 = p.windows(2).map(|w| w[0].distance(w[1])).sum();
    let mut out = p.to_vec();
    let last = out.len() - 1;
    for q in &mut out[1..last] {
        *q += side * (1e-3 * total);
    }
    out
}

/// Writes chain positions back as local rotations, root to effector, using
/// the shortest arc from the current bone direction to the desired one.
fn pose_from_positions(avatar: &AvatarInstance, idx: &[usize], desired: &[Vec3], apply_limits: bool) -> AvatarInstance {
    let mut out = avatar.clone();
    for k in 0..idx.len() - 1 {
        let joint = idx[k];
        let child = idx[k + 1];
        let frames: Vec<JointFrame> = out.joint_frames();
        let here = frames[joint];
        let bone = here.rotation.rotate(out.rig.joints()[child].rest_offset);
        let want = desired[k + 1] - here.position;
        let (Some(from), Some(to)) = (bone.try_normalize(), want.try_normalize()) else {
            continue;
        };
        let delta = Rotation::from_quat(Quat::from_rotation_arc(from, to));
        let new_world = delta.then(here.rotation);
        let parent_world = match out.rig.parent_index(joint) {
            Some(p) => frames[p].rotation,
            None => out.root_transform.rotation,
        };
        let mut local = parent_world.inverse().then(new_world);
        if apply_limits && let Some(lim) = out.rig.joints()[joint].limits {
            local = lim.clamp(local);
        }
        out.rig.set_local_rotation(joint, local);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avatar::{Joint, Rig, forward_kinematics};
    use crate::interaction::AffordanceSet;
    use crate::scene::TransformTRS;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arm(lengths: &[f64]) -> AvatarInstance {
        let mut joints = vec![Joint {
            name: "j0".into(),
            parent: None,
            rest_offset: Vec3::new(0.0, 1.0, 0.0),
            local_rotation: Rotation::IDENTITY,
            limits: None,
        }];
        for (i, l) in lengths.iter().enumerate() {
            joints.push(Joint {
                name: format!("j{}", i + 1),
                parent: Some(format!("j{i}")),
                rest_offset: Vec3::new(*l, 0.0, 0.0),
                local_rotation: Rotation::IDENTITY,
                limits: None,
            });
        }
        AvatarInstance::new("arm", Rig::new(joints).unwrap(), TransformTRS::IDENTITY, AffordanceSet::default())
    }

    fn names(n: usize) -> Vec<String> {
        (0..=n).map(|i| format!("j{i}")).collect()
    }

    #[test]
    fn target_at_effector_is_a_no_op() {
        let a = arm(&[0.3, 0.3]);
        let eff = forward_kinematics(&a)["j2"];
        let out = solve_ik(&a, &IkChain::new(names(2), eff), &IkOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.avatar, a);
    }

    #[test]
    fn unreachable_target_stretches_chain() {
        let a = arm(&[0.3, 0.2, 0.1]);
        let target = Vec3::new(-1.0, 2.0, 1.0);
        let out = solve_ik(&a, &IkChain::new(names(3), target), &IkOptions::default()).unwrap();
        let fk = forward_kinematics(&out.avatar);
        let root = fk["j0"];
        assert!((fk["j3"].distance(root) - 0.6).abs() < 1e-9);
        let dir = (target - root).normalize_or(Vec3::Y);
        for k in ["j1", "j2", "j3"] {
            let d = fk[k] - root;
            assert!((d - dir * d.dot(dir)).length() < 1e-9, "{k} off the line");
        }
    }

    #[test]
    fn reaches_target_with_straight_start() {
        // start collinear, target inside reach on the same line
        let a = arm(&[0.4, 0.4]);
        let target = Vec3::new(0.5, 1.0, 0.0);
        let out = solve_ik(&a, &IkChain::new(names(2), target), &IkOptions::default()).unwrap();
        assert!(out.final_error() <= 1e-3, "{}", out.final_error());
    }

    #[test]
    fn errors() {
        let a = arm(&[0.3, 0.0]);
        let opts = IkOptions::default();
        assert_eq!(solve_ik(&a, &IkChain::new(["j0"], Vec3::ZERO), &opts), Err(IkError::TooShort));
        assert!(matches!(solve_ik(&a, &IkChain::new(["j0", "nope"], Vec3::ZERO), &opts), Err(IkError::UnknownJoint(_))));
        assert!(matches!(solve_ik(&a, &IkChain::new(["j0", "j2"], Vec3::ZERO), &opts), Err(IkError::NotContiguous(_))));
        assert_eq!(
            solve_ik(&a, &IkChain::new(names(2), Vec3::new(0.1, 1.0, 0.1)), &opts),
            Err(IkError::DegenerateChain("j2".into()))
        );
        assert_eq!(
            solve_ik(&a, &IkChain::new(names(1), Vec3::new(f64::NAN, 0.0, 0.0)), &opts),
            Err(IkError::NonFiniteTarget)
        );
    }

    #[test]
    fn random_chains_converge_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = IkOptions {
            apply_limits: false,
            ..IkOptions::default()
        };
        let mut converged = 0;
        for _ in 0..100 {
            let n = rng.random_range(2..=5);
            let lengths: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.5)).collect();
            let reach: f64 = lengths.iter().sum();
            let a = arm(&lengths);
            let root = forward_kinematics(&a)["j0"];
            let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize_or(Vec3::X);
            let longest = lengths.iter().cloned().fold(0.0, f64::max);
            let inner = (2.0 * longest - reach).max(0.0);
            let d = rng.random_range((inner + 0.05 * reach)..(0.95 * reach));
            let out = solve_ik(&a, &IkChain::new(names(n), root + dir * d), &opts).unwrap();
            for w in out.error_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
            if out.final_error() <= opts.tol {
                converged += 1;
            }
            let fk = out.avatar.joint_frames();
            for (p, c) in out.avatar.bones() {
                let l = fk[c].position.distance(fk[p].position);
                let rest = out.avatar.rig.joints()[c].rest_offset.length();
                assert!(((l - rest) / rest).abs() <= 1e-9);
            }
        }
        assert!(converged >= 99, "only {converged}/100 converged");
    }

    #[test]
    fn knee_limits_hold_on_shipped_rig() {
        let a = AvatarInstance::new("h", Rig::humanoid(), TransformTRS::IDENTITY, AffordanceSet::default());
        let chain = IkChain::ending_at(&a, "r_ankle", 2, Vec3::new(-0.1, 0.4, 0.4)).unwrap();
        assert_eq!(chain.joints, ["r_hip", "r_knee", "r_ankle"]);
        let out = solve_ik(&a, &chain, &IkOptions::default()).unwrap();
        let knee = out.avatar.rig.joint("r_knee").unwrap();
        let (_, pitch, _) = knee.local_rotation.to_euler_deg();
        assert!((-1e-9..=150.0 + 1e-9).contains(&pitch));
    }
}
