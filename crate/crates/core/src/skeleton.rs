//! Raw Kinect-2 skeleton frames and their reduction to three normalized
//! per-axis posture vectors.
//!
//! A frame carries all 25 tracked joints. Eight joints carry little gait
//! information (neck, mid spine, wrists, thumbs, hand tips) and are dropped;
//! the remaining 17 are kept in ascending joint-index order. Each coordinate
//! axis is then min-max scaled to `[0, 1]` on its own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOINT_COUNT: usize = 25;
pub const KEPT_JOINT_COUNT: usize = 17;

/// One axis worth of kept-joint coordinates.
pub type AxisVector = [f64; KEPT_JOINT_COUNT];

/// The Kinect-2 joint enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Joint {
    SpineBase = 0,
    SpineMid = 1,
    Neck = 2,
    Head = 3,
    ShoulderLeft = 4,
    ElbowLeft = 5,
    WristLeft = 6,
    HandLeft = 7,
    ShoulderRight = 8,
    ElbowRight = 9,
    WristRight = 10,
    HandRight = 11,
    HipLeft = 12,
    KneeLeft = 13,
    AnkleLeft = 14,
    FootLeft = 15,
    HipRight = 16,
    KneeRight = 17,
    AnkleRight = 18,
    FootRight = 19,
    SpineShoulder = 20,
    HandTipLeft = 21,
    ThumbLeft = 22,
    HandTipRight = 23,
    ThumbRight = 24,
}

impl Joint {
    pub const ALL: [Joint; JOINT_COUNT] = [
        Joint::SpineBase,
        Joint::SpineMid,
        Joint::Neck,
        Joint::Head,
        Joint::ShoulderLeft,
        Joint::ElbowLeft,
        Joint::WristLeft,
        Joint::HandLeft,
        Joint::ShoulderRight,
        Joint::ElbowRight,
        Joint::WristRight,
        Joint::HandRight,
        Joint::HipLeft,
        Joint::KneeLeft,
        Joint::AnkleLeft,
        Joint::FootLeft,
        Joint::HipRight,
        Joint::KneeRight,
        Joint::AnkleRight,
        Joint::FootRight,
        Joint::SpineShoulder,
        Joint::HandTipLeft,
        Joint::ThumbLeft,
        Joint::HandTipRight,
        Joint::ThumbRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Joint> {
        Joint::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::SpineBase => "SpineBase",
            Joint::SpineMid => "SpineMid",
            Joint::Neck => "Neck",
            Joint::Head => "Head",
            Joint::ShoulderLeft => "ShoulderLeft",
            Joint::ElbowLeft => "ElbowLeft",
            Joint::WristLeft => "WristLeft",
            Joint::HandLeft => "HandLeft",
            Joint::ShoulderRight => "ShoulderRight",
            Joint::ElbowRight => "ElbowRight",
            Joint::WristRight => "WristRight",
            Joint::HandRight => "HandRight",
            Joint::HipLeft => "HipLeft",
            Joint::KneeLeft => "KneeLeft",
            Joint::AnkleLeft => "AnkleLeft",
            Joint::FootLeft => "FootLeft",
            Joint::HipRight => "HipRight",
            Joint::KneeRight => "KneeRight",
            Joint::AnkleRight => "AnkleRight",
            Joint::FootRight => "FootRight",
            Joint::SpineShoulder => "SpineShoulder",
            Joint::HandTipLeft => "HandTipLeft",
            Joint::ThumbLeft => "ThumbLeft",
            Joint::HandTipRight => "HandTipRight",
            Joint::ThumbRight => "ThumbRight",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("frame {frame_index}: expected {JOINT_COUNT} joints, found {found}")]
    JointCount { frame_index: u64, found: usize },
    #[error("frame {frame_index}: joint {joint} has a non-finite coordinate")]
    NonFinite { frame_index: u64, joint: usize },
    #[error("invalid joint mask: {0}")]
    InvalidMask(String),
    #[error("expected {expected} joints, found {found}")]
    Length { expected: usize, found: usize },
}

/// One tracked frame: 25 joint positions in sensor coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSkeleton {
    pub frame_index: u64,
    pub joints: Vec<[f64; 3]>,
}

impl RawSkeleton {
    pub fn new(frame_index: u64, joints: Vec<[f64; 3]>) -> Result<Self, SkeletonError> {
        let skeleton = RawSkeleton { frame_index, joints };
        skeleton.validate()?;
        Ok(skeleton)
    }

    pub fn validate(&self) -> Result<(), SkeletonError> {
        if self.joints.len() != JOINT_COUNT {
            return Err(SkeletonError::JointCount {
                frame_index: self.frame_index,
                found: self.joints.len(),
            });
        }
        if let Some(joint) = self
            .joints
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(SkeletonError::NonFinite {
                frame_index: self.frame_index,
                joint,
            });
        }
        Ok(())
    }

    pub fn joint(&self, joint: Joint) -> [f64; 3] {
        self.joints[joint.index()]
    }

    /// Applies `p -> scale * p + offset` to every joint.
    pub fn affine(&self, scale: f64, offset: [f64; 3]) -> RawSkeleton {
        RawSkeleton {
            frame_index: self.frame_index,
            joints: self
                .joints
                .iter()
                .map(|p| {
                    [
                        scale * p[0] + offset[0],
                        scale * p[1] + offset[1],
                        scale * p[2] + offset[2],
                    ]
                })
                .collect(),
        }
    }
}

/// Partition of the 25 joints into the 17 fed to the models and the 8 dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointMask {
    kept: Vec<usize>,
    discarded: Vec<usize>,
}

impl JointMask {
    pub const DISCARDED: [Joint; 8] = [
        Joint::SpineMid,
        Joint::Neck,
        Joint::WristLeft,
        Joint::WristRight,
        Joint::HandTipLeft,
        Joint::ThumbLeft,
        Joint::HandTipRight,
        Joint::ThumbRight,
    ];

    /// Builds a mask from the discarded set; kept joints are everything else
    /// in ascending index order.
    pub fn from_discarded(discarded: &[usize]) -> Result<Self, SkeletonError> {
        let mut sorted = discarded.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != discarded.len() {
            return Err(SkeletonError::InvalidMask("duplicate discarded joint".into()));
        }
        if let Some(&bad) = sorted.iter().find(|&&j| j >= JOINT_COUNT) {
            return Err(SkeletonError::InvalidMask(format!("joint index {bad} out of range")));
        }
        let kept: Vec<usize> = (0..JOINT_COUNT).filter(|j| !sorted.contains(j)).collect();
        if kept.len() != KEPT_JOINT_COUNT {
            return Err(SkeletonError::InvalidMask(format!(
                "mask keeps {} joints, expected {KEPT_JOINT_COUNT}",
                kept.len()
            )));
        }
        Ok(JointMask {
            kept,
            discarded: sorted,
        })
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn discarded(&self) -> &[usize] {
        &self.discarded
    }
}

impl Default for JointMask {
    fn default() -> Self {
        let discarded: Vec<usize> = JointMask::DISCARDED.iter().map(|j| j.index()).collect();
        JointMask::from_discarded(&discarded).expect("default mask is valid")
    }
}

/// Result of min-max scaling one axis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Set when the input was constant and the output was forced to 0.5.
    pub degenerate: bool,
}

/// Three normalized axis vectors for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureTriplet {
    pub frame_index: u64,
    pub x_axis: AxisVector,
    pub y_axis: AxisVector,
    pub z_axis: AxisVector,
    /// Per-axis degenerate (constant input) flags, X, Y, Z.
    #[serde(default)]
    pub degenerate: [bool; 3],
}

impl PostureTriplet {
    pub fn axis(&self, axis: crate::AxisTag) -> &AxisVector {
        match axis {
            crate::AxisTag::X => &self.x_axis,
            crate::AxisTag::Y => &self.y_axis,
            crate::AxisTag::Z => &self.z_axis,
        }
    }
}

/// Picks the kept joints of a validated frame, in mask order.
pub fn select_joints(s: &RawSkeleton, mask: &JointMask) -> Result<Vec<[f64; 3]>, SkeletonError> {
    s.validate()?;
    Ok(mask.kept().iter().map(|&j| s.joints[j]).collect())
}

pub fn split_axes(
    joints: &[[f64; 3]],
) -> Result<(AxisVector, AxisVector, AxisVector), SkeletonError> {
    if joints.len() != KEPT_JOINT_COUNT {
        return Err(SkeletonError::Length {
            expected: KEPT_JOINT_COUNT,
            found: joints.len(),
        });
    }
    let mut x = [0.0; KEPT_JOINT_COUNT];
    let mut y = [0.0; KEPT_JOINT_COUNT];
    let mut z = [0.0; KEPT_JOINT_COUNT];
    for (i, p) in joints.iter().enumerate() {
        x[i] = p[0];
        y[i] = p[1];
        z[i] = p[2];
    }
    Ok((x, y, z))
}

/// Min-max scales `v` into `[0, 1]`. A constant vector maps to all 0.5 and
/// is flagged as degenerate.
pub fn normalize_axis(v: &[f64]) -> Normalized {
    let (min, max) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = max - min;
    if !range.is_finite() || range <= 0.0 {
        return Normalized {
            values: vec![0.5; v.len()],
            degenerate: true,
        };
    }
    Normalized {
        values: v.iter().map(|&x| (x - min) / range).collect(),
        degenerate: false,
    }
}

fn normalize_array(v: &AxisVector) -> (AxisVector, bool) {
    let n = normalize_axis(v);
    let mut out = [0.0; KEPT_JOINT_COUNT];
    out.copy_from_slice(&n.values);
    (out, n.degenerate)
}

/// Full preprocessing: joint selection, axis split, per-axis normalization.
pub fn preprocess(s: &RawSkeleton, mask: &JointMask) -> Result<PostureTriplet, SkeletonError> {
    let kept = select_joints(s, mask)?;
    let (x, y, z) = split_axes(&kept)?;
    let (x_axis, dx) = normalize_array(&x);
    let (y_axis, dy) = normalize_array(&y);
    let (z_axis, dz) = normalize_array(&z);
    Ok(PostureTriplet {
        frame_index: s.frame_index,
        x_axis,
        y_axis,
        z_axis,
        degenerate: [dx, dy, dz],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn skeleton_from(f: impl Fn(usize) -> [f64; 3]) -> RawSkeleton {
        RawSkeleton::new(7, (0..JOINT_COUNT).map(f).collect()).unwrap()
    }

    #[test]
    fn default_mask_partitions_joints() {
        let mask = JointMask::default();
        assert_eq!(mask.kept().len(), 17);
        assert_eq!(mask.discarded().len(), 8);
        let mut all: Vec<usize> = mask.kept().iter().chain(mask.discarded()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..25).collect::<Vec<_>>());
        assert!(mask.kept().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            mask.kept(),
            &[0, 3, 4, 5, 7, 8, 9, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]
        );
    }

    #[test]
    fn mask_rejects_bad_sets() {
        assert!(JointMask::from_discarded(&[1, 2, 3]).is_err());
        assert!(JointMask::from_discarded(&[1, 1, 2, 3, 4, 5, 6, 7]).is_err());
        assert!(JointMask::from_discarded(&[1, 2, 3, 4, 5, 6, 7, 30]).is_err());
    }

    #[test]
    fn selected_joints_exclude_discarded_names() {
        let s = skeleton_from(|j| [j as f64, 0.0, 0.0]);
        let kept = select_joints(&s, &JointMask::default()).unwrap();
        assert_eq!(kept.len(), 17);
        for p in &kept {
            let joint = Joint::from_index(p[0] as usize).unwrap();
            assert!(!JointMask::DISCARDED.contains(&joint), "{}", joint.name());
        }
    }

    #[test]
    fn kept_joints_at_origin_stay_zero() {
        let mask = JointMask::default();
        let s = skeleton_from(|j| {
            if mask.kept().contains(&j) {
                [0.0; 3]
            } else {
                [5.0, 5.0, 5.0]
            }
        });
        assert_eq!(select_joints(&s, &mask).unwrap(), vec![[0.0; 3]; 17]);
    }

    #[test]
    fn sentinel_on_discarded_joints_never_leaks() {
        let mask = JointMask::default();
        let sentinel = -999.25;
        for &d in mask.discarded() {
            let s = skeleton_from(|j| if j == d { [sentinel; 3] } else { [j as f64; 3] });
            let kept = select_joints(&s, &mask).unwrap();
            assert!(kept.iter().all(|p| p.iter().all(|&c| c != sentinel)));
        }
    }

    #[test]
    fn malformed_frames_name_the_frame() {
        let short = RawSkeleton {
            frame_index: 42,
            joints: vec![[0.0; 3]; 24],
        };
        let err = select_joints(&short, &JointMask::default()).unwrap_err();
        assert_eq!(err, SkeletonError::JointCount { frame_index: 42, found: 24 });
        assert!(err.to_string().contains("frame 42"));

        let mut nan = vec![[0.0; 3]; 25];
        nan[3][1] = f64::NAN;
        let err = RawSkeleton::new(9, nan).unwrap_err();
        assert_eq!(err, SkeletonError::NonFinite { frame_index: 9, joint: 3 });
        let mut inf = vec![[0.0; 3]; 25];
        inf[0][2] = f64::INFINITY;
        assert!(RawSkeleton::new(1, inf).is_err());
    }

    #[test]
    fn split_constant_and_indexed() {
        let (x, y, z) = split_axes(&[[1.0, 2.0, 3.0]; 17]).unwrap();
        assert_eq!((x, y, z), ([1.0; 17], [2.0; 17], [3.0; 17]));

        let joints: Vec<[f64; 3]> = (0..17).map(|i| [i as f64, -(i as f64), 2.0 * i as f64]).collect();
        let (x, y, z) = split_axes(&joints).unwrap();
        for i in 0..17 {
            assert_eq!(x[i], i as f64);
            assert_eq!(y[i], -(i as f64));
            assert_eq!(z[i], 2.0 * i as f64);
        }
        assert!(split_axes(&joints[..16]).is_err());
    }

    #[test]
    fn split_commutes_with_permutation() {
        let joints: Vec<[f64; 3]> = (0..17).map(|i| [i as f64 * 0.3, (i * i) as f64, 1.0 / (i + 1) as f64]).collect();
        let perm: Vec<usize> = (0..17).map(|i| (i * 5) % 17).collect();
        let permuted: Vec<[f64; 3]> = perm.iter().map(|&p| joints[p]).collect();
        let (x, y, z) = split_axes(&joints).unwrap();
        let (px, py, pz) = split_axes(&permuted).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!((px[i], py[i], pz[i]), (x[p], y[p], z[p]));
        }
    }

    #[test]
    fn normalize_closed_form() {
        let n = normalize_axis(&[2.0, 4.0, 6.0]);
        assert_eq!(n.values, vec![0.0, 0.5, 1.0]);
        assert!(!n.degenerate);

        let already = [0.0, 0.25, 1.0, 0.75];
        assert_eq!(normalize_axis(&already).values, already.to_vec());

        let c = normalize_axis(&[3.3; 17]);
        assert_eq!(c.values, vec![0.5; 17]);
        assert!(c.degenerate);
    }

    #[test]
    fn preprocess_contains_zero_and_one() {
        let s = skeleton_from(|j| [j as f64 * 0.1, (j as f64).sin(), (j as f64 * 0.7).cos() + 2.0]);
        let t = preprocess(&s, &JointMask::default()).unwrap();
        assert_eq!(t.frame_index, 7);
        for v in [&t.x_axis, &t.y_axis, &t.z_axis] {
            assert!(v.contains(&0.0) && v.contains(&1.0));
        }
        assert_eq!(t.degenerate, [false; 3]);
    }

    #[test]
    fn degenerate_axis_is_flagged_not_fatal() {
        let s = skeleton_from(|j| [j as f64, 1.5, j as f64 * 2.0]);
        let t = preprocess(&s, &JointMask::default()).unwrap();
        assert_eq!(t.y_axis, [0.5; 17]);
        assert_eq!(t.degenerate, [false, true, false]);
    }

    fn arb_skeleton() -> impl Strategy<Value = RawSkeleton> {
        proptest::collection::vec(proptest::array::uniform3(-3.0f64..3.0), JOINT_COUNT)
            .prop_map(|joints| RawSkeleton { frame_index: 0, joints })
    }

    proptest! {
        #[test]
        fn normalize_preserves_order(v in proptest::collection::vec(-100.0f64..100.0, 2..40)) {
            let n = normalize_axis(&v);
            prop_assume!(!n.degenerate);
            for i in 0..v.len() {
                prop_assert!((0.0..=1.0).contains(&n.values[i]));
                for j in 0..v.len() {
                    prop_assert_eq!(v[i] < v[j], n.values[i] < n.values[j]);
                }
            }
        }

        #[test]
        fn preprocess_invariant_to_scale_and_shift(
            s in arb_skeleton(),
            scale in 0.01f64..100.0,
            offset in proptest::array::uniform3(-50.0f64..50.0),
        ) {
            let mask = JointMask::default();
            let a = preprocess(&s, &mask).unwrap();
            let b = preprocess(&s.affine(scale, offset), &mask).unwrap();
            for (u, v) in [(&a.x_axis, &b.x_axis), (&a.y_axis, &b.y_axis), (&a.z_axis, &b.z_axis)] {
                for i in 0..17 {
                    prop_assert!((u[i] - v[i]).abs() <= 1e-9);
                }
            }
        }
    }
}
