//! Deterministic synthetic treadmill gait.
//!
//! A minimal sinusoidal limb model in sensor coordinates (metres): `x` is the
//! subject's left, `y` is up (ground at 0), `z` is depth from the sensor. The
//! subject faces the sensor, so forward is `-z`. With stride phase
//! `phi = 2 pi f t + phi0` and per-leg phases `phi_L = phi - lag`,
//! `phi_R = phi + pi`:
//!
//! ```text
//! pelvis   P = (sway sin(phi) + lean/2, 0.95 s + bob cos(2 phi) + raise, depth)
//! trunk    SpineMid/SpineShoulder/Neck/Head = P + (lean * {0.5, 1, 1, 1}, {0.25, 0.50, 0.58, 0.72} s, 0)
//! hip_k    P + (+-hip_half, -0.06 s + hip_raise_k, 0)
//! ankle_k  x = +-hip_half
//!          y = base_k + 0.08 s + lift_k c_k^2,  c_k = max(0, cos(phi_k))
//!          z = depth - swing_k sin(phi_k)
//! foot_k   ankle_k + (0, -0.05 s, -0.13 s)
//! knee_k   (hip_k + ankle_k) / 2 + (0, 0, -(0.04 s + 0.6 lift_k c_k^2))
//! arm_k    swings with the opposite leg: alpha_L = arm sin(phi_R), alpha_R = arm sin(phi_L)
//! ```
//!
//! Gait conditions perturb the model:
//! - `SolePad { h }` (right foot, `p = h / 100`): `base_R = p`, `swing_R *= 1 - 1.5 p`,
//!   pelvis raised by `p / 2`, right hip raised a further `p / 2`, trunk leans `-0.4 p`.
//! - `AnkleWeight { kg }` (left leg, `c = 0.05 kg`): `swing_L` and `lift_L` scaled by
//!   `1 - c`, phase lag `0.1 kg` rad, trunk leans `+0.01 kg`, sway scaled by `1 + c`.
//!
//! Independent Gaussian noise of `noise_sigma` is added to every coordinate.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::experiment::ExperimentSplit;
use super::{GaitKind, GaitSequence};
use crate::skeleton::{Joint, RawSkeleton, JOINT_COUNT};

/// Body dimensions and walking style of one synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub height_scale: f64,
    pub hip_half_width: f64,
    pub shoulder_half_width: f64,
    pub depth: f64,
    pub cadence_hz: f64,
    pub phase: f64,
    /// Fore-aft ankle excursion amplitude.
    pub swing: f64,
    /// Peak ankle lift during swing.
    pub lift: f64,
    /// Arm swing amplitude in radians.
    pub arm_swing: f64,
    pub bob: f64,
    pub sway: f64,
}

impl Default for SubjectProfile {
    fn default() -> Self {
        SubjectProfile {
            height_scale: 1.0,
            hip_half_width: 0.09,
            shoulder_half_width: 0.19,
            depth: 2.5,
            cadence_hz: 0.7,
            phase: 0.0,
            swing: 0.22,
            lift: 0.06,
            arm_swing: 0.35,
            bob: 0.02,
            sway: 0.025,
        }
    }
}

impl SubjectProfile {
    /// Draws a subject around the default profile.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = SubjectProfile::default();
        let mut jitter = |spread: f64| 1.0 + rng.random_range(-spread..=spread);
        SubjectProfile {
            height_scale: jitter(0.08),
            hip_half_width: base.hip_half_width * jitter(0.08),
            shoulder_half_width: base.shoulder_half_width * jitter(0.08),
            depth: base.depth * jitter(0.1),
            cadence_hz: base.cadence_hz * jitter(0.1),
            phase: PI * jitter(1.0),
            swing: base.swing * jitter(0.1),
            lift: base.lift * jitter(0.15),
            arm_swing: base.arm_swing * jitter(0.2),
            bob: base.bob * jitter(0.2),
            sway: base.sway * jitter(0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub subject_id: String,
    pub seed: u64,
    pub n_frames: usize,
    pub frame_rate_hz: f64,
    pub profile: SubjectProfile,
    pub gait: GaitKind,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subject_id: "S01".into(),
            seed: 0,
            n_frames: 1200,
            frame_rate_hz: 30.0,
            profile: SubjectProfile::default(),
            gait: GaitKind::Normal,
            noise_sigma: 0.005,
        }
    }
}

/// Per-leg parameters after applying the gait condition.
#[derive(Debug, Clone, Copy)]
struct Leg {
    side: f64,
    lag: f64,
    swing: f64,
    lift: f64,
    base: f64,
    hip_raise: f64,
}

struct Kinematics {
    left: Leg,
    right: Leg,
    lean: f64,
    raise: f64,
    sway: f64,
}

fn kinematics(p: &SubjectProfile, gait: GaitKind) -> Kinematics {
    let leg = |side: f64| Leg {
        side,
        lag: 0.0,
        swing: p.swing,
        lift: p.lift,
        base: 0.0,
        hip_raise: 0.0,
    };
    let mut k = Kinematics {
        left: leg(1.0),
        right: leg(-1.0),
        lean: 0.0,
        raise: 0.0,
        sway: p.sway,
    };
    match gait {
        GaitKind::Normal => {}
        GaitKind::SolePad { height_cm } => {
            let pad = height_cm.max(0.0) / 100.0;
            k.right.base = pad;
            k.right.swing *= 1.0 - 1.5 * pad;
            k.right.hip_raise = pad / 2.0;
            k.raise = pad / 2.0;
            k.lean = -0.4 * pad;
        }
        GaitKind::AnkleWeight { kg } => {
            let kg = kg.max(0.0);
            let c = 0.05 * kg;
            k.left.swing *= 1.0 - c;
            k.left.lift *= 1.0 - c;
            k.left.lag = 0.1 * kg;
            k.lean = 0.01 * kg;
            k.sway *= 1.0 + c;
        }
    }
    k
}

/// Noise-free joint positions at stride phase `phi`.
fn pose(p: &SubjectProfile, k: &Kinematics, phi: f64) -> [[f64; 3]; JOINT_COUNT] {
    let s = p.height_scale;
    let mut j = [[0.0; 3]; JOINT_COUNT];
    let set = |j: &mut [[f64; 3]; JOINT_COUNT], joint: Joint, v: [f64; 3]| j[joint.index()] = v;
    let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];

    let pelvis = [
        k.sway * phi.sin() + k.lean / 2.0,
        0.95 * s + p.bob * (2.0 * phi).cos() + k.raise,
        p.depth,
    ];
    set(&mut j, Joint::SpineBase, pelvis);
    set(&mut j, Joint::SpineMid, add(pelvis, [k.lean / 2.0, 0.25 * s, 0.0]));
    let spine_shoulder = add(pelvis, [k.lean, 0.50 * s, 0.0]);
    set(&mut j, Joint::SpineShoulder, spine_shoulder);
    set(&mut j, Joint::Neck, add(pelvis, [k.lean, 0.58 * s, 0.0]));
    set(&mut j, Joint::Head, add(pelvis, [k.lean, 0.72 * s, 0.0]));

    let phi_l = phi - k.left.lag;
    let phi_r = phi + PI + k.right.lag;
    let dir = |a: f64| [0.0, -a.cos(), -a.sin()];
    let scale = |v: [f64; 3], m: f64| [v[0] * m, v[1] * m, v[2] * m];

    // Arms: each swings with the opposite leg.
    for (side, alpha, joints) in [
        (
            1.0,
            p.arm_swing * phi_r.sin(),
            [Joint::ShoulderLeft, Joint::ElbowLeft, Joint::WristLeft, Joint::HandLeft, Joint::HandTipLeft, Joint::ThumbLeft],
        ),
        (
            -1.0,
            p.arm_swing * phi_l.sin(),
            [Joint::ShoulderRight, Joint::ElbowRight, Joint::WristRight, Joint::HandRight, Joint::HandTipRight, Joint::ThumbRight],
        ),
    ] {
        let [shoulder_j, elbow_j, wrist_j, hand_j, tip_j, thumb_j] = joints;
        let shoulder = add(spine_shoulder, [side * p.shoulder_half_width, -0.03 * s, 0.0]);
        let elbow = add(shoulder, scale(dir(alpha), 0.29 * s));
        let fore = alpha + 0.35;
        let wrist = add(elbow, scale(dir(fore), 0.26 * s));
        let hand = add(wrist, scale(dir(fore), 0.08 * s));
        set(&mut j, shoulder_j, shoulder);
        set(&mut j, elbow_j, elbow);
        set(&mut j, wrist_j, wrist);
        set(&mut j, hand_j, hand);
        set(&mut j, tip_j, add(hand, scale(dir(fore), 0.07 * s)));
        set(&mut j, thumb_j, add(wrist, [side * 0.03 * s, -0.04 * s, -0.03 * s]));
    }

    for (leg, phase, [hip_j, knee_j, ankle_j, foot_j]) in [
        (k.left, phi_l, [Joint::HipLeft, Joint::KneeLeft, Joint::AnkleLeft, Joint::FootLeft]),
        (k.right, phi_r, [Joint::HipRight, Joint::KneeRight, Joint::AnkleRight, Joint::FootRight]),
    ] {
        let hip = add(pelvis, [leg.side * p.hip_half_width, -0.06 * s + leg.hip_raise, 0.0]);
        let c = phase.cos().max(0.0);
        let lift = leg.lift * c * c;
        let ankle = [
            leg.side * p.hip_half_width,
            leg.base + 0.08 * s + lift,
            p.depth - leg.swing * phase.sin(),
        ];
        let knee = [
            (hip[0] + ankle[0]) / 2.0,
            (hip[1] + ankle[1]) / 2.0,
            (hip[2] + ankle[2]) / 2.0 - (0.04 * s + 0.6 * lift),
        ];
        set(&mut j, hip_j, hip);
        set(&mut j, knee_j, knee);
        set(&mut j, ankle_j, ankle);
        set(&mut j, foot_j, add(ankle, [0.0, -0.05 * s, -0.13 * s]));
    }
    j
}

/// Generates one sequence; identical configs give identical output.
pub fn synth_gait(cfg: &SynthConfig) -> GaitSequence {
    let p = &cfg.profile;
    let k = kinematics(p, cfg.gait);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0)).expect("finite sigma");
    let frames = (0..cfg.n_frames)
        .map(|f| {
            let t = f as f64 / cfg.frame_rate_hz;
            let phi = TAU * p.cadence_hz * t + p.phase;
            let mut joints = pose(p, &k, phi).to_vec();
            if cfg.noise_sigma > 0.0 {
                for c in joints.iter_mut().flatten() {
                    *c += noise.sample(&mut rng);
                }
            }
            RawSkeleton {
                frame_index: f as u64,
                joints,
            }
        })
        .collect();
    GaitSequence {
        subject_id: cfg.subject_id.clone(),
        gait: cfg.gait,
        frames,
    }
}

/// A whole synthetic study: subjects, conditions, and the train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthPlan {
    pub seed: u64,
    pub n_frames: usize,
    pub frame_rate_hz: f64,
    pub noise_sigma: f64,
    pub train_subjects: usize,
    pub test_subjects: usize,
    pub gaits: Vec<GaitKind>,
}

impl Default for SynthPlan {
    fn default() -> Self {
        SynthPlan {
            seed: 2019,
            n_frames: 1200,
            frame_rate_hz: 30.0,
            noise_sigma: 0.005,
            train_subjects: 5,
            test_subjects: 4,
            gaits: vec![
                GaitKind::Normal,
                GaitKind::SolePad { height_cm: 5.0 },
                GaitKind::SolePad { height_cm: 10.0 },
                GaitKind::SolePad { height_cm: 15.0 },
                GaitKind::AnkleWeight { kg: 4.0 },
            ],
        }
    }
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SynthPlan {
    pub fn subject_ids(&self) -> Vec<String> {
        (1..=self.train_subjects + self.test_subjects)
            .map(|i| format!("S{i:02}"))
            .collect()
    }

    pub fn split(&self) -> ExperimentSplit {
        let ids = self.subject_ids();
        ExperimentSplit {
            train_subjects: ids[..self.train_subjects].to_vec(),
            test_subjects: ids[self.train_subjects..].to_vec(),
        }
    }

    pub fn configs(&self) -> Vec<SynthConfig> {
        let mut out = Vec::new();
        for (s, subject_id) in self.subject_ids().into_iter().enumerate() {
            let profile = SubjectProfile::sample(mix(self.seed, 1 + s as u64));
            for (g, &gait) in self.gaits.iter().enumerate() {
                out.push(SynthConfig {
                    subject_id: subject_id.clone(),
                    seed: mix(mix(self.seed, 1000 + s as u64), g as u64),
                    n_frames: self.n_frames,
                    frame_rate_hz: self.frame_rate_hz,
                    profile: profile.clone(),
                    gait,
                    noise_sigma: self.noise_sigma,
                });
            }
        }
        out
    }

    pub fn generate(&self) -> Vec<GaitSequence> {
        self.configs().iter().map(synth_gait).collect()
    }
}
