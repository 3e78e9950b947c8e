//! Synthetic skeleton dataset generator.
//!
//! Every class is defined by a short distinctive motion motif (one joint
//! sweeping along a class-specific direction for a few frames) planted at a
//! random temporal location inside a long idle sway shared by all classes,
//! plus isotropic coordinate noise. The planted window locations are
//! reported so tests can check that mining recovers them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::skeleton::{JointFrame, SkeletonSequence};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub class_count: usize,
    pub instances_per_class: usize,
    pub joint_count: usize,
    pub frame_range: (usize, usize),
    /// Std-dev of the isotropic coordinate noise, in meters.
    pub noise: f64,
    /// Motif duration in frames.
    pub motif_frames: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            class_count: 4,
            instances_per_class: 10,
            joint_count: 8,
            frame_range: (30, 50),
            noise: 0.02,
            motif_frames: 5,
            seed: 1,
        }
    }
}

/// One generated instance plus where its motif was planted.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub sequence: SkeletonSequence,
    pub motif_start: usize,
    pub motif_len: usize,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::InvalidInput("need at least 2 classes".into()));
        }
        if self.instances_per_class == 0 {
            return Err(Error::InvalidInput("need at least 1 instance per class".into()));
        }
        if self.joint_count < 3 {
            return Err(Error::InvalidInput("need at least 3 joints".into()));
        }
        if self.frame_range.0 > self.frame_range.1 || self.frame_range.0 < 2 * self.motif_frames {
            return Err(Error::InvalidInput(
                "frame range must fit the motif with slack".into(),
            ));
        }
        if self.noise < 0.0 {
            return Err(Error::InvalidInput("noise must be nonnegative".into()));
        }
        Ok(())
    }
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// Unit direction from the hip to joint `j` in the base pose.
fn radial_direction(j: usize) -> [f64; 3] {
    let azimuth = GOLDEN_ANGLE * j as f64;
    let elevation: f64 = [-0.4, 0.1, 0.6][j % 3];
    let (se, ce) = (elevation.sin(), elevation.cos());
    [ce * azimuth.cos(), se, ce * azimuth.sin()]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Class-specific motif: which joint moves and along which direction. Every
/// non-hip joint is a leaf of the star skeleton, so each class's motif
/// occupies descriptor dimensions no other class touches. The direction is
/// tangential to the joint's limb: a radial displacement would be rescaled
/// away by the limb-length renormalization.
fn motif_shape(class: usize, joint_count: usize) -> (usize, [f64; 3]) {
    let joint = 1 + (class - 1) % (joint_count - 1);
    let u = radial_direction(joint);
    let mut t1 = cross(u, [0.0, 1.0, 0.0]);
    if (t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2]).sqrt() < 1e-6 {
        t1 = cross(u, [1.0, 0.0, 0.0]);
    }
    let t1 = normalized(t1);
    let t2 = cross(u, t1);
    let alpha = GOLDEN_ANGLE * class as f64;
    let (s, c) = alpha.sin_cos();
    (
        joint,
        [
            c * t1[0] + s * t2[0],
            c * t1[1] + s * t2[1],
            c * t1[2] + s * t2[2],
        ],
    )
}

/// Generates the full dataset. Deterministic under the spec's seed; subject
/// ids run from 1 so an odd/even subject split is balanced per class.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<SynthInstance>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let joint_count = spec.joint_count;
    // star skeleton: every joint hangs off the hip, so displacing one joint
    // never drags another through the length renormalization
    let topology: Vec<(usize, usize)> = (1..joint_count).map(|j| (0, j)).collect();
    let base_pose: Vec<[f64; 3]> = (0..joint_count)
        .map(|j| {
            if j == 0 {
                [0.0, 0.0, 0.0]
            } else {
                let u = radial_direction(j);
                [0.4 * u[0], 0.4 * u[1], 0.4 * u[2]]
            }
        })
        .collect();
    let mut out = Vec::with_capacity(spec.class_count * spec.instances_per_class);
    for class in 1..=spec.class_count {
        let (motif_joint, motif_dir) = motif_shape(class, joint_count);
        for instance in 0..spec.instances_per_class {
            let frames_n = rng.gen_range(spec.frame_range.0..=spec.frame_range.1);
            let motif_start = rng.gen_range(0..=frames_n - spec.motif_frames);
            // per-subject size variation exercises the normalization stage
            let scale = rng.gen_range(0.85..1.15);
            let sway_phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut frames = Vec::with_capacity(frames_n);
            for f in 0..frames_n {
                let sway = 0.05 * (0.3 * f as f64 + sway_phase).sin();
                let mut joints: Vec<[f64; 3]> = base_pose
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let lean = if j == 0 { 0.0 } else { sway };
                        [p[0] * scale + lean, p[1] * scale, p[2] * scale]
                    })
                    .collect();
                if f >= motif_start && f < motif_start + spec.motif_frames {
                    let phase = (f - motif_start) as f64 / (spec.motif_frames - 1).max(1) as f64;
                    let amp = 0.8 * (std::f64::consts::PI * phase).sin();
                    for k in 0..3 {
                        joints[motif_joint][k] += amp * motif_dir[k];
                    }
                }
                for j in joints.iter_mut() {
                    for c in j.iter_mut() {
                        *c += gaussian(&mut rng) * spec.noise;
                    }
                }
                frames.push(JointFrame {
                    joints,
                    timestamp_index: f,
                });
            }
            let sequence = SkeletonSequence {
                frames,
                class_label: class,
                subject_id: instance + 1,
                trial_id: 1,
                joint_count,
                hip_index: 0,
                topology: topology.clone(),
            };
            out.push(SynthInstance {
                sequence,
                motif_start,
                motif_len: spec.motif_frames,
            });
        }
    }
    Ok(out)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Writes the dataset as canonical files plus a `planted_windows.txt`
/// sidecar (`filename motif_start motif_len` rows).
pub fn write_synthetic(instances: &[SynthInstance], dir: &std::path::Path) -> Result<()> {
    use std::fmt::Write as _;
    std::fs::create_dir_all(dir)?;
    let mut sidecar = String::new();
    for inst in instances {
        let seq = &inst.sequence;
        let name = format!(
            "a{:02}_s{:02}_e{:02}.txt",
            seq.class_label, seq.subject_id, seq.trial_id
        );
        crate::skeleton::save_canonical(seq, &dir.join(&name))?;
        let _ = writeln!(sidecar, "{name} {} {}", inst.motif_start, inst.motif_len);
    }
    std::fs::write(dir.join("planted_windows.txt"), sidecar)?;
    Ok(())
}
