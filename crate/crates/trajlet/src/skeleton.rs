//! Skeleton sequence I/O, size normalization and hip-centering.
//!
//! Sequences come from two on-disk formats: the canonical text format
//! defined by this crate (one instance per file, self-describing header)
//! and the raw MSR skeleton files (4 reals per joint row, labels encoded
//! in the filename as `a<class>_s<subject>_e<trial>_...`).

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// One frame of 3D joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFrame {
    pub joints: Vec<[f64; 3]>,
    pub timestamp_index: usize,
}

/// A labelled action instance: F frames of J joints plus the skeleton tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub frames: Vec<JointFrame>,
    pub class_label: usize,
    pub subject_id: usize,
    pub trial_id: usize,
    pub joint_count: usize,
    pub hip_index: usize,
    /// (parent, child) joint-index pairs forming a spanning tree rooted at
    /// `hip_index`. Edge order is significant: `LimbReference` lengths are
    /// indexed by it.
    pub topology: Vec<(usize, usize)>,
}

/// Per-edge mean limb lengths computed from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct LimbReference {
    pub lengths: Vec<f64>,
}

/// On-disk formats accepted by [`load_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Canonical,
    MsrSkeleton,
}

/// Which coordinate rows to keep from an interleaved MSR skeleton file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MsrCoords {
    #[default]
    RealWorld,
    Screen,
}

/// Kinect skeleton joint order used by the raw MSR files: hip center first,
/// then spine/head, left arm, right arm, left leg, right leg.
pub const MSR_JOINT_COUNT: usize = 20;
pub const MSR_HIP_INDEX: usize = 0;

pub fn msr_default_topology() -> Vec<(usize, usize)> {
    vec![
        (0, 1),
        (1, 2),
        (2, 3),
        (2, 4),
        (4, 5),
        (5, 6),
        (6, 7),
        (2, 8),
        (8, 9),
        (9, 10),
        (10, 11),
        (0, 12),
        (12, 13),
        (13, 14),
        (14, 15),
        (0, 16),
        (16, 17),
        (17, 18),
        (18, 19),
    ]
}

impl SkeletonSequence {
    /// Checks the type invariants: frame shape, finite coordinates and a
    /// spanning-tree topology rooted at the hip.
    pub fn validate(&self) -> Result<()> {
        if self.joint_count < 2 {
            return Err(Error::InvalidInput("joint_count must be >= 2".into()));
        }
        if self.frames.is_empty() {
            return Err(Error::InvalidInput("sequence has no frames".into()));
        }
        if self.hip_index >= self.joint_count {
            return Err(Error::InvalidInput(format!(
                "hip index {} out of range for {} joints",
                self.hip_index, self.joint_count
            )));
        }
        for (f, frame) in self.frames.iter().enumerate() {
            if frame.joints.len() != self.joint_count {
                return Err(Error::InvalidInput(format!(
                    "frame {} has {} joints, expected {}",
                    f,
                    frame.joints.len(),
                    self.joint_count
                )));
            }
            for j in &frame.joints {
                if !j.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "non-finite coordinate in frame {f}"
                    )));
                }
            }
        }
        validate_topology(&self.topology, self.joint_count, self.hip_index)
    }
}

fn validate_topology(topology: &[(usize, usize)], joint_count: usize, hip: usize) -> Result<()> {
    if topology.len() != joint_count - 1 {
        return Err(Error::Topology(format!(
            "expected {} edges, got {}",
            joint_count - 1,
            topology.len()
        )));
    }
    let mut seen_child = vec![false; joint_count];
    for &(p, c) in topology {
        if p >= joint_count || c >= joint_count {
            return Err(Error::Topology(format!("edge ({p},{c}) out of range")));
        }
        if c == hip {
            return Err(Error::Topology("hip joint appears as a child".into()));
        }
        if seen_child[c] {
            return Err(Error::Topology(format!("joint {c} has two parents")));
        }
        seen_child[c] = true;
    }
    // Every non-hip joint must be reachable from the hip.
    for order in traversal_order(topology, joint_count, hip) {
        seen_child[order.1] = false;
    }
    if seen_child.iter().any(|&s| s) {
        return Err(Error::Topology("topology is not connected to the hip".into()));
    }
    Ok(())
}

/// BFS order of (edge_index, child) pairs such that each child's parent has
/// already been visited (or is the hip).
fn traversal_order(topology: &[(usize, usize)], joint_count: usize, hip: usize) -> Vec<(usize, usize)> {
    let mut by_parent: Vec<Vec<usize>> = vec![Vec::new(); joint_count];
    for (e, &(p, _)) in topology.iter().enumerate() {
        if p < joint_count {
            by_parent[p].push(e);
        }
    }
    let mut order = Vec::with_capacity(topology.len());
    let mut queue = VecDeque::from([hip]);
    while let Some(p) = queue.pop_front() {
        for &e in &by_parent[p] {
            let c = topology[e].1;
            order.push((e, c));
            queue.push_back(c);
        }
    }
    order
}

/// Loads one instance from `path` in the named format. MSR files use the
/// default Kinect topology and the real-world coordinate rows; use
/// [`load_msr_instance`] to override either.
pub fn load_instance(path: &Path, format: Format) -> Result<SkeletonSequence> {
    match format {
        Format::Canonical => {
            let text = std::fs::read_to_string(path)?;
            parse_canonical(&text, path)
        }
        Format::MsrSkeleton => load_msr_instance(path, MsrCoords::RealWorld, MSR_JOINT_COUNT),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses the canonical text format (see the crate README for the schema).
pub fn parse_canonical(text: &str, path: &Path) -> Result<SkeletonSequence> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut f = None;
    let mut j = None;
    let mut class = None;
    let mut subject = None;
    let mut trial = None;
    let mut hip = None;
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(path, 1, format!("bad header field '{field}'")))?;
        let value: usize = value
            .parse()
            .map_err(|_| parse_err(path, 1, format!("bad integer in '{field}'")))?;
        match key {
            "F" => f = Some(value),
            "J" => j = Some(value),
            "class" => class = Some(value),
            "subject" => subject = Some(value),
            "trial" => trial = Some(value),
            "hip" => hip = Some(value),
            _ => return Err(parse_err(path, 1, format!("unknown header key '{key}'"))),
        }
    }
    let (frame_count, joint_count) = match (f, j) {
        (Some(f), Some(j)) => (f, j),
        _ => return Err(parse_err(path, 1, "header must set F and J")),
    };
    let class_label = class.ok_or_else(|| parse_err(path, 1, "header must set class"))?;
    let subject_id = subject.ok_or_else(|| parse_err(path, 1, "header must set subject"))?;
    let trial_id = trial.ok_or_else(|| parse_err(path, 1, "header must set trial"))?;
    let hip_index = hip.ok_or_else(|| parse_err(path, 1, "header must set hip"))?;

    let (topo_lineno, topo_line) = lines
        .next()
        .ok_or_else(|| parse_err(path, 2, "missing topology line"))?;
    let topo_body = topo_line
        .strip_prefix("topology=")
        .ok_or_else(|| parse_err(path, topo_lineno + 1, "expected 'topology=' line"))?;
    let mut topology = Vec::new();
    for pair in topo_body.split_whitespace() {
        let (p, c) = pair
            .split_once(':')
            .ok_or_else(|| parse_err(path, topo_lineno + 1, format!("bad edge '{pair}'")))?;
        let p = p
            .parse()
            .map_err(|_| parse_err(path, topo_lineno + 1, format!("bad edge '{pair}'")))?;
        let c = c
            .parse()
            .map_err(|_| parse_err(path, topo_lineno + 1, format!("bad edge '{pair}'")))?;
        topology.push((p, c));
    }

    let mut frames = Vec::with_capacity(frame_count);
    let mut current = Vec::with_capacity(joint_count);
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, lineno + 1, format!("bad coordinate row '{line}'")))?;
        if coords.len() != 3 {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("expected 3 values per row, got {}", coords.len()),
            ));
        }
        current.push([coords[0], coords[1], coords[2]]);
        if current.len() == joint_count {
            frames.push(JointFrame {
                joints: std::mem::take(&mut current),
                timestamp_index: frames.len(),
            });
        }
    }
    if !current.is_empty() {
        return Err(parse_err(
            path,
            0,
            format!(
                "frame {} is truncated: {} of {} joint rows",
                frames.len(),
                current.len(),
                joint_count
            ),
        ));
    }
    if frames.len() != frame_count {
        return Err(parse_err(
            path,
            0,
            format!("header says F={frame_count} but file has {} frames", frames.len()),
        ));
    }
    let seq = SkeletonSequence {
        frames,
        class_label,
        subject_id,
        trial_id,
        joint_count,
        hip_index,
        topology,
    };
    seq.validate()?;
    Ok(seq)
}

/// Serializes to the canonical text format. Parsing the result yields the
/// same sequence; serializing a parsed file reproduces it byte-for-byte.
pub fn write_canonical(seq: &SkeletonSequence) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "F={} J={} class={} subject={} trial={} hip={}",
        seq.frames.len(),
        seq.joint_count,
        seq.class_label,
        seq.subject_id,
        seq.trial_id,
        seq.hip_index
    );
    out.push_str("topology=");
    for &(p, c) in &seq.topology {
        let _ = write!(out, " {p}:{c}");
    }
    out.push('\n');
    for frame in &seq.frames {
        for j in &frame.joints {
            let _ = writeln!(out, "{} {} {}", j[0], j[1], j[2]);
        }
    }
    out
}

pub fn save_canonical(seq: &SkeletonSequence, path: &Path) -> Result<()> {
    std::fs::write(path, write_canonical(seq))?;
    Ok(())
}

/// Parses `a<class>_s<subject>_e<trial>` from an MSR skeleton filename.
pub fn parse_msr_filename(path: &Path) -> Result<(usize, usize, usize)> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("bad path {}", path.display())))?;
    let mut class = None;
    let mut subject = None;
    let mut trial = None;
    for part in name.split(['_', '.']) {
        let (tag, digits) = part.split_at(part.len().min(1));
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        let value: usize = digits.parse().unwrap();
        match tag {
            "a" => class = Some(value),
            "s" => subject = Some(value),
            "e" => trial = Some(value),
            _ => {}
        }
    }
    match (class, subject, trial) {
        (Some(a), Some(s), Some(e)) => Ok((a, s, e)),
        _ => Err(Error::InvalidInput(format!(
            "filename '{name}' does not match a<class>_s<subject>_e<trial>"
        ))),
    }
}

/// Loads a raw MSR skeleton file. Rows are `x y z confidence`; the
/// confidence column is dropped. Files with per-frame count lines of `2J`
/// interleave real-world and screen coordinate rows; `coords` selects which
/// to keep. Files without count lines are read as `J` flat rows per frame.
pub fn load_msr_instance(
    path: &Path,
    coords: MsrCoords,
    joint_count: usize,
) -> Result<SkeletonSequence> {
    let (class_label, subject_id, trial_id) = parse_msr_filename(path)?;
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut frame_row_count: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.len() {
            0 => continue,
            1 => {
                // count lines: the first is the frame count, the rest give
                // rows per frame (2J when world/screen rows interleave)
                if lineno > 0 {
                    frame_row_count = tokens[0].parse().ok();
                }
            }
            4 => {
                let mut row = [0.0; 3];
                for (i, t) in tokens[..3].iter().enumerate() {
                    row[i] = t
                        .parse()
                        .map_err(|_| parse_err(path, lineno + 1, format!("bad value '{t}'")))?;
                }
                rows.push(row);
            }
            n => {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("expected 4 values per joint row, got {n}"),
                ))
            }
        }
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no joint rows"));
    }
    let interleaved = frame_row_count == Some(2 * joint_count);
    let stride = if interleaved { 2 * joint_count } else { joint_count };
    if rows.len() % stride != 0 {
        return Err(parse_err(
            path,
            0,
            format!("{} rows is not a multiple of {stride}", rows.len()),
        ));
    }
    let offset = match (interleaved, coords) {
        (true, MsrCoords::Screen) => 1,
        _ => 0,
    };
    let step = if interleaved { 2 } else { 1 };
    let frames = rows
        .chunks(stride)
        .enumerate()
        .map(|(f, chunk)| JointFrame {
            joints: chunk.iter().skip(offset).step_by(step).copied().collect(),
            timestamp_index: f,
        })
        .collect();
    let seq = SkeletonSequence {
        frames,
        class_label,
        subject_id,
        trial_id,
        joint_count,
        hip_index: MSR_HIP_INDEX,
        topology: msr_default_topology(),
    };
    seq.validate()?;
    Ok(seq)
}

fn edge_length(frame: &JointFrame, p: usize, c: usize) -> f64 {
    let a = frame.joints[p];
    let b = frame.joints[c];
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
}

/// Mean per-edge limb length over every frame of every training instance.
pub fn compute_reference_limb_lengths(training: &[SkeletonSequence]) -> Result<LimbReference> {
    let first = training
        .first()
        .ok_or_else(|| Error::InvalidInput("empty training list".into()))?;
    let topology = &first.topology;
    for seq in training {
        if seq.topology != *topology {
            return Err(Error::Topology(
                "training instances have mixed topologies".into(),
            ));
        }
    }
    let mut sums = vec![0.0; topology.len()];
    let mut frames = 0usize;
    for seq in training {
        for frame in &seq.frames {
            for (e, &(p, c)) in topology.iter().enumerate() {
                sums[e] += edge_length(frame, p, c);
            }
            frames += 1;
        }
    }
    Ok(LimbReference {
        lengths: sums.iter().map(|s| s / frames as f64).collect(),
    })
}

/// Rescales every limb to the reference length while preserving all limb
/// directions and the hip position. Zero-length limbs in the input keep the
/// child coincident with its (repositioned) parent.
pub fn normalize_skeleton_size(
    seq: &SkeletonSequence,
    reference: &LimbReference,
) -> Result<SkeletonSequence> {
    if reference.lengths.len() != seq.topology.len() {
        return Err(Error::Topology(format!(
            "reference has {} edges, sequence has {}",
            reference.lengths.len(),
            seq.topology.len()
        )));
    }
    let order = traversal_order(&seq.topology, seq.joint_count, seq.hip_index);
    let mut out = seq.clone();
    for (old, new) in seq.frames.iter().zip(out.frames.iter_mut()) {
        for &(e, child) in &order {
            let parent = seq.topology[e].0;
            let old_parent = old.joints[parent];
            let old_child = old.joints[child];
            let dir = [
                old_child[0] - old_parent[0],
                old_child[1] - old_parent[1],
                old_child[2] - old_parent[2],
            ];
            let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            let new_parent = new.joints[parent];
            new.joints[child] = if len > 0.0 {
                let s = reference.lengths[e] / len;
                [
                    new_parent[0] + dir[0] * s,
                    new_parent[1] + dir[1] * s,
                    new_parent[2] + dir[2] * s,
                ]
            } else {
                new_parent
            };
        }
    }
    Ok(out)
}

/// Concatenates hip-relative joint positions into a 3J feature vector. The
/// hip's own block is zero.
pub fn center_at_hip(frame: &JointFrame, hip_index: usize) -> Vec<f64> {
    let hip = frame.joints[hip_index];
    let mut out = Vec::with_capacity(frame.joints.len() * 3);
    for j in &frame.joints {
        out.push(j[0] - hip[0]);
        out.push(j[1] - hip[1]);
        out.push(j[2] - hip[2]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn chain_topology(joint_count: usize) -> Vec<(usize, usize)> {
        (0..joint_count - 1).map(|i| (i, i + 1)).collect()
    }

    fn seq_from_frames(frames: Vec<Vec<[f64; 3]>>, joint_count: usize) -> SkeletonSequence {
        SkeletonSequence {
            frames: frames
                .into_iter()
                .enumerate()
                .map(|(i, joints)| JointFrame {
                    joints,
                    timestamp_index: i,
                })
                .collect(),
            class_label: 1,
            subject_id: 1,
            trial_id: 1,
            joint_count,
            hip_index: 0,
            topology: chain_topology(joint_count),
        }
    }

    #[test]
    fn canonical_parse_basic() {
        let mut text = String::from("F=2 J=20 class=1 subject=1 trial=1 hip=0\ntopology=");
        for (p, c) in msr_default_topology() {
            text.push_str(&format!(" {p}:{c}"));
        }
        text.push('\n');
        for i in 0..40 {
            text.push_str(&format!("{} 0 0\n", i as f64 * 0.1));
        }
        let seq = parse_canonical(&text, &PathBuf::from("t")).unwrap();
        assert_eq!(seq.frames.len(), 2);
        assert_eq!(seq.joint_count, 20);
        assert_eq!(seq.class_label, 1);
    }

    #[test]
    fn canonical_truncated_frame_is_an_error() {
        let text = "F=1 J=3 class=1 subject=1 trial=1 hip=0\ntopology= 0:1 1:2\n0 0 0\n1 0 0\n";
        let err = parse_canonical(text, &PathBuf::from("t")).unwrap_err();
        assert!(err.to_string().contains("frame 0"), "{err}");
    }

    #[test]
    fn canonical_roundtrip_is_byte_identical() {
        let seq = seq_from_frames(
            vec![
                vec![[0.0, 0.0, 0.0], [0.125, -1.5, 2.0], [0.3, 0.7, -0.25]],
                vec![[0.1, 0.0, 0.0], [0.5, 1.0, 1.0], [1.0 / 3.0, 0.2, 0.9]],
            ],
            3,
        );
        let text = write_canonical(&seq);
        let parsed = parse_canonical(&text, &PathBuf::from("t")).unwrap();
        assert_eq!(write_canonical(&parsed), text);
        assert_eq!(parsed, seq);
    }

    #[test]
    fn msr_interleaved_and_flat_layouts() {
        let dir = tempfile::tempdir().unwrap();
        // flat: J rows of 4 per frame
        let path = dir.path().join("a01_s02_e03_skeleton3D.txt");
        let mut text = String::new();
        for f in 0..2 {
            for j in 0..20 {
                text.push_str(&format!("{} {} {} 0.9\n", f as f64, j as f64, 0.0));
            }
        }
        std::fs::write(&path, &text).unwrap();
        let seq = load_instance(&path, Format::MsrSkeleton).unwrap();
        assert_eq!(seq.frames.len(), 2);
        assert_eq!((seq.class_label, seq.subject_id, seq.trial_id), (1, 2, 3));
        assert_eq!(seq.frames[1].joints[5], [1.0, 5.0, 0.0]);

        // interleaved: per-frame count line, then world/screen row pairs
        let path = dir.path().join("a10_s04_e01_skeleton.txt");
        let mut text = String::new();
        for _f in 0..3 {
            text.push_str("40\n");
            for j in 0..20 {
                text.push_str(&format!("{} 1 2 1\n", j as f64)); // world
                text.push_str(&format!("{} 9 9 1\n", 100 + j)); // screen
            }
        }
        std::fs::write(&path, &text).unwrap();
        let world = load_msr_instance(&path, MsrCoords::RealWorld, 20).unwrap();
        assert_eq!(world.frames.len(), 3);
        assert_eq!(world.frames[0].joints[3], [3.0, 1.0, 2.0]);
        let screen = load_msr_instance(&path, MsrCoords::Screen, 20).unwrap();
        assert_eq!(screen.frames[0].joints[3], [103.0, 9.0, 9.0]);
    }

    #[test]
    fn reference_lengths_are_means() {
        let one = seq_from_frames(vec![vec![[0.0; 3], [0.0, 1.0, 0.0]]], 2);
        let r = compute_reference_limb_lengths(&[one.clone()]).unwrap();
        assert_eq!(r.lengths, vec![1.0]);

        let two = seq_from_frames(
            vec![
                vec![[0.0; 3], [0.0, 1.0, 0.0]],
                vec![[0.0; 3], [0.0, 3.0, 0.0]],
            ],
            2,
        );
        let r = compute_reference_limb_lengths(&[two]).unwrap();
        assert_eq!(r.lengths, vec![2.0]);

        let mut other = one;
        other.topology = vec![(1, 0)];
        other.hip_index = 1;
        let base = seq_from_frames(vec![vec![[0.0; 3], [0.0, 1.0, 0.0]]], 2);
        assert!(compute_reference_limb_lengths(&[base, other]).is_err());
        assert!(compute_reference_limb_lengths(&[]).is_err());
    }

    #[test]
    fn normalization_fixed_point_and_scaling() {
        let seq = seq_from_frames(
            vec![vec![[0.0; 3], [0.6, 0.8, 0.0], [0.6, 0.8, 2.0]]],
            3,
        );
        let reference = compute_reference_limb_lengths(std::slice::from_ref(&seq)).unwrap();
        let same = normalize_skeleton_size(&seq, &reference).unwrap();
        for (a, b) in seq.frames[0].joints.iter().zip(&same.frames[0].joints) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
        // uniformly scaled x2 about the hip -> recovers the original
        let mut scaled = seq.clone();
        for j in scaled.frames[0].joints.iter_mut() {
            for c in j.iter_mut() {
                *c *= 2.0;
            }
        }
        let back = normalize_skeleton_size(&scaled, &reference).unwrap();
        for (a, b) in seq.frames[0].joints.iter().zip(&back.frames[0].joints) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalization_matches_pose_angles_across_subjects() {
        // two subjects with identical joint angles but different limb lengths
        let dirs = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let build = |scale: f64, hip: [f64; 3]| {
            let mut joints = vec![hip];
            for d in dirs {
                let prev = *joints.last().unwrap();
                joints.push([
                    prev[0] + d[0] * scale,
                    prev[1] + d[1] * scale,
                    prev[2] + d[2] * scale,
                ]);
            }
            seq_from_frames(vec![joints], 4)
        };
        let small = build(0.8, [0.0; 3]);
        let tall = build(1.3, [5.0, 1.0, -2.0]);
        let reference = LimbReference {
            lengths: vec![1.0, 1.0, 1.0],
        };
        let a = normalize_skeleton_size(&small, &reference).unwrap();
        let b = normalize_skeleton_size(&tall, &reference).unwrap();
        // identical up to hip translation
        let ah = a.frames[0].joints[0];
        let bh = b.frames[0].joints[0];
        for (ja, jb) in a.frames[0].joints.iter().zip(&b.frames[0].joints) {
            for k in 0..3 {
                assert!(((ja[k] - ah[k]) - (jb[k] - bh[k])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalization_is_idempotent_and_hits_reference_lengths() {
        let seq = seq_from_frames(
            vec![vec![
                [0.2, -0.1, 0.4],
                [1.0, 0.3, 0.0],
                [1.5, 1.4, -0.7],
                [2.0, 1.4, 0.1],
            ]],
            4,
        );
        let reference = LimbReference {
            lengths: vec![0.5, 0.75, 0.33],
        };
        let once = normalize_skeleton_size(&seq, &reference).unwrap();
        let twice = normalize_skeleton_size(&once, &reference).unwrap();
        for (e, &(p, c)) in seq.topology.iter().enumerate() {
            let l = edge_length(&once.frames[0], p, c);
            assert!((l - reference.lengths[e]).abs() < 1e-9);
        }
        for (a, b) in once.frames[0].joints.iter().zip(&twice.frames[0].joints) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_length_limb_keeps_child_on_parent() {
        let seq = seq_from_frames(vec![vec![[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]]], 3);
        let reference = LimbReference {
            lengths: vec![1.0, 1.0],
        };
        let out = normalize_skeleton_size(&seq, &reference).unwrap();
        assert_eq!(out.frames[0].joints[1], out.frames[0].joints[0]);
    }

    #[test]
    fn hip_centering_translation_invariance() {
        let frame = JointFrame {
            joints: vec![[0.3, 0.1, -0.2], [1.0, 2.0, 3.0], [-0.5, 0.25, 0.8]],
            timestamp_index: 0,
        };
        let base = center_at_hip(&frame, 0);
        assert_eq!(base.len(), 9);
        assert_eq!(&base[0..3], &[0.0, 0.0, 0.0]);
        let t = [17.5, -3.25, 0.125];
        let shifted = JointFrame {
            joints: frame
                .joints
                .iter()
                .map(|j| [j[0] + t[0], j[1] + t[1], j[2] + t[2]])
                .collect(),
            timestamp_index: 0,
        };
        let moved = center_at_hip(&shifted, 0);
        for (a, b) in base.iter().zip(&moved) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hip_centering_degenerate_and_sizes() {
        let frame = JointFrame {
            joints: vec![[1.0, 2.0, 3.0]; 20],
            timestamp_index: 0,
        };
        let v = center_at_hip(&frame, 7);
        assert_eq!(v.len(), 60);
        assert!(v.iter().all(|&x| x == 0.0));
    }
}
