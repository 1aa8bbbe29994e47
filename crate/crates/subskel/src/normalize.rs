//! Per-sequence skeletal normalizations.
//!
//! Four independently applicable steps, always applied in the fixed order
//! translate → rotate → standardize limbs → pad with the at-rest pose. The
//! rotation convention assumes a translated anchor, and padding comes last so
//! the inserted pose is itself normalized consistently (the stored pose runs
//! through the same pipeline minus padding).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Frame, FrameSequence, LabeledDataset, Point3, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    #[default]
    Off,
    /// Use the first frame's reference for the whole sequence.
    FirstFrame,
    /// Recompute the reference in every frame.
    EveryFrame,
}

/// Translation step: moves `anchor` to the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateSpec {
    pub mode: ReferenceMode,
    pub anchor: String,
}

/// Rotation step: maps the `heading` joint-pair direction onto +x and the
/// `up` pair direction onto +y (Gram–Schmidt, third axis by cross product).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotateSpec {
    pub mode: ReferenceMode,
    /// Ordered pair (from, to) defining the heading axis, e.g. the shoulders.
    pub heading: (String, String),
    /// Ordered pair (from, to) defining the vertical axis, e.g. hip → neck.
    pub up: (String, String),
}

/// Limb-length standardization: rescale every bone to its standard length,
/// walking out from `root` and preserving bone directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardLimbSpec {
    pub root: String,
}

/// Which normalizations to run. All default off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NormalizationSpec {
    #[serde(default)]
    pub translate: Option<TranslateSpec>,
    #[serde(default)]
    pub rotate: Option<RotateSpec>,
    #[serde(default)]
    pub standard_limbs: Option<StandardLimbSpec>,
    #[serde(default)]
    pub at_rest_pad: bool,
}

impl NormalizationSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// Short description for traces and reports.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(t) = &self.translate {
            parts.push(format!("translate({:?},{})", t.mode, t.anchor));
        }
        if let Some(r) = &self.rotate {
            parts.push(format!("rotate({:?})", r.mode));
        }
        if let Some(s) = &self.standard_limbs {
            parts.push(format!("limbs({})", s.root));
        }
        if self.at_rest_pad {
            parts.push("pad".into());
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// Mean bone length per skeleton edge, keyed like `Skeleton::edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLengths {
    /// (joint a, joint b, length) with a < b in skeleton index order.
    pub lengths: Vec<(String, String, f64)>,
}

impl EdgeLengths {
    pub fn to_index_map(&self, skeleton: &Skeleton) -> Result<HashMap<(usize, usize), f64>> {
        let mut map = HashMap::new();
        for (a, b, len) in &self.lengths {
            let ia = skeleton.joint_index(a)?;
            let ib = skeleton.joint_index(b)?;
            map.insert((ia.min(ib), ia.max(ib)), *len);
        }
        Ok(map)
    }
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Row-major rotation applied as p' = R p.
type Mat3 = [Point3; 3];

fn apply_mat(m: &Mat3, p: Point3) -> Point3 {
    [dot(m[0], p), dot(m[1], p), dot(m[2], p)]
}

/// Translates so the anchor joint sits at the origin.
pub fn translate(
    seq: &FrameSequence,
    skeleton: &Skeleton,
    anchor: &str,
    mode: ReferenceMode,
) -> Result<FrameSequence> {
    let anchor_idx = skeleton.joint_index(anchor)?;
    let mut out = seq.clone();
    match mode {
        ReferenceMode::Off => {}
        ReferenceMode::FirstFrame => {
            let offset = seq.frames[0].positions[anchor_idx];
            for frame in &mut out.frames {
                for p in &mut frame.positions {
                    *p = sub(*p, offset);
                }
            }
        }
        ReferenceMode::EveryFrame => {
            for frame in &mut out.frames {
                let offset = frame.positions[anchor_idx];
                for p in &mut frame.positions {
                    *p = sub(*p, offset);
                }
            }
        }
    }
    Ok(out)
}

/// Builds the rotation taking the frame's heading direction to +x and its
/// (orthogonalized) up direction to +y.
fn frame_rotation(frame: &Frame, spec_idx: &RotateIdx, frame_no: usize) -> Result<Mat3> {
    let h = sub(
        frame.positions[spec_idx.heading.1],
        frame.positions[spec_idx.heading.0],
    );
    let u = sub(frame.positions[spec_idx.up.1], frame.positions[spec_idx.up.0]);
    let hn = norm(h);
    if hn < 1e-12 {
        return Err(Error::DegenerateRotation {
            frame: frame_no,
            reason: "zero-length heading pair".into(),
        });
    }
    let f = scale(h, 1.0 / hn);
    let u_orth = sub(u, scale(f, dot(u, f)));
    let un = norm(u_orth);
    if un < 1e-12 {
        return Err(Error::DegenerateRotation {
            frame: frame_no,
            reason: "up pair parallel to heading pair".into(),
        });
    }
    let up = scale(u_orth, 1.0 / un);
    let third = cross(f, up);
    Ok([f, up, third])
}

struct RotateIdx {
    heading: (usize, usize),
    up: (usize, usize),
}

/// Rotates the sequence into the canonical facing convention.
pub fn rotate(seq: &FrameSequence, skeleton: &Skeleton, spec: &RotateSpec) -> Result<FrameSequence> {
    if spec.mode == ReferenceMode::Off {
        return Ok(seq.clone());
    }
    let idx = RotateIdx {
        heading: (
            skeleton.joint_index(&spec.heading.0)?,
            skeleton.joint_index(&spec.heading.1)?,
        ),
        up: (
            skeleton.joint_index(&spec.up.0)?,
            skeleton.joint_index(&spec.up.1)?,
        ),
    };
    let mut out = seq.clone();
    match spec.mode {
        ReferenceMode::Off => unreachable!(),
        ReferenceMode::FirstFrame => {
            let rot = frame_rotation(&seq.frames[0], &idx, 0)?;
            for frame in &mut out.frames {
                for p in &mut frame.positions {
                    *p = apply_mat(&rot, *p);
                }
            }
        }
        ReferenceMode::EveryFrame => {
            for (i, frame) in out.frames.iter_mut().enumerate() {
                let rot = frame_rotation(frame, &idx, i)?;
                for p in &mut frame.positions {
                    *p = apply_mat(&rot, *p);
                }
            }
        }
    }
    Ok(out)
}

/// Mean bone length per edge over every frame of the training set.
pub fn compute_standard_lengths(train: &LabeledDataset) -> Result<EdgeLengths> {
    if train.is_empty() {
        return Err(Error::InvalidData("empty training set".into()));
    }
    let skeleton = &train.skeleton;
    let mut sums = vec![0.0f64; skeleton.edges().len()];
    let mut count = 0usize;
    for seq in &train.sequences {
        for frame in &seq.frames {
            for (e, &(a, b)) in skeleton.edges().iter().enumerate() {
                sums[e] += norm(sub(frame.positions[a], frame.positions[b]));
            }
            count += 1;
        }
    }
    let lengths = skeleton
        .edges()
        .iter()
        .zip(&sums)
        .map(|(&(a, b), &s)| {
            (
                skeleton.joint_name(a).to_string(),
                skeleton.joint_name(b).to_string(),
                s / count as f64,
            )
        })
        .collect();
    Ok(EdgeLengths { lengths })
}

/// Rescales every bone to its standard length, preserving the original bone
/// directions, walking a BFS tree out from `root`.
pub fn standardize_limbs(
    seq: &FrameSequence,
    skeleton: &Skeleton,
    standard: &EdgeLengths,
    root: &str,
) -> Result<FrameSequence> {
    let root_idx = skeleton.joint_index(root)?;
    let lengths = standard.to_index_map(skeleton)?;
    for &(a, b) in skeleton.edges() {
        if !lengths.contains_key(&(a, b)) {
            return Err(Error::InvalidData(format!(
                "standard lengths missing edge {}-{}",
                skeleton.joint_name(a),
                skeleton.joint_name(b)
            )));
        }
    }
    // BFS tree from the root; back-edges are ignored.
    let mut order = Vec::with_capacity(skeleton.len());
    let mut visited = vec![false; skeleton.len()];
    let mut queue = std::collections::VecDeque::new();
    visited[root_idx] = true;
    queue.push_back(root_idx);
    while let Some(v) = queue.pop_front() {
        let mut next = skeleton.neighbors(v);
        next.sort_unstable();
        for w in next {
            if !visited[w] {
                visited[w] = true;
                order.push((v, w));
                queue.push_back(w);
            }
        }
    }

    let mut out = seq.clone();
    for (frame_no, frame) in out.frames.iter_mut().enumerate() {
        let original = frame.positions.clone();
        for &(parent, child) in &order {
            let dir = sub(original[child], original[parent]);
            let len = norm(dir);
            if len < 1e-12 {
                return Err(Error::ZeroLengthBone {
                    frame: frame_no,
                    a: skeleton.joint_name(parent).to_string(),
                    b: skeleton.joint_name(child).to_string(),
                });
            }
            let key = (parent.min(child), parent.max(child));
            let std_len = lengths[&key];
            frame.positions[child] = [
                frame.positions[parent][0] + dir[0] / len * std_len,
                frame.positions[parent][1] + dir[1] / len * std_len,
                frame.positions[parent][2] + dir[2] / len * std_len,
            ];
        }
    }
    Ok(out)
}

/// Inserts the at-rest pose before the first and after the last frame.
pub fn pad_at_rest(seq: &FrameSequence, pose: &Frame) -> FrameSequence {
    let mut frames = Vec::with_capacity(seq.frames.len() + 2);
    frames.push(pose.clone());
    frames.extend(seq.frames.iter().cloned());
    frames.push(pose.clone());
    FrameSequence {
        label: seq.label.clone(),
        subject: seq.subject.clone(),
        fps: seq.fps,
        frames,
    }
}

/// Statistics a normalization needs beyond the sequence itself.
#[derive(Debug, Clone, Default)]
pub struct NormalizationContext {
    pub standard_lengths: Option<EdgeLengths>,
    pub at_rest_pose: Option<Frame>,
}

/// Runs the enabled steps in the fixed order translate → rotate →
/// standardize → pad.
pub fn apply(
    seq: &FrameSequence,
    skeleton: &Skeleton,
    spec: &NormalizationSpec,
    ctx: &NormalizationContext,
) -> Result<FrameSequence> {
    let mut out = seq.clone();
    if let Some(t) = &spec.translate {
        out = translate(&out, skeleton, &t.anchor, t.mode)?;
    }
    if let Some(r) = &spec.rotate {
        out = rotate(&out, skeleton, r)?;
    }
    if let Some(s) = &spec.standard_limbs {
        let lengths = ctx.standard_lengths.as_ref().ok_or_else(|| {
            Error::InvalidConfig("limb standardization requires standard lengths".into())
        })?;
        out = standardize_limbs(&out, skeleton, lengths, &s.root)?;
    }
    if spec.at_rest_pad {
        let pose = ctx.at_rest_pose.as_ref().ok_or_else(|| {
            Error::InvalidConfig("at-rest padding requires a dataset at-rest pose".into())
        })?;
        // The pose runs through the same steps (minus padding) so it lands in
        // the same coordinate convention as the sequence it pads.
        let pose_seq = FrameSequence::new(
            seq.label.clone(),
            seq.subject.clone(),
            seq.fps,
            vec![pose.clone()],
        )?;
        let mut pose_spec = spec.clone();
        pose_spec.at_rest_pad = false;
        let normalized_pose = apply(&pose_seq, skeleton, &pose_spec, ctx)?;
        out = pad_at_rest(&out, &normalized_pose.frames[0]);
    }
    Ok(out)
}
