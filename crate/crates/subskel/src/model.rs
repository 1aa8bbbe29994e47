//! Skeleton graphs, frame sequences and labeled datasets.
//!
//! All types are immutable after construction and safe to share across
//! threads. Coordinates are `f64`; 32-bit dataset files are widened on load.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 3D position of one joint in one frame.
pub type Point3 = [f64; 3];

/// An undirected connected joint graph.
///
/// Joint order is significant: frames store one position per joint in this
/// order, and dataset files rely on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SkeletonRepr", into = "SkeletonRepr")]
pub struct Skeleton {
    joints: Vec<String>,
    /// Normalized (min, max) joint-index pairs, sorted.
    edges: Vec<(usize, usize)>,
    central_joints: Vec<String>,
}

/// On-disk shape of a skeleton sidecar file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SkeletonRepr {
    joints: Vec<String>,
    edges: Vec<(String, String)>,
    central_joints: Vec<String>,
}

impl Skeleton {
    pub fn new(
        joints: Vec<String>,
        edges: &[(String, String)],
        central_joints: Vec<String>,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        let mut seen = HashMap::new();
        for (i, j) in joints.iter().enumerate() {
            if seen.insert(j.clone(), i).is_some() {
                return Err(Error::InvalidSkeleton(format!("duplicate joint `{j}`")));
            }
        }
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = *seen.get(a).ok_or_else(|| Error::UnknownJoint(a.clone()))?;
            let ib = *seen.get(b).ok_or_else(|| Error::UnknownJoint(b.clone()))?;
            if ia == ib {
                return Err(Error::InvalidSkeleton(format!("self-loop at `{a}`")));
            }
            idx_edges.push((ia.min(ib), ia.max(ib)));
        }
        idx_edges.sort_unstable();
        if idx_edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSkeleton("duplicate edge".into()));
        }
        for c in &central_joints {
            if !seen.contains_key(c) {
                return Err(Error::UnknownJoint(c.clone()));
            }
        }
        let skel = Self {
            joints,
            edges: idx_edges,
            central_joints,
        };
        if !skel.is_connected() {
            return Err(Error::InvalidSkeleton("graph is not connected".into()));
        }
        Ok(skel)
    }

    fn is_connected(&self) -> bool {
        let n = self.joints.len();
        if n == 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut visited = vec![false; n];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    pub fn joints(&self) -> &[String] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joint_index(&self, name: &str) -> Result<usize> {
        self.joints
            .iter()
            .position(|j| j == name)
            .ok_or_else(|| Error::UnknownJoint(name.to_string()))
    }

    pub fn joint_name(&self, index: usize) -> &str {
        &self.joints[index]
    }

    /// Edges as normalized (min, max) index pairs, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn central_joints(&self) -> &[String] {
        &self.central_joints
    }

    pub fn degree(&self, joint: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == joint || b == joint)
            .count()
    }

    pub fn neighbors(&self, joint: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == joint {
                out.push(b);
            } else if b == joint {
                out.push(a);
            }
        }
        out
    }
}

impl TryFrom<SkeletonRepr> for Skeleton {
    type Error = Error;
    fn try_from(r: SkeletonRepr) -> Result<Self> {
        Skeleton::new(r.joints, &r.edges, r.central_joints)
    }
}

impl From<Skeleton> for SkeletonRepr {
    fn from(s: Skeleton) -> Self {
        let edges = s
            .edges
            .iter()
            .map(|&(a, b)| (s.joints[a].clone(), s.joints[b].clone()))
            .collect();
        SkeletonRepr {
            joints: s.joints,
            edges,
            central_joints: s.central_joints,
        }
    }
}

/// One position per skeleton joint, in skeleton joint order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frame {
    pub positions: Vec<Point3>,
}

impl Frame {
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "frame position".into(),
            });
        }
        Ok(Self { positions })
    }

    pub fn position(&self, joint: usize) -> Point3 {
        self.positions[joint]
    }
}

/// A labeled, time-ordered recording of one actor performing one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    pub label: String,
    pub subject: Option<String>,
    pub fps: f64,
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(
        label: String,
        subject: Option<String>,
        fps: f64,
        frames: Vec<Frame>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidSequence {
                label,
                reason: "no frames".into(),
            });
        }
        if !fps.is_finite() || fps <= 0.0 {
            return Err(Error::InvalidSequence {
                label,
                reason: format!("non-positive fps {fps}"),
            });
        }
        Ok(Self {
            label,
            subject,
            fps,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A skeleton plus labeled sequences over it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub skeleton: Skeleton,
    pub sequences: Vec<FrameSequence>,
    pub at_rest_pose: Option<Frame>,
}

impl LabeledDataset {
    pub fn new(
        skeleton: Skeleton,
        sequences: Vec<FrameSequence>,
        at_rest_pose: Option<Frame>,
    ) -> Result<Self> {
        let n = skeleton.len();
        for seq in &sequences {
            if seq.label.is_empty() {
                return Err(Error::InvalidSequence {
                    label: String::new(),
                    reason: "empty label".into(),
                });
            }
            for (i, frame) in seq.frames.iter().enumerate() {
                if frame.positions.len() != n {
                    return Err(Error::InvalidSequence {
                        label: seq.label.clone(),
                        reason: format!(
                            "frame {i} has {} positions, skeleton has {n} joints",
                            frame.positions.len()
                        ),
                    });
                }
            }
        }
        if let Some(pose) = &at_rest_pose {
            if pose.positions.len() != n {
                return Err(Error::InvalidData(
                    "at-rest pose does not cover the skeleton joints".into(),
                ));
            }
        }
        Ok(Self {
            skeleton,
            sequences,
            at_rest_pose,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Distinct labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.sequences.iter().map(|s| s.label.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Replaces the sequence list, keeping skeleton and pose.
    pub fn with_sequences(&self, sequences: Vec<FrameSequence>) -> Self {
        Self {
            skeleton: self.skeleton.clone(),
            sequences,
            at_rest_pose: self.at_rest_pose.clone(),
        }
    }
}

/// How to partition a dataset into train and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SplitSpec {
    /// Exactly `count` training sequences per class.
    FixedCountPerClass { count: usize },
    /// `fraction` of each class for training; rounded up, at least 1.
    FractionPerClass { fraction: f64 },
    /// Sequences of the named subjects train; everything else tests.
    CrossSubject { train_subjects: Vec<String> },
    /// Fold `index` of `folds` per-class folds is the test set.
    KFold { folds: usize, index: usize },
}

/// Partitions `dataset` into train and test per `protocol`.
///
/// Deterministic given the seed: per-class sequence order is shuffled with a
/// seeded generator before selection. Classes are processed in sorted label
/// order so the partition does not depend on input order beyond ties.
pub fn split_train_test(
    dataset: &LabeledDataset,
    protocol: &SplitSpec,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    match protocol {
        SplitSpec::FixedCountPerClass { count } => {
            if *count == 0 {
                return Err(Error::InvalidConfig("training count must be positive".into()));
            }
            split_per_class(dataset, seed, |label, n| {
                if n < *count {
                    Err(Error::ClassTooSmall {
                        label: label.to_string(),
                        available: n,
                        requested: *count,
                    })
                } else {
                    Ok(*count)
                }
            })
        }
        SplitSpec::FractionPerClass { fraction } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidConfig(format!(
                    "fraction {fraction} outside [0, 1]"
                )));
            }
            split_per_class(dataset, seed, |_, n| {
                let k = (fraction * n as f64).ceil() as usize;
                Ok(k.clamp(1, n))
            })
        }
        SplitSpec::CrossSubject { train_subjects } => {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for seq in &dataset.sequences {
                let subject = seq.subject.as_ref().ok_or_else(|| {
                    Error::MissingSubject(seq.label.clone())
                })?;
                if train_subjects.contains(subject) {
                    train.push(seq.clone());
                } else {
                    test.push(seq.clone());
                }
            }
            Ok((dataset.with_sequences(train), dataset.with_sequences(test)))
        }
        SplitSpec::KFold { folds, index } => {
            if *folds < 2 || index >= folds {
                return Err(Error::InvalidConfig(format!(
                    "invalid fold {index} of {folds}"
                )));
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (label, mut members) in class_partition(dataset) {
                let mut rng = class_rng(seed, &label);
                members.shuffle(&mut rng);
                for (pos, idx) in members.into_iter().enumerate() {
                    if pos % folds == *index {
                        test.push(dataset.sequences[idx].clone());
                    } else {
                        train.push(dataset.sequences[idx].clone());
                    }
                }
            }
            Ok((dataset.with_sequences(train), dataset.with_sequences(test)))
        }
    }
}

/// Stable per-class member indices, keyed by sorted label.
fn class_partition(dataset: &LabeledDataset) -> Vec<(String, Vec<usize>)> {
    let mut by_class: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, seq) in dataset.sequences.iter().enumerate() {
        by_class.entry(&seq.label).or_default().push(i);
    }
    let mut out: Vec<(String, Vec<usize>)> = by_class
        .into_iter()
        .map(|(l, v)| (l.to_string(), v))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Per-class generator derived from the run seed and the label, so a class's
/// selection does not depend on which other classes exist.
fn class_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let bytes = label.as_bytes();
    for (i, b) in bytes.iter().enumerate().take(24) {
        key[8 + i] ^= *b;
    }
    key[31] ^= bytes.len() as u8;
    ChaCha8Rng::from_seed(key)
}

fn split_per_class(
    dataset: &LabeledDataset,
    seed: u64,
    take: impl Fn(&str, usize) -> Result<usize>,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut members) in class_partition(dataset) {
        let k = take(&label, members.len())?;
        let mut rng = class_rng(seed, &label);
        members.shuffle(&mut rng);
        for (pos, idx) in members.into_iter().enumerate() {
            if pos < k {
                train.push(dataset.sequences[idx].clone());
            } else {
                test.push(dataset.sequences[idx].clone());
            }
        }
    }
    Ok((dataset.with_sequences(train), dataset.with_sequences(test)))
}

// --- file formats -----------------------------------------------------------

/// One dataset line: a frame is an array of [x, y, z] in skeleton joint order.
#[derive(Serialize, Deserialize)]
struct SequenceLine {
    label: String,
    #[serde(default)]
    subject: Option<String>,
    fps: f64,
    frames: Vec<Vec<Point3>>,
}

/// Skeleton sidecar file, optionally carrying the at-rest pose.
#[derive(Serialize, Deserialize)]
struct SkeletonFile {
    #[serde(flatten)]
    skeleton: SkeletonRepr,
    #[serde(default)]
    at_rest_pose: Option<Vec<Point3>>,
}

/// Reads a skeleton sidecar JSON file.
pub fn read_skeleton_file(path: &Path) -> Result<(Skeleton, Option<Frame>)> {
    let text = std::fs::read_to_string(path)?;
    parse_skeleton_json(&text)
}

/// Parses skeleton sidecar JSON.
pub fn parse_skeleton_json(text: &str) -> Result<(Skeleton, Option<Frame>)> {
    let file: SkeletonFile = serde_json::from_str(text)?;
    let skeleton = Skeleton::try_from(file.skeleton)?;
    let pose = file.at_rest_pose.map(Frame::new).transpose()?;
    Ok((skeleton, pose))
}

/// Writes the skeleton sidecar JSON file.
pub fn write_skeleton_file(
    path: &Path,
    skeleton: &Skeleton,
    at_rest_pose: Option<&Frame>,
) -> Result<()> {
    let file = SkeletonFile {
        skeleton: SkeletonRepr::from(skeleton.clone()),
        at_rest_pose: at_rest_pose.map(|f| f.positions.clone()),
    };
    let mut out = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a JSONL dataset against a skeleton sidecar.
pub fn read_dataset(data_path: &Path, skeleton_path: &Path) -> Result<LabeledDataset> {
    let (skeleton, pose) = read_skeleton_file(skeleton_path)?;
    let sequences = read_sequences(data_path)?;
    LabeledDataset::new(skeleton, sequences, pose)
}

/// Reads bare JSONL sequences (no sidecar); joint coverage is checked when
/// they are combined with a skeleton into a `LabeledDataset`.
pub fn read_sequences(data_path: &Path) -> Result<Vec<FrameSequence>> {
    let file = std::fs::File::open(data_path)?;
    let reader = std::io::BufReader::new(file);
    let mut sequences = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SequenceLine = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidData(format!("line {}: {e}", lineno + 1)))?;
        let frames = parsed
            .frames
            .into_iter()
            .map(Frame::new)
            .collect::<Result<Vec<_>>>()?;
        sequences.push(FrameSequence::new(
            parsed.label,
            parsed.subject,
            parsed.fps,
            frames,
        )?);
    }
    Ok(sequences)
}

/// Writes sequences as JSONL (one sequence per line).
pub fn write_dataset(path: &Path, dataset: &LabeledDataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for seq in &dataset.sequences {
        let line = SequenceLine {
            label: seq.label.clone(),
            subject: seq.subject.clone(),
            fps: seq.fps,
            frames: seq.frames.iter().map(|f| f.positions.clone()).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
