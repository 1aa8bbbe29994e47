//! The sub-skeleton feature space.
//!
//! A singleton is one joint viewed either absolutely or relative to a
//! reference joint. Canonical sub-skeletons are the basis the miner explores:
//! every singleton for small skeletons, or merged degree-2 chains for large
//! ones. A feature template partitions its chosen singletons by reference via
//! the adapted union, yielding at most `1 + |G|` grouped features; each group
//! maps a frame sequence to a polygonal curve in `R^(3|f|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrameSequence, Skeleton};
use crate::trajectory::Trajectory;

/// One joint, absolute (`reference: None`) or relative to a reference joint.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Singleton {
    pub joint: String,
    #[serde(default)]
    pub reference: Option<String>,
}

impl Singleton {
    pub fn absolute(joint: impl Into<String>) -> Self {
        Self {
            joint: joint.into(),
            reference: None,
        }
    }

    pub fn relative(joint: impl Into<String>, reference: impl Into<String>) -> Self {
        Self {
            joint: joint.into(),
            reference: Some(reference.into()),
        }
    }
}

/// A basis element of the mining search: singletons sharing one reference
/// (or all absolute).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalSubSkeleton {
    pub name: String,
    pub singletons: Vec<Singleton>,
}

impl CanonicalSubSkeleton {
    pub fn new(name: impl Into<String>, singletons: Vec<Singleton>) -> Result<Self> {
        if singletons.is_empty() {
            return Err(Error::InvalidData("canonical sub-skeleton is empty".into()));
        }
        let reference = &singletons[0].reference;
        if singletons.iter().any(|s| &s.reference != reference) {
            return Err(Error::InvalidData(
                "canonical sub-skeleton mixes references".into(),
            ));
        }
        if singletons.iter().any(|s| Some(&s.joint) == s.reference.as_ref()) {
            return Err(Error::InvalidData(
                "singleton relative to itself".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            singletons,
        })
    }

    /// The shared reference of all member singletons.
    pub fn reference(&self) -> Option<&str> {
        self.singletons[0].reference.as_deref()
    }
}

impl std::fmt::Display for CanonicalSubSkeleton {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let joints: Vec<&str> = self.singletons.iter().map(|s| s.joint.as_str()).collect();
        match self.reference() {
            None => write!(f, "abs({})", joints.join(",")),
            Some(r) => write!(f, "{r}({})", joints.join(",")),
        }
    }
}

/// One grouped feature of a template: all chosen singletons sharing a
/// reference, in canonical (sorted, deduplicated) order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub reference: Option<String>,
    pub singletons: Vec<Singleton>,
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let joints: Vec<&str> = self.singletons.iter().map(|s| s.joint.as_str()).collect();
        match &self.reference {
            None => write!(f, "abs({})", joints.join(",")),
            Some(r) => write!(f, "{r}({})", joints.join(",")),
        }
    }
}

/// The miner's chosen canonical sets and the grouped features they induce.
///
/// Groups appear in order of first appearance during the adapted unions;
/// singletons within a group are sorted by (joint, reference) and
/// deduplicated, so extraction is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FeatureTemplate {
    pub chosen: Vec<CanonicalSubSkeleton>,
    pub groups: Vec<FeatureGroup>,
}

impl FeatureTemplate {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Number of grouped features, `l(T)`.
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Merges `c` into the group sharing its reference; creates a new group
    /// if none matches. Duplicate singletons deduplicate.
    pub fn adapted_union(&self, c: &CanonicalSubSkeleton) -> Self {
        let mut out = self.clone();
        out.chosen.push(c.clone());
        let reference = c.reference().map(str::to_string);
        match out.groups.iter_mut().find(|g| g.reference == reference) {
            Some(group) => {
                group.singletons.extend(c.singletons.iter().cloned());
                group.singletons.sort();
                group.singletons.dedup();
            }
            None => {
                let mut singletons = c.singletons.clone();
                singletons.sort();
                singletons.dedup();
                out.groups.push(FeatureGroup {
                    reference,
                    singletons,
                });
            }
        }
        out
    }

    /// Rebuilds groups from `chosen` and checks they match the stored layout.
    pub fn validate(&self) -> Result<()> {
        let mut rebuilt = FeatureTemplate::empty();
        for c in &self.chosen {
            rebuilt = rebuilt.adapted_union(c);
        }
        if rebuilt.groups != self.groups {
            return Err(Error::InvalidData(
                "feature template group layout does not match its chosen sets".into(),
            ));
        }
        Ok(())
    }
}

impl std::fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let groups: Vec<String> = self.groups.iter().map(|g| g.to_string()).collect();
        write!(f, "{}", groups.join(", "))
    }
}

/// Which joints may serve as relative references when enumerating singletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceScope {
    /// All joints for skeletons with at most 15 joints, else central only.
    #[default]
    Auto,
    AllJoints,
    CentralOnly,
}

/// Options for canonical sub-skeleton enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CanonicalOptions {
    /// Collapse degree-2 chains into one set per chain.
    pub merge_chains: bool,
    #[serde(default)]
    pub reference_scope: ReferenceScope,
}

fn resolve_scope(skeleton: &Skeleton, scope: ReferenceScope) -> Vec<&str> {
    let all = skeleton.len() <= 15;
    match scope {
        ReferenceScope::AllJoints => skeleton.joints().iter().map(String::as_str).collect(),
        ReferenceScope::CentralOnly => skeleton
            .central_joints()
            .iter()
            .map(String::as_str)
            .collect(),
        ReferenceScope::Auto if all => skeleton.joints().iter().map(String::as_str).collect(),
        ReferenceScope::Auto => skeleton
            .central_joints()
            .iter()
            .map(String::as_str)
            .collect(),
    }
}

/// Maximal units of the skeleton after chain merging: joints of degree ≥ 3
/// stand alone, and each connected run of degree ≤ 2 joints (a limb, a
/// finger) merges into one unit. Units are ordered by smallest joint index.
pub fn chain_units(skeleton: &Skeleton) -> Vec<Vec<usize>> {
    let n = skeleton.len();
    let chainable: Vec<bool> = (0..n).map(|j| skeleton.degree(j) <= 2).collect();
    let mut unit_of = vec![usize::MAX; n];
    let mut units: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if unit_of[start] != usize::MAX {
            continue;
        }
        if !chainable[start] {
            unit_of[start] = units.len();
            units.push(vec![start]);
            continue;
        }
        // Flood the degree<=2 component containing `start`.
        let id = units.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        unit_of[start] = id;
        while let Some(v) = stack.pop() {
            members.push(v);
            for w in skeleton.neighbors(v) {
                if chainable[w] && unit_of[w] == usize::MAX {
                    unit_of[w] = id;
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        units.push(members);
    }
    units
}

/// Enumerates the canonical sub-skeleton basis.
///
/// Without merging: one absolute singleton per joint plus one relative
/// singleton per (joint, reference) pair with joint ≠ reference, the
/// reference drawn from `options.reference_scope`. With merging: one
/// absolute set per chain unit plus one relative set per (unit, central
/// joint) pair, dropping the self-relative singleton inside a unit.
pub fn canonical_subskeletons(
    skeleton: &Skeleton,
    options: &CanonicalOptions,
) -> Vec<CanonicalSubSkeleton> {
    let mut out = Vec::new();
    if !options.merge_chains {
        let references = resolve_scope(skeleton, options.reference_scope);
        for joint in skeleton.joints() {
            out.push(
                CanonicalSubSkeleton::new(format!("abs({joint})"), vec![Singleton::absolute(joint)])
                    .expect("singleton set is valid"),
            );
        }
        for reference in &references {
            for joint in skeleton.joints() {
                if joint == reference {
                    continue;
                }
                out.push(
                    CanonicalSubSkeleton::new(
                        format!("{reference}({joint})"),
                        vec![Singleton::relative(joint, *reference)],
                    )
                    .expect("singleton set is valid"),
                );
            }
        }
        return out;
    }

    let units = chain_units(skeleton);
    let unit_name = |members: &[usize]| -> String {
        if members.len() == 1 {
            skeleton.joint_name(members[0]).to_string()
        } else {
            format!(
                "{}..{}",
                skeleton.joint_name(members[0]),
                skeleton.joint_name(members[members.len() - 1])
            )
        }
    };
    for members in &units {
        let singletons = members
            .iter()
            .map(|&j| Singleton::absolute(skeleton.joint_name(j)))
            .collect();
        out.push(
            CanonicalSubSkeleton::new(format!("abs({})", unit_name(members)), singletons)
                .expect("unit is non-empty"),
        );
    }
    for central in skeleton.central_joints() {
        for members in &units {
            let singletons: Vec<Singleton> = members
                .iter()
                .map(|&j| skeleton.joint_name(j))
                .filter(|j| j != central)
                .map(|j| Singleton::relative(j, central))
                .collect();
            if singletons.is_empty() {
                continue; // single-joint unit relative to itself
            }
            out.push(
                CanonicalSubSkeleton::new(
                    format!("{central}({})", unit_name(members)),
                    singletons,
                )
                .expect("non-empty relative unit"),
            );
        }
    }
    out
}

/// A grouped feature's polygonal curve for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrajectory {
    pub group: FeatureGroup,
    pub trajectory: Trajectory,
}

/// Maps a (normalized) sequence to one trajectory per template group.
///
/// Per frame, each group concatenates its singletons' 3D coordinates in the
/// group's canonical order: absolute singletons contribute the joint
/// position, relative ones the joint position minus the reference position.
pub fn extract_feature_trajectories(
    seq: &FrameSequence,
    skeleton: &Skeleton,
    template: &FeatureTemplate,
) -> Result<Vec<FeatureTrajectory>> {
    if template.is_empty() {
        return Err(Error::InvalidConfig("empty feature template".into()));
    }
    let mut out = Vec::with_capacity(template.groups.len());
    for group in &template.groups {
        // Resolve joint names once per group.
        let mut pairs = Vec::with_capacity(group.singletons.len());
        for s in &group.singletons {
            let j = skeleton.joint_index(&s.joint)?;
            let r = s
                .reference
                .as_deref()
                .map(|r| skeleton.joint_index(r))
                .transpose()?;
            pairs.push((j, r));
        }
        let dim = 3 * pairs.len();
        let mut coords = Vec::with_capacity(dim * seq.len());
        for frame in &seq.frames {
            for &(j, r) in &pairs {
                let p = frame.positions[j];
                match r {
                    None => coords.extend_from_slice(&p),
                    Some(r) => {
                        let q = frame.positions[r];
                        coords.extend_from_slice(&[p[0] - q[0], p[1] - q[1], p[2] - q[2]]);
                    }
                }
            }
        }
        out.push(FeatureTrajectory {
            group: group.clone(),
            trajectory: Trajectory::from_flat(dim, coords)?,
        });
    }
    Ok(out)
}

/// Concatenates the group trajectories frame-wise into a single trajectory of
/// dimension `Σ 3|f_i|`.
pub fn concat_features(fts: &[FeatureTrajectory]) -> Result<Trajectory> {
    if fts.is_empty() {
        return Err(Error::InvalidConfig("no feature trajectories".into()));
    }
    let n = fts[0].trajectory.len();
    for ft in fts {
        if ft.trajectory.len() != n {
            return Err(Error::InvalidData(format!(
                "feature trajectory length mismatch: {} vs {n}",
                ft.trajectory.len()
            )));
        }
    }
    let dim: usize = fts.iter().map(|f| f.trajectory.dim()).sum();
    let mut coords = Vec::with_capacity(dim * n);
    for i in 0..n {
        for ft in fts {
            coords.extend_from_slice(ft.trajectory.vertex(i));
        }
    }
    Trajectory::from_flat(dim, coords)
}
