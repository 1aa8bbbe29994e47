//! Shared sequence-to-trajectory plumbing.
//!
//! Every classifier and the miner run the same stages: normalize the
//! sequence, extract one trajectory per template group, then simplify. The
//! concatenated single trajectory used by the "-s" classifiers concatenates
//! the unsimplified group trajectories frame-wise and simplifies the result
//! (simplified groups would disagree on length).

use dashmap::DashMap;
use rayon::prelude::*;

use crate::distances::DistanceMeasure;
use crate::error::Result;
use crate::features::{extract_feature_trajectories, concat_features, FeatureGroup, FeatureTemplate};
use crate::model::{FrameSequence, LabeledDataset, Skeleton};
use crate::normalize::{self, NormalizationContext, NormalizationSpec};
use crate::simplify::{simplify, SimplifySpec};
use crate::trajectory::Trajectory;

/// Everything needed to turn a raw sequence into feature trajectories.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub skeleton: Skeleton,
    pub template: FeatureTemplate,
    pub normalization: NormalizationSpec,
    pub context: NormalizationContext,
    pub simplify: SimplifySpec,
}

/// Group trajectories plus the concatenated single trajectory for one
/// sequence.
#[derive(Debug, Clone)]
pub struct SequenceTrajectories {
    pub label: String,
    pub groups: Vec<Trajectory>,
    pub concat: Trajectory,
}

impl Pipeline {
    /// Builds a pipeline whose data-dependent statistics (standard limb
    /// lengths, at-rest pose) come from `train` only.
    pub fn fit(
        skeleton: &Skeleton,
        template: &FeatureTemplate,
        normalization: &NormalizationSpec,
        simplify: SimplifySpec,
        train: &LabeledDataset,
    ) -> Result<Self> {
        let standard_lengths = if normalization.standard_limbs.is_some() {
            Some(normalize::compute_standard_lengths(train)?)
        } else {
            None
        };
        let at_rest_pose = if normalization.at_rest_pad {
            train.at_rest_pose.clone()
        } else {
            None
        };
        Ok(Self {
            skeleton: skeleton.clone(),
            template: template.clone(),
            normalization: normalization.clone(),
            context: NormalizationContext {
                standard_lengths,
                at_rest_pose,
            },
            simplify,
        })
    }

    pub fn group_layout(&self) -> &[FeatureGroup] {
        &self.template.groups
    }

    /// Normalizes and extracts, simplifying per group.
    pub fn group_trajectories(&self, seq: &FrameSequence) -> Result<Vec<Trajectory>> {
        let normalized = normalize::apply(seq, &self.skeleton, &self.normalization, &self.context)?;
        let fts = extract_feature_trajectories(&normalized, &self.skeleton, &self.template)?;
        Ok(fts
            .into_iter()
            .map(|ft| simplify(&ft.trajectory, &self.simplify))
            .collect())
    }

    /// Normalizes, extracts, concatenates frame-wise, then simplifies.
    pub fn concat_trajectory(&self, seq: &FrameSequence) -> Result<Trajectory> {
        let normalized = normalize::apply(seq, &self.skeleton, &self.normalization, &self.context)?;
        let fts = extract_feature_trajectories(&normalized, &self.skeleton, &self.template)?;
        let cat = concat_features(&fts)?;
        Ok(simplify(&cat, &self.simplify))
    }

    /// Both representations in one pass.
    pub fn sequence_trajectories(&self, seq: &FrameSequence) -> Result<SequenceTrajectories> {
        let normalized = normalize::apply(seq, &self.skeleton, &self.normalization, &self.context)?;
        let fts = extract_feature_trajectories(&normalized, &self.skeleton, &self.template)?;
        let cat = concat_features(&fts)?;
        Ok(SequenceTrajectories {
            label: seq.label.clone(),
            groups: fts
                .into_iter()
                .map(|ft| simplify(&ft.trajectory, &self.simplify))
                .collect(),
            concat: simplify(&cat, &self.simplify),
        })
    }

    /// Runs `sequence_trajectories` over a whole set in parallel.
    pub fn process_all(&self, seqs: &[FrameSequence]) -> Result<Vec<SequenceTrajectories>> {
        seqs.par_iter()
            .map(|s| self.sequence_trajectories(s))
            .collect()
    }
}

/// Memoized per-group distance matrices, shared across the miner's candidate
/// evaluations. A group's distances only depend on its singleton content,
/// the normalization, the simplification and the measure, so candidates that
/// leave a group untouched reuse its matrix.
#[derive(Debug, Default)]
pub struct GroupDistanceCache {
    matrices: DashMap<GroupCacheKey, std::sync::Arc<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupCacheKey {
    pub group: FeatureGroup,
    pub norm_index: usize,
    pub rows_tag: u8,
}

impl GroupDistanceCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Row-major |rows| x |cols| matrix of `measure` distances between the
    /// given per-sequence group trajectories.
    pub fn matrix(
        &self,
        key: GroupCacheKey,
        rows: &[&Trajectory],
        cols: &[&Trajectory],
        measure: &DistanceMeasure,
    ) -> Result<std::sync::Arc<Vec<f64>>> {
        if let Some(hit) = self.matrices.get(&key) {
            return Ok(hit.clone());
        }
        let mut values = vec![0.0f64; rows.len() * cols.len()];
        values
            .par_chunks_mut(cols.len())
            .zip(rows.par_iter())
            .try_for_each(|(out, r)| -> Result<()> {
                for (j, c) in cols.iter().enumerate() {
                    out[j] = measure.eval(*r, *c)?;
                }
                Ok(())
            })?;
        let arc = std::sync::Arc::new(values);
        self.matrices.insert(key, arc.clone());
        Ok(arc)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}
