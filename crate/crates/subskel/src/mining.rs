//! Greedy feature-template mining.
//!
//! The search starts from the empty template and repeatedly tries the adapted
//! union of every unchosen canonical sub-skeleton, accepting the candidate
//! whose template scores the best inner accuracy, as long as that strictly
//! improves on the previous round. The inner accuracy comes from a 1:2
//! stratified split of the training set: the classifier trains on the small
//! third and is scored on the remaining two thirds, with all data-dependent
//! statistics computed from the small third only.
//!
//! When several normalization settings are listed, the whole greedy run
//! executes per setting and the best final accuracy wins (ties prefer fewer
//! chosen sets, then earlier list position).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    knn_weighted_vote, majority_vote, BackendModel, ClassifierKind, ClassifierSpec, DmBackendKind,
    LinearOvr, NearestCentroid,
};
use crate::error::{Error, Result};
use crate::features::{CanonicalSubSkeleton, FeatureTemplate};
use crate::model::{LabeledDataset, SplitSpec};
use crate::normalize::NormalizationSpec;
use crate::pipeline::{GroupCacheKey, GroupDistanceCache, Pipeline, SequenceTrajectories};
use crate::simplify::SimplifySpec;

/// Orientation of the inner 1:2 split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSplit {
    /// Train on one third, evaluate on two thirds.
    #[default]
    TrainOneEvalTwo,
    /// Train on two thirds, evaluate on one third.
    TrainTwoEvalOne,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningConfig {
    pub candidates: Vec<CanonicalSubSkeleton>,
    pub classifier: ClassifierSpec,
    /// Normalization settings to sweep; empty means "no normalization".
    #[serde(default)]
    pub normalizations: Vec<NormalizationSpec>,
    pub split_seed: u64,
    /// Cap on the number of chosen canonical sets; `None` means unlimited.
    #[serde(default)]
    pub max_template_size: Option<usize>,
    #[serde(default)]
    pub simplify_eps: f64,
    #[serde(default)]
    pub inner_split: InnerSplit,
}

/// One accepted greedy step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub candidate: CanonicalSubSkeleton,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningResult {
    pub template: FeatureTemplate,
    pub normalization: NormalizationSpec,
    pub classifier: ClassifierSpec,
    /// Accepted candidates in order; accuracies strictly increase.
    pub trace: Vec<TraceStep>,
}

impl MiningResult {
    pub fn final_accuracy(&self) -> f64 {
        self.trace.last().map(|s| s.accuracy).unwrap_or(0.0)
    }
}

/// Runs the greedy search over `cfg.candidates`.
pub fn mine(train: &LabeledDataset, cfg: &MiningConfig) -> Result<MiningResult> {
    if cfg.candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate canonical sets".into()));
    }
    cfg.classifier.validate()?;
    let labels = train.labels();
    if labels.len() < 2 {
        return Err(Error::InvalidData(
            "mining needs at least two classes".into(),
        ));
    }
    for label in &labels {
        let n = train.sequences.iter().filter(|s| &s.label == label).count();
        if n < 2 {
            return Err(Error::ClassTooSmall {
                label: label.clone(),
                available: n,
                requested: 2,
            });
        }
    }

    let fraction = match cfg.inner_split {
        InnerSplit::TrainOneEvalTwo => 1.0 / 3.0,
        InnerSplit::TrainTwoEvalOne => 2.0 / 3.0,
    };
    let (inner_train, inner_eval) = crate::model::split_train_test(
        train,
        &SplitSpec::FractionPerClass { fraction },
        cfg.split_seed,
    )?;
    for label in &labels {
        if !inner_train.sequences.iter().any(|s| &s.label == label) {
            return Err(Error::ClassMissingFromInnerSplit(label.clone()));
        }
    }

    let normalizations: Vec<NormalizationSpec> = if cfg.normalizations.is_empty() {
        vec![NormalizationSpec::none()]
    } else {
        cfg.normalizations.clone()
    };

    let mut best: Option<MiningResult> = None;
    for (norm_index, normalization) in normalizations.iter().enumerate() {
        let result = greedy_run(
            &inner_train,
            &inner_eval,
            cfg,
            normalization,
            norm_index,
        )?;
        let better = match &best {
            None => true,
            Some(b) => {
                let (ba, bn) = (b.final_accuracy(), b.template.chosen.len());
                let (ra, rn) = (result.final_accuracy(), result.template.chosen.len());
                ra > ba || (ra == ba && rn < bn)
            }
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one normalization candidate"))
}

fn greedy_run(
    inner_train: &LabeledDataset,
    inner_eval: &LabeledDataset,
    cfg: &MiningConfig,
    normalization: &NormalizationSpec,
    norm_index: usize,
) -> Result<MiningResult> {
    let cache = GroupDistanceCache::new();
    let mut template = FeatureTemplate::empty();
    let mut trace: Vec<TraceStep> = Vec::new();
    let mut chosen = vec![false; cfg.candidates.len()];
    let mut best_accuracy = 0.0f64;
    let cap = cfg.max_template_size.unwrap_or(usize::MAX);

    while template.chosen.len() < cap {
        let scored: Vec<(usize, f64)> = cfg
            .candidates
            .par_iter()
            .enumerate()
            .filter(|(i, _)| !chosen[*i])
            .map(|(i, c)| -> Result<(usize, f64)> {
                let candidate_template = template.adapted_union(c);
                let accuracy = evaluate_template(
                    &candidate_template,
                    inner_train,
                    inner_eval,
                    cfg,
                    normalization,
                    norm_index,
                    &cache,
                )?;
                Ok((i, accuracy))
            })
            .collect::<Result<_>>()?;
        if scored.is_empty() {
            break;
        }
        // Best accuracy; ties break to the lower candidate index.
        let mut winner = scored[0];
        for &(i, acc) in &scored[1..] {
            if acc > winner.1 || (acc == winner.1 && i < winner.0) {
                winner = (i, acc);
            }
        }
        if winner.1 <= best_accuracy {
            break; // no strict improvement
        }
        chosen[winner.0] = true;
        template = template.adapted_union(&cfg.candidates[winner.0]);
        best_accuracy = winner.1;
        trace.push(TraceStep {
            candidate: cfg.candidates[winner.0].clone(),
            accuracy: winner.1,
        });
    }

    if trace.is_empty() {
        return Err(Error::InvalidData(
            "greedy mining accepted no candidate (inner accuracy stayed at zero)".into(),
        ));
    }
    Ok(MiningResult {
        template,
        normalization: normalization.clone(),
        classifier: cfg.classifier.clone(),
        trace,
    })
}

/// Inner accuracy of a fixed template: the configured classifier trains on
/// `inner_train` and is scored on `inner_eval`. All pipeline statistics come
/// from `inner_train` only.
pub fn inner_accuracy(
    template: &FeatureTemplate,
    inner_train: &LabeledDataset,
    inner_eval: &LabeledDataset,
    classifier: &ClassifierSpec,
    normalization: &NormalizationSpec,
    simplify_eps: f64,
) -> Result<f64> {
    let cfg = MiningConfig {
        candidates: vec![],
        classifier: classifier.clone(),
        normalizations: vec![],
        split_seed: 0,
        max_template_size: None,
        simplify_eps,
        inner_split: InnerSplit::default(),
    };
    let cache = GroupDistanceCache::new();
    evaluate_template(template, inner_train, inner_eval, &cfg, normalization, 0, &cache)
}

fn evaluate_template(
    template: &FeatureTemplate,
    inner_train: &LabeledDataset,
    inner_eval: &LabeledDataset,
    cfg: &MiningConfig,
    normalization: &NormalizationSpec,
    norm_index: usize,
    cache: &GroupDistanceCache,
) -> Result<f64> {
    if template.is_empty() {
        return Err(Error::InvalidConfig("cannot evaluate an empty template".into()));
    }
    let pipeline = Pipeline::fit(
        &inner_train.skeleton,
        template,
        normalization,
        SimplifySpec::new(cfg.simplify_eps),
        inner_train,
    )?;
    let train_t = pipeline.process_all(&inner_train.sequences)?;
    let eval_t = pipeline.process_all(&inner_eval.sequences)?;
    let measure = &cfg.classifier.measure;
    let k = cfg.classifier.k;

    let correct = match cfg.classifier.kind {
        ClassifierKind::KnnS => {
            if k > train_t.len() {
                return Err(Error::InvalidConfig(format!(
                    "k = {k} exceeds inner training size {}",
                    train_t.len()
                )));
            }
            let rows: Vec<&crate::trajectory::Trajectory> =
                eval_t.iter().map(|t| &t.concat).collect();
            let cols: Vec<&crate::trajectory::Trajectory> =
                train_t.iter().map(|t| &t.concat).collect();
            let matrix = pairwise(&rows, &cols, measure)?;
            score_knn_single(&matrix, &train_t, &eval_t, k)?
        }
        ClassifierKind::KnnM => {
            if k > train_t.len() {
                return Err(Error::InvalidConfig(format!(
                    "k = {k} exceeds inner training size {}",
                    train_t.len()
                )));
            }
            let matrices = group_matrices(template, &train_t, &eval_t, measure, norm_index, cache)?;
            score_knn_multi(
                &matrices,
                &train_t,
                &eval_t,
                k,
                cfg.classifier.knn_m_global_dbar,
            )?
        }
        ClassifierKind::DmS => {
            let rows: Vec<&crate::trajectory::Trajectory> =
                eval_t.iter().map(|t| &t.concat).collect();
            let cols: Vec<&crate::trajectory::Trajectory> =
                train_t.iter().map(|t| &t.concat).collect();
            let train_rows: Vec<&crate::trajectory::Trajectory> =
                train_t.iter().map(|t| &t.concat).collect();
            let train_matrix = pairwise(&train_rows, &cols, measure)?;
            let eval_matrix = pairwise(&rows, &cols, measure)?;
            score_dm(&train_matrix, &eval_matrix, &train_t, &eval_t, cfg)?
        }
        ClassifierKind::DmM => {
            let eval_groups = group_matrices(template, &train_t, &eval_t, measure, norm_index, cache)?;
            let train_groups =
                group_matrices_train(template, &train_t, measure, norm_index, cache)?;
            let stack = |mats: &[std::sync::Arc<Vec<f64>>], rows: usize, cols: usize| {
                let mut out = vec![0.0f64; rows * mats.len() * cols];
                for (g, m) in mats.iter().enumerate() {
                    for r in 0..rows {
                        let dst = r * mats.len() * cols + g * cols;
                        out[dst..dst + cols].copy_from_slice(&m[r * cols..(r + 1) * cols]);
                    }
                }
                out
            };
            let train_matrix = stack(&train_groups, train_t.len(), train_t.len());
            let eval_matrix = stack(&eval_groups, eval_t.len(), train_t.len());
            score_dm(&train_matrix, &eval_matrix, &train_t, &eval_t, cfg)?
        }
    };
    Ok(correct as f64 / eval_t.len().max(1) as f64)
}

fn pairwise(
    rows: &[&crate::trajectory::Trajectory],
    cols: &[&crate::trajectory::Trajectory],
    measure: &crate::distances::DistanceMeasure,
) -> Result<Vec<f64>> {
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
    Ok(values)
}

fn group_matrices(
    template: &FeatureTemplate,
    train_t: &[SequenceTrajectories],
    eval_t: &[SequenceTrajectories],
    measure: &crate::distances::DistanceMeasure,
    norm_index: usize,
    cache: &GroupDistanceCache,
) -> Result<Vec<std::sync::Arc<Vec<f64>>>> {
    template
        .groups
        .iter()
        .enumerate()
        .map(|(g, group)| {
            let rows: Vec<&crate::trajectory::Trajectory> =
                eval_t.iter().map(|t| &t.groups[g]).collect();
            let cols: Vec<&crate::trajectory::Trajectory> =
                train_t.iter().map(|t| &t.groups[g]).collect();
            cache.matrix(
                GroupCacheKey {
                    group: group.clone(),
                    norm_index,
                    rows_tag: 0,
                },
                &rows,
                &cols,
                measure,
            )
        })
        .collect()
}

fn group_matrices_train(
    template: &FeatureTemplate,
    train_t: &[SequenceTrajectories],
    measure: &crate::distances::DistanceMeasure,
    norm_index: usize,
    cache: &GroupDistanceCache,
) -> Result<Vec<std::sync::Arc<Vec<f64>>>> {
    template
        .groups
        .iter()
        .enumerate()
        .map(|(g, group)| {
            let cols: Vec<&crate::trajectory::Trajectory> =
                train_t.iter().map(|t| &t.groups[g]).collect();
            cache.matrix(
                GroupCacheKey {
                    group: group.clone(),
                    norm_index,
                    rows_tag: 1,
                },
                &cols,
                &cols,
                measure,
            )
        })
        .collect()
}

fn knn_of_row(row: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<(f64, usize)> = row.iter().copied().zip(0..).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    order.truncate(k);
    order.into_iter().map(|(d, i)| (i, d)).collect()
}

fn score_knn_single(
    matrix: &[f64],
    train_t: &[SequenceTrajectories],
    eval_t: &[SequenceTrajectories],
    k: usize,
) -> Result<usize> {
    let cols = train_t.len();
    let mut correct = 0usize;
    for (r, eval) in eval_t.iter().enumerate() {
        let row = &matrix[r * cols..(r + 1) * cols];
        let neighbors: Vec<(String, f64)> = knn_of_row(row, k)
            .into_iter()
            .map(|(i, d)| (train_t[i].label.clone(), d))
            .collect();
        let (label, _) = knn_weighted_vote(&neighbors, k)?;
        if label == eval.label {
            correct += 1;
        }
    }
    Ok(correct)
}

fn score_knn_multi(
    matrices: &[std::sync::Arc<Vec<f64>>],
    train_t: &[SequenceTrajectories],
    eval_t: &[SequenceTrajectories],
    k: usize,
    global_dbar: bool,
) -> Result<usize> {
    let cols = train_t.len();
    let mut correct = 0usize;
    for (r, eval) in eval_t.iter().enumerate() {
        let per_group: Vec<Vec<(String, f64)>> = matrices
            .iter()
            .map(|m| {
                knn_of_row(&m[r * cols..(r + 1) * cols], k)
                    .into_iter()
                    .map(|(i, d)| (train_t[i].label.clone(), d))
                    .collect()
            })
            .collect();
        let dbar = if global_dbar {
            Some(
                per_group
                    .iter()
                    .flatten()
                    .map(|(_, d)| *d)
                    .fold(f64::INFINITY, f64::min),
            )
        } else {
            None
        };
        let mut winners = Vec::with_capacity(per_group.len());
        let mut weight_maps = Vec::with_capacity(per_group.len());
        for neighbors in &per_group {
            let (winner, weights) = crate::classify::weighted_vote_with_dbar(neighbors, k, dbar)?;
            winners.push(winner);
            weight_maps.push(weights);
        }
        if majority_vote(&winners, &weight_maps) == eval.label {
            correct += 1;
        }
    }
    Ok(correct)
}

fn score_dm(
    train_matrix: &[f64],
    eval_matrix: &[f64],
    train_t: &[SequenceTrajectories],
    eval_t: &[SequenceTrajectories],
    cfg: &MiningConfig,
) -> Result<usize> {
    let cols = train_matrix.len() / train_t.len();
    let rows: Vec<Vec<f64>> = (0..train_t.len())
        .map(|i| train_matrix[i * cols..(i + 1) * cols].to_vec())
        .collect();
    let labels: Vec<String> = train_t.iter().map(|t| t.label.clone()).collect();
    let backend = match cfg.classifier.backend {
        DmBackendKind::LinearOvr => BackendModel::Linear(LinearOvr::fit(&rows, &labels)?),
        DmBackendKind::NearestCentroid => {
            BackendModel::Centroid(NearestCentroid::fit(&rows, &labels)?)
        }
    };
    let mut correct = 0usize;
    for (r, eval) in eval_t.iter().enumerate() {
        let row = &eval_matrix[r * cols..(r + 1) * cols];
        if backend.predict(row) == eval.label {
            correct += 1;
        }
    }
    Ok(correct)
}
