//! The four trajectory-distance classifiers.
//!
//! kNN-s votes over the k nearest concatenated feature trajectories; kNN-m
//! votes per grouped feature and takes a majority; DM-s and DM-m learn a
//! multiclass back-end on rows of distances to training columns (single
//! concatenated or per-feature). All of them only ever look at geometric
//! distance values, which is what keeps the predictions interpretable:
//! the evidence for every answer is a list of neighbors or a distance row.

mod backend;
mod vote;

pub use backend::{BackendModel, LinearOvr, NearestCentroid};
pub use vote::{knn_weighted_vote, majority_vote};
pub(crate) use vote::weighted_vote_with_dbar;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distances::DistanceMeasure;
use crate::error::{Error, Result};
use crate::features::FeatureTemplate;
use crate::index::{linear_scan_knn, MetricIndex, QueryStats};
use crate::model::{Frame, FrameSequence, LabeledDataset, Skeleton};
use crate::normalize::{EdgeLengths, NormalizationSpec};
use crate::pipeline::Pipeline;
use crate::simplify::SimplifySpec;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    KnnS,
    KnnM,
    DmS,
    DmM,
}

impl ClassifierKind {
    pub fn is_dm(self) -> bool {
        matches!(self, ClassifierKind::DmS | ClassifierKind::DmM)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DmBackendKind {
    #[default]
    LinearOvr,
    NearestCentroid,
}

/// Which training sequences become distance-matrix feature columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DmColumns {
    #[default]
    All,
    /// Randomly keep this many training sequences per class (model seed).
    PerClass(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Neighbor count for the kNN kinds.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub backend: DmBackendKind,
    #[serde(default)]
    pub dm_columns: DmColumns,
    pub measure: DistanceMeasure,
    /// Use the global minimum distance across features as d̄ in kNN-m
    /// instead of each feature's own minimum.
    #[serde(default)]
    pub knn_m_global_dbar: bool,
}

fn default_k() -> usize {
    1
}

impl ClassifierSpec {
    pub fn knn_s(k: usize, measure: DistanceMeasure) -> Self {
        Self {
            kind: ClassifierKind::KnnS,
            k,
            backend: DmBackendKind::default(),
            dm_columns: DmColumns::All,
            measure,
            knn_m_global_dbar: false,
        }
    }

    pub fn knn_m(k: usize, measure: DistanceMeasure) -> Self {
        Self {
            kind: ClassifierKind::KnnM,
            ..Self::knn_s(k, measure)
        }
    }

    pub fn dm(kind: ClassifierKind, backend: DmBackendKind, measure: DistanceMeasure) -> Self {
        Self {
            kind,
            backend,
            ..Self::knn_s(1, measure)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if let DmColumns::PerClass(n) = self.dm_columns {
            if n == 0 {
                return Err(Error::InvalidConfig(
                    "per-class column count must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self.kind {
            ClassifierKind::KnnS => format!("{}nn-s({})", self.k, self.measure.kind),
            ClassifierKind::KnnM => format!("{}nn-m({})", self.k, self.measure.kind),
            ClassifierKind::DmS => format!("dm-s({})", self.measure.kind),
            ClassifierKind::DmM => format!("dm-m({})", self.measure.kind),
        }
    }
}

/// One training sequence's processed trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEntry {
    pub id: usize,
    pub label: String,
    pub groups: Vec<Trajectory>,
    pub concat: Trajectory,
}

/// Fitted distance-matrix state: the chosen columns and the back-end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmModel {
    /// Training ids serving as feature columns, ascending.
    pub column_train_ids: Vec<usize>,
    pub backend: BackendModel,
}

/// A self-contained trained classifier: spec, template, normalization
/// statistics and the processed training trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub template: FeatureTemplate,
    pub normalization: NormalizationSpec,
    pub standard_lengths: Option<EdgeLengths>,
    pub at_rest_pose: Option<Frame>,
    pub simplify_eps: f64,
    pub skeleton: Skeleton,
    pub seed: u64,
    pub train: Vec<TrainEntry>,
    pub dm: Option<DmModel>,
}

/// Rectangular array of trajectory distances: rows are query sequences,
/// columns are (training sequence, group) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub row_labels: Vec<String>,
    pub columns: Vec<DmColumnId>,
    /// Row-major values, `rows.len() * columns.len()` entries.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmColumnId {
    pub train_id: usize,
    /// Group index for the multi mode; `None` for the concatenated single.
    pub group: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmMode {
    Single,
    Multi,
}

impl DistanceMatrix {
    pub fn rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols()..(i + 1) * self.cols()]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols() + j]
    }
}

/// Per-neighbor evidence entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub train_id: usize,
    pub label: String,
    pub distance: f64,
}

/// One grouped feature's neighbor table and vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupVote {
    pub group: String,
    pub neighbors: Vec<Neighbor>,
    pub weights: Vec<(String, f64)>,
    pub winner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Evidence {
    Knn {
        neighbors: Vec<Neighbor>,
        weights: Vec<(String, f64)>,
    },
    KnnMulti {
        groups: Vec<GroupVote>,
    },
    DistanceRow {
        columns: Vec<DmColumnId>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub evidence: Evidence,
    pub distance_computations: usize,
}

/// Samples the distance-matrix feature columns: all training ids, or a
/// seeded uniform draw of `n` per class.
fn select_dm_columns(train: &[TrainEntry], columns: DmColumns, seed: u64) -> Vec<usize> {
    match columns {
        DmColumns::All => train.iter().map(|e| e.id).collect(),
        DmColumns::PerClass(n) => {
            let mut classes: Vec<&str> = train.iter().map(|e| e.label.as_str()).collect();
            classes.sort();
            classes.dedup();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::new();
            for class in classes {
                let members: Vec<usize> = train
                    .iter()
                    .filter(|e| e.label == class)
                    .map(|e| e.id)
                    .collect();
                let take = n.min(members.len());
                let picked = rand::seq::index::sample(&mut rng, members.len(), take);
                out.extend(picked.iter().map(|i| members[i]));
            }
            out.sort_unstable();
            out
        }
    }
}

/// Trains a model: runs the pipeline over the training set and, for the DM
/// kinds, builds the training distance matrix and fits the back-end.
pub fn train(
    spec: &ClassifierSpec,
    template: &FeatureTemplate,
    normalization: &NormalizationSpec,
    simplify_eps: f64,
    train_set: &LabeledDataset,
    seed: u64,
) -> Result<TrainedModel> {
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if !spec.kind.is_dm() && spec.k > train_set.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {} exceeds the {} training sequences",
            spec.k,
            train_set.len()
        )));
    }
    let pipeline = Pipeline::fit(
        &train_set.skeleton,
        template,
        normalization,
        SimplifySpec::new(simplify_eps),
        train_set,
    )?;
    let processed = pipeline.process_all(&train_set.sequences)?;
    let train: Vec<TrainEntry> = processed
        .into_iter()
        .enumerate()
        .map(|(id, t)| TrainEntry {
            id,
            label: t.label,
            groups: t.groups,
            concat: t.concat,
        })
        .collect();

    let mut model = TrainedModel {
        spec: spec.clone(),
        template: template.clone(),
        normalization: normalization.clone(),
        standard_lengths: pipeline.context.standard_lengths.clone(),
        at_rest_pose: pipeline.context.at_rest_pose.clone(),
        simplify_eps,
        skeleton: train_set.skeleton.clone(),
        seed,
        train,
        dm: None,
    };

    if spec.kind.is_dm() {
        let labels = model.train.iter().map(|e| e.label.clone()).collect::<Vec<_>>();
        let column_ids = select_dm_columns(&model.train, spec.dm_columns, seed);
        let mode = if spec.kind == ClassifierKind::DmS {
            DmMode::Single
        } else {
            DmMode::Multi
        };
        let matrix = training_matrix(&model, &column_ids, mode)?;
        let rows: Vec<Vec<f64>> = (0..matrix.rows()).map(|i| matrix.row(i).to_vec()).collect();
        let backend = match spec.backend {
            DmBackendKind::LinearOvr => BackendModel::Linear(LinearOvr::fit(&rows, &labels)?),
            DmBackendKind::NearestCentroid => {
                BackendModel::Centroid(NearestCentroid::fit(&rows, &labels)?)
            }
        };
        model.dm = Some(DmModel {
            column_train_ids: column_ids,
            backend,
        });
    }
    Ok(model)
}

fn column_layout(model: &TrainedModel, column_ids: &[usize], mode: DmMode) -> Vec<DmColumnId> {
    match mode {
        DmMode::Single => column_ids
            .iter()
            .map(|&train_id| DmColumnId {
                train_id,
                group: None,
            })
            .collect(),
        DmMode::Multi => {
            let groups = model.template.group_count();
            let mut out = Vec::with_capacity(groups * column_ids.len());
            for g in 0..groups {
                for &train_id in column_ids {
                    out.push(DmColumnId {
                        train_id,
                        group: Some(g),
                    });
                }
            }
            out
        }
    }
}

fn distance_row_for(
    model: &TrainedModel,
    columns: &[DmColumnId],
    groups: &[Trajectory],
    concat: &Trajectory,
) -> Result<Vec<f64>> {
    let measure = &model.spec.measure;
    columns
        .iter()
        .map(|col| {
            let entry = &model.train[col.train_id];
            match col.group {
                None => measure.eval(concat, &entry.concat),
                Some(g) => measure.eval(&groups[g], &entry.groups[g]),
            }
        })
        .collect()
}

/// Training matrix: every training sequence as a row against the selected
/// columns.
fn training_matrix(
    model: &TrainedModel,
    column_ids: &[usize],
    mode: DmMode,
) -> Result<DistanceMatrix> {
    let columns = column_layout(model, column_ids, mode);
    let rows: Vec<Vec<f64>> = model
        .train
        .par_iter()
        .map(|e| distance_row_for(model, &columns, &e.groups, &e.concat))
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix {
        row_labels: model.train.iter().map(|e| e.label.clone()).collect(),
        columns,
        values: rows.into_iter().flatten().collect(),
    })
}

/// Distance matrix of arbitrary query rows against the model's columns
/// (heat-map export and the DM classifiers share this path).
pub fn build_distance_matrix(
    model: &TrainedModel,
    rows: &[FrameSequence],
    mode: DmMode,
) -> Result<DistanceMatrix> {
    let pipeline = runtime_pipeline(model);
    let column_ids = match &model.dm {
        Some(dm) => dm.column_train_ids.clone(),
        None => select_dm_columns(&model.train, model.spec.dm_columns, model.seed),
    };
    let columns = column_layout(model, &column_ids, mode);
    let processed = pipeline.process_all(rows)?;
    let values: Vec<Vec<f64>> = processed
        .par_iter()
        .map(|t| distance_row_for(model, &columns, &t.groups, &t.concat))
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix {
        row_labels: rows.iter().map(|s| s.label.clone()).collect(),
        columns,
        values: values.into_iter().flatten().collect(),
    })
}

fn runtime_pipeline(model: &TrainedModel) -> Pipeline {
    Pipeline {
        skeleton: model.skeleton.clone(),
        template: model.template.clone(),
        normalization: model.normalization.clone(),
        context: crate::normalize::NormalizationContext {
            standard_lengths: model.standard_lengths.clone(),
            at_rest_pose: model.at_rest_pose.clone(),
        },
        simplify: SimplifySpec::new(model.simplify_eps),
    }
}

/// A trained model plus the query-time machinery: the pipeline and, for
/// metric measures, k-NN indexes over the training trajectories.
pub struct Classifier {
    model: TrainedModel,
    pipeline: Pipeline,
    concat_index: Option<MetricIndex>,
    group_indexes: Vec<MetricIndex>,
}

impl Classifier {
    /// Prepares a model for queries. Metric measures (CF, DF) get pivot
    /// indexes; DTW falls back to linear scans.
    pub fn new(model: TrainedModel) -> Result<Self> {
        let pipeline = runtime_pipeline(&model);
        let use_index = model.spec.measure.is_metric() && model.train.len() > 2;
        let mut concat_index = None;
        let mut group_indexes = Vec::new();
        match model.spec.kind {
            ClassifierKind::KnnS if use_index => {
                let entries: Vec<(u32, Trajectory)> = model
                    .train
                    .iter()
                    .map(|e| (e.id as u32, e.concat.clone()))
                    .collect();
                let pivots = MetricIndex::<f64>::default_pivots(entries.len());
                concat_index = Some(MetricIndex::build(
                    entries,
                    model.spec.measure,
                    pivots,
                    model.seed,
                )?);
            }
            ClassifierKind::KnnM if use_index => {
                for g in 0..model.template.group_count() {
                    let entries: Vec<(u32, Trajectory)> = model
                        .train
                        .iter()
                        .map(|e| (e.id as u32, e.groups[g].clone()))
                        .collect();
                    let pivots = MetricIndex::<f64>::default_pivots(entries.len());
                    group_indexes.push(MetricIndex::build(
                        entries,
                        model.spec.measure,
                        pivots,
                        model.seed,
                    )?);
                }
            }
            _ => {}
        }
        Ok(Self {
            model,
            pipeline,
            concat_index,
            group_indexes,
        })
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn into_model(self) -> TrainedModel {
        self.model
    }

    pub fn classify(&self, query: &FrameSequence) -> Result<Prediction> {
        match self.model.spec.kind {
            ClassifierKind::KnnS => self.classify_knn_s(query),
            ClassifierKind::KnnM => self.classify_knn_m(query),
            ClassifierKind::DmS | ClassifierKind::DmM => self.classify_dm(query),
        }
    }

    fn knn_concat(&self, query: &Trajectory, k: usize) -> Result<(Vec<(u32, f64)>, QueryStats)> {
        match &self.concat_index {
            Some(index) => index.knn(query, k),
            None => {
                let entries: Vec<(u32, Trajectory)> = self
                    .model
                    .train
                    .iter()
                    .map(|e| (e.id as u32, e.concat.clone()))
                    .collect();
                linear_scan_knn(&entries, &self.model.spec.measure, query, k)
            }
        }
    }

    fn knn_group(
        &self,
        g: usize,
        query: &Trajectory,
        k: usize,
    ) -> Result<(Vec<(u32, f64)>, QueryStats)> {
        match self.group_indexes.get(g) {
            Some(index) => index.knn(query, k),
            None => {
                let entries: Vec<(u32, Trajectory)> = self
                    .model
                    .train
                    .iter()
                    .map(|e| (e.id as u32, e.groups[g].clone()))
                    .collect();
                linear_scan_knn(&entries, &self.model.spec.measure, query, k)
            }
        }
    }

    fn neighbors_of(&self, found: &[(u32, f64)]) -> Vec<Neighbor> {
        found
            .iter()
            .map(|&(id, distance)| Neighbor {
                train_id: id as usize,
                label: self.model.train[id as usize].label.clone(),
                distance,
            })
            .collect()
    }

    fn classify_knn_s(&self, query: &FrameSequence) -> Result<Prediction> {
        let k = self.model.spec.k;
        if k > self.model.train.len() {
            return Err(Error::InvalidConfig(format!(
                "k = {k} exceeds the {} training sequences",
                self.model.train.len()
            )));
        }
        let concat = self.pipeline.concat_trajectory(query)?;
        let (found, stats) = self.knn_concat(&concat, k)?;
        let neighbors = self.neighbors_of(&found);
        let pairs: Vec<(String, f64)> = neighbors
            .iter()
            .map(|n| (n.label.clone(), n.distance))
            .collect();
        let (label, weights) = knn_weighted_vote(&pairs, k)?;
        Ok(Prediction {
            label,
            evidence: Evidence::Knn { neighbors, weights },
            distance_computations: stats.distance_computations,
        })
    }

    fn classify_knn_m(&self, query: &FrameSequence) -> Result<Prediction> {
        let k = self.model.spec.k;
        if k > self.model.train.len() {
            return Err(Error::InvalidConfig(format!(
                "k = {k} exceeds the {} training sequences",
                self.model.train.len()
            )));
        }
        let groups = self.pipeline.group_trajectories(query)?;
        let mut tables: Vec<Vec<Neighbor>> = Vec::with_capacity(groups.len());
        let mut computations = 0usize;
        for (g, traj) in groups.iter().enumerate() {
            let (found, stats) = self.knn_group(g, traj, k)?;
            computations += stats.distance_computations;
            tables.push(self.neighbors_of(&found));
        }
        let global_dbar = if self.model.spec.knn_m_global_dbar {
            Some(
                tables
                    .iter()
                    .flatten()
                    .map(|n| n.distance)
                    .fold(f64::INFINITY, f64::min),
            )
        } else {
            None
        };
        let mut group_votes = Vec::with_capacity(tables.len());
        for (g, neighbors) in tables.into_iter().enumerate() {
            let pairs: Vec<(String, f64)> = neighbors
                .iter()
                .map(|n| (n.label.clone(), n.distance))
                .collect();
            let (winner, weights) = vote::weighted_vote_with_dbar(&pairs, k, global_dbar)?;
            group_votes.push(GroupVote {
                group: self.model.template.groups[g].to_string(),
                neighbors,
                weights,
                winner,
            });
        }
        let winners: Vec<String> = group_votes.iter().map(|g| g.winner.clone()).collect();
        let weight_maps: Vec<Vec<(String, f64)>> =
            group_votes.iter().map(|g| g.weights.clone()).collect();
        let label = majority_vote(&winners, &weight_maps);
        Ok(Prediction {
            label,
            evidence: Evidence::KnnMulti { groups: group_votes },
            distance_computations: computations,
        })
    }

    fn classify_dm(&self, query: &FrameSequence) -> Result<Prediction> {
        let dm = self
            .model
            .dm
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("model has no trained DM back-end".into()))?;
        let mode = if self.model.spec.kind == ClassifierKind::DmS {
            DmMode::Single
        } else {
            DmMode::Multi
        };
        let columns = column_layout(&self.model, &dm.column_train_ids, mode);
        let t = self.pipeline.sequence_trajectories(query)?;
        let values = distance_row_for(&self.model, &columns, &t.groups, &t.concat)?;
        let label = dm.backend.predict(&values);
        Ok(Prediction {
            label,
            distance_computations: values.len(),
            evidence: Evidence::DistanceRow { columns, values },
        })
    }
}
