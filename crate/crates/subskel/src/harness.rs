//! End-to-end experiment harness: split → (optional mine) → train →
//! classify, with CSV and text reports.
//!
//! Reports are deterministic for fixed seeds except the latency block, whose
//! lines all carry the `latency_` prefix so byte-level comparisons can strip
//! them.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{train, Classifier, ClassifierSpec, Prediction, TrainedModel};
use crate::error::{Error, Result};
use crate::features::FeatureTemplate;
use crate::mining::{mine, MiningConfig, MiningResult};
use crate::model::{split_train_test, LabeledDataset, SplitSpec};
use crate::normalize::NormalizationSpec;

/// What `evaluate` should run.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub split: SplitSpec,
    pub seed: u64,
    pub classifier: ClassifierSpec,
    /// Mine a template on the training split.
    pub mine: Option<MineOptions>,
    /// Fixed template when not mining.
    pub template: Option<FeatureTemplate>,
    /// Normalization when not mining (the miner picks its own).
    pub normalization: NormalizationSpec,
    pub simplify_eps: f64,
}

#[derive(Debug, Clone)]
pub struct MineOptions {
    pub candidates: Vec<crate::features::CanonicalSubSkeleton>,
    pub normalizations: Vec<NormalizationSpec>,
    pub max_template_size: Option<usize>,
}

/// Wall-clock per-query latency statistics. Not deterministic.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
}

impl LatencyStats {
    fn from_durations(mut ms: Vec<f64>) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |p: f64| ms[((ms.len() - 1) as f64 * p).round() as usize];
        Self {
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            p50_ms: pct(0.50),
            p95_ms: pct(0.95),
            p99_ms: pct(0.99),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub classifier: String,
    pub normalization: String,
    pub template: String,
    pub train_size: usize,
    pub test_size: usize,
    pub classes: usize,
    /// Set when the split produced an empty test set and the training set
    /// was evaluated instead.
    pub evaluated_on_train: bool,
    pub overall_accuracy: f64,
    /// (label, correct, total) per class, sorted by label.
    pub per_class: Vec<(String, usize, usize)>,
    pub mean_distance_computations: f64,
    pub latency: LatencyStats,
    pub mining_trace: Option<Vec<(String, f64)>>,
}

impl EvalReport {
    /// Key,value CSV; latency rows are prefixed `latency_`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push(',');
            out.push_str(&v);
            out.push('\n');
        };
        push("seed", self.seed.to_string());
        push("classifier", self.classifier.clone());
        push("normalization", self.normalization.clone());
        push("template", format!("\"{}\"", self.template));
        push("train_size", self.train_size.to_string());
        push("test_size", self.test_size.to_string());
        push("classes", self.classes.to_string());
        push("evaluated_on_train", self.evaluated_on_train.to_string());
        push("overall_accuracy", format!("{:.6}", self.overall_accuracy));
        push(
            "mean_distance_computations",
            format!("{:.3}", self.mean_distance_computations),
        );
        if let Some(trace) = &self.mining_trace {
            for (i, (name, acc)) in trace.iter().enumerate() {
                push(&format!("mining_step_{i}"), format!("\"{name}\",{acc:.6}"));
            }
        }
        for (label, correct, total) in &self.per_class {
            push(
                &format!("class_{label}"),
                format!("{correct},{total},{:.6}", *correct as f64 / *total as f64),
            );
        }
        push("latency_mean_ms", format!("{:.3}", self.latency.mean_ms));
        push("latency_p50_ms", format!("{:.3}", self.latency.p50_ms));
        push("latency_p95_ms", format!("{:.3}", self.latency.p95_ms));
        push("latency_p99_ms", format!("{:.3}", self.latency.p99_ms));
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "classifier {}  normalization {}  seed {}\n",
            self.classifier, self.normalization, self.seed
        ));
        out.push_str(&format!("template: {}\n", self.template));
        out.push_str(&format!(
            "train {} / test {} ({} classes){}\n",
            self.train_size,
            self.test_size,
            self.classes,
            if self.evaluated_on_train {
                "  [test empty; evaluated on train]"
            } else {
                ""
            }
        ));
        if let Some(trace) = &self.mining_trace {
            out.push_str("mining trace:\n");
            for (name, acc) in trace {
                out.push_str(&format!("  + {name}  inner accuracy {acc:.4}\n"));
            }
        }
        out.push_str(&format!(
            "accuracy {:.4}  mean distance computations/query {:.1}\n",
            self.overall_accuracy, self.mean_distance_computations
        ));
        out.push_str(&format!(
            "latency ms (non-deterministic): mean {:.2}  p50 {:.2}  p95 {:.2}  p99 {:.2}\n",
            self.latency.mean_ms, self.latency.p50_ms, self.latency.p95_ms, self.latency.p99_ms
        ));
        out.push_str("per-class accuracy:\n");
        for (label, correct, total) in &self.per_class {
            out.push_str(&format!(
                "  {label}: {correct}/{total} = {:.4}\n",
                *correct as f64 / *total as f64
            ));
        }
        out
    }

    /// The CSV with latency rows removed, for determinism comparisons.
    pub fn deterministic_csv(&self) -> String {
        self.to_csv()
            .lines()
            .filter(|l| !l.starts_with("latency_"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Splits, optionally mines, trains, classifies the test split, and reports.
/// Returns the report together with the trained model.
pub fn evaluate(
    dataset: &LabeledDataset,
    cfg: &EvalConfig,
) -> Result<(EvalReport, TrainedModel, Option<MiningResult>)> {
    let (train_set, test_set) = split_train_test(dataset, &cfg.split, cfg.seed)?;
    if train_set.is_empty() {
        return Err(Error::InvalidData("empty training split".into()));
    }
    let evaluated_on_train = test_set.is_empty();
    let eval_set = if evaluated_on_train {
        train_set.clone()
    } else {
        test_set
    };

    let (template, normalization, mining_result) = match &cfg.mine {
        Some(options) => {
            let mining_cfg = MiningConfig {
                candidates: options.candidates.clone(),
                classifier: cfg.classifier.clone(),
                normalizations: options.normalizations.clone(),
                split_seed: cfg.seed,
                max_template_size: options.max_template_size,
                simplify_eps: cfg.simplify_eps,
                inner_split: Default::default(),
            };
            let result = mine(&train_set, &mining_cfg)?;
            (
                result.template.clone(),
                result.normalization.clone(),
                Some(result),
            )
        }
        None => {
            let template = cfg.template.clone().ok_or_else(|| {
                Error::InvalidConfig("evaluate needs a template or mining enabled".into())
            })?;
            (template, cfg.normalization.clone(), None)
        }
    };

    let model = train(
        &cfg.classifier,
        &template,
        &normalization,
        cfg.simplify_eps,
        &train_set,
        cfg.seed,
    )?;
    let classifier = Classifier::new(model)?;

    let outcomes: Vec<(bool, String, usize, f64)> = eval_set
        .sequences
        .par_iter()
        .map(|seq| -> Result<(bool, String, usize, f64)> {
            let start = Instant::now();
            let prediction = classifier.classify(seq)?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            Ok((
                prediction.label == seq.label,
                seq.label.clone(),
                prediction.distance_computations,
                elapsed,
            ))
        })
        .collect::<Result<_>>()?;

    let mut per_class: Vec<(String, usize, usize)> = Vec::new();
    let mut correct_total = 0usize;
    for (correct, label, _, _) in &outcomes {
        if *correct {
            correct_total += 1;
        }
        match per_class.iter_mut().find(|(l, _, _)| l == label) {
            Some((_, c, t)) => {
                *t += 1;
                if *correct {
                    *c += 1;
                }
            }
            None => per_class.push((label.clone(), usize::from(*correct), 1)),
        }
    }
    per_class.sort_by(|a, b| a.0.cmp(&b.0));

    let model = classifier.into_model();
    let report = EvalReport {
        seed: cfg.seed,
        classifier: cfg.classifier.describe(),
        normalization: normalization.describe(),
        template: template.to_string(),
        train_size: train_set.len(),
        test_size: eval_set.len(),
        classes: train_set.labels().len(),
        evaluated_on_train,
        overall_accuracy: correct_total as f64 / eval_set.len() as f64,
        per_class,
        mean_distance_computations: outcomes.iter().map(|o| o.2 as f64).sum::<f64>()
            / eval_set.len() as f64,
        latency: LatencyStats::from_durations(outcomes.iter().map(|o| o.3).collect()),
        mining_trace: mining_result.as_ref().map(|r| {
            r.trace
                .iter()
                .map(|s| (s.candidate.to_string(), s.accuracy))
                .collect()
        }),
    };
    Ok((report, model, mining_result))
}

/// Classifies every sequence of `queries` with a prepared classifier.
pub fn classify_all(
    classifier: &Classifier,
    queries: &[crate::model::FrameSequence],
) -> Result<Vec<Prediction>> {
    queries.par_iter().map(|q| classifier.classify(q)).collect()
}

/// On-disk bundle: the trained model plus the mining provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: TrainedModel,
    #[serde(default)]
    pub mining: Option<MiningResult>,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut writer, self)?;
        use std::io::Write;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let bundle: ModelFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        bundle.model.template.validate()?;
        Ok(bundle)
    }
}
