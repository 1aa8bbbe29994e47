//! Command-line front end for the sub-skeleton trajectory pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subskel::classify::{
    build_distance_matrix, Classifier, ClassifierKind, ClassifierSpec, DmBackendKind, DmColumns,
    DmMode, Evidence,
};
use subskel::distances::{DistanceMeasure, MeasureKind};
use subskel::error::Error;
use subskel::features::{canonical_subskeletons, CanonicalOptions, FeatureTemplate, ReferenceScope};
use subskel::harness::{evaluate, EvalConfig, MineOptions, ModelFile};
use subskel::mining::{mine, MiningConfig};
use subskel::model::{
    read_dataset, read_sequences, write_dataset, write_skeleton_file, LabeledDataset, SplitSpec,
};
use subskel::normalize::NormalizationSpec;
use subskel::segment::{cut_segments, estimate_repetitions, to_signal, SegmentationSpec};
use subskel::synth::{generate, SyntheticSpec};
use subskel::Trajectory;

#[derive(Parser)]
#[command(name = "subskel", version, about = "Sub-skeleton trajectory mining and classification")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Curve simplification tolerance; 0 disables.
    #[arg(long = "simplify-eps", global = true, default_value_t = 0.0)]
    simplify_eps: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Gen {
        /// SyntheticSpec JSON file.
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset (JSONL, one sequence per line).
        #[arg(long)]
        out: PathBuf,
        /// Also write the skeleton sidecar (with the at-rest pose).
        #[arg(long = "skeleton-out")]
        skeleton_out: Option<PathBuf>,
    },
    /// Mine a feature template and train a model.
    Mine {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[command(flatten)]
        mining: MiningArgs,
        /// Output model file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Split, optionally mine, train and score a classifier.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        classifier: ClassifierArgs,
        /// Split protocol: count:N | frac:F | subjects:a,b | kfold:I/K
        #[arg(long)]
        split: String,
        /// Mine the template on the training split.
        #[arg(long, default_value_t = false)]
        mine: bool,
        #[command(flatten)]
        mining: MiningArgs,
        /// Fixed feature template JSON (alternative to --mine).
        #[arg(long)]
        template: Option<PathBuf>,
        /// Normalization spec JSON used with --template.
        #[arg(long)]
        norm: Option<PathBuf>,
        /// Write the report CSV here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Save the trained model.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Classify query sequences with a trained model.
    Classify {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Query sequences (JSONL).
        #[arg(long)]
        data: PathBuf,
        /// Predictions CSV.
        #[arg(long)]
        out: PathBuf,
        /// Add a per-query distance-computation column.
        #[arg(long, default_value_t = false)]
        stats: bool,
    },
    /// Export a distance matrix for heat-map rendering.
    ExportDm {
        #[arg(long)]
        model: PathBuf,
        /// Row sequences (JSONL).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// single = concatenated trajectory, multi = per feature.
        #[arg(long, default_value = "multi")]
        mode: String,
    },
    /// Cut repeated-sign recordings into single repetitions.
    Segment {
        #[command(flatten)]
        data: DataArgs,
        /// Output segments (JSONL).
        #[arg(long)]
        out: PathBuf,
        /// Per-class segment counts CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Moving-average width (odd).
        #[arg(long, default_value_t = 5)]
        smoothing: usize,
        /// Local-minimum search window as a fraction of the period.
        #[arg(long = "window-fraction", default_value_t = 0.5)]
        window_fraction: f64,
    },
    /// Distance between two trajectories stored as JSON arrays.
    Distances {
        /// First trajectory file (JSON array of vertices).
        p: PathBuf,
        /// Second trajectory file.
        q: PathBuf,
        #[arg(long)]
        measure: String,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset (JSONL, one sequence per line).
    #[arg(long)]
    data: PathBuf,
    /// Skeleton sidecar JSON.
    #[arg(long)]
    skeleton: PathBuf,
}

#[derive(Args)]
struct ClassifierArgs {
    /// knn-s | knn-m | dm-s | dm-m, with an optional leading k (e.g. 2nn-m).
    #[arg(long)]
    classifier: Option<String>,
    /// cf | df | dtw
    #[arg(long)]
    measure: Option<String>,
    /// Neighbor count for the kNN classifiers.
    #[arg(long)]
    k: Option<usize>,
    /// DM back-end: linear-ovr | nearest-centroid
    #[arg(long, default_value = "linear-ovr")]
    backend: String,
    /// DM feature columns: all | <count per class>
    #[arg(long = "dm-columns", default_value = "all")]
    dm_columns: String,
}

#[derive(Args)]
struct MiningArgs {
    /// JSON list of NormalizationSpec values to sweep.
    #[arg(long = "norm-sweep")]
    norm_sweep: Option<PathBuf>,
    /// Merge degree-2 chains into one canonical set per chain.
    #[arg(long = "merge-chains", default_value_t = false)]
    merge_chains: bool,
    /// Relative-reference scope: auto | all | central
    #[arg(long = "reference-scope", default_value = "auto")]
    reference_scope: String,
    /// Cap on the number of chosen canonical sets.
    #[arg(long = "max-template")]
    max_template: Option<usize>,
}

/// Exit code 2: bad input data. Exit code 3: bad configuration.
fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if let Some(lib) = err.downcast_ref::<Error>() {
        return match lib {
            Error::InvalidConfig(_) => ExitCode::from(3),
            _ => ExitCode::from(2),
        };
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

impl ClassifierArgs {
    fn resolve(&self) -> anyhow::Result<ClassifierSpec> {
        let raw = self
            .classifier
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("--classifier is required".into()))?;
        let lowered = raw.to_ascii_lowercase();
        let (k_prefix, kind) = parse_classifier_kind(&lowered)?;
        let measure_str = self
            .measure
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("--measure is required".into()))?;
        let measure = DistanceMeasure::new(measure_str.parse::<MeasureKind>()?);
        let backend = match self.backend.as_str() {
            "linear-ovr" => DmBackendKind::LinearOvr,
            "nearest-centroid" => DmBackendKind::NearestCentroid,
            other => {
                return Err(Error::InvalidConfig(format!("unknown backend `{other}`")).into())
            }
        };
        let dm_columns = match self.dm_columns.as_str() {
            "all" => DmColumns::All,
            n => DmColumns::PerClass(n.parse::<usize>().map_err(|_| {
                Error::InvalidConfig(format!("--dm-columns expects `all` or a count, got `{n}`"))
            })?),
        };
        let spec = ClassifierSpec {
            kind,
            k: self.k.or(k_prefix).unwrap_or(1),
            backend,
            dm_columns,
            measure,
            knn_m_global_dbar: false,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_classifier_kind(s: &str) -> anyhow::Result<(Option<usize>, ClassifierKind)> {
    if let Some(rest) = s.strip_suffix("nn-s") {
        Ok((parse_k_prefix(rest)?, ClassifierKind::KnnS))
    } else if let Some(rest) = s.strip_suffix("nn-m") {
        Ok((parse_k_prefix(rest)?, ClassifierKind::KnnM))
    } else {
        match s {
            "dm-s" => Ok((None, ClassifierKind::DmS)),
            "dm-m" => Ok((None, ClassifierKind::DmM)),
            other => Err(Error::InvalidConfig(format!(
                "unknown classifier `{other}` (expected knn-s, knn-m, dm-s or dm-m)"
            ))
            .into()),
        }
    }
}

fn parse_k_prefix(rest: &str) -> anyhow::Result<Option<usize>> {
    match rest {
        "" | "k" => Ok(None),
        digits => Ok(Some(digits.parse::<usize>().map_err(|_| {
            Error::InvalidConfig(format!("bad neighbor count `{digits}`"))
        })?)),
    }
}

fn parse_split(s: &str) -> anyhow::Result<SplitSpec> {
    let bad = || Error::InvalidConfig(format!("bad --split `{s}`"));
    let (head, rest) = s.split_once(':').ok_or_else(bad)?;
    match head {
        "count" => Ok(SplitSpec::FixedCountPerClass {
            count: rest.parse().map_err(|_| bad())?,
        }),
        "frac" => Ok(SplitSpec::FractionPerClass {
            fraction: rest.parse().map_err(|_| bad())?,
        }),
        "subjects" => Ok(SplitSpec::CrossSubject {
            train_subjects: rest.split(',').map(str::to_string).collect(),
        }),
        "kfold" => {
            let (i, k) = rest.split_once('/').ok_or_else(bad)?;
            Ok(SplitSpec::KFold {
                folds: k.parse().map_err(|_| bad())?,
                index: i.parse().map_err(|_| bad())?,
            })
        }
        _ => Err(bad().into()),
    }
}

fn parse_scope(s: &str) -> anyhow::Result<ReferenceScope> {
    match s {
        "auto" => Ok(ReferenceScope::Auto),
        "all" => Ok(ReferenceScope::AllJoints),
        "central" => Ok(ReferenceScope::CentralOnly),
        other => Err(Error::InvalidConfig(format!("unknown reference scope `{other}`")).into()),
    }
}

fn load_norm_sweep(path: Option<&PathBuf>) -> anyhow::Result<Vec<NormalizationSpec>> {
    match path {
        None => Ok(vec![]),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn evidence_summary(evidence: &Evidence) -> String {
    match evidence {
        Evidence::Knn { neighbors, .. } => neighbors
            .iter()
            .map(|n| format!("{}:{:.4}", n.label, n.distance))
            .collect::<Vec<_>>()
            .join(";"),
        Evidence::KnnMulti { groups } => groups
            .iter()
            .map(|g| {
                let inner = g
                    .neighbors
                    .iter()
                    .map(|n| format!("{}:{:.4}", n.label, n.distance))
                    .collect::<Vec<_>>()
                    .join(";");
                format!("{}=[{}]->{}", g.group, inner, g.winner)
            })
            .collect::<Vec<_>>()
            .join(" | "),
        Evidence::DistanceRow { values, .. } => format!("dm-row[{}]", values.len()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen {
            spec,
            out,
            skeleton_out,
        } => {
            let text = std::fs::read_to_string(&spec)?;
            let mut spec: SyntheticSpec = serde_json::from_str(&text)?;
            spec.seed = spec.seed.wrapping_add(cli.seed);
            let data = generate(&spec)?;
            write_dataset(&out, &data)?;
            if let Some(path) = skeleton_out {
                write_skeleton_file(&path, &data.skeleton, data.at_rest_pose.as_ref())?;
            }
            println!(
                "wrote {} sequences over {} classes to {}",
                data.len(),
                data.labels().len(),
                out.display()
            );
            Ok(())
        }

        Command::Mine {
            data,
            classifier,
            mining,
            out,
        } => {
            let dataset = read_dataset(&data.data, &data.skeleton)?;
            let spec = classifier.resolve()?;
            let options = CanonicalOptions {
                merge_chains: mining.merge_chains,
                reference_scope: parse_scope(&mining.reference_scope)?,
            };
            let candidates = canonical_subskeletons(&dataset.skeleton, &options);
            let cfg = MiningConfig {
                candidates,
                classifier: spec.clone(),
                normalizations: load_norm_sweep(mining.norm_sweep.as_ref())?,
                split_seed: cli.seed,
                max_template_size: mining.max_template,
                simplify_eps: cli.simplify_eps,
                inner_split: Default::default(),
            };
            let result = mine(&dataset, &cfg)?;
            println!("mined template: {}", result.template);
            for step in &result.trace {
                println!("  + {}  inner accuracy {:.4}", step.candidate, step.accuracy);
            }
            let model = subskel::classify::train(
                &spec,
                &result.template,
                &result.normalization,
                cli.simplify_eps,
                &dataset,
                cli.seed,
            )?;
            ModelFile {
                model,
                mining: Some(result),
            }
            .save(&out)?;
            println!("model written to {}", out.display());
            Ok(())
        }

        Command::Evaluate {
            data,
            classifier,
            split,
            mine: do_mine,
            mining,
            template,
            norm,
            report,
            model_out,
        } => {
            let dataset = read_dataset(&data.data, &data.skeleton)?;
            let spec = classifier.resolve()?;
            let split = parse_split(&split)?;
            let mine_options = if do_mine {
                let options = CanonicalOptions {
                    merge_chains: mining.merge_chains,
                    reference_scope: parse_scope(&mining.reference_scope)?,
                };
                Some(MineOptions {
                    candidates: canonical_subskeletons(&dataset.skeleton, &options),
                    normalizations: load_norm_sweep(mining.norm_sweep.as_ref())?,
                    max_template_size: mining.max_template,
                })
            } else {
                None
            };
            let template = match template {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    let t: FeatureTemplate = serde_json::from_str(&text)?;
                    t.validate()?;
                    Some(t)
                }
                None if do_mine => None,
                None => Some(default_template(&dataset)),
            };
            let normalization = match norm {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    serde_json::from_str(&text)?
                }
                None => NormalizationSpec::none(),
            };
            let cfg = EvalConfig {
                split,
                seed: cli.seed,
                classifier: spec,
                mine: mine_options,
                template,
                normalization,
                simplify_eps: cli.simplify_eps,
            };
            let (eval_report, model, mining_result) = evaluate(&dataset, &cfg)?;
            print!("{}", eval_report.to_text());
            if let Some(path) = report {
                std::fs::write(&path, eval_report.to_csv())?;
            }
            if let Some(path) = model_out {
                ModelFile {
                    model,
                    mining: mining_result,
                }
                .save(&path)?;
            }
            Ok(())
        }

        Command::Classify {
            model,
            data,
            out,
            stats,
        } => {
            let bundle = ModelFile::load(&model)?;
            let queries = read_queries(&data, &bundle)?;
            let classifier = Classifier::new(bundle.model)?;
            let predictions = subskel::harness::classify_all(&classifier, &queries.sequences)?;
            let mut writer = csv::Writer::from_path(&out)?;
            let mut header = vec!["index", "true_label", "predicted_label", "evidence"];
            if stats {
                header.push("distance_computations");
            }
            writer.write_record(&header)?;
            let mut correct = 0usize;
            for (i, (seq, pred)) in queries.sequences.iter().zip(&predictions).enumerate() {
                if pred.label == seq.label {
                    correct += 1;
                }
                let mut record = vec![
                    i.to_string(),
                    seq.label.clone(),
                    pred.label.clone(),
                    evidence_summary(&pred.evidence),
                ];
                if stats {
                    record.push(pred.distance_computations.to_string());
                }
                writer.write_record(&record)?;
            }
            writer.flush()?;
            println!(
                "classified {} sequences, accuracy {:.4}, predictions in {}",
                queries.sequences.len(),
                correct as f64 / queries.sequences.len().max(1) as f64,
                out.display()
            );
            Ok(())
        }

        Command::ExportDm {
            model,
            data,
            out,
            mode,
        } => {
            let bundle = ModelFile::load(&model)?;
            let rows = read_queries(&data, &bundle)?;
            let mode = match mode.as_str() {
                "single" => DmMode::Single,
                "multi" => DmMode::Multi,
                other => {
                    return Err(Error::InvalidConfig(format!("unknown DM mode `{other}`")).into())
                }
            };
            let matrix = build_distance_matrix(&bundle.model, &rows.sequences, mode)?;
            let mut writer = csv::Writer::from_path(&out)?;
            let mut header = vec!["row_label".to_string()];
            header.extend(matrix.columns.iter().map(|c| match c.group {
                None => format!("t{}", c.train_id),
                Some(g) => format!("t{}_g{g}", c.train_id),
            }));
            writer.write_record(&header)?;
            for i in 0..matrix.rows() {
                let mut record = vec![matrix.row_labels[i].clone()];
                record.extend(matrix.row(i).iter().map(|v| format!("{v:.9}")));
                writer.write_record(&record)?;
            }
            writer.flush()?;
            println!(
                "wrote {}x{} distance matrix to {}",
                matrix.rows(),
                matrix.cols(),
                out.display()
            );
            Ok(())
        }

        Command::Segment {
            data,
            out,
            report,
            smoothing,
            window_fraction,
        } => {
            let dataset = read_dataset(&data.data, &data.skeleton)?;
            let spec = SegmentationSpec {
                smoothing_window: smoothing,
                search_window_fraction: window_fraction,
            };
            spec.validate()?;
            let mut segments = Vec::new();
            let mut counts: Vec<(String, usize, usize)> = Vec::new();
            for seq in &dataset.sequences {
                let signal = to_signal(seq);
                let estimate = estimate_repetitions(&signal, &spec)?;
                let outcome = cut_segments(seq, estimate.count, &spec)?;
                if outcome.uniform_fallback {
                    log::warn!(
                        "recording `{}`: minima search collapsed, used uniform cuts",
                        seq.label
                    );
                }
                match counts.iter_mut().find(|(l, _, _)| l == &seq.label) {
                    Some((_, recs, segs)) => {
                        *recs += 1;
                        *segs += outcome.segments.len();
                    }
                    None => counts.push((seq.label.clone(), 1, outcome.segments.len())),
                }
                segments.extend(outcome.segments);
            }
            counts.sort_by(|a, b| a.0.cmp(&b.0));
            let segmented = dataset.with_sequences(segments);
            write_dataset(&out, &segmented)?;
            if let Some(path) = report {
                let mut writer = csv::Writer::from_path(&path)?;
                writer.write_record(["label", "recordings", "segments"])?;
                for (label, recs, segs) in &counts {
                    writer.write_record([label.as_str(), &recs.to_string(), &segs.to_string()])?;
                }
                writer.flush()?;
            }
            println!(
                "cut {} recordings into {} segments ({})",
                dataset.len(),
                segmented.len(),
                out.display()
            );
            Ok(())
        }

        Command::Distances { p, q, measure } => {
            let load = |path: &PathBuf| -> anyhow::Result<Trajectory> {
                let text = std::fs::read_to_string(path)?;
                Ok(serde_json::from_str(&text)?)
            };
            let p = load(&p)?;
            let q = load(&q)?;
            let kind: MeasureKind = measure.parse::<MeasureKind>()?;
            let value = DistanceMeasure::new(kind).eval(&p, &q)?;
            println!("{value}");
            Ok(())
        }
    }
}

/// Query files ship without a sidecar; validate them against the model's own
/// skeleton.
fn read_queries(data: &Path, bundle: &ModelFile) -> anyhow::Result<LabeledDataset> {
    let sequences = read_sequences(data)?;
    Ok(LabeledDataset::new(
        bundle.model.skeleton.clone(),
        sequences,
        bundle.model.at_rest_pose.clone(),
    )?)
}

/// Fallback when neither --mine nor --template is given: all joints as one
/// absolute feature.
fn default_template(dataset: &LabeledDataset) -> FeatureTemplate {
    use subskel::features::{CanonicalSubSkeleton, Singleton};
    let singletons = dataset
        .skeleton
        .joints()
        .iter()
        .map(Singleton::absolute)
        .collect();
    let set = CanonicalSubSkeleton::new("abs(all)", singletons).expect("skeleton has joints");
    FeatureTemplate::empty().adapted_union(&set)
}
