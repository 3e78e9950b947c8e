//! End-to-end orchestration: load, normalize, extract, reduce, mine,
//! cluster, encode, classify, report.

use std::path::Path;
use std::time::Instant;

use crate::clustering::{self, TemplateDetectorSet};
use crate::config::PipelineConfig;
use crate::encoding::{self, ActionEncoding};
use crate::mining::{self, MinedDetector};
use crate::protocol::{self, ProtocolKind};
use crate::report::EvaluationReport;
use crate::skeleton::{self, LimbReference, SkeletonSequence};
use crate::svm::{self, MulticlassModel};
use crate::trajectorylet::{self, PcaModel, Trajectorylet};
use crate::{Error, Result};

/// Everything persisted after training.
pub struct ModelBundle {
    pub limb_reference: LimbReference,
    pub pca: PcaModel,
    pub template: TemplateDetectorSet,
    pub multiclass: MulticlassModel,
    pub chosen_c: f64,
    pub mining_report: String,
    pub config_echo: String,
}

pub struct PipelineOutput {
    pub bundle: ModelBundle,
    pub report: EvaluationReport,
    /// Mined detectors per training instance, in training order.
    pub mined: Vec<Vec<MinedDetector>>,
    /// Dataset indices of the training instances, in training order.
    pub train_indices: Vec<usize>,
    pub train_encodings: Vec<ActionEncoding>,
}

/// Loads every canonical `.txt` file in a directory (sorted by filename),
/// skipping the planted-windows sidecar and any excluded filenames.
pub fn load_dataset(dir: &Path, exclusions: &[String]) -> Result<Vec<SkeletonSequence>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name == "planted_windows.txt" || exclusions.iter().any(|x| x == name) {
            continue;
        }
        out.push(skeleton::load_instance(&path, skeleton::Format::Canonical)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no canonical instances in {}",
            dir.display()
        )));
    }
    Ok(out)
}

/// Runs the full pipeline on one train/test split. Instance ids carried on
/// trajectorylets are indices into `dataset`, so provenance is checkable at
/// every stage; no test instance touches the limb reference, PCA, pool,
/// mining, clustering or cross-validation.
pub fn run_pipeline(
    dataset: &[SkeletonSequence],
    train_indices: &[usize],
    test_indices: &[usize],
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    if train_indices.is_empty() || test_indices.is_empty() {
        return Err(Error::InvalidInput("empty split".into()).in_stage("split"));
    }
    for i in train_indices {
        if test_indices.contains(i) {
            return Err(
                Error::InvalidInput(format!("instance {i} in both splits")).in_stage("split")
            );
        }
    }
    let mut timings: Vec<(String, f64)> = Vec::new();
    let mut timed = |name: &str, start: Instant| {
        timings.push((name.to_string(), start.elapsed().as_secs_f64()));
    };

    let start = Instant::now();
    let train_seqs: Vec<&SkeletonSequence> = train_indices.iter().map(|&i| &dataset[i]).collect();
    let owned_train: Vec<SkeletonSequence> = train_seqs.iter().map(|s| (*s).clone()).collect();
    let limb_reference = skeleton::compute_reference_limb_lengths(&owned_train)
        .map_err(|e| e.in_stage("limb_reference"))?;
    timed("limb_reference", start);

    // normalize + hip-center + extract raw descriptors, per split
    let extract = |indices: &[usize]| -> Result<Vec<Vec<Trajectorylet>>> {
        indices
            .iter()
            .map(|&i| {
                let normalized = skeleton::normalize_skeleton_size(&dataset[i], &limb_reference)?;
                let frames: Vec<Vec<f64>> = normalized
                    .frames
                    .iter()
                    .map(|f| skeleton::center_at_hip(f, normalized.hip_index))
                    .collect();
                trajectorylet::extract_trajectorylets(
                    &frames,
                    &config.trajectorylet,
                    i,
                    dataset[i].class_label,
                )
            })
            .collect()
    };
    let start = Instant::now();
    let train_raw = extract(train_indices).map_err(|e| e.in_stage("extract"))?;
    let test_raw = extract(test_indices).map_err(|e| e.in_stage("extract"))?;
    timed("extract", start);

    let start = Instant::now();
    let all_train_raw: Vec<Trajectorylet> = train_raw.iter().flatten().cloned().collect();
    let pca = trajectorylet::fit_pca(&all_train_raw, config.trajectorylet.pca_retain_fraction)
        .map_err(|e| e.in_stage("pca"))?;
    let reduce = |raw: &[Vec<Trajectorylet>]| -> Result<Vec<Vec<Trajectorylet>>> {
        raw.iter()
            .map(|instance| {
                instance
                    .iter()
                    .map(|t| trajectorylet::apply_pca(&pca, t))
                    .collect()
            })
            .collect()
    };
    let train_reduced = reduce(&train_raw).map_err(|e| e.in_stage("pca"))?;
    let test_reduced = reduce(&test_raw).map_err(|e| e.in_stage("pca"))?;
    timed("pca", start);

    let start = Instant::now();
    let train_flat: Vec<Trajectorylet> = train_reduced.iter().flatten().cloned().collect();
    let pool = mining::sample_pool(&train_flat, config.pool_size, config.pool_seed)
        .map_err(|e| e.in_stage("pool"))?;
    assert!(
        pool.descriptors
            .iter()
            .all(|d| train_indices.contains(&d.source_instance)),
        "pool leaked a non-training descriptor"
    );
    timed("pool", start);

    let start = Instant::now();
    let mut mined: Vec<Vec<MinedDetector>> = Vec::with_capacity(train_reduced.len());
    for instance in &train_reduced {
        let class = instance[0].class_label;
        mined.push(
            mining::mine_instance_detectors(instance, class, &pool, &config.esvm, &config.mining)
                .map_err(|e| e.in_stage("mining"))?,
        );
    }
    let mining_report: String = mined.iter().map(|m| mining::mining_report(m)).collect();
    timed("mining", start);

    let start = Instant::now();
    let candidates: Vec<svm::Detector> = mined
        .iter()
        .flatten()
        .map(|m| m.detector.clone())
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no detectors mined".into()).in_stage("clustering"));
    }
    let actives: Vec<clustering::ActiveScoreVector> = candidates
        .iter()
        .map(|d| clustering::active_score_vector(d, &pool))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("clustering"))?;
    // detectors that never fire positively on the pool carry no signal
    let kept: Vec<usize> = (0..candidates.len())
        .filter(|&i| !actives[i].is_zero())
        .collect();
    if kept.len() < candidates.len() {
        eprintln!(
            "warning: dropped {} detectors with all-zero active scores",
            candidates.len() - kept.len()
        );
    }
    if kept.is_empty() {
        return Err(
            Error::InvalidInput("every candidate detector was dropped".into())
                .in_stage("clustering"),
        );
    }
    let kept_detectors: Vec<svm::Detector> = kept.iter().map(|&i| candidates[i].clone()).collect();
    let kept_actives: Vec<clustering::ActiveScoreVector> =
        kept.iter().map(|&i| actives[i].clone()).collect();
    let k = config.cluster_k.min(kept_detectors.len());
    if k < config.cluster_k {
        eprintln!(
            "warning: K clamped from {} to {} candidate detectors",
            config.cluster_k, k
        );
    }
    let q = clustering::affinity_matrix(&kept_actives).map_err(|e| e.in_stage("clustering"))?;
    let assignments =
        clustering::spectral_cluster(&q, k, config.cluster_seed).map_err(|e| e.in_stage("clustering"))?;
    let template = clustering::select_representatives(&assignments, &kept_detectors, &pool)
        .map_err(|e| e.in_stage("clustering"))?;
    timed("clustering", start);

    let start = Instant::now();
    let encode_all = |instances: &[Vec<Trajectorylet>]| -> Result<Vec<ActionEncoding>> {
        instances
            .iter()
            .map(|ts| encoding::encode_pyramid(&template, ts, config.pyramid_levels))
            .collect()
    };
    let train_encodings = encode_all(&train_reduced).map_err(|e| e.in_stage("encoding"))?;
    let test_encodings = encode_all(&test_reduced).map_err(|e| e.in_stage("encoding"))?;
    timed("encoding", start);

    let start = Instant::now();
    let train_vectors: Vec<Vec<f64>> = train_encodings.iter().map(|e| e.values.clone()).collect();
    let train_labels: Vec<usize> = train_encodings
        .iter()
        .map(|e| e.label.expect("training encodings carry labels"))
        .collect();
    let chosen_c = svm::cross_validate_c(
        &train_vectors,
        &train_labels,
        &config.cv_grid,
        config.cv_folds,
        config.cv_seed,
        config.ova_max_iterations,
        config.esvm.convergence_tolerance,
    )
    .map_err(|e| e.in_stage("cross_validation"))?;
    let multiclass = svm::train_ova_svm(
        &train_vectors,
        &train_labels,
        chosen_c,
        config.ova_max_iterations,
        config.esvm.convergence_tolerance,
    )
    .map_err(|e| e.in_stage("ova_training"))?;
    timed("ova_training", start);

    let start = Instant::now();
    let pairs: Vec<(usize, usize)> = test_encodings
        .iter()
        .map(|e| {
            svm::predict(&multiclass, &e.values)
                .map(|p| (e.label.expect("test encodings carry labels"), p))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("evaluation"))?;
    let mut report = EvaluationReport::from_predictions(&pairs, config.echo())
        .map_err(|e| e.in_stage("evaluation"))?;
    timed("evaluation", start);
    report.timings = timings;

    Ok(PipelineOutput {
        bundle: ModelBundle {
            limb_reference,
            pca,
            template,
            multiclass,
            chosen_c,
            mining_report,
            config_echo: config.echo(),
        },
        report,
        mined,
        train_indices: train_indices.to_vec(),
        train_encodings,
    })
}

/// Persists the bundle as a directory of text artifacts named by producing
/// module. The directory appears atomically: everything is written to a
/// staging directory first, so a failed stage never leaves a partial bundle.
pub fn save_bundle(output: &PipelineOutput, dir: &Path) -> Result<()> {
    let parent = dir.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(parent)?;
    let staging = parent.join(format!(
        ".{}.staging",
        dir.file_name().and_then(|n| n.to_str()).unwrap_or("bundle")
    ));
    if staging.exists() {
        std::fs::remove_dir_all(&staging)?;
    }
    std::fs::create_dir_all(&staging)?;
    let bundle = &output.bundle;
    let limb_text: String = bundle
        .limb_reference
        .lengths
        .iter()
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(staging.join("config.txt"), &bundle.config_echo)?;
    std::fs::write(staging.join("skeleton_io.limb_reference.txt"), limb_text)?;
    std::fs::write(
        staging.join("trajectorylet.pca_model.txt"),
        bundle.pca.to_text(),
    )?;
    std::fs::write(
        staging.join("detector_mining.report.txt"),
        &bundle.mining_report,
    )?;
    std::fs::write(
        staging.join("detector_clustering.template_detectors.txt"),
        svm::detectors_to_text(&bundle.template.detectors),
    )?;
    std::fs::write(
        staging.join("detector_clustering.cluster_assignments.txt"),
        clustering::assignments_to_text(&bundle.template.cluster_assignments),
    )?;
    std::fs::write(
        staging.join("linear_svm.multiclass_model.txt"),
        svm::multiclass_to_text(&bundle.multiclass),
    )?;
    std::fs::write(staging.join("report.txt"), output.report.to_text())?;
    std::fs::write(staging.join("report.machine.txt"), output.report.to_machine())?;
    if dir.exists() {
        std::fs::remove_dir_all(dir)?;
    }
    std::fs::rename(&staging, dir)?;
    Ok(())
}

/// Runs the configured protocol. Returns one named run per split: a single
/// "all" run for cross-subject and custom splits, or AS1/AS2/AS3 runs for
/// the subset protocol.
pub fn evaluate_protocol(
    dataset: &[SkeletonSequence],
    config: &PipelineConfig,
) -> Result<Vec<(String, PipelineOutput)>> {
    match config.protocol.kind {
        ProtocolKind::CrossSubjectAll | ProtocolKind::CustomSplit => {
            let (train, test) = config.protocol.split(dataset)?;
            let output = run_pipeline(dataset, &train, &test, config)?;
            Ok(vec![("all".to_string(), output)])
        }
        ProtocolKind::AsSubsets => {
            let subsets = protocol::as_subset_classes();
            let mut out = Vec::with_capacity(3);
            for (s, classes) in subsets.iter().enumerate() {
                let keep = protocol::filter_classes(dataset, classes);
                if keep.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "dataset has no instances for subset AS{}",
                        s + 1
                    )));
                }
                let subset: Vec<SkeletonSequence> =
                    keep.iter().map(|&i| dataset[i].clone()).collect();
                let (train, test) = config.protocol.split(&subset)?;
                let output = run_pipeline(&subset, &train, &test, config)?;
                out.push((format!("AS{}", s + 1), output));
            }
            Ok(out)
        }
    }
}

/// Mean accuracy over the runs of one protocol evaluation.
pub fn mean_accuracy(runs: &[(String, PipelineOutput)]) -> f64 {
    runs.iter().map(|(_, o)| o.report.accuracy).sum::<f64>() / runs.len() as f64
}

/// Sweepable parameters and the config key each one maps to.
pub const SWEEP_PARAMETERS: [(&str, &str); 6] = [
    ("K", "cluster_k"),
    ("M_A", "per_instance_budget"),
    ("N_A", "n_top"),
    ("L", "L"),
    ("pyramid_levels", "pyramid_levels"),
    ("components", "components"),
];

/// Re-runs the protocol once per parameter value, all else fixed. Failures
/// are recorded in the table instead of aborting the sweep.
pub fn sweep(
    dataset: &[SkeletonSequence],
    config: &PipelineConfig,
    parameter: &str,
    values: &[String],
) -> Result<String> {
    use std::fmt::Write as _;
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    let key = SWEEP_PARAMETERS
        .iter()
        .find(|(name, _)| *name == parameter)
        .map(|(_, key)| *key)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "unknown sweep parameter '{parameter}' (expected one of {})",
                SWEEP_PARAMETERS.map(|(n, _)| n).join(", ")
            ))
        })?;
    let mut table = format!("{parameter} accuracy\n");
    for value in values {
        let mut cell_config = config.clone();
        let row = cell_config
            .set(key, value)
            .and_then(|()| cell_config.validate())
            .and_then(|()| evaluate_protocol(dataset, &cell_config))
            .map(|runs| format!("{:.4}", mean_accuracy(&runs)));
        match row {
            Ok(acc) => {
                let _ = writeln!(table, "{value} {acc}");
            }
            Err(e) => {
                let _ = writeln!(table, "{value} ERROR: {e}");
            }
        }
    }
    Ok(table)
}
