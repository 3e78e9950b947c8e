//! Per-instance mining of discriminative detectors.
//!
//! Every trajectorylet of a training instance becomes an exemplar-SVM
//! candidate. Each candidate is scored on a sampled pool of training
//! descriptors; the class histogram of its top firings yields a purity
//! value, and the purest candidates (up to a per-instance budget) are kept.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::svm::{self, Detector, EsvmParams};
use crate::trajectorylet::Trajectorylet;
use crate::{Error, Result};

/// Sampled training descriptors the candidates are evaluated against.
#[derive(Debug, Clone)]
pub struct TrajectoryletPool {
    pub descriptors: Vec<Trajectorylet>,
    pub sample_seed: u64,
}

/// Class counts of a detector's top firings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassHistogram {
    /// counts[c] for class labels 1..=C (index 0 unused).
    pub counts: Vec<usize>,
    pub n_top: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningParams {
    /// N_A: firings counted per candidate.
    pub n_top: usize,
    /// M_A: detectors kept per instance.
    pub per_instance_budget: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            n_top: 50,
            per_instance_budget: 10,
        }
    }
}

/// One kept detector plus its selection statistics.
#[derive(Debug, Clone)]
pub struct MinedDetector {
    pub detector: Detector,
    pub purity: f64,
    pub mean_top_score: f64,
    pub converged: bool,
}

/// Uniform sample without replacement of min(n, total) descriptors, seeded.
pub fn sample_pool(dataset: &[Trajectorylet], n: usize, seed: u64) -> Result<TrajectoryletPool> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("cannot sample from an empty dataset".into()));
    }
    let take = n.min(dataset.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, dataset.len(), take).into_vec();
    idx.sort_unstable();
    Ok(TrajectoryletPool {
        descriptors: idx.into_iter().map(|i| dataset[i].clone()).collect(),
        sample_seed: seed,
    })
}

/// Indices of the n_top highest-scoring pool members (ties keep the lower
/// pool index), restricted to `keep`.
fn top_indices(
    det: &Detector,
    pool: &TrajectoryletPool,
    n_top: usize,
    keep: impl Fn(&Trajectorylet) -> bool,
) -> Result<Vec<(usize, f64)>> {
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(pool.descriptors.len());
    for (i, d) in pool.descriptors.iter().enumerate() {
        if keep(d) {
            scored.push((i, svm::score(det, d)?));
        }
    }
    if scored.len() < n_top {
        return Err(Error::InvalidInput(format!(
            "pool of {} eligible descriptors is smaller than N_A={n_top}",
            scored.len()
        )));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(n_top);
    Ok(scored)
}

fn histogram_of(top: &[(usize, f64)], pool: &TrajectoryletPool, n_top: usize) -> ClassHistogram {
    let max_class = pool
        .descriptors
        .iter()
        .map(|d| d.class_label)
        .max()
        .unwrap_or(0);
    let mut counts = vec![0usize; max_class + 1];
    for &(i, _) in top {
        counts[pool.descriptors[i].class_label] += 1;
    }
    ClassHistogram { counts, n_top }
}

/// Class histogram of the detector's top N_A firings on the pool. The
/// detector must be unit-normalized so scores are comparable across
/// candidates.
pub fn class_histogram(
    det: &Detector,
    pool: &TrajectoryletPool,
    n_top: usize,
) -> Result<ClassHistogram> {
    if !det.normalized {
        return Err(Error::InvalidInput("detector must be normalized".into()));
    }
    let top = top_indices(det, pool, n_top, |_| true)?;
    Ok(histogram_of(&top, pool, n_top))
}

/// Fraction of the top firings that carry class `c`.
pub fn purity(hist: &ClassHistogram, class: usize) -> f64 {
    let count = hist.counts.get(class).copied().unwrap_or(0);
    count as f64 / hist.n_top as f64
}

/// Runs the selection loop for one training instance: train an ESVM per
/// trajectorylet, normalize it, tally its top pool firings (descriptors from
/// the same instance are excluded so a candidate cannot inflate its own
/// purity), and keep the M_A purest candidates. Ties break toward the higher
/// mean top score, then the lower start frame. Candidates whose solver fails
/// are skipped.
pub fn mine_instance_detectors(
    instance: &[Trajectorylet],
    instance_class: usize,
    pool: &TrajectoryletPool,
    esvm_params: &EsvmParams,
    mining_params: &MiningParams,
) -> Result<Vec<MinedDetector>> {
    if instance.is_empty() {
        return Err(Error::InvalidInput("instance has no trajectorylets".into()));
    }
    let negatives: Vec<&Trajectorylet> = pool
        .descriptors
        .iter()
        .filter(|d| d.class_label != instance_class)
        .collect();
    if negatives.is_empty() {
        return Err(Error::InvalidInput(format!(
            "pool has no negatives for class {instance_class}"
        )));
    }
    let instance_id = instance[0].source_instance;
    let mut candidates: Vec<MinedDetector> = instance
        .par_iter()
        .filter_map(|exemplar| {
            let trained = match svm::train_esvm(exemplar, &negatives, esvm_params) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!(
                        "warning: skipping candidate (instance {instance_id}, frame {}): {e}",
                        exemplar.start_frame
                    );
                    return None;
                }
            };
            let det = match svm::unit_normalize(&trained.detector) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!(
                        "warning: skipping candidate (instance {instance_id}, frame {}): {e}",
                        exemplar.start_frame
                    );
                    return None;
                }
            };
            let top = top_indices(&det, pool, mining_params.n_top, |d| {
                d.source_instance != instance_id
            })
            .ok()?;
            let hist = histogram_of(&top, pool, mining_params.n_top);
            let mean_top_score = top.iter().map(|&(_, s)| s).sum::<f64>() / top.len() as f64;
            Some(MinedDetector {
                purity: purity(&hist, instance_class),
                mean_top_score,
                converged: trained.converged,
                detector: det,
            })
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.purity
            .partial_cmp(&a.purity)
            .unwrap()
            .then(b.mean_top_score.partial_cmp(&a.mean_top_score).unwrap())
            .then(a.detector.source_frame.cmp(&b.detector.source_frame))
    });
    candidates.truncate(mining_params.per_instance_budget);
    Ok(candidates)
}

/// Mining report row: `instance class frame P_t mean_top_score`.
pub fn mining_report(mined: &[MinedDetector]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for m in mined {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            m.detector.source_instance,
            m.detector.source_class,
            m.detector.source_frame,
            m.purity,
            m.mean_top_score
        );
    }
    out
}
