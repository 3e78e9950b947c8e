//! Detector deduplication: active-score affinity, spectral clustering and
//! representative selection.
//!
//! Two detectors are similar when they fire positively on the same pool
//! descriptors. The cosine affinity of their clipped score vectors feeds a
//! normalized spectral clustering (symmetric normalization, k-means on the
//! row-normalized embedding); one representative per cluster forms the
//! template detector set.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::mining::TrajectoryletPool;
use crate::svm::{self, Detector};
use crate::{Error, Result};

/// A detector's pool scores with negatives clipped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveScoreVector {
    pub scores: Vec<f64>,
}

impl ActiveScoreVector {
    pub fn is_zero(&self) -> bool {
        self.scores.iter().all(|&s| s == 0.0)
    }
}

/// Symmetric detector-affinity matrix with entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub q: DMatrix<f64>,
}

/// The K cluster representatives that define the encoding map.
#[derive(Debug, Clone)]
pub struct TemplateDetectorSet {
    pub detectors: Vec<Detector>,
    /// Cluster index per input detector (post-drop order).
    pub cluster_assignments: Vec<usize>,
    pub k: usize,
}

/// Clipped score vector of one detector over the pool.
pub fn active_score_vector(det: &Detector, pool: &TrajectoryletPool) -> Result<ActiveScoreVector> {
    if pool.descriptors.is_empty() {
        return Err(Error::InvalidInput("empty pool".into()));
    }
    let scores = pool
        .descriptors
        .iter()
        .map(|d| svm::score(det, d).map(|s| s.max(0.0)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ActiveScoreVector { scores })
}

/// Cosine similarity of two active score vectors; 0 when either is zero.
pub fn affinity(a: &ActiveScoreVector, b: &ActiveScoreVector) -> Result<f64> {
    if a.scores.len() != b.scores.len() {
        return Err(Error::DimMismatch {
            expected: a.scores.len(),
            got: b.scores.len(),
        });
    }
    let na: f64 = a.scores.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.scores.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.scores.iter().zip(&b.scores).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Builds the full affinity matrix from active score vectors.
pub fn affinity_matrix(vectors: &[ActiveScoreVector]) -> Result<AffinityMatrix> {
    let n = vectors.len();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = if vectors[i].is_zero() { 0.0 } else { 1.0 };
        for j in i + 1..n {
            let s = affinity(&vectors[i], &vectors[j])?;
            q[(i, j)] = s;
            q[(j, i)] = s;
        }
    }
    Ok(AffinityMatrix { q })
}

/// Normalized spectral clustering: embed by the K leading eigenvectors of
/// D^{-1/2} Q D^{-1/2}, row-normalize, then run seeded k-means. Returns one
/// cluster index per detector.
pub fn spectral_cluster(q: &AffinityMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = q.q.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("K={k} out of range for {n} detectors")));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (q.q[(i, j)] - q.q[(j, i)]).abs() > 1e-10 {
                return Err(Error::InvalidInput("affinity matrix is not symmetric".into()));
            }
        }
    }
    if k == n {
        return Ok((0..n).collect());
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    // symmetric normalization; isolated rows keep degree 1 so the math stays finite
    let mut inv_sqrt_deg = vec![0.0; n];
    for i in 0..n {
        let deg: f64 = q.q.row(i).iter().sum();
        inv_sqrt_deg[i] = if deg > 0.0 { deg.powf(-0.5) } else { 1.0 };
    }
    let mut m = q.q.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut embedding = DMatrix::zeros(n, k);
    for (col, &src) in order[..k].iter().enumerate() {
        for row in 0..n {
            embedding[(row, col)] = eig.eigenvectors[(row, src)];
        }
    }
    for row in 0..n {
        let norm: f64 = embedding.row(row).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for col in 0..k {
                embedding[(row, col)] /= norm;
            }
        }
    }
    let points: Vec<Vec<f64>> = (0..n)
        .map(|r| embedding.row(r).iter().copied().collect())
        .collect();
    Ok(kmeans(&points, k, seed))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means: the first center is a seeded random point, the rest are
/// farthest-point picks (ties to the lower index), then Lloyd iterations.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.gen_range(0..n)].clone()];
    let mut min_dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let mut far = 0;
        for i in 1..n {
            if min_dist[i] > min_dist[far] {
                far = i;
            }
        }
        centers.push(points[far].clone());
        for i in 0..n {
            min_dist[i] = min_dist[i].min(sq_dist(&points[i], centers.last().unwrap()));
        }
    }
    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..200 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, &v) in sums[assignment[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // move the emptied center onto the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[assignment[a]])
                            .partial_cmp(&sq_dist(&points[b], &centers[assignment[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centers[c] = points[far].clone();
            } else {
                for (s, cv) in sums[c].iter().zip(centers[c].iter_mut()) {
                    *cv = s / counts[c] as f64;
                }
            }
        }
    }
    assignment
}

/// Picks one representative per cluster: the detector with the largest
/// maximum active score on the pool; ties break toward the larger mean
/// active score, then provenance order (instance id, frame). Clusters left
/// empty by upstream drops are skipped with a warning.
pub fn select_representatives(
    assignments: &[usize],
    detectors: &[Detector],
    pool: &TrajectoryletPool,
) -> Result<TemplateDetectorSet> {
    if assignments.len() != detectors.len() {
        return Err(Error::InvalidInput(
            "assignments do not cover all detectors".into(),
        ));
    }
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let stats: Vec<(f64, f64)> = detectors
        .par_iter()
        .map(|det| {
            let v = active_score_vector(det, pool)?;
            let max = v.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = v.scores.iter().sum::<f64>() / v.scores.len() as f64;
            Ok((max, mean))
        })
        .collect::<Result<_>>()?;
    let mut representatives = Vec::new();
    for cluster in 0..k {
        let mut best: Option<usize> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if a != cluster {
                continue;
            }
            best = Some(match best {
                None => i,
                Some(j) => {
                    let (mi, ei) = stats[i];
                    let (mj, ej) = stats[j];
                    let prov_i = (detectors[i].source_instance, detectors[i].source_frame);
                    let prov_j = (detectors[j].source_instance, detectors[j].source_frame);
                    if (mi, ei, std::cmp::Reverse(prov_i)) > (mj, ej, std::cmp::Reverse(prov_j)) {
                        i
                    } else {
                        j
                    }
                }
            });
        }
        match best {
            Some(i) => representatives.push(detectors[i].clone()),
            None => eprintln!("warning: cluster {cluster} is empty, skipping"),
        }
    }
    let k = representatives.len();
    Ok(TemplateDetectorSet {
        detectors: representatives,
        cluster_assignments: assignments.to_vec(),
        k,
    })
}

/// Cluster-assignment sidecar: `detector_index cluster_index` rows.
pub fn assignments_to_text(assignments: &[usize]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (i, c) in assignments.iter().enumerate() {
        let _ = writeln!(out, "{i} {c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectorylet::Trajectorylet;

    fn unit_detector(weight: Vec<f64>, bias: f64, instance: usize, frame: usize) -> Detector {
        svm::unit_normalize(&Detector {
            weight,
            bias,
            source_class: 1,
            source_instance: instance,
            source_frame: frame,
            normalized: false,
        })
        .unwrap()
    }

    fn pool_of(points: Vec<Vec<f64>>) -> TrajectoryletPool {
        TrajectoryletPool {
            descriptors: points
                .into_iter()
                .enumerate()
                .map(|(i, values)| Trajectorylet {
                    values,
                    source_instance: i,
                    start_frame: 0,
                    class_label: 1,
                })
                .collect(),
            sample_seed: 0,
        }
    }

    #[test]
    fn active_scores_clip_negatives() {
        let pool = pool_of(vec![vec![-1.0], vec![0.5], vec![2.0]]);
        let det = unit_detector(vec![1.0], 0.0, 0, 0);
        let v = active_score_vector(&det, &pool).unwrap();
        assert_eq!(v.scores, vec![0.0, 0.5, 2.0]);
        assert_eq!(v.scores.len(), pool.descriptors.len());

        let away = unit_detector(vec![-1.0], -1.0, 0, 0);
        let v = active_score_vector(&away, &pool).unwrap();
        assert!(v.scores[..2].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn affinity_arithmetic() {
        let a = ActiveScoreVector { scores: vec![1.0, 0.0] };
        let b = ActiveScoreVector { scores: vec![1.0, 1.0] };
        let z = ActiveScoreVector { scores: vec![0.0, 0.0] };
        let d = ActiveScoreVector { scores: vec![0.0, 2.0] };
        assert!((affinity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(affinity(&a, &d).unwrap(), 0.0);
        assert!((affinity(&a, &b).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(affinity(&a, &z).unwrap(), 0.0);
        assert!(affinity(&a, &ActiveScoreVector { scores: vec![1.0] }).is_err());
    }

    #[test]
    fn affinity_is_scale_invariant() {
        let a = ActiveScoreVector {
            scores: vec![0.3, 0.0, 1.2, 0.7],
        };
        let b = ActiveScoreVector {
            scores: vec![0.1, 0.5, 0.9, 0.0],
        };
        let base = affinity(&a, &b).unwrap();
        for alpha in [0.01, 3.0, 1e6] {
            let scaled = ActiveScoreVector {
                scores: a.scores.iter().map(|s| s * alpha).collect(),
            };
            assert!((affinity(&scaled, &b).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn affinity_matrix_invariants_on_random_detectors() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pool = pool_of((0..30).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect());
        let vectors: Vec<ActiveScoreVector> = (0..8)
            .map(|i| {
                let det = unit_detector(
                    vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    rng.gen_range(-0.5..0.5),
                    i,
                    0,
                );
                active_score_vector(&det, &pool).unwrap()
            })
            .collect();
        let q = affinity_matrix(&vectors).unwrap();
        let n = q.q.nrows();
        for i in 0..n {
            if !vectors[i].is_zero() {
                assert!((q.q[(i, i)] - 1.0).abs() < 1e-12);
            }
            for j in 0..n {
                assert!(q.q[(i, j)] >= 0.0 && q.q[(i, j)] <= 1.0);
                assert!((q.q[(i, j)] - q.q[(j, i)]).abs() < 1e-10);
            }
        }
    }

    fn planted_block_affinity(blocks: usize, size: usize, within: f64, cross: f64) -> AffinityMatrix {
        let n = blocks * size;
        let mut q = DMatrix::from_element(n, n, cross);
        for b in 0..blocks {
            for i in b * size..(b + 1) * size {
                for j in b * size..(b + 1) * size {
                    q[(i, j)] = within;
                }
            }
        }
        for i in 0..n {
            q[(i, i)] = 1.0;
        }
        AffinityMatrix { q }
    }

    /// Adjusted Rand index between two labelings.
    pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let ka = a.iter().max().unwrap() + 1;
        let kb = b.iter().max().unwrap() + 1;
        let mut table = vec![vec![0usize; kb]; ka];
        for i in 0..n {
            table[a[i]][b[i]] += 1;
        }
        let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
        let sum_ij: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
        let sum_a: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
        let sum_b: f64 = (0..kb)
            .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
            .sum();
        let expected = sum_a * sum_b / choose2(n);
        let max = 0.5 * (sum_a + sum_b);
        (sum_ij - expected) / (max - expected)
    }

    #[test]
    fn planted_blocks_are_recovered() {
        let q = planted_block_affinity(3, 10, 0.9, 0.1);
        let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let found = spectral_cluster(&q, 3, 17).unwrap();
        assert_eq!(adjusted_rand_index(&truth, &found), 1.0);
    }

    #[test]
    fn degenerate_k_values() {
        let q = planted_block_affinity(2, 5, 0.8, 0.2);
        assert_eq!(spectral_cluster(&q, 1, 0).unwrap(), vec![0; 10]);
        let singletons = spectral_cluster(&q, 10, 0).unwrap();
        assert_eq!(singletons, (0..10).collect::<Vec<_>>());
        assert!(spectral_cluster(&q, 11, 0).is_err());
        assert!(spectral_cluster(&q, 0, 0).is_err());
        let mut asym = planted_block_affinity(2, 5, 0.8, 0.2);
        asym.q[(0, 1)] = 0.9;
        assert!(spectral_cluster(&asym, 2, 0).is_err());
    }

    #[test]
    fn clustering_is_deterministic_under_seed() {
        let q = planted_block_affinity(3, 8, 0.7, 0.2);
        let a = spectral_cluster(&q, 3, 99).unwrap();
        let b = spectral_cluster(&q, 3, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn representatives_dominate_their_clusters() {
        let pool = pool_of(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.7, 0.7]]);
        let detectors = vec![
            unit_detector(vec![1.0, 0.0], 0.0, 0, 0),
            unit_detector(vec![1.0, 0.1], 0.5, 1, 2), // higher max score
            unit_detector(vec![0.0, 1.0], 0.0, 2, 0),
        ];
        let assignments = vec![0, 0, 1];
        let set = select_representatives(&assignments, &detectors, &pool).unwrap();
        assert_eq!(set.k, 2);
        assert_eq!(set.detectors[0].source_instance, 1);
        assert_eq!(set.detectors[1].source_instance, 2);
        // dominance: representative's max active score >= every member's
        for (i, &a) in assignments.iter().enumerate() {
            let rep = &set.detectors[a];
            let rep_max = active_score_vector(rep, &pool)
                .unwrap()
                .scores
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            let mem_max = active_score_vector(&detectors[i], &pool)
                .unwrap()
                .scores
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(rep_max >= mem_max);
        }
    }

    #[test]
    fn singleton_clusters_keep_every_detector() {
        let pool = pool_of(vec![vec![1.0], vec![-1.0]]);
        let detectors = vec![
            unit_detector(vec![1.0], 0.0, 0, 0),
            unit_detector(vec![-1.0], 0.0, 1, 0),
        ];
        let set = select_representatives(&[0, 1], &detectors, &pool).unwrap();
        assert_eq!(set.k, 2);
        assert_eq!(set.detectors.len(), 2);
    }
}
