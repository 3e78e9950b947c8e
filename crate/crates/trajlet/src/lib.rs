//! Skeleton-based action recognition from trajectorylet detector sets.
//!
//! The pipeline turns 3D skeleton sequences into fixed-length action
//! representations:
//!
//! 1. [`skeleton`] loads sequences, normalizes skeleton size against
//!    training-mean limb lengths and hip-centers every frame.
//! 2. [`trajectorylet`] extracts short-window descriptors (static positions
//!    plus displacement / velocity / acceleration blocks) and reduces them
//!    with PCA.
//! 3. [`svm`] provides the weighted hinge-loss solvers: exemplar-SVM
//!    detectors and the one-vs-all action classifier.
//! 4. [`mining`] scores each candidate detector on a sampled descriptor pool
//!    and keeps the purest ones per training instance.
//! 5. [`clustering`] deduplicates the candidate union with active-score
//!    cosine affinity and spectral clustering, keeping one representative
//!    per cluster as the template detector set.
//! 6. [`encoding`] max-pools template-detector scores into the action
//!    vector, optionally over a temporal pyramid.
//! 7. [`pipeline`] / [`protocol`] orchestrate end-to-end training,
//!    evaluation protocols and parameter sweeps; [`synth`] generates
//!    synthetic benchmark datasets.

pub mod clustering;
pub mod config;
pub mod encoding;
pub mod mining;
pub mod pipeline;
pub mod protocol;
pub mod report;
pub mod skeleton;
pub mod svm;
pub mod synth;
pub mod trajectorylet;

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("topology mismatch: {0}")]
    Topology(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
