//! Pipeline configuration: a flat key-value text file, overridable from the
//! command line. Every random seed is an explicit field so any run can be
//! audited and reproduced from its config echo.

use std::path::PathBuf;

use crate::mining::MiningParams;
use crate::protocol::{ProtocolKind, ProtocolSpec};
use crate::svm::{self, EsvmParams};
use crate::trajectorylet::{Component, TrajectoryletConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub trajectorylet: TrajectoryletConfig,
    pub esvm: EsvmParams,
    pub mining: MiningParams,
    /// N: size of the sampled trajectorylet pool.
    pub pool_size: usize,
    pub pool_seed: u64,
    /// K: template detector count (clamped to the candidate count).
    pub cluster_k: usize,
    pub cluster_seed: u64,
    /// 1 = flat encoding.
    pub pyramid_levels: usize,
    pub cv_grid: Vec<f64>,
    pub cv_folds: usize,
    pub cv_seed: u64,
    pub ova_max_iterations: usize,
    pub protocol: ProtocolSpec,
    pub data_dir: Option<PathBuf>,
    /// Filenames (one per line in the exclusion file) dropped at load time.
    pub exclusions: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::action3d()
    }
}

impl PipelineConfig {
    /// Defaults for MSR Action3D: L=5, N_A=50, M_A=10, K=500, flat encoding.
    pub fn action3d() -> Self {
        Self {
            trajectorylet: TrajectoryletConfig::default(),
            esvm: EsvmParams::default(),
            mining: MiningParams {
                n_top: 50,
                per_instance_budget: 10,
            },
            pool_size: 10_000,
            pool_seed: 1,
            cluster_k: 500,
            cluster_seed: 2,
            pyramid_levels: 1,
            cv_grid: svm::default_cv_grid(),
            cv_folds: 5,
            cv_seed: 3,
            ova_max_iterations: 2000,
            protocol: ProtocolSpec::cross_subject_all(),
            data_dir: None,
            exclusions: Vec::new(),
        }
    }

    /// Defaults for MSR DailyActivity3D: M_A=15 and a 3-level pyramid.
    pub fn daily_activity() -> Self {
        Self {
            mining: MiningParams {
                n_top: 50,
                per_instance_budget: 15,
            },
            pyramid_levels: 3,
            ..Self::action3d()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trajectorylet.validate()?;
        self.esvm.validate()?;
        if self.mining.n_top == 0 || self.mining.per_instance_budget == 0 {
            return Err(Error::InvalidInput("N_A and M_A must be >= 1".into()));
        }
        if self.pool_size < self.mining.n_top {
            return Err(Error::InvalidInput("pool_size must be >= N_A".into()));
        }
        if self.cluster_k == 0 {
            return Err(Error::InvalidInput("cluster_k must be >= 1".into()));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::InvalidInput("pyramid_levels must be >= 1".into()));
        }
        if self.cv_grid.is_empty() {
            return Err(Error::InvalidInput("cv_grid must be nonempty".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidInput("cv_folds must be >= 2".into()));
        }
        self.protocol.validate()
    }

    /// Applies one `key=value` override. Keys match the config-file schema.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidInput(format!("bad value '{value}' for {what}"));
        match key {
            "preset" => {
                *self = match value {
                    "action3d" => Self::action3d(),
                    "daily_activity" => Self::daily_activity(),
                    _ => return Err(bad("preset (action3d|daily_activity)")),
                }
            }
            "L" => self.trajectorylet.length = value.parse().map_err(|_| bad("L"))?,
            "components" => {
                let mut comps = Vec::new();
                for name in value.split(',') {
                    comps.push(Component::parse(name.trim())?);
                }
                self.trajectorylet.components = comps;
                self.trajectorylet.canonicalize();
            }
            "pca_fraction" => {
                self.trajectorylet.pca_retain_fraction =
                    value.parse().map_err(|_| bad("pca_fraction"))?
            }
            "lambda_pos" => self.esvm.lambda_pos = value.parse().map_err(|_| bad("lambda_pos"))?,
            "lambda_neg" => self.esvm.lambda_neg = value.parse().map_err(|_| bad("lambda_neg"))?,
            "esvm_max_iterations" => {
                self.esvm.max_iterations = value.parse().map_err(|_| bad("esvm_max_iterations"))?
            }
            "esvm_tolerance" => {
                self.esvm.convergence_tolerance =
                    value.parse().map_err(|_| bad("esvm_tolerance"))?
            }
            "pool_size" => self.pool_size = value.parse().map_err(|_| bad("pool_size"))?,
            "pool_seed" => self.pool_seed = value.parse().map_err(|_| bad("pool_seed"))?,
            "n_top" => self.mining.n_top = value.parse().map_err(|_| bad("n_top"))?,
            "per_instance_budget" => {
                self.mining.per_instance_budget =
                    value.parse().map_err(|_| bad("per_instance_budget"))?
            }
            "cluster_k" => self.cluster_k = value.parse().map_err(|_| bad("cluster_k"))?,
            "cluster_seed" => self.cluster_seed = value.parse().map_err(|_| bad("cluster_seed"))?,
            "pyramid_levels" => {
                self.pyramid_levels = value.parse().map_err(|_| bad("pyramid_levels"))?
            }
            "cv_grid" => {
                self.cv_grid = value
                    .split(',')
                    .map(|t| t.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("cv_grid"))?
            }
            "cv_folds" => self.cv_folds = value.parse().map_err(|_| bad("cv_folds"))?,
            "cv_seed" => self.cv_seed = value.parse().map_err(|_| bad("cv_seed"))?,
            "ova_max_iterations" => {
                self.ova_max_iterations = value.parse().map_err(|_| bad("ova_max_iterations"))?
            }
            "protocol" => {
                self.protocol.kind = match value {
                    "cross_subject_all" => ProtocolKind::CrossSubjectAll,
                    "as_subsets" => ProtocolKind::AsSubsets,
                    "custom_split" => ProtocolKind::CustomSplit,
                    _ => return Err(bad("protocol")),
                }
            }
            "train_subjects" => {
                self.protocol.train_subjects = parse_usize_list(value).map_err(|_| bad(key))?
            }
            "test_subjects" => {
                self.protocol.test_subjects = parse_usize_list(value).map_err(|_| bad(key))?
            }
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "exclude" => {
                self.exclusions = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            _ => return Err(Error::InvalidInput(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("config line {}: expected key=value", lineno + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Full echo in config-file syntax; parsing it back reproduces the config.
    pub fn echo(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "L={}", self.trajectorylet.length);
        let comps: Vec<&str> = self.trajectorylet.components.iter().map(|c| c.name()).collect();
        let _ = writeln!(out, "components={}", comps.join(","));
        let _ = writeln!(out, "pca_fraction={}", self.trajectorylet.pca_retain_fraction);
        let _ = writeln!(out, "lambda_pos={}", self.esvm.lambda_pos);
        let _ = writeln!(out, "lambda_neg={}", self.esvm.lambda_neg);
        let _ = writeln!(out, "esvm_max_iterations={}", self.esvm.max_iterations);
        let _ = writeln!(out, "esvm_tolerance={}", self.esvm.convergence_tolerance);
        let _ = writeln!(out, "pool_size={}", self.pool_size);
        let _ = writeln!(out, "pool_seed={}", self.pool_seed);
        let _ = writeln!(out, "n_top={}", self.mining.n_top);
        let _ = writeln!(out, "per_instance_budget={}", self.mining.per_instance_budget);
        let _ = writeln!(out, "cluster_k={}", self.cluster_k);
        let _ = writeln!(out, "cluster_seed={}", self.cluster_seed);
        let _ = writeln!(out, "pyramid_levels={}", self.pyramid_levels);
        let grid: Vec<String> = self.cv_grid.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "cv_grid={}", grid.join(","));
        let _ = writeln!(out, "cv_folds={}", self.cv_folds);
        let _ = writeln!(out, "cv_seed={}", self.cv_seed);
        let _ = writeln!(out, "ova_max_iterations={}", self.ova_max_iterations);
        let kind = match self.protocol.kind {
            ProtocolKind::CrossSubjectAll => "cross_subject_all",
            ProtocolKind::AsSubsets => "as_subsets",
            ProtocolKind::CustomSplit => "custom_split",
        };
        let _ = writeln!(out, "protocol={kind}");
        if !self.protocol.train_subjects.is_empty() {
            let _ = writeln!(out, "train_subjects={}", join_usize(&self.protocol.train_subjects));
        }
        if !self.protocol.test_subjects.is_empty() {
            let _ = writeln!(out, "test_subjects={}", join_usize(&self.protocol.test_subjects));
        }
        if let Some(dir) = &self.data_dir {
            let _ = writeln!(out, "data_dir={}", dir.display());
        }
        if !self.exclusions.is_empty() {
            let _ = writeln!(out, "exclude={}", self.exclusions.join(","));
        }
        out
    }
}

fn parse_usize_list(value: &str) -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
    value.split(',').map(|t| t.trim().parse()).collect()
}

fn join_usize(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
