//! Trajectorylet descriptors and PCA reduction.
//!
//! A trajectorylet is an L-frame window of the hip-centered joint vector
//! sequence, encoded as concatenated blocks: static positions, displacements
//! from the window's first frame, frame-to-frame velocities and optionally
//! accelerations. Block sizes per component (x0..x3) are L, L-1, L-2 and
//! L-3 copies of the 3J frame vector.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::{Error, Result};

/// Descriptor components, in concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    /// x0: static joint positions of every window frame.
    Static,
    /// x1: displacements of frames 1..L-1 from the first frame.
    Displacement,
    /// x2: frame-to-frame differences of the displacements.
    Velocity,
    /// x3: frame-to-frame differences of the velocities.
    Acceleration,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::Static,
        Component::Displacement,
        Component::Velocity,
        Component::Acceleration,
    ];

    /// Number of 3J sub-blocks this component contributes for window length L.
    pub fn block_frames(self, length: usize) -> usize {
        match self {
            Component::Static => length,
            Component::Displacement => length - 1,
            Component::Velocity => length - 2,
            Component::Acceleration => length - 3,
        }
    }

    /// Minimum window length the component is defined for.
    fn min_length(self) -> usize {
        match self {
            Component::Static => 2,
            Component::Displacement => 2,
            Component::Velocity => 3,
            Component::Acceleration => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Static => "x0",
            Component::Displacement => "x1",
            Component::Velocity => "x2",
            Component::Acceleration => "x3",
        }
    }

    pub fn parse(name: &str) -> Result<Component> {
        match name {
            "x0" => Ok(Component::Static),
            "x1" => Ok(Component::Displacement),
            "x2" => Ok(Component::Velocity),
            "x3" => Ok(Component::Acceleration),
            other => Err(Error::InvalidInput(format!("unknown component '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryletConfig {
    /// Window length L in frames.
    pub length: usize,
    /// Selected components, canonicalized to x0..x3 order.
    pub components: Vec<Component>,
    /// Fraction of the raw dimension kept by PCA, in (0, 1].
    pub pca_retain_fraction: f64,
}

impl Default for TrajectoryletConfig {
    fn default() -> Self {
        Self {
            length: 5,
            components: vec![
                Component::Static,
                Component::Displacement,
                Component::Velocity,
            ],
            pca_retain_fraction: 0.5,
        }
    }
}

impl TrajectoryletConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidInput("trajectorylet length must be >= 2".into()));
        }
        if self.components.is_empty() {
            return Err(Error::InvalidInput("component set must be nonempty".into()));
        }
        for &c in &self.components {
            if self.length < c.min_length() {
                return Err(Error::InvalidInput(format!(
                    "component {} requires L >= {}",
                    c.name(),
                    c.min_length()
                )));
            }
        }
        if !(self.pca_retain_fraction > 0.0 && self.pca_retain_fraction <= 1.0) {
            return Err(Error::InvalidInput(
                "pca_retain_fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Canonicalizes the component list to x0..x3 order, dropping duplicates.
    pub fn canonicalize(&mut self) {
        self.components.sort();
        self.components.dedup();
    }

    /// Raw descriptor dimension for a skeleton with `joint_count` joints.
    pub fn raw_dim(&self, joint_count: usize) -> usize {
        let frame_dim = 3 * joint_count;
        self.components
            .iter()
            .map(|c| c.block_frames(self.length) * frame_dim)
            .sum()
    }
}

/// One local descriptor with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectorylet {
    pub values: Vec<f64>,
    pub source_instance: usize,
    pub start_frame: usize,
    pub class_label: usize,
}

/// Extracts one descriptor per valid window start (all F-L+1 windows) from a
/// hip-centered frame sequence. Each frame vector has dimension 3J.
pub fn extract_trajectorylets(
    frames: &[Vec<f64>],
    config: &TrajectoryletConfig,
    source_instance: usize,
    class_label: usize,
) -> Result<Vec<Trajectorylet>> {
    config.validate()?;
    let length = config.length;
    if frames.len() < length {
        return Err(Error::InvalidInput(format!(
            "instance {source_instance}: {} frames is shorter than trajectorylet length {length}",
            frames.len()
        )));
    }
    let frame_dim = frames[0].len();
    if frames.iter().any(|f| f.len() != frame_dim) {
        return Err(Error::InvalidInput("inconsistent frame dimensions".into()));
    }
    let raw_dim: usize = config
        .components
        .iter()
        .map(|c| c.block_frames(length) * frame_dim)
        .sum();
    let mut out = Vec::with_capacity(frames.len() - length + 1);
    let mut displacement = vec![vec![0.0; frame_dim]; length];
    let mut velocity = vec![vec![0.0; frame_dim]; length];
    let mut acceleration = vec![vec![0.0; frame_dim]; length];
    for start in 0..=frames.len() - length {
        let window = &frames[start..start + length];
        for i in 1..length {
            for k in 0..frame_dim {
                displacement[i][k] = window[i][k] - window[0][k];
            }
        }
        for i in 2..length {
            for k in 0..frame_dim {
                velocity[i][k] = displacement[i][k] - displacement[i - 1][k];
            }
        }
        for i in 3..length {
            for k in 0..frame_dim {
                acceleration[i][k] = velocity[i][k] - velocity[i - 1][k];
            }
        }
        let mut values = Vec::with_capacity(raw_dim);
        for &c in &config.components {
            match c {
                Component::Static => {
                    for f in window {
                        values.extend_from_slice(f);
                    }
                }
                Component::Displacement => {
                    for d in &displacement[1..] {
                        values.extend_from_slice(d);
                    }
                }
                Component::Velocity => {
                    for v in &velocity[2..] {
                        values.extend_from_slice(v);
                    }
                }
                Component::Acceleration => {
                    for a in &acceleration[3..] {
                        values.extend_from_slice(a);
                    }
                }
            }
        }
        debug_assert_eq!(values.len(), raw_dim);
        out.push(Trajectorylet {
            values,
            source_instance,
            start_frame: start,
            class_label,
        });
    }
    Ok(out)
}

/// A fitted PCA reduction: `project(x) = basis * (x - mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// d x raw_dim, orthonormal rows ordered by descending eigenvalue.
    pub basis: DMatrix<f64>,
    pub retained_dim: usize,
    /// Eigenvalues of the retained directions, descending.
    pub eigenvalues: Vec<f64>,
}

/// Fits PCA on raw descriptors: sample mean, covariance eigendecomposition,
/// top ceil(retain_fraction * raw_dim) directions. Ties between equal
/// eigenvalues break toward the eigenvector whose first nonzero component
/// has the smaller axis index; every direction is sign-flipped so its
/// largest-magnitude entry is positive.
pub fn fit_pca(descriptors: &[Trajectorylet], retain_fraction: f64) -> Result<PcaModel> {
    if descriptors.len() < 2 {
        return Err(Error::InvalidInput(
            "PCA needs at least 2 descriptors".into(),
        ));
    }
    if !(retain_fraction > 0.0 && retain_fraction <= 1.0) {
        return Err(Error::InvalidInput(
            "retain_fraction must be in (0, 1]".into(),
        ));
    }
    let raw_dim = descriptors[0].values.len();
    for d in descriptors {
        if d.values.len() != raw_dim {
            return Err(Error::DimMismatch {
                expected: raw_dim,
                got: d.values.len(),
            });
        }
    }
    let n = descriptors.len();
    let mut mean = DVector::zeros(raw_dim);
    for d in descriptors {
        for (m, &v) in mean.iter_mut().zip(&d.values) {
            *m += v;
        }
    }
    mean /= n as f64;

    // Covariance accumulated over fixed chunks, merged in chunk order so the
    // result does not depend on thread scheduling.
    let chunk_size = 256;
    let partials: Vec<DMatrix<f64>> = descriptors
        .par_chunks(chunk_size)
        .map(|chunk| {
            let mut acc = DMatrix::zeros(raw_dim, raw_dim);
            let mut centered = DVector::zeros(raw_dim);
            for d in chunk {
                for (c, (&v, m)) in centered.iter_mut().zip(d.values.iter().zip(mean.iter())) {
                    *c = v - m;
                }
                acc.syger(1.0, &centered, &centered, 1.0);
            }
            acc
        })
        .collect();
    let mut cov = DMatrix::zeros(raw_dim, raw_dim);
    for p in partials {
        cov += p;
    }
    cov /= (n - 1) as f64;
    // syger fills the lower triangle only; mirror it.
    for r in 0..raw_dim {
        for c in r + 1..raw_dim {
            cov[(r, c)] = cov[(c, r)];
        }
    }

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..raw_dim).collect();
    let first_nonzero = |col: usize| -> usize {
        eig.eigenvectors
            .column(col)
            .iter()
            .position(|v| v.abs() > 1e-12)
            .unwrap_or(raw_dim)
    };
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then_with(|| first_nonzero(a).cmp(&first_nonzero(b)))
    });

    let retained_dim = (retain_fraction * raw_dim as f64).ceil() as usize;
    let retained_dim = retained_dim.clamp(1, raw_dim);
    let mut basis = DMatrix::zeros(retained_dim, raw_dim);
    let mut eigenvalues = Vec::with_capacity(retained_dim);
    for (row, &col) in order[..retained_dim].iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        // sign convention: largest-magnitude entry positive
        let mut lead = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = i;
            }
        }
        let flip = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in v.iter().enumerate() {
            basis[(row, i)] = flip * x;
        }
        eigenvalues.push(eig.eigenvalues[col]);
    }
    Ok(PcaModel {
        mean,
        basis,
        retained_dim,
        eigenvalues,
    })
}

/// Projects one raw descriptor into the retained subspace, carrying its
/// provenance over.
pub fn apply_pca(model: &PcaModel, descriptor: &Trajectorylet) -> Result<Trajectorylet> {
    if descriptor.values.len() != model.mean.len() {
        return Err(Error::DimMismatch {
            expected: model.mean.len(),
            got: descriptor.values.len(),
        });
    }
    let x = DVector::from_column_slice(&descriptor.values) - &model.mean;
    let projected = &model.basis * x;
    Ok(Trajectorylet {
        values: projected.iter().copied().collect(),
        source_instance: descriptor.source_instance,
        start_frame: descriptor.start_frame,
        class_label: descriptor.class_label,
    })
}

impl PcaModel {
    /// Text form: `d raw_dim`, mean row, then d basis rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.retained_dim, self.mean.len());
        push_row(&mut out, self.mean.iter());
        for r in 0..self.retained_dim {
            push_row(&mut out, self.basis.row(r).iter());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PcaModel> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty PCA model".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput("bad PCA header".into()))?;
        let [d, raw_dim] = dims[..] else {
            return Err(Error::InvalidInput("bad PCA header".into()));
        };
        let parse_row = |line: &str| -> Result<Vec<f64>> {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidInput("bad PCA row".into()))?;
            if row.len() != raw_dim {
                return Err(Error::DimMismatch {
                    expected: raw_dim,
                    got: row.len(),
                });
            }
            Ok(row)
        };
        let mean = parse_row(
            lines
                .next()
                .ok_or_else(|| Error::InvalidInput("missing PCA mean row".into()))?,
        )?;
        let mut basis = DMatrix::zeros(d, raw_dim);
        for r in 0..d {
            let row = parse_row(
                lines
                    .next()
                    .ok_or_else(|| Error::InvalidInput("missing PCA basis row".into()))?,
            )?;
            for (c, v) in row.into_iter().enumerate() {
                basis[(r, c)] = v;
            }
        }
        Ok(PcaModel {
            mean: DVector::from_vec(mean),
            basis,
            retained_dim: d,
            eigenvalues: Vec::new(),
        })
    }
}

fn push_row<'a>(out: &mut String, row: impl Iterator<Item = &'a f64>) {
    use std::fmt::Write as _;
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
        first = false;
    }
    out.push('\n');
}
