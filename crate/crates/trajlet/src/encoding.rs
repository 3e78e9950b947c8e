//! Action-level encodings: max-pooled template-detector scores, optionally
//! over a temporal pyramid.

use crate::clustering::TemplateDetectorSet;
use crate::svm;
use crate::trajectorylet::Trajectorylet;
use crate::{Error, Result};

/// A pooled action representation of length K * (2^levels - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEncoding {
    pub values: Vec<f64>,
    pub levels: usize,
    pub instance: usize,
    pub label: Option<usize>,
}

fn max_pool(template: &TemplateDetectorSet, trajectorylets: &[&Trajectorylet]) -> Result<Vec<f64>> {
    let mut pooled = Vec::with_capacity(template.detectors.len());
    for det in &template.detectors {
        let mut best = f64::NEG_INFINITY;
        for t in trajectorylets {
            best = best.max(svm::score(det, t)?);
        }
        pooled.push(best);
    }
    Ok(pooled)
}

/// Flat encoding: component k is the max of detector k's score over the
/// instance's trajectorylets.
pub fn encode(template: &TemplateDetectorSet, trajectorylets: &[Trajectorylet]) -> Result<ActionEncoding> {
    encode_pyramid(template, trajectorylets, 1)
}

/// Temporal-pyramid encoding. Level p splits the trajectorylets (in start
/// frame order) into 2^(p-1) contiguous segments with ceiling division
/// (left-heavy); each segment is max-pooled and the blocks are concatenated
/// in level order. A segment left empty by a short instance receives the
/// level-1 block values.
pub fn encode_pyramid(
    template: &TemplateDetectorSet,
    trajectorylets: &[Trajectorylet],
    levels: usize,
) -> Result<ActionEncoding> {
    if trajectorylets.is_empty() {
        return Err(Error::InvalidInput("instance has no trajectorylets".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidInput("pyramid needs at least 1 level".into()));
    }
    let mut ordered: Vec<&Trajectorylet> = trajectorylets.iter().collect();
    ordered.sort_by_key(|t| t.start_frame);
    let n = ordered.len();
    let root = max_pool(template, &ordered)?;
    let mut values = Vec::with_capacity(template.detectors.len() * ((1 << levels) - 1));
    values.extend_from_slice(&root);
    for level in 2..=levels {
        let segments = 1usize << (level - 1);
        let base = n / segments;
        let extra = n % segments;
        let mut start = 0;
        for s in 0..segments {
            let len = base + usize::from(s < extra);
            if len == 0 {
                values.extend_from_slice(&root);
            } else {
                values.extend(max_pool(template, &ordered[start..start + len])?);
            }
            start += len;
        }
    }
    Ok(ActionEncoding {
        values,
        levels,
        instance: trajectorylets[0].source_instance,
        label: Some(trajectorylets[0].class_label),
    })
}

/// Text export: one instance per line, `label v_1 ... v_dim`.
pub fn encodings_to_text(encodings: &[ActionEncoding]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for e in encodings {
        let _ = write!(out, "{}", e.label.unwrap_or(0));
        for v in &e.values {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}
