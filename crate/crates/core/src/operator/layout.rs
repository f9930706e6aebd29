//! Index bookkeeping for operators on ordered tensor-product supports.
//!
//! Matrices are row-major over the support: the first subsystem is the most
//! significant digit of a basis index.

use super::Subsystem;
use crate::error::{Error, Result};

/// Offsets splitting a full basis index into a (selected, rest) pair.
///
/// `full = sub[s] + rest[r]` where `s` runs over the selected subsystems in
/// the order they were requested and `r` over the remaining ones in support
/// order.
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub sub: Vec<usize>,
    pub rest: Vec<usize>,
    pub rest_positions: Vec<usize>,
}

pub(crate) fn strides(support: &[Subsystem]) -> Vec<usize> {
    let mut out = vec![1usize; support.len()];
    for k in (0..support.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * support[k + 1].dim;
    }
    out
}

fn offsets(support: &[Subsystem], strides: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &p in positions {
        let d = support[p].dim;
        let mut next = Vec::with_capacity(out.len() * d);
        for &base in &out {
            for digit in 0..d {
                next.push(base + digit * strides[p]);
            }
        }
        out = next;
    }
    out
}

/// Positions of `labels` inside `support`, in the order of `labels`.
pub(crate) fn positions_of(support: &[Subsystem], labels: &[usize]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            support
                .iter()
                .position(|s| s.label == *l)
                .ok_or(Error::UnknownLabel(*l))
        })
        .collect()
}

pub(crate) fn split(support: &[Subsystem], positions: &[usize]) -> Split {
    let st = strides(support);
    let rest_positions: Vec<usize> = (0..support.len()).filter(|p| !positions.contains(p)).collect();
    Split {
        sub: offsets(support, &st, positions),
        rest: offsets(support, &st, &rest_positions),
        rest_positions,
    }
}

/// For every index of `target` order, the matching index in `source` order.
/// Both must hold the same subsystems.
pub(crate) fn permutation(source: &[Subsystem], target: &[Subsystem]) -> Result<Vec<usize>> {
    let labels: Vec<usize> = target.iter().map(|s| s.label).collect();
    let positions = positions_of(source, &labels)?;
    let st = strides(source);
    Ok(offsets(source, &st, &positions))
}

pub(crate) fn check_distinct(support: &[Subsystem]) -> Result<()> {
    for (k, s) in support.iter().enumerate() {
        if support[..k].iter().any(|t| t.label == s.label) {
            return Err(Error::DuplicateLabel(s.label));
        }
    }
    Ok(())
}

pub(crate) fn same_set(a: &[Subsystem], b: &[Subsystem]) -> bool {
    a.len() == b.len() && a.iter().all(|s| b.contains(s))
}

pub(crate) fn is_subset(a: &[Subsystem], b: &[Subsystem]) -> bool {
    a.iter().all(|s| b.contains(s))
}

/// Canonical union of two supports: ascending labels.
pub(crate) fn union(a: &[Subsystem], b: &[Subsystem]) -> Result<Vec<Subsystem>> {
    let mut out: Vec<Subsystem> = a.to_vec();
    for s in b {
        match out.iter().find(|t| t.label == s.label) {
            Some(t) if t.dim != s.dim => {
                return Err(Error::DimensionConflict { label: s.label, expected: t.dim, found: s.dim })
            }
            Some(_) => {}
            None => out.push(*s),
        }
    }
    out.sort();
    Ok(out)
}
