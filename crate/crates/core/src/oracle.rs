//! Exhaustive ground truth for tiny instances.
//!
//! A rainbow spanning tree under a (2m−1)-coloring uses each color exactly
//! once, so the search picks one edge from every color class in turn and
//! abandons a branch as soon as the chosen edges close a cycle.

use thiserror::Error;

use crate::coloring::{ColoredEdge, EdgeColoring};

pub const DEFAULT_ENUMERATION_CAP: usize = 10;
pub const DEFAULT_PACKING_CAP: usize = 8;
/// Edge masks are `u128`, so 16 vertices (120 edges) is a hard ceiling.
const MASK_LIMIT: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance has {n} vertices, above the cap of {cap}")]
    InstanceTooLarge { n: usize, cap: usize },
}

fn check_cap(n: usize, cap: usize) -> Result<(), OracleError> {
    let cap = cap.min(MASK_LIMIT);
    if n > cap {
        Err(OracleError::InstanceTooLarge { n, cap })
    } else {
        Ok(())
    }
}

/// All rainbow spanning trees, each as a sorted edge list; the list itself is
/// sorted.
pub fn enumerate_rainbow_spanning_trees(
    coloring: &EdgeColoring,
    cap: usize,
) -> Result<Vec<Vec<ColoredEdge>>, OracleError> {
    check_cap(coloring.n(), cap)?;
    let classes: Vec<Vec<ColoredEdge>> = coloring.colors().map(|c| coloring.color_class(c)).collect();
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(classes.len());
    let labels: Vec<usize> = (0..coloring.n()).collect();
    extend(&classes, &labels, &mut chosen, &mut out);
    for tree in &mut out {
        tree.sort();
    }
    out.sort();
    Ok(out)
}

fn extend(
    classes: &[Vec<ColoredEdge>],
    labels: &[usize],
    chosen: &mut Vec<ColoredEdge>,
    out: &mut Vec<Vec<ColoredEdge>>,
) {
    let Some((class, rest)) = classes.split_first() else {
        out.push(chosen.clone());
        return;
    };
    for &e in class {
        let (a, b) = (labels[e.u().0], labels[e.v().0]);
        if a == b {
            continue;
        }
        let merged: Vec<usize> = labels.iter().map(|&l| if l == b { a } else { l }).collect();
        chosen.push(e);
        extend(rest, &merged, chosen, out);
        chosen.pop();
    }
}

fn edge_bit(n: usize, e: &ColoredEdge) -> u128 {
    let (u, v) = (e.u().0, e.v().0);
    // Row-major index into the strict upper triangle.
    let idx = u * (2 * n - u - 1) / 2 + (v - u - 1);
    1u128 << idx
}

/// Largest number of pairwise edge-disjoint rainbow spanning trees.
pub fn max_disjoint_rainbow_trees(coloring: &EdgeColoring, cap: usize) -> Result<usize, OracleError> {
    check_cap(coloring.n(), cap)?;
    let n = coloring.n();
    let masks: Vec<u128> = enumerate_rainbow_spanning_trees(coloring, cap)?
        .iter()
        .map(|t| t.iter().fold(0u128, |acc, e| acc | edge_bit(n, e)))
        .collect();
    let mut best = 0;
    pack(&masks, 0, 0, 0, n, coloring.m(), &mut best);
    Ok(best)
}

fn pack(masks: &[u128], start: usize, used: u128, depth: usize, n: usize, limit: usize, best: &mut usize) {
    *best = (*best).max(depth);
    if *best == limit {
        return;
    }
    let free = n * (n - 1) / 2 - used.count_ones() as usize;
    if depth + free / (n - 1) <= *best {
        return;
    }
    for (j, &mask) in masks.iter().enumerate().skip(start) {
        if mask & used == 0 {
            pack(masks, j + 1, used | mask, depth + 1, n, limit, best);
            if *best == limit {
                return;
            }
        }
    }
}
