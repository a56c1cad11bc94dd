use serde::Serialize;

use super::UltrametricSpace;
use crate::dist::Dist;
use crate::metric::MetricSpace;

fn quote(label: &str) -> String {
    if label.chars().any(|c| "(),:;[]' \t".contains(c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

/// Newick tree of the level hierarchy: leaves are bottom elements labeled by
/// their least point, branch lengths are level differences, and unary nodes
/// are merged into their child.
pub fn newick(u: &UltrametricSpace) -> String {
    let all: Vec<usize> = (0..u.len()).collect();
    let (s, _) = node(u, u.levels() - 1, &all);
    format!("{s};")
}

fn node(u: &UltrametricSpace, k: usize, leaves: &[usize]) -> (String, usize) {
    if k == 0 {
        return (quote(&u.label(leaves[0])), 0);
    }
    let row = &u.chains()[k - 1];
    let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
    for &leaf in leaves {
        match groups.iter_mut().find(|g| g.0 == row[leaf]) {
            Some(g) => g.1.push(leaf),
            None => groups.push((row[leaf], vec![leaf])),
        }
    }
    if groups.len() == 1 {
        return node(u, k - 1, leaves);
    }
    let parts: Vec<String> = groups
        .iter()
        .map(|(_, g)| {
            let (s, level) = node(u, k - 1, g);
            format!("{s}:{}", k - level)
        })
        .collect();
    (format!("({})", parts.join(",")), k)
}

/// Leaf distance matrix dump.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceMatrix {
    pub space: String,
    pub base: u64,
    pub leaves: Vec<String>,
    pub distances: Vec<Vec<Dist>>,
}

pub fn distance_matrix(u: &UltrametricSpace) -> DistanceMatrix {
    let n = u.len();
    DistanceMatrix {
        space: u.id().to_string(),
        base: u.base(),
        leaves: (0..n).map(|i| u.label(i)).collect(),
        distances: (0..n).map(|i| (0..n).map(|j| u.dist(i, j)).collect()).collect(),
    }
}
