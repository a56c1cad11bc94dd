//! Maximal clique enumeration (Bron–Kerbosch with Tomita pivoting).

use std::ops::ControlFlow;

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::metric::Walk;

struct Frame {
    p: BitSet,
    x: BitSet,
    cands: Vec<usize>,
    next: usize,
    depth: usize,
}

fn pivot_candidates(p: &BitSet, x: &BitSet, adj: &[BitSet]) -> Vec<usize> {
    let mut best = None;
    let mut best_count = 0;
    for u in p.iter().chain(x.iter()) {
        let c = p.intersection_count(&adj[u]);
        if best.is_none() || c > best_count {
            best = Some(u);
            best_count = c;
        }
    }
    match best {
        Some(u) => p.difference(&adj[u]).iter().collect(),
        None => Vec::new(),
    }
}

/// Visits every maximal clique of the graph on `0..n` given by `adjacent`
/// (assumed symmetric and irreflexive on distinct pairs). Cliques are passed
/// as sorted index slices. `budget` bounds the number of branch expansions.
pub fn maximal_cliques(
    n: usize,
    adjacent: &dyn Fn(usize, usize) -> bool,
    budget: u64,
    visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
) -> Result<Walk> {
    if n == 0 {
        return Ok(Walk::Complete);
    }
    let mut adj = vec![BitSet::new(n); n];
    for i in 0..n {
        for j in i + 1..n {
            if adjacent(i, j) {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut r: Vec<usize> = Vec::new();
    let mut out: Vec<usize> = Vec::new();
    let p = BitSet::full(n);
    let x = BitSet::new(n);
    let cands = pivot_candidates(&p, &x, &adj);
    let mut stack = vec![Frame {
        p,
        x,
        cands,
        next: 0,
        depth: 0,
    }];
    let mut expansions = 0u64;
    while let Some(top) = stack.last_mut() {
        if top.next == top.cands.len() {
            stack.pop();
            continue;
        }
        let v = top.cands[top.next];
        top.next += 1;
        expansions += 1;
        if expansions > budget {
            return Err(Error::BudgetExceeded {
                resource: "clique expansions",
                limit: budget,
                lower_bound: None,
            });
        }
        r.truncate(top.depth);
        r.push(v);
        let np = top.p.intersection(&adj[v]);
        let nx = top.x.intersection(&adj[v]);
        top.p.remove(v);
        top.x.insert(v);
        if np.is_empty() {
            if nx.is_empty() {
                out.clear();
                out.extend_from_slice(&r);
                out.sort_unstable();
                if visit(&out).is_break() {
                    return Ok(Walk::Stopped);
                }
            }
            continue;
        }
        let cands = pivot_candidates(&np, &nx, &adj);
        let depth = r.len();
        stack.push(Frame {
            p: np,
            x: nx,
            cands,
            next: 0,
            depth,
        });
    }
    Ok(Walk::Complete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn collect(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let adjacent = |i: usize, j: usize| edges.contains(&(i.min(j), i.max(j)));
        let mut out = Vec::new();
        maximal_cliques(n, &adjacent, u64::MAX, &mut |c| {
            out.push(c.to_vec());
            ControlFlow::Continue(())
        })
        .unwrap();
        out.sort();
        out
    }

    #[test]
    fn small_graphs() {
        assert_eq!(collect(3, &[]), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(collect(3, &[(0, 1), (1, 2)]), vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(collect(4, &[(0, 1), (0, 2), (1, 2), (2, 3)]), vec![vec![0, 1, 2], vec![2, 3]]);
    }

    #[test]
    fn budget_is_enforced() {
        let err = maximal_cliques(20, &|_, _| false, 5, &mut |_| ControlFlow::Continue(())).unwrap_err();
        assert!(err.is_budget());
    }

    fn brute_force(n: usize, adj: &dyn Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
        let is_clique = |m: u32| {
            (0..n).all(|i| (0..n).all(|j| i == j || m & (1 << i) == 0 || m & (1 << j) == 0 || adj(i, j)))
        };
        let mut out = Vec::new();
        for m in 1u32..(1 << n) {
            if is_clique(m) && (0..n).all(|v| m & (1 << v) != 0 || !is_clique(m | (1 << v))) {
                out.push((0..n).filter(|&i| m & (1 << i) != 0).collect());
            }
        }
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..9, bits in any::<u64>()) {
            let bit = |i: usize, j: usize| {
                let (a, b) = (i.min(j), i.max(j));
                bits >> ((a * 8 + b) % 64) & 1 == 1
            };
            let mut got = Vec::new();
            maximal_cliques(n, &bit, u64::MAX, &mut |c| {
                got.push(c.to_vec());
                ControlFlow::Continue(())
            })
            .unwrap();
            got.sort();
            prop_assert_eq!(got, brute_force(n, &bit));
        }
    }
}
