//! Graph coloring: bipartiteness, greedy DSatur and budgeted exact DSatur.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Undirected graph as sorted adjacency lists.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_predicate(n: usize, edge: impl Fn(usize, usize) -> bool) -> Graph {
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if edge(i, j) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        Graph { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Two-coloring by breadth-first search, or `None` if an odd cycle exists.
pub fn two_color(g: &Graph) -> Option<Vec<usize>> {
    let n = g.len();
    let mut color = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        if color[s] != usize::MAX {
            continue;
        }
        color[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                if color[w] == usize::MAX {
                    color[w] = 1 - color[v];
                    queue.push_back(w);
                } else if color[w] == color[v] {
                    return None;
                }
            }
        }
    }
    Some(color)
}

struct Saturation {
    counts: Vec<u32>,
    sat: Vec<usize>,
    k: usize,
}

impl Saturation {
    fn new(n: usize, k: usize) -> Saturation {
        Saturation {
            counts: vec![0; n * k],
            sat: vec![0; n],
            k,
        }
    }

    fn add(&mut self, g: &Graph, v: usize, c: usize) {
        for &w in g.neighbors(v) {
            let slot = &mut self.counts[w * self.k + c];
            if *slot == 0 {
                self.sat[w] += 1;
            }
            *slot += 1;
        }
    }

    fn remove(&mut self, g: &Graph, v: usize, c: usize) {
        for &w in g.neighbors(v) {
            let slot = &mut self.counts[w * self.k + c];
            *slot -= 1;
            if *slot == 0 {
                self.sat[w] -= 1;
            }
        }
    }

    fn free(&self, v: usize, c: usize) -> bool {
        self.counts[v * self.k + c] == 0
    }
}

fn pick(g: &Graph, color: &[usize], s: &Saturation) -> Option<usize> {
    (0..g.len())
        .filter(|&v| color[v] == usize::MAX)
        .max_by_key(|&v| (s.sat[v], g.neighbors(v).len(), std::cmp::Reverse(v)))
}

/// Greedy DSatur coloring; returns one color per vertex.
pub fn dsatur_greedy(g: &Graph) -> Vec<usize> {
    let n = g.len();
    let k = g.adj.iter().map(Vec::len).max().unwrap_or(0) + 1;
    let mut color = vec![usize::MAX; n];
    let mut s = Saturation::new(n, k);
    while let Some(v) = pick(g, &color, &s) {
        let c = (0..k).find(|&c| s.free(v, c)).expect("degree bound");
        color[v] = c;
        s.add(g, v, c);
    }
    color
}

/// A coloring with at most `k` colors, `None` if none exists.
///
/// `k <= 2` is decided in polynomial time; larger `k` runs DSatur
/// backtracking limited to `budget` assignments.
pub fn color_with(g: &Graph, k: usize, budget: u64) -> Result<Option<Vec<usize>>> {
    let n = g.len();
    if n == 0 {
        return Ok(Some(Vec::new()));
    }
    match k {
        0 => return Ok(None),
        1 => return Ok((g.edge_count() == 0).then(|| vec![0; n])),
        2 => return Ok(two_color(g)),
        _ => {}
    }
    let greedy = dsatur_greedy(g);
    if greedy.iter().all(|&c| c < k) {
        return Ok(Some(greedy));
    }
    struct Frame {
        v: usize,
        next: usize,
        used_before: usize,
    }
    let mut color = vec![usize::MAX; n];
    let mut s = Saturation::new(n, k);
    let mut used = 0usize;
    let mut stack: Vec<Frame> = Vec::new();
    let mut nodes = 0u64;
    let mut descend = true;
    loop {
        if descend {
            match pick(g, &color, &s) {
                None => return Ok(Some(color)),
                Some(v) => stack.push(Frame {
                    v,
                    next: 0,
                    used_before: used,
                }),
            }
        }
        let Some(top) = stack.last_mut() else {
            return Ok(None);
        };
        let v = top.v;
        if color[v] != usize::MAX {
            s.remove(g, v, color[v]);
            color[v] = usize::MAX;
            used = top.used_before;
        }
        let limit = k.min(top.used_before + 1);
        match (top.next..limit).find(|&c| s.free(v, c)) {
            Some(c) => {
                top.next = c + 1;
                color[v] = c;
                s.add(g, v, c);
                used = used.max(c + 1);
                nodes += 1;
                if nodes > budget {
                    return Err(Error::BudgetExceeded {
                        resource: "coloring nodes",
                        limit: budget,
                        lower_bound: None,
                    });
                }
                descend = true;
            }
            None => {
                stack.pop();
                descend = false;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cycle(n: usize) -> Graph {
        Graph::from_predicate(n, |i, j| j == i + 1 || (i == 0 && j == n - 1))
    }

    #[test]
    fn cycles_and_cliques() {
        assert!(color_with(&cycle(6), 2, 10).unwrap().is_some());
        assert!(color_with(&cycle(5), 2, 10).unwrap().is_none());
        assert!(color_with(&cycle(5), 3, 10).unwrap().is_some());
        let k4 = Graph::from_predicate(4, |_, _| true);
        assert!(color_with(&k4, 3, 1000).unwrap().is_none());
        assert!(color_with(&k4, 4, 1000).unwrap().is_some());
    }

    fn proper(g: &Graph, c: &[usize]) -> bool {
        (0..g.len()).all(|v| g.neighbors(v).iter().all(|&w| c[v] != c[w]))
    }

    fn brute_chromatic(g: &Graph) -> usize {
        let n = g.len();
        for k in 1..=n.max(1) {
            let total = k.pow(n as u32);
            for code in 0..total {
                let c: Vec<usize> = (0..n).map(|i| code / k.pow(i as u32) % k).collect();
                if proper(g, &c) {
                    return k;
                }
            }
        }
        n
    }

    proptest! {
        #[test]
        fn exact_coloring_matches_brute_force(n in 1usize..7, bits in any::<u32>()) {
            let g = Graph::from_predicate(n, |i, j| bits >> ((i * 6 + j) % 32) & 1 == 1);
            let chi = brute_chromatic(&g);
            for k in 1..=n {
                let got = color_with(&g, k, u64::MAX).unwrap();
                prop_assert_eq!(got.is_some(), k >= chi);
                if let Some(c) = got {
                    prop_assert!(proper(&g, &c));
                    prop_assert!(c.iter().all(|&x| x < k));
                }
            }
            prop_assert!(proper(&g, &dsatur_greedy(&g)));
        }
    }
}
