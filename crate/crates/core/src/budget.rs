//! Search budgets for the exponential kernels (clique enumeration, coloring).

use serde::Serialize;

pub const DEFAULT_CLIQUE_EXPANSIONS: u64 = 1_000_000;
pub const DEFAULT_COLORING_NODES: u64 = 100_000;

/// Environment variable overriding the default budgets.
///
/// Accepts either a single integer (clique expansions) or a comma separated
/// list such as `cliques=200000,coloring=5000`.
pub const BUDGET_ENV: &str = "COARSETK_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budgets {
    pub clique_expansions: u64,
    pub coloring_nodes: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            clique_expansions: DEFAULT_CLIQUE_EXPANSIONS,
            coloring_nodes: DEFAULT_COLORING_NODES,
        }
    }
}

impl Budgets {
    pub fn from_env() -> Budgets {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => Budgets::parse(&v).unwrap_or_default(),
            Err(_) => Budgets::default(),
        }
    }

    pub fn parse(spec: &str) -> Option<Budgets> {
        let mut b = Budgets::default();
        let spec = spec.trim();
        if let Ok(v) = spec.parse::<u64>() {
            b.clique_expansions = v;
            return Some(b);
        }
        for part in spec.split(',') {
            let (key, value) = part.split_once(['=', ':'])?;
            let value: u64 = value.trim().parse().ok()?;
            match key.trim() {
                "cliques" | "clique" => b.clique_expansions = value,
                "coloring" | "colouring" => b.coloring_nodes = value,
                _ => return None,
            }
        }
        Some(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(Budgets::parse("42").unwrap().clique_expansions, 42);
        let b = Budgets::parse("cliques=7, coloring=9").unwrap();
        assert_eq!((b.clique_expansions, b.coloring_nodes), (7, 9));
        assert!(Budgets::parse("bogus=1").is_none());
    }
}
