//! Reachability and SCC expectations computed by transitive closure.

use std::collections::BTreeSet;

use super::random_fsm::RandomFsm;

pub fn state_name(i: usize) -> String {
    format!("S{i}")
}

fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for i in 0..n {
        r[i][i] = true;
    }
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

pub struct Expected {
    pub reachable: BTreeSet<String>,
    pub deadlocks: BTreeSet<String>,
    /// Each trap sorted by name.
    pub traps: BTreeSet<Vec<String>>,
    pub unreachable: BTreeSet<String>,
}

pub fn expected(fsm: &RandomFsm) -> Expected {
    let n = fsm.states;
    let r = closure(n, &fsm.edges);
    let reach: Vec<usize> = (0..n).filter(|&i| r[0][i]).collect();
    let deadlocks = reach
        .iter()
        .copied()
        .filter(|&s| fsm.edges.iter().filter(|e| e.0 == s).all(|e| e.1 == s))
        .filter(|&s| fsm.edges.iter().any(|&(p, t)| t == s && p != s && r[0][p]))
        .map(state_name)
        .collect();
    // mutual-reachability classes among reachable states
    let mut traps = BTreeSet::new();
    for &s in &reach {
        let class: Vec<usize> = reach.iter().copied().filter(|&t| r[s][t] && r[t][s]).collect();
        let closed = fsm.edges.iter().all(|&(a, b)| !class.contains(&a) || class.contains(&b));
        if class.len() >= 2 && closed && class.len() != reach.len() {
            let mut names: Vec<String> = class.into_iter().map(state_name).collect();
            names.sort();
            traps.insert(names);
        }
    }
    Expected {
        reachable: reach.iter().copied().map(state_name).collect(),
        deadlocks,
        traps,
        unreachable: (1..n).filter(|&i| !r[0][i]).map(state_name).collect(),
    }
}
