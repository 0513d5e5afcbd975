//! Reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use super::crs::CrsMatrix;
use crate::error::{Error, Result};

/// Adjacency of the symmetrized pattern, without self loops.
fn symmetric_adjacency(a: &CrsMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (r, c, _) in a.triplets() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Breadth-first level structure from `root`, restricted to unvisited nodes.
fn levels(adj: &[Vec<usize>], root: usize, visited: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = visited.to_vec();
    seen[root] = true;
    let mut out = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &u in out.last().unwrap() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        out.push(next);
    }
}

/// George-Liu pseudo-peripheral node search.
fn pseudo_peripheral(adj: &[Vec<usize>], start: usize, visited: &[bool]) -> usize {
    let mut root = start;
    let mut depth = levels(adj, root, visited).len();
    loop {
        let structure = levels(adj, root, visited);
        let candidate = *structure
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&v| (adj[v].len(), v))
            .unwrap();
        let candidate_depth = levels(adj, candidate, visited).len();
        if candidate_depth <= depth {
            return root;
        }
        root = candidate;
        depth = candidate_depth;
    }
}

/// Returns the symmetrically permuted matrix and the permutation (`perm[new] = old`).
///
/// Non-symmetric patterns are symmetrized for the ordering only; the returned
/// matrix keeps the original entries.
pub fn rcm_reorder(a: &CrsMatrix) -> Result<(CrsMatrix, Vec<usize>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidMatrix(format!(
            "RCM needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let adj = symmetric_adjacency(a);
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    // Components are started from their lowest-degree node.
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| (adj[v].len(), v));
    for s in starts {
        if visited[s] {
            continue;
        }
        let root = pseudo_peripheral(&adj, s, &visited);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (adj[v].len(), v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    let permuted = permute_symmetric(a, &order)?;
    Ok((permuted, order))
}

/// `B[i][j] = A[perm[i]][perm[j]]`.
pub fn permute_symmetric(a: &CrsMatrix, perm: &[usize]) -> Result<CrsMatrix> {
    let n = a.nrows();
    if perm.len() != n || a.ncols() != n {
        return Err(Error::InvalidMatrix("permutation does not match matrix size".into()));
    }
    let mut inverse = vec![usize::MAX; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n || inverse[old] != usize::MAX {
            return Err(Error::InvalidMatrix("not a permutation".into()));
        }
        inverse[old] = new;
    }
    CrsMatrix::from_triplets(
        n,
        n,
        a.triplets().map(|(r, c, v)| (inverse[r], inverse[c], v)),
    )
}
