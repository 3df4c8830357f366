use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::SparseMatrix;

/// Minimum-degree ordering of the symmetric pattern of `a`, computed on the
/// explicit elimination graph. Ties are broken by the lower node index, so the
/// result is deterministic. Returns `perm` with `perm[k]` the k-th pivot.
pub fn minimum_degree(a: &SparseMatrix) -> Vec<usize> {
    minimum_degree_deferred(a, &vec![false; a.nrows()])
}

/// Minimum-degree ordering in which the `deferred` unknowns are eliminated
/// after all others.
pub fn minimum_degree_deferred(a: &SparseMatrix, deferred: &[bool]) -> Vec<usize> {
    let n = a.nrows();
    assert_eq!(deferred.len(), n, "one flag per unknown");
    let key = |v: usize, deg: usize| Reverse((deferred[v], deg, v));
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let mut eliminated = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<(bool, usize, usize)>> = (0..n).map(|i| key(i, adj[i].len())).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some(Reverse((_, deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nb = std::mem::take(&mut adj[v]);
        for &u in &nb {
            let old = std::mem::take(&mut adj[u]);
            let mut merged = Vec::with_capacity(old.len() + nb.len());
            for &w in old.iter().chain(nb.iter()) {
                if w != u && w != v && !eliminated[w] && mark[w] != u {
                    mark[w] = u;
                    merged.push(w);
                }
            }
            for &w in &merged {
                mark[w] = usize::MAX;
            }
            adj[u] = merged;
            heap.push(key(u, adj[u].len()));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    #[test]
    fn ordering_is_a_permutation() {
        let n = 30;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i + 1 < n {
                b.add_sym(i, i + 1, -1.0);
            }
            b.add_sym(0, i, 0.1);
        }
        let mut p = minimum_degree(&b.build());
        assert_eq!(p.len(), n);
        p.sort_unstable();
        assert!(p.iter().enumerate().all(|(k, &v)| k == v));
    }

    #[test]
    fn arrow_hub_goes_last() {
        let n = 10;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 1.0);
            b.add_sym(0, i, 1.0);
        }
        let p = minimum_degree(&b.build());
        assert!(!p[..n - 2].contains(&0));
    }

    #[test]
    fn deferred_unknowns_come_last() {
        let n = 12;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i + 1 < n {
                b.add_sym(i, i + 1, -1.0);
            }
        }
        let defer: Vec<bool> = (0..n).map(|i| i % 4 == 1).collect();
        let p = minimum_degree_deferred(&b.build(), &defer);
        assert!(p[..9].iter().all(|&v| !defer[v]));
        assert!(p[9..].iter().all(|&v| defer[v]));
    }
}
