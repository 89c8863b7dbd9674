//! Dense Prim over a cost closure. Complete graphs at desk scale, so the
//! O(n^2) variant is the right tool.

/// Runs Prim from `start` over vertices `0..n` with costs from `cost`.
/// Returns the parent of each vertex (`start` is its own parent). Ties are
/// broken toward the lowest vertex id, which keeps results deterministic.
pub(crate) fn prim_parents<F: Fn(usize, usize) -> f64>(n: usize, start: usize, cost: F) -> Vec<usize> {
    let mut parent = vec![start; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut in_tree = vec![false; n];
    dist[start] = 0.0;
    for _ in 0..n {
        let mut best = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (best == usize::MAX || dist[v] < dist[best]) {
                best = v;
            }
        }
        in_tree[best] = true;
        for v in 0..n {
            if !in_tree[v] {
                let c = cost(best, v);
                if c < dist[v] {
                    dist[v] = c;
                    parent[v] = best;
                }
            }
        }
    }
    parent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prim_finds_the_cheap_chain() {
        // 0 - 1 - 2 chain is cheaper than any direct 0 - 2 arc.
        let costs = [[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]];
        let parent = prim_parents(3, 0, |i, j| costs[i][j]);
        assert_eq!(parent, vec![0, 0, 1]);
    }
}
