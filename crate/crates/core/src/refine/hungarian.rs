//! Maximum-weight matching that covers every device, solved as a
//! rectangular assignment problem with the potential-based Hungarian
//! method in `O(n^2 m)`.

use super::rounding::RoundingGraph;
use crate::{Error, Result};

/// Matched `(device, node, weight)` triples ordered by device.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize, f64)>,
}

impl Matching {
    pub fn total_weight(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }

    /// Node matched to `device`.
    pub fn node_of(&self, device: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == device).map(|p| p.1)
    }
}

/// Minimum-cost assignment of every row of the `rows x cols` cost matrix
/// to a distinct column (`rows <= cols`). Returns the column chosen per
/// row. Ties resolve toward lower row and column indices.
pub fn solve_assignment(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "assignment needs rows <= cols");
    assert_eq!(cost.len(), rows * cols);
    let a = |i: usize, j: usize| cost[(i - 1) * cols + (j - 1)];
    // 1-based with index 0 as the virtual root
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assigned = vec![0usize; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            assigned[p[j] - 1] = j - 1;
        }
    }
    assigned
}

/// Matching of maximum total weight among those that match every device.
pub fn max_weight_complete_matching(graph: &RoundingGraph) -> Result<Matching> {
    let n = graph.num_devices;
    let k = graph.nodes.len();
    if n == 0 {
        return Ok(Matching { pairs: Vec::new() });
    }
    if k < n {
        return Err(Error::NoCompleteMatching { device: k });
    }
    // Non-edges cost more than any complete matching over real edges can
    // save, so they are used only when no such matching exists.
    let forbidden = n as f64 + 1.0;
    let mut cost = vec![forbidden; n * k];
    let mut weight: Vec<Option<f64>> = vec![None; n * k];
    for e in &graph.edges {
        let cell = e.device * k + e.node;
        let w = weight[cell].map_or(e.weight, |w| w + e.weight);
        weight[cell] = Some(w);
        cost[cell] = -w;
    }
    let cols = solve_assignment(&cost, n, k);
    let mut pairs = Vec::with_capacity(n);
    for (i, &node) in cols.iter().enumerate() {
        match weight[i * k + node] {
            Some(w) => pairs.push((i, node, w)),
            None => return Err(Error::NoCompleteMatching { device: i }),
        }
    }
    Ok(Matching { pairs })
}
