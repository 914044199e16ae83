//! Fractional decisions and the bipartite rounding graph.
//!
//! Each strategy column `j` with total fractional mass `S_j` gets
//! `ceil(S_j)` virtual slots. Devices are poured into the slots in index
//! order; a device whose weight straddles a slot boundary is split across
//! the two adjacent slots, and every device left after the last boundary
//! attaches to the final slot. Every slot therefore receives at most one
//! unit of weight and every device exactly its row (one unit), so the
//! graph carries a fractional perfect matching of the devices.

use crate::{Error, Result};

/// Comparison slack for cumulative sums against slot boundaries.
pub const SLOT_TOL: f64 = 1e-12;

/// Row-stochastic `N x (M+2)` matrix: column 0 local, `1..=M` small cells,
/// `M+1` macro cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalDecision {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
}

impl FractionalDecision {
    pub fn num_devices(&self) -> usize {
        self.rows
    }

    pub fn num_strategies(&self) -> usize {
        self.cols
    }

    pub fn get(&self, device: usize, strategy: usize) -> f64 {
        self.w[device * self.cols + strategy]
    }

    pub fn row(&self, device: usize) -> &[f64] {
        &self.w[device * self.cols..(device + 1) * self.cols]
    }

    pub fn column_sum(&self, strategy: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, strategy)).sum()
    }
}

/// Scales each row of `raw` (`cols` wide) to unit sum. Entries where
/// `mask` is false are forced to zero first; a row with no mass left
/// becomes uniform over its allowed entries.
pub fn normalize_rows(raw: &[f64], cols: usize, mask: Option<&[bool]>) -> Result<FractionalDecision> {
    if cols == 0 || raw.len() % cols != 0 {
        return Err(Error::Dimension {
            what: "fractional decision",
            expected: cols,
            got: raw.len(),
        });
    }
    if let Some(mask) = mask {
        if mask.len() != raw.len() {
            return Err(Error::Dimension {
                what: "strategy mask",
                expected: raw.len(),
                got: mask.len(),
            });
        }
    }
    let rows = raw.len() / cols;
    let allowed = |k: usize| mask.is_none_or(|m| m[k]);
    let mut w = vec![0.0; raw.len()];
    for i in 0..rows {
        let mut sum = 0.0;
        for j in 0..cols {
            let k = i * cols + j;
            let v = raw[k];
            if v.is_nan() {
                return Err(Error::NonFinite("raw decision"));
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value: v });
            }
            if allowed(k) {
                w[k] = v;
                sum += v;
            }
        }
        let row = &mut w[i * cols..(i + 1) * cols];
        if sum > 0.0 && sum.is_finite() {
            row.iter_mut().for_each(|v| *v /= sum);
        } else {
            let open = (0..cols).filter(|&j| allowed(i * cols + j)).count();
            if open == 0 {
                return Err(Error::Unrefined { device: i });
            }
            for (j, v) in row.iter_mut().enumerate() {
                *v = if allowed(i * cols + j) { 1.0 / open as f64 } else { 0.0 };
            }
        }
    }
    Ok(FractionalDecision { rows, cols, w })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VirtualNode {
    pub strategy: usize,
    /// 1-based slot within the strategy.
    pub slot: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub device: usize,
    pub node: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingGraph {
    pub num_devices: usize,
    pub nodes: Vec<VirtualNode>,
    pub edges: Vec<Edge>,
}

impl RoundingGraph {
    /// Summed weight at each virtual node.
    pub fn node_load(&self) -> Vec<f64> {
        let mut load = vec![0.0; self.nodes.len()];
        for e in &self.edges {
            load[e.node] += e.weight;
        }
        load
    }

    /// Summed weight at each device.
    pub fn device_load(&self) -> Vec<f64> {
        let mut load = vec![0.0; self.num_devices];
        for e in &self.edges {
            load[e.device] += e.weight;
        }
        load
    }
}

/// Number of slots for a column of total mass `sum`.
pub fn slot_count(sum: f64) -> usize {
    if sum <= 0.0 {
        0
    } else {
        ((sum - SLOT_TOL).ceil() as usize).max(1)
    }
}

pub fn build_rounding_graph(w: &FractionalDecision) -> RoundingGraph {
    let n = w.num_devices();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for j in 0..w.num_strategies() {
        let slots = slot_count(w.column_sum(j));
        if slots == 0 {
            continue;
        }
        let base = nodes.len();
        nodes.extend((1..=slots).map(|slot| VirtualNode { strategy: j, slot }));
        let mut edge = |device: usize, slot: usize, weight: f64| {
            edges.push(Edge {
                device,
                node: base + slot - 1,
                weight,
            })
        };

        let mut cum = 0.0;
        let mut s = 1usize;
        for i in 0..n {
            let wij = w.get(i, j);
            if wij <= 0.0 {
                continue;
            }
            if s == slots {
                edge(i, s, wij);
                continue;
            }
            let boundary = s as f64;
            let next = cum + wij;
            if next < boundary - SLOT_TOL {
                edge(i, s, wij);
            } else if next <= boundary + SLOT_TOL {
                edge(i, s, wij);
                s += 1;
            } else {
                edge(i, s, boundary - cum);
                edge(i, s + 1, next - boundary);
                s += 1;
            }
            cum = next;
        }
    }
    RoundingGraph {
        num_devices: n,
        nodes,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn normalize_examples() {
        let w = normalize_rows(&[0.2, 0.3, 0.5], 3, None).unwrap();
        assert_eq!(w.row(0), &[0.2, 0.3, 0.5]);
        let w = normalize_rows(&[2.0, 3.0, 5.0], 3, None).unwrap();
        assert!(w.row(0).iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| close(*a, b)));
        let w = normalize_rows(&[0.0, 0.0, 0.0], 3, None).unwrap();
        assert_eq!(w.row(0), &[1.0 / 3.0; 3]);
        assert!(matches!(
            normalize_rows(&[0.1, -0.2, 0.5], 3, None),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn mask_zeroes_and_uniform_fallback() {
        let mask = [true, false, true];
        let w = normalize_rows(&[1.0, 5.0, 1.0], 3, Some(&mask)).unwrap();
        assert_eq!(w.row(0), &[0.5, 0.0, 0.5]);
        let w = normalize_rows(&[0.0, 5.0, 0.0], 3, Some(&mask)).unwrap();
        assert_eq!(w.row(0), &[0.5, 0.0, 0.5]);
    }

    fn single_column(col: &[f64]) -> FractionalDecision {
        // pad a second column so rows still sum to one
        let mut raw = Vec::new();
        for &v in col {
            raw.extend([v, 1.0 - v]);
        }
        FractionalDecision {
            rows: col.len(),
            cols: 2,
            w: raw,
        }
    }

    fn column_edges(g: &RoundingGraph, strategy: usize) -> Vec<(usize, usize, f64)> {
        g.edges
            .iter()
            .filter(|e| g.nodes[e.node].strategy == strategy)
            .map(|e| (e.device, g.nodes[e.node].slot, e.weight))
            .collect()
    }

    #[test]
    fn straddling_column() {
        let g = build_rounding_graph(&single_column(&[0.6, 0.7, 0.7]));
        let e = column_edges(&g, 0);
        let expect = [(0, 1, 0.6), (1, 1, 0.4), (1, 2, 0.3), (2, 2, 0.7)];
        assert_eq!(e.len(), expect.len());
        for (got, want) in e.iter().zip(expect) {
            assert_eq!((got.0, got.1), (want.0, want.1));
            assert!(close(got.2, want.2), "{got:?} vs {want:?}");
        }
        let load = g.node_load();
        let col0: Vec<f64> = g
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.strategy == 0)
            .map(|(k, _)| load[k])
            .collect();
        assert!(close(col0[0], 1.0) && close(col0[1], 1.0));
    }

    #[test]
    fn single_slot_column() {
        let g = build_rounding_graph(&single_column(&[0.3, 0.4]));
        assert_eq!(column_edges(&g, 0), vec![(0, 1, 0.3), (1, 1, 0.4)]);
    }

    #[test]
    fn empty_column_has_no_nodes() {
        let g = build_rounding_graph(&single_column(&[0.0, 0.0]));
        assert!(g.nodes.iter().all(|n| n.strategy != 0));
        assert!(column_edges(&g, 0).is_empty());
    }

    #[test]
    fn slot_counts() {
        assert_eq!(slot_count(0.0), 0);
        assert_eq!(slot_count(1e-15), 1);
        assert_eq!(slot_count(1.0), 1);
        assert_eq!(slot_count(2.0 + 1e-14), 2);
        assert_eq!(slot_count(2.1), 3);
    }
}
