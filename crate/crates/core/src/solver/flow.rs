//! Successive-shortest-path min-cost flow specialised to bipartite
//! transportation networks: demand nodes on one side (paper slots), supply
//! nodes with capacities on the other (reviewers and dummies).
//!
//! Each demand unit is routed by a Dijkstra search over reduced costs that
//! stops at the first supply node with spare capacity. All non-full supply
//! nodes share one potential (only the path endpoint ever gains load), so
//! that first node is a shortest path to the implicit sink.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const INF: i64 = i64::MAX / 4;

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    supply_cap: Vec<u32>,
    demand: Vec<u32>,
    start: Vec<usize>,
    to: Vec<u32>,
    weight: Vec<i64>,
    cap: Vec<u32>,
}

/// The supply node that could not be reached, reported when a demand unit
/// has no augmenting path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Unroutable {
    pub demand_node: usize,
}

impl FlowNetwork {
    pub fn new(supply_cap: Vec<u32>) -> Self {
        FlowNetwork {
            supply_cap,
            demand: Vec::new(),
            start: vec![0],
            to: Vec::new(),
            weight: Vec::new(),
            cap: Vec::new(),
        }
    }

    pub fn add_supply(&mut self, cap: u32) -> usize {
        self.supply_cap.push(cap);
        self.supply_cap.len() - 1
    }

    /// Adds a demand node whose edges are `(supply, weight, capacity)`.
    /// Weights are maximised.
    pub fn add_demand(
        &mut self,
        demand: u32,
        edges: impl IntoIterator<Item = (usize, i64, u32)>,
    ) -> usize {
        for (v, w, c) in edges {
            debug_assert!(v < self.supply_cap.len());
            self.to.push(v as u32);
            self.weight.push(w);
            self.cap.push(c);
        }
        self.demand.push(demand);
        self.start.push(self.to.len());
        self.demand.len() - 1
    }

    pub fn edges(&self, u: usize) -> std::ops::Range<usize> {
        self.start[u]..self.start[u + 1]
    }

    pub fn edge_target(&self, e: usize) -> usize {
        self.to[e] as usize
    }

    /// Routes every demand unit, maximising total weight. Returns the flow
    /// on each edge.
    pub fn solve(&self) -> Result<Vec<u32>, Unroutable> {
        let nd = self.demand.len();
        let ns = self.supply_cap.len();
        let n_edges = self.to.len();
        assert!(nd + ns < 1 << 31, "network too large for 31-bit node keys");

        let mut from = vec![0u32; n_edges];
        for u in 0..nd {
            for e in self.edges(u) {
                from[e] = u as u32;
            }
        }
        let w_max = self.weight.iter().copied().max().unwrap_or(0).max(0);

        let mut flow = vec![0u32; n_edges];
        let mut load = vec![0u32; ns];
        // Edges with positive flow, grouped by supply node: the residual
        // back edges.
        let mut back: Vec<Vec<u32>> = vec![Vec::new(); ns];
        let mut pi_d = vec![0i64; nd];
        let mut pi_s = vec![-w_max; ns];

        let mut dist_d = vec![INF; nd];
        let mut dist_s = vec![INF; ns];
        let mut prev_d = vec![u32::MAX; nd];
        let mut prev_s = vec![u32::MAX; ns];
        let mut touched_d: Vec<u32> = Vec::new();
        let mut touched_s: Vec<u32> = Vec::new();
        let mut heap: BinaryHeap<Reverse<(i64, u32)>> = BinaryHeap::new();
        let mut settled_d = vec![false; nd];
        let mut settled_s = vec![false; ns];

        for src in 0..nd {
            for _ in 0..self.demand[src] {
                heap.clear();
                dist_d[src] = 0;
                touched_d.push(src as u32);
                heap.push(Reverse((0, 1 << 31 | src as u32)));
                let mut target = None;

                while let Some(Reverse((d, key))) = heap.pop() {
                    let x = (key & !(1 << 31)) as usize;
                    if x < nd {
                        let u = x;
                        if d > dist_d[u] || settled_d[u] {
                            continue;
                        }
                        settled_d[u] = true;
                        let base = d + pi_d[u];
                        for e in self.edges(u) {
                            if flow[e] >= self.cap[e] {
                                continue;
                            }
                            let v = self.to[e] as usize;
                            let nd_v = base - self.weight[e] - pi_s[v];
                            if nd_v < dist_s[v] {
                                if dist_s[v] == INF {
                                    touched_s.push(v as u32);
                                }
                                dist_s[v] = nd_v;
                                prev_s[v] = e as u32;
                                // Among equal distances, settle supplies with
                                // spare capacity first: the search ends there.
                                let busy = (load[v] >= self.supply_cap[v]) as u32;
                                heap.push(Reverse((nd_v, busy << 31 | (nd + v) as u32)));
                            }
                        }
                    } else {
                        let v = x - nd;
                        if d > dist_s[v] || settled_s[v] {
                            continue;
                        }
                        settled_s[v] = true;
                        if load[v] < self.supply_cap[v] {
                            target = Some(v);
                            break;
                        }
                        let base = d + pi_s[v];
                        for &e in &back[v] {
                            let e = e as usize;
                            let u = from[e] as usize;
                            let nd_u = base + self.weight[e] - pi_d[u];
                            if nd_u < dist_d[u] {
                                if dist_d[u] == INF {
                                    touched_d.push(u as u32);
                                }
                                dist_d[u] = nd_u;
                                prev_d[u] = e as u32;
                                heap.push(Reverse((nd_u, 1 << 31 | u as u32)));
                            }
                        }
                    }
                }

                let Some(t) = target else {
                    return Err(Unroutable { demand_node: src });
                };
                let big_d = dist_s[t];

                // pi += min(dist, D) for every node. Only differences of
                // potentials matter, so subtract D everywhere: untouched
                // nodes stay put and touched ones move by min(dist, D) - D.
                for &u in &touched_d {
                    let u = u as usize;
                    pi_d[u] += dist_d[u].min(big_d) - big_d;
                    dist_d[u] = INF;
                    settled_d[u] = false;
                }
                for &v in &touched_s {
                    let v = v as usize;
                    pi_s[v] += dist_s[v].min(big_d) - big_d;
                    dist_s[v] = INF;
                    settled_s[v] = false;
                }
                touched_d.clear();
                touched_s.clear();

                // Augment along the recorded path.
                load[t] += 1;
                let mut v = t;
                loop {
                    let e = prev_s[v] as usize;
                    if flow[e] == 0 {
                        back[v].push(e as u32);
                    }
                    flow[e] += 1;
                    let u = from[e] as usize;
                    if u == src {
                        break;
                    }
                    let e2 = prev_d[u] as usize;
                    flow[e2] -= 1;
                    let v2 = self.to[e2] as usize;
                    if flow[e2] == 0 {
                        let list = &mut back[v2];
                        let pos = list.iter().position(|&x| x as usize == e2).unwrap();
                        list.swap_remove(pos);
                    }
                    v = v2;
                }
            }
        }
        Ok(flow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_to_heaviest_edges() {
        let mut net = FlowNetwork::new(vec![1, 1, 1]);
        net.add_demand(1, [(0, 9, 1), (1, 1, 1), (2, 0, 1)]);
        net.add_demand(1, [(0, 5, 1), (1, 8, 1), (2, 0, 1)]);
        let flow = net.solve().unwrap();
        assert_eq!(flow, vec![1, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn reroutes_through_augmenting_path() {
        // Both demands prefer supply 0; optimum sends the first elsewhere.
        let mut net = FlowNetwork::new(vec![1, 1]);
        net.add_demand(1, [(0, 10, 1), (1, 9, 1)]);
        net.add_demand(1, [(0, 10, 1), (1, 0, 1)]);
        let flow = net.solve().unwrap();
        assert_eq!(flow, vec![0, 1, 1, 0]);
    }

    #[test]
    fn reports_unroutable_demand() {
        let mut net = FlowNetwork::new(vec![1]);
        net.add_demand(1, [(0, 1, 1)]);
        net.add_demand(1, [(0, 1, 1)]);
        assert_eq!(net.solve(), Err(Unroutable { demand_node: 1 }));
    }
}
