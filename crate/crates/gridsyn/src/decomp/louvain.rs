//! Directed Newman modularity and the fast-unfolding detection loop.
//!
//! Modularity of a tagged partition of a directed graph:
//!
//! `M = (1/m) Σ_ij (a_ij − k_in_i k_out_j / m) δ(c_i, c_j)`
//!
//! with `k_in_i` counting edges heading for node `i` (row sum) and `k_out_j`
//! edges departing node `j` (column sum). The detection loop is fast
//! unfolding (local moving + aggregation) hardened with random node-order
//! restarts, an upper limit on the number of communities, and a
//! recurrence-based stopping rule on the best modularity.

use super::DecompError;
use crate::exec::{map_indexed, ExecMode};
use crate::netgraph::AdjacencyMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Community assignment of (non-isolated) nodes plus the achieved modularity.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Node index → community id (0-based, contiguous).
    pub tags: BTreeMap<usize, u32>,
    /// Modularity of `tags` on the matrix it was detected on.
    pub modularity: f64,
    /// Nodes without any incident edge, excluded from tagging.
    pub isolated: Vec<usize>,
    /// Seed that drove the node-order shuffles.
    pub seed: u64,
    /// Outer restarts consumed before the stopping rule fired.
    pub restarts_used: usize,
}

/// Settings of [`detect_communities`].
#[derive(Debug, Clone)]
pub struct DetectConfig {
    /// Upper limit on the number of communities.
    pub n_c_upper: usize,
    /// Lower limit on outer restarts before the recurrence rule may stop.
    pub n_l_lower: usize,
    /// Required recurrences of the maximum modularity.
    pub n_m_lower: usize,
    /// Seed for the node-order shuffles.
    pub seed: u64,
    /// Hard cap on restarts so degenerate recurrence targets still terminate.
    pub max_restarts: usize,
    pub exec: ExecMode,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            n_c_upper: 3,
            n_l_lower: 16,
            n_m_lower: 4,
            seed: 1,
            max_restarts: 1024,
            exec: ExecMode::default(),
        }
    }
}

/// Directed Newman modularity of a tagged partition.
///
/// Untagged non-isolated nodes count as singleton communities. Errors with
/// [`DecompError::EmptyGraph`] when the matrix has no edges.
pub fn modularity(a: &AdjacencyMatrix, tags: &BTreeMap<usize, u32>) -> Result<f64, DecompError> {
    let m = a.edge_count() as f64;
    if m == 0.0 {
        return Err(DecompError::EmptyGraph);
    }
    // Group nodes by community; untagged nodes become fresh singletons.
    let mut next_fresh = tags.values().copied().max().map_or(0, |v| v + 1);
    let mut comm_of = vec![u32::MAX; a.n];
    for i in 0..a.n {
        comm_of[i] = match tags.get(&i) {
            Some(&c) => c,
            None => {
                let c = next_fresh;
                next_fresh += 1;
                c
            }
        };
    }
    let n_comm = next_fresh as usize;
    let mut intra = vec![0.0f64; n_comm];
    let mut k_in_sum = vec![0.0f64; n_comm];
    let mut k_out_sum = vec![0.0f64; n_comm];
    for i in 0..a.n {
        k_in_sum[comm_of[i] as usize] += a.k_in(i) as f64;
        k_out_sum[comm_of[i] as usize] += a.k_out(i) as f64;
        for j in 0..a.n {
            if a.entry(i, j) == 1 && comm_of[i] == comm_of[j] {
                intra[comm_of[i] as usize] += 1.0;
            }
        }
    }
    let mut m_val = 0.0;
    for c in 0..n_comm {
        m_val += intra[c] / m - (k_in_sum[c] * k_out_sum[c]) / (m * m);
    }
    Ok(m_val)
}

/// Internal weighted digraph used across aggregation levels.
/// `w[i][j]` is the weight of the edge `j → i` (row is the target).
#[derive(Clone)]
struct WGraph {
    n: usize,
    w: Vec<Vec<f64>>,
    k_in: Vec<f64>,
    k_out: Vec<f64>,
    m: f64,
    /// Original node indices folded into each super-node.
    members: Vec<Vec<usize>>,
}

impl WGraph {
    fn from_adjacency(a: &AdjacencyMatrix, nodes: &[usize]) -> Self {
        let n = nodes.len();
        let mut w = vec![vec![0.0; n]; n];
        for (ii, &gi) in nodes.iter().enumerate() {
            for (jj, &gj) in nodes.iter().enumerate() {
                if a.entry(gi, gj) == 1 {
                    w[ii][jj] = 1.0;
                }
            }
        }
        let mut g = WGraph {
            n,
            w,
            k_in: vec![0.0; n],
            k_out: vec![0.0; n],
            m: 0.0,
            members: nodes.iter().map(|&i| vec![i]).collect(),
        };
        g.refresh_degrees();
        g
    }

    fn refresh_degrees(&mut self) {
        self.m = 0.0;
        for i in 0..self.n {
            self.k_in[i] = self.w[i].iter().sum();
            self.m += self.k_in[i];
        }
        for j in 0..self.n {
            self.k_out[j] = (0..self.n).map(|i| self.w[i][j]).sum();
        }
    }

    /// Aggregates nodes sharing a community into super-nodes.
    fn aggregate(&self, comm: &[u32]) -> WGraph {
        let mut ids: Vec<u32> = comm.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let remap: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let nn = ids.len();
        let mut w = vec![vec![0.0; nn]; nn];
        let mut members = vec![Vec::new(); nn];
        for i in 0..self.n {
            let ci = remap[&comm[i]];
            members[ci].extend_from_slice(&self.members[i]);
            for j in 0..self.n {
                if self.w[i][j] != 0.0 {
                    w[remap[&comm[i]]][remap[&comm[j]]] += self.w[i][j];
                }
            }
        }
        for m in &mut members {
            m.sort_unstable();
        }
        let mut g = WGraph { n: nn, w, k_in: vec![0.0; nn], k_out: vec![0.0; nn], m: 0.0, members };
        g.refresh_degrees();
        g
    }

    /// Modularity of a community assignment on this weighted graph.
    fn modularity(&self, comm: &[u32]) -> f64 {
        let mut ids: Vec<u32> = comm.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let remap: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let nc = ids.len();
        let mut intra = vec![0.0; nc];
        let mut kin = vec![0.0; nc];
        let mut kout = vec![0.0; nc];
        for i in 0..self.n {
            let ci = remap[&comm[i]];
            kin[ci] += self.k_in[i];
            kout[ci] += self.k_out[i];
            for j in 0..self.n {
                if comm[i] == comm[j] {
                    intra[ci] += self.w[i][j];
                }
            }
        }
        (0..nc)
            .map(|c| intra[c] / self.m - kin[c] * kout[c] / (self.m * self.m))
            .sum()
    }
}

/// Result of one randomized restart.
struct RunResult {
    tags: BTreeMap<usize, u32>,
    modularity: f64,
}

/// One full pass of Steps 2.1–2.3: local moving with aggregation until the
/// modularity stops improving, then merge-down until the community cap holds.
fn one_run(a: &AdjacencyMatrix, nodes: &[usize], order_seed: u64, n_c_upper: usize) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(order_seed);
    let mut shuffled = nodes.to_vec();
    shuffled.shuffle(&mut rng);

    let mut g = WGraph::from_adjacency(a, &shuffled);
    let mut m_prev = g.modularity(&(0..g.n as u32).collect::<Vec<u32>>());

    // Local moving + aggregation until a sweep stops improving the score.
    loop {
        let comm = local_moving_sweep(&g);
        let m_now = g.modularity(&comm);
        debug_assert!(m_now >= m_prev - 1e-12, "sweep must not lower modularity");
        g = g.aggregate(&comm);
        if m_now <= m_prev + 1e-12 {
            break;
        }
        m_prev = m_now;
    }

    // Community reduction: greedily apply the single neighbor-merge with the
    // best resulting modularity until the cap holds.
    while g.n > n_c_upper {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..g.n {
            for j in 0..g.n {
                if i == j {
                    continue;
                }
                let connected = g.w[i][j] != 0.0 || g.w[j][i] != 0.0;
                if !connected && best.is_some() {
                    continue;
                }
                let mut comm: Vec<u32> = (0..g.n as u32).collect();
                comm[i] = j as u32;
                let m_ij = g.modularity(&comm);
                let better = match best {
                    None => true,
                    // Prefer connected merges, then higher modularity, then
                    // the lowest (i, j) for determinism.
                    Some((bi, bj, bm)) => {
                        let best_connected = g.w[bi][bj] != 0.0 || g.w[bj][bi] != 0.0;
                        (connected && !best_connected) || (connected == best_connected && m_ij > bm + 1e-15)
                    }
                };
                if better {
                    best = Some((i, j, m_ij));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let mut comm: Vec<u32> = (0..g.n as u32).collect();
        comm[i] = j as u32;
        g = g.aggregate(&comm);
    }

    // Map super-nodes back to original node indices; community ids are
    // assigned in order of each community's smallest original node.
    let mut groups: Vec<Vec<usize>> = g.members.clone();
    groups.sort_by_key(|g| g.first().copied().unwrap_or(usize::MAX));
    let mut tags = BTreeMap::new();
    for (c, group) in groups.iter().enumerate() {
        for &node in group {
            tags.insert(node, c as u32);
        }
    }
    let m_final = modularity(a, &tags).unwrap_or(f64::NEG_INFINITY);
    RunResult { tags, modularity: m_final }
}

/// One sweep of local moving: every node, in index order, greedily joins the
/// neighboring community with the best modularity (staying allowed). Ties
/// keep the lowest community id.
fn local_moving_sweep(g: &WGraph) -> Vec<u32> {
    let mut comm: Vec<u32> = (0..g.n as u32).collect();
    // Community aggregates.
    let mut kin_c: Vec<f64> = g.k_in.clone();
    let mut kout_c: Vec<f64> = g.k_out.clone();

    // Weight between node i and community c, both directions.
    let link_to = |i: usize, c: u32, comm: &[u32]| -> f64 {
        let mut acc = 0.0;
        for j in 0..g.n {
            if comm[j] == c && j != i {
                acc += g.w[i][j] + g.w[j][i];
            }
        }
        acc
    };

    for i in 0..g.n {
        let ci = comm[i];
        // Remove i from its community.
        kin_c[ci as usize] -= g.k_in[i];
        kout_c[ci as usize] -= g.k_out[i];

        // Candidate communities: the current one plus every neighbor's.
        let mut candidates: Vec<u32> = vec![ci];
        for j in 0..g.n {
            if j != i && (g.w[i][j] != 0.0 || g.w[j][i] != 0.0) {
                let cj = comm[j];
                if !candidates.contains(&cj) {
                    candidates.push(cj);
                }
            }
        }
        candidates.sort_unstable();

        // Gain of inserting node i into community c, up to terms constant in
        // the choice: links(i, c)/m − (k_in_i K_out(c) + K_in(c) k_out_i)/m².
        let mut best_c = ci;
        let mut best_gain = f64::NEG_INFINITY;
        for &c in &candidates {
            let gain = link_to(i, c, &comm) / g.m
                - (g.k_in[i] * kout_c[c as usize] + kin_c[c as usize] * g.k_out[i])
                    / (g.m * g.m);
            if gain > best_gain + 1e-15 {
                best_gain = gain;
                best_c = c;
            }
        }
        comm[i] = best_c;
        kin_c[best_c as usize] += g.k_in[i];
        kout_c[best_c as usize] += g.k_out[i];
    }
    comm
}

/// Fast-unfolding community detection with random restarts and a community
/// cap.
///
/// Restart `r` derives its node order from `seed + r`, so results do not
/// depend on the execution mode. Isolated nodes (no incident edges) are
/// excluded from tagging and reported on the partition.
pub fn detect_communities(a: &AdjacencyMatrix, cfg: &DetectConfig) -> Result<Partition, DecompError> {
    if a.edge_count() == 0 {
        return Err(DecompError::EmptyGraph);
    }
    assert!(cfg.n_c_upper >= 1);
    let nodes: Vec<usize> = (0..a.n).filter(|&i| !a.is_isolated(i)).collect();
    let isolated: Vec<usize> = (0..a.n).filter(|&i| a.is_isolated(i)).collect();

    let mut best: Option<RunResult> = None;
    let mut n_l = 0usize;
    let mut n_m = 0usize;
    let batch = 8usize;

    while (n_l < cfg.n_l_lower || n_m < cfg.n_m_lower) && n_l < cfg.max_restarts {
        let todo = batch.min(cfg.max_restarts - n_l);
        let results = map_indexed(cfg.exec, todo, |k| {
            one_run(a, &nodes, cfg.seed.wrapping_add((n_l + k) as u64), cfg.n_c_upper)
        });
        for r in results {
            n_l += 1;
            let improved = match &best {
                None => true,
                Some(b) => r.modularity > b.modularity + 1e-12,
            };
            if improved {
                best = Some(r);
                n_m = 0;
            } else if let Some(b) = &best {
                if n_l >= cfg.n_l_lower && (r.modularity - b.modularity).abs() <= 1e-12 {
                    n_m += 1;
                }
            }
            if n_l >= cfg.n_l_lower && n_m >= cfg.n_m_lower {
                break;
            }
        }
    }

    let best = best.expect("at least one restart ran");
    Ok(Partition {
        tags: best.tags,
        modularity: best.modularity,
        isolated,
        seed: cfg.seed,
        restarts_used: n_l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_directed_triangles() -> AdjacencyMatrix {
        let mut a = AdjacencyMatrix::with_anonymous_labels(6);
        for (f, t) in [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)] {
            a.add_edge(f, t);
        }
        a
    }

    #[test]
    fn one_community_is_exactly_zero() {
        let a = two_directed_triangles();
        let tags: BTreeMap<usize, u32> = (0..6).map(|i| (i, 0)).collect();
        assert_eq!(modularity(&a, &tags).unwrap(), 0.0);
    }

    #[test]
    fn singleton_partition_matches_closed_form() {
        let a = two_directed_triangles();
        let tags: BTreeMap<usize, u32> = (0..6).map(|i| (i, i as u32)).collect();
        let m = a.edge_count() as f64;
        let expected: f64 =
            -(0..6).map(|i| (a.k_in(i) * a.k_out(i)) as f64).sum::<f64>() / (m * m);
        let got = modularity(&a, &tags).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn component_split_of_two_triangles_scores_half() {
        let a = two_directed_triangles();
        let tags: BTreeMap<usize, u32> =
            (0..6).map(|i| (i, if i < 3 { 0 } else { 1 })).collect();
        let got = modularity(&a, &tags).unwrap();
        assert!((got - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_is_rejected() {
        let a = AdjacencyMatrix::with_anonymous_labels(3);
        assert!(matches!(
            modularity(&a, &BTreeMap::new()),
            Err(DecompError::EmptyGraph)
        ));
        assert!(matches!(
            detect_communities(&a, &DetectConfig::default()),
            Err(DecompError::EmptyGraph)
        ));
    }

    #[test]
    fn detects_two_triangles() {
        let a = two_directed_triangles();
        let cfg = DetectConfig { n_c_upper: 4, seed: 7, ..DetectConfig::default() };
        let p = detect_communities(&a, &cfg).unwrap();
        assert!((p.modularity - 0.5).abs() < 1e-12, "M = {}", p.modularity);
        assert_eq!(p.tags[&0], p.tags[&1]);
        assert_eq!(p.tags[&1], p.tags[&2]);
        assert_eq!(p.tags[&3], p.tags[&4]);
        assert_ne!(p.tags[&0], p.tags[&3]);
        // Recomputation invariant.
        let m = modularity(&a, &p.tags).unwrap();
        assert!((m - p.modularity).abs() < 1e-12);
    }

    #[test]
    fn complete_digraph_cannot_beat_zero() {
        let mut a = AdjacencyMatrix::with_anonymous_labels(4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    a.add_edge(i, j);
                }
            }
        }
        let cfg = DetectConfig { n_c_upper: 4, seed: 3, ..DetectConfig::default() };
        let p = detect_communities(&a, &cfg).unwrap();
        assert!(p.modularity.abs() < 1e-12, "M = {}", p.modularity);
        let n_comms = {
            let mut v: Vec<u32> = p.tags.values().copied().collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        assert!(n_comms <= 4);
    }

    #[test]
    fn community_cap_is_enforced() {
        // Three disconnected 2-cycles want three communities; cap at 2.
        let mut a = AdjacencyMatrix::with_anonymous_labels(6);
        for (f, t) in [(0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 4)] {
            a.add_edge(f, t);
        }
        let cfg = DetectConfig { n_c_upper: 2, seed: 11, ..DetectConfig::default() };
        let p = detect_communities(&a, &cfg).unwrap();
        let mut comms: Vec<u32> = p.tags.values().copied().collect();
        comms.sort_unstable();
        comms.dedup();
        assert!(comms.len() <= 2);
    }

    #[test]
    fn isolated_nodes_are_reported_not_tagged() {
        let mut a = AdjacencyMatrix::with_anonymous_labels(5);
        a.add_edge(0, 1);
        a.add_edge(1, 0);
        a.add_edge(2, 3);
        a.add_edge(3, 2);
        let p = detect_communities(&a, &DetectConfig { seed: 5, ..DetectConfig::default() }).unwrap();
        assert_eq!(p.isolated, vec![4]);
        assert!(!p.tags.contains_key(&4));
    }

    #[test]
    fn detection_is_deterministic_for_fixed_seed() {
        let a = two_directed_triangles();
        let cfg = DetectConfig { seed: 42, ..DetectConfig::default() };
        let p1 = detect_communities(&a, &cfg).unwrap();
        let p2 = detect_communities(&a, &cfg).unwrap();
        assert_eq!(p1.tags, p2.tags);
        assert_eq!(p1.modularity.to_bits(), p2.modularity.to_bits());
        #[cfg(feature = "parallel")]
        {
            let seq = DetectConfig { exec: ExecMode::Sequential, ..cfg };
            let p3 = detect_communities(&a, &seq).unwrap();
            assert_eq!(p1.tags, p3.tags);
        }
    }
}
