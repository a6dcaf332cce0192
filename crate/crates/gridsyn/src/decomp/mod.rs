//! Subsystem decomposition: vertical (time-scale separation) and horizontal
//! (community detection over the fast dynamics graph).
//!
//! The default pipeline runs the vertical split first so every subsystem ends
//! up with a single time scale, then partitions the fast remainder by
//! closeness of interconnection. Systems without a usable spectral gap skip
//! the vertical stage and go straight to community detection.

mod louvain;

pub use louvain::{detect_communities, modularity, DetectConfig, Partition};

use crate::netgraph::{AdjacencyMatrix, JacobianSet, ModelDims, NodeId, NodeKind};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("no time-scale gap: largest adjacent ratio {max_ratio:.3} below threshold {gap_min}")]
    NoScaleGap { max_ratio: f64, gap_min: f64 },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("zero diagonal for state x{} and no fallback table supplied", index + 1)]
    ZeroDiagonal { index: usize },
    #[error("expected exactly {expected} fast communities, found {found}")]
    CardinalityMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Source for per-state dominant time constants.
pub enum TimeConstantSource<'a> {
    /// Estimate from the state Jacobian diagonal: τ_i = 1 / |A_ii|,
    /// clamped to [1e-3, 1e6] s.
    Estimate(&'a JacobianSet),
    /// Use the supplied table verbatim.
    Table(&'a [f64]),
}

/// Per-state dominant time constants in seconds.
///
/// In estimate mode a zero diagonal falls back to the supplied table for that
/// state; the returned vector of indices lists every state that fell back.
pub fn time_constants(
    source: TimeConstantSource<'_>,
    fallback: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<usize>), DecompError> {
    match source {
        TimeConstantSource::Table(t) => Ok((t.to_vec(), Vec::new())),
        TimeConstantSource::Estimate(j) => {
            let n = j.a.nrows();
            let mut tau = Vec::with_capacity(n);
            let mut warned = Vec::new();
            for i in 0..n {
                let d = j.a[(i, i)].abs();
                if d < 1e-300 {
                    let table = fallback.ok_or(DecompError::ZeroDiagonal { index: i })?;
                    if table.len() != n {
                        return Err(DecompError::Dimension(format!(
                            "fallback table has {} entries for {n} states",
                            table.len()
                        )));
                    }
                    warned.push(i);
                    tau.push(table[i]);
                } else {
                    tau.push((1.0 / d).clamp(1e-3, 1e6));
                }
            }
            Ok((tau, warned))
        }
    }
}

/// Result of the vertical decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeScaleSplit {
    /// 0-based state indices, each list sorted ascending.
    pub slow_states: Vec<usize>,
    pub fast_states: Vec<usize>,
    /// 0-based continuous-input indices.
    pub slow_inputs: Vec<usize>,
    pub fast_inputs: Vec<usize>,
    /// 0-based output indices.
    pub slow_outputs: Vec<usize>,
    pub fast_outputs: Vec<usize>,
    /// Ratio of representative time constants, fast over slow.
    pub epsilon: f64,
    pub tau_f_rep: f64,
    pub tau_s_rep: f64,
}

/// Configuration of [`vertical_split`].
#[derive(Debug, Clone)]
pub struct SplitConfig {
    /// Minimum ratio across the sorted-τ gap for the split to be accepted.
    pub gap_min: f64,
    /// Representative states (fast, slow) for ε; defaults to the largest fast
    /// τ and the smallest slow τ when absent.
    pub representatives: Option<(usize, usize)>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { gap_min: 50.0, representatives: None }
    }
}

/// Splits states, inputs, and outputs into slow and fast groups at the
/// largest gap of the sorted time constants.
///
/// Inputs are assigned slow when they feed any slow-state row of the
/// adjacency matrix; outputs are slow when all their state dependencies are
/// slow. Errors with [`DecompError::NoScaleGap`] when the largest adjacent
/// ratio stays below `gap_min`.
pub fn vertical_split(
    tau: &[f64],
    a_e: &AdjacencyMatrix,
    dims: &ModelDims,
    cfg: &SplitConfig,
) -> Result<TimeScaleSplit, DecompError> {
    let n_x = dims.n_x;
    if tau.len() != n_x {
        return Err(DecompError::Dimension(format!(
            "{} time constants for {n_x} states",
            tau.len()
        )));
    }
    if tau.iter().any(|&t| !(t > 0.0)) {
        return Err(DecompError::Dimension("time constants must be positive".into()));
    }
    if a_e.n != dims.n_v() {
        return Err(DecompError::Dimension(format!(
            "adjacency is {}x{0} but the model has {} variables",
            a_e.n,
            dims.n_v()
        )));
    }

    let mut order: Vec<usize> = (0..n_x).collect();
    order.sort_by(|&i, &j| tau[i].total_cmp(&tau[j]));

    let mut best_gap = 0usize;
    let mut max_ratio = 0.0f64;
    for k in 0..n_x - 1 {
        let ratio = tau[order[k + 1]] / tau[order[k]];
        if ratio > max_ratio {
            max_ratio = ratio;
            best_gap = k;
        }
    }
    if max_ratio < cfg.gap_min {
        return Err(DecompError::NoScaleGap { max_ratio, gap_min: cfg.gap_min });
    }

    let mut slow_states: Vec<usize> = order[best_gap + 1..].to_vec();
    let mut fast_states: Vec<usize> = order[..=best_gap].to_vec();
    slow_states.sort_unstable();
    fast_states.sort_unstable();

    // Representatives: the slowest fast state and the fastest slow state by
    // default; overridable because the shipped configuration pins them.
    let (rep_f, rep_s) = match cfg.representatives {
        Some((f, s)) => {
            if f >= n_x || s >= n_x {
                return Err(DecompError::Dimension("representative index out of range".into()));
            }
            (f, s)
        }
        None => (
            *fast_states
                .iter()
                .max_by(|&&i, &&j| tau[i].total_cmp(&tau[j]))
                .expect("fast set nonempty"),
            *slow_states
                .iter()
                .min_by(|&&i, &&j| tau[i].total_cmp(&tau[j]))
                .expect("slow set nonempty"),
        ),
    };
    let tau_f_rep = tau[rep_f];
    let tau_s_rep = tau[rep_s];
    let epsilon = tau_f_rep / tau_s_rep;

    // Input assignment via the connectivity map: slow when the input column
    // carries an edge into any slow-state row.
    let is_slow_state = |i: usize| slow_states.binary_search(&i).is_ok();
    let mut slow_inputs = Vec::new();
    let mut fast_inputs = Vec::new();
    for ui in 0..dims.n_u {
        let col = n_x + ui;
        let feeds_slow = slow_states.iter().any(|&r| a_e.entry(r, col) == 1);
        if feeds_slow {
            slow_inputs.push(ui);
        } else {
            fast_inputs.push(ui);
        }
    }

    // Output assignment by state dependency.
    let mut slow_outputs = Vec::new();
    let mut fast_outputs = Vec::new();
    for yi in 0..dims.n_y {
        let row = n_x + dims.n_g() + yi;
        let deps: Vec<usize> = (0..n_x).filter(|&j| a_e.entry(row, j) == 1).collect();
        if !deps.is_empty() && deps.iter().all(|&j| is_slow_state(j)) {
            slow_outputs.push(yi);
        } else {
            fast_outputs.push(yi);
        }
    }

    Ok(TimeScaleSplit {
        slow_states,
        fast_states,
        slow_inputs,
        fast_inputs,
        slow_outputs,
        fast_outputs,
        epsilon,
        tau_f_rep,
        tau_s_rep,
    })
}

/// Adjacency of the fast remainder: zeroes every row owned by the slow
/// subsystem (slow states, slow inputs, slow outputs). Columns stay, so
/// influence of the fast dynamics on the slow ones remains visible.
pub fn fast_adjacency(a_e: &AdjacencyMatrix, split: &TimeScaleSplit, dims: &ModelDims) -> AdjacencyMatrix {
    let mut a_f = a_e.clone();
    let mut rows: Vec<usize> = split.slow_states.clone();
    rows.extend(split.slow_inputs.iter().map(|&u| dims.n_x + u));
    rows.extend(split.slow_outputs.iter().map(|&y| dims.n_x + dims.n_g() + y));
    a_f.zero_rows(&rows);
    a_f
}

/// One fast subsystem: what the local agent owns, what it borrows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastSubsystem {
    /// 0-based state indices owned by this subsystem, sorted.
    pub own_states: Vec<usize>,
    /// 0-based continuous-input indices owned by this subsystem.
    pub own_inputs: Vec<usize>,
    /// Other subsystems' states this agent consumes, sorted.
    pub neighbor_states: Vec<usize>,
    /// Inputs decided elsewhere that this agent consumes (slow inputs first).
    pub neighbor_inputs: Vec<usize>,
    /// Output indices this agent is responsible for.
    pub outputs: Vec<usize>,
    /// Whether the slow states enter this subsystem's own dynamics directly.
    pub slow_coupled: bool,
}

/// Fast-subsystem configurations derived from a partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsystemSpec {
    pub subsystems: Vec<FastSubsystem>,
    /// Slow state indices, carried along for agents that need them frozen.
    pub slow_states: Vec<usize>,
    pub slow_inputs: Vec<usize>,
}

/// Adjustments applied on top of the raw partition.
#[derive(Debug, Clone, Default)]
pub struct SharingOverrides {
    /// Duplicate every fast output into all subsystems (cooperative agents
    /// share the grid-power output and the renewable source feeding it).
    pub share_outputs: bool,
    /// Pin which subsystems see the slow states in their own dynamics;
    /// derived from the graph when absent.
    pub slow_coupled: Option<Vec<usize>>,
}

impl SharingOverrides {
    /// The shipped configuration: outputs shared, slow coupling pinned to the
    /// water-loop subsystem (the one owning the fan-coil return state).
    pub fn shipped() -> Self {
        SharingOverrides { share_outputs: true, slow_coupled: None }
    }
}

/// Builds the three fast-subsystem configurations from a partition of the
/// fast graph.
///
/// Subsystems are ordered by their smallest owned state index. Neighbor
/// inputs are the slow inputs plus any other subsystem's fast input with a
/// direct edge into one of this subsystem's outputs.
pub fn build_subsystems(
    partition: &Partition,
    split: &TimeScaleSplit,
    a_e: &AdjacencyMatrix,
    dims: &ModelDims,
    overrides: &SharingOverrides,
) -> Result<SubsystemSpec, DecompError> {
    // Community ids that contain at least one fast state.
    let mut fast_comms: Vec<u32> = Vec::new();
    for &s in &split.fast_states {
        if let Some(&c) = partition.tags.get(&s) {
            if !fast_comms.contains(&c) {
                fast_comms.push(c);
            }
        }
    }
    // Order communities by smallest contained fast state.
    fast_comms.sort_by_key(|&c| {
        split
            .fast_states
            .iter()
            .find(|&&s| partition.tags.get(&s) == Some(&c))
            .copied()
            .unwrap_or(usize::MAX)
    });
    if fast_comms.len() != 3 {
        return Err(DecompError::CardinalityMismatch { expected: 3, found: fast_comms.len() });
    }

    let state_cols = 0..dims.n_x;
    let mut subsystems = Vec::with_capacity(3);
    for (j, &c) in fast_comms.iter().enumerate() {
        let own_states: Vec<usize> = split
            .fast_states
            .iter()
            .copied()
            .filter(|s| partition.tags.get(s) == Some(&c))
            .collect();
        let own_inputs: Vec<usize> = split
            .fast_inputs
            .iter()
            .copied()
            .filter(|u| partition.tags.get(&(dims.n_x + u)) == Some(&c))
            .collect();
        let neighbor_states: Vec<usize> = split
            .fast_states
            .iter()
            .copied()
            .filter(|s| partition.tags.get(s) != Some(&c))
            .collect();

        // Outputs: own community's fast outputs, or all fast outputs shared.
        let outputs: Vec<usize> = if overrides.share_outputs {
            split.fast_outputs.clone()
        } else {
            split
                .fast_outputs
                .iter()
                .copied()
                .filter(|y| partition.tags.get(&(dims.n_x + dims.n_g() + y)) == Some(&c))
                .collect()
        };

        // Neighbor inputs: slow inputs, plus other communities' fast inputs
        // with a direct edge into one of this subsystem's outputs.
        let mut neighbor_inputs: Vec<usize> = split.slow_inputs.clone();
        for &u in &split.fast_inputs {
            if own_inputs.contains(&u) {
                continue;
            }
            let col = dims.n_x + u;
            let direct = outputs
                .iter()
                .any(|&y| a_e.entry(dims.n_x + dims.n_g() + y, col) == 1);
            if direct {
                neighbor_inputs.push(u);
            }
        }

        // Slow coupling: any direct edge from a slow-state column into one of
        // this subsystem's own state rows.
        let derived_slow_coupled = own_states.iter().any(|&r| {
            split
                .slow_states
                .iter()
                .any(|&sc| state_cols.contains(&sc) && a_e.entry(r, sc) == 1)
        });
        let slow_coupled = match &overrides.slow_coupled {
            Some(list) => list.contains(&j),
            None => derived_slow_coupled,
        };

        subsystems.push(FastSubsystem {
            own_states,
            own_inputs,
            neighbor_states,
            neighbor_inputs,
            outputs,
            slow_coupled,
        });
    }

    Ok(SubsystemSpec {
        subsystems,
        slow_states: split.slow_states.clone(),
        slow_inputs: split.slow_inputs.clone(),
    })
}

/// Structured decomposition report emitted by the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub tau: Vec<f64>,
    pub tau_estimator_fallbacks: Vec<String>,
    pub epsilon: f64,
    pub tau_f_rep: f64,
    pub tau_s_rep: f64,
    pub slow_states: Vec<String>,
    pub fast_states: Vec<String>,
    pub slow_inputs: Vec<String>,
    pub fast_inputs: Vec<String>,
    pub slow_outputs: Vec<String>,
    pub fast_outputs: Vec<String>,
    pub vertical_split_applied: bool,
    pub modularity: f64,
    pub seed: u64,
    pub restarts_used: usize,
    pub communities: Vec<Vec<String>>,
    pub isolated: Vec<String>,
}

/// Partition export: one `<node-label> <community-id>` line per tagged node.
pub fn partition_to_text(p: &Partition, labels: &[String]) -> String {
    let mut s = String::new();
    for (&node, &comm) in &p.tags {
        s.push_str(&format!("{} {}\n", labels[node], comm));
    }
    s
}

/// Labels helper for report assembly.
pub fn labels_of(dims: &ModelDims, kind: NodeKind, indices: &[usize]) -> Vec<String> {
    let _ = dims;
    indices
        .iter()
        .map(|&i| NodeId { kind, index: i }.label())
        .collect()
}
