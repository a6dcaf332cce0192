//! Directed dynamics graph of the system: numeric Jacobians at an
//! equilibrium, the augmented system matrix, and its binary adjacency form.
//!
//! Node ordering is fixed as states, then the augmented inputs `u_g = [u; w]`
//! (continuous inputs followed by disturbances), then outputs. Edge
//! convention: `a[i][j] = 1` means a directed edge from variable `j` to
//! variable `i`, i.e. variable `j` appears with nonzero partial derivative in
//! variable `i`'s defining equation. The literature uses both phrasings; this
//! crate uses the row-is-target reading throughout.

use crate::plant::{self, ContinuousInput, Disturbance, IntegerInput, PlantParams, PlantState};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("non-finite derivative probing {what} at entry ({row}, {col})")]
    NonFiniteDerivative {
        what: &'static str,
        row: usize,
        col: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bad node label '{0}'")]
    BadLabel(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Kind of a graph node (variable class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    State,
    Input,
    Disturbance,
    Output,
}

/// A typed node of the dynamics graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    /// Ordinal within the kind, 0-based.
    pub index: usize,
}

impl NodeId {
    /// Symbol label: `x1..`, `u1..`, `w1..`, `y1..` (1-based, matching the
    /// conventional variable numbering).
    pub fn label(&self) -> String {
        let prefix = match self.kind {
            NodeKind::State => "x",
            NodeKind::Input => "u",
            NodeKind::Disturbance => "w",
            NodeKind::Output => "y",
        };
        format!("{prefix}{}", self.index + 1)
    }

    pub fn parse(label: &str) -> Result<Self, GraphError> {
        let (prefix, digits) = label.split_at(1);
        let kind = match prefix {
            "x" => NodeKind::State,
            "u" => NodeKind::Input,
            "w" => NodeKind::Disturbance,
            "y" => NodeKind::Output,
            _ => return Err(GraphError::BadLabel(label.to_string())),
        };
        let idx: usize = digits
            .parse()
            .map_err(|_| GraphError::BadLabel(label.to_string()))?;
        if idx == 0 {
            return Err(GraphError::BadLabel(label.to_string()));
        }
        Ok(NodeId { kind, index: idx - 1 })
    }
}

/// Problem dimensions of a dynamic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub n_x: usize,
    pub n_u: usize,
    pub n_d: usize,
    pub n_y: usize,
}

impl ModelDims {
    pub fn n_g(&self) -> usize {
        self.n_u + self.n_d
    }
    pub fn n_v(&self) -> usize {
        self.n_x + self.n_g() + self.n_y
    }

    /// All node ids in the fixed ordering.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut v = Vec::with_capacity(self.n_v());
        for i in 0..self.n_x {
            v.push(NodeId { kind: NodeKind::State, index: i });
        }
        for i in 0..self.n_u {
            v.push(NodeId { kind: NodeKind::Input, index: i });
        }
        for i in 0..self.n_d {
            v.push(NodeId { kind: NodeKind::Disturbance, index: i });
        }
        for i in 0..self.n_y {
            v.push(NodeId { kind: NodeKind::Output, index: i });
        }
        v
    }
}

/// A smooth dynamic model `dx/dτ = f(x, u, w)`, `y = h(x, u, w)` with any
/// discrete modes already frozen.
pub trait DynamicModel {
    fn dims(&self) -> ModelDims;
    fn vector_field(&self, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]);
    fn output_map(&self, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]);
}

/// The IES plant with integer inputs frozen, viewed as a [`DynamicModel`].
pub struct PlantSystem<'a> {
    pub params: &'a PlantParams,
    pub z: IntegerInput,
}

impl DynamicModel for PlantSystem<'_> {
    fn dims(&self) -> ModelDims {
        ModelDims {
            n_x: plant::NX,
            n_u: plant::NU,
            n_d: plant::ND,
            n_y: plant::NY,
        }
    }

    fn vector_field(&self, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) {
        let xs = PlantState(std::array::from_fn(|i| x[i]));
        let us = ContinuousInput(std::array::from_fn(|i| u[i]));
        let ws = Disturbance(std::array::from_fn(|i| w[i]));
        match plant::derivatives(&xs, &us, &self.z, &ws, self.params) {
            Ok(dx) => out.copy_from_slice(&dx),
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn output_map(&self, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) {
        let xs = PlantState(std::array::from_fn(|i| x[i]));
        let us = ContinuousInput(std::array::from_fn(|i| u[i]));
        let ws = Disturbance(std::array::from_fn(|i| w[i]));
        match plant::outputs(&xs, &us, &self.z, &ws, self.params) {
            Ok(y) => out.copy_from_slice(&y.0),
            Err(_) => out.fill(f64::NAN),
        }
    }
}

/// Jacobians of `f` and `h` with respect to states and the augmented input
/// `u_g = [u; w]`, evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSet {
    /// ∂f/∂x, `n_x × n_x`.
    pub a: DMatrix<f64>,
    /// ∂f/∂u_g, `n_x × n_g`.
    pub b: DMatrix<f64>,
    /// ∂h/∂x, `n_y × n_x`.
    pub c: DMatrix<f64>,
    /// ∂h/∂u_g, `n_y × n_g`.
    pub d: DMatrix<f64>,
}

impl JacobianSet {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            n_x: self.a.nrows(),
            n_u: 0, // not recoverable from shapes alone; see `augment`
            n_d: self.b.ncols(),
            n_y: self.c.nrows(),
        }
    }
}

/// Central finite-difference Jacobians at `point = (x_e, u_e, w_e)`.
///
/// Per-coordinate step `h = h_rel · max(1, |v_i|)`. When the point is not an
/// equilibrium to within `1e-6` on the residual, the Jacobians are still
/// computed and `equilibrium_residual` reports the defect for the caller to
/// inspect.
pub fn jacobians<M: DynamicModel>(
    model: &M,
    x_e: &[f64],
    u_e: &[f64],
    w_e: &[f64],
    h_rel: f64,
) -> Result<(JacobianSet, f64), GraphError> {
    let dims = model.dims();
    if x_e.len() != dims.n_x || u_e.len() != dims.n_u || w_e.len() != dims.n_d {
        return Err(GraphError::Dimension(format!(
            "point sizes ({}, {}, {}) do not match model dims",
            x_e.len(),
            u_e.len(),
            w_e.len()
        )));
    }
    let mut residual = vec![0.0; dims.n_x];
    model.vector_field(x_e, u_e, w_e, &mut residual);
    let res_norm = residual.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    let nx = dims.n_x;
    let ng = dims.n_g();
    let ny = dims.n_y;
    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, ng);
    let mut c = DMatrix::zeros(ny, nx);
    let mut d = DMatrix::zeros(ny, ng);

    let mut fp = vec![0.0; nx];
    let mut fm = vec![0.0; nx];
    let mut hp = vec![0.0; ny];
    let mut hm = vec![0.0; ny];

    // State columns.
    let mut xbuf = x_e.to_vec();
    for j in 0..nx {
        let h = h_rel * x_e[j].abs().max(1.0);
        xbuf[j] = x_e[j] + h;
        model.vector_field(&xbuf, u_e, w_e, &mut fp);
        model.output_map(&xbuf, u_e, w_e, &mut hp);
        xbuf[j] = x_e[j] - h;
        model.vector_field(&xbuf, u_e, w_e, &mut fm);
        model.output_map(&xbuf, u_e, w_e, &mut hm);
        xbuf[j] = x_e[j];
        for i in 0..nx {
            let v = (fp[i] - fm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(GraphError::NonFiniteDerivative { what: "f/x", row: i, col: j });
            }
            a[(i, j)] = v;
        }
        for i in 0..ny {
            let v = (hp[i] - hm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(GraphError::NonFiniteDerivative { what: "h/x", row: i, col: j });
            }
            c[(i, j)] = v;
        }
    }

    // Augmented input columns: continuous inputs then disturbances.
    let mut ubuf = u_e.to_vec();
    let mut wbuf = w_e.to_vec();
    for j in 0..ng {
        let (base, h) = if j < dims.n_u {
            let h = h_rel * u_e[j].abs().max(1.0);
            ubuf[j] = u_e[j] + h;
            (u_e[j], h)
        } else {
            let k = j - dims.n_u;
            let h = h_rel * w_e[k].abs().max(1.0);
            wbuf[k] = w_e[k] + h;
            (w_e[k], h)
        };
        model.vector_field(x_e, &ubuf, &wbuf, &mut fp);
        model.output_map(x_e, &ubuf, &wbuf, &mut hp);
        if j < dims.n_u {
            ubuf[j] = base - h;
        } else {
            wbuf[j - dims.n_u] = base - h;
        }
        model.vector_field(x_e, &ubuf, &wbuf, &mut fm);
        model.output_map(x_e, &ubuf, &wbuf, &mut hm);
        if j < dims.n_u {
            ubuf[j] = base;
        } else {
            wbuf[j - dims.n_u] = base;
        }
        for i in 0..nx {
            let v = (fp[i] - fm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(GraphError::NonFiniteDerivative { what: "f/u", row: i, col: j });
            }
            b[(i, j)] = v;
        }
        for i in 0..ny {
            let v = (hp[i] - hm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(GraphError::NonFiniteDerivative { what: "h/u", row: i, col: j });
            }
            d[(i, j)] = v;
        }
    }

    Ok((JacobianSet { a, b, c, d }, res_norm))
}

/// Assembles the augmented `n_v × n_v` matrix
/// `[[A, B, 0], [0, 0, 0], [C, D, 0]]` over the node ordering
/// states, augmented inputs, outputs.
pub fn augment(j: &JacobianSet) -> DMatrix<f64> {
    let nx = j.a.nrows();
    let ng = j.b.ncols();
    let ny = j.c.nrows();
    let nv = nx + ng + ny;
    let mut m = DMatrix::zeros(nv, nv);
    m.view_mut((0, 0), (nx, nx)).copy_from(&j.a);
    m.view_mut((0, nx), (nx, ng)).copy_from(&j.b);
    m.view_mut((nx + ng, 0), (ny, nx)).copy_from(&j.c);
    m.view_mut((nx + ng, nx), (ny, ng)).copy_from(&j.d);
    m
}

/// Binary adjacency matrix over typed nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    pub n: usize,
    /// Row-major 0/1 entries; `entry(i, j) = 1` means edge `j → i`.
    data: Vec<u8>,
    /// Node labels, index-aligned.
    pub labels: Vec<String>,
}

impl AdjacencyMatrix {
    pub fn new(n: usize, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), n);
        AdjacencyMatrix { n, data: vec![0; n * n], labels }
    }

    /// Anonymous node labels `n1..` for generic graphs.
    pub fn with_anonymous_labels(n: usize) -> Self {
        Self::new(n, (1..=n).map(|i| format!("n{i}")).collect())
    }

    pub fn entry(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.data[i * self.n + j] = v;
    }

    /// Adds the directed edge `from → to`.
    pub fn add_edge(&mut self, from: usize, to: usize) {
        self.set(to, from, 1);
    }

    pub fn edge_count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// In-degree of node `i` (edges heading for `i`): row sum.
    pub fn k_in(&self, i: usize) -> usize {
        (0..self.n).map(|j| self.entry(i, j) as usize).sum()
    }

    /// Out-degree of node `j` (edges departing `j`): column sum.
    pub fn k_out(&self, j: usize) -> usize {
        (0..self.n).map(|i| self.entry(i, j) as usize).sum()
    }

    /// True when node `i` has no incident edges at all.
    pub fn is_isolated(&self, i: usize) -> bool {
        self.k_in(i) == 0 && self.k_out(i) == 0
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Zeroes every entry of the given rows.
    pub fn zero_rows(&mut self, rows: &[usize]) {
        for &r in rows {
            for j in 0..self.n {
                self.set(r, j, 0);
            }
        }
    }

    /// Edge-list text: one `<from-label> <to-label>` line per edge, in
    /// row-major order of the matrix.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.entry(i, j) == 1 {
                    s.push_str(&format!("{} {}\n", self.labels[j], self.labels[i]));
                }
            }
        }
        s
    }

    /// Rebuilds a matrix from edge-list text over the given node labels.
    pub fn from_edge_list(text: &str, labels: Vec<String>) -> Result<Self, GraphError> {
        let mut m = AdjacencyMatrix::new(labels.len(), labels);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (from, to) = match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(GraphError::Io(format!("bad edge line '{line}'"))),
            };
            let fi = m
                .index_of_label(from)
                .ok_or_else(|| GraphError::BadLabel(from.to_string()))?;
            let ti = m
                .index_of_label(to)
                .ok_or_else(|| GraphError::BadLabel(to.to_string()))?;
            m.add_edge(fi, ti);
        }
        Ok(m)
    }

    /// Dense 0/1 CSV with a header row of node labels.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for i in 0..self.n {
            s.push_str(&self.labels[i]);
            for j in 0..self.n {
                s.push(',');
                s.push(if self.entry(i, j) == 1 { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| GraphError::Io("empty csv".into()))?;
        let labels: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut m = AdjacencyMatrix::new(labels.len(), labels);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            for (j, cell) in line.split(',').skip(1).enumerate() {
                match cell.trim() {
                    "1" => m.set(i, j, 1),
                    "0" => {}
                    other => return Err(GraphError::Io(format!("bad cell '{other}'"))),
                }
            }
        }
        Ok(m)
    }
}

/// Thresholds the augmented matrix into a binary adjacency matrix.
///
/// Rows are first scaled by `max(1, row-max)` so that structural zeros are
/// separated from finite-difference noise on rows with small magnitudes, then
/// `a[i][j] = 1` iff the scaled `|m[i][j]| > tol_abs` and `i ≠ j`.
pub fn adjacency(m: &DMatrix<f64>, tol_abs: f64, labels: Vec<String>) -> AdjacencyMatrix {
    assert!(tol_abs > 0.0);
    let n = m.nrows();
    let mut adj = AdjacencyMatrix::new(n, labels);
    for i in 0..n {
        let row_max = (0..n).fold(0.0f64, |mx, j| mx.max(m[(i, j)].abs()));
        let scale = row_max.max(1.0);
        for j in 0..n {
            if i != j && m[(i, j)].abs() / scale > tol_abs {
                adj.set(i, j, 1);
            }
        }
    }
    adj
}

/// Convenience: labeled adjacency of a plant-sized augmented matrix.
pub fn plant_node_labels() -> Vec<String> {
    ModelDims {
        n_x: plant::NX,
        n_u: plant::NU,
        n_d: plant::ND,
        n_y: plant::NY,
    }
    .nodes()
    .iter()
    .map(NodeId::label)
    .collect()
}
