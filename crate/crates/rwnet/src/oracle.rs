//! Exact conservative updates by quadratic programming.
//!
//! Over the edges active at `(b, d)` the program minimizes `|b' - b|^2` over
//! reduced biases `r` and updated biases `b' >= r`, subject to `r >= 0`,
//! `y = x_src - r >= 0`, node values `x_j = w_j * sum y` and `x_c = 0`.
//! With `s = b' - b` the objective is `|s|^2` under `s >= 0`, `s >= r - b`.
//!
//! Two parameterizations are solved independently with Clarabel: the *bias
//! form* keeps `r` and hidden node values as unknowns, the *flow form* keeps
//! edge outputs `y` and writes `r` through them. Their agreement is the
//! uniqueness check. A nested grid search over at most five free edges
//! validates the solver on tiny instances.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use rwnet_core::dynamics::zero_threshold;
use rwnet_core::{eval, sda_update, BiasVector, EdgeId, Network, NodeId, Sample, TerminationMode};

use crate::error::{Error, Result};

/// Largest active network the oracle accepts.
pub const MAX_ACTIVE_EDGES: usize = 5000;

/// Edge outputs at or below this (relative to the node scale) are snapped to
/// their kink before verification.
pub const SNAP_REL: f64 = 1e-9;

const GRID_POINTS: usize = 9;
const GRID_LEVELS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Input(f64),
    Node(usize),
}

/// The program for one sample, restricted to its active edges.
#[derive(Debug, Clone)]
pub struct MpInstance {
    /// Active edges in canonical order.
    pub edges: Vec<EdgeId>,
    /// Current biases on `edges`.
    pub biases: Vec<f64>,
    /// Node values at the current biases, indexed like `nodes`.
    pub node_values: Vec<f64>,
    /// Non-input nodes reached by active edges, ascending.
    pub nodes: Vec<NodeId>,
    class_node: usize,
    src: Vec<Source>,
    dst: Vec<usize>,
    weights: Vec<f64>,
}

/// Solver output for one formulation.
#[derive(Debug, Clone)]
pub struct QpSolution {
    /// Reduced biases on the active edges.
    pub reduced: Vec<f64>,
    /// `max(b, reduced)` on the active edges.
    pub updated: Vec<f64>,
    pub cost: f64,
    /// Largest of the primal, dual and complementarity residuals.
    pub kkt_residual: f64,
    pub iterations: u32,
}

impl MpInstance {
    pub fn build(network: &Network, biases: &BiasVector, sample: &Sample) -> Result<Self> {
        let state = eval(network, biases, &sample.input)?;
        let c = network.output_node(sample.class);
        let zt = zero_threshold(&sample.input);
        if state.x[c] <= zt {
            return Err(Error::Oracle(format!(
                "class output is already zero ({}) for this sample",
                state.x[c]
            )));
        }
        let edges: Vec<EdgeId> = state.active_edges().collect();
        if edges.len() > MAX_ACTIVE_EDGES {
            return Err(Error::Oracle(format!(
                "{} active edges exceed the oracle limit of {MAX_ACTIVE_EDGES}",
                edges.len()
            )));
        }
        let mut nodes: Vec<NodeId> = edges.iter().map(|&e| network.edge(e).dst()).collect();
        nodes.dedup();
        let local = |n: NodeId| nodes.binary_search(&n).ok();
        let class_node = local(c).ok_or_else(|| Error::Oracle("class node has no active in-edges".into()))?;
        let mut src = Vec::with_capacity(edges.len());
        let mut dst = Vec::with_capacity(edges.len());
        for &e in &edges {
            let edge = network.edge(e);
            src.push(if network.layer_of(edge.src()) == 0 {
                Source::Input(sample.input[edge.src()])
            } else {
                Source::Node(local(edge.src()).ok_or_else(|| {
                    Error::Oracle(format!("active edge {e} leaves a node without active in-edges"))
                })?)
            });
            dst.push(local(edge.dst()).unwrap());
        }
        Ok(MpInstance {
            biases: edges.iter().map(|&e| biases[e]).collect(),
            node_values: nodes.iter().map(|&n| state.x[n]).collect(),
            weights: nodes.iter().map(|&n| network.weight(n)).collect(),
            edges,
            nodes,
            class_node,
            src,
            dst,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Node values when the active edges carry `reduced` biases; edges whose
    /// source drops below their bias contribute zero.
    pub fn propagate(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.nodes.len()];
        let mut sums = vec![0.0; self.nodes.len()];
        let mut k = 0;
        while k < self.edges.len() {
            let j = self.dst[k];
            while k < self.edges.len() && self.dst[k] == j {
                let xs = self.source_value(k, &x);
                sums[j] += (xs - reduced[k]).max(0.0);
                k += 1;
            }
            x[j] = self.weights[j] * sums[j];
        }
        x
    }

    fn source_value(&self, k: usize, x: &[f64]) -> f64 {
        match self.src[k] {
            Source::Input(v) => v,
            Source::Node(i) => x[i],
        }
    }

    fn scale(&self) -> f64 {
        self.node_values.iter().fold(1.0f64, |m, &v| m.max(v))
    }

    /// Edges whose destination reaches the class node through active edges.
    fn relevant(&self) -> Vec<bool> {
        let mut reach = vec![false; self.nodes.len()];
        reach[self.class_node] = true;
        for k in (0..self.edges.len()).rev() {
            if reach[self.dst[k]] {
                if let Source::Node(i) = self.src[k] {
                    reach[i] = true;
                }
            }
        }
        self.dst.iter().map(|&j| reach[j]).collect()
    }

    fn cost_of(&self, reduced: &[f64]) -> f64 {
        reduced
            .iter()
            .zip(&self.biases)
            .map(|(r, b)| (r - b).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn finish(&self, reduced: Vec<f64>, kkt_residual: f64, iterations: u32) -> QpSolution {
        let updated: Vec<f64> = reduced.iter().zip(&self.biases).map(|(r, b)| r.max(*b)).collect();
        QpSolution {
            cost: self.cost_of(&reduced),
            reduced,
            updated,
            kkt_residual,
            iterations,
        }
    }

    /// Bias form: unknowns `[r, s, x]`.
    pub fn solve_bias_form(&self) -> Result<QpSolution> {
        let m = self.edges.len();
        let nn = self.nodes.len();
        let (ri, si, xi) = (0, m, 2 * m);
        let n = 2 * m + nn;
        let mut rows = Rows::default();
        // x_j - w_j sum_{hidden src} x_src + w_j sum r = w_j sum_{input src} d
        for j in 0..nn {
            let mut rhs = 0.0;
            let mut row = vec![(xi + j, 1.0)];
            for k in (0..m).filter(|&k| self.dst[k] == j) {
                row.push((ri + k, self.weights[j]));
                match self.src[k] {
                    Source::Input(v) => rhs += self.weights[j] * v,
                    Source::Node(i) => row.push((xi + i, -self.weights[j])),
                }
            }
            rows.push(row, rhs);
        }
        rows.push(vec![(xi + self.class_node, 1.0)], 0.0);
        let n_eq = rows.len();
        for k in 0..m {
            // x_src - r >= 0
            match self.src[k] {
                Source::Input(v) => rows.push(vec![(ri + k, 1.0)], v),
                Source::Node(i) => rows.push(vec![(ri + k, 1.0), (xi + i, -1.0)], 0.0),
            }
            rows.push(vec![(ri + k, -1.0)], 0.0);
            rows.push(vec![(si + k, -1.0)], 0.0);
            rows.push(vec![(ri + k, 1.0), (si + k, -1.0)], self.biases[k]);
        }
        let sol = solve_qp(n, si..si + m, &rows, n_eq)?;
        let reduced = sol.x[ri..ri + m].to_vec();
        Ok(self.finish(reduced, sol.residual, sol.iterations))
    }

    /// Flow form: unknowns `[y, s]`, with `r = x_src(y) - y`.
    pub fn solve_flow_form(&self) -> Result<QpSolution> {
        let m = self.edges.len();
        let (yi, si) = (0, m);
        let n = 2 * m;
        let in_edges: Vec<Vec<usize>> = (0..self.nodes.len())
            .map(|j| (0..m).filter(|&k| self.dst[k] == j).collect())
            .collect();
        // x_src as (terms over y, constant)
        let src_expr = |k: usize| -> (Vec<(usize, f64)>, f64) {
            match self.src[k] {
                Source::Input(v) => (Vec::new(), v),
                Source::Node(i) => (in_edges[i].iter().map(|&e| (yi + e, self.weights[i])).collect(), 0.0),
            }
        };
        let mut rows = Rows::default();
        rows.push(in_edges[self.class_node].iter().map(|&e| (yi + e, 1.0)).collect(), 0.0);
        let n_eq = rows.len();
        for k in 0..m {
            let (terms, cst) = src_expr(k);
            rows.push(vec![(yi + k, -1.0)], 0.0);
            // r = x_src - y >= 0
            let mut row: Vec<(usize, f64)> = terms.iter().map(|&(i, a)| (i, -a)).collect();
            row.push((yi + k, 1.0));
            rows.push(row, cst);
            rows.push(vec![(si + k, -1.0)], 0.0);
            // r - s <= b
            let mut row = terms.clone();
            row.push((yi + k, -1.0));
            row.push((si + k, -1.0));
            rows.push(row, self.biases[k] - cst);
        }
        let sol = solve_qp(n, si..si + m, &rows, n_eq)?;
        let y = &sol.x[yi..yi + m];
        let mut x = vec![0.0; self.nodes.len()];
        for (j, es) in in_edges.iter().enumerate() {
            x[j] = self.weights[j] * es.iter().map(|&e| y[e]).sum::<f64>();
        }
        let reduced = (0..m).map(|k| self.source_value(k, &x) - y[k]).collect();
        Ok(self.finish(reduced, sol.residual, sol.iterations))
    }

    /// Nested grid search over `r = t * x_src`, `t` in `[0,1]`, on the edges
    /// that lead to the class node; edges into it are pinned at `t = 1` and
    /// edges that cannot reach it keep zero cost.
    pub fn solve_grid(&self) -> Result<QpSolution> {
        let relevant = self.relevant();
        let free: Vec<usize> = (0..self.edges.len())
            .filter(|&k| relevant[k] && self.dst[k] != self.class_node)
            .collect();
        if free.len() > 5 {
            return Err(Error::Oracle(format!(
                "grid search supports at most 5 free edges, instance has {}",
                free.len()
            )));
        }
        let dims = free.len();
        let reduced_for = |t: &[f64]| -> Vec<f64> {
            let mut r = vec![0.0; self.edges.len()];
            let mut x = vec![0.0; self.nodes.len()];
            let mut sums = vec![0.0; self.nodes.len()];
            for k in 0..self.edges.len() {
                let xs = self.source_value(k, &x);
                r[k] = if !relevant[k] {
                    self.biases[k].min(xs)
                } else if self.dst[k] == self.class_node {
                    xs
                } else {
                    t[free.iter().position(|&f| f == k).unwrap()] * xs
                };
                let j = self.dst[k];
                sums[j] += (xs - r[k]).max(0.0);
                x[j] = self.weights[j] * sums[j];
            }
            r
        };
        let mut lo = vec![0.0; dims];
        let mut hi = vec![1.0; dims];
        let mut best_t = vec![0.5; dims];
        let mut best = f64::INFINITY;
        let total = GRID_POINTS.pow(dims as u32);
        let mut t = vec![0.0; dims];
        for _ in 0..GRID_LEVELS {
            for idx in 0..total {
                let mut q = idx;
                for d in 0..dims {
                    let step = (hi[d] - lo[d]) / (GRID_POINTS - 1) as f64;
                    t[d] = lo[d] + step * (q % GRID_POINTS) as f64;
                    q /= GRID_POINTS;
                }
                let c = self.cost_of(&reduced_for(&t));
                if c < best {
                    best = c;
                    best_t.clone_from(&t);
                }
            }
            for d in 0..dims {
                let half = (hi[d] - lo[d]) / 4.0;
                lo[d] = (best_t[d] - half).max(0.0);
                hi[d] = (best_t[d] + half).min(1.0);
            }
        }
        Ok(self.finish(reduced_for(&best_t), 0.0, GRID_LEVELS as u32))
    }

    /// Full-network biases for a solution, with near-kink edges snapped so
    /// that they carry exactly zero output.
    pub fn apply(&self, network: &Network, biases: &BiasVector, sol: &QpSolution, d: &[f64]) -> Result<BiasVector> {
        let x = self.propagate(&sol.reduced);
        let tol = SNAP_REL * self.scale();
        let snap: Vec<bool> = (0..self.edges.len())
            .map(|k| self.source_value(k, &x) - sol.reduced[k] <= tol)
            .collect();
        let mut out = biases.clone().into_vec();
        let mut snapped = vec![false; network.num_edges()];
        for (k, &e) in self.edges.iter().enumerate() {
            out[e] = sol.updated[k];
            snapped[e] = snap[k];
        }
        let mut xs = vec![0.0; network.num_nodes()];
        xs[..d.len()].copy_from_slice(d);
        for j in d.len()..network.num_nodes() {
            let mut sum = 0.0;
            for e in network.in_edges(j) {
                let v = xs[network.edge(e).src()];
                if snapped[e] && out[e] < v {
                    out[e] = v;
                }
                sum += (v - out[e]).max(0.0);
            }
            xs[j] = network.weight(j) * sum;
        }
        let b = BiasVector::for_network(network, out)?;
        Ok(b)
    }
}

#[derive(Default)]
struct Rows {
    entries: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl Rows {
    fn push(&mut self, row: Vec<(usize, f64)>, rhs: f64) {
        self.entries.push(row);
        self.rhs.push(rhs);
    }

    fn len(&self) -> usize {
        self.rhs.len()
    }
}

struct RawSolution {
    x: Vec<f64>,
    residual: f64,
    iterations: u32,
}

/// Minimizes `sum_{i in quad} x_i^2` subject to the first `n_eq` rows as
/// equalities and the rest as `row . x <= rhs`.
fn solve_qp(n: usize, quad: std::ops::Range<usize>, rows: &Rows, n_eq: usize) -> Result<RawSolution> {
    let idx: Vec<usize> = quad.clone().collect();
    let p = CscMatrix::new_from_triplets(n, n, idx.clone(), idx, vec![2.0; quad.len()]);
    let q = vec![0.0; n];
    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    for (r, row) in rows.entries.iter().enumerate() {
        for &(j, v) in row {
            ii.push(r);
            jj.push(j);
            vv.push(v);
        }
    }
    let m = rows.len();
    let a = CscMatrix::new_from_triplets(m, n, ii.clone(), jj.clone(), vv.clone());
    let cones = [SupportedConeT::ZeroConeT(n_eq), SupportedConeT::NonnegativeConeT(m - n_eq)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(400)
        .tol_gap_abs(1e-12)
        .tol_gap_rel(1e-12)
        .tol_feas(1e-12)
        .tol_ktratio(1e-10)
        .build()
        .map_err(|e| Error::Oracle(format!("solver settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &rows.rhs, &cones, settings)
        .map_err(|e| Error::Oracle(format!("solver setup: {e}")))?;
    solver.solve();
    let sol = &solver.solution;
    if !matches!(sol.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
        return Err(Error::Oracle(format!("solver stopped with status {:?}", sol.status)));
    }
    // KKT residuals recomputed from the returned primal-dual point.
    let mut dual: Vec<f64> = vec![0.0; n];
    for i in quad.clone() {
        dual[i] += 2.0 * sol.x[i];
    }
    let mut primal: Vec<f64> = sol.s.iter().zip(&rows.rhs).map(|(s, b)| s - b).collect();
    for k in 0..ii.len() {
        primal[ii[k]] += vv[k] * sol.x[jj[k]];
        dual[jj[k]] += vv[k] * sol.z[ii[k]];
    }
    let comp = sol.s.iter().zip(&sol.z).map(|(s, z)| (s * z).abs()).fold(0.0, f64::max);
    let residual = primal
        .iter()
        .chain(&dual)
        .fold(comp, |m, v| m.max(v.abs()));
    Ok(RawSolution {
        x: sol.x.clone(),
        residual,
        iterations: sol.iterations,
    })
}

/// SDA versus the QP optimum on one sample.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub active_edges: usize,
    /// `|b'_SDA - b|` with aggressive termination (`x_c = 0`).
    pub sda_cost: f64,
    pub qp_cost: f64,
    /// Cost of the flow-form solution.
    pub qp_cost_flow: f64,
    /// Largest bias difference between the two formulations.
    pub formulation_gap: f64,
    pub kkt_residual: f64,
    /// Class output after applying the QP update to the full network.
    pub qp_class_output: f64,
    /// Smallest `b'_QP - b` over all edges.
    pub min_increment: f64,
    pub qp_biases: BiasVector,
    pub sda_biases: BiasVector,
}

impl OracleReport {
    pub fn gap(&self) -> f64 {
        self.sda_cost - self.qp_cost
    }
}

/// Solves the program for `sample` and compares it with SDA.
pub fn compare(network: &Network, biases: &BiasVector, sample: &Sample) -> Result<OracleReport> {
    let inst = MpInstance::build(network, biases, sample)?;
    let a = inst.solve_bias_form()?;
    let b = inst.solve_flow_form()?;
    let formulation_gap = a
        .updated
        .iter()
        .zip(&b.updated)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    let qp = inst.apply(network, biases, &a, &sample.input)?;
    let after = eval(network, &qp, &sample.input)?;
    let sda = sda_update(network, biases, &sample.input, sample.class, TerminationMode::Aggressive)?;
    let min_increment = qp
        .as_slice()
        .iter()
        .zip(biases.as_slice())
        .map(|(n, o)| n - o)
        .fold(f64::INFINITY, f64::min);
    Ok(OracleReport {
        active_edges: inst.num_edges(),
        sda_cost: sda.updated_biases.distance(biases),
        qp_cost: qp.distance(biases),
        qp_cost_flow: b.cost,
        formulation_gap,
        kkt_residual: a.kkt_residual.max(b.kkt_residual),
        qp_class_output: after.x[network.output_node(sample.class)],
        min_increment,
        qp_biases: qp,
        sda_biases: sda.updated_biases,
    })
}
