//! Network constructors and weight utilities.

mod circuit;

pub use circuit::{compile_circuit, random_circuit, BooleanCircuit, CompiledCircuit, Gate, Signal};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::netgraph::{BiasVector, Edge, Network};
use crate::rng::SeededRng;

/// Sparse expander shape: `hidden_layers` layers of sizes `inputs * growth^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpanderSpec {
    pub inputs: usize,
    pub classes: usize,
    pub growth: usize,
    pub hidden_layers: usize,
    pub seed: u64,
}

impl ExpanderSpec {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.inputs];
        let mut n = self.inputs;
        for _ in 0..self.hidden_layers {
            n *= self.growth;
            sizes.push(n);
        }
        sizes.push(self.classes);
        sizes
    }

    /// `|D| (2g + 2g^2 + ... + 2g^(h-1) + (2 + |C|) g^h)`.
    pub fn edge_count(&self) -> usize {
        let g = self.growth;
        let mut total = 0;
        let mut gk = 1;
        for _ in 1..self.hidden_layers {
            gk *= g;
            total += 2 * gk;
        }
        gk *= g;
        total += (2 + self.classes) * gk;
        self.inputs * total
    }

    fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.classes == 0 || self.growth == 0 || self.hidden_layers == 0 {
            return Err(Error::InvalidSpec(format!(
                "expander needs inputs, classes, growth and hidden layers all >= 1, got {self:?}"
            )));
        }
        let mut n = self.inputs as u128;
        for _ in 0..self.hidden_layers {
            n *= self.growth as u128;
            if n > u32::MAX as u128 / 4 {
                return Err(Error::InvalidSpec(format!("expander {self:?} is too large")));
            }
        }
        Ok(())
    }
}

/// Builds a sparse expander with unit weights.
///
/// Every hidden node gets two in-edges, drawn in two passes over the layer.
/// Within a pass each draw picks uniformly from the lower-layer nodes that
/// still have the smaller of the two possible out-degrees; this pool is
/// refilled (in ascending id order) whenever it runs dry. The last hidden
/// layer is completely connected to the outputs.
pub fn build_expander(spec: &ExpanderSpec) -> Result<Network> {
    spec.validate()?;
    let sizes = spec.layer_sizes();
    let mut rng = SeededRng::new(spec.seed);
    let mut edges = Vec::with_capacity(spec.edge_count());
    let mut lower_start = 0;
    for k in 1..=spec.hidden_layers {
        let lower = sizes[k - 1];
        let upper_start = lower_start + lower;
        let mut pool: Vec<usize> = Vec::with_capacity(lower);
        for _pass in 0..2 {
            for j in 0..sizes[k] {
                if pool.is_empty() {
                    pool.extend(lower_start..upper_start);
                }
                let src = pool.swap_remove(rng.below(pool.len()));
                edges.push(Edge::new(src, upper_start + j));
            }
        }
        lower_start = upper_start;
    }
    let last_start = lower_start;
    let last = sizes[spec.hidden_layers];
    let out_start = last_start + last;
    for j in last_start..out_start {
        for k in 0..spec.classes {
            edges.push(Edge::new(j, out_start + k));
        }
    }
    let n = out_start + spec.classes;
    Network::new(sizes, vec![1.0; n], edges)
}

/// Complete Boolean network on `n` variables: one hidden node per
/// combination of literals, both outputs fed by every hidden node.
///
/// Inputs are ordered `(z1, !z1, z2, !z2, ...)`. Hidden node `k` reads the
/// negated literal of variable `i` when bit `i` of `k` is set.
pub fn complete_boolean_network(n: usize, hidden_weight: f64) -> Result<Network> {
    if n == 0 || n > 16 {
        return Err(Error::InvalidSpec(format!("complete Boolean network needs 1 <= N <= 16, got {n}")));
    }
    let hidden = 1usize << n;
    let h0 = 2 * n;
    let out0 = h0 + hidden;
    let mut edges = Vec::with_capacity(hidden * (n + 2));
    for k in 0..hidden {
        for i in 0..n {
            edges.push(Edge::new(2 * i + ((k >> i) & 1), h0 + k));
        }
        edges.push(Edge::new(h0 + k, out0));
        edges.push(Edge::new(h0 + k, out0 + 1));
    }
    let mut weights = vec![1.0; out0 + 2];
    weights[h0..out0].iter_mut().for_each(|w| *w = hidden_weight);
    Network::new(vec![h0, hidden, 2], weights, edges)
}

/// The 216-edge three-variable network, with unit weights.
///
/// First hidden layer: one node per variable pair and sign pattern (3 x 4).
/// Second hidden layer: one node per pair of first-layer nodes whose variable
/// pairs differ (3 x 4 x 4). Both outputs read every second-layer node.
pub fn three_var_network() -> Network {
    const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
    let mut edges = Vec::with_capacity(216);
    let first = 6;
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        for signs in 0..4 {
            let node = first + 4 * p + signs;
            edges.push(Edge::new(2 * a + (signs & 1), node));
            edges.push(Edge::new(2 * b + (signs >> 1), node));
        }
    }
    let second = first + 12;
    let mut node = second;
    for p in 0..3 {
        for q in p + 1..3 {
            for s in 0..4 {
                for t in 0..4 {
                    edges.push(Edge::new(first + 4 * p + s, node));
                    edges.push(Edge::new(first + 4 * q + t, node));
                    node += 1;
                }
            }
        }
    }
    let out = node;
    for h in second..out {
        edges.push(Edge::new(h, out));
        edges.push(Edge::new(h, out + 1));
    }
    Network::new(vec![6, 12, 48, 2], vec![1.0; out + 2], edges).expect("fixed construction is valid")
}

/// Four-edge graded fragment `1 -> 2 -> {3, c}, 3 -> c` with node-2 weight
/// `w`, all other weights 1, and bias `b` on `3 -> c` (zero elsewhere).
///
/// Node ids: 0 = node 1 (input), 1 = node 2, 2 = node 3, 3 = c.
pub fn fragment(w: f64, b: f64) -> (Network, BiasVector) {
    let net = Network::new_graded(
        vec![1, 1, 1, 1],
        vec![1.0, w, 1.0, 1.0],
        vec![Edge::new(0, 1), Edge::new(1, 2), Edge::new(1, 3), Edge::new(2, 3)],
    )
    .expect("fragment weight must be positive");
    let mut biases = vec![0.0; 4];
    let e = net.edges().iter().position(|e| e.src() == 2 && e.dst() == 3).unwrap();
    biases[e] = b;
    (net, BiasVector::from_vec(biases).expect("fragment bias must be non-negative"))
}

/// Hidden weights `q / sqrt(in * out)`, output weights 1.
pub fn assign_balanced_weights(network: &Network, q: f64) -> Result<Network> {
    let mut weights = vec![1.0; network.num_nodes()];
    let hidden_end = network.outputs().start;
    for (node, w) in weights.iter_mut().enumerate().take(hidden_end).skip(network.num_inputs()) {
        let (i, o) = network.degree(node)?;
        *w = q / libm::sqrt((i * o) as f64);
    }
    network.with_weights(weights)
}

/// Cumulative layer weight products `W_0 = 1, W_l = W_(l-1) * w_l`.
///
/// Fails unless weights are equal within every non-input layer.
pub fn layer_weight_products(network: &Network) -> Result<Vec<f64>> {
    let mut products = vec![1.0; network.num_layers()];
    for l in 1..network.num_layers() {
        let layer = network.layer(l);
        let w = network.weight(layer.start);
        if network.weights()[layer].iter().any(|&v| v != w) {
            return Err(Error::NotLayerUniform(l));
        }
        products[l] = products[l - 1] * w;
    }
    Ok(products)
}

/// Equivalent unit-weight network: every bias on an edge leaving layer `l`
/// is divided by `W_l`. Node values of layer `l` scale by `1 / W_l`.
pub fn rescale_to_unit_weights(network: &Network, biases: &BiasVector) -> Result<(Network, BiasVector)> {
    if !network.is_strictly_layered() {
        return Err(Error::InvalidSpec("rescaling needs a strictly layered network".into()));
    }
    if biases.len() != network.num_edges() {
        return Err(Error::Dimension {
            what: "bias vector",
            expected: network.num_edges(),
            got: biases.len(),
        });
    }
    let products = layer_weight_products(network)?;
    let scaled = (0..network.num_edges())
        .map(|e| biases[e] / products[network.edge_layer(e)])
        .collect();
    Ok((network.with_weights(vec![1.0; network.num_nodes()])?, BiasVector::from_vec(scaled)?))
}

/// Path counts from every input to every node of the last hidden layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCounts {
    pub rows: usize,
    pub cols: usize,
    /// Row-major: `a[j * cols + i]` paths from input `i` to last-hidden node `j`.
    pub a: Vec<u64>,
}

impl PathCounts {
    pub fn get(&self, j: usize, i: usize) -> u64 {
        self.a[j * self.cols + i]
    }
}

/// Counts directed paths layer by layer.
pub fn path_counts(network: &Network) -> Result<PathCounts> {
    if network.num_hidden_layers() == 0 || !network.is_strictly_layered() {
        return Err(Error::InvalidSpec("path counts need a strictly layered network with hidden layers".into()));
    }
    let n_in = network.num_inputs();
    let last = network.num_layers() - 2;
    let mut prev: Vec<u64> = vec![0; n_in * n_in];
    for i in 0..n_in {
        prev[i * n_in + i] = 1;
    }
    let mut prev_start = 0;
    for l in 1..=last {
        let layer = network.layer(l);
        let mut cur = vec![0u64; layer.len() * n_in];
        for (r, j) in layer.clone().enumerate() {
            for e in network.in_edges(j) {
                let s = network.edge(e).src() - prev_start;
                for i in 0..n_in {
                    let v = cur[r * n_in + i].checked_add(prev[s * n_in + i]);
                    cur[r * n_in + i] = v.ok_or_else(|| Error::InvalidSpec("path count overflows u64".into()))?;
                }
            }
        }
        prev = cur;
        prev_start = layer.start;
    }
    Ok(PathCounts {
        rows: network.layer_sizes()[last],
        cols: n_in,
        a: prev,
    })
}

/// Small-weight limit model: `x_k = sum_j max(0, sum_i a_ji d_i - b_jk)`
/// over last-hidden nodes `j`, with biases taken from the final layer edges.
pub fn q0_eval(network: &Network, counts: &PathCounts, biases: &BiasVector, d: &[f64]) -> Result<Vec<f64>> {
    if d.len() != counts.cols {
        return Err(Error::Dimension {
            what: "input vector",
            expected: counts.cols,
            got: d.len(),
        });
    }
    let last_start = network.layer(network.num_layers() - 2).start;
    let hidden: Vec<f64> = (0..counts.rows)
        .map(|j| (0..counts.cols).map(|i| counts.get(j, i) as f64 * d[i]).sum())
        .collect();
    let mut out = vec![0.0; network.num_outputs()];
    for (k, node) in network.outputs().enumerate() {
        let mut sum = 0.0;
        for e in network.in_edges(node) {
            let v = hidden[network.edge(e).src() - last_start] - biases[e];
            if v > 0.0 {
                sum += v;
            }
        }
        out[k] = sum;
    }
    Ok(out)
}
