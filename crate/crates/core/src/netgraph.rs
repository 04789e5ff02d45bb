//! Network structure: layered DAG, static node weights, canonical edge order,
//! and the text serialization of networks and bias vectors.
//!
//! Node ids are dense and layer-major: layer 0 holds the inputs, the last
//! layer holds the outputs. Edges are kept sorted by `(dst, src)`, which is
//! the same as `(dst layer, dst, src)` because ids are layer-major. That makes
//! the in-edges of every node a contiguous range, which is what the forward
//! and backward passes iterate over.
//!
//! Networks are normally strictly layered (every edge joins adjacent layers).
//! A *graded* network relaxes this to "every edge goes to a strictly higher
//! layer"; it exists for circuit compilation and small hand-built fragments.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::{Index, Range};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
}

impl Edge {
    pub fn new(src: NodeId, dst: NodeId) -> Self {
        Edge {
            src: src as u32,
            dst: dst as u32,
        }
    }

    #[inline]
    pub fn src(&self) -> NodeId {
        self.src as usize
    }

    #[inline]
    pub fn dst(&self) -> NodeId {
        self.dst as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    layer_start: Vec<usize>,
    node_layer: Vec<u32>,
    weights: Vec<f64>,
    edges: Vec<Edge>,
    in_start: Vec<usize>,
    out_start: Vec<usize>,
    out_edges: Vec<EdgeId>,
    graded: bool,
}

impl Network {
    /// Builds a strictly layered network.
    ///
    /// `weights` has one entry per node; entries for input nodes are ignored
    /// and stored as 1. Edges may be given in any order.
    pub fn new(layer_sizes: Vec<usize>, weights: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        Self::build(layer_sizes, weights, edges, false)
    }

    /// Builds a graded network: edges must go to a strictly higher layer but
    /// may skip layers.
    pub fn new_graded(layer_sizes: Vec<usize>, weights: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        Self::build(layer_sizes, weights, edges, true)
    }

    fn build(layer_sizes: Vec<usize>, mut weights: Vec<f64>, mut edges: Vec<Edge>, graded: bool) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "a network needs at least an input and an output layer, got {} layers",
                layer_sizes.len()
            )));
        }
        if let Some(l) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSpec(format!("layer {l} is empty")));
        }
        let mut layer_start = Vec::with_capacity(layer_sizes.len() + 1);
        let mut node_layer = Vec::new();
        let mut acc = 0;
        for (l, &size) in layer_sizes.iter().enumerate() {
            layer_start.push(acc);
            acc += size;
            node_layer.extend(core::iter::repeat(l as u32).take(size));
        }
        layer_start.push(acc);
        let n = acc;

        if weights.len() != n {
            return Err(Error::Dimension {
                what: "node weights",
                expected: n,
                got: weights.len(),
            });
        }
        for w in &mut weights[..layer_sizes[0]] {
            *w = 1.0;
        }
        for (node, &w) in weights.iter().enumerate().skip(layer_sizes[0]) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveWeight { node, weight: w });
            }
        }

        for e in &edges {
            let (s, d) = (e.src(), e.dst());
            if s >= n {
                return Err(Error::UnknownNode(s));
            }
            if d >= n {
                return Err(Error::UnknownNode(d));
            }
            let (ls, ld) = (node_layer[s], node_layer[d]);
            if ld <= ls {
                return Err(Error::Layering {
                    src: s,
                    dst: d,
                    reason: "edge does not point to a higher layer",
                });
            }
            if !graded && ld != ls + 1 {
                return Err(Error::Layering {
                    src: s,
                    dst: d,
                    reason: "edge skips a layer",
                });
            }
        }

        edges.sort_unstable_by_key(|e| (e.dst, e.src));

        let mut in_start = vec![0usize; n + 1];
        let mut out_count = vec![0usize; n];
        for e in &edges {
            in_start[e.dst() + 1] += 1;
            out_count[e.src()] += 1;
        }
        for j in 0..n {
            in_start[j + 1] += in_start[j];
        }
        let mut out_start = vec![0usize; n + 1];
        for i in 0..n {
            out_start[i + 1] = out_start[i] + out_count[i];
        }
        let mut fill = out_start.clone();
        let mut out_edges = vec![0; edges.len()];
        for (k, e) in edges.iter().enumerate() {
            out_edges[fill[e.src()]] = k;
            fill[e.src()] += 1;
        }

        let last = layer_sizes.len() - 1;
        for node in 0..n {
            let indeg = in_start[node + 1] - in_start[node];
            let outdeg = out_count[node];
            let layer = node_layer[node] as usize;
            let bad = if layer > 0 && indeg == 0 {
                Some("non-input node without incoming edges")
            } else if layer < last && outdeg == 0 {
                Some("non-output node without outgoing edges")
            } else {
                None
            };
            if let Some(reason) = bad {
                return Err(Error::Connectivity {
                    node,
                    in_degree: indeg,
                    out_degree: outdeg,
                    reason,
                });
            }
        }

        Ok(Network {
            layer_sizes,
            layer_start,
            node_layer,
            weights,
            edges,
            in_start,
            out_start,
            out_edges,
            graded,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of layers, `L + 1`.
    #[inline]
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    /// Number of hidden layers, `L - 1`.
    pub fn num_hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layer(&self, l: usize) -> Range<NodeId> {
        self.layer_start[l]..self.layer_start[l + 1]
    }

    #[inline]
    pub fn layer_of(&self, node: NodeId) -> usize {
        self.node_layer[node] as usize
    }

    pub fn inputs(&self) -> Range<NodeId> {
        self.layer(0)
    }

    pub fn outputs(&self) -> Range<NodeId> {
        self.layer(self.num_layers() - 1)
    }

    pub fn num_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_outputs(&self) -> usize {
        self.layer_sizes[self.num_layers() - 1]
    }

    /// Node id of output (class) `k`.
    #[inline]
    pub fn output_node(&self, class: usize) -> NodeId {
        self.layer_start[self.num_layers() - 1] + class
    }

    #[inline]
    pub fn is_output(&self, node: NodeId) -> bool {
        node >= self.layer_start[self.num_layers() - 1] && node < self.num_nodes()
    }

    #[inline]
    pub fn weight(&self, node: NodeId) -> f64 {
        self.weights[node]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    /// Edge ids of the in-edges of `node`, a contiguous range.
    #[inline]
    pub fn in_edges(&self, node: NodeId) -> Range<EdgeId> {
        self.in_start[node]..self.in_start[node + 1]
    }

    #[inline]
    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[self.out_start[node]..self.out_start[node + 1]]
    }

    /// `(in_degree, out_degree)` of `node`.
    pub fn degree(&self, node: NodeId) -> Result<(usize, usize)> {
        if node >= self.num_nodes() {
            return Err(Error::UnknownNode(node));
        }
        Ok((
            self.in_start[node + 1] - self.in_start[node],
            self.out_start[node + 1] - self.out_start[node],
        ))
    }

    /// Layer index of an edge: the layer of its source node. Edges into the
    /// outputs of a strictly layered network have index `L - 1`.
    #[inline]
    pub fn edge_layer(&self, e: EdgeId) -> usize {
        self.layer_of(self.edges[e].src())
    }

    /// True when edges may skip layers.
    pub fn is_graded(&self) -> bool {
        self.graded
    }

    /// True when every edge joins adjacent layers.
    pub fn is_strictly_layered(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.layer_of(e.dst()) == self.layer_of(e.src()) + 1)
    }

    /// Same structure, new node weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::build(self.layer_sizes.clone(), weights, self.edges.clone(), self.graded)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(32 * (self.num_edges() + self.num_nodes()));
        if self.graded {
            s.push_str("rwnet 1 graded\n");
        } else {
            s.push_str("rwnet 1\n");
        }
        let _ = writeln!(s, "layers {}", self.num_layers());
        s.push_str("sizes");
        for n in &self.layer_sizes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
        for node in self.num_inputs()..self.num_nodes() {
            let _ = writeln!(s, "w {node} {:.16e}", self.weights[node]);
        }
        for e in &self.edges {
            let _ = writeln!(s, "e {} {}", e.src, e.dst);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (_, header) = lines.next().ok_or_else(|| malformed(1, "empty network file"))?;
        let graded = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["rwnet", "1"] => false,
            ["rwnet", "1", "graded"] => true,
            _ => return Err(malformed(1, "expected header `rwnet 1`")),
        };

        let (ln, layers) = lines.next().ok_or_else(|| malformed(2, "missing `layers` line"))?;
        let num_layers: usize = match layers.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["layers", k] => parse_field(ln, k)?,
            _ => return Err(malformed(ln, "expected `layers <count>`")),
        };

        let (ln, sizes_line) = lines.next().ok_or_else(|| malformed(3, "missing `sizes` line"))?;
        let mut toks = sizes_line.split_whitespace();
        if toks.next() != Some("sizes") {
            return Err(malformed(ln, "expected `sizes n0 n1 ...`"));
        }
        let sizes = toks.map(|t| parse_field(ln, t)).collect::<Result<Vec<usize>>>()?;
        if sizes.len() != num_layers {
            return Err(malformed(ln, "`sizes` does not list one count per layer"));
        }

        let n: usize = sizes.iter().sum();
        let mut weights = vec![f64::NAN; n];
        for w in weights.iter_mut().take(sizes.first().copied().unwrap_or(0)) {
            *w = 1.0;
        }
        let mut edges = Vec::new();
        for (ln, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["w", node, weight] => {
                    let node: usize = parse_field(ln, node)?;
                    let weight: f64 = parse_field(ln, weight)?;
                    if node >= n {
                        return Err(Error::UnknownNode(node));
                    }
                    if node < sizes[0] {
                        return Err(malformed(ln, "input nodes carry no weight"));
                    }
                    weights[node] = weight;
                }
                ["e", src, dst] => {
                    edges.push(Edge::new(parse_field(ln, src)?, parse_field(ln, dst)?));
                }
                _ => return Err(malformed(ln, "expected `w <node> <weight>` or `e <src> <dst>`")),
            }
        }
        if let Some(node) = weights.iter().position(|w| w.is_nan()) {
            return Err(Error::Malformed(format!("node {node} has no weight line")));
        }
        Self::build(sizes, weights, edges, graded)
    }
}

fn malformed(line: usize, what: &str) -> Error {
    Error::Malformed(format!("line {line}: {what}"))
}

fn parse_field<T: core::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Malformed(format!("line {line}: cannot parse `{tok}`")))
}

/// One non-negative bias per edge, in canonical edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVector(Vec<f64>);

impl BiasVector {
    pub fn zeros(num_edges: usize) -> Self {
        BiasVector(vec![0.0; num_edges])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(Error::Negative {
                    what: "bias",
                    index,
                    value,
                });
            }
        }
        Ok(BiasVector(values))
    }

    pub fn for_network(network: &Network, values: Vec<f64>) -> Result<Self> {
        if values.len() != network.num_edges() {
            return Err(Error::Dimension {
                what: "bias vector",
                expected: network.num_edges(),
                got: values.len(),
            });
        }
        Self::from_vec(values)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Raises one bias; lowering is not allowed.
    pub fn raise(&mut self, e: EdgeId, value: f64) {
        if value > self.0[e] {
            self.0[e] = value;
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &BiasVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &BiasVector) -> f64 {
        libm::sqrt(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(26 * (self.0.len() + 1));
        let _ = writeln!(s, "rwbias 1 {}", self.0.len());
        for b in &self.0 {
            let _ = writeln!(s, "{b:.16e}");
        }
        s
    }

    pub fn from_text(text: &str, network: &Network) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or_else(|| malformed(1, "empty bias file"))?;
        let count: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["rwbias", "1", k] => parse_field(ln, k)?,
            _ => return Err(malformed(ln, "expected header `rwbias 1 <edge_count>`")),
        };
        if count != network.num_edges() {
            return Err(Error::Dimension {
                what: "bias file edge count",
                expected: network.num_edges(),
                got: count,
            });
        }
        let values = lines
            .map(|(ln, l)| parse_field::<f64>(ln, l))
            .collect::<Result<Vec<_>>>()?;
        Self::for_network(network, values)
    }
}

impl Index<EdgeId> for BiasVector {
    type Output = f64;

    #[inline]
    fn index(&self, e: EdgeId) -> &f64 {
        &self.0[e]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_net() -> Network {
        // 2 inputs, 4 hidden, 2 outputs; complete bipartite between layers
        let mut edges = Vec::new();
        for h in 2..6 {
            edges.push(Edge::new(0, h));
            edges.push(Edge::new(1, h));
            edges.push(Edge::new(h, 6));
            edges.push(Edge::new(h, 7));
        }
        Network::new(vec![2, 4, 2], vec![1.0; 8], edges).unwrap()
    }

    #[test]
    fn output_degree_of_complete_final_layer() {
        let net = two_class_net();
        assert_eq!(net.degree(6).unwrap(), (4, 0));
        assert_eq!(net.degree(0).unwrap(), (0, 4));
        assert!(matches!(net.degree(99), Err(Error::UnknownNode(99))));
    }

    #[test]
    fn degree_sums_match_edge_count() {
        let net = two_class_net();
        let (ins, outs) = (0..net.num_nodes())
            .map(|n| net.degree(n).unwrap())
            .fold((0, 0), |(a, b), (i, o)| (a + i, b + o));
        assert_eq!(ins, net.num_edges());
        assert_eq!(outs, net.num_edges());
    }

    #[test]
    fn canonical_order_independent_of_input_order() {
        let net = two_class_net();
        let mut shuffled: Vec<Edge> = net.edges().to_vec();
        shuffled.reverse();
        let again = Network::new(vec![2, 4, 2], vec![1.0; 8], shuffled).unwrap();
        assert_eq!(net.edges(), again.edges());
        assert!(net.edges().windows(2).all(|w| (w[0].dst, w[0].src) <= (w[1].dst, w[1].src)));
    }

    #[test]
    fn rejects_skip_edges_unless_graded() {
        let edges = vec![Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)];
        let err = Network::new(vec![1, 1, 1], vec![1.0; 3], edges.clone()).unwrap_err();
        assert!(matches!(err, Error::Layering { src: 0, dst: 2, .. }));
        let net = Network::new_graded(vec![1, 1, 1], vec![1.0; 3], edges).unwrap();
        assert!(net.is_graded());
        assert!(!net.is_strictly_layered());
    }

    #[test]
    fn rejects_bad_weights_and_dangling_nodes() {
        let edges = vec![Edge::new(0, 1), Edge::new(1, 2)];
        let err = Network::new(vec![1, 1, 1], vec![1.0, 0.0, 1.0], edges.clone()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveWeight { node: 1, .. }));
        let err = Network::new(vec![1, 2, 1], vec![1.0; 4], vec![Edge::new(0, 1), Edge::new(1, 3)]).unwrap_err();
        assert!(matches!(err, Error::Connectivity { node: 2, .. }));
        let err = Network::new(vec![1, 1, 1], vec![1.0; 3], vec![Edge::new(1, 0)]).unwrap_err();
        assert!(matches!(err, Error::Layering { .. }));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let net = two_class_net()
            .with_weights(vec![1.0, 1.0, 0.1, 1.0 / 3.0, core::f64::consts::PI, 7.0, 1.0, 1.0])
            .unwrap();
        let back = Network::from_text(&net.to_text()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn text_rejects_layer_skip_and_zero_weight() {
        let text = "rwnet 1\nlayers 3\nsizes 1 1 1\nw 1 1\nw 2 1\ne 0 1\ne 1 2\ne 0 2\n";
        assert!(matches!(Network::from_text(text), Err(Error::Layering { .. })));
        let text = "rwnet 1\nlayers 3\nsizes 1 1 1\nw 1 0\nw 2 1\ne 0 1\ne 1 2\n";
        assert!(matches!(Network::from_text(text), Err(Error::NonPositiveWeight { .. })));
        let text = "rwnet 1 graded\nlayers 3\nsizes 1 1 1\nw 1 1\nw 2 1\ne 0 1\ne 1 2\ne 0 2\n";
        assert!(Network::from_text(text).is_ok());
        assert!(matches!(Network::from_text("rwnet 2\n"), Err(Error::Malformed(_))));
    }

    #[test]
    fn bias_text_round_trip_and_errors() {
        let net = two_class_net();
        let zeros = BiasVector::zeros(net.num_edges());
        assert_eq!(BiasVector::from_text(&zeros.to_text(), &net).unwrap(), zeros);

        let vals: Vec<f64> = (0..net.num_edges()).map(|k| 0.1 * k as f64 + 1e-17).collect();
        let b = BiasVector::for_network(&net, vals).unwrap();
        assert_eq!(BiasVector::from_text(&b.to_text(), &net).unwrap(), b);

        let mut vals = vec![0.0; net.num_edges()];
        vals[3] = -0.5;
        assert!(matches!(BiasVector::for_network(&net, vals), Err(Error::Negative { index: 3, .. })));
        assert!(matches!(
            BiasVector::from_text("rwbias 1 2\n0\n0\n", &net),
            Err(Error::Dimension { .. })
        ));
    }
}
