//! Forward evaluation, backward gradient, forward velocity, and the
//! counterfactual classification rule.
//!
//! All three passes walk the canonical edge list, so their summation order is
//! fixed and results are bit-reproducible. Activity is an exact test:
//! an edge is active iff its output `max(0, x_src - b)` is strictly positive.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::netgraph::{BiasVector, EdgeId, Network, NodeId};

/// Values below `ZERO_REL * |d|_1` on an output node count as zero.
pub const ZERO_REL: f64 = 1e-12;

/// Zero threshold for output values produced by input `d`.
pub fn zero_threshold(d: &[f64]) -> f64 {
    ZERO_REL * d.iter().sum::<f64>()
}

/// Node values `x`, edge outputs `y`, and the active-edge flags of one
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub active: Vec<bool>,
}

impl ActivationState {
    pub fn outputs<'a>(&'a self, network: &Network) -> &'a [f64] {
        &self.x[network.outputs()]
    }

    pub fn active_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.active.iter().enumerate().filter(|(_, &a)| a).map(|(e, _)| e)
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Per-node magnitude of the (non-positive) gradient of `x_c`: every active
/// edge into node `j` has `d x_c / d b = -g[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradField {
    pub g: Vec<f64>,
}

/// Per-edge rate of decrease of the edge output while biases move along the
/// gradient; zero on inactive edges.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub v: Vec<f64>,
}

pub(crate) fn check_input(network: &Network, d: &[f64]) -> Result<()> {
    if d.len() != network.num_inputs() {
        return Err(Error::Dimension {
            what: "input vector",
            expected: network.num_inputs(),
            got: d.len(),
        });
    }
    if let Some((index, &value)) = d.iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
        return Err(Error::Negative {
            what: "input",
            index,
            value,
        });
    }
    Ok(())
}

fn check_biases(network: &Network, biases: &BiasVector) -> Result<()> {
    if biases.len() != network.num_edges() {
        return Err(Error::Dimension {
            what: "bias vector",
            expected: network.num_edges(),
            got: biases.len(),
        });
    }
    Ok(())
}

pub(crate) fn class_node(network: &Network, class: usize) -> Result<NodeId> {
    if class >= network.num_outputs() {
        return Err(Error::NotAnOutput(network.num_inputs() + class));
    }
    Ok(network.output_node(class))
}

/// Forward pass into caller-owned buffers.
pub(crate) fn forward(network: &Network, biases: &[f64], d: &[f64], x: &mut [f64], y: &mut [f64]) {
    let weights = network.weights();
    let edges = network.edges();
    let n_in = network.num_inputs();
    x[..n_in].copy_from_slice(d);
    let mut e = 0;
    for j in n_in..network.num_nodes() {
        let end = network.in_edges(j).end;
        let mut sum = 0.0;
        while e < end {
            let out = (x[edges[e].src()] - biases[e]).max(0.0);
            y[e] = out;
            sum += out;
            e += 1;
        }
        x[j] = weights[j] * sum;
    }
}

/// Forward pass restricted to node values; edge outputs are not stored.
pub(crate) fn forward_nodes(network: &Network, biases: &[f64], d: &[f64], x: &mut [f64]) {
    let weights = network.weights();
    let edges = network.edges();
    let n_in = network.num_inputs();
    x[..n_in].copy_from_slice(d);
    let mut e = 0;
    for j in n_in..network.num_nodes() {
        let end = network.in_edges(j).end;
        let mut sum = 0.0;
        while e < end {
            sum += (x[edges[e].src()] - biases[e]).max(0.0);
            e += 1;
        }
        x[j] = weights[j] * sum;
    }
}

/// Backward pass: `g` at the class node is its weight, zero at the other
/// outputs, and `g_i = w_i * sum of g_j over active edges i -> j` elsewhere.
pub(crate) fn backward(network: &Network, active: &[bool], c: NodeId, g: &mut [f64], acc: &mut [f64]) {
    let weights = network.weights();
    let edges = network.edges();
    g.iter_mut().for_each(|v| *v = 0.0);
    acc.iter_mut().for_each(|v| *v = 0.0);
    let first_output = network.outputs().start;
    g[c] = weights[c];
    for j in (0..network.num_nodes()).rev() {
        if j < first_output {
            g[j] = weights[j] * acc[j];
        }
        let gj = g[j];
        if gj != 0.0 {
            for e in network.in_edges(j) {
                if active[e] {
                    acc[edges[e].src()] += gj;
                }
            }
        }
    }
}

/// Forward velocity pass: `v_{i->j} = g_j + w_i * (sum of v over active edges into i)`.
pub(crate) fn forward_velocity(network: &Network, active: &[bool], g: &[f64], v: &mut [f64], inflow: &mut [f64]) {
    let weights = network.weights();
    let edges = network.edges();
    inflow.iter_mut().for_each(|s| *s = 0.0);
    let mut e = 0;
    for j in network.num_inputs()..network.num_nodes() {
        let end = network.in_edges(j).end;
        let mut sum = 0.0;
        while e < end {
            if active[e] {
                let i = edges[e].src();
                let ve = g[j] + weights[i] * inflow[i];
                v[e] = ve;
                sum += ve;
            } else {
                v[e] = 0.0;
            }
            e += 1;
        }
        inflow[j] = sum;
    }
}

/// Evaluates the network on input `d >= 0`.
pub fn eval(network: &Network, biases: &BiasVector, d: &[f64]) -> Result<ActivationState> {
    check_input(network, d)?;
    check_biases(network, biases)?;
    let mut x = vec![0.0; network.num_nodes()];
    let mut y = vec![0.0; network.num_edges()];
    forward(network, biases.as_slice(), d, &mut x, &mut y);
    let active = y.iter().map(|&v| v > 0.0).collect();
    Ok(ActivationState { x, y, active })
}

/// Gradient magnitudes of the output of `class` over the active edges.
pub fn grad(network: &Network, state: &ActivationState, class: usize) -> Result<GradField> {
    let c = class_node(network, class)?;
    if state.active.len() != network.num_edges() {
        return Err(Error::Dimension {
            what: "active set",
            expected: network.num_edges(),
            got: state.active.len(),
        });
    }
    let mut g = vec![0.0; network.num_nodes()];
    let mut acc = vec![0.0; network.num_nodes()];
    backward(network, &state.active, c, &mut g, &mut acc);
    Ok(GradField { g })
}

/// Edge-output velocities for biases moving along `grad`.
pub fn velocity(network: &Network, state: &ActivationState, grad: &GradField) -> Result<VelocityField> {
    if state.active.len() != network.num_edges() || state.y.len() != network.num_edges() {
        return Err(Error::Dimension {
            what: "activation state",
            expected: network.num_edges(),
            got: state.active.len(),
        });
    }
    if grad.g.len() != network.num_nodes() {
        return Err(Error::Dimension {
            what: "gradient field",
            expected: network.num_nodes(),
            got: grad.g.len(),
        });
    }
    if let Some(e) = (0..network.num_edges()).find(|&e| state.active[e] != (state.y[e] > 0.0)) {
        return Err(Error::InvariantBreach(alloc::format!(
            "edge {e} marked {} but has output {}",
            if state.active[e] { "active" } else { "inactive" },
            state.y[e]
        )));
    }
    let mut v = vec![0.0; network.num_edges()];
    let mut inflow = vec![0.0; network.num_nodes()];
    forward_velocity(network, &state.active, &grad.g, &mut v, &mut inflow);
    Ok(VelocityField { v })
}

/// Result of the counterfactual classification rule: the predicted classes
/// are the outputs attaining the minimum value.
///
/// When the minimum is (numerically) zero, every output at or below the zero
/// threshold belongs to the tie; otherwise every output within the zero
/// threshold of the minimum does, so that ties exact in real arithmetic
/// survive rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub outputs: Vec<f64>,
    pub min: f64,
    pub zero_threshold: f64,
    pub tied: Vec<usize>,
}

impl Classification {
    pub fn from_outputs(outputs: &[f64], zero_threshold: f64) -> Self {
        let min = outputs.iter().copied().fold(f64::INFINITY, f64::min);
        let limit = if min <= zero_threshold {
            zero_threshold
        } else {
            min + zero_threshold
        };
        let tied = (0..outputs.len()).filter(|&k| outputs[k] <= limit).collect();
        Classification {
            outputs: outputs.to_vec(),
            min,
            zero_threshold,
            tied,
        }
    }

    /// `class` is the unique minimum.
    pub fn is_strict(&self, class: usize) -> bool {
        self.tied.len() == 1 && self.tied[0] == class
    }

    pub fn is_zero(&self, class: usize) -> bool {
        self.outputs[class] <= self.zero_threshold
    }

    /// Accuracy credit: 1 for a unique correct minimum, `1/m` for an
    /// `m`-fold tie containing the correct class, 0 otherwise.
    pub fn score(&self, class: usize) -> f64 {
        if self.tied.contains(&class) {
            1.0 / self.tied.len() as f64
        } else {
            0.0
        }
    }

    /// Some output other than `class` sits at zero: no later training can
    /// lift it, so the item stays misclassified or ambiguous.
    pub fn has_wrong_zero(&self, class: usize) -> bool {
        self.outputs
            .iter()
            .enumerate()
            .any(|(k, &v)| k != class && v <= self.zero_threshold)
    }
}

pub fn classify(network: &Network, biases: &BiasVector, d: &[f64]) -> Result<Classification> {
    check_input(network, d)?;
    check_biases(network, biases)?;
    let mut x = vec![0.0; network.num_nodes()];
    forward_nodes(network, biases.as_slice(), d, &mut x);
    Ok(Classification::from_outputs(&x[network.outputs()], zero_threshold(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{complete_boolean_network, fragment};
    use crate::encode::encode_boolean;

    fn chain() -> Network {
        use crate::netgraph::Edge;
        Network::new(vec![1, 1, 1], vec![1.0; 3], vec![Edge::new(0, 1), Edge::new(1, 2)]).unwrap()
    }

    #[test]
    fn zero_bias_chain_passes_input_through() {
        let net = chain();
        let s = eval(&net, &BiasVector::zeros(2), &[1.0]).unwrap();
        assert_eq!(s.outputs(&net), &[1.0]);
        assert_eq!(s.active, vec![true, true]);
    }

    #[test]
    fn chain_grad_and_velocity() {
        let net = chain();
        let s = eval(&net, &BiasVector::zeros(2), &[1.0]).unwrap();
        let g = grad(&net, &s, 0).unwrap();
        assert_eq!(g.g, vec![1.0, 1.0, 1.0]);
        let v = velocity(&net, &s, &g).unwrap();
        assert_eq!(v.v, vec![1.0, 2.0]);
    }

    #[test]
    fn grad_without_active_edges() {
        let net = chain();
        let s = eval(&net, &BiasVector::from_vec(vec![0.0, 5.0]).unwrap(), &[1.0]).unwrap();
        assert_eq!(s.active, vec![true, false]);
        let g = grad(&net, &s, 0).unwrap();
        assert_eq!(g.g, vec![0.0, 0.0, 1.0]);
        assert!(matches!(grad(&net, &s, 1), Err(Error::NotAnOutput(_))));
    }

    #[test]
    fn complete_boolean_hidden_values_count_true_literals() {
        let w = 0.37;
        let net = complete_boolean_network(2, w).unwrap();
        let d = encode_boolean(&[true, false]);
        let s = eval(&net, &BiasVector::zeros(net.num_edges()), &d).unwrap();
        for h in net.layer(1) {
            let ones: f64 = net.in_edges(h).map(|e| d[net.edge(e).src()]).sum();
            assert_eq!(s.x[h], w * ones);
            assert!([0.0, w, 2.0 * w].contains(&s.x[h]));
        }
    }

    #[test]
    fn fragment_hand_values() {
        // nodes 1 -> 2 -> {3, c}, 3 -> c; x_c = w + max(0, w - b)
        for &(w, b) in &[(1.0, 0.0), (2.0, 0.5), (0.5, 1.0)] {
            let (net, biases) = fragment(w, b);
            let s = eval(&net, &biases, &[1.0]).unwrap();
            let expect = w + if w > b { w - b } else { 0.0 };
            assert!((s.outputs(&net)[0] - expect).abs() < 1e-15);
        }
        let (net, biases) = fragment(1.0, 0.0);
        let s = eval(&net, &biases, &[1.0]).unwrap();
        let g = grad(&net, &s, 0).unwrap();
        // node ids: 0 = input 1, 1 = node 2, 2 = node 3, 3 = c
        assert_eq!(g.g, vec![2.0, 2.0, 1.0, 1.0]);
        let v = velocity(&net, &s, &g).unwrap();
        let by_pair = |a: usize, b: usize| {
            let e = net.edges().iter().position(|e| e.src() == a && e.dst() == b).unwrap();
            v.v[e]
        };
        assert_eq!(by_pair(0, 1), 2.0);
        assert_eq!(by_pair(1, 2), 3.0);
        assert_eq!(by_pair(1, 3), 3.0);
        assert_eq!(by_pair(2, 3), 4.0);
    }

    #[test]
    fn fragment_gradient_scales_with_weight() {
        let w = 0.8;
        let (net, biases) = fragment(w, 0.0);
        let s = eval(&net, &biases, &[1.0]).unwrap();
        let g = grad(&net, &s, 0).unwrap();
        assert_eq!(g.g, vec![2.0 * w, 2.0 * w, 1.0, 1.0]);
    }

    #[test]
    fn velocity_rejects_inconsistent_state() {
        let net = chain();
        let mut s = eval(&net, &BiasVector::zeros(2), &[1.0]).unwrap();
        let g = grad(&net, &s, 0).unwrap();
        s.y[1] = 0.0;
        assert!(matches!(velocity(&net, &s, &g), Err(Error::InvariantBreach(_))));
    }

    #[test]
    fn eval_rejects_bad_inputs() {
        let net = chain();
        assert!(matches!(eval(&net, &BiasVector::zeros(2), &[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(matches!(eval(&net, &BiasVector::zeros(2), &[-1.0]), Err(Error::Negative { .. })));
    }

    #[test]
    fn classification_rules() {
        let c = Classification::from_outputs(&[0.0, 3.2], 1e-12);
        assert_eq!(c.tied, vec![0]);
        assert!(c.is_strict(0));

        let c = Classification::from_outputs(&[0.0, 0.0, 1.0], 1e-12);
        assert_eq!(c.tied, vec![0, 1]);
        assert_eq!(c.score(1), 0.5);
        assert_eq!(c.score(2), 0.0);
        assert!(c.has_wrong_zero(0));

        let c = Classification::from_outputs(&[0.5, 0.5], 1e-12);
        assert_eq!(c.tied, vec![0, 1]);
        assert!(!c.has_wrong_zero(0));
    }

    #[test]
    fn fresh_network_has_no_zero_output() {
        let net = complete_boolean_network(3, 0.5).unwrap();
        let d = encode_boolean(&[true, true, false]);
        let c = classify(&net, &BiasVector::zeros(net.num_edges()), &d).unwrap();
        assert!(c.outputs.iter().all(|&v| v > 0.0));
    }
}
