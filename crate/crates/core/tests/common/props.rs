//! Randomized-network property checks, shared by the core property tests
//! and the acceptance target.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rwnet_core::builders::{assign_balanced_weights, path_counts, rescale_to_unit_weights};
use rwnet_core::dynamics::zero_threshold;
use rwnet_core::encode::encode_boolean;
use rwnet_core::trainer::run_trial;
use rwnet_core::*;

#[derive(Debug, Clone, Copy)]
pub enum Weights {
    Random,
    /// One power of two per layer.
    LayerPow2,
    Unit,
}

/// Random strictly layered network: every node of layer `l >= 1` draws
/// 1..=3 sources from layer `l - 1`, orphans get one extra out-edge, and the
/// last hidden layer feeds every output.
pub fn random_network(seed: u64, inputs: usize, hidden: &[usize], classes: usize, weights: Weights) -> Network {
    let mut rng = SeededRng::new(seed);
    let mut sizes = vec![inputs];
    sizes.extend_from_slice(hidden);
    sizes.push(classes);
    let starts: Vec<usize> = sizes.iter().scan(0, |acc, &s| {
        let v = *acc;
        *acc += s;
        Some(v)
    })
    .collect();
    let n: usize = sizes.iter().sum();
    let mut edges = Vec::new();
    let last = sizes.len() - 1;
    for l in 1..last {
        let mut used = vec![false; sizes[l - 1]];
        for j in 0..sizes[l] {
            for _ in 0..1 + rng.below(3) {
                let s = rng.below(sizes[l - 1]);
                used[s] = true;
                edges.push(Edge::new(starts[l - 1] + s, starts[l] + j));
            }
        }
        for (s, u) in used.iter().enumerate() {
            if !u {
                edges.push(Edge::new(starts[l - 1] + s, starts[l] + rng.below(sizes[l])));
            }
        }
    }
    for j in 0..sizes[last - 1] {
        for k in 0..classes {
            edges.push(Edge::new(starts[last - 1] + j, starts[last] + k));
        }
    }
    let mut w = vec![1.0; n];
    for l in 1..sizes.len() {
        let layer_w = match weights {
            Weights::LayerPow2 => (1u32 << rng.below(7)) as f64 / 8.0,
            _ => 1.0,
        };
        for node in starts[l]..starts[l] + sizes[l] {
            w[node] = match weights {
                Weights::Random => 0.2 + 1.8 * rng.unit_f64(),
                Weights::LayerPow2 => layer_w,
                Weights::Unit => 1.0,
            };
        }
    }
    Network::new(sizes, w, edges).unwrap()
}

pub fn random_biases(net: &Network, rng: &mut SeededRng, scale: f64) -> BiasVector {
    let v = (0..net.num_edges())
        .map(|_| if rng.below(3) == 0 { 0.0 } else { scale * rng.unit_f64() })
        .collect();
    BiasVector::from_vec(v).unwrap()
}

pub fn random_input(net: &Network, rng: &mut SeededRng) -> Vec<f64> {
    (0..net.num_inputs())
        .map(|_| if rng.below(5) == 0 { 0.0 } else { rng.unit_f64() })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub seed: u64,
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
}

pub fn shape() -> impl Strategy<Value = Shape> {
    (any::<u64>(), 1usize..6, prop::collection::vec(1usize..7, 1..4), 1usize..4).prop_map(
        |(seed, inputs, hidden, classes)| Shape {
            seed,
            inputs,
            hidden,
            classes,
        },
    )
}

pub fn build(s: &Shape, w: Weights) -> (Network, SeededRng) {
    let net = random_network(s.seed, s.inputs, &s.hidden, s.classes, w);
    (net, SeededRng::new(s.seed ^ 0x9e37_79b9_7f4a_7c15))
}

pub fn class_output(net: &Network, b: &BiasVector, d: &[f64], class: usize) -> f64 {
    eval(net, b, d).unwrap().x[net.output_node(class)]
}


pub fn raising_biases_never_raises_node_values(s: &Shape) -> Result<(), TestCaseError> {
    let (net, mut rng) = build(s, Weights::Random);
    let b = random_biases(&net, &mut rng, 1.0);
    let raised: Vec<f64> = b.as_slice().iter().map(|v| v + if rng.bit() { rng.unit_f64() } else { 0.0 }).collect();
    let raised = BiasVector::from_vec(raised).unwrap();
    let d = random_input(&net, &mut rng);
    let lo = eval(&net, &raised, &d).unwrap();
    let hi = eval(&net, &b, &d).unwrap();
    for j in 0..net.num_nodes() {
        prop_assert!(lo.x[j] <= hi.x[j], "node {j}: {} > {}", lo.x[j], hi.x[j]);
    }
    Ok(())
}

pub fn class_output_is_convex_in_biases(s: &Shape) -> Result<(), TestCaseError> {
    let (net, mut rng) = build(s, Weights::Random);
    let lambda = rng.unit_f64();
    let b1 = random_biases(&net, &mut rng, 1.0);
    let b2 = random_biases(&net, &mut rng, 1.0);
    let mix: Vec<f64> = b1.as_slice().iter().zip(b2.as_slice()).map(|(p, q)| lambda * p + (1.0 - lambda) * q).collect();
    let mix = BiasVector::from_vec(mix).unwrap();
    let d = random_input(&net, &mut rng);
    for class in 0..s.classes {
        let f1 = class_output(&net, &b1, &d, class);
        let f2 = class_output(&net, &b2, &d, class);
        let fm = class_output(&net, &mix, &d, class);
        let bound = lambda * f1 + (1.0 - lambda) * f2;
        prop_assert!(fm <= bound + 1e-12 * (1.0 + bound.abs()), "{fm} > {bound}");
    }
    Ok(())
}

pub fn gradient_matches_central_differences(s: &Shape) -> Result<(), TestCaseError> {
    let (net, mut rng) = build(s, Weights::Random);
    let b = random_biases(&net, &mut rng, 0.5);
    let d = random_input(&net, &mut rng);
    let class = rng.below(s.classes);
    let st = eval(&net, &b, &d).unwrap();
    let g = grad(&net, &st, class).unwrap();
    let h = 1e-7;
    // stay away from kinks: every edge output or pre-activation is
    // far from zero relative to the probe width
    let margin = 1e3 * h;
    let clear = (0..net.num_edges()).all(|e| {
        let xs = st.x[net.edge(e).src()];
        (xs - b[e]).abs() > margin || (xs == 0.0 && b[e] == 0.0)
    });
    prop_assume!(clear);
    let f = |b: Vec<f64>| class_output(&net, &BiasVector::from_vec(b).unwrap(), &d, class);
    for e in 0..net.num_edges() {
        let mut up = b.clone().into_vec();
        let mut dn = up.clone();
        up[e] += h;
        // one-sided at the non-negativity boundary
        let fd = if b[e] >= h {
            dn[e] -= h;
            (f(up) - f(dn)) / (2.0 * h)
        } else {
            (f(up) - f(dn)) / h
        };
        let exact = if st.active[e] { -g.g[net.edge(e).dst()] } else { 0.0 };
        let tol = 1e-6 * exact.abs().max(1.0);
        prop_assert!((fd - exact).abs() <= tol, "edge {e}: fd {fd} vs {exact}");
    }
    Ok(())
}

pub fn edge_outputs_follow_velocity_until_first_kink(s: &Shape) -> Result<(), TestCaseError> {
    let (net, mut rng) = build(s, Weights::Random);
    let frac = 0.01 + 0.98 * rng.unit_f64();
    let b = random_biases(&net, &mut rng, 0.5);
    let d = random_input(&net, &mut rng);
    let class = rng.below(s.classes);
    let st = eval(&net, &b, &d).unwrap();
    prop_assume!(st.x[net.output_node(class)] > 0.0);
    let g = grad(&net, &st, class).unwrap();
    let v = velocity(&net, &st, &g).unwrap();
    let t_star = (0..net.num_edges())
        .filter(|&e| st.active[e] && v.v[e] > 0.0)
        .map(|e| st.y[e] / v.v[e])
        .fold(f64::INFINITY, f64::min);
    prop_assume!(t_star.is_finite());
    let t = frac * t_star;
    let moved: Vec<f64> = (0..net.num_edges())
        .map(|e| if st.active[e] { b[e] + t * g.g[net.edge(e).dst()] } else { b[e] })
        .collect();
    let after = eval(&net, &BiasVector::from_vec(moved).unwrap(), &d).unwrap();
    for e in 0..net.num_edges() {
        let predicted = if st.active[e] { st.y[e] - t * v.v[e] } else { 0.0 };
        let scale = st.y[e].abs().max(1.0);
        prop_assert!((after.y[e] - predicted).abs() <= 1e-9 * scale, "edge {e}: {} vs {predicted}", after.y[e]);
    }
    Ok(())
}

pub fn sda_never_lowers_a_bias(s: &Shape) -> Result<(), TestCaseError> {
    let (net, mut rng) = build(s, Weights::Random);
    let aggressive = rng.bit();
    let b = random_biases(&net, &mut rng, 0.5);
    let d = random_input(&net, &mut rng);
    let class = rng.below(s.classes);
    let mode = if aggressive { TerminationMode::Aggressive } else { TerminationMode::UltraConservative };
    let out = sda_update(&net, &b, &d, class, mode).unwrap();
    prop_assert!(out.updated_biases.dominates(&b));
    let cls = classify(&net, &out.updated_biases, &d).unwrap();
    let eps = zero_threshold(&d);
    match mode {
        TerminationMode::Aggressive => prop_assert!(cls.outputs[class] <= eps),
        TerminationMode::UltraConservative => prop_assert!(cls.outputs[class] <= eps || cls.is_strict(class)),
    }
    Ok(())
}

pub fn rescaling_to_unit_weights_keeps_classification(s: &Shape) -> Result<(), TestCaseError> {
    let (net, mut rng) = build(s, Weights::LayerPow2);
    let b = random_biases(&net, &mut rng, 2.0);
    let d = random_input(&net, &mut rng);
    let (unit, ub) = rescale_to_unit_weights(&net, &b).unwrap();
    let w_out = rwnet_core::builders::layer_weight_products(&net).unwrap()[net.num_layers() - 1];
    let a = eval(&net, &b, &d).unwrap();
    let u = eval(&unit, &ub, &d).unwrap();
    for k in net.outputs() {
        prop_assert_eq!(u.x[k] * w_out, a.x[k]);
    }
    let ca = classify(&net, &b, &d).unwrap();
    let cu = classify(&unit, &ub, &d).unwrap();
    prop_assert_eq!(ca.tied, cu.tied);
    Ok(())
}

pub fn small_weights_only_deactivate_final_layer(s: &Shape) -> Result<(), TestCaseError> {
    let n = 1 + s.inputs % 3;
    let h = 1 + (s.seed >> 60) as usize % 2;
    let hidden: Vec<usize> = s.hidden.iter().take(h).copied().collect();
    let net = random_network(s.seed, 2 * n, &hidden, 2, Weights::Unit);
    let net = assign_balanced_weights(&net, 1e-3).unwrap();
    let mut rng = SeededRng::new(s.seed.rotate_left(17));
    let samples: Vec<Sample> = (0..1 << n)
        .map(|_| {
            let bits: Vec<bool> = (0..n).map(|_| rng.bit()).collect();
            Sample::new(encode_boolean(&bits), rng.below(2))
        })
        .collect();
    let t = run_trial(&net, &samples, TerminationMode::UltraConservative, 3).unwrap();
    let (_, rest) = t.deactivated_layers.split_last().unwrap();
    prop_assert!(rest.iter().all(|&c| c == 0), "{:?}", t.deactivated_layers);
    Ok(())
}

pub fn zero_bias_values_are_path_weighted_sums(s: &Shape) -> Result<(), TestCaseError> {
    let (net, mut rng) = build(s, Weights::Unit);
    let d = random_input(&net, &mut rng);
    let st = eval(&net, &BiasVector::zeros(net.num_edges()), &d).unwrap();
    let a = path_counts(&net).unwrap();
    let last = net.layer(net.num_layers() - 2);
    for (r, j) in last.enumerate() {
        let expect: f64 = (0..net.num_inputs()).map(|i| a.get(r, i) as f64 * d[i]).sum();
        prop_assert!((st.x[j] - expect).abs() <= 1e-12 * expect.max(1.0), "{} vs {expect}", st.x[j]);
    }
    Ok(())
}

pub fn degrees_sum_to_edge_count_and_text_round_trips(s: &Shape) -> Result<(), TestCaseError> {
    let (net, _) = build(s, Weights::Random);
    let (mut ins, mut outs) = (0, 0);
    for j in 0..net.num_nodes() {
        let (i, o) = net.degree(j).unwrap();
        ins += i;
        outs += o;
    }
    prop_assert_eq!(ins, net.num_edges());
    prop_assert_eq!(outs, net.num_edges());
    let back = Network::from_text(&net.to_text()).unwrap();
    prop_assert_eq!(back, net);
    Ok(())
}

pub type Property = fn(&Shape) -> Result<(), TestCaseError>;

pub const SUITES: [(&str, Property); 9] = [
    ("bias monotonicity of node values", raising_biases_never_raises_node_values),
    ("convexity of the class output", class_output_is_convex_in_biases),
    ("gradient vs finite differences", gradient_matches_central_differences),
    ("velocity consistency of edge outputs", edge_outputs_follow_velocity_until_first_kink),
    ("updated biases dominate old ones", sda_never_lowers_a_bias),
    ("rescaling keeps classification", rescaling_to_unit_weights_keeps_classification),
    ("small q deactivates final layer only", small_weights_only_deactivate_final_layer),
    ("zero-bias path-count identity", zero_bias_values_are_path_weighted_sums),
    ("degree sums and text round trip", degrees_sum_to_edge_count_and_text_round_trips),
];

/// Runs one property over `cases` random networks.
pub fn run(property: Property, cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&shape(), |s| property(&s)).map_err(|e| e.to_string())
}
