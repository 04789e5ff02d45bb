use rwnet_core::builders::{assign_balanced_weights, build_expander, complete_boolean_network, ExpanderSpec};
use rwnet_core::synthdata::{BooleanFunction, NmfSpec};
use rwnet_core::trainer::{evaluate, train, StopReason, TrainConfig};
use rwnet_core::{BiasVector, Sample, SeededRng};

#[test]
fn xor_is_learned_end_to_end() {
    let net = assign_balanced_weights(&complete_boolean_network(2, 1.0).unwrap(), 1.0).unwrap();
    let data = BooleanFunction::named(2, "fplus").unwrap().samples();
    let mut b = BiasVector::zeros(net.num_edges());
    let rep = train(&net, &mut b, &data, &data, &TrainConfig { batch: 1, ..Default::default() }).unwrap();
    assert_eq!(rep.stop, StopReason::QuietPass);
    assert!(rep.err_total > 0);
    assert_eq!(evaluate(&net, &b, &data).unwrap().acc, 1.0);
    assert!(b.dominates(&BiasVector::zeros(net.num_edges())));
    for w in rep.rows.windows(2) {
        assert!(w[0].err_total <= w[1].err_total && w[0].iter_total <= w[1].iter_total);
    }
}

#[test]
fn expander_shape_matches_its_formula() {
    for (inputs, classes, growth, hidden_layers) in [(4, 2, 2, 1), (6, 3, 3, 2), (10, 10, 2, 3), (60, 2, 6, 2)] {
        let spec = ExpanderSpec {
            inputs,
            classes,
            growth,
            hidden_layers,
            seed: 11,
        };
        let net = build_expander(&spec).unwrap();
        assert_eq!(net.num_edges(), spec.edge_count());
        for j in net.inputs() {
            assert_eq!(net.degree(j).unwrap(), (0, 2 * growth));
        }
        let last = net.num_layers() - 2;
        for l in 1..last {
            for j in net.layer(l) {
                assert_eq!(net.degree(j).unwrap(), (2, 2 * growth));
            }
        }
        for j in net.layer(last) {
            assert_eq!(net.degree(j).unwrap(), (2, classes));
        }
        for j in net.outputs() {
            assert_eq!(net.degree(j).unwrap().0, net.layer(last).len());
        }
    }
}

#[test]
fn fresh_network_keeps_every_edge_active() {
    let spec = ExpanderSpec {
        inputs: 48,
        classes: 2,
        growth: 3,
        hidden_layers: 2,
        seed: 5,
    };
    let net = assign_balanced_weights(&build_expander(&spec).unwrap(), 1.0).unwrap();
    let mut rng = SeededRng::new(3);
    let test: Vec<Sample> = (0..50)
        .map(|k| Sample::new((0..48).map(|_| 0.1 + rng.unit_f64()).collect(), k % 2))
        .collect();
    let ev = evaluate(&net, &BiasVector::zeros(net.num_edges()), &test).unwrap();
    assert_eq!(ev.alpha, vec![1.0, 1.0]);
}

#[test]
fn biases_only_grow_over_a_run() {
    let spec = NmfSpec {
        p: 31,
        a: 1,
        b: 2,
        c: 3,
        n: 1,
    };
    let net = assign_balanced_weights(
        &build_expander(&ExpanderSpec {
            inputs: 2 * spec.num_args(),
            classes: 2,
            growth: 2,
            hidden_layers: 2,
            seed: 1,
        })
        .unwrap(),
        1.0,
    )
    .unwrap();
    let data = spec.dataset(1500, 4).unwrap();
    let mut b = BiasVector::zeros(net.num_edges());
    for chunk in data.chunks(300) {
        let before = b.clone();
        let config = TrainConfig {
            stop_when_quiet: false,
            max_items: Some(chunk.len()),
            ..Default::default()
        };
        train(&net, &mut b, chunk, &data[..100], &config).unwrap();
        assert!(b.dominates(&before));
    }
}
