//! Boolean circuits and their compilation to rectified wire networks.
//!
//! Every circuit signal becomes a fork pair of nodes `(p, n)` carrying
//! `(1, 0)` for true and `(0, 1)` for false, so NOT is a free swap. Binary
//! gates use these gadgets (`R1(s) = max(0, s - 1)`, one bias-1 edge):
//!
//! ```text
//! AND   y = R1(a + b)          !y = !a + R1(a + !b)
//! OR    y = a + R1(!a + b)     !y = R1(!a + !b)
//! ```
//!
//! Both halves of each gadget are sums of mutually exclusive 0/1 terms, so
//! the fork nodes stay in {0, 1}. The intermediate sum nodes may reach 2.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::dynamics::forward_nodes;
use crate::error::{Error, Result};
use crate::netgraph::{BiasVector, Edge, Network, NodeId};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Input(usize),
    Gate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    And(Signal, Signal),
    Or(Signal, Signal),
    Not(Signal),
}

impl Gate {
    fn operands(&self) -> impl Iterator<Item = Signal> {
        let (a, b) = match *self {
            Gate::And(a, b) | Gate::Or(a, b) => (a, Some(b)),
            Gate::Not(a) => (a, None),
        };
        core::iter::once(a).chain(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanCircuit {
    inputs: Vec<String>,
    gate_names: Vec<String>,
    gates: Vec<Gate>,
    output: Signal,
}

impl BooleanCircuit {
    /// Gates may only reference inputs and earlier gates.
    pub fn new(num_inputs: usize, gates: Vec<Gate>, output: Signal) -> Result<Self> {
        let inputs = (1..=num_inputs).map(|i| format!("x{i}")).collect();
        let gate_names = (1..=gates.len()).map(|k| format!("g{k}")).collect();
        Self::with_names(inputs, gate_names, gates, output)
    }

    fn with_names(inputs: Vec<String>, gate_names: Vec<String>, gates: Vec<Gate>, output: Signal) -> Result<Self> {
        let check = |s: Signal, limit: usize| match s {
            Signal::Input(i) if i < inputs.len() => Ok(()),
            Signal::Gate(k) if k < limit => Ok(()),
            _ => Err(Error::InvalidSpec(format!("signal {s:?} is undefined at its point of use"))),
        };
        for (k, g) in gates.iter().enumerate() {
            for s in g.operands() {
                check(s, k)?;
            }
        }
        check(output, gates.len())?;
        Ok(BooleanCircuit {
            inputs,
            gate_names,
            gates,
            output,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> Signal {
        self.output
    }

    pub fn num_binary_gates(&self) -> usize {
        self.gates.iter().filter(|g| !matches!(g, Gate::Not(_))).count()
    }

    pub fn evaluate(&self, bits: &[bool]) -> bool {
        let mut values = Vec::with_capacity(self.gates.len());
        let get = |s: Signal, values: &Vec<bool>| match s {
            Signal::Input(i) => bits[i],
            Signal::Gate(k) => values[k],
        };
        for g in &self.gates {
            let v = match *g {
                Gate::And(a, b) => get(a, &values) && get(b, &values),
                Gate::Or(a, b) => get(a, &values) || get(b, &values),
                Gate::Not(a) => !get(a, &values),
            };
            values.push(v);
        }
        get(self.output, &values)
    }

    /// Parses `in x1 ... xN`, then `name = AND|OR a b` / `name = NOT a`
    /// lines, then `out name`. Blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Malformed(format!("line {line}: {msg}"));
        let mut names: BTreeMap<String, Signal> = BTreeMap::new();
        let mut inputs: Option<Vec<String>> = None;
        let mut gate_names = Vec::new();
        let mut gates = Vec::new();
        let mut output = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if output.is_some() {
                return Err(err(line, "content after the `out` line".into()));
            }
            let tokens: Vec<&str> = body.split_whitespace().collect();
            match tokens[0] {
                "in" => {
                    if inputs.is_some() || !gates.is_empty() {
                        return Err(err(line, "`in` must be the first definition and appear once".into()));
                    }
                    let list: Vec<String> = tokens[1..].iter().map(|s| s.to_string()).collect();
                    for (i, name) in list.iter().enumerate() {
                        if names.insert(name.clone(), Signal::Input(i)).is_some() {
                            return Err(err(line, format!("duplicate name `{name}`")));
                        }
                    }
                    inputs = Some(list);
                }
                "out" => {
                    if tokens.len() != 2 {
                        return Err(err(line, "expected `out <name>`".into()));
                    }
                    let s = names
                        .get(tokens[1])
                        .ok_or_else(|| err(line, format!("unknown signal `{}`", tokens[1])))?;
                    output = Some(*s);
                }
                name => {
                    if inputs.is_none() {
                        return Err(err(line, "gate defined before the `in` line".into()));
                    }
                    if tokens.len() < 3 || tokens[1] != "=" {
                        return Err(err(line, "expected `<name> = AND|OR|NOT ...`".into()));
                    }
                    let operand = |t: &str| {
                        names
                            .get(t)
                            .copied()
                            .ok_or_else(|| err(line, format!("unknown signal `{t}`")))
                    };
                    let gate = match (tokens[2], tokens.len()) {
                        ("AND", 5) => Gate::And(operand(tokens[3])?, operand(tokens[4])?),
                        ("OR", 5) => Gate::Or(operand(tokens[3])?, operand(tokens[4])?),
                        ("NOT", 4) => Gate::Not(operand(tokens[3])?),
                        (op, _) => return Err(err(line, format!("bad gate `{op}` or operand count"))),
                    };
                    if names.insert(name.to_string(), Signal::Gate(gates.len())).is_some() {
                        return Err(err(line, format!("duplicate name `{name}`")));
                    }
                    gate_names.push(name.to_string());
                    gates.push(gate);
                }
            }
        }
        let inputs = inputs.ok_or_else(|| Error::Malformed("missing `in` line".into()))?;
        let output = output.ok_or_else(|| Error::Malformed("missing `out` line".into()))?;
        Self::with_names(inputs, gate_names, gates, output)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("in");
        for name in &self.inputs {
            s.push(' ');
            s.push_str(name);
        }
        s.push('\n');
        let name = |sig: Signal| match sig {
            Signal::Input(i) => self.inputs[i].as_str(),
            Signal::Gate(k) => self.gate_names[k].as_str(),
        };
        for (k, g) in self.gates.iter().enumerate() {
            let _ = match *g {
                Gate::And(a, b) => writeln!(s, "{} = AND {} {}", self.gate_names[k], name(a), name(b)),
                Gate::Or(a, b) => writeln!(s, "{} = OR {} {}", self.gate_names[k], name(a), name(b)),
                Gate::Not(a) => writeln!(s, "{} = NOT {}", self.gate_names[k], name(a)),
            };
        }
        let _ = writeln!(s, "out {}", name(self.output));
        s
    }
}

/// Random circuit: each gate is AND, OR or NOT with operands drawn
/// uniformly from the inputs and earlier gates; the last gate is the output.
pub fn random_circuit(num_inputs: usize, num_gates: usize, rng: &mut SeededRng) -> BooleanCircuit {
    let mut gates = Vec::with_capacity(num_gates);
    for k in 0..num_gates {
        let pick = |rng: &mut SeededRng| {
            let r = rng.below(num_inputs + k);
            if r < num_inputs {
                Signal::Input(r)
            } else {
                Signal::Gate(r - num_inputs)
            }
        };
        let gate = match rng.below(3) {
            0 => Gate::And(pick(rng), pick(rng)),
            1 => Gate::Or(pick(rng), pick(rng)),
            _ => Gate::Not(pick(rng)),
        };
        gates.push(gate);
    }
    let output = if num_gates == 0 {
        Signal::Input(0)
    } else {
        Signal::Gate(num_gates - 1)
    };
    BooleanCircuit::new(num_inputs, gates, output).expect("operands precede use")
}

/// A compiled circuit: unit weights, biases in {0, 1}, inputs doubled as
/// `(x1, !x1, x2, !x2, ...)`, outputs `(f, !f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    pub network: Network,
    pub biases: BiasVector,
    /// Gate output nodes (the fork pairs), which only ever carry 0 or 1.
    pub fork_nodes: Vec<NodeId>,
    pub hidden_nodes: usize,
    /// Largest number of hidden nodes spent on a single gate.
    pub max_gadget_nodes: usize,
}

impl CompiledCircuit {
    /// Evaluates the network on every assignment and checks it against the
    /// circuit. Returns the number of assignments checked.
    pub fn verify(&self, circuit: &BooleanCircuit) -> Result<usize> {
        let n = circuit.num_inputs();
        if n > 24 {
            return Err(Error::InvalidSpec(format!("exhaustive check over {n} inputs is too large")));
        }
        let net = &self.network;
        let mut x = vec![0.0; net.num_nodes()];
        let mut d = vec![0.0; 2 * n];
        let mut bits = vec![false; n];
        let total = 1usize << n;
        for m in 0..total {
            for i in 0..n {
                bits[i] = (m >> i) & 1 == 1;
                d[2 * i] = if bits[i] { 1.0 } else { 0.0 };
                d[2 * i + 1] = 1.0 - d[2 * i];
            }
            forward_nodes(net, self.biases.as_slice(), &d, &mut x);
            let f = circuit.evaluate(&bits);
            let expect = if f { [1.0, 0.0] } else { [0.0, 1.0] };
            if x[net.outputs()] != expect {
                return Err(Error::InvariantBreach(format!(
                    "assignment {m:#b}: network outputs {:?}, circuit gives {f}",
                    &x[net.outputs()]
                )));
            }
            if let Some(&node) = self.fork_nodes.iter().find(|&&j| x[j] != 0.0 && x[j] != 1.0) {
                return Err(Error::InvariantBreach(format!(
                    "assignment {m:#b}: fork node {node} carries {}",
                    x[node]
                )));
            }
        }
        Ok(total)
    }
}

struct Draft {
    layer: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
    forks: Vec<usize>,
}

impl Draft {
    fn node(&mut self, inputs: &[(usize, f64)], fork: bool) -> usize {
        let id = self.layer.len();
        let layer = 1 + inputs.iter().map(|&(s, _)| self.layer[s]).max().unwrap_or(0);
        self.layer.push(layer);
        for &(s, b) in inputs {
            self.edges.push((s, id, b));
        }
        if fork {
            self.forks.push(id);
        }
        id
    }
}

/// Fork pair plus an identity tag so that same-fork operands are detected.
#[derive(Clone, Copy)]
struct Wire {
    p: usize,
    n: usize,
    fork: usize,
    negated: bool,
}

impl Wire {
    fn not(self) -> Wire {
        Wire {
            p: self.n,
            n: self.p,
            fork: self.fork,
            negated: !self.negated,
        }
    }
}

pub fn compile_circuit(circuit: &BooleanCircuit) -> Result<CompiledCircuit> {
    let n_in = circuit.num_inputs();
    if n_in == 0 {
        return Err(Error::InvalidSpec("circuit has no inputs".into()));
    }
    let mut draft = Draft {
        layer: vec![0; 2 * n_in],
        edges: Vec::new(),
        forks: Vec::new(),
    };
    let mut next_fork = n_in;
    let mut gadget_nodes = Vec::with_capacity(circuit.gates.len());
    let mut wires: Vec<Wire> = Vec::with_capacity(circuit.gates.len());
    let wire_of = |s: Signal, wires: &Vec<Wire>| match s {
        Signal::Input(i) => Wire {
            p: 2 * i,
            n: 2 * i + 1,
            fork: i,
            negated: false,
        },
        Signal::Gate(k) => wires[k],
    };

    for g in &circuit.gates {
        let before = draft.layer.len();
        let wire = match *g {
            Gate::Not(a) => wire_of(a, &wires).not(),
            Gate::And(a, b) | Gate::Or(a, b) => {
                let is_and = matches!(g, Gate::And(..));
                let (a, b) = (wire_of(a, &wires), wire_of(b, &wires));
                if a.fork == b.fork && a.negated == b.negated {
                    a
                } else {
                    let (y, ny) = if a.fork == b.fork {
                        // a and !a: constant false (AND) or true (OR)
                        let zero = draft.node(&[(a.p, 1.0)], true);
                        let one = draft.node(&[(a.p, 0.0), (a.n, 0.0)], true);
                        if is_and {
                            (zero, one)
                        } else {
                            (one, zero)
                        }
                    } else if is_and {
                        let s1 = draft.node(&[(a.p, 0.0), (b.p, 0.0)], false);
                        let y = draft.node(&[(s1, 1.0)], true);
                        let s2 = draft.node(&[(a.p, 0.0), (b.n, 0.0)], false);
                        let ny = draft.node(&[(a.n, 0.0), (s2, 1.0)], true);
                        (y, ny)
                    } else {
                        let s1 = draft.node(&[(a.n, 0.0), (b.p, 0.0)], false);
                        let y = draft.node(&[(a.p, 0.0), (s1, 1.0)], true);
                        let s2 = draft.node(&[(a.n, 0.0), (b.n, 0.0)], false);
                        let ny = draft.node(&[(s2, 1.0)], true);
                        (y, ny)
                    };
                    next_fork += 1;
                    Wire {
                        p: y,
                        n: ny,
                        fork: next_fork - 1,
                        negated: false,
                    }
                }
            }
        };
        gadget_nodes.push(draft.layer.len() - before);
        wires.push(wire);
    }

    let out = wire_of(circuit.output, &wires);

    // keep only nodes that feed the outputs
    let total = draft.layer.len();
    let mut keep = vec![false; total];
    keep[out.p] = true;
    keep[out.n] = true;
    let mut by_dst: Vec<Vec<usize>> = vec![Vec::new(); total];
    for &(s, t, _) in &draft.edges {
        by_dst[t].push(s);
    }
    for j in (0..total).rev() {
        if keep[j] {
            for &s in &by_dst[j] {
                keep[s] = true;
            }
        }
    }
    keep[..2 * n_in].iter_mut().for_each(|k| *k = true);

    let top = (0..total).filter(|&j| keep[j]).map(|j| draft.layer[j]).max().unwrap_or(0);
    let num_layers = top + 2;
    let mut order: Vec<usize> = (0..total).filter(|&j| keep[j]).collect();
    order.sort_by_key(|&j| (draft.layer[j], j));
    let mut remap = vec![usize::MAX; total];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let out0 = order.len();
    let mut sizes = vec![0usize; num_layers];
    for &j in &order {
        sizes[draft.layer[j]] += 1;
    }
    sizes[num_layers - 1] = 2;

    let mut edges: Vec<(Edge, f64)> = draft
        .edges
        .iter()
        .filter(|&&(_, t, _)| keep[t])
        .map(|&(s, t, b)| (Edge::new(remap[s], remap[t]), b))
        .collect();
    edges.push((Edge::new(remap[out.p], out0), 0.0));
    edges.push((Edge::new(remap[out.n], out0 + 1), 0.0));
    let mut used = vec![false; 2 * n_in];
    for (e, _) in &edges {
        if e.src() < 2 * n_in {
            used[e.src()] = true;
        }
    }
    for (i, _) in used.iter().enumerate().filter(|(_, &u)| !u) {
        // an input of at most 1 behind a bias-1 edge never contributes
        edges.push((Edge::new(i, out0), 1.0));
    }
    edges.sort_by(|a, b| (a.0.dst, a.0.src).cmp(&(b.0.dst, b.0.src)).then(a.1.total_cmp(&b.1)));

    let network = Network::new_graded(sizes, vec![1.0; out0 + 2], edges.iter().map(|e| e.0).collect())?;
    debug_assert!(network.edges().iter().zip(&edges).all(|(a, b)| *a == b.0));
    let biases = BiasVector::from_vec(edges.iter().map(|e| e.1).collect())?;
    let fork_nodes = draft.forks.iter().filter(|&&j| keep[j]).map(|&j| remap[j]).collect();
    Ok(CompiledCircuit {
        network,
        biases,
        fork_nodes,
        hidden_nodes: out0 - 2 * n_in,
        max_gadget_nodes: gadget_nodes.into_iter().max().unwrap_or(0),
    })
}
