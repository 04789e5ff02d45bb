//! Sequential deactivation.
//!
//! Biases on active edges move along the gradient of the correct-class output
//! until the next edge deactivates; the active set is then re-derived and the
//! process repeats until the termination rule fires. Finally every inactive
//! edge has its bias lowered to `max(b_initial, x_src)`, which keeps it
//! inactive while giving back the overshoot.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{check_input, class_node, zero_threshold, ActivationState, Classification, VelocityField};
use crate::error::{Error, Result};
use crate::netgraph::{BiasVector, EdgeId, Network};

/// Relative window within which step ratios count as tied with the minimum.
pub const TIE_WINDOW: f64 = 1e-12;

/// Active edges with `y <= KINK_REL * x_src` are treated as sitting on
/// their kink.
pub const KINK_REL: f64 = 1e-12;

/// Slack added to the initial active-edge count to form the iteration cap.
pub const ITERATION_SLACK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationMode {
    /// Stop once the correct output is zero or the strict minimum.
    UltraConservative,
    /// Stop only once the correct output is zero.
    Aggressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    AlreadyCorrect,
    MadeStrictMin,
    MadeZero,
    /// The correct output is zero but so is some other output.
    IrreversibleTie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdaOutcome {
    pub updated_biases: BiasVector,
    pub iterations: usize,
    pub terminal: Terminal,
    /// `deactivated_layers[l]` counts edges with source in layer `l` that
    /// were switched off during the gradient steps.
    pub deactivated_layers: Vec<usize>,
    /// Correct-class output after the update.
    pub final_output: f64,
}

/// Bookkeeping of one update performed in place by [`Sda::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SdaStats {
    pub iterations: usize,
    pub terminal: Terminal,
    pub deactivated_layers: Vec<usize>,
    pub final_output: f64,
}

/// Returns the first deactivation time `t* = min y/v` over active edges with
/// positive velocity, and every edge whose ratio lies within the tie window.
pub fn step_size(state: &ActivationState, velocity: &VelocityField) -> Result<(f64, Vec<EdgeId>)> {
    let mut t_star = f64::INFINITY;
    for e in 0..state.active.len() {
        let v = velocity.v[e];
        if state.active[e] && v > 0.0 {
            t_star = t_star.min(state.y[e] / v);
        }
    }
    if !t_star.is_finite() {
        return Err(Error::InvariantBreach("no active edge with positive velocity".into()));
    }
    let limit = t_star * (1.0 + TIE_WINDOW);
    let argmin = (0..state.active.len())
        .filter(|&e| state.active[e] && velocity.v[e] > 0.0 && state.y[e] / velocity.v[e] <= limit)
        .collect();
    Ok((t_star, argmin))
}

/// Reusable buffers for repeated updates on one network.
///
/// Within one update biases only rise and node values only fall, so an edge
/// that goes inactive stays inactive. After the first full forward pass every
/// sweep runs over the `live` list of active edges only.
#[derive(Debug, Clone, Default)]
pub struct Sda {
    x: Vec<f64>,
    y: Vec<f64>,
    active: Vec<bool>,
    g: Vec<f64>,
    acc: Vec<f64>,
    v: Vec<f64>,
    inflow: Vec<f64>,
    forced: Vec<bool>,
    initial: Vec<f64>,
    /// Active edge ids, ascending (grouped by destination node).
    live: Vec<EdgeId>,
}

impl Sda {
    pub fn new(network: &Network) -> Self {
        let n = network.num_nodes();
        let m = network.num_edges();
        Sda {
            x: vec![0.0; n],
            y: vec![0.0; m],
            active: vec![false; m],
            g: vec![0.0; n],
            acc: vec![0.0; n],
            v: vec![0.0; m],
            inflow: vec![0.0; n],
            forced: vec![false; m],
            initial: vec![0.0; m],
            live: Vec::with_capacity(m),
        }
    }

    fn resize(&mut self, network: &Network) {
        if self.x.len() != network.num_nodes() || self.y.len() != network.num_edges() {
            *self = Sda::new(network);
        }
    }

    /// Full forward pass; rebuilds the live list.
    fn eval_all(&mut self, network: &Network, b: &[f64], d: &[f64]) {
        let weights = network.weights();
        let edges = network.edges();
        let n_in = network.num_inputs();
        self.x[..n_in].copy_from_slice(d);
        self.live.clear();
        let mut e = 0;
        for j in n_in..network.num_nodes() {
            let end = network.in_edges(j).end;
            let mut sum = 0.0;
            while e < end {
                let out = (self.x[edges[e].src()] - b[e]).max(0.0);
                self.y[e] = out;
                self.active[e] = out > 0.0;
                if out > 0.0 {
                    self.live.push(e);
                }
                sum += out;
                e += 1;
            }
            self.x[j] = weights[j] * sum;
        }
    }

    /// Forward pass over the live edges. Forced edges are pinned at exactly
    /// zero output by raising their bias to the source value; edges that end
    /// at zero leave the live list and are counted in `deactivated`.
    fn eval_live(&mut self, network: &Network, b: &mut [f64], deactivated: &mut [usize]) {
        let weights = network.weights();
        let edges = network.edges();
        self.x[network.num_inputs()..].fill(0.0);
        let mut keep = 0;
        let mut cur = usize::MAX;
        let mut sum = 0.0;
        for k in 0..self.live.len() {
            let e = self.live[k];
            let (src, dst) = (edges[e].src(), edges[e].dst());
            if dst != cur {
                if cur != usize::MAX {
                    self.x[cur] = weights[cur] * sum;
                }
                cur = dst;
                sum = 0.0;
            }
            let xs = self.x[src];
            if self.forced[e] {
                self.forced[e] = false;
                if b[e] < xs {
                    b[e] = xs;
                }
            }
            let out = (xs - b[e]).max(0.0);
            self.y[e] = out;
            if out > 0.0 {
                sum += out;
                self.live[keep] = e;
                keep += 1;
            } else {
                self.active[e] = false;
                deactivated[network.edge_layer(e)] += 1;
            }
        }
        if cur != usize::MAX {
            self.x[cur] = weights[cur] * sum;
        }
        self.live.truncate(keep);
    }

    /// `g` on every destination of a live edge, as in [`crate::dynamics::grad`].
    fn backward_live(&mut self, network: &Network, c: usize) {
        let weights = network.weights();
        let edges = network.edges();
        let first_output = network.outputs().start;
        self.acc.fill(0.0);
        let mut cur = usize::MAX;
        let mut gj = 0.0;
        for &e in self.live.iter().rev() {
            let (src, dst) = (edges[e].src(), edges[e].dst());
            if dst != cur {
                cur = dst;
                gj = if dst >= first_output {
                    if dst == c {
                        weights[c]
                    } else {
                        0.0
                    }
                } else {
                    weights[dst] * self.acc[dst]
                };
                self.g[dst] = gj;
            }
            if gj != 0.0 {
                self.acc[src] += gj;
            }
        }
    }

    /// Edge velocities on the live edges, as in [`crate::dynamics::velocity`].
    fn velocity_live(&mut self, network: &Network) {
        let weights = network.weights();
        let edges = network.edges();
        self.inflow.fill(0.0);
        for &e in &self.live {
            let (i, j) = (edges[e].src(), edges[e].dst());
            let ve = self.g[j] + weights[i] * self.inflow[i];
            self.v[e] = ve;
            self.inflow[j] += ve;
        }
    }

    fn outputs_class(&self, network: &Network, eps: f64) -> Classification {
        Classification::from_outputs(&self.x[network.outputs()], eps)
    }

    /// Runs one update in place on `biases`.
    pub fn run(
        &mut self,
        network: &Network,
        biases: &mut BiasVector,
        d: &[f64],
        class: usize,
        mode: TerminationMode,
    ) -> Result<SdaStats> {
        check_input(network, d)?;
        if biases.len() != network.num_edges() {
            return Err(Error::Dimension {
                what: "bias vector",
                expected: network.num_edges(),
                got: biases.len(),
            });
        }
        let c = class_node(network, class)?;
        self.resize(network);
        let eps = zero_threshold(d);
        let edges = network.edges();
        let b = biases.values_mut();
        self.initial.copy_from_slice(b);

        self.eval_all(network, b, d);
        let cap = self.live.len() + ITERATION_SLACK;
        let mut deactivated = vec![0usize; network.num_layers() - 1];
        let mut iterations = 0;
        let mut cleanups = 0;

        let terminal = loop {
            let xc = self.x[c];
            let done = match mode {
                TerminationMode::Aggressive => xc <= eps,
                TerminationMode::UltraConservative => xc <= eps || self.outputs_class(network, eps).is_strict(class),
            };
            if done {
                let cls = self.outputs_class(network, eps);
                break if xc <= eps && cls.has_wrong_zero(class) {
                    Terminal::IrreversibleTie
                } else if iterations == 0 {
                    Terminal::AlreadyCorrect
                } else if xc <= eps {
                    Terminal::MadeZero
                } else {
                    Terminal::MadeStrictMin
                };
            }
            // rounding residue: an edge a hair above its kink would be
            // inactive in exact arithmetic, so pin it without a step
            let mut ghosts = false;
            for &e in &self.live {
                if self.y[e] <= KINK_REL * self.x[edges[e].src()] {
                    self.forced[e] = true;
                    ghosts = true;
                }
            }
            if ghosts {
                cleanups += 1;
                if cleanups > cap {
                    return Err(Error::InvariantBreach(format!("rounding cleanup did not settle after {cap} rounds")));
                }
                self.eval_live(network, b, &mut deactivated);
                continue;
            }
            if iterations >= cap {
                return Err(Error::InvariantBreach(format!(
                    "deactivation count exceeded cap {cap} with x_c = {xc:e}"
                )));
            }

            self.backward_live(network, c);
            self.velocity_live(network);

            // step to the first deactivation
            let mut t_star = f64::INFINITY;
            for &e in &self.live {
                let v = self.v[e];
                let r = if v > 0.0 { self.y[e] / v } else { f64::INFINITY };
                t_star = t_star.min(r);
            }
            if !t_star.is_finite() {
                return Err(Error::InvariantBreach(format!(
                    "output {xc:e} above zero threshold with no active edge of positive velocity"
                )));
            }
            let limit = t_star * (1.0 + TIE_WINDOW);
            for &e in &self.live {
                let v = self.v[e];
                if v > 0.0 && self.y[e] / v <= limit {
                    self.forced[e] = true;
                }
                let g = self.g[edges[e].dst()];
                if g > 0.0 {
                    b[e] += t_star * g;
                }
            }
            self.eval_live(network, b, &mut deactivated);
            iterations += 1;
        };

        // finalization: inactive edges drop back to max(b_initial, x_src)
        for e in 0..b.len() {
            if !self.active[e] {
                let xs = self.x[edges[e].src()];
                let lowered = if self.initial[e] > xs { self.initial[e] } else { xs };
                if lowered < b[e] {
                    b[e] = lowered;
                }
            }
        }

        Ok(SdaStats {
            iterations,
            terminal,
            deactivated_layers: deactivated,
            final_output: self.x[c],
        })
    }

    /// Node values and edge outputs of the last evaluation inside [`Sda::run`].
    pub fn last_state(&self) -> ActivationState {
        ActivationState {
            x: self.x.clone(),
            y: self.y.clone(),
            active: self.active.clone(),
        }
    }
}

/// Computes the conservative update for the sample `(d, class)`.
pub fn sda_update(
    network: &Network,
    biases: &BiasVector,
    d: &[f64],
    class: usize,
    mode: TerminationMode,
) -> Result<SdaOutcome> {
    let mut updated = biases.clone();
    let stats = Sda::new(network).run(network, &mut updated, d, class, mode)?;
    Ok(SdaOutcome {
        updated_biases: updated,
        iterations: stats.iterations,
        terminal: stats.terminal,
        deactivated_layers: stats.deactivated_layers,
        final_output: stats.final_output,
    })
}
