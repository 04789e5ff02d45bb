//! Online training loop, test-set metrics and small-network trials.
//!
//! An item counts as an error whenever it would trigger an update: in
//! ultra-conservative mode unless its class is the strict minimum, in
//! aggressive mode unless its class output is already zero. Items whose
//! class sits at zero together with another output can never be fixed; they
//! count as errors with no iterations and leave the biases untouched.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{check_input, forward, zero_threshold, Classification};
use crate::encode::Sample;
use crate::error::{Error, Result};
use crate::netgraph::{BiasVector, Network};
use crate::rng::SeededRng;
use crate::sda::{Sda, SdaStats, Terminal, TerminationMode};

/// Metrics of one test-set evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Mean score: 1 for a unique correct minimum, `1/m` inside an `m`-fold tie.
    pub acc: f64,
    /// `alpha[l - 1]`: mean fraction of active edges leaving hidden layer `l`.
    pub alpha: Vec<f64>,
    /// Fraction of items with a wrong-class output at zero.
    pub zero_err: f64,
}

/// Per-item evaluation result.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemEval {
    pub score: f64,
    pub zero_err: bool,
    /// Active edge counts by source layer `1..=h`.
    pub active: Vec<u64>,
}

/// Reusable buffers for evaluating items one at a time.
#[derive(Debug, Clone)]
pub struct Evaluator {
    x: Vec<f64>,
    y: Vec<f64>,
    layer_edges: Vec<u64>,
    /// Counter slot per edge: `l - 1` for source layer `l` in `1..=h`, else `h`.
    slot: Vec<usize>,
}

impl Evaluator {
    pub fn new(network: &Network) -> Self {
        let h = network.num_hidden_layers();
        let mut layer_edges = vec![0u64; h];
        let slot: Vec<usize> = (0..network.num_edges())
            .map(|e| {
                let l = network.edge_layer(e);
                if (1..=h).contains(&l) {
                    layer_edges[l - 1] += 1;
                    l - 1
                } else {
                    h
                }
            })
            .collect();
        Evaluator {
            x: vec![0.0; network.num_nodes()],
            y: vec![0.0; network.num_edges()],
            layer_edges,
            slot,
        }
    }

    pub fn item(&mut self, network: &Network, biases: &BiasVector, sample: &Sample) -> Result<ItemEval> {
        check_input(network, &sample.input)?;
        if sample.class >= network.num_outputs() {
            return Err(Error::NotAnOutput(network.num_inputs() + sample.class));
        }
        forward(network, biases.as_slice(), &sample.input, &mut self.x, &mut self.y);
        let cls = Classification::from_outputs(&self.x[network.outputs()], zero_threshold(&sample.input));
        let h = self.layer_edges.len();
        let mut active = vec![0u64; h + 1];
        for (&y, &k) in self.y.iter().zip(&self.slot) {
            active[k] += (y > 0.0) as u64;
        }
        active.truncate(h);
        Ok(ItemEval {
            score: cls.score(sample.class),
            zero_err: cls.has_wrong_zero(sample.class),
            active,
        })
    }

    /// Folds per-item results in the given order.
    pub fn summarize(&self, items: &[ItemEval]) -> Evaluation {
        let n = items.len().max(1) as f64;
        let h = self.layer_edges.len();
        let mut acc = 0.0;
        let mut zero = 0usize;
        let mut alpha = vec![0.0; h];
        for it in items {
            acc += it.score;
            zero += it.zero_err as usize;
            for l in 0..h {
                alpha[l] += it.active[l] as f64 / self.layer_edges[l] as f64;
            }
        }
        Evaluation {
            acc: acc / n,
            alpha: alpha.into_iter().map(|a| a / n).collect(),
            zero_err: zero as f64 / n,
        }
    }
}

/// Sequential evaluation of a test set.
pub fn evaluate(network: &Network, biases: &BiasVector, test: &[Sample]) -> Result<Evaluation> {
    let mut ev = Evaluator::new(network);
    let items = test
        .iter()
        .map(|s| ev.item(network, biases, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ev.summarize(&items))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TerminationMode,
    /// Test-set evaluation interval in training items; 0 evaluates only at the end.
    pub batch: usize,
    pub max_items: Option<usize>,
    /// Stop after a full pass with no errors.
    pub stop_when_quiet: bool,
    /// Stop once a report shows `zero_err` above this value.
    pub stop_zero_err: Option<f64>,
    /// Stop once a report reaches this test accuracy.
    pub stop_acc: Option<f64>,
    /// Reshuffle the training set before every pass.
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TerminationMode::UltraConservative,
            batch: 0,
            max_items: None,
            stop_when_quiet: true,
            stop_zero_err: None,
            stop_acc: None,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub items: usize,
    pub err_total: usize,
    pub iter_total: usize,
    pub iter_per_err_batch: f64,
    pub acc: f64,
    pub alpha: Vec<f64>,
    pub zero_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxItems,
    QuietPass,
    /// A pass whose errors were all ambiguous arrivals: no bias moved, so
    /// every later pass would repeat it.
    Stalled,
    ZeroErr,
    TargetAccuracy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<ReportRow>,
    pub items: usize,
    pub err_total: usize,
    pub iter_total: usize,
    pub passes: usize,
    pub stop: StopReason,
    /// Deactivations summed over all updates, by source layer.
    pub deactivated_layers: Vec<usize>,
    /// Items whose class output was already tied at zero on arrival.
    pub ambiguous: usize,
}

/// Outcome of presenting one training item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemOutcome {
    pub error: bool,
    pub stats: SdaStats,
}

/// Presents one item: updates `biases` in place if it is an error.
pub fn train_item(
    sda: &mut Sda,
    network: &Network,
    biases: &mut BiasVector,
    sample: &Sample,
    mode: TerminationMode,
) -> Result<ItemOutcome> {
    let stats = sda.run(network, biases, &sample.input, sample.class, mode)?;
    Ok(ItemOutcome {
        error: stats.terminal != Terminal::AlreadyCorrect,
        stats,
    })
}

/// Trains on `train` (cycled in passes) with test evaluation through
/// `test_eval`, which receives the current biases.
pub fn train_with<F>(
    network: &Network,
    biases: &mut BiasVector,
    train: &[Sample],
    config: &TrainConfig,
    mut test_eval: F,
) -> Result<TrainReport>
where
    F: FnMut(&BiasVector) -> Result<Evaluation>,
{
    if train.is_empty() {
        return Err(Error::InvalidSpec("empty training set".into()));
    }
    if config.max_items.is_none() && !config.stop_when_quiet {
        return Err(Error::InvalidSpec("training needs a stop rule".into()));
    }
    let mut sda = Sda::new(network);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffler = config.shuffle_seed.map(SeededRng::new);
    let mut rows = Vec::new();
    let mut deactivated = vec![0usize; network.num_layers() - 1];
    let (mut items, mut err_total, mut iter_total, mut passes, mut ambiguous) = (0, 0, 0, 0, 0);
    let (mut batch_err, mut batch_iter) = (0usize, 0usize);

    let mut report = |items, err_total, iter_total, batch_err: usize, batch_iter: usize, biases: &BiasVector| {
        let ev = test_eval(biases)?;
        let row = ReportRow {
            items,
            err_total,
            iter_total,
            iter_per_err_batch: if batch_err == 0 {
                0.0
            } else {
                batch_iter as f64 / batch_err as f64
            },
            acc: ev.acc,
            alpha: ev.alpha,
            zero_err: ev.zero_err,
        };
        Ok::<_, Error>(row)
    };

    let stop = 'outer: loop {
        if let Some(rng) = shuffler.as_mut() {
            rng.shuffle(&mut order);
        }
        let (mut pass_errors, mut pass_ambiguous) = (0, 0);
        for &k in &order {
            if config.max_items.is_some_and(|m| items >= m) {
                break 'outer StopReason::MaxItems;
            }
            let out = train_item(&mut sda, network, biases, &train[k], config.mode)?;
            items += 1;
            if out.error {
                pass_errors += 1;
                err_total += 1;
                batch_err += 1;
                iter_total += out.stats.iterations;
                batch_iter += out.stats.iterations;
                if out.stats.iterations == 0 && out.stats.terminal == Terminal::IrreversibleTie {
                    ambiguous += 1;
                    pass_ambiguous += 1;
                }
                for (d, s) in deactivated.iter_mut().zip(&out.stats.deactivated_layers) {
                    *d += s;
                }
            }
            if config.batch > 0 && items % config.batch == 0 {
                let row = report(items, err_total, iter_total, batch_err, batch_iter, biases)?;
                let (zero_err, acc) = (row.zero_err, row.acc);
                rows.push(row);
                batch_err = 0;
                batch_iter = 0;
                if config.stop_zero_err.is_some_and(|t| zero_err > t) {
                    break 'outer StopReason::ZeroErr;
                }
                if config.stop_acc.is_some_and(|t| acc >= t) {
                    break 'outer StopReason::TargetAccuracy;
                }
            }
        }
        passes += 1;
        if config.stop_when_quiet && pass_errors == 0 {
            break StopReason::QuietPass;
        }
        if config.stop_when_quiet && pass_errors == pass_ambiguous {
            break StopReason::Stalled;
        }
    };
    if rows.last().map(|r| r.items) != Some(items) {
        rows.push(report(items, err_total, iter_total, batch_err, batch_iter, biases)?);
    }
    Ok(TrainReport {
        rows,
        items,
        err_total,
        iter_total,
        passes,
        stop,
        deactivated_layers: deactivated,
        ambiguous,
    })
}

/// [`train_with`] using sequential evaluation of `test`.
pub fn train(
    network: &Network,
    biases: &mut BiasVector,
    train_set: &[Sample],
    test: &[Sample],
    config: &TrainConfig,
) -> Result<TrainReport> {
    let mut ev = Evaluator::new(network);
    train_with(network, biases, train_set, config, |b| {
        let items = test.iter().map(|s| ev.item(network, b, s)).collect::<Result<Vec<_>>>()?;
        Ok(ev.summarize(&items))
    })
}

/// Result of repeating one fixed data order from zero biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// A full pass made no update and met no ambiguity.
    pub success: bool,
    pub err: usize,
    pub iter: usize,
    pub passes: usize,
    pub deactivated_layers: Vec<usize>,
    pub biases: BiasVector,
}

/// Cycles `samples` in the given order until a pass is error-free (success),
/// an item ends in an irreversible tie (failure) or `max_passes` is reached.
pub fn run_trial(network: &Network, samples: &[Sample], mode: TerminationMode, max_passes: usize) -> Result<Trial> {
    let mut biases = BiasVector::zeros(network.num_edges());
    let mut sda = Sda::new(network);
    let mut deactivated = vec![0usize; network.num_layers() - 1];
    let (mut err, mut iter) = (0, 0);
    for pass in 1..=max_passes {
        let mut errors = 0;
        for s in samples {
            let out = train_item(&mut sda, network, &mut biases, s, mode)?;
            if out.error {
                errors += 1;
                err += 1;
                iter += out.stats.iterations;
                for (d, s) in deactivated.iter_mut().zip(&out.stats.deactivated_layers) {
                    *d += s;
                }
                if out.stats.terminal == Terminal::IrreversibleTie {
                    return Ok(Trial {
                        success: false,
                        err,
                        iter,
                        passes: pass,
                        deactivated_layers: deactivated,
                        biases,
                    });
                }
            }
        }
        if errors == 0 {
            return Ok(Trial {
                success: true,
                err,
                iter,
                passes: pass,
                deactivated_layers: deactivated,
                biases,
            });
        }
    }
    Ok(Trial {
        success: false,
        err,
        iter,
        passes: max_passes,
        deactivated_layers: deactivated,
        biases,
    })
}
