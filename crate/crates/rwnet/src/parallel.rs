//! Test-set evaluation fanned out over a rayon pool.

use rayon::prelude::*;
use rwnet_core::trainer::{train_with, Evaluation, Evaluator, TrainConfig, TrainReport};
use rwnet_core::{BiasVector, Network, Sample};

use crate::error::{Error, Result};

/// Evaluates `test` on a bias snapshot; per-item results are folded in item
/// order, so the outcome does not depend on the thread count.
pub fn par_evaluate(network: &Network, biases: &BiasVector, test: &[Sample]) -> Result<Evaluation> {
    Ok(evaluate_items(network, biases, test)?)
}

fn evaluate_items(network: &Network, biases: &BiasVector, test: &[Sample]) -> rwnet_core::Result<Evaluation> {
    let items = test
        .par_iter()
        .map_init(|| Evaluator::new(network), |ev, s| ev.item(network, biases, s))
        .collect::<rwnet_core::Result<Vec<_>>>()?;
    Ok(Evaluator::new(network).summarize(&items))
}

pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::Usage(format!("thread pool: {e}")))
}

/// Sequential training with parallel test evaluation.
pub fn train_parallel(
    network: &Network,
    biases: &mut BiasVector,
    train: &[Sample],
    test: &[Sample],
    config: &TrainConfig,
    threads: Option<usize>,
) -> Result<TrainReport> {
    let pool = pool(threads)?;
    pool.install(|| Ok(train_with(network, biases, train, config, |b| evaluate_items(network, b, test))?))
}
