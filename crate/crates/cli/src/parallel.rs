//! Cross-validation with iterations spread over threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use acoso_core::embeddings::EmbeddingMatrix;
use acoso_core::eval::{self, CrossValidation, EvalError, IterationRun, TrainConfig};
use acoso_core::model::ModelConfig;
use acoso_core::vocab::EncodedDataset;

/// Same result as [`eval::cross_validate`], running up to `jobs`
/// iterations at once. Each iteration derives its own seeds, so the thread
/// schedule has no influence on the output.
pub fn cross_validate(
    dataset: &EncodedDataset,
    train_config: &TrainConfig,
    model_config: &ModelConfig,
    embedding: Arc<EmbeddingMatrix>,
    jobs: usize,
) -> Result<CrossValidation, EvalError> {
    let jobs = jobs.clamp(1, train_config.iterations.max(1));
    if jobs == 1 {
        return eval::cross_validate(dataset, train_config, model_config, embedding);
    }
    train_config.validate()?;
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }

    let n = train_config.iterations;
    let next = AtomicUsize::new(1);
    let results: Mutex<Vec<Option<Result<IterationRun, EvalError>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i > n {
                    break;
                }
                let run = eval::cross_validation_iteration(dataset, train_config, model_config, embedding.clone(), i);
                results.lock().unwrap()[i - 1] = Some(run);
            });
        }
    });

    let mut reports = Vec::with_capacity(n);
    let mut checkpoints = Vec::new();
    for run in results.into_inner().unwrap() {
        let run = run.expect("every iteration is claimed by a worker")?;
        reports.push(run.report);
        checkpoints.extend(run.checkpoints);
    }
    Ok(CrossValidation {
        report: eval::aggregate(reports),
        checkpoints,
    })
}
