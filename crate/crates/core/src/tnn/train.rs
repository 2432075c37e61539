use rand::seq::SliceRandom;
use rand::Rng;

use super::{TnnError, TnnModel, TrainExample};
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 10,
            learning_rate: 0.02,
            batch_size: 16,
        }
    }
}

/// Mini-batch gradient descent: each epoch shuffles the examples, splits
/// them into batches and takes one step along the batch-averaged gradient.
///
/// Per-example gradients are summed in example order whichever
/// [`Parallelism`] is used, so both modes produce identical weights.
pub fn train<R: Rng + ?Sized>(
    mut model: TnnModel,
    examples: &[TrainExample],
    schedule: &TrainSchedule,
    rng: &mut R,
    mode: Parallelism,
) -> Result<TnnModel, TnnError> {
    if examples.is_empty() {
        return Err(TnnError::EmptyDataset);
    }
    if schedule.batch_size == 0 || schedule.learning_rate.is_nan() || schedule.learning_rate <= 0.0 {
        return Err(TnnError::Schedule(format!("{schedule:?}")));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let n_params = model.params.len();
    let mut total = vec![0.0; n_params];
    for _ in 0..schedule.epochs {
        order.shuffle(rng);
        for batch in order.chunks(schedule.batch_size) {
            total.iter_mut().for_each(|g| *g = 0.0);
            let m = &model;
            let grads = par::map(batch, mode, |&i| m.gradient(&examples[i]));
            for g in grads {
                for (t, v) in total.iter_mut().zip(g?) {
                    *t += v;
                }
            }
            let scale = schedule.learning_rate / batch.len() as f64;
            for (p, g) in model.params.iter_mut().zip(&total) {
                *p -= scale * g;
            }
        }
    }
    Ok(model)
}

/// Mean loss over `examples`.
pub fn batch_loss(model: &TnnModel, examples: &[TrainExample]) -> Result<f64, TnnError> {
    let mut sum = 0.0;
    for ex in examples {
        sum += model.loss(ex)?;
    }
    Ok(sum / examples.len() as f64)
}
