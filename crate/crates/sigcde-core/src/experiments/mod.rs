//! Synthetic iterated-integral regression: dataset generation, recurrent
//! models trained by backpropagation through the recurrence, and a random
//! linear NCDE baseline.

mod adam;
mod dataset;
mod model;
mod train;

pub use adam::Adam;
pub use dataset::{gen_dataset, target_word, Dataset, DatasetSpec, Normalization, TRAIN_FRACTION};
pub use model::{gradient_check, ModelKind, ModelShape, SequenceModel, Workspace};
pub use train::{linear_ncde_baseline, train_model, LossRow, RunStatus, TrainConfig, TrainOutcome, DIVERGENCE_LOSS};
