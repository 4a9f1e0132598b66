//! Federated-learning primitives: synthetic data, partitioning, models,
//! local SGD, aggregation and evaluation.

mod data;
mod model;
mod partition;
mod sgd;

pub use data::{gaussian_blobs, BlobSpec, Dataset};
pub use model::{Objective, QuadraticTask, SoftmaxRegression};
pub use partition::{distinct_labels, partition, PartitionMode, PartitionSpec};
pub use sgd::{
    aggregate, evaluate, local_sgd, satellite_training_with_handover, steps_per_pass, BatchPolicy, LocalTrainConfig,
    Metrics, ModelState, SgdCheckpoint, SgdRun,
};
