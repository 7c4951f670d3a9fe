//! A small multilayer perceptron with hand-written backpropagation, a half-moons dataset
//! and a trainer that drives every parameter tensor through [`crate::optim::step`].

mod data;
mod model;
mod train;

pub use data::{make_dataset, SyntheticDataset};
pub use model::{
    cross_entropy, xavier_init, xavier_std, Activation, Dense, ForwardCache, Gradients, Matrix, Mlp, XavierForm,
    BIAS_INIT,
};
pub use train::{
    accuracy, sample_training_config, summarize, train, train_many, Architecture, EpochMetrics, MeanStd,
    RunSummary, TrainingConfig, TrainingReport, REPORT_EPOCH,
};
