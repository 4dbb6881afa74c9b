//! Physics-informed neural network toolkit.
pub mod benchmarks;

pub mod checkpoint;
pub mod diffgraph;
pub mod error;
pub mod losses;
pub mod models;
pub mod optimizers;
pub mod quantum;
pub mod tensor;
pub mod trainer;

pub use diffgraph::{GradientMap, Graph, OpTag, Value};
pub use error::{Error, Result};
pub use tensor::Tensor;
pub use models::{
    Activation, AxisEmbedding, Bound, EmbeddingSpec, Field, FnField, Mlp, ModelSpec, Network,
    ParamStore, RffSpec, WeightParam,
};
pub use losses::{CausalityConfig, EnergyConfig, LossState, MetricsRow, PdeKind};
pub use optimizers::{Adam, AdamConfig, ExponentialLr, Lbfgs, LbfgsConfig, SwitchPolicy};
pub use checkpoint::Checkpoint;
pub use trainer::{
    BoundaryKind, CollocationSet, CurriculumStage, Problem, Sampling, SamplingConfig, TrainConfig,
    TrainReport, TrainState,
};
