pub mod autodiff;
pub mod geometry;
pub mod network;
pub mod physics;
pub mod metrics;
pub mod sfem;
pub mod trainer;

pub use autodiff::Jet2;
pub use geometry::{HeightField, ManifoldConfig, MetricSample, Surface};
pub use network::{FieldModel, NetworkConfig, NetworkParams};
pub use physics::{GrayScottParams, InitialConditionConfig};
pub use sfem::{FieldSnapshot, SfemConfig, SfemSolver, TriMesh};
pub use trainer::{LossHistory, TrainConfig};
