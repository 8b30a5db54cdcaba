//! Boundary-integral problems, the Monte-Carlo loss and field reconstruction.

pub mod batch;
pub mod field;
pub mod loss;
pub mod problem;

pub use batch::{geometry_batch, make_batch, BatchSizes, GeometryBatch, TrainBatch};
pub use field::{
    eval_field, eval_field_on, evaluation_sample, far_field, far_field_on, lat_lon_directions, total_field,
    FieldGrid, DEFAULT_DELTA,
};
pub use loss::{kernel_blocks, loss_and_gradient, mc_loss, mc_loss_with, model_loss, record_loss, BatchKernels};
pub use problem::{relative_l2, relative_l2_real, Boundary, BoundaryValue, ProblemKind, ProblemSpec};
