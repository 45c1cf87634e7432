//! Next-token training, the masked-[EOI] fine-tuning regime, evaluation and
//! finite-difference gradient verification.

mod eval;
mod gradcheck;
mod loss;
mod optim;
mod train;

pub use eval::{evaluate, EvalMetrics, EvalOptions};
pub use gradcheck::{analytic_gradient, grad_check, GradCheckReport};
pub use loss::{loss, loss_and_grad, Example};
pub use optim::{AdamW, OptimConfig};
pub use train::{checkpoint_path, train, MetricRow, TrainConfig, TrainOutput, TrainRun};
