//! End-to-end learned transceiver trained under peak-power and leakage
//! constraints with an augmented Lagrangian.

pub mod evaluate;
pub mod lagrangian;
pub mod losses;
pub mod model;
pub mod ops;
pub mod train;

pub use evaluate::{evaluate, E2eMetrics, EvalConfig, Evaluation};
pub use lagrangian::{augmented_lagrangian, augmented_lagrangian_node, ConstraintState};
pub use losses::{loss_aclr, loss_bce, loss_papr, normalize_batch};
pub use model::{noise_tensor, to_llr_grid, to_symbols, ArchConfig, Forward, LossContext, Transceiver};
pub use train::{log_csv, loss_context, train, train_with, LogRow, TrainConfig, TrainOutcome, TrainTargets};
