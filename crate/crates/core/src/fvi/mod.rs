//! Fitted value iteration for bicausal transport with time-separable costs.
//!
//! The network regresses the cost-to-go
//!
//! ```text
//! C_T = 0,    C_t(x_t, y_t) = inf_π ∫ [c_{t+1} + C_{t+1}] dπ
//! ```
//!
//! over bicausal one-step couplings, with `h = T − t` steps remaining. The full
//! value of a history is the accrued cost plus `C_t`, so the estimate at the
//! root is `C_0(x0, y0)`. Targets come from empirical transport between `B`
//! sampled successors of each side; one network and one Adam state are shared
//! by the whole backward sweep.

mod adam;
mod net;
mod target;
mod train;

pub use adam::AdamState;
pub use net::{grad_loss, mean_loss, smooth_l1, smooth_l1_grad, Example, SeparableValueNet, HIDDEN};
pub use target::{empirical_bellman_target, BellmanTarget, TargetMode, TargetScratch};
pub use train::{fit_value_functions, FviConfig, FviDiagnostics, FviOutput, StepDiagnostics};

use crate::ot::OtError;

#[derive(Debug, thiserror::Error)]
pub enum FviError {
    #[error("invalid {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("model {side} has dimension {found}, config says {expected}")]
    DimensionMismatch { side: &'static str, expected: usize, found: usize },
    #[error("model {side} has horizon {found}, config says {expected}")]
    HorizonMismatch { side: &'static str, expected: usize, found: usize },
    #[error("transport solver failed at t={t}, sample {sample}")]
    Solver {
        t: usize,
        sample: usize,
        #[source]
        source: OtError,
    },
}
