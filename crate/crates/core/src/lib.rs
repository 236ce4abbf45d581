//! Multilevel Picard Monte Carlo for semilinear heat equations, with the
//! analytic error and cost bounds that accompany the scheme.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= a)` also rejects NaN

pub mod bounds;
pub mod engine;
pub mod error;
pub mod model;
pub mod numeric;
pub mod schedule;
pub mod stream;
pub mod study;
pub mod verify;

pub use engine::{estimate, predicted_cost, replicate, BaseMode, CostLedger, MlpParams, Realization};
pub use error::{MlpError, Result};
pub use model::{builtin, reference_value, Form, ProblemSpec};
pub use schedule::{choose_n, kp_constant, phi, ComplexityQuery, LpConstants};
pub use stream::{derive_stream, Stream, StreamKey};
pub use verify::{run_suite, Check, SUITES};
