//! Numerical thresholds used across the crate, in one place.
//!
//! Values are given in double precision; routines convert them with
//! [`Scalar::tol`](crate::Scalar::tol) so they are floored at machine
//! precision for `f32`.

/// Probabilities at or below this count as zero when measuring supports.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Row sums of input kernels may deviate from one by at most this much.
pub const INPUT_ROW_SUM: f64 = 1e-9;

/// Row sums of derived kernels deviate from one by at most this much.
pub const KERNEL_ROW_SUM: f64 = 1e-12;

/// Bellman residual bound asserted after every value solve.
pub const BELLMAN_RESIDUAL: f64 = 1e-10;

/// Occupancy rows sum to `1/(1-gamma)` within this relative tolerance.
pub const OCCUPANCY_ROW_SUM: f64 = 1e-9;

/// Contract bound on the improvement identity residual.
pub const IMPROVEMENT_IDENTITY: f64 = 1e-8;

/// Cone membership accepts slacks down to minus this value.
pub const CONE_SLACK: f64 = 1e-9;

/// Improved policies may not lose more than this much value anywhere.
pub const VALUE_REGRESSION: f64 = 1e-9;

/// Stationary distributions from the linear solve satisfy `pT = p` to this bound.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;

/// Successive windowed Cesaro averages closer than this are converged.
pub const CESARO_STEP: f64 = 1e-12;

/// Maximum number of propagation steps in the Cesaro fallback.
pub const CESARO_CAP: usize = 1_000_000;

/// Polytope vertices closer than this (sup norm) are merged.
pub const VERTEX_DEDUP: f64 = 1e-10;

/// Default central finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Empirical slack allowed between the fitted decay rate and `|lambda_2|`.
pub const SPECTRAL_SLACK: f64 = 0.05;

/// Errors below this are treated as round-off when fitting decay rates.
pub const DECAY_NOISE_FLOOR: f64 = 1e-13;

/// Default bound on the truncation bias of Monte-Carlo rollouts.
pub const ROLLOUT_BIAS: f64 = 1e-6;

/// Largest simplex grid that will be enumerated.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Grid values closer than this (relative to `max(|max|, 1)`) to the
/// maximum count as ties, which go to the lowest grid index.
pub const ARGMAX_TIE: f64 = 1e-12;
