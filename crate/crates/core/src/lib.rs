//! Memoryless stochastic policies for partially observable Markov decision
//! processes.
//!
//! The crate evaluates a fixed policy `pi(a|s)` acting on sensor values of a
//! POMDP `(W, S, A, alpha, beta, R)` exactly, through dense linear algebra:
//!
//! * [`value`]: state and action values, discounted occupancy, advantages and
//!   the exact policy gradient.
//! * [`stationary`]: chain structure, stationary distributions, the average
//!   reward and spectral mixing diagnostics.
//! * [`cone`]: the policy improvement cone of a sensor value and its face
//!   reduction, which yields improved policies with at most `k_s` actions in
//!   the support of row `s`, where `k_s` counts the world states that can
//!   emit `s`.
//! * [`limits`]: discounted-to-average sweeps over simplex grids and the
//!   built-in four-state example.
//! * [`mc`]: seeded Monte-Carlo rollouts and brute-force grid search used as
//!   independent checks.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the double precision types used by the command-line tool.
//!
//! ```
//! use pomdp_lab::{fixtures, solve_value, Policy64};
//!
//! let p = fixtures::fix_a::<f64>();
//! let pi = Policy64::from_rows(&[vec![0.5, 0.5]]).unwrap();
//! let v = solve_value(&p, &pi, 0.9).unwrap();
//! assert!((v.values[0] - 4.5).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cone;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod limits;
pub mod linalg;
pub mod mc;
pub mod pomdp;
pub mod scalar;
pub mod stationary;
pub mod tolerance;
pub mod value;

pub use cone::{
    cone_forms, cone_membership, face_reduce, improve_policy, improvement_iterate, ConeSpec,
    ImprovedPolicy, IterationResult, TraceRow,
};
pub use error::{Error, Result};
pub use limits::{
    builtin_example, gamma_convergence_sweep, maximizer_track, reward_surface, BuiltinExample,
    EvalMode, GammaSweep, MaximizerTrack, SurfaceTable, DEFAULT_GAMMAS,
};
pub use linalg::Matrix;
pub use mc::{empirical_state_dist, grid_argmax, rollout_value, RolloutConfig, RolloutEstimate};
pub use pomdp::{simplex_grid, Distribution, Policy, Pomdp, RawPomdp, SimplexGrid, WorldPolicy};
pub use scalar::Scalar;
pub use stationary::{
    analyze_chain, average_reward, spectral_analysis, stationary_distribution, ChainReport,
    SpectralReport, StationaryMethod, StationaryResult,
};
pub use value::{
    advantage_eps, discounted_reward, improvement_identity_residual, occupancy,
    policy_gradient_exact, solve_value, Occupancy, PolicyGradient, ValueBundle,
};

pub type Pomdp64 = Pomdp<f64>;
pub type Policy64 = Policy<f64>;
pub type Distribution64 = Distribution<f64>;
pub type Matrix64 = Matrix<f64>;
pub type ValueBundle64 = ValueBundle<f64>;

pub type Pomdp32 = Pomdp<f32>;
pub type Policy32 = Policy<f32>;
pub type Distribution32 = Distribution<f32>;
pub type Matrix32 = Matrix<f32>;
pub type ValueBundle32 = ValueBundle<f32>;
