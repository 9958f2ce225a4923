//! Small reference problems and seeded random generators used by the tests,
//! the acceptance suite and the benchmarks.
//!
//! * `fix_a`: blind toggle. Two world states observed through a single
//!   sensor value; action `a` moves the world to state `a`; reward 1 in
//!   world state 1.
//! * `fix_b`: one world state with a self loop and rewards `(0, 1, 2)`.
//! * `fix_c`: two world states emitting one shared sensor value, three
//!   actions, strictly positive transitions drawn from a frozen seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pomdp::{Policy, Pomdp, RawPomdp};
use crate::scalar::Scalar;

/// Seed from which `fix_c` is drawn.
pub const FIX_C_SEED: u64 = 0x005e_ed0c;

fn lit<T: Scalar>(rows: &[&[f64]]) -> Vec<Vec<T>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| T::lit(x)).collect())
        .collect()
}

pub fn fix_a<T: Scalar>() -> Pomdp<T> {
    RawPomdp {
        n_world: 2,
        n_sensor: 1,
        n_action: 2,
        alpha: vec![
            lit(&[&[1.0, 0.0], &[0.0, 1.0]]),
            lit(&[&[1.0, 0.0], &[0.0, 1.0]]),
        ],
        beta: lit(&[&[1.0], &[1.0]]),
        reward: lit(&[&[0.0, 0.0], &[1.0, 1.0]]),
    }
    .validate()
    .expect("fix_a is valid")
}

/// The `fix_a` policy playing action 1 with probability `q`.
pub fn fix_a_policy<T: Scalar>(q: f64) -> Policy<T> {
    Policy::from_rows(&[vec![T::lit(1.0 - q), T::lit(q)]]).expect("q in [0, 1]")
}

pub fn fix_b<T: Scalar>() -> Pomdp<T> {
    RawPomdp {
        n_world: 1,
        n_sensor: 1,
        n_action: 3,
        alpha: vec![lit(&[&[1.0], &[1.0], &[1.0]])],
        beta: lit(&[&[1.0]]),
        reward: lit(&[&[0.0, 1.0, 2.0]]),
    }
    .validate()
    .expect("fix_b is valid")
}

fn fix_c_tables<T: Scalar>() -> (Vec<Vec<Vec<T>>>, Vec<Vec<T>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(FIX_C_SEED);
    let alpha = (0..2)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let p: f64 = rng.random_range(0.1..0.9);
                    vec![T::lit(p), T::lit(1.0 - p)]
                })
                .collect()
        })
        .collect();
    let reward = (0..2)
        .map(|_| {
            (0..3)
                .map(|_| T::lit(rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    (alpha, reward)
}

pub fn fix_c<T: Scalar>() -> Pomdp<T> {
    let (alpha, reward) = fix_c_tables();
    RawPomdp {
        n_world: 2,
        n_sensor: 1,
        n_action: 3,
        alpha,
        beta: lit(&[&[1.0], &[1.0]]),
        reward,
    }
    .validate()
    .expect("fix_c is valid")
}

/// `fix_c` dynamics with the world state fully observed.
pub fn fix_c_observable<T: Scalar>() -> Pomdp<T> {
    let (alpha, reward) = fix_c_tables();
    RawPomdp {
        n_world: 2,
        n_sensor: 2,
        n_action: 3,
        alpha,
        beta: lit(&[&[1.0, 0.0], &[0.0, 1.0]]),
        reward,
    }
    .validate()
    .expect("observable fix_c is valid")
}

/// Uniformly distributed point of the probability simplex of dimension `n`.
pub fn random_simplex_point<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|&x| T::lit(x / total)).collect()
}

/// Random stochastic row where each entry is zero with probability
/// `sparsity`; at least one entry stays positive.
fn sparse_row<R: Rng + ?Sized>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < sparsity {
                0.0
            } else {
                -(1.0 - rng.random::<f64>()).ln()
            }
        })
        .collect();
    if e.iter().all(|&x| x == 0.0) {
        let i = rng.random_range(0..n);
        e[i] = 1.0;
    }
    let total: f64 = e.iter().sum();
    e.iter().map(|x| x / total).collect()
}

/// Shape of randomly generated POMDPs.
#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub max_world: usize,
    pub max_sensor: usize,
    pub max_action: usize,
    /// Probability that a transition entry is zero.
    pub alpha_sparsity: f64,
    /// Probability that an observation entry is zero.
    pub beta_sparsity: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            max_world: 6,
            max_sensor: 6,
            max_action: 6,
            alpha_sparsity: 0.3,
            beta_sparsity: 0.5,
        }
    }
}

/// Random POMDP with dimensions drawn uniformly from `1..=max_*` and rewards
/// in `[-1, 1]`.
pub fn random_pomdp<T: Scalar, R: Rng + ?Sized>(rng: &mut R, spec: RandomSpec) -> Pomdp<T> {
    let nw = rng.random_range(1..=spec.max_world);
    let ns = rng.random_range(1..=spec.max_sensor);
    let na = rng.random_range(1..=spec.max_action);
    random_pomdp_sized(rng, nw, ns, na, spec)
}

pub fn random_pomdp_sized<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    nw: usize,
    ns: usize,
    na: usize,
    spec: RandomSpec,
) -> Pomdp<T> {
    let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let alpha = (0..nw)
        .map(|_| {
            (0..na)
                .map(|_| conv(sparse_row(rng, nw, spec.alpha_sparsity)))
                .collect()
        })
        .collect();
    let beta = (0..nw)
        .map(|_| conv(sparse_row(rng, ns, spec.beta_sparsity)))
        .collect();
    let reward = (0..nw)
        .map(|_| {
            (0..na)
                .map(|_| T::lit(rng.random_range(-1.0..=1.0)))
                .collect()
        })
        .collect();
    RawPomdp {
        n_world: nw,
        n_sensor: ns,
        n_action: na,
        alpha,
        beta,
        reward,
    }
    .validate()
    .expect("generated tables are valid")
}

pub fn random_policy<T: Scalar, R: Rng + ?Sized>(rng: &mut R, ns: usize, na: usize) -> Policy<T> {
    let rows: Vec<Vec<T>> = (0..ns).map(|_| random_simplex_point(rng, na)).collect();
    Policy::from_rows(&rows).expect("simplex rows")
}

/// Random policy whose entries are all at least `margin`.
pub fn random_interior_policy<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    ns: usize,
    na: usize,
    margin: f64,
) -> Policy<T> {
    assert!(margin * na as f64 <= 1.0);
    let rows: Vec<Vec<T>> = (0..ns)
        .map(|_| {
            let q: Vec<f64> = random_simplex_point(rng, na);
            q.iter()
                .map(|&x| T::lit(margin + (1.0 - margin * na as f64) * x))
                .collect()
        })
        .collect();
    Policy::from_rows(&rows).expect("simplex rows")
}

/// Seeded generator used throughout the tests.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
