//! Monte-Carlo and brute-force checks that share no code path with the
//! linear-algebra solvers.
//!
//! Every trajectory `i` draws from its own ChaCha8 stream `(seed, i)`, so
//! estimates do not depend on how trajectories are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::limits::{reward_surface, EvalMode};
use crate::pomdp::{Distribution, Policy, Pomdp};
use crate::scalar::{compensated_sum, Scalar};
use crate::tolerance::ROLLOUT_BIAS;
use crate::value::check_gamma;

/// Generator for trajectory `index` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sample<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// The kernels of a POMDP and a policy copied to `f64` for sampling.
struct Sampler {
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    policy: Vec<Vec<f64>>,
    reward: Vec<f64>,
    n_action: usize,
}

impl Sampler {
    fn new<T: Scalar>(p: &Pomdp<T>, pi: &Policy<T>) -> Result<Self> {
        p.check_policy(pi)?;
        let conv = |r: &[T]| r.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        let na = p.n_action();
        Ok(Self {
            alpha: (0..p.n_world() * na)
                .map(|i| conv(p.alpha(i / na, i % na)))
                .collect(),
            beta: (0..p.n_world()).map(|w| conv(p.beta().row(w))).collect(),
            policy: (0..pi.n_sensor()).map(|s| conv(pi.row(s))).collect(),
            reward: conv(p.reward().as_slice()),
            n_action: na,
        })
    }

    /// Samples the sensor value and the action, returns the action.
    fn act<R: Rng + ?Sized>(&self, rng: &mut R, w: usize) -> usize {
        let s = sample(rng, &self.beta[w]);
        sample(rng, &self.policy[s])
    }

    fn next<R: Rng + ?Sized>(&self, rng: &mut R, w: usize, a: usize) -> usize {
        sample(rng, &self.alpha[w * self.n_action + a])
    }
}

/// Smallest horizon `H` with `gamma^H * max_abs_reward / (1 - gamma) <= target`.
pub fn horizon_for_bias(gamma: f64, max_abs_reward: f64, target: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Gamma(gamma));
    }
    if !(target > 0.0) {
        return Err(Error::Argument(format!(
            "bias target must be positive, got {target}"
        )));
    }
    if max_abs_reward == 0.0 {
        return Ok(0);
    }
    if gamma == 0.0 {
        return Ok(1);
    }
    let mut h = ((target * (1.0 - gamma) / max_abs_reward).ln() / gamma.ln())
        .ceil()
        .max(0.0) as usize;
    while truncation_bias(gamma, max_abs_reward, h) > target {
        h += 1;
    }
    Ok(h)
}

/// Largest possible contribution of the steps from `horizon` on.
pub fn truncation_bias(gamma: f64, max_abs_reward: f64, horizon: usize) -> f64 {
    if max_abs_reward == 0.0 {
        return 0.0;
    }
    gamma.powi(horizon.min(i32::MAX as usize) as i32) * max_abs_reward / (1.0 - gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    /// Derived from `bias_target` when absent.
    pub horizon: Option<usize>,
    pub n: usize,
    pub seed: u64,
    pub bias_target: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            horizon: None,
            n: 10_000,
            seed: 0,
            bias_target: ROLLOUT_BIAS,
        }
    }
}

/// Sample mean of truncated discounted returns, on the scale of `V(w0)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RolloutEstimate<T> {
    pub mean: T,
    pub stderr: T,
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Bound on the truncated tail.
    pub bias: T,
}

impl<T: Scalar> RolloutEstimate<T> {
    /// Whether `exact` lies within `z` standard errors plus the bias.
    pub fn covers(&self, exact: T, z: T) -> bool {
        (self.mean - exact).abs() <= z * self.stderr + self.bias
    }
}

pub fn rollout_value<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    gamma: T,
    w0: usize,
    config: RolloutConfig,
) -> Result<RolloutEstimate<T>> {
    check_gamma(gamma)?;
    if w0 >= p.n_world() {
        return Err(Error::Index {
            what: "start world state",
            index: w0,
            size: p.n_world(),
        });
    }
    if config.n < 2 {
        return Err(Error::Argument("rollouts need n >= 2 trajectories".into()));
    }
    let g = gamma.as_f64();
    let m = p.max_abs_reward().as_f64();
    let horizon = match config.horizon {
        None => horizon_for_bias(g, m, config.bias_target)?,
        Some(h) => {
            let bias = truncation_bias(g, m, h);
            if bias > config.bias_target {
                return Err(Error::HorizonTooSmall {
                    horizon: h,
                    bias,
                    target: config.bias_target,
                });
            }
            h
        }
    };
    let sampler = Sampler::new(p, pi)?;
    let returns: Vec<f64> = (0..config.n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(config.seed, i);
            let mut w = w0;
            let mut disc = 1.0;
            let mut terms = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                let a = sampler.act(&mut rng, w);
                terms.push(disc * sampler.reward[w * sampler.n_action + a]);
                w = sampler.next(&mut rng, w, a);
                disc *= g;
            }
            compensated_sum(terms)
        })
        .collect();

    let n = returns.len() as f64;
    let shift = returns[0];
    let s1 = compensated_sum(returns.iter().map(|x| x - shift));
    let s2 = compensated_sum(returns.iter().map(|x| (x - shift) * (x - shift)));
    let mean = shift + s1 / n;
    let var = ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0);
    Ok(RolloutEstimate {
        mean: T::lit(mean),
        stderr: T::lit((var / n).sqrt()),
        n: config.n,
        horizon,
        seed: config.seed,
        bias: T::lit(truncation_bias(g, m, horizon)),
    })
}

/// Exact distribution of the world state after `t` steps.
pub fn propagate<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    mu: &Distribution<T>,
    t: usize,
) -> Result<Vec<T>> {
    p.check_distribution(mu)?;
    let m = p.world_transition(pi)?;
    let mut x = mu.probs().to_vec();
    for _ in 0..t {
        x = m.vec_mul(&x);
    }
    Ok(x)
}

/// Empirical frequencies of `w_t` over `n` independent trajectories
/// started from `mu`.
pub fn empirical_state_dist<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    mu: &Distribution<T>,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<Distribution<T>> {
    p.check_distribution(mu)?;
    if n == 0 {
        return Err(Error::Argument("need at least one trajectory".into()));
    }
    let sampler = Sampler::new(p, pi)?;
    let start: Vec<f64> = mu.probs().iter().map(|x| x.as_f64()).collect();
    let finals: Vec<usize> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(seed, i);
            let mut w = sample(&mut rng, &start);
            for _ in 0..t {
                let a = sampler.act(&mut rng, w);
                w = sampler.next(&mut rng, w, a);
            }
            w
        })
        .collect();
    let mut counts = vec![0usize; p.n_world()];
    for w in finals {
        counts[w] += 1;
    }
    Ok(Distribution::from_trusted(
        counts
            .into_iter()
            .map(|c| T::count(c) / T::count(n))
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBest<T> {
    pub idx: usize,
    pub point: Vec<T>,
    pub value: T,
}

/// Exhaustive maximization of the reward over row `s` on the resolution
/// grid. Ties go to the lowest grid index.
pub fn grid_argmax<T: Scalar>(
    p: &Pomdp<T>,
    mu: &Distribution<T>,
    mode: EvalMode<T>,
    s: usize,
    fixed_rows: &Policy<T>,
    resolution: usize,
) -> Result<GridBest<T>> {
    let table = reward_surface(p, mu, s, fixed_rows, resolution, mode)?;
    let best = table.argmax();
    Ok(GridBest {
        idx: best.idx,
        point: best.point.clone(),
        value: best.value,
    })
}
