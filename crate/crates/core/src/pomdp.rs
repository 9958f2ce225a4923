//! POMDP tuples, memoryless policies, distributions and the kernels derived
//! from them.
//!
//! World states, sensor states and actions are 0-based indices. A [`Pomdp`]
//! holds the transition kernel `alpha(w'|w,a)`, the observation kernel
//! `beta(s|w)` and the reward table `R(w,a)`. A [`Policy`] is a row-stochastic
//! table `pi(a|s)`; composing it with `beta` gives the action distribution
//! actually played in each world state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;
use crate::tolerance::{INPUT_ROW_SUM, KERNEL_ROW_SUM, SUPPORT_THRESHOLD};

/// Unvalidated POMDP tables, laid out exactly as in the JSON file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RawPomdp<T> {
    pub n_world: usize,
    pub n_sensor: usize,
    pub n_action: usize,
    /// `alpha[w][a][w']`
    pub alpha: Vec<Vec<Vec<T>>>,
    /// `beta[w][s]`
    pub beta: Vec<Vec<T>>,
    /// `reward[w][a]`
    pub reward: Vec<Vec<T>>,
}

/// A validated POMDP `(W, S, A, alpha, beta, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp<T> {
    n_world: usize,
    n_sensor: usize,
    n_action: usize,
    /// Row `w * n_action + a` holds `alpha(.|w,a)`.
    alpha: Matrix<T>,
    beta: Matrix<T>,
    reward: Matrix<T>,
}

/// Checks a probability row. Rows whose sum is off by more than the kernel
/// tolerance are rescaled; the others are kept bit for bit, so a validated
/// table survives a write and reload unchanged.
fn stochastic_row<T: Scalar>(
    kernel: &'static str,
    location: impl Fn() -> String,
    row: &mut [T],
) -> Result<()> {
    for &x in row.iter() {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                kernel,
                location: location(),
            });
        }
        if x < T::zero() {
            return Err(Error::NegativeProbability {
                kernel,
                value: x.as_f64(),
                location: location(),
            });
        }
    }
    let sum: T = row.iter().copied().sum();
    if (sum - T::one()).abs() > T::tol(INPUT_ROW_SUM) {
        return Err(Error::RowSum {
            kernel,
            sum: sum.as_f64(),
            location: location(),
        });
    }
    if (sum - T::one()).abs() > T::tol(KERNEL_ROW_SUM) {
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    Ok(())
}

fn check_len(what: impl Fn() -> String, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dim(what(), expected, found))
    }
}

impl<T: Scalar> RawPomdp<T> {
    pub fn validate(&self) -> Result<Pomdp<T>> {
        Pomdp::from_raw(self)
    }
}

impl<T: Scalar> Pomdp<T> {
    /// Validates raw tables: consistent dimensions, stochastic rows within
    /// `1e-9`, no negative probabilities and finite rewards.
    pub fn from_raw(raw: &RawPomdp<T>) -> Result<Self> {
        let (nw, ns, na) = (raw.n_world, raw.n_sensor, raw.n_action);
        for (name, v) in [("n_world", nw), ("n_sensor", ns), ("n_action", na)] {
            if v == 0 {
                return Err(Error::Argument(format!("{name} must be positive")));
            }
        }
        check_len(|| "alpha (world states)".into(), nw, raw.alpha.len())?;
        check_len(|| "beta (world states)".into(), nw, raw.beta.len())?;
        check_len(|| "reward (world states)".into(), nw, raw.reward.len())?;

        let mut alpha = Matrix::zeros(nw * na, nw);
        for (w, per_action) in raw.alpha.iter().enumerate() {
            check_len(|| format!("alpha[{w}] (actions)"), na, per_action.len())?;
            for (a, dist) in per_action.iter().enumerate() {
                check_len(
                    || format!("alpha[{w}][{a}] (successor states)"),
                    nw,
                    dist.len(),
                )?;
                let row = alpha.row_mut(w * na + a);
                row.copy_from_slice(dist);
                stochastic_row("alpha", || format!("w={w},a={a}"), row)?;
            }
        }

        let mut beta = Matrix::zeros(nw, ns);
        for (w, dist) in raw.beta.iter().enumerate() {
            check_len(|| format!("beta[{w}] (sensor states)"), ns, dist.len())?;
            let row = beta.row_mut(w);
            row.copy_from_slice(dist);
            stochastic_row("beta", || format!("w={w}"), row)?;
        }

        let mut reward = Matrix::zeros(nw, na);
        for (w, rs) in raw.reward.iter().enumerate() {
            check_len(|| format!("reward[{w}] (actions)"), na, rs.len())?;
            for (a, &r) in rs.iter().enumerate() {
                if !r.is_finite() {
                    return Err(Error::NonFinite {
                        kernel: "reward",
                        location: format!("w={w},a={a}"),
                    });
                }
                reward[(w, a)] = r;
            }
        }

        Ok(Self {
            n_world: nw,
            n_sensor: ns,
            n_action: na,
            alpha,
            beta,
            reward,
        })
    }

    pub fn to_raw(&self) -> RawPomdp<T> {
        RawPomdp {
            n_world: self.n_world,
            n_sensor: self.n_sensor,
            n_action: self.n_action,
            alpha: (0..self.n_world)
                .map(|w| {
                    (0..self.n_action)
                        .map(|a| self.alpha(w, a).to_vec())
                        .collect()
                })
                .collect(),
            beta: self.beta.to_rows(),
            reward: self.reward.to_rows(),
        }
    }

    #[inline]
    pub fn n_world(&self) -> usize {
        self.n_world
    }

    #[inline]
    pub fn n_sensor(&self) -> usize {
        self.n_sensor
    }

    #[inline]
    pub fn n_action(&self) -> usize {
        self.n_action
    }

    /// `alpha(.|w,a)` as a distribution over successor world states.
    #[inline]
    pub fn alpha(&self, w: usize, a: usize) -> &[T] {
        self.alpha.row(w * self.n_action + a)
    }

    /// Observation kernel, rows indexed by world state.
    #[inline]
    pub fn beta(&self) -> &Matrix<T> {
        &self.beta
    }

    /// Reward table indexed `(w, a)`.
    #[inline]
    pub fn reward(&self) -> &Matrix<T> {
        &self.reward
    }

    pub fn max_abs_reward(&self) -> T {
        crate::scalar::max_abs(self.reward.as_slice())
    }

    /// Returns a copy with the reward table replaced.
    pub fn with_reward(&self, reward: Matrix<T>) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.reward = reward.to_rows();
        Self::from_raw(&raw)
    }

    pub(crate) fn check_policy(&self, pi: &Policy<T>) -> Result<()> {
        check_len(
            || "policy (sensor states)".into(),
            self.n_sensor,
            pi.n_sensor(),
        )?;
        check_len(|| "policy (actions)".into(), self.n_action, pi.n_action())
    }

    pub(crate) fn check_distribution(&self, mu: &Distribution<T>) -> Result<()> {
        check_len(
            || "distribution over world states".into(),
            self.n_world,
            mu.len(),
        )
    }

    /// `p(a|w) = sum_s beta(s|w) table(s,a)` for an arbitrary `(s, a)` table.
    pub(crate) fn effective_table(&self, table: &Matrix<T>) -> Matrix<T> {
        self.beta.matmul(table)
    }

    /// `T(w,w') = sum_a p(a|w) alpha(w'|w,a)` for an arbitrary `(w, a)` table.
    pub(crate) fn transition_from_world_table(&self, world: &Matrix<T>) -> Matrix<T> {
        let nw = self.n_world;
        let mut t = Matrix::zeros(nw, nw);
        for w in 0..nw {
            for a in 0..self.n_action {
                let p = world[(w, a)];
                if p == T::zero() {
                    continue;
                }
                for (dst, &q) in t.row_mut(w).iter_mut().zip(self.alpha(w, a)) {
                    *dst += p * q;
                }
            }
        }
        t
    }

    /// `r(w) = sum_a p(a|w) R(w,a)` for an arbitrary `(w, a)` table.
    pub(crate) fn mean_reward_from_world_table(&self, world: &Matrix<T>) -> Vec<T> {
        (0..self.n_world)
            .map(|w| dot(world.row(w), self.reward.row(w)))
            .collect()
    }

    /// The effective world-state policy `p^pi(a|w) = sum_s beta(s|w) pi(a|s)`.
    pub fn effective_policy(&self, pi: &Policy<T>) -> Result<WorldPolicy<T>> {
        self.check_policy(pi)?;
        Ok(WorldPolicy(self.effective_table(&pi.table)))
    }

    /// World-state transition matrix of the chain driven by `pi`.
    pub fn world_transition(&self, pi: &Policy<T>) -> Result<Matrix<T>> {
        let world = self.effective_policy(pi)?;
        Ok(self.transition_from_world_table(&world.0))
    }

    /// Expected one-step reward in each world state under `pi`.
    pub fn mean_reward(&self, pi: &Policy<T>) -> Result<Vec<T>> {
        let world = self.effective_policy(pi)?;
        Ok(self.mean_reward_from_world_table(&world.0))
    }

    /// World states that can emit sensor value `s`, in ascending order.
    /// Its length is the support bound `k_s`.
    pub fn sensor_support(&self, s: usize) -> Result<Vec<usize>> {
        if s >= self.n_sensor {
            return Err(Error::Index {
                what: "sensor state",
                index: s,
                size: self.n_sensor,
            });
        }
        let tau = T::lit(SUPPORT_THRESHOLD);
        Ok((0..self.n_world)
            .filter(|&w| self.beta[(w, s)] > tau)
            .collect())
    }
}

/// A memoryless stationary policy `pi(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    table: Matrix<T>,
}

impl<T: Scalar> Policy<T> {
    /// Validates rows as points of the action simplex (tolerance `1e-9`),
    /// then renormalizes them.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Argument(
                "policy needs at least one sensor state and action".into(),
            ));
        }
        let mut table = Matrix::from_rows(rows)?;
        for s in 0..table.rows() {
            stochastic_row("policy", || format!("s={s}"), table.row_mut(s))?;
        }
        Ok(Self { table })
    }

    pub fn uniform(n_sensor: usize, n_action: usize) -> Self {
        let p = T::one() / T::count(n_action);
        Self {
            table: Matrix::from_fn(n_sensor, n_action, |_, _| p),
        }
    }

    /// Deterministic policy choosing `actions[s]` in sensor state `s`.
    pub fn deterministic(actions: &[usize], n_action: usize) -> Result<Self> {
        for &a in actions {
            if a >= n_action {
                return Err(Error::Index {
                    what: "action",
                    index: a,
                    size: n_action,
                });
            }
        }
        Ok(Self {
            table: Matrix::from_fn(actions.len(), n_action, |s, a| {
                if actions[s] == a {
                    T::one()
                } else {
                    T::zero()
                }
            }),
        })
    }

    #[inline]
    pub fn n_sensor(&self) -> usize {
        self.table.rows()
    }

    #[inline]
    pub fn n_action(&self) -> usize {
        self.table.cols()
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[T] {
        self.table.row(s)
    }

    pub fn table(&self) -> &Matrix<T> {
        &self.table
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.table.to_rows()
    }

    /// Copy of this policy with row `s` replaced by `q`.
    pub fn with_row(&self, s: usize, q: &[T]) -> Result<Self> {
        if s >= self.n_sensor() {
            return Err(Error::Index {
                what: "sensor state",
                index: s,
                size: self.n_sensor(),
            });
        }
        check_len(|| "policy row (actions)".into(), self.n_action(), q.len())?;
        let mut table = self.table.clone();
        let row = table.row_mut(s);
        row.copy_from_slice(q);
        stochastic_row("policy", || format!("s={s}"), row)?;
        Ok(Self { table })
    }

    /// Number of actions played with probability above the support threshold.
    pub fn support_size(&self, s: usize) -> usize {
        support_size(self.row(s))
    }
}

/// Count of coordinates above the support threshold.
pub fn support_size<T: Scalar>(q: &[T]) -> usize {
    let tau = T::lit(SUPPORT_THRESHOLD);
    q.iter().filter(|&&x| x > tau).count()
}

/// A probability distribution over a finite set.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn new(mut probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Argument("distribution over an empty set".into()));
        }
        stochastic_row("distribution", || "all".into(), &mut probs)?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![T::one() / T::count(n); n],
        }
    }

    /// Point mass on `i`.
    pub fn point(n: usize, i: usize) -> Self {
        let mut probs = vec![T::zero(); n];
        probs[i] = T::one();
        Self { probs }
    }

    /// Wraps values already known to be a distribution (e.g. empirical
    /// frequencies or a solved stationary vector).
    pub(crate) fn from_trusted(probs: Vec<T>) -> Self {
        Self { probs }
    }

    #[inline]
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// The effective action distribution `p^pi(a|w)` in each world state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldPolicy<T>(pub Matrix<T>);

impl<T: Scalar> WorldPolicy<T> {
    pub fn row(&self, w: usize) -> &[T] {
        self.0.row(w)
    }
}

/// The barycentric lattice `{k/m : k in N^dim, |k| = m}` in the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid<T> {
    dim: usize,
    resolution: usize,
    compositions: Vec<Vec<u32>>,
    points: Vec<Vec<T>>,
}

/// `binomial(m + d - 1, d - 1)`, saturating.
pub fn grid_count(dim: usize, resolution: usize) -> u128 {
    let n = (resolution + dim - 1) as u128;
    let k = (dim - 1).min(resolution) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

impl<T: Scalar> SimplexGrid<T> {
    /// Enumerates the lattice in lexicographic order of the integer
    /// compositions `(k_1, ..., k_dim)`.
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        Self::with_limit(dim, resolution, crate::tolerance::MAX_GRID_POINTS)
    }

    pub fn with_limit(dim: usize, resolution: usize, limit: usize) -> Result<Self> {
        if dim == 0 || resolution == 0 {
            return Err(Error::Argument(format!(
                "simplex grid needs dim >= 1 and resolution >= 1, got dim={dim}, resolution={resolution}"
            )));
        }
        let count = grid_count(dim, resolution);
        if count > limit as u128 {
            return Err(Error::GridTooLarge { count, limit });
        }
        let mut compositions = Vec::with_capacity(count as usize);
        let mut current = vec![0u32; dim];
        compose(&mut current, 0, resolution as u32, &mut compositions);
        let m = T::count(resolution);
        let points = compositions
            .iter()
            .map(|k| k.iter().map(|&ki| T::count(ki as usize) / m).collect())
            .collect();
        Ok(Self {
            dim,
            resolution,
            compositions,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    /// Integer numerators `k` of each point `k / resolution`.
    pub fn compositions(&self) -> &[Vec<u32>] {
        &self.compositions
    }
}

fn compose(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for k in 0..=remaining {
        current[pos] = k;
        compose(current, pos + 1, remaining - k, out);
    }
}

/// Convenience wrapper for [`SimplexGrid::new`].
pub fn simplex_grid<T: Scalar>(dim: usize, resolution: usize) -> Result<SimplexGrid<T>> {
    SimplexGrid::new(dim, resolution)
}
