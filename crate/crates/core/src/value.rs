//! Exact discounted-reward algebra.
//!
//! Everything here reduces to one dense linear solve of
//! `(I - gamma T_pi) V = r_pi`, where `T_pi` is the world-state transition
//! matrix and `r_pi` the expected one-step reward under the policy.

use crate::error::{Error, Result};
use crate::linalg::{dot, Lu, Matrix};
use crate::pomdp::{Distribution, Policy, Pomdp, WorldPolicy};
use crate::scalar::{max_abs, Scalar};
use crate::tolerance::{BELLMAN_RESIDUAL, FD_STEP, KERNEL_ROW_SUM, OCCUPANCY_ROW_SUM};

/// State values, action values and mean rewards of one `(policy, gamma)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueBundle<T> {
    pub gamma: T,
    /// `V(w)`
    pub values: Vec<T>,
    /// `Q(w, a) = R(w,a) + gamma sum_w' alpha(w'|w,a) V(w')`
    pub action_values: Matrix<T>,
    /// `r(w) = sum_a p(a|w) R(w,a)`
    pub mean_reward: Vec<T>,
    pub world_policy: WorldPolicy<T>,
}

impl<T: Scalar> ValueBundle<T> {
    /// `max_w |V(w) - sum_a p(a|w) Q(w,a)|`
    pub fn bellman_residual(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .map(|(w, &v)| (v - dot(self.world_policy.row(w), self.action_values.row(w))).abs())
            .fold(T::zero(), T::max)
    }
}

pub(crate) fn check_gamma<T: Scalar>(gamma: T) -> Result<()> {
    if gamma.is_finite() && gamma >= T::zero() && gamma < T::one() {
        Ok(())
    } else {
        Err(Error::Gamma(gamma.as_f64()))
    }
}

/// Absolute tolerance for quantities of magnitude `scale`: the requested
/// bound in double precision, widened to round-off level otherwise.
pub(crate) fn scaled_tol<T: Scalar>(bound: f64, scale: T) -> T {
    let floor = T::epsilon() * T::lit(256.0) * scale.max(T::one());
    T::lit(bound).max(floor)
}

fn discount_system<T: Scalar>(t: &Matrix<T>, gamma: T) -> Matrix<T> {
    let n = t.rows();
    Matrix::from_fn(n, n, |r, c| {
        let id = if r == c { T::one() } else { T::zero() };
        id - gamma * t[(r, c)]
    })
}

/// Value solve for an arbitrary `(s, a)` table. Rows need not be stochastic;
/// the finite-difference check relies on that.
pub(crate) fn solve_table<T: Scalar>(
    p: &Pomdp<T>,
    table: &Matrix<T>,
    gamma: T,
) -> Result<ValueBundle<T>> {
    check_gamma(gamma)?;
    let world = p.effective_table(table);
    let t = p.transition_from_world_table(&world);
    let r = p.mean_reward_from_world_table(&world);
    let lu = Lu::new(&discount_system(&t, gamma), "value solve")?;
    let values = lu.solve(&r);
    let action_values = Matrix::from_fn(p.n_world(), p.n_action(), |w, a| {
        p.reward()[(w, a)] + gamma * dot(p.alpha(w, a), &values)
    });
    let bundle = ValueBundle {
        gamma,
        values,
        action_values,
        mean_reward: r,
        world_policy: WorldPolicy(world),
    };
    let residual = bundle.bellman_residual();
    let tol = scaled_tol(BELLMAN_RESIDUAL, max_abs(&bundle.values));
    if !(residual <= tol) {
        return Err(Error::Contract {
            what: "value solve",
            detail: format!("Bellman residual {residual} exceeds {tol}"),
        });
    }
    Ok(bundle)
}

/// Solves the Bellman equation for `pi` by a direct LU solve.
pub fn solve_value<T: Scalar>(p: &Pomdp<T>, pi: &Policy<T>, gamma: T) -> Result<ValueBundle<T>> {
    p.check_policy(pi)?;
    solve_table(p, pi.table(), gamma)
}

/// Normalized discounted reward `(1 - gamma) <mu, V>`.
pub fn discounted_reward<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    gamma: T,
    mu: &Distribution<T>,
) -> Result<T> {
    p.check_distribution(mu)?;
    let bundle = solve_value(p, pi, gamma)?;
    Ok((T::one() - gamma) * dot(mu.probs(), &bundle.values))
}

/// Discounted occupancy `(I - gamma T)^{-1}`: entry `(w0, w)` is the expected
/// discounted number of visits to `w` starting from `w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy<T> {
    pub matrix: Matrix<T>,
    /// Discounted expected number of returns to each state, `d(w) >= 1`.
    pub diagonal: Vec<T>,
}

pub fn occupancy<T: Scalar>(p: &Pomdp<T>, pi: &Policy<T>, gamma: T) -> Result<Occupancy<T>> {
    check_gamma(gamma)?;
    let t = p.world_transition(pi)?;
    let matrix = Lu::new(&discount_system(&t, gamma), "occupancy")?.inverse();
    let diagonal: Vec<T> = (0..matrix.rows()).map(|w| matrix[(w, w)]).collect();

    let horizon = T::one() / (T::one() - gamma);
    let row_tol = scaled_tol(OCCUPANCY_ROW_SUM, horizon) * horizon.max(T::one());
    for (w, sum) in matrix.row_sums().into_iter().enumerate() {
        if !((sum - horizon).abs() <= row_tol) {
            return Err(Error::Contract {
                what: "occupancy",
                detail: format!("row {w} sums to {sum}, expected {horizon}"),
            });
        }
    }
    let min_neg = -scaled_tol(KERNEL_ROW_SUM, horizon);
    if let Some((i, &x)) = matrix
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, &x)| x < min_neg)
    {
        return Err(Error::Contract {
            what: "occupancy",
            detail: format!("negative entry {x} at flat index {i}"),
        });
    }
    Ok(Occupancy { matrix, diagonal })
}

/// One-step advantage `eps(w) = sum_a p'(a|w) Q(w,a) - V(w)` of `pi_new`
/// measured against the values of `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageVector<T> {
    pub eps: Vec<T>,
}

pub fn advantage_eps<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    pi_new: &Policy<T>,
    gamma: T,
) -> Result<AdvantageVector<T>> {
    let bundle = solve_value(p, pi, gamma)?;
    advantage_from_bundle(p, &bundle, pi_new)
}

pub(crate) fn advantage_from_bundle<T: Scalar>(
    p: &Pomdp<T>,
    bundle: &ValueBundle<T>,
    pi_new: &Policy<T>,
) -> Result<AdvantageVector<T>> {
    let world_new = p.effective_policy(pi_new)?;
    let eps = (0..p.n_world())
        .map(|w| dot(world_new.row(w), bundle.action_values.row(w)) - bundle.values[w])
        .collect();
    Ok(AdvantageVector { eps })
}

/// `max_w |V'(w) - V(w) - (D' eps)(w)|`, where `D'` is the occupancy of
/// `pi_new`. The two sides are computed by separate solves.
pub fn improvement_identity_residual<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    pi_new: &Policy<T>,
    gamma: T,
) -> Result<T> {
    let old = solve_value(p, pi, gamma)?;
    let new = solve_value(p, pi_new, gamma)?;
    let eps = advantage_from_bundle(p, &old, pi_new)?;
    let occ = occupancy(p, pi_new, gamma)?;
    let gain = occ.matrix.mul_vec(&eps.eps);
    Ok((0..p.n_world())
        .map(|w| (new.values[w] - old.values[w] - gain[w]).abs())
        .fold(T::zero(), T::max))
}

/// Derivatives `dV(w0) / d pi(a|s)` in unconstrained table coordinates,
/// laid out as `(w0, s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient<T> {
    n_world: usize,
    n_sensor: usize,
    n_action: usize,
    data: Vec<T>,
}

impl<T: Scalar> PolicyGradient<T> {
    #[inline]
    pub fn get(&self, w0: usize, s: usize, a: usize) -> T {
        self.data[(w0 * self.n_sensor + s) * self.n_action + a]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_world, self.n_sensor, self.n_action)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Directional derivative of `V(w0)` along a policy-table direction.
    pub fn directional(&self, w0: usize, direction: &Matrix<T>) -> T {
        let mut acc = T::zero();
        for s in 0..self.n_sensor {
            for a in 0..self.n_action {
                acc += self.get(w0, s, a) * direction[(s, a)];
            }
        }
        acc
    }
}

/// Exact policy gradient:
/// `dV(w0)/d pi(a|s) = sum_w D(w0, w) beta(s|w) Q(w, a)`.
pub fn policy_gradient_exact<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    gamma: T,
) -> Result<PolicyGradient<T>> {
    let bundle = solve_value(p, pi, gamma)?;
    let occ = occupancy(p, pi, gamma)?;
    Ok(gradient_from_parts(p, &bundle, &occ))
}

fn gradient_from_parts<T: Scalar>(
    p: &Pomdp<T>,
    bundle: &ValueBundle<T>,
    occ: &Occupancy<T>,
) -> PolicyGradient<T> {
    let (nw, ns, na) = (p.n_world(), p.n_sensor(), p.n_action());
    let mut data = vec![T::zero(); nw * ns * na];
    for w0 in 0..nw {
        for w in 0..nw {
            let d = occ.matrix[(w0, w)];
            if d == T::zero() {
                continue;
            }
            for s in 0..ns {
                let b = p.beta()[(w, s)];
                if b == T::zero() {
                    continue;
                }
                let base = (w0 * ns + s) * na;
                for a in 0..na {
                    data[base + a] += d * b * bundle.action_values[(w, a)];
                }
            }
        }
    }
    PolicyGradient {
        n_world: nw,
        n_sensor: ns,
        n_action: na,
        data,
    }
}

/// Compares [`policy_gradient_exact`] with central differences of `V(w0)`
/// obtained by perturbing one table entry by `+-step` without renormalizing.
///
/// Returns the largest error `|exact - fd| / max(|exact|, 1)` over all
/// `(w0, s, a)`. Every entry of `pi` must be at least `2 * step`.
pub fn gradient_fd_check<T: Scalar>(p: &Pomdp<T>, pi: &Policy<T>, gamma: T, step: T) -> Result<T> {
    p.check_policy(pi)?;
    if !(step > T::zero()) {
        return Err(Error::Argument(format!(
            "finite-difference step {step} must be positive"
        )));
    }
    let margin = step + step;
    for s in 0..pi.n_sensor() {
        for (a, &x) in pi.row(s).iter().enumerate() {
            if x < margin {
                return Err(Error::Margin {
                    s,
                    a,
                    value: x.as_f64(),
                    margin: margin.as_f64(),
                });
            }
        }
    }
    let exact = policy_gradient_exact(p, pi, gamma)?;
    let mut worst = T::zero();
    for s in 0..pi.n_sensor() {
        for a in 0..pi.n_action() {
            let mut plus = pi.table().clone();
            plus[(s, a)] += step;
            let mut minus = pi.table().clone();
            minus[(s, a)] -= step;
            let vp = solve_table(p, &plus, gamma)?.values;
            let vm = solve_table(p, &minus, gamma)?.values;
            for w0 in 0..p.n_world() {
                let fd = (vp[w0] - vm[w0]) / (step + step);
                let e = exact.get(w0, s, a);
                let err = (e - fd).abs() / e.abs().max(T::one());
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}

/// [`gradient_fd_check`] with the default step `1e-5`.
pub fn gradient_fd_check_default<T: Scalar>(p: &Pomdp<T>, pi: &Policy<T>, gamma: T) -> Result<T> {
    gradient_fd_check(p, pi, gamma, T::lit(FD_STEP))
}
