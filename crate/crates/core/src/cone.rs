//! Policy improvement cones and support-bounded policy improvement.
//!
//! For a sensor value `s` consistent with world states `w_1 < ... < w_k`, the
//! improvement cone at `pi` is the set of action distributions `q` with
//! `sum_a q(a) Q(w_i, a) >= sum_a pi(a|s) Q(w_i, a)` for every `i`. Any policy
//! whose rows all lie in their cones improves `V` in every world state.
//!
//! [`face_reduce`] finds a point of such a cone supported on at most `k`
//! actions. It clips the simplex by the halfspaces of forms `k, ..., 2` and
//! returns the vertex of the remaining polytope maximizing form 1. Every
//! vertex of the simplex cut by `k - 1` halfspaces has at least `|A| - k`
//! zero coordinates, which is where the support bound comes from.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::{dist_inf, dot, rank};
use crate::pomdp::{support_size, Distribution, Policy, Pomdp};
use crate::scalar::{max_abs, Scalar};
use crate::tolerance::{CONE_SLACK, SUPPORT_THRESHOLD, VALUE_REGRESSION, VERTEX_DEDUP};
use crate::value::{scaled_tol, solve_value, ValueBundle};

/// The improvement cone of one sensor value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec<T> {
    pub sensor: usize,
    /// World states consistent with `sensor`, ascending; one form each.
    pub support: Vec<usize>,
    /// `forms[i][a] = Q(support[i], a)`
    pub forms: Vec<Vec<T>>,
    /// The current row `pi(.|sensor)`.
    pub base: Vec<T>,
    /// `thresholds[i] = <forms[i], base>`
    pub thresholds: Vec<T>,
}

impl<T: Scalar> ConeSpec<T> {
    /// True when no world state emits this sensor value; the cone is then
    /// the whole simplex.
    pub fn unobserved(&self) -> bool {
        self.forms.is_empty()
    }

    /// `l_i(q) - l_i(base)` for every form.
    pub fn slacks(&self, q: &[T]) -> Vec<T> {
        self.forms
            .iter()
            .zip(&self.thresholds)
            .map(|(f, &t)| dot(f, q) - t)
            .collect()
    }
}

pub(crate) fn cone_from_bundle<T: Scalar>(
    p: &Pomdp<T>,
    bundle: &ValueBundle<T>,
    pi: &Policy<T>,
    s: usize,
) -> Result<ConeSpec<T>> {
    let support = p.sensor_support(s)?;
    let base = pi.row(s).to_vec();
    let forms: Vec<Vec<T>> = support
        .iter()
        .map(|&w| bundle.action_values.row(w).to_vec())
        .collect();
    let thresholds = forms.iter().map(|f| dot(f, &base)).collect();
    Ok(ConeSpec {
        sensor: s,
        support,
        forms,
        base,
        thresholds,
    })
}

/// Linear forms `q -> sum_a q(a) Q(w, a)` for the world states consistent
/// with sensor value `s`, and their values at `pi(.|s)`.
pub fn cone_forms<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    gamma: T,
    s: usize,
) -> Result<ConeSpec<T>> {
    let bundle = solve_value(p, pi, gamma)?;
    cone_from_bundle(p, &bundle, pi, s)
}

/// Membership test with tolerance `1e-9`; returns the smallest slack
/// (`+inf` for an unobserved sensor).
pub fn cone_membership<T: Scalar>(cone: &ConeSpec<T>, q: &[T]) -> (bool, T) {
    let min = cone.slacks(q).into_iter().fold(T::infinity(), T::min);
    (min >= -T::tol(CONE_SLACK), min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Facet {
    /// `x_i >= 0`
    Coord(usize),
    /// `<normal_j, x> >= threshold_j`
    Cut(usize),
}

#[derive(Debug, Clone)]
struct Vertex<T> {
    point: Vec<T>,
    active: BTreeSet<Facet>,
}

/// A polytope inside the probability simplex, stored by its vertices.
///
/// Each vertex carries the set of constraints tight at it; two vertices are
/// joined by an edge exactly when their common tight constraints, together
/// with `sum x = 1`, have rank `dim - 1`.
#[derive(Debug, Clone)]
pub struct VPolytope<T> {
    dim: usize,
    vertices: Vec<Vertex<T>>,
    cuts: Vec<(Vec<T>, T)>,
}

fn plane_tol<T: Scalar>(normal: &[T]) -> T {
    scaled_tol(1e-12, max_abs(normal)) * max_abs(normal).max(T::one())
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

impl<T: Scalar> VPolytope<T> {
    /// The full simplex with vertices `e_0, ..., e_{dim-1}`.
    pub fn simplex(dim: usize) -> Self {
        let vertices = (0..dim)
            .map(|i| Vertex {
                point: (0..dim)
                    .map(|j| if i == j { T::one() } else { T::zero() })
                    .collect(),
                active: (0..dim).filter(|&j| j != i).map(Facet::Coord).collect(),
            })
            .collect();
        Self {
            dim,
            vertices,
            cuts: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> Vec<&[T]> {
        self.vertices.iter().map(|v| v.point.as_slice()).collect()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn normal(&self, f: Facet) -> Vec<T> {
        match f {
            Facet::Coord(i) => (0..self.dim)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect(),
            Facet::Cut(j) => {
                let n = &self.cuts[j].0;
                let scale = max_abs(n).max(T::min_positive_value());
                n.iter().map(|&x| x / scale).collect()
            }
        }
    }

    fn adjacent(&self, u: &Vertex<T>, v: &Vertex<T>) -> bool {
        let mut rows: Vec<Vec<T>> = u
            .active
            .intersection(&v.active)
            .map(|&f| self.normal(f))
            .collect();
        if rows.len() + 1 < self.dim - 1 {
            return false;
        }
        rows.push(vec![T::one(); self.dim]);
        rank(&rows, T::tol(1e-9)) == self.dim - 1
    }

    /// Adds every constraint that is tight at `v` within tolerance.
    fn refresh_active(&self, v: &mut Vertex<T>) {
        let tau = T::lit(SUPPORT_THRESHOLD);
        for (i, &x) in v.point.iter().enumerate() {
            if x <= tau {
                v.active.insert(Facet::Coord(i));
            }
        }
        for (j, (n, t)) in self.cuts.iter().enumerate() {
            if (dot(n, &v.point) - *t).abs() <= plane_tol(n) {
                v.active.insert(Facet::Cut(j));
            }
        }
    }

    /// Intersects with `{x : <normal, x> >= threshold}`: vertices on the
    /// feasible side are kept and crossing edges contribute their
    /// intersection points.
    pub fn clip(&mut self, normal: &[T], threshold: T) -> Result<()> {
        if normal.len() != self.dim {
            return Err(Error::dim("clipping form", self.dim, normal.len()));
        }
        let j = self.cuts.len();
        self.cuts.push((normal.to_vec(), threshold));
        let tol = plane_tol(normal);
        let slack: Vec<T> = self
            .vertices
            .iter()
            .map(|v| dot(normal, &v.point) - threshold)
            .collect();

        let mut next: Vec<Vertex<T>> = Vec::new();
        for (v, &sl) in self.vertices.iter().zip(&slack) {
            if sl >= -tol {
                let mut v = v.clone();
                if sl <= tol {
                    v.active.insert(Facet::Cut(j));
                }
                next.push(v);
            }
        }
        for (iu, u) in self.vertices.iter().enumerate() {
            if slack[iu] <= tol {
                continue;
            }
            for (iv, v) in self.vertices.iter().enumerate() {
                if slack[iv] >= -tol || !self.adjacent(u, v) {
                    continue;
                }
                let t = slack[iu] / (slack[iu] - slack[iv]);
                let common: BTreeSet<Facet> = u.active.intersection(&v.active).copied().collect();
                let point = u
                    .point
                    .iter()
                    .zip(&v.point)
                    .enumerate()
                    .map(|(i, (&a, &b))| {
                        if common.contains(&Facet::Coord(i)) {
                            T::zero()
                        } else {
                            a + t * (b - a)
                        }
                    })
                    .collect();
                let mut active = common;
                active.insert(Facet::Cut(j));
                next.push(Vertex { point, active });
            }
        }

        let dedup = T::tol(VERTEX_DEDUP);
        let mut merged: Vec<Vertex<T>> = Vec::with_capacity(next.len());
        for mut v in next {
            self.refresh_active(&mut v);
            match merged
                .iter_mut()
                .find(|m| dist_inf(&m.point, &v.point) <= dedup)
            {
                Some(m) => m.active.extend(v.active),
                None => merged.push(v),
            }
        }
        if merged.is_empty() {
            return Err(Error::Contract {
                what: "face reduction",
                detail: format!(
                    "clip by {normal:?} >= {threshold} left an empty polytope; vertices were {:?}",
                    self.vertices.iter().map(|v| &v.point).collect::<Vec<_>>()
                ),
            });
        }
        self.vertices = merged;
        Ok(())
    }

    /// Vertex maximizing `<form, x>`; near-ties (relative `1e-12`) go to the
    /// lexicographically smallest vertex.
    pub fn argmax(&self, form: &[T]) -> &[T] {
        let values: Vec<T> = self.vertices.iter().map(|v| dot(form, &v.point)).collect();
        let best = values.iter().copied().fold(T::neg_infinity(), T::max);
        let tol = plane_tol(form);
        self.vertices
            .iter()
            .zip(&values)
            .filter(|(_, &val)| val >= best - tol)
            .map(|(v, _)| v.point.as_slice())
            .min_by(|a, b| lex_cmp(a, b))
            .expect("polytope is non-empty")
    }
}

/// Returns `q` in the simplex with `<forms[i], q> >= <forms[i], base>` for all
/// `i` and at most `forms.len()` positive coordinates.
pub fn face_reduce<T: Scalar>(forms: &[Vec<T>], base: &[T]) -> Result<Vec<T>> {
    if forms.is_empty() {
        return Err(Error::Argument(
            "face reduction needs at least one form".into(),
        ));
    }
    let dim = base.len();
    if dim == 0 {
        return Err(Error::Argument(
            "face reduction over an empty action set".into(),
        ));
    }
    for (i, f) in forms.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::dim(format!("form {i}"), dim, f.len()));
        }
    }
    let thresholds: Vec<T> = forms.iter().map(|f| dot(f, base)).collect();

    let mut poly = VPolytope::simplex(dim);
    for i in (1..forms.len()).rev() {
        poly.clip(&forms[i], thresholds[i])?;
    }
    let q = poly.argmax(&forms[0]).to_vec();

    let k = forms.len();
    let worst = forms
        .iter()
        .zip(&thresholds)
        .map(|(f, &t)| (dot(f, &q) - t) / max_abs(f).max(T::one()))
        .fold(T::infinity(), T::min);
    if support_size(&q) > k || worst < -T::tol(1e-12) {
        return Err(Error::Contract {
            what: "face reduction",
            detail: format!(
                "result {q:?} has support {} (bound {k}) and worst scaled slack {worst}; forms {forms:?}, base {base:?}",
                support_size(&q)
            ),
        });
    }
    Ok(q)
}

/// A policy from the total improvement cone with small supports.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovedPolicy<T> {
    pub policy: Policy<T>,
    /// Positive-probability actions per sensor value.
    pub support_sizes: Vec<usize>,
    /// `k_s`, the number of world states consistent with each sensor value.
    pub support_bounds: Vec<usize>,
    /// Per sensor value: `(world state, slack of its form)`.
    pub certificate: Vec<Vec<(usize, T)>>,
    /// Values of the input and the improved policy.
    pub values_before: Vec<T>,
    pub values_after: Vec<T>,
}

/// Moves every row of `pi` to a point of its improvement cone supported on
/// at most `k_s` actions, then checks cone membership and that no world
/// state lost value.
///
/// Rows of sensor values that no world state emits become the first action.
pub fn improve_policy<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    gamma: T,
) -> Result<ImprovedPolicy<T>> {
    let bundle = solve_value(p, pi, gamma)?;
    improve_from_bundle(p, pi, &bundle)
}

fn improve_from_bundle<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    bundle: &ValueBundle<T>,
) -> Result<ImprovedPolicy<T>> {
    let na = p.n_action();
    let mut rows = Vec::with_capacity(p.n_sensor());
    let mut certificate = Vec::with_capacity(p.n_sensor());
    let mut support_bounds = Vec::with_capacity(p.n_sensor());
    let slack_tol = scaled_tol(CONE_SLACK, max_abs(bundle.action_values.as_slice()));

    for s in 0..p.n_sensor() {
        let cone = cone_from_bundle(p, bundle, pi, s)?;
        support_bounds.push(cone.support.len());
        let q = if cone.unobserved() {
            (0..na)
                .map(|a| if a == 0 { T::one() } else { T::zero() })
                .collect()
        } else {
            face_reduce(&cone.forms, &cone.base)?
        };
        let slacks = cone.slacks(&q);
        if let Some(bad) = slacks.iter().position(|&x| x < -slack_tol) {
            return Err(Error::Contract {
                what: "policy improvement",
                detail: format!(
                    "sensor {s}: form of world state {} has slack {}; row {q:?}, cone {cone:?}",
                    cone.support[bad], slacks[bad]
                ),
            });
        }
        certificate.push(cone.support.iter().copied().zip(slacks).collect());
        rows.push(q);
    }

    let policy = Policy::from_rows(&rows)?;
    let support_sizes: Vec<usize> = (0..p.n_sensor()).map(|s| policy.support_size(s)).collect();
    for (s, (&size, &bound)) in support_sizes.iter().zip(&support_bounds).enumerate() {
        if size > bound.max(1) {
            return Err(Error::Contract {
                what: "policy improvement",
                detail: format!("sensor {s}: support {size} exceeds bound {bound}"),
            });
        }
    }

    let after = solve_value(p, &policy, bundle.gamma)?;
    let value_tol = scaled_tol(VALUE_REGRESSION, max_abs(&bundle.values));
    for (w, (&new, &old)) in after.values.iter().zip(&bundle.values).enumerate() {
        if new < old - value_tol {
            return Err(Error::Contract {
                what: "policy improvement",
                detail: format!(
                    "value of world state {w} dropped from {old} to {new}; certificate {certificate:?}"
                ),
            });
        }
    }

    Ok(ImprovedPolicy {
        policy,
        support_sizes,
        support_bounds,
        certificate,
        values_before: bundle.values.clone(),
        values_after: after.values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub min_value: T,
    /// Normalized discounted reward from the supplied start distribution.
    pub reward: T,
    /// `max_w |V_new(w) - V_old(w)|`, zero for the initial row.
    pub max_change: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult<T> {
    pub policy: Policy<T>,
    /// Row 0 describes the starting policy.
    pub trace: Vec<TraceRow<T>>,
    pub iterations: usize,
    /// False when `max_iters` was reached first.
    pub converged: bool,
}

/// Repeats [`improve_policy`] until the largest value change falls below
/// `tol` or `max_iters` steps have been taken. Each step is monotone; the
/// limit need not be globally optimal.
pub fn improvement_iterate<T: Scalar>(
    p: &Pomdp<T>,
    pi0: &Policy<T>,
    gamma: T,
    mu: &Distribution<T>,
    max_iters: usize,
    tol: T,
) -> Result<IterationResult<T>> {
    p.check_distribution(mu)?;
    let mut policy = pi0.clone();
    let mut bundle = solve_value(p, &policy, gamma)?;
    let row = |it: usize, b: &ValueBundle<T>, change: T| TraceRow {
        iteration: it,
        min_value: b.values.iter().copied().fold(T::infinity(), T::min),
        reward: (T::one() - gamma) * dot(mu.probs(), &b.values),
        max_change: change,
    };
    let mut trace = vec![row(0, &bundle, T::zero())];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iters {
        let improved = improve_from_bundle(p, &policy, &bundle)?;
        let next = solve_value(p, &improved.policy, gamma)?;
        let change = dist_inf(&next.values, &bundle.values);
        trace.push(row(it, &next, change));
        policy = improved.policy;
        bundle = next;
        iterations = it;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(IterationResult {
        policy,
        trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, fix_a, fix_a_policy, fix_b, fix_c};
    use crate::linalg::Matrix;
    use crate::pomdp::RawPomdp;
    use crate::value::{advantage_eps, occupancy};
    use rand::Rng;

    #[test]
    fn single_state_forms_are_rewards_at_gamma_zero() {
        let p = fix_b::<f64>();
        let cone = cone_forms(&p, &Policy::uniform(1, 3), 0.0, 0).unwrap();
        assert_eq!(cone.forms, vec![vec![0.0, 1.0, 2.0]]);
        assert_eq!(cone.support, vec![0]);
    }

    #[test]
    fn fix_a_forms_at_gamma_zero() {
        let p = fix_a::<f64>();
        let cone = cone_forms(&p, &fix_a_policy(0.5), 0.0, 0).unwrap();
        assert_eq!(cone.forms, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn fix_c_forms_match_truncated_rollout() {
        let p = fix_c::<f64>();
        let pi = Policy::uniform(1, 3);
        let gamma = 0.9;
        let cone = cone_forms(&p, &pi, gamma, 0).unwrap();
        // Oracle: Q(w,a) = R(w,a) + sum_{t=1}^{500} gamma^t E[r(w_t) | w_0=w, a_0=a].
        let t = p.world_transition(&pi).unwrap();
        let r = p.mean_reward(&pi).unwrap();
        for (i, &w) in cone.support.iter().enumerate() {
            for a in 0..3 {
                let mut dist = p.alpha(w, a).to_vec();
                let mut acc = p.reward()[(w, a)];
                let mut g = gamma;
                for _ in 1..=500 {
                    acc += g * dot(&dist, &r);
                    dist = t.vec_mul(&dist);
                    g *= gamma;
                }
                assert!((cone.forms[i][a] - acc).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unobserved_sensor_gives_whole_simplex() {
        let raw = RawPomdp {
            n_world: 1,
            n_sensor: 2,
            n_action: 2,
            alpha: vec![vec![vec![1.0], vec![1.0]]],
            beta: vec![vec![1.0, 0.0]],
            reward: vec![vec![0.0, 1.0]],
        };
        let p = raw.validate().unwrap();
        let pi = Policy::uniform(2, 2);
        let cone = cone_forms(&p, &pi, 0.5, 1).unwrap();
        assert!(cone.unobserved());
        assert_eq!(cone_membership(&cone, &[1.0, 0.0]), (true, f64::INFINITY));
        let imp = improve_policy(&p, &pi, 0.5).unwrap();
        assert_eq!(imp.policy.row(1), &[1.0, 0.0]);
        assert_eq!(imp.policy.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn membership_of_base_and_maximizer() {
        let p = fix_b::<f64>();
        let cone = cone_forms(&p, &Policy::uniform(1, 3), 0.0, 0).unwrap();
        let (inside, slack) = cone_membership(&cone, &cone.base.clone());
        assert!(inside && slack.abs() < 1e-15);
        assert!(cone_membership(&cone, &[0.0, 0.0, 1.0]).0);
        assert!(!cone_membership(&cone, &[1.0, 0.0, 0.0]).0);
    }

    #[test]
    fn membership_matches_direct_recomputation() {
        let p = fix_c::<f64>();
        let pi = Policy::uniform(1, 3);
        let cone = cone_forms(&p, &pi, 0.9, 0).unwrap();
        let b = solve_value(&p, &pi, 0.9).unwrap();
        let mut rng = fixtures::rng(17);
        for _ in 0..500 {
            let q: Vec<f64> = fixtures::random_simplex_point(&mut rng, 3);
            let direct = (0..2).all(|w| {
                let lhs: f64 = (0..3).map(|a| q[a] * b.action_values[(w, a)]).sum();
                let rhs: f64 = (0..3).map(|a| pi.row(0)[a] * b.action_values[(w, a)]).sum();
                lhs - rhs >= -1e-9
            });
            assert_eq!(cone_membership(&cone, &q).0, direct);
        }
    }

    #[test]
    fn one_form_returns_best_vertex() {
        let q = face_reduce(&[vec![0.0, 1.0, 2.0]], &[0.5, 0.25, 0.25]).unwrap();
        assert_eq!(q, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn coordinate_forms_keep_all_thresholds() {
        let n = 4;
        let forms: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let base = vec![0.25; n];
        let q = face_reduce(&forms, &base).unwrap();
        assert!(q.iter().all(|&x| x >= 0.25 - 1e-12));
    }

    #[test]
    fn tie_goes_to_lexicographically_smallest_vertex() {
        // Constant form: every vertex is optimal.
        let q = face_reduce(&[vec![1.0, 1.0, 1.0]], &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(q, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn clipped_triangle_has_expected_vertices() {
        let mut poly = VPolytope::<f64>::simplex(3);
        poly.clip(&[1.0, 0.0, 0.0], 0.5).unwrap();
        let mut v: Vec<Vec<f64>> = poly.vertices().iter().map(|v| v.to_vec()).collect();
        v.sort_by(|a, b| lex_cmp(a, b));
        assert_eq!(
            v,
            vec![
                vec![0.5, 0.0, 0.5],
                vec![0.5, 0.5, 0.0],
                vec![1.0, 0.0, 0.0]
            ]
        );
    }

    #[test]
    fn clipping_square_face_skips_diagonals() {
        // Simplex in R^4 cut so that a quadrilateral face appears; the second
        // cut must only use true edges.
        let mut poly = VPolytope::<f64>::simplex(4);
        poly.clip(&[1.0, 1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(poly.len(), 6);
        poly.clip(&[1.0, 0.0, 1.0, 0.0], 0.5).unwrap();
        for v in poly.vertices() {
            assert!(support_size(v) <= 3, "{v:?}");
            assert!(v[0] + v[1] >= 0.5 - 1e-12 && v[0] + v[2] >= 0.5 - 1e-12);
        }
    }

    #[test]
    fn fix_c_two_forms_support_two() {
        let p = fix_c::<f64>();
        let pi = Policy::uniform(1, 3);
        let cone = cone_forms(&p, &pi, 0.9, 0).unwrap();
        let q = face_reduce(&cone.forms, &cone.base).unwrap();
        assert!(support_size(&q) <= 2);
        assert!(cone.slacks(&q).iter().all(|&s| s >= -1e-12));
        let new = Policy::from_rows(&[q]).unwrap();
        let eps = advantage_eps(&p, &pi, &new, 0.9).unwrap();
        assert!(eps.eps.iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn improvement_is_monotone_on_fix_a() {
        let p = fix_a::<f64>();
        let pi = fix_a_policy(0.3);
        let imp = improve_policy(&p, &pi, 0.9).unwrap();
        assert!(imp.support_sizes[0] <= 2);
        for (a, b) in imp.values_after.iter().zip(&imp.values_before) {
            assert!(a >= &(b - 1e-9));
        }
    }

    #[test]
    fn greedy_deterministic_policy_is_fixed_point() {
        let p = fixtures::fix_c_observable::<f64>();
        let gamma = 0.9;
        let mut pi = Policy::uniform(2, 3);
        for _ in 0..20 {
            pi = improve_policy(&p, &pi, gamma).unwrap().policy;
        }
        let v = solve_value(&p, &pi, gamma).unwrap().values;
        let again = improve_policy(&p, &pi, gamma).unwrap();
        assert!(dist_inf(&again.values_after, &v) < 1e-10);
    }

    #[test]
    fn iterate_with_zero_reward_stops_after_one_step() {
        let p = fix_c::<f64>().with_reward(Matrix::zeros(2, 3)).unwrap();
        let res = improvement_iterate(
            &p,
            &Policy::uniform(1, 3),
            0.9,
            &Distribution::uniform(2),
            50,
            1e-12,
        )
        .unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        assert_eq!(res.trace.len(), 2);
    }

    #[test]
    fn iterate_on_mdp_reaches_value_iteration_fixed_point() {
        let p = fixtures::fix_c_observable::<f64>();
        let gamma = 0.9;
        let res = improvement_iterate(
            &p,
            &Policy::uniform(2, 3),
            gamma,
            &Distribution::uniform(2),
            100,
            1e-13,
        )
        .unwrap();
        assert!(res.converged);
        for s in 0..2 {
            assert_eq!(res.policy.support_size(s), 1);
        }
        // Value iteration oracle.
        let mut v = vec![0.0; 2];
        for _ in 0..10_000 {
            v = (0..2)
                .map(|w| {
                    (0..3)
                        .map(|a| p.reward()[(w, a)] + gamma * dot(p.alpha(w, a), &v))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
        }
        let got = solve_value(&p, &res.policy, gamma).unwrap().values;
        assert!(dist_inf(&got, &v) < 1e-8);
    }

    #[test]
    fn cone_lower_bound_on_random_instances() {
        let mut rng = fixtures::rng(23);
        for _ in 0..30 {
            let p = fixtures::random_pomdp::<f64, _>(&mut rng, Default::default());
            let gamma = 0.9;
            let pi = fixtures::random_policy(&mut rng, p.n_sensor(), p.n_action());
            let b = solve_value(&p, &pi, gamma).unwrap();
            let rows: Vec<Vec<f64>> = (0..p.n_sensor())
                .map(|s| {
                    let cone = cone_from_bundle(&p, &b, &pi, s).unwrap();
                    loop {
                        let r: Vec<f64> = fixtures::random_simplex_point(&mut rng, p.n_action());
                        let t: f64 = rng.random::<f64>().powi(3);
                        let q: Vec<f64> = cone
                            .base
                            .iter()
                            .zip(&r)
                            .map(|(x, y)| x + t * (y - x))
                            .collect();
                        if cone_membership(&cone, &q).1 >= 0.0 {
                            break q;
                        }
                    }
                })
                .collect();
            let new = Policy::from_rows(&rows).unwrap();
            let vn = solve_value(&p, &new, gamma).unwrap().values;
            let d = occupancy(&p, &new, gamma).unwrap().diagonal;
            for w in 0..p.n_world() {
                let lin: f64 = (0..p.n_sensor())
                    .map(|s| {
                        p.beta()[(w, s)]
                            * (0..p.n_action())
                                .map(|a| (new.row(s)[a] - pi.row(s)[a]) * b.action_values[(w, a)])
                                .sum::<f64>()
                    })
                    .sum();
                assert!(
                    vn[w] - b.values[w] >= d[w] * lin - 1e-9,
                    "{} {} {}",
                    vn[w] - b.values[w],
                    d[w],
                    lin
                );
                assert!(d[w] * lin >= -1e-9);
            }
        }
    }
}
