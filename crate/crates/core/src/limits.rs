//! Discounted-to-average experiments: reward surfaces over one policy row,
//! uniform convergence sweeps in `gamma`, maximizer tracking, and the
//! built-in four-state example.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::pomdp::{Distribution, Policy, Pomdp, RawPomdp, SimplexGrid};
use crate::scalar::Scalar;
use crate::stationary::average_reward_report;
use crate::tolerance::ARGMAX_TIE;
use crate::value::solve_value;

/// Discount factors used by sweeps unless told otherwise.
pub const DEFAULT_GAMMAS: [f64; 5] = [0.6, 0.9, 0.99, 0.999, 0.9999];

/// The built-in example together with its default start distribution and
/// the ambiguous sensor value.
#[derive(Debug, Clone)]
pub struct BuiltinExample<T> {
    pub pomdp: Pomdp<T>,
    pub mu: Distribution<T>,
    pub sensor: usize,
}

/// Four world states, three sensor values, three actions.
///
/// * World states 0 and 1 are observed as sensor values 0 and 1; every
///   action has the same successor distribution and reward there.
/// * World states 2 and 3 are both observed as sensor value 2. Immediate
///   reward favors action 0 in state 2 and action 1 in state 3.
/// * All transition probabilities are positive, so every policy induces an
///   irreducible aperiodic chain.
///
/// With `mu` uniform, the best row for sensor value 2 on the resolution-40
/// grid is `(0, 0.6, 0.4)` at `gamma = 0.6` and for the average reward: it
/// mixes actions 1 and 2 although the per-state greedy actions at that
/// policy are 0 and 1. `docs/builtin_example.md` lists the full derivation.
pub fn builtin_example<T: Scalar>() -> BuiltinExample<T> {
    let row = |v: [f64; 4]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    let same = |v: [f64; 4]| vec![row(v), row(v), row(v)];
    let raw = RawPomdp {
        n_world: 4,
        n_sensor: 3,
        n_action: 3,
        alpha: vec![
            same([0.39, 0.11, 0.17, 0.33]),
            same([0.05, 0.43, 0.29, 0.23]),
            vec![
                row([0.36, 0.09, 0.18, 0.37]),
                row([0.25, 0.25, 0.05, 0.45]),
                row([0.25, 0.45, 0.10, 0.20]),
            ],
            vec![
                row([0.31, 0.10, 0.28, 0.31]),
                row([0.08, 0.46, 0.38, 0.08]),
                row([0.23, 0.31, 0.08, 0.38]),
            ],
        ],
        beta: vec![
            row([1.0, 0.0, 0.0, 0.0])[..3].to_vec(),
            row([0.0, 1.0, 0.0, 0.0])[..3].to_vec(),
            row([0.0, 0.0, 1.0, 0.0])[..3].to_vec(),
            row([0.0, 0.0, 1.0, 0.0])[..3].to_vec(),
        ],
        reward: vec![
            row([0.0, 0.0, 0.0, 0.0])[..3].to_vec(),
            row([-0.1, -0.1, -0.1, 0.0])[..3].to_vec(),
            row([0.6, -1.0, 0.3, 0.0])[..3].to_vec(),
            row([-0.7, 0.9, -0.3, 0.0])[..3].to_vec(),
        ],
    };
    BuiltinExample {
        pomdp: raw.validate().expect("built-in example is valid"),
        mu: Distribution::uniform(4),
        sensor: 2,
    }
}

/// Position of the first value within the tie tolerance of the maximum.
pub fn first_max<T: Scalar>(values: impl Iterator<Item = T> + Clone) -> usize {
    let max = values.clone().fold(T::neg_infinity(), T::max);
    let tie = T::tol(ARGMAX_TIE) * max.abs().max(T::one());
    values
        .into_iter()
        .position(|v| v >= max - tie)
        .expect("non-empty list of finite values")
}

/// Which long-term reward to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode<T> {
    Discounted(T),
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRow<T> {
    pub idx: usize,
    pub point: Vec<T>,
    pub value: T,
    /// Set in average mode when the chain of this policy is not irreducible
    /// and aperiodic; the value then comes from the Cesaro limit.
    pub flagged: bool,
}

/// Reward as a function of one policy row, on a simplex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTable<T> {
    pub sensor: usize,
    pub resolution: usize,
    pub mode: EvalMode<T>,
    pub rows: Vec<SurfaceRow<T>>,
}

impl<T: Scalar> SurfaceTable<T> {
    /// First row attaining the largest value up to the tie tolerance.
    pub fn argmax(&self) -> &SurfaceRow<T> {
        let i = first_max(self.rows.iter().map(|r| r.value));
        &self.rows[i]
    }
}

/// `fixed_rows` with row `s` replaced by each grid point, in grid order.
pub fn sensor_grid_policies<T: Scalar>(
    fixed_rows: &Policy<T>,
    s: usize,
    grid: &SimplexGrid<T>,
) -> Result<Vec<Policy<T>>> {
    if grid.dim() != fixed_rows.n_action() {
        return Err(Error::dim(
            "grid dimension (actions)",
            fixed_rows.n_action(),
            grid.dim(),
        ));
    }
    grid.points()
        .iter()
        .map(|q| fixed_rows.with_row(s, q))
        .collect()
}

/// Evaluates one policy; the flag marks average-mode chains violating the
/// irreducible-aperiodic assumption.
pub fn evaluate<T: Scalar>(
    p: &Pomdp<T>,
    mu: &Distribution<T>,
    pi: &Policy<T>,
    mode: EvalMode<T>,
) -> Result<(T, bool)> {
    match mode {
        EvalMode::Discounted(gamma) => {
            let b = solve_value(p, pi, gamma)?;
            Ok(((T::one() - gamma) * dot(mu.probs(), &b.values), false))
        }
        EvalMode::Average => {
            let (value, report, _) = average_reward_report(p, pi, mu)?;
            Ok((value, !report.satisfies_star))
        }
    }
}

/// Substitutes every grid point for row `s` of `fixed_rows` and evaluates
/// the resulting policy. Rows come back in grid order.
pub fn reward_surface<T: Scalar>(
    p: &Pomdp<T>,
    mu: &Distribution<T>,
    s: usize,
    fixed_rows: &Policy<T>,
    resolution: usize,
    mode: EvalMode<T>,
) -> Result<SurfaceTable<T>> {
    p.check_policy(fixed_rows)?;
    p.check_distribution(mu)?;
    let grid = SimplexGrid::new(p.n_action(), resolution)?;
    let policies = sensor_grid_policies(fixed_rows, s, &grid)?;
    let rows = policies
        .par_iter()
        .enumerate()
        .map(|(idx, pi)| {
            let (value, flagged) = evaluate(p, mu, pi, mode)?;
            Ok(SurfaceRow {
                idx,
                point: pi.row(s).to_vec(),
                value,
                flagged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceTable {
        sensor: s,
        resolution,
        mode,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub policy_id: usize,
    /// Normalized discounted reward for each `gamma`, same order as the sweep.
    pub discounted: Vec<T>,
    pub average: T,
}

/// Discounted and average rewards of a family of policies.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSweep<T> {
    pub gammas: Vec<T>,
    pub rows: Vec<SweepRow<T>>,
    /// `max over rows of |R^gamma - R|`, per gamma.
    pub sup_gap: Vec<T>,
    /// Ids of policies whose chain is not irreducible and aperiodic.
    pub excluded: Vec<usize>,
}

impl<T: Scalar> GammaSweep<T> {
    /// Per gamma, the first row attaining the best discounted reward:
    /// `(policy id, value)`.
    pub fn argmax(&self) -> Vec<(usize, T)> {
        (0..self.gammas.len())
            .map(|g| {
                let r = &self.rows[first_max(self.rows.iter().map(|r| r.discounted[g]))];
                (r.policy_id, r.discounted[g])
            })
            .collect()
    }

    /// First row attaining the best average reward.
    pub fn average_argmax(&self) -> (usize, T) {
        let r = &self.rows[first_max(self.rows.iter().map(|r| r.average))];
        (r.policy_id, r.average)
    }

    /// True when `sup_gap` never increases by more than `tol` along the
    /// (ascending) gamma sequence.
    pub fn sup_gap_nonincreasing(&self, tol: T) -> bool {
        self.sup_gap.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

fn check_gammas<T: Scalar>(gammas: &[T]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::Argument("empty gamma list".into()));
    }
    for &g in gammas {
        crate::value::check_gamma(g)?;
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(
            "gamma list must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Evaluates every policy for every `gamma` and for the average reward.
/// Policies violating the irreducible-aperiodic assumption are excluded.
pub fn gamma_convergence_sweep<T: Scalar>(
    p: &Pomdp<T>,
    mu: &Distribution<T>,
    policies: &[Policy<T>],
    gammas: &[T],
) -> Result<GammaSweep<T>> {
    check_gammas(gammas)?;
    p.check_distribution(mu)?;
    let evaluated = policies
        .par_iter()
        .enumerate()
        .map(|(id, pi)| {
            let (average, report, _) = average_reward_report(p, pi, mu)?;
            if !report.satisfies_star {
                return Ok((id, None));
            }
            let discounted = gammas
                .iter()
                .map(|&g| evaluate(p, mu, pi, EvalMode::Discounted(g)).map(|v| v.0))
                .collect::<Result<Vec<T>>>()?;
            Ok((
                id,
                Some(SweepRow {
                    policy_id: id,
                    discounted,
                    average,
                }),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(evaluated.len());
    let mut excluded = Vec::new();
    for (id, row) in evaluated {
        match row {
            Some(r) => rows.push(r),
            None => excluded.push(id),
        }
    }
    if rows.is_empty() {
        return Err(Error::StarViolation(
            "every policy in the sweep was excluded".into(),
        ));
    }

    let (rmin, rmax) = p
        .reward()
        .as_slice()
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let slack = T::tol(1e-9) * (rmax - rmin).abs().max(T::one());
    for r in &rows {
        for &v in r.discounted.iter().chain(std::iter::once(&r.average)) {
            if v < rmin - slack || v > rmax + slack {
                return Err(Error::Contract {
                    what: "gamma sweep",
                    detail: format!(
                        "policy {} has reward {v} outside [{rmin}, {rmax}]",
                        r.policy_id
                    ),
                });
            }
        }
    }

    let sup_gap = (0..gammas.len())
        .map(|g| {
            rows.iter()
                .map(|r| (r.discounted[g] - r.average).abs())
                .fold(T::zero(), T::max)
        })
        .collect();
    Ok(GammaSweep {
        gammas: gammas.to_vec(),
        rows,
        sup_gap,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow<T> {
    pub gamma: T,
    pub argmax_id: usize,
    pub discounted_value: T,
    /// Average reward of the discounted maximizer.
    pub average_at_argmax: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizerTrack<T> {
    pub rows: Vec<TrackRow<T>>,
    pub average_argmax: usize,
    pub average_max: T,
    pub excluded: Vec<usize>,
}

/// Follows the discounted maximizer over the policy family as `gamma`
/// grows and compares it with the average-reward maximizer. Ties go to the
/// lowest policy id.
pub fn maximizer_track<T: Scalar>(
    p: &Pomdp<T>,
    mu: &Distribution<T>,
    policies: &[Policy<T>],
    gammas: &[T],
) -> Result<MaximizerTrack<T>> {
    let sweep = gamma_convergence_sweep(p, mu, policies, gammas)?;
    Ok(track_from_sweep(&sweep))
}

pub fn track_from_sweep<T: Scalar>(sweep: &GammaSweep<T>) -> MaximizerTrack<T> {
    let by_id = |id: usize| {
        sweep
            .rows
            .iter()
            .find(|r| r.policy_id == id)
            .expect("argmax id comes from the rows")
    };
    let rows = sweep
        .argmax()
        .into_iter()
        .zip(&sweep.gammas)
        .map(|((id, value), &gamma)| TrackRow {
            gamma,
            argmax_id: id,
            discounted_value: value,
            average_at_argmax: by_id(id).average,
        })
        .collect();
    let (average_argmax, average_max) = sweep.average_argmax();
    MaximizerTrack {
        rows,
        average_argmax,
        average_max,
        excluded: sweep.excluded.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fix_a, fix_a_policy};
    use crate::linalg::Matrix;
    use crate::pomdp::support_size;

    #[test]
    fn builtin_structure() {
        let ex = builtin_example::<f64>();
        let p = &ex.pomdp;
        assert_eq!((p.n_world(), p.n_sensor(), p.n_action()), (4, 3, 3));
        assert_eq!(p.sensor_support(2).unwrap(), vec![2, 3]);
        assert_eq!(p.sensor_support(0).unwrap(), vec![0]);
        assert_eq!(p.sensor_support(1).unwrap(), vec![1]);
        for w in [0, 1] {
            for a in 1..3 {
                assert_eq!(p.alpha(w, a), p.alpha(w, 0));
                assert_eq!(p.reward()[(w, a)], p.reward()[(w, 0)]);
            }
        }
        assert!(p.reward().as_slice().iter().all(|r| r.abs() <= 1.0));
        for w in 0..4 {
            for a in 0..3 {
                assert!(p.alpha(w, a).iter().all(|&x| x > 0.0));
            }
        }
        let best = |w: usize| {
            (0..3)
                .max_by(|&a, &b| p.reward()[(w, a)].total_cmp(&p.reward()[(w, b)]))
                .unwrap()
        };
        assert_ne!(best(2), best(3));
    }

    #[test]
    fn builtin_effective_rows_follow_sensors() {
        let ex = builtin_example::<f64>();
        let pi = Policy::from_rows(&[
            vec![0.1, 0.2, 0.7],
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.3, 0.7],
        ])
        .unwrap();
        let eff = ex.pomdp.effective_policy(&pi).unwrap();
        assert_eq!(eff.row(0), pi.row(0));
        assert_eq!(eff.row(1), pi.row(1));
        assert_eq!(eff.row(2), pi.row(2));
        assert_eq!(eff.row(3), pi.row(2));
    }

    #[test]
    fn builtin_grid_argmax_has_two_actions_somewhere() {
        let ex = builtin_example::<f64>();
        let fixed = Policy::uniform(3, 3);
        let found = [0.3, 0.5, 0.6, 0.7, 0.9].iter().any(|&g| {
            let t =
                reward_surface(&ex.pomdp, &ex.mu, 2, &fixed, 40, EvalMode::Discounted(g)).unwrap();
            support_size(&t.argmax().point) == 2
        });
        assert!(found);
    }

    #[test]
    fn surface_sizes_and_constant_reward() {
        let ex = builtin_example::<f64>();
        let fixed = Policy::uniform(3, 3);
        let t =
            reward_surface(&ex.pomdp, &ex.mu, 2, &fixed, 40, EvalMode::Discounted(0.6)).unwrap();
        assert_eq!(t.rows.len(), 861);
        assert!(t.rows.iter().enumerate().all(|(i, r)| r.idx == i));

        let c = 0.3;
        let p = ex
            .pomdp
            .with_reward(Matrix::from_fn(4, 3, |_, _| c))
            .unwrap();
        for mode in [EvalMode::Discounted(0.9), EvalMode::Average] {
            let t = reward_surface(&p, &ex.mu, 2, &fixed, 5, mode).unwrap();
            assert!(t
                .rows
                .iter()
                .all(|r| (r.value - c).abs() < 1e-12 && !r.flagged));
        }
    }

    #[test]
    fn surfaces_approach_average_as_gamma_grows() {
        let ex = builtin_example::<f64>();
        let fixed = Policy::uniform(3, 3);
        let surf = |mode| reward_surface(&ex.pomdp, &ex.mu, 2, &fixed, 20, mode).unwrap();
        let avg = surf(EvalMode::Average);
        let diff = |g: f64| {
            surf(EvalMode::Discounted(g))
                .rows
                .iter()
                .zip(&avg.rows)
                .map(|(a, b)| (a.value - b.value).abs())
                .fold(0.0, f64::max)
        };
        assert!(diff(0.9) < diff(0.6));
    }

    #[test]
    fn average_mode_flags_reducible_chains() {
        let p = fix_a::<f64>();
        let t = reward_surface(
            &p,
            &Distribution::uniform(2),
            0,
            &fix_a_policy(0.5),
            2,
            EvalMode::Average,
        )
        .unwrap();
        let flags: Vec<bool> = t.rows.iter().map(|r| r.flagged).collect();
        assert_eq!(flags, vec![true, false, true]);
        // Deterministic rows absorb: (0,1) stays in state 1, (1,0) in state 0.
        assert_eq!(t.rows[0].value, 1.0);
        assert_eq!(t.rows[2].value, 0.0);
    }

    #[test]
    fn fix_a_single_policy_gaps_shrink() {
        let p = fix_a::<f64>();
        let mu = Distribution::point(2, 0);
        let sweep =
            gamma_convergence_sweep(&p, &mu, &[fix_a_policy(0.5)], &[0.9, 0.99, 0.999]).unwrap();
        assert!(sweep.sup_gap.windows(2).all(|w| w[1] < w[0]));
        // R = 0.5; R^gamma from state 0 is gamma / 2.
        for (g, gap) in sweep.gammas.iter().zip(&sweep.sup_gap) {
            assert!((gap - (0.5 - g / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_reward_has_no_gap() {
        let ex = builtin_example::<f64>();
        let p = ex
            .pomdp
            .with_reward(Matrix::from_fn(4, 3, |_, _| -0.4))
            .unwrap();
        let grid = SimplexGrid::new(3, 4).unwrap();
        let pols = sensor_grid_policies(&Policy::uniform(3, 3), 2, &grid).unwrap();
        let sweep = gamma_convergence_sweep(&p, &ex.mu, &pols, &[0.6, 0.9]).unwrap();
        assert!(sweep.sup_gap.iter().all(|&g| g < 1e-12));
        let track = track_from_sweep(&sweep);
        assert!(track.rows.iter().all(|r| r.argmax_id == 0));
        assert_eq!(track.average_argmax, 0);
    }

    #[test]
    fn fix_a_maximizer_is_always_q_one() {
        let p = fix_a::<f64>();
        let mu = Distribution::uniform(2);
        // q = 0 and q = 1 absorb, so use the interior of the grid plus q = 1
        // checked separately through the average of the Cesaro limit.
        let pols: Vec<Policy<f64>> = (1..10).map(|i| fix_a_policy(i as f64 / 10.0)).collect();
        let track = maximizer_track(&p, &mu, &pols, &[0.5, 0.9, 0.99]).unwrap();
        assert!(track.rows.iter().all(|r| r.argmax_id == 8));
        assert_eq!(track.average_argmax, 8);

        let all: Vec<Policy<f64>> = (0..=10).map(|i| fix_a_policy(i as f64 / 10.0)).collect();
        let sweep = gamma_convergence_sweep(&p, &mu, &all, &[0.9]).unwrap();
        assert_eq!(sweep.excluded, vec![0, 10]);
        for g in [0.5, 0.9, 0.99] {
            let vals: Vec<f64> = all
                .iter()
                .map(|pi| evaluate(&p, &mu, pi, EvalMode::Discounted(g)).unwrap().0)
                .collect();
            let best = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
            assert_eq!(best, 10);
        }
        let avg: Vec<f64> = all
            .iter()
            .map(|pi| evaluate(&p, &mu, pi, EvalMode::Average).unwrap().0)
            .collect();
        assert_eq!(avg[10], 1.0);
    }

    #[test]
    fn gamma_list_validation() {
        let p = fix_a::<f64>();
        let mu = Distribution::uniform(2);
        let pols = [fix_a_policy(0.5)];
        assert!(gamma_convergence_sweep(&p, &mu, &pols, &[0.9, 0.6]).is_err());
        assert!(gamma_convergence_sweep(&p, &mu, &pols, &[1.0]).is_err());
        assert!(gamma_convergence_sweep(&p, &mu, &pols, &[]).is_err());
    }
}
