use proptest::prelude::*;
use rand::Rng;

use pomdp_lab::fixtures::{
    fix_a, fix_a_policy, random_interior_policy, random_policy, random_pomdp, random_pomdp_sized,
    random_simplex_point, rng, RandomSpec,
};
use pomdp_lab::pomdp::{grid_count, support_size};
use pomdp_lab::stationary::eigenvalue_moduli;
use pomdp_lab::{
    analyze_chain, average_reward, face_reduce, improve_policy, simplex_grid, solve_value,
    spectral_analysis, Distribution, Policy,
};

fn dense() -> RandomSpec {
    RandomSpec {
        alpha_sparsity: 0.0,
        ..RandomSpec::default()
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derived_kernels_are_row_stochastic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_pomdp::<f64, _>(&mut r, RandomSpec::default());
        let pi = random_policy(&mut r, p.n_sensor(), p.n_action());
        let eff = p.effective_policy(&pi).unwrap();
        for s in eff.0.row_sums().into_iter().chain(p.world_transition(&pi).unwrap().row_sums()) {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        prop_assert!(eff.0.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn grid_size_matches_binomial(dim in 1usize..6, m in 1usize..12) {
        let g = simplex_grid::<f64>(dim, m).unwrap();
        let expected = binomial((m + dim - 1) as u64, (dim - 1) as u64);
        prop_assert_eq!(g.len() as u64, expected);
        prop_assert_eq!(grid_count(dim, m), expected as u128);
        for q in g.points() {
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn face_reduction_stays_in_the_cone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let na = r.random_range(1..=6);
        let k = r.random_range(1..=na + 1);
        let forms: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..na).map(|_| r.random_range(-1.0..=1.0)).collect())
            .collect();
        let base: Vec<f64> = random_simplex_point(&mut r, na);
        let q = face_reduce(&forms, &base).unwrap();
        prop_assert!(support_size(&q) <= k);
        for f in &forms {
            let gain: f64 = f.iter().zip(&q).zip(&base).map(|((c, x), b)| c * (x - b)).sum();
            prop_assert!(gain >= -1e-12);
        }
    }

    #[test]
    fn improvement_never_lowers_values(seed in any::<u64>(), gamma in 0.0f64..0.99) {
        let mut r = rng(seed);
        let p = random_pomdp::<f64, _>(&mut r, RandomSpec::default());
        let pi = random_policy(&mut r, p.n_sensor(), p.n_action());
        let res = improve_policy(&p, &pi, gamma).unwrap();
        for (new, old) in res.values_after.iter().zip(&res.values_before) {
            prop_assert!(*new >= old - 1e-9);
        }
        for (size, bound) in res.support_sizes.iter().zip(&res.support_bounds) {
            prop_assert!(*size <= (*bound).max(1));
        }
    }

    #[test]
    fn average_reward_ignores_start_distribution(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_pomdp::<f64, _>(&mut r, dense());
        let pi = random_policy(&mut r, p.n_sensor(), p.n_action());
        prop_assume!(analyze_chain(&p.world_transition(&pi).unwrap()).satisfies_star);
        let mu1 = Distribution::new(random_simplex_point(&mut r, p.n_world())).unwrap();
        let mu2 = Distribution::new(random_simplex_point(&mut r, p.n_world())).unwrap();
        let a = average_reward(&p, &pi, &mu1).unwrap();
        let b = average_reward(&p, &pi, &mu2).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn average_reward_is_continuous(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_pomdp::<f64, _>(&mut r, dense());
        let pi = random_interior_policy(&mut r, p.n_sensor(), p.n_action(), 0.01);
        let mu = Distribution::uniform(p.n_world());
        let base = average_reward(&p, &pi, &mu).unwrap();
        // Move 1e-6 of mass between two actions in every row.
        let rows: Vec<Vec<f64>> = pi
            .to_rows()
            .into_iter()
            .map(|mut row| {
                if row.len() > 1 {
                    let (i, j) = (r.random_range(0..row.len()), r.random_range(0..row.len()));
                    row[i] += 5e-7;
                    row[j] -= 5e-7;
                }
                row
            })
            .collect();
        let moved = average_reward(&p, &Policy::from_rows(&rows).unwrap(), &mu).unwrap();
        prop_assert!((moved - base).abs() <= 1e3 * 1e-6 * p.n_sensor() as f64);
    }

    #[test]
    fn discounted_reward_is_continuous(seed in any::<u64>(), gamma in 0.0f64..0.95) {
        let mut r = rng(seed);
        let p = random_pomdp::<f64, _>(&mut r, RandomSpec::default());
        let pi = random_interior_policy(&mut r, p.n_sensor(), p.n_action(), 0.01);
        let other = random_policy::<f64, _>(&mut r, p.n_sensor(), p.n_action());
        let mix: Vec<Vec<f64>> = pi
            .to_rows()
            .iter()
            .zip(other.to_rows())
            .map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x + 1e-7 * (y - x)).collect())
            .collect();
        let v = solve_value(&p, &pi, gamma).unwrap().values;
        let w = solve_value(&p, &Policy::from_rows(&mix).unwrap(), gamma).unwrap().values;
        let lipschitz = 2.0 / ((1.0 - gamma) * (1.0 - gamma));
        for (a, b) in v.iter().zip(&w) {
            prop_assert!((a - b).abs() <= lipschitz * 2e-7 * p.n_sensor() as f64 + 1e-12);
        }
    }
}

#[test]
fn decay_rate_is_bounded_by_second_eigenvalue() {
    let mut r = rng(77);
    let mut checked = 0;
    while checked < 50 {
        let p = random_pomdp_sized::<f64, _>(&mut r, 4, 2, 2, RandomSpec::default());
        let pi = random_policy(&mut r, 2, 2);
        let t = p.world_transition(&pi).unwrap();
        if !analyze_chain(&t).satisfies_star {
            continue;
        }
        let mu = Distribution::point(4, 0);
        let rep = spectral_analysis(&t, &mu, 60).unwrap();
        assert!(rep.lambda2_abs < 1.0);
        assert!(rep.decay_fit <= rep.lambda2_abs + 0.05, "{rep:?}");
        checked += 1;
    }
}

#[test]
fn rank_one_chain_has_no_second_eigenvalue() {
    let p = fix_a::<f64>();
    let t = p.world_transition(&fix_a_policy(0.5)).unwrap();
    let moduli = eigenvalue_moduli(&t).unwrap();
    assert!((moduli[0] - 1.0).abs() < 1e-12 && moduli[1] < 1e-12);
}

#[test]
fn single_precision_matches_double() {
    let p32 = fix_a::<f32>();
    let v = solve_value(&p32, &fix_a_policy::<f32>(0.5), 0.9)
        .unwrap()
        .values;
    assert!((v[0] - 4.5).abs() < 1e-4 && (v[1] - 5.5).abs() < 1e-4);

    let mut r = rng(9);
    let p = random_pomdp::<f32, _>(&mut r, RandomSpec::default());
    let pi = random_policy::<f32, _>(&mut r, p.n_sensor(), p.n_action());
    let res = improve_policy(&p, &pi, 0.8).unwrap();
    for (size, bound) in res.support_sizes.iter().zip(&res.support_bounds) {
        assert!(*size <= (*bound).max(1));
    }
}
