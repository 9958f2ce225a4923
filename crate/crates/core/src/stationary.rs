//! Average-reward machinery: chain structure, stationary distributions and
//! spectral mixing diagnostics.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{dist_inf, dot, Lu, Matrix};
use crate::pomdp::{Distribution, Policy, Pomdp};
use crate::scalar::Scalar;
use crate::tolerance::{
    CESARO_CAP, CESARO_STEP, DECAY_NOISE_FLOOR, STATIONARY_RESIDUAL, SUPPORT_THRESHOLD,
};
use crate::value::scaled_tol;

/// Communication structure of a finite Markov chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainReport {
    pub irreducible: bool,
    /// Least common multiple of the periods of the closed classes.
    pub period: usize,
    pub aperiodic: bool,
    /// Irreducible and aperiodic.
    pub satisfies_star: bool,
    /// Closed communicating classes, each sorted, ordered by smallest member.
    pub closed_classes: Vec<Vec<usize>>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn successors<T: Scalar>(t: &Matrix<T>) -> Vec<Vec<usize>> {
    let tau = T::lit(SUPPORT_THRESHOLD);
    (0..t.rows())
        .map(|u| (0..t.cols()).filter(|&v| t[(u, v)] > tau).collect())
        .collect()
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Period of a strongly connected class: gcd over in-class edges `u -> v`
/// of `level(u) + 1 - level(v)`, with BFS levels from the smallest member.
fn class_period(adj: &[Vec<usize>], class: &[usize]) -> usize {
    let n = adj.len();
    let mut in_class = vec![false; n];
    for &c in class {
        in_class[c] = true;
    }
    let mut level = vec![usize::MAX; n];
    level[class[0]] = 0;
    let mut queue = VecDeque::from([class[0]]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in adj[u].iter().filter(|&&v| in_class[v]) {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g.max(1)
}

/// Irreducibility and period from the directed graph of entries above the
/// support threshold.
pub fn analyze_chain<T: Scalar>(t: &Matrix<T>) -> ChainReport {
    let n = t.rows();
    let adj = successors(t);
    let reach: Vec<Vec<bool>> = (0..n).map(|u| reachable(&adj, u)).collect();

    let mut assigned = vec![false; n];
    let mut closed_classes = Vec::new();
    for u in 0..n {
        if assigned[u] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&v| reach[u][v] && reach[v][u]).collect();
        for &v in &class {
            assigned[v] = true;
        }
        let closed = class.iter().all(|&v| adj[v].iter().all(|&x| reach[x][u]));
        if closed {
            closed_classes.push(class);
        }
    }

    let irreducible = n > 0 && (0..n).all(|v| reach[0][v] && reach[v][0]);
    let period = closed_classes
        .iter()
        .map(|c| class_period(&adj, c))
        .fold(1usize, |l, p| l / gcd(l, p) * p);
    ChainReport {
        irreducible,
        period,
        aperiodic: period == 1,
        satisfies_star: irreducible && period == 1,
        closed_classes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryMethod {
    LinearSolve,
    Cesaro,
}

impl StationaryMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            StationaryMethod::LinearSolve => "linear_solve",
            StationaryMethod::Cesaro => "cesaro",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult<T> {
    pub dist: Distribution<T>,
    pub method: StationaryMethod,
    /// `||p T - p||_inf`
    pub residual: T,
}

/// The limit of time-averaged state distributions started from `mu`.
///
/// Irreducible chains are solved directly from `pT = p, sum p = 1`, and `mu`
/// is ignored. Otherwise the distribution is propagated exactly and averaged
/// over windows of one period until successive averages agree to `1e-12`.
pub fn stationary_distribution<T: Scalar>(
    t: &Matrix<T>,
    mu: &Distribution<T>,
) -> Result<StationaryResult<T>> {
    stationary_with_report(t, mu, &analyze_chain(t))
}

pub(crate) fn stationary_with_report<T: Scalar>(
    t: &Matrix<T>,
    mu: &Distribution<T>,
    report: &ChainReport,
) -> Result<StationaryResult<T>> {
    let n = t.rows();
    if mu.len() != n {
        return Err(Error::dim("initial distribution", n, mu.len()));
    }
    if report.irreducible {
        let mut a = Matrix::from_fn(n, n, |r, c| {
            let id = if r == c { T::one() } else { T::zero() };
            id - t[(c, r)]
        });
        a.row_mut(n - 1).fill(T::one());
        let mut rhs = vec![T::zero(); n];
        rhs[n - 1] = T::one();
        let mut p = Lu::new(&a, "stationary solve")?.solve(&rhs);
        for x in p.iter_mut() {
            *x = x.max(T::zero());
        }
        let total: T = p.iter().copied().sum();
        for x in p.iter_mut() {
            *x /= total;
        }
        let residual = dist_inf(&t.vec_mul(&p), &p);
        let tol = scaled_tol(STATIONARY_RESIDUAL, T::one());
        if !(residual <= tol) {
            return Err(Error::Contract {
                what: "stationary solve",
                detail: format!("residual {residual} exceeds {tol}"),
            });
        }
        return Ok(StationaryResult {
            dist: Distribution::from_trusted(p),
            method: StationaryMethod::LinearSolve,
            residual,
        });
    }

    let avg = cesaro(t, mu.probs(), report.period)?;
    let residual = dist_inf(&t.vec_mul(&avg), &avg);
    Ok(StationaryResult {
        dist: Distribution::from_trusted(avg),
        method: StationaryMethod::Cesaro,
        residual,
    })
}

fn cesaro<T: Scalar>(t: &Matrix<T>, mu: &[T], period: usize) -> Result<Vec<T>> {
    let d = T::count(period);
    let mut window: VecDeque<Vec<T>> = VecDeque::with_capacity(period);
    window.push_back(mu.to_vec());
    while window.len() < period {
        let next = t.vec_mul(window.back().expect("non-empty"));
        window.push_back(next);
    }
    let mut avg: Vec<T> = (0..mu.len())
        .map(|w| window.iter().map(|v| v[w]).sum::<T>() / d)
        .collect();
    let stop = T::tol(CESARO_STEP);
    for _ in 0..CESARO_CAP {
        let next = t.vec_mul(window.back().expect("non-empty"));
        let oldest = window.pop_front().expect("non-empty");
        let mut change = T::zero();
        for (w, a) in avg.iter_mut().enumerate() {
            let delta = (next[w] - oldest[w]) / d;
            *a += delta;
            change = change.max(delta.abs());
        }
        window.push_back(next);
        if change < stop {
            return Ok(avg);
        }
    }
    Err(Error::CesaroCap { cap: CESARO_CAP })
}

/// Long-run average reward `sum_w p(w) sum_a p^pi(a|w) R(w,a)`.
pub fn average_reward<T: Scalar>(p: &Pomdp<T>, pi: &Policy<T>, mu: &Distribution<T>) -> Result<T> {
    Ok(average_reward_report(p, pi, mu)?.0)
}

/// Average reward together with the chain report and stationary result.
pub fn average_reward_report<T: Scalar>(
    p: &Pomdp<T>,
    pi: &Policy<T>,
    mu: &Distribution<T>,
) -> Result<(T, ChainReport, StationaryResult<T>)> {
    p.check_distribution(mu)?;
    let t = p.world_transition(pi)?;
    let r = p.mean_reward(pi)?;
    let report = analyze_chain(&t);
    let stat = stationary_with_report(&t, mu, &report)?;
    Ok((dot(stat.dist.probs(), &r), report, stat))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    /// Second largest eigenvalue modulus.
    pub lambda2_abs: f64,
    /// Fitted geometric rate of `||mu_t - p||_inf`.
    pub decay_fit: f64,
}

/// Eigenvalue moduli of `t` in descending order.
pub fn eigenvalue_moduli<T: Scalar>(t: &Matrix<T>) -> Result<Vec<f64>> {
    let n = t.rows();
    let data: Vec<f64> = t.as_slice().iter().map(|x| x.as_f64()).collect();
    let m = nalgebra::DMatrix::from_row_slice(n, n, &data);
    let schur =
        nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100_000).ok_or(Error::Contract {
            what: "eigenvalues",
            detail: "Schur decomposition did not converge".into(),
        })?;
    let mut moduli: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli)
}

/// `|lambda_2|` and the empirical decay rate of `||mu_t - p||_inf`, fitted by
/// least squares on `log` errors over `t in [horizon/2, horizon]`.
///
/// Errors below the round-off floor are dropped from the fit; with fewer
/// than two points left the rate is reported as 0.
pub fn spectral_analysis<T: Scalar>(
    t: &Matrix<T>,
    mu: &Distribution<T>,
    horizon: usize,
) -> Result<SpectralReport> {
    let report = analyze_chain(t);
    if !report.satisfies_star {
        return Err(Error::StarViolation(format!(
            "irreducible={}, period={}",
            report.irreducible, report.period
        )));
    }
    let moduli = eigenvalue_moduli(t)?;
    let lambda2_abs = moduli.get(1).copied().unwrap_or(0.0).min(1.0);

    let stat = stationary_with_report(t, mu, &report)?;
    let mut dist = mu.probs().to_vec();
    let mut samples = Vec::new();
    for step in 0..=horizon {
        if step >= horizon / 2 {
            let e = dist_inf(&dist, stat.dist.probs()).as_f64();
            if e > DECAY_NOISE_FLOOR {
                samples.push((step as f64, e.ln()));
            }
        }
        dist = t.vec_mul(&dist);
    }
    let decay_fit = if samples.len() < 2 {
        0.0
    } else {
        let k = samples.len() as f64;
        let mx = samples.iter().map(|s| s.0).sum::<f64>() / k;
        let my = samples.iter().map(|s| s.1).sum::<f64>() / k;
        let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
        let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    };
    Ok(SpectralReport {
        lambda2_abs,
        decay_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, fix_a, fix_a_policy};
    use rand::Rng;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_is_reducible() {
        let r = analyze_chain(&Matrix::<f64>::identity(2));
        assert!(!r.irreducible);
        assert_eq!(r.closed_classes, vec![vec![0], vec![1]]);
        assert!(r.aperiodic);
    }

    #[test]
    fn two_cycle_has_period_two() {
        let r = analyze_chain(&m(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert!(r.irreducible);
        assert_eq!(r.period, 2);
        assert!(!r.satisfies_star);
    }

    #[test]
    fn fix_a_half_satisfies_star() {
        let t = fix_a::<f64>().world_transition(&fix_a_policy(0.5)).unwrap();
        let r = analyze_chain(&t);
        assert!(r.irreducible && r.period == 1 && r.satisfies_star);
    }

    #[test]
    fn period_three_with_transient_state() {
        let t = m(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.5, 0.0, 0.0, 0.5],
        ]);
        let r = analyze_chain(&t);
        assert!(!r.irreducible);
        assert_eq!(r.period, 3);
        assert_eq!(r.closed_classes, vec![vec![0, 1, 2]]);
        let s = stationary_distribution(&t, &Distribution::point(4, 3)).unwrap();
        assert_eq!(s.method, StationaryMethod::Cesaro);
        for (x, y) in s
            .dist
            .probs()
            .iter()
            .zip([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0])
        {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_preserves_mu() {
        let mu = Distribution::new(vec![0.3, 0.7]).unwrap();
        let s = stationary_distribution(&Matrix::identity(2), &mu).unwrap();
        assert_eq!(s.method, StationaryMethod::Cesaro);
        assert_eq!(s.dist.probs(), &[0.3, 0.7]);
    }

    #[test]
    fn two_cycle_averages_to_half() {
        let s =
            stationary_distribution(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &Distribution::point(2, 0))
                .unwrap();
        assert_eq!(s.method, StationaryMethod::LinearSolve);
        assert!(dist_inf(s.dist.probs(), &[0.5, 0.5]) < 1e-15);
    }

    #[test]
    fn fix_a_stationary_matches_power_iteration() {
        let p = fix_a::<f64>();
        for q in [0.1, 0.5, 0.8] {
            let t = p.world_transition(&fix_a_policy(q)).unwrap();
            let mut x = vec![1.0, 0.0];
            loop {
                let y = t.vec_mul(&x);
                let done = dist_inf(&x, &y) < 1e-14;
                x = y;
                if done {
                    break;
                }
            }
            let s = stationary_distribution(&t, &Distribution::uniform(2)).unwrap();
            assert!(dist_inf(s.dist.probs(), &x) < 1e-12);
            assert!(dist_inf(s.dist.probs(), &[1.0 - q, q]) < 1e-12);
            assert!(s.residual <= 1e-10);
        }
    }

    #[test]
    fn fix_a_average_rewards() {
        let p = fix_a::<f64>();
        let mu = Distribution::uniform(2);
        assert!((average_reward(&p, &fix_a_policy(0.3), &mu).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(average_reward(&p, &fix_a_policy(0.0), &mu).unwrap(), 0.0);
    }

    #[test]
    fn constant_reward_average() {
        let mut rng = fixtures::rng(11);
        let p = fixtures::random_pomdp::<f64, _>(&mut rng, Default::default());
        let p = p
            .with_reward(Matrix::from_fn(p.n_world(), p.n_action(), |_, _| -0.25))
            .unwrap();
        let pi = fixtures::random_policy(&mut rng, p.n_sensor(), p.n_action());
        let mu = Distribution::uniform(p.n_world());
        assert!((average_reward(&p, &pi, &mu).unwrap() + 0.25).abs() < 1e-10);
    }

    #[test]
    fn rank_one_chain_has_no_second_eigenvalue() {
        let t = fix_a::<f64>().world_transition(&fix_a_policy(0.5)).unwrap();
        let r = spectral_analysis(&t, &Distribution::point(2, 0), 20).unwrap();
        assert!(r.lambda2_abs < 1e-12);
        assert_eq!(r.decay_fit, 0.0);
    }

    #[test]
    fn spectral_requires_star() {
        let t = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(
            spectral_analysis(&t, &Distribution::point(2, 0), 10),
            Err(Error::StarViolation(_))
        ));
    }

    #[test]
    fn random_chains_decay_no_faster_than_spectrum_allows() {
        let mut rng = fixtures::rng(5);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| fixtures::random_simplex_point(&mut rng, 4))
                .collect();
            let t = Matrix::from_rows(&rows).unwrap();
            let mu = Distribution::point(4, rng.random_range(0..4));
            let r = spectral_analysis(&t, &mu, 40).unwrap();
            assert!(r.lambda2_abs < 1.0);
            assert!(r.decay_fit <= r.lambda2_abs + 0.05, "{r:?}");
        }
    }
}
