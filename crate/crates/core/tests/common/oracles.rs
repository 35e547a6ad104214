//! Oracles for the planner checks: stationary distributions by direct linear
//! solve and random feasible occupancy measures built from them.

use nalgebra::{DMatrix, DVector};
use prefbandit::planner::{sa_index, sas_index, KernelBall};
use prefbandit::transitions::KernelEstimate;
use rand::Rng;

/// Stationary distribution of a row-stochastic matrix with a single
/// recurrent class.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    // (P^T - I) d = 0 with the last equation replaced by sum(d) = 1
    let mut a = DMatrix::from_fn(n, n, |i, j| p[j][i] - if i == j { 1.0 } else { 0.0 });
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let d = a.lu().solve(&b).expect("irreducible chain");
    d.iter().copied().collect()
}

/// Kernel of the Markov chain induced by activation probabilities `p_act`.
pub fn induced_chain(k: &KernelEstimate, p_act: &[f64]) -> Vec<Vec<f64>> {
    let n = p_act.len();
    (0..n)
        .map(|s| {
            (0..n)
                .map(|t| (1.0 - p_act[s]) * k[0][s][t] + p_act[s] * k[1][s][t])
                .collect()
        })
        .collect()
}

/// Random stationary randomized policy per arm, rejected until its expected
/// activations fit the budget. Returns `mu` in exact-LP layout.
pub fn random_occupancy<R: Rng>(
    rng: &mut R,
    kernels: &[KernelEstimate],
    budget: usize,
) -> Vec<f64> {
    let n_arms = kernels.len();
    let n_states = kernels[0][0].len();
    let cap = (2.0 * budget as f64 / n_arms as f64).min(1.0);
    loop {
        let mut x = vec![0.0; n_arms * n_states * 2];
        let mut active = 0.0;
        for (n, k) in kernels.iter().enumerate() {
            let p: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() * cap).collect();
            let d = stationary(&induced_chain(k, &p));
            for s in 0..n_states {
                x[sa_index(n_states, n, s, 0)] = d[s] * (1.0 - p[s]);
                x[sa_index(n_states, n, s, 1)] = d[s] * p[s];
                active += d[s] * p[s];
            }
        }
        if active <= budget as f64 {
            return x;
        }
    }
}

/// Random kernel inside the ball (convex mix towards a random kernel, step
/// bounded by the row's width), then a random occupancy on it, in
/// extended-LP layout.
pub fn random_elp_point<R: Rng>(rng: &mut R, ball: &KernelBall, budget: usize) -> Vec<f64> {
    let n_arms = ball.center.len();
    let n_states = ball.center[0][0].len();
    let kernels: Vec<KernelEstimate> = (0..n_arms)
        .map(|n| {
            [0, 1].map(|a| {
                (0..n_states)
                    .map(|s| {
                        let mut r: Vec<f64> =
                            (0..n_states).map(|_| rng.gen::<f64>() + 1e-3).collect();
                        let z: f64 = r.iter().sum();
                        r.iter_mut().for_each(|v| *v /= z);
                        let lam = ball.width[n][a][s].min(1.0) * rng.gen::<f64>();
                        (0..n_states)
                            .map(|t| (1.0 - lam) * ball.center[n][a][s][t] + lam * r[t])
                            .collect()
                    })
                    .collect()
            })
        })
        .collect();
    let mu = random_occupancy(rng, &kernels, budget);
    let mut w = vec![0.0; n_arms * n_states * 2 * n_states];
    for n in 0..n_arms {
        for s in 0..n_states {
            for a in 0..2 {
                for t in 0..n_states {
                    w[sas_index(n_states, n, s, a, t)] =
                        mu[sa_index(n_states, n, s, a)] * kernels[n][a][s][t];
                }
            }
        }
    }
    w
}
