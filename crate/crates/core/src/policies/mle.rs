//! Regularized Bradley–Terry maximum likelihood over the comparison ledger.
//!
//! The reference entry is pinned to zero, so the fit works in the reduced
//! coordinates of every other entry. The objective is strictly concave, and
//! Newton steps with backtracking never decrease it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::preference::{ComparisonLedger, Entry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub reg: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            reg: 1e-3,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleRewardFit {
    /// Fitted reward of every entry, by global index.
    pub r_hat: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Regularized log-likelihood of `r` (global index).
pub fn log_likelihood(ledger: &ComparisonLedger, r: &[f64], reg: f64) -> f64 {
    let data: f64 = ledger
        .observed_pairs()
        .map(|(i, j, c, w)| {
            let d = r[i] - r[j];
            w as f64 * log_sigmoid(d) + (c - w) as f64 * log_sigmoid(-d)
        })
        .sum();
    data - reg * r.iter().map(|x| x * x).sum::<f64>()
}

/// Gradient of [`log_likelihood`] with respect to every entry of `r`.
pub fn gradient(ledger: &ComparisonLedger, r: &[f64], reg: f64) -> Vec<f64> {
    let mut g: Vec<f64> = r.iter().map(|x| -2.0 * reg * x).collect();
    for (i, j, c, w) in ledger.observed_pairs() {
        let resid = w as f64 - c as f64 * sigmoid(r[i] - r[j]);
        g[i] += resid;
        g[j] -= resid;
    }
    g
}

fn hessian(ledger: &ComparisonLedger, r: &[f64], reg: f64) -> DMatrix<f64> {
    let m = r.len();
    let mut h = DMatrix::from_diagonal_element(m, m, -2.0 * reg);
    for (i, j, c, _) in ledger.observed_pairs() {
        let p = sigmoid(r[i] - r[j]);
        let v = c as f64 * p * (1.0 - p);
        h[(i, i)] -= v;
        h[(j, j)] -= v;
        h[(i, j)] += v;
        h[(j, i)] += v;
    }
    h
}

/// Fits rewards with the reference entry fixed at zero. Starts from `warm`
/// when given (its reference entry is ignored).
pub fn mle_fit_rewards(
    ledger: &ComparisonLedger,
    reference: Entry,
    cfg: &MleConfig,
    warm: Option<&[f64]>,
) -> MleRewardFit {
    let m = ledger.n_entries();
    let r_idx = ledger.global(reference);
    let free: Vec<usize> = (0..m).filter(|&g| g != r_idx).collect();

    let mut r = match warm {
        Some(w) if w.len() == m => w.to_vec(),
        _ => vec![0.0; m],
    };
    r[r_idx] = 0.0;
    let mut ll = log_likelihood(ledger, &r, cfg.reg);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let g_full = gradient(ledger, &r, cfg.reg);
        let g = DVector::from_iterator(free.len(), free.iter().map(|&k| g_full[k]));
        if g.norm() <= cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let h_full = hessian(ledger, &r, cfg.reg);
        let neg_h = DMatrix::from_fn(free.len(), free.len(), |a, b| -h_full[(free[a], free[b])]);
        let step = match neg_h.cholesky() {
            Some(chol) => chol.solve(&g),
            None => g.clone(),
        };

        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let mut cand = r.clone();
            for (a, &k) in free.iter().enumerate() {
                cand[k] += t * step[a];
            }
            let cand_ll = log_likelihood(ledger, &cand, cfg.reg);
            if cand_ll >= ll {
                r = cand;
                ll = cand_ll;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if !converged {
        let g_full = gradient(ledger, &r, cfg.reg);
        converged = free
            .iter()
            .map(|&k| g_full[k] * g_full[k])
            .sum::<f64>()
            .sqrt()
            <= cfg.tol;
    }
    MleRewardFit {
        r_hat: r,
        log_likelihood: ll,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_fits_zero() {
        let ledger = ComparisonLedger::new(2, 2);
        let fit = mle_fit_rewards(&ledger, (0, 0), &MleConfig::default(), None);
        assert!(fit.converged);
        assert!(fit.r_hat.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn stable_logistic_helpers() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!(log_sigmoid(800.0) <= 0.0);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn winner_gets_larger_reward() {
        let mut ledger = ComparisonLedger::new(3, 1);
        for k in 0..40 {
            ledger.record_duel((1, 0), (0, 0), k % 4 != 0).unwrap();
            ledger.record_duel((2, 0), (0, 0), k % 4 == 0).unwrap();
        }
        let fit = mle_fit_rewards(&ledger, (0, 0), &MleConfig::default(), None);
        assert!(fit.converged);
        assert_eq!(fit.r_hat[0], 0.0);
        assert!(fit.r_hat[1] > 0.9 && fit.r_hat[2] < -0.9);
    }
}
