use prefbandit::policies::{gradient, log_likelihood, mle_fit_rewards, MleConfig};
use prefbandit::preference::ComparisonLedger;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_ledger(
    rng: &mut ChaCha8Rng,
    arms: usize,
    states: usize,
    duels: usize,
) -> ComparisonLedger {
    let mut ledger = ComparisonLedger::new(arms, states);
    while (ledger.total_duels() as usize) < duels {
        let i = (rng.gen_range(0..arms), rng.gen_range(0..states));
        let j = (rng.gen_range(0..arms), rng.gen_range(0..states));
        if i != j {
            ledger.record_duel(i, j, rng.gen_bool(0.6)).unwrap();
        }
    }
    ledger
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let ledger = random_ledger(&mut rng, 4, 3, 200);
        let reg = rng.gen_range(1e-4..1e-1);
        let r: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = gradient(&ledger, &r, reg);
        for k in 0..12 {
            let h = 1e-5;
            let mut up = r.clone();
            let mut dn = r.clone();
            up[k] += h;
            dn[k] -= h;
            let fd =
                (log_likelihood(&ledger, &up, reg) - log_likelihood(&ledger, &dn, reg)) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1.0),
                "entry {k}: {fd} vs {}",
                g[k]
            );
        }
    }
}

#[test]
fn symmetric_data_fits_zero() {
    let mut ledger = ComparisonLedger::new(3, 2);
    let entries: Vec<_> = (0..3).flat_map(|n| (0..2).map(move |s| (n, s))).collect();
    for (a, &i) in entries.iter().enumerate() {
        for &j in &entries[a + 1..] {
            for k in 0..10 {
                ledger.record_duel(i, j, k % 2 == 0).unwrap();
            }
        }
    }
    let fit = mle_fit_rewards(&ledger, (0, 0), &MleConfig::default(), None);
    assert!(fit.converged);
    assert!(fit.r_hat.iter().all(|r| r.abs() < 1e-9), "{:?}", fit.r_hat);
}

/// With one pair and all 100 wins to the free entry, stationarity reads
/// `100 (1 - sigmoid(x)) = 2 reg x`; solved here by bisection.
#[test]
fn one_sided_data_matches_scalar_stationarity() {
    let mut ledger = ComparisonLedger::new(2, 1);
    for _ in 0..100 {
        ledger.record_duel((1, 0), (0, 0), true).unwrap();
    }
    let reg = 1e-3;
    let f = |x: f64| 100.0 / (1.0 + x.exp()) - 2.0 * reg * x;
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let fit = mle_fit_rewards(
        &ledger,
        (0, 0),
        &MleConfig {
            reg,
            tol: 1e-10,
            max_iter: 200,
        },
        None,
    );
    assert!(fit.converged);
    assert!(fit.r_hat[1].is_finite() && fit.r_hat[1] > 5.0);
    assert!((fit.r_hat[1] - lo).abs() < 1e-6, "{} vs {lo}", fit.r_hat[1]);
}

#[test]
fn ascent_never_decreases_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ledger = random_ledger(&mut rng, 5, 3, 400);
    let mut last = f64::NEG_INFINITY;
    for iters in 0..8 {
        let cfg = MleConfig {
            reg: 1e-3,
            tol: 0.0,
            max_iter: iters,
        };
        let fit = mle_fit_rewards(&ledger, (2, 1), &cfg, None);
        assert_eq!(fit.r_hat[2 * 3 + 1], 0.0);
        assert!(fit.log_likelihood >= last - 1e-12);
        last = fit.log_likelihood;
    }
}

#[test]
fn recovers_bradley_terry_rewards() {
    let truth: [f64; 4] = [0.0, 0.4, 1.0, 0.7];
    let mut ledger = ComparisonLedger::new(4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40_000 {
        let i = rng.gen_range(0..4);
        let j = (i + rng.gen_range(1..4)) % 4;
        let p = 1.0 / (1.0 + (truth[j] - truth[i]).exp());
        ledger.record_duel((i, 0), (j, 0), rng.gen_bool(p)).unwrap();
    }
    let fit = mle_fit_rewards(&ledger, (0, 0), &MleConfig::default(), None);
    for (r, t) in fit.r_hat.iter().zip(truth) {
        assert!((r - t).abs() < 0.05, "{r} vs {t}");
    }
}
