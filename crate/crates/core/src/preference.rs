//! Online preference learning from dueling feedback.
//!
//! The learner keeps duel/win counts for pairs of `(arm, state)` entries,
//! estimates each entry's preference against a fixed reference entry either
//! directly or by inference through a pivot entry, adds an optimism bonus and
//! turns the result into a reward surrogate `q = logit(f)` in `[-1, 1]`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transitions::WidthParams;
use crate::world::{bt_lower, bt_upper, global_index};

/// Lipschitz constant of the inference map on the Bradley–Terry range.
pub const INFERENCE_LIPSCHITZ: f64 = 1.3;

/// `(arm, state)` pair.
pub type Entry = (usize, usize);

/// Upper-triangular duel and win counts over global `(arm, state)` indices.
///
/// Cell `(i, j)` with `i < j` holds the number of duels `C` and the number of
/// times `i` won `W`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonLedger {
    n_arms: usize,
    n_states: usize,
    duels: Vec<u64>,
    wins: Vec<u64>,
}

impl ComparisonLedger {
    pub fn new(n_arms: usize, n_states: usize) -> Self {
        let m = n_arms * n_states;
        let cells = m * m.saturating_sub(1) / 2;
        Self {
            n_arms,
            n_states,
            duels: vec![0; cells],
            wins: vec![0; cells],
        }
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of global entries `N |S|`.
    pub fn n_entries(&self) -> usize {
        self.n_arms * self.n_states
    }

    pub fn global(&self, (arm, state): Entry) -> usize {
        global_index(arm, state, self.n_states)
    }

    fn cell(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let m = self.n_entries();
        i * m - i * (i + 1) / 2 + (j - i - 1)
    }

    fn check(&self, (arm, state): Entry) -> Result<()> {
        if arm >= self.n_arms {
            return Err(Error::InvalidArm {
                arm,
                n_arms: self.n_arms,
            });
        }
        if state >= self.n_states {
            return Err(Error::InvalidState {
                state,
                n_states: self.n_states,
            });
        }
        Ok(())
    }

    /// Records one duel between `i` and `j`; `i_won` is the comparison bit
    /// `alpha(i over j)`.
    pub fn record_duel(&mut self, i: Entry, j: Entry, i_won: bool) -> Result<()> {
        self.check(i)?;
        self.check(j)?;
        let (gi, gj) = (self.global(i), self.global(j));
        if gi == gj {
            return Err(Error::Config(format!("self-duel of entry {i:?}")));
        }
        let (lo, lo_won) = if gi < gj {
            ((gi, gj), i_won)
        } else {
            ((gj, gi), !i_won)
        };
        let c = self.cell(lo.0, lo.1);
        self.duels[c] += 1;
        if lo_won {
            self.wins[c] += 1;
        }
        Ok(())
    }

    /// `(C, W)` for global indices, with `W` counting wins of `i` over `j`.
    pub fn counts_global(&self, i: usize, j: usize) -> (u64, u64) {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => (0, 0),
            std::cmp::Ordering::Less => {
                let c = self.cell(i, j);
                (self.duels[c], self.wins[c])
            }
            std::cmp::Ordering::Greater => {
                let c = self.cell(j, i);
                (self.duels[c], self.duels[c] - self.wins[c])
            }
        }
    }

    pub fn counts(&self, i: Entry, j: Entry) -> (u64, u64) {
        self.counts_global(self.global(i), self.global(j))
    }

    pub fn total_duels(&self) -> u64 {
        self.duels.iter().sum()
    }

    /// Iterates over every stored pair with at least one duel as
    /// `(i, j, C, W)` with `i < j`.
    pub fn observed_pairs(&self) -> impl Iterator<Item = (usize, usize, u64, u64)> + '_ {
        let m = self.n_entries();
        (0..m)
            .flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
            .filter_map(move |(i, j)| {
                let c = self.cell(i, j);
                (self.duels[c] > 0).then(|| (i, j, self.duels[c], self.wins[c]))
            })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::parse(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ledger: Self = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let m = ledger.n_entries();
        let cells = m * m.saturating_sub(1) / 2;
        if ledger.duels.len() != cells
            || ledger.wins.len() != cells
            || ledger.wins.iter().zip(&ledger.duels).any(|(w, c)| w > c)
        {
            return Err(Error::parse(path, "ledger counts are inconsistent"));
        }
        Ok(ledger)
    }
}

/// Picks a uniformly random pivot among `active` and pairs it with every
/// other member, giving `B - 1` duels.
pub fn schedule_duels<R: Rng + ?Sized>(rng: &mut R, active: &[usize]) -> Vec<(usize, usize)> {
    if active.len() < 2 {
        return Vec::new();
    }
    let p = rng.gen_range(0..active.len());
    let pivot = active[p];
    active
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != p)
        .map(|(_, &other)| (pivot, other))
        .collect()
}

/// Direct estimate of `F(i, j)` with its Hoeffding width; `(0.5, 1)` without
/// data.
pub fn empirical_preference(
    ledger: &ComparisonLedger,
    i: usize,
    j: usize,
    episode: usize,
    params: &WidthParams,
) -> (f64, f64) {
    let (c, w) = ledger.counts_global(i, j);
    if c == 0 {
        return (0.5, 1.0);
    }
    (w as f64 / c as f64, params.width(c, episode))
}

/// Infers `F(j1, j2)` from a common pivot row `F(j, j1)` and `F(j, j2)`.
/// Returns the inferred value and its error bound `L (d1 + d2)`.
pub fn infer_preference(f_j_j1: f64, f_j_j2: f64, d1: f64, d2: f64) -> Result<(f64, f64)> {
    for f in [f_j_j1, f_j_j2] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::PreferenceDomain(f));
        }
    }
    let num = (1.0 - f_j_j1) * f_j_j2;
    let den = num + (1.0 - f_j_j2) * f_j_j1;
    Ok((num / den, INFERENCE_LIPSCHITZ * (d1 + d2)))
}

pub fn clamp_preference(f: f64) -> f64 {
    f.clamp(bt_lower(), bt_upper())
}

/// Reward surrogate `ln(f / (1 - f))` for a preference in the clamped range.
pub fn q_value(f: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(f >= bt_lower() - SLACK && f <= bt_upper() + SLACK) {
        return Err(Error::PreferenceDomain(f));
    }
    Ok((f / (1.0 - f)).ln())
}

/// Where an entry's preference estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimateSource {
    /// The reference entry itself; known exactly.
    Reference,
    /// No usable data; prior `0.5` with width `1`.
    Prior,
    Direct,
    Inferred {
        pivot: usize,
    },
}

/// Reference column of the preference matrix, indexed by global entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEstimate {
    pub n_arms: usize,
    pub n_states: usize,
    pub reference: Entry,
    pub f_hat: Vec<f64>,
    pub f_tilde: Vec<f64>,
    pub width: Vec<f64>,
    pub q_tilde: Vec<f64>,
    pub source: Vec<EstimateSource>,
}

impl PreferenceEstimate {
    /// Prior-only column: every entry at `0.5 + 1`, clamped.
    pub fn prior(n_arms: usize, n_states: usize, reference: Entry) -> Self {
        build_reference_column(
            &ComparisonLedger::new(n_arms, n_states),
            reference,
            1,
            &WidthParams {
                n_arms,
                n_states,
                horizon: 1,
                epsilon: 0.5,
            },
        )
    }

    pub fn q(&self, arm: usize, state: usize) -> f64 {
        self.q_tilde[global_index(arm, state, self.n_states)]
    }
}

/// Estimates `F(g, ref)` for every global entry `g` and applies the optimism
/// bonus.
pub fn build_reference_column(
    ledger: &ComparisonLedger,
    reference: Entry,
    episode: usize,
    params: &WidthParams,
) -> PreferenceEstimate {
    let m = ledger.n_entries();
    let r = ledger.global(reference);

    // direct estimates of the reference column, used for pivot selection
    let column: Vec<(f64, f64)> = (0..m)
        .map(|g| empirical_preference(ledger, g, r, episode, params))
        .collect();

    let mut out = PreferenceEstimate {
        n_arms: ledger.n_arms(),
        n_states: ledger.n_states(),
        reference,
        f_hat: vec![0.0; m],
        f_tilde: vec![0.0; m],
        width: vec![0.0; m],
        q_tilde: vec![0.0; m],
        source: vec![EstimateSource::Prior; m],
    };

    for g in 0..m {
        let (f_hat, width, source) = if g == r {
            (0.5, 0.0, EstimateSource::Reference)
        } else {
            let (c_direct, _) = ledger.counts_global(g, r);
            let (f_dir, d_dir) = column[g];
            let mut best = if c_direct > 0 {
                (clamp_preference(f_dir), d_dir, EstimateSource::Direct)
            } else {
                (0.5, 1.0, EstimateSource::Prior)
            };

            let pivot = (0..m)
                .filter(|&j| j != g && j != r)
                .filter(|&j| ledger.counts_global(j, r).0 > 0 && ledger.counts_global(j, g).0 > 0)
                .min_by(|&a, &b| column[a].1.total_cmp(&column[b].1).then(a.cmp(&b)));
            if let Some(j) = pivot {
                let (f_jg, d_jg) = empirical_preference(ledger, j, g, episode, params);
                let (f_jr, d_jr) = column[j];
                let (f_inf, d_inf) =
                    infer_preference(clamp_preference(f_jg), clamp_preference(f_jr), d_jg, d_jr)
                        .expect("clamped inputs lie in the open unit interval");
                if d_inf < best.1 {
                    best = (f_inf, d_inf, EstimateSource::Inferred { pivot: j });
                }
            }
            best
        };
        let f_tilde = clamp_preference(f_hat + width);
        out.f_hat[g] = f_hat;
        out.width[g] = width;
        out.f_tilde[g] = f_tilde;
        out.q_tilde[g] = q_value(f_tilde).expect("clamped");
        out.source[g] = source;
    }
    out
}
