//! Occupancy-measure linear programs and the direct index policy built on
//! their solutions.
//!
//! Two programs are built here. The exact program works on state-action
//! occupancy `mu_n(s, a)` with known kernels. The extended program works on
//! state-action-state occupancy `omega_n(s, a, s')` and lets the kernel
//! implied by `omega` range over a box around the empirical kernel; the box
//! constraints `omega / sum_y omega <= p_hi` are multiplied through by the
//! (nonnegative) denominator so the program stays linear.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::preference::PreferenceEstimate;
use crate::transitions::{KernelEstimate, TransitionEstimate, WidthParams, N_ACTIONS};
use crate::world::{global_index, Action, WorldModel};

/// Primal feasibility tolerance accepted from the solver.
pub const FEAS_TOL: f64 = 1e-6;

/// Occupancy below this is treated as zero when forming index ratios.
pub const INDEX_DENOM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum LpError {
    #[error("is infeasible")]
    Infeasible,
    #[error("is unbounded")]
    Unbounded,
    #[error("solve failed: {0}")]
    NumericalFailure(String),
}

/// Sparse row `sum terms <= rhs` (or `= rhs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum()
    }
}

/// How LP variables map onto occupancy measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VariableLayout {
    Plain,
    /// `mu_n(s, a)`; `kernels` turn it into `omega = mu * P`.
    StateAction {
        n_arms: usize,
        n_states: usize,
        kernels: Vec<KernelEstimate>,
    },
    /// `omega_n(s, a, s')`.
    StateActionState {
        n_arms: usize,
        n_states: usize,
    },
}

/// Position of `mu_n(s, a)` in the exact-LP variable vector.
pub fn sa_index(n_states: usize, n: usize, s: usize, a: usize) -> usize {
    (n * n_states + s) * N_ACTIONS + a
}

/// Position of `omega_n(s, a, s')` in the extended-LP variable vector.
pub fn sas_index(n_states: usize, n: usize, s: usize, a: usize, next: usize) -> usize {
    sa_index(n_states, n, s, a) * n_states + next
}

/// Maximization problem over nonnegative variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub equalities: Vec<Constraint>,
    pub inequalities: Vec<Constraint>,
    pub layout: VariableLayout,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            layout: VariableLayout::Plain,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(Constraint {
            name: name.into(),
            terms,
            rhs,
        });
    }

    pub fn add_le(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        self.inequalities.push(Constraint {
            name: name.into(),
            terms,
            rhs,
        });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any constraint or nonnegativity bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|c| (c.eval(x) - c.rhs).abs());
        let le = self
            .inequalities
            .iter()
            .map(|c| (c.eval(x) - c.rhs).max(0.0));
        let lb = x.iter().map(|v| (-v).max(0.0));
        eq.chain(le).chain(lb).fold(0.0, f64::max)
    }

    pub fn var_name(&self, i: usize) -> String {
        match &self.layout {
            VariableLayout::Plain => format!("x{i}"),
            VariableLayout::StateAction { n_states, .. } => {
                let (a, rest) = (i % N_ACTIONS, i / N_ACTIONS);
                format!("mu_{}_{}_{}", rest / n_states, rest % n_states, a)
            }
            VariableLayout::StateActionState { n_states, .. } => {
                let (next, rest) = (i % n_states, i / n_states);
                let (a, rest) = (rest % N_ACTIONS, rest / N_ACTIONS);
                format!("w_{}_{}_{}_{}", rest / n_states, rest % n_states, a, next)
            }
        }
    }

    /// CPLEX-style LP text for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let fmt_terms = |out: &mut String, terms: &[(usize, f64)]| {
            if terms.is_empty() {
                out.push_str(" 0 x0");
            }
            for &(i, c) in terms {
                let sign = if c < 0.0 { '-' } else { '+' };
                let _ = write!(out, " {sign} {} {}", c.abs(), self.var_name(i));
            }
        };
        out.push_str("Maximize\n obj:");
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (i, *c))
            .collect();
        fmt_terms(&mut out, &obj);
        out.push_str("\nSubject To\n");
        for (c, op) in self
            .equalities
            .iter()
            .map(|c| (c, "="))
            .chain(self.inequalities.iter().map(|c| (c, "<=")))
        {
            let _ = write!(out, " {}:", c.name);
            fmt_terms(&mut out, &c.terms);
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for i in 0..self.n_vars() {
            let _ = writeln!(out, " {} >= 0", self.var_name(i));
        }
        out.push_str("End\n");
        out
    }
}

/// Exact occupancy LP over `mu_n(s, a)` for the given kernels and per-entry
/// values (indexed by global `(arm, state)`).
pub fn build_occupancy_lp(
    kernels: &[KernelEstimate],
    values: &[f64],
    budget: usize,
) -> Result<LinearProgram> {
    let n_arms = kernels.len();
    let n_states = kernels.first().map_or(0, |k| k[0].len());
    if n_arms == 0 || n_states == 0 {
        return Err(Error::Shape(
            "occupancy LP needs at least one arm and state".into(),
        ));
    }
    if values.len() != n_arms * n_states {
        return Err(Error::Shape(format!(
            "{} values for {n_arms} arms x {n_states} states",
            values.len()
        )));
    }
    let n_vars = n_arms * n_states * N_ACTIONS;
    let mut objective = vec![0.0; n_vars];
    for n in 0..n_arms {
        for s in 0..n_states {
            for a in 0..N_ACTIONS {
                objective[sa_index(n_states, n, s, a)] = values[global_index(n, s, n_states)];
            }
        }
    }
    let mut lp = LinearProgram::new(objective);

    let budget_terms = (0..n_arms)
        .flat_map(|n| (0..n_states).map(move |s| (sa_index(n_states, n, s, 1), 1.0)))
        .collect();
    lp.add_le("budget", budget_terms, budget as f64);

    for (n, kernel) in kernels.iter().enumerate() {
        for s in 0..n_states {
            let mut coeffs = vec![0.0; n_states * N_ACTIONS];
            for a in 0..N_ACTIONS {
                coeffs[s * N_ACTIONS + a] += 1.0;
            }
            for prev in 0..n_states {
                for a in 0..N_ACTIONS {
                    coeffs[prev * N_ACTIONS + a] -= kernel[a][prev][s];
                }
            }
            let terms = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, c)| (sa_index(n_states, n, k / N_ACTIONS, k % N_ACTIONS), *c))
                .collect();
            lp.add_eq(format!("flow_{n}_{s}"), terms, 0.0);
        }
        let norm = (0..n_states * N_ACTIONS)
            .map(|k| (sa_index(n_states, n, k / N_ACTIONS, k % N_ACTIONS), 1.0))
            .collect();
        lp.add_eq(format!("norm_{n}"), norm, 1.0);
    }
    lp.layout = VariableLayout::StateAction {
        n_arms,
        n_states,
        kernels: kernels.to_vec(),
    };
    Ok(lp)
}

/// True kernels of every arm in estimate layout.
pub fn world_kernels(world: &WorldModel) -> Vec<KernelEstimate> {
    world
        .arms()
        .iter()
        .map(|arm| Action::ALL.map(|a| arm.kernel(a).rows().map(<[f64]>::to_vec).collect()))
        .collect()
}

/// Exact LP with the world's true kernels and budget.
pub fn build_exact_lp(world: &WorldModel, values: &[f64]) -> Result<LinearProgram> {
    build_occupancy_lp(&world_kernels(world), values, world.budget())
}

/// Per-arm `(P̂, δ)` pairs that define the kernel box of the extended LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBall {
    /// `[arm][action][s][s']`
    pub center: Vec<KernelEstimate>,
    /// `[arm][action][s]`
    pub width: Vec<[Vec<f64>; N_ACTIONS]>,
}

impl KernelBall {
    pub fn from_estimate(trans: &TransitionEstimate, params: &WidthParams, episode: usize) -> Self {
        let arms = 0..trans.n_arms();
        Self {
            center: arms.clone().map(|n| trans.empirical_kernel(n)).collect(),
            width: arms.map(|n| trans.widths(n, params, episode)).collect(),
        }
    }

    /// Ball of zero width around the given kernels.
    pub fn exact(kernels: Vec<KernelEstimate>) -> Self {
        let width = kernels
            .iter()
            .map(|k| [vec![0.0; k[0].len()], vec![0.0; k[1].len()]])
            .collect();
        Self {
            center: kernels,
            width,
        }
    }

    /// Clamped `[lo, hi]` bounds for cell `(n, a, s, s')`.
    pub fn bounds(&self, n: usize, a: usize, s: usize, next: usize) -> (f64, f64) {
        let p = self.center[n][a][s][next];
        let d = self.width[n][a][s];
        ((p - d).max(0.0), (p + d).min(1.0))
    }
}

/// Extended LP over `omega_n(s, a, s')` with per-entry values `q` (global
/// index) and a kernel box.
pub fn build_elp_from_ball(
    ball: &KernelBall,
    values: &[f64],
    budget: usize,
) -> Result<LinearProgram> {
    let n_arms = ball.center.len();
    let n_states = ball.center.first().map_or(0, |k| k[0].len());
    if n_arms == 0 || n_states == 0 {
        return Err(Error::Shape(
            "extended LP needs at least one arm and state".into(),
        ));
    }
    if values.len() != n_arms * n_states || ball.width.len() != n_arms {
        return Err(Error::Shape(
            "extended LP inputs disagree on arm/state counts".into(),
        ));
    }
    let sas = |n, s, a, next| sas_index(n_states, n, s, a, next);
    let n_vars = n_arms * n_states * N_ACTIONS * n_states;
    let mut objective = vec![0.0; n_vars];
    for n in 0..n_arms {
        for s in 0..n_states {
            for a in 0..N_ACTIONS {
                for next in 0..n_states {
                    objective[sas(n, s, a, next)] = values[global_index(n, s, n_states)];
                }
            }
        }
    }
    let mut lp = LinearProgram::new(objective);

    let mut budget_terms = Vec::new();
    for n in 0..n_arms {
        for s in 0..n_states {
            for next in 0..n_states {
                budget_terms.push((sas(n, s, 1, next), 1.0));
            }
        }
    }
    lp.add_le("budget", budget_terms, budget as f64);

    for n in 0..n_arms {
        lp.add_eq(
            format!("norm_{n}"),
            (0..n_states * N_ACTIONS * n_states)
                .map(|k| (sas(n, 0, 0, 0) + k, 1.0))
                .collect(),
            1.0,
        );
        for s in 0..n_states {
            // outflow of s minus inflow into s
            let mut coeffs = vec![0.0; n_states * N_ACTIONS * n_states];
            let local = |s: usize, a: usize, next: usize| (s * N_ACTIONS + a) * n_states + next;
            for a in 0..N_ACTIONS {
                for next in 0..n_states {
                    coeffs[local(s, a, next)] += 1.0;
                }
            }
            for prev in 0..n_states {
                for a in 0..N_ACTIONS {
                    coeffs[local(prev, a, s)] -= 1.0;
                }
            }
            let base = sas(n, 0, 0, 0);
            let terms = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, c)| (base + k, *c))
                .collect();
            lp.add_eq(format!("flow_{n}_{s}"), terms, 0.0);
        }
        for s in 0..n_states {
            for a in 0..N_ACTIONS {
                for next in 0..n_states {
                    let (lo, hi) = ball.bounds(n, a, s, next);
                    if hi < 1.0 {
                        let terms = (0..n_states)
                            .map(|y| {
                                let c = if y == next { 1.0 - hi } else { -hi };
                                (sas(n, s, a, y), c)
                            })
                            .collect();
                        lp.add_le(format!("hi_{n}_{s}_{a}_{next}"), terms, 0.0);
                    }
                    if lo > 0.0 {
                        let terms = (0..n_states)
                            .map(|y| {
                                let c = if y == next { lo - 1.0 } else { lo };
                                (sas(n, s, a, y), c)
                            })
                            .collect();
                        lp.add_le(format!("lo_{n}_{s}_{a}_{next}"), terms, 0.0);
                    }
                }
            }
        }
    }
    lp.layout = VariableLayout::StateActionState { n_arms, n_states };
    Ok(lp)
}

/// Extended LP from the learner's transition counts and optimistic
/// preference column.
pub fn build_elp(
    trans: &TransitionEstimate,
    pref: &PreferenceEstimate,
    budget: usize,
    params: &WidthParams,
    episode: usize,
) -> Result<LinearProgram> {
    if pref.n_arms != trans.n_arms() || pref.n_states != trans.n_states() {
        return Err(Error::Shape(
            "preference and transition estimates disagree".into(),
        ));
    }
    let ball = KernelBall::from_estimate(trans, params, episode);
    build_elp_from_ball(&ball, &pref.q_tilde, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Solved program. For occupancy layouts `omega` is filled as
/// `[arm][s][a][s']` (flattened); otherwise it is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySolution {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub x: Vec<f64>,
    pub n_arms: usize,
    pub n_states: usize,
    pub omega: Vec<f64>,
    pub message: Option<String>,
}

impl OccupancySolution {
    fn failed(status: SolveStatus, message: String) -> Self {
        Self {
            status,
            objective_value: f64::NAN,
            x: Vec::new(),
            n_arms: 0,
            n_states: 0,
            omega: Vec::new(),
            message: Some(message),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn into_optimal(self) -> Result<Self> {
        let err = match self.status {
            SolveStatus::Optimal => return Ok(self),
            SolveStatus::Infeasible => LpError::Infeasible,
            SolveStatus::Unbounded => LpError::Unbounded,
            SolveStatus::NumericalFailure => {
                LpError::NumericalFailure(self.message.unwrap_or_default())
            }
        };
        Err(err.into())
    }

    pub fn omega(&self, n: usize, s: usize, a: Action, next: usize) -> f64 {
        self.omega[sas_index(self.n_states, n, s, a.index(), next)]
    }

    /// `sum_{s'} omega_n(s, a, s')`.
    pub fn mass(&self, n: usize, s: usize, a: Action) -> f64 {
        (0..self.n_states)
            .map(|next| self.omega(n, s, a, next))
            .sum()
    }

    /// Share of the occupancy of `(n, s)` that is active; zero when the
    /// state carries no occupancy.
    pub fn direct_index(&self, n: usize, s: usize) -> f64 {
        let active = self.mass(n, s, Action::Active);
        let total = active + self.mass(n, s, Action::Passive);
        if total < INDEX_DENOM_EPS {
            0.0
        } else {
            (active / total).clamp(0.0, 1.0)
        }
    }

    /// Direct index of every `(arm, state)`, by global index.
    pub fn indices(&self) -> Vec<f64> {
        (0..self.n_arms)
            .flat_map(|n| (0..self.n_states).map(move |s| (n, s)))
            .map(|(n, s)| self.direct_index(n, s))
            .collect()
    }

    /// Total expected active arms under the occupancy measure.
    pub fn active_total(&self) -> f64 {
        (0..self.n_arms)
            .flat_map(|n| (0..self.n_states).map(move |s| (n, s)))
            .map(|(n, s)| self.mass(n, s, Action::Active))
            .sum()
    }
}

/// Solves `lp` and validates the returned point against every constraint.
pub fn solve_lp(lp: &LinearProgram) -> OccupancySolution {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = lp
        .objective
        .iter()
        .map(|&c| problem.add_var(c, (0.0, f64::INFINITY)))
        .collect();
    let add = |problem: &mut Problem, c: &Constraint, op| {
        let terms: Vec<_> = c.terms.iter().map(|&(i, coef)| (vars[i], coef)).collect();
        problem.add_constraint(terms.as_slice(), op, c.rhs);
    };
    for c in &lp.equalities {
        add(&mut problem, c, ComparisonOp::Eq);
    }
    for c in &lp.inequalities {
        add(&mut problem, c, ComparisonOp::Le);
    }

    let solution = match problem.solve() {
        Ok(outcome) => match outcome.into_solution() {
            Ok(sol) => sol,
            Err(e) => {
                return OccupancySolution::failed(
                    SolveStatus::NumericalFailure,
                    format!("interrupted: {:?}", e.termination_reason()),
                )
            }
        },
        Err(microlp::Error::Infeasible) => {
            return OccupancySolution::failed(SolveStatus::Infeasible, "infeasible".into())
        }
        Err(microlp::Error::Unbounded) => {
            return OccupancySolution::failed(SolveStatus::Unbounded, "unbounded".into())
        }
        Err(e) => return OccupancySolution::failed(SolveStatus::NumericalFailure, e.to_string()),
    };
    if solution.status() != microlp::SolutionStatus::Optimal {
        return OccupancySolution::failed(
            SolveStatus::NumericalFailure,
            "solver returned a non-optimal point".into(),
        );
    }

    let mut x: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
    let violation = lp.max_violation(&x);
    if violation > FEAS_TOL {
        return OccupancySolution::failed(
            SolveStatus::NumericalFailure,
            format!("returned point violates constraints by {violation:e}"),
        );
    }
    // solver round-off below the tolerance
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let objective_value = lp.objective_value(&x);

    let (n_arms, n_states, omega) = match &lp.layout {
        VariableLayout::Plain => (0, 0, Vec::new()),
        VariableLayout::StateActionState { n_arms, n_states } => (*n_arms, *n_states, x.clone()),
        VariableLayout::StateAction {
            n_arms,
            n_states,
            kernels,
        } => {
            let ns = *n_states;
            let mut omega = vec![0.0; n_arms * ns * N_ACTIONS * ns];
            for (n, kernel) in kernels.iter().enumerate() {
                for s in 0..ns {
                    for a in 0..N_ACTIONS {
                        let mu = x[sa_index(ns, n, s, a)];
                        for next in 0..ns {
                            omega[sas_index(ns, n, s, a, next)] = mu * kernel[a][s][next];
                        }
                    }
                }
            }
            (*n_arms, ns, omega)
        }
    };

    OccupancySolution {
        status: SolveStatus::Optimal,
        objective_value,
        x,
        n_arms,
        n_states,
        omega,
        message: None,
    }
}

/// The `b` arms with the largest indices, ties to the smaller arm id.
/// Returned in ascending arm order.
pub fn select_top_b(indices: &[f64], b: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by(|&i, &j| indices[j].total_cmp(&indices[i]).then(i.cmp(&j)));
    order.truncate(b);
    order.sort_unstable();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ArmModel, Kernel};

    fn toy_world() -> WorldModel {
        let arm = ArmModel::new(
            Kernel::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
            Kernel::from_rows(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        WorldModel::new(vec![arm], 1).unwrap()
    }

    #[test]
    fn one_variable_program() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_le("cap", vec![(0, 1.0)], 0.3);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert!((sol.objective_value - 0.3).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_le("neg", vec![(0, 1.0)], -1.0);
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.into_optimal().is_err());

        let lp = LinearProgram::new(vec![1.0]);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Unbounded);
    }

    #[test]
    fn toy_exact_lp_always_active() {
        let world = toy_world();
        let lp = build_exact_lp(&world, &[0.0, 1.0]).unwrap();
        let sol = solve_lp(&lp).into_optimal().unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
        assert!((sol.mass(0, 1, Action::Active) - 1.0).abs() < 1e-9);
        assert!((sol.omega(0, 1, Action::Active, 1) - 1.0).abs() < 1e-9);
        assert_eq!(sol.direct_index(0, 1), 1.0);
        // state 0 has no occupancy
        assert_eq!(sol.direct_index(0, 0), 0.0);
    }

    #[test]
    fn zero_values_give_zero_optimum() {
        let world = crate::world::build_app_marketing();
        let lp = build_exact_lp(&world, &vec![0.0; 40]).unwrap();
        let sol = solve_lp(&lp).into_optimal().unwrap();
        assert!(sol.objective_value.abs() < 1e-12);
    }

    #[test]
    fn degenerate_ball_matches_exact_program() {
        let world = crate::world::build_cpap(Default::default()).unwrap();
        let values: Vec<f64> = (0..60).map(|g| world.reward(g / 3, g % 3)).collect();
        let exact = solve_lp(&build_exact_lp(&world, &values).unwrap())
            .into_optimal()
            .unwrap();
        let ball = KernelBall::exact(world_kernels(&world));
        let elp = solve_lp(&build_elp_from_ball(&ball, &values, world.budget()).unwrap())
            .into_optimal()
            .unwrap();
        assert!((exact.objective_value - elp.objective_value).abs() < 1e-6);
        assert!(exact.active_total() <= 8.0 + 1e-6);
    }

    #[test]
    fn direct_index_ratio() {
        let sol = OccupancySolution {
            status: SolveStatus::Optimal,
            objective_value: 0.0,
            x: vec![],
            n_arms: 1,
            n_states: 1,
            omega: vec![0.3, 0.2],
            message: None,
        };
        assert!((sol.direct_index(0, 0) - 0.4).abs() < 1e-12);
        let passive_only = OccupancySolution {
            omega: vec![0.5, 0.0],
            ..sol.clone()
        };
        assert_eq!(passive_only.direct_index(0, 0), 0.0);
        let empty = OccupancySolution {
            omega: vec![0.0, 0.0],
            ..sol
        };
        assert_eq!(empty.direct_index(0, 0), 0.0);
    }

    #[test]
    fn top_b_ties() {
        assert_eq!(select_top_b(&[0.9, 0.1, 0.5, 0.5], 2), vec![0, 2]);
        assert_eq!(select_top_b(&[0.3; 5], 3), vec![0, 1, 2]);
        assert_eq!(select_top_b(&[0.2, 0.8, 0.1], 3), vec![0, 1, 2]);
    }

    #[test]
    fn lp_text_dump() {
        let lp = build_exact_lp(&toy_world(), &[0.0, 1.0]).unwrap();
        let text = lp.to_lp_format();
        assert!(text.starts_with("Maximize\n obj: + 1 mu_0_1_0 + 1 mu_0_1_1"));
        assert!(text.contains(" budget: + 1 mu_0_0_1 + 1 mu_0_1_1 <= 1\n"));
        assert!(text.contains(" norm_0:"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn solver_is_deterministic() {
        let world = crate::world::build_app_marketing();
        let values = vec![0.0; 40];
        let a = solve_lp(&build_exact_lp(&world, &values).unwrap());
        let b = solve_lp(&build_exact_lp(&world, &values).unwrap());
        assert_eq!(a, b);
    }
}
