//! Levenberg–Marquardt inner solver and augmented-Lagrangian outer loop.
//!
//! The constrained problem is
//! `min f(x)  s.t.  h(x) = 0,  l ≤ x ≤ u`
//! with a slack copy `z` of `x` carrying the bounds. For fixed multipliers and
//! penalty, the optimal slack is `z = clamp(x + y2/β, l, u)`; it is eliminated
//! in closed form, so the inner problem is a smooth least-squares problem in
//! `x` alone and `±∞` bounds reduce it to plain LM on `f`.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{GenCsLayout, StructuredPoint};
use crate::mmt::Mmt;
use crate::nls::NlsProblem;

/// Damping above which a step is considered impossible.
pub const LAMBDA_FATAL: f64 = 1e12;
const LAMBDA_FLOOR: f64 = 1e-14;

/// Equality constraint `h(x) = 0` applied element-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HKind {
    #[default]
    None,
    /// `scale · x(x − 1)(x + 1)`.
    Discr { scale: f64 },
}

impl HKind {
    pub fn is_active(&self) -> bool {
        matches!(self, HKind::Discr { .. })
    }

    /// Value and derivative of the constraint at one entry.
    fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            HKind::None => (0.0, 0.0),
            HKind::Discr { scale } => (scale * x * (x * x - 1.0), scale * (3.0 * x * x - 1.0)),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            HKind::None => Vec::new(),
            _ => x.iter().map(|&xi| self.eval(xi).0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_inner: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { lambda0: 1e-2, lambda_up: 10.0, lambda_down: 1.0 / 3.0, max_inner: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub h_kind: HKind,
    pub beta0: f64,
    pub beta_growth: f64,
    pub beta_max: f64,
    pub lm: LmConfig,
    pub max_outer: usize,
    pub lower: f64,
    pub upper: f64,
    pub grad_tol: f64,
    pub bound_tol: f64,
    pub exact_tol: f64,
    /// Standard deviation of the Gaussian starting point.
    pub init_scale: f64,
    /// Iterations over which a relative cost decrease below `stall_rel`
    /// counts as stagnation.
    pub stall_window: usize,
    pub stall_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            h_kind: HKind::None,
            beta0: 1.0,
            beta_growth: 3.0,
            beta_max: 1e8,
            lm: LmConfig::default(),
            max_outer: 15,
            lower: -1.0,
            upper: 1.0,
            grad_tol: 1e-13,
            bound_tol: 1e-13,
            exact_tol: 1e-12,
            init_scale: 1e-2,
            stall_window: 100,
            stall_rel: 1e-16,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta0", self.beta0),
            ("lm.lambda0", self.lm.lambda0),
            ("grad_tol", self.grad_tol),
            ("bound_tol", self.bound_tol),
            ("exact_tol", self.exact_tol),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.beta_growth >= 1.0) || !(self.beta_max >= self.beta0) {
            return Err(Error::Config("beta must be nondecreasing: need beta_growth ≥ 1 and beta_max ≥ beta0".into()));
        }
        if !(self.lm.lambda_up > 1.0) || !(self.lm.lambda_down > 0.0 && self.lm.lambda_down < 1.0) {
            return Err(Error::Config("need lambda_up > 1 and 0 < lambda_down < 1".into()));
        }
        if self.lm.max_inner == 0 || self.max_outer == 0 || self.stall_window == 0 {
            return Err(Error::Config("iteration budgets must be positive".into()));
        }
        if !(self.lower <= self.upper) {
            return Err(Error::Config(format!("empty box [{}, {}]", self.lower, self.upper)));
        }
        if let HKind::Discr { scale } = self.h_kind {
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(Error::Config(format!("h scale must be positive, got {scale}")));
            }
        }
        Ok(())
    }

    /// Plain LM on `f`: no equality constraint and no bounds.
    pub fn unconstrained() -> Self {
        SolverConfig { lower: f64::NEG_INFINITY, upper: f64::INFINITY, ..Default::default() }
    }
}

/// Augmented-Lagrangian state for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AlState {
    pub h: HKind,
    /// Multipliers of `h(x) = 0`; empty when no constraint is active.
    pub y1: Vec<f64>,
    /// Multipliers of `x − z = 0`.
    pub y2: Vec<f64>,
    /// Slack, always inside `[lower, upper]`.
    pub z: Vec<f64>,
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
}

impl AlState {
    pub fn new(x: &[f64], config: &SolverConfig) -> Self {
        let n = x.len();
        AlState {
            h: config.h_kind,
            y1: if config.h_kind.is_active() { vec![0.0; n] } else { Vec::new() },
            y2: vec![0.0; n],
            z: x.iter().map(|v| v.clamp(config.lower, config.upper)).collect(),
            beta: config.beta0,
            lower: config.lower,
            upper: config.upper,
        }
    }

    /// Terms that leave the inner problem equal to plain least squares.
    pub fn inactive(n: usize) -> Self {
        AlState {
            h: HKind::None,
            y1: Vec::new(),
            y2: vec![0.0; n],
            z: vec![0.0; n],
            beta: 1.0,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    fn shifted(&self, x: f64, idx: usize) -> f64 {
        x + self.y2[idx] / self.beta
    }

    /// Distance of `x + y2/β` to the box, entry by entry.
    fn box_gap(&self, x: f64, idx: usize) -> f64 {
        let s = self.shifted(x, idx);
        s - s.clamp(self.lower, self.upper)
    }

    /// The AL part of the stacked cost at `x`.
    fn penalty(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let d = self.box_gap(xi, i);
            acc += d * d;
            if self.h.is_active() {
                let e = self.h.eval(xi).0 + self.y1[i] / self.beta;
                acc += e * e;
            }
        }
        0.5 * self.beta * acc
    }

    /// Adds the AL terms to a Gauss–Newton system in place.
    fn augment(&self, x: &[f64], h: &mut DMatrix<f64>, g: &mut [f64]) {
        for (i, &xi) in x.iter().enumerate() {
            let d = self.box_gap(xi, i);
            if d != 0.0 {
                h[(i, i)] += self.beta;
                g[i] += self.beta * d;
            }
            if self.h.is_active() {
                let (hv, dh) = self.h.eval(xi);
                h[(i, i)] += self.beta * dh * dh;
                g[i] += self.beta * dh * (hv + self.y1[i] / self.beta);
            }
        }
    }

    /// Slack and multiplier update after an inner solve.
    fn update(&mut self, x: &[f64]) {
        for (i, &xi) in x.iter().enumerate() {
            self.z[i] = self.shifted(xi, i).clamp(self.lower, self.upper);
            self.y2[i] += self.beta * (xi - self.z[i]);
            if self.h.is_active() {
                self.y1[i] += self.beta * self.h.eval(xi).0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Exact,
    Stalled,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// The least-squares cost `f`.
    pub cost: f64,
    /// `f` plus the augmented-Lagrangian terms.
    pub stacked_cost: f64,
    pub beta: f64,
    pub lambda: f64,
    pub accepted: bool,
}

/// Infinity norms of the optimality and feasibility measures at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Violations {
    pub cost: f64,
    pub gradient: f64,
    pub equality: f64,
    pub bounds: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub point: StructuredPoint,
    pub history: Vec<HistoryEntry>,
    pub status: Status,
    /// LM iterations, each one a trial step.
    pub iterations: usize,
    pub accepted: usize,
    pub outer_iterations: usize,
    pub violations: Violations,
}

impl SolveOutcome {
    pub fn cost(&self) -> f64 {
        self.violations.cost
    }

    pub fn is_exact(&self) -> bool {
        self.status == Status::Exact
    }

    /// Writes the cost history as CSV with header `iteration,cost,beta,lambda`.
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,cost,beta,lambda")?;
        for e in &self.history {
            writeln!(out, "{},{:e},{:e},{:e}", e.iteration, e.cost, e.beta, e.lambda)?;
        }
        Ok(())
    }
}

/// Measures used by the exactness test.
pub fn violations(problem: &NlsProblem, x: &[f64], state: &AlState) -> Violations {
    let (grad, cost) = problem.gradient(x);
    let inf = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |a, v| a.max(v.abs()));
    Violations {
        cost,
        gradient: inf(&mut grad.iter().copied()),
        equality: inf(&mut state.h.apply(x).into_iter()),
        bounds: inf(&mut x.iter().map(|&v| (state.lower - v).max(v - state.upper).max(0.0))),
        slack: inf(&mut x.iter().zip(&state.z).map(|(a, b)| a - b)),
    }
}

fn is_exact(v: &Violations, config: &SolverConfig) -> bool {
    v.cost <= config.exact_tol
        && v.gradient <= config.grad_tol
        && v.equality <= config.bound_tol
        && v.bounds <= config.bound_tol
        && v.slack <= config.bound_tol
}

/// Result of one inner LM run.
#[derive(Debug, Clone, PartialEq)]
pub struct LmRun {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub accepted: usize,
    pub lambda: f64,
    /// The stacked gradient met `grad_tol`.
    pub converged: bool,
    /// Damping exceeded [`LAMBDA_FATAL`].
    pub damping_failed: bool,
}

/// Per-iteration callback: `(f cost, stacked cost, lambda, accepted)`.
type Observer<'a> = dyn FnMut(f64, f64, f64, bool) -> bool + 'a;

fn lm_run(
    problem: &NlsProblem,
    mut x: Vec<f64>,
    state: &AlState,
    lm: &LmConfig,
    grad_tol: f64,
    observe: &mut Observer<'_>,
) -> LmRun {
    let n = x.len();
    let mut lambda = lm.lambda0;
    let (mut h, mut g, mut f) = problem.normal_equations(&x);
    state.augment(&x, &mut h, &mut g);
    let mut phi = f + state.penalty(&x);
    let mut run = LmRun { x: Vec::new(), iterations: 0, accepted: 0, lambda, converged: false, damping_failed: false };

    while run.iterations < lm.max_inner {
        if g.iter().all(|v| v.abs() <= grad_tol) {
            run.converged = true;
            break;
        }
        run.iterations += 1;
        let mut sys = h.clone();
        for i in 0..n {
            sys[(i, i)] += lambda;
        }
        let step = Cholesky::new(sys).map(|c| c.solve(&DVector::from_column_slice(&g)));
        let mut accepted = false;
        if let Some(step) = step {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
            let f_trial = problem.cost(&trial);
            let phi_trial = f_trial + state.penalty(&trial);
            if phi_trial < phi {
                accepted = true;
                x = trial;
                (h, g, f) = problem.normal_equations(&x);
                state.augment(&x, &mut h, &mut g);
                phi = phi_trial;
                lambda = (lambda * lm.lambda_down).max(LAMBDA_FLOOR);
                run.accepted += 1;
            }
        }
        if !accepted {
            lambda *= lm.lambda_up;
        }
        let stop = observe(f, phi, lambda, accepted);
        if lambda > LAMBDA_FATAL {
            run.damping_failed = true;
            break;
        }
        if stop {
            break;
        }
    }
    if !run.converged && g.iter().all(|v| v.abs() <= grad_tol) {
        run.converged = true;
    }
    run.x = x;
    run.lambda = lambda;
    run
}

/// Levenberg–Marquardt on the stacked residual
/// `[F(x) − vec T; √β(h(x) + y1/β); √β(x + y2/β − z(x))]` with the multipliers
/// in `terms` held fixed.
pub fn lm_minimize(
    point: &StructuredPoint,
    tensor: &Mmt,
    terms: &AlState,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    config.validate()?;
    let problem = NlsProblem::new(tensor, point.layout())?;
    check_terms(terms, point.x().len())?;
    let mut history = Vec::new();
    let mut observe = |cost: f64, stacked: f64, lambda: f64, accepted: bool| {
        history.push(HistoryEntry {
            iteration: history.len() + 1,
            cost,
            stacked_cost: stacked,
            beta: terms.beta,
            lambda,
            accepted,
        });
        false
    };
    let run = lm_run(&problem, point.x().to_vec(), terms, &config.lm, config.grad_tol, &mut observe);
    let v = violations(&problem, &run.x, &slack_for(terms, &run.x));
    let status = if is_exact(&v, config) {
        Status::Exact
    } else if run.converged || run.damping_failed {
        Status::Stalled
    } else {
        Status::BudgetExhausted
    };
    Ok(SolveOutcome {
        point: StructuredPoint::new(*point.layout(), run.x)?,
        history,
        status,
        iterations: run.iterations,
        accepted: run.accepted,
        outer_iterations: 0,
        violations: v,
    })
}

fn check_terms(terms: &AlState, n: usize) -> Result<()> {
    let y1_ok = if terms.h.is_active() { terms.y1.len() == n } else { terms.y1.is_empty() || terms.y1.len() == n };
    if !y1_ok || terms.y2.len() != n || terms.z.len() != n {
        return Err(Error::DimensionMismatch(format!("AL terms do not match {n} variables")));
    }
    if !(terms.beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {}", terms.beta)));
    }
    Ok(())
}

/// The state with its slack set to the closed-form optimum at `x`.
fn slack_for(terms: &AlState, x: &[f64]) -> AlState {
    let mut s = terms.clone();
    for (i, &xi) in x.iter().enumerate() {
        s.z[i] = s.shifted(xi, i).clamp(s.lower, s.upper);
    }
    s
}

/// Gaussian starting point with standard deviation `init_scale`, drawn from
/// a ChaCha8 stream seeded with `seed`.
pub fn starting_point(layout: &GenCsLayout, init_scale: f64, seed: u64) -> StructuredPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..layout.n_vars()).map(|_| init_scale * rng.sample::<f64, _>(StandardNormal)).collect();
    StructuredPoint::new(*layout, x).expect("length matches layout")
}

/// Augmented-Lagrangian search from a seeded random start.
pub fn al_solve(tensor: &Mmt, layout: &GenCsLayout, config: &SolverConfig, seed: u64) -> Result<SolveOutcome> {
    config.validate()?;
    al_solve_from(starting_point(layout, config.init_scale, seed), tensor, config)
}

/// Augmented-Lagrangian search from a given point with fresh multipliers.
pub fn al_solve_from(start: StructuredPoint, tensor: &Mmt, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let layout = *start.layout();
    let problem = NlsProblem::new(tensor, &layout)?;
    let mut x = start.into_x();
    let mut state = AlState::new(&x, config);
    let mut history: Vec<HistoryEntry> = Vec::new();
    let (mut iterations, mut accepted, mut outer) = (0, 0, 0);
    let mut stalled = false;

    let mut v = violations(&problem, &x, &state);
    if is_exact(&v, config) {
        return Ok(SolveOutcome {
            point: StructuredPoint::new(layout, x)?,
            history,
            status: Status::Exact,
            iterations,
            accepted,
            outer_iterations: 0,
            violations: v,
        });
    }

    while outer < config.max_outer {
        outer += 1;
        let beta = state.beta;
        let mut observe = |cost: f64, stacked: f64, lambda: f64, acc: bool| {
            history.push(HistoryEntry {
                iteration: history.len() + 1,
                cost,
                stacked_cost: stacked,
                beta,
                lambda,
                accepted: acc,
            });
            stalled = detect_stall(&history, config);
            stalled
        };
        let run = lm_run(&problem, x, &state, &config.lm, config.grad_tol, &mut observe);
        iterations += run.iterations;
        accepted += run.accepted;
        x = run.x;
        state.update(&x);
        v = violations(&problem, &x, &state);
        if is_exact(&v, config) || stalled {
            break;
        }
        state.beta = (state.beta * config.beta_growth).min(config.beta_max);
    }

    let status = if is_exact(&v, config) {
        Status::Exact
    } else if stalled {
        Status::Stalled
    } else {
        Status::BudgetExhausted
    };
    Ok(SolveOutcome {
        point: StructuredPoint::new(layout, x)?,
        history,
        status,
        iterations,
        accepted,
        outer_iterations: outer,
        violations: v,
    })
}

fn detect_stall(history: &[HistoryEntry], config: &SolverConfig) -> bool {
    let w = config.stall_window;
    if history.len() <= w {
        return false;
    }
    let now = history[history.len() - 1].cost;
    let then = history[history.len() - 1 - w].cost;
    now > config.exact_tol && then - now < config.stall_rel * then
}
