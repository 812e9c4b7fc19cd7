//! Maximal and minimal solutions as limits of perturbed problems, comparison
//! bounds for sub- and super-solutions, and a numerical uniqueness probe.

use std::sync::Arc;

use log::{info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Grid, GridFunction};
use crate::inequalities::{defect_profile, DefectOptions};
use crate::solver::{
    estimate_params, existence_value, solve_picard_with, ExistenceMode, ExistenceParams, HybridProblem,
    Lattice, SolverConfig, SolverReport,
};
use crate::weighted::{order_violations, weighted_distance};

/// Slack used for every weighted-order assertion on ladders and bounds.
pub const ORDER_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalConfig {
    pub eps0: f64,
    /// Geometric decay of the perturbation: `eps_n = eps0 * ratio^n`.
    pub ratio: f64,
    pub stop_tol: f64,
    pub max_levels: usize,
    /// Extrapolate the last two levels to `eps = 0`.
    pub extrapolate: bool,
    /// Existence constants; estimated on a lattice when absent.
    pub params: Option<ExistenceParams>,
}

impl Default for ExtremalConfig {
    fn default() -> Self {
        Self { eps0: 0.1, ratio: 0.5, stop_tol: 1e-4, max_levels: 12, extrapolate: false, params: None }
    }
}

impl ExtremalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0.is_finite() && self.eps0 > 0.0) {
            return Err(Error::invalid("eps0", format!("must be positive, got {}", self.eps0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::invalid("ratio", format!("must be in (0,1), got {}", self.ratio)));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::invalid("stop-tol", format!("must be non-negative, got {}", self.stop_tol)));
        }
        if self.max_levels == 0 {
            return Err(Error::invalid("max-levels", "must be at least 1"));
        }
        Ok(())
    }

    pub fn eps(&self, level: usize) -> f64 {
        self.eps0 * self.ratio.powi(level as i32)
    }
}

/// Solve the problem with `g + eps` and initial value `y0 + eps`.
pub fn solve_perturbed(
    problem: &HybridProblem,
    eps: f64,
    config: &SolverConfig,
) -> Result<(GridFunction, SolverReport)> {
    if !eps.is_finite() {
        return Err(Error::invalid("eps", "must be finite"));
    }
    solve_picard_with(&problem.perturbed(eps), config, None, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalKind {
    Maximal,
    Minimal,
}

impl ExtremalKind {
    fn sign(self) -> f64 {
        match self {
            ExtremalKind::Maximal => 1.0,
            ExtremalKind::Minimal => -1.0,
        }
    }
}

/// Strengthened existence value with the largest perturbation applied to
/// both the source and the initial value.
pub fn strengthened_existence_value(
    problem: &HybridProblem,
    params: &ExistenceParams,
    eps: f64,
) -> Result<f64> {
    let shifted = problem.perturbed(eps);
    let widened = ExistenceParams { h_norm: params.h_norm + eps.abs(), ..*params };
    Ok(existence_value(shifted.c0()?, problem.span()?, problem.order, &widened, ExistenceMode::Printed)?.value)
}

#[derive(Debug, Clone)]
pub struct LadderLevel {
    pub eps: f64,
    pub solution: GridFunction,
    pub report: SolverReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityViolation {
    /// The violation is between levels `level` and `level + 1`.
    pub level: usize,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    pub kind: ExtremalKind,
    pub eps: Vec<f64>,
    /// Weighted distances between consecutive levels.
    pub diffs: Vec<f64>,
    pub stopped_by_tol: bool,
    pub monotone: bool,
    pub violations: Vec<MonotonicityViolation>,
    /// Distances are nonincreasing over the last half of the ladder.
    pub diffs_settle: bool,
    pub strengthened_value: f64,
    pub params: ExistenceParams,
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
pub struct ExtremalSolution {
    /// Last ladder iterate, or its extrapolation when requested.
    pub solution: GridFunction,
    pub ladder: Vec<LadderLevel>,
    pub report: ExtremalReport,
}

pub fn maximal_solution(
    problem: &HybridProblem,
    ext: &ExtremalConfig,
    solver: &SolverConfig,
) -> Result<ExtremalSolution> {
    extremal_on(problem, ExtremalKind::Maximal, ext, solver, problem.grid(solver)?)
}

pub fn minimal_solution(
    problem: &HybridProblem,
    ext: &ExtremalConfig,
    solver: &SolverConfig,
) -> Result<ExtremalSolution> {
    extremal_on(problem, ExtremalKind::Minimal, ext, solver, problem.grid(solver)?)
}

/// Build the perturbation ladder on a given grid.
pub fn extremal_on(
    problem: &HybridProblem,
    kind: ExtremalKind,
    ext: &ExtremalConfig,
    solver: &SolverConfig,
    grid: Arc<Grid>,
) -> Result<ExtremalSolution> {
    ext.validate()?;
    solver.validate()?;
    let params = match ext.params {
        Some(p) => p,
        None => estimate_params(problem, &Lattice::around(problem.y0))?,
    };
    let sign = kind.sign();
    let strengthened = strengthened_existence_value(problem, &params, sign * ext.eps0)?;
    if !(strengthened < 1.0) {
        return Err(Error::Precondition(format!(
            "strengthened existence value {strengthened:.6} with eps0 = {} is not below 1",
            ext.eps0
        )));
    }

    let start = GridFunction::from_weighted(grid.clone(), problem.order, vec![problem.y0; grid.len()])?;
    let mut ladder: Vec<LadderLevel> = Vec::new();
    let mut diffs = Vec::new();
    let mut violations = Vec::new();
    let mut stopped_by_tol = false;
    for level in 0..ext.max_levels {
        let eps = ext.eps(level);
        let shifted = problem.perturbed(sign * eps);
        let initial = ladder.last().map_or(&start, |l| &l.solution);
        let (solution, report) = solve_picard_with(&shifted, solver, Some(initial), Some(params))?;
        if !report.converged {
            return Err(Error::LadderNotConverged { level, eps });
        }
        if let Some(prev) = ladder.last() {
            // maximal ladders decrease, minimal ladders increase
            let nodes = match kind {
                ExtremalKind::Maximal => order_violations(&solution, &prev.solution, false, ORDER_SLACK)?,
                ExtremalKind::Minimal => order_violations(&prev.solution, &solution, false, ORDER_SLACK)?,
            };
            if !nodes.is_empty() {
                warn!("{kind:?} ladder not monotone between levels {} and {level}", level - 1);
                violations.push(MonotonicityViolation { level: level - 1, nodes });
            }
            diffs.push(weighted_distance(&solution, &prev.solution)?.value);
        }
        ladder.push(LadderLevel { eps, solution, report });
        if diffs.last().is_some_and(|d| *d < ext.stop_tol) {
            stopped_by_tol = true;
            break;
        }
    }
    info!("{kind:?} ladder: {} levels, last diff {:?}", ladder.len(), diffs.last());

    let tail = &diffs[diffs.len() / 2..];
    let diffs_settle = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
    let last = &ladder[ladder.len() - 1].solution;
    let (solution, extrapolated) = if ext.extrapolate && ladder.len() >= 2 {
        // error linear in eps: r(0) ~ (r_n - q r_{n-1}) / (1 - q)
        let prev = &ladder[ladder.len() - 2].solution;
        let q = ext.ratio;
        (prev.lincomb(-q / (1.0 - q), last, 1.0 / (1.0 - q))?, true)
    } else {
        (last.clone(), false)
    };
    let report = ExtremalReport {
        kind,
        eps: ladder.iter().map(|l| l.eps).collect(),
        diffs,
        stopped_by_tol,
        monotone: violations.is_empty(),
        violations,
        diffs_settle,
        strengthened_value: strengthened,
        params,
        extrapolated,
    };
    Ok(ExtremalSolution { solution, ladder, report })
}

// ------------------------------------------------------------ bounds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    /// `u` is a sub-solution; expect `u <= r` for the maximal solution `r`.
    Lower,
    /// `u` is a super-solution; expect `q <= u` for the minimal solution `q`.
    Upper,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundVerdict {
    pub side: BoundSide,
    pub passed: bool,
    pub violating_nodes: Vec<usize>,
    /// Largest amount by which the bound fails (0 when it holds).
    pub max_excess: f64,
    /// `u(0) <= y0` (lower) or `u(0) >= y0` (upper) in the weighted sense.
    pub initial_condition_ok: bool,
    /// Largest defect (lower) or smallest defect (upper) of `u`.
    pub defect_extreme: f64,
}

/// Check `u` against the extremal solution computed on `u`'s grid.
pub fn comparison_bound(
    u: &GridFunction,
    problem: &HybridProblem,
    side: BoundSide,
    ext: &ExtremalConfig,
    solver: &SolverConfig,
    opts: DefectOptions,
) -> Result<BoundVerdict> {
    check_defect_sign(u, problem, side, opts)?;
    let kind = match side {
        BoundSide::Lower => ExtremalKind::Maximal,
        BoundSide::Upper => ExtremalKind::Minimal,
    };
    let extremal = extremal_on(problem, kind, ext, solver, u.grid().clone())?;
    comparison_bound_against(u, problem, side, &extremal.solution, opts)
}

/// Same as [`comparison_bound`] with a precomputed extremal solution.
pub fn comparison_bound_against(
    u: &GridFunction,
    problem: &HybridProblem,
    side: BoundSide,
    extremal: &GridFunction,
    opts: DefectOptions,
) -> Result<BoundVerdict> {
    let defect_extreme = check_defect_sign(u, problem, side, opts)?;
    let (low, high) = match side {
        BoundSide::Lower => (u, extremal),
        BoundSide::Upper => (extremal, u),
    };
    let violating_nodes = order_violations(low, high, false, ORDER_SLACK)?;
    let max_excess = low
        .weighted()
        .iter()
        .zip(high.weighted())
        .map(|(a, b)| a - b)
        .fold(0.0f64, f64::max);
    let w0 = u.weighted()[0];
    let initial_condition_ok = match side {
        BoundSide::Lower => w0 <= problem.y0 + ORDER_SLACK,
        BoundSide::Upper => w0 >= problem.y0 - ORDER_SLACK,
    };
    Ok(BoundVerdict {
        side,
        passed: violating_nodes.is_empty(),
        violating_nodes,
        max_excess,
        initial_condition_ok,
        defect_extreme,
    })
}

fn check_defect_sign(u: &GridFunction, problem: &HybridProblem, side: BoundSide, opts: DefectOptions) -> Result<f64> {
    let profile = defect_profile(u, problem, opts)?;
    match side {
        BoundSide::Lower => match profile.above().first() {
            Some(i) => Err(Error::Precondition(format!("u is not a sub-solution: defect above tolerance at node {i}"))),
            None => Ok(profile.max()),
        },
        BoundSide::Upper => match profile.below().first() {
            Some(i) => Err(Error::Precondition(format!("u is not a super-solution: defect below tolerance at node {i}"))),
            None => Ok(profile.min()),
        },
    }
}

// ------------------------------------------------------------ uniqueness

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessVerdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StartOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonFunctionCheck {
    /// The bound on increments of `g` holds on the lattice.
    pub condition_ok: bool,
    pub condition_worst: f64,
    /// Weighted norms of the comparison solutions from a zero and a positive start.
    pub m_norms: Vec<f64>,
    pub m_converged: bool,
    /// Both comparison solutions vanish within tolerance.
    pub supported: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub verdict: UniquenessVerdict,
    pub starts: Vec<StartOutcome>,
    pub max_distance: f64,
    pub comparison: Option<ComparisonFunctionCheck>,
}

/// Solve from several starts and compare; with a comparison function
/// `G(t, m)`, also check it bounds the increments of `g` and solve
/// `D m = G(t, m)` with zero weighted initial value.
pub fn uniqueness_probe(
    problem: &HybridProblem,
    comparison: Option<&Expr>,
    starts: &[GridFunction],
    solver: &SolverConfig,
) -> Result<UniquenessReport> {
    if starts.len() < 2 {
        return Err(Error::invalid("starts", format!("need at least two, got {}", starts.len())));
    }
    for s in &starts[1..] {
        if weighted_distance(s, &starts[0])?.value == 0.0 {
            return Err(Error::invalid("starts", "must be distinct"));
        }
    }
    let mut solutions = Vec::new();
    let mut outcomes = Vec::new();
    for s in starts {
        let (y, report) = solve_picard_with(problem, solver, Some(s), None)?;
        outcomes.push(StartOutcome {
            converged: report.converged,
            iterations: report.iterations,
            final_residual: report.final_residual,
        });
        solutions.push(y);
    }
    let mut max_distance: f64 = 0.0;
    for (i, a) in solutions.iter().enumerate() {
        for b in &solutions[i + 1..] {
            max_distance = max_distance.max(weighted_distance(a, b)?.value);
        }
    }
    let verdict = if outcomes.iter().any(|o| !o.converged) {
        UniquenessVerdict::Inconclusive
    } else if max_distance <= 10.0 * solver.picard_tol {
        UniquenessVerdict::Consistent
    } else {
        UniquenessVerdict::Inconsistent
    };
    let comparison = comparison
        .map(|g| comparison_function_check(problem, g, &starts[0], solver))
        .transpose()?;
    Ok(UniquenessReport { verdict, starts: outcomes, max_distance, comparison })
}

fn comparison_function_check(
    problem: &HybridProblem,
    bound: &Expr,
    like: &GridFunction,
    solver: &SolverConfig,
) -> Result<ComparisonFunctionCheck> {
    let renamed = bound
        .with_variable_names(&["t", "y"])
        .ok_or_else(|| Error::invalid("G", "must be an expression in (t, m)"))?;

    // lattice check of g(t,y1) - g(t,y2) <= G(t, y1/f(t,y1) - y2/f(t,y2)), y1 >= y2
    let lattice = Lattice::around(problem.y0);
    let ys = lattice.values();
    let mut worst: f64 = 0.0;
    for t in lattice.times(problem.horizon) {
        let gs = ys.iter().map(|&y| problem.eval_g(t, y)).collect::<Result<Vec<_>>>()?;
        let rs = ys.iter().map(|&y| Ok(y / problem.eval_f(t, y)?)).collect::<Result<Vec<_>>>()?;
        for i in 0..ys.len() {
            for j in 0..i {
                let m = (rs[i] - rs[j]).max(0.0);
                let rhs = renamed.eval_at(&[t, m])?;
                let excess = (gs[i] - gs[j]) - rhs;
                if excess > 1e-12 * (1.0 + rhs.abs()) {
                    worst = worst.max(excess);
                }
            }
        }
    }

    let one = Expr::parse("1", &["t", "y"])?;
    let m_problem = HybridProblem::new(one, renamed, 0.0, None, problem.horizon, problem.psi.clone(), problem.order)?;
    let params = estimate_params(&m_problem, &Lattice::new(9, 41, 0.0, 10.0)?)?;
    let grid = like.grid().clone();
    let zero = GridFunction::from_weighted(grid.clone(), problem.order, vec![0.0; grid.len()])?;
    let positive = GridFunction::from_weighted(grid.clone(), problem.order, vec![1.0; grid.len()])?;
    let mut m_norms = Vec::new();
    let mut m_converged = true;
    for start in [&zero, &positive] {
        let (m, report) = solve_picard_with(&m_problem, solver, Some(start), Some(params))?;
        m_converged &= report.converged;
        m_norms.push(crate::weighted::weighted_norm(&m)?.value);
    }
    let zero_tol = 100.0 * solver.picard_tol;
    Ok(ComparisonFunctionCheck {
        condition_ok: worst == 0.0,
        condition_worst: worst,
        supported: m_converged && m_norms.iter().all(|n| *n <= zero_tol),
        m_norms,
        m_converged,
    })
}
