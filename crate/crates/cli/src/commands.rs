//! Command dispatch. Each command writes its artifacts and returns whether
//! its verdicts passed.

use std::sync::Arc;

use log::info;
use serde::Serialize;
use serde_json::json;

use psi_hilfer::expr::Expr;
use psi_hilfer::extremal::{
    comparison_bound_against, extremal_on, uniqueness_probe, ExtremalKind, ExtremalSolution, UniquenessVerdict,
    ORDER_SLACK,
};
use psi_hilfer::grid::{FractionalOrder, GradedMesh, Grid, GridFunction};
use psi_hilfer::inequalities::{
    epsilon_limit_check, ml_identity_profile, ml_identity_sweep, perturbed_super_solution,
    strict_comparison_check, touchpoint_derivative, touchpoint_sign_violation, DefectOptions, StrictSide,
    TouchpointCase,
};
use psi_hilfer::operators::{hilfer_profile, rl_integral_profile, HilferOptions};
use psi_hilfer::solver::{solve_picard, HybridProblem};
use psi_hilfer::weighted::order_violations;

use crate::config::{Check, Command, Validated};
use crate::error::CliError;
use crate::output::OutputDir;

/// Pass threshold for the eigen-identity sweep.
const ML_TOLERANCE: f64 = 1e-3;
/// Touch-point violations are measured against this fraction of the case scale.
const TOUCH_TOLERANCE: f64 = 1e-6;

pub fn run(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    match v.command {
        Command::Integrate => integrate(v, out),
        Command::Derive => derive(v, out),
        Command::Solve => solve(v, out),
        Command::Extremal => extremal(v, out),
        Command::Compare => compare(v, out),
        Command::Verify => match v.check.expect("validated") {
            Check::Touchpoint => verify_touchpoint(v, out),
            Check::MlIdentity => verify_ml_identity(v, out),
            Check::Comparison => verify_comparison(v, out),
        },
        Command::ProbeUniqueness => probe_uniqueness(v, out),
    }
}

fn grid(v: &Validated) -> Result<Arc<Grid>, CliError> {
    let mesh = GradedMesh::new(v.horizon, v.solver.intervals, v.solver.grading)?;
    Ok(Grid::new(mesh, v.psi.clone())?)
}

fn problem(v: &Validated) -> &HybridProblem {
    v.problem.as_ref().expect("validated")
}

fn eval(expr: &Expr, field: &str, args: &[f64]) -> Result<f64, CliError> {
    let value = expr.eval_at(args).map_err(psi_hilfer::Error::from)?;
    if !value.is_finite() {
        return Err(CliError::config(field, format!("evaluates to {value} at {args:?}")));
    }
    Ok(value)
}

/// Sample an expression in `(t, u)` as a weighted function.
fn weighted_samples(grid: &Arc<Grid>, order: FractionalOrder, expr: &Expr, field: &str) -> Result<GridFunction, CliError> {
    let values = (0..grid.len())
        .map(|i| eval(expr, field, &[grid.t(i), grid.u(i)]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridFunction::from_weighted(grid.clone(), order, values)?)
}

/// Sample an expression in `(t, u)` as an ordinary function and weight it.
fn plain_samples(grid: &Arc<Grid>, order: FractionalOrder, expr: &Expr, field: &str) -> Result<GridFunction, CliError> {
    let k = order.weight_exponent();
    let values = (0..grid.len())
        .map(|i| eval(expr, field, &[grid.t(i), grid.u(i)]))
        .collect::<Result<Vec<_>, _>>()?;
    if k == 0.0 {
        return Ok(GridFunction::from_weighted(grid.clone(), order, values)?);
    }
    let weighted = values.iter().enumerate().map(|(i, y)| if i == 0 { 0.0 } else { grid.u(i).powf(k) * y }).collect();
    Ok(GridFunction::from_weighted(grid.clone(), order, weighted)?.with_origin(Some(values[0])))
}

fn operand(v: &Validated, grid: &Arc<Grid>) -> Result<GridFunction, CliError> {
    let h = v.operand.as_ref().expect("validated");
    if v.operand_weighted {
        weighted_samples(grid, v.order, h, "operator.h")
    } else {
        plain_samples(grid, v.order, h, "operator.h")
    }
}

fn nearest_node(grid: &Grid, t: f64) -> usize {
    (0..grid.len()).min_by(|&a, &b| (grid.t(a) - t).abs().total_cmp(&(grid.t(b) - t).abs())).unwrap_or(0)
}

#[derive(Serialize)]
struct ProblemSummary<'a> {
    f: Option<String>,
    g: Option<String>,
    y0: Option<f64>,
    y0_anchor: Option<f64>,
    horizon: f64,
    psi: &'a str,
    mu: f64,
    nu: f64,
    xi: f64,
    intervals: usize,
    grading: f64,
}

fn summary(v: &Validated) -> ProblemSummary<'_> {
    let p = v.problem.as_ref();
    ProblemSummary {
        f: p.map(|p| p.f.to_string()),
        g: p.map(|p| p.g.to_string()),
        y0: p.map(|p| p.y0),
        y0_anchor: p.and_then(|p| p.y0_anchor),
        horizon: v.horizon,
        psi: v.psi.label(),
        mu: v.order.mu(),
        nu: v.order.nu(),
        xi: v.order.xi(),
        intervals: v.solver.intervals,
        grading: v.solver.grading,
    }
}

fn integrate(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let grid = grid(v)?;
    let h = operand(v, &grid)?;
    let integral = rl_integral_profile(&h, v.integral_order)?;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| vec![grid.t(i), grid.u(i), h.weighted()[i], h.unweighted(i), integral.value(&grid, i)])
        .collect();
    out.table("integral.csv", &["t", "psi_increment", "weighted_value", "unweighted_value", "integral"], &rows)?;
    out.json("report.json", &json!({ "command": "integrate", "problem": summary(v), "order": v.integral_order }))?;
    Ok(true)
}

fn derive(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let grid = grid(v)?;
    let h = operand(v, &grid)?;
    let opts = HilferOptions { exclusion_nodes: v.exclusion_nodes };
    let profile = hilfer_profile(&h, v.order, opts)?;
    let rows: Vec<Vec<f64>> = profile
        .iter()
        .map(|(i, d)| vec![grid.t(i), grid.u(i), h.weighted()[i], h.unweighted(i), d])
        .collect();
    out.table("derivative.csv", &["t", "psi_increment", "weighted_value", "unweighted_value", "derivative"], &rows)?;
    out.json(
        "report.json",
        &json!({ "command": "derive", "problem": summary(v), "first_node": profile.first_node() }),
    )?;
    Ok(true)
}

fn solve(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let (y, report) = solve_picard(problem(v), &v.solver, None)?;
    info!("solve: converged={} after {} iterations", report.converged, report.iterations);
    out.solution("solution.csv", &y)?;
    out.json("report.json", &json!({ "command": "solve", "problem": summary(v), "solver": report }))?;
    Ok(report.converged)
}

fn ladder_files(out: &mut OutputDir, prefix: &str, ext: &ExtremalSolution) -> Result<(), CliError> {
    out.solution(&format!("{prefix}.csv"), &ext.solution)?;
    for (level, l) in ext.ladder.iter().enumerate() {
        out.solution(&format!("{prefix}_level_{level:02}.csv"), &l.solution)?;
    }
    Ok(())
}

fn extremal(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let p = problem(v);
    let grid = p.grid(&v.solver)?;
    let (y, base) = solve_picard(p, &v.solver, None)?;
    let max = extremal_on(p, ExtremalKind::Maximal, &v.extremal, &v.solver, grid.clone())?;
    let min = extremal_on(p, ExtremalKind::Minimal, &v.extremal, &v.solver, grid)?;
    // q <= y <= r
    let below = order_violations(&min.solution, &y, false, ORDER_SLACK)?;
    let above = order_violations(&y, &max.solution, false, ORDER_SLACK)?;
    let sandwich = below.is_empty() && above.is_empty();
    out.solution("solution.csv", &y)?;
    ladder_files(out, "maximal", &max)?;
    ladder_files(out, "minimal", &min)?;
    out.json(
        "report.json",
        &json!({
            "command": "extremal",
            "problem": summary(v),
            "config": v.extremal,
            "solver": base,
            "maximal": max.report,
            "minimal": min.report,
            "sandwich": {
                "passed": sandwich,
                "minimal_violations": below,
                "maximal_violations": above,
            },
        }),
    )?;
    Ok(base.converged && max.report.monotone && min.report.monotone && sandwich)
}

fn compare(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let p = problem(v);
    let candidate = v.candidate.as_ref().ok_or_else(|| CliError::config("compare.u", "is required"))?;
    let grid = p.grid(&v.solver)?;
    let u = weighted_samples(&grid, p.order, candidate, "compare.u")?;
    let kind = match v.side {
        psi_hilfer::extremal::BoundSide::Lower => ExtremalKind::Maximal,
        psi_hilfer::extremal::BoundSide::Upper => ExtremalKind::Minimal,
    };
    let extremal = extremal_on(p, kind, &v.extremal, &v.solver, grid)?;
    let verdict = comparison_bound_against(&u, p, v.side, &extremal.solution, DefectOptions::default())?;
    out.solution("candidate.csv", &u)?;
    out.solution("extremal.csv", &extremal.solution)?;
    out.json(
        "report.json",
        &json!({
            "command": "compare",
            "problem": summary(v),
            "verdict": verdict,
            "extremal": extremal.report,
        }),
    )?;
    Ok(verdict.passed && verdict.initial_condition_ok)
}

fn verify_summary(out: &mut OutputDir, check: &str, passed: bool, details: serde_json::Value) -> Result<bool, CliError> {
    out.json("summary.json", &json!({ "command": "verify", "check": check, "passed": passed, "details": details }))?;
    Ok(passed)
}

fn verify_touchpoint(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let grid = grid(v)?;
    let node = nearest_node(&grid, v.touch_t);
    let u1 = grid.u(node);
    let samples = (0..grid.len())
        .map(|i| eval(&v.touch_function, "verify.m", &[grid.t(i), grid.u(i), u1]))
        .collect::<Result<Vec<_>, _>>()?;
    let m = GridFunction::from_weighted(grid.clone(), v.order, samples)?;
    let scale = m.weighted()[..=node].iter().fold(0.0f64, |a, w| a.max(w.abs())) * u1.powf(-v.order.mu());
    let case = TouchpointCase::new(m, node, v.sign, 1e-12)?;
    let derivative = touchpoint_derivative(&case, v.order, HilferOptions { exclusion_nodes: v.exclusion_nodes })?;
    let violation = touchpoint_sign_violation(&case, derivative);
    let scaled = if scale > 0.0 { violation / scale } else { violation };
    let passed = scaled <= TOUCH_TOLERANCE;
    out.solution("touch_function.csv", case.function())?;
    verify_summary(
        out,
        "touchpoint",
        passed,
        json!({
            "problem": summary(v),
            "touch_node": node,
            "touch_t": grid.t(node),
            "sign_before": v.sign,
            "derivative": derivative,
            "violation": violation,
            "scale": scale,
            "scaled_violation": scaled,
            "tolerance": TOUCH_TOLERANCE,
        }),
    )
}

fn verify_ml_identity(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let grid = grid(v)?;
    let opts = HilferOptions { exclusion_nodes: v.exclusion_nodes };
    let sweep = ml_identity_sweep(v.lipschitz, v.order, &grid, v.t_from, opts)?;
    let rows: Vec<Vec<f64>> = ml_identity_profile(v.lipschitz, v.order, &grid, opts)?
        .iter()
        .map(|c| vec![c.t, grid.u(c.node), c.lhs, c.rhs, c.rel_err, c.corrected_rhs, c.corrected_rel_err])
        .collect();
    out.table(
        "ml_identity.csv",
        &["t", "psi_increment", "derivative", "rhs", "rel_err", "corrected_rhs", "corrected_rel_err"],
        &rows,
    )?;
    let passed = sweep.nodes > 0 && sweep.max_rel_err < ML_TOLERANCE;
    verify_summary(
        out,
        "ml-identity",
        passed,
        json!({
            "problem": summary(v),
            "t_from": v.t_from,
            "tolerance": ML_TOLERANCE,
            "sweep": sweep,
            "corrected_passes": sweep.max_corrected_rel_err < ML_TOLERANCE,
        }),
    )
}

fn verify_comparison(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let p = problem(v);
    let eps = v.extremal.eps0;
    // a strict super-solution: raised initial value and source
    let raised = HybridProblem::new(
        p.f.clone(),
        p.g.plus_constant(eps),
        p.y0 + eps,
        p.y0_anchor,
        p.horizon,
        p.psi.clone(),
        p.order,
    )?;
    let (y, ry) = solve_picard(p, &v.solver, None)?;
    let (z, rz) = solve_picard(&raised, &v.solver, Some(&y.map_weighted(|_, w| w + eps)?))?;
    let verdict = strict_comparison_check(&y, &z, p, StrictSide::ZSide, DefectOptions::default())?;
    let ladder: Vec<f64> = (0..6).map(|k| eps * 0.5f64.powi(k)).collect();
    let limit = epsilon_limit_check(&y, p, v.lipschitz, &ladder)?;
    let z_eps = perturbed_super_solution(&y, p, v.lipschitz, eps)?;
    out.solution("sub_solution.csv", &y)?;
    out.solution("super_solution.csv", &z)?;
    out.solution("perturbed.csv", &z_eps)?;
    let passed = ry.converged && rz.converged && verdict.passed && limit.monotone;
    verify_summary(
        out,
        "comparison",
        passed,
        json!({
            "problem": summary(v),
            "eps": eps,
            "lipschitz": v.lipschitz,
            "sub_converged": ry.converged,
            "super_converged": rz.converged,
            "strict": verdict,
            "epsilon_limit": limit,
        }),
    )
}

fn probe_uniqueness(v: &Validated, out: &mut OutputDir) -> Result<bool, CliError> {
    let p = problem(v);
    let grid = p.grid(&v.solver)?;
    let starts = v
        .starts
        .iter()
        .map(|&s| GridFunction::from_weighted(grid.clone(), p.order, vec![s; grid.len()]))
        .collect::<Result<Vec<_>, _>>()?;
    let report = uniqueness_probe(p, v.comparison.as_ref(), &starts, &v.solver)?;
    let passed = report.verdict == UniquenessVerdict::Consistent;
    out.json(
        "report.json",
        &json!({ "command": "probe-uniqueness", "problem": summary(v), "starts": v.starts, "uniqueness": report }),
    )?;
    Ok(passed)
}
