//! Numerical checks of derivative-sign estimates at touch points, strict
//! comparison of sub- and super-solutions, and the Mittag-Leffler
//! eigen-identity used to build perturbed super-solutions.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FractionalOrder, Grid, GridFunction};
use crate::operators::{hilfer_profile, psi_hilfer_derivative, HilferOptions};
use crate::solver::{HybridProblem, Lattice};
use crate::special::{gamma_fn, mittag_leffler_default, ML_ARGUMENT_CAP};
use crate::weighted::{order_violations, weighted_distance};

// ---------------------------------------------------------------- touch points

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignBefore {
    /// `m <= 0` before the touch point; the derivative there is `>= 0`.
    NonPositive,
    /// `m >= 0` before the touch point; the derivative there is `<= 0`.
    NonNegative,
}

/// A function touching zero at `touch_node` from one side.
#[derive(Debug, Clone)]
pub struct TouchpointCase {
    m: GridFunction,
    touch_node: usize,
    sign_before: SignBefore,
}

impl TouchpointCase {
    /// Validates the touching condition `|w(t1)| <= tol * scale` and the sign
    /// of all earlier weighted samples up to `tol * scale`, where `scale` is
    /// the weighted norm on `[0, t1]` (at least 1).
    pub fn new(m: GridFunction, touch_node: usize, sign_before: SignBefore, tol: f64) -> Result<Self> {
        m.grid().check_index(touch_node)?;
        let w = &m.weighted()[..=touch_node];
        let scale = w.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let slack = tol * scale;
        if w[touch_node].abs() > slack {
            return Err(Error::Precondition(format!(
                "touching condition fails: weighted value {} at node {touch_node}",
                w[touch_node]
            )));
        }
        let bad = w[..touch_node].iter().position(|&x| match sign_before {
            SignBefore::NonPositive => x > slack,
            SignBefore::NonNegative => x < -slack,
        });
        if let Some(i) = bad {
            return Err(Error::Precondition(format!(
                "sign condition fails at node {i}: weighted value {}",
                w[i]
            )));
        }
        Ok(Self { m, touch_node, sign_before })
    }

    pub fn function(&self) -> &GridFunction {
        &self.m
    }

    pub fn touch_node(&self) -> usize {
        self.touch_node
    }

    pub fn sign_before(&self) -> SignBefore {
        self.sign_before
    }
}

/// `D^{mu,nu;Psi} m(t1)`.
pub fn touchpoint_derivative(case: &TouchpointCase, order: FractionalOrder, opts: HilferOptions) -> Result<f64> {
    psi_hilfer_derivative(&case.m, order, case.touch_node, opts)
}

/// Amount by which the derivative has the wrong sign (0 when it is right).
pub fn touchpoint_sign_violation(case: &TouchpointCase, derivative: f64) -> f64 {
    match case.sign_before {
        SignBefore::NonPositive => (-derivative).max(0.0),
        SignBefore::NonNegative => derivative.max(0.0),
    }
}

// ---------------------------------------------------------- Mittag-Leffler

fn check_ml_cap(lipschitz: f64, order: FractionalOrder, span: f64) -> Result<()> {
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(Error::invalid("L", format!("must be non-negative, got {lipschitz}")));
    }
    let z = 2.0 * lipschitz * span.powf(order.mu());
    if z > ML_ARGUMENT_CAP {
        return Err(Error::Precondition(format!(
            "2 L (Delta Psi(T))^mu = {z} exceeds the Mittag-Leffler cap {ML_ARGUMENT_CAP}"
        )));
    }
    Ok(())
}

/// `E_mu(2 L (Delta Psi)^mu)` at every node.
pub fn ml_profile(lipschitz: f64, order: FractionalOrder, grid: &Grid) -> Result<Vec<f64>> {
    check_ml_cap(lipschitz, order, grid.span())?;
    let mu = order.mu();
    grid.increments()
        .iter()
        .map(|&u| Ok(mittag_leffler_default(mu, 2.0 * lipschitz * u.powf(mu))?))
        .collect()
}

/// Result of comparing both sides of the eigen-identity at one node.
///
/// `constant_term` is the derivative of the constant leading term of the
/// series, `(Delta Psi)^(-mu) / Gamma(1-mu)`, which vanishes only for
/// `nu = 1`; `corrected_rhs` adds it to `rhs`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MlIdentityCheck {
    pub node: usize,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    pub constant_term: f64,
    pub corrected_rhs: f64,
    pub corrected_rel_err: f64,
}

fn constant_term(order: FractionalOrder, u: f64) -> Result<f64> {
    if order.nu() == 1.0 {
        return Ok(0.0);
    }
    Ok(u.powf(-order.mu()) / gamma_fn(1.0 - order.mu())?)
}

/// Identity checks at every node from `first_node` on.
pub fn ml_identity_profile(
    lipschitz: f64,
    order: FractionalOrder,
    grid: &Arc<Grid>,
    opts: HilferOptions,
) -> Result<Vec<MlIdentityCheck>> {
    let values = ml_profile(lipschitz, order, grid)?;
    // node 0 of a weighted profile is 0 unless xi = 1; the origin keeps E(0) = 1
    let k = order.weight_exponent();
    let weighted: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| if k == 0.0 { *v } else if i == 0 { 0.0 } else { grid.u(i).powf(k) * v })
        .collect();
    let h = GridFunction::from_weighted(grid.clone(), order, weighted)?.with_origin(Some(values[0]));
    let profile = hilfer_profile(&h, order, opts)?;
    profile
        .iter()
        .map(|(i, lhs)| {
            let u = grid.u(i);
            let rhs = 2.0 * lipschitz * values[i];
            let c = constant_term(order, u)?;
            let corrected = rhs + c;
            Ok(MlIdentityCheck {
                node: i,
                t: grid.t(i),
                lhs,
                rhs,
                rel_err: rel_err(lhs, rhs),
                constant_term: c,
                corrected_rhs: corrected,
                corrected_rel_err: rel_err(lhs, corrected),
            })
        })
        .collect()
}

/// Worst errors of the identity over nodes with `t >= t_from`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MlSweepSummary {
    pub lipschitz: f64,
    pub mu: f64,
    pub nu: f64,
    pub nodes: usize,
    pub max_rel_err: f64,
    pub worst_t: f64,
    pub max_corrected_rel_err: f64,
}

pub fn ml_identity_sweep(
    lipschitz: f64,
    order: FractionalOrder,
    grid: &Arc<Grid>,
    t_from: f64,
    opts: HilferOptions,
) -> Result<MlSweepSummary> {
    let checks: Vec<MlIdentityCheck> = ml_identity_profile(lipschitz, order, grid, opts)?
        .into_iter()
        .filter(|c| c.t >= t_from)
        .collect();
    let mut out = MlSweepSummary {
        lipschitz,
        mu: order.mu(),
        nu: order.nu(),
        nodes: checks.len(),
        max_rel_err: 0.0,
        worst_t: f64::NAN,
        max_corrected_rel_err: 0.0,
    };
    for c in &checks {
        if c.rel_err >= out.max_rel_err {
            out.max_rel_err = c.rel_err;
            out.worst_t = c.t;
        }
        out.max_corrected_rel_err = out.max_corrected_rel_err.max(c.corrected_rel_err);
    }
    Ok(out)
}

/// Identity check at a single node.
pub fn verify_ml_identity(
    lipschitz: f64,
    order: FractionalOrder,
    grid: &Arc<Grid>,
    node: usize,
    opts: HilferOptions,
) -> Result<MlIdentityCheck> {
    grid.check_index(node)?;
    ml_identity_profile(lipschitz, order, grid, opts)?
        .into_iter()
        .find(|c| c.node == node)
        .ok_or(Error::ExclusionZone { node, first: opts.exclusion_nodes.max(1) })
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesTermCheck {
    pub k: usize,
    pub numeric: f64,
    pub expected: f64,
    pub rel_err: f64,
}

/// Derivative of the `k`-th series term `(2L)^k (Delta Psi)^{k mu} / Gamma(k mu + 1)`
/// against its closed form `(2L)^k (Delta Psi)^{k mu - mu} / Gamma(k mu + 1 - mu)`,
/// which is the `(k-1)`-th term of `2L E_mu`.
pub fn ml_series_term_checks(
    lipschitz: f64,
    order: FractionalOrder,
    grid: &Arc<Grid>,
    node: usize,
    k_max: usize,
    opts: HilferOptions,
) -> Result<Vec<SeriesTermCheck>> {
    let mu = order.mu();
    let a = 2.0 * lipschitz;
    (1..=k_max)
        .map(|k| {
            let e = k as f64 * mu;
            let coeff = a.powi(k as i32) / gamma_fn(e + 1.0)?;
            let h = GridFunction::power(grid.clone(), order, coeff, e)?;
            let numeric = psi_hilfer_derivative(&h, order, node, opts)?;
            let expected = a.powi(k as i32) * grid.u(node).powf(e - mu) / gamma_fn(e + 1.0 - mu)?;
            Ok(SeriesTermCheck { k, numeric, expected, rel_err: rel_err(numeric, expected) })
        })
        .collect()
}

// ------------------------------------------------------------- defects

/// Settings for sub/super-solution defect checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectOptions {
    /// Tolerance relative to `max(1, |D|, |g|)` at each node.
    pub rel_tol: f64,
    /// Nodes below this index are skipped: close to the origin the nodal
    /// derivative has an error that depends on the node index rather than on
    /// the mesh size.
    pub startup_nodes: usize,
    pub hilfer: HilferOptions,
}

impl Default for DefectOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-2, startup_nodes: 16, hilfer: HilferOptions::default() }
    }
}

/// `D[y / f(t,y)] - g(t,y)` at nodes from `first_node` on.
#[derive(Debug, Clone, Serialize)]
pub struct DefectProfile {
    pub first_node: usize,
    pub defect: Vec<f64>,
    pub tolerance: Vec<f64>,
}

impl DefectProfile {
    /// Nodes where the defect is above `+tolerance`.
    pub fn above(&self) -> Vec<usize> {
        self.nodes_where(|d, tol| d > tol)
    }

    /// Nodes where the defect is below `-tolerance`.
    pub fn below(&self) -> Vec<usize> {
        self.nodes_where(|d, tol| d < -tol)
    }

    fn nodes_where(&self, bad: impl Fn(f64, f64) -> bool) -> Vec<usize> {
        self.defect
            .iter()
            .zip(&self.tolerance)
            .enumerate()
            .filter(|(_, (d, t))| bad(**d, **t))
            .map(|(k, _)| k + self.first_node)
            .collect()
    }

    pub fn max(&self) -> f64 {
        self.defect.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.defect.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// The ratio `y / f(t, y)` as a function in the same weighted space.
pub fn ratio_function(y: &GridFunction, problem: &HybridProblem) -> Result<GridFunction> {
    let grid = y.grid();
    let order = y.order();
    let mut weighted = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let w = y.weighted()[i];
        let value = if i == 0 {
            if order.is_unweighted() {
                problem.ratio(0.0, w)?
            } else {
                w / problem.eval_f(0.0, problem.anchor())?
            }
        } else {
            w / problem.eval_f(grid.t(i), y.unweighted(i))?
        };
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "ratio y/f", t: grid.t(i) });
        }
        weighted.push(value);
    }
    let origin = match (order.is_unweighted(), y.origin()) {
        (false, Some(v)) if weighted[0] == 0.0 => Some(v / problem.eval_f(0.0, v)?),
        _ => None,
    };
    Ok(GridFunction::from_weighted(grid.clone(), order, weighted)?.with_origin(origin))
}

pub fn defect_profile(y: &GridFunction, problem: &HybridProblem, opts: DefectOptions) -> Result<DefectProfile> {
    if y.order() != problem.order {
        return Err(Error::GridMismatch);
    }
    let ratio = ratio_function(y, problem)?;
    let derivative = hilfer_profile(&ratio, problem.order, opts.hilfer)?;
    let grid = y.grid();
    let first = opts.startup_nodes.max(derivative.first_node()).min(derivative.last_node());
    let mut defect = Vec::new();
    let mut tolerance = Vec::new();
    for (i, d) in derivative.iter().filter(|(i, _)| *i >= first) {
        let g = problem.eval_g(grid.t(i), y.unweighted(i))?;
        defect.push(d - g);
        tolerance.push(opts.rel_tol * 1f64.max(d.abs()).max(g.abs()));
    }
    Ok(DefectProfile { first_node: first, defect, tolerance })
}

// ---------------------------------------------------------- comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrictSide {
    YSide,
    ZSide,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub passed: bool,
    pub violating_nodes: Vec<usize>,
    pub which_strict: StrictSide,
    /// Smallest weighted gap `z - y` and where it occurs.
    pub min_gap: f64,
    pub min_gap_node: usize,
    pub y_defect_max: f64,
    pub z_defect_min: f64,
}

/// Check `y < z` strictly in weighted order for a sub-solution `y` and a
/// super-solution `z` with `y(0) < z(0)` in the weighted sense.
pub fn strict_comparison_check(
    y: &GridFunction,
    z: &GridFunction,
    problem: &HybridProblem,
    which_strict: StrictSide,
    opts: DefectOptions,
) -> Result<ComparisonVerdict> {
    y.ensure_same_space(z)?;
    let (y0, z0) = (y.weighted()[0], z.weighted()[0]);
    if !(y0 < z0) {
        return Err(Error::Precondition(format!(
            "weighted initial values must satisfy y0 < z0, got {y0} and {z0}"
        )));
    }
    let dy = defect_profile(y, problem, opts)?;
    if let Some(&i) = dy.above().first() {
        return Err(Error::Precondition(format!("y is not a sub-solution: defect above tolerance at node {i}")));
    }
    let dz = defect_profile(z, problem, opts)?;
    if let Some(&i) = dz.below().first() {
        return Err(Error::Precondition(format!("z is not a super-solution: defect below tolerance at node {i}")));
    }
    let violating_nodes = order_violations(y, z, true, 0.0)?;
    let (min_gap_node, min_gap) = y
        .weighted()
        .iter()
        .zip(z.weighted())
        .map(|(a, b)| b - a)
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, g)| if g < acc.1 { (i, g) } else { acc });
    Ok(ComparisonVerdict {
        passed: violating_nodes.is_empty(),
        violating_nodes,
        which_strict,
        min_gap,
        min_gap_node,
        y_defect_max: dy.max(),
        z_defect_min: dz.min(),
    })
}

// ------------------------------------------------- lattice hypotheses

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LatticeCheck {
    pub ok: bool,
    /// Largest violation found (0 when `ok`).
    pub worst: f64,
    pub at_t: f64,
    pub at_y: f64,
}

/// `v -> v / f(t, v)` strictly increasing on the lattice.
pub fn check_ratio_monotone(problem: &HybridProblem, lattice: &Lattice) -> Result<LatticeCheck> {
    let ys = lattice.values();
    let mut out = LatticeCheck { ok: true, worst: 0.0, at_t: 0.0, at_y: 0.0 };
    for t in lattice.times(problem.horizon) {
        let t = if t == 0.0 { 0.0 } else { t };
        let mut prev: Option<f64> = None;
        for &y in &ys {
            let r = y / problem.eval_f(t, y)?;
            if let Some(p) = prev {
                if !(r > p) && p - r >= out.worst {
                    out = LatticeCheck { ok: false, worst: p - r, at_t: t, at_y: y };
                }
            }
            prev = Some(r);
        }
    }
    Ok(out)
}

/// One-sided condition `g(t,x1) - g(t,x2) <= L (x1/f(t,x1) - x2/f(t,x2))`
/// for `x1 >= x2` on the lattice.
pub fn check_one_sided_lipschitz(problem: &HybridProblem, lipschitz: f64, lattice: &Lattice) -> Result<LatticeCheck> {
    let ys = lattice.values();
    let mut out = LatticeCheck { ok: true, worst: 0.0, at_t: 0.0, at_y: 0.0 };
    for t in lattice.times(problem.horizon) {
        let gs = ys.iter().map(|&y| problem.eval_g(t, y)).collect::<Result<Vec<_>>>()?;
        let rs = ys.iter().map(|&y| Ok(y / problem.eval_f(t, y)?)).collect::<Result<Vec<_>>>()?;
        for i in 0..ys.len() {
            for j in 0..i {
                let excess = (gs[i] - gs[j]) - lipschitz * (rs[i] - rs[j]);
                let slack = 1e-12 * gs[i].abs().max(gs[j].abs()).max(1.0);
                if excess > slack && excess > out.worst {
                    out = LatticeCheck { ok: false, worst: excess, at_t: t, at_y: ys[i] };
                }
            }
        }
    }
    Ok(out)
}

// ----------------------------------------------- perturbed super-solutions

fn lattice_for(z: &GridFunction) -> Result<Lattice> {
    let span = z.unweighted_values()[1..]
        .iter()
        .filter(|v| v.is_finite())
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let y = (2.0 * span).min(1e6);
    Lattice::new(9, 81, -y, y)
}

/// Solve `v / f(t, v) = target` for `v`, starting the bracket at `start`.
fn invert_ratio(
    problem: &HybridProblem,
    t: f64,
    fixed_arg: Option<f64>,
    target: f64,
    start: f64,
    node: usize,
) -> Result<f64> {
    let ratio = |v: f64| -> Result<f64> { Ok(v / problem.eval_f(t, fixed_arg.unwrap_or(v))?) };
    let fail = |reason: String| Error::Bracketing { node, reason };
    let r0 = ratio(start)?;
    if r0 == target {
        return Ok(start);
    }
    let dir = if r0 < target { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (start, start);
    let mut step = start.abs().max(1.0) * 1e-3;
    let mut found = false;
    for _ in 0..200 {
        let cand = start + dir * step;
        let rc = ratio(cand)?;
        if (dir > 0.0 && rc >= target) || (dir < 0.0 && rc <= target) {
            if dir > 0.0 {
                hi = cand;
            } else {
                lo = cand;
            }
            found = true;
            break;
        }
        if dir > 0.0 {
            lo = cand;
        } else {
            hi = cand;
        }
        step *= 2.0;
        if !step.is_finite() {
            break;
        }
    }
    if !found {
        return Err(fail(format!("target ratio {target} not reached")));
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `z_eps` with `z_eps / f(t, z_eps) = z / f(t, z) + eps E_mu(2 L (Delta Psi)^mu)`.
pub fn perturbed_super_solution(
    z: &GridFunction,
    problem: &HybridProblem,
    lipschitz: f64,
    eps: f64,
) -> Result<GridFunction> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::invalid("eps", format!("must be non-negative, got {eps}")));
    }
    if z.order() != problem.order {
        return Err(Error::GridMismatch);
    }
    let grid = z.grid().clone();
    let ml = ml_profile(lipschitz, problem.order, &grid)?;
    if eps == 0.0 {
        return Ok(z.clone());
    }
    let lattice = lattice_for(z)?;
    let mono = check_ratio_monotone(problem, &lattice)?;
    if !mono.ok {
        return Err(Error::Hypothesis(format!(
            "v / f(t, v) is not increasing near t = {}, v = {}",
            mono.at_t, mono.at_y
        )));
    }
    let order = problem.order;
    let k = order.weight_exponent();
    let linear = !problem.f.uses_variable("y");
    let nodes: Vec<usize> = (0..grid.len()).collect();
    let weighted: Vec<f64> = nodes
        .par_iter()
        .map(|&i| -> Result<f64> {
            let t = grid.t(i);
            let w = z.weighted()[i];
            if i == 0 {
                if !order.is_unweighted() {
                    return Ok(w);
                }
                let fixed = problem.y0_anchor;
                let target = problem.ratio(0.0, w)? + eps * ml[0];
                if linear || fixed.is_some() {
                    return Ok(target * problem.eval_f(0.0, fixed.unwrap_or(w))?);
                }
                return invert_ratio(problem, 0.0, None, target, w, 0);
            }
            let u = grid.u(i);
            let zi = z.unweighted(i);
            // work with unweighted values so that f sees y itself
            let target = zi / problem.eval_f(t, zi)? + eps * ml[i];
            let v = if linear {
                target * problem.eval_f(t, zi)?
            } else {
                invert_ratio(problem, t, None, target, zi, i)?
            };
            Ok(v * u.powf(k))
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::from_weighted(grid, order, weighted)
}

/// `||z_eps - z||` along a decreasing sequence of `eps` values.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonLimit {
    pub eps: Vec<f64>,
    pub distances: Vec<f64>,
    pub monotone: bool,
}

pub fn epsilon_limit_check(
    z: &GridFunction,
    problem: &HybridProblem,
    lipschitz: f64,
    eps: &[f64],
) -> Result<EpsilonLimit> {
    let distances = eps
        .iter()
        .map(|&e| Ok(weighted_distance(&perturbed_super_solution(z, problem, lipschitz, e)?, z)?.value))
        .collect::<Result<Vec<_>>>()?;
    let monotone = distances.windows(2).all(|w| w[1] <= w[0]);
    Ok(EpsilonLimit { eps: eps.to_vec(), distances, monotone })
}
