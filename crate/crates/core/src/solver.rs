//! Hybrid problems `D^{mu,nu;Psi}[y / f(t,y)] = g(t,y)` with weighted initial
//! value `y0`, solved by Picard iteration on the equivalent integral equation
//!
//! `y(t) = f(t,y(t)) { c0 (Delta Psi)^(xi-1) + I^mu g(., y(.))(t) }`,
//! `c0 = y0 / f(0, anchor)`.

use std::sync::Arc;

use log::{debug, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{FractionalOrder, GradedMesh, Grid, GridFunction, PowerTerm};
use crate::psi::PsiFunction;
use crate::quadrature::{integrate_power, RlOperator};
use crate::special::gamma_fn;
use crate::weighted::weighted_distance;

/// Points of a `(t, y)` sampling lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lattice {
    pub nt: usize,
    pub ny: usize,
    pub y_min: f64,
    pub y_max: f64,
}

impl Lattice {
    pub fn new(nt: usize, ny: usize, y_min: f64, y_max: f64) -> Result<Self> {
        if nt < 1 || ny < 2 {
            return Err(Error::invalid("lattice", "needs nt >= 1 and ny >= 2"));
        }
        if !(y_min.is_finite() && y_max.is_finite() && y_min < y_max) {
            return Err(Error::invalid("lattice", format!("bad y range [{y_min}, {y_max}]")));
        }
        Ok(Self { nt, ny, y_min, y_max })
    }

    /// Default lattice: 17 times by 41 values on `[-Y, Y]`, `Y = 10 max(1, |y0|)`.
    pub fn around(y0: f64) -> Self {
        let y = 10.0 * y0.abs().max(1.0);
        Self { nt: 17, ny: 41, y_min: -y, y_max: y }
    }

    pub fn times(&self, horizon: f64) -> Vec<f64> {
        if self.nt == 1 {
            return vec![0.0];
        }
        (0..self.nt).map(|k| horizon * k as f64 / (self.nt - 1) as f64).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.ny)
            .map(|k| self.y_min + (self.y_max - self.y_min) * k as f64 / (self.ny - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct HybridProblem {
    pub f: Expr,
    pub g: Expr,
    pub y0: f64,
    pub y0_anchor: Option<f64>,
    pub horizon: f64,
    pub psi: PsiFunction,
    pub order: FractionalOrder,
}

fn check_ty(e: &Expr, which: &'static str) -> Result<()> {
    let vars = e.variables();
    if vars.len() != 2 || vars[0] != "t" || vars[1] != "y" {
        return Err(Error::invalid(which, "must be an expression in (t, y)"));
    }
    Ok(())
}

impl HybridProblem {
    /// Build and validate a problem; `f` must not vanish on the default lattice.
    pub fn new(
        f: Expr,
        g: Expr,
        y0: f64,
        y0_anchor: Option<f64>,
        horizon: f64,
        psi: PsiFunction,
        order: FractionalOrder,
    ) -> Result<Self> {
        check_ty(&f, "f")?;
        check_ty(&g, "g")?;
        if !y0.is_finite() {
            return Err(Error::invalid("y0", "must be finite"));
        }
        if let Some(a) = y0_anchor {
            if !a.is_finite() {
                return Err(Error::invalid("y0-anchor", "must be finite"));
            }
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be positive, got {horizon}")));
        }
        let p = Self { f, g, y0, y0_anchor, horizon, psi, order };
        p.check_nonvanishing(&Lattice::around(y0))?;
        let c0 = p.c0()?;
        if !c0.is_finite() {
            return Err(Error::Hypothesis(format!("c0 = {c0} is not finite")));
        }
        Ok(p)
    }

    /// Parse `f` and `g` from source and validate.
    #[allow(clippy::too_many_arguments)]
    pub fn from_source(
        f: &str,
        g: &str,
        y0: f64,
        y0_anchor: Option<f64>,
        horizon: f64,
        psi: PsiFunction,
        order: FractionalOrder,
    ) -> Result<Self> {
        let f = Expr::parse(f, &["t", "y"])?;
        let g = Expr::parse(g, &["t", "y"])?;
        Self::new(f, g, y0, y0_anchor, horizon, psi, order)
    }

    /// `|f| > 0` and finite on the lattice.
    pub fn check_nonvanishing(&self, lattice: &Lattice) -> Result<()> {
        for t in lattice.times(self.horizon) {
            for y in lattice.values() {
                let v = self.eval_f(t, y)?;
                if !(v.is_finite() && v != 0.0) {
                    return Err(Error::Hypothesis(format!(
                        "f must be finite and nonzero, but f({t}, {y}) = {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn anchor(&self) -> f64 {
        self.y0_anchor.unwrap_or(self.y0)
    }

    pub fn eval_f(&self, t: f64, y: f64) -> Result<f64> {
        Ok(self.f.eval_at(&[t, y])?)
    }

    pub fn eval_g(&self, t: f64, y: f64) -> Result<f64> {
        Ok(self.g.eval_at(&[t, y])?)
    }

    /// `y0 / f(0, anchor)`.
    pub fn c0(&self) -> Result<f64> {
        let f0 = self.eval_f(0.0, self.anchor())?;
        if f0 == 0.0 || !f0.is_finite() {
            return Err(Error::Hypothesis(format!("f(0, anchor) = {f0}")));
        }
        Ok(self.y0 / f0)
    }

    /// The problem with `g + eps` and initial value `y0 + eps`; the anchor
    /// is kept when one was declared.
    pub fn perturbed(&self, eps: f64) -> HybridProblem {
        HybridProblem {
            g: self.g.plus_constant(eps),
            y0: self.y0 + eps,
            ..self.clone()
        }
    }

    /// Reflected problem for `-y`: `f~(t,v) = f(t,-v)`, `g~(t,v) = -g(t,-v)`.
    pub fn negated(&self) -> HybridProblem {
        HybridProblem {
            f: self.f.with_negated_variable("y"),
            g: self.g.with_negated_variable("y").negated(),
            y0: -self.y0,
            y0_anchor: self.y0_anchor.map(|a| -a),
            ..self.clone()
        }
    }

    pub fn grid(&self, config: &SolverConfig) -> Result<Arc<Grid>> {
        Grid::new(GradedMesh::new(self.horizon, config.intervals, config.grading)?, self.psi.clone())
    }

    /// `Psi(T) - Psi(0)`.
    pub fn span(&self) -> Result<f64> {
        self.psi.increment(self.horizon)
    }

    /// The ratio `v / f(t, v)`; at `t = 0` the declared anchor (if any)
    /// replaces the second argument of `f`.
    pub fn ratio(&self, t: f64, v: f64) -> Result<f64> {
        let arg = if t == 0.0 { self.y0_anchor.unwrap_or(v) } else { v };
        Ok(v / self.eval_f(t, arg)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    UserSupplied,
    Estimated,
}

/// Constants of the existence hypotheses: Lipschitz constant of `f` in `y`,
/// bound on `|g|`, bound on `|f|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceParams {
    pub lipschitz: f64,
    pub h_norm: f64,
    pub f_bound: f64,
    pub source: ParamSource,
}

impl ExistenceParams {
    pub fn new(lipschitz: f64, h_norm: f64, f_bound: f64) -> Result<Self> {
        for (name, v) in [("L", lipschitz), ("h_norm", h_norm), ("K", f_bound)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if f_bound <= 0.0 {
            return Err(Error::invalid("K", "must be positive"));
        }
        Ok(Self { lipschitz, h_norm, f_bound, source: ParamSource::UserSupplied })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExistenceMode {
    /// Exponent `mu` on `Delta Psi(T)`.
    Printed,
    /// Exponent `mu + 1 - xi`.
    Proof,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceVerdict {
    pub value: f64,
    pub ok: bool,
    pub mode: ExistenceMode,
}

/// `L { |c0| + h_norm (Delta Psi(T))^e / Gamma(mu+1) }` and whether it is `< 1`.
pub fn existence_value(
    c0: f64,
    span: f64,
    order: FractionalOrder,
    params: &ExistenceParams,
    mode: ExistenceMode,
) -> Result<ExistenceVerdict> {
    let mu = order.mu();
    let e = match mode {
        ExistenceMode::Printed => mu,
        ExistenceMode::Proof => mu + 1.0 - order.xi(),
    };
    let value = params.lipschitz * (c0.abs() + params.h_norm * span.powf(e) / gamma_fn(mu + 1.0)?);
    Ok(ExistenceVerdict { value, ok: value < 1.0, mode })
}

pub fn existence_check(
    problem: &HybridProblem,
    params: &ExistenceParams,
    mode: ExistenceMode,
) -> Result<ExistenceVerdict> {
    existence_value(problem.c0()?, problem.span()?, problem.order, params, mode)
}

/// Radius `K { |c0| + h_norm (Delta Psi(T))^(mu+1-xi) / Gamma(mu+1) }`.
pub fn ball_radius(problem: &HybridProblem, params: &ExistenceParams) -> Result<f64> {
    let mu = problem.order.mu();
    let e = mu + 1.0 - problem.order.xi();
    Ok(params.f_bound
        * (problem.c0()?.abs() + params.h_norm * problem.span()?.powf(e) / gamma_fn(mu + 1.0)?))
}

/// Sampled lower estimates of the existence constants.
pub fn estimate_params(problem: &HybridProblem, lattice: &Lattice) -> Result<ExistenceParams> {
    let ys = lattice.values();
    let mut lipschitz: f64 = 0.0;
    let mut h_norm: f64 = 0.0;
    let mut f_bound: f64 = 0.0;
    for t in lattice.times(problem.horizon) {
        let fs = ys.iter().map(|&y| problem.eval_f(t, y)).collect::<Result<Vec<_>>>()?;
        for (i, (&fy, &y)) in fs.iter().zip(&ys).enumerate() {
            f_bound = f_bound.max(fy.abs());
            h_norm = h_norm.max(problem.eval_g(t, y)?.abs());
            for (&fz, &z) in fs[i + 1..].iter().zip(&ys[i + 1..]) {
                lipschitz = lipschitz.max((fy - fz).abs() / (y - z).abs());
            }
        }
    }
    Ok(ExistenceParams { lipschitz, h_norm, f_bound, source: ParamSource::Estimated })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub intervals: usize,
    pub grading: f64,
    pub picard_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { intervals: 1024, grading: 2.0, picard_tol: 1e-10, max_iters: 500, damping: 1.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max-iters", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping", "must be in (0,1]"));
        }
        GradedMesh::new(1.0, self.intervals, self.grading).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub existence_value: f64,
    pub existence_value_proof: f64,
    pub existence_ok: bool,
    pub radius_r: f64,
    pub existence_params: ExistenceParams,
    /// Weighted norms of successive Picard increments.
    pub increments: Vec<f64>,
}

/// Picard map with cached quadrature weights.
#[derive(Debug, Clone)]
pub struct PicardMap {
    problem: HybridProblem,
    grid: Arc<Grid>,
    integral: RlOperator,
    c0: f64,
}

/// Tiny increments, relative to the first mesh increment, used to probe the
/// growth of `g` near `t = 0`.
const PROBE_FACTORS: [f64; 2] = [1e-6, 1e-12];

impl PicardMap {
    pub fn new(problem: &HybridProblem, grid: Arc<Grid>) -> Result<Self> {
        let integral = RlOperator::new(grid.clone(), problem.order.mu())?;
        Ok(Self { problem: problem.clone(), grid, integral, c0: problem.c0()? })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn problem(&self) -> &HybridProblem {
        &self.problem
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    fn check(&self, y: &GridFunction) -> Result<()> {
        if y.order() != self.problem.order
            || !(Arc::ptr_eq(y.grid(), &self.grid) || **y.grid() == *self.grid)
        {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Weighted limit of `(Delta Psi)^(1-xi) g(t, y(t))` at `t = 0`, probed
    /// along `y ~ w0 (Delta Psi)^(xi-1)`. Two probes remove a bounded part of
    /// `g`, which otherwise decays only like `(Delta Psi)^(1-xi)`.
    fn source_lead(&self, w0: f64) -> f64 {
        let k = self.problem.order.weight_exponent();
        if k == 0.0 || w0 == 0.0 {
            return 0.0;
        }
        let probe = |factor: f64| -> Option<(f64, f64)> {
            let u = factor * self.grid.u(1);
            let scale = u.powf(k);
            let v = self.problem.eval_g(0.0, w0 / scale).ok()?;
            (v.is_finite() && (scale * v).is_finite()).then_some((scale, scale * v))
        };
        match (probe(PROBE_FACTORS[0]), probe(PROBE_FACTORS[1])) {
            (Some((sa, ca)), Some((sb, cb))) => {
                // c(u) = c + b u^k, solved for c
                let lead = (cb * sa - ca * sb) / (sa - sb);
                if lead.is_finite() { lead } else { 0.0 }
            }
            _ => 0.0,
        }
    }

    /// `g(t_i, y_i)` split into a leading weighted singularity and a regular
    /// remainder; node 0 of the remainder takes the value at the first node.
    fn source_terms(&self, y: &GridFunction) -> Result<(Option<PowerTerm>, Vec<f64>)> {
        let order = self.problem.order;
        let n = self.grid.len();
        let mut samples = vec![0.0; n];
        for (i, s) in samples.iter_mut().enumerate().skip(1) {
            let t = self.grid.t(i);
            *s = self.problem.eval_g(t, y.unweighted(i))?;
            if !s.is_finite() {
                return Err(Error::NonFinite { what: "g", t });
            }
        }
        if order.is_unweighted() {
            samples[0] = self.problem.eval_g(0.0, y.weighted()[0])?;
            if !samples[0].is_finite() {
                return Err(Error::NonFinite { what: "g", t: 0.0 });
            }
            return Ok((None, samples));
        }
        let lead_coeff = self.source_lead(y.weighted()[0]);
        let exponent = -order.weight_exponent();
        if lead_coeff != 0.0 {
            for (i, s) in samples.iter_mut().enumerate().skip(1) {
                *s -= lead_coeff * self.grid.u(i).powf(exponent);
            }
        }
        samples[0] = samples[1];
        let lead = (lead_coeff != 0.0).then_some(PowerTerm { coeff: lead_coeff, exponent });
        Ok((lead, samples))
    }

    /// One application of the integral-equation map, in weighted form.
    pub fn apply(&self, y: &GridFunction) -> Result<GridFunction> {
        self.check(y)?;
        let order = self.problem.order;
        let k = order.weight_exponent();
        let (lead, regular) = self.source_terms(y)?;
        let integral = self.integral.apply_regular(&regular);
        let lead = lead.map(|t| integrate_power(t, order.mu())).transpose()?;
        let n = self.grid.len();
        let mut weighted = vec![0.0; n];
        weighted[0] = self.problem.y0;
        for (i, w) in weighted.iter_mut().enumerate().skip(1) {
            let t = self.grid.t(i);
            let u = self.grid.u(i);
            let fv = self.problem.eval_f(t, y.unweighted(i))?;
            if fv == 0.0 || !fv.is_finite() {
                return Err(Error::Hypothesis(format!("f({t}, y) = {fv}")));
            }
            let int = integral[i] + lead.map_or(0.0, |p| p.at(u));
            *w = fv * (self.c0 + u.powf(k) * int);
            if !w.is_finite() {
                return Err(Error::NonFinite { what: "Picard iterate", t });
            }
        }
        GridFunction::from_weighted(self.grid.clone(), order, weighted)
    }

    /// Weighted distance between `y` and its image.
    pub fn residual(&self, y: &GridFunction) -> Result<f64> {
        Ok(weighted_distance(y, &self.apply(y)?)?.value)
    }

    /// Iterate from `initial` (weighted samples equal to `y0` by default).
    pub fn iterate(
        &self,
        config: &SolverConfig,
        initial: Option<&GridFunction>,
    ) -> Result<(GridFunction, bool, Vec<f64>)> {
        config.validate()?;
        let mut y = match initial {
            Some(y) => {
                self.check(y)?;
                y.clone()
            }
            None => GridFunction::from_weighted(
                self.grid.clone(),
                self.problem.order,
                vec![self.problem.y0; self.grid.len()],
            )?,
        };
        let mut increments = Vec::new();
        for _ in 0..config.max_iters {
            let image = self.apply(&y)?;
            let next = if config.damping == 1.0 {
                image
            } else {
                y.lincomb(1.0 - config.damping, &image, config.damping)?
            };
            let step = weighted_distance(&next, &y)?.value;
            increments.push(step);
            y = next;
            if step < config.picard_tol {
                return Ok((y, true, increments));
            }
        }
        Ok((y, false, increments))
    }
}

/// One Picard step on the problem's own grid.
pub fn picard_step(y: &GridFunction, problem: &HybridProblem) -> Result<GridFunction> {
    PicardMap::new(problem, y.grid().clone())?.apply(y)
}

/// Fixed-point defect `||y - P(y)||`.
pub fn residual(y: &GridFunction, problem: &HybridProblem) -> Result<f64> {
    PicardMap::new(problem, y.grid().clone())?.residual(y)
}

/// Solve with estimated existence constants on the default lattice.
pub fn solve_picard(
    problem: &HybridProblem,
    config: &SolverConfig,
    initial: Option<&GridFunction>,
) -> Result<(GridFunction, SolverReport)> {
    solve_picard_with(problem, config, initial, None)
}

/// Solve, reporting the existence bound with `params` when supplied.
pub fn solve_picard_with(
    problem: &HybridProblem,
    config: &SolverConfig,
    initial: Option<&GridFunction>,
    params: Option<ExistenceParams>,
) -> Result<(GridFunction, SolverReport)> {
    config.validate()?;
    let params = match params {
        Some(p) => p,
        None => estimate_params(problem, &Lattice::around(problem.y0))?,
    };
    let printed = existence_check(problem, &params, ExistenceMode::Printed)?;
    let proof = existence_check(problem, &params, ExistenceMode::Proof)?;
    if !printed.ok {
        warn!("existence bound not met: value {:.4} >= 1", printed.value);
    }
    let grid = match initial {
        Some(y) => y.grid().clone(),
        None => problem.grid(config)?,
    };
    let map = PicardMap::new(problem, grid)?;
    let (solution, converged, increments) = map.iterate(config, initial)?;
    let final_residual = map.residual(&solution)?;
    debug!("picard: converged={converged} iterations={} residual={final_residual:.3e}", increments.len());
    let report = SolverReport {
        converged,
        iterations: increments.len(),
        final_residual,
        existence_value: printed.value,
        existence_value_proof: proof.value,
        existence_ok: printed.ok,
        radius_r: ball_radius(problem, &params)?,
        existence_params: params,
        increments,
    };
    Ok((solution, report))
}
