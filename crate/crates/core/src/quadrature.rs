//! Product-integration weights for weakly singular kernels `(u_n - s)^(b-1)`
//! on a nonuniform grid in the increment variable.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, PowerTerm, SplitFunction};
use crate::special::gamma_fn;

const SERIES_SWITCH: f64 = 0.25;

/// Moments of `w^(b-1)` over `[lo, hi]` against the two linear hat
/// functions, where `w = u_n - s` and `hi = u_n - u_j`, `lo = u_n - u_{j+1}`.
/// Returns `(m0, left, right)`: the plain moment and the weights attached to
/// `u_j` and `u_{j+1}`. `hi_pow` must equal `hi^b`, `lo_pow` must equal `lo^b`.
fn hat_moments(hi: f64, lo: f64, hi_pow: f64, lo_pow: f64, b: f64) -> (f64, f64, f64) {
    let delta = hi - lo;
    let x = delta / hi;
    let (m0, m1) = if x <= SERIES_SWITCH {
        // expand (1 - s)^(b-1) around s = 0, avoiding cancellation in hi^b - lo^b
        let mut coef = 1.0;
        let mut xk = x;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for k in 0..200 {
            let kf = k as f64;
            let t0 = coef * xk / (kf + 1.0);
            s0 += t0;
            s1 += coef * xk * x / (kf + 2.0);
            if t0.abs() <= 1e-17 * s0.abs() {
                break;
            }
            coef *= (kf + 1.0 - b) / (kf + 1.0);
            xk *= x;
        }
        (hi_pow * s0, hi_pow * hi * s1)
    } else {
        let m0 = (hi_pow - lo_pow) / b;
        let m1 = hi * m0 - (hi * hi_pow - lo * lo_pow) / (b + 1.0);
        (m0, m1)
    };
    let right = m1 / delta;
    (m0, m0 - right, right)
}

fn check_order(order: f64) -> Result<()> {
    if !(order.is_finite() && order >= 0.0) {
        return Err(Error::invalid("order", format!("must be non-negative, got {order}")));
    }
    Ok(())
}

/// Trapezoid-type weights `W_{n,j}` with
/// `(1/Gamma(b)) int_0^{u_n} (u_n - s)^(b-1) p(s) ds ~ sum_j W_{n,j} p_j`.
pub fn product_weights_row(u: &[f64], n: usize, order: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    if n == 0 {
        return row;
    }
    let scale = 1.0 / gamma_fn(order).unwrap_or(f64::INFINITY);
    let un = u[n];
    let pows: Vec<f64> = (0..=n).map(|j| (un - u[j]).powf(order)).collect();
    for j in 0..n {
        let (_, left, right) = hat_moments(un - u[j], un - u[j + 1], pows[j], pows[j + 1], order);
        row[j] += left * scale;
        row[j + 1] += right * scale;
    }
    row
}

/// `(1/Gamma(a)) int_0^{u_n} (u_n - s)^(a-1) F'(s) ds` from nodal samples of
/// `F`. On every interval `[u_j, u_{j+1}]` the derivative of the quadratic
/// through `u_{j-1}, u_j, u_{j+1}` (through `u_0, u_1, u_2` on the first
/// interval) is integrated exactly against the kernel.
pub fn derivative_integral_at(u: &[f64], f: &[f64], n: usize, order: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let scale = 1.0 / gamma_fn(order).unwrap_or(f64::INFINITY);
    let un = u[n];
    let mut lo_pow = 0.0;
    let mut acc = 0.0;
    for j in (0..n).rev() {
        let hi = un - u[j];
        let lo = un - u[j + 1];
        let hi_pow = hi.powf(order);
        let (m0, left, right) = hat_moments(hi, lo, hi_pow, lo_pow, order);
        lo_pow = hi_pow;
        let h2 = u[j + 1] - u[j];
        let slope = (f[j + 1] - f[j]) / h2;
        if j == 0 && f.len() < 3 {
            acc += m0 * slope;
        } else if j == 0 {
            let h3 = u[2] - u[1];
            let next = (f[2] - f[1]) / h3;
            let curv = (next - slope) / (h2 + h3);
            let d_left = slope - curv * h2;
            let d_right = slope + curv * h2;
            acc += left * d_left + right * d_right;
        } else {
            let h1 = u[j] - u[j - 1];
            let back = (f[j] - f[j - 1]) / h1;
            let curv = (slope - back) / (h1 + h2);
            let d_left = back + curv * h1;
            let d_right = back + curv * (h1 + 2.0 * h2);
            acc += left * d_left + right * d_right;
        }
    }
    acc * scale
}

/// Exact integral of a power term: `I^b (c u^g) = c Gamma(g+1)/Gamma(g+b+1) u^(g+b)`.
pub fn integrate_power(term: PowerTerm, order: f64) -> Result<PowerTerm> {
    if order == 0.0 {
        return Ok(term);
    }
    if term.exponent <= -1.0 {
        return Err(Error::NotIntegrable { exponent: term.exponent });
    }
    let ratio = (crate::special::ln_gamma(term.exponent + 1.0)?
        - crate::special::ln_gamma(term.exponent + order + 1.0)?)
    .exp();
    Ok(PowerTerm { coeff: term.coeff * ratio, exponent: term.exponent + order })
}

/// Fractional integral of a fixed order on a fixed grid, with all weight
/// rows cached.
#[derive(Debug, Clone)]
pub struct RlOperator {
    grid: Arc<Grid>,
    order: f64,
    rows: Vec<Vec<f64>>,
}

impl RlOperator {
    pub fn new(grid: Arc<Grid>, order: f64) -> Result<Self> {
        check_order(order)?;
        let rows = if order == 0.0 {
            Vec::new()
        } else {
            let u = grid.increments();
            (0..grid.len()).into_par_iter().map(|n| product_weights_row(u, n, order)).collect()
        };
        Ok(Self { grid, order, rows })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    /// Apply to nodal samples of a regular function; node 0 maps to 0.
    pub fn apply_regular(&self, p: &[f64]) -> Vec<f64> {
        if self.order == 0.0 {
            return p.to_vec();
        }
        self.rows
            .par_iter()
            .map(|row| row.iter().zip(p).map(|(w, v)| w * v).sum())
            .collect()
    }

    pub fn apply(&self, f: &SplitFunction) -> Result<SplitFunction> {
        if f.regular.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        let lead = f.lead.map(|t| integrate_power(t, self.order)).transpose()?;
        Ok(SplitFunction { lead, regular: self.apply_regular(&f.regular) })
    }
}

/// Integral of a split function at a single node without caching.
pub fn integrate_at(grid: &Grid, f: &SplitFunction, order: f64, n: usize) -> Result<f64> {
    check_order(order)?;
    grid.check_index(n)?;
    let mut value = if order == 0.0 {
        f.regular[n]
    } else {
        let row = product_weights_row(grid.increments(), n, order);
        row.iter().zip(&f.regular).map(|(w, v)| w * v).sum()
    };
    if let Some(term) = f.lead {
        let t = integrate_power(term, order)?;
        value += t.at(grid.u(n));
    }
    Ok(value)
}
