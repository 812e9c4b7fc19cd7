//! Graded meshes, fractional orders and sampled functions in the weighted space.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::psi::PsiFunction;

/// Hilfer order pair `(mu, nu)` and the derived type parameter
/// `xi = mu + nu (1 - mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalOrder {
    mu: f64,
    nu: f64,
    xi: f64,
}

impl FractionalOrder {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::invalid("mu", format!("must be in (0,1), got {mu}")));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::invalid("nu", format!("must be in [0,1], got {nu}")));
        }
        Ok(Self { mu, nu, xi: mu + nu * (1.0 - mu) })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Exponent of the weight: weighted values are `(Delta Psi)^(1 - xi) y`.
    pub fn weight_exponent(&self) -> f64 {
        1.0 - self.xi
    }

    /// Order of the inner integral in the Hilfer composition.
    pub fn inner_order(&self) -> f64 {
        (1.0 - self.nu) * (1.0 - self.mu)
    }

    /// Order of the outer integral in the Hilfer composition.
    pub fn outer_order(&self) -> f64 {
        self.nu * (1.0 - self.mu)
    }

    /// True when `xi == 1`, so the weight is trivial.
    pub fn is_unweighted(&self) -> bool {
        self.weight_exponent() == 0.0
    }
}

/// Mesh `t_i = T (i/N)^r`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradedMesh {
    horizon: f64,
    intervals: usize,
    grading: f64,
    #[serde(skip)]
    nodes: Vec<f64>,
}

impl GradedMesh {
    pub fn new(horizon: f64, intervals: usize, grading: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be positive, got {horizon}")));
        }
        if intervals < 1 {
            return Err(Error::invalid("mesh-n", "must be at least 1"));
        }
        if !(grading.is_finite() && grading >= 1.0) {
            return Err(Error::invalid("mesh-r", format!("must be >= 1, got {grading}")));
        }
        let n = intervals as f64;
        let mut nodes: Vec<f64> =
            (0..=intervals).map(|i| horizon * (i as f64 / n).powf(grading)).collect();
        nodes[intervals] = horizon;
        Ok(Self { horizon, intervals, grading, nodes })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node equal to `t` (relative tolerance 1e-12).
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * self.horizon;
        let pos = self.nodes.partition_point(|&x| x < t - tol);
        match self.nodes.get(pos) {
            Some(&x) if (x - t).abs() <= tol => Ok(pos),
            _ => Err(Error::NotOnMesh { t }),
        }
    }

    /// Index of the first node with `t_i >= t`.
    pub fn first_node_at_or_after(&self, t: f64) -> usize {
        let tol = 1e-12 * self.horizon;
        self.nodes.partition_point(|&x| x < t - tol)
    }
}

/// A mesh together with a kernel and the increments `u_i = Psi(t_i) - Psi(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    mesh: GradedMesh,
    psi: PsiFunction,
    increments: Vec<f64>,
}

impl Grid {
    pub fn new(mesh: GradedMesh, psi: PsiFunction) -> Result<Arc<Self>> {
        let mut increments = Vec::with_capacity(mesh.len());
        for (i, &t) in mesh.nodes().iter().enumerate() {
            let u = if i == 0 { 0.0 } else { psi.increment(t)? };
            if !u.is_finite() {
                return Err(Error::NonFinite { what: "psi increment", t });
            }
            if i > 0 && u <= increments[i - 1] {
                return Err(Error::NotIncreasing { t });
            }
            increments.push(u);
        }
        Ok(Arc::new(Self { mesh, psi, increments }))
    }

    pub fn mesh(&self) -> &GradedMesh {
        &self.mesh
    }

    pub fn psi(&self) -> &PsiFunction {
        &self.psi
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn nodes(&self) -> &[f64] {
        self.mesh.nodes()
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn last(&self) -> usize {
        self.increments.len() - 1
    }

    pub fn t(&self, i: usize) -> f64 {
        self.mesh.nodes()[i]
    }

    pub fn u(&self, i: usize) -> f64 {
        self.increments[i]
    }

    /// `Psi(T) - Psi(0)`.
    pub fn span(&self) -> f64 {
        self.increments[self.last()]
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::NodeOutOfRange { index, len: self.len() });
        }
        Ok(())
    }
}

/// `coeff * u^exponent` in the increment variable `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerTerm {
    pub coeff: f64,
    pub exponent: f64,
}

impl PowerTerm {
    pub fn at(&self, u: f64) -> f64 {
        self.coeff * u.powf(self.exponent)
    }
}

/// A function on the grid split into an exactly known leading power and a
/// regular part given by nodal samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFunction {
    pub lead: Option<PowerTerm>,
    pub regular: Vec<f64>,
}

impl SplitFunction {
    pub fn regular(values: Vec<f64>) -> Self {
        Self { lead: None, regular: values }
    }

    /// Value at node `i` (node 0 only when the leading term is finite there).
    pub fn value(&self, grid: &Grid, i: usize) -> f64 {
        let lead = match self.lead {
            Some(p) if i == 0 && p.exponent == 0.0 => p.coeff,
            Some(p) if i == 0 && p.exponent > 0.0 => 0.0,
            Some(p) if i == 0 => f64::INFINITY * p.coeff.signum(),
            Some(p) => p.at(grid.u(i)),
            None => 0.0,
        };
        lead + self.regular[i]
    }

    /// Re-express in the weighted space of `order`.
    pub fn to_grid_function(&self, grid: &Arc<Grid>, order: FractionalOrder) -> Result<GridFunction> {
        let k = order.weight_exponent();
        let n = grid.len();
        if self.regular.len() != n {
            return Err(Error::GridMismatch);
        }
        let mut weighted = vec![0.0; n];
        for (i, w) in weighted.iter_mut().enumerate().skip(1) {
            *w = grid.u(i).powf(k) * self.value(grid, i);
        }
        let mut lead0 = 0.0;
        if let Some(p) = self.lead {
            let e = p.exponent + k;
            if e.abs() <= 1e-12 {
                lead0 = p.coeff;
            } else if e < 0.0 && p.coeff != 0.0 {
                return Err(Error::NotInWeightedSpace { exponent: p.exponent });
            }
        }
        let origin;
        if order.is_unweighted() {
            weighted[0] = lead0 + self.regular[0];
            origin = None;
        } else {
            weighted[0] = lead0;
            origin = if lead0 == 0.0 { Some(self.regular[0]) } else { None };
        }
        let mut gf = GridFunction::from_weighted(grid.clone(), order, weighted)?;
        gf.origin = origin;
        Ok(gf)
    }
}

/// Samples of a function in the weighted space `C_{1-xi;Psi}`, stored as
/// weighted values `(Delta Psi)^(1-xi) y` at every node (node 0 holds the
/// limit). `origin` optionally records the finite unweighted value at `t = 0`
/// when the weighted limit is zero.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    order: FractionalOrder,
    weighted: Vec<f64>,
    origin: Option<f64>,
}

impl GridFunction {
    pub fn from_weighted(grid: Arc<Grid>, order: FractionalOrder, weighted: Vec<f64>) -> Result<Self> {
        if weighted.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(i) = weighted.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { what: "weighted value", t: grid.t(i) });
        }
        Ok(Self { grid, order, weighted, origin: None })
    }

    /// Sample a function given in weighted form `w(t)` on every node.
    pub fn from_weighted_fn(
        grid: Arc<Grid>,
        order: FractionalOrder,
        w: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let weighted = (0..grid.len()).map(|i| w(grid.t(i), grid.u(i))).collect();
        Self::from_weighted(grid, order, weighted)
    }

    /// Sample an unweighted function `y(t)` that is finite at `t = 0`.
    pub fn from_continuous(
        grid: Arc<Grid>,
        order: FractionalOrder,
        y: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let k = order.weight_exponent();
        let y0 = y(0.0);
        let weighted = (0..grid.len())
            .map(|i| if i == 0 { if k == 0.0 { y0 } else { 0.0 } } else { grid.u(i).powf(k) * y(grid.t(i)) })
            .collect();
        let mut gf = Self::from_weighted(grid, order, weighted)?;
        if k != 0.0 {
            gf.origin = Some(y0);
        }
        Ok(gf)
    }

    /// `coeff * (Delta Psi)^exponent`; requires `exponent >= xi - 1`.
    pub fn power(grid: Arc<Grid>, order: FractionalOrder, coeff: f64, exponent: f64) -> Result<Self> {
        let split = SplitFunction {
            lead: Some(PowerTerm { coeff, exponent }),
            regular: vec![0.0; grid.len()],
        };
        split.to_grid_function(&grid, order)
    }

    pub fn with_origin(mut self, origin: Option<f64>) -> Self {
        self.origin = origin;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn weighted(&self) -> &[f64] {
        &self.weighted
    }

    pub fn origin(&self) -> Option<f64> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.weighted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weighted.is_empty()
    }

    /// Unweighted value `y(t_i)`. At `t = 0` this is the weighted limit when
    /// `xi = 1`, the recorded origin value when the limit is zero, and an
    /// infinity (or NaN when unknown) otherwise.
    pub fn unweighted(&self, i: usize) -> f64 {
        let k = self.order.weight_exponent();
        if i > 0 {
            return self.weighted[i] * self.grid.u(i).powf(-k);
        }
        if k == 0.0 {
            self.weighted[0]
        } else if self.weighted[0] == 0.0 {
            self.origin.unwrap_or(f64::NAN)
        } else {
            f64::INFINITY * self.weighted[0].signum()
        }
    }

    pub fn unweighted_values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.unweighted(i)).collect()
    }

    /// Leading power `w_0 u^(xi-1)` plus regular samples of the remainder.
    pub fn split(&self) -> SplitFunction {
        let k = self.order.weight_exponent();
        if k == 0.0 {
            return SplitFunction::regular(self.weighted.clone());
        }
        let w0 = self.weighted[0];
        let mut regular = Vec::with_capacity(self.len());
        regular.push(if w0 == 0.0 { self.origin.unwrap_or(0.0) } else { 0.0 });
        for i in 1..self.len() {
            regular.push(self.grid.u(i).powf(-k) * (self.weighted[i] - w0));
        }
        let lead = (w0 != 0.0).then_some(PowerTerm { coeff: w0, exponent: -k });
        SplitFunction { lead, regular }
    }

    /// Whether both functions live on the same grid and weighted space.
    pub fn same_space(&self, other: &GridFunction) -> bool {
        self.order == other.order
            && (Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid)
    }

    pub fn ensure_same_space(&self, other: &GridFunction) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `a * self + b * other` in weighted coordinates.
    pub fn lincomb(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.ensure_same_space(other)?;
        let weighted = self
            .weighted
            .iter()
            .zip(&other.weighted)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let origin = match (self.origin, other.origin) {
            (Some(x), Some(y)) => Some(a * x + b * y),
            _ => None,
        };
        Ok(GridFunction { grid: self.grid.clone(), order: self.order, weighted, origin })
    }

    pub fn map_weighted(&self, f: impl Fn(usize, f64) -> f64) -> Result<GridFunction> {
        let weighted = self.weighted.iter().enumerate().map(|(i, &w)| f(i, w)).collect();
        GridFunction::from_weighted(self.grid.clone(), self.order, weighted)
    }
}
