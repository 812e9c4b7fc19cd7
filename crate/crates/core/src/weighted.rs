//! Sup-norm and partial order of the weighted space, both read off the
//! weighted samples.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Default comparison slack.
pub const DEFAULT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorm {
    pub value: f64,
    pub argmax_node: usize,
}

pub fn weighted_norm(h: &GridFunction) -> Result<WeightedNorm> {
    norm_of(h.weighted(), h)
}

fn norm_of(w: &[f64], h: &GridFunction) -> Result<WeightedNorm> {
    let mut best = WeightedNorm { value: 0.0, argmax_node: 0 };
    for (i, &x) in w.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite { what: "weighted value", t: h.grid().t(i) });
        }
        if x.abs() > best.value {
            best = WeightedNorm { value: x.abs(), argmax_node: i };
        }
    }
    Ok(best)
}

/// Norm of `a - b` without building the difference.
pub fn weighted_distance(a: &GridFunction, b: &GridFunction) -> Result<WeightedNorm> {
    a.ensure_same_space(b)?;
    let diff: Vec<f64> = a.weighted().iter().zip(b.weighted()).map(|(x, y)| x - y).collect();
    norm_of(&diff, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightedOrdering {
    Precedes,
    Equals,
    Succeeds,
    Incomparable,
}

/// Compare two functions node by node. Non-strict: `h1 <= h2` when
/// `w1 <= w2 + slack` everywhere. Strict: `w1 < w2 - slack` everywhere.
/// `Equals` means `|w1 - w2| <= slack` everywhere (never returned in strict
/// mode, where it reads as incomparable).
pub fn weighted_compare(
    h1: &GridFunction,
    h2: &GridFunction,
    strict: bool,
    slack: f64,
) -> Result<WeightedOrdering> {
    h1.ensure_same_space(h2)?;
    if !(slack >= 0.0) {
        return Err(Error::invalid("slack", format!("must be non-negative, got {slack}")));
    }
    let pairs = || h1.weighted().iter().zip(h2.weighted());
    if strict {
        if pairs().all(|(a, b)| *a < *b - slack) {
            return Ok(WeightedOrdering::Precedes);
        }
        if pairs().all(|(a, b)| *b < *a - slack) {
            return Ok(WeightedOrdering::Succeeds);
        }
        return Ok(WeightedOrdering::Incomparable);
    }
    let le = pairs().all(|(a, b)| *a <= *b + slack);
    let ge = pairs().all(|(a, b)| *b <= *a + slack);
    Ok(match (le, ge) {
        (true, true) => WeightedOrdering::Equals,
        (true, false) => WeightedOrdering::Precedes,
        (false, true) => WeightedOrdering::Succeeds,
        (false, false) => WeightedOrdering::Incomparable,
    })
}

/// Nodes where `h1 <= h2` (or `h1 < h2` when strict) fails.
pub fn order_violations(
    h1: &GridFunction,
    h2: &GridFunction,
    strict: bool,
    slack: f64,
) -> Result<Vec<usize>> {
    h1.ensure_same_space(h2)?;
    Ok(h1
        .weighted()
        .iter()
        .zip(h2.weighted())
        .enumerate()
        .filter(|(_, (a, b))| if strict { !(**a < **b - slack) } else { !(**a <= **b + slack) })
        .map(|(i, _)| i)
        .collect())
}
