//! Gamma and Mittag-Leffler functions.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("gamma function has a pole at {0}")]
    GammaPole(f64),
    #[error("gamma({0}) overflows f64")]
    GammaOverflow(f64),
    #[error("argument {0} is not finite")]
    NonFinite(f64),
    #[error("ln_gamma is only defined here for positive arguments, got {0}")]
    LnGammaDomain(f64),
    #[error("Mittag-Leffler index must lie in (0, 2], got {0}")]
    InvalidIndex(f64),
    #[error("Mittag-Leffler argument {0} is negative")]
    NegativeArgument(f64),
    #[error("Mittag-Leffler argument {z} exceeds the supported cap {cap}")]
    ArgumentTooLarge { z: f64, cap: f64 },
    #[error("Mittag-Leffler series overflowed f64 at z = {0}")]
    Overflow(f64),
    #[error("Mittag-Leffler series did not converge after {terms} terms (partial sum {partial})")]
    NotConverged { terms: usize, partial: f64 },
    #[error("invalid series settings: {0}")]
    InvalidSettings(String),
}

/// Largest argument for which gamma is finite in f64.
pub const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

/// Largest Mittag-Leffler argument accepted.
pub const ML_ARGUMENT_CAP: f64 = 30.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (original minus one)
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// sin(pi x) with argument reduction so integers map to exact zeros.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

/// Gamma function on the real line.
pub fn gamma_fn(x: f64) -> Result<f64, SpecialError> {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return Err(SpecialError::NonFinite(x));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(SpecialError::GammaPole(x));
    }
    if x > GAMMA_MAX_ARG {
        return Err(SpecialError::GammaOverflow(x));
    }
    if x == x.floor() && x <= 171.0 {
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return Ok(acc);
    }
    if x < 0.5 {
        let s = sin_pi(x);
        let g = gamma_fn(1.0 - x)?;
        return Ok(PI / (s * g));
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    // split the power so that t^(x - 1/2) never overflows on its own
    let half = t.powf(0.5 * (xm + 0.5));
    Ok((2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(xm))
}

/// Natural log of gamma for positive arguments.
pub fn ln_gamma(x: f64) -> Result<f64, SpecialError> {
    if !x.is_finite() {
        return Err(SpecialError::NonFinite(x));
    }
    if x <= 0.0 {
        return Err(SpecialError::LnGammaDomain(x));
    }
    if x < 0.5 {
        return Ok(gamma_fn(x)?.ln());
    }
    if x == x.floor() && x <= 30.0 {
        return Ok(gamma_fn(x)?.ln());
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (xm + 0.5) * t.ln() - t + lanczos_sum(xm).ln())
}

/// Series settings for [`mittag_leffler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MittagLefflerParams {
    pub index: f64,
    pub series_tol: f64,
    pub max_terms: usize,
}

impl MittagLefflerParams {
    pub fn new(index: f64) -> Self {
        Self { index, series_tol: 1e-16, max_terms: 20_000 }
    }

    pub fn validate(&self) -> Result<(), SpecialError> {
        if !(self.index > 0.0 && self.index <= 2.0) {
            return Err(SpecialError::InvalidIndex(self.index));
        }
        if !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return Err(SpecialError::InvalidSettings(format!(
                "series tolerance {} must lie in (0, 1)",
                self.series_tol
            )));
        }
        if self.max_terms == 0 {
            return Err(SpecialError::InvalidSettings("max_terms must be positive".into()));
        }
        Ok(())
    }
}

fn ml_term(index: f64, ln_z: f64, k: usize) -> Result<f64, SpecialError> {
    if k == 0 {
        return Ok(1.0);
    }
    let kf = k as f64;
    Ok((kf * ln_z - ln_gamma(kf * index + 1.0)?).exp())
}

/// One-parameter Mittag-Leffler function `sum z^k / Gamma(k index + 1)`
/// for `0 <= z <= 30`.
pub fn mittag_leffler(params: &MittagLefflerParams, z: f64) -> Result<f64, SpecialError> {
    params.validate()?;
    if !z.is_finite() {
        return Err(SpecialError::NonFinite(z));
    }
    if z < 0.0 {
        return Err(SpecialError::NegativeArgument(z));
    }
    if z > ML_ARGUMENT_CAP {
        return Err(SpecialError::ArgumentTooLarge { z, cap: ML_ARGUMENT_CAP });
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let ln_z = z.ln();
    let mut sum = 1.0;
    for k in 1..params.max_terms {
        let term = ml_term(params.index, ln_z, k)?;
        sum += term;
        if !sum.is_finite() {
            return Err(SpecialError::Overflow(z));
        }
        if term <= params.series_tol * sum {
            return Ok(sum);
        }
    }
    Err(SpecialError::NotConverged { terms: params.max_terms, partial: sum })
}

/// Convenience wrapper with default series settings.
pub fn mittag_leffler_default(index: f64, z: f64) -> Result<f64, SpecialError> {
    mittag_leffler(&MittagLefflerParams::new(index), z)
}

/// Sum of the first `terms` series terms (k = 0 .. terms-1).
pub fn mittag_leffler_partial_sum(index: f64, z: f64, terms: usize) -> Result<f64, SpecialError> {
    if !(index > 0.0 && index <= 2.0) {
        return Err(SpecialError::InvalidIndex(index));
    }
    if z < 0.0 {
        return Err(SpecialError::NegativeArgument(z));
    }
    if terms == 0 {
        return Ok(0.0);
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let ln_z = z.ln();
    let mut sum = 0.0;
    for k in 0..terms {
        sum += ml_term(index, ln_z, k)?;
    }
    Ok(sum)
}
