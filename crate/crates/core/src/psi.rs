//! Strictly increasing kernels `Psi` on `[0, T]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub enum PsiKind {
    Identity,
    /// `t^rho`
    Power { rho: f64 },
    /// `ln(1 + t)`
    ShiftedLog,
    Custom { psi: Expr, derivative: Expr },
}

/// Preset selector, mirroring the command-line spelling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Preset {
    Identity,
    Power(f64),
    ShiftedLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiFunction {
    kind: PsiKind,
    label: String,
}

/// Number of probe points used when validating custom kernels.
pub const DEFAULT_PROBES: usize = 200;

impl PsiFunction {
    pub fn identity() -> Self {
        Self { kind: PsiKind::Identity, label: "identity".into() }
    }

    pub fn power(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid("rho", format!("must be positive, got {rho}")));
        }
        Ok(Self { kind: PsiKind::Power { rho }, label: format!("power:{rho}") })
    }

    pub fn shifted_log() -> Self {
        Self { kind: PsiKind::ShiftedLog, label: "shifted-log".into() }
    }

    pub fn preset(p: Preset) -> Result<Self> {
        match p {
            Preset::Identity => Ok(Self::identity()),
            Preset::Power(rho) => Self::power(rho),
            Preset::ShiftedLog => Ok(Self::shifted_log()),
        }
    }

    /// Build a kernel from expressions in `t`, checked on `probes` uniform
    /// points of `(0, horizon]` for positivity of the derivative, strict
    /// increase, and agreement of the derivative with a central difference.
    pub fn custom(psi: Expr, derivative: Expr, horizon: f64, probes: usize) -> Result<Self> {
        for e in [&psi, &derivative] {
            if e.variables().len() != 1 || e.variables()[0] != "t" {
                return Err(Error::invalid("psi", "expressions must be in the single variable t"));
            }
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be positive, got {horizon}")));
        }
        if probes < 2 {
            return Err(Error::invalid("probes", "need at least two probe points"));
        }
        let label = format!("custom:{psi},{derivative}");
        let candidate = Self { kind: PsiKind::Custom { psi, derivative }, label };
        let value = |t: f64| -> Result<f64> {
            let v = candidate.value(t)?;
            if !v.is_finite() {
                return Err(Error::NonFinite { what: "psi", t });
            }
            Ok(v)
        };
        let h = 1e-5 * horizon;
        let mut prev = value(0.0)?;
        for k in 1..=probes {
            let t = horizon * k as f64 / probes as f64;
            let d = candidate.derivative(t)?;
            if !d.is_finite() {
                return Err(Error::NonFinite { what: "psi'", t });
            }
            if d <= 0.0 {
                return Err(Error::NotIncreasing { t });
            }
            let v = value(t)?;
            if v <= prev {
                return Err(Error::NotIncreasing { t });
            }
            prev = v;
            if t - h > 0.0 && k < probes {
                let fd = (value(t + h)? - value(t - h)?) / (2.0 * h);
                if (fd - d).abs() > 1e-4 * d.abs().max(fd.abs()) {
                    return Err(Error::DerivativeMismatch { t, supplied: d, finite_difference: fd });
                }
            }
        }
        Ok(candidate)
    }

    /// Parse and validate a custom kernel from source strings.
    pub fn custom_from_source(psi: &str, derivative: &str, horizon: f64) -> Result<Self> {
        let p = Expr::parse(psi, &["t"])?;
        let d = Expr::parse(derivative, &["t"])?;
        Self::custom(p, d, horizon, DEFAULT_PROBES)
    }

    pub fn kind(&self) -> &PsiKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(match &self.kind {
            PsiKind::Identity => t,
            PsiKind::Power { rho } => t.powf(*rho),
            PsiKind::ShiftedLog => t.ln_1p(),
            PsiKind::Custom { psi, .. } => psi.eval_at(&[t])?,
        })
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        Ok(match &self.kind {
            PsiKind::Identity => 1.0,
            PsiKind::Power { rho } => rho * t.powf(rho - 1.0),
            PsiKind::ShiftedLog => 1.0 / (1.0 + t),
            PsiKind::Custom { derivative, .. } => derivative.eval_at(&[t])?,
        })
    }

    /// `Psi(t) - Psi(0)`, computed without cancellation for the presets.
    pub fn increment(&self, t: f64) -> Result<f64> {
        match &self.kind {
            PsiKind::Custom { .. } => Ok(self.value(t)? - self.value(0.0)?),
            _ => self.value(t),
        }
    }
}
