//! Run configuration: a JSON file merged with command-line flags, then
//! validated into ready-to-use library objects.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use psi_hilfer::expr::Expr;
use psi_hilfer::extremal::{BoundSide, ExtremalConfig};
use psi_hilfer::grid::FractionalOrder;
use psi_hilfer::inequalities::SignBefore;
use psi_hilfer::psi::PsiFunction;
use psi_hilfer::solver::{HybridProblem, SolverConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Integrate,
    Derive,
    Solve,
    Extremal,
    Compare,
    Verify,
    ProbeUniqueness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Touchpoint,
    MlIdentity,
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Nonpositive,
    Nonnegative,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemBlock {
    pub f: Option<String>,
    pub g: Option<String>,
    pub y0: Option<f64>,
    pub y0_anchor: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub psi: Option<String>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(rename = "N")]
    pub intervals: Option<usize>,
    pub r: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub damping: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtremalBlock {
    pub eps0: Option<f64>,
    pub q: Option<f64>,
    pub stop_tol: Option<f64>,
    pub max_levels: Option<usize>,
    pub extrapolate: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorBlock {
    /// Function in `t` and `u = Psi(t) - Psi(0)`.
    pub h: Option<String>,
    /// `h` gives the weighted value `(Delta Psi)^(1-xi) h` instead of `h`.
    pub weighted: Option<bool>,
    /// Integration order; defaults to `mu`.
    pub order: Option<f64>,
    pub exclusion_nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    pub check: Option<Check>,
    #[serde(rename = "L")]
    pub lipschitz: Option<f64>,
    pub t_from: Option<f64>,
    /// Weighted touch-point function in `t`, `u` and `u1 = Delta Psi(t1)`.
    pub m: Option<String>,
    pub touch_t: Option<f64>,
    pub sign: Option<Sign>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareBlock {
    /// Weighted candidate in `t` and `u`; the base solution when absent.
    pub u: Option<String>,
    pub side: Option<Side>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessBlock {
    /// Comparison function in `t` and `m`.
    #[serde(rename = "G")]
    pub comparison: Option<String>,
    /// Constant weighted start values.
    pub starts: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub problem: ProblemBlock,
    pub solver: SolverBlock,
    pub extremal: ExtremalBlock,
    pub operator: OperatorBlock,
    pub verify: VerifyBlock,
    pub compare: CompareBlock,
    pub uniqueness: UniquenessBlock,
    pub output: OutputBlock,
}

/// Command-line flags; every value overrides the config file.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "psi-hilfer", version, about = "Psi-Hilfer fractional operators and hybrid equation solver")]
pub struct Flags {
    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, value_name = "NAME")]
    pub command: Option<Command>,
    /// Check run by `verify`
    #[arg(long, value_enum)]
    pub check: Option<Check>,
    #[arg(long, value_name = "EXPR")]
    pub f: Option<String>,
    #[arg(long, value_name = "EXPR")]
    pub g: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    #[arg(long = "y0-anchor", allow_hyphen_values = true)]
    pub y0_anchor: Option<f64>,
    #[arg(long = "T", value_name = "REAL")]
    pub horizon: Option<f64>,
    /// identity | power:RHO | shifted-log | custom:EXPR,EXPR
    #[arg(long)]
    pub psi: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "mesh-n")]
    pub mesh_n: Option<usize>,
    #[arg(long = "mesh-r")]
    pub mesh_r: Option<f64>,
    /// Picard tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Operand of `integrate` and `derive`, in `t` and `u`
    #[arg(long, value_name = "EXPR")]
    pub h: Option<String>,
    /// Lipschitz constant for `verify`
    #[arg(long = "L")]
    pub lipschitz: Option<f64>,
    #[arg(long, value_enum)]
    pub side: Option<Side>,
    /// Weighted candidate for `compare`, in `t` and `u`
    #[arg(long, value_name = "EXPR")]
    pub u: Option<String>,
    /// Comparison function for `probe-uniqueness`, in `t` and `m`
    #[arg(long = "G", value_name = "EXPR")]
    pub comparison: Option<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::ConfigSyntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Load the file named by `--config` (if any) and apply the flags on top.
    pub fn load(flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        cfg.apply(flags);
        Ok(cfg)
    }

    pub fn apply(&mut self, flags: &Flags) {
        fn set<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        set(&mut self.command, &flags.command);
        set(&mut self.verify.check, &flags.check);
        set(&mut self.problem.f, &flags.f);
        set(&mut self.problem.g, &flags.g);
        set(&mut self.problem.y0, &flags.y0);
        set(&mut self.problem.y0_anchor, &flags.y0_anchor);
        set(&mut self.problem.horizon, &flags.horizon);
        set(&mut self.problem.psi, &flags.psi);
        set(&mut self.problem.mu, &flags.mu);
        set(&mut self.problem.nu, &flags.nu);
        set(&mut self.solver.intervals, &flags.mesh_n);
        set(&mut self.solver.r, &flags.mesh_r);
        set(&mut self.solver.tol, &flags.tol);
        set(&mut self.extremal.eps0, &flags.eps0);
        set(&mut self.output.dir, &flags.out);
        set(&mut self.operator.h, &flags.h);
        set(&mut self.verify.lipschitz, &flags.lipschitz);
        set(&mut self.compare.side, &flags.side);
        set(&mut self.compare.u, &flags.u);
        set(&mut self.uniqueness.comparison, &flags.comparison);
    }

    /// Validate everything the selected command needs.
    pub fn validate(&self) -> Result<Validated, CliError> {
        let command = self.command.ok_or_else(|| CliError::config("command", "is required"))?;
        let mu = require(self.problem.mu, "problem.mu")?;
        let nu = require(self.problem.nu, "problem.nu")?;
        let order = FractionalOrder::new(mu, nu)?;
        let horizon = self.problem.horizon.unwrap_or(1.0);
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(CliError::config("problem.T", format!("must be positive, got {horizon}")));
        }
        let psi = parse_psi(self.problem.psi.as_deref().unwrap_or("identity"), horizon)?;

        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            intervals: self.solver.intervals.unwrap_or(defaults.intervals),
            grading: self.solver.r.unwrap_or(defaults.grading),
            picard_tol: self.solver.tol.unwrap_or(defaults.picard_tol),
            max_iters: self.solver.max_iters.unwrap_or(defaults.max_iters),
            damping: self.solver.damping.unwrap_or(defaults.damping),
        };
        solver.validate()?;

        let base = ExtremalConfig::default();
        let extremal = ExtremalConfig {
            eps0: self.extremal.eps0.unwrap_or(base.eps0),
            ratio: self.extremal.q.unwrap_or(base.ratio),
            stop_tol: self.extremal.stop_tol.unwrap_or(base.stop_tol),
            max_levels: self.extremal.max_levels.unwrap_or(base.max_levels),
            extrapolate: self.extremal.extrapolate.unwrap_or(base.extrapolate),
            params: None,
        };
        extremal.validate()?;

        let needs_problem = match command {
            Command::Integrate | Command::Derive => false,
            Command::Verify => self.verify.check == Some(Check::Comparison),
            _ => true,
        };
        let problem = if needs_problem {
            let f = parse_expr(require(self.problem.f.as_deref(), "problem.f")?, "problem.f", &["t", "y"])?;
            let g = parse_expr(require(self.problem.g.as_deref(), "problem.g")?, "problem.g", &["t", "y"])?;
            let y0 = require(self.problem.y0, "problem.y0")?;
            Some(HybridProblem::new(f, g, y0, self.problem.y0_anchor, horizon, psi.clone(), order)?)
        } else {
            None
        };

        let operand = match command {
            Command::Integrate | Command::Derive => {
                Some(parse_expr(require(self.operator.h.as_deref(), "operator.h")?, "operator.h", &["t", "u"])?)
            }
            _ => None,
        };
        let integral_order = self.operator.order.unwrap_or(mu);
        if !(integral_order.is_finite() && integral_order > 0.0) {
            return Err(CliError::config("operator.order", format!("must be positive, got {integral_order}")));
        }

        let check = match command {
            Command::Verify => Some(self.verify.check.ok_or_else(|| CliError::config("verify.check", "is required"))?),
            _ => None,
        };
        let lipschitz = self.verify.lipschitz.unwrap_or(0.5);
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(CliError::config("verify.L", format!("must be non-negative, got {lipschitz}")));
        }
        let touch_function = parse_expr(self.verify.m.as_deref().unwrap_or("u - u1"), "verify.m", &["t", "u", "u1"])?;
        let candidate = self.compare.u.as_deref().map(|s| parse_expr(s, "compare.u", &["t", "u"])).transpose()?;
        let comparison = self
            .uniqueness
            .comparison
            .as_deref()
            .map(|s| parse_expr(s, "uniqueness.G", &["t", "m"]))
            .transpose()?;
        let starts = self.uniqueness.starts.clone().unwrap_or_else(|| vec![0.0, 5.0]);
        if starts.len() < 2 {
            return Err(CliError::config("uniqueness.starts", "needs at least two values"));
        }

        Ok(Validated {
            command,
            check,
            order,
            psi,
            horizon,
            solver,
            extremal,
            problem,
            operand,
            operand_weighted: self.operator.weighted.unwrap_or(false),
            integral_order,
            exclusion_nodes: self.operator.exclusion_nodes.unwrap_or(2),
            lipschitz,
            t_from: self.verify.t_from.unwrap_or(0.2 * horizon),
            touch_function,
            touch_t: self.verify.touch_t.unwrap_or(0.5 * horizon),
            sign: match self.verify.sign.unwrap_or(Sign::Nonpositive) {
                Sign::Nonpositive => SignBefore::NonPositive,
                Sign::Nonnegative => SignBefore::NonNegative,
            },
            candidate,
            side: match self.compare.side.unwrap_or(Side::Lower) {
                Side::Lower => BoundSide::Lower,
                Side::Upper => BoundSide::Upper,
            },
            comparison,
            starts,
            out_dir: self.output.dir.clone().unwrap_or_else(|| PathBuf::from("psi-hilfer-out")),
        })
    }
}

/// A configuration turned into library objects.
#[derive(Debug, Clone)]
pub struct Validated {
    pub command: Command,
    pub check: Option<Check>,
    pub order: FractionalOrder,
    pub psi: PsiFunction,
    pub horizon: f64,
    pub solver: SolverConfig,
    pub extremal: ExtremalConfig,
    pub problem: Option<HybridProblem>,
    pub operand: Option<Expr>,
    pub operand_weighted: bool,
    pub integral_order: f64,
    pub exclusion_nodes: usize,
    pub lipschitz: f64,
    pub t_from: f64,
    pub touch_function: Expr,
    pub touch_t: f64,
    pub sign: SignBefore,
    pub candidate: Option<Expr>,
    pub side: BoundSide,
    pub comparison: Option<Expr>,
    pub starts: Vec<f64>,
    pub out_dir: PathBuf,
}

fn require<T>(value: Option<T>, field: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::config(field, "is required"))
}

fn parse_expr(source: &str, field: &str, variables: &[&str]) -> Result<Expr, CliError> {
    Expr::parse(source, variables).map_err(|source| CliError::Expression { field: field.to_string(), source })
}

/// Split `custom:PSI,DERIVATIVE` at the first comma outside parentheses.
fn split_custom(spec: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in spec.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => return Some((&spec[..i], &spec[i + 1..])),
            _ => {}
        }
    }
    None
}

pub fn parse_psi(spec: &str, horizon: f64) -> Result<PsiFunction, CliError> {
    let spec = spec.trim();
    match spec {
        "identity" => return Ok(PsiFunction::identity()),
        "shifted-log" => return Ok(PsiFunction::shifted_log()),
        _ => {}
    }
    if let Some(rho) = spec.strip_prefix("power:") {
        let rho: f64 = rho
            .trim()
            .parse()
            .map_err(|_| CliError::config("problem.psi", format!("invalid exponent in {spec:?}")))?;
        return Ok(PsiFunction::power(rho)?);
    }
    if let Some(body) = spec.strip_prefix("custom:") {
        let (psi, derivative) = split_custom(body)
            .ok_or_else(|| CliError::config("problem.psi", "custom kernel needs `custom:EXPR,EXPR`"))?;
        let psi_expr = parse_expr(psi.trim(), "problem.psi", &["t"])?;
        let derivative_expr = parse_expr(derivative.trim(), "problem.psi", &["t"])?;
        return Ok(PsiFunction::custom(psi_expr, derivative_expr, horizon, psi_hilfer::psi::DEFAULT_PROBES)?);
    }
    Err(CliError::config(
        "problem.psi",
        format!("expected identity, power:RHO, shifted-log or custom:EXPR,EXPR, got {spec:?}"),
    ))
}
