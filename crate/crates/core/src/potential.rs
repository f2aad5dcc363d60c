//! Even edge potentials q₀ on the unit interval.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniform points on [0,1] used when checking q₀(x) = q₀(1−x).
pub const EVENNESS_GRID_POINTS: usize = 101;

/// Evenness tolerance applied to the analytic kinds.
pub const EXACT_EVENNESS_TOL: f64 = 1e-12;

/// Default evenness tolerance for sampled tables.
pub const DEFAULT_SAMPLED_EVENNESS_TOL: f64 = 1e-10;

/// Sampled potential values on a uniform grid over [0,1], validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct SampledTable {
    values: Vec<f64>,
    tolerance: f64,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    values: Vec<f64>,
    #[serde(default = "default_tol")]
    tolerance: f64,
}

fn default_tol() -> f64 {
    DEFAULT_SAMPLED_EVENNESS_TOL
}

impl TryFrom<RawTable> for SampledTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        SampledTable::new(raw.values, raw.tolerance)
    }
}

impl From<SampledTable> for RawTable {
    fn from(t: SampledTable) -> Self {
        RawTable {
            values: t.values,
            tolerance: t.tolerance,
        }
    }
}

impl SampledTable {
    pub fn new(values: Vec<f64>, tolerance: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidPotential(format!(
                "sampled table needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential(format!(
                "sample {i} is not finite ({})",
                values[i]
            )));
        }
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(Error::InvalidPotential(format!(
                "evenness tolerance must be a nonnegative number, got {tolerance}"
            )));
        }
        let table = SampledTable { values, tolerance };
        let defect = evenness_defect_of(|x| table.interpolate(x));
        if defect > tolerance {
            return Err(Error::InvalidPotential(format!(
                "sampled potential is not even: max |q(x) - q(1-x)| = {defect:e} > {tolerance:e}"
            )));
        }
        Ok(table)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn interpolate(&self, x: f64) -> f64 {
        let cells = (self.values.len() - 1) as f64;
        let pos = (x * cells).clamp(0.0, cells);
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// The edge potential q₀, shared by every edge of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgePotential {
    Zero,
    /// q₀(x) = amplitude · cos(2πx)
    CosineEven {
        amplitude: f64,
    },
    /// Linear interpolation between uniformly spaced samples.
    SampledEven(SampledTable),
}

impl EdgePotential {
    pub fn cosine(amplitude: f64) -> Self {
        EdgePotential::CosineEven { amplitude }
    }

    pub fn sampled(values: Vec<f64>, tolerance: f64) -> Result<Self> {
        SampledTable::new(values, tolerance).map(EdgePotential::SampledEven)
    }

    /// Evaluates q₀(x) for x in [0,1].
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!(
                "potential evaluated at x = {x}, outside [0, 1]"
            )));
        }
        Ok(self.value_at(x))
    }

    /// Unchecked evaluation for callers that already stay inside [0,1].
    pub(crate) fn value_at(&self, x: f64) -> f64 {
        match self {
            EdgePotential::Zero => 0.0,
            EdgePotential::CosineEven { amplitude } => amplitude * (2.0 * PI * x).cos(),
            EdgePotential::SampledEven(table) => table.interpolate(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            EdgePotential::Zero => true,
            EdgePotential::CosineEven { amplitude } => *amplitude == 0.0,
            EdgePotential::SampledEven(t) => t.values.iter().all(|v| *v == 0.0),
        }
    }

    /// max |q₀(x) − q₀(1−x)| over the evenness grid.
    pub fn evenness_defect(&self) -> f64 {
        evenness_defect_of(|x| self.value_at(x))
    }

    /// The tolerance the evenness check is held to for this kind.
    pub fn evenness_tolerance(&self) -> f64 {
        match self {
            EdgePotential::SampledEven(t) => t.tolerance,
            _ => EXACT_EVENNESS_TOL,
        }
    }

    pub fn is_even(&self) -> bool {
        self.evenness_defect() <= self.evenness_tolerance()
    }
}

impl fmt::Display for EdgePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgePotential::Zero => write!(f, "zero"),
            EdgePotential::CosineEven { amplitude } => write!(f, "cosine(amplitude={amplitude})"),
            EdgePotential::SampledEven(t) => write!(f, "sampled({} values)", t.values.len()),
        }
    }
}

fn evenness_defect_of(q: impl Fn(f64) -> f64) -> f64 {
    let last = (EVENNESS_GRID_POINTS - 1) as f64;
    (0..EVENNESS_GRID_POINTS)
        .map(|k| {
            let x = k as f64 / last;
            let mirror = (EVENNESS_GRID_POINTS - 1 - k) as f64 / last;
            (q(x) - q(mirror)).abs()
        })
        .fold(0.0, f64::max)
}
