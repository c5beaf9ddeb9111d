//! Residual and causal-character reports shared by the verifiers and the CLI.

use std::fmt;

use crate::chart::Point;
use crate::sample::WorstCase;

/// Max-absolute residual of one named equation (or equation group) over a
/// sample, with the worst offending point.
#[derive(Clone, Debug)]
pub struct EquationResidual {
    pub name: String,
    pub max_abs: f64,
    pub worst_point: Option<Point>,
}

impl EquationResidual {
    pub fn from_worst(name: impl Into<String>, worst: WorstCase) -> Self {
        EquationResidual {
            name: name.into(),
            max_abs: worst.max_abs,
            worst_point: worst.worst_point,
        }
    }
}

/// Per-equation residual summary over a sample set.
#[derive(Clone, Debug, Default)]
pub struct ResidualReport {
    pub equations: Vec<EquationResidual>,
}

impl ResidualReport {
    pub fn new() -> Self {
        ResidualReport {
            equations: Vec::new(),
        }
    }

    pub fn push(&mut self, eq: EquationResidual) {
        self.equations.push(eq);
    }

    /// Largest residual across all equations.
    pub fn max_abs(&self) -> f64 {
        self.equations.iter().map(|e| e.max_abs).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&EquationResidual> {
        self.equations
            .iter()
            .max_by(|a, b| a.max_abs.total_cmp(&b.max_abs))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs() < tol
    }

    pub fn get(&self, name: &str) -> Option<&EquationResidual> {
        self.equations.iter().find(|e| e.name == name)
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for eq in &self.equations {
            writeln!(f, "{:<28} max |r| = {:.3e}", eq.name, eq.max_abs)?;
        }
        Ok(())
    }
}

/// Causal character of a vector norm at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalLabel {
    Timelike,
    Null,
    Spacelike,
}

impl fmt::Display for CausalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CausalLabel::Timelike => write!(f, "timelike"),
            CausalLabel::Null => write!(f, "null"),
            CausalLabel::Spacelike => write!(f, "spacelike"),
        }
    }
}

/// Sign classification of a Killing vector norm over a grid, plus the global
/// non-spacelike test.
#[derive(Clone, Debug)]
pub struct CausalReport {
    /// `(point, norm, label)` for every grid point, in grid order.
    pub entries: Vec<(Point, f64, CausalLabel)>,
    /// Whether `D_3(X_1)` vanishes over the whole grid (tolerance 1e-9).
    pub d3x1_zero: bool,
    /// Whether the norm is v-independent over the grid (the v-linear
    /// coefficient `2 X_1 D_2 X_1` vanishes).
    pub v_coefficient_zero: bool,
    /// The v-eliminated bound in its published form: `F_3^2 - 2 X_1 F_2 <= 0`
    /// at every grid point.
    pub inequality_printed: bool,
    /// The inequality derived from the frame norm: `F_3^2 + 2 X_1 F_2 <= 0`
    /// at every grid point. Authoritative for `global_non_spacelike`.
    pub inequality_derived: bool,
}

impl CausalReport {
    /// Global non-spacelike verdict: `D_3 X_1` vanishes and the derived
    /// v-independent bound holds everywhere.
    pub fn global_non_spacelike(&self) -> bool {
        self.d3x1_zero && self.inequality_derived
    }

    pub fn count(&self, label: CausalLabel) -> usize {
        self.entries.iter().filter(|(_, _, l)| *l == label).count()
    }

    pub fn fraction(&self, label: CausalLabel) -> f64 {
        if self.entries.is_empty() {
            0.0
        } else {
            self.count(label) as f64 / self.entries.len() as f64
        }
    }
}
