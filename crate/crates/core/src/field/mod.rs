//! Scalar fields on a chart: the expression DSL every other module consumes.
//!
//! A [`ScalarField`] is an immutable expression over chart coordinates built
//! from literals, arithmetic, `exp`/`log`/`sin`/`cos`, plus two non-tree
//! primitives:
//!
//! * a *shifted composite* `f(x3 - eps*u, ...)`, the substitution
//!   `x3 -> x3 - eps*u` applied to a base field, and
//! * a *quadrature field* `p -> integral of f(p with c := z) dz` from a fixed
//!   lower limit to the current value of coordinate `c`, evaluated by adaptive
//!   Gauss-Kronrod quadrature.
//!
//! Differentiation is exact and structural for every variant: the shift is
//! differentiated through the chain rule, quadrature fields differentiate
//! under the integral sign (and reduce to the integrand for the integration
//! coordinate itself). Finite differences never enter the evaluation path;
//! they exist only as an independent test oracle.
//!
//! Every field carries a dependency mask, the set of coordinates it may
//! depend on, maintained by the smart constructors. Simplification is limited
//! to constant folding and zero/one elimination.

mod parse;
mod quad;

pub use parse::{parse_field, ParseError};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::chart::{Chart, CoordMask, Point, U, X3};

/// Absolute tolerance for quadrature field evaluation.
pub const QUAD_TOL: f64 = 1e-10;
/// Maximum bisection depth before quadrature reports non-convergence.
pub const QUAD_MAX_DEPTH: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero while evaluating field")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("power {base}^{exponent} is outside the real domain")]
    PowDomain { base: f64, exponent: f64 },
    #[error("evaluation produced a non-finite value")]
    NonFinite,
    #[error("quadrature did not converge after {max_depth} refinements (error estimate {error:e})")]
    QuadratureNonConvergence { max_depth: usize, error: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("coordinate substitution is only supported on symbolic trees")]
    UnsupportedSubstitution,
    #[error("fields belong to different charts")]
    ChartMismatch,
}

#[derive(Debug)]
enum Node {
    Const(f64),
    Coord(usize),
    Add(ScalarField, ScalarField),
    Sub(ScalarField, ScalarField),
    Mul(ScalarField, ScalarField),
    Div(ScalarField, ScalarField),
    Pow(ScalarField, ScalarField),
    Neg(ScalarField),
    Exp(ScalarField),
    Log(ScalarField),
    Sin(ScalarField),
    Cos(ScalarField),
    /// Substitution `x3 -> x3 - eps*u` applied to `base`.
    Shift { base: ScalarField, eps: f64 },
    /// `p -> integral_{lower}^{p[coord]} base(p with coord := z) dz`.
    Integral {
        integrand: ScalarField,
        coord: usize,
        lower: f64,
    },
}

/// Per-point evaluation memo, keyed by node identity. Valid for one point
/// only; sharing it across points gives wrong answers.
pub struct EvalCache {
    map: HashMap<usize, f64>,
}

impl EvalCache {
    pub fn new() -> Self {
        EvalCache {
            map: HashMap::new(),
        }
    }
}

impl Default for EvalCache {
    fn default() -> Self {
        Self::new()
    }
}

/// An evaluatable real-valued function of the chart coordinates with exact
/// partial derivatives. Immutable and cheap to clone.
#[derive(Clone)]
pub struct ScalarField {
    chart: Chart,
    node: Arc<Node>,
    mask: CoordMask,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.display())
    }
}

impl ScalarField {
    fn make(chart: Chart, node: Node, mask: CoordMask) -> Self {
        ScalarField {
            chart,
            node: Arc::new(node),
            mask,
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Set of coordinates this field may depend on.
    pub fn mask(&self) -> CoordMask {
        self.mask
    }

    pub fn depends_on(&self, slot: usize) -> bool {
        self.mask.contains(slot)
    }

    pub fn constant(chart: &Chart, value: f64) -> Self {
        ScalarField::make(chart.clone(), Node::Const(value), CoordMask::EMPTY)
    }

    pub fn zero(chart: &Chart) -> Self {
        ScalarField::constant(chart, 0.0)
    }

    pub fn one(chart: &Chart) -> Self {
        ScalarField::constant(chart, 1.0)
    }

    /// The coordinate function for a slot.
    pub fn coord(chart: &Chart, slot: usize) -> Self {
        assert!(slot < chart.dim(), "coordinate slot out of range");
        ScalarField::make(chart.clone(), Node::Coord(slot), CoordMask::single(slot))
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.node, Node::Const(c) if c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(*self.node, Node::Const(c) if c == 1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.node {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    fn assert_same_chart(&self, other: &ScalarField) {
        assert!(
            self.chart.same_chart(&other.chart),
            "fields belong to different charts"
        );
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_chart(other);
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return ScalarField::constant(&self.chart, a + b);
        }
        let mask = self.mask.union(other.mask);
        ScalarField::make(self.chart.clone(), Node::Add(self.clone(), other.clone()), mask)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_chart(other);
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.neg();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return ScalarField::constant(&self.chart, a - b);
        }
        let mask = self.mask.union(other.mask);
        ScalarField::make(self.chart.clone(), Node::Sub(self.clone(), other.clone()), mask)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_chart(other);
        if self.is_zero() || other.is_zero() {
            return ScalarField::zero(&self.chart);
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return ScalarField::constant(&self.chart, a * b);
        }
        let mask = self.mask.union(other.mask);
        ScalarField::make(self.chart.clone(), Node::Mul(self.clone(), other.clone()), mask)
    }

    pub fn div(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_chart(other);
        if self.is_zero() {
            return ScalarField::zero(&self.chart);
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            if b != 0.0 {
                return ScalarField::constant(&self.chart, a / b);
            }
        }
        let mask = self.mask.union(other.mask);
        ScalarField::make(self.chart.clone(), Node::Div(self.clone(), other.clone()), mask)
    }

    pub fn neg(&self) -> ScalarField {
        if let Some(a) = self.as_const() {
            return ScalarField::constant(&self.chart, -a);
        }
        ScalarField::make(self.chart.clone(), Node::Neg(self.clone()), self.mask)
    }

    pub fn scale(&self, k: f64) -> ScalarField {
        self.mul(&ScalarField::constant(&self.chart, k))
    }

    pub fn pow(&self, exponent: &ScalarField) -> ScalarField {
        self.assert_same_chart(exponent);
        if exponent.is_zero() {
            return ScalarField::one(&self.chart);
        }
        if exponent.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), exponent.as_const()) {
            let r = a.powf(b);
            if r.is_finite() {
                return ScalarField::constant(&self.chart, r);
            }
        }
        let mask = self.mask.union(exponent.mask);
        ScalarField::make(
            self.chart.clone(),
            Node::Pow(self.clone(), exponent.clone()),
            mask,
        )
    }

    pub fn powi(&self, n: i32) -> ScalarField {
        self.pow(&ScalarField::constant(&self.chart, f64::from(n)))
    }

    pub fn exp(&self) -> ScalarField {
        if let Some(a) = self.as_const() {
            return ScalarField::constant(&self.chart, a.exp());
        }
        ScalarField::make(self.chart.clone(), Node::Exp(self.clone()), self.mask)
    }

    pub fn log(&self) -> ScalarField {
        ScalarField::make(self.chart.clone(), Node::Log(self.clone()), self.mask)
    }

    pub fn sin(&self) -> ScalarField {
        if let Some(a) = self.as_const() {
            return ScalarField::constant(&self.chart, a.sin());
        }
        ScalarField::make(self.chart.clone(), Node::Sin(self.clone()), self.mask)
    }

    pub fn cos(&self) -> ScalarField {
        if let Some(a) = self.as_const() {
            return ScalarField::constant(&self.chart, a.cos());
        }
        ScalarField::make(self.chart.clone(), Node::Cos(self.clone()), self.mask)
    }

    /// Composite `f(x3 - eps*u, rest unchanged)`.
    ///
    /// With `eps < 0` this doubles as the reverse substitution, which is how
    /// integrals along the shifted characteristic are assembled.
    pub fn shifted(&self, eps: f64) -> ScalarField {
        if eps == 0.0 || self.as_const().is_some() {
            return self.clone();
        }
        let mut mask = self.mask;
        if mask.contains(X3) {
            mask = mask.with(U);
        }
        ScalarField::make(
            self.chart.clone(),
            Node::Shift {
                base: self.clone(),
                eps,
            },
            mask,
        )
    }

    /// Quadrature field `p -> integral_{lower}^{p[coord]} self(p with coord := z) dz`.
    ///
    /// Its derivative with respect to `coord` returns `self` exactly; other
    /// derivatives pass under the integral sign. Integration constants are
    /// never folded in here: arbitrary functions of an integral solution stay separate
    /// additive slots.
    pub fn antiderivative(&self, coord: usize, lower: f64) -> ScalarField {
        assert!(coord < self.chart.dim(), "coordinate slot out of range");
        if self.is_zero() {
            return ScalarField::zero(&self.chart);
        }
        let mask = self.mask.with(coord);
        ScalarField::make(
            self.chart.clone(),
            Node::Integral {
                integrand: self.clone(),
                coord,
                lower,
            },
            mask,
        )
    }

    /// Exact partial derivative with respect to the coordinate in `slot`.
    pub fn differentiate(&self, slot: usize) -> ScalarField {
        assert!(slot < self.chart.dim(), "coordinate slot out of range");
        if !self.mask.contains(slot) {
            return ScalarField::zero(&self.chart);
        }
        match &*self.node {
            Node::Const(_) => ScalarField::zero(&self.chart),
            Node::Coord(c) => {
                if *c == slot {
                    ScalarField::one(&self.chart)
                } else {
                    ScalarField::zero(&self.chart)
                }
            }
            Node::Add(a, b) => a.differentiate(slot).add(&b.differentiate(slot)),
            Node::Sub(a, b) => a.differentiate(slot).sub(&b.differentiate(slot)),
            Node::Mul(a, b) => {
                let da = a.differentiate(slot).mul(b);
                let db = a.mul(&b.differentiate(slot));
                da.add(&db)
            }
            Node::Div(a, b) => {
                // (a/b)' = a'/b - a b'/b^2
                let da = a.differentiate(slot).div(b);
                let db = a.mul(&b.differentiate(slot)).div(&b.mul(b));
                da.sub(&db)
            }
            Node::Pow(base, expo) => {
                if let Some(n) = expo.as_const() {
                    // d(b^n) = n b^(n-1) b', valid for negative bases with
                    // integer n, which the general rule is not.
                    let lowered = base.pow(&ScalarField::constant(&self.chart, n - 1.0));
                    lowered.scale(n).mul(&base.differentiate(slot))
                } else {
                    // b^e * (e' log b + e b'/b)
                    let t1 = expo.differentiate(slot).mul(&base.log());
                    let t2 = expo.mul(&base.differentiate(slot)).div(base);
                    self.mul(&t1.add(&t2))
                }
            }
            Node::Neg(a) => a.differentiate(slot).neg(),
            Node::Exp(a) => self.mul(&a.differentiate(slot)),
            Node::Log(a) => a.differentiate(slot).div(a),
            Node::Sin(a) => a.cos().mul(&a.differentiate(slot)),
            Node::Cos(a) => a.sin().neg().mul(&a.differentiate(slot)),
            Node::Shift { base, eps } => {
                // d/du f(x3-eps*u, ...) = (d_u f)(shift) - eps (d_3 f)(shift)
                if slot == U {
                    let direct = base.differentiate(U).shifted(*eps);
                    let chain = base.differentiate(X3).shifted(*eps).scale(-*eps);
                    direct.add(&chain)
                } else {
                    base.differentiate(slot).shifted(*eps)
                }
            }
            Node::Integral {
                integrand,
                coord,
                lower,
            } => {
                if slot == *coord {
                    integrand.clone()
                } else {
                    integrand.differentiate(slot).antiderivative(*coord, *lower)
                }
            }
        }
    }

    /// Substitute a constant for one coordinate. Only symbolic trees support
    /// this; shift and quadrature nodes report [`FieldError::UnsupportedSubstitution`].
    pub fn substitute(&self, slot: usize, value: f64) -> Result<ScalarField, FieldError> {
        if !self.mask.contains(slot) {
            return Ok(self.clone());
        }
        let chart = &self.chart;
        match &*self.node {
            Node::Const(c) => Ok(ScalarField::constant(chart, *c)),
            Node::Coord(c) => Ok(if *c == slot {
                ScalarField::constant(chart, value)
            } else {
                self.clone()
            }),
            Node::Add(a, b) => Ok(a.substitute(slot, value)?.add(&b.substitute(slot, value)?)),
            Node::Sub(a, b) => Ok(a.substitute(slot, value)?.sub(&b.substitute(slot, value)?)),
            Node::Mul(a, b) => Ok(a.substitute(slot, value)?.mul(&b.substitute(slot, value)?)),
            Node::Div(a, b) => Ok(a.substitute(slot, value)?.div(&b.substitute(slot, value)?)),
            Node::Pow(a, b) => Ok(a.substitute(slot, value)?.pow(&b.substitute(slot, value)?)),
            Node::Neg(a) => Ok(a.substitute(slot, value)?.neg()),
            Node::Exp(a) => Ok(a.substitute(slot, value)?.exp()),
            Node::Log(a) => Ok(a.substitute(slot, value)?.log()),
            Node::Sin(a) => Ok(a.substitute(slot, value)?.sin()),
            Node::Cos(a) => Ok(a.substitute(slot, value)?.cos()),
            Node::Shift { .. } | Node::Integral { .. } => {
                Err(FieldError::UnsupportedSubstitution)
            }
        }
    }

    /// Evaluate at a point.
    pub fn eval(&self, p: &Point) -> Result<f64, EvalError> {
        let mut cache = EvalCache::new();
        self.eval_cached(p, &mut cache)
    }

    /// Evaluate at a point with a shared per-point memo. The cache must have
    /// been created for this exact point.
    pub fn eval_cached(&self, p: &Point, cache: &mut EvalCache) -> Result<f64, EvalError> {
        let key = Arc::as_ptr(&self.node) as usize;
        if let Some(v) = cache.map.get(&key) {
            return Ok(*v);
        }
        let value = self.eval_uncached(p, cache)?;
        if !value.is_finite() {
            return Err(EvalError::NonFinite);
        }
        cache.map.insert(key, value);
        Ok(value)
    }

    fn eval_uncached(&self, p: &Point, cache: &mut EvalCache) -> Result<f64, EvalError> {
        match &*self.node {
            Node::Const(c) => Ok(*c),
            Node::Coord(c) => Ok(p.get(*c)),
            Node::Add(a, b) => Ok(a.eval_cached(p, cache)? + b.eval_cached(p, cache)?),
            Node::Sub(a, b) => Ok(a.eval_cached(p, cache)? - b.eval_cached(p, cache)?),
            Node::Mul(a, b) => Ok(a.eval_cached(p, cache)? * b.eval_cached(p, cache)?),
            Node::Div(a, b) => {
                let denom = b.eval_cached(p, cache)?;
                if denom == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                Ok(a.eval_cached(p, cache)? / denom)
            }
            Node::Pow(a, b) => {
                let base = a.eval_cached(p, cache)?;
                let expo = b.eval_cached(p, cache)?;
                let r = base.powf(expo);
                if r.is_nan() {
                    return Err(EvalError::PowDomain {
                        base,
                        exponent: expo,
                    });
                }
                Ok(r)
            }
            Node::Neg(a) => Ok(-a.eval_cached(p, cache)?),
            Node::Exp(a) => Ok(a.eval_cached(p, cache)?.exp()),
            Node::Log(a) => {
                let x = a.eval_cached(p, cache)?;
                if x <= 0.0 {
                    return Err(EvalError::LogNonPositive(x));
                }
                Ok(x.ln())
            }
            Node::Sin(a) => Ok(a.eval_cached(p, cache)?.sin()),
            Node::Cos(a) => Ok(a.eval_cached(p, cache)?.cos()),
            Node::Shift { base, eps } => {
                let shifted = p.with_coord(X3, p.get(X3) - eps * p.get(U));
                // The shifted point differs from p, so the memo does not apply.
                base.eval(&shifted)
            }
            Node::Integral {
                integrand,
                coord,
                lower,
            } => {
                let upper = p.get(*coord);
                quad::integrate(
                    |z| integrand.eval(&p.with_coord(*coord, z)),
                    *lower,
                    upper,
                    QUAD_TOL,
                    QUAD_MAX_DEPTH,
                )
            }
        }
    }

    /// Canonical printed form. Parseable for symbolic trees; shift and
    /// quadrature nodes render as pseudo-calls for diagnostics only.
    pub fn display(&self) -> String {
        let mut s = String::new();
        self.print(&mut s, 0);
        s
    }

    // prec: 0 add, 1 mul, 2 unary, 3 pow/atom
    fn print(&self, out: &mut String, prec: u8) {
        let open = |out: &mut String, p: u8| {
            if prec > p {
                out.push('(');
            }
        };
        let close = |out: &mut String, p: u8| {
            if prec > p {
                out.push(')');
            }
        };
        match &*self.node {
            Node::Const(c) => {
                if *c < 0.0 {
                    open(out, 2);
                    out.push_str(&format!("{c}"));
                    close(out, 2);
                } else {
                    out.push_str(&format!("{c}"));
                }
            }
            Node::Coord(c) => out.push_str(self.chart.coord_name(*c)),
            Node::Add(a, b) => {
                open(out, 0);
                a.print(out, 0);
                out.push_str(" + ");
                b.print(out, 1);
                close(out, 0);
            }
            Node::Sub(a, b) => {
                open(out, 0);
                a.print(out, 0);
                out.push_str(" - ");
                b.print(out, 1);
                close(out, 0);
            }
            Node::Mul(a, b) => {
                open(out, 1);
                a.print(out, 1);
                out.push('*');
                b.print(out, 2);
                close(out, 1);
            }
            Node::Div(a, b) => {
                open(out, 1);
                a.print(out, 1);
                out.push('/');
                b.print(out, 2);
                close(out, 1);
            }
            Node::Pow(a, b) => {
                open(out, 3);
                a.print(out, 4);
                out.push('^');
                b.print(out, 3);
                close(out, 3);
            }
            Node::Neg(a) => {
                open(out, 2);
                out.push('-');
                a.print(out, 2);
                close(out, 2);
            }
            Node::Exp(a) => print_call(out, "exp", a),
            Node::Log(a) => print_call(out, "log", a),
            Node::Sin(a) => print_call(out, "sin", a),
            Node::Cos(a) => print_call(out, "cos", a),
            Node::Shift { base, eps } => {
                out.push_str(&format!("shift[{eps}]("));
                base.print(out, 0);
                out.push(')');
            }
            Node::Integral {
                integrand,
                coord,
                lower,
            } => {
                out.push_str(&format!(
                    "int[{} from {lower}](",
                    self.chart.coord_name(*coord)
                ));
                integrand.print(out, 0);
                out.push(')');
            }
        }
    }
}

fn print_call(out: &mut String, name: &str, arg: &ScalarField) {
    out.push_str(name);
    out.push('(');
    arg.print(out, 0);
    out.push(')');
}

/// Central finite difference with one Richardson extrapolation step: the
/// independent derivative oracle. Step scales as `base * (1 + |p_c|)`.
pub fn finite_difference(
    f: &ScalarField,
    slot: usize,
    p: &Point,
    base_step: f64,
) -> Result<f64, EvalError> {
    let h = base_step * (1.0 + p.get(slot).abs());
    let central = |h: f64| -> Result<f64, EvalError> {
        let plus = f.eval(&p.with_coord(slot, p.get(slot) + h))?;
        let minus = f.eval(&p.with_coord(slot, p.get(slot) - h))?;
        Ok((plus - minus) / (2.0 * h))
    };
    let d1 = central(h)?;
    let d2 = central(h / 2.0)?;
    Ok((4.0 * d2 - d1) / 3.0)
}
