//! Closed-form constructors for the two explicit worked examples: the
//! `X_1 = u` family with `F_3 = eps u m_33` (Example I, including its
//! separable sub-example) and the `X_1 = 1` family with `F_3 = eps m_33`
//! (Example II, including its analytic sub-case).
//!
//! Both families advect the transverse frame along the characteristic
//! `x3 - eps u`, so every frame entry is a shifted composite and the
//! identity `m_{is,u} + eps m_{is,3} = 0` holds by construction. The
//! integrals along the shifted characteristic,
//!
//! ```text
//! int_0^u S(z, x3 - eps u + eps z, x^n) dz,
//! ```
//!
//! are realized by conjugating a plain `u`-quadrature with the shift in both
//! directions; this is the one place quadrature and shift interact, and it
//! gets a dedicated finite-difference cross-check in the tests.

use thiserror::Error;

use crate::chart::{Chart, CoordMask, Point, U, V, X3};
use crate::field::{EvalError, FieldError, ScalarField};
use crate::geometry::{CCNVMetric, GeometryError, TransverseFrame};
use crate::killing::{KillingCandidate, KillingError};
use crate::sample::Region;

#[derive(Debug, Error)]
pub enum ExampleError {
    #[error("eps must be nonzero")]
    EpsilonZero,
    #[error("2 p_3 + 1 must be nonzero for the separable form")]
    BadSeparableExponent,
    #[error("{function} must not depend on {coordinate}")]
    MaskViolation {
        function: String,
        coordinate: String,
    },
    #[error("the sampling region includes u = 0, where this family is singular")]
    RegionIncludesUZero,
    #[error("{what} vanishes at {point:?} in the requested region")]
    Degenerate { what: String, point: Point },
    #[error("{what}: expected {want} fields, got {got}")]
    WrongSlotCount {
        what: String,
        want: usize,
        got: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Killing(#[from] KillingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Metric, structured Killing vector, and the closed-form norm field; the
/// analytic sub-case also reports a truncation estimate when the series
/// order is too small for the supplied `f`.
pub struct ExampleBuild {
    pub metric: CCNVMetric,
    pub kv: KillingCandidate,
    pub norm: ScalarField,
    pub truncation: Option<f64>,
}

fn check_mask(
    field: &ScalarField,
    allowed: CoordMask,
    name: &str,
) -> Result<(), ExampleError> {
    let chart = field.chart();
    for slot in field.mask().iter() {
        if !allowed.contains(slot) {
            return Err(ExampleError::MaskViolation {
                function: name.to_string(),
                coordinate: chart.coord_name(slot).to_string(),
            });
        }
    }
    Ok(())
}

fn transverse_mask(chart: &Chart) -> CoordMask {
    let mut m = CoordMask::EMPTY;
    for e in chart.transverse_range() {
        m = m.with(chart.slot_of(e));
    }
    m
}

fn require_no_u0(region: &Region) -> Result<(), ExampleError> {
    let (lo, hi) = region.ranges[U];
    if lo <= 0.0 && hi >= 0.0 {
        return Err(ExampleError::RegionIncludesUZero);
    }
    Ok(())
}

/// `int_0^u f(z, x3 - eps u + eps z, x^n) dz` as an exact field: reverse
/// shift, integrate in `u`, shift forward.
fn characteristic_integral(f: &ScalarField, eps: f64) -> ScalarField {
    f.shifted(-eps).antiderivative(U, 0.0).shifted(eps)
}

/// Probe the frame diagonal for zeros over the region (zeros or sign changes
/// make the frame singular inside the box).
fn check_frame_regularity(
    rows: &[Vec<ScalarField>],
    chart: &Chart,
    region: &Region,
) -> Result<(), ExampleError> {
    let probe = region.sample(chart, 0xd1a6, 64);
    for (ti, row) in rows.iter().enumerate() {
        let mut sign = 0.0f64;
        for p in &probe {
            let v = row[ti].eval(p)?;
            if v.abs() < 1e-8 || (sign != 0.0 && v.signum() != sign) {
                return Err(ExampleError::Degenerate {
                    what: format!("m_{}{}", ti + 3, ti + 3),
                    point: p.clone(),
                });
            }
            sign = v.signum();
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Example I: X_1 = u, F_3 = eps u m_33.
// ---------------------------------------------------------------------------

/// Inputs for the general Example-I builder. All `*_base` fields are
/// functions of the transverse coordinates only; the builder applies the
/// `x3 -> x3 - eps u` shift.
pub struct ExampleISpec {
    pub eps: f64,
    /// Frame profiles `m_ie` before shifting, upper-triangular.
    pub m_base: Vec<Vec<ScalarField>>,
    /// `F_2(u, x^e)`, a free function.
    pub f2: ScalarField,
    /// `A(x3 - eps u, x^n)` before shifting.
    pub a_base: ScalarField,
    /// `B_n(x3 - eps u, x^m)` before shifting, `n = 4..=D`.
    pub b_base: Vec<ScalarField>,
}

pub fn build_example_i(
    chart: &Chart,
    spec: &ExampleISpec,
    region: &Region,
) -> Result<ExampleBuild, ExampleError> {
    if spec.eps == 0.0 {
        return Err(ExampleError::EpsilonZero);
    }
    require_no_u0(region)?;
    let tmask = transverse_mask(chart);
    check_mask(&spec.f2, tmask.with(U), "F_2")?;
    check_mask(&spec.a_base, tmask, "A")?;
    let n = chart.transverse_count();
    if spec.m_base.len() != n {
        return Err(ExampleError::WrongSlotCount {
            what: "m_ie".to_string(),
            want: n,
            got: spec.m_base.len(),
        });
    }
    if spec.b_base.len() != n - 1 {
        return Err(ExampleError::WrongSlotCount {
            what: "B_n".to_string(),
            want: n - 1,
            got: spec.b_base.len(),
        });
    }
    for row in &spec.m_base {
        for entry in row {
            check_mask(entry, tmask, "m_ie")?;
        }
    }
    for (k, b) in spec.b_base.iter().enumerate() {
        check_mask(b, tmask, &format!("B_{}", k + 4))?;
    }

    let eps = spec.eps;
    let u = ScalarField::coord(chart, U);
    let rows: Vec<Vec<ScalarField>> = spec
        .m_base
        .iter()
        .map(|row| row.iter().map(|f| f.shifted(eps)).collect())
        .collect();
    check_frame_regularity(&rows, chart, region)?;
    let m33 = rows[0][0].clone();
    let m33_sq = m33.mul(&m33);
    let f2 = &spec.f2;
    let f2_u = f2.differentiate(U);

    // S = (u F_{2,u})_u + eps u F_{2,3u} + eps^2 u (m_33^2)_u
    let s = u
        .mul(&f2_u)
        .differentiate(U)
        .add(&u.mul(&f2_u.differentiate(X3)).scale(eps))
        .add(&u.mul(&m33_sq.differentiate(U)).scale(eps * eps));
    let h = spec
        .a_base
        .shifted(eps)
        .sub(&characteristic_integral(&s, eps))
        .div(&u);

    // W_3 = -(H + F_{2,u})/eps - F_{2,3} - eps m_33^2
    let w3 = h
        .add(&f2_u)
        .scale(-1.0 / eps)
        .sub(&f2.differentiate(X3))
        .sub(&m33_sq.scale(eps));

    // core of T_n: (u F_2)_u + eps u F_{2,3} + eps^2 u m_33^2
    let t_core = u
        .mul(f2)
        .differentiate(U)
        .add(&u.mul(&f2.differentiate(X3)).scale(eps))
        .add(&u.mul(&m33_sq).scale(eps * eps));

    let mut w_hat = vec![w3];
    for nleg in 4..=chart.dim() {
        let slot = chart.slot_of(nleg);
        let m3n = rows[0][nleg - 3].clone();
        let t_n = t_core
            .differentiate(slot)
            .add(&m3n.mul(&m33).scale(eps));
        let wn = spec.b_base[nleg - 4]
            .shifted(eps)
            .sub(&characteristic_integral(&t_n, eps))
            .div(&u);
        w_hat.push(wn);
    }

    let frame = TransverseFrame::new(chart, rows)?;
    let metric = CCNVMetric::new_unchecked(chart, h, w_hat, frame)?;

    let f3 = m33.mul(&u).scale(eps);
    let kv = KillingCandidate::new(u.clone(), f2.clone(), f3.clone())?;

    let v = ScalarField::coord(chart, V);
    let norm = u
        .mul(&v)
        .scale(-2.0)
        .add(&u.mul(f2).scale(2.0))
        .add(&f3.mul(&f3));

    Ok(ExampleBuild {
        metric,
        kv,
        norm,
        truncation: None,
    })
}

/// Separable sub-example of Example I: `m_3s = (x3 - eps u)^{p_s} h_s(x^n)`
/// with the identity block on the remaining legs. Every metric function is
/// closed-form; no quadrature appears.
pub struct ExampleISeparableSpec {
    pub eps: f64,
    /// Exponents `p_s`, `s = 3..=D`.
    pub p: Vec<f64>,
    /// Profiles `h_s(x^n)`, `s = 3..=D`.
    pub h: Vec<ScalarField>,
    /// `g(u, x^n)`.
    pub g: ScalarField,
    /// `A(x3 - eps u, x^n)` before shifting.
    pub a_base: ScalarField,
    /// `B_n(x3 - eps u, x^m)` before shifting.
    pub b_base: Vec<ScalarField>,
}

pub fn build_example_i_separable(
    chart: &Chart,
    spec: &ExampleISeparableSpec,
    region: &Region,
) -> Result<ExampleBuild, ExampleError> {
    if spec.eps == 0.0 {
        return Err(ExampleError::EpsilonZero);
    }
    require_no_u0(region)?;
    let n = chart.transverse_count();
    if spec.p.len() != n || spec.h.len() != n {
        return Err(ExampleError::WrongSlotCount {
            what: "p_s / h_s".to_string(),
            want: n,
            got: spec.p.len().min(spec.h.len()),
        });
    }
    let p3 = spec.p[0];
    if (2.0 * p3 + 1.0).abs() < 1e-12 {
        return Err(ExampleError::BadSeparableExponent);
    }
    let tmask = transverse_mask(chart);
    let xn_mask = tmask.without(X3);
    for (k, h) in spec.h.iter().enumerate() {
        check_mask(h, xn_mask, &format!("h_{}", k + 3))?;
    }
    check_mask(&spec.g, xn_mask.with(U), "g")?;
    check_mask(&spec.a_base, tmask, "A")?;
    for (k, b) in spec.b_base.iter().enumerate() {
        check_mask(b, tmask, &format!("B_{}", k + 4))?;
    }

    let eps = spec.eps;
    let u = ScalarField::coord(chart, U);
    // w = x3 - eps u
    let w = ScalarField::coord(chart, X3).shifted(eps);
    let x3 = ScalarField::coord(chart, X3);
    let h3 = &spec.h[0];
    let h3_sq = h3.mul(h3);

    let pow = |base: &ScalarField, e: f64| base.pow(&ScalarField::constant(chart, e));

    // frame: row 3 = w^{p_s} h_s, identity block below
    let mut rows = vec![vec![ScalarField::zero(chart); n]; n];
    for s in 0..n {
        rows[0][s] = pow(&w, spec.p[s]).mul(&spec.h[s]);
    }
    for i in 1..n {
        rows[i][i] = ScalarField::one(chart);
    }
    check_frame_regularity(&rows, chart, region)?;

    // F_2 = -eps/(2 p3 + 1) w^{2 p3 + 1} h_3^2 + g
    let f2 = pow(&w, 2.0 * p3 + 1.0)
        .mul(&h3_sq)
        .scale(-eps / (2.0 * p3 + 1.0))
        .add(&spec.g);

    // H = -eps^2 w^{2 p3 - 1} [x3 - eps (p3 + 1) u] h_3^2 - g_u + A / u.
    // The bracket equals w - eps p3 u; expanding it keeps the p3 = 0 case
    // free of the removable w^{-1} singularity.
    let a_shift = spec.a_base.shifted(eps);
    let h_field = pow(&w, 2.0 * p3)
        .sub(&pow(&w, 2.0 * p3 - 1.0).mul(&u).scale(eps * p3))
        .mul(&h3_sq)
        .scale(-eps * eps)
        .sub(&spec.g.differentiate(U))
        .add(&a_shift.div(&u));

    // W_3 = -eps^2 p3 u w^{2 p3 - 1} h_3^2 - A / (eps u)
    let w3 = pow(&w, 2.0 * p3 - 1.0)
        .mul(&u)
        .mul(&h3_sq)
        .scale(-eps * eps * p3)
        .sub(&a_shift.div(&u.scale(eps)));

    // W_n = eps w^{p3} h_3 { 2 w^{p3} / (2 p3 + 1) [x3 - eps (p3 + 3/2) u] h_{3,n}
    //        - w^{p_n} h_n } - g_{,n} + B_n / u
    let mut w_hat = vec![w3];
    for nleg in 4..=chart.dim() {
        let slot = chart.slot_of(nleg);
        let brace = pow(&w, p3)
            .scale(2.0 / (2.0 * p3 + 1.0))
            .mul(&x3.sub(&u.scale(eps * (p3 + 1.5))))
            .mul(&h3.differentiate(slot))
            .sub(&pow(&w, spec.p[nleg - 3]).mul(&spec.h[nleg - 3]));
        let wn = pow(&w, p3)
            .mul(h3)
            .scale(eps)
            .mul(&brace)
            .sub(&spec.g.differentiate(slot))
            .add(&spec.b_base[nleg - 4].shifted(eps).div(&u));
        w_hat.push(wn);
    }

    let frame = TransverseFrame::new(chart, rows)?;
    let m33 = frame.lower(3, 3).clone();
    let metric = CCNVMetric::new_unchecked(chart, h_field, w_hat, frame)?;

    let f3 = m33.mul(&u).scale(eps);
    let kv = KillingCandidate::new(u.clone(), f2.clone(), f3.clone())?;
    let v = ScalarField::coord(chart, V);
    let norm = u
        .mul(&v)
        .scale(-2.0)
        .add(&u.mul(&f2).scale(2.0))
        .add(&f3.mul(&f3));

    Ok(ExampleBuild {
        metric,
        kv,
        norm,
        truncation: None,
    })
}

// ---------------------------------------------------------------------------
// Example II: X_1 = 1, F_3 = eps m_33.
// ---------------------------------------------------------------------------

/// Inputs for the general Example-II builder. `F_2` and `E_n` are given as
/// bases in the transverse coordinates and shifted by the builder; `H` and
/// `f` are free functions of the stated arguments.
pub struct ExampleIISpec {
    pub eps: f64,
    /// Frame profiles before shifting, upper-triangular.
    pub m_base: Vec<Vec<ScalarField>>,
    /// `H(u, x^e)`, a free function.
    pub h: ScalarField,
    /// `F_2(x3 - eps u, x^n)` before shifting.
    pub f2_base: ScalarField,
    /// `f(x^e)`.
    pub f: ScalarField,
    /// `E_n(x3 - eps u, x^m)` before shifting.
    pub e_base: Vec<ScalarField>,
}

pub fn build_example_ii(
    chart: &Chart,
    spec: &ExampleIISpec,
    region: &Region,
) -> Result<ExampleBuild, ExampleError> {
    if spec.eps == 0.0 {
        return Err(ExampleError::EpsilonZero);
    }
    let tmask = transverse_mask(chart);
    check_mask(&spec.h, tmask.with(U), "H")?;
    check_mask(&spec.f2_base, tmask.without(X3).with(X3), "F_2")?;
    check_mask(&spec.f2_base, tmask, "F_2")?;
    check_mask(&spec.f, tmask, "f")?;
    let n = chart.transverse_count();
    if spec.m_base.len() != n {
        return Err(ExampleError::WrongSlotCount {
            what: "m_ie".to_string(),
            want: n,
            got: spec.m_base.len(),
        });
    }
    if spec.e_base.len() != n - 1 {
        return Err(ExampleError::WrongSlotCount {
            what: "E_n".to_string(),
            want: n - 1,
            got: spec.e_base.len(),
        });
    }
    for row in &spec.m_base {
        for entry in row {
            check_mask(entry, tmask, "m_ie")?;
        }
    }
    for (k, e) in spec.e_base.iter().enumerate() {
        check_mask(e, tmask, &format!("E_{}", k + 4))?;
    }

    let eps = spec.eps;
    let rows: Vec<Vec<ScalarField>> = spec
        .m_base
        .iter()
        .map(|row| row.iter().map(|f| f.shifted(eps)).collect())
        .collect();
    check_frame_regularity(&rows, chart, region)?;
    let m33 = rows[0][0].clone();
    let f2 = spec.f2_base.shifted(eps);

    // W_3 = int H_{,3} du + (F_2 + f)/eps
    let w3 = spec
        .h
        .differentiate(X3)
        .antiderivative(U, 0.0)
        .add(&f2.add(&spec.f).scale(1.0 / eps));

    let mut w_hat = vec![w3];
    for nleg in 4..=chart.dim() {
        let slot = chart.slot_of(nleg);
        // L_n = H_{,n} + eps int H_{,3n} du + f_{,n}
        let l_n = spec
            .h
            .differentiate(slot)
            .add(
                &spec
                    .h
                    .differentiate(X3)
                    .differentiate(slot)
                    .antiderivative(U, 0.0)
                    .scale(eps),
            )
            .add(&spec.f.differentiate(slot));
        let wn = characteristic_integral(&l_n, eps).add(&spec.e_base[nleg - 4].shifted(eps));
        w_hat.push(wn);
    }

    let frame = TransverseFrame::new(chart, rows)?;
    let metric = CCNVMetric::new_unchecked(chart, spec.h.clone(), w_hat, frame)?;

    let f3 = m33.scale(eps);
    let kv = KillingCandidate::new(ScalarField::one(chart), f2.clone(), f3.clone())?;
    let norm = f2.scale(2.0).add(&f3.mul(&f3));

    Ok(ExampleBuild {
        metric,
        kv,
        norm,
        truncation: None,
    })
}

/// Analytic sub-case of Example II: `H = H(x3 - eps u, x^n)` and `f`
/// analytic at `x3 = 0` (polynomial recommended). `W_3` is algebraic and
/// `W_n` is the truncated power series
///
/// ```text
/// W_n = (1/eps) sum_{p=0}^N d_n d_3^p f(0, x^m) (x3)^{p+1} / (p+1)! + E_n.
/// ```
///
/// For polynomial `f` of degree at most `N` the construction is exact; if
/// the series is genuinely truncated the build carries a residual estimate.
pub struct ExampleIIAnalyticSpec {
    pub eps: f64,
    pub m_base: Vec<Vec<ScalarField>>,
    /// `H(x3 - eps u, x^n)` before shifting.
    pub h_base: ScalarField,
    pub f2_base: ScalarField,
    /// `f(x^e)`: must support substitution of `x3 = 0`, so a symbolic tree.
    pub f: ScalarField,
    pub e_base: Vec<ScalarField>,
    /// Series truncation order `N`.
    pub order: usize,
}

pub fn build_example_ii_analytic(
    chart: &Chart,
    spec: &ExampleIIAnalyticSpec,
    region: &Region,
) -> Result<ExampleBuild, ExampleError> {
    if spec.eps == 0.0 {
        return Err(ExampleError::EpsilonZero);
    }
    let tmask = transverse_mask(chart);
    check_mask(&spec.h_base, tmask, "H")?;
    check_mask(&spec.f2_base, tmask, "F_2")?;
    check_mask(&spec.f, tmask, "f")?;
    let n = chart.transverse_count();
    if spec.m_base.len() != n || spec.e_base.len() != n - 1 {
        return Err(ExampleError::WrongSlotCount {
            what: "m_ie / E_n".to_string(),
            want: n,
            got: spec.m_base.len().min(spec.e_base.len() + 1),
        });
    }
    for row in &spec.m_base {
        for entry in row {
            check_mask(entry, tmask, "m_ie")?;
        }
    }

    let eps = spec.eps;
    let rows: Vec<Vec<ScalarField>> = spec
        .m_base
        .iter()
        .map(|row| row.iter().map(|f| f.shifted(eps)).collect())
        .collect();
    check_frame_regularity(&rows, chart, region)?;
    let m33 = rows[0][0].clone();
    let h = spec.h_base.shifted(eps);
    let f2 = spec.f2_base.shifted(eps);

    // W_3 = -(H - F_2 - f)/eps
    let w3 = h.sub(&f2).sub(&spec.f).scale(-1.0 / eps);

    let x3 = ScalarField::coord(chart, X3);
    let mut w_hat = vec![w3];
    for nleg in 4..=chart.dim() {
        let slot = chart.slot_of(nleg);
        let mut series = ScalarField::zero(chart);
        let mut d3p = spec.f.clone();
        let mut factorial = 1.0f64;
        for p in 0..=spec.order {
            factorial *= (p + 1) as f64;
            let coeff = d3p.differentiate(slot).substitute(X3, 0.0)?;
            let term = coeff
                .mul(&x3.pow(&ScalarField::constant(chart, (p + 1) as f64)))
                .scale(1.0 / factorial);
            series = series.add(&term);
            d3p = d3p.differentiate(X3);
        }
        let wn = series
            .scale(1.0 / eps)
            .add(&spec.e_base[nleg - 4].shifted(eps));
        w_hat.push(wn);
    }

    // truncation estimate: the next series derivative, sampled over the region
    let next = {
        let mut d = spec.f.clone();
        for _ in 0..=spec.order {
            d = d.differentiate(X3);
        }
        d
    };
    let truncation = if next.is_zero() {
        None
    } else {
        let mut worst = 0.0f64;
        for p in region.sample(chart, 0xe5a, 32) {
            worst = worst.max(next.eval(&p)?.abs());
        }
        let mut factorial = 1.0f64;
        for k in 1..=(spec.order + 2) {
            factorial *= k as f64;
        }
        Some(worst / factorial)
    };

    let frame = TransverseFrame::new(chart, rows)?;
    let metric = CCNVMetric::new_unchecked(chart, h, w_hat, frame)?;
    let f3 = m33.scale(eps);
    let kv = KillingCandidate::new(ScalarField::one(chart), f2.clone(), f3.clone())?;
    let norm = f2.scale(2.0).add(&f3.mul(&f3));

    Ok(ExampleBuild {
        metric,
        kv,
        norm,
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::killing::{
        classify_case, commutator_at, frame_killing_report, lie_residual_report, CaseTag,
        CoordinateVector, KvForm,
    };

    fn chart5() -> Chart {
        Chart::new(5).unwrap()
    }

    fn identity_base(c: &Chart) -> Vec<Vec<ScalarField>> {
        let n = c.transverse_count();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|e| {
                        if i == e {
                            ScalarField::one(c)
                        } else {
                            ScalarField::zero(c)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn verify_pair(
        metric: &CCNVMetric,
        kv: &KillingCandidate,
        sample: &[Point],
        tol: f64,
        label: &str,
    ) {
        let lie = lie_residual_report(&kv.to_coordinate_vector(metric), metric, sample).unwrap();
        assert!(
            lie.max_abs() < tol,
            "{label}: lie residual {:e}",
            lie.max_abs()
        );
        let frame = frame_killing_report(kv, metric, sample).unwrap();
        assert!(
            frame.max_abs() < tol,
            "{label}: frame residual {:e}",
            frame.max_abs()
        );
    }

    #[test]
    fn example_i_separable_simplest_is_killing() {
        let c = chart5();
        let region = Region::default_box(&c);
        let spec = ExampleISeparableSpec {
            eps: 1.0,
            p: vec![0.0, 0.0, 0.0],
            h: vec![
                ScalarField::one(&c),
                ScalarField::zero(&c),
                ScalarField::zero(&c),
            ],
            g: ScalarField::zero(&c),
            a_base: ScalarField::zero(&c),
            b_base: vec![ScalarField::zero(&c); 2],
        };
        let built = build_example_i_separable(&c, &spec, &region).unwrap();
        // H = -eps^2 = -1, frame = identity, W = 0
        let p = Point::new(&c, vec![1.0, 0.5, 0.3, -0.2, 0.8]).unwrap();
        assert!((built.metric.h().eval(&p).unwrap() + 1.0).abs() < 1e-14);
        assert!(built.metric.w_hat(3).is_zero());
        // hand substitution of the assembled matrix at (1, 0, 2, 0, 0):
        // g_uu = 2H = -2, g_uv = 1, transverse block = identity, rest 0
        let q = Point::new(&c, vec![1.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let g = built.metric.metric_at(&q).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let want = match (a, b) {
                    (0, 0) => -2.0,
                    (0, 1) | (1, 0) => 1.0,
                    (i, j) if i == j && i >= 2 => 1.0,
                    _ => 0.0,
                };
                assert!((g[(a, b)] - want).abs() < 1e-14, "g[{a}{b}] = {}", g[(a, b)]);
            }
        }
        let sample = region.sample(&c, 41, 30);
        verify_pair(&built.metric, &built.kv, &sample, 1e-10, "exI separable p3=0");
        assert_eq!(built.kv.form(), KvForm::B);
        // this instance is flat space in disguise, so the Case-2 connection
        // conditions hold too; D_3 X_1 = 0 still puts it in Case 1
        let tag = classify_case(&built.kv, &built.metric, &sample).unwrap();
        assert!(matches!(tag, CaseTag::Case1 | CaseTag::Both));
        // norm at (u=1, v=1, x3=1): F_2 = -(x3-u) = 0, norm = -2uv + (eps u m33)^2 = -1
        let q = Point::new(&c, vec![1.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((built.norm.eval(&q).unwrap() + 1.0).abs() < 1e-12);
        assert!((built.kv.norm_at(&built.metric, &q).unwrap() + 1.0).abs() < 1e-12);
        // hand substitution of the coordinate components at (1.5, 0.25, 0.5):
        // X^u = u, X^3 = eps u m_33 = u, X^v = -v - x3 + 2u, X^n = 0
        let r = Point::new(&c, vec![1.5, 0.25, 0.5, 0.0, 0.0]).unwrap();
        let comps = built.kv.to_coordinate_vector(&built.metric).eval(&r).unwrap();
        assert_eq!(comps, vec![1.5, 2.25, 1.5, 0.0, 0.0]);
    }

    #[test]
    fn example_i_separable_p3_one_out_of_gauge_killing() {
        // p3 = 1 gives W_3 != 0: the coordinate oracle and the (gauge-free)
        // frame equations must both still pass.
        let c = chart5();
        let mut region = Region::default_box(&c);
        // keep w = x3 + u positive: eps = -1, x3 > -0.4
        region.ranges[X3] = (-0.4, 1.0);
        let spec = ExampleISeparableSpec {
            eps: -1.0,
            p: vec![1.0, 0.0, 0.0],
            h: vec![
                ScalarField::one(&c),
                ScalarField::zero(&c),
                ScalarField::zero(&c),
            ],
            g: ScalarField::zero(&c),
            a_base: ScalarField::zero(&c),
            b_base: vec![ScalarField::zero(&c); 2],
        };
        let built = build_example_i_separable(&c, &spec, &region).unwrap();
        assert!(!built.metric.w3_gauge());
        let sample = region.sample(&c, 43, 25);
        verify_pair(&built.metric, &built.kv, &sample, 1e-9, "exI separable p3=1");
    }

    #[test]
    fn example_i_general_matches_separable() {
        let c = chart5();
        let region = Region::default_box(&c);
        let x3 = ScalarField::coord(&c, X3);
        let x4 = ScalarField::coord(&c, 3);
        let u = ScalarField::coord(&c, U);
        // p3 = 0, h3 = 1 + 0.2 x4^2, h4 = 0.3, g = 0.1 u x4, A = 0.4 x3 x4,
        // B_4 = 0.2 x3, B_5 = 0
        let h3 = ScalarField::one(&c).add(&x4.powi(2).scale(0.2));
        let g = u.mul(&x4).scale(0.1);
        let a_base = x3.mul(&x4).scale(0.4);
        let b4 = x3.scale(0.2);
        let eps = 1.0;

        let sspec = ExampleISeparableSpec {
            eps,
            p: vec![0.0, 0.0, 0.0],
            h: vec![h3.clone(), ScalarField::constant(&c, 0.3), ScalarField::zero(&c)],
            g: g.clone(),
            a_base: a_base.clone(),
            b_base: vec![b4.clone(), ScalarField::zero(&c)],
        };
        let sep = build_example_i_separable(&c, &sspec, &region).unwrap();

        // same inputs through the general builder: m_3s bases, the same F_2
        let mut m_base = identity_base(&c);
        m_base[0][0] = h3.clone();
        m_base[0][1] = ScalarField::constant(&c, 0.3);
        let w = x3.shifted(eps);
        let f2 = w.mul(&h3.mul(&h3)).scale(-eps).add(&g);
        let gspec = ExampleISpec {
            eps,
            m_base,
            f2,
            a_base,
            b_base: vec![b4, ScalarField::zero(&c)],
        };
        let gen = build_example_i(&c, &gspec, &region).unwrap();

        let sample = region.sample(&c, 47, 15);
        for p in &sample {
            let hs = sep.metric.h().eval(p).unwrap();
            let hg = gen.metric.h().eval(p).unwrap();
            assert!(
                (hs - hg).abs() < 1e-8,
                "H mismatch at {p:?}: {hs} vs {hg}"
            );
            for e in 3..=5 {
                let ws = sep.metric.w_hat(e).eval(p).unwrap();
                let wg = gen.metric.w_hat(e).eval(p).unwrap();
                assert!(
                    (ws - wg).abs() < 1e-8,
                    "W_{e} mismatch at {p:?}: {ws} vs {wg}"
                );
            }
        }
        verify_pair(&gen.metric, &gen.kv, &sample, 1e-7, "exI general");
        verify_pair(&sep.metric, &sep.kv, &sample, 1e-8, "exI separable rich");
        // genuinely curved instance: strictly Case 1
        assert_eq!(
            classify_case(&sep.kv, &sep.metric, &sample).unwrap(),
            CaseTag::Case1
        );
    }

    #[test]
    fn example_i_advection_identity() {
        let c = chart5();
        let region = Region::default_box(&c);
        let x3 = ScalarField::coord(&c, X3);
        let x4 = ScalarField::coord(&c, 3);
        let mut m_base = identity_base(&c);
        m_base[0][0] = ScalarField::one(&c).add(&x3.powi(2).scale(0.1)).add(&x4.scale(0.2));
        m_base[1][2] = x3.mul(&x4).scale(0.3);
        let spec = ExampleISpec {
            eps: 0.7,
            m_base,
            f2: ScalarField::zero(&c),
            a_base: ScalarField::zero(&c),
            b_base: vec![ScalarField::zero(&c); 2],
        };
        let built = build_example_i(&c, &spec, &region).unwrap();
        let frame = built.metric.frame();
        for p in region.sample(&c, 53, 20) {
            for i in 3..=5 {
                for e in 3..=5 {
                    let m = frame.lower(i, e);
                    let r = m.differentiate(U).eval(&p).unwrap()
                        + 0.7 * m.differentiate(X3).eval(&p).unwrap();
                    assert!(r.abs() < 1e-12, "advection identity m_{i}{e}: {r}");
                }
            }
            // hence B_33 = m_{33,u} m_3^{~3} = -eps (d_3 m_33) m_3^{~3}
            let scalars = built.metric.frame_scalars_at(&p).unwrap();
            let want = -0.7
                * frame.lower(3, 3).differentiate(X3).eval(&p).unwrap()
                * frame.upper(3, 3).eval(&p).unwrap();
            assert!(
                (scalars.b_ij(3, 3) - want).abs() < 1e-10,
                "B_33 = {} vs -eps m_33,3 m_3^3 = {want}",
                scalars.b_ij(3, 3)
            );
        }
    }

    #[test]
    fn example_i_curvature_symmetries() {
        // Ricci symmetry and the Riemann antisymmetries/first Bianchi on a
        // curved separable instance, 20 random points.
        let c = chart5();
        let region = Region::default_box(&c);
        let x4 = ScalarField::coord(&c, 3);
        let spec = ExampleISeparableSpec {
            eps: 1.0,
            p: vec![0.0, 0.0, 0.0],
            h: vec![
                ScalarField::one(&c).add(&x4.powi(2).scale(0.2)),
                x4.scale(0.3),
                ScalarField::zero(&c),
            ],
            g: ScalarField::zero(&c),
            a_base: ScalarField::zero(&c),
            b_base: vec![ScalarField::zero(&c); 2],
        };
        let built = build_example_i_separable(&c, &spec, &region).unwrap();
        for p in region.sample(&c, 73, 20) {
            let s = built.metric.curvature_at(&p).unwrap();
            let g = built.metric.metric_at(&p).unwrap();
            let low = s.riemann_lowered(&g);
            for a in 0..5 {
                for b in 0..5 {
                    assert!((s.ricci[a][b] - s.ricci[b][a]).abs() < 1e-9);
                    for cc in 0..5 {
                        for d in 0..5 {
                            assert!((low[a][b][cc][d] + low[b][a][cc][d]).abs() < 1e-9);
                            assert!((low[a][b][cc][d] + low[a][b][d][cc]).abs() < 1e-9);
                            let bianchi =
                                low[a][b][cc][d] + low[a][cc][d][b] + low[a][d][b][cc];
                            assert!(bianchi.abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn example_ii_simple_globally_timelike() {
        let c = chart5();
        let region = Region::default_box(&c);
        // H = 0, f = 0, F_2 = -1, m = identity: norm = 2 F_2 + eps^2 = -1
        let spec = ExampleIISpec {
            eps: 1.0,
            m_base: identity_base(&c),
            h: ScalarField::zero(&c),
            f2_base: ScalarField::constant(&c, -1.0),
            f: ScalarField::zero(&c),
            e_base: vec![ScalarField::zero(&c); 2],
        };
        let built = build_example_ii(&c, &spec, &region).unwrap();
        let sample = region.sample(&c, 59, 30);
        verify_pair(&built.metric, &built.kv, &sample, 1e-10, "exII simple");
        for p in &sample {
            assert!((built.norm.eval(p).unwrap() + 1.0).abs() < 1e-12);
            assert!((built.kv.norm_at(&built.metric, p).unwrap() + 1.0).abs() < 1e-12);
        }
        // form A, commutes with ell
        assert_eq!(built.kv.form(), KvForm::A);
        let x = built.kv.to_coordinate_vector(&built.metric);
        let ell = CoordinateVector::ell(&c);
        for p in sample.iter().take(5) {
            let br = commutator_at(&x, &ell, p).unwrap();
            for b in br {
                assert!(b.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn example_ii_rich_passes_both_paths() {
        let c = chart5();
        let region = Region::default_box(&c);
        let u = ScalarField::coord(&c, U);
        let x3 = ScalarField::coord(&c, X3);
        let x4 = ScalarField::coord(&c, 3);
        let x5 = ScalarField::coord(&c, 4);
        let mut m_base = identity_base(&c);
        m_base[0][0] = ScalarField::one(&c).add(&x3.powi(2).scale(0.1));
        m_base[0][1] = x4.scale(0.2);
        let spec = ExampleIISpec {
            eps: 0.8,
            m_base,
            h: u.mul(&x3.powi(2)).scale(0.3).add(&x4.mul(&x5).scale(0.2)),
            f2_base: x3.scale(0.5).add(&x4.powi(2).scale(0.3)),
            f: x3.mul(&x4).scale(0.4),
            e_base: vec![x3.scale(0.1), ScalarField::zero(&c)],
        };
        let built = build_example_ii(&c, &spec, &region).unwrap();
        let sample = region.sample(&c, 61, 15);
        verify_pair(&built.metric, &built.kv, &sample, 1e-7, "exII rich");
        // norm closed form matches contraction (quadrature tolerance)
        for p in sample.iter().take(8) {
            let a = built.norm.eval(p).unwrap();
            let b = built.kv.norm_at(&built.metric, p).unwrap();
            assert!((a - b).abs() < 1e-7, "norm {a} vs {b}");
        }
    }

    #[test]
    fn example_ii_analytic_polynomial_exact() {
        let c = chart5();
        let region = Region::default_box(&c);
        let x3 = ScalarField::coord(&c, X3);
        let x4 = ScalarField::coord(&c, 3);
        // f = x3 * x4, N = 1: W_4 = (x3)^2 / (2 eps) + E_4
        let spec = ExampleIIAnalyticSpec {
            eps: 1.0,
            m_base: identity_base(&c),
            h_base: x3.powi(2).scale(0.5),
            f2_base: x3.scale(0.3),
            f: x3.mul(&x4),
            e_base: vec![ScalarField::zero(&c); 2],
            order: 1,
        };
        let built = build_example_ii_analytic(&c, &spec, &region).unwrap();
        assert!(built.truncation.is_none());
        let p = Point::new(&c, vec![0.9, 0.1, 0.6, -0.4, 0.3]).unwrap();
        assert!((built.metric.w_hat(4).eval(&p).unwrap() - 0.18).abs() < 1e-14);
        let sample = region.sample(&c, 67, 25);
        verify_pair(&built.metric, &built.kv, &sample, 1e-9, "exII analytic");
    }

    #[test]
    fn example_ii_analytic_truncation_reported() {
        let c = chart5();
        let region = Region::default_box(&c);
        let x3 = ScalarField::coord(&c, X3);
        let x4 = ScalarField::coord(&c, 3);
        let spec = ExampleIIAnalyticSpec {
            eps: 1.0,
            m_base: identity_base(&c),
            h_base: ScalarField::zero(&c),
            f2_base: ScalarField::zero(&c),
            f: x3.powi(3).mul(&x4),
            e_base: vec![ScalarField::zero(&c); 2],
            order: 1,
        };
        let built = build_example_ii_analytic(&c, &spec, &region).unwrap();
        assert!(built.truncation.is_some());
        assert!(built.truncation.unwrap() > 0.0);
    }

    #[test]
    fn example_ii_analytic_f_zero_reduces() {
        let c = chart5();
        let region = Region::default_box(&c);
        let x3 = ScalarField::coord(&c, X3);
        let spec = ExampleIIAnalyticSpec {
            eps: 2.0,
            m_base: identity_base(&c),
            h_base: x3.powi(2),
            f2_base: x3.scale(0.4),
            f: ScalarField::zero(&c),
            e_base: vec![x3.scale(0.2), ScalarField::zero(&c)],
            order: 3,
        };
        let built = build_example_ii_analytic(&c, &spec, &region).unwrap();
        // W_n = E_n when f = 0
        let p = Point::new(&c, vec![0.5, 0.0, 0.8, 0.2, -0.1]).unwrap();
        let want = 0.2 * (0.8 - 2.0 * 0.5);
        assert!((built.metric.w_hat(4).eval(&p).unwrap() - want).abs() < 1e-14);
        // W_3 = -(H - F_2 - f)/eps
        let h = built.metric.h().eval(&p).unwrap();
        let f2 = built.kv.f2().eval(&p).unwrap();
        let w3 = built.metric.w_hat(3).eval(&p).unwrap();
        assert!((w3 + (h - f2) / 2.0).abs() < 1e-14);
        let sample = region.sample(&c, 71, 20);
        verify_pair(&built.metric, &built.kv, &sample, 1e-9, "exII analytic f=0");
    }

    #[test]
    fn builders_reject_bad_inputs() {
        let c = chart5();
        let region = Region::default_box(&c);
        let v = ScalarField::coord(&c, V);
        let spec = ExampleISpec {
            eps: 0.0,
            m_base: identity_base(&c),
            f2: ScalarField::zero(&c),
            a_base: ScalarField::zero(&c),
            b_base: vec![ScalarField::zero(&c); 2],
        };
        assert!(matches!(
            build_example_i(&c, &spec, &region),
            Err(ExampleError::EpsilonZero)
        ));
        let spec = ExampleISpec {
            eps: 1.0,
            m_base: identity_base(&c),
            f2: ScalarField::zero(&c),
            a_base: v,
            b_base: vec![ScalarField::zero(&c); 2],
        };
        match build_example_i(&c, &spec, &region) {
            Err(ExampleError::MaskViolation {
                function,
                coordinate,
            }) => {
                assert_eq!(function, "A");
                assert_eq!(coordinate, "v");
            }
            other => panic!("expected mask violation, got {:?}", other.err()),
        }
        // A depending on u directly (not through the shift) is rejected
        let u = ScalarField::coord(&c, U);
        let spec = ExampleISpec {
            eps: 1.0,
            m_base: identity_base(&c),
            f2: ScalarField::zero(&c),
            a_base: u,
            b_base: vec![ScalarField::zero(&c); 2],
        };
        assert!(matches!(
            build_example_i(&c, &spec, &region),
            Err(ExampleError::MaskViolation { .. })
        ));
    }
}
