//! Killing vector candidates, the two independent verification paths, case
//! classification, commutators, and causal character.
//!
//! A candidate is the structured triple `(F_1, F_2, F_3)` of v-independent
//! fields; against a metric it completes to frame components
//!
//! ```text
//! X_1 = F_1,   X_2 = -D_2(X_1) v + F_2,   X_3 = -D_3(X_1) v + F_3,   X_m = 0,
//! ```
//!
//! which is the general solution of the v-derivative Killing equations on a
//! CCNV background. Verification runs twice: once through the frame Killing
//! equations (using the frame connection) and once through the coordinate
//! Lie derivative, which never touches the frame machinery. The two paths
//! agreeing on genuine and on perturbed candidates is what freezes the frame
//! sign conventions.

use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::chart::{Chart, Point, U, V};
use crate::field::{EvalCache, EvalError, ScalarField};
use crate::geometry::{CCNVMetric, GeometryError};
use crate::report::{CausalLabel, CausalReport, EquationResidual, ResidualReport};
use crate::sample::WorstCase;

/// Threshold below which `D_3 X_1` and the Case-2 connection components are
/// treated as vanishing by the classifier.
pub const CLASSIFY_TOL: f64 = 1e-9;
/// Base relative tolerance for the null label in causal classification.
pub const NULL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum KillingError {
    #[error("{what} depends on the light-cone coordinate v")]
    VDependence { what: String },
    #[error("null normalization needs constant X_1; this candidate has X_1 mask {mask:?}")]
    NonConstantX1 { mask: crate::chart::CoordMask },
    #[error("X_1 = 0: the vector is a multiple of ell and cannot be null-normalized")]
    ZeroC2,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The canonical shapes of the additional Killing vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KvForm {
    /// `X_1` constant.
    A,
    /// `X_1 = u`.
    B,
    /// `X_1 = F_1(u, x3)`.
    C,
    General,
}

/// Verdict of [`classify_case`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseTag {
    Case1,
    Case2,
    Both,
    Neither,
}

/// Structured Killing vector candidate `(F_1, F_2, F_3)`.
#[derive(Clone, Debug)]
pub struct KillingCandidate {
    f1: ScalarField,
    f2: ScalarField,
    f3: ScalarField,
}

impl KillingCandidate {
    pub fn new(
        f1: ScalarField,
        f2: ScalarField,
        f3: ScalarField,
    ) -> Result<Self, KillingError> {
        for (f, name) in [(&f1, "F_1"), (&f2, "F_2"), (&f3, "F_3")] {
            if f.depends_on(V) {
                return Err(KillingError::VDependence {
                    what: name.to_string(),
                });
            }
        }
        Ok(KillingCandidate { f1, f2, f3 })
    }

    /// The covariantly constant null vector itself: `F_2 = 1`, rest zero.
    pub fn ell(chart: &Chart) -> Self {
        KillingCandidate {
            f1: ScalarField::zero(chart),
            f2: ScalarField::one(chart),
            f3: ScalarField::zero(chart),
        }
    }

    /// The frame vector `n`: `F_1 = 1`, rest zero.
    pub fn n(chart: &Chart) -> Self {
        KillingCandidate {
            f1: ScalarField::one(chart),
            f2: ScalarField::zero(chart),
            f3: ScalarField::zero(chart),
        }
    }

    pub fn f1(&self) -> &ScalarField {
        &self.f1
    }

    pub fn f2(&self) -> &ScalarField {
        &self.f2
    }

    pub fn f3(&self) -> &ScalarField {
        &self.f3
    }

    pub fn chart(&self) -> &Chart {
        self.f1.chart()
    }

    /// Form tag by inspection of `X_1`.
    pub fn form(&self) -> KvForm {
        if self.f1.as_const().is_some() {
            KvForm::A
        } else if self.f1.mask() == crate::chart::CoordMask::single(U)
            && self.f1.differentiate(U).as_const() == Some(1.0)
        {
            KvForm::B
        } else if self
            .f1
            .mask()
            .subset_of(crate::chart::CoordMask::single(U).with(crate::chart::X3))
        {
            KvForm::C
        } else {
            KvForm::General
        }
    }

    /// Candidate with `F_2` replaced by `F_2 + delta` (mutation testing).
    pub fn perturb_f2(&self, delta: &ScalarField) -> Self {
        KillingCandidate {
            f1: self.f1.clone(),
            f2: self.f2.add(delta),
            f3: self.f3.clone(),
        }
    }

    /// `D_2 X_1` (reduces to `d_u F_1` since `F_1` is v-independent).
    pub fn d2x1(&self) -> ScalarField {
        self.f1.differentiate(U)
    }

    /// `D_3 X_1 = m_3^{~e} d_e F_1`; needs the metric's frame.
    pub fn d3x1(&self, metric: &CCNVMetric) -> ScalarField {
        metric.frame_derivative(3, &self.f1)
    }

    /// Lowered frame components `[X_1, X_2, X_3, 0, ...]` as fields of all
    /// coordinates including `v`.
    pub fn frame_components(&self, metric: &CCNVMetric) -> Vec<ScalarField> {
        let chart = self.chart();
        let v = ScalarField::coord(chart, V);
        let x2 = self.f2.sub(&v.mul(&self.d2x1()));
        let x3 = self.f3.sub(&v.mul(&self.d3x1(metric)));
        let mut comps = vec![self.f1.clone(), x2, x3];
        for _ in 4..=chart.dim() {
            comps.push(ScalarField::zero(chart));
        }
        comps
    }

    /// Coordinate components: `X^u = X_1`, `X^e = X_3 m_3^{~e}`,
    /// `X^v = X_2 - X_1 H - X_3 m_3^{~e} W_e`. Exact fields, no sampling.
    pub fn to_coordinate_vector(&self, metric: &CCNVMetric) -> CoordinateVector {
        let chart = self.chart();
        let comps = self.frame_components(metric);
        let x1 = &comps[0];
        let x2 = &comps[1];
        let x3 = &comps[2];
        let dim = chart.dim();
        let mut out = vec![ScalarField::zero(chart); dim];
        out[U] = x1.clone();
        let mut w_term = ScalarField::zero(chart);
        for e in chart.transverse_range() {
            let m3e = metric.frame().upper(3, e);
            out[chart.slot_of(e)] = x3.mul(m3e);
            w_term = w_term.add(&m3e.mul(metric.w_hat(e)));
        }
        out[V] = x2.sub(&x1.mul(metric.h())).sub(&x3.mul(&w_term));
        CoordinateVector::new(chart.clone(), out)
    }

    /// Norm `g(X, X)` at a point by full metric contraction of the
    /// coordinate components.
    pub fn norm_at(&self, metric: &CCNVMetric, p: &Point) -> Result<f64, KillingError> {
        let x = self.to_coordinate_vector(metric);
        let mut cache = EvalCache::new();
        let g = metric.metric_at_cached(p, &mut cache)?;
        let vals = x.eval_cached(p, &mut cache)?;
        let dim = vals.len();
        let mut acc = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                acc += g[(a, b)] * vals[a] * vals[b];
            }
        }
        Ok(acc)
    }

    /// The frame-algebra norm `2 X_1 X_2 + sum_i X_i X_i` as a field.
    pub fn frame_norm_field(&self, metric: &CCNVMetric) -> ScalarField {
        let comps = self.frame_components(metric);
        let mut acc = comps[0].mul(&comps[1]).scale(2.0);
        for xi in comps.iter().skip(2) {
            acc = acc.add(&xi.mul(xi));
        }
        acc
    }

    /// Null normalization: for constant `X_1 = c != 0`, rescale by `1/c` and
    /// set `F_2 = -F_3^2 / 2`, which makes the frame norm
    /// `2 F_2 + F_3^2` vanish identically. With `F_3 = 0` this returns `n`.
    pub fn null_normalize(&self) -> Result<KillingCandidate, KillingError> {
        let c = self
            .f1
            .as_const()
            .ok_or(KillingError::NonConstantX1 {
                mask: self.f1.mask(),
            })?;
        if c == 0.0 {
            return Err(KillingError::ZeroC2);
        }
        let chart = self.chart();
        let f3 = self.f3.scale(1.0 / c);
        let f2 = f3.mul(&f3).scale(-0.5);
        Ok(KillingCandidate {
            f1: ScalarField::one(chart),
            f2,
            f3,
        })
    }
}

struct CvInner {
    chart: Chart,
    comps: Vec<ScalarField>,
    /// dcomps[nu][mu] = d_nu X^mu
    dcomps: OnceLock<Vec<Vec<ScalarField>>>,
}

/// A vector field given by one coordinate component field per coordinate
/// (components may depend on `v`). The oracle-side representation.
#[derive(Clone)]
pub struct CoordinateVector(Arc<CvInner>);

impl std::fmt::Debug for CoordinateVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CoordinateVector(D={})", self.0.chart.dim())
    }
}

impl CoordinateVector {
    pub fn new(chart: Chart, comps: Vec<ScalarField>) -> Self {
        assert_eq!(comps.len(), chart.dim());
        CoordinateVector(Arc::new(CvInner {
            chart,
            comps,
            dcomps: OnceLock::new(),
        }))
    }

    /// The vector `l = d/dv`.
    pub fn ell(chart: &Chart) -> Self {
        let mut comps = vec![ScalarField::zero(chart); chart.dim()];
        comps[V] = ScalarField::one(chart);
        CoordinateVector::new(chart.clone(), comps)
    }

    pub fn chart(&self) -> &Chart {
        &self.0.chart
    }

    pub fn component(&self, mu: usize) -> &ScalarField {
        &self.0.comps[mu]
    }

    fn dcomps(&self) -> &Vec<Vec<ScalarField>> {
        self.0.dcomps.get_or_init(|| {
            let dim = self.0.chart.dim();
            (0..dim)
                .map(|nu| {
                    (0..dim)
                        .map(|mu| self.0.comps[mu].differentiate(nu))
                        .collect()
                })
                .collect()
        })
    }

    pub fn eval(&self, p: &Point) -> Result<Vec<f64>, EvalError> {
        let mut cache = EvalCache::new();
        self.eval_cached(p, &mut cache)
    }

    pub fn eval_cached(&self, p: &Point, cache: &mut EvalCache) -> Result<Vec<f64>, EvalError> {
        self.0
            .comps
            .iter()
            .map(|f| f.eval_cached(p, cache))
            .collect()
    }

    /// Commutator `[X, Y]` as exact component fields.
    pub fn commutator(&self, other: &CoordinateVector) -> CoordinateVector {
        let chart = &self.0.chart;
        let dim = chart.dim();
        let mut comps = Vec::with_capacity(dim);
        for a in 0..dim {
            let mut acc = ScalarField::zero(chart);
            for b in 0..dim {
                let t1 = self.0.comps[b].mul(&other.0.comps[a].differentiate(b));
                let t2 = other.0.comps[b].mul(&self.0.comps[a].differentiate(b));
                acc = acc.add(&t1.sub(&t2));
            }
            comps.push(acc);
        }
        CoordinateVector::new(chart.clone(), comps)
    }
}

/// `[X, Y]^a = X^b d_b Y^a - Y^b d_b X^a` evaluated at a point.
pub fn commutator_at(
    x: &CoordinateVector,
    y: &CoordinateVector,
    p: &Point,
) -> Result<Vec<f64>, EvalError> {
    x.commutator(y).eval(p)
}

/// The coordinate Lie derivative `(L_X g)_ab = X^c d_c g_ab + g_cb d_a X^c
/// + g_ac d_b X^c` at a point: the independent Killing oracle. `X` is Killing
/// at `p` iff this matrix vanishes.
pub fn lie_residual_at(
    x: &CoordinateVector,
    metric: &CCNVMetric,
    p: &Point,
) -> Result<Vec<Vec<f64>>, KillingError> {
    let mut cache = EvalCache::new();
    lie_residual_at_cached(x, metric, p, &mut cache)
}

fn lie_residual_at_cached(
    x: &CoordinateVector,
    metric: &CCNVMetric,
    p: &Point,
    cache: &mut EvalCache,
) -> Result<Vec<Vec<f64>>, KillingError> {
    let dim = metric.dim();
    let g = metric.metric_at_cached(p, cache)?;
    let dg = metric.dg_at(p, cache)?;
    let xv = x.eval_cached(p, cache)?;
    let dxf = x.dcomps();
    let mut dx = vec![vec![0.0; dim]; dim];
    for nu in 0..dim {
        for mu in 0..dim {
            dx[nu][mu] = dxf[nu][mu].eval_cached(p, cache)?;
        }
    }
    let mut out = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let mut acc = 0.0;
            for c in 0..dim {
                acc += xv[c] * dg[c][a][b];
                acc += g[(c, b)] * dx[a][c];
                acc += g[(a, c)] * dx[b][c];
            }
            out[a][b] = acc;
            out[b][a] = acc;
        }
    }
    Ok(out)
}

/// Max |(L_X g)_ab| over a sample.
pub fn lie_residual_report(
    x: &CoordinateVector,
    metric: &CCNVMetric,
    sample: &[Point],
) -> Result<ResidualReport, KillingError> {
    let mut worst = WorstCase::new();
    for p in sample {
        let mut cache = EvalCache::new();
        let m = lie_residual_at_cached(x, metric, p, &mut cache)?;
        for row in &m {
            for v in row {
                worst.update(*v, p);
            }
        }
    }
    let mut report = ResidualReport::new();
    report.push(EquationResidual::from_worst("lie_derivative", worst));
    Ok(report)
}

/// Max-abs residuals of the four frame Killing equation groups at one
/// point: the pairs with leg 1 (the v-derivative conditions), the (2,2)
/// equation, the (2,i) equations, and the (i,j) equations -- the grouping
/// the case analysis runs on.
pub fn frame_killing_residuals_at(
    candidate: &KillingCandidate,
    metric: &CCNVMetric,
    p: &Point,
) -> Result<[f64; 4], KillingError> {
    let ops = FrameKillingOperator::new(candidate, metric);
    let mut cache = EvalCache::new();
    ops.residuals_at(metric, p, &mut cache)
}

/// The frame Killing equations as reusable derivative fields, built once per
/// (candidate, metric) pair.
pub struct FrameKillingOperator {
    /// Lowered frame components X_a.
    comps: Vec<ScalarField>,
    /// d[a][b] = D_a X_b.
    d: Vec<Vec<ScalarField>>,
}

impl FrameKillingOperator {
    pub fn new(candidate: &KillingCandidate, metric: &CCNVMetric) -> Self {
        let comps = candidate.frame_components(metric);
        let dim = metric.dim();
        let d = (1..=dim)
            .map(|a| {
                comps
                    .iter()
                    .map(|xb| metric.frame_derivative(a, xb))
                    .collect()
            })
            .collect();
        FrameKillingOperator { comps, d }
    }

    /// Evaluate the equation groups at a point.
    pub fn residuals_at(
        &self,
        metric: &CCNVMetric,
        p: &Point,
        cache: &mut EvalCache,
    ) -> Result<[f64; 4], KillingError> {
        let dim = metric.dim();
        let conn = metric.frame_connection_at_cached(p, cache)?;
        let mut xval = vec![0.0; dim];
        for (i, f) in self.comps.iter().enumerate() {
            xval[i] = f.eval_cached(p, cache)?;
        }
        let mut dval = vec![vec![0.0; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                dval[a][b] = self.d[a][b].eval_cached(p, cache)?;
            }
        }
        // eq_{ab} = D_a X_b + D_b X_a - sum_c (Gamma^c_{ab} + Gamma^c_{ba}) X_c
        let eq = |a: usize, b: usize| -> f64 {
            let mut acc = dval[a][b] + dval[b][a];
            for c in 0..dim {
                acc -= (conn.upper(c + 1, a + 1, b + 1) + conn.upper(c + 1, b + 1, a + 1))
                    * xval[c];
            }
            acc
        };
        let mut groups = [0.0f64; 4];
        for b in 0..dim {
            // pairs (1, b): the v-derivative conditions
            groups[0] = groups[0].max(eq(0, b).abs());
        }
        groups[1] = eq(1, 1).abs();
        for i in 2..dim {
            groups[2] = groups[2].max(eq(1, i).abs());
            for j in i..dim {
                groups[3] = groups[3].max(eq(i, j).abs());
            }
        }
        Ok(groups)
    }
}

/// Frame-equation residual report over a sample, one entry per group.
pub fn frame_killing_report(
    candidate: &KillingCandidate,
    metric: &CCNVMetric,
    sample: &[Point],
) -> Result<ResidualReport, KillingError> {
    let ops = FrameKillingOperator::new(candidate, metric);
    let names = ["dv_conditions", "nn_equation", "n_transverse", "transverse_pairs"];
    let mut worst = [
        WorstCase::new(),
        WorstCase::new(),
        WorstCase::new(),
        WorstCase::new(),
    ];
    for p in sample {
        let mut cache = EvalCache::new();
        let groups = ops.residuals_at(metric, p, &mut cache)?;
        for (w, g) in worst.iter_mut().zip(groups) {
            w.update(g, p);
        }
    }
    let mut report = ResidualReport::new();
    for (name, w) in names.into_iter().zip(worst) {
        report.push(EquationResidual::from_worst(name, w));
    }
    Ok(report)
}

/// Case classification over a sample: Case 1 iff `D_3 X_1` vanishes, Case 2
/// iff the connection components `Gamma_{3n2}, Gamma_{3n3}, Gamma_{3nm}`
/// vanish (a property of the metric alone).
pub fn classify_case(
    candidate: &KillingCandidate,
    metric: &CCNVMetric,
    sample: &[Point],
) -> Result<CaseTag, KillingError> {
    assert!(!sample.is_empty());
    let d3x1 = candidate.d3x1(metric);
    let mut max_d3 = 0.0f64;
    let mut max_gamma = 0.0f64;
    for p in sample {
        max_d3 = max_d3.max(d3x1.eval(p)?.abs());
        let scalars = metric.frame_scalars_at(p)?;
        max_gamma = max_gamma.max(scalars.max_case2_gamma());
    }
    let case1 = max_d3 < CLASSIFY_TOL;
    let case2 = max_gamma < CLASSIFY_TOL;
    Ok(match (case1, case2) {
        (true, true) => CaseTag::Both,
        (true, false) => CaseTag::Case1,
        (false, true) => CaseTag::Case2,
        (false, false) => CaseTag::Neither,
    })
}

/// Sign classification of the norm over a grid plus the global
/// non-spacelike test. Both readings of the v-eliminated inequality are
/// evaluated; the one derived from the frame norm (`F_3^2 + 2 X_1 F_2 <= 0`)
/// is authoritative for the global flag, the printed variant
/// (`F_3^2 - 2 X_1 F_2 <= 0`) is reported alongside.
pub fn causal_classify(
    candidate: &KillingCandidate,
    metric: &CCNVMetric,
    grid: &[Point],
) -> Result<CausalReport, KillingError> {
    assert!(!grid.is_empty());
    let v_scale = grid.iter().map(|p| p.get(V).abs()).fold(0.0, f64::max);
    let null_tol = NULL_TOL * (1.0 + v_scale * v_scale);

    let d3x1 = candidate.d3x1(metric);
    let vcoeff = candidate.f1().mul(&candidate.d2x1()).scale(2.0);
    let f3sq = candidate.f3().mul(candidate.f3());
    let x1f2 = candidate.f1().mul(candidate.f2()).scale(2.0);
    let printed = f3sq.sub(&x1f2);
    let derived = f3sq.add(&x1f2);

    let mut entries = Vec::with_capacity(grid.len());
    let mut d3_ok = true;
    let mut vcoeff_ok = true;
    let mut printed_ok = true;
    let mut derived_ok = true;
    for p in grid {
        let norm = candidate.norm_at(metric, p)?;
        let label = if norm.abs() <= null_tol {
            CausalLabel::Null
        } else if norm < 0.0 {
            CausalLabel::Timelike
        } else {
            CausalLabel::Spacelike
        };
        entries.push((p.clone(), norm, label));
        if d3x1.eval(p)?.abs() >= CLASSIFY_TOL {
            d3_ok = false;
        }
        if vcoeff.eval(p)?.abs() >= CLASSIFY_TOL {
            vcoeff_ok = false;
        }
        if printed.eval(p)? > null_tol {
            printed_ok = false;
        }
        if derived.eval(p)? > null_tol {
            derived_ok = false;
        }
    }
    Ok(CausalReport {
        entries,
        d3x1_zero: d3_ok,
        v_coefficient_zero: vcoeff_ok,
        inequality_printed: printed_ok,
        inequality_derived: derived_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::X3;
    use crate::geometry::TransverseFrame;
    use crate::sample::Region;

    fn chart5() -> Chart {
        Chart::new(5).unwrap()
    }

    fn pt(chart: &Chart, coords: &[f64]) -> Point {
        Point::new(chart, coords.to_vec()).unwrap()
    }

    #[test]
    fn ell_components_are_pure_v() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let ell = KillingCandidate::ell(&c);
        let x = ell.to_coordinate_vector(&m);
        let p = pt(&c, &[1.0, 2.0, 0.3, 0.4, 0.5]);
        assert_eq!(x.eval(&p).unwrap(), vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn n_on_flat_metric() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let n = KillingCandidate::n(&c);
        let x = n.to_coordinate_vector(&m);
        let p = pt(&c, &[1.0, 2.0, 0.3, 0.4, 0.5]);
        assert_eq!(x.eval(&p).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn ell_is_killing_everywhere() {
        let c = chart5();
        let u = ScalarField::coord(&c, U);
        let x3 = ScalarField::coord(&c, X3);
        let h = u.mul(&x3.powi(2));
        let w = vec![ScalarField::zero(&c), x3.clone(), ScalarField::zero(&c)];
        let m = CCNVMetric::new(&c, h, w, TransverseFrame::identity(&c)).unwrap();
        let ell = KillingCandidate::ell(&c).to_coordinate_vector(&m);
        let region = Region::default_box(&c);
        let report = lie_residual_report(&ell, &m, &region.sample(&c, 3, 30)).unwrap();
        assert!(report.max_abs() < 1e-12);
    }

    #[test]
    fn v_ell_on_flat_metric_fails_with_unit_residual() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let v = ScalarField::coord(&c, V);
        let mut comps = vec![ScalarField::zero(&c); 5];
        comps[V] = v;
        let x = CoordinateVector::new(c.clone(), comps);
        let p = pt(&c, &[0.7, 1.3, 0.0, 0.0, 0.0]);
        let lg = lie_residual_at(&x, &m, &p).unwrap();
        // (L_{v ell} g)_{uv} = g_{vv,?}... direct computation gives exactly 1
        assert_eq!(lg[U][V], 1.0);
        assert_eq!(lg[V][U], 1.0);
    }

    #[test]
    fn ell_frame_residuals_vanish_on_flat() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let ell = KillingCandidate::ell(&c);
        let p = pt(&c, &[1.0, -0.5, 0.2, 0.3, -0.1]);
        let groups = frame_killing_residuals_at(&ell, &m, &p).unwrap();
        assert_eq!(groups, [0.0; 4]);
    }

    #[test]
    fn boost_kv_passes_both_paths_on_flat() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        // X = u n - v ell
        let u = ScalarField::coord(&c, U);
        let boost = KillingCandidate::new(u, ScalarField::zero(&c), ScalarField::zero(&c)).unwrap();
        let region = Region::default_box(&c);
        let sample = region.sample(&c, 5, 20);
        let lie = lie_residual_report(&boost.to_coordinate_vector(&m), &m, &sample).unwrap();
        assert!(lie.max_abs() < 1e-12, "lie: {}", lie.max_abs());
        let frame = frame_killing_report(&boost, &m, &sample).unwrap();
        assert!(frame.max_abs() < 1e-12, "frame: {}", frame.max_abs());
    }

    #[test]
    fn perturbed_candidate_fails_both_paths() {
        let c = chart5();
        let x3 = ScalarField::coord(&c, X3);
        let f2 = x3.powi(2);
        let h = f2.clone();
        let w = vec![ScalarField::zero(&c); 3];
        let m = CCNVMetric::new(&c, h, w, TransverseFrame::identity(&c)).unwrap();
        let kv = KillingCandidate::new(
            ScalarField::one(&c),
            f2,
            ScalarField::zero(&c),
        )
        .unwrap();
        let region = Region::default_box(&c);
        let sample = region.sample(&c, 9, 20);
        // the genuine candidate passes
        let lie = lie_residual_report(&kv.to_coordinate_vector(&m), &m, &sample).unwrap();
        assert!(lie.max_abs() < 1e-12);
        let frame = frame_killing_report(&kv, &m, &sample).unwrap();
        assert!(frame.max_abs() < 1e-10, "frame: {}", frame.max_abs());
        // the perturbed one fails in both paths
        let bad = kv.perturb_f2(&x3.scale(0.1));
        let lie = lie_residual_report(&bad.to_coordinate_vector(&m), &m, &sample).unwrap();
        assert!(lie.max_abs() > 1e-3);
        let frame = frame_killing_report(&bad, &m, &sample).unwrap();
        assert!(frame.max_abs() > 1e-3);
    }

    #[test]
    fn bracket_of_boost_with_ell_is_plus_ell() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let u = ScalarField::coord(&c, U);
        let boost = KillingCandidate::new(u, ScalarField::zero(&c), ScalarField::zero(&c))
            .unwrap()
            .to_coordinate_vector(&m);
        let ell = CoordinateVector::ell(&c);
        let p = pt(&c, &[1.3, -0.4, 0.2, 0.5, 0.8]);
        let br = commutator_at(&boost, &ell, &p).unwrap();
        // [X_B, ell] is proportional to ell with |sigma| = 1; the direct
        // computation gives sigma = +1 under [X, Y] = XY - YX.
        assert!((br[V] - 1.0).abs() < 1e-12);
        for (i, b) in br.iter().enumerate() {
            if i != V {
                assert!(b.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn form_tags() {
        let c = chart5();
        let u = ScalarField::coord(&c, U);
        let x3 = ScalarField::coord(&c, X3);
        let x4 = ScalarField::coord(&c, 3);
        let zero = ScalarField::zero(&c);
        let mk = |f1: &ScalarField| {
            KillingCandidate::new(f1.clone(), zero.clone(), zero.clone())
                .unwrap()
                .form()
        };
        assert_eq!(mk(&ScalarField::constant(&c, 2.0)), KvForm::A);
        assert_eq!(mk(&u), KvForm::B);
        assert_eq!(mk(&u.add(&x3)), KvForm::C);
        assert_eq!(mk(&u.mul(&x3)), KvForm::C);
        assert_eq!(mk(&x4), KvForm::General);
        assert_eq!(KillingCandidate::ell(&c).form(), KvForm::A);
    }

    #[test]
    fn null_normalize_cases() {
        let c = chart5();
        // F_3 = 0 -> F_2 = 0: X = n
        let n = KillingCandidate::n(&c).null_normalize().unwrap();
        assert!(n.f2().is_zero());
        assert!(n.f3().is_zero());
        assert_eq!(n.f1().as_const(), Some(1.0));
        // c_2 = 2, F_3 = 0 -> rescaled to n
        let scaled = KillingCandidate::new(
            ScalarField::constant(&c, 2.0),
            ScalarField::constant(&c, 7.0),
            ScalarField::zero(&c),
        )
        .unwrap()
        .null_normalize()
        .unwrap();
        assert_eq!(scaled.f1().as_const(), Some(1.0));
        assert!(scaled.f3().is_zero());
        assert!(scaled.f2().is_zero());
        // c_2 = 0 is rejected
        assert!(matches!(
            KillingCandidate::ell(&c).null_normalize(),
            Err(KillingError::ZeroC2)
        ));
        // the normalized norm vanishes on samples
        let x3 = ScalarField::coord(&c, X3);
        let m = CCNVMetric::flat(&c);
        let kv = KillingCandidate::new(
            ScalarField::one(&c),
            ScalarField::zero(&c),
            x3.clone(),
        )
        .unwrap()
        .null_normalize()
        .unwrap();
        let region = Region::default_box(&c);
        for p in region.sample(&c, 21, 50) {
            let norm = kv.norm_at(&m, &p).unwrap();
            assert!(norm.abs() < 1e-12, "norm = {norm}");
        }
    }

    #[test]
    fn norm_matches_frame_expression() {
        let c = chart5();
        let u = ScalarField::coord(&c, U);
        let x3 = ScalarField::coord(&c, X3);
        let x4 = ScalarField::coord(&c, 3);
        let rows = vec![
            vec![
                ScalarField::one(&c).add(&x4.powi(2).scale(0.2)),
                x3.scale(0.5),
                ScalarField::zero(&c),
            ],
            vec![
                ScalarField::zero(&c),
                ScalarField::one(&c),
                ScalarField::zero(&c),
            ],
            vec![
                ScalarField::zero(&c),
                ScalarField::zero(&c),
                ScalarField::one(&c),
            ],
        ];
        let frame = TransverseFrame::new(&c, rows).unwrap();
        let w = vec![ScalarField::zero(&c), u.clone(), x3.clone()];
        let m = CCNVMetric::new(&c, u.mul(&x3), w, frame).unwrap();
        let kv = KillingCandidate::new(u.add(&x3), x4.clone(), x3.mul(&x4)).unwrap();
        let frame_norm = kv.frame_norm_field(&m);
        let region = Region::default_box(&c);
        for p in region.sample(&c, 23, 30) {
            let a = kv.norm_at(&m, &p).unwrap();
            let b = frame_norm.eval(&p).unwrap();
            assert!((a - b).abs() < 1e-10, "contraction {a} vs frame {b}");
        }
    }

    #[test]
    fn causal_report_for_ell_is_all_null() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let ell = KillingCandidate::ell(&c);
        let region = Region::default_box(&c);
        let grid = region.grid(&c, 3);
        let report = causal_classify(&ell, &m, &grid).unwrap();
        assert_eq!(report.count(CausalLabel::Null), grid.len());
        assert!(report.global_non_spacelike());
        // printed variant agrees here since X_1 = 0
        assert!(report.inequality_printed);
    }

    #[test]
    fn causal_labels_invariant_under_positive_rescaling() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let u = ScalarField::coord(&c, U);
        let x3 = ScalarField::coord(&c, X3);
        let kv = KillingCandidate::new(u.clone(), x3.clone(), x3.scale(0.5)).unwrap();
        let scaled = KillingCandidate::new(u.scale(3.0), x3.scale(3.0), x3.scale(1.5)).unwrap();
        let region = Region::default_box(&c);
        let grid = region.grid(&c, 3);
        let a = causal_classify(&kv, &m, &grid).unwrap();
        let b = causal_classify(&scaled, &m, &grid).unwrap();
        for ((_, _, la), (_, _, lb)) in a.entries.iter().zip(&b.entries) {
            assert_eq!(la, lb, "labels must agree under positive rescaling");
        }
    }

    #[test]
    fn classify_flat_ell_is_both() {
        let c = chart5();
        let m = CCNVMetric::flat(&c);
        let ell = KillingCandidate::ell(&c);
        let region = Region::default_box(&c);
        let sample = region.sample(&c, 31, 10);
        assert_eq!(classify_case(&ell, &m, &sample).unwrap(), CaseTag::Both);
    }
}
