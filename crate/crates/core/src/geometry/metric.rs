//! The CCNV Kundt metric assembled from frame data, and everything that is a
//! pointwise function of it: metric matrix, Levi-Civita connection, the null
//! frame, its connection coefficients, and the auxiliary frame scalars.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::chart::{Chart, CoordMask, Point, U, V};
use crate::field::{EvalCache, ScalarField};
use crate::report::{EquationResidual, ResidualReport};
use crate::sample::WorstCase;

use super::frame::{check_mask, FrameConnection, FrameScalarFields, FrameScalars, TransverseFrame};
use super::GeometryError;

struct MetricInner {
    chart: Chart,
    h: ScalarField,
    /// One-form data W_e, e = 3..=D (0-based storage).
    w: Vec<ScalarField>,
    frame: TransverseFrame,
    w3_gauge: bool,
    /// Coordinate metric fields g[a][b].
    g: Vec<Vec<ScalarField>>,
    /// dg[c][a][b] = d_c g_ab.
    dg: OnceLock<Vec<Vec<Vec<ScalarField>>>>,
    /// ddg[c][d][a][b] = d_c d_d g_ab.
    ddg: OnceLock<Vec<Vec<Vec<Vec<ScalarField>>>>>,
    /// Frame vectors e_a^mu (legs 1..=D, coordinates) and their derivatives.
    frame_vectors: OnceLock<Vec<Vec<ScalarField>>>,
    frame_vector_derivs: OnceLock<Vec<Vec<Vec<ScalarField>>>>,
    /// Coframe m^a_mu.
    coframe: OnceLock<Vec<Vec<ScalarField>>>,
    scalar_fields: OnceLock<FrameScalarFields>,
}

/// A Kundt metric with covariantly constant null vector `l = d/dv`:
///
/// ```text
/// ds^2 = 2 du [dv + H du + W_e dx^e] + g_ef dx^e dx^f,
/// ```
///
/// specified through `H`, the `W_e`, and the upper-triangular transverse
/// frame `m_ie` with `g_ef = m_ie m_if`. None of the data may depend on `v`;
/// that is exactly the covariant constancy of `l`. The `W_3 = 0` gauge is
/// recorded as a flag, never imposed.
#[derive(Clone)]
pub struct CCNVMetric(Arc<MetricInner>);

impl std::fmt::Debug for CCNVMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CCNVMetric(D={}, w3_gauge={})", self.dim(), self.w3_gauge())
    }
}

impl CCNVMetric {
    /// Build and validate: `H`, every `W_e`, and every frame entry must be
    /// independent of `v`.
    pub fn new(
        chart: &Chart,
        h: ScalarField,
        w: Vec<ScalarField>,
        frame: TransverseFrame,
    ) -> Result<Self, GeometryError> {
        let no_v = all_coords_except_v(chart);
        check_mask(&h, no_v, "H")?;
        for (idx, we) in w.iter().enumerate() {
            check_mask(we, no_v, &format!("W_{}", idx + 3))?;
        }
        Self::new_unchecked(chart, h, w, frame)
    }

    /// Build without the v-independence check. Exists so that deliberately
    /// broken metrics can be fed to the verifiers in mutation tests and from
    /// raw CLI scenes; the CCNV residual check then reports the violation.
    pub fn new_unchecked(
        chart: &Chart,
        h: ScalarField,
        w: Vec<ScalarField>,
        frame: TransverseFrame,
    ) -> Result<Self, GeometryError> {
        let n = chart.transverse_count();
        if w.len() != n {
            return Err(GeometryError::BadWCount {
                want: n,
                got: w.len(),
            });
        }
        let w3_gauge = w[0].is_zero();

        let dim = chart.dim();
        let zero = ScalarField::zero(chart);
        let mut g = vec![vec![zero; dim]; dim];
        g[U][U] = h.scale(2.0);
        g[U][V] = ScalarField::one(chart);
        g[V][U] = g[U][V].clone();
        for e in chart.transverse_range() {
            let s = chart.slot_of(e);
            g[U][s] = w[e - 3].clone();
            g[s][U] = w[e - 3].clone();
            for f in chart.transverse_range() {
                let t = chart.slot_of(f);
                g[s][t] = frame.transverse_metric(e, f).clone();
            }
        }

        Ok(CCNVMetric(Arc::new(MetricInner {
            chart: chart.clone(),
            h,
            w,
            frame,
            w3_gauge,
            g,
            dg: OnceLock::new(),
            ddg: OnceLock::new(),
            frame_vectors: OnceLock::new(),
            frame_vector_derivs: OnceLock::new(),
            coframe: OnceLock::new(),
            scalar_fields: OnceLock::new(),
        })))
    }

    pub fn flat(chart: &Chart) -> Self {
        let w = vec![ScalarField::zero(chart); chart.transverse_count()];
        CCNVMetric::new(
            chart,
            ScalarField::zero(chart),
            w,
            TransverseFrame::identity(chart),
        )
        .expect("flat metric is valid")
    }

    pub fn chart(&self) -> &Chart {
        &self.0.chart
    }

    pub fn dim(&self) -> usize {
        self.0.chart.dim()
    }

    pub fn h(&self) -> &ScalarField {
        &self.0.h
    }

    /// `W_e` with transverse label `e` in `3..=D`.
    pub fn w_hat(&self, e: usize) -> &ScalarField {
        &self.0.w[e - 3]
    }

    pub fn frame(&self) -> &TransverseFrame {
        &self.0.frame
    }

    /// Whether the `W_3 = 0` gauge holds (structurally).
    pub fn w3_gauge(&self) -> bool {
        self.0.w3_gauge
    }

    /// Coordinate metric component field `g_ab`.
    pub fn g_field(&self, a: usize, b: usize) -> &ScalarField {
        &self.0.g[a][b]
    }

    fn dg(&self) -> &Vec<Vec<Vec<ScalarField>>> {
        self.0.dg.get_or_init(|| {
            let dim = self.dim();
            (0..dim)
                .map(|c| {
                    (0..dim)
                        .map(|a| (0..dim).map(|b| self.0.g[a][b].differentiate(c)).collect())
                        .collect()
                })
                .collect()
        })
    }

    pub(super) fn ddg_fields(&self) -> &Vec<Vec<Vec<Vec<ScalarField>>>> {
        self.0.ddg.get_or_init(|| {
            let dim = self.dim();
            let dg = self.dg();
            (0..dim)
                .map(|c| {
                    (0..dim)
                        .map(|d| {
                            (0..dim)
                                .map(|a| {
                                    (0..dim).map(|b| dg[d][a][b].differentiate(c)).collect()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
    }

    /// Metric matrix at a point.
    pub fn metric_at(&self, p: &Point) -> Result<DMatrix<f64>, GeometryError> {
        let mut cache = EvalCache::new();
        self.metric_at_cached(p, &mut cache)
    }

    pub(crate) fn metric_at_cached(
        &self,
        p: &Point,
        cache: &mut EvalCache,
    ) -> Result<DMatrix<f64>, GeometryError> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let v = self.0.g[a][b].eval_cached(p, cache)?;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Ok(m)
    }

    /// Inverse metric at a point; errors if the metric is singular there.
    pub fn inverse_metric_at(&self, p: &Point) -> Result<DMatrix<f64>, GeometryError> {
        let mut cache = EvalCache::new();
        self.inverse_metric_at_cached(p, &mut cache)
    }

    pub(crate) fn inverse_metric_at_cached(
        &self,
        p: &Point,
        cache: &mut EvalCache,
    ) -> Result<DMatrix<f64>, GeometryError> {
        let m = self.metric_at_cached(p, cache)?;
        m.try_inverse().ok_or(GeometryError::SingularMetric {
            point: p.clone(),
        })
    }

    /// First derivatives of the metric at a point: `out[c][a][b] = d_c g_ab`.
    pub(crate) fn dg_at(
        &self,
        p: &Point,
        cache: &mut EvalCache,
    ) -> Result<Vec<Vec<Vec<f64>>>, GeometryError> {
        let dim = self.dim();
        let dg = self.dg();
        let mut out = vec![vec![vec![0.0; dim]; dim]; dim];
        for c in 0..dim {
            for a in 0..dim {
                for b in a..dim {
                    let v = dg[c][a][b].eval_cached(p, cache)?;
                    out[c][a][b] = v;
                    out[c][b][a] = v;
                }
            }
        }
        Ok(out)
    }

    /// Coordinate Christoffel symbols `Gamma^a_{bc}` at a point, from the
    /// exact first derivatives of the metric fields.
    pub fn christoffel_at(&self, p: &Point) -> Result<Vec<Vec<Vec<f64>>>, GeometryError> {
        let mut cache = EvalCache::new();
        self.christoffel_at_cached(p, &mut cache)
    }

    pub(crate) fn christoffel_at_cached(
        &self,
        p: &Point,
        cache: &mut EvalCache,
    ) -> Result<Vec<Vec<Vec<f64>>>, GeometryError> {
        let dim = self.dim();
        let ginv = self.inverse_metric_at_cached(p, cache)?;
        let dg = self.dg_at(p, cache)?;
        let mut gamma = vec![vec![vec![0.0; dim]; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                for c in b..dim {
                    let mut acc = 0.0;
                    for d in 0..dim {
                        acc += ginv[(a, d)] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                    }
                    let v = 0.5 * acc;
                    gamma[a][b][c] = v;
                    gamma[a][c][b] = v;
                }
            }
        }
        Ok(gamma)
    }

    /// Max |nabla_a l_b| over the sample, with `l = du`: the covariant
    /// constancy residual. Also reports the norm `l_a l^a`.
    pub fn ccnv_residual(&self, sample: &[Point]) -> Result<ResidualReport, GeometryError> {
        assert!(!sample.is_empty(), "ccnv_residual needs a nonempty sample");
        let mut grad = WorstCase::new();
        let mut norm = WorstCase::new();
        for p in sample {
            let mut cache = EvalCache::new();
            let gamma = self.christoffel_at_cached(p, &mut cache)?;
            let dim = self.dim();
            for a in 0..dim {
                for b in 0..dim {
                    // nabla_a l_b = -Gamma^u_{ab}
                    grad.update(gamma[U][a][b], p);
                }
            }
            let ginv = self.inverse_metric_at_cached(p, &mut cache)?;
            norm.update(ginv[(U, U)], p);
        }
        let mut report = ResidualReport::new();
        report.push(EquationResidual::from_worst("ccnv_grad_ell", grad));
        report.push(EquationResidual::from_worst("ell_norm", norm));
        Ok(report)
    }

    /// Frame component fields `W_i = m_i^{~e} W_e` (also exposed through
    /// [`FrameScalars`]).
    pub fn w_frame_field(&self, i: usize) -> ScalarField {
        let chart = self.chart();
        let mut acc = ScalarField::zero(chart);
        for e in chart.transverse_range() {
            acc = acc.add(&self.0.frame.upper(i, e).mul(self.w_hat(e)));
        }
        acc
    }

    /// Directional derivative along a frame leg (`leg` in `1..=D`):
    /// `D_1 = d_v`, `D_2 = d_u - H d_v`, `D_i = m_i^{~e}(d_e - W_e d_v)`.
    pub fn frame_derivative(&self, leg: usize, f: &ScalarField) -> ScalarField {
        let chart = self.chart();
        match leg {
            1 => f.differentiate(V),
            2 => f.differentiate(U).sub(&self.0.h.mul(&f.differentiate(V))),
            i => {
                let mut acc = ScalarField::zero(chart);
                let dv = f.differentiate(V);
                for e in chart.transverse_range() {
                    let s = chart.slot_of(e);
                    let term = f.differentiate(s).sub(&self.w_hat(e).mul(&dv));
                    acc = acc.add(&self.0.frame.upper(i, e).mul(&term));
                }
                acc
            }
        }
    }

    /// Frame vector component fields `e_a^mu`, legs `1..=D`.
    pub(crate) fn frame_vectors(&self) -> &Vec<Vec<ScalarField>> {
        self.0.frame_vectors.get_or_init(|| {
            let chart = self.chart();
            let dim = chart.dim();
            let zero = ScalarField::zero(chart);
            let mut legs = Vec::with_capacity(dim);
            // e_1 = l = d/dv
            let mut e1 = vec![zero.clone(); dim];
            e1[V] = ScalarField::one(chart);
            legs.push(e1);
            // e_2 = n = d/du - H d/dv
            let mut e2 = vec![zero.clone(); dim];
            e2[U] = ScalarField::one(chart);
            e2[V] = self.0.h.neg();
            legs.push(e2);
            // e_i = m_i^{~e} (d/dx^e - W_e d/dv)
            for i in chart.transverse_range() {
                let mut ei = vec![zero.clone(); dim];
                ei[V] = self.w_frame_field(i).neg();
                for e in chart.transverse_range() {
                    ei[chart.slot_of(e)] = self.0.frame.upper(i, e).clone();
                }
                legs.push(ei);
            }
            legs
        })
    }

    /// `d_nu e_a^mu` as fields: derivs[a][nu][mu].
    fn frame_vector_derivs(&self) -> &Vec<Vec<Vec<ScalarField>>> {
        self.0.frame_vector_derivs.get_or_init(|| {
            let dim = self.dim();
            let vectors = self.frame_vectors();
            (0..dim)
                .map(|a| {
                    (0..dim)
                        .map(|nu| {
                            (0..dim)
                                .map(|mu| vectors[a][mu].differentiate(nu))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
    }

    /// Coframe one-form component fields `m^a_mu`, legs `1..=D`:
    /// `m^1 = n = dv + H du + W_e dx^e`, `m^2 = l = du`, `m^i = m_ie dx^e`.
    pub(crate) fn coframe(&self) -> &Vec<Vec<ScalarField>> {
        self.0.coframe.get_or_init(|| {
            let chart = self.chart();
            let dim = chart.dim();
            let zero = ScalarField::zero(chart);
            let mut legs = Vec::with_capacity(dim);
            let mut m1 = vec![zero.clone(); dim];
            m1[U] = self.0.h.clone();
            m1[V] = ScalarField::one(chart);
            for e in chart.transverse_range() {
                m1[chart.slot_of(e)] = self.w_hat(e).clone();
            }
            legs.push(m1);
            let mut m2 = vec![zero.clone(); dim];
            m2[U] = ScalarField::one(chart);
            legs.push(m2);
            for i in chart.transverse_range() {
                let mut mi = vec![zero.clone(); dim];
                for e in chart.transverse_range() {
                    mi[chart.slot_of(e)] = self.0.frame.lower(i, e).clone();
                }
                legs.push(mi);
            }
            legs
        })
    }

    /// Frame connection `Gamma^a_{bc} = < m^a, nabla_{e_b} e_c >` at a point
    /// (see the frame module docs for the convention).
    pub fn frame_connection_at(&self, p: &Point) -> Result<FrameConnection, GeometryError> {
        let mut cache = EvalCache::new();
        self.frame_connection_at_cached(p, &mut cache)
    }

    pub(crate) fn frame_connection_at_cached(
        &self,
        p: &Point,
        cache: &mut EvalCache,
    ) -> Result<FrameConnection, GeometryError> {
        let dim = self.dim();
        let christoffel = self.christoffel_at_cached(p, cache)?;
        let vectors = self.frame_vectors();
        let derivs = self.frame_vector_derivs();
        let coframe = self.coframe();

        let mut e = vec![vec![0.0; dim]; dim];
        let mut de = vec![vec![vec![0.0; dim]; dim]; dim];
        let mut co = vec![vec![0.0; dim]; dim];
        for a in 0..dim {
            for mu in 0..dim {
                e[a][mu] = vectors[a][mu].eval_cached(p, cache)?;
                co[a][mu] = coframe[a][mu].eval_cached(p, cache)?;
                for nu in 0..dim {
                    de[a][nu][mu] = derivs[a][nu][mu].eval_cached(p, cache)?;
                }
            }
        }

        let mut gamma = vec![vec![vec![0.0; dim]; dim]; dim];
        for b in 0..dim {
            for c in 0..dim {
                // (nabla_{e_b} e_c)^mu = e_b^nu d_nu e_c^mu + e_b^nu Gamma^mu_{nu lam} e_c^lam
                let mut nab = vec![0.0; dim];
                for mu in 0..dim {
                    let mut acc = 0.0;
                    for nu in 0..dim {
                        acc += e[b][nu] * de[c][nu][mu];
                        for lam in 0..dim {
                            acc += e[b][nu] * christoffel[mu][nu][lam] * e[c][lam];
                        }
                    }
                    nab[mu] = acc;
                }
                for a in 0..dim {
                    let mut acc = 0.0;
                    for mu in 0..dim {
                        acc += co[a][mu] * nab[mu];
                    }
                    gamma[a][b][c] = acc;
                }
            }
        }
        Ok(FrameConnection::new(dim, gamma))
    }

    fn scalar_fields(&self) -> &FrameScalarFields {
        self.0.scalar_fields.get_or_init(|| {
            let chart = self.chart();
            let frame = &self.0.frame;
            let n = chart.transverse_count();
            let zero = ScalarField::zero(chart);

            let w: Vec<ScalarField> = (3..=chart.dim())
                .map(|i| self.w_frame_field(i))
                .collect();

            // B_ij = m_{ie,u} m_j^{~e}
            let mut b = vec![vec![zero.clone(); n]; n];
            for i in chart.transverse_range() {
                for j in chart.transverse_range() {
                    let mut acc = ScalarField::zero(chart);
                    for e in chart.transverse_range() {
                        acc = acc.add(&frame.lower(i, e).differentiate(U).mul(frame.upper(j, e)));
                    }
                    b[i - 3][j - 3] = acc;
                }
            }

            // D_ijk = m_{ie,f} (m_j^{~e} m_k^{~f} - m_k^{~e} m_j^{~f})
            let mut d = vec![vec![vec![zero.clone(); n]; n]; n];
            for i in chart.transverse_range() {
                for j in chart.transverse_range() {
                    for k in chart.transverse_range() {
                        let mut acc = ScalarField::zero(chart);
                        for e in chart.transverse_range() {
                            for f in chart.transverse_range() {
                                let m_ief = frame.lower(i, e).differentiate(chart.slot_of(f));
                                if m_ief.is_zero() {
                                    continue;
                                }
                                let jk = frame.upper(j, e).mul(frame.upper(k, f));
                                let kj = frame.upper(k, e).mul(frame.upper(j, f));
                                acc = acc.add(&m_ief.mul(&jk.sub(&kj)));
                            }
                        }
                        d[i - 3][j - 3][k - 3] = acc;
                    }
                }
            }

            // J_i = D_i H - D_2 W_i - B_{ji} W^j
            let mut jf = Vec::with_capacity(n);
            for i in chart.transverse_range() {
                let mut acc = self
                    .frame_derivative(i, &self.0.h)
                    .sub(&self.frame_derivative(2, &w[i - 3]));
                for j in chart.transverse_range() {
                    acc = acc.sub(&b[j - 3][i - 3].mul(&w[j - 3]));
                }
                jf.push(acc);
            }

            // A_ij = (D_j W_i - D_i W_j) + (D_kij - D_kji) W^k, antisymmetrized
            // without the 1/2 weight.
            let mut a = vec![vec![zero; n]; n];
            for i in chart.transverse_range() {
                for j in chart.transverse_range() {
                    let mut acc = self
                        .frame_derivative(j, &w[i - 3])
                        .sub(&self.frame_derivative(i, &w[j - 3]));
                    for k in chart.transverse_range() {
                        let dd = d[k - 3][i - 3][j - 3].sub(&d[k - 3][j - 3][i - 3]);
                        acc = acc.add(&dd.mul(&w[k - 3]));
                    }
                    a[i - 3][j - 3] = acc;
                }
            }

            FrameScalarFields { b, w, j: jf, a, d }
        })
    }

    /// The auxiliary frame scalars `B_ij, W_i, J_i, A_ij, D_ijk` and the
    /// Case-2 connection components, evaluated at a point.
    pub fn frame_scalars_at(&self, p: &Point) -> Result<FrameScalars, GeometryError> {
        let mut cache = EvalCache::new();
        let conn = self.frame_connection_at_cached(p, &mut cache)?;
        self.scalar_fields().eval(p, &mut cache, &conn)
    }
}

fn all_coords_except_v(chart: &Chart) -> CoordMask {
    let mut mask = CoordMask::EMPTY;
    for s in 0..chart.dim() {
        if s != V {
            mask = mask.with(s);
        }
    }
    mask
}
