//! Upper-triangular transverse frames and the frame scalars built from them.
//!
//! # Index conventions
//!
//! Transverse frame legs and coordinates are labeled `i, j, k, e, f` in
//! `3..=D` (matching the case analysis); `n, m, r` range over `4..=D`. Internally both
//! are stored 0-based (`i - 3`). The frame matrix `m_ie` has rows indexed by
//! the leg `i` and columns by the coordinate `e`, is upper-triangular
//! (`m_ie = 0` for `e < i`), and its inverse `m_j^{~e}` satisfies
//! `m_ie m_j^{~e} = delta_ij`.
//!
//! # Frame connection convention
//!
//! The null frame is `e_1 = l = d/dv`, `e_2 = n = d/du - H d/dv`,
//! `e_i = m_i^{~e} (d/dx^e - W_e d/dv)` with coframe `m^1 = n`, `m^2 = du`,
//! `m^i = m_ie dx^e`, and constant frame metric `eta_12 = 1`, `eta_ij =
//! delta_ij`. The connection coefficients used throughout are
//!
//! ```text
//! Gamma^a_{bc} = < m^a , nabla_{e_b} e_c >
//! ```
//!
//! i.e. the *first* lower index is the differentiation direction. Lowering
//! the upper index with `eta` swaps legs 1 and 2. This convention is frozen
//! by the oracle-equivalence tests: the frame Killing equations written with
//! it agree with the coordinate Lie-derivative residual on every verified
//! metric/KV pair.

use std::sync::Arc;

use crate::chart::{Chart, CoordMask, Point, U, V};
use crate::field::{EvalCache, ScalarField};

use super::GeometryError;

#[derive(Debug)]
struct FrameInner {
    chart: Chart,
    /// m[i][e], 0-based transverse indices.
    m: Vec<Vec<ScalarField>>,
    /// inv[e][j] = m_j^{~e} (0-based), the transposed matrix inverse.
    inv: Vec<Vec<ScalarField>>,
    /// Transverse metric g_ef = sum_i m_ie m_if.
    g_t: Vec<Vec<ScalarField>>,
    u_dependent: bool,
}

/// Upper-triangular transverse frame `m_ie` of scalar fields.
#[derive(Clone, Debug)]
pub struct TransverseFrame(Arc<FrameInner>);

impl TransverseFrame {
    /// Build from rows `m_ie` (row `i`, column `e`, both running over the
    /// transverse range). Entries below the diagonal must be identically
    /// zero, diagonal entries must not be, and nothing may depend on `v`.
    pub fn new(chart: &Chart, rows: Vec<Vec<ScalarField>>) -> Result<Self, GeometryError> {
        let n = chart.transverse_count();
        if rows.len() != n {
            return Err(GeometryError::BadFrameShape {
                want: n,
                got: rows.len(),
            });
        }
        for (ti, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GeometryError::BadFrameShape {
                    want: n,
                    got: row.len(),
                });
            }
            for (te, entry) in row.iter().enumerate() {
                if te < ti && !entry.is_zero() {
                    return Err(GeometryError::NotUpperTriangular {
                        i: ti + 3,
                        e: te + 3,
                    });
                }
                if entry.depends_on(V) {
                    return Err(GeometryError::VDependence {
                        what: format!("m_{}{}", ti + 3, te + 3),
                    });
                }
            }
            if row[ti].is_zero() {
                return Err(GeometryError::VanishingDiagonal { i: ti + 3 });
            }
        }

        // Triangular inverse by back-substitution: Inv = M^{-1} is upper
        // triangular; inv[e][j] stores m_j^{~e} = Inv[e][j].
        let zero = ScalarField::zero(chart);
        let mut invm = vec![vec![zero.clone(); n]; n];
        for j in (0..n).rev() {
            invm[j][j] = ScalarField::one(chart).div(&rows[j][j]);
            for i in (0..j).rev() {
                let mut acc = ScalarField::zero(chart);
                for k in (i + 1)..=j {
                    acc = acc.add(&rows[i][k].mul(&invm[k][j]));
                }
                invm[i][j] = acc.neg().div(&rows[i][i]);
            }
        }

        let mut g_t = vec![vec![zero; n]; n];
        for e in 0..n {
            for f in e..n {
                let mut acc = ScalarField::zero(chart);
                for i in 0..n {
                    acc = acc.add(&rows[i][e].mul(&rows[i][f]));
                }
                g_t[e][f] = acc.clone();
                g_t[f][e] = acc;
            }
        }

        let u_dependent = rows.iter().flatten().any(|f| f.depends_on(U));

        Ok(TransverseFrame(Arc::new(FrameInner {
            chart: chart.clone(),
            m: rows,
            inv: invm,
            g_t,
            u_dependent,
        })))
    }

    pub fn identity(chart: &Chart) -> Self {
        let n = chart.transverse_count();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|e| {
                        if i == e {
                            ScalarField::one(chart)
                        } else {
                            ScalarField::zero(chart)
                        }
                    })
                    .collect()
            })
            .collect();
        TransverseFrame::new(chart, rows).expect("identity frame is valid")
    }

    pub fn chart(&self) -> &Chart {
        &self.0.chart
    }

    pub fn size(&self) -> usize {
        self.0.m.len()
    }

    pub fn u_dependent(&self) -> bool {
        self.0.u_dependent
    }

    /// `m_ie` with transverse labels `i, e` in `3..=D`.
    pub fn lower(&self, i: usize, e: usize) -> &ScalarField {
        &self.0.m[i - 3][e - 3]
    }

    /// `m_j^{~e}` with transverse labels `j, e` in `3..=D`.
    pub fn upper(&self, j: usize, e: usize) -> &ScalarField {
        &self.0.inv[e - 3][j - 3]
    }

    /// Transverse metric `g_ef` with transverse labels.
    pub fn transverse_metric(&self, e: usize, f: usize) -> &ScalarField {
        &self.0.g_t[e - 3][f - 3]
    }

    pub fn is_structurally_flat(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| {
            (0..n).all(|e| {
                let entry = &self.0.m[i][e];
                if i == e {
                    entry.as_const() == Some(1.0)
                } else {
                    entry.is_zero()
                }
            })
        })
    }
}

/// Frame connection coefficients `Gamma^a_{bc}` at a point, with legs `1..=D`
/// (see the module docs for the convention).
#[derive(Clone, Debug)]
pub struct FrameConnection {
    dim: usize,
    /// gamma[a-1][b-1][c-1] = Gamma^a_{bc}.
    gamma: Vec<Vec<Vec<f64>>>,
}

impl FrameConnection {
    pub(crate) fn new(dim: usize, gamma: Vec<Vec<Vec<f64>>>) -> Self {
        FrameConnection { dim, gamma }
    }

    /// `Gamma^a_{bc}`, legs in `1..=D`.
    pub fn upper(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[a - 1][b - 1][c - 1]
    }

    /// `Gamma_{abc} = eta_{ad} Gamma^d_{bc}`: lowering swaps legs 1 and 2.
    pub fn lower(&self, a: usize, b: usize, c: usize) -> f64 {
        let d = match a {
            1 => 2,
            2 => 1,
            other => other,
        };
        self.upper(d, b, c)
    }

    /// `Gamma_{a b c}` in component-vector-direction layout: `a` the lowered
    /// component index, `b` the differentiated leg and `c` the direction leg,
    /// i.e. `eta_{ad} < m^d , nabla_{e_c} e_b >`. This is the layout the case
    /// analysis writes its components in (`Gamma_{2i2}`, `Gamma_{3n2}`, ...).
    pub fn component(&self, a: usize, b: usize, c: usize) -> f64 {
        self.lower(a, c, b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// The auxiliary scalars entering the frame Killing equations, evaluated at a
/// point. Transverse indices are the labels `3..=D`.
#[derive(Clone, Debug)]
pub struct FrameScalars {
    pub dim: usize,
    /// `B_ij = m_{ie,u} m_j^{~e}`.
    pub b: Vec<Vec<f64>>,
    /// `W_i = m_i^{~e} W_e` (frame components of the metric one-form data).
    pub w: Vec<f64>,
    /// `J_i = D_i H - D_2 W_i - B_{ji} W^j`.
    pub j: Vec<f64>,
    /// `A_ij = (D_j W_i - D_i W_j) + (D_kij - D_kji) W^k`, antisymmetrization
    /// written without the 1/2 weight (the convention the equations need to
    /// agree with the coordinate oracle).
    pub a: Vec<Vec<f64>>,
    /// `D_ijk = m_{ie,f} (m_j^{~e} m_k^{~f} - m_k^{~e} m_j^{~f})`.
    pub d: Vec<Vec<Vec<f64>>>,
    /// Connection components `Gamma_{3n2}`, `Gamma_{3n3}`, `Gamma_{3nm}`
    /// (component-vector-direction layout), indexed by `n - 4` (and `m - 4`).
    pub gamma_3n2: Vec<f64>,
    pub gamma_3n3: Vec<f64>,
    pub gamma_3nm: Vec<Vec<f64>>,
}

impl FrameScalars {
    fn t(&self, i: usize) -> usize {
        i - 3
    }

    pub fn b_ij(&self, i: usize, j: usize) -> f64 {
        self.b[self.t(i)][self.t(j)]
    }

    pub fn w_i(&self, i: usize) -> f64 {
        self.w[self.t(i)]
    }

    pub fn j_i(&self, i: usize) -> f64 {
        self.j[self.t(i)]
    }

    pub fn a_ij(&self, i: usize, j: usize) -> f64 {
        self.a[self.t(i)][self.t(j)]
    }

    pub fn d_ijk(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d[self.t(i)][self.t(j)][self.t(k)]
    }

    /// Largest of |Gamma_3n2|, |Gamma_3n3|, |Gamma_3nm| over all n, m: the
    /// quantity whose vanishing marks a Case-2 metric.
    pub fn max_case2_gamma(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for v in self.gamma_3n2.iter().chain(self.gamma_3n3.iter()) {
            worst = worst.max(v.abs());
        }
        for row in &self.gamma_3nm {
            for v in row {
                worst = worst.max(v.abs());
            }
        }
        worst
    }
}

/// Field-level tables for the frame scalars, built once per metric.
pub(crate) struct FrameScalarFields {
    pub b: Vec<Vec<ScalarField>>,
    pub w: Vec<ScalarField>,
    pub j: Vec<ScalarField>,
    pub a: Vec<Vec<ScalarField>>,
    pub d: Vec<Vec<Vec<ScalarField>>>,
}

impl FrameScalarFields {
    pub fn eval(
        &self,
        p: &Point,
        cache: &mut EvalCache,
        conn: &FrameConnection,
    ) -> Result<FrameScalars, GeometryError> {
        let n = self.w.len();
        let dim = conn.dim();
        let eval_mat = |m: &Vec<Vec<ScalarField>>,
                        cache: &mut EvalCache|
         -> Result<Vec<Vec<f64>>, GeometryError> {
            m.iter()
                .map(|row| {
                    row.iter()
                        .map(|f| f.eval_cached(p, cache).map_err(GeometryError::from))
                        .collect()
                })
                .collect()
        };
        let b = eval_mat(&self.b, cache)?;
        let a = eval_mat(&self.a, cache)?;
        let w = self
            .w
            .iter()
            .map(|f| f.eval_cached(p, cache).map_err(GeometryError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let j = self
            .j
            .iter()
            .map(|f| f.eval_cached(p, cache).map_err(GeometryError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let mut d = vec![vec![vec![0.0; n]; n]; n];
        for i in 0..n {
            for jj in 0..n {
                for k in 0..n {
                    d[i][jj][k] = self.d[i][jj][k].eval_cached(p, cache)?;
                }
            }
        }

        let trans = dim - 2;
        let mut gamma_3n2 = Vec::new();
        let mut gamma_3n3 = Vec::new();
        let mut gamma_3nm = Vec::new();
        for nleg in 4..=dim {
            gamma_3n2.push(conn.component(3, nleg, 2));
            gamma_3n3.push(conn.component(3, nleg, 3));
            let mut row = Vec::new();
            for mleg in 4..=dim {
                row.push(conn.component(3, nleg, mleg));
            }
            gamma_3nm.push(row);
        }
        debug_assert_eq!(gamma_3n2.len(), trans.saturating_sub(1));

        Ok(FrameScalars {
            dim,
            b,
            w,
            j,
            a,
            d,
            gamma_3n2,
            gamma_3n3,
            gamma_3nm,
        })
    }
}

/// Mask check helper: every coordinate a field depends on must be allowed.
pub(crate) fn check_mask(
    field: &ScalarField,
    allowed: CoordMask,
    what: &str,
) -> Result<(), GeometryError> {
    if field.mask().subset_of(allowed) {
        Ok(())
    } else {
        Err(GeometryError::VDependence {
            what: what.to_string(),
        })
    }
}
