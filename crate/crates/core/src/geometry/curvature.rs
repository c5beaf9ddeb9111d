//! Riemann and Ricci curvature at a point, the three polynomial scalar
//! invariants, and the CSI/VSI sampling probe.
//!
//! Conventions: `R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb}
//! + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}` and
//! `R_{bd} = R^a_{bad}`. The invariants computed are the Ricci scalar `R`,
//! `R_ab R^ab`, and the Kretschmann scalar `R_abcd R^abcd`.

use nalgebra::DMatrix;

use crate::chart::Point;
use crate::field::EvalCache;

use super::metric::CCNVMetric;
use super::GeometryError;

/// Curvature data of a metric at one point.
#[derive(Clone, Debug)]
pub struct CurvatureSample {
    pub dim: usize,
    /// Coordinate Christoffels `Gamma^a_{bc}`.
    pub christoffel: Vec<Vec<Vec<f64>>>,
    /// Riemann tensor with the first index raised, `R^a_{bcd}`.
    pub riemann: Vec<Vec<Vec<Vec<f64>>>>,
    /// Ricci tensor `R_ab`.
    pub ricci: Vec<Vec<f64>>,
    /// Ricci scalar.
    pub scalar: f64,
    /// `R_ab R^ab`.
    pub ricci_squared: f64,
    /// `R_abcd R^abcd`.
    pub kretschmann: f64,
}

impl CurvatureSample {
    pub fn invariants(&self) -> [f64; 3] {
        [self.scalar, self.ricci_squared, self.kretschmann]
    }

    /// Riemann with all indices lowered, `R_abcd`, for identity checks.
    pub fn riemann_lowered(&self, g: &DMatrix<f64>) -> Vec<Vec<Vec<Vec<f64>>>> {
        let d = self.dim;
        let mut out = vec![vec![vec![vec![0.0; d]; d]; d]; d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut acc = 0.0;
                        for f in 0..d {
                            acc += g[(a, f)] * self.riemann[f][b][c][e];
                        }
                        out[a][b][c][e] = acc;
                    }
                }
            }
        }
        out
    }
}

/// Outcome of sampling the three invariants over a point set.
#[derive(Clone, Debug)]
pub struct InvariantProbe {
    /// `[R, R_ab R^ab, R_abcd R^abcd]` per sample point.
    pub values: Vec<[f64; 3]>,
    /// Max over the three invariants of (max - min) across the sample.
    pub max_spread: f64,
    /// Max absolute invariant value across the sample.
    pub max_magnitude: f64,
    /// Threshold used for both verdicts.
    pub threshold: f64,
}

impl InvariantProbe {
    /// CSI probe: are all three invariants constant over the sample? This is
    /// a numerical probe at the stored threshold, not a proof.
    pub fn constant(&self) -> bool {
        self.max_spread < self.threshold
    }

    /// VSI probe: do all three invariants vanish over the sample? Numerical
    /// probe, not a proof.
    pub fn vanishing(&self) -> bool {
        self.max_magnitude < self.threshold
    }
}

/// Threshold for the CSI/VSI probe verdicts.
pub const PROBE_THRESHOLD: f64 = 1e-8;

impl CCNVMetric {
    /// Full curvature data at a point. Second derivatives of the metric
    /// fields are exact (structural differentiation applied twice).
    pub fn curvature_at(&self, p: &Point) -> Result<CurvatureSample, GeometryError> {
        let dim = self.dim();
        let mut cache = EvalCache::new();
        let g = self.metric_at_cached(p, &mut cache)?;
        let ginv = self.inverse_metric_at_cached(p, &mut cache)?;
        let dg = self.dg_at(p, &mut cache)?;
        let ddg = self.ddg_at(p, &mut cache)?;
        let gamma = self.christoffel_at_cached(p, &mut cache)?;

        // d_e g^{ad} = -g^{aa'} (d_e g_{a'b'}) g^{b'd}
        let mut dginv = vec![vec![vec![0.0; dim]; dim]; dim];
        for e in 0..dim {
            for a in 0..dim {
                for d in 0..dim {
                    let mut acc = 0.0;
                    for ap in 0..dim {
                        for bp in 0..dim {
                            acc -= ginv[(a, ap)] * dg[e][ap][bp] * ginv[(bp, d)];
                        }
                    }
                    dginv[e][a][d] = acc;
                }
            }
        }

        // d_e Gamma^a_{bc}
        let mut dgamma = vec![vec![vec![vec![0.0; dim]; dim]; dim]; dim];
        for e in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    for c in 0..dim {
                        let mut acc = 0.0;
                        for d in 0..dim {
                            acc += dginv[e][a][d] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                            acc += ginv[(a, d)]
                                * (ddg[e][b][d][c] + ddg[e][c][d][b] - ddg[e][d][b][c]);
                        }
                        dgamma[e][a][b][c] = 0.5 * acc;
                    }
                }
            }
        }

        let mut riemann = vec![vec![vec![vec![0.0; dim]; dim]; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let mut acc = dgamma[c][a][d][b] - dgamma[d][a][c][b];
                        for e in 0..dim {
                            acc += gamma[a][c][e] * gamma[e][d][b]
                                - gamma[a][d][e] * gamma[e][c][b];
                        }
                        riemann[a][b][c][d] = acc;
                    }
                }
            }
        }

        let mut ricci = vec![vec![0.0; dim]; dim];
        for b in 0..dim {
            for d in 0..dim {
                let mut acc = 0.0;
                for a in 0..dim {
                    acc += riemann[a][b][a][d];
                }
                ricci[b][d] = acc;
            }
        }

        let mut scalar = 0.0;
        for b in 0..dim {
            for d in 0..dim {
                scalar += ginv[(b, d)] * ricci[b][d];
            }
        }

        let mut ricci_squared = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        ricci_squared += ginv[(a, c)] * ginv[(b, d)] * ricci[a][b] * ricci[c][d];
                    }
                }
            }
        }

        // Kretschmann: lower the first index, then contract fully.
        let mut kretschmann = 0.0;
        let mut lowered = vec![vec![vec![vec![0.0; dim]; dim]; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let mut acc = 0.0;
                        for f in 0..dim {
                            acc += g[(a, f)] * riemann[f][b][c][d];
                        }
                        lowered[a][b][c][d] = acc;
                    }
                }
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let mut up = 0.0;
                        for ap in 0..dim {
                            for bp in 0..dim {
                                for cp in 0..dim {
                                    for dp in 0..dim {
                                        up += ginv[(a, ap)]
                                            * ginv[(b, bp)]
                                            * ginv[(c, cp)]
                                            * ginv[(d, dp)]
                                            * lowered[ap][bp][cp][dp];
                                    }
                                }
                            }
                        }
                        kretschmann += lowered[a][b][c][d] * up;
                    }
                }
            }
        }

        Ok(CurvatureSample {
            dim,
            christoffel: gamma,
            riemann,
            ricci,
            scalar,
            ricci_squared,
            kretschmann,
        })
    }

    fn ddg_at(
        &self,
        p: &Point,
        cache: &mut EvalCache,
    ) -> Result<Vec<Vec<Vec<Vec<f64>>>>, GeometryError> {
        let dim = self.dim();
        let ddg = self.ddg_fields();
        let mut out = vec![vec![vec![vec![0.0; dim]; dim]; dim]; dim];
        for c in 0..dim {
            for d in 0..dim {
                for a in 0..dim {
                    for b in a..dim {
                        let v = ddg[c][d][a][b].eval_cached(p, cache)?;
                        out[c][d][a][b] = v;
                        out[c][d][b][a] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Evaluate the three scalar invariants over a sample and report the
    /// CSI spread and VSI magnitude. Explicitly a probe, not a proof: it can
    /// only falsify constancy or vanishing on the sampled points.
    pub fn vsi_csi_probe(&self, sample: &[Point]) -> Result<InvariantProbe, GeometryError> {
        assert!(
            sample.len() >= 10,
            "vsi_csi_probe needs at least 10 sample points"
        );
        let mut values = Vec::with_capacity(sample.len());
        for p in sample {
            values.push(self.curvature_at(p)?.invariants());
        }
        let mut max_spread: f64 = 0.0;
        let mut max_magnitude: f64 = 0.0;
        for k in 0..3 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in &values {
                lo = lo.min(v[k]);
                hi = hi.max(v[k]);
                max_magnitude = max_magnitude.max(v[k].abs());
            }
            max_spread = max_spread.max(hi - lo);
        }
        Ok(InvariantProbe {
            values,
            max_spread,
            max_magnitude,
            threshold: PROBE_THRESHOLD,
        })
    }
}
