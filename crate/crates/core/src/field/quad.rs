//! Adaptive Gauss-Kronrod quadrature for quadrature fields.
//!
//! A 7-point Gauss rule nested in a 15-point Kronrod rule gives the local
//! error estimate; intervals are bisected until the estimate meets the
//! absolute tolerance budget or the depth limit is hit, in which case the
//! evaluation fails loudly rather than returning a degraded value.

use super::EvalError;

// G7/K15 nodes and weights on [-1, 1]. Kronrod nodes include the Gauss nodes;
// entries are (abscissa, kronrod weight, gauss weight or 0).
const K15: [(f64, f64, f64); 15] = [
    (-0.991455371120813, 0.022935322010529, 0.0),
    (-0.949107912342759, 0.063092092629979, 0.129484966168870),
    (-0.864864423359769, 0.104790010322250, 0.0),
    (-0.741531185599394, 0.140653259715525, 0.279705391489277),
    (-0.586087235467691, 0.169004726639267, 0.0),
    (-0.405845151377397, 0.190350578064785, 0.381830050505119),
    (-0.207784955007898, 0.204432940075298, 0.0),
    (0.0, 0.209482141084728, 0.417959183673469),
    (0.207784955007898, 0.204432940075298, 0.0),
    (0.405845151377397, 0.190350578064785, 0.381830050505119),
    (0.586087235467691, 0.169004726639267, 0.0),
    (0.741531185599394, 0.140653259715525, 0.279705391489277),
    (0.864864423359769, 0.104790010322250, 0.0),
    (0.949107912342759, 0.063092092629979, 0.129484966168870),
    (0.991455371120813, 0.022935322010529, 0.0),
];

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<(f64, f64), EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (x, wk, wg) in K15 {
        let y = f(mid + half * x)?;
        kronrod += wk * y;
        if wg != 0.0 {
            gauss += wg * y;
        }
    }
    kronrod *= half;
    gauss *= half;
    Ok((kronrod, (kronrod - gauss).abs()))
}

fn refine<F>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
    max_depth: usize,
) -> Result<f64, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let (value, err) = gk15(f, a, b)?;
    if err <= tol || err <= f64::EPSILON * value.abs() {
        return Ok(value);
    }
    if depth >= max_depth {
        return Err(EvalError::QuadratureNonConvergence {
            max_depth,
            error: err,
        });
    }
    let mid = 0.5 * (a + b);
    let left = refine(f, a, mid, tol * 0.5, depth + 1, max_depth)?;
    let right = refine(f, mid, b, tol * 0.5, depth + 1, max_depth)?;
    Ok(left + right)
}

/// Integrate `f` from `lower` to `upper` to absolute tolerance `tol`.
pub fn integrate<F>(
    f: F,
    lower: f64,
    upper: f64,
    tol: f64,
    max_depth: usize,
) -> Result<f64, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if lower == upper {
        return Ok(0.0);
    }
    if lower > upper {
        return Ok(-refine(&f, upper, lower, tol, 0, max_depth)?);
    }
    refine(&f, lower, upper, tol, 0, max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|z| Ok(z * z * z - 2.0 * z + 1.0), 0.0, 2.0, 1e-10, 40).unwrap();
        // closed form: z^4/4 - z^2 + z at 2 = 4 - 4 + 2 = 2
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_converges() {
        let v = integrate(|z| Ok((10.0 * z).sin()), 0.0, 3.0, 1e-10, 40).unwrap();
        let exact = (1.0 - (30.0f64).cos()) / 10.0;
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn nonintegrable_singularity_fails() {
        let r = integrate(
            |z| {
                if z == 0.0 {
                    Err(EvalError::DivisionByZero)
                } else {
                    Ok(1.0 / z)
                }
            },
            0.0,
            1.0,
            1e-10,
            40,
        );
        assert!(r.is_err());
    }

    #[test]
    fn depth_exhaustion_is_an_error_not_a_value() {
        let r = integrate(|z: f64| Ok((1.0 / (z + 1e-9)).sin()), 0.0, 1.0, 1e-12, 3);
        assert!(matches!(
            r,
            Err(EvalError::QuadratureNonConvergence { max_depth: 3, .. })
        ));
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let a = integrate(Ok, 0.0, 2.0, 1e-12, 40).unwrap();
        let b = integrate(Ok, 2.0, 0.0, 1e-12, 40).unwrap();
        assert!((a + b).abs() < 1e-14);
    }
}
