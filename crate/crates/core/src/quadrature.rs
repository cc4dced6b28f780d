//! Adaptive Simpson quadrature for smooth scalar integrands.

use crate::error::NumericError;

const MAX_DEPTH: u32 = 100;

/// Integrates `f` over `[a, b]` to absolute tolerance `abstol`.
///
/// Uses the classic recursive Simpson rule with Richardson correction.
/// Fails if the recursion depth limit is hit while the local error estimate
/// still exceeds its share of the tolerance.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, abstol: f64) -> Result<f64, NumericError>
where
    F: Fn(f64) -> Result<f64, NumericError>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, abstol.max(f64::MIN_POSITIVE), MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, NumericError>
where
    F: Fn(f64) -> Result<f64, NumericError>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    // The interval can no longer be split in floating point.
    if depth == 0 || m <= a || m >= b {
        return Err(NumericError::Quadrature {
            a,
            b,
            estimate: delta.abs() / 15.0,
        });
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = adaptive_simpson(&|x: f64| Ok(x * x * x - 2.0 * x), 0.0, 2.0, 1e-14).unwrap();
        assert!((v - 0.0).abs() < 1e-13);
    }

    #[test]
    fn sine_integral() {
        let v = adaptive_simpson(&|x: f64| Ok(x.sin()), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn root_singularity_converges() {
        let v = adaptive_simpson(&|x: f64| Ok(x.sqrt()), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn propagates_integrand_error() {
        let r = adaptive_simpson(
            &|x: f64| {
                if x > 0.5 {
                    Err(NumericError::Domain { what: "x", value: x })
                } else {
                    Ok(1.0)
                }
            },
            0.0,
            1.0,
            1e-10,
        );
        assert!(r.is_err());
    }
}
