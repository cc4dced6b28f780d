//! Sampled property checks of a constitutive law.

use std::fmt;

use super::{bound_samples, ForchheimerPolynomial};
use crate::error::NumericError;

pub const ROUND_TRIP_RTOL: f64 = 1e-10;
pub const SANDWICH_RTOL: f64 = 1e-8;
pub const G2_SLACK: f64 = 1e-12;

/// `{0}` followed by `n - 1` log-spaced points on `[lo, hi]`.
pub fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut pts = vec![0.0];
    if n >= 2 {
        let m = n - 1;
        let span = (hi / lo).ln();
        pts.extend((0..m).map(|i| {
            if m == 1 {
                hi
            } else {
                lo * (span * i as f64 / (m - 1) as f64).exp()
            }
        }));
    }
    pts
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the property's normalized margin; negative
    /// means violated.
    pub worst_margin: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub results: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(
                f,
                "[{}] {:<14} samples={:<5} worst margin={:.3e}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.samples,
                r.worst_margin
            )?;
        }
        Ok(())
    }
}

/// Runs every sampled property on `n` points spanning `[0, xi_max]`.
pub fn run_suite(
    poly: &ForchheimerPolynomial,
    xi_max: f64,
    n: usize,
) -> Result<SuiteReport, NumericError> {
    let pts = log_points(xi_max * 1e-16, xi_max, n);
    let mut results = Vec::new();

    // G(G⁻¹(ξ)) = ξ
    let mut worst = f64::INFINITY;
    for &xi in &pts {
        let s = poly.invert_big_g(xi)?;
        let err = (poly.eval_big_g(s)? - xi).abs() / xi.max(1.0);
        worst = worst.min(1.0 - err / ROUND_TRIP_RTOL);
    }
    results.push(PropertyResult {
        name: "round-trip",
        passed: worst >= 0.0,
        worst_margin: worst,
        samples: pts.len(),
    });

    let k1: Vec<f64> = pts
        .iter()
        .map(|&xi| poly.eval_k1(xi))
        .collect::<Result<_, _>>()?;

    let worst = k1
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    results.push(PropertyResult {
        name: "monotonicity",
        passed: worst >= 0.0,
        worst_margin: worst,
        samples: pts.len(),
    });

    let mut worst = f64::INFINITY;
    for (&xi, &k) in pts.iter().zip(&k1) {
        let h = poly.eval_h(xi)?;
        let lower = k * xi * xi;
        let scale = lower.max(f64::MIN_POSITIVE);
        let lo_margin = (h - lower) / scale + SANDWICH_RTOL;
        let hi_margin = (2.0 * lower - h) / scale + SANDWICH_RTOL;
        if xi > 0.0 {
            worst = worst.min(lo_margin.min(hi_margin));
        } else {
            worst = worst.min(if h == 0.0 { SANDWICH_RTOL } else { -1.0 });
        }
    }
    results.push(PropertyResult {
        name: "sandwich",
        passed: worst >= 0.0,
        worst_margin: worst,
        samples: pts.len(),
    });

    let mut worst = f64::INFINITY;
    for &s in &pts {
        worst = worst.min(poly.g2_margin(s)? + G2_SLACK);
    }
    results.push(PropertyResult {
        name: "g2-condition",
        passed: worst >= 0.0,
        worst_margin: worst,
        samples: pts.len(),
    });

    let bounds = poly.estimate_bounds(xi_max, n)?;
    let a = bounds.a;
    let mut worst = f64::INFINITY;
    for xi in bound_samples(xi_max, n) {
        let kx2 = poly.eval_k1(xi)? * xi * xi;
        let grow = xi.powf(2.0 - a);
        let scale = kx2.max(1.0);
        let lower = (kx2 - bounds.d3 * (grow - 1.0)) / scale;
        let upper = (bounds.d2 * grow - kx2) / scale;
        worst = worst.min(lower.min(upper) + 1e-12);
    }
    results.push(PropertyResult {
        name: "growth-bound",
        passed: worst >= 0.0,
        worst_margin: worst,
        samples: n,
    });

    Ok(SuiteReport { results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_points_layout() {
        let p = log_points(1e-8, 1e8, 5);
        assert_eq!(p.len(), 5);
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 1e-8).abs() < 1e-22);
        assert!((p[4] - 1e8).abs() < 1e-6);
        assert!((p[2] - 1e-8 * 1e16_f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn suite_passes_for_linear_law() {
        let p = ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        let r = run_suite(&p, 1e8, 200).unwrap();
        assert!(r.all_passed(), "{r}");
        assert_eq!(r.results.len(), 5);
    }
}
