use super::{h_tolerance, ForchheimerPolynomial};
use crate::error::NumericError;
use crate::quadrature::adaptive_simpson;

/// Checkpoints per decade of `ξ`.
const PER_DECADE: usize = 24;
const XI_MIN: f64 = 1e-6;

/// Memoized evaluation of `H(ξ)` for repeated queries.
///
/// `H` is tabulated once at geometric checkpoints; a query integrates only
/// from the nearest checkpoint below it, so each evaluation touches a short
/// interval. Queries beyond the last checkpoint integrate from there.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    poly: ForchheimerPolynomial,
    xi: Vec<f64>,
    h: Vec<f64>,
}

impl PotentialTable {
    pub fn new(poly: &ForchheimerPolynomial, xi_max: f64) -> Result<Self, NumericError> {
        let mut xi = vec![0.0];
        let mut h = vec![0.0];
        if !poly.is_constant() && xi_max > XI_MIN {
            let decades = (xi_max / XI_MIN).log10();
            let n = (decades * PER_DECADE as f64).ceil().max(1.0) as usize;
            let step = (xi_max / XI_MIN).ln() / n as f64;
            let mut acc = 0.0;
            let mut prev = 0.0;
            for k in 0..=n {
                let x = XI_MIN * (step * k as f64).exp();
                acc += segment(poly, prev, x)?;
                xi.push(x);
                h.push(acc);
                prev = x;
            }
        }
        Ok(Self {
            poly: poly.clone(),
            xi,
            h,
        })
    }

    pub fn polynomial(&self) -> &ForchheimerPolynomial {
        &self.poly
    }

    pub fn eval(&self, xi: f64) -> Result<f64, NumericError> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(NumericError::Domain { what: "xi", value: xi });
        }
        if self.poly.is_constant() {
            return Ok(xi * xi / self.poly.a0());
        }
        let k = self.xi.partition_point(|&x| x <= xi) - 1;
        Ok(self.h[k] + segment(&self.poly, self.xi[k], xi)?)
    }
}

fn segment(poly: &ForchheimerPolynomial, a: f64, b: f64) -> Result<f64, NumericError> {
    if b <= a {
        return Ok(0.0);
    }
    let tol = h_tolerance(poly.eval_k1(b)?, b);
    adaptive_simpson(&|r| Ok(2.0 * r * poly.eval_k1(r)?), a, b, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_direct_quadrature() {
        let p = ForchheimerPolynomial::new(vec![1.0, 2.0, 1.0], vec![0.0, 1.5, 3.0]).unwrap();
        let t = PotentialTable::new(&p, 1e3).unwrap();
        for &xi in &[0.0, 5e-7, 1e-3, 0.37, 1.0, 12.5, 999.0, 5e3] {
            let direct = p.eval_h(xi).unwrap();
            let tab = t.eval(xi).unwrap();
            assert!(
                (direct - tab).abs() <= 1e-11 * direct.max(1e-300),
                "xi={xi}: {direct} vs {tab}"
            );
        }
    }

    #[test]
    fn constant_polynomial_is_closed_form() {
        let p = ForchheimerPolynomial::constant(2.0).unwrap();
        let t = PotentialTable::new(&p, 10.0).unwrap();
        assert_eq!(t.eval(3.0).unwrap(), 4.5);
    }
}
