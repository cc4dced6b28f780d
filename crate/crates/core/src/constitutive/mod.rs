//! Generalized Forchheimer constitutive laws.
//!
//! A momentum polynomial `g(s) = Σ aₖ s^αₖ` defines `G(s) = s·g(s)`, whose
//! inverse turns a pressure-gradient magnitude `ξ` into a speed. The induced
//! conductivity `K₁(ξ) = 1/g(G⁻¹(ξ))` is the nonlinear diffusion coefficient
//! of the active population, and `H(ξ) = ∫₀^{ξ²} K₁(√s) ds` is its potential.

mod potential;
pub mod suite;

use serde::{Deserialize, Serialize};

use crate::error::{NumericError, ValidationError};

pub use potential::PotentialTable;

/// Relative tolerance of the `G⁻¹` root finder.
pub const INVERSE_RTOL: f64 = 1e-12;
/// Iteration cap of the `G⁻¹` root finder.
pub const INVERSE_MAX_ITER: usize = 200;

/// `s^alpha` for `s >= 0`, with `0^0 = 1` and `0^alpha = 0` for `alpha > 0`.
#[inline]
pub fn pow_nonneg(s: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if s == 0.0 {
        0.0
    } else if alpha == 1.0 {
        s
    } else if alpha.fract() == 0.0 && alpha.abs() <= 64.0 {
        s.powi(alpha as i32)
    } else if alpha == 0.5 {
        s.sqrt()
    } else {
        s.powf(alpha)
    }
}

/// The polynomial `g(s) = Σ aₖ s^αₖ` with nonnegative coefficients and
/// exponents `0 = α₀ < α₁ < … < α_N` (non-integer exponents allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialRepr", into = "PolynomialRepr")]
pub struct ForchheimerPolynomial {
    coeffs: Vec<f64>,
    exps: Vec<f64>,
    /// Index of the highest term with a positive coefficient.
    lead: usize,
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    coeffs: Vec<f64>,
    exps: Vec<f64>,
}

impl TryFrom<PolynomialRepr> for ForchheimerPolynomial {
    type Error = ValidationError;

    fn try_from(r: PolynomialRepr) -> Result<Self, Self::Error> {
        ForchheimerPolynomial::new(r.coeffs, r.exps)
    }
}

impl From<ForchheimerPolynomial> for PolynomialRepr {
    fn from(p: ForchheimerPolynomial) -> Self {
        PolynomialRepr {
            coeffs: p.coeffs,
            exps: p.exps,
        }
    }
}

impl ForchheimerPolynomial {
    pub fn new(coeffs: Vec<f64>, exps: Vec<f64>) -> Result<Self, ValidationError> {
        const CTX: &str = "forchheimer polynomial";
        if coeffs.is_empty() {
            return Err(ValidationError::new(CTX, "at least one term is required"));
        }
        if coeffs.len() != exps.len() {
            return Err(ValidationError::new(
                CTX,
                format!(
                    "{} coefficients but {} exponents",
                    coeffs.len(),
                    exps.len()
                ),
            ));
        }
        if coeffs.iter().chain(&exps).any(|v| !v.is_finite()) {
            return Err(ValidationError::new(CTX, "coefficients and exponents must be finite"));
        }
        if !(coeffs[0] > 0.0) {
            return Err(ValidationError::new(CTX, "a0 must be positive (g(0) > 0)"));
        }
        if let Some(c) = coeffs.iter().find(|&&c| c < 0.0) {
            return Err(ValidationError::new(
                CTX,
                format!("coefficients must be nonnegative, got {c}"),
            ));
        }
        if exps[0] != 0.0 {
            return Err(ValidationError::new(CTX, "the first exponent must be 0"));
        }
        if let Some(w) = exps.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(ValidationError::new(
                CTX,
                format!(
                    "exponents must be strictly increasing, got {} then {}",
                    w[0], w[1]
                ),
            ));
        }
        let lead = coeffs.iter().rposition(|&c| c > 0.0).unwrap_or(0);
        Ok(Self { coeffs, exps, lead })
    }

    /// `g ≡ a0` (linear Darcy law).
    pub fn constant(a0: f64) -> Result<Self, ValidationError> {
        Self::new(vec![a0], vec![0.0])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exps
    }

    pub fn a0(&self) -> f64 {
        self.coeffs[0]
    }

    /// Largest exponent carrying a positive coefficient.
    pub fn leading_exponent(&self) -> f64 {
        self.exps[self.lead]
    }

    pub fn is_constant(&self) -> bool {
        self.lead == 0
    }

    fn g_raw(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.exps)
            .map(|(&c, &e)| c * pow_nonneg(s, e))
            .sum()
    }

    /// `s·g'(s) = Σ aₖ αₖ s^αₖ`.
    fn s_dg_raw(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.exps)
            .skip(1)
            .map(|(&c, &e)| c * e * pow_nonneg(s, e))
            .sum()
    }

    /// Evaluates `g(s)` for `s >= 0`.
    pub fn eval_g(&self, s: f64) -> Result<f64, NumericError> {
        check_nonneg("s", s)?;
        Ok(self.g_raw(s))
    }

    /// `g'(s)` for `s > 0`.
    pub fn eval_dg(&self, s: f64) -> Result<f64, NumericError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(NumericError::Domain { what: "s", value: s });
        }
        Ok(self.s_dg_raw(s) / s)
    }

    /// `G(s) = s·g(s)`.
    pub fn eval_big_g(&self, s: f64) -> Result<f64, NumericError> {
        check_nonneg("s", s)?;
        Ok(s * self.g_raw(s))
    }

    /// Solves `s·g(s) = ξ` for the unique `s >= 0`.
    ///
    /// Newton's method started at an upper bound of the root; `G` is convex and
    /// increasing on `[0, ∞)`, so the iterates decrease monotonically. A
    /// bisection step on the bracket `[0, ξ/a₀]` guards against round-off.
    pub fn invert_big_g(&self, xi: f64) -> Result<f64, NumericError> {
        check_nonneg("xi", xi)?;
        if xi == 0.0 {
            return Ok(0.0);
        }
        let a0 = self.a0();
        if self.is_constant() {
            return Ok(xi / a0);
        }
        let lead_c = self.coeffs[self.lead];
        let lead_e = self.exps[self.lead];
        // G(s) >= a0·s and G(s) >= a_N·s^(α_N+1).
        let mut hi = (xi / a0).min(pow_nonneg(xi / lead_c, 1.0 / (lead_e + 1.0)));
        let mut lo = 0.0_f64;
        let accept = INVERSE_RTOL * xi.max(1.0);
        let mut s = hi;
        let mut resid = f64::INFINITY;
        for _ in 0..INVERSE_MAX_ITER {
            let g = self.g_raw(s);
            resid = s * g - xi;
            if resid.abs() <= 1e-14 * xi {
                return Ok(s);
            }
            if resid > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = g + self.s_dg_raw(s);
            let mut next = s - resid / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == s || hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
            s = next;
        }
        if resid.abs() <= accept {
            Ok(s)
        } else {
            Err(NumericError::NoConvergence {
                what: "inverse of G",
                iterations: INVERSE_MAX_ITER,
                residual: resid.abs(),
            })
        }
    }

    /// `K₁(ξ) = 1/g(G⁻¹(ξ))`, with values in `(0, 1/a₀]`.
    pub fn eval_k1(&self, xi: f64) -> Result<f64, NumericError> {
        if self.is_constant() {
            check_nonneg("xi", xi)?;
            return Ok(1.0 / self.a0());
        }
        let s = self.invert_big_g(xi)?;
        Ok(1.0 / self.g_raw(s))
    }

    /// `K₁'(ξ) = -g'(s) / (g(s)² G'(s))` with `s = G⁻¹(ξ)`; zero for `ξ = 0`
    /// when the derivative is unbounded there.
    pub fn eval_k1_derivative(&self, xi: f64) -> Result<f64, NumericError> {
        check_nonneg("xi", xi)?;
        if self.is_constant() {
            return Ok(0.0);
        }
        let s = self.invert_big_g(xi)?;
        if s == 0.0 {
            // g'(0) is finite only if every non-constant exponent is >= 1.
            let dg0: f64 = self
                .coeffs
                .iter()
                .zip(&self.exps)
                .skip(1)
                .filter(|(_, &e)| e == 1.0)
                .map(|(&c, _)| c)
                .sum();
            let finite = self.exps.iter().skip(1).all(|&e| e >= 1.0);
            let a0 = self.a0();
            return Ok(if finite { -dg0 / (a0 * a0 * a0) } else { 0.0 });
        }
        let g = self.g_raw(s);
        let s_dg = self.s_dg_raw(s);
        Ok(-(s_dg / s) / (g * g * (g + s_dg)))
    }

    /// `H(ξ) = ∫₀^{ξ²} K₁(√s) ds = ∫₀^ξ 2r K₁(r) dr` by adaptive Simpson
    /// quadrature.
    pub fn eval_h(&self, xi: f64) -> Result<f64, NumericError> {
        check_nonneg("xi", xi)?;
        if xi == 0.0 {
            return Ok(0.0);
        }
        if self.is_constant() {
            return Ok(xi * xi / self.a0());
        }
        let tol = h_tolerance(self.eval_k1(xi)?, xi);
        crate::quadrature::adaptive_simpson(&|r| Ok(2.0 * r * self.eval_k1(r)?), 0.0, xi, tol)
    }

    /// `a = α_N/(α_N + 1)`, zero for a constant polynomial.
    pub fn exponent_a(&self) -> f64 {
        let n = self.leading_exponent();
        n / (n + 1.0)
    }

    /// The constant `θ = 1/max(α_N, 1)` of the condition `g(s) >= θ s g'(s)`.
    pub fn g2_theta(&self) -> f64 {
        1.0 / self.leading_exponent().max(1.0)
    }

    /// `g(s) - θ·s·g'(s)`; nonnegative for every valid polynomial.
    pub fn g2_margin(&self, s: f64) -> Result<f64, NumericError> {
        check_nonneg("s", s)?;
        Ok(self.g_raw(s) - self.g2_theta() * self.s_dg_raw(s))
    }

    /// Fits the envelope constants of `K₁` by sampling; see [`KBounds`].
    pub fn estimate_bounds(&self, xi_max: f64, samples: usize) -> Result<KBounds, NumericError> {
        if !(xi_max > 0.0) || !xi_max.is_finite() {
            return Err(NumericError::Domain {
                what: "xi_max",
                value: xi_max,
            });
        }
        let a = self.exponent_a();
        let points = bound_samples(xi_max, samples);
        let mut d1 = f64::INFINITY;
        let mut d2 = 0.0_f64;
        let mut d3 = f64::INFINITY;
        for &xi in &points {
            let k = self.eval_k1(xi)?;
            let scaled = k * (1.0 + xi).powf(a);
            d1 = d1.min(scaled);
            d2 = d2.max(scaled);
            let grow = xi.powf(2.0 - a) - 1.0;
            if grow > 0.0 {
                d3 = d3.min(k * xi * xi / grow);
            }
        }
        // With no sample above ξ = 1 the lower growth bound is vacuous.
        if !d3.is_finite() {
            d3 = d1;
        }
        Ok(KBounds {
            a,
            d1,
            d2,
            d3,
            xi_max,
            samples: points.len(),
        })
    }
}

/// Quadrature tolerance for `H(ξ)`: the looser of the two bounds never
/// exceeds `1e-10·max(ξ², 1)` and stays relative to the lower sandwich bound.
pub(crate) fn h_tolerance(k1_at_xi: f64, xi: f64) -> f64 {
    (1e-10 * (xi * xi).max(1.0)).min(1e-13 * k1_at_xi * xi * xi)
}

/// Sample points `{0} ∪ log-spaced(ξ_max·1e-12, ξ_max)` used by the bound
/// estimates; a single sample is just `ξ = 0`.
pub fn bound_samples(xi_max: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 | 1 => vec![0.0],
        2 => vec![0.0, xi_max],
        n => {
            let lo = xi_max * 1e-12;
            let ratio = (xi_max / lo).ln();
            let mut pts = Vec::with_capacity(n);
            pts.push(0.0);
            pts.extend((0..n - 1).map(|i| lo * (ratio * i as f64 / (n - 2) as f64).exp()));
            pts
        }
    }
}

fn check_nonneg(what: &'static str, value: f64) -> Result<(), NumericError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(NumericError::Domain { what, value })
    }
}

/// Sampled envelope constants of `K₁`:
/// `d₁/(1+ξ)^a ≤ K₁(ξ) ≤ d₂/(1+ξ)^a` and `d₃(ξ^{2-a} - 1) ≤ K₁(ξ)ξ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KBounds {
    pub a: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub xi_max: f64,
    pub samples: usize,
}

/// Mass exchange between the populations, `b(z) = ĉ·sign(z)·|z|^σ`.
///
/// `ĉ = 0` switches the coupling off entirely (`b ≡ 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingRepr", into = "CouplingRepr")]
pub struct CouplingLaw {
    c_hat: f64,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct CouplingRepr {
    c_hat: f64,
    sigma: f64,
}

impl TryFrom<CouplingRepr> for CouplingLaw {
    type Error = ValidationError;

    fn try_from(r: CouplingRepr) -> Result<Self, Self::Error> {
        CouplingLaw::new(r.c_hat, r.sigma)
    }
}

impl From<CouplingLaw> for CouplingRepr {
    fn from(c: CouplingLaw) -> Self {
        CouplingRepr {
            c_hat: c.c_hat,
            sigma: c.sigma,
        }
    }
}

impl CouplingLaw {
    pub fn new(c_hat: f64, sigma: f64) -> Result<Self, ValidationError> {
        if !(c_hat >= 0.0) || !c_hat.is_finite() {
            return Err(ValidationError::new(
                "coupling law",
                format!("c_hat must be finite and >= 0, got {c_hat}"),
            ));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(ValidationError::new(
                "coupling law",
                format!("sigma must lie in (0,1), got {sigma}"),
            ));
        }
        Ok(Self { c_hat, sigma })
    }

    /// The decoupled law `b ≡ 0`.
    pub fn disabled() -> Self {
        Self {
            c_hat: 0.0,
            sigma: 0.5,
        }
    }

    pub fn c_hat(&self) -> f64 {
        self.c_hat
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_active(&self) -> bool {
        self.c_hat > 0.0
    }

    #[inline]
    pub fn eval_b(&self, z: f64) -> f64 {
        if z == 0.0 || self.c_hat == 0.0 {
            0.0
        } else {
            self.c_hat * z.signum() * pow_nonneg(z.abs(), self.sigma)
        }
    }

    /// The upper envelope `ĉ|z|^σ`.
    pub fn envelope(&self, z: f64) -> f64 {
        self.c_hat * pow_nonneg(z.abs(), self.sigma)
    }

    /// Secant slope through the origin, `b(z)/z = ĉ|z|^{σ-1}`, with `|z|`
    /// floored at `z_floor` so the slope stays finite.
    #[inline]
    pub fn chord_slope(&self, z: f64, z_floor: f64) -> f64 {
        if self.c_hat == 0.0 {
            0.0
        } else {
            self.c_hat * pow_nonneg(z.abs().max(z_floor), self.sigma - 1.0)
        }
    }

    /// Slope used by the implicit coupling iteration: the chord slope scaled
    /// by `max(σ, 1 − σ)`. It never drops below the tangent slope `σ·b(z)/z`,
    /// so sign crossings of `z` are not overshot, and for small `σ` it
    /// contracts faster than the plain chord.
    #[inline]
    pub fn iteration_slope(&self, z: f64, z_floor: f64) -> f64 {
        self.chord_slope(z, z_floor) * self.sigma.max(1.0 - self.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> ForchheimerPolynomial {
        ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn eval_g_examples() {
        let one = ForchheimerPolynomial::constant(1.0).unwrap();
        assert_eq!(one.eval_g(5.0).unwrap(), 1.0);
        assert_eq!(linear().eval_g(1.0).unwrap(), 2.0);
        let p = ForchheimerPolynomial::new(vec![1.0, 2.0], vec![0.0, 1.5]).unwrap();
        assert!((p.eval_g(4.0).unwrap() - 17.0).abs() < 1e-12);
        assert!(matches!(
            linear().eval_g(-1.0),
            Err(NumericError::Domain { .. })
        ));
    }

    #[test]
    fn invert_examples() {
        let one = ForchheimerPolynomial::constant(1.0).unwrap();
        assert_eq!(one.invert_big_g(7.0).unwrap(), 7.0);
        // Root of s² + s - 2 = 0.
        assert!((linear().invert_big_g(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(linear().invert_big_g(0.0).unwrap(), 0.0);
        assert!(linear().invert_big_g(-2.0).is_err());
    }

    #[test]
    fn invert_matches_closed_form_for_linear_g() {
        let p = linear();
        for &xi in &[1e-9_f64, 1e-3, 0.5, 3.0, 1e4, 1e8] {
            let exact = 2.0 * xi / (1.0 + (1.0 + 4.0 * xi).sqrt());
            let s = p.invert_big_g(xi).unwrap();
            assert!((s - exact).abs() <= 1e-12 * exact.max(1e-300), "xi={xi}");
        }
    }

    #[test]
    fn k1_examples() {
        let one = ForchheimerPolynomial::constant(1.0).unwrap();
        assert_eq!(one.eval_k1(3.0).unwrap(), 1.0);
        assert!((linear().eval_k1(2.0).unwrap() - 0.5).abs() < 1e-14);
        let p = ForchheimerPolynomial::new(vec![2.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(p.eval_k1(0.0).unwrap(), 0.5);
    }

    #[test]
    fn k1_derivative_matches_finite_difference() {
        let p = ForchheimerPolynomial::new(vec![1.0, 0.5, 0.2], vec![0.0, 1.0, 2.5]).unwrap();
        for &xi in &[0.1, 1.0, 7.5, 100.0] {
            let h = 1e-6 * xi;
            let fd = (p.eval_k1(xi + h).unwrap() - p.eval_k1(xi - h).unwrap()) / (2.0 * h);
            let d = p.eval_k1_derivative(xi).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs(), "xi={xi}: {fd} vs {d}");
        }
        // g = 1 + s: K1 = 2/(1+sqrt(1+4ξ)), K1'(0) = -1.
        assert!((linear().eval_k1_derivative(0.0).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn h_examples() {
        let one = ForchheimerPolynomial::constant(1.0).unwrap();
        assert_eq!(one.eval_h(3.0).unwrap(), 9.0);
        assert_eq!(linear().eval_h(0.0).unwrap(), 0.0);
        // Brute-force oracle: 1e6-panel trapezoid rule gives 2.33333333499;
        // the substitution r = s + s² gives exactly 7/3.
        let h = linear().eval_h(2.0).unwrap();
        assert!((h - 7.0 / 3.0).abs() < 1e-10, "{h}");
        assert!((2.0..=4.0).contains(&h));
    }

    #[test]
    fn exponent_a_examples() {
        assert_eq!(linear().exponent_a(), 0.5);
        let quad = ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert!((quad.exponent_a() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ForchheimerPolynomial::constant(3.0).unwrap().exponent_a(), 0.0);
    }

    #[test]
    fn zero_trailing_coefficient_does_not_count_as_leading() {
        let p = ForchheimerPolynomial::new(vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(p.leading_exponent(), 1.0);
        assert_eq!(p.exponent_a(), 0.5);
    }

    #[test]
    fn estimate_bounds_examples() {
        let one = ForchheimerPolynomial::constant(1.0).unwrap();
        let b = one.estimate_bounds(1e3, 50).unwrap();
        assert_eq!((b.d1, b.d2), (1.0, 1.0));

        // Frozen from an independent dense-sampling oracle using the closed form
        // K1(ξ) = 2/(1 + sqrt(1 + 4ξ)) on the same 2000 sample points.
        let b = linear().estimate_bounds(1e6, 2000).unwrap();
        assert!((b.d1 - 0.8660254490671486).abs() < 1e-12, "{}", b.d1);
        assert!((b.d2 - 1.0).abs() < 1e-15);
        assert!((b.d3 - 0.8757823530295058).abs() < 1e-12, "{}", b.d3);
        assert!(0.0 < b.d1 && b.d1 <= b.d2);

        let single = linear().estimate_bounds(1e6, 1).unwrap();
        assert_eq!((single.d1, single.d2), (1.0, 1.0));
    }

    #[test]
    fn invalid_polynomials_are_rejected() {
        assert!(ForchheimerPolynomial::new(vec![], vec![]).is_err());
        assert!(ForchheimerPolynomial::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(ForchheimerPolynomial::new(vec![1.0, -1.0], vec![0.0, 1.0]).is_err());
        assert!(ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.5, 1.0]).is_err());
        assert!(ForchheimerPolynomial::new(vec![1.0, 1.0, 1.0], vec![0.0, 2.0, 1.0]).is_err());
        assert!(ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn coupling_examples() {
        let b = CouplingLaw::new(1.0, 0.5).unwrap();
        assert_eq!(b.eval_b(4.0), 2.0);
        assert_eq!(b.eval_b(0.0), 0.0);
        let b2 = CouplingLaw::new(2.0, 0.5).unwrap();
        assert_eq!(b2.eval_b(-9.0), -6.0);
        assert!(CouplingLaw::new(1.0, 1.5).is_err());
        assert!(CouplingLaw::new(1.0, 0.0).is_err());
        assert!(CouplingLaw::new(-1.0, 0.5).is_err());
        assert!(!CouplingLaw::disabled().is_active());
        assert_eq!(CouplingLaw::disabled().eval_b(3.0), 0.0);
    }

    #[test]
    fn chord_slope_reproduces_b() {
        let b = CouplingLaw::new(0.7, 0.3).unwrap();
        for &z in &[-3.0, -1e-5, 2e-3, 5.0] {
            assert!((b.chord_slope(z, 1e-12) * z - b.eval_b(z)).abs() < 1e-14 * b.envelope(z).max(1.0));
        }
        assert!(b.chord_slope(0.0, 1e-12).is_finite());
    }

    #[test]
    fn iteration_slope_between_tangent_and_chord() {
        for &sigma in &[0.1, 0.5, 0.9] {
            let b = CouplingLaw::new(1.3, sigma).unwrap();
            for &z in &[-2.0, 1e-4, 0.7] {
                let chord = b.chord_slope(z, 1e-12);
                let s = b.iteration_slope(z, 1e-12);
                assert!(s >= sigma * chord - 1e-15 && s <= chord + 1e-15);
            }
        }
        assert_eq!(CouplingLaw::disabled().iteration_slope(1.0, 1e-12), 0.0);
    }
}
