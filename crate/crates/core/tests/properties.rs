//! Property tests for the invariants of each module.

use forchflow_core::config::Config;
use forchflow_core::constitutive::{bound_samples, CouplingLaw, ForchheimerPolynomial, PotentialTable};
use forchflow_core::energy::{compute_constants, evaluate_functionals, EnergyLedger};
use forchflow_core::grid::{FaceField, GridSpec, ScalarField, StructuredGrid};
use forchflow_core::solver::{coupled_step, ModelParameters, SimulationState, StepperConfig};
use proptest::prelude::*;

/// Polynomials `a0 + Σ c_k s^{e_k}` with positive coefficients and increasing
/// exponents.
fn polynomial() -> impl Strategy<Value = ForchheimerPolynomial> {
    (0.2..3.0_f64, prop::collection::vec((0.05..3.0_f64, 0.2..1.5_f64), 0..3)).prop_map(|(a0, terms)| {
        let mut coeffs = vec![a0];
        let mut exps = vec![0.0];
        let mut e = 0.0;
        for (c, step) in terms {
            e += step;
            coeffs.push(c);
            exps.push(e);
        }
        ForchheimerPolynomial::new(coeffs, exps).unwrap()
    })
}

fn log_xi() -> impl Strategy<Value = f64> {
    (-12.0..8.0_f64).prop_map(|e| 10f64.powf(e))
}

fn params(lambda: f64, poly: ForchheimerPolynomial, c_hat: f64, sigma: f64) -> ModelParameters {
    let coupling = if c_hat == 0.0 {
        CouplingLaw::disabled()
    } else {
        CouplingLaw::new(c_hat, sigma).unwrap()
    };
    ModelParameters::new(lambda, 1.0, poly, coupling, None, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_round_trips(poly in polynomial(), xi in log_xi()) {
        let s = poly.invert_big_g(xi).unwrap();
        let back = poly.eval_big_g(s).unwrap();
        prop_assert!((back - xi).abs() <= 1e-10 * xi.max(1.0), "xi {xi} back {back}");
    }

    #[test]
    fn k1_is_nonincreasing(poly in polynomial(), a in log_xi(), b in log_xi()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(poly.eval_k1(hi).unwrap() <= poly.eval_k1(lo).unwrap());
        prop_assert!(poly.eval_k1(hi).unwrap() <= 1.0 / poly.a0());
    }

    #[test]
    fn potential_is_sandwiched(poly in polynomial(), xi in (-6.0..4.0_f64).prop_map(|e| 10f64.powf(e))) {
        let k = poly.eval_k1(xi).unwrap();
        let h = poly.eval_h(xi).unwrap();
        let low = k * xi * xi;
        prop_assert!(h >= low * (1.0 - 1e-8), "H {h} below {low}");
        prop_assert!(h <= 2.0 * low * (1.0 + 1e-8), "H {h} above {}", 2.0 * low);
    }

    #[test]
    fn g2_condition_holds(poly in polynomial(), s in (-8.0..6.0_f64).prop_map(|e| 10f64.powf(e))) {
        let margin = poly.g2_margin(s).unwrap();
        prop_assert!(margin >= -1e-12 * poly.eval_g(s).unwrap(), "margin {margin}");
    }

    #[test]
    fn growth_bounds_hold_on_their_samples(poly in polynomial(), samples in 2usize..200) {
        let b = poly.estimate_bounds(1e6, samples).unwrap();
        prop_assert!(0.0 < b.d1 && b.d1 <= b.d2);
        for xi in bound_samples(1e6, samples) {
            let k = poly.eval_k1(xi).unwrap();
            let kx2 = k * xi * xi;
            let tol = 1e-12 * kx2.max(1e-300);
            prop_assert!(kx2 <= b.d2 * xi.powf(2.0 - b.a) + tol);
            prop_assert!(b.d3 * (xi.powf(2.0 - b.a) - 1.0) <= kx2 + tol);
            let scaled = k * (1.0 + xi).powf(b.a);
            prop_assert!(b.d1 <= scaled * (1.0 + 1e-14) && scaled <= b.d2 * (1.0 + 1e-14));
        }
    }

    #[test]
    fn coupling_law_is_odd_and_enveloped(c_hat in 0.01..5.0_f64, sigma in 0.05..0.99_f64, z in -50.0..50.0_f64) {
        let b = CouplingLaw::new(c_hat, sigma).unwrap();
        prop_assert_eq!(b.eval_b(-z), -b.eval_b(z));
        prop_assert!(b.eval_b(z).abs() <= b.envelope(z) * (1.0 + 1e-15));
        prop_assert!(b.eval_b(z) * z >= 0.0);
    }

    #[test]
    fn divergence_theorem(nx in 2usize..12, ny in 2usize..12, seed in prop::collection::vec(-5.0..5.0_f64, 8)) {
        let g = StructuredGrid::new(&GridSpec::unit_square(nx, ny)).unwrap();
        let mut flux = FaceField::zeros(&g);
        for (k, f) in flux.x.iter_mut().enumerate() {
            *f = seed[k % 4] * ((k as f64) * 0.7 + seed[4]).sin();
        }
        for (k, f) in flux.y.iter_mut().enumerate() {
            *f = seed[5 + k % 3] * ((k as f64) * 1.1).cos();
        }
        let lhs = g.volume_integral(&g.divergence(&flux));
        let rhs = g.boundary_outflow(&flux);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn integrals_and_gradients_of_simple_fields(nx in 2usize..16, ny in 2usize..16, c in -3.0..3.0_f64, p in -2.0..2.0_f64, q in -2.0..2.0_f64) {
        let mut spec = GridSpec::unit_square(nx, ny);
        spec.lx = 2.0;
        let g = StructuredGrid::new(&spec).unwrap();
        let linear = ScalarField::from_fn(&g, |x, y| c + p * x + q * y);
        let exact = g.area() * (c + p * 1.0 + q * 0.5);
        prop_assert!((g.volume_integral(&linear) - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        let mag = g.face_gradient_magnitude_neumann(&ScalarField::constant(&g, c));
        prop_assert!(mag.x.iter().chain(&mag.y).all(|&m| m == 0.0));
    }

    #[test]
    fn c3_scales_linearly_with_c_hat(lambda in 0.5..1.0_f64, c_hat in 0.01..3.0_f64, sigma in 0.1..0.9_f64, s in 0.1..10.0_f64) {
        let poly = ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        let bounds = poly.estimate_bounds(1e4, 100).unwrap();
        let base = compute_constants(&params(lambda, poly.clone(), c_hat, sigma), &bounds, 1.0);
        let scaled = compute_constants(&params(lambda, poly, s * c_hat, sigma), &bounds, 1.0);
        prop_assert!((scaled.c3 - s * base.c3).abs() <= 1e-13 * scaled.c3.abs().max(1e-300));
    }

    #[test]
    fn config_dump_is_a_fixed_point(lambda in 0.3..1.0_f64, sigma in 0.05..0.95_f64, c_hat in 0.0..4.0_f64, nx in 2usize..40, dt in 1e-4..0.1_f64) {
        let text = format!("[model]\nlambda = {lambda}\nsigma = {sigma}\nc_hat = {c_hat}\n[grid]\nnx = {nx}\n[stepper]\ndt = {dt}\n");
        let first = Config::parse(&text, "generated").unwrap();
        let back = Config::parse(&first.dump().unwrap(), "dump").unwrap();
        prop_assert_eq!(&back, &first);
        let (a, b) = (first.resolve(false).unwrap(), back.resolve(false).unwrap());
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.grid, b.grid);
        prop_assert_eq!(a.stepper, b.stepper);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn densities_stay_nonnegative_and_ledger_is_nonnegative(
        lambda in 0.6..0.95_f64,
        c_hat in 0.1..2.0_f64,
        sigma in 0.3..0.9_f64,
        amp in 0.0..2.0_f64,
        v0 in 0.0..1.0_f64,
    ) {
        let g = StructuredGrid::new(&GridSpec::unit_square(8, 8)).unwrap();
        let p = params(lambda, ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap(), c_hat, sigma);
        let table = PotentialTable::new(&p.poly, 1e4).unwrap();
        let cfg = StepperConfig::default();
        let u0 = ScalarField::from_fn(&g, |x, y| amp * (-((x - 0.5).powi(2) + (y - 0.3).powi(2)) / 0.02).exp());
        let mut s = SimulationState::new(u0, ScalarField::constant(&g, v0), lambda);
        let mut ledger = EnergyLedger::default();
        for _ in 0..4 {
            let f = evaluate_functionals(&g, &p, &table, &s).unwrap();
            ledger.push(s.t, &f, lambda, 1.0, 0);
            s = coupled_step(&g, &s, &p, &cfg, 0.01, None).unwrap().state;
            prop_assert!(s.u.min() >= -1e-12 && s.v.min() >= -1e-12);
        }
        for r in &ledger.rows {
            for q in [r.int_u_alpha, r.int_v_sq, r.int_grad_u_weighted, r.int_grad_v_sq, r.v, r.lambda, r.v_bound] {
                prop_assert!(q >= 0.0);
            }
        }
    }

    #[test]
    fn decoupled_active_density_ignores_the_passive_one(
        amp in 0.1..1.0_f64,
        va in prop::collection::vec(0.0..2.0_f64, 2),
        vb in prop::collection::vec(0.0..2.0_f64, 2),
    ) {
        let g = StructuredGrid::new(&GridSpec::unit_square(6, 6)).unwrap();
        let p = params(0.8, ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap(), 0.0, 0.5);
        let cfg = StepperConfig::default();
        let u0 = ScalarField::from_fn(&g, |x, y| 1.0 + amp * x * y);
        let mut a = SimulationState::new(u0.clone(), ScalarField::from_fn(&g, |x, _| va[0] + va[1] * x), 0.8);
        let mut b = SimulationState::new(u0, ScalarField::from_fn(&g, |_, y| vb[0] + vb[1] * y), 0.8);
        for _ in 0..3 {
            let oa = coupled_step(&g, &a, &p, &cfg, 0.02, None).unwrap();
            let ob = coupled_step(&g, &b, &p, &cfg, 0.02, None).unwrap();
            prop_assert_eq!(oa.iterations, 1);
            prop_assert_eq!(&oa.state.u, &ob.state.u);
            prop_assert_eq!(&oa.state.w, &ob.state.w);
            a = oa.state;
            b = ob.state;
        }
    }
}
