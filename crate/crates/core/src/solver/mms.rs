//! Manufactured solutions and convergence ladders.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{run, Forcing, ModelParameters, SimulationState, StepperConfig};
use crate::error::{Error, ValidationError};
use crate::grid::{BoundaryTag, GridSpec, ScalarField, StructuredGrid};

/// `mean + amplitude·e^{−decay·t}·cos(kx·πx/Lx)·cos(ky·πy/Ly)`.
///
/// Integer wave numbers give zero normal derivative on every side of the
/// rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedField {
    #[serde(default)]
    pub mean: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub decay: f64,
    #[serde(default)]
    pub kx: f64,
    #[serde(default)]
    pub ky: f64,
}

/// Value and derivatives of a field at one point.
#[derive(Debug, Clone, Copy)]
struct Jet {
    value: f64,
    dt: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

impl ManufacturedField {
    pub fn constant(value: f64) -> Self {
        Self {
            mean: value,
            amplitude: 0.0,
            decay: 0.0,
            kx: 0.0,
            ky: 0.0,
        }
    }

    pub fn value(&self, x: f64, y: f64, t: f64, lx: f64, ly: f64) -> f64 {
        self.jet(x, y, t, lx, ly).value
    }

    fn jet(&self, x: f64, y: f64, t: f64, lx: f64, ly: f64) -> Jet {
        let (px, py) = (self.kx * PI / lx, self.ky * PI / ly);
        let (sx, cx) = (px * x).sin_cos();
        let (sy, cy) = (py * y).sin_cos();
        let e = self.amplitude * (-self.decay * t).exp();
        Jet {
            value: self.mean + e * cx * cy,
            dt: -self.decay * e * cx * cy,
            grad: [-e * px * sx * cy, -e * py * cx * sy],
            hess: [
                [-e * px * px * cx * cy, e * px * py * sx * sy],
                [e * px * py * sx * sy, -e * py * py * cx * cy],
            ],
        }
    }

    /// Lower bound of the field over all space and `t >= 0`.
    pub fn lower_bound(&self) -> f64 {
        self.mean - self.amplitude.abs()
    }
}

/// Exact pair `(u*, v*)`; as a [`Forcing`] it supplies the sources that make
/// the pair solve the forced system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manufactured {
    pub u: ManufacturedField,
    pub v: ManufacturedField,
}

/// A manufactured pair bound to model parameters.
pub struct ManufacturedForcing<'a> {
    pub exact: &'a Manufactured,
    pub params: &'a ModelParameters,
}

impl Manufactured {
    /// Rejects fields that touch the degenerate set `u = 0` when `λ < 1`.
    pub fn validate(&self, params: &ModelParameters) -> Result<(), ValidationError> {
        let all = [self.u, self.v];
        if all.iter().any(|f| {
            ![f.mean, f.amplitude, f.decay, f.kx, f.ky]
                .iter()
                .all(|x| x.is_finite())
        }) {
            return Err(ValidationError::new("manufactured solution", "parameters must be finite"));
        }
        if params.lambda < 1.0 && (self.u.lower_bound() <= 0.0 || self.v.lower_bound() < 0.0) {
            return Err(ValidationError::new(
                "manufactured solution",
                "u* must stay strictly positive and v* nonnegative",
            ));
        }
        Ok(())
    }

    pub fn sample(&self, grid: &StructuredGrid, t: f64) -> (ScalarField, ScalarField) {
        let (lx, ly) = (grid.lx(), grid.ly());
        (
            ScalarField::from_fn(grid, |x, y| self.u.value(x, y, t, lx, ly)),
            ScalarField::from_fn(grid, |x, y| self.v.value(x, y, t, lx, ly)),
        )
    }
}

impl ManufacturedForcing<'_> {
    fn u_sources(&self, x: f64, y: f64, t: f64, lx: f64, ly: f64) -> (f64, f64) {
        let p = self.params;
        let u = self.exact.u.jet(x, y, t, lx, ly);
        let v = self.exact.v.jet(x, y, t, lx, ly);
        let [ux, uy] = u.grad;
        let xi = ux.hypot(uy);
        let k1 = p.poly.eval_k1(xi).unwrap_or(f64::NAN);
        let lap_u = u.hess[0][0] + u.hess[1][1];
        let mut div = k1 * lap_u;
        if xi > 0.0 {
            let dk1 = p.poly.eval_k1_derivative(xi).unwrap_or(f64::NAN);
            let h = &u.hess;
            let quad = ux * ux * h[0][0] + 2.0 * ux * uy * h[0][1] + uy * uy * h[1][1];
            div += dk1 * quad / xi;
        }
        let time_u = if p.lambda == 1.0 {
            u.dt
        } else {
            p.lambda * u.value.powf(p.lambda - 1.0) * u.dt
        };
        let b = p.coupling.eval_b(u.value - v.value);
        let s_u = time_u - div + b;
        let s_v = v.dt - p.k2 * (v.hess[0][0] + v.hess[1][1]) - b;
        (s_u, s_v)
    }
}

impl Forcing for ManufacturedForcing<'_> {
    fn cell_sources(&self, grid: &StructuredGrid, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (lx, ly) = (grid.lx(), grid.ly());
        (0..grid.cell_count())
            .map(|c| {
                let [x, y] = grid.cell_center(c);
                self.u_sources(x, y, t, lx, ly)
            })
            .unzip()
    }

    /// Outflow correction `q = −K₁∇u*·n − φu*^λ`.
    fn boundary_flux(&self, grid: &StructuredGrid, t: f64) -> Vec<f64> {
        let (lx, ly) = (grid.lx(), grid.ly());
        let p = self.params;
        let factor = grid.phi_schedule().factor(t);
        grid.boundary_faces()
            .iter()
            .map(|f| {
                if f.tag != BoundaryTag::Robin {
                    return 0.0;
                }
                let [x, y] = f.center;
                let u = self.exact.u.jet(x, y, t, lx, ly);
                let n = f.side.outward_normal();
                let xi = u.grad[0].hypot(u.grad[1]);
                let k1 = p.poly.eval_k1(xi).unwrap_or(f64::NAN);
                let exact_flux = -k1 * (u.grad[0] * n[0] + u.grad[1] * n[1]);
                exact_flux - f.phi * factor * super::pow_signed(u.value, p.lambda)
            })
            .collect()
    }
}

/// Which discretization parameter a ladder refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    Space,
    Time,
}

/// One rung of a ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderLevel {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: LadderLevel,
    /// Mesh width in x.
    pub h: f64,
    pub steps: usize,
    /// L² errors at the final time.
    pub err_u: f64,
    pub err_v: f64,
    pub max_coupling_iters: usize,
    /// Deepest step halving needed.
    pub max_halvings: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub refinement: Refinement,
    pub levels: Vec<LevelResult>,
}

impl ConvergenceReport {
    fn orders(&self, err: impl Fn(&LevelResult) -> f64) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| {
                let scale = match self.refinement {
                    Refinement::Space => w[0].h / w[1].h,
                    Refinement::Time => w[0].level.dt / w[1].level.dt,
                };
                (err(&w[0]) / err(&w[1])).ln() / scale.ln()
            })
            .collect()
    }

    /// Observed orders between consecutive levels for `u`.
    pub fn orders_u(&self) -> Vec<f64> {
        self.orders(|l| l.err_u)
    }

    pub fn orders_v(&self) -> Vec<f64> {
        self.orders(|l| l.err_v)
    }

    pub fn monotone_u(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].err_u < w[0].err_u)
    }

    pub fn monotone_v(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].err_v < w[0].err_v)
    }
}

impl std::fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ou = self.orders_u();
        let ov = self.orders_v();
        writeln!(f, "{:>6} {:>6} {:>12} {:>14} {:>8} {:>14} {:>8}", "nx", "ny", "dt", "err_u", "ord_u", "err_v", "ord_v")?;
        for (i, l) in self.levels.iter().enumerate() {
            let fmt_order = |o: &[f64]| match i.checked_sub(1).and_then(|j| o.get(j)) {
                Some(x) => format!("{x:8.3}"),
                None => format!("{:>8}", "-"),
            };
            writeln!(
                f,
                "{:>6} {:>6} {:>12.4e} {:>14.6e} {} {:>14.6e} {}",
                l.level.nx,
                l.level.ny,
                l.level.dt,
                l.err_u,
                fmt_order(&ou),
                l.err_v,
                fmt_order(&ov)
            )?;
        }
        Ok(())
    }
}

/// Runs one level from the exact initial data to `params.t_final` and
/// measures the L² errors against the exact solution there.
pub fn run_level(
    params: &ModelParameters,
    base: &GridSpec,
    cfg: &StepperConfig,
    exact: &Manufactured,
    level: LadderLevel,
) -> Result<LevelResult, Error> {
    exact.validate(params)?;
    let spec = GridSpec {
        nx: level.nx,
        ny: level.ny,
        ..base.clone()
    };
    let grid = StructuredGrid::new(&spec)?;
    let cfg = StepperConfig {
        dt: level.dt,
        ..cfg.clone()
    };
    let (u0, v0) = exact.sample(&grid, 0.0);
    let state = SimulationState::new(u0, v0, params.lambda);
    let forcing = ManufacturedForcing { exact, params };
    let bounds = params.poly.estimate_bounds(1e2, 32)?;
    let out = run(&grid, params, &cfg, &bounds, state, Some(&forcing), |_, _, _| Ok(()))?;
    let (ue, ve) = exact.sample(&grid, out.final_state.t);
    let l2 = |a: &ScalarField, b: &ScalarField| {
        let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
        (s * grid.cell_area()).sqrt()
    };
    Ok(LevelResult {
        level,
        h: grid.dx(),
        steps: out.steps.len(),
        err_u: l2(&out.final_state.u, &ue),
        err_v: l2(&out.final_state.v, &ve),
        max_coupling_iters: out.steps.iter().map(|s| s.coupling_iters).max().unwrap_or(0),
        max_halvings: out.steps.iter().map(|s| s.halvings).max().unwrap_or(0),
    })
}

/// Runs every level of a ladder concurrently, one thread per level.
pub fn convergence_study(
    params: &ModelParameters,
    base: &GridSpec,
    cfg: &StepperConfig,
    exact: &Manufactured,
    levels: &[LadderLevel],
    refinement: Refinement,
) -> Result<ConvergenceReport, Error> {
    if levels.len() < 2 {
        return Err(Error::Config("a ladder needs at least two levels".into()));
    }
    let results: Vec<Result<LevelResult, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&l| s.spawn(move || run_level(params, base, cfg, exact, l)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ladder level panicked"))
            .collect()
    });
    Ok(ConvergenceReport {
        refinement,
        levels: results.into_iter().collect::<Result<_, _>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{CouplingLaw, ForchheimerPolynomial};

    #[test]
    fn jet_matches_finite_differences() {
        let f = ManufacturedField {
            mean: 2.0,
            amplitude: 0.5,
            decay: 1.5,
            kx: 1.0,
            ky: 2.0,
        };
        let (x, y, t, h) = (0.3, 0.7, 0.2, 1e-5);
        let j = f.jet(x, y, t, 1.0, 1.0);
        let v = |x, y, t| f.value(x, y, t, 1.0, 1.0);
        assert!((j.dt - (v(x, y, t + h) - v(x, y, t - h)) / (2.0 * h)).abs() < 1e-8);
        assert!((j.grad[0] - (v(x + h, y, t) - v(x - h, y, t)) / (2.0 * h)).abs() < 1e-8);
        assert!((j.grad[1] - (v(x, y + h, t) - v(x, y - h, t)) / (2.0 * h)).abs() < 1e-8);
        let dxy = (v(x + h, y + h, t) - v(x + h, y - h, t) - v(x - h, y + h, t) + v(x - h, y - h, t)) / (4.0 * h * h);
        assert!((j.hess[0][1] - dxy).abs() < 1e-4);
    }

    #[test]
    fn constant_pair_has_zero_error() {
        let poly = ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        let p = ModelParameters::new(0.8, 1.0, poly, CouplingLaw::new(1.0, 0.5).unwrap(), None, 0.05).unwrap();
        let exact = Manufactured {
            u: ManufacturedField::constant(1.5),
            v: ManufacturedField::constant(0.5),
        };
        let r = run_level(
            &p,
            &GridSpec::unit_square(8, 8),
            &StepperConfig::default(),
            &exact,
            LadderLevel { nx: 8, ny: 8, dt: 0.01 },
        )
        .unwrap();
        assert!(r.err_u < 1e-9, "{}", r.err_u);
        assert!(r.err_v < 1e-9, "{}", r.err_v);
    }

    #[test]
    fn rejects_nonpositive_u() {
        let poly = ForchheimerPolynomial::constant(1.0).unwrap();
        let p = ModelParameters::new(0.8, 1.0, poly, CouplingLaw::disabled(), None, 0.1).unwrap();
        let exact = Manufactured {
            u: ManufacturedField {
                mean: 0.5,
                amplitude: 1.0,
                decay: 0.0,
                kx: 1.0,
                ky: 0.0,
            },
            v: ManufacturedField::constant(0.0),
        };
        assert!(exact.validate(&p).is_err());
    }
}
