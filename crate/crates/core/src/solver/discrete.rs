//! Finite-volume residuals and linearizations of one implicit Euler step.
//!
//! Every cell equation is multiplied by the cell area, which makes all
//! assembled matrices symmetric. Fluxes through interior faces are computed
//! once per face and added to the two adjacent cells with opposite signs, so
//! they cancel exactly in global sums.

use super::{Forcing, ModelParameters, StepperConfig};
use crate::constitutive::pow_nonneg;
use crate::error::StepError;
use crate::grid::{BoundaryTag, FaceVectors, ScalarField, StructuredGrid};
use crate::linalg::{CsrMatrix, LinalgError, RowBuilder};

/// `sign(x)·|x|^p`.
#[inline]
pub fn pow_signed(x: f64, p: f64) -> f64 {
    if x >= 0.0 {
        pow_nonneg(x, p)
    } else {
        -pow_nonneg(-x, p)
    }
}

/// Face gradient vectors of `u` at time `t`, with the outflow condition
/// supplying the normal derivative on exit faces.
///
/// On an exit face with a purely normal gradient `−K₁(ξ)ξ = −φu^λ`, and since
/// `K₁(ξ)ξ = G⁻¹(ξ)` the normal derivative is `−G(φu^λ)`.
pub fn face_gradients(
    grid: &StructuredGrid,
    params: &ModelParameters,
    u: &ScalarField,
    t: f64,
) -> FaceVectors {
    let factor = grid.phi_schedule().factor(t);
    grid.face_gradients(u, |f, uc| {
        if f.tag == BoundaryTag::Robin && f.phi > 0.0 {
            let flux = f.phi * factor * pow_signed(uc, params.lambda);
            -flux.signum() * params.poly.eval_big_g(flux.abs()).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    })
}

/// Fixed data of one time step.
pub(crate) struct StepContext<'a> {
    pub grid: &'a StructuredGrid,
    pub params: &'a ModelParameters,
    pub cfg: &'a StepperConfig,
    pub dt: f64,
    pub t_new: f64,
    pub w_old: &'a [f64],
    pub v_old: &'a [f64],
    /// Per cell: `Σ |face|·φ_face(t_new)` over its exit faces.
    pub robin_lp: Vec<f64>,
    /// Per cell: prescribed extra outflow `Σ |face|·q_face` over exit faces.
    pub robin_q: Vec<f64>,
    pub s_u: Option<Vec<f64>>,
    pub s_v: Option<Vec<f64>>,
}

/// Interior-face coefficients `K·|face|/distance`; zero on boundary faces.
pub(crate) struct Conductances {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl<'a> StepContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: &'a StructuredGrid,
        params: &'a ModelParameters,
        cfg: &'a StepperConfig,
        forcing: Option<&dyn Forcing>,
        dt: f64,
        t_new: f64,
        w_old: &'a [f64],
        v_old: &'a [f64],
    ) -> Self {
        let n = grid.cell_count();
        let factor = grid.phi_schedule().factor(t_new);
        let mut robin_lp = vec![0.0; n];
        let mut robin_q = vec![0.0; n];
        let q = forcing.map(|f| f.boundary_flux(grid, t_new));
        for (k, f) in grid.boundary_faces().iter().enumerate() {
            if f.tag == BoundaryTag::Robin {
                robin_lp[f.cell] += f.length * f.phi * factor;
                if let Some(q) = &q {
                    robin_q[f.cell] += f.length * q[k];
                }
            }
        }
        let (s_u, s_v) = match forcing {
            Some(f) => {
                let (su, sv) = f.cell_sources(grid, t_new);
                (Some(su), Some(sv))
            }
            None => (None, None),
        };
        Self {
            grid,
            params,
            cfg,
            dt,
            t_new,
            w_old,
            v_old,
            robin_lp,
            robin_q,
            s_u,
            s_v,
        }
    }

    fn area(&self) -> f64 {
        self.grid.cell_area()
    }

    /// `K₁(|∇u|)` on interior faces times the face transmissibility.
    pub fn conductances(&self, u: &[f64]) -> Result<Conductances, StepError> {
        let g = self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let tx = g.dy() / g.dx();
        let ty = g.dx() / g.dy();
        let poly = &self.params.poly;
        let mut x = vec![0.0; g.x_face_count()];
        let mut y = vec![0.0; g.y_face_count()];
        if poly.is_constant() {
            let k = 1.0 / poly.a0();
            for j in 0..ny {
                for i in 1..nx {
                    x[j * (nx + 1) + i] = k * tx;
                }
            }
            for j in 1..ny {
                for i in 0..nx {
                    y[j * nx + i] = k * ty;
                }
            }
            return Ok(Conductances { x, y });
        }
        let field = ScalarField::from_values(g, u.to_vec());
        let grads = face_gradients(g, self.params, &field, self.t_new).magnitude();
        for j in 0..ny {
            for i in 1..nx {
                let f = j * (nx + 1) + i;
                x[f] = poly.eval_k1(grads.x[f])? * tx;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let f = j * nx + i;
                y[f] = poly.eval_k1(grads.y[f])? * ty;
            }
        }
        Ok(Conductances { x, y })
    }

    /// Constant-coefficient conductances `K₂·|face|/distance`.
    pub fn v_conductances(&self) -> Conductances {
        let g = self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let kx = self.params.k2 * g.dy() / g.dx();
        let ky = self.params.k2 * g.dx() / g.dy();
        let mut x = vec![0.0; g.x_face_count()];
        let mut y = vec![0.0; g.y_face_count()];
        for j in 0..ny {
            for i in 1..nx {
                x[j * (nx + 1) + i] = kx;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                y[j * nx + i] = ky;
            }
        }
        Conductances { x, y }
    }

    /// Net diffusive outflow of each cell through its interior faces.
    fn interior_outflow(&self, c: &Conductances, u: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let mut out = vec![0.0; g.cell_count()];
        for j in 0..ny {
            for i in 1..nx {
                let (l, r) = (j * nx + i - 1, j * nx + i);
                let f = c.x[j * (nx + 1) + i] * (u[l] - u[r]);
                out[l] += f;
                out[r] -= f;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let (b, t) = ((j - 1) * nx + i, j * nx + i);
                let f = c.y[j * nx + i] * (u[b] - u[t]);
                out[b] += f;
                out[t] -= f;
            }
        }
        out
    }

    /// Total outflow of `u` from each cell, including exits.
    pub fn u_outflow(&self, c: &Conductances, u: &[f64]) -> Vec<f64> {
        let lambda = self.params.lambda;
        let mut out = self.interior_outflow(c, u);
        for (k, o) in out.iter_mut().enumerate() {
            if self.robin_lp[k] != 0.0 || self.robin_q[k] != 0.0 {
                *o += self.robin_lp[k] * pow_signed(u[k], lambda) + self.robin_q[k];
            }
        }
        out
    }

    pub fn v_outflow(&self, c: &Conductances, v: &[f64]) -> Vec<f64> {
        self.interior_outflow(c, v)
    }

    /// Area-scaled residual of the `u` equation.
    pub fn u_residual(&self, c: &Conductances, u: &[f64], v: &[f64]) -> Vec<f64> {
        let a = self.area();
        let lambda = self.params.lambda;
        let b = &self.params.coupling;
        let mut r = self.u_outflow(c, u);
        for k in 0..r.len() {
            r[k] += a * (pow_signed(u[k], lambda) - self.w_old[k]) / self.dt + a * b.eval_b(u[k] - v[k]);
            if let Some(s) = &self.s_u {
                r[k] -= a * s[k];
            }
        }
        r
    }

    /// Area-scaled residual of the `v` equation.
    pub fn v_residual(&self, c: &Conductances, u: &[f64], v: &[f64]) -> Vec<f64> {
        let a = self.area();
        let b = &self.params.coupling;
        let mut r = self.v_outflow(c, v);
        for k in 0..r.len() {
            r[k] += a * (v[k] - self.v_old[k]) / self.dt - a * b.eval_b(u[k] - v[k]);
            if let Some(s) = &self.s_v {
                r[k] -= a * s[k];
            }
        }
        r
    }

    /// Frozen time factor `max(|u|, floor)^{λ−1}` per cell.
    pub fn frozen_factor(&self, u: &[f64]) -> Vec<f64> {
        let lambda = self.params.lambda;
        let floor = self.cfg.eps_floor;
        u.iter()
            .map(|&x| pow_nonneg(x.abs().max(floor), lambda - 1.0))
            .collect()
    }

    /// Iteration slope of `b` at `u − v` per cell.
    pub fn coupling_slope(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let b = &self.params.coupling;
        let floor = self.cfg.z_floor;
        u.iter().zip(v).map(|(x, y)| b.iteration_slope(x - y, floor)).collect()
    }

    /// Linearized `u` operator; `beta` adds the implicit coupling slope.
    pub fn u_matrix(&self, c: &Conductances, m: &[f64], beta: Option<&[f64]>) -> Result<CsrMatrix, LinalgError> {
        let a = self.area();
        let n = self.grid.cell_count();
        let mut rb = RowBuilder::new(n, 5 * n);
        for k in 0..n {
            let mut diag = a * m[k] / self.dt + self.robin_lp[k] * m[k];
            if let Some(beta) = beta {
                diag += a * beta[k];
            }
            self.add_stencil(&mut rb, c, k, 1, 0, diag);
            rb.finish_row()?;
        }
        rb.build()
    }

    /// Linearized `v` operator; `beta` adds the implicit coupling slope.
    pub fn v_matrix(&self, c: &Conductances, beta: Option<&[f64]>) -> Result<CsrMatrix, LinalgError> {
        let a = self.area();
        let n = self.grid.cell_count();
        let mut rb = RowBuilder::new(n, 5 * n);
        for k in 0..n {
            let mut diag = a / self.dt;
            if let Some(beta) = beta {
                diag += a * beta[k];
            }
            self.add_stencil(&mut rb, c, k, 1, 0, diag);
            rb.finish_row()?;
        }
        rb.build()
    }

    /// Joint linearization with unknowns interleaved as `(u₀, v₀, u₁, v₁, …)`.
    pub fn block_matrix(
        &self,
        cu: &Conductances,
        cv: &Conductances,
        m: &[f64],
        beta: &[f64],
    ) -> Result<CsrMatrix, LinalgError> {
        let a = self.area();
        let n = self.grid.cell_count();
        let mut rb = RowBuilder::new(2 * n, 12 * n);
        for k in 0..n {
            let ab = a * beta[k];
            let diag_u = a * m[k] / self.dt + self.robin_lp[k] * m[k] + ab;
            self.add_stencil(&mut rb, cu, k, 2, 0, diag_u);
            rb.add(2 * k + 1, -ab);
            rb.finish_row()?;
            self.add_stencil(&mut rb, cv, k, 2, 1, a / self.dt + ab);
            rb.add(2 * k, -ab);
            rb.finish_row()?;
        }
        rb.build()
    }

    /// Adds the diffusion stencil of cell `k` to the current row, with
    /// unknown index `stride·cell + offset`.
    fn add_stencil(&self, rb: &mut RowBuilder, c: &Conductances, k: usize, stride: usize, offset: usize, diag: f64) {
        let g = self.grid;
        let nx = g.nx();
        let (i, j) = (k % nx, k / nx);
        let mut d = diag;
        let faces = [
            (c.x[j * (nx + 1) + i], k.wrapping_sub(1)),
            (c.x[j * (nx + 1) + i + 1], k + 1),
            (c.y[j * nx + i], k.wrapping_sub(nx)),
            (c.y[(j + 1) * nx + i], k + nx),
        ];
        for (coef, nb) in faces {
            if coef != 0.0 {
                d += coef;
                rb.add(stride * nb + offset, -coef);
            }
        }
        rb.add(stride * k + offset, d);
    }

    /// Applies the conservative update at the converged iterate `(u*, v*)`:
    /// `w ← w_old + Δt·(sources − outflow − b)`, `v ← v_old + Δt·(… + b)`,
    /// then recovers `u = w^{1/λ}`. Returns `(u, w, v)`.
    pub fn finalize(
        &self,
        cu: &Conductances,
        cv: &Conductances,
        u: &[f64],
        v: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), StepError> {
        let a = self.area();
        let lambda = self.params.lambda;
        let clamp = clamps_negative(lambda);
        let b = &self.params.coupling;
        let nu = self.u_outflow(cu, u);
        let nv = self.v_outflow(cv, v);
        let n = u.len();
        let mut un = Vec::with_capacity(n);
        let mut wn = Vec::with_capacity(n);
        let mut vn = Vec::with_capacity(n);
        for k in 0..n {
            let bk = b.eval_b(u[k] - v[k]);
            let mut dw = -nu[k] / a - bk;
            let mut dv = -nv[k] / a + bk;
            if let Some(s) = &self.s_u {
                dw += s[k];
            }
            if let Some(s) = &self.s_v {
                dv += s[k];
            }
            let mut w = self.w_old[k] + self.dt * dw;
            let mut vk = self.v_old[k] + self.dt * dv;
            if clamp {
                w = w.max(0.0);
                vk = vk.max(0.0);
            }
            let uu = if lambda == 1.0 { w } else { pow_nonneg(w, 1.0 / lambda) };
            un.push(uu);
            wn.push(pow_signed(uu, lambda));
            vn.push(vk);
        }
        if un.iter().chain(&vn).any(|x| !x.is_finite()) {
            return Err(StepError::NonFinite);
        }
        Ok((un, wn, vn))
    }
}

/// Negative densities are cut to zero only when `u^λ` needs `u >= 0`; the
/// linear case `λ = 1` keeps signed states.
pub(crate) fn clamps_negative(lambda: f64) -> bool {
    lambda < 1.0
}

pub(crate) fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}
