use super::discrete::{max_abs, Conductances, StepContext};
use super::{CouplingMode, Forcing, ModelParameters, SimulationState, StepperConfig};
use crate::error::StepError;
use crate::grid::{ScalarField, StructuredGrid};
use crate::linalg::{solve, CsrMatrix, Preconditioner, SolveOptions};

/// Result of the inner iteration for the active density.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Outcome {
    pub u: ScalarField,
    pub iterations: usize,
}

/// Result of one coupled time step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOutcome {
    pub state: SimulationState,
    /// Number of coupling iterations.
    pub iterations: usize,
    /// Max-norm update of every coupling iteration.
    pub trace: Vec<f64>,
}

fn linear_solve(
    a: &CsrMatrix,
    rhs: &[f64],
    cfg: &StepperConfig,
    preconditioner: Preconditioner,
) -> Result<Vec<f64>, StepError> {
    let opts = SolveOptions {
        rtol: cfg.linear_rtol,
        max_iter: cfg.linear_max_iter,
        symmetric: true,
        preconditioner,
    };
    Ok(solve(a, rhs, None, &opts)?.x)
}

fn neg(mut r: Vec<f64>) -> Vec<f64> {
    r.iter_mut().for_each(|x| *x = -*x);
    r
}

/// Picard iteration for `u` with `v` frozen: lagged conductances, frozen
/// time factor and secant slope of `b`, each iterate solved in update form.
fn p1_iterate(ctx: &StepContext, u0: &[f64], v: &[f64]) -> Result<(Vec<f64>, usize), StepError> {
    let cfg = ctx.cfg;
    let active = ctx.params.coupling.is_active();
    // Backward Euler for the linear heat equation needs a single solve.
    let linear = ctx.params.lambda == 1.0 && ctx.params.poly.is_constant() && !active;
    let mut u = u0.to_vec();
    let mut last = f64::INFINITY;
    for it in 1..=cfg.max_picard {
        let c = ctx.conductances(&u)?;
        let r = ctx.u_residual(&c, &u, v);
        let m = ctx.frozen_factor(&u);
        let beta = active.then(|| ctx.coupling_slope(&u, v));
        let a = ctx.u_matrix(&c, &m, beta.as_deref())?;
        let du = linear_solve(&a, &neg(r), cfg, Preconditioner::Jacobi)?;
        for (x, d) in u.iter_mut().zip(&du) {
            *x += d;
        }
        last = max_abs(&du);
        if !last.is_finite() {
            return Err(StepError::NonFinite);
        }
        if last <= cfg.tol_p || linear {
            return Ok((u, it));
        }
    }
    Err(StepError::Picard {
        iterations: cfg.max_picard,
        update: last,
    })
}

/// One linear solve for `v` with `u` frozen, linearizing `b` by its secant
/// slope at `(u, v_guess)`.
fn p2_solve(ctx: &StepContext, cv: &Conductances, u: &[f64], v_guess: &[f64]) -> Result<Vec<f64>, StepError> {
    let r = ctx.v_residual(cv, u, v_guess);
    let beta = ctx
        .params
        .coupling
        .is_active()
        .then(|| ctx.coupling_slope(u, v_guess));
    let a = ctx.v_matrix(cv, beta.as_deref())?;
    let dv = linear_solve(&a, &neg(r), ctx.cfg, Preconditioner::Jacobi)?;
    Ok(v_guess.iter().zip(&dv).map(|(x, d)| x + d).collect())
}

fn context<'a>(
    grid: &'a StructuredGrid,
    params: &'a ModelParameters,
    cfg: &'a StepperConfig,
    forcing: Option<&dyn Forcing>,
    state: &'a SimulationState,
    dt: f64,
) -> StepContext<'a> {
    StepContext::new(
        grid,
        params,
        cfg,
        forcing,
        dt,
        state.t + dt,
        &state.w.values,
        &state.v.values,
    )
}

/// Implicit Euler step of the active density with `v` held fixed.
///
/// Returns the converged Picard iterate; the time level is not advanced.
pub fn step_p1(
    grid: &StructuredGrid,
    state: &SimulationState,
    v_frozen: &ScalarField,
    params: &ModelParameters,
    cfg: &StepperConfig,
    dt: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<P1Outcome, StepError> {
    let ctx = context(grid, params, cfg, forcing, state, dt);
    let (u, iterations) = p1_iterate(&ctx, &state.u.values, &v_frozen.values)?;
    Ok(P1Outcome {
        u: ScalarField::from_values(grid, u),
        iterations,
    })
}

/// Implicit Euler step of the passive density with `u` held fixed.
pub fn step_p2(
    grid: &StructuredGrid,
    state: &SimulationState,
    u_frozen: &ScalarField,
    params: &ModelParameters,
    cfg: &StepperConfig,
    dt: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<ScalarField, StepError> {
    let ctx = context(grid, params, cfg, forcing, state, dt);
    let cv = ctx.v_conductances();
    let v = p2_solve(&ctx, &cv, &u_frozen.values, &state.v.values)?;
    Ok(ScalarField::from_values(grid, v))
}

/// Advances `state` by `dt`, iterating the two equations to a joint fixed
/// point and then applying the conservative update.
pub fn coupled_step(
    grid: &StructuredGrid,
    state: &SimulationState,
    params: &ModelParameters,
    cfg: &StepperConfig,
    dt: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<CoupledOutcome, StepError> {
    let ctx = context(grid, params, cfg, forcing, state, dt);
    let cv = ctx.v_conductances();
    let (u, v, iterations, trace) = if !params.coupling.is_active() {
        let (u, _) = p1_iterate(&ctx, &state.u.values, &state.v.values)?;
        let v = p2_solve(&ctx, &cv, &u, &state.v.values)?;
        let upd = max_abs(&diff(&u, &state.u.values)).max(max_abs(&diff(&v, &state.v.values)));
        (u, v, 1, vec![upd])
    } else {
        match cfg.coupling {
            CouplingMode::Monolithic => monolithic(&ctx, &cv, state)?,
            CouplingMode::Sequential => sequential(&ctx, &cv, state)?,
        }
    };
    let cu = ctx.conductances(&u)?;
    let (u, w, v) = ctx.finalize(&cu, &cv, &u, &v)?;
    Ok(CoupledOutcome {
        state: SimulationState {
            t: state.t + dt,
            u: ScalarField::from_values(grid, u),
            w: ScalarField::from_values(grid, w),
            v: ScalarField::from_values(grid, v),
        },
        iterations,
        trace,
    })
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

type Iterates = (Vec<f64>, Vec<f64>, usize, Vec<f64>);

fn relaxation(cfg: &StepperConfig, it: usize) -> f64 {
    if it == 1 {
        1.0
    } else {
        cfg.omega
    }
}

fn monolithic(ctx: &StepContext, cv: &Conductances, state: &SimulationState) -> Result<Iterates, StepError> {
    let cfg = ctx.cfg;
    let n = ctx.grid.cell_count();
    let mut u = state.u.values.clone();
    let mut v = state.v.values.clone();
    let mut trace = Vec::new();
    for it in 1..=cfg.max_coupling {
        let cu = ctx.conductances(&u)?;
        let ru = ctx.u_residual(&cu, &u, &v);
        let rv = ctx.v_residual(cv, &u, &v);
        let m = ctx.frozen_factor(&u);
        let beta = ctx.coupling_slope(&u, &v);
        let a = ctx.block_matrix(&cu, cv, &m, &beta)?;
        let mut rhs = Vec::with_capacity(2 * n);
        for k in 0..n {
            rhs.push(-ru[k]);
            rhs.push(-rv[k]);
        }
        let d = linear_solve(&a, &rhs, cfg, Preconditioner::BlockJacobi(2))?;
        let om = relaxation(cfg, it);
        let mut upd = 0.0_f64;
        for k in 0..n {
            let (du, dv) = (om * d[2 * k], om * d[2 * k + 1]);
            u[k] += du;
            v[k] += dv;
            upd = upd.max(du.abs()).max(dv.abs());
        }
        if !upd.is_finite() {
            return Err(StepError::NonFinite);
        }
        trace.push(upd);
        log::trace!("coupling iteration {it}: update {upd:e}");
        if upd <= cfg.tol_c {
            return Ok((u, v, it, trace));
        }
    }
    Err(StepError::Coupling {
        iterations: cfg.max_coupling,
        trace,
    })
}

fn sequential(ctx: &StepContext, cv: &Conductances, state: &SimulationState) -> Result<Iterates, StepError> {
    let cfg = ctx.cfg;
    let mut u = state.u.values.clone();
    let mut v = state.v.values.clone();
    let mut trace = Vec::new();
    for it in 1..=cfg.max_coupling {
        let (un, _) = p1_iterate(ctx, &u, &v)?;
        let vn = p2_solve(ctx, cv, &un, &v)?;
        let om = relaxation(cfg, it);
        let mut upd = 0.0_f64;
        for k in 0..u.len() {
            let du = om * (un[k] - u[k]);
            let dv = om * (vn[k] - v[k]);
            u[k] += du;
            v[k] += dv;
            upd = upd.max(du.abs()).max(dv.abs());
        }
        if !upd.is_finite() {
            return Err(StepError::NonFinite);
        }
        trace.push(upd);
        if upd <= cfg.tol_c {
            return Ok((u, v, it, trace));
        }
    }
    Err(StepError::Coupling {
        iterations: cfg.max_coupling,
        trace,
    })
}
