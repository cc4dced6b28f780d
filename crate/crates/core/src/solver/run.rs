use super::step::coupled_step;
use super::{Forcing, ModelParameters, SimulationState, StepperConfig};
use crate::constitutive::{KBounds, PotentialTable};
use crate::energy::{compute_constants, evaluate_functionals, ConstantsLedger, EnergyLedger, LedgerRow};
use crate::error::{Error, StepError};
use crate::grid::StructuredGrid;

/// Largest gradient magnitude tabulated for `H`; larger values are still
/// handled, just more slowly.
const POTENTIAL_XI_MAX: f64 = 1e4;

/// Diagnostics of one accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Total coupling iterations over all sub-steps.
    pub coupling_iters: usize,
    /// Depth of step halving needed (0 when the full step succeeded).
    pub halvings: u32,
    /// Coupling update traces, one per sub-step.
    pub traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: SimulationState,
    pub ledger: EnergyLedger,
    pub constants: ConstantsLedger,
    pub steps: Vec<StepRecord>,
}

/// Integrates from `initial` to `params.t_final` with fixed steps of
/// `cfg.dt` (the last one shortened if needed), halving failed steps up to
/// `cfg.max_halvings` times.
///
/// `observer` sees the initial state and every accepted step together with
/// its ledger row; an observer error aborts the run.
#[allow(clippy::too_many_arguments)]
pub fn run<O>(
    grid: &StructuredGrid,
    params: &ModelParameters,
    cfg: &StepperConfig,
    bounds: &KBounds,
    initial: SimulationState,
    forcing: Option<&dyn Forcing>,
    mut observer: O,
) -> Result<RunSummary, Error>
where
    O: FnMut(&SimulationState, &LedgerRow, Option<&StepRecord>) -> Result<(), Error>,
{
    cfg.validate()?;
    if !initial.matches(grid) {
        return Err(Error::Config("initial state does not match the grid".into()));
    }
    let constants = compute_constants(params, bounds, grid.area());
    let potential = PotentialTable::new(&params.poly, POTENTIAL_XI_MAX)?;
    let mut ledger = EnergyLedger::default();
    let mut state = initial;
    let f = evaluate_functionals(grid, params, &potential, &state)?;
    ledger.push(state.t, &f, params.lambda, constants.c3, 0);
    observer(&state, ledger.rows.last().unwrap(), None)?;

    let t0 = state.t;
    let t_end = params.t_final;
    let n_steps = if t_end <= t0 {
        0
    } else {
        ((t_end - t0) / cfg.dt - 1e-9).ceil() as usize
    };
    let mut steps = Vec::with_capacity(n_steps);
    for k in 1..=n_steps {
        let t_target = if k == n_steps { t_end } else { t0 + k as f64 * cfg.dt };
        let dt = t_target - state.t;
        let mut traces = Vec::new();
        let (mut next, iters, halvings) = advance(grid, params, cfg, forcing, &state, dt, 0, &mut traces)
            .map_err(|source| Error::Step { t: state.t, source })?;
        next.t = t_target;
        let record = StepRecord {
            t: t_target,
            coupling_iters: iters,
            halvings,
            traces,
        };
        log::debug!("t = {t_target:.6}: {iters} coupling iterations, {halvings} halvings");
        let f = evaluate_functionals(grid, params, &potential, &next)?;
        ledger.push(next.t, &f, params.lambda, constants.c3, iters);
        observer(&next, ledger.rows.last().unwrap(), Some(&record))?;
        steps.push(record);
        state = next;
    }
    Ok(RunSummary {
        final_state: state,
        ledger,
        constants,
        steps,
    })
}

#[allow(clippy::too_many_arguments)]
fn advance(
    grid: &StructuredGrid,
    params: &ModelParameters,
    cfg: &StepperConfig,
    forcing: Option<&dyn Forcing>,
    state: &SimulationState,
    dt: f64,
    depth: u32,
    traces: &mut Vec<Vec<f64>>,
) -> Result<(SimulationState, usize, u32), StepError> {
    match coupled_step(grid, state, params, cfg, dt, forcing) {
        Ok(out) => {
            traces.push(out.trace);
            Ok((out.state, out.iterations, depth))
        }
        Err(e) if depth < cfg.max_halvings => {
            log::warn!("step of size {dt:e} at t = {} failed ({e}); halving", state.t);
            let (mid, i1, h1) = advance(grid, params, cfg, forcing, state, 0.5 * dt, depth + 1, traces)?;
            let (end, i2, h2) = advance(grid, params, cfg, forcing, &mid, 0.5 * dt, depth + 1, traces)?;
            Ok((end, i1 + i2, h1.max(h2)))
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{CouplingLaw, ForchheimerPolynomial};
    use crate::grid::{GridSpec, ScalarField};

    fn setup() -> (StructuredGrid, ModelParameters, KBounds) {
        let g = StructuredGrid::new(&GridSpec::unit_square(8, 8)).unwrap();
        let poly = ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        let b = poly.estimate_bounds(1e4, 200).unwrap();
        let p = ModelParameters::new(0.8, 1.0, poly, CouplingLaw::new(1.0, 0.5).unwrap(), None, 0.05).unwrap();
        (g, p, b)
    }

    #[test]
    fn zero_final_time_gives_single_row() {
        let (g, mut p, b) = setup();
        p.t_final = 0.0;
        let s = SimulationState::new(ScalarField::constant(&g, 1.0), ScalarField::zeros(&g), 0.8);
        let mut seen = 0;
        let out = run(&g, &p, &StepperConfig::default(), &b, s, None, |_, _, _| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(out.ledger.rows.len(), 1);
        assert_eq!(seen, 1);
    }

    #[test]
    fn zero_data_stays_zero() {
        let (g, p, b) = setup();
        let s = SimulationState::new(ScalarField::zeros(&g), ScalarField::zeros(&g), 0.8);
        let out = run(&g, &p, &StepperConfig::default(), &b, s, None, |_, _, _| Ok(())).unwrap();
        assert_eq!(out.ledger.rows.len(), 6);
        assert!(out.ledger.rows.iter().all(|r| r.v == 1.0));
        assert!(out.final_state.u.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn last_step_is_shortened_to_hit_final_time() {
        let (g, mut p, b) = setup();
        p.t_final = 0.025;
        let s = SimulationState::new(ScalarField::constant(&g, 1.0), ScalarField::constant(&g, 0.5), 0.8);
        let out = run(&g, &p, &StepperConfig::default(), &b, s, None, |_, _, _| Ok(())).unwrap();
        let ts: Vec<f64> = out.ledger.rows.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 4);
        assert_eq!(*ts.last().unwrap(), 0.025);
        assert!(out.ledger.well_formed());
    }

    #[test]
    fn failing_steps_are_halved() {
        let (g, p, b) = setup();
        let cfg = StepperConfig {
            max_coupling: 6,
            ..Default::default()
        };
        let s = SimulationState::new(
            ScalarField::from_fn(&g, |x, _| 2.0 * x),
            ScalarField::from_fn(&g, |_, y| y),
            0.8,
        );
        match run(&g, &p, &cfg, &b, s, None, |_, _, _| Ok(())) {
            Ok(out) => assert!(out.steps.iter().any(|s| s.halvings > 0)),
            Err(Error::Step { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
