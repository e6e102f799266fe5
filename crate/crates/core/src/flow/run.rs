use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::geometry::HypothesisReport;
use crate::monitors::{self, RigidityVerdict, SeriesRow, TimeSeries, TrajectoryWindow};

use super::config::{FlowConfig, TimeStep};
use super::operator::Integrator;
use super::state::{InitialReport, MapField, MapState};
use super::FlowError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunVerdict {
    Converged,
    TimedOut,
    Blowup,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: FlowConfig,
    pub final_state: MapState,
    pub series: TimeSeries,
    pub verdict: RunVerdict,
    pub steps: u64,
    pub initial: InitialReport,
    /// Strict-form check of the configured triple; runs proceed either way.
    pub hypotheses: HypothesisReport,
    /// Present for converged runs.
    pub rigidity: Option<RigidityVerdict>,
    /// Reason for a blow-up verdict.
    pub blowup: Option<String>,
}

struct Pending {
    row: SeriesRow,
    prev: MapState,
    mid: MapState,
}

fn flush(series: &mut TimeSeries, p: Pending, next: &MapState) {
    let mut row = p.row;
    if let Ok(w) = TrajectoryWindow::new(p.prev, p.mid, next.clone()) {
        if let Ok((b, a)) = monitors::residual_maxima(&w) {
            if b.is_finite() && a.is_finite() {
                row.bochner_residual_max = Some(b);
                row.alpha_residual_max = Some(a);
            }
        }
    }
    series.rows.push(row);
}

/// Integrates a configured flow until convergence, `t_max`, or blow-up.
pub fn run(config: &FlowConfig, exec: Execution) -> Result<RunOutcome, FlowError> {
    let config = config.resolve()?;
    let problem = config.build()?;
    let hypotheses = config.hypotheses(true)?;
    let params = &config.flow;
    let tol = &config.tolerances;
    let radial = matches!(problem.initial.field, MapField::Radial { .. });

    let mut state = problem.initial.clone();
    let mut integ = Integrator::new(&state, exec)?;
    let mut series = TimeSeries::default();
    let mut pending: Option<Pending> = None;
    let mut prev: Option<MapState> = None;
    let mut steps: u64 = 0;
    let mut blowup = None;
    let t_end = params.t_max * (1.0 - 1e-12);

    let verdict = loop {
        let stats = integ.evaluate(&state);
        if let Some(p) = pending.take() {
            flush(&mut series, p, &state);
        }
        if !stats.is_finite() || stats.sup_energy_density > params.blowup_guard {
            blowup = Some(format!(
                "energy density {:e} at t = {}",
                stats.sup_energy_density, state.time
            ));
            break RunVerdict::Blowup;
        }
        let converged = stats.sup_tension < params.convergence_tol;
        let timed_out = state.time >= t_end;
        if steps.is_multiple_of(params.monitor_stride as u64) || converged || timed_out {
            let row = monitors::sample_row(&state, &stats);
            if !row.is_finite() {
                blowup = Some(format!("non-finite monitor values at t = {}", state.time));
                break RunVerdict::Blowup;
            }
            match prev.take() {
                Some(p) if radial && !converged && !timed_out => {
                    pending = Some(Pending {
                        row,
                        prev: p,
                        mid: state.clone(),
                    })
                }
                _ => series.rows.push(row),
            }
        }
        if converged {
            break RunVerdict::Converged;
        }
        if timed_out {
            break RunVerdict::TimedOut;
        }
        let mut dt = match params.dt {
            TimeStep::Auto => integ.auto_dt(&stats),
            TimeStep::Fixed(dt) => {
                integ.check_cfl(dt, &stats)?;
                dt
            }
        };
        dt = dt.min(params.t_max - state.time);
        if radial {
            prev = Some(state.clone());
        }
        match integ.advance(&mut state, dt, params.scheme, params.blowup_guard) {
            Ok(()) => {}
            Err(FlowError::BlowupDetected {
                time,
                energy_density,
            }) => {
                blowup = Some(format!(
                    "energy density {energy_density:e} during the step from t = {time}"
                ));
                break RunVerdict::Blowup;
            }
            Err(e) => return Err(e),
        }
        if !radial {
            let defect = state.manifold_defect()?;
            if !(defect <= tol.manifold_tol) {
                return Err(FlowError::InvariantViolation {
                    time: state.time,
                    defect,
                });
            }
        }
        steps += 1;
    };

    let rigidity = match verdict {
        RunVerdict::Converged => Some(monitors::classify_limit(&state, verdict, tol)?),
        _ => None,
    };
    Ok(RunOutcome {
        initial: problem.initial_report,
        config,
        final_state: state,
        series,
        verdict,
        steps,
        hypotheses,
        rigidity,
        blowup,
    })
}
