//! Reference policies the joint optimum is compared against.

use crate::eh_solver::{solve_eh, solve_eh_infinite, EhSolverConfig};
use crate::error::Result;
use crate::model::{Arrival, EventSchedule, TransmissionPolicy};

/// Each sensor optimized on its own: the EH sensor follows its shortest
/// string and the BO sensor spends its charge at a constant rate.
pub fn solve_suboptimal_baseline(schedule: &EventSchedule) -> Result<TransmissionPolicy> {
    solve_suboptimal_baseline_with(schedule, &EhSolverConfig::default())
}

pub fn solve_suboptimal_baseline_with(
    schedule: &EventSchedule,
    eh: &EhSolverConfig,
) -> Result<TransmissionPolicy> {
    let p_h = solve_eh(schedule, eh)?.p_h;
    constant_bo_policy(schedule, p_h)
}

/// Pair an EH policy with a constant BO power `E_0^2 / T`.
pub fn constant_bo_policy(schedule: &EventSchedule, p_h: Vec<f64>) -> Result<TransmissionPolicy> {
    let p_b = vec![schedule.bo_initial() / schedule.deadline(); p_h.len()];
    TransmissionPolicy::new(schedule.epochs(), p_h, p_b)
}

/// Throughput of a single EH sensor whose harvest staircase is the sum of
/// both sensors' staircases (the BO charge joins the first arrival). No
/// beamforming gain: the rate is `ln(1 + p)`.
pub fn solve_single_sensor_baseline(schedule: &EventSchedule) -> Result<f64> {
    let mut events: Vec<Arrival> = schedule.events().to_vec();
    events[0].energy += schedule.bo_initial();
    let merged = EventSchedule::new(events, schedule.bo_initial(), schedule.deadline())?;
    let p = solve_eh_infinite(&merged).p_h;
    Ok(merged
        .epochs()
        .iter()
        .zip(&p)
        .map(|(e, &p)| e.duration * p.ln_1p())
        .sum())
}
