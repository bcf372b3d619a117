//! Replay of a planned policy against the battery the EH sensor actually has.
//!
//! The battery state machine: each arrival tops the battery up to its
//! capacity (the rest is wasted); between arrivals the EH sensor drains it
//! at the planned power, and if it runs dry the EH sensor stays silent until
//! the next arrival. The BO sensor keeps its planned powers throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{epoch_throughput, EventSchedule, TransmissionPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationScenario {
    /// Capacity the policy was planned for (`f64::INFINITY` for none).
    pub e_max_nominal: f64,
    /// `R_C = E_max^actual / E_max^nom`.
    pub capacity_ratio: f64,
}

impl DegradationScenario {
    pub fn new(e_max_nominal: f64, capacity_ratio: f64) -> Result<Self> {
        if !(e_max_nominal > 0.0) {
            return Err(Error::InvalidConfig("nominal capacity must be positive".into()));
        }
        if !(capacity_ratio > 0.0 && capacity_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "capacity ratio must lie in (0, 1], got {capacity_ratio}"
            )));
        }
        Ok(Self {
            e_max_nominal,
            capacity_ratio,
        })
    }

    pub fn e_max_actual(&self) -> f64 {
        self.e_max_nominal * self.capacity_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Arrival,
    /// An arrival that did not fit in the battery.
    Overflow,
    /// The battery ran dry before the next arrival.
    Depletion,
    End,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Arrival => "arrival",
            TraceEvent::Overflow => "overflow",
            TraceEvent::Depletion => "depletion",
            TraceEvent::End => "end",
        }
    }
}

/// Battery state right after `event` at `time`. `p_h` and `p_b` are the
/// powers in effect from `time` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub time: f64,
    pub battery: f64,
    pub p_h: f64,
    pub p_b: f64,
    pub event: TraceEvent,
    /// Energy discarded at this point.
    pub wasted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    /// Throughput the policy achieves on the nominal battery.
    pub g_nominal: f64,
    /// Throughput achieved on the actual battery.
    pub g_actual: f64,
    /// `L_G = g_actual / g_nominal`.
    pub l_g: f64,
    pub harvested: f64,
    pub consumed: f64,
    pub wasted_energy: f64,
    /// Energy left in the battery at the deadline.
    pub residual: f64,
    /// Total time the EH sensor was silenced by an empty battery.
    pub depletion_time: f64,
    pub overflows: usize,
    pub depletions: usize,
    pub trace: Vec<TracePoint>,
}

/// Run `policy` on a battery of capacity `capacity` (may be infinite).
pub fn replay(
    schedule: &EventSchedule,
    policy: &TransmissionPolicy,
    capacity: f64,
) -> Result<ReplayReport> {
    let epochs = policy.epochs();
    if epochs.len() != schedule.len() {
        return Err(Error::InvalidPolicy(format!(
            "policy has {} epochs, schedule {}",
            epochs.len(),
            schedule.len()
        )));
    }
    let tol = schedule.feasibility_tolerance();
    let (p_h, p_b) = (policy.p_h(), policy.p_b());
    let mut battery: f64 = 0.0;
    let mut trace = Vec::with_capacity(2 * epochs.len() + 1);
    let (mut g_actual, mut harvested, mut consumed, mut wasted) = (0.0, 0.0, 0.0, 0.0);
    let (mut depletion_time, mut overflows, mut depletions) = (0.0, 0, 0);

    for (k, (epoch, arrival)) in epochs.iter().zip(schedule.events()).enumerate() {
        harvested += arrival.energy;
        let excess = battery + arrival.energy - capacity;
        let lost = if excess > tol { excess } else { 0.0 };
        battery += arrival.energy - lost;
        wasted += lost;
        if lost > 0.0 {
            overflows += 1;
        }
        trace.push(TracePoint {
            time: epoch.start,
            battery,
            p_h: p_h[k],
            p_b: p_b[k],
            event: if lost > 0.0 {
                TraceEvent::Overflow
            } else {
                TraceEvent::Arrival
            },
            wasted: lost,
        });

        let need = p_h[k] * epoch.duration;
        if need <= battery + tol {
            g_actual += epoch_throughput(epoch.duration, p_h[k], p_b[k]);
            let after = (battery - need).max(0.0);
            consumed += battery - after;
            battery = after;
        } else {
            let active = battery / p_h[k];
            let silent = epoch.duration - active;
            g_actual += epoch_throughput(active, p_h[k], p_b[k]);
            g_actual += epoch_throughput(silent, 0.0, p_b[k]);
            consumed += battery;
            battery = 0.0;
            depletion_time += silent;
            depletions += 1;
            trace.push(TracePoint {
                time: epoch.start + active,
                battery: 0.0,
                p_h: 0.0,
                p_b: p_b[k],
                event: TraceEvent::Depletion,
                wasted: 0.0,
            });
        }
    }
    trace.push(TracePoint {
        time: schedule.deadline(),
        battery,
        p_h: 0.0,
        p_b: 0.0,
        event: TraceEvent::End,
        wasted: 0.0,
    });

    let g_nominal = policy.throughput();
    Ok(ReplayReport {
        g_nominal,
        g_actual,
        l_g: if g_nominal > 0.0 { g_actual / g_nominal } else { 1.0 },
        harvested,
        consumed,
        wasted_energy: wasted,
        residual: battery,
        depletion_time,
        overflows,
        depletions,
        trace,
    })
}

/// Replay a policy planned for `scenario.e_max_nominal` on the degraded
/// capacity `R_C · E_max^nom`.
pub fn replay_with_degradation(
    schedule: &EventSchedule,
    policy: &TransmissionPolicy,
    scenario: &DegradationScenario,
) -> Result<ReplayReport> {
    replay(schedule, policy, scenario.e_max_actual())
}
