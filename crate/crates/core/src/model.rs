//! Domain types shared by the solvers and the simulator.
//!
//! Times are in seconds, energies in joules and powers in watts. Throughput
//! is measured in nats (natural logarithm) times seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack granted to every energy constraint check.
pub const FEASIBILITY_RELATIVE_TOLERANCE: f64 = 1e-9;

/// A single energy arrival at the EH sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time: f64,
    pub energy: f64,
}

impl Arrival {
    pub fn new(time: f64, energy: f64) -> Self {
        Self { time, energy }
    }
}

/// Energy-arrival instants for the EH sensor, the BO sensor's initial
/// charge and the transmission deadline.
///
/// Every arrival delimits an epoch, including arrivals carrying zero energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSchedule {
    events: Vec<Arrival>,
    bo_initial: f64,
    deadline: f64,
}

impl EventSchedule {
    pub fn new(events: Vec<Arrival>, bo_initial: f64, deadline: f64) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| Error::InvalidSchedule("at least one event is required".into()))?;
        if first.time != 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "first event must be at t = 0, got {}",
                first.time
            )));
        }
        if !(first.energy > 0.0) {
            return Err(Error::InvalidSchedule(
                "the EH sensor must harvest a positive amount at t = 0".into(),
            ));
        }
        if !(bo_initial > 0.0) || !bo_initial.is_finite() {
            return Err(Error::InvalidSchedule(format!(
                "BO initial energy must be positive and finite, got {bo_initial}"
            )));
        }
        if let Some((k, a)) = events
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.energy >= 0.0) || !a.energy.is_finite())
        {
            return Err(Error::InvalidSchedule(format!(
                "arrival {k} has invalid energy {}",
                a.energy
            )));
        }
        let times: Vec<f64> = events.iter().map(|a| a.time).collect();
        build_epochs(&times, deadline)?;
        Ok(Self {
            events,
            bo_initial,
            deadline,
        })
    }

    /// Convenience constructor from `(time, energy)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)], bo_initial: f64, deadline: f64) -> Result<Self> {
        Self::new(
            pairs.iter().map(|&(t, e)| Arrival::new(t, e)).collect(),
            bo_initial,
            deadline,
        )
    }

    pub fn events(&self) -> &[Arrival] {
        &self.events
    }

    pub fn bo_initial(&self) -> f64 {
        self.bo_initial
    }

    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    /// Number of epochs, which equals the number of events.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|a| a.time).collect()
    }

    /// Total energy harvested by the EH sensor over `[0, T]`.
    pub fn total_harvest(&self) -> f64 {
        self.events.iter().map(|a| a.energy).sum()
    }

    /// Total energy in the system (EH harvest plus BO charge).
    pub fn total_energy(&self) -> f64 {
        self.total_harvest() + self.bo_initial
    }

    /// Absolute slack used by feasibility checks on this schedule.
    pub fn feasibility_tolerance(&self) -> f64 {
        FEASIBILITY_RELATIVE_TOLERANCE * self.total_energy().max(1.0)
    }

    pub fn epochs(&self) -> Vec<Epoch> {
        build_epochs(&self.times(), self.deadline).expect("schedule validated on construction")
    }

    /// Epoch end times `s_1, …, s_{N-1}, T`.
    pub fn epoch_ends(&self) -> Vec<f64> {
        self.events
            .iter()
            .skip(1)
            .map(|a| a.time)
            .chain(std::iter::once(self.deadline))
            .collect()
    }

    /// Energy available to the EH sensor by the end of each epoch, before the
    /// arrival that closes it: `E_n^H = Σ_{k<n} E_k`, for `n = 1..N`.
    pub fn harvest_prefix(&self) -> Vec<f64> {
        self.events
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.energy;
                Some(*acc)
            })
            .collect()
    }

    /// Minimum consumption by the end of each epoch that avoids an overflow
    /// at the arrival closing it: `E_n^S = Σ_{k≤n} E_k − E_max`. The last
    /// entry (the deadline) has no arrival and equals `E_T^H − E_max`.
    pub fn storage_floor(&self, e_max: f64) -> Vec<f64> {
        let upper = self.harvest_prefix();
        let n = upper.len();
        (0..n)
            .map(|i| {
                let next = if i + 1 < n { self.events[i + 1].energy } else { 0.0 };
                upper[i] + next - e_max
            })
            .collect()
    }

    /// Cumulative energy-harvesting staircase.
    pub fn harvest_curve(&self) -> CumulativeCurve {
        let mut acc = 0.0;
        let points = self
            .events
            .iter()
            .map(|a| {
                acc += a.energy;
                (a.time, acc)
            })
            .collect();
        CumulativeCurve {
            initial: 0.0,
            points,
        }
    }

    /// Cumulative energy-storage staircase (the harvest curve shifted down by
    /// `e_max`). Values may be negative.
    pub fn storage_curve(&self, e_max: f64) -> CumulativeCurve {
        self.harvest_curve().shifted(-e_max)
    }

    pub fn with_bo_initial(&self, bo_initial: f64) -> Result<Self> {
        Self::new(self.events.clone(), bo_initial, self.deadline)
    }

    /// Largest single arrival.
    pub fn max_arrival(&self) -> f64 {
        self.events.iter().map(|a| a.energy).fold(0.0, f64::max)
    }
}

/// Time elapsed between two consecutive events (or the last event and the
/// deadline).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    /// 1-based epoch index.
    pub index: usize,
    pub start: f64,
    pub duration: f64,
}

impl Epoch {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Partition `[0, T]` into epochs delimited by the event times.
pub fn build_epochs(times: &[f64], deadline: f64) -> Result<Vec<Epoch>> {
    if times.is_empty() {
        return Err(Error::InvalidSchedule("no events".into()));
    }
    if !(deadline > 0.0) || !deadline.is_finite() {
        return Err(Error::InvalidSchedule(format!("invalid deadline {deadline}")));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidSchedule("first event must be at t = 0".into()));
    }
    let mut epochs = Vec::with_capacity(times.len());
    for (k, &start) in times.iter().enumerate() {
        let end = times.get(k + 1).copied().unwrap_or(deadline);
        if !start.is_finite() {
            return Err(Error::InvalidSchedule(format!("event {k} has non-finite time")));
        }
        if start >= deadline {
            return Err(Error::InvalidSchedule(format!(
                "event {k} at {start} is not before the deadline {deadline}"
            )));
        }
        if !(end > start) {
            return Err(Error::InvalidSchedule(format!(
                "event times must be strictly increasing ({start} then {end})"
            )));
        }
        epochs.push(Epoch {
            index: k + 1,
            start,
            duration: if k + 1 == times.len() {
                deadline - start
            } else {
                end - start
            },
        });
    }
    Ok(epochs)
}

/// Right-continuous staircase of cumulative energy.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCurve {
    /// Value before the first breakpoint.
    initial: f64,
    points: Vec<(f64, f64)>,
}

impl CumulativeCurve {
    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Value at `t`, counting a step located exactly at `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|&(s, _)| s <= t);
        if idx == 0 {
            self.initial
        } else {
            self.points[idx - 1].1
        }
    }

    /// Left limit at `t`: a step located exactly at `t` is not counted.
    pub fn value_before(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|&(s, _)| s < t);
        if idx == 0 {
            self.initial
        } else {
            self.points[idx - 1].1
        }
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            initial: self.initial + offset,
            points: self.points.iter().map(|&(t, v)| (t, v + offset)).collect(),
        }
    }
}

/// Per-epoch constant transmit powers for both sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionPolicy {
    epochs: Vec<Epoch>,
    p_h: Vec<f64>,
    p_b: Vec<f64>,
}

impl TransmissionPolicy {
    pub fn new(epochs: Vec<Epoch>, p_h: Vec<f64>, p_b: Vec<f64>) -> Result<Self> {
        if p_h.len() != epochs.len() || p_b.len() != epochs.len() {
            return Err(Error::InvalidPolicy(format!(
                "{} epochs but {} EH and {} BO powers",
                epochs.len(),
                p_h.len(),
                p_b.len()
            )));
        }
        for (k, (&h, &b)) in p_h.iter().zip(&p_b).enumerate() {
            for v in [h, b] {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativePower {
                        epoch: k + 1,
                        value: v,
                    });
                }
            }
        }
        Ok(Self { epochs, p_h, p_b })
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn p_h(&self) -> &[f64] {
        &self.p_h
    }

    pub fn p_b(&self) -> &[f64] {
        &self.p_b
    }

    pub fn durations(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.duration).collect()
    }

    pub fn throughput(&self) -> f64 {
        throughput_of(&self.durations(), &self.p_h, &self.p_b)
            .expect("policy powers validated on construction")
    }

    /// EH energy consumed by the end of each epoch.
    pub fn eh_consumed(&self) -> Vec<f64> {
        prefix_energy(&self.epochs, &self.p_h)
    }

    /// BO energy consumed by the end of each epoch.
    pub fn bo_consumed(&self) -> Vec<f64> {
        prefix_energy(&self.epochs, &self.p_b)
    }

    /// EH energy consumed over `[0, t]`, integrating the staircase directly.
    pub fn eh_consumed_at(&self, t: f64) -> f64 {
        integrate_until(&self.epochs, &self.p_h, t)
    }

    pub fn bo_consumed_at(&self, t: f64) -> f64 {
        integrate_until(&self.epochs, &self.p_b, t)
    }
}

fn prefix_energy(epochs: &[Epoch], powers: &[f64]) -> Vec<f64> {
    epochs
        .iter()
        .zip(powers)
        .scan(0.0, |acc, (e, &p)| {
            *acc += e.duration * p;
            Some(*acc)
        })
        .collect()
}

fn integrate_until(epochs: &[Epoch], powers: &[f64], t: f64) -> f64 {
    epochs
        .iter()
        .zip(powers)
        .map(|(e, &p)| {
            let covered = (t.min(e.end()) - e.start).clamp(0.0, e.duration);
            covered * p
        })
        .sum()
}

/// Rate of a single epoch, `τ · ln(1 + (√p_h + √p_b)²)`.
#[inline]
pub fn epoch_throughput(duration: f64, p_h: f64, p_b: f64) -> f64 {
    let amplitude = p_h.sqrt() + p_b.sqrt();
    duration * (amplitude * amplitude).ln_1p()
}

/// Total throughput `Σ τ_k ln(1 + (√p^H_k + √p^B_k)²)` in nats.
pub fn throughput_of(durations: &[f64], p_h: &[f64], p_b: &[f64]) -> Result<f64> {
    if durations.len() != p_h.len() || durations.len() != p_b.len() {
        return Err(Error::InvalidPolicy("length mismatch".into()));
    }
    let mut total = 0.0;
    for (k, ((&tau, &h), &b)) in durations.iter().zip(p_h).zip(p_b).enumerate() {
        if h < 0.0 || b < 0.0 || h.is_nan() || b.is_nan() {
            return Err(Error::NegativePower {
                epoch: k + 1,
                value: if h < 0.0 || h.is_nan() { h } else { b },
            });
        }
        total += epoch_throughput(tau, h, b);
    }
    Ok(total)
}

/// Slack of every energy constraint at one epoch end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSlack {
    /// 1-based constraint index; `n = N` is the deadline.
    pub n: usize,
    pub time: f64,
    pub eh_consumed: f64,
    pub bo_consumed: f64,
    /// `E_n^H − e^H(s_n)`; negative means causality is violated.
    pub eh_slack: f64,
    /// `e^H(s_n) − E_n^S`; negative means the battery would overflow.
    pub es_slack: Option<f64>,
    /// `E_0^2 − e^B(s_n)`.
    pub bo_slack: f64,
}

impl ConstraintSlack {
    fn worst(&self) -> f64 {
        self.eh_slack
            .min(self.bo_slack)
            .min(self.es_slack.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub constraints: Vec<ConstraintSlack>,
    pub tolerance: f64,
    pub feasible: bool,
    /// Index `n` of the first violated constraint.
    pub first_violation: Option<usize>,
}

/// Check a policy against the harvest, storage (when `e_max` is finite) and
/// BO budget constraints at every epoch end of `schedule`.
pub fn check_feasibility(
    policy: &TransmissionPolicy,
    schedule: &EventSchedule,
    e_max: Option<f64>,
) -> FeasibilityReport {
    let tolerance = schedule.feasibility_tolerance();
    let upper = schedule.harvest_prefix();
    let floor = e_max.filter(|e| e.is_finite()).map(|e| schedule.storage_floor(e));
    let constraints: Vec<ConstraintSlack> = schedule
        .epoch_ends()
        .into_iter()
        .enumerate()
        .map(|(i, time)| {
            let eh_consumed = policy.eh_consumed_at(time);
            let bo_consumed = policy.bo_consumed_at(time);
            ConstraintSlack {
                n: i + 1,
                time,
                eh_consumed,
                bo_consumed,
                eh_slack: upper[i] - eh_consumed,
                es_slack: floor.as_ref().map(|f| eh_consumed - f[i]),
                bo_slack: schedule.bo_initial() - bo_consumed,
            }
        })
        .collect();
    let first_violation = constraints
        .iter()
        .find(|c| c.worst() < -tolerance)
        .map(|c| c.n);
    FeasibilityReport {
        feasible: first_violation.is_none(),
        first_violation,
        tolerance,
        constraints,
    }
}

/// Dual variables and bookkeeping attached to a joint solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    /// Multipliers of the harvest constraints.
    pub lambda_n: Vec<f64>,
    /// Multipliers of the BO budget constraints; only the last is non-zero.
    pub nu_n: Vec<f64>,
    /// Multipliers of the storage constraints (zero with infinite capacity).
    pub pi_n: Vec<f64>,
    pub eh_touch_lower: Vec<bool>,
    pub eh_touch_upper: Vec<bool>,
    /// Outer dual-search iterations of the BO solver.
    pub iterations: usize,
    /// Final relative width of the dual bracket.
    pub dual_search_step: f64,
    /// Slope evaluations performed by the EH solver.
    pub slope_evaluations: u64,
}
