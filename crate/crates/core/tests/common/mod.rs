#![allow(dead_code)]

use ehbf::model::{Arrival, EventSchedule};
use rand::Rng;

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random desk-scale schedule: `n` arrivals (the first at t = 0), energies
/// and BO charge log-uniform in [1e-2, 1e2] J, deadline uniform in [1, 10] s.
pub fn random_schedule<R: Rng>(rng: &mut R, n: usize) -> EventSchedule {
    let deadline = rng.random_range(1.0..10.0);
    let mut times: Vec<f64> = (1..n).map(|_| rng.random_range(0.0..deadline)).collect();
    times.push(0.0);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|b, a| *b - *a < 1e-3);
    times.retain(|&t| deadline - t >= 1e-3 || t == 0.0);
    let events = times
        .into_iter()
        .map(|t| Arrival::new(t, log_uniform(rng, 1e-2, 1e2)))
        .collect();
    EventSchedule::new(events, log_uniform(rng, 1e-2, 1e2), deadline).unwrap()
}

/// A capacity no smaller than the largest arrival.
pub fn random_capacity<R: Rng>(rng: &mut R, schedule: &EventSchedule) -> f64 {
    schedule.max_arrival() * rng.random_range(1.0..3.0)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub mod strategies {
    use ehbf::model::{Arrival, EventSchedule};
    use proptest::prelude::*;

    /// Schedules with up to `max_n` arrivals, energies and BO charge in
    /// [1e-2, 1e2] J and a deadline in [1, 10] s.
    pub fn schedule(max_n: usize) -> impl Strategy<Value = EventSchedule> {
        (
            1.0..10.0f64,
            -2.0..2.0f64,
            -2.0..2.0f64,
            prop::collection::vec((0.0..1.0f64, -2.0..2.0f64), 0..max_n),
        )
            .prop_map(|(deadline, bo_exp, first_exp, rest)| {
                let mut times: Vec<(f64, f64)> = rest
                    .into_iter()
                    .map(|(f, e)| (f * deadline, 10f64.powf(e)))
                    .filter(|(t, _)| *t >= 1e-3 && deadline - *t >= 1e-3)
                    .collect();
                times.sort_by(|a, b| a.0.total_cmp(&b.0));
                times.dedup_by(|b, a| b.0 - a.0 < 1e-3);
                let mut events = vec![Arrival::new(0.0, 10f64.powf(first_exp))];
                events.extend(times.into_iter().map(|(t, e)| Arrival::new(t, e)));
                EventSchedule::new(events, 10f64.powf(bo_exp), deadline).unwrap()
            })
    }

    /// A schedule together with a capacity that fits every arrival.
    pub fn schedule_with_capacity(max_n: usize) -> impl Strategy<Value = (EventSchedule, f64)> {
        (schedule(max_n), 1.0..3.0f64).prop_map(|(s, f)| {
            let cap = s.max_arrival() * f;
            (s, cap)
        })
    }
}
