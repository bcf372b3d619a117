//! Optimal EH-sensor policy.
//!
//! With unlimited storage the energy-consumption curve is the shortest string
//! from the origin to `(T, E_T^H)` lying under the cumulative harvest
//! staircase. With a finite battery it is the taut string threading the
//! tunnel between the harvest staircase and the storage staircase. Neither
//! depends on the BO sensor.

use crate::error::{Error, Result};
use crate::model::EventSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhSolverConfig {
    /// Battery capacity in joules; `f64::INFINITY` for unlimited storage.
    pub e_max: f64,
    /// Relative tolerance under which two candidate slopes are considered equal.
    pub slope_tie_epsilon: f64,
}

impl Default for EhSolverConfig {
    fn default() -> Self {
        Self {
            e_max: f64::INFINITY,
            slope_tie_epsilon: 1e-12,
        }
    }
}

impl EhSolverConfig {
    pub fn with_capacity(e_max: f64) -> Self {
        Self {
            e_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "battery capacity must be positive, got {}",
                self.e_max
            )));
        }
        if !(self.slope_tie_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("negative slope tie tolerance".into()));
        }
        Ok(())
    }
}

/// Output of the EH solvers. Flags are indexed by constraint `n = 1..N`
/// (the end of epoch `n`; the last entry is the deadline).
#[derive(Debug, Clone, PartialEq)]
pub struct EhSolution {
    pub p_h: Vec<f64>,
    /// Consumption meets the harvest staircase (battery empty).
    pub touch_upper: Vec<bool>,
    /// Consumption meets the storage staircase (battery full).
    pub touch_lower: Vec<bool>,
    /// Number of candidate slopes evaluated.
    pub slope_evaluations: u64,
}

impl EhSolution {
    /// Indices `n` at which the transmit power changes between epoch `n` and `n + 1`.
    pub fn slope_changes(&self) -> Vec<usize> {
        self.p_h
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// A corner of the tunnel: `time` is the epoch end and `value` the
/// cumulative energy of the wall there.
#[derive(Debug, Clone, Copy)]
struct Corner {
    time: f64,
    value: f64,
}

struct Tunnel {
    upper: Vec<Corner>,
    lower: Option<Vec<Corner>>,
}

impl Tunnel {
    fn new(schedule: &EventSchedule, e_max: f64) -> Self {
        let ends = schedule.epoch_ends();
        let upper = schedule
            .harvest_prefix()
            .into_iter()
            .zip(&ends)
            .map(|(value, &time)| Corner { time, value })
            .collect::<Vec<_>>();
        let lower = e_max.is_finite().then(|| {
            let mut floor: Vec<Corner> = schedule
                .storage_floor(e_max)
                .into_iter()
                .zip(&ends)
                .map(|(value, &time)| Corner { time, value })
                .collect();
            // all harvested energy is spent by the deadline
            let last = floor.len() - 1;
            floor[last].value = upper[last].value;
            floor
        });
        Self { upper, lower }
    }
}

fn is_tie(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps * a.abs().max(b.abs())
}

/// Shortest string under the harvest staircase (unlimited storage).
///
/// From each anchor every remaining corner of the staircase (plus the end
/// point) is scanned and the minimum slope is taken; equal slopes resolve
/// to the latest corner so collinear pieces merge.
pub fn solve_eh_infinite(schedule: &EventSchedule) -> EhSolution {
    solve_eh_infinite_with(schedule, EhSolverConfig::default().slope_tie_epsilon)
}

pub fn solve_eh_infinite_with(schedule: &EventSchedule, slope_tie_epsilon: f64) -> EhSolution {
    let tunnel = Tunnel::new(schedule, f64::INFINITY);
    let corners = &tunnel.upper;
    let n = corners.len();
    let mut segment_end = vec![0usize; 0];
    let mut slopes = Vec::new();
    let mut evaluations = 0u64;

    let (mut t0, mut e0) = (0.0, 0.0);
    let mut next = 0usize;
    while next < n {
        let mut best = f64::INFINITY;
        let mut best_idx = n - 1;
        for (j, c) in corners.iter().enumerate().skip(next) {
            evaluations += 1;
            let slope = (c.value - e0) / (c.time - t0);
            if slope < best || is_tie(slope, best, slope_tie_epsilon) {
                best = slope;
                best_idx = j;
            }
        }
        segment_end.push(best_idx);
        slopes.push(best);
        t0 = corners[best_idx].time;
        e0 = corners[best_idx].value;
        next = best_idx + 1;
    }

    let mut p_h = Vec::with_capacity(n);
    let mut touch_upper = vec![false; n];
    let mut start = 0;
    for (&end, &slope) in segment_end.iter().zip(&slopes) {
        p_h.extend(std::iter::repeat_n(slope, end + 1 - start));
        touch_upper[end] = true;
        start = end + 1;
    }
    mark_touches(schedule, &p_h, &tunnel, &mut touch_upper, None);
    EhSolution {
        p_h,
        touch_upper,
        touch_lower: vec![false; n],
        slope_evaluations: evaluations,
    }
}

/// Taut string through the tunnel between the storage and harvest
/// staircases (finite capacity).
///
/// Requires every arrival to fit in the battery; clip oversized arrivals
/// before calling.
pub fn solve_eh_finite(schedule: &EventSchedule, config: &EhSolverConfig) -> Result<EhSolution> {
    config.validate()?;
    if config.e_max.is_finite() {
        if let Some((index, a)) = schedule
            .events()
            .iter()
            .enumerate()
            .find(|(_, a)| a.energy > config.e_max)
        {
            return Err(Error::ArrivalExceedsCapacity {
                index,
                energy: a.energy,
                e_max: config.e_max,
            });
        }
    }
    let tunnel = Tunnel::new(schedule, config.e_max);
    let upper = &tunnel.upper;
    let n = upper.len();
    // the deadline pins both walls to E_T^H, even without a storage floor
    let lower_value = |j: usize| -> f64 {
        if j == n - 1 {
            return upper[j].value;
        }
        tunnel
            .lower
            .as_ref()
            .map_or(f64::NEG_INFINITY, |l| l[j].value)
    };
    let eps = config.slope_tie_epsilon;

    // (end corner index, slope, touches lower wall)
    let mut segments: Vec<(usize, f64, bool)> = Vec::new();
    let mut evaluations = 0u64;
    let (mut t0, mut e0) = (0.0, 0.0);
    let mut next = 0usize;
    while next < n {
        let mut hi = f64::INFINITY;
        let mut hi_idx = n - 1;
        let mut lo = f64::NEG_INFINITY;
        let mut lo_idx = n - 1;
        let mut bend: Option<(usize, f64, bool)> = None;
        #[allow(clippy::needless_range_loop)] // `j` also feeds `lower_value`
        for j in next..n {
            evaluations += 1;
            let dt = upper[j].time - t0;
            let su = (upper[j].value - e0) / dt;
            let sl = (lower_value(j) - e0) / dt;
            if su < lo && !is_tie(su, lo, eps) {
                bend = Some((lo_idx, lo, true));
                break;
            }
            if sl > hi && !is_tie(sl, hi, eps) {
                bend = Some((hi_idx, hi, false));
                break;
            }
            if su < hi || is_tie(su, hi, eps) {
                hi = su;
                hi_idx = j;
            }
            if sl > lo || is_tie(sl, lo, eps) {
                lo = sl;
                lo_idx = j;
            }
        }
        // reaching the deadline means both walls pin the same end point
        let (idx, slope, lower) = bend.unwrap_or((n - 1, hi, false));
        segments.push((idx, slope, lower));
        t0 = upper[idx].time;
        e0 = if lower {
            lower_value(idx)
        } else {
            upper[idx].value
        };
        next = idx + 1;
    }

    let mut p_h = Vec::with_capacity(n);
    let mut touch_upper = vec![false; n];
    let mut touch_lower = vec![false; n];
    let mut start = 0;
    for &(end, slope, lower) in &segments {
        p_h.extend(std::iter::repeat_n(slope, end + 1 - start));
        if lower {
            touch_lower[end] = true;
        } else {
            touch_upper[end] = true;
        }
        start = end + 1;
    }
    mark_touches(
        schedule,
        &p_h,
        &tunnel,
        &mut touch_upper,
        Some(&mut touch_lower),
    );
    Ok(EhSolution {
        p_h,
        touch_upper,
        touch_lower,
        slope_evaluations: evaluations,
    })
}

/// Dispatch on the capacity in `config`.
pub fn solve_eh(schedule: &EventSchedule, config: &EhSolverConfig) -> Result<EhSolution> {
    if config.e_max.is_infinite() {
        config.validate()?;
        Ok(solve_eh_infinite_with(schedule, config.slope_tie_epsilon))
    } else {
        solve_eh_finite(schedule, config)
    }
}

/// Flag every corner the consumption curve meets within the feasibility slack.
fn mark_touches(
    schedule: &EventSchedule,
    p_h: &[f64],
    tunnel: &Tunnel,
    touch_upper: &mut [bool],
    touch_lower: Option<&mut [bool]>,
) {
    let tol = schedule.feasibility_tolerance();
    let epochs = schedule.epochs();
    let mut consumed = 0.0;
    let consumed_at: Vec<f64> = epochs
        .iter()
        .zip(p_h)
        .map(|(e, &p)| {
            consumed += e.duration * p;
            consumed
        })
        .collect();
    for (j, c) in tunnel.upper.iter().enumerate() {
        if (c.value - consumed_at[j]).abs() <= tol {
            touch_upper[j] = true;
        }
    }
    if let (Some(flags), Some(lower)) = (touch_lower, tunnel.lower.as_ref()) {
        let last = flags.len() - 1;
        for (j, c) in lower.iter().enumerate() {
            if j != last && (consumed_at[j] - c.value).abs() <= tol {
                flags[j] = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(pairs: &[(f64, f64)], t: f64) -> EventSchedule {
        EventSchedule::from_pairs(pairs, 1.0, t).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_arrival_is_constant() {
        let s = sched(&[(0.0, 4.0)], 2.0);
        let sol = solve_eh_infinite(&s);
        assert_eq!(sol.p_h, vec![2.0]);
        assert_eq!(sol.touch_upper, vec![true]);
    }

    #[test]
    fn infinite_capacity_examples() {
        let sol = solve_eh_infinite(&sched(&[(0.0, 1.0), (1.0, 3.0)], 2.0));
        assert!(close(&sol.p_h, &[1.0, 3.0], 1e-12));
        assert_eq!(sol.touch_upper, vec![true, true]);
        let sol = solve_eh_infinite(&sched(&[(0.0, 3.0), (1.0, 1.0)], 2.0));
        assert!(close(&sol.p_h, &[2.0, 2.0], 1e-12));
        assert_eq!(sol.touch_upper, vec![false, true]);
    }

    #[test]
    fn finite_capacity_examples() {
        let s = sched(&[(0.0, 4.0), (1.0, 4.0)], 4.0);
        let sol = solve_eh_finite(&s, &EhSolverConfig::with_capacity(4.0)).unwrap();
        assert!(close(&sol.p_h, &[4.0, 4.0 / 3.0], 1e-12));
        // both walls coincide at t = 1
        assert!(sol.touch_upper[0] && sol.touch_lower[0]);

        let s = sched(&[(0.0, 1.0), (1.0, 3.0)], 2.0);
        let sol = solve_eh_finite(&s, &EhSolverConfig::with_capacity(1e9)).unwrap();
        assert!(close(&sol.p_h, &[1.0, 3.0], 1e-12));

        let s = sched(&[(0.0, 1.0), (1.0, 1.0)], 2.0);
        let sol = solve_eh_finite(&s, &EhSolverConfig::with_capacity(1.0)).unwrap();
        assert!(close(&sol.p_h, &[1.0, 1.0], 1e-12));
    }

    #[test]
    fn lower_wall_bends_the_string() {
        // A large late arrival forces the battery to be emptied early:
        // {0: 3, 1: 3} with E_max = 3.5 needs e(1) ≥ 2.5 while the straight
        // line to (3, 6) only reaches 2.
        let s = sched(&[(0.0, 3.0), (1.0, 3.0)], 3.0);
        let sol = solve_eh_finite(&s, &EhSolverConfig::with_capacity(3.5)).unwrap();
        assert!(close(&sol.p_h, &[2.5, 1.75], 1e-12));
        assert!(sol.touch_lower[0] && !sol.touch_upper[0]);
    }

    #[test]
    fn oversized_arrival_is_rejected() {
        let s = sched(&[(0.0, 1.0), (1.0, 3.0)], 2.0);
        assert!(matches!(
            solve_eh_finite(&s, &EhSolverConfig::with_capacity(2.0)),
            Err(Error::ArrivalExceedsCapacity { index: 1, .. })
        ));
        assert!(solve_eh_finite(&s, &EhSolverConfig::with_capacity(0.0)).is_err());
    }

    #[test]
    fn unbounded_finite_matches_infinite() {
        let s = sched(&[(0.0, 0.5), (0.3, 2.0), (1.1, 0.1), (1.7, 4.0), (2.2, 0.0)], 3.0);
        let a = solve_eh_infinite(&s);
        let b = solve_eh_finite(&s, &EhSolverConfig::default()).unwrap();
        assert_eq!(a.p_h, b.p_h);
        assert_eq!(a.touch_upper, b.touch_upper);
    }
}
