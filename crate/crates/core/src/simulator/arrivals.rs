//! Solar-like energy arrivals: a Poisson process whose rate grows as
//! `λ(t) = β·e^{ct}`, sampled by thinning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arrival, EventSchedule};

/// Arrivals closer than this (seconds) are merged into one event.
pub const MERGE_WINDOW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    /// Expected energy harvested through the Poisson arrivals, `E_T^H`.
    pub total_energy_eh: f64,
    /// Energy delivered by every arrival.
    pub per_event_energy: f64,
    /// Growth rate `c` of the arrival intensity (1/s).
    pub c: f64,
    /// Harvesting horizon and deadline `T` (s).
    pub horizon: f64,
    /// Initial charge of the BO sensor.
    pub bo_initial: f64,
    pub seed: u64,
}

/// `∫_0^T β e^{ct} dt`.
pub fn expected_event_count(beta: f64, c: f64, horizon: f64) -> f64 {
    if c == 0.0 {
        beta * horizon
    } else {
        beta * (c * horizon).exp_m1() / c
    }
}

/// Inverse of [`expected_event_count`] in `β`.
pub fn beta_for_count(count: f64, c: f64, horizon: f64) -> f64 {
    if c == 0.0 {
        count / horizon
    } else {
        count * c / (c * horizon).exp_m1()
    }
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.per_event_energy > 0.0) {
            return Err(Error::InvalidConfig("per-event energy must be positive".into()));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidConfig("variability c must be non-negative".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if !(self.total_energy_eh >= 0.0) || !self.total_energy_eh.is_finite() {
            return Err(Error::InvalidConfig("EH energy must be non-negative".into()));
        }
        if !(self.bo_initial > 0.0) || !self.bo_initial.is_finite() {
            return Err(Error::InvalidConfig("BO energy must be positive".into()));
        }
        Ok(())
    }

    /// Expected number of Poisson arrivals, `E_T^H / E_unit`.
    pub fn expected_events(&self) -> f64 {
        self.total_energy_eh / self.per_event_energy
    }

    /// Intensity scale `β` matching the expected number of arrivals.
    pub fn beta(&self) -> f64 {
        beta_for_count(self.expected_events(), self.c, self.horizon)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.beta() * (self.c * t).exp()
    }
}

/// Draw a schedule with the model's own seed.
pub fn generate_arrivals(model: &ArrivalModel) -> Result<EventSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    generate_arrivals_with(model, &mut rng)
}

/// Thinning against `λ_max = β e^{cT}`. An arrival at `t = 0` is always
/// present so the EH sensor can transmit from the start.
pub fn generate_arrivals_with<R: Rng + ?Sized>(
    model: &ArrivalModel,
    rng: &mut R,
) -> Result<EventSchedule> {
    model.validate()?;
    let e = model.per_event_energy;
    let horizon = model.horizon;
    let mut events = vec![Arrival::new(0.0, e)];
    let beta = model.beta();
    let lambda_max = beta * (model.c * horizon).exp();
    if lambda_max > 0.0 && lambda_max.is_finite() {
        let gap = Exp::new(lambda_max)
            .map_err(|err| Error::InvalidConfig(format!("arrival rate: {err}")))?;
        let mut t = 0.0;
        loop {
            t += gap.sample(rng);
            if t >= horizon {
                break;
            }
            let accept = (model.c * (t - horizon)).exp();
            if rng.random::<f64>() >= accept {
                continue;
            }
            let last = events.last_mut().expect("t = 0 event");
            if t - last.time < MERGE_WINDOW {
                last.energy += e;
            } else {
                events.push(Arrival::new(t, e));
            }
        }
    }
    EventSchedule::new(events, model.bo_initial, horizon)
}
