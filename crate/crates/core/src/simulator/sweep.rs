//! Seeded Monte-Carlo sweeps over one experiment parameter.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::eh_solver::EhSolverConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::joint::{solve_joint, JointConfig};
use crate::model::{Arrival, EventSchedule};
use crate::simulator::arrivals::{generate_arrivals, ArrivalModel};
use crate::simulator::baseline::{constant_bo_policy, solve_single_sensor_baseline};
use crate::simulator::replay::replay;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// `E_T`, total energy in the system (J).
    TotalEnergy,
    /// `R_E = E_T^B / E_T^H`.
    EnergyRatio,
    /// Arrival-rate growth `c` (1/s).
    Variability,
    /// Nominal EH capacity `E_max` (J).
    Capacity,
    /// `R_C = E_max^actual / E_max^nom`.
    CapacityRatio,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::TotalEnergy => "total_energy",
            SweepVariable::EnergyRatio => "energy_ratio",
            SweepVariable::Variability => "variability",
            SweepVariable::Capacity => "capacity",
            SweepVariable::CapacityRatio => "capacity_ratio",
        }
    }
}

/// How much energy each arrival carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerEventEnergy {
    /// Fixed amount in joules.
    Joules(f64),
    /// `E_T^H / count`, keeping the expected number of arrivals fixed as the
    /// energy varies.
    ExpectedEvents(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPoint {
    pub total_energy: f64,
    pub energy_ratio: f64,
    pub variability: f64,
    /// Deadline `T` (s).
    pub horizon: f64,
    pub per_event: PerEventEnergy,
    /// Nominal EH capacity; `None` for unlimited storage.
    pub e_max_nominal: Option<f64>,
    pub capacity_ratio: f64,
}

impl Default for ExperimentPoint {
    fn default() -> Self {
        Self {
            total_energy: 10.0,
            energy_ratio: 1.0,
            variability: 30e-5,
            horizon: 7.0 * 3600.0,
            per_event: PerEventEnergy::ExpectedEvents(2262.0),
            e_max_nominal: None,
            capacity_ratio: 1.0,
        }
    }
}

impl ExperimentPoint {
    pub fn with(mut self, variable: SweepVariable, value: f64) -> Self {
        match variable {
            SweepVariable::TotalEnergy => self.total_energy = value,
            SweepVariable::EnergyRatio => self.energy_ratio = value,
            SweepVariable::Variability => self.variability = value,
            SweepVariable::Capacity => {
                self.e_max_nominal = value.is_finite().then_some(value)
            }
            SweepVariable::CapacityRatio => self.capacity_ratio = value,
        }
        self
    }

    pub fn eh_energy(&self) -> f64 {
        self.total_energy / (1.0 + self.energy_ratio)
    }

    pub fn bo_energy(&self) -> f64 {
        self.total_energy - self.eh_energy()
    }

    pub fn per_event_energy(&self) -> f64 {
        match self.per_event {
            PerEventEnergy::Joules(j) => j,
            PerEventEnergy::ExpectedEvents(n) => self.eh_energy() / n,
        }
    }

    pub fn arrival_model(&self, seed: u64) -> ArrivalModel {
        ArrivalModel {
            total_energy_eh: self.eh_energy(),
            per_event_energy: self.per_event_energy(),
            c: self.variability,
            horizon: self.horizon,
            bo_initial: self.bo_energy(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_energy > 0.0) || !(self.energy_ratio > 0.0) {
            return Err(Error::InvalidConfig(
                "total energy and energy ratio must be positive".into(),
            ));
        }
        if let Some(e) = self.e_max_nominal {
            if !(e > 0.0) {
                return Err(Error::InvalidConfig("capacity must be positive".into()));
            }
        }
        if !(self.capacity_ratio > 0.0 && self.capacity_ratio <= 1.0) {
            return Err(Error::InvalidConfig("capacity ratio must lie in (0, 1]".into()));
        }
        self.arrival_model(0).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDescriptor {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub ensemble: usize,
    pub seed: u64,
    #[serde(default)]
    pub base: ExperimentPoint,
}

/// Metrics of one ensemble member.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunMetrics {
    /// Joint optimum under the nominal capacity.
    pub g_opt: f64,
    /// Individually optimized sensors (constant BO power).
    pub g_subopt: f64,
    /// One EH sensor holding both sensors' energy.
    pub g_single: f64,
    /// Joint optimum with unlimited storage.
    pub g_infinite: f64,
    /// Planned throughput of the replayed policy.
    pub g_nominal: f64,
    /// Throughput on the degraded battery.
    pub g_actual: f64,
    pub r_e: f64,
    /// `g_opt / g_subopt`.
    pub r_g: f64,
    /// `g_actual / g_nominal`.
    pub l_g: f64,
    /// `g_opt / g_infinite`.
    pub capacity_loss: f64,
    pub wasted_energy: f64,
    pub depletion_time: f64,
    pub events: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    GOpt,
    GSubopt,
    GSingle,
    GInfinite,
    GNominal,
    GActual,
    RE,
    RG,
    LG,
    CapacityLoss,
    WastedEnergy,
    DepletionTime,
    Events,
}

impl Metric {
    pub const ALL: [Metric; 13] = [
        Metric::GOpt,
        Metric::GSubopt,
        Metric::GSingle,
        Metric::GInfinite,
        Metric::GNominal,
        Metric::GActual,
        Metric::RE,
        Metric::RG,
        Metric::LG,
        Metric::CapacityLoss,
        Metric::WastedEnergy,
        Metric::DepletionTime,
        Metric::Events,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::GOpt => "g_opt",
            Metric::GSubopt => "g_subopt",
            Metric::GSingle => "g_single",
            Metric::GInfinite => "g_infinite",
            Metric::GNominal => "g_nominal",
            Metric::GActual => "g_actual",
            Metric::RE => "r_e",
            Metric::RG => "r_g",
            Metric::LG => "l_g",
            Metric::CapacityLoss => "capacity_loss",
            Metric::WastedEnergy => "wasted_energy",
            Metric::DepletionTime => "depletion_time",
            Metric::Events => "events",
        }
    }

    pub fn of(self, m: &RunMetrics) -> f64 {
        match self {
            Metric::GOpt => m.g_opt,
            Metric::GSubopt => m.g_subopt,
            Metric::GSingle => m.g_single,
            Metric::GInfinite => m.g_infinite,
            Metric::GNominal => m.g_nominal,
            Metric::GActual => m.g_actual,
            Metric::RE => m.r_e,
            Metric::RG => m.r_g,
            Metric::LG => m.l_g,
            Metric::CapacityLoss => m.capacity_loss,
            Metric::WastedEnergy => m.wasted_energy,
            Metric::DepletionTime => m.depletion_time,
            Metric::Events => m.events,
        }
    }
}

/// SplitMix64 finalizer; decorrelates member seeds derived from one base seed.
pub fn member_seed(seed: u64, member: usize) -> u64 {
    let mut z = seed ^ (member as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Clip every arrival to the battery capacity; the clipped part can never
/// be stored.
pub fn clip_to_capacity(schedule: &EventSchedule, e_max: f64) -> Result<EventSchedule> {
    let events: Vec<Arrival> = schedule
        .events()
        .iter()
        .map(|a| Arrival::new(a.time, a.energy.min(e_max)))
        .collect();
    EventSchedule::new(events, schedule.bo_initial(), schedule.deadline())
}

/// Metrics for one schedule at one experiment point.
pub fn evaluate_schedule(schedule: &EventSchedule, point: &ExperimentPoint) -> Result<RunMetrics> {
    let e_max = point.e_max_nominal.unwrap_or(f64::INFINITY);
    let planned = if e_max.is_finite() && schedule.max_arrival() > e_max {
        clip_to_capacity(schedule, e_max)?
    } else {
        schedule.clone()
    };
    let opt = solve_joint(&planned, &JointConfig::with_capacity(e_max))?;
    let g_opt = opt.throughput();
    let g_infinite = if e_max.is_finite() {
        solve_joint(schedule, &JointConfig::default())?.throughput()
    } else {
        g_opt
    };
    let g_subopt = constant_bo_policy(&planned, opt.eh.p_h.clone())?.throughput();
    let g_single = solve_single_sensor_baseline(schedule)?;
    let replayed = replay(schedule, &opt.policy, e_max * point.capacity_ratio)?;
    Ok(RunMetrics {
        g_opt,
        g_subopt,
        g_single,
        g_infinite,
        g_nominal: replayed.g_nominal,
        g_actual: replayed.g_actual,
        r_e: schedule.bo_initial() / schedule.total_harvest(),
        r_g: g_opt / g_subopt,
        l_g: replayed.l_g,
        capacity_loss: g_opt / g_infinite,
        wasted_energy: replayed.wasted_energy,
        depletion_time: replayed.depletion_time,
        events: schedule.len() as f64,
    })
}

/// Draw member `member`'s schedule and evaluate it.
pub fn run_member(point: &ExperimentPoint, seed: u64, member: usize) -> Result<RunMetrics> {
    let member_seed = member_seed(seed, member);
    let attach = |e: Error| Error::Member {
        seed: member_seed,
        member,
        source: Box::new(e),
    };
    let schedule = generate_arrivals(&point.arrival_model(member_seed)).map_err(attach)?;
    evaluate_schedule(&schedule, point).map_err(attach)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count();
        let mean = values.clone().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub members: Vec<RunMetrics>,
}

impl SweepPoint {
    pub fn summary(&self, metric: Metric) -> Summary {
        Summary::of(self.members.iter().map(move |m| metric.of(m)))
    }

    pub fn mean(&self, metric: Metric) -> f64 {
        self.summary(metric).mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub variable: SweepVariable,
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    /// Long-format CSV: `variable,value,metric,mean,std_err,n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variable", "value", "metric", "mean", "std_err", "n"])?;
        for point in &self.points {
            for metric in Metric::ALL {
                let s = point.summary(metric);
                w.write_record([
                    self.variable.as_str().to_string(),
                    point.value.to_string(),
                    metric.name().to_string(),
                    s.mean.to_string(),
                    s.std_err.to_string(),
                    s.n.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Run the whole sweep. Every (grid point, member) pair is independent;
/// member `i` sees the same random stream at every grid point.
pub fn sweep(descriptor: &SweepDescriptor, execution: Execution) -> Result<SweepTable> {
    if descriptor.ensemble == 0 || descriptor.grid.is_empty() {
        return Err(Error::InvalidConfig("sweep needs a grid and an ensemble".into()));
    }
    let points: Vec<ExperimentPoint> = descriptor
        .grid
        .iter()
        .map(|&v| descriptor.base.with(descriptor.variable, v))
        .collect();
    for p in &points {
        p.validate()?;
    }
    let m = descriptor.ensemble;
    let results = execution.map(points.len() * m, |i| {
        run_member(&points[i / m], descriptor.seed, i % m)
    });
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(points.len());
    for &value in &descriptor.grid {
        let members = results
            .by_ref()
            .take(m)
            .collect::<Result<Vec<_>>>()?;
        out.push(SweepPoint { value, members });
    }
    Ok(SweepTable {
        variable: descriptor.variable,
        points: out,
    })
}

/// EH solver configuration implied by an experiment point.
pub fn eh_config(point: &ExperimentPoint) -> EhSolverConfig {
    EhSolverConfig::with_capacity(point.e_max_nominal.unwrap_or(f64::INFINITY))
}
