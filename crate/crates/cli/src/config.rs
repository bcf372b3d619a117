//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use ehbf::bo_solver::BoSolverConfig;
use ehbf::eh_solver::EhSolverConfig;
use ehbf::model::{Arrival, EventSchedule};
use ehbf::simulator::arrivals::ArrivalModel;
use ehbf::simulator::sweep::{ExperimentPoint, PerEventEnergy, SweepDescriptor, SweepVariable};
use ehbf::JointConfig;
use serde::Deserialize;

use crate::error::CliError;

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    Seconds,
    Hours,
}

impl TimeUnit {
    fn seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Hours => SECONDS_PER_HOUR,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSchedule {
    pub events: Vec<Arrival>,
    pub bo_initial: f64,
    pub deadline: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalModelConfig {
    pub total_energy_eh: f64,
    pub per_event_energy: f64,
    /// Growth rate of the arrival intensity, per `time_unit`.
    pub c: f64,
    pub horizon: f64,
    pub bo_initial: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub budget_tolerance: f64,
    pub slope_tie_epsilon: f64,
    pub max_iterations: usize,
    /// Oracle objective tolerance, relative to the throughput.
    pub oracle_tolerance: f64,
    pub kkt_tolerance: f64,
    /// Instances with more epochs skip the dense oracle in `verify`.
    pub oracle_max_epochs: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let bo = BoSolverConfig::default();
        Self {
            budget_tolerance: bo.budget_tolerance,
            slope_tie_epsilon: EhSolverConfig::default().slope_tie_epsilon,
            max_iterations: bo.max_iterations,
            oracle_tolerance: 1e-9,
            kkt_tolerance: 1e-6,
            oracle_max_epochs: 400,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub ensemble: usize,
    #[serde(default)]
    pub base: SweepBase,
}

/// Fixed experiment settings; missing fields take the desk defaults, which
/// are always in seconds.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub total_energy: Option<f64>,
    pub energy_ratio: Option<f64>,
    pub variability: Option<f64>,
    pub horizon: Option<f64>,
    pub per_event: Option<PerEventEnergy>,
    pub e_max_nominal: Option<f64>,
    pub capacity_ratio: Option<f64>,
}

impl SweepBase {
    fn resolve(&self) -> ExperimentPoint {
        let d = ExperimentPoint::default();
        ExperimentPoint {
            total_energy: self.total_energy.unwrap_or(d.total_energy),
            energy_ratio: self.energy_ratio.unwrap_or(d.energy_ratio),
            variability: self.variability.unwrap_or(d.variability),
            horizon: self.horizon.unwrap_or(d.horizon),
            per_event: self.per_event.unwrap_or(d.per_event),
            e_max_nominal: self.e_max_nominal.or(d.e_max_nominal),
            capacity_ratio: self.capacity_ratio.unwrap_or(d.capacity_ratio),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub capacity_ratio: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub time_unit: TimeUnit,
    pub seed: Option<u64>,
    pub schedule: Option<InlineSchedule>,
    pub arrival_model: Option<ArrivalModelConfig>,
    /// EH battery capacity in joules; absent for unlimited storage.
    pub e_max: Option<f64>,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Fixed policy to verify, as written by `solve`.
    pub policy_csv: Option<PathBuf>,
    pub sweep: Option<SweepConfig>,
    pub replay: Option<ReplayConfig>,
    pub out: Option<PathBuf>,
}

/// Where the schedule of a run comes from.
pub enum ScheduleSource {
    Inline(EventSchedule),
    Drawn(EventSchedule),
    /// Rebuilt from the policy CSV.
    FromPolicy,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = &config.policy_csv {
            if p.is_relative() {
                let dir = path.parent().unwrap_or(Path::new("."));
                config.policy_csv = Some(dir.join(p));
            }
        }
        config.normalize_times();
        Ok(config)
    }

    /// Convert every time to seconds and every rate to 1/s.
    fn normalize_times(&mut self) {
        let k = self.time_unit.seconds();
        if k == 1.0 {
            return;
        }
        if let Some(s) = &mut self.schedule {
            s.deadline *= k;
            for a in &mut s.events {
                a.time *= k;
            }
        }
        if let Some(m) = &mut self.arrival_model {
            m.horizon *= k;
            m.c /= k;
        }
        if let Some(sw) = &mut self.sweep {
            if let Some(h) = &mut sw.base.horizon {
                *h *= k;
            }
            if let Some(c) = &mut sw.base.variability {
                *c /= k;
            }
            if sw.variable == SweepVariable::Variability {
                for v in &mut sw.grid {
                    *v /= k;
                }
            }
        }
        self.time_unit = TimeUnit::Seconds;
    }

    pub fn joint_config(&self) -> Result<JointConfig, CliError> {
        let s = &self.solver;
        let config = JointConfig {
            eh: EhSolverConfig {
                e_max: self.capacity()?,
                slope_tie_epsilon: s.slope_tie_epsilon,
            },
            bo: BoSolverConfig {
                budget_tolerance: s.budget_tolerance,
                max_iterations: s.max_iterations,
                ..BoSolverConfig::default()
            },
        };
        config.eh.validate()?;
        config.bo.validate()?;
        Ok(config)
    }

    /// Battery capacity, `f64::INFINITY` when unlimited.
    pub fn capacity(&self) -> Result<f64, CliError> {
        match self.e_max {
            None => Ok(f64::INFINITY),
            Some(e) if e > 0.0 => Ok(e),
            Some(e) => Err(CliError::Config(format!("e_max must be positive, got {e}"))),
        }
    }

    pub fn schedule_source(&self, allow_policy: bool) -> Result<ScheduleSource, CliError> {
        match (&self.schedule, &self.arrival_model) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either `schedule` or `arrival_model`, not both".into(),
            )),
            (Some(s), None) => Ok(ScheduleSource::Inline(EventSchedule::new(
                s.events.clone(),
                s.bo_initial,
                s.deadline,
            )?)),
            (None, Some(m)) => {
                let seed = self.seed.ok_or_else(|| {
                    CliError::Config("`arrival_model` needs a `seed` (config or --seed)".into())
                })?;
                let model = ArrivalModel {
                    total_energy_eh: m.total_energy_eh,
                    per_event_energy: m.per_event_energy,
                    c: m.c,
                    horizon: m.horizon,
                    bo_initial: m.bo_initial,
                    seed,
                };
                Ok(ScheduleSource::Drawn(
                    ehbf::simulator::generate_arrivals(&model)?,
                ))
            }
            (None, None) if allow_policy && self.policy_csv.is_some() => {
                Ok(ScheduleSource::FromPolicy)
            }
            (None, None) => Err(CliError::Config(
                "a `schedule` or an `arrival_model` is required".into(),
            )),
        }
    }

    pub fn sweep_descriptor(&self) -> Result<SweepDescriptor, CliError> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("sweep mode needs a `sweep` section".into()))?;
        if self.schedule.is_some() || self.arrival_model.is_some() {
            return Err(CliError::Config(
                "sweep draws its own schedules; remove `schedule`/`arrival_model`".into(),
            ));
        }
        let seed = self
            .seed
            .ok_or_else(|| CliError::Config("sweep needs a `seed` (config or --seed)".into()))?;
        let mut base = sw.base.resolve();
        if let Some(e) = self.e_max {
            base.e_max_nominal = Some(e);
        }
        Ok(SweepDescriptor {
            variable: sw.variable,
            grid: sw.grid.clone(),
            ensemble: sw.ensemble,
            seed,
            base,
        })
    }
}
