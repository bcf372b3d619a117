use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ehbf::model::{check_feasibility, EventSchedule, TransmissionPolicy};
use ehbf::oracle::{kkt_residuals, solve_numeric, ConvexInstance};
use ehbf::simulator::{replay_with_degradation, sweep, DegradationScenario};
use ehbf::{solve_joint, Execution};

use crate::config::{ExperimentConfig, ScheduleSource};
use crate::error::CliError;
use crate::policy_csv;

/// Relative gap allowed between a policy's throughput and the optimum.
const OPTIMALITY_GAP: f64 = 1e-5;

/// Where CSV output goes. Summaries go to stdout, or to stderr when the CSV
/// takes stdout.
pub struct Output {
    path: Option<PathBuf>,
}

impl Output {
    pub fn new(cli: Option<PathBuf>, config: &ExperimentConfig) -> Self {
        Self {
            path: cli.or_else(|| config.out.clone()),
        }
    }

    fn write_csv<F>(&self, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
    {
        match &self.path {
            Some(p) => {
                let file = File::create(p).map_err(|e| output_error(p, e))?;
                let mut w = BufWriter::new(file);
                write(&mut w)?;
                w.flush().map_err(|e| output_error(p, e))
            }
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                write(&mut lock)
            }
        }
    }

    fn summary(&self) -> Box<dyn Write> {
        if self.path.is_some() {
            Box::new(io::stdout())
        } else {
            Box::new(io::stderr())
        }
    }
}

fn output_error(path: &Path, e: io::Error) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    // a closed summary stream is not worth failing a finished run for
    let _ = writeln!(out, "{line}");
}

fn schedule_of(config: &ExperimentConfig) -> Result<EventSchedule, CliError> {
    match config.schedule_source(false)? {
        ScheduleSource::Inline(s) | ScheduleSource::Drawn(s) => Ok(s),
        ScheduleSource::FromPolicy => unreachable!("policy files only feed verify"),
    }
}

pub fn solve(config: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let schedule = schedule_of(config)?;
    let solution = solve_joint(&schedule, &config.joint_config()?)?;
    out.write_csv(|w| policy_csv::write_policy(w, &schedule, &solution))?;
    let mut s = out.summary();
    say(&mut *s, format_args!("epochs: {}", schedule.len()));
    say(&mut *s, format_args!("throughput: {}", solution.throughput()));
    say(&mut *s, format_args!("nu: {}", solution.bo.nu));
    say(&mut *s, format_args!("dual_iterations: {}", solution.bo.iterations));
    Ok(())
}

pub fn verify(config: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let joint = config.joint_config()?;
    let e_max = config.capacity()?;
    let rows = match &config.policy_csv {
        Some(p) => {
            let file = File::open(p).map_err(|e| {
                CliError::Config(format!("cannot read policy {}: {e}", p.display()))
            })?;
            Some(policy_csv::read_policy(file)?)
        }
        None => None,
    };
    let schedule = match config.schedule_source(true)? {
        ScheduleSource::Inline(s) | ScheduleSource::Drawn(s) => s,
        ScheduleSource::FromPolicy => {
            policy_csv::schedule_from_rows(rows.as_deref().expect("policy_csv is set"))?
        }
    };
    let optimum = solve_joint(&schedule, &joint)?;
    let policy: TransmissionPolicy = match &rows {
        Some(rows) => policy_csv::policy_from_rows(rows, &schedule)?,
        None => optimum.policy.clone(),
    };
    let g = policy.throughput();
    let finite = e_max.is_finite().then_some(e_max);
    let mut failures = Vec::new();
    let mut s = out.summary();

    let feasibility = check_feasibility(&policy, &schedule, finite);
    let line = match feasibility.first_violation {
        None => "PASS feasibility".to_string(),
        Some(n) => {
            failures.push("feasibility");
            format!("FAIL feasibility: constraint {n} violated")
        }
    };
    say(&mut *s, format_args!("{line}"));

    let instance = ConvexInstance::from_schedule(&schedule, finite)?;
    let kkt = kkt_residuals(&instance, policy.p_h(), policy.p_b());
    let residual = kkt.max_residual();
    let ok = residual <= config.solver.kkt_tolerance;
    if !ok {
        failures.push("kkt");
    }
    say(
        &mut *s,
        format_args!(
            "{} kkt: residual {residual:e} (tolerance {:e})",
            pass(ok),
            config.solver.kkt_tolerance
        ),
    );

    // the oracle is dense; past the epoch limit the joint solver is the
    // reference
    let (reference, source) = if schedule.len() <= config.solver.oracle_max_epochs {
        let g_ref = optimum.throughput();
        let numeric = solve_numeric(&instance, config.solver.oracle_tolerance * g_ref.max(1.0))?;
        (numeric.objective, "oracle")
    } else {
        (optimum.throughput(), "solver")
    };
    let gap = (g - reference).abs() / reference.abs().max(1.0);
    let ok = gap <= OPTIMALITY_GAP;
    if !ok {
        failures.push("optimality");
    }
    say(
        &mut *s,
        format_args!(
            "{} optimality: {source} optimum {reference}, relative gap {gap:e}",
            pass(ok)
        ),
    );
    say(&mut *s, format_args!("throughput: {g}"));

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join(", ")))
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn run_sweep(config: &ExperimentConfig, out: &Output, threads: usize) -> Result<(), CliError> {
    let descriptor = config.sweep_descriptor()?;
    let table = Execution::with_threads(threads, || sweep(&descriptor, Execution::Parallel))?;
    out.write_csv(|w| Ok(table.write_csv(w)?))?;
    let mut s = out.summary();
    say(
        &mut *s,
        format_args!(
            "sweep over {}: {} points x {} members",
            descriptor.variable.as_str(),
            table.points.len(),
            descriptor.ensemble
        ),
    );
    Ok(())
}

pub fn replay(config: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let nominal = config.capacity()?;
    if !nominal.is_finite() {
        return Err(CliError::Config("replay needs a finite `e_max`".into()));
    }
    let ratio = config
        .replay
        .as_ref()
        .ok_or_else(|| CliError::Config("replay mode needs a `replay` section".into()))?
        .capacity_ratio;
    let scenario = DegradationScenario::new(nominal, ratio)?;
    let schedule = schedule_of(config)?;
    let solution = solve_joint(&schedule, &config.joint_config()?)?;
    let report = replay_with_degradation(&schedule, &solution.policy, &scenario)?;
    out.write_csv(|w| policy_csv::write_trace(w, &report.trace))?;
    let mut s = out.summary();
    say(&mut *s, format_args!("throughput: {}", report.g_nominal));
    say(&mut *s, format_args!("throughput_actual: {}", report.g_actual));
    say(&mut *s, format_args!("l_g: {}", report.l_g));
    say(&mut *s, format_args!("wasted_energy: {}", report.wasted_energy));
    say(&mut *s, format_args!("depletion_time: {}", report.depletion_time));
    say(&mut *s, format_args!("overflows: {}", report.overflows));
    say(&mut *s, format_args!("depletions: {}", report.depletions));
    Ok(())
}
