//! Policy and trace CSV files.

use std::io::{Read, Write};

use ehbf::model::{Arrival, EventSchedule, TransmissionPolicy};
use ehbf::simulator::replay::TracePoint;
use ehbf::JointSolution;

use crate::error::CliError;

pub const POLICY_HEADER: [&str; 10] = [
    "epoch",
    "start",
    "duration",
    "p_h",
    "p_b",
    "cum_eh_consumed",
    "cum_eh_harvested",
    "cum_bo_consumed",
    "touch_upper",
    "touch_lower",
];

pub const TRACE_HEADER: [&str; 6] = ["time", "battery", "p_h", "p_b", "event", "wasted"];

fn csv_error(e: csv::Error) -> CliError {
    CliError::Core(e.into())
}

pub fn write_policy<W: Write>(
    out: W,
    schedule: &EventSchedule,
    solution: &JointSolution,
) -> Result<(), CliError> {
    let policy = &solution.policy;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POLICY_HEADER).map_err(csv_error)?;
    let eh = policy.eh_consumed();
    let bo = policy.bo_consumed();
    let harvested = schedule.harvest_prefix();
    for (k, epoch) in policy.epochs().iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            epoch.start.to_string(),
            epoch.duration.to_string(),
            policy.p_h()[k].to_string(),
            policy.p_b()[k].to_string(),
            eh[k].to_string(),
            harvested[k].to_string(),
            bo[k].to_string(),
            solution.eh.touch_upper[k].to_string(),
            solution.eh.touch_lower[k].to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| CliError::Core(e.into()))?;
    Ok(())
}

/// One row of a policy file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyRow {
    pub start: f64,
    pub duration: f64,
    pub p_h: f64,
    pub p_b: f64,
    pub cum_eh_harvested: f64,
    pub cum_bo_consumed: f64,
}

pub fn read_policy<R: Read>(input: R) -> Result<Vec<PolicyRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_error)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("policy csv lacks a `{name}` column")))
    };
    let cols = [
        column("start")?,
        column("duration")?,
        column("p_h")?,
        column("p_b")?,
        column("cum_eh_harvested")?,
        column("cum_bo_consumed")?,
    ];
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let mut v = [0.0; 6];
        for (slot, &c) in v.iter_mut().zip(&cols) {
            let field = record.get(c).unwrap_or("");
            *slot = field.trim().parse().map_err(|_| {
                CliError::Config(format!(
                    "policy csv row {}: `{field}` is not a number",
                    line + 1
                ))
            })?;
        }
        rows.push(PolicyRow {
            start: v[0],
            duration: v[1],
            p_h: v[2],
            p_b: v[3],
            cum_eh_harvested: v[4],
            cum_bo_consumed: v[5],
        });
    }
    if rows.is_empty() {
        return Err(CliError::Config("policy csv has no epochs".into()));
    }
    Ok(rows)
}

/// The schedule a policy file was solved for: arrivals at the epoch starts,
/// energies from the harvest column, the BO budget it spent and the deadline
/// after its last epoch.
pub fn schedule_from_rows(rows: &[PolicyRow]) -> Result<EventSchedule, CliError> {
    let mut previous = 0.0;
    let events = rows
        .iter()
        .map(|r| {
            let a = Arrival::new(r.start, r.cum_eh_harvested - previous);
            previous = r.cum_eh_harvested;
            a
        })
        .collect();
    let last = rows[rows.len() - 1];
    Ok(EventSchedule::new(
        events,
        last.cum_bo_consumed,
        last.start + last.duration,
    )?)
}

/// Attach the powers of `rows` to the epochs of `schedule`.
pub fn policy_from_rows(
    rows: &[PolicyRow],
    schedule: &EventSchedule,
) -> Result<TransmissionPolicy, CliError> {
    let epochs = schedule.epochs();
    if epochs.len() != rows.len() {
        return Err(CliError::Config(format!(
            "policy has {} epochs but the schedule has {}",
            rows.len(),
            epochs.len()
        )));
    }
    if let Some(k) = epochs
        .iter()
        .zip(rows)
        .position(|(e, r)| e.start != r.start)
    {
        return Err(CliError::Config(format!(
            "policy epoch {} starts at {} but the schedule has an arrival at {}",
            k + 1,
            rows[k].start,
            epochs[k].start
        )));
    }
    Ok(TransmissionPolicy::new(
        epochs,
        rows.iter().map(|r| r.p_h).collect(),
        rows.iter().map(|r| r.p_b).collect(),
    )?)
}

pub fn write_trace<W: Write>(out: W, trace: &[TracePoint]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_error)?;
    for t in trace {
        w.write_record([
            t.time.to_string(),
            t.battery.to_string(),
            t.p_h.to_string(),
            t.p_b.to_string(),
            t.event.as_str().to_string(),
            t.wasted.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| CliError::Core(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ehbf::{solve_joint, JointConfig};

    #[test]
    fn policy_round_trips_exactly() {
        let s = EventSchedule::from_pairs(&[(0.0, 0.3), (0.7, 1.1), (2.9, 0.2)], 0.9, 4.1)
            .unwrap();
        let sol = solve_joint(&s, &JointConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_policy(&mut buf, &s, &sol).unwrap();
        let rows = read_policy(buf.as_slice()).unwrap();
        let rebuilt = schedule_from_rows(&rows).unwrap();
        let policy = policy_from_rows(&rows, &rebuilt).unwrap();
        assert_eq!(policy.p_h(), sol.policy.p_h());
        assert_eq!(policy.p_b(), sol.policy.p_b());
        assert_eq!(rebuilt.len(), 3);
        assert!((rebuilt.deadline() - 4.1).abs() < 1e-12);
        assert!((rebuilt.bo_initial() - 0.9).abs() < 1e-8);
    }

    #[test]
    fn missing_column_is_a_config_error() {
        let err = read_policy("start,duration\n0,1\n".as_bytes()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
