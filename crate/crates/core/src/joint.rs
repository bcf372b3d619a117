//! EH policy first, BO policy from it, packaged as one transmission policy.

use crate::bo_solver::{solve_bo, BoSolution, BoSolverConfig};
use crate::eh_solver::{solve_eh, EhSolution, EhSolverConfig};
use crate::error::Result;
use crate::model::{EventSchedule, SolverDiagnostics, TransmissionPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointConfig {
    pub eh: EhSolverConfig,
    pub bo: BoSolverConfig,
}

impl JointConfig {
    pub fn with_capacity(e_max: f64) -> Self {
        Self {
            eh: EhSolverConfig::with_capacity(e_max),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSolution {
    pub policy: TransmissionPolicy,
    pub diagnostics: SolverDiagnostics,
    pub eh: EhSolution,
    pub bo: BoSolution,
}

impl JointSolution {
    pub fn throughput(&self) -> f64 {
        self.policy.throughput()
    }
}

pub fn solve_joint(schedule: &EventSchedule, config: &JointConfig) -> Result<JointSolution> {
    let eh = solve_eh(schedule, &config.eh)?;
    let bo = solve_bo(schedule, &eh.p_h, &config.bo)?;
    let policy = TransmissionPolicy::new(schedule.epochs(), eh.p_h.clone(), bo.p_b.clone())?;

    // A_k = Σ_{n≥k} (λ_n − π_n), so consecutive differences localize the duals.
    let n = bo.a.len();
    let mut lambda_n = vec![0.0; n];
    let mut pi_n = vec![0.0; n];
    for k in 0..n {
        let next = if k + 1 < n { bo.a[k + 1] } else { 0.0 };
        let delta = bo.a[k] - next;
        if delta >= 0.0 {
            lambda_n[k] = delta;
        } else {
            pi_n[k] = -delta;
        }
    }
    let mut nu_n = vec![0.0; n];
    nu_n[n - 1] = bo.nu;

    let diagnostics = SolverDiagnostics {
        lambda_n,
        nu_n,
        pi_n,
        eh_touch_lower: eh.touch_lower.clone(),
        eh_touch_upper: eh.touch_upper.clone(),
        iterations: bo.iterations,
        dual_search_step: bo.bracket_width,
        slope_evaluations: eh.slope_evaluations,
    };
    Ok(JointSolution {
        policy,
        diagnostics,
        eh,
        bo,
    })
}
