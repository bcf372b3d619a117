//! Jointly optimal BO-sensor policy given the EH policy.
//!
//! Stationarity of the Lagrangian ties the two powers of epoch `k` to the
//! dual quantities `A_k` (harvest multipliers) and `B_k` (budget multiplier):
//!
//! ```text
//! p_h = B (A + B − AB) / (A (A + B)²)      p_b = (A / B)² p_h
//! ```
//!
//! Only the final budget multiplier `ν` is non-zero, so `B_k = ν` for every
//! epoch. For a fixed `ν` each `A_k` is the positive root of a cubic, and
//! the BO energy spent is strictly decreasing in `ν`; a bisection on `ν`
//! therefore finds the unique policy that spends the BO budget exactly.

use crate::error::{Error, Result};
use crate::model::EventSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoSolverConfig {
    /// Relative tolerance on `Σ τ_k p^B_k − E_0^2`.
    pub budget_tolerance: f64,
    /// Initial `(low, high)` bracket for the budget multiplier.
    pub nu_bracket: (f64, f64),
    pub max_iterations: usize,
    /// Tolerance on the normalized cubic residual.
    pub root_tolerance: f64,
}

impl Default for BoSolverConfig {
    fn default() -> Self {
        Self {
            budget_tolerance: 1e-8,
            nu_bracket: (1e-8, 1e8),
            max_iterations: 500,
            root_tolerance: 1e-12,
        }
    }
}

impl BoSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.nu_bracket;
        if !(self.budget_tolerance > 0.0) || !(self.root_tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "invalid dual bracket [{lo}, {hi}]"
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoSolution {
    pub p_b: Vec<f64>,
    /// Budget multiplier `ν_N`.
    pub nu: f64,
    /// `A_k` for every epoch at the final `ν`.
    pub a: Vec<f64>,
    pub iterations: usize,
    /// Relative width of the final bracket on `ν`.
    pub bracket_width: f64,
}

/// EH power implied by the dual pair `(a, b)`.
pub fn eh_power_from_duals(a: f64, b: f64) -> f64 {
    b * (a * (1.0 - b) + b) / (a * (a + b) * (a + b))
}

/// BO power implied by the dual pair `(a, b)`.
pub fn bo_power_from_duals(a: f64, b: f64) -> f64 {
    a * (a * (1.0 - b) + b) / (b * (a + b) * (a + b))
}

/// The dual pair `(A, B)` produced by stationarity at powers `(p_h, p_b)`:
/// the marginal throughput per joule of each sensor.
pub fn duals_from_powers(p_h: f64, p_b: f64) -> (f64, f64) {
    let (x, y) = (p_h.sqrt(), p_b.sqrt());
    let s = x + y;
    let q = 1.0 + s * s;
    (s / (x * q), s / (y * q))
}

/// Cubic `p_h·A·(A+B)² − B(A+B−AB)` and its derivative in `A`, together
/// with the magnitude of its terms for residual normalization.
#[inline]
fn cubic(p_h: f64, b: f64, a: f64) -> (f64, f64, f64) {
    let apb = a + b;
    let lhs = p_h * a * apb * apb;
    let inner = a * (1.0 - b) + b;
    let value = lhs - b * inner;
    let slope = p_h * apb * (apb + 2.0 * a) - b * (1.0 - b);
    let scale = lhs + b * (a * (1.0 - b)).abs() + b * b;
    (value, slope, scale)
}

/// Unique positive root `A` of `p_h·A·(A+B)² = B(A + B − AB)`.
///
/// The cubic is negative at `A = 0` and has exactly one sign change in its
/// coefficients, so a bracket `[0, hi]` with `f(hi) > 0` always exists. A
/// Newton iteration safeguarded by bisection refines it.
pub fn solve_a_from_ph(p_h: f64, b: f64, root_tolerance: f64) -> Result<f64> {
    if !(p_h > 0.0) || !(b > 0.0) || !p_h.is_finite() || !b.is_finite() {
        return Err(Error::NoPositiveRoot { p_h, b });
    }
    let mut lo = 0.0;
    let mut hi = 1.0f64;
    let mut expansions = 0;
    while cubic(p_h, b, hi).0 <= 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 2000 || !hi.is_finite() {
            return Err(Error::NoPositiveRoot { p_h, b });
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (f, df, scale) = cubic(p_h, b, a);
        if f.abs() <= root_tolerance * scale {
            return Ok(a);
        }
        if f < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let newton = a - f / df;
        a = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let (f, _, scale) = cubic(p_h, b, a);
    // the bracket has collapsed to floating-point resolution
    if f.abs() <= root_tolerance.max(64.0 * f64::EPSILON) * scale {
        Ok(a)
    } else {
        Err(Error::NonConvergence {
            what: "dual cubic",
            iterations: 400,
        })
    }
}

/// BO powers for a fixed budget multiplier `nu`, with `B_k = nu` for all `k`.
/// Returns `(p_b, A_k)`.
pub fn bo_powers_for_dual_with(
    p_h: &[f64],
    nu: f64,
    root_tolerance: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut p_b = Vec::with_capacity(p_h.len());
    let mut a_values = Vec::with_capacity(p_h.len());
    let mut cache: Option<(f64, f64, f64)> = None;
    for &h in p_h {
        // optimal EH policies are runs of equal powers
        let (a, b) = match cache {
            Some((ch, ca, cb)) if ch == h => (ca, cb),
            _ => {
                let a = solve_a_from_ph(h, nu, root_tolerance)?;
                let b = (a / nu) * (a / nu) * h;
                cache = Some((h, a, b));
                (a, b)
            }
        };
        a_values.push(a);
        p_b.push(b);
    }
    Ok((p_b, a_values))
}

pub fn bo_powers_for_dual(p_h: &[f64], nu: f64) -> Result<Vec<f64>> {
    bo_powers_for_dual_with(p_h, nu, BoSolverConfig::default().root_tolerance).map(|(p, _)| p)
}

fn spent(durations: &[f64], p_b: &[f64]) -> f64 {
    durations.iter().zip(p_b).map(|(t, p)| t * p).sum()
}

/// Bisection on the budget multiplier until the BO sensor spends exactly
/// its initial charge.
pub fn solve_bo(
    schedule: &EventSchedule,
    p_h: &[f64],
    config: &BoSolverConfig,
) -> Result<BoSolution> {
    config.validate()?;
    let durations: Vec<f64> = schedule.epochs().iter().map(|e| e.duration).collect();
    if p_h.len() != durations.len() {
        return Err(Error::InvalidPolicy(format!(
            "{} EH powers for {} epochs",
            p_h.len(),
            durations.len()
        )));
    }
    if let Some((k, &h)) = p_h.iter().enumerate().find(|(_, &h)| !(h > 0.0)) {
        return Err(Error::InvalidPolicy(format!(
            "EH power must be positive, epoch {} has {h}",
            k + 1
        )));
    }
    let budget = schedule.bo_initial();
    let tol = config.root_tolerance;
    let energy_at = |nu: f64| -> Result<f64> {
        let (p_b, _) = bo_powers_for_dual_with(p_h, nu, tol)?;
        Ok(spent(&durations, &p_b))
    };

    // Spending is strictly decreasing in nu: widen the bracket geometrically
    // until it straddles the budget.
    let (mut lo, mut hi) = config.nu_bracket;
    let mut widen = 0;
    while energy_at(lo)? < budget {
        widen += 1;
        lo *= 1e-4;
        if widen > 60 || lo < f64::MIN_POSITIVE * 1e10 {
            return Err(Error::BracketFailure {
                low: lo,
                high: hi,
                budget,
            });
        }
    }
    widen = 0;
    while energy_at(hi)? > budget {
        widen += 1;
        hi *= 1e4;
        if widen > 60 || !hi.is_finite() {
            return Err(Error::BracketFailure {
                low: lo,
                high: hi,
                budget,
            });
        }
    }

    let mut iterations = 0;
    loop {
        iterations += 1;
        let nu = (lo * hi).sqrt();
        let (p_b, a) = bo_powers_for_dual_with(p_h, nu, tol)?;
        let used = spent(&durations, &p_b);
        let width = hi / lo - 1.0;
        // stop on the feasible side so the budget is never overdrawn
        if (used <= budget && (budget - used) / budget <= config.budget_tolerance)
            || width <= 4.0 * f64::EPSILON
        {
            return Ok(BoSolution {
                p_b,
                nu,
                a,
                iterations,
                bracket_width: width,
            });
        }
        if used > budget {
            lo = nu;
        } else {
            hi = nu;
        }
        if iterations >= config.max_iterations {
            return Err(Error::NonConvergence {
                what: "BO dual bisection",
                iterations,
            });
        }
    }
}
