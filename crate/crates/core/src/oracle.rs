//! Independent numerical solution of the joint power-allocation program and
//! a KKT certificate for arbitrary policies.
//!
//! The oracle never calls the string or dual-search solvers. It runs a
//! primal log-barrier Newton method on the cumulative consumptions
//! `c_n = Σ_{k≤n} τ_k p^H_k` and `d_n = Σ_{k≤n} τ_k p^B_k`, in which every
//! constraint of the problem is a bound or a difference of neighbours.
//! Points where the storage floor meets the harvest ceiling are pinned.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{throughput_of, EventSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexInstance {
    pub tau: Vec<f64>,
    /// `E_n^H`, the harvest ceiling at the end of each epoch.
    pub eh_budget_prefix: Vec<f64>,
    /// `E_n^S`, the storage floor at the end of each epoch.
    pub es_floor_prefix: Option<Vec<f64>>,
    /// `E_0^2`.
    pub bo_budget: f64,
}

impl ConvexInstance {
    pub fn new(
        tau: Vec<f64>,
        eh_budget_prefix: Vec<f64>,
        es_floor_prefix: Option<Vec<f64>>,
        bo_budget: f64,
    ) -> Result<Self> {
        let n = tau.len();
        if n == 0 || eh_budget_prefix.len() != n {
            return Err(Error::InvalidConfig("instance size mismatch".into()));
        }
        if tau.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidConfig("epoch durations must be positive".into()));
        }
        if eh_budget_prefix.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("harvest ceiling must be non-decreasing".into()));
        }
        if let Some(floor) = &es_floor_prefix {
            if floor.len() != n {
                return Err(Error::InvalidConfig("storage floor size mismatch".into()));
            }
            let scale = eh_budget_prefix[n - 1].abs().max(1.0);
            if floor
                .iter()
                .zip(&eh_budget_prefix)
                .any(|(l, u)| *l > *u + 1e-12 * scale)
            {
                return Err(Error::Infeasible("storage floor above harvest ceiling".into()));
            }
        }
        if !(bo_budget > 0.0) {
            return Err(Error::InvalidConfig("BO budget must be positive".into()));
        }
        Ok(Self {
            tau,
            eh_budget_prefix,
            es_floor_prefix,
            bo_budget,
        })
    }

    /// Problem instance for a schedule; `e_max = None` means unlimited storage.
    pub fn from_schedule(schedule: &EventSchedule, e_max: Option<f64>) -> Result<Self> {
        let tau = schedule.epochs().iter().map(|e| e.duration).collect();
        let floor = e_max
            .filter(|e| e.is_finite())
            .map(|e| schedule.storage_floor(e));
        Self::new(tau, schedule.harvest_prefix(), floor, schedule.bo_initial())
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    fn energy_scale(&self) -> f64 {
        (self.eh_budget_prefix[self.len() - 1] + self.bo_budget).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericSolution {
    pub p_h: Vec<f64>,
    pub p_b: Vec<f64>,
    pub objective: f64,
    pub newton_steps: usize,
}

/// Where inside the feasible tunnel the barrier method starts: the fraction
/// of the way from the floor to the ceiling of each cumulative constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorStart(pub f64);

impl Default for InteriorStart {
    fn default() -> Self {
        Self(0.5)
    }
}

/// Second-order data of `F(h, b) = ln(1 + (√h + √b)²)`.
struct EpochCurvature {
    f_h: f64,
    f_b: f64,
    f_hh: f64,
    f_hb: f64,
    f_bb: f64,
}

fn curvature(h: f64, b: f64) -> EpochCurvature {
    let (x, y) = (h.sqrt(), b.sqrt());
    let s = x + y;
    let q = 1.0 + s * s;
    let common = (1.0 - s * s) / (q * q);
    EpochCurvature {
        f_h: s / (x * q),
        f_b: s / (y * q),
        f_hh: common / (2.0 * x * x) - s / (2.0 * x * x * x * q),
        f_hb: common / (2.0 * x * y),
        f_bb: common / (2.0 * y * y) - s / (2.0 * y * y * y * q),
    }
}

/// Hessian of `−τ ln(1 + (√h + √b)²)` in `(h, b)`.
pub fn negative_throughput_hessian(tau: f64, p_h: f64, p_b: f64) -> [[f64; 2]; 2] {
    let c = curvature(p_h, p_b);
    [
        [-tau * c.f_hh, -tau * c.f_hb],
        [-tau * c.f_hb, -tau * c.f_bb],
    ]
}

/// A cumulative consumption variable: either free (index into the Newton
/// vector) or pinned to a constant.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Free(usize),
    Fixed(f64),
}

/// Linear barrier term `const + Σ coef·z_i > 0`.
struct Term {
    coefs: Vec<(usize, f64)>,
    constant: f64,
}

impl Term {
    fn eval(&self, z: &DVector<f64>) -> f64 {
        self.constant + self.coefs.iter().map(|&(i, a)| a * z[i]).sum::<f64>()
    }
}

struct Barrier<'a> {
    inst: &'a ConvexInstance,
    c_slots: Vec<Slot>,
    d_slots: Vec<Slot>,
    dim: usize,
    terms: Vec<Term>,
}

fn slot_value(slot: Slot, z: &DVector<f64>) -> f64 {
    match slot {
        Slot::Free(i) => z[i],
        Slot::Fixed(v) => v,
    }
}

/// `(coefficients, constant)` of `slot_b − slot_a`.
fn difference(a: Slot, b: Slot) -> Term {
    let mut coefs = Vec::new();
    let mut constant = 0.0;
    match b {
        Slot::Free(i) => coefs.push((i, 1.0)),
        Slot::Fixed(v) => constant += v,
    }
    match a {
        Slot::Free(i) => coefs.push((i, -1.0)),
        Slot::Fixed(v) => constant -= v,
    }
    Term { coefs, constant }
}

impl<'a> Barrier<'a> {
    fn new(inst: &'a ConvexInstance) -> Result<Self> {
        let n = inst.len();
        let pin_tol = 1e-12 * inst.energy_scale();
        let mut dim = 0;
        let mut c_slots = Vec::with_capacity(n);
        for i in 0..n {
            let upper = inst.eh_budget_prefix[i];
            let pinned = inst
                .es_floor_prefix
                .as_ref()
                .is_some_and(|f| f[i] >= upper - pin_tol);
            if pinned {
                c_slots.push(Slot::Fixed(upper));
            } else {
                c_slots.push(Slot::Free(dim));
                dim += 1;
            }
        }
        let d_slots: Vec<Slot> = (0..n).map(|i| Slot::Free(dim + i)).collect();
        dim += n;

        let mut terms = Vec::new();
        let zero = Slot::Fixed(0.0);
        for i in 0..n {
            if let Slot::Free(v) = c_slots[i] {
                terms.push(Term {
                    coefs: vec![(v, -1.0)],
                    constant: inst.eh_budget_prefix[i],
                });
                if let Some(floor) = &inst.es_floor_prefix {
                    terms.push(Term {
                        coefs: vec![(v, 1.0)],
                        constant: -floor[i],
                    });
                }
            }
            let prev = if i == 0 { zero } else { c_slots[i - 1] };
            let t = difference(prev, c_slots[i]);
            if t.coefs.is_empty() {
                if !(t.constant > 0.0) {
                    return Err(Error::Infeasible(format!(
                        "pinned consumption forces zero EH power in epoch {}",
                        i + 1
                    )));
                }
            } else {
                terms.push(t);
            }
            let prev = if i == 0 { zero } else { d_slots[i - 1] };
            terms.push(difference(prev, d_slots[i]));
        }
        if let Slot::Free(v) = d_slots[n - 1] {
            terms.push(Term {
                coefs: vec![(v, -1.0)],
                constant: inst.bo_budget,
            });
        }
        Ok(Self {
            inst,
            c_slots,
            d_slots,
            dim,
            terms,
        })
    }

    fn start(&self, start: InteriorStart) -> Result<DVector<f64>> {
        let w = start.0;
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "interior start weight must lie in (0, 1), got {w}"
            )));
        }
        let inst = self.inst;
        let n = inst.len();
        let mut z = DVector::zeros(self.dim);
        let total: f64 = inst.tau.iter().sum();
        let mut elapsed = 0.0;
        for i in 0..n {
            elapsed += inst.tau[i];
            if let Slot::Free(v) = self.c_slots[i] {
                let upper = inst.eh_budget_prefix[i];
                let floor = inst
                    .es_floor_prefix
                    .as_ref()
                    .map_or(0.0, |f| f[i].max(0.0));
                z[v] = floor + w * (upper - floor);
            }
            if let Slot::Free(v) = self.d_slots[i] {
                z[v] = w * inst.bo_budget * elapsed / total;
            }
        }
        if self.terms.iter().any(|t| !(t.eval(&z) > 0.0)) {
            return Err(Error::Infeasible(
                "tunnel has no strictly interior starting point".into(),
            ));
        }
        Ok(z)
    }

    fn powers(&self, z: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let n = self.inst.len();
        let mut p_h = Vec::with_capacity(n);
        let mut p_b = Vec::with_capacity(n);
        let (mut c_prev, mut d_prev) = (0.0, 0.0);
        for i in 0..n {
            let c = slot_value(self.c_slots[i], z);
            let d = slot_value(self.d_slots[i], z);
            p_h.push((c - c_prev) / self.inst.tau[i]);
            p_b.push((d - d_prev) / self.inst.tau[i]);
            c_prev = c;
            d_prev = d;
        }
        (p_h, p_b)
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        let (p_h, p_b) = self.powers(z);
        self.inst
            .tau
            .iter()
            .zip(p_h.iter().zip(&p_b))
            .map(|(&t, (&h, &b))| crate::model::epoch_throughput(t, h, b))
            .sum()
    }

    /// Barrier value `−t·G(z) − Σ ln slack`, or `None` outside the domain.
    fn value(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let mut log_sum = 0.0;
        for term in &self.terms {
            let s = term.eval(z);
            if !(s > 0.0) {
                return None;
            }
            log_sum += s.ln();
        }
        Some(-t * self.objective(z) - log_sum)
    }

    fn gradient_hessian(&self, z: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.inst.len();
        let mut g = DVector::zeros(self.dim);
        let mut hess = DMatrix::zeros(self.dim, self.dim);
        let (p_h, p_b) = self.powers(z);
        for k in 0..n {
            let cv = curvature(p_h[k], p_b[k]);
            let inv_tau = 1.0 / self.inst.tau[k];
            // the epoch depends on c_k − c_{k−1} and d_k − d_{k−1}
            let mut u: Vec<(usize, f64)> = Vec::with_capacity(2);
            let mut v: Vec<(usize, f64)> = Vec::with_capacity(2);
            if let Slot::Free(i) = self.c_slots[k] {
                u.push((i, 1.0));
            }
            if k > 0 {
                if let Slot::Free(i) = self.c_slots[k - 1] {
                    u.push((i, -1.0));
                }
            }
            if let Slot::Free(i) = self.d_slots[k] {
                v.push((i, 1.0));
            }
            if k > 0 {
                if let Slot::Free(i) = self.d_slots[k - 1] {
                    v.push((i, -1.0));
                }
            }
            for &(i, a) in &u {
                g[i] -= t * cv.f_h * a;
            }
            for &(i, a) in &v {
                g[i] -= t * cv.f_b * a;
            }
            let scale = -t * inv_tau;
            for &(i, a) in &u {
                for &(j, b) in &u {
                    hess[(i, j)] += scale * cv.f_hh * a * b;
                }
                for &(j, b) in &v {
                    hess[(i, j)] += scale * cv.f_hb * a * b;
                    hess[(j, i)] += scale * cv.f_hb * a * b;
                }
            }
            for &(i, a) in &v {
                for &(j, b) in &v {
                    hess[(i, j)] += scale * cv.f_bb * a * b;
                }
            }
        }
        for term in &self.terms {
            let s = term.eval(z);
            for &(i, a) in &term.coefs {
                g[i] -= a / s;
                for &(j, b) in &term.coefs {
                    hess[(i, j)] += a * b / (s * s);
                }
            }
        }
        (g, hess)
    }

    fn newton_direction(g: &DVector<f64>, hess: DMatrix<f64>) -> Option<DVector<f64>> {
        let rhs = -g;
        if let Some(chol) = hess.clone().cholesky() {
            return Some(chol.solve(&rhs));
        }
        let diag_max = hess.diagonal().amax().max(1.0);
        let mut reg = 1e-14 * diag_max;
        for _ in 0..20 {
            let shifted = &hess + DMatrix::identity(hess.nrows(), hess.ncols()) * reg;
            if let Some(chol) = shifted.cholesky() {
                return Some(chol.solve(&rhs));
            }
            reg *= 100.0;
        }
        None
    }
}

/// Solve the joint throughput-maximization program numerically; the returned
/// objective is within `tolerance` (absolute, in nats) of the optimum.
pub fn solve_numeric(instance: &ConvexInstance, tolerance: f64) -> Result<NumericSolution> {
    solve_numeric_from(instance, tolerance, InteriorStart::default())
}

pub fn solve_numeric_from(
    instance: &ConvexInstance,
    tolerance: f64,
    start: InteriorStart,
) -> Result<NumericSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig("oracle tolerance must be positive".into()));
    }
    let barrier = Barrier::new(instance)?;
    let mut z = barrier.start(start)?;
    let m = barrier.terms.len() as f64;
    let mut t = 1.0;
    let mut newton_steps = 0;
    const MU: f64 = 10.0;
    loop {
        // centering
        let mut converged = false;
        for _ in 0..200 {
            let (g, hess) = barrier.gradient_hessian(&z, t);
            let step = Barrier::newton_direction(&g, hess).ok_or(Error::NonConvergence {
                what: "oracle Newton system",
                iterations: newton_steps,
            })?;
            newton_steps += 1;
            let decrement = -g.dot(&step);
            // decrement / t bounds the objective error left by centering
            let tiny_step = step.amax() <= 1e-14 * (1.0 + z.amax());
            if decrement <= 1e-10 || decrement <= 1e-3 * tolerance * t || tiny_step {
                converged = true;
                break;
            }
            let f0 = barrier.value(&z, t).expect("iterate stays interior");
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial = &z + &step * alpha;
                if let Some(f1) = barrier.value(&trial, t) {
                    if f1 <= f0 - 0.25 * alpha * decrement && f1 < f0 {
                        z = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no representable improvement left
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                what: "oracle centering",
                iterations: newton_steps,
            });
        }
        if m / t <= tolerance {
            break;
        }
        t *= MU;
        if t > 1e18 {
            break;
        }
    }
    let (p_h, p_b) = barrier.powers(&z);
    let objective = throughput_of(&instance.tau, &p_h, &p_b)?;
    Ok(NumericSolution {
        p_h,
        p_b,
        objective,
        newton_steps,
    })
}

/// Status of one cumulative constraint at a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Active {
    No,
    Upper,
    Lower,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Largest relative mismatch between the marginal throughput per joule
    /// of an epoch and the multiplier sum that should equal it.
    pub stationarity: f64,
    /// Largest normalized `|multiplier × slack|`.
    pub slackness: f64,
    /// Smallest reconstructed multiplier that must be non-negative.
    pub min_dual: f64,
    /// Largest normalized constraint violation.
    pub primal: f64,
    pub lambda: Vec<f64>,
    pub pi: Vec<f64>,
    pub nu: Vec<f64>,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.slackness)
            .max(self.primal)
            .max(-self.min_dual.min(0.0))
    }
}

/// Least-squares block values `D_k` for marginals `a_k`, where `D` may only
/// change right after an active constraint and must vanish past an inactive
/// final constraint. Returns `(D_k, δ_n = D_n − D_{n+1})`.
fn block_fit(a: &[f64], tau: &[f64], active: &[Active]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut d = vec![0.0; n];
    let mut start = 0;
    for k in 0..n {
        let closes = active[k] != Active::No || k == n - 1;
        if !closes {
            continue;
        }
        let value = if active[k] == Active::No {
            0.0
        } else {
            let (num, den) = (start..=k).fold((0.0, 0.0), |(num, den), i| {
                let w = tau[i] * tau[i];
                (num + w * a[i], den + w)
            });
            num / den
        };
        d[start..=k].iter_mut().for_each(|x| *x = value);
        start = k + 1;
    }
    let delta = (0..n)
        .map(|k| d[k] - if k + 1 < n { d[k + 1] } else { 0.0 })
        .collect();
    (d, delta)
}

/// Reconstruct multipliers for `(p_h, p_b)` from stationarity and report how
/// far the pair is from satisfying the optimality conditions.
pub fn kkt_residuals(instance: &ConvexInstance, p_h: &[f64], p_b: &[f64]) -> KktReport {
    let n = instance.len();
    let scale = instance.energy_scale();
    let active_tol = 1e-7 * scale;
    let tau = &instance.tau;

    let mut c = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let (mut ca, mut da) = (0.0, 0.0);
    for k in 0..n {
        ca += tau[k] * p_h[k];
        da += tau[k] * p_b[k];
        c.push(ca);
        d.push(da);
    }

    let mut primal: f64 = 0.0;
    let eh_active: Vec<Active> = (0..n)
        .map(|k| {
            let up_slack = instance.eh_budget_prefix[k] - c[k];
            primal = primal.max(-up_slack / scale);
            let upper = up_slack <= active_tol;
            let lower = instance.es_floor_prefix.as_ref().is_some_and(|f| {
                let s = c[k] - f[k];
                primal = primal.max(-s / scale);
                s <= active_tol
            });
            match (upper, lower) {
                (true, true) => Active::Both,
                (true, false) => Active::Upper,
                (false, true) => Active::Lower,
                (false, false) => Active::No,
            }
        })
        .collect();
    let bo_active: Vec<Active> = (0..n)
        .map(|k| {
            let s = instance.bo_budget - d[k];
            primal = primal.max(-s / scale);
            if s <= active_tol {
                Active::Upper
            } else {
                Active::No
            }
        })
        .collect();

    let mut a_h = Vec::with_capacity(n);
    let mut a_b = Vec::with_capacity(n);
    for k in 0..n {
        let cv = curvature(p_h[k], p_b[k]);
        a_h.push(cv.f_h);
        a_b.push(cv.f_b);
    }
    let (fit_h, delta_h) = block_fit(&a_h, tau, &eh_active);
    let (fit_b, delta_b) = block_fit(&a_b, tau, &bo_active);

    let stationarity = (0..n)
        .map(|k| {
            let rh = (a_h[k] - fit_h[k]).abs() / a_h[k].abs().max(f64::MIN_POSITIVE);
            let rb = (a_b[k] - fit_b[k]).abs() / a_b[k].abs().max(f64::MIN_POSITIVE);
            if a_h[k].is_finite() && a_b[k].is_finite() {
                rh.max(rb)
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);

    let mut lambda = vec![0.0; n];
    let mut pi = vec![0.0; n];
    let mut nu = vec![0.0; n];
    let mut min_dual = f64::INFINITY;
    let mut slackness: f64 = 0.0;
    let marginal_scale = a_h
        .iter()
        .chain(&a_b)
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for k in 0..n {
        match eh_active[k] {
            Active::Upper => {
                lambda[k] = delta_h[k];
                min_dual = min_dual.min(delta_h[k]);
            }
            Active::Lower => {
                pi[k] = -delta_h[k];
                min_dual = min_dual.min(-delta_h[k]);
            }
            Active::Both => {
                lambda[k] = delta_h[k].max(0.0);
                pi[k] = (-delta_h[k]).max(0.0);
            }
            Active::No => {}
        }
        if bo_active[k] == Active::Upper {
            nu[k] = delta_b[k];
            min_dual = min_dual.min(delta_b[k]);
        }
        let up_slack = (instance.eh_budget_prefix[k] - c[k]).abs();
        slackness = slackness.max(lambda[k] * up_slack / (marginal_scale * scale));
        if let Some(f) = &instance.es_floor_prefix {
            slackness = slackness.max(pi[k] * (c[k] - f[k]).abs() / (marginal_scale * scale));
        }
        slackness =
            slackness.max(nu[k] * (instance.bo_budget - d[k]).abs() / (marginal_scale * scale));
    }
    if !min_dual.is_finite() {
        min_dual = 0.0;
    }
    KktReport {
        stationarity,
        slackness,
        min_dual: min_dual / marginal_scale,
        primal,
        lambda,
        pi,
        nu,
    }
}
