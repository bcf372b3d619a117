//! Randomized invariants of the solvers, the oracle and the simulator.

mod common;

use ehbf::bo_solver::{
    bo_power_from_duals, bo_powers_for_dual, duals_from_powers, eh_power_from_duals,
};
use ehbf::eh_solver::{solve_eh, EhSolverConfig};
use ehbf::model::{check_feasibility, TransmissionPolicy};
use ehbf::oracle::{
    negative_throughput_hessian, solve_numeric, solve_numeric_from, ConvexInstance, InteriorStart,
};
use ehbf::simulator::arrivals::{generate_arrivals, ArrivalModel};
use ehbf::simulator::replay::replay;
use ehbf::{solve_joint, JointConfig};
use proptest::prelude::*;

use common::rel_diff;
use common::strategies::{schedule, schedule_with_capacity};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bo_spending_decreases_in_the_dual(s in schedule(12)) {
        let p_h = solve_eh(&s, &EhSolverConfig::default()).unwrap().p_h;
        let durations: Vec<f64> = s.epochs().iter().map(|e| e.duration).collect();
        let mut previous = f64::INFINITY;
        for i in -12..=12 {
            let nu = 10f64.powf(i as f64 * 0.5);
            let p_b = bo_powers_for_dual(&p_h, nu).unwrap();
            let used: f64 = durations.iter().zip(&p_b).map(|(t, p)| t * p).sum();
            prop_assert!(used < previous, "nu={nu} used={used} previous={previous}");
            previous = used;
        }
    }

    #[test]
    fn closed_forms_reproduce_joint_powers((s, cap) in schedule_with_capacity(12), finite in any::<bool>()) {
        let e_max = if finite { cap } else { f64::INFINITY };
        let sol = solve_joint(&s, &JointConfig::with_capacity(e_max)).unwrap();
        for (&h, &b) in sol.policy.p_h().iter().zip(sol.policy.p_b()) {
            let (a, bb) = duals_from_powers(h, b);
            prop_assert!(rel_diff(eh_power_from_duals(a, bb), h) < 1e-8);
            prop_assert!(rel_diff(bo_power_from_duals(a, bb), b) < 1e-8);
        }
        // every epoch shares the BO dual
        prop_assert!(sol.bo.a.len() == s.len());
    }

    #[test]
    fn joint_solution_is_feasible_and_exhausts_energy((s, cap) in schedule_with_capacity(16), finite in any::<bool>()) {
        let e_max = if finite { Some(cap) } else { None };
        let sol = solve_joint(&s, &JointConfig::with_capacity(e_max.unwrap_or(f64::INFINITY))).unwrap();
        let report = check_feasibility(&sol.policy, &s, e_max);
        prop_assert!(report.feasible, "{:?}", report.first_violation);
        let eh = sol.policy.eh_consumed();
        prop_assert!((eh[eh.len() - 1] - s.total_harvest()).abs() <= s.feasibility_tolerance());
        let bo = sol.policy.bo_consumed();
        prop_assert!(rel_diff(bo[bo.len() - 1], s.bo_initial()) <= 1e-8);
        prop_assert!(sol.diagnostics.nu_n[..s.len() - 1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unlimited_storage_power_never_decreases(s in schedule(20)) {
        let p = solve_eh(&s, &EhSolverConfig::default()).unwrap().p_h;
        prop_assert!(p.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    }

    #[test]
    fn oracle_runs_agree_from_different_starts((s, cap) in schedule_with_capacity(8), w in 0.1..0.9f64) {
        let inst = ConvexInstance::from_schedule(&s, Some(cap)).unwrap();
        let tol = 1e-9;
        let a = solve_numeric(&inst, tol).unwrap();
        let b = solve_numeric_from(&inst, tol, InteriorStart(w)).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 10.0 * tol * a.objective.max(1.0));
        for (x, y) in a.p_h.iter().zip(&b.p_h).chain(a.p_b.iter().zip(&b.p_b)) {
            prop_assert!((x - y).abs() <= 1e-3 * x.abs().max(1e-3), "{x} vs {y}");
        }
    }

    #[test]
    fn throughput_hessian_is_positive_definite(tau in 0.01..10.0f64, h in -4.0..4.0f64, b in -4.0..4.0f64) {
        let m = negative_throughput_hessian(tau, 10f64.powf(h), 10f64.powf(b));
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        prop_assert!(tr > 0.0);
        prop_assert!(det > -1e-12 * tr * tr);
        let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[0][1]).sqrt();
        prop_assert!(0.5 * (tr - disc) >= -1e-12 * tr);
    }

    #[test]
    fn replay_conserves_energy((s, cap) in schedule_with_capacity(16), r_c in 0.05..1.0f64, jitter in 0.3..1.7f64) {
        let sol = solve_joint(&s, &JointConfig::with_capacity(cap)).unwrap();
        let p_h: Vec<f64> = sol.policy.p_h().iter().enumerate()
            .map(|(k, &p)| if k % 2 == 0 { p * jitter } else { p })
            .collect();
        let policy = TransmissionPolicy::new(s.epochs(), p_h, sol.policy.p_b().to_vec()).unwrap();
        let r = replay(&s, &policy, cap * r_c).unwrap();
        let balance = r.harvested - r.consumed - r.wasted_energy - r.residual;
        prop_assert!(balance.abs() <= 1e-9 * r.harvested);
        prop_assert!(r.wasted_energy >= 0.0);

        let nominal = replay(&s, &sol.policy, cap * r_c).unwrap();
        prop_assert!(nominal.l_g <= 1.0 + 1e-12);
        let identity = replay(&s, &sol.policy, cap).unwrap();
        prop_assert_eq!(identity.l_g, 1.0);
    }

    #[test]
    fn arrivals_are_seeded(seed in any::<u64>(), c in 0.0..1e-2f64) {
        let model = ArrivalModel {
            total_energy_eh: 5.0,
            per_event_energy: 0.05,
            c,
            horizon: 500.0,
            bo_initial: 1.0,
            seed,
        };
        let a = generate_arrivals(&model).unwrap();
        prop_assert_eq!(&a, &generate_arrivals(&model).unwrap());
        prop_assert_eq!(a.events()[0].time, 0.0);
    }
}

fn curve_length(durations: &[f64], powers: &[f64]) -> f64 {
    durations
        .iter()
        .zip(powers)
        .map(|(t, p)| t.hypot(t * p))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn epoch_durations_cover_the_horizon(s in schedule(30)) {
        let total: f64 = s.epochs().iter().map(|e| e.duration).sum();
        prop_assert!((total - s.deadline()).abs() <= 1e-12 * s.deadline());
        prop_assert!(s.epochs().iter().all(|e| e.duration > 0.0));
    }

    #[test]
    fn throughput_is_monotone_and_concave(
        tau in 0.01..10.0f64,
        x in (0.0..100.0f64, 0.0..100.0f64),
        y in (0.0..100.0f64, 0.0..100.0f64),
        alpha in 0.0..1.0f64,
        bump in 1e-6..1.0f64,
    ) {
        use ehbf::model::epoch_throughput as g;
        prop_assert!(g(tau, x.0 + bump, x.1) > g(tau, x.0, x.1));
        prop_assert!(g(tau, x.0, x.1 + bump) > g(tau, x.0, x.1));
        let mid = (alpha * x.0 + (1.0 - alpha) * y.0, alpha * x.1 + (1.0 - alpha) * y.1);
        let chord = alpha * g(tau, x.0, x.1) + (1.0 - alpha) * g(tau, y.0, y.1);
        prop_assert!(g(tau, mid.0, mid.1) >= chord - 1e-12);
    }

    #[test]
    fn feasibility_matches_sampled_integration(
        (s, cap) in schedule_with_capacity(10),
        scales in prop::collection::vec(0.2..3.0f64, 10),
        finite in any::<bool>(),
        samples in prop::collection::vec(0.0..1.0f64, 200),
    ) {
        let e_max = finite.then_some(cap);
        let base = solve_eh(&s, &EhSolverConfig::with_capacity(e_max.unwrap_or(f64::INFINITY))).unwrap().p_h;
        let p_h: Vec<f64> = base.iter().zip(scales.iter().cycle()).map(|(p, f)| p * f).collect();
        let p_b = vec![0.5 * s.bo_initial() / s.deadline(); s.len()];
        let policy = TransmissionPolicy::new(s.epochs(), p_h, p_b).unwrap();
        let report = check_feasibility(&policy, &s, e_max);
        let tol = report.tolerance;
        let harvest = s.harvest_curve();
        let storage = e_max.map(|e| s.storage_curve(e));
        let violated_at = |t: f64, left: bool| {
            let used = policy.eh_consumed_at(t);
            let avail = if left { harvest.value_before(t) } else { harvest.value_at(t) };
            // the floor counts the arrival landing at t
            let floor = storage.as_ref().map_or(f64::NEG_INFINITY, |c| c.value_at(t));
            used > avail + tol || (t < s.deadline() && used < floor - tol)
        };
        let mut sampled = samples.iter().any(|u| violated_at(u * s.deadline(), false));
        sampled |= s.epochs().iter().any(|e| violated_at(e.end(), true));
        prop_assert_eq!(report.feasible, !sampled);
    }

    #[test]
    fn taut_string_is_shortest((s, cap) in schedule_with_capacity(12), finite in any::<bool>(), theta in 0.0..1.0f64) {
        let e_max = if finite { cap } else { f64::INFINITY };
        let opt = solve_eh(&s, &EhSolverConfig::with_capacity(e_max)).unwrap().p_h;
        let durations: Vec<f64> = s.epochs().iter().map(|e| e.duration).collect();
        // spending each arrival within its own epoch is always feasible
        let greedy: Vec<f64> = s.events().iter().zip(&durations).map(|(a, t)| a.energy / t).collect();
        let mixed: Vec<f64> = opt.iter().zip(&greedy).map(|(o, g)| theta * g + (1.0 - theta) * o).collect();
        let best = curve_length(&durations, &opt);
        prop_assert!(best <= curve_length(&durations, &greedy) * (1.0 + 1e-12));
        prop_assert!(best <= curve_length(&durations, &mixed) * (1.0 + 1e-12));
    }

    #[test]
    fn equal_eh_powers_give_equal_bo_powers(h in -3.0..3.0f64, nu in -3.0..3.0f64, n in 1usize..8) {
        let p = bo_powers_for_dual(&vec![10f64.powf(h); n], 10f64.powf(nu)).unwrap();
        prop_assert!(p.iter().all(|&b| b == p[0]));
    }
}

#[test]
fn large_dual_starves_the_bo_sensor() {
    let p = bo_powers_for_dual(&[0.1, 1.0, 10.0], 1e6).unwrap();
    assert!(p.iter().all(|&b| b > 0.0 && b < 1e-6), "{p:?}");
}

#[test]
fn slope_evaluations_grow_at_most_quadratically() {
    use ehbf::model::{Arrival, EventSchedule};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let mut counts = Vec::new();
    for &n in &[10usize, 100, 1000] {
        let events: Vec<Arrival> = (0..n)
            .map(|k| Arrival::new(k as f64, rng.random_range(0.01..1.0)))
            .collect();
        let s = EventSchedule::new(events, 1.0, n as f64).unwrap();
        for e_max in [f64::INFINITY, 1.5] {
            let evals = solve_eh(&s, &EhSolverConfig::with_capacity(e_max)).unwrap().slope_evaluations;
            assert!(evals <= (n * (n + 1) / 2) as u64, "n={n} evals={evals}");
            counts.push((n, e_max, evals));
        }
    }
    for e_max in [f64::INFINITY, 1.5] {
        let c: Vec<u64> = counts.iter().filter(|x| x.1 == e_max).map(|x| x.2).collect();
        assert!(c[2] as f64 <= 100.0 * c[1] as f64 && c[1] as f64 <= 100.0 * c[0] as f64, "{c:?}");
    }
}
