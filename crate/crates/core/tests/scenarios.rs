//! Worked instances that cross module boundaries.

mod common;

use ehbf::eh_solver::{solve_eh, EhSolverConfig};
use ehbf::model::{EventSchedule, TransmissionPolicy};
use ehbf::oracle::{kkt_residuals, solve_numeric, ConvexInstance};
use ehbf::simulator::arrivals::{generate_arrivals, ArrivalModel};
use ehbf::simulator::baseline::{solve_single_sensor_baseline, solve_suboptimal_baseline};
use ehbf::simulator::sweep::{
    evaluate_schedule, sweep, ExperimentPoint, Metric, PerEventEnergy, SweepDescriptor,
    SweepVariable,
};
use ehbf::{solve_joint, Execution, JointConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_schedule, rel_diff};

#[test]
fn two_arrival_instance_matches_oracle() {
    let s = EventSchedule::from_pairs(&[(0.0, 1.0), (1.0, 3.0)], 2.0, 2.0).unwrap();
    let sol = solve_joint(&s, &JointConfig::default()).unwrap();
    assert!((sol.policy.p_h()[0] - 1.0).abs() < 1e-12);
    assert!((sol.policy.p_h()[1] - 3.0).abs() < 1e-12);
    let inst = ConvexInstance::from_schedule(&s, None).unwrap();
    let num = solve_numeric(&inst, 1e-10).unwrap();
    assert!(rel_diff(num.objective, sol.throughput()) < 1e-5);
    let kkt = kkt_residuals(&inst, sol.policy.p_h(), sol.policy.p_b());
    assert!(kkt.max_residual() <= 1e-6, "{kkt:?}");
}

#[test]
fn small_random_instances_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [3, 5] {
        for _ in 0..20 {
            let s = random_schedule(&mut rng, n);
            let sol = solve_joint(&s, &JointConfig::default()).unwrap();
            let inst = ConvexInstance::from_schedule(&s, None).unwrap();
            let num = solve_numeric(&inst, 1e-10).unwrap();
            assert!(rel_diff(num.objective, sol.throughput()) < 1e-5);
            let kkt = kkt_residuals(&inst, sol.policy.p_h(), sol.policy.p_b());
            assert!(kkt.max_residual() <= 1e-6, "{kkt:?}");
            assert!(kkt.nu[..s.len() - 1].iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn certificate_rejects_a_suboptimal_policy() {
    // [2, 4] is feasible for {0: 4, 1: 2} but the taut string is [3, 3]
    let s = EventSchedule::from_pairs(&[(0.0, 4.0), (1.0, 2.0)], 2.0, 2.0).unwrap();
    let inst = ConvexInstance::from_schedule(&s, None).unwrap();
    let kkt = kkt_residuals(&inst, &[2.0, 4.0], &[1.0, 1.0]);
    assert!(kkt.stationarity > 1e-3, "{kkt:?}");
}

#[test]
fn dominant_bo_sensor_flattens_towards_uniform() {
    // deviation from E_0^2 / T shrinks roughly like 1 / R_E
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.random_range(2..10);
        let s = random_schedule(&mut rng, n);
        let mut deviations = Vec::new();
        for ratio in [1e2, 1e4, 1e6] {
            let s = s.with_bo_initial(ratio * s.total_harvest()).unwrap();
            let sol = solve_joint(&s, &JointConfig::default()).unwrap();
            let inst = ConvexInstance::from_schedule(&s, None).unwrap();
            let num = solve_numeric(&inst, 1e-9 * sol.throughput()).unwrap();
            assert!(rel_diff(num.objective, sol.throughput()) < 1e-5);
            let flat = s.bo_initial() / s.deadline();
            let dev = sol
                .policy
                .p_b()
                .iter()
                .map(|b| (b / flat - 1.0).abs())
                .fold(0.0, f64::max);
            deviations.push(dev);
        }
        assert!(deviations[2] < 0.01, "{deviations:?}");
        assert!(deviations.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{deviations:?}");
    }
}

#[test]
fn finite_capacity_example_through_the_joint_solver() {
    let s = EventSchedule::from_pairs(&[(0.0, 4.0), (1.0, 4.0)], 1.0, 4.0).unwrap();
    let sol = solve_joint(&s, &JointConfig::with_capacity(4.0)).unwrap();
    let inst = ConvexInstance::from_schedule(&s, Some(4.0)).unwrap();
    let num = solve_numeric(&inst, 1e-10).unwrap();
    assert!((num.p_h[0] - 4.0).abs() < 1e-4 && (num.p_h[1] - 4.0 / 3.0).abs() < 1e-4);
    assert!(rel_diff(num.objective, sol.throughput()) < 1e-5);
    assert!(kkt_residuals(&inst, sol.policy.p_h(), sol.policy.p_b()).max_residual() <= 1e-6);
}

#[test]
fn homogeneous_arrivals_hit_the_expected_count() {
    let mut total = 0usize;
    let draws = 10_000;
    for seed in 0..draws {
        let m = ArrivalModel {
            total_energy_eh: 100.0,
            per_event_energy: 1.0,
            c: 0.0,
            horizon: 1000.0,
            bo_initial: 1.0,
            seed,
        };
        // the t = 0 event is added on top of the Poisson arrivals
        total += generate_arrivals(&m).unwrap().len() - 1;
    }
    let mean = total as f64 / draws as f64;
    assert!((mean / 100.0 - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn negligible_rate_leaves_only_the_initial_event() {
    let m = ArrivalModel {
        total_energy_eh: 1e-9,
        per_event_energy: 1.0,
        c: 1e-3,
        horizon: 100.0,
        bo_initial: 1.0,
        seed: 9,
    };
    let s = generate_arrivals(&m).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s.events()[0].energy, 1.0);
}

#[test]
fn single_epoch_baseline_is_optimal() {
    let s = EventSchedule::from_pairs(&[(0.0, 3.0)], 2.0, 5.0).unwrap();
    let joint = solve_joint(&s, &JointConfig::default()).unwrap();
    let base = solve_suboptimal_baseline(&s).unwrap();
    assert!(rel_diff(joint.throughput(), base.throughput()) < 1e-8);
}

#[test]
fn merged_single_arrival_spends_evenly() {
    let s = EventSchedule::from_pairs(&[(0.0, 1.5)], 2.5, 8.0).unwrap();
    let g = solve_single_sensor_baseline(&s).unwrap();
    assert!((g - 8.0 * (1.0 + 4.0 / 8.0f64).ln()).abs() < 1e-12);
}

#[test]
fn beamforming_beats_a_single_sensor_at_moderate_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(1..15);
        let s = random_schedule(&mut rng, n);
        let s = s.with_bo_initial(s.total_harvest()).unwrap();
        let joint = solve_joint(&s, &JointConfig::default()).unwrap().throughput();
        assert!(joint >= solve_single_sensor_baseline(&s).unwrap());
    }
}

#[test]
fn vanishing_energy_gives_vanishing_throughput() {
    let s = EventSchedule::from_pairs(&[(0.0, 1e-10), (1.0, 1e-10)], 1e-10, 3.0).unwrap();
    assert!(solve_joint(&s, &JointConfig::default()).unwrap().throughput() < 1e-8);
    assert!(solve_single_sensor_baseline(&s).unwrap() < 1e-8);
}

fn desk(total_energy: f64, energy_ratio: f64) -> ExperimentPoint {
    ExperimentPoint {
        total_energy,
        energy_ratio,
        variability: 30e-5,
        horizon: 7.0 * 3600.0,
        per_event: PerEventEnergy::ExpectedEvents(400.0),
        e_max_nominal: None,
        capacity_ratio: 1.0,
    }
}

#[test]
fn gain_fades_when_one_sensor_dominates() {
    // at low SNR the beamforming cross term fades like 1 / sqrt(R_E)
    let d = SweepDescriptor {
        variable: SweepVariable::EnergyRatio,
        grid: vec![1.0, 1e2, 1e4, 1e6],
        ensemble: 20,
        seed: 12,
        base: desk(10.0, 1.0),
    };
    let t = sweep(&d, Execution::Parallel).unwrap();
    let r: Vec<f64> = t.points.iter().map(|p| p.mean(Metric::RG)).collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    assert!(r[3] - 1.0 < 1e-3, "{r:?}");
}

#[test]
fn gain_fades_at_high_snr() {
    let d = SweepDescriptor {
        variable: SweepVariable::TotalEnergy,
        grid: vec![10.0, 1e3, 1e5, 1e7],
        ensemble: 20,
        seed: 13,
        base: desk(10.0, 1.0),
    };
    let t = sweep(&d, Execution::Parallel).unwrap();
    let r: Vec<f64> = t.points.iter().map(|p| p.mean(Metric::RG)).collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    assert!(r[3] - 1.0 < 0.1 * (r[0] - 1.0), "{r:?}");
}

#[test]
fn capacity_below_arrival_size_wastes_energy() {
    let m = ArrivalModel {
        total_energy_eh: 2.0,
        per_event_energy: 0.05,
        c: 1e-2,
        horizon: 200.0,
        bo_initial: 2.0,
        seed: 21,
    };
    let s = generate_arrivals(&m).unwrap();
    let point = ExperimentPoint {
        e_max_nominal: Some(0.03),
        ..desk(4.0, 1.0)
    };
    let metrics = evaluate_schedule(&s, &point).unwrap();
    assert!(metrics.capacity_loss < 1.0);
    assert!(metrics.wasted_energy > 0.0);
    // with room for every arrival the storage constraint never forces waste
    let roomy = ExperimentPoint {
        e_max_nominal: Some(0.2),
        ..point
    };
    let metrics = evaluate_schedule(&s, &roomy).unwrap();
    assert_eq!(metrics.wasted_energy, 0.0);
    let eh = solve_eh(&s, &EhSolverConfig::with_capacity(0.2)).unwrap();
    let policy = TransmissionPolicy::new(s.epochs(), eh.p_h, vec![0.01; s.len()]).unwrap();
    assert!(policy.throughput() > 0.0);
}
