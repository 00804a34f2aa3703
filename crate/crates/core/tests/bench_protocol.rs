mod support;

use proptest::prelude::*;
use saw_core::bench::{
    disturbance_trial, energy_metric, rotation_metrics, run_disturbance_sweep, run_sweep,
    score_disturbance_logs, velocity_metric, BenchReport, Cell, Direction, DirectionGrid,
    DisturbanceGrid, ReportMetadata, TrialOutcome, TrialProtocol, DEFAULT_CIRCLE_RADIUS,
};
use saw_core::config::{ExperimentConfig, Preset};
use saw_core::policy::{HoldPose, StanceController};
use saw_core::{derive_seed, Command, UnitQuaternion};
use support::synthetic_log;

fn grid(forces: Vec<f64>, durations: Vec<f64>, trials: u32) -> DisturbanceGrid {
    DisturbanceGrid {
        directions: vec![Direction::PosX, Direction::NegX],
        forces,
        durations,
        trials,
        stop_on_first_failure: true,
    }
}

fn ok(recovered: bool) -> TrialOutcome {
    TrialOutcome {
        recovered,
        blowup: false,
    }
}

#[test]
fn five_trials_stop_at_first_failure() {
    let g = grid(vec![10.0, 20.0, 30.0], vec![0.2, 0.3], 5);
    // a cell fails at trial k = (force / 10) + (duration == 0.3), or never when that exceeds 5
    let fails_at = |c: &Cell| {
        (c.force / 10.0) as u32
            + u32::from(c.duration > 0.25)
            + u32::from(c.direction == Direction::NegX)
    };
    let results = run_sweep(&g, 4, true, |c, k, _| Ok(ok(k != fails_at(c)))).unwrap();
    assert_eq!(results.len(), 12);
    for r in &results {
        let cell = Cell {
            direction: r.direction,
            force: r.force,
            duration: r.duration,
        };
        let k = fails_at(&cell);
        let attempts = k.min(5);
        assert_eq!(r.attempts, attempts, "{cell:?}");
        assert_eq!(r.successes, if k <= 5 { k - 1 } else { 5 });
        assert_eq!(r.trials.len() as u32, r.attempts);
        assert!((r.success_pct - 100.0 * r.successes as f64 / r.attempts as f64).abs() < 1e-12);
        assert!((r.impulse - r.force * r.duration).abs() < 1e-12);
    }
}

#[test]
fn sweep_seeds_are_derived_per_cell_and_trial() {
    let g = grid(vec![10.0], vec![0.2, 0.5], 3);
    let results = run_sweep(&g, 77, false, |_, _, _| Ok(ok(true))).unwrap();
    for (i, r) in results.iter().enumerate() {
        let cell_seed = derive_seed(77, i as u64);
        assert_eq!(r.seed, Some(cell_seed));
        for t in &r.trials {
            assert_eq!(t.seed, Some(derive_seed(cell_seed, t.trial as u64)));
        }
    }
}

#[test]
fn parallel_and_serial_sweeps_agree() {
    let g = grid(vec![10.0, 40.0], vec![0.2, 0.3, 0.5], 5);
    let trial = |c: &Cell, k: u32, seed: u64| {
        Ok(ok(!(seed ^ (c.force as u64) ^ k as u64).is_multiple_of(3)))
    };
    let a = run_sweep(&g, 5, true, trial).unwrap();
    let b = run_sweep(&g, 5, false, trial).unwrap();
    assert_eq!(a, b);
}

fn bench_config() -> ExperimentConfig {
    ExperimentConfig::load(None, Some(Preset::BalanceSmoke)).unwrap()
}

#[test]
fn push_is_applied_once_after_settling() {
    let cfg = bench_config();
    let protocol = TrialProtocol {
        settle: 1.0,
        recovery: 1.0,
    };
    let cell = Cell {
        direction: Direction::NegX,
        force: 30.0,
        duration: 0.3,
    };
    let mut env = cfg.bench_env(3.0).unwrap();
    let mut ctrl = StanceController::new(&cfg.model);
    let log = disturbance_trial(&mut env, &mut ctrl, &cell, &protocol, 3).unwrap();
    log.validate().unwrap();
    let pushes: Vec<_> = log
        .records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.push.map(|p| (i, p)))
        .collect();
    assert_eq!(pushes.len(), 1);
    let (i, p) = pushes[0];
    assert_eq!(i, 50);
    assert_eq!(p.force, -30.0);
    assert_eq!(p.duration, 0.3);
    assert!(log.records.iter().all(|r| r.command.is_standing()));
    let active = log.records.iter().filter(|r| r.push_active).count();
    assert_eq!(active, 15);
    assert_eq!(log.header.seed, Some(3));
    let planned = log.header.planned_push.unwrap();
    assert_eq!(
        (planned.force, planned.duration, planned.start_time),
        (-30.0, 0.3, 1.0)
    );
}

#[test]
fn live_sweep_with_limp_controller_fails_every_cell_once() {
    let cfg = bench_config();
    let g = grid(vec![10.0, 20.0], vec![0.2], 5);
    let protocol = TrialProtocol {
        settle: 1.0,
        recovery: 3.0,
    };
    let zeros = HoldPose(vec![0.0; cfg.model.num_actuators()]);
    let limp = HoldPose(vec![-1.0; cfg.model.num_actuators()]);
    for ctrl in [zeros, limp] {
        let (results, logs) =
            run_disturbance_sweep(|| cfg.bench_env(5.0), &ctrl, &g, &protocol, 1, true, true)
                .unwrap();
        assert_eq!(logs.len(), results.len());
        for r in &results {
            // holding the zero-action pose still topples under the push or on its own
            assert_eq!(r.attempts, 1, "{r:?}");
            assert_eq!(r.successes, 0);
        }
    }
}

#[test]
fn live_sweep_matches_log_rescoring() {
    let cfg = bench_config();
    let g = grid(vec![15.0, 400.0], vec![0.2], 3);
    let protocol = TrialProtocol {
        settle: 1.0,
        recovery: 3.0,
    };
    let ctrl = StanceController::new(&cfg.model);
    let (live, logs) =
        run_disturbance_sweep(|| cfg.bench_env(5.0), &ctrl, &g, &protocol, 9, true, false).unwrap();
    let small = live.iter().find(|r| r.force == 15.0).unwrap();
    assert_eq!((small.attempts, small.successes), (3, 3));
    let big = live.iter().find(|r| r.force == 400.0).unwrap();
    assert_eq!((big.attempts, big.successes), (1, 0));

    let rescored = score_disturbance_logs(&logs, g.trials, g.stop_on_first_failure).unwrap();
    assert_eq!(rescored.len(), live.len());
    for (a, b) in live.iter().zip(&rescored) {
        assert_eq!(
            (a.direction, a.force, a.duration),
            (b.direction, b.force, b.duration)
        );
        assert_eq!((a.attempts, a.successes), (b.attempts, b.successes));
        let seeds =
            |r: &saw_core::bench::TrialResult| r.trials.iter().map(|t| t.seed).collect::<Vec<_>>();
        assert_eq!(seeds(a), seeds(b));
    }

    // the same logs through JSONL still score identically
    let mut reread = Vec::new();
    for (name, log) in &logs {
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        reread.push((
            name.clone(),
            saw_core::EpisodeLog::read_jsonl(&buf[..]).unwrap(),
        ));
    }
    assert_eq!(score_disturbance_logs(&reread, 3, true).unwrap(), rescored);
}

#[test]
fn report_grid_has_force_by_duration_cells() {
    let g = DisturbanceGrid {
        directions: vec![Direction::PosX],
        ..grid(vec![10.0, 20.0], vec![0.2, 0.3, 0.5], 5)
    };
    let results = run_sweep(&g, 2, true, |c, k, _| Ok(ok(k < (c.force as u32) / 5))).unwrap();
    let mut report = BenchReport::new(ReportMetadata {
        generator: "test".into(),
        ..Default::default()
    });
    report.disturbance = DirectionGrid::group(&results);
    let d = &report.disturbance[0];
    assert_eq!(d.forces, vec![10.0, 20.0]);
    assert_eq!(d.durations, vec![0.2, 0.3, 0.5]);
    assert_eq!(d.cells.len(), 6);
    assert_eq!(d.cell(20.0, 0.5).unwrap().attempts, 4);
    let back = BenchReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
    let csv = report.to_csv();
    assert_eq!(csv.lines().filter(|l| l.starts_with("cell,")).count(), 6);
    assert!(csv.contains("cell,+x,20,0.5,10,"));
    assert_eq!(report.to_svg().matches("class=\"cell\"").count(), 6);
}

// metric oracles on synthetic logs

#[test]
fn rotation_oracle() {
    let rate = 14.5 / 30.0;
    let log = synthetic_log(0.02, 1501, |t, o, c| {
        o.torso_orientation = UnitQuaternion::from_yaw(rate * t);
        o.foot_pos = [[0.0, 0.1, 0.0], [0.0, -0.1, 0.0]];
        *c = Command::new(0.0, 0.0, 0.5);
    });
    let r = rotation_metrics(&log, 0.5, 30.0, DEFAULT_CIRCLE_RADIUS).unwrap();
    assert_eq!(r.theta_c, 15.0);
    assert!((r.rotation - 14.5).abs() < 1e-12);
    assert!((r.angular_error - 0.5).abs() < 1e-12);
    assert_eq!(r.lateral_drift, 0.0);

    let drift = synthetic_log(0.02, 20, |t, o, _| {
        o.foot_pos = [
            [0.0, 0.1, 0.0],
            [0.0, if t > 0.1 { -0.5 } else { -0.1 }, 0.0],
        ];
    });
    let r = rotation_metrics(&drift, 0.5, 1.0, 0.3048).unwrap();
    assert!((r.lateral_drift - 0.1952).abs() < 1e-15);
}

#[test]
fn velocity_oracle() {
    // 2 s standing, 10 s at 0.9 m/s under a 1 m/s command, then stopped
    let log = synthetic_log(0.02, 751, |t, o, c| {
        let walking = t > 2.0 - 1e-9 && t < 12.0 - 1e-9;
        o.base_pos = [0.9 * (t - 2.0).clamp(0.0, 10.0), 0.0, 0.9];
        if walking {
            *c = Command::new(1.0, 0.0, 0.0);
        }
    });
    let r = velocity_metric(&log, 1.0, 10.0).unwrap();
    assert_eq!(r.d_c, 10.0);
    assert!((r.d_r - 9.0).abs() < 1e-12, "{r:?}");
    assert!((r.start_time - 1.98).abs() < 1e-12);
    // first standing record with finite-difference speed under the stop threshold
    assert!((r.stop_time - 12.02).abs() < 1e-12);
    assert!((r.mean_velocity - 0.9).abs() < 1e-12, "{r:?}");
}

#[test]
fn energy_oracle() {
    // two motors at +5 W and -5 W for 2 s while covering 1 m
    let log = synthetic_log(0.01, 201, |t, o, _| {
        o.base_pos = [0.5 * t, 0.0, 0.9];
        o.motor_vel = vec![1.0, -1.0];
        o.applied_torque = vec![5.0, 5.0];
    });
    let r = energy_metric(&log).unwrap();
    assert!((r.positive_work - 10.0).abs() < 1e-12);
    assert!((r.distance - 1.0).abs() < 1e-12);
    assert!((r.energy_per_meter.unwrap() - 10.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn attempts_end_at_first_failure(outcomes in prop::collection::vec(any::<bool>(), 5), trials in 1u32..=5) {
        let g = DisturbanceGrid { directions: vec![Direction::PosX], ..grid(vec![10.0], vec![0.2], trials) };
        let r = &run_sweep(&g, 0, true, |_, k, _| Ok(ok(outcomes[k as usize - 1]))).unwrap()[0];
        let first_fail = outcomes[..trials as usize].iter().position(|o| !o);
        let expect = first_fail.map_or(trials, |i| i as u32 + 1);
        prop_assert_eq!(r.attempts, expect);
        prop_assert_eq!(r.successes, first_fail.map_or(trials, |i| i as u32));
    }

    #[test]
    fn commanded_quantities_are_rate_times_duration(omega in -1.0f64..1.0, v in 0.1f64..2.0, secs in 1.0f64..30.0) {
        let dt = 0.02;
        let n = (secs / dt).round() as usize + 1;
        let spin = synthetic_log(dt, n, |_, _, _| {});
        let r = rotation_metrics(&spin, omega, secs, 0.3).unwrap();
        prop_assert_eq!(r.theta_c, omega * secs);
        prop_assert_eq!(r.angular_error, (omega * secs).abs());

        let walk = synthetic_log(dt, n + 200, |t, o, c| {
            o.base_pos = [v * t.min(secs), 0.0, 0.9];
            if t < secs - 1e-9 {
                *c = Command::new(v, 0.0, 0.0);
            }
        });
        let r = velocity_metric(&walk, v, secs).unwrap();
        prop_assert_eq!(r.d_c, v * secs);
    }
}
