use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use teleop_otg::runtime::{RuntimeHandle, RuntimeOptions, RuntimeReport};
use teleop_otg::urdf::load_urdf;
use teleop_otg_core::harness::standard_stream;
use teleop_otg_core::robot::{generate_config, RobotConfig};
use teleop_otg_core::servo::{Command, ServoMode, ServoSettings};
use teleop_otg_core::TimedWaypoint;

const DT: f64 = 0.005;

fn planar() -> RobotConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/planar_2link.urdf");
    generate_config(&load_urdf(&path).unwrap(), "base", "flange", 1.0).unwrap()
}

fn options(mode: ServoMode, initial: Vec<f64>) -> RuntimeOptions {
    let mut o = RuntimeOptions::new(ServoSettings::for_mode(mode), planar().limits, initial);
    o.time_scale = 5.0;
    o.lead_ticks = 6;
    o
}

/// Feeds `inputs` on the runtime clock, switching mode at `switch_at`, then stops.
fn drive(rt: &RuntimeHandle, inputs: &[TimedWaypoint], switch_at: Option<(f64, ServoMode)>) {
    let mut switched = false;
    for w in inputs {
        while rt.now() < w.t {
            thread::sleep(Duration::from_micros(100));
        }
        if let Some((t, m)) = switch_at {
            if !switched && w.t >= t {
                rt.set_mode(m);
                switched = true;
            }
        }
        assert!(rt.push(w.clone()));
    }
    rt.stop();
}

fn collect(rt: RuntimeHandle) -> (Vec<Command>, RuntimeReport) {
    let rx = rt.commands().unwrap().clone();
    let deadline = Instant::now() + Duration::from_secs(30);
    while !rt.is_finished() {
        assert!(Instant::now() < deadline, "runtime did not finish");
        thread::sleep(Duration::from_millis(2));
    }
    let report = rt.join();
    (rx.try_iter().collect(), report)
}

fn check_stream(cmds: &[Command], cfg: &RobotConfig) {
    let slack = 1.0 + 1e-6;
    for w in cmds.windows(2) {
        assert_eq!(w[1].tick, w[0].tick + 1);
        for j in 0..cfg.dof() {
            let dqd = (w[1].qd[j] - w[0].qd[j]).abs();
            assert!(dqd <= cfg.limits.acceleration[j] * DT * slack + 1e-9, "velocity jump {dqd} at tick {}", w[1].tick);
        }
    }
    for c in cmds {
        assert!(cfg.limits.violation(&c.q).is_none());
        for j in 0..cfg.dof() {
            assert!(c.qd[j].abs() <= cfg.limits.velocity[j] * slack);
            assert!(c.qdd[j].abs() <= cfg.limits.acceleration[j] * slack);
        }
    }
}

#[test]
fn threaded_run_bridges_the_standard_stream() {
    let cfg = planar();
    let inputs = standard_stream();
    let rt = RuntimeHandle::spawn(options(ServoMode::Precise, inputs[0].q.clone())).unwrap();
    drive(&rt, &inputs, None);
    let (cmds, report) = collect(rt);
    check_stream(&cmds, &cfg);
    assert!(report.errors.is_empty());
    assert_eq!(report.commands as usize, cmds.len());
    assert!((990..=1020).contains(&cmds.len()), "{} commands", cmds.len());
    assert!(report.replans > 50);
    assert_eq!(report.replan_latencies.len(), report.replans + report.rejected_plans);
    let last = cmds.last().unwrap();
    assert!(last.qd.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn mode_switch_mid_motion_stays_continuous() {
    let cfg = planar();
    let inputs = standard_stream();
    let rt = RuntimeHandle::spawn(options(ServoMode::Precise, inputs[0].q.clone())).unwrap();
    drive(&rt, &inputs, Some((2.0, ServoMode::Rapid)));
    assert_eq!(rt.mode(), ServoMode::Rapid);
    let (cmds, report) = collect(rt);
    check_stream(&cmds, &cfg);
    assert!(report.stats.skipped > 0 || report.stats.replans > 50);
}

#[test]
fn stopping_before_any_input_emits_nothing() {
    let rt = RuntimeHandle::spawn(options(ServoMode::Rapid, vec![0.0, 0.0])).unwrap();
    rt.stop();
    assert!(!rt.push(TimedWaypoint::new(0.0, vec![0.1, 0.1])));
    let (cmds, report) = collect(rt);
    assert!(cmds.is_empty());
    assert_eq!(report.replans, 0);
}

#[test]
fn snapshot_converges_on_a_single_target() {
    let mut o = options(ServoMode::Rapid, vec![0.0, 0.0]);
    o.keep_alive = true;
    o.command_capacity = 0;
    let rt = RuntimeHandle::spawn(o).unwrap();
    assert!(rt.commands().is_none());
    let target = vec![0.5, -0.3];
    rt.push(TimedWaypoint::new(rt.now(), target.clone()));
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let s = rt.snapshot();
        if s.started && s.q.iter().zip(&target).all(|(a, b)| (a - b).abs() < 1e-9) && s.qd.iter().all(|v| v.abs() < 1e-9) {
            break;
        }
        assert!(Instant::now() < deadline, "no convergence: {s:?}");
        thread::sleep(Duration::from_millis(5));
    }
    let report = rt.shutdown();
    assert!(report.errors.is_empty());
}

#[test]
fn spawn_rejects_bad_options() {
    let mut o = options(ServoMode::Precise, vec![0.0]);
    assert!(RuntimeHandle::spawn(o.clone()).is_err());
    o.initial = vec![0.0, 0.0];
    o.time_scale = 0.0;
    assert!(RuntimeHandle::spawn(o).is_err());
}
