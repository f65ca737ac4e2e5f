use core::f64::consts::PI;
use proptest::prelude::*;
use teleop_otg_core::filter::{filter_waypoint, FilterSettings, WaypointFilter};
use teleop_otg_core::{Error, TimedWaypoint};

fn wp(t: f64, q: &[f64]) -> TimedWaypoint {
    TimedWaypoint { t, q: q.to_vec() }
}

fn settings(cutoff_hz: f64) -> FilterSettings {
    FilterSettings { cutoff_hz, ..FilterSettings::default() }
}

#[test]
fn first_sample_passes_through() {
    let mut f = WaypointFilter::new(FilterSettings::default()).unwrap();
    assert_eq!(f.filter(&wp(0.3, &[1.5, -2.0])).unwrap().unwrap(), wp(0.3, &[1.5, -2.0]));
}

#[test]
fn unit_dc_gain() {
    let mut f = WaypointFilter::new(FilterSettings::default()).unwrap();
    f.filter(&wp(0.0, &[0.0])).unwrap();
    let mut last = 0.0;
    for k in 1..400 {
        last = f.filter(&wp(k as f64 * 0.05, &[0.7])).unwrap().unwrap().q[0];
    }
    assert!((last - 0.7).abs() < 1e-12);
}

#[test]
fn recursion_matches_the_closed_form_coefficient() {
    let mut f = WaypointFilter::new(settings(5.0)).unwrap();
    f.filter(&wp(0.0, &[0.0])).unwrap();
    let y = f.filter(&wp(0.05, &[1.0])).unwrap().unwrap().q[0];
    let rc = 1.0 / (2.0 * PI * 5.0);
    assert!((y - 0.05 / (0.05 + rc)).abs() < 1e-15);
    let y2 = f.filter(&wp(0.15, &[1.0])).unwrap().unwrap().q[0];
    let a2 = 0.1 / (0.1 + rc);
    assert!((y2 - (y + a2 * (1.0 - y))).abs() < 1e-15);
}

#[test]
fn attenuates_tremor_above_cutoff() {
    let mut f = WaypointFilter::new(settings(2.0)).unwrap();
    let mut peak: f64 = 0.0;
    for k in 0..400 {
        let t = k as f64 / 20.0;
        let y = f.filter(&wp(t, &[(2.0 * PI * 8.0 * t).sin()])).unwrap().unwrap().q[0];
        if t > 2.0 {
            peak = peak.max(y.abs());
        }
    }
    assert!(peak < 0.45, "{peak}");
}

#[test]
fn stale_inputs_are_rejected_and_counted() {
    let mut f = WaypointFilter::new(FilterSettings::default()).unwrap();
    f.filter(&wp(1.0, &[0.0])).unwrap();
    assert!(matches!(f.filter(&wp(1.0, &[0.0])), Err(Error::StaleInput { .. })));
    assert!(matches!(f.filter(&wp(0.5, &[0.0])), Err(Error::StaleInput { .. })));
    assert_eq!(f.stale_count(), 2);
    assert!(f.filter(&wp(1.1, &[0.0])).unwrap().is_some());
}

#[test]
fn deadband_suppresses_small_changes() {
    let s = FilterSettings { cutoff_hz: 1e12, deadband: 0.1, enabled: true };
    let mut f = WaypointFilter::new(s).unwrap();
    assert!(filter_waypoint(&mut f, &wp(0.0, &[0.0])).unwrap().is_some());
    assert!(filter_waypoint(&mut f, &wp(0.1, &[0.05])).unwrap().is_none());
    assert!(filter_waypoint(&mut f, &wp(0.2, &[0.09])).unwrap().is_none());
    assert!(filter_waypoint(&mut f, &wp(0.3, &[0.11])).unwrap().is_some());
    assert_eq!(f.suppressed_count(), 2);
}

#[test]
fn invalid_settings_are_rejected() {
    assert!(WaypointFilter::new(settings(0.0)).is_err());
    assert!(WaypointFilter::new(FilterSettings { deadband: -1.0, ..FilterSettings::default() }).is_err());
}

fn stream() -> impl Strategy<Value = Vec<(f64, Vec<f64>)>> {
    (1usize..4).prop_flat_map(|dof| {
        prop::collection::vec((0.001f64..0.2, prop::collection::vec(-3.0f64..3.0, dof)), 1..60)
    })
}

proptest! {
    #[test]
    fn output_stays_in_the_input_envelope(samples in stream(), cutoff in 0.1f64..50.0) {
        let mut f = WaypointFilter::new(settings(cutoff)).unwrap();
        let dof = samples[0].1.len();
        let mut lo = vec![f64::INFINITY; dof];
        let mut hi = vec![f64::NEG_INFINITY; dof];
        let mut t = 0.0;
        let mut last_t = f64::NEG_INFINITY;
        for (dt, q) in &samples {
            t += dt;
            for j in 0..dof {
                lo[j] = lo[j].min(q[j]);
                hi[j] = hi[j].max(q[j]);
            }
            let out = f.filter(&wp(t, q)).unwrap().unwrap();
            prop_assert_eq!(out.t, t);
            prop_assert!(out.t > last_t);
            last_t = out.t;
            for j in 0..dof {
                prop_assert!(out.q[j] >= lo[j] - 1e-12 && out.q[j] <= hi[j] + 1e-12);
            }
        }
    }

    #[test]
    fn huge_cutoff_is_identity(samples in stream()) {
        let mut f = WaypointFilter::new(settings(1e15)).unwrap();
        let mut t = 0.0;
        for (dt, q) in &samples {
            t += dt;
            let out = f.filter(&wp(t, q)).unwrap().unwrap();
            for (a, b) in out.q.iter().zip(q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disabled_filter_forwards_everything(samples in stream()) {
        let s = FilterSettings { enabled: false, deadband: 0.5, ..FilterSettings::default() };
        let mut f = WaypointFilter::new(s).unwrap();
        let mut t = 0.0;
        for (dt, q) in &samples {
            t += dt;
            prop_assert_eq!(f.filter(&wp(t, q)).unwrap().unwrap().q, q.clone());
        }
    }
}
