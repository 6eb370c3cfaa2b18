use horus_core::faults::{draw_outage, gate, periodic_active, OutageModel, OutageSchedule};
use horus_core::metrics::{detect_crash, post_outage_window, summarize_values, MetricsError, SampleSeries};
use horus_core::wire::SteeringCommand;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn series(values: &[f64], dt: f64) -> SampleSeries {
    let mut s = SampleSeries::new();
    for (i, &v) in values.iter().enumerate() {
        s.push(i as f64 * dt, v).unwrap();
    }
    s
}

#[test]
fn crash_needs_the_full_hold() {
    let mut v = vec![0.0; 10];
    v.extend(vec![0.3; 99]);
    assert_eq!(detect_crash(&series(&v, 0.005), 0.25, 0.5), None);
    v.push(0.3);
    v.push(0.3);
    let t = detect_crash(&series(&v, 0.005), 0.25, 0.5).unwrap();
    assert!((t - 0.55).abs() < 1e-9, "{t}");
}

#[test]
fn brief_excursions_do_not_crash() {
    let v: Vec<f64> = (0..2000).map(|i| if i % 50 < 40 { 0.4 } else { 0.0 }).collect();
    assert_eq!(detect_crash(&series(&v, 0.005), 0.25, 0.5), None);
}

#[test]
fn post_outage_takes_samples_after_each_end() {
    let s = series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 1.0);
    let w = post_outage_window(&s, &[1.0, 5.0], 2);
    assert_eq!(w.values, vec![3.0, 4.0, 7.0, 8.0]);
    assert_eq!(summarize_values(&[]), Err(MetricsError::Empty));
}

#[test]
fn gate_and_draw_edges() {
    let cmd = SteeringCommand::from_fields([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(gate(cmd, true).is_zero_report());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!((0..10_000).all(|_| !draw_outage(&mut rng, 0)));
}

#[test]
fn probabilistic_rate_matches_threshold() {
    let model = OutageModel::Probabilistic {
        interval: 0.4,
        threshold: 30,
    };
    let mut s = OutageSchedule::new(model, 0.0, ChaCha8Rng::seed_from_u64(11));
    let n = 20_000;
    let out = (0..n).filter(|&k| s.active(k as f64 * 0.4 + 0.2)).count();
    let rate = out as f64 / n as f64;
    // draws 1..=100 below 30 succeed 29 times in 100
    assert!((rate - 0.29).abs() < 0.015, "{rate}");
}

proptest! {
    #[test]
    fn summary_is_scale_equivariant(values in prop::collection::vec(-5.0..5.0f64, 1..200), k in 0.1..10.0f64) {
        let a = summarize_values(&values).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        let b = summarize_values(&scaled).unwrap();
        prop_assert!((b.mean_abs - k * a.mean_abs).abs() < 1e-9 * (1.0 + b.mean_abs));
        prop_assert!((b.std_abs - k * a.std_abs).abs() < 1e-9 * (1.0 + b.std_abs));
        prop_assert!(a.mean_abs >= 0.0 && a.std_abs >= 0.0);
    }

    #[test]
    fn periodic_duty_cycle(period in 0.5..5.0f64, frac in 0.0..1.0f64, phase in 0.0..5.0f64) {
        let duration = period * frac;
        let n = 20_000;
        let horizon = period * 20.0;
        let on = (0..n).filter(|&k| periodic_active(period, duration, phase, k as f64 * horizon / n as f64)).count();
        prop_assert!((on as f64 / n as f64 - frac).abs() < 0.01);
    }

    #[test]
    fn crash_time_is_monotone_in_threshold(values in prop::collection::vec(0.0..0.6f64, 1..600), a in 0.05..0.5f64, b in 0.05..0.5f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s = series(&values, 0.005);
        match (detect_crash(&s, lo, 0.5), detect_crash(&s, hi, 0.5)) {
            (Some(t_lo), Some(t_hi)) => prop_assert!(t_hi >= t_lo),
            (None, Some(_)) => prop_assert!(false, "higher threshold crashed, lower did not"),
            _ => {}
        }
    }
}
