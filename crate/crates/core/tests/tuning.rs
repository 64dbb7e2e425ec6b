use std::f64::consts::E;

use fotd_lambert::tuner::{self, TunerOptions};
use fotd_lambert::{
    evaluate, gains_from_gamma, simulate_general, simulate_reduced, sweep, tune_no_overshoot,
    tune_target_overshoot, Damping, FotdPlant, SimConfig, TuningSpec,
};

fn unit() -> FotdPlant {
    FotdPlant::new(1.0, 1.0, 1.0).unwrap()
}

#[test]
fn bisection_hits_targets() {
    let opts = TunerOptions::default();
    for target in [5.0, 10.0, 20.0, 30.0] {
        let r = tune_target_overshoot(&unit(), target).unwrap();
        assert!(
            (r.metrics.overshoot_pct - target).abs() <= 0.1,
            "{target}: {}",
            r.metrics.overshoot_pct
        );
        let reduced = tuner::reduced_metrics(r.gamma, &opts).unwrap();
        assert!((reduced.overshoot_pct - target).abs() <= 0.1);
        assert_eq!(r.regime, Damping::Underdamped);
    }
}

#[test]
fn bracket_encloses_targets() {
    let opts = TunerOptions::default();
    let lo = tuner::reduced_metrics(opts.gamma_lo, &opts)
        .unwrap()
        .overshoot_pct;
    let hi = tuner::reduced_metrics(opts.gamma_hi, &opts)
        .unwrap()
        .overshoot_pct;
    for target in [5.0, 10.0, 20.0, 30.0] {
        assert!(lo < target && target < hi);
    }
}

#[test]
fn reports_match_fresh_simulations() {
    let plant = FotdPlant::new(1.5, 3.0, 0.8).unwrap();
    for report in [
        tune_no_overshoot(&plant).unwrap(),
        tune_target_overshoot(&plant, 10.0).unwrap(),
    ] {
        assert_eq!(
            report.gains,
            gains_from_gamma(&plant, report.gamma).unwrap()
        );
        let again = tuner::plant_metrics(&plant, &report.gains, &TunerOptions::default()).unwrap();
        assert_eq!(report.metrics, again);
    }
}

#[test]
fn no_overshoot_report() {
    let r = tune_no_overshoot(&unit()).unwrap();
    assert_eq!(r.spec, TuningSpec::NoOvershoot);
    assert_eq!(r.gamma, 1.0);
    assert_eq!(r.regime, Damping::CriticallyDamped);
    assert!((r.gains.kp - 0.367879).abs() < 1e-6);
    assert!(r.metrics.overshoot_pct <= 0.05);
    let ts = r.metrics.settling_time.unwrap();
    assert!((ts - 6.56).abs() <= 0.33, "{ts}");
    let chr = r.chr.unwrap();
    assert_eq!((chr.kp_coeff, chr.ki_coeff), (0.35, 0.29));

    let plant = FotdPlant::new(2.0, 4.0, 0.5).unwrap();
    let r = tune_no_overshoot(&plant).unwrap();
    assert!((r.gains.ki - 1.0 / E).abs() < 1e-15);
    assert_eq!(r.gains.kp, 4.0 * r.gains.ki);
}

#[test]
fn twenty_percent_report_attaches_chr_row() {
    let r = tune_target_overshoot(&unit(), 20.0).unwrap();
    assert!((r.gamma - 1.8837).abs() <= 0.02);
    let chr = r.chr.unwrap();
    assert_eq!((chr.kp_coeff, chr.ki_coeff), (0.6, 0.6));
    assert!(chr.metrics.overshoot_pct > 0.0);
    assert!(tune_target_overshoot(&unit(), 10.0).unwrap().chr.is_none());
}

#[test]
fn gain_scale_law() {
    let base = tune_no_overshoot(&unit()).unwrap().gains;
    for (k, t, l) in [
        (2.0, 1.0, 1.0),
        (1.0, 3.0, 1.0),
        (1.0, 1.0, 0.25),
        (0.5, 2.0, 4.0),
    ] {
        let g = gains_from_gamma(&FotdPlant::new(k, t, l).unwrap(), 1.0).unwrap();
        assert!((g.ki - base.ki / (k * l)).abs() < 1e-15);
        assert!((g.kp - base.kp * t / (k * l)).abs() < 1e-14);
    }
}

#[test]
fn metrics_are_time_scale_covariant() {
    for gamma in [0.5, 1.0, 1.5] {
        let at = |l: f64| {
            let cfg = SimConfig::for_delay(l).with_horizon(80.0 * l);
            evaluate(&simulate_reduced(gamma / (E * l), l, &cfg).unwrap(), 2.0).unwrap()
        };
        let (m1, m2) = (at(1.0), at(2.0));
        let (t1, t2) = (m1.settling_time.unwrap(), m2.settling_time.unwrap());
        assert!(((t2 - 2.0 * t1) / t2).abs() <= 1e-3);
        assert!((m1.overshoot_pct - m2.overshoot_pct).abs() <= 1e-3 * m1.overshoot_pct.max(1.0));
    }
}

#[test]
fn reduced_response_rescales_with_delay() {
    let r1 = simulate_reduced(1.0 / E, 1.0, &SimConfig::for_delay(1.0)).unwrap();
    let r2 = simulate_reduced(1.0 / (2.0 * E), 2.0, &SimConfig::for_delay(2.0)).unwrap();
    assert_eq!(r1.len(), r2.len());
    for i in (0..r1.len()).step_by(97) {
        assert!((r2.times[i] - 2.0 * r1.times[i]).abs() < 1e-12);
        assert!((r1.output_y[i] - r2.output_y[i]).abs() < 1e-12);
    }
}

#[test]
fn twenty_percent_gamma_peaks_near_one_point_two() {
    let r = simulate_reduced(1.8837 / E, 1.0, &SimConfig::for_delay(1.0)).unwrap();
    let peak = r.output_y.iter().copied().fold(f64::MIN, f64::max);
    assert!((peak - 1.2).abs() < 0.01, "{peak}");
}

#[test]
fn final_value_needs_longer_horizon_for_slow_loops() {
    // a 40 L window is too short for the slow overdamped pole at small gamma
    let cfg = SimConfig::for_delay(1.0);
    let short = simulate_reduced(0.1 / E, 1.0, &cfg).unwrap();
    assert!((short.final_output() - 1.0).abs() > 1e-3);
    // the tuner extends the window until the loop is at rest
    let opts = TunerOptions::default();
    for i in 1..=20 {
        let gamma = i as f64 / 10.0;
        let m = tuner::reduced_metrics(gamma, &opts).unwrap();
        assert!(m.settled, "gamma = {gamma}");
    }
    for i in 5..=20 {
        let gamma = i as f64 / 10.0;
        let r = simulate_reduced(gamma / E, 1.0, &cfg).unwrap();
        assert!((r.final_output() - 1.0).abs() <= 1e-3, "gamma = {gamma}");
    }
}

#[test]
fn sweep_reproduces_reported_rows() {
    let rows = sweep(0.1, 2.0, 0.01).unwrap();
    assert_eq!(rows.len(), 191);
    assert!(rows.windows(2).all(|w| w[1].gamma > w[0].gamma));
    let at = |g: f64| rows.iter().find(|r| (r.gamma - g).abs() < 1e-12).unwrap();
    assert!(at(1.0).overshoot_pct <= 0.05);
    assert!((at(1.0).settling_time_per_l - 6.56).abs() <= 0.05 * 6.56);
    assert!((at(1.88).overshoot_pct - 20.0).abs() < 1.0);
    assert_eq!(at(0.1).overshoot_pct, 0.0);
    assert!(at(0.1).settling_time_per_l > 6.56);
    let opts = TunerOptions::default();
    let again = tuner::sweep_with(0.1, 2.0, 0.01, &opts).unwrap();
    assert_eq!(rows, again);
}

#[test]
fn overshoot_nondecreasing_above_critical() {
    let rows = sweep(1.0, 2.0, 0.01).unwrap();
    assert!(rows
        .windows(2)
        .all(|w| w[1].overshoot_pct >= w[0].overshoot_pct));
}

#[test]
fn general_loop_reaches_setpoint_for_chr_rows() {
    let plant = unit();
    for (kp, ki) in [(0.35, 0.29), (0.6, 0.6)] {
        let gains = fotd_lambert::PiGains { kp, ki };
        let r = simulate_general(&plant, &gains, &SimConfig::for_plant(&plant)).unwrap();
        assert!((r.final_output() - 1.0).abs() < 1e-3);
    }
}
