//! Tuning workflows: the no-overshoot rule, overshoot-targeted tuning by
//! bisection on gamma, the gamma sweep, and the CHR comparison table.
//!
//! Overshoot depends on gamma alone, so all inversions and sweeps run on the
//! normalized reduced loop (`L = 1`). Reports re-simulate the tuned gains on
//! the full plant-plus-controller loop.

use std::f64::consts::E;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lambertw::{lambert_w, Branch};
use crate::metrics::{evaluate, ResponseMetrics, DEFAULT_BAND_PCT, STEADY_STATE_TOL};
use crate::model::{closed_loop_poles, gains_from_gamma, Damping, FotdPlant, PiGains, PolePair};
use crate::simulator::{
    aligned_step, simulate_general, simulate_reduced, SimConfig, StepResponse,
    DEFAULT_HORIZON_DELAYS, DEFAULT_STEPS_PER_DELAY,
};

/// Gamma reported to give 20% overshoot.
pub const TWENTY_PERCENT_GAMMA: f64 = 1.8837;
pub const CRITICAL_GAMMA: f64 = 1.0;
pub const MAX_TARGET_OVERSHOOT_PCT: f64 = 40.0;
/// Targets at or below this are treated as the critically damped limit.
pub const MIN_RESOLVABLE_OVERSHOOT_PCT: f64 = 1e-3;

/// Horizons are doubled up to this many dead times while chasing steady state.
const MAX_HORIZON_DELAYS: f64 = 2560.0;
/// Residual of the slow mode, relative to its start, the initial horizon aims for.
const SLOW_MODE_DECAY: f64 = 1e-4;

/// One empirical CHR rule, `kp = a T / (K L)`, `ki = b / (K L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChrRule {
    pub name: &'static str,
    pub kp_coeff: f64,
    pub ki_coeff: f64,
}

pub const CHR_NO_OVERSHOOT: ChrRule = ChrRule {
    name: "CHR no overshoot",
    kp_coeff: 0.35,
    ki_coeff: 0.29,
};
pub const CHR_TWENTY_PERCENT: ChrRule = ChrRule {
    name: "CHR 20% overshoot",
    kp_coeff: 0.6,
    ki_coeff: 0.6,
};

impl ChrRule {
    pub fn gains(&self, plant: &FotdPlant) -> PiGains {
        let kl = plant.gain() * plant.delay();
        PiGains {
            kp: self.kp_coeff * plant.time_constant() / kl,
            ki: self.ki_coeff / kl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TuningSpec {
    NoOvershoot,
    TargetOvershoot { pct: f64 },
}

/// Simulation and search settings shared by the tuning entry points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerOptions {
    pub band_pct: f64,
    pub steps_per_delay: f64,
    /// Minimum horizon in dead times; extended automatically for slow loops.
    pub horizon_delays: f64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub gamma_tol: f64,
}

impl Default for TunerOptions {
    fn default() -> Self {
        TunerOptions {
            band_pct: DEFAULT_BAND_PCT,
            steps_per_delay: DEFAULT_STEPS_PER_DELAY,
            horizon_delays: DEFAULT_HORIZON_DELAYS,
            gamma_lo: 1.0 + 1e-3,
            gamma_hi: 3.0,
            gamma_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChrRow {
    pub rule: String,
    pub kp_coeff: f64,
    pub ki_coeff: f64,
    pub gains: PiGains,
    pub metrics: ResponseMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningReport {
    pub plant: FotdPlant,
    pub spec: TuningSpec,
    pub gamma: f64,
    pub regime: Damping,
    pub gains: PiGains,
    pub poles: PolePair,
    pub metrics: ResponseMetrics,
    pub chr: Option<ChrRow>,
    pub warning: Option<String>,
}

impl TuningReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub overshoot_pct: f64,
    pub settling_time_per_l: f64,
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("gamma,overshoot_pct,ts_over_L\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{}\n",
            r.gamma, r.overshoot_pct, r.settling_time_per_l
        ));
    }
    s
}

fn require_positive_gain(plant: &FotdPlant) -> Result<()> {
    if plant.gain() <= 0.0 {
        return Err(Error::Domain(format!(
            "tuning requires a positive process gain, got K = {}",
            plant.gain()
        )));
    }
    Ok(())
}

/// Horizon long enough for the slow pole of the reduced loop to decay.
fn initial_horizon(gamma: f64, delay: f64, opts: &TunerOptions) -> f64 {
    let base = opts.horizon_delays;
    let slow = lambert_w(Branch::Principal, -gamma / E)
        .ok()
        .map(|w| -w.re)
        .filter(|r| *r > 0.0)
        .map(|r| (1.0 / SLOW_MODE_DECAY).ln() / r)
        .unwrap_or(base);
    base.max(slow.ceil()) * delay
}

/// Runs `sim` with growing horizons until `|y(end) - 1|` is within tolerance.
fn until_steady(
    start: f64,
    delay: f64,
    mut sim: impl FnMut(f64) -> Result<StepResponse>,
) -> Result<StepResponse> {
    let mut horizon = start;
    loop {
        let resp = sim(horizon)?;
        let deviation = (resp.final_output() - 1.0).abs();
        if deviation <= STEADY_STATE_TOL || horizon >= MAX_HORIZON_DELAYS * delay {
            return Ok(resp);
        }
        horizon *= 2.0;
    }
}

/// Metrics of the reduced loop at `gamma` with `L = 1`.
pub fn reduced_metrics(gamma: f64, opts: &TunerOptions) -> Result<ResponseMetrics> {
    let cfg = SimConfig::for_delay(1.0).with_step(aligned_step(1.0, 1.0 / opts.steps_per_delay));
    let a = gamma / E;
    let resp = until_steady(initial_horizon(gamma, 1.0, opts), 1.0, |h| {
        simulate_reduced(a, 1.0, &cfg.with_horizon(h))
    })?;
    evaluate(&resp, opts.band_pct)
}

/// Metrics of the full plant-plus-PI loop for arbitrary gains.
pub fn plant_metrics(
    plant: &FotdPlant,
    gains: &PiGains,
    opts: &TunerOptions,
) -> Result<ResponseMetrics> {
    let l = plant.delay();
    let step = aligned_step(l, plant.time_constant().min(l) / opts.steps_per_delay);
    let base = SimConfig::for_plant(plant).with_step(step);
    let start = if gains.ki > 0.0 {
        let gamma = plant.gain() * gains.ki * E * l;
        initial_horizon(gamma, l, opts)
    } else {
        opts.horizon_delays * l
    };
    let resp = until_steady(start, l, |h| {
        simulate_general(plant, gains, &base.with_horizon(h))
    })?;
    evaluate(&resp, opts.band_pct)
}

fn chr_row(plant: &FotdPlant, rule: &ChrRule, opts: &TunerOptions) -> Result<ChrRow> {
    let gains = rule.gains(plant);
    Ok(ChrRow {
        rule: rule.name.to_string(),
        kp_coeff: rule.kp_coeff,
        ki_coeff: rule.ki_coeff,
        gains,
        metrics: plant_metrics(plant, &gains, opts)?,
    })
}

fn build_report(
    plant: &FotdPlant,
    spec: TuningSpec,
    gamma: f64,
    chr: Option<&ChrRule>,
    warning: Option<String>,
    opts: &TunerOptions,
) -> Result<TuningReport> {
    let gains = gains_from_gamma(plant, gamma)?;
    let poles = closed_loop_poles(plant, gamma)?;
    Ok(TuningReport {
        plant: *plant,
        spec,
        gamma,
        regime: poles.regime,
        gains,
        poles,
        metrics: plant_metrics(plant, &gains, opts)?,
        chr: chr.map(|r| chr_row(plant, r, opts)).transpose()?,
        warning,
    })
}

/// Critically damped tuning, `gamma = 1`.
pub fn tune_no_overshoot(plant: &FotdPlant) -> Result<TuningReport> {
    tune_no_overshoot_with(plant, &TunerOptions::default())
}

pub fn tune_no_overshoot_with(plant: &FotdPlant, opts: &TunerOptions) -> Result<TuningReport> {
    require_positive_gain(plant)?;
    build_report(
        plant,
        TuningSpec::NoOvershoot,
        CRITICAL_GAMMA,
        Some(&CHR_NO_OVERSHOOT),
        None,
        opts,
    )
}

pub fn tune_target_overshoot(plant: &FotdPlant, target_pct: f64) -> Result<TuningReport> {
    tune_target_overshoot_with(plant, target_pct, &TunerOptions::default())
}

pub fn tune_target_overshoot_with(
    plant: &FotdPlant,
    target_pct: f64,
    opts: &TunerOptions,
) -> Result<TuningReport> {
    require_positive_gain(plant)?;
    let (gamma, warning) = gamma_for_overshoot(target_pct, opts)?;
    let chr = (target_pct == 20.0).then_some(&CHR_TWENTY_PERCENT);
    build_report(
        plant,
        TuningSpec::TargetOvershoot { pct: target_pct },
        gamma,
        chr,
        warning,
        opts,
    )
}

/// Bisects the overshoot-vs-gamma map on `[gamma_lo, gamma_hi]`.
///
/// Returns the gamma and, when the target is below what the simulation can
/// resolve, a warning explaining the clamp to `gamma_lo`.
pub fn gamma_for_overshoot(target_pct: f64, opts: &TunerOptions) -> Result<(f64, Option<String>)> {
    if !(target_pct > 0.0 && target_pct <= MAX_TARGET_OVERSHOOT_PCT) {
        return Err(Error::Domain(format!(
            "target overshoot must be in (0, {MAX_TARGET_OVERSHOOT_PCT}], got {target_pct}"
        )));
    }
    let overshoot = |g: f64| reduced_metrics(g, opts).map(|m| m.overshoot_pct);
    let (mut lo, mut hi) = (opts.gamma_lo, opts.gamma_hi);
    let os_lo = overshoot(lo)?;
    let os_hi = overshoot(hi)?;
    if target_pct >= os_hi {
        return Err(Error::UnreachableTarget {
            target: target_pct,
            max: os_hi,
            gamma_max: hi,
        });
    }
    if target_pct <= os_lo.max(MIN_RESOLVABLE_OVERSHOOT_PCT) {
        let warning = format!(
            "target {target_pct}% is below the resolvable overshoot ({:.3e}%); clamped to gamma = {lo}",
            os_lo.max(MIN_RESOLVABLE_OVERSHOOT_PCT)
        );
        return Ok((lo, Some(warning)));
    }
    while hi - lo > opts.gamma_tol {
        let mid = 0.5 * (lo + hi);
        if overshoot(mid)? < target_pct {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), None))
}

/// Metrics of the normalized reduced loop on a uniform gamma grid.
///
/// Rows are evaluated in parallel and returned in increasing gamma.
pub fn sweep(gamma_min: f64, gamma_max: f64, step: f64) -> Result<Vec<SweepRow>> {
    sweep_with(gamma_min, gamma_max, step, &TunerOptions::default())
}

pub fn sweep_with(
    gamma_min: f64,
    gamma_max: f64,
    step: f64,
    opts: &TunerOptions,
) -> Result<Vec<SweepRow>> {
    if !(gamma_min > 0.0 && gamma_max > gamma_min && gamma_max.is_finite()) {
        return Err(Error::Domain(format!(
            "sweep needs 0 < gamma_min < gamma_max, got [{gamma_min}, {gamma_max}]"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!(
            "sweep step must be positive, got {step}"
        )));
    }
    let count = ((gamma_max - gamma_min) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .into_par_iter()
        .map(|i| {
            // snap to the printed grid so 0.1 + 90 * 0.01 reads as 1
            let gamma = ((gamma_min + i as f64 * step) * 1e12).round() / 1e12;
            let m = reduced_metrics(gamma, opts)?;
            let ts = m.settling_time.ok_or(Error::NotSettled {
                deviation: f64::NAN,
            })?;
            Ok(SweepRow {
                gamma,
                overshoot_pct: m.overshoot_pct,
                settling_time_per_l: ts,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub target: String,
    /// `kp K L / T`
    pub kp_coeff: f64,
    /// `ki K L`
    pub ki_coeff: f64,
    pub gamma: f64,
    pub gains: PiGains,
    pub metrics: ResponseMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChrComparison {
    pub plant: FotdPlant,
    pub rows: Vec<ComparisonRow>,
}

/// CHR rules next to the Lambert W tunings, all simulated on the full loop.
pub fn chr_compare(plant: &FotdPlant) -> Result<ChrComparison> {
    chr_compare_with(plant, &TunerOptions::default())
}

pub fn chr_compare_with(plant: &FotdPlant, opts: &TunerOptions) -> Result<ChrComparison> {
    require_positive_gain(plant)?;
    let kl = plant.gain() * plant.delay();
    let row = |method: &str, target: &str, gains: PiGains| -> Result<ComparisonRow> {
        Ok(ComparisonRow {
            method: method.to_string(),
            target: target.to_string(),
            kp_coeff: gains.kp * kl / plant.time_constant(),
            ki_coeff: gains.ki * kl,
            gamma: gains.ki * kl * E,
            gains,
            metrics: plant_metrics(plant, &gains, opts)?,
        })
    };
    let rows = vec![
        row("CHR", "no overshoot", CHR_NO_OVERSHOOT.gains(plant))?,
        row("CHR", "20% overshoot", CHR_TWENTY_PERCENT.gains(plant))?,
        row(
            "Lambert W",
            "no overshoot",
            gains_from_gamma(plant, CRITICAL_GAMMA)?,
        )?,
        row(
            "Lambert W",
            "20% overshoot",
            gains_from_gamma(plant, TWENTY_PERCENT_GAMMA)?,
        )?,
    ];
    Ok(ChrComparison {
        plant: *plant,
        rows,
    })
}

impl fmt::Display for ChrComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "plant K={} T={} L={}",
            self.plant.gain(),
            self.plant.time_constant(),
            self.plant.delay()
        )?;
        writeln!(
            f,
            "{:<10} {:<14} {:>9} {:>9} {:>8} {:>11} {:>10}",
            "method", "target", "kp*KL/T", "ki*KL", "gamma", "overshoot%", "Ts"
        )?;
        for r in &self.rows {
            let ts = r
                .metrics
                .settling_time
                .map_or("unsettled".to_string(), |t| format!("{t:.3}"));
            writeln!(
                f,
                "{:<10} {:<14} {:>9.4} {:>9.4} {:>8.4} {:>11.3} {:>10}",
                r.method, r.target, r.kp_coeff, r.ki_coeff, r.gamma, r.metrics.overshoot_pct, ts
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> FotdPlant {
        FotdPlant::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn chr_rule_gains() {
        let plant = FotdPlant::new(2.0, 3.0, 0.5).unwrap();
        let g = CHR_NO_OVERSHOOT.gains(&plant);
        assert!((g.kp - 0.35 * 3.0).abs() < 1e-15);
        assert!((g.ki - 0.29).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_gain_plants() {
        let plant = FotdPlant::new(-1.0, 1.0, 1.0).unwrap();
        assert!(matches!(tune_no_overshoot(&plant), Err(Error::Domain(_))));
        assert!(matches!(
            tune_target_overshoot(&plant, 20.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(chr_compare(&plant), Err(Error::Domain(_))));
    }

    #[test]
    fn target_range_is_checked() {
        assert!(matches!(
            tune_target_overshoot(&unit(), 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            tune_target_overshoot(&unit(), 40.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn unreachable_target_reports_bracket() {
        let opts = TunerOptions {
            gamma_hi: 1.5,
            ..TunerOptions::default()
        };
        let err = gamma_for_overshoot(20.0, &opts).unwrap_err();
        match err {
            Error::UnreachableTarget {
                target,
                max,
                gamma_max,
            } => {
                assert_eq!(target, 20.0);
                assert_eq!(gamma_max, 1.5);
                assert!(max < 20.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tiny_target_clamps_with_warning() {
        let r = tune_target_overshoot(&unit(), 0.0001).unwrap();
        assert_eq!(r.gamma, 1.0 + 1e-3);
        assert!(r.warning.is_some());
        assert!(r.chr.is_none());
    }

    #[test]
    fn sweep_grid_and_ordering() {
        let rows = sweep(0.5, 0.6, 0.05).unwrap();
        let gammas: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
        assert_eq!(gammas, vec![0.5, 0.55, 0.6]);
        assert!(sweep(0.0, 1.0, 0.1).is_err());
        assert!(sweep(1.0, 0.5, 0.1).is_err());
        assert!(sweep(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = [SweepRow {
            gamma: 1.0,
            overshoot_pct: 0.0,
            settling_time_per_l: 6.5,
        }];
        assert_eq!(
            sweep_to_csv(&rows),
            "gamma,overshoot_pct,ts_over_L\n1,0,6.5\n"
        );
    }

    #[test]
    fn report_json_schema() {
        let r = tune_no_overshoot(&unit()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["plant"]["K"], 1.0);
        assert_eq!(v["spec"]["kind"], "no_overshoot");
        assert_eq!(v["gamma"], 1.0);
        assert_eq!(v["poles"].as_array().unwrap().len(), 2);
        assert_eq!(v["poles"][0]["re"], -1.0);
        assert!(v["metrics"]["settling_time"].is_f64());
        assert_eq!(v["metrics"]["settled"], true);
        assert_eq!(v["chr"]["kp_coeff"], 0.35);
        assert!(v["warning"].is_null());
    }
}
