//! Peak overshoot and settling time of a unit-step response.
//!
//! The final value is taken as the setpoint (1), which integral action
//! guarantees for any stable loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::StepResponse;

pub const DEFAULT_BAND_PCT: f64 = 2.0;
/// `|y(end) - 1|` allowed before overshoot is considered meaningful.
pub const STEADY_STATE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseMetrics {
    pub overshoot_pct: f64,
    /// `None` when the response leaves the band at the last sample.
    pub settling_time: Option<f64>,
    pub peak_time: f64,
    pub settled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overshoot {
    pub pct: f64,
    pub peak_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settling {
    /// Last band exit, or the horizon when `settled` is false.
    pub time: f64,
    pub settled: bool,
}

pub fn peak_overshoot(resp: &StepResponse) -> Result<Overshoot> {
    if resp.is_empty() {
        return Err(Error::NotSettled { deviation: 1.0 });
    }
    let deviation = (resp.final_output() - 1.0).abs();
    if !(deviation <= STEADY_STATE_TOL) {
        return Err(Error::NotSettled { deviation });
    }
    let (mut peak_idx, mut peak) = (0, resp.output_y[0]);
    for (i, &y) in resp.output_y.iter().enumerate().skip(1) {
        if y > peak {
            peak = y;
            peak_idx = i;
        }
    }
    Ok(Overshoot {
        pct: ((peak - 1.0) * 100.0).max(0.0),
        peak_time: resp.times[peak_idx],
    })
}

/// Time of the last exit from the `±band_pct` band around 1, linearly
/// interpolated between the bracketing samples.
pub fn settling_time(resp: &StepResponse, band_pct: f64) -> Result<Settling> {
    if !(band_pct > 0.0) || !band_pct.is_finite() {
        return Err(Error::Domain(format!(
            "settling band must be positive, got {band_pct}%"
        )));
    }
    let band = band_pct / 100.0;
    let last_out = resp.output_y.iter().rposition(|y| (y - 1.0).abs() > band);
    let Some(i) = last_out else {
        return Ok(Settling {
            time: resp.times.first().copied().unwrap_or(0.0),
            settled: true,
        });
    };
    if i + 1 == resp.len() {
        return Ok(Settling {
            time: resp.horizon(),
            settled: false,
        });
    }
    let e0 = resp.output_y[i] - 1.0;
    let e1 = resp.output_y[i + 1] - 1.0;
    let edge = band.copysign(e0);
    let frac = if e0 == e1 {
        0.0
    } else {
        (e0 - edge) / (e0 - e1)
    };
    let (t0, t1) = (resp.times[i], resp.times[i + 1]);
    Ok(Settling {
        time: t0 + frac * (t1 - t0),
        settled: true,
    })
}

pub fn evaluate(resp: &StepResponse, band_pct: f64) -> Result<ResponseMetrics> {
    let os = peak_overshoot(resp)?;
    let st = settling_time(resp, band_pct)?;
    Ok(ResponseMetrics {
        overshoot_pct: os.pct,
        settling_time: st.settled.then_some(st.time),
        peak_time: os.peak_time,
        settled: st.settled,
    })
}
