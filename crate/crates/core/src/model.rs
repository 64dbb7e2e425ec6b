//! Plant, controller and the gamma parameterization of the closed loop.
//!
//! With `kp = T * ki` the `(1 + sT)` factor cancels and the characteristic
//! equation collapses to `s + K ki e^{-sL} = 0`. Writing `z = sL` and
//! `gamma = K ki e L` gives `z e^z = -gamma / e`, so the dominant poles are
//! `W_0(-gamma/e) / L` and `W_{-1}(-gamma/e) / L`.

use std::f64::consts::E;

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lambertw::{lambert_w, Branch, ComplexValue};

/// `|gamma - 1|` below which the loop is labelled critically damped.
pub const CRITICAL_TOL: f64 = 1e-12;

/// First-order plant with dead time, `K e^{-sL} / (sT + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FotdPlant {
    #[serde(rename = "K")]
    gain: f64,
    #[serde(rename = "T")]
    time_constant: f64,
    #[serde(rename = "L")]
    delay: f64,
}

impl FotdPlant {
    pub fn new(gain: f64, time_constant: f64, delay: f64) -> Result<Self> {
        if !gain.is_finite() || gain == 0.0 {
            return Err(Error::Domain(format!(
                "plant gain K must be finite and nonzero, got {gain}"
            )));
        }
        if !time_constant.is_finite() || time_constant <= 0.0 {
            return Err(Error::Domain(format!(
                "time constant T must be positive, got {time_constant}"
            )));
        }
        if !delay.is_finite() || delay <= 0.0 {
            return Err(Error::Domain(format!(
                "dead time L must be positive, got {delay}"
            )));
        }
        Ok(FotdPlant {
            gain,
            time_constant,
            delay,
        })
    }

    /// Process gain `K`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Time constant `T` in seconds.
    pub fn time_constant(&self) -> f64 {
        self.time_constant
    }

    /// Dead time `L` in seconds.
    pub fn delay(&self) -> f64 {
        self.delay
    }
}

/// PI gains for `u = kp e + ki \int e dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

impl PiGains {
    pub fn new(kp: f64, ki: f64) -> Result<Self> {
        if !kp.is_finite() || !ki.is_finite() {
            return Err(Error::Domain(format!(
                "gains must be finite, got kp={kp}, ki={ki}"
            )));
        }
        Ok(PiGains { kp, ki })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    Overdamped,
    CriticallyDamped,
    Underdamped,
}

/// Dimensionless loop parameter `gamma = K ki e L`, always positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSpec {
    gamma: f64,
}

impl GammaSpec {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(GammaSpec { gamma })
    }

    pub fn value(&self) -> f64 {
        self.gamma
    }

    pub fn regime(&self) -> Damping {
        regime_of(self.gamma)
    }
}

/// The two dominant closed-loop poles, in 1/seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolePair {
    pub s1: ComplexValue,
    pub s2: ComplexValue,
    pub regime: Damping,
}

impl PolePair {
    pub fn as_array(&self) -> [ComplexValue; 2] {
        [self.s1, self.s2]
    }

    /// The slower of the two poles (largest real part).
    pub fn dominant(&self) -> ComplexValue {
        if self.s1.re >= self.s2.re {
            self.s1
        } else {
            self.s2
        }
    }
}

#[derive(Serialize)]
struct PoleJson {
    re: f64,
    im: f64,
}

/// Serializes as `[{re, im}, {re, im}]`.
impl Serialize for PolePair {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(2))?;
        for s in self.as_array() {
            seq.serialize_element(&PoleJson { re: s.re, im: s.im })?;
        }
        seq.end()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Domain(format!(
            "gamma must be finite and positive, got {gamma}"
        )));
    }
    Ok(())
}

fn regime_of(gamma: f64) -> Damping {
    if (gamma - 1.0).abs() <= CRITICAL_TOL {
        Damping::CriticallyDamped
    } else if gamma < 1.0 {
        Damping::Overdamped
    } else {
        Damping::Underdamped
    }
}

pub fn classify_damping(gamma: f64) -> Result<Damping> {
    check_gamma(gamma)?;
    Ok(regime_of(gamma))
}

/// `ki = gamma / (K e L)` and `kp = T ki`.
pub fn gains_from_gamma(plant: &FotdPlant, gamma: f64) -> Result<PiGains> {
    check_gamma(gamma)?;
    let ki = gamma / (plant.gain * E * plant.delay);
    Ok(PiGains {
        kp: plant.time_constant * ki,
        ki,
    })
}

pub fn gamma_from_gains(plant: &FotdPlant, gains: &PiGains) -> Result<GammaSpec> {
    if !(gains.ki > 0.0) {
        return Err(Error::Domain(format!(
            "integral gain must be positive, got {}",
            gains.ki
        )));
    }
    GammaSpec::new(plant.gain * gains.ki * E * plant.delay)
}

/// Poles `W_0(-gamma/e)/L` and `W_{-1}(-gamma/e)/L` of the reduced loop.
///
/// They depend on the plant only through `L`.
pub fn closed_loop_poles(plant: &FotdPlant, gamma: f64) -> Result<PolePair> {
    check_gamma(gamma)?;
    let regime = regime_of(gamma);
    let l = plant.delay;
    if regime == Damping::CriticallyDamped {
        let s = Complex64::new(-1.0 / l, 0.0);
        return Ok(PolePair {
            s1: s,
            s2: s,
            regime,
        });
    }
    let z = -gamma / E;
    let w0 = lambert_w(Branch::Principal, z)?;
    let wm1 = lambert_w(Branch::Lower, z)?;
    Ok(PolePair {
        s1: w0 / l,
        s2: wm1 / l,
        regime,
    })
}

/// `|s + K ki e^{-sL}|`, the reduced characteristic equation evaluated at `s`.
pub fn characteristic_residual(plant: &FotdPlant, gains: &PiGains, s: ComplexValue) -> f64 {
    (s + plant.gain * gains.ki * (-s * plant.delay).exp()).norm()
}
