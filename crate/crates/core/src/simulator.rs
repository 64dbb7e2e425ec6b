//! Fixed-step unit-step simulation of the delayed PI loop.
//!
//! Both loop forms are integrated with classical RK4. The delayed signal is
//! kept in a ring buffer spanning one dead time; values at RK substages are
//! read from a cubic Hermite interpolant built from the buffered samples and
//! their one-sided derivatives. The step always divides `L`, so the kinks
//! that the dead time propagates through the solution land on grid points
//! and never sit inside an interpolation interval.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FotdPlant, PiGains};

pub const DEFAULT_STEPS_PER_DELAY: f64 = 500.0;
pub const DEFAULT_HORIZON_DELAYS: f64 = 40.0;
pub const MIN_HORIZON_DELAYS: f64 = 10.0;
/// `|y|` above this aborts the run as unstable.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopForm {
    /// Plant and PI controller integrated as separate states.
    General,
    /// `y' = A (r(t-L) - y(t-L))`, valid when `kp = T ki`.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub step_h: f64,
    pub horizon: f64,
    pub loop_form: LoopForm,
}

impl SimConfig {
    pub fn new(step_h: f64, horizon: f64, loop_form: LoopForm) -> Self {
        SimConfig {
            step_h,
            horizon,
            loop_form,
        }
    }

    /// `min(T, L)/500` snapped to divide `L`, horizon `40 L`, general form.
    pub fn for_plant(plant: &FotdPlant) -> Self {
        let l = plant.delay();
        let wanted = plant.time_constant().min(l) / DEFAULT_STEPS_PER_DELAY;
        SimConfig {
            step_h: aligned_step(l, wanted),
            horizon: DEFAULT_HORIZON_DELAYS * l,
            loop_form: LoopForm::General,
        }
    }

    /// `L/500`, horizon `40 L`, reduced form.
    pub fn for_delay(delay: f64) -> Self {
        SimConfig {
            step_h: delay / DEFAULT_STEPS_PER_DELAY,
            horizon: DEFAULT_HORIZON_DELAYS * delay,
            loop_form: LoopForm::Reduced,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_step(mut self, step_h: f64) -> Self {
        self.step_h = step_h;
        self
    }

    pub fn with_form(mut self, loop_form: LoopForm) -> Self {
        self.loop_form = loop_form;
        self
    }

    /// Checks the config against dead time `delay` and returns the number of
    /// steps per dead time.
    pub fn validate(&self, delay: f64) -> Result<usize> {
        if !(self.step_h > 0.0) || !self.step_h.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "step must be positive, got {}",
                self.step_h
            )));
        }
        if !(delay > 0.0) || !delay.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "delay must be positive, got {delay}"
            )));
        }
        if !self.horizon.is_finite()
            || self.horizon < MIN_HORIZON_DELAYS * delay * (1.0 - ALIGN_TOL)
        {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is shorter than {MIN_HORIZON_DELAYS} dead times",
                self.horizon
            )));
        }
        let ratio = delay / self.step_h;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > ALIGN_TOL * ratio {
            return Err(Error::InvalidConfig(format!(
                "step {} does not divide the dead time {delay}",
                self.step_h
            )));
        }
        Ok(steps as usize)
    }

    fn total_steps(&self) -> usize {
        (self.horizon / self.step_h - ALIGN_TOL).ceil().max(1.0) as usize
    }
}

/// Largest step no bigger than `wanted` (up to rounding) that divides `delay`.
pub fn aligned_step(delay: f64, wanted: f64) -> f64 {
    delay / (delay / wanted).round().max(1.0)
}

/// Uniformly sampled unit-step response.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepResponse {
    pub times: Vec<f64>,
    pub output_y: Vec<f64>,
    pub control_u: Vec<f64>,
}

impl StepResponse {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step_h(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_output(&self) -> f64 {
        self.output_y.last().copied().unwrap_or(0.0)
    }

    /// CSV with header `t,y,u`, 17 significant digits per value.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.to_csv_string().as_bytes())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(64 * (self.len() + 1));
        s.push_str("t,y,u\n");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e}",
                self.times[i], self.output_y[i], self.control_u[i]
            );
        }
        s
    }
}

/// Dispatches on `cfg.loop_form`. The reduced form is only accepted when
/// `kp = T ki` holds to 1e-12 relative.
pub fn simulate(plant: &FotdPlant, gains: &PiGains, cfg: &SimConfig) -> Result<StepResponse> {
    match cfg.loop_form {
        LoopForm::General => simulate_general(plant, gains, cfg),
        LoopForm::Reduced => {
            let expected = plant.time_constant() * gains.ki;
            if (gains.kp - expected).abs() > 1e-12 * expected.abs().max(gains.kp.abs()) {
                return Err(Error::InvalidConfig(format!(
                    "reduced loop requires kp = T ki (kp = {}, T ki = {expected})",
                    gains.kp
                )));
            }
            simulate_reduced(plant.gain() * gains.ki, plant.delay(), cfg)
        }
    }
}

/// Plant state `x`, integrator state `q`:
/// `x' = (-x + K u(t-L)) / T`, `q' = 1 - x`, `u = kp (1 - x) + ki q`.
pub fn simulate_general(
    plant: &FotdPlant,
    gains: &PiGains,
    cfg: &SimConfig,
) -> Result<StepResponse> {
    if !gains.kp.is_finite() || !gains.ki.is_finite() {
        return Err(Error::Domain("gains must be finite".into()));
    }
    let sys = GeneralLoop {
        k: plant.gain(),
        t: plant.time_constant(),
        kp: gains.kp,
        ki: gains.ki,
    };
    integrate(&sys, plant.delay(), cfg)
}

/// `y'(t) = A (r(t-L) - y(t-L))` with a unit step reference at `t = 0`.
pub fn simulate_reduced(a: f64, delay: f64, cfg: &SimConfig) -> Result<StepResponse> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!(
            "loop gain A = K ki must be positive, got {a}"
        )));
    }
    integrate(&ReducedLoop { a }, delay, cfg)
}

/// Exact solution of the reduced loop built segment by segment over
/// `[kL, (k+1)L]`, sampled every `step_h` on `[0, n_segments L]`.
pub fn method_of_steps_reference(
    a: f64,
    delay: f64,
    n_segments: usize,
    step_h: f64,
) -> Result<StepResponse> {
    if !(2..=6).contains(&n_segments) {
        return Err(Error::InvalidConfig(format!(
            "n_segments must be in 2..=6, got {n_segments}"
        )));
    }
    let per_delay =
        SimConfig::new(step_h, MIN_HORIZON_DELAYS * delay, LoopForm::Reduced).validate(delay)?;

    // coefficients in local time tau = t - kL
    let mut segments: Vec<Vec<f64>> = vec![vec![0.0]];
    for k in 1..n_segments {
        let prev = &segments[k - 1];
        let start = horner(prev, delay);
        let mut next = vec![0.0; prev.len() + 1];
        next[0] = start;
        next[1] = a;
        for (j, c) in prev.iter().enumerate() {
            next[j + 1] -= a * c / (j + 1) as f64;
        }
        segments.push(next);
    }

    let n = n_segments * per_delay;
    let mut resp = StepResponse {
        times: Vec::with_capacity(n + 1),
        output_y: Vec::with_capacity(n + 1),
        control_u: Vec::with_capacity(n + 1),
    };
    for i in 0..=n {
        let k = (i / per_delay).min(n_segments - 1);
        let tau = (i - k * per_delay) as f64 * step_h;
        let y = horner(&segments[k], tau);
        resp.times.push(i as f64 * step_h);
        resp.output_y.push(y);
        resp.control_u.push(a * (1.0 - y));
    }
    Ok(resp)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// A loop whose only delayed quantity is the scalar signal `v = g(x)`,
/// taken as zero before `t = 0`.
trait DelayLoop<const D: usize> {
    fn signal(&self, x: &[f64; D]) -> f64;
    fn signal_rate(&self, dx: &[f64; D]) -> f64;
    fn rhs(&self, x: &[f64; D], delayed: f64) -> [f64; D];
    fn output(&self, x: &[f64; D]) -> f64;
    fn control(&self, signal: f64) -> f64;
}

struct ReducedLoop {
    a: f64,
}

impl DelayLoop<1> for ReducedLoop {
    fn signal(&self, x: &[f64; 1]) -> f64 {
        1.0 - x[0]
    }
    fn signal_rate(&self, dx: &[f64; 1]) -> f64 {
        -dx[0]
    }
    fn rhs(&self, _x: &[f64; 1], delayed: f64) -> [f64; 1] {
        [self.a * delayed]
    }
    fn output(&self, x: &[f64; 1]) -> f64 {
        x[0]
    }
    fn control(&self, signal: f64) -> f64 {
        self.a * signal
    }
}

struct GeneralLoop {
    k: f64,
    t: f64,
    kp: f64,
    ki: f64,
}

impl DelayLoop<2> for GeneralLoop {
    fn signal(&self, x: &[f64; 2]) -> f64 {
        self.kp * (1.0 - x[0]) + self.ki * x[1]
    }
    fn signal_rate(&self, dx: &[f64; 2]) -> f64 {
        -self.kp * dx[0] + self.ki * dx[1]
    }
    fn rhs(&self, x: &[f64; 2], delayed: f64) -> [f64; 2] {
        [(-x[0] + self.k * delayed) / self.t, 1.0 - x[0]]
    }
    fn output(&self, x: &[f64; 2]) -> f64 {
        x[0]
    }
    fn control(&self, signal: f64) -> f64 {
        signal
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    value: f64,
    /// derivative from the right
    rate_plus: f64,
    /// derivative from the left
    rate_minus: f64,
}

/// Ring buffer holding the last `capacity` samples of the delayed signal.
struct History {
    buf: Vec<Sample>,
}

impl History {
    fn new(capacity: usize) -> Self {
        History {
            buf: vec![Sample::default(); capacity],
        }
    }

    fn get(&self, index: usize) -> &Sample {
        &self.buf[index % self.buf.len()]
    }

    fn put(&mut self, index: usize, sample: Sample) {
        let n = self.buf.len();
        self.buf[index % n] = sample;
    }
}

fn axpy<const D: usize>(x: &[f64; D], h: f64, k: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| x[i] + h * k[i])
}

fn integrate<const D: usize, S: DelayLoop<D>>(
    sys: &S,
    delay: f64,
    cfg: &SimConfig,
) -> Result<StepResponse> {
    let per_delay = cfg.validate(delay)?;
    let h = cfg.step_h;
    let n_steps = cfg.total_steps();

    let mut history = History::new(per_delay + 1);
    let mut resp = StepResponse {
        times: Vec::with_capacity(n_steps + 1),
        output_y: Vec::with_capacity(n_steps + 1),
        control_u: Vec::with_capacity(n_steps + 1),
    };

    let mut x = [0.0; D];
    let record = |j: usize, x: &[f64; D], history: &mut History, resp: &mut StepResponse| {
        // delayed signal at t_j - L from either side; the only jump is at t = 0
        let (plus, minus) = if j > per_delay {
            let v = history.get(j - per_delay).value;
            (v, v)
        } else if j == per_delay {
            (history.get(0).value, 0.0)
        } else {
            (0.0, 0.0)
        };
        let value = sys.signal(x);
        let sample = Sample {
            value,
            rate_plus: sys.signal_rate(&sys.rhs(x, plus)),
            rate_minus: sys.signal_rate(&sys.rhs(x, minus)),
        };
        history.put(j, sample);
        resp.times.push(j as f64 * h);
        resp.output_y.push(sys.output(x));
        resp.control_u.push(sys.control(value));
    };

    record(0, &x, &mut history, &mut resp);
    for n in 0..n_steps {
        let (d0, dm, d1) = if n >= per_delay {
            let j = n - per_delay;
            let a = history.get(j);
            let b = history.get(j + 1);
            let mid = 0.5 * (a.value + b.value) + 0.125 * h * (a.rate_plus - b.rate_minus);
            (a.value, mid, b.value)
        } else {
            (0.0, 0.0, 0.0)
        };
        let k1 = sys.rhs(&x, d0);
        let k2 = sys.rhs(&axpy(&x, 0.5 * h, &k1), dm);
        let k3 = sys.rhs(&axpy(&x, 0.5 * h, &k2), dm);
        let k4 = sys.rhs(&axpy(&x, h, &k3), d1);
        x = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));

        let y = sys.output(&x);
        if !y.is_finite() || y.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Unstable {
                time: (n + 1) as f64 * h,
                value: y.abs(),
            });
        }
        record(n + 1, &x, &mut history, &mut resp);
    }
    Ok(resp)
}
