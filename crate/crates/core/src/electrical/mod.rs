//! dq-frame vector current control of the PV and battery inverters.
//!
//! The inverter is an average model (three controlled voltage sources)
//! feeding the grid through an RL filter. A synchronous-reference-frame PLL
//! orients the dq frame on the grid voltage, so with amplitude-invariant
//! transforms the active and reactive power are
//!
//! ```text
//! P =  3/2 * V_d * I_d
//! Q = -3/2 * V_d * I_q
//! ```
//!
//! and power setpoints from the dispatch layer map directly onto current
//! references. Both inverters use the same controller, parametrized by
//! [`FilterParams`] and [`PiGains`].

mod controller;
mod ode;
mod pll;
mod plant;
mod tracking;
mod transforms;

use std::f64::consts::PI;

use thiserror::Error;

pub use controller::controller_step;
pub use ode::rk4_step;
pub use pll::{pll_lock_time, pll_step, simulate_pll, PllGains, PllSample};
pub use plant::plant_step;
pub use tracking::{
    run_tracking_sim, step_metrics, PowerStep, StepMetrics, TrackingConfig, TrackingTrace,
    WaveformSample, WAVEFORM_COLUMNS,
};
pub use transforms::{balanced_abc, inverse_park, park_transform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElectricalError {
    #[error("d-axis voltage must be positive, got {0} V")]
    DegenerateVoltage(f64),
    #[error("simulation state became non-finite at step {step}")]
    Diverged { step: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// A quantity in the synchronous frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dq {
    pub d: f64,
    pub q: f64,
}

impl Dq {
    pub const ZERO: Dq = Dq { d: 0.0, q: 0.0 };

    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    pub fn norm(self) -> f64 {
        self.d.hypot(self.q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    /// Line-to-line RMS voltage.
    pub v_ll_rms: f64,
    pub frequency_hz: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            v_ll_rms: 400.0,
            frequency_hz: 50.0,
        }
    }
}

impl GridParams {
    /// Peak phase voltage, which is `V_d` once the PLL is locked.
    pub fn v_d_nominal(&self) -> f64 {
        self.v_ll_rms * 2f64.sqrt() / 3f64.sqrt()
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    pub l_f: f64,
    pub r_f: f64,
}

impl Default for FilterParams {
    /// 7 mH, 0.1 Ohm.
    fn default() -> Self {
        Self {
            l_f: 0.007,
            r_f: 0.1,
        }
    }
}

/// PI gains; `ki / kp` is the integral corner frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

impl PiGains {
    pub fn corner_frequency(&self) -> f64 {
        self.ki / self.kp
    }
}

/// Pole placement for a PI controller on the plant `1 / (L s + R)`.
///
/// Closing the loop gives `L s^2 + (kp + R) s + ki`; matching it to
/// `s^2 + 2 xi wn s + wn^2` with the small `R` neglected yields
/// `kp = 2 xi wn L` and `ki = wn^2 L`. With the default filter, `xi = 0.707`
/// and `wn = 2 pi 300` this gives `kp = 18.657`.
pub fn tune_pi(filter: &FilterParams, xi: f64, omega_n: f64) -> PiGains {
    PiGains {
        kp: 2.0 * xi * omega_n * filter.l_f,
        ki: omega_n * omega_n * filter.l_f,
    }
}

/// Current references for a power setpoint at d-axis voltage `v_d`.
pub fn current_refs(p_ref: f64, q_ref: f64, v_d: f64) -> Result<Dq, ElectricalError> {
    if !(v_d > 0.0) {
        return Err(ElectricalError::DegenerateVoltage(v_d));
    }
    Ok(Dq {
        d: 2.0 * p_ref / (3.0 * v_d),
        q: -2.0 * q_ref / (3.0 * v_d),
    })
}

/// Active and reactive power from `V_d` and the dq currents.
pub fn power_from_currents(v_d: f64, i: Dq) -> (f64, f64) {
    (1.5 * v_d * i.d, -1.5 * v_d * i.q)
}

/// Electrical state of one inverter while simulating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqSimState {
    /// PLL angle, wrapped to `[0, 2 pi)`.
    pub theta: f64,
    pub omega_hat: f64,
    pub pll_integrator: f64,
    pub id: f64,
    pub iq: f64,
    pub ctrl_int_d: f64,
    pub ctrl_int_q: f64,
}

impl DqSimState {
    pub fn new(theta: f64, omega_hat: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            omega_hat,
            pll_integrator: 0.0,
            id: 0.0,
            iq: 0.0,
            ctrl_int_d: 0.0,
            ctrl_int_q: 0.0,
        }
    }

    pub fn currents(&self) -> Dq {
        Dq::new(self.id, self.iq)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.theta,
            self.omega_hat,
            self.pll_integrator,
            self.id,
            self.iq,
            self.ctrl_int_d,
            self.ctrl_int_q,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(2.0 * PI);
    // rem_euclid can return exactly 2 pi for tiny negative inputs.
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Peak overshoot of a standard second-order step response.
pub fn second_order_overshoot(xi: f64) -> f64 {
    if xi >= 1.0 {
        0.0
    } else {
        (-PI * xi / (1.0 - xi * xi).sqrt()).exp()
    }
}
