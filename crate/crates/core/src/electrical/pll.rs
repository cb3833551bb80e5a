//! Synchronous-reference-frame PLL.
//!
//! The loop drives the normalized q-axis voltage to zero with a PI filter
//! around a feedforward nominal frequency:
//!
//! ```text
//! e      = v_q / |v_dq|          (~ sin of the phase error)
//! w_hat  = w_nom + kp e + ki * integral(e)
//! theta' = w_hat
//! ```
//!
//! Linearized, the error dynamics are `s^2 + kp s + ki`, so the gains follow
//! from a damping ratio and natural frequency exactly like the current loop.

use super::{balanced_abc, park_transform, wrap_angle, Dq, DqSimState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllGains {
    pub kp: f64,
    pub ki: f64,
    /// Feedforward frequency in rad/s.
    pub omega_nominal: f64,
}

impl PllGains {
    pub fn from_bandwidth(xi: f64, omega_n: f64, omega_nominal: f64) -> Self {
        Self {
            kp: 2.0 * xi * omega_n,
            ki: omega_n * omega_n,
            omega_nominal,
        }
    }
}

impl Default for PllGains {
    /// About 50 Hz of loop bandwidth on a 50 Hz grid, well below the
    /// current loop.
    fn default() -> Self {
        use std::f64::consts::PI;
        Self::from_bandwidth(0.707, 2.0 * PI * 50.0, 2.0 * PI * 50.0)
    }
}

/// Advances the PLL by `dt` seconds.
///
/// Returns the grid voltage in the frame the step started in, which is the
/// frame the controller and plant use for this step. `dt` should not exceed
/// 1e-4 s at the default bandwidth.
pub fn pll_step(state: &mut DqSimState, gains: &PllGains, v_abc: [f64; 3], dt: f64) -> Dq {
    let v = park_transform(v_abc, state.theta);
    let mag = v.norm();
    let err = if mag > 0.0 { v.q / mag } else { 0.0 };
    state.pll_integrator += gains.ki * err * dt;
    state.omega_hat = gains.omega_nominal + gains.kp * err + state.pll_integrator;
    state.theta = wrap_angle(state.theta + state.omega_hat * dt);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllSample {
    pub t: f64,
    pub omega_hat: f64,
    pub v_q: f64,
}

/// Runs the PLL alone against an ideal balanced source whose frequency
/// follows `frequency_hz(t)`.
pub fn simulate_pll<F>(
    gains: &PllGains,
    amplitude: f64,
    frequency_hz: F,
    initial_phase_error: f64,
    duration_s: f64,
    dt: f64,
) -> Vec<PllSample>
where
    F: Fn(f64) -> f64,
{
    let steps = (duration_s / dt).round() as usize;
    let mut state = DqSimState::new(-initial_phase_error, gains.omega_nominal);
    let mut phi = 0.0;
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * dt;
        let v = pll_step(&mut state, gains, balanced_abc(amplitude, phi), dt);
        phi = wrap_angle(phi + 2.0 * std::f64::consts::PI * frequency_hz(t) * dt);
        out.push(PllSample {
            t: t + dt,
            omega_hat: state.omega_hat,
            v_q: v.q,
        });
    }
    out
}

/// First time after which `|w_hat - omega_target|` stays below `tolerance`.
pub fn pll_lock_time(samples: &[PllSample], omega_target: f64, tolerance: f64) -> Option<f64> {
    let last_bad = samples
        .iter()
        .rposition(|s| (s.omega_hat - omega_target).abs() >= tolerance);
    match last_bad {
        None => Some(0.0),
        Some(i) if i + 1 < samples.len() => Some(samples[i].t),
        Some(_) => None,
    }
}
