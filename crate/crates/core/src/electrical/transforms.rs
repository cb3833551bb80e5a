//! Amplitude-invariant Park transform.
//!
//! With phase a equal to `V cos(phi)`, the projection gives
//! `d = V cos(phi - theta)` and `q = V sin(phi - theta)`.

use std::f64::consts::PI;

use super::Dq;

const SHIFT: f64 = 2.0 * PI / 3.0;

pub fn park_transform(v_abc: [f64; 3], theta: f64) -> Dq {
    let [a, b, c] = v_abc;
    let k = 2.0 / 3.0;
    Dq {
        d: k * (a * theta.cos() + b * (theta - SHIFT).cos() + c * (theta + SHIFT).cos()),
        q: -k * (a * theta.sin() + b * (theta - SHIFT).sin() + c * (theta + SHIFT).sin()),
    }
}

pub fn inverse_park(dq: Dq, theta: f64) -> [f64; 3] {
    let phase = |shift: f64| dq.d * (theta + shift).cos() - dq.q * (theta + shift).sin();
    [phase(0.0), phase(-SHIFT), phase(SHIFT)]
}

/// Balanced three-phase set of peak `amplitude` with phase a at angle `phi`.
pub fn balanced_abc(amplitude: f64, phi: f64) -> [f64; 3] {
    [
        amplitude * phi.cos(),
        amplitude * (phi - SHIFT).cos(),
        amplitude * (phi + SHIFT).cos(),
    ]
}
