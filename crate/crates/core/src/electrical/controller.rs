use super::{DqSimState, Dq, FilterParams, PiGains};

/// One sample of the decoupled PI current controller.
///
/// The command is the PI output on the current error plus grid-voltage
/// feedforward and cross-coupling cancellation:
///
/// ```text
/// v_d = PI(i_d_ref - i_d) + v_grid_d - w L i_q
/// v_q = PI(i_q_ref - i_q) + v_grid_q + w L i_d
/// ```
///
/// so each axis sees the plain first-order plant `1 / (L s + R)`.
#[allow(clippy::too_many_arguments)]
pub fn controller_step(
    state: &mut DqSimState,
    gains: &PiGains,
    filter: &FilterParams,
    refs: Dq,
    measured: Dq,
    v_grid: Dq,
    omega: f64,
    dt: f64,
) -> Dq {
    let err = Dq::new(refs.d - measured.d, refs.q - measured.q);
    let pi_d = gains.kp * err.d + state.ctrl_int_d;
    let pi_q = gains.kp * err.q + state.ctrl_int_q;
    state.ctrl_int_d += gains.ki * err.d * dt;
    state.ctrl_int_q += gains.ki * err.q * dt;
    let wl = omega * filter.l_f;
    Dq {
        d: pi_d + v_grid.d - wl * measured.q,
        q: pi_q + v_grid.q + wl * measured.d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains() -> PiGains {
        PiGains { kp: 18.66, ki: 24871.4 }
    }

    #[test]
    fn zero_error_gives_feedforward_and_decoupling() {
        let mut s = DqSimState::new(0.0, 314.0);
        let f = FilterParams::default();
        let i = Dq::new(12.0, -3.0);
        let v = controller_step(&mut s, &gains(), &f, i, i, Dq::new(326.6, 0.5), 314.0, 2e-5);
        let wl = 314.0 * f.l_f;
        assert_eq!(v.d, 326.6 + wl * 3.0);
        assert_eq!(v.q, 0.5 + wl * 12.0);
        assert_eq!((s.ctrl_int_d, s.ctrl_int_q), (0.0, 0.0));
    }

    #[test]
    fn rotating_every_input_rotates_the_command() {
        // Multiplying all dq vectors by j maps (d, q) to (-q, d).
        let rot = |x: Dq| Dq::new(-x.q, x.d);
        let f = FilterParams::default();
        let refs = Dq::new(20.0, 1.0);
        let meas = Dq::new(15.0, -2.0);
        let vg = Dq::new(326.6, 4.0);
        let mut a = DqSimState::new(0.0, 314.0);
        let mut b = a;
        let va = controller_step(&mut a, &gains(), &f, refs, meas, vg, 314.0, 2e-5);
        let vb = controller_step(&mut b, &gains(), &f, rot(refs), rot(meas), rot(vg), 314.0, 2e-5);
        let expected = rot(va);
        assert!((vb.d - expected.d).abs() < 1e-9);
        assert!((vb.q - expected.q).abs() < 1e-9);
    }

    #[test]
    fn integrator_accumulates_error() {
        let mut s = DqSimState::new(0.0, 314.0);
        controller_step(
            &mut s,
            &gains(),
            &FilterParams::default(),
            Dq::new(1.0, 0.0),
            Dq::ZERO,
            Dq::ZERO,
            0.0,
            1e-4,
        );
        assert!((s.ctrl_int_d - 2.48714).abs() < 1e-9);
        assert_eq!(s.ctrl_int_q, 0.0);
    }
}
