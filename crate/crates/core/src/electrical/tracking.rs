//! Closed-loop simulation: PLL, current controller and RL plant together.

use std::fmt::Write as _;

use super::{
    balanced_abc, controller_step, current_refs, plant_step, pll_step, power_from_currents,
    tune_pi, wrap_angle, Dq, DqSimState, ElectricalError, FilterParams, GridParams, PiGains,
    PllGains,
};

/// Waveform file header.
pub const WAVEFORM_COLUMNS: &str = "t_s,id_ref,iq_ref,id,iq,vd,vq,p_w,q_var";

/// Active-power setpoint that takes effect at `t_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStep {
    pub t_s: f64,
    pub p_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingConfig {
    pub grid: GridParams,
    pub filter: FilterParams,
    pub gains: PiGains,
    pub pll: PllGains,
    pub dt: f64,
    pub duration_s: f64,
    /// Active-power setpoints; reactive power is held at zero.
    pub p_steps: Vec<PowerStep>,
    /// First-order reference filter with time constant `kp / ki`, which
    /// cancels the PI zero and leaves a plain second-order response.
    pub reference_prefilter: bool,
}

impl TrackingConfig {
    /// Default grid and filter, gains tuned for `xi = 0.707`,
    /// `wn = 2 pi 300`, a 20 us step and a 50 ms horizon.
    pub fn with_steps(p_steps: Vec<PowerStep>) -> Self {
        let filter = FilterParams::default();
        let grid = GridParams::default();
        Self {
            gains: tune_pi(&filter, 0.707, 2.0 * std::f64::consts::PI * 300.0),
            pll: PllGains::from_bandwidth(0.707, 2.0 * std::f64::consts::PI * 50.0, grid.omega()),
            grid,
            filter,
            dt: 20e-6,
            duration_s: 0.05,
            p_steps,
            reference_prefilter: true,
        }
    }

    fn p_ref_at(&self, t: f64) -> f64 {
        self.p_steps
            .iter()
            .rev()
            .find(|s| s.t_s <= t + 1e-12)
            .map_or(0.0, |s| s.p_w)
    }

    fn validate(&self) -> Result<(), ElectricalError> {
        let bad = ElectricalError::InvalidParameter;
        if !(self.dt > 0.0 && self.duration_s > 0.0) {
            return Err(bad("dt and duration must be positive"));
        }
        if !(self.filter.l_f > 0.0 && self.filter.r_f >= 0.0) {
            return Err(bad("filter inductance must be positive and resistance non-negative"));
        }
        if !(self.gains.kp > 0.0 && self.gains.ki > 0.0) {
            return Err(bad("PI gains must be positive"));
        }
        if !(self.grid.v_ll_rms > 0.0 && self.grid.frequency_hz > 0.0) {
            return Err(bad("grid voltage and frequency must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformSample {
    pub t_s: f64,
    pub refs: Dq,
    pub currents: Dq,
    pub v_grid: Dq,
    pub p_w: f64,
    pub q_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingTrace {
    pub samples: Vec<WaveformSample>,
    pub final_state: DqSimState,
}

impl TrackingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(WAVEFORM_COLUMNS);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3}",
                s.t_s,
                s.refs.d,
                s.refs.q,
                s.currents.d,
                s.currents.q,
                s.v_grid.d,
                s.v_grid.q,
                s.p_w,
                s.q_var
            );
        }
        out
    }

    /// `(t, P)` pairs for [`step_metrics`].
    pub fn power_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t_s, s.p_w)).collect()
    }
}

/// Simulates the inverter tracking the power setpoints with `Q = 0`.
///
/// The PLL starts locked onto the grid. Each step the PLL measures the grid
/// voltage, the references are computed from the measured `V_d`, the
/// controller issues a voltage command and the plant is integrated over `dt`
/// in the PLL frame.
pub fn run_tracking_sim(config: &TrackingConfig) -> Result<TrackingTrace, ElectricalError> {
    config.validate()?;
    let dt = config.dt;
    let amplitude = config.grid.v_d_nominal();
    let omega_grid = config.grid.omega();
    let steps = (config.duration_s / dt).round() as usize;
    let alpha = 1.0 - (-dt * config.gains.ki / config.gains.kp).exp();

    let mut state = DqSimState::new(0.0, config.pll.omega_nominal);
    let mut phi = 0.0;
    let mut filtered = Dq::ZERO;
    let mut samples = Vec::with_capacity(steps);

    for k in 0..steps {
        let t = k as f64 * dt;
        let v_grid = pll_step(&mut state, &config.pll, balanced_abc(amplitude, phi), dt);
        let omega = state.omega_hat;

        let refs = current_refs(config.p_ref_at(t), 0.0, v_grid.d)?;
        let target = if config.reference_prefilter {
            filtered.d += alpha * (refs.d - filtered.d);
            filtered.q += alpha * (refs.q - filtered.q);
            filtered
        } else {
            refs
        };

        let measured = state.currents();
        let v_inv = controller_step(
            &mut state,
            &config.gains,
            &config.filter,
            target,
            measured,
            v_grid,
            omega,
            dt,
        );
        let next = plant_step(measured, v_inv, v_grid, omega, &config.filter, dt);
        state.id = next.d;
        state.iq = next.q;
        phi = wrap_angle(phi + omega_grid * dt);

        if !state.is_finite() {
            return Err(ElectricalError::Diverged { step: k });
        }
        let (p_w, q_var) = power_from_currents(v_grid.d, next);
        samples.push(WaveformSample {
            t_s: t + dt,
            refs,
            currents: next,
            v_grid,
            p_w,
            q_var,
        });
    }
    Ok(TrackingTrace {
        samples,
        final_state: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub final_value: f64,
    /// Peak excursion past the target as a fraction of the step size.
    pub overshoot: f64,
    /// Time after the step until the response stays inside the band.
    pub settling_time: f64,
    /// `|final - target| / |target|`, or absolute when the target is zero.
    pub steady_state_error: f64,
}

/// Step-response metrics of `series` for a step from `initial` to `target`
/// at `t_step`, with a settling band of `band` times the step size.
pub fn step_metrics(
    series: &[(f64, f64)],
    t_step: f64,
    initial: f64,
    target: f64,
    band: f64,
) -> StepMetrics {
    let after: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= t_step).collect();
    let size = target - initial;
    let final_value = after.last().map_or(f64::NAN, |s| s.1);
    let overshoot = if size == 0.0 {
        0.0
    } else {
        after
            .iter()
            .map(|(_, y)| (y - target) / size)
            .fold(0.0, f64::max)
    };
    let tol = band * size.abs();
    let settling_time = match after.iter().rposition(|(_, y)| (y - target).abs() > tol) {
        None => 0.0,
        Some(i) if i + 1 < after.len() => after[i + 1].0 - t_step,
        Some(_) => f64::INFINITY,
    };
    let steady_state_error = if target == 0.0 {
        final_value.abs()
    } else {
        ((final_value - target) / target).abs()
    };
    StepMetrics {
        final_value,
        overshoot,
        settling_time,
        steady_state_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electrical::second_order_overshoot;

    fn ten_kw() -> TrackingConfig {
        TrackingConfig::with_steps(vec![PowerStep { t_s: 0.0, p_w: 10_000.0 }])
    }

    #[test]
    fn tracks_a_ten_kilowatt_step() {
        let trace = run_tracking_sim(&ten_kw()).unwrap();
        let m = step_metrics(&trace.power_series(), 0.0, 0.0, 10_000.0, 0.02);
        assert!(m.steady_state_error < 1e-3, "{m:?}");
        assert!(m.overshoot <= 0.10, "{m:?}");
        assert!(m.settling_time <= 6e-3, "{m:?}");
        let last = trace.samples.last().unwrap();
        assert!((last.currents.d - 20.4124).abs() < 20.4124e-3);
        assert!(last.q_var.abs() < 100.0);
    }

    #[test]
    fn response_matches_the_second_order_design() {
        let trace = run_tracking_sim(&ten_kw()).unwrap();
        let m = step_metrics(&trace.power_series(), 0.0, 0.0, 10_000.0, 0.02);
        let xi = 0.707;
        let wn = 2.0 * std::f64::consts::PI * 300.0;
        let os = second_order_overshoot(xi);
        assert!((m.overshoot - os).abs() < 0.2 * os, "{} vs {os}", m.overshoot);
        let ts = 4.0 / (xi * wn);
        assert!((m.settling_time - ts).abs() < 0.2 * ts, "{} vs {ts}", m.settling_time);
    }

    #[test]
    fn without_prefilter_the_pi_zero_adds_overshoot() {
        let mut cfg = ten_kw();
        cfg.reference_prefilter = false;
        let trace = run_tracking_sim(&cfg).unwrap();
        let m = step_metrics(&trace.power_series(), 0.0, 0.0, 10_000.0, 0.02);
        // (2 xi wn s + wn^2) / (s^2 + 2 xi wn s + wn^2) peaks about 20 % high.
        assert!((0.18..0.23).contains(&m.overshoot), "{m:?}");
        assert!(m.steady_state_error < 1e-3);
    }

    #[test]
    fn integrator_carries_the_resistive_drop() {
        let trace = run_tracking_sim(&ten_kw()).unwrap();
        let s = trace.final_state;
        let r_drop = FilterParams::default().r_f * s.id;
        assert!((s.ctrl_int_d - r_drop).abs() < 1e-3 * r_drop, "{} vs {r_drop}", s.ctrl_int_d);
    }

    #[test]
    fn returns_to_zero_without_windup() {
        let cfg = TrackingConfig::with_steps(vec![
            PowerStep { t_s: 0.0, p_w: 10_000.0 },
            PowerStep { t_s: 0.025, p_w: 0.0 },
        ]);
        let trace = run_tracking_sim(&cfg).unwrap();
        let last = trace.samples.last().unwrap();
        assert!(last.p_w.abs() < 10.0, "{}", last.p_w);
        assert!(trace.final_state.ctrl_int_d.abs() < 1e-2);
    }

    #[test]
    fn battery_inverter_rating() {
        let cfg = TrackingConfig::with_steps(vec![PowerStep { t_s: 0.0, p_w: 5_000.0 }]);
        let trace = run_tracking_sim(&cfg).unwrap();
        let id = trace.samples.last().unwrap().currents.d;
        // 2 * 5000 / (3 * 326.6)
        assert!((id - 10.206).abs() < 0.01, "{id}");
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = ten_kw();
        // kp * dt / L > 2 makes the sampled current loop unstable while the
        // PLL is still fine.
        cfg.dt = 1e-3;
        cfg.duration_s = 2.0;
        match run_tracking_sim(&cfg) {
            Err(ElectricalError::Diverged { step }) => assert!(step > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn metrics_on_a_known_series() {
        let series = [(0.0, 0.0), (1.0, 1.2), (2.0, 0.9), (3.0, 1.01), (4.0, 1.0)];
        let m = step_metrics(&series, 0.0, 0.0, 1.0, 0.02);
        assert!((m.overshoot - 0.2).abs() < 1e-12);
        assert_eq!(m.settling_time, 3.0);
        assert_eq!(m.final_value, 1.0);
    }
}
