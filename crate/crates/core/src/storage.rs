//! Battery and EV state-of-charge models.
//!
//! Sign convention for the stationary battery: positive power discharges,
//! negative power charges. Commands that exceed a power or SoC limit are
//! clamped, and the power actually achieved is returned to the caller.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StorageError {
    #[error("invalid battery configuration: {0}")]
    InvalidBattery(&'static str),
    #[error("invalid EV configuration: {0}")]
    InvalidEv(&'static str),
}

/// Ratings and limits of the stationary battery.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    pub capacity_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_charge_max_kw: f64,
    pub p_discharge_max_kw: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
}

impl Default for BatteryConfig {
    /// 10-90 % SoC window and the 5 kW battery inverter rating.
    fn default() -> Self {
        Self {
            capacity_kwh: 10.0,
            soc_min: 0.10,
            soc_max: 0.90,
            p_charge_max_kw: 5.0,
            p_discharge_max_kw: 5.0,
            eta_charge: 0.95,
            eta_discharge: 0.95,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<(), StorageError> {
        let bad = StorageError::InvalidBattery;
        if !(self.capacity_kwh > 0.0 && self.capacity_kwh.is_finite()) {
            return Err(bad("capacity_kwh must be positive"));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(bad("require 0 <= soc_min < soc_max <= 1"));
        }
        if !(self.p_charge_max_kw > 0.0 && self.p_discharge_max_kw > 0.0) {
            return Err(bad("power limits must be positive"));
        }
        let in_unit = |eta: f64| eta > 0.0 && eta <= 1.0;
        if !(in_unit(self.eta_charge) && in_unit(self.eta_discharge)) {
            return Err(bad("efficiencies must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
}

impl BatteryState {
    pub fn new(soc: f64) -> Self {
        Self { soc }
    }
}

/// Applies a signed power command for `dt_hours` and returns the new state
/// together with the power actually achieved.
pub fn step_battery(
    state: BatteryState,
    config: &BatteryConfig,
    p_command_kw: f64,
    dt_hours: f64,
) -> (BatteryState, f64) {
    debug_assert!(dt_hours > 0.0);
    let cap = config.capacity_kwh;
    if p_command_kw < 0.0 {
        let stored_room = ((config.soc_max - state.soc) * cap).max(0.0);
        let p_room = stored_room / (config.eta_charge * dt_hours);
        let p = (-p_command_kw).min(config.p_charge_max_kw);
        if p >= p_room {
            let soc = if p_room > 0.0 { config.soc_max } else { state.soc };
            (BatteryState { soc }, -p_room)
        } else {
            let soc = state.soc + p * config.eta_charge * dt_hours / cap;
            (BatteryState { soc }, -p)
        }
    } else if p_command_kw > 0.0 {
        let stored_avail = ((state.soc - config.soc_min) * cap).max(0.0);
        let p_avail = stored_avail * config.eta_discharge / dt_hours;
        let p = p_command_kw.min(config.p_discharge_max_kw);
        if p >= p_avail {
            let soc = if p_avail > 0.0 { config.soc_min } else { state.soc };
            (BatteryState { soc }, p_avail)
        } else {
            let soc = state.soc - p * dt_hours / (config.eta_discharge * cap);
            (BatteryState { soc }, p)
        }
    } else {
        (state, 0.0)
    }
}

/// Grid or PV energy (kWh) needed to bring the battery up to `soc_max`.
pub fn charge_headroom_energy(state: BatteryState, config: &BatteryConfig) -> f64 {
    ((config.soc_max - state.soc) * config.capacity_kwh / config.eta_charge).max(0.0)
}

/// Electric vehicle as a constant-power charger with an SoC cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvState {
    pub connected: bool,
    pub soc: f64,
    pub soc_max: f64,
    pub capacity_kwh: f64,
    /// Requested charge power while connected.
    pub p_charge_kw: f64,
}

impl EvState {
    pub fn needs_charge(&self) -> bool {
        self.connected && self.soc < self.soc_max
    }
}

/// Charges the EV for one step. Returns the new state and the power drawn.
pub fn step_ev(state: EvState, dt_hours: f64) -> (EvState, f64) {
    debug_assert!(dt_hours > 0.0);
    if !state.needs_charge() || state.p_charge_kw <= 0.0 {
        return (state, 0.0);
    }
    let p_room = (state.soc_max - state.soc) * state.capacity_kwh / dt_hours;
    if state.p_charge_kw >= p_room {
        (
            EvState {
                soc: state.soc_max,
                ..state
            },
            p_room,
        )
    } else {
        let soc = state.soc + state.p_charge_kw * dt_hours / state.capacity_kwh;
        (EvState { soc, ..state }, state.p_charge_kw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lossless() -> BatteryConfig {
        BatteryConfig {
            eta_charge: 1.0,
            eta_discharge: 1.0,
            ..BatteryConfig::default()
        }
    }

    #[test]
    fn charge_clamped_by_soc_max() {
        // 5 kWh would overshoot to 1.0; only 4 kWh of headroom exists.
        let (s, p) = step_battery(BatteryState::new(0.5), &lossless(), -5.0, 1.0);
        assert!((s.soc - 0.9).abs() < 1e-12);
        assert!((p + 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_command_is_identity() {
        let (s, p) = step_battery(BatteryState::new(0.5), &lossless(), 0.0, 1.0);
        assert_eq!(s.soc, 0.5);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn empty_battery_cannot_discharge() {
        let (s, p) = step_battery(BatteryState::new(0.1), &lossless(), 3.0, 1.0);
        assert_eq!(p, 0.0);
        assert_eq!(s.soc, 0.1);
    }

    #[test]
    fn power_limit_applies_before_soc_limit() {
        let cfg = BatteryConfig {
            capacity_kwh: 100.0,
            ..lossless()
        };
        let (_, p) = step_battery(BatteryState::new(0.5), &cfg, 8.0, 1.0);
        assert_eq!(p, 5.0);
        let (_, p) = step_battery(BatteryState::new(0.5), &cfg, -8.0, 1.0);
        assert_eq!(p, -5.0);
    }

    #[test]
    fn headroom_energy() {
        let cfg = lossless();
        assert_eq!(charge_headroom_energy(BatteryState::new(0.9), &cfg), 0.0);
        assert!((charge_headroom_energy(BatteryState::new(0.5), &cfg) - 4.0).abs() < 1e-12);
        let lossy = BatteryConfig {
            eta_charge: 0.8,
            ..cfg
        };
        // 4 kWh stored needs 4 / 0.8 at the input.
        assert!((charge_headroom_energy(BatteryState::new(0.5), &lossy) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ev_charges_at_requested_power() {
        let ev = EvState {
            connected: true,
            soc: 0.5,
            soc_max: 0.9,
            capacity_kwh: 30.0,
            p_charge_kw: 3.0,
        };
        let (next, p) = step_ev(ev, 1.0);
        assert_eq!(p, 3.0);
        assert!((next.soc - 0.6).abs() < 1e-12);

        let (same, p) = step_ev(EvState { connected: false, ..ev }, 1.0);
        assert_eq!(p, 0.0);
        assert_eq!(same, EvState { connected: false, ..ev });

        let (_, p) = step_ev(EvState { soc: 0.9, ..ev }, 1.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn ev_stops_at_soc_max() {
        let ev = EvState {
            connected: true,
            soc: 0.88,
            soc_max: 0.9,
            capacity_kwh: 30.0,
            p_charge_kw: 3.0,
        };
        let (next, p) = step_ev(ev, 1.0);
        assert!((p - 0.6).abs() < 1e-12);
        assert_eq!(next.soc, 0.9);
    }

    #[test]
    fn config_validation() {
        assert!(BatteryConfig::default().validate().is_ok());
        let bad = BatteryConfig {
            soc_min: 0.9,
            soc_max: 0.1,
            ..BatteryConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BatteryConfig {
            eta_charge: 0.0,
            ..BatteryConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn soc_stays_in_window_and_energy_balances(
            commands in prop::collection::vec(-8.0f64..8.0, 1..60),
            soc0 in 0.1f64..0.9,
            dt in 0.05f64..2.0,
        ) {
            let cfg = BatteryConfig::default();
            let mut s = BatteryState::new(soc0);
            let mut charged = 0.0;
            let mut discharged = 0.0;
            for cmd in commands {
                let (next, p) = step_battery(s, &cfg, cmd, dt);
                prop_assert!(next.soc >= cfg.soc_min && next.soc <= cfg.soc_max);
                prop_assert!(p == 0.0 || p.signum() == cmd.signum());
                prop_assert!(p.abs() <= cmd.abs());
                if p < 0.0 { charged += -p * dt } else { discharged += p * dt }
                s = next;
            }
            let lhs = cfg.capacity_kwh * (s.soc - soc0);
            let rhs = cfg.eta_charge * charged - discharged / cfg.eta_discharge;
            prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }

        #[test]
        fn more_headroom_never_charges_less(
            soc_a in 0.1f64..0.9,
            soc_b in 0.1f64..0.9,
            cmd in -8.0f64..0.0,
        ) {
            let cfg = BatteryConfig::default();
            let (lo, hi) = if soc_a <= soc_b { (soc_a, soc_b) } else { (soc_b, soc_a) };
            let (_, p_lo) = step_battery(BatteryState::new(lo), &cfg, cmd, 1.0);
            let (_, p_hi) = step_battery(BatteryState::new(hi), &cfg, cmd, 1.0);
            prop_assert!(-p_lo >= -p_hi);
        }
    }
}
