//! Microgrid configuration and its `key = value` override format.
//!
//! Keys mirror the field names, with nested structs joined by a dot:
//!
//! ```text
//! # battery sized for a longer evening
//! battery.capacity_kwh = 13.5
//! initial_battery_soc = 0.2
//! ev.capacity_kwh = 60
//! export_limit_kw = none
//! ```

use thiserror::Error;

use crate::ems::{SocLimits, DEFAULT_PV_ZERO_EPSILON_KW};
use crate::storage::{BatteryConfig, StorageError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("invalid configuration: {0}")]
    Invalid(&'static str),
}

/// EV battery parameters; the charge power itself comes from the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EvConfig {
    pub capacity_kwh: f64,
    pub soc_max: f64,
    pub initial_soc: f64,
}

impl Default for EvConfig {
    fn default() -> Self {
        Self {
            capacity_kwh: 50.0,
            soc_max: 0.9,
            initial_soc: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicrogridConfig {
    pub battery: BatteryConfig,
    pub ev: EvConfig,
    pub initial_battery_soc: f64,
    /// PV output at or below this counts as no generation.
    pub pv_zero_epsilon_kw: f64,
    /// Absolute tolerance of the "lowest tariff of the day" test.
    pub lowest_tariff_epsilon: f64,
    /// Export cap; PV above it is curtailed. `None` means unlimited.
    pub export_limit_kw: Option<f64>,
}

impl Default for MicrogridConfig {
    fn default() -> Self {
        Self {
            battery: BatteryConfig::default(),
            ev: EvConfig::default(),
            initial_battery_soc: 0.5,
            pv_zero_epsilon_kw: DEFAULT_PV_ZERO_EPSILON_KW,
            lowest_tariff_epsilon: 1e-9,
            export_limit_kw: None,
        }
    }
}

impl MicrogridConfig {
    pub fn soc_limits(&self) -> SocLimits {
        SocLimits {
            min: self.battery.soc_min,
            max: self.battery.soc_max,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.battery.validate()?;
        let b = &self.battery;
        if !(b.soc_min..=b.soc_max).contains(&self.initial_battery_soc) {
            return Err(ConfigError::Invalid(
                "initial_battery_soc must lie within [battery.soc_min, battery.soc_max]",
            ));
        }
        let ev = &self.ev;
        if !(ev.capacity_kwh > 0.0 && ev.capacity_kwh.is_finite()) {
            return Err(StorageError::InvalidEv("capacity_kwh must be positive").into());
        }
        if !(0.0..=1.0).contains(&ev.soc_max) || !(0.0..=1.0).contains(&ev.initial_soc) {
            return Err(StorageError::InvalidEv("SoC values must lie in [0, 1]").into());
        }
        if !(self.pv_zero_epsilon_kw >= 0.0 && self.lowest_tariff_epsilon >= 0.0) {
            return Err(ConfigError::Invalid("tolerances must be non-negative"));
        }
        if let Some(cap) = self.export_limit_kw {
            if !(cap >= 0.0) {
                return Err(ConfigError::Invalid("export_limit_kw must be non-negative"));
            }
        }
        Ok(())
    }

    /// Applies `key = value` overrides on top of `self`.
    pub fn apply_overrides(mut self, text: &str) -> Result<Self, ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax { line })?;
            let invalid = || ConfigError::InvalidValue {
                line,
                key: key.to_owned(),
                value: value.to_owned(),
            };
            let num = || value.parse::<f64>().map_err(|_| invalid());

            match key {
                "battery.capacity_kwh" => self.battery.capacity_kwh = num()?,
                "battery.soc_min" => self.battery.soc_min = num()?,
                "battery.soc_max" => self.battery.soc_max = num()?,
                "battery.p_charge_max_kw" => self.battery.p_charge_max_kw = num()?,
                "battery.p_discharge_max_kw" => self.battery.p_discharge_max_kw = num()?,
                "battery.eta_charge" => self.battery.eta_charge = num()?,
                "battery.eta_discharge" => self.battery.eta_discharge = num()?,
                "ev.capacity_kwh" => self.ev.capacity_kwh = num()?,
                "ev.soc_max" => self.ev.soc_max = num()?,
                "ev.initial_soc" => self.ev.initial_soc = num()?,
                "initial_battery_soc" => self.initial_battery_soc = num()?,
                "pv_zero_epsilon_kw" => self.pv_zero_epsilon_kw = num()?,
                "lowest_tariff_epsilon" => self.lowest_tariff_epsilon = num()?,
                "export_limit_kw" => {
                    self.export_limit_kw = match value {
                        "none" => None,
                        _ => Some(num()?),
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_owned(),
                    })
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Defaults with the overrides in `text` applied.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::default().apply_overrides(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = MicrogridConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.battery.soc_min, 0.10);
        assert_eq!(cfg.battery.soc_max, 0.90);
        assert_eq!(cfg.battery.p_charge_max_kw, 5.0);
    }

    #[test]
    fn overrides_apply() {
        let cfg = MicrogridConfig::parse(
            "# comment\n\nbattery.capacity_kwh = 20\ninitial_battery_soc=0.2 # trailing\nexport_limit_kw = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.battery.capacity_kwh, 20.0);
        assert_eq!(cfg.initial_battery_soc, 0.2);
        assert_eq!(cfg.export_limit_kw, Some(3.0));
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(
            MicrogridConfig::parse("battery.capacity_kwh = 10\nbogus = 1\n"),
            Err(ConfigError::UnknownKey {
                line: 2,
                key: "bogus".into()
            })
        );
        assert_eq!(
            MicrogridConfig::parse("no equals sign"),
            Err(ConfigError::Syntax { line: 1 })
        );
        assert!(matches!(
            MicrogridConfig::parse("ev.soc_max = high"),
            Err(ConfigError::InvalidValue { line: 1, .. })
        ));
    }

    #[test]
    fn initial_soc_outside_window_is_rejected() {
        assert!(MicrogridConfig::parse("initial_battery_soc = 0.95").is_err());
        assert!(MicrogridConfig::parse("battery.soc_min = 0.95").is_err());
    }
}
