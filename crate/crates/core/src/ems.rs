//! Rule-based energy management: four cases, six operating modes.
//!
//! Every step is classified by comparing PV generation with the total load
//! (household load plus EV charging):
//!
//! | case | condition                              | modes      |
//! |------|----------------------------------------|------------|
//! | 1    | PV above total load (surplus)          | M1, M2     |
//! | 2    | PV present, at or below total load     | M3, M4     |
//! | 3    | no PV, tariff is not the daily lowest  | M5, M6     |
//! | 4    | no PV, tariff is the daily lowest      | M5, M6     |
//!
//! The EV is treated strictly as load: `P_L_total = P_load + P_ev` while the
//! EV is connected and below its SoC ceiling.

use std::fmt;

use thiserror::Error;

use crate::profiles::TimeSeriesProfile;

/// Default threshold below which PV output counts as "no generation".
pub const DEFAULT_PV_ZERO_EPSILON_KW: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmsError {
    #[error("remaining power needs PV above total load (pv {p_pv} kW, load {p_l_total} kW)")]
    NoSurplus { p_pv: f64, p_l_total: f64 },
    #[error("demanding power needs PV at or below total load (pv {p_pv} kW, load {p_l_total} kW)")]
    NoDeficit { p_pv: f64, p_l_total: f64 },
    #[error("forecast lengths differ: pv {pv} samples, load {load} samples")]
    ForecastMismatch { pv: usize, load: usize },
}

/// Operating mode selected for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Battery idle, PV surplus exported.
    M1,
    /// PV surplus charges the battery.
    M2,
    /// Grid covers the deficit.
    M3,
    /// Battery covers the deficit.
    M4,
    /// No PV, battery idle, grid serves the load.
    M5,
    /// No PV, battery charges from the grid.
    M6,
}

impl Mode {
    pub const ALL: [Mode; 6] = [Mode::M1, Mode::M2, Mode::M3, Mode::M4, Mode::M5, Mode::M6];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.to_string() == s)
    }

    /// Case numbers this mode may be selected under.
    pub fn allowed_in(self, case: Case) -> bool {
        matches!(
            (case, self),
            (Case::Surplus, Mode::M1 | Mode::M2)
                | (Case::Deficit, Mode::M3 | Mode::M4)
                | (Case::NoPvPeak | Case::NoPvLowest, Mode::M5 | Mode::M6)
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.index() + 1)
    }
}

/// Case of the decision flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Case 1: PV generation above total load.
    Surplus = 1,
    /// Case 2: PV generation present but not above total load.
    Deficit = 2,
    /// Case 3: no PV and the tariff is not the lowest of the day.
    NoPvPeak = 3,
    /// Case 4: no PV and the tariff is the lowest of the day.
    NoPvLowest = 4,
}

impl Case {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocLimits {
    pub min: f64,
    pub max: f64,
}

/// Everything the decision engine looks at for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionInputs {
    pub p_pv: f64,
    pub p_load: f64,
    pub ev_connected: bool,
    pub ev_soc: f64,
    pub ev_soc_max: f64,
    /// EV charge power for this step.
    pub p_ev_request: f64,
    pub tariff: f64,
    pub fit: f64,
    pub battery_soc: f64,
    pub tariff_is_lowest: bool,
    /// Next-day PV is expected to cover the battery's charge headroom.
    pub forecast_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub case: Case,
    pub mode: Mode,
    pub p_l_total: f64,
    /// Remaining power; nonzero only in case 1.
    pub p_r: f64,
    /// Demanding power; nonzero only in case 2.
    pub p_d: f64,
}

pub fn total_load_power(
    p_load: f64,
    ev_connected: bool,
    ev_soc: f64,
    ev_soc_max: f64,
    p_ev_request: f64,
) -> f64 {
    if ev_connected && ev_soc < ev_soc_max {
        p_load + p_ev_request
    } else {
        p_load
    }
}

/// PV surplus over the total load.
pub fn remaining_power(p_pv: f64, p_l_total: f64) -> Result<f64, EmsError> {
    if p_pv > p_l_total {
        Ok(p_pv - p_l_total)
    } else {
        Err(EmsError::NoSurplus { p_pv, p_l_total })
    }
}

/// Load not covered by PV.
pub fn demanding_power(p_l_total: f64, p_pv: f64) -> Result<f64, EmsError> {
    if p_pv <= p_l_total {
        Ok(p_l_total - p_pv)
    } else {
        Err(EmsError::NoDeficit { p_pv, p_l_total })
    }
}

pub fn classify_case(p_pv: f64, p_l_total: f64, tariff_is_lowest: bool, pv_zero_epsilon: f64) -> Case {
    if p_pv <= pv_zero_epsilon {
        if tariff_is_lowest {
            Case::NoPvLowest
        } else {
            Case::NoPvPeak
        }
    } else if p_pv > p_l_total {
        Case::Surplus
    } else {
        Case::Deficit
    }
}

/// Runs the decision flow for one step.
pub fn decide_mode(inputs: &DecisionInputs, soc: SocLimits, pv_zero_epsilon: f64) -> Decision {
    let p_l_total = total_load_power(
        inputs.p_load,
        inputs.ev_connected,
        inputs.ev_soc,
        inputs.ev_soc_max,
        inputs.p_ev_request,
    );
    let case = classify_case(inputs.p_pv, p_l_total, inputs.tariff_is_lowest, pv_zero_epsilon);
    let cheap = inputs.tariff < inputs.fit;
    let can_charge = inputs.battery_soc < soc.max;
    let can_discharge = inputs.battery_soc > soc.min;

    let (mode, p_r, p_d) = match case {
        Case::Surplus => {
            let p_r = inputs.p_pv - p_l_total;
            let mode = if can_charge && cheap { Mode::M2 } else { Mode::M1 };
            (mode, p_r, 0.0)
        }
        Case::Deficit => {
            let p_d = p_l_total - inputs.p_pv;
            // An empty battery at a high tariff still leaves the grid to
            // serve the load.
            let mode = if !cheap && can_discharge { Mode::M4 } else { Mode::M3 };
            (mode, 0.0, p_d)
        }
        Case::NoPvPeak => {
            let mode = if cheap && can_charge { Mode::M6 } else { Mode::M5 };
            (mode, 0.0, 0.0)
        }
        Case::NoPvLowest => {
            let mode = if !inputs.forecast_ok && can_charge {
                Mode::M6
            } else {
                Mode::M5
            };
            (mode, 0.0, 0.0)
        }
    };
    Decision {
        case,
        mode,
        p_l_total,
        p_r,
        p_d,
    }
}

/// True iff the hour-wise PV surplus of the next-day forecast carries at
/// least `battery_headroom_energy` kWh.
pub fn forecast_sufficient(
    forecast_pv: &TimeSeriesProfile,
    forecast_load: &TimeSeriesProfile,
    battery_headroom_energy: f64,
) -> Result<bool, EmsError> {
    if forecast_pv.len() != forecast_load.len() {
        return Err(EmsError::ForecastMismatch {
            pv: forecast_pv.len(),
            load: forecast_load.len(),
        });
    }
    let dt = forecast_pv.step_hours();
    let surplus: f64 = forecast_pv
        .values()
        .iter()
        .zip(forecast_load.values())
        .map(|(pv, load)| (pv - load).max(0.0) * dt)
        .sum();
    Ok(surplus >= battery_headroom_energy)
}
