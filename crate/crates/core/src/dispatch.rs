//! The simulation loop: decide, dispatch, advance storage, bill.
//!
//! Sign conventions follow the bus view: grid power is positive on import
//! and negative on export, battery power is positive on discharge. Every
//! step satisfies `p_pv + p_grid + p_batt = p_l_total`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::config::{ConfigError, MicrogridConfig};
use crate::ems::{self, Case, Decision, DecisionInputs, Mode};
use crate::profiles::{tariff_is_lowest, ProfileError, Scenario, ScenarioError};
use crate::storage::{self, BatteryConfig, BatteryState, EvState};

/// Trace file header.
pub const TRACE_COLUMNS: &str =
    "t,case,mode,p_pv_kw,p_grid_kw,p_batt_kw,p_ev_kw,p_l_total_kw,soc,ev_soc,cash_flow";

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid scenario:\n{0}")]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Ems(#[from] ems::EmsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerFlows {
    /// PV power used on the bus.
    pub p_pv: f64,
    pub p_pv_curtailed: f64,
    pub p_grid: f64,
    pub p_batt: f64,
    pub p_l_total: f64,
}

impl PowerFlows {
    /// `p_pv + p_grid + p_batt - p_l_total`; zero up to rounding.
    pub fn balance_error(&self) -> f64 {
        self.p_pv + self.p_grid + self.p_batt - self.p_l_total
    }

    pub fn import(&self) -> f64 {
        self.p_grid.max(0.0)
    }

    pub fn export(&self) -> f64 {
        (-self.p_grid).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchRecord {
    pub t: usize,
    pub case: Case,
    pub mode: Mode,
    pub flows: PowerFlows,
    pub p_ev: f64,
    pub battery_soc_after: f64,
    pub ev_soc_after: f64,
    pub tariff: f64,
    pub fit: f64,
    pub dt_hours: f64,
    /// Positive is a cost.
    pub cash_flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchTrace {
    pub records: Vec<DispatchRecord>,
    pub total_bill: f64,
}

impl DispatchTrace {
    pub fn modes(&self) -> Vec<Mode> {
        self.records.iter().map(|r| r.mode).collect()
    }

    pub fn mode_counts(&self) -> BTreeMap<Mode, usize> {
        let mut counts: BTreeMap<Mode, usize> = Mode::ALL.iter().map(|&m| (m, 0)).collect();
        for r in &self.records {
            *counts.entry(r.mode).or_default() += 1;
        }
        counts
    }

    pub fn import_energy_kwh(&self) -> f64 {
        self.records.iter().map(|r| r.flows.import() * r.dt_hours).sum()
    }

    pub fn export_energy_kwh(&self) -> f64 {
        self.records.iter().map(|r| r.flows.export() * r.dt_hours).sum()
    }

    /// Trace as CSV, one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_COLUMNS);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.case,
                r.mode,
                fixed(r.flows.p_pv),
                fixed(r.flows.p_grid),
                fixed(r.flows.p_batt),
                fixed(r.p_ev),
                fixed(r.flows.p_l_total),
                fixed(r.battery_soc_after),
                fixed(r.ev_soc_after),
                fixed(r.cash_flow),
            );
        }
        out
    }

    /// Key/value summary of the run.
    pub fn summary(&self, baseline_bill: f64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "steps = {}", self.records.len());
        let _ = writeln!(out, "total_bill = {}", fixed(self.total_bill));
        let _ = writeln!(out, "baseline_bill = {}", fixed(baseline_bill));
        let _ = writeln!(out, "import_kwh = {}", fixed(self.import_energy_kwh()));
        let _ = writeln!(out, "export_kwh = {}", fixed(self.export_energy_kwh()));
        for (mode, n) in self.mode_counts() {
            let _ = writeln!(out, "mode_count.{mode} = {n}");
        }
        out
    }
}

/// Six decimals, with values that round to zero printed as `0.000000`.
fn fixed(v: f64) -> String {
    if v.abs() < 5e-7 {
        "0.000000".to_owned()
    } else {
        format!("{v:.6}")
    }
}

/// Turns a decision into bus power flows and applies the battery command.
///
/// `p_pv` is the PV power available this step. The battery is clamped by
/// [`storage::step_battery`]; whatever it cannot absorb or deliver is routed
/// through the grid.
pub fn dispatch_mode(
    decision: &Decision,
    p_pv: f64,
    battery: BatteryState,
    config: &BatteryConfig,
    dt_hours: f64,
) -> (PowerFlows, BatteryState) {
    let load = decision.p_l_total;
    let (p_batt, next) = match decision.mode {
        Mode::M1 | Mode::M3 | Mode::M5 => (0.0, battery),
        Mode::M2 => {
            let (next, p) = storage::step_battery(battery, config, -decision.p_r, dt_hours);
            (p, next)
        }
        Mode::M4 => {
            let (next, p) = storage::step_battery(battery, config, decision.p_d, dt_hours);
            (p, next)
        }
        Mode::M6 => {
            let (next, p) =
                storage::step_battery(battery, config, -config.p_charge_max_kw, dt_hours);
            (p, next)
        }
    };
    let (p_pv_used, p_grid) = match decision.mode {
        Mode::M1 => (p_pv, -decision.p_r),
        Mode::M2 => (p_pv, -(decision.p_r + p_batt)),
        Mode::M3 => (p_pv, decision.p_d),
        Mode::M4 => (p_pv, decision.p_d - p_batt),
        // Sub-threshold PV is used only up to what the bus consumes, so the
        // night modes never export.
        Mode::M5 | Mode::M6 => {
            let demand = load - p_batt;
            let used = p_pv.min(demand);
            (used, demand - used)
        }
    };
    let flows = PowerFlows {
        p_pv: p_pv_used,
        p_pv_curtailed: p_pv - p_pv_used,
        p_grid,
        p_batt,
        p_l_total: load,
    };
    (flows, next)
}

/// Curtails PV so that export does not exceed `limit_kw`.
fn apply_export_limit(flows: PowerFlows, limit_kw: f64) -> PowerFlows {
    let excess = -flows.p_grid - limit_kw;
    if excess <= 0.0 {
        return flows;
    }
    PowerFlows {
        p_pv: flows.p_pv - excess,
        p_pv_curtailed: flows.p_pv_curtailed + excess,
        p_grid: -limit_kw,
        ..flows
    }
}

fn cash_flow(flows: &PowerFlows, tariff: f64, fit: f64, dt_hours: f64) -> f64 {
    (tariff * flows.import() - fit * flows.export()) * dt_hours
}

fn initial_ev(config: &MicrogridConfig) -> EvState {
    EvState {
        connected: false,
        soc: config.ev.initial_soc,
        soc_max: config.ev.soc_max,
        capacity_kwh: config.ev.capacity_kwh,
        p_charge_kw: 0.0,
    }
}

/// Advances the EV for step `t`; returns `(state before, state after, draw)`.
fn ev_step(
    scenario: &Scenario,
    ev: EvState,
    t: usize,
    dt: f64,
) -> Result<(EvState, EvState, f64), ProfileError> {
    let before = EvState {
        connected: scenario.is_ev_connected(t)?,
        p_charge_kw: scenario.ev_power_request.sample(t)?,
        ..ev
    };
    let (after, p_ev) = storage::step_ev(before, dt);
    Ok((before, after, p_ev))
}

/// Runs the EMS over the whole scenario horizon.
pub fn simulate(
    scenario: &Scenario,
    config: &MicrogridConfig,
) -> Result<DispatchTrace, SimulationError> {
    scenario.validate()?;
    config.validate()?;

    let dt = scenario.step_hours();
    let limits = config.soc_limits();
    let mut battery = BatteryState::new(config.initial_battery_soc);
    let mut ev = initial_ev(config);
    let mut records = Vec::with_capacity(scenario.horizon_steps);

    for t in 0..scenario.horizon_steps {
        let p_pv = scenario.pv.sample(t)?;
        let tariff = scenario.tariff.sample(t)?;
        let fit = scenario.fit.at(t)?;
        let (ev_before, ev_after, p_ev) = ev_step(scenario, ev, t, dt)?;

        let (fc_pv, fc_load) = scenario.forecast_for_day_of(t)?;
        let headroom = storage::charge_headroom_energy(battery, &config.battery);
        let inputs = DecisionInputs {
            p_pv,
            p_load: scenario.load.sample(t)?,
            ev_connected: ev_before.connected,
            ev_soc: ev_before.soc,
            ev_soc_max: ev_before.soc_max,
            p_ev_request: p_ev,
            tariff,
            fit,
            battery_soc: battery.soc,
            tariff_is_lowest: tariff_is_lowest(&scenario.tariff, t, config.lowest_tariff_epsilon),
            forecast_ok: ems::forecast_sufficient(&fc_pv, &fc_load, headroom)?,
        };
        let decision = ems::decide_mode(&inputs, limits, config.pv_zero_epsilon_kw);
        let (mut flows, next) = dispatch_mode(&decision, p_pv, battery, &config.battery, dt);
        if let Some(limit) = config.export_limit_kw {
            flows = apply_export_limit(flows, limit);
        }

        battery = next;
        ev = ev_after;
        records.push(DispatchRecord {
            t,
            case: decision.case,
            mode: decision.mode,
            flows,
            p_ev,
            battery_soc_after: battery.soc,
            ev_soc_after: ev.soc,
            tariff,
            fit,
            dt_hours: dt,
            cash_flow: cash_flow(&flows, tariff, fit, dt),
        });
    }

    let total_bill = records.iter().map(|r| r.cash_flow).sum();
    Ok(DispatchTrace {
        records,
        total_bill,
    })
}

/// Bill of a trace: imports at the tariff minus exports at the feed-in rate.
pub fn energy_bill(trace: &DispatchTrace) -> f64 {
    trace
        .records
        .iter()
        .map(|r| {
            (r.tariff * r.flows.p_grid.max(0.0) - r.fit * (-r.flows.p_grid).max(0.0)) * r.dt_hours
        })
        .sum()
}

/// Bill without an EMS: the battery is never used, the grid covers every
/// deficit and every PV surplus is exported. EV charging is identical to the
/// managed run.
pub fn baseline_bill(
    scenario: &Scenario,
    config: &MicrogridConfig,
) -> Result<f64, SimulationError> {
    scenario.validate()?;
    let dt = scenario.step_hours();
    let mut ev = initial_ev(config);
    let mut bill = 0.0;
    for t in 0..scenario.horizon_steps {
        let (_, after, p_ev) = ev_step(scenario, ev, t, dt)?;
        ev = after;
        let net = scenario.load.sample(t)? + p_ev - scenario.pv.sample(t)?;
        let export = match config.export_limit_kw {
            Some(limit) => (-net).max(0.0).min(limit),
            None => (-net).max(0.0),
        };
        bill += (scenario.tariff.sample(t)? * net.max(0.0) - scenario.fit.at(t)? * export) * dt;
    }
    Ok(bill)
}
