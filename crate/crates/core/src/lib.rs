//! Discrete-time simulator for a grid-tied PV / battery / EV microgrid.
//!
//! At each step a rule-based energy management system classifies the
//! situation into one of four cases and picks one of six operating modes,
//! deciding how power flows between PV, battery, EV, household load and the
//! grid so as to keep the electricity bill low. The [`electrical`] module
//! checks that the resulting power setpoints can be tracked by a dq-frame
//! vector current controller on the inverters.
//!
//! ```
//! use microgrid_ems::{config::MicrogridConfig, dispatch, profiles};
//!
//! let text = "\
//! hour,pv_kw,load_kw,ev_connected,ev_power_kw,tariff,fit,forecast_pv_kw,forecast_load_kw
//! 0,0,2,0,0,0.05,0.10,0,2
//! 1,6,3,1,1.5,0.20,0.10,6,3
//! ";
//! let scenario = profiles::parse_scenario(text).unwrap();
//! let trace = dispatch::simulate(&scenario, &MicrogridConfig::default()).unwrap();
//! assert_eq!(trace.records.len(), 2);
//! ```
//!
//! The guide under `book/` walks through each layer.

pub mod config;
pub mod dispatch;
pub mod electrical;
pub mod ems;
pub mod profiles;
pub mod storage;

pub use config::MicrogridConfig;
pub use dispatch::{simulate, DispatchTrace};
pub use ems::{Case, Decision, Mode};
pub use profiles::{parse_scenario, Scenario};

// Runs the code listings of the guide as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/decision.md")]
    mod decision {}
    #[doc = include_str!("../../../book/src/storage.md")]
    mod storage {}
    #[doc = include_str!("../../../book/src/dispatch.md")]
    mod dispatch {}
    #[doc = include_str!("../../../book/src/electrical.md")]
    mod electrical {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
