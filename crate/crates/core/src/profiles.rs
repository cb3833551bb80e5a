//! Time-series profiles and the scenario file format.
//!
//! A scenario is a set of equally spaced, step-held series: PV availability,
//! household load, EV connection and charge request, purchase tariff, feed-in
//! tariff and a next-day forecast of PV and load. Each series holds one value
//! per step; the value is constant over `[t_i, t_{i+1})`.

use std::fmt;

use thiserror::Error;

/// Seconds in one calendar day, used to split a horizon into days.
const SECONDS_PER_DAY: f64 = 86_400.0;

/// Exact header of the scenario file.
pub const SCENARIO_COLUMNS: [&str; 9] = [
    "hour",
    "pv_kw",
    "load_kw",
    "ev_connected",
    "ev_power_kw",
    "tariff",
    "fit",
    "forecast_pv_kw",
    "forecast_load_kw",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("step length must be positive, got {0} s")]
    InvalidStep(f64),
    #[error("profile has no samples")]
    Empty,
    #[error("step index {index} out of range for a profile of {len} samples")]
    OutOfRange { index: usize, len: usize },
}

/// A step-held series of real samples on a uniform time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesProfile {
    step_seconds: f64,
    values: Vec<f64>,
}

impl TimeSeriesProfile {
    pub fn new(step_seconds: f64, values: Vec<f64>) -> Result<Self, ProfileError> {
        if !(step_seconds > 0.0 && step_seconds.is_finite()) {
            return Err(ProfileError::InvalidStep(step_seconds));
        }
        if values.is_empty() {
            return Err(ProfileError::Empty);
        }
        Ok(Self {
            step_seconds,
            values,
        })
    }

    /// Hourly profile, the cadence used throughout the crate.
    pub fn hourly(values: Vec<f64>) -> Result<Self, ProfileError> {
        Self::new(3600.0, values)
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds
    }

    pub fn step_hours(&self) -> f64 {
        self.step_seconds / 3600.0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value held over step `t`. Never extrapolates past the last sample.
    pub fn sample(&self, t: usize) -> Result<f64, ProfileError> {
        self.values
            .get(t)
            .copied()
            .ok_or(ProfileError::OutOfRange {
                index: t,
                len: self.values.len(),
            })
    }

    /// Number of steps in one calendar day (at least one).
    pub fn steps_per_day(&self) -> usize {
        ((SECONDS_PER_DAY / self.step_seconds).round() as usize).max(1)
    }

    /// Index range of the calendar day containing step `t`, clipped to the
    /// profile length.
    pub fn day_window(&self, t: usize) -> std::ops::Range<usize> {
        let per_day = self.steps_per_day();
        let start = (t / per_day) * per_day;
        start.min(self.len())..(start + per_day).min(self.len())
    }

    /// Sub-profile covering `range`, keeping the step length.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, ProfileError> {
        let values = self
            .values
            .get(range.clone())
            .ok_or(ProfileError::OutOfRange {
                index: range.end,
                len: self.values.len(),
            })?
            .to_vec();
        Self::new(self.step_seconds, values)
    }
}

/// True iff `tariff(t)` is within `epsilon` of the minimum tariff of the
/// calendar day containing `t`. Out-of-range steps are never the lowest.
pub fn tariff_is_lowest(tariff: &TimeSeriesProfile, t: usize, epsilon: f64) -> bool {
    let Ok(price) = tariff.sample(t) else {
        return false;
    };
    let day_min = tariff.values[tariff.day_window(t)]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    price <= day_min + epsilon
}

/// Feed-in tariff: a single rate or a per-step profile.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedInTariff {
    Flat(f64),
    Profile(TimeSeriesProfile),
}

impl FeedInTariff {
    pub fn at(&self, t: usize) -> Result<f64, ProfileError> {
        match self {
            FeedInTariff::Flat(rate) => Ok(*rate),
            FeedInTariff::Profile(p) => p.sample(t),
        }
    }
}

/// Bundled input profiles for one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pv: TimeSeriesProfile,
    pub load: TimeSeriesProfile,
    pub ev_connected: TimeSeriesProfile,
    pub ev_power_request: TimeSeriesProfile,
    pub tariff: TimeSeriesProfile,
    pub fit: FeedInTariff,
    /// Row `t` describes step `t` of the following day.
    pub forecast_pv_next_day: TimeSeriesProfile,
    pub forecast_load_next_day: TimeSeriesProfile,
    pub horizon_steps: usize,
}

impl Scenario {
    pub fn step_hours(&self) -> f64 {
        self.pv.step_hours()
    }

    pub fn is_ev_connected(&self, t: usize) -> Result<bool, ProfileError> {
        Ok(self.ev_connected.sample(t)? >= 0.5)
    }

    /// Next-day PV and load forecasts published on the day containing `t`.
    pub fn forecast_for_day_of(
        &self,
        t: usize,
    ) -> Result<(TimeSeriesProfile, TimeSeriesProfile), ProfileError> {
        let window = self.forecast_pv_next_day.day_window(t);
        Ok((
            self.forecast_pv_next_day.slice(window.clone())?,
            self.forecast_load_next_day.slice(window)?,
        ))
    }

    fn named_profiles(&self) -> [(&'static str, &TimeSeriesProfile); 7] {
        [
            ("pv_kw", &self.pv),
            ("load_kw", &self.load),
            ("ev_connected", &self.ev_connected),
            ("ev_power_kw", &self.ev_power_request),
            ("tariff", &self.tariff),
            ("forecast_pv_kw", &self.forecast_pv_next_day),
            ("forecast_load_kw", &self.forecast_load_next_day),
        ]
    }

    /// Checks every scenario invariant and returns all violations found.
    pub fn violations(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut profiles: Vec<(&str, &TimeSeriesProfile)> = self.named_profiles().to_vec();
        if let FeedInTariff::Profile(p) = &self.fit {
            profiles.push(("fit", p));
        }
        for (name, p) in &profiles {
            if p.len() < self.horizon_steps {
                out.push(Diagnostic::new(
                    None,
                    Some(name),
                    DiagnosticKind::HorizonMismatch {
                        expected: self.horizon_steps,
                        found: p.len(),
                    },
                ));
            }
            if (p.step_seconds() - self.pv.step_seconds()).abs() > 1e-9 {
                out.push(Diagnostic::new(
                    None,
                    Some(name),
                    DiagnosticKind::StepMismatch,
                ));
            }
        }
        if let FeedInTariff::Flat(rate) = self.fit {
            if !(rate >= 0.0 && rate.is_finite()) {
                out.push(Diagnostic::new(
                    None,
                    Some("fit"),
                    DiagnosticKind::NegativePrice(rate),
                ));
            }
        }
        for t in 0..self.horizon_steps {
            let line = Some(t + 2);
            for (name, p) in &profiles {
                let Ok(v) = p.sample(t) else { continue };
                if let Some(kind) = check_value(name, v) {
                    out.push(Diagnostic::new(line, Some(name), kind));
                }
            }
            if let (Ok(flag), Ok(req)) = (self.ev_connected.sample(t), self.ev_power_request.sample(t))
            {
                if flag == 0.0 && req > 0.0 {
                    out.push(Diagnostic::new(
                        line,
                        Some("ev_power_kw"),
                        DiagnosticKind::EvRequestWhileDisconnected(req),
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let diagnostics = self.violations();
        if diagnostics.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError { diagnostics })
        }
    }

    /// Serializes back to the scenario file format.
    pub fn to_csv(&self) -> String {
        let mut out = SCENARIO_COLUMNS.join(",");
        out.push('\n');
        for t in 0..self.horizon_steps {
            let v = |p: &TimeSeriesProfile| p.values()[t];
            let fit = self.fit.at(t).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                t,
                v(&self.pv),
                v(&self.load),
                v(&self.ev_connected),
                v(&self.ev_power_request),
                v(&self.tariff),
                fit,
                v(&self.forecast_pv_next_day),
                v(&self.forecast_load_next_day),
            ));
        }
        out
    }
}

fn check_value(column: &str, v: f64) -> Option<DiagnosticKind> {
    if !v.is_finite() {
        return Some(DiagnosticKind::NotFinite);
    }
    match column {
        "ev_connected" if v != 0.0 && v != 1.0 => Some(DiagnosticKind::InvalidFlag(v)),
        "tariff" | "fit" if v < 0.0 => Some(DiagnosticKind::NegativePrice(v)),
        "pv_kw" | "load_kw" | "ev_power_kw" | "forecast_pv_kw" | "forecast_load_kw" if v < 0.0 => {
            Some(DiagnosticKind::NegativePower(v))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticKind {
    Syntax(String),
    MissingColumn,
    UnexpectedColumn,
    NotANumber(String),
    NotFinite,
    NegativePower(f64),
    NegativePrice(f64),
    InvalidFlag(f64),
    EvRequestWhileDisconnected(f64),
    HorizonMismatch { expected: usize, found: usize },
    StepMismatch,
    Empty,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            DiagnosticKind::MissingColumn => write!(f, "missing column"),
            DiagnosticKind::UnexpectedColumn => write!(f, "unexpected column"),
            DiagnosticKind::NotANumber(raw) => write!(f, "not a number: {raw:?}"),
            DiagnosticKind::NotFinite => write!(f, "value is not finite"),
            DiagnosticKind::NegativePower(v) => write!(f, "negative power {v}"),
            DiagnosticKind::NegativePrice(v) => write!(f, "negative price {v}"),
            DiagnosticKind::InvalidFlag(v) => write!(f, "flag must be 0 or 1, got {v}"),
            DiagnosticKind::EvRequestWhileDisconnected(v) => {
                write!(f, "EV request while disconnected ({v} kW)")
            }
            DiagnosticKind::HorizonMismatch { expected, found } => {
                write!(f, "horizon mismatch: expected {expected} steps, found {found}")
            }
            DiagnosticKind::StepMismatch => write!(f, "step length differs from pv_kw"),
            DiagnosticKind::Empty => write!(f, "scenario has no data rows"),
        }
    }
}

/// One problem found in a scenario, located by file line and column name.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    /// 1-based line in the scenario file (the header is line 1).
    pub line: Option<usize>,
    pub column: Option<String>,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    fn new(line: Option<usize>, column: Option<&str>, kind: DiagnosticKind) -> Self {
        Self {
            line,
            column: column.map(str::to_owned),
            kind,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.column) {
            (Some(line), Some(col)) => write!(f, "line {line}, column {col}: {}", self.kind),
            (Some(line), None) => write!(f, "line {line}: {}", self.kind),
            (None, Some(col)) => write!(f, "column {col}: {}", self.kind),
            (None, None) => write!(f, "{}", self.kind),
        }
    }
}

/// Every violation found while reading or checking a scenario.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScenarioError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ScenarioError {
    fn single(line: Option<usize>, column: Option<&str>, kind: DiagnosticKind) -> Self {
        Self {
            diagnostics: vec![Diagnostic::new(line, column, kind)],
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Parses a scenario file (hourly steps) and checks all invariants.
///
/// Problems are collected rather than reported one at a time, so a single
/// call lists every bad cell in the file.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| ScenarioError::single(Some(1), None, DiagnosticKind::Syntax(e.to_string())))?
        .clone();

    let mut diagnostics = Vec::new();
    let mut index = [0usize; SCENARIO_COLUMNS.len()];
    for (slot, name) in index.iter_mut().zip(SCENARIO_COLUMNS) {
        match headers.iter().position(|h| h == name) {
            Some(i) => *slot = i,
            None => diagnostics.push(Diagnostic::new(
                Some(1),
                Some(name),
                DiagnosticKind::MissingColumn,
            )),
        }
    }
    for h in headers.iter() {
        if !SCENARIO_COLUMNS.contains(&h) {
            diagnostics.push(Diagnostic::new(
                Some(1),
                Some(h),
                DiagnosticKind::UnexpectedColumn,
            ));
        }
    }
    if !diagnostics.is_empty() {
        return Err(ScenarioError { diagnostics });
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); SCENARIO_COLUMNS.len()];
    let mut rows = 0usize;
    let mut max_hour: Option<usize> = None;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize);
                diagnostics.push(Diagnostic::new(
                    line,
                    None,
                    DiagnosticKind::Syntax(e.to_string()),
                ));
                continue;
            }
        };
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows + 2);
        if record.len() != headers.len() {
            diagnostics.push(Diagnostic::new(
                Some(line),
                None,
                DiagnosticKind::Syntax(format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                )),
            ));
            continue;
        }
        for (c, name) in SCENARIO_COLUMNS.iter().enumerate() {
            let raw = &record[index[c]];
            if raw.is_empty() {
                // Missing trailing samples shorten the column; reported as a
                // horizon mismatch below.
                continue;
            }
            match raw.parse::<f64>() {
                Ok(v) => columns[c].push(v),
                Err(_) => diagnostics.push(Diagnostic::new(
                    Some(line),
                    Some(name),
                    DiagnosticKind::NotANumber(raw.to_owned()),
                )),
            }
        }
        rows += 1;
        if let Some(&hour) = columns[0].last() {
            if hour >= 0.0 && hour.fract() == 0.0 {
                let hour = hour as usize;
                max_hour = Some(max_hour.map_or(hour, |m: usize| m.max(hour)));
            }
        }
    }

    if rows == 0 {
        diagnostics.push(Diagnostic::new(None, None, DiagnosticKind::Empty));
        return Err(ScenarioError { diagnostics });
    }

    // The hour column is the 0-based step index; its extent is the horizon
    // the file claims.
    let claimed = max_hour.map_or(rows, |m| m + 1);
    if claimed != rows {
        diagnostics.push(Diagnostic::new(
            None,
            Some("hour"),
            DiagnosticKind::HorizonMismatch {
                expected: claimed,
                found: rows,
            },
        ));
    }
    for (i, hour) in columns[0].iter().enumerate() {
        if *hour != i as f64 && claimed == rows {
            diagnostics.push(Diagnostic::new(
                Some(i + 2),
                Some("hour"),
                DiagnosticKind::Syntax(format!("expected step index {i}, found {hour}")),
            ));
            break;
        }
    }
    for (c, name) in SCENARIO_COLUMNS.iter().enumerate().skip(1) {
        if columns[c].len() != rows && !diagnostics.iter().any(|d| d.column.as_deref() == Some(name)) {
            diagnostics.push(Diagnostic::new(
                None,
                Some(name),
                DiagnosticKind::HorizonMismatch {
                    expected: rows,
                    found: columns[c].len(),
                },
            ));
        }
    }
    if !diagnostics.is_empty() {
        return Err(ScenarioError { diagnostics });
    }

    let mut columns = columns.into_iter();
    let _hour = columns.next();
    let mut next = || {
        TimeSeriesProfile::hourly(columns.next().unwrap_or_default())
            .expect("non-empty column checked above")
    };
    let pv = next();
    let load = next();
    let ev_connected = next();
    let ev_power_request = next();
    let tariff = next();
    let fit_profile = next();
    let forecast_pv_next_day = next();
    let forecast_load_next_day = next();

    let first = fit_profile.values()[0];
    let fit = if fit_profile.values().iter().all(|&v| v == first) {
        FeedInTariff::Flat(first)
    } else {
        FeedInTariff::Profile(fit_profile)
    };

    let scenario = Scenario {
        pv,
        load,
        ev_connected,
        ev_power_request,
        tariff,
        fit,
        forecast_pv_next_day,
        forecast_load_next_day,
        horizon_steps: rows,
    };
    scenario.validate()?;
    Ok(scenario)
}
