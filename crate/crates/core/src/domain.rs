//! Shared data types: the hourly time axis, plant and fleet parameters, the
//! scenario bundle and clearing results.
//!
//! Fleet capacities are stored per unit in kW. Everything exchanged between
//! modules (schedules, loads, capacities) is aggregate MW.

use std::fmt;
use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::pricing;

pub const KW_PER_MW: f64 = 1000.0;

/// Default penalty for unsupplied heat (currency/MWh).
pub const DEFAULT_PENALTY_UNSUPPLIED: f64 = 5000.0;

pub const DEFAULT_BLOCK_LENGTH: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub start: NaiveDateTime,
    pub length: usize,
    pub block_length: usize,
}

impl TimeAxis {
    pub fn new(start: NaiveDateTime, length: usize) -> Self {
        Self {
            start,
            length,
            block_length: DEFAULT_BLOCK_LENGTH,
        }
    }

    pub fn with_block_length(mut self, block_length: usize) -> Self {
        self.block_length = block_length;
        self
    }

    pub fn timestamp(&self, hour: usize) -> NaiveDateTime {
        self.start + Duration::hours(hour as i64)
    }

    pub fn end(&self) -> NaiveDateTime {
        self.timestamp(self.length)
    }

    /// Consecutive clearing blocks; the last one is short when `length` is
    /// not a multiple of `block_length`.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let step = self.block_length.max(1);
        (0..self.length)
            .step_by(step)
            .map(|s| s..(s + step).min(self.length))
            .collect()
    }

    pub fn month_key(&self, hour: usize) -> MonthKey {
        let ts = self.timestamp(hour);
        MonthKey {
            year: ts.year(),
            month: ts.month(),
        }
    }

    /// Calendar months touched by the axis, in order, with their hour ranges.
    pub fn months(&self) -> Vec<(MonthKey, Range<usize>)> {
        let mut out: Vec<(MonthKey, Range<usize>)> = Vec::new();
        for h in 0..self.length {
            let key = self.month_key(h);
            match out.last_mut() {
                Some((k, r)) if *k == key => r.end = h + 1,
                _ => out.push((key, h..h + 1)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthKey {
    pub year: i32,
    pub month: u32,
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Static CHP plant parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChpParams {
    pub id: String,
    /// Fuel per MWh of electricity.
    pub rho_e: f64,
    /// Fuel per MWh of heat.
    pub rho_h: f64,
    /// Minimum power-to-heat ratio.
    pub r: f64,
    /// Fuel intake cap (MWh fuel per hour).
    pub f_max: f64,
    /// Heat output cap (MW).
    pub g_h_max: f64,
    /// Fuel price (currency/MWh fuel).
    pub alpha: f64,
}

/// How the net heat extracted from a fridge enters the temperature
/// recursion `T+ = T + A (T_in - T) - B * extraction`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThermalBasis {
    /// Extraction in kWh per unit per hour.
    Kilowatt,
    /// Extraction in percent of the unit's pump capacity per hour.
    #[default]
    PercentOfCapacity,
}

/// A fleet of identical cooling-based excess-heat producers. Fields missing
/// from a config take the supermarket defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcessHeatFleet {
    pub id: String,
    pub unit_count: u64,
    /// Fridge-to-indoor coupling per hour.
    pub a_coef: f64,
    /// Temperature response per unit of extraction (see `thermal_basis`).
    pub b_coef: f64,
    pub thermal_basis: ThermalBasis,
    pub t_fridge_min: f64,
    pub t_fridge_max: f64,
    pub t_avg_min: f64,
    pub t_avg_max: f64,
    pub avg_window: usize,
    pub t_indoor: f64,
    /// Per-unit pump heat output cap (kW).
    pub g_max_unit: f64,
    /// Ramp limit per hour as a fraction of `g_max_unit`.
    pub ramp_frac: f64,
    pub t_fridge_init: f64,
}

impl Default for ExcessHeatFleet {
    fn default() -> Self {
        Self::supermarket("excess_heat", 0)
    }
}

impl ExcessHeatFleet {
    /// Copenhagen-style supermarket refrigeration unit: A = 0.1, B = 1/21,
    /// 2-8 °C hard band, 4-5 °C six-hour average, 25 °C indoors, 30 kW pump,
    /// ramping at a quarter of capacity per hour.
    pub fn supermarket(id: impl Into<String>, unit_count: u64) -> Self {
        Self {
            id: id.into(),
            unit_count,
            a_coef: 0.1,
            b_coef: 1.0 / 21.0,
            thermal_basis: ThermalBasis::PercentOfCapacity,
            t_fridge_min: 2.0,
            t_fridge_max: 8.0,
            t_avg_min: 4.0,
            t_avg_max: 5.0,
            avg_window: 6,
            t_indoor: 25.0,
            g_max_unit: 30.0,
            ramp_frac: 0.25,
            t_fridge_init: 4.5,
        }
    }

    /// Aggregate heat capacity in MW.
    pub fn capacity_mw(&self) -> f64 {
        self.unit_count as f64 * self.g_max_unit / KW_PER_MW
    }

    /// Temperature-recursion units per kW of per-unit extraction.
    pub fn extraction_units_per_kw(&self) -> f64 {
        match self.thermal_basis {
            ThermalBasis::Kilowatt => 1.0,
            ThermalBasis::PercentOfCapacity => 100.0 / self.g_max_unit,
        }
    }

    /// Ramp limit per hour, per unit, in kW.
    pub fn ramp_kw(&self) -> f64 {
        self.ramp_frac * self.g_max_unit
    }

    /// Fridge temperature after one hour, per unit, for pump output `g_kw`
    /// at the given COP.
    pub fn next_fridge_temp(&self, t_fridge: f64, g_kw: f64, cop: f64) -> f64 {
        let extraction = (g_kw - g_kw / cop) * self.extraction_units_per_kw();
        t_fridge + self.a_coef * (self.t_indoor - t_fridge) - self.b_coef * extraction
    }

    /// Fixed point of the recursion under constant per-unit output `g_kw`.
    pub fn steady_state_temp(&self, g_kw: f64, cop: f64) -> f64 {
        let extraction = g_kw * (1.0 - 1.0 / cop) * self.extraction_units_per_kw();
        self.t_indoor - self.b_coef / self.a_coef * extraction
    }
}

/// Affine-in-ambient-temperature COP with clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CopModel {
    pub cop0: f64,
    pub cop1: f64,
    pub cop_min: f64,
    pub cop_max: f64,
}

impl Default for CopModel {
    fn default() -> Self {
        Self {
            cop0: 3.0,
            cop1: 0.05,
            cop_min: 1.5,
            cop_max: 5.0,
        }
    }
}

impl CopModel {
    pub fn evaluate(&self, ambient: f64) -> f64 {
        (self.cop0 + self.cop1 * ambient).clamp(self.cop_min, self.cop_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInputs {
    pub axis: TimeAxis,
    /// MW per hour.
    pub heat_load: Vec<f64>,
    /// Electricity price forecast (currency/MWh).
    pub elec_price: Vec<f64>,
    /// °C.
    pub ambient_temp: Vec<f64>,
    pub penalty_unsupplied: f64,
    pub chps: Vec<ChpParams>,
    pub fleets: Vec<ExcessHeatFleet>,
    pub cop: CopModel,
}

impl ScenarioInputs {
    pub fn cop_series(&self) -> Vec<f64> {
        pricing::cop_series(&self.cop, &self.ambient_temp)
    }

    /// Total excess-heat capacity (MW).
    pub fn excess_heat_capacity(&self) -> f64 {
        self.fleets.iter().map(ExcessHeatFleet::capacity_mw).sum()
    }

    /// CHP heat bids as `[chp][hour]`.
    pub fn chp_bids(&self) -> Vec<Vec<f64>> {
        self.chps
            .iter()
            .map(|c| self.elec_price.iter().map(|&p| pricing::chp_bid(c, p)).collect())
            .collect()
    }
}

/// One invariant breach found by [`validate_scenario`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every scenario invariant; an empty list means the scenario is
/// usable.
pub fn validate_scenario(s: &ScenarioInputs) -> Vec<Violation> {
    let mut out = Vec::new();
    let axis = &s.axis;
    if axis.length == 0 {
        out.push(Violation::new("axis.length", "axis length must be positive"));
    }
    if axis.block_length == 0 {
        out.push(Violation::new("axis.block_length", "block length must be positive"));
    }
    for (name, series) in [
        ("heat_load", &s.heat_load),
        ("elec_price", &s.elec_price),
        ("ambient_temp", &s.ambient_temp),
    ] {
        if series.len() != axis.length {
            out.push(Violation::new(name, format!("{name} length mismatch")));
        }
        if series.iter().any(|v| !v.is_finite()) {
            out.push(Violation::new(name, format!("{name} has non-finite values")));
        }
    }
    if s.heat_load.iter().any(|&l| l < 0.0) {
        out.push(Violation::new("heat_load", "heat load must be non-negative"));
    }

    for (i, c) in s.chps.iter().enumerate() {
        let field = |f: &str| format!("chp[{}].{f}", c.id_or(i));
        if !(c.rho_e > 0.0) {
            out.push(Violation::new(field("rho_e"), "rho_e must be positive"));
        }
        if !(c.rho_h > 0.0) {
            out.push(Violation::new(field("rho_h"), "rho_h must be positive"));
        }
        if !(c.r >= 0.0) {
            out.push(Violation::new(field("r"), "power-to-heat ratio must be non-negative"));
        }
        if !(c.f_max > 0.0) {
            out.push(Violation::new(field("f_max"), "fuel cap must be positive"));
        }
        if !(c.g_h_max >= 0.0) {
            out.push(Violation::new(field("g_h_max"), "heat cap must be non-negative"));
        }
        if !(c.alpha >= 0.0) {
            out.push(Violation::new(field("alpha"), "fuel price must be non-negative"));
        }
    }

    if s.elec_price.len() == axis.length && !s.chps.is_empty() {
        let max_bid = s
            .chps
            .iter()
            .flat_map(|c| s.elec_price.iter().map(move |&p| pricing::chp_bid(c, p)))
            .fold(f64::NEG_INFINITY, f64::max);
        if !(s.penalty_unsupplied > max_bid) {
            out.push(Violation::new(
                "penalty_unsupplied",
                format!("penalty must exceed every CHP bid (max bid {max_bid:.3})"),
            ));
        }
    }

    let cop = &s.cop;
    if !(cop.cop_min >= 1.0) {
        out.push(Violation::new("cop.cop_min", "cop_min must be at least 1"));
    }
    if !(cop.cop_max >= cop.cop_min) {
        out.push(Violation::new("cop.cop_max", "cop_max must not be below cop_min"));
    }
    let cops = s.cop_series();
    if !s.fleets.is_empty() && cops.iter().any(|&c| c <= 1.0) {
        out.push(Violation::new("cop", "COP must exceed 1 in every hour"));
    }

    for (i, f) in s.fleets.iter().enumerate() {
        let field = |n: &str| format!("fleet[{}].{n}", f.id_or(i));
        if f.unit_count < 1 {
            out.push(Violation::new(field("unit_count"), "unit count must be at least 1"));
        }
        if !(f.t_fridge_min <= f.t_avg_min && f.t_avg_min <= f.t_avg_max && f.t_avg_max <= f.t_fridge_max)
        {
            out.push(Violation::new(field("t_avg_min"), "average band outside hard band"));
        }
        if !(f.t_fridge_min <= f.t_fridge_init && f.t_fridge_init <= f.t_fridge_max) {
            out.push(Violation::new(field("t_fridge_init"), "initial temperature outside hard band"));
        }
        if !(f.ramp_frac > 0.0 && f.ramp_frac <= 1.0) {
            out.push(Violation::new(field("ramp_frac"), "ramp fraction must lie in (0, 1]"));
        }
        if !(f.g_max_unit > 0.0) {
            out.push(Violation::new(field("g_max_unit"), "pump capacity must be positive"));
        }
        if f.avg_window < 1 {
            out.push(Violation::new(field("avg_window"), "averaging window must be at least 1"));
        }
        if !(f.a_coef >= 0.0 && f.b_coef > 0.0) {
            out.push(Violation::new(field("b_coef"), "thermal coefficients must be A >= 0, B > 0"));
        }
        // Even at full output the fridge drifts above the average band.
        if f.g_max_unit > 0.0 && f.b_coef > 0.0 {
            if let Some(h) = cops
                .iter()
                .position(|&c| c > 1.0 && f.steady_state_temp(f.g_max_unit, c) > f.t_avg_max)
            {
                out.push(Violation::new(
                    field("b_coef"),
                    format!("full pump output cannot hold the average band (hour {h})"),
                ));
            }
        }
    }
    out
}

trait IdOr {
    fn id_or(&self, i: usize) -> String;
}

impl IdOr for ChpParams {
    fn id_or(&self, i: usize) -> String {
        if self.id.is_empty() {
            i.to_string()
        } else {
            self.id.clone()
        }
    }
}

impl IdOr for ExcessHeatFleet {
    fn id_or(&self, i: usize) -> String {
        if self.id.is_empty() {
            i.to_string()
        } else {
            self.id.clone()
        }
    }
}

/// Schedules and prices for a contiguous run of hours.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClearingResult {
    /// `[chp][hour]`, MW.
    pub chp_heat: Vec<Vec<f64>>,
    /// `[fleet][hour]`, MW.
    pub eh_generated: Vec<Vec<f64>>,
    /// `[fleet][hour]`, MW.
    pub eh_wasted: Vec<Vec<f64>>,
    /// `[fleet][hour]`, MW of electricity.
    pub eh_elec_load: Vec<Vec<f64>>,
    /// `[fleet][hour + 1]`, °C; the first entry is the state entering the run.
    pub fridge_temp: Vec<Vec<f64>>,
    pub unsupplied: Vec<f64>,
    /// Dual of the hourly balance.
    pub market_price: Vec<f64>,
    /// Bid of the most expensive marginal participant.
    pub marginal_price: Vec<f64>,
    /// Bids, schedule cost and unsupplied penalty (currency).
    pub objective: f64,
}

impl ClearingResult {
    pub fn empty(n_chp: usize, fleet_init_temps: &[f64]) -> Self {
        Self {
            chp_heat: vec![Vec::new(); n_chp],
            eh_generated: vec![Vec::new(); fleet_init_temps.len()],
            eh_wasted: vec![Vec::new(); fleet_init_temps.len()],
            eh_elec_load: vec![Vec::new(); fleet_init_temps.len()],
            fridge_temp: fleet_init_temps.iter().map(|&t| vec![t]).collect(),
            ..Self::default()
        }
    }

    pub fn hours(&self) -> usize {
        self.market_price.len()
    }

    /// Appends a following run; its leading fridge temperature must be the
    /// current final one and is not duplicated.
    pub fn append(&mut self, next: ClearingResult) {
        for (a, b) in self.chp_heat.iter_mut().zip(next.chp_heat) {
            a.extend(b);
        }
        for (a, b) in self.eh_generated.iter_mut().zip(next.eh_generated) {
            a.extend(b);
        }
        for (a, b) in self.eh_wasted.iter_mut().zip(next.eh_wasted) {
            a.extend(b);
        }
        for (a, b) in self.eh_elec_load.iter_mut().zip(next.eh_elec_load) {
            a.extend(b);
        }
        for (a, b) in self.fridge_temp.iter_mut().zip(next.fridge_temp) {
            if a.is_empty() {
                a.extend(b);
            } else {
                a.extend(b.into_iter().skip(1));
            }
        }
        self.unsupplied.extend(next.unsupplied);
        self.market_price.extend(next.market_price);
        self.marginal_price.extend(next.marginal_price);
        self.objective += next.objective;
    }

    /// Net excess heat delivered to the network in `hour` (MW).
    pub fn eh_scheduled(&self, hour: usize) -> f64 {
        self.eh_generated
            .iter()
            .zip(&self.eh_wasted)
            .map(|(g, w)| g[hour] - w[hour])
            .sum()
    }

    /// Largest hourly balance residual relative to `max(1, load)`.
    pub fn max_balance_residual(&self, load: &[f64]) -> f64 {
        (0..self.hours())
            .map(|t| {
                let supply: f64 =
                    self.eh_scheduled(t) + self.chp_heat.iter().map(|g| g[t]).sum::<f64>();
                (supply - load[t] + self.unsupplied[t]).abs() / load[t].max(1.0)
            })
            .fold(0.0, f64::max)
    }
}
