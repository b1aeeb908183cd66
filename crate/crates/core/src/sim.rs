//! Full-horizon runs of both paradigms, comparison metrics and capacity
//! sweeps.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clearing::{
    clear_market_participation, clear_residual, self_schedule, ClearingError, ClearingOptions,
};
use crate::domain::{
    validate_scenario, ClearingResult, ExcessHeatFleet, MonthKey, ScenarioInputs, Violation,
    KW_PER_MW,
};
use crate::models::FleetState;
use crate::pricing::{chp_bid, price_signal_series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    /// Market participation.
    Mp,
    /// Self-scheduling against the price signal.
    Ss,
}

impl Paradigm {
    pub fn label(self) -> &'static str {
        match self {
            Paradigm::Mp => "mp",
            Paradigm::Ss => "ss",
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Clear the whole horizon as one LP instead of chained blocks.
    pub whole_horizon: bool,
    /// Multiplier on the price signal.
    pub price_scale: f64,
    /// Enforce the ramp limit on the very first hour, measured from an idle
    /// pump.
    pub ramp_at_start: bool,
    pub clearing: ClearingOptions,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            whole_horizon: false,
            price_scale: 1.0,
            ramp_at_start: false,
            clearing: ClearingOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("block {index} (hours {start}..{end}): {source}")]
    Block {
        index: usize,
        start: usize,
        end: usize,
        #[source]
        source: ClearingError,
    },
    #[error("results cover {got} hours, scenario has {expected}")]
    AxisMismatch { expected: usize, got: usize },
}

/// Price signal sent to self-scheduling fleets.
pub fn signal(s: &ScenarioInputs, price_scale: f64) -> Vec<f64> {
    price_signal_series(&s.ambient_temp, price_scale)
}

fn clearing_blocks(s: &ScenarioInputs, opts: &SimOptions) -> Vec<std::ops::Range<usize>> {
    if opts.whole_horizon {
        std::iter::once(0..s.axis.length).collect()
    } else {
        s.axis.blocks()
    }
}

/// Simulates one paradigm over the whole horizon, carrying fleet state
/// across blocks.
pub fn run_paradigm(
    s: &ScenarioInputs,
    paradigm: Paradigm,
    opts: &SimOptions,
) -> Result<ClearingResult, SimError> {
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(SimError::Invalid(violations));
    }
    let mut states: Vec<FleetState> =
        s.fleets.iter().map(|f| FleetState::initial(f, opts.ramp_at_start)).collect();
    let init: Vec<f64> = states.iter().map(|st| st.fridge_temp).collect();
    let mut out = ClearingResult::empty(s.chps.len(), &init);
    let cop = s.cop_series();
    let mu = signal(s, opts.price_scale);

    for (index, block) in clearing_blocks(s, opts).into_iter().enumerate() {
        let wrap = |source| SimError::Block {
            index,
            start: block.start,
            end: block.end,
            source,
        };
        let outcome = match paradigm {
            Paradigm::Mp => {
                clear_market_participation(s, block.clone(), &states, &opts.clearing).map_err(wrap)?
            }
            Paradigm::Ss => {
                let schedules = s
                    .fleets
                    .iter()
                    .zip(&states)
                    .map(|(f, st)| {
                        self_schedule(
                            f,
                            &cop[block.clone()],
                            cop.get(block.end).copied(),
                            &mu[block.clone()],
                            &s.elec_price[block.clone()],
                            st,
                            block.clone(),
                            &opts.clearing,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(wrap)?;
                let fixed: Vec<Vec<f64>> = schedules.iter().map(|x| x.generated_mw.clone()).collect();
                let mut outcome =
                    clear_residual(s, block.clone(), &fixed, &states, &opts.clearing).map_err(wrap)?;
                for (k, sched) in schedules.into_iter().enumerate() {
                    outcome.result.eh_elec_load[k] = sched.elec_mw;
                    outcome.result.fridge_temp[k] = sched.fridge_temp;
                    outcome.states[k] = sched.final_state;
                }
                outcome
            }
        };
        states = outcome.states;
        out.append(outcome.result);
    }
    Ok(out)
}

/// Monthly figures of one paradigm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyFigures {
    pub month: MonthKey,
    pub hours: usize,
    /// Sum of bid times scheduled CHP heat (currency).
    pub chp_cost: f64,
    /// Full clearing objective: CHP cost plus unsupplied penalty.
    pub objective: f64,
    /// Delivered excess heat, generation minus waste (MWh).
    pub scheduled_eh: f64,
    pub wasted_eh: f64,
    pub generated_eh: f64,
    pub unsupplied: f64,
    /// Unweighted mean of the hourly market price.
    pub avg_price: f64,
    pub eh_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParadigmSummary {
    pub total_chp_cost: f64,
    pub total_objective: f64,
    pub scheduled_eh: f64,
    pub wasted_eh: f64,
    pub generated_eh: f64,
    pub unsupplied: f64,
    pub mean_price: f64,
    pub eh_revenue: f64,
    pub monthly: Vec<MonthlyFigures>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub capacity_mw: f64,
    pub mp: ParadigmSummary,
    pub ss: ParadigmSummary,
    /// Self-scheduling minus market-participation CHP cost.
    pub suboptimality_total: f64,
    pub suboptimality_monthly: Vec<f64>,
    /// Self-scheduling minus market-participation full clearing objective.
    pub objective_gap: f64,
}

impl ComparisonReport {
    pub fn months(&self) -> Vec<MonthKey> {
        self.mp.monthly.iter().map(|m| m.month).collect()
    }
}

/// How excess heat is paid.
#[derive(Clone, Copy)]
enum Payment<'a> {
    /// Uniform market price on delivered heat.
    Uniform,
    /// Signal price on all generated heat, wasted or not.
    Signal(&'a [f64]),
}

fn summarize(res: &ClearingResult, s: &ScenarioInputs, payment: Payment) -> ParadigmSummary {
    let bids: Vec<Vec<f64>> = s
        .chps
        .iter()
        .map(|c| s.elec_price.iter().map(|&p| chp_bid(c, p)).collect())
        .collect();
    let mut monthly = Vec::new();
    for (month, hours) in s.axis.months() {
        let mut m = MonthlyFigures {
            month,
            hours: hours.len(),
            chp_cost: 0.0,
            objective: 0.0,
            scheduled_eh: 0.0,
            wasted_eh: 0.0,
            generated_eh: 0.0,
            unsupplied: 0.0,
            avg_price: 0.0,
            eh_revenue: 0.0,
        };
        let mut price_sum = 0.0;
        for t in hours {
            let chp: f64 = bids.iter().zip(&res.chp_heat).map(|(b, g)| b[t] * g[t]).sum();
            m.chp_cost += chp;
            m.objective += chp + s.penalty_unsupplied * res.unsupplied[t];
            let generated: f64 = res.eh_generated.iter().map(|g| g[t]).sum();
            let wasted: f64 = res.eh_wasted.iter().map(|w| w[t]).sum();
            m.generated_eh += generated;
            m.wasted_eh += wasted;
            m.scheduled_eh += generated - wasted;
            m.unsupplied += res.unsupplied[t];
            price_sum += res.market_price[t];
            m.eh_revenue += match payment {
                Payment::Uniform => res.market_price[t] * (generated - wasted),
                Payment::Signal(mu) => mu[t] * generated,
            };
        }
        m.avg_price = price_sum / m.hours as f64;
        monthly.push(m);
    }
    let total = |f: fn(&MonthlyFigures) -> f64| monthly.iter().map(f).sum::<f64>();
    let hours = res.hours().max(1) as f64;
    ParadigmSummary {
        total_chp_cost: total(|m| m.chp_cost),
        total_objective: total(|m| m.objective),
        scheduled_eh: total(|m| m.scheduled_eh),
        wasted_eh: total(|m| m.wasted_eh),
        generated_eh: total(|m| m.generated_eh),
        unsupplied: total(|m| m.unsupplied),
        mean_price: res.market_price.iter().sum::<f64>() / hours,
        eh_revenue: total(|m| m.eh_revenue),
        monthly,
    }
}

/// Compares the two paradigms' results over the scenario's axis.
pub fn compute_report(
    mp: &ClearingResult,
    ss: &ClearingResult,
    s: &ScenarioInputs,
    price_scale: f64,
) -> Result<ComparisonReport, SimError> {
    for r in [mp, ss] {
        if r.hours() != s.axis.length {
            return Err(SimError::AxisMismatch {
                expected: s.axis.length,
                got: r.hours(),
            });
        }
    }
    let mu = signal(s, price_scale);
    let mp_sum = summarize(mp, s, Payment::Uniform);
    let ss_sum = summarize(ss, s, Payment::Signal(&mu));
    let suboptimality_monthly: Vec<f64> = mp_sum
        .monthly
        .iter()
        .zip(&ss_sum.monthly)
        .map(|(a, b)| b.chp_cost - a.chp_cost)
        .collect();
    Ok(ComparisonReport {
        capacity_mw: s.excess_heat_capacity(),
        suboptimality_total: suboptimality_monthly.iter().sum(),
        objective_gap: ss_sum.total_objective - mp_sum.total_objective,
        suboptimality_monthly,
        mp: mp_sum,
        ss: ss_sum,
    })
}

/// Runs both paradigms and compares them.
pub fn run_comparison(s: &ScenarioInputs, opts: &SimOptions) -> Result<SweepRun, SimError> {
    let mp = run_paradigm(s, Paradigm::Mp, opts)?;
    let ss = run_paradigm(s, Paradigm::Ss, opts)?;
    let report = compute_report(&mp, &ss, s, opts.price_scale)?;
    Ok(SweepRun { report, mp, ss })
}

/// Excess-heat capacities to sweep (MW) over a base scenario.
///
/// The first fleet of the base scenario is the template whose unit count is
/// set from each capacity; a base without fleets uses the supermarket unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub capacities: Vec<f64>,
}

/// Half-up rounding of `capacity_mw` to whole units.
pub fn units_for_capacity(capacity_mw: f64, g_max_unit_kw: f64) -> u64 {
    (capacity_mw * KW_PER_MW / g_max_unit_kw + 0.5).floor().max(0.0) as u64
}

/// The base scenario with its template fleet resized to `capacity_mw`.
pub fn scenario_at_capacity(base: &ScenarioInputs, capacity_mw: f64) -> ScenarioInputs {
    let mut s = base.clone();
    let template = base
        .fleets
        .first()
        .cloned()
        .unwrap_or_else(|| ExcessHeatFleet::supermarket("excess_heat", 0));
    let units = units_for_capacity(capacity_mw, template.g_max_unit);
    let rest: Vec<_> = base.fleets.iter().skip(1).cloned().collect();
    s.fleets.clear();
    if units > 0 {
        s.fleets.push(ExcessHeatFleet {
            unit_count: units,
            ..template
        });
    }
    s.fleets.extend(rest);
    s
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub report: ComparisonReport,
    pub mp: ClearingResult,
    pub ss: ClearingResult,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub capacity_mw: f64,
    pub unit_count: u64,
    /// Requested minus installed capacity after rounding to whole units.
    pub capacity_mismatch_mw: f64,
    pub outcome: Result<SweepRun, String>,
}

/// Runs every sweep point on `jobs` worker threads. Output order follows
/// `spec.capacities`; failures are kept per point.
pub fn run_sweep(
    base: &ScenarioInputs,
    spec: &SweepSpec,
    opts: &SimOptions,
    jobs: usize,
) -> Vec<SweepPoint> {
    let point = |&capacity_mw: &f64| {
        let s = scenario_at_capacity(base, capacity_mw);
        let installed = s.fleets.first().filter(|_| capacity_mw > 0.0);
        let unit_count = installed.map_or(0, |f| f.unit_count);
        let installed_mw = installed.map_or(0.0, ExcessHeatFleet::capacity_mw);
        log::info!("sweep point {capacity_mw} MW ({unit_count} units)");
        SweepPoint {
            capacity_mw,
            unit_count,
            capacity_mismatch_mw: capacity_mw - installed_mw,
            outcome: run_comparison(&s, opts).map_err(|e| e.to_string()),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build();
    match pool {
        Ok(pool) => pool.install(|| spec.capacities.par_iter().map(point).collect()),
        Err(_) => spec.capacities.iter().map(point).collect(),
    }
}

/// Trend checks across sweep points (successful points only, in order of
/// increasing capacity).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepDiagnostics {
    pub mp_objective_non_increasing: bool,
    pub suboptimality_nonnegative: bool,
    pub ss_waste_at_least_mp: bool,
}

pub fn sweep_diagnostics(points: &[SweepPoint]) -> SweepDiagnostics {
    let mut ok: Vec<(f64, &ComparisonReport)> = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok().map(|r| (p.capacity_mw, &r.report)))
        .collect();
    ok.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = |x: f64| 1e-6 * x.abs().max(1.0);
    SweepDiagnostics {
        mp_objective_non_increasing: ok.windows(2).all(|w| {
            w[1].1.mp.total_objective <= w[0].1.mp.total_objective + tol(w[0].1.mp.total_objective)
        }),
        suboptimality_nonnegative: ok
            .iter()
            .all(|(_, r)| r.objective_gap >= -tol(r.mp.total_objective)),
        ss_waste_at_least_mp: ok.iter().all(|(_, r)| r.ss.wasted_eh >= r.mp.wasted_eh - tol(r.mp.wasted_eh)),
    }
}
