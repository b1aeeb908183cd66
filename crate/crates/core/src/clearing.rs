//! The two scheduling paradigms for one clearing block.
//!
//! * Market participation: CHPs and excess-heat fleets bid into a joint
//!   cost-minimising clearing; the uniform price is the dual of the hourly
//!   balance.
//! * Self-scheduling: each fleet optimises against the published price
//!   signal on its own, then the market clears the residual load with the
//!   fleets' output as a fixed, must-take injection.

use std::fs::File;
use std::io::BufWriter;
use std::ops::Range;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::{ClearingResult, ExcessHeatFleet, ScenarioInputs, KW_PER_MW};
use crate::lp::{self, Bound, LinearProgram, LpError, LpSolution, LpStatus, RowId};
use crate::models::{
    base_power, build_chp_block, build_excess_heat_block, FleetScale, FleetState, ModelError,
};
use crate::pricing::{chp_bid, eh_bid};

/// Cost per scaled unit of excess-heat output used to pick the
/// least-output schedule among equal-cost optima.
pub const TIE_BREAK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ClearingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{stage} LP for hours {start}..{end} is {status:?}; fleet state or bands are inconsistent")]
    Invariant {
        stage: &'static str,
        start: usize,
        end: usize,
        status: LpStatus,
    },
    #[error("writing LP dump {path}: {source}")]
    Dump {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default)]
pub struct ClearingOptions {
    /// When set, each clearing LP is written there in LP format.
    pub dump_dir: Option<PathBuf>,
}

/// Result of clearing one block plus the fleet states it hands on.
#[derive(Debug, Clone)]
pub struct BlockOutcome {
    pub result: ClearingResult,
    pub states: Vec<FleetState>,
}

fn dump(opts: &ClearingOptions, stage: &str, block: &Range<usize>, lp: &LinearProgram) -> Result<(), ClearingError> {
    let Some(dir) = &opts.dump_dir else {
        return Ok(());
    };
    let path = dir.join(format!("{stage}_{:05}.lp", block.start));
    let write = |path: &Path| -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        lp::write_lp_format(lp, BufWriter::new(File::create(path)?))
    };
    write(&path).map_err(|source| ClearingError::Dump { path, source })
}

fn solve_checked(
    lp: &LinearProgram,
    stage: &'static str,
    block: &Range<usize>,
) -> Result<LpSolution, ClearingError> {
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(ClearingError::Invariant {
            stage,
            start: block.start,
            end: block.end,
            status: sol.status,
        });
    }
    Ok(sol)
}

/// One bidder in an hour, for marginal-price reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participant {
    pub bid: f64,
    pub quantity: f64,
    /// `None` for participants without a cap (unsupplied load).
    pub cap: Option<f64>,
}

/// Bid of the most expensive participant that is dispatched strictly
/// between zero and its cap. When every dispatched participant sits at its
/// cap, the most expensive dispatched bid; zero when nothing is dispatched.
pub fn marginal_bid_price(participants: &[Participant], tol: f64) -> f64 {
    let dispatched = |p: &&Participant| p.quantity > tol;
    let interior = participants
        .iter()
        .filter(dispatched)
        .filter(|p| p.cap.is_none_or(|c| p.quantity < c - tol))
        .map(|p| p.bid)
        .fold(f64::NEG_INFINITY, f64::max);
    if interior.is_finite() {
        return interior;
    }
    let any = participants
        .iter()
        .filter(dispatched)
        .map(|p| p.bid)
        .fold(f64::NEG_INFINITY, f64::max);
    if any.is_finite() {
        any
    } else {
        0.0
    }
}

fn price_tolerance(load: f64) -> f64 {
    1e-7 * load.abs().max(1.0)
}

/// Hourly participants of a cleared result; used for marginal prices.
fn hour_participants(
    res: &ClearingResult,
    bids: &[Vec<f64>],
    caps: &[f64],
    penalty: f64,
    t: usize,
) -> Vec<Participant> {
    let mut out = Vec::with_capacity(caps.len() + res.eh_generated.len() + 1);
    for (i, heat) in res.chp_heat.iter().enumerate() {
        out.push(Participant {
            bid: bids[i][t],
            quantity: heat[t],
            cap: Some(caps[i]),
        });
    }
    for (g, w) in res.eh_generated.iter().zip(&res.eh_wasted) {
        out.push(Participant {
            bid: eh_bid(),
            quantity: g[t] - w[t],
            cap: Some(g[t]),
        });
    }
    out.push(Participant {
        bid: penalty,
        quantity: res.unsupplied[t],
        cap: None,
    });
    out
}

struct Market {
    base_mw: f64,
    bids: Vec<Vec<f64>>,
    caps: Vec<f64>,
    chp_vars: Vec<crate::models::ChpBlock>,
    unsupplied: Vec<crate::lp::VarId>,
    balance: Vec<RowId>,
}

/// CHP variables, unsupplied-load variables and the (priced) balance rows
/// `sum(chp) + extra + U = load - fixed_injection`, one per hour.
fn build_market(
    lp: &mut LinearProgram,
    s: &ScenarioInputs,
    block: &Range<usize>,
    fixed_injection: &[f64],
    mut extra_terms: impl FnMut(usize) -> Vec<(crate::lp::VarId, f64)>,
) -> Market {
    let hours = block.len();
    let loads = &s.heat_load[block.clone()];
    let base_mw = base_power(loads.iter().copied().fold(0.0, f64::max));

    let mut bids = Vec::with_capacity(s.chps.len());
    let mut chp_vars = Vec::with_capacity(s.chps.len());
    for chp in &s.chps {
        let blk = build_chp_block(lp, chp, hours, base_mw);
        let b: Vec<f64> = s.elec_price[block.clone()].iter().map(|&p| chp_bid(chp, p)).collect();
        for (t, &v) in blk.heat.iter().enumerate() {
            lp.set_cost(v, b[t]);
        }
        bids.push(b);
        chp_vars.push(blk);
    }
    let unsupplied: Vec<_> = (0..hours)
        .map(|t| lp.add_var(format!("unsupplied[{t}]"), 0.0, f64::INFINITY, s.penalty_unsupplied))
        .collect();

    let mut balance = Vec::with_capacity(hours);
    for t in 0..hours {
        let mut coeffs: Vec<_> = chp_vars.iter().map(|b| (b.heat[t], 1.0)).collect();
        coeffs.extend(extra_terms(t));
        coeffs.push((unsupplied[t], 1.0));
        let rhs = (loads[t] - fixed_injection[t]) / base_mw;
        balance.push(lp.add_priced_row(format!("balance[{t}]"), coeffs, Bound::Eq(rhs)));
    }
    let caps = chp_vars.iter().map(|b| b.cap_mw).collect();
    Market {
        base_mw,
        bids,
        caps,
        chp_vars,
        unsupplied,
        balance,
    }
}

impl Market {
    fn fill(&self, res: &mut ClearingResult, sol: &LpSolution, s: &ScenarioInputs) {
        res.chp_heat = self.chp_vars.iter().map(|b| b.heat_mw(sol)).collect();
        res.unsupplied = self.unsupplied.iter().map(|&v| sol.value(v) * self.base_mw).collect();
        res.market_price = self.balance.iter().map(|&r| sol.dual(r)).collect();
        let hours = self.balance.len();
        res.objective = (0..hours)
            .map(|t| {
                self.bids.iter().zip(&res.chp_heat).map(|(b, g)| b[t] * g[t]).sum::<f64>()
                    + s.penalty_unsupplied * res.unsupplied[t]
            })
            .sum();
    }

    fn marginal_prices(&self, res: &ClearingResult, loads: &[f64], penalty: f64) -> Vec<f64> {
        (0..loads.len())
            .map(|t| {
                let parts = hour_participants(res, &self.bids, &self.caps, penalty, t);
                marginal_bid_price(&parts, price_tolerance(loads[t]))
            })
            .collect()
    }
}

/// Joint clearing of CHPs and fleets for the hours in `block`.
pub fn clear_market_participation(
    s: &ScenarioInputs,
    block: Range<usize>,
    states: &[FleetState],
    opts: &ClearingOptions,
) -> Result<BlockOutcome, ClearingError> {
    let hours = block.len();
    let cop_all = s.cop_series();
    let cop = &cop_all[block.clone()];
    let terminal_cop = cop_all.get(block.end).copied();
    let loads = &s.heat_load[block.clone()];
    let base_mw = base_power(loads.iter().copied().fold(0.0, f64::max));

    let mut lp = LinearProgram::new();
    let mut fleet_blocks = Vec::with_capacity(s.fleets.len());
    let mut waste = Vec::with_capacity(s.fleets.len());
    for (fleet, state) in s.fleets.iter().zip(states) {
        let scale = FleetScale::system(fleet, base_mw);
        let blk = build_excess_heat_block(&mut lp, fleet, cop, state, scale, terminal_cop)?;
        let w: Vec<_> = (0..hours)
            .map(|t| lp.add_var(format!("eh_{}_w[{t}]", fleet.id), 0.0, f64::INFINITY, 0.0))
            .collect();
        for (t, &wt) in w.iter().enumerate() {
            // Zero bid on the delivered part G - W.
            lp.add_cost(blk.generated[t], eh_bid() + TIE_BREAK);
            lp.add_cost(wt, -eh_bid());
            lp.add_row(
                format!("eh_{}_waste[{t}]", fleet.id),
                vec![(wt, 1.0), (blk.generated[t], -1.0)],
                Bound::Le(0.0),
            );
        }
        fleet_blocks.push(blk);
        waste.push(w);
    }

    let zero = vec![0.0; hours];
    let market = build_market(&mut lp, s, &block, &zero, |t| {
        fleet_blocks
            .iter()
            .zip(&waste)
            .flat_map(|(b, w)| [(b.generated[t], 1.0), (w[t], -1.0)])
            .collect()
    });
    debug_assert_eq!(market.base_mw, base_mw);

    dump(opts, "mp", &block, &lp)?;
    let sol = solve_checked(&lp, "market-participation", &block)?;

    let init: Vec<f64> = states.iter().map(|s| s.fridge_temp).collect();
    let mut res = ClearingResult::empty(s.chps.len(), &init);
    market.fill(&mut res, &sol, s);
    res.eh_generated = fleet_blocks.iter().map(|b| b.generated_mw(&sol)).collect();
    res.eh_elec_load = fleet_blocks.iter().map(|b| b.elec_mw(&sol)).collect();
    res.fridge_temp = fleet_blocks.iter().map(|b| b.fridge_temps(&sol)).collect();
    res.eh_wasted = waste
        .iter()
        .zip(&res.eh_generated)
        .map(|(w, g)| {
            // Waste never exceeds generation, also after scaling back.
            w.iter().zip(g).map(|(&v, &gm)| (sol.value(v) * base_mw).min(gm)).collect()
        })
        .collect();
    res.marginal_price = market.marginal_prices(&res, loads, s.penalty_unsupplied);

    Ok(BlockOutcome {
        states: fleet_blocks.iter().map(|b| b.final_state(&sol)).collect(),
        result: res,
    })
}

/// A fleet's privately optimal schedule against the price signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSchedule {
    pub generated_mw: Vec<f64>,
    pub elec_mw: Vec<f64>,
    /// Includes the initial temperature.
    pub fridge_temp: Vec<f64>,
    pub final_state: FleetState,
    /// Electricity cost minus signal revenue (currency).
    pub net_cost: f64,
}

/// Minimises electricity cost minus price-signal revenue for one fleet.
///
/// Equal-cost optima are resolved towards the least total output.
/// `terminal_cop` is the COP of the hour after the block, if any.
#[allow(clippy::too_many_arguments)]
pub fn self_schedule(
    fleet: &ExcessHeatFleet,
    cop: &[f64],
    terminal_cop: Option<f64>,
    mu: &[f64],
    elec_price: &[f64],
    state: &FleetState,
    block: Range<usize>,
    opts: &ClearingOptions,
) -> Result<SelfSchedule, ClearingError> {
    let mut lp = LinearProgram::new();
    let scale = FleetScale::per_unit(fleet);
    let blk = build_excess_heat_block(&mut lp, fleet, cop, state, scale, terminal_cop)?;
    for t in 0..cop.len() {
        // Per-unit kW, so costs are 1000x currency per unit-hour.
        lp.set_cost(blk.generated[t], -mu[t] + TIE_BREAK);
        lp.set_cost(blk.elec[t], elec_price[t]);
    }
    dump(opts, &format!("ss_{}", fleet.id), &block, &lp)?;
    let sol = solve_checked(&lp, "self-scheduling", &block)?;
    let generated_mw = blk.generated_mw(&sol);
    let elec_mw = blk.elec_mw(&sol);
    let net_cost = (0..cop.len())
        .map(|t| elec_price[t] * elec_mw[t] - mu[t] * generated_mw[t])
        .sum();
    Ok(SelfSchedule {
        fridge_temp: blk.fridge_temps(&sol),
        final_state: blk.final_state(&sol),
        generated_mw,
        elec_mw,
        net_cost,
    })
}

/// Clears CHPs against the load left after the fixed excess-heat injection
/// `fixed_eh[fleet][hour]` (MW over the block). Surplus injection is vented
/// through the waste variables.
pub fn clear_residual(
    s: &ScenarioInputs,
    block: Range<usize>,
    fixed_eh: &[Vec<f64>],
    states: &[FleetState],
    opts: &ClearingOptions,
) -> Result<BlockOutcome, ClearingError> {
    let hours = block.len();
    let cop_all = s.cop_series();
    let cop = &cop_all[block.clone()];
    let loads = &s.heat_load[block.clone()];
    let base_mw = base_power(loads.iter().copied().fold(0.0, f64::max));

    let mut lp = LinearProgram::new();
    let waste: Vec<Vec<_>> = s
        .fleets
        .iter()
        .zip(fixed_eh)
        .map(|(f, g)| {
            (0..hours)
                .map(|t| lp.add_var(format!("eh_{}_w[{t}]", f.id), 0.0, g[t] / base_mw, -eh_bid()))
                .collect()
        })
        .collect();
    let injection: Vec<f64> = (0..hours).map(|t| fixed_eh.iter().map(|g| g[t]).sum()).collect();
    let market = build_market(&mut lp, s, &block, &injection, |t| {
        waste.iter().map(|w| (w[t], -1.0)).collect()
    });

    dump(opts, "residual", &block, &lp)?;
    let sol = solve_checked(&lp, "residual", &block)?;

    let init: Vec<f64> = states.iter().map(|s| s.fridge_temp).collect();
    let mut res = ClearingResult::empty(s.chps.len(), &init);
    market.fill(&mut res, &sol, s);
    res.eh_generated = fixed_eh.to_vec();
    res.eh_wasted = waste
        .iter()
        .zip(fixed_eh)
        .map(|(w, g)| w.iter().zip(g).map(|(&v, &gm)| (sol.value(v) * base_mw).min(gm)).collect())
        .collect();
    res.eh_elec_load = fixed_eh
        .iter()
        .map(|g| g.iter().zip(cop).map(|(&gm, &c)| gm / c).collect())
        .collect();

    let mut next_states = Vec::with_capacity(s.fleets.len());
    res.fridge_temp = s
        .fleets
        .iter()
        .zip(fixed_eh)
        .zip(states)
        .map(|((f, g), st)| {
            let per_unit = KW_PER_MW / f.unit_count as f64;
            let mut temps = Vec::with_capacity(hours + 1);
            temps.push(st.fridge_temp);
            for t in 0..hours {
                let prev = temps[t];
                temps.push(f.next_fridge_temp(prev, g[t] * per_unit, cop[t]));
            }
            next_states.push(FleetState {
                fridge_temp: temps[hours],
                last_output_kw: g.last().map(|&v| v * per_unit).or(st.last_output_kw),
            });
            temps
        })
        .collect();
    res.marginal_price = market.marginal_prices(&res, loads, s.penalty_unsupplied);

    Ok(BlockOutcome {
        result: res,
        states: next_states,
    })
}

/// Greedy merit-order dispatch of `(price, cap)` bids; independent check on
/// the LP clearing.
#[derive(Debug, Clone, PartialEq)]
pub struct MeritOrderOutcome {
    pub dispatch: Vec<f64>,
    pub unsupplied: f64,
    pub price: f64,
    pub cost: f64,
}

pub fn merit_order_oracle(bids: &[(f64, f64)], load: f64, penalty: f64) -> MeritOrderOutcome {
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&a, &b| bids[a].0.total_cmp(&bids[b].0).then(a.cmp(&b)));
    let mut dispatch = vec![0.0; bids.len()];
    let mut remaining = load;
    let mut price = 0.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let q = bids[i].1.min(remaining);
        if q > 0.0 {
            dispatch[i] = q;
            remaining -= q;
            price = bids[i].0;
        }
    }
    let unsupplied = remaining.max(0.0);
    if unsupplied > 0.0 {
        price = penalty;
    }
    let cost = bids.iter().zip(&dispatch).map(|(b, q)| b.0 * q).sum::<f64>() + penalty * unsupplied;
    MeritOrderOutcome {
        dispatch,
        unsupplied,
        price,
        cost,
    }
}
