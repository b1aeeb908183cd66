use chrono::NaiveDate;
use exheat_core::clearing::{
    clear_market_participation, clear_residual, merit_order_oracle, self_schedule, ClearingOptions,
};
use exheat_core::domain::{
    ChpParams, ClearingResult, CopModel, ExcessHeatFleet, ScenarioInputs, ThermalBasis, TimeAxis,
};
use exheat_core::models::FleetState;
use exheat_core::sim::{
    compute_report, run_paradigm, run_sweep, scenario_at_capacity, Paradigm, SimOptions, SweepSpec,
};
use exheat_core::synth::demo_week;
use proptest::prelude::*;

/// CHP whose heat bid equals `bid` at a zero electricity price.
fn flat_chp(id: &str, bid: f64, cap: f64) -> ChpParams {
    ChpParams {
        id: id.into(),
        rho_e: 1.0,
        rho_h: 1.0,
        r: 0.0,
        f_max: 1e9,
        g_h_max: cap,
        alpha: bid,
    }
}

fn market(loads: Vec<f64>, chps: Vec<ChpParams>, fleets: Vec<ExcessHeatFleet>) -> ScenarioInputs {
    let n = loads.len();
    let start = NaiveDate::from_ymd_opt(2019, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    ScenarioInputs {
        axis: TimeAxis::new(start, n),
        heat_load: loads,
        elec_price: vec![0.0; n],
        ambient_temp: vec![0.0; n],
        penalty_unsupplied: 5000.0,
        chps,
        fleets,
        cop: CopModel::default(),
    }
}

fn clear(s: &ScenarioInputs) -> ClearingResult {
    let states: Vec<FleetState> = s.fleets.iter().map(|f| FleetState::initial(f, false)).collect();
    clear_market_participation(s, 0..s.axis.length, &states, &ClearingOptions::default())
        .unwrap()
        .result
}

#[test]
fn two_chp_merit_order() {
    let s = market(vec![100.0], vec![flat_chp("a", 10.0, 60.0), flat_chp("b", 20.0, 60.0)], vec![]);
    let r = clear(&s);
    assert!((r.chp_heat[0][0] - 60.0).abs() < 1e-9);
    assert!((r.chp_heat[1][0] - 40.0).abs() < 1e-9);
    assert!((r.market_price[0] - 20.0).abs() < 1e-9);
    assert_eq!(r.marginal_price[0], 20.0);
    assert!((r.objective - 1400.0).abs() < 1e-9);
}

#[test]
fn curtailment_sets_penalty_price() {
    let s = market(vec![100.0], vec![flat_chp("a", 15.0, 80.0)], vec![]);
    let r = clear(&s);
    assert!((r.unsupplied[0] - 20.0).abs() < 1e-9);
    assert!((r.market_price[0] - 5000.0).abs() < 1e-6);
    assert_eq!(r.marginal_price[0], 5000.0);
    assert!((r.objective - (80.0 * 15.0 + 20.0 * 5000.0)).abs() < 1e-6);
}

#[test]
fn zero_load_clears_nothing() {
    let s = market(vec![0.0], vec![flat_chp("a", 15.0, 80.0)], vec![]);
    let r = clear(&s);
    assert_eq!(r.chp_heat[0][0], 0.0);
    assert_eq!(r.unsupplied[0], 0.0);
    assert_eq!(r.objective, 0.0);
    assert_eq!(r.marginal_price[0], 0.0);
}

/// 1000 units that must emit exactly 30 kW each in the first hour: with no
/// indoor coupling, COP 2 and B = 1/15 kW-basis, cooling from 5 to 4 °C
/// takes 15 kW of extraction.
fn forced_fleet() -> (ExcessHeatFleet, CopModel) {
    let mut f = ExcessHeatFleet::supermarket("forced", 1000);
    f.thermal_basis = ThermalBasis::Kilowatt;
    f.a_coef = 0.0;
    f.b_coef = 1.0 / 15.0;
    f.t_fridge_init = 5.0;
    f.t_avg_min = 4.0;
    f.t_avg_max = 4.0;
    f.avg_window = 1;
    let cop = CopModel {
        cop0: 2.0,
        cop1: 0.0,
        cop_min: 1.5,
        cop_max: 5.0,
    };
    (f, cop)
}

#[test]
fn forced_output_into_zero_load_is_wasted() {
    let (f, cop) = forced_fleet();
    let mut s = market(vec![0.0], vec![flat_chp("a", 15.0, 80.0)], vec![f]);
    s.cop = cop;
    let r = clear(&s);
    assert!((r.eh_generated[0][0] - 30.0).abs() < 1e-9);
    assert!((r.eh_wasted[0][0] - 30.0).abs() < 1e-9);
    assert!((r.eh_elec_load[0][0] - 15.0).abs() < 1e-9);
    assert!(r.objective.abs() < 1e-9);
    assert!(r.max_balance_residual(&s.heat_load) < 1e-9);
    assert!((r.fridge_temp[0][1] - 4.0).abs() < 1e-9);
}

#[test]
fn merit_order_oracle_examples() {
    let o = merit_order_oracle(&[(0.0, 30.0), (10.0, 60.0), (20.0, 60.0)], 100.0, 5000.0);
    assert_eq!(o.dispatch, vec![30.0, 60.0, 10.0]);
    assert_eq!(o.price, 20.0);
    assert_eq!(o.cost, 800.0);
    let o = merit_order_oracle(&[], 50.0, 5000.0);
    assert_eq!((o.price, o.cost, o.unsupplied), (5000.0, 250000.0, 50.0));
    let o = merit_order_oracle(&[(3.0, 10.0), (1.0, 5.0)], 0.0, 5000.0);
    assert_eq!((o.dispatch.clone(), o.price, o.cost), (vec![0.0, 0.0], 0.0, 0.0));
}

/// A fleet whose averaging band equals its hard band, so only the hard
/// bounds, the pump cap and the ramp limit shape the schedule.
fn toy_fleet(units: u64, ramp_frac: f64, t0: f64) -> ExcessHeatFleet {
    let mut f = ExcessHeatFleet::supermarket("toy", units);
    f.t_avg_min = f.t_fridge_min;
    f.t_avg_max = f.t_fridge_max;
    f.ramp_frac = ramp_frac;
    f.t_fridge_init = t0;
    f
}

/// Greedy forward pass that keeps each per-unit output as high (or low) as
/// the ramp and the hard band allow. Both pushes make the temperature path
/// pointwise extreme, which is optimal for a constant price.
fn greedy(f: &ExcessHeatFleet, cop: f64, hours: usize, maximise: bool) -> (Vec<f64>, Vec<f64>) {
    let k = f.b_coef * f.extraction_units_per_kw() * (1.0 - 1.0 / cop);
    let mut g: Vec<f64> = Vec::new();
    let mut temps = vec![f.t_fridge_init];
    for t in 0..hours {
        let prev_t = temps[t];
        let drift = prev_t + f.a_coef * (f.t_indoor - prev_t);
        let (lo_ramp, hi_ramp) = match g.last() {
            Some(&p) => ((p - f.ramp_kw()).max(0.0), (p + f.ramp_kw()).min(f.g_max_unit)),
            None => (0.0, f.g_max_unit),
        };
        // Output keeping the next temperature at a band edge.
        let at_min = (drift - f.t_fridge_min) / k;
        let at_max = (drift - f.t_fridge_max) / k;
        let v = if maximise {
            hi_ramp.min(at_min)
        } else {
            lo_ramp.max(at_max)
        };
        g.push(v);
        temps.push(f.next_fridge_temp(prev_t, v, cop));
    }
    (g, temps)
}

fn schedule(f: &ExcessHeatFleet, hours: usize, mu: f64, price: f64) -> exheat_core::clearing::SelfSchedule {
    let state = FleetState::initial(f, false);
    self_schedule(
        f,
        &vec![3.0; hours],
        None,
        &vec![mu; hours],
        &vec![price; hours],
        &state,
        0..hours,
        &ClearingOptions::default(),
    )
    .unwrap()
}

#[test]
fn profitable_signal_gives_max_cooling() {
    let f = toy_fleet(100, 0.25, 6.0);
    let (g, temps) = greedy(&f, 3.0, 6, true);
    // The toy must actually hit the lower band.
    assert!((temps[6] - f.t_fridge_min).abs() < 1e-9);
    let ss = schedule(&f, 6, 100.0, 30.0);
    for (t, gt) in g.iter().enumerate() {
        let per_unit = ss.generated_mw[t] * 1000.0 / 100.0;
        assert!((per_unit - gt).abs() < 1e-6, "hour {t}: {per_unit} vs {gt}");
        assert!((ss.fridge_temp[t + 1] - temps[t + 1]).abs() < 1e-6);
    }
}

#[test]
fn zero_signal_gives_min_cooling() {
    let f = toy_fleet(100, 1.0, 4.5);
    let (g, temps) = greedy(&f, 3.0, 6, false);
    assert!((temps[6] - f.t_fridge_max).abs() < 1e-9);
    let ss = schedule(&f, 6, 0.0, 30.0);
    for (t, gt) in g.iter().enumerate() {
        let per_unit = ss.generated_mw[t] * 1000.0 / 100.0;
        assert!((per_unit - gt).abs() < 1e-6, "hour {t}: {per_unit} vs {gt}");
    }
    let expected_cost: f64 = g.iter().map(|gk| 30.0 * gk / 3.0 * 100.0 / 1000.0).sum();
    assert!((ss.net_cost - expected_cost).abs() < 1e-6);
}

#[test]
fn zero_prices_still_give_a_feasible_schedule() {
    let f = ExcessHeatFleet::supermarket("s", 50);
    let ss = schedule(&f, 24, 0.0, 0.0);
    for t in 0..24 {
        let per_unit = ss.generated_mw[t] * 1000.0 / 50.0;
        assert!((-1e-9..=30.0 + 1e-9).contains(&per_unit));
        assert!((2.0 - 1e-6..=8.0 + 1e-6).contains(&ss.fridge_temp[t + 1]));
        let next = f.next_fridge_temp(ss.fridge_temp[t], per_unit, 3.0);
        assert!((next - ss.fridge_temp[t + 1]).abs() < 1e-6);
    }
    for w in ss.fridge_temp[1..].chunks(6) {
        let avg = w.iter().sum::<f64>() / w.len() as f64;
        assert!((4.0 - 1e-6..=5.0 + 1e-6).contains(&avg));
    }
}

#[test]
fn residual_with_zero_injection_matches_chp_only_market() {
    let mut s = demo_week();
    s.axis = s.axis.with_block_length(24);
    let states: Vec<FleetState> = s.fleets.iter().map(|f| FleetState::initial(f, false)).collect();
    let zero = vec![vec![0.0; 24]; s.fleets.len()];
    let residual = clear_residual(&s, 0..24, &zero, &states, &ClearingOptions::default()).unwrap();
    let mut chp_only = s.clone();
    chp_only.fleets.clear();
    let plain = clear_market_participation(&chp_only, 0..24, &[], &ClearingOptions::default()).unwrap();
    assert_eq!(residual.result.chp_heat, plain.result.chp_heat);
    assert!((residual.result.objective - plain.result.objective).abs() < 1e-6);
    assert_eq!(residual.result.market_price, plain.result.market_price);
}

#[test]
fn residual_surplus_hour_has_zero_price() {
    let f = ExcessHeatFleet::supermarket("s", 2000);
    let s = market(vec![100.0, 20.0], vec![flat_chp("a", 15.0, 200.0)], vec![f.clone()]);
    let states = vec![FleetState::initial(&f, false)];
    let fixed = vec![vec![30.0, 30.0]];
    let r = clear_residual(&s, 0..2, &fixed, &states, &ClearingOptions::default()).unwrap().result;
    assert!((r.eh_wasted[0][1] - 10.0).abs() < 1e-9);
    assert_eq!(r.chp_heat[0][1], 0.0);
    assert!(r.market_price[1].abs() < 1e-9);
    assert_eq!(r.marginal_price[1], 0.0);
    assert!((r.chp_heat[0][0] - 70.0).abs() < 1e-9);
    assert!((r.market_price[0] - 15.0).abs() < 1e-9);
}

#[test]
fn residual_at_market_optimum_reproduces_objective() {
    let s = demo_week();
    let states: Vec<FleetState> = s.fleets.iter().map(|f| FleetState::initial(f, false)).collect();
    let mp = clear_market_participation(&s, 0..24, &states, &ClearingOptions::default()).unwrap();
    let res = clear_residual(&s, 0..24, &mp.result.eh_generated, &states, &ClearingOptions::default()).unwrap();
    let rel = (res.result.objective - mp.result.objective).abs() / mp.result.objective;
    assert!(rel < 1e-9, "{} vs {}", res.result.objective, mp.result.objective);
}

#[test]
fn zero_fleets_make_paradigms_coincide() {
    let mut s = demo_week();
    s.fleets.clear();
    let mp = run_paradigm(&s, Paradigm::Mp, &SimOptions::default()).unwrap();
    let ss = run_paradigm(&s, Paradigm::Ss, &SimOptions::default()).unwrap();
    assert_eq!(mp.chp_heat, ss.chp_heat);
    assert_eq!(mp.market_price, ss.market_price);
    let report = compute_report(&mp, &ss, &s, 1.0).unwrap();
    assert!(report.suboptimality_monthly.iter().all(|&v| v == 0.0));
}

#[test]
fn fridge_state_carries_over_block_seam() {
    let mut s = demo_week();
    s.axis.length = 48;
    for v in [&mut s.heat_load, &mut s.elec_price, &mut s.ambient_temp] {
        v.truncate(48);
    }
    let cop = s.cop_series();
    for p in [Paradigm::Mp, Paradigm::Ss] {
        let r = run_paradigm(&s, p, &SimOptions::default()).unwrap();
        let temps = &r.fridge_temp[0];
        assert_eq!(temps.len(), 49);
        let n = s.fleets[0].unit_count as f64;
        for t in [23, 24, 25] {
            let next = s.fleets[0].next_fridge_temp(temps[t], r.eh_generated[0][t] * 1000.0 / n, cop[t]);
            assert!((next - temps[t + 1]).abs() < 1e-6, "{p} hour {t}");
        }
        let ramp = (r.eh_generated[0][24] - r.eh_generated[0][23]).abs() * 1000.0 / n;
        assert!(ramp <= s.fleets[0].ramp_kw() + 1e-6);
    }
}

#[test]
fn whole_horizon_bounds_block_chaining() {
    let mut s = demo_week();
    s.axis.length = 24;
    for v in [&mut s.heat_load, &mut s.elec_price, &mut s.ambient_temp] {
        v.truncate(24);
    }
    s.axis = s.axis.with_block_length(6);
    let blocks = run_paradigm(&s, Paradigm::Mp, &SimOptions::default()).unwrap();
    let whole = run_paradigm(
        &s,
        Paradigm::Mp,
        &SimOptions {
            whole_horizon: true,
            ..SimOptions::default()
        },
    )
    .unwrap();
    assert!(whole.objective <= blocks.objective * (1.0 + 1e-9));
}

fn hand_result(chp: Vec<f64>, generated: Vec<f64>, wasted: Vec<f64>, price: Vec<f64>) -> ClearingResult {
    let n = chp.len();
    ClearingResult {
        chp_heat: vec![chp],
        eh_elec_load: vec![generated.iter().map(|g| g / 3.0).collect()],
        eh_generated: vec![generated],
        eh_wasted: vec![wasted],
        fridge_temp: vec![vec![4.5; n + 1]],
        unsupplied: vec![0.0; n],
        marginal_price: price.clone(),
        market_price: price,
        objective: 0.0,
    }
}

#[test]
fn shifted_excess_heat_costs_the_bid_spread() {
    // One CHP whose bid is 30 in hour 0 and 40 in hour 1.
    let chp = ChpParams {
        id: "c".into(),
        rho_e: 2.0,
        rho_h: 1.0,
        r: 0.5,
        f_max: 1e6,
        g_h_max: 500.0,
        alpha: 20.0,
    };
    let mut s = market(vec![100.0, 100.0], vec![chp], vec![ExcessHeatFleet::supermarket("s", 1000)]);
    s.elec_price = vec![20.0, 80.0];
    let bids = s.chp_bids();
    let (cheap, dear) = (bids[0][0], bids[0][1]);
    assert_eq!((cheap, dear), (30.0, 40.0));
    let mp = hand_result(vec![100.0, 90.0], vec![0.0, 10.0], vec![0.0, 0.0], vec![cheap, dear]);
    let ss = hand_result(vec![90.0, 100.0], vec![10.0, 0.0], vec![0.0, 0.0], vec![cheap, dear]);
    let r = compute_report(&mp, &ss, &s, 1.0).unwrap();
    assert!((r.suboptimality_total - 10.0 * (dear - cheap)).abs() < 1e-9);
    assert_eq!(r.suboptimality_monthly.len(), 1);
}

#[test]
fn payment_rules_on_a_surplus_hour() {
    let mut s = market(vec![30.0], vec![flat_chp("a", 15.0, 80.0)], vec![ExcessHeatFleet::supermarket("s", 2000)]);
    s.ambient_temp = vec![5.0];
    let mu = exheat_core::pricing::price_signal(5.0);
    let mp = hand_result(vec![0.0], vec![50.0], vec![20.0], vec![0.0]);
    let mut mp_priced = mp.clone();
    mp_priced.market_price = vec![12.0];
    let ss = hand_result(vec![0.0], vec![50.0], vec![20.0], vec![0.0]);
    let r = compute_report(&mp_priced, &ss, &s, 1.0).unwrap();
    assert!((r.ss.eh_revenue - mu * 50.0).abs() < 1e-9);
    assert!((r.mp.eh_revenue - 12.0 * 30.0).abs() < 1e-9);
    assert!((r.ss.wasted_eh - 20.0).abs() < 1e-12);
    let short = hand_result(vec![], vec![], vec![], vec![]);
    assert!(compute_report(&short, &ss, &s, 1.0).is_err());
}

#[test]
fn monthly_figures_sum_to_totals() {
    let s = demo_week();
    let mp = run_paradigm(&s, Paradigm::Mp, &SimOptions::default()).unwrap();
    let ss = run_paradigm(&s, Paradigm::Ss, &SimOptions::default()).unwrap();
    let r = compute_report(&mp, &ss, &s, 1.0).unwrap();
    for sum in [&r.mp, &r.ss] {
        assert_eq!(sum.monthly.iter().map(|m| m.chp_cost).sum::<f64>(), sum.total_chp_cost);
        assert_eq!(sum.monthly.iter().map(|m| m.wasted_eh).sum::<f64>(), sum.wasted_eh);
        assert_eq!(sum.monthly.iter().map(|m| m.hours).sum::<usize>(), 168);
    }
    assert_eq!(r.suboptimality_monthly.iter().sum::<f64>(), r.suboptimality_total);
}

#[test]
fn sweep_points_and_capacity_rounding() {
    let base = demo_week();
    let points = run_sweep(&base, &SweepSpec { capacities: vec![0.0] }, &SimOptions::default(), 1);
    assert_eq!(points.len(), 1);
    let run = points[0].outcome.as_ref().unwrap();
    assert_eq!(run.report.suboptimality_total, 0.0);

    let s = scenario_at_capacity(&base, 100.01);
    assert_eq!(s.fleets[0].unit_count, 3334);
    assert!(scenario_at_capacity(&base, 0.0).fleets.is_empty());

    let points = run_sweep(&base, &SweepSpec { capacities: vec![300.0, 600.0] }, &SimOptions::default(), 2);
    let obj: Vec<f64> = points
        .iter()
        .map(|p| p.outcome.as_ref().unwrap().report.mp.total_objective)
        .collect();
    assert!(obj[1] <= obj[0]);
}

#[test]
fn sweep_keeps_going_past_failures() {
    let mut base = demo_week();
    // Warm fridges cannot be held at low COP: infeasible for any size.
    base.cop = CopModel {
        cop0: 1.01,
        cop1: 0.0,
        cop_min: 1.01,
        cop_max: 5.0,
    };
    let points = run_sweep(&base, &SweepSpec { capacities: vec![0.0, 300.0] }, &SimOptions::default(), 1);
    assert!(points[0].outcome.is_ok());
    assert!(points[1].outcome.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_clearing_matches_merit_order(
        gens in prop::collection::vec((0.0f64..100.0, 0.0f64..200.0), 0..12),
        load in 0.0f64..1500.0,
    ) {
        let chps: Vec<ChpParams> = gens.iter().enumerate().map(|(i, &(b, c))| flat_chp(&format!("g{i}"), b, c)).collect();
        let s = market(vec![load], chps, vec![]);
        let r = clear(&s);
        let o = merit_order_oracle(&gens, load, 5000.0);
        prop_assert!((r.objective - o.cost).abs() <= 1e-6 * o.cost.abs().max(1.0));
        prop_assert!(r.market_price[0] >= -1e-9);
        // A cheaper schedule cannot exist: no unit can undercut the price.
        for (i, &(b, c)) in gens.iter().enumerate() {
            if b < r.market_price[0] - 1e-6 {
                prop_assert!((r.chp_heat[i][0] - c).abs() < 1e-6);
            }
        }
    }
}
