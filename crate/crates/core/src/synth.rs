//! Synthetic scenarios for the demo, tests and trend studies. None of this is
//! measured data.

use std::f64::consts::TAU;

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    ChpParams, CopModel, ExcessHeatFleet, ScenarioInputs, TimeAxis, DEFAULT_PENALTY_UNSUPPLIED,
};

/// Hours in a non-leap year.
pub const YEAR_HOURS: usize = 8760;
/// Target annual heat demand of the synthetic year (MWh).
pub const YEAR_DEMAND_MWH: f64 = 8.3e6;
pub const YEAR_MIN_LOAD: f64 = 300.0;
pub const YEAR_MAX_LOAD: f64 = 2500.0;

fn start(y: i32, m: u32, d: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid calendar date")
}

fn chp(id: &str, rho_e: f64, rho_h: f64, g_h_max: f64, alpha: f64) -> ChpParams {
    let r = 0.45;
    ChpParams {
        id: id.into(),
        rho_e,
        rho_h,
        r,
        // Fuel never binds before the heat cap.
        f_max: 1.05 * g_h_max * (rho_h + r * rho_e),
        g_h_max,
        alpha,
    }
}

/// Seven CHPs ranging from waste incineration to oil-fired peakers,
/// 2850 MW of heat in total.
pub fn case_study_chps() -> Vec<ChpParams> {
    vec![
        chp("waste", 2.8, 1.0, 600.0, 5.0),
        chp("biomass_a", 2.4, 1.05, 500.0, 14.0),
        chp("biomass_b", 2.5, 1.1, 450.0, 19.0),
        chp("coal", 2.3, 1.1, 400.0, 25.0),
        chp("gas_a", 2.2, 1.1, 350.0, 31.0),
        chp("gas_b", 2.6, 1.2, 300.0, 45.0),
        chp("oil", 3.0, 1.2, 250.0, 60.0),
    ]
}

/// One week of smooth sinusoidal winter-like series with three CHPs and a
/// 600 MW supermarket fleet.
pub fn demo_week() -> ScenarioInputs {
    let hours = 168;
    let day = |h: usize| (h % 24) as f64 / 24.0 * TAU;
    let week = |h: usize| h as f64 / hours as f64 * TAU;
    let ambient: Vec<f64> = (0..hours)
        .map(|h| 3.0 - 3.5 * (day(h) - 0.9).cos() + 2.0 * week(h).sin())
        .collect();
    let heat_load: Vec<f64> = ambient
        .iter()
        .enumerate()
        .map(|(h, &t)| 700.0 + 35.0 * (15.0 - t) + 90.0 * (day(h) - 2.0).sin().max(0.0))
        .collect();
    let elec_price: Vec<f64> = (0..hours)
        .map(|h| 42.0 + 14.0 * (day(h) - 1.8).sin() + 6.0 * (2.0 * day(h)).sin() - 4.0 * week(h).cos())
        .collect();
    ScenarioInputs {
        axis: TimeAxis::new(start(2019, 1, 7), hours),
        heat_load,
        elec_price,
        ambient_temp: ambient,
        penalty_unsupplied: DEFAULT_PENALTY_UNSUPPLIED,
        chps: vec![
            chp("base", 2.8, 1.0, 700.0, 6.0),
            chp("mid", 2.4, 1.1, 400.0, 22.0),
            chp("peak", 2.5, 1.2, 300.0, 48.0),
        ],
        fleets: vec![ExcessHeatFleet::supermarket("supermarkets", 20_000)],
        cop: CopModel::default(),
    }
}

/// A year of Copenhagen-like series starting 2019-01-01: seasonal and daily
/// temperature cycles with AR(1) weather noise, degree-hour driven heat
/// load scaled to 8.3 TWh within 300-2500 MW, and an electricity price with
/// daily, seasonal and noise terms. Comes with [`case_study_chps`] and a
/// zero-sized supermarket fleet template.
pub fn copenhagen_like_year(seed: u64) -> ScenarioInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = YEAR_HOURS;
    let season = |h: usize| ((h as f64 / 24.0 - 20.0) / 365.0 * TAU).cos();
    let daily = |h: usize| (((h % 24) as f64 - 4.0) / 24.0 * TAU).cos();

    let mut weather = 0.0;
    let mut ambient = Vec::with_capacity(n);
    for h in 0..n {
        weather = 0.97 * weather + 0.55 * rng.gen_range(-1.0..1.0);
        ambient.push(9.0 - 8.0 * season(h) - 3.0 * daily(h) + weather);
    }

    // Buildings respond to a day-long moving temperature.
    let mut smooth = ambient[0];
    let drive: Vec<f64> = (0..n)
        .map(|h| {
            smooth += (ambient[h] - smooth) / 24.0;
            let hot_water = 0.15 * (((h % 24) as f64 - 7.0) / 24.0 * TAU).cos().max(0.0);
            (17.0 - smooth).max(0.0).powf(1.3) + hot_water * (17.0 - smooth).clamp(1.0, 20.0)
        })
        .collect();
    let shape = |k: f64| -> Vec<f64> {
        drive
            .iter()
            .map(|d| (YEAR_MIN_LOAD + k * d).clamp(YEAR_MIN_LOAD, YEAR_MAX_LOAD))
            .collect()
    };
    // Bisection on the degree-hour coefficient for the annual total.
    let (mut lo, mut hi) = (0.0, 500.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shape(mid).iter().sum::<f64>() < YEAR_DEMAND_MWH {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let heat_load = shape(0.5 * (lo + hi));

    let mut noise = 0.0;
    let elec_price = (0..n)
        .map(|h| {
            noise = 0.8 * noise + 3.0 * rng.gen_range(-1.0..1.0);
            let d = (h % 24) as f64 / 24.0 * TAU;
            (40.0 + 10.0 * (d - 1.9).sin() + 4.0 * (2.0 * d).sin() + 6.0 * season(h) + noise).max(0.0)
        })
        .collect();

    ScenarioInputs {
        axis: TimeAxis::new(start(2019, 1, 1), n),
        heat_load,
        elec_price,
        ambient_temp: ambient,
        penalty_unsupplied: DEFAULT_PENALTY_UNSUPPLIED,
        chps: case_study_chps(),
        fleets: vec![ExcessHeatFleet::supermarket("supermarkets", 0)],
        cop: CopModel::default(),
    }
}

/// A random one-week scenario with 2-5 CHPs and 1-2 supermarket fleets.
/// Series are smooth cycles with random phases, amplitudes and noise.
pub fn random_week<R: Rng>(rng: &mut R) -> ScenarioInputs {
    let hours = 168;
    let n_chp = rng.gen_range(2..=5);
    let n_fleet = rng.gen_range(1..=2);
    let mean_temp = rng.gen_range(-5.0..16.0);
    let swing = rng.gen_range(1.0..6.0);
    let phase = rng.gen_range(0.0..TAU);
    let ambient: Vec<f64> = (0..hours)
        .map(|h| {
            let d = (h % 24) as f64 / 24.0 * TAU;
            mean_temp + swing * (d + phase).sin() + rng.gen_range(-1.0..1.0)
        })
        .collect();
    let load_base = rng.gen_range(200.0..900.0);
    let load_slope = rng.gen_range(10.0..60.0);
    let heat_load: Vec<f64> = ambient
        .iter()
        .map(|&t| (load_base + load_slope * (17.0 - t)).max(50.0))
        .collect();
    let price_mean = rng.gen_range(20.0..70.0);
    let price_amp = rng.gen_range(0.0..25.0);
    let price_phase = rng.gen_range(0.0..TAU);
    let elec_price: Vec<f64> = (0..hours)
        .map(|h| {
            let d = (h % 24) as f64 / 24.0 * TAU;
            (price_mean + price_amp * (d + price_phase).sin() + rng.gen_range(-5.0..5.0)).max(0.0)
        })
        .collect();
    let peak = heat_load.iter().copied().fold(0.0, f64::max);
    let chps = (0..n_chp)
        .map(|i| {
            let cap = rng.gen_range(0.2..0.8) * peak;
            chp(
                &format!("chp{i}"),
                rng.gen_range(2.0..3.2),
                rng.gen_range(0.9..1.3),
                cap,
                rng.gen_range(3.0..70.0),
            )
        })
        .collect();
    let fleets = (0..n_fleet)
        .map(|k| {
            let mw = rng.gen_range(30.0..0.8 * peak);
            let mut f = ExcessHeatFleet::supermarket(format!("fleet{k}"), (mw * 1000.0 / 30.0).round() as u64);
            f.t_fridge_init = rng.gen_range(4.0..5.0);
            f
        })
        .collect();
    ScenarioInputs {
        axis: TimeAxis::new(start(2020, 1, 1) + chrono::Duration::days(rng.gen_range(0..300)), hours),
        heat_load,
        elec_price,
        ambient_temp: ambient,
        penalty_unsupplied: DEFAULT_PENALTY_UNSUPPLIED,
        chps,
        fleets,
        cop: CopModel::default(),
    }
}
