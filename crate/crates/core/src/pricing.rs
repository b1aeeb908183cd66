//! Bids, the ambient-temperature price signal and COP series.

use crate::domain::{ChpParams, CopModel};

/// Price signal coefficient (currency/MWh at 0 °C).
pub const SIGNAL_BASE: f64 = 380.0;
/// Per-degree decay factor of the price signal.
pub const SIGNAL_DECAY: f64 = 0.92;
/// Ambient temperature at and above which the signal is zero (°C).
pub const SIGNAL_CUTOFF: f64 = 17.5;

/// Heat bid of a CHP for a given electricity price forecast.
///
/// Below the threshold `alpha * rho_e` the plant bids fuel cost net of the
/// electricity it must co-produce; above it, the opportunity cost of the
/// electricity foregone. Both branches equal `alpha * rho_h` at the
/// threshold.
pub fn chp_bid(chp: &ChpParams, elec_price: f64) -> f64 {
    if elec_price <= chp.alpha * chp.rho_e {
        fuel_cost_bid(chp, elec_price)
    } else {
        opportunity_cost_bid(chp, elec_price)
    }
}

/// Bid branch used at or below the threshold.
pub fn fuel_cost_bid(chp: &ChpParams, elec_price: f64) -> f64 {
    chp.alpha * (chp.rho_e * chp.r + chp.rho_h) - elec_price * chp.r
}

/// Bid branch used above the threshold.
pub fn opportunity_cost_bid(chp: &ChpParams, elec_price: f64) -> f64 {
    elec_price * chp.rho_h / chp.rho_e
}

/// Upper bound of a CHP's heat output after projecting out electricity.
pub fn chp_heat_cap(chp: &ChpParams) -> f64 {
    chp.g_h_max.min(chp.f_max / (chp.rho_h + chp.r * chp.rho_e))
}

/// Excess-heat price signal for self-scheduling producers.
pub fn price_signal(ambient: f64) -> f64 {
    if ambient < SIGNAL_CUTOFF {
        SIGNAL_BASE * SIGNAL_DECAY.powf(ambient)
    } else {
        0.0
    }
}

pub fn price_signal_series(ambient: &[f64], scale: f64) -> Vec<f64> {
    ambient.iter().map(|&t| price_signal(t) * scale).collect()
}

pub fn cop_series(model: &CopModel, ambient: &[f64]) -> Vec<f64> {
    ambient.iter().map(|&t| model.evaluate(t)).collect()
}

/// Market bid of an excess-heat producer: zero, since any heat sold is
/// extra income on top of the cooling it has to do anyway.
pub fn eh_bid() -> f64 {
    0.0
}
