//! LP fragments for CHP plants and excess-heat fleets.
//!
//! Variables are expressed in scaled units so that identical per-unit
//! problems produce bitwise identical programs: CHP heat is in units of a
//! base power (MW), and a fleet's variables are either per-unit kW or the
//! same base power, depending on the [`FleetScale`] used.

use thiserror::Error;

use crate::domain::{ChpParams, ExcessHeatFleet, KW_PER_MW};
use crate::lp::{Bound, LinearProgram, LpSolution, VarId};
use crate::pricing::chp_heat_cap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("fleet `{fleet}`: COP {cop} at block hour {hour} does not exceed 1")]
    CopTooLow { fleet: String, hour: usize, cop: f64 },
    #[error("fleet `{fleet}`: expected {expected} COP values, got {got}")]
    CopLength { fleet: String, expected: usize, got: usize },
    #[error("fleet `{fleet}` has no units")]
    EmptyFleet { fleet: String },
}

/// Power-of-two base no larger than `mw` (1 MW when `mw` is not positive).
///
/// Doubling `mw` doubles the base exactly, which keeps scaled programs
/// identical under a uniform rescaling of the system.
pub fn base_power(mw: f64) -> f64 {
    if !(mw.is_finite() && mw >= f64::MIN_POSITIVE) {
        return 1.0;
    }
    let exp = ((mw.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    2f64.powi(exp)
}

pub struct ChpBlock {
    pub heat: Vec<VarId>,
    /// Heat cap in MW.
    pub cap_mw: f64,
    pub base_mw: f64,
}

impl ChpBlock {
    pub fn heat_mw(&self, sol: &LpSolution) -> Vec<f64> {
        self.heat.iter().map(|&v| sol.value(v) * self.base_mw).collect()
    }
}

/// One heat variable per hour, bounded by the plant's heat cap. The plant's
/// feasible region has no intertemporal coupling.
pub fn build_chp_block(
    lp: &mut LinearProgram,
    chp: &ChpParams,
    hours: usize,
    base_mw: f64,
) -> ChpBlock {
    let cap_mw = chp_heat_cap(chp);
    let upper = cap_mw / base_mw;
    let heat = (0..hours)
        .map(|t| lp.add_var(format!("chp_{}[{t}]", chp.id), 0.0, upper, 0.0))
        .collect();
    ChpBlock {
        heat,
        cap_mw,
        base_mw,
    }
}

/// Carried per-unit state of a fleet between clearing blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetState {
    pub fridge_temp: f64,
    /// Pump output in the previous hour, per unit (kW). `None` disables the
    /// ramp constraint on the first hour.
    pub last_output_kw: Option<f64>,
}

impl FleetState {
    pub fn initial(fleet: &ExcessHeatFleet, ramp_at_start: bool) -> Self {
        Self {
            fridge_temp: fleet.t_fridge_init,
            // Ramp from a cold start is measured against an idle pump.
            last_output_kw: ramp_at_start.then_some(0.0),
        }
    }
}

/// Units of a fleet's LP variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetScale {
    /// Per-unit kW represented by 1.0 of a variable.
    pub kw_per_var: f64,
    /// Aggregate MW represented by 1.0 of a variable.
    pub mw_per_var: f64,
}

impl FleetScale {
    /// Variables are per-unit kW.
    pub fn per_unit(fleet: &ExcessHeatFleet) -> Self {
        Self {
            kw_per_var: 1.0,
            mw_per_var: fleet.unit_count as f64 / KW_PER_MW,
        }
    }

    /// Variables are aggregate output in units of `base_mw`.
    pub fn system(fleet: &ExcessHeatFleet, base_mw: f64) -> Self {
        Self {
            kw_per_var: base_mw * KW_PER_MW / fleet.unit_count as f64,
            mw_per_var: base_mw,
        }
    }
}

pub struct FleetBlock {
    pub generated: Vec<VarId>,
    pub elec: Vec<VarId>,
    /// Fridge temperature at the end of each hour.
    pub temp: Vec<VarId>,
    pub scale: FleetScale,
    pub initial: FleetState,
}

impl FleetBlock {
    pub fn generated_mw(&self, sol: &LpSolution) -> Vec<f64> {
        self.generated.iter().map(|&v| sol.value(v) * self.scale.mw_per_var).collect()
    }

    pub fn elec_mw(&self, sol: &LpSolution) -> Vec<f64> {
        self.elec.iter().map(|&v| sol.value(v) * self.scale.mw_per_var).collect()
    }

    /// Fridge temperatures including the initial state.
    pub fn fridge_temps(&self, sol: &LpSolution) -> Vec<f64> {
        std::iter::once(self.initial.fridge_temp)
            .chain(self.temp.iter().map(|&v| sol.value(v)))
            .collect()
    }

    pub fn final_state(&self, sol: &LpSolution) -> FleetState {
        FleetState {
            fridge_temp: sol.value(*self.temp.last().expect("non-empty block")),
            last_output_kw: Some(
                sol.value(*self.generated.last().expect("non-empty block")) * self.scale.kw_per_var,
            ),
        }
    }
}

/// Adds the heat-pump and fridge constraints of one fleet over `cop.len()`
/// hours:
///
/// * `G = COP L` each hour,
/// * `0 <= G <= capacity`,
/// * `T[t+1] = T[t] + A (T_in - T[t]) - B (G - L)` per unit,
/// * hard bounds on every `T[t+1]`,
/// * average bounds over consecutive `avg_window` hours starting at the
///   block start (the last window may be short),
/// * `|G[t+1] - G[t]| <= ramp`, and against the carried output at the seam.
///
/// With `terminal_cop` (the COP of the hour after the block) the block must
/// end in a state the next block can hold: the last temperature inside the
/// average band, and the last output within one ramp step of the output
/// that keeps that temperature constant at `terminal_cop`, which itself fits
/// under the pump cap.
pub fn build_excess_heat_block(
    lp: &mut LinearProgram,
    fleet: &ExcessHeatFleet,
    cop: &[f64],
    state: &FleetState,
    scale: FleetScale,
    terminal_cop: Option<f64>,
) -> Result<FleetBlock, ModelError> {
    if fleet.unit_count == 0 {
        return Err(ModelError::EmptyFleet {
            fleet: fleet.id.clone(),
        });
    }
    if let Some((hour, &c)) = cop.iter().chain(&terminal_cop).enumerate().find(|(_, &c)| !(c > 1.0)) {
        return Err(ModelError::CopTooLow {
            fleet: fleet.id.clone(),
            hour,
            cop: c,
        });
    }
    let hours = cop.len();
    let id = &fleet.id;
    let g_cap = fleet.g_max_unit / scale.kw_per_var;
    let ramp = fleet.ramp_kw() / scale.kw_per_var;
    let k = fleet.b_coef * fleet.extraction_units_per_kw() * scale.kw_per_var;
    let a = fleet.a_coef;

    let mut generated = Vec::with_capacity(hours);
    let mut elec = Vec::with_capacity(hours);
    let mut temp = Vec::with_capacity(hours);
    for t in 0..hours {
        let (mut lo, mut hi) = (0.0, g_cap);
        if t == 0 {
            if let Some(prev_kw) = state.last_output_kw {
                let prev = prev_kw / scale.kw_per_var;
                lo = (prev - ramp).max(0.0);
                hi = (prev + ramp).min(g_cap);
            }
        }
        generated.push(lp.add_var(format!("eh_{id}_g[{t}]"), lo, hi, 0.0));
        elec.push(lp.add_var(format!("eh_{id}_l[{t}]"), 0.0, f64::INFINITY, 0.0));
        temp.push(lp.add_var(
            format!("eh_{id}_temp[{}]", t + 1),
            fleet.t_fridge_min,
            fleet.t_fridge_max,
            0.0,
        ));
    }

    for t in 0..hours {
        lp.add_row(
            format!("eh_{id}_cop[{t}]"),
            vec![(generated[t], 1.0), (elec[t], -cop[t])],
            Bound::Eq(0.0),
        );
        let mut coeffs = vec![(temp[t], 1.0), (generated[t], k), (elec[t], -k)];
        let mut rhs = a * fleet.t_indoor;
        if t == 0 {
            rhs += (1.0 - a) * state.fridge_temp;
        } else {
            coeffs.push((temp[t - 1], -(1.0 - a)));
        }
        lp.add_row(format!("eh_{id}_dyn[{t}]"), coeffs, Bound::Eq(rhs));
        if t > 0 {
            lp.add_row(
                format!("eh_{id}_ramp[{t}]"),
                vec![(generated[t], 1.0), (generated[t - 1], -1.0)],
                Bound::Range(-ramp, ramp),
            );
        }
    }

    let window = fleet.avg_window.max(1);
    for (w, chunk) in temp.chunks(window).enumerate() {
        let n = chunk.len() as f64;
        lp.add_row(
            format!("eh_{id}_avg[{w}]"),
            chunk.iter().map(|&v| (v, 1.0)).collect(),
            Bound::Range(n * fleet.t_avg_min, n * fleet.t_avg_max),
        );
    }

    if let (Some(c), Some(&last_t), Some(&last_g)) = (terminal_cop, temp.last(), generated.last()) {
        // Holding output is h0 - h1 T.
        let h1 = a / (k * (1.0 - 1.0 / c));
        let h0 = h1 * fleet.t_indoor;
        let lo = fleet.t_avg_min.max((h0 - g_cap) / h1);
        let v = lp.var(last_t);
        let (t_lo, t_hi) = (v.lower.max(lo), v.upper.min(fleet.t_avg_max));
        lp.set_bounds(last_t, t_lo, t_hi);
        lp.add_row(
            format!("eh_{id}_terminal"),
            vec![(last_g, 1.0), (last_t, h1)],
            Bound::Range(h0 - ramp, h0 + ramp),
        );
    }

    Ok(FleetBlock {
        generated,
        elec,
        temp,
        scale,
        initial: *state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ThermalBasis;
    use crate::lp::LpStatus;

    fn chp(g_h_max: f64, f_max: f64) -> ChpParams {
        ChpParams {
            id: "c".into(),
            rho_e: 2.2,
            rho_h: 1.0,
            r: 0.45,
            f_max,
            g_h_max,
            alpha: 20.0,
        }
    }

    #[test]
    fn base_power_is_exact_power_of_two() {
        assert_eq!(base_power(1000.0), 512.0);
        assert_eq!(base_power(1024.0), 1024.0);
        assert_eq!(base_power(0.0), 1.0);
        assert_eq!(base_power(2.0 * 777.7), 2.0 * base_power(777.7));
    }

    #[test]
    fn chp_block_bounds() {
        let mut lp = LinearProgram::new();
        let b = build_chp_block(&mut lp, &chp(250.0, 600.0), 24, 1.0);
        assert_eq!(b.heat.len(), 24);
        assert_eq!(lp.num_rows(), 0);
        assert!(b.heat.iter().all(|&v| lp.var(v).lower == 0.0 && lp.var(v).upper == 250.0));

        let mut lp = LinearProgram::new();
        let b = build_chp_block(&mut lp, &chp(0.0, 600.0), 1, 1.0);
        assert_eq!(lp.var(b.heat[0]).upper, 0.0);

        let mut lp = LinearProgram::new();
        let b = build_chp_block(&mut lp, &chp(250.0, 400.0), 3, 1.0);
        assert!((lp.var(b.heat[2]).upper - 201.005).abs() < 1e-3);
    }

    fn one_unit() -> ExcessHeatFleet {
        let mut f = ExcessHeatFleet::supermarket("f", 1);
        f.thermal_basis = ThermalBasis::Kilowatt;
        f
    }

    #[test]
    fn recursion_example_literal_kilowatts() {
        // A=0.1, B=1/21, T=5, T_in=25, COP=3, G=21 kW -> L=7 kW.
        let f = one_unit();
        let next = f.next_fridge_temp(5.0, 21.0, 3.0);
        assert!((next - (5.0 + 2.0 - 14.0 / 21.0)).abs() < 1e-12);
        assert!((next - 6.3333).abs() < 1e-4);
    }

    #[test]
    fn idle_pump_warms_past_upper_bound_on_second_hour() {
        let f = ExcessHeatFleet::supermarket("f", 1);
        let t1 = f.next_fridge_temp(4.5, 0.0, 3.0);
        assert!((t1 - 6.55).abs() < 1e-12);
        let t2 = f.next_fridge_temp(t1, 0.0, 3.0);
        assert!(t2 > 8.0);

        // The LP therefore cannot keep the pump off for two hours.
        let mut lp = LinearProgram::new();
        let state = FleetState {
            fridge_temp: 4.5,
            last_output_kw: None,
        };
        let blk = build_excess_heat_block(&mut lp, &f, &[3.0, 3.0], &state, FleetScale::per_unit(&f), None)
            .unwrap();
        lp.set_bounds(blk.generated[0], 0.0, 0.0);
        lp.set_bounds(blk.generated[1], 0.0, 0.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn seam_ramp_intersects_capacity() {
        let f = ExcessHeatFleet::supermarket("f", 1);
        let mut lp = LinearProgram::new();
        let state = FleetState {
            fridge_temp: 4.5,
            last_output_kw: Some(30.0),
        };
        let blk = build_excess_heat_block(&mut lp, &f, &[3.0; 6], &state, FleetScale::per_unit(&f), None)
            .unwrap();
        let g0 = lp.var(blk.generated[0]);
        assert_eq!((g0.lower, g0.upper), (22.5, 30.0));
    }

    #[test]
    fn rejects_cop_at_or_below_one() {
        let f = ExcessHeatFleet::supermarket("f", 1);
        let mut lp = LinearProgram::new();
        let state = FleetState::initial(&f, false);
        let err = build_excess_heat_block(&mut lp, &f, &[3.0, 1.0], &state, FleetScale::per_unit(&f), None);
        assert!(matches!(err, Err(ModelError::CopTooLow { hour: 1, .. })));
    }

    #[test]
    fn window_rows_partition_block() {
        let f = ExcessHeatFleet::supermarket("f", 1);
        let mut lp = LinearProgram::new();
        let state = FleetState::initial(&f, false);
        build_excess_heat_block(&mut lp, &f, &[3.0; 15], &state, FleetScale::per_unit(&f), None).unwrap();
        let windows: Vec<_> = lp.rows.iter().filter(|r| r.name.contains("_avg[")).collect();
        assert_eq!(windows.len(), 3);
        assert_eq!(windows[2].coeffs.len(), 3);
        assert_eq!(windows[2].lower, 12.0);
        assert_eq!(windows[2].upper, 15.0);
    }

    #[test]
    fn energy_consistency_of_solution() {
        let f = ExcessHeatFleet::supermarket("f", 10);
        let cop: Vec<f64> = (0..24).map(|t| 2.5 + 0.05 * t as f64).collect();
        let mut lp = LinearProgram::new();
        let state = FleetState::initial(&f, false);
        let blk = build_excess_heat_block(&mut lp, &f, &cop, &state, FleetScale::per_unit(&f), None).unwrap();
        for &g in &blk.generated {
            lp.set_cost(g, 1.0);
        }
        let sol = lp.solve().unwrap();
        assert!(sol.is_optimal());
        let g = blk.generated_mw(&sol);
        let l = blk.elec_mw(&sol);
        for t in 0..24 {
            assert!((g[t] - cop[t] * l[t]).abs() < 1e-9);
            assert!(g[t] - l[t] >= -1e-12);
        }
        let temps = blk.fridge_temps(&sol);
        for t in 0..24 {
            let per_unit = g[t] * KW_PER_MW / 10.0;
            let next = f.next_fridge_temp(temps[t], per_unit, cop[t]);
            assert!((next - temps[t + 1]).abs() < 1e-6);
        }
    }
}
