//! CSV tables, a column schema and SVG charts for run and sweep results.
//!
//! All numbers are written in fixed decimal notation with six places.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use crate::chart::{BarSeries, Body, Chart, LineSeries};
use crate::domain::{ClearingResult, ScenarioInputs};
use crate::ingest::TIMESTAMP_FORMAT;
use crate::sim::{signal, ComparisonReport, Paradigm};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("nothing to chart")]
    NoResults,
}

/// Results at one excess-heat capacity.
#[derive(Debug, Clone)]
pub struct CapacityResults {
    pub capacity_mw: f64,
    /// The scenario as simulated, with the fleet at this capacity.
    pub scenario: ScenarioInputs,
    pub price_scale: f64,
    pub mp: Option<ClearingResult>,
    pub ss: Option<ClearingResult>,
    /// Present when both paradigms ran.
    pub report: Option<ComparisonReport>,
}

impl CapacityResults {
    fn paradigm(&self, p: Paradigm) -> Option<&ClearingResult> {
        match p {
            Paradigm::Mp => self.mp.as_ref(),
            Paradigm::Ss => self.ss.as_ref(),
        }
    }
}

/// Files written, in write order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub files: Vec<PathBuf>,
}

/// Fixed six-decimal rendering; negative zero prints as zero.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Capacity as used in file names: `300` or `300p5`.
pub fn capacity_tag(mw: f64) -> String {
    if mw.fract() == 0.0 {
        format!("{mw:.0}")
    } else {
        format!("{mw}").replace('.', "p")
    }
}

fn write_file(dir: &Path, name: &str, content: &str, manifest: &mut Manifest) -> Result<(), ReportError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    manifest.files.push(path);
    Ok(())
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut line = fields.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn hourly_csv(res: &ClearingResult, s: &ScenarioInputs, paradigm: Paradigm, price_scale: f64) -> String {
    let mu = signal(s, price_scale);
    let mut header = vec![
        "timestamp".to_string(),
        "heat_load".into(),
        "chp_total".into(),
        "eh_generated".into(),
        "eh_wasted".into(),
        "eh_scheduled".into(),
        "eh_elec_load".into(),
        "unsupplied".into(),
        "market_price".into(),
        "marginal_price".into(),
        "signal_price".into(),
    ];
    header.extend(s.chps.iter().map(|c| format!("chp_{}", c.id)));
    header.extend(s.fleets.iter().map(|f| format!("fridge_temp_{}", f.id)));
    let mut out = csv_line(header);
    for t in 0..res.hours() {
        let generated: f64 = res.eh_generated.iter().map(|g| g[t]).sum();
        let wasted: f64 = res.eh_wasted.iter().map(|w| w[t]).sum();
        let mut row = vec![
            s.axis.timestamp(t).format(TIMESTAMP_FORMAT).to_string(),
            fmt6(s.heat_load[t]),
            fmt6(res.chp_heat.iter().map(|g| g[t]).sum()),
            fmt6(generated),
            fmt6(wasted),
            fmt6(generated - wasted),
            fmt6(res.eh_elec_load.iter().map(|l| l[t]).sum()),
            fmt6(res.unsupplied[t]),
            fmt6(res.market_price[t]),
            fmt6(res.marginal_price[t]),
            fmt6(if paradigm == Paradigm::Ss { mu[t] } else { 0.0 }),
        ];
        row.extend(res.chp_heat.iter().map(|g| fmt6(g[t])));
        row.extend(res.fridge_temp.iter().map(|temps| fmt6(temps[t + 1])));
        out.push_str(&csv_line(row));
    }
    out
}

const MONTHLY_COLUMNS: [&str; 15] = [
    "capacity",
    "month",
    "hours",
    "mp_cost",
    "ss_cost",
    "suboptimality",
    "mp_scheduled",
    "ss_scheduled",
    "mp_wasted",
    "ss_wasted",
    "mp_avg_price",
    "ss_avg_price",
    "mp_eh_revenue",
    "ss_eh_revenue",
    "objective_gap",
];

const SWEEP_COLUMNS: [&str; 6] = ["capacity", "mp_cost", "ss_cost", "suboptimality", "mp_waste", "ss_waste"];

fn monthly_csv(reports: &[(f64, &ComparisonReport)]) -> String {
    let mut out = csv_line(MONTHLY_COLUMNS.iter().map(|c| c.to_string()));
    for (cap, r) in reports {
        for (i, (a, b)) in r.mp.monthly.iter().zip(&r.ss.monthly).enumerate() {
            out.push_str(&csv_line([
                fmt6(*cap),
                a.month.to_string(),
                a.hours.to_string(),
                fmt6(a.chp_cost),
                fmt6(b.chp_cost),
                fmt6(r.suboptimality_monthly[i]),
                fmt6(a.scheduled_eh),
                fmt6(b.scheduled_eh),
                fmt6(a.wasted_eh),
                fmt6(b.wasted_eh),
                fmt6(a.avg_price),
                fmt6(b.avg_price),
                fmt6(a.eh_revenue),
                fmt6(b.eh_revenue),
                fmt6(b.objective - a.objective),
            ]));
        }
    }
    out
}

fn sweep_csv(reports: &[(f64, &ComparisonReport)]) -> String {
    let mut out = csv_line(SWEEP_COLUMNS.iter().map(|c| c.to_string()));
    for (cap, r) in reports {
        out.push_str(&csv_line([
            fmt6(*cap),
            fmt6(r.mp.total_chp_cost),
            fmt6(r.ss.total_chp_cost),
            fmt6(r.suboptimality_total),
            fmt6(r.mp.wasted_eh),
            fmt6(r.ss.wasted_eh),
        ]));
    }
    out
}

fn schema() -> String {
    let doc = json!({
        "number_format": "fixed decimal, 6 places",
        "timestamp_format": TIMESTAMP_FORMAT,
        "files": {
            "hourly_<paradigm>_<capacity>.csv": {
                "description": "one row per hour; paradigm is mp or ss, capacity is the excess-heat MW with '.' written as 'p'",
                "columns": {
                    "timestamp": "start of the hour",
                    "heat_load": "MW",
                    "chp_total": "total CHP heat, MW",
                    "eh_generated": "excess heat generated, MW",
                    "eh_wasted": "excess heat vented, MW",
                    "eh_scheduled": "excess heat delivered (generated minus wasted), MW",
                    "eh_elec_load": "heat-pump electricity use, MW",
                    "unsupplied": "curtailed load, MW",
                    "market_price": "dual of the hourly balance, currency/MWh",
                    "marginal_price": "bid of the most expensive scheduled unit, currency/MWh",
                    "signal_price": "price signal paid to self-scheduling producers (0 for mp), currency/MWh",
                    "chp_<id>": "heat of each CHP, MW",
                    "fridge_temp_<id>": "per-unit fridge temperature at the end of the hour, degC"
                }
            },
            "monthly_summary.csv": {
                "description": "one row per capacity and calendar month",
                "columns": {
                    "capacity": "excess-heat MW",
                    "month": "YYYY-MM",
                    "hours": "hours of the month inside the horizon",
                    "mp_cost": "sum of CHP bid times heat, mp",
                    "ss_cost": "sum of CHP bid times heat, ss",
                    "suboptimality": "ss_cost - mp_cost",
                    "mp_scheduled": "delivered excess heat, MWh",
                    "ss_scheduled": "delivered excess heat, MWh",
                    "mp_wasted": "vented excess heat, MWh",
                    "ss_wasted": "vented excess heat, MWh",
                    "mp_avg_price": "unweighted mean market price",
                    "ss_avg_price": "unweighted mean market price",
                    "mp_eh_revenue": "market price times delivered excess heat",
                    "ss_eh_revenue": "signal price times generated excess heat",
                    "objective_gap": "ss minus mp clearing objective (CHP cost plus unsupplied penalty)"
                }
            },
            "sweep_summary.csv": {
                "description": "one row per capacity, horizon totals",
                "columns": {
                    "capacity": "excess-heat MW",
                    "mp_cost": "CHP cost, mp",
                    "ss_cost": "CHP cost, ss",
                    "suboptimality": "ss_cost - mp_cost",
                    "mp_waste": "vented excess heat, MWh",
                    "ss_waste": "vented excess heat, MWh"
                }
            }
        }
    });
    let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes the CSV tables and `schema.json` into `out_dir`.
pub fn write_results(results: &[CapacityResults], out_dir: &Path) -> Result<Manifest, ReportError> {
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut manifest = Manifest::default();
    write_file(out_dir, "schema.json", &schema(), &mut manifest)?;
    for r in results {
        for p in [Paradigm::Mp, Paradigm::Ss] {
            if let Some(res) = r.paradigm(p) {
                let name = format!("hourly_{p}_{}.csv", capacity_tag(r.capacity_mw));
                write_file(out_dir, &name, &hourly_csv(res, &r.scenario, p, r.price_scale), &mut manifest)?;
            }
        }
    }
    let reports: Vec<(f64, &ComparisonReport)> =
        results.iter().filter_map(|r| r.report.as_ref().map(|x| (r.capacity_mw, x))).collect();
    if !reports.is_empty() {
        write_file(out_dir, "monthly_summary.csv", &monthly_csv(&reports), &mut manifest)?;
        write_file(out_dir, "sweep_summary.csv", &sweep_csv(&reports), &mut manifest)?;
    }
    Ok(manifest)
}

fn cap_label(mw: f64) -> String {
    format!("{} MW", capacity_tag(mw).replace('p', "."))
}

/// Renders the comparison charts for every result with both paradigms.
pub fn render_charts(results: &[CapacityResults], out_dir: &Path) -> Result<Manifest, ReportError> {
    let reports: Vec<(f64, &ComparisonReport)> =
        results.iter().filter_map(|r| r.report.as_ref().map(|x| (r.capacity_mw, x))).collect();
    if reports.is_empty() {
        return Err(ReportError::NoResults);
    }
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut manifest = Manifest::default();
    let months: Vec<String> = reports[0].1.months().iter().map(ToString::to_string).collect();
    let line = |name: &str, f: &dyn Fn(&ComparisonReport) -> f64, dashed| LineSeries {
        name: name.into(),
        points: reports.iter().map(|(c, r)| (*c, f(r))).collect(),
        dashed,
    };

    let cost = Chart {
        title: "Total CHP cost".into(),
        x_label: "excess-heat capacity (MW)".into(),
        y_label: "cost".into(),
        body: Body::Lines(vec![
            line("market participation", &|r| r.mp.total_chp_cost, false),
            line("self-scheduling", &|r| r.ss.total_chp_cost, true),
        ]),
    };
    write_file(out_dir, "cost_vs_capacity.svg", &cost.render(), &mut manifest)?;

    let sub = Chart {
        title: "Suboptimality of self-scheduling".into(),
        x_label: "excess-heat capacity (MW)".into(),
        y_label: "cost difference".into(),
        body: Body::Lines(vec![line("ss - mp", &|r| r.suboptimality_total, false)]),
    };
    write_file(out_dir, "suboptimality_vs_capacity.svg", &sub.render(), &mut manifest)?;

    let monthly = Chart {
        title: "Monthly suboptimality".into(),
        x_label: "month".into(),
        y_label: "cost difference".into(),
        body: Body::Bars {
            categories: months.clone(),
            series: reports
                .iter()
                .map(|(c, r)| BarSeries {
                    name: cap_label(*c),
                    values: r.suboptimality_monthly.clone(),
                })
                .collect(),
        },
    };
    write_file(out_dir, "monthly_suboptimality.svg", &monthly.render(), &mut manifest)?;

    for (c, r) in &reports {
        let volumes = Chart {
            title: format!("Monthly excess-heat volumes, {}", cap_label(*c)),
            x_label: "month".into(),
            y_label: "MWh".into(),
            body: Body::Bars {
                categories: months.clone(),
                series: vec![
                    BarSeries {
                        name: "mp scheduled".into(),
                        values: r.mp.monthly.iter().map(|m| m.scheduled_eh).collect(),
                    },
                    BarSeries {
                        name: "ss scheduled".into(),
                        values: r.ss.monthly.iter().map(|m| m.scheduled_eh).collect(),
                    },
                    BarSeries {
                        name: "mp wasted".into(),
                        values: r.mp.monthly.iter().map(|m| m.wasted_eh).collect(),
                    },
                    BarSeries {
                        name: "ss wasted".into(),
                        values: r.ss.monthly.iter().map(|m| m.wasted_eh).collect(),
                    },
                ],
            },
        };
        let name = format!("monthly_volumes_{}.svg", capacity_tag(*c));
        write_file(out_dir, &name, &volumes.render(), &mut manifest)?;
    }

    let prices = Chart {
        title: "Average market price per month".into(),
        x_label: "month index".into(),
        y_label: "currency/MWh".into(),
        body: Body::Lines(
            reports
                .iter()
                .flat_map(|(c, r)| {
                    let pts = |f: &dyn Fn(usize) -> f64| (0..months.len()).map(|i| ((i + 1) as f64, f(i))).collect();
                    [
                        LineSeries {
                            name: format!("mp {}", cap_label(*c)),
                            points: pts(&|i| r.mp.monthly[i].avg_price),
                            dashed: false,
                        },
                        LineSeries {
                            name: format!("ss {}", cap_label(*c)),
                            points: pts(&|i| r.ss.monthly[i].avg_price),
                            dashed: true,
                        },
                    ]
                })
                .collect(),
        ),
    };
    write_file(out_dir, "monthly_prices.svg", &prices.render(), &mut manifest)?;
    Ok(manifest)
}
