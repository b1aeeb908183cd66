use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use exheat_core::clearing::ClearingOptions;
use exheat_core::domain::validate_scenario;
use exheat_core::ingest::{load_scenario, ParadigmChoice, Scenario};
use exheat_core::report::{render_charts, write_results, CapacityResults};
use exheat_core::sim::{
    compute_report, run_paradigm, run_sweep, sweep_diagnostics, ParadigmSummary, Paradigm,
    SimOptions, SweepSpec,
};

/// Default output directory when neither the command line nor the scenario
/// file names one.
const OUT_DIR_ENV: &str = "EXHEAT_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "exheat-out";

#[derive(Parser)]
#[command(name = "exheat", version, about = "Excess-heat district-heating market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParadigmArg {
    Mp,
    Ss,
    Both,
}

impl From<ParadigmArg> for ParadigmChoice {
    fn from(p: ParadigmArg) -> Self {
        match p {
            ParadigmArg::Mp => ParadigmChoice::Mp,
            ParadigmArg::Ss => ParadigmChoice::Ss,
            ParadigmArg::Both => ParadigmChoice::Both,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory [default: from the scenario, else $EXHEAT_OUT_DIR, else ./exheat-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Clear the whole horizon as a single LP.
    #[arg(long)]
    whole_horizon: bool,
    /// Multiplier on the self-scheduling price signal.
    #[arg(long)]
    price_scale: Option<f64>,
    /// Enforce the ramp limit in the first hour, starting from an idle pump.
    #[arg(long)]
    ramp_at_start: bool,
    /// Reserved; runs are deterministic and ignore it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and its series against every invariant.
    Validate {
        scenario: PathBuf,
    },
    /// Simulate one or both paradigms and write results.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        paradigm: Option<ParadigmArg>,
        /// Write every clearing LP to <out>/lp in LP format.
        #[arg(long)]
        dump_lp: bool,
    },
    /// Compare both paradigms over a range of excess-heat capacities.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated MW values or an inclusive `start:stop:step` range.
        #[arg(long)]
        capacities: Option<String>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Failure classes with their exit codes.
enum Failure {
    /// Invalid scenario or clearing failure.
    Domain(String),
    /// Unreadable input, unwritable output or bad arguments.
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

/// Expands `a,b,c` or an inclusive `start:stop:step` range.
fn parse_capacities(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| format!("`{s}` is not a non-negative capacity"))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                return Err(format!("range `{spec}` needs start <= stop and a positive step"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(format!("cannot read capacities `{spec}`")),
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| Failure::Io(e.to_string()))
}

fn out_dir(common: &Common, scenario: &Scenario) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| scenario.config.run.out.as_deref().map(|p| scenario.resolve(p)))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn sim_options(common: &Common, scenario: &Scenario, dump_dir: Option<PathBuf>) -> SimOptions {
    let run = &scenario.config.run;
    SimOptions {
        whole_horizon: common.whole_horizon || run.whole_horizon,
        price_scale: common.price_scale.unwrap_or(run.price_scale),
        ramp_at_start: common.ramp_at_start || run.ramp_at_start,
        clearing: ClearingOptions { dump_dir },
    }
}

fn print_summary(label: &str, s: &ParadigmSummary) {
    println!(
        "{label}: chp cost {:.2}, objective {:.2}, excess heat scheduled {:.3} MWh, wasted {:.3} MWh, unsupplied {:.3} MWh, mean price {:.4}",
        s.total_chp_cost, s.total_objective, s.scheduled_eh, s.wasted_eh, s.unsupplied, s.mean_price
    );
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let scenario = load(path)?;
    let violations = validate_scenario(&scenario.inputs);
    if violations.is_empty() {
        println!("OK");
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::Domain(format!("{} violation(s)", violations.len())))
}

fn cmd_run(common: &Common, paradigm: Option<ParadigmArg>, dump_lp: bool) -> Result<(), Failure> {
    let scenario = load(&common.scenario)?;
    let s = &scenario.inputs;
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        for v in &violations {
            println!("{v}");
        }
        return Err(Failure::Domain("scenario is invalid".into()));
    }
    let out = out_dir(common, &scenario);
    let dump = (dump_lp || scenario.config.run.dump_lp).then(|| out.join("lp"));
    let opts = sim_options(common, &scenario, dump);
    let choice = paradigm.map_or(scenario.config.run.paradigm, ParadigmChoice::from);
    let wants = |p| match choice {
        ParadigmChoice::Both => true,
        ParadigmChoice::Mp => p == Paradigm::Mp,
        ParadigmChoice::Ss => p == Paradigm::Ss,
    };
    let run = |p| -> Result<_, Failure> {
        if !wants(p) {
            return Ok(None);
        }
        run_paradigm(s, p, &opts)
            .map(Some)
            .map_err(|e| Failure::Domain(format!("{p}: {e}")))
    };
    let mp = run(Paradigm::Mp)?;
    let ss = run(Paradigm::Ss)?;
    let report = match (&mp, &ss) {
        (Some(a), Some(b)) => {
            Some(compute_report(a, b, s, opts.price_scale).map_err(|e| Failure::Domain(e.to_string()))?)
        }
        _ => None,
    };
    let results = [CapacityResults {
        capacity_mw: s.excess_heat_capacity(),
        scenario: s.clone(),
        price_scale: opts.price_scale,
        mp,
        ss,
        report,
    }];
    let io = |e: exheat_core::report::ReportError| Failure::Io(e.to_string());
    let mut files = write_results(&results, &out).map_err(io)?.files;
    let r = &results[0];
    if let Some(rep) = &r.report {
        files.extend(render_charts(&results, &out).map_err(io)?.files);
        print_summary("mp", &rep.mp);
        print_summary("ss", &rep.ss);
        println!(
            "suboptimality (ss - mp chp cost): {:.2}; objective gap: {:.2}",
            rep.suboptimality_total, rep.objective_gap
        );
    } else {
        for (label, res) in [("mp", &r.mp), ("ss", &r.ss)] {
            if let Some(res) = res {
                let hours = res.hours().max(1) as f64;
                println!(
                    "{label}: objective {:.2}, excess heat wasted {:.3} MWh, mean price {:.4}",
                    res.objective,
                    res.eh_wasted.iter().flatten().sum::<f64>(),
                    res.market_price.iter().sum::<f64>() / hours
                );
            }
        }
    }
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn cmd_sweep(common: &Common, capacities: Option<&str>, jobs: Option<usize>) -> Result<(), Failure> {
    let scenario = load(&common.scenario)?;
    let capacities = match capacities {
        Some(spec) => parse_capacities(spec).map_err(Failure::Io)?,
        None => scenario.config.run.capacities.clone(),
    };
    if capacities.is_empty() {
        return Err(Failure::Io("no capacities given (use --capacities or [run].capacities)".into()));
    }
    let out = out_dir(common, &scenario);
    let opts = sim_options(common, &scenario, None);
    let jobs = jobs.unwrap_or(scenario.config.run.jobs).max(1);
    let points = run_sweep(&scenario.inputs, &SweepSpec { capacities }, &opts, jobs);

    println!("{:>10} {:>8} {:>12}  {:<6} {:>16}", "capacity", "units", "mismatch_mw", "status", "suboptimality");
    let mut results = Vec::new();
    let mut failed = 0;
    for p in &points {
        match &p.outcome {
            Ok(run) => {
                println!(
                    "{:>10.1} {:>8} {:>12.6}  {:<6} {:>16.2}",
                    p.capacity_mw, p.unit_count, p.capacity_mismatch_mw, "ok", run.report.suboptimality_total
                );
                results.push(CapacityResults {
                    capacity_mw: p.capacity_mw,
                    scenario: exheat_core::sim::scenario_at_capacity(&scenario.inputs, p.capacity_mw),
                    price_scale: opts.price_scale,
                    mp: Some(run.mp.clone()),
                    ss: Some(run.ss.clone()),
                    report: Some(run.report.clone()),
                });
            }
            Err(e) => {
                failed += 1;
                println!(
                    "{:>10.1} {:>8} {:>12.6}  {:<6} {e}",
                    p.capacity_mw, p.unit_count, p.capacity_mismatch_mw, "FAILED"
                );
            }
        }
    }
    let io = |e: exheat_core::report::ReportError| Failure::Io(e.to_string());
    let mut files = write_results(&results, &out).map_err(io)?.files;
    if !results.is_empty() {
        files.extend(render_charts(&results, &out).map_err(io)?.files);
    }
    let d = sweep_diagnostics(&points);
    println!(
        "diagnostics: mp objective non-increasing {}, suboptimality non-negative {}, ss waste >= mp waste {}",
        d.mp_objective_non_increasing, d.suboptimality_nonnegative, d.ss_waste_at_least_mp
    );
    println!("wrote {} files to {}", files.len(), out.display());
    if failed > 0 {
        return Err(Failure::Domain(format!("{failed} of {} sweep points failed", points.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Run {
            common,
            paradigm,
            dump_lp,
        } => cmd_run(common, *paradigm, *dump_lp),
        Command::Sweep {
            common,
            capacities,
            jobs,
        } => cmd_sweep(common, capacities.as_deref(), *jobs),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Domain(m) | Failure::Io(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_lists_and_ranges() {
        assert_eq!(parse_capacities("0").unwrap(), vec![0.0]);
        assert_eq!(parse_capacities("0, 300,600").unwrap(), vec![0.0, 300.0, 600.0]);
        let r = parse_capacities("0:2100:300").unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!(r[7], 2100.0);
        assert_eq!(parse_capacities("0:1000:300").unwrap(), vec![0.0, 300.0, 600.0, 900.0]);
        assert!(parse_capacities("0:100:0").is_err());
        assert!(parse_capacities("-5").is_err());
        assert!(parse_capacities("1:2").is_err());
    }
}
