//! Hourly CSV series and the TOML scenario file.
//!
//! Series files have the header `timestamp,value` and one row per hour.
//! Timestamps are naive local hours; daylight-saving duplicates or skips
//! must be resolved before loading. Gaps are rejected, never interpolated.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ChpParams, CopModel, ExcessHeatFleet, ScenarioInputs, TimeAxis, DEFAULT_BLOCK_LENGTH,
    DEFAULT_PENALTY_UNSUPPLIED,
};

/// Format used when writing timestamps.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M";
const ACCEPTED_FORMATS: [&str; 4] = ["%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: missing hour(s) between {before} and {after}")]
    Gap {
        path: PathBuf,
        before: NaiveDateTime,
        after: NaiveDateTime,
    },
    #[error("{path}, line {line}: timestamp {timestamp} does not follow {previous}")]
    NonMonotonic {
        path: PathBuf,
        line: usize,
        previous: NaiveDateTime,
        timestamp: NaiveDateTime,
    },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("series do not overlap")]
    NoOverlap,
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

/// An hourly series as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    /// Where the series came from, for error messages.
    pub source: PathBuf,
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
}

impl RawSeries {
    /// A series of consecutive hours from `start`.
    pub fn hourly(start: NaiveDateTime, values: Vec<f64>) -> Self {
        Self {
            source: PathBuf::new(),
            timestamps: (0..values.len()).map(|h| start + Duration::hours(h as i64)).collect(),
            values,
        }
    }

    pub fn start(&self) -> Option<NaiveDateTime> {
        self.timestamps.first().copied()
    }
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    ACCEPTED_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

/// Reads a `timestamp,value` CSV and checks that the hours are consecutive.
pub fn load_series(path: &Path) -> Result<RawSeries, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_series(&text, path)
}

fn parse_series(text: &str, path: &Path) -> Result<RawSeries, IngestError> {
    let parse_err = |line: usize, message: String| IngestError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(parse_err(1, format!("expected header `timestamp,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = RawSeries {
        source: path.to_path_buf(),
        timestamps: Vec::new(),
        values: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_err(line, format!("unreadable timestamp `{}`", &record[0])))?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(parse_err(line, format!("timestamp {ts} is not on the hour")));
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("unreadable value `{}`", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("value `{}` is not finite", &record[1])));
        }
        if let Some(&prev) = out.timestamps.last() {
            if ts <= prev {
                return Err(IngestError::NonMonotonic {
                    path: path.to_path_buf(),
                    line,
                    previous: prev,
                    timestamp: ts,
                });
            }
            if ts - prev != Duration::hours(1) {
                return Err(IngestError::Gap {
                    path: path.to_path_buf(),
                    before: prev,
                    after: ts,
                });
            }
        }
        out.timestamps.push(ts);
        out.values.push(value);
    }
    if out.values.is_empty() {
        return Err(IngestError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(out)
}

/// Writes a series in the format [`load_series`] reads. Values use the
/// shortest representation that parses back to the same number.
pub fn write_series(path: &Path, series: &RawSeries) -> Result<(), IngestError> {
    let io = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(["timestamp", "value"]).map_err(|e| io(e.into()))?;
    for (ts, v) in series.timestamps.iter().zip(&series.values) {
        w.write_record([ts.format(TIMESTAMP_FORMAT).to_string(), v.to_string()])
            .map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

/// Cuts every series to the hours all of them cover. The axis uses the
/// default block length.
pub fn align(series: &[RawSeries]) -> Result<(TimeAxis, Vec<Vec<f64>>), IngestError> {
    let mut start = None::<NaiveDateTime>;
    let mut end = None::<NaiveDateTime>;
    for s in series {
        let (Some(&first), Some(&last)) = (s.timestamps.first(), s.timestamps.last()) else {
            return Err(IngestError::NoOverlap);
        };
        start = Some(start.map_or(first, |v| v.max(first)));
        end = Some(end.map_or(last, |v| v.min(last)));
    }
    let (Some(start), Some(end)) = (start, end) else {
        return Err(IngestError::NoOverlap);
    };
    if end < start {
        return Err(IngestError::NoOverlap);
    }
    let length = (end - start).num_hours() as usize + 1;
    let values = series
        .iter()
        .map(|s| {
            let offset = (start - s.timestamps[0]).num_hours() as usize;
            s.values[offset..offset + length].to_vec()
        })
        .collect();
    Ok((TimeAxis::new(start, length).with_block_length(DEFAULT_BLOCK_LENGTH), values))
}

/// Which paradigms a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParadigmChoice {
    Mp,
    Ss,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesPaths {
    pub heat_load: PathBuf,
    pub elec_price: PathBuf,
    pub ambient_temp: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub penalty_unsupplied: f64,
    pub block_length: usize,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            penalty_unsupplied: DEFAULT_PENALTY_UNSUPPLIED,
            block_length: DEFAULT_BLOCK_LENGTH,
        }
    }
}

/// Run settings; each has a command-line override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paradigm: ParadigmChoice,
    pub out: Option<PathBuf>,
    pub whole_horizon: bool,
    pub dump_lp: bool,
    pub price_scale: f64,
    pub ramp_at_start: bool,
    /// Sweep capacities in MW.
    pub capacities: Vec<f64>,
    pub jobs: usize,
    /// Accepted and ignored; runs are deterministic.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paradigm: ParadigmChoice::Both,
            out: None,
            whole_horizon: false,
            dump_lp: false,
            price_scale: 1.0,
            ramp_at_start: false,
            capacities: Vec::new(),
            jobs: 1,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub series: SeriesPaths,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub cop: CopModel,
    #[serde(default, rename = "chp")]
    pub chps: Vec<ChpParams>,
    #[serde(default, rename = "fleet")]
    pub fleets: Vec<ExcessHeatFleet>,
    #[serde(default)]
    pub run: RunConfig,
}

/// A loaded scenario file.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub config: ScenarioConfig,
    pub inputs: ScenarioInputs,
}

impl Scenario {
    /// `path` resolved against the scenario file's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        resolve(&self.path, path)
    }
}

fn resolve(scenario: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        scenario.parent().unwrap_or(Path::new("")).join(path)
    }
}

pub fn parse_config(text: &str, path: &Path) -> Result<ScenarioConfig, IngestError> {
    toml::from_str(text).map_err(|e| IngestError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a scenario file and its three series, aligned to their common
/// hours. The result is not validated.
pub fn load_scenario(path: &Path) -> Result<Scenario, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = parse_config(&text, path)?;
    let series = [
        &config.series.heat_load,
        &config.series.elec_price,
        &config.series.ambient_temp,
    ]
    .into_iter()
    .map(|p| load_series(&resolve(path, p)))
    .collect::<Result<Vec<_>, _>>()?;
    let (axis, mut values) = align(&series)?;
    let ambient_temp = values.pop().unwrap_or_default();
    let elec_price = values.pop().unwrap_or_default();
    let heat_load = values.pop().unwrap_or_default();
    let inputs = ScenarioInputs {
        axis: axis.with_block_length(config.market.block_length),
        heat_load,
        elec_price,
        ambient_temp,
        penalty_unsupplied: config.market.penalty_unsupplied,
        chps: config.chps.clone(),
        fleets: config.fleets.clone(),
        cop: config.cop,
    };
    Ok(Scenario {
        path: path.to_path_buf(),
        config,
        inputs,
    })
}

/// Writes `inputs` as `<dir>/<name>.toml` plus three series files named
/// after the scenario. Returns the scenario file path.
pub fn save_scenario(
    dir: &Path,
    name: &str,
    inputs: &ScenarioInputs,
    run: &RunConfig,
    description: Option<&str>,
) -> Result<PathBuf, IngestError> {
    fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let file = |what: &str| PathBuf::from(format!("{name}_{what}.csv"));
    let paths = SeriesPaths {
        heat_load: file("heat_load"),
        elec_price: file("elec_price"),
        ambient_temp: file("ambient_temp"),
    };
    for (p, values) in [
        (&paths.heat_load, &inputs.heat_load),
        (&paths.elec_price, &inputs.elec_price),
        (&paths.ambient_temp, &inputs.ambient_temp),
    ] {
        write_series(&dir.join(p), &RawSeries::hourly(inputs.axis.start, values.clone()))?;
    }
    let config = ScenarioConfig {
        description: description.map(str::to_owned),
        series: paths,
        market: MarketConfig {
            penalty_unsupplied: inputs.penalty_unsupplied,
            block_length: inputs.axis.block_length,
        },
        cop: inputs.cop,
        chps: inputs.chps.clone(),
        fleets: inputs.fleets.clone(),
        run: run.clone(),
    };
    let path = dir.join(format!("{name}.toml"));
    let text = toml::to_string(&config).map_err(|e| IngestError::Config {
        path: path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&path, text).map_err(|source| IngestError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
