//! Panel files.
//!
//! Forecasts, one row per member or quantile:
//! `date,location_id,lead_time_h,expert_name,kind,index,value,order`
//! where `kind` is `sample` or `quantile`, `index` numbers the members of a
//! forecast from 1, and `order` is empty for samples.
//!
//! Observations: `date,location_id,lead_time_h,observed_value`.
//!
//! Dates are ISO-8601 (`YYYY-MM-DD`) and consecutive for every location and
//! lead time. Values are written with 9 significant digits.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::stepwise_cdf::{Provenance, StepwiseCdf};

use super::panel::ExpertPanel;

pub const FORECAST_HEADER: [&str; 8] = [
    "date",
    "location_id",
    "lead_time_h",
    "expert_name",
    "kind",
    "index",
    "value",
    "order",
];
pub const OBSERVATION_HEADER: [&str; 4] = ["date", "location_id", "lead_time_h", "observed_value"];

/// `x` rounded to 9 significant digits, in its shortest decimal form.
pub fn format_value(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn write_err(e: csv::Error) -> Error {
    Error::Csv(e)
}

/// Writes the forecasts of `panels` in the forecast file format.
pub fn write_forecasts<W: Write>(panels: &[ExpertPanel], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FORECAST_HEADER).map_err(write_err)?;
    for panel in panels {
        let lead = panel.lead_time_h().to_string();
        for t in 1..=panel.n_days() {
            let date = panel.date(t).to_string();
            for (e, name) in panel.expert_names().iter().enumerate() {
                let cdf = panel.forecast(e, t);
                match cdf.provenance() {
                    Provenance::RandomSample { .. } => {
                        for (i, x) in cdf.members().iter().enumerate() {
                            let index = (i + 1).to_string();
                            let value = format_value(*x);
                            w.write_record([
                                date.as_str(),
                                panel.location_id(),
                                &lead,
                                name,
                                "sample",
                                &index,
                                &value,
                                "",
                            ])
                            .map_err(write_err)?;
                        }
                    }
                    Provenance::QuantileSet { orders } => {
                        for (i, (x, o)) in cdf.locations().iter().zip(orders.iter()).enumerate() {
                            let index = (i + 1).to_string();
                            let value = format_value(*x);
                            let order = format_value(*o);
                            w.write_record([
                                date.as_str(),
                                panel.location_id(),
                                &lead,
                                name,
                                "quantile",
                                &index,
                                &value,
                                &order,
                            ])
                            .map_err(write_err)?;
                        }
                    }
                    Provenance::Mixture => {
                        return Err(Error::InvalidParameter(format!(
                            "expert {name:?} holds an aggregated CDF, which has no file representation"
                        )))
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the observations of `panels` in the observation file format.
pub fn write_observations<W: Write>(panels: &[ExpertPanel], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OBSERVATION_HEADER).map_err(write_err)?;
    for panel in panels {
        let lead = panel.lead_time_h().to_string();
        for obs in panel.observations() {
            w.write_record([
                panel.date(obs.t).to_string().as_str(),
                panel.location_id(),
                &lead,
                &format_value(obs.value),
            ])
            .map_err(write_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_panels_csv(panels: &[ExpertPanel], forecasts: &Path, observations: &Path) -> Result<()> {
    write_forecasts(panels, BufWriter::new(File::create(forecasts)?))?;
    write_observations(panels, BufWriter::new(File::create(observations)?))?;
    Ok(())
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord, required: &[&str], source: &str) -> Result<Self> {
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        if let Some(missing) = required.iter().find(|c| !index.contains_key(**c)) {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                message: format!("missing column {missing:?}"),
            });
        }
        Ok(Self { index })
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index.get(name).and_then(|&i| record.get(i)).map(str::trim)
    }
}

struct Cursor<'a> {
    source: &'a str,
    line: u64,
}

impl Cursor<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn field<'r>(&self, cols: &Columns, record: &'r csv::StringRecord, name: &str) -> Result<&'r str> {
        match cols.get(record, name) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(self.error(format!("empty {name}"))),
        }
    }

    fn date(&self, s: &str) -> Result<NaiveDate> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| self.error(format!("invalid date {s:?}: {e}")))
    }

    fn float(&self, s: &str, what: &str) -> Result<f64> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(format!("invalid {what} {s:?}"))),
        }
    }

    fn int<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse::<T>().map_err(|_| self.error(format!("invalid {what} {s:?}")))
    }
}

type Key = (String, u32);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Sample,
    Quantile,
}

struct ForecastRows {
    kind: Kind,
    // date -> index -> (value, order)
    days: BTreeMap<NaiveDate, BTreeMap<u32, (f64, Option<f64>)>>,
}

fn read_csv<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads panels from a forecast stream and an observation stream. `sources`
/// name the streams in error messages. Panels come out in order of first
/// appearance in the observations, experts in order of first appearance in the
/// forecasts.
pub fn read_panels<F: Read, O: Read>(forecasts: F, observations: O, sources: (&str, &str)) -> Result<Vec<ExpertPanel>> {
    let (fsrc, osrc) = sources;

    let mut obs_reader = read_csv(observations);
    let cols = Columns::new(&obs_reader.headers()?.clone(), &OBSERVATION_HEADER, osrc)?;
    let mut obs_keys: Vec<Key> = Vec::new();
    let mut obs: HashMap<Key, BTreeMap<NaiveDate, f64>> = HashMap::new();
    for record in obs_reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: osrc.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let cur = Cursor {
            source: osrc,
            line: record_line(&record),
        };
        let date = cur.date(cur.field(&cols, &record, "date")?)?;
        let location = cur.field(&cols, &record, "location_id")?.to_string();
        let lead: u32 = cur.int(cur.field(&cols, &record, "lead_time_h")?, "lead time")?;
        let value = cur.float(cur.field(&cols, &record, "observed_value")?, "observed value")?;
        let key = (location, lead);
        let series = obs.entry(key.clone()).or_insert_with(|| {
            obs_keys.push(key.clone());
            BTreeMap::new()
        });
        if series.insert(date, value).is_some() {
            return Err(cur.error(format!("duplicate observation for {} lead {} on {date}", key.0, key.1)));
        }
    }
    if obs_keys.is_empty() {
        return Err(Error::Parse {
            path: osrc.to_string(),
            line: 1,
            message: "no observations".into(),
        });
    }

    let mut fc_reader = read_csv(forecasts);
    let required = &FORECAST_HEADER[..7];
    let cols = Columns::new(&fc_reader.headers()?.clone(), required, fsrc)?;
    let mut experts: HashMap<Key, Vec<(String, ForecastRows)>> = HashMap::new();
    for record in fc_reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: fsrc.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let cur = Cursor {
            source: fsrc,
            line: record_line(&record),
        };
        let date = cur.date(cur.field(&cols, &record, "date")?)?;
        let location = cur.field(&cols, &record, "location_id")?.to_string();
        let lead: u32 = cur.int(cur.field(&cols, &record, "lead_time_h")?, "lead time")?;
        let name = cur.field(&cols, &record, "expert_name")?.to_string();
        let kind = match cur.field(&cols, &record, "kind")? {
            "sample" => Kind::Sample,
            "quantile" => Kind::Quantile,
            other => return Err(cur.error(format!("unknown kind {other:?}"))),
        };
        let index: u32 = cur.int(cur.field(&cols, &record, "index")?, "index")?;
        let value = cur.float(cur.field(&cols, &record, "value")?, "value")?;
        let order = match (kind, cols.get(&record, "order").filter(|s| !s.is_empty())) {
            (Kind::Quantile, Some(s)) => Some(cur.float(s, "order")?),
            (Kind::Quantile, None) => return Err(cur.error("quantile row without order")),
            (Kind::Sample, _) => None,
        };
        let panel_experts = experts.entry((location.clone(), lead)).or_default();
        let slot = match panel_experts.iter().position(|(n, _)| *n == name) {
            Some(i) => i,
            None => {
                panel_experts.push((
                    name.clone(),
                    ForecastRows {
                        kind,
                        days: BTreeMap::new(),
                    },
                ));
                panel_experts.len() - 1
            }
        };
        let rows = &mut panel_experts[slot].1;
        if rows.kind != kind {
            return Err(cur.error(format!("expert {name:?} mixes sample and quantile rows")));
        }
        if rows.days.entry(date).or_default().insert(index, (value, order)).is_some() {
            return Err(cur.error(format!(
                "duplicate row for expert {name:?}, member {index}, {date} at {location} lead {lead}"
            )));
        }
    }

    let mut panels = Vec::with_capacity(obs_keys.len());
    for key in obs_keys {
        let series = &obs[&key];
        let dates: Vec<NaiveDate> = series.keys().copied().collect();
        for pair in dates.windows(2) {
            if pair[1] != pair[0].succ_opt().expect("date in range") {
                return Err(Error::IncompletePanel(format!(
                    "observations for {} lead {} jump from {} to {}",
                    key.0, key.1, pair[0], pair[1]
                )));
            }
        }
        let Some(panel_experts) = experts.remove(&key) else {
            return Err(Error::IncompletePanel(format!("no forecasts for {} lead {}", key.0, key.1)));
        };
        let mut names = Vec::with_capacity(panel_experts.len());
        let mut forecasts = Vec::with_capacity(panel_experts.len());
        for (name, rows) in panel_experts {
            if let Some(extra) = rows.days.keys().find(|d| !series.contains_key(d)) {
                return Err(Error::IncompletePanel(format!(
                    "expert {name:?} has a forecast for {extra} at {} lead {} without observation",
                    key.0, key.1
                )));
            }
            let mut cdfs = Vec::with_capacity(dates.len());
            let mut shared: Option<Arc<[f64]>> = None;
            for date in &dates {
                let Some(members) = rows.days.get(date) else {
                    return Err(Error::IncompletePanel(format!(
                        "expert {name:?} has no forecast for {date} at {} lead {}",
                        key.0, key.1
                    )));
                };
                let values: Vec<f64> = members.values().map(|(v, _)| *v).collect();
                let context = |e: Error| {
                    Error::Parse {
                        path: fsrc.to_string(),
                        line: 0,
                        message: format!("expert {name:?} on {date} at {} lead {}: {e}", key.0, key.1),
                    }
                };
                let cdf = match rows.kind {
                    Kind::Sample => StepwiseCdf::from_sample(&values).map_err(context)?,
                    Kind::Quantile => {
                        let orders: Vec<f64> = members.values().map(|(_, o)| o.expect("quantile order")).collect();
                        let arc = match &shared {
                            Some(a) if a[..] == orders[..] => a.clone(),
                            _ => {
                                let a: Arc<[f64]> = orders.into();
                                shared = Some(a.clone());
                                a
                            }
                        };
                        StepwiseCdf::from_quantiles_shared(&values, arc).map_err(context)?
                    }
                };
                cdfs.push(cdf);
            }
            names.push(name);
            forecasts.push(cdfs);
        }
        let values: Vec<f64> = series.values().copied().collect();
        panels.push(ExpertPanel::new(key.0, key.1, dates[0], names, forecasts, &values)?);
    }
    if let Some((location, lead)) = experts.keys().min() {
        return Err(Error::IncompletePanel(format!(
            "forecasts for {location} lead {lead} have no observations"
        )));
    }
    Ok(panels)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Every panel of a forecast file and an observation file.
pub fn load_panels_csv(forecasts: &Path, observations: &Path) -> Result<Vec<ExpertPanel>> {
    let fsrc = forecasts.display().to_string();
    let osrc = observations.display().to_string();
    read_panels(
        std::io::BufReader::new(open(forecasts)?),
        std::io::BufReader::new(open(observations)?),
        (&fsrc, &osrc),
    )
}

/// The single panel of a pair of files holding one location and lead time.
pub fn load_panel_csv(forecasts: &Path, observations: &Path) -> Result<ExpertPanel> {
    let mut panels = load_panels_csv(forecasts, observations)?;
    if panels.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "expected one location and lead time, found {}",
            panels.len()
        )));
    }
    Ok(panels.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(2.5), "2.5");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333");
        assert_eq!(format_value(123456789.123), "123456789");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(1.5e-7), "0.00000015");
    }

    #[test]
    fn duplicate_rows_report_line() {
        let fc = "date,location_id,lead_time_h,expert_name,kind,index,value,order\n\
                  2020-01-01,a,24,x,sample,1,1.0,\n\
                  2020-01-01,a,24,x,sample,1,2.0,\n";
        let obs = "date,location_id,lead_time_h,observed_value\n2020-01-01,a,24,1.5\n";
        match read_panels(fc.as_bytes(), obs.as_bytes(), ("f.csv", "o.csv")) {
            Err(Error::Parse { line, path, .. }) => assert_eq!((line, path.as_str()), (3, "f.csv")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let fc = "date,location_id,lead_time_h,expert_name,kind,index,value,order\n\
                  2020-01-01,a,24,x,sample,1,abc,\n";
        let obs = "date,location_id,lead_time_h,observed_value\n2020-01-01,a,24,1.5\n";
        let err = read_panels(fc.as_bytes(), obs.as_bytes(), ("f.csv", "o.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
