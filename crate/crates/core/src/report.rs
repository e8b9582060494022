//! CSV emission for run rows, sweep aggregates and time series.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::metrics::{MetricsReport, TimeSeriesSample};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed value {value:?} in column {column}")]
    Parse { column: String, value: String },
}

pub const RUN_COLUMNS: [&str; 18] = [
    "scenario_id",
    "protocol",
    "seed",
    "nodes",
    "pause",
    "sent",
    "delivered",
    "dropped",
    "control_pkts",
    "pdr",
    "avg_delay_s",
    "throughput_pkts",
    "avg_energy_j",
    "control_overhead",
    "throughput_bps",
    "in_flight",
    "flows_admitted",
    "flows_rejected",
];

/// `%.9g`: nine significant digits, trailing zeros trimmed, exponent form
/// outside `[1e-4, 1e9)`.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub scenario_id: String,
    pub protocol: String,
    pub seed: u64,
    pub nodes: u32,
    pub pause: f64,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub control_pkts: u64,
    /// Zero when nothing was sent.
    pub pdr: f64,
    pub avg_delay_s: Option<f64>,
    pub throughput_pkts: u64,
    pub avg_energy_j: f64,
    pub control_overhead: Option<f64>,
    pub throughput_bps: f64,
    pub in_flight: u64,
    pub flows_admitted: u64,
    pub flows_rejected: u64,
}

impl RunRow {
    pub fn new(scenario_id: &str, protocol: &str, seed: u64, nodes: u32, pause: f64, r: &MetricsReport) -> Self {
        RunRow {
            scenario_id: scenario_id.to_string(),
            protocol: protocol.to_string(),
            seed,
            nodes,
            pause,
            sent: r.sent,
            delivered: r.delivered,
            dropped: r.dropped,
            control_pkts: r.control_packets,
            pdr: r.pdr_or_zero(),
            avg_delay_s: r.avg_e2e_delay_s,
            throughput_pkts: r.throughput_pkts,
            avg_energy_j: r.avg_energy_j,
            control_overhead: r.control_overhead,
            throughput_bps: r.throughput_bps,
            in_flight: r.in_flight,
            flows_admitted: r.flows_admitted,
            flows_rejected: r.flows_rejected,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.scenario_id.clone(),
            self.protocol.clone(),
            self.seed.to_string(),
            self.nodes.to_string(),
            sig9(self.pause),
            self.sent.to_string(),
            self.delivered.to_string(),
            self.dropped.to_string(),
            self.control_pkts.to_string(),
            sig9(self.pdr),
            opt(self.avg_delay_s),
            self.throughput_pkts.to_string(),
            sig9(self.avg_energy_j),
            opt(self.control_overhead),
            sig9(self.throughput_bps),
            self.in_flight.to_string(),
            self.flows_admitted.to_string(),
            self.flows_rejected.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, ReportError> {
        let get = |i: usize| rec.get(i).unwrap_or("");
        fn num<T: std::str::FromStr>(col: &str, s: &str) -> Result<T, ReportError> {
            s.parse().map_err(|_| ReportError::Parse { column: col.to_string(), value: s.to_string() })
        }
        let n = |i: usize| -> Result<u64, ReportError> { num(RUN_COLUMNS[i], get(i)) };
        let f = |i: usize| -> Result<f64, ReportError> { num(RUN_COLUMNS[i], get(i)) };
        let of = |i: usize| -> Result<Option<f64>, ReportError> {
            if get(i).is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        Ok(RunRow {
            scenario_id: get(0).to_string(),
            protocol: get(1).to_string(),
            seed: n(2)?,
            nodes: num(RUN_COLUMNS[3], get(3))?,
            pause: f(4)?,
            sent: n(5)?,
            delivered: n(6)?,
            dropped: n(7)?,
            control_pkts: n(8)?,
            pdr: f(9)?,
            avg_delay_s: of(10)?,
            throughput_pkts: n(11)?,
            avg_energy_j: f(12)?,
            control_overhead: of(13)?,
            throughput_bps: f(14)?,
            in_flight: n(15)?,
            flows_admitted: n(16)?,
            flows_rejected: n(17)?,
        })
    }
}

pub fn write_runs<W: Write>(out: W, rows: &[RunRow]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RUN_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| ReportError::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}

pub fn read_runs<R: Read>(input: R) -> Result<Vec<RunRow>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    r.records().map(|rec| RunRow::from_record(&rec?)).collect()
}

pub fn write_runs_file(path: &Path, rows: &[RunRow]) -> Result<(), ReportError> {
    let file = create(path)?;
    write_runs(std::io::BufWriter::new(file), rows)
}

fn create(path: &Path) -> Result<std::fs::File, ReportError> {
    std::fs::File::create(path).map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

pub const AGGREGATE_COLUMNS: [&str; 12] = [
    "parameter",
    "value",
    "protocol",
    "runs",
    "sent",
    "delivered",
    "dropped",
    "control_pkts",
    "pdr",
    "avg_delay_s",
    "avg_energy_j",
    "control_overhead",
];

/// Medians over seeds for one (swept value, protocol) cell group.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub parameter: String,
    pub value: f64,
    pub protocol: String,
    pub runs: usize,
    pub sent: Option<f64>,
    pub delivered: Option<f64>,
    pub dropped: Option<f64>,
    pub control_pkts: Option<f64>,
    pub pdr: Option<f64>,
    pub avg_delay_s: Option<f64>,
    pub avg_energy_j: Option<f64>,
    pub control_overhead: Option<f64>,
}

impl AggregateRow {
    pub fn from_runs(parameter: &str, value: f64, protocol: &str, runs: &[&RunRow]) -> Self {
        let med = |get: &dyn Fn(&RunRow) -> Option<f64>| {
            let mut v: Vec<f64> = runs.iter().filter_map(|r| get(r)).collect();
            median(&mut v)
        };
        AggregateRow {
            parameter: parameter.to_string(),
            value,
            protocol: protocol.to_string(),
            runs: runs.len(),
            sent: med(&|r| Some(r.sent as f64)),
            delivered: med(&|r| Some(r.delivered as f64)),
            dropped: med(&|r| Some(r.dropped as f64)),
            control_pkts: med(&|r| Some(r.control_pkts as f64)),
            pdr: med(&|r| Some(r.pdr)),
            avg_delay_s: med(&|r| r.avg_delay_s),
            avg_energy_j: med(&|r| Some(r.avg_energy_j)),
            control_overhead: med(&|r| r.control_overhead),
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.parameter.clone(),
            sig9(self.value),
            self.protocol.clone(),
            self.runs.to_string(),
            opt(self.sent),
            opt(self.delivered),
            opt(self.dropped),
            opt(self.control_pkts),
            opt(self.pdr),
            opt(self.avg_delay_s),
            opt(self.avg_energy_j),
            opt(self.control_overhead),
        ]
    }
}

pub fn write_aggregates<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(AGGREGATE_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| ReportError::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}

pub fn write_aggregates_file(path: &Path, rows: &[AggregateRow]) -> Result<(), ReportError> {
    write_aggregates(std::io::BufWriter::new(create(path)?), rows)
}

pub fn write_series_file(path: &Path, samples: &[TimeSeriesSample]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(create(path)?));
    w.write_record(["t_s", "value"])?;
    for s in samples {
        w.write_record([sig9(s.t), sig9(s.value)])?;
    }
    w.flush().map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_matches_printf_g() {
        let cases = [
            (0.9, "0.9"),
            (1.0, "1"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (2.0 / 3.0, "0.666666667"),
            (-45.5, "-45.5"),
            (999999999.5, "1e+09"),
            (0.1 + 0.2, "0.3"),
        ];
        for (v, want) in cases {
            assert_eq!(sig9(v), want, "{v}");
        }
    }

    fn row(protocol: &str, seed: u64, pdr: f64) -> RunRow {
        RunRow {
            scenario_id: "s".into(),
            protocol: protocol.into(),
            seed,
            nodes: 50,
            pause: 10.0,
            sent: 100,
            delivered: 90,
            dropped: 8,
            control_pkts: 40,
            pdr,
            avg_delay_s: Some(0.0123456789123),
            throughput_pkts: 90,
            avg_energy_j: 2.345,
            control_overhead: None,
            throughput_bps: 1234.5,
            in_flight: 2,
            flows_admitted: 3,
            flows_rejected: 0,
        }
    }

    #[test]
    fn empty_set_is_header_only() {
        let mut buf = Vec::new();
        write_runs(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), RUN_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn four_rows_and_round_trip() {
        let rows = vec![row("mcba", 1, 0.9), row("mcba", 2, 0.8), row("aodv-baseline", 1, 0.7), row("aodv-baseline", 2, 1.0)];
        let mut buf = Vec::new();
        write_runs(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        let back = read_runs(&buf[..]).unwrap();
        let mut again = Vec::new();
        write_runs(&mut again, &back).unwrap();
        assert_eq!(buf, again);
        assert_eq!(back[0].avg_delay_s, Some(0.0123456789));
        assert_eq!(back[0].control_overhead, None);
    }

    #[test]
    fn median_of_three_and_four() {
        assert_eq!(median(&mut [1.0, 0.8, 0.9]), Some(0.9));
        assert_eq!(median(&mut [1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn aggregate_medians() {
        let rows = [row("mcba", 1, 0.8), row("mcba", 2, 0.9), row("mcba", 3, 1.0)];
        let refs: Vec<&RunRow> = rows.iter().collect();
        let a = AggregateRow::from_runs("nodes", 25.0, "mcba", &refs);
        assert_eq!(a.pdr, Some(0.9));
        assert_eq!(a.runs, 3);
        assert_eq!(a.control_overhead, None);
    }
}
