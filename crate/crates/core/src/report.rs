//! Serialisation of key-rate reports.
//!
//! CSV output has one row per grid point with every float written as
//! `{:.12e}`, so identical runs produce identical bytes. JSON output carries
//! the full reports including region summaries and fidelity tables.

use crate::error::{Error, Result};
use crate::keyrate::KeyRateReport;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Column names of the CSV output, in order.
pub const CSV_HEADER: [&str; 29] = [
    "transmitter",
    "distance_km",
    "att_db",
    "analysis",
    "R",
    "Y1L",
    "eph_U",
    "eX_U",
    "F_prime",
    "Q_key",
    "E_key",
    "p_omega",
    "p1",
    "key_weight",
    "Y_X_L",
    "Gamma_X_U",
    "overlap",
    "f_zx",
    "mu_max",
    "delta_theta_z",
    "I0",
    "I1",
    "I2",
    "omega",
    "R_raw",
    "status",
    "lp_pivots",
    "quadrature_nodes",
    "config_hash",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn row(r: &KeyRateReport) -> Vec<String> {
    let intensity = |k: usize| r.source.intensities.map(|i| i[k]);
    vec![
        r.transmitter.to_string(),
        num(r.distance_km),
        num(r.att_db),
        r.analysis.to_string(),
        num(r.r),
        num(r.y1_l),
        num(r.eph_u),
        num(r.ex_u),
        num(r.f_prime),
        num(r.q_key),
        num(r.e_key),
        num(r.p_omega),
        num(r.p1),
        num(r.key_weight),
        num(r.y_x_l),
        num(r.gamma_x_u),
        num(r.overlap),
        opt(r.f_zx),
        opt(r.source.mu_max),
        opt(r.source.delta_theta_z),
        opt(intensity(0)),
        opt(intensity(1)),
        opt(intensity(2)),
        num(r.source.omega),
        num(r.r_raw),
        r.status.to_string(),
        r.provenance.lp_pivots.to_string(),
        r.provenance.quadrature_nodes.to_string(),
        r.provenance.config_hash.clone(),
    ]
}

fn io_error(e: impl fmt::Display) -> Error {
    Error::InvalidInput(format!("failed to write report: {e}"))
}

/// Writes `reports` as CSV with a header line.
pub fn write_csv<W: std::io::Write>(reports: &[KeyRateReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER).map_err(io_error)?;
    for r in reports {
        w.write_record(row(r)).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

pub fn to_csv(reports: &[KeyRateReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    String::from_utf8(buf).map_err(io_error)
}

/// Pretty-printed JSON array of the full reports. Non-finite floats become
/// `null`.
pub fn to_json(reports: &[KeyRateReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(io_error)
}

pub fn render(reports: &[KeyRateReport], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => to_csv(reports),
        OutputFormat::Json => to_json(reports).map(|mut s| {
            s.push('\n');
            s
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::{KeyRateReport, ProtocolConfig, Transmitter};

    fn sample() -> Vec<KeyRateReport> {
        let cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
        vec![
            crate::keyrate::keyrate(&cfg, 50.0, 120.0).unwrap(),
            KeyRateReport::failed(&cfg, 60.0, 30.0, &Error::LpFailed { name: "Y".into(), status: "infeasible".into() }),
        ]
    }

    #[test]
    fn csv_has_fixed_header_and_one_row_per_report() {
        let text = to_csv(&sample()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("transmitter,distance_km,att_db,analysis,R,Y1L,eph_U,eX_U,F_prime,Q_key,E_key,p_omega,"));
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        for rec in rd.records() {
            assert_eq!(rec.unwrap().len(), CSV_HEADER.len());
        }
        assert!(lines[1].starts_with("oil,5.000000000000e1,1.200000000000e2,baseline,"));
        assert!(lines[2].contains("lp failed"));
    }

    #[test]
    fn json_parses_back() {
        let text = render(&sample(), OutputFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert_eq!(v[0]["transmitter"], "oil");
        assert!(v[1]["r_raw"].is_null());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("CSV".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!(matches!("xml".parse::<OutputFormat>(), Err(Error::Config(_))));
    }
}
