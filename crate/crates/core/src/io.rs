//! On-disk formats.
//!
//! * model: JSON document with `format_version`, counts, row-major matrices;
//! * data: CSV with header `t,c0..,q0..`, categorical cells `0`/`1`,
//!   quantitative cells with 17 significant digits;
//! * trajectories: CSV `t,variable,S_bar`;
//! * events: JSON lines `{"t","variable","statistic","threshold"}`;
//! * baseline: CSV `variable,k,U`.
//!
//! Floats are written either with 17 significant digits or in shortest
//! round-trip form, so every file reads back bit-exactly.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::RankScan;
use crate::error::{Error, Result};
use crate::model::{MixedModel, ModelParams, Observation};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub n_categorical: usize,
    pub n_quantitative: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantitative_names: Option<Vec<String>>,
    pub theta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(model: &MixedModel) -> Self {
        let params = model.to_params();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            n_categorical: model.n_cat(),
            n_quantitative: model.n_quant(),
            categorical_names: params.cat_names,
            quantitative_names: params.quant_names,
            theta: params.theta,
            mu: params.mu,
            delta: params.delta,
            phi: params.phi,
        }
    }

    pub fn into_model(self) -> Result<MixedModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format_version {}",
                self.format_version
            )));
        }
        if self.theta.len() != self.n_categorical {
            return Err(Error::DimensionMismatch {
                what: "theta rows vs n_categorical".into(),
                expected: self.n_categorical,
                got: self.theta.len(),
            });
        }
        if self.mu.len() != self.n_quantitative {
            return Err(Error::DimensionMismatch {
                what: "mu length vs n_quantitative".into(),
                expected: self.n_quantitative,
                got: self.mu.len(),
            });
        }
        ModelParams {
            theta: self.theta,
            mu: self.mu,
            delta: self.delta,
            phi: self.phi,
            cat_names: self.categorical_names,
            quant_names: self.quantitative_names,
        }
        .validate()
    }
}

pub fn model_to_json(model: &MixedModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from_model(model))?)
}

pub fn model_from_json(text: &str) -> Result<MixedModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.into_model()
}

pub fn read_model(path: impl AsRef<Path>) -> Result<MixedModel> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn write_model(path: impl AsRef<Path>, model: &MixedModel) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Quantitative cell: 17 significant digits, `.` separator.
pub fn format_quant(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn data_header(n_cat: usize, n_quant: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n_cat).map(|i| format!("c{i}")));
    cols.extend((0..n_quant).map(|i| format!("q{i}")));
    cols.join(",")
}

pub fn write_data_csv<W: Write>(mut w: W, n_cat: usize, n_quant: usize, data: &[Observation]) -> Result<()> {
    writeln!(w, "{}", data_header(n_cat, n_quant))?;
    for obs in data {
        if obs.x_cat().len() != n_cat || obs.x_quant().len() != n_quant {
            return Err(Error::DimensionMismatch {
                what: format!("observation at t={}", obs.t()),
                expected: n_cat + n_quant,
                got: obs.x_cat().len() + obs.x_quant().len(),
            });
        }
        let mut line = obs.t().to_string();
        for &c in obs.x_cat() {
            line.push(',');
            line.push(if c == 1 { '1' } else { '0' });
        }
        for &x in obs.x_quant() {
            line.push(',');
            line.push_str(&format_quant(x));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Line-by-line reader of the data CSV; yields observations lazily.
pub struct DataReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    n_cat: usize,
    n_quant: usize,
    header_seen: bool,
}

impl<R: BufRead> DataReader<R> {
    pub fn new(reader: R, n_cat: usize, n_quant: usize) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            n_cat,
            n_quant,
            header_seen: false,
        }
    }

    fn parse_error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_no,
            message: message.into(),
        }
    }

    fn check_header(&self, line: &str) -> Result<()> {
        let expected = data_header(self.n_cat, self.n_quant);
        let got: Vec<&str> = line.split(',').map(str::trim).collect();
        if got.len() != 1 + self.n_cat + self.n_quant {
            return Err(Error::DimensionMismatch {
                what: format!("data header at line {}", self.line_no),
                expected: 1 + self.n_cat + self.n_quant,
                got: got.len(),
            });
        }
        if got.join(",") != expected {
            return Err(self.parse_error(format!("expected header `{expected}`, got `{line}`")));
        }
        Ok(())
    }

    fn parse_row(&self, line: &str) -> Result<Observation> {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 1 + self.n_cat + self.n_quant {
            return Err(Error::DimensionMismatch {
                what: format!("data row at line {}", self.line_no),
                expected: 1 + self.n_cat + self.n_quant,
                got: cells.len(),
            });
        }
        let t = cells[0]
            .parse::<u64>()
            .map_err(|_| self.parse_error(format!("bad time index `{}`", cells[0])))?;
        let x_cat = cells[1..=self.n_cat]
            .iter()
            .map(|c| match *c {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(self.parse_error(format!("categorical cell `{other}` is not 0 or 1"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let x_quant = cells[1 + self.n_cat..]
            .iter()
            .map(|c| match c.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.parse_error(format!("quantitative cell `{c}` is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        Observation::new(t, x_cat, x_quant).map_err(|e| self.parse_error(e.to_string()))
    }
}

impl<R: BufRead> Iterator for DataReader<R> {
    type Item = Result<Observation>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            if !self.header_seen {
                self.header_seen = true;
                if let Err(e) = self.check_header(line.trim()) {
                    return Some(Err(e));
                }
                continue;
            }
            return Some(self.parse_row(line.trim()));
        }
    }
}

pub fn read_data_csv<R: BufRead>(reader: R, n_cat: usize, n_quant: usize) -> Result<Vec<Observation>> {
    DataReader::new(reader, n_cat, n_quant).collect()
}

pub const TRAJECTORY_HEADER: &str = "t,variable,S_bar";

pub fn write_trajectory_row<W: Write + ?Sized>(w: &mut W, t: u64, variable: &str, s_bar: f64) -> Result<()> {
    writeln!(w, "{t},{variable},{s_bar}")?;
    Ok(())
}

/// One alarm as written to the events stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: u64,
    pub variable: String,
    pub statistic: f64,
    pub threshold: f64,
}

pub fn write_event<W: Write + ?Sized>(w: &mut W, event: &EventRecord) -> Result<()> {
    serde_json::to_writer(&mut *w, event)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<EventRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub const BASELINE_HEADER: &str = "variable,k,U";

pub fn write_baseline_csv<W: Write>(mut w: W, names: &[String], scans: &[RankScan]) -> Result<()> {
    writeln!(w, "{BASELINE_HEADER}")?;
    for (name, scan) in names.iter().zip(scans) {
        for (k, u) in scan.u.iter().enumerate() {
            writeln!(w, "{name},{},{u}", k + 1)?;
        }
    }
    Ok(())
}
