//! Line-delimited JSON dataset files and CSV benchmark output.
//!
//! A dataset file starts with a header line
//!
//! ```text
//! {"format":"kernelcal-dataset","version":1,"family":"diag_normal","dim":1}
//! ```
//!
//! followed by one record per line:
//!
//! ```text
//! {"prediction":{"family":"diag_normal","mean":[0.5],"var":[0.01]},"target":{"reals":[0.47]}}
//! ```
//!
//! Mixture records nest component records one level deep. Blank lines are
//! ignored. Floating-point numbers are written with 17 significant digits,
//! which round-trips every `f64` exactly. See `docs/dataset-format.md`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::distributions::{Family, Prediction, Target};
use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::synthetic::BenchmarkResult;

pub const FORMAT_NAME: &str = "kernelcal-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub family: Family,
    /// Component family, for mixtures only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_family: Option<Family>,
    pub dim: usize,
}

impl Header {
    pub fn for_prediction(p: &Prediction) -> Self {
        Header {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            family: p.family(),
            component_family: matches!(p, Prediction::Mixture(_)).then(|| p.base_family()),
            dim: p.dim(),
        }
    }

    fn matches(&self, p: &Prediction) -> bool {
        *self == Header::for_prediction(p)
    }
}

/// Serialized form of a non-mixture prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentRecord {
    Categorical { probs: Vec<f64> },
    DiagNormal { mean: Vec<f64>, var: Vec<f64> },
    Laplace { loc: f64, scale: f64 },
    TruncatedCountable { probs: Vec<f64>, tail_mass: f64 },
}

/// Serialized form of a prediction. Components of a mixture cannot
/// themselves be mixtures.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PredictionRecord {
    Mixture(MixtureRecord),
    Simple(ComponentRecord),
}

impl<'de> Deserialize<'de> for PredictionRecord {
    // Dispatch on the tag so errors name the offending field rather than
    // "did not match any variant".
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(deserializer)?;
        let result = if value.get("family").and_then(|f| f.as_str()) == Some("mixture") {
            serde_json::from_value(value).map(PredictionRecord::Mixture)
        } else {
            serde_json::from_value(value).map(PredictionRecord::Simple)
        };
        result.map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureRecord {
    family: MixtureTag,
    weights: Vec<f64>,
    components: Vec<ComponentRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MixtureTag {
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub prediction: PredictionRecord,
    pub target: Target,
}

impl ComponentRecord {
    fn from_prediction(p: &Prediction) -> Result<Self> {
        Ok(match p {
            Prediction::Categorical(c) => ComponentRecord::Categorical {
                probs: c.probs().to_vec(),
            },
            Prediction::DiagNormal(n) => ComponentRecord::DiagNormal {
                mean: n.mean().to_vec(),
                var: n.var().to_vec(),
            },
            Prediction::Laplace(l) => ComponentRecord::Laplace {
                loc: l.loc(),
                scale: l.scale(),
            },
            Prediction::TruncatedCountable(t) => ComponentRecord::TruncatedCountable {
                probs: t.probs().to_vec(),
                tail_mass: t.tail_mass(),
            },
            Prediction::Mixture(_) => {
                return Err(Error::InvalidDistribution("mixtures cannot be nested".into()))
            }
        })
    }

    fn into_prediction(self) -> Result<Prediction> {
        match self {
            ComponentRecord::Categorical { probs } => Prediction::categorical(probs),
            ComponentRecord::DiagNormal { mean, var } => Prediction::diag_normal(mean, var),
            ComponentRecord::Laplace { loc, scale } => Prediction::laplace(loc, scale),
            ComponentRecord::TruncatedCountable { probs, tail_mass } => {
                Prediction::truncated_countable(probs, tail_mass)
            }
        }
    }
}

impl PredictionRecord {
    pub fn from_prediction(p: &Prediction) -> Result<Self> {
        match p {
            Prediction::Mixture(m) => Ok(PredictionRecord::Mixture(MixtureRecord {
                family: MixtureTag::Mixture,
                weights: m.weights().to_vec(),
                components: m
                    .components()
                    .iter()
                    .map(ComponentRecord::from_prediction)
                    .collect::<Result<_>>()?,
            })),
            other => Ok(PredictionRecord::Simple(ComponentRecord::from_prediction(other)?)),
        }
    }

    pub fn into_prediction(self) -> Result<Prediction> {
        match self {
            PredictionRecord::Simple(c) => c.into_prediction(),
            PredictionRecord::Mixture(m) => Prediction::mixture(
                m.weights,
                m.components
                    .into_iter()
                    .map(ComponentRecord::into_prediction)
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

/// JSON formatter writing floats as `{:.16e}`, i.e. 17 significant digits.
struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as one line of JSON with full-precision floats.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

fn parse_error(line: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

/// Attaches `line` to any error that lacks one.
fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => parse_error(line, other),
    }
}

/// Reads a dataset from any reader.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut header: Option<(Header, usize)> = None;
    let mut pairs = Vec::new();
    let mut last_line = 0;
    for (index, line) in BufReader::new(reader).lines().enumerate() {
        let number = index + 1;
        last_line = number;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => {
                let h: Header = serde_json::from_str(&line).map_err(|e| parse_error(number, format!("invalid header: {e}")))?;
                if h.format != FORMAT_NAME {
                    return Err(parse_error(number, format!("unknown format {:?}", h.format)));
                }
                if h.version != FORMAT_VERSION {
                    return Err(parse_error(number, format!("unsupported version {}", h.version)));
                }
                header = Some((h, number));
            }
            Some((h, _)) => {
                let record: Record = serde_json::from_str(&line).map_err(|e| parse_error(number, e))?;
                let p = record.prediction.into_prediction().map_err(|e| at_line(number, e))?;
                if !h.matches(&p) {
                    let found = Header::for_prediction(&p);
                    return Err(parse_error(
                        number,
                        format!(
                            "record is a {} prediction of dimension {}, header declares {} of dimension {}",
                            found.family, found.dim, h.family, h.dim
                        ),
                    ));
                }
                if !record.target.is_finite() {
                    return Err(parse_error(number, "target is not finite"));
                }
                p.check_target(&record.target).map_err(|e| at_line(number, e))?;
                pairs.push((p, record.target));
            }
        }
    }
    match header {
        None => Err(parse_error(last_line.max(1), "missing header")),
        Some(_) if pairs.is_empty() => Err(parse_error(last_line, "empty dataset")),
        Some(_) => Dataset::new(pairs),
    }
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_dataset(file)
}

/// Writes a dataset in the line-delimited format.
pub fn write_dataset<W: Write>(data: &Dataset, mut writer: W) -> Result<()> {
    writeln!(writer, "{}", to_json_line(&Header::for_prediction(data.first_prediction()))?)?;
    for (p, y) in data.pairs() {
        if !p.is_finite() || !y.is_finite() {
            return Err(Error::InvalidDistribution("cannot serialize non-finite values".into()));
        }
        let record = Record {
            prediction: PredictionRecord::from_prediction(p)?,
            target: y.clone(),
        };
        writeln!(writer, "{}", to_json_line(&record)?)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_dataset(data, std::io::BufWriter::new(file))
}

/// Column order of benchmark CSV output.
pub const BENCHMARK_COLUMNS: [&str; 7] = ["scenario", "d", "n", "method", "metric", "value", "stderr"];

fn csv_number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes one CSV row per benchmark cell. Missing standard errors are empty.
pub fn write_benchmark_csv<W: Write>(result: &BenchmarkResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(BENCHMARK_COLUMNS).map_err(io)?;
    for r in &result.rows {
        w.write_record([
            r.scenario.clone(),
            r.d.to_string(),
            r.n.to_string(),
            r.method.clone(),
            r.metric.clone(),
            csv_number(r.value),
            csv_number(r.stderr),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
