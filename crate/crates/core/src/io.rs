//! CSV and JSON-lines serialization.
//!
//! Every output starts with a metadata line carrying the tool version, the
//! record schema and the fully resolved experiment config, so any output can
//! be replayed. In CSV it is a `# `-prefixed comment line followed by the
//! column header; in JSON lines it is a leading `{"meta": ...}` object.
//! CSV floats use 17 significant digits, which round-trips every `f64`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::acceptance::CriterionResult;
use crate::asymptotics::{AsymptoticsRecord, RegimeLabel};
use crate::clt::{CltRow, CltSummary};
use crate::moments::MomentRow;
use crate::montecarlo::{EstimateRow, Estimator};
use crate::sim::{TrajectoryRow, UrnRow};
use crate::{Error, Result};

pub const TOOL: &str = "urnsync";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::Parse(format!(
                "unknown format {other:?}, expected csv or jsonl"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub schema: String,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(schema: &str, config: serde_json::Value) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: ARTIFACT_VERSION.to_string(),
            schema: schema.to_string(),
            config,
        }
    }
}

/// A single CSV cell.
pub trait CsvValue: Sized {
    fn render(&self) -> String;
    fn parse(s: &str) -> Result<Self>;
}

impl CsvValue for f64 {
    fn render(&self) -> String {
        if self.is_finite() {
            format!("{self:.16e}")
        } else {
            // "NaN", "inf", "-inf"
            self.to_string()
        }
    }
    fn parse(s: &str) -> Result<Self> {
        s.parse()
            .map_err(|_| Error::Parse(format!("bad float {s:?}")))
    }
}

impl CsvValue for Option<f64> {
    fn render(&self) -> String {
        self.map(|x| x.render()).unwrap_or_default()
    }
    fn parse(s: &str) -> Result<Self> {
        if s.is_empty() {
            Ok(None)
        } else {
            f64::parse(s).map(Some)
        }
    }
}

macro_rules! display_value {
    ($($ty:ty),*) => {$(
        impl CsvValue for $ty {
            fn render(&self) -> String {
                self.to_string()
            }
            fn parse(s: &str) -> Result<Self> {
                s.parse().map_err(|_| Error::Parse(format!("bad {} {s:?}", stringify!($ty))))
            }
        }
    )*};
}

display_value!(u64, usize, u32, bool, String);

impl CsvValue for Estimator {
    fn render(&self) -> String {
        self.as_str().to_string()
    }
    fn parse(s: &str) -> Result<Self> {
        Estimator::parse(s).ok_or_else(|| Error::Parse(format!("unknown estimator {s:?}")))
    }
}

impl CsvValue for RegimeLabel {
    fn render(&self) -> String {
        self.as_str().to_string()
    }
    fn parse(s: &str) -> Result<Self> {
        match s {
            "subcritical" => Ok(RegimeLabel::Subcritical),
            "critical" => Ok(RegimeLabel::Critical),
            "supercritical" => Ok(RegimeLabel::Supercritical),
            _ => Err(Error::Parse(format!("unknown regime {s:?}"))),
        }
    }
}

/// A row type with a fixed CSV column layout.
pub trait Record: Sized + Serialize + DeserializeOwned {
    const SCHEMA: &'static str;
    fn columns() -> Vec<&'static str>;
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> Result<Self>;
}

fn cell<'a>(fields: &[&'a str], k: usize) -> Result<&'a str> {
    fields
        .get(k)
        .copied()
        .ok_or_else(|| Error::Parse(format!("missing column {k}")))
}

macro_rules! flat_record {
    ($ty:ty, $schema:literal, [$($field:ident),* $(,)?]) => {
        impl Record for $ty {
            const SCHEMA: &'static str = $schema;
            fn columns() -> Vec<&'static str> {
                vec![$(stringify!($field)),*]
            }
            fn to_fields(&self) -> Vec<String> {
                vec![$(CsvValue::render(&self.$field)),*]
            }
            #[allow(unused_assignments)]
            fn from_fields(fields: &[&str]) -> Result<Self> {
                let mut k = 0usize;
                Ok(Self {
                    $($field: {
                        let v = CsvValue::parse(cell(fields, k)?)?;
                        k += 1;
                        v
                    },)*
                })
            }
        }
    };
}

flat_record!(
    TrajectoryRow,
    "trajectory",
    [t, z_bar, z_min, z_max, spread]
);
flat_record!(UrnRow, "urns", [t, urn, z]);
flat_record!(MomentRow, "moments", [t, v_exact, x_exact, x_inf]);
flat_record!(
    EstimateRow,
    "ensemble",
    [t, estimator, value, stderr, n_samples]
);
flat_record!(CriterionResult, "verify", [id, name, passed, detail]);
flat_record!(
    CltRow,
    "clt",
    [
        t,
        mean,
        variance,
        variance_se,
        skewness,
        excess_kurtosis,
        ref_finite_n,
        ref_limit,
        var_ok,
        skew_ok,
        kurt_ok
    ]
);
flat_record!(
    CltSummary,
    "clt_summary",
    [
        n_urns,
        replicas,
        horizon,
        alpha,
        max_abs_skewness,
        max_abs_excess_kurtosis,
        variance_pass_fraction,
        max_abs_increment_corr,
        corr_band,
        corr_violations,
        corr_pairs,
        variance_ok,
        gaussian,
        increments_ok,
        passed
    ]
);

impl Record for AsymptoticsRecord {
    const SCHEMA: &'static str = "asymptotics";
    fn columns() -> Vec<&'static str> {
        vec![
            "alpha",
            "regime",
            "slope",
            "r_squared",
            "window_lo",
            "window_hi",
            "ratio_flag",
        ]
    }
    fn to_fields(&self) -> Vec<String> {
        vec![
            self.alpha.render(),
            self.regime.render(),
            self.slope.render(),
            self.r_squared.render(),
            self.window.0.render(),
            self.window.1.render(),
            self.ratio_flag.clone(),
        ]
    }
    fn from_fields(f: &[&str]) -> Result<Self> {
        Ok(Self {
            alpha: CsvValue::parse(cell(f, 0)?)?,
            regime: CsvValue::parse(cell(f, 1)?)?,
            slope: CsvValue::parse(cell(f, 2)?)?,
            r_squared: CsvValue::parse(cell(f, 3)?)?,
            window: (CsvValue::parse(cell(f, 4)?)?, CsvValue::parse(cell(f, 5)?)?),
            ratio_flag: cell(f, 6)?.to_string(),
        })
    }
}

pub fn write_csv<R: Record>(meta: &Metadata, records: &[R]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(b"# ");
    serde_json::to_writer(&mut out, meta)?;
    out.push(b'\n');
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        w.write_record(R::columns())?;
        for r in records {
            w.write_record(r.to_fields())?;
        }
        w.flush()?;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: Metadata,
}

pub fn write_jsonl<R: Record>(meta: &Metadata, records: &[R]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &MetaLine { meta: meta.clone() })?;
    out.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn serialize_records<R: Record>(
    meta: &Metadata,
    records: &[R],
    format: Format,
) -> Result<Vec<u8>> {
    if meta.schema != R::SCHEMA {
        return Err(Error::Parse(format!(
            "unknown schema {:?} for {} records",
            meta.schema,
            R::SCHEMA
        )));
    }
    match format {
        Format::Csv => write_csv(meta, records),
        Format::Jsonl => write_jsonl(meta, records),
    }
}

/// Read the metadata line of either format.
pub fn read_metadata(bytes: &[u8]) -> Result<(Metadata, Format)> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    let first = text
        .lines()
        .next()
        .ok_or_else(|| Error::Parse("empty output".into()))?;
    if let Some(json) = first.strip_prefix("# ") {
        Ok((serde_json::from_str(json)?, Format::Csv))
    } else {
        let line: MetaLine = serde_json::from_str(first)?;
        Ok((line.meta, Format::Jsonl))
    }
}

pub fn parse_records<R: Record>(bytes: &[u8]) -> Result<(Metadata, Vec<R>)> {
    let (meta, format) = read_metadata(bytes)?;
    if meta.schema != R::SCHEMA {
        return Err(Error::Parse(format!(
            "expected schema {:?}, found {:?}",
            R::SCHEMA,
            meta.schema
        )));
    }
    let records = match format {
        Format::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .comment(Some(b'#'))
                .from_reader(bytes);
            let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
            if header != R::columns() {
                return Err(Error::Parse(format!("unexpected columns {header:?}")));
            }
            rdr.records()
                .map(|rec| {
                    let rec = rec?;
                    let fields: Vec<&str> = rec.iter().collect();
                    R::from_fields(&fields)
                })
                .collect::<Result<Vec<R>>>()?
        }
        Format::Jsonl => std::str::from_utf8(bytes)
            .map_err(|e| Error::Parse(e.to_string()))?
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect::<Result<Vec<R>>>()?,
    };
    Ok((meta, records))
}

/// `NaN` is written as JSON `null` and read back as `NaN`.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
