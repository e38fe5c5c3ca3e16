//! CSV ingestion of IMU logs and CSV/JSON report writers.
//!
//! Input logs use the header `t,gx,gy,gz,ax,ay,az,mx,my,mz` (columns may
//! appear in any order): time in seconds, gyroscope in rad/s, accelerometer
//! and magnetometer in any consistent units.
//!
//! Every floating-point value written by this module uses 17 significant
//! digits in scientific notation, so files are exact round trips of the
//! in-memory values and byte-identical across identical runs.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::FilterConfig;
use crate::evaluation::McSummary;
use crate::filter::ImuSample;
use crate::linalg::Vec3;
use crate::rotmath::Quaternion;
use crate::simulator::{GroundTruth, MeasurementLog};

pub const IMU_COLUMNS: [&str; 10] = ["t", "gx", "gy", "gz", "ax", "ay", "az", "mx", "my", "mz"];

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // Not valid JSON; callers never emit non-finite values intentionally.
        format!("{v}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DipSource {
    Fixed(f64),
    /// `δ = asin(mean(ŷ_m · ŷ_a))` over the bias window (at least one sample).
    Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IngestOptions {
    /// Leading samples averaged into the gyroscope bias; 0 disables.
    pub bias_window: usize,
    pub dip: DipSource,
    pub beta: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            bias_window: 0,
            dip: DipSource::Fixed(0.0),
            beta: 2.4e-3,
        }
    }
}

/// Ingested samples plus what was estimated from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub samples: Vec<ImuSample>,
    pub config: FilterConfig,
    pub gyro_bias: Vec3,
}

pub fn ingest_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    parse_imu_csv(file, opts)
}

fn column_indices(headers: &csv::StringRecord) -> Result<[usize; 10]> {
    let mut idx = [0usize; 10];
    for (slot, name) in idx.iter_mut().zip(IMU_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                reason: format!("missing column '{name}'"),
            })?;
    }
    Ok(idx)
}

/// Reads raw rows, checking timestamps and finiteness.
pub fn read_raw_imu_csv<R: Read>(reader: R) -> Result<Vec<(u64, ImuSample)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        reason: e.to_string(),
    })?;
    let idx = column_indices(headers)?;

    let mut rows = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut v = [0.0; 10];
        for (k, &col) in idx.iter().enumerate() {
            let cell = record.get(col).ok_or_else(|| Error::Parse {
                line,
                reason: format!("missing value for '{}'", IMU_COLUMNS[k]),
            })?;
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                reason: format!("'{cell}' is not a number ({})", IMU_COLUMNS[k]),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    reason: format!("non-finite value for '{}'", IMU_COLUMNS[k]),
                });
            }
            v[k] = x;
        }
        if v[0] <= last_t {
            return Err(Error::NonMonotoneTime { line });
        }
        last_t = v[0];
        rows.push((
            line,
            ImuSample {
                t: v[0],
                gyro: Vec3::new(v[1], v[2], v[3]),
                acc: Vec3::new(v[4], v[5], v[6]),
                mag: Vec3::new(v[7], v[8], v[9]),
            },
        ));
    }
    Ok(rows)
}

/// Parses a log and applies preprocessing: gyroscope bias removal, unit-norm
/// accelerometer and magnetometer vectors, and `T` as the median timestamp
/// spacing.
pub fn parse_imu_csv<R: Read>(reader: R, opts: &IngestOptions) -> Result<Ingested> {
    let rows = read_raw_imu_csv(reader)?;
    if rows.len() < 2 {
        return Err(Error::InvalidConfig(
            "at least two samples are needed to estimate the sampling time".into(),
        ));
    }
    if opts.bias_window > rows.len() {
        return Err(Error::InvalidConfig(format!(
            "bias window {} exceeds the {} available samples",
            opts.bias_window,
            rows.len()
        )));
    }

    let mut samples = Vec::with_capacity(rows.len());
    for (line, s) in rows {
        let na = s.acc.norm();
        let nm = s.mag.norm();
        if na < 1e-9 || nm < 1e-9 {
            return Err(Error::DegenerateSample { line });
        }
        samples.push(ImuSample {
            acc: s.acc.scale(1.0 / na),
            mag: s.mag.scale(1.0 / nm),
            ..s
        });
    }

    let gyro_bias = if opts.bias_window > 0 {
        let sum = samples[..opts.bias_window]
            .iter()
            .fold(Vec3::zero(), |acc, s| acc + s.gyro);
        sum.scale(1.0 / opts.bias_window as f64)
    } else {
        Vec3::zero()
    };
    for s in &mut samples {
        s.gyro = s.gyro - gyro_bias;
    }

    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    dts.sort_by(f64::total_cmp);
    let n = dts.len();
    let sample_time = if n % 2 == 1 {
        dts[n / 2]
    } else {
        0.5 * (dts[n / 2 - 1] + dts[n / 2])
    };

    let dip = match opts.dip {
        DipSource::Fixed(d) => d,
        DipSource::Estimate => {
            let w = opts.bias_window.max(1);
            let mean = samples[..w].iter().map(|s| s.mag.dot(s.acc)).sum::<f64>() / w as f64;
            mean.clamp(-1.0, 1.0).asin()
        }
    };

    Ok(Ingested {
        samples,
        config: FilterConfig::new(sample_time, opts.beta, dip)?,
        gyro_bias,
    })
}

fn write_rows<W: Write>(
    w: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record(header).map_err(io)?;
    for row in rows {
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn v3(v: Vec3) -> [String; 3] {
    v.to_array().map(fmt_f64)
}

pub fn write_imu_csv<W: Write>(w: W, samples: &[ImuSample]) -> Result<()> {
    write_rows(
        w,
        &IMU_COLUMNS,
        samples.iter().map(|s| {
            let mut row = vec![fmt_f64(s.t)];
            row.extend(v3(s.gyro));
            row.extend(v3(s.acc));
            row.extend(v3(s.mag));
            row
        }),
    )
}

pub fn write_measurement_log<W: Write>(w: W, log: &MeasurementLog) -> Result<()> {
    write_imu_csv(w, &log.samples)
}

pub fn write_ground_truth<W: Write>(w: W, truth: &GroundTruth) -> Result<()> {
    write_rows(
        w,
        &["t", "q0", "q1", "q2", "q3", "wx", "wy", "wz"],
        truth.samples.iter().map(|s| {
            let mut row = vec![fmt_f64(s.t)];
            row.extend(s.q.to_array().map(fmt_f64));
            row.extend(v3(s.omega));
            row
        }),
    )
}

/// `t,q0,q1,q2,q3` per estimate.
pub fn write_orientation_csv<W: Write>(w: W, times: &[f64], q: &[Quaternion]) -> Result<()> {
    if times.len() != q.len() {
        return Err(Error::LengthMismatch {
            estimates: q.len(),
            truth: times.len(),
        });
    }
    write_rows(
        w,
        &["t", "q0", "q1", "q2", "q3"],
        times.iter().zip(q).map(|(&t, q)| {
            let mut row = vec![fmt_f64(t)];
            row.extend(q.to_array().map(fmt_f64));
            row
        }),
    )
}

/// Plot-ready curves, one row per filter and sample.
pub fn write_convergence_csv<W: Write>(w: W, summaries: &[McSummary]) -> Result<()> {
    write_rows(
        w,
        &["filter", "index", "mean_err_deg", "lo_band", "hi_band"],
        summaries.iter().flat_map(|s| {
            (0..s.mean_angle_deg.len()).map(move |k| {
                let (lo, hi) = s.band(k);
                vec![
                    s.filter.to_string(),
                    k.to_string(),
                    fmt_f64(s.mean_angle_deg[k]),
                    fmt_f64(lo),
                    fmt_f64(hi),
                ]
            })
        }),
    )
}

/// One row of the RMSE table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub filter: String,
    pub rmse_deg: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_per_iter_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op_count: Option<u64>,
}

pub fn write_rmse_table_csv<W: Write>(w: W, rows: &[TableRow]) -> Result<()> {
    let opt = |v: Option<String>| v.unwrap_or_default();
    write_rows(
        w,
        &[
            "filter",
            "roll_deg",
            "pitch_deg",
            "yaw_deg",
            "time_per_iter_s",
            "op_count",
        ],
        rows.iter().map(|r| {
            let mut row = vec![r.filter.clone()];
            row.extend(r.rmse_deg.map(fmt_f64));
            row.push(opt(r.time_per_iter_s.map(fmt_f64)));
            row.push(opt(r.op_count.map(|c| c.to_string())));
            row
        }),
    )
}

/// Pretty-printed JSON with every float at 17 significant digits.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Default)]
struct FixedDigits<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}
