//! Ingestion and representation of two-channel time-tagged photon streams.
//!
//! Streams are stored as per-channel arrival times in integer detector
//! ticks. Two interchange formats are supported:
//!
//! - **TTAG1** (binary, little-endian): magic `"TTAG"`, version `u16 = 1`,
//!   tick resolution as IEEE-754 `f64` seconds, total acquisition time as
//!   `f64` seconds (`0.0` means "not recorded"), event count `u64`, then
//!   one `{channel u8, timestamp u64}` pair per event.
//! - **CSV** (text): `channel,timestamp_ticks` rows, optional header line.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Channel label for the first detector.
pub const CHANNEL_A: u8 = 0;
/// Channel label for the second detector.
pub const CHANNEL_B: u8 = 1;

pub(crate) const TTAG1_MAGIC: [u8; 4] = *b"TTAG";
pub(crate) const TTAG1_VERSION: u16 = 1;
const TTAG1_HEADER_LEN: usize = 4 + 2 + 8 + 8 + 8;
const TTAG1_EVENT_LEN: usize = 1 + 8;

/// Timestamps above this bound would overflow signed delay arithmetic.
const MAX_TICK: u64 = 1 << 62;

#[derive(Debug, Error)]
pub enum TimetagError {
    #[error("malformed header: {0}")]
    Format(String),
    #[error("truncated event record at byte offset {offset}")]
    Truncated { offset: usize },
    #[error("unknown channel id {channel} at byte offset {offset}")]
    UnknownChannel { channel: u8, offset: usize },
    #[error("line {line}: {message}")]
    ParseLine { line: usize, message: String },
    #[error("line {line}: negative timestamp {value}")]
    NegativeTimestamp { line: usize, value: i64 },
    #[error("channel {channel} timestamps are not sorted")]
    Unsorted { channel: u8 },
    #[error("tick resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("timestamp {timestamp} exceeds the supported tick range")]
    TickOverflow { timestamp: u64 },
    #[error("channels carry different tick resolutions ({0} s vs {1} s)")]
    ResolutionMismatch(f64, f64),
    #[error("total time {total_time} s is shorter than the last event at {last_event} s")]
    TotalTimeTooShort { total_time: f64, last_event: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Non-fatal conditions observed while importing a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportWarning {
    /// Events arrived out of order and were sorted.
    UnsortedEvents { channel: u8 },
    /// The file contained no events.
    EmptyRecord,
    /// The first line did not parse as an event and was skipped as a header.
    SkippedHeaderLine,
}

impl fmt::Display for ImportWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImportWarning::UnsortedEvents { channel } => {
                write!(
                    f,
                    "channel {channel} events were out of order and have been sorted"
                )
            }
            ImportWarning::EmptyRecord => write!(f, "record contains no events"),
            ImportWarning::SkippedHeaderLine => write!(f, "skipped non-event header line"),
        }
    }
}

/// Sorted arrival times for one detector channel, in integer ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonTimeSeries {
    channel_id: u8,
    tick_resolution: f64,
    timestamps: Vec<u64>,
}

impl PhotonTimeSeries {
    /// Builds a series from already-sorted timestamps.
    ///
    /// Duplicate timestamps are allowed: two photons may share a tick.
    pub fn new(
        channel_id: u8,
        tick_resolution: f64,
        timestamps: Vec<u64>,
    ) -> Result<Self, TimetagError> {
        if !(tick_resolution > 0.0) || !tick_resolution.is_finite() {
            return Err(TimetagError::BadResolution(tick_resolution));
        }
        if let Some(&t) = timestamps.iter().find(|&&t| t >= MAX_TICK) {
            return Err(TimetagError::TickOverflow { timestamp: t });
        }
        if timestamps.windows(2).any(|w| w[0] > w[1]) {
            return Err(TimetagError::Unsorted {
                channel: channel_id,
            });
        }
        Ok(Self {
            channel_id,
            tick_resolution,
            timestamps,
        })
    }

    /// Builds a series from possibly unsorted timestamps, sorting when
    /// necessary. Returns `true` if the input was already sorted.
    pub fn from_unsorted(
        channel_id: u8,
        tick_resolution: f64,
        mut timestamps: Vec<u64>,
    ) -> Result<(Self, bool), TimetagError> {
        let sorted = timestamps.windows(2).all(|w| w[0] <= w[1]);
        if !sorted {
            timestamps.sort_unstable();
        }
        Ok((Self::new(channel_id, tick_resolution, timestamps)?, sorted))
    }

    pub fn channel_id(&self) -> u8 {
        self.channel_id
    }

    /// Seconds per tick.
    pub fn tick_resolution(&self) -> f64 {
        self.tick_resolution
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Arrival time of the last event in seconds, or 0 for an empty series.
    pub fn last_time_s(&self) -> f64 {
        self.timestamps
            .last()
            .map_or(0.0, |&t| t as f64 * self.tick_resolution)
    }
}

/// Where the acquisition time of a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TotalTimeSource {
    /// Recorded explicitly in the file header (or supplied by the caller).
    Header,
    /// Derived from the latest timestamp across both channels.
    MaxTimestamp,
}

/// A validated two-channel acquisition.
///
/// Immutable after construction and safe to share across threads. The
/// acquisition time `T` enters every correlation normalization, so both
/// the value and its provenance are kept; `max_timestamp_time_s` remains
/// available regardless of the source used.
#[derive(Debug, Clone)]
pub struct AcquisitionRecord {
    channel_a: PhotonTimeSeries,
    channel_b: PhotonTimeSeries,
    total_time: f64,
    total_time_source: TotalTimeSource,
}

/// Equality compares the physical content (channels and `T`); the
/// provenance marker for `T` is metadata and excluded so that format
/// round-trips compare equal.
impl PartialEq for AcquisitionRecord {
    fn eq(&self, other: &Self) -> bool {
        self.channel_a == other.channel_a
            && self.channel_b == other.channel_b
            && self.total_time == other.total_time
    }
}

impl AcquisitionRecord {
    /// Assembles a record from two channels.
    ///
    /// `total_time` of `None` falls back to the latest timestamp across
    /// both channels. An explicit total time must not precede the last
    /// event.
    pub fn new(
        channel_a: PhotonTimeSeries,
        channel_b: PhotonTimeSeries,
        total_time: Option<f64>,
    ) -> Result<Self, TimetagError> {
        if channel_a.tick_resolution != channel_b.tick_resolution {
            return Err(TimetagError::ResolutionMismatch(
                channel_a.tick_resolution,
                channel_b.tick_resolution,
            ));
        }
        let last_event = channel_a.last_time_s().max(channel_b.last_time_s());
        let (total_time, total_time_source) = match total_time {
            Some(t) => {
                if !t.is_finite() || t < 0.0 {
                    return Err(TimetagError::Format(format!("invalid total time {t}")));
                }
                // Tolerate the half-ulp loss of the tick->seconds product.
                if t < last_event * (1.0 - 1e-12) {
                    return Err(TimetagError::TotalTimeTooShort {
                        total_time: t,
                        last_event,
                    });
                }
                (t.max(last_event), TotalTimeSource::Header)
            }
            None => (last_event, TotalTimeSource::MaxTimestamp),
        };
        Ok(Self {
            channel_a,
            channel_b,
            total_time,
            total_time_source,
        })
    }

    pub fn channel_a(&self) -> &PhotonTimeSeries {
        &self.channel_a
    }

    pub fn channel_b(&self) -> &PhotonTimeSeries {
        &self.channel_b
    }

    pub fn counts_a(&self) -> usize {
        self.channel_a.len()
    }

    pub fn counts_b(&self) -> usize {
        self.channel_b.len()
    }

    /// Total acquisition time `T` in seconds.
    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn total_time_source(&self) -> TotalTimeSource {
        self.total_time_source
    }

    /// Latest event time across both channels, in seconds.
    pub fn max_timestamp_time_s(&self) -> f64 {
        self.channel_a
            .last_time_s()
            .max(self.channel_b.last_time_s())
    }

    pub fn tick_resolution(&self) -> f64 {
        self.channel_a.tick_resolution
    }

    /// Mean count rate of channel A over `T`, counts/s.
    pub fn rate_a(&self) -> f64 {
        if self.total_time > 0.0 {
            self.counts_a() as f64 / self.total_time
        } else {
            0.0
        }
    }

    /// Mean count rate of channel B over `T`, counts/s.
    pub fn rate_b(&self) -> f64 {
        if self.total_time > 0.0 {
            self.counts_b() as f64 / self.total_time
        } else {
            0.0
        }
    }
}

/// An imported record together with any warnings raised on the way in.
#[derive(Debug)]
pub struct Imported {
    pub record: AcquisitionRecord,
    pub warnings: Vec<ImportWarning>,
}

fn assemble(
    tick_resolution: f64,
    total_time: Option<f64>,
    ticks_a: Vec<u64>,
    ticks_b: Vec<u64>,
) -> Result<Imported, TimetagError> {
    let mut warnings = Vec::new();
    let empty = ticks_a.is_empty() && ticks_b.is_empty();
    let (series_a, sorted_a) =
        PhotonTimeSeries::from_unsorted(CHANNEL_A, tick_resolution, ticks_a)?;
    let (series_b, sorted_b) =
        PhotonTimeSeries::from_unsorted(CHANNEL_B, tick_resolution, ticks_b)?;
    if !sorted_a {
        warnings.push(ImportWarning::UnsortedEvents { channel: CHANNEL_A });
    }
    if !sorted_b {
        warnings.push(ImportWarning::UnsortedEvents { channel: CHANNEL_B });
    }
    if empty {
        warnings.push(ImportWarning::EmptyRecord);
    }
    let record = AcquisitionRecord::new(series_a, series_b, total_time)?;
    Ok(Imported { record, warnings })
}

/// Imports a TTAG1 binary file.
///
/// Out-of-order events are sorted with a warning. A header total time of
/// exactly `0.0` is treated as "not recorded" and falls back to the latest
/// timestamp.
pub fn import_binary(path: impl AsRef<Path>) -> Result<Imported, TimetagError> {
    let bytes = fs::read(path)?;
    if bytes.len() < TTAG1_HEADER_LEN {
        return Err(TimetagError::Format(
            "file shorter than TTAG1 header".into(),
        ));
    }
    if bytes[0..4] != TTAG1_MAGIC {
        return Err(TimetagError::Format("bad magic, expected \"TTAG\"".into()));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != TTAG1_VERSION {
        return Err(TimetagError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let tick_resolution = f64::from_le_bytes(bytes[6..14].try_into().unwrap());
    if !(tick_resolution > 0.0) || !tick_resolution.is_finite() {
        return Err(TimetagError::BadResolution(tick_resolution));
    }
    let total_time = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    if !total_time.is_finite() || total_time < 0.0 {
        return Err(TimetagError::Format(format!(
            "invalid total time {total_time}"
        )));
    }
    let count = u64::from_le_bytes(bytes[22..30].try_into().unwrap()) as usize;

    let body = &bytes[TTAG1_HEADER_LEN..];
    if body.len() < count * TTAG1_EVENT_LEN {
        let offset = TTAG1_HEADER_LEN + (body.len() / TTAG1_EVENT_LEN) * TTAG1_EVENT_LEN;
        return Err(TimetagError::Truncated { offset });
    }

    let mut ticks_a = Vec::new();
    let mut ticks_b = Vec::new();
    for i in 0..count {
        let offset = TTAG1_HEADER_LEN + i * TTAG1_EVENT_LEN;
        let channel = bytes[offset];
        let t = u64::from_le_bytes(bytes[offset + 1..offset + 9].try_into().unwrap());
        match channel {
            CHANNEL_A => ticks_a.push(t),
            CHANNEL_B => ticks_b.push(t),
            other => {
                return Err(TimetagError::UnknownChannel {
                    channel: other,
                    offset,
                })
            }
        }
    }

    let total_time = if total_time > 0.0 {
        Some(total_time)
    } else {
        None
    };
    assemble(tick_resolution, total_time, ticks_a, ticks_b)
}

/// Writes a record as a TTAG1 binary file.
///
/// Events are written channel A first, then channel B, each in time order.
/// The header total time carries the record's `T` bit-exactly.
pub fn export_binary(
    record: &AcquisitionRecord,
    path: impl AsRef<Path>,
) -> Result<(), TimetagError> {
    let n = record.counts_a() + record.counts_b();
    let mut bytes = Vec::with_capacity(TTAG1_HEADER_LEN + n * TTAG1_EVENT_LEN);
    bytes.extend_from_slice(&TTAG1_MAGIC);
    bytes.extend_from_slice(&TTAG1_VERSION.to_le_bytes());
    bytes.extend_from_slice(&record.tick_resolution().to_le_bytes());
    bytes.extend_from_slice(&record.total_time().to_le_bytes());
    bytes.extend_from_slice(&(n as u64).to_le_bytes());
    for (channel, series) in [
        (CHANNEL_A, record.channel_a()),
        (CHANNEL_B, record.channel_b()),
    ] {
        for &t in series.timestamps() {
            bytes.push(channel);
            bytes.extend_from_slice(&t.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Imports a `channel,timestamp_ticks` CSV file.
///
/// A first line that does not parse as an event is skipped as a header.
/// The acquisition time is taken from the latest timestamp; supply the
/// tick resolution explicitly since the format does not carry it.
pub fn import_csv(path: impl AsRef<Path>, tick_resolution: f64) -> Result<Imported, TimetagError> {
    if !(tick_resolution > 0.0) || !tick_resolution.is_finite() {
        return Err(TimetagError::BadResolution(tick_resolution));
    }
    let text = fs::read_to_string(path)?;
    let mut ticks_a = Vec::new();
    let mut ticks_b = Vec::new();
    let mut warnings = Vec::new();
    let mut saw_data_line = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match parse_csv_event(line, line_no) {
            Ok((channel, t)) => {
                saw_data_line = true;
                match channel {
                    CHANNEL_A => ticks_a.push(t),
                    CHANNEL_B => ticks_b.push(t),
                    other => {
                        return Err(TimetagError::ParseLine {
                            line: line_no,
                            message: format!("unknown channel id {other}"),
                        })
                    }
                }
            }
            Err(e @ TimetagError::NegativeTimestamp { .. }) => return Err(e),
            Err(e) => {
                // The first non-event line is tolerated as a column header.
                if line_no == 1 && !saw_data_line {
                    warnings.push(ImportWarning::SkippedHeaderLine);
                } else {
                    return Err(e);
                }
            }
        }
    }

    let mut imported = assemble(tick_resolution, None, ticks_a, ticks_b)?;
    warnings.append(&mut imported.warnings);
    imported.warnings = warnings;
    Ok(imported)
}

fn parse_csv_event(line: &str, line_no: usize) -> Result<(u8, u64), TimetagError> {
    let mut fields = line.split(',');
    let channel_field = fields.next().unwrap_or("").trim();
    let time_field = fields.next().unwrap_or("").trim();
    if fields.next().is_some() {
        return Err(TimetagError::ParseLine {
            line: line_no,
            message: "expected exactly two columns".into(),
        });
    }
    let channel: u8 = channel_field.parse().map_err(|_| TimetagError::ParseLine {
        line: line_no,
        message: format!("channel `{channel_field}` is not an integer"),
    })?;
    let t: u64 = match time_field.parse() {
        Ok(t) => t,
        Err(_) => match time_field.parse::<i64>() {
            Ok(v) if v < 0 => {
                return Err(TimetagError::NegativeTimestamp {
                    line: line_no,
                    value: v,
                })
            }
            _ => {
                return Err(TimetagError::ParseLine {
                    line: line_no,
                    message: format!("timestamp `{time_field}` is not an integer"),
                })
            }
        },
    };
    Ok((channel, t))
}

/// Writes a record as CSV with a `channel,timestamp_ticks` header line.
pub fn export_csv(record: &AcquisitionRecord, path: impl AsRef<Path>) -> Result<(), TimetagError> {
    let mut out = Vec::new();
    writeln!(out, "channel,timestamp_ticks")?;
    for (channel, series) in [
        (CHANNEL_A, record.channel_a()),
        (CHANNEL_B, record.channel_b()),
    ] {
        for &t in series.timestamps() {
            writeln!(out, "{channel},{t}")?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}
