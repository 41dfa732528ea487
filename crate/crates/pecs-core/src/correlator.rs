//! Cross-correlation of time-tagged photon streams.
//!
//! The correlator iterates over the channel with fewer events and locates
//! matching events in the other channel by binary search over the sorted
//! stream, so the cost scales with the number of reference events times
//! the bin count rather than with the number of photon pairs. Raw pair
//! counts `M_k` are normalized bin-wise to
//!
//! ```text
//! g2_k = M_k / (I_A * I_B * w_k * T)
//! ```
//!
//! with `I_A`, `I_B` the channel rates, `w_k` the bin width and `T` the
//! acquisition time. All counting is integer-exact and independent of the
//! internal parallelism.

use rayon::prelude::*;
use thiserror::Error;

use crate::timetag::{AcquisitionRecord, CHANNEL_A, CHANNEL_B};

#[derive(Debug, Error)]
pub enum CorrelatorError {
    #[error("invalid delay axis: {0}")]
    Domain(String),
    #[error("bin narrower than one tick ({tick} s) near edge {edge} s")]
    Quantization { edge: f64, tick: f64 },
    #[error("channel {channel} has no events in the accepted intervals; rates are undefined")]
    Normalization { channel: u8 },
    #[error("zero normalization: {0}")]
    ZeroNormalization(String),
    #[error("invalid partition: {0}")]
    PartitionSpec(String),
    #[error("invalid count-rate resolution: {0}")]
    BadTimeResolution(f64),
}

/// Non-fatal conditions raised while correlating.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelatorWarning {
    /// Delay bins beyond the acquisition span were dropped.
    AxisClipped { dropped_bins: usize },
    /// The count-rate bin width exceeded the acquisition time.
    SingleBinTrace,
}

/// Delay-axis scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauScale {
    Linear,
    Logarithmic,
}

/// Delay bin edges in seconds. Bins are half-open `[edge_k, edge_k+1)`.
///
/// Logarithmic axes are built per sign: a negative log segment and a
/// positive log segment joined by linear binning where `|tau|` falls below
/// the requested resolution. Within a segment the bin widths grow
/// geometrically, starting at the resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TauAxis {
    edges: Vec<f64>,
    scale: TauScale,
}

impl TauAxis {
    /// Uniform bins of width `resolution` from `tau_min` up to `tau_max`;
    /// a trailing partial bin is clipped at `tau_max`.
    pub fn linear(tau_min: f64, tau_max: f64, resolution: f64) -> Result<Self, CorrelatorError> {
        Self::build((tau_min, tau_max), resolution, TauScale::Linear)
    }

    /// Geometrically growing bins whose smallest width is `resolution`.
    pub fn logarithmic(
        tau_min: f64,
        tau_max: f64,
        resolution: f64,
    ) -> Result<Self, CorrelatorError> {
        Self::build((tau_min, tau_max), resolution, TauScale::Logarithmic)
    }

    /// Builds a delay axis over `limits = (tau_min, tau_max)`.
    pub fn build(
        limits: (f64, f64),
        resolution: f64,
        scale: TauScale,
    ) -> Result<Self, CorrelatorError> {
        let (lo, hi) = limits;
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(CorrelatorError::Domain(format!(
                "empty delay range [{lo}, {hi})"
            )));
        }
        if !(resolution > 0.0) || resolution >= hi - lo {
            return Err(CorrelatorError::Domain(format!(
                "resolution {resolution} must be positive and smaller than the range"
            )));
        }
        let edges = match scale {
            TauScale::Linear => {
                let n = ((hi - lo) / resolution + 1e-9).floor() as usize;
                let mut edges: Vec<f64> = (0..=n).map(|k| lo + k as f64 * resolution).collect();
                if let Some(&last) = edges.last() {
                    if last < hi - 1e-9 * resolution {
                        edges.push(hi);
                    } else {
                        *edges.last_mut().unwrap() = hi;
                    }
                }
                edges
            }
            TauScale::Logarithmic => log_edges(lo, hi, resolution),
        };
        if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorrelatorError::Domain(
                "axis edges are not strictly increasing".into(),
            ));
        }
        Ok(Self { edges, scale })
    }

    /// Wraps externally supplied edges (e.g. read back from a file).
    pub fn from_edges(edges: Vec<f64>, scale: TauScale) -> Result<Self, CorrelatorError> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorrelatorError::Domain(
                "axis edges are not strictly increasing".into(),
            ));
        }
        Ok(Self { edges, scale })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn scale(&self) -> TauScale {
        self.scale
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Arithmetic midpoints of the bin edges, for both scales.
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Maps the edges onto integer tick boundaries: bin `k` holds integer
    /// delays `d` with `tick_edges[k] <= d < tick_edges[k+1]`.
    ///
    /// Boundaries resolve by ceiling with a relative tolerance of 1e-12 so
    /// that edges intended to sit on a tick do so despite float noise.
    pub(crate) fn tick_edges(&self, tick: f64) -> Result<Vec<i64>, CorrelatorError> {
        let mut out = Vec::with_capacity(self.edges.len());
        for &edge in &self.edges {
            let x = edge / tick;
            out.push((x - 1e-12 * (1.0 + x.abs())).ceil() as i64);
        }
        for (k, w) in out.windows(2).enumerate() {
            if w[0] >= w[1] {
                return Err(CorrelatorError::Quantization {
                    edge: self.edges[k],
                    tick,
                });
            }
        }
        Ok(out)
    }

    /// Drops bins lying entirely outside `[-t_max, t_max]`. Returns the
    /// clipped axis and how many bins were removed.
    fn clipped_to(&self, t_max: f64) -> Result<(Self, usize), CorrelatorError> {
        let keep: Vec<usize> = (0..self.n_bins())
            .filter(|&k| self.edges[k + 1] > -t_max && self.edges[k] < t_max)
            .collect();
        if keep.is_empty() {
            return Err(CorrelatorError::Domain(format!(
                "delay axis lies entirely outside the acquisition span +-{t_max} s"
            )));
        }
        let first = keep[0];
        let last = *keep.last().unwrap();
        let dropped = self.n_bins() - keep.len();
        let edges = self.edges[first..=last + 1].to_vec();
        Ok((
            Self {
                edges,
                scale: self.scale,
            },
            dropped,
        ))
    }
}

/// Builds `(tau_min, tau_max)` log edges per sign.
fn log_edges(lo: f64, hi: f64, resolution: f64) -> Vec<f64> {
    fn upward(from: f64, to: f64, resolution: f64) -> Vec<f64> {
        // Edges from*r^k with r chosen so the first width equals the
        // resolution; the last edge is clipped to `to`.
        let mut edges = vec![from];
        let ratio = 1.0 + resolution / from;
        let mut e = from;
        loop {
            e *= ratio;
            if e >= to * (1.0 - 1e-12) {
                break;
            }
            edges.push(e);
        }
        edges.push(to);
        edges
    }

    let mut edges: Vec<f64> = Vec::new();
    if lo < 0.0 {
        // Negative segment: mirror of an upward build over |tau|.
        let inner = (-hi).max(resolution.min(-lo));
        let pos = upward(inner, -lo, resolution);
        edges.extend(pos.iter().rev().map(|&e| -e));
        if hi <= 0.0 {
            return edges;
        }
        // Central linear bin(s) across zero.
        if hi <= resolution {
            edges.push(hi);
            return edges;
        }
        edges.push(resolution);
        edges.extend_from_slice(&upward(resolution, hi, resolution)[1..]);
        edges
    } else {
        let start = if lo < resolution {
            // Leading linear bin [lo, resolution).
            if hi <= resolution {
                return vec![lo, hi];
            }
            edges.push(lo);
            resolution
        } else {
            lo
        };
        edges.extend_from_slice(&upward(start, hi, resolution));
        edges
    }
}

/// Accepted time intervals for a blinking partition, seconds, half-open
/// `[start, end)`, sorted and disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    intervals: Vec<(f64, f64)>,
}

impl Partition {
    pub fn from_intervals(mut intervals: Vec<(f64, f64)>) -> Result<Self, CorrelatorError> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(lo, hi) in &intervals {
            if !(lo >= 0.0) || !(hi > lo) {
                return Err(CorrelatorError::PartitionSpec(format!(
                    "bad interval [{lo}, {hi})"
                )));
            }
        }
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(CorrelatorError::PartitionSpec("intervals overlap".into()));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total accepted duration in seconds.
    pub fn duration(&self) -> f64 {
        self.intervals.iter().map(|&(lo, hi)| hi - lo).sum()
    }

    /// Whether time `t` (seconds) falls inside an accepted interval.
    pub fn contains(&self, t: f64) -> bool {
        let idx = self.intervals.partition_point(|&(lo, _)| lo <= t);
        idx > 0 && t < self.intervals[idx - 1].1
    }
}

/// Partition specification: explicit time flags, or count-rate ranges to
/// be resolved against an intensity trace.
#[derive(Debug, Clone)]
pub enum PartitionSpec {
    TimeIntervals(Vec<(f64, f64)>),
    RateRanges { ranges: Vec<RateRange>, t_res: f64 },
}

impl PartitionSpec {
    /// Resolves the specification into concrete accepted-interval sets,
    /// one per requested range (a single set for explicit intervals).
    pub fn resolve(&self, record: &AcquisitionRecord) -> Result<Vec<Partition>, CorrelatorError> {
        match self {
            PartitionSpec::TimeIntervals(intervals) => {
                let t = record.total_time();
                if intervals
                    .iter()
                    .any(|&(lo, hi)| lo < 0.0 || hi > t * (1.0 + 1e-12))
                {
                    return Err(CorrelatorError::PartitionSpec(format!(
                        "intervals must lie within [0, {t}]"
                    )));
                }
                Ok(vec![Partition::from_intervals(intervals.clone())?])
            }
            PartitionSpec::RateRanges { ranges, t_res } => {
                let (trace, _) = intensity_trace(record, *t_res)?;
                partition_by_threshold(&trace, ranges)
            }
        }
    }
}

/// Half-open count-rate range `[low, high)` in counts/second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRange {
    pub low: f64,
    pub high: f64,
}

impl RateRange {
    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    fn contains(&self, rate: f64) -> bool {
        rate >= self.low && rate < self.high
    }
}

/// Per-channel count rates on a uniform time grid.
#[derive(Debug, Clone)]
pub struct IntensityTrace {
    t_res: f64,
    total_time: f64,
    rates_a: Vec<f64>,
    rates_b: Vec<f64>,
}

impl IntensityTrace {
    pub fn t_res(&self) -> f64 {
        self.t_res
    }

    pub fn n_bins(&self) -> usize {
        self.rates_a.len()
    }

    /// Bin edges in seconds; the final edge is clipped to the acquisition time.
    pub fn time_edges(&self) -> Vec<f64> {
        (0..=self.n_bins())
            .map(|k| (k as f64 * self.t_res).min(self.total_time))
            .collect()
    }

    pub fn rates_a(&self) -> &[f64] {
        &self.rates_a
    }

    pub fn rates_b(&self) -> &[f64] {
        &self.rates_b
    }

    /// Summed-channel rate per bin.
    pub fn rates_sum(&self) -> Vec<f64> {
        self.rates_a
            .iter()
            .zip(&self.rates_b)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Normalized correlation data for one delay axis.
#[derive(Debug, Clone)]
pub struct CorrelationResult {
    axis: TauAxis,
    raw_counts: Vec<u64>,
    g2: Vec<f64>,
    err_plus: Vec<f64>,
    err_minus: Vec<f64>,
    rate_a: f64,
    rate_b: f64,
    acquisition_time: f64,
    warnings: Vec<CorrelatorWarning>,
}

impl CorrelationResult {
    pub fn axis(&self) -> &TauAxis {
        &self.axis
    }

    pub fn tau_centers(&self) -> Vec<f64> {
        self.axis.centers()
    }

    pub fn raw_counts(&self) -> &[u64] {
        &self.raw_counts
    }

    pub fn g2(&self) -> &[f64] {
        &self.g2
    }

    pub fn err_plus(&self) -> &[f64] {
        &self.err_plus
    }

    pub fn err_minus(&self) -> &[f64] {
        &self.err_minus
    }

    /// Channel A rate `I_A` over the accepted time, counts/s.
    pub fn rate_a(&self) -> f64 {
        self.rate_a
    }

    /// Channel B rate `I_B` over the accepted time, counts/s.
    pub fn rate_b(&self) -> f64 {
        self.rate_b
    }

    /// Accepted acquisition time `T` in seconds.
    pub fn acquisition_time(&self) -> f64 {
        self.acquisition_time
    }

    pub fn warnings(&self) -> &[CorrelatorWarning] {
        &self.warnings
    }

    /// Replaces g² values and uncertainties, e.g. after background
    /// correction. Lengths must match the axis.
    pub(crate) fn with_values(
        &self,
        g2: Vec<f64>,
        err_plus: Vec<f64>,
        err_minus: Vec<f64>,
    ) -> Self {
        assert_eq!(g2.len(), self.g2.len());
        Self {
            g2,
            err_plus,
            err_minus,
            ..self.clone()
        }
    }

    /// Builds a result directly from arrays, used when reading curves back
    /// from files. Raw counts and rates may be absent (zeroed).
    pub fn from_parts(
        axis: TauAxis,
        raw_counts: Vec<u64>,
        g2: Vec<f64>,
        err_plus: Vec<f64>,
        err_minus: Vec<f64>,
        rate_a: f64,
        rate_b: f64,
        acquisition_time: f64,
    ) -> Result<Self, CorrelatorError> {
        let n = axis.n_bins();
        if [raw_counts.len(), g2.len(), err_plus.len(), err_minus.len()] != [n, n, n, n] {
            return Err(CorrelatorError::Domain(
                "column lengths do not match the axis".into(),
            ));
        }
        Ok(Self {
            axis,
            raw_counts,
            g2,
            err_plus,
            err_minus,
            rate_a,
            rate_b,
            acquisition_time,
            warnings: Vec::new(),
        })
    }
}

/// Asymmetric Poisson uncertainties for a bin holding `m` counts:
/// `(sqrt(M + 1/4) +- 1/2) / (I_A * I_B * w * T)`.
///
/// The symmetric shot-noise value `sqrt(M)/(I_A I_B w T)` is available from
/// [`symmetric_error`]; it approximates `(err_plus + err_minus)/2` but is
/// not identical to it.
pub fn poisson_errors(
    m: u64,
    rate_a: f64,
    rate_b: f64,
    bin_width: f64,
    total_time: f64,
) -> Result<(f64, f64), CorrelatorError> {
    let norm = rate_a * rate_b * bin_width * total_time;
    if !(norm > 0.0) {
        return Err(CorrelatorError::ZeroNormalization(format!(
            "I_A*I_B*w*T = {norm} must be positive"
        )));
    }
    let root = (m as f64 + 0.25).sqrt();
    Ok(((root + 0.5) / norm, (root - 0.5) / norm))
}

/// Symmetric shot-noise uncertainty `sqrt(M) / (I_A * I_B * w * T)`.
pub fn symmetric_error(
    m: u64,
    rate_a: f64,
    rate_b: f64,
    bin_width: f64,
    total_time: f64,
) -> Result<f64, CorrelatorError> {
    let norm = rate_a * rate_b * bin_width * total_time;
    if !(norm > 0.0) {
        return Err(CorrelatorError::ZeroNormalization(format!(
            "I_A*I_B*w*T = {norm} must be positive"
        )));
    }
    Ok((m as f64).sqrt() / norm)
}

/// The channel whose events act as the zero-delay reference `t0`: the one
/// with fewer events (ties go to channel A). Partition membership is
/// decided by `t0` only, for the full record and for every partition.
pub fn reference_channel(record: &AcquisitionRecord) -> u8 {
    if record.counts_b() < record.counts_a() {
        CHANNEL_B
    } else {
        CHANNEL_A
    }
}

struct Prepared {
    tick_edges: Vec<i64>,
    axis: TauAxis,
    warnings: Vec<CorrelatorWarning>,
    reference_is_a: bool,
}

fn prepare(record: &AcquisitionRecord, axis: &TauAxis) -> Result<Prepared, CorrelatorError> {
    let t_max = record.total_time().max(record.max_timestamp_time_s());
    let (axis, dropped) = axis.clipped_to(t_max.max(f64::MIN_POSITIVE))?;
    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(CorrelatorWarning::AxisClipped {
            dropped_bins: dropped,
        });
    }
    let tick_edges = axis.tick_edges(record.tick_resolution())?;
    let reference_is_a = reference_channel(record) == CHANNEL_A;
    Ok(Prepared {
        tick_edges,
        axis,
        warnings,
        reference_is_a,
    })
}

/// Counts cross-channel pairs into delay bins using binary searches over
/// the sorted streams.
///
/// `reference` supplies the zero-delay events `t0`; delays are always
/// `t_B - t_A` regardless of which channel is iterated. The reference is
/// sharded across threads and the per-shard integer histograms summed, so
/// the result is identical for any thread count.
fn count_pairs(
    reference: &[i64],
    other: &[i64],
    tick_edges: &[i64],
    reference_is_a: bool,
    tick: f64,
    accept: Option<&Partition>,
) -> Vec<u64> {
    let n_bins = tick_edges.len() - 1;
    let span = (tick_edges[n_bins] - tick_edges[0]) as f64;
    let total = other.last().copied().unwrap_or(0) - other.first().copied().unwrap_or(0);
    let occupancy = other.len() as f64 * span / (total.max(1) as f64);
    // Few events expected per window: walking them beats per-edge searches.
    let events_mode = occupancy * ((n_bins + 1) as f64).log2()
        < n_bins as f64 * ((other.len() + 1) as f64).log2();

    let chunk = (reference.len() / (8 * rayon::current_num_threads().max(1))).max(1024);
    reference
        .par_chunks(chunk)
        .map(|t0s| {
            let mut hist = vec![0u64; n_bins];
            for &t0 in t0s {
                if let Some(p) = accept {
                    if !p.contains(t0 as f64 * tick) {
                        continue;
                    }
                }
                if events_mode {
                    bin_window_events(t0, other, tick_edges, reference_is_a, &mut hist);
                } else {
                    bin_by_edges(t0, other, tick_edges, reference_is_a, &mut hist);
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut acc, h| {
                for (a, b) in acc.iter_mut().zip(h) {
                    *a += b;
                }
                acc
            },
        )
}

/// One binary search per bin edge; counts are position differences.
fn bin_by_edges(
    t0: i64,
    other: &[i64],
    tick_edges: &[i64],
    reference_is_a: bool,
    hist: &mut [u64],
) {
    if reference_is_a {
        // d = x - t0 in [E_k, E_k+1)  <=>  x in [t0+E_k, t0+E_k+1)
        let mut prev = other.partition_point(|&x| x < t0 + tick_edges[0]);
        for (k, &e) in tick_edges[1..].iter().enumerate() {
            let pos = other.partition_point(|&x| x < t0 + e);
            hist[k] += (pos - prev) as u64;
            prev = pos;
        }
    } else {
        // d = t0 - x in [E_k, E_k+1)  <=>  x in [t0-E_k+1+1, t0-E_k+1)
        let mut prev = other.partition_point(|&x| x < t0 - tick_edges[0] + 1);
        for (k, &e) in tick_edges[1..].iter().enumerate() {
            let pos = other.partition_point(|&x| x < t0 - e + 1);
            hist[k] += (prev - pos) as u64;
            prev = pos;
        }
    }
}

/// Two searches for the window, then per-event bin lookup.
fn bin_window_events(
    t0: i64,
    other: &[i64],
    tick_edges: &[i64],
    reference_is_a: bool,
    hist: &mut [u64],
) {
    let last = tick_edges[tick_edges.len() - 1];
    let (lo, hi) = if reference_is_a {
        (t0 + tick_edges[0], t0 + last)
    } else {
        (t0 - last + 1, t0 - tick_edges[0] + 1)
    };
    let start = other.partition_point(|&x| x < lo);
    let stop = other.partition_point(|&x| x < hi);
    for &x in &other[start..stop] {
        let d = if reference_is_a { x - t0 } else { t0 - x };
        let bin = tick_edges.partition_point(|&e| e <= d) - 1;
        hist[bin] += 1;
    }
}

fn accepted_counts(series: &[i64], tick: f64, accept: &Partition) -> usize {
    accept
        .intervals()
        .iter()
        .map(|&(lo, hi)| {
            let start = series.partition_point(|&t| (t as f64 * tick) < lo);
            let stop = series.partition_point(|&t| (t as f64 * tick) < hi);
            stop - start
        })
        .sum()
}

/// Computes the normalized cross-correlation of a record over a delay axis.
///
/// When a partition is supplied, only pairs whose reference event `t0`
/// falls inside the accepted intervals contribute, and `I_A`, `I_B`, `T`
/// are recomputed over the accepted intervals alone.
pub fn cross_correlate(
    record: &AcquisitionRecord,
    axis: &TauAxis,
    partition: Option<&Partition>,
) -> Result<CorrelationResult, CorrelatorError> {
    let prepared = prepare(record, axis)?;
    let tick = record.tick_resolution();

    let ticks_a: Vec<i64> = record
        .channel_a()
        .timestamps()
        .iter()
        .map(|&t| t as i64)
        .collect();
    let ticks_b: Vec<i64> = record
        .channel_b()
        .timestamps()
        .iter()
        .map(|&t| t as i64)
        .collect();

    let (t_acc, n_a, n_b) = match partition {
        Some(p) => (
            p.duration(),
            accepted_counts(&ticks_a, tick, p),
            accepted_counts(&ticks_b, tick, p),
        ),
        None => (record.total_time(), ticks_a.len(), ticks_b.len()),
    };
    if n_a == 0 || !(t_acc > 0.0) {
        return Err(CorrelatorError::Normalization { channel: CHANNEL_A });
    }
    if n_b == 0 {
        return Err(CorrelatorError::Normalization { channel: CHANNEL_B });
    }
    let rate_a = n_a as f64 / t_acc;
    let rate_b = n_b as f64 / t_acc;

    let (reference, other) = if prepared.reference_is_a {
        (&ticks_a, &ticks_b)
    } else {
        (&ticks_b, &ticks_a)
    };
    let raw_counts = count_pairs(
        reference,
        other,
        &prepared.tick_edges,
        prepared.reference_is_a,
        tick,
        partition,
    );

    let widths = prepared.axis.widths();
    let mut g2 = Vec::with_capacity(raw_counts.len());
    let mut err_plus = Vec::with_capacity(raw_counts.len());
    let mut err_minus = Vec::with_capacity(raw_counts.len());
    for (&m, &w) in raw_counts.iter().zip(&widths) {
        let norm = rate_a * rate_b * w * t_acc;
        g2.push(m as f64 / norm);
        let (ep, em) = poisson_errors(m, rate_a, rate_b, w, t_acc)?;
        err_plus.push(ep);
        err_minus.push(em);
    }

    Ok(CorrelationResult {
        axis: prepared.axis,
        raw_counts,
        g2,
        err_plus,
        err_minus,
        rate_a,
        rate_b,
        acquisition_time: t_acc,
        warnings: prepared.warnings,
    })
}

/// Enumerates every cross-channel pair and bins the delays directly.
///
/// Definitionally correct and quadratic in the record size; intended as a
/// test oracle for [`cross_correlate`] on records small enough to afford
/// it (roughly 1e5 pairs and below).
pub fn brute_force_correlate(
    record: &AcquisitionRecord,
    axis: &TauAxis,
    partition: Option<&Partition>,
) -> Result<Vec<u64>, CorrelatorError> {
    let prepared = prepare(record, axis)?;
    let tick = record.tick_resolution();
    let edges = &prepared.tick_edges;
    let d_min = edges[0];
    let d_max = edges[edges.len() - 1];

    let mut hist = vec![0u64; edges.len() - 1];
    for &a in record.channel_a().timestamps() {
        let a = a as i64;
        for &b in record.channel_b().timestamps() {
            let b = b as i64;
            let d = b - a;
            if d >= d_max {
                // Channel B is sorted, so later events only move further out.
                break;
            }
            if d < d_min {
                continue;
            }
            if let Some(p) = partition {
                let t0 = if prepared.reference_is_a { a } else { b };
                if !p.contains(t0 as f64 * tick) {
                    continue;
                }
            }
            let bin = edges.partition_point(|&e| e <= d) - 1;
            hist[bin] += 1;
        }
    }
    Ok(hist)
}

/// Per-channel count rates on a uniform grid of width `t_res` seconds.
pub fn intensity_trace(
    record: &AcquisitionRecord,
    t_res: f64,
) -> Result<(IntensityTrace, Vec<CorrelatorWarning>), CorrelatorError> {
    if !(t_res > 0.0) || !t_res.is_finite() {
        return Err(CorrelatorError::BadTimeResolution(t_res));
    }
    let total = record.total_time().max(record.max_timestamp_time_s());
    let mut warnings = Vec::new();
    let n_bins = if total <= t_res {
        warnings.push(CorrelatorWarning::SingleBinTrace);
        1
    } else {
        (total / t_res).ceil() as usize
    };

    let tick = record.tick_resolution();
    let rates_for = |ts: &[u64]| -> Vec<f64> {
        let mut rates = Vec::with_capacity(n_bins);
        let mut prev = 0usize;
        for k in 1..=n_bins {
            let bound_s = k as f64 * t_res;
            let pos = ts.partition_point(|&t| (t as f64 * tick) < bound_s);
            rates.push((pos - prev) as f64 / t_res);
            prev = pos;
        }
        // Events at exactly the final edge (t = T) belong to the last bin.
        if let Some(last) = rates.last_mut() {
            *last += (ts.len() - prev) as f64 / t_res;
        }
        rates
    };

    let trace = IntensityTrace {
        t_res,
        total_time: total,
        rates_a: rates_for(record.channel_a().timestamps()),
        rates_b: rates_for(record.channel_b().timestamps()),
    };
    Ok((trace, warnings))
}

/// Splits the acquisition into accepted-interval sets, one per count-rate
/// range, by thresholding the summed-channel rate of an intensity trace.
pub fn partition_by_threshold(
    trace: &IntensityTrace,
    ranges: &[RateRange],
) -> Result<Vec<Partition>, CorrelatorError> {
    for r in ranges {
        if !(r.low >= 0.0) || !(r.high > r.low) {
            return Err(CorrelatorError::PartitionSpec(format!(
                "bad rate range [{}, {})",
                r.low, r.high
            )));
        }
    }
    let mut sorted: Vec<&RateRange> = ranges.iter().collect();
    sorted.sort_by(|a, b| a.low.total_cmp(&b.low));
    if sorted.windows(2).any(|w| w[0].high > w[1].low) {
        return Err(CorrelatorError::PartitionSpec("rate ranges overlap".into()));
    }

    let rates = trace.rates_sum();
    let edges = trace.time_edges();
    let mut partitions = Vec::with_capacity(ranges.len());
    for range in ranges {
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for (k, &rate) in rates.iter().enumerate() {
            if range.contains(rate) {
                let (lo, hi) = (edges[k], edges[k + 1]);
                match intervals.last_mut() {
                    Some(last) if last.1 == lo => last.1 = hi,
                    _ => intervals.push((lo, hi)),
                }
            }
        }
        partitions.push(Partition::from_intervals(intervals)?);
    }
    Ok(partitions)
}
