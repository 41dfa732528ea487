//! Stochastic photon-stream synthesis from a rate model.
//!
//! Samples the continuous-time Markov jump process defined by the
//! generator: exponential holding times, destinations proportional to the
//! outgoing rates. Each traversal of a transition emits a detected photon
//! with its collection probability, and detected photons split across the
//! two channels by an independent fair coin (the beamsplitter in front of
//! the detector pair). Deterministic per seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::timetag::{AcquisitionRecord, PhotonTimeSeries, CHANNEL_A, CHANNEL_B};

use super::{steady_state, DynamicsError, RateModel};

/// Guard against runs that would not fit in memory.
const MAX_EXPECTED_PHOTONS: f64 = 2.5e8;
const MAX_EXPECTED_JUMPS: f64 = 5e10;

/// Simulates a photon stream of the given duration and packs it into a
/// two-channel acquisition record at `tick_resolution` seconds per tick.
///
/// The walk starts from a steady-state draw so the stream is stationary
/// from the first event.
pub fn generate_photon_stream(
    model: &RateModel,
    duration: f64,
    tick_resolution: f64,
    seed: u64,
) -> Result<AcquisitionRecord, DynamicsError> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(DynamicsError::Config(format!(
            "duration {duration}s must be positive"
        )));
    }
    if !(tick_resolution > 0.0) || duration / tick_resolution >= (1u64 << 62) as f64 {
        return Err(DynamicsError::Config(format!(
            "tick resolution {tick_resolution}s cannot represent {duration}s"
        )));
    }
    let steady = steady_state(model)?;
    let weights = model.detection_weights();
    let expected_photons = weights.dot(&steady) * duration;
    if expected_photons > MAX_EXPECTED_PHOTONS {
        return Err(DynamicsError::Size(format!(
            "expected {expected_photons:.2e} detected photons exceeds the memory guard"
        )));
    }
    let n = model.n_levels();
    let g = model.generator();
    let expected_jumps: f64 = (0..n).map(|j| -g[(j, j)] * steady[j]).sum::<f64>() * duration;
    if expected_jumps > MAX_EXPECTED_JUMPS {
        return Err(DynamicsError::Size(format!(
            "expected {expected_jumps:.2e} state jumps exceeds the runtime guard"
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // Stationary start.
    let mut state = {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut chosen = n - 1;
        for j in 0..n {
            cumulative += steady[j];
            if u < cumulative {
                chosen = j;
                break;
            }
        }
        chosen
    };

    let capacity = (expected_photons * 0.6) as usize + 16;
    let mut ticks_a: Vec<u64> = Vec::with_capacity(capacity);
    let mut ticks_b: Vec<u64> = Vec::with_capacity(capacity);
    let collection = model.collection();
    let mut t = 0.0f64;
    loop {
        let out_rate = -g[(state, state)];
        debug_assert!(out_rate > 0.0, "irreducible models have no absorbing state");
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / out_rate;
        if t >= duration {
            break;
        }
        // Destination proportional to the outgoing rates.
        let draw: f64 = rng.random::<f64>() * out_rate;
        let mut cumulative = 0.0;
        let mut destination = usize::MAX;
        for i in 0..n {
            if i != state {
                cumulative += g[(i, state)];
                if draw < cumulative {
                    destination = i;
                    break;
                }
            }
        }
        if destination == usize::MAX {
            destination = (0..n)
                .rev()
                .find(|&i| i != state && g[(i, state)] > 0.0)
                .unwrap();
        }

        let efficiency = collection[(destination, state)];
        if efficiency > 0.0 && (efficiency >= 1.0 || rng.random::<f64>() < efficiency) {
            let tick = (t / tick_resolution) as u64;
            if rng.random::<bool>() {
                ticks_a.push(tick);
            } else {
                ticks_b.push(tick);
            }
        }
        state = destination;
    }

    let series_a = PhotonTimeSeries::new(CHANNEL_A, tick_resolution, ticks_a)
        .map_err(|e| DynamicsError::Config(e.to_string()))?;
    let series_b = PhotonTimeSeries::new(CHANNEL_B, tick_resolution, ticks_b)
        .map_err(|e| DynamicsError::Config(e.to_string()))?;
    AcquisitionRecord::new(series_a, series_b, Some(duration))
        .map_err(|e| DynamicsError::Config(e.to_string()))
}

/// Removes events arriving within `dead_time` seconds of the previous
/// accepted event on the same channel, emulating detector dead time.
pub fn apply_dead_time(
    record: &AcquisitionRecord,
    dead_time: f64,
) -> Result<AcquisitionRecord, DynamicsError> {
    if !(dead_time >= 0.0) || !dead_time.is_finite() {
        return Err(DynamicsError::Config(format!(
            "dead time {dead_time}s must be >= 0"
        )));
    }
    let tick = record.tick_resolution();
    let dead_ticks = (dead_time / tick).ceil() as u64;
    let filter = |ts: &[u64]| -> Vec<u64> {
        let mut out = Vec::with_capacity(ts.len());
        let mut last: Option<u64> = None;
        for &t in ts {
            if last.is_none_or(|l| t - l >= dead_ticks) {
                out.push(t);
                last = Some(t);
            }
        }
        out
    };
    let series_a = PhotonTimeSeries::new(CHANNEL_A, tick, filter(record.channel_a().timestamps()))
        .map_err(|e| DynamicsError::Config(e.to_string()))?;
    let series_b = PhotonTimeSeries::new(CHANNEL_B, tick, filter(record.channel_b().timestamps()))
        .map_err(|e| DynamicsError::Config(e.to_string()))?;
    AcquisitionRecord::new(series_a, series_b, Some(record.total_time()))
        .map_err(|e| DynamicsError::Config(e.to_string()))
}

/// Injects uncorrelated Poisson background at `rate_per_channel`
/// counts/s into both channels, emulating dark counts and stray light.
/// Deterministic per seed.
pub fn inject_dark_counts(
    record: &AcquisitionRecord,
    rate_per_channel: f64,
    seed: u64,
) -> Result<AcquisitionRecord, DynamicsError> {
    if !(rate_per_channel >= 0.0) || !rate_per_channel.is_finite() {
        return Err(DynamicsError::Config(format!(
            "dark rate {rate_per_channel} cts/s must be >= 0"
        )));
    }
    let duration = record.total_time();
    let expected = 2.0 * rate_per_channel * duration;
    if expected > MAX_EXPECTED_PHOTONS {
        return Err(DynamicsError::Size(format!(
            "expected {expected:.2e} dark counts exceeds the memory guard"
        )));
    }
    let tick = record.tick_resolution();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut extend = |ts: &[u64]| -> Result<Vec<u64>, DynamicsError> {
        let mut merged = ts.to_vec();
        let mut t = 0.0f64;
        if rate_per_channel > 0.0 {
            loop {
                let u: f64 = rng.random();
                t += -(1.0 - u).ln() / rate_per_channel;
                if t >= duration {
                    break;
                }
                merged.push((t / tick) as u64);
            }
        }
        merged.sort_unstable();
        Ok(merged)
    };
    let ticks_a = extend(record.channel_a().timestamps())?;
    let ticks_b = extend(record.channel_b().timestamps())?;
    let series_a = PhotonTimeSeries::new(CHANNEL_A, tick, ticks_a)
        .map_err(|e| DynamicsError::Config(e.to_string()))?;
    let series_b = PhotonTimeSeries::new(CHANNEL_B, tick, ticks_b)
        .map_err(|e| DynamicsError::Config(e.to_string()))?;
    AcquisitionRecord::new(series_a, series_b, Some(duration))
        .map_err(|e| DynamicsError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MHZ: f64 = 1e6;

    #[test]
    fn detected_rate_matches_steady_state_flux() {
        // Symmetric two-level at full collection: detected rate is
        // Γ_eg P_e = 25 Mcts/s across both channels.
        let m = RateModel::two_level(50.0 * MHZ, 50.0 * MHZ, 1.0).unwrap();
        let record = generate_photon_stream(&m, 0.2, 1e-9, 7).unwrap();
        let total = (record.counts_a() + record.counts_b()) as f64 / record.total_time();
        assert!(
            (total / 25e6 - 1.0).abs() < 0.01,
            "detected rate {total:.3e} vs 2.5e7"
        );
        // Fair beamsplitter.
        let imbalance = (record.counts_a() as f64 - record.counts_b() as f64).abs()
            / (record.counts_a() + record.counts_b()) as f64;
        assert!(imbalance < 0.01, "channel imbalance {imbalance}");
    }

    #[test]
    fn dark_model_yields_empty_record() {
        let m = RateModel::from_rates(2, &[(1, 0, 10.0 * MHZ), (0, 1, 10.0 * MHZ)], &[]).unwrap();
        let record = generate_photon_stream(&m, 0.01, 1e-9, 3).unwrap();
        assert_eq!(record.counts_a() + record.counts_b(), 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = RateModel::two_level(10.0 * MHZ, 20.0 * MHZ, 0.2).unwrap();
        let r1 = generate_photon_stream(&m, 0.05, 1e-9, 42).unwrap();
        let r2 = generate_photon_stream(&m, 0.05, 1e-9, 42).unwrap();
        assert_eq!(r1, r2);
        let r3 = generate_photon_stream(&m, 0.05, 1e-9, 43).unwrap();
        assert_ne!(r1, r3);
    }

    #[test]
    fn dead_time_removes_close_pairs() {
        let m = RateModel::two_level(80.0 * MHZ, 80.0 * MHZ, 1.0).unwrap();
        let record = generate_photon_stream(&m, 0.01, 1e-9, 5).unwrap();
        let dead = 50e-9;
        let cleaned = apply_dead_time(&record, dead).unwrap();
        assert!(cleaned.counts_a() < record.counts_a());
        for w in cleaned.channel_a().timestamps().windows(2) {
            assert!((w[1] - w[0]) as f64 * 1e-9 >= dead);
        }
        // Zero dead time is the identity.
        let same = apply_dead_time(&record, 0.0).unwrap();
        assert_eq!(same, record);
    }

    #[test]
    fn dark_counts_raise_rates_by_the_injected_amount() {
        let m = RateModel::two_level(10.0 * MHZ, 10.0 * MHZ, 0.05).unwrap();
        let record = generate_photon_stream(&m, 0.5, 1e-9, 6).unwrap();
        let rate = 2e5;
        let noisy = inject_dark_counts(&record, rate, 99).unwrap();
        let added_a = (noisy.counts_a() - record.counts_a()) as f64 / record.total_time();
        assert!(
            (added_a / rate - 1.0).abs() < 0.02,
            "added {added_a:.3e} cts/s"
        );
        assert!(noisy
            .channel_a()
            .timestamps()
            .windows(2)
            .all(|w| w[0] <= w[1]));
    }

    #[test]
    fn memory_guard_trips() {
        let m = RateModel::two_level(500.0 * MHZ, 500.0 * MHZ, 1.0).unwrap();
        assert!(matches!(
            generate_photon_stream(&m, 10_000.0, 1e-9, 1),
            Err(DynamicsError::Size(_))
        ));
    }
}
