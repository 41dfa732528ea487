//! Property tests for the cross-cutting invariants: oracle equivalence
//! of the stream correlator, format round-trips, model symmetry bounds,
//! and the doubly stochastic structure of spin mixing.

use proptest::prelude::*;

use pecs_core::correlator::{brute_force_correlate, cross_correlate, Partition, TauAxis, TauScale};
use pecs_core::dynamics::{overlap_weights, spin_eigenbasis, SpinManifold};
use pecs_core::fitting::EmpiricalModel;
use pecs_core::timetag::{
    export_binary, import_binary, AcquisitionRecord, PhotonTimeSeries, CHANNEL_A, CHANNEL_B,
};

fn record_strategy() -> impl Strategy<Value = AcquisitionRecord> {
    let ticks = prop::collection::vec(0u64..200_000, 0..400);
    (ticks.clone(), ticks).prop_map(|(mut a, mut b)| {
        a.sort_unstable();
        b.sort_unstable();
        let series_a = PhotonTimeSeries::new(CHANNEL_A, 1e-9, a).unwrap();
        let series_b = PhotonTimeSeries::new(CHANNEL_B, 1e-9, b).unwrap();
        AcquisitionRecord::new(series_a, series_b, Some(200_000.0 * 1e-9)).unwrap()
    })
}

fn axis_strategy() -> impl Strategy<Value = TauAxis> {
    (1u32..60, prop::bool::ANY, prop::bool::ANY).prop_map(|(bins, log, two_sided)| {
        let span = 200_000.0 * 1e-9;
        if log {
            let lo = if two_sided { -span / 2.0 } else { 4e-9 };
            TauAxis::build((lo, span / 2.0), 4e-9 * bins as f64, TauScale::Logarithmic).unwrap()
        } else {
            let lo = if two_sided { -span / 3.0 } else { 0.0 };
            let hi = span / 3.0;
            TauAxis::build((lo, hi), (hi - lo) / (bins + 1) as f64, TauScale::Linear).unwrap()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The stream correlator and the quadratic pair enumeration agree
    /// integer-exactly for every record, axis, and partition.
    #[test]
    fn correlator_matches_oracle(
        record in record_strategy(),
        axis in axis_strategy(),
        partitioned in prop::bool::ANY,
        cut in 0.2f64..0.8,
    ) {
        let partition = partitioned
            .then(|| {
                Partition::from_intervals(vec![(0.0, cut * 200_000.0 * 1e-9)]).unwrap()
            });
        let slow = brute_force_correlate(&record, &axis, partition.as_ref()).unwrap();
        match cross_correlate(&record, &axis, partition.as_ref()) {
            Ok(fast) => prop_assert_eq!(fast.raw_counts(), slow.as_slice()),
            Err(_) => prop_assert!(slow.iter().all(|&m| m == 0)),
        }
    }

    /// Importing an exported record reproduces it bit-exactly, and the
    /// timestamps stay sorted.
    #[test]
    fn ttag1_round_trip(record in record_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.ttag1");
        export_binary(&record, &path).unwrap();
        let back = import_binary(&path).unwrap().record;
        prop_assert_eq!(&back, &record);
        prop_assert!(back.channel_a().timestamps().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(back.channel_b().timestamps().windows(2).all(|w| w[0] <= w[1]));
    }

    /// The empirical model is even in tau and bounded by
    /// [1 - C1, 1 + sum(C_i)].
    #[test]
    fn empirical_model_even_and_bounded(
        c1 in 0.0f64..3.0,
        tau1 in 1e-9f64..1e-6,
        c2 in 0.0f64..2.0,
        tau2 in 1e-8f64..1e-4,
        tau in -1e-3f64..1e-3,
    ) {
        let model = EmpiricalModel::new(c1, tau1, vec![(c2, tau2)]).unwrap();
        let g = model.evaluate(tau);
        prop_assert!((g - model.evaluate(-tau)).abs() < 1e-12);
        prop_assert!(g >= 1.0 - c1 - 1e-12);
        prop_assert!(g <= 1.0 + c2 + 1e-12);
    }

    /// Squared-overlap spin mixing is doubly stochastic for any field.
    #[test]
    fn spin_overlaps_doubly_stochastic(
        g_factor in 1.5f64..2.5,
        zfs in -3000.0f64..3000.0,
        b in 0.0f64..2000.0,
        angle in 0.0f64..180.0,
    ) {
        let manifold = SpinManifold { g_factor, zero_field_splitting_mhz: zfs };
        let weights = overlap_weights(&spin_eigenbasis(&manifold, b, angle));
        for k in 0..3 {
            let row: f64 = (0..3).map(|j| weights[(k, j)]).sum();
            let col: f64 = (0..3).map(|i| weights[(i, k)]).sum();
            prop_assert!((row - 1.0).abs() < 1e-9);
            prop_assert!((col - 1.0).abs() < 1e-9);
        }
    }
}
