use proptest::prelude::*;

use boolinf::boolfn::{min_norm_completion, oracle, subset_coords, subset_mask};
use boolinf::complexity::{cross_predictability, CpMode};
use boolinf::harness::{read_runs_csv, write_runs_csv, RunRecord};
use boolinf::pvr::{make_pvr, Aggregation, PvrSpec, WindowMode};
use boolinf::{seed, BooleanFunction};

fn real_fn(max_n: usize) -> impl Strategy<Value = BooleanFunction> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-2.0f64..2.0, 1 << n)
            .prop_map(move |v| BooleanFunction::from_values(n, v).unwrap())
    })
}

fn pm_fn(max_n: usize) -> impl Strategy<Value = BooleanFunction> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), 1 << n).prop_map(move |v| {
            let v = v.into_iter().map(|b| if b { 1.0 } else { -1.0 }).collect();
            BooleanFunction::from_values(n, v).unwrap()
        })
    })
}

fn pvr_spec() -> impl Strategy<Value = PvrSpec> {
    let agg = prop_oneof![
        Just(Aggregation::Parity),
        Just(Aggregation::Majority),
        Just(Aggregation::Min),
        Just(Aggregation::Max),
    ];
    let mode = prop_oneof![
        Just(WindowMode::Truncated),
        Just(WindowMode::Cyclic),
        Just(WindowMode::NonOverlapping),
    ];
    (1usize..=2, 1usize..=3, mode, agg)
        .prop_map(|(p, w, mode, agg)| PvrSpec::new(p, w, mode, agg))
        .prop_filter("valid and small", |s| s.validate().is_ok() && s.dimension() <= 10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip_and_parseval(f in real_fn(8)) {
        let s = f.fourier_transform();
        for (a, b) in f.values().iter().zip(s.inverse_transform().values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let mean_sq = f.values().iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
        prop_assert!((s.total_weight() - mean_sq).abs() < 1e-12);
        prop_assert!((s.degree_weights().iter().sum::<f64>() - mean_sq).abs() < 1e-12);
    }

    #[test]
    fn coefficients_match_direct_sums(f in real_fn(6), pick in any::<u32>()) {
        let mask = pick & ((1u32 << f.n()) - 1);
        let s = f.fourier_transform();
        prop_assert!((s.coeff(mask) - oracle::coefficient(&f, mask)).abs() < 1e-12);
        prop_assert_eq!(subset_mask(&subset_coords(mask)), mask);
    }

    #[test]
    fn influence_of_pm_function_is_flip_probability(f in pm_fn(7), k in 1usize..=7) {
        let k = 1 + (k - 1) % f.n();
        let spectral = f.fourier_transform().influence(k).unwrap();
        prop_assert!((spectral - oracle::flip_probability(&f, k).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn stability_is_monotone_and_matches_coupling(f in pm_fn(5), d in 0.0f64..0.5) {
        let s = f.fourier_transform();
        let stab = s.noise_stability(d).unwrap();
        prop_assert!((s.noise_stability(0.0).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(s.noise_stability((d + 0.01).min(0.5)).unwrap() <= stab + 1e-12);
        prop_assert!((stab - oracle::exhaustive_stability(&f, d).unwrap()).abs() < 1e-10);
        prop_assert!((s.noise_sensitivity(d).unwrap() - (1.0 - stab) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_spectrum_is_spectrum_of_frozen_function(f in real_fn(7), k in 1usize..=7) {
        let k = 1 + (k - 1) % f.n();
        let direct = f.freeze(k).unwrap().fourier_transform();
        let via = f.fourier_transform().frozen(k).unwrap();
        prop_assert!(direct.spectral_distance(&via).unwrap() < 1e-24);
        // uniform error of the frozen function is the influence, for any real f
        let inf = f.fourier_transform().influence(k).unwrap();
        let gen = f.half_mean_square_distance(&f.freeze(k).unwrap()).unwrap();
        prop_assert!((gen - inf).abs() < 1e-12);
    }

    #[test]
    fn min_norm_completion_agrees_on_slice_and_has_least_norm(f in real_fn(6), k in 1usize..=6) {
        let k = 1 + (k - 1) % f.n();
        let c = min_norm_completion(&f, k).unwrap();
        let s = f.fourier_transform();
        prop_assert!(c.frozen(k).unwrap().spectral_distance(&s.frozen(k).unwrap()).unwrap() < 1e-24);
        let low = f.freeze(k).unwrap().fourier_transform();
        prop_assert!(c.total_weight() <= low.total_weight() + 1e-12);
        prop_assert!(c.total_weight() <= s.total_weight() + 1e-12);
    }

    #[test]
    fn extension_and_permutation_preserve_structure(f in real_fn(5), extra in 1usize..=3, rot in 0usize..5) {
        let n = f.n();
        let ext = f.extend(n + extra).unwrap();
        let se = ext.fourier_transform();
        let s = f.fourier_transform();
        for m in 0..1u32 << n {
            prop_assert!((se.coeff(m) - s.coeff(m)).abs() < 1e-12);
        }
        for k in n + 1..=n + extra {
            prop_assert!(se.influence(k).unwrap() < 1e-24);
        }
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let g = f.compose_permutation(&perm).unwrap().fourier_transform();
        let total = |s: &boolinf::FourierSpectrum| s.influences().iter().sum::<f64>();
        prop_assert!((total(&g) - total(&s)).abs() < 1e-10);
        prop_assert!((g.total_weight() - s.total_weight()).abs() < 1e-10);
    }

    #[test]
    fn cp_is_between_squared_mean_and_weight(f in pm_fn(4)) {
        let cp = cross_predictability(&f, CpMode::Exact).unwrap().estimate;
        let mean = f.mean();
        prop_assert!(cp <= 1.0 + 1e-12);
        prop_assert!(cp >= mean * mean * mean * mean - 1e-12);
    }

    #[test]
    fn pvr_influence_matches_flip_count(spec in pvr_spec()) {
        let f = make_pvr(&spec).unwrap();
        let s = f.fourier_transform();
        for k in 1..=f.n() {
            prop_assert!((s.influence(k).unwrap() - oracle::flip_influence(&f, k).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn seed_derivation_is_deterministic(base in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(seed::derive(base, &[a, b]), seed::derive(base, &[a, b]));
        if a != b {
            prop_assert_ne!(seed::derive(base, &[a]), seed::derive(base, &[b]));
        }
    }

    #[test]
    fn runs_csv_round_trips(rows in prop::collection::vec(
        (0usize..20, any::<u64>(), 0u64..1_000_000, -1e3f64..1e3, -1e3f64..1e3, 0.0f64..10.0, 0.0f64..100.0), 0..8)
    ) {
        let runs: Vec<RunRecord> = rows
            .into_iter()
            .map(|(k, s, steps, ood, id, inf, t)| RunRecord {
                frozen_index: k,
                seed: s,
                steps,
                gen_error_ood: ood,
                gen_error_id: id,
                influence: inf,
                coefficient_trajectory: vec![],
                wall_time_s: t,
            })
            .collect();
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &runs).unwrap();
        prop_assert_eq!(read_runs_csv(&buf[..]).unwrap(), runs);
    }
}
