//! Orbit cross-predictability, the CP ≤ Stab check on 2n-extensions, and the
//! initial-alignment (INAL) estimator.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::boolfn::{check_delta, point, permute_mask, BooleanFunction};
use crate::error::{Error, Result};
use crate::nets::{Model, ModelConfig};
use crate::seed;

/// Largest `n` for which `S_n` is enumerated.
pub const MAX_EXACT_CP_DIM: usize = 8;
/// Largest `n` for which INAL takes the exact expectation over `X`.
pub const MAX_INAL_DIM: usize = 16;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CpMode {
    /// Every permutation of `S_n` once (`n ≤ 8`).
    Exact,
    /// Uniform random permutations.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    /// Zero for exact computations.
    pub std_error: f64,
}

/// `E_X[f(X)·(f∘π)(X)]`, exact over the truth table.
pub fn orbit_inner_product(f: &BooleanFunction, perm: &[usize]) -> f64 {
    let v = f.values();
    let s: f64 = (0..v.len() as u32)
        .map(|m| v[m as usize] * v[permute_mask(m, perm) as usize])
        .sum();
    s / v.len() as f64
}

/// `CP(orb(f)) = E_π [E_X[f(X)·(f∘π)(X)]²]` over uniform `π ∈ S_n`.
pub fn cross_predictability(f: &BooleanFunction, mode: CpMode) -> Result<Estimate> {
    let n = f.n();
    match mode {
        CpMode::Exact => {
            if n > MAX_EXACT_CP_DIM {
                return Err(Error::Unsupported(format!(
                    "exact CP enumerates S_n and needs n <= {MAX_EXACT_CP_DIM}, got {n}"
                )));
            }
            let mut perm: Vec<usize> = (0..n).collect();
            let mut total = 0.0;
            let mut count = 0usize;
            heap_permutations(&mut perm, |p| {
                total += orbit_inner_product(f, p).powi(2);
                count += 1;
            });
            Ok(Estimate {
                estimate: total / count as f64,
                std_error: 0.0,
            })
        }
        CpMode::MonteCarlo { samples, seed: base } => {
            if samples < 2 {
                return Err(Error::InvalidArgument(
                    "Monte-Carlo CP needs at least 2 samples".into(),
                ));
            }
            let chunks = samples.div_ceil(CHUNK);
            let sums: Vec<(f64, f64)> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = seed::rng(seed::derive(base, &[c as u64]));
                    let len = CHUNK.min(samples - c * CHUNK);
                    let mut perm: Vec<usize> = (0..n).collect();
                    let (mut s, mut s2) = (0.0, 0.0);
                    for _ in 0..len {
                        perm.shuffle(&mut rng);
                        let v = orbit_inner_product(f, &perm).powi(2);
                        s += v;
                        s2 += v * v;
                    }
                    (s, s2)
                })
                .collect();
            let (s, s2) = sums
                .iter()
                .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
            let m = samples as f64;
            let mean = s / m;
            let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
            Ok(Estimate {
                estimate: mean,
                std_error: (var / m).sqrt(),
            })
        }
    }
}

/// Heap's algorithm: calls `visit` once per permutation of `perm`.
fn heap_permutations<F: FnMut(&[usize])>(perm: &mut [usize], mut visit: F) {
    let n = perm.len();
    let mut c = vec![0usize; n];
    visit(perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpStabCheck {
    pub cp: f64,
    pub stab: f64,
    pub holds: bool,
}

/// Compares `CP(orb(f̄))` with `Stab_{δ'}(f)` for a 2n-extension `f̄` (given
/// on `2n` coordinates, ignoring the upper `n`).
///
/// For `δ' ≤ ¼` the bound `C(n,k)/C(2n,k) ≤ 2^{-k} ≤ (1-2δ')^k` holds at every
/// finite `n`, so `holds` is expected to be true.
pub fn verify_cp_stab(f_ext: &BooleanFunction, delta_prime: f64) -> Result<CpStabCheck> {
    check_delta(delta_prime)?;
    if delta_prime > 0.25 {
        return Err(Error::InvalidArgument(format!(
            "delta' = {delta_prime} must be <= 1/4"
        )));
    }
    let big_n = f_ext.n();
    if big_n % 2 != 0 {
        return Err(Error::NotExtended(format!("odd dimension {big_n}")));
    }
    let n = big_n / 2;
    let spectrum = f_ext.fourier_transform();
    let low = (1u32 << n) - 1;
    let upper = spectrum.max_abs_outside(low);
    if upper > 1e-12 {
        return Err(Error::NotExtended(format!(
            "coefficient of magnitude {upper:.3e} involves coordinates {}..={big_n}",
            n + 1
        )));
    }
    let cp = cross_predictability(f_ext, CpMode::Exact)?.estimate;
    let stab = spectrum.noise_stability(delta_prime)?;
    Ok(CpStabCheck {
        cp,
        stab,
        holds: cp <= stab + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InalEstimate {
    /// Maximum over hidden neurons of the per-neuron estimate.
    pub value: f64,
    /// `(layer, neuron)` attaining the maximum (0-based).
    pub argmax: (usize, usize),
    /// Per hidden layer, per neuron `(mean, std_error)` of `E_X[f·h_v]²`.
    pub per_neuron: Vec<Vec<(f64, f64)>>,
}

/// For every hidden neuron `v`, averages `E_X[f(X)·h_v(X)]²` over
/// `init_samples` independent initializations (exact over `X`), then takes
/// the max over neurons. The output neuron is not included.
pub fn estimate_inal(
    f: &BooleanFunction,
    cfg: &ModelConfig,
    init_samples: usize,
    base_seed: u64,
) -> Result<InalEstimate> {
    let n = f.n();
    if n > MAX_INAL_DIM {
        return Err(Error::Unsupported(format!(
            "INAL takes an exact expectation over X and needs n <= {MAX_INAL_DIM}, got {n}"
        )));
    }
    if cfg.input_dim != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cfg.input_dim,
        });
    }
    if cfg.hidden.is_empty() {
        return Err(Error::InvalidModel("INAL needs at least one hidden layer".into()));
    }
    if init_samples < 2 {
        return Err(Error::InvalidArgument("INAL needs at least 2 initializations".into()));
    }
    cfg.validate()?;
    let xs = Array2::from_shape_fn((f.len(), n), |(m, i)| point(n, m as u32)[i]);
    let fx = ndarray::Array1::from(f.values().to_vec());
    let scale = 1.0 / f.len() as f64;

    let per_init: Vec<Vec<ndarray::Array1<f64>>> = (0..init_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = seed::rng(seed::derive(base_seed, &[s as u64]));
            let model = Model::init(cfg, &mut rng)?;
            Ok(model
                .hidden_outputs(xs.view())
                .into_iter()
                .map(|h| (fx.dot(&h) * scale).mapv(|c| c * c))
                .collect())
        })
        .collect::<Result<_>>()?;

    let m = init_samples as f64;
    let mut per_neuron = Vec::with_capacity(cfg.hidden.len());
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for (layer, &width) in cfg.hidden.iter().enumerate() {
        let mut stats = Vec::with_capacity(width);
        for v in 0..width {
            let (s, s2) = per_init
                .iter()
                .map(|r| r[layer][v])
                .fold((0.0, 0.0), |(a, b), x| (a + x, b + x * x));
            let mean = s / m;
            let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
            if mean > best.0 {
                best = (mean, (layer, v));
            }
            stats.push((mean, (var / m).sqrt()));
        }
        per_neuron.push(stats);
    }
    Ok(InalEstimate {
        value: best.0,
        argmax: best.1,
        per_neuron,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::subset_mask;

    #[test]
    fn heap_visits_every_permutation_once() {
        let mut seen = std::collections::HashSet::new();
        let mut p: Vec<usize> = (0..5).collect();
        heap_permutations(&mut p, |q| {
            assert!(seen.insert(q.to_vec()));
        });
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn cp_of_dictator_on_two_bits() {
        let f = BooleanFunction::dictator(2, 1).unwrap();
        let cp = cross_predictability(&f, CpMode::Exact).unwrap();
        assert!((cp.estimate - 0.5).abs() < 1e-15);
        assert_eq!(cp.std_error, 0.0);
    }

    #[test]
    fn cp_of_extended_parity() {
        let f = BooleanFunction::character(2, 0b11).extend(4).unwrap();
        let cp = cross_predictability(&f, CpMode::Exact).unwrap();
        assert!((cp.estimate - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cp_of_zero_function() {
        let f = BooleanFunction::constant(3, 0.0).unwrap();
        assert_eq!(cross_predictability(&f, CpMode::Exact).unwrap().estimate, 0.0);
    }

    #[test]
    fn exact_cp_rejects_large_n() {
        let f = BooleanFunction::constant(9, 1.0).unwrap();
        assert!(cross_predictability(&f, CpMode::Exact).is_err());
    }

    #[test]
    fn monte_carlo_cp_agrees_with_exact() {
        let f = BooleanFunction::majority(3).unwrap().extend(6).unwrap();
        let exact = cross_predictability(&f, CpMode::Exact).unwrap().estimate;
        let mc = cross_predictability(&f, CpMode::MonteCarlo { samples: 10_000, seed: 3 }).unwrap();
        assert!(mc.std_error > 0.0);
        assert!((mc.estimate - exact).abs() <= 3.0 * mc.std_error);
    }

    #[test]
    fn cp_invariant_under_relabeling() {
        let f = BooleanFunction::from_evaluator(5, |x| x[0] * x[1] + 0.5 * x[4] - x[2] * x[3] * x[4])
            .unwrap();
        let g = f.compose_permutation(&[3, 0, 4, 1, 2]).unwrap();
        let a = cross_predictability(&f, CpMode::Exact).unwrap().estimate;
        let b = cross_predictability(&g, CpMode::Exact).unwrap().estimate;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cp_stab_examples() {
        let parity = BooleanFunction::character(2, 0b11).extend(4).unwrap();
        let r = verify_cp_stab(&parity, 0.25).unwrap();
        assert!((r.cp - 1.0 / 6.0).abs() < 1e-15);
        assert!((r.stab - 0.25).abs() < 1e-15);
        assert!(r.holds);

        let dict = BooleanFunction::dictator(1, 1).unwrap().extend(2).unwrap();
        let r = verify_cp_stab(&dict, 0.2).unwrap();
        assert!((r.cp - 0.5).abs() < 1e-15);
        assert!((r.stab - 0.6).abs() < 1e-15);
        assert!(r.holds);

        let r = verify_cp_stab(&parity, 0.0).unwrap();
        assert_eq!(r.stab, 1.0);
        assert!(r.holds);
    }

    #[test]
    fn cp_stab_rejects_non_extended() {
        let f = BooleanFunction::character(4, subset_mask(&[1, 3]));
        assert!(matches!(verify_cp_stab(&f, 0.1), Err(Error::NotExtended(_))));
        let odd = BooleanFunction::dictator(3, 1).unwrap();
        assert!(verify_cp_stab(&odd, 0.1).is_err());
        let ok = BooleanFunction::dictator(2, 1).unwrap();
        assert!(verify_cp_stab(&ok, 0.3).is_err());
    }

    #[test]
    fn inal_of_zero_target_is_zero() {
        let f = BooleanFunction::constant(4, 0.0).unwrap();
        let r = estimate_inal(&f, &ModelConfig::mlp(4, vec![8, 4]), 5, 1).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.per_neuron.len(), 2);
        assert_eq!(r.per_neuron[0].len(), 8);
    }

    #[test]
    fn inal_dictator_exceeds_parity() {
        let cfg = ModelConfig::mlp(8, vec![32]);
        let parity = BooleanFunction::character(8, 0xff);
        let dict = BooleanFunction::dictator(8, 1).unwrap();
        let p = estimate_inal(&parity, &cfg, 200, 11).unwrap();
        let d = estimate_inal(&dict, &cfg, 200, 11).unwrap();
        assert!(d.value > p.value);
        assert!(p.value < 1e-3);
    }

    #[test]
    fn inal_matches_direct_sampling() {
        // Independent route: 10x initializations, each hidden neuron
        // evaluated pointwise with explicit loops.
        let n = 6;
        let cfg = ModelConfig::mlp(n, vec![4]);
        let f = BooleanFunction::from_evaluator(n, |x| x[0] * x[1]).unwrap();
        let r = estimate_inal(&f, &cfg, 300, 5).unwrap();
        let mut sums = vec![(0.0, 0.0); 4];
        let m = 3000;
        for s in 0..m {
            let mut rng = seed::rng(seed::derive(99, &[s]));
            let model = Model::init(&cfg, &mut rng).unwrap();
            let l = &model.layers()[0];
            for (v, acc) in sums.iter_mut().enumerate() {
                let mut e = 0.0;
                for mask in 0..(1u32 << n) {
                    let x = point(n, mask);
                    let z: f64 = (0..n).map(|i| x[i] * l.weights[(i, v)]).sum::<f64>() + l.bias[v];
                    e += f.value(mask) * z.max(0.0);
                }
                let e = (e / 64.0).powi(2);
                acc.0 += e;
                acc.1 += e * e;
            }
        }
        for (v, &(s, s2)) in sums.iter().enumerate() {
            let mean = s / m as f64;
            let se = ((s2 / m as f64 - mean * mean) / m as f64).sqrt();
            let (est, est_se) = r.per_neuron[0][v];
            assert!(
                (est - mean).abs() <= 4.0 * (se * se + est_se * est_se).sqrt(),
                "neuron {v}: {est} ± {est_se} vs {mean} ± {se}"
            );
        }
    }
}
